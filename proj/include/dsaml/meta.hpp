// Copyright 2026 The DSAML Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dsaml/dataset.hpp"
#include "dsaml/model.hpp"
#include "dsaml/optim.hpp"
#include "dsaml/rng.hpp"

namespace dsaml {

struct MetaConfig {
  std::size_t inner_steps = 5;
  double inner_lr = 0.01;
  double outer_lr = 5e-5;
  std::size_t support_size = 1;
  std::size_t query_size = 15;
  std::size_t tasks_per_batch = 4;
  std::size_t episodes = 300;
  // Save a checkpoint every N episodes through MetaHooks (0 disables).
  std::size_t checkpoint_every = 0;

  void validate() const;
};

struct Task {
  std::string annotator_id;
  std::vector<AnnotatedClip> support;
  std::vector<AnnotatedClip> query;
};

enum class TaskStrategy { kAnnotator, kMean };

TaskStrategy parse_strategy(const std::string& name);
std::string to_string(TaskStrategy strategy);

// Draws tasks from per-group clip pools. Each draw picks a group uniformly,
// then a support set and a disjoint query set without replacement.
class TaskSampler {
 public:
  TaskSampler(std::map<std::string, std::vector<AnnotatedClip>> pools,
              std::size_t support_size, std::size_t query_size, std::uint64_t seed);

  Task draw();
  const std::vector<std::string>& groups() const { return groups_; }
  // Groups dropped for having fewer than support + query clips.
  const std::vector<std::string>& excluded() const { return excluded_; }

 private:
  std::map<std::string, std::vector<AnnotatedClip>> pools_;
  std::vector<std::string> groups_;
  std::vector<std::string> excluded_;
  std::size_t support_size_;
  std::size_t query_size_;
  Rng rng_;
};

// One pool per annotator; every task holds a single annotator's labels.
TaskSampler build_tasks_by_annotator(const std::vector<AnnotatedClip>& clips,
                                     const MetaConfig& cfg, std::uint64_t seed);
// One pool of per-clip mean labels across annotators.
TaskSampler build_tasks_mean(const std::vector<AnnotatedClip>& clips, const MetaConfig& cfg,
                             std::uint64_t seed);
TaskSampler build_tasks(TaskStrategy strategy, const std::vector<AnnotatedClip>& clips,
                        const MetaConfig& cfg, std::uint64_t seed);

// Mean training loss over clips, with its gradient.
LossAndGrad batch_loss_and_grad(const DsamlModel& model, const ParamSet& params,
                                const std::vector<AnnotatedClip>& clips, const Dataset& data);
double batch_loss(const DsamlModel& model, const ParamSet& params,
                  const std::vector<AnnotatedClip>& clips, const Dataset& data);

struct Adapted {
  ParamSet params;
  // Support loss before each step, then after the last one (steps + 1 values).
  std::vector<double> support_losses;
};

// Clones theta and takes `steps` full-batch gradient steps on the support set.
Adapted inner_adapt(const DsamlModel& model, const ParamSet& theta,
                    const std::vector<AnnotatedClip>& support, const Dataset& data,
                    std::size_t steps, double inner_lr);

struct EpisodeLog {
  std::size_t episode = 0;
  double mean_query_loss = 0.0;
  double mean_support_loss_post_adapt = 0.0;
};

struct MetaHooks {
  std::function<void(const EpisodeLog&)> on_episode;
  std::function<void(std::size_t episode, const ParamSet&)> on_checkpoint;
};

struct TrainResult {
  ParamSet params;
  std::vector<EpisodeLog> log;
};

// First-order MAML: each task's query gradient is taken at its adapted
// parameters and applied to theta; the summed gradient drives one Adam step.
TrainResult meta_train(const DsamlModel& model, const ParamSet& theta0, TaskSampler& sampler,
                       const Dataset& data, const MetaConfig& cfg, const MetaHooks& hooks = {});

// Plain supervised training without inner adaptation: every episode draws
// the same number of tasks and steps Adam on the loss over support and query
// clips together. The log's support column is the pre-step support loss.
TrainResult train_supervised(const DsamlModel& model, const ParamSet& theta0,
                             TaskSampler& sampler, const Dataset& data, const MetaConfig& cfg,
                             const MetaHooks& hooks = {});

ParamSet personalize(const DsamlModel& model, const ParamSet& theta_hat,
                     const std::vector<AnnotatedClip>& personal_support, const Dataset& data,
                     const MetaConfig& cfg);

void write_training_log(const std::filesystem::path& path, const std::vector<EpisodeLog>& log);

}  // namespace dsaml
