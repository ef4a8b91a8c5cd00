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

#include "dsaml/meta.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "dsaml/error.hpp"
#include "dsaml/log.hpp"

namespace dsaml {

void MetaConfig::validate() const {
  if (support_size == 0) throw ConfigError("meta: support_size must be at least 1");
  if (query_size == 0) throw ConfigError("meta: query_size must be at least 1");
  if (inner_steps == 0) throw ConfigError("meta: inner_steps must be at least 1");
  if (!(inner_lr >= 0.0) || !std::isfinite(inner_lr)) {
    throw ConfigError("meta: inner_lr must be finite and >= 0");
  }
  if (!(outer_lr > 0.0) || !std::isfinite(outer_lr)) {
    throw ConfigError("meta: outer_lr must be positive");
  }
  if (tasks_per_batch == 0) throw ConfigError("meta: tasks_per_batch must be at least 1");
}

TaskStrategy parse_strategy(const std::string& name) {
  if (name == "annotator") return TaskStrategy::kAnnotator;
  if (name == "mean") return TaskStrategy::kMean;
  throw ConfigError("unknown strategy '" + name + "' (expected annotator or mean)");
}

std::string to_string(TaskStrategy strategy) {
  return strategy == TaskStrategy::kAnnotator ? "annotator" : "mean";
}

TaskSampler::TaskSampler(std::map<std::string, std::vector<AnnotatedClip>> pools,
                         std::size_t support_size, std::size_t query_size, std::uint64_t seed)
    : support_size_(support_size), query_size_(query_size), rng_(seed) {
  const std::size_t need = support_size + query_size;
  for (auto& [group, clips] : pools) {
    std::set<std::string> ids;
    for (const auto& c : clips) {
      if (!ids.insert(c.clip_id).second) {
        throw Error("group '" + group + "' lists clip '" + c.clip_id + "' twice");
      }
    }
    if (clips.size() < need) {
      excluded_.push_back(group);
      log_warning("excluding '" + group + "': " + std::to_string(clips.size()) +
                  " clips, tasks need " + std::to_string(need));
      continue;
    }
    groups_.push_back(group);
    pools_.emplace(group, std::move(clips));
  }
  if (groups_.empty()) {
    throw Error("no task group has the " + std::to_string(need) +
                " clips needed for support " + std::to_string(support_size) + " + query " +
                std::to_string(query_size));
  }
}

Task TaskSampler::draw() {
  const std::string& group = groups_[rng_.index(groups_.size())];
  const auto& pool = pools_.at(group);
  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  // partial Fisher-Yates: the first support + query slots are a uniform draw
  const std::size_t need = support_size_ + query_size_;
  for (std::size_t i = 0; i < need; ++i) {
    std::swap(order[i], order[i + rng_.index(order.size() - i)]);
  }
  Task task;
  task.annotator_id = group;
  for (std::size_t i = 0; i < support_size_; ++i) task.support.push_back(pool[order[i]]);
  for (std::size_t i = support_size_; i < need; ++i) task.query.push_back(pool[order[i]]);
  return task;
}

TaskSampler build_tasks_by_annotator(const std::vector<AnnotatedClip>& clips,
                                     const MetaConfig& cfg, std::uint64_t seed) {
  std::map<std::string, std::vector<AnnotatedClip>> pools;
  for (const auto& c : clips) pools[c.annotator_id].push_back(c);
  return TaskSampler(std::move(pools), cfg.support_size, cfg.query_size, seed);
}

TaskSampler build_tasks_mean(const std::vector<AnnotatedClip>& clips, const MetaConfig& cfg,
                             std::uint64_t seed) {
  std::map<std::string, std::vector<AnnotatedClip>> pools;
  pools[kMeanAnnotator] = mean_labels(clips);
  return TaskSampler(std::move(pools), cfg.support_size, cfg.query_size, seed);
}

TaskSampler build_tasks(TaskStrategy strategy, const std::vector<AnnotatedClip>& clips,
                        const MetaConfig& cfg, std::uint64_t seed) {
  return strategy == TaskStrategy::kAnnotator ? build_tasks_by_annotator(clips, cfg, seed)
                                              : build_tasks_mean(clips, cfg, seed);
}

LossAndGrad batch_loss_and_grad(const DsamlModel& model, const ParamSet& params,
                                const std::vector<AnnotatedClip>& clips, const Dataset& data) {
  if (clips.empty()) throw Error("empty clip batch");
  LossAndGrad out;
  out.grad = params.zeros_like();
  const double w = 1.0 / static_cast<double>(clips.size());
  for (const auto& c : clips) {
    LossAndGrad one = model.loss_and_grad(data.mel(c.clip_id), c.label, params);
    out.loss += w * one.loss;
    out.grad.accumulate(one.grad, w);
  }
  return out;
}

double batch_loss(const DsamlModel& model, const ParamSet& params,
                  const std::vector<AnnotatedClip>& clips, const Dataset& data) {
  if (clips.empty()) throw Error("empty clip batch");
  double loss = 0.0;
  for (const auto& c : clips) loss += model.loss_value(data.mel(c.clip_id), c.label, params);
  return loss / static_cast<double>(clips.size());
}

namespace {

std::string describe(const std::vector<AnnotatedClip>& clips) {
  std::string s;
  for (const auto& c : clips) s += (s.empty() ? "" : ", ") + c.annotator_id + "/" + c.clip_id;
  return s;
}

}  // namespace

Adapted inner_adapt(const DsamlModel& model, const ParamSet& theta,
                    const std::vector<AnnotatedClip>& support, const Dataset& data,
                    std::size_t steps, double inner_lr) {
  if (steps == 0) throw ConfigError("inner_adapt: steps must be at least 1");
  if (support.empty()) throw Error("inner_adapt: empty support set");
  Adapted out{theta.clone(), {}};
  for (std::size_t s = 0; s <= steps; ++s) {
    try {
      if (s == steps) {
        out.support_losses.push_back(batch_loss(model, out.params, support, data));
        break;
      }
      LossAndGrad lg = batch_loss_and_grad(model, out.params, support, data);
      if (!std::isfinite(lg.loss) || !lg.grad.all_finite()) {
        throw NumericError("non-finite support loss or gradient");
      }
      out.support_losses.push_back(lg.loss);
      sgd_step(out.params, lg.grad, inner_lr);
    } catch (const NumericError& e) {
      throw NumericError("inner adaptation diverged at step " + std::to_string(s) +
                         " on support [" + describe(support) + "]: " + e.what());
    }
  }
  if (!std::isfinite(out.support_losses.back())) {
    throw NumericError("inner adaptation produced a non-finite support loss on [" +
                       describe(support) + "]");
  }
  return out;
}

namespace {

void finish_episode(std::size_t episode, EpisodeLog entry, TrainResult& result,
                    const MetaConfig& cfg, const MetaHooks& hooks) {
  if (!std::isfinite(entry.mean_query_loss) || !result.params.all_finite()) {
    throw NumericError("training diverged at episode " + std::to_string(episode));
  }
  result.log.push_back(entry);
  if (hooks.on_episode) hooks.on_episode(entry);
  if (hooks.on_checkpoint && cfg.checkpoint_every > 0 && (episode + 1) % cfg.checkpoint_every == 0) {
    hooks.on_checkpoint(episode + 1, result.params);
  }
}

}  // namespace

TrainResult meta_train(const DsamlModel& model, const ParamSet& theta0, TaskSampler& sampler,
                       const Dataset& data, const MetaConfig& cfg, const MetaHooks& hooks) {
  cfg.validate();
  TrainResult result{theta0.clone(), {}};
  Adam adam({.lr = cfg.outer_lr});
  for (std::size_t episode = 0; episode < cfg.episodes; ++episode) {
    ParamSet meta_grad = result.params.zeros_like();
    EpisodeLog entry{episode, 0.0, 0.0};
    for (std::size_t t = 0; t < cfg.tasks_per_batch; ++t) {
      Task task = sampler.draw();
      Adapted adapted;
      LossAndGrad query;
      try {
        adapted = inner_adapt(model, result.params, task.support, data, cfg.inner_steps,
                              cfg.inner_lr);
        query = batch_loss_and_grad(model, adapted.params, task.query, data);
      } catch (const NumericError& e) {
        throw NumericError("training diverged at episode " + std::to_string(episode) + ": " +
                           e.what());
      }
      meta_grad.accumulate(query.grad);
      entry.mean_query_loss += query.loss;
      entry.mean_support_loss_post_adapt += adapted.support_losses.back();
    }
    const double n = static_cast<double>(cfg.tasks_per_batch);
    entry.mean_query_loss /= n;
    entry.mean_support_loss_post_adapt /= n;
    if (!meta_grad.all_finite()) {
      throw NumericError("training diverged at episode " + std::to_string(episode));
    }
    adam.step(result.params, meta_grad);
    finish_episode(episode, entry, result, cfg, hooks);
  }
  return result;
}

TrainResult train_supervised(const DsamlModel& model, const ParamSet& theta0,
                             TaskSampler& sampler, const Dataset& data, const MetaConfig& cfg,
                             const MetaHooks& hooks) {
  cfg.validate();
  TrainResult result{theta0.clone(), {}};
  Adam adam({.lr = cfg.outer_lr});
  for (std::size_t episode = 0; episode < cfg.episodes; ++episode) {
    ParamSet grad = result.params.zeros_like();
    EpisodeLog entry{episode, 0.0, 0.0};
    for (std::size_t t = 0; t < cfg.tasks_per_batch; ++t) {
      Task task = sampler.draw();
      std::vector<AnnotatedClip> batch = task.support;
      batch.insert(batch.end(), task.query.begin(), task.query.end());
      LossAndGrad lg;
      try {
        lg = batch_loss_and_grad(model, result.params, batch, data);
        entry.mean_support_loss_post_adapt += batch_loss(model, result.params, task.support, data);
        entry.mean_query_loss += batch_loss(model, result.params, task.query, data);
      } catch (const NumericError& e) {
        throw NumericError("training diverged at episode " + std::to_string(episode) + ": " +
                           e.what());
      }
      grad.accumulate(lg.grad);
    }
    const double n = static_cast<double>(cfg.tasks_per_batch);
    entry.mean_query_loss /= n;
    entry.mean_support_loss_post_adapt /= n;
    adam.step(result.params, grad);
    finish_episode(episode, entry, result, cfg, hooks);
  }
  return result;
}

ParamSet personalize(const DsamlModel& model, const ParamSet& theta_hat,
                     const std::vector<AnnotatedClip>& personal_support, const Dataset& data,
                     const MetaConfig& cfg) {
  if (personal_support.empty()) throw Error("personalize: empty support set");
  return inner_adapt(model, theta_hat, personal_support, data, cfg.inner_steps, cfg.inner_lr)
      .params;
}

void write_training_log(const std::filesystem::path& path, const std::vector<EpisodeLog>& log) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.precision(17);
  out << "episode,mean_query_loss,mean_support_loss_post_adapt\n";
  for (const auto& e : log) {
    out << e.episode << ',' << e.mean_query_loss << ',' << e.mean_support_loss_post_adapt << '\n';
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace dsaml
