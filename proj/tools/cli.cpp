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

#include "cli.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>

#include "CLI11.hpp"
#include "dsaml/error.hpp"
#include "dsaml/evalkit.hpp"
#include "dsaml/meta.hpp"
#include "dsaml/model.hpp"
#include "run_config.hpp"

namespace dsaml::cli {
namespace fs = std::filesystem;

namespace {

constexpr const char* kCheckpointFile = "checkpoint.dsml";
constexpr const char* kConfigFile = "config.ini";

// A failure that is the caller's fault: bad flags, files or combinations.
struct UsageError : Error {
  using Error::Error;
};

std::string number(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string seconds(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", t);
  return buf;
}

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

// Config file (or the one saved beside a checkpoint), then --set, then the
// command's dedicated flags, then derivation and validation.
RunConfig build_config(const Common& common, const fs::path& checkpoint,
                       const std::function<void(RunConfig&)>& flags = {}) {
  RunConfig cfg;
  if (!common.config.empty()) {
    cfg.load(common.config);
  } else if (!checkpoint.empty() && fs::exists(checkpoint.parent_path() / kConfigFile)) {
    cfg.load(checkpoint.parent_path() / kConfigFile);
  }
  for (const auto& kv : common.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (common.seed) cfg.seed = *common.seed;
  if (flags) flags(cfg);
  cfg.resolve();
  return cfg;
}

void prepare_output(const fs::path& dir, const RunConfig& cfg) {
  fs::create_directories(dir);
  cfg.save(dir / kConfigFile);
}

ParamSet load_checkpoint(const fs::path& path, const DsamlModel& model) {
  if (!fs::exists(path)) throw UsageError("checkpoint '" + path.string() + "' does not exist");
  ParamSet params = ParamSet::load(path);
  model.check_params(params);
  return params;
}

// A WAV file or a cached mel sequence, by extension.
MelSequence load_clip(const fs::path& path, const RunConfig& cfg) {
  if (!fs::exists(path)) throw UsageError("clip '" + path.string() + "' does not exist");
  if (path.extension() == ".mel") {
    return read_mel_cache(path, cfg.mel.resolution_hz, cfg.mel.trim_head_s);
  }
  return preprocess(load_audio(path, cfg.mel.sample_rate), cfg.mel);
}

Dataset load_data(const std::string& data_dir, bool synthetic, const RunConfig& cfg) {
  if (synthetic == !data_dir.empty()) throw UsageError("give exactly one of --data or --synthetic");
  if (synthetic) return synth_population(cfg.population).data;
  if (!fs::is_directory(data_dir)) throw UsageError("dataset '" + data_dir + "' is not a directory");
  return load_dataset(data_dir, cfg.mel);
}

int cmd_preprocess(const Common& common, const std::string& audio_dir, const std::string& out_dir,
                   std::ostream& out, std::ostream& err) {
  const RunConfig cfg = build_config(common, {});
  std::vector<fs::path> inputs;
  if (fs::is_directory(audio_dir)) {
    for (const auto& entry : fs::directory_iterator(audio_dir)) {
      std::string ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
      if (entry.is_regular_file() && ext == ".wav") inputs.push_back(entry.path());
    }
  }
  std::sort(inputs.begin(), inputs.end());
  if (inputs.empty()) {
    err << "no input clips in '" << audio_dir << "'\n";
    return kUsage;
  }
  prepare_output(out_dir, cfg);
  std::ofstream manifest(fs::path(out_dir) / "manifest.csv", std::ios::trunc);
  manifest << "clip_id,k,frames,n_mels\n";
  std::vector<std::string> failed;
  for (const auto& path : inputs) {
    try {
      const MelSequence mel = preprocess(load_audio(path, cfg.mel.sample_rate), cfg.mel);
      write_mel_cache(fs::path(out_dir) / (mel.clip_id + ".mel"), mel);
      manifest << mel.clip_id << ',' << mel.steps() << ',' << mel.frames() << ',' << mel.n_mels() << '\n';
    } catch (const std::exception& e) {
      failed.push_back(path.filename().string());
      err << "failed: " << path.filename().string() << ": " << e.what() << '\n';
    }
  }
  out << (inputs.size() - failed.size()) << " of " << inputs.size() << " clips preprocessed\n";
  if (!failed.empty()) {
    err << failed.size() << " clip(s) failed:";
    for (const auto& f : failed) err << ' ' << f;
    err << '\n';
    return kFailure;
  }
  return kOk;
}

int cmd_synth(const Common& common, const std::string& out_dir, std::ostream& out) {
  const RunConfig cfg = build_config(common, {});
  const Population pop = synth_population(cfg.population);
  prepare_output(out_dir, cfg);
  write_dataset(out_dir, pop.data);
  std::ofstream t(fs::path(out_dir) / "annotators.csv", std::ios::trunc);
  t << "annotator_id,gain_valence,gain_arousal,offset_valence,offset_arousal,lag\n";
  for (const auto& a : pop.transforms) {
    t << a.annotator_id << ',' << number(a.gain[0]) << ',' << number(a.gain[1]) << ','
      << number(a.offset[0]) << ',' << number(a.offset[1]) << ',' << a.lag << '\n';
  }
  out << "wrote " << pop.data.mels.size() << " clips x " << pop.transforms.size()
      << " annotators to " << out_dir << '\n';
  return kOk;
}

struct TrainFlags {
  std::string data_dir;
  bool synthetic = false;
  std::string strategy = "annotator";
  std::string out_dir;
  std::optional<std::size_t> episodes, inner_steps, checkpoint_every;
  std::optional<double> inner_lr, outer_lr;
};

void apply_meta_flags(RunConfig& cfg, const std::optional<std::size_t>& inner_steps,
                      const std::optional<double>& inner_lr) {
  if (inner_steps) cfg.meta.inner_steps = *inner_steps;
  if (inner_lr) cfg.meta.inner_lr = *inner_lr;
}

int cmd_train(const Common& common, const TrainFlags& f, std::ostream& out) {
  const RunConfig cfg = build_config(common, {}, [&](RunConfig& c) {
    if (f.episodes) c.meta.episodes = *f.episodes;
    if (f.outer_lr) c.meta.outer_lr = *f.outer_lr;
    if (f.checkpoint_every) c.meta.checkpoint_every = *f.checkpoint_every;
    apply_meta_flags(c, f.inner_steps, f.inner_lr);
  });
  if (f.strategy != "annotator" && f.strategy != "mean" && f.strategy != "supervised") {
    throw UsageError("unknown strategy '" + f.strategy + "' (expected annotator, mean or supervised)");
  }
  const bool supervised = f.strategy == "supervised";
  const TaskStrategy strategy = supervised ? TaskStrategy::kMean : parse_strategy(f.strategy);
  const Dataset data = load_data(f.data_dir, f.synthetic, cfg);
  const DsamlModel model(cfg.model);
  const ParamSet theta0 = model.init_params(derive_seed(cfg.seed, 1));
  TaskSampler sampler = build_tasks(strategy, data.clips, cfg.meta, derive_seed(cfg.seed, 2));

  const fs::path dir = f.out_dir;
  prepare_output(dir, cfg);
  MetaHooks hooks;
  const std::size_t every = std::max<std::size_t>(1, cfg.meta.episodes / 10);
  hooks.on_episode = [&](const EpisodeLog& e) {
    if ((e.episode + 1) % every == 0 || e.episode + 1 == cfg.meta.episodes) {
      out << "episode " << (e.episode + 1) << "/" << cfg.meta.episodes
          << "  query loss " << number(e.mean_query_loss) << '\n';
    }
  };
  hooks.on_checkpoint = [&](std::size_t episode, const ParamSet& params) {
    fs::create_directories(dir / "checkpoints");
    params.save(dir / "checkpoints" / ("episode_" + std::to_string(episode) + ".dsml"));
  };
  const TrainResult result = supervised
                                 ? train_supervised(model, theta0, sampler, data, cfg.meta, hooks)
                                 : meta_train(model, theta0, sampler, data, cfg.meta, hooks);
  result.params.save(dir / kCheckpointFile);
  write_training_log(dir / "train_log.csv", result.log);
  out << "trained (" << f.strategy << ", " << cfg.meta.episodes << " episodes) -> "
      << (dir / kCheckpointFile).string() << '\n';
  return kOk;
}

struct AdaptFlags {
  std::string checkpoint, labels, clip, annotator, out_dir;
  std::optional<std::size_t> inner_steps;
  std::optional<double> inner_lr;
};

int cmd_adapt(const Common& common, const AdaptFlags& f, std::ostream& out) {
  const RunConfig cfg = build_config(common, f.checkpoint,
                                     [&](RunConfig& c) { apply_meta_flags(c, f.inner_steps, f.inner_lr); });
  const DsamlModel model(cfg.model);
  const ParamSet theta = load_checkpoint(f.checkpoint, model);
  const MelSequence mel = load_clip(f.clip, cfg);
  auto labels = read_label_csv(f.labels, {cfg.mel.resolution_hz, cfg.mel.trim_head_s});
  if (f.annotator.empty() && labels.size() > 1) {
    throw UsageError("'" + f.labels + "' holds several annotators; choose one with --annotator");
  }
  auto it = f.annotator.empty()
                ? labels.begin()
                : std::find_if(labels.begin(), labels.end(),
                               [&](const AnnotatedClip& c) { return c.annotator_id == f.annotator; });
  if (it == labels.end()) throw UsageError("no labels for annotator '" + f.annotator + "'");
  AnnotatedClip support = *it;
  if (support.label.steps() < mel.steps()) {
    throw Error("length mismatch: " + std::to_string(support.label.steps()) +
                " label steps for a clip of " + std::to_string(mel.steps()) + " segments");
  }
  if (support.label.steps() > mel.steps()) {
    Tensor cut(Shape{mel.steps(), 2});
    std::copy_n(support.label.values.raw(), cut.size(), cut.raw());
    support.label.values = std::move(cut);
  }
  support.clip_id = support.label.clip_id = mel.clip_id;
  Dataset data;
  data.mels[mel.clip_id] = mel;
  data.clips.push_back(support);
  const ParamSet adapted = personalize(model, theta, data.clips, data, cfg.meta);
  prepare_output(f.out_dir, cfg);
  adapted.save(fs::path(f.out_dir) / kCheckpointFile);
  out << "support loss " << number(batch_loss(model, theta, data.clips, data)) << " -> "
      << number(batch_loss(model, adapted, data.clips, data)) << '\n';
  return kOk;
}

void write_attention(const fs::path& dir, const AttentionMaps& maps) {
  fs::create_directories(dir);
  for (std::size_t l = 0; l < maps.maps.size(); ++l) {
    for (std::size_t h = 0; h < maps.maps[l].size(); ++h) {
      const Tensor& a = maps.maps[l][h];
      std::ofstream out(dir / (to_string(maps.scale) + "_layer" + std::to_string(l) + "_head" +
                               std::to_string(h) + ".csv"),
                        std::ios::trunc);
      for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) out << (j ? "," : "") << number(a.at(i, j));
        out << '\n';
      }
    }
  }
}

int cmd_predict(const Common& common, const std::string& checkpoint, const std::string& clip,
                const std::string& out_dir, const std::string& attention_dir, std::ostream& out) {
  const RunConfig cfg = build_config(common, checkpoint);
  const DsamlModel model(cfg.model);
  const ParamSet params = load_checkpoint(checkpoint, model);
  const MelSequence mel = load_clip(clip, cfg);
  const Prediction p = model.predict(mel, params);
  prepare_output(out_dir, cfg);
  std::ofstream csv(fs::path(out_dir) / "predictions.csv", std::ios::trunc);
  csv << "clip_id,t_seconds,valence,arousal\n";
  for (std::size_t t = 0; t < p.va.steps(); ++t) {
    csv << p.va.clip_id << ',' << seconds(p.va.time_at(t)) << ',' << number(p.va.valence(t)) << ','
        << number(p.va.arousal(t)) << '\n';
  }
  if (!attention_dir.empty()) {
    write_attention(attention_dir, p.local);
    write_attention(attention_dir, p.global);
  }
  out << p.va.steps() << " predictions for " << p.va.clip_id << '\n';
  return kOk;
}

struct EvalFlags {
  std::string checkpoint, data_dir, mode = "personalized", out_dir;
  bool synthetic = false;
  std::optional<std::size_t> inner_steps;
  std::optional<double> inner_lr;
};

int cmd_eval(const Common& common, const EvalFlags& f, std::ostream& out) {
  if (f.mode != "traditional" && f.mode != "personalized") {
    throw UsageError("unknown mode '" + f.mode + "' (expected traditional or personalized)");
  }
  const RunConfig cfg = build_config(common, f.checkpoint,
                                     [&](RunConfig& c) { apply_meta_flags(c, f.inner_steps, f.inner_lr); });
  const DsamlModel model(cfg.model);
  const ParamSet params = load_checkpoint(f.checkpoint, model);
  const Dataset data = load_data(f.data_dir, f.synthetic, cfg);
  const Predictor predictor = model_predictor(model, cfg.meta);
  MetricReport report;
  if (f.mode == "traditional") {
    report = evaluate_traditional(predictor, params, data);
  } else {
    const auto annotators = data.annotators();
    if (annotators.empty() || (annotators.size() == 1 && annotators.front() == kMeanAnnotator)) {
      throw Error("personalized evaluation needs per-annotator labels, but the dataset has no annotator ids");
    }
    const SupportPlan plan = choose_supports(data, cfg.meta.support_size, derive_seed(cfg.seed, 3));
    report = evaluate_personalized(predictor, params, data, plan);
  }
  prepare_output(f.out_dir, cfg);
  report.write_csv(fs::path(f.out_dir) / "report.csv");
  out << f.mode << " evaluation\n" << report.table();
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dual-scale attention model for personalized dynamic music emotion regression"};
  app.name("dsaml");
  app.require_subcommand(1);
  app.footer(
      "Exit codes: 0 success, 1 failure or partial failure, 2 invalid invocation.\n"
      "Defaults: 2 Hz labels, 15 s trim, 3 layers, local/global context 5/30, alpha 0.5,\n"
      "beta 0.05, outer lr 5e-05, support 1, query 15. Episodes default to a desk-scale 300;\n"
      "inner steps (5) and inner lr (0.01) are free choices of this implementation.");

  Common common;
  app.add_option("--config", common.config, "flat key = value config file");
  app.add_option("--set", common.overrides, "override one config key (key=value), repeatable");
  app.add_option("--seed", common.seed, "master seed");

  std::string audio_dir, out_dir, attention_dir, clip, checkpoint;
  auto* pre = app.add_subcommand("preprocess", "cache log-mel sequences for a directory of WAV files");
  pre->add_option("--audio-dir", audio_dir, "directory of .wav files")->required();
  pre->add_option("--out", out_dir, "output directory for .mel caches and manifest.csv")->required();

  auto* synth = app.add_subcommand("synth", "write a synthetic annotator population as a dataset");
  synth->add_option("--out", out_dir, "output dataset directory")->required();

  TrainFlags tf;
  auto* train = app.add_subcommand("train", "train from a dataset or a synthetic population");
  train->add_option("--data", tf.data_dir, "dataset directory (labels/ plus cache/ or audio/)");
  train->add_flag("--synthetic", tf.synthetic, "train on the configured synthetic population");
  train->add_option("--strategy", tf.strategy,
                    "task construction: annotator, mean, or supervised (no meta-learning)");
  train->add_option("--episodes", tf.episodes, "outer episodes (default 300)");
  train->add_option("--inner-steps", tf.inner_steps, "inner gradient steps (default 5)");
  train->add_option("--inner-lr", tf.inner_lr, "inner learning rate (default 0.01)");
  train->add_option("--outer-lr", tf.outer_lr, "outer Adam learning rate (default 5e-05)");
  train->add_option("--checkpoint-every", tf.checkpoint_every, "save a checkpoint every N episodes");
  train->add_option("--out", tf.out_dir, "output directory")->required();

  AdaptFlags af;
  auto* adapt = app.add_subcommand("adapt", "personalize a checkpoint on one labeled clip");
  adapt->add_option("--checkpoint", af.checkpoint, "trained checkpoint")->required();
  adapt->add_option("--labels", af.labels, "label CSV (annotator_id,t_seconds,valence,arousal)")->required();
  adapt->add_option("--clip", af.clip, "support clip (.wav or .mel)")->required();
  adapt->add_option("--annotator", af.annotator, "annotator to adapt to when the CSV holds several");
  adapt->add_option("--inner-steps", af.inner_steps, "adaptation steps");
  adapt->add_option("--inner-lr", af.inner_lr, "adaptation learning rate");
  adapt->add_option("--out", af.out_dir, "output directory")->required();

  auto* predict = app.add_subcommand("predict", "predict the valence/arousal sequence of one clip");
  predict->add_option("--checkpoint", checkpoint, "checkpoint")->required();
  predict->add_option("--clip", clip, "clip (.wav or .mel)")->required();
  predict->add_option("--out", out_dir, "output directory")->required();
  predict->add_option("--dump-attention", attention_dir, "write every attention map as CSV here");

  EvalFlags ef;
  auto* eval = app.add_subcommand("eval", "score a checkpoint with RMSE, PCC and CCC");
  eval->add_option("--checkpoint", ef.checkpoint, "checkpoint")->required();
  eval->add_option("--data", ef.data_dir, "dataset directory");
  eval->add_flag("--synthetic", ef.synthetic, "evaluate on the configured synthetic population");
  eval->add_option("--mode", ef.mode, "traditional (mean labels) or personalized");
  eval->add_option("--inner-steps", ef.inner_steps, "personalization steps");
  eval->add_option("--inner-lr", ef.inner_lr, "personalization learning rate");
  eval->add_option("--out", ef.out_dir, "output directory")->required();

  std::vector<const char*> argv{"dsaml"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    if (*pre) return cmd_preprocess(common, audio_dir, out_dir, out, err);
    if (*synth) return cmd_synth(common, out_dir, out);
    if (*train) return cmd_train(common, tf, out);
    if (*adapt) return cmd_adapt(common, af, out);
    if (*predict) return cmd_predict(common, checkpoint, clip, out_dir, attention_dir, out);
    if (*eval) return cmd_eval(common, ef, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace dsaml::cli
