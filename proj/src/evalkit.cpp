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

#include "dsaml/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "dsaml/error.hpp"
#include "dsaml/rng.hpp"

namespace dsaml {
namespace {

struct Moments {
  double mean_p = 0.0, mean_g = 0.0, var_p = 0.0, var_g = 0.0, cov = 0.0;
};

Moments moments(std::span<const double> p, std::span<const double> g) {
  if (p.size() != g.size()) {
    throw ShapeError("metric: series lengths differ (" + std::to_string(p.size()) + " vs " +
                     std::to_string(g.size()) + ")");
  }
  if (p.size() < 2) throw ShapeError("metric: need at least 2 steps");
  const double n = static_cast<double>(p.size());
  Moments m;
  for (std::size_t i = 0; i < p.size(); ++i) {
    m.mean_p += p[i];
    m.mean_g += g[i];
  }
  m.mean_p /= n;
  m.mean_g /= n;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double dp = p[i] - m.mean_p, dg = g[i] - m.mean_g;
    m.var_p += dp * dp;
    m.var_g += dg * dg;
    m.cov += dp * dg;
  }
  m.var_p /= n;
  m.var_g /= n;
  m.cov /= n;
  // a constant series must have exactly zero spread; the rounded mean can
  // leave ~1e-32 behind
  auto constant = [](std::span<const double> x) {
    return std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
  };
  if (constant(p)) {
    m.mean_p = p.front();
    m.var_p = 0.0;
    m.cov = 0.0;
  }
  if (constant(g)) {
    m.mean_g = g.front();
    m.var_g = 0.0;
    m.cov = 0.0;
  }
  return m;
}

}  // namespace

double rmse(std::span<const double> pred, std::span<const double> gt) {
  if (pred.size() != gt.size() || pred.empty()) {
    throw ShapeError("rmse: series lengths differ or are empty");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - gt[i]) * (pred[i] - gt[i]);
  return std::sqrt(s / static_cast<double>(pred.size()));
}

double pcc(std::span<const double> pred, std::span<const double> gt) {
  const Moments m = moments(pred, gt);
  if (m.var_p == 0.0 || m.var_g == 0.0) {
    throw NumericError("pcc: zero variance in " +
                       std::string(m.var_p == 0.0 ? "prediction" : "ground truth"));
  }
  return std::clamp(m.cov / std::sqrt(m.var_p * m.var_g), -1.0, 1.0);
}

double ccc(std::span<const double> pred, std::span<const double> gt, bool* undefined) {
  const Moments m = moments(pred, gt);
  const double d = m.mean_p - m.mean_g;
  const double denom = m.var_p + m.var_g + d * d;
  if (undefined) *undefined = denom == 0.0;
  if (denom == 0.0) return 0.0;
  return 2.0 * m.cov / denom;
}

std::vector<double> dimension(const VASequence& va, std::size_t d) {
  std::vector<double> out(va.steps());
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = va.values.at(t, d);
  return out;
}

namespace {

void check_pair(const VASequence& pred, const VASequence& gt) {
  if (pred.values.shape() != gt.values.shape() || pred.values.rank() != 2 ||
      pred.values.cols() != 2) {
    throw ShapeError("metric: prediction " + shape_str(pred.values.shape()) +
                     " vs ground truth " + shape_str(gt.values.shape()));
  }
}

template <typename F>
std::array<double, 2> per_dimension(const VASequence& pred, const VASequence& gt, F f) {
  check_pair(pred, gt);
  std::array<double, 2> out{};
  for (std::size_t d = 0; d < 2; ++d) out[d] = f(dimension(pred, d), dimension(gt, d));
  return out;
}

}  // namespace

std::array<double, 2> rmse(const VASequence& pred, const VASequence& gt) {
  return per_dimension(pred, gt, [](const auto& p, const auto& g) { return rmse(p, g); });
}

std::array<double, 2> pcc(const VASequence& pred, const VASequence& gt) {
  return per_dimension(pred, gt, [](const auto& p, const auto& g) { return pcc(p, g); });
}

std::array<double, 2> ccc(const VASequence& pred, const VASequence& gt) {
  return per_dimension(pred, gt, [](const auto& p, const auto& g) { return ccc(p, g); });
}

void MetricAccumulator::add(const VASequence& pred, const VASequence& gt) {
  check_pair(pred, gt);
  for (std::size_t d = 0; d < 2; ++d) {
    const auto p = dimension(pred, d), g = dimension(gt, d);
    Sums& s = sums_[d];
    s.rmse += rmse(p, g);
    bool undefined = false;
    s.ccc += ccc(p, g, &undefined);
    if (undefined) ++s.ccc_undefined;
    try {
      s.pcc += pcc(p, g);
      ++s.pcc_n;
    } catch (const NumericError&) {
      ++s.pcc_skipped;
    }
  }
  ++clips_;
  steps_ += pred.steps();
}

MetricReport MetricAccumulator::report() const {
  if (clips_ == 0) throw Error("metric report over zero clips");
  MetricReport r;
  r.n_clips = clips_;
  r.n_steps = steps_;
  const double n = static_cast<double>(clips_);
  for (std::size_t d = 0; d < 2; ++d) {
    DimensionReport& out = d == 0 ? r.valence : r.arousal;
    const Sums& s = sums_[d];
    out.rmse = s.rmse / n;
    out.ccc = s.ccc / n;
    out.pcc = s.pcc_n > 0 ? s.pcc / static_cast<double>(s.pcc_n) : std::nan("");
    out.pcc_skipped = s.pcc_skipped;
    out.ccc_undefined = s.ccc_undefined;
  }
  return r;
}

void MetricReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.precision(17);
  out << "dimension,metric,value\n";
  for (std::size_t d = 0; d < 2; ++d) {
    const char* name = d == 0 ? "valence" : "arousal";
    const DimensionReport& r = dim(d);
    out << name << ",ccc," << r.ccc << '\n';
    out << name << ",pcc," << r.pcc << '\n';
    out << name << ",rmse," << r.rmse << '\n';
  }
  out << "all,n_clips," << n_clips << '\n';
  out << "all,n_steps," << n_steps << '\n';
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string MetricReport::table() const {
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof line, "%-10s %9s %9s %9s\n", "dimension", "CCC", "PCC", "RMSE");
  os << line;
  for (std::size_t d = 0; d < 2; ++d) {
    const DimensionReport& r = dim(d);
    std::snprintf(line, sizeof line, "%-10s %9.4f %9.4f %9.4f\n", d == 0 ? "valence" : "arousal",
                  r.ccc, r.pcc, r.rmse);
    os << line;
  }
  os << n_clips << " clips, " << n_steps << " steps";
  const std::size_t skipped = valence.pcc_skipped + arousal.pcc_skipped;
  if (skipped > 0) os << ", " << skipped << " constant series left out of PCC";
  const std::size_t undefined = valence.ccc_undefined + arousal.ccc_undefined;
  if (undefined > 0) os << ", " << undefined << " undefined CCC counted as 0";
  os << '\n';
  return os.str();
}

Predictor model_predictor(const DsamlModel& model, const MetaConfig& cfg) {
  Predictor p;
  p.predict = [&model](const ParamSet& params, const MelSequence& mel) {
    VASequence va = model.predict(mel, params).va;
    for (double& v : va.values.values()) v = std::clamp(v, -1.0, 1.0);
    return va;
  };
  p.adapt = [&model, cfg](const ParamSet& params, const std::vector<AnnotatedClip>& support,
                          const Dataset& data) {
    return personalize(model, params, support, data, cfg);
  };
  return p;
}

MetricReport evaluate_traditional(const Predictor& predictor, const ParamSet& params,
                                  const Dataset& data) {
  if (data.clips.empty()) throw Error("evaluate: empty dataset");
  MetricAccumulator acc;
  for (const auto& target : mean_labels(data.clips)) {
    acc.add(predictor.predict(params, data.mel(target.clip_id)), target.label);
  }
  return acc.report();
}

SupportPlan choose_supports(const Dataset& data, std::size_t support_size, std::uint64_t seed) {
  if (support_size == 0) throw ConfigError("support size must be at least 1");
  SupportPlan plan;
  Rng rng(seed);
  for (const auto& annotator : data.annotators()) {
    std::vector<std::string> ids;
    for (const auto& c : data.by_annotator(annotator)) ids.push_back(c.clip_id);
    std::sort(ids.begin(), ids.end());
    rng.shuffle(ids);
    if (ids.size() <= support_size) {
      throw Error("annotator '" + annotator + "' has " + std::to_string(ids.size()) +
                  " clips, leaving no query clips after a support set of " +
                  std::to_string(support_size));
    }
    ids.resize(support_size);
    plan[annotator] = std::move(ids);
  }
  return plan;
}

MetricReport evaluate_personalized(const Predictor& predictor, const ParamSet& params,
                                   const Dataset& data, const SupportPlan& plan) {
  if (data.clips.empty()) throw Error("evaluate: empty dataset");
  const auto annotators = data.annotators();
  if (annotators.empty() || plan.empty()) throw Error("personalized evaluation needs annotators");
  if (annotators.size() == 1 && annotators.front() == kMeanAnnotator) {
    throw Error("personalized evaluation needs per-annotator labels; the dataset has only mean labels");
  }
  MetricAccumulator acc;
  for (const auto& [annotator, support_ids] : plan) {
    const auto own = data.by_annotator(annotator);
    if (own.empty()) throw Error("support plan names unknown annotator '" + annotator + "'");
    const std::set<std::string> support_set(support_ids.begin(), support_ids.end());
    std::vector<AnnotatedClip> support, query;
    for (const auto& c : own) (support_set.count(c.clip_id) ? support : query).push_back(c);
    if (support.size() != support_set.size()) {
      throw Error("support plan for '" + annotator + "' names clips the annotator did not label");
    }
    if (query.empty()) throw Error("annotator '" + annotator + "' has no query clips");
    const ParamSet adapted = predictor.adapt(params, support, data);
    for (const auto& c : query) acc.add(predictor.predict(adapted, data.mel(c.clip_id)), c.label);
  }
  return acc.report();
}

void PopulationSpec::validate() const {
  if (n_annotators == 0 || clips_per_annotator == 0 || steps == 0 || frames == 0 || n_mels == 0) {
    throw ConfigError("population: counts must be positive");
  }
  if (!(resolution_hz > 0.0)) throw ConfigError("population: resolution must be positive");
  if (!(gain_min > 0.0) || gain_max < gain_min) throw ConfigError("population: invalid gain range");
  if (offset_max < 0.0 || mel_noise < 0.0) throw ConfigError("population: negative spread");
}

VASequence apply_transform(const VASequence& base, const AnnotatorTransform& t) {
  VASequence out = base;
  const std::size_t k = base.steps();
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t src = i >= t.lag ? i - t.lag : 0;
    for (std::size_t d = 0; d < 2; ++d) {
      out.values.at(i, d) = std::clamp(t.gain[d] * base.values.at(src, d) + t.offset[d], -1.0, 1.0);
    }
  }
  return out;
}

namespace {

// Sum of 1-3 slow sinusoids plus moving-average noise, per dimension.
VASequence base_curve(const std::string& clip_id, const PopulationSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  VASequence va = make_va(clip_id, spec.steps, spec.resolution_hz, spec.start_s);
  const std::size_t k = spec.steps;
  constexpr std::size_t kSmooth = 5;
  for (std::size_t d = 0; d < 2; ++d) {
    const double level = rng.uniform(-0.2, 0.2);
    const std::size_t waves = 1 + rng.index(3);
    std::vector<double> amp(waves), period(waves), phase(waves);
    for (std::size_t w = 0; w < waves; ++w) {
      amp[w] = rng.uniform(0.1, 0.35);
      period[w] = rng.uniform(10.0, 60.0);
      phase[w] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    std::vector<double> noise(k + kSmooth);
    for (double& v : noise) v = 0.15 * rng.normal();
    for (std::size_t t = 0; t < k; ++t) {
      double v = level;
      for (std::size_t w = 0; w < waves; ++w) {
        v += amp[w] * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period[w] + phase[w]);
      }
      double smooth = 0.0;
      for (std::size_t j = 0; j < kSmooth; ++j) smooth += noise[t + j];
      v += smooth / static_cast<double>(kSmooth);
      va.values.at(t, d) = std::clamp(v, -1.0, 1.0);
    }
  }
  return va;
}

}  // namespace

MelSequence synth_mel(const VASequence& base, const PopulationSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  MelSequence mel;
  mel.clip_id = base.clip_id;
  mel.resolution_hz = base.resolution_hz;
  mel.start_s = base.start_s;
  const std::size_t k = base.steps(), frames = spec.frames, bands = spec.n_mels;
  mel.segments = Tensor(Shape{k, frames, bands});
  const double last = bands > 1 ? static_cast<double>(bands - 1) : 1.0;
  for (std::size_t t = 0; t < k; ++t) {
    const double v = base.valence(t), a = base.arousal(t);
    for (std::size_t f = 0; f < frames; ++f) {
      for (std::size_t m = 0; m < bands; ++m) {
        const double pos = static_cast<double>(m) / last;
        // arousal raises overall energy, more so in high bands;
        // valence tilts the spectrum between low and high bands
        const double energy = -5.0 + 2.5 * a * (0.5 + pos) +
                              2.0 * v * std::cos(std::numbers::pi * pos) +
                              spec.mel_noise * rng.normal();
        mel.segments[(t * frames + f) * bands + m] = energy;
      }
    }
  }
  return mel;
}

Population synth_population(const PopulationSpec& spec) {
  spec.validate();
  Population pop;
  const std::size_t width = std::to_string(std::max(spec.n_annotators, spec.clips_per_annotator)).size();
  auto name = [width](const std::string& prefix, std::size_t i) {
    std::string n = std::to_string(i);
    return prefix + std::string(width - std::min(width, n.size()), '0') + n;
  };
  for (std::size_t a = 0; a < spec.n_annotators; ++a) {
    Rng rng(derive_seed(spec.seed, 3'000'000 + a));
    AnnotatorTransform t;
    t.annotator_id = name(spec.annotator_prefix, a);
    for (std::size_t d = 0; d < 2; ++d) {
      t.gain[d] = rng.uniform(spec.gain_min, spec.gain_max);
      t.offset[d] = rng.uniform(-spec.offset_max, spec.offset_max);
    }
    t.lag = rng.index(spec.max_lag + 1);
    pop.transforms.push_back(t);
  }
  for (std::size_t c = 0; c < spec.clips_per_annotator; ++c) {
    const std::string clip_id = name(spec.clip_prefix, c);
    VASequence base = base_curve(clip_id, spec, derive_seed(spec.seed, 1'000'000 + c));
    pop.data.mels[clip_id] = synth_mel(base, spec, derive_seed(spec.seed, 2'000'000 + c));
    for (const auto& t : pop.transforms) {
      pop.data.clips.push_back({clip_id, t.annotator_id, apply_transform(base, t)});
    }
    pop.base.emplace(clip_id, std::move(base));
  }
  return pop;
}

}  // namespace dsaml
