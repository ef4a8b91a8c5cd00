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

// Acceptance suite: one PASS/FAIL line per criterion. With no arguments every
// criterion runs; otherwise only the listed numbers (e.g. `acceptance 1 4`).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <string>

#include "dsaml/attention.hpp"
#include "dsaml/evalkit.hpp"
#include "dsaml/gradcheck.hpp"
#include "dsaml/meta.hpp"
#include "dsaml/model.hpp"
#include "dsaml/optim.hpp"
#include "dsaml/signal.hpp"
#include "harness.hpp"
#include "test_util.hpp"

using namespace dsaml;
using namespace dsaml::testing;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kFdStep = 1e-5;
constexpr double kFdTol = 1e-4;
constexpr double kMaskLeak = 1e-12;
constexpr double kGapReduction = 0.5;
constexpr double kMetricTol = 1e-12;
constexpr double kOverfitReduction = 0.9;
constexpr int kHarnessSeeds = 3;

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// --- 1: finite differences --------------------------------------------------

using Builder = std::function<Var(Graph&, const ParamSet&)>;

double fd_error(const ParamSet& inputs, const Builder& build, std::uint64_t seed, bool& finite) {
  auto report = finite_diff_check(
      [&](Graph& g, const ParamSet& p) { return random_functional(build(g, p), seed); }, inputs, kFdStep);
  finite = finite && !report.any_non_finite();
  return report.max_rel_error();
}

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  struct Op {
    const char* name;
    std::function<ParamSet(Rng&)> inputs;
    Builder build;
  };
  auto mat = [](Rng& r, std::size_t m, std::size_t n, double lo = -1, double hi = 1) {
    return random_tensor({m, n}, r, lo, hi);
  };
  auto one = [](const char* name, Tensor t) {
    ParamSet p;
    p.set(name, std::move(t));
    return p;
  };
  auto band = [](std::size_t n, std::size_t ctx) {
    Tensor m(Shape{n, n});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) m.at(i, j) = (i > j ? i - j : j - i) <= ctx;
    return m;
  };
  const std::vector<Op> ops{
      {"add", [&](Rng& r) { ParamSet p; p.set("a", mat(r, 6, 8)); p.set("b", mat(r, 6, 8)); return p; },
       [](Graph& g, const ParamSet& p) { return g.param(p, "a") + g.param(p, "b"); }},
      {"sub", [&](Rng& r) { ParamSet p; p.set("a", mat(r, 6, 8)); p.set("b", mat(r, 6, 8)); return p; },
       [](Graph& g, const ParamSet& p) { return g.param(p, "a") - g.param(p, "b"); }},
      {"mul", [&](Rng& r) { ParamSet p; p.set("a", mat(r, 6, 8)); p.set("b", mat(r, 6, 8)); return p; },
       [](Graph& g, const ParamSet& p) { return g.param(p, "a") * g.param(p, "b"); }},
      {"matmul", [&](Rng& r) { ParamSet p; p.set("a", mat(r, 6, 8)); p.set("b", mat(r, 8, 4)); return p; },
       [](Graph& g, const ParamSet& p) { return matmul(g.param(p, "a"), g.param(p, "b")); }},
      {"transpose", [&](Rng& r) { return one("a", mat(r, 6, 8)); },
       [](Graph& g, const ParamSet& p) { return transpose(g.param(p, "a")); }},
      {"add_bias", [&](Rng& r) { ParamSet p; p.set("x", mat(r, 6, 8)); p.set("b", random_tensor({8}, r)); return p; },
       [](Graph& g, const ParamSet& p) { return add_bias(g.param(p, "x"), g.param(p, "b")); }},
      {"sigmoid", [&](Rng& r) { return one("a", mat(r, 6, 8, -4, 4)); },
       [](Graph& g, const ParamSet& p) { return sigmoid(g.param(p, "a")); }},
      {"tanh", [&](Rng& r) { return one("a", mat(r, 6, 8, -2, 2)); },
       [](Graph& g, const ParamSet& p) { return tanh(g.param(p, "a")); }},
      {"relu",
       [&](Rng& r) {
         Tensor a = mat(r, 6, 8, 0.05, 1.0);
         for (double& v : a.values()) v = r.uniform() < 0.5 ? -v : v;
         return one("a", a);
       },
       [](Graph& g, const ParamSet& p) { return relu(g.param(p, "a")); }},
      {"exp", [&](Rng& r) { return one("a", mat(r, 6, 8, -2, 2)); },
       [](Graph& g, const ParamSet& p) { return exp(g.param(p, "a")); }},
      {"log", [&](Rng& r) { return one("a", mat(r, 6, 8, 0.2, 3)); },
       [](Graph& g, const ParamSet& p) { return log(g.param(p, "a")); }},
      {"masked_softmax", [&](Rng& r) { return one("a", mat(r, 6, 6, -2, 2)); },
       [&](Graph& g, const ParamSet& p) { return masked_softmax_rows(g.param(p, "a"), band(6, 2)); }},
      {"layer_norm",
       [&](Rng& r) {
         ParamSet p;
         p.set("x", mat(r, 6, 8, -2, 2));
         p.set("gain", random_tensor({8}, r, 0.5, 1.5));
         p.set("bias", random_tensor({8}, r));
         return p;
       },
       [](Graph& g, const ParamSet& p) { return layer_norm(g.param(p, "x"), g.param(p, "gain"), g.param(p, "bias")); }},
      {"concat", [&](Rng& r) { ParamSet p; p.set("a", mat(r, 6, 3)); p.set("b", mat(r, 6, 5)); return p; },
       [](Graph& g, const ParamSet& p) {
         Var a = g.param(p, "a");
         return concat_rows({transpose(concat_cols({a, g.param(p, "b")})), transpose(concat_cols({g.param(p, "b"), a}))});
       }},
      {"slice", [&](Rng& r) { return one("a", mat(r, 6, 8)); },
       [](Graph& g, const ParamSet& p) { return slice_cols(slice_rows(g.param(p, "a"), 1, 4), 2, 5); }},
      {"reverse_rows", [&](Rng& r) { return one("a", mat(r, 6, 8)); },
       [](Graph& g, const ParamSet& p) { return reverse_rows(g.param(p, "a")); }},
      {"diag", [&](Rng& r) { return one("a", mat(r, 6, 6)); },
       [](Graph& g, const ParamSet& p) { return diag(g.param(p, "a")); }},
      {"mean", [&](Rng& r) { return one("a", mat(r, 6, 8)); },
       [](Graph& g, const ParamSet& p) { return mean(g.param(p, "a")); }},
      {"sum_of_squares", [&](Rng& r) { return one("a", mat(r, 6, 8)); },
       [](Graph& g, const ParamSet& p) { return sum_squares(g.param(p, "a")); }},
      {"conv2d",
       [&](Rng& r) {
         ParamSet p;
         p.set("x", random_tensor({6, 2, 3, 4}, r));
         p.set("w", random_tensor({2, 2, 3, 3}, r));
         p.set("b", random_tensor({2}, r));
         return p;
       },
       [](Graph& g, const ParamSet& p) { return conv2d(g.param(p, "x"), g.param(p, "w"), g.param(p, "b")); }},
  };
  double worst = 0.0;
  std::string worst_name;
  bool finite = true;
  for (const Op& op : ops) {
    for (std::uint64_t trial = 0; trial < 10; ++trial) {
      Rng rng(500 + trial);
      const double e = fd_error(op.inputs(rng), op.build, 900 + trial, finite);
      if (e > worst) worst = e, worst_name = op.name;
    }
  }
  // End to end: training_loss at k = 6, D = 8.
  const DsamlModel model(tiny_model_config(8, 8));
  double e2e = 0.0;
  for (std::uint64_t s = 0; s < 2; ++s) {
    const ParamSet params = model.init_params(40 + s);
    const MelSequence mel = random_mel(model.config(), 6, 41 + s);
    const VASequence label = random_label(6, 42 + s);
    auto report = finite_diff_check(
        [&](Graph& g, const ParamSet& p) { return model.loss(model.forward(g, mel, p), label); }, params, kFdStep);
    finite = finite && !report.any_non_finite();
    e2e = std::max(e2e, report.max_rel_error());
  }
  const double secs = since(t0);
  Outcome o;
  o.pass = finite && worst < kFdTol && e2e < kFdTol && secs < 60.0;
  o.detail = "ops max rel err " + fmt("%.2e", worst) + " (" + worst_name + "), training_loss " + fmt("%.2e", e2e) +
             " < 1e-04; " + fmt("%.1f", secs) + " s < 60 s";
  return o;
}

// --- 2: masks ---------------------------------------------------------------

Outcome mask_oracle() {
  std::size_t mismatches = 0, cases = 0;
  for (std::size_t k = 1; k <= 64; ++k) {
    for (std::size_t n = 0; n <= k; ++n, ++cases) {
      const BandMask m = band_mask(k, n);
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
          const bool inside = (i > j ? i - j : j - i) <= n;
          mismatches += (m.bits.at(i, j) == 1.0) != inside || (m.bits.at(i, j) != 0.0 && m.bits.at(i, j) != 1.0);
        }
    }
  }
  // Local maps of the full model: no mass outside |i - j| <= n_local.
  ModelConfig cfg = tiny_model_config(8, 4);
  cfg.transformer.n_local = 2;
  cfg.transformer.n_global = 7;
  const DsamlModel model(cfg);
  double leak = 0.0;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const Prediction p = model.predict(random_mel(cfg, 40, 70 + s), model.init_params(71 + s));
    for (const auto& layer : p.local.maps)
      for (const Tensor& a : layer)
        for (std::size_t i = 0; i < a.rows(); ++i)
          for (std::size_t j = 0; j < a.cols(); ++j)
            if ((i > j ? i - j : j - i) > cfg.transformer.n_local) leak = std::max(leak, std::abs(a.at(i, j)));
  }
  Outcome o;
  o.pass = mismatches == 0 && leak < kMaskLeak;
  o.detail = std::to_string(cases) + " (k, n) masks, " + std::to_string(mismatches) +
             " mismatches; max off-band local weight " + fmt("%.1e", leak) + " < 1e-12";
  return o;
}

// --- 3: diagonal attention loss alone ----------------------------------------

struct Diagonals {
  double local, global;
};

Diagonals mean_diagonals(const DualResult& r) {
  auto md = [](const AttentionRecord& rec) {
    const Tensor d = rec.pooled().value();
    double s = 0.0;
    for (std::size_t i = 0; i < d.rows(); ++i) s += d.at(i, i);
    return s / static_cast<double>(d.rows());
  };
  return {md(r.local), md(r.global)};
}

Outcome attention_loss_descent() {
  const auto t0 = Clock::now();
  constexpr double kAlpha = 0.5, kBeta = 0.05, kLr = 3.0;
  constexpr std::size_t kSteps = 200, kLen = 60;
  const TransformerConfig cfg{.layers = 3, .heads = 2, .model_dim = 16, .ff_dim = 64, .n_local = 5, .n_global = 30};
  Rng rng(31);
  ParamSet params;
  init_transformer(params, cfg, rng);
  const Tensor z = random_tensor({kLen, cfg.model_dim}, rng);  // frozen input
  auto evaluate = [&](const ParamSet& p, ParamSet* grad) {
    Graph g;
    DualResult r = dual_forward(g, g.constant(z), p, cfg);
    Var loss = attention_loss(r.local, r.global, kAlpha, kBeta);
    if (grad) *grad = g.backward(loss);
    return std::make_pair(loss.value().item(), mean_diagonals(r));
  };
  ParamSet grad;
  auto [first, d0] = evaluate(params, &grad);
  double prev = first;
  bool strict = true;
  // Gradient descent; a step that fails to lower the loss is halved.
  for (std::size_t step = 0; step < kSteps; ++step) {
    ParamSet next;
    double loss = prev;
    for (double lr = kLr; lr > 1e-6 && !(loss < prev); lr *= 0.5) {
      next = params.clone();
      sgd_step(next, grad, lr);
      loss = evaluate(next, nullptr).first;
    }
    strict = strict && loss < prev;
    if (!(loss < prev)) break;
    params = std::move(next);
    prev = evaluate(params, &grad).first;
  }
  const auto [last, d1] = evaluate(params, nullptr);
  const double gl0 = std::abs(d0.local - kAlpha), gl1 = std::abs(d1.local - kAlpha);
  const double gg0 = std::abs(d0.global - kBeta), gg1 = std::abs(d1.global - kBeta);
  const double secs = since(t0);
  Outcome o;
  o.pass = strict && gl1 <= (1 - kGapReduction) * gl0 && gg1 <= (1 - kGapReduction) * gg0 && secs < 120.0;
  o.detail = "loss " + fmt("%.4g", first) + " -> " + fmt("%.4g", last) + (strict ? " strictly" : " NOT strictly") +
             " decreasing; |diag_l - 0.5| " + fmt("%.4f", gl0) + " -> " + fmt("%.4f", gl1) + ", |diag_g - 0.05| " +
             fmt("%.4f", gg0) + " -> " + fmt("%.4f", gg1) + " (need -50%); " + fmt("%.1f", secs) + " s";
  return o;
}

// --- 4: metrics --------------------------------------------------------------

struct Moments {
  double mp, mg, vp, vg, cov;
};

Moments loop_moments(const std::vector<double>& p, const std::vector<double>& g) {
  const double n = static_cast<double>(p.size());
  Moments m{0, 0, 0, 0, 0};
  for (std::size_t i = 0; i < p.size(); ++i) m.mp += p[i], m.mg += g[i];
  m.mp /= n;
  m.mg /= n;
  for (std::size_t i = 0; i < p.size(); ++i) {
    m.vp += (p[i] - m.mp) * (p[i] - m.mp);
    m.vg += (g[i] - m.mg) * (g[i] - m.mg);
    m.cov += (p[i] - m.mp) * (g[i] - m.mg);
  }
  m.vp /= n, m.vg /= n, m.cov /= n;
  return m;
}

double loop_rmse(const std::vector<double>& p, const std::vector<double>& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - g[i]) * (p[i] - g[i]);
  return std::sqrt(s / static_cast<double>(p.size()));
}

double loop_pcc(const std::vector<double>& p, const std::vector<double>& g) {
  const Moments m = loop_moments(p, g);
  return m.cov / std::sqrt(m.vp * m.vg);
}

double loop_ccc(const std::vector<double>& p, const std::vector<double>& g) {
  const Moments m = loop_moments(p, g);
  return 2 * m.cov / (m.vp + m.vg + (m.mp - m.mg) * (m.mp - m.mg));
}

Outcome metric_oracles() {
  Rng rng(404);
  double worst = 0.0;
  std::size_t identity_failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.index(99);
    std::vector<double> p(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = rng.uniform(-1, 1);
      p[i] = 0.6 * g[i] + rng.uniform(-0.5, 0.5) + 0.1;
    }
    const double r = pcc(p, g), c = ccc(p, g);
    worst = std::max({worst, std::abs(rmse(p, g) - loop_rmse(p, g)), std::abs(r - loop_pcc(p, g)),
                      std::abs(c - loop_ccc(p, g))});
    identity_failures += std::abs(c) > std::abs(r) + 1e-15;
    std::vector<double> affine(n);
    const double a = rng.uniform(0.1, 3.0), b = rng.uniform(-2, 2);
    for (std::size_t i = 0; i < n; ++i) affine[i] = a * p[i] + b;
    identity_failures += std::abs(pcc(affine, g) - r) > 1e-12;
    identity_failures += std::abs(ccc(affine, g) - c) < 1e-9 && std::abs(b) > 1e-3;
    // Equal means and variances: ccc == pcc. A permutation keeps both.
    std::vector<double> shuffled = g;
    for (std::size_t i = n - 1; i > 0; --i) std::swap(shuffled[i], shuffled[rng.index(i + 1)]);
    identity_failures += std::abs(ccc(shuffled, g) - pcc(shuffled, g)) > 1e-12;
  }
  Outcome o;
  o.pass = worst <= kMetricTol && identity_failures == 0;
  o.detail = "1000 random pairs, max |lib - loop| " + fmt("%.1e", worst) + " <= 1e-12; " +
             std::to_string(identity_failures) + " identity failures";
  return o;
}

// --- 5: overfit one pair ------------------------------------------------------

Outcome overfit() {
  const auto t0 = Clock::now();
  const HarnessConfig h = harness_config(1);
  const Population pop = synth_population(h.train);
  const AnnotatedClip& clip = pop.data.clips.front();
  const MelSequence& mel = pop.data.mels.at(clip.clip_id);
  const DsamlModel model(h.model);
  ParamSet params = model.init_params(5);
  Adam adam({.lr = 5e-3});
  const double before = model.loss_value(mel, clip.label, params);
  for (int step = 0; step < 200; ++step) adam.step(params, model.loss_and_grad(mel, clip.label, params).grad);
  const double after = model.loss_value(mel, clip.label, params);
  const double reduction = 1.0 - after / before;
  const double secs = since(t0);
  Outcome o;
  o.pass = reduction >= kOverfitReduction && secs < 180.0;
  o.detail = "training_loss " + fmt("%.4g", before) + " -> " + fmt("%.4g", after) + " (" +
             fmt("%.1f", 100 * reduction) + "% >= 90%); " + fmt("%.1f", secs) + " s";
  return o;
}

// --- 6 and 7: personalization on the synthetic population --------------------

struct HarnessTable {
  double rmse[kHarnessSeeds][3];
  double seconds[kHarnessSeeds][3];
};

const HarnessTable& harness_table() {
  static const HarnessTable table = [] {
    HarnessTable t{};
    for (int s = 0; s < kHarnessSeeds; ++s) {
      const std::uint64_t seed = 1 + static_cast<std::uint64_t>(s);
      const HarnessConfig h = harness_config(seed);
      for (int m = 0; m < 3; ++m) {
        const auto t0 = Clock::now();
        const HarnessRun run = run_harness(h, static_cast<Training>(m), seed);
        t.rmse[s][m] = run.personalized.mean_rmse();
        t.seconds[s][m] = since(t0);
        std::printf("  seed %llu %-16s personalized query RMSE %.4f (%.0f s)\n",
                    static_cast<unsigned long long>(seed), to_string(static_cast<Training>(m)), t.rmse[s][m],
                    t.seconds[s][m]);
        std::fflush(stdout);
      }
    }
    return t;
  }();
  return table;
}

Outcome ordering(Training baseline) {
  const HarnessTable& t = harness_table();
  const int b = static_cast<int>(baseline);
  Outcome o;
  double slowest = 0.0;
  for (int s = 0; s < kHarnessSeeds; ++s) {
    o.pass = o.pass && t.rmse[s][0] < t.rmse[s][b];
    o.detail += (s ? ", " : "") + fmt("%.4f", t.rmse[s][0]) + " vs " + fmt("%.4f", t.rmse[s][b]);
    for (int m = 0; m < 3; ++m) slowest = std::max(slowest, t.seconds[s][m]);
  }
  o.pass = o.pass && slowest <= 900.0;
  o.detail = "annotator tasks vs " + std::string(to_string(baseline)) + " RMSE per seed: " + o.detail +
             "; slowest run " + fmt("%.0f", slowest) + " s <= 900 s";
  return o;
}

// --- 8: pipeline shape law ----------------------------------------------------

Outcome pipeline() {
  const fs::path dir = scratch_dir("acceptance_pipeline");
  const MelConfig mel_cfg;  // 16 kHz, 2 Hz, 15 s trim
  std::vector<double> samples(static_cast<std::size_t>(45 * mel_cfg.sample_rate));
  Rng rng(8);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double t = static_cast<double>(i) / mel_cfg.sample_rate;
    samples[i] = 0.3 * std::sin(2 * M_PI * (220 + 2 * t) * t) + 0.05 * rng.uniform(-1, 1);
  }
  write_wav(dir / "clip.wav", samples, static_cast<unsigned>(mel_cfg.sample_rate));
  const MelSequence mel = preprocess(load_audio(dir / "clip.wav", mel_cfg.sample_rate), mel_cfg);

  ModelConfig cfg;  // defaults: 30 x 64 grid, D = 128
  const DsamlModel model(cfg);
  const ParamSet params = model.init_params(88);
  const Prediction p = model.predict(mel, params);
  const bool shape = mel.steps() == 60 && p.va.values.shape() == Shape{60, 2} && p.va.time_at(0) == 15.0;

  params.save(dir / "a.dsml");
  const ParamSet loaded = ParamSet::load(dir / "a.dsml");
  loaded.save(dir / "b.dsml");
  auto bytes = [](const fs::path& f) {
    std::ifstream in(f, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const bool round_trip = bitwise_equal(params, loaded) && bytes(dir / "a.dsml") == bytes(dir / "b.dsml");

  // Fixed-seed runs repeat exactly: initialization, a short meta-training run and prediction.
  const HarnessConfig h = harness_config(3);
  PopulationSpec spec = h.train;
  spec.n_annotators = 3;
  spec.clips_per_annotator = 6;
  spec.steps = 12;
  MetaConfig meta = h.meta;
  meta.query_size = 4;
  meta.episodes = 3;
  const DsamlModel small(h.model);
  auto run_once = [&] {
    const Population pop = synth_population(spec);
    TaskSampler sampler = build_tasks_by_annotator(pop.data.clips, meta, 9);
    const TrainResult r = meta_train(small, small.init_params(10), sampler, pop.data, meta);
    r.params.save(dir / "run.dsml");
    return std::make_pair(bytes(dir / "run.dsml"), small.predict(pop.data.mels.begin()->second, r.params).va.values);
  };
  const bool deterministic = run_once() == run_once() && model.predict(mel, loaded).va.values == p.va.values;

  Outcome o;
  o.pass = shape && round_trip && deterministic;
  o.detail = "45 s clip -> " + std::to_string(p.va.steps()) + " predictions from t = " + fmt("%.1f", p.va.time_at(0)) +
             " s; checkpoint round trip " + (round_trip ? "bitwise" : "DIFFERS") + "; fixed-seed reruns " +
             (deterministic ? "identical" : "DIFFER");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradient_correctness},
      {"band mask oracle", mask_oracle},
      {"diagonal attention loss descent", attention_loss_descent},
      {"metric oracles", metric_oracles},
      {"overfit one pair", overfit},
      {"annotator tasks beat mean-label tasks", [] { return ordering(Training::kMeanTasks); }},
      {"annotator tasks beat supervised training", [] { return ordering(Training::kSupervised); }},
      {"pipeline shape, round trip, determinism", pipeline},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %d %s: %s  %s\n", id, criteria[i].first, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
