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

#include "run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "dsaml/error.hpp"

namespace dsaml::cli {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* last = text.data() + text.size();
  auto [end, ec] = std::from_chars(text.data(), last, v);
  if (ec != std::errc{} || end != last) {
    throw ConfigError("config key '" + key + "': '" + text + "' is not a number");
  }
  return v;
}

std::uint64_t parse_uint(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const char* last = text.data() + text.size();
  auto [end, ec] = std::from_chars(text.data(), last, v);
  if (ec != std::errc{} || end != last) {
    throw ConfigError("config key '" + key + "': '" + text + "' is not a non-negative integer");
  }
  return v;
}

}  // namespace

RunConfig::RunConfig() {
  auto size_field = [this](std::string key, std::size_t* p) {
    fields_.push_back({key, [p] { return std::to_string(*p); },
                       [p, key](const std::string& v) { *p = parse_uint(key, v); }});
  };
  auto u64_field = [this](std::string key, std::uint64_t* p) {
    fields_.push_back({key, [p] { return std::to_string(*p); },
                       [p, key](const std::string& v) { *p = parse_uint(key, v); }});
  };
  auto double_field = [this](std::string key, double* p) {
    fields_.push_back({key, [p] { return format_double(*p); },
                       [p, key](const std::string& v) { *p = parse_double(key, v); }});
  };

  u64_field("seed", &seed);

  double_field("mel.sample_rate", &mel.sample_rate);
  size_field("mel.n_fft", &mel.n_fft);
  size_field("mel.hop", &mel.hop);
  size_field("mel.n_mels", &mel.n_mels);
  double_field("mel.resolution_hz", &mel.resolution_hz);
  double_field("mel.trim_head_s", &mel.trim_head_s);

  size_field("input.frames", &input_frames);
  size_field("input.n_mels", &input_mels);

  size_field("model.adapter_channels", &model.adapter_channels);
  // one width shared by the adapter output, transformer and global features
  fields_.push_back({"model.dim", [this] { return std::to_string(model.embed_dim); },
                     [this](const std::string& v) {
                       model.embed_dim = parse_uint("model.dim", v);
                     }});
  size_field("model.layers", &model.transformer.layers);
  size_field("model.heads", &model.transformer.heads);
  size_field("model.ff_dim", &model.transformer.ff_dim);
  size_field("model.n_local", &model.transformer.n_local);
  size_field("model.n_global", &model.transformer.n_global);
  size_field("model.lstm_hidden", &model.lstm_hidden);
  double_field("model.loss_lambda", &model.loss_lambda);
  double_field("model.alpha", &model.alpha);
  double_field("model.beta", &model.beta);
  fields_.push_back({"global.kind", [this] { return to_string(model.global.kind); },
                     [this](const std::string& v) { model.global.kind = parse_global_kind(v); }});
  u64_field("global.seed", &model.global.seed);
  fields_.push_back({"global.path", [this] { return model.global.path.string(); },
                     [this](const std::string& v) { model.global.path = v; }});

  size_field("meta.inner_steps", &meta.inner_steps);
  double_field("meta.inner_lr", &meta.inner_lr);
  double_field("meta.outer_lr", &meta.outer_lr);
  size_field("meta.support_size", &meta.support_size);
  size_field("meta.query_size", &meta.query_size);
  size_field("meta.tasks_per_batch", &meta.tasks_per_batch);
  size_field("meta.episodes", &meta.episodes);
  size_field("meta.checkpoint_every", &meta.checkpoint_every);

  size_field("population.n_annotators", &population.n_annotators);
  size_field("population.clips_per_annotator", &population.clips_per_annotator);
  size_field("population.steps", &population.steps);
  double_field("population.gain_min", &population.gain_min);
  double_field("population.gain_max", &population.gain_max);
  double_field("population.offset_max", &population.offset_max);
  size_field("population.max_lag", &population.max_lag);
  double_field("population.mel_noise", &population.mel_noise);
  u64_field("population.seed", &population.seed);

  std::sort(fields_.begin(), fields_.end(),
            [](const Field& a, const Field& b) { return a.key < b.key; });
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (auto& f : fields_) {
    if (f.key == key) {
      f.set(trim(value));
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::string RunConfig::get(const std::string& key) const {
  for (const auto& f : fields_) {
    if (f.key == key) return f.get();
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::vector<std::string> RunConfig::keys() const {
  std::vector<std::string> out;
  for (const auto& f : fields_) out.push_back(f.key);
  return out;
}

void RunConfig::apply_ini(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    try {
      set(key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  apply_ini(buf.str(), path.string());
}

void RunConfig::resolve() {
  mel.validate();
  model.frames = input_frames ? input_frames : mel.frames_per_window();
  model.n_mels = input_mels ? input_mels : mel.n_mels;
  model.transformer.model_dim = model.embed_dim;
  model.global.embed_dim = model.embed_dim;
  if (model.transformer.ff_dim == 0) model.transformer.ff_dim = 4 * model.embed_dim;
  model.validate();
  meta.validate();
  population.frames = model.frames;
  population.n_mels = model.n_mels;
  population.resolution_hz = mel.resolution_hz;
  population.start_s = mel.trim_head_s;
  population.validate();
}

std::string RunConfig::to_ini() const {
  std::ostringstream out;
  for (const auto& f : fields_) out << f.key << " = " << f.get() << '\n';
  return out.str();
}

void RunConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << to_ini();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace dsaml::cli
