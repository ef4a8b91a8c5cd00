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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dsaml/evalkit.hpp"
#include "dsaml/meta.hpp"
#include "dsaml/model.hpp"
#include "dsaml/signal.hpp"

namespace dsaml::cli {

// Everything a command needs, settable through flat "section.key = value"
// lines. Unset input sizes follow the mel configuration.
struct RunConfig {
  std::uint64_t seed = 1;
  MelConfig mel;
  ModelConfig model;
  MetaConfig meta;
  PopulationSpec population;
  // Per-segment input grid; 0 derives it from the mel configuration.
  std::size_t input_frames = 0;
  std::size_t input_mels = 0;

  RunConfig();

  // Throws ConfigError for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  std::vector<std::string> keys() const;

  // "key = value" lines; blank lines and lines starting with '#' or ';' are
  // skipped, "[section]" headers prefix the keys that follow.
  void load(const std::filesystem::path& path);
  void apply_ini(const std::string& text, const std::string& origin);

  // Derives dependent sizes and validates every sub-configuration.
  void resolve();
  std::string to_ini() const;
  void save(const std::filesystem::path& path) const;

 private:
  struct Field {
    std::string key;
    std::function<std::string()> get;
    std::function<void(const std::string&)> set;
  };
  std::vector<Field> fields_;
};

}  // namespace dsaml::cli
