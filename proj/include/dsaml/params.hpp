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
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "dsaml/rng.hpp"
#include "dsaml/tensor.hpp"

namespace dsaml {

// Named collection of trainable tensors. Copies are deep, so a copy is the
// clone used for inner-loop adaptation.
class ParamSet {
 public:
  using Map = std::map<std::string, Tensor>;

  ParamSet() = default;
  explicit ParamSet(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  bool contains(const std::string& name) const;
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  void set(const std::string& name, Tensor value);
  void erase(const std::string& name);

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t scalar_count() const;
  std::vector<std::string> names() const;

  Map::const_iterator begin() const { return entries_.begin(); }
  Map::const_iterator end() const { return entries_.end(); }
  Map::iterator begin() { return entries_.begin(); }
  Map::iterator end() { return entries_.end(); }

  ParamSet clone() const { return *this; }
  ParamSet zeros_like() const;

  // this[name] += scale * other[name] for every name in other. Names missing
  // here are inserted as scale * other[name].
  void accumulate(const ParamSet& other, double scale = 1.0);
  void scale(double factor);

  // Entries whose name starts with prefix.
  ParamSet subset(const std::string& prefix) const;

  bool all_finite() const;
  double max_abs() const;

  // Binary container: "DSML", u32 version, then per entry u32 path length,
  // path bytes, u32 rank, u32 dims, little-endian f64 payload.
  void write(std::ostream& out) const;
  static ParamSet read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static ParamSet load(const std::filesystem::path& path);

  // Value equality (seed excluded, it is not serialized).
  friend bool operator==(const ParamSet& a, const ParamSet& b) {
    return a.entries_ == b.entries_;
  }

 private:
  Map entries_;
  std::uint64_t seed_ = 0;
};

inline constexpr std::uint32_t kParamFormatVersion = 1;

// Bit-level equality, so that -0.0 vs 0.0 and NaN payloads are distinguished.
bool bitwise_equal(const ParamSet& a, const ParamSet& b);

// Uniform in +-sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(const Shape& shape, std::size_t fan_in,
                      std::size_t fan_out, Rng& rng);

}  // namespace dsaml
