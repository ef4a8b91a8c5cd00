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
#include "dsaml/params.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "dsaml/error.hpp"

namespace dsaml {
namespace {

constexpr std::array<char, 4> kMagic = {'D', 'S', 'M', 'L'};

void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<unsigned char, 4> b{};
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b.data()), 4);
}

void put_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  std::array<unsigned char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b.data()), 8);
}

bool get_u32(std::istream& in, std::uint32_t& v) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) return false;
  v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return true;
}

double get_f64(std::istream& in) {
  std::array<unsigned char, 8> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 8)) {
    throw IoError("truncated parameter payload");
  }
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

bool ParamSet::contains(const std::string& name) const {
  return entries_.count(name) != 0;
}

const Tensor& ParamSet::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

Tensor& ParamSet::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

void ParamSet::set(const std::string& name, Tensor value) {
  entries_[name] = std::move(value);
}

void ParamSet::erase(const std::string& name) { entries_.erase(name); }

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : entries_) n += t.size();
  return n;
}

std::vector<std::string> ParamSet::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out(seed_);
  for (const auto& [name, t] : entries_) out.set(name, Tensor(t.shape()));
  return out;
}

void ParamSet::accumulate(const ParamSet& other, double scale) {
  for (const auto& [name, t] : other.entries_) {
    auto it = entries_.find(name);
    if (it == entries_.end()) {
      Tensor copy(t.shape());
      for (std::size_t i = 0; i < t.size(); ++i) copy[i] = scale * t[i];
      entries_.emplace(name, std::move(copy));
      continue;
    }
    Tensor& dst = it->second;
    if (dst.shape() != t.shape()) {
      throw ShapeError("parameter '" + name + "' shape " + shape_str(dst.shape()) +
                       " vs " + shape_str(t.shape()));
    }
    for (std::size_t i = 0; i < t.size(); ++i) dst[i] += scale * t[i];
  }
}

void ParamSet::scale(double factor) {
  for (auto& [_, t] : entries_) {
    for (double& v : t.values()) v *= factor;
  }
}

ParamSet ParamSet::subset(const std::string& prefix) const {
  ParamSet out(seed_);
  for (const auto& [name, t] : entries_) {
    if (name.rfind(prefix, 0) == 0) out.set(name, t);
  }
  return out;
}

bool ParamSet::all_finite() const {
  return std::all_of(entries_.begin(), entries_.end(),
                     [](const auto& kv) { return kv.second.all_finite(); });
}

double ParamSet::max_abs() const {
  double m = 0.0;
  for (const auto& [_, t] : entries_) {
    for (double v : t.values()) m = std::max(m, std::abs(v));
  }
  return m;
}

void ParamSet::write(std::ostream& out) const {
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kParamFormatVersion);
  for (const auto& [name, t] : entries_) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.values()) put_f64(out, v);
  }
  if (!out) throw IoError("failed writing parameter container");
}

ParamSet ParamSet::read(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || magic != kMagic) {
    throw IoError("not a parameter container (bad magic)");
  }
  std::uint32_t version = 0;
  if (!get_u32(in, version)) throw IoError("truncated parameter header");
  if (version != kParamFormatVersion) {
    throw IoError("unsupported parameter container version " +
                  std::to_string(version));
  }
  ParamSet out;
  std::uint32_t name_len = 0;
  while (get_u32(in, name_len)) {
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw IoError("truncated parameter name");
    std::uint32_t rank = 0;
    if (!get_u32(in, rank)) throw IoError("truncated rank for '" + name + "'");
    Shape shape(rank);
    for (auto& d : shape) {
      std::uint32_t v = 0;
      if (!get_u32(in, v)) throw IoError("truncated dims for '" + name + "'");
      d = v;
    }
    Tensor t(shape);
    for (double& v : t.values()) v = get_f64(in);
    out.set(name, std::move(t));
  }
  return out;
}

void ParamSet::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write(out);
}

ParamSet ParamSet::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  return read(in);
}

bool bitwise_equal(const ParamSet& a, const ParamSet& b) {
  if (a.size() != b.size()) return false;
  auto ia = a.begin();
  auto ib = b.begin();
  for (; ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first) return false;
    if (ia->second.shape() != ib->second.shape()) return false;
    if (std::memcmp(ia->second.raw(), ib->second.raw(),
                    ia->second.size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

Tensor glorot_uniform(const Shape& shape, std::size_t fan_in,
                      std::size_t fan_out, Rng& rng) {
  const double limit =
      std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(shape);
  for (double& v : t.values()) v = rng.uniform(-limit, limit);
  return t;
}

}  // namespace dsaml
