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
#include "dsaml/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "dsaml/error.hpp"

namespace dsaml {
namespace {

constexpr double kTimeTol = 1e-9;

struct Row {
  double t;
  double valence;
  double arousal;
};

double parse_number(const std::string& cell, const std::filesystem::path& path,
                    std::size_t line_no) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != cell.size() || !std::isfinite(v)) {
    throw IoError("'" + path.string() + "' line " + std::to_string(line_no) +
                  ": malformed number '" + cell + "'");
  }
  return v;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && s[i] == ' ') ++i;
  return s.substr(i);
}

}  // namespace

VASequence make_va(std::string clip_id, std::size_t steps, double resolution_hz,
                   double start_s) {
  return VASequence{Tensor(Shape{steps, 2}), resolution_hz, start_s, std::move(clip_id)};
}

const MelSequence& Dataset::mel(const std::string& clip_id) const {
  auto it = mels.find(clip_id);
  if (it == mels.end()) throw Error("no mel sequence for clip '" + clip_id + "'");
  return it->second;
}

std::vector<std::string> Dataset::annotators() const {
  std::set<std::string> ids;
  for (const auto& c : clips) ids.insert(c.annotator_id);
  return {ids.begin(), ids.end()};
}

std::vector<std::string> Dataset::clip_ids() const {
  std::set<std::string> ids;
  for (const auto& c : clips) ids.insert(c.clip_id);
  return {ids.begin(), ids.end()};
}

std::vector<AnnotatedClip> Dataset::by_annotator(const std::string& annotator_id) const {
  std::vector<AnnotatedClip> out;
  for (const auto& c : clips) {
    if (c.annotator_id == annotator_id) out.push_back(c);
  }
  return out;
}

std::vector<AnnotatedClip> mean_labels(const std::vector<AnnotatedClip>& clips) {
  std::map<std::string, std::vector<const AnnotatedClip*>> groups;
  for (const auto& c : clips) groups[c.clip_id].push_back(&c);
  std::vector<AnnotatedClip> out;
  for (const auto& [clip_id, members] : groups) {
    std::size_t k = members.front()->label.steps();
    for (const auto* m : members) k = std::min(k, m->label.steps());
    const VASequence& first = members.front()->label;
    AnnotatedClip mean{clip_id, kMeanAnnotator,
                       make_va(clip_id, k, first.resolution_hz, first.start_s)};
    for (std::size_t t = 0; t < k; ++t) {
      for (std::size_t d = 0; d < 2; ++d) {
        double s = 0.0;
        for (const auto* m : members) s += m->label.values.at(t, d);
        mean.label.values.at(t, d) = s / static_cast<double>(members.size());
      }
    }
    out.push_back(std::move(mean));
  }
  return out;
}

std::vector<AnnotatedClip> read_label_csv(const std::filesystem::path& path,
                                          const LabelOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open label file '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || trim(line) != "annotator_id,t_seconds,valence,arousal") {
    throw IoError("'" + path.string() +
                  "': expected header annotator_id,t_seconds,valence,arousal");
  }
  std::map<std::string, std::vector<Row>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (cells.size() != 4 || cells[0].empty()) {
      throw IoError("'" + path.string() + "' line " + std::to_string(line_no) +
                    ": expected 4 fields");
    }
    rows[cells[0]].push_back({parse_number(cells[1], path, line_no),
                              parse_number(cells[2], path, line_no),
                              parse_number(cells[3], path, line_no)});
  }
  const std::string clip_id = path.stem().string();
  std::vector<AnnotatedClip> out;
  for (auto& [annotator, series] : rows) {
    std::stable_sort(series.begin(), series.end(),
                     [](const Row& a, const Row& b) { return a.t < b.t; });
    std::erase_if(series, [&](const Row& r) { return r.t < options.trim_head_s - kTimeTol; });
    if (series.empty()) {
      throw Error("clip '" + clip_id + "', annotator '" + annotator +
                  "': annotations shorter than one step after trimming");
    }
    const double last = series.back().t;
    std::size_t k = 0;
    while (options.trim_head_s + static_cast<double>(k) / options.resolution_hz <=
           last + kTimeTol) {
      ++k;
    }
    if (k == 0) {
      throw Error("clip '" + clip_id + "', annotator '" + annotator +
                  "': annotations shorter than one step");
    }
    VASequence va = make_va(clip_id, k, options.resolution_hz, options.trim_head_s);
    std::size_t j = 0;
    for (std::size_t step = 0; step < k; ++step) {
      const double t = va.time_at(step);
      while (j + 1 < series.size() && series[j + 1].t <= t + kTimeTol) ++j;
      double v = series[j].valence, a = series[j].arousal;
      if (t > series[j].t + kTimeTol && j + 1 < series.size()) {
        const Row& lo = series[j];
        const Row& hi = series[j + 1];
        const double frac = (t - lo.t) / (hi.t - lo.t);
        v = lo.valence + (hi.valence - lo.valence) * frac;
        a = lo.arousal + (hi.arousal - lo.arousal) * frac;
      }
      va.values.at(step, 0) = std::clamp(v, -1.0, 1.0);
      va.values.at(step, 1) = std::clamp(a, -1.0, 1.0);
    }
    out.push_back({clip_id, annotator, std::move(va)});
  }
  if (out.empty()) throw Error("'" + path.string() + "': no annotation rows");
  return out;
}

void write_label_csv(const std::filesystem::path& path,
                     const std::vector<AnnotatedClip>& clips) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "annotator_id,t_seconds,valence,arousal\n" << std::setprecision(17);
  for (const auto& c : clips) {
    for (std::size_t t = 0; t < c.label.steps(); ++t) {
      out << c.annotator_id << ',' << c.label.time_at(t) << ',' << c.label.valence(t)
          << ',' << c.label.arousal(t) << '\n';
    }
  }
}

Dataset load_dataset(const std::filesystem::path& dir, const MelConfig& mel_cfg) {
  namespace fs = std::filesystem;
  const fs::path labels_dir = dir / "labels";
  if (!fs::is_directory(labels_dir)) {
    throw IoError("dataset '" + dir.string() + "' has no labels/ directory");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(labels_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("dataset '" + dir.string() + "' has no label files");

  const LabelOptions opts{mel_cfg.resolution_hz, mel_cfg.trim_head_s};
  Dataset ds;
  for (const auto& file : files) {
    const std::string clip_id = file.stem().string();
    const fs::path cache = dir / "cache" / (clip_id + ".mel");
    const fs::path audio = dir / "audio" / (clip_id + ".wav");
    MelSequence mel;
    if (fs::exists(cache)) {
      mel = read_mel_cache(cache, mel_cfg.resolution_hz, mel_cfg.trim_head_s);
    } else if (fs::exists(audio)) {
      mel = preprocess(load_audio(audio, mel_cfg.sample_rate), mel_cfg);
    } else {
      throw IoError("clip '" + clip_id + "' has labels but no audio or cached mel");
    }
    auto clips = read_label_csv(file, opts);
    for (auto& c : clips) {
      if (c.label.steps() < mel.steps()) {
        throw Error("clip '" + clip_id + "', annotator '" + c.annotator_id +
                    "': " + std::to_string(c.label.steps()) +
                    " label steps but the audio has " + std::to_string(mel.steps()));
      }
      if (c.label.steps() > mel.steps()) {
        Tensor cut(Shape{mel.steps(), 2});
        std::copy_n(c.label.values.raw(), cut.size(), cut.raw());
        c.label.values = std::move(cut);
      }
      ds.clips.push_back(std::move(c));
    }
    ds.mels.emplace(clip_id, std::move(mel));
  }
  return ds;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "labels");
  fs::create_directories(dir / "cache");
  std::map<std::string, std::vector<AnnotatedClip>> by_clip;
  for (const auto& c : dataset.clips) by_clip[c.clip_id].push_back(c);
  for (const auto& [clip_id, clips] : by_clip) {
    write_label_csv(dir / "labels" / (clip_id + ".csv"), clips);
    write_mel_cache(dir / "cache" / (clip_id + ".mel"), dataset.mel(clip_id));
  }
}

}  // namespace dsaml
