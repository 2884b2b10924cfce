// include/xvec/archive.hpp

// Copyright 2026  xvec authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "xvec/features.hpp"
#include "xvec/rng.hpp"

namespace xvec {

// Training archive binary format (little-endian):
//   magic "XARC", u32 version = 1, u32 n_batches;
//   per batch: u32 B, u32 T, u32 D, B*T*D f32 features (example-major,
//   then frame, then dim), B u32 labels.
inline constexpr uint32_t kArchiveVersion = 1;

/// One minibatch of equal-length feature chunks.
struct ArchiveBatch {
  int batch = 0;  // B
  int frames = 0; // T
  int dim = 0;    // D
  std::vector<float> feats;     // B*T*D, example-major
  std::vector<uint32_t> labels; // B

  float at(int b, int t, int d) const {
    return feats[(static_cast<size_t>(b) * frames + t) * dim + d];
  }
};

namespace detail {

inline void put_u32le(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t read_u32le(std::istream& in, const char* what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error(std::string("truncated: ") + what);
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 |
         uint32_t(b[3]) << 24;
}

inline void write_f32le(std::ostream& out, const float* data, size_t n) {
  static_assert(sizeof(float) == 4);
  // Little-endian host assumed; asserted once at startup by the CLI.
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 4));
}

inline void read_f32le(std::istream& in, float* data, size_t n, const char* what) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * 4));
  if (!in) throw std::runtime_error(std::string("truncated: ") + what);
}

}  // namespace detail

/// Streaming archive writer; the batch count is back-patched on finish().
class ArchiveWriter {
 public:
  explicit ArchiveWriter(const std::string& path)
      : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open for writing: " + path);
    out_.write("XARC", 4);
    detail::put_u32le(out_, kArchiveVersion);
    detail::put_u32le(out_, 0);  // n_batches placeholder
  }

  /// Byte offset where the next batch will start (usable for random access).
  std::streamoff tell() { return out_.tellp(); }

  void add(const ArchiveBatch& b) {
    if (b.feats.size() != static_cast<size_t>(b.batch) * b.frames * b.dim ||
        b.labels.size() != static_cast<size_t>(b.batch))
      throw std::invalid_argument("inconsistent batch");
    detail::put_u32le(out_, static_cast<uint32_t>(b.batch));
    detail::put_u32le(out_, static_cast<uint32_t>(b.frames));
    detail::put_u32le(out_, static_cast<uint32_t>(b.dim));
    detail::write_f32le(out_, b.feats.data(), b.feats.size());
    for (uint32_t label : b.labels) detail::put_u32le(out_, label);
    ++count_;
  }

  void finish() {
    out_.seekp(8, std::ios::beg);
    detail::put_u32le(out_, count_);
    out_.close();
    if (!out_) throw std::runtime_error("write failed: " + path_);
  }

  uint32_t count() const { return count_; }

 private:
  std::string path_;
  std::ofstream out_;
  uint32_t count_ = 0;
};

/// Sequential archive reader.
class ArchiveReader {
 public:
  explicit ArchiveReader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error("cannot open: " + path);
    char magic[4];
    in_.read(magic, 4);
    if (!in_ || std::memcmp(magic, "XARC", 4) != 0)
      throw std::runtime_error("corrupt archive: bad magic in " + path);
    const uint32_t version = detail::read_u32le(in_, "version");
    if (version != kArchiveVersion) {
      std::ostringstream msg;
      msg << "corrupt archive: unsupported version " << version << " (expected "
          << kArchiveVersion << ") in " << path;
      throw std::runtime_error(msg.str());
    }
    n_batches_ = detail::read_u32le(in_, "batch count");
  }

  uint32_t n_batches() const { return n_batches_; }

  ArchiveBatch read_at(std::streamoff offset) {
    in_.clear();
    in_.seekg(offset, std::ios::beg);
    uint32_t dummy = 0;
    return read_batch_impl(dummy);
  }

  bool next(ArchiveBatch& out) {
    if (read_ >= n_batches_) return false;
    out = read_batch_impl(read_);
    return true;
  }

 private:
  ArchiveBatch read_batch_impl(uint32_t& counter) {
    ArchiveBatch b;
    b.batch = static_cast<int>(detail::read_u32le(in_, "batch size"));
    b.frames = static_cast<int>(detail::read_u32le(in_, "frame count"));
    b.dim = static_cast<int>(detail::read_u32le(in_, "dim"));
    if (b.batch < 0 || b.frames < 0 || b.dim < 0)
      throw std::runtime_error("corrupt archive: bad batch header");
    b.feats.resize(static_cast<size_t>(b.batch) * b.frames * b.dim);
    detail::read_f32le(in_, b.feats.data(), b.feats.size(), "features");
    b.labels.resize(static_cast<size_t>(b.batch));
    for (auto& label : b.labels) label = detail::read_u32le(in_, "label");
    ++counter;
    return b;
  }

  std::ifstream in_;
  uint32_t n_batches_ = 0;
  uint32_t read_ = 0;
};

inline void write_archive(const std::string& path,
                          const std::vector<ArchiveBatch>& batches) {
  ArchiveWriter w(path);
  for (const auto& b : batches) w.add(b);
  w.finish();
}

inline std::vector<ArchiveBatch> read_archive(const std::string& path) {
  ArchiveReader r(path);
  std::vector<ArchiveBatch> out;
  ArchiveBatch b;
  while (r.next(b)) out.push_back(std::move(b));
  return out;
}

// ---------------------------------------------------------------------------
// Per-utterance feature store: the same XARC container with B = 1 batches
// plus a text index "utt_id speaker_id offset frames".

struct FeatureStoreEntry {
  std::string utt_id;
  std::string speaker_id;
  std::streamoff offset = 0;
  int frames = 0;
};

class FeatureStoreWriter {
 public:
  explicit FeatureStoreWriter(const std::string& dir)
      : dir_(dir), writer_(dir + "/feats.xarc"), index_(dir + "/feats.idx") {
    if (!index_) throw std::runtime_error("cannot open for writing: " + dir + "/feats.idx");
  }

  void add(const std::string& utt_id, const std::string& speaker_id,
           const FeatureMatrix& feats) {
    const auto offset = writer_.tell();
    ArchiveBatch b;
    b.batch = 1;
    b.frames = static_cast<int>(feats.rows());
    b.dim = static_cast<int>(feats.cols());
    b.feats.resize(static_cast<size_t>(b.frames) * b.dim);
    for (int t = 0; t < b.frames; ++t)
      for (int d = 0; d < b.dim; ++d)
        b.feats[static_cast<size_t>(t) * b.dim + d] = static_cast<float>(feats(t, d));
    b.labels = {0};  // speaker identity lives in the index
    writer_.add(b);
    index_ << utt_id << ' ' << speaker_id << ' ' << offset << ' ' << b.frames << '\n';
  }

  void finish() {
    writer_.finish();
    index_.close();
  }

 private:
  std::string dir_;
  ArchiveWriter writer_;
  std::ofstream index_;
};

class FeatureStore {
 public:
  explicit FeatureStore(const std::string& dir)
      : dir_(dir), reader_(dir + "/feats.xarc") {
    std::ifstream idx(dir + "/feats.idx");
    if (!idx) throw std::runtime_error("cannot open: " + dir + "/feats.idx");
    std::string line;
    while (std::getline(idx, line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      FeatureStoreEntry e;
      long long off = 0;
      if (!(ss >> e.utt_id >> e.speaker_id >> off >> e.frames))
        throw std::runtime_error("bad feature index line: " + line);
      e.offset = off;
      by_utt_[e.utt_id] = entries_.size();
      entries_.push_back(e);
    }
  }

  const std::vector<FeatureStoreEntry>& entries() const { return entries_; }

  Eigen::MatrixXf load(const FeatureStoreEntry& e) {
    ArchiveBatch b = reader_.read_at(e.offset);
    if (b.batch != 1) throw std::runtime_error("corrupt feature store");
    Eigen::MatrixXf m(b.frames, b.dim);
    for (int t = 0; t < b.frames; ++t)
      for (int d = 0; d < b.dim; ++d) m(t, d) = b.at(0, t, d);
    return m;
  }

  Eigen::MatrixXf load(const std::string& utt_id) {
    auto it = by_utt_.find(utt_id);
    if (it == by_utt_.end())
      throw std::runtime_error("unknown utterance: " + utt_id);
    return load(entries_[it->second]);
  }

 private:
  std::string dir_;
  ArchiveReader reader_;
  std::vector<FeatureStoreEntry> entries_;
  std::map<std::string, size_t> by_utt_;
};

// ---------------------------------------------------------------------------
// Chunking into balanced training archives.

struct ChunkConfig {
  int batch_size = 64;
  int chunk_min = 200;
  int chunk_max = 400;
  int n_archives = 4;
  int chunks_per_utt = 1;   // examples drawn from each utterance per pass
  int min_chunks_per_speaker = 4;

  void validate() const {
    if (batch_size < 1 || n_archives < 1 || chunks_per_utt < 1)
      throw std::invalid_argument("bad chunk config");
    if (!(chunk_min >= 1 && chunk_max >= chunk_min))
      throw std::invalid_argument("bad chunk range");
  }
};

struct ArchiveSetMeta {
  std::vector<std::string> files;
  int batch_size = 0;
  int chunk_min = 0;
  int chunk_max = 0;
  int n_speakers = 0;
  std::map<std::string, int> label_map;  // speaker id -> dense label

  nlohmann::json to_json() const {
    return nlohmann::json{{"files", files},       {"batch_size", batch_size},
                          {"chunk_min", chunk_min}, {"chunk_max", chunk_max},
                          {"n_speakers", n_speakers}, {"label_map", label_map}};
  }
  static ArchiveSetMeta from_json(const nlohmann::json& j) {
    ArchiveSetMeta m;
    m.files = j.at("files").get<std::vector<std::string>>();
    m.batch_size = j.at("batch_size").get<int>();
    m.chunk_min = j.at("chunk_min").get<int>();
    m.chunk_max = j.at("chunk_max").get<int>();
    m.n_speakers = j.at("n_speakers").get<int>();
    m.label_map = j.at("label_map").get<std::map<std::string, int>>();
    return m;
  }
  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << to_json().dump(2) << '\n';
  }
  static ArchiveSetMeta load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
  }
};

namespace detail {

struct ChunkSource {
  int label;
  const Eigen::MatrixXf* feats;
};

}  // namespace detail

/// Cuts labeled utterance features into fixed-length chunks and spreads them
/// over n_archives archives with speakers balanced across files.  Chunk
/// length is drawn per minibatch from [chunk_min, min(chunk_max, shortest
/// member)]; the start offset is drawn per example.
inline ArchiveSetMeta chunk_and_archive(
    const std::vector<std::pair<std::string, Eigen::MatrixXf>>& utts,
    const std::vector<std::string>& speaker_ids, const ChunkConfig& cfg,
    const std::string& out_dir, Rng& rng) {
  cfg.validate();
  if (utts.size() != speaker_ids.size())
    throw std::invalid_argument("utts/speaker_ids size mismatch");

  // Usable utterances grouped per speaker.
  std::map<std::string, std::vector<size_t>> by_speaker;
  size_t skipped = 0;
  for (size_t i = 0; i < utts.size(); ++i) {
    if (utts[i].second.rows() >= cfg.chunk_min) {
      by_speaker[speaker_ids[i]].push_back(i);
    } else {
      ++skipped;
    }
  }
  if (skipped > 0)
    std::cerr << "warning: skipped " << skipped
              << " utterances shorter than the minimum chunk\n";

  ArchiveSetMeta meta;
  meta.batch_size = cfg.batch_size;
  meta.chunk_min = cfg.chunk_min;
  meta.chunk_max = cfg.chunk_max;
  for (auto it = by_speaker.begin(); it != by_speaker.end();) {
    if (static_cast<int>(it->second.size()) < cfg.min_chunks_per_speaker) {
      std::cerr << "warning: dropping speaker " << it->first
                << " with too few usable utterances\n";
      it = by_speaker.erase(it);
    } else {
      ++it;
    }
  }
  if (by_speaker.empty()) throw std::runtime_error("no usable utterances");
  int next_label = 0;
  for (const auto& [spk, _] : by_speaker) meta.label_map[spk] = next_label++;
  meta.n_speakers = next_label;

  // Round-robin utterances of each speaker across archives, with a
  // speaker-dependent starting archive so file sizes stay even.
  std::vector<std::vector<std::pair<int, size_t>>> per_archive(
      static_cast<size_t>(cfg.n_archives));
  int spk_index = 0;
  for (auto& [spk, list] : by_speaker) {
    std::vector<size_t> draws;
    for (int rep = 0; rep < cfg.chunks_per_utt; ++rep)
      draws.insert(draws.end(), list.begin(), list.end());
    rng.shuffle(draws.begin(), draws.end());
    for (size_t k = 0; k < draws.size(); ++k) {
      const int a = (spk_index + static_cast<int>(k)) % cfg.n_archives;
      per_archive[static_cast<size_t>(a)].emplace_back(meta.label_map[spk], draws[k]);
    }
    ++spk_index;
  }

  for (int a = 0; a < cfg.n_archives; ++a) {
    auto& examples = per_archive[static_cast<size_t>(a)];
    rng.shuffle(examples.begin(), examples.end());
    char name[32];
    std::snprintf(name, sizeof(name), "archive.%03d.xarc", a);
    const std::string path = out_dir + "/" + name;
    ArchiveWriter writer(path);
    for (size_t pos = 0; pos + cfg.batch_size <= examples.size();
         pos += cfg.batch_size) {
      int shortest = cfg.chunk_max;
      for (int i = 0; i < cfg.batch_size; ++i) {
        const auto& m = utts[examples[pos + i].second].second;
        shortest = std::min(shortest, static_cast<int>(m.rows()));
      }
      const int len = static_cast<int>(
          rng.uniform_int(cfg.chunk_min, std::max(cfg.chunk_min, shortest)));
      ArchiveBatch b;
      b.batch = cfg.batch_size;
      b.frames = len;
      b.dim = static_cast<int>(utts[examples[pos].second].second.cols());
      b.feats.resize(static_cast<size_t>(b.batch) * len * b.dim);
      b.labels.resize(static_cast<size_t>(b.batch));
      for (int i = 0; i < cfg.batch_size; ++i) {
        const auto& [label, utt_idx] = examples[pos + i];
        const auto& m = utts[utt_idx].second;
        const int start = static_cast<int>(
            rng.uniform_int(0, static_cast<int64_t>(m.rows()) - len));
        for (int t = 0; t < len; ++t)
          for (int d = 0; d < b.dim; ++d)
            b.feats[(static_cast<size_t>(i) * len + t) * b.dim + d] =
                m(start + t, d);
        b.labels[static_cast<size_t>(i)] = static_cast<uint32_t>(label);
      }
      writer.add(b);
    }
    writer.finish();
    if (writer.count() > 0) {
      meta.files.push_back(path);
    } else {
      std::remove(path.c_str());
    }
  }
  if (meta.files.empty())
    throw std::runtime_error("no archives produced (not enough usable data)");
  return meta;
}

}  // namespace xvec
