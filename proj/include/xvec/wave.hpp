// include/xvec/wave.hpp

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
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace xvec {

/// Mono PCM audio.  Samples are kept as doubles in [-1, 1]; file I/O is
/// 16-bit little-endian PCM WAV only.
struct WaveSignal {
  std::vector<double> samples;
  int sample_rate = 8000;

  size_t size() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }

  void check_finite() const {
    for (double s : samples) {
      if (!std::isfinite(s)) throw std::runtime_error("invalid audio: non-finite sample");
    }
  }

  /// Mean square amplitude.
  double power() const {
    if (samples.empty()) return 0.0;
    double acc = 0.0;
    for (double s : samples) acc += s * s;
    return acc / samples.size();
  }

  double peak() const {
    double p = 0.0;
    for (double s : samples) p = std::max(p, std::abs(s));
    return p;
  }
};

namespace detail {

inline void put_u32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u16(std::string& s, uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}
inline uint32_t get_u32(const unsigned char* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 |
         uint32_t(p[3]) << 24;
}
inline uint16_t get_u16(const unsigned char* p) {
  return uint16_t(p[0]) | uint16_t(p[1]) << 8;
}

}  // namespace detail

inline void write_wav(const std::string& path, const WaveSignal& wave) {
  wave.check_finite();
  const uint32_t n = static_cast<uint32_t>(wave.samples.size());
  const uint32_t data_bytes = n * 2;
  std::string buf;
  buf.reserve(44 + data_bytes);
  buf += "RIFF";
  detail::put_u32(buf, 36 + data_bytes);
  buf += "WAVEfmt ";
  detail::put_u32(buf, 16);
  detail::put_u16(buf, 1);  // PCM
  detail::put_u16(buf, 1);  // mono
  detail::put_u32(buf, static_cast<uint32_t>(wave.sample_rate));
  detail::put_u32(buf, static_cast<uint32_t>(wave.sample_rate) * 2);
  detail::put_u16(buf, 2);
  detail::put_u16(buf, 16);
  buf += "data";
  detail::put_u32(buf, data_bytes);
  for (double s : wave.samples) {
    double c = std::clamp(s, -1.0, 1.0);
    int32_t q = static_cast<int32_t>(std::lrint(c * 32767.0));
    q = std::clamp(q, -32768, 32767);
    detail::put_u16(buf, static_cast<uint16_t>(static_cast<int16_t>(q)));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline WaveSignal read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string raw((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
  if (raw.size() < 12 || std::memcmp(p, "RIFF", 4) != 0 ||
      std::memcmp(p + 8, "WAVE", 4) != 0)
    throw std::runtime_error("not a RIFF/WAVE file: " + path);

  WaveSignal wave;
  bool have_fmt = false, have_data = false;
  size_t off = 12;
  while (off + 8 <= raw.size()) {
    const char* id = raw.data() + off;
    const uint32_t sz = detail::get_u32(p + off + 4);
    const size_t body = off + 8;
    if (body + sz > raw.size()) throw std::runtime_error("truncated WAV chunk: " + path);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (sz < 16) throw std::runtime_error("bad fmt chunk: " + path);
      const uint16_t fmt = detail::get_u16(p + body);
      const uint16_t channels = detail::get_u16(p + body + 2);
      const uint32_t rate = detail::get_u32(p + body + 4);
      const uint16_t bits = detail::get_u16(p + body + 14);
      if (fmt != 1 || channels != 1 || bits != 16)
        throw std::runtime_error("unsupported WAV (need 16-bit PCM mono): " + path);
      wave.sample_rate = static_cast<int>(rate);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      const size_t n = sz / 2;
      wave.samples.resize(n);
      for (size_t i = 0; i < n; ++i) {
        const int16_t q = static_cast<int16_t>(detail::get_u16(p + body + 2 * i));
        wave.samples[i] = q / 32768.0;
      }
      have_data = true;
    }
    off = body + sz + (sz & 1);  // chunks are word-aligned
  }
  if (!have_fmt || !have_data)
    throw std::runtime_error("missing fmt/data chunk: " + path);
  return wave;
}

}  // namespace xvec
