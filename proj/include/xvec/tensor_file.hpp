// include/xvec/tensor_file.hpp

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

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace xvec {

// Named-tensor container shared by checkpoints, embedding stores and PLDA
// models.  A text header
//
//   XTEN <version>
//   dtype f32|f64
//   meta <key> <value>          (zero or more)
//   tensors <count>
//
// is followed by binary little-endian records: u32 name length, name bytes,
// u32 ndim, u32 dims..., then the data in the header dtype.
inline constexpr int kTensorFileVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<int> dims;
  std::vector<double> data;  // held as double in memory regardless of dtype

  int64_t size() const {
    int64_t n = 1;
    for (int d : dims) n *= d;
    return n;
  }
};

struct TensorFile {
  std::string dtype = "f32";
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<NamedTensor> tensors;

  const std::string* find_meta(const std::string& key) const {
    for (const auto& [k, v] : meta)
      if (k == key) return &v;
    return nullptr;
  }

  const NamedTensor* find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }

  void save(const std::string& path) const {
    if (dtype != "f32" && dtype != "f64")
      throw std::invalid_argument("dtype must be f32 or f64");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "XTEN " << kTensorFileVersion << '\n';
    out << "dtype " << dtype << '\n';
    for (const auto& [k, v] : meta) out << "meta " << k << ' ' << v << '\n';
    out << "tensors " << tensors.size() << '\n';
    auto put_u32 = [&](uint32_t v) {
      unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                            static_cast<unsigned char>((v >> 8) & 0xff),
                            static_cast<unsigned char>((v >> 16) & 0xff),
                            static_cast<unsigned char>((v >> 24) & 0xff)};
      out.write(reinterpret_cast<const char*>(b), 4);
    };
    for (const auto& t : tensors) {
      if (t.data.size() != static_cast<size_t>(t.size()))
        throw std::invalid_argument("tensor " + t.name + " has inconsistent size");
      put_u32(static_cast<uint32_t>(t.name.size()));
      out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
      put_u32(static_cast<uint32_t>(t.dims.size()));
      for (int d : t.dims) put_u32(static_cast<uint32_t>(d));
      if (dtype == "f32") {
        std::vector<float> buf(t.data.begin(), t.data.end());
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * 4));
      } else {
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * 8));
      }
    }
    if (!out) throw std::runtime_error("write failed: " + path);
  }

  static TensorFile load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    TensorFile tf;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("truncated: " + path);
    {
      std::istringstream ss(line);
      std::string magic;
      int version = -1;
      ss >> magic >> version;
      if (magic != "XTEN") throw std::runtime_error("not a tensor file: " + path);
      if (version != kTensorFileVersion) {
        std::ostringstream msg;
        msg << "version mismatch: file has " << version << ", this build reads "
            << kTensorFileVersion << " (" << path << ")";
        throw std::runtime_error(msg.str());
      }
    }
    size_t n_tensors = 0;
    bool saw_tensors = false;
    while (std::getline(in, line)) {
      std::istringstream ss(line);
      std::string key;
      ss >> key;
      if (key == "dtype") {
        ss >> tf.dtype;
      } else if (key == "meta") {
        std::string name;
        ss >> name;
        std::string value;
        std::getline(ss, value);
        if (!value.empty() && value.front() == ' ') value.erase(0, 1);
        tf.meta.emplace_back(name, value);
      } else if (key == "tensors") {
        ss >> n_tensors;
        saw_tensors = true;
        break;
      } else {
        throw std::runtime_error("bad header line: " + line);
      }
    }
    if (!saw_tensors) throw std::runtime_error("truncated: missing tensor count in " + path);
    if (tf.dtype != "f32" && tf.dtype != "f64")
      throw std::runtime_error("bad dtype in " + path);

    auto get_u32 = [&]() {
      unsigned char b[4];
      in.read(reinterpret_cast<char*>(b), 4);
      if (!in) throw std::runtime_error("truncated: " + path);
      return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 |
             uint32_t(b[3]) << 24;
    };
    tf.tensors.resize(n_tensors);
    for (auto& t : tf.tensors) {
      const uint32_t name_len = get_u32();
      t.name.resize(name_len);
      in.read(t.name.data(), name_len);
      if (!in) throw std::runtime_error("truncated: " + path);
      const uint32_t ndim = get_u32();
      t.dims.resize(ndim);
      for (auto& d : t.dims) d = static_cast<int>(get_u32());
      const int64_t n = t.size();
      t.data.resize(static_cast<size_t>(n));
      if (tf.dtype == "f32") {
        std::vector<float> buf(static_cast<size_t>(n));
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * 4));
        if (!in) throw std::runtime_error("truncated: " + path);
        for (size_t i = 0; i < buf.size(); ++i) t.data[i] = buf[i];
      } else {
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * 8));
        if (!in) throw std::runtime_error("truncated: " + path);
      }
    }
    return tf;
  }
};

}  // namespace xvec
