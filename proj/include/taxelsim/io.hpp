// Copyright 2026 The taxelsim Authors
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

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

namespace taxelsim {

namespace detail {

template <typename T>
void write_le(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
      std::swap(buf[i], buf[sizeof(T) - 1 - i]);
  }
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (!is) throw std::runtime_error("unexpected end of file");
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
      std::swap(buf[i], buf[sizeof(T) - 1 - i]);
  }
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

inline void write_magic(std::ostream& os, const char magic[5]) {
  os.write(magic, 4);
}

inline void expect_magic(std::istream& is, const char magic[5],
                         const std::string& what) {
  char buf[4];
  is.read(buf, 4);
  if (!is || std::memcmp(buf, magic, 4) != 0)
    throw std::runtime_error(what + ": bad magic, expected \"" + magic + "\"");
}

}  // namespace detail

// Writes through a temp file in the destination directory and renames on
// commit, so a failed run never leaves a partial output at `path`.
class AtomicFile {
 public:
  explicit AtomicFile(const std::filesystem::path& path, bool binary = true)
      : final_path_(path), tmp_path_(path.string() + ".tmp") {
    stream_.open(tmp_path_, binary ? std::ios::binary | std::ios::out
                                   : std::ios::out);
    if (!stream_)
      throw std::runtime_error("cannot open for writing: " + path.string());
  }

  ~AtomicFile() {
    if (!committed_) {
      stream_.close();
      std::error_code ec;
      std::filesystem::remove(tmp_path_, ec);
    }
  }

  std::ostream& stream() { return stream_; }

  void commit() {
    stream_.flush();
    if (!stream_)
      throw std::runtime_error("write failed: " + final_path_.string());
    stream_.close();
    std::filesystem::rename(tmp_path_, final_path_);
    committed_ = true;
  }

 private:
  std::filesystem::path final_path_;
  std::filesystem::path tmp_path_;
  std::ofstream stream_;
  bool committed_ = false;
};

inline std::ifstream open_input(const std::filesystem::path& path,
                                bool binary = true) {
  std::ifstream is(path, binary ? std::ios::binary | std::ios::in
                                : std::ios::in);
  if (!is) throw std::runtime_error("cannot open file: " + path.string());
  return is;
}

// FNV-1a over a byte range; used for content-addressed cache keys.
inline std::uint64_t fnv1a64(const void* data, std::size_t size,
                             std::uint64_t seed = 0xcbf29ce484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t hash_file_contents(const std::filesystem::path& path) {
  std::ifstream is = open_input(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof(buf));
    std::streamsize got = is.gcount();
    if (got > 0) h = fnv1a64(buf, static_cast<std::size_t>(got), h);
  }
  return h;
}

}  // namespace taxelsim
