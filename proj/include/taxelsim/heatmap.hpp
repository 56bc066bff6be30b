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

#include <zlib.h>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "taxelsim/contact.hpp"
#include "taxelsim/io.hpp"

// Grayscale PNG heatmap export of tactile frames, for visual inspection.

namespace taxelsim {

namespace detail {

// PNG chunk framing is big-endian.
inline void png_chunk(std::ostream& os, const char type[5],
                      const std::vector<unsigned char>& data) {
  unsigned char len[4] = {
      static_cast<unsigned char>((data.size() >> 24) & 0xff),
      static_cast<unsigned char>((data.size() >> 16) & 0xff),
      static_cast<unsigned char>((data.size() >> 8) & 0xff),
      static_cast<unsigned char>(data.size() & 0xff)};
  os.write(reinterpret_cast<const char*>(len), 4);
  os.write(type, 4);
  if (!data.empty())
    os.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size()));
  uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(type), 4);
  if (!data.empty())
    crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
  unsigned char crc_be[4] = {static_cast<unsigned char>((crc >> 24) & 0xff),
                             static_cast<unsigned char>((crc >> 16) & 0xff),
                             static_cast<unsigned char>((crc >> 8) & 0xff),
                             static_cast<unsigned char>(crc & 0xff)};
  os.write(reinterpret_cast<const char*>(crc_be), 4);
}

}  // namespace detail

// 8-bit grayscale PNG from row-major intensities in [0,1].
inline void save_png_gray(const std::filesystem::path& path,
                          const std::vector<double>& intensity, int width,
                          int height) {
  if (width < 1 || height < 1 ||
      intensity.size() != static_cast<std::size_t>(width) * height)
    throw std::runtime_error("PNG: bad image shape");

  std::vector<unsigned char> raw;
  raw.reserve(static_cast<std::size_t>(height) * (width + 1));
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);  // filter type: none
    for (int x = 0; x < width; ++x) {
      double v = clamp01(intensity[static_cast<std::size_t>(y) * width + x]);
      raw.push_back(static_cast<unsigned char>(v * 255.0 + 0.5));
    }
  }

  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<unsigned char> idat(bound);
  if (compress2(idat.data(), &bound, raw.data(), static_cast<uLong>(raw.size()),
                Z_DEFAULT_COMPRESSION) != Z_OK)
    throw std::runtime_error("PNG: deflate failed");
  idat.resize(bound);

  AtomicFile file(path);
  std::ostream& os = file.stream();
  const unsigned char signature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  os.write(reinterpret_cast<const char*>(signature), 8);

  std::vector<unsigned char> ihdr(13);
  auto put_be32 = [](std::vector<unsigned char>& v, std::size_t at, std::uint32_t x) {
    v[at] = (x >> 24) & 0xff; v[at + 1] = (x >> 16) & 0xff;
    v[at + 2] = (x >> 8) & 0xff; v[at + 3] = x & 0xff;
  };
  put_be32(ihdr, 0, static_cast<std::uint32_t>(width));
  put_be32(ihdr, 4, static_cast<std::uint32_t>(height));
  ihdr[8] = 8;   // bit depth
  ihdr[9] = 0;   // grayscale
  ihdr[10] = ihdr[11] = ihdr[12] = 0;
  detail::png_chunk(os, "IHDR", ihdr);
  detail::png_chunk(os, "IDAT", idat);
  detail::png_chunk(os, "IEND", {});
  file.commit();
}

// Heatmap of one frame channel (0 = depth, 1 = force). Raw frames are scaled
// by their own maximum; normalized frames map [0,1] directly.
inline void save_frame_heatmap(const std::filesystem::path& path,
                               const TactileFrame& frame, int channel = 1) {
  const std::vector<double>& src = channel == 0 ? frame.depth : frame.force;
  std::vector<double> img(src);
  if (!frame.normalized) {
    double peak = 0.0;
    for (double v : img) peak = std::max(peak, v);
    if (peak > 0.0)
      for (double& v : img) v /= peak;
  }
  save_png_gray(path, img, frame.cols, frame.rows);
}

}  // namespace taxelsim
