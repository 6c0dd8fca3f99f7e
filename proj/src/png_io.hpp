// Copyright 2026 The Cartomap Authors
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

#ifndef CARTOMAP_PNG_IO_HPP
#define CARTOMAP_PNG_IO_HPP

#include <cstdint>
#include <span>
#include <vector>

namespace cartomap {

struct GreyImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

// 8-bit grey, non-interlaced, no ancillary chunks. Identical input gives
// identical bytes.
std::vector<std::uint8_t> encode_png(std::span<const std::uint8_t> pixels, std::uint32_t width, std::uint32_t height);

// Accepts only the 8-bit grey images written by encode_png.
GreyImage decode_png(std::span<const std::uint8_t> bytes);

}  // namespace cartomap

#endif  // CARTOMAP_PNG_IO_HPP
