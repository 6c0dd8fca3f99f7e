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

#ifndef CARTOMAP_IDSET_HPP
#define CARTOMAP_IDSET_HPP

#include <cstdint>
#include <span>
#include <vector>

namespace cartomap {

// Sorted set of 32-bit ids split into 2^16-wide chunks. Each chunk is held
// as a sorted array, a 65536-bit bitmap or a list of runs, whichever is
// smallest, so equal sets always have the same representation and the same
// serialized bytes. The byte layout is the portable Roaring format.
class CompressedIdSet {
 public:
  enum class Kind : std::uint8_t { Array, Bitmap, Run };

  CompressedIdSet() = default;

  // ids must be strictly increasing.
  static CompressedIdSet from_sorted(std::span<const std::uint32_t> ids);
  static CompressedIdSet from_unsorted(std::vector<std::uint32_t> ids);
  // [lo, hi)
  static CompressedIdSet range(std::uint32_t lo, std::uint64_t hi);

  std::uint64_t cardinality() const;
  bool empty() const { return chunks_.empty(); }
  bool contains(std::uint32_t id) const;

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (const auto& c : chunks_) {
      const std::uint32_t base = static_cast<std::uint32_t>(c.key) << 16;
      switch (c.kind) {
        case Kind::Array:
          for (auto v : c.values) fn(base | v);
          break;
        case Kind::Run:
          for (std::size_t r = 0; r < c.values.size(); r += 2) {
            const std::uint32_t start = c.values[r];
            const std::uint32_t end = start + c.values[r + 1];
            for (std::uint32_t v = start; v <= end; ++v) fn(base | v);
          }
          break;
        case Kind::Bitmap:
          for (std::size_t w = 0; w < c.bits.size(); ++w) {
            std::uint64_t word = c.bits[w];
            while (word != 0) {
              fn(base | static_cast<std::uint32_t>(w * 64 + static_cast<std::size_t>(__builtin_ctzll(word))));
              word &= word - 1;
            }
          }
          break;
      }
    }
  }
  std::vector<std::uint32_t> to_vector() const;

  std::size_t chunk_count() const { return chunks_.size(); }
  Kind chunk_kind(std::size_t i) const { return chunks_.at(i).kind; }

  std::vector<std::uint8_t> serialize() const;
  // Throws Error(Format) on malformed input.
  static CompressedIdSet deserialize(std::span<const std::uint8_t> bytes);

  friend CompressedIdSet set_union(const CompressedIdSet& a, const CompressedIdSet& b);
  friend CompressedIdSet set_intersect(const CompressedIdSet& a, const CompressedIdSet& b);
  friend CompressedIdSet set_difference(const CompressedIdSet& a, const CompressedIdSet& b);

  friend CompressedIdSet union_all(std::span<const CompressedIdSet* const> sets);

  friend bool operator==(const CompressedIdSet&, const CompressedIdSet&) = default;

  struct Chunk {
    std::uint16_t key = 0;
    Kind kind = Kind::Array;
    std::uint32_t card = 0;
    std::vector<std::uint16_t> values;  // Array: sorted values. Run: (start, length - 1) pairs.
    std::vector<std::uint64_t> bits;    // Bitmap: 1024 words.

    friend bool operator==(const Chunk&, const Chunk&) = default;
  };

 private:
  std::vector<Chunk> chunks_;  // ascending key, never empty chunks
};

CompressedIdSet set_union(const CompressedIdSet& a, const CompressedIdSet& b);
CompressedIdSet set_intersect(const CompressedIdSet& a, const CompressedIdSet& b);
CompressedIdSet set_difference(const CompressedIdSet& a, const CompressedIdSet& b);

// Union of many sets, cheaper than folding set_union pairwise.
CompressedIdSet union_all(std::span<const CompressedIdSet* const> sets);

}  // namespace cartomap

#endif  // CARTOMAP_IDSET_HPP
