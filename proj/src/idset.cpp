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

#include "idset.hpp"

#include <algorithm>
#include <bit>

#include "common.hpp"

namespace cartomap {

namespace {

using Chunk = CompressedIdSet::Chunk;
using Kind = CompressedIdSet::Kind;

constexpr std::uint32_t kCookieNoRuns = 12346;
constexpr std::uint32_t kCookieRuns = 12347;
constexpr std::size_t kArrayMax = 4096;
constexpr std::size_t kWords = 1024;
constexpr std::size_t kNoOffsetThreshold = 4;

Kind best_kind(std::uint32_t card, std::size_t runs) {
  const std::size_t run_bytes = 2 + 4 * runs;
  const std::size_t other = card <= kArrayMax ? 2 * static_cast<std::size_t>(card) : 8192;
  if (run_bytes < other) return Kind::Run;
  return card <= kArrayMax ? Kind::Array : Kind::Bitmap;
}

void set_bit(std::vector<std::uint64_t>& bits, std::uint32_t v) { bits[v >> 6] |= std::uint64_t{1} << (v & 63); }

std::vector<std::uint64_t> to_bits(const Chunk& c) {
  if (c.kind == Kind::Bitmap) return c.bits;
  std::vector<std::uint64_t> bits(kWords, 0);
  if (c.kind == Kind::Array) {
    for (auto v : c.values) set_bit(bits, v);
  } else {
    for (std::size_t r = 0; r < c.values.size(); r += 2) {
      std::uint32_t lo = c.values[r];
      const std::uint32_t hi = lo + c.values[r + 1] + 1;  // exclusive
      while (lo < hi) {
        const std::uint32_t w = lo >> 6, off = lo & 63;
        const std::uint32_t span = std::min<std::uint32_t>(64 - off, hi - lo);
        const std::uint64_t mask = span == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << span) - 1) << off;
        bits[w] |= mask;
        lo += span;
      }
    }
  }
  return bits;
}

// Runs of set bits as (start, length - 1) pairs.
std::vector<std::uint16_t> runs_from_bits(const std::vector<std::uint64_t>& bits) {
  std::vector<std::uint16_t> out;
  std::size_t w = 0;
  std::uint64_t word = bits[0];
  while (true) {
    while (word == 0) {
      if (++w == kWords) return out;
      word = bits[w];
    }
    const std::uint32_t start = static_cast<std::uint32_t>(w * 64) + static_cast<std::uint32_t>(std::countr_zero(word));
    // Fill below the run start, then look for the first zero above it.
    word |= word - 1;
    while (word == ~std::uint64_t{0}) {
      if (++w == kWords) {
        out.push_back(static_cast<std::uint16_t>(start));
        out.push_back(static_cast<std::uint16_t>(65535 - start));
        return out;
      }
      word = bits[w];
    }
    const std::uint32_t end = static_cast<std::uint32_t>(w * 64) + static_cast<std::uint32_t>(std::countr_one(word));
    out.push_back(static_cast<std::uint16_t>(start));
    out.push_back(static_cast<std::uint16_t>(end - 1 - start));
    word &= word + 1;  // clear the trailing ones
  }
}

std::size_t count_runs_bits(const std::vector<std::uint64_t>& bits) {
  std::size_t runs = 0;
  std::uint64_t carry = 0;
  for (auto word : bits) {
    runs += static_cast<std::size_t>(std::popcount(word & ~((word << 1) | carry)));
    carry = word >> 63;
  }
  return runs;
}

std::size_t count_runs_sorted(const std::vector<std::uint16_t>& values) {
  std::size_t runs = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i == 0 || values[i] != values[i - 1] + 1) ++runs;
  }
  return runs;
}

std::vector<std::uint16_t> runs_from_sorted(const std::vector<std::uint16_t>& values) {
  std::vector<std::uint16_t> out;
  for (std::size_t i = 0; i < values.size();) {
    std::size_t j = i;
    while (j + 1 < values.size() && values[j + 1] == values[j] + 1) ++j;
    out.push_back(values[i]);
    out.push_back(static_cast<std::uint16_t>(values[j] - values[i]));
    i = j + 1;
  }
  return out;
}

// Both builders return a chunk with card == 0 when the input is empty.
Chunk chunk_from_sorted(std::uint16_t key, std::vector<std::uint16_t> values) {
  Chunk c;
  c.key = key;
  c.card = static_cast<std::uint32_t>(values.size());
  if (c.card == 0) return c;
  c.kind = best_kind(c.card, count_runs_sorted(values));
  if (c.kind == Kind::Array) {
    c.values = std::move(values);
  } else if (c.kind == Kind::Run) {
    c.values = runs_from_sorted(values);
  } else {
    c.bits.assign(kWords, 0);
    for (auto v : values) set_bit(c.bits, v);
  }
  return c;
}

Chunk chunk_from_bits(std::uint16_t key, std::vector<std::uint64_t> bits) {
  Chunk c;
  c.key = key;
  for (auto w : bits) c.card += static_cast<std::uint32_t>(std::popcount(w));
  if (c.card == 0) return c;
  c.kind = best_kind(c.card, count_runs_bits(bits));
  if (c.kind == Kind::Bitmap) {
    c.bits = std::move(bits);
  } else if (c.kind == Kind::Run) {
    c.values = runs_from_bits(bits);
  } else {
    c.values.reserve(c.card);
    for (std::size_t w = 0; w < kWords; ++w) {
      std::uint64_t word = bits[w];
      while (word != 0) {
        c.values.push_back(static_cast<std::uint16_t>(w * 64 + static_cast<std::size_t>(std::countr_zero(word))));
        word &= word - 1;
      }
    }
  }
  return c;
}

bool chunk_contains(const Chunk& c, std::uint16_t v) {
  switch (c.kind) {
    case Kind::Array:
      return std::binary_search(c.values.begin(), c.values.end(), v);
    case Kind::Bitmap:
      return (c.bits[v >> 6] >> (v & 63)) & 1;
    case Kind::Run: {
      // Binary search over run starts.
      std::size_t lo = 0, hi = c.values.size() / 2;
      while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (c.values[2 * mid] <= v) lo = mid + 1; else hi = mid;
      }
      if (lo == 0) return false;
      const std::uint32_t start = c.values[2 * (lo - 1)];
      return v <= start + c.values[2 * (lo - 1) + 1];
    }
  }
  return false;
}

template <typename Keep>
Chunk filter_array(const Chunk& a, Keep keep) {
  std::vector<std::uint16_t> out;
  out.reserve(a.values.size());
  for (auto v : a.values) {
    if (keep(v)) out.push_back(v);
  }
  return chunk_from_sorted(a.key, std::move(out));
}

void push_nonempty(std::vector<Chunk>& out, Chunk&& c) {
  if (c.card > 0) out.push_back(std::move(c));
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> b) : b_(b) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > b_.size()) fail(ErrorCode::Format, "id set blob is truncated");
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(b_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }
  std::size_t pos() const { return pos_; }
  std::size_t size() const { return b_.size(); }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace

CompressedIdSet CompressedIdSet::from_sorted(std::span<const std::uint32_t> ids) {
  CompressedIdSet s;
  std::size_t i = 0;
  while (i < ids.size()) {
    const auto key = static_cast<std::uint16_t>(ids[i] >> 16);
    std::vector<std::uint16_t> values;
    while (i < ids.size() && (ids[i] >> 16) == key) {
      if (!values.empty() && static_cast<std::uint16_t>(ids[i]) <= values.back()) {
        fail(ErrorCode::InvalidArgument, "from_sorted requires strictly increasing ids");
      }
      values.push_back(static_cast<std::uint16_t>(ids[i]));
      ++i;
    }
    if (i < ids.size() && (ids[i] >> 16) < key) fail(ErrorCode::InvalidArgument, "from_sorted requires strictly increasing ids");
    push_nonempty(s.chunks_, chunk_from_sorted(key, std::move(values)));
  }
  return s;
}

CompressedIdSet CompressedIdSet::from_unsorted(std::vector<std::uint32_t> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return from_sorted(ids);
}

CompressedIdSet CompressedIdSet::range(std::uint32_t lo, std::uint64_t hi) {
  CompressedIdSet s;
  hi = std::min<std::uint64_t>(hi, std::uint64_t{1} << 32);
  std::uint64_t v = lo;
  while (v < hi) {
    const auto key = static_cast<std::uint16_t>(v >> 16);
    const std::uint64_t chunk_end = std::min<std::uint64_t>(hi, (static_cast<std::uint64_t>(key) + 1) << 16);
    Chunk c;
    c.key = key;
    c.card = static_cast<std::uint32_t>(chunk_end - v);
    const auto start = static_cast<std::uint16_t>(v & 0xFFFF);
    std::vector<std::uint16_t> run = {start, static_cast<std::uint16_t>(c.card - 1)};
    c.kind = best_kind(c.card, 1);
    if (c.kind == Kind::Run) {
      c.values = std::move(run);
    } else {
      for (std::uint32_t x = 0; x < c.card; ++x) c.values.push_back(static_cast<std::uint16_t>(start + x));
    }
    s.chunks_.push_back(std::move(c));
    v = chunk_end;
  }
  return s;
}

std::uint64_t CompressedIdSet::cardinality() const {
  std::uint64_t n = 0;
  for (const auto& c : chunks_) n += c.card;
  return n;
}

bool CompressedIdSet::contains(std::uint32_t id) const {
  const auto key = static_cast<std::uint16_t>(id >> 16);
  auto it = std::lower_bound(chunks_.begin(), chunks_.end(), key, [](const Chunk& c, std::uint16_t k) { return c.key < k; });
  return it != chunks_.end() && it->key == key && chunk_contains(*it, static_cast<std::uint16_t>(id));
}

std::vector<std::uint32_t> CompressedIdSet::to_vector() const {
  std::vector<std::uint32_t> out;
  out.reserve(cardinality());
  for_each([&](std::uint32_t v) { out.push_back(v); });
  return out;
}

CompressedIdSet set_union(const CompressedIdSet& a, const CompressedIdSet& b) {
  CompressedIdSet out;
  std::size_t i = 0, j = 0;
  while (i < a.chunks_.size() || j < b.chunks_.size()) {
    if (j == b.chunks_.size() || (i < a.chunks_.size() && a.chunks_[i].key < b.chunks_[j].key)) {
      out.chunks_.push_back(a.chunks_[i++]);
    } else if (i == a.chunks_.size() || b.chunks_[j].key < a.chunks_[i].key) {
      out.chunks_.push_back(b.chunks_[j++]);
    } else {
      const auto& x = a.chunks_[i++];
      const auto& y = b.chunks_[j++];
      if (x.kind == Kind::Array && y.kind == Kind::Array) {
        std::vector<std::uint16_t> merged;
        merged.reserve(x.values.size() + y.values.size());
        std::set_union(x.values.begin(), x.values.end(), y.values.begin(), y.values.end(), std::back_inserter(merged));
        push_nonempty(out.chunks_, chunk_from_sorted(x.key, std::move(merged)));
      } else {
        auto bits = to_bits(x);
        const auto other = to_bits(y);
        for (std::size_t w = 0; w < kWords; ++w) bits[w] |= other[w];
        push_nonempty(out.chunks_, chunk_from_bits(x.key, std::move(bits)));
      }
    }
  }
  return out;
}

CompressedIdSet set_intersect(const CompressedIdSet& a, const CompressedIdSet& b) {
  CompressedIdSet out;
  std::size_t i = 0, j = 0;
  while (i < a.chunks_.size() && j < b.chunks_.size()) {
    const auto& x = a.chunks_[i];
    const auto& y = b.chunks_[j];
    if (x.key < y.key) {
      ++i;
    } else if (y.key < x.key) {
      ++j;
    } else {
      if (x.kind == Kind::Array && y.kind == Kind::Array) {
        std::vector<std::uint16_t> both;
        std::set_intersection(x.values.begin(), x.values.end(), y.values.begin(), y.values.end(), std::back_inserter(both));
        push_nonempty(out.chunks_, chunk_from_sorted(x.key, std::move(both)));
      } else if (x.kind == Kind::Array) {
        push_nonempty(out.chunks_, filter_array(x, [&](std::uint16_t v) { return chunk_contains(y, v); }));
      } else if (y.kind == Kind::Array) {
        push_nonempty(out.chunks_, filter_array(y, [&](std::uint16_t v) { return chunk_contains(x, v); }));
      } else {
        auto bits = to_bits(x);
        const auto other = to_bits(y);
        for (std::size_t w = 0; w < kWords; ++w) bits[w] &= other[w];
        push_nonempty(out.chunks_, chunk_from_bits(x.key, std::move(bits)));
      }
      ++i;
      ++j;
    }
  }
  return out;
}

CompressedIdSet set_difference(const CompressedIdSet& a, const CompressedIdSet& b) {
  CompressedIdSet out;
  std::size_t j = 0;
  for (const auto& x : a.chunks_) {
    while (j < b.chunks_.size() && b.chunks_[j].key < x.key) ++j;
    if (j == b.chunks_.size() || b.chunks_[j].key != x.key) {
      out.chunks_.push_back(x);
      continue;
    }
    const auto& y = b.chunks_[j];
    if (x.kind == Kind::Array) {
      push_nonempty(out.chunks_, filter_array(x, [&](std::uint16_t v) { return !chunk_contains(y, v); }));
    } else {
      auto bits = to_bits(x);
      const auto other = to_bits(y);
      for (std::size_t w = 0; w < kWords; ++w) bits[w] &= ~other[w];
      push_nonempty(out.chunks_, chunk_from_bits(x.key, std::move(bits)));
    }
  }
  return out;
}

CompressedIdSet union_all(std::span<const CompressedIdSet* const> sets) {
  std::vector<const Chunk*> all;
  for (const auto* s : sets) {
    for (const auto& c : s->chunks_) all.push_back(&c);
  }
  std::stable_sort(all.begin(), all.end(), [](const Chunk* x, const Chunk* y) { return x->key < y->key; });
  CompressedIdSet out;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    bool arrays = true;
    std::size_t total = 0;
    while (j < all.size() && all[j]->key == all[i]->key) {
      arrays = arrays && all[j]->kind == Kind::Array;
      total += all[j]->card;
      ++j;
    }
    const auto key = all[i]->key;
    if (j - i == 1) {
      out.chunks_.push_back(*all[i]);
    } else if (arrays && total <= kArrayMax) {
      std::vector<std::uint16_t> values;
      values.reserve(total);
      for (std::size_t k = i; k < j; ++k) values.insert(values.end(), all[k]->values.begin(), all[k]->values.end());
      std::sort(values.begin(), values.end());
      values.erase(std::unique(values.begin(), values.end()), values.end());
      push_nonempty(out.chunks_, chunk_from_sorted(key, std::move(values)));
    } else {
      std::vector<std::uint64_t> bits(kWords, 0);
      for (std::size_t k = i; k < j; ++k) {
        const Chunk& c = *all[k];
        if (c.kind == Kind::Array) {
          for (auto v : c.values) set_bit(bits, v);
        } else {
          const auto other = to_bits(c);
          for (std::size_t w = 0; w < kWords; ++w) bits[w] |= other[w];
        }
      }
      push_nonempty(out.chunks_, chunk_from_bits(key, std::move(bits)));
    }
    i = j;
  }
  return out;
}

std::vector<std::uint8_t> CompressedIdSet::serialize() const {
  const std::size_t n = chunks_.size();
  const bool has_runs = std::any_of(chunks_.begin(), chunks_.end(), [](const Chunk& c) { return c.kind == Kind::Run; });
  std::vector<std::uint8_t> out;
  if (has_runs) {
    put_le<std::uint32_t>(out, kCookieRuns | (static_cast<std::uint32_t>(n - 1) << 16));
    std::vector<std::uint8_t> flags((n + 7) / 8, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (chunks_[i].kind == Kind::Run) flags[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    }
    out.insert(out.end(), flags.begin(), flags.end());
  } else {
    put_le<std::uint32_t>(out, kCookieNoRuns);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(n));
  }
  for (const auto& c : chunks_) {
    put_le<std::uint16_t>(out, c.key);
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(c.card - 1));
  }
  auto payload_size = [](const Chunk& c) -> std::size_t {
    switch (c.kind) {
      case Kind::Array: return 2 * c.values.size();
      case Kind::Bitmap: return 8 * kWords;
      case Kind::Run: return 2 + 2 * c.values.size();
    }
    return 0;
  };
  if (!has_runs || n >= kNoOffsetThreshold) {
    std::size_t offset = out.size() + 4 * n;
    for (const auto& c : chunks_) {
      put_le<std::uint32_t>(out, static_cast<std::uint32_t>(offset));
      offset += payload_size(c);
    }
  }
  for (const auto& c : chunks_) {
    switch (c.kind) {
      case Kind::Array:
        for (auto v : c.values) put_le<std::uint16_t>(out, v);
        break;
      case Kind::Bitmap:
        for (auto w : c.bits) put_le<std::uint64_t>(out, w);
        break;
      case Kind::Run:
        put_le<std::uint16_t>(out, static_cast<std::uint16_t>(c.values.size() / 2));
        for (auto v : c.values) put_le<std::uint16_t>(out, v);
        break;
    }
  }
  return out;
}

CompressedIdSet CompressedIdSet::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const auto cookie = r.get<std::uint32_t>();
  std::size_t n = 0;
  std::vector<bool> is_run;
  bool has_runs = false;
  if ((cookie & 0xFFFF) == kCookieRuns) {
    has_runs = true;
    n = (cookie >> 16) + 1;
    is_run.resize(n);
    for (std::size_t b = 0; b < (n + 7) / 8; ++b) {
      const auto flags = r.get<std::uint8_t>();
      for (std::size_t i = 0; i < 8 && b * 8 + i < n; ++i) is_run[b * 8 + i] = (flags >> i) & 1;
    }
  } else if (cookie == kCookieNoRuns) {
    n = r.get<std::uint32_t>();
    if (n > 65536) fail(ErrorCode::Format, "id set declares too many containers");
    is_run.assign(n, false);
  } else {
    fail(ErrorCode::Format, "id set blob has an unknown cookie");
  }
  std::vector<std::uint16_t> keys(n);
  std::vector<std::uint32_t> cards(n);
  for (std::size_t i = 0; i < n; ++i) {
    keys[i] = r.get<std::uint16_t>();
    cards[i] = static_cast<std::uint32_t>(r.get<std::uint16_t>()) + 1;
    if (i > 0 && keys[i] <= keys[i - 1]) fail(ErrorCode::Format, "id set container keys are not increasing");
  }
  if (!has_runs || n >= kNoOffsetThreshold) {
    for (std::size_t i = 0; i < n; ++i) (void)r.get<std::uint32_t>();
  }

  CompressedIdSet s;
  for (std::size_t i = 0; i < n; ++i) {
    Chunk c;
    c.key = keys[i];
    if (is_run[i]) {
      const auto nruns = r.get<std::uint16_t>();
      std::uint64_t card = 0;
      std::int64_t prev_end = -1;
      std::vector<std::uint64_t> bits(kWords, 0);
      for (std::size_t k = 0; k < nruns; ++k) {
        const auto start = r.get<std::uint16_t>();
        const auto len = r.get<std::uint16_t>();
        if (static_cast<std::int64_t>(start) <= prev_end || static_cast<std::uint32_t>(start) + len > 65535) {
          fail(ErrorCode::Format, "id set run container is malformed");
        }
        prev_end = static_cast<std::int64_t>(start) + len;
        card += static_cast<std::uint64_t>(len) + 1;
        for (std::uint32_t v = start; v <= static_cast<std::uint32_t>(start) + len; ++v) set_bit(bits, v);
      }
      if (card != cards[i]) fail(ErrorCode::Format, "id set run container cardinality mismatch");
      c = chunk_from_bits(keys[i], std::move(bits));
    } else if (cards[i] > kArrayMax) {
      std::vector<std::uint64_t> bits(kWords);
      for (auto& w : bits) w = r.get<std::uint64_t>();
      c = chunk_from_bits(keys[i], std::move(bits));
      if (c.card != cards[i]) fail(ErrorCode::Format, "id set bitmap container cardinality mismatch");
    } else {
      std::vector<std::uint16_t> values(cards[i]);
      for (std::size_t k = 0; k < values.size(); ++k) {
        values[k] = r.get<std::uint16_t>();
        if (k > 0 && values[k] <= values[k - 1]) fail(ErrorCode::Format, "id set array container is not sorted");
      }
      c = chunk_from_sorted(keys[i], std::move(values));
    }
    s.chunks_.push_back(std::move(c));
  }
  if (r.pos() != r.size()) fail(ErrorCode::Format, "trailing bytes after id set");
  return s;
}

}  // namespace cartomap
