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

#include "common.hpp"

#include <algorithm>
#include <sstream>

namespace cartomap {

std::string_view type_name(EntityType t) {
  switch (t) {
    case EntityType::Article: return "article";
    case EntityType::Word: return "word";
    case EntityType::Author: return "author";
    case EntityType::Lab: return "lab";
  }
  return "unknown";
}

std::string layer_name(EntityType t) { return std::string(type_name(t)) + "s"; }

std::optional<EntityType> parse_entity_type(std::string_view name) {
  for (EntityType t : kAllEntityTypes) {
    if (name == type_name(t) || name == layer_name(t)) return t;
  }
  return std::nullopt;
}

BinaryWriter::BinaryWriter(const std::filesystem::path& path)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
  if (!out_) fail(ErrorCode::NotFound, "cannot open for writing: " + path.string());
}

void BinaryWriter::bytes(const void* data, std::size_t n) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out_) fail(ErrorCode::Internal, "write failed: " + path_.string());
}

void BinaryWriter::close() {
  out_.close();
  if (!out_) fail(ErrorCode::Internal, "close failed: " + path_.string());
}

BinaryReader::BinaryReader(const std::filesystem::path& path)
    : in_(path, std::ios::binary), path_(path) {
  if (!in_) fail(ErrorCode::NotFound, "cannot open: " + path.string());
}

void BinaryReader::bytes(void* data, std::size_t n) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n) {
    fail(ErrorCode::Format, "unexpected end of file: " + path_.string());
  }
}

void BinaryReader::expect_magic(std::string_view m) {
  std::string got(m.size(), '\0');
  bytes(got.data(), got.size());
  if (got != m) {
    fail(ErrorCode::Format, "bad magic in " + path_.string() + " (expected " + std::string(m) + ")");
  }
}

bool BinaryReader::at_end() { return in_.peek() == std::char_traits<char>::eof(); }

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::NotFound, "cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::NotFound, "cannot open for writing: " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) fail(ErrorCode::Internal, "write failed: " + path.string());
}

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::NotFound, "cannot open: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_binary_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::NotFound, "cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) fail(ErrorCode::Internal, "write failed: " + path.string());
}

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string trim(std::string_view s) {
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace cartomap
