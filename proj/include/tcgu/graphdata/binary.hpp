#pragma once
// TCGU checkpoint container: little-endian, magic "TCGU", u32 format
// version, u32 section count, then sections of (4-byte tag, u64 length,
// payload), then a u64 FNV-1a checksum of everything before it.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tcgu/graphdata/graph.hpp"
#include "tcgu/numerics/tensor.hpp"

namespace tcgu {

/// Corrupt, truncated or incompatible checkpoint data.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

class BinaryWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v);
  void str(std::string_view s);
  void tensor(const Tensor& t);
  void ints(std::span<const int> v);
  void u32s(std::span<const std::uint32_t> v);
  void bytes(std::span<const std::uint8_t> v);
  const std::vector<std::uint8_t>& buffer() const noexcept { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

/// Bounds-checked reader; failures name the field and byte offset.
class BinaryReader {
 public:
  BinaryReader(std::span<const std::uint8_t> data, std::string context)
      : data_(data), context_(std::move(context)) {}
  std::uint8_t u8(std::string_view field);
  std::uint32_t u32(std::string_view field);
  std::uint64_t u64(std::string_view field);
  std::int32_t i32(std::string_view field) { return static_cast<std::int32_t>(u32(field)); }
  double f64(std::string_view field);
  std::string str(std::string_view field);
  Tensor tensor(std::string_view field);
  std::vector<int> ints(std::string_view field);
  std::vector<std::uint32_t> u32s(std::string_view field);
  std::vector<std::uint8_t> bytes(std::string_view field);
  std::size_t offset() const noexcept { return pos_; }
  bool done() const noexcept { return pos_ == data_.size(); }
  /// Throws unless every byte was consumed.
  void expect_done() const;

 private:
  std::span<const std::uint8_t> take(std::size_t n, std::string_view field);
  std::uint64_t count(std::string_view field, std::size_t elem_size);
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::string context_;
};

struct Section {
  std::string tag;  // exactly four characters
  std::vector<std::uint8_t> payload;
};

std::vector<std::uint8_t> encode_container(std::span<const Section> sections);
std::vector<Section> decode_container(std::span<const std::uint8_t> bytes);

void write_container(const std::filesystem::path& path, std::span<const Section> sections);
std::vector<Section> read_container(const std::filesystem::path& path);

/// First section with the tag, or nullptr.
const Section* find_section(std::span<const Section> sections, std::string_view tag);

inline constexpr std::string_view kGraphTag = "GRPH";

Section encode_graph(const AttributedGraph& g);
AttributedGraph decode_graph(const Section& s);

void save_graph(const AttributedGraph& g, const std::filesystem::path& path);
AttributedGraph load_graph_binary(const std::filesystem::path& path);

}  // namespace tcgu
