#include "tcgu/graphdata/binary.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "tcgu/graphdata/hash.hpp"

namespace tcgu {
namespace {

constexpr char kMagic[4] = {'T', 'C', 'G', 'U'};

[[noreturn]] void fail(const std::string& context, std::size_t offset, const std::string& what) {
  throw CheckpointError(context + ": " + what + " at byte " + std::to_string(offset));
}

}  // namespace

void BinaryWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void BinaryWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void BinaryWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::str(std::string_view s) {
  u64(s.size());
  buf_.insert(buf_.end(), s.begin(), s.end());
}

void BinaryWriter::tensor(const Tensor& t) {
  u64(t.rows());
  u64(t.cols());
  for (double v : t.data()) f64(v);
}

void BinaryWriter::ints(std::span<const int> v) {
  u64(v.size());
  for (int x : v) i32(x);
}

void BinaryWriter::u32s(std::span<const std::uint32_t> v) {
  u64(v.size());
  for (auto x : v) u32(x);
}

void BinaryWriter::bytes(std::span<const std::uint8_t> v) {
  u64(v.size());
  buf_.insert(buf_.end(), v.begin(), v.end());
}

std::span<const std::uint8_t> BinaryReader::take(std::size_t n, std::string_view field) {
  if (n > data_.size() - pos_) {
    fail(context_, pos_, "truncated while reading " + std::string(field) + " (need " + std::to_string(n) +
                             " bytes, " + std::to_string(data_.size() - pos_) + " left)");
  }
  auto s = data_.subspan(pos_, n);
  pos_ += n;
  return s;
}

std::uint64_t BinaryReader::count(std::string_view field, std::size_t elem_size) {
  const std::uint64_t n = u64(field);
  if (n > (data_.size() - pos_) / elem_size) {
    fail(context_, pos_, "truncated: length " + std::to_string(n) + " of " + std::string(field) + " exceeds the remaining data");
  }
  return n;
}

std::uint8_t BinaryReader::u8(std::string_view field) { return take(1, field)[0]; }

std::uint32_t BinaryReader::u32(std::string_view field) {
  auto b = take(4, field);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

std::uint64_t BinaryReader::u64(std::string_view field) {
  auto b = take(8, field);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

double BinaryReader::f64(std::string_view field) { return std::bit_cast<double>(u64(field)); }

std::string BinaryReader::str(std::string_view field) {
  const auto n = count(field, 1);
  auto b = take(n, field);
  return {b.begin(), b.end()};
}

Tensor BinaryReader::tensor(std::string_view field) {
  const std::uint64_t r = u64(field);
  const std::uint64_t c = u64(field);
  if (r != 0 && c > std::numeric_limits<std::uint64_t>::max() / r) fail(context_, pos_, "tensor shape overflow");
  if (r * c > (data_.size() - pos_) / 8) {
    fail(context_, pos_, "truncated while reading " + std::string(field) + " (" + std::to_string(r) + "x" +
                             std::to_string(c) + " tensor)");
  }
  Tensor t(r, c);
  for (double& v : t.data()) v = f64(field);
  return t;
}

std::vector<int> BinaryReader::ints(std::string_view field) {
  std::vector<int> v(count(field, 4));
  for (int& x : v) x = i32(field);
  return v;
}

std::vector<std::uint32_t> BinaryReader::u32s(std::string_view field) {
  std::vector<std::uint32_t> v(count(field, 4));
  for (auto& x : v) x = u32(field);
  return v;
}

std::vector<std::uint8_t> BinaryReader::bytes(std::string_view field) {
  const auto n = count(field, 1);
  auto b = take(n, field);
  return {b.begin(), b.end()};
}

void BinaryReader::expect_done() const {
  if (!done()) fail(context_, pos_, std::to_string(data_.size() - pos_) + " unexpected trailing bytes");
}

std::vector<std::uint8_t> encode_container(std::span<const Section> sections) {
  BinaryWriter w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(sections.size()));
  for (const Section& s : sections) {
    if (s.tag.size() != 4) throw std::invalid_argument("section tag must have four characters");
    for (char c : s.tag) w.u8(static_cast<std::uint8_t>(c));
    w.bytes(s.payload);
  }
  const auto& body = w.buffer();
  w.u64(Fnv1a().bytes(body.data(), body.size()).value());
  return w.take();
}

std::vector<Section> decode_container(std::span<const std::uint8_t> bytes) {
  BinaryReader r(bytes, "checkpoint");
  for (char c : kMagic) {
    if (r.u8("magic") != static_cast<std::uint8_t>(c)) fail("checkpoint", 0, "bad magic (not a TCGU file)");
  }
  const std::uint32_t version = r.u32("format version");
  if (version != kCheckpointVersion) {
    fail("checkpoint", 4, "format version " + std::to_string(version) + " is not supported (expected " +
                              std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint32_t n = r.u32("section count");
  std::vector<Section> out;
  for (std::uint32_t i = 0; i < n; ++i) {
    Section s;
    for (int k = 0; k < 4; ++k) s.tag.push_back(static_cast<char>(r.u8("section tag")));
    s.payload = r.bytes("section " + s.tag);
    out.push_back(std::move(s));
  }
  const std::size_t body = r.offset();
  const std::uint64_t stored = r.u64("checksum");
  r.expect_done();
  if (stored != Fnv1a().bytes(bytes.data(), body).value()) fail("checkpoint", body, "checksum mismatch");
  return out;
}

void write_container(const std::filesystem::path& path, std::span<const Section> sections) {
  const auto bytes = encode_container(sections);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

std::vector<Section> read_container(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return decode_container(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

const Section* find_section(std::span<const Section> sections, std::string_view tag) {
  for (const Section& s : sections) {
    if (s.tag == tag) return &s;
  }
  return nullptr;
}

Section encode_graph(const AttributedGraph& g) {
  BinaryWriter w;
  const CsrMatrix& a = *g.adjacency;
  w.u64(g.num_nodes());
  w.u64(a.nnz());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t p = a.row_ptr()[r]; p < a.row_ptr()[r + 1]; ++p) {
      w.u32(static_cast<std::uint32_t>(r));
      w.u32(a.col_idx()[p]);
      w.f64(a.values()[p]);
    }
  }
  w.tensor(g.features);
  w.ints(g.labels);
  w.i32(g.num_classes);
  w.bytes(g.train);
  w.bytes(g.val);
  w.bytes(g.test);
  w.u32s(g.original_ids);
  w.u64(g.lineage);
  return {std::string(kGraphTag), w.take()};
}

AttributedGraph decode_graph(const Section& s) {
  BinaryReader r(s.payload, "graph section");
  AttributedGraph g;
  const std::uint64_t n = r.u64("node count");
  const std::uint64_t nnz = r.u64("nnz");
  if (nnz > s.payload.size() / 16) fail("graph section", r.offset(), "nnz exceeds section size");
  std::vector<Triplet> t(nnz);
  for (auto& e : t) {
    e.row = r.u32("edge row");
    e.col = r.u32("edge col");
    e.value = r.f64("edge weight");
    if (e.row >= n || e.col >= n) fail("graph section", r.offset(), "edge endpoint out of range");
  }
  g.adjacency = std::make_shared<const CsrMatrix>(CsrMatrix::from_triplets(n, n, std::move(t)));
  g.features = r.tensor("features");
  g.labels = r.ints("labels");
  g.num_classes = r.i32("class count");
  g.train = r.bytes("train mask");
  g.val = r.bytes("val mask");
  g.test = r.bytes("test mask");
  g.original_ids = r.u32s("original ids");
  g.lineage = r.u64("lineage");
  r.expect_done();
  try {
    g.validate();
  } catch (const ValidationError& e) {
    throw CheckpointError(std::string("graph section: ") + e.what());
  }
  return g;
}

void save_graph(const AttributedGraph& g, const std::filesystem::path& path) {
  const Section s = encode_graph(g);
  write_container(path, std::span<const Section>(&s, 1));
}

AttributedGraph load_graph_binary(const std::filesystem::path& path) {
  const auto sections = read_container(path);
  const Section* s = find_section(sections, kGraphTag);
  if (!s) throw CheckpointError(path.string() + ": no graph section");
  return decode_graph(*s);
}

}  // namespace tcgu
