#include "ebr/vector_io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "ebr/errors.hpp"

namespace ebr {

namespace {

constexpr std::array<char, 4> kVectorMagic{'E', 'B', 'R', 'V'};
constexpr std::array<char, 4> kMatrixMagic{'E', 'B', 'R', 'M'};
constexpr std::streamoff kVectorCountOffset = 12;

template <typename U>
void put_le(std::ostream& out, U value) {
  std::array<char, sizeof(U)> bytes{};
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  }
  out.write(bytes.data(), bytes.size());
}

void put_f32(std::ostream& out, float f) { put_le(out, std::bit_cast<std::uint32_t>(f)); }

template <typename U>
U get_le(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(U)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw Error(Errc::CorruptFile, std::string("truncated while reading ") + what);
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

float get_f32(std::istream& in) { return std::bit_cast<float>(get_le<std::uint32_t>(in, "f32")); }

void check_magic(std::istream& in, const std::array<char, 4>& magic) {
  std::array<char, 4> got{};
  in.read(got.data(), got.size());
  if (!in || got != magic) throw Error(Errc::CorruptFile, "bad magic");
}

void put_string16(std::ostream& out, const std::string& s) {
  if (s.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw Error(Errc::InvalidArgument, "id longer than 65535 bytes");
  }
  put_le(out, static_cast<std::uint16_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string16(std::istream& in) {
  const auto len = get_le<std::uint16_t>(in, "string length");
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw Error(Errc::CorruptFile, "truncated string");
  return s;
}

void put_vector_record(std::ostream& out, const std::string& id, std::span<const float> values) {
  put_string16(out, id);
  for (const float f : values) put_f32(out, f);
}

}  // namespace

void write_vector_file(const std::filesystem::path& path, const VectorStore& store) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string());
  out.write(kVectorMagic.data(), kVectorMagic.size());
  put_le(out, kVectorFileVersion);
  put_le(out, static_cast<std::uint32_t>(store.dim()));
  put_le(out, static_cast<std::uint64_t>(store.size()));
  for (std::size_t r = 0; r < store.size(); ++r) put_vector_record(out, store.id_at(r), store.row(r));
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

VectorStore read_vector_file(const std::filesystem::path& path, OnDuplicate policy) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  check_magic(in, kVectorMagic);
  const auto version = get_le<std::uint32_t>(in, "version");
  if (version != kVectorFileVersion) {
    throw Error(Errc::CorruptFile, "unsupported version " + std::to_string(version));
  }
  const auto dim = get_le<std::uint32_t>(in, "dim");
  if (dim == 0) throw Error(Errc::CorruptFile, "zero dimension");
  const auto count = get_le<std::uint64_t>(in, "count");
  VectorStore store(dim);
  std::vector<float> values(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string id = get_string16(in);
    for (auto& v : values) v = get_f32(in);
    store.insert(id, EmbeddingVector::from_unit(values, 1e-5), policy);
  }
  return store;
}

void append_vector_record(const std::filesystem::path& path, std::size_t dim,
                          const std::string& id, const EmbeddingVector& v) {
  if (v.dim() != dim) throw Error(Errc::DimensionMismatch, "record dim differs from file dim");
  if (!std::filesystem::exists(path)) {
    write_vector_file(path, VectorStore(dim));
  }
  std::fstream io(path, std::ios::binary | std::ios::in | std::ios::out);
  if (!io) throw Error(Errc::IoError, "cannot open " + path.string());
  check_magic(io, kVectorMagic);
  get_le<std::uint32_t>(io, "version");
  const auto file_dim = get_le<std::uint32_t>(io, "dim");
  if (file_dim != dim) throw Error(Errc::DimensionMismatch, "vector file dim differs");
  const auto count = get_le<std::uint64_t>(io, "count");
  io.seekp(0, std::ios::end);
  put_vector_record(io, id, v.values());
  io.flush();
  io.seekp(kVectorCountOffset, std::ios::beg);
  put_le(io, count + 1);
  io.flush();
  if (!io) throw Error(Errc::IoError, "append failed for " + path.string());
}

void write_matrix_file(const std::filesystem::path& path, const std::vector<NamedMatrix>& mats) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string());
  out.write(kMatrixMagic.data(), kMatrixMagic.size());
  put_le(out, kMatrixFileVersion);
  put_le(out, static_cast<std::uint32_t>(mats.size()));
  for (const auto& m : mats) {
    if (m.values.size() != static_cast<std::size_t>(m.rows) * m.cols) {
      throw Error(Errc::InvalidArgument, "matrix " + m.name + " shape mismatch");
    }
    put_string16(out, m.name);
    put_le(out, m.rows);
    put_le(out, m.cols);
    for (const float f : m.values) put_f32(out, f);
  }
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

std::vector<NamedMatrix> read_matrix_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  check_magic(in, kMatrixMagic);
  const auto version = get_le<std::uint32_t>(in, "version");
  if (version != kMatrixFileVersion) throw Error(Errc::CorruptFile, "unsupported matrix version");
  const auto count = get_le<std::uint32_t>(in, "count");
  std::vector<NamedMatrix> mats(count);
  for (auto& m : mats) {
    m.name = get_string16(in);
    m.rows = get_le<std::uint32_t>(in, "rows");
    m.cols = get_le<std::uint32_t>(in, "cols");
    m.values.resize(static_cast<std::size_t>(m.rows) * m.cols);
    for (auto& v : m.values) {
      v = get_f32(in);
      if (!std::isfinite(v)) throw Error(Errc::CorruptFile, "non-finite weight in " + m.name);
    }
  }
  return mats;
}

}  // namespace ebr
