#pragma once

// Binary vector file:
//   header  : magic "EBRV" | version u32 | dim u32 | count u64
//   records : id_len u16 | id bytes (UTF-8) | dim x f32
// All integers and floats little-endian.
//
// Binary matrix file (model weights):
//   header  : magic "EBRM" | version u32 | count u32
//   records : name_len u16 | name bytes | rows u32 | cols u32 | rows*cols x f32 (row-major)

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ebr/vector_core.hpp"

namespace ebr {

inline constexpr std::uint32_t kVectorFileVersion = 1;
inline constexpr std::uint32_t kMatrixFileVersion = 1;

void write_vector_file(const std::filesystem::path& path, const VectorStore& store);

// Validates magic, version, dimension, and each vector's norm (|norm - 1| <= 1e-5).
// Throws CorruptFile or IoError.
VectorStore read_vector_file(const std::filesystem::path& path,
                             OnDuplicate policy = OnDuplicate::Reject);

// Appends one record, creating the file with the given dim if missing, and
// rewrites the header count. Throws DimensionMismatch if the file's dim differs.
void append_vector_record(const std::filesystem::path& path, std::size_t dim,
                          const std::string& id, const EmbeddingVector& v);

struct NamedMatrix {
  std::string name;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<float> values;
};

void write_matrix_file(const std::filesystem::path& path, const std::vector<NamedMatrix>& mats);
std::vector<NamedMatrix> read_matrix_file(const std::filesystem::path& path);

}  // namespace ebr
