#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gzsl/dense_matrix.hpp"

namespace gzsl::dataio {

using Json = nlohmann::ordered_json;

// Headerless little-endian row-major tensor files (.f32 / .u32).
void write_f32(const std::filesystem::path& path, std::span<const float> values);
void write_u32(const std::filesystem::path& path, std::span<const std::uint32_t> values);
std::vector<float> read_f32(const std::filesystem::path& path, std::size_t expected_count);
std::vector<std::uint32_t> read_u32(const std::filesystem::path& path, std::size_t expected_count);

std::uint32_t crc32_of_file(const std::filesystem::path& path);
std::string format_crc32(std::uint32_t crc);

// Throws kFormat when `j` is not an object or has a key outside `known`.
void require_known_keys(const Json& j, std::initializer_list<std::string_view> known,
                        std::string_view where);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& doc);
void write_text(const std::filesystem::path& path, const std::string& text);

// Ensures `dir` exists and is writable; throws kIo otherwise.
void prepare_directory(const std::filesystem::path& dir);

// A named f32 tensor entry as stored in a manifest's "tensors" list.
Json tensor_entry(const std::string& name, const std::string& file, const std::string& dtype,
                  std::vector<std::size_t> shape);
const Json& find_tensor(const Json& manifest, const std::string& name);
std::vector<std::size_t> tensor_shape(const Json& entry);

void save_matrix(const std::filesystem::path& dir, const std::string& name,
                 const numerics::DenseMatrix& m, Json& tensors);
numerics::DenseMatrix load_matrix(const std::filesystem::path& dir, const Json& manifest,
                                  const std::string& name);

}  // namespace gzsl::dataio
