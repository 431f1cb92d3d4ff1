#include "gzsl/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include "gzsl/error.hpp"

namespace gzsl::dataio {

namespace fs = std::filesystem;

namespace {

static_assert(sizeof(float) == 4 && sizeof(std::uint32_t) == 4);

[[maybe_unused]] std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xFF00u) | ((v << 8) & 0xFF0000u) | (v << 24);
}

template <typename T>
void write_raw(const fs::path& path, std::span<const T> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * 4));
  } else {
    for (T v : values) {
      auto bits = byteswap32(std::bit_cast<std::uint32_t>(v));
      out.write(reinterpret_cast<const char*>(&bits), 4);
    }
  }
  if (!out) fail(ErrorCode::kIo, "write to '" + path.string() + "' failed");
}

template <typename T>
std::vector<T> read_raw(const fs::path& path, std::size_t expected_count) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) fail(ErrorCode::kIo, "missing file '" + path.string() + "'");
  const auto bytes = fs::file_size(path, ec);
  if (ec) fail(ErrorCode::kIo, "cannot stat '" + path.string() + "'");
  if (bytes != expected_count * 4) {
    fail(ErrorCode::kFormat, "'" + path.filename().string() + "' holds " + std::to_string(bytes) +
                                 " bytes, manifest shape needs " +
                                 std::to_string(expected_count * 4));
  }
  std::vector<T> values(expected_count);
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(bytes));
  if (!in) fail(ErrorCode::kIo, "short read from '" + path.string() + "'");
  if constexpr (std::endian::native != std::endian::little) {
    for (auto& v : values) v = std::bit_cast<T>(byteswap32(std::bit_cast<std::uint32_t>(v)));
  }
  return values;
}

}  // namespace

void write_f32(const fs::path& path, std::span<const float> values) { write_raw(path, values); }

void write_u32(const fs::path& path, std::span<const std::uint32_t> values) {
  write_raw(path, values);
}

std::vector<float> read_f32(const fs::path& path, std::size_t expected_count) {
  return read_raw<float>(path, expected_count);
}

std::vector<std::uint32_t> read_u32(const fs::path& path, std::size_t expected_count) {
  return read_raw<std::uint32_t>(path, expected_count);
}

std::uint32_t crc32_of_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto got = in.gcount();
    if (got > 0) crc = ::crc32(crc, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(got));
  }
  return static_cast<std::uint32_t>(crc);
}

std::string format_crc32(std::uint32_t crc) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", crc);
  return std::string("crc32:") + buf;
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, "'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) fail(ErrorCode::kIo, "write to '" + path.string() + "' failed");
}

void write_json(const fs::path& path, const Json& doc) { write_text(path, doc.dump(2) + "\n"); }

void prepare_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    fail(ErrorCode::kIo, "cannot create directory '" + dir.string() + "'");
  }
  // Directory permission bits are not enough under root, so probe with a file.
  const fs::path probe = dir / ".write-probe";
  {
    std::ofstream out(probe, std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "directory '" + dir.string() + "' is not writable");
  }
  fs::remove(probe, ec);
}

Json tensor_entry(const std::string& name, const std::string& file, const std::string& dtype,
                  std::vector<std::size_t> shape) {
  Json e;
  e["name"] = name;
  e["file"] = file;
  e["dtype"] = dtype;
  e["shape"] = shape;
  return e;
}

const Json& find_tensor(const Json& manifest, const std::string& name) {
  if (!manifest.contains("tensors") || !manifest["tensors"].is_array()) {
    fail(ErrorCode::kFormat, "manifest has no 'tensors' list");
  }
  for (const auto& t : manifest["tensors"]) {
    if (t.value("name", std::string()) == name) return t;
  }
  fail(ErrorCode::kFormat, "manifest does not declare tensor '" + name + "'");
}

std::vector<std::size_t> tensor_shape(const Json& entry) {
  try {
    return entry.at("shape").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("bad tensor shape: ") + e.what());
  }
}

void save_matrix(const fs::path& dir, const std::string& name, const numerics::DenseMatrix& m,
                 Json& tensors) {
  const std::string file = name + ".f32";
  write_f32(dir / file, m.values());
  tensors.push_back(tensor_entry(name, file, "f32", {m.rows(), m.cols()}));
}

numerics::DenseMatrix load_matrix(const fs::path& dir, const Json& manifest,
                                  const std::string& name) {
  const Json& entry = find_tensor(manifest, name);
  const auto shape = tensor_shape(entry);
  if (shape.size() != 2 || entry.value("dtype", std::string()) != "f32") {
    fail(ErrorCode::kFormat, "tensor '" + name + "' must be a 2-D f32 tensor");
  }
  auto data = read_f32(dir / entry.at("file").get<std::string>(), shape[0] * shape[1]);
  return numerics::DenseMatrix(shape[0], shape[1], std::move(data));
}

void require_known_keys(const Json& j, std::initializer_list<std::string_view> known,
                        std::string_view where) {
  if (!j.is_object()) fail(ErrorCode::kFormat, std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      fail(ErrorCode::kFormat, "unknown key '" + key + "' in " + std::string(where));
    }
  }
}

}  // namespace gzsl::dataio
