#include "gzsl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "gzsl/error.hpp"
#include "gzsl/rng.hpp"
#include "gzsl/tensor_io.hpp"

namespace gzsl::dataio {

namespace fs = std::filesystem;

namespace {

constexpr int kFormatVersion = 1;

[[noreturn]] void invalid(const std::string& what) { fail(ErrorCode::kValidation, what); }

void check_split(const GzslDataset& d, const char* split, const IndexList& indices,
                 const std::vector<std::uint32_t>& allowed_classes, const char* domain,
                 std::vector<const char*>& owner) {
  const std::set<std::uint32_t> allowed(allowed_classes.begin(), allowed_classes.end());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::uint32_t idx = indices[k];
    if (idx >= d.num_samples()) {
      invalid(std::string(split) + "[" + std::to_string(k) + "] = " + std::to_string(idx) +
              " is outside [0, " + std::to_string(d.num_samples()) + ")");
    }
    if (owner[idx] != nullptr) {
      invalid(std::string(split) + "[" + std::to_string(k) + "] = " + std::to_string(idx) +
              " is also listed in " + owner[idx]);
    }
    owner[idx] = split;
    if (!allowed.contains(d.labels[idx])) {
      invalid(std::string(split) + "[" + std::to_string(k) + "] = sample " + std::to_string(idx) +
              " has label " + std::to_string(d.labels[idx]) + " which is not a " + domain +
              " class");
    }
  }
}

IndexList get_indices(const Json& j, const char* key) {
  try {
    return j.at(key).get<IndexList>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("manifest field '") + key + "': " + e.what());
  }
}

std::size_t get_dim(const Json& dims, const char* key) {
  try {
    return dims.at(key).get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("manifest dims.") + key + ": " + e.what());
  }
}

void expect_shape(const Json& entry, std::vector<std::size_t> expected, const char* dtype) {
  const auto shape = tensor_shape(entry);
  const std::string name = entry.value("name", std::string("?"));
  if (entry.value("dtype", std::string()) != dtype) {
    fail(ErrorCode::kFormat, "tensor '" + name + "' must have dtype " + dtype);
  }
  if (shape != expected) {
    fail(ErrorCode::kFormat, "tensor '" + name + "' shape disagrees with manifest dims");
  }
}

}  // namespace

bool GzslDataset::is_seen(std::uint32_t cls) const {
  return std::find(seen_classes.begin(), seen_classes.end(), cls) != seen_classes.end();
}

void validate(const GzslDataset& d) {
  if (d.labels.size() != d.num_samples()) {
    invalid("labels has " + std::to_string(d.labels.size()) + " entries for " +
            std::to_string(d.num_samples()) + " feature rows");
  }
  if (!d.features.all_finite()) invalid("features contain non-finite values");
  if (!d.attributes.all_finite()) invalid("attributes contain non-finite values");

  std::set<std::uint32_t> seen;
  for (auto c : d.seen_classes) {
    if (!seen.insert(c).second) invalid("seen class " + std::to_string(c) + " listed twice");
  }
  std::set<std::uint32_t> all = seen;
  for (auto c : d.unseen_classes) {
    if (seen.contains(c)) invalid("class " + std::to_string(c) + " is both seen and unseen");
    if (!all.insert(c).second) invalid("unseen class " + std::to_string(c) + " listed twice");
  }
  if (d.seen_classes.empty()) invalid("no seen classes");
  if (all.size() != d.num_classes()) {
    invalid("attributes has " + std::to_string(d.num_classes()) + " rows for " +
            std::to_string(all.size()) + " classes");
  }
  if (!all.empty() && *all.rbegin() != all.size() - 1) {
    invalid("class ids must be dense in [0, C); found id " + std::to_string(*all.rbegin()));
  }
  for (std::size_t i = 0; i < d.labels.size(); ++i) {
    if (d.labels[i] >= d.num_classes()) {
      invalid("label of sample " + std::to_string(i) + " is " + std::to_string(d.labels[i]) +
              ", outside [0, " + std::to_string(d.num_classes()) + ")");
    }
  }

  std::vector<const char*> owner(d.num_samples(), nullptr);
  check_split(d, "train", d.splits.train, d.seen_classes, "seen", owner);
  if (d.splits.val) check_split(d, "val", *d.splits.val, d.seen_classes, "seen", owner);
  check_split(d, "test_seen", d.splits.test_seen, d.seen_classes, "seen", owner);
  check_split(d, "test_unseen", d.splits.test_unseen, d.unseen_classes, "unseen", owner);
}

GzslDataset load_gzb(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) {
    fail(ErrorCode::kIo, "missing '" + manifest_path.string() + "'");
  }
  const Json m = read_json(manifest_path);
  if (!m.is_object() || m.value("version", 0) != kFormatVersion) {
    fail(ErrorCode::kFormat, "unsupported GZB manifest version");
  }
  if (!m.contains("dims") || !m.contains("splits")) {
    fail(ErrorCode::kFormat, "manifest lacks 'dims' or 'splits'");
  }
  const Json& dims = m["dims"];
  const std::size_t X = get_dim(dims, "X"), A = get_dim(dims, "A");
  const std::size_t C = get_dim(dims, "C"), N = get_dim(dims, "N");

  const Json& fe = find_tensor(m, "features");
  const Json& le = find_tensor(m, "labels");
  const Json& ae = find_tensor(m, "attributes");
  expect_shape(fe, {N, X}, "f32");
  expect_shape(le, {N}, "u32");
  expect_shape(ae, {C, A}, "f32");

  if (m.contains("checksums")) {
    const Json& sums = m["checksums"];
    const std::pair<const Json*, std::size_t> entries[] = {{&fe, N * X}, {&le, N}, {&ae, C * A}};
    for (const auto& [entry, count] : entries) {
      const auto file = entry->at("file").get<std::string>();
      if (!sums.contains(file)) continue;
      // A file of the wrong length is reported by the reader below as a
      // shape mismatch rather than as a checksum failure.
      std::error_code ec;
      if (fs::file_size(dir / file, ec) != count * 4 || ec) continue;
      if (format_crc32(crc32_of_file(dir / file)) != sums[file].get<std::string>()) {
        fail(ErrorCode::kFormat, "checksum mismatch for '" + file + "'");
      }
    }
  }

  GzslDataset d;
  d.name = m.value("name", std::string());
  d.features = numerics::DenseMatrix(N, X, read_f32(dir / fe.at("file").get<std::string>(), N * X));
  d.labels = read_u32(dir / le.at("file").get<std::string>(), N);
  d.attributes = numerics::DenseMatrix(C, A, read_f32(dir / ae.at("file").get<std::string>(), C * A));
  d.seen_classes = get_indices(m, "seen_classes");
  d.unseen_classes = get_indices(m, "unseen_classes");
  const Json& s = m["splits"];
  d.splits.train = get_indices(s, "train");
  if (s.contains("val")) d.splits.val = get_indices(s, "val");
  d.splits.test_seen = get_indices(s, "test_seen");
  d.splits.test_unseen = get_indices(s, "test_unseen");
  validate(d);
  return d;
}

void write_gzb(const GzslDataset& d, const fs::path& dir, bool with_checksums) {
  validate(d);
  prepare_directory(dir);

  write_f32(dir / "features.f32", d.features.values());
  write_u32(dir / "labels.u32", d.labels);
  write_f32(dir / "attributes.f32", d.attributes.values());

  Json m;
  m["version"] = kFormatVersion;
  m["name"] = d.name;
  m["dims"] = {{"X", d.feature_dim()}, {"A", d.attribute_dim()}, {"C", d.num_classes()},
               {"N", d.num_samples()}};
  m["tensors"] = Json::array({
      tensor_entry("features", "features.f32", "f32", {d.num_samples(), d.feature_dim()}),
      tensor_entry("labels", "labels.u32", "u32", {d.num_samples()}),
      tensor_entry("attributes", "attributes.f32", "f32", {d.num_classes(), d.attribute_dim()}),
  });
  m["seen_classes"] = d.seen_classes;
  m["unseen_classes"] = d.unseen_classes;
  Json splits;
  splits["train"] = d.splits.train;
  if (d.splits.val) splits["val"] = *d.splits.val;
  splits["test_seen"] = d.splits.test_seen;
  splits["test_unseen"] = d.splits.test_unseen;
  m["splits"] = std::move(splits);
  if (with_checksums) {
    Json sums;
    for (const char* f : {"features.f32", "labels.u32", "attributes.f32"}) {
      sums[f] = format_crc32(crc32_of_file(dir / f));
    }
    m["checksums"] = std::move(sums);
  }
  write_json(dir / "manifest.json", m);
}

DatasetCounts summarize(const GzslDataset& d) {
  return DatasetCounts{d.seen_classes.size(), d.unseen_classes.size(), d.splits.train.size(),
                       d.splits.test_seen.size(), d.splits.test_unseen.size()};
}

GzslDataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.seen_classes == 0 || spec.unseen_classes == 0 || spec.samples_per_class < 2 ||
      spec.feature_dim == 0 || spec.attribute_dim == 0) {
    fail(ErrorCode::kUsage, "synthetic spec needs at least one class per domain, 2 samples "
                            "per class and non-zero dimensions");
  }
  numerics::Rng rng(spec.seed);
  const std::size_t C = spec.seen_classes + spec.unseen_classes;
  const std::size_t X = spec.feature_dim, A = spec.attribute_dim;

  GzslDataset d;
  d.name = "synthetic";
  d.attributes = numerics::standard_normal(C, A, rng);

  numerics::DenseMatrix projection = numerics::standard_normal(A, X, rng);
  for (auto& v : projection.values()) v /= static_cast<float>(std::sqrt(static_cast<double>(A)));
  numerics::DenseMatrix centres = numerics::matmul(d.attributes, projection);
  for (auto& v : centres.values()) v = 2.0f * std::tanh(v);

  const std::size_t per = spec.samples_per_class;
  d.features = numerics::DenseMatrix(C * per, X);
  d.labels.resize(C * per);
  for (std::uint32_t c = 0; c < C; ++c) {
    for (std::size_t k = 0; k < per; ++k) {
      const std::size_t r = c * per + k;
      d.labels[r] = c;
      for (std::size_t j = 0; j < X; ++j) {
        d.features(r, j) = centres(c, j) + static_cast<float>(spec.noise * rng.normal());
      }
    }
  }

  const auto n_test =
      static_cast<std::size_t>(std::llround(spec.test_seen_fraction * static_cast<double>(per)));
  for (std::uint32_t c = 0; c < C; ++c) {
    IndexList rows(per);
    for (std::size_t k = 0; k < per; ++k) rows[k] = static_cast<std::uint32_t>(c * per + k);
    if (c < spec.seen_classes) {
      d.seen_classes.push_back(c);
      rng.shuffle(rows);
      std::sort(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test));
      std::sort(rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
      d.splits.test_seen.insert(d.splits.test_seen.end(), rows.begin(),
                                rows.begin() + static_cast<std::ptrdiff_t>(n_test));
      d.splits.train.insert(d.splits.train.end(),
                            rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
    } else {
      d.unseen_classes.push_back(c);
      d.splits.test_unseen.insert(d.splits.test_unseen.end(), rows.begin(), rows.end());
    }
  }
  validate(d);
  return d;
}

SyntheticSpec synthetic_spec_from_json(const Json& j, SyntheticSpec spec) {
  if (!j.is_object()) fail(ErrorCode::kFormat, "synthetic spec must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "seen_classes") value.get_to(spec.seen_classes);
      else if (key == "unseen_classes") value.get_to(spec.unseen_classes);
      else if (key == "feature_dim") value.get_to(spec.feature_dim);
      else if (key == "attribute_dim") value.get_to(spec.attribute_dim);
      else if (key == "samples_per_class") value.get_to(spec.samples_per_class);
      else if (key == "test_seen_fraction") value.get_to(spec.test_seen_fraction);
      else if (key == "noise") value.get_to(spec.noise);
      else if (key == "seed") value.get_to(spec.seed);
      else fail(ErrorCode::kFormat, "unknown synthetic spec key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("synthetic spec: ") + e.what());
  }
  return spec;
}

}  // namespace gzsl::dataio
