#include "gzsl/latentgen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "gzsl/error.hpp"
#include "gzsl/tensor_io.hpp"

namespace gzsl::latentgen {

using numerics::DenseMatrix;

std::string_view space_name(Space space) {
  switch (space) {
    case Space::kLatent: return "z";
    case Space::kReconVisual: return "xr";
    case Space::kReconSemantic: return "ar";
  }
  return "?";
}

Space parse_space(std::string_view name) {
  if (name == "z") return Space::kLatent;
  if (name == "xr") return Space::kReconVisual;
  if (name == "ar") return Space::kReconSemantic;
  fail(ErrorCode::kFormat, "unknown embedding space '" + std::string(name) + "'");
}

LabeledEmbeddingSet build_latent_trainset(const cadavae::CadaVaeModel& model,
                                          const dataio::GzslDataset& dataset,
                                          const GenConfig& config) {
  if (config.seen_per_class == 0 || config.unseen_per_class == 0) {
    fail(ErrorCode::kUsage, "per-class sample counts must be positive");
  }
  std::map<std::uint32_t, std::vector<std::uint32_t>> rows_by_class;
  for (auto idx : dataset.splits.train) rows_by_class[dataset.labels[idx]].push_back(idx);

  std::vector<std::uint32_t> seen = dataset.seen_classes;
  std::vector<std::uint32_t> unseen = dataset.unseen_classes;
  std::sort(seen.begin(), seen.end());
  std::sort(unseen.begin(), unseen.end());

  std::vector<DenseMatrix> blocks;
  LabeledEmbeddingSet out;
  out.space = Space::kLatent;

  for (auto cls : seen) {
    const auto it = rows_by_class.find(cls);
    if (it == rows_by_class.end() || it->second.empty()) {
      fail(ErrorCode::kGeneration, "seen class " + std::to_string(cls) +
                                       " has no training samples to encode");
    }
    numerics::Rng rng(numerics::derive_seed(config.seed, cls));
    std::vector<std::uint32_t> pool = it->second;
    std::vector<std::uint32_t> picked;
    picked.reserve(config.seen_per_class);
    // Whole passes over a shuffled pool, so every real sample is used before
    // any is repeated.
    while (picked.size() < config.seen_per_class) {
      rng.shuffle(pool);
      const std::size_t take = std::min(pool.size(), config.seen_per_class - picked.size());
      picked.insert(picked.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
    }
    const auto enc = cadavae::encode_visual(model, numerics::select_rows(dataset.features, picked));
    blocks.push_back(numerics::gaussian_sample(enc.mu, enc.logvar, rng));
    out.labels.insert(out.labels.end(), config.seen_per_class, cls);
  }

  for (auto cls : unseen) {
    numerics::Rng rng(numerics::derive_seed(config.seed, cls));
    const std::vector<std::uint32_t> repeated(config.unseen_per_class, cls);
    const auto enc =
        cadavae::encode_semantic(model, numerics::select_rows(dataset.attributes, repeated));
    blocks.push_back(numerics::gaussian_sample(enc.mu, enc.logvar, rng));
    out.labels.insert(out.labels.end(), config.unseen_per_class, cls);
  }

  out.embeddings = numerics::vstack(blocks);
  return out;
}

DecodedSets decode_trainsets(const cadavae::CadaVaeModel& model,
                             const LabeledEmbeddingSet& latent_set) {
  if (latent_set.space != Space::kLatent) {
    fail(ErrorCode::kUsage, "decode_trainsets needs a latent-space set, got '" +
                                std::string(space_name(latent_set.space)) + "'");
  }
  DecodedSets out;
  out.visual = {Space::kReconVisual, cadavae::decode_visual(model, latent_set.embeddings),
                latent_set.labels};
  out.semantic = {Space::kReconSemantic, cadavae::decode_semantic(model, latent_set.embeddings),
                  latent_set.labels};
  return out;
}

LabeledEmbeddingSet subset(const LabeledEmbeddingSet& set, std::span<const std::uint32_t> rows) {
  LabeledEmbeddingSet out;
  out.space = set.space;
  out.embeddings = numerics::select_rows(set.embeddings, rows);
  out.labels.reserve(rows.size());
  for (auto r : rows) out.labels.push_back(set.labels[r]);
  return out;
}

StratifiedSplit stratified_split(std::span<const std::uint32_t> labels, double holdout_fraction,
                                 std::uint64_t seed) {
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
    fail(ErrorCode::kUsage, "holdout fraction must be in [0, 1)");
  }
  std::map<std::uint32_t, std::vector<std::uint32_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class[labels[i]].push_back(static_cast<std::uint32_t>(i));
  }
  StratifiedSplit split;
  for (auto& [cls, rows] : by_class) {
    numerics::Rng rng(numerics::derive_seed(seed, cls));
    rng.shuffle(rows);
    auto n_hold = static_cast<std::size_t>(
        std::llround(holdout_fraction * static_cast<double>(rows.size())));
    if (holdout_fraction > 0.0 && n_hold == 0 && rows.size() >= 2) n_hold = 1;
    split.holdout.insert(split.holdout.end(), rows.begin(),
                         rows.begin() + static_cast<std::ptrdiff_t>(n_hold));
    split.train.insert(split.train.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_hold),
                       rows.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.holdout.begin(), split.holdout.end());
  return split;
}

void save_sets(const std::filesystem::path& dir, std::span<const LabeledEmbeddingSet> sets,
               const StratifiedSplit& split) {
  if (sets.empty()) fail(ErrorCode::kUsage, "save_sets: nothing to save");
  dataio::prepare_directory(dir);
  dataio::Json m;
  m["version"] = 1;
  m["kind"] = "embedding_sets";
  dataio::Json tensors = dataio::Json::array();
  dataio::Json spaces = dataio::Json::array();
  for (const auto& s : sets) {
    if (s.labels != sets.front().labels) {
      fail(ErrorCode::kUsage, "save_sets: sets must be row-aligned");
    }
    dataio::save_matrix(dir, std::string(space_name(s.space)), s.embeddings, tensors);
    spaces.push_back(space_name(s.space));
  }
  dataio::write_u32(dir / "labels.u32", sets.front().labels);
  tensors.push_back(dataio::tensor_entry("labels", "labels.u32", "u32", {sets.front().labels.size()}));
  m["spaces"] = spaces;
  m["tensors"] = std::move(tensors);
  m["split"] = {{"train", split.train}, {"holdout", split.holdout}};
  dataio::write_json(dir / "manifest.json", m);
}

SavedSets load_sets(const std::filesystem::path& dir) {
  const dataio::Json m = dataio::read_json(dir / "manifest.json");
  if (m.value("kind", std::string()) != "embedding_sets") {
    fail(ErrorCode::kFormat, "'" + dir.string() + "' does not hold embedding sets");
  }
  SavedSets out;
  try {
    const auto& le = dataio::find_tensor(m, "labels");
    const auto shape = dataio::tensor_shape(le);
    if (shape.size() != 1) fail(ErrorCode::kFormat, "labels tensor must be 1-D");
    const auto labels = dataio::read_u32(dir / le.at("file").get<std::string>(), shape[0]);
    for (const auto& name : m.at("spaces")) {
      LabeledEmbeddingSet s;
      s.space = parse_space(name.get<std::string>());
      s.embeddings = dataio::load_matrix(dir, m, name.get<std::string>());
      if (s.embeddings.rows() != labels.size()) {
        fail(ErrorCode::kFormat, "embedding rows do not match labels");
      }
      s.labels = labels;
      out.sets.push_back(std::move(s));
    }
    out.split.train = m.at("split").at("train").get<std::vector<std::uint32_t>>();
    out.split.holdout = m.at("split").at("holdout").get<std::vector<std::uint32_t>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("bad embedding-set manifest: ") + e.what());
  }
  return out;
}

}  // namespace gzsl::latentgen
