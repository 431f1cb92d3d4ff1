#include "gzsl/pipeline.hpp"

#include <algorithm>
#include <chrono>

#include "gzsl/error.hpp"

namespace gzsl::pipeline {

namespace fs = std::filesystem;
using dataio::Json;

namespace {

template <typename T>
void read_if(const Json& j, const char* key, T& field) {
  if (j.contains(key)) j.at(key).get_to(field);
}

const Json& section(const Json& j, const char* key) {
  static const Json empty = Json::object();
  return j.contains(key) ? j.at(key) : empty;
}

fs::path model_dir(const RunConfig& c) { return c.out_dir / "model"; }
fs::path trainsets_dir(const RunConfig& c) { return c.out_dir / "trainsets"; }
fs::path classifier_dir(const RunConfig& c, latentgen::Space s) {
  return c.out_dir / "classifiers" / std::string(latentgen::space_name(s));
}

constexpr latentgen::Space kSpaces[] = {latentgen::Space::kLatent, latentgen::Space::kReconVisual,
                                        latentgen::Space::kReconSemantic};

void require_artifact(const fs::path& manifest_dir, std::string_view producer) {
  if (!fs::exists(manifest_dir / "manifest.json")) {
    fail(ErrorCode::kUsage, "missing '" + manifest_dir.string() + "'; run `gzsl " +
                                std::string(producer) + "` for this output directory first");
  }
}

ensemble::ClassifierTriple load_triple(const RunConfig& c) {
  ensemble::ClassifierTriple t;
  for (auto s : kSpaces) require_artifact(classifier_dir(c, s), "fit-classifiers");
  t.latent = ensemble::load_classifier(classifier_dir(c, latentgen::Space::kLatent));
  t.recon_visual = ensemble::load_classifier(classifier_dir(c, latentgen::Space::kReconVisual));
  t.recon_semantic =
      ensemble::load_classifier(classifier_dir(c, latentgen::Space::kReconSemantic));
  return t;
}

cadavae::CadaVaeModel load_model(const RunConfig& c) {
  require_artifact(model_dir(c), "train");
  return cadavae::load_checkpoint(model_dir(c)).model;
}

// Records the master seed in an artifact manifest written by a lower layer.
void stamp_seed(const fs::path& dir, std::uint64_t seed) {
  Json m = dataio::read_json(dir / "manifest.json");
  m["seed"] = seed;
  dataio::write_json(dir / "manifest.json", m);
}

Json table_row(eval::Mode mode, const eval::EvalReport& r) {
  return Json{{"mode", eval::mode_name(mode)}, {"label", eval::mode_label(mode)},
              {"seen", r.seen}, {"unseen", r.unseen}, {"H", r.harmonic}};
}

std::vector<std::uint32_t> sorted(std::vector<std::uint32_t> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

RunConfig config_from_json(const Json& j, RunConfig c) {
  try {
    dataio::require_known_keys(j,
                               {"data", "out", "seed", "stage1", "generation", "classifier",
                                "calibration", "ensemble", "evaluation"},
                               "config");
    if (j.contains("data")) c.data_dir = j.at("data").get<std::string>();
    if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();
    read_if(j, "seed", c.seed);

    const Json& s1 = section(j, "stage1");
    dataio::require_known_keys(s1,
                               {"epochs", "batch_size", "learning_rate", "gamma_cm", "gamma_da",
                                "beta", "sizes", "seed"},
                               "stage1");
    cadavae::from_json(s1, c.stage1);

    const Json& gen = section(j, "generation");
    dataio::require_known_keys(
        gen, {"seen_per_class", "unseen_per_class", "holdout_fraction", "seed"}, "generation");
    read_if(gen, "seen_per_class", c.generation.seen_per_class);
    read_if(gen, "unseen_per_class", c.generation.unseen_per_class);
    read_if(gen, "holdout_fraction", c.holdout_fraction);

    const Json& cls = section(j, "classifier");
    dataio::require_known_keys(cls, {"epochs", "learning_rate", "batch_size", "seed"}, "classifier");
    read_if(cls, "epochs", c.classifier.epochs);
    read_if(cls, "learning_rate", c.classifier.learning_rate);
    read_if(cls, "batch_size", c.classifier.batch_size);

    const Json& cal = section(j, "calibration");
    dataio::require_known_keys(cal, {"min_temperature", "max_temperature", "iterations"},
                               "calibration");
    read_if(cal, "min_temperature", c.calibration.min_temperature);
    read_if(cal, "max_temperature", c.calibration.max_temperature);
    read_if(cal, "iterations", c.calibration.iterations);

    const Json& ens = section(j, "ensemble");
    dataio::require_known_keys(ens, {"lambda_x", "lambda_a", "renormalize"}, "ensemble");
    read_if(ens, "lambda_x", c.ensemble.lambda_x);
    read_if(ens, "lambda_a", c.ensemble.lambda_a);
    read_if(ens, "renormalize", c.ensemble.renormalize);

    const Json& ev = section(j, "evaluation");
    dataio::require_known_keys(
        ev, {"mode", "ausuc", "n_bias", "distance_matrices", "metric", "ablation"}, "evaluation");
    if (ev.contains("mode")) c.evaluation.mode = eval::parse_mode(ev.at("mode").get<std::string>());
    read_if(ev, "ausuc", c.evaluation.ausuc);
    read_if(ev, "n_bias", c.evaluation.n_bias);
    read_if(ev, "distance_matrices", c.evaluation.distance_matrices);
    if (ev.contains("metric")) {
      c.evaluation.metric = eval::parse_metric(ev.at("metric").get<std::string>());
    }
    read_if(ev, "ablation", c.evaluation.ablation);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("config: ") + e.what());
  }
  if (c.ensemble.lambda_x < 0.0 || c.ensemble.lambda_a < 0.0) {
    fail(ErrorCode::kUsage, "config: lambdas must be non-negative");
  }
  return with_derived_seeds(std::move(c));
}

RunConfig with_derived_seeds(RunConfig c) {
  c.stage1.seed = numerics::derive_seed(c.seed, 1);
  c.generation.seed = numerics::derive_seed(c.seed, 2);
  c.classifier.seed = numerics::derive_seed(c.seed, 3);
  return c;
}

Json to_json(const RunConfig& c) {
  Json j;
  j["data"] = c.data_dir.string();
  j["out"] = c.out_dir.string();
  j["seed"] = c.seed;
  j["stage1"] = c.stage1;
  j["generation"] = {{"seen_per_class", c.generation.seen_per_class},
                     {"unseen_per_class", c.generation.unseen_per_class},
                     {"holdout_fraction", c.holdout_fraction},
                     {"seed", c.generation.seed}};
  j["classifier"] = {{"epochs", c.classifier.epochs},
                     {"learning_rate", c.classifier.learning_rate},
                     {"batch_size", c.classifier.batch_size},
                     {"seed", c.classifier.seed}};
  j["calibration"] = {{"min_temperature", c.calibration.min_temperature},
                      {"max_temperature", c.calibration.max_temperature},
                      {"iterations", c.calibration.iterations}};
  j["ensemble"] = {{"lambda_x", c.ensemble.lambda_x},
                   {"lambda_a", c.ensemble.lambda_a},
                   {"renormalize", c.ensemble.renormalize}};
  j["evaluation"] = {{"mode", eval::mode_name(c.evaluation.mode)},
                     {"ausuc", c.evaluation.ausuc},
                     {"n_bias", c.evaluation.n_bias},
                     {"distance_matrices", c.evaluation.distance_matrices},
                     {"metric", eval::metric_name(c.evaluation.metric)},
                     {"ablation", c.evaluation.ablation}};
  return j;
}

Pipeline::Pipeline(RunConfig config) : config_(with_derived_seeds(std::move(config))) {
  if (config_.out_dir.empty()) fail(ErrorCode::kUsage, "no output directory configured");
}

const dataio::GzslDataset& Pipeline::dataset() {
  if (!dataset_) {
    if (config_.data_dir.empty()) fail(ErrorCode::kUsage, "no dataset directory configured");
    if (!fs::is_directory(config_.data_dir)) {
      fail(ErrorCode::kIo, "dataset directory '" + config_.data_dir.string() + "' does not exist");
    }
    dataset_ = dataio::load_gzb(config_.data_dir);
  }
  return *dataset_;
}

void Pipeline::record(std::string_view command, double seconds) {
  const fs::path path = config_.out_dir / "run.json";
  const Json cfg = to_json(config_);
  Json commands = Json::array();
  if (fs::exists(path)) {
    try {
      const Json old = dataio::read_json(path);
      if (old.value("config", Json()) == cfg) commands = old.value("commands", Json::array());
    } catch (const Error&) {
      // Unreadable provenance is replaced.
    }
  }
  commands.push_back({{"command", command}, {"seconds", seconds}});
  Json run;
  run["tool"] = "gzsl";
  run["version"] = kVersion;
  run["seed"] = config_.seed;
  run["rng"] = numerics::Rng::kAlgorithm;
  run["config"] = cfg;
  run["commands"] = std::move(commands);
  dataio::write_json(path, run);
}

Json Pipeline::run(std::string_view command) {
  dataio::prepare_directory(config_.out_dir);
  const auto start = std::chrono::steady_clock::now();
  Json result;
  if (command == "train") {
    result = train();
  } else if (command == "generate") {
    result = generate();
  } else if (command == "fit-classifiers") {
    result = fit_classifiers();
  } else if (command == "calibrate") {
    result = calibrate();
  } else if (command == "evaluate") {
    result = evaluate();
  } else if (command == "ausuc") {
    result = ausuc();
  } else if (command == "distmat") {
    result = distmat();
  } else if (command == "run-all") {
    result = run_all();
  } else {
    fail(ErrorCode::kUsage, "unknown command '" + std::string(command) + "'");
  }
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  record(command, elapsed.count());
  return result;
}

Json Pipeline::train() {
  const auto result = cadavae::train_stage1(dataset(), config_.stage1);
  cadavae::save_checkpoint(result.model, config_.stage1, model_dir(config_));
  stamp_seed(model_dir(config_), config_.seed);
  Json log = Json::array();
  for (const auto& e : result.log) {
    log.push_back({{"epoch", e.epoch},
                   {"vae", e.vae},
                   {"cross", e.cross},
                   {"dist", e.dist},
                   {"total", e.total},
                   {"beta", e.weights.beta},
                   {"gamma_cm", e.weights.gamma_cm},
                   {"gamma_da", e.weights.gamma_da}});
  }
  dataio::write_json(config_.out_dir / "stage1_log.json",
                     Json{{"seed", config_.seed}, {"epochs", log}});
  return Json{{"command", "train"},
              {"epochs", result.log.size()},
              {"final_total", result.log.empty() ? 0.0 : result.log.back().total}};
}

Json Pipeline::generate() {
  const auto model = load_model(config_);
  const auto latent = latentgen::build_latent_trainset(model, dataset(), config_.generation);
  auto decoded = latentgen::decode_trainsets(model, latent);
  const auto split = latentgen::stratified_split(latent.labels, config_.holdout_fraction,
                                                 numerics::derive_seed(config_.seed, 4));
  const latentgen::LabeledEmbeddingSet sets[] = {latent, decoded.visual, decoded.semantic};
  latentgen::save_sets(trainsets_dir(config_), sets, split);
  stamp_seed(trainsets_dir(config_), config_.seed);
  return Json{{"command", "generate"},
              {"samples", latent.labels.size()},
              {"train_rows", split.train.size()},
              {"holdout_rows", split.holdout.size()}};
}

Json Pipeline::fit_classifiers() {
  require_artifact(trainsets_dir(config_), "generate");
  const auto saved = latentgen::load_sets(trainsets_dir(config_));
  const std::size_t num_classes = dataset().num_classes();
  Json out{{"command", "fit-classifiers"}};
  for (const auto& set : saved.sets) {
    ensemble::ClassifierConfig cc = config_.classifier;
    cc.seed = numerics::derive_seed(config_.classifier.seed, static_cast<std::uint64_t>(set.space));
    const auto clf = ensemble::train_softmax_classifier(latentgen::subset(set, saved.split.train),
                                                        num_classes, cc);
    ensemble::save_classifier(clf, classifier_dir(config_, set.space));
    stamp_seed(classifier_dir(config_, set.space), config_.seed);
    out["spaces"].push_back(latentgen::space_name(set.space));
  }
  return out;
}

Json Pipeline::calibrate() {
  require_artifact(trainsets_dir(config_), "generate");
  const auto saved = latentgen::load_sets(trainsets_dir(config_));
  if (saved.split.holdout.empty()) {
    fail(ErrorCode::kUsage, "the generated sets have no calibration holdout (holdout_fraction = 0)");
  }
  Json out{{"command", "calibrate"}};
  for (const auto& set : saved.sets) {
    const fs::path dir = classifier_dir(config_, set.space);
    require_artifact(dir, "fit-classifiers");
    auto clf = ensemble::load_classifier(dir);
    const double tau = ensemble::calibrate_temperature(
        clf, latentgen::subset(set, saved.split.holdout), config_.calibration);
    ensemble::save_classifier(clf, dir);
    stamp_seed(dir, config_.seed);
    out["temperatures"][std::string(latentgen::space_name(set.space))] = tau;
  }
  return out;
}

Json Pipeline::evaluate() {
  const auto model = load_model(config_);
  const auto triple = load_triple(config_);
  const eval::Mode mode = config_.evaluation.mode;
  auto report = eval::evaluate(model, triple, eval::config_for_mode(mode, config_.ensemble),
                               dataset());
  report.seed = config_.seed;
  dataio::write_json(config_.out_dir / "eval.json", eval::to_json(report));
  return Json{{"command", "evaluate"}, {"rows", Json::array({table_row(mode, report)})}};
}

Json Pipeline::ausuc() {
  const auto model = load_model(config_);
  const auto triple = load_triple(config_);
  const eval::Mode mode = config_.evaluation.mode;
  auto report = eval::evaluate(model, triple, eval::config_for_mode(mode, config_.ensemble),
                               dataset(), {true, config_.evaluation.n_bias});
  report.seed = config_.seed;
  const Json j = eval::to_json(report);
  dataio::write_json(
      config_.out_dir / "ausuc.json",
      Json{{"seed", config_.seed}, {"mode", eval::mode_name(mode)}, {"ausuc", j["ausuc"]}});
  return Json{{"command", "ausuc"}, {"mode", eval::mode_name(mode)},
              {"ausuc", j["ausuc"]["ausuc"]}};
}

Json Pipeline::distmat() {
  const auto model = load_model(config_);
  const auto& d = dataset();
  const auto seen = sorted(d.seen_classes);
  const auto unseen = sorted(d.unseen_classes);
  std::vector<std::uint32_t> order = seen;
  order.insert(order.end(), unseen.begin(), unseen.end());

  const fs::path dir = config_.out_dir / "distmat";
  dataio::prepare_directory(dir);
  const auto metric = config_.evaluation.metric;
  const auto write = [&](const char* name, const numerics::DenseMatrix& emb,
                         std::span<const std::uint32_t> ids) {
    eval::write_distance_csv(dir / (std::string(name) + ".csv"),
                             eval::class_distance_matrix(emb, metric), ids, seen);
  };

  const auto a = numerics::select_rows(d.attributes, order);
  const auto z = cadavae::encode_semantic(model, a).mu;
  write("a", a, order);
  write("z", z, order);
  write("xr", cadavae::decode_visual(model, z), order);
  write("ar", cadavae::decode_semantic(model, z), order);

  numerics::DenseMatrix means(seen.size(), d.feature_dim());
  std::vector<std::size_t> counts(seen.size(), 0);
  for (auto idx : d.splits.train) {
    const auto pos = std::lower_bound(seen.begin(), seen.end(), d.labels[idx]) - seen.begin();
    auto row = means.row(static_cast<std::size_t>(pos));
    const auto src = d.features.row(idx);
    for (std::size_t k = 0; k < row.size(); ++k) row[k] += src[k];
    ++counts[static_cast<std::size_t>(pos)];
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    for (auto& v : means.row(i)) v /= static_cast<float>(std::max<std::size_t>(counts[i], 1));
  }
  Json files = Json::array({"a.csv", "z.csv", "xr.csv", "ar.csv"});
  if (seen.size() >= 2) {
    write("x", means, seen);
    files.push_back("x.csv");
  }
  dataio::write_json(dir / "manifest.json", Json{{"kind", "distance_matrices"},
                                                 {"seed", config_.seed},
                                                 {"metric", eval::metric_name(metric)},
                                                 {"classes", order},
                                                 {"files", files}});
  return Json{{"command", "distmat"}, {"metric", eval::metric_name(metric)}, {"files", files}};
}

Json Pipeline::run_all() {
  Json steps = Json::array();
  steps.push_back(train());
  steps.push_back(generate());
  steps.push_back(fit_classifiers());
  steps.push_back(calibrate());

  const auto model = load_model(config_);
  const auto triple = load_triple(config_);
  const eval::EvalOptions options{config_.evaluation.ausuc, config_.evaluation.n_bias};

  Json rows = Json::array();
  const eval::Mode primary = config_.evaluation.mode;
  auto report = eval::evaluate(model, triple, eval::config_for_mode(primary, config_.ensemble),
                               dataset(), options);
  report.seed = config_.seed;
  dataio::write_json(config_.out_dir / "eval.json", eval::to_json(report));
  rows.push_back(table_row(primary, report));

  if (config_.evaluation.ablation) {
    Json ablation = Json::array();
    for (auto mode : {eval::Mode::kReconVisualOnly, eval::Mode::kReconSemanticOnly,
                      eval::Mode::kLatentOnly, eval::Mode::kTau1, eval::Mode::kEnsemble}) {
      auto r = eval::evaluate(model, triple, eval::config_for_mode(mode, config_.ensemble),
                              dataset(), options);
      r.seed = config_.seed;
      Json entry = table_row(mode, r);
      if (r.ausuc) entry["ausuc"] = 100.0 * r.ausuc->area;
      ablation.push_back(std::move(entry));
    }
    dataio::write_json(config_.out_dir / "ablation.json",
                       Json{{"seed", config_.seed}, {"rows", ablation}});
    rows = ablation;
  }
  if (config_.evaluation.distance_matrices) steps.push_back(distmat());

  Json out{{"command", "run-all"}, {"steps", steps}, {"rows", rows}};
  if (report.ausuc) out["ausuc"] = 100.0 * report.ausuc->area;
  return out;
}

}  // namespace gzsl::pipeline
