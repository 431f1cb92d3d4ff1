#include "gzsl/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "gzsl/error.hpp"
#include "gzsl/tensor_io.hpp"

namespace gzsl::ensemble {

namespace {

void softmax_row(std::span<const double> logits, double tau, std::span<double> out) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    out[c] = std::exp((logits[c] - mx) / tau);
    sum += out[c];
  }
  for (auto& v : out) v /= sum;
}

}  // namespace

ScoreMatrix CalibratedLinearClassifier::logits(const DenseMatrix& embeddings) const {
  const DenseMatrix z =
      numerics::linear_forward(weight, bias, embeddings, numerics::Activation::kIdentity);
  ScoreMatrix out(z.rows(), z.cols());
  std::copy(z.values().begin(), z.values().end(), out.values.begin());
  return out;
}

ScoreMatrix CalibratedLinearClassifier::probabilities(const DenseMatrix& embeddings,
                                                      bool use_temperature) const {
  ScoreMatrix z = logits(embeddings);
  const double tau = use_temperature ? temperature : 1.0;
  ScoreMatrix out(z.rows, z.cols);
  for (std::size_t r = 0; r < z.rows; ++r) softmax_row(z.row(r), tau, out.row(r));
  return out;
}

CalibratedLinearClassifier train_softmax_classifier(const LabeledEmbeddingSet& set,
                                                    std::size_t num_classes,
                                                    const ClassifierConfig& config) {
  if (set.embeddings.rows() == 0 || set.labels.size() != set.embeddings.rows()) {
    fail(ErrorCode::kUsage, "classifier training set is empty or misaligned");
  }
  if (config.epochs < 0 || config.batch_size == 0 || !(config.learning_rate > 0.0)) {
    fail(ErrorCode::kUsage, "classifier config needs epochs >= 0, batch > 0, lr > 0");
  }
  const std::set<std::uint32_t> distinct(set.labels.begin(), set.labels.end());
  if (distinct.size() < 2) {
    fail(ErrorCode::kDegenerateTraining, "classifier training set contains a single class");
  }
  if (*distinct.rbegin() >= num_classes) {
    fail(ErrorCode::kUsage, "label " + std::to_string(*distinct.rbegin()) +
                                " outside the " + std::to_string(num_classes) + "-class universe");
  }

  numerics::Rng rng(config.seed);
  numerics::ParameterSet params;
  params.add_linear("classifier", set.embeddings.cols(), num_classes, rng);
  const numerics::AdamOptions adam{.learning_rate = config.learning_rate};

  std::vector<std::uint32_t> order(set.labels.size());
  std::iota(order.begin(), order.end(), 0u);
  const std::size_t n = order.size();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, n - start);
      const std::span<const std::uint32_t> rows(order.data() + start, len);
      std::vector<std::uint32_t> labels(len);
      for (std::size_t k = 0; k < len; ++k) labels[k] = set.labels[rows[k]];

      numerics::Tape tape(&params);
      const auto x = tape.input(numerics::select_rows(set.embeddings, rows));
      const auto logits = tape.linear(x, tape.parameter(0), tape.parameter(1));
      const auto loss = tape.softmax_cross_entropy(logits, labels);
      if (!std::isfinite(tape.scalar(loss))) {
        fail(ErrorCode::kTrainingDiverged,
             "classifier loss became non-finite in epoch " + std::to_string(epoch));
      }
      numerics::adam_step(params, tape.backward(loss), adam);
    }
  }
  return CalibratedLinearClassifier{set.space, params[0].value, params[1].value, 1.0};
}

std::vector<double> softmax_with_temperature(std::span<const double> logits, double tau) {
  if (!(tau > 0.0)) fail(ErrorCode::kDomain, "temperature must be positive");
  if (logits.empty()) return {};
  std::vector<double> out(logits.size());
  softmax_row(logits, tau, out);
  return out;
}

double mean_nll(const ScoreMatrix& logits, std::span<const std::uint32_t> labels, double tau) {
  if (labels.size() != logits.rows) fail(ErrorCode::kShape, "mean_nll: label count mismatch");
  if (logits.rows == 0) fail(ErrorCode::kUsage, "mean_nll: empty set");
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows; ++r) {
    const auto row = logits.row(r);
    if (labels[r] >= logits.cols) fail(ErrorCode::kUsage, "mean_nll: label outside the class range");
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += std::exp((v - mx) / tau);
    total += std::log(sum) - (row[labels[r]] - mx) / tau;
  }
  return total / static_cast<double>(logits.rows);
}

double calibrate_temperature(CalibratedLinearClassifier& classifier,
                             const LabeledEmbeddingSet& holdout,
                             const CalibrationOptions& options) {
  if (holdout.embeddings.rows() == 0) fail(ErrorCode::kUsage, "calibration holdout is empty");
  if (holdout.space != classifier.space) {
    fail(ErrorCode::kUsage, "calibration holdout comes from a different embedding space");
  }
  if (!(options.min_temperature > 0.0 && options.min_temperature < options.max_temperature)) {
    fail(ErrorCode::kUsage, "calibration temperature bracket is invalid");
  }
  const ScoreMatrix z = classifier.logits(holdout.embeddings);
  const auto nll = [&](double log_tau) { return mean_nll(z, holdout.labels, std::exp(log_tau)); };

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = std::log(options.min_temperature);
  double hi = std::log(options.max_temperature);
  double c = hi - inv_phi * (hi - lo);
  double d = lo + inv_phi * (hi - lo);
  double fc = nll(c);
  double fd = nll(d);
  for (int it = 0; it < options.iterations; ++it) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - inv_phi * (hi - lo);
      fc = nll(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + inv_phi * (hi - lo);
      fd = nll(d);
    }
  }
  double best = 0.5 * (lo + hi);
  if (nll(0.0) <= nll(best)) best = 0.0;
  classifier.temperature = std::exp(best);
  return classifier.temperature;
}

const CalibratedLinearClassifier& ClassifierTriple::get(Space space) const {
  const std::optional<CalibratedLinearClassifier>* slot = nullptr;
  switch (space) {
    case Space::kLatent: slot = &latent; break;
    case Space::kReconVisual: slot = &recon_visual; break;
    case Space::kReconSemantic: slot = &recon_semantic; break;
  }
  if (slot == nullptr || !slot->has_value()) {
    fail(ErrorCode::kUsage, "no classifier for space '" +
                                std::string(latentgen::space_name(space)) + "'");
  }
  return **slot;
}

TestEmbeddings embed_for_test(const cadavae::CadaVaeModel& model, const DenseMatrix& features) {
  TestEmbeddings out;
  out.latent = cadavae::encode_visual(model, features).mu;
  out.recon_visual = cadavae::decode_visual(model, out.latent);
  out.recon_semantic = cadavae::decode_semantic(model, out.latent);
  return out;
}

ScoreMatrix ensemble_scores(const DenseMatrix& features, const cadavae::CadaVaeModel& model,
                            const ClassifierTriple& classifiers, const EnsembleConfig& config) {
  if (config.lambda_x < 0.0 || config.lambda_a < 0.0 || config.latent_weight < 0.0) {
    fail(ErrorCode::kUsage, "ensemble weights must be non-negative");
  }
  const double weights[3] = {config.latent_weight, config.lambda_x, config.lambda_a};
  const double weight_sum = weights[0] + weights[1] + weights[2];
  if (config.renormalize && !(weight_sum > 0.0)) {
    fail(ErrorCode::kUsage, "ensemble weights sum to zero");
  }
  const CalibratedLinearClassifier* members[3] = {&classifiers.get(Space::kLatent),
                                                  &classifiers.get(Space::kReconVisual),
                                                  &classifiers.get(Space::kReconSemantic)};
  const std::size_t C = members[0]->num_classes();
  for (const auto* m : members) {
    if (m->num_classes() != C) fail(ErrorCode::kShape, "ensemble members disagree on |Y|");
  }

  const TestEmbeddings emb = embed_for_test(model, features);
  const DenseMatrix* inputs[3] = {&emb.latent, &emb.recon_visual, &emb.recon_semantic};
  ScoreMatrix total(features.rows(), C);
  for (int k = 0; k < 3; ++k) {
    if (weights[k] == 0.0) continue;
    const ScoreMatrix p = members[k]->probabilities(*inputs[k], config.use_temperature);
    for (std::size_t i = 0; i < total.values.size(); ++i) total.values[i] += weights[k] * p.values[i];
  }
  if (config.renormalize) {
    for (auto& v : total.values) v /= weight_sum;
  }
  return total;
}

std::vector<double> ensemble_predict(std::span<const float> feature,
                                     const cadavae::CadaVaeModel& model,
                                     const ClassifierTriple& classifiers,
                                     const EnsembleConfig& config) {
  const DenseMatrix x(1, feature.size(), std::vector<float>(feature.begin(), feature.end()));
  return ensemble_scores(x, model, classifiers, config).values;
}

std::vector<std::uint32_t> argmax_rows(const ScoreMatrix& scores) {
  std::vector<std::uint32_t> out(scores.rows);
  for (std::size_t r = 0; r < scores.rows; ++r) {
    const auto row = scores.row(r);
    out[r] = static_cast<std::uint32_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

void save_classifier(const CalibratedLinearClassifier& classifier,
                     const std::filesystem::path& dir) {
  dataio::prepare_directory(dir);
  dataio::Json m;
  m["version"] = 1;
  m["kind"] = "classifier";
  m["space"] = latentgen::space_name(classifier.space);
  m["temperature"] = classifier.temperature;
  m["input_dim"] = classifier.input_dim();
  m["num_classes"] = classifier.num_classes();
  dataio::Json tensors = dataio::Json::array();
  dataio::save_matrix(dir, "weight", classifier.weight, tensors);
  dataio::save_matrix(dir, "bias", classifier.bias, tensors);
  m["tensors"] = std::move(tensors);
  dataio::write_json(dir / "manifest.json", m);
}

CalibratedLinearClassifier load_classifier(const std::filesystem::path& dir) {
  const dataio::Json m = dataio::read_json(dir / "manifest.json");
  if (m.value("kind", std::string()) != "classifier") {
    fail(ErrorCode::kFormat, "'" + dir.string() + "' is not a classifier checkpoint");
  }
  CalibratedLinearClassifier c;
  try {
    c.space = latentgen::parse_space(m.at("space").get<std::string>());
    c.temperature = m.at("temperature").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("bad classifier manifest: ") + e.what());
  }
  if (!(c.temperature > 0.0)) fail(ErrorCode::kFormat, "classifier temperature must be positive");
  c.weight = dataio::load_matrix(dir, m, "weight");
  c.bias = dataio::load_matrix(dir, m, "bias");
  if (c.bias.rows() != 1 || c.bias.cols() != c.weight.cols()) {
    fail(ErrorCode::kFormat, "classifier bias does not match weight");
  }
  return c;
}

}  // namespace gzsl::ensemble
