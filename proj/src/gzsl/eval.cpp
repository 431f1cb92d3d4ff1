#include "gzsl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "gzsl/error.hpp"

namespace gzsl::eval {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_lengths(std::span<const std::uint32_t> predictions,
                   std::span<const std::uint32_t> labels) {
  if (predictions.size() != labels.size()) {
    fail(ErrorCode::kShape, "predictions and labels differ in length");
  }
}

// Running per-class correct counts, averaged over classes with samples.
struct ClassTally {
  std::map<std::uint32_t, std::size_t> totals;
  std::map<std::uint32_t, std::size_t> correct;

  double mean_fraction() const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [cls, total] : totals) {
      if (total == 0) continue;
      const auto it = correct.find(cls);
      sum += static_cast<double>(it == correct.end() ? 0 : it->second) / static_cast<double>(total);
      ++n;
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
  }
};

}  // namespace

std::map<std::uint32_t, double> per_class_accuracy(std::span<const std::uint32_t> predictions,
                                                   std::span<const std::uint32_t> labels,
                                                   std::span<const std::uint32_t> class_set) {
  check_lengths(predictions, labels);
  const std::set<std::uint32_t> classes(class_set.begin(), class_set.end());
  std::map<std::uint32_t, std::size_t> totals, correct;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!classes.contains(labels[i])) {
      fail(ErrorCode::kUsage, "label " + std::to_string(labels[i]) + " is not in the class set");
    }
    ++totals[labels[i]];
    if (predictions[i] == labels[i]) ++correct[labels[i]];
  }
  std::map<std::uint32_t, double> out;
  for (const auto& [cls, total] : totals) {
    out[cls] = 100.0 * static_cast<double>(correct[cls]) / static_cast<double>(total);
  }
  return out;
}

double per_class_top1(std::span<const std::uint32_t> predictions,
                      std::span<const std::uint32_t> labels,
                      std::span<const std::uint32_t> class_set) {
  if (labels.empty()) fail(ErrorCode::kUsage, "per_class_top1: empty evaluation set");
  const auto acc = per_class_accuracy(predictions, labels, class_set);
  double sum = 0.0;
  for (const auto& [cls, a] : acc) sum += a;
  return sum / static_cast<double>(acc.size());
}

double harmonic_mean(double seen, double unseen) {
  const double s = seen + unseen;
  return s == 0.0 ? 0.0 : 2.0 * seen * unseen / s;
}

AusucCurve ausuc(const ScoreMatrix& scores, std::span<const std::uint32_t> labels,
                 std::span<const std::uint32_t> seen_classes,
                 std::span<const std::uint32_t> unseen_classes, std::size_t n_bias) {
  if (seen_classes.empty() || unseen_classes.empty()) {
    fail(ErrorCode::kUsage, "ausuc needs non-empty seen and unseen class sets");
  }
  if (labels.size() != scores.rows) fail(ErrorCode::kShape, "ausuc: label count mismatch");
  const std::set<std::uint32_t> seen(seen_classes.begin(), seen_classes.end());
  const std::set<std::uint32_t> unseen(unseen_classes.begin(), unseen_classes.end());
  for (auto c : seen) {
    if (c >= scores.cols || unseen.contains(c)) fail(ErrorCode::kUsage, "ausuc: bad class sets");
  }
  for (auto c : unseen) {
    if (c >= scores.cols) fail(ErrorCode::kUsage, "ausuc: bad class sets");
  }

  // Within each domain the argmax does not depend on the bias, so every sample
  // flips from its best seen class to its best unseen class exactly once, when
  // the bias crosses gap = best_seen - best_unseen.
  struct Sample {
    double gap;
    bool seen_label;
    std::uint32_t label;
    bool seen_pick_correct;
    bool unseen_pick_correct;
  };
  std::vector<Sample> samples;
  ClassTally seen_tally, unseen_tally;
  for (std::size_t r = 0; r < scores.rows; ++r) {
    const auto row = scores.row(r);
    std::uint32_t best_s = 0, best_u = 0;
    double vs = -kInf, vu = -kInf;
    for (auto c : seen) {
      if (row[c] > vs) { vs = row[c]; best_s = c; }
    }
    for (auto c : unseen) {
      if (row[c] > vu) { vu = row[c]; best_u = c; }
    }
    const bool is_seen = seen.contains(labels[r]);
    if (!is_seen && !unseen.contains(labels[r])) {
      fail(ErrorCode::kUsage, "ausuc: label " + std::to_string(labels[r]) + " in neither domain");
    }
    samples.push_back({vs - vu, is_seen, labels[r], best_s == labels[r], best_u == labels[r]});
    (is_seen ? seen_tally : unseen_tally).totals[labels[r]] += 1;
  }
  if (seen_tally.totals.empty() || unseen_tally.totals.empty()) {
    fail(ErrorCode::kUsage, "ausuc needs test samples from both domains");
  }

  std::vector<double> gaps;
  gaps.reserve(samples.size());
  double g = 0.0;
  for (const auto& s : samples) {
    gaps.push_back(s.gap);
    g = std::max(g, std::fabs(s.gap));
  }
  std::sort(gaps.begin(), gaps.end());
  gaps.erase(std::unique(gaps.begin(), gaps.end()), gaps.end());

  std::vector<double> biases;
  for (std::size_t k = 0; k + 1 < gaps.size(); ++k) biases.push_back(0.5 * (gaps[k] + gaps[k + 1]));
  if (n_bias == 1 || g == 0.0) {
    biases.push_back(0.0);
  } else {
    for (std::size_t k = 0; k < n_bias; ++k) {
      biases.push_back(-g + 2.0 * g * static_cast<double>(k) / static_cast<double>(n_bias - 1));
    }
  }
  biases.push_back(-kInf);
  biases.push_back(kInf);
  std::sort(biases.begin(), biases.end());
  biases.erase(std::unique(biases.begin(), biases.end()), biases.end());

  // Sweep biases upwards; a sample predicts its seen pick while bias < gap.
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return samples[a].gap < samples[b].gap; });

  for (const auto& s : samples) {
    if (s.seen_pick_correct) (s.seen_label ? seen_tally : unseen_tally).correct[s.label] += 1;
  }
  AusucCurve curve;
  std::size_t next = 0;
  for (double b : biases) {
    while (next < order.size() && samples[order[next]].gap <= b) {
      const Sample& s = samples[order[next]];
      ClassTally& t = s.seen_label ? seen_tally : unseen_tally;
      if (s.seen_pick_correct) t.correct[s.label] -= 1;
      if (s.unseen_pick_correct) t.correct[s.label] += 1;
      ++next;
    }
    curve.bias.push_back(b);
    curve.seen.push_back(seen_tally.mean_fraction());
    curve.unseen.push_back(unseen_tally.mean_fraction());
  }

  for (std::size_t k = 0; k + 1 < curve.bias.size(); ++k) {
    curve.area += (curve.unseen[k + 1] - curve.unseen[k]) * (curve.seen[k] + curve.seen[k + 1]) / 2.0;
  }
  return curve;
}

Metric parse_metric(std::string_view name) {
  if (name == "l2") return Metric::kL2;
  if (name == "l1") return Metric::kL1;
  if (name == "cosine") return Metric::kCosine;
  fail(ErrorCode::kUsage, "unknown distance metric '" + std::string(name) + "'");
}

std::string_view metric_name(Metric metric) {
  switch (metric) {
    case Metric::kL2: return "l2";
    case Metric::kL1: return "l1";
    case Metric::kCosine: return "cosine";
  }
  return "?";
}

ScoreMatrix class_distance_matrix(const numerics::DenseMatrix& per_class, Metric metric) {
  const std::size_t C = per_class.rows();
  if (C < 2) fail(ErrorCode::kUsage, "distance matrix needs at least two classes");
  ScoreMatrix out(C, C);
  for (std::size_t i = 0; i < C; ++i) {
    for (std::size_t j = i + 1; j < C; ++j) {
      const auto a = per_class.row(i);
      const auto b = per_class.row(j);
      double d = 0.0;
      if (metric == Metric::kCosine) {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
          dot += static_cast<double>(a[k]) * b[k];
          na += static_cast<double>(a[k]) * a[k];
          nb += static_cast<double>(b[k]) * b[k];
        }
        d = (na == 0.0 || nb == 0.0) ? 0.0 : 1.0 - dot / std::sqrt(na * nb);
      } else {
        for (std::size_t k = 0; k < a.size(); ++k) {
          const double diff = static_cast<double>(a[k]) - b[k];
          d += metric == Metric::kL2 ? diff * diff : std::fabs(diff);
        }
        if (metric == Metric::kL2) d = std::sqrt(d);
      }
      out(i, j) = d;
      out(j, i) = d;
    }
  }
  return out;
}

void write_distance_csv(const std::filesystem::path& path, const ScoreMatrix& matrix,
                        std::span<const std::uint32_t> class_ids,
                        std::span<const std::uint32_t> seen_classes) {
  if (class_ids.size() != matrix.rows || matrix.rows != matrix.cols) {
    fail(ErrorCode::kShape, "distance CSV: class ids do not match the matrix");
  }
  const std::set<std::uint32_t> seen(seen_classes.begin(), seen_classes.end());
  std::ostringstream out;
  out.precision(9);
  out << "class,domain";
  for (auto c : class_ids) out << ',' << c;
  out << '\n';
  for (std::size_t i = 0; i < matrix.rows; ++i) {
    out << class_ids[i] << ',' << (seen.contains(class_ids[i]) ? "seen" : "unseen");
    for (std::size_t j = 0; j < matrix.cols; ++j) out << ',' << matrix(i, j);
    out << '\n';
  }
  dataio::write_text(path, out.str());
}

Mode parse_mode(std::string_view name) {
  if (name == "ensemble") return Mode::kEnsemble;
  if (name == "tau1") return Mode::kTau1;
  if (name == "z-only") return Mode::kLatentOnly;
  if (name == "xr-only") return Mode::kReconVisualOnly;
  if (name == "ar-only") return Mode::kReconSemanticOnly;
  fail(ErrorCode::kUsage, "unknown evaluation mode '" + std::string(name) + "'");
}

std::string_view mode_name(Mode mode) {
  switch (mode) {
    case Mode::kEnsemble: return "ensemble";
    case Mode::kTau1: return "tau1";
    case Mode::kLatentOnly: return "z-only";
    case Mode::kReconVisualOnly: return "xr-only";
    case Mode::kReconSemanticOnly: return "ar-only";
  }
  return "?";
}

std::string_view mode_label(Mode mode) {
  switch (mode) {
    case Mode::kEnsemble: return "MCADA-VAE";
    case Mode::kTau1: return "MCADA-VAE (tau=1)";
    case Mode::kLatentOnly: return "z-CADA-VAE";
    case Mode::kReconVisualOnly: return "xr-CADA-VAE";
    case Mode::kReconSemanticOnly: return "ar-CADA-VAE";
  }
  return "?";
}

ensemble::EnsembleConfig config_for_mode(Mode mode, const ensemble::EnsembleConfig& base) {
  ensemble::EnsembleConfig c = base;
  switch (mode) {
    case Mode::kEnsemble:
      c.use_temperature = true;
      break;
    case Mode::kTau1:
      c.use_temperature = false;
      break;
    case Mode::kLatentOnly:
      c.latent_weight = 1.0;
      c.lambda_x = 0.0;
      c.lambda_a = 0.0;
      break;
    case Mode::kReconVisualOnly:
      c.latent_weight = 0.0;
      c.lambda_x = 1.0;
      c.lambda_a = 0.0;
      break;
    case Mode::kReconSemanticOnly:
      c.latent_weight = 0.0;
      c.lambda_x = 0.0;
      c.lambda_a = 1.0;
      break;
  }
  return c;
}

EvalReport evaluate(const cadavae::CadaVaeModel& model,
                    const ensemble::ClassifierTriple& classifiers,
                    const ensemble::EnsembleConfig& config, const dataio::GzslDataset& dataset,
                    const EvalOptions& options) {
  const auto& splits = dataset.splits;
  if (splits.test_seen.empty() || splits.test_unseen.empty()) {
    fail(ErrorCode::kUsage, "evaluation needs both test_seen and test_unseen samples");
  }
  std::vector<std::uint32_t> rows = splits.test_seen;
  rows.insert(rows.end(), splits.test_unseen.begin(), splits.test_unseen.end());
  std::vector<std::uint32_t> labels(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = dataset.labels[rows[i]];

  const ScoreMatrix scores =
      ensemble::ensemble_scores(numerics::select_rows(dataset.features, rows), model, classifiers,
                                config);
  const auto predictions = ensemble::argmax_rows(scores);
  const std::size_t n_seen = splits.test_seen.size();
  const std::span<const std::uint32_t> pred(predictions), lab(labels);

  EvalReport report;
  report.config = config;
  report.temperatures[0] = classifiers.get(latentgen::Space::kLatent).temperature;
  report.temperatures[1] = classifiers.get(latentgen::Space::kReconVisual).temperature;
  report.temperatures[2] = classifiers.get(latentgen::Space::kReconSemantic).temperature;
  report.seen = per_class_top1(pred.first(n_seen), lab.first(n_seen), dataset.seen_classes);
  report.unseen =
      per_class_top1(pred.subspan(n_seen), lab.subspan(n_seen), dataset.unseen_classes);
  report.harmonic = harmonic_mean(report.seen, report.unseen);
  report.per_class = per_class_accuracy(pred.first(n_seen), lab.first(n_seen), dataset.seen_classes);
  for (const auto& [c, a] :
       per_class_accuracy(pred.subspan(n_seen), lab.subspan(n_seen), dataset.unseen_classes)) {
    report.per_class[c] = a;
  }
  if (options.with_ausuc) {
    report.ausuc = ausuc(scores, labels, dataset.seen_classes, dataset.unseen_classes,
                         options.n_bias);
  }
  return report;
}

dataio::Json to_json(const EvalReport& r) {
  dataio::Json j;
  j["seed"] = r.seed;
  j["weights"] = {{"z", r.config.latent_weight}, {"xr", r.config.lambda_x},
                  {"ar", r.config.lambda_a}};
  j["renormalize"] = r.config.renormalize;
  j["use_temperature"] = r.config.use_temperature;
  j["temperatures"] = {{"z", r.temperatures[0]}, {"xr", r.temperatures[1]},
                       {"ar", r.temperatures[2]}};
  j["seen"] = r.seen;
  j["unseen"] = r.unseen;
  j["H"] = r.harmonic;
  dataio::Json per_class = dataio::Json::object();
  for (const auto& [c, a] : r.per_class) per_class[std::to_string(c)] = a;
  j["per_class"] = std::move(per_class);
  if (r.ausuc) {
    dataio::Json a;
    a["ausuc"] = 100.0 * r.ausuc->area;
    dataio::Json bias = dataio::Json::array();
    for (double b : r.ausuc->bias) {
      if (std::isinf(b)) {
        bias.push_back(b > 0 ? "inf" : "-inf");
      } else {
        bias.push_back(b);
      }
    }
    a["bias"] = std::move(bias);
    a["unseen"] = r.ausuc->unseen;
    a["seen"] = r.ausuc->seen;
    j["ausuc"] = std::move(a);
  }
  return j;
}

}  // namespace gzsl::eval
