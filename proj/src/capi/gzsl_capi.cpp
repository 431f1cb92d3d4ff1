#include "gzsl/gzsl.h"

#include <exception>
#include <new>
#include <string>

#include "gzsl/cadavae.hpp"
#include "gzsl/dataset.hpp"
#include "gzsl/ensemble.hpp"
#include "gzsl/error.hpp"
#include "gzsl/eval.hpp"
#include "gzsl/pipeline.hpp"

struct gzsl_dataset {
  gzsl::dataio::GzslDataset value;
};

struct gzsl_pipeline {
  gzsl::pipeline::Pipeline value;
  std::string config;
  std::string result;
};

struct gzsl_model {
  gzsl::cadavae::CadaVaeModel model;
  gzsl::ensemble::ClassifierTriple classifiers;
  std::size_t num_classes;
};

namespace {

thread_local std::string last_error;

gzsl_status set_error(gzsl_status status, std::string message) {
  last_error = std::move(message);
  return status;
}

template <typename F>
gzsl_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return GZSL_OK;
  } catch (const gzsl::Error& e) {
    return set_error(static_cast<gzsl_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(GZSL_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(GZSL_ERR_INTERNAL, e.what());
  }
}

#define GZSL_REQUIRE(cond, what) \
  if (!(cond)) return set_error(GZSL_ERR_INVALID_ARGUMENT, what)

gzsl::dataio::Json parse_json(const char* text) {
  if (text == nullptr || *text == '\0') return gzsl::dataio::Json::object();
  try {
    return gzsl::dataio::Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    gzsl::fail(gzsl::ErrorCode::kFormat, std::string("invalid JSON: ") + e.what());
  }
}

std::span<const std::uint32_t> ids(const uint32_t* p, size_t n) { return {p, n}; }

}  // namespace

extern "C" {

const char* gzsl_version(void) { return gzsl::pipeline::kVersion.data(); }

const char* gzsl_last_error(void) { return last_error.c_str(); }

const char* gzsl_status_name(gzsl_status status) {
  switch (status) {
    case GZSL_OK: return "ok";
    case GZSL_ERR_SHAPE: return "shape";
    case GZSL_ERR_IO: return "io";
    case GZSL_ERR_FORMAT: return "format";
    case GZSL_ERR_VALIDATION: return "validation";
    case GZSL_ERR_TRAINING_DIVERGED: return "training-diverged";
    case GZSL_ERR_UNSUPPORTED: return "unsupported";
    case GZSL_ERR_USAGE: return "usage";
    case GZSL_ERR_DOMAIN: return "domain";
    case GZSL_ERR_GENERATION: return "generation";
    case GZSL_ERR_DEGENERATE_TRAINING: return "degenerate-training";
    case GZSL_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case GZSL_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

gzsl_status gzsl_dataset_load(const char* dir, gzsl_dataset** out) {
  GZSL_REQUIRE(dir && out, "dir and out must be non-null");
  *out = nullptr;
  return guarded([&] { *out = new gzsl_dataset{gzsl::dataio::load_gzb(dir)}; });
}

gzsl_status gzsl_dataset_make_synthetic(const char* spec_json, gzsl_dataset** out) {
  GZSL_REQUIRE(out, "out must be non-null");
  *out = nullptr;
  return guarded([&] {
    const auto spec = gzsl::dataio::synthetic_spec_from_json(parse_json(spec_json));
    *out = new gzsl_dataset{gzsl::dataio::make_synthetic(spec)};
  });
}

gzsl_status gzsl_dataset_write(const gzsl_dataset* dataset, const char* dir) {
  GZSL_REQUIRE(dataset && dir, "dataset and dir must be non-null");
  return guarded([&] { gzsl::dataio::write_gzb(dataset->value, dir); });
}

gzsl_status gzsl_dataset_summarize(const gzsl_dataset* dataset, size_t counts[5]) {
  GZSL_REQUIRE(dataset && counts, "dataset and counts must be non-null");
  return guarded([&] {
    const auto c = gzsl::dataio::summarize(dataset->value);
    counts[0] = c.seen_classes;
    counts[1] = c.unseen_classes;
    counts[2] = c.train;
    counts[3] = c.test_seen;
    counts[4] = c.test_unseen;
  });
}

gzsl_status gzsl_dataset_dims(const gzsl_dataset* dataset, size_t dims[4]) {
  GZSL_REQUIRE(dataset && dims, "dataset and dims must be non-null");
  const auto& d = dataset->value;
  dims[0] = d.feature_dim();
  dims[1] = d.attribute_dim();
  dims[2] = d.num_classes();
  dims[3] = d.num_samples();
  last_error.clear();
  return GZSL_OK;
}

void gzsl_dataset_free(gzsl_dataset* dataset) { delete dataset; }

gzsl_status gzsl_pipeline_create(const char* config_json, gzsl_pipeline** out) {
  GZSL_REQUIRE(config_json && out, "config_json and out must be non-null");
  *out = nullptr;
  return guarded([&] {
    gzsl::pipeline::Pipeline p(gzsl::pipeline::config_from_json(parse_json(config_json)));
    std::string config = gzsl::pipeline::to_json(p.config()).dump();
    *out = new gzsl_pipeline{std::move(p), std::move(config), "{}"};
  });
}

gzsl_status gzsl_pipeline_run(gzsl_pipeline* pipeline, const char* command) {
  GZSL_REQUIRE(pipeline && command, "pipeline and command must be non-null");
  return guarded([&] { pipeline->result = pipeline->value.run(command).dump(); });
}

const char* gzsl_pipeline_result(const gzsl_pipeline* pipeline) {
  return pipeline ? pipeline->result.c_str() : "";
}

const char* gzsl_pipeline_config(const gzsl_pipeline* pipeline) {
  return pipeline ? pipeline->config.c_str() : "";
}

void gzsl_pipeline_free(gzsl_pipeline* pipeline) { delete pipeline; }

gzsl_status gzsl_model_load(const char* run_dir, gzsl_model** out) {
  GZSL_REQUIRE(run_dir && out, "run_dir and out must be non-null");
  *out = nullptr;
  return guarded([&] {
    const std::filesystem::path dir(run_dir);
    auto checkpoint = gzsl::cadavae::load_checkpoint(dir / "model");
    gzsl::ensemble::ClassifierTriple t;
    t.latent = gzsl::ensemble::load_classifier(dir / "classifiers" / "z");
    t.recon_visual = gzsl::ensemble::load_classifier(dir / "classifiers" / "xr");
    t.recon_semantic = gzsl::ensemble::load_classifier(dir / "classifiers" / "ar");
    const std::size_t c = t.latent->bias.cols();
    *out = new gzsl_model{std::move(checkpoint.model), std::move(t), c};
  });
}

gzsl_status gzsl_model_dims(const gzsl_model* model, size_t* feature_dim, size_t* num_classes) {
  GZSL_REQUIRE(model && feature_dim && num_classes, "arguments must be non-null");
  *feature_dim = model->model.feature_dim();
  *num_classes = model->num_classes;
  last_error.clear();
  return GZSL_OK;
}

gzsl_status gzsl_model_predict(const gzsl_model* model, const float* feature, size_t feature_dim,
                               double lambda_x, double lambda_a, double* probs,
                               size_t num_classes) {
  GZSL_REQUIRE(model && feature && probs, "arguments must be non-null");
  GZSL_REQUIRE(num_classes == model->num_classes, "num_classes does not match the model");
  return guarded([&] {
    if (feature_dim != model->model.feature_dim()) {
      gzsl::fail(gzsl::ErrorCode::kShape, "feature has " + std::to_string(feature_dim) +
                                              " values, the model expects " +
                                              std::to_string(model->model.feature_dim()));
    }
    if (!(lambda_x >= 0.0 && lambda_a >= 0.0)) {
      gzsl::fail(gzsl::ErrorCode::kUsage, "lambdas must be non-negative");
    }
    gzsl::ensemble::EnsembleConfig config;
    config.lambda_x = lambda_x;
    config.lambda_a = lambda_a;
    const auto p = gzsl::ensemble::ensemble_predict({feature, feature_dim}, model->model,
                                                    model->classifiers, config);
    std::copy(p.begin(), p.end(), probs);
  });
}

void gzsl_model_free(gzsl_model* model) { delete model; }

double gzsl_harmonic_mean(double seen, double unseen) {
  return gzsl::eval::harmonic_mean(seen, unseen);
}

gzsl_status gzsl_per_class_top1(const uint32_t* predictions, const uint32_t* labels, size_t n,
                                const uint32_t* classes, size_t num_classes, double* out) {
  GZSL_REQUIRE(predictions && labels && classes && out, "arguments must be non-null");
  return guarded([&] {
    *out = gzsl::eval::per_class_top1(ids(predictions, n), ids(labels, n),
                                      ids(classes, num_classes));
  });
}

gzsl_status gzsl_ausuc(const double* scores, const uint32_t* labels, size_t n,
                       size_t num_classes, const uint32_t* seen, size_t num_seen,
                       const uint32_t* unseen, size_t num_unseen, size_t n_bias, double* area) {
  GZSL_REQUIRE(scores && labels && seen && unseen && area, "arguments must be non-null");
  return guarded([&] {
    gzsl::ensemble::ScoreMatrix m(n, num_classes);
    std::copy(scores, scores + n * num_classes, m.values.begin());
    *area = gzsl::eval::ausuc(m, ids(labels, n), ids(seen, num_seen), ids(unseen, num_unseen),
                              n_bias)
                .area;
  });
}

}  // extern "C"
