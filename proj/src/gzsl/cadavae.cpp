#include "gzsl/cadavae.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gzsl/error.hpp"
#include "gzsl/tensor_io.hpp"

namespace gzsl::cadavae {

using numerics::Tape;
using numerics::Var;

namespace {

constexpr const char* kNetworkNames[] = {"visual_encoder", "semantic_encoder", "visual_decoder",
                                         "semantic_decoder"};

struct Layers {
  const DenseMatrix& w1;
  const DenseMatrix& b1;
  const DenseMatrix& w2;
  const DenseMatrix& b2;
};

Layers layers(const CadaVaeModel& model, Network net) {
  const auto& p = model.params();
  const std::size_t i = model.first_param(net);
  return {p[i].value, p[i + 1].value, p[i + 2].value, p[i + 3].value};
}

DenseMatrix run(const CadaVaeModel& model, Network net, const DenseMatrix& input) {
  const Layers l = layers(model, net);
  if (input.cols() != l.w1.rows()) {
    fail(ErrorCode::kShape, std::string(kNetworkNames[static_cast<int>(net)]) + " expects " +
                                std::to_string(l.w1.rows()) + " input columns, got " +
                                std::to_string(input.cols()));
  }
  DenseMatrix hidden = numerics::linear_forward(l.w1, l.b1, input, numerics::Activation::kRelu);
  return numerics::linear_forward(l.w2, l.b2, hidden, numerics::Activation::kIdentity);
}

LatentGaussian split(const DenseMatrix& out, std::size_t z) {
  return {numerics::slice_cols(out, 0, z), numerics::slice_cols(out, z, z)};
}

template <typename T>
void read_if(const Json& j, const char* key, T& field) {
  if (j.contains(key)) j.at(key).get_to(field);
}

}  // namespace

CadaVaeModel::CadaVaeModel(std::size_t feature_dim, std::size_t attribute_dim,
                           const NetworkSizes& sizes, std::uint64_t seed)
    : feature_dim_(feature_dim), attribute_dim_(attribute_dim), sizes_(sizes) {
  if (feature_dim == 0 || attribute_dim == 0 || sizes.latent_dim == 0 ||
      sizes.visual_encoder_hidden == 0 || sizes.semantic_encoder_hidden == 0 ||
      sizes.visual_decoder_hidden == 0 || sizes.semantic_decoder_hidden == 0) {
    fail(ErrorCode::kUsage, "model dimensions must all be positive");
  }
  numerics::Rng rng(seed);
  const std::size_t z = sizes.latent_dim;
  const std::size_t shapes[4][3] = {
      {feature_dim, sizes.visual_encoder_hidden, 2 * z},
      {attribute_dim, sizes.semantic_encoder_hidden, 2 * z},
      {z, sizes.visual_decoder_hidden, feature_dim},
      {z, sizes.semantic_decoder_hidden, attribute_dim},
  };
  for (int n = 0; n < 4; ++n) {
    const std::string name = kNetworkNames[n];
    params_.add_linear(name + ".fc1", shapes[n][0], shapes[n][1], rng);
    params_.add_linear(name + ".fc2", shapes[n][1], shapes[n][2], rng);
  }
}

LatentGaussian encode_visual(const CadaVaeModel& model, const DenseMatrix& x) {
  return split(run(model, Network::kVisualEncoder, x), model.latent_dim());
}

LatentGaussian encode_semantic(const CadaVaeModel& model, const DenseMatrix& a) {
  return split(run(model, Network::kSemanticEncoder, a), model.latent_dim());
}

DenseMatrix decode_visual(const CadaVaeModel& model, const DenseMatrix& z) {
  return run(model, Network::kVisualDecoder, z);
}

DenseMatrix decode_semantic(const CadaVaeModel& model, const DenseMatrix& z) {
  return run(model, Network::kSemanticDecoder, z);
}

namespace {

Var mlp_on_tape(Tape& tape, const CadaVaeModel& model, Network net, Var input) {
  const std::size_t i = model.first_param(net);
  const Var hidden = tape.relu(tape.linear(input, tape.parameter(i), tape.parameter(i + 1)));
  return tape.linear(hidden, tape.parameter(i + 2), tape.parameter(i + 3));
}

}  // namespace

EncodedVars encode_on_tape(Tape& tape, const CadaVaeModel& model, Network encoder, Var input) {
  if (encoder != Network::kVisualEncoder && encoder != Network::kSemanticEncoder) {
    fail(ErrorCode::kUsage, "encode_on_tape needs an encoder");
  }
  const Var out = mlp_on_tape(tape, model, encoder, input);
  const std::size_t z = model.latent_dim();
  return {tape.slice_cols(out, 0, z), tape.slice_cols(out, z, z)};
}

Var decode_on_tape(Tape& tape, const CadaVaeModel& model, Network decoder, Var z) {
  if (decoder != Network::kVisualDecoder && decoder != Network::kSemanticDecoder) {
    fail(ErrorCode::kUsage, "decode_on_tape needs a decoder");
  }
  return mlp_on_tape(tape, model, decoder, z);
}

Var vae_term(Tape& tape, const CadaVaeModel& model, Var x, Var a, const EncodedVars& ex,
             const EncodedVars& ea, numerics::Rng& rng, double beta) {
  const Var zx = tape.reparam_sample(ex.mu, ex.logvar, rng);
  const Var za = tape.reparam_sample(ea.mu, ea.logvar, rng);
  const Var recon_x = tape.l1_distance(x, decode_on_tape(tape, model, Network::kVisualDecoder, zx));
  const Var recon_a =
      tape.l1_distance(a, decode_on_tape(tape, model, Network::kSemanticDecoder, za));
  const Var kl = tape.add(tape.gaussian_kl(ex.mu, ex.logvar), tape.gaussian_kl(ea.mu, ea.logvar));
  return tape.add(tape.add(recon_x, recon_a), tape.scale(kl, beta));
}

Var cross_modal_term(Tape& tape, const CadaVaeModel& model, Var x, Var a, const EncodedVars& ex,
                     const EncodedVars& ea) {
  const Var x_from_a = decode_on_tape(tape, model, Network::kVisualDecoder, ea.mu);
  const Var a_from_x = decode_on_tape(tape, model, Network::kSemanticDecoder, ex.mu);
  return tape.add(tape.l1_distance(x, x_from_a), tape.l1_distance(a, a_from_x));
}

Var dist_align_term(Tape& tape, const EncodedVars& ex, const EncodedVars& ea) {
  const Var means = tape.squared_distance(ex.mu, ea.mu);
  const Var sigmas = tape.squared_distance(tape.exp_half(ex.logvar), tape.exp_half(ea.logvar));
  return tape.add(means, sigmas);
}

namespace {

void check_pairs(const CadaVaeModel& model, const DenseMatrix& x, const DenseMatrix& a) {
  if (x.rows() != a.rows()) {
    fail(ErrorCode::kShape, "visual and semantic batches must be row-matched pairs");
  }
  if (x.cols() != model.feature_dim() || a.cols() != model.attribute_dim()) {
    fail(ErrorCode::kShape, "batch dimensions do not match the model");
  }
}

void require_finite(const LossGraph& g, const char* what) {
  if (!std::isfinite(g.value())) {
    fail(ErrorCode::kTrainingDiverged, std::string(what) + " is not finite");
  }
}

}  // namespace

LossGraph vae_loss(const CadaVaeModel& model, const DenseMatrix& x, const DenseMatrix& a,
                   numerics::Rng& rng, double beta) {
  check_pairs(model, x, a);
  LossGraph g{Tape(&model.params())};
  const Var xv = g.tape.input(x);
  const Var av = g.tape.input(a);
  const auto ex = encode_on_tape(g.tape, model, Network::kVisualEncoder, xv);
  const auto ea = encode_on_tape(g.tape, model, Network::kSemanticEncoder, av);
  g.loss = vae_term(g.tape, model, xv, av, ex, ea, rng, beta);
  require_finite(g, "VAE loss");
  return g;
}

LossGraph cross_modal_loss(const CadaVaeModel& model, const DenseMatrix& x, const DenseMatrix& a) {
  check_pairs(model, x, a);
  LossGraph g{Tape(&model.params())};
  const Var xv = g.tape.input(x);
  const Var av = g.tape.input(a);
  const auto ex = encode_on_tape(g.tape, model, Network::kVisualEncoder, xv);
  const auto ea = encode_on_tape(g.tape, model, Network::kSemanticEncoder, av);
  g.loss = cross_modal_term(g.tape, model, xv, av, ex, ea);
  require_finite(g, "cross-modal loss");
  return g;
}

LossGraph dist_align_loss(const LatentGaussian& visual, const LatentGaussian& semantic) {
  numerics::require_same_shape(visual.mu, semantic.mu, "dist_align_loss mu");
  numerics::require_same_shape(visual.logvar, semantic.logvar, "dist_align_loss logvar");
  numerics::require_same_shape(visual.mu, visual.logvar, "dist_align_loss visual");
  LossGraph g{Tape()};
  const EncodedVars ex{g.tape.input(visual.mu, true), g.tape.input(visual.logvar, true)};
  const EncodedVars ea{g.tape.input(semantic.mu, true), g.tape.input(semantic.logvar, true)};
  g.loss = dist_align_term(g.tape, ex, ea);
  require_finite(g, "distribution-alignment loss");
  return g;
}

LossGraph stage1_loss(const CadaVaeModel& model, const DenseMatrix& x, const DenseMatrix& a,
                      numerics::Rng& rng, const LossWeights& w, Stage1Terms* terms) {
  check_pairs(model, x, a);
  LossGraph g{Tape(&model.params())};
  Tape& t = g.tape;
  const Var xv = t.input(x);
  const Var av = t.input(a);
  const auto ex = encode_on_tape(t, model, Network::kVisualEncoder, xv);
  const auto ea = encode_on_tape(t, model, Network::kSemanticEncoder, av);
  const Var vae = vae_term(t, model, xv, av, ex, ea, rng, w.beta);
  const Var cross = cross_modal_term(t, model, xv, av, ex, ea);
  const Var dist = dist_align_term(t, ex, ea);
  g.loss = t.add(t.add(vae, t.scale(cross, w.gamma_cm)), t.scale(dist, w.gamma_da));
  if (terms != nullptr) *terms = Stage1Terms{vae, cross, dist, g.loss};
  return g;
}

double schedule_weight(const WeightSchedule& s, int epoch) {
  const int span = std::max(0, s.end_epoch - s.start_epoch);
  return s.rate * static_cast<double>(std::clamp(epoch - s.start_epoch, 0, span));
}

void validate(const Stage1Config& c) {
  if (c.epochs < 0) fail(ErrorCode::kUsage, "stage-1 epochs must be non-negative");
  if (c.batch_size < 2) fail(ErrorCode::kUsage, "stage-1 batch size must be at least 2");
  if (!(c.learning_rate > 0.0)) fail(ErrorCode::kUsage, "stage-1 learning rate must be positive");
  for (const auto* s : {&c.gamma_cm, &c.gamma_da, &c.beta}) {
    if (s->rate < 0.0 || s->start_epoch > s->end_epoch) {
      fail(ErrorCode::kUsage, "weight schedules need rate >= 0 and start <= end");
    }
  }
}

Stage1Result train_stage1(const dataio::GzslDataset& dataset, const Stage1Config& config) {
  validate(config);
  if (dataset.splits.train.size() < 2) {
    fail(ErrorCode::kUsage, "stage-1 training needs at least two training samples");
  }
  Stage1Result result{CadaVaeModel(dataset.feature_dim(), dataset.attribute_dim(), config.sizes,
                                   numerics::derive_seed(config.seed, 0)),
                      {}};
  CadaVaeModel& model = result.model;
  numerics::Rng rng(numerics::derive_seed(config.seed, 1));
  const numerics::AdamOptions adam{.learning_rate = config.learning_rate};

  dataio::IndexList order = dataset.splits.train;
  const std::size_t n = order.size();
  const std::size_t batch = std::min(config.batch_size, n);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const LossWeights w{schedule_weight(config.beta, epoch),
                        schedule_weight(config.gamma_cm, epoch),
                        schedule_weight(config.gamma_da, epoch)};
    rng.shuffle(order);
    EpochLoss log{epoch, 0, 0, 0, 0, w};
    std::size_t batches = 0;
    for (std::size_t start = 0; start + 2 <= n; start += batch) {
      const std::size_t len = std::min(batch, n - start);
      const std::span<const std::uint32_t> rows(order.data() + start, len);
      std::vector<std::uint32_t> classes(len);
      for (std::size_t k = 0; k < len; ++k) classes[k] = dataset.labels[rows[k]];
      const DenseMatrix x = numerics::select_rows(dataset.features, rows);
      const DenseMatrix a = numerics::select_rows(dataset.attributes, classes);

      Stage1Terms terms{};
      LossGraph g = stage1_loss(model, x, a, rng, w, &terms);
      if (!std::isfinite(g.value())) {
        fail(ErrorCode::kTrainingDiverged,
             "stage-1 loss became non-finite in epoch " + std::to_string(epoch));
      }
      const auto grads = g.backward();
      try {
        numerics::adam_step(model.params(), grads, adam);
      } catch (const Error& e) {
        fail(e.code(), std::string(e.what()) + " in epoch " + std::to_string(epoch));
      }
      log.vae += g.tape.scalar(terms.vae);
      log.cross += g.tape.scalar(terms.cross);
      log.dist += g.tape.scalar(terms.dist);
      log.total += g.value();
      ++batches;
    }
    const double inv = 1.0 / static_cast<double>(std::max<std::size_t>(batches, 1));
    log.vae *= inv;
    log.cross *= inv;
    log.dist *= inv;
    log.total *= inv;
    result.log.push_back(log);
  }
  return result;
}

void to_json(Json& j, const WeightSchedule& s) {
  j = Json{{"rate", s.rate}, {"start_epoch", s.start_epoch}, {"end_epoch", s.end_epoch}};
}

void from_json(const Json& j, WeightSchedule& s) {
  dataio::require_known_keys(j, {"rate", "start_epoch", "end_epoch"}, "weight schedule");
  read_if(j, "rate", s.rate);
  read_if(j, "start_epoch", s.start_epoch);
  read_if(j, "end_epoch", s.end_epoch);
}

void to_json(Json& j, const NetworkSizes& s) {
  j = Json{{"visual_encoder_hidden", s.visual_encoder_hidden},
           {"semantic_encoder_hidden", s.semantic_encoder_hidden},
           {"visual_decoder_hidden", s.visual_decoder_hidden},
           {"semantic_decoder_hidden", s.semantic_decoder_hidden},
           {"latent_dim", s.latent_dim}};
}

void from_json(const Json& j, NetworkSizes& s) {
  dataio::require_known_keys(j,
                             {"visual_encoder_hidden", "semantic_encoder_hidden",
                              "visual_decoder_hidden", "semantic_decoder_hidden", "latent_dim"},
                             "network sizes");
  read_if(j, "visual_encoder_hidden", s.visual_encoder_hidden);
  read_if(j, "semantic_encoder_hidden", s.semantic_encoder_hidden);
  read_if(j, "visual_decoder_hidden", s.visual_decoder_hidden);
  read_if(j, "semantic_decoder_hidden", s.semantic_decoder_hidden);
  read_if(j, "latent_dim", s.latent_dim);
}

void to_json(Json& j, const Stage1Config& c) {
  j = Json{{"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"learning_rate", c.learning_rate},
           {"gamma_cm", c.gamma_cm},
           {"gamma_da", c.gamma_da},
           {"beta", c.beta},
           {"sizes", c.sizes},
           {"seed", c.seed}};
}

void from_json(const Json& j, Stage1Config& c) {
  read_if(j, "epochs", c.epochs);
  read_if(j, "batch_size", c.batch_size);
  read_if(j, "learning_rate", c.learning_rate);
  if (j.contains("gamma_cm")) from_json(j.at("gamma_cm"), c.gamma_cm);
  if (j.contains("gamma_da")) from_json(j.at("gamma_da"), c.gamma_da);
  if (j.contains("beta")) from_json(j.at("beta"), c.beta);
  if (j.contains("sizes")) from_json(j.at("sizes"), c.sizes);
  read_if(j, "seed", c.seed);
}

void save_checkpoint(const CadaVaeModel& model, const Stage1Config& config,
                     const std::filesystem::path& dir) {
  dataio::prepare_directory(dir);
  Json m;
  m["version"] = 1;
  m["kind"] = "cadavae";
  m["dims"] = {{"X", model.feature_dim()}, {"A", model.attribute_dim()},
               {"Z", model.latent_dim()}};
  m["sizes"] = model.sizes();
  m["config"] = config;
  Json tensors = Json::array();
  for (const auto& p : model.params()) dataio::save_matrix(dir, p.name, p.value, tensors);
  m["tensors"] = std::move(tensors);
  dataio::write_json(dir / "manifest.json", m);
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const Json m = dataio::read_json(dir / "manifest.json");
  if (m.value("kind", std::string()) != "cadavae" || m.value("version", 0) != 1) {
    fail(ErrorCode::kFormat, "'" + dir.string() + "' is not a model checkpoint");
  }
  Checkpoint ck;
  try {
    from_json(m.at("config"), ck.config);
    NetworkSizes sizes;
    from_json(m.at("sizes"), sizes);
    ck.model = CadaVaeModel(m.at("dims").at("X").get<std::size_t>(),
                            m.at("dims").at("A").get<std::size_t>(), sizes, 0);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("bad checkpoint manifest: ") + e.what());
  }
  for (auto& p : ck.model.params()) {
    DenseMatrix loaded = dataio::load_matrix(dir, m, p.name);
    numerics::require_same_shape(p.value, loaded, p.name.c_str());
    p.value = std::move(loaded);
  }
  return ck;
}

}  // namespace gzsl::cadavae
