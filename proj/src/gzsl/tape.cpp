#include "gzsl/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gzsl/error.hpp"

namespace gzsl::numerics {

namespace {

DenseMatrix scalar_matrix(double v) { return DenseMatrix(1, 1, static_cast<float>(v)); }

void require_scalar(const DenseMatrix& m, const char* what) {
  if (m.rows() != 1 || m.cols() != 1) {
    fail(ErrorCode::kShape, std::string(what) + " expects a 1x1 operand");
  }
}

double inv_rows(const DenseMatrix& m) {
  return m.rows() == 0 ? 0.0 : 1.0 / static_cast<double>(m.rows());
}

}  // namespace

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

const DenseMatrix& Tape::value_of(std::size_t id) const {
  const Node& n = nodes_.at(id);
  if (n.kind == NodeKind::kParameter) return (*params_)[n.param_index].value;
  return n.value;
}

Var Tape::input(DenseMatrix value, bool requires_grad) {
  Node n{.kind = NodeKind::kInput, .value = std::move(value)};
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

Var Tape::parameter(std::size_t index) {
  if (params_ == nullptr || index >= params_->size()) {
    fail(ErrorCode::kUsage, "tape parameter index " + std::to_string(index) + " is not bound");
  }
  Node n{.kind = NodeKind::kParameter};
  n.param_index = index;
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::linear(Var x, Var weight, Var bias) {
  Node n{.kind = NodeKind::kLinear, .inputs = {x.id, weight.id, bias.id}};
  n.value = linear_forward(value(weight), value(bias), value(x), Activation::kIdentity);
  n.requires_grad = needs_grad(x.id) || needs_grad(weight.id) || needs_grad(bias.id);
  return push(std::move(n));
}

Var Tape::relu(Var x) {
  DenseMatrix out = value(x);
  for (auto& v : out.values()) v = v > 0.0f ? v : 0.0f;
  Node n{.kind = NodeKind::kRelu, .inputs = {x.id}, .value = std::move(out)};
  n.requires_grad = needs_grad(x.id);
  return push(std::move(n));
}

Var Tape::sigmoid(Var x) {
  DenseMatrix out = value(x);
  for (auto& v : out.values()) v = 1.0f / (1.0f + std::exp(-v));
  Node n{.kind = NodeKind::kSigmoid, .inputs = {x.id}, .value = std::move(out)};
  n.requires_grad = needs_grad(x.id);
  return push(std::move(n));
}

Var Tape::slice_cols(Var x, std::size_t begin, std::size_t count) {
  Node n{.kind = NodeKind::kSliceCols, .inputs = {x.id}};
  n.value = numerics::slice_cols(value(x), begin, count);
  n.offset = begin;
  n.requires_grad = needs_grad(x.id);
  return push(std::move(n));
}

Var Tape::exp_half(Var x) {
  DenseMatrix out = value(x);
  for (auto& v : out.values()) v = std::exp(0.5f * v);
  Node n{.kind = NodeKind::kExpHalf, .inputs = {x.id}, .value = std::move(out)};
  n.requires_grad = needs_grad(x.id);
  return push(std::move(n));
}

Var Tape::reparam_sample(Var mu, Var logvar, Rng& rng) {
  const DenseMatrix& m = value(mu);
  const DenseMatrix& lv = value(logvar);
  require_same_shape(m, lv, "reparam_sample");
  DenseMatrix eps = standard_normal(m.rows(), m.cols(), rng);
  DenseMatrix z(m.rows(), m.cols());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double sigma = std::exp(0.5 * static_cast<double>(lv.values()[i]));
    z.values()[i] = static_cast<float>(m.values()[i] + sigma * eps.values()[i]);
  }
  Node n{.kind = NodeKind::kReparamSample, .inputs = {mu.id, logvar.id}, .value = std::move(z)};
  n.aux = std::move(eps);
  n.requires_grad = needs_grad(mu.id) || needs_grad(logvar.id);
  return push(std::move(n));
}

Var Tape::l1_distance(Var a, Var b) {
  const DenseMatrix& x = value(a);
  const DenseMatrix& y = value(b);
  require_same_shape(x, y, "l1_distance");
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    total += std::fabs(static_cast<double>(x.values()[i]) - y.values()[i]);
  }
  Node n{.kind = NodeKind::kL1Distance, .inputs = {a.id, b.id},
         .value = scalar_matrix(total * inv_rows(x))};
  n.requires_grad = needs_grad(a.id) || needs_grad(b.id);
  return push(std::move(n));
}

Var Tape::squared_distance(Var a, Var b) {
  const DenseMatrix& x = value(a);
  const DenseMatrix& y = value(b);
  require_same_shape(x, y, "squared_distance");
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x.values()[i]) - y.values()[i];
    total += d * d;
  }
  Node n{.kind = NodeKind::kSquaredDistance, .inputs = {a.id, b.id},
         .value = scalar_matrix(total * inv_rows(x))};
  n.requires_grad = needs_grad(a.id) || needs_grad(b.id);
  return push(std::move(n));
}

Var Tape::gaussian_kl(Var mu, Var logvar) {
  const DenseMatrix& m = value(mu);
  const DenseMatrix& lv = value(logvar);
  require_same_shape(m, lv, "gaussian_kl");
  double total = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double mi = m.values()[i];
    const double li = lv.values()[i];
    total += -0.5 * (1.0 + li - mi * mi - std::exp(li));
  }
  Node n{.kind = NodeKind::kGaussianKl, .inputs = {mu.id, logvar.id},
         .value = scalar_matrix(total * inv_rows(m))};
  n.requires_grad = needs_grad(mu.id) || needs_grad(logvar.id);
  return push(std::move(n));
}

Var Tape::softmax_cross_entropy(Var logits, std::span<const std::uint32_t> labels) {
  const DenseMatrix& z = value(logits);
  if (labels.size() != z.rows()) {
    fail(ErrorCode::kShape, "softmax_cross_entropy: " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(z.rows()) + " rows");
  }
  double total = 0.0;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    if (labels[r] >= z.cols()) {
      fail(ErrorCode::kShape, "softmax_cross_entropy: label " + std::to_string(labels[r]) +
                                  " outside " + std::to_string(z.cols()) + " classes");
    }
    const auto row = z.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (float v : row) sum += std::exp(static_cast<double>(v) - mx);
    total += mx + std::log(sum) - row[labels[r]];
  }
  Node n{.kind = NodeKind::kSoftmaxCrossEntropy, .inputs = {logits.id},
         .value = scalar_matrix(total * inv_rows(z))};
  n.labels.assign(labels.begin(), labels.end());
  n.requires_grad = needs_grad(logits.id);
  return push(std::move(n));
}

Var Tape::scale(Var x, double factor) {
  require_scalar(value(x), "scale");
  Node n{.kind = NodeKind::kScale, .inputs = {x.id}, .value = scalar_matrix(scalar(x) * factor)};
  n.factor = factor;
  n.requires_grad = needs_grad(x.id);
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  require_scalar(value(a), "add");
  require_scalar(value(b), "add");
  Node n{.kind = NodeKind::kAdd, .inputs = {a.id, b.id},
         .value = scalar_matrix(scalar(a) + scalar(b))};
  n.requires_grad = needs_grad(a.id) || needs_grad(b.id);
  return push(std::move(n));
}

Var Tape::record(NodeKind kind, std::vector<std::size_t> inputs, DenseMatrix value) {
  bool grad = false;
  for (auto id : inputs) {
    if (id >= nodes_.size()) fail(ErrorCode::kUsage, "record: dangling input");
    grad = grad || nodes_[id].requires_grad;
  }
  Node n{.kind = kind, .inputs = std::move(inputs), .value = std::move(value)};
  n.requires_grad = grad;
  return push(std::move(n));
}

double Tape::scalar(Var v) const {
  const DenseMatrix& m = value(v);
  require_scalar(m, "scalar");
  return m(0, 0);
}

void Tape::accumulate(std::size_t id, const DenseMatrix& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.empty()) {
    n.grad = g;
    return;
  }
  auto dst = n.grad.values();
  const auto src = g.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Gradients Tape::backward(Var loss) {
  require_scalar(value(loss), "backward");
  for (auto& n : nodes_) n.grad = DenseMatrix();
  Gradients out = params_ ? params_->zero_gradients() : Gradients{};

  nodes_[loss.id].grad = DenseMatrix(1, 1, 1.0f);
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.grad.empty() || !n.requires_grad) continue;
    const DenseMatrix g = n.grad;

    switch (n.kind) {
      case NodeKind::kInput:
        break;

      case NodeKind::kParameter: {
        auto dst = out[n.param_index].values();
        const auto src = g.values();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        break;
      }

      case NodeKind::kLinear: {
        const std::size_t x = n.inputs[0], w = n.inputs[1], b = n.inputs[2];
        if (needs_grad(x)) accumulate(x, matmul_nt(g, value_of(w)));
        if (needs_grad(w)) accumulate(w, matmul_tn(value_of(x), g));
        if (needs_grad(b)) {
          DenseMatrix db(1, g.cols());
          for (std::size_t r = 0; r < g.rows(); ++r) {
            for (std::size_t c = 0; c < g.cols(); ++c) db(0, c) += g(r, c);
          }
          accumulate(b, db);
        }
        break;
      }

      case NodeKind::kRelu: {
        DenseMatrix dx = g;
        const auto y = n.value.values();
        auto d = dx.values();
        for (std::size_t i = 0; i < d.size(); ++i) {
          if (!(y[i] > 0.0f)) d[i] = 0.0f;
        }
        accumulate(n.inputs[0], dx);
        break;
      }

      case NodeKind::kSigmoid: {
        DenseMatrix dx = g;
        const auto y = n.value.values();
        auto d = dx.values();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] *= y[i] * (1.0f - y[i]);
        accumulate(n.inputs[0], dx);
        break;
      }

      case NodeKind::kSliceCols: {
        const DenseMatrix& src = value_of(n.inputs[0]);
        DenseMatrix dx(src.rows(), src.cols());
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < g.cols(); ++c) dx(r, n.offset + c) = g(r, c);
        }
        accumulate(n.inputs[0], dx);
        break;
      }

      case NodeKind::kExpHalf: {
        DenseMatrix dx = g;
        const auto y = n.value.values();
        auto d = dx.values();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] *= 0.5f * y[i];
        accumulate(n.inputs[0], dx);
        break;
      }

      case NodeKind::kReparamSample: {
        const DenseMatrix& lv = value_of(n.inputs[1]);
        accumulate(n.inputs[0], g);
        if (needs_grad(n.inputs[1])) {
          DenseMatrix dlv = g;
          auto d = dlv.values();
          for (std::size_t i = 0; i < d.size(); ++i) {
            const double sigma = std::exp(0.5 * static_cast<double>(lv.values()[i]));
            d[i] = static_cast<float>(d[i] * 0.5 * sigma * n.aux.values()[i]);
          }
          accumulate(n.inputs[1], dlv);
        }
        break;
      }

      case NodeKind::kL1Distance: {
        const DenseMatrix& a = value_of(n.inputs[0]);
        const DenseMatrix& b = value_of(n.inputs[1]);
        const double scale = g(0, 0) * inv_rows(a);
        DenseMatrix da(a.rows(), a.cols());
        for (std::size_t i = 0; i < da.size(); ++i) {
          const float diff = a.values()[i] - b.values()[i];
          const double s = diff > 0.0f ? 1.0 : (diff < 0.0f ? -1.0 : 0.0);
          da.values()[i] = static_cast<float>(s * scale);
        }
        if (needs_grad(n.inputs[1])) {
          DenseMatrix db = da;
          for (auto& v : db.values()) v = -v;
          accumulate(n.inputs[1], db);
        }
        accumulate(n.inputs[0], da);
        break;
      }

      case NodeKind::kSquaredDistance: {
        const DenseMatrix& a = value_of(n.inputs[0]);
        const DenseMatrix& b = value_of(n.inputs[1]);
        const double scale = 2.0 * g(0, 0) * inv_rows(a);
        DenseMatrix da(a.rows(), a.cols());
        for (std::size_t i = 0; i < da.size(); ++i) {
          da.values()[i] = static_cast<float>(
              scale * (static_cast<double>(a.values()[i]) - b.values()[i]));
        }
        if (needs_grad(n.inputs[1])) {
          DenseMatrix db = da;
          for (auto& v : db.values()) v = -v;
          accumulate(n.inputs[1], db);
        }
        accumulate(n.inputs[0], da);
        break;
      }

      case NodeKind::kGaussianKl: {
        const DenseMatrix& mu = value_of(n.inputs[0]);
        const DenseMatrix& lv = value_of(n.inputs[1]);
        const double scale = g(0, 0) * inv_rows(mu);
        DenseMatrix dmu(mu.rows(), mu.cols());
        DenseMatrix dlv(mu.rows(), mu.cols());
        for (std::size_t i = 0; i < mu.size(); ++i) {
          dmu.values()[i] = static_cast<float>(scale * mu.values()[i]);
          dlv.values()[i] = static_cast<float>(
              scale * 0.5 * (std::exp(static_cast<double>(lv.values()[i])) - 1.0));
        }
        accumulate(n.inputs[0], dmu);
        accumulate(n.inputs[1], dlv);
        break;
      }

      case NodeKind::kSoftmaxCrossEntropy: {
        const DenseMatrix& z = value_of(n.inputs[0]);
        const double scale = g(0, 0) * inv_rows(z);
        DenseMatrix dz(z.rows(), z.cols());
        for (std::size_t r = 0; r < z.rows(); ++r) {
          const auto row = z.row(r);
          const double mx = *std::max_element(row.begin(), row.end());
          double sum = 0.0;
          for (float v : row) sum += std::exp(static_cast<double>(v) - mx);
          for (std::size_t c = 0; c < z.cols(); ++c) {
            const double p = std::exp(static_cast<double>(row[c]) - mx) / sum;
            const double target = c == n.labels[r] ? 1.0 : 0.0;
            dz(r, c) = static_cast<float>(scale * (p - target));
          }
        }
        accumulate(n.inputs[0], dz);
        break;
      }

      case NodeKind::kScale:
        accumulate(n.inputs[0], scalar_matrix(g(0, 0) * n.factor));
        break;

      case NodeKind::kAdd:
        accumulate(n.inputs[0], g);
        accumulate(n.inputs[1], g);
        break;

      default:
        fail(ErrorCode::kUnsupported, "backward: unsupported node kind " +
                                          std::to_string(static_cast<int>(n.kind)));
    }
  }
  return out;
}

}  // namespace gzsl::numerics
