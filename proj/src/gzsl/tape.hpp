#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gzsl/dense_matrix.hpp"
#include "gzsl/parameter_set.hpp"
#include "gzsl/rng.hpp"

namespace gzsl::numerics {

// The closed set of operations the model needs. Anything else is rejected
// by backward().
enum class NodeKind : std::uint8_t {
  kInput,
  kParameter,
  kLinear,
  kRelu,
  kSigmoid,
  kSliceCols,
  kExpHalf,
  kReparamSample,
  kL1Distance,
  kSquaredDistance,
  kGaussianKl,
  kSoftmaxCrossEntropy,
  kScale,
  kAdd,
};

struct Var {
  std::size_t id;
};

// Records a forward pass over DenseMatrix values and replays it in reverse
// to produce exact gradients. Scalar-valued nodes (the losses, kScale, kAdd)
// are 1x1 matrices. Every loss node averages over the batch (rows).
class Tape {
 public:
  explicit Tape(const ParameterSet* params = nullptr) : params_(params) {}

  Var input(DenseMatrix value, bool requires_grad = false);
  Var parameter(std::size_t index);

  Var linear(Var x, Var weight, Var bias);
  Var relu(Var x);
  Var sigmoid(Var x);
  Var slice_cols(Var x, std::size_t begin, std::size_t count);
  // exp(x / 2): standard deviation from log-variance.
  Var exp_half(Var x);
  // mu + exp(logvar / 2) * eps with eps drawn from rng (row-major order).
  Var reparam_sample(Var mu, Var logvar, Rng& rng);

  // mean_i sum_j |a_ij - b_ij|
  Var l1_distance(Var a, Var b);
  // mean_i sum_j (a_ij - b_ij)^2
  Var squared_distance(Var a, Var b);
  // mean_i KL(N(mu_i, diag exp(logvar_i)) || N(0, I))
  Var gaussian_kl(Var mu, Var logvar);
  // mean_i -log softmax(logits_i)[label_i]
  Var softmax_cross_entropy(Var logits, std::span<const std::uint32_t> labels);

  Var scale(Var x, double factor);
  Var add(Var a, Var b);

  // Low-level escape hatch used by tests to exercise the unsupported-node path.
  Var record(NodeKind kind, std::vector<std::size_t> inputs, DenseMatrix value);

  const DenseMatrix& value(Var v) const { return value_of(v.id); }
  double scalar(Var v) const;

  // Reverse sweep from a 1x1 loss. Returns one gradient per parameter in the
  // bound ParameterSet (zero where unreachable). Gradients for non-parameter
  // nodes are available via grad() afterwards.
  Gradients backward(Var loss);
  const DenseMatrix& grad(Var v) const { return nodes_.at(v.id).grad; }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    NodeKind kind;
    std::vector<std::size_t> inputs;
    DenseMatrix value;
    DenseMatrix grad;
    DenseMatrix aux;  // eps for kReparamSample
    std::vector<std::uint32_t> labels;
    std::size_t param_index = 0;
    std::size_t offset = 0;
    double factor = 1.0;
    bool requires_grad = false;
  };

  Var push(Node node);
  const Node& node(Var v) const { return nodes_.at(v.id); }
  const DenseMatrix& value_of(std::size_t id) const;
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  void accumulate(std::size_t id, const DenseMatrix& g);

  const ParameterSet* params_;
  std::vector<Node> nodes_;
};

}  // namespace gzsl::numerics
