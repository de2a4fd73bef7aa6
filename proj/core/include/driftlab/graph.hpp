#pragma once

#include <cstddef>
#include <vector>

#include "driftlab/tensor.hpp"

namespace driftlab {

/// Node handle into a Tape. Plain index; valid only for the tape it came from.
using NodeId = int;

/// Reverse-mode gradient tape over dense tensors.
///
/// Nodes are appended in execution order, so the record is topologically
/// ordered by construction and backward() walks it strictly in reverse. A
/// tape is built fresh for every training step and owns all intermediate
/// values. Single writer; nothing here is shared between workers.
class Tape {
 public:
  /// Leaf that receives a gradient (parameters, differentiable inputs).
  NodeId input(Tensor value);
  /// Leaf that never receives a gradient (data, teacher outputs).
  NodeId constant(Tensor value);

  NodeId matmul(NodeId a, NodeId b);
  /// a * b^T (cross-similarity without materializing transposes).
  NodeId matmul_nt(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId add_rowvec(NodeId a, NodeId bias);
  NodeId relu(NodeId a);
  NodeId softmax_rows(NodeId a);
  NodeId l2_normalize_rows(NodeId a, double eps = 1e-12);
  NodeId scale(NodeId a, double s);
  NodeId sum(NodeId a);
  NodeId sum_squares(NodeId a);
  /// Symmetrized InfoNCE from a square similarity-logit matrix S:
  /// mean over rows of -log softmax(S_i/temp) at the diagonal, averaged over
  /// the row direction and the column direction. Scalar output.
  NodeId nce_diag(NodeId s, double temp);

  const Tensor& value(NodeId id) const { return nodes_[(std::size_t)id].value; }
  const Tensor& grad(NodeId id) const { return nodes_[(std::size_t)id].grad; }
  double scalar_value(NodeId id) const;

  /// Seed d(loss)/d(loss) = 1 and accumulate gradients into every
  /// grad-carrying ancestor. `loss` must be scalar (1x1).
  void backward(NodeId loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op {
    kLeaf,
    kMatmul,
    kMatmulNT,
    kAdd,
    kAddRowvec,
    kRelu,
    kSoftmaxRows,
    kL2NormRows,
    kScale,
    kSum,
    kSumSquares,
    kNceDiag,
  };

  struct Node {
    Op op = Op::kLeaf;
    NodeId a = -1;
    NodeId b = -1;
    double param = 0.0;  // scale factor, eps, or temperature
    bool needs_grad = false;
    Tensor value;
    Tensor grad;
    // Forward-pass byproducts kept for the backward pass (for nce_diag: the
    // shifted exponentials and the row/column renormalization scales).
    Tensor saved1, saved2;
  };

  NodeId push(Node n);
  Node& at(NodeId id) { return nodes_[(std::size_t)id]; }
  void accumulate(NodeId id, const Tensor& g);
  void accumulate(NodeId id, Tensor&& g);

  std::vector<Node> nodes_;
};

}  // namespace driftlab
