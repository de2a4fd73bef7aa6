#include "driftlab/graph.hpp"

#include <Eigen/Core>

#include <cmath>

#include "driftlab/numkern.hpp"

namespace driftlab {

namespace {
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
Eigen::Map<const RowMat> map(const Tensor& t) {
  return {t.data(), (Eigen::Index)t.rows(), (Eigen::Index)t.cols()};
}
Eigen::Map<RowMat> map(Tensor& t) {
  return {t.data(), (Eigen::Index)t.rows(), (Eigen::Index)t.cols()};
}
}  // namespace

NodeId Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return (NodeId)(nodes_.size() - 1);
}

NodeId Tape::input(Tensor value) {
  value.require_finite("tape input");
  Node n;
  n.needs_grad = true;
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Tape::constant(Tensor value) {
  value.require_finite("tape constant");
  Node n;
  n.needs_grad = false;
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  Node n;
  n.op = Op::kMatmul;
  n.a = a;
  n.b = b;
  n.needs_grad = at(a).needs_grad || at(b).needs_grad;
  n.value = driftlab::matmul(at(a).value, at(b).value);
  return push(std::move(n));
}

NodeId Tape::matmul_nt(NodeId a, NodeId b) {
  Node n;
  n.op = Op::kMatmulNT;
  n.a = a;
  n.b = b;
  n.needs_grad = at(a).needs_grad || at(b).needs_grad;
  n.value = driftlab::matmul_nt(at(a).value, at(b).value);
  return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
  Node n;
  n.op = Op::kAdd;
  n.a = a;
  n.b = b;
  n.needs_grad = at(a).needs_grad || at(b).needs_grad;
  n.value = driftlab::add(at(a).value, at(b).value);
  return push(std::move(n));
}

NodeId Tape::add_rowvec(NodeId a, NodeId bias) {
  Node n;
  n.op = Op::kAddRowvec;
  n.a = a;
  n.b = bias;
  n.needs_grad = at(a).needs_grad || at(bias).needs_grad;
  n.value = driftlab::add_rowvec(at(a).value, at(bias).value);
  return push(std::move(n));
}

NodeId Tape::relu(NodeId a) {
  Node n;
  n.op = Op::kRelu;
  n.a = a;
  n.needs_grad = at(a).needs_grad;
  n.value = driftlab::relu(at(a).value);
  return push(std::move(n));
}

NodeId Tape::softmax_rows(NodeId a) {
  Node n;
  n.op = Op::kSoftmaxRows;
  n.a = a;
  n.needs_grad = at(a).needs_grad;
  n.value = driftlab::softmax_rows(at(a).value);
  return push(std::move(n));
}

NodeId Tape::l2_normalize_rows(NodeId a, double eps) {
  Node n;
  n.op = Op::kL2NormRows;
  n.a = a;
  n.param = eps;
  n.needs_grad = at(a).needs_grad;
  n.value = driftlab::l2_normalize_rows(at(a).value, eps);
  return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double s) {
  Node n;
  n.op = Op::kScale;
  n.a = a;
  n.param = s;
  n.needs_grad = at(a).needs_grad;
  n.value = driftlab::scale(at(a).value, s);
  return push(std::move(n));
}

NodeId Tape::sum(NodeId a) {
  Node n;
  n.op = Op::kSum;
  n.a = a;
  n.needs_grad = at(a).needs_grad;
  double s = 0.0;
  for (double v : at(a).value.vec()) s += v;
  n.value = Tensor::scalar(s);
  return push(std::move(n));
}

NodeId Tape::sum_squares(NodeId a) {
  Node n;
  n.op = Op::kSumSquares;
  n.a = a;
  n.needs_grad = at(a).needs_grad;
  double s = 0.0;
  for (double v : at(a).value.vec()) s += v * v;
  n.value = Tensor::scalar(s);
  return push(std::move(n));
}

NodeId Tape::nce_diag(NodeId s, double temp) {
  const Tensor& S = at(s).value;
  if (S.rows() != S.cols())
    throw DimensionError("nce_diag: similarity matrix must be square, got " + S.shape_str());
  if (temp <= 0.0) throw ContractError("nce_diag: temperature must be positive");
  const std::size_t W = S.rows();
  Node n;
  n.op = Op::kNceDiag;
  n.a = s;
  n.param = temp;
  n.needs_grad = at(s).needs_grad;

  // Row direction and column direction share the diagonal term. One exp pass
  // suffices: with E_ij = exp(S_ij/T - m_i) and m_i the row max, the column
  // softmax is E_ij * exp(m_i - M) renormalized per column, M = max_i m_i.
  // E and the per-row/per-column scale vectors are kept for backward.
  Tensor e_mat = Tensor::uninitialized({W, W});
  Tensor scales({3, W});  // rows: 1/rowsum, exp(m_i - M), 1/colsum
  const double inv_temp = 1.0 / temp;
  const auto iw = (Eigen::Index)W;
  auto src = map(S);
  auto em = map(e_mat);
  Eigen::ArrayXd m_row(iw);
  double loss = 0.0;
  for (Eigen::Index r = 0; r < iw; ++r) {
    const double mx = src.row(r).maxCoeff() * inv_temp;
    em.row(r) = (src.row(r).array() * inv_temp - mx).exp();
    const double sum = em.row(r).sum();
    m_row[r] = mx;
    scales.at(0, (std::size_t)r) = 1.0 / sum;
    loss += mx + std::log(sum);
  }
  const double m_all = m_row.maxCoeff();
  Eigen::ArrayXd csum = Eigen::ArrayXd::Zero(iw);
  for (Eigen::Index r = 0; r < iw; ++r) {
    const double f = std::exp(m_row[r] - m_all);
    scales.at(1, (std::size_t)r) = f;
    csum += em.row(r).transpose().array() * f;
  }
  for (Eigen::Index c = 0; c < iw; ++c) {
    loss += std::log(csum[c]) + m_all;
    scales.at(2, (std::size_t)c) = 1.0 / csum[c];
  }
  for (std::size_t i = 0; i < W; ++i) loss -= 2.0 * S.at(i, i) * inv_temp;
  n.value = Tensor::scalar(loss / (2.0 * (double)W));
  if (n.needs_grad) {
    n.saved1 = std::move(e_mat);
    n.saved2 = std::move(scales);
  }
  return push(std::move(n));
}

double Tape::scalar_value(NodeId id) const {
  const Tensor& v = value(id);
  if (v.size() != 1) throw ContractError("scalar_value: node is not scalar, shape " + v.shape_str());
  return v[0];
}

void Tape::accumulate(NodeId id, const Tensor& g) {
  Node& n = at(id);
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
    return;
  }
  Eigen::Map<Eigen::ArrayXd>(n.grad.data(), (Eigen::Index)n.grad.size()) +=
      Eigen::Map<const Eigen::ArrayXd>(g.data(), (Eigen::Index)g.size());
}

void Tape::accumulate(NodeId id, Tensor&& g) {
  Node& n = at(id);
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) {
    n.grad = std::move(g);
    return;
  }
  accumulate(id, (const Tensor&)g);
}

void Tape::backward(NodeId loss) {
  const Tensor& lv = at(loss).value;
  if (lv.size() != 1) throw ContractError("backward: loss must be scalar, shape " + lv.shape_str());
  for (auto& n : nodes_) n.grad = Tensor();
  at(loss).grad = Tensor::scalar(1.0);

  // Strict reverse topological order: nodes only reference earlier nodes, so
  // a node's gradient is complete before it is propagated.
  for (NodeId id = loss; id >= 0; --id) {
    Node& n = at(id);
    if (!n.needs_grad || n.grad.size() == 0) continue;
    const Tensor& g = n.grad;
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kMatmul:
        if (at(n.a).needs_grad) accumulate(n.a, driftlab::matmul_nt(g, at(n.b).value));
        if (at(n.b).needs_grad) accumulate(n.b, driftlab::matmul_tn(at(n.a).value, g));
        break;
      case Op::kMatmulNT:
        if (at(n.a).needs_grad) accumulate(n.a, driftlab::matmul(g, at(n.b).value));
        if (at(n.b).needs_grad) accumulate(n.b, driftlab::matmul_tn(g, at(n.a).value));
        break;
      case Op::kAdd:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::kAddRowvec: {
        accumulate(n.a, g);
        if (at(n.b).needs_grad) {
          Tensor db({1, g.cols()});
          map(db).row(0) = map(g).colwise().sum();
          accumulate(n.b, db);
        }
        break;
      }
      case Op::kRelu: {
        Tensor dx = g;
        const Tensor& x = at(n.a).value;
        for (std::size_t i = 0; i < dx.size(); ++i)
          if (x[i] <= 0.0) dx[i] = 0.0;
        accumulate(n.a, std::move(dx));
        break;
      }
      case Op::kSoftmaxRows: {
        const Tensor& y = n.value;
        Tensor dx = Tensor::uninitialized({y.rows(), y.cols()});
        auto ym = map(y);
        auto gm = map(g);
        auto dm = map(dx);
        for (Eigen::Index r = 0; r < dm.rows(); ++r) {
          double dot = gm.row(r).cwiseProduct(ym.row(r)).sum();
          dm.row(r) = (ym.row(r).array() * (gm.row(r).array() - dot)).matrix();
        }
        accumulate(n.a, std::move(dx));
        break;
      }
      case Op::kL2NormRows: {
        const Tensor& x = at(n.a).value;
        const Tensor& y = n.value;
        const double eps = n.param;
        Tensor dx = g;
        auto xm = map(x);
        auto ym = map(y);
        auto dm = map(dx);
        for (Eigen::Index r = 0; r < dm.rows(); ++r) {
          double nn = xm.row(r).norm();
          if (nn < eps) {
            dm.row(r) /= eps;
          } else {
            double dot = dm.row(r).cwiseProduct(ym.row(r)).sum();
            dm.row(r) = (dm.row(r) - dot * ym.row(r)) / nn;
          }
        }
        accumulate(n.a, std::move(dx));
        break;
      }
      case Op::kScale:
        accumulate(n.a, driftlab::scale(g, n.param));
        break;
      case Op::kSum: {
        Tensor dx(at(n.a).value.shape(), g[0]);
        accumulate(n.a, std::move(dx));
        break;
      }
      case Op::kSumSquares: {
        Tensor dx = driftlab::scale(at(n.a).value, 2.0 * g[0]);
        accumulate(n.a, std::move(dx));
        break;
      }
      case Op::kNceDiag: {
        const std::size_t W = n.saved1.rows();
        const auto iw = (Eigen::Index)W;
        const double c = g[0] / (2.0 * (double)W * n.param);
        // dS_ij = c * E_ij * (1/rowsum_i + f_i/colsum_j) - 2c on the diagonal,
        // i.e. row softmax plus column softmax reconstructed from E.
        Tensor dS = Tensor::uninitialized({W, W});
        auto em = map(n.saved1);
        auto dst = map(dS);
        Eigen::Map<const Eigen::ArrayXd> irs(n.saved2.data(), iw);
        Eigen::Map<const Eigen::ArrayXd> f(n.saved2.data() + W, iw);
        Eigen::Map<const Eigen::ArrayXd> ics(n.saved2.data() + 2 * W, iw);
        for (Eigen::Index r = 0; r < iw; ++r)
          dst.row(r) = (em.row(r).transpose().array() * (ics * (c * f[r]) + c * irs[r])).transpose();
        for (std::size_t i = 0; i < W; ++i) dS.at(i, i) -= 2.0 * c;
        accumulate(n.a, std::move(dS));
        break;
      }
    }
  }
}

}  // namespace driftlab
