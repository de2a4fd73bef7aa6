#include "driftlab/numkern.hpp"

#include <Eigen/Core>

#include <cmath>

namespace driftlab {

using MatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using MutMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

namespace {
MatMap map(const Tensor& t) { return MatMap(t.data(), (Eigen::Index)t.rows(), (Eigen::Index)t.cols()); }
MutMap map(Tensor& t) { return MutMap(t.data(), (Eigen::Index)t.rows(), (Eigen::Index)t.cols()); }

void require_2d(const Tensor& t, const char* who) {
  if (t.ndim() != 2) throw DimensionError(std::string(who) + ": expected 2-D tensor, got " + t.shape_str());
}
}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner dimensions disagree, " + a.shape_str() + " vs " + b.shape_str());
  Tensor out = Tensor::uninitialized({a.rows(), b.cols()});
  map(out).noalias() = map(a) * map(b);
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul_nt");
  require_2d(b, "matmul_nt");
  if (a.cols() != b.cols())
    throw DimensionError("matmul_nt: inner dimensions disagree, " + a.shape_str() + " vs " + b.shape_str());
  Tensor out = Tensor::uninitialized({a.rows(), b.rows()});
  map(out).noalias() = map(a) * map(b).transpose();
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul_tn");
  require_2d(b, "matmul_tn");
  if (a.rows() != b.rows())
    throw DimensionError("matmul_tn: inner dimensions disagree, " + a.shape_str() + " vs " + b.shape_str());
  Tensor out = Tensor::uninitialized({a.cols(), b.cols()});
  map(out).noalias() = map(a).transpose() * map(b);
  return out;
}

Tensor softmax_rows(const Tensor& x) {
  require_2d(x, "softmax_rows");
  Tensor out = Tensor::uninitialized({x.rows(), x.cols()});
  auto src = map(x);
  auto m = map(out);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const double mx = src.row(r).maxCoeff();
    row = (src.row(r).array() - mx).exp();
    row /= row.sum();
  }
  return out;
}

Tensor l2_normalize_rows(const Tensor& x, double eps) {
  require_2d(x, "l2_normalize_rows");
  if (eps <= 0.0) throw ContractError("l2_normalize_rows: eps must be positive");
  Tensor out = x;
  auto m = map(out);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    double n = m.row(r).norm();
    m.row(r) /= (n < eps) ? eps : n;
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.vec()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw DimensionError("add: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Tensor add_rowvec(const Tensor& a, const Tensor& bias) {
  require_2d(a, "add_rowvec");
  if (bias.rows() != 1 || bias.cols() != a.cols())
    throw DimensionError("add_rowvec: bias " + bias.shape_str() + " vs matrix " + a.shape_str());
  Tensor out = a;
  auto m = map(out);
  m.rowwise() += MatMap(bias.data(), 1, (Eigen::Index)bias.cols()).row(0);
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out = a;
  for (double& v : out.vec()) v *= s;
  return out;
}

double grad_check(const std::function<double(const Tensor&)>& f, const Tensor& x,
                  const Tensor& analytic_grad, double h) {
  if (h < 1e-7 || h > 1e-3) throw ContractError("grad_check: h outside [1e-7, 1e-3]");
  if (!x.same_shape(analytic_grad))
    throw DimensionError("grad_check: gradient shape " + analytic_grad.shape_str() +
                         " vs input " + x.shape_str());
  double worst = 0.0;
  Tensor xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double orig = xp[i];
    xp[i] = orig + h;
    double fp = f(xp);
    xp[i] = orig - h;
    double fm = f(xp);
    xp[i] = orig;
    double numeric = (fp - fm) / (2.0 * h);
    double a = analytic_grad[i];
    double rel = std::fabs(a - numeric) / std::max(1.0, std::fabs(a));
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace driftlab
