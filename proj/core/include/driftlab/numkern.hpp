#pragma once

#include <functional>

#include "driftlab/tensor.hpp"

namespace driftlab {

// Value-level dense kernels. The gradient tape (graph.hpp) reuses these for
// its forward pass; the teacher branch and the evaluation code call them
// directly since neither records gradients.

/// Textbook matrix product a[m x k] * b[k x n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// a[m x k] * b^T where b is [n x k]; avoids materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
/// a^T[k x m] * b[k x n] -> [m x n].
Tensor matmul_tn(const Tensor& a, const Tensor& b);

/// Row-wise softmax with max-subtraction. Rows sum to 1 within 1e-12.
Tensor softmax_rows(const Tensor& x);

/// Scale each row to unit Euclidean norm. Rows with norm < eps are scaled by
/// 1/eps instead (degenerate rows pass through shrunk, they do not error).
Tensor l2_normalize_rows(const Tensor& x, double eps = 1e-12);

Tensor relu(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
/// Add a [1 x n] bias row to every row of a [m x n] matrix.
Tensor add_rowvec(const Tensor& a, const Tensor& bias);
Tensor scale(const Tensor& a, double s);

/// max over coordinates of |analytic - central difference| / max(1, |analytic|).
///
/// `f` must return a scalar; `analytic_grad` is the gradient to verify,
/// shape-equal to x. h must lie in [1e-7, 1e-3].
double grad_check(const std::function<double(const Tensor&)>& f, const Tensor& x,
                  const Tensor& analytic_grad, double h);

}  // namespace driftlab
