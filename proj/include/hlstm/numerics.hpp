#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "hlstm/tensor.hpp"

namespace hlstm {

/// Probabilities are clamped to this floor before taking a logarithm.
inline constexpr double kProbabilityFloor = 1e-12;

double sigmoid(double x);

/// Softmax of a rank-1 tensor, computed with max-subtraction.
Tensor softmax(const Tensor& logits);
void softmax_inplace(std::span<double> values);

/// -log(max(probs[target], kProbabilityFloor)).
double cross_entropy(std::span<const double> probs, std::size_t target);
double cross_entropy(const Tensor& probs, std::size_t target);

/// Gradient of cross_entropy(softmax(logits), target) with respect to the
/// logits, given the already computed probabilities. Zero when the target
/// probability sits under the floor, which matches the clamped loss.
void softmax_cross_entropy_grad(std::span<const double> probs, std::size_t target, double scale,
                                std::span<double> dlogits);

/// Central differences (f(x + eps e_i) - f(x - eps e_i)) / 2 eps for every
/// coordinate of x. Throws std::domain_error if f returns a non-finite value.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x, double eps);

/// |a - b| / max(|a|, |b|, floor).
double relative_error(double a, double b, double floor = 1e-6);

// Matrix products on rank-2 row-major tensors. The *_acc variants add into
// `out`, which must already have the result shape.
Tensor matmul(const Tensor& a, const Tensor& b);
void matmul_acc(const Tensor& a, const Tensor& b, Tensor& out);     // out += a b
void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& out);  // out += a^T b
void matmul_nt_acc(const Tensor& a, const Tensor& b, Tensor& out);  // out += a b^T

/// y = W x for a rank-2 W and a rank-1 x.
Tensor matvec(const Tensor& w, const Tensor& x);

}  // namespace hlstm
