#include "hlstm/numerics.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hlstm {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap view(const Tensor& t) {
    if (t.rank() != 2) throw std::invalid_argument("matrix op expects rank-2 tensor, got " + shape_string(t.shape()));
    return ConstMap(t.raw(), static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.dim(1)));
}

MutMap view(Tensor& t) {
    if (t.rank() != 2) throw std::invalid_argument("matrix op expects rank-2 tensor, got " + shape_string(t.shape()));
    return MutMap(t.raw(), static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.dim(1)));
}

void check_out(const Tensor& out, std::size_t rows, std::size_t cols, const char* what) {
    if (out.rank() != 2 || out.dim(0) != rows || out.dim(1) != cols) {
        throw std::invalid_argument(std::string(what) + ": output shape " + shape_string(out.shape()) +
                                    " expected [" + std::to_string(rows) + ", " + std::to_string(cols) + "]");
    }
}

}  // namespace

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void softmax_inplace(std::span<double> values) {
    if (values.empty()) throw std::invalid_argument("softmax of empty input");
    const double peak = *std::max_element(values.begin(), values.end());
    double total = 0.0;
    for (double& v : values) {
        v = std::exp(v - peak);
        total += v;
    }
    for (double& v : values) v /= total;
}

Tensor softmax(const Tensor& logits) {
    Tensor out = logits;
    softmax_inplace(out.data());
    return out;
}

double cross_entropy(std::span<const double> probs, std::size_t target) {
    if (target >= probs.size()) {
        throw std::out_of_range("cross_entropy target " + std::to_string(target) + " out of range for " +
                                std::to_string(probs.size()) + " classes");
    }
    return -std::log(std::max(probs[target], kProbabilityFloor));
}

double cross_entropy(const Tensor& probs, std::size_t target) { return cross_entropy(probs.data(), target); }

void softmax_cross_entropy_grad(std::span<const double> probs, std::size_t target, double scale,
                                std::span<double> dlogits) {
    if (probs[target] <= kProbabilityFloor) return;
    for (std::size_t k = 0; k < probs.size(); ++k) dlogits[k] += scale * probs[k];
    dlogits[target] -= scale;
}

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x, double eps) {
    Tensor grad = Tensor::zeros_like(x);
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double original = probe[i];
        probe[i] = original + eps;
        const double up = f(probe);
        probe[i] = original - eps;
        const double down = f(probe);
        probe[i] = original;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw std::domain_error("finite_diff_grad: non-finite function value at coordinate " + std::to_string(i));
        }
        grad[i] = (up - down) / (2.0 * eps);
    }
    return grad;
}

double relative_error(double a, double b, double floor) {
    const double denom = std::max({std::abs(a), std::abs(b), floor});
    return std::abs(a - b) / denom;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    Tensor out({a.dim(0), b.dim(1)});
    matmul_acc(a, b, out);
    return out;
}

void matmul_acc(const Tensor& a, const Tensor& b, Tensor& out) {
    if (a.dim(1) != b.dim(0)) throw std::invalid_argument("matmul: inner dimension mismatch");
    check_out(out, a.dim(0), b.dim(1), "matmul");
    view(out).noalias() += view(a) * view(b);
}

void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& out) {
    if (a.dim(0) != b.dim(0)) throw std::invalid_argument("matmul_tn: inner dimension mismatch");
    check_out(out, a.dim(1), b.dim(1), "matmul_tn");
    view(out).noalias() += view(a).transpose() * view(b);
}

void matmul_nt_acc(const Tensor& a, const Tensor& b, Tensor& out) {
    if (a.dim(1) != b.dim(1)) throw std::invalid_argument("matmul_nt: inner dimension mismatch");
    check_out(out, a.dim(0), b.dim(0), "matmul_nt");
    view(out).noalias() += view(a) * view(b).transpose();
}

Tensor matvec(const Tensor& w, const Tensor& x) {
    if (w.rank() != 2 || x.size() != w.dim(1)) {
        throw std::invalid_argument("matvec: " + shape_string(w.shape()) + " times " + shape_string(x.shape()));
    }
    Tensor out({w.dim(0)});
    const std::size_t cols = w.dim(1);
    for (std::size_t r = 0; r < w.dim(0); ++r) {
        double acc = 0.0;
        const double* row = w.raw() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
        out[r] = acc;
    }
    return out;
}

}  // namespace hlstm
