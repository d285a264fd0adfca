#pragma once

#include <cstddef>

#include "hlstm/config.hpp"
#include "hlstm/rng.hpp"
#include "hlstm/tensor.hpp"

namespace hlstm {

/// The four gate matrices of one LSTM unit, each hidden_dim x input_dim.
///
/// Layers store the packed form: a single (4 * hidden_dim) x input_dim
/// matrix with row blocks in the order input (u), forget (f), output (o),
/// memory (v).
struct GateWeights {
    Tensor wu;
    Tensor wf;
    Tensor wo;
    Tensor wv;

    std::size_t hidden_dim() const { return wu.dim(0); }
    std::size_t input_dim() const { return wu.dim(1); }

    Tensor packed() const;
    static GateWeights unpack(const Tensor& packed);
    static GateWeights zeros(std::size_t hidden_dim, std::size_t input_dim);
};

/// Uniform in [-s, s] with s = 1 / sqrt(input_dim), packed layout.
Tensor init_packed_gates(std::size_t hidden_dim, std::size_t input_dim, Rng& rng);

struct LstmState {
    Tensor m;
    Tensor h;
};

/// One transition: gates from W * input, then
///   m_next = f * m + u * v
///   h_next = tanh(o * m_next)   (HiddenFrom::kCurrent)
///   h_next = tanh(o * m)        (HiddenFrom::kPrevious)
/// No bias terms. Throws std::invalid_argument on shape mismatch.
LstmState lstm_step(const Tensor& input, const Tensor& memory, const GateWeights& weights,
                    HiddenFrom mode = HiddenFrom::kCurrent);

struct LstmStepGrads {
    Tensor input;
    Tensor memory;
    GateWeights weights;
};

/// Adjoint of lstm_step for upstream gradients on (m_next, h_next).
LstmStepGrads lstm_step_backward(const Tensor& input, const Tensor& memory, const GateWeights& weights,
                                 const Tensor& dm_next, const Tensor& dh_next, HiddenFrom mode = HiddenFrom::kCurrent);

// Batched cell kernels shared by the pixel and superpixel layers. Columns are
// independent units; `gates` is (4d x n) with the packed row-block order and
// holds activated values after activate_gates. Memories and hiddens are d x n.
namespace cell {

/// Sigmoid on the u, f, o blocks and tanh on the v block, in place.
void activate_gates(Tensor& gates, std::size_t d);

/// Writes m_next and h_next (both d x n).
void forward(const Tensor& gates, const double* m_prev, double* m_next, double* h_next, std::size_t d, std::size_t n,
             HiddenFrom mode);

/// Accumulates into dgates_pre (pre-activation gradient, 4d x n) and writes
/// dm_prev. dm_next or dh_next may be null for a zero upstream gradient.
void backward(const Tensor& gates, const double* m_prev, const double* m_next, const double* h_next,
              const double* dm_next, const double* dh_next, double* dgates_act, double* dm_prev, std::size_t d,
              std::size_t n, HiddenFrom mode);

/// Converts accumulated activated-gate gradients to pre-activation gradients in place.
void gate_activation_backward(const Tensor& gates, Tensor& dgates, std::size_t d);

}  // namespace cell

}  // namespace hlstm
