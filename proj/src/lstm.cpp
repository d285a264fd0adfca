#include "hlstm/lstm.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "hlstm/numerics.hpp"

namespace hlstm {

Tensor GateWeights::packed() const {
    const std::size_t d = hidden_dim();
    const std::size_t in = input_dim();
    for (const Tensor* w : {&wu, &wf, &wo, &wv}) {
        if (w->rank() != 2 || w->dim(0) != d || w->dim(1) != in) {
            throw std::invalid_argument("GateWeights: the four gate matrices must share one shape");
        }
    }
    Tensor out({4 * d, in});
    std::size_t offset = 0;
    for (const Tensor* w : {&wu, &wf, &wo, &wv}) {
        for (std::size_t i = 0; i < w->size(); ++i) out[offset + i] = (*w)[i];
        offset += w->size();
    }
    return out;
}

GateWeights GateWeights::unpack(const Tensor& packed) {
    if (packed.rank() != 2 || packed.dim(0) % 4 != 0 || packed.dim(0) == 0) {
        throw std::invalid_argument("packed gate weights must be (4d x input_dim), got " + shape_string(packed.shape()));
    }
    const std::size_t d = packed.dim(0) / 4;
    const std::size_t in = packed.dim(1);
    GateWeights w = zeros(d, in);
    std::size_t offset = 0;
    for (Tensor* t : {&w.wu, &w.wf, &w.wo, &w.wv}) {
        for (std::size_t i = 0; i < t->size(); ++i) (*t)[i] = packed[offset + i];
        offset += t->size();
    }
    return w;
}

GateWeights GateWeights::zeros(std::size_t hidden_dim, std::size_t input_dim) {
    return {Tensor({hidden_dim, input_dim}), Tensor({hidden_dim, input_dim}), Tensor({hidden_dim, input_dim}),
            Tensor({hidden_dim, input_dim})};
}

Tensor init_packed_gates(std::size_t hidden_dim, std::size_t input_dim, Rng& rng) {
    Tensor w({4 * hidden_dim, input_dim});
    const double s = 1.0 / std::sqrt(static_cast<double>(input_dim));
    for (double& v : w.data()) v = rng.uniform(-s, s);
    return w;
}

namespace cell {

void activate_gates(Tensor& gates, std::size_t d) {
    const std::size_t n = gates.dim(1);
    double* g = gates.raw();
    const std::size_t sig = 3 * d * n;
    for (std::size_t i = 0; i < sig; ++i) g[i] = sigmoid(g[i]);
    for (std::size_t i = sig; i < 4 * d * n; ++i) g[i] = std::tanh(g[i]);
}

void forward(const Tensor& gates, const double* m_prev, double* m_next, double* h_next, std::size_t d, std::size_t n,
             HiddenFrom mode) {
    const double* u = gates.raw();
    const double* f = u + d * n;
    const double* o = f + d * n;
    const double* v = o + d * n;
    for (std::size_t i = 0; i < d * n; ++i) {
        const double m = f[i] * m_prev[i] + u[i] * v[i];
        m_next[i] = m;
        h_next[i] = std::tanh(o[i] * (mode == HiddenFrom::kCurrent ? m : m_prev[i]));
    }
}

void backward(const Tensor& gates, const double* m_prev, const double* m_next, const double* h_next,
              const double* dm_next, const double* dh_next, double* dgates_act, double* dm_prev, std::size_t d,
              std::size_t n, HiddenFrom mode) {
    const std::size_t block = d * n;
    const double* u = gates.raw();
    const double* f = u + block;
    const double* o = f + block;
    const double* v = o + block;
    double* du = dgates_act;
    double* df = du + block;
    double* dout = df + block;
    double* dv = dout + block;
    for (std::size_t i = 0; i < block; ++i) {
        const double dh = dh_next ? dh_next[i] : 0.0;
        const double ds = dh * (1.0 - h_next[i] * h_next[i]);
        double dsum = dm_next ? dm_next[i] : 0.0;
        double dm_extra = 0.0;
        if (mode == HiddenFrom::kCurrent) {
            dout[i] += ds * m_next[i];
            dsum += ds * o[i];
        } else {
            dout[i] += ds * m_prev[i];
            dm_extra = ds * o[i];
        }
        df[i] += dsum * m_prev[i];
        du[i] += dsum * v[i];
        dv[i] += dsum * u[i];
        dm_prev[i] = dsum * f[i] + dm_extra;
    }
}

void gate_activation_backward(const Tensor& gates, Tensor& dgates, std::size_t d) {
    const std::size_t n = gates.dim(1);
    const double* g = gates.raw();
    double* dg = dgates.raw();
    const std::size_t sig = 3 * d * n;
    for (std::size_t i = 0; i < sig; ++i) dg[i] *= g[i] * (1.0 - g[i]);
    for (std::size_t i = sig; i < 4 * d * n; ++i) dg[i] *= 1.0 - g[i] * g[i];
}

}  // namespace cell

namespace {

void check_step_shapes(const Tensor& input, const Tensor& memory, const Tensor& packed) {
    const std::size_t d = packed.dim(0) / 4;
    if (input.size() != packed.dim(1)) {
        throw std::invalid_argument("lstm_step: input length " + std::to_string(input.size()) +
                                    " does not match weight input_dim " + std::to_string(packed.dim(1)));
    }
    if (memory.size() != d) {
        throw std::invalid_argument("lstm_step: memory length " + std::to_string(memory.size()) +
                                    " does not match hidden_dim " + std::to_string(d));
    }
}

}  // namespace

LstmState lstm_step(const Tensor& input, const Tensor& memory, const GateWeights& weights, HiddenFrom mode) {
    const Tensor packed = weights.packed();
    check_step_shapes(input, memory, packed);
    const std::size_t d = weights.hidden_dim();
    Tensor gates = matvec(packed, input).reshaped({4 * d, 1});
    cell::activate_gates(gates, d);
    LstmState out{Tensor({d}), Tensor({d})};
    cell::forward(gates, memory.raw(), out.m.raw(), out.h.raw(), d, 1, mode);
    return out;
}

LstmStepGrads lstm_step_backward(const Tensor& input, const Tensor& memory, const GateWeights& weights,
                                 const Tensor& dm_next, const Tensor& dh_next, HiddenFrom mode) {
    const Tensor packed = weights.packed();
    check_step_shapes(input, memory, packed);
    const std::size_t d = weights.hidden_dim();
    if (dm_next.size() != d || dh_next.size() != d) {
        throw std::invalid_argument("lstm_step_backward: upstream gradient length must equal hidden_dim");
    }
    Tensor gates = matvec(packed, input).reshaped({4 * d, 1});
    cell::activate_gates(gates, d);
    Tensor m_next({d});
    Tensor h_next({d});
    cell::forward(gates, memory.raw(), m_next.raw(), h_next.raw(), d, 1, mode);

    Tensor dgates({4 * d, 1});
    Tensor dmemory({d});
    cell::backward(gates, memory.raw(), m_next.raw(), h_next.raw(), dm_next.raw(), dh_next.raw(), dgates.raw(),
                   dmemory.raw(), d, 1, mode);
    cell::gate_activation_backward(gates, dgates, d);

    Tensor dpacked({4 * d, input.size()});
    matmul_nt_acc(dgates, input.reshaped({input.size(), 1}), dpacked);
    Tensor dinput({input.size(), 1});
    matmul_tn_acc(packed, dgates, dinput);
    return {dinput.reshaped({input.size()}), std::move(dmemory), GateWeights::unpack(dpacked)};
}

}  // namespace hlstm
