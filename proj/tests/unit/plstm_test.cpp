#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "hlstm/lstm.hpp"
#include "hlstm/plstm.hpp"
#include "test_util.hpp"

using namespace hlstm;

namespace {

PixelLayerState random_state(std::size_t d, std::size_t h, std::size_t w, Rng& rng) {
    PixelLayerState s = PixelLayerState::zeros(d, h, w);
    for (std::size_t n = 0; n < 8; ++n) {
        s.h_spatial[n] = test::random_tensor({d, h, w}, rng);
        s.m_spatial[n] = test::random_tensor({d, h, w}, rng);
    }
    s.h_depth = test::random_tensor({d, h, w}, rng);
    s.m_depth = test::random_tensor({d, h, w}, rng);
    return s;
}

std::vector<Tensor*> fields(PixelLayerState& s) {
    std::vector<Tensor*> out;
    for (auto& t : s.h_spatial) out.push_back(&t);
    for (auto& t : s.m_spatial) out.push_back(&t);
    out.push_back(&s.h_depth);
    out.push_back(&s.m_depth);
    return out;
}

double probe_dot(PixelLayerState& probe, PixelLayerState& s) {
    const auto a = fields(probe);
    const auto b = fields(s);
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) total += dot(*a[i], *b[i]);
    return total;
}

// Offsets in gather order, written out independently of the library table.
constexpr int kDy[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
constexpr int kDx[8] = {0, 1, 1, 1, 0, -1, -1, -1};

}  // namespace

TEST(Gather, InputLength) {
    Rng rng(1);
    const PixelLayerState s = random_state(64, 3, 3, rng);
    EXPECT_EQ(gather_input_state(s, 1, 1).size(), 576u);
}

TEST(Gather, CornerPadding) {
    Rng rng(2);
    const PixelLayerState s = random_state(2, 4, 4, rng);
    const Tensor in = gather_input_state(s, 0, 0);
    std::size_t nonzero_slots = 0;
    for (std::size_t n = 0; n < 8; ++n) {
        const bool nonzero = in[2 * n] != 0.0 || in[2 * n + 1] != 0.0;
        nonzero_slots += nonzero;
        const bool inside = kDy[n] >= 0 && kDx[n] >= 0;
        EXPECT_EQ(nonzero, inside) << "slot " << n;
    }
    EXPECT_EQ(nonzero_slots, 3u);
}

TEST(Gather, ExhaustiveIndexOracle) {
    const std::size_t d = 2;
    PixelLayerState s = PixelLayerState::zeros(d, 3, 3);
    for (std::size_t n = 0; n < 8; ++n) {
        for (std::size_t c = 0; c < d; ++c) {
            for (std::size_t y = 0; y < 3; ++y) {
                for (std::size_t x = 0; x < 3; ++x) {
                    s.h_spatial[n].at(c, y, x) = 1000.0 * n + 100.0 * c + 10.0 * y + x + 1.0;
                    s.h_depth.at(c, y, x) = -(100.0 * c + 10.0 * y + x + 1.0);
                }
            }
        }
    }
    const Tensor matrix = gather_input_matrix(s);
    for (std::size_t y = 0; y < 3; ++y) {
        for (std::size_t x = 0; x < 3; ++x) {
            const Tensor in = gather_input_state(s, y, x);
            for (std::size_t n = 0; n < 8; ++n) {
                const int qy = static_cast<int>(y) + kDy[n];
                const int qx = static_cast<int>(x) + kDx[n];
                const bool inside = qy >= 0 && qx >= 0 && qy < 3 && qx < 3;
                // The neighbor in direction n sends along the opposite direction.
                const std::size_t toward = (n + 4) % 8;
                for (std::size_t c = 0; c < d; ++c) {
                    const double want = inside ? s.h_spatial[toward].at(c, qy, qx) : 0.0;
                    EXPECT_EQ(in[n * d + c], want);
                    EXPECT_EQ(matrix.at(n * d + c, y * 3 + x), want);
                }
            }
            for (std::size_t c = 0; c < d; ++c) EXPECT_EQ(in[8 * d + c], s.h_depth.at(c, y, x));
        }
    }
}

TEST(PLstm, ZeroWeightsZeroState) {
    const PixelLayerState z = PixelLayerState::zeros(3, 4, 5);
    EXPECT_EQ(plstm_layer_forward(z, PLstmLayerWeights::zeros(3)), z);
}

TEST(PLstm, MatchesPerPixelReferenceInAnyOrder) {
    Rng rng(3);
    const std::size_t d = 3;
    const PixelLayerState s = random_state(d, 4, 5, rng);
    const PLstmLayerWeights w = PLstmLayerWeights::init(d, rng);
    for (HiddenFrom mode : {HiddenFrom::kCurrent, HiddenFrom::kPrevious}) {
        const PixelLayerState got = plstm_layer_forward(s, w, mode);
        std::vector<std::size_t> order(20);
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        for (std::size_t j : order) {
            const std::size_t y = j / 5;
            const std::size_t x = j % 5;
            const Tensor in = gather_input_state(s, y, x);
            auto column = [&](const Tensor& f) {
                Tensor v(Shape{d});
                for (std::size_t c = 0; c < d; ++c) v[c] = f.at(c, y, x);
                return v;
            };
            const LstmState dep = lstm_step(in, column(s.m_depth), GateWeights::unpack(w.depth), mode);
            for (std::size_t c = 0; c < d; ++c) {
                EXPECT_NEAR(got.h_depth.at(c, y, x), dep.h[c], 1e-14);
                EXPECT_NEAR(got.m_depth.at(c, y, x), dep.m[c], 1e-14);
            }
            for (std::size_t n = 0; n < 8; ++n) {
                const LstmState sp = lstm_step(in, column(s.m_spatial[n]), GateWeights::unpack(w.spatial), mode);
                for (std::size_t c = 0; c < d; ++c) {
                    EXPECT_NEAR(got.h_spatial[n].at(c, y, x), sp.h[c], 1e-14);
                    EXPECT_NEAR(got.m_spatial[n].at(c, y, x), sp.m[c], 1e-14);
                }
            }
        }
    }
}

TEST(PLstm, TwoByTwoScalarOracle) {
    PixelLayerState s = PixelLayerState::zeros(1, 2, 2);
    for (std::size_t y = 0; y < 2; ++y) {
        for (std::size_t x = 0; x < 2; ++x) {
            for (std::size_t n = 0; n < 8; ++n) {
                s.h_spatial[n].at(0, y, x) = 0.1 * (n + 1.0) - 0.2 * y + 0.15 * x;
                s.m_spatial[n].at(0, y, x) = 0.05 * (n - 3.0) + 0.1 * y - 0.1 * x;
            }
            s.h_depth.at(0, y, x) = 0.3 - 0.25 * y + 0.2 * x;
            s.m_depth.at(0, y, x) = -0.2 + 0.3 * y + 0.1 * x;
        }
    }
    PLstmLayerWeights w = PLstmLayerWeights::zeros(1);
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t k = 0; k < 9; ++k) {
            w.spatial.at(r, k) = 0.1 * (r + 1.0) - 0.05 * k;
            w.depth.at(r, k) = -0.1 * (r + 1.0) + 0.04 * k + 0.02;
        }
    }
    struct Row {
        std::size_t y, x;
        double hd, md, h2, m2, h5, m5;
    };
    // Hand-unrolled scalar evaluation of the gather and gate formulas.
    const Row current[] = {
        {0, 0, -0.1357603077873339, -0.31483536935559026, 0.09054049774923709, 0.16202806214570628,
         0.13332812886934275, 0.23937104950415863},
        {0, 1, -0.048575638580712406, -0.09713066737077505, -0.025547917757470916, -0.05228312847301088,
         0.008723377214341606, 0.01784872556889132},
        {1, 1, -0.028585259541333483, -0.06268848926835424, 0.057327015544720354, 0.10678591772356422,
         0.09758714763602873, 0.18216091459859546},
    };
    const Row previous[] = {
        {0, 0, -0.08656070043805462, -0.31483536935559026, -0.02800915417223957, 0.16202806214570628,
         0.055974395719186186, 0.23937104950415863},
        {0, 1, -0.05000825002466811, -0.09713066737077505, -0.07318172016203957, -0.05228312847301088, 0.0,
         0.01784872556889132},
        {1, 1, 0.09097044645678964, -0.06268848926835424, -0.026865026371691293, 0.10678591772356422,
         0.0536913021391138, 0.18216091459859546},
    };
    for (HiddenFrom mode : {HiddenFrom::kCurrent, HiddenFrom::kPrevious}) {
        const PixelLayerState out = plstm_layer_forward(s, w, mode);
        for (const Row& r : mode == HiddenFrom::kCurrent ? current : previous) {
            EXPECT_NEAR(out.h_depth.at(0, r.y, r.x), r.hd, 1e-12);
            EXPECT_NEAR(out.m_depth.at(0, r.y, r.x), r.md, 1e-12);
            EXPECT_NEAR(out.h_spatial[2].at(0, r.y, r.x), r.h2, 1e-12);
            EXPECT_NEAR(out.m_spatial[2].at(0, r.y, r.x), r.m2, 1e-12);
            EXPECT_NEAR(out.h_spatial[5].at(0, r.y, r.x), r.h5, 1e-12);
            EXPECT_NEAR(out.m_spatial[5].at(0, r.y, r.x), r.m5, 1e-12);
        }
    }
}

TEST(PLstm, ReceptiveFieldGrowsOnePixelPerLayer) {
    Rng rng(4);
    const std::size_t d = 2;
    const PixelLayerState base = random_state(d, 9, 9, rng);
    const PLstmLayerWeights w1 = PLstmLayerWeights::init(d, rng);
    const PLstmLayerWeights w2 = PLstmLayerWeights::init(d, rng);
    PixelLayerState bumped = base;
    for (Tensor* f : fields(bumped)) {
        for (std::size_t c = 0; c < d; ++c) f->at(c, 4, 4) += 0.5;
    }
    PixelLayerState a = plstm_layer_forward(plstm_layer_forward(base, w1), w2);
    PixelLayerState b = plstm_layer_forward(plstm_layer_forward(bumped, w1), w2);
    bool changed_at_edge = false;
    const auto fa = fields(a);
    const auto fb = fields(b);
    for (std::size_t i = 0; i < fa.size(); ++i) {
        for (std::size_t y = 0; y < 9; ++y) {
            for (std::size_t x = 0; x < 9; ++x) {
                const int dist = std::max(std::abs(static_cast<int>(y) - 4), std::abs(static_cast<int>(x) - 4));
                for (std::size_t c = 0; c < d; ++c) {
                    const bool same = fa[i]->at(c, y, x) == fb[i]->at(c, y, x);
                    if (dist > 2) EXPECT_TRUE(same) << "pixel " << y << "," << x;
                    if (dist == 2 && !same) changed_at_edge = true;
                }
            }
        }
    }
    EXPECT_TRUE(changed_at_edge);
}

class PLstmGradient : public ::testing::TestWithParam<HiddenFrom> {};

TEST_P(PLstmGradient, MatchesFiniteDifferences) {
    const HiddenFrom mode = GetParam();
    Rng rng(5);
    const std::size_t d = 2;
    PixelLayerState input = random_state(d, 3, 3, rng);
    PLstmLayerWeights w = PLstmLayerWeights::init(d, rng);
    PixelLayerState probe = random_state(d, 3, 3, rng);

    auto loss = [&] {
        PixelLayerState out = plstm_layer_forward(input, w, mode);
        return probe_dot(probe, out);
    };
    PLstmLayerCache cache;
    const PixelLayerState output = plstm_layer_forward(input, w, mode, &cache);
    PLstmLayerWeights dw = PLstmLayerWeights::zeros(d);
    PixelLayerState din = plstm_layer_backward(input, output, w, cache, probe, mode, dw);
    test::expect_gradient(loss, w.spatial, dw.spatial, "spatial weights");
    test::expect_gradient(loss, w.depth, dw.depth, "depth weights");
    const auto fin = fields(input);
    const auto fdin = fields(din);
    for (std::size_t i = 0; i < fin.size(); ++i) test::expect_gradient(loss, *fin[i], *fdin[i], "field " + std::to_string(i));
}

INSTANTIATE_TEST_SUITE_P(Modes, PLstmGradient, ::testing::Values(HiddenFrom::kCurrent, HiddenFrom::kPrevious),
                         test::mode_name);

TEST(Classifier, ZeroWeightsUniform) {
    Rng rng(6);
    const Tensor p = classify_pixels(test::random_tensor({4, 3, 3}, rng), SurfaceClassifier::zeros(3, 4));
    for (double v : p.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Classifier, DistributionsSumToOne) {
    Rng rng(7);
    const Tensor p = classify_pixels(test::random_tensor({4, 5, 6}, rng, -5, 5), SurfaceClassifier::init(8, 4, rng));
    for (std::size_t i = 0; i < 30; ++i) {
        double s = 0.0;
        for (std::size_t c = 0; c < 8; ++c) s += p[c * 30 + i];
        EXPECT_NEAR(s, 1.0, 1e-9);
    }
}

TEST(Classifier, MarginTenIsolatesClass) {
    SurfaceClassifier cls = SurfaceClassifier::zeros(3, 2);
    cls.bias[1] = 10.0;
    Rng rng(8);
    const Tensor p = classify_pixels(test::random_tensor({2, 4, 4}, rng), cls);
    const SurfaceLabelMap labels = argmax_labels(p);
    for (std::size_t i = 0; i < 16; ++i) {
        EXPECT_GT(p[16 + i], 0.9999);
        EXPECT_EQ(labels.labels[i], 1);
    }
}

TEST(Classifier, GradientMatchesFiniteDifferences) {
    Rng rng(9);
    Tensor h = test::random_tensor({3, 2, 3}, rng);
    SurfaceClassifier cls = SurfaceClassifier::init(4, 3, rng);
    const Tensor probe = test::random_tensor({4, 2, 3}, rng);
    // Linear functional of the logits: sum probe * log(softmax) has logit gradient probe - p * sum(probe).
    auto loss = [&] {
        const Tensor p = classify_pixels(h, cls);
        double s = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) s += probe[i] * std::log(p[i]);
        return s;
    };
    const Tensor p = classify_pixels(h, cls);
    Tensor dlogits(p.shape());
    for (std::size_t i = 0; i < 6; ++i) {
        double total = 0.0;
        for (std::size_t c = 0; c < 4; ++c) total += probe[c * 6 + i];
        for (std::size_t c = 0; c < 4; ++c) dlogits[c * 6 + i] = probe[c * 6 + i] - p[c * 6 + i] * total;
    }
    SurfaceClassifier dcls = SurfaceClassifier::zeros(4, 3);
    const Tensor dh = classify_backward(h, cls, dlogits, dcls);
    test::expect_gradient(loss, h, dh, "hidden");
    test::expect_gradient(loss, cls.weight, dcls.weight, "weight");
    test::expect_gradient(loss, cls.bias, dcls.bias, "bias");
}
