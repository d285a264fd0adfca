// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line with
// the measured numbers; the exit status is nonzero if any fails.
//
//   acceptance            run all criteria
//   acceptance 1 6 7      run a subset

#include <unistd.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hlstm/checkpoint.hpp"
#include "hlstm/dataset.hpp"
#include "hlstm/metrics.hpp"
#include "hlstm/model.hpp"
#include "hlstm/mslstm.hpp"
#include "hlstm/numerics.hpp"
#include "hlstm/plstm.hpp"
#include "hlstm/reconstruct.hpp"
#include "hlstm/superpixel.hpp"
#include "hlstm/synthetic.hpp"
#include "hlstm/training.hpp"

using namespace hlstm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Stopwatch {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* pattern, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, a);
    return buf;
}

std::vector<const TrainingExample*> pointers(const std::vector<TrainingExample>& data) {
    std::vector<const TrainingExample*> out;
    for (const TrainingExample& e : data) out.push_back(&e);
    return out;
}

fs::path scratch_dir() {
    const fs::path dir = fs::temp_directory_path() / ("hlstm_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Evaluation {
    double pixel_accuracy = 0.0;
    std::vector<double> relation_accuracy;  // per MS-LSTM layer
    std::vector<double> relation_ap;
};

Evaluation evaluate(const HLstmModel& model, const std::vector<TrainingExample>& data) {
    const std::size_t layers = model.config().num_mslstm_layers;
    std::vector<std::vector<ScoredPair>> scored(layers);
    double pixels = 0.0;
    for (const TrainingExample& e : data) {
        const ForwardPass pass = model.forward(e.image, e.structure);
        pixels += pixel_accuracy(argmax_labels(pass.probs), e.surface);
        for (std::size_t k = 0; k < layers; ++k) {
            const std::vector<ScoredPair> s = score_pairs(pass.relations[k], e.relations[k]);
            scored[k].insert(scored[k].end(), s.begin(), s.end());
        }
    }
    Evaluation out;
    out.pixel_accuracy = pixels / static_cast<double>(data.size());
    for (const auto& s : scored) {
        out.relation_accuracy.push_back(relation_accuracy(s));
        out.relation_ap.push_back(relation_average_precision(s));
    }
    return out;
}

// 1. Analytic gradient of the total loss against central differences.
Outcome gradient_fidelity() {
    Stopwatch clock;
    double worst = 0.0;
    std::string worst_at;
    for (HiddenFrom mode : {HiddenFrom::kCurrent, HiddenFrom::kPrevious}) {
        ModelConfig config = desk_preset();
        config.d = 2;
        config.num_plstm_layers = 2;
        config.num_mslstm_layers = 2;
        config.scales = {4, 8};
        config.conv_channels = {4, 4};
        config.relation_hidden = 4;
        config.hidden_from_memory = mode;
        config.seed = 5;
        HLstmModel model(config);
        const std::vector<TrainingExample> data = generate_dataset(1, 4, 11, config);
        const auto batch = pointers(data);
        const LossAndGrad lg = loss_and_gradient(model, batch);

        std::vector<const Tensor*> grads;
        lg.grads.for_each([&](const std::string&, ParamGroup, const Tensor& t) { grads.push_back(&t); });
        std::size_t index = 0;
        model.params().for_each([&](const std::string& name, ParamGroup, Tensor& t) {
            const Tensor& g = *grads[index++];
            for (std::size_t i = 0; i < t.size(); ++i) {
                const double orig = t[i];
                t[i] = orig + 1e-5;
                const double fp = total_loss(model, batch);
                t[i] = orig - 1e-5;
                const double fm = total_loss(model, batch);
                t[i] = orig;
                const double err = relative_error(g[i], (fp - fm) / 2e-5);
                if (err > worst) {
                    worst = err;
                    worst_at = name + "[" + std::to_string(i) + "]";
                }
            }
        });
    }
    const double secs = clock.seconds();
    return {worst < 1e-4 && secs < 120.0,
            "worst relative error " + fmt("%.3g", worst) + " at " + worst_at + ", " + fmt("%.1f s", secs)};
}

// 2. Overfit 20 scenes.
Outcome overfit() {
    Stopwatch clock;
    const ModelConfig config = desk_preset();
    const std::vector<TrainingExample> data = generate_dataset(20, 32, 7, config);
    HLstmModel model(config);
    Evaluation last;
    std::size_t epochs = 0;
    bool reached = false;
    TrainOptions options;
    options.epochs = 500;
    options.on_epoch = [&](const EpochRecord& r) {
        epochs = r.epoch + 1;
        if (epochs % 10 != 0 && epochs != options.epochs) return true;
        last = evaluate(model, data);
        reached = last.pixel_accuracy >= 0.98 && last.relation_accuracy.back() >= 0.95;
        return !reached;
    };
    train(model, data, options);
    if (!reached) last = evaluate(model, data);
    const double secs = clock.seconds();
    const bool pass = last.pixel_accuracy >= 0.98 && last.relation_accuracy.back() >= 0.95 && secs < 900.0;
    return {pass, "train pixel accuracy " + fmt("%.4f", last.pixel_accuracy) + ", final-layer relation accuracy " +
                      fmt("%.4f", last.relation_accuracy.back()) + " after " + std::to_string(epochs) +
                      " epochs, " + fmt("%.1f s", secs)};
}

struct Generalization {
    Evaluation joint;
    Evaluation surface_only;
    double joint_seconds = 0.0;
};

// Shared by criteria 3 to 5: one joint run and one surface-only run.
const Generalization& generalization() {
    static const Generalization result = [] {
        const ModelConfig config = desk_preset();
        const std::vector<TrainingExample> train_set = generate_dataset(50, 32, 7, config);
        const std::vector<TrainingExample> test_set = generate_dataset(20, 32, 8, config);
        Generalization g;
        for (bool joint : {true, false}) {
            Stopwatch clock;
            HLstmModel model(config);
            TrainOptions options;
            options.epochs = 100;
            options.loss.use_relation_loss = joint;
            train(model, train_set, options);
            (joint ? g.joint : g.surface_only) = evaluate(model, test_set);
            if (joint) g.joint_seconds = clock.seconds();
        }
        return g;
    }();
    return result;
}

Outcome generalization_quality() {
    const Generalization& g = generalization();
    const double pixels = g.joint.pixel_accuracy;
    const double ap = g.joint.relation_ap.back();
    return {pixels >= 0.90 && ap >= 0.85 && g.joint_seconds < 1800.0,
            "test pixel accuracy " + fmt("%.4f", pixels) + ", final-layer relation AP " + fmt("%.4f", ap) + ", " +
                fmt("%.1f s", g.joint_seconds)};
}

Outcome deep_supervision_trend() {
    const Generalization& g = generalization();
    const double first = g.joint.relation_ap.front();
    const double last = g.joint.relation_ap.back();
    return {last >= first - 0.02, "relation AP first layer " + fmt("%.4f", first) + ", last layer " + fmt("%.4f", last)};
}

Outcome multitask_analogue() {
    const Generalization& g = generalization();
    const double joint = g.joint.pixel_accuracy;
    const double alone = g.surface_only.pixel_accuracy;
    return {joint >= alone - 0.01,
            "test pixel accuracy joint " + fmt("%.4f", joint) + ", surface only " + fmt("%.4f", alone)};
}

// 6. LSE bounds and monotonicity in pi.
Outcome lse_properties() {
    Rng rng(61);
    const std::array<double, 5> pis{0.5, 1.0, 2.0, 8.0, 32.0};
    std::size_t violations = 0;
    double worst = 0.0;
    for (int region = 0; region < 1000; ++region) {
        const std::size_t channels = 1 + rng.below(6);
        const std::size_t count = 1 + rng.below(60);
        const double spread = rng.uniform(0.1, 5.0);
        Tensor cells({channels, count});
        for (double& v : cells.data()) v = rng.uniform(-spread, spread);
        std::vector<Tensor> fused;
        for (double pi : pis) fused.push_back(lse_fuse(cells, pi));
        for (std::size_t c = 0; c < channels; ++c) {
            double mean = 0.0;
            double max = -INFINITY;
            for (std::size_t j = 0; j < count; ++j) {
                mean += cells.at(c, j);
                max = std::max(max, cells.at(c, j));
            }
            mean /= static_cast<double>(count);
            for (std::size_t p = 0; p < pis.size(); ++p) {
                const double v = fused[p][c];
                worst = std::max({worst, mean - v, v - max});
                if (v < mean - 1e-9 || v > max + 1e-9) ++violations;
                if (p > 0) {
                    worst = std::max(worst, fused[p - 1][c] - v);
                    if (v < fused[p - 1][c] - 1e-9) ++violations;
                }
            }
        }
    }
    return {violations == 0,
            std::to_string(violations) + " violations, largest excursion " + fmt("%.3g", std::max(worst, 0.0))};
}

AdjacencyGraph brute_force_adjacency(const SuperpixelMap& map) {
    std::set<std::pair<std::uint32_t, std::uint32_t>> edges;
    for (std::size_t y = 0; y < map.height; ++y) {
        for (std::size_t x = 0; x < map.width; ++x) {
            const std::uint32_t a = map.at(y, x);
            for (auto [ny, nx] : {std::pair{y + 1, x}, std::pair{y, x + 1}}) {
                if (ny >= map.height || nx >= map.width) continue;
                const std::uint32_t b = map.at(ny, nx);
                if (a != b) edges.insert({std::min(a, b), std::max(a, b)});
            }
        }
    }
    AdjacencyGraph g;
    g.node_count = map.region_count;
    g.neighbors.resize(map.region_count);
    std::set<std::pair<std::uint32_t, std::uint32_t>> ordered;
    for (auto [a, b] : edges) {
        g.edges.push_back({a, b});
        ordered.insert({a, b});
        ordered.insert({b, a});
        g.neighbors[a].push_back(b);
        g.neighbors[b].push_back(a);
    }
    g.ordered_pairs.assign(ordered.begin(), ordered.end());
    for (auto& n : g.neighbors) std::sort(n.begin(), n.end());
    return g;
}

// 7. Superpixel partition, connectivity, region count and adjacency.
Outcome superpixel_invariants() {
    Rng rng(71);
    bool pass = true;
    std::string detail;
    for (double scale : {16.0, 32.0, 48.0, 64.0, 128.0}) {
        const double target = std::ceil(64.0 * 64.0 / scale);
        double worst = 0.0;
        std::size_t broken = 0;
        for (int i = 0; i < 100; ++i) {
            Tensor image({3, 64, 64});
            for (double& v : image.data()) v = rng.uniform();
            const SuperpixelMap map = oversegment(image, scale);
            worst = std::max(worst, std::abs(static_cast<double>(map.region_count) - target) / target);
            if (!is_partition(map) || !regions_connected(map) || adjacency(map) != brute_force_adjacency(map)) {
                ++broken;
            }
        }
        pass = pass && broken == 0 && worst <= 0.20;
        detail += (detail.empty() ? "" : "; ") + fmt("scale %g: ", scale) + std::to_string(broken) +
                  " broken, worst K deviation " + fmt("%.3f", worst);
    }
    return {pass, detail};
}

// 8. Two identical runs give identical loss logs and checkpoints.
Outcome determinism() {
    ModelConfig config = desk_preset();
    config.batch_size = 4;
    const std::vector<TrainingExample> data = generate_dataset(10, 32, 81, config);
    const fs::path dir = scratch_dir();
    auto run = [&](std::size_t threads, const std::string& file) {
        HLstmModel model(config);
        TrainOptions options;
        options.epochs = 17;  // three steps per epoch
        options.threads = threads;
        TrainLog log = train(model, data, options);
        log.steps.resize(std::min<std::size_t>(log.steps.size(), 50));
        save_checkpoint((dir / file).string(), model);
        return log;
    };
    const TrainLog a = run(1, "a.ckpt");
    const TrainLog b = run(0, "b.ckpt");
    bool same_log = a.steps.size() == 50 && b.steps.size() == 50;
    for (std::size_t i = 0; same_log && i < a.steps.size(); ++i) same_log = a.steps[i].loss == b.steps[i].loss;
    const std::string ca = slurp(dir / "a.ckpt");
    const std::string cb = slurp(dir / "b.ckpt");
    fs::remove_all(dir);
    const bool same_ckpt = !ca.empty() && ca == cb;
    return {same_log && same_ckpt, std::string("50-step loss logs ") + (same_log ? "identical" : "differ") +
                                       ", checkpoints " + (same_ckpt ? "identical" : "differ") + " (" +
                                       std::to_string(ca.size()) + " bytes)"};
}

Vec3 newell_normal(const std::vector<Vec3>& v) {
    Vec3 n{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < v.size(); ++i) {
        const Vec3& a = v[i];
        const Vec3& b = v[(i + 1) % v.size()];
        n[0] += (a[1] - b[1]) * (a[2] + b[2]);
        n[1] += (a[2] - b[2]) * (a[0] + b[0]);
        n[2] += (a[0] - b[0]) * (a[1] + b[1]);
    }
    const double len = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
    for (double& c : n) c /= len;
    return n;
}

// 9. Pop-up geometry of the noiseless thirds scene from ground truth.
Outcome reconstruction_geometry() {
    const ModelConfig config = desk_preset();
    const SceneSpec spec = thirds_scene(32, 32);
    const TrainingExample e = generate_synthetic(spec, config);
    const SuperpixelMap& map = e.structure.maps.front();
    const RelationGraphPrediction rel = prediction_from_truth(map, e.relations.front());
    const std::vector<Boundary> boundaries = extract_boundaries(e.surface, rel, map);
    const PopUpModel model = build_model(e.surface, boundaries, estimate_horizon(boundaries, spec.height));

    const fs::path dir = scratch_dir();
    export_obj(model, e.image, dir.string(), "thirds");
    const ObjMesh mesh = parse_obj(slurp(dir / "thirds.obj"));
    fs::remove_all(dir);
    if (mesh.faces.size() != model.planes.size()) return {false, "face count does not match the plane count"};

    // Faces are written in plane order.
    std::size_t grounds = 0;
    std::size_t walls = 0;
    bool ground_flat = true;
    double worst_dot = 0.0;
    double worst_fold = 0.0;
    const double true_row = static_cast<double>(spec.ground_row());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        std::vector<Vec3> verts;
        for (const auto& [vi, ti] : mesh.faces[f]) verts.push_back(mesh.vertices.at(vi - 1));
        if (model.planes[f].role == PlaneRole::kGround) {
            ++grounds;
            for (const Vec3& v : verts) ground_flat = ground_flat && v[1] == 0.0;
            continue;
        }
        ++walls;
        worst_dot = std::max(worst_dot, std::abs(newell_normal(verts)[1]));
        for (const Vec3& v : verts) {
            if (v[1] != 0.0) continue;  // fold vertices sit on the ground
            worst_fold = std::max(worst_fold, std::abs(model.camera.project(v).y - true_row));
        }
    }
    const bool pass = grounds == 1 && walls >= 1 && ground_flat && worst_dot <= 1e-9 && worst_fold <= 1.0;
    return {pass, std::to_string(grounds) + " ground and " + std::to_string(walls) + " wall faces, ground " +
                      (ground_flat ? "flat" : "not flat") + ", |n_wall . n_ground| " + fmt("%.3g", worst_dot) +
                      ", fold off by " + fmt("%.3f px", worst_fold)};
}

double oracle_ap(const std::vector<double>& s, const std::vector<bool>& pos) {
    double positives = 0.0;
    for (bool p : pos) positives += p ? 1.0 : 0.0;
    std::set<double, std::greater<>> thresholds(s.begin(), s.end());
    double ap = 0.0;
    double prev_recall = 0.0;
    for (double t : thresholds) {
        double tp = 0.0;
        double taken = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] < t) continue;
            taken += 1.0;
            tp += pos[i] ? 1.0 : 0.0;
        }
        ap += (tp / positives - prev_recall) * (tp / taken);
        prev_recall = tp / positives;
    }
    return ap;
}

// 10. Metrics against brute-force counting.
Outcome metrics_oracles() {
    Rng rng(101);
    std::size_t mismatches = 0;
    double worst_ap = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t h = 1 + rng.below(12);
        const std::size_t w = 1 + rng.below(12);
        const std::size_t classes = 2 + rng.below(7);
        SurfaceLabelMap pred(h, w, classes);
        SurfaceLabelMap truth(h, w, classes);
        for (std::size_t i = 0; i < h * w; ++i) {
            pred.labels[i] = static_cast<std::uint8_t>(rng.below(classes));
            truth.labels[i] = static_cast<std::uint8_t>(rng.below(classes));
        }
        std::size_t correct = 0;
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) correct += pred.at(y, x) == truth.at(y, x) ? 1 : 0;
        }
        double recall_sum = 0.0;
        std::size_t present = 0;
        for (std::size_t c = 0; c < classes; ++c) {
            std::size_t total = 0;
            std::size_t hit = 0;
            for (std::size_t i = 0; i < h * w; ++i) {
                if (truth.labels[i] != c) continue;
                ++total;
                hit += pred.labels[i] == c ? 1 : 0;
            }
            if (total == 0) continue;
            recall_sum += static_cast<double>(hit) / static_cast<double>(total);
            ++present;
        }
        if (pixel_accuracy(pred, truth) != static_cast<double>(correct) / static_cast<double>(h * w)) ++mismatches;
        if (mean_accuracy(pred, truth) != recall_sum / static_cast<double>(present)) ++mismatches;

        // Coarse scores make ties common.
        std::vector<ScoredPair> pairs(1 + rng.below(40));
        for (ScoredPair& p : pairs) {
            for (double& s : p.scores) s = static_cast<double>(rng.below(8)) / 7.0;
            p.truth = static_cast<RelationLabel>(rng.below(kRelationCount));
        }
        double sum = 0.0;
        double present_rel = 0.0;
        for (std::size_t r = 0; r < kRelationCount; ++r) {
            std::vector<double> s;
            std::vector<bool> pos;
            for (const ScoredPair& p : pairs) {
                s.push_back(p.scores[r]);
                pos.push_back(static_cast<std::size_t>(p.truth) == r);
            }
            if (std::find(pos.begin(), pos.end(), true) == pos.end()) continue;
            sum += oracle_ap(s, pos);
            present_rel += 1.0;
        }
        worst_ap = std::max(worst_ap, std::abs(relation_average_precision(pairs) - sum / present_rel));
    }
    return {mismatches == 0 && worst_ap <= 1e-12,
            std::to_string(mismatches) + " accuracy mismatches, worst AP difference " + fmt("%.3g", worst_ap)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gradient fidelity", gradient_fidelity},
        {"overfit", overfit},
        {"generalization", generalization_quality},
        {"deep supervision trend", deep_supervision_trend},
        {"multi-task", multitask_analogue},
        {"LSE properties", lse_properties},
        {"superpixel invariants", superpixel_invariants},
        {"determinism", determinism},
        {"reconstruction geometry", reconstruction_geometry},
        {"metrics oracles", metrics_oracles},
    };

    std::vector<std::size_t> selected;
    for (int i = 1; i < argc; ++i) {
        std::size_t n = 0;
        try {
            n = std::stoul(argv[i]);
        } catch (const std::exception&) {
        }
        if (n < 1 || n > criteria.size()) {
            std::fprintf(stderr, "usage: %s [criterion 1-%zu ...]\n", argv[0], criteria.size());
            return 2;
        }
        selected.push_back(n);
    }
    if (selected.empty()) {
        for (std::size_t n = 1; n <= criteria.size(); ++n) selected.push_back(n);
    }

    int failures = 0;
    for (std::size_t n : selected) {
        const auto& [name, run] = criteria[n - 1];
        Outcome outcome;
        try {
            outcome = run();
        } catch (const std::exception& e) {
            outcome = {false, std::string("threw: ") + e.what()};
        }
        failures += outcome.pass ? 0 : 1;
        std::printf("criterion %zu %s: %s: %s\n", n, outcome.pass ? "PASS" : "FAIL", name.c_str(),
                    outcome.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
