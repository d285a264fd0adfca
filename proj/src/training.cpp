#include "hlstm/training.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>

#include "hlstm/numerics.hpp"
#include "hlstm/rng.hpp"

namespace hlstm {

namespace {

void check_surface_shapes(const Tensor& probs, const SurfaceLabelMap& truth) {
    if (probs.rank() != 3 || probs.dim(1) != truth.height || probs.dim(2) != truth.width) {
        throw std::invalid_argument("surface loss: prediction " + shape_string(probs.shape()) +
                                    " does not match label map " + std::to_string(truth.height) + "x" +
                                    std::to_string(truth.width));
    }
    if (truth.size() == 0) throw std::invalid_argument("surface loss: empty label map");
}

std::size_t checked_label(const SurfaceLabelMap& truth, std::size_t i, std::size_t classes) {
    const std::size_t label = truth.labels[i];
    if (label >= classes) {
        throw std::out_of_range("surface label " + std::to_string(label) + " at pixel " + std::to_string(i) +
                                " is not below the class count " + std::to_string(classes));
    }
    return label;
}

std::size_t truth_for(const RelationTruth& truth, const RelationPrediction& p) {
    const auto it = truth.find({p.region_a, p.region_b});
    if (it == truth.end()) {
        throw std::out_of_range("no relation ground truth for region pair (" + std::to_string(p.region_a) + ", " +
                                std::to_string(p.region_b) + ")");
    }
    return static_cast<std::size_t>(it->second);
}

void check_layer_count(const std::vector<RelationGraphPrediction>& predictions, const std::vector<RelationTruth>& truth) {
    if (predictions.size() != truth.size()) {
        throw std::invalid_argument("relation loss: " + std::to_string(predictions.size()) + " predicted layers but " +
                                    std::to_string(truth.size()) + " ground-truth layers");
    }
}

struct ExampleResult {
    double loss = 0.0;
    Parameters grads;
};

ExampleResult example_gradient(const HLstmModel& model, const TrainingExample& ex, const LossOptions& options,
                               double scale) {
    const ForwardPass pass = model.forward(ex.image, ex.structure);
    ExampleResult r;
    r.loss = surface_loss(pass.probs, ex.surface);
    const Tensor dsurface = surface_loss_grad(pass.probs, ex.surface, scale);
    std::vector<Tensor> drelation;
    if (options.use_relation_loss) {
        r.loss += relation_loss(pass.relations, ex.relations);
        drelation = relation_loss_grad(pass.relations, ex.relations, scale);
    }
    r.grads = model.backward(ex.image, ex.structure, pass, dsurface, drelation);
    return r;
}

}  // namespace

double surface_loss(const Tensor& probs, const SurfaceLabelMap& truth) {
    check_surface_shapes(probs, truth);
    const std::size_t classes = probs.dim(0);
    const std::size_t n = truth.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t label = checked_label(truth, i, classes);
        total -= std::log(std::max(probs[label * n + i], kProbabilityFloor));
    }
    return total / static_cast<double>(n);
}

Tensor surface_loss_grad(const Tensor& probs, const SurfaceLabelMap& truth, double scale) {
    check_surface_shapes(probs, truth);
    const std::size_t classes = probs.dim(0);
    const std::size_t n = truth.size();
    const double s = scale / static_cast<double>(n);
    Tensor grad(probs.shape());
    std::vector<double> p(classes);
    std::vector<double> g(classes);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t label = checked_label(truth, i, classes);
        for (std::size_t c = 0; c < classes; ++c) {
            p[c] = probs[c * n + i];
            g[c] = 0.0;
        }
        softmax_cross_entropy_grad(p, label, s, g);
        for (std::size_t c = 0; c < classes; ++c) grad[c * n + i] = g[c];
    }
    return grad;
}

double relation_layer_loss(const RelationGraphPrediction& prediction, const RelationTruth& truth) {
    if (prediction.pairs.empty()) return 0.0;
    double total = 0.0;
    for (const RelationPrediction& p : prediction.pairs) total += cross_entropy(p.probs, truth_for(truth, p));
    return total / static_cast<double>(prediction.pairs.size());
}

double relation_loss(const std::vector<RelationGraphPrediction>& predictions, const std::vector<RelationTruth>& truth) {
    check_layer_count(predictions, truth);
    double total = 0.0;
    for (std::size_t k = 0; k < predictions.size(); ++k) total += relation_layer_loss(predictions[k], truth[k]);
    return total;
}

std::vector<Tensor> relation_loss_grad(const std::vector<RelationGraphPrediction>& predictions,
                                       const std::vector<RelationTruth>& truth, double scale) {
    check_layer_count(predictions, truth);
    std::vector<Tensor> grads;
    grads.reserve(predictions.size());
    for (std::size_t k = 0; k < predictions.size(); ++k) {
        const auto& pairs = predictions[k].pairs;
        Tensor g({kRelationCount, pairs.size()});
        if (!pairs.empty()) {
            const double s = scale / static_cast<double>(pairs.size());
            std::array<double, kRelationCount> col{};
            for (std::size_t i = 0; i < pairs.size(); ++i) {
                col.fill(0.0);
                softmax_cross_entropy_grad(pairs[i].probs, truth_for(truth[k], pairs[i]), s, col);
                for (std::size_t r = 0; r < kRelationCount; ++r) g.at(r, i) = col[r];
            }
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

ExampleLoss example_loss(const HLstmModel& model, const TrainingExample& example, const LossOptions& options) {
    const ForwardPass pass = model.forward(example.image, example.structure);
    ExampleLoss loss;
    loss.surface = surface_loss(pass.probs, example.surface);
    if (options.use_relation_loss) loss.relation = relation_loss(pass.relations, example.relations);
    return loss;
}

double total_loss(const HLstmModel& model, const std::vector<const TrainingExample*>& batch,
                  const LossOptions& options) {
    if (batch.empty()) throw std::invalid_argument("total_loss: empty batch");
    double total = 0.0;
    for (const TrainingExample* ex : batch) total += example_loss(model, *ex, options).total();
    return total / static_cast<double>(batch.size());
}

double total_loss(const HLstmModel& model, const std::vector<TrainingExample>& batch, const LossOptions& options) {
    std::vector<const TrainingExample*> ptrs;
    for (const TrainingExample& ex : batch) ptrs.push_back(&ex);
    return total_loss(model, ptrs, options);
}

LossAndGrad loss_and_gradient(const HLstmModel& model, const std::vector<const TrainingExample*>& batch,
                              const LossOptions& options, std::size_t threads) {
    if (batch.empty()) throw std::invalid_argument("loss_and_gradient: empty batch");
    const double scale = 1.0 / static_cast<double>(batch.size());
    std::vector<ExampleResult> results(batch.size());
    const std::size_t workers = std::clamp<std::size_t>(threads, 1, batch.size());
    if (workers == 1) {
        for (std::size_t i = 0; i < batch.size(); ++i) results[i] = example_gradient(model, *batch[i], options, scale);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < batch.size(); i += workers) {
                        results[i] = example_gradient(model, *batch[i], options, scale);
                    }
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (std::thread& t : pool) t.join();
        for (const std::exception_ptr& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    LossAndGrad out;
    out.grads = std::move(results[0].grads);
    double loss = results[0].loss;
    for (std::size_t i = 1; i < results.size(); ++i) {
        loss += results[i].loss;
        std::vector<Tensor*> dst;
        out.grads.for_each([&](const std::string&, ParamGroup, Tensor& t) { dst.push_back(&t); });
        std::size_t j = 0;
        results[i].grads.for_each([&](const std::string&, ParamGroup, const Tensor& t) { *dst[j++] += t; });
    }
    out.loss = loss * scale;
    return out;
}

MomentumSgd::MomentumSgd(double lr_lstm, double lr_cnn, double momentum)
    : lr_lstm_(lr_lstm), lr_cnn_(lr_cnn), momentum_(momentum) {
    if (!(lr_lstm >= 0.0) || !(lr_cnn >= 0.0) || !(momentum >= 0.0 && momentum < 1.0)) {
        throw std::invalid_argument("MomentumSgd: learning rates must be >= 0 and momentum in [0, 1)");
    }
}

void MomentumSgd::step(Parameters& params, const Parameters& grads) {
    std::vector<const Tensor*> g;
    grads.for_each([&](const std::string&, ParamGroup, const Tensor& t) { g.push_back(&t); });
    std::vector<std::pair<std::string, Tensor*>> p;
    std::vector<ParamGroup> groups;
    params.for_each([&](const std::string& name, ParamGroup group, Tensor& t) {
        p.emplace_back(name, &t);
        groups.push_back(group);
    });
    if (g.size() != p.size()) throw std::invalid_argument("sgd step: gradient set does not match parameters");
    for (std::size_t i = 0; i < p.size(); ++i) require_same_shape(*p[i].second, *g[i], p[i].first.c_str());
    if (velocity_.empty()) {
        for (const auto& [name, t] : p) velocity_.push_back(Tensor::zeros_like(*t));
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
        Tensor& v = velocity_[i];
        require_same_shape(v, *g[i], "sgd velocity");
        const double lr = groups[i] == ParamGroup::kConv ? lr_cnn_ : lr_lstm_;
        double* vp = v.raw();
        double* pp = p[i].second->raw();
        const double* gp = g[i]->raw();
        for (std::size_t j = 0; j < v.size(); ++j) {
            vp[j] = momentum_ * vp[j] + gp[j];
            pp[j] -= lr * vp[j];
        }
    }
}

void MomentumSgd::scale_learning_rates(double factor) {
    lr_lstm_ *= factor;
    lr_cnn_ *= factor;
}

std::size_t default_thread_count() {
    if (const char* env = std::getenv("HLSTM_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end != env && n > 0) return static_cast<std::size_t>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

TrainLog train(HLstmModel& model, const std::vector<TrainingExample>& data, const TrainOptions& options) {
    if (data.empty()) throw std::invalid_argument("train: empty dataset");
    const ModelConfig& config = model.config();
    const std::size_t threads = options.threads == 0 ? default_thread_count() : options.threads;
    const std::size_t batch = config.batch_size == 0 ? data.size() : std::min(config.batch_size, data.size());
    MomentumSgd sgd(config.lr_lstm, config.lr_cnn, config.momentum);
    Rng rng(config.seed ^ 0x5DEECE66DULL);

    TrainLog log;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        if (config.lr_decay_step > 0 && epoch > 0 && epoch % config.lr_decay_step == 0) {
            sgd.scale_learning_rates(config.lr_decay_gamma);
        }
        if (batch < data.size()) {
            for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        }
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            std::vector<const TrainingExample*> mb;
            for (std::size_t i = start; i < std::min(start + batch, order.size()); ++i) mb.push_back(&data[order[i]]);
            LossAndGrad lg = loss_and_gradient(model, mb, options.loss, threads);
            sgd.step(model.params(), lg.grads);
            log.steps.push_back({epoch, step++, lg.loss});
            epoch_loss += lg.loss;
            ++batches;
        }
        log.epochs.push_back({epoch, epoch_loss / static_cast<double>(batches)});
        if (options.on_epoch && !options.on_epoch(log.epochs.back())) break;
    }
    return log;
}

}  // namespace hlstm
