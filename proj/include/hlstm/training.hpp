#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <utility>
#include <vector>

#include "hlstm/labels.hpp"
#include "hlstm/model.hpp"
#include "hlstm/tensor.hpp"

namespace hlstm {

/// Ground-truth relation per ordered adjacent region pair at one scale.
using RelationTruth = std::map<std::pair<std::uint32_t, std::uint32_t>, RelationLabel>;

struct TrainingExample {
    Tensor image;                          // (3, H, W)
    SurfaceLabelMap surface;               // per-pixel ground truth
    SceneStructure structure;              // one map and graph per MS-LSTM layer
    std::vector<RelationTruth> relations;  // one per MS-LSTM layer
};

/// Mean pixel cross-entropy. Throws std::out_of_range for a label >= classes.
double surface_loss(const Tensor& probs, const SurfaceLabelMap& truth);
/// Gradient of surface_loss with respect to the logits, (classes, H, W), scaled by `scale`.
Tensor surface_loss_grad(const Tensor& probs, const SurfaceLabelMap& truth, double scale = 1.0);

/// Mean cross-entropy over the ordered pairs of one layer. Throws
/// std::out_of_range when a predicted pair has no ground truth.
double relation_layer_loss(const RelationGraphPrediction& prediction, const RelationTruth& truth);
/// Sum of relation_layer_loss over layers.
double relation_loss(const std::vector<RelationGraphPrediction>& predictions, const std::vector<RelationTruth>& truth);
/// One (4 x pairs) logit gradient per layer, scaled by `scale`.
std::vector<Tensor> relation_loss_grad(const std::vector<RelationGraphPrediction>& predictions,
                                       const std::vector<RelationTruth>& truth, double scale = 1.0);

struct LossOptions {
    /// False drops the relation term (surface-only training).
    bool use_relation_loss = true;
};

struct ExampleLoss {
    double surface = 0.0;
    double relation = 0.0;
    double total() const { return surface + relation; }
};

ExampleLoss example_loss(const HLstmModel& model, const TrainingExample& example, const LossOptions& options = {});

/// (1 / U) sum over the batch of surface + relation loss. Throws
/// std::invalid_argument for an empty batch.
double total_loss(const HLstmModel& model, const std::vector<TrainingExample>& batch, const LossOptions& options = {});
double total_loss(const HLstmModel& model, const std::vector<const TrainingExample*>& batch,
                  const LossOptions& options = {});

struct LossAndGrad {
    double loss = 0.0;
    Parameters grads;
};

/// total_loss and its gradient for every parameter. Examples are processed
/// in parallel and summed in index order, so the result does not depend on
/// the thread count.
LossAndGrad loss_and_gradient(const HLstmModel& model, const std::vector<const TrainingExample*>& batch,
                              const LossOptions& options = {}, std::size_t threads = 1);

/// Momentum SGD: v = momentum * v + g; p -= lr * v. The LSTM rate applies to
/// the transition, P-LSTM and MS-LSTM groups; the CNN rate to the conv frontend.
class MomentumSgd {
public:
    MomentumSgd(double lr_lstm, double lr_cnn, double momentum);

    /// Throws std::invalid_argument when gradient shapes differ from parameters.
    void step(Parameters& params, const Parameters& grads);
    void scale_learning_rates(double factor);

    double lr_lstm() const { return lr_lstm_; }
    double lr_cnn() const { return lr_cnn_; }

private:
    double lr_lstm_;
    double lr_cnn_;
    double momentum_;
    std::vector<Tensor> velocity_;
};

struct StepRecord {
    std::size_t epoch = 0;
    std::size_t step = 0;
    double loss = 0.0;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
};

struct TrainOptions {
    std::size_t epochs = 1;
    LossOptions loss;
    /// 0 reads HLSTM_THREADS, falling back to the hardware concurrency.
    std::size_t threads = 0;
    /// Called after every epoch; returning false stops training.
    std::function<bool(const EpochRecord&)> on_epoch;
};

struct TrainLog {
    std::vector<StepRecord> steps;
    std::vector<EpochRecord> epochs;
};

/// Mini-batch training (config.batch_size, 0 for full batch) with a
/// per-epoch shuffle drawn from config.seed.
TrainLog train(HLstmModel& model, const std::vector<TrainingExample>& data, const TrainOptions& options);

/// Thread cap: HLSTM_THREADS if set and positive, otherwise the hardware concurrency.
std::size_t default_thread_count();

}  // namespace hlstm
