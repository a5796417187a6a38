#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "slip/csprng.hpp"
#include "slip/models.hpp"

namespace slip {

enum class LossKind : uint8_t { cross_entropy = 0, mse = 1 };

/// Labeled synthetic task with disjoint train/eval splits.
struct EvalTask {
    std::vector<std::pair<std::vector<double>, uint32_t>> train;
    std::vector<std::pair<std::vector<double>, uint32_t>> eval;
    LossKind loss = LossKind::cross_entropy;
    size_t dim = 0;
    size_t n_classes = 0;
};

/// Gaussian-blob classification: one random center per class, unit-cube
/// centers, isotropic noise. Train and eval are drawn independently.
EvalTask make_synthetic_classification(uint64_t seed, size_t n_train, size_t n_eval, size_t dim,
                                       size_t n_classes, double noise = 0.3);

/// Plain float MLP with backprop, used to train toy models and to run the
/// fine-tuning restoration attack on an exposed model.
class TrainableMLP {
public:
    static TrainableMLP from_model(const ModelParams& model);
    ModelParams to_model() const;

    /// Mean loss over a labeled set.
    double risk(const std::vector<std::pair<std::vector<double>, uint32_t>>& data,
                LossKind loss) const;

    /// One pass of minibatch SGD over the shuffled training split.
    void sgd_epoch(const EvalTask& task, double learning_rate, ChaChaStream& shuffle_rng,
                   size_t batch_size = 16);

    std::vector<double> forward(const std::vector<double>& x) const;

private:
    struct LayerGrad;
    std::vector<Mat> weights_;
    std::vector<std::vector<double>> biases_;
    std::vector<Activation> acts_;
    std::vector<LayerId> ids_;
};

/// Train a model in place on the task's train split; returns eval risk per
/// epoch (index 0 = before any update).
std::vector<double> train_model(ModelParams& model, const EvalTask& task, size_t epochs,
                                double learning_rate, uint64_t seed);

} // namespace slip
