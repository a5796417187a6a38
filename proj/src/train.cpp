#include "slip/train.hpp"

#include <algorithm>
#include <cmath>

#include "slip/errors.hpp"

namespace slip {

namespace {

double uniform_pm1(ChaChaStream& rng) {
    return 2.0 * (static_cast<double>(rng.next_u64() >> 11) * 0x1.0p-53) - 1.0;
}

double gaussian(ChaChaStream& rng) {
    double u1 = static_cast<double>((rng.next_u64() >> 11) + 1) * 0x1.0p-53;
    double u2 = static_cast<double>(rng.next_u64() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

std::vector<double> softmax(std::vector<double> z) {
    double m = z[0];
    for (double v : z) m = std::max(m, v);
    double denom = 0.0;
    for (double& v : z) {
        v = std::exp(v - m);
        denom += v;
    }
    for (double& v : z) v /= denom;
    return z;
}

} // namespace

EvalTask make_synthetic_classification(uint64_t seed, size_t n_train, size_t n_eval, size_t dim,
                                       size_t n_classes, double noise) {
    ChaChaStream rng(seed, 0);
    EvalTask task;
    task.dim = dim;
    task.n_classes = n_classes;
    task.loss = LossKind::cross_entropy;

    std::vector<std::vector<double>> centers(n_classes, std::vector<double>(dim));
    for (auto& c : centers)
        for (double& v : c) v = uniform_pm1(rng);

    auto draw = [&](size_t n, std::vector<std::pair<std::vector<double>, uint32_t>>& out) {
        for (size_t i = 0; i < n; ++i) {
            uint32_t label = static_cast<uint32_t>(rng.next_below(n_classes));
            std::vector<double> x(dim);
            for (size_t j = 0; j < dim; ++j) x[j] = centers[label][j] + noise * gaussian(rng);
            out.emplace_back(std::move(x), label);
        }
    };
    draw(n_train, task.train);
    draw(n_eval, task.eval);
    return task;
}

struct TrainableMLP::LayerGrad {
    Mat w;
    std::vector<double> b;
};

TrainableMLP TrainableMLP::from_model(const ModelParams& model) {
    model.validate();
    if (model.kind == ModelKind::attention_head)
        throw ShapeError("trainer supports feed-forward models only");
    TrainableMLP t;
    for (const Layer& l : model.layers) {
        t.weights_.push_back(l.weight);
        t.biases_.push_back(l.bias ? *l.bias : std::vector<double>(l.weight.rows(), 0.0));
        t.acts_.push_back(l.act);
        t.ids_.push_back(l.id);
    }
    return t;
}

ModelParams TrainableMLP::to_model() const {
    ModelParams model;
    model.kind = ModelKind::mlp;
    for (size_t i = 0; i < weights_.size(); ++i) {
        Layer l;
        l.weight = weights_[i];
        l.bias = biases_[i];
        l.act = acts_[i];
        l.id = ids_[i];
        model.layers.push_back(std::move(l));
    }
    return model;
}

std::vector<double> TrainableMLP::forward(const std::vector<double>& x) const {
    std::vector<double> a = x;
    for (size_t i = 0; i < weights_.size(); ++i) {
        std::vector<double> z = weights_[i].matvec(a);
        for (size_t r = 0; r < z.size(); ++r) z[r] += biases_[i][r];
        switch (acts_[i]) {
            case Activation::relu:
                for (double& v : z)
                    if (v < 0.0) v = 0.0;
                break;
            case Activation::softmax: z = softmax(std::move(z)); break;
            case Activation::identity: break;
        }
        a = std::move(z);
    }
    return a;
}

double TrainableMLP::risk(const std::vector<std::pair<std::vector<double>, uint32_t>>& data,
                          LossKind loss) const {
    if (data.empty()) throw DomainError("risk: empty dataset");
    double total = 0.0;
    for (const auto& [x, label] : data) {
        std::vector<double> out = forward(x);
        if (loss == LossKind::cross_entropy) {
            // final softmax produces probabilities; clamp for log
            double p = std::max(out[label], 1e-12);
            total += -std::log(p);
        } else {
            double acc = 0.0;
            for (size_t i = 0; i < out.size(); ++i) {
                double want = (i == label) ? 1.0 : 0.0;
                acc += 0.5 * (out[i] - want) * (out[i] - want);
            }
            total += acc;
        }
    }
    return total / static_cast<double>(data.size());
}

void TrainableMLP::sgd_epoch(const EvalTask& task, double learning_rate, ChaChaStream& rng,
                             size_t batch_size) {
    const size_t n_layers = weights_.size();
    std::vector<size_t> order(task.train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.next_below(i)]);

    for (size_t start = 0; start < order.size(); start += batch_size) {
        size_t end = std::min(order.size(), start + batch_size);
        std::vector<LayerGrad> grads(n_layers);
        for (size_t i = 0; i < n_layers; ++i) {
            grads[i].w = Mat(weights_[i].rows(), weights_[i].cols());
            grads[i].b.assign(biases_[i].size(), 0.0);
        }

        for (size_t s = start; s < end; ++s) {
            const auto& [x, label] = task.train[order[s]];
            // forward, keeping activations
            std::vector<std::vector<double>> as;
            as.push_back(x);
            std::vector<std::vector<double>> zs;
            for (size_t i = 0; i < n_layers; ++i) {
                std::vector<double> z = weights_[i].matvec(as.back());
                for (size_t r = 0; r < z.size(); ++r) z[r] += biases_[i][r];
                zs.push_back(z);
                std::vector<double> a = z;
                switch (acts_[i]) {
                    case Activation::relu:
                        for (double& v : a)
                            if (v < 0.0) v = 0.0;
                        break;
                    case Activation::softmax: a = softmax(std::move(a)); break;
                    case Activation::identity: break;
                }
                as.push_back(std::move(a));
            }

            // output delta
            std::vector<double> delta = as.back();
            if (task.loss == LossKind::cross_entropy) {
                if (acts_.back() != Activation::softmax)
                    throw DomainError("cross entropy expects a softmax output layer");
                delta[label] -= 1.0; // softmax + CE
            } else {
                for (size_t i = 0; i < delta.size(); ++i)
                    delta[i] -= (i == label) ? 1.0 : 0.0;
                if (acts_.back() == Activation::relu)
                    for (size_t i = 0; i < delta.size(); ++i)
                        if (zs.back()[i] <= 0.0) delta[i] = 0.0;
            }

            for (size_t li = n_layers; li-- > 0;) {
                const std::vector<double>& a_prev = as[li];
                for (size_t r = 0; r < weights_[li].rows(); ++r) {
                    grads[li].b[r] += delta[r];
                    for (size_t c = 0; c < weights_[li].cols(); ++c)
                        grads[li].w(r, c) += delta[r] * a_prev[c];
                }
                if (li == 0) break;
                std::vector<double> delta_prev(weights_[li].cols(), 0.0);
                for (size_t r = 0; r < weights_[li].rows(); ++r)
                    for (size_t c = 0; c < weights_[li].cols(); ++c)
                        delta_prev[c] += weights_[li](r, c) * delta[r];
                if (acts_[li - 1] == Activation::relu) {
                    for (size_t c = 0; c < delta_prev.size(); ++c)
                        if (zs[li - 1][c] <= 0.0) delta_prev[c] = 0.0;
                } else if (acts_[li - 1] == Activation::softmax) {
                    throw DomainError("softmax must be the output layer for training");
                }
                delta = std::move(delta_prev);
            }
        }

        double step = learning_rate / static_cast<double>(end - start);
        for (size_t i = 0; i < n_layers; ++i) {
            for (size_t r = 0; r < weights_[i].rows(); ++r) {
                biases_[i][r] -= step * grads[i].b[r];
                for (size_t c = 0; c < weights_[i].cols(); ++c)
                    weights_[i](r, c) -= step * grads[i].w(r, c);
            }
        }
    }
}

std::vector<double> train_model(ModelParams& model, const EvalTask& task, size_t epochs,
                                double learning_rate, uint64_t seed) {
    TrainableMLP trainer = TrainableMLP::from_model(model);
    ChaChaStream rng(seed, 17);
    std::vector<double> history;
    history.push_back(trainer.risk(task.eval, task.loss));
    for (size_t e = 0; e < epochs; ++e) {
        trainer.sgd_epoch(task, learning_rate, rng);
        history.push_back(trainer.risk(task.eval, task.loss));
    }
    model = trainer.to_model();
    return history;
}

} // namespace slip
