#include "recalx/model.hpp"

#include <algorithm>
#include <cmath>

#include "recalx/numeric.hpp"
#include "recalx/rng.hpp"

namespace recalx {

std::vector<double> predict_proba(const Classifier& m, std::span<const double> x) {
    return softmax(m.logits(x));
}

ConstantClassifier::ConstantClassifier(std::vector<double> fixed_logits, int input_dim)
    : logits_(std::move(fixed_logits)), d_(input_dim) {
    require(!logits_.empty(), ErrorCode::invalid_argument,
            "ConstantClassifier: empty logit vector");
    require(all_finite(logits_), ErrorCode::numeric, "ConstantClassifier: non-finite logits");
    require(d_ >= 1, ErrorCode::invalid_argument, "ConstantClassifier: input_dim must be >= 1");
}

std::vector<double> ConstantClassifier::logits(std::span<const double> x) const {
    require(static_cast<int>(x.size()) == d_, ErrorCode::invalid_argument,
            "ConstantClassifier: input dimension mismatch");
    return logits_;
}

void MlpClassifier::validate() const {
    require(dims.size() >= 2, ErrorCode::invalid_argument, "MlpClassifier: need >= 2 layer dims");
    for (int v : dims) {
        require(v >= 1, ErrorCode::invalid_argument, "MlpClassifier: layer dims must be >= 1");
    }
    const std::size_t layers = dims.size() - 1;
    require(weights.size() == layers && biases.size() == layers, ErrorCode::invalid_argument,
            "MlpClassifier: layer count mismatch");
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t rows = static_cast<std::size_t>(dims[l + 1]);
        const std::size_t cols = static_cast<std::size_t>(dims[l]);
        require(weights[l].size() == rows * cols, ErrorCode::invalid_argument,
                "MlpClassifier: weight matrix shape mismatch at layer " + std::to_string(l));
        require(biases[l].size() == rows, ErrorCode::invalid_argument,
                "MlpClassifier: bias length mismatch at layer " + std::to_string(l));
        require(all_finite(weights[l]) && all_finite(biases[l]), ErrorCode::numeric,
                "MlpClassifier: non-finite parameter at layer " + std::to_string(l));
    }
}

std::vector<double> MlpClassifier::logits(std::span<const double> x) const {
    require(static_cast<int>(x.size()) == input_dim(), ErrorCode::invalid_argument,
            "MlpClassifier: input dimension mismatch");
    require(all_finite(x), ErrorCode::numeric, "MlpClassifier: non-finite input");
    std::vector<double> act(x.begin(), x.end());
    std::vector<double> next;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const std::size_t rows = static_cast<std::size_t>(dims[l + 1]);
        const std::size_t cols = static_cast<std::size_t>(dims[l]);
        next.assign(rows, 0.0);
        const double* w = weights[l].data();
        for (std::size_t r = 0; r < rows; ++r) {
            double s = biases[l][r];
            const double* wr = w + r * cols;
            for (std::size_t c = 0; c < cols; ++c) s += wr[c] * act[c];
            next[r] = s;
        }
        if (l + 2 < dims.size()) {
            for (double& v : next) v = std::max(v, 0.0);  // ReLU on hidden layers
        }
        act.swap(next);
    }
    return act;
}

void TrainConfig::validate() const {
    for (int h : hidden_sizes) {
        require(h >= 1, ErrorCode::invalid_argument, "TrainConfig: hidden sizes must be >= 1");
    }
    require(epochs >= 0, ErrorCode::invalid_argument, "TrainConfig: epochs must be >= 0");
    require(batch_size >= 1, ErrorCode::invalid_argument, "TrainConfig: batch_size must be >= 1");
    require(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorCode::invalid_argument,
            "TrainConfig: learning_rate must be > 0");
    require(momentum >= 0.0 && momentum < 1.0, ErrorCode::invalid_argument,
            "TrainConfig: momentum must be in [0,1)");
    require(weight_decay >= 0.0 && std::isfinite(weight_decay), ErrorCode::invalid_argument,
            "TrainConfig: weight_decay must be >= 0");
}

namespace {

struct Workspace {
    // Per-layer pre-activations and activations for one sample.
    std::vector<std::vector<double>> z;  // z[l] has dims[l+1] entries
    std::vector<std::vector<double>> a;  // a[l] has dims[l] entries; a[0] = input
};

}  // namespace

MlpClassifier train_mlp(const Dataset& train, const TrainConfig& cfg) {
    train.require_nonempty();
    cfg.validate();

    MlpClassifier net;
    net.dims.push_back(train.dim());
    for (int h : cfg.hidden_sizes) net.dims.push_back(h);
    net.dims.push_back(train.n_classes);

    const std::size_t layers = net.dims.size() - 1;
    Rng init_rng(derive_seed(cfg.seed, "mlp-init"));
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t rows = static_cast<std::size_t>(net.dims[l + 1]);
        const std::size_t cols = static_cast<std::size_t>(net.dims[l]);
        const double limit = std::sqrt(6.0 / static_cast<double>(cols));  // He-uniform, fan-in
        std::vector<double> w(rows * cols);
        for (double& v : w) v = init_rng.uniform(-limit, limit);
        net.weights.push_back(std::move(w));
        net.biases.emplace_back(rows, 0.0);
    }
    net.validate();
    if (cfg.epochs == 0) return net;

    const std::size_t n = train.n();
    std::vector<std::vector<double>> grad_w, grad_b, vel_w, vel_b;
    for (std::size_t l = 0; l < layers; ++l) {
        grad_w.emplace_back(net.weights[l].size(), 0.0);
        grad_b.emplace_back(net.biases[l].size(), 0.0);
        vel_w.emplace_back(net.weights[l].size(), 0.0);
        vel_b.emplace_back(net.biases[l].size(), 0.0);
    }

    Workspace ws;
    ws.z.resize(layers);
    ws.a.resize(layers + 1);
    std::vector<double> delta, delta_prev;

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(cfg.seed, "mlp-shuffle"));

    const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < n; start += batch, ++batch_index) {
            const std::size_t stop = std::min(start + batch, n);
            const double inv_m = 1.0 / static_cast<double>(stop - start);
            for (std::size_t l = 0; l < layers; ++l) {
                std::fill(grad_w[l].begin(), grad_w[l].end(), 0.0);
                std::fill(grad_b[l].begin(), grad_b[l].end(), 0.0);
            }
            double batch_loss = 0.0;

            for (std::size_t pos = start; pos < stop; ++pos) {
                const std::size_t i = order[pos];
                const auto row = train.row(i);
                ws.a[0].assign(row.begin(), row.end());
                for (std::size_t l = 0; l < layers; ++l) {
                    const std::size_t rows = static_cast<std::size_t>(net.dims[l + 1]);
                    const std::size_t cols = static_cast<std::size_t>(net.dims[l]);
                    ws.z[l].assign(rows, 0.0);
                    const double* w = net.weights[l].data();
                    for (std::size_t r = 0; r < rows; ++r) {
                        double s = net.biases[l][r];
                        const double* wr = w + r * cols;
                        for (std::size_t c = 0; c < cols; ++c) s += wr[c] * ws.a[l][c];
                        ws.z[l][r] = s;
                    }
                    ws.a[l + 1] = ws.z[l];
                    if (l + 1 < layers) {
                        for (double& v : ws.a[l + 1]) v = std::max(v, 0.0);
                    }
                }

                const std::vector<double> p = softmax(ws.a[layers]);
                const int y = train.labels[i];
                batch_loss += -log_floored(p[static_cast<std::size_t>(y)]);

                delta = p;
                delta[static_cast<std::size_t>(y)] -= 1.0;
                for (std::size_t l = layers; l-- > 0;) {
                    const std::size_t rows = static_cast<std::size_t>(net.dims[l + 1]);
                    const std::size_t cols = static_cast<std::size_t>(net.dims[l]);
                    for (std::size_t r = 0; r < rows; ++r) {
                        const double g = delta[r];
                        grad_b[l][r] += g;
                        double* gw = grad_w[l].data() + r * cols;
                        for (std::size_t c = 0; c < cols; ++c) gw[c] += g * ws.a[l][c];
                    }
                    if (l > 0) {
                        delta_prev.assign(cols, 0.0);
                        const double* w = net.weights[l].data();
                        for (std::size_t r = 0; r < rows; ++r) {
                            const double g = delta[r];
                            const double* wr = w + r * cols;
                            for (std::size_t c = 0; c < cols; ++c) delta_prev[c] += wr[c] * g;
                        }
                        for (std::size_t c = 0; c < cols; ++c) {
                            if (ws.z[l - 1][c] <= 0.0) delta_prev[c] = 0.0;
                        }
                        delta.swap(delta_prev);
                    }
                }
            }

            batch_loss *= inv_m;
            require(std::isfinite(batch_loss), ErrorCode::numeric,
                    "train_mlp: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                        std::to_string(batch_index));

            // SGD step with momentum; weight decay applies to weights only.
            for (std::size_t l = 0; l < layers; ++l) {
                for (std::size_t j = 0; j < net.weights[l].size(); ++j) {
                    const double g = grad_w[l][j] * inv_m + cfg.weight_decay * net.weights[l][j];
                    vel_w[l][j] = cfg.momentum * vel_w[l][j] - cfg.learning_rate * g;
                    net.weights[l][j] += vel_w[l][j];
                }
                for (std::size_t j = 0; j < net.biases[l].size(); ++j) {
                    vel_b[l][j] = cfg.momentum * vel_b[l][j] -
                                  cfg.learning_rate * grad_b[l][j] * inv_m;
                    net.biases[l][j] += vel_b[l][j];
                }
            }
        }
    }
    net.validate();
    return net;
}

BayesRestrictedOracle::BayesRestrictedOracle(FiniteJoint joint, PerturbationStrategy strategy)
    : joint_(std::move(joint)), strategy_(std::move(strategy)) {
    joint_.validate();
    const int d = joint_.dim();
    require(d <= 16, ErrorCode::unsupported,
            "BayesRestrictedOracle: d > 16 would enumerate too many coalitions");
    strategy_.validate(d);
    require(!strategy_.stochastic(), ErrorCode::unsupported,
            "BayesRestrictedOracle: requires a deterministic strategy");

    // Replacement values must stay inside each coordinate's alphabet, or the
    // perturbed points leave the joint's support grid.
    const auto alphabets = joint_.alphabets();
    for (int c = 0; c < d; ++c) {
        double replacement = 0.0;
        if (strategy_.kind != PerturbationStrategy::Kind::zero_baseline) {
            replacement = strategy_.baseline[static_cast<std::size_t>(c)];
        }
        const auto& alpha = alphabets[static_cast<std::size_t>(c)];
        require(std::binary_search(alpha.begin(), alpha.end(), replacement), ErrorCode::domain,
                "BayesRestrictedOracle: replacement value leaves the alphabet at coordinate " +
                    std::to_string(c));
    }

    const auto marginal = joint_.class_marginal();
    marginal_log_.reserve(marginal.size());
    for (double p : marginal) marginal_log_.push_back(log_floored(p));
}

const BayesRestrictedOracle::Table& BayesRestrictedOracle::table_for(std::uint64_t kept) const {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    auto it = cache_.find(kept);
    if (it != cache_.end()) return it->second;

    const Coalition s(kept, joint_.dim());
    Table table;
    for (std::size_t i = 0; i < joint_.support_size(); ++i) {
        const std::vector<double> key = perturb(joint_.xs[i], s, strategy_, 0);
        auto& weights = table[key];
        if (weights.empty()) weights.assign(static_cast<std::size_t>(joint_.n_classes), 0.0);
        weights[static_cast<std::size_t>(joint_.ys[i])] += joint_.probs[i];
    }
    for (auto& [key, weights] : table) {
        double total = 0.0;
        for (double w : weights) total += w;
        for (double& w : weights) w = log_floored(w / total);
    }
    return cache_.emplace(kept, std::move(table)).first->second;
}

std::vector<double> BayesRestrictedOracle::logits(std::span<const double> x) const {
    return logits_under(x, Coalition::full(joint_.dim()));
}

std::vector<double> BayesRestrictedOracle::logits_under(std::span<const double> x_perturbed,
                                                        const Coalition& s) const {
    require(s.d == joint_.dim(), ErrorCode::invalid_argument,
            "BayesRestrictedOracle: coalition dimension mismatch");
    require(static_cast<int>(x_perturbed.size()) == joint_.dim(), ErrorCode::invalid_argument,
            "BayesRestrictedOracle: input dimension mismatch");
    const Table& table = table_for(s.kept);
    const std::vector<double> key(x_perturbed.begin(), x_perturbed.end());
    auto it = table.find(key);
    if (it == table.end()) return marginal_log_;  // pushforward probability 0
    return it->second;
}

ScaledLogitsClassifier::ScaledLogitsClassifier(std::shared_ptr<const Classifier> inner,
                                               double factor)
    : inner_(std::move(inner)), factor_(factor) {
    require(inner_ != nullptr, ErrorCode::invalid_argument, "ScaledLogitsClassifier: null inner");
    require(factor_ > 0.0 && std::isfinite(factor_), ErrorCode::invalid_argument,
            "ScaledLogitsClassifier: factor must be finite and > 0");
}

std::vector<double> ScaledLogitsClassifier::logits(std::span<const double> x) const {
    std::vector<double> z = inner_->logits(x);
    for (double& v : z) v *= factor_;
    return z;
}

std::vector<double> ScaledLogitsClassifier::logits_under(std::span<const double> x_perturbed,
                                                         const Coalition& s) const {
    std::vector<double> z = inner_->logits_under(x_perturbed, s);
    for (double& v : z) v *= factor_;
    return z;
}

LevelScaledLogitsClassifier::LevelScaledLogitsClassifier(std::shared_ptr<const Classifier> inner,
                                                         double factor, double level_threshold)
    : inner_(std::move(inner)), factor_(factor), threshold_(level_threshold) {
    require(inner_ != nullptr, ErrorCode::invalid_argument,
            "LevelScaledLogitsClassifier: null inner");
    require(factor_ > 0.0 && std::isfinite(factor_), ErrorCode::invalid_argument,
            "LevelScaledLogitsClassifier: factor must be finite and > 0");
    require(std::isfinite(threshold_), ErrorCode::invalid_argument,
            "LevelScaledLogitsClassifier: threshold must be finite");
}

std::vector<double> LevelScaledLogitsClassifier::logits(std::span<const double> x) const {
    std::vector<double> z = inner_->logits(x);
    if (0.0 > threshold_) {
        for (double& v : z) v *= factor_;
    }
    return z;
}

std::vector<double> LevelScaledLogitsClassifier::logits_under(std::span<const double> x_perturbed,
                                                              const Coalition& s) const {
    std::vector<double> z = inner_->logits_under(x_perturbed, s);
    if (perturbation_level(s) > threshold_) {
        for (double& v : z) v *= factor_;
    }
    return z;
}

}  // namespace recalx
