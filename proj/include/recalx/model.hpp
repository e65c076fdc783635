#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "recalx/coalition.hpp"
#include "recalx/dataset.hpp"
#include "recalx/perturbation.hpp"

namespace recalx {

// Classifier f: logits z(x) in R^K; probabilities are softmax(z).
//
// logits_under is the coalition-aware entry point used by restricted
// prediction: the Bayes restricted oracle conditions on WHICH coordinates
// were perturbed, not just on the perturbed point, so it needs S alongside
// pi(x, S). Ordinary models ignore S.
class Classifier {
public:
    virtual ~Classifier() = default;

    virtual int n_classes() const = 0;
    virtual int input_dim() const = 0;
    virtual std::vector<double> logits(std::span<const double> x) const = 0;

    virtual std::vector<double> logits_under(std::span<const double> x_perturbed,
                                             const Coalition& s) const {
        require(s.d == input_dim(), ErrorCode::invalid_argument,
                "logits_under: coalition dimension mismatch");
        return logits(x_perturbed);
    }
};

// softmax(logits(m, x)); positive components summing to 1.
std::vector<double> predict_proba(const Classifier& m, std::span<const double> x);

class ConstantClassifier final : public Classifier {
public:
    ConstantClassifier(std::vector<double> fixed_logits, int input_dim);

    int n_classes() const override { return static_cast<int>(logits_.size()); }
    int input_dim() const override { return d_; }
    std::vector<double> logits(std::span<const double> x) const override;

private:
    std::vector<double> logits_;
    int d_ = 0;
};

// Fully connected ReLU network with linear output. dims = [input, hidden...,
// n_classes]; weights[l] is dims[l+1] x dims[l] row-major.
class MlpClassifier final : public Classifier {
public:
    std::vector<int> dims;
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    void validate() const;

    int n_classes() const override { return dims.back(); }
    int input_dim() const override { return dims.front(); }
    std::vector<double> logits(std::span<const double> x) const override;
};

struct TrainConfig {
    std::vector<int> hidden_sizes{16};
    int epochs = 50;
    int batch_size = 32;
    double learning_rate = 0.05;
    double momentum = 0.9;   // 0 disables the momentum buffer
    double weight_decay = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

// Mini-batch SGD on the softmax cross-entropy loss. Deterministic given
// cfg.seed: fixed He-uniform initialization, fixed per-epoch shuffle stream,
// fixed batch accumulation order. Aborts when a batch loss goes non-finite,
// naming the epoch and batch.
MlpClassifier train_mlp(const Dataset& train, const TrainConfig& cfg);

// Exact conditional classifier over a finite joint, aware of perturbations:
// on input pi(x, S) it outputs log P(Y | pi(X, S) = pi(x, S)), computed by
// enumeration over the joint's support. Perturbed points with pushforward
// probability zero fall back to the class marginal. Requires a deterministic
// strategy whose replacement values stay inside each coordinate's alphabet.
class BayesRestrictedOracle final : public Classifier {
public:
    BayesRestrictedOracle(FiniteJoint joint, PerturbationStrategy strategy);

    int n_classes() const override { return joint_.n_classes; }
    int input_dim() const override { return joint_.dim(); }

    // Plain logits condition on the unperturbed point (S = full set).
    std::vector<double> logits(std::span<const double> x) const override;
    std::vector<double> logits_under(std::span<const double> x_perturbed,
                                     const Coalition& s) const override;

    const FiniteJoint& joint() const { return joint_; }

private:
    using Table = std::map<std::vector<double>, std::vector<double>>;
    const Table& table_for(std::uint64_t kept) const;

    FiniteJoint joint_;
    PerturbationStrategy strategy_;
    std::vector<double> marginal_log_;
    mutable std::map<std::uint64_t, Table> cache_;
    mutable std::mutex cache_mutex_;
};

// Wrappers that plant miscalibration without changing any argmax.

// Multiplies every logit vector by a constant factor.
class ScaledLogitsClassifier final : public Classifier {
public:
    ScaledLogitsClassifier(std::shared_ptr<const Classifier> inner, double factor);

    int n_classes() const override { return inner_->n_classes(); }
    int input_dim() const override { return inner_->input_dim(); }
    std::vector<double> logits(std::span<const double> x) const override;
    std::vector<double> logits_under(std::span<const double> x_perturbed,
                                     const Coalition& s) const override;

private:
    std::shared_ptr<const Classifier> inner_;
    double factor_ = 1.0;
};

// Multiplies logits by a constant factor only when the perturbation level of
// the coalition exceeds a threshold; plain logits() uses the full coalition
// (level 0) and is never scaled for thresholds >= 0.
class LevelScaledLogitsClassifier final : public Classifier {
public:
    LevelScaledLogitsClassifier(std::shared_ptr<const Classifier> inner, double factor,
                                double level_threshold);

    int n_classes() const override { return inner_->n_classes(); }
    int input_dim() const override { return inner_->input_dim(); }
    std::vector<double> logits(std::span<const double> x) const override;
    std::vector<double> logits_under(std::span<const double> x_perturbed,
                                     const Coalition& s) const override;

private:
    std::shared_ptr<const Classifier> inner_;
    double factor_ = 1.0;
    double threshold_ = 0.5;
};

}  // namespace recalx
