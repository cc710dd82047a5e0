#pragma once

// Training procedures over the joint parameter set:
//   flat        - per batch, one clean update, a K-step PGD inner loop
//                 against the current model, then one adversarial update;
//                 main and controller parameters move together.
//   standard_at - adversarial-only updates on a plain classifier.
//   natural     - clean updates only.
// Plus SGD with momentum and weight decay, and the three-phase piecewise
// learning-rate schedule.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <type_traits>
#include <vector>

#include "flatnn/attacks.hpp"
#include "flatnn/data.hpp"
#include "flatnn/errors.hpp"
#include "flatnn/nn.hpp"
#include "flatnn/rng.hpp"
#include "flatnn/tensor.hpp"

namespace flatnn {

enum class TrainMethod { flat, standard_at, natural };

inline std::string to_string(TrainMethod m) {
    switch (m) {
        case TrainMethod::flat: return "flat";
        case TrainMethod::standard_at: return "standard_at";
        default: return "natural";
    }
}

struct TrainConfig {
    TrainMethod method = TrainMethod::flat;
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    double lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::size_t lr_break1 = 0;  // 0: defaults to epochs/3
    std::size_t lr_break2 = 0;  // 0: defaults to 2*epochs/3

    // Inner-loop attack budget. attack_steps = 0 degenerates the inner loop:
    // flat performs two clean updates, standard_at reduces to natural.
    double eps = 0.3;
    double kappa = 0.075;
    std::size_t attack_steps = 10;
    bool attack_random_start = true;

    std::uint64_t seed = 1;

    // Held-out probe for per-epoch accuracy tracking; rows are taken from the
    // tail of the dataset and excluded from training. Capped at n/4.
    std::size_t probe_count = 200;

    // Diagnostic switch: keep the controller fixed while training a feedback
    // model (used for controlled comparisons against standard AT).
    bool freeze_controller = false;

    std::size_t resolved_break1() const {
        return lr_break1 != 0 ? lr_break1 : std::max<std::size_t>(1, epochs / 3);
    }
    std::size_t resolved_break2() const {
        return lr_break2 != 0 ? lr_break2 : std::max(resolved_break1(), 2 * epochs / 3);
    }

    void validate() const {
        if (epochs < 1) throw ValueError("TrainConfig: epochs must be >= 1");
        if (!(lr > 0.0)) throw ValueError("TrainConfig: learning rate must be positive");
        if (batch_size < 1) throw ValueError("TrainConfig: batch size must be >= 1");
        if (momentum < 0.0 || weight_decay < 0.0)
            throw ValueError("TrainConfig: momentum and weight decay must be >= 0");
        const std::size_t b1 = resolved_break1(), b2 = resolved_break2();
        if (!(b1 >= 1 && b1 <= b2 && b2 <= epochs))
            throw ValueError("TrainConfig: schedule breakpoints must satisfy 1 <= b1 <= b2 <= epochs");
        if (attack_steps > 0) {
            if (!(eps > 0.0)) throw ValueError("TrainConfig: eps must be positive");
            if (!(kappa > 0.0)) throw ValueError("TrainConfig: kappa must be positive");
        }
    }
};

struct EpochStats {
    std::size_t epoch = 0;
    double lr = 0.0;
    double clean_loss = 0.0;
    double adv_loss = 0.0;
    double clean_acc = 0.0;
    double robust_acc = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    std::size_t batches_seen = 0;
    std::size_t param_updates = 0;

    std::string to_csv() const {
        std::string out = "epoch,lr,clean_loss,adv_loss,clean_acc,robust_acc\n";
        char buf[160];
        for (const EpochStats& e : epochs) {
            std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", e.epoch, e.lr,
                          e.clean_loss, e.adv_loss, e.clean_acc, e.robust_acc);
            out += buf;
        }
        return out;
    }
};

/// Piecewise schedule over 1-based epochs: constant at lr until break1,
/// linear down to lr/10 at break2, then linear down to lr/100 at the last
/// epoch. Non-increasing in the epoch.
inline double lr_schedule(std::size_t epoch, const TrainConfig& cfg) {
    if (epoch < 1 || epoch > cfg.epochs) throw ValueError("lr_schedule: epoch out of range");
    const std::size_t b1 = cfg.resolved_break1(), b2 = cfg.resolved_break2();
    if (epoch <= b1) return cfg.lr;
    if (epoch <= b2) {
        const double t = static_cast<double>(epoch - b1) / static_cast<double>(b2 - b1);
        return cfg.lr * (1.0 - 0.9 * t);
    }
    const double t = static_cast<double>(epoch - b2) / static_cast<double>(cfg.epochs - b2);
    return cfg.lr * (0.1 - 0.09 * t);
}

/// SGD with momentum and decoupled-into-the-gradient weight decay:
///   v <- momentum*v + grad + weight_decay*param;  param <- param - lr*v.
/// Velocity persists across calls for the lifetime of the optimizer.
class Sgd {
public:
    Sgd(double momentum, double weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {}

    void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, double lr) {
        if (params.size() != grads.size())
            throw ValueError("Sgd::step: parameter/gradient count mismatch");
        if (velocity_.empty()) {
            velocity_.resize(params.size());
            for (std::size_t i = 0; i < params.size(); ++i)
                velocity_[i].assign(params[i]->size(), 0.0);
        }
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (!same_shape(*params[i], grads[i]))
                throw ShapeError("Sgd::step: gradient shape " + shape_str(grads[i].shape) +
                                 " does not match parameter " + shape_str(params[i]->shape));
            if (!all_finite(grads[i]))
                throw TrainingError("non-finite gradient in parameter tensor " + std::to_string(i));
            auto& v = velocity_[i];
            Tensor& p = *params[i];
            for (std::size_t j = 0; j < p.size(); ++j) {
                v[j] = momentum_ * v[j] + grads[i].data[j] + weight_decay_ * p.data[j];
                p.data[j] -= lr * v[j];
            }
        }
    }

private:
    double momentum_, weight_decay_;
    std::vector<std::vector<double>> velocity_;
};

// The seed derivations below are part of the training contract: epoch
// shuffles, per-batch attack noise and the probe attack are all reproducible
// functions of (config seed, epoch, batch).
inline std::uint64_t epoch_shuffle_seed(std::uint64_t seed, std::size_t epoch) {
    return derive_seed(seed, 0xe90c4, epoch);
}
inline std::uint64_t batch_attack_seed(std::uint64_t seed, std::size_t epoch, std::size_t batch) {
    return derive_seed(seed, 0xa77ac4 + epoch, batch);
}
inline std::uint64_t probe_attack_seed(std::uint64_t seed, std::size_t epoch) {
    return derive_seed(seed, 0x9e0be, epoch);
}

namespace detail {

template <class Model>
double eval_loss(const Model& model, const Tensor& x, std::span<const int> y) {
    return softmax_cross_entropy(model_logits(model, x), y).data[0];
}

/// One SGD update of `params` on batch (x, y); returns the loss. Parameters
/// are left detached from any gradient record.
template <class Model>
double update_step(Model& model, const std::vector<Tensor*>& params, Sgd& opt, const Tensor& x,
                   std::span<const int> y, double lr, std::size_t epoch, std::size_t batch_idx,
                   TrainHistory& hist) {
    GradientRecord rec;
    for (Tensor* t : params) rec.watch(*t);
    Tensor loss = softmax_cross_entropy(model_logits(model, x), y);
    backward(rec, loss);
    std::vector<Tensor> grads;
    grads.reserve(params.size());
    for (Tensor* t : params) grads.push_back(rec.adjoint(*t));
    for (Tensor* t : params) t->record = nullptr;

    const std::string where =
        " at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_idx);
    if (!std::isfinite(loss.data[0])) throw TrainingError("non-finite loss" + where);
    try {
        opt.step(params, grads, lr);
    } catch (const TrainingError& e) {
        throw TrainingError(std::string(e.what()) + where);
    }
    hist.param_updates += 1;
    return loss.data[0];
}

template <class Model>
TrainHistory run_epochs(Model& model, const Dataset& data, const TrainConfig& cfg, TrainMethod method) {
    TrainHistory hist;
    if (cfg.epochs == 0) return hist;
    cfg.validate();
    data.validate();

    const std::size_t probe_n = std::min(cfg.probe_count, data.size() / 4);
    const Dataset train = slice(data, 0, data.size() - probe_n);
    const Dataset probe = probe_n > 0 ? slice(data, data.size() - probe_n, probe_n) : Dataset{};

    std::vector<Tensor*> params = parameter_list(model);
    if constexpr (std::is_same_v<Model, FeedbackModel>) {
        if (cfg.freeze_controller) params = parameter_list(model.main);
    }
    Sgd opt(cfg.momentum, cfg.weight_decay);

    AttackBudget inner;
    const bool attack_on = cfg.attack_steps > 0 && method != TrainMethod::natural;
    if (attack_on) {
        inner = AttackBudget{cfg.eps, cfg.kappa, cfg.attack_steps, cfg.attack_random_start, data.lo,
                             data.hi};
        inner.validate();
    }

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double lr = lr_schedule(epoch, cfg);
        double clean_sum = 0.0, adv_sum = 0.0;
        std::size_t nb = 0;
        for (const Batch& b : batches(train, cfg.batch_size, epoch_shuffle_seed(cfg.seed, epoch), true)) {
            double clean_loss = 0.0, adv_loss = 0.0;
            switch (method) {
                case TrainMethod::natural: {
                    clean_loss = update_step(model, params, opt, b.x, b.y, lr, epoch, nb, hist);
                    adv_loss = clean_loss;
                    break;
                }
                case TrainMethod::standard_at: {
                    clean_loss = eval_loss(model, b.x, b.y);
                    Tensor x_adv = attack_on
                                       ? pgd(model, b.x, b.y, inner,
                                             batch_attack_seed(cfg.seed, epoch, nb))
                                       : b.x.detached();
                    adv_loss = update_step(model, params, opt, x_adv, b.y, lr, epoch, nb, hist);
                    break;
                }
                case TrainMethod::flat: {
                    clean_loss = update_step(model, params, opt, b.x, b.y, lr, epoch, nb, hist);
                    Tensor x_adv = attack_on
                                       ? pgd(model, b.x, b.y, inner,
                                             batch_attack_seed(cfg.seed, epoch, nb))
                                       : b.x.detached();
                    adv_loss = update_step(model, params, opt, x_adv, b.y, lr, epoch, nb, hist);
                    break;
                }
            }
            clean_sum += clean_loss;
            adv_sum += adv_loss;
            hist.batches_seen += 1;
            ++nb;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.lr = lr;
        stats.clean_loss = nb > 0 ? clean_sum / static_cast<double>(nb) : 0.0;
        stats.adv_loss = nb > 0 ? adv_sum / static_cast<double>(nb) : 0.0;
        if (probe_n > 0) {
            stats.clean_acc = accuracy_percent(model, probe.inputs, probe.labels);
            if (cfg.eps > 0.0 && cfg.kappa > 0.0) {
                AttackBudget pb{cfg.eps, cfg.kappa, 10, true, data.lo, data.hi};
                Tensor probe_adv = pgd(model, probe.inputs, probe.labels, pb,
                                       probe_attack_seed(cfg.seed, epoch));
                stats.robust_acc = accuracy_percent(model, probe_adv, probe.labels);
            }
        }
        hist.epochs.push_back(stats);
    }
    return hist;
}

}  // namespace detail

/// Feedback-looped adversarial training: clean update, K-step PGD against
/// the current aggregate model, adversarial update -- every batch, over the
/// joint parameters of classifier and controller.
inline TrainHistory flat_train(FeedbackModel& model, const Dataset& data, const TrainConfig& cfg) {
    model.validate();
    return detail::run_epochs(model, data, cfg, TrainMethod::flat);
}

/// The unmodified adversarial-training baseline: one PGD-generated batch and
/// one adversarial update, no clean update, no controller.
inline TrainHistory standard_at_train(ModelParams& model, const Dataset& data, const TrainConfig& cfg) {
    return detail::run_epochs(model, data, cfg, TrainMethod::standard_at);
}

/// Clean updates only.
template <class Model>
TrainHistory natural_train(Model& model, const Dataset& data, const TrainConfig& cfg) {
    return detail::run_epochs(model, data, cfg, TrainMethod::natural);
}

}  // namespace flatnn
