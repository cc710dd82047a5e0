#pragma once

// Gradient-based adversarial example generation under an L-infinity budget:
// single-step FGSM, iterated PGD with projection and optional random start,
// and the momentum iterative method. Attacks are white-box: when the target
// is a feedback model they differentiate through every unrolled pass.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include "flatnn/errors.hpp"
#include "flatnn/rng.hpp"
#include "flatnn/tensor.hpp"

namespace flatnn {

/// L-infinity attack budget: ball radius, per-step size, iteration count,
/// random-start flag and the valid data range.
struct AttackBudget {
    double epsilon = 0.0;
    double kappa = 0.0;
    std::size_t steps = 1;
    bool random_start = false;
    double lo = 0.0;
    double hi = 1.0;

    void validate() const {
        if (!(epsilon > 0.0)) throw ValueError("AttackBudget: epsilon must be positive");
        if (!(kappa > 0.0)) throw ValueError("AttackBudget: kappa must be positive");
        if (steps < 1) throw ValueError("AttackBudget: step count must be >= 1");
        if (!(lo < hi)) throw ValueError("AttackBudget: bounds must satisfy lo < hi");
    }
};

/// Clamps x_adv into the epsilon-ball around x_ref, then into [lo, hi].
inline Tensor project_linf(const Tensor& x_adv, const Tensor& x_ref, const AttackBudget& budget) {
    if (!same_shape(x_adv, x_ref))
        throw ShapeError("project_linf: shapes differ: " + shape_str(x_adv.shape) + " vs " +
                         shape_str(x_ref.shape));
    Tensor out = x_adv.detached();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double lo_i = x_ref.data[i] - budget.epsilon;
        const double hi_i = x_ref.data[i] + budget.epsilon;
        double v = out.data[i];
        v = v < lo_i ? lo_i : (v > hi_i ? hi_i : v);
        v = v < budget.lo ? budget.lo : (v > budget.hi ? budget.hi : v);
        out.data[i] = v;
    }
    return out;
}

namespace detail {

inline double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// Gradient of the mean cross-entropy loss with respect to the input,
/// through the full model (parameters held constant).
template <class Model>
Tensor input_gradient(const Model& model, const Tensor& x, std::span<const int> labels) {
    GradientRecord rec;
    Tensor xin = x.detached();
    rec.watch(xin);
    Tensor loss = softmax_cross_entropy(model_logits(model, xin), labels);
    backward(rec, loss);
    return rec.adjoint(xin);
}

inline Tensor clamp_bounds(const Tensor& x, double lo, double hi) {
    Tensor out = x.detached();
    for (double& v : out.data) v = v < lo ? lo : (v > hi ? hi : v);
    return out;
}

}  // namespace detail

/// Single step of size epsilon along the gradient sign, clamped to the data
/// bounds; sign(0) = 0.
template <class Model>
Tensor fgsm(const Model& model, const Tensor& x, std::span<const int> labels, const AttackBudget& budget) {
    budget.validate();
    Tensor grad = detail::input_gradient(model, x, labels);
    Tensor out = x.detached();
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] += budget.epsilon * detail::sign0(grad.data[i]);
    return detail::clamp_bounds(out, budget.lo, budget.hi);
}

/// Projected gradient descent: K sign-gradient steps of size kappa, each
/// projected back onto the epsilon-ball and the data bounds. With
/// random_start the iterate begins at x plus uniform(-eps, eps) noise,
/// deterministic in `seed`.
template <class Model>
Tensor pgd(const Model& model, const Tensor& x, std::span<const int> labels, const AttackBudget& budget,
           std::uint64_t seed = 0) {
    budget.validate();
    Tensor cur = x.detached();
    if (budget.random_start) {
        Rng rng(derive_seed(seed, 0xadd));
        for (double& v : cur.data) v += rng.uniform(-budget.epsilon, budget.epsilon);
        cur = project_linf(cur, x, budget);
    }
    for (std::size_t k = 0; k < budget.steps; ++k) {
        Tensor grad = detail::input_gradient(model, cur, labels);
        for (std::size_t i = 0; i < cur.size(); ++i)
            cur.data[i] += budget.kappa * detail::sign0(grad.data[i]);
        cur = project_linf(cur, x, budget);
    }
    return cur;
}

/// Momentum iterative method: accumulates a per-example L1-normalized
/// gradient velocity with decay `mu`, then takes sign steps like PGD.
/// A zero gradient with zero velocity contributes a zero step.
template <class Model>
Tensor mim(const Model& model, const Tensor& x, std::span<const int> labels, const AttackBudget& budget,
           double mu = 1.0, std::uint64_t seed = 0) {
    budget.validate();
    if (mu < 0.0) throw ValueError("mim: momentum decay must be >= 0");

    const std::size_t batch = x.rank() == 2 ? x.shape[0] : 1;
    const std::size_t width = x.size() / batch;

    Tensor cur = x.detached();
    if (budget.random_start) {
        Rng rng(derive_seed(seed, 0xadd));
        for (double& v : cur.data) v += rng.uniform(-budget.epsilon, budget.epsilon);
        cur = project_linf(cur, x, budget);
    }
    Tensor velocity = Tensor::zeros(x.shape);
    for (std::size_t k = 0; k < budget.steps; ++k) {
        Tensor grad = detail::input_gradient(model, cur, labels);
        for (std::size_t r = 0; r < batch; ++r) {
            double l1 = 0.0;
            for (std::size_t j = 0; j < width; ++j) l1 += std::abs(grad.data[r * width + j]);
            for (std::size_t j = 0; j < width; ++j) {
                const std::size_t i = r * width + j;
                const double normalized = l1 > 0.0 ? grad.data[i] / l1 : 0.0;
                velocity.data[i] = mu * velocity.data[i] + normalized;
            }
        }
        for (std::size_t i = 0; i < cur.size(); ++i)
            cur.data[i] += budget.kappa * detail::sign0(velocity.data[i]);
        cur = project_linf(cur, x, budget);
    }
    return cur;
}

}  // namespace flatnn
