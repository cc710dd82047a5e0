#pragma once

// Fully connected classifier f(X, theta_f), fully connected controller
// g(Y, theta_g), and the unrolled feedback model that wires them together:
// each cycle runs f, derives a correction from the controller, subtracts it
// from the current input, and the final pass through f produces the logits.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "flatnn/errors.hpp"
#include "flatnn/rng.hpp"
#include "flatnn/tensor.hpp"

namespace flatnn {

struct MlpSpec {
    std::size_t input = 0;
    std::vector<std::size_t> hidden;
    std::size_t output = 0;

    void validate() const {
        if (input == 0 || output == 0)
            throw ValueError("MlpSpec: input and output widths must be >= 1");
        if (hidden.empty()) throw ValueError("MlpSpec: at least one hidden layer is required");
        for (std::size_t w : hidden)
            if (w == 0) throw ValueError("MlpSpec: hidden widths must be >= 1");
    }

    std::vector<std::size_t> widths() const {
        std::vector<std::size_t> w;
        w.push_back(input);
        w.insert(w.end(), hidden.begin(), hidden.end());
        w.push_back(output);
        return w;
    }

    std::size_t last_hidden() const { return hidden.back(); }

    bool operator==(const MlpSpec&) const = default;
};

struct ModelParams {
    std::vector<Tensor> weights;  // layer l: [width_l x width_{l+1}]
    std::vector<Tensor> biases;   // layer l: [width_{l+1}]

    std::size_t layer_count() const { return weights.size(); }
};

/// Glorot-uniform weights, zero biases, fully determined by the seed.
inline ModelParams init_params(const MlpSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(derive_seed(seed, 0x1417));
    const std::vector<std::size_t> w = spec.widths();
    ModelParams params;
    for (std::size_t l = 0; l + 1 < w.size(); ++l) {
        const double limit = std::sqrt(6.0 / static_cast<double>(w[l] + w[l + 1]));
        Tensor weight = Tensor::zeros({w[l], w[l + 1]});
        for (double& v : weight.data) v = rng.uniform(-limit, limit);
        params.weights.push_back(std::move(weight));
        params.biases.push_back(Tensor::zeros({w[l + 1]}));
    }
    return params;
}

struct MlpOutput {
    Tensor logits;
    Tensor last_hidden;
};

/// ReLU hidden layers, linear output layer. Returns the logits and the final
/// hidden activation (the "features" fed to the controller in
/// features_and_predictions mode).
inline MlpOutput mlp_forward(const ModelParams& params, const Tensor& x) {
    if (params.layer_count() < 2) throw ValueError("mlp_forward: params must have >= 2 layers");
    if (x.rank() != 2 || x.shape[1] != params.weights.front().shape[0])
        throw ShapeError("mlp_forward: input " + shape_str(x.shape) + " does not match first layer " +
                         shape_str(params.weights.front().shape));
    Tensor h = x;
    for (std::size_t l = 0; l + 1 < params.layer_count(); ++l)
        h = relu(add(matmul(h, params.weights[l]), params.biases[l]));
    Tensor logits = add(matmul(h, params.weights.back()), params.biases.back());
    return {std::move(logits), std::move(h)};
}

enum class ControllerInput { predictions_only, features_and_predictions };

inline std::string to_string(ControllerInput mode) {
    return mode == ControllerInput::predictions_only ? "predictions_only" : "features_and_predictions";
}

/// Main classifier plus trainable controller, unrolled `unroll` times.
struct FeedbackModel {
    MlpSpec main_spec;
    MlpSpec controller_spec;
    ModelParams main;
    ModelParams controller;
    std::size_t unroll = 1;
    ControllerInput mode = ControllerInput::predictions_only;

    void validate() const {
        main_spec.validate();
        controller_spec.validate();
        if (unroll == 0) throw ValueError("FeedbackModel: unroll count must be >= 1");
        if (controller_spec.output != main_spec.input)
            throw ValueError("FeedbackModel: controller output width " +
                             std::to_string(controller_spec.output) +
                             " must equal the classifier input width " + std::to_string(main_spec.input));
        const std::size_t want_in = mode == ControllerInput::predictions_only
                                        ? main_spec.output
                                        : main_spec.last_hidden() + main_spec.output;
        if (controller_spec.input != want_in)
            throw ValueError("FeedbackModel: controller input width " +
                             std::to_string(controller_spec.input) + " must be " +
                             std::to_string(want_in) + " in mode " + to_string(mode));
    }
};

/// Builds a feedback model with freshly initialized main and controller
/// networks; the controller input width is derived from the mode.
inline FeedbackModel make_feedback_model(MlpSpec main_spec, std::vector<std::size_t> controller_hidden,
                                         std::size_t unroll, ControllerInput mode, std::uint64_t seed) {
    main_spec.validate();
    FeedbackModel m;
    m.main_spec = std::move(main_spec);
    m.controller_spec.input = mode == ControllerInput::predictions_only
                                  ? m.main_spec.output
                                  : m.main_spec.last_hidden() + m.main_spec.output;
    m.controller_spec.hidden = std::move(controller_hidden);
    m.controller_spec.output = m.main_spec.input;
    m.unroll = unroll;
    m.mode = mode;
    m.main = init_params(m.main_spec, derive_seed(seed, 0xf00d));
    m.controller = init_params(m.controller_spec, derive_seed(seed, 0xc0de));
    m.validate();
    return m;
}

/// One controller evaluation: maps the classifier outputs (and, in
/// features_and_predictions mode, the last hidden features) to an
/// input-space correction. last_hidden is ignored in predictions_only mode.
inline Tensor controller_forward(const FeedbackModel& model, const Tensor& logits,
                                 const Tensor& last_hidden) {
    if (model.mode == ControllerInput::predictions_only)
        return mlp_forward(model.controller, logits).logits;
    return mlp_forward(model.controller, concat_cols(last_hidden, logits)).logits;
}

/// Per-cycle observability hook for feedback_forward.
struct FeedbackTrace {
    std::vector<Tensor> corrections;  // controller output of each cycle
    Tensor corrected_input;           // the value fed to the final classifier pass
};

/// Unrolled feedback forward pass: `unroll` cycles of
///   (logits, hidden) <- f(x_cur);  dxp <- g(...);  x_cur <- x_cur - dxp;
/// followed by one final pass logits <- f(x_cur). With unroll = 1 this is
/// exactly f, g, subtract, f. The whole computation stays on one gradient
/// record, so adjoints flow through every pass.
inline Tensor feedback_forward(const FeedbackModel& model, const Tensor& x, FeedbackTrace* trace = nullptr) {
    Tensor x_cur = x;
    for (std::size_t p = 0; p < model.unroll; ++p) {
        MlpOutput out = mlp_forward(model.main, x_cur);
        Tensor correction = controller_forward(model, out.logits, out.last_hidden);
        if (trace) trace->corrections.push_back(correction.detached());
        x_cur = sub(x_cur, correction);
    }
    if (trace) trace->corrected_input = x_cur.detached();
    return mlp_forward(model.main, x_cur).logits;
}

/// Uniform logits entry point used by attacks, training and evaluation.
inline Tensor model_logits(const ModelParams& m, const Tensor& x) { return mlp_forward(m, x).logits; }
inline Tensor model_logits(const FeedbackModel& m, const Tensor& x) { return feedback_forward(m, x); }

inline std::vector<Tensor*> parameter_list(ModelParams& m) {
    std::vector<Tensor*> out;
    for (std::size_t l = 0; l < m.layer_count(); ++l) {
        out.push_back(&m.weights[l]);
        out.push_back(&m.biases[l]);
    }
    return out;
}

/// Joint parameter set {theta_f, theta_g}; both halves train together.
inline std::vector<Tensor*> parameter_list(FeedbackModel& m) {
    std::vector<Tensor*> out = parameter_list(m.main);
    std::vector<Tensor*> ctrl = parameter_list(m.controller);
    out.insert(out.end(), ctrl.begin(), ctrl.end());
    return out;
}

inline void zero_params(ModelParams& m) {
    for (Tensor* t : parameter_list(m))
        for (double& v : t->data) v = 0.0;
}

/// Row-wise argmax of the logits; ties resolve to the lowest index.
template <class Model>
std::vector<int> predict_classes(const Model& m, const Tensor& x) {
    Tensor logits = model_logits(m, x.detached());
    const std::size_t batch = logits.shape[0], classes = logits.shape[1];
    std::vector<int> out(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < classes; ++j)
            if (logits(i, j) > logits(i, best)) best = j;
        out[i] = static_cast<int>(best);
    }
    return out;
}

/// Top-1 accuracy in percent.
template <class Model>
double accuracy_percent(const Model& m, const Tensor& x, std::span<const int> y) {
    std::vector<int> pred = predict_classes(m, x);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == y[i]) ++hits;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(pred.size());
}

}  // namespace flatnn
