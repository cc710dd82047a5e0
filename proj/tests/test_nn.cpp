#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "flatnn/nn.hpp"
#include "flatnn/rng.hpp"

using namespace flatnn;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// Second, independently coded MLP forward pass used as an oracle: raw loops,
// no tensor ops.
std::vector<double> plain_forward(const ModelParams& p, const std::vector<double>& x, std::size_t batch,
                                  std::size_t in_dim) {
    std::vector<double> cur = x;
    std::size_t cur_dim = in_dim;
    for (std::size_t l = 0; l < p.layer_count(); ++l) {
        const std::size_t out_dim = p.weights[l].shape[1];
        std::vector<double> next(batch * out_dim, 0.0);
        for (std::size_t i = 0; i < batch; ++i)
            for (std::size_t j = 0; j < out_dim; ++j) {
                double acc = p.biases[l](j);
                for (std::size_t k = 0; k < cur_dim; ++k) acc += cur[i * cur_dim + k] * p.weights[l](k, j);
                const bool is_last = l + 1 == p.layer_count();
                next[i * out_dim + j] = is_last ? acc : std::max(0.0, acc);
            }
        cur = std::move(next);
        cur_dim = out_dim;
    }
    return cur;
}

// Relative error with a 1e-3 denominator floor (see test_tensor.cpp).
double max_rel_error(const Tensor& got, const Tensor& want) {
    REQUIRE(got.shape == want.shape);
    double worst = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        const double denom = std::max({std::abs(got.data[i]), std::abs(want.data[i]), 1e-3});
        worst = std::max(worst, std::abs(got.data[i] - want.data[i]) / denom);
    }
    return worst;
}

}  // namespace

TEST_CASE("init_params is deterministic with zero biases", "[nn]") {
    MlpSpec spec{4, {8, 6}, 3};
    ModelParams a = init_params(spec, 42);
    ModelParams b = init_params(spec, 42);
    ModelParams c = init_params(spec, 43);
    for (std::size_t l = 0; l < a.layer_count(); ++l) {
        CHECK(a.weights[l].data == b.weights[l].data);
        for (double v : a.biases[l].data) CHECK(v == 0.0);
    }
    CHECK(a.weights[0].data != c.weights[0].data);
}

TEST_CASE("init_params weight sample mean obeys the uniform law", "[nn]") {
    MlpSpec spec{512, {512}, 10};
    ModelParams p = init_params(spec, 7);
    const Tensor& w = p.weights[0];  // 512 x 512, limit sqrt(6/1024)
    const double limit = std::sqrt(6.0 / 1024.0);
    double mean = 0.0;
    for (double v : w.data) {
        CHECK(std::abs(v) <= limit);
        mean += v;
    }
    mean /= static_cast<double>(w.size());
    const double sigma_mean = limit / std::sqrt(3.0 * static_cast<double>(w.size()));
    CHECK(std::abs(mean) < 3.0 * sigma_mean);
}

TEST_CASE("mlp_forward zero parameters give zero logits", "[nn]") {
    MlpSpec spec{3, {5}, 4};
    ModelParams p = init_params(spec, 1);
    zero_params(p);
    Rng rng(2);
    Tensor x = random_tensor({6, 3}, rng);
    MlpOutput out = mlp_forward(p, x);
    for (double v : out.logits.data) CHECK(v == 0.0);
}

TEST_CASE("identity-configured hidden layer reduces to logits = xW + b", "[nn]") {
    // Hidden weights = I, bias = 0, non-negative inputs: relu acts as identity
    // and the network is the bare output layer.
    MlpSpec spec{3, {3}, 2};
    ModelParams p = init_params(spec, 5);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) p.weights[0](i, j) = i == j ? 1.0 : 0.0;
    for (double& v : p.biases[0].data) v = 0.0;

    Rng rng(6);
    Tensor x = random_tensor({4, 3}, rng, 0.0, 1.0);
    Tensor want = add(matmul(x, p.weights[1]), p.biases[1]);
    MlpOutput out = mlp_forward(p, x);
    for (std::size_t i = 0; i < want.size(); ++i)
        CHECK(out.logits.data[i] == Catch::Approx(want.data[i]).margin(1e-15));
}

TEST_CASE("mlp_forward matches an independently coded forward pass", "[nn]") {
    MlpSpec spec{5, {7, 6}, 4};
    ModelParams p = init_params(spec, 11);
    Rng rng(12);
    Tensor x = random_tensor({3, 5}, rng);
    MlpOutput out = mlp_forward(p, x);
    std::vector<double> want = plain_forward(p, x.data, 3, 5);
    REQUIRE(out.logits.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i)
        CHECK(out.logits.data[i] == Catch::Approx(want[i]).epsilon(1e-13));
    CHECK(out.last_hidden.shape == Shape{3, 6});
}

TEST_CASE("mlp_forward rejects width mismatch", "[nn]") {
    MlpSpec spec{4, {5}, 2};
    ModelParams p = init_params(spec, 3);
    CHECK_THROWS_AS(mlp_forward(p, Tensor::zeros({2, 7})), ShapeError);
}

TEST_CASE("MlpSpec validation", "[nn]") {
    CHECK_THROWS_AS((MlpSpec{0, {4}, 2}.validate()), ValueError);
    CHECK_THROWS_AS((MlpSpec{3, {}, 2}.validate()), ValueError);
    CHECK_THROWS_AS((MlpSpec{3, {4, 0}, 2}.validate()), ValueError);
    CHECK_NOTHROW((MlpSpec{3, {1}, 1}.validate()));
}

TEST_CASE("controller with zero parameters emits a zero correction", "[nn]") {
    FeedbackModel m = make_feedback_model({2, {6, 6}, 2}, {4, 5}, 1, ControllerInput::predictions_only, 9);
    zero_params(m.controller);
    Rng rng(10);
    Tensor logits = random_tensor({5, 2}, rng);
    Tensor hidden = random_tensor({5, 6}, rng);
    Tensor corr = controller_forward(m, logits, hidden);
    CHECK(corr.shape == Shape{5, 2});
    for (double v : corr.data) CHECK(v == 0.0);
}

TEST_CASE("predictions_only controller ignores the hidden features", "[nn]") {
    FeedbackModel m = make_feedback_model({3, {5}, 2}, {4}, 1, ControllerInput::predictions_only, 14);
    Rng rng(15);
    Tensor logits = random_tensor({4, 2}, rng);
    Tensor h1 = random_tensor({4, 5}, rng);
    Tensor h2 = random_tensor({4, 5}, rng);
    CHECK(controller_forward(m, logits, h1).data == controller_forward(m, logits, h2).data);
}

TEST_CASE("features_and_predictions controller matches the concat oracle", "[nn]") {
    FeedbackModel m =
        make_feedback_model({3, {5}, 2}, {6}, 1, ControllerInput::features_and_predictions, 20);
    CHECK(m.controller_spec.input == 5 + 2);
    Rng rng(21);
    Tensor logits = random_tensor({4, 2}, rng);
    Tensor hidden = random_tensor({4, 5}, rng);

    Tensor got = controller_forward(m, logits, hidden);

    // Oracle: explicit concatenation then the plain-loop forward pass.
    std::vector<double> cat(4 * 7);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 5; ++j) cat[i * 7 + j] = hidden(i, j);
        for (std::size_t j = 0; j < 2; ++j) cat[i * 7 + 5 + j] = logits(i, j);
    }
    std::vector<double> want = plain_forward(m.controller, cat, 4, 7);
    for (std::size_t i = 0; i < want.size(); ++i)
        CHECK(got.data[i] == Catch::Approx(want[i]).epsilon(1e-13));
}

TEST_CASE("zero controller makes the feedback loop inert at any unroll", "[nn]") {
    for (std::size_t unroll : {1ul, 2ul, 5ul}) {
        FeedbackModel m =
            make_feedback_model({2, {8}, 2}, {4}, unroll, ControllerInput::predictions_only, 30);
        zero_params(m.controller);
        Rng rng(31);
        Tensor x = random_tensor({7, 2}, rng, 0.0, 1.0);
        Tensor fb = feedback_forward(m, x);
        Tensor plain = mlp_forward(m.main, x).logits;
        CHECK(fb.data == plain.data);  // exact, the subtraction is x - 0
    }
}

TEST_CASE("unroll = 1 equals the manual composition f(x - g(f(x)))", "[nn]") {
    for (ControllerInput mode :
         {ControllerInput::predictions_only, ControllerInput::features_and_predictions}) {
        FeedbackModel m = make_feedback_model({3, {6}, 2}, {5}, 1, mode, 33);
        Rng rng(34);
        Tensor x = random_tensor({4, 3}, rng);

        Tensor got = feedback_forward(m, x);

        MlpOutput first = mlp_forward(m.main, x);
        Tensor corr = controller_forward(m, first.logits, first.last_hidden);
        Tensor manual = mlp_forward(m.main, sub(x, corr)).logits;
        for (std::size_t i = 0; i < manual.size(); ++i)
            CHECK(got.data[i] == Catch::Approx(manual.data[i]).margin(1e-12));
    }
}

TEST_CASE("trace telescopes: final input is x minus the summed corrections", "[nn]") {
    FeedbackModel m = make_feedback_model({3, {5}, 2}, {4}, 3, ControllerInput::predictions_only, 40);
    Rng rng(41);
    Tensor x = random_tensor({2, 3}, rng);
    FeedbackTrace trace;
    feedback_forward(m, x, &trace);
    REQUIRE(trace.corrections.size() == 3);

    Tensor expect = x.detached();
    for (const Tensor& c : trace.corrections)
        for (std::size_t i = 0; i < expect.size(); ++i) expect.data[i] -= c.data[i];
    for (std::size_t i = 0; i < expect.size(); ++i)
        CHECK(trace.corrected_input.data[i] == Catch::Approx(expect.data[i]).margin(1e-12));
}

TEST_CASE("joint gradients through the unroll match finite differences", "[nn]") {
    for (ControllerInput mode :
         {ControllerInput::predictions_only, ControllerInput::features_and_predictions}) {
        for (std::size_t unroll : {1ul, 2ul}) {
            FeedbackModel model = make_feedback_model({3, {5}, 3}, {4}, unroll, mode, 50);
            Rng rng(51);
            Tensor x0 = random_tensor({2, 3}, rng);
            std::vector<int> labels = {0, 2};

            FeedbackModel probe = model;  // untracked copy for finite differences

            GradientRecord rec;
            Tensor x = x0.detached();
            rec.watch(x);
            for (Tensor* t : parameter_list(model)) rec.watch(*t);
            Tensor loss = softmax_cross_entropy(feedback_forward(model, x), labels);
            backward(rec, loss);
            auto loss_value = [&]() {
                return softmax_cross_entropy(feedback_forward(probe, x0), labels).data[0];
            };
            std::vector<Tensor*> model_params = parameter_list(model);
            std::vector<Tensor*> probe_params = parameter_list(probe);
            for (std::size_t t = 0; t < model_params.size(); ++t) {
                Tensor fd = Tensor::zeros(probe_params[t]->shape);
                const double h = 1e-6;
                for (std::size_t i = 0; i < fd.size(); ++i) {
                    const double orig = probe_params[t]->data[i];
                    probe_params[t]->data[i] = orig + h;
                    const double fp = loss_value();
                    probe_params[t]->data[i] = orig - h;
                    const double fm = loss_value();
                    probe_params[t]->data[i] = orig;
                    fd.data[i] = (fp - fm) / (2.0 * h);
                }
                CHECK(max_rel_error(rec.adjoint(*model_params[t]), fd) < 1e-5);
            }

            Tensor fd_x = finite_diff_gradient(
                [&](const Tensor& p) {
                    return softmax_cross_entropy(feedback_forward(probe, p), labels).data[0];
                },
                x0, 1e-6);
            CHECK(max_rel_error(rec.adjoint(x), fd_x) < 1e-5);
        }
    }
}

TEST_CASE("feedback model validation catches wiring mistakes", "[nn]") {
    FeedbackModel m = make_feedback_model({3, {5}, 2}, {4}, 1, ControllerInput::predictions_only, 60);
    m.controller_spec.output = 7;
    CHECK_THROWS_AS(m.validate(), ValueError);

    FeedbackModel m2 = make_feedback_model({3, {5}, 2}, {4}, 1, ControllerInput::features_and_predictions, 61);
    m2.mode = ControllerInput::predictions_only;  // stale controller input width
    CHECK_THROWS_AS(m2.validate(), ValueError);

    FeedbackModel m3 = make_feedback_model({3, {5}, 2}, {4}, 1, ControllerInput::predictions_only, 62);
    m3.unroll = 0;
    CHECK_THROWS_AS(m3.validate(), ValueError);
}
