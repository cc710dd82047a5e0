#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <vector>

#include "flatnn/rng.hpp"
#include "flatnn/tensor.hpp"

using namespace flatnn;

namespace {

// Independent O(mkn) triple-loop product, kept free of the library path.
Tensor naive_matmul(const Tensor& a, const Tensor& b) {
    const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
    Tensor out = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t t = 0; t < k; ++t)
            for (std::size_t j = 0; j < n; ++j) out(i, j) += a(i, t) * b(t, j);
    return out;
}

// High-precision cross-entropy reference: long double arithmetic with
// Kahan-compensated accumulation.
double reference_xent(const Tensor& logits, const std::vector<int>& labels) {
    const std::size_t batch = logits.shape[0], classes = logits.shape[1];
    long double total = 0.0L, comp = 0.0L;
    for (std::size_t i = 0; i < batch; ++i) {
        long double mx = logits(i, 0);
        for (std::size_t j = 1; j < classes; ++j) mx = std::max<long double>(mx, logits(i, j));
        long double s = 0.0L, sc = 0.0L;
        for (std::size_t j = 0; j < classes; ++j) {
            long double term = std::exp(static_cast<long double>(logits(i, j)) - mx) - sc;
            long double t = s + term;
            sc = (t - s) - term;
            s = t;
        }
        long double row = mx + std::log(s) - logits(i, static_cast<std::size_t>(labels[i]));
        long double term = row - comp;
        long double t = total + term;
        comp = (t - total) - term;
        total = t;
    }
    return static_cast<double>(total / static_cast<long double>(batch));
}

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// Relative error with a denominator floor; at the default floor the 1e-5
// gradient tolerance amounts to 1e-8 absolute agreement on tiny coordinates,
// which is what an f64 central difference at h = 1e-6 can actually resolve.
double max_rel_error(const Tensor& got, const Tensor& want, double floor = 1e-3) {
    REQUIRE(got.shape == want.shape);
    double worst = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        const double denom = std::max({std::abs(got.data[i]), std::abs(want.data[i]), floor});
        worst = std::max(worst, std::abs(got.data[i] - want.data[i]) / denom);
    }
    return worst;
}

}  // namespace

TEST_CASE("matmul basics", "[tensor]") {
    Tensor eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
    Tensor m = Tensor::matrix(2, 2, {1, 2, 3, 4});
    CHECK(matmul(eye, m).data == std::vector<double>{1, 2, 3, 4});

    Tensor a = Tensor::matrix(2, 2, {1, 0, 0, 0});
    Tensor b = Tensor::matrix(2, 2, {0, 0, 0, 1});
    CHECK(matmul(a, b).data == std::vector<double>(4, 0.0));

    Rng rng(42);
    Tensor x = random_tensor({3, 4}, rng);
    Tensor y = random_tensor({4, 2}, rng);
    Tensor got = matmul(x, y);
    Tensor want = naive_matmul(x, y);
    for (std::size_t i = 0; i < got.size(); ++i)
        CHECK(got.data[i] == Catch::Approx(want.data[i]).epsilon(1e-13));
}

TEST_CASE("matmul rejects mismatched shapes naming both", "[tensor]") {
    Tensor a = Tensor::zeros({3, 4});
    Tensor b = Tensor::zeros({5, 2});
    try {
        matmul(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[3x4]") != std::string::npos);
        CHECK(msg.find("[5x2]") != std::string::npos);
    }
}

TEST_CASE("matmul associativity on well-conditioned triples", "[tensor]") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor a = random_tensor({4, 5}, rng);
        Tensor b = random_tensor({5, 3}, rng);
        Tensor c = random_tensor({3, 6}, rng);
        Tensor left = matmul(matmul(a, b), c);
        Tensor right = matmul(a, matmul(b, c));
        CHECK(max_rel_error(left, right, 1e-12) < 1e-10);
    }
}

TEST_CASE("elementwise ops and bias broadcast", "[tensor]") {
    Tensor x = Tensor::vec({1.5, -2.0, 0.25});
    CHECK(add(x, Tensor::zeros({3})).data == x.data);
    CHECK(sub(x, x).data == std::vector<double>(3, 0.0));
    CHECK(mul(Tensor::vec({2, 3}), Tensor::vec({4, 5})).data == std::vector<double>{8, 15});

    Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
    Tensor bias = Tensor::vec({10, 20, 30});
    CHECK(add(m, bias).data == std::vector<double>{11, 22, 33, 14, 25, 36});

    CHECK_THROWS_AS(add(Tensor::zeros({2, 3}), Tensor::zeros({2})), ShapeError);
    CHECK_THROWS_AS(mul(Tensor::zeros({4}), Tensor::zeros({5})), ShapeError);
}

TEST_CASE("relu values and subgradient convention", "[tensor]") {
    CHECK(relu(Tensor::vec({-1, 0, 2})).data == std::vector<double>{0, 0, 2});
    CHECK(relu(Tensor::vec({-3, -0.5})).data == std::vector<double>{0, 0});

    GradientRecord rec;
    Tensor x = Tensor::vec({-1, 2});
    rec.watch(x);
    Tensor loss = sum(relu(x));
    backward(rec, loss);
    CHECK(rec.adjoint(x).data == std::vector<double>{0, 1});

    // Exactly zero input: subgradient pinned to 0.
    GradientRecord rec2;
    Tensor z = Tensor::vec({0.0});
    rec2.watch(z);
    Tensor loss2 = sum(relu(z));
    backward(rec2, loss2);
    CHECK(rec2.adjoint(z).data == std::vector<double>{0.0});
}

TEST_CASE("softmax cross-entropy values", "[tensor]") {
    Tensor uniform = Tensor::zeros({1, 10});
    std::vector<int> lbl = {3};
    CHECK(softmax_cross_entropy(uniform, lbl).data[0] == Catch::Approx(std::log(10.0)).epsilon(1e-12));

    Tensor extreme = Tensor::matrix(1, 2, {1000.0, -1000.0});
    std::vector<int> zero = {0};
    double loss = softmax_cross_entropy(extreme, zero).data[0];
    CHECK(std::isfinite(loss));
    CHECK(loss >= 0.0);
    CHECK(loss <= 1e-300);

    Rng rng(11);
    Tensor logits = random_tensor({4, 3}, rng, -2.0, 2.0);
    std::vector<int> labels = {2, 0, 1, 2};
    double got = softmax_cross_entropy(logits, labels).data[0];
    CHECK(got == Catch::Approx(reference_xent(logits, labels)).epsilon(1e-13));

    std::vector<int> bad = {2, 0, 3, 1};
    CHECK_THROWS_AS(softmax_cross_entropy(logits, bad), ValueError);
}

TEST_CASE("backward on simple graphs", "[tensor]") {
    GradientRecord rec;
    Tensor x = Tensor::vec({1.0, 2.0, 3.0});
    rec.watch(x);
    backward(rec, sum(x));
    CHECK(rec.adjoint(x).data == std::vector<double>(3, 1.0));

    GradientRecord rec2;
    Tensor y = Tensor::vec({1.5, -2.0});
    rec2.watch(y);
    backward(rec2, sum(mul(y, y)));
    CHECK(rec2.adjoint(y).data == std::vector<double>{3.0, -4.0});
}

TEST_CASE("backward rejects non-scalar and foreign outputs", "[tensor]") {
    GradientRecord rec;
    Tensor x = Tensor::vec({1.0, 2.0});
    rec.watch(x);
    Tensor notscalar = mul(x, x);
    CHECK_THROWS_AS(backward(rec, notscalar), ShapeError);

    Tensor untracked = Tensor::scalar(1.0);
    CHECK_THROWS_AS(backward(rec, untracked), ValueError);
}

TEST_CASE("mixing records is rejected", "[tensor]") {
    GradientRecord ra, rb;
    Tensor a = Tensor::vec({1.0});
    Tensor b = Tensor::vec({2.0});
    ra.watch(a);
    rb.watch(b);
    CHECK_THROWS_AS(add(a, b), ValueError);
}

TEST_CASE("finite difference oracle sanity", "[tensor]") {
    auto sum_sq = [](const Tensor& t) {
        double s = 0.0;
        for (double v : t.data) s += v * v;
        return s;
    };
    Tensor x = Tensor::vec({1.0, 2.0});
    Tensor g = finite_diff_gradient(sum_sq, x, 1e-6);
    CHECK(g.data[0] == Catch::Approx(2.0).margin(1e-6));
    CHECK(g.data[1] == Catch::Approx(4.0).margin(1e-6));

    Tensor gc = finite_diff_gradient([](const Tensor&) { return 3.5; }, x, 1e-6);
    CHECK(gc.data[0] == 0.0);
    CHECK(gc.data[1] == 0.0);

    CHECK_THROWS_AS(finite_diff_gradient(sum_sq, x, 0.0), ValueError);
}

TEST_CASE("every primitive matches finite differences", "[tensor]") {
    Rng rng(123);
    const double h = 1e-6;

    auto check_input_grad = [&](auto&& build, const Tensor& x) {
        GradientRecord rec;
        Tensor xv = x.detached();
        rec.watch(xv);
        Tensor loss = build(xv);
        backward(rec, loss);
        Tensor ad = rec.adjoint(xv);
        Tensor fd = finite_diff_gradient([&](const Tensor& p) { return build(p).data[0]; }, x, h);
        CHECK(max_rel_error(ad, fd) < 1e-5);
    };

    Tensor m = random_tensor({3, 4}, rng);
    Tensor w = random_tensor({4, 2}, rng);
    check_input_grad([&](const Tensor& p) { return sum(matmul(p, w)); }, m);
    check_input_grad([&](const Tensor& p) { return sum(matmul(m, p)); }, w);

    Tensor a = random_tensor({2, 3}, rng);
    Tensor b = random_tensor({2, 3}, rng);
    Tensor bias = random_tensor({3}, rng);
    check_input_grad([&](const Tensor& p) { return sum(mul(add(p, b), p)); }, a);
    check_input_grad([&](const Tensor& p) { return sum(sub(mul(a, b), p)); }, b.detached());
    check_input_grad([&](const Tensor& p) { return sum(add(a, p)); }, bias);
    check_input_grad([&](const Tensor& p) { return sum(mul(a, p)); }, bias);
    check_input_grad([&](const Tensor& p) { return sum(relu(p)); }, random_tensor({6}, rng));
    check_input_grad([&](const Tensor& p) { return sum(concat_cols(p, b)); }, a);

    Tensor logits = random_tensor({3, 4}, rng);
    std::vector<int> labels = {1, 3, 0};
    check_input_grad([&](const Tensor& p) { return softmax_cross_entropy(p, labels); }, logits);
}

TEST_CASE("full MLP loss gradient matches finite differences", "[tensor]") {
    Rng rng(31);
    Tensor x = random_tensor({3, 4}, rng);
    Tensor w1 = random_tensor({4, 6}, rng);
    Tensor b1 = random_tensor({6}, rng, -0.1, 0.1);
    Tensor w2 = random_tensor({6, 3}, rng);
    Tensor b2 = random_tensor({3}, rng, -0.1, 0.1);
    std::vector<int> labels = {0, 2, 1};

    auto loss_at = [&](const Tensor& w1v, const Tensor& b1v, const Tensor& w2v, const Tensor& b2v,
                       const Tensor& xv) {
        Tensor h = relu(add(matmul(xv, w1v), b1v));
        Tensor logits = add(matmul(h, w2v), b2v);
        return softmax_cross_entropy(logits, labels);
    };

    GradientRecord rec;
    Tensor W1 = w1.detached(), B1 = b1.detached(), W2 = w2.detached(), B2 = b2.detached(), X = x.detached();
    rec.watch(W1);
    rec.watch(B1);
    rec.watch(W2);
    rec.watch(B2);
    rec.watch(X);
    backward(rec, loss_at(W1, B1, W2, B2, X));

    auto fd_for = [&](const Tensor& at, int which) {
        return finite_diff_gradient(
            [&](const Tensor& p) {
                return loss_at(which == 0 ? p : w1, which == 1 ? p : b1, which == 2 ? p : w2,
                               which == 3 ? p : b2, which == 4 ? p : x)
                    .data[0];
            },
            at, 1e-6);
    };
    CHECK(max_rel_error(rec.adjoint(W1), fd_for(w1, 0)) < 1e-5);
    CHECK(max_rel_error(rec.adjoint(B1), fd_for(b1, 1)) < 1e-5);
    CHECK(max_rel_error(rec.adjoint(W2), fd_for(w2, 2)) < 1e-5);
    CHECK(max_rel_error(rec.adjoint(B2), fd_for(b2, 3)) < 1e-5);
    CHECK(max_rel_error(rec.adjoint(X), fd_for(x, 4)) < 1e-5);
}

TEST_CASE("backward is bit-deterministic", "[tensor]") {
    Rng rng(99);
    Tensor x0 = random_tensor({4, 5}, rng);
    Tensor w0 = random_tensor({5, 3}, rng);
    std::vector<int> labels = {0, 1, 2, 1};

    auto run = [&]() {
        GradientRecord rec;
        Tensor x = x0.detached(), w = w0.detached();
        rec.watch(x);
        rec.watch(w);
        backward(rec, softmax_cross_entropy(relu(matmul(x, w)), labels));
        return std::pair{rec.adjoint(x).data, rec.adjoint(w).data};
    };
    auto [gx1, gw1] = run();
    auto [gx2, gw2] = run();
    CHECK(std::memcmp(gx1.data(), gx2.data(), gx1.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(gw1.data(), gw2.data(), gw1.size() * sizeof(double)) == 0);
}

TEST_CASE("constant (unwatched) operands receive no adjoint but feed values", "[tensor]") {
    GradientRecord rec;
    Tensor x = Tensor::vec({2.0, 3.0});
    Tensor frozen = Tensor::vec({5.0, 7.0});
    rec.watch(x);
    Tensor loss = sum(mul(x, frozen));
    backward(rec, loss);
    CHECK(rec.adjoint(x).data == std::vector<double>{5.0, 7.0});
    CHECK(loss.data[0] == 2.0 * 5.0 + 3.0 * 7.0);
    CHECK_THROWS_AS(rec.adjoint(frozen), ValueError);
}
