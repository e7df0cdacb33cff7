#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "icee/adam.hpp"
#include "icee/gradcheck.hpp"
#include "icee/layers.hpp"
#include "icee/ops.hpp"
#include "icee/rng.hpp"
#include "icee/tensor.hpp"
#include "icee/tensor_io.hpp"

using namespace icee;

TEST_CASE("tensor construction and shape checks") {
    Tensor t({2, 3}, 1.5);
    CHECK(t.size() == 6);
    CHECK(t.at(1, 2) == 1.5);
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), InvalidInput);
    CHECK_THROWS_AS(t.reshaped({4}), InvalidInput);
    CHECK(t.reshaped({3, 2}).dim(0) == 3);
    CHECK_THROWS_AS(require_same_shape(t, Tensor({3, 2}), "x"), InvalidInput);
    Tensor bad({1});
    bad[0] = std::nan("");
    CHECK_FALSE(bad.all_finite());
}

TEST_CASE("rng streams are reproducible and labeled substreams differ") {
    RngStream a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    RngStream root(7);
    CHECK(root.substream("x").next_u64() != root.substream("y").next_u64());
    CHECK(root.substream("x", 0).next_u64() != root.substream("x", 1).next_u64());

    RngStream u(3);
    for (int i = 0; i < 1000; ++i) {
        const double x = u.uniform();
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
        CHECK(u.uniform_index(5) < 5);
    }
}

TEST_CASE("rng normal draws have unit variance") {
    RngStream r(11);
    double s = 0, ss = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        s += x;
        ss += x * x;
    }
    CHECK(std::abs(s / n) < 0.03);
    CHECK(std::abs(ss / n - 1.0) < 0.05);
}

TEST_CASE("shuffle is a permutation") {
    RngStream r(5);
    std::vector<int> v(50);
    for (int i = 0; i < 50; ++i) v[i] = i;
    r.shuffle(std::span(v));
    CHECK(std::set<int>(v.begin(), v.end()).size() == 50);
}

TEST_CASE("softmax") {
    const auto u = softmax(std::vector<double>{0, 0, 0, 0});
    for (double p : u) CHECK(p == doctest::Approx(0.25).epsilon(1e-15));

    const auto a = softmax(std::vector<double>{1, 2, 3});
    const auto b = softmax(std::vector<double>{11, 12, 13});
    for (int i = 0; i < 3; ++i) CHECK(std::abs(a[i] - b[i]) < 1e-15);

    const auto two = softmax(std::vector<double>{1, 2});
    CHECK(std::abs(two[0] - 0.2689414213699951) < 1e-12);
    CHECK(std::abs(two[1] - 0.7310585786300049) < 1e-12);

    CHECK_THROWS_AS(softmax(std::vector<double>{}), InvalidInput);
    CHECK_THROWS_AS(softmax(std::vector<double>{1.0, INFINITY}), InvalidInput);

    RngStream r(9);
    for (int k = 0; k < 200; ++k) {
        std::vector<double> z(6);
        for (double& v : z) v = r.uniform(-500, 500);
        double total = 0;
        for (double p : softmax(z)) {
            CHECK(p >= 0.0);
            total += p;
        }
        CHECK(std::abs(total - 1.0) < 1e-12);
    }
}

TEST_CASE("cross entropy") {
    CHECK(cross_entropy_with_grad(std::vector<double>{0, 0, 0, 0}, 2).loss == doctest::Approx(std::log(4.0)));
    CHECK(cross_entropy_with_grad(std::vector<double>{100, 0, 0, 0}, 0).loss < 1e-6);
    CHECK_THROWS_AS(cross_entropy_with_grad(std::vector<double>{1, 2}, 2), InvalidInput);

    RngStream r(1);
    for (int k = 0; k < 20; ++k) {
        Tensor z = testutil::random_tensor(r, {5}, 2.0);
        const std::size_t label = r.uniform_index(5);
        const auto analytic = Tensor({5}, cross_entropy_with_grad(z.values(), label).grad);
        const auto numeric =
            finite_difference([&](const Tensor& x) { return cross_entropy_with_grad(x.values(), label).loss; }, z);
        CHECK(relative_error(analytic, numeric) < 1e-6);
    }
}

TEST_CASE("l2 normalize") {
    auto n = l2_normalize(std::vector<double>{3, 4});
    CHECK(n.v[0] == doctest::Approx(0.6));
    CHECK(n.v[1] == doctest::Approx(0.8));
    CHECK_FALSE(n.degenerate);
    auto again = l2_normalize(n.v);
    CHECK(std::abs(again.v[0] - n.v[0]) < 1e-15);
    auto z = l2_normalize(std::vector<double>{0, 0});
    CHECK(z.degenerate);
    CHECK(z.v == std::vector<double>{0, 0});
}

TEST_CASE("argmax ties go to the lower index") {
    CHECK(argmax(std::vector<double>{1, 1, 0, 0}) == 0);
    CHECK(argmax(std::vector<double>{0, 2, 2}) == 1);
}

TEST_CASE("conv2d") {
    SUBCASE("identity 1x1 kernel") {
        RngStream r(2);
        Tensor x = testutil::random_tensor(r, {2, 5, 5});
        Tensor k({2, 2, 1, 1});
        k[0 * 2 + 0] = 1.0;
        k[1 * 2 + 1] = 1.0;
        const Tensor y = conv2d(x, k, Tensor({2}), {1, 0});
        CHECK(y == x);
    }
    SUBCASE("constant field") {
        Tensor x({3, 6, 6}, 1.0);
        Tensor k({1, 3, 3, 3}, 1.0);
        Tensor b = Tensor::vector({0.5});
        const Tensor y = conv2d(x, k, b, {1, 1});
        CHECK(y.at(0, 2, 2) == 27.5);
        CHECK(y.at(0, 0, 0) == 12.5);  // corner sees a 2 x 2 window
    }
    SUBCASE("output size") {
        const Tensor y = conv2d(Tensor({3, 32, 32}), Tensor({16, 3, 3, 3}), Tensor({16}), {2, 1});
        CHECK(y.shape() == Shape{16, 16, 16});
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(conv2d(Tensor({2, 4, 4}), Tensor({1, 3, 3, 3}), Tensor({1}), {1, 0}), InvalidInput);
        CHECK_THROWS_AS(conv2d(Tensor({3, 2, 2}), Tensor({1, 3, 3, 3}), Tensor({1}), {1, 0}), InvalidInput);
        CHECK_THROWS_AS(conv2d(Tensor({3, 4, 4}), Tensor({1, 3, 3, 3}), Tensor({2}), {1, 0}), InvalidInput);
    }
}

TEST_CASE("conv2d gradients on a 2x4x4 input") {
    RngStream r(17);
    const Tensor x = testutil::random_tensor(r, {2, 4, 4});
    const Tensor k = testutil::random_tensor(r, {3, 2, 3, 3});
    const Tensor b = testutil::random_tensor(r, {3});
    const Tensor probe = testutil::random_tensor(r, {3, 2, 2});
    const ConvSpec spec{1, 0};
    auto loss = [&](const Tensor& xi, const Tensor& ki, const Tensor& bi) {
        const Tensor y = conv2d(xi, ki, bi, spec);
        return dot(y.values(), probe.values());
    };
    const auto g = conv2d_backward(x, k, probe, spec);
    CHECK(relative_error(g.input, finite_difference([&](const Tensor& t) { return loss(t, k, b); }, x)) < 1e-4);
    CHECK(relative_error(g.kernels, finite_difference([&](const Tensor& t) { return loss(x, t, b); }, k)) < 1e-4);
    CHECK(relative_error(g.bias, finite_difference([&](const Tensor& t) { return loss(x, k, t); }, b)) < 1e-4);
}

TEST_CASE("relu and affine") {
    const Tensor x = Tensor::vector({-1, 0, 2});
    CHECK(relu(x) == Tensor::vector({0, 0, 2}));
    CHECK(relu_backward(x, Tensor::vector({5, 5, 5})) == Tensor::vector({0, 0, 5}));
    const Tensor w({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
    const Tensor y = affine(w, Tensor::vector({1, -1}), Tensor::vector({1, 0, 1}));
    CHECK(y == Tensor::vector({5, 9}));
    CHECK_THROWS_AS(affine(w, Tensor::vector({1, 1}), Tensor::vector({1, 1})), InvalidInput);
}

TEST_CASE("adam") {
    SUBCASE("zero gradient leaves parameters unchanged") {
        Tensor p = Tensor::vector({1.0, -2.0});
        AdamState s(p.shape(), AdamHyper{});
        adam_step(p, Tensor({2}), s);
        CHECK(p == Tensor::vector({1.0, -2.0}));
        CHECK(s.step == 1);
    }
    SUBCASE("first step moves by lr") {
        Tensor p = Tensor::vector({0.0});
        AdamState s(p.shape(), AdamHyper{0.01});
        adam_step(p, Tensor::vector({1.0}), s);
        CHECK(std::abs(p[0] + 0.01) < 1e-9);
    }
    SUBCASE("ten steps on a quadratic match a scripted reference") {
        const std::vector<double> a{1.0, 3.0, 0.5};
        Tensor p = Tensor::vector({1.0, -2.0, 0.5});
        AdamState s(p.shape(), AdamHyper{0.1});
        for (int t = 0; t < 10; ++t) {
            Tensor g({3});
            for (int i = 0; i < 3; ++i) g[i] = a[i] * p[i];
            adam_step(p, g, s);
        }
        CHECK(std::abs(p[0] - 0.07624916061975533) < 1e-10);
        CHECK(std::abs(p[1] - -1.02458683694286) < 1e-10);
        CHECK(std::abs(p[2] - -0.20332281696675847) < 1e-10);
    }
    SUBCASE("shape mismatch") {
        Tensor p({2});
        AdamState s(p.shape(), AdamHyper{});
        CHECK_THROWS_AS(adam_step(p, Tensor({3}), s), InvalidInput);
    }
}

TEST_CASE("tensor binary round trip") {
    RngStream r(4);
    const Tensor t = testutil::random_tensor(r, {2, 3, 4});
    std::stringstream ss;
    write_tensor(ss, t);
    const std::string bytes = ss.str();
    CHECK(bytes.substr(0, 4) == "ICEE");
    CHECK(bytes.size() == 4 + 4 + 4 + 3 * 8 + 24 * 8);
    CHECK(static_cast<unsigned char>(bytes[4]) == 1);  // version, little-endian
    CHECK(read_tensor(ss) == t);

    std::stringstream bad("NOPE");
    CHECK_THROWS_AS(read_tensor(bad), IoError);
    std::stringstream truncated(bytes.substr(0, 30));
    CHECK_THROWS_AS(read_tensor(truncated), IoError);
}
