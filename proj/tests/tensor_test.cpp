#include <cmath>

#include "doctest.h"
#include "support/conv_oracle.hpp"
#include "support/finite_diff.hpp"
#include "support/test_util.hpp"
#include "tjf/ops.hpp"

using namespace tjf;
using namespace tjf::testing;

TEST_CASE("matmul: identity and hand-computed products") {
    const Tensor eye = Tensor::from_vector({2, 2}, {1, 0, 0, 1});
    const Tensor m = Tensor::from_vector({2, 2}, {1, 2, 3, 4});
    const Tensor p = matmul(eye, m);
    CHECK(p.values() == m.values());

    // [[1,2]] x [[3],[4]] = [[11]]
    const Tensor a = Tensor::from_vector({1, 2}, {1, 2});
    const Tensor b = Tensor::from_vector({2, 1}, {3, 4});
    CHECK(matmul(a, b).item() == 11.0);
}

TEST_CASE("matmul: shape mismatch names both shapes") {
    const Tensor a = Tensor::from_vector({2, 3}, {1, 2, 3, 4, 5, 6});
    const Tensor b = Tensor::from_vector({2, 2}, {1, 2, 3, 4});
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2x3]"), DimensionError);
    try {
        matmul(a, b);
    } catch (const DimensionError& e) {
        CHECK(std::string(e.what()).find("[2x2]") != std::string::npos);
    }
}

TEST_CASE("matmul gradients match finite differences") {
    Rng rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor a = random_tensor({3, 4}, rng, -1, 1, true);
        Tensor b = random_tensor({4, 2}, rng, -1, 1, true);
        auto res = finite_diff_check([&] { return sum_all(matmul(a, b)); },
                                     {{"a", a}, {"b", b}});
        CHECK(res.max_rel_err < 1e-5);
    }
}

TEST_CASE("gemm transpose variants agree with explicit transpose") {
    Rng rng(11);
    const Tensor a = random_tensor({3, 5}, rng);
    const Tensor b = random_tensor({4, 5}, rng);
    const Tensor nt = gemm(a, b, false, true);          // a * b^T
    const Tensor ref = matmul(a, transpose(b));
    REQUIRE(nt.shape() == ref.shape());
    for (std::int64_t i = 0; i < nt.size(); ++i) {
        CHECK(nt.data()[i] == doctest::Approx(ref.data()[i]).epsilon(1e-12));
    }

    Tensor ta = random_tensor({5, 3}, rng, -1, 1, true);
    Tensor tb = random_tensor({5, 4}, rng, -1, 1, true);
    auto res = finite_diff_check([&] { return sum_all(gemm(ta, tb, true, false)); },
                                 {{"ta", ta}, {"tb", tb}});
    CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("softmax: symmetry, stability, oracle") {
    const Tensor uniform = softmax(Tensor::from_vector({3}, {0, 0, 0}));
    for (std::int64_t i = 0; i < 3; ++i) CHECK(uniform.at(i) == doctest::Approx(1.0 / 3).epsilon(1e-15));

    // Huge inputs must not overflow thanks to max subtraction.
    const Tensor shifted = softmax(Tensor::from_vector({2}, {1000, 1000}));
    CHECK(shifted.at(0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(shifted.at(1) == doctest::Approx(0.5).epsilon(1e-15));

    // Independent exp/sum computation.
    const Tensor p = softmax(Tensor::from_vector({3}, {1, 2, 3}));
    const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    CHECK(p.at(0) == doctest::Approx(std::exp(1.0) / z).epsilon(1e-14));
    CHECK(p.at(1) == doctest::Approx(std::exp(2.0) / z).epsilon(1e-14));
    CHECK(p.at(2) == doctest::Approx(std::exp(3.0) / z).epsilon(1e-14));
}

TEST_CASE("softmax output sums to 1 within 1e-12 on random inputs") {
    Rng rng(13);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = static_cast<std::int64_t>(1 + rng.uniform_index(16));
        const Tensor p = softmax(random_tensor({n}, rng, -50.0, 50.0));
        double sum = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
            sum += p.at(i);
            CHECK(p.at(i) > 0.0);
        }
        CHECK(std::fabs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("softmax gradient matches finite differences") {
    Rng rng(17);
    Tensor v = random_tensor({6}, rng, -2, 2, true);
    Tensor w = random_tensor({6}, rng, -1, 1);
    auto res = finite_diff_check([&] { return sum_all(mul(softmax(v), w)); }, {{"v", v}});
    CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("leaky_relu: definitional cases and kink convention") {
    const Tensor y = leaky_relu(Tensor::from_vector({2}, {2, -2}), 0.2);
    CHECK(y.at(0) == 2.0);
    CHECK(y.at(1) == doctest::Approx(-0.4).epsilon(1e-15));

    // Zero belongs to the positive branch.
    Tensor zero = Tensor::from_vector({1}, {0.0}, true);
    Tensor out = leaky_relu(zero, 0.2);
    CHECK(out.item() == 0.0);
    out.backward();
    CHECK(zero.grad()[0] == 1.0);

    CHECK_THROWS_AS(leaky_relu(zero, 0.0), ParameterError);
    CHECK_THROWS_AS(leaky_relu(zero, 1.0), ParameterError);
}

TEST_CASE("leaky_relu/relu gradients away from the kink") {
    Rng rng(19);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor x = random_tensor({8}, rng, -2, 2, true);
        auto res_leaky = finite_diff_check([&] { return sum_all(mul(leaky_relu(x, 0.2),
                                                                    leaky_relu(x, 0.2))); },
                                           {{"x", x}});
        if (res_leaky.too_close_to_kink) continue;
        CHECK(res_leaky.max_rel_err < 1e-5);
        auto res_relu = finite_diff_check([&] { return sum_all(mul(relu(x), relu(x))); },
                                          {{"x", x}});
        if (!res_relu.too_close_to_kink) CHECK(res_relu.max_rel_err < 1e-5);
    }
}

TEST_CASE("dilated_causal_conv1d: worked examples") {
    const Tensor input = Tensor::from_vector({1, 4}, {1, 2, 3, 4});
    const Tensor kernel = Tensor::from_vector({1, 1, 2}, {1, 1});

    const Tensor d1 = dilated_causal_conv1d(input, kernel, 1);
    CHECK(d1.values() == std::vector<double>{1, 3, 5, 7});

    const Tensor d2 = dilated_causal_conv1d(input, kernel, 2);
    CHECK(d2.values() == std::vector<double>{1, 2, 4, 6});

    // f=1 with weight 1 passes the input through at any dilation.
    const Tensor identity = Tensor::from_vector({1, 1, 1}, {1});
    for (int d : {1, 2, 7}) {
        CHECK(dilated_causal_conv1d(input, identity, d).values() == input.values());
    }

    CHECK_THROWS_AS(dilated_causal_conv1d(input, kernel, 0), ParameterError);
    const Tensor bad = Tensor::from_vector({1, 2, 2}, {1, 1, 1, 1});
    CHECK_THROWS_AS(dilated_causal_conv1d(input, bad, 1), DimensionError);
}

TEST_CASE("dilated_causal_conv1d matches the brute-force oracle exactly") {
    Rng rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        const auto c_in = static_cast<std::int64_t>(1 + rng.uniform_index(3));
        const auto c_out = static_cast<std::int64_t>(1 + rng.uniform_index(3));
        const auto f = static_cast<std::int64_t>(1 + rng.uniform_index(4));
        const auto len = static_cast<std::int64_t>(1 + rng.uniform_index(12));
        const auto dil = static_cast<std::int64_t>(1 + rng.uniform_index(4));
        const Tensor input = random_tensor({c_in, len}, rng);
        const Tensor kernel = random_tensor({c_out, c_in, f}, rng);
        const Tensor out = dilated_causal_conv1d(input, kernel, dil);
        const auto expect = conv_oracle(input.values(), static_cast<std::size_t>(c_in),
                                        static_cast<std::size_t>(len), kernel.values(),
                                        static_cast<std::size_t>(c_out),
                                        static_cast<std::size_t>(f),
                                        static_cast<std::size_t>(dil));
        REQUIRE(out.values().size() == expect.size());
        for (std::size_t i = 0; i < expect.size(); ++i) CHECK(out.values()[i] == expect[i]);
    }
}

TEST_CASE("dilated_causal_conv1d: causality under input zeroing") {
    Rng rng(29);
    for (int trial = 0; trial < 30; ++trial) {
        const Tensor kernel = random_tensor({2, 2, 3}, rng);
        const auto dil = static_cast<std::int64_t>(1 + rng.uniform_index(3));
        Tensor input = random_tensor({2, 10}, rng);
        const Tensor base = dilated_causal_conv1d(input, kernel, dil);
        const auto s = static_cast<std::int64_t>(rng.uniform_index(9));
        // Zero all positions > s; outputs at <= s must not move.
        Tensor clipped = input.detached_copy();
        for (std::int64_t c = 0; c < 2; ++c)
            for (std::int64_t t = s + 1; t < 10; ++t) clipped.data()[c * 10 + t] = 0.0;
        const Tensor cut = dilated_causal_conv1d(clipped, kernel, dil);
        for (std::int64_t c = 0; c < 2; ++c)
            for (std::int64_t t = 0; t <= s; ++t)
                CHECK(cut.at(c, t) == base.at(c, t));
    }
}

TEST_CASE("conv gradients match finite differences") {
    Rng rng(31);
    Tensor input = random_tensor({2, 6}, rng, -1, 1, true);
    Tensor kernel = random_tensor({3, 2, 2}, rng, -1, 1, true);
    auto res = finite_diff_check(
        [&] { return sum_all(mul(dilated_causal_conv1d(input, kernel, 2),
                                 dilated_causal_conv1d(input, kernel, 2))); },
        {{"input", input}, {"kernel", kernel}});
    CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("l2_loss: worked examples and gradient") {
    CHECK(l2_loss(Tensor::from_vector({2}, {1, 1}), Tensor::from_vector({2}, {1, 1})).item() == 0.0);
    // mean([4, 0]) = 2
    CHECK(l2_loss(Tensor::from_vector({2}, {0, 0}), Tensor::from_vector({2}, {2, 0})).item() == 2.0);
    CHECK_THROWS_AS(l2_loss(Tensor::from_vector({2}, {0, 0}), Tensor::from_vector({1}, {0})),
                    DimensionError);

    Rng rng(37);
    Tensor pred = random_tensor({3, 4}, rng, -1, 1, true);
    Tensor target = random_tensor({3, 4}, rng);
    auto res = finite_diff_check([&] { return l2_loss(pred, target); }, {{"pred", pred}});
    CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("l2_loss_masked_rows keeps only masked rows") {
    const Tensor pred = Tensor::from_vector({2, 2}, {0, 0, 5, 5});
    const Tensor target = Tensor::from_vector({2, 2}, {2, 0, 0, 0});
    CHECK(l2_loss_masked_rows(pred, target, {1, 0}).item() == 2.0);
    CHECK(l2_loss_masked_rows(pred, target, {0, 1}).item() == 25.0);
    CHECK_THROWS_AS(l2_loss_masked_rows(pred, target, {0, 0}), ParameterError);
}

TEST_CASE("dropout: degenerate rates and mask semantics") {
    Rng rng(41);
    const Tensor x = random_tensor({4, 8}, rng);
    CHECK(dropout(x, 0.0, true, rng).values() == x.values());
    CHECK(dropout(x, 0.7, false, rng).values() == x.values());
    CHECK_THROWS_AS(dropout(x, 1.0, true, rng), ParameterError);
    CHECK_THROWS_AS(dropout(x, -0.1, true, rng), ParameterError);

    // Spatial mode: each channel is entirely kept (scaled) or entirely zero.
    const double p = 0.5;
    const Tensor y = dropout(x, p, true, rng, /*per_channel=*/true);
    for (std::int64_t c = 0; c < 4; ++c) {
        const bool kept = y.at(c, 0) != 0.0;
        for (std::int64_t s = 0; s < 8; ++s) {
            if (kept) {
                CHECK(y.at(c, s) == doctest::Approx(x.at(c, s) / (1.0 - p)).epsilon(1e-12));
            } else {
                CHECK(y.at(c, s) == 0.0);
            }
        }
    }
}

TEST_CASE("weight_norm: rows of the effective kernel have norm equal to gain") {
    Rng rng(43);
    const Tensor v = random_tensor({3, 2, 2}, rng, -1, 1);
    const Tensor gain = Tensor::from_vector({3}, {0.5, 1.0, 2.0});
    const Tensor w = weight_norm(v, gain);
    for (std::int64_t c = 0; c < 3; ++c) {
        double sq = 0.0;
        for (std::int64_t i = 0; i < 4; ++i) {
            const double x = w.data()[c * 4 + i];
            sq += x * x;
        }
        CHECK(std::sqrt(sq) == doctest::Approx(gain.at(c)).epsilon(1e-12));
    }

    Tensor vg = random_tensor({2, 3}, rng, -1, 1, true);
    Tensor gg = random_tensor({2}, rng, 0.5, 1.5, true);
    auto res = finite_diff_check([&] { return sum_all(mul(weight_norm(vg, gg), weight_norm(vg, gg))); },
                                 {{"v", vg}, {"g", gg}});
    CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("concat/sum_over_axis/reshape round out the primitive set") {
    const Tensor a = Tensor::from_vector({2, 1}, {1, 2});
    const Tensor b = Tensor::from_vector({2, 2}, {3, 4, 5, 6});
    std::vector<Tensor> parts{a, b};
    const Tensor cat = concat(std::span<const Tensor>(parts), 1);
    CHECK(cat.values() == std::vector<double>{1, 3, 4, 2, 5, 6});

    const Tensor rows = sum_over_axis(b, 1);
    CHECK(rows.values() == std::vector<double>{7, 11});
    const Tensor cols = sum_over_axis(b, 0);
    CHECK(cols.values() == std::vector<double>{8, 10});

    Rng rng(47);
    Tensor x = random_tensor({2, 3}, rng, -1, 1, true);
    Tensor y = random_tensor({2, 2}, rng, -1, 1, true);
    auto res = finite_diff_check(
        [&] {
            std::vector<Tensor> ps{x, y};
            const Tensor c = concat(std::span<const Tensor>(ps), 1);
            return sum_all(mul(sum_over_axis(c, 1), sum_over_axis(c, 1)));
        },
        {{"x", x}, {"y", y}});
    CHECK(res.max_rel_err < 1e-5);

    CHECK_THROWS_AS(reshape(x, {5, 1}), DimensionError);
}

TEST_CASE("attention_scores equals dot(a, z_i || z_j) and differentiates") {
    Rng rng(53);
    const std::int64_t d = 3, k = 4;
    Tensor z = random_tensor({d, k}, rng, -1, 1, true);
    Tensor a = random_tensor({2 * d}, rng, -1, 1, true);
    const Tensor e = attention_scores(z, a);
    for (std::int64_t i = 0; i < k; ++i) {
        for (std::int64_t j = 0; j < k; ++j) {
            double dot = 0.0;
            for (std::int64_t r = 0; r < d; ++r) {
                dot += a.at(r) * z.at(r, i) + a.at(d + r) * z.at(r, j);
            }
            CHECK(e.at(i, j) == doctest::Approx(dot).epsilon(1e-13));
        }
    }

    auto res = finite_diff_check(
        [&] { return sum_all(mul(attention_scores(z, a), attention_scores(z, a))); },
        {{"z", z}, {"a", a}});
    CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("backward accumulates over fan-out") {
    Tensor x = Tensor::from_vector({2}, {3, 4}, true);
    // y = x.x + sum(x): dy/dx = 2x + 1
    const Tensor y = add(sum_all(mul(x, x)), sum_all(x));
    y.backward();
    CHECK(x.grad()[0] == doctest::Approx(7.0));
    CHECK(x.grad()[1] == doctest::Approx(9.0));

    // Repeated backward keeps accumulating until zero_grad.
    y.backward();
    CHECK(x.grad()[0] == doctest::Approx(14.0));
    x.zero_grad();
    CHECK_FALSE(x.has_grad());
}

TEST_CASE("backward requires a scalar and populates reachable grads") {
    Tensor x = Tensor::from_vector({2}, {1, 2}, true);
    const Tensor v = mul(x, x);
    CHECK_THROWS_AS(v.backward(), DimensionError);

    const Tensor intermediate = mul(x, x);
    const Tensor loss = sum_all(intermediate);
    loss.backward();
    CHECK(intermediate.has_grad());
    CHECK(x.has_grad());
}

TEST_CASE("NoGradGuard suspends recording") {
    Tensor x = Tensor::from_vector({2}, {1, 2}, true);
    {
        NoGradGuard guard;
        const Tensor y = sum_all(mul(x, x));
        CHECK_FALSE(y.requires_grad());
    }
    const Tensor y = sum_all(mul(x, x));
    CHECK(y.requires_grad());
}

TEST_CASE("tensor invariants: positive dims and matching value counts") {
    CHECK_THROWS_AS(Tensor::zeros({0}), DimensionError);
    CHECK_THROWS_AS(Tensor::zeros({2, 0}), DimensionError);
    CHECK_THROWS_AS(Tensor::from_vector({3}, {1, 2}), DimensionError);
    CHECK_THROWS_AS(softmax(Tensor::from_vector({1, 1}, {0})), DimensionError);
}
