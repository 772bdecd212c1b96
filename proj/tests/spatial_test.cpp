#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "support/finite_diff.hpp"
#include "support/spatial_oracle.hpp"
#include "support/test_util.hpp"
#include "tjf/graph_attention.hpp"

using namespace tjf;
using namespace tjf::testing;

namespace {

SpatialParams make_params(std::int64_t d_z, std::uint64_t seed) {
    Rng rng(seed);
    return SpatialParams::init(d_z, 2, rng);
}

}  // namespace

TEST_CASE("K=1: attention over a singleton is [[1]] for any scoring vector") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        SpatialParams params = make_params(4, seed);
        SpatialOptions options;
        FrameSnapshot frame;
        frame.states = {{0.3, -0.7}};
        const FrameEncoding enc = encode_frame(frame, params, options);
        CHECK(enc.attention.at(0, 0) == 1.0);

        // g = sigma(z_1): compare against the direct transform.
        const Tensor z = matmul(params.weight, frame_features(frame));
        for (std::int64_t r = 0; r < 4; ++r) {
            const double expect = std::max(0.0, z.at(r, 0));
            CHECK(enc.embedding.at(r) == doctest::Approx(expect).epsilon(1e-14));
        }
    }
}

TEST_CASE("all-equal agent features give uniform attention") {
    SpatialParams params = make_params(5, 9);
    SpatialOptions options;
    FrameSnapshot frame;
    frame.states = {{0.2, 0.4}, {0.2, 0.4}, {0.2, 0.4}};
    const FrameEncoding enc = encode_frame(frame, params, options);
    for (std::int64_t i = 0; i < 3; ++i)
        for (std::int64_t j = 0; j < 3; ++j)
            CHECK(enc.attention.at(i, j) == doctest::Approx(1.0 / 3).epsilon(1e-14));
}

TEST_CASE("encode_frame matches the straight-line oracle") {
    Rng rng(101);
    SpatialOptions options;
    for (int trial = 0; trial < 50; ++trial) {
        const auto k = static_cast<std::int64_t>(2 + rng.uniform_index(6));
        SpatialParams params = make_params(6, 1000 + static_cast<std::uint64_t>(trial));
        const FrameSnapshot frame = random_frame(k, rng);
        const FrameEncoding enc = encode_frame(frame, params, options);
        const SpatialOracleResult oracle = spatial_oracle(frame, params, options);
        for (std::int64_t r = 0; r < 6; ++r) {
            CHECK(std::fabs(enc.embedding.at(r) - oracle.embedding[static_cast<std::size_t>(r)]) <
                  1e-10);
        }
        for (std::int64_t i = 0; i < k; ++i)
            for (std::int64_t j = 0; j < k; ++j)
                CHECK(std::fabs(enc.attention.at(i, j) -
                                oracle.alpha[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) <
                      1e-12);
    }
}

TEST_CASE("attention rows sum to 1 and entries stay in (0,1]") {
    Rng rng(103);
    SpatialOptions options;
    for (int trial = 0; trial < 100; ++trial) {
        const auto k = static_cast<std::int64_t>(1 + rng.uniform_index(8));
        SpatialParams params = make_params(4, 2000 + static_cast<std::uint64_t>(trial));
        const FrameEncoding enc = encode_frame(random_frame(k, rng), params, options);
        for (std::int64_t i = 0; i < k; ++i) {
            double row = 0.0;
            for (std::int64_t j = 0; j < k; ++j) {
                const double a = enc.attention.at(i, j);
                CHECK(a > 0.0);
                CHECK(a <= 1.0);
                row += a;
            }
            CHECK(std::fabs(row - 1.0) < 1e-10);
        }
    }
}

TEST_CASE("permutation invariance of the pooled embedding") {
    Rng rng(107);
    SpatialOptions options;
    for (int trial = 0; trial < 100; ++trial) {
        const auto k = static_cast<std::int64_t>(2 + rng.uniform_index(9));
        SpatialParams params = make_params(5, 3000 + static_cast<std::uint64_t>(trial));
        const FrameSnapshot frame = random_frame(k, rng);

        std::vector<std::size_t> perm(static_cast<std::size_t>(k));
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        rng.shuffle(perm);

        FrameSnapshot permuted;
        permuted.states.resize(static_cast<std::size_t>(k));
        for (std::size_t i = 0; i < perm.size(); ++i) permuted.states[perm[i]] = frame.states[i];

        const FrameEncoding base = encode_frame(frame, params, options);
        const FrameEncoding reordered = encode_frame(permuted, params, options);

        for (std::int64_t r = 0; r < 5; ++r) {
            CHECK(std::fabs(base.embedding.at(r) - reordered.embedding.at(r)) < 1e-10);
        }
        // alpha'[perm(i)][perm(j)] == alpha[i][j]
        for (std::int64_t i = 0; i < k; ++i) {
            for (std::int64_t j = 0; j < k; ++j) {
                const auto pi = static_cast<std::int64_t>(perm[static_cast<std::size_t>(i)]);
                const auto pj = static_cast<std::int64_t>(perm[static_cast<std::size_t>(j)]);
                CHECK(std::fabs(reordered.attention.at(pi, pj) - base.attention.at(i, j)) < 1e-10);
            }
        }
    }
}

TEST_CASE("zero scoring vector reduces to uniform mean aggregation") {
    Rng rng(109);
    SpatialParams params = make_params(4, 11);
    std::fill(params.attention.values().begin(), params.attention.values().end(), 0.0);
    SpatialOptions attention_opts;
    SpatialOptions uniform_opts;
    uniform_opts.aggregation = Aggregation::Uniform;

    for (int trial = 0; trial < 20; ++trial) {
        const FrameSnapshot frame = random_frame(5, rng);
        const FrameEncoding a = encode_frame(frame, params, attention_opts);
        const FrameEncoding u = encode_frame(frame, params, uniform_opts);
        for (std::int64_t i = 0; i < 5; ++i)
            for (std::int64_t j = 0; j < 5; ++j) {
                CHECK(a.attention.at(i, j) == doctest::Approx(0.2).epsilon(1e-15));
                CHECK(a.attention.at(i, j) == u.attention.at(i, j));
            }
        // Identical remaining parameters: forward outputs coincide exactly.
        for (std::int64_t r = 0; r < 4; ++r) CHECK(a.embedding.at(r) == u.embedding.at(r));
    }
}

TEST_CASE("encode_frame error paths") {
    SpatialParams params = make_params(4, 13);
    SpatialOptions options;
    FrameSnapshot empty;
    CHECK_THROWS_AS(encode_frame(empty, params, options), DataError);

    const Tensor bad_width = Tensor::from_vector({3, 2}, {1, 2, 3, 4, 5, 6});
    CHECK_THROWS_AS(encode_features(bad_width, params, options), ParameterError);
}

TEST_CASE("encode_sequence: statelessness across time") {
    Rng rng(113);
    SpatialParams params = make_params(4, 17);
    SpatialOptions options;

    // T=1 equals the single-frame encoding.
    const FrameSnapshot frame = random_frame(3, rng);
    std::vector<FrameSnapshot> one{frame};
    const Tensor g1 = encode_sequence(std::span<const FrameSnapshot>(one), params, options);
    const FrameEncoding enc = encode_frame(frame, params, options);
    REQUIRE(g1.shape() == std::vector<std::int64_t>{4, 1});
    for (std::int64_t r = 0; r < 4; ++r) CHECK(g1.at(r, 0) == enc.embedding.at(r));

    // Duplicating a frame duplicates its column bit-for-bit.
    std::vector<FrameSnapshot> dup{frame, random_frame(3, rng), frame};
    const Tensor g3 = encode_sequence(std::span<const FrameSnapshot>(dup), params, options);
    for (std::int64_t r = 0; r < 4; ++r) CHECK(g3.at(r, 0) == g3.at(r, 2));
}

TEST_CASE("encode_sequence matches the per-frame oracle column by column") {
    Rng rng(127);
    SpatialParams params = make_params(6, 19);
    SpatialOptions options;
    const std::vector<FrameSnapshot> frames = random_frames(5, 4, rng);
    const Tensor g = encode_sequence(std::span<const FrameSnapshot>(frames), params, options);
    REQUIRE(g.shape() == std::vector<std::int64_t>{6, 5});
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const SpatialOracleResult oracle = spatial_oracle(frames[t], params, options);
        for (std::int64_t r = 0; r < 6; ++r) {
            CHECK(std::fabs(g.at(r, static_cast<std::int64_t>(t)) -
                            oracle.embedding[static_cast<std::size_t>(r)]) < 1e-10);
        }
    }
}

TEST_CASE("encode_sequence rejects inconsistent agent counts") {
    Rng rng(131);
    SpatialParams params = make_params(4, 23);
    SpatialOptions options;
    std::vector<FrameSnapshot> frames{random_frame(3, rng), random_frame(4, rng)};
    CHECK_THROWS_AS(encode_sequence(std::span<const FrameSnapshot>(frames), params, options),
                    DataError);
}

TEST_CASE("gradients through the frame encoder pass finite differences") {
    Rng rng(137);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SpatialParams params = make_params(4, 4000 + seed);
        SpatialOptions options;
        const FrameSnapshot frame = random_frame(3, rng);
        const Tensor weights = random_tensor({4}, rng);
        auto res = finite_diff_check(
            [&] {
                const FrameEncoding enc = encode_frame(frame, params, options);
                return sum_all(mul(enc.embedding, weights));
            },
            {{"W", params.weight}, {"a", params.attention}});
        if (res.too_close_to_kink) continue;
        CHECK(res.max_rel_err < 1e-5);
    }
}

TEST_CASE("velocity features widen the encoder input") {
    Rng rng(139);
    SpatialOptions options;
    options.velocity_features = true;
    CHECK(options.feature_width() == 4);
    Rng prng(29);
    SpatialParams params = SpatialParams::init(3, 4, prng);
    const std::vector<FrameSnapshot> frames = random_frames(4, 2, rng);
    const Tensor g = encode_sequence(std::span<const FrameSnapshot>(frames), params, options);
    CHECK(g.shape() == std::vector<std::int64_t>{3, 4});
}
