#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dualline/idap.hpp"
#include "dualline/rng.hpp"

#include <cmath>
#include <cstring>
#include <numeric>
#include <vector>

using namespace dualline;

namespace {

TokenSequence random_tokens(DeterministicRng& rng, std::size_t b, std::size_t n,
                            std::size_t d) {
    Tensor t(Shape{b, n, d});
    for (auto& v : t.values()) v = rng.normal();
    return TokenSequence(std::move(t));
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() &&
           std::memcmp(a.data(), b.data(), a.numel() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("query bank determinism and moments") {
    const QueryBank a = init_query_bank(8, 16, 42);
    const QueryBank b = init_query_bank(8, 16, 42);
    CHECK(bitwise_equal(a.q, b.q));

    const QueryBank c = init_query_bank(8, 16, 43);
    bool any_diff = false;
    for (std::size_t i = 0; i < c.q.numel(); ++i) any_diff |= c.q[i] != a.q[i];
    CHECK(any_diff);

    double mean = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < a.q.numel(); ++i) {
        mean += a.q[i];
        sq += a.q[i] * a.q[i];
    }
    const double n = static_cast<double>(a.q.numel());
    mean /= n;
    const double var = sq / n - mean * mean;
    CHECK(std::fabs(mean) <= 4.0 / std::sqrt(n));
    CHECK(var >= 0.5);
    CHECK(var <= 1.5);

    CHECK_THROWS_AS(init_query_bank(0, 16, 1), std::invalid_argument);
    CHECK_THROWS_AS(init_query_bank(8, 0, 1), std::invalid_argument);
}

TEST_CASE("attention weights singleton and symmetry cases") {
    DeterministicRng rng(51);
    const QueryBank qb = init_query_bank(3, 4, 7);

    const TokenSequence single = random_tokens(rng, 2, 1, 4);
    const Tensor w1 = attention_weights(single, qb);
    CHECK(w1.shape() == Shape{2, 1, 3});
    for (std::size_t i = 0; i < w1.numel(); ++i) CHECK(w1[i] == 1.0);

    // Identical tokens across N give uniform weights per column.
    Tensor same(Shape{1, 5, 4});
    DeterministicRng rng2(52);
    std::vector<double> tok(4);
    for (auto& v : tok) v = rng2.normal();
    for (std::size_t ni = 0; ni < 5; ++ni) {
        for (std::size_t di = 0; di < 4; ++di) same[ni * 4 + di] = tok[di];
    }
    const Tensor wu = attention_weights(TokenSequence(std::move(same)), qb);
    for (std::size_t i = 0; i < wu.numel(); ++i) {
        CHECK(wu[i] == doctest::Approx(0.2).epsilon(1e-12));
    }

    const TokenSequence wrong = random_tokens(rng, 1, 3, 5);
    CHECK_THROWS_AS(attention_weights(wrong, qb), std::invalid_argument);
}

TEST_CASE("attention weights match a long-double loop oracle") {
    // Hand instance: B=1, N=3, K=2, D=2.
    Tensor tokens(Shape{1, 3, 2}, {0.5, -1.0, 2.0, 0.25, -0.75, 1.5});
    QueryBank qb;
    qb.k = 2;
    qb.d = 2;
    qb.q = Tensor(Shape{2, 2}, {1.0, 0.5, -0.25, 2.0});

    const Tensor got = attention_weights(TokenSequence(tokens), qb);

    for (std::size_t ki = 0; ki < 2; ++ki) {
        long double scores[3];
        long double max_s = -1e30L;
        for (std::size_t ni = 0; ni < 3; ++ni) {
            scores[ni] = static_cast<long double>(tokens[ni * 2]) * qb.q[ki * 2] +
                         static_cast<long double>(tokens[ni * 2 + 1]) * qb.q[ki * 2 + 1];
            max_s = std::max(max_s, scores[ni]);
        }
        long double z = 0.0L;
        for (std::size_t ni = 0; ni < 3; ++ni) z += expl(scores[ni] - max_s);
        for (std::size_t ni = 0; ni < 3; ++ni) {
            const double want = static_cast<double>(expl(scores[ni] - max_s) / z);
            CHECK(got[ni * 2 + ki] == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("attention weights are column stochastic") {
    DeterministicRng rng(53);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t b = 1 + rng.next_u64() % 2;
        const std::size_t n = 1 + rng.next_u64() % 12;
        const std::size_t d = 1 + rng.next_u64() % 8;
        const std::size_t k = 1 + rng.next_u64() % 6;
        const QueryBank qb = init_query_bank(k, d, rng.next_u64());
        const Tensor w = attention_weights(random_tokens(rng, b, n, d), qb);
        for (std::size_t bi = 0; bi < b; ++bi) {
            for (std::size_t ki = 0; ki < k; ++ki) {
                double sum = 0.0;
                for (std::size_t ni = 0; ni < n; ++ni) sum += w[(bi * n + ni) * k + ki];
                CHECK(std::fabs(sum - 1.0) <= 1e-9);
            }
        }
    }
}

TEST_CASE("aggregate singleton and degenerate cases") {
    DeterministicRng rng(54);
    const QueryBank qb = init_query_bank(4, 6, 11);

    const TokenSequence single = random_tokens(rng, 2, 1, 6);
    const Tensor agg1 = aggregate(single, qb);
    CHECK(agg1.shape() == Shape{2, 4, 6});
    for (std::size_t bi = 0; bi < 2; ++bi) {
        for (std::size_t ki = 0; ki < 4; ++ki) {
            for (std::size_t di = 0; di < 6; ++di) {
                CHECK(agg1[(bi * 4 + ki) * 6 + di] == single.data[bi * 6 + di]);
            }
        }
    }

    Tensor same(Shape{1, 7, 6});
    std::vector<double> tok(6);
    for (auto& v : tok) v = rng.normal();
    for (std::size_t ni = 0; ni < 7; ++ni) {
        for (std::size_t di = 0; di < 6; ++di) same[ni * 6 + di] = tok[di];
    }
    const Tensor aggv = aggregate(TokenSequence(std::move(same)), qb);
    for (std::size_t ki = 0; ki < 4; ++ki) {
        for (std::size_t di = 0; di < 6; ++di) {
            CHECK(aggv[ki * 6 + di] == doctest::Approx(tok[di]).epsilon(1e-12));
        }
    }
}

TEST_CASE("aggregate matches a loop oracle on a hand instance") {
    Tensor tokens(Shape{1, 3, 2}, {0.5, -1.0, 2.0, 0.25, -0.75, 1.5});
    QueryBank qb;
    qb.k = 2;
    qb.d = 2;
    qb.q = Tensor(Shape{2, 2}, {1.0, 0.5, -0.25, 2.0});

    const TokenSequence seq(tokens);
    const Tensor weights = attention_weights(seq, qb);
    const Tensor got = aggregate(seq, qb);
    for (std::size_t ki = 0; ki < 2; ++ki) {
        for (std::size_t di = 0; di < 2; ++di) {
            long double acc = 0.0L;
            for (std::size_t ni = 0; ni < 3; ++ni) {
                acc += static_cast<long double>(weights[ni * 2 + ki]) *
                       static_cast<long double>(tokens[ni * 2 + di]);
            }
            CHECK(got[ki * 2 + di] ==
                  doctest::Approx(static_cast<double>(acc)).epsilon(1e-12));
        }
    }
}

TEST_CASE("aggregate respects per-coordinate convex hull bounds") {
    DeterministicRng rng(55);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t b = 1 + rng.next_u64() % 2;
        const std::size_t n = 1 + rng.next_u64() % 10;
        const std::size_t d = 1 + rng.next_u64() % 6;
        const std::size_t k = 1 + rng.next_u64() % 5;
        const TokenSequence seq = random_tokens(rng, b, n, d);
        const QueryBank qb = init_query_bank(k, d, rng.next_u64());
        const Tensor agg = aggregate(seq, qb);

        for (std::size_t bi = 0; bi < b; ++bi) {
            for (std::size_t di = 0; di < d; ++di) {
                double lo = seq.data[bi * n * d + di];
                double hi = lo;
                for (std::size_t ni = 1; ni < n; ++ni) {
                    const double v = seq.data[(bi * n + ni) * d + di];
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
                const double slack = 1e-12 * (std::fabs(lo) + std::fabs(hi) + 1.0);
                for (std::size_t ki = 0; ki < k; ++ki) {
                    const double v = agg[(bi * k + ki) * d + di];
                    CHECK(v >= lo - slack);
                    CHECK(v <= hi + slack);
                }
            }
        }
    }
}

TEST_CASE("aggregate is bitwise invariant under token permutations") {
    DeterministicRng rng(56);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t b = 1 + rng.next_u64() % 2;
        const std::size_t n = 2 + rng.next_u64() % 10;
        const std::size_t d = 1 + rng.next_u64() % 6;
        const std::size_t k = 1 + rng.next_u64() % 5;
        const TokenSequence seq = random_tokens(rng, b, n, d);
        const QueryBank qb = init_query_bank(k, d, rng.next_u64());

        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = n; i > 1; --i) {
            std::swap(perm[i - 1], perm[rng.next_u64() % i]);
        }
        Tensor shuffled(Shape{b, n, d});
        for (std::size_t bi = 0; bi < b; ++bi) {
            for (std::size_t ni = 0; ni < n; ++ni) {
                for (std::size_t di = 0; di < d; ++di) {
                    shuffled[(bi * n + ni) * d + di] =
                        seq.data[(bi * n + perm[ni]) * d + di];
                }
            }
        }

        const Tensor a = aggregate(seq, qb);
        const Tensor p = aggregate(TokenSequence(std::move(shuffled)), qb);
        REQUIRE(bitwise_equal(a, p));
    }
}

TEST_CASE("prepend") {
    DeterministicRng rng(57);
    const TokenSequence semantic = random_tokens(rng, 2, 5, 4);

    // K = 0 is the identity case.
    const Tensor empty(Shape{2, 0, 4});
    const TokenSequence same = prepend(empty, semantic);
    CHECK(bitwise_equal(same.data, semantic.data));

    // K = 8, M = 69 gives the 77-token layout with a bitwise-preserved tail.
    const TokenSequence long_sem = random_tokens(rng, 1, 69, 4);
    Tensor agg(Shape{1, 8, 4});
    for (auto& v : agg.values()) v = rng.normal();
    const TokenSequence out = prepend(agg, long_sem);
    REQUIRE(out.length() == 77);
    for (std::size_t i = 0; i < 8 * 4; ++i) CHECK(out.data[i] == agg[i]);
    for (std::size_t i = 0; i < 69 * 4; ++i) {
        CHECK(out.data[8 * 4 + i] == long_sem.data[i]);
    }

    // Random instance: both parts slice back exactly.
    const TokenSequence sem2 = random_tokens(rng, 2, 3, 4);
    Tensor agg2(Shape{2, 2, 4});
    for (auto& v : agg2.values()) v = rng.normal();
    const TokenSequence joined = prepend(agg2, sem2);
    for (std::size_t bi = 0; bi < 2; ++bi) {
        for (std::size_t i = 0; i < 2 * 4; ++i) {
            CHECK(joined.data[bi * 5 * 4 + i] == agg2[bi * 2 * 4 + i]);
        }
        for (std::size_t i = 0; i < 3 * 4; ++i) {
            CHECK(joined.data[bi * 5 * 4 + 2 * 4 + i] == sem2.data[bi * 3 * 4 + i]);
        }
    }

    CHECK_THROWS_AS(prepend(Tensor(Shape{1, 2, 4}), semantic), std::invalid_argument);
    CHECK_THROWS_AS(prepend(Tensor(Shape{2, 2, 5}), semantic), std::invalid_argument);
    CHECK_THROWS_AS(prepend(Tensor(Shape{2, 4}), semantic), std::invalid_argument);
}

TEST_CASE("full determinism from (tokens, K, D, seed)") {
    DeterministicRng rng(58);
    const TokenSequence seq = random_tokens(rng, 1, 6, 5);
    const Tensor a = aggregate(seq, init_query_bank(3, 5, 99));
    const Tensor b = aggregate(seq, init_query_bank(3, 5, 99));
    CHECK(bitwise_equal(a, b));
}
