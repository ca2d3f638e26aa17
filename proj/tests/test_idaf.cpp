#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dualline/idaf.hpp"
#include "dualline/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <vector>

using namespace dualline;

namespace {

Tensor random_tensor(DeterministicRng& rng, Shape shape) {
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = rng.normal();
    return t;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() &&
           std::memcmp(a.data(), b.data(), a.numel() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("build_stack orders semantic then identity") {
    const Tensor sem = Tensor::full(Shape{1, 1, 2, 2}, 0.0);
    const Tensor id = Tensor::full(Shape{1, 1, 2, 2}, 1.0);
    const Tensor stack = build_stack(sem, id);
    REQUIRE(stack.shape() == Shape{2, 1, 1, 2, 2});
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(stack[i] == 0.0);
        CHECK(stack[4 + i] == 1.0);
    }

    const Tensor both = build_stack(sem, sem);
    for (std::size_t i = 0; i < 4; ++i) CHECK(both[i] == both[4 + i]);

    CHECK_THROWS_AS(build_stack(sem, Tensor(Shape{1, 1, 2, 3})), std::invalid_argument);
    CHECK_THROWS_AS(build_stack(Tensor(Shape{2, 2}), Tensor(Shape{2, 2})),
                    std::invalid_argument);
}

TEST_CASE("stack round-trips through slices") {
    DeterministicRng rng(41);
    const Tensor sem = random_tensor(rng, Shape{2, 3, 4, 4});
    const Tensor id = random_tensor(rng, Shape{2, 3, 4, 4});
    const Tensor stack = build_stack(sem, id);
    const std::size_t n = sem.numel();
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(stack[i] == sem[i]);
        CHECK(stack[n + i] == id[i]);
    }
}

TEST_CASE("saliency zero and constant cases") {
    FusionConfig cfg;
    cfg.pool_factor = 2;

    const Tensor zeros(Shape{2, 1, 3, 4, 4});
    const Tensor s0 = saliency(zeros, cfg);
    CHECK(s0.shape() == Shape{2, 1, 4, 4});
    for (std::size_t i = 0; i < s0.numel(); ++i) CHECK(s0[i] == 0.0);

    // Constant magnitude c (mixed signs) gives constant saliency c.
    Tensor stack(Shape{2, 1, 3, 4, 4});
    DeterministicRng rng(42);
    for (auto& v : stack.values()) v = (rng.next_u64() & 1) ? 2.5 : -2.5;
    const Tensor sc = saliency(stack, cfg);
    for (std::size_t i = 0; i < sc.numel(); ++i) {
        CHECK(sc[i] == doctest::Approx(2.5).epsilon(1e-12));
    }
}

TEST_CASE("saliency matches a hand-composed loop oracle") {
    DeterministicRng rng(43);
    FusionConfig cfg;
    cfg.pool_factor = 4;
    const std::size_t b = 2, c = 3, h = 16, w = 16;
    const Tensor stack = random_tensor(rng, Shape{2, b, c, h, w});
    const Tensor got = saliency(stack, cfg);

    for (std::size_t branch = 0; branch < 2; ++branch) {
        for (std::size_t bi = 0; bi < b; ++bi) {
            for (std::size_t r = 0; r < h; ++r) {
                for (std::size_t col = 0; col < w; ++col) {
                    double acc = 0.0;
                    for (std::size_t ci = 0; ci < c; ++ci) {
                        const std::size_t bh = (r / 4) * 4;
                        const std::size_t bw = (col / 4) * 4;
                        double block = 0.0;
                        for (std::size_t dy = 0; dy < 4; ++dy) {
                            for (std::size_t dx = 0; dx < 4; ++dx) {
                                block += std::fabs(
                                    stack[((((branch * b + bi) * c + ci) * h + bh + dy) *
                                           w) +
                                          bw + dx]);
                            }
                        }
                        acc += block / 16.0;
                    }
                    const double want = acc / static_cast<double>(c);
                    const double have = got[((branch * b + bi) * h + r) * w + col];
                    CHECK(std::fabs(have - want) <= 1e-12 * std::max(1.0, std::fabs(want)));
                }
            }
        }
    }
}

TEST_CASE("saliency honors the c_mid knob") {
    DeterministicRng rng(44);
    const Tensor stack = random_tensor(rng, Shape{2, 2, 3, 4, 4});
    FusionConfig base;
    base.pool_factor = 2;
    FusionConfig grouped = base;
    grouped.c_mid = 4;  // divides 2*2*3 = 12
    CHECK(bitwise_equal(saliency(stack, base), saliency(stack, grouped)));

    FusionConfig bad = base;
    bad.c_mid = 5;
    CHECK_THROWS_AS(saliency(stack, bad), std::invalid_argument);
}

TEST_CASE("branch_weights examples") {
    FusionConfig cfg;
    cfg.lambda_semantic = 2.0;
    cfg.lambda_identity = 6.0;

    const Tensor uniform = Tensor::full(Shape{2, 1, 4, 4}, 0.7);
    const Tensor w = branch_weights(uniform, cfg);
    for (std::size_t i = 0; i < w.numel(); ++i) {
        CHECK(w[i] == doctest::Approx(1.0 / 16.0).epsilon(1e-12));
    }

    // Equal lambdas and identical maps give identical weight maps.
    DeterministicRng rng(45);
    Tensor sal(Shape{2, 1, 2, 2});
    for (std::size_t i = 0; i < 4; ++i) {
        sal[i] = std::fabs(rng.normal());
        sal[4 + i] = sal[i];
    }
    FusionConfig same;
    same.lambda_semantic = 3.0;
    same.lambda_identity = 3.0;
    const Tensor ws = branch_weights(sal, same);
    for (std::size_t i = 0; i < 4; ++i) CHECK(ws[i] == ws[4 + i]);

    // 2x2 map against a long-double softmax oracle.
    Tensor small(Shape{2, 1, 2, 2}, {0.1, 0.4, 0.2, 0.3, 0.1, 0.4, 0.2, 0.3});
    FusionConfig five;
    five.lambda_semantic = 5.0;
    five.lambda_identity = 5.0;
    const Tensor wf = branch_weights(small, five);
    const long double lam = 5.0L;
    const long double vals[4] = {0.1L, 0.4L, 0.2L, 0.3L};
    long double z = 0.0L;
    for (int i = 0; i < 4; ++i) z += expl(lam * vals[i] - lam * 0.4L);
    for (int i = 0; i < 4; ++i) {
        const double want = static_cast<double>(expl(lam * vals[i] - lam * 0.4L) / z);
        CHECK(wf[i] == doctest::Approx(want).epsilon(1e-12));
    }

    // Each (branch, batch) map sums to 1.
    const Tensor big = abs_elem(random_tensor(rng, Shape{2, 3, 8, 8}));
    const Tensor wb = branch_weights(big, cfg);
    for (std::size_t m = 0; m < 6; ++m) {
        double sum = 0.0;
        for (std::size_t p = 0; p < 64; ++p) sum += wb[m * 64 + p];
        CHECK(std::fabs(sum - 1.0) <= 1e-9);
    }

    FusionConfig bad;
    bad.lambda_semantic = 0.0;
    CHECK_THROWS_AS(branch_weights(uniform, bad), std::invalid_argument);
}

TEST_CASE("fuse with identical branches reproduces the input") {
    DeterministicRng rng(46);
    const Tensor eps = random_tensor(rng, Shape{1, 3, 8, 8});

    // At any lambda pair the gathered values equal the input bitwise.
    FusionConfig cfg;
    cfg.pool_factor = 2;
    CHECK(bitwise_equal(fuse(eps, eps, cfg).fused, eps));

    // With equal lambdas the weight maps tie everywhere and the tie rule
    // sends every element to the semantic branch.
    FusionConfig equal = cfg;
    equal.lambda_identity = equal.lambda_semantic;
    const FusionReport report = fuse(eps, eps, equal);
    CHECK(bitwise_equal(report.fused, eps));
    CHECK(report.identity_fraction == 0.0);
    for (std::size_t v : report.decision_mask.data) CHECK(v == kSemanticBranch);
}

TEST_CASE("fuse selects an isolated high-magnitude identity block") {
    // Identity noise has one aligned 4x4 block of large values; semantic
    // noise is small. With the 1:5 ratio the mask is exactly that block.
    const std::size_t h = 16, w = 16;
    Tensor sem(Shape{1, 3, h, w});
    Tensor id(Shape{1, 3, h, w});
    DeterministicRng rng(47);
    for (auto& v : sem.values()) v = 0.01 * rng.normal();
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t r = 4; r < 8; ++r) {
            for (std::size_t col = 8; col < 12; ++col) {
                id[(c * h + r) * w + col] = (rng.next_u64() & 1) ? 10.0 : -10.0;
            }
        }
    }

    FusionConfig cfg;  // defaults: lambda 1:5, pool 4
    const FusionReport report = fuse(sem, id, cfg);
    CHECK(report.identity_fraction == doctest::Approx(16.0 / 256.0));
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t r = 0; r < h; ++r) {
            for (std::size_t col = 0; col < w; ++col) {
                const bool in_block = r >= 4 && r < 8 && col >= 8 && col < 12;
                CHECK(report.decision_mask.data[(c * h + r) * w + col] ==
                      (in_block ? kIdentityBranch : kSemanticBranch));
            }
        }
    }

    const FusionReport ref = fuse_reference(sem, id, cfg);
    CHECK(ref.decision_mask.data == report.decision_mask.data);
    CHECK(bitwise_equal(ref.fused, report.fused));
}

TEST_CASE("disjoint peaks at equal lambdas split the wins") {
    const std::size_t h = 8, w = 8;
    Tensor sem(Shape{1, 1, h, w});
    Tensor id(Shape{1, 1, h, w});
    // Semantic peak block at rows 0..4, cols 0..4; identity peak at 4..8 x 4..8.
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t col = 0; col < 4; ++col) {
            sem[r * w + col] = 8.0;
            id[(r + 4) * w + col + 4] = 8.0;
        }
    }
    FusionConfig cfg;
    cfg.lambda_semantic = 3.0;
    cfg.lambda_identity = 3.0;
    cfg.pool_factor = 4;
    const FusionReport report = fuse(sem, id, cfg);
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t col = 0; col < w; ++col) {
            const bool id_peak = r >= 4 && col >= 4;
            CHECK(report.decision_mask.data[r * w + col] ==
                  (id_peak ? kIdentityBranch : kSemanticBranch));
        }
    }

    const FusionReport ref = fuse_reference(sem, id, cfg);
    CHECK(ref.decision_mask.data == report.decision_mask.data);
}

TEST_CASE("single-element fusion ties to the semantic branch") {
    const Tensor sem(Shape{1, 1, 1, 1}, {0.4});
    const Tensor id(Shape{1, 1, 1, 1}, {-2.0});
    FusionConfig cfg;
    cfg.pool_factor = 1;
    const FusionReport report = fuse(sem, id, cfg);
    CHECK(report.identity_fraction == 0.0);
    CHECK(report.fused[0] == 0.4);
}

TEST_CASE("zero inputs fuse to zero with the semantic tie rule") {
    const Tensor zero(Shape{1, 3, 4, 4});
    FusionConfig cfg;
    cfg.pool_factor = 2;
    const FusionReport report = fuse(zero, zero, cfg);
    CHECK(report.identity_fraction == 0.0);
    for (std::size_t i = 0; i < report.fused.numel(); ++i) CHECK(report.fused[i] == 0.0);
}

TEST_CASE("fuse equals fuse_reference on randomized instances") {
    DeterministicRng rng(48);
    const double lambdas[4] = {1.0, 3.0, 5.0, 7.0};
    const std::size_t factors[3] = {1, 2, 4};
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t b = 1 + rng.next_u64() % 2;
        const Tensor sem = random_tensor(rng, Shape{b, 3, 16, 16});
        const Tensor id = random_tensor(rng, Shape{b, 3, 16, 16});
        FusionConfig cfg;
        cfg.lambda_semantic = lambdas[rng.next_u64() % 4];
        cfg.lambda_identity = lambdas[rng.next_u64() % 4];
        cfg.pool_factor = factors[rng.next_u64() % 3];

        const FusionReport got = fuse(sem, id, cfg);
        const FusionReport want = fuse_reference(sem, id, cfg);
        REQUIRE(got.decision_mask.data == want.decision_mask.data);
        REQUIRE(bitwise_equal(got.fused, want.fused));
        CHECK(got.identity_fraction == want.identity_fraction);
    }
}

TEST_CASE("selection consistency and channel-constant masks") {
    DeterministicRng rng(49);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t b = 1 + rng.next_u64() % 2;
        const std::size_t c = 3, h = 8, w = 8;
        const Tensor sem = random_tensor(rng, Shape{b, c, h, w});
        const Tensor id = random_tensor(rng, Shape{b, c, h, w});
        FusionConfig cfg;
        cfg.pool_factor = 2;
        const FusionReport report = fuse(sem, id, cfg);
        const Tensor weights = branch_weights(saliency(build_stack(sem, id), cfg), cfg);

        std::size_t identity_count = 0;
        for (std::size_t bi = 0; bi < b; ++bi) {
            for (std::size_t p = 0; p < h * w; ++p) {
                const double w_sem = weights[(kSemanticBranch * b + bi) * h * w + p];
                const double w_id = weights[(kIdentityBranch * b + bi) * h * w + p];
                const std::size_t expected = w_id > w_sem ? kIdentityBranch : kSemanticBranch;
                for (std::size_t ci = 0; ci < c; ++ci) {
                    const std::size_t at = ((bi * c + ci) * h * w) + p;
                    CHECK(report.decision_mask.data[at] == expected);
                    identity_count += report.decision_mask.data[at];
                }
            }
        }
        CHECK(report.identity_fraction ==
              static_cast<double>(identity_count) /
                  static_cast<double>(report.decision_mask.numel()));
    }
}

TEST_CASE("within-branch weight ordering is invariant under common rescaling") {
    DeterministicRng rng(50);
    const Tensor sem = random_tensor(rng, Shape{1, 3, 8, 8});
    const Tensor id = random_tensor(rng, Shape{1, 3, 8, 8});
    FusionConfig cfg;
    cfg.pool_factor = 2;

    const Tensor w1 = branch_weights(saliency(build_stack(sem, id), cfg), cfg);
    for (double scale : {0.3, 2.0, 11.0}) {
        Tensor sem_s = sem;
        Tensor id_s = id;
        for (auto& v : sem_s.values()) v *= scale;
        for (auto& v : id_s.values()) v *= scale;
        const Tensor w2 = branch_weights(saliency(build_stack(sem_s, id_s), cfg), cfg);

        for (std::size_t branch = 0; branch < 2; ++branch) {
            std::vector<std::size_t> order1(64), order2(64);
            std::iota(order1.begin(), order1.end(), 0);
            std::iota(order2.begin(), order2.end(), 0);
            const double* a = w1.data() + branch * 64;
            const double* b = w2.data() + branch * 64;
            std::sort(order1.begin(), order1.end(),
                      [&](std::size_t x, std::size_t y) { return a[x] < a[y]; });
            std::sort(order2.begin(), order2.end(),
                      [&](std::size_t x, std::size_t y) { return b[x] < b[y]; });
            CHECK(order1 == order2);
        }
    }
}
