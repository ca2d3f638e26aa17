#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dualline/diffusion.hpp"
#include "dualline/metrics.hpp"
#include "dualline/pipeline.hpp"
#include "dualline/rng.hpp"

#include <cmath>
#include <cstring>
#include <vector>

using namespace dualline;

namespace {

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() &&
           std::memcmp(a.data(), b.data(), a.numel() * sizeof(double)) == 0;
}

double support_rms(const Tensor& t, const ToyWorld& world, bool inside_face) {
    double sq = 0.0;
    std::size_t count = 0;
    for (std::size_t c = 0; c < world.channels; ++c) {
        for (std::size_t r = 0; r < world.height; ++r) {
            for (std::size_t col = 0; col < world.width; ++col) {
                if (world.face.contains(r, col) == inside_face) {
                    const double v = t[(c * world.height + r) * world.width + col];
                    sq += v * v;
                    ++count;
                }
            }
        }
    }
    return std::sqrt(sq / static_cast<double>(count));
}

}  // namespace

TEST_CASE("build_world determinism and support invariants") {
    PipelineConfig cfg;
    const ToyWorld a = build_world(cfg);
    const ToyWorld b = build_world(cfg);
    REQUIRE(a.templates.size() == cfg.num_scenes);
    REQUIRE(a.signatures.size() == cfg.num_identities);
    for (std::size_t s = 0; s < a.templates.size(); ++s) {
        CHECK(bitwise_equal(a.templates[s], b.templates[s]));
    }
    for (std::size_t k = 0; k < a.signatures.size(); ++k) {
        CHECK(bitwise_equal(a.signatures[k], b.signatures[k]));
    }

    for (const Tensor& t : a.templates) {
        for (std::size_t r = a.face.top; r < a.face.bottom; ++r) {
            for (std::size_t col = a.face.left; col < a.face.right; ++col) {
                for (std::size_t c = 0; c < a.channels; ++c) {
                    CHECK(t[(c * a.height + r) * a.width + col] == 0.0);
                }
            }
        }
        CHECK(std::fabs(support_rms(t, a, false) - 1.0) <= 1e-9);
    }
    for (const Tensor& sig : a.signatures) {
        for (std::size_t r = 0; r < a.height; ++r) {
            for (std::size_t col = 0; col < a.width; ++col) {
                if (!a.face.contains(r, col)) {
                    for (std::size_t c = 0; c < a.channels; ++c) {
                        CHECK(sig[(c * a.height + r) * a.width + col] == 0.0);
                    }
                }
            }
        }
        CHECK(std::fabs(support_rms(sig, a, true) - 1.0) <= 1e-9);
    }

    PipelineConfig other = cfg;
    other.seeds.world = 777;
    const ToyWorld c = build_world(other);
    bool differs = false;
    for (std::size_t i = 0; i < c.templates[0].numel(); ++i) {
        differs |= c.templates[0][i] != a.templates[0][i];
    }
    CHECK(differs);
}

TEST_CASE("face region must fit the frame") {
    PipelineConfig cfg;
    cfg.face.bottom = 20;
    CHECK_THROWS_AS(build_world(cfg), std::invalid_argument);
    cfg = PipelineConfig{};
    cfg.face.left = 12;
    cfg.face.right = 11;
    CHECK_THROWS_AS(build_world(cfg), std::invalid_argument);
    cfg = PipelineConfig{};
    cfg.enlarge_factor = 4;  // 4 * 6 = 24 > 16
    CHECK_THROWS_AS(build_world(cfg), std::invalid_argument);
}

TEST_CASE("closeup keeps the face at its native location") {
    PipelineConfig cfg;
    const ToyWorld world = build_world(cfg);
    const Tensor closeup = closeup_mean(world, 2);
    const Tensor& sig = world.signatures[2];
    for (std::size_t c = 0; c < world.channels; ++c) {
        for (std::size_t r = world.face.top; r < world.face.bottom; ++r) {
            for (std::size_t col = world.face.left; col < world.face.right; ++col) {
                CHECK(closeup[(c * world.height + r) * world.width + col] ==
                      sig[(c * world.height + r) * world.width + col]);
            }
        }
    }
    // The enlarged surround carries face-derived content.
    double surround = 0.0;
    for (std::size_t i = 0; i < closeup.numel(); ++i) surround += std::fabs(closeup[i]);
    double face_only = 0.0;
    for (std::size_t i = 0; i < sig.numel(); ++i) face_only += std::fabs(sig[i]);
    CHECK(surround > face_only);
}

TEST_CASE("branch mixtures are valid and correctly sized") {
    PipelineConfig cfg;
    const ToyWorld world = build_world(cfg);
    const BranchMixtures mix =
        build_branch_mixtures(world, 1, 2, cfg.idap_bias, cfg.id_variance, cfg.closeup_fill);

    mix.id_branch.validate();
    mix.id_uncond.validate();
    mix.semantic_plain.validate();
    mix.semantic_with_id.validate();
    mix.uncond.validate();

    CHECK(mix.id_branch.means.size() == 1);
    CHECK(mix.id_uncond.means.size() == cfg.num_identities);
    CHECK(mix.semantic_plain.means.size() == cfg.num_identities);
    CHECK(mix.semantic_with_id.means.size() == cfg.num_identities);
    CHECK(mix.uncond.means.size() == cfg.num_identities * cfg.num_scenes);

    // The tilted prior favors the decoded identity.
    double favored = mix.semantic_with_id.weights[1];
    for (std::size_t k = 0; k < mix.semantic_with_id.weights.size(); ++k) {
        if (k != 1) CHECK(favored > mix.semantic_with_id.weights[k]);
    }

    // semantic_plain components are template + signature.
    for (std::size_t k = 0; k < cfg.num_identities; ++k) {
        for (std::size_t i = 0; i < world.templates[2].numel(); ++i) {
            CHECK(mix.semantic_plain.means[k][i] ==
                  world.templates[2][i] + world.signatures[k][i]);
        }
    }
}

TEST_CASE("token codec round-trips identities") {
    PipelineConfig cfg;
    const ToyWorld world = build_world(cfg);

    // Zero distractor noise: every identity token is the bare embedding.
    PipelineConfig clean = cfg;
    clean.distractor_rms = 0.0;
    const TokenPair tokens = encode_tokens(world, 3, 1, clean);
    REQUIRE(tokens.id.length() == clean.token_count);
    for (std::size_t ni = 0; ni < clean.token_count; ++ni) {
        for (std::size_t di = 0; di < clean.token_dim; ++di) {
            CHECK(tokens.id.data[ni * clean.token_dim + di] == (di == 3 ? 1.0 : 0.0));
        }
    }
    const QueryBank qb = init_query_bank(clean.agg_tokens, clean.token_dim, clean.seeds.query);
    const auto decoded = decode_identity(aggregate(tokens.id, qb), world);
    REQUIRE(decoded.has_value());
    CHECK(*decoded == 3);

    // Semantic tokens use the scene directions, offset by the identity count.
    for (std::size_t di = 0; di < clean.token_dim; ++di) {
        CHECK(tokens.semantic.data[di] == (di == cfg.num_identities + 1 ? 1.0 : 0.0));
    }
}

TEST_CASE("decode returns nothing on a zero aggregate") {
    PipelineConfig cfg;
    const ToyWorld world = build_world(cfg);
    const Tensor zero(Shape{1, cfg.agg_tokens, cfg.token_dim});
    CHECK_FALSE(decode_identity(zero, world).has_value());
}

TEST_CASE("noisy aggregated tokens decode accurately") {
    PipelineConfig cfg;
    int correct = 0;
    const int trials = 300;
    for (int trial = 0; trial < trials; ++trial) {
        PipelineConfig c = cfg;
        c.seeds.world = static_cast<std::uint64_t>(trial) * 7919 + 13;
        c.target_identity = static_cast<std::size_t>(trial) % c.num_identities;
        const ToyWorld world = build_world(c);
        const TokenPair tokens =
            encode_tokens(world, c.target_identity, c.target_scene, c);
        const QueryBank qb = init_query_bank(c.agg_tokens, c.token_dim, c.seeds.query);
        const auto decoded = decode_identity(aggregate(tokens.id, qb), world);
        if (decoded && *decoded == c.target_identity) ++correct;
    }
    CHECK(static_cast<double>(correct) / trials >= 0.99);
}

TEST_CASE("gate-closed run reduces to single-line semantic sampling bitwise") {
    PipelineConfig cfg;
    cfg.m1 = cfg.steps;
    cfg.m2 = cfg.steps;
    const ToyWorld world = build_world(cfg);
    const RunResult result = run_dual_line(world, cfg);

    for (const auto& rec : result.trace) {
        CHECK_FALSE(rec.idaf_active);
        CHECK_FALSE(rec.idap_active);
        CHECK(rec.identity_fraction == 0.0);
    }
    CHECK_FALSE(result.has_last_mask);

    // The independent loop: plain semantic conditioning with shared CFG.
    const NoiseSchedule schedule = NoiseSchedule::make(cfg.base_steps, cfg.steps);
    const BranchMixtures mix = build_branch_mixtures(
        world, cfg.target_identity, cfg.target_scene, cfg.idap_bias, cfg.id_variance,
        cfg.closeup_fill);
    Tensor x(Shape{world.channels, world.height, world.width});
    {
        DeterministicRng rng(cfg.seeds.noise);
        for (auto& v : x.values()) v = rng.normal();
    }
    for (int t = 1; t <= cfg.steps; ++t) {
        const int t_from = schedule.step_indices[static_cast<std::size_t>(t - 1)];
        const Tensor eps = cfg_combine(
            eps_predict(x, t_from, mix.semantic_plain, schedule),
            eps_predict(x, t_from, mix.uncond, schedule), cfg.guidance_semantic);
        x = t < cfg.steps
                ? ddim_step(x, eps, t_from,
                            schedule.step_indices[static_cast<std::size_t>(t)], schedule)
                : ddim_step_final(x, eps, t_from, schedule);
    }
    CHECK(bitwise_equal(result.sample, x));
}

TEST_CASE("runs are bitwise deterministic") {
    PipelineConfig cfg;
    const ToyWorld world = build_world(cfg);
    const RunResult a = run_dual_line(world, cfg);
    const RunResult b = run_dual_line(world, cfg);
    CHECK(bitwise_equal(a.sample, b.sample));
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        CHECK(a.trace[i].identity_fraction == b.trace[i].identity_fraction);
        CHECK(a.trace[i].t_base == b.trace[i].t_base);
    }
    CHECK(a.decoded_identity == b.decoded_identity);
}

TEST_CASE("trace covers every step with increasing alpha_bar") {
    PipelineConfig cfg;
    const ToyWorld world = build_world(cfg);
    const RunResult result = run_dual_line(world, cfg);
    REQUIRE(result.trace.size() == static_cast<std::size_t>(cfg.steps));
    for (std::size_t i = 0; i < result.trace.size(); ++i) {
        CHECK(result.trace[i].step == static_cast<int>(i) + 1);
        if (i > 0) CHECK(result.trace[i].alpha_bar > result.trace[i - 1].alpha_bar);
        CHECK(result.trace[i].idaf_active == (result.trace[i].step > cfg.m1));
        CHECK(result.trace[i].idap_active == (result.trace[i].step > cfg.m2));
    }
}

TEST_CASE("identical branch mixtures reproduce the single line bitwise") {
    PipelineConfig cfg;
    cfg.guidance_identity = cfg.guidance_semantic;
    const ToyWorld world = build_world(cfg);

    BranchMixtures mix = build_branch_mixtures(world, cfg.target_identity,
                                               cfg.target_scene, cfg.idap_bias,
                                               cfg.id_variance, cfg.closeup_fill);
    // Collapse every law onto the plain semantic mixture.
    mix.id_branch = mix.semantic_plain;
    mix.id_uncond = mix.uncond;
    mix.semantic_with_id = mix.semantic_plain;

    const RunResult fused = run_dual_line(world, cfg, mix);

    PipelineConfig closed = cfg;
    closed.m1 = closed.steps;
    closed.m2 = closed.steps;
    const RunResult single = run_dual_line(world, closed, mix);
    CHECK(bitwise_equal(fused.sample, single.sample));
}

TEST_CASE("open gates with a heavy identity ratio dominate the face region") {
    PipelineConfig cfg;
    cfg.m1 = 0;
    cfg.m2 = 0;
    cfg.fusion.lambda_identity = 50.0;
    const ToyWorld world = build_world(cfg);
    const RunResult result = run_dual_line(world, cfg);

    for (const auto& rec : result.trace) {
        CHECK(rec.identity_fraction > 0.0);
    }

    REQUIRE(result.has_last_mask);
    std::size_t face_identity = 0, face_total = 0;
    const std::size_t h = world.height, w = world.width;
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t col = 0; col < w; ++col) {
            if (!world.face.contains(r, col)) continue;
            ++face_total;
            face_identity += result.last_mask.data[r * w + col];
        }
    }
    CHECK(face_identity * 2 > face_total);
}

TEST_CASE("default run beats the gate-closed baseline on identity") {
    int wins = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        PipelineConfig cfg;
        cfg.seeds.world = derive_seed(seed, 101);
        cfg.seeds.noise = derive_seed(seed, 103);
        const ToyWorld world = build_world(cfg);
        const double full = identity_score(run_dual_line(world, cfg).sample, world,
                                           cfg.target_identity);
        PipelineConfig closed = cfg;
        closed.m1 = closed.steps;
        closed.m2 = closed.steps;
        const double baseline = identity_score(run_dual_line(world, closed).sample, world,
                                               cfg.target_identity);
        if (full > baseline) ++wins;
    }
    CHECK(wins >= 4);
}

TEST_CASE("config validation rejects out-of-range gates and dims") {
    PipelineConfig cfg;
    cfg.m1 = cfg.steps + 1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = PipelineConfig{};
    cfg.num_identities = 16;  // 16 + 4 scenes > token_dim 16
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = PipelineConfig{};
    cfg.fusion.pool_factor = 3;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = PipelineConfig{};
    cfg.target_identity = cfg.num_identities;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
