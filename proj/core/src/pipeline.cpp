#include "dualline/pipeline.hpp"

#include "dualline/diffusion.hpp"
#include "dualline/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dualline {

namespace {

// Stream tags for splitting the world seed.
constexpr std::uint64_t kStreamTemplates = 101;
constexpr std::uint64_t kStreamSignatures = 202;
constexpr std::uint64_t kStreamIdTokens = 303;
constexpr std::uint64_t kStreamSemanticTokens = 404;

// Fill the masked region with seeded normals, then center and normalize to
// unit RMS over the support.
void fill_support(Tensor& t, const ToyWorld& world, bool inside_face,
                  DeterministicRng& rng) {
    std::vector<std::size_t> support;
    for (std::size_t c = 0; c < world.channels; ++c) {
        for (std::size_t r = 0; r < world.height; ++r) {
            for (std::size_t col = 0; col < world.width; ++col) {
                const bool in_face = world.face.contains(r, col);
                const std::size_t flat = (c * world.height + r) * world.width + col;
                if (in_face == inside_face) {
                    t[flat] = rng.normal();
                    support.push_back(flat);
                } else {
                    t[flat] = 0.0;
                }
            }
        }
    }
    if (support.empty()) return;
    double mean = 0.0;
    for (std::size_t i : support) mean += t[i];
    mean /= static_cast<double>(support.size());
    double sq = 0.0;
    for (std::size_t i : support) {
        t[i] -= mean;
        sq += t[i] * t[i];
    }
    const double rms = std::sqrt(sq / static_cast<double>(support.size()));
    if (rms > 0.0) {
        for (std::size_t i : support) t[i] /= rms;
    }
}

TokenSequence encode_sequence(std::size_t direction, const PipelineConfig& cfg,
                              std::uint64_t stream_seed) {
    const std::size_t n = cfg.token_count;
    const std::size_t d = cfg.token_dim;
    DeterministicRng rng(stream_seed);
    Tensor data(Shape{1, n, d});
    for (std::size_t ni = 0; ni < n; ++ni) {
        double* tok = data.data() + ni * d;
        tok[direction] = 1.0;
        if (cfg.distractor_rms > 0.0) {
            std::vector<double> z(d);
            double sq = 0.0;
            for (std::size_t di = 0; di < d; ++di) {
                z[di] = rng.normal();
                sq += z[di] * z[di];
            }
            const double norm = std::sqrt(sq);
            if (norm > 0.0) {
                const double scale =
                    cfg.distractor_rms * std::sqrt(static_cast<double>(d)) / norm;
                for (std::size_t di = 0; di < d; ++di) tok[di] += scale * z[di];
            }
        }
    }
    return TokenSequence(std::move(data));
}

Tensor sum_images(const Tensor& a, const Tensor& b) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a[i] + b[i];
    return out;
}

Tensor leading_tokens(const TokenSequence& seq, std::size_t count) {
    const std::size_t b = seq.batch();
    const std::size_t d = seq.dim();
    Tensor out(Shape{b, count, d});
    for (std::size_t bi = 0; bi < b; ++bi) {
        const double* src = seq.data.data() + bi * seq.length() * d;
        double* dst = out.data() + bi * count * d;
        for (std::size_t i = 0; i < count * d; ++i) dst[i] = src[i];
    }
    return out;
}

}  // namespace

void PipelineConfig::validate() const {
    if (steps < 1) throw std::invalid_argument("config: steps must be >= 1");
    if (m1 < 0 || m1 > steps || m2 < 0 || m2 > steps) {
        throw std::invalid_argument("config: gates must satisfy 0 <= M <= steps");
    }
    if (base_steps < 2 || steps > base_steps) {
        throw std::invalid_argument("config: steps must not exceed base_steps");
    }
    if (guidance_semantic < 0.0 || guidance_identity < 0.0) {
        throw std::invalid_argument("config: guidance scales must be >= 0");
    }
    if (!(fusion.lambda_semantic > 0.0) || !(fusion.lambda_identity > 0.0)) {
        throw std::invalid_argument("config: lambda scalers must be positive");
    }
    if (fusion.pool_factor == 0 || height % fusion.pool_factor != 0 ||
        width % fusion.pool_factor != 0) {
        throw std::invalid_argument("config: pool_factor must divide height and width");
    }
    if (agg_tokens == 0 || token_count == 0 || token_dim == 0) {
        throw std::invalid_argument("config: K, N, D must be >= 1");
    }
    if (channels == 0 || height == 0 || width == 0) {
        throw std::invalid_argument("config: image dims must be positive");
    }
    if (num_scenes == 0 || num_identities == 0) {
        throw std::invalid_argument("config: need at least one scene and identity");
    }
    if (num_identities + num_scenes > token_dim) {
        throw std::invalid_argument(
            "config: token_dim must be >= num_identities + num_scenes");
    }
    if (target_identity >= num_identities || target_scene >= num_scenes) {
        throw std::invalid_argument("config: target indices out of range");
    }
    if (face.top >= face.bottom || face.left >= face.right ||
        face.bottom > height || face.right > width) {
        throw std::invalid_argument("config: face region must be a nonempty block inside the frame");
    }
    if (sigma0_sq < 0.0) throw std::invalid_argument("config: sigma0_sq must be >= 0");
    if (idap_bias < 0.0) throw std::invalid_argument("config: idap_bias must be >= 0");
    if (id_variance < 0.0) throw std::invalid_argument("config: id_variance must be >= 0");
    if (distractor_rms < 0.0) {
        throw std::invalid_argument("config: distractor_rms must be >= 0");
    }
}

double RunResult::mean_identity_fraction() const {
    double acc = 0.0;
    std::size_t active = 0;
    for (const auto& rec : trace) {
        if (rec.idaf_active) {
            acc += rec.identity_fraction;
            ++active;
        }
    }
    return active == 0 ? 0.0 : acc / static_cast<double>(active);
}

ToyWorld build_world(const PipelineConfig& cfg) {
    cfg.validate();

    ToyWorld world;
    world.channels = cfg.channels;
    world.height = cfg.height;
    world.width = cfg.width;
    world.face = cfg.face;
    world.variance = cfg.sigma0_sq;

    if (cfg.enlarge_factor == 0) {
        const std::size_t fit_h = cfg.height / world.face.rows();
        const std::size_t fit_w = cfg.width / world.face.cols();
        world.enlarge_factor = std::max<std::size_t>(1, std::min(fit_h, fit_w));
    } else {
        if (cfg.enlarge_factor * world.face.rows() > cfg.height ||
            cfg.enlarge_factor * world.face.cols() > cfg.width) {
            throw std::invalid_argument("config: enlarge_factor does not fit the frame");
        }
        world.enlarge_factor = cfg.enlarge_factor;
    }

    world.templates.reserve(cfg.num_scenes);
    for (std::size_t s = 0; s < cfg.num_scenes; ++s) {
        Tensor t(Shape{cfg.channels, cfg.height, cfg.width});
        DeterministicRng rng(derive_seed(derive_seed(cfg.seeds.world, kStreamTemplates), s));
        fill_support(t, world, /*inside_face=*/false, rng);
        world.templates.push_back(std::move(t));
    }
    world.signatures.reserve(cfg.num_identities);
    for (std::size_t k = 0; k < cfg.num_identities; ++k) {
        Tensor t(Shape{cfg.channels, cfg.height, cfg.width});
        DeterministicRng rng(derive_seed(derive_seed(cfg.seeds.world, kStreamSignatures), k));
        fill_support(t, world, /*inside_face=*/true, rng);
        world.signatures.push_back(std::move(t));
    }
    return world;
}

Tensor closeup_mean(const ToyWorld& world, std::size_t identity) {
    return closeup_mean(world, identity, true);
}

Tensor closeup_mean(const ToyWorld& world, std::size_t identity, bool fill_frame) {
    if (identity >= world.num_identities()) {
        throw std::invalid_argument("closeup_mean: identity index out of range");
    }
    const Tensor& sig = world.signatures[identity];
    const std::size_t f = world.enlarge_factor;
    const std::size_t eh = f * world.face.rows();
    const std::size_t ew = f * world.face.cols();
    const std::size_t r0 = (world.height - eh) / 2;
    const std::size_t c0 = (world.width - ew) / 2;

    // The face itself stays at its native location; the enlarged,
    // frame-centered rendition fills the rest of the frame (edge-clamped
    // beyond the enlarged block). The identity line therefore carries the
    // scoreable face content and wants face material everywhere else --
    // the close-up pull.
    Tensor out(Shape{world.channels, world.height, world.width});
    const auto clamp_idx = [](std::ptrdiff_t v, std::size_t n) {
        if (v < 0) return std::size_t{0};
        if (v >= static_cast<std::ptrdiff_t>(n)) return n - 1;
        return static_cast<std::size_t>(v);
    };
    for (std::size_t c = 0; c < world.channels; ++c) {
        for (std::size_t r = 0; r < world.height; ++r) {
            for (std::size_t col = 0; col < world.width; ++col) {
                std::size_t src_r, src_c;
                if (world.face.contains(r, col)) {
                    src_r = r;
                    src_c = col;
                } else {
                    const std::ptrdiff_t di =
                        static_cast<std::ptrdiff_t>(r) - static_cast<std::ptrdiff_t>(r0);
                    const std::ptrdiff_t dj =
                        static_cast<std::ptrdiff_t>(col) - static_cast<std::ptrdiff_t>(c0);
                    const bool inside = di >= 0 && dj >= 0 &&
                                        di < static_cast<std::ptrdiff_t>(eh) &&
                                        dj < static_cast<std::ptrdiff_t>(ew);
                    if (!inside && !fill_frame) continue;
                    const std::size_t i = clamp_idx(di, eh);
                    const std::size_t j = clamp_idx(dj, ew);
                    src_r = world.face.top + i / f;
                    src_c = world.face.left + j / f;
                }
                out[(c * world.height + r) * world.width + col] =
                    sig[(c * world.height + src_r) * world.width + src_c];
            }
        }
    }
    return out;
}

GaussianMixture semantic_with_identity(const ToyWorld& world, std::size_t scene,
                                       std::size_t identity, double bias) {
    if (!(bias >= 0.0)) {
        throw std::invalid_argument("semantic_with_identity: bias must be >= 0");
    }
    // Tilts the random-identity prior toward the decoded identity instead
    // of replacing it outright; the aggregated tokens align identities but
    // do not pin them.
    const std::size_t ids = world.num_identities();
    const double favored = std::exp(bias);
    const double total = favored + static_cast<double>(ids - 1);

    GaussianMixture gm;
    gm.variance = world.variance;
    double acc = 0.0;
    for (std::size_t k = 0; k < ids; ++k) {
        const double w = (k == identity ? favored : 1.0) / total;
        gm.weights.push_back(w);
        gm.means.push_back(sum_images(world.templates.at(scene), world.signatures[k]));
        acc += w;
    }
    gm.weights.back() += 1.0 - acc;  // exact simplex for validate()
    return gm;
}

BranchMixtures build_branch_mixtures(const ToyWorld& world, std::size_t target_identity,
                                     std::size_t target_scene, double idap_bias,
                                     double id_variance, bool closeup_fill) {
    const std::size_t scenes = world.num_scenes();
    const std::size_t ids = world.num_identities();
    if (target_identity >= ids || target_scene >= scenes) {
        throw std::invalid_argument("mixtures: target indices out of range");
    }

    BranchMixtures mix;

    mix.id_branch.weights = {1.0};
    mix.id_branch.means.push_back(closeup_mean(world, target_identity, closeup_fill));
    mix.id_branch.variance = id_variance;

    mix.id_uncond.variance = id_variance;
    for (std::size_t k = 0; k < ids; ++k) {
        mix.id_uncond.weights.push_back(1.0 / static_cast<double>(ids));
        mix.id_uncond.means.push_back(closeup_mean(world, k, closeup_fill));
    }

    mix.semantic_plain.variance = world.variance;
    for (std::size_t k = 0; k < ids; ++k) {
        mix.semantic_plain.weights.push_back(1.0 / static_cast<double>(ids));
        mix.semantic_plain.means.push_back(
            sum_images(world.templates[target_scene], world.signatures[k]));
    }

    mix.semantic_with_id =
        semantic_with_identity(world, target_scene, target_identity, idap_bias);

    mix.uncond.variance = world.variance;
    for (std::size_t s = 0; s < scenes; ++s) {
        for (std::size_t k = 0; k < ids; ++k) {
            mix.uncond.weights.push_back(1.0 / static_cast<double>(scenes * ids));
            mix.uncond.means.push_back(sum_images(world.templates[s], world.signatures[k]));
        }
    }
    return mix;
}

TokenPair encode_tokens(const ToyWorld& world, std::size_t identity, std::size_t scene,
                        const PipelineConfig& cfg) {
    if (identity >= world.num_identities() || scene >= world.num_scenes()) {
        throw std::invalid_argument("encode_tokens: indices out of range");
    }
    TokenPair pair;
    pair.id = encode_sequence(
        identity, cfg,
        derive_seed(derive_seed(cfg.seeds.world, kStreamIdTokens), identity));
    pair.semantic = encode_sequence(
        world.num_identities() + scene, cfg,
        derive_seed(derive_seed(cfg.seeds.world, kStreamSemanticTokens), scene));
    return pair;
}

std::optional<std::size_t> decode_identity(const Tensor& aggregated, const ToyWorld& world) {
    if (aggregated.rank() != 3 || aggregated.dim(0) != 1) {
        throw std::invalid_argument("decode_identity: expected (1,K,D) aggregate, got " +
                                    shape_str(aggregated.shape()));
    }
    const std::size_t k = aggregated.dim(1);
    const std::size_t d = aggregated.dim(2);
    const std::size_t ids = world.num_identities();
    if (k == 0 || d < ids) {
        throw std::invalid_argument("decode_identity: aggregate too small for " +
                                    std::to_string(ids) + " identities");
    }

    // Mean-pool the K tokens; identity scores are the leading coordinates
    // (the identity embedding directions are the first basis vectors).
    std::vector<double> pooled(d, 0.0);
    for (std::size_t ki = 0; ki < k; ++ki) {
        for (std::size_t di = 0; di < d; ++di) pooled[di] += aggregated[ki * d + di];
    }
    for (double& v : pooled) v /= static_cast<double>(k);

    std::size_t best = 0;
    for (std::size_t i = 1; i < ids; ++i) {
        if (pooled[i] > pooled[best]) best = i;
    }
    double second = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ids; ++i) {
        if (i != best) second = std::max(second, pooled[i]);
    }
    if (!(pooled[best] - second >= 1e-6)) return std::nullopt;
    return best;
}

RunResult run_dual_line(const ToyWorld& world, const PipelineConfig& cfg) {
    return run_dual_line(world, cfg,
                         build_branch_mixtures(world, cfg.target_identity, cfg.target_scene,
                                               cfg.idap_bias, cfg.id_variance,
                                               cfg.closeup_fill));
}

RunResult run_dual_line(const ToyWorld& world, const PipelineConfig& cfg,
                        const BranchMixtures& mixtures) {
    cfg.validate();
    const NoiseSchedule schedule = NoiseSchedule::make(cfg.base_steps, cfg.steps);

    // IdAP runs once up front: tokens are static across the trajectory.
    const TokenPair tokens = encode_tokens(world, cfg.target_identity, cfg.target_scene, cfg);
    const QueryBank bank = init_query_bank(cfg.agg_tokens, cfg.token_dim, cfg.seeds.query);
    const Tensor aggregated = aggregate(tokens.id, bank);
    const TokenSequence prepended = prepend(aggregated, tokens.semantic);

    RunResult result;
    result.decoded_identity =
        decode_identity(leading_tokens(prepended, cfg.agg_tokens), world);

    GaussianMixture switched;
    const GaussianMixture* semantic_switched = nullptr;
    if (result.decoded_identity) {
        if (*result.decoded_identity == cfg.target_identity) {
            semantic_switched = &mixtures.semantic_with_id;
        } else {
            switched = semantic_with_identity(world, cfg.target_scene,
                                              *result.decoded_identity, cfg.idap_bias);
            semantic_switched = &switched;
        }
    }

    const std::size_t c = world.channels;
    const std::size_t h = world.height;
    const std::size_t w = world.width;
    Tensor x(Shape{c, h, w});
    {
        DeterministicRng rng(cfg.seeds.noise);
        for (auto& v : x.values()) v = rng.normal();
    }

    const std::vector<std::int64_t> batched{1, static_cast<std::int64_t>(c),
                                            static_cast<std::int64_t>(h),
                                            static_cast<std::int64_t>(w)};
    const std::vector<std::int64_t> unbatched{static_cast<std::int64_t>(c),
                                              static_cast<std::int64_t>(h),
                                              static_cast<std::int64_t>(w)};

    result.trace.reserve(static_cast<std::size_t>(cfg.steps));
    for (int t = 1; t <= cfg.steps; ++t) {
        const int t_from = schedule.step_indices[static_cast<std::size_t>(t - 1)];
        const bool idaf_active = t > cfg.m1;
        const bool idap_active = t > cfg.m2;

        const Tensor eps_uncond = eps_predict(x, t_from, mixtures.uncond, schedule);
        const Tensor eps_id = cfg_combine(
            eps_predict(x, t_from, mixtures.id_branch, schedule),
            eps_predict(x, t_from, mixtures.id_uncond, schedule), cfg.guidance_identity);
        const GaussianMixture& semantic_cond =
            (idap_active && semantic_switched) ? *semantic_switched : mixtures.semantic_plain;
        const Tensor eps_semantic = cfg_combine(
            eps_predict(x, t_from, semantic_cond, schedule), eps_uncond,
            cfg.guidance_semantic);

        Tensor eps_applied;
        double fraction = 0.0;
        if (idaf_active) {
            FusionReport report = fuse(reshape(eps_semantic, batched),
                                       reshape(eps_id, batched), cfg.fusion);
            eps_applied = reshape(report.fused, unbatched);
            fraction = report.identity_fraction;
            result.last_mask = std::move(report.decision_mask);
            result.has_last_mask = true;
        } else {
            eps_applied = eps_semantic;
        }

        x = (t < cfg.steps)
                ? ddim_step(x, eps_applied, t_from,
                            schedule.step_indices[static_cast<std::size_t>(t)], schedule)
                : ddim_step_final(x, eps_applied, t_from, schedule);

        result.trace.push_back({t, t_from, schedule.alpha_bar_at(t_from), idap_active,
                                idaf_active, fraction});
    }
    result.sample = std::move(x);
    return result;
}

}  // namespace dualline
