#include "dualline/idap.hpp"

#include "dualline/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace dualline {

namespace {

// Order-canonical reduction: sorting makes the sum a function of the value
// multiset only, which is what gives aggregate its bitwise permutation
// invariance over the token axis.
double sorted_sum(std::vector<double>& terms) {
    std::sort(terms.begin(), terms.end());
    double acc = 0.0;
    for (double t : terms) acc += t;
    return acc;
}

}  // namespace

TokenSequence::TokenSequence(Tensor t) : data(std::move(t)) {
    if (data.rank() != 3) {
        throw std::invalid_argument("token sequence: expected (B,N,D), got " +
                                    shape_str(data.shape()));
    }
}

QueryBank init_query_bank(std::size_t k, std::size_t d, std::uint64_t seed) {
    if (k == 0 || d == 0) {
        throw std::invalid_argument("query bank: K and D must be >= 1");
    }
    QueryBank qb;
    qb.k = k;
    qb.d = d;
    qb.seed = seed;
    qb.q = Tensor(Shape{k, d});
    DeterministicRng rng(seed);
    for (auto& v : qb.q.values()) v = rng.normal();
    return qb;
}

Tensor attention_weights(const TokenSequence& t_id, const QueryBank& qb) {
    if (t_id.dim() != qb.d) {
        throw std::invalid_argument("attention_weights: token dim " +
                                    std::to_string(t_id.dim()) + " vs query dim " +
                                    std::to_string(qb.d));
    }
    const std::size_t b = t_id.batch();
    const std::size_t n = t_id.length();
    const std::size_t k = qb.k;
    const std::size_t d = qb.d;

    // S[b,n,k] = <token, query>; the inner sum runs over D in storage order,
    // untouched by token permutations.
    Tensor scores(Shape{b, n, k});
    for (std::size_t bi = 0; bi < b; ++bi) {
        for (std::size_t ni = 0; ni < n; ++ni) {
            const double* tok = t_id.data.data() + (bi * n + ni) * d;
            for (std::size_t ki = 0; ki < k; ++ki) {
                const double* q = qb.q.data() + ki * d;
                double acc = 0.0;
                for (std::size_t di = 0; di < d; ++di) acc += tok[di] * q[di];
                scores[(bi * n + ni) * k + ki] = acc;
            }
        }
    }

    // Softmax over the token axis with a canonical-order denominator.
    Tensor out(scores.shape());
    std::vector<double> exps(n);
    std::vector<double> terms(n);
    for (std::size_t bi = 0; bi < b; ++bi) {
        for (std::size_t ki = 0; ki < k; ++ki) {
            double col_max = -std::numeric_limits<double>::infinity();
            for (std::size_t ni = 0; ni < n; ++ni) {
                col_max = std::max(col_max, scores[(bi * n + ni) * k + ki]);
            }
            for (std::size_t ni = 0; ni < n; ++ni) {
                exps[ni] = std::exp(scores[(bi * n + ni) * k + ki] - col_max);
                terms[ni] = exps[ni];
            }
            const double z = sorted_sum(terms);
            for (std::size_t ni = 0; ni < n; ++ni) {
                out[(bi * n + ni) * k + ki] = exps[ni] / z;
            }
        }
    }
    return out;
}

Tensor aggregate(const TokenSequence& t_id, const QueryBank& qb) {
    const Tensor weights = attention_weights(t_id, qb);
    const std::size_t b = t_id.batch();
    const std::size_t n = t_id.length();
    const std::size_t k = qb.k;
    const std::size_t d = qb.d;

    Tensor out(Shape{b, k, d});
    std::vector<double> terms(n);
    for (std::size_t bi = 0; bi < b; ++bi) {
        for (std::size_t ki = 0; ki < k; ++ki) {
            for (std::size_t di = 0; di < d; ++di) {
                for (std::size_t ni = 0; ni < n; ++ni) {
                    terms[ni] = weights[(bi * n + ni) * k + ki] *
                                t_id.data[(bi * n + ni) * d + di];
                }
                out[(bi * k + ki) * d + di] = sorted_sum(terms);
            }
        }
    }
    return out;
}

TokenSequence prepend(const Tensor& aggregated, const TokenSequence& t_semantic) {
    if (aggregated.rank() != 3) {
        throw std::invalid_argument("prepend: aggregated must be (B,K,D), got " +
                                    shape_str(aggregated.shape()));
    }
    const std::size_t b = aggregated.dim(0);
    const std::size_t k = aggregated.dim(1);
    const std::size_t d = aggregated.dim(2);
    if (b != t_semantic.batch() || d != t_semantic.dim()) {
        throw std::invalid_argument("prepend: aggregated " + shape_str(aggregated.shape()) +
                                    " vs semantic " + shape_str(t_semantic.data.shape()));
    }
    const std::size_t m = t_semantic.length();

    Tensor out(Shape{b, k + m, d});
    for (std::size_t bi = 0; bi < b; ++bi) {
        double* dst = out.data() + bi * (k + m) * d;
        const double* agg = aggregated.data() + bi * k * d;
        const double* sem = t_semantic.data.data() + bi * m * d;
        for (std::size_t i = 0; i < k * d; ++i) dst[i] = agg[i];
        for (std::size_t i = 0; i < m * d; ++i) dst[k * d + i] = sem[i];
    }
    return TokenSequence(std::move(out));
}

}  // namespace dualline
