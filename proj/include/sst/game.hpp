#pragma once

#include <map>
#include <optional>
#include <thread>
#include <variant>

#include "sst/rng.hpp"
#include "sst/states.hpp"
#include "sst/stepfn.hpp"

namespace sst {

// Column-stochastic convention: probs' = B probs, entries B[i][j] = P(j -> i),
// columns sum to 1.
template <class S>
using Matrix = std::vector<std::vector<S>>;

template <class S>
struct Thermalize {
    Matrix<S> matrix;
};

// Work extraction on a set of levels. A finite factor w multiplies their
// Gibbs weights (energy change -kT ln w); when the occupied level is in the
// set the factor is credited to the work reservoir. `to_infinity` is the
// raise-to-infinite-energy limit: weights drop to zero and the occupied
// branch carries factor 0, i.e. log-work -inf, an automatic failure.
template <class S>
struct Extract {
    std::vector<int> levels;
    S factor{1};
    bool to_infinity = false;
};

// The inverse limit: bring levels down from infinite energy to the given
// finite weights. Legal only while the levels are empty on every path, so no
// work is ever exchanged.
template <class S>
struct LowerFromInfinity {
    std::vector<int> levels;
    std::vector<S> weights;
};

// Free relabeling: new[i] = old[perm[i]].
struct Permute {
    std::vector<int> perm;
};

// Analytic isothermal shift of the boundary between `subject` and `toward`
// by `amount` (in units of the pair weight, positive growing the subject).
// Zero work on every branch.
template <class S>
struct Shift {
    int subject;
    int toward;
    S amount;
};

template <class S>
using Action = std::variant<Thermalize<S>, Extract<S>, LowerFromInfinity<S>, Permute, Shift<S>>;

template <class S>
struct Strategy {
    std::vector<Action<S>> actions;
    S target_logwork{1};  // success threshold on the product of step factors
};

inline constexpr int kMaxExtractSteps = 20;
inline constexpr size_t kMaxLivePaths = size_t(1) << 21;

// ---------------------------------------------------------------------------
// validation

template <class S>
void validate_thermalize(const Matrix<S>& b, const std::vector<S>& weights) {
    const size_t n = weights.size();
    if (b.size() != n) throw validation_error("thermalize: matrix dimension mismatch");
    for (const auto& row : b) {
        if (row.size() != n) throw validation_error("thermalize: matrix not square");
        for (const auto& e : row)
            if (e < S(0) && !(num<S>::is_zero(e)))
                throw validation_error("thermalize: negative entry");
    }
    for (size_t j = 0; j < n; ++j) {
        S col(0);
        for (size_t i = 0; i < n; ++i) col += b[i][j];
        if (!num<S>::eq(col, S(1))) throw validation_error("thermalize: column does not sum to 1");
    }
    // Gibbs fixing: B A = A, checked without normalizing by Z
    for (size_t i = 0; i < n; ++i) {
        S acc(0);
        for (size_t j = 0; j < n; ++j) acc += b[i][j] * weights[j];
        if (!num<S>::eq(acc, weights[i]))
            throw validation_error("thermalize: matrix does not fix the Gibbs state");
    }
}

template <class S>
std::vector<S> apply_matrix(const Matrix<S>& b, const std::vector<S>& v) {
    std::vector<S> out(v.size(), S(0));
    for (size_t i = 0; i < v.size(); ++i)
        for (size_t j = 0; j < v.size(); ++j)
            if (!(b[i][j] == S(0)) && !(v[j] == S(0))) out[i] += b[i][j] * v[j];
    return out;
}

template <class S>
DiagonalState<S> apply_thermalization(const DiagonalState<S>& rho, const Matrix<S>& b) {
    auto w = rho.weights();
    validate_thermalize(b, w);
    return DiagonalState<S>::from_weights(std::move(w), apply_matrix(b, rho.probs()));
}

// Fine-grained representation of a thermalization: with all weights integer
// multiples N_k of the common width Z/N, the rescaled heights transform under
// F[l][m] = B[k_l][k_m] / N_{k_l}. Verifies that F is bistochastic and that
// it reproduces the level-grained action.
template <class S>
Matrix<S> fine_grained_matrix(const Matrix<S>& b, const DiagonalState<S>& rho, long N) {
    if (N <= 0) throw precondition_error("fine_grained_matrix: N must be positive");
    auto weights = rho.weights();
    validate_thermalize(b, weights);
    const S unit = rho.z() / S(N);
    std::vector<long> counts(weights.size());
    std::vector<int> owner;  // level index of each fine block
    for (size_t k = 0; k < weights.size(); ++k) {
        const S ratio = weights[k] / unit;
        const double r = to_double(ratio);
        const long c = std::lround(r);
        if (!num<S>::eq(ratio, num<S>::from_int(c)))
            throw precondition_error("fine_grained_matrix: weights not commensurate with Z/N");
        counts[k] = c;
        for (long t = 0; t < c; ++t) owner.push_back(static_cast<int>(k));
    }
    if (owner.size() != static_cast<size_t>(N))
        throw precondition_error("fine_grained_matrix: counts do not sum to N");

    Matrix<S> f(N, std::vector<S>(N, S(0)));
    for (long l = 0; l < N; ++l)
        for (long m = 0; m < N; ++m)
            f[l][m] = b[owner[l]][owner[m]] / num<S>::from_int(counts[owner[l]]);

    for (long i = 0; i < N; ++i) {
        S row(0), col(0);
        for (long j = 0; j < N; ++j) {
            row += f[i][j];
            col += f[j][i];
        }
        if (!num<S>::eq(row, S(1)) || !num<S>::eq(col, S(1)))
            throw precondition_error("fine_grained_matrix: F is not bistochastic");
    }

    // fine heights before/after must match the level-grained evolution
    const auto probs = rho.probs();
    const auto after = apply_matrix(b, probs);
    std::vector<S> fine(N);
    for (long l = 0; l < N; ++l)
        fine[l] = probs[owner[l]] / (unit * num<S>::from_int(counts[owner[l]]));
    const auto fine_after = apply_matrix(f, fine);
    for (long l = 0; l < N; ++l) {
        const S expect = after[owner[l]] / (unit * num<S>::from_int(counts[owner[l]]));
        if (!num<S>::eq(fine_after[l], expect))
            throw precondition_error("fine_grained_matrix: fine action disagrees with B");
    }
    return f;
}

// ---------------------------------------------------------------------------
// exact path enumeration

template <class S>
struct PathOutcome {
    std::vector<int8_t> branches;  // per branching action: 1 = occupied/pair, 0 = rest
    S probability{1};
    S work_factor{1};  // product of step factors; 0 encodes log-work -inf
    std::vector<S> probs;
    int merged = 1;

    bool failed_infinite() const { return work_factor == S(0); }
};

template <class S>
struct EnumerationResult {
    std::vector<S> final_weights;
    S final_z{0};
    std::vector<PathOutcome<S>> paths;

    // conditional end state of a path; empty when probability mass sits on
    // infinite-energy levels
    std::optional<DiagonalState<S>> final_state(const PathOutcome<S>& path) const {
        for (size_t i = 0; i < final_weights.size(); ++i)
            if (final_weights[i] == S(0) && !num<S>::is_zero(path.probs[i])) return std::nullopt;
        return DiagonalState<S>::from_weights(final_weights, path.probs);
    }
};

namespace detail {

template <class S>
struct EngineState {
    std::vector<S> weights;
    S z{0};
    std::vector<PathOutcome<S>> paths;

    void recompute_z() {
        z = S(0);
        for (const auto& w : weights) z += w;
    }

    void merge() {
        std::map<std::pair<S, std::vector<S>>, size_t> index;
        std::vector<PathOutcome<S>> merged;
        for (auto& p : paths) {
            auto key = std::make_pair(p.work_factor, p.probs);
            auto [it, inserted] = index.emplace(std::move(key), merged.size());
            if (inserted) {
                merged.push_back(std::move(p));
            } else {
                auto& tgt = merged[it->second];
                tgt.probability += p.probability;
                tgt.merged += p.merged;
            }
        }
        paths = std::move(merged);
    }
};

// Branch probabilities below this are float roundoff, not physics; the exact
// mode prunes only literal zeros.
template <class S>
bool negligible_branch(const S& p) {
    if constexpr (num<S>::exact)
        return p == S(0);
    else
        return p <= 1e-13;
}

inline void check_levels(const std::vector<int>& levels, size_t n, const char* who) {
    if (levels.empty()) throw validation_error(std::string(who) + ": empty level set");
    std::vector<bool> seen(n, false);
    for (int l : levels) {
        if (l < 0 || static_cast<size_t>(l) >= n)
            throw validation_error(std::string(who) + ": level index out of range");
        if (seen[l]) throw validation_error(std::string(who) + ": duplicate level index");
        seen[l] = true;
    }
}

// hit/miss split of one path under an extract
template <class S>
void branch_extract(EngineState<S>& st, const Extract<S>& act) {
    check_levels(act.levels, st.weights.size(), "extract");
    if (!act.to_infinity && !(act.factor > S(0)))
        throw validation_error("extract: factor must be positive");
    std::vector<bool> in(st.weights.size(), false);
    for (int l : act.levels) in[l] = true;

    std::vector<PathOutcome<S>> next;
    next.reserve(st.paths.size() * 2);
    for (auto& p : st.paths) {
        S eta(0);
        for (size_t i = 0; i < in.size(); ++i)
            if (in[i]) eta += p.probs[i];
        const S miss = S(1) - eta;
        if (!detail::negligible_branch(eta)) {
            PathOutcome<S> hit;
            hit.branches = p.branches;
            hit.branches.push_back(1);
            hit.probability = p.probability * eta;
            hit.work_factor = act.to_infinity ? S(0) : p.work_factor * act.factor;
            hit.merged = p.merged;
            hit.probs.assign(in.size(), S(0));
            for (size_t i = 0; i < in.size(); ++i)
                if (in[i]) hit.probs[i] = p.probs[i] / eta;
            next.push_back(std::move(hit));
        }
        if (!detail::negligible_branch(miss)) {
            PathOutcome<S> ms;
            ms.branches = std::move(p.branches);
            ms.branches.push_back(0);
            ms.probability = p.probability * miss;
            ms.work_factor = p.work_factor;
            ms.merged = p.merged;
            ms.probs.assign(in.size(), S(0));
            for (size_t i = 0; i < in.size(); ++i)
                if (!in[i]) ms.probs[i] = p.probs[i] / miss;
            next.push_back(std::move(ms));
        }
    }
    st.paths = std::move(next);

    for (int l : act.levels)
        st.weights[l] = act.to_infinity ? S(0) : st.weights[l] * act.factor;
    st.recompute_z();
}

template <class S>
void branch_shift(EngineState<S>& st, const Shift<S>& act) {
    const size_t n = st.weights.size();
    if (act.subject < 0 || act.toward < 0 || static_cast<size_t>(act.subject) >= n ||
        static_cast<size_t>(act.toward) >= n || act.subject == act.toward)
        throw validation_error("shift: bad level pair");
    const S aj = st.weights[act.subject];
    const S ak = st.weights[act.toward];
    const S pair = aj + ak;
    S nj = aj + act.amount * pair;
    S nk = ak - act.amount * pair;
    if (nj < S(0)) {
        if (!num<S>::is_zero(nj)) throw precondition_error("shift: amount outside allowed range");
        nj = S(0);
    }
    if (nk < S(0)) {
        if (!num<S>::is_zero(nk)) throw precondition_error("shift: amount outside allowed range");
        nk = S(0);
    }

    std::vector<PathOutcome<S>> next;
    next.reserve(st.paths.size() * 2);
    for (auto& p : st.paths) {
        const S mass = p.probs[act.subject] + p.probs[act.toward];
        // equal rescaled heights unless one side is a zero-width block
        if (!detail::negligible_branch(mass) && aj > S(0) && ak > S(0)) {
            if (!num<S>::eq(p.probs[act.subject] * ak, p.probs[act.toward] * aj))
                throw precondition_error("shift: levels are not at equal rescaled height");
        }
        if (detail::negligible_branch(mass)) {
            next.push_back(std::move(p));
            continue;
        }
        const S rest = S(1) - mass;
        {
            PathOutcome<S> onpair;
            onpair.branches = p.branches;
            onpair.branches.push_back(1);
            onpair.probability = p.probability * mass;
            onpair.work_factor = p.work_factor;
            onpair.merged = p.merged;
            onpair.probs.assign(n, S(0));
            if (pair > S(0)) {
                onpair.probs[act.subject] = nj / pair;
                onpair.probs[act.toward] = nk / pair;
            }
            next.push_back(std::move(onpair));
        }
        if (!detail::negligible_branch(rest)) {
            PathOutcome<S> off;
            off.branches = std::move(p.branches);
            off.branches.push_back(0);
            off.probability = p.probability * rest;
            off.work_factor = p.work_factor;
            off.merged = p.merged;
            off.probs.assign(n, S(0));
            for (size_t i = 0; i < n; ++i)
                if (i != static_cast<size_t>(act.subject) && i != static_cast<size_t>(act.toward))
                    off.probs[i] = p.probs[i] / rest;
            next.push_back(std::move(off));
        }
    }
    st.paths = std::move(next);
    st.weights[act.subject] = nj;
    st.weights[act.toward] = nk;
}

template <class S>
void apply_lower(EngineState<S>& st, const LowerFromInfinity<S>& act) {
    check_levels(act.levels, st.weights.size(), "lower");
    if (act.weights.size() != act.levels.size())
        throw validation_error("lower: one weight per level required");
    for (size_t t = 0; t < act.levels.size(); ++t) {
        const int l = act.levels[t];
        if (!(st.weights[l] == S(0)))
            throw precondition_error("lower: level is not at infinite energy");
        if (!(act.weights[t] > S(0))) throw validation_error("lower: weights must be positive");
        for (const auto& p : st.paths)
            if (!num<S>::is_zero(p.probs[l]))
                throw precondition_error("lower: level is occupied on some path");
        st.weights[l] = act.weights[t];
    }
    st.recompute_z();
}

}  // namespace detail

template <class S>
int count_extract_steps(const Strategy<S>& strategy) {
    int m = 0;
    for (const auto& a : strategy.actions)
        if (std::holds_alternative<Extract<S>>(a)) ++m;
    return m;
}

template <class S>
EnumerationResult<S> enumerate_paths(const DiagonalState<S>& rho, const Strategy<S>& strategy,
                                     bool merge_equivalent = true) {
    if (count_extract_steps(strategy) > kMaxExtractSteps)
        throw cap_exceeded("enumerate_paths: too many extract steps, use Monte Carlo mode");

    detail::EngineState<S> st;
    st.weights = rho.weights();
    st.recompute_z();
    PathOutcome<S> root;
    root.probs = rho.probs();
    st.paths.push_back(std::move(root));

    for (const auto& action : strategy.actions) {
        std::visit(
            [&](const auto& act) {
                using T = std::decay_t<decltype(act)>;
                if constexpr (std::is_same_v<T, Thermalize<S>>) {
                    validate_thermalize(act.matrix, st.weights);
                    for (auto& p : st.paths) p.probs = apply_matrix(act.matrix, p.probs);
                } else if constexpr (std::is_same_v<T, Permute>) {
                    const auto& perm = act.perm;
                    detail::check_levels(perm, st.weights.size(), "permute");
                    if (perm.size() != st.weights.size())
                        throw validation_error("permute: wrong size");
                    std::vector<S> w(st.weights.size());
                    for (size_t i = 0; i < perm.size(); ++i) w[i] = st.weights[perm[i]];
                    st.weights = std::move(w);
                    for (auto& p : st.paths) {
                        std::vector<S> q(perm.size());
                        for (size_t i = 0; i < perm.size(); ++i) q[i] = p.probs[perm[i]];
                        p.probs = std::move(q);
                    }
                } else if constexpr (std::is_same_v<T, Extract<S>>) {
                    detail::branch_extract(st, act);
                } else if constexpr (std::is_same_v<T, LowerFromInfinity<S>>) {
                    detail::apply_lower(st, act);
                } else if constexpr (std::is_same_v<T, Shift<S>>) {
                    detail::branch_shift(st, act);
                }
            },
            action);
        if (merge_equivalent) st.merge();
        if (st.paths.size() > kMaxLivePaths)
            throw cap_exceeded("enumerate_paths: path count cap exceeded, use Monte Carlo mode");
    }

    EnumerationResult<S> out;
    out.final_weights = std::move(st.weights);
    out.final_z = S(0);
    for (const auto& w : out.final_weights) out.final_z += w;
    out.paths = std::move(st.paths);
    return out;
}

// Unconditional (mixture) evolution of the occupation vector under one
// action; the branch probabilities recombine to exactly this.
template <class S>
std::vector<S> unconditional_step(const std::vector<S>& weights, const std::vector<S>& probs,
                                  const Action<S>& action) {
    return std::visit(
        [&](const auto& act) -> std::vector<S> {
            using T = std::decay_t<decltype(act)>;
            if constexpr (std::is_same_v<T, Thermalize<S>>) {
                return apply_matrix(act.matrix, probs);
            } else if constexpr (std::is_same_v<T, Permute>) {
                std::vector<S> q(probs.size());
                for (size_t i = 0; i < act.perm.size(); ++i) q[i] = probs[act.perm[i]];
                return q;
            } else if constexpr (std::is_same_v<T, Shift<S>>) {
                std::vector<S> q = probs;
                const S pair = weights[act.subject] + weights[act.toward];
                const S mass = probs[act.subject] + probs[act.toward];
                S nj = weights[act.subject] + act.amount * pair;
                S nk = weights[act.toward] - act.amount * pair;
                if (nj < S(0)) nj = S(0);
                if (nk < S(0)) nk = S(0);
                if (pair > S(0)) {
                    q[act.subject] = mass * nj / pair;
                    q[act.toward] = mass * nk / pair;
                }
                return q;
            } else {
                return probs;  // extract and lower leave the mixture untouched
            }
        },
        action);
}

// ---------------------------------------------------------------------------
// the spec-level single-step operation

template <class S>
struct ExtractStepResult {
    S eta_hit;
    std::optional<DiagonalState<S>> state_hit;
    S factor_hit;
    S eta_miss;
    std::optional<DiagonalState<S>> state_miss;
    S z_next;
};

// Work extraction on the level prefix of cumulative weight `a` (current level
// order). `w` empty means the raise-to-infinity limit.
template <class S>
ExtractStepResult<S> extract_step(const DiagonalState<S>& rho, const S& a,
                                  const std::optional<S>& w) {
    const auto& lv = rho.levels();
    S acc(0);
    std::optional<size_t> count;
    if (a == S(0)) count = 0;
    for (size_t i = 0; i < lv.size() && !count; ++i) {
        acc += lv[i].weight;
        if (num<S>::eq(acc, a)) count = i + 1;
        if (acc > a) break;
    }
    if (!count || *count == 0) throw precondition_error("extract_step: a is not on a level boundary");
    std::vector<int> levels(*count);
    for (size_t i = 0; i < *count; ++i) levels[i] = static_cast<int>(i);

    Strategy<S> one;
    Extract<S> act;
    act.levels = levels;
    if (w) {
        act.factor = *w;
    } else {
        act.to_infinity = true;
    }
    one.actions.push_back(act);
    auto res = enumerate_paths(rho, one, false);

    ExtractStepResult<S> out;
    out.z_next = res.final_z;
    out.eta_hit = S(0);
    out.eta_miss = S(0);
    out.factor_hit = w ? *w : S(0);
    for (const auto& p : res.paths) {
        if (!p.branches.empty() && p.branches[0] == 1) {
            out.eta_hit = p.probability;
            out.state_hit = res.final_state(p);
        } else {
            out.eta_miss = p.probability;
            out.state_miss = res.final_state(p);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// success statistics and the bound audit

template <class S>
struct SuccessStats {
    S p_success{0};
    std::optional<DiagonalState<S>> mixture;  // success-conditioned final state
    std::optional<StepFunction<S>> q;         // its Gibbs rescaling
};

template <class S>
SuccessStats<S> success_stats(const EnumerationResult<S>& result, const S& w_target) {
    if (!(w_target > S(0))) throw precondition_error("success_stats: target factor must be positive");
    SuccessStats<S> out;
    std::vector<S> mix(result.final_weights.size(), S(0));
    for (const auto& p : result.paths) {
        if (p.failed_infinite() || p.work_factor < w_target) continue;
        out.p_success += p.probability;
        for (size_t i = 0; i < mix.size(); ++i) mix[i] += p.probability * p.probs[i];
    }
    if (out.p_success == S(0)) return out;
    for (auto& m : mix) {
        m /= out.p_success;
        if (m < S(0)) m = S(0);  // float fuzz
    }
    out.mixture = DiagonalState<S>::from_weights(result.final_weights, std::move(mix));
    out.q = gibbs_rescale(*out.mixture);
    return out;
}

template <class S>
struct AuditReport {
    S p_success{0};
    bool vacuous = false;  // no successful path
    S min_slack{0};        // min_l of F_p(l) - P_S G_q(l w)
    S binding_l{0};
    bool holds = false;
    S m_cap{0};  // relative mixedness of (p, q) at eps = 1 - P_S
    bool target_within_cap = false;
};

// Machine check of the upper-bound inequality: the initial Lorenz curve must
// dominate P_S times the stretched success curve at every breakpoint.
template <class S>
AuditReport<S> audit_bound(const DiagonalState<S>& rho, const Strategy<S>& strategy,
                           const S& w_target) {
    const auto result = enumerate_paths(rho, strategy);
    const auto stats = success_stats(result, w_target);
    AuditReport<S> rep;
    rep.p_success = stats.p_success;
    if (stats.p_success == S(0)) {
        rep.vacuous = true;
        return rep;
    }
    const auto p = gibbs_rescale(rho);
    const auto& q = *stats.q;

    std::vector<S> ls;
    for (const S& x : p.breakpoints()) ls.push_back(x);
    for (const S& x : q.breakpoints()) ls.push_back(x / w_target);
    ls.push_back(std::max(p.support(), q.support() / w_target));
    std::sort(ls.begin(), ls.end());
    ls.erase(std::unique(ls.begin(), ls.end()), ls.end());

    std::optional<S> min_slack;
    for (const S& l : ls) {
        if (!(l > S(0))) continue;
        const S lhs = p.cumulative(std::min(l, p.support()));
        const S rhs = stats.p_success * q.cumulative(std::min(l * w_target, q.support()));
        const S slack = lhs - rhs;
        if (!min_slack || slack < *min_slack) {
            min_slack = slack;
            rep.binding_l = l;
        }
    }
    rep.min_slack = *min_slack;
    rep.holds = num<S>::ge(rep.min_slack, S(0));
    rep.m_cap = relative_mixedness(p, q, S(1) - stats.p_success).m;
    rep.target_within_cap = num<S>::ge(rep.m_cap, w_target);
    return rep;
}

// ---------------------------------------------------------------------------
// seeded single-shot realizations

struct Ledger {
    double dE_sys = 0;
    double dE_bath = 0;
    double dW = 0;
    double dE_extra = 0;
};

template <class S>
struct Realization {
    int initial_level = -1;
    std::vector<int> level_history;
    S work_factor{1};
    double log_work = 0;  // ln of the factor, -inf when trapped
    bool success = false;
    Ledger ledger;
};

template <class S>
Realization<S> sample_realization(const DiagonalState<S>& rho, const Strategy<S>& strategy,
                                  uint64_t seed) {
    Xoshiro256 rng(seed);
    std::vector<S> weights = rho.weights();
    const auto probs = rho.probs();

    Realization<S> out;
    int cur = static_cast<int>(rng.discrete(probs));
    out.initial_level = cur;

    const double inf = std::numeric_limits<double>::infinity();
    auto energy = [&](int i) {
        return weights[i] == S(0) ? inf : -log_nats(weights[i]);
    };
    double reservoir = 0;

    for (const auto& action : strategy.actions) {
        std::visit(
            [&](const auto& act) {
                using T = std::decay_t<decltype(act)>;
                if constexpr (std::is_same_v<T, Thermalize<S>>) {
                    validate_thermalize(act.matrix, weights);
                    std::vector<S> col(weights.size());
                    for (size_t i = 0; i < weights.size(); ++i) col[i] = act.matrix[i][cur];
                    const double e0 = energy(cur);
                    cur = static_cast<int>(rng.discrete(col));
                    const double de = energy(cur) - e0;
                    out.ledger.dE_sys += de;
                    out.ledger.dE_bath -= de;
                } else if constexpr (std::is_same_v<T, Permute>) {
                    std::vector<S> w(weights.size());
                    int next = cur;
                    for (size_t i = 0; i < act.perm.size(); ++i) {
                        w[i] = weights[act.perm[i]];
                        if (act.perm[i] == cur) next = static_cast<int>(i);
                    }
                    weights = std::move(w);
                    cur = next;
                } else if constexpr (std::is_same_v<T, Extract<S>>) {
                    bool in = false;
                    for (int l : act.levels) in = in || l == cur;
                    const double e0 = energy(cur);
                    for (int l : act.levels)
                        weights[l] = act.to_infinity ? S(0) : weights[l] * act.factor;
                    if (in) {
                        const double de = energy(cur) - e0;
                        out.ledger.dE_sys += de;
                        reservoir -= de;
                        out.work_factor =
                            act.to_infinity ? S(0) : out.work_factor * act.factor;
                    }
                } else if constexpr (std::is_same_v<T, LowerFromInfinity<S>>) {
                    for (size_t t = 0; t < act.levels.size(); ++t) {
                        if (act.levels[t] == cur)
                            throw precondition_error("lower: occupied level");
                        weights[act.levels[t]] = act.weights[t];
                    }
                } else if constexpr (std::is_same_v<T, Shift<S>>) {
                    const S pair = weights[act.subject] + weights[act.toward];
                    const S nj = weights[act.subject] + act.amount * pair;
                    const S nk = weights[act.toward] - act.amount * pair;
                    const bool in = cur == act.subject || cur == act.toward;
                    const double e0 = in ? energy(cur) : 0;
                    weights[act.subject] = nj;
                    weights[act.toward] = nk;
                    if (in) {
                        cur = (nj + nk) > S(0) && rng.uniform() * to_double(nj + nk) < to_double(nj)
                                  ? act.subject
                                  : act.toward;
                        const double de = energy(cur) - e0;
                        out.ledger.dE_sys += de;
                        out.ledger.dE_bath -= de;
                    }
                }
            },
            action);
        out.level_history.push_back(cur);
    }

    out.log_work = out.work_factor == S(0) ? -inf : log_nats(out.work_factor);
    out.success = !(out.work_factor == S(0)) && num<S>::ge(out.work_factor, strategy.target_logwork);
    reservoir = out.log_work == -inf ? -inf : reservoir;
    if (out.success) {
        out.ledger.dW = log_nats(strategy.target_logwork);
        out.ledger.dE_extra = reservoir - out.ledger.dW;
    } else {
        out.ledger.dW = 0;
        out.ledger.dE_extra = reservoir;
    }
    return out;
}

struct RunRecord {
    double log_work;
    bool success;
    int final_level;
};

template <class S>
std::vector<RunRecord> simulate_many(const DiagonalState<S>& rho, const Strategy<S>& strategy,
                                     size_t runs, uint64_t base_seed, unsigned threads = 1) {
    std::vector<RunRecord> records(runs);
    if (threads == 0) threads = 1;
    threads = static_cast<unsigned>(std::min<size_t>(threads, std::max<size_t>(runs, 1)));
    auto worker = [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            Xoshiro256 stream = Xoshiro256::stream(base_seed, i);
            auto r = sample_realization(rho, strategy, stream.next());
            records[i] = {r.log_work, r.success,
                          r.level_history.empty() ? r.initial_level : r.level_history.back()};
        }
    };
    if (threads == 1) {
        worker(0, runs);
    } else {
        std::vector<std::thread> pool;
        const size_t chunk = (runs + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            const size_t b = t * chunk;
            const size_t e = std::min(runs, b + chunk);
            if (b < e) pool.emplace_back(worker, b, e);
        }
        for (auto& th : pool) th.join();
    }
    return records;
}

}  // namespace sst
