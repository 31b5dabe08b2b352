#pragma once

#include <deque>

#include "sst/game.hpp"
#include "sst/workcalc.hpp"

namespace sst {

template <class S>
struct ShiftSpec {
    int subject;
    int toward;
    S amount;  // in units of the pair weight; the subject gains amount * (A_j + A_k)
};

template <class S>
struct ShiftOutcome {
    S p_pair{0};
    std::optional<DiagonalState<S>> pair_state;
    S p_rest{0};
    std::optional<DiagonalState<S>> rest_state;
    std::vector<S> new_weights;
    // the work is exactly zero on both branches
};

// Analytic (infinite-round) isothermal shift of the boundary between two
// levels of equal rescaled height. Weight moves between the pair, their sum
// is conserved, and no work is exchanged on either branch.
template <class S>
ShiftOutcome<S> isothermal_shift(const DiagonalState<S>& rho, const ShiftSpec<S>& spec) {
    Strategy<S> one;
    one.actions.push_back(Shift<S>{spec.subject, spec.toward, spec.amount});
    const auto res = enumerate_paths(rho, one, false);
    ShiftOutcome<S> out;
    out.new_weights = res.final_weights;
    for (const auto& p : res.paths) {
        if (!p.branches.empty() && p.branches[0] == 1) {
            out.p_pair = p.probability;
            out.pair_state = res.final_state(p);
        } else {
            out.p_rest = p.probability;
            out.rest_state = res.final_state(p);
        }
    }
    return out;
}

template <class S>
struct FiniteShiftPath {
    S probability;  // joint probability of the round-by-round hit sequence
    S work_factor;  // product of the per-round extraction factors
};

template <class S>
struct FiniteShiftResult {
    S p_rest{0};  // probability of never entering the pair
    std::vector<FiniteShiftPath<S>> pair_paths;

    // E[w_tot]; paths outside the pair carry factor 1
    S expected_factor() const {
        S acc = p_rest;
        for (const auto& p : pair_paths) acc += p.probability * p.work_factor;
        return acc;
    }
};

namespace detail {

// per-round pair occupations alpha_j(l) after l rounds of the n-round shuttle
template <class S>
struct ShuttleSchedule {
    S alpha_j0, step;  // alpha_j(l) = alpha_j0 + l * step
    S alpha_j(long l) const { return alpha_j0 + S(l) * step; }
    S alpha_k(long l) const { return S(1) - alpha_j(l); }
};

template <class S>
ShuttleSchedule<S> shuttle_schedule(const DiagonalState<S>& rho, const ShiftSpec<S>& spec,
                                    long n) {
    const auto& lv = rho.levels();
    const S aj = lv.at(spec.subject).weight;
    const S ak = lv.at(spec.toward).weight;
    const S pair = aj + ak;
    if (!(pair > S(0))) throw precondition_error("isothermal shift: empty pair");
    if (!num<S>::is_zero(lv[spec.subject].prob) && !num<S>::is_zero(lv[spec.toward].prob)) {
        if (!num<S>::eq(lv[spec.subject].prob * ak, lv[spec.toward].prob * aj))
            throw precondition_error("isothermal shift: unequal rescaled heights");
    }
    const S nj = aj + spec.amount * pair;
    const S nk = ak - spec.amount * pair;
    if (nj < S(0) || nk < S(0)) throw precondition_error("isothermal shift: amount out of range");
    return {aj / pair, spec.amount / S(n)};
}

}  // namespace detail

// Exact enumeration of the n-round finite shuttle behind the isothermal
// shift: per round, a small extraction on each side of the pair followed by a
// full mix of the pair. 2^n hit sequences.
template <class S>
FiniteShiftResult<S> finite_shift_enumerate(const DiagonalState<S>& rho, const ShiftSpec<S>& spec,
                                            long n) {
    if (n < 1) throw precondition_error("finite shift: n must be >= 1");
    if (n > 16) throw cap_exceeded("finite shift: exact enumeration capped at n = 16");
    const auto sched = detail::shuttle_schedule(rho, spec, n);
    const auto& lv = rho.levels();
    const S mass = lv[spec.subject].prob + lv[spec.toward].prob;

    FiniteShiftResult<S> out;
    out.p_rest = S(1) - mass;
    if (mass == S(0)) return out;

    // iterative product over rounds: state = (prob, factor) pairs
    std::vector<FiniteShiftPath<S>> acc{{mass, S(1)}};
    for (long l = 1; l <= n; ++l) {
        const S pj_prev = sched.alpha_j(l - 1), pj_now = sched.alpha_j(l);
        const S pk_prev = sched.alpha_k(l - 1), pk_now = sched.alpha_k(l);
        std::vector<FiniteShiftPath<S>> next;
        next.reserve(acc.size() * 2);
        for (const auto& path : acc) {
            if (!(pj_prev == S(0)))
                next.push_back({path.probability * pj_prev, path.work_factor * (pj_now / pj_prev)});
            if (!(pk_prev == S(0)))
                next.push_back({path.probability * pk_prev, path.work_factor * (pk_now / pk_prev)});
        }
        // merge identical factors to keep the list small
        std::sort(next.begin(), next.end(), [](const auto& a, const auto& b) {
            return a.work_factor < b.work_factor;
        });
        acc.clear();
        for (auto& p : next) {
            if (!acc.empty() && acc.back().work_factor == p.work_factor)
                acc.back().probability += p.probability;
            else
                acc.push_back(p);
        }
    }
    out.pair_paths = std::move(acc);
    return out;
}

// One sampled run of the finite shuttle; returns ln of the total factor.
template <class S>
double finite_shift_sample(const DiagonalState<S>& rho, const ShiftSpec<S>& spec, long n,
                           Xoshiro256& rng) {
    const auto sched = detail::shuttle_schedule(rho, spec, n);
    const auto& lv = rho.levels();
    const double mass = to_double(lv[spec.subject].prob + lv[spec.toward].prob);
    if (rng.uniform() >= mass) return 0.0;  // never enters the pair
    const double a0 = to_double(sched.alpha_j0);
    const double da = to_double(sched.step);
    double logw = 0;
    for (long l = 1; l <= n; ++l) {
        const double pj_prev = a0 + static_cast<double>(l - 1) * da;
        const double pj_now = a0 + static_cast<double>(l) * da;
        if (rng.uniform() < pj_prev)
            logw += std::log(pj_now) - std::log(pj_prev);
        else
            logw += std::log(1 - pj_now) - std::log(1 - pj_prev);
    }
    return logw;
}

// Sum of the first c entries, fractional counts weighting the boundary entry;
// zero below one.
template <class S>
S generalized_sum(const std::vector<S>& values, const S& c) {
    if (c < S(0)) throw precondition_error("generalized_sum: negative count");
    if (c > S(static_cast<long long>(values.size())))
        throw precondition_error("generalized_sum: count beyond list length");
    if (c < S(1)) return S(0);
    S acc(0);
    long long whole = 0;
    while (S(whole + 1) <= c) ++whole;  // floor(c)
    for (long long i = 0; i < whole; ++i) acc += values[i];
    const S frac = c - S(whole);
    if (frac > S(0)) acc += frac * values[whole];
    return acc;
}

template <class S>
struct AssimilationPlan {
    std::vector<S> a;  // fractional source-block indices, one per target block
    std::vector<S> b;
};

// The index sequences of the assimilation lemma, solved in closed form block
// by block: b_k inverts the source mass at the target prefix mass, a_k is the
// first index at or beyond max(a_{k-1}, b_k) where the drained-source ratio
// equals the k-th target height.
template <class S>
AssimilationPlan<S> assimilation_indices(const StepFunction<S>& p, const StepFunction<S>& pf) {
    detail::require_unit_mass(p, "assimilation_indices(p)");
    detail::require_unit_mass(pf, "assimilation_indices(pf)");
    if (!num<S>::eq(p.support(), pf.support()))
        throw precondition_error("assimilation_indices: partition functions differ");
    if (!majorizes(p, pf))
        throw precondition_error("assimilation_indices: source does not majorize target");

    const auto& src = p.blocks();
    const auto& tgt = pf.blocks();
    const size_t n = src.size();
    const S n_index = S(static_cast<long long>(n));

    auto lam = [&](size_t i) { return src[i].width * src[i].height; };
    auto floor_of = [&](const S& c) {
        size_t f = 0;
        while (f < n && S(static_cast<long long>(f + 1)) <= c) ++f;
        return f;
    };
    auto gen_lambda = [&](const S& c) {
        const size_t f = floor_of(c);
        S acc(0);
        for (size_t i = 0; i < f; ++i) acc += lam(i);
        if (f < n) acc += (c - S(static_cast<long long>(f))) * lam(f);
        return acc;
    };
    auto gen_weight = [&](const S& c) {
        const size_t f = floor_of(c);
        S acc(0);
        for (size_t i = 0; i < f; ++i) acc += src[i].width;
        if (f < n) acc += (c - S(static_cast<long long>(f))) * src[f].width;
        return acc;
    };

    AssimilationPlan<S> plan;
    S prev_a(0), prev_b(0);
    S mass_prefix(0);    // F_k while handling target block k
    S weight_prefix(0);  // G_{k-1}
    for (size_t k = 0; k < tgt.size(); ++k) {
        const S lam_f = tgt[k].width * tgt[k].height;
        const S t = tgt[k].height;
        mass_prefix += lam_f;

        // b_k: left inverse of the source mass at the inclusive target prefix
        S b = prev_b;
        {
            S acc = gen_lambda(prev_b);
            size_t i = floor_of(prev_b);
            while (i < n && acc < mass_prefix) {
                const S lo = std::max(prev_b, S(static_cast<long long>(i)));
                const S cell_mass = lam(i) * (S(static_cast<long long>(i + 1)) - lo);
                if (acc + cell_mass >= mass_prefix && lam(i) > S(0)) {
                    b = lo + (mass_prefix - acc) / lam(i);
                    acc = mass_prefix;
                    break;
                }
                acc += cell_mass;
                b = S(static_cast<long long>(i + 1));
                ++i;
            }
            if (acc < mass_prefix)
                throw precondition_error("assimilation_indices: source mass exhausted early");
        }

        // a_k: first root of D(c) = genL(c) - F_{k-1} - t (genW(c) - G_{k-1})
        S a = n_index;
        if (t > S(0)) {
            const S F = mass_prefix - lam_f;
            const S start = std::max(prev_a, b);
            std::optional<S> found;
            S lo = start;
            for (size_t i = floor_of(start); i < n && !found;
                 ++i, lo = S(static_cast<long long>(i))) {
                const S hi = S(static_cast<long long>(i + 1));
                if (!(lo < hi)) continue;
                const S d_lo = gen_lambda(lo) - F - t * (gen_weight(lo) - weight_prefix);
                const S slope = lam(i) - t * src[i].width;
                const S d_hi = d_lo + slope * (hi - lo);
                if (d_lo == S(0)) {
                    found = lo;
                } else if (d_hi == S(0)) {
                    found = hi;
                } else if ((d_lo > S(0)) != (d_hi > S(0))) {
                    found = lo - d_lo / slope;
                }
            }
            if (!found) {
                const S d_end = gen_lambda(n_index) - F - t * (gen_weight(n_index) - weight_prefix);
                if (num<S>::eq(d_end, S(0)))
                    found = n_index;
                else
                    throw precondition_error("assimilation_indices: no index crossing found");
            }
            a = *found;
        }
        if (a < b) throw precondition_error("assimilation_indices: a_k < b_k");
        weight_prefix += tgt[k].width;
        plan.a.push_back(a);
        plan.b.push_back(b);
        prev_a = a;
        prev_b = b;
    }
    return plan;
}

namespace detail {

template <class S>
void evolve_weights(std::vector<S>& w, const Action<S>& action) {
    std::visit(
        [&](const auto& act) {
            using T = std::decay_t<decltype(act)>;
            if constexpr (std::is_same_v<T, Permute>) {
                std::vector<S> nw(w.size());
                for (size_t i = 0; i < act.perm.size(); ++i) nw[i] = w[act.perm[i]];
                w = std::move(nw);
            } else if constexpr (std::is_same_v<T, Extract<S>>) {
                for (int l : act.levels) w[l] = act.to_infinity ? S(0) : w[l] * act.factor;
            } else if constexpr (std::is_same_v<T, LowerFromInfinity<S>>) {
                for (size_t t = 0; t < act.levels.size(); ++t) w[act.levels[t]] = act.weights[t];
            } else if constexpr (std::is_same_v<T, Shift<S>>) {
                const S pair = w[act.subject] + w[act.toward];
                S nj = w[act.subject] + act.amount * pair;
                S nk = w[act.toward] - act.amount * pair;
                if (nj < S(0)) nj = S(0);
                if (nk < S(0)) nk = S(0);
                w[act.subject] = nj;
                w[act.toward] = nk;
            }
        },
        action);
}

// Tracks the deterministic weight evolution and the occupation mixture the
// plan is steering while actions are emitted.
template <class S>
struct Planner {
    std::vector<S> w;
    std::vector<S> mu;
    std::vector<Action<S>> actions;

    void emit(Action<S> a) {
        mu = unconditional_step(w, mu, a);
        evolve_weights(w, a);
        if constexpr (!num<S>::exact) {
            // keep float fuzz from masquerading as occupied levels
            for (auto& x : w)
                if (num<S>::is_zero(x)) x = S(0);
            for (auto& x : mu)
                if (num<S>::is_zero(x)) x = S(0);
        }
        actions.push_back(std::move(a));
    }

    // absorb-fraction shift: `subject` gains `portion` of `toward`'s weight
    void emit_absorb(int subject, int toward, const S& portion) {
        if (portion == S(0)) return;
        const S pair = w[subject] + w[toward];
        emit(Action<S>(Shift<S>{subject, toward, portion * w[toward] / pair}));
    }

    // Full decoherence over the positive-weight part of a level set:
    // Gibbs-fixing, leaves every path proportional to the weights there.
    // Equal heights in the mixture are not enough to skip this; individual
    // branches may still be skewed.
    void emit_mix(const std::vector<int>& set) {
        std::vector<int> live;
        for (int i : set)
            if (w[i] > S(0)) live.push_back(i);
        if (live.size() < 2) return;
        S total(0);
        for (int i : live) total += w[i];
        const size_t n = w.size();
        Matrix<S> b(n, std::vector<S>(n, S(0)));
        for (size_t i = 0; i < n; ++i) b[i][i] = S(1);
        for (int j : live) {
            b[j][j] = S(0);
            for (int i : live) b[i][j] = w[i] / total;
        }
        emit(Action<S>(Thermalize<S>{std::move(b)}));
    }
};

// Greedy realization of the assimilation: per target level, absorb the
// highest remaining content until its average height hits the target height
// exactly, equalize with one mix, and carve off the target weight into a
// fresh empty level. Every emitted action is zero-work. `empties` must be
// levels that are unoccupied on every path, not merely in the mixture.
template <class S>
std::vector<int> append_assimilation(Planner<S>& pl, const std::vector<S>& sigma_w,
                                     const std::vector<S>& sigma_mu, std::vector<int> empties) {
    const size_t n = pl.w.size();
    if (sigma_w.size() != n) throw precondition_error("assimilation: level count mismatch");

    S z_cur(0), z_f(0);
    for (const auto& x : pl.w) z_cur += x;
    for (const auto& x : sigma_w) z_f += x;
    if (z_cur > z_f && !num<S>::eq(z_cur, z_f))
        throw precondition_error("assimilation: current partition function exceeds target");

    std::erase_if(empties, [&](int i) { return !(pl.w[i] == S(0)) || !num<S>::is_zero(pl.mu[i]); });
    size_t next_empty = 0;

    if (z_cur < z_f) {
        if (empties.empty()) throw precondition_error("assimilation: no empty level for the Z fix");
        const int zfix = empties[next_empty++];
        pl.emit(Action<S>(LowerFromInfinity<S>{{zfix}, {z_f - z_cur}}));
    }

    // target levels in descending rescaled height, positive weights only
    std::vector<int> targets;
    for (size_t i = 0; i < n; ++i)
        if (sigma_w[i] > S(0)) targets.push_back(static_cast<int>(i));
    std::stable_sort(targets.begin(), targets.end(), [&](int x, int y) {
        return sigma_mu[x] * sigma_w[y] > sigma_mu[y] * sigma_w[x];
    });
    if (empties.size() - next_empty < targets.size())
        throw precondition_error("assimilation: not enough empty levels to carve into");

    // current positive-weight levels, descending height
    std::deque<int> pool;
    {
        std::vector<int> order;
        for (size_t i = 0; i < n; ++i)
            if (pl.w[i] > S(0)) order.push_back(static_cast<int>(i));
        std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
            return pl.mu[x] * pl.w[y] > pl.mu[y] * pl.w[x];
        });
        pool.assign(order.begin(), order.end());
    }

    std::vector<int> holder(n, -1);  // sigma position -> carve level
    for (int s : targets) {
        const S target_w = sigma_w[s];
        const S target_mu = sigma_mu[s];
        const int e = empties[next_empty++];
        holder[s] = e;

        std::vector<int> workspace;
        S sum_mu(0), sum_w(0);
        if (target_mu > S(0)) {
            // absorb whole levels while the average height stays at or above
            // the target height (the running average is nonincreasing)
            while (!pool.empty()) {
                const int L = pool.front();
                if (sum_mu + pl.mu[L] >= (sum_w + pl.w[L]) * target_mu / target_w) {
                    workspace.push_back(L);
                    sum_mu += pl.mu[L];
                    sum_w += pl.w[L];
                    pool.pop_front();
                } else {
                    break;
                }
            }
            const S t = target_mu / target_w;
            if (sum_mu != t * sum_w) {
                // fractional top-up from the next level, via the empty carve target
                if (pool.empty())
                    throw precondition_error("assimilation: source does not majorize target");
                const int L = pool.front();
                const S x = (t * sum_w - sum_mu) / (pl.mu[L] - t * pl.w[L]);
                pl.emit_absorb(e, L, x);
                if (pl.w[L] == S(0)) pool.pop_front();
            }
            std::vector<int> mix_set = workspace;
            if (pl.w[e] > S(0)) mix_set.push_back(e);
            pl.emit_mix(mix_set);
        }

        // carve: grow e until it holds exactly the target weight; each absorb
        // is preceded by a pair mix so every branch sits at equal heights on
        // the pair (zero-mass targets carry no probability anywhere, so their
        // carving needs no mixing)
        size_t wi = 0;
        while (!num<S>::eq(pl.w[e], target_w)) {
            int M = -1;
            if (wi < workspace.size()) {
                M = workspace[wi];
            } else if (target_mu == S(0) && !pool.empty()) {
                M = pool.front();
                if (!num<S>::is_zero(pl.mu[M]))
                    throw precondition_error("assimilation: probability left for a zero-mass target");
            } else {
                throw precondition_error("assimilation: ran out of content while carving");
            }
            if (target_mu > S(0)) pl.emit_mix({e, M});
            const S room = target_w - pl.w[e];
            if (pl.w[M] <= room) {
                pl.emit_absorb(e, M, S(1));
                if (wi < workspace.size()) ++wi; else pool.pop_front();
            } else {
                pl.emit_absorb(e, M, room / pl.w[M]);
            }
        }
        // leftovers keep the equalized height; they stay at the front
        std::vector<int> keep;
        for (size_t t2 = wi; t2 < workspace.size(); ++t2)
            if (pl.w[workspace[t2]] > S(0)) keep.push_back(workspace[t2]);
        for (auto it = keep.rbegin(); it != keep.rend(); ++it) pool.push_front(*it);
    }

    for (size_t i = 0; i < n; ++i) {
        const bool is_holder =
            std::find(holder.begin(), holder.end(), static_cast<int>(i)) != holder.end();
        if (!is_holder && (!num<S>::is_zero(pl.mu[i]) || !num<S>::is_zero(pl.w[i])))
            throw precondition_error("assimilation: content left outside the carve levels");
    }

    // final permutation: each sigma position takes its carve level
    std::vector<int> perm(n, -1);
    std::vector<bool> used(n, false);
    for (size_t i = 0; i < n; ++i)
        if (holder[i] >= 0) {
            perm[i] = holder[i];
            used[holder[i]] = true;
        }
    size_t probe = 0;
    for (size_t i = 0; i < n; ++i) {
        if (perm[i] >= 0) continue;
        while (used[probe]) ++probe;
        perm[i] = static_cast<int>(probe);
        used[probe] = true;
    }
    pl.emit(Action<S>(Permute{std::move(perm)}));
    return holder;
}

template <class S>
bool vectors_equal(const std::vector<S>& a, const std::vector<S>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (!num<S>::eq(a[i], b[i])) return false;
    return true;
}

}  // namespace detail

template <class S>
struct AssimilateRun {
    Strategy<S> strategy;
    DiagonalState<S> rho_padded;
    DiagonalState<S> sigma_padded;
    EnumerationResult<S> result;
    bool final_match = false;  // mixture and weights equal the padded target
    bool work_zero = false;    // every branch carries factor exactly 1
};

// Zero-work conversion of rho into sigma whenever the rescaled source
// majorizes the rescaled target. Both states are padded with enough
// infinite-energy levels for the carve targets and the Z fix.
template <class S>
AssimilateRun<S> assimilate(const DiagonalState<S>& rho, const DiagonalState<S>& sigma) {
    if (!majorizes(gibbs_rescale(rho), gibbs_rescale(sigma)))
        throw precondition_error("assimilate: source does not majorize target");
    if (rho.z() > sigma.z() && !num<S>::eq(rho.z(), sigma.z()))
        throw precondition_error("assimilate: source partition function exceeds target");

    size_t targets = 0;
    for (const auto& lv : sigma.levels())
        if (lv.weight > S(0)) ++targets;
    const size_t base = std::max(rho.size(), sigma.size());
    const size_t L = base + targets + 1;

    auto pad = [&](const DiagonalState<S>& st) {
        auto w = st.weights();
        auto p = st.probs();
        w.resize(L, S(0));
        p.resize(L, S(0));
        return std::make_pair(std::move(w), std::move(p));
    };
    auto [rw, rp] = pad(rho);
    auto [sw, sp] = pad(sigma);

    AssimilateRun<S> run;
    run.rho_padded = DiagonalState<S>::from_weights(rw, rp);
    run.sigma_padded = DiagonalState<S>::from_weights(sw, sp);

    detail::Planner<S> pl{rw, rp, {}};
    if (!detail::vectors_equal(rw, sw) || !detail::vectors_equal(rp, sp)) {
        // with no branching beforehand, mixture-empty levels are path-empty
        std::vector<int> empties;
        for (size_t i = 0; i < L; ++i)
            if (rw[i] == S(0) && num<S>::is_zero(rp[i])) empties.push_back(static_cast<int>(i));
        detail::append_assimilation(pl, sw, sp, std::move(empties));
    }
    run.strategy.actions = pl.actions;
    run.strategy.target_logwork = S(1);

    run.result = enumerate_paths(run.rho_padded, run.strategy);
    run.work_zero = true;
    for (const auto& p : run.result.paths)
        run.work_zero = run.work_zero && p.work_factor == S(1);
    const auto stats = success_stats(run.result, S(1));
    run.final_match = stats.mixture && num<S>::eq(stats.p_success, S(1)) &&
                      detail::vectors_equal(run.result.final_weights, sw) &&
                      detail::vectors_equal(stats.mixture->probs(), sp);
    return run;
}

template <class S>
struct ProtocolBuild {
    Strategy<S> strategy;
    DiagonalState<S> rho_padded;
    DiagonalState<S> sigma_padded;
    S m;      // the demanded factor, ln of which is the extracted work
    S d_eps;  // extent kept by the truncation
    S eps;
    size_t rho_levels = 0, sigma_levels = 0;  // real level counts
    size_t total_levels = 0;                  // after catalyst + empty padding
    size_t added_empties = 0;                 // explicit (0,0) levels appended
};

// The achievability construction: tensor a two-level catalyst in its ground
// eigenstate onto both endpoints, raise everything empty, shift the success
// boundary to probability exactly 1-eps, raise the tail, extract ln m on the
// survivors, assimilate into the padded target and permute home.
template <class S>
ProtocolBuild<S> extraction_protocol(const DiagonalState<S>& rho, const DiagonalState<S>& sigma,
                                     const S& eps) {
    if (eps < S(0) || eps >= S(1)) throw precondition_error("extraction_protocol: eps outside [0,1)");
    const size_t nr = rho.size(), ns = sigma.size();

    size_t sigma_pos = 0;
    for (const auto& lv : sigma.levels())
        if (lv.weight > S(0)) ++sigma_pos;
    const size_t L =
        std::max({2 * nr, 2 * ns, nr + 2 * sigma_pos + 2});

    // joint layout: positions [0,n) carry the state with the catalyst in its
    // occupied eigenstate, [n,2n) the empty catalyst copies, then padding
    auto pad_joint = [&](const DiagonalState<S>& st) {
        std::vector<S> w(L, S(0)), p(L, S(0));
        const auto& lv = st.levels();
        for (size_t i = 0; i < lv.size(); ++i) {
            w[i] = lv[i].weight;
            p[i] = lv[i].prob;
            w[lv.size() + i] = lv[i].weight;
        }
        return DiagonalState<S>::from_weights(std::move(w), std::move(p));
    };

    ProtocolBuild<S> build;
    build.rho_padded = pad_joint(rho);
    build.sigma_padded = pad_joint(sigma);
    build.eps = eps;
    build.rho_levels = nr;
    build.sigma_levels = ns;
    build.total_levels = L;
    build.added_empties = L - 2 * std::max(nr, ns);

    const auto p_res = gibbs_rescale(build.rho_padded);
    const auto q_res = gibbs_rescale(build.sigma_padded);
    const auto mix = relative_mixedness(p_res, q_res, eps);
    build.m = mix.m;
    build.d_eps = p_res.extent_reaching(std::min(S(1) - eps, p_res.total_mass()));

    detail::Planner<S> pl{build.rho_padded.weights(), build.rho_padded.probs(), {}};

    // levels that never hold probability on any path; the assimilation may
    // only park content on these
    std::vector<int> safe_empties;
    for (size_t i = 0; i < L; ++i)
        if (num<S>::is_zero(pl.mu[i])) safe_empties.push_back(static_cast<int>(i));

    // 1. raise every empty level to infinite energy
    std::vector<int> raise1;
    for (size_t i = 0; i < L; ++i)
        if (num<S>::is_zero(pl.mu[i]) && pl.w[i] > S(0)) raise1.push_back(static_cast<int>(i));
    if (!raise1.empty()) pl.emit(Action<S>(Extract<S>{raise1, S(1), true}));

    // 2. order the occupied levels by rescaled height and place the success
    // boundary at probability exactly 1-eps, splitting one level if needed
    std::vector<int> order;
    for (size_t i = 0; i < L; ++i)
        if (pl.w[i] > S(0)) order.push_back(static_cast<int>(i));
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
        return pl.mu[x] * pl.w[y] > pl.mu[y] * pl.w[x];
    });
    const S keep_mass = S(1) - eps;
    size_t k = 0;
    S cum(0);
    while (k < order.size() && cum + pl.mu[order[k]] < keep_mass) cum += pl.mu[order[k++]];
    if (k >= order.size()) throw precondition_error("extraction_protocol: probability exhausted");
    int vehicle = -1;
    if (!num<S>::eq(cum + pl.mu[order[k]], keep_mass)) {
        const S need = keep_mass - cum;
        const S phi = need / pl.mu[order[k]];
        if (safe_empties.empty())
            throw precondition_error("extraction_protocol: no empty level to split with");
        vehicle = safe_empties.front();
        safe_empties.erase(safe_empties.begin());  // it will hold probability now
        pl.emit_absorb(vehicle, order[k], S(1) - phi);
    }

    // 3. raise the eps tail
    std::vector<int> raise2;
    for (size_t i = k + 1; i < order.size(); ++i) raise2.push_back(order[i]);
    if (vehicle >= 0) raise2.push_back(vehicle);
    if (!raise2.empty()) {
        pl.emit(Action<S>(Extract<S>{raise2, S(1), true}));
        // steer the success branch from here on
        for (int i : raise2) pl.mu[i] = S(0);
        for (auto& m0 : pl.mu) m0 = m0 / keep_mass;
    }

    // 4. extract the work ln(m) on all surviving levels
    if (!num<S>::eq(build.m, S(1))) {
        std::vector<int> survivors;
        for (size_t i = 0; i < L; ++i)
            if (pl.w[i] > S(0)) survivors.push_back(static_cast<int>(i));
        pl.emit(Action<S>(Extract<S>{survivors, build.m, false}));
    }

    // 5 + 6. assimilate into the padded target and permute home
    detail::append_assimilation(pl, build.sigma_padded.weights(), build.sigma_padded.probs(),
                                std::move(safe_empties));

    build.strategy.actions = std::move(pl.actions);
    build.strategy.target_logwork = build.m;
    return build;
}

template <class S>
struct ProtocolOutcome {
    S p_success{0};
    S m{1};
    bool success_probability_exact = false;  // P_S equals 1-eps
    bool success_work_exact = false;         // every surviving path carries exactly m
    bool final_matches = false;              // success mixture equals the padded target
    bool catalyst_restored = false;
    std::optional<DiagonalState<S>> success_mixture;
};

template <class S>
ProtocolOutcome<S> run_protocol_exact(const ProtocolBuild<S>& build) {
    const auto result = enumerate_paths(build.rho_padded, build.strategy);
    const auto stats = success_stats(result, build.m);

    ProtocolOutcome<S> out;
    out.m = build.m;
    out.p_success = stats.p_success;
    out.success_probability_exact = num<S>::eq(stats.p_success, S(1) - build.eps);
    out.success_work_exact = true;
    for (const auto& p : result.paths)
        if (!p.failed_infinite())
            out.success_work_exact = out.success_work_exact && num<S>::eq(p.work_factor, build.m);
    if (stats.mixture) {
        out.success_mixture = stats.mixture;
        out.final_matches =
            detail::vectors_equal(result.final_weights, build.sigma_padded.weights()) &&
            detail::vectors_equal(stats.mixture->probs(), build.sigma_padded.probs());
        out.catalyst_restored = true;
        const auto& probs = stats.mixture->probs();
        for (size_t i = build.sigma_levels; i < 2 * build.sigma_levels && i < probs.size(); ++i)
            out.catalyst_restored = out.catalyst_restored && num<S>::is_zero(probs[i]);
    }
    return out;
}

}  // namespace sst
