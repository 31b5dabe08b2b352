#pragma once

#include "sst/game.hpp"
#include "sst/rng.hpp"
#include "sst/states.hpp"

namespace sst::testing {

// Deterministic generator for random rational fixtures.
struct Gen {
    Xoshiro256 rng;

    explicit Gen(uint64_t seed) : rng(seed) {}

    long pick(long lo, long hi) {  // inclusive bounds
        return lo + static_cast<long>(rng.next() % static_cast<uint64_t>(hi - lo + 1));
    }

    Rat rat(long num_max, long den_max) { return Rat(pick(1, num_max), pick(1, den_max)); }

    // random distribution over n slots, exact, all entries positive
    std::vector<Rat> simplex(size_t n) {
        std::vector<Rat> v(n);
        Rat total(0);
        for (auto& x : v) {
            x = Rat(pick(1, 12), 1);
            total += x;
        }
        for (auto& x : v) x /= total;
        return v;
    }

    // random state; optionally with zero-probability and zero-weight levels
    DiagonalState<Rat> state(int max_levels, bool allow_empty = true) {
        const int n = static_cast<int>(pick(2, max_levels));
        std::vector<Rat> w(n), p(n);
        Rat total(0);
        for (int i = 0; i < n; ++i) {
            const bool empty_weight = allow_empty && pick(0, 9) == 0;
            w[i] = empty_weight ? Rat(0) : rat(6, 6);
            const bool empty_prob = empty_weight || (allow_empty && pick(0, 9) == 0);
            p[i] = empty_prob ? Rat(0) : Rat(pick(1, 12), 1);
            total += p[i];
        }
        if (total == 0) {
            w[0] = Rat(1);
            p[0] = Rat(1);
            total = Rat(1);
        }
        bool any_weight = false;
        for (const auto& x : w) any_weight = any_weight || x > 0;
        if (!any_weight) w[0] = Rat(1);
        for (auto& x : p) x /= total;
        // probability may not sit on zero weight
        for (int i = 0; i < n; ++i)
            if (w[i] == 0 && p[i] != 0) w[i] = rat(6, 6);
        return DiagonalState<Rat>::from_weights(std::move(w), std::move(p));
    }

    // Gibbs-fixing stochastic matrix: product of random partial two-level
    // thermalizations toward the pair Gibbs ratio
    Matrix<Rat> gibbs_fixing(const std::vector<Rat>& weights, int rounds) {
        const size_t n = weights.size();
        Matrix<Rat> b(n, std::vector<Rat>(n, Rat(0)));
        for (size_t i = 0; i < n; ++i) b[i][i] = Rat(1);
        for (int r = 0; r < rounds; ++r) {
            size_t i = static_cast<size_t>(pick(0, static_cast<long>(n) - 1));
            size_t j = static_cast<size_t>(pick(0, static_cast<long>(n) - 1));
            if (i == j) continue;
            const Rat pair = weights[i] + weights[j];
            if (pair == 0) continue;
            const Rat gi = weights[i] / pair;
            const Rat gj = weights[j] / pair;
            const Rat t = Rat(pick(0, 8), 8);
            Matrix<Rat> step(n, std::vector<Rat>(n, Rat(0)));
            for (size_t k = 0; k < n; ++k) step[k][k] = Rat(1);
            step[i][i] = Rat(1) - t * (Rat(1) - gi);
            step[i][j] = t * gi;
            step[j][i] = t * gj;
            step[j][j] = Rat(1) - t * (Rat(1) - gj);
            // b = step * b
            Matrix<Rat> out(n, std::vector<Rat>(n, Rat(0)));
            for (size_t a = 0; a < n; ++a)
                for (size_t c = 0; c < n; ++c) {
                    if (b[a][c] == 0 && a != i && a != j) continue;
                    for (size_t k = 0; k < n; ++k)
                        if (step[a][k] != 0 && b[k][c] != 0) out[a][c] += step[a][k] * b[k][c];
                }
            b = std::move(out);
        }
        return b;
    }

    // random column-stochastic matrix on d levels
    Matrix<Rat> stochastic(size_t d) {
        Matrix<Rat> b(d, std::vector<Rat>(d, Rat(0)));
        for (size_t j = 0; j < d; ++j) {
            Rat total(0);
            std::vector<Rat> col(d);
            for (size_t i = 0; i < d; ++i) {
                col[i] = Rat(pick(0, 6), 1);
                total += col[i];
            }
            if (total == 0) {
                col[j] = Rat(1);
                total = Rat(1);
            }
            for (size_t i = 0; i < d; ++i) b[i][j] = col[i] / total;
        }
        return b;
    }
};

inline bool is_bistochastic(const Matrix<Rat>& b) {
    for (const auto& row : b) {
        Rat sum(0);
        for (const auto& e : row) sum += e;
        if (sum != 1) return false;
    }
    return true;
}

// Brute-force feasibility oracle for the relative mixedness: checks the
// defining inequality F(l)/(1-eps) >= G(l m) at the breakpoints of both
// piecewise-linear sides, which is exact. Independent of the critical-set
// construction inside relative_mixedness.
inline bool mix_feasible(const StepFunction<Rat>& f, const StepFunction<Rat>& g, const Rat& eps,
                         const Rat& m) {
    if (m <= 0) return true;
    std::vector<Rat> ls;
    for (const auto& x : f.breakpoints()) ls.push_back(x);
    for (const auto& x : g.breakpoints()) ls.push_back(x / m);
    ls.push_back(std::max(f.support(), g.support() / m) + 1);
    const Rat one_minus = Rat(1) - eps;
    for (const auto& l : ls) {
        const Rat lhs = f.cumulative(std::min(l, f.support())) / one_minus;
        const Rat rhs = g.cumulative(std::min(l * m, g.support()));
        if (lhs < rhs) return false;
    }
    return true;
}

// Random mixes of thermalizations, permutations and extractions; raises are
// rare and never total. Matrices are built against the evolving weights so
// every action validates.
inline Strategy<Rat> random_strategy(Gen& gen, const DiagonalState<Rat>& rho, int max_extracts) {
    Strategy<Rat> s;
    std::vector<Rat> w = rho.weights();
    const size_t n = w.size();
    const long n_actions = gen.pick(1, 2 * max_extracts + 2);
    int extracts = 0;
    for (long a = 0; a < n_actions; ++a) {
        const long kind = gen.pick(0, 5);
        if (kind <= 1) {
            s.actions.push_back(Thermalize<Rat>{gen.gibbs_fixing(w, static_cast<int>(gen.pick(1, 4)))});
        } else if (kind == 2) {
            std::vector<int> perm(n);
            for (size_t i = 0; i < n; ++i) perm[i] = static_cast<int>(i);
            for (size_t i = n; i > 1; --i)
                std::swap(perm[i - 1], perm[gen.pick(0, static_cast<long>(i) - 1)]);
            std::vector<Rat> nw(n);
            for (size_t i = 0; i < n; ++i) nw[i] = w[perm[i]];
            w = std::move(nw);
            s.actions.push_back(Permute{std::move(perm)});
        } else {
            if (extracts >= max_extracts) continue;
            ++extracts;
            std::vector<int> levels;
            for (size_t i = 0; i < n; ++i)
                if (gen.pick(0, 1) == 0) levels.push_back(static_cast<int>(i));
            if (levels.empty()) levels.push_back(static_cast<int>(gen.pick(0, static_cast<long>(n) - 1)));
            Extract<Rat> e;
            e.levels = levels;
            if (gen.pick(0, 5) == 0 && levels.size() < n) {
                e.to_infinity = true;
                for (int l : levels) w[l] = Rat(0);
            } else {
                e.factor = gen.rat(3, 3);
                for (int l : levels) w[l] *= e.factor;
            }
            s.actions.push_back(std::move(e));
        }
    }
    return s;
}

inline StepFunction<Rat> appendix_p() {
    return make_step_function<Rat>({{Rat(1, 3), Rat(2)}, {Rat(1, 3), Rat(1)}, {Rat(1, 3), Rat(0)}});
}
inline StepFunction<Rat> appendix_q() {
    return make_step_function<Rat>({{Rat(1, 6), Rat(3)}, {Rat(1, 3), Rat(3, 2)}});
}
inline DiagonalState<Rat> appendix_rho() {
    return DiagonalState<Rat>::from_weights({Rat(1, 3), Rat(1, 3), Rat(1, 3)},
                                            {Rat(2, 3), Rat(1, 3), Rat(0)});
}
inline DiagonalState<Rat> appendix_sigma() {
    return DiagonalState<Rat>::from_weights({Rat(1, 6), Rat(1, 3), Rat(0)},
                                            {Rat(1, 2), Rat(1, 2), Rat(0)});
}

}  // namespace sst::testing
