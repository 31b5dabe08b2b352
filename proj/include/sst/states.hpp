#pragma once

#include <numeric>
#include <vector>

#include "sst/stepfn.hpp"

namespace sst {

template <class S>
struct Level {
    S weight;  // Gibbs weight A = exp(-E/kT); 0 encodes infinite energy
    S prob;    // occupation probability
    int label = -1;
};

// A classical state diagonal in the energy basis, stored canonically as
// (weight, probability) pairs. Weight 0 (infinite energy) forces
// probability 0.
template <class S>
class DiagonalState {
  public:
    DiagonalState() = default;

    static DiagonalState from_levels(std::vector<Level<S>> levels) {
        DiagonalState st;
        st.levels_ = std::move(levels);
        for (size_t i = 0; i < st.levels_.size(); ++i)
            if (st.levels_[i].label < 0) st.levels_[i].label = static_cast<int>(i);
        st.z_ = st.validate();
        return st;
    }

    static DiagonalState from_weights(std::vector<S> weights, std::vector<S> probs) {
        if (weights.size() != probs.size())
            throw validation_error("state: weights and probs must have equal length");
        std::vector<Level<S>> lv(weights.size());
        for (size_t i = 0; i < weights.size(); ++i)
            lv[i] = Level<S>{std::move(weights[i]), std::move(probs[i]), static_cast<int>(i)};
        return from_levels(std::move(lv));
    }

    const std::vector<Level<S>>& levels() const { return levels_; }
    size_t size() const { return levels_.size(); }
    const S& z() const { return z_; }

    std::vector<S> weights() const {
        std::vector<S> w(levels_.size());
        for (size_t i = 0; i < levels_.size(); ++i) w[i] = levels_[i].weight;
        return w;
    }
    std::vector<S> probs() const {
        std::vector<S> p(levels_.size());
        for (size_t i = 0; i < levels_.size(); ++i) p[i] = levels_[i].prob;
        return p;
    }

    bool same_weights(const DiagonalState& o) const {
        if (size() != o.size()) return false;
        for (size_t i = 0; i < size(); ++i)
            if (!num<S>::eq(levels_[i].weight, o.levels_[i].weight)) return false;
        return true;
    }

  private:
    S validate() const {
        S psum(0), zsum(0);
        for (const auto& lv : levels_) {
            if (lv.prob < S(0) && !num<S>::is_zero(lv.prob))
                throw validation_error("state: negative probability");
            if (lv.weight < S(0) && !num<S>::is_zero(lv.weight))
                throw validation_error("state: negative Gibbs weight");
            if (lv.weight == S(0) && !num<S>::is_zero(lv.prob))
                throw validation_error("state: infinite-energy level carries probability");
            psum += lv.prob;
            zsum += lv.weight;
        }
        if (!num<S>::eq(psum, S(1))) throw validation_error("state: probabilities must sum to 1");
        if (!(zsum > S(0))) throw validation_error("state: partition function must be positive");
        return zsum;
    }

    std::vector<Level<S>> levels_;
    S z_{0};
};

// Energy form; weights absorb the temperature, A = exp(-E/kT).
inline DiagonalState<double> state_from_energies(const std::vector<double>& energies,
                                                 std::vector<double> probs, double kT) {
    if (kT <= 0) throw validation_error("state: kT must be positive");
    std::vector<double> w(energies.size());
    for (size_t i = 0; i < energies.size(); ++i) w[i] = std::exp(-energies[i] / kT);
    return DiagonalState<double>::from_weights(std::move(w), std::move(probs));
}

// G^T: one block per level, width A_i, height lambda_i / A_i. Infinite-energy
// levels vanish (zero width).
template <class S>
StepFunction<S> gibbs_rescale(const DiagonalState<S>& rho) {
    std::vector<Block<S>> blocks;
    blocks.reserve(rho.size());
    for (const auto& lv : rho.levels()) {
        if (lv.weight == S(0)) continue;
        blocks.push_back({lv.weight, lv.prob / lv.weight});
    }
    return make_step_function(std::move(blocks));
}

template <class S>
DiagonalState<S> gibbs_state(const std::vector<S>& weights) {
    S z = std::accumulate(weights.begin(), weights.end(), S(0));
    if (!(z > S(0))) throw validation_error("gibbs_state: all weights zero");
    std::vector<S> probs(weights.size());
    for (size_t i = 0; i < weights.size(); ++i) probs[i] = weights[i] / z;
    return DiagonalState<S>::from_weights(weights, std::move(probs));
}

template <class S>
double shannon_entropy_bits(const DiagonalState<S>& rho) {
    double s = 0;
    for (const auto& lv : rho.levels()) {
        const double p = to_double(lv.prob);
        if (p > 0) s -= p * std::log2(p);
    }
    return s;
}

// <E> with E_i = -kT ln A_i; beta = 1/kT.
template <class S>
double expected_energy(const DiagonalState<S>& rho, double beta = 1.0) {
    if (beta <= 0) throw precondition_error("expected_energy: beta must be positive");
    double e = 0;
    for (const auto& lv : rho.levels()) {
        if (lv.weight == S(0)) {
            if (!num<S>::is_zero(lv.prob))
                throw precondition_error("expected_energy: probability on infinite energy");
            continue;
        }
        e += to_double(lv.prob) * (-log_nats(lv.weight) / beta);
    }
    return e;
}

template <class S>
struct SupportResult {
    S extent;     // support width (h_max) or d_eps (h_max_eps), exact
    double bits;  // log2 of the extent
};

template <class S>
SupportResult<S> h_max(const StepFunction<S>& f) {
    detail::require_unit_mass(f, "h_max");
    return {f.support(), log2_bits(f.support())};
}

// d_eps is the smallest extent holding mass 1-eps; its log is the smooth
// max-entropy of the descending function.
template <class S>
SupportResult<S> h_max_eps(const StepFunction<S>& f, const S& eps) {
    if (eps < S(0) || eps >= S(1)) throw precondition_error("h_max_eps: eps outside [0,1)");
    detail::require_unit_mass(f, "h_max_eps");
    const S d = f.extent_reaching(std::min(S(1) - eps, f.total_mass()));
    return {d, log2_bits(d)};
}

template <class S>
struct D0Result {
    S ratio;      // Z over the prefix weight, i.e. 2^{D_0^eps}
    double bits;  // the relative entropy itself
};

// Relative entropy of order zero against the Gibbs state on the same
// weights: sort levels by rescaled height, take the minimal fractional
// prefix of probability mass 1-eps and compare its weight to Z.
template <class S>
D0Result<S> d0_eps(const DiagonalState<S>& rho, const S& eps) {
    if (eps < S(0) || eps >= S(1)) throw precondition_error("d0_eps: eps outside [0,1)");
    const auto f = gibbs_rescale(rho);
    const S prefix = f.extent_reaching(std::min(S(1) - eps, f.total_mass()));
    const S ratio = rho.z() / prefix;
    return {ratio, log2_bits(ratio)};
}

template <class S>
DiagonalState<S> tensor(const DiagonalState<S>& a, const DiagonalState<S>& b) {
    std::vector<S> w, p;
    w.reserve(a.size() * b.size());
    p.reserve(a.size() * b.size());
    for (const auto& x : a.levels())
        for (const auto& y : b.levels()) {
            w.push_back(x.weight * y.weight);
            p.push_back(x.prob * y.prob);
        }
    return DiagonalState<S>::from_weights(std::move(w), std::move(p));
}

// Sorted spectrum of the n-fold product of a small state, grouped by
// multiplicity so tensor powers stay cheap. Returns (weight, prob,
// multiplicity) triples of the distinct product levels.
template <class S>
struct GroupedLevel {
    S weight;
    S prob;
    BigInt multiplicity;
};

template <class S>
std::vector<GroupedLevel<S>> tensor_power_grouped(const DiagonalState<S>& base, unsigned n) {
    if (n == 0) throw precondition_error("tensor_power_grouped: n must be >= 1");
    std::vector<GroupedLevel<S>> acc;
    for (const auto& lv : base.levels()) acc.push_back({lv.weight, lv.prob, 1});
    auto squash = [](std::vector<GroupedLevel<S>>& v) {
        std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
            if (a.weight != b.weight) return a.weight < b.weight;
            return a.prob < b.prob;
        });
        std::vector<GroupedLevel<S>> out;
        for (auto& g : v) {
            if (!out.empty() && out.back().weight == g.weight && out.back().prob == g.prob)
                out.back().multiplicity += g.multiplicity;
            else
                out.push_back(std::move(g));
        }
        v = std::move(out);
    };
    for (unsigned k = 1; k < n; ++k) {
        std::vector<GroupedLevel<S>> next;
        next.reserve(acc.size() * base.size());
        for (const auto& g : acc)
            for (const auto& lv : base.levels())
                next.push_back({g.weight * lv.weight, g.prob * lv.prob, g.multiplicity});
        squash(next);
        acc = std::move(next);
    }
    return acc;
}

template <class S>
S scalar_from_bigint(const BigInt& v) {
    if constexpr (num<S>::exact)
        return S(v);
    else
        return v.template convert_to<double>();
}

// Gibbs-rescaled step function of the n-fold product, built from the grouped
// spectrum (heights prob/weight, widths weight * multiplicity).
template <class S>
StepFunction<S> tensor_power_rescaled(const DiagonalState<S>& base, unsigned n) {
    auto grouped = tensor_power_grouped(base, n);
    std::vector<Block<S>> blocks;
    blocks.reserve(grouped.size());
    for (const auto& g : grouped) {
        if (g.weight == S(0)) continue;
        blocks.push_back({g.weight * scalar_from_bigint<S>(g.multiplicity), g.prob / g.weight});
    }
    return make_step_function(std::move(blocks));
}

}  // namespace sst
