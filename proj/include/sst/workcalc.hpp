#pragma once

#include "sst/states.hpp"

namespace sst {

// W = kT ln(m); m is kept exact so special-case identities can be checked
// without tolerances.
template <class S>
struct WorkReport {
    S m;
    S binding_l;
    S eps;
    double kT = 1.0;

    double work_nats() const { return log_nats(m); }
    double work() const { return kT * work_nats(); }
    double work_bits() const { return log2_bits(m); }
};

// Single-shot extractable work between two diagonal states at failure
// probability eps. Negative values are the minimal investment.
template <class S>
WorkReport<S> extractable_work(const DiagonalState<S>& rho, const DiagonalState<S>& sigma,
                               const S& eps, double kT = 1.0) {
    const auto mix = relative_mixedness(gibbs_rescale(rho), gibbs_rescale(sigma), eps);
    return {mix.m, mix.binding_l, eps, kT};
}

// n-cylinder engine on degenerate levels: W = (n - H_max^eps) kT ln 2,
// equivalently m = 2^n / d_eps against the flat Gibbs state.
template <class S>
WorkReport<S> szilard_work(unsigned n_cylinders, const DiagonalState<S>& rho, const S& eps,
                           double kT = 1.0) {
    const auto& lv = rho.levels();
    if (lv.empty()) throw precondition_error("szilard_work: empty state");
    for (const auto& l : lv)
        if (!num<S>::eq(l.weight, lv.front().weight))
            throw precondition_error("szilard_work: levels must be degenerate");
    size_t want = 1;
    for (unsigned i = 0; i < n_cylinders; ++i) want *= 2;
    if (lv.size() != want)
        throw precondition_error("szilard_work: expected 2^n levels");
    const auto d = h_max_eps(gibbs_rescale(rho), eps);
    // the rescaled picture has support Z = 2^n * A; d_eps carries the same
    // factor A, so the ratio is A-free
    const S m = rho.z() / d.extent;
    return {m, d.extent, eps, kT};
}

// Appendix-max-entropy form: W = kT ln2 (H_max(q) - H_max^eps(p)), valid for
// a flat final spectrum (single positive height, no zero tail).
template <class S>
WorkReport<S> work_via_hmax(const DiagonalState<S>& rho, const DiagonalState<S>& sigma,
                            const S& eps, double kT = 1.0) {
    const auto q = gibbs_rescale(sigma);
    if (q.blocks().size() != 1 || !(q.top_height() > S(0)))
        throw precondition_error(
            "work_via_hmax: final state must be flat (one rescaled height over its support)");
    const auto p = gibbs_rescale(rho);
    const auto d = h_max_eps(p, eps);
    const S m = q.support() / d.extent;
    return {m, d.extent, eps, kT};
}

template <class S>
struct TriangleReport {
    S m1, m2, m12;
    bool holds;  // m12 >= m1 * m2
    double kT = 1.0;

    // the main-text work form: W^e1(rho->tau) + W^e2(tau->sigma) <= W^{e1+e2}(rho->sigma)
    double lhs_work() const { return kT * (log_nats(m1) + log_nats(m2)); }
    double rhs_work() const { return kT * log_nats(m12); }
};

template <class S>
TriangleReport<S> triangle_check(const DiagonalState<S>& rho, const DiagonalState<S>& tau,
                                 const DiagonalState<S>& sigma, const S& eps1, const S& eps2,
                                 double kT = 1.0) {
    if (eps1 < S(0) || eps2 < S(0) || eps1 + eps2 >= S(1))
        throw precondition_error("triangle_check: need eps1, eps2 >= 0 and eps1+eps2 < 1");
    const auto p = gibbs_rescale(rho);
    const auto s = gibbs_rescale(tau);
    const auto q = gibbs_rescale(sigma);
    const S m1 = relative_mixedness(p, s, eps1).m;
    const S m2 = relative_mixedness(s, q, eps2).m;
    const S m12 = relative_mixedness(p, q, eps1 + eps2).m;
    return {m1, m2, m12, num<S>::ge(m12, m1 * m2), kT};
}

template <class S>
struct KelvinReport {
    std::vector<S> leg_m;
    S product_m;   // product of the per-leg mixedness factors
    S cycle_m;     // 1/(1 - m_legs * eps), the closed-cycle cap
    bool holds;    // sum of leg works <= cycle bound
    double kT = 1.0;

    double sum_work() const { return kT * log_nats(product_m); }
    double bound_work() const { return kT * log_nats(cycle_m); }
};

// Generalized Kelvin statement for a closed cycle: the summed per-leg works
// at risk eps each cannot beat W^{m eps}(A->A) = kT ln 1/(1 - m eps).
template <class S>
KelvinReport<S> kelvin_cycle_bound(const std::vector<DiagonalState<S>>& cycle, const S& eps,
                                   double kT = 1.0) {
    if (cycle.size() < 2) throw precondition_error("kelvin_cycle_bound: need at least one leg");
    if (!cycle.front().same_weights(cycle.back()))
        throw precondition_error("kelvin_cycle_bound: cycle is not closed");
    {
        const auto a = cycle.front().probs(), b = cycle.back().probs();
        for (size_t i = 0; i < a.size(); ++i)
            if (!num<S>::eq(a[i], b[i]))
                throw precondition_error("kelvin_cycle_bound: cycle is not closed");
    }
    const size_t legs = cycle.size() - 1;
    const S total_eps = eps * S(static_cast<long long>(legs));
    if (!(total_eps < S(1))) throw precondition_error("kelvin_cycle_bound: m*eps must be < 1");

    KelvinReport<S> rep;
    rep.kT = kT;
    rep.product_m = S(1);
    for (size_t i = 0; i + 1 < cycle.size(); ++i) {
        const S m = extractable_work(cycle[i], cycle[i + 1], eps, kT).m;
        rep.leg_m.push_back(m);
        rep.product_m *= m;
    }
    rep.cycle_m = S(1) / (S(1) - total_eps);
    rep.holds = num<S>::ge(rep.cycle_m, rep.product_m);
    return rep;
}

}  // namespace sst
