#pragma once

#include "sst/game.hpp"
#include "sst/workcalc.hpp"

namespace sst {

template <class S>
struct LawReport {
    double delta_s_bits = 0;
    double beta_delta_e_bits = 0;  // beta <dE> / ln 2
    double w0_nats = 0;            // ln of the zero-risk mixedness
    S w0_m{1};
    bool eq_entropy_holds = false;  // Delta(S - beta<E>) >= 0
    bool eq_work_holds = false;     // W^0(rho -> rho') >= 0, i.e. majorization
};

// Compares the entropy-increase statement with the majorization condition on
// a fixed level structure. beta is folded into the weights: beta E_i = -ln A_i.
template <class S>
LawReport<S> entropy_energy_check(const DiagonalState<S>& rho, const DiagonalState<S>& rho2) {
    if (rho.size() != rho2.size())
        throw precondition_error("entropy_energy_check: level count mismatch");
    if (!rho.same_weights(rho2))
        throw precondition_error("entropy_energy_check: energies must be fixed across the transition");

    LawReport<S> rep;
    rep.delta_s_bits = shannon_entropy_bits(rho2) - shannon_entropy_bits(rho);
    double beta_de = 0;
    for (size_t i = 0; i < rho.size(); ++i) {
        const auto& a = rho.levels()[i];
        const auto& b = rho2.levels()[i];
        if (a.weight == S(0)) continue;  // probability pinned to zero there
        beta_de += (to_double(b.prob) - to_double(a.prob)) * (-log_nats(a.weight));
    }
    rep.beta_delta_e_bits = beta_de / std::log(2.0);
    const auto mix = relative_mixedness(gibbs_rescale(rho), gibbs_rescale(rho2), S(0));
    rep.w0_m = mix.m;
    rep.w0_nats = log_nats(mix.m);
    rep.eq_entropy_holds = rep.delta_s_bits - rep.beta_delta_e_bits >= -1e-12;
    rep.eq_work_holds = num<S>::ge(mix.m, S(1));
    return rep;
}

// Moves the pair (i, j) a fraction t of the way toward its two-level Gibbs
// ratio, keeping the pair mass fixed. The entropy-increase inequality holds
// along the whole family.
template <class S>
std::pair<DiagonalState<S>, LawReport<S>> two_level_partial_thermalize(const DiagonalState<S>& rho,
                                                                       int i, int j, const S& t) {
    if (i == j) throw precondition_error("two_level_partial_thermalize: i == j");
    if (t < S(0) || t > S(1)) throw precondition_error("two_level_partial_thermalize: t outside [0,1]");
    const auto& lv = rho.levels();
    const S wi = lv.at(i).weight, wj = lv.at(j).weight;
    const S pair_w = wi + wj;
    if (!(pair_w > S(0)))
        throw precondition_error("two_level_partial_thermalize: both levels at infinite energy");
    const S mass = lv[i].prob + lv[j].prob;

    auto probs = rho.probs();
    probs[i] = (S(1) - t) * lv[i].prob + t * mass * wi / pair_w;
    probs[j] = mass - probs[i];
    auto rho2 = DiagonalState<S>::from_weights(rho.weights(), std::move(probs));
    return {rho2, entropy_energy_check(rho, rho2)};
}

template <class S>
struct KelvinDemo {
    DiagonalState<S> sigma;          // image of the uniform state
    double rate_bits = 0;            // H_max - S, per copy
    double rate_nats = 0;            // the deterministic work rate, kT = 1
    std::vector<double> finite_rate; // W^eps(sigma^n -> u^n)/n for n = 2..n_max
    // Net approach of the finite-size rate toward the limit between the first
    // and last computed n. The per-step sequence carries lattice oscillations
    // from the discrete product spectra, and for maps close to bistochastic
    // the truncation term -ln(1-eps)/n swamps the rate at desk scale, so the
    // approach is resolvable only when rate_nats is well above -ln(1-eps).
    bool approaches_rate = false;
};

// A stochastic but non-bistochastic map on degenerate levels breaks the
// entropy condition at the uniform state and enables deterministic work
// extraction in the many-copy limit; the finite-n rates climb toward
// (H_max - S) kT ln 2.
template <class S>
KelvinDemo<S> kelvin_violation_demo(const Matrix<S>& map, const S& eps = num<S>::ratio(1, 100),
                                    unsigned n_max = 12) {
    const size_t d = map.size();
    if (d < 2) throw precondition_error("kelvin_violation_demo: need at least two levels");
    for (const auto& row : map) {
        if (row.size() != d) throw validation_error("kelvin_violation_demo: matrix not square");
        for (const auto& e : row)
            if (e < S(0)) throw validation_error("kelvin_violation_demo: negative entry");
    }
    for (size_t j = 0; j < d; ++j) {
        S col(0);
        for (size_t i = 0; i < d; ++i) col += map[i][j];
        if (!num<S>::eq(col, S(1)))
            throw validation_error("kelvin_violation_demo: matrix is not stochastic");
    }
    bool bistochastic = true;
    for (size_t i = 0; i < d && bistochastic; ++i) {
        S row(0);
        for (size_t j = 0; j < d; ++j) row += map[i][j];
        bistochastic = num<S>::eq(row, S(1));
    }
    if (bistochastic)
        throw precondition_error("kelvin_violation_demo: bistochastic maps respect the condition");

    const S dd = S(static_cast<long long>(d));
    std::vector<S> uniform(d, S(1) / dd), ones(d, S(1));
    const auto sigma_probs = apply_matrix(map, uniform);
    KelvinDemo<S> demo;
    demo.sigma = DiagonalState<S>::from_weights(ones, sigma_probs);

    const double hmax_bits = std::log2(static_cast<double>(d));
    const double s_bits = shannon_entropy_bits(demo.sigma);
    demo.rate_bits = hmax_bits - s_bits;
    demo.rate_nats = demo.rate_bits * std::log(2.0);

    for (unsigned n = 2; n <= n_max; ++n) {
        // flat target: W/n = ln2 (log2 d - H_max^eps(sigma^n)/n)
        const auto p = tensor_power_rescaled(demo.sigma, n);
        const auto dq = h_max_eps(p, eps);
        demo.finite_rate.push_back(std::log(2.0) * (hmax_bits - dq.bits / n));
    }
    if (!demo.finite_rate.empty()) {
        const double first_gap = std::abs(demo.finite_rate.front() - demo.rate_nats);
        const double last_gap = std::abs(demo.finite_rate.back() - demo.rate_nats);
        demo.approaches_rate = last_gap <= first_gap + 1e-12;
    }
    return demo;
}

}  // namespace sst
