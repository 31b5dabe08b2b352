// Acceptance suite: one line per criterion, exact arithmetic wherever the
// claim is exact. Exits nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "helpers.hpp"
#include "sst/laws.hpp"
#include "sst/protocol.hpp"
#include "sst/workcalc.hpp"

using namespace sst;
using namespace sst::testing;

namespace {

struct Harness {
    bool all_ok = true;

    void run(int id, const char* title, const std::function<bool()>& body) {
        const auto t0 = std::chrono::steady_clock::now();
        bool ok = false;
        std::string note;
        try {
            ok = body();
        } catch (const std::exception& e) {
            note = std::string(" (exception: ") + e.what() + ")";
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] %2d. %s  (%.2fs)%s\n", ok ? "PASS" : "FAIL", id, title, secs,
                    note.c_str());
        std::fflush(stdout);
        all_ok = all_ok && ok;
    }
};

bool require(bool cond) { return cond; }

}  // namespace

int main() {
    Harness h;

    h.run(1, "worked-example work is exactly kT ln(4/3) at eps = 1/2, under one second", [] {
        const auto t0 = std::chrono::steady_clock::now();
        const auto rep = extractable_work(appendix_rho(), appendix_sigma(), Rat(1, 2));
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return rep.m == Rat(4, 3) && secs < 1.0;
    });

    h.run(2, "thermal-to-thermal closed form exact on 200 random pairs", [] {
        Gen gen(9001);
        for (int i = 0; i < 200; ++i) {
            const size_t np = static_cast<size_t>(gen.pick(1, 4));
            const size_t nq = static_cast<size_t>(gen.pick(1, 4));
            std::vector<Rat> wp(np), wq(nq);
            for (auto& x : wp) x = gen.rat(8, 8);
            for (auto& x : wq) x = gen.rat(8, 8);
            auto rho = gibbs_state<Rat>(wp);
            auto sigma = gibbs_state<Rat>(wq);
            const Rat eps(gen.pick(0, 4), 5);
            if (extractable_work(rho, sigma, eps).m != sigma.z() / (rho.z() * (Rat(1) - eps)))
                return false;
        }
        return true;
    });

    h.run(3, "one-bit erasure costs kT ln 2 minus the risk credit; the reverse engine pays back", [] {
        auto thermal = gibbs_state<Rat>({Rat(1), Rat(1)});
        auto erased = DiagonalState<Rat>::from_weights({Rat(1), Rat(0)}, {Rat(1), Rat(0)});
        for (int k = 0; k < 8; ++k) {
            const Rat eps(k, 9);
            if (extractable_work(thermal, erased, eps).m != Rat(1) / (Rat(2) * (Rat(1) - eps)))
                return false;
        }
        return extractable_work(erased, thermal, Rat(0)).m == Rat(2);
    });

    h.run(4, "protocol achieves the bound exactly on the worked example and 100 random pairs", [] {
        auto check = [](const DiagonalState<Rat>& rho, const DiagonalState<Rat>& sigma,
                        const Rat& eps) {
            const auto build = extraction_protocol(rho, sigma, eps);
            if (build.m != extractable_work(rho, sigma, eps).m) return false;
            const auto out = run_protocol_exact(build);
            // the emitted strategy must saturate its own bound
            const auto audit = audit_bound(build.rho_padded, build.strategy, build.m);
            return out.success_probability_exact && out.success_work_exact &&
                   out.final_matches && out.catalyst_restored && audit.min_slack == Rat(0) &&
                   audit.m_cap == build.m;
        };
        if (!require(check(appendix_rho(), appendix_sigma(), Rat(1, 2)))) return false;
        Gen gen(424242);
        for (int i = 0; i < 100; ++i) {
            auto rho = gen.state(4);
            auto sigma = gen.state(4);
            const Rat eps(gen.pick(0, 4), 5);
            if (!check(rho, sigma, eps)) return false;
        }
        return true;
    });

    h.run(5, "1e5 seeded runs of the worked protocol hit 1/2 within four sigma, reproducibly", [] {
        const auto t0 = std::chrono::steady_clock::now();
        const auto build = extraction_protocol(appendix_rho(), appendix_sigma(), Rat(1, 2));
        const size_t runs = 100000;
        const auto rec = simulate_many(build.rho_padded, build.strategy, runs, 77, 4);
        size_t wins = 0;
        for (const auto& r : rec) wins += r.success ? 1 : 0;
        const double rate = static_cast<double>(wins) / static_cast<double>(runs);
        const double four_sigma = 4 * std::sqrt(0.25 / static_cast<double>(runs));
        const auto again = simulate_many(build.rho_padded, build.strategy, 2000, 77, 1);
        for (size_t i = 0; i < again.size(); ++i)
            if (again[i].log_work != rec[i].log_work || again[i].success != rec[i].success)
                return false;
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return std::abs(rate - 0.5) <= four_sigma && secs < 30.0;
    });

    h.run(6, "1000 random strategies never produce negative audited slack, exactly", [] {
        Gen gen(616161);
        int audited = 0;
        while (audited < 1000) {
            auto rho = gen.state(4);
            auto s = random_strategy(gen, rho, 8);
            const auto res = enumerate_paths(rho, s);
            Rat total(0), best(0);
            for (const auto& p : res.paths) {
                total += p.probability;
                if (!p.failed_infinite() && p.work_factor > best) best = p.work_factor;
            }
            if (total != Rat(1)) return false;
            if (best == Rat(0)) continue;
            const auto audit = audit_bound(rho, s, best);
            if (audit.vacuous || audit.min_slack < Rat(0) || !audit.target_within_cap)
                return false;
            ++audited;
        }
        return true;
    });

    h.run(7, "special-case formulas agree exactly with the general one, 100 instances each", [] {
        Gen gen(777);
        for (int i = 0; i < 100; ++i) {  // degenerate engines
            const unsigned n = static_cast<unsigned>(gen.pick(1, 3));
            const size_t d = size_t(1) << n;
            std::vector<Rat> w(d, Rat(1));
            auto rho = DiagonalState<Rat>::from_weights(w, gen.simplex(d));
            const Rat eps(gen.pick(0, 4), 5);
            if (szilard_work(n, rho, eps).m != extractable_work(rho, gibbs_state<Rat>(w), eps).m)
                return false;
        }
        for (int i = 0; i < 100; ++i) {  // flat finals via the max-entropy form
            auto rho = gen.state(5);
            std::vector<Rat> wq(static_cast<size_t>(gen.pick(1, 4)));
            for (auto& x : wq) x = gen.rat(6, 6);
            auto sigma = gibbs_state<Rat>(wq);
            const Rat eps(gen.pick(0, 4), 5);
            if (work_via_hmax(rho, sigma, eps).m != extractable_work(rho, sigma, eps).m)
                return false;
        }
        for (int i = 0; i < 100; ++i) {  // order-zero relative entropy
            auto rho = gen.state(5);
            const Rat eps(gen.pick(0, 4), 5);
            if (d0_eps(rho, eps).ratio !=
                extractable_work(rho, gibbs_state<Rat>(rho.weights()), eps).m)
                return false;
        }
        return true;
    });

    h.run(8, "triangle inequality and cycle bounds hold exactly on 1000 random instances", [] {
        Gen gen(888);
        const Rat grid[3] = {Rat(0), Rat(1, 20), Rat(1, 5)};
        for (int i = 0; i < 1000; ++i) {
            auto a = gen.state(4);
            auto b = gen.state(4);
            auto c = gen.state(4);
            const Rat e1 = grid[gen.pick(0, 2)];
            const Rat e2 = grid[gen.pick(0, 2)];
            if (!triangle_check(a, b, c, e1, e2).holds) return false;
        }
        for (int i = 0; i < 100; ++i) {  // two-cycles, the main-text form
            auto a = gen.state(4);
            auto b = gen.state(4);
            const Rat eps = grid[gen.pick(0, 2)];
            const Rat lhs =
                extractable_work(a, b, eps).m * extractable_work(b, a, eps).m;
            if (lhs > extractable_work(a, a, eps + eps).m) return false;
        }
        for (int i = 0; i < 100; ++i) {  // cycles of up to four legs
            const long legs = gen.pick(2, 4);
            std::vector<DiagonalState<Rat>> cycle;
            for (long k = 0; k < legs; ++k) cycle.push_back(gen.state(4));
            cycle.push_back(cycle.front());
            if (!kelvin_cycle_bound(cycle, Rat(1, 20)).holds) return false;
        }
        return true;
    });

    h.run(9, "entropy law: the counterexample splits the conditions; random checks never fail", [] {
        auto before = DiagonalState<Rat>::from_weights({Rat(1), Rat(1), Rat(1)},
                                                       {Rat(1, 2), Rat(1, 2), Rat(0)});
        auto after = DiagonalState<Rat>::from_weights({Rat(1), Rat(1), Rat(1)},
                                                      {Rat(2, 3), Rat(1, 6), Rat(1, 6)});
        const auto rep = entropy_energy_check(before, after);
        if (std::abs(rep.delta_s_bits - 0.2516) > 1e-3) return false;
        if (rep.w0_m != Rat(3, 4) || rep.w0_nats >= 0) return false;
        if (!rep.eq_entropy_holds || rep.eq_work_holds) return false;

        Gen gen(999);
        for (int i = 0; i < 10000; ++i) {  // partial two-level thermalizations
            auto rho = gen.state(4, false);
            const int a = static_cast<int>(gen.pick(0, static_cast<long>(rho.size()) - 1));
            int b = static_cast<int>(gen.pick(0, static_cast<long>(rho.size()) - 1));
            if (a == b) b = (b + 1) % static_cast<int>(rho.size());
            auto [st, r] = two_level_partial_thermalize(rho, a, b, Rat(gen.pick(0, 16), 16));
            if (r.delta_s_bits - r.beta_delta_e_bits < -1e-12) return false;
        }
        for (int i = 0; i < 1000; ++i) {  // Gibbs-fixing maps pass the majorization condition
            auto rho = gen.state(4);
            auto bmat = gen.gibbs_fixing(rho.weights(), static_cast<int>(gen.pick(1, 4)));
            if (!majorizes(gibbs_rescale(rho), gibbs_rescale(apply_thermalization(rho, bmat))))
                return false;
        }
        return true;
    });

    h.run(10, "isothermal shift: unit expectation exactly, zero-work branches, root-n narrowing", [] {
        auto st = DiagonalState<Rat>::from_weights({Rat(1, 3), Rat(1, 3), Rat(1, 3)},
                                                   {Rat(1, 4), Rat(1, 4), Rat(1, 2)});
        const ShiftSpec<Rat> spec{0, 1, Rat(1, 5)};
        for (long n = 1; n <= 12; ++n)
            if (finite_shift_enumerate(st, spec, n).expected_factor() != Rat(1)) return false;

        Strategy<Rat> one;
        one.actions.push_back(Shift<Rat>{0, 1, Rat(1, 5)});
        for (const auto& p : enumerate_paths(st, one).paths)
            if (p.work_factor != Rat(1)) return false;

        std::vector<double> dev;
        for (long n : {10L, 100L, 1000L}) {
            Xoshiro256 rng(4000 + static_cast<uint64_t>(n));
            const int runs = 20000;
            double sum = 0, sq = 0;
            for (int i = 0; i < runs; ++i) {
                const double w = finite_shift_sample(st, spec, n, rng);
                sum += w;
                sq += w * w;
            }
            dev.push_back(std::sqrt(std::max(sq / runs - (sum / runs) * (sum / runs), 0.0)));
        }
        const double f1 = dev[0] / dev[1];
        const double f2 = dev[1] / dev[2];
        return f1 >= 2.5 && f1 <= 4.0 && f2 >= 2.5 && f2 <= 4.0;
    });

    h.run(11, "50 uneven stochastic maps: positive work rate, finite-size rates closing in", [] {
        Gen gen(1111);
        int positives = 0, resolvable = 0;
        while (resolvable < 50) {
            const size_t d = static_cast<size_t>(gen.pick(2, 3));
            auto b = gen.stochastic(d);
            if (is_bistochastic(b)) continue;
            const auto demo = kelvin_violation_demo(b, Rat(1, 100), 12);
            if (!(demo.rate_nats > 0)) return false;  // holds for every map
            ++positives;
            // the n <= 12 gap trend is resolvable on binary spectra with the
            // rate well clear of the -ln(1-eps)/n truncation term; weakly
            // biased or ternary maps sit flat at this scale
            if (d != 2 || demo.rate_nats < 0.1) continue;
            if (!demo.approaches_rate) return false;
            ++resolvable;
        }
        return positives >= 50;
    });

    return h.all_ok ? 0 : 1;
}
