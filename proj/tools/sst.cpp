// Command-line front end: states and strategies in, reports and curves out.
// Exit codes: 0 ok, 2 validation, 3 precondition, 4 enumeration cap.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "sst/laws.hpp"
#include "sst/protocol.hpp"
#include "sst/serialize.hpp"

using namespace sst;

namespace {

struct Options {
    std::string state_in, state_out, strategy_file;
    std::string eps = "0";
    std::string target_w = "1";
    std::string units = "nats";
    std::string csv_file, emit_strategy;
    double kT = 1.0;
    unsigned curve_points = 0;
    size_t runs = 10000;
    uint64_t seed = 1;
    bool exact_run = false;
};

unsigned thread_cap() {
    if (const char* env = std::getenv("SST_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

bool file_is_exact(const json& j) { return j.value("exact", false); }

template <class S>
json work_json(const WorkReport<S>& rep, const std::string& units) {
    json j;
    j["m"] = number_to_json(rep.m);
    j["binding_l"] = number_to_json(rep.binding_l);
    j["eps"] = number_to_json(rep.eps);
    j["kT"] = rep.kT;
    j["units"] = units;
    if (units == "bits")
        j["work"] = rep.work_bits();
    else
        j["work"] = rep.work();
    j["work_nats"] = rep.work_nats();
    if (num<S>::exact) j["work_expr"] = "kT*ln(" + format_number(rep.m) + ")";
    return j;
}

std::ofstream open_csv(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw validation_error("cannot write file: " + path);
    return out;
}

template <class S>
int cmd_work(const Options& opt) {
    const auto rho = state_from_json<S>(load_json_file(opt.state_in));
    const auto sigma = state_from_json<S>(load_json_file(opt.state_out));
    const S eps = parse_number<S>(opt.eps);
    const auto rep = extractable_work(rho, sigma, eps, opt.kT);
    std::cout << work_json(rep, opt.units).dump(2) << "\n";

    if (opt.curve_points > 0) {
        std::ofstream file;
        std::ostream* os = &std::cout;
        if (!opt.csv_file.empty()) {
            file = open_csv(opt.csv_file);
            os = &file;
        }
        *os << "series,x,y\n";
        const auto f = gibbs_rescale(rho);
        const auto g = gibbs_rescale(sigma);
        for (unsigned i = 0; i < opt.curve_points; ++i) {
            const S e = parse_number<S>(std::to_string(i)) / num<S>::from_int(opt.curve_points);
            const auto r = relative_mixedness(f, g, e);
            *os << "work_vs_eps," << to_double(e) << "," << opt.kT * log_nats(r.m) << "\n";
        }
        for (const auto& pt : cumulative_curve(f).points)
            *os << "lorenz_initial," << to_double(pt.first) << "," << to_double(pt.second) << "\n";
        for (const auto& pt : cumulative_curve(g).points)
            *os << "lorenz_final," << to_double(pt.first) << "," << to_double(pt.second) << "\n";
    }
    return 0;
}

template <class S>
int cmd_entropy(const Options& opt) {
    const auto rho = state_from_json<S>(load_json_file(opt.state_in));
    const S eps = parse_number<S>(opt.eps);
    const auto f = gibbs_rescale(rho);
    const auto hm = h_max(f);
    const auto hme = h_max_eps(f, eps);
    const auto d0 = d0_eps(rho, eps);
    json j;
    j["shannon_bits"] = shannon_entropy_bits(rho);
    j["h_max_bits"] = hm.bits;
    j["h_max_eps_bits"] = hme.bits;
    j["d0_eps_bits"] = d0.bits;
    j["support"] = number_to_json(hm.extent);
    j["d_eps"] = number_to_json(hme.extent);
    j["z"] = number_to_json(rho.z());
    j["eps"] = number_to_json(eps);
    std::cout << j.dump(2) << "\n";
    return 0;
}

template <class S>
int cmd_simulate(const Options& opt) {
    const auto rho = state_from_json<S>(load_json_file(opt.state_in));
    auto strategy = strategy_from_json<S>(load_json_file(opt.strategy_file));
    if (opt.target_w != "1") strategy.target_logwork = parse_number<S>(opt.target_w);
    if (opt.runs < 1) throw validation_error("simulate: --runs must be >= 1");

    const auto records = simulate_many(rho, strategy, opt.runs, opt.seed, thread_cap());
    size_t successes = 0;
    double mean = 0, finite = 0;
    for (const auto& r : records) {
        successes += r.success ? 1 : 0;
        if (std::isfinite(r.log_work)) {
            mean += r.log_work;
            finite += 1;
        }
    }
    const double rate = static_cast<double>(successes) / static_cast<double>(opt.runs);
    const double half_width =
        1.959963984540054 * std::sqrt(std::max(rate * (1 - rate), 0.0) / static_cast<double>(opt.runs));

    if (!opt.csv_file.empty()) {
        auto file = open_csv(opt.csv_file);
        file << "run,log_work,success,final_level\n";
        char buf[64];
        for (size_t i = 0; i < records.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", records[i].log_work);
            file << i << "," << buf << "," << (records[i].success ? 1 : 0) << ","
                 << records[i].final_level << "\n";
        }
    }
    json j;
    j["runs"] = opt.runs;
    j["seed"] = opt.seed;
    j["successes"] = successes;
    j["success_rate"] = rate;
    j["ci95_half_width"] = half_width;
    j["mean_log_work_finite"] = finite > 0 ? mean / finite : 0.0;
    j["target_logwork"] = number_to_json(strategy.target_logwork);
    std::cout << j.dump(2) << "\n";
    return 0;
}

template <class S>
int cmd_audit(const Options& opt) {
    const auto rho = state_from_json<S>(load_json_file(opt.state_in));
    auto strategy = strategy_from_json<S>(load_json_file(opt.strategy_file));
    const S target = opt.target_w != "1" ? parse_number<S>(opt.target_w) : strategy.target_logwork;
    const auto rep = audit_bound(rho, strategy, target);
    json j;
    j["p_success"] = number_to_json(rep.p_success);
    j["vacuous"] = rep.vacuous;
    if (!rep.vacuous) {
        j["min_slack"] = number_to_json(rep.min_slack);
        j["binding_l"] = number_to_json(rep.binding_l);
        j["holds"] = rep.holds;
        j["m_cap"] = number_to_json(rep.m_cap);
        j["target_within_cap"] = rep.target_within_cap;
    }
    std::cout << j.dump(2) << "\n";
    return 0;
}

template <class S>
int cmd_protocol(const Options& opt) {
    const auto rho = state_from_json<S>(load_json_file(opt.state_in));
    const auto sigma = state_from_json<S>(load_json_file(opt.state_out));
    const S eps = parse_number<S>(opt.eps);
    const auto build = extraction_protocol(rho, sigma, eps);

    if (!opt.emit_strategy.empty()) {
        auto file = open_csv(opt.emit_strategy);
        file << strategy_to_json(build.strategy).dump(2) << "\n";
    }

    json j;
    j["m"] = number_to_json(build.m);
    j["work_nats"] = opt.kT * log_nats(build.m);
    j["d_eps"] = number_to_json(build.d_eps);
    j["eps"] = number_to_json(build.eps);
    j["levels_total"] = build.total_levels;
    j["levels_rho"] = build.rho_levels;
    j["levels_sigma"] = build.sigma_levels;
    j["padding"] = {{"catalyst", "two degenerate levels, ground eigenstate occupied"},
                    {"catalyst_copies", "positions [n, 2n) of the joint layout"},
                    {"extra_empty_levels", build.added_empties}};
    j["actions"] = build.strategy.actions.size();

    if (opt.exact_run) {
        const auto out = run_protocol_exact(build);
        j["p_success"] = number_to_json(out.p_success);
        j["success_probability_exact"] = out.success_probability_exact;
        j["success_work_exact"] = out.success_work_exact;
        j["final_matches_target"] = out.final_matches;
        j["catalyst_restored"] = out.catalyst_restored;
    } else {
        const auto records =
            simulate_many(build.rho_padded, build.strategy, opt.runs, opt.seed, thread_cap());
        size_t successes = 0;
        for (const auto& r : records) successes += r.success ? 1 : 0;
        j["runs"] = opt.runs;
        j["seed"] = opt.seed;
        j["success_rate"] = static_cast<double>(successes) / static_cast<double>(opt.runs);
    }
    std::cout << j.dump(2) << "\n";
    return 0;
}

template <class S>
int cmd_laws(const Options& opt) {
    const auto rho = state_from_json<S>(load_json_file(opt.state_in));
    const auto rho2 = state_from_json<S>(load_json_file(opt.state_out));
    const auto rep = entropy_energy_check(rho, rho2);
    json j;
    j["delta_s_bits"] = rep.delta_s_bits;
    j["beta_delta_e_bits"] = rep.beta_delta_e_bits;
    j["w0_nats"] = rep.w0_nats;
    j["w0_m"] = number_to_json(rep.w0_m);
    j["entropy_condition_holds"] = rep.eq_entropy_holds;
    j["majorization_condition_holds"] = rep.eq_work_holds;
    std::cout << j.dump(2) << "\n";
    return 0;
}

template <int (*ExactFn)(const Options&), int (*FloatFn)(const Options&)>
int dispatch(const Options& opt, bool exact) {
    return exact ? ExactFn(opt) : FloatFn(opt);
}

bool detect_exact(const Options& opt, bool needs_out, bool needs_strategy) {
    const bool a = file_is_exact(load_json_file(opt.state_in));
    if (needs_out) {
        const bool b = file_is_exact(load_json_file(opt.state_out));
        if (a != b) throw validation_error("state files disagree on the exact flag");
    }
    if (needs_strategy) load_json_file(opt.strategy_file);  // early diagnostics
    return a;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"single-shot work extraction toolkit"};
    app.require_subcommand(1);
    Options opt;

    auto add_units = [&](CLI::App* c) {
        c->add_option("--units", opt.units, "work units: nats, bits or kt")
            ->check(CLI::IsMember({"nats", "bits", "kt"}));
        c->add_option("--kT", opt.kT, "temperature scale for reported work");
    };

    auto* work = app.add_subcommand("work", "extractable work between two states");
    work->add_option("state_in", opt.state_in)->required();
    work->add_option("state_out", opt.state_out)->required();
    work->add_option("--eps", opt.eps, "failure probability in [0,1)");
    work->add_option("--curve", opt.curve_points, "emit CSV over an eps grid with N points");
    work->add_option("--csv", opt.csv_file, "CSV output path (default stdout)");
    add_units(work);

    auto* entropy = app.add_subcommand("entropy", "entropy functionals of one state");
    entropy->add_option("state_in", opt.state_in)->required();
    entropy->add_option("--eps", opt.eps);

    auto* simulate = app.add_subcommand("simulate", "seeded single-shot realizations");
    simulate->add_option("state_in", opt.state_in)->required();
    simulate->add_option("strategy", opt.strategy_file)->required();
    simulate->add_option("--runs", opt.runs);
    simulate->add_option("--seed", opt.seed);
    simulate->add_option("--target-w", opt.target_w, "success threshold on the work factor");
    simulate->add_option("--csv", opt.csv_file, "per-realization CSV path");

    auto* audit = app.add_subcommand("audit", "check the upper-bound inequality for a strategy");
    audit->add_option("state_in", opt.state_in)->required();
    audit->add_option("strategy", opt.strategy_file)->required();
    audit->add_option("--target-w", opt.target_w);

    auto* protocol = app.add_subcommand("protocol", "build and run the achievability protocol");
    protocol->add_option("state_in", opt.state_in)->required();
    protocol->add_option("state_out", opt.state_out)->required();
    protocol->add_option("--eps", opt.eps);
    protocol->add_flag("--exact", opt.exact_run, "exact path enumeration instead of sampling");
    protocol->add_option("--runs", opt.runs);
    protocol->add_option("--seed", opt.seed);
    protocol->add_option("--emit-strategy", opt.emit_strategy, "write the strategy JSON here");
    add_units(protocol);

    auto* laws = app.add_subcommand("laws", "entropy versus majorization second-law check");
    laws->add_option("state_in", opt.state_in)->required();
    laws->add_option("state_out", opt.state_out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (work->parsed())
            return dispatch<cmd_work<Rat>, cmd_work<double>>(opt, detect_exact(opt, true, false));
        if (entropy->parsed())
            return dispatch<cmd_entropy<Rat>, cmd_entropy<double>>(opt,
                                                                   detect_exact(opt, false, false));
        if (simulate->parsed())
            return dispatch<cmd_simulate<Rat>, cmd_simulate<double>>(
                opt, detect_exact(opt, false, true));
        if (audit->parsed())
            return dispatch<cmd_audit<Rat>, cmd_audit<double>>(opt, detect_exact(opt, false, true));
        if (protocol->parsed())
            return dispatch<cmd_protocol<Rat>, cmd_protocol<double>>(
                opt, detect_exact(opt, true, false));
        if (laws->parsed())
            return dispatch<cmd_laws<Rat>, cmd_laws<double>>(opt, detect_exact(opt, true, false));
    } catch (const validation_error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const cap_exceeded& e) {
        std::cerr << "cap exceeded: " << e.what() << "\n";
        return 4;
    } catch (const precondition_error& e) {
        std::cerr << "precondition error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
