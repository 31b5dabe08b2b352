#pragma once

#include <fstream>

#include <json.hpp>

#include "sst/game.hpp"
#include "sst/states.hpp"

namespace sst {

using json = nlohmann::json;

// --------------------------------------------------------------------------
// numbers: exact mode serializes rationals as "p/q" strings, float mode as
// plain JSON numbers; both readers accept either form

template <class S>
S number_from_json(const json& j) {
    if (j.is_string()) return parse_number<S>(j.get<std::string>());
    if (j.is_number_integer()) return num<S>::from_int(j.get<long long>());
    if (j.is_number()) {
        if constexpr (num<S>::exact)
            throw validation_error("exact mode requires rational strings, got a float");
        else
            return j.get<double>();
    }
    throw validation_error("expected a number");
}

inline json number_to_json(const Rat& x) { return format_number(x); }
inline json number_to_json(double x) { return x; }

// --------------------------------------------------------------------------
// state files

inline constexpr const char* kStateSchema = "sst-state/1";

template <class S>
DiagonalState<S> state_from_json(const json& j) {
    if (!j.is_object() || !j.contains("levels"))
        throw validation_error("state file: missing 'levels'");
    if (j.contains("schema") && j["schema"] != kStateSchema)
        throw validation_error("state file: unknown schema");
    const bool exact = j.value("exact", false);
    if (exact && !num<S>::exact)
        throw validation_error("state file: exact flag requires the exact pipeline");

    const auto& levels = j["levels"];
    if (!levels.is_array() || levels.empty())
        throw validation_error("state file: 'levels' must be a non-empty array");

    const bool has_kt = j.contains("kT");
    double kT = 1.0;
    if (has_kt) kT = j["kT"].is_string() ? parse_number<double>(j["kT"].get<std::string>())
                                         : j["kT"].get<double>();

    std::vector<Level<S>> lv;
    bool any_energy = false, any_weight = false;
    for (const auto& e : levels) {
        Level<S> l;
        if (e.contains("weight")) {
            any_weight = true;
            l.weight = number_from_json<S>(e["weight"]);
        } else if (e.contains("energy")) {
            any_energy = true;
            if constexpr (num<S>::exact)
                throw validation_error("state file: energy form is float-only; give weights");
            else
                l.weight = std::exp(-e["energy"].get<double>() / kT);
        } else {
            throw validation_error("state file: each level needs 'weight' or 'energy'");
        }
        if (!e.contains("prob")) throw validation_error("state file: each level needs 'prob'");
        l.prob = number_from_json<S>(e["prob"]);
        if (e.contains("label")) l.label = e["label"].get<int>();
        lv.push_back(std::move(l));
    }
    if (any_energy && any_weight)
        throw validation_error("state file: mix of 'energy' and 'weight' levels");
    if (any_energy && !has_kt)
        throw validation_error("state file: energy form requires 'kT'");
    return DiagonalState<S>::from_levels(std::move(lv));
}

template <class S>
json state_to_json(const DiagonalState<S>& st) {
    json j;
    j["schema"] = kStateSchema;
    j["exact"] = num<S>::exact;
    json levels = json::array();
    for (const auto& lv : st.levels()) {
        json e;
        e["weight"] = number_to_json(lv.weight);
        e["prob"] = number_to_json(lv.prob);
        e["label"] = lv.label;
        levels.push_back(std::move(e));
    }
    j["levels"] = std::move(levels);
    return j;
}

// --------------------------------------------------------------------------
// strategy files

inline constexpr const char* kStrategySchema = "sst-strategy/1";

template <class S>
Strategy<S> strategy_from_json(const json& j) {
    if (!j.is_object() || !j.contains("actions"))
        throw validation_error("strategy file: missing 'actions'");
    if (j.contains("schema") && j["schema"] != kStrategySchema)
        throw validation_error("strategy file: unknown schema");
    Strategy<S> s;
    if (j.contains("target_logwork")) s.target_logwork = number_from_json<S>(j["target_logwork"]);
    for (const auto& a : j["actions"]) {
        const std::string type = a.value("type", "");
        if (type == "thermalize") {
            Thermalize<S> t;
            for (const auto& row : a.at("matrix")) {
                std::vector<S> r;
                for (const auto& e : row) r.push_back(number_from_json<S>(e));
                t.matrix.push_back(std::move(r));
            }
            s.actions.push_back(std::move(t));
        } else if (type == "extract") {
            Extract<S> e;
            e.levels = a.at("levels").get<std::vector<int>>();
            const auto& w = a.at("w");
            if (w.is_string() && (w == "inf" || w == "+inf")) {
                e.to_infinity = true;
            } else {
                e.factor = number_from_json<S>(w);
            }
            s.actions.push_back(std::move(e));
        } else if (type == "lower") {
            LowerFromInfinity<S> l;
            l.levels = a.at("levels").get<std::vector<int>>();
            for (const auto& e : a.at("weights")) l.weights.push_back(number_from_json<S>(e));
            s.actions.push_back(std::move(l));
        } else if (type == "permute") {
            s.actions.push_back(Permute{a.at("perm").get<std::vector<int>>()});
        } else if (type == "shift") {
            s.actions.push_back(Shift<S>{a.at("subject").get<int>(), a.at("toward").get<int>(),
                                         number_from_json<S>(a.at("amount"))});
        } else {
            throw validation_error("strategy file: unknown action type '" + type + "'");
        }
    }
    return s;
}

template <class S>
json strategy_to_json(const Strategy<S>& s) {
    json j;
    j["schema"] = kStrategySchema;
    j["target_logwork"] = number_to_json(s.target_logwork);
    json actions = json::array();
    for (const auto& action : s.actions) {
        json a;
        std::visit(
            [&](const auto& act) {
                using T = std::decay_t<decltype(act)>;
                if constexpr (std::is_same_v<T, Thermalize<S>>) {
                    a["type"] = "thermalize";
                    json m = json::array();
                    for (const auto& row : act.matrix) {
                        json r = json::array();
                        for (const auto& e : row) r.push_back(number_to_json(e));
                        m.push_back(std::move(r));
                    }
                    a["matrix"] = std::move(m);
                } else if constexpr (std::is_same_v<T, Extract<S>>) {
                    a["type"] = "extract";
                    a["levels"] = act.levels;
                    if (act.to_infinity)
                        a["w"] = "inf";
                    else
                        a["w"] = number_to_json(act.factor);
                } else if constexpr (std::is_same_v<T, LowerFromInfinity<S>>) {
                    a["type"] = "lower";
                    a["levels"] = act.levels;
                    json ws = json::array();
                    for (const auto& e : act.weights) ws.push_back(number_to_json(e));
                    a["weights"] = std::move(ws);
                } else if constexpr (std::is_same_v<T, Permute>) {
                    a["type"] = "permute";
                    a["perm"] = act.perm;
                } else if constexpr (std::is_same_v<T, Shift<S>>) {
                    a["type"] = "shift";
                    a["subject"] = act.subject;
                    a["toward"] = act.toward;
                    a["amount"] = number_to_json(act.amount);
                }
            },
            action);
        actions.push_back(std::move(a));
    }
    j["actions"] = std::move(actions);
    return j;
}

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("cannot open file: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw validation_error("bad JSON in " + path + ": " + e.what());
    }
    return j;
}

}  // namespace sst
