#pragma once

// JSON (de)serialization of models, index tables, policies and breakpoint
// families. Infinities are written as the strings "inf" / "-inf".

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "idxalloc/asset.hpp"
#include "idxalloc/bench.hpp"
#include "idxalloc/core.hpp"
#include "idxalloc/station.hpp"

namespace idxalloc {

using nlohmann::json;

inline json number_to_json(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (std::isnan(x)) return nullptr;
    return x;
}

inline double number_from_json(const json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return kInf;
        if (s == "-inf") return -kInf;
        throw std::invalid_argument("expected a number, got '" + s + "'");
    }
    if (j.is_null()) return NAN;
    return j.get<double>();
}

// ---------------------------------------------------------------------------
// Stations

inline json to_json(const StationModel& s) {
    return json{{"kind", "station"}, {"lambda", s.lambda}, {"mu", s.mu}, {"h", s.h}};
}

/// Either explicit {"lambda", "mu": [...], "h"} or a parametric form
/// {"lambda", "mu_max", "nu" | "eta", "S", "h"}.
inline StationModel station_from_json(const json& j) {
    StationModel s;
    s.lambda = j.at("lambda").get<double>();
    s.h = j.value("h", 1.0);
    if (j.contains("mu")) {
        s.mu = j.at("mu").get<std::vector<double>>();
    } else if (j.contains("nu")) {
        s = example1_station(s.lambda, j.at("mu_max").get<double>(), j.at("nu").get<double>(), j.at("S").get<int>(),
                             s.h);
    } else if (j.contains("eta")) {
        s = example2_station(s.lambda, j.at("mu_max").get<double>(), j.at("eta").get<double>(), j.at("S").get<int>(),
                             s.h);
    } else {
        throw std::invalid_argument("station needs 'mu', or 'mu_max' with 'nu' or 'eta'");
    }
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------
// Assets

inline json to_json(const AssetModel& m) {
    return json{{"kind", "asset"}, {"A", m.A}, {"R", m.R}, {"up", m.up}, {"down", m.down}, {"d", m.d}};
}

/// Explicit tables {"A", "R", "up", "down", "d"} or a generator block
/// {"generator": {"shape": flat|powerlaw|rescaled|counterexample, ...}}.
inline AssetModel asset_from_json(const json& j) {
    AssetModel m;
    if (j.contains("generator")) {
        const auto& g = j.at("generator");
        const auto shape = g.at("shape").get<std::string>();
        const auto ret = g.value("returns", std::string(shape == "flat" || shape == "counterexample" ? "concave"
                                                                                                     : "threshold"));
        const ReturnShape rs = ret == "concave" ? ReturnShape::concave : ReturnShape::threshold;
        if (ret != "concave" && ret != "threshold") throw std::invalid_argument("unknown return shape '" + ret + "'");
        if (shape == "counterexample") {
            m = counterexample_asset(g.value("phi", 1.30738), g.value("eta", 1.16393));
        } else if (shape == "flat") {
            m = flat_asset(g.at("phi").get<double>(), g.at("eta").get<double>(), g.value("R", 5));
            if (rs == ReturnShape::threshold) m.d = threshold_returns();
        } else if (shape == "powerlaw" || shape == "rescaled") {
            m = powerlaw_asset(g.at("phi").get<double>(), g.at("alpha").get<double>(), g.value("R", 10),
                               g.value("down_scale", 1.0), rs, shape == "rescaled" ? g.value("xi0", 12.0) : 0.0);
        } else {
            throw std::invalid_argument("unknown asset generator shape '" + shape + "'");
        }
    } else {
        m.A = j.at("A").get<int>();
        m.R = j.at("R").get<int>();
        m.up = j.at("up").get<std::vector<std::vector<double>>>();
        m.down = j.at("down").get<std::vector<std::vector<double>>>();
        m.d = j.at("d").get<std::vector<double>>();
    }
    m.validate();
    return m;
}

// ---------------------------------------------------------------------------
// Tables and families

inline json to_json(const IndexTable& t) {
    json rows = json::array();
    for (int a = 0; a < t.max_level(); ++a) {
        json row = json::array();
        for (int x = 0; x < t.states(); ++x) row.push_back(number_to_json(t(a, x)));
        rows.push_back(std::move(row));
    }
    return json{{"schema_version", kSchemaVersion}, {"max_level", t.max_level()}, {"states", t.states()},
                {"countable", t.countable()},       {"grid_limited", t.grid_limited()}, {"W", rows}};
}

inline IndexTable index_table_from_json(const json& j) {
    const int L = j.at("max_level").get<int>(), n = j.at("states").get<int>();
    std::vector<double> v;
    const auto& rows = j.at("W");
    if (rows.size() != static_cast<std::size_t>(L)) throw std::invalid_argument("index table row count mismatch");
    for (const auto& row : rows) {
        if (row.size() != static_cast<std::size_t>(n)) throw std::invalid_argument("index table row length mismatch");
        for (const auto& x : row) v.push_back(number_from_json(x));
    }
    return IndexTable(L, n, std::move(v), j.value("countable", false), j.value("grid_limited", false));
}

inline json to_json(const PolicyTable& p) {
    return json{{"levels", p.levels()}, {"max_level", p.max_level()}, {"monotone", p.monotone()}};
}

inline PolicyTable policy_table_from_json(const json& j) {
    return PolicyTable(j.at("levels").get<std::vector<int>>(), j.at("max_level").get<int>(),
                       j.value("monotone", false));
}

inline json to_json(const BreakpointSequence& seq) {
    json j{{"schema_version", kSchemaVersion},
           {"station", to_json(seq.station)},
           {"depth", seq.depth},
           {"complete", seq.complete},
           {"saturation_charge", number_to_json(seq.saturation_charge)},
           {"switch_state", seq.switch_state},
           {"full_service", seq.full_service}};
    json js = json::array();
    for (double x : seq.j) js.push_back(number_to_json(x));
    j["j"] = std::move(js);
    return j;
}

inline json to_json(const AssetBreakpoints& bp) {
    json pols = json::array();
    for (const auto& p : bp.policies) pols.push_back(p.levels());
    return json{{"schema_version", kSchemaVersion},
                {"asset", to_json(bp.asset)},
                {"h", bp.h},
                {"policies", pols},
                {"h_start", bp.h_start}};
}

// ---------------------------------------------------------------------------
// Systems

struct QueueSystem {
    std::vector<StationModel> stations;
    int S = 0;
    std::vector<int> caps;  // empty: default truncation
};

struct PlatesSystem {
    std::vector<AssetModel> assets;
    int R = 0;
};

inline QueueSystem queue_system_from_json(const json& j) {
    QueueSystem q;
    q.S = j.at("S").get<int>();
    for (const auto& s : j.at("stations")) {
        json e = s;
        if (!e.contains("S") && !e.contains("mu")) e["S"] = q.S;
        q.stations.push_back(station_from_json(e));
        if (q.stations.back().pool_size() != q.S) throw std::invalid_argument("station pool size differs from S");
    }
    if (j.contains("caps")) q.caps = j.at("caps").get<std::vector<int>>();
    return q;
}

inline PlatesSystem plates_system_from_json(const json& j) {
    PlatesSystem p;
    p.R = j.at("R").get<int>();
    for (const auto& a : j.at("assets")) {
        json e = a;
        if (e.contains("generator") && !e["generator"].contains("R")) e["generator"]["R"] = p.R;
        p.assets.push_back(asset_from_json(e));
    }
    return p;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("malformed JSON in '" + path + "': " + e.what());
    }
}

}  // namespace idxalloc
