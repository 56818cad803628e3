#pragma once

// Seeded problem generators, the Index/Static/Myopic/Optimal experiment
// runner and its order-statistic reports.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "idxalloc/asset.hpp"
#include "idxalloc/core.hpp"
#include "idxalloc/mdp.hpp"
#include "idxalloc/station.hpp"

namespace idxalloc {

inline constexpr int kSchemaVersion = 1;

/// SplitMix64 finalizer.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Per-instance stream: std::mt19937_64 seeded with
/// splitmix64(seed + 0x9E3779B97F4A7C15 * (index + 1)); uniforms use the top
/// 53 bits of each draw.
class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t index) : eng_(splitmix64(seed + 0x9E3779B97F4A7C15ULL * (index + 1))) {}

    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

private:
    std::mt19937_64 eng_;
};

enum class Family { example1, example2, plates_flat, plates_powerlaw, plates_rescaled };

inline std::string family_name(Family f) {
    switch (f) {
        case Family::example1: return "example1";
        case Family::example2: return "example2";
        case Family::plates_flat: return "plates-flat";
        case Family::plates_powerlaw: return "plates-powerlaw";
        case Family::plates_rescaled: return "plates-rescaled";
    }
    return "?";
}

inline Family parse_family(const std::string& s) {
    if (s == "example1") return Family::example1;
    if (s == "example2") return Family::example2;
    if (s == "plates-flat") return Family::plates_flat;
    if (s == "plates-powerlaw") return Family::plates_powerlaw;
    if (s == "plates-rescaled") return Family::plates_rescaled;
    throw std::invalid_argument("unknown model family '" + s + "'");
}

inline bool is_queueing(Family f) { return f == Family::example1 || f == Family::example2; }

enum class ReturnShape { concave, threshold };

struct Range {
    double lo = 0, hi = 0;
};

struct GeneratorConfig {
    std::string name;  // preset name, informational
    Family family = Family::example1;
    int K = 2;
    int S = 25;        // server pool (queueing)
    int R = 5;         // resource levels (plates)
    int problems = 50;
    std::uint64_t seed = 1;
    // Queueing: lambda1.., mu1.., nu1.. (example1) or eta1.. (example2).
    // Plates: phi, eta (flat), alpha (powerlaw, rescaled), shared by all assets.
    std::map<std::string, Range> ranges;
    std::vector<double> holding_costs;  // empty: h_k = 1
    std::vector<int> caps;              // empty: default truncation per station
    double down_scale = 1.0;            // eta(n) = down_scale * n for the power-law families
    double xi0 = 12.0;                  // rescaled family: xi(0)
    ReturnShape returns = ReturnShape::concave;
    std::vector<std::string> policies{"index", "static", "myopic", "optimal"};
    bool truncation_gate = false;       // grow caps by half until gamma_opt moves < 0.1%
    int resample_budget = 1000;
    bool paper_sourced = true;

    void validate() const {
        if (K < 1) throw std::invalid_argument("K must be at least 1");
        if (problems < 0) throw std::invalid_argument("problem count must be nonnegative");
        if (is_queueing(family) && S < 1) throw std::invalid_argument("S must be at least 1");
        if (!is_queueing(family) && R < 1) throw std::invalid_argument("R must be at least 1");
        for (const auto& [k, r] : ranges)
            if (!(r.lo < r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi))
                throw std::invalid_argument("range '" + k + "' is empty or inverted");
        auto need = [&](const std::string& key) {
            if (!ranges.count(key)) throw std::invalid_argument("missing range '" + key + "'");
        };
        if (is_queueing(family)) {
            const std::string shape = family == Family::example1 ? "nu" : "eta";
            for (int k = 1; k <= K; ++k) {
                need("lambda" + std::to_string(k));
                need("mu" + std::to_string(k));
                need(shape + std::to_string(k));
                const auto& r = ranges.at(shape + std::to_string(k));
                if (family == Family::example1 && r.lo < 0.05)
                    throw std::invalid_argument("nu ranges must stay at or above 0.05");
                if (family == Family::example2 && (r.lo <= 0 || r.hi > 1.4))
                    throw std::invalid_argument("eta ranges must lie in (0, 1.4]");
            }
            if (!holding_costs.empty() && holding_costs.size() != static_cast<std::size_t>(K))
                throw std::invalid_argument("one holding cost per station is required");
            if (!caps.empty() && caps.size() != static_cast<std::size_t>(K))
                throw std::invalid_argument("one cap per station is required");
        } else {
            need("phi");
            if (family == Family::plates_flat) need("eta");
            else need("alpha");
        }
        for (const auto& p : policies)
            if (p != "index" && p != "static" && p != "myopic" && p != "optimal")
                throw std::invalid_argument("unknown policy '" + p + "'");
    }

    double holding_cost(int k) const { return holding_costs.empty() ? 1.0 : holding_costs[k]; }
    bool wants(const std::string& p) const { return std::find(policies.begin(), policies.end(), p) != policies.end(); }
};

/// Built-in presets: G7, J7, G14, J14 (queueing), broad (queueing, not from
/// the published tables), tabs5, tabs6, tabs7, tabs8a..tabs8d (plates).
inline GeneratorConfig preset(const std::string& name) {
    GeneratorConfig c;
    c.name = name;
    auto queue_common = [&](Family f) {
        c.family = f;
        c.K = 2;
        c.S = 25;
        c.policies = {"index", "static", "optimal"};
        c.ranges["lambda1"] = {0.8, 1.1};
        c.ranges["lambda2"] = {1.6, 2.2};
        c.ranges["mu1"] = {1.5, 1.8};
    };
    if (name == "G7" || name == "J7") {
        queue_common(Family::example1);
        c.ranges["mu2"] = name == "G7" ? Range{3.0, 3.6} : Range{4.4, 5.0};
        c.ranges["nu1"] = {5.0, 10.0};
        c.ranges["nu2"] = {0.5, 2.0};
    } else if (name == "G14" || name == "J14") {
        queue_common(Family::example2);
        c.ranges["mu2"] = name == "G14" ? Range{3.0, 3.6} : Range{4.4, 5.0};
        c.ranges["eta1"] = {0.07, 0.125};
        c.ranges["eta2"] = {0.2, 0.3};
    } else if (name == "broad") {
        queue_common(Family::example1);
        c.ranges["mu2"] = {3.0, 5.0};
        c.ranges["nu1"] = {5.0, 10.0};
        c.ranges["nu2"] = {0.5, 2.0};
        c.paper_sourced = false;
    } else if (name == "tabs5") {
        c.family = Family::plates_flat;
        c.R = 5;
        c.ranges["phi"] = {0.75, 5.0};
        c.ranges["eta"] = {0.75, 1.25};
        c.problems = 100;
    } else if (name == "tabs6" || name == "tabs7") {
        c.family = Family::plates_powerlaw;
        c.R = name == "tabs6" ? 10 : 5;
        c.down_scale = name == "tabs6" ? 1.0 : 0.5;
        c.returns = ReturnShape::threshold;
        c.ranges["phi"] = {0.75, 5.0};
        c.ranges["alpha"] = {1.05, 1.50};
    } else if (name.size() == 6 && name.rfind("tabs8", 0) == 0 && name[5] >= 'a' && name[5] <= 'd') {
        c.family = Family::plates_rescaled;
        c.R = 10;
        c.returns = ReturnShape::threshold;
        c.ranges["phi"] = {0.75, 5.0};
        const double lo = 1.05 + 0.15 * (name[5] - 'a');
        c.ranges["alpha"] = {lo, lo + 0.15};
    } else {
        throw std::invalid_argument("unknown preset '" + name + "'");
    }
    return c;
}

inline std::vector<std::string> preset_names() {
    return {"G7", "J7", "G14", "J14", "broad", "tabs5", "tabs6", "tabs7", "tabs8a", "tabs8b", "tabs8c", "tabs8d"};
}

// ---------------------------------------------------------------------------
// JSON for configs

inline void to_json(nlohmann::json& j, const GeneratorConfig& c) {
    j = nlohmann::json{{"schema_version", kSchemaVersion},
                       {"name", c.name},
                       {"family", family_name(c.family)},
                       {"K", c.K},
                       {"problems", c.problems},
                       {"seed", c.seed},
                       {"policies", c.policies},
                       {"paper_sourced", c.paper_sourced}};
    if (is_queueing(c.family)) {
        j["S"] = c.S;
        j["holding_costs"] = c.holding_costs;
        j["caps"] = c.caps;
        j["truncation_gate"] = c.truncation_gate;
    } else {
        j["R"] = c.R;
        j["returns"] = c.returns == ReturnShape::concave ? "concave" : "threshold";
        if (c.family != Family::plates_flat) j["down_scale"] = c.down_scale;
        if (c.family == Family::plates_rescaled) j["xi0"] = c.xi0;
    }
    auto& r = j["ranges"];
    r = nlohmann::json::object();
    for (const auto& [k, v] : c.ranges) r[k] = {v.lo, v.hi};
}

/// Reads a config; a "preset" key supplies defaults that other keys override.
inline GeneratorConfig config_from_json(const nlohmann::json& j) {
    if (j.contains("schema_version") && j.at("schema_version").get<int>() != kSchemaVersion)
        throw std::invalid_argument("unsupported config schema_version");
    GeneratorConfig c;
    if (j.contains("preset")) c = preset(j.at("preset").get<std::string>());
    if (j.contains("name")) c.name = j.at("name").get<std::string>();
    if (j.contains("family")) c.family = parse_family(j.at("family").get<std::string>());
    if (j.contains("K")) c.K = j.at("K").get<int>();
    if (j.contains("S")) c.S = j.at("S").get<int>();
    if (j.contains("R")) c.R = j.at("R").get<int>();
    if (j.contains("problems")) c.problems = j.at("problems").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("holding_costs")) c.holding_costs = j.at("holding_costs").get<std::vector<double>>();
    if (j.contains("caps")) c.caps = j.at("caps").get<std::vector<int>>();
    if (j.contains("down_scale")) c.down_scale = j.at("down_scale").get<double>();
    if (j.contains("xi0")) c.xi0 = j.at("xi0").get<double>();
    if (j.contains("truncation_gate")) c.truncation_gate = j.at("truncation_gate").get<bool>();
    if (j.contains("paper_sourced")) c.paper_sourced = j.at("paper_sourced").get<bool>();
    if (j.contains("resample_budget")) c.resample_budget = j.at("resample_budget").get<int>();
    if (j.contains("policies")) c.policies = j.at("policies").get<std::vector<std::string>>();
    if (j.contains("returns")) {
        const auto s = j.at("returns").get<std::string>();
        if (s == "concave") c.returns = ReturnShape::concave;
        else if (s == "threshold") c.returns = ReturnShape::threshold;
        else throw std::invalid_argument("unknown return shape '" + s + "'");
    }
    if (j.contains("ranges"))
        for (const auto& [k, v] : j.at("ranges").items()) {
            if (!v.is_array() || v.size() != 2) throw std::invalid_argument("range '" + k + "' must be [lo, hi]");
            c.ranges[k] = {v[0].get<double>(), v[1].get<double>()};
        }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Generators

using Params = std::vector<std::pair<std::string, double>>;

struct QueueInstance {
    std::vector<StationModel> stations;
    Params params;
    int resamples = 0;
};

struct PlatesInstance {
    std::vector<AssetModel> assets;
    Params params;
    int resamples = 0;
};

inline std::vector<double> concave_returns(int A) {
    std::vector<double> d(static_cast<std::size_t>(A) + 1);
    for (int n = 0; n <= A; ++n) d[n] = n / (n + 1.0);
    return d;
}

/// 0 up to state 4, (n-4)/5 for 5..8, 1 at 9 and 10.
inline std::vector<double> threshold_returns() {
    std::vector<double> d(11);
    for (int n = 0; n <= 10; ++n) d[n] = n <= 4 ? 0.0 : (n <= 8 ? (n - 4) / 5.0 : 1.0);
    return d;
}

/// {11^alpha - (n+1)^alpha} (n+1)^(1-alpha)
inline double powerlaw_up(double alpha, int n) {
    return (std::pow(11.0, alpha) - std::pow(n + 1.0, alpha)) * std::pow(n + 1.0, 1.0 - alpha);
}

/// mu(a) = a / (a + nu) * mu_max, a = 0..S
inline StationModel example1_station(double lambda, double mu_max, double nu, int S, double h = 1.0) {
    StationModel s{lambda, {}, h};
    for (int a = 0; a <= S; ++a) s.mu.push_back(a / (a + nu) * mu_max);
    return s;
}

/// mu(a) = (1 - exp(-a eta)) mu_max, a = 0..S
inline StationModel example2_station(double lambda, double mu_max, double eta, int S, double h = 1.0) {
    StationModel s{lambda, {}, h};
    for (int a = 0; a <= S; ++a) s.mu.push_back(-std::expm1(-a * eta) * mu_max);
    return s;
}

inline AssetModel flat_asset(double phi, double eta, int R, int A = 10) {
    return AssetModel::from_functions(
        A, R, [phi](int a, int) { return a / (a + phi); }, [phi, eta](int a, int) { return phi / (a + phi) * eta; },
        concave_returns(A));
}

/// Power-law up rates, eta(n) = down_scale * n; xi rescaled to xi(0) = xi0 when xi0 > 0.
inline AssetModel powerlaw_asset(double phi, double alpha, int R, double down_scale, ReturnShape shape,
                                 double xi0 = 0.0) {
    const double norm = xi0 > 0 ? xi0 / powerlaw_up(alpha, 0) : 1.0;
    return AssetModel::from_functions(
        10, R, [=](int a, int n) { return a / (a + phi) * norm * powerlaw_up(alpha, n); },
        [=](int a, int n) { return phi / (a + phi) * down_scale * n; },
        shape == ReturnShape::concave ? concave_returns(10) : threshold_returns());
}

namespace detail {
inline double draw(Rng& rng, const GeneratorConfig& c, const std::string& key, Params& p,
                   const std::string& label = "") {
    const auto& r = c.ranges.at(key);
    const double v = rng.uniform(r.lo, r.hi);
    p.emplace_back(label.empty() ? key : label, v);
    return v;
}
}  // namespace detail

/// One queueing instance (example1 or example2), resampled until it passes
/// Assumption 1 and every station invariant.
inline QueueInstance generate_queue_instance(const GeneratorConfig& c, std::uint64_t index) {
    if (!is_queueing(c.family)) throw std::invalid_argument("queueing family required");
    Rng rng(c.seed, index);
    const std::string shape = c.family == Family::example1 ? "nu" : "eta";
    for (int attempt = 0; attempt <= c.resample_budget; ++attempt) {
        QueueInstance inst;
        inst.resamples = attempt;
        std::vector<double> lam(c.K), mu(c.K), sh(c.K);
        for (int k = 0; k < c.K; ++k) lam[k] = detail::draw(rng, c, "lambda" + std::to_string(k + 1), inst.params);
        for (int k = 0; k < c.K; ++k) mu[k] = detail::draw(rng, c, "mu" + std::to_string(k + 1), inst.params);
        for (int k = 0; k < c.K; ++k) sh[k] = detail::draw(rng, c, shape + std::to_string(k + 1), inst.params);
        for (int k = 0; k < c.K; ++k)
            inst.stations.push_back(c.family == Family::example1
                                        ? example1_station(lam[k], mu[k], sh[k], c.S, c.holding_cost(k))
                                        : example2_station(lam[k], mu[k], sh[k], c.S, c.holding_cost(k)));
        if (check_assumption1(inst.stations, c.S).pass) return inst;
    }
    throw std::runtime_error("resample budget exhausted for instance " + std::to_string(index));
}

inline PlatesInstance generate_plates_instance(const GeneratorConfig& c, std::uint64_t index) {
    if (is_queueing(c.family)) throw std::invalid_argument("plates family required");
    Rng rng(c.seed, index);
    for (int attempt = 0; attempt <= c.resample_budget; ++attempt) {
        PlatesInstance inst;
        inst.resamples = attempt;
        bool ok = true;
        for (int k = 0; k < c.K; ++k) {
            const std::string id = std::to_string(k + 1);
            const double phi = detail::draw(rng, c, "phi", inst.params, "phi" + id);
            AssetModel m;
            if (c.family == Family::plates_flat) {
                const double eta = detail::draw(rng, c, "eta", inst.params, "eta" + id);
                m = flat_asset(phi, eta, c.R);
                if (c.returns == ReturnShape::threshold && m.A == 10) m.d = threshold_returns();
            } else {
                const double alpha = detail::draw(rng, c, "alpha", inst.params, "alpha" + id);
                m = powerlaw_asset(phi, alpha, c.R, c.down_scale, c.returns,
                                   c.family == Family::plates_rescaled ? c.xi0 : 0.0);
            }
            ok = ok && m.violations().empty();
            inst.assets.push_back(std::move(m));
        }
        if (ok) return inst;
    }
    throw std::runtime_error("resample budget exhausted for instance " + std::to_string(index));
}

inline std::vector<QueueInstance> generate_example1(const GeneratorConfig& c) {
    if (c.family != Family::example1) throw std::invalid_argument("example1 family required");
    std::vector<QueueInstance> out;
    for (int i = 0; i < c.problems; ++i) out.push_back(generate_queue_instance(c, static_cast<std::uint64_t>(i)));
    return out;
}

inline std::vector<QueueInstance> generate_example2(const GeneratorConfig& c) {
    if (c.family != Family::example2) throw std::invalid_argument("example2 family required");
    std::vector<QueueInstance> out;
    for (int i = 0; i < c.problems; ++i) out.push_back(generate_queue_instance(c, static_cast<std::uint64_t>(i)));
    return out;
}

inline std::vector<PlatesInstance> generate_plates(const GeneratorConfig& c) {
    std::vector<PlatesInstance> out;
    for (int i = 0; i < c.problems; ++i) out.push_back(generate_plates_instance(c, static_cast<std::uint64_t>(i)));
    return out;
}

// ---------------------------------------------------------------------------
// Experiment runner

struct OrderStats {
    int n = 0;
    double min = NAN, lq = NAN, med = NAN, uq = NAN, max = NAN;
};

/// Linear interpolation between order statistics (type 7).
inline double quantile7(std::vector<double> x, double p) {
    if (x.empty()) return NAN;
    std::sort(x.begin(), x.end());
    const double h = (static_cast<double>(x.size()) - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, x.size() - 1);
    return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

inline OrderStats order_stats(const std::vector<double>& x) {
    OrderStats s;
    s.n = static_cast<int>(x.size());
    if (x.empty()) return s;
    s.min = *std::min_element(x.begin(), x.end());
    s.max = *std::max_element(x.begin(), x.end());
    s.lq = quantile7(x, 0.25);
    s.med = quantile7(x, 0.5);
    s.uq = quantile7(x, 0.75);
    return s;
}

struct InstanceRow {
    int instance_id = 0;
    std::uint64_t seed = 0;
    Params params;
    double gamma_opt = NAN, gamma_index = NAN, gamma_static = NAN, gamma_myopic = NAN;
    double pct_index = NAN, pct_static = NAN, pct_myopic = NAN;
    std::vector<int> caps;
    long long solver_sweeps = 0;
    int resamples = 0;
    double charge_ceiling = NAN;  // queueing: saturation level of the index tables
    double gate_change = NAN;     // relative gamma_opt change at 1.5x caps, when gated
};

struct InstanceFailure {
    int instance_id = 0;
    std::string message;
};

struct SuboptimalityReport {
    GeneratorConfig config;
    std::vector<InstanceRow> rows;
    std::vector<InstanceFailure> failures;
    std::map<std::string, OrderStats> summary;  // index, static, myopic
    Sense sense = Sense::minimize_cost;
};

namespace detail {

inline InstanceRow run_queue_instance(const GeneratorConfig& c, int i) {
    const auto inst = generate_queue_instance(c, static_cast<std::uint64_t>(i));
    InstanceRow row;
    row.instance_id = i;
    row.seed = c.seed;
    row.params = inst.params;
    row.resamples = inst.resamples;
    std::vector<int> caps = c.caps;
    if (caps.empty())
        for (const auto& s : inst.stations) caps.push_back(default_queue_cap(s));
    row.caps = caps;

    auto mdp = build_joint(inst.stations, c.S, caps);
    auto opt = policy_iteration(mdp);
    if (c.truncation_gate) {
        // Grow one station's cap by half at a time, keeping the growth while
        // gamma_opt still moves by 0.1% or more.
        constexpr int kMaxGrowth = 6;
        std::vector<int> grown(caps.size(), 0);
        std::vector<bool> settled(caps.size(), false);
        row.gate_change = 0;
        for (bool again = true; again;) {
            again = false;
            for (std::size_t k = 0; k < caps.size(); ++k) {
                if (settled[k]) continue;
                auto big = caps;
                big[k] += (big[k] + 1) / 2;
                auto mdp2 = build_joint(inst.stations, c.S, big);
                const auto warm = policy_from_rule(mdp2, [&](std::span<const int> x) {
                    std::vector<int> y(x.begin(), x.end());
                    for (std::size_t q = 0; q < y.size(); ++q) y[q] = std::min(y[q], caps[q]);
                    const auto a = mdp.action(static_cast<std::size_t>(opt.policy[mdp.encode(y)]));
                    return std::vector<int>(a.begin(), a.end());
                });
                auto opt2 = policy_iteration(mdp2, warm);
                const double change = std::abs(opt2.gain - opt.gain) / opt.gain;
                if (change < 1e-3) {
                    settled[k] = true;
                    row.gate_change = std::max(row.gate_change, change);
                    continue;
                }
                if (++grown[k] > kMaxGrowth)
                    throw SolverError("truncation gate: gamma_opt still moved by " + std::to_string(100 * change) +
                                      "% after growing cap " + std::to_string(k + 1) + " to " +
                                      std::to_string(big[k]));
                caps = std::move(big);
                mdp = std::move(mdp2);
                opt = std::move(opt2);
                std::fill(settled.begin(), settled.end(), false);
                again = true;
            }
        }
        row.caps = caps;
    }
    std::optional<JointPolicy> idx_policy;
    if (c.wants("index")) {
        auto tables = pool_station_indices(inst.stations, c.S, caps, 1.0);
        row.charge_ceiling = tables.charge_ceiling;
        idx_policy = index_policy(mdp, tables.tables);
    }
    row.gamma_opt = opt.gain;
    row.solver_sweeps = opt.sweeps;
    if (c.wants("index")) row.gamma_index = evaluate_policy(mdp, *idx_policy).gain;
    if (c.wants("static")) {
        auto st = best_static(inst.stations, c.S);
        row.gamma_static = std::isfinite(st.gain) ? evaluate_policy(mdp, constant_policy(mdp, st.allocation)).gain
                                                  : kInf;
    }
    const Sense s = Sense::minimize_cost;
    if (c.wants("index")) row.pct_index = percentage_excess(row.gamma_index, row.gamma_opt, s);
    if (c.wants("static")) row.pct_static = percentage_excess(row.gamma_static, row.gamma_opt, s);
    return row;
}

inline InstanceRow run_plates_instance(const GeneratorConfig& c, int i) {
    const auto inst = generate_plates_instance(c, static_cast<std::uint64_t>(i));
    InstanceRow row;
    row.instance_id = i;
    row.seed = c.seed;
    row.params = inst.params;
    row.resamples = inst.resamples;
    for (const auto& m : inst.assets) row.caps.push_back(m.A);

    const auto mdp = build_joint(inst.assets, c.R);
    std::optional<JointPolicy> idx_policy;
    if (c.wants("index") || c.wants("optimal")) {
        std::vector<IndexTable> tables;
        for (const auto& m : inst.assets) tables.push_back(asset_indices(m));
        idx_policy = index_policy(mdp, tables);
        if (c.wants("index")) row.gamma_index = evaluate_policy(mdp, *idx_policy).gain;
    }
    auto opt = policy_iteration(mdp, idx_policy ? *idx_policy : JointPolicy{});
    row.gamma_opt = opt.gain;
    row.solver_sweeps = opt.sweeps;
    if (c.wants("static")) row.gamma_static = best_static(inst.assets, c.R).gain;
    if (c.wants("myopic")) {
        const auto pol = policy_from_rule(
            mdp, [&](std::span<const int> x) { return myopic_action(inst.assets, x, c.R); });
        row.gamma_myopic = evaluate_policy(mdp, pol).gain;
    }
    const Sense s = Sense::maximize_reward;
    if (c.wants("index")) row.pct_index = percentage_excess(row.gamma_index, row.gamma_opt, s);
    if (c.wants("static")) row.pct_static = percentage_excess(row.gamma_static, row.gamma_opt, s);
    if (c.wants("myopic")) row.pct_myopic = percentage_excess(row.gamma_myopic, row.gamma_opt, s);
    return row;
}

}  // namespace detail

/// Generates and solves every instance; instance i always uses the stream
/// derived from (seed, i), so results do not depend on `jobs`.
inline SuboptimalityReport run_experiment(const GeneratorConfig& config, int jobs = 1,
                                          const std::function<void(int, int)>& progress = {}) {
    config.validate();
    SuboptimalityReport rep;
    rep.config = config;
    rep.sense = is_queueing(config.family) ? Sense::minimize_cost : Sense::maximize_reward;
    const int n = config.problems;
    std::vector<std::optional<InstanceRow>> rows(static_cast<std::size_t>(n));
    std::vector<std::string> errors(static_cast<std::size_t>(n));
    std::atomic<int> next{0}, done{0};
    std::mutex progress_mu;
    auto worker = [&] {
        for (int i = next++; i < n; i = next++) {
            try {
                rows[i] = is_queueing(config.family) ? detail::run_queue_instance(config, i)
                                                     : detail::run_plates_instance(config, i);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
            const int d = ++done;
            if (progress) {
                std::lock_guard lock(progress_mu);
                progress(d, n);
            }
        }
    };
    jobs = std::max(1, std::min(jobs, std::max(n, 1)));
    std::vector<std::thread> pool;
    for (int t = 1; t < jobs; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    for (int i = 0; i < n; ++i) {
        if (rows[i]) rep.rows.push_back(std::move(*rows[i]));
        else rep.failures.push_back({i, errors[i]});
    }
    std::vector<double> pi, ps, pm;
    for (const auto& r : rep.rows) {
        if (!std::isnan(r.pct_index)) pi.push_back(r.pct_index);
        if (!std::isnan(r.pct_static)) ps.push_back(r.pct_static);
        if (!std::isnan(r.pct_myopic)) pm.push_back(r.pct_myopic);
    }
    if (config.wants("index")) rep.summary["index"] = order_stats(pi);
    if (config.wants("static")) rep.summary["static"] = order_stats(ps);
    if (config.wants("myopic") && !is_queueing(config.family)) rep.summary["myopic"] = order_stats(pm);
    if (config.wants("optimal")) rep.summary["optimal"] = order_stats(std::vector<double>(rep.rows.size(), 0.0));
    return rep;
}

// ---------------------------------------------------------------------------
// Report output

namespace detail {
inline std::string fmt(double x) {
    if (std::isnan(x)) return "";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    std::ostringstream o;
    o.precision(10);
    o << x;
    return o.str();
}
inline nlohmann::json jnum(double x) {
    if (std::isnan(x)) return nullptr;
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
}
}  // namespace detail

inline void write_csv(std::ostream& os, const SuboptimalityReport& rep) {
    os << "instance_id,seed";
    if (!rep.rows.empty())
        for (const auto& [k, v] : rep.rows.front().params) os << ',' << k;
    os << ",gamma_opt,gamma_index,gamma_static,gamma_myopic,pct_index,pct_static,pct_myopic,caps,solver_sweeps\n";
    for (const auto& r : rep.rows) {
        os << r.instance_id << ',' << r.seed;
        for (const auto& [k, v] : r.params) os << ',' << detail::fmt(v);
        using detail::fmt;
        os << ',' << fmt(r.gamma_opt) << ',' << fmt(r.gamma_index) << ',' << fmt(r.gamma_static) << ','
           << fmt(r.gamma_myopic) << ',' << fmt(r.pct_index) << ',' << fmt(r.pct_static) << ','
           << fmt(r.pct_myopic) << ',';
        for (std::size_t k = 0; k < r.caps.size(); ++k) os << (k ? ";" : "") << r.caps[k];
        os << ',' << r.solver_sweeps << '\n';
    }
    os << "\n# summary (" << (rep.sense == Sense::minimize_cost ? "percentage cost rate excess over optimum"
                                                                 : "percentage return rate below optimum")
       << ")\npolicy,N,MIN,LQ,MED,UQ,MAX\n";
    for (const char* p : {"index", "static", "myopic"}) {
        auto it = rep.summary.find(p);
        if (it == rep.summary.end()) continue;
        const auto& s = it->second;
        using detail::fmt;
        os << p << ',' << s.n << ',' << fmt(s.min) << ',' << fmt(s.lq) << ',' << fmt(s.med) << ',' << fmt(s.uq)
           << ',' << fmt(s.max) << '\n';
    }
    os << "# failures," << rep.failures.size() << '\n';
    for (const auto& f : rep.failures) os << "# failure," << f.instance_id << ',' << f.message << '\n';
}

inline nlohmann::json report_json(const SuboptimalityReport& rep) {
    using detail::jnum;
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["config"] = rep.config;
    j["sense"] = rep.sense == Sense::minimize_cost ? "minimize-cost" : "maximize-reward";
    auto& rows = j["rows"] = nlohmann::json::array();
    for (const auto& r : rep.rows) {
        nlohmann::json row{{"instance_id", r.instance_id},
                           {"seed", r.seed},
                           {"gamma_opt", jnum(r.gamma_opt)},
                           {"gamma_index", jnum(r.gamma_index)},
                           {"gamma_static", jnum(r.gamma_static)},
                           {"gamma_myopic", jnum(r.gamma_myopic)},
                           {"pct_index", jnum(r.pct_index)},
                           {"pct_static", jnum(r.pct_static)},
                           {"pct_myopic", jnum(r.pct_myopic)},
                           {"caps", r.caps},
                           {"solver_sweeps", r.solver_sweeps},
                           {"resamples", r.resamples}};
        auto& p = row["params"] = nlohmann::json::object();
        for (const auto& [k, v] : r.params) p[k] = v;
        if (!std::isnan(r.charge_ceiling)) row["charge_ceiling"] = jnum(r.charge_ceiling);
        if (!std::isnan(r.gate_change)) row["gate_change"] = r.gate_change;
        rows.push_back(std::move(row));
    }
    auto& sum = j["summary"] = nlohmann::json::object();
    for (const auto& [k, s] : rep.summary)
        sum[k] = {{"N", s.n}, {"MIN", jnum(s.min)}, {"LQ", jnum(s.lq)}, {"MED", jnum(s.med)},
                  {"UQ", jnum(s.uq)}, {"MAX", jnum(s.max)}};
    auto& fails = j["failures"] = nlohmann::json::array();
    for (const auto& f : rep.failures) fails.push_back({{"instance_id", f.instance_id}, {"message", f.message}});
    return j;
}

}  // namespace idxalloc
