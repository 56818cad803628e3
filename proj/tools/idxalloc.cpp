// idxalloc: index tables, policy evaluation, experiments and replication checks.
//
// Exit codes: 0 success, 1 validation failure, 2 usage or input error,
// 3 solver failure.

#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "idxalloc/idxalloc.hpp"

using namespace idxalloc;

namespace {

enum Exit { kOk = 0, kValidation = 1, kUsage = 2, kSolver = 3 };

struct Options {
    std::string model, config, preset, out, format = "json", policy = "all";
    std::optional<std::uint64_t> seed;
    std::optional<int> problems;
    std::optional<int> cap;
    std::optional<double> h;
    double tol = 1e-8;
    double max_charge = 1e3;
    int jobs = 1;
    bool quiet = false;
};

class Output {
public:
    explicit Output(const std::string& path) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) throw std::invalid_argument("cannot write '" + path + "'");
        }
    }
    std::ostream& os() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

void write_table_csv(std::ostream& os, const IndexTable& t, const std::string& label) {
    os << "project,a";
    for (int x = 0; x < t.states(); ++x) os << ",x" << x;
    os << '\n';
    for (int a = 0; a < t.max_level(); ++a) {
        os << label << ',' << a;
        for (int x = 0; x < t.states(); ++x) {
            const double w = t(a, x);
            os << ',';
            if (std::isinf(w)) os << "inf";
            else os << w;
        }
        os << '\n';
    }
}

std::string model_kind(const json& j) {
    if (j.contains("kind")) return j.at("kind").get<std::string>();
    if (j.contains("stations")) return "queueing-system";
    if (j.contains("assets")) return "plates-system";
    if (j.contains("lambda")) return "station";
    return "asset";
}

BreakpointSequence station_sequence(const StationModel& s, int depth, double max_charge) {
    BreakpointOptions opt;
    opt.depth = depth;
    opt.min_j = s.h / max_charge;
    return compute_breakpoints(s, opt);
}

// ---------------------------------------------------------------------------

int cmd_indices(const Options& o) {
    const json m = read_json_file(o.model);
    const std::string kind = model_kind(m);
    std::vector<std::pair<std::string, IndexTable>> tables;
    json extra = json::array();
    if (kind == "station") {
        const auto s = station_from_json(m);
        const auto seq = station_sequence(s, o.cap.value_or(50), o.max_charge);
        tables.emplace_back("station", station_indices(seq, seq.depth));
        extra.push_back(to_json(seq));
    } else if (kind == "asset") {
        const auto bp = asset_breakpoints(asset_from_json(m));
        tables.emplace_back("asset", asset_indices(bp));
        extra.push_back(to_json(bp));
    } else if (kind == "queueing-system") {
        auto q = queue_system_from_json(m);
        std::vector<int> caps = q.caps;
        if (o.cap) caps.assign(q.stations.size(), *o.cap);
        if (caps.empty())
            for (const auto& s : q.stations) caps.push_back(default_queue_cap(s));
        auto pool = pool_station_indices(q.stations, q.S, caps, 1.0);
        for (std::size_t k = 0; k < pool.tables.size(); ++k) {
            tables.emplace_back("station" + std::to_string(k + 1), pool.tables[k]);
            extra.push_back(to_json(pool.sequences[k]));
        }
    } else if (kind == "plates-system") {
        const auto p = plates_system_from_json(m);
        for (std::size_t k = 0; k < p.assets.size(); ++k) {
            const auto bp = asset_breakpoints(p.assets[k]);
            tables.emplace_back("asset" + std::to_string(k + 1), asset_indices(bp));
            extra.push_back(to_json(bp));
        }
    } else {
        throw std::invalid_argument("unknown model kind '" + kind + "'");
    }

    Output out(o.out);
    if (o.format == "csv") {
        for (const auto& [label, t] : tables) write_table_csv(out.os(), t, label);
    } else {
        json j{{"schema_version", kSchemaVersion}, {"kind", kind}};
        json arr = json::array();
        for (std::size_t i = 0; i < tables.size(); ++i) {
            json t = to_json(tables[i].second);
            t["project"] = tables[i].first;
            t["family"] = extra[i];
            arr.push_back(std::move(t));
        }
        j["tables"] = std::move(arr);
        out.os() << j.dump(2) << '\n';
    }
    return kOk;
}

// ---------------------------------------------------------------------------

int cmd_solve(const Options& o) {
    const json m = read_json_file(o.model);
    const std::string kind = model_kind(m);
    SolverOptions so;
    so.tol = o.tol;
    json j{{"schema_version", kSchemaVersion}, {"kind", kind}};
    auto wants = [&](const std::string& p) { return o.policy == "all" || o.policy == p; };
    if (o.policy != "all" && o.policy != "index" && o.policy != "static" && o.policy != "myopic" &&
        o.policy != "optimal")
        throw std::invalid_argument("--policy must be one of all, index, static, myopic, optimal");

    if (kind == "station" || kind == "asset") {
        if (!o.h) throw std::invalid_argument("single-project models need --charge (the charge multiplier)");
        if (kind == "station") {
            const auto s = station_from_json(m);
            const int cap = o.cap.value_or(default_queue_cap(s));
            const auto mdp = station_q_mdp(s, *o.h, cap);
            const auto sol = policy_iteration(mdp, {}, so);
            j["h"] = *o.h;
            j["cap"] = cap;
            j["gain"] = sol.gain;
            j["policy"] = single_project_levels(mdp, sol.policy).levels();
        } else {
            const auto a = asset_from_json(m);
            const auto sol = solve_q_asset(a, *o.h);
            j["h"] = *o.h;
            j["gain"] = sol.gain;
            j["policy"] = sol.policy.levels();
        }
    } else if (kind == "queueing-system") {
        auto q = queue_system_from_json(m);
        std::vector<int> caps = q.caps;
        if (o.cap) caps.assign(q.stations.size(), *o.cap);
        if (caps.empty())
            for (const auto& s : q.stations) caps.push_back(default_queue_cap(s));
        const auto mdp = build_joint(q.stations, q.S, caps);
        j["caps"] = caps;
        JointPolicy idx;
        if (wants("index") || wants("optimal")) {
            idx = index_policy(mdp, pool_station_indices(q.stations, q.S, caps, 1.0).tables);
            if (wants("index")) j["gamma_index"] = evaluate_policy(mdp, idx, 200000, so).gain;
        }
        if (wants("static")) {
            const auto st = best_static(q.stations, q.S);
            j["static_allocation"] = st.allocation;
            j["gamma_static_closed_form"] = number_to_json(st.gain);
            if (std::isfinite(st.gain))
                j["gamma_static"] = evaluate_policy(mdp, constant_policy(mdp, st.allocation), 200000, so).gain;
        }
        if (wants("optimal")) j["gamma_opt"] = policy_iteration(mdp, idx, so).gain;
    } else if (kind == "plates-system") {
        const auto p = plates_system_from_json(m);
        const auto mdp = build_joint(p.assets, p.R);
        JointPolicy idx;
        if (wants("index") || wants("optimal")) {
            std::vector<IndexTable> t;
            for (const auto& a : p.assets) t.push_back(asset_indices(a));
            idx = index_policy(mdp, t);
            if (wants("index")) j["gamma_index"] = evaluate_policy(mdp, idx, 200000, so).gain;
        }
        if (wants("static")) {
            const auto st = best_static(p.assets, p.R);
            j["static_allocation"] = st.allocation;
            j["gamma_static"] = st.gain;
        }
        if (wants("myopic")) {
            const auto pol = policy_from_rule(
                mdp, [&](std::span<const int> x) { return myopic_action(p.assets, x, p.R); });
            j["gamma_myopic"] = evaluate_policy(mdp, pol, 200000, so).gain;
        }
        if (wants("optimal")) j["gamma_opt"] = policy_iteration(mdp, idx, so).gain;
    } else {
        throw std::invalid_argument("unknown model kind '" + kind + "'");
    }
    Output out(o.out);
    out.os() << j.dump(2) << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------

int cmd_experiment(const Options& o) {
    if (o.config.empty() == o.preset.empty()) throw std::invalid_argument("give exactly one of --config or --preset");
    GeneratorConfig c = o.config.empty() ? preset(o.preset) : config_from_json(read_json_file(o.config));
    if (o.seed) c.seed = *o.seed;
    if (o.problems) c.problems = *o.problems;
    if (o.cap) c.caps.assign(static_cast<std::size_t>(c.K), *o.cap);
    c.validate();
    std::function<void(int, int)> progress;
    if (!o.quiet)
        progress = [](int done, int total) { std::cerr << "\r" << done << "/" << total << " instances" << std::flush; };
    const auto rep = run_experiment(c, o.jobs, progress);
    if (!o.quiet) std::cerr << '\n';
    Output out(o.out);
    if (o.format == "csv") write_csv(out.os(), rep);
    else out.os() << report_json(rep).dump(2) << '\n';
    return rep.failures.empty() ? kOk : kSolver;
}

// ---------------------------------------------------------------------------

int cmd_golden(const Options& o) {
    bool ok = true;
    Output out(o.out);
    for (const auto& c : golden::run_all()) {
        out.os() << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
        ok = ok && c.pass;
    }
    return ok ? kOk : kValidation;
}

// ---------------------------------------------------------------------------

std::vector<std::string> validate_station(const StationModel& s, int depth, double max_charge) {
    std::vector<std::string> out;
    const auto seq = station_sequence(s, depth, max_charge);
    std::map<double, std::vector<PolicyTable>> fam;
    for (const auto& [w, u] : seq.charge_family(depth)) fam[w].push_back(u);
    for (const auto& v : validate_full_indexability(fam).violations)
        out.push_back("nesting violated at state " + std::to_string(v.state));
    const auto t = station_indices(seq, depth);
    for (auto [a, x] : t.level_monotonicity_violations(1e-12))
        out.push_back("W increases in a at (" + std::to_string(a) + "," + std::to_string(x) + ")");
    for (int a = 0; a < t.max_level(); ++a)
        for (int x = 1; x < t.states(); ++x)
            if (t(a, x) < t(a, x - 1) * (1 - 1e-12))
                out.push_back("W decreases in n at (" + std::to_string(a) + "," + std::to_string(x) + ")");
    for (int m = 0; m + 1 < seq.size() && m < 200; ++m) {
        const double h = 0.5 * (seq.j[m + 1] + seq.j[m + 2]);
        if (!(h > 0) || !std::isfinite(h)) continue;
        const auto u = seq.policy(m + 1);
        if (!optimality_certificate_failures(s, h, u, u.states() - 1, false).empty())
            out.push_back("optimality certificate fails inside interval " + std::to_string(m + 1));
    }
    return out;
}

std::vector<std::string> validate_asset(const AssetModel& a) {
    std::vector<std::string> out;
    const auto bp = asset_breakpoints(a);
    std::map<double, std::vector<PolicyTable>> fam;
    for (const auto& [w, u] : bp.charge_family()) fam[w].push_back(u);
    for (const auto& v : validate_full_indexability(fam).violations)
        out.push_back("nesting violated at state " + std::to_string(v.state));
    for (const auto& v : bp.nesting_violations()) out.push_back(v);
    const auto t = asset_indices(bp);
    for (auto [lvl, x] : t.level_monotonicity_violations(1e-12))
        out.push_back("W increases in a at (" + std::to_string(lvl) + "," + std::to_string(x) + ")");
    for (int m = 0; m + 1 < bp.size(); ++m) {
        const double h = 0.5 * (bp.h[m] + bp.h[m + 1]);
        if (!asset_certificate_failures(a, h, bp.policies[m + 1]).empty())
            out.push_back("optimality certificate fails inside interval " + std::to_string(m + 1));
    }
    return out;
}

int cmd_validate(const Options& o) {
    const json m = read_json_file(o.model);
    const std::string kind = model_kind(m);
    std::vector<std::pair<std::string, std::vector<std::string>>> results;
    if (kind == "station") {
        results.emplace_back("station", validate_station(station_from_json(m), o.cap.value_or(50), o.max_charge));
    } else if (kind == "asset") {
        results.emplace_back("asset", validate_asset(asset_from_json(m)));
    } else if (kind == "queueing-system") {
        const auto q = queue_system_from_json(m);
        const auto a1 = check_assumption1(q.stations, q.S);
        results.emplace_back("pool", a1.pass ? std::vector<std::string>{}
                                             : std::vector<std::string>{"pool cannot stabilize every station"});
        for (std::size_t k = 0; k < q.stations.size(); ++k)
            results.emplace_back("station" + std::to_string(k + 1),
                                 validate_station(q.stations[k], o.cap.value_or(50), o.max_charge));
    } else if (kind == "plates-system") {
        const auto p = plates_system_from_json(m);
        for (std::size_t k = 0; k < p.assets.size(); ++k)
            results.emplace_back("asset" + std::to_string(k + 1), validate_asset(p.assets[k]));
    } else {
        throw std::invalid_argument("unknown model kind '" + kind + "'");
    }
    bool ok = true;
    Output out(o.out);
    for (const auto& [label, v] : results) {
        out.os() << (v.empty() ? "PASS " : "FAIL ") << label;
        if (!v.empty()) out.os() << ": " << v.size() << " violation(s), first: " << v.front();
        out.os() << '\n';
        ok = ok && v.empty();
    }
    return ok ? kOk : kValidation;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Index computation and benchmarks for divisible-resource allocation"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", o.out, "Write output to this path instead of stdout");
        sub->add_option("--tol", o.tol, "Solver tolerance")->check(CLI::PositiveNumber);
    };
    auto add_format = [&](CLI::App* sub) {
        sub->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
    };

    auto* indices = app.add_subcommand("indices", "Emit index tables for a model file");
    indices->add_option("--model", o.model, "Model JSON")->required()->check(CLI::ExistingFile);
    indices->add_option("--cap", o.cap, "Highest queue length to tabulate")->check(CLI::PositiveNumber);
    indices->add_option("--max-charge", o.max_charge, "Station indices above this are reported as inf")
        ->check(CLI::PositiveNumber);
    add_common(indices);
    add_format(indices);

    auto* solve = app.add_subcommand("solve", "Long-run rates of policies on a model");
    solve->add_option("--model", o.model, "Model JSON")->required()->check(CLI::ExistingFile);
    solve->add_option("--policy", o.policy, "all, index, static, myopic or optimal");
    solve->add_option("--charge", o.h, "Charge multiplier for single-project models")->check(CLI::NonNegativeNumber);
    solve->add_option("--cap", o.cap, "Queue truncation")->check(CLI::PositiveNumber);
    add_common(solve);

    auto* experiment = app.add_subcommand("experiment", "Run a generator config and report suboptimality");
    experiment->add_option("--config", o.config, "Generator config JSON")->check(CLI::ExistingFile);
    experiment->add_option("--preset", o.preset, "Built-in preset")
        ->check(CLI::IsMember(preset_names()));
    experiment->add_option("--seed", o.seed, "RNG seed");
    experiment->add_option("--problems", o.problems, "Number of instances")->check(CLI::NonNegativeNumber);
    experiment->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
    experiment->add_option("--cap", o.cap, "Queue truncation for every station")->check(CLI::PositiveNumber);
    experiment->add_flag("--quiet", o.quiet, "No progress on stderr");
    add_common(experiment);
    add_format(experiment);
    o.format = "csv";

    auto* gold = app.add_subcommand("golden", "Run the fixed replication checks");
    add_common(gold);

    auto* validate = app.add_subcommand("validate", "Check nesting, monotonicity and optimality certificates");
    validate->add_option("--model", o.model, "Model JSON")->required()->check(CLI::ExistingFile);
    validate->add_option("--cap", o.cap, "Highest queue length to check")->check(CLI::PositiveNumber);
    validate->add_option("--max-charge", o.max_charge, "Station charge ceiling")->check(CLI::PositiveNumber);
    add_common(validate);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }
    if (!indices->parsed() && !experiment->parsed()) o.format = "json";
    if (indices->parsed() && indices->count("--format") == 0) o.format = "json";

    try {
        if (indices->parsed()) return cmd_indices(o);
        if (solve->parsed()) return cmd_solve(o);
        if (experiment->parsed()) return cmd_experiment(o);
        if (gold->parsed()) return cmd_golden(o);
        if (validate->parsed()) return cmd_validate(o);
    } catch (const SolverError& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return kSolver;
    } catch (const std::length_error& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return kSolver;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return kSolver;
    }
    return kUsage;
}
