#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "idxalloc/idxalloc.hpp"
#include "support.hpp"

using namespace idxalloc;
using namespace testing_support;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

// ---------------------------------------------------------------------------

Outcome counterexample_golden() {
    const auto c = golden::counterexample_check();
    return {c.pass, c.detail};
}

// Station policy restricted to states 1..upto, from a joint-MDP policy.
std::vector<int> levels_upto(const TruncatedJointMdp& m, const JointPolicy& pol, int upto) {
    const auto u = single_project_levels(m, pol);
    return std::vector<int>(u.levels().begin() + 1, u.levels().begin() + upto + 1);
}

std::vector<int> table_upto(const PolicyTable& u, int upto) {
    std::vector<int> out;
    for (int n = 1; n <= upto; ++n) out.push_back(u(n));
    return out;
}

// Truncation depth beyond which the full-service tail mass is below 1e-9.
int tail_depth(const StationModel& s) {
    const double rho = s.lambda / s.mu.back();
    return static_cast<int>(std::ceil(std::log(1e-9) / std::log(rho)));
}

Outcome initial_breakpoint_consistency() {
    int checked = 0, bad = 0;
    std::ostringstream why;
    for (int shape = 0; shape < 2; ++shape) {
        for (int i = 0; i < 50; ++i) {
            Rng rng(2000 + shape, static_cast<std::uint64_t>(i));
            const auto s = random_station(rng, shape == 1);
            const int S = s.pool_size();
            const double closed =
                (s.mu[S] - s.lambda) * (1.0 / (s.mu[S] - s.mu[S - 1]) - S / s.mu[S]);
            const double j1 = initial_breakpoint(s);
            BreakpointOptions opt;
            opt.depth = 10;
            opt.min_j = j1 * 0.99;
            const auto seq = compute_breakpoints(s, opt);
            const bool formula_ok = std::abs(j1 - closed) <= 1e-12 * std::abs(closed) && seq.size() >= 1 &&
                                    std::abs(seq.j[1] - j1) <= 1e-9 * j1;
            const int upto = 60, cap = std::max(80, upto + tail_depth(s));
            SolverOptions so;
            so.tol = 1e-9;
            const double h_hi = j1 * (1 + 1e-3), h_lo = j1 * (1 - 1e-3);
            const auto above = relative_value_iteration(station_q_mdp(s, h_hi, cap), so);
            const auto below = relative_value_iteration(station_q_mdp(s, h_lo, cap), so);
            const auto mdp = station_q_mdp(s, h_hi, cap);
            const bool above_ok = levels_upto(mdp, above.policy, upto) == table_upto(seq.policy(0, upto), upto);
            const bool below_ok =
                levels_upto(mdp, below.policy, upto) == table_upto(seq.policy(seq.interval_of(h_lo), upto), upto) &&
                (seq.size() < 2 || seq.j[2] >= h_lo || seq.policy(1, upto)(1) == S - 1);
            ++checked;
            if (!(formula_ok && above_ok && below_ok)) {
                if (bad++ == 0) why << " first failure: shape " << shape + 1 << " station " << i;
            }
        }
    }
    std::ostringstream d;
    d << checked << " stations, " << bad << " mismatches" << why.str();
    return {bad == 0, d.str()};
}

Outcome oracle_equivalence() {
    int station_cases = 0, station_bad = 0, asset_cases = 0, asset_bad = 0;
    for (int i = 0; i < 20; ++i) {
        Rng rng(3000, static_cast<std::uint64_t>(i));
        const auto s = random_station(rng, i % 2 == 1, 10);
        const double j1 = initial_breakpoint(s);
        BreakpointOptions opt;
        opt.depth = 400;
        opt.min_j = j1 / 40;
        const auto seq = compute_breakpoints(s, opt);
        int done = 0;
        for (int tries = 0; done < 20 && tries < 2000; ++tries) {
            const double h = j1 * std::exp(rng.uniform(std::log(1.0 / 30), std::log(1.2)));
            const int m = seq.interval_of(h);
            if (m >= seq.size()) continue;
            const int Nh = seq.full_service[static_cast<std::size_t>(m)];
            if (Nh > 250) continue;
            // Stay clear of the breakpoints themselves, where both policies are optimal.
            const double gap_hi = seq.j[static_cast<std::size_t>(m)], gap_lo = seq.j[static_cast<std::size_t>(m) + 1];
            if (std::min(gap_hi - h, h - gap_lo) < 1e-6 * h) continue;
            ++done;
            ++station_cases;
            // Parking the queue at the cap must cost more than full service.
            const int park = static_cast<int>(std::ceil(2.0 * s.pool_size() / h));
            const int cap = Nh + std::max({100, tail_depth(s), park});
            SolverOptions so;
            so.tol = 1e-9;
            const auto mdp = station_q_mdp(s, h, cap);
            const auto rvi = relative_value_iteration(mdp, so);
            if (levels_upto(mdp, rvi.policy, Nh) != table_upto(seq.policy(m), Nh)) ++station_bad;
        }
    }
    for (int i = 0; i < 20; ++i) {
        Rng rng(3100, static_cast<std::uint64_t>(i));
        const auto a = random_asset(rng);
        const auto bp = asset_breakpoints(a);
        const double lo = bp.h.empty() ? 0.1 : bp.h.back() * 0.5, hi = bp.h_start * 1.5;
        for (int k = 0; k < 10; ++k) {
            const double h = std::exp(rng.uniform(std::log(lo), std::log(hi)));
            ++asset_cases;
            if (!(bp.policy_at(h) == solve_q_asset(a, h).policy)) ++asset_bad;
        }
    }
    std::ostringstream d;
    d << station_cases << " station/h pairs (" << station_bad << " mismatches), " << asset_cases
      << " asset/h pairs (" << asset_bad << " mismatches)";
    return {station_bad == 0 && asset_bad == 0 && station_cases == 400, d.str()};
}

Outcome indexability_suite() {
    long long nesting = 0, level_mono = 0, state_mono = 0;
    for (int i = 0; i < 200; ++i) {
        Rng rng(4000, static_cast<std::uint64_t>(i));
        const auto s = random_station(rng, i % 2 == 1, 25);
        BreakpointOptions opt;
        opt.depth = 60;
        opt.min_j = s.h / 64;
        const auto seq = compute_breakpoints(s, opt);
        std::map<double, std::vector<PolicyTable>> fam;
        for (const auto& [w, u] : seq.charge_family(60)) fam[w].push_back(u);
        nesting += static_cast<long long>(validate_full_indexability(fam).violations.size());
        const auto t = station_indices(seq, 60);
        level_mono += static_cast<long long>(t.level_monotonicity_violations().size());
        for (int a = 0; a < t.max_level(); ++a)
            for (int x = 1; x < t.states(); ++x)
                if (t(a, x) < t(a, x - 1)) ++state_mono;
    }
    for (int i = 0; i < 200; ++i) {
        Rng rng(4100, static_cast<std::uint64_t>(i));
        const auto a = random_asset(rng);
        const auto bp = asset_breakpoints(a);
        std::map<double, std::vector<PolicyTable>> fam;
        for (const auto& [w, u] : bp.charge_family()) fam[w].push_back(u);
        nesting += static_cast<long long>(validate_full_indexability(fam).violations.size());
        level_mono += static_cast<long long>(asset_indices(bp).level_monotonicity_violations().size());
    }
    std::ostringstream d;
    d << "nesting " << nesting << ", level monotonicity " << level_mono << ", state monotonicity " << state_mono;
    return {nesting == 0 && level_mono == 0 && state_mono == 0, d.str()};
}

Outcome delta_v_monotone() {
    long long bad = 0, samples = 0;
    for (int i = 0; i < 50; ++i) {
        Rng rng(5000, static_cast<std::uint64_t>(i));
        const auto s = random_station(rng, i % 2 == 1, 25);
        const double j1 = initial_breakpoint(s);
        BreakpointOptions opt;
        opt.depth = 60;
        opt.min_j = j1 / 25;
        const auto seq = compute_breakpoints(s, opt);
        std::vector<double> prev;
        for (int g = 0; g < 20; ++g) {
            const double h = j1 / 20 * std::pow(30.0, g / 19.0);
            const auto dv = delta_v_profile(s, h, seq.policy(seq.interval_of(h)), 60);
            if (!prev.empty())
                for (int n = 1; n <= 60; ++n) {
                    ++samples;
                    if (dv[n] < prev[n] - 1e-9 * (1 + std::abs(prev[n]))) ++bad;
                }
            prev = dv;
        }
    }
    for (int i = 0; i < 50; ++i) {
        Rng rng(5100, static_cast<std::uint64_t>(i));
        const auto a = random_asset(rng);
        const auto bp = asset_breakpoints(a);
        const double lo = bp.h.empty() ? 0.1 : bp.h.back() * 0.5, hi = bp.h_start * 1.5;
        std::vector<double> prev;
        for (int g = 0; g < 20; ++g) {
            const double h = lo * std::pow(hi / lo, g / 19.0);
            const auto dv = solve_q_asset(a, h).delta_v;
            if (!prev.empty())
                for (int n = 1; n <= a.A; ++n) {
                    ++samples;
                    if (dv[n] < prev[n] - 1e-9 * (1 + std::abs(prev[n]))) ++bad;
                }
            prev = dv;
        }
    }
    std::ostringstream d;
    d << samples << " consecutive-h comparisons, " << bad << " decreases";
    return {bad == 0, d.str()};
}

Outcome g7_replication() {
    auto c = preset("G7");
    c.problems = 50;
    c.seed = 7;
    c.truncation_gate = true;
    const auto rep = run_experiment(c, 1);
    const auto& idx = rep.summary.at("index");
    const auto& st = rep.summary.at("static");
    std::ostringstream d;
    d.precision(4);
    d << "N=" << idx.n << " index MED " << idx.med << "% MAX " << idx.max << "%, static MED " << st.med
      << "%, failures " << rep.failures.size();
    const bool ok = rep.failures.empty() && idx.n == 50 && idx.med <= 0.5 && idx.max <= 1.5 && st.med >= 5 * idx.med;
    return {ok, d.str()};
}

Outcome tabs5_replication() {
    auto c = preset("tabs5");
    c.problems = 100;
    c.seed = 5;
    const auto rep = run_experiment(c, 1);
    const double i = rep.summary.at("index").med, s = rep.summary.at("static").med, m = rep.summary.at("myopic").med;
    std::ostringstream d;
    d.precision(4);
    d << "MED index " << i << "%, static " << s << "%, myopic " << m << "%, failures " << rep.failures.size();
    const bool ok = rep.failures.empty() && rep.summary.at("index").n == 100 && i <= 2 && s >= 2 && s <= 12 &&
                    m >= s && i < s && s < m;
    return {ok, d.str()};
}

Outcome tabs8d_spot_check() {
    auto c = preset("tabs8d");
    c.problems = 50;
    c.seed = 8;
    const auto rep = run_experiment(c, 1);
    const double i = rep.summary.at("index").med, s = rep.summary.at("static").med;
    std::ostringstream d;
    d.precision(4);
    d << "MED index " << i << "%, static " << s << "%, failures " << rep.failures.size();
    return {rep.failures.empty() && s >= 10 && i <= 3, d.str()};
}

Outcome closed_form_checks() {
    std::ostringstream d;
    // M/M/1 through the joint machinery.
    double worst_mm1 = 0;
    for (double rho : {0.3, 0.5, 0.7, 0.8}) {
        const StationModel s{rho, {0.0, 1.0}, 1.0};
        const int cap = std::max(60, default_queue_cap(s));
        const std::vector<StationModel> one{s};
        const std::vector<int> caps{cap};
        const auto mdp = build_joint(one, 1, caps);
        const std::vector<int> a{1};
        const double g = evaluate_policy(mdp, constant_policy(mdp, a)).gain;
        worst_mm1 = std::max(worst_mm1, std::abs(g - rho / (1 - rho)));
    }
    // Best static allocation: closed form against the truncated joint chain.
    double worst_static = 0;
    for (int i = 0; i < 10; ++i) {
        Rng rng(9000, static_cast<std::uint64_t>(i));
        const auto inst = generate_queue_instance(preset(i % 2 ? "G14" : "G7"), static_cast<std::uint64_t>(i));
        std::vector<int> caps;
        for (const auto& s : inst.stations) caps.push_back(default_queue_cap(s));
        const auto st = best_static(inst.stations, 25);
        const auto mdp = build_joint(inst.stations, 25, caps);
        const double g = evaluate_policy(mdp, constant_policy(mdp, st.allocation)).gain;
        worst_static = std::max(worst_static, std::abs(g - st.gain) / st.gain);
    }
    // First-passage recursions against dense absorbing-chain solves.
    double worst_passage = 0;
    for (int i = 0; i < 50; ++i) {
        Rng rng(9100, static_cast<std::uint64_t>(i));
        const auto s = random_station(rng, i % 2 == 1, 10);
        const auto u = random_station_policy(rng, s, 30);
        const auto f = first_passage_stats(s, u);
        for (int n : {1, 3, 10, 29, 31}) {
            const auto o = station_passage_oracle(s, u, n, 1200);
            worst_passage = std::max({worst_passage, std::abs(double(f.step_time(n)) - o.time) / o.time,
                                      std::abs(double(f.step_head(n)) - o.head) / o.head,
                                      std::abs(double(f.step_deploy(n)) - o.deploy) / o.deploy});
        }
    }
    for (int i = 0; i < 50; ++i) {
        Rng rng(9200, static_cast<std::uint64_t>(i));
        const auto a = random_asset(rng);
        const auto u = random_asset_policy(rng, a);
        const auto p = asset_first_passage(a, u);
        for (int n = 1; n <= a.A; ++n) {
            const auto o = asset_passage_oracle(a, u, n);
            // Integrated return and resource are measured against the largest
            // value they could take over the passage time.
            const double dmax = *std::max_element(a.d.begin(), a.d.end());
            worst_passage = std::max({worst_passage, std::abs(p.step_time[n] - o.time) / o.time,
                                      std::abs(p.step_return[n] - o.head) / (o.time * dmax),
                                      std::abs(p.step_resource[n] - o.deploy) / (o.time * a.R)});
        }
    }
    d.precision(3);
    d << "M/M/1 max error " << worst_mm1 << ", static relative gap " << worst_static * 100
      << "%, passage relative error " << worst_passage;
    return {worst_mm1 <= 1e-6 && worst_static <= 5e-3 && worst_passage <= 1e-9, d.str()};
}

Outcome whittle_special_case() {
    Rng rng(10000, 0);
    const int K = 4, X = 6;
    std::vector<IndexTable> tables;
    std::vector<ProjectSpec> specs;
    for (int k = 0; k < K; ++k) {
        std::vector<double> w(X);
        for (double& x : w) x = rng.uniform(0.01, 10.0);
        tables.emplace_back(1, X, w);
        specs.push_back(ProjectSpec::unit_consumption(X, 1, Sense::minimize_cost, false));
    }
    const SystemSpec sys(specs, 2);
    int bad = 0;
    for (int t = 0; t < 1000; ++t) {
        std::vector<int> x(K);
        for (int& v : x) v = static_cast<int>(rng.uniform01() * X) % X;
        // Brute force: the pair of projects with the largest sum of indices.
        double best = -1;
        std::vector<int> expect(K, 0);
        for (int p = 0; p < K; ++p)
            for (int q = p + 1; q < K; ++q) {
                const double v = tables[p](0, x[p]) + tables[q](0, x[q]);
                if (v > best) {
                    best = v;
                    std::fill(expect.begin(), expect.end(), 0);
                    expect[p] = expect[q] = 1;
                }
            }
        if (greedy_action(tables, x, sys) != expect) ++bad;
    }
    std::ostringstream d;
    d << "1000 states, " << bad << " mismatches";
    return {bad == 0, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
    std::setvbuf(stdout, nullptr, _IONBF, 0);
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"counterexample breakpoints and policy rows", counterexample_golden},
        {"initial breakpoint closed form and RVI policies around it", initial_breakpoint_consistency},
        {"breakpoint and sweep policies equal DP oracles", oracle_equivalence},
        {"nesting and index monotonicity", indexability_suite},
        {"relative values nondecreasing in h", delta_v_monotone},
        {"G7 desk-scale replication", g7_replication},
        {"plates-flat desk-scale replication", tabs5_replication},
        {"plates-rescaled high-alpha spot check", tabs8d_spot_check},
        {"closed-form cross-checks", closed_form_checks},
        {"greedy equals top-2 selection for two-level projects", whittle_special_case},
    };
    // Optional arguments select criteria by number.
    std::set<std::size_t> only;
    for (int i = 1; i < argc; ++i) only.insert(static_cast<std::size_t>(std::atoi(argv[i])));
    int failed = 0, ran = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!only.empty() && !only.count(i + 1)) continue;
        ++ran;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s criterion %zu: %s (%s) [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1,
                    criteria[i].first.c_str(), o.detail.c_str(), secs);
        if (!o.pass) ++failed;
    }
    std::printf("%d of %d criteria passed\n", ran - failed, ran);
    return failed == 0 ? 0 : 1;
}
