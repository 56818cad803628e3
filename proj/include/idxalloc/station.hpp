#pragma once

// Single service station with a team-size dependent service rate, and the
// exact computation of its index function by descending holding-cost
// breakpoints.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "idxalloc/core.hpp"

namespace idxalloc {

struct StationModel {
    double lambda = 1.0;     // arrival rate
    std::vector<double> mu;  // mu(0..S), service rate with a pool servers on the team
    double h = 1.0;          // holding cost rate

    int pool_size() const { return static_cast<int>(mu.size()) - 1; }

    /// Invariant violations, empty when the station is valid.
    std::vector<std::string> violations() const {
        std::vector<std::string> out;
        if (mu.size() < 2) {
            out.emplace_back("pool size S must be at least 1");
            return out;
        }
        if (!(lambda > 0) || !std::isfinite(lambda)) out.emplace_back("arrival rate must be positive and finite");
        if (!(h > 0) || !std::isfinite(h)) out.emplace_back("holding cost must be positive and finite");
        for (std::size_t a = 0; a < mu.size(); ++a)
            if (!(mu[a] >= 0) || !std::isfinite(mu[a])) {
                out.emplace_back("service rates must be finite and nonnegative");
                break;
            }
        for (std::size_t a = 0; a + 1 < mu.size(); ++a)
            if (!(mu[a + 1] > mu[a])) {
                out.emplace_back("service rate not strictly increasing at a=" + std::to_string(a + 1));
                break;
            }
        for (std::size_t a = 1; a + 1 < mu.size(); ++a)
            if (!(mu[a + 1] - 2 * mu[a] + mu[a - 1] < 0)) {
                out.emplace_back("service rate not strictly concave at a=" + std::to_string(a));
                break;
            }
        if (!(mu.back() > lambda)) out.emplace_back("unstable: mu(S) <= lambda");
        return out;
    }

    void validate() const {
        auto v = violations();
        if (!v.empty()) throw std::invalid_argument("invalid station: " + v.front());
    }

    /// Smallest level with a positive service rate; optimal policies never go
    /// below it in a nonempty queue.
    int floor_level() const {
        int a = 0;
        while (a < pool_size() && !(mu[a] > 0)) ++a;
        return a;
    }
};

struct Assumption1Report {
    bool pass = true;
    std::vector<std::string> failures;
    std::vector<int> stabilizing_levels;  // min{a : mu_k(a) > lambda_k}, -1 if none
    int total = 0;
};

/// Per-station monotonicity/concavity plus the joint stability condition
/// sum_k min{a : mu_k(a) > lambda_k} < S.
inline Assumption1Report check_assumption1(std::span<const StationModel> stations, int pool) {
    Assumption1Report rep;
    for (std::size_t k = 0; k < stations.size(); ++k) {
        const auto& s = stations[k];
        if (s.pool_size() != pool) {
            rep.failures.push_back("station " + std::to_string(k) + ": rate table does not cover 0..S");
            rep.stabilizing_levels.push_back(-1);
            continue;
        }
        for (const auto& v : s.violations())
            if (v.rfind("unstable", 0) != 0) rep.failures.push_back("station " + std::to_string(k) + ": " + v);
        int a = 0;
        while (a <= pool && !(s.mu[a] > s.lambda)) ++a;
        if (a > pool) {
            rep.failures.push_back("station " + std::to_string(k) + ": no team size serves faster than arrivals");
            rep.stabilizing_levels.push_back(-1);
        } else {
            rep.stabilizing_levels.push_back(a);
            rep.total += a;
        }
    }
    bool all_stable = std::none_of(rep.stabilizing_levels.begin(), rep.stabilizing_levels.end(),
                                   [](int a) { return a < 0; });
    if (all_stable && !(rep.total < pool))
        rep.failures.push_back("joint stability fails: sum of stabilizing team sizes " + std::to_string(rep.total) +
                               " is not below S=" + std::to_string(pool));
    rep.pass = rep.failures.empty();
    return rep;
}

/// Downward first-passage quantities for a stable station policy. Entry n
/// (n >= 1) describes one passage from n to n-1: expected duration t(n),
/// integrated head count head(n) = chi(u,n) t(n) and integrated server
/// deployment deploy(n) = psi(u,n) t(n). Extended precision keeps the
/// geometric growth of t over long low-service stretches representable.
struct FirstPassageStats {
    using Real = long double;

    double lambda = 0;
    int tail_start = 1;        // u(n) = S for every n >= tail_start
    std::vector<Real> t;       // index 0 unused
    std::vector<Real> head;
    std::vector<Real> deploy;
    Real tail_t = 0;           // 1 / (mu(S) - lambda)
    int pool = 0;

    Real step_time(int n) const { return n < tail_start ? t[n] : tail_t; }
    Real step_head(int n) const {
        return n < tail_start ? head[n] : n * tail_t + lambda * tail_t * tail_t;
    }
    Real step_deploy(int n) const { return n < tail_start ? deploy[n] : pool * tail_t; }

    Real chi(int n) const { return step_head(n) / step_time(n); }
    Real psi(int n) const { return step_deploy(n) / step_time(n); }
    /// T(u,1) / (T(u,1) + 1/lambda)
    Real alpha() const { return t1() / (t1() + 1.0L / lambda); }
    Real one_minus_alpha() const { return (1.0L / lambda) / (t1() + 1.0L / lambda); }
    Real t1() const { return step_time(1); }

    /// Affine coefficients of the bias increment: Delta v(h, n) = slope * h + offset.
    std::pair<Real, Real> delta_v_coefficients(int n) const {
        if (n == 1) return {step_head(1) * one_minus_alpha(), step_deploy(1) * one_minus_alpha()};
        Real a = alpha();
        Real tn = step_time(n);
        return {step_head(n) - a * chi(1) * tn, step_deploy(n) - a * psi(1) * tn};
    }

    /// Average cost rate of Q(h) under the policy.
    Real cost_rate(double h) const { return (h * step_head(1) + step_deploy(1)) / (t1() + 1.0L / lambda); }
};

namespace detail {

inline int tail_start_of(const PolicyTable& u, int pool) {
    if (u(u.states()) != pool) throw std::invalid_argument("unstable policy: does not reach S servers in its tail");
    int n = u.states();
    while (n > 1 && u(n - 1) == pool) --n;
    return std::max(n, 1);
}

inline void passage_step(const StationModel& s, int level, int n, FirstPassageStats& f) {
    using Real = FirstPassageStats::Real;
    const Real mu = s.mu[static_cast<std::size_t>(level)];
    const Real lam = s.lambda;
    Real t_next = f.step_time(n + 1), x_next = f.step_head(n + 1), y_next = f.step_deploy(n + 1);
    f.t[n] = (1 + lam * t_next) / mu;
    f.head[n] = (n + lam * x_next) / mu;
    f.deploy[n] = (level + lam * y_next) / mu;
}

}  // namespace detail

/// Backward recursion t(n) = (1 + lambda t(n+1)) / mu(u(n)) from the constant
/// full-service tail, with the matching recursions for the head-count and
/// deployment integrals.
inline FirstPassageStats first_passage_stats(const StationModel& station, const PolicyTable& u) {
    station.validate();
    const int S = station.pool_size();
    if (u.max_level() != S) throw std::invalid_argument("policy level range does not match station");
    FirstPassageStats f;
    f.lambda = station.lambda;
    f.pool = S;
    f.tail_start = detail::tail_start_of(u, S);
    f.tail_t = 1.0L / (static_cast<FirstPassageStats::Real>(station.mu[S]) - station.lambda);
    f.t.assign(static_cast<std::size_t>(f.tail_start) + 1, 0);
    f.head = f.t;
    f.deploy = f.t;
    for (int n = f.tail_start - 1; n >= 1; --n) {
        if (!(station.mu[static_cast<std::size_t>(u(n))] > 0))
            throw std::invalid_argument("policy leaves a nonempty queue without service at n=" + std::to_string(n));
        detail::passage_step(station, u(n), n, f);
    }
    return f;
}

/// Largest holding cost at which serving state 1 with S-1 servers ties with
/// full service.
inline double initial_breakpoint(const StationModel& station) {
    station.validate();
    const int S = station.pool_size();
    const double muS = station.mu[S], muS1 = station.mu[S - 1];
    return (muS - station.lambda) * (1.0 / (muS - muS1) - S / muS);
}

namespace detail {

/// Passage maps x(n) = c(n) + r(n) x(n+1), shared multiplier r = lambda / mu,
/// composed over state ranges in a segment tree so that the passage
/// quantities at any state cost O(log N) after a one-state policy change.
class PassageTree {
public:
    using Real = FirstPassageStats::Real;
    struct Map {
        Real r = 1, ct = 0, ch = 0, cd = 0;  // identity by default
    };

    PassageTree(const StationModel& s) : s_(s) { grow(64); }

    /// Sets the step map of state n to use `level` servers.
    void set(int n, int level) {
        if (n >= size_) grow(2 * (n + 1));
        const Real mu = s_.mu[static_cast<std::size_t>(level)];
        Map m;
        m.r = static_cast<Real>(s_.lambda) / mu;
        m.ct = 1 / mu;
        m.ch = static_cast<Real>(n) / mu;
        m.cd = static_cast<Real>(level) / mu;
        int i = n + size_;
        node_[static_cast<std::size_t>(i)] = m;
        for (i >>= 1; i >= 1; i >>= 1) node_[static_cast<std::size_t>(i)] = combine(node_[2 * i], node_[2 * i + 1]);
    }

    /// Composition of the step maps of states lo..hi (outermost first).
    Map range(int lo, int hi) const {
        Map left, right;
        if (lo > hi) return left;
        for (int l = lo + size_, r = hi + size_ + 1; l < r; l >>= 1, r >>= 1) {
            if (l & 1) left = combine(left, node_[static_cast<std::size_t>(l++)]);
            if (r & 1) right = combine(node_[static_cast<std::size_t>(--r)], right);
        }
        return combine(left, right);
    }

private:
    static Map combine(const Map& a, const Map& b) {
        return {a.r * b.r, a.ct + a.r * b.ct, a.ch + a.r * b.ch, a.cd + a.r * b.cd};
    }
    void grow(int want) {
        int sz = 1;
        while (sz < want) sz <<= 1;
        std::vector<Map> leaves(static_cast<std::size_t>(sz));
        for (int i = 0; i < size_; ++i) leaves[static_cast<std::size_t>(i)] = node_[static_cast<std::size_t>(i + size_)];
        size_ = sz;
        node_.assign(2 * static_cast<std::size_t>(sz), Map{});
        for (int i = 0; i < sz; ++i) node_[static_cast<std::size_t>(i + sz)] = leaves[static_cast<std::size_t>(i)];
        for (int i = sz - 1; i >= 1; --i) node_[static_cast<std::size_t>(i)] = combine(node_[2 * i], node_[2 * i + 1]);
    }

    const StationModel& s_;
    int size_ = 0;
    std::vector<Map> node_;
};

}  // namespace detail

/// Descending holding-cost breakpoints j_1 > j_2 > ... with the optimal
/// monotone policy on each interval. Policies are stored implicitly: u(j_0)
/// applies S servers in every nonempty state and u(j_{m+1}) is u(j_m) with one
/// server removed at switch_state[m].
struct BreakpointSequence {
    StationModel station;
    std::vector<double> j;            // j[0] = +inf, then j_1 .. j_M
    std::vector<int> switch_state;    // n_m, one per breakpoint (size M)
    std::vector<int> full_service;    // N_m = min{n : u(j_m, n) = S}, m = 0..M
    std::vector<int> merged;          // m with j_{m+1} within 1e-10 (relative) of j_m
    int depth = 0;                    // index rows 0..depth were requested
    bool complete = false;            // every level of rows 0..depth resolved, or no breakpoint remains
    double saturation_charge = kInf;  // unresolved indices exceed this value

    int size() const { return static_cast<int>(switch_state.size()); }

    /// u(j_m) restricted to states 0..depth (beyond that the last entry repeats).
    PolicyTable policy(int m, int depth) const {
        const int S = station.pool_size();
        int width = depth;
        for (int i = 0; i < m; ++i) width = std::max(width, switch_state[i] + 1);
        std::vector<int> u(static_cast<std::size_t>(width) + 2, S);
        u[0] = 0;
        for (int i = 0; i < m; ++i) --u[static_cast<std::size_t>(switch_state[i])];
        u.resize(static_cast<std::size_t>(std::max(depth, 1)) + 1);
        return PolicyTable(std::move(u), S, true);
    }
    /// Full u(j_m) including its whole non-constant prefix.
    PolicyTable policy(int m) const { return policy(m, full_service[static_cast<std::size_t>(m)]); }

    /// Index m of the interval (j_{m+1}, j_m) containing h.
    int interval_of(double h) const {
        int m = 0;
        while (m < size() && j[static_cast<std::size_t>(m) + 1] >= h) ++m;
        return m;
    }

    /// Policy family in charge space, W = h / j, for states 0..depth; the
    /// full-service policy sits at W = 0. Consecutive duplicates are dropped.
    std::map<double, PolicyTable> charge_family(int depth) const {
        std::map<double, PolicyTable> fam;
        const int S = station.pool_size();
        std::vector<int> u(static_cast<std::size_t>(depth) + 1, S);
        u[0] = 0;
        fam.emplace(0.0, PolicyTable(u, S, true));
        for (int m = 0; m < size(); ++m) {
            int n = switch_state[m];
            if (n > depth) continue;
            --u[static_cast<std::size_t>(n)];
            fam.insert_or_assign(station.h / j[static_cast<std::size_t>(m) + 1], PolicyTable(u, S, true));
        }
        return fam;
    }
};

struct BreakpointOptions {
    int depth = 50;                  // index rows 0..depth are requested
    long long step_budget = 20'000'000;
    double min_j = 0.0;              // breakpoints below this are not computed (their indices saturate)
    int resolve_to = -1;             // stop once every state <= depth is at or below this level (-1: floor)
};

/// Runs the breakpoint recursion: from the current policy, each candidate
/// state n solves {A_n h + B_n}{mu(u(n)) - mu(u(n)-1)} = 1 for h, the largest
/// root below the current breakpoint becomes the next breakpoint, and one
/// server is removed at the state achieving it. Candidates are the first state
/// of each level block (removing a server elsewhere would break monotonicity)
/// above the station's floor level. Ties go to the smallest n.
///
/// Below the stabilizing team size the full-service state N grows roughly
/// like 1/j, so the lowest levels are usually not resolved exactly: the
/// recursion stops at `min_j` and the remaining indices are only known to
/// exceed h / min_j (`saturation_charge`).
inline BreakpointSequence compute_breakpoints(const StationModel& station, BreakpointOptions opt = {}) {
    using Real = FirstPassageStats::Real;
    station.validate();
    if (opt.depth < 1) throw std::invalid_argument("index depth must be at least 1");
    const int S = station.pool_size();
    const int floor = station.floor_level();
    const Real lam = station.lambda;
    const Real tail_t = 1.0L / (static_cast<Real>(station.mu[S]) - lam);

    BreakpointSequence seq;
    seq.station = station;
    seq.depth = opt.depth;
    seq.j.push_back(kInf);

    // Current policy u(0..N) with u(n) = S from the tail start N on;
    // first[l] = smallest n >= 1 with u(n) >= l.
    std::vector<int> u{0, S};
    std::vector<int> first(static_cast<std::size_t>(S) + 1, 1);
    int N = 1;
    detail::PassageTree tree(station);
    seq.full_service.push_back(1);

    const int target = std::max(floor, opt.resolve_to);
    int unresolved = (S > target) ? opt.depth : 0;
    seq.complete = unresolved == 0;

    struct Passage {
        Real t, head, deploy;
    };
    auto passage_at = [&](int n) {
        const auto m = tree.range(n, N - 1);
        const Real tN = tail_t, hN = N * tail_t + lam * tail_t * tail_t, dN = S * tail_t;
        return Passage{m.ct + m.r * tN, m.ch + m.r * hN, m.cd + m.r * dN};
    };

    for (long long step = 0; unresolved > 0; ++step) {
        if (step >= opt.step_budget) {
            std::ostringstream msg;
            msg << "breakpoint recursion exceeded its step budget (N=" << N << ", j=" << seq.j.back() << ")";
            throw SolverError(msg.str());
        }
        const Passage p1 = passage_at(1);
        const Real inv_lam = 1 / lam;
        const Real oma = inv_lam / (p1.t + inv_lam);
        const Real alpha = p1.t / (p1.t + inv_lam);
        const Real chi1 = p1.head / p1.t, psi1 = p1.deploy / p1.t;

        double best = -kInf;
        int best_n = -1;
        int last = -1;
        for (int level = floor + 1; level <= S; ++level) {
            const int n = first[static_cast<std::size_t>(level)];
            if (n == last || u[static_cast<std::size_t>(n)] != level) continue;
            last = n;
            Real A, B;
            if (n == 1) {
                A = p1.head * oma;
                B = p1.deploy * oma;
            } else {
                const Passage pn = passage_at(n);
                A = pn.head - alpha * chi1 * pn.t;
                B = pn.deploy - alpha * psi1 * pn.t;
            }
            if (!(A > 0)) {
                std::ostringstream msg;
                msg << "breakpoint recursion: nonpositive head-count coefficient A=" << static_cast<double>(A)
                    << " at n=" << n << " (level " << level << ", step " << step << ")";
                throw SolverError(msg.str());
            }
            const Real dmu = static_cast<Real>(station.mu[level]) - station.mu[level - 1];
            const double root = static_cast<double>((1 / dmu - B) / A);
            if (best_n < 0 || root - best > 1e-12 * std::abs(best)) {
                best = root;
                best_n = n;
            }
        }

        if (best_n < 0 || !(best > 0)) {
            seq.complete = true;
            break;
        }
        const double prev = seq.j.back();
        const double next = std::min(best, prev);
        if (next < opt.min_j) {
            seq.saturation_charge = station.h / opt.min_j;
            break;
        }
        if (std::isfinite(prev) && prev - next <= 1e-10 * prev) seq.merged.push_back(seq.size());

        seq.j.push_back(next);
        seq.switch_state.push_back(best_n);
        const int n = best_n;
        const int old_level = u[static_cast<std::size_t>(n)];
        --u[static_cast<std::size_t>(n)];
        first[static_cast<std::size_t>(old_level)] = n + 1;
        if (n <= opt.depth && old_level == target + 1) --unresolved;
        if (unresolved == 0) seq.complete = target == floor;

        if (n == N) {
            // The full-service tail now starts one state later.
            u.push_back(S);
            ++N;
        }
        tree.set(n, u[static_cast<std::size_t>(n)]);
        seq.full_service.push_back(N);
    }
    if (!seq.complete && !std::isfinite(seq.saturation_charge)) seq.saturation_charge = station.h / seq.j.back();
    return seq;
}

/// W(a, n) = h / j_{m+1} where the level at n drops from a+1 to a at j_{m+1}.
/// Entries never reached are +inf: exactly so below the floor level when
/// mu(0) = 0, otherwise as a stand-in for a value above `saturation_charge`.
/// W(a, 0) = 0 since an empty queue is never served.
inline IndexTable station_indices(const BreakpointSequence& seq, int n_max) {
    if (n_max > seq.depth)
        throw std::out_of_range("breakpoint sequence was not computed for state " + std::to_string(n_max));
    const int S = seq.station.pool_size();
    const auto n = static_cast<std::size_t>(n_max) + 1;
    std::vector<double> w(static_cast<std::size_t>(S) * n, kInf);
    for (int a = 0; a < S; ++a) w[static_cast<std::size_t>(a) * n] = 0.0;
    std::vector<int> level(n, S);
    for (int m = 0; m < seq.size(); ++m) {
        const int x = seq.switch_state[m];
        if (x > n_max) continue;
        const int a = --level[static_cast<std::size_t>(x)];
        w[static_cast<std::size_t>(a) * n + x] = seq.station.h / seq.j[static_cast<std::size_t>(m) + 1];
    }
    return IndexTable(S, n_max + 1, std::move(w), true, false);
}

/// Indices for states 0..n_max resolved down to the floor level; throws
/// SolverError when that needs more than the default step budget.
inline IndexTable station_indices(const StationModel& station, int n_max) {
    BreakpointOptions opt;
    opt.depth = n_max;
    return station_indices(compute_breakpoints(station, opt), n_max);
}

struct PoolIndices {
    std::vector<IndexTable> tables;
    std::vector<BreakpointSequence> sequences;
    double charge_ceiling = 0;   // common saturation level; kInf when nothing saturated
};

/// Index tables for stations sharing a pool of S servers, resolved exactly
/// enough for the greedy heuristic: all indices above a common charge ceiling
/// are saturated to +inf, and the ceiling is raised until at most S
/// saturated increments can be present in any joint state (so greedy always
/// takes all of them and never needs their order).
inline PoolIndices pool_station_indices(std::span<const StationModel> stations, int pool, std::span<const int> caps,
                                        double initial_ceiling = 1.0) {
    if (stations.size() != caps.size()) throw std::invalid_argument("one cap per station is required");
    double ceiling = initial_ceiling;
    for (int round = 0; round < 200; ++round, ceiling *= 2) {
        PoolIndices out;
        out.charge_ceiling = ceiling;
        int saturated = 0;
        bool all_complete = true;
        for (std::size_t k = 0; k < stations.size(); ++k) {
            BreakpointOptions opt;
            opt.depth = caps[k];
            opt.min_j = stations[k].h / ceiling;
            auto seq = compute_breakpoints(stations[k], opt);
            all_complete = all_complete && seq.complete;
            auto table = station_indices(seq, caps[k]);
            // Rows are monotone in n, so the cap row has the most infinite entries.
            for (int a = 0; a < pool; ++a)
                if (std::isinf(table(a, caps[k]))) ++saturated;
            out.sequences.push_back(std::move(seq));
            out.tables.push_back(std::move(table));
        }
        if (all_complete) out.charge_ceiling = kInf;
        if (all_complete || saturated <= pool) return out;
    }
    throw SolverError("could not find a charge ceiling that keeps saturated indices within the pool");
}

/// Delta v(h, n) = v(h, n) - v(h, n-1) for n = 1..cap under policy u, from the
/// regenerative product form. Entry 0 of the result is Delta v(h, 0) = 0.
inline std::vector<double> delta_v_profile(const StationModel& station, double h, const PolicyTable& u, int cap) {
    if (!(h >= 0)) throw std::invalid_argument("holding cost must be nonnegative");
    auto f = first_passage_stats(station, u);
    std::vector<double> dv(static_cast<std::size_t>(cap) + 1, 0.0);
    for (int n = 1; n <= cap; ++n) {
        auto [slope, offset] = f.delta_v_coefficients(n);
        dv[static_cast<std::size_t>(n)] = static_cast<double>(slope * h + offset);
    }
    return dv;
}

/// States n <= cap where the two-sided optimality condition
///   Delta v [mu(u+1) - mu(u)] <= 1 <= Delta v [mu(u) - mu(u-1)]
/// fails (strictly, when `strict`), with mu(S+1) = mu(S).
inline std::vector<int> optimality_certificate_failures(const StationModel& station, double h, const PolicyTable& u,
                                                        int cap, bool strict) {
    const auto dv = delta_v_profile(station, h, u, cap);
    const int S = station.pool_size();
    std::vector<int> bad;
    for (int n = 1; n <= cap; ++n) {
        const int a = u(n);
        const double up = (a < S ? station.mu[a + 1] : station.mu[S]) - station.mu[a];
        const double lhs = dv[n] * up;
        const double rhs = a > 0 ? dv[n] * (station.mu[a] - station.mu[a - 1]) : kInf;
        bool ok = strict ? (lhs < 1 && 1 < rhs) : (lhs <= 1 + 1e-9 && 1 - 1e-9 <= rhs);
        if (a == S && strict) ok = (lhs <= 1) && 1 < rhs;  // mu(S+1) = mu(S) makes the left side 0
        if (!ok) bad.push_back(n);
    }
    return bad;
}

}  // namespace idxalloc
