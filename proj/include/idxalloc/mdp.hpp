#pragma once

// Uniformized average-criterion dynamic programming over the product state
// space of K independent birth-death projects sharing an integer budget.

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "idxalloc/asset.hpp"
#include "idxalloc/core.hpp"
#include "idxalloc/station.hpp"

namespace idxalloc {

/// One project as a controlled birth-death chain on 0..states-1. Rates are
/// stored level-major: entry (a, x) at a * states + x.
struct ProjectChain {
    int states = 1;
    int max_level = 0;
    std::vector<double> up, down;
    std::vector<double> stage;  // holding cost or return rate per state

    double up_rate(int a, int x) const { return up[static_cast<std::size_t>(a) * states + x]; }
    double down_rate(int a, int x) const { return down[static_cast<std::size_t>(a) * states + x]; }

    double max_rate() const {
        double m = 0;
        for (int a = 0; a <= max_level; ++a)
            for (int x = 0; x < states; ++x) m = std::max(m, up_rate(a, x) + down_rate(a, x));
        return m;
    }
};

/// Smallest N with (lambda / mu(S))^N < 1e-9, clamped to [60, 400].
inline int default_queue_cap(const StationModel& s) {
    const double rho = s.lambda / s.mu.back();
    if (!(rho < 1)) return 400;
    const double n = std::ceil(std::log(1e-9) / std::log(rho));
    return static_cast<int>(std::clamp(n, 60.0, 400.0));
}

/// Station truncated at `cap`: arrivals in the cap state are lost. Stage cost
/// is h n.
inline ProjectChain station_chain(const StationModel& s, int cap) {
    s.validate();
    if (cap < 1) throw std::invalid_argument("queue cap must be at least 1");
    ProjectChain c;
    c.states = cap + 1;
    c.max_level = s.pool_size();
    const auto cells = static_cast<std::size_t>(c.max_level + 1) * c.states;
    c.up.assign(cells, 0.0);
    c.down.assign(cells, 0.0);
    for (int a = 0; a <= c.max_level; ++a)
        for (int x = 0; x <= cap; ++x) {
            c.up[static_cast<std::size_t>(a) * c.states + x] = x < cap ? s.lambda : 0.0;
            c.down[static_cast<std::size_t>(a) * c.states + x] = x > 0 ? s.mu[a] : 0.0;
        }
    c.stage.resize(static_cast<std::size_t>(c.states));
    for (int x = 0; x <= cap; ++x) c.stage[x] = s.h * x;
    return c;
}

/// Asset as a chain; stage reward is d(n) scaled by `reward_scale`.
inline ProjectChain asset_chain(const AssetModel& m, double reward_scale = 1.0) {
    m.validate();
    ProjectChain c;
    c.states = m.A + 1;
    c.max_level = m.R;
    const auto cells = static_cast<std::size_t>(c.max_level + 1) * c.states;
    c.up.assign(cells, 0.0);
    c.down.assign(cells, 0.0);
    for (int a = 0; a <= m.R; ++a)
        for (int n = 0; n <= m.A; ++n) {
            c.up[static_cast<std::size_t>(a) * c.states + n] = m.lambda(a, n);
            c.down[static_cast<std::size_t>(a) * c.states + n] = m.mu(a, n);
        }
    c.stage.resize(static_cast<std::size_t>(c.states));
    for (int n = 0; n <= m.A; ++n) c.stage[n] = reward_scale * m.d[n];
    return c;
}

class TruncatedJointMdp {
public:
    /// `level_price` charges each unit of resource per unit time (1 for the
    /// single-project Q(h) problems, 0 for the joint problem).
    TruncatedJointMdp(std::vector<ProjectChain> chains, int budget, Sense sense, double level_price = 0.0,
                      std::size_t max_states = 5'000'000)
        : chains_(std::move(chains)), budget_(budget), sense_(sense), price_(level_price) {
        if (chains_.empty()) throw std::invalid_argument("at least one project is required");
        if (budget_ < 0) throw std::invalid_argument("budget must be nonnegative");
        const std::size_t K = chains_.size();
        stride_.resize(K);
        std::size_t n = 1;
        for (std::size_t k = 0; k < K; ++k) {
            const auto& c = chains_[k];
            if (c.states < 1 || c.max_level < 0 ||
                c.up.size() != static_cast<std::size_t>(c.max_level + 1) * c.states ||
                c.down.size() != c.up.size() || c.stage.size() != static_cast<std::size_t>(c.states))
                throw std::invalid_argument("malformed project chain");
            stride_[k] = n;
            if (n > max_states / static_cast<std::size_t>(c.states))
                throw std::length_error("joint state space exceeds the configured budget");
            n *= static_cast<std::size_t>(c.states);
        }
        n_states_ = n;

        // Materialize the admissible action set in lexicographic order.
        action_radix_.resize(K);
        std::size_t span = 1;
        for (std::size_t k = 0; k < K; ++k) {
            action_radix_[k] = span;
            span *= static_cast<std::size_t>(chains_[k].max_level + 1);
        }
        action_lookup_.assign(span, -1);
        std::vector<int> a(K, 0);
        std::function<void(std::size_t, int)> rec = [&](std::size_t k, int left) {
            if (k == K) {
                std::size_t code = 0;
                for (std::size_t i = 0; i < K; ++i) code += action_radix_[i] * a[i];
                action_lookup_[code] = static_cast<int>(action_count());
                actions_.insert(actions_.end(), a.begin(), a.end());
                int tot = 0;
                for (int v : a) tot += v;
                action_total_.push_back(tot);
                return;
            }
            for (int x = 0; x <= std::min(left, chains_[k].max_level); ++x) {
                a[k] = x;
                rec(k + 1, left - x);
            }
            a[k] = 0;
        };
        rec(0, budget_);
        if (actions_.empty()) throw std::invalid_argument("empty action set");

        uniform_rate_ = 0;
        for (const auto& c : chains_) uniform_rate_ += c.max_rate();
        if (!(uniform_rate_ > 0)) throw std::invalid_argument("all transition rates are zero");
    }

    std::size_t projects() const { return chains_.size(); }
    std::size_t state_count() const { return n_states_; }
    std::size_t action_count() const { return action_total_.size(); }
    int budget() const { return budget_; }
    Sense sense() const { return sense_; }
    double level_price() const { return price_; }
    double uniform_rate() const { return uniform_rate_; }
    const ProjectChain& chain(std::size_t k) const { return chains_[k]; }

    std::span<const int> action(std::size_t id) const { return {actions_.data() + id * projects(), projects()}; }
    int action_total(std::size_t id) const { return action_total_[id]; }
    /// Index of an action vector in the admissible set, or -1.
    int action_id(std::span<const int> a) const {
        if (a.size() != projects()) return -1;
        std::size_t code = 0;
        for (std::size_t k = 0; k < projects(); ++k) {
            if (a[k] < 0 || a[k] > chains_[k].max_level) return -1;
            code += action_radix_[k] * a[k];
        }
        return action_lookup_[code];
    }

    std::size_t encode(std::span<const int> x) const {
        std::size_t s = 0;
        for (std::size_t k = 0; k < projects(); ++k) s += stride_[k] * static_cast<std::size_t>(x[k]);
        return s;
    }
    void decode(std::size_t s, std::vector<int>& x) const {
        x.resize(projects());
        for (std::size_t k = 0; k < projects(); ++k) {
            x[k] = static_cast<int>(s % static_cast<std::size_t>(chains_[k].states));
            s /= static_cast<std::size_t>(chains_[k].states);
        }
    }
    std::size_t stride(std::size_t k) const { return stride_[k]; }

    /// Stage cost in minimization form (reward problems are negated).
    double signed_stage(std::span<const int> x) const {
        double c = 0;
        for (std::size_t k = 0; k < projects(); ++k) c += chains_[k].stage[x[k]];
        return sense_ == Sense::minimize_cost ? c : -c;
    }
    /// Converts a minimization-form gain to the model's own sense.
    double to_sense(double g) const { return sense_ == Sense::minimize_cost ? g : -g; }

    /// Largest row rate sum over all (state, action), for the row-stochasticity check.
    double max_row_rate() const {
        double m = 0;
        std::vector<int> x;
        for (std::size_t s = 0; s < n_states_; ++s) {
            decode(s, x);
            for (std::size_t i = 0; i < action_count(); ++i) {
                auto a = action(i);
                double r = 0;
                for (std::size_t k = 0; k < projects(); ++k)
                    r += chains_[k].up_rate(a[k], x[k]) + chains_[k].down_rate(a[k], x[k]);
                m = std::max(m, r);
            }
        }
        return m;
    }

private:
    std::vector<ProjectChain> chains_;
    int budget_;
    Sense sense_;
    double price_;
    std::vector<std::size_t> stride_;
    std::size_t n_states_ = 0;
    std::vector<std::size_t> action_radix_;
    std::vector<int> action_lookup_;
    std::vector<int> actions_;
    std::vector<int> action_total_;
    double uniform_rate_ = 0;
};

inline TruncatedJointMdp build_joint(std::span<const StationModel> stations, int pool, std::span<const int> caps,
                                     std::size_t max_states = 5'000'000) {
    if (stations.empty()) throw std::invalid_argument("at least one station is required");
    if (caps.size() != stations.size()) throw std::invalid_argument("one cap per station is required");
    std::vector<ProjectChain> chains;
    for (std::size_t k = 0; k < stations.size(); ++k) {
        if (stations[k].pool_size() != pool) throw std::invalid_argument("station rate table must cover 0..S");
        chains.push_back(station_chain(stations[k], caps[k]));
    }
    return TruncatedJointMdp(std::move(chains), pool, Sense::minimize_cost, 0.0, max_states);
}

inline TruncatedJointMdp build_joint(std::span<const AssetModel> assets, int R, std::size_t max_states = 5'000'000) {
    if (assets.empty()) throw std::invalid_argument("at least one asset is required");
    std::vector<ProjectChain> chains;
    for (const auto& m : assets) {
        if (m.R != R) throw std::invalid_argument("asset level range must equal the shared budget R");
        chains.push_back(asset_chain(m));
    }
    return TruncatedJointMdp(std::move(chains), R, Sense::maximize_reward, 0.0, max_states);
}

/// Single-station Q(h): holding cost h n plus one unit per server per unit time.
inline TruncatedJointMdp station_q_mdp(StationModel s, double h, int cap) {
    s.h = h;
    std::vector<ProjectChain> c{station_chain(s, cap)};
    return TruncatedJointMdp(std::move(c), s.pool_size(), Sense::minimize_cost, 1.0);
}

/// Single-asset Q(h): return h d(n) less one unit per resource level per unit time.
inline TruncatedJointMdp asset_q_mdp(const AssetModel& m, double h) {
    std::vector<ProjectChain> c{asset_chain(m, h)};
    return TruncatedJointMdp(std::move(c), m.R, Sense::maximize_reward, 1.0);
}

/// Stationary deterministic joint policy: one action id per joint state.
using JointPolicy = std::vector<int>;

struct GainBiasSolution {
    double gain = 0;            // in the model's own sense
    std::vector<double> bias;   // minimization form, zero at the all-zero state
    JointPolicy policy;
    double span = 0;            // last Bellman span (per uniformized step) or residual
    long long sweeps = 0;
};

inline constexpr double kAperiodicSlack = 1.25;

struct SolverOptions {
    double tol = 1e-8;
    long long max_sweeps = 1'000'000;
    int max_policy_iterations = 500;
};

namespace detail {

/// Minimization-form action values for one state: out[i] = c(x,a_i) + sum of
/// rate * (v(y) - v(x)). Uses per-project partial sums since the action
/// effect separates across projects.
struct BellmanWorkspace {
    std::vector<std::vector<double>> partial;  // partial[k][a]
    std::vector<int> x;
};

inline void action_values(const TruncatedJointMdp& m, std::size_t s, const std::vector<double>& v,
                          BellmanWorkspace& w, std::vector<double>& out) {
    const std::size_t K = m.projects();
    m.decode(s, w.x);
    w.partial.resize(K);
    const double base = m.signed_stage(w.x);
    const double vs = v[s];
    for (std::size_t k = 0; k < K; ++k) {
        const auto& c = m.chain(k);
        const int xk = w.x[k];
        const double vu = xk + 1 < c.states ? v[s + m.stride(k)] - vs : 0.0;
        const double vd = xk > 0 ? v[s - m.stride(k)] - vs : 0.0;
        auto& p = w.partial[k];
        p.resize(static_cast<std::size_t>(c.max_level) + 1);
        for (int a = 0; a <= c.max_level; ++a) p[a] = c.up_rate(a, xk) * vu + c.down_rate(a, xk) * vd;
    }
    out.resize(m.action_count());
    for (std::size_t i = 0; i < m.action_count(); ++i) {
        auto a = m.action(i);
        double val = base + m.level_price() * m.action_total(i);
        for (std::size_t k = 0; k < K; ++k) val += w.partial[k][a[k]];
        out[i] = val;
    }
}

/// Minimum with ties resolved toward the largest total allocation, then the
/// last action in enumeration order.
inline std::size_t argmin_prefer_large(const TruncatedJointMdp& m, const std::vector<double>& vals, double tol) {
    double best = vals[0];
    for (double x : vals) best = std::min(best, x);
    std::size_t pick = 0;
    int pick_total = -1;
    for (std::size_t i = 0; i < vals.size(); ++i)
        if (vals[i] <= best + tol && m.action_total(i) >= pick_total) {
            pick = i;
            pick_total = m.action_total(i);
        }
    return pick;
}

}  // namespace detail

/// Relative value iteration on the uniformized chain,
/// Tv(x) = v(x) + min_a [c(x,a) + sum rate (v(y) - v(x))] / Lambda, with the
/// all-zero state as reference. Stops when span(Tv - v) < tol.
inline GainBiasSolution relative_value_iteration(const TruncatedJointMdp& m, SolverOptions opt = {}) {
    const std::size_t n = m.state_count();
    // Slack in the uniform rate leaves a self-loop everywhere; birth-death
    // chains at full service are otherwise periodic and the span oscillates.
    const double L = kAperiodicSlack * m.uniform_rate();
    std::vector<double> v(n, 0.0), next(n, 0.0), vals;
    detail::BellmanWorkspace w;
    GainBiasSolution sol;
    for (long long sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
        double lo = kInf, hi = -kInf;
        for (std::size_t s = 0; s < n; ++s) {
            detail::action_values(m, s, v, w, vals);
            const double best = *std::min_element(vals.begin(), vals.end());
            const double diff = best / L;
            next[s] = v[s] + diff;
            lo = std::min(lo, diff);
            hi = std::max(hi, diff);
        }
        const double ref = next[0];
        double vmax = 0;
        for (std::size_t s = 0; s < n; ++s) {
            v[s] = next[s] - ref;
            vmax = std::max(vmax, std::abs(v[s]));
        }
        sol.span = hi - lo;
        sol.sweeps = sweep;
        const double floor = 64 * std::numeric_limits<double>::epsilon() * vmax;
        if (sol.span < std::max(opt.tol, floor)) {
            sol.gain = m.to_sense(0.5 * (lo + hi) * L);
            sol.bias = v;
            sol.policy.resize(n);
            for (std::size_t s = 0; s < n; ++s) {
                detail::action_values(m, s, v, w, vals);
                sol.policy[s] = static_cast<int>(detail::argmin_prefer_large(m, vals, 10 * L * opt.tol));
            }
            return sol;
        }
    }
    throw SolverError("relative value iteration exceeded " + std::to_string(opt.max_sweeps) + " sweeps");
}

struct PolicyEvaluation {
    double gain = 0;           // model's sense
    std::vector<double> bias;  // minimization form, zero at the all-zero state
};

/// Exact gain and bias of a stationary policy from the linear system
/// g = c(x) + sum_y q(x,y) (v(y) - v(x)), v(0) = 0, solved by sparse LU.
/// Falls back to value iteration on the policy kernel above `direct_limit`
/// states.
inline PolicyEvaluation evaluate_policy(const TruncatedJointMdp& m, const JointPolicy& policy,
                                        std::size_t direct_limit = 200'000, SolverOptions opt = {}) {
    const std::size_t n = m.state_count();
    if (policy.size() != n) throw std::invalid_argument("policy must assign an action to every joint state");
    for (int id : policy)
        if (id < 0 || static_cast<std::size_t>(id) >= m.action_count())
            throw std::invalid_argument("policy uses an inadmissible action");
    const std::size_t K = m.projects();
    std::vector<int> x;

    if (n > direct_limit) {
        const double L = kAperiodicSlack * m.uniform_rate();
        std::vector<double> v(n, 0.0), next(n, 0.0);
        for (long long sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
            double lo = kInf, hi = -kInf;
            for (std::size_t s = 0; s < n; ++s) {
                m.decode(s, x);
                auto a = m.action(static_cast<std::size_t>(policy[s]));
                double val = m.signed_stage(x) + m.level_price() * m.action_total(static_cast<std::size_t>(policy[s]));
                for (std::size_t k = 0; k < K; ++k) {
                    const auto& c = m.chain(k);
                    if (x[k] + 1 < c.states) val += c.up_rate(a[k], x[k]) * (v[s + m.stride(k)] - v[s]);
                    if (x[k] > 0) val += c.down_rate(a[k], x[k]) * (v[s - m.stride(k)] - v[s]);
                }
                next[s] = v[s] + val / L;
                lo = std::min(lo, val / L);
                hi = std::max(hi, val / L);
            }
            const double ref = next[0];
            for (std::size_t s = 0; s < n; ++s) v[s] = next[s] - ref;
            if (hi - lo < opt.tol) return {m.to_sense(0.5 * (lo + hi) * L), v};
        }
        throw SolverError("policy evaluation by value iteration did not converge");
    }

    // Unknowns: v(1..n-1) in columns 1..n-1, gain in column 0.
    using Sp = Eigen::SparseMatrix<double>;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(n * (2 * K + 2));
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
    for (std::size_t s = 0; s < n; ++s) {
        m.decode(s, x);
        const auto id = static_cast<std::size_t>(policy[s]);
        auto a = m.action(id);
        rhs[static_cast<Eigen::Index>(s)] = m.signed_stage(x) + m.level_price() * m.action_total(id);
        const auto row = static_cast<Eigen::Index>(s);
        trip.emplace_back(row, 0, 1.0);
        double out = 0;
        for (std::size_t k = 0; k < K; ++k) {
            const auto& c = m.chain(k);
            if (x[k] + 1 < c.states) {
                const double q = c.up_rate(a[k], x[k]);
                if (q != 0) {
                    out += q;
                    const std::size_t y = s + m.stride(k);
                    trip.emplace_back(row, static_cast<Eigen::Index>(y), -q);
                }
            }
            if (x[k] > 0) {
                const double q = c.down_rate(a[k], x[k]);
                if (q != 0) {
                    out += q;
                    const std::size_t y = s - m.stride(k);
                    if (y != 0) trip.emplace_back(row, static_cast<Eigen::Index>(y), -q);
                }
            }
        }
        if (s != 0 && out != 0) trip.emplace_back(row, row, out);
    }
    Sp A(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();
    Eigen::SparseLU<Sp, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) throw SolverError("policy evaluation: singular system (policy not unichain?)");
    Eigen::VectorXd sol = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !sol.allFinite()) throw SolverError("policy evaluation: linear solve failed");
    PolicyEvaluation ev;
    ev.gain = m.to_sense(sol[0]);
    ev.bias.assign(n, 0.0);
    for (std::size_t s = 1; s < n; ++s) ev.bias[s] = sol[static_cast<Eigen::Index>(s)];
    return ev;
}

/// Howard policy iteration with exact sparse evaluation. A state switches
/// action only on strict improvement, so the result is stable; the returned
/// `span` is the largest Bellman residual of the final policy.
inline GainBiasSolution policy_iteration(const TruncatedJointMdp& m, JointPolicy start = {}, SolverOptions opt = {}) {
    const std::size_t n = m.state_count();
    std::vector<double> vals;
    detail::BellmanWorkspace w;
    JointPolicy pol = std::move(start);
    if (pol.empty()) {
        // Start from the maximal-allocation action everywhere.
        std::size_t best = 0;
        for (std::size_t i = 0; i < m.action_count(); ++i)
            if (m.action_total(i) > m.action_total(best)) best = i;
        pol.assign(n, static_cast<int>(best));
    }
    GainBiasSolution sol;
    for (int it = 1; it <= opt.max_policy_iterations; ++it) {
        auto ev = evaluate_policy(m, pol);
        const double g = m.sense() == Sense::minimize_cost ? ev.gain : -ev.gain;
        const double thresh = 1e-11 * (1 + std::abs(g));
        bool changed = false;
        double resid = 0;
        for (std::size_t s = 0; s < n; ++s) {
            detail::action_values(m, s, ev.bias, w, vals);
            const double cur = vals[static_cast<std::size_t>(pol[s])];
            const std::size_t b = detail::argmin_prefer_large(m, vals, thresh);
            const double best = vals[b];
            resid = std::max(resid, cur - best);
            if (best < cur - thresh) {
                pol[s] = static_cast<int>(b);
                changed = true;
            }
        }
        sol.sweeps = it;
        if (!changed) {
            sol.gain = ev.gain;
            sol.bias = std::move(ev.bias);
            sol.policy = std::move(pol);
            sol.span = resid;
            return sol;
        }
    }
    throw SolverError("policy iteration exceeded its iteration budget");
}

/// Joint policy from a state -> action rule.
inline JointPolicy policy_from_rule(const TruncatedJointMdp& m,
                                    const std::function<std::vector<int>(std::span<const int>)>& rule) {
    JointPolicy pol(m.state_count());
    std::vector<int> x;
    for (std::size_t s = 0; s < m.state_count(); ++s) {
        m.decode(s, x);
        auto a = rule(x);
        const int id = m.action_id(a);
        if (id < 0) throw std::invalid_argument("rule produced an inadmissible action");
        pol[s] = id;
    }
    return pol;
}

inline JointPolicy constant_policy(const TruncatedJointMdp& m, std::span<const int> a) {
    const int id = m.action_id(a);
    if (id < 0) throw std::invalid_argument("inadmissible static allocation");
    return JointPolicy(m.state_count(), id);
}

/// Greedy index policy on the joint MDP; every project consumes r(a,x) = a.
inline JointPolicy index_policy(const TruncatedJointMdp& m, std::span<const IndexTable> tables) {
    std::vector<ProjectSpec> specs;
    for (std::size_t k = 0; k < m.projects(); ++k)
        specs.push_back(ProjectSpec::unit_consumption(tables[k].states(), m.chain(k).max_level, m.sense(),
                                                      tables[k].countable()));
    const SystemSpec sys(std::move(specs), m.budget());
    return policy_from_rule(m, [&](std::span<const int> x) { return greedy_action(tables, x, sys); });
}

/// Single-project level profile of a one-project MDP policy.
inline PolicyTable single_project_levels(const TruncatedJointMdp& m, const JointPolicy& pol) {
    if (m.projects() != 1) throw std::invalid_argument("single-project MDP required");
    std::vector<int> u(pol.size());
    for (std::size_t s = 0; s < pol.size(); ++s) u[s] = m.action(static_cast<std::size_t>(pol[s]))[0];
    return PolicyTable(std::move(u), m.chain(0).max_level, false);
}

struct StaticResult {
    std::vector<int> allocation;
    double gain = 0;  // model's sense; +inf cost when no allocation stabilizes every queue
};

/// Best fixed allocation, queueing: closed-form M/M/1 cost sum h rho / (1 - rho).
inline StaticResult best_static(std::span<const StationModel> stations, int pool) {
    StaticResult best{std::vector<int>(stations.size(), 0), kInf};
    std::vector<int> a(stations.size(), 0);
    std::function<void(std::size_t, int)> rec = [&](std::size_t k, int left) {
        if (k == stations.size()) {
            double g = 0;
            for (std::size_t i = 0; i < stations.size(); ++i) {
                const double mu = stations[i].mu[a[i]];
                const double rho = mu > 0 ? stations[i].lambda / mu : kInf;
                if (!(rho < 1)) {
                    g = kInf;
                    break;
                }
                g += stations[i].h * rho / (1 - rho);
            }
            if (g < best.gain) best = {a, g};
            return;
        }
        for (int x = 0; x <= left; ++x) {
            a[k] = x;
            rec(k + 1, left - x);
        }
        a[k] = 0;
    };
    rec(0, pool);
    return best;
}

/// Stationary mean return of an asset held at a constant level.
inline double asset_static_return(const AssetModel& m, int level) {
    std::vector<int> u(static_cast<std::size_t>(m.A) + 1, level);
    return asset_stationary_gain(m, PolicyTable(u, m.R, false), 1.0) + level;
}

/// Best fixed allocation, plates: per-asset birth-death stationary returns.
inline StaticResult best_static(std::span<const AssetModel> assets, int R) {
    StaticResult best{std::vector<int>(assets.size(), 0), -kInf};
    std::vector<std::vector<double>> table(assets.size());
    for (std::size_t k = 0; k < assets.size(); ++k)
        for (int a = 0; a <= assets[k].R; ++a) table[k].push_back(asset_static_return(assets[k], a));
    std::vector<int> a(assets.size(), 0);
    std::function<void(std::size_t, int)> rec = [&](std::size_t k, int left) {
        if (k == assets.size()) {
            double g = 0;
            for (std::size_t i = 0; i < assets.size(); ++i) g += table[i][a[i]];
            if (g > best.gain) best = {a, g};
            return;
        }
        for (int x = 0; x <= std::min(left, assets[k].R); ++x) {
            a[k] = x;
            rec(k + 1, left - x);
        }
        a[k] = 0;
    };
    rec(0, R);
    return best;
}

/// Cost sense: 100 (g_p - g_o) / g_o. Reward sense: 100 (g_o - g_p) / g_o.
/// Values within `tol` (relative) of zero are reported as 0.
inline double percentage_excess(double gamma_policy, double gamma_opt, Sense sense, double tol = 1e-9) {
    if (!std::isfinite(gamma_opt) || !(gamma_opt > 0))
        throw std::domain_error("optimal gain must be finite and positive");
    if (std::isinf(gamma_policy)) return kInf;
    const double gap = sense == Sense::minimize_cost ? gamma_policy - gamma_opt : gamma_opt - gamma_policy;
    double pct = 100.0 * gap / gamma_opt;
    if (std::abs(gap) <= tol * (1 + std::abs(gamma_opt))) pct = 0.0;
    return pct;
}

}  // namespace idxalloc
