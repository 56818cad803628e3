#pragma once

// Model-agnostic pieces of the divisible-resource allocation framework:
// projects, index tables, policy tables, and the two action constructors
// (greedy index heuristic and the Lagrangian policy u(W)).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace idxalloc {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { minimize_cost, maximize_reward };

/// Raised when a numerical procedure cannot produce a trustworthy answer
/// (iteration budget exhausted, internal inconsistency, stagnation).
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One project of the allocation problem. Per-(level, state) tables are stored
/// level-major: entry (a, x) lives at a * states + x.
struct ProjectSpec {
    int states = 1;      // finite state count, or truncation cap + 1
    int max_level = 0;   // L
    std::vector<double> consumption;  // r(a, x)
    std::vector<double> cost;         // c(a, x)
    Sense sense = Sense::minimize_cost;
    bool countable = false;           // states beyond the cap reuse the cap column

    int column(int x) const {
        if (x < 0) throw std::out_of_range("negative project state");
        if (x >= states) {
            if (!countable) throw std::out_of_range("project state out of range");
            return states - 1;
        }
        return x;
    }
    double r(int a, int x) const { return consumption[static_cast<std::size_t>(a) * states + column(x)]; }
    double c(int a, int x) const { return cost[static_cast<std::size_t>(a) * states + column(x)]; }

    void validate() const {
        if (states < 1) throw std::invalid_argument("project needs at least one state");
        if (max_level < 0) throw std::invalid_argument("max level must be nonnegative");
        const auto cells = static_cast<std::size_t>(max_level + 1) * states;
        if (consumption.size() != cells || cost.size() != cells)
            throw std::invalid_argument("project tables have the wrong size");
        for (int x = 0; x < states; ++x) {
            for (int a = 0; a <= max_level; ++a) {
                if (!std::isfinite(r(a, x)) || !std::isfinite(c(a, x)))
                    throw std::invalid_argument("project rates must be finite");
                if (r(a, x) < 0) throw std::invalid_argument("consumption must be nonnegative");
                if (a > 0 && r(a, x) < r(a - 1, x))
                    throw std::invalid_argument("consumption must be nondecreasing in the level");
            }
        }
    }

    /// r(a, x) = a, zero cost. The queueing and asset models both consume
    /// resource at exactly the allocated level.
    static ProjectSpec unit_consumption(int states, int max_level, Sense sense = Sense::minimize_cost,
                                        bool countable = false) {
        ProjectSpec p;
        p.states = states;
        p.max_level = max_level;
        p.sense = sense;
        p.countable = countable;
        p.consumption.resize(static_cast<std::size_t>(max_level + 1) * states);
        p.cost.assign(p.consumption.size(), 0.0);
        for (int a = 0; a <= max_level; ++a)
            for (int x = 0; x < states; ++x) p.consumption[static_cast<std::size_t>(a) * states + x] = a;
        p.validate();
        return p;
    }
};

struct SystemSpec {
    std::vector<ProjectSpec> projects;
    double resource = 0.0;  // R

    SystemSpec() = default;
    SystemSpec(std::vector<ProjectSpec> ps, double r) : projects(std::move(ps)), resource(r) {
        if (!(resource >= 0) || !std::isfinite(resource))
            throw std::invalid_argument("resource rate must be finite and nonnegative");
        // The all-zero action must be admissible in every joint state.
        double worst_idle = 0.0;
        for (const auto& p : projects) {
            p.validate();
            double m = 0.0;
            for (int x = 0; x < p.states; ++x) m = std::max(m, p.r(0, x));
            worst_idle += m;
        }
        if (worst_idle > resource)
            throw std::invalid_argument("some joint state has no admissible action");
    }
};

/// W(a, x) for a in 0..L-1, extended with W(-1, x) = +inf and W(L, x) = 0.
class IndexTable {
public:
    struct Lookup {
        double value;
        bool beyond_cap;
    };

    IndexTable() = default;
    IndexTable(int max_level, int states, std::vector<double> values, bool countable = false,
               bool grid_limited = false)
        : max_level_(max_level), states_(states), values_(std::move(values)), countable_(countable),
          grid_limited_(grid_limited) {
        if (max_level_ < 0 || states_ < 1) throw std::invalid_argument("bad index table shape");
        if (values_.size() != static_cast<std::size_t>(max_level_) * states_)
            throw std::invalid_argument("index table has the wrong number of entries");
        for (double w : values_)
            if (std::isnan(w) || w < 0) throw std::invalid_argument("index values must be nonnegative");
    }

    int max_level() const { return max_level_; }
    int states() const { return states_; }
    bool countable() const { return countable_; }
    bool grid_limited() const { return grid_limited_; }

    Lookup lookup(int a, int x) const {
        if (x < 0) throw std::out_of_range("negative state in index lookup");
        bool beyond = false;
        if (x >= states_) {
            if (!countable_) throw std::out_of_range("state out of index table range");
            beyond = true;
            x = states_ - 1;
        }
        if (a < 0) return {kInf, beyond};
        if (a >= max_level_) return {0.0, beyond};
        return {values_[static_cast<std::size_t>(a) * states_ + x], beyond};
    }
    double operator()(int a, int x) const { return lookup(a, x).value; }

    /// Pairs (a, x) where W(a, x) < W(a + 1, x), i.e. the index fails to be
    /// nonincreasing in the level.
    std::vector<std::pair<int, int>> level_monotonicity_violations(double tol = 0.0) const {
        std::vector<std::pair<int, int>> out;
        for (int x = 0; x < states_; ++x)
            for (int a = 0; a + 1 < max_level_; ++a) {
                double lo = (*this)(a, x), hi = (*this)(a + 1, x);
                if (hi > lo + tol * (1.0 + std::abs(lo))) out.emplace_back(a, x);
            }
        return out;
    }

    const std::vector<double>& raw() const { return values_; }

private:
    int max_level_ = 0;
    int states_ = 1;
    std::vector<double> values_;
    bool countable_ = false;
    bool grid_limited_ = false;
};

class PolicyTable {
public:
    PolicyTable() = default;
    PolicyTable(std::vector<int> levels, int max_level, bool monotone = false)
        : levels_(std::move(levels)), max_level_(max_level), monotone_(monotone) {
        if (levels_.empty()) throw std::invalid_argument("policy table needs at least one state");
        for (int u : levels_)
            if (u < 0 || u > max_level_) throw std::invalid_argument("policy level out of [0, L]");
        if (monotone_ && !std::is_sorted(levels_.begin(), levels_.end()))
            throw std::invalid_argument("policy flagged monotone but decreases in state");
    }

    int operator()(int x) const {
        if (x < 0) throw std::out_of_range("negative state in policy lookup");
        if (x >= static_cast<int>(levels_.size())) return levels_.back();
        return levels_[static_cast<std::size_t>(x)];
    }
    int states() const { return static_cast<int>(levels_.size()); }
    int max_level() const { return max_level_; }
    bool monotone() const { return monotone_; }
    bool is_nondecreasing() const { return std::is_sorted(levels_.begin(), levels_.end()); }
    const std::vector<int>& levels() const { return levels_; }

    friend bool operator==(const PolicyTable& a, const PolicyTable& b) {
        return a.levels_ == b.levels_ && a.max_level_ == b.max_level_;
    }

private:
    std::vector<int> levels_;
    int max_level_ = 0;
    bool monotone_ = false;
};

namespace detail {
inline void check_joint(std::span<const IndexTable> tables, std::span<const int> state, std::size_t projects) {
    if (tables.size() != projects || state.size() != projects)
        throw std::invalid_argument("one index table and one state per project required");
}
}  // namespace detail

/// Greedy index heuristic: starting from the zero allocation, repeatedly add
/// one level to the project with the largest current index while the
/// resource constraint allows. Ties go to the lowest project number; the
/// construction also stops once the largest remaining index is zero.
inline std::vector<int> greedy_action(std::span<const IndexTable> tables, std::span<const int> state,
                                      const SystemSpec& spec) {
    const auto K = spec.projects.size();
    detail::check_joint(tables, state, K);
    for (std::size_t k = 0; k < K; ++k) {
        if (tables[k].max_level() != spec.projects[k].max_level)
            throw std::invalid_argument("index table level range does not match project");
        spec.projects[k].column(state[k]);
        if (!tables[k].countable() && state[k] >= tables[k].states())
            throw std::out_of_range("state out of index table range");
    }

    std::vector<int> a(K, 0);
    double used = 0.0;
    for (std::size_t k = 0; k < K; ++k) used += spec.projects[k].r(0, state[k]);

    while (used < spec.resource) {
        std::size_t best = K;
        double best_w = -kInf;
        for (std::size_t k = 0; k < K; ++k) {
            if (a[k] >= spec.projects[k].max_level) continue;
            double w = tables[k](a[k], state[k]);
            if (w > best_w) {
                best_w = w;
                best = k;
            }
        }
        if (best == K || !(best_w > 0.0)) break;
        const auto& p = spec.projects[best];
        double next = used - p.r(a[best], state[best]) + p.r(a[best] + 1, state[best]);
        if (next > spec.resource) break;
        ++a[best];
        used = next;
    }
    return a;
}

/// Action of the Lagrangian policy u(W): each project independently takes the
/// level a with W(a-1, x) > W >= W(a, x). No resource constraint is applied.
inline std::vector<int> lagrange_action(std::span<const IndexTable> tables, std::span<const int> state,
                                        double charge) {
    if (std::isnan(charge) || charge < 0) throw std::invalid_argument("resource charge must be nonnegative");
    detail::check_joint(tables, state, tables.size());
    std::vector<int> a(tables.size(), 0);
    for (std::size_t k = 0; k < tables.size(); ++k) {
        int level = 0;
        while (level < tables[k].max_level() && tables[k](level, state[k]) > charge) ++level;
        a[k] = level;
    }
    return a;
}

struct NestingViolation {
    double charge_low;
    double charge_high;
    int project;
    int level;
    int state;
};

struct IndexabilityReport {
    bool pass = true;
    std::vector<NestingViolation> violations;
};

/// Checks that the set {x : u(W, x) <= a} grows with the charge W for every
/// project and level, across every pair of grid points.
inline IndexabilityReport validate_full_indexability(const std::map<double, std::vector<PolicyTable>>& family) {
    if (family.empty()) throw std::invalid_argument("empty multiplier grid");
    const std::size_t K = family.begin()->second.size();
    for (const auto& [w, ps] : family) {
        if (std::isnan(w)) throw std::invalid_argument("NaN multiplier");
        if (ps.size() != K) throw std::invalid_argument("every grid point needs one policy per project");
    }

    IndexabilityReport report;
    for (auto lo = family.begin(); lo != family.end(); ++lo) {
        for (auto hi = std::next(lo); hi != family.end(); ++hi) {
            for (std::size_t k = 0; k < K; ++k) {
                const auto& u_lo = lo->second[k];
                const auto& u_hi = hi->second[k];
                const int L = std::max(u_lo.max_level(), u_hi.max_level());
                const int n = std::max(u_lo.states(), u_hi.states());
                for (int x = 0; x < n; ++x) {
                    // x in Pi{u(W), a} but not in Pi{u(W'), a} for a in [u(W,x), u(W',x)-1]
                    for (int a = u_lo(x); a < u_hi(x) && a < L; ++a)
                        report.violations.push_back({lo->first, hi->first, static_cast<int>(k), a, x});
                }
            }
        }
    }
    report.pass = report.violations.empty();
    return report;
}

enum class FamilyKind {
    breakpoints,  // each entry starts an interval of constant optimal policy
    grid,         // sampled multipliers; the infimum is only resolved to the grid
};

/// W(a, x) = inf{ W : u(W, x) <= a } over the family. Entry (W_i, u_i) is read
/// as "u_i is optimal from W_i up to the next grid point"; for breakpoint
/// families the infimum is therefore exact.
inline IndexTable index_from_policy_family(const std::map<double, PolicyTable>& family,
                                           FamilyKind kind = FamilyKind::breakpoints,
                                           bool countable = false) {
    if (family.empty()) throw std::invalid_argument("empty multiplier grid");
    std::map<double, std::vector<PolicyTable>> wrapped;
    for (const auto& [w, u] : family) {
        if (w < 0) throw std::invalid_argument("multipliers must be nonnegative");
        wrapped.emplace(w, std::vector<PolicyTable>{u});
    }
    if (!validate_full_indexability(wrapped).pass) throw std::invalid_argument("non-nested policy family");

    int L = 0, n = 0;
    for (const auto& [w, u] : family) {
        L = std::max(L, u.max_level());
        n = std::max(n, u.states());
    }
    std::vector<double> values(static_cast<std::size_t>(L) * n, kInf);
    for (int x = 0; x < n; ++x) {
        for (const auto& [w, u] : family) {  // ascending W: first hit is the infimum
            for (int a = u(x); a < L; ++a) {
                auto& cell = values[static_cast<std::size_t>(a) * n + x];
                if (cell == kInf) cell = w;
            }
        }
    }
    return IndexTable(L, n, std::move(values), countable, kind == FamilyKind::grid);
}

}  // namespace idxalloc
