#pragma once

// Finite-state birth-death assets ("spinning plates"): single-asset Q(h)
// solutions, the descending-h breakpoint sweep, indices and the myopic rule.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "idxalloc/core.hpp"

namespace idxalloc {

struct AssetModel {
    int A = 1;  // top state
    int R = 1;  // largest resource level
    // up[a][n], n = 0..A (up[a][A] is unused and kept at 0);
    // down[a][n], n = 0..A (down[a][0] is unused and kept at 0).
    std::vector<std::vector<double>> up;
    std::vector<std::vector<double>> down;
    std::vector<double> d;  // return rate per state

    double lambda(int a, int n) const { return n < A ? up[a][n] : 0.0; }
    double mu(int a, int n) const { return n > 0 ? down[a][n] : 0.0; }

    static AssetModel from_functions(int A, int R, const std::function<double(int, int)>& lam,
                                     const std::function<double(int, int)>& mu, std::vector<double> d) {
        AssetModel m;
        m.A = A;
        m.R = R;
        m.up.assign(static_cast<std::size_t>(R) + 1, std::vector<double>(static_cast<std::size_t>(A) + 1, 0.0));
        m.down = m.up;
        for (int a = 0; a <= R; ++a) {
            for (int n = 0; n < A; ++n) m.up[a][n] = lam(a, n);
            for (int n = 1; n <= A; ++n) m.down[a][n] = mu(a, n);
        }
        m.d = std::move(d);
        return m;
    }

    std::vector<std::string> violations() const {
        std::vector<std::string> out;
        if (A < 1) out.emplace_back("top state A must be at least 1");
        if (R < 1) out.emplace_back("resource level R must be at least 1");
        if (!out.empty()) return out;
        const auto rows = static_cast<std::size_t>(R) + 1, cols = static_cast<std::size_t>(A) + 1;
        if (up.size() != rows || down.size() != rows || d.size() != cols) {
            out.emplace_back("rate or return table dimensions do not match (R+1) x (A+1)");
            return out;
        }
        for (std::size_t a = 0; a < rows; ++a)
            if (up[a].size() != cols || down[a].size() != cols) {
                out.emplace_back("rate table row has wrong length");
                return out;
            }
        for (int a = 0; a <= R; ++a)
            for (int n = 0; n <= A; ++n) {
                if (!std::isfinite(up[a][n]) || !std::isfinite(down[a][n]) || up[a][n] < 0 || down[a][n] < 0) {
                    out.emplace_back("rates must be finite and nonnegative");
                    return out;
                }
            }
        for (int n = 0; n < A; ++n) {
            for (int a = 0; a < R; ++a)
                if (!(up[a + 1][n] > up[a][n])) {
                    out.emplace_back("up rate not strictly increasing in a at n=" + std::to_string(n));
                    break;
                }
            for (int a = 1; a < R; ++a)
                if (!(up[a + 1][n] - 2 * up[a][n] + up[a - 1][n] < 0)) {
                    out.emplace_back("up rate not strictly concave in a at n=" + std::to_string(n));
                    break;
                }
        }
        for (int n = 1; n <= A; ++n) {
            for (int a = 0; a < R; ++a)
                if (!(down[a + 1][n] < down[a][n])) {
                    out.emplace_back("down rate not strictly decreasing in a at n=" + std::to_string(n));
                    break;
                }
            for (int a = 1; a < R; ++a)
                if (!(down[a + 1][n] - 2 * down[a][n] + down[a - 1][n] > 0)) {
                    out.emplace_back("down rate not strictly convex in a at n=" + std::to_string(n));
                    break;
                }
        }
        for (int n = 0; n < A; ++n)
            if (d[n + 1] < d[n] || !std::isfinite(d[n])) {
                out.emplace_back("return rate must be finite and nondecreasing in the state");
                break;
            }
        return out;
    }

    void validate() const {
        auto v = violations();
        if (!v.empty()) throw std::invalid_argument("invalid asset: " + v.front());
    }

    /// max_n {lambda(R,n) + mu(0,n)}
    double max_event_rate() const {
        double m = 0;
        for (int n = 0; n <= A; ++n) m = std::max(m, lambda(R, n) + mu(0, n));
        return m;
    }
};

struct UniformizedAsset {
    AssetModel asset;
    double scale = 1.0;  // original rates were divided by this
};

/// Rescales time so that max_n {lambda(R,n) + mu(0,n)} = 1. Returns rates d
/// are per unit of the new clock as well, so gains are unchanged and optimal
/// policies are identical.
inline UniformizedAsset uniformize_asset(const AssetModel& asset) {
    asset.validate();
    const double s = asset.max_event_rate();
    if (!(s > 0)) throw std::invalid_argument("cannot uniformize an asset whose rates are all zero");
    UniformizedAsset out{asset, s};
    for (auto& row : out.asset.up)
        for (double& x : row) x /= s;
    for (auto& row : out.asset.down)
        for (double& x : row) x /= s;
    return out;
}

/// Downward first-passage quantities of an asset under a fixed policy. All
/// per-state vectors have length A+1 with entry 0 unused; `step_*` are the
/// one-level passages n -> n-1 and the cumulative T, chi, psi are passages
/// n -> 0.
struct AssetPassage {
    int A = 0;
    std::vector<double> step_time, step_return, step_resource;
    std::vector<double> T, chi, psi;
    double rate_up0 = 0;    // lambda(u(0), 0)
    double d0 = 0;          // d(0)
    int u0 = 0;

    /// gamma(u,h) = gain_slope * h + gain_offset
    double gain_slope = 0, gain_offset = 0;
    /// Delta v(u,h,n) = dv_slope[n] * h + dv_offset[n], n = 1..A
    std::vector<double> dv_slope, dv_offset;

    double gain(double h) const { return gain_slope * h + gain_offset; }
    double delta_v(double h, int n) const { return dv_slope[n] * h + dv_offset[n]; }
};

inline AssetPassage asset_first_passage(const AssetModel& asset, const PolicyTable& u) {
    const int A = asset.A;
    if (u.max_level() != asset.R) throw std::invalid_argument("policy level range does not match asset");
    AssetPassage p;
    p.A = A;
    const auto sz = static_cast<std::size_t>(A) + 1;
    p.step_time.assign(sz, 0);
    p.step_return.assign(sz, 0);
    p.step_resource.assign(sz, 0);
    for (int n = A; n >= 1; --n) {
        const int a = u(n);
        const double mu = asset.mu(a, n);
        if (!(mu > 0)) throw std::invalid_argument("state 0 unreachable: zero down rate at n=" + std::to_string(n));
        const double lam = asset.lambda(a, n);
        const double tn = n < A ? p.step_time[n + 1] : 0.0;
        const double xn = n < A ? p.step_return[n + 1] : 0.0;
        const double yn = n < A ? p.step_resource[n + 1] : 0.0;
        p.step_time[n] = (1 + lam * tn) / mu;
        p.step_return[n] = (asset.d[n] + lam * xn) / mu;
        p.step_resource[n] = (a + lam * yn) / mu;
    }
    p.T.assign(sz, 0);
    p.chi.assign(sz, 0);
    p.psi.assign(sz, 0);
    for (int n = 1; n <= A; ++n) {
        p.T[n] = p.T[n - 1] + p.step_time[n];
        p.chi[n] = p.chi[n - 1] + p.step_return[n];
        p.psi[n] = p.psi[n - 1] + p.step_resource[n];
    }
    p.u0 = u(0);
    p.d0 = asset.d[0];
    p.rate_up0 = asset.lambda(p.u0, 0);

    // Recurrent class {0..k}: k is the first state whose up rate vanishes.
    int k = 0;
    while (k < A && asset.lambda(u(k), k) > 0) ++k;
    std::vector<double> pi(static_cast<std::size_t>(k) + 1, 1.0);
    double mass = 1.0;
    for (int n = 1; n <= k; ++n) {
        pi[n] = pi[n - 1] * asset.lambda(u(n - 1), n - 1) / asset.mu(u(n), n);
        mass += pi[n];
    }
    p.gain_slope = 0;
    p.gain_offset = 0;
    for (int n = 0; n <= k; ++n) {
        pi[n] /= mass;
        p.gain_slope += pi[n] * asset.d[n];
        p.gain_offset -= pi[n] * u(n);
    }

    p.dv_slope.assign(sz, 0);
    p.dv_offset.assign(sz, 0);
    // Inside the class: pi_n lambda_n dv(n+1) = sum_{m<=n} pi_m (g - r_m), or
    // minus the same sum over m > n, whichever side carries less mass.
    std::vector<double> lo_s(static_cast<std::size_t>(k) + 1), lo_o(lo_s.size()), lo_mass(lo_s.size());
    double cs = 0, co = 0, cm = 0;
    for (int n = 0; n <= k; ++n) {
        cs += pi[n] * (p.gain_slope - asset.d[n]);
        co += pi[n] * (p.gain_offset + u(n));
        cm += pi[n];
        lo_s[n] = cs;
        lo_o[n] = co;
        lo_mass[n] = cm;
    }
    double hs = 0, ho = 0;
    for (int n = k - 1; n >= 0; --n) {
        hs -= pi[n + 1] * (p.gain_slope - asset.d[n + 1]);
        ho -= pi[n + 1] * (p.gain_offset + u(n + 1));
        const double flux = pi[n] * asset.lambda(u(n), n);
        const bool lower = lo_mass[n] <= 0.5;
        p.dv_slope[n + 1] = (lower ? lo_s[n] : hs) / flux;
        p.dv_offset[n + 1] = (lower ? lo_o[n] : ho) / flux;
    }
    // Transient states above the class drain downward.
    for (int n = k + 1; n <= A; ++n) {
        p.dv_slope[n] = p.step_return[n] - p.gain_slope * p.step_time[n];
        p.dv_offset[n] = -p.step_resource[n] - p.gain_offset * p.step_time[n];
    }
    return p;
}

namespace detail {

/// Bracketed term of the Q(h) optimality equation for action a at n.
inline double asset_action_value(const AssetModel& m, int a, int n, const std::vector<double>& dv) {
    double v = -a;
    if (n < m.A) v += m.lambda(a, n) * dv[n + 1];
    if (n > 0) v -= m.mu(a, n) * dv[n];
    return v;
}

inline std::vector<double> dv_at(const AssetPassage& p, double h) {
    std::vector<double> dv(static_cast<std::size_t>(p.A) + 1, 0.0);
    for (int n = 1; n <= p.A; ++n) dv[n] = p.delta_v(h, n);
    return dv;
}

inline std::vector<int> maximal_greedy(const AssetModel& m, const std::vector<double>& dv, double tol) {
    std::vector<int> u(static_cast<std::size_t>(m.A) + 1, 0);
    for (int n = 0; n <= m.A; ++n) {
        double best = -kInf;
        for (int a = 0; a <= m.R; ++a) best = std::max(best, asset_action_value(m, a, n, dv));
        int pick = 0;
        for (int a = 0; a <= m.R; ++a)
            if (asset_action_value(m, a, n, dv) >= best - tol) pick = a;
        u[n] = pick;
    }
    return u;
}

}  // namespace detail

struct AssetSolution {
    PolicyTable policy;
    double gain = 0;
    std::vector<double> delta_v;  // entry 0 unused
    int iterations = 0;
};

/// Policy iteration for Q(h) with exact evaluation through the passage
/// recursions. Among optimal actions the largest level is returned.
inline AssetSolution solve_q_asset(const AssetModel& asset, double h, const PolicyTable* start = nullptr,
                                   double tol = 1e-12, int max_iterations = 1000) {
    asset.validate();
    if (!(h >= 0) || !std::isfinite(h)) throw std::invalid_argument("reward multiplier h must be finite and nonnegative");
    const int A = asset.A, R = asset.R;
    std::vector<int> u(static_cast<std::size_t>(A) + 1, R);
    if (start) {
        if (start->max_level() != R) throw std::invalid_argument("start policy level range does not match asset");
        for (int n = 0; n <= A; ++n) u[n] = (*start)(n);
    }
    const double scale_tol = tol * (1 + h);
    for (int it = 1; it <= max_iterations; ++it) {
        const PolicyTable cur(u, R, false);
        const auto p = asset_first_passage(asset, cur);
        const auto dv = detail::dv_at(p, h);
        bool changed = false;
        for (int n = 0; n <= A; ++n) {
            const double here = detail::asset_action_value(asset, u[n], n, dv);
            int best_a = u[n];
            double best = here;
            for (int a = 0; a <= R; ++a) {
                double v = detail::asset_action_value(asset, a, n, dv);
                if (v > best + scale_tol) {
                    best = v;
                    best_a = a;
                }
            }
            if (best_a != u[n]) {
                u[n] = best_a;
                changed = true;
            }
        }
        if (!changed) {
            auto final_u = detail::maximal_greedy(asset, dv, scale_tol);
            if (final_u != u) {
                const PolicyTable fin(final_u, R, false);
                const auto pf = asset_first_passage(asset, fin);
                if (pf.gain(h) >= p.gain(h) - 1e-9 * (1 + std::abs(p.gain(h)))) {
                    return {fin, pf.gain(h), detail::dv_at(pf, h), it};
                }
            }
            return {cur, p.gain(h), dv, it};
        }
    }
    throw SolverError("policy iteration for Q(h) did not converge within " + std::to_string(max_iterations) +
                      " iterations");
}

/// Stationary-distribution evaluation of h D(u) - R(u) (independent of the
/// passage recursions).
inline double asset_stationary_gain(const AssetModel& asset, const PolicyTable& u, double h) {
    const int A = asset.A;
    std::vector<double> w(static_cast<std::size_t>(A) + 1, 0.0);
    w[0] = 1.0;
    int top = 0;
    while (top < A && asset.lambda(u(top), top) > 0) {
        const double dn = asset.mu(u(top + 1), top + 1);
        if (!(dn > 0)) throw std::invalid_argument("state 0 unreachable under policy");
        w[top + 1] = w[top] * asset.lambda(u(top), top) / dn;
        ++top;
    }
    double z = 0, g = 0;
    for (int n = 0; n <= top; ++n) {
        z += w[n];
        g += w[n] * (h * asset.d[n] - u(n));
    }
    return g / z;
}

/// States where the two-sided optimality condition fails by more than tol.
/// Conventions: lambda(R+1) = lambda(R), lambda(-1) = -inf, mu(R+1) = mu(R),
/// mu(-1) = +inf.
inline std::vector<int> asset_certificate_failures(const AssetModel& asset, double h, const PolicyTable& u,
                                                   double tol = 1e-8) {
    const auto p = asset_first_passage(asset, u);
    const auto dv = detail::dv_at(p, h);
    const int A = asset.A, R = asset.R;
    std::vector<int> bad;
    for (int n = 0; n <= A; ++n) {
        const int a = u(n);
        const int hi = std::min(a + 1, R);
        double lhs = 0, rhs = 0;
        if (n < A) lhs += dv[n + 1] * (asset.lambda(hi, n) - asset.lambda(a, n));
        if (n > 0) lhs += dv[n] * (asset.mu(a, n) - asset.mu(hi, n));
        if (a == 0) {
            rhs = kInf;
        } else {
            if (n < A) rhs += dv[n + 1] * (asset.lambda(a, n) - asset.lambda(a - 1, n));
            if (n > 0) rhs += dv[n] * (asset.mu(a - 1, n) - asset.mu(a, n));
            if (n == 0 && A == 0) rhs = 0;
        }
        // At a = R the left side is 0 by convention, so only the right side binds.
        if (!(lhs <= 1 + tol) || !(1 - tol <= rhs)) bad.push_back(n);
    }
    return bad;
}

struct AssetBreakpoints {
    AssetModel asset;
    std::vector<double> h;                 // h_1 > h_2 > ... > h_M > 0
    std::vector<PolicyTable> policies;     // policies[m] optimal on (h_{m+1}, h_m), h_0 = +inf; size M+1
    std::vector<AssetPassage> passages;    // affine data for each interval policy
    double h_start = 1;                    // multiplier at which the all-R policy was confirmed

    int size() const { return static_cast<int>(h.size()); }

    /// Interval index m with h in (h_{m+1}, h_m).
    int interval_of(double x) const {
        int m = 0;
        while (m < size() && h[static_cast<std::size_t>(m)] >= x) ++m;
        return m;
    }
    const PolicyTable& policy_at(double x) const { return policies[static_cast<std::size_t>(interval_of(x))]; }
    /// Policy optimal just above breakpoint i (0-based).
    const PolicyTable& policy_above(int i) const { return policies[static_cast<std::size_t>(i)]; }

    /// Charge-space family W = 1/h: all-R at W = 0, then each breakpoint's lower policy.
    std::map<double, PolicyTable> charge_family() const {
        std::map<double, PolicyTable> fam;
        fam.emplace(0.0, policies.front());
        for (int i = 0; i < size(); ++i)
            fam.insert_or_assign(1.0 / h[static_cast<std::size_t>(i)], policies[static_cast<std::size_t>(i) + 1]);
        return fam;
    }

    /// Per-state levels must not increase as h falls.
    std::vector<std::string> nesting_violations() const {
        std::vector<std::string> out;
        for (std::size_t m = 0; m + 1 < policies.size(); ++m)
            for (int n = 0; n <= asset.A; ++n)
                if (policies[m + 1](n) > policies[m](n))
                    out.push_back("level rises at n=" + std::to_string(n) + " below h=" + std::to_string(h[m]));
        return out;
    }
};

struct AssetSweepOptions {
    double step = 1e-8;       // relative offset below a breakpoint for the re-solve
    double tol = 1e-12;       // policy-iteration improvement threshold
    long long max_breakpoints = 100000;
};

/// Descending-h sweep: on the current policy every alternative action's
/// advantage is affine in h, so the next breakpoint is the largest root below
/// the current h among alternatives whose advantage grows as h falls. The new
/// policy is recomputed by policy iteration just below that root.
inline AssetBreakpoints asset_breakpoints(const AssetModel& asset, AssetSweepOptions opt = {}) {
    asset.validate();
    const int A = asset.A, R = asset.R;
    AssetBreakpoints out;
    out.asset = asset;

    double h = 1.0;
    AssetSolution sol = solve_q_asset(asset, h, nullptr, opt.tol);
    auto all_max = [&](const PolicyTable& u) {
        for (int n = 0; n <= A; ++n)
            if (u(n) != R) return false;
        return true;
    };
    while (!all_max(sol.policy)) {
        h *= 2;
        if (h > 1152921504606846976.0) throw SolverError("maximal-resource policy never became optimal below h = 2^60");
        sol = solve_q_asset(asset, h, &sol.policy, opt.tol);
    }
    out.h_start = h;
    out.policies.push_back(sol.policy);
    out.passages.push_back(asset_first_passage(asset, sol.policy));

    double h_cur = h;
    for (long long guard = 0;; ++guard) {
        if (guard > opt.max_breakpoints) throw SolverError("asset breakpoint sweep exceeded its step budget");
        const PolicyTable& u = out.policies.back();
        const AssetPassage& p = out.passages.back();
        bool all_zero = true;
        for (int n = 0; n <= A; ++n) all_zero = all_zero && u(n) == 0;
        if (all_zero) break;

        double next = -kInf;
        for (int n = 0; n <= A; ++n) {
            const int a0 = u(n);
            // Advantage of b over a0: (P h + Q) built from the affine Delta v.
            auto coeffs = [&](int b) {
                double P = 0, Q = -(b - a0);
                if (n < A) {
                    const double dl = asset.lambda(b, n) - asset.lambda(a0, n);
                    P += dl * p.dv_slope[n + 1];
                    Q += dl * p.dv_offset[n + 1];
                }
                if (n > 0) {
                    const double dm = asset.mu(b, n) - asset.mu(a0, n);
                    P -= dm * p.dv_slope[n];
                    Q -= dm * p.dv_offset[n];
                }
                return std::pair{P, Q};
            };
            for (int b = 0; b <= R; ++b) {
                if (b == a0) continue;
                auto [P, Q] = coeffs(b);
                if (!(P < 0)) continue;
                const double root = -Q / P;
                if (root < h_cur && root > next) next = root;
            }
        }
        if (!(next > 0)) break;

        const double below = next * (1 - opt.step);
        if (!(below < h_cur * (1 - 1e-12))) {
            std::ostringstream msg;
            msg << "asset breakpoint sweep stagnated at h=" << h_cur;
            throw SolverError(msg.str());
        }
        AssetSolution s = solve_q_asset(asset, below, &u, opt.tol);
        h_cur = below;
        if (s.policy == u) continue;
        out.h.push_back(next);
        out.policies.push_back(s.policy);
        out.passages.push_back(asset_first_passage(asset, s.policy));
    }
    return out;
}

/// W(a,n) = 1/h* with h* the smallest multiplier at which the optimal level at
/// n exceeds a; 0 when the level never exceeds a.
inline IndexTable asset_indices(const AssetBreakpoints& bp) {
    return index_from_policy_family(bp.charge_family(), FamilyKind::breakpoints, false);
}

inline IndexTable asset_indices(const AssetModel& asset) { return asset_indices(asset_breakpoints(asset)); }

/// Rate of increase of the return rate for one asset at (a, n).
inline double myopic_gain(const AssetModel& m, int a, int n) {
    double v = 0;
    if (n < m.A) v += m.lambda(a, n) * (m.d[n + 1] - m.d[n]);
    if (n > 0) v += m.mu(a, n) * (m.d[n - 1] - m.d[n]);
    return v;
}

/// argmax over sum a_k <= R of the summed myopic gains; the lexicographically
/// smallest maximizer wins.
inline std::vector<int> myopic_action(std::span<const AssetModel> assets, std::span<const int> state, int R) {
    if (assets.size() != state.size()) throw std::invalid_argument("one state per asset is required");
    const std::size_t K = assets.size();
    for (std::size_t k = 0; k < K; ++k)
        if (state[k] < 0 || state[k] > assets[k].A) throw std::out_of_range("asset state out of range");
    std::vector<int> a(K, 0), best_a;
    double best = -kInf;
    std::function<void(std::size_t, int, double)> rec = [&](std::size_t k, int left, double acc) {
        if (k == K) {
            if (best_a.empty() || acc > best + 1e-12 * (1 + std::abs(best))) {
                best = acc;
                best_a = a;
            }
            return;
        }
        const int top = std::min(left, assets[k].R);
        for (int x = 0; x <= top; ++x) {
            a[k] = x;
            rec(k + 1, left - x, acc + myopic_gain(assets[k], x, state[k]));
        }
        a[k] = 0;
    };
    rec(0, R, 0.0);
    return best_a;
}

/// The section-4 counterexample asset with the quoted constants.
inline AssetModel counterexample_asset(double phi = 1.30738, double eta = 1.16393) {
    std::vector<double> d(11);
    for (int n = 0; n <= 10; ++n) d[n] = n / (n + 1.0);
    return AssetModel::from_functions(
        10, 5, [phi](int a, int) { return a / (a + phi); }, [phi, eta](int a, int) { return phi * eta / (a + phi); },
        std::move(d));
}

}  // namespace idxalloc
