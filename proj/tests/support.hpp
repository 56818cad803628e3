#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "idxalloc/idxalloc.hpp"

namespace testing_support {

using namespace idxalloc;

/// Random Example-1 or Example-2 station with mu(S) >= 1.05 lambda.
inline StationModel random_station(Rng& rng, bool second_shape, int S = 25) {
    for (;;) {
        const double lam = rng.uniform(0.8, 2.2);
        const double mu_max = rng.uniform(1.5, 5.0);
        StationModel s = second_shape ? example2_station(lam, mu_max, rng.uniform(0.07, 0.3), S)
                                      : example1_station(lam, mu_max, rng.uniform(0.5, 10.0), S);
        if (s.mu.back() >= 1.05 * lam) return s;
    }
}

/// Random asset from one of the plates shapes.
inline AssetModel random_asset(Rng& rng) {
    const double phi = rng.uniform(0.75, 5.0);
    const int kind = static_cast<int>(rng.uniform01() * 4);
    switch (kind) {
        case 0: return flat_asset(phi, rng.uniform(0.75, 1.25), 5);
        case 1: return powerlaw_asset(phi, rng.uniform(1.05, 1.5), 10, 1.0, ReturnShape::threshold);
        case 2: return powerlaw_asset(phi, rng.uniform(1.05, 1.65), 5, 0.5, ReturnShape::concave, 12.0);
        default: return powerlaw_asset(phi, rng.uniform(1.2, 1.65), 10, 1.0, ReturnShape::threshold, 12.0);
    }
}

/// Random nondecreasing station policy u(0) = 0, u(n) >= floor, u = S from
/// `tail` on.
inline PolicyTable random_station_policy(Rng& rng, const StationModel& s, int tail) {
    const int S = s.pool_size();
    const int lo = std::max(1, s.floor_level());
    std::vector<int> u(static_cast<std::size_t>(tail) + 1, S);
    u[0] = 0;
    int level = lo + static_cast<int>(rng.uniform01() * (S - lo + 1));
    for (int n = 1; n < tail; ++n) {
        level = std::min(S, level + (rng.uniform01() < 0.3 ? 1 : 0));
        u[static_cast<std::size_t>(n)] = level;
    }
    return PolicyTable(u, S, true);
}

/// Random asset policy with positive down rates in states 1..A.
inline PolicyTable random_asset_policy(Rng& rng, const AssetModel& m) {
    std::vector<int> u(static_cast<std::size_t>(m.A) + 1);
    for (int n = 0; n <= m.A; ++n) u[n] = static_cast<int>(rng.uniform01() * (m.R + 1)) % (m.R + 1);
    u[0] = std::max(u[0], 1);
    return PolicyTable(u, m.R, false);
}

struct PassageOracle {
    double time, head, deploy;
};

/// Expected time, integrated head count and integrated deployment from n to
/// n-1 by a sparse long-double solve on states n-1..cap (n-1 absorbing, no
/// arrivals at cap).
inline PassageOracle station_passage_oracle(const StationModel& s, const PolicyTable& u, int n, int cap) {
    using Real = long double;
    const int m = cap - n + 1;  // unknowns for states n..cap
    std::vector<Eigen::Triplet<Real>> trip;
    Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic> rhs(m, 3);
    for (int i = 0; i < m; ++i) {
        const int x = n + i;
        const Real up = x < cap ? s.lambda : 0.0;
        const Real down = s.mu[u(x)];
        trip.emplace_back(i, i, -(up + down));
        if (i + 1 < m) trip.emplace_back(i, i + 1, up);
        if (i > 0) trip.emplace_back(i, i - 1, down);
        rhs(i, 0) = -1.0L;
        rhs(i, 1) = -static_cast<Real>(x);
        rhs(i, 2) = -static_cast<Real>(u(x));
    }
    Eigen::SparseMatrix<Real> Q(m, m);
    Q.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<Real>> lu(Q);
    const Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic> sol = lu.solve(rhs);
    return {static_cast<double>(sol(0, 0)), static_cast<double>(sol(0, 1)), static_cast<double>(sol(0, 2))};
}

/// Asset passage n -> n-1 by dense solve; returns time, integrated return and
/// integrated resource.
inline PassageOracle asset_passage_oracle(const AssetModel& a, const PolicyTable& u, int n) {
    using Real = long double;
    using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
    const int m = a.A - n + 1;
    Mat Q = Mat::Zero(m, m);
    Mat rhs(m, 3);
    for (int i = 0; i < m; ++i) {
        const int x = n + i;
        const Real up = a.lambda(u(x), x), down = a.mu(u(x), x);
        Q(i, i) = -(up + down);
        if (i + 1 < m) Q(i, i + 1) = up;
        if (i > 0) Q(i, i - 1) = down;
        rhs(i, 0) = -1.0L;
        rhs(i, 1) = -static_cast<Real>(a.d[x]);
        rhs(i, 2) = -static_cast<Real>(u(x));
    }
    const Mat sol = Q.partialPivLu().solve(rhs);
    return {static_cast<double>(sol(0, 0)), static_cast<double>(sol(0, 1)), static_cast<double>(sol(0, 2))};
}

inline bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

}  // namespace testing_support
