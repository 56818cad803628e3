#include <gtest/gtest.h>

#include "idxalloc/core.hpp"
#include "idxalloc/golden.hpp"

using namespace idxalloc;

namespace {

SystemSpec unit_system(int projects, int states, int L, double R) {
    std::vector<ProjectSpec> ps;
    for (int k = 0; k < projects; ++k) ps.push_back(ProjectSpec::unit_consumption(states, L));
    return SystemSpec(std::move(ps), R);
}

}  // namespace

TEST(IndexTable, BoundaryLevels) {
    IndexTable t(2, 3, {5, 4, 3, 2, 1, 0.5});
    EXPECT_EQ(t(0, 0), 5);
    EXPECT_EQ(t(1, 2), 0.5);
    EXPECT_EQ(t(-1, 1), kInf);
    EXPECT_EQ(t(2, 1), 0.0);
    EXPECT_THROW(t(0, 3), std::out_of_range);
    EXPECT_THROW(t(0, -1), std::out_of_range);
}

TEST(IndexTable, CountableTailReusesCap) {
    IndexTable t(1, 3, {1, 2, 3}, true);
    auto l = t.lookup(0, 10);
    EXPECT_EQ(l.value, 3);
    EXPECT_TRUE(l.beyond_cap);
    EXPECT_FALSE(t.lookup(0, 2).beyond_cap);
}

TEST(IndexTable, RejectsNegativeAndWrongShape) {
    EXPECT_THROW(IndexTable(1, 2, {1, -1}), std::invalid_argument);
    EXPECT_THROW(IndexTable(2, 2, {1, 1, 1}), std::invalid_argument);
    EXPECT_THROW(IndexTable(1, 1, {NAN}), std::invalid_argument);
}

TEST(IndexTable, LevelMonotonicityViolations) {
    IndexTable ok(3, 1, {3, 2, 1});
    EXPECT_TRUE(ok.level_monotonicity_violations().empty());
    IndexTable bad(3, 1, {3, 1, 2});
    auto v = bad.level_monotonicity_violations();
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0], std::make_pair(1, 0));
}

TEST(PolicyTable, MonotoneFlagIsChecked) {
    EXPECT_NO_THROW(PolicyTable({0, 1, 1, 2}, 2, true));
    EXPECT_THROW(PolicyTable({0, 2, 1}, 2, true), std::invalid_argument);
    EXPECT_THROW(PolicyTable({0, 3}, 2), std::invalid_argument);
    PolicyTable u({0, 1, 2}, 2);
    EXPECT_EQ(u(7), 2);
}

TEST(ProjectSpec, Validation) {
    auto p = ProjectSpec::unit_consumption(3, 2);
    EXPECT_EQ(p.r(2, 1), 2);
    p.consumption[0] = -1;
    EXPECT_THROW(p.validate(), std::invalid_argument);
    auto q = ProjectSpec::unit_consumption(2, 1);
    q.consumption[2] = 0.5;  // r(1,0) = 0.5 still >= r(0,0)
    EXPECT_NO_THROW(q.validate());
    q.consumption[0] = 0.7;
    EXPECT_THROW(q.validate(), std::invalid_argument);
}

TEST(SystemSpec, RejectsInadmissibleIdle) {
    auto p = ProjectSpec::unit_consumption(2, 1);
    for (auto& r : p.consumption) r += 1;  // idle already consumes 1
    EXPECT_THROW(SystemSpec({p, p}, 1.5), std::invalid_argument);
    EXPECT_NO_THROW(SystemSpec({p, p}, 2.0));
    EXPECT_THROW(SystemSpec({}, -1), std::invalid_argument);
}

TEST(Greedy, TakesLargestIncrementsUntilBudget) {
    std::vector<IndexTable> t{IndexTable(3, 1, {9, 5, 1}), IndexTable(3, 1, {8, 6, 2})};
    auto sys = unit_system(2, 1, 3, 4);
    std::vector<int> x{0, 0};
    EXPECT_EQ(greedy_action(t, x, sys), (std::vector<int>{2, 2}));
    auto sys3 = unit_system(2, 1, 3, 3);
    EXPECT_EQ(greedy_action(t, x, sys3), (std::vector<int>{1, 2}));
}

TEST(Greedy, ZeroIndexIncrementsAreNotTaken) {
    std::vector<IndexTable> t{IndexTable(2, 1, {1, 0}), IndexTable(2, 1, {0, 0})};
    auto sys = unit_system(2, 1, 2, 4);
    std::vector<int> x{0, 0};
    auto a = greedy_action(t, x, sys);
    EXPECT_LE(a[0] + a[1], 4);
    EXPECT_GE(a[0], 1);
}

TEST(Greedy, StateBeyondFiniteTableThrows) {
    std::vector<IndexTable> t{IndexTable(1, 2, {1, 1})};
    auto sys = unit_system(1, 2, 1, 1);
    std::vector<int> x{5};
    EXPECT_THROW(greedy_action(t, x, sys), std::out_of_range);
}

TEST(Greedy, DiffersFromChargeLevelAction) {
    auto c = golden::greedy_vs_lagrange_check();
    EXPECT_TRUE(c.pass) << c.detail;
}

TEST(Lagrange, TakesEveryIncrementAboveCharge) {
    std::vector<IndexTable> t{IndexTable(3, 1, {9, 5, 1}), IndexTable(3, 1, {8, 6, 2})};
    std::vector<int> x{0, 0};
    EXPECT_EQ(lagrange_action(t, x, 4.0), (std::vector<int>{2, 2}));
    EXPECT_EQ(lagrange_action(t, x, 0.5), (std::vector<int>{3, 3}));
    EXPECT_THROW(lagrange_action(t, x, -1.0), std::invalid_argument);
}

TEST(FullIndexability, DetectsRisingLevel) {
    std::map<double, std::vector<PolicyTable>> fam;
    fam[0.0] = {PolicyTable({2, 2}, 2)};
    fam[1.0] = {PolicyTable({1, 2}, 2)};
    EXPECT_TRUE(validate_full_indexability(fam).pass);
    fam[2.0] = {PolicyTable({2, 1}, 2)};
    auto r = validate_full_indexability(fam);
    EXPECT_FALSE(r.pass);
    ASSERT_FALSE(r.violations.empty());
    EXPECT_EQ(r.violations.front().state, 0);
}

TEST(FullIndexability, IndexFromFamily) {
    std::map<double, PolicyTable> fam;
    fam.emplace(0.0, PolicyTable({2, 2}, 2));
    fam.emplace(1.5, PolicyTable({1, 2}, 2));
    fam.emplace(4.0, PolicyTable({0, 1}, 2));
    auto t = index_from_policy_family(fam);
    // W(a, x) = inf{W : u(W, x) <= a}.
    EXPECT_EQ(t(1, 0), 1.5);
    EXPECT_EQ(t(0, 0), 4.0);
    EXPECT_EQ(t(1, 1), 4.0);
    EXPECT_EQ(t(0, 1), kInf);
    EXPECT_FALSE(t.grid_limited());
    fam.emplace(5.0, PolicyTable({1, 1}, 2));
    EXPECT_THROW(index_from_policy_family(fam), std::invalid_argument);
}
