#include <gtest/gtest.h>

#include "idxalloc/idxalloc.hpp"

using namespace idxalloc;

TEST(Json, Infinities) {
    EXPECT_EQ(number_to_json(kInf), "inf");
    EXPECT_EQ(number_from_json(json("-inf")), -kInf);
    EXPECT_EQ(number_from_json(json(2.5)), 2.5);
    EXPECT_THROW(number_from_json(json("big")), std::invalid_argument);
}

TEST(Json, IndexTableRoundTrip) {
    IndexTable t(2, 3, {kInf, 2, 1, 3, 0.5, 0}, true, false);
    auto back = index_table_from_json(to_json(t));
    EXPECT_EQ(back.raw(), t.raw());
    EXPECT_TRUE(back.countable());
    auto j = to_json(t);
    j["W"][0].erase(0);
    EXPECT_THROW(index_table_from_json(j), std::invalid_argument);
}

TEST(Json, PolicyTableRoundTrip) {
    PolicyTable u({0, 2, 3, 3}, 3, true);
    EXPECT_EQ(policy_table_from_json(to_json(u)), u);
}

TEST(Json, StationForms) {
    auto explicit_form = station_from_json(json::parse(R"({"lambda": 1, "mu": [0, 2, 3], "h": 2})"));
    EXPECT_EQ(explicit_form.pool_size(), 2);
    EXPECT_EQ(explicit_form.h, 2);
    auto param = station_from_json(json::parse(R"({"lambda": 1.6, "mu_max": 3.2, "nu": 6, "S": 25})"));
    EXPECT_EQ(param.mu, example1_station(1.6, 3.2, 6, 25).mu);
    auto back = station_from_json(to_json(param));
    EXPECT_EQ(back.mu, param.mu);
    EXPECT_THROW(station_from_json(json::parse(R"({"lambda": 1})")), std::invalid_argument);
    EXPECT_THROW(station_from_json(json::parse(R"({"lambda": 5, "mu": [0, 2, 3]})")), std::invalid_argument);
}

TEST(Json, AssetForms) {
    auto ce = asset_from_json(json::parse(R"({"generator": {"shape": "counterexample"}})"));
    EXPECT_EQ(ce.R, 5);
    EXPECT_EQ(ce.A, 10);
    auto back = asset_from_json(to_json(ce));
    EXPECT_EQ(back.up, ce.up);
    EXPECT_EQ(back.d, ce.d);
    auto pl = asset_from_json(json::parse(R"({"generator": {"shape": "rescaled", "phi": 2, "alpha": 1.6}})"));
    EXPECT_NEAR(pl.up[pl.R][0], pl.R / (pl.R + 2.0) * 12.0, 1e-12);
    EXPECT_THROW(asset_from_json(json::parse(R"({"generator": {"shape": "round"}})")), std::invalid_argument);
    EXPECT_THROW(asset_from_json(json::parse(R"({"generator": {"shape": "flat", "phi": 1, "eta": 1, "returns": "x"}})")),
                 std::invalid_argument);
}

TEST(Json, Systems) {
    auto q = queue_system_from_json(json::parse(
        R"({"S": 4, "stations": [{"lambda": 1, "mu_max": 3, "nu": 1}, {"lambda": 0.5, "mu_max": 2, "eta": 0.5}]})"));
    EXPECT_EQ(q.stations.size(), 2u);
    EXPECT_EQ(q.stations[1].pool_size(), 4);
    EXPECT_THROW(queue_system_from_json(json::parse(R"({"S": 4, "stations": [{"lambda": 1, "mu": [0, 2, 3]}]})")),
                 std::invalid_argument);
    auto p = plates_system_from_json(
        json::parse(R"({"R": 3, "assets": [{"generator": {"shape": "flat", "phi": 1, "eta": 1}}]})"));
    EXPECT_EQ(p.assets[0].R, 3);
}

TEST(Json, BreakpointExports) {
    auto bp = asset_breakpoints(counterexample_asset());
    auto j = to_json(bp);
    EXPECT_EQ(j["policies"].size(), bp.h.size() + 1);
    auto seq = compute_breakpoints(example1_station(1.6, 3.2, 6.0, 25), BreakpointOptions{10, 20'000'000, 0.5, -1});
    auto js = to_json(seq);
    EXPECT_EQ(js["j"][0], "inf");
    EXPECT_EQ(js["switch_state"].size(), static_cast<std::size_t>(seq.size()));
}

TEST(Json, MissingFile) { EXPECT_THROW(read_json_file("/nonexistent/model.json"), std::invalid_argument); }
