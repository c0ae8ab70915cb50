#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fipgemm/bench.hpp"
#include "fipgemm/pack.hpp"
#include "test_util.hpp"

using namespace fipgemm;
using namespace testutil;

TEST_CASE("packed spans ending on a capacity-aligned boundary are perfectly equitable") {
    const CacheModel cache{64, 8, 4};
    for (index_t s : {1, 3, 7}) {
        const auto h = analyze_packed_span(static_cast<std::size_t>(s * 64 * 8), cache);
        CHECK(h.total_lines() == static_cast<std::uint64_t>(s * 8));
        for (auto lines : h.lines_per_set) CHECK(lines == static_cast<std::uint64_t>(s));
        CHECK(h.imbalance() == 1.0);
    }
}

TEST_CASE("pathological leading dimension funnels every line into one set") {
    const CacheModel cache{64, 8, 4};
    // col_stride * 8 bytes == sets * line_bytes: every column lands in set 0
    Matrix a(6, 16, Layout::col_major, 64);
    const auto h = analyze_set_mapping(a.view(), cache);
    CHECK(h.lines_per_set[0] == h.total_lines());
    CHECK(h.imbalance() == doctest::Approx(8.0));
    const auto packed = analyze_packed_span(static_cast<std::size_t>(6 * 16 * 8), cache);
    CHECK(h.imbalance() >= 4.0 * packed.imbalance());
}

TEST_CASE("tight small strides spread lines near-uniformly") {
    const CacheModel cache{64, 8, 4};
    Matrix a(6, 16, Layout::col_major, 8);  // col_stride * 8 bytes == one line
    const auto h = analyze_set_mapping(a.view(), cache);
    CHECK(h.imbalance() <= 1.25);
}

TEST_CASE("CSV schema: header plus one row per (size, strategy)") {
    std::vector<BenchRecord> records;
    for (index_t size : {8, 16}) {
        for (Strategy s : {Strategy::conventional, Strategy::sup, Strategy::fip}) {
            BenchRecord r;
            r.strategy = s;
            r.m = r.n = r.k = size;
            r.ldim_tight = true;
            r.ldim = size;
            r.threads = 1;
            r.repeats = 3;
            r.median_seconds = 0.5;
            r.gflops = 2.0 * size * size * size / 0.5 / 1e9;
            records.push_back(r);
        }
    }
    std::ostringstream out;
    write_csv(records, out);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "strategy,m,n,k,ldim,threads,repeats,median_seconds,gflops");
    int rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 6);
    CHECK(out.str().find("conv,8,8,8,tight,1,3,") != std::string::npos);

    std::ostringstream empty_out;
    CHECK_THROWS_AS(write_csv({}, empty_out), ConfigError);
}

TEST_CASE("plot script regenerates deterministically and names every strategy") {
    std::vector<BenchRecord> records;
    BenchRecord r;
    r.m = r.n = r.k = 8;
    r.strategy = Strategy::sup;
    records.push_back(r);
    r.strategy = Strategy::fip;
    records.push_back(r);
    const std::string s1 = plot_script(records, "out.csv");
    const std::string s2 = plot_script(records, "out.csv");
    CHECK(s1 == s2);
    CHECK(s1.find("sup") != std::string::npos);
    CHECK(s1.find("fip") != std::string::npos);
    CHECK(s1.find("out.csv") != std::string::npos);
    CHECK(s1.find("conv\\\"") == std::string::npos);  // absent strategies get no curve
}

TEST_CASE("run_sweep validates its configuration") {
    SweepConfig cfg;
    cfg.params = default_params(ParamProfile::generic_small);
    CHECK_THROWS_AS(run_sweep(cfg), ConfigError);  // no sizes
    cfg.sizes = {8, 2048};
    cfg.ldim_tight = false;
    cfg.ldim_value = 2000;  // smaller than the largest size
    CHECK_THROWS_AS(run_sweep(cfg), ConfigError);
    cfg.ldim_tight = true;
    cfg.repeats = 2;
    CHECK_THROWS_AS(run_sweep(cfg), ConfigError);
    cfg.repeats = 3;
    cfg.sizes = {0};
    CHECK_THROWS_AS(run_sweep(cfg), ConfigError);
}

TEST_CASE("run_sweep produces one record per cell with consistent GFLOPS arithmetic") {
    SweepConfig cfg;
    cfg.sizes = {8, 12};
    cfg.repeats = 3;
    cfg.params = default_params(ParamProfile::generic_small);
    const auto records = run_sweep(cfg);
    CHECK(records.size() == 6);  // 2 sizes x 3 strategies
    for (const auto& r : records) {
        CHECK(r.gflops > 0.0);
        CHECK(r.repeats >= 3);
        const double flops = 2.0 * static_cast<double>(r.m) * static_cast<double>(r.n) *
                             static_cast<double>(r.k);
        CHECK(std::abs(r.gflops * r.median_seconds * 1e9 - flops) <= 1e-6 * flops);
        CHECK(r.ldim == r.m);  // tight mode resolves to the size
    }
}

TEST_CASE("run_sweep honors a fixed leading dimension") {
    SweepConfig cfg;
    cfg.sizes = {8};
    cfg.repeats = 3;
    cfg.ldim_tight = false;
    cfg.ldim_value = 64;
    cfg.params = default_params(ParamProfile::generic_small);
    const auto records = run_sweep(cfg);
    for (const auto& r : records) CHECK(r.ldim == 64);
}

TEST_CASE("verification harness accepts all strategies at a couple of sizes") {
    const auto p = default_params(ParamProfile::generic_large);
    for (Strategy s : {Strategy::conventional, Strategy::sup, Strategy::fip}) {
        CHECK(verify_against_reference(s, 17, true, 0, 1, p, 5));
        CHECK(verify_against_reference(s, 33, false, 2000, 2, p, 6));
    }
}

TEST_CASE("timed calls allocate packed buffers once per call, outside the loops") {
    const auto p = default_params(ParamProfile::generic_small);
    Matrix a = make_filled(60, 60, Layout::col_major, 1);       // L2-resident: packs B only
    Matrix a_wide = make_filled(60, 60, Layout::col_major, 2000, 1);  // defeats the override
    Matrix b = make_filled(60, 60, Layout::col_major, 2);
    Matrix c(60, 60, Layout::col_major);

    auto count_for = [&](Strategy s, const Matrix& am) {
        const auto before = packed_allocation_count();
        gemm(s, am.view(), b.view(), c.view(), p);
        return packed_allocation_count() - before;
    };
    CHECK(decide_packing(60, 60, a.view(), p) == PackingDecision{false, true});
    CHECK(decide_packing(60, 60, a_wide.view(), p) == PackingDecision{true, true});
    CHECK(count_for(Strategy::conventional, a) == 2);  // one A-block + one B-panel buffer
    CHECK(count_for(Strategy::fip, a) == 1);           // only the B side is packed here
    CHECK(count_for(Strategy::fip, a_wide) == 2);
    CHECK(count_for(Strategy::sup, a) == 0);

    const auto before = packed_allocation_count();
    for (int i = 0; i < 3; ++i) gemm(Strategy::fip, a_wide.view(), b.view(), c.view(), p);
    CHECK(packed_allocation_count() - before == 6);  // no hidden growth inside the loops
}
