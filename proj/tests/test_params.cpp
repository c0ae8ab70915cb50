#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <stdexcept>

#include "fipgemm/params.hpp"
#include "test_util.hpp"

using namespace fipgemm;
using namespace testutil;

namespace {

// Params matching the decision-table examples: 6x8 microtile, kc=256, 1 MiB L2.
BlockingParams table_params() { return default_params(ParamProfile::generic_large); }

MatrixView col_major_a(index_t rows, index_t cols, index_t ld, std::vector<double>& buf) {
    buf.assign(static_cast<std::size_t>(ld * cols), 0.0);
    return make_view(buf.data(), rows, cols, Layout::col_major, ld);
}

}  // namespace

TEST_CASE("decision table: small in both dimensions packs nothing") {
    std::vector<double> buf;
    const auto a = col_major_a(4, 4, 2000, buf);  // layout violates L2 residency
    const auto d = decide_packing(4, 4, a, table_params());
    CHECK(d == PackingDecision{false, false});
}

TEST_CASE("decision table: tall-skinny packs B only") {
    std::vector<double> buf;
    const auto a = col_major_a(100, 4, 2000, buf);
    const auto d = decide_packing(100, 4, a, table_params());
    CHECK(d == PackingDecision{false, true});
}

TEST_CASE("decision table: short-wide packs A only (absent the L2 override)") {
    std::vector<double> buf;
    const auto a = col_major_a(4, 100, 2000, buf);
    const auto d = decide_packing(4, 100, a, table_params());
    CHECK(d == PackingDecision{true, false});
}

TEST_CASE("L2 residency override clears pack_a for a tight column-major A") {
    // csb(A)*kc = 100*8*256 = 204800 <= 1048576
    std::vector<double> buf;
    const auto a = col_major_a(100, 100, 100, buf);
    const auto d = decide_packing(100, 100, a, table_params());
    CHECK((100 * 8 * 256) <= table_params().l2_bytes);
    CHECK(d == PackingDecision{false, true});
}

TEST_CASE("wide leading dimension defeats the L2 override") {
    // csb(A)*kc = 2000*8*256 = 4096000 > 1048576
    std::vector<double> buf;
    const auto a = col_major_a(100, 100, 2000, buf);
    const auto d = decide_packing(100, 100, a, table_params());
    CHECK((2000 * 8 * 256) > table_params().l2_bytes);
    CHECK(d == PackingDecision{true, true});
}

TEST_CASE("row-major override uses mc * rsb(A)") {
    BlockingParams p = table_params();
    std::vector<double> buf(200 * 2000, 0.0);
    // mc*rsb = 72*100*8 = 57600 <= 1 MiB: cleared
    const auto near = make_view(buf.data(), 100, 100, Layout::row_major, 100);
    CHECK(decide_packing(100, 100, near, p) == PackingDecision{false, true});
    // mc*rsb = 72*2000*8 = 1152000 > 1 MiB: kept
    const auto wide = make_view(buf.data(), 100, 100, Layout::row_major, 2000);
    CHECK(decide_packing(100, 100, wide, p) == PackingDecision{true, true});
}

TEST_CASE("boundary convention is strict: n == nr means no A packing") {
    std::vector<double> buf;
    const auto p = table_params();
    const auto a = col_major_a(100, 100, 2000, buf);
    CHECK(decide_packing(100, p.nr, a, p).pack_a == false);
    CHECK(decide_packing(100, p.nr + 1, a, p).pack_a == true);
    CHECK(decide_packing(p.mr, 100, a, p).pack_b == false);
    CHECK(decide_packing(p.mr + 1, 100, a, p).pack_b == true);
}

TEST_CASE("table monotonicity in m and n") {
    std::vector<double> buf;
    const auto p = table_params();
    const auto a = col_major_a(300, 300, 2000, buf);
    bool prev_b = false;
    for (index_t m = 0; m <= 40; ++m) {
        const bool b = decide_packing(m, 40, a, p).pack_b;
        CHECK((b || !prev_b));  // once on, never off as m grows
        prev_b = b;
    }
    bool prev_a = false;
    for (index_t n = 0; n <= 40; ++n) {
        const bool pa = decide_packing(40, n, a, p).pack_a;
        CHECK((pa || !prev_a));
        prev_a = pa;
    }
}

TEST_CASE("generic-large profile values") {
    const auto p = default_params(ParamProfile::generic_large);
    CHECK(p.mr == 6);
    CHECK(p.nr == 8);
    CHECK(p.kc == 256);
    CHECK(p.mc == 72);
    CHECK(p.nc == 4080);
    CHECK(p.mc % p.mr == 0);
    CHECK(p.nc % p.nr == 0);
}

TEST_CASE("generic-small profile satisfies the invariants") {
    const auto p = default_params(ParamProfile::generic_small);
    CHECK(p.mc % p.mr == 0);
    CHECK(p.nc % p.nr == 0);
    CHECK(p.mr * p.nr <= kMicrotileRegisterBudget);
}

TEST_CASE("config file round trip") {
    const auto p = parse_params(
        "mr=6\nnr=8\nmc=72\nnc=4080\nkc=256\n"
        "l1=32768\nl2=1048576\nl3=33554432\nline=64\n");
    CHECK(p.mr == 6);
    CHECK(p.nc == 4080);
    CHECK(p.l2_bytes == 1048576);
}

TEST_CASE("config file tolerates comments and blank lines") {
    const auto p = parse_params(
        "# blocking\nmr = 4\nnr = 4\n\nmc = 48 # multiple of mr\nnc=512\nkc=128\n"
        "l1=32768\nl2=1048576\nl3=33554432\nline=64\n");
    CHECK(p.mc == 48);
}

TEST_CASE("config file rejects invariant violations and bad keys") {
    CHECK_THROWS_AS(parse_params("mr=6\nnr=8\nmc=70\nnc=4080\nkc=256\n"
                                 "l1=32768\nl2=1048576\nl3=33554432\nline=64\n"),
                    std::invalid_argument);  // mc not a multiple of mr
    CHECK_THROWS_AS(parse_params("mr=6\nnr=8\nmc=72\nnc=4080\nkc=256\n"
                                 "l1=32768\nl2=1048576\nl3=33554432\nline=64\nbogus=1\n"),
                    std::invalid_argument);
    CHECK_THROWS_AS(parse_params("mr=6\n"), std::invalid_argument);  // missing keys
    CHECK_THROWS_AS(parse_params("mr=6\nmr=6\nnr=8\nmc=72\nnc=4080\nkc=256\n"
                                 "l1=32768\nl2=1048576\nl3=33554432\nline=64\n"),
                    std::invalid_argument);  // repeated key
    CHECK_THROWS_AS(load_params("/nonexistent/params.conf"), std::invalid_argument);
}

TEST_CASE("register budget overrun is a warning, not an error") {
    BlockingParams p = default_params(ParamProfile::generic_large);
    p.mr = 16;
    p.nr = 16;
    p.mc = 64;
    p.nc = 4080;
    CHECK_NOTHROW(p.validate());
    CHECK(p.warnings().size() == 1);
    CHECK(default_params(ParamProfile::generic_large).warnings().empty());
}
