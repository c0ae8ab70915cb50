#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <vector>

#include "fipgemm/pack.hpp"
#include "test_util.hpp"

using namespace fipgemm;
using namespace testutil;

namespace {

BlockingParams tiny_params(index_t mr, index_t nr) {
    BlockingParams p = default_params(ParamProfile::generic_large);
    p.mr = mr;
    p.nr = nr;
    p.mc = mr * 8;
    p.nc = nr * 8;
    p.kc = 32;
    return p;
}

}  // namespace

TEST_CASE("pack_a_micropanel: row-major source becomes column-ordered") {
    std::vector<double> src = {1, 2, 3, 4, 5, 6};
    const auto a = make_view(src.data(), 2, 3, Layout::row_major, 3);
    std::vector<double> dest(6, -1.0);
    pack_a_micropanel(a, dest.data(), 2);
    CHECK(dest == std::vector<double>{1, 4, 2, 5, 3, 6});
}

TEST_CASE("pack_a_micropanel: fringe row zero-padded") {
    std::vector<double> src = {7, 8, 9};
    const auto a = make_view(src.data(), 1, 3, Layout::row_major, 3);
    std::vector<double> dest(6, -1.0);
    pack_a_micropanel(a, dest.data(), 2);
    CHECK(dest == std::vector<double>{7, 0, 8, 0, 9, 0});
}

TEST_CASE("pack_a_micropanel: tight column-major micropanel is already contiguous") {
    std::vector<double> src = {1, 2, 3, 4, 5, 6};
    const auto a = make_view(src.data(), 2, 3, Layout::col_major, 2);
    std::vector<double> dest(6, -1.0);
    pack_a_micropanel(a, dest.data(), 2);
    CHECK(dest == src);
}

TEST_CASE("pack_b_micropanel: row-ordered layout") {
    std::vector<double> src = {1, 3, 2, 4};  // column-major [[1,2],[3,4]]
    const auto b = make_view(src.data(), 2, 2, Layout::col_major, 2);
    std::vector<double> dest(4, -1.0);
    pack_b_micropanel(b, dest.data(), 2);
    CHECK(dest == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("pack_b_micropanel: single column padded") {
    std::vector<double> src = {5, 6};
    const auto b = make_view(src.data(), 2, 1, Layout::col_major, 2);
    std::vector<double> dest(4, -1.0);
    pack_b_micropanel(b, dest.data(), 2);
    CHECK(dest == std::vector<double>{5, 0, 6, 0});
}

TEST_CASE("pack rejects oversized micropanels") {
    std::vector<double> src(20, 0.0);
    const auto a = make_view(src.data(), 4, 3, Layout::row_major, 3);
    std::vector<double> dest(12);
    CHECK_THROWS(pack_a_micropanel(a, dest.data(), 2));
    const auto b = make_view(src.data(), 2, 5, Layout::row_major, 5);
    CHECK_THROWS(pack_b_micropanel(b, dest.data(), 2));
}

TEST_CASE("pack_panel_b with k = 0 yields empty but valid panels") {
    const auto p = tiny_params(2, 2);
    Matrix b(0, 5, Layout::col_major, 1);
    const PackedPanelB packed = pack_panel_b(b.view(), p);
    CHECK(packed.panel_count() == 3);
    CHECK(packed.depth() == 0);
    CHECK(packed.all_valid());
}

TEST_CASE("pack_block_a panel counting and validity") {
    const auto p = tiny_params(2, 2);
    Matrix a = make_filled(4, 3, Layout::col_major, 1);
    const PackedBlockA packed = pack_block_a(a.view(), p);
    CHECK(packed.panel_count() == 2);
    CHECK(packed.all_valid());

    Matrix odd = make_filled(5, 3, Layout::col_major, 2);
    const PackedBlockA packed_odd = pack_block_a(odd.view(), p);
    CHECK(packed_odd.panel_count() == 3);
    // last panel carries one real row and one zero row
    for (index_t l = 0; l < 3; ++l) {
        CHECK(packed_odd.panel(2)[l * 2 + 0] == odd.view().at(4, l));
        CHECK(packed_odd.panel(2)[l * 2 + 1] == 0.0);
    }

    Matrix empty(0, 3, Layout::col_major, 1);
    CHECK(pack_block_a(empty.view(), p).panel_count() == 0);
}

TEST_CASE("pack_block_a rejects blocks beyond (mc, kc)") {
    const auto p = tiny_params(2, 2);
    Matrix a(p.mc + 1, 3, Layout::col_major);
    CHECK_THROWS(pack_block_a(a.view(), p));
    Matrix b(4, p.kc + 1, Layout::col_major);
    CHECK_THROWS(pack_block_a(b.view(), p));
}

TEST_CASE("unpack_roundtrip_check accepts faithful packs and flags corruption") {
    const auto p = tiny_params(2, 2);
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        std::uniform_int_distribution<index_t> rdim(0, p.mc), cdim(0, p.kc);
        const index_t rows = rdim(rng), cols = cdim(rng);
        Matrix a = random_padded(rng, rows, cols, 100 + trial);
        PackedBlockA packed = pack_block_a(a.view(), p);
        CHECK(unpack_roundtrip_check(a.view(), packed));
        if (packed.size() > 0) {
            std::uniform_int_distribution<std::size_t> pick(0, packed.size() - 1);
            const std::size_t idx = pick(rng);
            double* cell = packed.panel(0) + idx;
            const double saved = *cell;
            *cell = saved + 1.0;
            CHECK(!unpack_roundtrip_check(a.view(), packed));
            *cell = saved;
        }
    }
}

TEST_CASE("roundtrip check fails on nonzero padding") {
    const auto p = tiny_params(2, 2);
    Matrix a = make_filled(3, 2, Layout::col_major, 5);  // 2 panels, second has padding
    PackedBlockA packed = pack_block_a(a.view(), p);
    packed.panel(1)[1] = 0.5;  // padding slot of row 3
    CHECK(!unpack_roundtrip_check(a.view(), packed));
}

TEST_CASE("B-side roundtrip over random panels") {
    const auto p = tiny_params(2, 3);
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 40; ++trial) {
        std::uniform_int_distribution<index_t> rdim(0, p.kc), cdim(0, p.nc);
        Matrix b = random_padded(rng, rdim(rng), cdim(rng), 200 + trial);
        const PackedPanelB packed = pack_panel_b(b.view(), p);
        CHECK(unpack_roundtrip_check_b(b.view(), packed));
    }
}

TEST_CASE("packed A index formula walks consecutive addresses along the depth loop") {
    // For each l, the mr entries of a panel are adjacent, and l -> l+1 hops
    // exactly mr elements: the microkernel's read order is unit-stride.
    const index_t mr = 6, k = 10;
    index_t prev = -1;
    for (index_t l = 0; l < k; ++l)
        for (index_t i = 0; i < mr; ++i) {
            const index_t off = l * mr + i;
            CHECK(off == prev + 1);
            prev = off;
        }
}

TEST_CASE("packed buffers are aligned to the configured line size") {
    BlockingParams p = default_params(ParamProfile::generic_large);
    PackedBlockA a(p, p.mc, p.kc);
    PackedPanelB b(p, p.nc, p.kc);
    CHECK(reinterpret_cast<std::uintptr_t>(a.data()) % static_cast<std::uintptr_t>(p.line_bytes) == 0);
    CHECK(reinterpret_cast<std::uintptr_t>(b.data()) % static_cast<std::uintptr_t>(p.line_bytes) == 0);
}

TEST_CASE("allocation counter moves once per buffer") {
    BlockingParams p = default_params(ParamProfile::generic_small);
    const auto before = packed_allocation_count();
    PackedBlockA a(p, p.mc, p.kc);
    a.reset(p.mc / 2, p.kc / 2);
    a.reset(p.mc, p.kc);
    CHECK(packed_allocation_count() == before + 1);  // resets never reallocate
}
