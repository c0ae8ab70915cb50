#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <type_traits>

#include "fipgemm/instrument.hpp"
#include "fipgemm/matrix.hpp"
#include "fipgemm/params.hpp"

namespace fipgemm {

enum class OperandState { packed, unpacked };

// The four packed/unpacked operand combinations one microkernel template
// expands into.
struct MicrokernelVariant {
    OperandState a_state = OperandState::packed;
    OperandState b_state = OperandState::packed;

    bool operator==(const MicrokernelVariant&) const = default;
};

// One microkernel operand: either a packed micropanel or a micropanel-shaped
// strided view. When the operand is unpacked and fusing is requested,
// pack_dest receives the packed copy during the same traversal that feeds
// the computation; dest_valid (if given) is flipped once the panel is whole.
struct OperandSource {
    const double* packed = nullptr;  // non-null iff state() == packed
    MatrixView view{};               // used iff state() == unpacked
    double* pack_dest = nullptr;     // optional; unpacked only
    bool* dest_valid = nullptr;      // optional flag owned by the packed buffer

    OperandState state() const {
        return packed ? OperandState::packed : OperandState::unpacked;
    }

    static OperandSource from_packed(const double* panel) {
        OperandSource s;
        s.packed = panel;
        return s;
    }
    static OperandSource from_view(const MatrixView& v) {
        OperandSource s;
        s.view = v;
        return s;
    }
    static OperandSource from_view_fusing(const MatrixView& v, double* dest, bool* valid) {
        OperandSource s;
        s.view = v;
        s.pack_dest = dest;
        s.dest_valid = valid;
        return s;
    }
};

namespace detail {

// Raw operand facts handed to the expanded kernels.
struct UkrOperand {
    const double* packed = nullptr;
    const double* base = nullptr;  // unpacked
    index_t rs = 0, cs = 0;        // unpacked strides
    double* dest = nullptr;        // fused pack destination
};

// Four-wide double lane used for the microtile update. Element-wise
// __builtin_fma keeps every lane a correctly rounded IEEE fma, so results
// are identical bits whether the compiler emits vector or scalar code.
// FIPGEMM_NO_VECTOR_LANES forces the plain-scalar update everywhere other
// compilers would take it.
#if (defined(__GNUC__) || defined(__clang__)) && !defined(FIPGEMM_NO_VECTOR_LANES)
#define FIPGEMM_VECTOR_LANES 1
typedef double vd4 __attribute__((vector_size(32)));

inline vd4 vd4_load(const double* p) { return vd4{p[0], p[1], p[2], p[3]}; }
inline vd4 vd4_broadcast(double x) { return vd4{x, x, x, x}; }
inline vd4 vd4_fma(vd4 a, vd4 b, vd4 c) {
    return vd4{__builtin_fma(a[0], b[0], c[0]), __builtin_fma(a[1], b[1], c[1]),
               __builtin_fma(a[2], b[2], c[2]), __builtin_fma(a[3], b[3], c[3])};
}
#endif

/*
 * The single microkernel template. All four variants, the fused pack
 * stores, the fringe masking and the counting are compile-time switches,
 * so each expansion runs its k-loop with no branching on any of them.
 *
 * A_PK/B_PK  operand arrives packed (contiguous micropanel)
 * A_ST/B_ST  operand is unpacked and a packed copy is stored as it streams
 * A_FULL     m_eff == MR, so unpacked A loads need no row mask
 * B_FULL     n_eff == NR, ditto for columns
 * CNT        count element accesses into *ctr
 *
 * Accumulates c(i,j) += alpha * sum_l a(i,l)*b(l,j), l ascending, one fma
 * per (i,j) per l. The MR x NR accumulator block is a compile-time-sized
 * local array and the update is fully unrolled.
 */
template <int MR, int NR, bool A_PK, bool A_ST, bool A_FULL, bool B_PK, bool B_ST, bool B_FULL,
          bool CNT>
inline void ukr_fixed(index_t m_eff, index_t n_eff, index_t k, UkrOperand a, UkrOperand b,
                      double* c, index_t c_rs, index_t c_cs, double alpha, AccessCounters* ctr) {
    static_assert(!(A_PK && A_ST) && !(B_PK && B_ST));
    if (k == 0) return;

#ifdef FIPGEMM_VECTOR_LANES
    if constexpr (NR % 4 == 0) {
        constexpr int NV = NR / 4;
        vd4 acc[MR][NV] = {};
        std::uint64_t a_up = 0, b_up = 0, a_pr = 0, b_pr = 0, a_wr = 0, b_wr = 0;

        // Unit-stride sources feed the update without a staging copy; the
        // flags are loop-invariant, so the branches unswitch out of the
        // k-loop.
        const bool a_unit = !A_PK && A_FULL && a.rs == 1;
        const bool b_unit = !B_PK && B_FULL && b.cs == 1;

        for (index_t l = 0; l < k; ++l) {
            double av[MR];
            const double* acol;
            if constexpr (A_PK) {
                acol = a.packed + l * MR;
                if constexpr (CNT) a_pr += MR;
            } else {
                const double* ac = a.base + l * a.cs;
                if (a_unit) {
                    acol = ac;
                    if constexpr (CNT) a_up += MR;
                } else {
                    for (int i = 0; i < MR; ++i) {
                        if constexpr (A_FULL) {
                            av[i] = ac[i * a.rs];
                            if constexpr (CNT) ++a_up;
                        } else {
                            if (i < m_eff) {
                                av[i] = ac[i * a.rs];
                                if constexpr (CNT) ++a_up;
                            } else {
                                av[i] = 0.0;
                            }
                        }
                    }
                    acol = av;
                }
                if constexpr (A_ST) {
                    double* d = a.dest + l * MR;
                    for (int i = 0; i < MR; ++i) d[i] = acol[i];
                    if constexpr (CNT) a_wr += MR;
                }
            }

            vd4 bvv[NV];
            if constexpr (B_PK) {
                const double* br = b.packed + l * NR;
                for (int v = 0; v < NV; ++v) bvv[v] = vd4_load(br + 4 * v);
                if constexpr (CNT) b_pr += NR;
            } else {
                const double* br = b.base + l * b.rs;
                if (b_unit) {
                    for (int v = 0; v < NV; ++v) bvv[v] = vd4_load(br + 4 * v);
                    if constexpr (CNT) b_up += NR;
                    if constexpr (B_ST) {
                        double* d = b.dest + l * NR;
                        for (int j = 0; j < NR; ++j) d[j] = br[j];
                        if constexpr (CNT) b_wr += NR;
                    }
                } else {
                    double bv[NR];
                    for (int j = 0; j < NR; ++j) {
                        if constexpr (B_FULL) {
                            bv[j] = br[j * b.cs];
                            if constexpr (CNT) ++b_up;
                        } else {
                            if (j < n_eff) {
                                bv[j] = br[j * b.cs];
                                if constexpr (CNT) ++b_up;
                            } else {
                                bv[j] = 0.0;
                            }
                        }
                    }
                    if constexpr (B_ST) {
                        double* d = b.dest + l * NR;
                        for (int j = 0; j < NR; ++j) d[j] = bv[j];
                        if constexpr (CNT) b_wr += NR;
                    }
                    for (int v = 0; v < NV; ++v) bvv[v] = vd4_load(bv + 4 * v);
                }
            }

            for (int i = 0; i < MR; ++i) {
                const vd4 ai = vd4_broadcast(acol[i]);
                for (int v = 0; v < NV; ++v) acc[i][v] = vd4_fma(ai, bvv[v], acc[i][v]);
            }
        }

        if constexpr (CNT) {
            ctr->a_unpacked_reads += a_up;
            ctr->b_unpacked_reads += b_up;
            ctr->a_packed_reads += a_pr;
            ctr->b_packed_reads += b_pr;
            ctr->a_pack_writes += a_wr;
            ctr->b_pack_writes += b_wr;
        }

        double tile[MR][NR];
        for (int i = 0; i < MR; ++i)
            for (int v = 0; v < NV; ++v)
                for (int e = 0; e < 4; ++e) tile[i][v * 4 + e] = acc[i][v][e];
        for (index_t j = 0; j < n_eff; ++j) {
            double* cj = c + j * c_cs;
            for (index_t i = 0; i < m_eff; ++i)
                cj[i * c_rs] = std::fma(alpha, tile[i][j], cj[i * c_rs]);
        }
        return;
    }
#endif

    double acc[MR][NR] = {};
    std::uint64_t a_up = 0, b_up = 0, a_pr = 0, b_pr = 0, a_wr = 0, b_wr = 0;

    for (index_t l = 0; l < k; ++l) {
        double av[MR];
        if constexpr (A_PK) {
            const double* ap = a.packed + l * MR;
            for (int i = 0; i < MR; ++i) {
                av[i] = ap[i];
                if constexpr (CNT) ++a_pr;
            }
        } else {
            const double* ac = a.base + l * a.cs;
            for (int i = 0; i < MR; ++i) {
                if constexpr (A_FULL) {
                    av[i] = ac[i * a.rs];
                    if constexpr (CNT) ++a_up;
                } else {
                    if (i < m_eff) {
                        av[i] = ac[i * a.rs];
                        if constexpr (CNT) ++a_up;
                    } else {
                        av[i] = 0.0;
                    }
                }
            }
            if constexpr (A_ST) {
                double* d = a.dest + l * MR;
                for (int i = 0; i < MR; ++i) {
                    d[i] = av[i];  // masked loads already zeroed the fringe
                    if constexpr (CNT) ++a_wr;
                }
            }
        }

        double bv[NR];
        if constexpr (B_PK) {
            const double* bp = b.packed + l * NR;
            for (int j = 0; j < NR; ++j) {
                bv[j] = bp[j];
                if constexpr (CNT) ++b_pr;
            }
        } else {
            const double* br = b.base + l * b.rs;
            for (int j = 0; j < NR; ++j) {
                if constexpr (B_FULL) {
                    bv[j] = br[j * b.cs];
                    if constexpr (CNT) ++b_up;
                } else {
                    if (j < n_eff) {
                        bv[j] = br[j * b.cs];
                        if constexpr (CNT) ++b_up;
                    } else {
                        bv[j] = 0.0;
                    }
                }
            }
            if constexpr (B_ST) {
                double* d = b.dest + l * NR;
                for (int j = 0; j < NR; ++j) {
                    d[j] = bv[j];
                    if constexpr (CNT) ++b_wr;
                }
            }
        }

        for (int i = 0; i < MR; ++i)
            for (int j = 0; j < NR; ++j) acc[i][j] = std::fma(av[i], bv[j], acc[i][j]);
    }

    if constexpr (CNT) {
        ctr->a_unpacked_reads += a_up;
        ctr->b_unpacked_reads += b_up;
        ctr->a_packed_reads += a_pr;
        ctr->b_packed_reads += b_pr;
        ctr->a_pack_writes += a_wr;
        ctr->b_pack_writes += b_wr;
    }

    for (index_t j = 0; j < n_eff; ++j) {
        double* cj = c + j * c_cs;
        for (index_t i = 0; i < m_eff; ++i) cj[i * c_rs] = std::fma(alpha, acc[i][j], cj[i * c_rs]);
    }
}

// Bounded runtime-sized fallback for register blockings without a dedicated
// expansion. Same contract, plain loops, accumulator capped at
// kMaxRegisterBlock per edge.
template <bool A_PK, bool A_ST, bool B_PK, bool B_ST, bool CNT>
inline void ukr_any(index_t mr, index_t nr, index_t m_eff, index_t n_eff, index_t k, UkrOperand a,
                    UkrOperand b, double* c, index_t c_rs, index_t c_cs, double alpha,
                    AccessCounters* ctr) {
    static_assert(!(A_PK && A_ST) && !(B_PK && B_ST));
    if (k == 0) return;

    double acc[kMaxRegisterBlock][kMaxRegisterBlock];
    for (index_t i = 0; i < mr; ++i)
        for (index_t j = 0; j < nr; ++j) acc[i][j] = 0.0;
    std::uint64_t a_up = 0, b_up = 0, a_pr = 0, b_pr = 0, a_wr = 0, b_wr = 0;

    for (index_t l = 0; l < k; ++l) {
        double av[kMaxRegisterBlock];
        if constexpr (A_PK) {
            const double* ap = a.packed + l * mr;
            for (index_t i = 0; i < mr; ++i) {
                av[i] = ap[i];
                if constexpr (CNT) ++a_pr;
            }
        } else {
            const double* ac = a.base + l * a.cs;
            for (index_t i = 0; i < mr; ++i) {
                if (i < m_eff) {
                    av[i] = ac[i * a.rs];
                    if constexpr (CNT) ++a_up;
                } else {
                    av[i] = 0.0;
                }
            }
            if constexpr (A_ST) {
                double* d = a.dest + l * mr;
                for (index_t i = 0; i < mr; ++i) {
                    d[i] = av[i];
                    if constexpr (CNT) ++a_wr;
                }
            }
        }

        double bv[kMaxRegisterBlock];
        if constexpr (B_PK) {
            const double* bp = b.packed + l * nr;
            for (index_t j = 0; j < nr; ++j) {
                bv[j] = bp[j];
                if constexpr (CNT) ++b_pr;
            }
        } else {
            const double* br = b.base + l * b.rs;
            for (index_t j = 0; j < nr; ++j) {
                if (j < n_eff) {
                    bv[j] = br[j * b.cs];
                    if constexpr (CNT) ++b_up;
                } else {
                    bv[j] = 0.0;
                }
            }
            if constexpr (B_ST) {
                double* d = b.dest + l * nr;
                for (index_t j = 0; j < nr; ++j) {
                    d[j] = bv[j];
                    if constexpr (CNT) ++b_wr;
                }
            }
        }

        for (index_t i = 0; i < mr; ++i)
            for (index_t j = 0; j < nr; ++j) acc[i][j] = std::fma(av[i], bv[j], acc[i][j]);
    }

    if constexpr (CNT) {
        ctr->a_unpacked_reads += a_up;
        ctr->b_unpacked_reads += b_up;
        ctr->a_packed_reads += a_pr;
        ctr->b_packed_reads += b_pr;
        ctr->a_pack_writes += a_wr;
        ctr->b_pack_writes += b_wr;
    }

    for (index_t j = 0; j < n_eff; ++j) {
        double* cj = c + j * c_cs;
        for (index_t i = 0; i < m_eff; ++i) cj[i * c_rs] = std::fma(alpha, acc[i][j], cj[i * c_rs]);
    }
}

// Expands the B-side runtime facts (packed / fused / plain, full / fringe)
// into template arguments.
template <int MR, int NR, bool CNT, bool A_PK, bool A_ST, bool A_FULL>
inline void ukr_pick_b(index_t m_eff, index_t n_eff, index_t k, UkrOperand a, UkrOperand b,
                       double* c, index_t c_rs, index_t c_cs, double alpha, AccessCounters* ctr) {
    const bool b_full = n_eff == NR;
    if (b.packed) {
        ukr_fixed<MR, NR, A_PK, A_ST, A_FULL, true, false, true, CNT>(m_eff, n_eff, k, a, b, c,
                                                                      c_rs, c_cs, alpha, ctr);
    } else if (b.dest) {
        if (b_full)
            ukr_fixed<MR, NR, A_PK, A_ST, A_FULL, false, true, true, CNT>(m_eff, n_eff, k, a, b, c,
                                                                          c_rs, c_cs, alpha, ctr);
        else
            ukr_fixed<MR, NR, A_PK, A_ST, A_FULL, false, true, false, CNT>(m_eff, n_eff, k, a, b,
                                                                           c, c_rs, c_cs, alpha, ctr);
    } else {
        if (b_full)
            ukr_fixed<MR, NR, A_PK, A_ST, A_FULL, false, false, true, CNT>(m_eff, n_eff, k, a, b,
                                                                           c, c_rs, c_cs, alpha, ctr);
        else
            ukr_fixed<MR, NR, A_PK, A_ST, A_FULL, false, false, false, CNT>(m_eff, n_eff, k, a, b,
                                                                            c, c_rs, c_cs, alpha, ctr);
    }
}

template <int MR, int NR, bool CNT>
inline void ukr_pick(index_t m_eff, index_t n_eff, index_t k, UkrOperand a, UkrOperand b, double* c,
                     index_t c_rs, index_t c_cs, double alpha, AccessCounters* ctr) {
    const bool a_full = m_eff == MR;
    if (a.packed) {
        ukr_pick_b<MR, NR, CNT, true, false, true>(m_eff, n_eff, k, a, b, c, c_rs, c_cs, alpha, ctr);
    } else if (a.dest) {
        if (a_full)
            ukr_pick_b<MR, NR, CNT, false, true, true>(m_eff, n_eff, k, a, b, c, c_rs, c_cs, alpha, ctr);
        else
            ukr_pick_b<MR, NR, CNT, false, true, false>(m_eff, n_eff, k, a, b, c, c_rs, c_cs, alpha, ctr);
    } else {
        if (a_full)
            ukr_pick_b<MR, NR, CNT, false, false, true>(m_eff, n_eff, k, a, b, c, c_rs, c_cs, alpha, ctr);
        else
            ukr_pick_b<MR, NR, CNT, false, false, false>(m_eff, n_eff, k, a, b, c, c_rs, c_cs, alpha, ctr);
    }
}

template <bool CNT>
inline void ukr_pick_any(index_t mr, index_t nr, index_t m_eff, index_t n_eff, index_t k,
                         UkrOperand a, UkrOperand b, double* c, index_t c_rs, index_t c_cs,
                         double alpha, AccessCounters* ctr) {
    auto run = [&](auto apk, auto ast, auto bpk, auto bst) {
        ukr_any<decltype(apk)::value, decltype(ast)::value, decltype(bpk)::value,
                decltype(bst)::value, CNT>(mr, nr, m_eff, n_eff, k, a, b, c, c_rs, c_cs, alpha, ctr);
    };
    const bool apk = a.packed != nullptr, ast = !apk && a.dest != nullptr;
    const bool bpk = b.packed != nullptr, bst = !bpk && b.dest != nullptr;
    using T = std::true_type;
    using F = std::false_type;
    if (apk) {
        if (bpk) run(T{}, F{}, T{}, F{});
        else if (bst) run(T{}, F{}, F{}, T{});
        else run(T{}, F{}, F{}, F{});
    } else if (ast) {
        if (bpk) run(F{}, T{}, T{}, F{});
        else if (bst) run(F{}, T{}, F{}, T{});
        else run(F{}, T{}, F{}, F{});
    } else {
        if (bpk) run(F{}, F{}, T{}, F{});
        else if (bst) run(F{}, F{}, F{}, T{});
        else run(F{}, F{}, F{}, F{});
    }
}

inline UkrOperand to_ukr(const OperandSource& s) {
    UkrOperand o;
    o.packed = s.packed;
    o.base = s.view.data;
    o.rs = s.view.row_stride;
    o.cs = s.view.col_stride;
    o.dest = s.pack_dest;
    return o;
}

// Single entry the loop layers use: dispatches on the register blocking and
// on whether counting is requested, runs the microtile, and settles the
// pack-destination valid flags (also for k == 0, which leaves C untouched
// and the panel trivially whole).
inline void run_microtile(const BlockingParams& p, const OperandSource& a, const OperandSource& b,
                          MatrixView c_tile, index_t k_eff, double alpha, AccessCounters* ctr) {
    const UkrOperand ao = to_ukr(a), bo = to_ukr(b);
    const index_t me = c_tile.rows, ne = c_tile.cols;
    double* cp = c_tile.data;
    const index_t crs = c_tile.row_stride, ccs = c_tile.col_stride;
    if (p.mr == 6 && p.nr == 8) {
        if (ctr) ukr_pick<6, 8, true>(me, ne, k_eff, ao, bo, cp, crs, ccs, alpha, ctr);
        else ukr_pick<6, 8, false>(me, ne, k_eff, ao, bo, cp, crs, ccs, alpha, nullptr);
    } else if (p.mr == 4 && p.nr == 4) {
        if (ctr) ukr_pick<4, 4, true>(me, ne, k_eff, ao, bo, cp, crs, ccs, alpha, ctr);
        else ukr_pick<4, 4, false>(me, ne, k_eff, ao, bo, cp, crs, ccs, alpha, nullptr);
    } else {
        if (ctr) ukr_pick_any<true>(p.mr, p.nr, me, ne, k_eff, ao, bo, cp, crs, ccs, alpha, ctr);
        else ukr_pick_any<false>(p.mr, p.nr, me, ne, k_eff, ao, bo, cp, crs, ccs, alpha, nullptr);
    }
    if (a.pack_dest && a.dest_valid) *a.dest_valid = true;
    if (b.pack_dest && b.dest_valid) *b.dest_valid = true;
}

/*
 * Millikernel: the first loop around the microkernel absorbed into one call
 * layer, streaming both operands straight from strided storage. This is the
 * unpacked path's workhorse; fringe microtiles fall out of the same masked
 * expansions the microkernel uses.
 */
template <int MR, int NR, bool CNT>
inline void millikernel_fixed(const MatrixView& a_block, const MatrixView& b_micropanel,
                              MatrixView c_strip, double alpha, AccessCounters* ctr) {
    const index_t m = a_block.rows, k = a_block.cols, ne = b_micropanel.cols;
    UkrOperand b;
    b.base = b_micropanel.data;
    b.rs = b_micropanel.row_stride;
    b.cs = b_micropanel.col_stride;
    for (index_t ir = 0; ir < m; ir += MR) {
        const index_t me = std::min<index_t>(MR, m - ir);
        UkrOperand a;
        a.base = a_block.data + ir * a_block.row_stride;
        a.rs = a_block.row_stride;
        a.cs = a_block.col_stride;
        double* cp = c_strip.data + ir * c_strip.row_stride;
        if (me == MR)
            ukr_pick_b<MR, NR, CNT, false, false, true>(me, ne, k, a, b, cp, c_strip.row_stride,
                                                        c_strip.col_stride, alpha, ctr);
        else
            ukr_pick_b<MR, NR, CNT, false, false, false>(me, ne, k, a, b, cp, c_strip.row_stride,
                                                         c_strip.col_stride, alpha, ctr);
    }
}

inline void millikernel_any(const BlockingParams& p, const MatrixView& a_block,
                            const MatrixView& b_micropanel, MatrixView c_strip, double alpha,
                            AccessCounters* ctr) {
    const index_t m = a_block.rows;
    for (index_t ir = 0; ir < m; ir += p.mr) {
        const index_t me = std::min(p.mr, m - ir);
        OperandSource a = OperandSource::from_view(a_block.block(ir, 0, me, a_block.cols));
        OperandSource b = OperandSource::from_view(b_micropanel);
        run_microtile(p, a, b, c_strip.block(ir, 0, me, c_strip.cols), a_block.cols, alpha, ctr);
    }
}

// Dispatch for the unpacked-path millikernel.
inline void run_millikernel(const BlockingParams& p, const MatrixView& a_block,
                            const MatrixView& b_micropanel, MatrixView c_strip, double alpha,
                            AccessCounters* ctr) {
    if (p.mr == 6 && p.nr == 8) {
        if (ctr) millikernel_fixed<6, 8, true>(a_block, b_micropanel, c_strip, alpha, ctr);
        else millikernel_fixed<6, 8, false>(a_block, b_micropanel, c_strip, alpha, nullptr);
    } else if (p.mr == 4 && p.nr == 4) {
        if (ctr) millikernel_fixed<4, 4, true>(a_block, b_micropanel, c_strip, alpha, ctr);
        else millikernel_fixed<4, 4, false>(a_block, b_micropanel, c_strip, alpha, nullptr);
    } else {
        millikernel_any(p, a_block, b_micropanel, c_strip, alpha, ctr);
    }
}

}  // namespace detail

// Validating public microkernel: checks operand states against the variant
// and the micropanel/microtile shapes against (mr, nr, k_eff), then runs
// c_tile(i,j) += sum_l a(i,l)*b(l,j).
void microkernel(MicrokernelVariant variant, const OperandSource& a, const OperandSource& b,
                 MatrixView c_tile, index_t k_eff, const BlockingParams& params,
                 AccessCounters* counters = nullptr);

using microkernel_fn = void (*)(const OperandSource& a, const OperandSource& b, MatrixView c_tile,
                                index_t k_eff, const BlockingParams& params,
                                AccessCounters* counters);

// The four separately callable expansions of the kernel template, indexed by
// operand state. kernels[a][b] with 0 = packed, 1 = unpacked; the
// packed/packed instance contains no packing stores.
struct VariantSet {
    microkernel_fn kernels[2][2];

    microkernel_fn get(MicrokernelVariant v) const {
        return kernels[v.a_state == OperandState::unpacked][v.b_state == OperandState::unpacked];
    }
};

VariantSet instantiate_variants();

}  // namespace fipgemm
