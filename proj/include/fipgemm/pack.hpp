#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "fipgemm/instrument.hpp"
#include "fipgemm/matrix.hpp"
#include "fipgemm/params.hpp"

namespace fipgemm {

// Process-wide count of packed-buffer allocations. Lets tests assert that
// timed regions never allocate inside the hot loops.
std::uint64_t packed_allocation_count();

// Cache-line aligned double storage, allocated once, move-only.
class AlignedBuffer {
public:
    AlignedBuffer() = default;
    AlignedBuffer(std::size_t elems, std::size_t align_bytes);
    ~AlignedBuffer();

    AlignedBuffer(AlignedBuffer&& o) noexcept;
    AlignedBuffer& operator=(AlignedBuffer&& o) noexcept;
    AlignedBuffer(const AlignedBuffer&) = delete;
    AlignedBuffer& operator=(const AlignedBuffer&) = delete;

    double* data() { return data_; }
    const double* data() const { return data_; }
    std::size_t size() const { return elems_; }

private:
    void release();

    double* data_ = nullptr;
    std::size_t elems_ = 0;
    std::size_t align_ = alignof(double);
};

/*
 * Packed block of A: ceil(m_eff/mr) micropanels, each mr x k_eff,
 * column-ordered and zero-padded past the fringe.
 *
 *          k_eff
 *   +----------------+
 *   | panel 0 (mr)   |   element (i, l) of panel p lives at
 *   +----------------+   buffer[p*mr*k_eff + l*mr + i]
 *   | panel 1        |
 *   +----------------+
 *   | ...            |
 *
 * Capacity is fixed at construction; reset() re-shapes within capacity and
 * clears the per-panel valid flags, so one allocation serves a whole gemm.
 */
class PackedBlockA {
public:
    PackedBlockA(const BlockingParams& params, index_t m_capacity, index_t k_capacity);

    void reset(index_t m_eff, index_t k_eff);

    index_t panel_count() const { return panel_count_; }
    index_t mr() const { return mr_; }
    index_t depth() const { return k_eff_; }
    // Rows of source data in panel p (mr except at the fringe).
    index_t panel_rows(index_t p) const;

    double* panel(index_t p) { return buf_.data() + p * mr_ * k_eff_; }
    const double* panel(index_t p) const { return buf_.data() + p * mr_ * k_eff_; }

    bool valid(index_t p) const { return valid_[static_cast<std::size_t>(p)]; }
    void mark_valid(index_t p) { valid_[static_cast<std::size_t>(p)] = true; }
    bool* valid_flag(index_t p) { return &valid_[static_cast<std::size_t>(p)]; }
    bool all_valid() const;

    const double* data() const { return buf_.data(); }
    std::size_t size() const { return static_cast<std::size_t>(panel_count_ * mr_ * k_eff_); }

private:
    AlignedBuffer buf_;
    std::unique_ptr<bool[]> valid_;
    index_t valid_capacity_ = 0;
    index_t mr_, m_eff_ = 0, k_eff_ = 0, panel_count_ = 0;
};

// Packed row panel of B: ceil(n_eff/nr) micropanels, each k_eff x nr,
// row-ordered: element (l, j) of panel q lives at
// buffer[q*nr*k_eff + l*nr + j]. Columns past the fringe are zero.
class PackedPanelB {
public:
    PackedPanelB(const BlockingParams& params, index_t n_capacity, index_t k_capacity);

    void reset(index_t n_eff, index_t k_eff);

    index_t panel_count() const { return panel_count_; }
    index_t nr() const { return nr_; }
    index_t depth() const { return k_eff_; }
    index_t panel_cols(index_t q) const;

    double* panel(index_t q) { return buf_.data() + q * nr_ * k_eff_; }
    const double* panel(index_t q) const { return buf_.data() + q * nr_ * k_eff_; }

    bool valid(index_t q) const { return valid_[static_cast<std::size_t>(q)]; }
    void mark_valid(index_t q) { valid_[static_cast<std::size_t>(q)] = true; }
    bool* valid_flag(index_t q) { return &valid_[static_cast<std::size_t>(q)]; }
    bool all_valid() const;

    const double* data() const { return buf_.data(); }
    std::size_t size() const { return static_cast<std::size_t>(panel_count_ * nr_ * k_eff_); }

private:
    AlignedBuffer buf_;
    std::unique_ptr<bool[]> valid_;
    index_t valid_capacity_ = 0;
    index_t nr_, n_eff_ = 0, k_eff_ = 0, panel_count_ = 0;
};

// Packs one micropanel of A (rows <= mr, cols = k_eff) into dest,
// column-ordered, zero-padding rows [rows, mr). dest must hold mr*k_eff.
void pack_a_micropanel(const MatrixView& a_sub, double* dest, index_t mr,
                       AccessCounters* counters = nullptr);

// Mirror for B: rows = k_eff, cols <= nr, row-ordered, column padding.
void pack_b_micropanel(const MatrixView& b_sub, double* dest, index_t nr,
                       AccessCounters* counters = nullptr);

// Packs a whole m_eff x k_eff block of A into `out` (which must have
// capacity); every panel ends up valid.
void pack_block_a(const MatrixView& a_block, const BlockingParams& params,
                  PackedBlockA& out, AccessCounters* counters = nullptr);
PackedBlockA pack_block_a(const MatrixView& a_block, const BlockingParams& params,
                          AccessCounters* counters = nullptr);

// Packs a whole k_eff x n_eff row panel of B.
void pack_panel_b(const MatrixView& b_panel, const BlockingParams& params,
                  PackedPanelB& out, AccessCounters* counters = nullptr);
PackedPanelB pack_panel_b(const MatrixView& b_panel, const BlockingParams& params,
                          AccessCounters* counters = nullptr);

// True iff reading every (i, l) back from the packed layout reproduces
// a_block and every padding position is exactly zero.
bool unpack_roundtrip_check(const MatrixView& a_block, const PackedBlockA& packed);
bool unpack_roundtrip_check_b(const MatrixView& b_panel, const PackedPanelB& packed);

}  // namespace fipgemm
