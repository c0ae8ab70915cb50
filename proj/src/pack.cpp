#include "fipgemm/pack.hpp"

#include <atomic>
#include <cstring>
#include <new>
#include <stdexcept>

namespace fipgemm {

namespace {

std::atomic<std::uint64_t> g_pack_allocations{0};

std::size_t next_pow2(std::size_t v) {
    std::size_t p = 1;
    while (p < v) p <<= 1;
    return p;
}

index_t ceil_div(index_t a, index_t b) { return (a + b - 1) / b; }

}  // namespace

std::uint64_t packed_allocation_count() { return g_pack_allocations.load(); }

AlignedBuffer::AlignedBuffer(std::size_t elems, std::size_t align_bytes) : elems_(elems) {
    align_ = next_pow2(std::max<std::size_t>(align_bytes, alignof(double)));
    data_ = static_cast<double*>(
        ::operator new[](std::max<std::size_t>(elems, 1) * sizeof(double), std::align_val_t(align_)));
    g_pack_allocations.fetch_add(1, std::memory_order_relaxed);
}

AlignedBuffer::~AlignedBuffer() { release(); }

void AlignedBuffer::release() {
    if (data_) ::operator delete[](data_, std::align_val_t(align_));
    data_ = nullptr;
    elems_ = 0;
}

AlignedBuffer::AlignedBuffer(AlignedBuffer&& o) noexcept
    : data_(o.data_), elems_(o.elems_), align_(o.align_) {
    o.data_ = nullptr;
    o.elems_ = 0;
}

AlignedBuffer& AlignedBuffer::operator=(AlignedBuffer&& o) noexcept {
    if (this != &o) {
        release();
        data_ = o.data_;
        elems_ = o.elems_;
        align_ = o.align_;
        o.data_ = nullptr;
        o.elems_ = 0;
    }
    return *this;
}

PackedBlockA::PackedBlockA(const BlockingParams& params, index_t m_capacity, index_t k_capacity)
    : mr_(params.mr) {
    const index_t panels = ceil_div(std::max<index_t>(m_capacity, 0), mr_);
    buf_ = AlignedBuffer(static_cast<std::size_t>(panels * mr_ * std::max<index_t>(k_capacity, 0)),
                         static_cast<std::size_t>(params.line_bytes));
    valid_ = std::make_unique<bool[]>(static_cast<std::size_t>(std::max<index_t>(panels, 1)));
    valid_capacity_ = panels;
    reset(m_capacity, k_capacity);
}

void PackedBlockA::reset(index_t m_eff, index_t k_eff) {
    m_eff_ = m_eff;
    k_eff_ = k_eff;
    panel_count_ = ceil_div(std::max<index_t>(m_eff, 0), mr_);
    if (static_cast<std::size_t>(panel_count_ * mr_ * k_eff_) > buf_.size() ||
        panel_count_ > valid_capacity_)
        throw std::invalid_argument("PackedBlockA::reset: exceeds capacity");
    std::fill(valid_.get(), valid_.get() + panel_count_, false);
}

index_t PackedBlockA::panel_rows(index_t p) const {
    return std::min(mr_, m_eff_ - p * mr_);
}

bool PackedBlockA::all_valid() const {
    for (index_t p = 0; p < panel_count_; ++p)
        if (!valid_[static_cast<std::size_t>(p)]) return false;
    return true;
}

PackedPanelB::PackedPanelB(const BlockingParams& params, index_t n_capacity, index_t k_capacity)
    : nr_(params.nr) {
    const index_t panels = ceil_div(std::max<index_t>(n_capacity, 0), nr_);
    buf_ = AlignedBuffer(static_cast<std::size_t>(panels * nr_ * std::max<index_t>(k_capacity, 0)),
                         static_cast<std::size_t>(params.line_bytes));
    valid_ = std::make_unique<bool[]>(static_cast<std::size_t>(std::max<index_t>(panels, 1)));
    valid_capacity_ = panels;
    reset(n_capacity, k_capacity);
}

void PackedPanelB::reset(index_t n_eff, index_t k_eff) {
    n_eff_ = n_eff;
    k_eff_ = k_eff;
    panel_count_ = ceil_div(std::max<index_t>(n_eff, 0), nr_);
    if (static_cast<std::size_t>(panel_count_ * nr_ * k_eff_) > buf_.size() ||
        panel_count_ > valid_capacity_)
        throw std::invalid_argument("PackedPanelB::reset: exceeds capacity");
    std::fill(valid_.get(), valid_.get() + panel_count_, false);
}

index_t PackedPanelB::panel_cols(index_t q) const {
    return std::min(nr_, n_eff_ - q * nr_);
}

bool PackedPanelB::all_valid() const {
    for (index_t q = 0; q < panel_count_; ++q)
        if (!valid_[static_cast<std::size_t>(q)]) return false;
    return true;
}

void pack_a_micropanel(const MatrixView& a_sub, double* dest, index_t mr,
                       AccessCounters* counters) {
    if (a_sub.rows > mr) throw std::invalid_argument("pack_a_micropanel: rows exceed mr");
    const index_t rows = a_sub.rows, k = a_sub.cols;
    for (index_t l = 0; l < k; ++l) {
        double* d = dest + l * mr;
        const double* s = a_sub.data + l * a_sub.col_stride;
        index_t i = 0;
        for (; i < rows; ++i) d[i] = s[i * a_sub.row_stride];
        for (; i < mr; ++i) d[i] = 0.0;  // fringe rows padded with zeroes
    }
    if (counters) {
        counters->a_unpacked_reads += static_cast<std::uint64_t>(rows * k);
        counters->a_pack_writes += static_cast<std::uint64_t>(mr * k);
    }
}

void pack_b_micropanel(const MatrixView& b_sub, double* dest, index_t nr,
                       AccessCounters* counters) {
    if (b_sub.cols > nr) throw std::invalid_argument("pack_b_micropanel: cols exceed nr");
    const index_t cols = b_sub.cols, k = b_sub.rows;
    for (index_t l = 0; l < k; ++l) {
        double* d = dest + l * nr;
        const double* s = b_sub.data + l * b_sub.row_stride;
        index_t j = 0;
        for (; j < cols; ++j) d[j] = s[j * b_sub.col_stride];
        for (; j < nr; ++j) d[j] = 0.0;
    }
    if (counters) {
        counters->b_unpacked_reads += static_cast<std::uint64_t>(cols * k);
        counters->b_pack_writes += static_cast<std::uint64_t>(nr * k);
    }
}

void pack_block_a(const MatrixView& a_block, const BlockingParams& params,
                  PackedBlockA& out, AccessCounters* counters) {
    out.reset(a_block.rows, a_block.cols);
    const index_t mr = params.mr;
    for (index_t p = 0; p < out.panel_count(); ++p) {
        const index_t rows = std::min(mr, a_block.rows - p * mr);
        pack_a_micropanel(a_block.block(p * mr, 0, rows, a_block.cols), out.panel(p), mr, counters);
        out.mark_valid(p);
    }
}

PackedBlockA pack_block_a(const MatrixView& a_block, const BlockingParams& params,
                          AccessCounters* counters) {
    if (a_block.rows > params.mc || a_block.cols > params.kc)
        throw std::invalid_argument("pack_block_a: block exceeds (mc, kc)");
    PackedBlockA out(params, a_block.rows, a_block.cols);
    pack_block_a(a_block, params, out, counters);
    return out;
}

void pack_panel_b(const MatrixView& b_panel, const BlockingParams& params,
                  PackedPanelB& out, AccessCounters* counters) {
    out.reset(b_panel.cols, b_panel.rows);
    const index_t nr = params.nr;
    for (index_t q = 0; q < out.panel_count(); ++q) {
        const index_t cols = std::min(nr, b_panel.cols - q * nr);
        pack_b_micropanel(b_panel.block(0, q * nr, b_panel.rows, cols), out.panel(q), nr, counters);
        out.mark_valid(q);
    }
}

PackedPanelB pack_panel_b(const MatrixView& b_panel, const BlockingParams& params,
                          AccessCounters* counters) {
    if (b_panel.cols > params.nc || b_panel.rows > params.kc)
        throw std::invalid_argument("pack_panel_b: panel exceeds (nc, kc)");
    PackedPanelB out(params, b_panel.cols, b_panel.rows);
    pack_panel_b(b_panel, params, out, counters);
    return out;
}

bool unpack_roundtrip_check(const MatrixView& a_block, const PackedBlockA& packed) {
    const index_t mr = packed.mr();
    if (packed.depth() != a_block.cols) return false;
    if (packed.panel_count() != (a_block.rows + mr - 1) / mr) return false;
    for (index_t p = 0; p < packed.panel_count(); ++p) {
        const double* panel = packed.panel(p);
        for (index_t l = 0; l < packed.depth(); ++l) {
            for (index_t i = 0; i < mr; ++i) {
                const double v = panel[l * mr + i];
                const index_t row = p * mr + i;
                if (row < a_block.rows) {
                    if (v != a_block.at(row, l)) return false;
                } else if (v != 0.0) {
                    return false;
                }
            }
        }
    }
    return true;
}

bool unpack_roundtrip_check_b(const MatrixView& b_panel, const PackedPanelB& packed) {
    const index_t nr = packed.nr();
    if (packed.depth() != b_panel.rows) return false;
    if (packed.panel_count() != (b_panel.cols + nr - 1) / nr) return false;
    for (index_t q = 0; q < packed.panel_count(); ++q) {
        const double* panel = packed.panel(q);
        for (index_t l = 0; l < packed.depth(); ++l) {
            for (index_t j = 0; j < nr; ++j) {
                const double v = panel[l * nr + j];
                const index_t col = q * nr + j;
                if (col < b_panel.cols) {
                    if (v != b_panel.at(l, col)) return false;
                } else if (v != 0.0) {
                    return false;
                }
            }
        }
    }
    return true;
}

}  // namespace fipgemm
