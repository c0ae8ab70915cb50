#include "fipgemm/matrix.hpp"

#include <stdexcept>
#include <string>

namespace fipgemm {

MatrixView make_view(double* data, index_t rows, index_t cols, Layout layout,
                     index_t leading_dimension) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("make_view: negative extent");
    const index_t spanned = (layout == Layout::col_major) ? rows : cols;
    if (leading_dimension < spanned || leading_dimension < 1)
        throw std::invalid_argument("make_view: leading dimension " +
                                    std::to_string(leading_dimension) + " smaller than spanned extent " +
                                    std::to_string(spanned));
    if (layout == Layout::col_major)
        return MatrixView{data, rows, cols, 1, leading_dimension};
    return MatrixView{data, rows, cols, leading_dimension, 1};
}

static std::size_t storage_elems(index_t rows, index_t cols, Layout layout, index_t ld) {
    // One full leading-dimension span per logical column (or row).
    const index_t spans = (layout == Layout::col_major) ? cols : rows;
    return static_cast<std::size_t>(ld) * static_cast<std::size_t>(spans);
}

Matrix::Matrix(index_t rows, index_t cols, Layout layout, index_t leading_dimension)
    : rows_(rows), cols_(cols), ld_(leading_dimension), layout_(layout) {
    make_view(nullptr, rows, cols, layout, leading_dimension);  // validate
    store_.resize(storage_elems(rows, cols, layout, leading_dimension), 0.0);
}

Matrix::Matrix(index_t rows, index_t cols, Layout layout)
    : Matrix(rows, cols, layout,
             std::max<index_t>(1, layout == Layout::col_major ? rows : cols)) {}

MatrixView Matrix::view() {
    return make_view(store_.data(), rows_, cols_, layout_, ld_);
}

MatrixView Matrix::view() const {
    return make_view(const_cast<double*>(store_.data()), rows_, cols_, layout_, ld_);
}

void reference_gemm(const MatrixView& a, const MatrixView& b, MatrixView c) {
    if (a.rows != c.rows || b.cols != c.cols || a.cols != b.rows)
        throw std::invalid_argument("reference_gemm: dimension mismatch");
    const index_t m = c.rows, n = c.cols, k = a.cols;
    for (index_t i = 0; i < m; ++i) {
        for (index_t j = 0; j < n; ++j) {
            double s = c.at(i, j);
            for (index_t p = 0; p < k; ++p) s += a.at(i, p) * b.at(p, j);
            c.at(i, j) = s;
        }
    }
}

void fill_deterministic(MatrixView v, std::uint64_t seed) {
    const std::uint64_t base = mix64(seed);
    for (index_t i = 0; i < v.rows; ++i) {
        const std::uint64_t row_key = mix64(base ^ static_cast<std::uint64_t>(i));
        for (index_t j = 0; j < v.cols; ++j) {
            const std::uint64_t h = mix64(row_key ^ static_cast<std::uint64_t>(j));
            const double u = static_cast<double>(h >> 11) * 0x1.0p-53;  // [0, 1)
            v.at(i, j) = 2.0 * u - 1.0;
        }
    }
}

}  // namespace fipgemm
