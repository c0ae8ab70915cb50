#pragma once

#include <cassert>
#include <cstdint>
#include <vector>

namespace fipgemm {

using index_t = std::int64_t;

enum class Layout { col_major, row_major };

// Strided 2-D view over a double buffer. Exactly one stride is 1 (unit
// stride in one dimension); the other is the leading dimension and must
// be at least the extent it spans so that distinct (i,j) never alias.
struct MatrixView {
    double* data = nullptr;
    index_t rows = 0;
    index_t cols = 0;
    index_t row_stride = 0;  // elements between (i,j) and (i+1,j)
    index_t col_stride = 0;  // elements between (i,j) and (i,j+1)

    bool col_major() const { return row_stride == 1; }
    bool row_major() const { return col_stride == 1; }

    index_t offset(index_t i, index_t j) const { return i * row_stride + j * col_stride; }

    double& at(index_t i, index_t j) {
        assert(i >= 0 && i < rows && j >= 0 && j < cols);
        return data[offset(i, j)];
    }
    double at(index_t i, index_t j) const {
        assert(i >= 0 && i < rows && j >= 0 && j < cols);
        return data[offset(i, j)];
    }

    double* ptr(index_t i, index_t j) { return data + offset(i, j); }
    const double* ptr(index_t i, index_t j) const { return data + offset(i, j); }

    // Subview of extent r x c anchored at (i0, j0). Strides carry over.
    MatrixView block(index_t i0, index_t j0, index_t r, index_t c) const {
        assert(i0 >= 0 && j0 >= 0 && r >= 0 && c >= 0);
        assert(i0 + r <= rows && j0 + c <= cols);
        return MatrixView{data + offset(i0, j0), r, c, row_stride, col_stride};
    }
};

// Validates the leading dimension against the extent it must span and
// builds the view. Throws std::invalid_argument on violation.
MatrixView make_view(double* data, index_t rows, index_t cols, Layout layout,
                     index_t leading_dimension);

// Owning matrix: storage plus the layout facts needed to rebuild a view.
class Matrix {
public:
    Matrix(index_t rows, index_t cols, Layout layout, index_t leading_dimension);
    Matrix(index_t rows, index_t cols, Layout layout);  // tight leading dimension

    MatrixView view();
    MatrixView view() const;  // buffer treated as read-only by convention

    index_t rows() const { return rows_; }
    index_t cols() const { return cols_; }
    index_t leading_dimension() const { return ld_; }
    Layout layout() const { return layout_; }

private:
    index_t rows_, cols_, ld_;
    Layout layout_;
    std::vector<double> store_;
};

// C(i,j) += sum_p A(i,p) * B(p,j), textbook triple loop in fixed (i, j, p)
// order. Bit-deterministic for a fixed input; the oracle for everything else.
void reference_gemm(const MatrixView& a, const MatrixView& b, MatrixView c);

// Fills every element from a fixed pseudo-random sequence keyed on
// (seed, i, j) so the same logical matrix appears regardless of strides.
// Values lie in [-1, 1).
void fill_deterministic(MatrixView v, std::uint64_t seed);

// splitmix64 finalizer; the hash behind fill_deterministic.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace fipgemm
