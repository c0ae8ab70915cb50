#include "fipgemm/kernel.hpp"

#include <stdexcept>
#include <string>

namespace fipgemm {

namespace {

void check_operand(const char* name, const OperandSource& s, OperandState expected,
                   index_t unit_extent, index_t other_extent, bool unit_is_rows, index_t k_eff) {
    const std::string n(name);
    if (s.state() != expected)
        throw std::invalid_argument("microkernel: operand " + n + " state does not match variant");
    if (s.packed && s.pack_dest)
        throw std::invalid_argument("microkernel: packed operand " + n + " cannot carry a pack_dest");
    if (s.state() == OperandState::unpacked) {
        const index_t rows = unit_is_rows ? other_extent : k_eff;
        const index_t cols = unit_is_rows ? k_eff : other_extent;
        if (s.view.rows != rows || s.view.cols != cols)
            throw std::invalid_argument("microkernel: operand " + n + " view shape mismatch");
        (void)unit_extent;
    }
}

template <bool A_UNPACKED, bool B_UNPACKED>
void variant_entry(const OperandSource& a, const OperandSource& b, MatrixView c_tile,
                   index_t k_eff, const BlockingParams& params, AccessCounters* counters) {
    MicrokernelVariant v{A_UNPACKED ? OperandState::unpacked : OperandState::packed,
                         B_UNPACKED ? OperandState::unpacked : OperandState::packed};
    microkernel(v, a, b, c_tile, k_eff, params, counters);
}

}  // namespace

void microkernel(MicrokernelVariant variant, const OperandSource& a, const OperandSource& b,
                 MatrixView c_tile, index_t k_eff, const BlockingParams& params,
                 AccessCounters* counters) {
    if (k_eff < 0) throw std::invalid_argument("microkernel: negative k_eff");
    if (c_tile.rows > params.mr || c_tile.cols > params.nr)
        throw std::invalid_argument("microkernel: microtile exceeds (mr, nr)");
    check_operand("A", a, variant.a_state, params.mr, c_tile.rows, true, k_eff);
    check_operand("B", b, variant.b_state, params.nr, c_tile.cols, false, k_eff);
    detail::run_microtile(params, a, b, c_tile, k_eff, 1.0, counters);
}

VariantSet instantiate_variants() {
    VariantSet set;
    set.kernels[0][0] = &variant_entry<false, false>;
    set.kernels[0][1] = &variant_entry<false, true>;
    set.kernels[1][0] = &variant_entry<true, false>;
    set.kernels[1][1] = &variant_entry<true, true>;
    return set;
}

}  // namespace fipgemm
