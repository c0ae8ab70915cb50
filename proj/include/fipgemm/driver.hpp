#pragma once

#include <functional>
#include <optional>
#include <string>

#include "fipgemm/instrument.hpp"
#include "fipgemm/kernel.hpp"
#include "fipgemm/matrix.hpp"
#include "fipgemm/pack.hpp"
#include "fipgemm/params.hpp"

namespace fipgemm {

// Conventional always packs both operands, sup never packs, fip packs per
// the decision table and fuses the packing into the first computational pass.
enum class Strategy { conventional, sup, fip };

const char* to_string(Strategy s);
std::optional<Strategy> parse_strategy(const std::string& name);

// Which microkernel variant a given position in the loop nest gets under
// fused-in packing, and whether it should emit pack stores. Within one
// depth panel pass: A micropanels are consumed unpacked (and stored) on
// every call of the first 2nd-loop iteration of their block; B micropanels
// on the first 1st-loop call of each 2nd-loop iteration while the pass is
// in its first 3rd-loop block. Operands whose packing the decision disables
// are presented unpacked with no pack destination on every call.
struct FipCallPlan {
    MicrokernelVariant variant;
    bool store_a = false;
    bool store_b = false;
};

FipCallPlan fip_variant_schedule(bool i3_first, bool i2_first, bool i1_first,
                                 PackingDecision decision);

// C := alpha * A * B + beta * C over the five-loop nest. beta is applied by
// pre-scaling C; alpha at the microtile writeback. Throws on dimension
// mismatch.
void gemm(Strategy strategy, double alpha, const MatrixView& a, const MatrixView& b, double beta,
          MatrixView c, const BlockingParams& params, AccessCounters* counters = nullptr);

// C := A * B + C.
void gemm(Strategy strategy, const MatrixView& a, const MatrixView& b, MatrixView c,
          const BlockingParams& params, AccessCounters* counters = nullptr);

// The unpacked path as a named entry: all five loops with the first loop
// absorbed into the millikernel, operands streamed from strided storage.
void sup_gemm_path(const MatrixView& a, const MatrixView& b, MatrixView c,
                   const BlockingParams& params, AccessCounters* counters = nullptr);

namespace detail {

// The loop nest with its packed buffers exposed, so tests can drive single
// panel passes and inspect packed state mid-flight. gemm() is a thin wrapper
// over this.
class GemmPlan {
public:
    GemmPlan(Strategy strategy, const MatrixView& a, const MatrixView& b, MatrixView c,
             const BlockingParams& params, double alpha, AccessCounters* counters);

    void run();                                    // full 5th/4th loop sweep
    void run_panel_pass(index_t jc, index_t pc);   // one 4th-loop iteration

    PackedBlockA& a_buffer();
    PackedPanelB& b_buffer();
    const PackingDecision& decision() const { return decision_; }
    void set_decision(PackingDecision d) {
        decision_ = d;
        ensure_buffers();
    }

    // Test hooks, invoked by the packing strategies inside a panel pass.
    std::function<void(index_t ic)> on_block_done;             // after each 3rd-loop iteration
    std::function<void(index_t ic, index_t q)> on_loop2_done;  // after each 2nd-loop iteration

    // When set, counts one rendezvous per (3rd-loop block, panel pass) into
    // the counters; used by the degenerate single-worker threaded path.
    bool count_rendezvous = false;

private:
    void ensure_buffers();
    void pass_conventional(index_t jc, index_t pc, index_t nc_eff, index_t kc_eff);
    void pass_sup(index_t jc, index_t pc, index_t nc_eff, index_t kc_eff);
    void pass_fip(index_t jc, index_t pc, index_t nc_eff, index_t kc_eff);

    Strategy strategy_;
    MatrixView a_, b_, c_;
    BlockingParams params_;
    double alpha_;
    AccessCounters* counters_;
    PackingDecision decision_;
    std::optional<PackedBlockA> a_tilde_;
    std::optional<PackedPanelB> b_tilde_;
};

}  // namespace detail

}  // namespace fipgemm
