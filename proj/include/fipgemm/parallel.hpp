#pragma once

#include <vector>

#include "fipgemm/driver.hpp"
#include "fipgemm/matrix.hpp"
#include "fipgemm/params.hpp"

namespace fipgemm {

// Name of the environment variable consulted when no explicit thread count
// is given.
inline constexpr const char* kThreadsEnvVar = "FIPGEMM_THREADS";

// requested >= 1 wins; otherwise FIPGEMM_THREADS; otherwise 1.
int resolve_thread_count(int requested);

// Static partition of one A block's micropanels across the workers of the
// 2nd loop. Each worker starts its first pass at its own offset (rotated
// 1st-loop order) so the block becomes fully packed after every worker has
// finished its share; remainders go to the first (panels mod n_thr) workers,
// so shares differ by at most one panel.
struct ThreadPlan {
    int n_thr = 1;
    std::vector<index_t> start_offsets;  // first A micropanel per worker
    std::vector<index_t> panel_counts;   // panels owned per worker
};

ThreadPlan make_thread_plan(index_t panel_count, int n_thr);

// C := alpha * A * B + beta * C with the fused-packing schedule and
// 2nd-loop parallelism. Workers cooperatively pack each A block during
// their first 2nd-loop iteration on it and synchronize exactly once per
// (block, depth-panel pass); B micropanels are packed into worker-private
// space. C column strips are worker-exclusive, so the result is bitwise
// deterministic for a fixed n_thr.
void parallel_gemm_fip(double alpha, const MatrixView& a, const MatrixView& b, double beta,
                       MatrixView c, const BlockingParams& params, int n_thr,
                       AccessCounters* counters = nullptr);

// C := A * B + C.
void parallel_gemm_fip(const MatrixView& a, const MatrixView& b, MatrixView c,
                       const BlockingParams& params, int n_thr,
                       AccessCounters* counters = nullptr);

}  // namespace fipgemm
