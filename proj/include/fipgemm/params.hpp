#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fipgemm/matrix.hpp"

namespace fipgemm {

// Largest register-block edge the kernels accept; configs beyond this are
// rejected at load.
inline constexpr index_t kMaxRegisterBlock = 32;

// Declared register-file budget for one microtile, in doubles. A microtile
// larger than this still runs but cannot be expected to stay in registers;
// loaders flag it as a warning.
inline constexpr index_t kMicrotileRegisterBudget = 64;

struct BlockingParams {
    index_t mr = 6;    // register block rows
    index_t nr = 8;    // register block cols
    index_t mc = 72;   // L2 block rows, multiple of mr
    index_t nc = 4080; // L3 panel cols, multiple of nr
    index_t kc = 256;  // shared inner depth

    index_t l1_bytes = 32768;
    index_t l2_bytes = 1048576;
    index_t l3_bytes = 33554432;
    index_t line_bytes = 64;

    // Throws std::invalid_argument on any hard invariant violation.
    void validate() const;
    // Non-fatal findings (e.g. microtile exceeds the register budget).
    std::vector<std::string> warnings() const;
};

struct PackingDecision {
    bool pack_a = false;
    bool pack_b = false;

    bool operator==(const PackingDecision&) const = default;
};

// Problem-level packing heuristic. Base table: pack A when the B-panel loop
// runs more than once (n > nr), pack B when the A-panel loop does (m > mr).
// The A side is then cleared when A's unpacked storage is guaranteed to stay
// resident in L2 for a whole depth-kc panel:
//   column-major A:  col_stride * sizeof(double) * kc <= l2_bytes
//   row-major A:     mc * row_stride * sizeof(double) <= l2_bytes
PackingDecision decide_packing(index_t m, index_t n, const MatrixView& a,
                               const BlockingParams& params);

enum class ParamProfile { generic_small, generic_large };

BlockingParams default_params(ParamProfile profile);

// Loads the flat key=value config format. Keys: mr, nr, mc, nc, kc
// (elements) and l1, l2, l3, line (bytes). '#' starts a comment. All nine
// keys required; unknown or repeated keys rejected. Throws on any violation.
BlockingParams load_params(const std::string& path);
BlockingParams parse_params(const std::string& text);

}  // namespace fipgemm
