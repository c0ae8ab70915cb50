#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "fipgemm/driver.hpp"
#include "fipgemm/matrix.hpp"
#include "fipgemm/params.hpp"

namespace fipgemm {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct VerifyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Set-associative placement model: address mod (sets * line_bytes) picks the
// set. Virtual-layout offsets, no physical translation.
struct CacheModel {
    index_t line_bytes = 64;
    index_t sets = 64;
    index_t ways = 8;

    index_t capacity() const { return line_bytes * sets * ways; }
};

// Distinct cache lines of an operand footprint, bucketed by set.
struct SetHistogram {
    std::vector<std::uint64_t> lines_per_set;

    std::uint64_t total_lines() const;
    std::uint64_t max_lines() const;
    // max over mean occupancy; 1.0 means perfectly equitable.
    double imbalance() const;
};

// Footprint of a strided view (element offsets from its base, which is
// assumed line-aligned).
SetHistogram analyze_set_mapping(const MatrixView& view, const CacheModel& cache);
// Footprint of a contiguous packed buffer of the given byte size.
SetHistogram analyze_packed_span(std::size_t bytes, const CacheModel& cache);

struct BenchRecord {
    Strategy strategy = Strategy::conventional;
    index_t m = 0, n = 0, k = 0;
    bool ldim_tight = true;
    index_t ldim = 0;  // resolved leading dimension actually used
    int threads = 1;
    int repeats = 0;
    double median_seconds = 0.0;
    double gflops = 0.0;  // 2*m*n*k / median_seconds / 1e9
};

struct SweepConfig {
    std::vector<index_t> sizes;                 // m = n = k sweep
    std::vector<Strategy> strategies{Strategy::conventional, Strategy::sup, Strategy::fip};
    bool ldim_tight = true;
    index_t ldim_value = 0;                     // used when !ldim_tight
    int repeats = 5;                            // >= 3; median is reported
    int threads = 1;                            // applied to fip only
    BlockingParams params = default_params(ParamProfile::generic_large);
    bool verify_all = false;                    // verify every cell, not just min/max sizes
    std::uint64_t seed = 42;
};

// Times every (size, strategy) cell with one warm-up call and `repeats`
// timed calls. Correctness is checked against reference_gemm on the
// smallest and largest sizes (every size with verify_all) before timing.
// Throws ConfigError for bad configs and VerifyError on a tolerance breach.
std::vector<BenchRecord> run_sweep(const SweepConfig& config, std::ostream* progress = nullptr);

// CSV columns, in order: strategy,m,n,k,ldim,threads,repeats,median_seconds,gflops
void write_csv(const std::vector<BenchRecord>& records, std::ostream& out);
void write_csv(const std::vector<BenchRecord>& records, const std::string& path);

// gnuplot script rendering GFLOPS vs size, one curve per strategy present in
// the records; regenerates byte-identically from the same inputs.
std::string plot_script(const std::vector<BenchRecord>& records, const std::string& csv_path);
void write_plot_script(const std::vector<BenchRecord>& records, const std::string& csv_path,
                       const std::string& script_path);

// Elementwise |got - want| <= 8 * k * eps * max|want| gate used everywhere a
// blocked result is compared against the reference triple loop.
double gemm_tolerance(index_t k, double max_abs_ref);
bool verify_against_reference(Strategy strategy, index_t size, bool ldim_tight, index_t ldim_value,
                              int threads, const BlockingParams& params, std::uint64_t seed,
                              double* max_rel_err = nullptr);

}  // namespace fipgemm
