#include "fipgemm/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "fipgemm/parallel.hpp"

namespace fipgemm {

std::uint64_t SetHistogram::total_lines() const {
    std::uint64_t t = 0;
    for (auto v : lines_per_set) t += v;
    return t;
}

std::uint64_t SetHistogram::max_lines() const {
    std::uint64_t mx = 0;
    for (auto v : lines_per_set) mx = std::max(mx, v);
    return mx;
}

double SetHistogram::imbalance() const {
    const std::uint64_t total = total_lines();
    if (total == 0 || lines_per_set.empty()) return 0.0;
    const double mean = static_cast<double>(total) / static_cast<double>(lines_per_set.size());
    return static_cast<double>(max_lines()) / mean;
}

SetHistogram analyze_set_mapping(const MatrixView& view, const CacheModel& cache) {
    SetHistogram h;
    h.lines_per_set.assign(static_cast<std::size_t>(cache.sets), 0);
    std::unordered_set<index_t> seen;
    for (index_t i = 0; i < view.rows; ++i) {
        for (index_t j = 0; j < view.cols; ++j) {
            const index_t byte_off = view.offset(i, j) * static_cast<index_t>(sizeof(double));
            const index_t line = byte_off / cache.line_bytes;
            if (seen.insert(line).second)
                ++h.lines_per_set[static_cast<std::size_t>(line % cache.sets)];
        }
    }
    return h;
}

SetHistogram analyze_packed_span(std::size_t bytes, const CacheModel& cache) {
    SetHistogram h;
    h.lines_per_set.assign(static_cast<std::size_t>(cache.sets), 0);
    const index_t lines = static_cast<index_t>((bytes + cache.line_bytes - 1) / cache.line_bytes);
    for (index_t line = 0; line < lines; ++line)
        ++h.lines_per_set[static_cast<std::size_t>(line % cache.sets)];
    return h;
}

double gemm_tolerance(index_t k, double max_abs_ref) {
    const double eps = std::numeric_limits<double>::epsilon() / 2;  // unit roundoff
    return 8.0 * static_cast<double>(std::max<index_t>(k, 1)) * eps * max_abs_ref;
}

namespace {

void run_cell(Strategy strategy, const MatrixView& a, const MatrixView& b, MatrixView c,
              const BlockingParams& params, int threads) {
    if (strategy == Strategy::fip && threads > 1)
        parallel_gemm_fip(a, b, c, params, threads);
    else
        gemm(strategy, a, b, c, params);
}

void zero(MatrixView v) {
    for (index_t j = 0; j < v.cols; ++j)
        for (index_t i = 0; i < v.rows; ++i) v.at(i, j) = 0.0;
}

}  // namespace

bool verify_against_reference(Strategy strategy, index_t size, bool ldim_tight, index_t ldim_value,
                              int threads, const BlockingParams& params, std::uint64_t seed,
                              double* max_rel_err) {
    const index_t ld = ldim_tight ? size : ldim_value;
    Matrix a(size, size, Layout::col_major, ld);
    Matrix b(size, size, Layout::col_major, ld);
    Matrix c(size, size, Layout::col_major, ld);
    fill_deterministic(a.view(), seed);
    fill_deterministic(b.view(), seed + 1);

    // The triple-loop oracle dominates verification time at large sizes, and
    // a sweep checks several strategies against the same cell; keep the last
    // reference result around.
    struct RefCache {
        index_t size = -1, ld = -1;
        std::uint64_t seed = 0;
        Matrix ref{0, 0, Layout::col_major};
    };
    static RefCache cache;
    if (cache.size != size || cache.ld != ld || cache.seed != seed) {
        Matrix c_ref(size, size, Layout::col_major, ld);
        reference_gemm(a.view(), b.view(), c_ref.view());
        cache = RefCache{size, ld, seed, std::move(c_ref)};
    }
    const Matrix& c_ref = cache.ref;
    run_cell(strategy, a.view(), b.view(), c.view(), params, threads);

    double max_abs = 0.0, max_err = 0.0;
    for (index_t j = 0; j < size; ++j) {
        for (index_t i = 0; i < size; ++i) {
            max_abs = std::max(max_abs, std::abs(c_ref.view().at(i, j)));
            max_err = std::max(max_err, std::abs(c.view().at(i, j) - c_ref.view().at(i, j)));
        }
    }
    const double tol = gemm_tolerance(size, max_abs);
    if (max_rel_err) *max_rel_err = tol > 0 ? max_err / tol : (max_err > 0 ? 1e300 : 0.0);
    return max_err <= tol;
}

std::vector<BenchRecord> run_sweep(const SweepConfig& config, std::ostream* progress) {
    if (config.sizes.empty()) throw ConfigError("run_sweep: no sizes given");
    if (config.strategies.empty()) throw ConfigError("run_sweep: no strategies given");
    if (config.repeats < 3) throw ConfigError("run_sweep: repeats must be >= 3");
    if (config.threads < 1) throw ConfigError("run_sweep: threads must be >= 1");
    for (index_t s : config.sizes)
        if (s < 1) throw ConfigError("run_sweep: sizes must be >= 1");
    config.params.validate();

    const index_t max_size = *std::max_element(config.sizes.begin(), config.sizes.end());
    const index_t min_size = *std::min_element(config.sizes.begin(), config.sizes.end());
    if (!config.ldim_tight && config.ldim_value < max_size)
        throw ConfigError("run_sweep: fixed leading dimension " + std::to_string(config.ldim_value) +
                          " smaller than largest size " + std::to_string(max_size));

    // Spot check before any timing: smallest and largest size, every strategy.
    for (Strategy s : config.strategies) {
        for (index_t size : config.sizes) {
            const bool spot = size == min_size || size == max_size;
            if (!spot && !config.verify_all) continue;
            double rel = 0.0;
            if (!verify_against_reference(s, size, config.ldim_tight, config.ldim_value,
                                          config.threads, config.params, config.seed, &rel))
                throw VerifyError(std::string("verification failed: strategy ") + to_string(s) +
                                  " size " + std::to_string(size));
            if (progress)
                *progress << "# verified " << to_string(s) << " @ " << size << "\n";
        }
    }

    std::vector<BenchRecord> records;
    for (index_t size : config.sizes) {
        const index_t ld = config.ldim_tight ? size : config.ldim_value;
        Matrix a(size, size, Layout::col_major, ld);
        Matrix b(size, size, Layout::col_major, ld);
        Matrix c(size, size, Layout::col_major, ld);
        fill_deterministic(a.view(), config.seed);
        fill_deterministic(b.view(), config.seed + 1);

        auto used_threads_for = [&](Strategy s) {
            return (s == Strategy::fip) ? config.threads : 1;
        };

        // Repeats are interleaved across strategies so that slow drift in
        // machine state (frequency, steal time) lands on all of them alike.
        // Calls cheaper than a couple of milliseconds are batched within
        // each repeat; the per-call time is what gets recorded.
        const std::size_t n_strats = config.strategies.size();
        std::vector<std::vector<double>> seconds(n_strats);
        double warm_min = 1e300;
        for (std::size_t si = 0; si < n_strats; ++si) {
            const auto t0 = std::chrono::steady_clock::now();
            run_cell(config.strategies[si], a.view(), b.view(), c.view(), config.params,
                     used_threads_for(config.strategies[si]));  // warm-up
            const auto t1 = std::chrono::steady_clock::now();
            warm_min = std::min(warm_min, std::chrono::duration<double>(t1 - t0).count());
        }
        const int batch = static_cast<int>(
            std::min(1000.0, std::max(1.0, std::ceil(0.03 / std::max(warm_min, 1e-9)))));
        for (int r = 0; r < config.repeats; ++r) {
            for (std::size_t si = 0; si < n_strats; ++si) {
                const Strategy s = config.strategies[si];
                zero(c.view());
                const auto t0 = std::chrono::steady_clock::now();
                for (int l = 0; l < batch; ++l)
                    run_cell(s, a.view(), b.view(), c.view(), config.params, used_threads_for(s));
                const auto t1 = std::chrono::steady_clock::now();
                seconds[si].push_back(std::chrono::duration<double>(t1 - t0).count() / batch);
            }
        }

        for (std::size_t si = 0; si < n_strats; ++si) {
            const Strategy s = config.strategies[si];
            std::sort(seconds[si].begin(), seconds[si].end());
            const double med = seconds[si][seconds[si].size() / 2];

            BenchRecord rec;
            rec.strategy = s;
            rec.m = rec.n = rec.k = size;
            rec.ldim_tight = config.ldim_tight;
            rec.ldim = ld;
            rec.threads = used_threads_for(s);
            rec.repeats = config.repeats;
            rec.median_seconds = med;
            rec.gflops = 2.0 * static_cast<double>(size) * static_cast<double>(size) *
                         static_cast<double>(size) / med / 1e9;
            records.push_back(rec);
            if (progress) {
                *progress << to_string(s) << " " << size << " " << rec.gflops << " GFLOPS\n";
                progress->flush();
            }
        }
    }
    return records;
}

void write_csv(const std::vector<BenchRecord>& records, std::ostream& out) {
    if (records.empty()) throw ConfigError("write_csv: no records");
    out << "strategy,m,n,k,ldim,threads,repeats,median_seconds,gflops\n";
    std::ostringstream row;
    row.precision(12);
    for (const auto& r : records) {
        row.str("");
        row << to_string(r.strategy) << ',' << r.m << ',' << r.n << ',' << r.k << ','
            << (r.ldim_tight ? std::string("tight") : std::to_string(r.ldim)) << ',' << r.threads
            << ',' << r.repeats << ',' << r.median_seconds << ',' << r.gflops << '\n';
        out << row.str();
    }
}

void write_csv(const std::vector<BenchRecord>& records, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw ConfigError("write_csv: cannot open '" + path + "'");
    write_csv(records, f);
}

std::string plot_script(const std::vector<BenchRecord>& records, const std::string& csv_path) {
    if (records.empty()) throw ConfigError("plot_script: no records");
    std::vector<Strategy> present;
    for (const auto& r : records)
        if (std::find(present.begin(), present.end(), r.strategy) == present.end())
            present.push_back(r.strategy);

    std::ostringstream out;
    out << "# gnuplot script; regenerate the figure with: gnuplot <this file>\n";
    out << "set datafile separator \",\"\n";
    out << "set xlabel \"m = n = k\"\n";
    out << "set ylabel \"GFLOPS\"\n";
    out << "set key left top\n";
    out << "set term pngcairo size 960,640\n";
    out << "set output \"" << csv_path << ".png\"\n";
    out << "plot";
    bool first = true;
    for (Strategy s : present) {
        if (!first) out << ", \\\n    ";
        else out << " \\\n    ";
        first = false;
        out << "\"< awk -F, 'NR>1 && $1==\\\"" << to_string(s) << "\\\"' " << csv_path
            << "\" using 2:9 with linespoints title \"" << to_string(s) << "\"";
    }
    out << "\n";
    return out.str();
}

void write_plot_script(const std::vector<BenchRecord>& records, const std::string& csv_path,
                       const std::string& script_path) {
    std::ofstream f(script_path);
    if (!f) throw ConfigError("write_plot_script: cannot open '" + script_path + "'");
    f << plot_script(records, csv_path);
}

}  // namespace fipgemm
