// Benchmark front end: sweeps gemm strategies over problem sizes, writes CSV
// (and optionally a gnuplot script), or runs the cache-set mapping analysis.
#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fipgemm/bench.hpp"
#include "fipgemm/parallel.hpp"

namespace {

using fipgemm::index_t;

std::vector<index_t> parse_sizes(const std::string& spec) {
    std::vector<index_t> sizes;
    if (spec.find(':') != std::string::npos) {
        // lo:hi:step range (step optional, default 1)
        std::istringstream ss(spec);
        std::string part;
        std::vector<long long> v;
        while (std::getline(ss, part, ':')) v.push_back(std::stoll(part));
        if (v.size() < 2 || v.size() > 3) throw fipgemm::ConfigError("bad --sizes range: " + spec);
        const long long lo = v[0], hi = v[1], step = v.size() == 3 ? v[2] : 1;
        if (lo < 1 || hi < lo || step < 1) throw fipgemm::ConfigError("bad --sizes range: " + spec);
        for (long long s = lo; s <= hi; s += step) sizes.push_back(static_cast<index_t>(s));
        return sizes;
    }
    std::istringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (part.empty()) continue;
        sizes.push_back(static_cast<index_t>(std::stoll(part)));
    }
    if (sizes.empty()) throw fipgemm::ConfigError("bad --sizes list: " + spec);
    return sizes;
}

std::vector<fipgemm::Strategy> parse_strategies(const std::string& spec) {
    std::vector<fipgemm::Strategy> out;
    std::istringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (part.empty()) continue;
        const auto s = fipgemm::parse_strategy(part);
        if (!s) throw fipgemm::ConfigError("unknown strategy '" + part + "'");
        out.push_back(*s);
    }
    if (out.empty()) throw fipgemm::ConfigError("no strategies in '" + spec + "'");
    return out;
}

int run_set_analysis(const std::vector<index_t>& sizes, bool tight, index_t ldim_value,
                     const fipgemm::BlockingParams& params, index_t ways) {
    fipgemm::CacheModel cache;
    cache.line_bytes = params.line_bytes;
    cache.ways = ways;
    cache.sets = std::max<index_t>(1, params.l1_bytes / (cache.line_bytes * cache.ways));
    std::cout << "# cache model: " << cache.sets << " sets x " << cache.ways << " ways x "
              << cache.line_bytes << "B lines (" << cache.capacity() << " B)\n";
    std::cout << "size,ldim,unpacked_lines,unpacked_imbalance,packed_lines,packed_imbalance\n";
    for (index_t s : sizes) {
        const index_t ld = tight ? s : ldim_value;
        if (ld < s) throw fipgemm::ConfigError("leading dimension smaller than size");
        const index_t kspan = std::min(params.kc, s);
        // One column-major micropanel of A (mr rows, kc columns) as the
        // microkernel would stream it from unpacked memory.
        fipgemm::Matrix a(std::min(params.mr, s), kspan, fipgemm::Layout::col_major, ld);
        const auto unpacked = fipgemm::analyze_set_mapping(a.view(), cache);
        const auto packed = fipgemm::analyze_packed_span(
            static_cast<std::size_t>(std::min(params.mr, s) * kspan * 8), cache);
        std::cout << s << ',' << ld << ',' << unpacked.total_lines() << ',' << unpacked.imbalance()
                  << ',' << packed.total_lines() << ',' << packed.imbalance() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gemm strategy benchmark (conv | sup | fip)"};

    std::string sizes_spec;
    std::string ldim_spec = "tight";
    std::string strategies_spec = "conv,sup,fip";
    int repeats = 5;
    int threads = 0;  // 0: resolve via FIPGEMM_THREADS, default 1
    std::string params_path;
    std::string out_path;
    std::string plot_path;
    bool verify = false;
    bool analyze_sets = false;
    index_t cache_ways = 8;

    app.add_option("--sizes", sizes_spec, "comma list (48,96,...) or range lo:hi:step")->required();
    app.add_option("--ldim", ldim_spec, "'tight' or a fixed leading dimension");
    app.add_option("--strategies", strategies_spec, "subset of conv,sup,fip");
    app.add_option("--repeats", repeats, "timed repetitions per cell (median reported)");
    app.add_option("--threads", threads, "worker count for fip (0 = FIPGEMM_THREADS or 1)");
    app.add_option("--params", params_path, "blocking parameter file (key=value)");
    app.add_option("--out", out_path, "CSV output path (default: stdout)");
    app.add_option("--plot-script", plot_path, "also write a gnuplot script here");
    app.add_flag("--verify", verify, "check every cell against the reference before timing");
    app.add_flag("--analyze-sets", analyze_sets, "cache-set mapping analysis instead of timing");
    app.add_option("--cache-ways", cache_ways, "associativity for --analyze-sets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }

    try {
        fipgemm::SweepConfig cfg;
        cfg.sizes = parse_sizes(sizes_spec);
        cfg.strategies = parse_strategies(strategies_spec);
        if (ldim_spec == "tight") {
            cfg.ldim_tight = true;
        } else {
            cfg.ldim_tight = false;
            cfg.ldim_value = static_cast<index_t>(std::stoll(ldim_spec));
        }
        cfg.repeats = repeats;
        cfg.threads = fipgemm::resolve_thread_count(threads);
        cfg.verify_all = verify;
        if (!params_path.empty()) cfg.params = fipgemm::load_params(params_path);
        for (const auto& w : cfg.params.warnings()) std::cerr << "warning: " << w << "\n";

        if (analyze_sets)
            return run_set_analysis(cfg.sizes, cfg.ldim_tight, cfg.ldim_value, cfg.params,
                                    cache_ways);

        const auto records = fipgemm::run_sweep(cfg, &std::cerr);
        if (out_path.empty()) {
            fipgemm::write_csv(records, std::cout);
        } else {
            fipgemm::write_csv(records, out_path);
            std::cerr << "# wrote " << out_path << "\n";
        }
        if (!plot_path.empty()) {
            fipgemm::write_plot_script(records, out_path.empty() ? "results.csv" : out_path,
                                       plot_path);
            std::cerr << "# wrote " << plot_path << "\n";
        }
        return 0;
    } catch (const fipgemm::VerifyError& e) {
        std::cerr << "verification failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }
}
