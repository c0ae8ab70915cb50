#include "fipgemm/parallel.hpp"

#include <barrier>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <thread>

#include "fipgemm/pack.hpp"

namespace fipgemm {

namespace {

index_t ceil_div(index_t a, index_t b) { return (a + b - 1) / b; }
index_t round_up(index_t v, index_t unit) { return ceil_div(v, unit) * unit; }

// One 3rd-loop block of one depth-panel pass.
struct Block {
    index_t jc, pc, ic;
    index_t nc_eff, kc_eff, mc_eff;
    bool i3_first;  // first 3rd-loop iteration of its pass
    int parity;     // which of the two shared A buffers this block packs into
};

}  // namespace

int resolve_thread_count(int requested) {
    if (requested >= 1) return requested;
    if (const char* env = std::getenv(kThreadsEnvVar)) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end && *end == '\0' && v >= 1) return static_cast<int>(v);
    }
    return 1;
}

ThreadPlan make_thread_plan(index_t panel_count, int n_thr) {
    if (n_thr < 1) throw std::invalid_argument("make_thread_plan: n_thr < 1");
    ThreadPlan plan;
    plan.n_thr = n_thr;
    plan.start_offsets.resize(static_cast<std::size_t>(n_thr));
    plan.panel_counts.resize(static_cast<std::size_t>(n_thr));
    const index_t base = panel_count / n_thr;
    const index_t rem = panel_count % n_thr;
    index_t off = 0;
    for (int w = 0; w < n_thr; ++w) {
        const index_t cnt = base + (w < rem ? 1 : 0);
        plan.start_offsets[static_cast<std::size_t>(w)] = off;
        plan.panel_counts[static_cast<std::size_t>(w)] = cnt;
        off += cnt;
    }
    return plan;
}

void parallel_gemm_fip(const MatrixView& a, const MatrixView& b, MatrixView c,
                       const BlockingParams& params, int n_thr, AccessCounters* counters) {
    parallel_gemm_fip(1.0, a, b, 1.0, c, params, n_thr, counters);
}

void parallel_gemm_fip(double alpha, const MatrixView& a, const MatrixView& b, double beta,
                       MatrixView c, const BlockingParams& params, int n_thr,
                       AccessCounters* counters) {
    if (n_thr < 1) throw std::invalid_argument("parallel_gemm_fip: n_thr < 1");
    if (a.rows != c.rows || b.cols != c.cols || a.cols != b.rows)
        throw std::invalid_argument("parallel_gemm_fip: dimension mismatch");
    params.validate();

    if (beta == 0.0) {
        for (index_t j = 0; j < c.cols; ++j)
            for (index_t i = 0; i < c.rows; ++i) c.at(i, j) = 0.0;
    } else if (beta != 1.0) {
        for (index_t j = 0; j < c.cols; ++j)
            for (index_t i = 0; i < c.rows; ++i) c.at(i, j) *= beta;
    }
    if (c.rows == 0 || c.cols == 0 || a.cols == 0 || alpha == 0.0) return;

    if (n_thr == 1) {
        // Degenerate threading: the sequential fused schedule, with the
        // per-block rendezvous still accounted for.
        detail::GemmPlan plan(Strategy::fip, a, b, c, params, alpha, counters);
        plan.count_rendezvous = true;
        plan.run();
        return;
    }

    const index_t m = c.rows, n = c.cols, k = a.cols;
    const index_t mr = params.mr, nr = params.nr;
    const PackingDecision decision = decide_packing(m, n, a, params);

    std::vector<Block> blocks;
    for (index_t jc = 0; jc < n; jc += params.nc) {
        const index_t nc_eff = std::min(params.nc, n - jc);
        for (index_t pc = 0; pc < k; pc += params.kc) {
            const index_t kc_eff = std::min(params.kc, k - pc);
            bool first = true;
            for (index_t ic = 0; ic < m; ic += params.mc) {
                Block blk{jc, pc, ic, nc_eff, kc_eff, std::min(params.mc, m - ic), first,
                          static_cast<int>(blocks.size() % 2)};
                blocks.push_back(blk);
                first = false;
            }
        }
    }

    // Two shared A buffers, alternated per block: a worker may run one block
    // ahead of a peer that is still reading the previous block's packed
    // panels, so consecutive blocks must not share storage. The buffer for
    // block i+1 is re-armed inside the barrier of block i, while every
    // worker is parked.
    const index_t m_cap = std::min(params.mc, round_up(m, mr));
    const index_t k_cap = std::min(params.kc, k);
    std::optional<PackedBlockA> a_buf[2];
    if (decision.pack_a) {
        a_buf[0].emplace(params, m_cap, k_cap);
        a_buf[1].emplace(params, m_cap, k_cap);
    }

    // Worker-private packed B space sized for the largest per-worker share.
    const index_t nq_max = ceil_div(std::min(params.nc, round_up(n, nr)), nr);
    const index_t share_cap = ceil_div(nq_max, n_thr);
    std::vector<PackedPanelB> b_private;
    if (decision.pack_b) {
        b_private.reserve(static_cast<std::size_t>(n_thr));
        for (int w = 0; w < n_thr; ++w) b_private.emplace_back(params, share_cap * nr, k_cap);
    }

    std::uint64_t barrier_events = 0;
    std::size_t phase = 0;
    auto completion = [&]() noexcept {
        ++barrier_events;
        const std::size_t next = phase + 1;
        if (decision.pack_a && next < blocks.size())
            a_buf[blocks[next].parity]->reset(blocks[next].mc_eff, blocks[next].kc_eff);
        phase = next;
    };
    if (decision.pack_a && !blocks.empty())
        a_buf[blocks.front().parity]->reset(blocks.front().mc_eff, blocks.front().kc_eff);

    std::barrier bar(n_thr, completion);

    std::vector<AccessCounters> wcounters(static_cast<std::size_t>(n_thr));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_thr));

    auto worker = [&](int w) {
        AccessCounters* wctr = counters ? &wcounters[static_cast<std::size_t>(w)] : nullptr;
        try {
            for (const Block& blk : blocks) {
                PackedBlockA* at = decision.pack_a ? &*a_buf[blk.parity] : nullptr;

                const index_t nq = ceil_div(blk.nc_eff, nr);
                const ThreadPlan qplan = make_thread_plan(nq, n_thr);
                const index_t q_lo = qplan.start_offsets[static_cast<std::size_t>(w)];
                const index_t q_cnt = qplan.panel_counts[static_cast<std::size_t>(w)];

                PackedPanelB* bt = decision.pack_b && q_cnt > 0
                                       ? &b_private[static_cast<std::size_t>(w)]
                                       : nullptr;
                if (bt && blk.i3_first) {
                    const index_t lo_col = q_lo * nr;
                    const index_t hi_col = std::min((q_lo + q_cnt) * nr, blk.nc_eff);
                    bt->reset(hi_col - lo_col, blk.kc_eff);
                }

                const index_t np = ceil_div(blk.mc_eff, mr);
                const ThreadPlan aplan = make_thread_plan(np, n_thr);
                const index_t p0 = aplan.start_offsets[static_cast<std::size_t>(w)];
                const index_t own = aplan.panel_counts[static_cast<std::size_t>(w)];

                auto b_source = [&](index_t q, bool first_call, index_t ne) {
                    if (!decision.pack_b)
                        return OperandSource::from_view(
                            b.block(blk.pc, blk.jc + q * nr, blk.kc_eff, ne));
                    const index_t lq = q - q_lo;
                    if (blk.i3_first && first_call)
                        return OperandSource::from_view_fusing(
                            b.block(blk.pc, blk.jc + q * nr, blk.kc_eff, ne), bt->panel(lq),
                            bt->valid_flag(lq));
                    if (wctr && !bt->valid(lq))
                        throw std::logic_error("parallel fip: packed B panel read before write");
                    return OperandSource::from_packed(bt->panel(lq));
                };

                bool rendezvous_done = false;
                auto rendezvous = [&] {
                    bar.arrive_and_wait();
                    rendezvous_done = true;
                };

                if (q_cnt == 0) {
                    // Nothing of the 2nd loop to compute here; contribute the
                    // assigned share of the packing, then meet the others.
                    if (decision.pack_a) {
                        for (index_t p = p0; p < p0 + own; ++p) {
                            const index_t me = std::min(mr, blk.mc_eff - p * mr);
                            pack_a_micropanel(a.block(blk.ic + p * mr, blk.pc, me, blk.kc_eff),
                                              at->panel(p), mr, wctr);
                            at->mark_valid(p);
                        }
                    }
                    rendezvous();
                    continue;
                }

                // First 2nd-loop iteration on this block: 1st loop rotated to
                // start at this worker's own micropanels, packing them in
                // flight; one rendezvous once the share is done, after which
                // every panel of the block may be read.
                {
                    const index_t q = q_lo;
                    const index_t ne = std::min(nr, blk.nc_eff - q * nr);
                    for (index_t t = 0; t < np; ++t) {
                        if (decision.pack_a && !rendezvous_done && t == own) rendezvous();
                        const index_t p = (p0 + t) % np;
                        const index_t me = std::min(mr, blk.mc_eff - p * mr);

                        OperandSource a_src;
                        if (decision.pack_a) {
                            if (t < own) {
                                a_src = OperandSource::from_view_fusing(
                                    a.block(blk.ic + p * mr, blk.pc, me, blk.kc_eff), at->panel(p),
                                    at->valid_flag(p));
                            } else {
                                if (wctr && !at->valid(p))
                                    throw std::logic_error(
                                        "parallel fip: packed A panel read before rendezvous");
                                a_src = OperandSource::from_packed(at->panel(p));
                            }
                        } else {
                            a_src = OperandSource::from_view(
                                a.block(blk.ic + p * mr, blk.pc, me, blk.kc_eff));
                        }

                        detail::run_microtile(params, a_src, b_source(q, t == 0, ne),
                                              c.block(blk.ic + p * mr, blk.jc + q * nr, me, ne),
                                              blk.kc_eff, alpha, wctr);
                    }
                    if (!rendezvous_done) rendezvous();
                }

                // Remaining 2nd-loop iterations: natural order, packed A.
                for (index_t q = q_lo + 1; q < q_lo + q_cnt; ++q) {
                    const index_t ne = std::min(nr, blk.nc_eff - q * nr);
                    for (index_t p = 0; p < np; ++p) {
                        const index_t me = std::min(mr, blk.mc_eff - p * mr);
                        OperandSource a_src;
                        if (decision.pack_a) {
                            if (wctr && !at->valid(p))
                                throw std::logic_error(
                                    "parallel fip: packed A panel read before rendezvous");
                            a_src = OperandSource::from_packed(at->panel(p));
                        } else {
                            a_src = OperandSource::from_view(
                                a.block(blk.ic + p * mr, blk.pc, me, blk.kc_eff));
                        }
                        detail::run_microtile(params, a_src, b_source(q, p == 0, ne),
                                              c.block(blk.ic + p * mr, blk.jc + q * nr, me, ne),
                                              blk.kc_eff, alpha, wctr);
                    }
                }
            }
        } catch (...) {
            errors[static_cast<std::size_t>(w)] = std::current_exception();
            bar.arrive_and_drop();  // keep the others from deadlocking
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_thr - 1));
    for (int w = 1; w < n_thr; ++w) pool.emplace_back(worker, w);
    worker(0);
    for (auto& t : pool) t.join();

    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    if (counters) {
        for (const auto& wc : wcounters) counters->add(wc);
        counters->barrier_count += barrier_events;
    }
}

}  // namespace fipgemm
