#include "fipgemm/driver.hpp"

#include <stdexcept>

namespace fipgemm {

const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::conventional: return "conv";
        case Strategy::sup: return "sup";
        case Strategy::fip: return "fip";
    }
    return "?";
}

std::optional<Strategy> parse_strategy(const std::string& name) {
    if (name == "conv" || name == "conventional") return Strategy::conventional;
    if (name == "sup") return Strategy::sup;
    if (name == "fip") return Strategy::fip;
    return std::nullopt;
}

FipCallPlan fip_variant_schedule(bool i3_first, bool i2_first, bool i1_first,
                                 PackingDecision decision) {
    FipCallPlan plan;
    const bool a_packed = decision.pack_a && !i2_first;
    const bool b_packed = decision.pack_b && !(i3_first && i1_first);
    plan.variant.a_state = a_packed ? OperandState::packed : OperandState::unpacked;
    plan.variant.b_state = b_packed ? OperandState::packed : OperandState::unpacked;
    plan.store_a = decision.pack_a && i2_first;
    plan.store_b = decision.pack_b && i3_first && i1_first;
    return plan;
}

namespace detail {

namespace {

index_t round_up(index_t v, index_t unit) { return ((v + unit - 1) / unit) * unit; }

}  // namespace

GemmPlan::GemmPlan(Strategy strategy, const MatrixView& a, const MatrixView& b, MatrixView c,
                   const BlockingParams& params, double alpha, AccessCounters* counters)
    : strategy_(strategy), a_(a), b_(b), c_(c), params_(params), alpha_(alpha),
      counters_(counters) {
    decision_ = decide_packing(c.rows, c.cols, a, params);
    ensure_buffers();
}

void GemmPlan::ensure_buffers() {
    // One allocation per packed operand for the whole call; panel passes
    // reshape in place. The fused path skips buffers the decision ruled out.
    const bool want_a = strategy_ == Strategy::conventional ||
                        (strategy_ == Strategy::fip && decision_.pack_a);
    const bool want_b = strategy_ == Strategy::conventional ||
                        (strategy_ == Strategy::fip && decision_.pack_b);
    const index_t m_cap = std::min(params_.mc, round_up(std::max<index_t>(c_.rows, 1), params_.mr));
    const index_t n_cap = std::min(params_.nc, round_up(std::max<index_t>(c_.cols, 1), params_.nr));
    const index_t k_cap = std::min(params_.kc, std::max<index_t>(a_.cols, 1));
    if (want_a && !a_tilde_) a_tilde_.emplace(params_, m_cap, k_cap);
    if (want_b && !b_tilde_) b_tilde_.emplace(params_, n_cap, k_cap);
}

PackedBlockA& GemmPlan::a_buffer() {
    if (!a_tilde_) throw std::logic_error("GemmPlan: strategy keeps no packed A");
    return *a_tilde_;
}

PackedPanelB& GemmPlan::b_buffer() {
    if (!b_tilde_) throw std::logic_error("GemmPlan: strategy keeps no packed B");
    return *b_tilde_;
}

void GemmPlan::run() {
    const index_t n = c_.cols, k = a_.cols;
    for (index_t jc = 0; jc < n; jc += params_.nc)      // 5th loop
        for (index_t pc = 0; pc < k; pc += params_.kc)  // 4th loop
            run_panel_pass(jc, pc);
}

void GemmPlan::run_panel_pass(index_t jc, index_t pc) {
    const index_t nc_eff = std::min(params_.nc, c_.cols - jc);
    const index_t kc_eff = std::min(params_.kc, a_.cols - pc);
    switch (strategy_) {
        case Strategy::conventional: pass_conventional(jc, pc, nc_eff, kc_eff); break;
        case Strategy::sup: pass_sup(jc, pc, nc_eff, kc_eff); break;
        case Strategy::fip: pass_fip(jc, pc, nc_eff, kc_eff); break;
    }
}

void GemmPlan::pass_conventional(index_t jc, index_t pc, index_t nc_eff, index_t kc_eff) {
    const index_t m = c_.rows;
    pack_panel_b(b_.block(pc, jc, kc_eff, nc_eff), params_, *b_tilde_, counters_);
    for (index_t ic = 0; ic < m; ic += params_.mc) {  // 3rd loop
        const index_t mc_eff = std::min(params_.mc, m - ic);
        pack_block_a(a_.block(ic, pc, mc_eff, kc_eff), params_, *a_tilde_, counters_);
        const index_t nq = (nc_eff + params_.nr - 1) / params_.nr;
        const index_t np = (mc_eff + params_.mr - 1) / params_.mr;
        for (index_t q = 0; q < nq; ++q) {  // 2nd loop
            const index_t ne = std::min(params_.nr, nc_eff - q * params_.nr);
            for (index_t pnl = 0; pnl < np; ++pnl) {  // 1st loop
                const index_t me = std::min(params_.mr, mc_eff - pnl * params_.mr);
                run_microtile(params_, OperandSource::from_packed(a_tilde_->panel(pnl)),
                              OperandSource::from_packed(b_tilde_->panel(q)),
                              c_.block(ic + pnl * params_.mr, jc + q * params_.nr, me, ne), kc_eff,
                              alpha_, counters_);
            }
            if (on_loop2_done) on_loop2_done(ic, q);
        }
        if (on_block_done) on_block_done(ic);
        if (count_rendezvous && counters_) ++counters_->barrier_count;
    }
}

void GemmPlan::pass_sup(index_t jc, index_t pc, index_t nc_eff, index_t kc_eff) {
    const index_t m = c_.rows;
    for (index_t ic = 0; ic < m; ic += params_.mc) {
        const index_t mc_eff = std::min(params_.mc, m - ic);
        const MatrixView a_block = a_.block(ic, pc, mc_eff, kc_eff);
        const index_t nq = (nc_eff + params_.nr - 1) / params_.nr;
        for (index_t q = 0; q < nq; ++q) {
            const index_t ne = std::min(params_.nr, nc_eff - q * params_.nr);
            // 1st loop lives inside the millikernel
            run_millikernel(params_, a_block, b_.block(pc, jc + q * params_.nr, kc_eff, ne),
                            c_.block(ic, jc + q * params_.nr, mc_eff, ne), alpha_, counters_);
        }
    }
}

void GemmPlan::pass_fip(index_t jc, index_t pc, index_t nc_eff, index_t kc_eff) {
    const index_t m = c_.rows;
    if (decision_.pack_b) b_tilde_->reset(nc_eff, kc_eff);
    bool i3_first = true;
    for (index_t ic = 0; ic < m; ic += params_.mc) {  // 3rd loop
        const index_t mc_eff = std::min(params_.mc, m - ic);
        if (decision_.pack_a) a_tilde_->reset(mc_eff, kc_eff);
        const index_t nq = (nc_eff + params_.nr - 1) / params_.nr;
        const index_t np = (mc_eff + params_.mr - 1) / params_.mr;
        for (index_t q = 0; q < nq; ++q) {  // 2nd loop
            const index_t ne = std::min(params_.nr, nc_eff - q * params_.nr);
            for (index_t pnl = 0; pnl < np; ++pnl) {  // 1st loop
                const index_t me = std::min(params_.mr, mc_eff - pnl * params_.mr);
                const FipCallPlan plan = fip_variant_schedule(i3_first, q == 0, pnl == 0, decision_);

                OperandSource a_src;
                if (plan.variant.a_state == OperandState::packed) {
                    if (counters_ && !a_tilde_->valid(pnl))
                        throw std::logic_error("fip: packed A panel consumed before it was written");
                    a_src = OperandSource::from_packed(a_tilde_->panel(pnl));
                } else {
                    const MatrixView a_mp = a_.block(ic + pnl * params_.mr, pc, me, kc_eff);
                    a_src = plan.store_a ? OperandSource::from_view_fusing(
                                               a_mp, a_tilde_->panel(pnl), a_tilde_->valid_flag(pnl))
                                         : OperandSource::from_view(a_mp);
                }

                OperandSource b_src;
                if (plan.variant.b_state == OperandState::packed) {
                    if (counters_ && !b_tilde_->valid(q))
                        throw std::logic_error("fip: packed B panel consumed before it was written");
                    b_src = OperandSource::from_packed(b_tilde_->panel(q));
                } else {
                    const MatrixView b_mp = b_.block(pc, jc + q * params_.nr, kc_eff, ne);
                    b_src = plan.store_b ? OperandSource::from_view_fusing(
                                               b_mp, b_tilde_->panel(q), b_tilde_->valid_flag(q))
                                         : OperandSource::from_view(b_mp);
                }

                run_microtile(params_, a_src, b_src,
                              c_.block(ic + pnl * params_.mr, jc + q * params_.nr, me, ne), kc_eff,
                              alpha_, counters_);
            }
            if (on_loop2_done) on_loop2_done(ic, q);
        }
        if (on_block_done) on_block_done(ic);
        if (count_rendezvous && counters_) ++counters_->barrier_count;
        i3_first = false;
    }
}

}  // namespace detail

void gemm(Strategy strategy, double alpha, const MatrixView& a, const MatrixView& b, double beta,
          MatrixView c, const BlockingParams& params, AccessCounters* counters) {
    if (a.rows != c.rows || b.cols != c.cols || a.cols != b.rows)
        throw std::invalid_argument("gemm: dimension mismatch");
    params.validate();

    if (beta == 0.0) {
        for (index_t j = 0; j < c.cols; ++j)
            for (index_t i = 0; i < c.rows; ++i) c.at(i, j) = 0.0;
    } else if (beta != 1.0) {
        for (index_t j = 0; j < c.cols; ++j)
            for (index_t i = 0; i < c.rows; ++i) c.at(i, j) *= beta;
    }
    if (c.rows == 0 || c.cols == 0 || a.cols == 0 || alpha == 0.0) return;

    detail::GemmPlan plan(strategy, a, b, c, params, alpha, counters);
    plan.run();
}

void gemm(Strategy strategy, const MatrixView& a, const MatrixView& b, MatrixView c,
          const BlockingParams& params, AccessCounters* counters) {
    gemm(strategy, 1.0, a, b, 1.0, c, params, counters);
}

void sup_gemm_path(const MatrixView& a, const MatrixView& b, MatrixView c,
                   const BlockingParams& params, AccessCounters* counters) {
    gemm(Strategy::sup, 1.0, a, b, 1.0, c, params, counters);
}

}  // namespace fipgemm
