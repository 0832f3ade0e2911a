#include "cbsim/wcpe.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "cbsim/confidence.hpp"
#include "cbsim/oracle.hpp"

namespace cbsim {

WcpePolicy::WcpePolicy(int arms, int agents, WeightMatrix weights, double sigma, long horizon)
    : arms_(arms),
      agents_(agents),
      weights_(std::move(weights)),
      sigma_(sigma),
      horizon_(horizon),
      budget_(horizon_bound(arms, agents, horizon, sigma)),
      active_(agents, std::vector<char>(arms, 1)),
      counts_(arms, agents, 0.0),
      sums_(arms, agents, 0.0),
      targets_(arms, agents, 0.0) {
    if (arms < 1) throw std::invalid_argument("wcpe: need at least one arm");
    if (arms == 1) {
        commit_.assign(agents_, 0);
        committed_ = true;
    }
}

void WcpePolicy::begin(TraceHooks* hooks) {
    hooks_ = hooks;
    if (committed_) return;
    phase_index_ = 1;
    eps_ = 1.0;
    start_phase(0);
}

int WcpePolicy::active_count(int agent) const {
    int n = 0;
    for (int k = 0; k < arms_; ++k) n += active_[agent][k] ? 1 : 0;
    return n;
}

Matrix WcpePolicy::mixed_estimates() const {
    Matrix est(arms_, agents_);
    for (int k = 0; k < arms_; ++k)
        for (int m = 0; m < agents_; ++m) {
            double acc = 0.0;
            for (int n = 0; n < agents_; ++n) {
                const double w = weights_(n, m);
                if (w != 0.0 && counts_(k, n) > 0.0) acc += w * sums_(k, n) / counts_(k, n);
            }
            est(k, m) = acc;
        }
    return est;
}

std::vector<int> WcpePolicy::empirical_best_active() const {
    const Matrix mixed = mixed_estimates();
    std::vector<int> best(agents_, 0);
    for (int m = 0; m < agents_; ++m) {
        int b = -1;
        for (int k = 0; k < arms_; ++k) {
            if (!active_[m][k]) continue;
            if (b < 0 || mixed(k, m) > mixed(b, m)) b = k;
        }
        best[m] = b < 0 ? 0 : b;
    }
    return best;
}

void WcpePolicy::start_phase(long round) {
    (void)round;
    // Surrogate gaps: the phase precision everywhere in phase one (no
    // estimates exist yet), afterwards max(estimate, eps_r).
    Matrix surrogate(arms_, agents_, eps_);
    if (have_estimates_)
        for (int k = 0; k < arms_; ++k)
            for (int m = 0; m < agents_; ++m)
                surrogate(k, m) = std::max(gap_est_(k, m), eps_);

    Mask cmask(arms_, agents_, false);
    for (int m = 0; m < agents_; ++m)
        for (int k = 0; k < arms_; ++k)
            if (active_[m][k]) cmask.set(k, m, true);
    const Mask vmask(arms_, agents_, true);
    const oracle::OracleResult q =
        oracle::solve_allocation(surrogate, surrogate, weights_, cmask, vmask);

    for (int k = 0; k < arms_; ++k)
        for (int m = 0; m < agents_; ++m) {
            double target = counts_(k, m);
            if (q.allocation(k, m) > 0.0)
                target = std::max(target, std::ceil(8.0 * q.allocation(k, m) * budget_));
            if (phase_index_ == 1) target = std::max(target, 1.0);
            targets_(k, m) = target;
        }
}

int WcpePolicy::choose_arm(int agent, long round) {
    (void)round;
    if (committed_) return commit_[agent];
    for (int k = 0; k < arms_; ++k)
        if (counts_(k, agent) < targets_(k, agent)) return k;
    // Finished this phase's quota early: play the empirical best active arm
    // (lowest active index before any communication).
    if (!have_estimates_) {
        for (int k = 0; k < arms_; ++k)
            if (active_[agent][k]) return k;
        return 0;
    }
    const Matrix mixed = mixed_estimates();
    int best = -1;
    for (int k = 0; k < arms_; ++k) {
        if (!active_[agent][k]) continue;
        if (best < 0 || mixed(k, agent) > mixed(best, agent)) best = k;
    }
    return best < 0 ? 0 : best;
}

void WcpePolicy::observe(int agent, int arm, double reward, long round) {
    (void)round;
    counts_(arm, agent) += 1.0;
    sums_(arm, agent) += reward;
}

void WcpePolicy::finish_phase(long round) {
    if (hooks_) hooks_->on_communication(round, 2 * static_cast<std::size_t>(arms_) * agents_);
    ++completed_phases_;
    const Matrix mixed = mixed_estimates();
    const GapEstimate est = estimate_gaps(mixed);
    gap_est_ = est.gaps;
    have_estimates_ = true;

    // Elimination by non-overlapping confidence intervals at delta = 1/T.
    const ConfidenceParams params{arms_, agents_, 1.0 / static_cast<double>(horizon_), sigma_};
    Matrix omegas(arms_, agents_);
    for (int k = 0; k < arms_; ++k) {
        const double b = beta(counts_.row(k), params);
        for (int m = 0; m < agents_; ++m)
            omegas(k, m) = omega_with_beta(b, counts_.row(k), weights_, m);
    }
    for (int m = 0; m < agents_; ++m) {
        double best_lower = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < arms_; ++k)
            if (active_[m][k])
                best_lower = std::max(best_lower, mixed(k, m) - omegas(k, m));
        for (int k = 0; k < arms_; ++k)
            if (active_[m][k] && mixed(k, m) + omegas(k, m) < best_lower) active_[m][k] = 0;
        if (active_count(m) == 0)
            throw std::logic_error("wcpe: elimination emptied an agent's active set");
    }

    bool all_single = true;
    for (int m = 0; m < agents_; ++m)
        if (active_count(m) != 1) all_single = false;
    if (all_single) {
        commit_.resize(agents_);
        for (int m = 0; m < agents_; ++m)
            for (int k = 0; k < arms_; ++k)
                if (active_[m][k]) commit_[m] = k;
        committed_ = true;
        return;
    }
    ++phase_index_;
    eps_ /= 2.0;
    start_phase(round);
}

void WcpePolicy::end_round(long round) {
    if (committed_) return;
    for (int k = 0; k < arms_; ++k)
        for (int m = 0; m < agents_; ++m)
            if (counts_(k, m) < targets_(k, m)) return;
    finish_phase(round);
}

std::optional<std::vector<int>> WcpePolicy::committed_arms() const {
    if (committed_) return commit_;
    return std::nullopt;
}

void WcpePolicy::finish(long last_round) {
    (void)last_round;
    if (committed_) return;
    // Horizon exhausted mid-identification: commit to the empirical best
    // among the surviving arms, flagged in the trace.
    exhausted_ = true;
    commit_ = empirical_best_active();
    committed_ = true;
}

std::vector<int> WcpePolicy::final_arms() const {
    if (committed_) return commit_;
    return {};
}

bool WcpePolicy::horizon_exhausted_mid_phase() const { return exhausted_; }

}  // namespace cbsim
