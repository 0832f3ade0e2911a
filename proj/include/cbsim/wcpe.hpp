#pragma once

#include <vector>

#include "cbsim/matrix.hpp"
#include "cbsim/model.hpp"
#include "cbsim/sim.hpp"

namespace cbsim {

// Phased elimination run at confidence 1/T, adapted to regret minimization:
// each phase samples to an oracle allocation built from surrogate gaps
// max(estimate, eps_r) with eps_r = 2^(1-r), communicates once, and removes
// arms whose upper confidence bound falls below the best lower bound. Agents
// commit to the survivors.
class WcpePolicy : public Policy {
public:
    WcpePolicy(int arms, int agents, WeightMatrix weights, double sigma, long horizon);

    void begin(TraceHooks* hooks) override;
    int choose_arm(int agent, long round) override;
    void observe(int agent, int arm, double reward, long round) override;
    void end_round(long round) override;
    std::optional<std::vector<int>> committed_arms() const override;
    void finish(long last_round) override;
    std::vector<int> final_arms() const override;
    bool horizon_exhausted_mid_phase() const override;
    int elimination_phases() const override { return completed_phases_; }

    // Introspection (tests, diagnostics).
    int phase_index() const { return phase_index_; }
    double phase_precision() const { return eps_; }
    bool arm_active(int arm, int agent) const { return active_[agent][arm] != 0; }
    int active_count(int agent) const;
    const Matrix& pull_counts() const { return counts_; }
    bool committed() const { return committed_; }

private:
    void start_phase(long round);
    void finish_phase(long round);
    Matrix mixed_estimates() const;
    std::vector<int> empirical_best_active() const;

    int arms_;
    int agents_;
    WeightMatrix weights_;
    double sigma_;
    long horizon_;
    double budget_;  // confidence threshold bound at delta = 1/T

    TraceHooks* hooks_ = nullptr;

    int phase_index_ = 0;      // 1-based once running
    int completed_phases_ = 0;
    double eps_ = 1.0;

    std::vector<std::vector<char>> active_;  // active_[agent][arm]
    Matrix counts_;
    Matrix sums_;
    Matrix targets_;
    Matrix gap_est_;  // tilde-style estimates from the latest communication
    bool have_estimates_ = false;

    std::vector<int> commit_;
    bool committed_ = false;
    bool exhausted_ = false;
};

}  // namespace cbsim
