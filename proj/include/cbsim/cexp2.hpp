#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "cbsim/matrix.hpp"
#include "cbsim/model.hpp"
#include "cbsim/sim.hpp"

namespace cbsim {

// Builds the policy CExp2 hands the remaining horizon to when the switch
// test fails. The default is the phased-elimination policy.
using FallbackFactory = std::function<std::unique_ptr<Policy>()>;

// Entrywise clamp of gap estimates onto [1/log log T, log log T]. Requires
// T >= 16 so the interval is nonempty and ordered.
Matrix project_gaps(const Matrix& raw, long horizon);

// ceil(sqrt(log T)) pulls per (arm, agent) in the initial exploration phase.
long initial_pulls_per_arm(long horizon);

// Integer pull targets for the guided exploration phase:
// max(tau_1, ceil(18 * q(k, m) * B(T))) with q the relaxed-program allocation
// for the projected gaps.
Matrix guided_allocation(const Matrix& projected_gaps, const WeightMatrix& weights, long horizon,
                         double sigma = 1.0);

// True iff every radius is strictly below half its estimated gap.
bool switch_condition(const Matrix& gap_estimates, const Matrix& omega_values);

// Double-exploration policy: round-robin initial exploration, oracle-guided
// exploration, then either a committed exploit phase or a switch to the
// phased-elimination fallback. Communicates exactly twice unless it switches.
class CExp2Policy : public Policy {
public:
    CExp2Policy(int arms, int agents, WeightMatrix weights, double sigma, long horizon,
                FallbackFactory fallback = {});
    ~CExp2Policy() override;

    void begin(TraceHooks* hooks) override;
    int choose_arm(int agent, long round) override;
    void observe(int agent, int arm, double reward, long round) override;
    void end_round(long round) override;
    std::optional<std::vector<int>> committed_arms() const override;
    void finish(long last_round) override;
    std::vector<int> final_arms() const override;
    bool horizon_exhausted_mid_phase() const override;
    int elimination_phases() const override;

    // Introspection (tests, diagnostics).
    Phase phase() const { return phase_; }
    long tau1() const { return tau1_; }
    const Matrix& guided_targets() const { return targets_; }
    const Matrix& projected_gaps_used() const { return projected_; }
    const Matrix& gap_estimates_initial() const { return gaps_ie_; }
    const Matrix& gap_estimates_guided() const { return gaps_ge_; }
    const Matrix& pull_counts() const { return counts_; }
    bool switch_condition_value() const { return cond_c_; }
    long guided_end_round() const { return t_ge_; }

private:
    Matrix mixed_estimates() const;
    void communicate_initial(long round);
    void communicate_guided(long round);

    int arms_;
    int agents_;
    WeightMatrix weights_;
    double sigma_;
    long horizon_;
    FallbackFactory make_fallback_;
    long tau1_;

    Phase phase_ = Phase::InitialExploration;
    TraceHooks* hooks_ = nullptr;

    Matrix counts_;  // local pull counts tau(k, m)
    Matrix sums_;    // summed local rewards

    std::vector<int> best_ie_;  // empirical best after the first communication
    Matrix gaps_ie_;
    Matrix projected_;
    Matrix targets_;  // guided pull targets

    Matrix gaps_ge_;
    std::vector<int> commit_;
    bool cond_c_ = false;
    long t_ge_ = -1;

    std::unique_ptr<Policy> fallback_;
};

}  // namespace cbsim
