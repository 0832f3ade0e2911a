#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cbsim/matrix.hpp"
#include "cbsim/model.hpp"

namespace cbsim {

// Simulated world. Rewards are pure functions of (seed, agent, arm, round):
// the draw an agent would see at round t never depends on what any policy
// did before.
struct Environment {
    BanditInstance instance;
    std::uint64_t seed = 0;

    double sample(int arm, int agent, long round) const;
};

enum class Phase { InitialExploration, GuidedExploration, Exploit, Fallback };

std::string phase_name(Phase phase);

struct PhaseMark {
    Phase phase;
    long round;  // first round of the phase
};

struct CommEvent {
    long round;
    std::size_t payload_doubles;
};

// Callbacks a policy uses to report observable protocol events to the trace.
class TraceHooks {
public:
    virtual ~TraceHooks() = default;
    virtual void on_communication(long round, std::size_t payload_doubles) = 0;
    virtual void on_phase(Phase phase, long first_round) = 0;
    virtual void on_switch_decision(bool condition_holds, long round) = 0;
};

// A per-run sequential policy. The simulator calls choose_arm once per agent
// per round, then observe with the sampled reward, then end_round.
class Policy {
public:
    virtual ~Policy() = default;
    virtual void begin(TraceHooks* hooks) = 0;
    virtual int choose_arm(int agent, long round) = 0;
    virtual void observe(int agent, int arm, double reward, long round) = 0;
    virtual void end_round(long round) = 0;
    // Non-empty once every agent plays one fixed arm forever with no further
    // internal state changes; lets the simulator account the tail in closed
    // form.
    virtual std::optional<std::vector<int>> committed_arms() const { return std::nullopt; }
    virtual void finish(long last_round) { (void)last_round; }
    virtual std::vector<int> final_arms() const { return {}; }
    virtual bool horizon_exhausted_mid_phase() const { return false; }
    virtual int elimination_phases() const { return 0; }
};

struct RunOptions {
    bool full_events = false;    // evaluate diagnostic events every round
    bool record_rounds = false;  // keep one trace row per (round, agent)
    int event_grid = 100;        // rounds at which diagnostics are sampled
    double f_event_delta = 0.0;  // confidence level of the generic event; 0 -> 1/T
};

struct TraceRow {
    long round;
    int agent;  // 1-based in exports
    int arm;    // 1-based in exports
    double cumulative_regret;
};

struct RunTrace {
    std::string algorithm;
    std::uint64_t seed = 0;
    int arms = 0;
    int agents = 0;
    long horizon = 0;
    double sigma = 1.0;

    std::vector<TraceRow> rows;  // per-round at full granularity, else grid rounds
    std::vector<long> grid_rounds;
    std::vector<double> grid_regret;
    double final_regret = 0.0;

    std::vector<PhaseMark> phase_marks;
    std::vector<CommEvent> comm_events;
    std::vector<int> final_arms;    // 0-based, -1 unknown
    std::vector<int> optimal_arms;  // ground truth, for aggregation
    Matrix pull_counts;

    // Diagnostic confidence events, evaluated from ground truth at the
    // sampled rounds only; never visible to the policy.
    bool event_e = true;  // deviations within radii at confidence 1/log(T)
    bool event_b = true;  // same at confidence 1/T
    bool event_f = true;  // same at RunOptions::f_event_delta
    bool cond_c_evaluated = false;
    bool cond_c = false;

    bool entered_exploit = false;
    bool entered_fallback = false;
    int fallback_phases = 0;
    bool exhausted_mid_phase = false;

    bool aborted = false;
    std::string abort_reason;
    long abort_round = -1;

    long communication_rounds() const { return static_cast<long>(comm_events.size()); }
};

// Runs a named algorithm ("cexp2" or "wcpe-reg").
RunTrace run_experiment(const Environment& env, const std::string& algorithm, long horizon,
                        const RunOptions& opts = {});

// Runs a caller-owned policy (testing, custom baselines).
RunTrace run_policy(const Environment& env, Policy& policy, const std::string& algorithm_name,
                    long horizon, const RunOptions& opts = {});

std::unique_ptr<Policy> make_policy(const std::string& algorithm, const BanditInstance& instance,
                                    long horizon);

// Every agent plays a fixed arm from round one.
class FixedArmPolicy : public Policy {
public:
    explicit FixedArmPolicy(std::vector<int> arms) : arms_(std::move(arms)) {}
    void begin(TraceHooks*) override {}
    int choose_arm(int agent, long) override { return arms_[agent]; }
    void observe(int, int, double, long) override {}
    void end_round(long) override {}
    std::optional<std::vector<int>> committed_arms() const override { return arms_; }
    std::vector<int> final_arms() const override { return arms_; }

private:
    std::vector<int> arms_;
};

// Cycles through the arms; keeps every pull count growing.
class RoundRobinPolicy : public Policy {
public:
    explicit RoundRobinPolicy(int arms) : arms_(arms) {}
    void begin(TraceHooks*) override {}
    int choose_arm(int, long round) override { return static_cast<int>((round - 1) % arms_); }
    void observe(int, int, double, long) override {}
    void end_round(long) override {}

private:
    int arms_;
};

struct SummaryStats {
    int runs = 0;
    double regret_mean = 0.0;
    double regret_stderr = 0.0;
    std::vector<long> checkpoint_rounds;
    std::vector<double> checkpoint_mean;
    std::vector<double> checkpoint_stderr;
    double fallback_frequency = 0.0;
    double fallback_stderr = 0.0;
    double comm_mean = 0.0;
    double comm_stderr = 0.0;
    std::map<long, int> comm_histogram;
    int success_count = 0;  // runs where every agent's final arm is optimal
    double success_rate = 0.0;
};

// Rejects traces from mixed configurations.
SummaryStats aggregate(const std::vector<RunTrace>& traces);

// One row per (round, agent): round,agent,arm,cumulative_regret.
void write_trace_csv(std::ostream& os, const RunTrace& trace);

}  // namespace cbsim
