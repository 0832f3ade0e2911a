#include "cbsim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "cbsim/cexp2.hpp"
#include "cbsim/confidence.hpp"
#include "cbsim/rng.hpp"
#include "cbsim/wcpe.hpp"

namespace cbsim {

double Environment::sample(int arm, int agent, long round) const {
    if (arm < 0 || arm >= instance.arms || agent < 0 || agent >= instance.agents)
        throw std::invalid_argument("Environment::sample: index out of range");
    const double mean = instance.mu(arm, agent);
    if (instance.sigma == 0.0) return mean;
    const std::uint64_t key = rng::stream_key(seed, agent, arm);
    return mean + instance.sigma * rng::standard_normal(key, static_cast<std::uint64_t>(round));
}

std::string phase_name(Phase phase) {
    switch (phase) {
        case Phase::InitialExploration: return "initial_exploration";
        case Phase::GuidedExploration: return "guided_exploration";
        case Phase::Exploit: return "exploit";
        case Phase::Fallback: return "fallback";
    }
    return "unknown";
}

std::unique_ptr<Policy> make_policy(const std::string& algorithm, const BanditInstance& instance,
                                    long horizon) {
    if (algorithm == "cexp2")
        return std::make_unique<CExp2Policy>(instance.arms, instance.agents, instance.weights,
                                             instance.sigma, horizon);
    if (algorithm == "wcpe-reg")
        return std::make_unique<WcpePolicy>(instance.arms, instance.agents, instance.weights,
                                            instance.sigma, horizon);
    throw std::invalid_argument("unknown algorithm '" + algorithm +
                                "' (expected cexp2 or wcpe-reg)");
}

namespace {

// Simulator-side mirror of all sampling data plus the diagnostic event state.
class DiagnosticState {
public:
    DiagnosticState(const BanditInstance& instance, const Matrix& true_mixed, long horizon,
                    double f_delta)
        : instance_(instance),
          true_mixed_(true_mixed),
          counts_(instance.arms, instance.agents, 0.0),
          sums_(instance.arms, instance.agents, 0.0),
          params_e_{instance.arms, instance.agents,
                    clamp_delta(1.0 / std::log(static_cast<double>(horizon))), instance.sigma},
          params_b_{instance.arms, instance.agents,
                    clamp_delta(1.0 / static_cast<double>(horizon)), instance.sigma},
          params_f_{instance.arms, instance.agents,
                    clamp_delta(f_delta > 0.0 ? f_delta
                                              : 1.0 / static_cast<double>(horizon)),
                    instance.sigma} {}

    // Horizons of a couple of rounds push 1/log(T) past one; the diagnostics
    // stay defined with the loosest usable level.
    static double clamp_delta(double delta) { return std::clamp(delta, 1e-12, 0.999); }

    void record(int agent, int arm, double reward) {
        counts_(arm, agent) += 1.0;
        sums_(arm, agent) += reward;
    }

    const Matrix& counts() const { return counts_; }

    // Checks every (arm, agent) pair whose counts are complete; violations
    // latch the corresponding event flag to false.
    void evaluate(bool& event_e, bool& event_b, bool& event_f) const {
        if (!event_e && !event_b && !event_f) return;
        const int k_arms = instance_.arms;
        const int m_agents = instance_.agents;
        for (int k = 0; k < k_arms; ++k) {
            bool complete = true;
            for (int n = 0; n < m_agents; ++n)
                if (counts_(k, n) < 1.0) complete = false;
            if (!complete) continue;
            const auto row = counts_.row(k);
            const double beta_e = event_e ? beta(row, params_e_) : 0.0;
            const double beta_b = event_b ? beta(row, params_b_) : 0.0;
            const double beta_f = event_f ? beta(row, params_f_) : 0.0;
            for (int m = 0; m < m_agents; ++m) {
                double est = 0.0;
                for (int n = 0; n < m_agents; ++n) {
                    const double w = instance_.weights(n, m);
                    if (w != 0.0) est += w * sums_(k, n) / counts_(k, n);
                }
                const double dev = std::abs(est - true_mixed_(k, m));
                if (event_e && dev > omega_with_beta(beta_e, row, instance_.weights, m))
                    event_e = false;
                if (event_b && dev > omega_with_beta(beta_b, row, instance_.weights, m))
                    event_b = false;
                if (event_f && dev > omega_with_beta(beta_f, row, instance_.weights, m))
                    event_f = false;
            }
        }
    }

private:
    const BanditInstance& instance_;
    const Matrix& true_mixed_;
    Matrix counts_;
    Matrix sums_;
    ConfidenceParams params_e_, params_b_, params_f_;
};

class TraceRecorder : public TraceHooks {
public:
    explicit TraceRecorder(RunTrace* trace) : trace_(trace) {}

    void on_communication(long round, std::size_t payload_doubles) override {
        trace_->comm_events.push_back({round, payload_doubles});
        evaluate_pending = true;
    }
    void on_phase(Phase phase, long first_round) override {
        trace_->phase_marks.push_back({phase, first_round});
        if (phase == Phase::Exploit) trace_->entered_exploit = true;
        if (phase == Phase::Fallback) trace_->entered_fallback = true;
    }
    void on_switch_decision(bool condition_holds, long round) override {
        (void)round;
        trace_->cond_c_evaluated = true;
        trace_->cond_c = condition_holds;
    }

    bool evaluate_pending = false;

private:
    RunTrace* trace_;
};

std::vector<long> make_grid(long horizon, int points) {
    std::vector<long> grid;
    if (points < 1) points = 1;
    for (int i = 1; i <= points; ++i) {
        const long r = static_cast<long>(
            std::llround(std::ceil(static_cast<double>(i) * horizon / points)));
        grid.push_back(std::clamp(r, 1L, horizon));
    }
    grid.push_back(horizon);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

}  // namespace

RunTrace run_policy(const Environment& env, Policy& policy, const std::string& algorithm_name,
                    long horizon, const RunOptions& opts) {
    if (horizon < 1) throw std::invalid_argument("run_policy: horizon must be >= 1");
    const int k_arms = env.instance.arms;
    const int m_agents = env.instance.agents;
    GapSummary gaps;
    if (k_arms == 1) {
        // Degenerate single-arm world: simulable (zero regret by definition)
        // though below the two-arm floor of the instance validator.
        if (!(env.instance.sigma >= 0.0))
            throw std::invalid_argument("instance: sigma must be nonnegative");
        gaps.mixed_mu = mixed_means(env.instance);
        gaps.best_arm.assign(m_agents, 0);
        gaps.delta = Matrix(1, m_agents, 0.0);
        gaps.tilde_delta = Matrix(1, m_agents, std::numeric_limits<double>::infinity());
        gaps.delta_min = gaps.delta_max = std::numeric_limits<double>::infinity();
    } else {
        validate_instance(env.instance);
        gaps = gap_summary(env.instance);
    }

    RunTrace trace;
    trace.algorithm = algorithm_name;
    trace.seed = env.seed;
    trace.arms = k_arms;
    trace.agents = m_agents;
    trace.horizon = horizon;
    trace.sigma = env.instance.sigma;
    trace.optimal_arms = gaps.best_arm;
    trace.pull_counts = Matrix(k_arms, m_agents, 0.0);
    trace.grid_rounds = make_grid(horizon, opts.event_grid);

    TraceRecorder recorder(&trace);
    DiagnosticState diag(env.instance, gaps.mixed_mu, horizon, opts.f_event_delta);

    double regret = 0.0;
    std::size_t grid_pos = 0;
    std::vector<int> chosen(m_agents, 0);

    auto capture_grid = [&](long round, double value) {
        while (grid_pos < trace.grid_rounds.size() && trace.grid_rounds[grid_pos] == round) {
            trace.grid_regret.push_back(value);
            ++grid_pos;
        }
    };

    long t = 1;
    try {
        policy.begin(&recorder);
        for (; t <= horizon; ++t) {
            if (auto commit = policy.committed_arms()) {
                // Closed-form tail: fixed arms, no further policy state changes.
                std::vector<double> prefix(m_agents + 1, 0.0);
                for (int m = 0; m < m_agents; ++m)
                    prefix[m + 1] = prefix[m] + gaps.delta((*commit)[m], m);
                const double per_round = prefix[m_agents];
                const long remaining = horizon - t + 1;
                const bool rows_needed = opts.record_rounds;
                for (long r = t; r <= horizon; ++r) {
                    const bool on_grid = grid_pos < trace.grid_rounds.size() &&
                                         trace.grid_rounds[grid_pos] == r;
                    if (!rows_needed && !on_grid) continue;
                    const double base = regret + static_cast<double>(r - t) * per_round;
                    for (int m = 0; m < m_agents; ++m)
                        trace.rows.push_back({r, m + 1, (*commit)[m] + 1, base + prefix[m + 1]});
                    if (on_grid) capture_grid(r, base + per_round);
                }
                regret += static_cast<double>(remaining) * per_round;
                for (int m = 0; m < m_agents; ++m)
                    trace.pull_counts((*commit)[m], m) += static_cast<double>(remaining);
                // Frozen state: one final diagnostic evaluation covers the tail.
                diag.evaluate(trace.event_e, trace.event_b, trace.event_f);
                t = horizon + 1;
                break;
            }
            for (int m = 0; m < m_agents; ++m) {
                const int arm = policy.choose_arm(m, t);
                if (arm < 0 || arm >= k_arms)
                    throw std::logic_error("policy chose an out-of-range arm");
                chosen[m] = arm;
                regret += gaps.delta(arm, m);
                trace.pull_counts(arm, m) += 1.0;
                const bool on_grid = grid_pos < trace.grid_rounds.size() &&
                                     trace.grid_rounds[grid_pos] == t;
                if (opts.record_rounds || on_grid)
                    trace.rows.push_back({t, m + 1, arm + 1, regret});
            }
            for (int m = 0; m < m_agents; ++m) {
                const double reward = env.sample(chosen[m], m, t);
                diag.record(m, chosen[m], reward);
                policy.observe(m, chosen[m], reward, t);
            }
            policy.end_round(t);
            const bool on_grid =
                grid_pos < trace.grid_rounds.size() && trace.grid_rounds[grid_pos] == t;
            if (opts.full_events || on_grid || recorder.evaluate_pending) {
                diag.evaluate(trace.event_e, trace.event_b, trace.event_f);
                recorder.evaluate_pending = false;
            }
            capture_grid(t, regret);
        }
        policy.finish(horizon);
        trace.final_arms = policy.final_arms();
        trace.exhausted_mid_phase = policy.horizon_exhausted_mid_phase();
        trace.fallback_phases = policy.elimination_phases();
    } catch (const std::exception& e) {
        trace.aborted = true;
        trace.abort_reason = e.what();
        trace.abort_round = std::min(t, horizon);
    }
    trace.final_regret = regret;
    if (trace.final_arms.empty()) trace.final_arms.assign(m_agents, -1);

    if (!trace.aborted) {
        // Two accounting paths must agree: summed increments vs counts * gaps.
        double by_counts = 0.0;
        for (int k = 0; k < k_arms; ++k)
            for (int m = 0; m < m_agents; ++m)
                by_counts += trace.pull_counts(k, m) * gaps.delta(k, m);
        if (std::abs(by_counts - regret) > 1e-6 * std::max(1.0, std::abs(regret)))
            throw std::logic_error("run_policy: regret accounting mismatch");
    }
    return trace;
}

RunTrace run_experiment(const Environment& env, const std::string& algorithm, long horizon,
                        const RunOptions& opts) {
    auto policy = make_policy(algorithm, env.instance, horizon);
    return run_policy(env, *policy, algorithm, horizon, opts);
}

SummaryStats aggregate(const std::vector<RunTrace>& traces) {
    if (traces.empty()) throw std::invalid_argument("aggregate: no traces");
    const RunTrace& first = traces.front();
    for (const RunTrace& tr : traces)
        if (tr.algorithm != first.algorithm || tr.arms != first.arms ||
            tr.agents != first.agents || tr.horizon != first.horizon ||
            tr.sigma != first.sigma || tr.optimal_arms != first.optimal_arms ||
            tr.grid_rounds != first.grid_rounds)
            throw std::invalid_argument("aggregate: traces from mixed configurations");

    SummaryStats s;
    s.runs = static_cast<int>(traces.size());
    const double n = static_cast<double>(s.runs);

    auto mean_stderr = [n](double sum, double sumsq, double& mean, double& se) {
        mean = sum / n;
        if (n > 1.5) {
            const double var = std::max(0.0, (sumsq - n * mean * mean) / (n - 1.0));
            se = std::sqrt(var / n);
        } else {
            se = 0.0;
        }
    };

    double sum = 0.0, sumsq = 0.0, fsum = 0.0, fsumsq = 0.0, csum = 0.0, csumsq = 0.0;
    for (const RunTrace& tr : traces) {
        sum += tr.final_regret;
        sumsq += tr.final_regret * tr.final_regret;
        const double f = tr.entered_fallback ? 1.0 : 0.0;
        fsum += f;
        fsumsq += f;
        const double c = static_cast<double>(tr.communication_rounds());
        csum += c;
        csumsq += c * c;
        s.comm_histogram[tr.communication_rounds()] += 1;
        bool ok = !tr.final_arms.empty();
        for (std::size_t m = 0; m < tr.final_arms.size() && ok; ++m)
            ok = tr.final_arms[m] == tr.optimal_arms[m];
        if (ok) ++s.success_count;
    }
    mean_stderr(sum, sumsq, s.regret_mean, s.regret_stderr);
    mean_stderr(fsum, fsumsq, s.fallback_frequency, s.fallback_stderr);
    mean_stderr(csum, csumsq, s.comm_mean, s.comm_stderr);
    s.success_rate = static_cast<double>(s.success_count) / n;

    s.checkpoint_rounds = first.grid_rounds;
    const std::size_t g = s.checkpoint_rounds.size();
    s.checkpoint_mean.assign(g, 0.0);
    s.checkpoint_stderr.assign(g, 0.0);
    std::vector<double> sq(g, 0.0);
    for (const RunTrace& tr : traces) {
        if (tr.grid_regret.size() != g)
            throw std::invalid_argument("aggregate: incomplete grid in a trace");
        for (std::size_t i = 0; i < g; ++i) {
            s.checkpoint_mean[i] += tr.grid_regret[i];
            sq[i] += tr.grid_regret[i] * tr.grid_regret[i];
        }
    }
    for (std::size_t i = 0; i < g; ++i) {
        double m = 0.0, se = 0.0;
        mean_stderr(s.checkpoint_mean[i], sq[i], m, se);
        s.checkpoint_mean[i] = m;
        s.checkpoint_stderr[i] = se;
    }
    return s;
}

void write_trace_csv(std::ostream& os, const RunTrace& trace) {
    os << "round,agent,arm,cumulative_regret\n";
    char buf[64];
    for (const TraceRow& row : trace.rows) {
        std::snprintf(buf, sizeof(buf), "%.17g", row.cumulative_regret);
        os << row.round << ',' << row.agent << ',' << row.arm << ',' << buf << '\n';
    }
}

}  // namespace cbsim
