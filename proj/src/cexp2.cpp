#include "cbsim/cexp2.hpp"

#include <cmath>
#include <stdexcept>

#include "cbsim/confidence.hpp"
#include "cbsim/oracle.hpp"
#include "cbsim/wcpe.hpp"

namespace cbsim {

long initial_pulls_per_arm(long horizon) {
    if (horizon < 3) throw std::invalid_argument("horizon must be >= 3");
    return static_cast<long>(std::ceil(std::sqrt(std::log(static_cast<double>(horizon)))));
}

Matrix project_gaps(const Matrix& raw, long horizon) {
    const double upper = std::log(std::log(static_cast<double>(horizon)));
    if (!(upper > 0.0) || upper <= 1.0 / upper)
        throw std::invalid_argument("project_gaps: horizon too small (need T >= 16)");
    const double lower = 1.0 / upper;
    Matrix out = raw;
    for (int k = 0; k < out.rows(); ++k)
        for (int m = 0; m < out.cols(); ++m)
            out(k, m) = std::min(std::max(out(k, m), lower), upper);
    return out;
}

Matrix guided_allocation(const Matrix& projected_gaps, const WeightMatrix& weights, long horizon,
                         double sigma) {
    const long tau1 = initial_pulls_per_arm(horizon);
    const double bound = horizon_bound(projected_gaps.rows(), projected_gaps.cols(), horizon,
                                       sigma);
    const oracle::OracleResult q = oracle::solve_relaxed(projected_gaps, weights);
    Matrix targets(projected_gaps.rows(), projected_gaps.cols());
    for (int k = 0; k < targets.rows(); ++k)
        for (int m = 0; m < targets.cols(); ++m) {
            const double scaled = std::ceil(18.0 * q.allocation(k, m) * bound);
            targets(k, m) = std::max(static_cast<double>(tau1), scaled);
        }
    return targets;
}

bool switch_condition(const Matrix& gap_estimates, const Matrix& omega_values) {
    if (!gap_estimates.same_shape(omega_values))
        throw std::invalid_argument("switch_condition: shape mismatch");
    for (int k = 0; k < gap_estimates.rows(); ++k)
        for (int m = 0; m < gap_estimates.cols(); ++m)
            if (!(omega_values(k, m) < gap_estimates(k, m) / 2.0)) return false;
    return true;
}

CExp2Policy::CExp2Policy(int arms, int agents, WeightMatrix weights, double sigma, long horizon,
                         FallbackFactory fallback)
    : arms_(arms),
      agents_(agents),
      weights_(std::move(weights)),
      sigma_(sigma),
      horizon_(horizon),
      make_fallback_(std::move(fallback)),
      tau1_(0),
      counts_(arms, agents, 0.0),
      sums_(arms, agents, 0.0) {
    if (arms < 1) throw std::invalid_argument("cexp2: need at least one arm");
    const double loglog = std::log(std::log(static_cast<double>(std::max(horizon, 2L))));
    if (horizon < 16 || !(loglog > 1.0 / loglog))
        throw std::invalid_argument("cexp2: horizon must be >= 16");
    tau1_ = initial_pulls_per_arm(horizon);
    if (!make_fallback_)
        make_fallback_ = [this] {
            return std::make_unique<WcpePolicy>(arms_, agents_, weights_, sigma_, horizon_);
        };
}

CExp2Policy::~CExp2Policy() = default;

void CExp2Policy::begin(TraceHooks* hooks) {
    hooks_ = hooks;
    if (hooks_) hooks_->on_phase(Phase::InitialExploration, 1);
}

Matrix CExp2Policy::mixed_estimates() const {
    Matrix est(arms_, agents_);
    for (int k = 0; k < arms_; ++k)
        for (int m = 0; m < agents_; ++m) {
            double acc = 0.0;
            for (int n = 0; n < agents_; ++n) {
                const double w = weights_(n, m);
                if (w != 0.0) acc += w * sums_(k, n) / counts_(k, n);
            }
            est(k, m) = acc;
        }
    return est;
}

int CExp2Policy::choose_arm(int agent, long round) {
    switch (phase_) {
        case Phase::InitialExploration:
            return static_cast<int>((round - 1) % arms_);
        case Phase::GuidedExploration: {
            for (int k = 0; k < arms_; ++k)
                if (counts_(k, agent) < targets_(k, agent)) return k;
            return best_ie_[agent];  // finished early: play the current empirical best
        }
        case Phase::Exploit:
            return commit_[agent];
        case Phase::Fallback:
            return fallback_->choose_arm(agent, round);
    }
    throw std::logic_error("cexp2: invalid phase");
}

void CExp2Policy::observe(int agent, int arm, double reward, long round) {
    if (phase_ == Phase::Fallback) {
        fallback_->observe(agent, arm, reward, round);
        return;
    }
    counts_(arm, agent) += 1.0;
    sums_(arm, agent) += reward;
}

void CExp2Policy::communicate_initial(long round) {
    if (hooks_) hooks_->on_communication(round, 2 * static_cast<std::size_t>(arms_) * agents_);
    const Matrix mixed = mixed_estimates();
    const GapEstimate est = estimate_gaps(mixed);
    best_ie_ = est.best;
    gaps_ie_ = est.gaps;
    projected_ = project_gaps(gaps_ie_, horizon_);
    targets_ = guided_allocation(projected_, weights_, horizon_, sigma_);
    phase_ = Phase::GuidedExploration;
    if (hooks_) hooks_->on_phase(Phase::GuidedExploration, round + 1);
}

void CExp2Policy::communicate_guided(long round) {
    t_ge_ = round;
    if (hooks_) hooks_->on_communication(round, 2 * static_cast<std::size_t>(arms_) * agents_);
    const Matrix mixed = mixed_estimates();
    const GapEstimate est = estimate_gaps(mixed);
    gaps_ge_ = est.gaps;

    // Radii at horizon confidence with the counts realized by the end of
    // guided exploration.
    const ConfidenceParams params{arms_, agents_, 1.0 / static_cast<double>(horizon_), sigma_};
    Matrix omegas(arms_, agents_);
    for (int k = 0; k < arms_; ++k) {
        const double b = beta(counts_.row(k), params);
        for (int m = 0; m < agents_; ++m)
            omegas(k, m) = omega_with_beta(b, counts_.row(k), weights_, m);
    }
    cond_c_ = switch_condition(gaps_ge_, omegas);
    if (hooks_) hooks_->on_switch_decision(cond_c_, round);

    if (cond_c_) {
        commit_ = est.best;
        phase_ = Phase::Exploit;
        if (hooks_) hooks_->on_phase(Phase::Exploit, round + 1);
    } else {
        // Reset all data and hand over to the fallback policy.
        fallback_ = make_fallback_();
        phase_ = Phase::Fallback;
        if (hooks_) hooks_->on_phase(Phase::Fallback, round + 1);
        fallback_->begin(hooks_);
    }
}

void CExp2Policy::end_round(long round) {
    switch (phase_) {
        case Phase::InitialExploration:
            if (round >= static_cast<long>(arms_) * tau1_) communicate_initial(round);
            break;
        case Phase::GuidedExploration: {
            bool done = true;
            for (int k = 0; k < arms_ && done; ++k)
                for (int m = 0; m < agents_ && done; ++m)
                    if (counts_(k, m) < targets_(k, m)) done = false;
            if (done) communicate_guided(round);
            break;
        }
        case Phase::Exploit:
            break;
        case Phase::Fallback:
            fallback_->end_round(round);
            break;
    }
}

std::optional<std::vector<int>> CExp2Policy::committed_arms() const {
    if (phase_ == Phase::Exploit) return commit_;
    if (phase_ == Phase::Fallback) return fallback_->committed_arms();
    return std::nullopt;
}

void CExp2Policy::finish(long last_round) {
    if (phase_ == Phase::Fallback) fallback_->finish(last_round);
}

std::vector<int> CExp2Policy::final_arms() const {
    if (phase_ == Phase::Exploit) return commit_;
    if (phase_ == Phase::Fallback) return fallback_->final_arms();
    if (!best_ie_.empty()) return best_ie_;
    return {};
}

bool CExp2Policy::horizon_exhausted_mid_phase() const {
    if (phase_ == Phase::Fallback) return fallback_->horizon_exhausted_mid_phase();
    return phase_ != Phase::Exploit;
}

int CExp2Policy::elimination_phases() const {
    return fallback_ ? fallback_->elimination_phases() : 0;
}

}  // namespace cbsim
