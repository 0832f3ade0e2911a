#include "cbsim/confidence.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace cbsim {

double g_m_approx(double delta, int agents) {
    if (!(delta > 0.0) || !(delta < 1.0))
        throw std::domain_error("g_m_approx: delta must lie in (0, 1)");
    if (agents < 1) throw std::domain_error("g_m_approx: need at least one agent");
    const double log_inv = std::log(1.0 / delta);
    const double log_log = std::log(log_inv);
    return log_inv + agents * std::max(log_log, 0.0);
}

double beta(std::span<const double> counts, const ConfidenceParams& params) {
    if (static_cast<int>(counts.size()) != params.agents)
        throw std::invalid_argument("beta: counts size != M");
    if (!(params.sigma > 0.0)) throw std::domain_error("beta: sigma must be positive");
    double tail = 0.0;
    for (double n : counts) {
        if (!(n >= 1.0)) throw std::domain_error("beta: every count must be >= 1");
        tail += std::log(4.0 + std::log(n));
    }
    const double g = g_m_approx(params.delta / (static_cast<double>(params.arms) * params.agents),
                                params.agents);
    return params.sigma * params.sigma * 2.0 * (g + 2.0 * tail);
}

double omega_with_beta(double beta_value, std::span<const double> counts,
                       const WeightMatrix& weights, int target_agent) {
    if (static_cast<int>(counts.size()) != weights.agents())
        throw std::invalid_argument("omega: counts size != M");
    double sum = 0.0;
    for (int n = 0; n < weights.agents(); ++n) {
        const double w = weights(n, target_agent);
        if (w == 0.0) continue;
        if (!(counts[n] >= 1.0))
            throw std::domain_error("omega: undefined before every agent has one pull");
        sum += w * w / counts[n];
    }
    return std::sqrt(beta_value * sum);
}

double omega(std::span<const double> counts, const WeightMatrix& weights, int target_agent,
             const ConfidenceParams& params) {
    return omega_with_beta(beta(counts, params), counts, weights, target_agent);
}

double horizon_bound(int arms, int agents, long horizon, double sigma) {
    if (horizon < 3) throw std::domain_error("horizon_bound: horizon must be >= 3");
    const std::vector<double> counts(static_cast<std::size_t>(agents),
                                     static_cast<double>(horizon));
    const ConfidenceParams params{arms, agents, 1.0 / static_cast<double>(horizon), sigma};
    return beta(counts, params);
}

}  // namespace cbsim
