#include "cbsim/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace cbsim {

WeightMatrix::WeightMatrix(Matrix entries) : entries_(std::move(entries)) {
    const int m = entries_.rows();
    if (m == 0 || entries_.cols() != m)
        throw std::invalid_argument("weights: matrix must be square and nonempty");
    for (int col = 0; col < m; ++col) {
        double sum = 0.0;
        for (int row = 0; row < m; ++row) {
            const double w = entries_(row, col);
            if (!(w >= 0.0 && w <= 1.0))
                throw std::invalid_argument("weights: entry (" + std::to_string(row + 1) + "," +
                                            std::to_string(col + 1) + ") outside [0,1]");
            sum += w;
        }
        if (std::abs(sum - 1.0) > kColumnSumTolerance)
            throw std::invalid_argument("weights: column " + std::to_string(col + 1) +
                                        " sums to " + std::to_string(sum) + ", expected 1");
    }
}

Matrix mixed_means(const BanditInstance& instance) {
    const int k_arms = instance.arms;
    const int m_agents = instance.agents;
    if (instance.mu.rows() != k_arms || instance.mu.cols() != m_agents ||
        instance.weights.agents() != m_agents)
        throw std::invalid_argument("instance: mu/weights dimensions inconsistent with K, M");
    Matrix mixed(k_arms, m_agents);
    for (int k = 0; k < k_arms; ++k)
        for (int m = 0; m < m_agents; ++m) {
            double acc = 0.0;
            for (int n = 0; n < m_agents; ++n) acc += instance.weights(n, m) * instance.mu(k, n);
            mixed(k, m) = acc;
        }
    return mixed;
}

void validate_instance(const BanditInstance& instance) {
    if (instance.arms < 2) throw std::invalid_argument("instance: need at least 2 arms");
    if (instance.agents < 1) throw std::invalid_argument("instance: need at least 1 agent");
    if (!(instance.sigma > 0.0))
        throw std::invalid_argument("instance: sigma must be positive");
    if (instance.weights.agents() != instance.agents)
        throw std::invalid_argument("instance: weights dimension != M");
    if (instance.mu.rows() != instance.arms || instance.mu.cols() != instance.agents)
        throw std::invalid_argument("instance: mu must be K x M");
    // Tied best arms make gaps (and every allocation program) undefined.
    const Matrix mixed = mixed_means(instance);
    for (int m = 0; m < instance.agents; ++m) {
        int best = 0;
        for (int k = 1; k < instance.arms; ++k)
            if (mixed(k, m) > mixed(best, m)) best = k;
        for (int k = 0; k < instance.arms; ++k)
            if (k != best && mixed(k, m) == mixed(best, m))
                throw std::invalid_argument("instance: agent " + std::to_string(m + 1) +
                                            " has a tied best arm (non-unique optimum)");
    }
}

GapSummary gap_summary(const BanditInstance& instance) {
    validate_instance(instance);
    GapSummary g;
    g.mixed_mu = mixed_means(instance);
    const int k_arms = instance.arms;
    const int m_agents = instance.agents;
    g.best_arm.resize(m_agents);
    g.delta = Matrix(k_arms, m_agents);
    g.tilde_delta = Matrix(k_arms, m_agents);
    g.delta_min = std::numeric_limits<double>::infinity();
    g.delta_max = 0.0;
    for (int m = 0; m < m_agents; ++m) {
        int best = 0;
        for (int k = 1; k < k_arms; ++k)
            if (g.mixed_mu(k, m) > g.mixed_mu(best, m)) best = k;
        g.best_arm[m] = best;
        double second = std::numeric_limits<double>::infinity();
        for (int k = 0; k < k_arms; ++k) {
            const double gap = g.mixed_mu(best, m) - g.mixed_mu(k, m);
            g.delta(k, m) = gap;
            if (k != best && gap < second) second = gap;
        }
        for (int k = 0; k < k_arms; ++k) {
            const double tilde = (k == best) ? second : g.delta(k, m);
            g.tilde_delta(k, m) = tilde;
            g.delta_min = std::min(g.delta_min, tilde);
            g.delta_max = std::max(g.delta_max, tilde);
        }
    }
    return g;
}

GapEstimate estimate_gaps(const Matrix& mixed_estimates) {
    const int k_arms = mixed_estimates.rows();
    const int m_agents = mixed_estimates.cols();
    GapEstimate est;
    est.gaps = Matrix(k_arms, m_agents);
    est.best.resize(m_agents);
    for (int m = 0; m < m_agents; ++m) {
        int best = 0;
        for (int k = 1; k < k_arms; ++k)
            if (mixed_estimates(k, m) > mixed_estimates(best, m)) best = k;
        est.best[m] = best;
        double second = std::numeric_limits<double>::infinity();
        for (int k = 0; k < k_arms; ++k) {
            if (k == best) continue;
            second = std::min(second, mixed_estimates(best, m) - mixed_estimates(k, m));
        }
        if (k_arms == 1) second = 0.0;
        for (int k = 0; k < k_arms; ++k)
            est.gaps(k, m) = (k == best) ? second
                                         : mixed_estimates(best, m) - mixed_estimates(k, m);
    }
    return est;
}

}  // namespace cbsim
