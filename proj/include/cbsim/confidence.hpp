#pragma once

#include <span>

#include "cbsim/model.hpp"

namespace cbsim {

// Parameters of the time-uniform confidence radii for mixed-mean estimates.
// The radii are stated for unit noise scale; for general sigma the threshold
// scales by sigma^2.
struct ConfidenceParams {
    int arms = 1;        // K
    int agents = 1;      // M
    double delta = 0.1;  // confidence level in (0, 1)
    double sigma = 1.0;
};

// log(1/delta) + M * max(log log(1/delta), 0). The max() keeps the value
// defined for loose delta in [1/e, 1).
double g_m_approx(double delta, int agents);

// Threshold 2 sigma^2 (g_M(delta / KM) + 2 sum_m log(4 + log(N_m))).
// Every count must be >= 1.
double beta(std::span<const double> counts, const ConfidenceParams& params);

// Radius sqrt(beta_value * sum_n w(n, target)^2 / counts[n]).
double omega_with_beta(double beta_value, std::span<const double> counts,
                       const WeightMatrix& weights, int target_agent);

// Composite radius with the threshold recomputed from the counts.
double omega(std::span<const double> counts, const WeightMatrix& weights, int target_agent,
             const ConfidenceParams& params);

// Upper bound on beta at confidence 1/T: beta evaluated at all counts = T.
// Monotone nondecreasing in T; requires T >= 3.
double horizon_bound(int arms, int agents, long horizon, double sigma = 1.0);

}  // namespace cbsim
