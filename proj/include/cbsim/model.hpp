#pragma once

#include <string>
#include <vector>

#include "cbsim/matrix.hpp"

namespace cbsim {

// Column-stochastic importance weights. Entry (n, m) is the weight agent m
// puts on agent n's local rewards; every column sums to 1.
class WeightMatrix {
public:
    WeightMatrix() = default;
    explicit WeightMatrix(Matrix entries);  // validates, throws std::invalid_argument

    int agents() const { return entries_.rows(); }
    double operator()(int source, int target) const { return entries_(source, target); }
    const Matrix& entries() const { return entries_; }

    static constexpr double kColumnSumTolerance = 1e-9;

private:
    Matrix entries_;
};

// Ground-truth problem instance: local means, shared noise scale, weights.
struct BanditInstance {
    int arms = 0;    // K
    int agents = 0;  // M
    Matrix mu;       // K x M local means
    double sigma = 1.0;
    WeightMatrix weights;
};

// Gaps of the mixed means. `delta` is zero at each agent's best arm;
// `tilde_delta` replaces that zero with the second-best gap so every entry
// is positive.
struct GapSummary {
    Matrix mixed_mu;            // K x M
    std::vector<int> best_arm;  // per agent
    Matrix delta;               // K x M, >= 0
    Matrix tilde_delta;         // K x M, > 0
    double delta_min = 0.0;
    double delta_max = 0.0;
};

// Gap estimates derived from estimated mixed means. Ties are broken toward
// the lowest arm index and never rejected (estimates may tie transiently).
struct GapEstimate {
    Matrix gaps;  // tilde-style: best arm carries the second-best gap
    std::vector<int> best;
};

// mixed(k, m) = sum_n w(n, m) * mu(k, n)
Matrix mixed_means(const BanditInstance& instance);

// Throws std::invalid_argument on any invariant violation (dimension
// mismatch, weight column sums, sigma <= 0, tied best arms).
void validate_instance(const BanditInstance& instance);

// Requires a valid instance with a strictly unique best arm per agent.
GapSummary gap_summary(const BanditInstance& instance);

GapEstimate estimate_gaps(const Matrix& mixed_estimates);

}  // namespace cbsim
