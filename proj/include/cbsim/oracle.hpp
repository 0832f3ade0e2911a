#pragma once

#include <vector>

#include "cbsim/matrix.hpp"
#include "cbsim/model.hpp"

namespace cbsim::oracle {

// Expected pull counts per unit log-horizon for every (arm, agent) pair.
// Entries excluded from a program's decision set are reported as zero and
// `has_excluded_entries` is set.
struct OracleResult {
    Matrix allocation;             // K x M, q
    double objective_value = 0.0;  // declared objective evaluated at `allocation`
    double kkt_residual = 0.0;     // max relative feasibility/complementarity violation
    long iterations = 0;
    bool has_excluded_entries = false;
};

// Relaxed allocation program: minimize sum q * delta subject to, for every
// (k, m), sum_n w(n, m)^2 / q(k, n) <= delta(k, m)^2 / 2. Decomposes per arm.
OracleResult solve_relaxed(const Matrix& delta, const WeightMatrix& weights);

// Regret lower-bound program. Variables q(k, n) with k the best arm of agent
// n appear in no constraint or objective term and are excluded. Objective
// counts only suboptimal (k, m) pairs, weighted by tilde gaps.
OracleResult solve_lower_bound(const GapSummary& gaps, const WeightMatrix& weights);

// Sample-complexity program: minimize sum q with the same restricted
// constraint sums, bounded by the suboptimal gaps.
OracleResult solve_sample_complexity(const GapSummary& gaps, const WeightMatrix& weights);

// General masked form used by the phased-elimination policy: constraint
// (k, m) kept iff cmask(k, m), variable (k, n) a candidate iff vmask(k, n).
OracleResult solve_allocation(const Matrix& objective, const Matrix& delta,
                              const WeightMatrix& weights, const Mask& cmask,
                              const Mask& vmask);

// sum_{k,m} allocation(k, m) * delta(k, m)
double complexity_value(const Matrix& allocation, const Matrix& delta);

// Max over (k, m) of sum_n w(n, m)^2 / q(k, n) - delta(k, m)^2 / 2; <= 0
// means feasible. With `exclude_best`, agents n whose best arm is k are left
// out of the sum (empty sums count as vacuously satisfied).
double check_feasibility(const Matrix& allocation, const Matrix& delta,
                         const WeightMatrix& weights,
                         const std::vector<int>* exclude_best = nullptr);

// Brute-force reference solver (log-grid refinement), small instances only
// (K * M <= 16). Same program encoding as solve_allocation.
OracleResult solve_reference(const Matrix& objective, const Matrix& delta,
                             const WeightMatrix& weights, const Mask& cmask,
                             const Mask& vmask);

OracleResult reference_relaxed(const Matrix& delta, const WeightMatrix& weights);
OracleResult reference_lower_bound(const GapSummary& gaps, const WeightMatrix& weights);
OracleResult reference_sample_complexity(const GapSummary& gaps, const WeightMatrix& weights);

}  // namespace cbsim::oracle
