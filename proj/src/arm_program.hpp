#pragma once

// Internal packed form of one arm's allocation subproblem. The three public
// programs and the per-phase elimination program all reduce to this shape:
//
//   minimize    sum_n cost[n] * x[n]        over x > 0
//   subject to  sum_n a(m, n) / x[n] <= rhs[m]   for each kept constraint m
//
// Constraints whose left sum is empty are vacuous and dropped while packing;
// variables that appear in no kept constraint are excluded from the decision
// vector (their allocation is reported as zero).

#include <cstdint>
#include <utility>
#include <vector>

#include "cbsim/matrix.hpp"
#include "cbsim/model.hpp"

namespace cbsim::detail {

struct ArmProgram {
    std::vector<int> vars;                       // agent index per decision variable
    std::vector<double> cost;                    // positive objective coefficients
    std::vector<double> rhs;                     // positive constraint bounds
    std::vector<std::vector<std::pair<int, double>>> terms;  // per constraint: (var slot, w^2)
    std::vector<int> constraint_agent;           // original agent index per constraint
    bool dropped_variables = false;              // some candidate variable was excluded
};

// Packs arm `k` of the masked program. `objective` and `delta` are K x M;
// constraint (k, m) is kept iff cmask(k, m); variable (k, n) is a candidate
// iff vmask(k, n). Throws std::domain_error for nonpositive delta on a kept
// constraint (entries below 1e-12 are treated as degenerate).
ArmProgram pack_arm_program(int k, const Matrix& objective, const Matrix& delta,
                            const WeightMatrix& weights, const Mask& cmask, const Mask& vmask);

struct ArmSolution {
    std::vector<double> x;       // per ArmProgram::vars slot
    double objective = 0.0;
    double kkt_residual = 0.0;
    long iterations = 0;
};

// Dual ascent with closed-form primal recovery plus an active-set Newton
// polish; the returned point is always feasible.
ArmSolution solve_arm_dual(const ArmProgram& prog);

// Exhaustive log-grid coordinate refinement, successively halved around the
// incumbent. Independent of solve_arm_dual; used as the test reference.
ArmSolution solve_arm_grid(const ArmProgram& prog, double rel_tol = 1e-6);

}  // namespace cbsim::detail
