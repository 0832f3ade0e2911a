#include "cbsim/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "arm_program.hpp"

namespace cbsim::oracle {

using detail::ArmProgram;
using detail::ArmSolution;

namespace {

void check_program_shapes(const Matrix& objective, const Matrix& delta,
                          const WeightMatrix& weights, const Mask& cmask, const Mask& vmask) {
    if (!objective.same_shape(delta) || delta.cols() != weights.agents() ||
        cmask.rows() != delta.rows() || cmask.cols() != delta.cols() ||
        vmask.rows() != delta.rows() || vmask.cols() != delta.cols())
        throw std::invalid_argument("oracle: program shapes inconsistent");
    if (delta.rows() < 1) throw std::invalid_argument("oracle: need at least one arm");
}

Mask full_mask(int rows, int cols) { return Mask(rows, cols, true); }

// Shared assembly of the per-arm solutions into an OracleResult.
template <typename ArmSolver>
OracleResult solve_with(const Matrix& objective, const Matrix& delta,
                        const WeightMatrix& weights, const Mask& cmask, const Mask& vmask,
                        ArmSolver&& solver) {
    check_program_shapes(objective, delta, weights, cmask, vmask);
    const int k_arms = delta.rows();
    const int m_agents = delta.cols();
    OracleResult result;
    result.allocation = Matrix(k_arms, m_agents, 0.0);
    for (int k = 0; k < k_arms; ++k) {
        const ArmProgram prog =
            detail::pack_arm_program(k, objective, delta, weights, cmask, vmask);
        if (prog.dropped_variables) result.has_excluded_entries = true;
        if (prog.vars.empty()) continue;
        const ArmSolution sol = solver(prog);
        for (std::size_t i = 0; i < prog.vars.size(); ++i)
            result.allocation(k, prog.vars[i]) = sol.x[i];
        result.kkt_residual = std::max(result.kkt_residual, sol.kkt_residual);
        result.iterations += sol.iterations;
    }
    for (int k = 0; k < k_arms && !result.has_excluded_entries; ++k)
        for (int m = 0; m < m_agents; ++m)
            if (!vmask(k, m)) result.has_excluded_entries = true;
    result.objective_value = 0.0;
    for (int k = 0; k < k_arms; ++k)
        for (int m = 0; m < m_agents; ++m)
            result.objective_value += result.allocation(k, m) * objective(k, m);
    return result;
}

Mask lower_bound_vmask(const GapSummary& gaps) {
    const int k_arms = gaps.delta.rows();
    const int m_agents = gaps.delta.cols();
    Mask vmask(k_arms, m_agents, true);
    for (int n = 0; n < m_agents; ++n) vmask.set(gaps.best_arm[n], n, false);
    return vmask;
}

Matrix ones_like(const Matrix& m) { return Matrix(m.rows(), m.cols(), 1.0); }

}  // namespace

}  // namespace cbsim::oracle

namespace cbsim::detail {

constexpr double kDeltaFloor = 1e-12;

ArmProgram pack_arm_program(int k, const Matrix& objective, const Matrix& delta,
                            const WeightMatrix& weights, const Mask& cmask, const Mask& vmask) {
    const int m_agents = delta.cols();
    ArmProgram prog;
    std::vector<int> slot_of(m_agents, -1);
    std::vector<int> candidates;
    for (int n = 0; n < m_agents; ++n)
        if (vmask(k, n)) candidates.push_back(n);

    // First pass: which candidate variables actually appear in a kept constraint.
    std::vector<char> participates(m_agents, 0);
    for (int m = 0; m < m_agents; ++m) {
        if (!cmask(k, m)) continue;
        bool nonempty = false;
        for (int n : candidates)
            if (weights(n, m) != 0.0) {
                nonempty = true;
                participates[n] = 1;
            }
        if (nonempty && !(delta(k, m) >= kDeltaFloor))
            throw std::domain_error("oracle: gap entry (" + std::to_string(k + 1) + "," +
                                    std::to_string(m + 1) + ") is below 1e-12");
    }
    for (int n : candidates) {
        if (!participates[n]) {
            prog.dropped_variables = true;
            continue;
        }
        slot_of[n] = static_cast<int>(prog.vars.size());
        prog.vars.push_back(n);
        const double c = objective(k, n);
        if (!(c > 0.0)) throw std::domain_error("oracle: objective coefficient must be positive");
        prog.cost.push_back(c);
    }
    for (int m = 0; m < m_agents; ++m) {
        if (!cmask(k, m)) continue;
        std::vector<std::pair<int, double>> row;
        for (int n : candidates) {
            const double w = weights(n, m);
            if (w != 0.0 && slot_of[n] >= 0) row.emplace_back(slot_of[n], w * w);
        }
        if (row.empty()) continue;  // vacuously satisfied
        prog.rhs.push_back(delta(k, m) * delta(k, m) / 2.0);
        prog.terms.push_back(std::move(row));
        prog.constraint_agent.push_back(m);
    }
    return prog;
}

namespace {

// Symmetric positive-definite-ish solve by Gaussian elimination with partial
// pivoting; sizes here are at most the agent count.
bool solve_linear(std::vector<std::vector<double>> a, std::vector<double> b,
                  std::vector<double>& out) {
    const int n = static_cast<int>(b.size());
    out.assign(n, 0.0);
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        if (std::abs(a[pivot][col]) < 1e-300) return false;
        std::swap(a[pivot], a[col]);
        std::swap(b[pivot], b[col]);
        for (int r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            if (f == 0.0) continue;
            for (int c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    for (int r = n - 1; r >= 0; --r) {
        double acc = b[r];
        for (int c = r + 1; c < n; ++c) acc -= a[r][c] * out[c];
        out[r] = acc / a[r][r];
    }
    return true;
}

struct DualState {
    std::vector<double> s;     // s_n = sum_m lambda_m a(m, n)
    std::vector<double> x;     // x_n = sqrt(s_n / c_n)
    std::vector<double> grad;  // constraint values at x
    double h = 0.0;            // dual objective
};

constexpr double kSFloor = 1e-280;

void eval_dual(const ArmProgram& prog, const std::vector<double>& lambda, DualState& st) {
    const std::size_t v = prog.vars.size();
    const std::size_t c = prog.rhs.size();
    st.s.assign(v, 0.0);
    for (std::size_t m = 0; m < c; ++m)
        for (const auto& [slot, a] : prog.terms[m]) st.s[slot] += lambda[m] * a;
    st.x.resize(v);
    st.h = 0.0;
    for (std::size_t n = 0; n < v; ++n) {
        const double s = std::max(st.s[n], kSFloor);
        st.x[n] = std::sqrt(s / prog.cost[n]);
        st.h += 2.0 * std::sqrt(prog.cost[n] * s);
    }
    st.grad.assign(c, 0.0);
    for (std::size_t m = 0; m < c; ++m) {
        double lhs = 0.0;
        for (const auto& [slot, a] : prog.terms[m]) lhs += a / st.x[slot];
        st.grad[m] = lhs - prog.rhs[m];
        st.h -= lambda[m] * prog.rhs[m];
    }
}

// Feasible primal objective for the point x scaled onto the boundary.
double feasible_primal(const ArmProgram& prog, const std::vector<double>& x,
                       std::vector<double>* scaled = nullptr) {
    double gamma = 0.0;
    for (std::size_t m = 0; m < prog.rhs.size(); ++m) {
        double lhs = 0.0;
        for (const auto& [slot, a] : prog.terms[m]) lhs += a / x[slot];
        gamma = std::max(gamma, lhs / prog.rhs[m]);
    }
    double obj = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) obj += prog.cost[n] * x[n] * gamma;
    if (scaled) {
        scaled->resize(x.size());
        for (std::size_t n = 0; n < x.size(); ++n) (*scaled)[n] = x[n] * gamma;
    }
    return obj;
}

}  // namespace

// Exact maximization of the dual over one multiplier. With unit right-hand
// sides the derivative in coordinate m is
//   phi(v) = sum_n a_mn sqrt(c_n / (s_base_n + v a_mn)) - 1,
// strictly decreasing in v; the root (or zero) is found by bracketing plus
// safeguarded Newton.
double coordinate_root(const ArmProgram& eq, std::size_t m,
                       const std::vector<double>& s_base, double v_start) {
    const auto& terms = eq.terms[m];
    auto phi = [&](double v) {
        double acc = -1.0;
        for (const auto& [slot, a] : terms)
            acc += a * std::sqrt(eq.cost[slot] / std::max(s_base[slot] + v * a, kSFloor));
        return acc;
    };
    if (phi(0.0) <= 0.0) return 0.0;
    double lo = 0.0;
    double hi = std::max(v_start, 1e-12);
    for (int grow = 0; grow < 2200 && phi(hi) > 0.0; ++grow) {
        lo = hi;
        hi *= 4.0;
    }
    double r = std::clamp(v_start, lo, hi);
    for (int it = 0; it < 100; ++it) {
        const double f = phi(r);
        if (f > 0.0)
            lo = r;
        else
            hi = r;
        if (std::abs(f) <= 1e-14 || hi - lo <= 1e-15 * (1.0 + hi)) break;
        double dphi = 0.0;
        for (const auto& [slot, a] : terms) {
            const double s = std::max(s_base[slot] + r * a, kSFloor);
            dphi -= 0.5 * a * a * std::sqrt(eq.cost[slot]) / (s * std::sqrt(s));
        }
        double next = dphi < 0.0 ? r - f / dphi : 0.5 * (lo + hi);
        if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
        r = next;
    }
    return r;
}

// Active-set Newton step on the equilibrated dual; accepted only if it
// improves the dual value. Returns true when lambda moved.
bool newton_polish(const ArmProgram& eq, std::vector<double>& lambda, DualState& st) {
    const std::size_t v = eq.vars.size();
    const std::size_t c = eq.rhs.size();
    double max_l = 0.0;
    for (double l : lambda) max_l = std::max(max_l, l);
    std::vector<int> act;
    for (std::size_t m = 0; m < c; ++m)
        if (lambda[m] > 1e-13 * max_l || st.grad[m] > 0.0) act.push_back(static_cast<int>(m));
    if (act.empty()) return false;
    const std::size_t na = act.size();
    std::vector<std::vector<double>> hess(na, std::vector<double>(na, 0.0));
    std::vector<double> rhs(na);
    for (std::size_t i = 0; i < na; ++i) rhs[i] = st.grad[act[i]];
    std::vector<double> coef(v);
    for (std::size_t n = 0; n < v; ++n)
        coef[n] = 1.0 / (2.0 * eq.cost[n] * st.x[n] * st.x[n] * st.x[n]);
    std::vector<double> arow(v, 0.0);
    for (std::size_t i = 0; i < na; ++i) {
        std::fill(arow.begin(), arow.end(), 0.0);
        for (const auto& [slot, a] : eq.terms[act[i]]) arow[slot] = a;
        for (std::size_t j = i; j < na; ++j) {
            double acc = 0.0;
            for (const auto& [slot, a] : eq.terms[act[j]]) acc += arow[slot] * a * coef[slot];
            hess[i][j] = acc;
            hess[j][i] = acc;
        }
        hess[i][i] *= 1.0 + 1e-13;
    }
    std::vector<double> step;
    if (!solve_linear(hess, rhs, step)) return false;
    std::vector<double> trial(c);
    double alpha = 1.0;
    for (int bt = 0; bt < 40; ++bt, alpha *= 0.5) {
        trial = lambda;
        for (std::size_t i = 0; i < na; ++i)
            trial[act[i]] = std::max(0.0, lambda[act[i]] + alpha * step[i]);
        DualState ts;
        eval_dual(eq, trial, ts);
        if (ts.h > st.h) {
            lambda.swap(trial);
            st = std::move(ts);
            return true;
        }
    }
    return false;
}

ArmSolution solve_arm_dual(const ArmProgram& prog) {
    ArmSolution sol;
    const std::size_t v = prog.vars.size();
    const std::size_t c = prog.rhs.size();
    if (v == 0) return sol;

    // Equilibrate to unit right-hand sides; the primal point is unchanged and
    // the original multipliers are lambda_m / rhs_m.
    ArmProgram eq = prog;
    for (std::size_t m = 0; m < c; ++m) {
        for (auto& term : eq.terms[m]) term.second /= prog.rhs[m];
        eq.rhs[m] = 1.0;
    }

    // Uniform start at the exact one-dimensional optimum of h(t * ones):
    // t = (sum_n sqrt(c_n A_n) / C)^2 with A_n the constraint column sums.
    std::vector<double> col_sum(v, 0.0);
    for (std::size_t m = 0; m < c; ++m)
        for (const auto& [slot, a] : eq.terms[m]) col_sum[slot] += a;
    double root_sum = 0.0;
    for (std::size_t n = 0; n < v; ++n) root_sum += std::sqrt(eq.cost[n] * col_sum[n]);
    const double t0 = root_sum / static_cast<double>(c);
    std::vector<double> lambda(c, std::max(t0 * t0, 1e-300));

    DualState st;
    eval_dual(eq, lambda, st);

    const long iter_cap = 100000;
    const double gap_tol = 1e-12;
    std::vector<double> best_x, s_base(v);
    long iter = 0;
    double primal = feasible_primal(eq, st.x, &best_x);

    while (iter < iter_cap) {
        if (primal - st.h <= gap_tol * std::max(1.0, std::abs(primal))) break;
        // One sweep of exact coordinate ascent.
        for (std::size_t m = 0; m < c; ++m, ++iter) {
            std::fill(s_base.begin(), s_base.end(), 0.0);
            for (std::size_t m2 = 0; m2 < c; ++m2) {
                if (m2 == m) continue;
                for (const auto& [slot, a] : eq.terms[m2]) s_base[slot] += lambda[m2] * a;
            }
            lambda[m] = coordinate_root(eq, m, s_base, lambda[m]);
        }
        eval_dual(eq, lambda, st);
        newton_polish(eq, lambda, st);
        primal = feasible_primal(eq, st.x, &best_x);
    }

    primal = feasible_primal(eq, st.x, &best_x);
    const double gap = primal - st.h;
    if (gap > 1e-8 * std::max(1.0, std::abs(primal)))
        throw std::runtime_error(
            "oracle: solver failed to converge within iteration cap (relative residual " +
            std::to_string(gap / std::max(1.0, std::abs(primal))) + ")");

    sol.x = best_x;
    sol.objective = primal;
    sol.iterations = iter + 1;
    // Feasibility of the returned scaled point is ~0 by construction; report
    // the complementarity of the returned point (invariant under the
    // equilibration).
    double resid = 0.0;
    for (std::size_t m = 0; m < c; ++m) {
        double lhs = 0.0;
        for (const auto& [slot, a] : eq.terms[m]) lhs += a / sol.x[slot];
        resid = std::max(resid, lhs - 1.0);
        resid = std::max(resid,
                         std::abs(lambda[m] * (lhs - 1.0)) / std::max(1.0, std::abs(primal)));
    }
    sol.kkt_residual = std::max(resid, 0.0);
    return sol;
}

}  // namespace cbsim::detail

namespace cbsim::oracle {

OracleResult solve_allocation(const Matrix& objective, const Matrix& delta,
                              const WeightMatrix& weights, const Mask& cmask,
                              const Mask& vmask) {
    return solve_with(objective, delta, weights, cmask, vmask, detail::solve_arm_dual);
}

OracleResult solve_relaxed(const Matrix& delta, const WeightMatrix& weights) {
    const Mask all = full_mask(delta.rows(), delta.cols());
    return solve_allocation(delta, delta, weights, all, all);
}

OracleResult solve_lower_bound(const GapSummary& gaps, const WeightMatrix& weights) {
    const Mask cmask = full_mask(gaps.tilde_delta.rows(), gaps.tilde_delta.cols());
    return solve_allocation(gaps.tilde_delta, gaps.tilde_delta, weights, cmask,
                            lower_bound_vmask(gaps));
}

OracleResult solve_sample_complexity(const GapSummary& gaps, const WeightMatrix& weights) {
    const int k_arms = gaps.tilde_delta.rows();
    const int m_agents = gaps.tilde_delta.cols();
    Mask cmask(k_arms, m_agents, true);
    for (int m = 0; m < m_agents; ++m) cmask.set(gaps.best_arm[m], m, false);
    return solve_allocation(ones_like(gaps.tilde_delta), gaps.tilde_delta, weights, cmask,
                            lower_bound_vmask(gaps));
}

double complexity_value(const Matrix& allocation, const Matrix& delta) {
    if (!allocation.same_shape(delta))
        throw std::invalid_argument("complexity_value: shape mismatch");
    double acc = 0.0;
    for (int k = 0; k < allocation.rows(); ++k)
        for (int m = 0; m < allocation.cols(); ++m) acc += allocation(k, m) * delta(k, m);
    return acc;
}

double check_feasibility(const Matrix& allocation, const Matrix& delta,
                         const WeightMatrix& weights, const std::vector<int>* exclude_best) {
    if (!allocation.same_shape(delta) || allocation.cols() != weights.agents())
        throw std::invalid_argument("check_feasibility: shape mismatch");
    if (exclude_best && static_cast<int>(exclude_best->size()) != allocation.cols())
        throw std::invalid_argument("check_feasibility: best-arm vector size mismatch");
    double worst = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < allocation.rows(); ++k)
        for (int m = 0; m < allocation.cols(); ++m) {
            double lhs = 0.0;
            for (int n = 0; n < allocation.cols(); ++n) {
                if (exclude_best && (*exclude_best)[n] == k) continue;
                const double w = weights(n, m);
                if (w == 0.0) continue;
                lhs += w * w / allocation(k, n);
            }
            worst = std::max(worst, lhs - delta(k, m) * delta(k, m) / 2.0);
        }
    return worst;
}

OracleResult solve_reference(const Matrix& objective, const Matrix& delta,
                             const WeightMatrix& weights, const Mask& cmask,
                             const Mask& vmask) {
    if (static_cast<long>(delta.rows()) * delta.cols() > 16)
        throw std::invalid_argument("solve_reference: instance too large (K*M > 16)");
    return solve_with(objective, delta, weights, cmask, vmask,
                      [](const ArmProgram& p) { return detail::solve_arm_grid(p); });
}

OracleResult reference_relaxed(const Matrix& delta, const WeightMatrix& weights) {
    const Mask all = full_mask(delta.rows(), delta.cols());
    return solve_reference(delta, delta, weights, all, all);
}

OracleResult reference_lower_bound(const GapSummary& gaps, const WeightMatrix& weights) {
    const Mask cmask = full_mask(gaps.tilde_delta.rows(), gaps.tilde_delta.cols());
    return solve_reference(gaps.tilde_delta, gaps.tilde_delta, weights, cmask,
                           lower_bound_vmask(gaps));
}

OracleResult reference_sample_complexity(const GapSummary& gaps, const WeightMatrix& weights) {
    const int k_arms = gaps.tilde_delta.rows();
    const int m_agents = gaps.tilde_delta.cols();
    Mask cmask(k_arms, m_agents, true);
    for (int m = 0; m < m_agents; ++m) cmask.set(gaps.best_arm[m], m, false);
    return solve_reference(ones_like(gaps.tilde_delta), gaps.tilde_delta, weights, cmask,
                           lower_bound_vmask(gaps));
}

}  // namespace cbsim::oracle
