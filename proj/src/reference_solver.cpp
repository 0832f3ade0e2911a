#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "arm_program.hpp"
#include "cbsim/rng.hpp"

namespace cbsim::detail {

namespace {

// Scale-normalized objective: any positive point, pushed onto the constraint
// boundary by the worst violation ratio, is feasible; the minimum over
// directions equals the program optimum. This makes the grid search
// one dimension smaller and every evaluated candidate exactly boundary-tight.
double boundary_objective(const ArmProgram& prog, const std::vector<double>& x, double& gamma) {
    gamma = 0.0;
    for (std::size_t m = 0; m < prog.rhs.size(); ++m) {
        double lhs = 0.0;
        for (const auto& [slot, a] : prog.terms[m]) lhs += a / x[slot];
        gamma = std::max(gamma, lhs / prog.rhs[m]);
    }
    double lin = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) lin += prog.cost[n] * x[n];
    return lin * gamma;
}

}  // namespace

ArmSolution solve_arm_grid(const ArmProgram& prog, double rel_tol) {
    ArmSolution sol;
    const std::size_t v = prog.vars.size();
    if (v == 0) return sol;

    // The first variable is pinned at 1; the search runs over the log-ratios
    // of the remaining variables. Offsets form a 5-point grid per axis,
    // halved whenever a pass keeps the incumbent.
    const std::size_t dims = v - 1;
    std::vector<double> incumbent(v, 1.0);
    double gamma = 0.0;
    double best = boundary_objective(prog, incumbent, gamma);
    long evals = 1;

    double width = std::log(1e4);
    const double min_width = 1e-6;
    const long pass_cap = 50000;

    std::vector<double> candidate(v, 1.0);
    std::vector<int> offsets(dims, 0);
    // The boundary-scaled objective has creases where the worst constraint
    // switches; random polling directions keep the pattern search from
    // wedging in a crease that no grid direction can descend.
    UniformStream polling(0x5eedULL + v * 131u + prog.rhs.size());
    std::vector<double> direction(dims, 0.0);
    for (long pass = 0; pass < pass_cap && dims > 0; ++pass) {
        bool improved = false;
        std::vector<double> best_point = incumbent;
        auto consider = [&](const std::vector<double>& point) {
            const double val = boundary_objective(prog, point, gamma);
            ++evals;
            if (val < best) {
                best = val;
                best_point = point;
                improved = true;
            }
        };
        std::fill(offsets.begin(), offsets.end(), -2);
        while (true) {
            for (std::size_t d = 0; d < dims; ++d)
                candidate[d + 1] = incumbent[d + 1] * std::exp(offsets[d] * width / 2.0);
            consider(candidate);
            std::size_t d = 0;
            for (; d < dims; ++d) {
                if (offsets[d] < 2) {
                    ++offsets[d];
                    break;
                }
                offsets[d] = -2;
            }
            if (d == dims) break;
        }
        const int polls = 16 + 8 * static_cast<int>(dims);
        for (int r = 0; r < polls; ++r) {
            double norm = 0.0;
            for (std::size_t d = 0; d < dims; ++d) {
                direction[d] = polling.next_uniform(-1.0, 1.0);
                norm += direction[d] * direction[d];
            }
            norm = std::sqrt(std::max(norm, 1e-300));
            for (double scale : {-1.0, -0.5, 0.5, 1.0}) {
                for (std::size_t d = 0; d < dims; ++d)
                    candidate[d + 1] =
                        incumbent[d + 1] * std::exp(scale * width * direction[d] / norm);
                consider(candidate);
            }
        }
        if (improved) {
            incumbent = best_point;
        } else {
            // A centered pass at this width changed nothing; done once the
            // grid is finer than the requested relative resolution.
            if (width <= min_width || width * width <= rel_tol) break;
            width /= 2.0;
        }
    }

    double final_gamma = 0.0;
    const double objective = boundary_objective(prog, incumbent, final_gamma);
    sol.x.resize(v);
    for (std::size_t n = 0; n < v; ++n) sol.x[n] = incumbent[n] * final_gamma;
    sol.objective = objective;
    sol.iterations = evals;
    double resid = 0.0;
    for (std::size_t m = 0; m < prog.rhs.size(); ++m) {
        double lhs = 0.0;
        for (const auto& [slot, a] : prog.terms[m]) lhs += a / sol.x[slot];
        resid = std::max(resid, (lhs - prog.rhs[m]) / prog.rhs[m]);
    }
    sol.kkt_residual = std::max(resid, 0.0);
    return sol;
}

}  // namespace cbsim::detail
