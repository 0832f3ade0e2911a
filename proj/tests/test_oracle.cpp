#include <cmath>
#include <stdexcept>

#include <doctest.h>

#include "cbsim/model.hpp"
#include "cbsim/oracle.hpp"
#include "cbsim/rng.hpp"
#include "test_util.hpp"

using namespace cbsim;
using oracle::OracleResult;

namespace {

WeightMatrix single_agent() { return WeightMatrix(Matrix::from_rows({{1.0}})); }

// Random gap matrix with entries in [lo, hi].
Matrix random_gaps(int arms, int agents, std::uint64_t seed, double lo = 0.1, double hi = 2.0) {
    UniformStream stream(seed);
    Matrix d(arms, agents);
    for (int k = 0; k < arms; ++k)
        for (int m = 0; m < agents; ++m) d(k, m) = stream.next_uniform(lo, hi);
    return d;
}

}  // namespace

TEST_SUITE("oracle") {

TEST_CASE("single-agent relaxed program has the closed form q = 2 / gap^2") {
    const Matrix delta = Matrix::from_rows({{0.5}, {0.5}});
    const OracleResult res = oracle::solve_relaxed(delta, single_agent());
    CHECK(res.allocation(0, 0) == doctest::Approx(8.0).epsilon(1e-6));
    CHECK(res.allocation(1, 0) == doctest::Approx(8.0).epsilon(1e-6));
    CHECK(res.objective_value == doctest::Approx(8.0).epsilon(1e-8));
    CHECK(res.kkt_residual <= 1e-8);
}

TEST_CASE("symmetric two-agent program is solved exactly") {
    const WeightMatrix w(Matrix::from_rows({{0.5, 0.5}, {0.5, 0.5}}));
    const Matrix delta(2, 2, 0.5);
    const OracleResult res = oracle::solve_relaxed(delta, w);
    for (int k = 0; k < 2; ++k)
        for (int m = 0; m < 2; ++m)
            CHECK(res.allocation(k, m) == doctest::Approx(4.0).epsilon(1e-6));
    CHECK(res.objective_value == doctest::Approx(8.0).epsilon(1e-8));
}

TEST_CASE("doubling gaps halves the objective and quarters the allocation") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const BanditInstance inst = testing::random_instance(3, 3, seed);
        const Matrix delta = random_gaps(3, 3, seed + 90);
        Matrix doubled = delta;
        for (int k = 0; k < 3; ++k)
            for (int m = 0; m < 3; ++m) doubled(k, m) *= 2.0;
        const OracleResult a = oracle::solve_relaxed(delta, inst.weights);
        const OracleResult b = oracle::solve_relaxed(doubled, inst.weights);
        CHECK(b.objective_value == doctest::Approx(a.objective_value / 2.0).epsilon(1e-8));
        for (int k = 0; k < 3; ++k)
            for (int m = 0; m < 3; ++m)
                CHECK(b.allocation(k, m) ==
                      doctest::Approx(a.allocation(k, m) / 4.0).epsilon(1e-8));
    }
}

TEST_CASE("general homogeneity in the scale factor") {
    for (std::uint64_t seed = 40; seed < 44; ++seed) {
        const BanditInstance inst = testing::random_instance(2, 3, seed);
        const Matrix delta = random_gaps(2, 3, seed);
        UniformStream stream(seed * 31);
        const double t = stream.next_uniform(0.1, 10.0);
        Matrix scaled = delta;
        for (int k = 0; k < 2; ++k)
            for (int m = 0; m < 3; ++m) scaled(k, m) *= t;
        const OracleResult a = oracle::solve_relaxed(delta, inst.weights);
        const OracleResult b = oracle::solve_relaxed(scaled, inst.weights);
        CHECK(b.objective_value == doctest::Approx(a.objective_value / t).epsilon(1e-8));
        for (int k = 0; k < 2; ++k)
            for (int m = 0; m < 3; ++m)
                CHECK(b.allocation(k, m) ==
                      doctest::Approx(a.allocation(k, m) / (t * t)).epsilon(1e-8));
    }
}

TEST_CASE("single-agent lower bound excludes the best arm variable") {
    BanditInstance inst;
    inst.arms = 2;
    inst.agents = 1;
    inst.sigma = 1.0;
    inst.weights = single_agent();
    inst.mu = Matrix::from_rows({{1.0}, {0.5}});
    const GapSummary gaps = gap_summary(inst);
    const OracleResult res = oracle::solve_lower_bound(gaps, inst.weights);
    CHECK(res.objective_value == doctest::Approx(4.0).epsilon(1e-6));
    CHECK(res.allocation(0, 0) == 0.0);  // best arm: not a decision variable
    CHECK(res.allocation(1, 0) == doctest::Approx(8.0).epsilon(1e-6));
    CHECK(res.has_excluded_entries);

    const OracleResult relaxed = oracle::solve_relaxed(gaps.tilde_delta, inst.weights);
    CHECK(res.objective_value <= relaxed.objective_value * (1.0 + 1e-9));
    CHECK(relaxed.objective_value <= 4.0 * res.objective_value * (1.0 + 1e-9));
    CHECK(relaxed.objective_value == doctest::Approx(8.0).epsilon(1e-6));
}

TEST_CASE("common best arm leaves vacuous constraints and a finite value") {
    const BanditInstance inst = testing::separated_instance();
    const GapSummary gaps = gap_summary(inst);
    const OracleResult res = oracle::solve_lower_bound(gaps, inst.weights);
    CHECK(std::isfinite(res.objective_value));
    CHECK(res.objective_value == doctest::Approx(4.0).epsilon(1e-6));
    CHECK(res.allocation(0, 0) == 0.0);
    CHECK(res.allocation(0, 1) == 0.0);
}

TEST_CASE("single-agent sample complexity closed form") {
    BanditInstance inst;
    inst.arms = 2;
    inst.agents = 1;
    inst.sigma = 1.0;
    inst.weights = single_agent();
    inst.mu = Matrix::from_rows({{1.0}, {0.5}});
    const GapSummary gaps = gap_summary(inst);
    const OracleResult res = oracle::solve_sample_complexity(gaps, inst.weights);
    CHECK(res.objective_value == doctest::Approx(8.0).epsilon(1e-6));
}

TEST_CASE("sample complexity scales inversely with squared gaps") {
    for (std::uint64_t seed = 60; seed < 64; ++seed) {
        BanditInstance inst = testing::random_instance(3, 2, seed);
        const GapSummary gaps = gap_summary(inst);
        const double s1 = oracle::solve_sample_complexity(gaps, inst.weights).objective_value;
        // Doubling every local mean doubles every mixed gap.
        BanditInstance wide = inst;
        for (int k = 0; k < inst.arms; ++k)
            for (int m = 0; m < inst.agents; ++m)
                wide.mu(k, m) = 2.0 * inst.mu(k, m);
        const GapSummary gaps2 = gap_summary(wide);
        const double s2 = oracle::solve_sample_complexity(gaps2, wide.weights).objective_value;
        CHECK(s2 == doctest::Approx(s1 / 4.0).epsilon(1e-8));
    }
}

TEST_CASE("sandwich and sample bounds hold on random instances") {
    for (std::uint64_t seed = 200; seed < 230; ++seed) {
        const int arms = 2 + static_cast<int>(seed % 3);
        const int agents = 2 + static_cast<int>((seed / 3) % 3);
        const BanditInstance inst = testing::random_instance(arms, agents, seed);
        const GapSummary gaps = gap_summary(inst);
        const double c_star =
            oracle::solve_lower_bound(gaps, inst.weights).objective_value;
        const double c_tilde =
            oracle::solve_relaxed(gaps.tilde_delta, inst.weights).objective_value;
        const double s_star =
            oracle::solve_sample_complexity(gaps, inst.weights).objective_value;
        CHECK(c_star <= c_tilde * (1.0 + 1e-6));
        CHECK(c_tilde <= 4.0 * c_star * (1.0 + 1e-6));
        CHECK(s_star <= 4.0 * c_star / gaps.delta_min * (1.0 + 1e-6));
    }
}

TEST_CASE("returned allocations satisfy every constraint") {
    for (std::uint64_t seed = 300; seed < 310; ++seed) {
        const BanditInstance inst = testing::random_instance(3, 3, seed);
        const Matrix delta = random_gaps(3, 3, seed);
        const OracleResult res = oracle::solve_relaxed(delta, inst.weights);
        CHECK(oracle::check_feasibility(res.allocation, delta, inst.weights) <= 1e-10);
        CHECK(res.kkt_residual <= 1e-8);
        CHECK(res.objective_value ==
              doctest::Approx(oracle::complexity_value(res.allocation, delta)).epsilon(1e-10));
    }
}

TEST_CASE("complexity value is plain arithmetic") {
    CHECK(oracle::complexity_value(Matrix(2, 1, 8.0), Matrix(2, 1, 0.5)) ==
          doctest::Approx(8.0));
    CHECK(oracle::complexity_value(Matrix(2, 2, 4.0), Matrix(2, 2, 0.5)) ==
          doctest::Approx(8.0));
    CHECK(oracle::complexity_value(Matrix(3, 2, 0.37), Matrix(3, 2, 1.1)) > 0.0);
    CHECK_THROWS_AS(oracle::complexity_value(Matrix(2, 2, 1.0), Matrix(2, 1, 1.0)),
                    std::invalid_argument);
}

TEST_CASE("feasibility check reports the worst constraint slack") {
    const WeightMatrix w = single_agent();
    const Matrix delta(1, 1, 0.5);
    CHECK(oracle::check_feasibility(Matrix(1, 1, 8.0), delta, w) == 0.0);
    CHECK(oracle::check_feasibility(Matrix(1, 1, 16.0), delta, w) ==
          doctest::Approx(-0.0625));
    CHECK(oracle::check_feasibility(Matrix(1, 1, 4.0), delta, w) == doctest::Approx(0.125));
}

TEST_CASE("nonpositive gaps are a domain error") {
    Matrix delta(2, 1, 0.5);
    delta(1, 0) = 0.0;
    CHECK_THROWS_AS(oracle::solve_relaxed(delta, single_agent()), std::domain_error);
    delta(1, 0) = -0.3;
    CHECK_THROWS_AS(oracle::solve_relaxed(delta, single_agent()), std::domain_error);
    delta(1, 0) = 1e-13;
    CHECK_THROWS_AS(oracle::solve_relaxed(delta, single_agent()), std::domain_error);
}

TEST_CASE("agents with zero influence are excluded from the decision set") {
    // Agent 2's rewards carry no weight for anyone, so no allocation program
    // ever needs its pulls.
    const WeightMatrix w(Matrix::from_rows({{1.0, 1.0}, {0.0, 0.0}}));
    const Matrix delta(2, 2, 0.5);
    const OracleResult res = oracle::solve_relaxed(delta, w);
    CHECK(res.has_excluded_entries);
    for (int k = 0; k < 2; ++k) {
        CHECK(res.allocation(k, 1) == 0.0);
        CHECK(res.allocation(k, 0) == doctest::Approx(8.0).epsilon(1e-6));
    }
    CHECK(res.objective_value == doctest::Approx(8.0).epsilon(1e-6));
}

TEST_CASE("per-arm separability: joint and arm-by-arm solves agree") {
    for (std::uint64_t seed = 400; seed < 404; ++seed) {
        const BanditInstance inst = testing::random_instance(3, 2, seed);
        const Matrix delta = random_gaps(3, 2, seed);
        const OracleResult joint = oracle::solve_relaxed(delta, inst.weights);
        double sum = 0.0;
        for (int k = 0; k < 3; ++k) {
            const Matrix row = Matrix::from_rows({{delta(k, 0), delta(k, 1)}});
            sum += oracle::solve_relaxed(row, inst.weights).objective_value;
        }
        CHECK(sum == doctest::Approx(joint.objective_value).epsilon(1e-10));
    }
}

TEST_CASE("reference solver reproduces the closed forms") {
    const Matrix delta = Matrix::from_rows({{0.5}, {0.5}});
    const OracleResult ref = oracle::reference_relaxed(delta, single_agent());
    CHECK(ref.objective_value == doctest::Approx(8.0).epsilon(1e-4));

    const WeightMatrix w(Matrix::from_rows({{0.5, 0.5}, {0.5, 0.5}}));
    const OracleResult sym = oracle::reference_relaxed(Matrix(2, 2, 0.5), w);
    CHECK(sym.objective_value == doctest::Approx(8.0).epsilon(1e-4));

    BanditInstance inst;
    inst.arms = 2;
    inst.agents = 1;
    inst.sigma = 1.0;
    inst.weights = single_agent();
    inst.mu = Matrix::from_rows({{1.0}, {0.5}});
    const GapSummary gaps = gap_summary(inst);
    CHECK(oracle::reference_lower_bound(gaps, inst.weights).objective_value ==
          doctest::Approx(4.0).epsilon(1e-4));
}

TEST_CASE("main solver agrees with the brute-force reference") {
    for (std::uint64_t seed = 500; seed < 512; ++seed) {
        const int arms = 2 + static_cast<int>(seed % 2);
        const int agents = 2 + static_cast<int>(seed % 3);
        const BanditInstance inst = testing::random_instance(arms, agents, seed);
        const GapSummary gaps = gap_summary(inst);
        const double main_obj =
            oracle::solve_relaxed(gaps.tilde_delta, inst.weights).objective_value;
        const double ref_obj =
            oracle::reference_relaxed(gaps.tilde_delta, inst.weights).objective_value;
        CHECK(main_obj == doctest::Approx(ref_obj).epsilon(1e-4));
        const double main_lb = oracle::solve_lower_bound(gaps, inst.weights).objective_value;
        const double ref_lb =
            oracle::reference_lower_bound(gaps, inst.weights).objective_value;
        CHECK(main_lb == doctest::Approx(ref_lb).epsilon(1e-4));
    }
}

TEST_CASE("reference solver rejects oversized programs") {
    const BanditInstance inst = testing::random_instance(5, 4, 7);
    CHECK_THROWS_AS(oracle::reference_relaxed(Matrix(5, 4, 0.5), inst.weights),
                    std::invalid_argument);
}

TEST_CASE("oracle cost under perturbed gaps stays within the stated factor") {
    for (std::uint64_t seed = 600; seed < 620; ++seed) {
        const BanditInstance inst = testing::random_instance(3, 2, seed);
        const GapSummary gaps = gap_summary(inst);
        UniformStream stream(seed * 17 + 3);
        const double a = stream.next_uniform(0.3, 1.4);
        const double b = stream.next_uniform(a + 0.05, 3.0);
        Matrix perturbed = gaps.tilde_delta;
        for (int k = 0; k < 3; ++k)
            for (int m = 0; m < 2; ++m) perturbed(k, m) *= stream.next_uniform(a, b);
        const OracleResult exact = oracle::solve_relaxed(gaps.tilde_delta, inst.weights);
        const OracleResult approx = oracle::solve_relaxed(perturbed, inst.weights);
        const double c = exact.objective_value;
        const double c_hat = oracle::complexity_value(approx.allocation, gaps.tilde_delta);
        CHECK(c_hat <= (b / (a * a * a)) * c + 1e-6);
    }
}

}  // TEST_SUITE
