#include <cmath>
#include <memory>
#include <stdexcept>

#include <doctest.h>

#include "cbsim/cexp2.hpp"
#include "cbsim/confidence.hpp"
#include "cbsim/sim.hpp"
#include "test_util.hpp"

using namespace cbsim;

TEST_SUITE("cexp2") {

TEST_CASE("gap projection clamps onto the loglog interval") {
    const long horizon = 1619;  // log log T very close to 2
    const double upper = std::log(std::log(static_cast<double>(horizon)));
    CHECK(upper == doctest::Approx(2.0).epsilon(1e-3));
    const Matrix raw = Matrix::from_rows({{0.5}, {0.1}, {5.0}});
    const Matrix out = project_gaps(raw, horizon);
    CHECK(out(0, 0) == 0.5);  // interior point untouched
    CHECK(out(1, 0) == doctest::Approx(1.0 / upper));
    CHECK(out(2, 0) == doctest::Approx(upper));
}

TEST_CASE("projection interval requires a horizon of at least 16") {
    CHECK_THROWS_AS(project_gaps(Matrix(1, 1, 0.5), 15), std::invalid_argument);
    CHECK_NOTHROW(project_gaps(Matrix(1, 1, 0.5), 16));
}

TEST_CASE("guided targets apply the ceiling and the initial-pull floor") {
    // Single agent: the oracle allocation is exactly 2 / gap^2.
    const WeightMatrix w(Matrix::from_rows({{1.0}}));
    const long horizon = 100000;
    const long tau1 = initial_pulls_per_arm(horizon);
    const Matrix gaps = Matrix::from_rows({{0.5}, {0.5}});
    const Matrix targets = guided_allocation(gaps, w, horizon);
    const double bound = horizon_bound(2, 1, horizon);
    const double expected = std::max(static_cast<double>(tau1),
                                     std::ceil(18.0 * 8.0 * bound));
    CHECK(targets(0, 0) == expected);
    CHECK(targets(1, 0) == expected);
    // Large gaps push the oracle allocation to zero pulls per log-horizon;
    // the floor keeps every target at tau1.
    const Matrix wide = guided_allocation(Matrix::from_rows({{2.0}, {2.0}}), w, 20);
    CHECK(wide(0, 0) >= initial_pulls_per_arm(20));
}

TEST_CASE("switch condition is a strict all-pairs comparison") {
    const Matrix gaps(2, 2, 0.5);
    CHECK(switch_condition(gaps, Matrix(2, 2, 0.1)));
    Matrix omega(2, 2, 0.1);
    omega(1, 1) = 0.25;  // equal to gap/2: strict comparison fails
    CHECK_FALSE(switch_condition(gaps, omega));
    CHECK_FALSE(switch_condition(gaps, Matrix(2, 2, 0.3)));
}

TEST_CASE("initial exploration is a fixed round robin") {
    CExp2Policy policy(3, 2, WeightMatrix(Matrix::from_rows(
                                  {{0.5, 0.5}, {0.5, 0.5}})),
                       1.0, 100000);
    policy.begin(nullptr);
    CHECK(policy.choose_arm(0, 1) == 0);
    CHECK(policy.choose_arm(1, 1) == 0);
    CHECK(policy.choose_arm(0, 2) == 1);
    CHECK(policy.choose_arm(0, 3) == 2);
    CHECK(policy.choose_arm(0, 4) == 0);
    CHECK(policy.tau1() == initial_pulls_per_arm(100000));
}

TEST_CASE("pull counts reach the guided targets") {
    const BanditInstance inst = testing::separated_instance();
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        CExp2Policy policy(2, 2, inst.weights, 1.0, 100000);
        const RunTrace tr = run_policy(Environment{inst, seed}, policy, "cexp2", 100000);
        REQUIRE_FALSE(tr.aborted);
        if (policy.phase() == Phase::Exploit) {
            const Matrix& targets = policy.guided_targets();
            for (int k = 0; k < 2; ++k)
                for (int m = 0; m < 2; ++m) CHECK(policy.pull_counts()(k, m) >= targets(k, m));
        }
    }
}

TEST_CASE("projected gap estimates stay within constant factors in the high-confidence regime") {
    // Small noise stands in for a large horizon: the initial exploration
    // radii are well below a quarter of the true gaps.
    const BanditInstance inst = testing::separated_instance(0.05);
    int checked = 0;
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        CExp2Policy policy(2, 2, inst.weights, inst.sigma, 100000);
        const RunTrace tr = run_policy(Environment{inst, seed}, policy, "cexp2", 100000);
        if (!tr.event_e) continue;  // property is claimed under the confidence event only
        ++checked;
        const Matrix& projected = policy.projected_gaps_used();
        for (int k = 0; k < 2; ++k)
            for (int m = 0; m < 2; ++m) {
                CHECK(projected(k, m) >= 0.5 * 0.5 - 1e-12);
                CHECK(projected(k, m) <= 1.5 * 0.5 + 1e-12);
            }
    }
    CHECK(checked >= 35);
}

TEST_CASE("exploit commits to the true best arm under the horizon event") {
    const BanditInstance inst = testing::separated_instance();
    int exploits = 0;
    for (std::uint64_t seed = 100; seed < 140; ++seed) {
        const RunTrace tr = run_experiment(Environment{inst, seed}, "cexp2", 100000);
        REQUIRE_FALSE(tr.aborted);
        if (tr.entered_exploit) {
            ++exploits;
            if (tr.event_b) {
                CHECK(tr.final_arms[0] == 0);
                CHECK(tr.final_arms[1] == 0);
            }
        }
        // Phase transitions only ever move forward.
        int last = -1;
        for (const PhaseMark& mark : tr.phase_marks) {
            CHECK(static_cast<int>(mark.phase) > last);
            last = static_cast<int>(mark.phase);
        }
    }
    CHECK(exploits >= 35);
}

TEST_CASE("a run that exploits communicates exactly twice") {
    const BanditInstance inst = testing::separated_instance();
    for (std::uint64_t seed = 200; seed < 210; ++seed) {
        const RunTrace tr = run_experiment(Environment{inst, seed}, "cexp2", 100000);
        if (tr.entered_exploit) CHECK(tr.communication_rounds() == 2);
    }
}

TEST_CASE("tiny gaps force the switch to the fallback policy") {
    BanditInstance inst = testing::separated_instance();
    inst.mu = Matrix::from_rows({{0.52, 0.52}, {0.5, 0.5}});  // gap 0.02
    int fallbacks = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const RunTrace tr = run_experiment(Environment{inst, seed}, "cexp2", 100000);
        REQUIRE_FALSE(tr.aborted);
        if (tr.entered_fallback) {
            ++fallbacks;
            CHECK(tr.cond_c_evaluated);
            CHECK_FALSE(tr.cond_c);
            CHECK(tr.communication_rounds() >= 2);
        }
    }
    CHECK(fallbacks == 5);
}

TEST_CASE("a custom fallback policy handle is honored after the switch") {
    BanditInstance inst = testing::separated_instance();
    inst.mu = Matrix::from_rows({{0.52, 0.52}, {0.5, 0.5}});  // forces the switch
    CExp2Policy policy(2, 2, inst.weights, 1.0, 100000,
                       [] { return std::make_unique<FixedArmPolicy>(std::vector<int>{1, 1}); });
    const RunTrace tr = run_policy(Environment{inst, 4}, policy, "cexp2", 100000);
    REQUIRE_FALSE(tr.aborted);
    CHECK(tr.entered_fallback);
    CHECK(tr.final_arms == std::vector<int>{1, 1});
    CHECK(tr.communication_rounds() == 2);  // the stand-in policy never communicates
}

TEST_CASE("determinism: identical seeds produce identical decisions") {
    const BanditInstance inst = testing::separated_instance();
    const RunTrace a = run_experiment(Environment{inst, 77}, "cexp2", 50000);
    const RunTrace b = run_experiment(Environment{inst, 77}, "cexp2", 50000);
    CHECK(a.final_regret == b.final_regret);
    CHECK(a.final_arms == b.final_arms);
    CHECK(a.communication_rounds() == b.communication_rounds());
    CHECK(a.cond_c == b.cond_c);
}

TEST_CASE("horizon too small for the projection interval is rejected") {
    CHECK_THROWS_AS(CExp2Policy(2, 2, testing::separated_instance().weights, 1.0, 10),
                    std::invalid_argument);
}

}  // TEST_SUITE
