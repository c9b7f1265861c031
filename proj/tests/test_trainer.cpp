#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "additive/rng.hpp"
#include "additive/sq.hpp"
#include "additive/trainer.hpp"

using namespace additive;

namespace {

AdditiveTarget he3_target(int d, int M, std::uint64_t seed) {
    auto dirs = gen_directions(d, M, DirectionMode::canonical, seed);
    std::vector<HermiteSeries> links(static_cast<size_t>(M), HermiteSeries::basis(3));
    return make_target(std::move(dirs), std::move(links), 0.0);
}

ActivationSpec relu_spec() { return ActivationSpec{}; }

ActivationSpec poly3_spec() {
    return ActivationSpec{ActivationKind::randomized_poly, 3, 3, PolyNormalization::sqrt_i};
}

}  // namespace

TEST_CASE("eta schedule") {
    TrainSchedule s;
    s.T1 = 100;
    s.eta0 = 0.4;
    s.rule = StepRule::constant;
    CHECK(s.eta_at(0) == 0.4);
    CHECK(s.eta_at(99) == 0.4);
    s.rule = StepRule::anneal;  // T' defaults to T1/2
    CHECK(s.eta_at(49) == 0.4);
    CHECK(s.eta_at(50) == 0.4);
    CHECK(s.eta_at(100) == doctest::Approx(0.1));
    CHECK(s.eta_at(200) == doctest::Approx(0.025));
}

TEST_CASE("phase1_step") {
    SUBCASE("x parallel to w leaves the row unchanged") {
        auto net = init_network(1, 4, relu_spec(), 0.0, 1);
        const Eigen::VectorXd w0 = net.W.row(0).transpose();
        phase1_step(net, 3.0 * w0, 1.0, 0.1);
        CHECK((net.W.row(0).transpose() - w0).norm() < 1e-15);
    }
    SUBCASE("y = 0 leaves the network unchanged") {
        auto net = init_network(8, 4, relu_spec(), 0.0, 2);
        const RowMatrixXd w0 = net.W;
        Eigen::VectorXd x(4);
        x << 1.0, -2.0, 0.5, 0.25;
        phase1_step(net, x, 0.0, 0.1);
        CHECK(net.W == w0);
    }
    SUBCASE("hand-computed update at d=2") {
        auto net = init_network(1, 2, relu_spec(), 0.0, 3);
        net.W.row(0) << 1.0, 0.0;
        net.a(0) = 1.0;
        net.b(0) = 0.0;
        Eigen::VectorXd x(2);
        x << 1.0, 1.0;
        phase1_step(net, x, 1.0, 0.1);
        // pre-norm (1, 0.1), post-norm (0.995, 0.0995)
        CHECK(std::abs(net.W(0, 0) - 0.995) < 1e-3);
        CHECK(std::abs(net.W(0, 1) - 0.0995) < 1e-3);
        CHECK(std::abs(net.W.row(0).norm() - 1.0) < 1e-14);
    }
    SUBCASE("oversized steps are reported as non-finite") {
        auto net = init_network(1, 4, relu_spec(), 0.0, 4);
        Eigen::VectorXd x = net.W.row(0).transpose() + Eigen::VectorXd::Ones(4);
        CHECK_THROWS_WITH_AS(phase1_step(net, x, 1e308, 1e308),
                             doctest::Contains("non-finite"), std::runtime_error);
    }
}

TEST_CASE("run_phase1 basics") {
    const auto target = he3_target(8, 2, 0);

    SUBCASE("eta = 0 returns the initial network exactly") {
        auto net = init_network(16, 8, relu_spec(), 1.0, 5, BiasInit::uniform);
        const RowMatrixXd w0 = net.W;
        TrainSchedule s;
        s.T1 = 50;
        s.eta0 = 0.0;
        const auto res = run_phase1(std::move(net), target, s, 7);
        CHECK(res.net.W == w0);
        REQUIRE(res.trace.snapshots.size() == 2);
        CHECK(res.trace.times.front() == 0);
        CHECK(res.trace.times.back() == 50);
    }
    SUBCASE("same seed gives identical traces; snapshots respect cadence") {
        TrainSchedule s;
        s.T1 = 40;
        s.eta0 = 0.05;
        s.snapshot_every = 10;
        auto netA = init_network(8, 8, relu_spec(), 1.0, 6, BiasInit::uniform);
        auto netB = netA;
        const auto ra = run_phase1(std::move(netA), target, s, 9);
        const auto rb = run_phase1(std::move(netB), target, s, 9);
        REQUIRE(ra.trace.times == std::vector<long>{0, 10, 20, 30, 40});
        for (size_t i = 0; i < ra.trace.snapshots.size(); ++i)
            CHECK(ra.trace.snapshots[i] == rb.trace.snapshots[i]);
        CHECK(ra.net.W == rb.net.W);
    }
    SUBCASE("row norms stay unit over a full run") {
        TrainSchedule s;
        s.T1 = 2000;
        s.eta0 = 0.1;
        auto net = init_network(32, 8, relu_spec(), 1.0, 8, BiasInit::uniform);
        const auto res = run_phase1(std::move(net), target, s, 11);
        for (int j = 0; j < 32; ++j)
            CHECK(std::abs(res.net.W.row(j).norm() - 1.0) < 1e-10);
    }
}

TEST_CASE("correlation loss decouples neurons") {
    const auto target = he3_target(8, 2, 1);
    TrainSchedule s;
    s.T1 = 25;
    s.eta0 = 0.05;
    auto full = init_network(6, 8, poly3_spec(), 0.0, 12);
    auto isolated_source = full;
    const auto full_res = run_phase1(std::move(full), target, s, 13);
    for (int j = 0; j < 6; ++j) {
        NetworkState single = init_network(1, 8, poly3_spec(), 0.0, 12);
        single.W.row(0) = isolated_source.W.row(j);
        single.a(0) = isolated_source.a(j);
        single.b(0) = isolated_source.b(j);
        single.eps(0, 0) = isolated_source.eps(j, 0);
        const auto one = run_phase1(std::move(single), target, s, 13);
        CHECK(one.net.W.row(0) == full_res.net.W.row(j));
    }
}

TEST_CASE("single-task weak-to-strong recovery") {
    // d=16, p=3, M=1: online SGD with randomized-poly students localizes the
    // single direction. Qualitative dynamics check at desk scale.
    const auto target = he3_target(16, 1, 2);
    auto net = init_network(512, 16, poly3_spec(), 0.0, 21);
    TrainSchedule s;
    s.T1 = 50000;
    s.eta0 = 3e-4;
    s.rule = StepRule::constant;
    const auto res = run_phase1(std::move(net), target, s, 23);
    double best = -1.0;
    for (int j = 0; j < 512; ++j) best = std::max(best, res.trace.last()(j, 0));
    CHECK(best >= 0.9);
}

TEST_CASE("interphase_randomize") {
    auto net = init_network(4096, 16, relu_spec(), 0.0, 31);
    const RowMatrixXd w0 = net.W;

    SUBCASE("C_b = 0 keeps biases at zero and flips about half the rows") {
        interphase_randomize(net, 0.0, 33);
        CHECK(net.b.cwiseAbs().maxCoeff() == 0.0);
        int flipped = 0;
        for (int j = 0; j < net.J; ++j) {
            if (net.W.row(j) == -w0.row(j)) ++flipped;
            else CHECK(net.W.row(j) == w0.row(j));
            // sign flips preserve norms exactly
            CHECK(net.W.row(j).norm() == w0.row(j).norm());
        }
        const double frac = static_cast<double>(flipped) / net.J;
        CHECK(std::abs(frac - 0.5) <= 3.0 * 0.5 / std::sqrt(4096.0));
    }
    SUBCASE("biases land in [-C_b, C_b]") {
        interphase_randomize(net, 0.7, 35);
        CHECK(net.b.cwiseAbs().maxCoeff() <= 0.7);
        CHECK(net.b.cwiseAbs().maxCoeff() > 0.0);
    }
}

TEST_CASE("fit_second_layer") {
    SUBCASE("ridge with lambda = 0 interpolates an invertible 2x2 design") {
        auto net = init_network(2, 2, relu_spec(), 1.0, 41, BiasInit::uniform);
        SampleBatch batch;
        batch.xs.resize(2, 2);
        batch.xs << 1.5, -0.5, -0.25, 2.0;
        batch.ys.resize(2);
        batch.ys << 0.7, -0.3;
        const auto fit = fit_second_layer(net, batch, 2, 0.0);
        CHECK(fit.train_objective < 1e-16);
        for (int t = 0; t < 2; ++t) {
            const double pred = forward(fit.net, batch.xs.row(t).transpose());
            CHECK(pred == doctest::Approx(batch.ys(t)).epsilon(1e-8));
        }
    }
    SUBCASE("huge lambda drives a to zero and the objective to mean(y^2)") {
        const auto target = he3_target(8, 2, 3);
        auto net = init_network(16, 8, relu_spec(), 1.0, 43, BiasInit::uniform);
        const auto batch = sample_batch(target, 200, 45);
        const auto fit = fit_second_layer(net, batch, 2, 1e9);
        CHECK(fit.net.a.cwiseAbs().maxCoeff() < 1e-6);
        CHECK(fit.train_objective ==
              doctest::Approx(batch.ys.squaredNorm() / batch.ys.size()).epsilon(1e-4));
    }
    SUBCASE("ridge optimality: gradient norm below 1e-6 (1 + |a|)") {
        const auto target = he3_target(8, 2, 5);
        auto net = init_network(48, 8, relu_spec(), 1.0, 47, BiasInit::uniform);
        const auto batch = sample_batch(target, 300, 49);
        for (double lambda : {1e-4, 1e-2, 1.0}) {
            const auto fit = fit_second_layer(net, batch, 2, lambda);
            CHECK(fit.kkt_residual <= 1e-6 * (1.0 + fit.net.a.norm()));
        }
    }
    SUBCASE("lasso deactivates everything above the critical lambda") {
        const auto target = he3_target(8, 2, 7);
        auto net = init_network(24, 8, relu_spec(), 1.0, 51, BiasInit::uniform);
        const auto batch = sample_batch(target, 150, 53);
        // critical value: |(2/n) Phi^T y|_inf at a = 0
        double crit = 0.0;
        const int n = static_cast<int>(batch.xs.rows());
        for (int j = 0; j < net.J; ++j) {
            double acc = 0.0;
            for (int t = 0; t < n; ++t) {
                const double z = net.W.row(j).dot(batch.xs.row(t)) + net.b(j);
                acc += net.activation(j, z) / net.J * batch.ys(t);
            }
            crit = std::max(crit, std::abs(2.0 * acc / n));
        }
        const auto fit = fit_second_layer(net, batch, 1, crit * 1.01);
        CHECK(fit.net.a.cwiseAbs().maxCoeff() == 0.0);
        const auto active = fit_second_layer(net, batch, 1, crit * 0.5);
        CHECK(active.net.a.cwiseAbs().maxCoeff() > 0.0);
    }
    SUBCASE("objective sequence is non-increasing (lasso)") {
        const auto target = he3_target(8, 2, 9);
        auto net = init_network(32, 8, relu_spec(), 1.0, 55, BiasInit::uniform);
        const auto batch = sample_batch(target, 200, 57);
        const auto fit = fit_second_layer(net, batch, 1, 1e-3);
        REQUIRE(fit.objective_trace.size() >= 2);
        for (size_t i = 1; i < fit.objective_trace.size(); ++i)
            CHECK(fit.objective_trace[i] <= fit.objective_trace[i - 1] + 1e-12);
        CHECK(fit.kkt_residual < 1e-4);
    }
    SUBCASE("invalid arguments are rejected") {
        auto net = init_network(4, 4, relu_spec(), 0.0, 59);
        SampleBatch batch;
        batch.xs.resize(1, 4);
        batch.xs.setZero();
        batch.ys.resize(1);
        batch.ys.setZero();
        CHECK_THROWS(fit_second_layer(net, batch, 3, 0.1));
        CHECK_THROWS(fit_second_layer(net, batch, 2, -0.1));
    }
}

TEST_CASE("wide ridge falls back to conjugate gradient") {
    // J above the normal-equation cutoff exercises the matrix-free path.
    const auto target = he3_target(6, 2, 13);
    auto net = init_network(4100, 6, relu_spec(), 1.0, 67, BiasInit::uniform);
    const auto batch = sample_batch(target, 64, 69);
    const auto fit = fit_second_layer(net, batch, 2, 1e-3);
    CHECK(fit.kkt_residual <= 1e-6 * (1.0 + fit.net.a.norm()));
    CHECK(fit.iterations > 1);  // iterative route, not the direct solve
}

TEST_CASE("ntk baseline") {
    const auto target = he3_target(16, 4, 11);
    SUBCASE("eta = 0 does not move anything") {
        const auto res = run_ntk_baseline(64, 16, target, 100, 0.0, 61);
        CHECK(res.relative_movement == 0.0);
        CHECK((res.trace.last() - res.trace.first()).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("small steps stay lazy") {
        const auto res = run_ntk_baseline(512, 16, target, 20000, 1e-4, 63);
        CHECK(res.relative_movement < 0.05);
        CHECK((res.trace.last() - res.trace.first()).cwiseAbs().maxCoeff() < 0.1);
        // second layer moved: the model did train
        double drift = 0.0;
        for (int j = 0; j < res.net.J; ++j)
            drift = std::max(drift, std::abs(std::abs(res.net.a(j)) /
                                                 std::sqrt(512.0) - 1.0));
        CHECK(drift > 0.0);
    }
}

TEST_CASE("theoretical_schedule rate laws") {
    const auto plan = theoretical_schedule(64, 16, 3, 0.1);
    CHECK(plan.T11 == 16L * 64L * 64L);  // M d^{p-1}
    CHECK(plan.schedule.eta0 == doctest::Approx(1.0 / (4.0 * 512.0)));

    const auto doubled = theoretical_schedule(128, 16, 3, 0.1);
    CHECK(doubled.T11 == 4 * plan.T11);  // doubling d multiplies by 2^{p-1}

    const auto quad = theoretical_schedule(256, 16, 3, 0.1);
    CHECK(quad.schedule.eta0 == doctest::Approx(plan.schedule.eta0 / 8.0));

    CHECK(plan.schedule.T1 == plan.T11 + plan.T12 + plan.T13);
    CHECK(plan.eps_tilde == doctest::Approx(0.1 / 4.0));
    CHECK_THROWS(theoretical_schedule(16, 4, 2, 0.1));
}

TEST_CASE("alignment recursion sandwich over the randomized sweep") {
    RandomStream rng(71);
    int checked = 0;
    for (int rep = 0; rep < 100; ++rep) {
        const double a0 = rng.uniform(0.01, 0.3);
        const double c = std::pow(10.0, rng.uniform(-5.0, -2.0));
        const int p = 3 + static_cast<int>(rng.next_u64() % 3);
        const auto res = bihari_lasalle_bounds(a0, c, p, 3000);
        for (size_t t = 0; t < res.sequence.size(); ++t) {
            if (res.sequence[t] > 1.0) break;
            if (std::isfinite(res.lower[t])) {
                CHECK(res.sequence[t] >= res.lower[t] - 1e-12);
                ++checked;
            }
            if (std::isfinite(res.upper[t])) CHECK(res.sequence[t] <= res.upper[t] + 1e-12);
        }
    }
    CHECK(checked > 1000);
}
