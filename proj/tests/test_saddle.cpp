#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "msaddle/gap.hpp"
#include "msaddle/markov.hpp"
#include "msaddle/rng.hpp"
#include "msaddle/saddle.hpp"

using namespace msaddle;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> values) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) v(i++) = x;
    return v;
}

}  // namespace

TEST_CASE("projection fixes interior points and rescales exterior ones") {
    BallDomain unit(2, 1.0);
    CHECK(project(unit, vec({0, 0})).isZero());
    CHECK(project(unit, vec({3, 4})).isApprox(vec({0.6, 0.8}), 1e-15));
    BallDomain wide(2, 2.0);
    CHECK(project(wide, vec({0, 1})).isApprox(vec({0, 1}), 1e-15));
}

TEST_CASE("projection respects non-origin centers") {
    BallDomain ball(vec({1.0, 1.0}), 0.5);
    const Eigen::VectorXd p = project(ball, vec({3.0, 1.0}));
    CHECK(p.isApprox(vec({1.5, 1.0}), 1e-15));
}

TEST_CASE("projection rejects dimension mismatch") {
    BallDomain unit(2, 1.0);
    CHECK_THROWS_AS(project(unit, vec({1, 2, 3})), std::invalid_argument);
}

TEST_CASE("projection is idempotent and non-expansive") {
    BallDomain ball(4, 1.7);
    Rng rng(42);
    for (int trial = 0; trial < 200; ++trial) {
        Eigen::VectorXd u(4), v(4);
        for (int i = 0; i < 4; ++i) {
            u(i) = 6.0 * (rng.uniform() - 0.5);
            v(i) = 6.0 * (rng.uniform() - 0.5);
        }
        const Eigen::VectorXd pu = project(ball, u);
        CHECK((project(ball, pu) - pu).norm() == 0.0);
        CHECK((pu - project(ball, v)).norm() <= (u - v).norm() + 1e-12);
    }
}

TEST_CASE("step schedules start at c and are non-increasing") {
    for (const char* kind : {"constant", "invsqrt", "inv"}) {
        StepSchedule schedule = StepSchedule::parse(kind, 0.25);
        CHECK(schedule.alpha(1) == doctest::Approx(0.25).epsilon(1e-15));
        double previous = schedule.alpha(1);
        for (long t = 2; t <= 1000000; t = (t < 100) ? t + 1 : t * 3 / 2) {
            const double current = schedule.alpha(t);
            CHECK(current <= previous + 1e-18);
            previous = current;
        }
    }
    CHECK(StepSchedule::parse("invsqrt", 2.0).alpha(4) == doctest::Approx(1.0));
    CHECK(StepSchedule::parse("inv", 2.0).alpha(4) == doctest::Approx(0.5));
    CHECK_THROWS_AS(StepSchedule::parse("polynomial", 1.0), std::invalid_argument);
}

namespace {

StochasticSaddleProblem constant_gradient_problem(double gx, double gy, double radius) {
    StochasticSaddleProblem p{BallDomain(1, radius), BallDomain(1, radius), nullptr, nullptr};
    p.oracle = [gx, gy](const SaddlePoint&, long) {
        return PartialGradients{vec({gx}), vec({gy})};
    };
    return p;
}

}  // namespace

TEST_CASE("sgd_step descends on x and ascends on y") {
    // 1-dim, x = 0, G_x = 1, alpha = 0.1 -> x moves to -0.1
    auto p = constant_gradient_problem(1.0, 0.0, 1.0);
    SaddlePoint z{vec({0}), vec({0})};
    SaddlePoint next = sgd_step(p, z, 0, 0.1);
    CHECK(next.x(0) == doctest::Approx(-0.1).epsilon(1e-15));
    CHECK(next.y(0) == 0.0);

    auto q = constant_gradient_problem(0.0, 1.0, 1.0);
    next = sgd_step(q, z, 0, 0.1);
    CHECK(next.y(0) == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("sgd_step fixes interior points under zero gradient") {
    auto p = constant_gradient_problem(0.0, 0.0, 2.0);
    SaddlePoint z{vec({0.3}), vec({-1.2})};
    SaddlePoint next = sgd_step(p, z, 0, 0.5);
    CHECK(next.x(0) == z.x(0));
    CHECK(next.y(0) == z.y(0));
}

TEST_CASE("sgd_step reports non-finite gradients") {
    StochasticSaddleProblem p{BallDomain(1, 1.0), BallDomain(1, 1.0), nullptr, nullptr};
    p.oracle = [](const SaddlePoint&, long) {
        return PartialGradients{vec({std::numeric_limits<double>::quiet_NaN()}), vec({0})};
    };
    SaddlePoint z{vec({0}), vec({0})};
    CHECK_THROWS_AS(sgd_step(p, z, 7, 0.1, 31), NumericError);
    try {
        sgd_step(p, z, 7, 0.1, 31);
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("31") != std::string::npos);
        CHECK(std::string(e.what()).find("7") != std::string::npos);
    }
}

TEST_CASE("run_sgd with T = 1 averages the single start iterate") {
    auto p = constant_gradient_problem(1.0, 1.0, 1.0);
    FixedSequenceStream stream({0});
    SaddlePoint start{vec({0.5}), vec({-0.5})};
    auto trajectory = run_sgd(p, stream, StepSchedule(StepKind::Constant, 0.1), 1, start, {1});
    CHECK(trajectory.final_average.x(0) == doctest::Approx(0.5));
    CHECK(trajectory.final_average.y(0) == doctest::Approx(-0.5));
    CHECK(trajectory.checkpoints.size() == 1);
}

TEST_CASE("run_sgd is stationary under zero gradients") {
    auto p = constant_gradient_problem(0.0, 0.0, 1.0);
    std::vector<long> samples(200, 0);
    FixedSequenceStream stream(samples);
    SaddlePoint start{vec({0.25}), vec({0.75})};
    auto trajectory =
        run_sgd(p, stream, StepSchedule(StepKind::Constant, 0.05), 200, start, {1, 10, 200});
    for (const auto& checkpoint : trajectory.checkpoints) {
        CHECK(checkpoint.average.x(0) == doctest::Approx(0.25).epsilon(1e-14));
        CHECK(checkpoint.average.y(0) == doctest::Approx(0.75).epsilon(1e-14));
    }
}

TEST_CASE("run_sgd raises on stream exhaustion") {
    auto p = constant_gradient_problem(0.0, 0.0, 1.0);
    FixedSequenceStream stream({0, 0, 0});
    SaddlePoint start{vec({0}), vec({0})};
    CHECK_THROWS_AS(run_sgd(p, stream, StepSchedule(StepKind::Constant, 0.1), 5, start, {5}),
                    StreamExhausted);
}

TEST_CASE("running weighted average matches the batch formula") {
    // Drive sgd_step manually, collect iterates, compare the batch average
    // against run_sgd's running recursion on the same sample path.
    const int n = 3;
    const long T = 10000;
    Rng noise(7);
    BilinearQuadraticProblem exact(Eigen::MatrixXd::Identity(n, n), vec({0.2, -0.1, 0.4}), 1.0,
                                   Eigen::MatrixXd::Identity(n, n), BallDomain(n, 2.0),
                                   BallDomain(n, 2.0));
    StochasticSaddleProblem p = exact.as_saddle_problem();
    StepSchedule schedule(StepKind::InvSqrt, 0.3);

    SaddlePoint z{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
    Eigen::VectorXd weighted_x = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd weighted_y = Eigen::VectorXd::Zero(n);
    double total_weight = 0.0;
    for (long t = 1; t <= T; ++t) {
        const double alpha = schedule.alpha(t);
        weighted_x += alpha * z.x;
        weighted_y += alpha * z.y;
        total_weight += alpha;
        z = sgd_step(p, z, 0, alpha, t);
    }
    weighted_x /= total_weight;
    weighted_y /= total_weight;

    FixedSequenceStream stream(std::vector<long>(T, 0));
    SaddlePoint start{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
    auto trajectory = run_sgd(p, stream, schedule, T, start, {T});
    CHECK((trajectory.final_average.x - weighted_x).norm() <=
          1e-10 * std::max(1.0, weighted_x.norm()));
    CHECK((trajectory.final_average.y - weighted_y).norm() <=
          1e-10 * std::max(1.0, weighted_y.norm()));
    CHECK(trajectory.final_weight_sum == doctest::Approx(total_weight).epsilon(1e-12));
}

TEST_CASE("iterates stay inside their domains") {
    auto p = constant_gradient_problem(5.0, -3.0, 0.5);
    std::vector<long> samples(500, 0);
    FixedSequenceStream stream(samples);
    SaddlePoint start{vec({0}), vec({0})};
    // run_sgd checks containment after every step in debug builds; in release
    // the final average must still be feasible.
    auto trajectory = run_sgd(p, stream, StepSchedule(StepKind::Constant, 0.3), 500, start, {500});
    CHECK(p.domain_x.contains(trajectory.final_average.x, 1e-12));
    CHECK(p.domain_y.contains(trajectory.final_average.y, 1e-12));
}

TEST_CASE("checkpoint grids are validated") {
    auto p = constant_gradient_problem(0.0, 0.0, 1.0);
    FixedSequenceStream stream(std::vector<long>(10, 0));
    SaddlePoint start{vec({0}), vec({0})};
    CHECK_THROWS_AS(run_sgd(p, stream, StepSchedule(StepKind::Constant, 0.1), 10, start, {3, 2}),
                    std::invalid_argument);
    CHECK_THROWS_AS(run_sgd(p, stream, StepSchedule(StepKind::Constant, 0.1), 10, start, {11}),
                    std::invalid_argument);
}

TEST_CASE("log spaced checkpoints are sorted, unique and span the range") {
    const auto grid = log_spaced_checkpoints(10, 100000, 30);
    CHECK(grid.front() >= 10);
    CHECK(grid.back() == 100000);
    for (std::size_t i = 1; i < grid.size(); ++i) CHECK(grid[i] > grid[i - 1]);
}
