#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "msaddle/errors.hpp"

namespace msaddle {

// Euclidean ball { v : ||v - center|| <= radius }.
struct BallDomain {
    Eigen::VectorXd center;
    double radius;

    BallDomain(Eigen::Index dimension, double radius_in)
        : center(Eigen::VectorXd::Zero(dimension)), radius(radius_in) {
        validate();
    }
    BallDomain(Eigen::VectorXd center_in, double radius_in)
        : center(std::move(center_in)), radius(radius_in) {
        validate();
    }

    Eigen::Index dimension() const { return center.size(); }
    double diameter() const { return 2.0 * radius; }
    bool contains(const Eigen::VectorXd& v, double tol = 1e-9) const {
        return (v - center).norm() <= radius + tol;
    }

private:
    void validate() const {
        if (radius <= 0.0) throw std::invalid_argument("BallDomain: radius must be positive");
        if (center.size() == 0) throw std::invalid_argument("BallDomain: dimension must be positive");
    }
};

// Radial projection onto the ball; identity for interior points.
Eigen::VectorXd project(const BallDomain& domain, const Eigen::VectorXd& v);

struct SaddlePoint {
    Eigen::VectorXd x;
    Eigen::VectorXd y;
};

enum class StepKind { Constant, InvSqrt, Inv };

// Non-increasing step sizes alpha_t for 1-based t; alpha_1 == coefficient for
// all kinds.
struct StepSchedule {
    StepKind kind;
    double coefficient;

    StepSchedule(StepKind kind_in, double c) : kind(kind_in), coefficient(c) {
        if (c <= 0.0) throw std::invalid_argument("StepSchedule: coefficient must be positive");
    }

    double alpha(long t) const {
        switch (kind) {
            case StepKind::Constant: return coefficient;
            case StepKind::InvSqrt: return coefficient / std::sqrt(static_cast<double>(t));
            case StepKind::Inv: return coefficient / static_cast<double>(t);
        }
        return coefficient;
    }
    // Largest step size; the bound formulas use this as alpha_0.
    double alpha0() const { return coefficient; }

    std::string name() const;
    static StepSchedule parse(const std::string& kind_name, double c);
};

struct PartialGradients {
    Eigen::VectorXd x;  // descent direction component
    Eigen::VectorXd y;  // ascent direction component
};

// min over x / max over y of E_xi[Phi(x, y, xi)] over a product of balls.
// The oracle maps (z, xi) to partial gradients; samples are integer-encoded
// (a chain state or an index into a sample family).  exact_gradient is
// optional and used by tests and stationarity checks.
struct StochasticSaddleProblem {
    BallDomain domain_x;
    BallDomain domain_y;
    std::function<PartialGradients(const SaddlePoint&, long)> oracle;
    std::function<PartialGradients(const SaddlePoint&)> exact_gradient;
};

// One projected step: x <- P(x - alpha*G_x), y <- P(y + alpha*G_y).
// `t` only labels the error message when the oracle returns non-finite values.
SaddlePoint sgd_step(const StochasticSaddleProblem& problem, const SaddlePoint& z, long sample,
                     double alpha, long t = -1);

struct TrajectoryCheckpoint {
    long t;
    SaddlePoint average;     // weighted average of z_1..z_t
    double weight_sum;       // sum of alpha_1..alpha_t
};

struct AveragedTrajectory {
    std::vector<TrajectoryCheckpoint> checkpoints;
    SaddlePoint final_average;
    double final_weight_sum = 0.0;
    long horizon = 0;
};

class SampleStream;

// Runs T projected steps pulling one sample per step, maintaining the running
// weighted average z~ <- z~ + (alpha_t/Gamma_t)(z_t - z~).  Checkpoints must be
// sorted ascending within [1, T].
AveragedTrajectory run_sgd(const StochasticSaddleProblem& problem, SampleStream& stream,
                           const StepSchedule& schedule, long horizon, const SaddlePoint& start,
                           const std::vector<long>& checkpoint_grid);

// `count` log-spaced unique integers in [lo, hi].
std::vector<long> log_spaced_checkpoints(long lo, long hi, int count);

}  // namespace msaddle
