#pragma once

#include <Eigen/Dense>

#include "msaddle/saddle.hpp"

namespace msaddle {

// phi(x, y) = <b - Ax, y> + (mu_x/2)||x||^2 - (1/2) y^T M_y y, convex in x and
// concave in y for mu_x >= 0 and M_y PSD.  mu_x = 0, M_y = M is the GTD saddle
// form; mu_x = 1, M_y = I is the simulation problem.
struct BilinearQuadraticProblem {
    Eigen::MatrixXd A;   // n rows pair with x, m columns... A is m x n: y^T A x
    Eigen::VectorXd b;   // length m, pairs with y
    double mu_x;
    Eigen::MatrixXd M_y;  // m x m symmetric PSD
    BallDomain domain_x;
    BallDomain domain_y;

    BilinearQuadraticProblem(Eigen::MatrixXd A_in, Eigen::VectorXd b_in, double mu_x_in,
                             Eigen::MatrixXd M_y_in, BallDomain domain_x_in,
                             BallDomain domain_y_in);

    double value(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;
    PartialGradients gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;

    // Deterministic saddle problem (oracle ignores the sample index).
    StochasticSaddleProblem as_saddle_problem() const;

    // Unconstrained saddle; interior iff inside both balls.
    SaddlePoint unconstrained_saddle() const;

    // sup-norm of the sampled gradient over the domain, split by block, for
    // Lipschitz constants: L1 = sqrt(2)*sqrt(L1x^2 + L1y^2).  slack_A/slack_b
    // widen ||A||, ||b|| for per-sample perturbation families.
    double lipschitz_l1(double slack_A = 0.0, double slack_b = 0.0) const;
    double lipschitz_l2(double slack_A = 0.0) const;
};

struct InnerSolution {
    Eigen::VectorXd argopt;
    double value;            // optimal value of the solved sub-objective
    int iterations;          // bisection iterations used (0 if closed form)
};

struct GapReport {
    double gap;
    Eigen::VectorXd inner_max_y;
    Eigen::VectorXd inner_min_x;
    int solver_iterations;
};

// max over the y-ball of <c, y> - (1/2) y^T M_y y with c = b - A x_tilde.
// Closed form when M_y = s*I; otherwise a secular bisection on
// y(lambda) = (M_y + lambda I)^{-1} c targeting ||y|| = radius.
InnerSolution inner_max_y(const BilinearQuadraticProblem& problem, const Eigen::VectorXd& x_tilde);

// min over the x-ball of -<A^T y_tilde, x> + (mu_x/2)||x||^2.
InnerSolution inner_min_x(const BilinearQuadraticProblem& problem, const Eigen::VectorXd& y_tilde);

// Primal-dual gap max_y phi(x~, y) - min_x phi(x, y~); exact for this family.
GapReport primal_dual_gap(const BilinearQuadraticProblem& problem, const SaddlePoint& z_tilde);

// Grid-evaluation oracle for validation; refuses dimensions > 3 per block.
double brute_force_gap(const BilinearQuadraticProblem& problem, const SaddlePoint& z_tilde,
                       int points_per_axis = 41);

}  // namespace msaddle
