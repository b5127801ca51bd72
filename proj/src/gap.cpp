#include "msaddle/gap.hpp"

#include <cmath>

namespace msaddle {
namespace {

// Largest singular value via Eigen's SVD (domains here are small and dense).
double spectral_norm(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return 0.0;
    return m.jacobiSvd().singularValues()(0);
}

}  // namespace

BilinearQuadraticProblem::BilinearQuadraticProblem(Eigen::MatrixXd A_in, Eigen::VectorXd b_in,
                                                   double mu_x_in, Eigen::MatrixXd M_y_in,
                                                   BallDomain domain_x_in, BallDomain domain_y_in)
    : A(std::move(A_in)),
      b(std::move(b_in)),
      mu_x(mu_x_in),
      M_y(std::move(M_y_in)),
      domain_x(std::move(domain_x_in)),
      domain_y(std::move(domain_y_in)) {
    if (A.rows() != b.size()) throw std::invalid_argument("BilinearQuadraticProblem: A rows != b length");
    if (A.cols() != domain_x.dimension())
        throw std::invalid_argument("BilinearQuadraticProblem: A cols != x dimension");
    if (A.rows() != domain_y.dimension())
        throw std::invalid_argument("BilinearQuadraticProblem: A rows != y dimension");
    if (M_y.rows() != M_y.cols() || M_y.rows() != A.rows())
        throw std::invalid_argument("BilinearQuadraticProblem: M_y must be m x m");
    if (mu_x < 0.0) throw std::invalid_argument("BilinearQuadraticProblem: mu_x must be >= 0");
    if (!M_y.isApprox(M_y.transpose(), 1e-12))
        throw std::invalid_argument("BilinearQuadraticProblem: M_y must be symmetric");
}

double BilinearQuadraticProblem::value(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    return (b - A * x).dot(y) + 0.5 * mu_x * x.squaredNorm() - 0.5 * y.dot(M_y * y);
}

PartialGradients BilinearQuadraticProblem::gradient(const Eigen::VectorXd& x,
                                                    const Eigen::VectorXd& y) const {
    PartialGradients g;
    g.x = mu_x * x - A.transpose() * y;
    g.y = b - A * x - M_y * y;
    return g;
}

StochasticSaddleProblem BilinearQuadraticProblem::as_saddle_problem() const {
    StochasticSaddleProblem p{domain_x, domain_y, nullptr, nullptr};
    const BilinearQuadraticProblem self = *this;
    p.oracle = [self](const SaddlePoint& z, long) { return self.gradient(z.x, z.y); };
    p.exact_gradient = [self](const SaddlePoint& z) { return self.gradient(z.x, z.y); };
    return p;
}

SaddlePoint BilinearQuadraticProblem::unconstrained_saddle() const {
    // First-order conditions: mu_x x = A^T y and M_y y = b - A x.
    const Eigen::Index n = A.cols();
    const Eigen::Index m = A.rows();
    Eigen::MatrixXd K(n + m, n + m);
    K.setZero();
    K.topLeftCorner(n, n) = mu_x * Eigen::MatrixXd::Identity(n, n);
    K.topRightCorner(n, m) = -A.transpose();
    K.bottomLeftCorner(m, n) = A;
    K.bottomRightCorner(m, m) = M_y;
    Eigen::VectorXd rhs(n + m);
    rhs.head(n).setZero();
    rhs.tail(m) = b;
    const Eigen::VectorXd sol = K.fullPivLu().solve(rhs);
    return {sol.head(n), sol.tail(m)};
}

double BilinearQuadraticProblem::lipschitz_l1(double slack_A, double slack_b) const {
    const double norm_A = spectral_norm(A) + slack_A;
    const double norm_b = b.norm() + slack_b;
    const double rx = domain_x.radius + domain_x.center.norm();
    const double ry = domain_y.radius + domain_y.center.norm();
    const double l1x = mu_x * rx + norm_A * ry;
    const double l1y = norm_b + norm_A * rx + spectral_norm(M_y) * ry;
    return std::sqrt(2.0) * std::sqrt(l1x * l1x + l1y * l1y);
}

double BilinearQuadraticProblem::lipschitz_l2(double slack_A) const {
    const double norm_A = spectral_norm(A) + slack_A;
    const double l2x = std::max(mu_x, norm_A);
    const double l2y = std::max(norm_A, spectral_norm(M_y));
    return std::sqrt(2.0) * std::sqrt(l2x * l2x + l2y * l2y);
}

namespace {

// max over ||u|| <= r of <c, u> - (1/2) u^T M u for PSD M, centered coordinates.
InnerSolution solve_ball_quadratic_max(const Eigen::VectorXd& c, const Eigen::MatrixXd& M,
                                       double radius) {
    InnerSolution sol;
    sol.iterations = 0;
    const Eigen::Index m = c.size();

    if (c.norm() == 0.0) {
        // Origin is optimal: the objective is <= 0 everywhere and 0 at u = 0.
        sol.argopt = Eigen::VectorXd::Zero(m);
        sol.value = 0.0;
        return sol;
    }

    // Identity-like M admits the projection shortcut.
    const double m00 = M(0, 0);
    if (m00 > 0.0 && M.isApprox(m00 * Eigen::MatrixXd::Identity(m, m), 1e-14)) {
        Eigen::VectorXd u = c / m00;
        if (u.norm() > radius) u *= radius / u.norm();
        sol.argopt = u;
        sol.value = c.dot(u) - 0.5 * m00 * u.squaredNorm();
        return sol;
    }

    // Try the unconstrained stationary point M u = c.
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    if (ldlt.info() == Eigen::Success) {
        const Eigen::VectorXd u0 = ldlt.solve(c);
        if ((M * u0 - c).norm() <= 1e-10 * std::max(1.0, c.norm()) && u0.norm() <= radius) {
            sol.argopt = u0;
            sol.value = c.dot(u0) - 0.5 * u0.dot(M * u0);
            return sol;
        }
    }

    // Boundary solution: u(lambda) = (M + lambda I)^{-1} c with ||u|| = radius;
    // ||u(lambda)|| is decreasing in lambda and <= ||c||/lambda.
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(m, m);
    auto norm_at = [&](double lambda) {
        return (M + lambda * eye).ldlt().solve(c).norm();
    };
    double lo = 0.0;
    double hi = c.norm() / radius;
    int guard = 0;
    while (norm_at(hi) > radius && guard < 200) {
        hi *= 2.0;
        ++guard;
    }
    if (guard >= 200) {
        throw SolverError("inner_max_y: failed to bracket the secular equation, residual " +
                          std::to_string(norm_at(hi) - radius));
    }
    double lambda = hi;
    int iter = 0;
    for (; iter < 200; ++iter) {
        lambda = 0.5 * (lo + hi);
        const double norm = norm_at(lambda);
        if (std::abs(norm - radius) <= 1e-12 * std::max(1.0, radius)) break;
        if (norm > radius) {
            lo = lambda;
        } else {
            hi = lambda;
        }
    }
    Eigen::VectorXd u = (M + lambda * eye).ldlt().solve(c);
    // Exact norm enforcement keeps the KKT residual at machine precision.
    if (u.norm() > 0.0) u *= radius / u.norm();
    sol.argopt = u;
    sol.value = c.dot(u) - 0.5 * u.dot(M * u);
    sol.iterations = iter + 1;
    return sol;
}

}  // namespace

InnerSolution inner_max_y(const BilinearQuadraticProblem& problem, const Eigen::VectorXd& x_tilde) {
    if (x_tilde.size() != problem.domain_x.dimension())
        throw std::invalid_argument("inner_max_y: x has wrong dimension");
    const Eigen::VectorXd c = problem.b - problem.A * x_tilde;
    // Shift to centered coordinates u = y - y0.
    const Eigen::VectorXd& y0 = problem.domain_y.center;
    const Eigen::VectorXd c_shift = c - problem.M_y * y0;
    InnerSolution sol = solve_ball_quadratic_max(c_shift, problem.M_y, problem.domain_y.radius);
    const double constant = c.dot(y0) - 0.5 * y0.dot(problem.M_y * y0);
    sol.argopt += y0;
    sol.value += constant;
    return sol;
}

InnerSolution inner_min_x(const BilinearQuadraticProblem& problem, const Eigen::VectorXd& y_tilde) {
    if (y_tilde.size() != problem.domain_y.dimension())
        throw std::invalid_argument("inner_min_x: y has wrong dimension");
    const Eigen::VectorXd d = problem.A.transpose() * y_tilde;
    const Eigen::VectorXd& x0 = problem.domain_x.center;
    const double radius = problem.domain_x.radius;
    InnerSolution sol;
    sol.iterations = 0;

    // Centered objective: -(d - mu_x x0).u + (mu_x/2)||u||^2 + const.
    const Eigen::VectorXd d_shift = d - problem.mu_x * x0;
    Eigen::VectorXd u;
    if (problem.mu_x > 0.0) {
        u = d_shift / problem.mu_x;
        if (u.norm() > radius) u *= radius / u.norm();
    } else if (d_shift.norm() == 0.0) {
        u = Eigen::VectorXd::Zero(d.size());
    } else {
        u = (radius / d_shift.norm()) * d_shift;
    }
    sol.argopt = x0 + u;
    sol.value = -d.dot(sol.argopt) + 0.5 * problem.mu_x * sol.argopt.squaredNorm();
    return sol;
}

GapReport primal_dual_gap(const BilinearQuadraticProblem& problem, const SaddlePoint& z_tilde) {
    const InnerSolution best_y = inner_max_y(problem, z_tilde.x);
    const InnerSolution best_x = inner_min_x(problem, z_tilde.y);
    GapReport report;
    report.inner_max_y = best_y.argopt;
    report.inner_min_x = best_x.argopt;
    report.solver_iterations = best_y.iterations + best_x.iterations;
    report.gap = problem.value(z_tilde.x, best_y.argopt) - problem.value(best_x.argopt, z_tilde.y);
    return report;
}

double brute_force_gap(const BilinearQuadraticProblem& problem, const SaddlePoint& z_tilde,
                       int points_per_axis) {
    const Eigen::Index n = problem.domain_x.dimension();
    const Eigen::Index m = problem.domain_y.dimension();
    if (n > 3 || m > 3) throw std::invalid_argument("brute_force_gap: dimension > 3 per block");
    if (points_per_axis < 2) throw std::invalid_argument("brute_force_gap: need >= 2 points per axis");

    // Enumerates the axis grid over the bounding box, rejecting points
    // outside the ball.
    auto scan = [&](const BallDomain& domain, auto&& eval, bool maximize) {
        const Eigen::Index dim = domain.dimension();
        std::vector<int> idx(dim, 0);
        Eigen::VectorXd point(dim);
        double best = maximize ? -std::numeric_limits<double>::infinity()
                               : std::numeric_limits<double>::infinity();
        const double step = 2.0 * domain.radius / (points_per_axis - 1);
        while (true) {
            for (Eigen::Index k = 0; k < dim; ++k) {
                point(k) = domain.center(k) - domain.radius + step * idx[k];
            }
            if ((point - domain.center).norm() <= domain.radius) {
                const double v = eval(point);
                best = maximize ? std::max(best, v) : std::min(best, v);
            }
            Eigen::Index k = 0;
            while (k < dim && ++idx[k] == points_per_axis) {
                idx[k] = 0;
                ++k;
            }
            if (k == dim) break;
        }
        return best;
    };

    const double max_part = scan(problem.domain_y,
                                 [&](const Eigen::VectorXd& y) { return problem.value(z_tilde.x, y); },
                                 true);
    const double min_part = scan(problem.domain_x,
                                 [&](const Eigen::VectorXd& x) { return problem.value(x, z_tilde.y); },
                                 false);
    return max_part - min_part;
}

}  // namespace msaddle
