#include "msaddle/saddle.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "msaddle/markov.hpp"

namespace msaddle {

Eigen::VectorXd project(const BallDomain& domain, const Eigen::VectorXd& v) {
    if (v.size() != domain.dimension()) {
        throw std::invalid_argument("project: vector length " + std::to_string(v.size()) +
                                    " does not match domain dimension " +
                                    std::to_string(domain.dimension()));
    }
    const Eigen::VectorXd offset = v - domain.center;
    const double norm = offset.norm();
    if (norm <= domain.radius) return v;
    double scale = domain.radius / norm;
    Eigen::VectorXd out = domain.center + scale * offset;
    // Round-off can land a hair outside the ball; shrink by ulps until the
    // result is feasible, which makes projecting twice the exact identity.
    while ((out - domain.center).norm() > domain.radius) {
        scale = std::nextafter(scale, 0.0);
        out = domain.center + scale * offset;
    }
    return out;
}

std::string StepSchedule::name() const {
    switch (kind) {
        case StepKind::Constant: return "constant";
        case StepKind::InvSqrt: return "invsqrt";
        case StepKind::Inv: return "inv";
    }
    return "constant";
}

StepSchedule StepSchedule::parse(const std::string& kind_name, double c) {
    if (kind_name == "constant") return {StepKind::Constant, c};
    if (kind_name == "invsqrt") return {StepKind::InvSqrt, c};
    if (kind_name == "inv") return {StepKind::Inv, c};
    throw std::invalid_argument("StepSchedule: unknown kind '" + kind_name + "'");
}

SaddlePoint sgd_step(const StochasticSaddleProblem& problem, const SaddlePoint& z, long sample,
                     double alpha, long t) {
    const PartialGradients g = problem.oracle(z, sample);
    if (!g.x.allFinite() || !g.y.allFinite()) {
        throw NumericError("sgd_step: non-finite gradient at t=" + std::to_string(t) +
                           ", sample=" + std::to_string(sample));
    }
    SaddlePoint next;
    next.x = project(problem.domain_x, z.x - alpha * g.x);
    next.y = project(problem.domain_y, z.y + alpha * g.y);
    return next;
}

AveragedTrajectory run_sgd(const StochasticSaddleProblem& problem, SampleStream& stream,
                           const StepSchedule& schedule, long horizon, const SaddlePoint& start,
                           const std::vector<long>& checkpoint_grid) {
    if (horizon < 1) throw std::invalid_argument("run_sgd: horizon must be >= 1");
    for (std::size_t i = 0; i < checkpoint_grid.size(); ++i) {
        if (checkpoint_grid[i] < 1 || checkpoint_grid[i] > horizon ||
            (i > 0 && checkpoint_grid[i] <= checkpoint_grid[i - 1])) {
            throw std::invalid_argument("run_sgd: checkpoint grid must be sorted within [1, T]");
        }
    }

    AveragedTrajectory out;
    out.horizon = horizon;
    out.checkpoints.reserve(checkpoint_grid.size());

    SaddlePoint z = start;
    SaddlePoint avg{Eigen::VectorXd::Zero(z.x.size()), Eigen::VectorXd::Zero(z.y.size())};
    long double weight_sum = 0.0L;
    std::size_t next_checkpoint = 0;

    for (long t = 1; t <= horizon; ++t) {
        const double alpha = schedule.alpha(t);
        weight_sum += alpha;
        const double ratio = static_cast<double>(alpha / weight_sum);
        avg.x += ratio * (z.x - avg.x);
        avg.y += ratio * (z.y - avg.y);

        if (next_checkpoint < checkpoint_grid.size() && checkpoint_grid[next_checkpoint] == t) {
            out.checkpoints.push_back({t, avg, static_cast<double>(weight_sum)});
            ++next_checkpoint;
        }
        const long sample = stream.next();
        z = sgd_step(problem, z, sample, alpha, t);
#ifndef NDEBUG
        if (!problem.domain_x.contains(z.x) || !problem.domain_y.contains(z.y)) {
            throw NumericError("run_sgd: iterate escaped the domain at t=" + std::to_string(t));
        }
#endif
    }
    out.final_average = avg;
    out.final_weight_sum = static_cast<double>(weight_sum);
    return out;
}

std::vector<long> log_spaced_checkpoints(long lo, long hi, int count) {
    if (lo < 1) lo = 1;
    if (hi < lo) hi = lo;
    std::set<long> grid;
    if (count < 1) count = 1;
    const double llo = std::log(static_cast<double>(lo));
    const double lhi = std::log(static_cast<double>(hi));
    for (int i = 0; i < count; ++i) {
        const double f = (count == 1) ? 1.0 : static_cast<double>(i) / (count - 1);
        grid.insert(static_cast<long>(std::llround(std::exp(llo + f * (lhi - llo)))));
    }
    grid.insert(hi);
    return {grid.begin(), grid.end()};
}

}  // namespace msaddle
