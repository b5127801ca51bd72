#include "msaddle/bounds.hpp"

#include <cmath>

namespace msaddle {

ScheduleSums schedule_sums(const StepSchedule& schedule, long T) {
    long double sum = 0.0L, sum_sq = 0.0L;
    switch (schedule.kind) {
        case StepKind::Constant:
            sum = static_cast<long double>(schedule.coefficient) * T;
            sum_sq = static_cast<long double>(schedule.coefficient) * schedule.coefficient * T;
            break;
        default:
            for (long t = 1; t <= T; ++t) {
                const long double a = schedule.alpha(t);
                sum += a;
                sum_sq += a * a;
            }
    }
    return {static_cast<double>(sum), static_cast<double>(sum_sq)};
}

void BoundInputs::validate() const {
    if (D <= 0.0 || L1 <= 0.0 || L2 <= 0.0) {
        throw std::invalid_argument("BoundInputs: D, L1, L2 must be positive");
    }
    if (T < 1) throw std::invalid_argument("BoundInputs: T must be >= 1");
    if (tau < 0) throw std::invalid_argument("BoundInputs: tau must be >= 0");
    if (eta < 0.0) throw std::invalid_argument("BoundInputs: eta must be >= 0");
    if (delta <= 0.0 || delta >= 1.0) throw std::invalid_argument("BoundInputs: delta must be in (0,1)");
    if (2 * tau > T) {
        throw AssumptionError("BoundInputs: tau = " + std::to_string(tau) +
                              " exceeds T/2 = " + std::to_string(T / 2));
    }
}

BoundBreakdown bound_breakdown(const BoundInputs& inputs) {
    inputs.validate();
    const auto [sum_alpha, sum_alpha_sq] = schedule_sums(inputs.schedule, inputs.T);
    const double alpha0 = inputs.schedule.alpha0();
    const double tau = static_cast<double>(inputs.tau);
    const double D = inputs.D, L1 = inputs.L1, L2 = inputs.L2;

    BoundBreakdown out;
    out.sum_alpha = sum_alpha;
    out.sum_alpha_sq = sum_alpha_sq;
    out.term_base = D * D / sum_alpha;
    out.term_variance = 2.5 * L1 * L1 * sum_alpha_sq / sum_alpha;
    out.term_mixing_sq = (6.0 * L1 * L1 + 2.0 * L1 * L2 * D) * tau * sum_alpha_sq / sum_alpha;
    out.term_eta = 2.0 * L1 * D * inputs.eta;
    out.term_tail = 6.0 * L1 * D * alpha0 * tau / sum_alpha;
    // The deviation term is defined as 0 in the i.i.d. reduction tau = 0.
    out.term_deviation =
        (inputs.tau == 0)
            ? 0.0
            : 8.0 * D * L1 *
                  std::sqrt(2.0 * tau * std::log(tau / inputs.delta) * (sum_alpha_sq + tau * alpha0)) /
                  sum_alpha;
    out.expectation =
        out.term_base + out.term_variance + out.term_mixing_sq + out.term_eta + out.term_tail;
    out.high_probability = out.expectation + out.term_deviation;
    return out;
}

double theorem1_bound(const BoundInputs& inputs) { return bound_breakdown(inputs).high_probability; }

double lemma1_bound(const BoundInputs& inputs) { return bound_breakdown(inputs).expectation; }

LipschitzPair proposition1_constants(const GtdConstants& c, double D) {
    const double root2 = std::sqrt(2.0);
    const double shared = (1.0 + c.gamma) * c.rho_max * c.L * c.L * c.d;
    LipschitzPair out;
    out.L1 = root2 * (2.0 * D * shared + c.rho_max * c.L * c.R_max + c.lambda_M);
    out.L2 = root2 * (2.0 * shared + c.lambda_M);
    return out;
}

OrderValue theorem2_order(const GtdConstants& c, const StepSchedule& schedule, long T, long tau,
                          double delta, BoundMode mode, BoundKind kind) {
    if (T < 1) throw std::invalid_argument("theorem2_order: T must be >= 1");
    if (tau < 0) throw std::invalid_argument("theorem2_order: tau must be >= 0");
    const auto [sum_alpha, sum_alpha_sq] = schedule_sums(schedule, T);
    OrderValue out;
    out.o1 = sum_alpha_sq / sum_alpha;
    out.o2 = std::sqrt(sum_alpha_sq) / sum_alpha;

    const double tau_d = static_cast<double>(tau);
    const double log_dev = (tau == 0) ? 0.0 : std::sqrt(tau_d * std::log(tau_d / delta));
    const double one_plus_tau = 1.0 + tau_d;
    const double L2 = c.L * c.L;
    const double L4 = L2 * L2;

    switch (mode) {
        case BoundMode::OnPolicy:
            if (kind == BoundKind::Expectation) {
                out.value = c.L *
                            std::sqrt(L4 * c.d * c.d * c.d * c.lambda_M * c.pi_max * one_plus_tau *
                                      out.o1) /
                            c.nu_C;
            } else {
                out.value = std::sqrt(L4 * c.d * c.d * c.lambda_M * c.pi_max) / c.nu_C *
                            std::sqrt(one_plus_tau * L2 * c.d * out.o1 + log_dev * out.o2);
            }
            break;
        case BoundMode::OffPolicy:
            if (kind == BoundKind::Expectation) {
                out.value = L2 * c.d *
                            std::sqrt(2.0 * c.lambda_C * c.lambda_M * c.pi_max * one_plus_tau *
                                      out.o1) /
                            c.nu_AtMinvA;
            } else {
                out.value = std::sqrt(2.0 * c.lambda_C * c.lambda_M * c.pi_max) / c.nu_AtMinvA *
                            std::sqrt(L4 * c.d * c.d * one_plus_tau * out.o1 + log_dev * out.o2);
            }
            break;
    }
    return out;
}

EtaChoice minimize_lemma1_over_eta(double D, double L1, double L2, const StepSchedule& schedule,
                                   long T, double delta, const MixingReport& mixing) {
    EtaChoice best{0.0, 0, std::numeric_limits<double>::infinity()};
    for (int k = 1; k <= 20; ++k) {
        const double eta = std::ldexp(1.0, -k);
        long tau = -1;
        for (const auto& [delta_step, distance] : mixing.tv_curve) {
            if (distance <= eta) {
                tau = delta_step;
                break;
            }
        }
        if (tau < 0 || 2 * tau > T) continue;  // level not measured or precondition violated
        BoundInputs inputs{D, L1, L2, schedule, T, tau, eta, delta};
        const double bound = lemma1_bound(inputs);
        if (bound < best.bound) best = {eta, tau, bound};
    }
    if (!std::isfinite(best.bound)) {
        throw AssumptionError("minimize_lemma1_over_eta: no feasible eta level (tau <= T/2)");
    }
    return best;
}

}  // namespace msaddle
