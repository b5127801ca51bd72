#pragma once

#include <vector>

#include "msaddle/markov.hpp"
#include "msaddle/saddle.hpp"

namespace msaddle {

// Inputs to the finite-sample bound formulas.  alpha_0 is taken as the
// schedule's first (largest) step.  tau is the mixing time at level eta;
// tau = 0 encodes the i.i.d. regime and drops every tau-scaled term.
struct BoundInputs {
    double D;
    double L1;
    double L2;
    StepSchedule schedule;
    long T;
    long tau;
    double eta;
    double delta;

    void validate() const;
};

struct BoundBreakdown {
    double sum_alpha;
    double sum_alpha_sq;
    double term_base;        // D^2 / sum_alpha
    double term_variance;    // (5/2) L1^2 sum_alpha^2 / sum_alpha
    double term_mixing_sq;   // (6 L1^2 + 2 L1 L2 D) tau sum_alpha^2 / sum_alpha
    double term_eta;         // 2 L1 D eta
    double term_tail;        // 6 L1 D alpha_0 tau / sum_alpha
    double term_deviation;   // 8 D L1 sqrt(2 tau log(tau/delta) (sum_alpha^2 + tau alpha_0)) / sum_alpha
    double expectation;      // sum of the first five terms
    double high_probability; // expectation + deviation
};

BoundBreakdown bound_breakdown(const BoundInputs& inputs);

// High-probability gap bound (holds with probability 1 - delta).
double theorem1_bound(const BoundInputs& inputs);

// Expectation gap bound: theorem1 without the deviation term.
double lemma1_bound(const BoundInputs& inputs);

// Constants of the GTD instance consumed by the value-error orders.
struct GtdConstants {
    double gamma;
    double rho_max;
    double L;        // max-norm feature bound
    double d;        // feature dimension
    double R_max;
    double lambda_M;
    double lambda_C;
    double nu_C;
    double nu_AtMinvA;
    double pi_max;
};

// Lipschitz/smoothness coefficients for the GTD objective:
// L1 <= sqrt(2)(2 D (1+gamma) rho_max L^2 d + rho_max L R_max + lambda_M),
// L2 <= sqrt(2)(2 (1+gamma) rho_max L^2 d + lambda_M).
struct LipschitzPair {
    double L1;
    double L2;
};
LipschitzPair proposition1_constants(const GtdConstants& constants, double D);

enum class BoundMode { OnPolicy, OffPolicy };
enum class BoundKind { Expectation, HighProbability };

struct OrderValue {
    double value;  // bracketed order expression with absolute constant 1
    double o1;     // sum_alpha^2 / sum_alpha
    double o2;     // sqrt(sum_alpha^2) / sum_alpha
};

// Value-error convergence orders for GTD; these are order values (the hidden
// absolute constant is set to 1), not certified bounds.
OrderValue theorem2_order(const GtdConstants& constants, const StepSchedule& schedule, long T,
                          long tau, double delta, BoundMode mode, BoundKind kind);

// Minimizes the expectation bound over eta in {2^-1 ... 2^-20} using the
// chain's measured tau(eta) curve.  Rows with tau > T/2 are skipped.
struct EtaChoice {
    double eta;
    long tau;
    double bound;
};
EtaChoice minimize_lemma1_over_eta(double D, double L1, double L2, const StepSchedule& schedule,
                                   long T, double delta, const MixingReport& mixing);

// Running sums of alpha_t and alpha_t^2 in extended precision.
struct ScheduleSums {
    double sum_alpha;
    double sum_alpha_sq;
};
ScheduleSums schedule_sums(const StepSchedule& schedule, long T);

}  // namespace msaddle
