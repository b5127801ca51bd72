#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "msaddle/gap.hpp"
#include "msaddle/markov.hpp"
#include "msaddle/saddle.hpp"

namespace msaddle {

// Finite MDP with target and behavior policies.  kernel[a](s, s') is the
// transition probability, reward(s, a) the immediate reward.
struct MdpSpec {
    std::vector<Eigen::MatrixXd> kernel;  // one S x S matrix per action
    Eigen::MatrixXd reward;               // S x A
    double gamma;
    Eigen::MatrixXd target_policy;        // S x A, rows stochastic
    Eigen::MatrixXd behavior_policy;      // S x A, rows stochastic

    Eigen::Index states() const { return reward.rows(); }
    Eigen::Index actions() const { return reward.cols(); }

    void validate() const;

    double r_max() const { return reward.cwiseAbs().maxCoeff(); }
    // max over realized (s, a) of target(a|s) / behavior(a|s).
    double rho_max() const;

    // Policy-averaged kernel P^mu and reward R^mu.
    Eigen::MatrixXd policy_kernel(const Eigen::MatrixXd& policy) const;
    Eigen::VectorXd policy_reward(const Eigen::MatrixXd& policy) const;
};

// Linear features, one row per state.  L is the max-norm bound of Assumption
// "bounded data"; ||phi(s)||_2 <= L*sqrt(d) is the 2-norm implication used in
// the constants.
struct FeatureMap {
    Eigen::MatrixXd phi;  // S x d

    Eigen::Index dimension() const { return phi.cols(); }
    double max_norm_bound() const { return phi.cwiseAbs().maxCoeff(); }

    static FeatureMap tabular(Eigen::Index states);
};

enum class GtdKind { GTD, GTD2 };    // M = I vs M = C
enum class PolicyMode { OnPolicy, OffPolicy };

struct TransitionSample {
    long s;
    long a;
    double r;
    long s_next;
};

struct SampleGradients {
    Eigen::MatrixXd A_hat;
    Eigen::VectorXd b_hat;
    Eigen::MatrixXd C_hat;
};

// Exact (A, b, C, M) for an MDP + feature map, plus the spectral quantities
// the error bounds consume.  Sampling state comes from the behavior chain.
struct GtdInstance {
    MdpSpec mdp;
    FeatureMap features;
    GtdKind kind;
    PolicyMode policy_mode;

    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    Eigen::MatrixXd C;
    Eigen::MatrixXd M;

    FiniteChain behavior_chain;   // state marginal chain under the behavior policy

    double lambda_M;              // largest singular value of M
    double lambda_C;              // largest singular value of C
    double nu_C;                  // smallest eigenvalue of C
    double nu_AtMinvA;            // smallest eigenvalue of A^T M^{-1} A
    double rho_max;
    double pi_max;
    double cond_A;
    double cond_C;

    Eigen::VectorXd solution() const;       // A^{-1} b
    double feature_bound() const { return features.max_norm_bound(); }

    TransitionSample draw_transition(long state, Rng& rng) const;
    double importance_weight(long s, long a) const;

private:
    friend GtdInstance exact_instance_matrices(const MdpSpec&, const FeatureMap&, GtdKind,
                                               PolicyMode);
    GtdInstance(MdpSpec mdp_in, FeatureMap features_in, GtdKind kind_in, PolicyMode mode_in,
                FiniteChain chain);
};

// Exact summation over (s, a, s') weighted by pi(s) * behavior(a|s) * P.
// Throws AssumptionError naming the offending matrix when A or C is singular.
GtdInstance exact_instance_matrices(const MdpSpec& mdp, const FeatureMap& features, GtdKind kind,
                                    PolicyMode mode);

// Per-sample estimators A^ = rho phi(s)(phi(s) - gamma phi(s'))^T,
// b^ = rho phi(s) r, C^ = phi(s) phi(s)^T.
SampleGradients sample_gradients(const GtdInstance& instance, const TransitionSample& xi);

// Saddle problem whose oracle reproduces the GTD update directions:
// G_x = -A^^T y (so descent x - alpha G_x ascends along A^^T y) and
// G_y = b^ - A^ x - M^ y.  The oracle draws (a, s') for each incoming chain
// state with its own stream seeded by `seed`.
StochasticSaddleProblem gtd_saddle_problem(const std::shared_ptr<const GtdInstance>& instance,
                                           double radius_x, double radius_y, std::uint64_t seed);

// Solves (I - gamma P^mu) V = R^mu.
Eigen::VectorXd exact_value(const MdpSpec& mdp, const Eigen::MatrixXd& policy);

// sqrt(sum_s pi(s) (V(s) - phi(s).x)^2) against the exact value of the target
// policy, pi the stationary distribution of the behavior chain.
double value_error(const GtdInstance& instance, const Eigen::VectorXd& x_tilde);

// ||Ax - b|| residual of the linear fixed point.
double fixed_point_residual(const GtdInstance& instance, const Eigen::VectorXd& x_tilde);

// --- built-in testbed MDPs ---------------------------------------------------

// Two states, one action, deterministic swap, r = (1, 0).
MdpSpec two_state_swap(double gamma = 0.5);
// Five states, actions {left, right}, moves clamped at the ends, reward 1 for
// any action taken in the last state.
MdpSpec five_state_walk(double gamma = 0.5);
// Dirichlet(1) transition rows, uniform behavior policy, seeded softmax
// target policy, rewards uniform in [-1, 1].
MdpSpec random_mdp(Eigen::Index states, Eigen::Index actions, std::uint64_t seed,
                   double gamma = 0.9);

// Plain text round-trip (schema documented in the README).
void save_mdp(const MdpSpec& mdp, const std::string& path);
MdpSpec load_mdp(const std::string& path);

}  // namespace msaddle
