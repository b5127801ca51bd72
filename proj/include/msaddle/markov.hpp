#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <deque>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "msaddle/errors.hpp"
#include "msaddle/rng.hpp"

namespace msaddle {

// Finite-state chain: row-stochastic P with its stationary distribution.
// Construction validates stochasticity, stationarity and nonnegativity.
struct FiniteChain {
    Eigen::MatrixXd P;
    Eigen::VectorXd pi;

    FiniteChain(Eigen::MatrixXd P_in, Eigen::VectorXd pi_in);

    Eigen::Index size() const { return P.rows(); }
    bool reversible(double tol = 1e-12) const;
    double detailed_balance_residual() const;
};

// Solves pi^T P = pi^T, sum(pi) = 1 by a direct linear solve.
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& P);

// Metropolis-Hastings chain for target pi over proposal Q with a lazy
// self-loop component: off-diagonal (1-laziness)*Q[i][j]*min(1, pi_j Q[j][i] /
// (pi_i Q[i][j])), diagonal absorbing the remainder.  Detailed balance holds
// by construction.
FiniteChain metropolis_hastings(const Eigen::VectorXd& pi, const Eigen::MatrixXd& Q,
                                double laziness);

// Symmetric +/-k nearest-neighbour random-walk proposal on 0..S-1 with the
// leftover boundary mass placed on the diagonal.
Eigen::MatrixXd random_walk_proposal(Eigen::Index states, Eigen::Index half_width);

// Modulus of the second-largest eigenvalue, by power iteration on P deflated
// by the known (1, pi) pair.  Reversible chains iterate on the symmetrized
// D^{1/2} P D^{-1/2}.  Throws NumericError after max_iterations without
// convergence.
double second_eigenvalue_modulus(const FiniteChain& chain, double tol = 1e-10,
                                 long max_iterations = 100000);

// Dense eigensolve oracle for small chains (tests only).
double second_eigenvalue_modulus_dense(const FiniteChain& chain);

struct TunedChain {
    FiniteChain chain;
    double achieved_lambda2;
    double laziness;
    Eigen::Index proposal_half_width;
};

// Searches proposal locality and laziness of the MH construction until the
// second eigenvalue modulus is within tolerance of the target.  Uses the
// affine spectrum map lambda(lazy) = lazy + (1-lazy)*lambda(0) to seed a
// monotone bisection on the laziness, then verifies on the built chain.
// Throws AssumptionError with the reachable range if the target cannot be hit.
TunedChain tune_spectral_gap(const Eigen::VectorXd& pi, double target_lambda2, double tolerance);

struct MixingReport {
    double second_eigenvalue_modulus = 0.0;
    // (Delta, max over start states of the L1 distance ||P^Delta(s,.) - pi||_1)
    std::vector<std::pair<long, double>> tv_curve;
    // (eta, tau(eta)) with tau(eta) = min{Delta >= 1 : distance <= eta}
    std::vector<std::pair<double, long>> taus;
    bool monotone_violation = false;

    long tau(double eta) const;
};

// Raised when the step cap is reached before every eta level; carries the
// distance curve measured so far.
class MixingTooSlowError : public NumericError {
public:
    MixingTooSlowError(const std::string& what, std::vector<std::pair<long, double>> curve)
        : NumericError(what), partial_curve(std::move(curve)) {}
    std::vector<std::pair<long, double>> partial_curve;
};

// Iterates distribution rows of P^Delta and records the worst-start-state L1
// distance until every requested eta level is reached (cap delta_max).
MixingReport mixing_time(const FiniteChain& chain, const std::vector<double>& etas,
                         long delta_max = 1000000);

// Closed-form mixing diagnostics for the two-state chain [[1-p,p],[q,1-q]]:
// max_s L1(Delta) = |1-p-q|^Delta * 2*max(pi1, pi2).  Test oracle.
long two_state_mixing_time(double p, double q, double eta, long delta_max = 1000000);

// --- sample streams ---------------------------------------------------------

class SampleStream {
public:
    virtual ~SampleStream() = default;
    virtual long next() = 0;
};

// Emits the chain trajectory s0, s1, s2, ... by sequential row sampling.
// Rows whose off-diagonal entries are all equal (lazy chains over uniform
// proposals) are sampled in O(1); other rows fall back to a CDF search.
class MarkovPathStream : public SampleStream {
public:
    MarkovPathStream(const FiniteChain& chain, long start_state, std::uint64_t seed);
    long next() override;

private:
    struct Row {
        bool uniform_off_diagonal;
        double diagonal;
        double step;
        Eigen::VectorXd cdf;  // only filled for irregular rows
    };
    std::vector<Row> rows_;
    long state_;
    bool emitted_start_ = false;
    Rng rng_;
};

// Emits i.i.d. draws from the stationary distribution.
class IidStationaryStream : public SampleStream {
public:
    IidStationaryStream(const FiniteChain& chain, std::uint64_t seed);
    IidStationaryStream(const Eigen::VectorXd& pi, std::uint64_t seed);
    long next() override;

private:
    Eigen::VectorXd pi_cdf_;
    Rng rng_;
};

// Stores every incoming base sample and emits a uniform draw from the store.
// capacity == 0 keeps all history (stored as a per-state multiset with a
// Fenwick index, so arbitrarily long histories stay O(states) in memory);
// otherwise a FIFO window of the last `capacity` samples.
class ReplayStream : public SampleStream {
public:
    ReplayStream(std::unique_ptr<SampleStream> base, std::size_t capacity, std::size_t warmup,
                 std::uint64_t seed);
    long next() override;
    std::size_t buffer_size() const { return capacity_ == 0 ? total_ : buffer_.size(); }

private:
    void push();
    void count_add(long state, long delta);
    long count_select(std::uint64_t index) const;

    std::unique_ptr<SampleStream> base_;
    std::size_t capacity_;
    std::deque<long> buffer_;        // FIFO window (bounded mode)
    std::vector<std::uint64_t> fenwick_;  // multiset counts (unbounded mode)
    std::uint64_t total_ = 0;
    Rng rng_;
};

// Replays a recorded sequence; throws StreamExhausted at the end.
class FixedSequenceStream : public SampleStream {
public:
    explicit FixedSequenceStream(std::vector<long> values) : values_(std::move(values)) {}
    long next() override;

private:
    std::vector<long> values_;
    std::size_t pos_ = 0;
};

// Draws an index from a CDF row with a uniform variate (shared helper).
long sample_from_cdf(const Eigen::VectorXd& cdf, double u);

// Text round-trip: first line S, then S rows of P, then one row of pi,
// 17 significant digits.
void save_chain(const FiniteChain& chain, const std::string& path);
FiniteChain load_chain(const std::string& path);

}  // namespace msaddle
