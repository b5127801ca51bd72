#include "msaddle/markov.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace msaddle {

FiniteChain::FiniteChain(Eigen::MatrixXd P_in, Eigen::VectorXd pi_in)
    : P(std::move(P_in)), pi(std::move(pi_in)) {
    const Eigen::Index s = P.rows();
    if (P.cols() != s || pi.size() != s || s == 0) {
        throw std::invalid_argument("FiniteChain: P must be square and match pi");
    }
    if (P.minCoeff() < 0.0) throw std::invalid_argument("FiniteChain: negative transition entry");
    for (Eigen::Index i = 0; i < s; ++i) {
        if (std::abs(P.row(i).sum() - 1.0) > 1e-12) {
            throw std::invalid_argument("FiniteChain: row " + std::to_string(i) +
                                        " does not sum to 1");
        }
    }
    if (pi.minCoeff() < 0.0 || std::abs(pi.sum() - 1.0) > 1e-12) {
        throw std::invalid_argument("FiniteChain: pi must be a distribution");
    }
    const double stationarity = (pi.transpose() * P - pi.transpose()).cwiseAbs().maxCoeff();
    if (stationarity > 1e-10) {
        throw std::invalid_argument("FiniteChain: pi is not stationary (residual " +
                                    std::to_string(stationarity) + ")");
    }
}

double FiniteChain::detailed_balance_residual() const {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < size(); ++i) {
        for (Eigen::Index j = i + 1; j < size(); ++j) {
            worst = std::max(worst, std::abs(pi(i) * P(i, j) - pi(j) * P(j, i)));
        }
    }
    return worst;
}

bool FiniteChain::reversible(double tol) const { return detailed_balance_residual() <= tol; }

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& P) {
    const Eigen::Index s = P.rows();
    Eigen::MatrixXd lhs = P.transpose() - Eigen::MatrixXd::Identity(s, s);
    lhs.row(s - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(s);
    rhs(s - 1) = 1.0;
    Eigen::VectorXd pi = lhs.fullPivLu().solve(rhs);
    if ((pi.transpose() * P - pi.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
        throw NumericError("stationary_distribution: solve residual too large");
    }
    // Chop tiny negative round-off before validation.
    pi = pi.cwiseMax(0.0);
    pi /= pi.sum();
    return pi;
}

FiniteChain metropolis_hastings(const Eigen::VectorXd& pi, const Eigen::MatrixXd& Q,
                                double laziness) {
    const Eigen::Index s = pi.size();
    if (Q.rows() != s || Q.cols() != s) throw std::invalid_argument("metropolis_hastings: Q shape");
    if (pi.minCoeff() <= 0.0) throw std::invalid_argument("metropolis_hastings: pi must be strictly positive");
    if (laziness < 0.0 || laziness >= 1.0)
        throw std::invalid_argument("metropolis_hastings: laziness must be in [0,1)");
    for (Eigen::Index i = 0; i < s; ++i) {
        if (std::abs(Q.row(i).sum() - 1.0) > 1e-12 || Q.row(i).minCoeff() < 0.0) {
            throw std::invalid_argument("metropolis_hastings: Q row " + std::to_string(i) +
                                        " not stochastic");
        }
        for (Eigen::Index j = 0; j < s; ++j) {
            if (i != j && (Q(i, j) > 0.0) != (Q(j, i) > 0.0)) {
                throw std::invalid_argument("metropolis_hastings: proposal support asymmetry at (" +
                                            std::to_string(i) + "," + std::to_string(j) + ")");
            }
        }
    }

    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(s, s);
    for (Eigen::Index i = 0; i < s; ++i) {
        double off_mass = 0.0;
        for (Eigen::Index j = 0; j < s; ++j) {
            if (i == j || Q(i, j) == 0.0) continue;
            const double accept = std::min(1.0, pi(j) * Q(j, i) / (pi(i) * Q(i, j)));
            P(i, j) = (1.0 - laziness) * Q(i, j) * accept;
            off_mass += P(i, j);
        }
        // Accumulated off-diagonal mass can exceed 1 by a few ulps when the
        // row is dense; the true remainder is then exactly zero.
        P(i, i) = std::max(0.0, 1.0 - off_mass);
        if (off_mass > 1.0 + 1e-12) {
            throw NumericError("metropolis_hastings: row " + std::to_string(i) +
                               " mass exceeds 1");
        }
    }
    return FiniteChain(std::move(P), pi);
}

Eigen::MatrixXd random_walk_proposal(Eigen::Index states, Eigen::Index half_width) {
    if (half_width < 1 || half_width >= states)
        throw std::invalid_argument("random_walk_proposal: half_width out of range");
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(states, states);
    for (Eigen::Index i = 0; i < states; ++i) {
        Eigen::Index neighbours = 0;
        for (Eigen::Index k = 1; k <= half_width; ++k) {
            if (i - k >= 0) ++neighbours;
            if (i + k < states) ++neighbours;
        }
        // Full proposal mass on the in-range neighbours; rows near the walls
        // spread it over fewer targets and the MH acceptance restores detailed
        // balance.  Support stays symmetric (|i - j| <= half_width).
        const double step = 1.0 / static_cast<double>(neighbours);
        for (Eigen::Index k = 1; k <= half_width; ++k) {
            if (i - k >= 0) Q(i, i - k) = step;
            if (i + k < states) Q(i, i + k) = step;
        }
    }
    return Q;
}

namespace {

// Power iteration on the deflated (symmetrized when reversible) matrix.
double deflated_power_iteration(const FiniteChain& chain, double tol, long max_iterations) {
    const Eigen::Index s = chain.size();
    const bool reversible = chain.reversible();

    Eigen::MatrixXd B;
    if (reversible) {
        // Similarity transform D^{1/2} P D^{-1/2} is symmetric; deflate the
        // top eigenpair (1, sqrt(pi)).
        Eigen::VectorXd sq = chain.pi.cwiseSqrt();
        B = sq.asDiagonal() * chain.P * sq.cwiseInverse().asDiagonal();
        // Guard states with pi == 0 (sq.inverse would blow up).
        for (Eigen::Index i = 0; i < s; ++i) {
            if (chain.pi(i) == 0.0) {
                B.row(i).setZero();
                B.col(i).setZero();
            }
        }
        B -= sq * sq.transpose();
        B = 0.5 * (B + B.transpose());
    } else {
        B = chain.P - Eigen::VectorXd::Ones(s) * chain.pi.transpose();
    }

    Rng rng(0x5eed5eedULL);
    Eigen::VectorXd v(s);
    for (Eigen::Index i = 0; i < s; ++i) v(i) = rng.uniform() - 0.5;
    v.normalize();

    double estimate = 0.0;
    double previous = -1.0;
    double growth_prev = 0.0;
    for (long it = 1; it <= max_iterations; ++it) {
        Eigen::VectorXd w = B * v;
        const double growth = w.norm();
        if (growth < 1e-300) return 0.0;  // deflated operator is (numerically) zero
        if (reversible) {
            // Rayleigh quotient: squared convergence rate on the symmetric matrix.
            estimate = std::abs(v.dot(w));
        } else {
            // Geometric mean of consecutive growth factors damps the oscillation
            // of complex or sign-flipping pairs.
            estimate = (it == 1) ? growth : std::sqrt(growth * growth_prev);
        }
        growth_prev = growth;
        v = w / growth;
        if (it > 4 && std::abs(estimate - previous) <= tol * std::max(1.0, estimate)) {
            return std::min(estimate, 1.0);
        }
        previous = estimate;
    }
    throw NumericError("second_eigenvalue_modulus: no convergence after " +
                       std::to_string(max_iterations) + " iterations, residual " +
                       std::to_string(std::abs(estimate - previous)));
}

}  // namespace

double second_eigenvalue_modulus(const FiniteChain& chain, double tol, long max_iterations) {
    return deflated_power_iteration(chain, tol, max_iterations);
}

double second_eigenvalue_modulus_dense(const FiniteChain& chain) {
    Eigen::EigenSolver<Eigen::MatrixXd> solver(chain.P);
    std::vector<double> moduli;
    for (Eigen::Index i = 0; i < chain.size(); ++i) {
        moduli.push_back(std::abs(solver.eigenvalues()(i)));
    }
    std::sort(moduli.begin(), moduli.end(), std::greater<>());
    return moduli.size() > 1 ? moduli[1] : 0.0;
}

namespace {

// Signed extreme eigenvalues of the deflated symmetrized chain operator,
// via power iterations on shifted matrices (chain must be reversible).
struct SpectrumEnds {
    double second_largest;  // signed
    double smallest;        // signed
};

SpectrumEnds deflated_spectrum_ends(const FiniteChain& chain) {
    const Eigen::Index s = chain.size();
    Eigen::VectorXd sq = chain.pi.cwiseSqrt();
    Eigen::MatrixXd S = sq.asDiagonal() * chain.P * sq.cwiseInverse().asDiagonal();
    S = 0.5 * (S + S.transpose());

    // Moderate tolerance: the result only seeds the tuner, which verifies the
    // built chain with a full measurement.
    auto top_of = [&](const Eigen::MatrixXd& m) {
        Rng rng(0xabcdef12ULL);
        Eigen::VectorXd v(s);
        for (Eigen::Index i = 0; i < s; ++i) v(i) = rng.uniform() - 0.5;
        v.normalize();
        double rayleigh = 0.0;
        for (long it = 0; it < 5000; ++it) {
            Eigen::VectorXd w = m * v;
            const double norm = w.norm();
            if (norm < 1e-300) return 0.0;
            v = w / norm;
            const double r = v.dot(m * v);
            if (it > 4 && std::abs(r - rayleigh) <= 1e-6 * std::max(1.0, std::abs(r))) return r;
            rayleigh = r;
        }
        return rayleigh;
    };

    // Eigenvalues of S lie in [-1, 1] with the known top pair (1, sqrt(pi)).
    // For the second-largest, push the top pair to -1 so the +1 shift leaves
    // every other eigenvalue dominant; for the smallest, I - S already maps
    // the top pair to 0.
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(s, s);
    SpectrumEnds ends;
    ends.second_largest = top_of(S - 2.0 * (sq * sq.transpose()) + eye) - 1.0;
    ends.smallest = 1.0 - top_of(eye - S);
    return ends;
}

}  // namespace

TunedChain tune_spectral_gap(const Eigen::VectorXd& pi, double target_lambda2, double tolerance) {
    if (target_lambda2 <= 0.0 || target_lambda2 >= 1.0)
        throw std::invalid_argument("tune_spectral_gap: target must be in (0,1)");
    if (tolerance <= 0.0) throw std::invalid_argument("tune_spectral_gap: tolerance must be positive");
    const Eigen::Index s = pi.size();

    double best_reachable_low = 1.0;
    // Wide proposals give near-flat base spectra, so the laziness map reaches
    // low targets; narrow the proposal only if the wide ones cannot tune.
    for (Eigen::Index half_width : {s - 1, s / 2, s / 4, s / 8}) {
        if (half_width < 1) continue;
        const Eigen::MatrixXd Q = random_walk_proposal(s, half_width);
        const FiniteChain base = metropolis_hastings(pi, Q, 0.0);
        const SpectrumEnds ends = deflated_spectrum_ends(base);

        // lambda(lazy) = lazy + (1-lazy) * lambda(0); the second-largest branch
        // is monotone increasing in lazy, the negative branch shrinks.
        auto lambda_top = [&](double lazy) { return lazy + (1.0 - lazy) * ends.second_largest; };
        auto lambda_bottom = [&](double lazy) { return lazy + (1.0 - lazy) * ends.smallest; };
        auto predicted = [&](double lazy) {
            return std::max(lambda_top(lazy), std::abs(lambda_bottom(lazy)));
        };

        // Smallest laziness where the top branch dominates the bottom one.
        const double sum = ends.second_largest + ends.smallest;
        const double lazy_floor = std::max(0.0, -sum / (2.0 - sum));
        const double reachable_low = predicted(lazy_floor);
        best_reachable_low = std::min(best_reachable_low, reachable_low);
        if (target_lambda2 < reachable_low - 0.5 * tolerance) continue;

        auto measure = [&](double lazy) {
            FiniteChain candidate = metropolis_hastings(pi, Q, lazy);
            const double achieved = second_eigenvalue_modulus(candidate, 1e-7);
            return std::pair<FiniteChain, double>(std::move(candidate), achieved);
        };

        // Affine prediction seeds the search; each measurement re-implies the
        // base eigenvalue, so one secant correction usually lands on target.
        double lazy = std::clamp((target_lambda2 - ends.second_largest) /
                                     (1.0 - ends.second_largest),
                                 lazy_floor, 1.0 - 1e-9);
        double lo = lazy_floor, hi = 1.0 - 1e-9;
        for (int attempt = 0; attempt < 40; ++attempt) {
            auto [candidate, achieved] = measure(lazy);
            if (std::abs(achieved - target_lambda2) <= tolerance) {
                return TunedChain{std::move(candidate), achieved, lazy, half_width};
            }
            if (achieved < target_lambda2) {
                lo = std::max(lo, lazy);
            } else {
                hi = std::min(hi, lazy);
            }
            // Secant step via the implied base eigenvalue, clipped to the
            // current monotone bracket; fall back to plain bisection.
            const double implied = (achieved - lazy) / (1.0 - lazy);
            double next = (implied < 1.0) ? (target_lambda2 - implied) / (1.0 - implied) : lazy;
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (hi - lo < 1e-13) break;
            lazy = next;
        }
    }
    throw AssumptionError("tune_spectral_gap: target " + std::to_string(target_lambda2) +
                          " unreachable; reachable range is [" +
                          std::to_string(best_reachable_low) + ", 1)");
}

long MixingReport::tau(double eta) const {
    for (const auto& [level, value] : taus) {
        if (level == eta) return value;
    }
    throw std::invalid_argument("MixingReport: eta level was not measured");
}

MixingReport mixing_time(const FiniteChain& chain, const std::vector<double>& etas,
                         long delta_max) {
    if (etas.empty()) throw std::invalid_argument("mixing_time: need at least one eta");
    MixingReport report;
    report.second_eigenvalue_modulus = second_eigenvalue_modulus(chain);
    if (report.second_eigenvalue_modulus >= 1.0 - 1e-12) {
        throw AssumptionError("mixing_time: chain is not irreducible/aperiodic (lambda2 = " +
                              std::to_string(report.second_eigenvalue_modulus) + ")");
    }

    std::vector<double> pending = etas;
    std::sort(pending.begin(), pending.end(), std::greater<>());
    report.taus.reserve(etas.size());

    Eigen::MatrixXd power = chain.P;
    double last_distance = std::numeric_limits<double>::infinity();
    for (long delta = 1; delta <= delta_max; ++delta) {
        double distance = 0.0;
        for (Eigen::Index row = 0; row < chain.size(); ++row) {
            distance = std::max(distance, (power.row(row).transpose() - chain.pi).lpNorm<1>());
        }
        report.tv_curve.emplace_back(delta, distance);
        if (distance > last_distance + 1e-12) report.monotone_violation = true;
        last_distance = distance;

        while (!pending.empty() && distance <= pending.front()) {
            report.taus.emplace_back(pending.front(), delta);
            pending.erase(pending.begin());
        }
        if (pending.empty()) break;
        power = power * chain.P;
    }
    if (!pending.empty()) {
        std::ostringstream msg;
        msg << "mixing_time: cap " << delta_max << " reached before eta=" << pending.front()
            << " (distance " << last_distance << " after " << report.tv_curve.size() << " steps)";
        throw MixingTooSlowError(msg.str(), std::move(report.tv_curve));
    }
    // Report taus in the caller's eta order.
    std::vector<std::pair<double, long>> ordered;
    ordered.reserve(etas.size());
    for (double eta : etas) {
        for (const auto& entry : report.taus) {
            if (entry.first == eta) ordered.push_back(entry);
        }
    }
    report.taus = ordered;
    return report;
}

long two_state_mixing_time(double p, double q, double eta, long delta_max) {
    const double lambda = std::abs(1.0 - p - q);
    const double pi1 = q / (p + q);
    const double pi2 = p / (p + q);
    const double scale = 2.0 * std::max(pi1, pi2);
    double dist = scale;
    for (long delta = 1; delta <= delta_max; ++delta) {
        dist *= lambda;
        if (dist <= eta) return delta;
    }
    throw NumericError("two_state_mixing_time: cap reached");
}

// --- streams -----------------------------------------------------------------

long sample_from_cdf(const Eigen::VectorXd& cdf, double u) {
    const double* begin = cdf.data();
    const double* end = begin + cdf.size();
    const double* it = std::lower_bound(begin, end, u);
    if (it == end) --it;
    return static_cast<long>(it - begin);
}

namespace {

Eigen::VectorXd vector_cdf(const Eigen::VectorXd& pi) {
    Eigen::VectorXd cdf = pi;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < pi.size(); ++i) {
        acc += pi(i);
        cdf(i) = acc;
    }
    cdf(pi.size() - 1) = 1.0;
    return cdf;
}

}  // namespace

MarkovPathStream::MarkovPathStream(const FiniteChain& chain, long start_state, std::uint64_t seed)
    : state_(start_state), rng_(seed) {
    const Eigen::Index s = chain.size();
    if (start_state < 0 || start_state >= s) {
        throw std::invalid_argument("MarkovPathStream: start state out of range");
    }
    rows_.resize(s);
    for (Eigen::Index i = 0; i < s; ++i) {
        Row& row = rows_[i];
        row.diagonal = chain.P(i, i);
        row.uniform_off_diagonal = s > 1;
        double off = -1.0;
        for (Eigen::Index j = 0; j < s; ++j) {
            if (j == i) continue;
            if (off < 0.0) {
                off = chain.P(i, j);
            } else if (chain.P(i, j) != off) {
                row.uniform_off_diagonal = false;
                break;
            }
        }
        row.step = off;
        if (!row.uniform_off_diagonal || row.step <= 0.0) {
            row.uniform_off_diagonal = false;
            Eigen::VectorXd cdf(s);
            double acc = 0.0;
            for (Eigen::Index j = 0; j < s; ++j) {
                acc += chain.P(i, j);
                cdf(j) = acc;
            }
            cdf(s - 1) = 1.0;
            row.cdf = std::move(cdf);
        }
    }
}

long MarkovPathStream::next() {
    if (!emitted_start_) {
        emitted_start_ = true;
        return state_;
    }
    const Row& row = rows_[state_];
    const double u = rng_.uniform();
    if (row.uniform_off_diagonal) {
        if (u >= row.diagonal) {
            const long count = static_cast<long>(rows_.size()) - 1;
            long k = static_cast<long>((u - row.diagonal) / row.step);
            if (k >= count) k = count - 1;
            state_ = (k < state_) ? k : k + 1;
        }
    } else {
        state_ = sample_from_cdf(row.cdf, u);
    }
    return state_;
}

IidStationaryStream::IidStationaryStream(const FiniteChain& chain, std::uint64_t seed)
    : pi_cdf_(vector_cdf(chain.pi)), rng_(seed) {}

IidStationaryStream::IidStationaryStream(const Eigen::VectorXd& pi, std::uint64_t seed)
    : pi_cdf_(vector_cdf(pi)), rng_(seed) {}

long IidStationaryStream::next() { return sample_from_cdf(pi_cdf_, rng_.uniform()); }

ReplayStream::ReplayStream(std::unique_ptr<SampleStream> base, std::size_t capacity,
                           std::size_t warmup, std::uint64_t seed)
    : base_(std::move(base)), capacity_(capacity), rng_(seed) {
    for (std::size_t i = 0; i < warmup; ++i) push();
}

void ReplayStream::count_add(long state, long delta) {
    if (static_cast<std::size_t>(state) >= fenwick_.size()) {
        std::vector<std::uint64_t> grown(std::max<std::size_t>(state + 1, fenwick_.size() * 2), 0);
        // rebuild from scratch: walk the old tree via point queries
        std::vector<std::uint64_t> counts(fenwick_.size(), 0);
        for (std::size_t i = 0; i < fenwick_.size(); ++i) {
            std::uint64_t upto = 0, before = 0;
            for (std::size_t k = i + 1; k > 0; k -= k & (~k + 1)) upto += fenwick_[k - 1];
            for (std::size_t k = i; k > 0; k -= k & (~k + 1)) before += fenwick_[k - 1];
            counts[i] = upto - before;
        }
        fenwick_.assign(grown.size(), 0);
        for (std::size_t i = 0; i < counts.size(); ++i) {
            if (counts[i] == 0) continue;
            for (std::size_t k = i + 1; k <= fenwick_.size(); k += k & (~k + 1)) {
                fenwick_[k - 1] += counts[i];
            }
        }
    }
    for (std::size_t k = static_cast<std::size_t>(state) + 1; k <= fenwick_.size();
         k += k & (~k + 1)) {
        fenwick_[k - 1] += static_cast<std::uint64_t>(delta);
    }
}

long ReplayStream::count_select(std::uint64_t index) const {
    // largest position with prefix sum <= index
    std::size_t pos = 0;
    std::size_t mask = 1;
    while (mask * 2 <= fenwick_.size()) mask *= 2;
    std::uint64_t remaining = index;
    for (; mask > 0; mask /= 2) {
        const std::size_t candidate = pos + mask;
        if (candidate <= fenwick_.size() && fenwick_[candidate - 1] <= remaining) {
            pos = candidate;
            remaining -= fenwick_[candidate - 1];
        }
    }
    return static_cast<long>(pos);
}

void ReplayStream::push() {
    const long sample = base_->next();
    if (capacity_ == 0) {
        count_add(sample, 1);
        ++total_;
    } else {
        buffer_.push_back(sample);
        if (buffer_.size() > capacity_) buffer_.pop_front();
    }
}

long ReplayStream::next() {
    push();
    if (capacity_ == 0) {
        return count_select(rng_.uniform_index(total_));
    }
    const std::size_t idx = static_cast<std::size_t>(rng_.uniform_index(buffer_.size()));
    return buffer_[idx];
}

long FixedSequenceStream::next() {
    if (pos_ >= values_.size()) {
        throw StreamExhausted("FixedSequenceStream: exhausted after " +
                              std::to_string(values_.size()) + " samples");
    }
    return values_[pos_++];
}

// --- persistence ---------------------------------------------------------------

void save_chain(const FiniteChain& chain, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("save_chain: cannot open " + path);
    out << chain.size() << "\n";
    out << std::setprecision(17);
    for (Eigen::Index i = 0; i < chain.size(); ++i) {
        for (Eigen::Index j = 0; j < chain.size(); ++j) {
            out << chain.P(i, j) << (j + 1 == chain.size() ? "" : " ");
        }
        out << "\n";
    }
    for (Eigen::Index i = 0; i < chain.size(); ++i) {
        out << chain.pi(i) << (i + 1 == chain.size() ? "" : " ");
    }
    out << "\n";
}

FiniteChain load_chain(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("load_chain: cannot open " + path);
    Eigen::Index s = 0;
    if (!(in >> s) || s <= 0) throw std::invalid_argument("load_chain: bad state count");
    Eigen::MatrixXd P(s, s);
    for (Eigen::Index i = 0; i < s; ++i) {
        for (Eigen::Index j = 0; j < s; ++j) {
            if (!(in >> P(i, j))) throw std::invalid_argument("load_chain: truncated matrix");
        }
    }
    Eigen::VectorXd pi(s);
    for (Eigen::Index i = 0; i < s; ++i) {
        if (!(in >> pi(i))) throw std::invalid_argument("load_chain: truncated pi");
    }
    return FiniteChain(std::move(P), std::move(pi));
}

}  // namespace msaddle
