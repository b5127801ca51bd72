#include "msaddle/gtd.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>
#include <iomanip>

namespace msaddle {

void MdpSpec::validate() const {
    const Eigen::Index S = states();
    const Eigen::Index A = actions();
    if (S == 0 || A == 0) throw std::invalid_argument("MdpSpec: empty state or action space");
    if (gamma <= 0.0 || gamma >= 1.0) throw std::invalid_argument("MdpSpec: gamma must be in (0,1)");
    if (static_cast<Eigen::Index>(kernel.size()) != A)
        throw std::invalid_argument("MdpSpec: kernel must have one matrix per action");
    for (Eigen::Index a = 0; a < A; ++a) {
        if (kernel[a].rows() != S || kernel[a].cols() != S)
            throw std::invalid_argument("MdpSpec: kernel matrix shape mismatch");
        for (Eigen::Index s = 0; s < S; ++s) {
            if (kernel[a].row(s).minCoeff() < 0.0 || std::abs(kernel[a].row(s).sum() - 1.0) > 1e-12)
                throw std::invalid_argument("MdpSpec: transition row not stochastic");
        }
    }
    auto check_policy = [S, A](const Eigen::MatrixXd& policy, const char* name) {
        if (policy.rows() != S || policy.cols() != A)
            throw std::invalid_argument(std::string("MdpSpec: ") + name + " shape mismatch");
        for (Eigen::Index s = 0; s < S; ++s) {
            if (policy.row(s).minCoeff() < 0.0 || std::abs(policy.row(s).sum() - 1.0) > 1e-12)
                throw std::invalid_argument(std::string("MdpSpec: ") + name + " row not stochastic");
        }
    };
    check_policy(target_policy, "target policy");
    check_policy(behavior_policy, "behavior policy");
    for (Eigen::Index s = 0; s < S; ++s) {
        for (Eigen::Index a = 0; a < A; ++a) {
            if (target_policy(s, a) > 0.0 && behavior_policy(s, a) == 0.0) {
                throw AssumptionError("MdpSpec: behavior policy does not cover target action (s=" +
                                      std::to_string(s) + ", a=" + std::to_string(a) + ")");
            }
        }
    }
}

double MdpSpec::rho_max() const {
    double worst = 0.0;
    for (Eigen::Index s = 0; s < states(); ++s) {
        for (Eigen::Index a = 0; a < actions(); ++a) {
            if (behavior_policy(s, a) > 0.0) {
                worst = std::max(worst, target_policy(s, a) / behavior_policy(s, a));
            }
        }
    }
    return worst;
}

Eigen::MatrixXd MdpSpec::policy_kernel(const Eigen::MatrixXd& policy) const {
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(states(), states());
    for (Eigen::Index a = 0; a < actions(); ++a) {
        P += policy.col(a).asDiagonal() * kernel[a];
    }
    return P;
}

Eigen::VectorXd MdpSpec::policy_reward(const Eigen::MatrixXd& policy) const {
    return (policy.cwiseProduct(reward)).rowwise().sum();
}

FeatureMap FeatureMap::tabular(Eigen::Index states) {
    FeatureMap f;
    f.phi = Eigen::MatrixXd::Identity(states, states);
    return f;
}

namespace {

double smallest_eigenvalue(const Eigen::MatrixXd& sym) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (sym + sym.transpose()));
    return solver.eigenvalues().minCoeff();
}

double largest_singular_value(const Eigen::MatrixXd& m) {
    return m.jacobiSvd().singularValues()(0);
}

double smallest_singular_value(const Eigen::MatrixXd& m) {
    const auto sv = m.jacobiSvd().singularValues();
    return sv(sv.size() - 1);
}

}  // namespace

GtdInstance::GtdInstance(MdpSpec mdp_in, FeatureMap features_in, GtdKind kind_in,
                         PolicyMode mode_in, FiniteChain chain)
    : mdp(std::move(mdp_in)),
      features(std::move(features_in)),
      kind(kind_in),
      policy_mode(mode_in),
      behavior_chain(std::move(chain)) {}

GtdInstance exact_instance_matrices(const MdpSpec& mdp_in, const FeatureMap& features,
                                    GtdKind kind, PolicyMode mode) {
    MdpSpec mdp = mdp_in;
    if (mode == PolicyMode::OnPolicy) mdp.behavior_policy = mdp.target_policy;
    mdp.validate();
    if (features.phi.rows() != mdp.states())
        throw std::invalid_argument("exact_instance_matrices: feature rows != states");

    const Eigen::MatrixXd P_b = mdp.policy_kernel(mdp.behavior_policy);
    FiniteChain chain(P_b, stationary_distribution(P_b));

    GtdInstance inst(std::move(mdp), features, kind, mode, std::move(chain));
    const Eigen::Index S = inst.mdp.states();
    const Eigen::Index A = inst.mdp.actions();
    const Eigen::Index d = features.dimension();
    const Eigen::VectorXd& pi = inst.behavior_chain.pi;

    inst.A = Eigen::MatrixXd::Zero(d, d);
    inst.b = Eigen::VectorXd::Zero(d);
    inst.C = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index s = 0; s < S; ++s) {
        const Eigen::VectorXd phi_s = features.phi.row(s).transpose();
        inst.C += pi(s) * phi_s * phi_s.transpose();
        for (Eigen::Index a = 0; a < A; ++a) {
            const double mu_b = inst.mdp.behavior_policy(s, a);
            if (mu_b == 0.0) continue;
            const double rho = inst.mdp.target_policy(s, a) / mu_b;
            if (rho == 0.0) continue;
            const double w = pi(s) * mu_b * rho;  // = pi(s) * target(a|s)
            inst.b += w * inst.mdp.reward(s, a) * phi_s;
            Eigen::VectorXd expected_next = Eigen::VectorXd::Zero(d);
            for (Eigen::Index sn = 0; sn < S; ++sn) {
                const double p = inst.mdp.kernel[a](s, sn);
                if (p > 0.0) expected_next += p * features.phi.row(sn).transpose();
            }
            inst.A += w * phi_s * (phi_s - inst.mdp.gamma * expected_next).transpose();
        }
    }
    inst.M = (kind == GtdKind::GTD) ? Eigen::MatrixXd::Identity(d, d) : inst.C;

    const double sv_min_A = smallest_singular_value(inst.A);
    if (sv_min_A < 1e-12) throw AssumptionError("exact_instance_matrices: matrix A is singular");
    const double sv_min_C = smallest_singular_value(inst.C);
    if (sv_min_C < 1e-12) throw AssumptionError("exact_instance_matrices: matrix C is singular");

    inst.lambda_M = largest_singular_value(inst.M);
    inst.lambda_C = largest_singular_value(inst.C);
    inst.nu_C = smallest_eigenvalue(inst.C);
    const Eigen::MatrixXd MinvA = inst.M.ldlt().solve(inst.A);
    inst.nu_AtMinvA = smallest_eigenvalue(inst.A.transpose() * MinvA);
    inst.rho_max = inst.mdp.rho_max();
    inst.pi_max = pi.maxCoeff();
    inst.cond_A = largest_singular_value(inst.A) / sv_min_A;
    inst.cond_C = inst.lambda_C / sv_min_C;
    return inst;
}

Eigen::VectorXd GtdInstance::solution() const { return A.fullPivLu().solve(b); }

double GtdInstance::importance_weight(long s, long a) const {
    return mdp.target_policy(s, a) / mdp.behavior_policy(s, a);
}

TransitionSample GtdInstance::draw_transition(long state, Rng& rng) const {
    const Eigen::Index A_count = mdp.actions();
    double u = rng.uniform();
    long action = A_count - 1;
    double acc = 0.0;
    for (Eigen::Index a = 0; a < A_count; ++a) {
        acc += mdp.behavior_policy(state, a);
        if (u < acc) {
            action = a;
            break;
        }
    }
    u = rng.uniform();
    acc = 0.0;
    long next = mdp.states() - 1;
    for (Eigen::Index sn = 0; sn < mdp.states(); ++sn) {
        acc += mdp.kernel[action](state, sn);
        if (u < acc) {
            next = sn;
            break;
        }
    }
    return {state, action, mdp.reward(state, action), next};
}

SampleGradients sample_gradients(const GtdInstance& instance, const TransitionSample& xi) {
    const Eigen::VectorXd phi_s = instance.features.phi.row(xi.s).transpose();
    const Eigen::VectorXd phi_next = instance.features.phi.row(xi.s_next).transpose();
    const double rho = instance.importance_weight(xi.s, xi.a);
    SampleGradients g;
    g.A_hat = rho * phi_s * (phi_s - instance.mdp.gamma * phi_next).transpose();
    g.b_hat = rho * xi.r * phi_s;
    g.C_hat = phi_s * phi_s.transpose();
#ifndef NDEBUG
    // Sampled norm bounds from the bounded-data assumption; the max-norm
    // feature convention gives ||phi||_2 <= L sqrt(d).
    const double L = instance.features.max_norm_bound();
    const double d = static_cast<double>(instance.features.dimension());
    const double rho_max = instance.rho_max;
    const double a_cap = (1.0 + instance.mdp.gamma) * rho_max * L * L * d + 1e-9;
    const double b_cap = rho_max * L * std::sqrt(d) * instance.mdp.r_max() + 1e-9;
    if (g.A_hat.norm() > a_cap || g.b_hat.norm() > b_cap) {
        throw NumericError("sample_gradients: sampled estimator exceeded its norm bound");
    }
#endif
    return g;
}

StochasticSaddleProblem gtd_saddle_problem(const std::shared_ptr<const GtdInstance>& instance,
                                           double radius_x, double radius_y, std::uint64_t seed) {
    const Eigen::Index d = instance->features.dimension();
    StochasticSaddleProblem problem{BallDomain(d, radius_x), BallDomain(d, radius_y), nullptr,
                                    nullptr};
    auto rng = std::make_shared<Rng>(seed);
    problem.oracle = [instance, rng](const SaddlePoint& z, long state) {
        const TransitionSample xi = instance->draw_transition(state, *rng);
        const SampleGradients g = sample_gradients(*instance, xi);
        const Eigen::MatrixXd& M_hat =
            (instance->kind == GtdKind::GTD)
                ? Eigen::MatrixXd::Identity(g.C_hat.rows(), g.C_hat.cols())
                : g.C_hat;
        PartialGradients out;
        out.x = -g.A_hat.transpose() * z.y;
        out.y = g.b_hat - g.A_hat * z.x - M_hat * z.y;
        return out;
    };
    problem.exact_gradient = [instance](const SaddlePoint& z) {
        PartialGradients out;
        out.x = -instance->A.transpose() * z.y;
        out.y = instance->b - instance->A * z.x - instance->M * z.y;
        return out;
    };
    return problem;
}

Eigen::VectorXd exact_value(const MdpSpec& mdp, const Eigen::MatrixXd& policy) {
    const Eigen::Index S = mdp.states();
    const Eigen::MatrixXd P = mdp.policy_kernel(policy);
    const Eigen::VectorXd r = mdp.policy_reward(policy);
    const Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(S, S) - mdp.gamma * P;
    const Eigen::VectorXd v = lhs.fullPivLu().solve(r);
    if ((lhs * v - r).norm() > 1e-9 * std::max(1.0, r.norm())) {
        throw NumericError("exact_value: Bellman solve residual too large");
    }
    return v;
}

double value_error(const GtdInstance& instance, const Eigen::VectorXd& x_tilde) {
    if (x_tilde.size() != instance.features.dimension())
        throw std::invalid_argument("value_error: wrong coefficient length");
    const Eigen::VectorXd v = exact_value(instance.mdp, instance.mdp.target_policy);
    const Eigen::VectorXd approx = instance.features.phi * x_tilde;
    const Eigen::VectorXd diff = v - approx;
    return std::sqrt(diff.cwiseAbs2().dot(instance.behavior_chain.pi));
}

double fixed_point_residual(const GtdInstance& instance, const Eigen::VectorXd& x_tilde) {
    return (instance.A * x_tilde - instance.b).norm();
}

// --- built-in testbeds ----------------------------------------------------------

MdpSpec two_state_swap(double gamma) {
    MdpSpec mdp;
    Eigen::MatrixXd swap(2, 2);
    swap << 0, 1, 1, 0;
    mdp.kernel = {swap};
    mdp.reward = Eigen::MatrixXd(2, 1);
    mdp.reward << 1, 0;
    mdp.gamma = gamma;
    mdp.target_policy = Eigen::MatrixXd::Ones(2, 1);
    mdp.behavior_policy = Eigen::MatrixXd::Ones(2, 1);
    return mdp;
}

MdpSpec five_state_walk(double gamma) {
    const Eigen::Index S = 5;
    MdpSpec mdp;
    Eigen::MatrixXd left = Eigen::MatrixXd::Zero(S, S);
    Eigen::MatrixXd right = Eigen::MatrixXd::Zero(S, S);
    for (Eigen::Index s = 0; s < S; ++s) {
        left(s, std::max<Eigen::Index>(s - 1, 0)) = 1.0;
        right(s, std::min<Eigen::Index>(s + 1, S - 1)) = 1.0;
    }
    mdp.kernel = {left, right};
    mdp.reward = Eigen::MatrixXd::Zero(S, 2);
    mdp.reward(S - 1, 0) = 1.0;
    mdp.reward(S - 1, 1) = 1.0;
    mdp.gamma = gamma;
    mdp.target_policy = Eigen::MatrixXd::Constant(S, 2, 0.5);
    mdp.behavior_policy = Eigen::MatrixXd::Constant(S, 2, 0.5);
    return mdp;
}

MdpSpec random_mdp(Eigen::Index states, Eigen::Index actions, std::uint64_t seed, double gamma) {
    Rng rng(seed);
    auto dirichlet_row = [&rng](Eigen::Index n) {
        Eigen::VectorXd row(n);
        for (Eigen::Index i = 0; i < n; ++i) row(i) = -std::log(1.0 - rng.uniform());
        row /= row.sum();
        return row;
    };
    MdpSpec mdp;
    mdp.kernel.resize(actions, Eigen::MatrixXd::Zero(states, states));
    for (Eigen::Index a = 0; a < actions; ++a) {
        for (Eigen::Index s = 0; s < states; ++s) {
            mdp.kernel[a].row(s) = dirichlet_row(states).transpose();
        }
    }
    mdp.reward = Eigen::MatrixXd(states, actions);
    for (Eigen::Index s = 0; s < states; ++s) {
        for (Eigen::Index a = 0; a < actions; ++a) mdp.reward(s, a) = 2.0 * rng.uniform() - 1.0;
    }
    mdp.gamma = gamma;
    // Behavior: uniform.  Target: softmax of random scores (strictly positive,
    // so importance weights stay finite).
    mdp.behavior_policy = Eigen::MatrixXd::Constant(states, actions, 1.0 / actions);
    mdp.target_policy = Eigen::MatrixXd(states, actions);
    for (Eigen::Index s = 0; s < states; ++s) {
        Eigen::VectorXd scores(actions);
        for (Eigen::Index a = 0; a < actions; ++a) scores(a) = rng.normal();
        scores = (scores.array() - scores.maxCoeff()).exp();
        mdp.target_policy.row(s) = (scores / scores.sum()).transpose();
    }
    return mdp;
}

// --- persistence -----------------------------------------------------------------

void save_mdp(const MdpSpec& mdp, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("save_mdp: cannot open " + path);
    out << std::setprecision(17);
    out << mdp.states() << " " << mdp.actions() << "\n" << mdp.gamma << "\n";
    auto dump = [&out](const Eigen::MatrixXd& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                out << m(i, j) << (j + 1 == m.cols() ? "" : " ");
            }
            out << "\n";
        }
    };
    for (const auto& k : mdp.kernel) dump(k);
    dump(mdp.reward);
    dump(mdp.target_policy);
    dump(mdp.behavior_policy);
}

MdpSpec load_mdp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("load_mdp: cannot open " + path);
    Eigen::Index S = 0, A = 0;
    MdpSpec mdp;
    if (!(in >> S >> A >> mdp.gamma) || S <= 0 || A <= 0)
        throw std::invalid_argument("load_mdp: bad header");
    auto slurp = [&in](Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols) {
        m.resize(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i) {
            for (Eigen::Index j = 0; j < cols; ++j) {
                if (!(in >> m(i, j))) throw std::invalid_argument("load_mdp: truncated tensor");
            }
        }
    };
    mdp.kernel.resize(A);
    for (Eigen::Index a = 0; a < A; ++a) slurp(mdp.kernel[a], S, S);
    slurp(mdp.reward, S, A);
    slurp(mdp.target_policy, S, A);
    slurp(mdp.behavior_policy, S, A);
    mdp.validate();
    return mdp;
}

}  // namespace msaddle
