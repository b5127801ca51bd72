#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "msaddle/bounds.hpp"
#include "msaddle/experiment.hpp"
#include "msaddle/gap.hpp"
#include "msaddle/gtd.hpp"
#include "msaddle/markov.hpp"
#include "msaddle/saddle.hpp"

namespace py = pybind11;
using namespace msaddle;

PYBIND11_MODULE(msaddle, m) {
    m.doc() = "Projected saddle-point SGD under Markov sampling, GTD policy evaluation, "
              "mixing diagnostics and finite-sample bound evaluation";

    py::register_exception<NumericError>(m, "NumericError");
    py::register_exception<SolverError>(m, "SolverError");
    py::register_exception<AssumptionError>(m, "AssumptionError");
    py::register_exception<StreamExhausted>(m, "StreamExhausted");
    py::register_exception<ConfigError>(m, "ConfigError");

    // --- saddle core ---
    py::class_<BallDomain>(m, "BallDomain")
        .def(py::init<Eigen::Index, double>(), py::arg("dimension"), py::arg("radius"))
        .def(py::init<Eigen::VectorXd, double>(), py::arg("center"), py::arg("radius"))
        .def_readonly("center", &BallDomain::center)
        .def_readonly("radius", &BallDomain::radius)
        .def("dimension", &BallDomain::dimension)
        .def("diameter", &BallDomain::diameter)
        .def("contains", &BallDomain::contains, py::arg("v"), py::arg("tol") = 1e-9);

    m.def("project", &project, py::arg("domain"), py::arg("v"));

    py::class_<SaddlePoint>(m, "SaddlePoint")
        .def(py::init([](Eigen::VectorXd x, Eigen::VectorXd y) {
                 return SaddlePoint{std::move(x), std::move(y)};
             }),
             py::arg("x"), py::arg("y"))
        .def_readwrite("x", &SaddlePoint::x)
        .def_readwrite("y", &SaddlePoint::y);

    py::class_<StepSchedule>(m, "StepSchedule")
        .def_static("parse", &StepSchedule::parse, py::arg("kind"), py::arg("coefficient"))
        .def("alpha", &StepSchedule::alpha, py::arg("t"))
        .def("alpha0", &StepSchedule::alpha0)
        .def("name", &StepSchedule::name);

    py::class_<TrajectoryCheckpoint>(m, "TrajectoryCheckpoint")
        .def_readonly("t", &TrajectoryCheckpoint::t)
        .def_readonly("average", &TrajectoryCheckpoint::average)
        .def_readonly("weight_sum", &TrajectoryCheckpoint::weight_sum);

    py::class_<AveragedTrajectory>(m, "AveragedTrajectory")
        .def_readonly("checkpoints", &AveragedTrajectory::checkpoints)
        .def_readonly("final_average", &AveragedTrajectory::final_average)
        .def_readonly("final_weight_sum", &AveragedTrajectory::final_weight_sum)
        .def_readonly("horizon", &AveragedTrajectory::horizon);

    m.def("log_spaced_checkpoints", &log_spaced_checkpoints, py::arg("lo"), py::arg("hi"),
          py::arg("count"));

    // --- gap metrics ---
    py::class_<BilinearQuadraticProblem>(m, "BilinearQuadraticProblem")
        .def(py::init<Eigen::MatrixXd, Eigen::VectorXd, double, Eigen::MatrixXd, BallDomain,
                      BallDomain>(),
             py::arg("A"), py::arg("b"), py::arg("mu_x"), py::arg("M_y"), py::arg("domain_x"),
             py::arg("domain_y"))
        .def_readonly("A", &BilinearQuadraticProblem::A)
        .def_readonly("b", &BilinearQuadraticProblem::b)
        .def_readonly("mu_x", &BilinearQuadraticProblem::mu_x)
        .def_readonly("M_y", &BilinearQuadraticProblem::M_y)
        .def("value", &BilinearQuadraticProblem::value, py::arg("x"), py::arg("y"))
        .def("unconstrained_saddle", &BilinearQuadraticProblem::unconstrained_saddle)
        .def("lipschitz_l1", &BilinearQuadraticProblem::lipschitz_l1, py::arg("slack_A") = 0.0,
             py::arg("slack_b") = 0.0)
        .def("lipschitz_l2", &BilinearQuadraticProblem::lipschitz_l2, py::arg("slack_A") = 0.0);

    py::class_<GapReport>(m, "GapReport")
        .def_readonly("gap", &GapReport::gap)
        .def_readonly("inner_max_y", &GapReport::inner_max_y)
        .def_readonly("inner_min_x", &GapReport::inner_min_x)
        .def_readonly("solver_iterations", &GapReport::solver_iterations);

    m.def("primal_dual_gap", &primal_dual_gap, py::arg("problem"), py::arg("z"));
    m.def("brute_force_gap", &brute_force_gap, py::arg("problem"), py::arg("z"),
          py::arg("points_per_axis") = 41);

    // --- markov data ---
    py::class_<FiniteChain>(m, "FiniteChain")
        .def(py::init<Eigen::MatrixXd, Eigen::VectorXd>(), py::arg("P"), py::arg("pi"))
        .def_readonly("P", &FiniteChain::P)
        .def_readonly("pi", &FiniteChain::pi)
        .def("size", &FiniteChain::size)
        .def("reversible", &FiniteChain::reversible, py::arg("tol") = 1e-12)
        .def("detailed_balance_residual", &FiniteChain::detailed_balance_residual);

    m.def("stationary_distribution", &stationary_distribution, py::arg("P"));
    m.def("metropolis_hastings", &metropolis_hastings, py::arg("pi"), py::arg("Q"),
          py::arg("laziness"));
    m.def("random_walk_proposal", &random_walk_proposal, py::arg("states"), py::arg("half_width"));
    m.def("second_eigenvalue_modulus", &second_eigenvalue_modulus, py::arg("chain"),
          py::arg("tol") = 1e-10, py::arg("max_iterations") = 100000);

    py::class_<TunedChain>(m, "TunedChain")
        .def_readonly("chain", &TunedChain::chain)
        .def_readonly("achieved_lambda2", &TunedChain::achieved_lambda2)
        .def_readonly("laziness", &TunedChain::laziness);
    m.def("tune_spectral_gap", &tune_spectral_gap, py::arg("pi"), py::arg("target_lambda2"),
          py::arg("tolerance"));

    py::class_<MixingReport>(m, "MixingReport")
        .def_readonly("second_eigenvalue_modulus", &MixingReport::second_eigenvalue_modulus)
        .def_readonly("tv_curve", &MixingReport::tv_curve)
        .def_readonly("taus", &MixingReport::taus)
        .def("tau", &MixingReport::tau, py::arg("eta"));
    m.def("mixing_time", &mixing_time, py::arg("chain"), py::arg("etas"),
          py::arg("delta_max") = 1000000);

    py::class_<SampleStream>(m, "SampleStream")
        .def("next", &SampleStream::next);
    py::class_<MarkovPathStream, SampleStream>(m, "MarkovPathStream")
        .def(py::init<const FiniteChain&, long, std::uint64_t>(), py::arg("chain"),
             py::arg("start_state"), py::arg("seed"));
    py::class_<IidStationaryStream, SampleStream>(m, "IidStationaryStream")
        .def(py::init<const FiniteChain&, std::uint64_t>(), py::arg("chain"), py::arg("seed"));
    m.def(
        "replay_over_markov_path",
        [](const FiniteChain& chain, long start, std::size_t capacity, std::size_t warmup,
           std::uint64_t seed) {
            auto base = std::make_unique<MarkovPathStream>(chain, start, seed);
            return std::make_unique<ReplayStream>(std::move(base), capacity, warmup,
                                                  Rng::mix(seed, 0x7e91aULL));
        },
        py::arg("chain"), py::arg("start_state"), py::arg("capacity"), py::arg("warmup"),
        py::arg("seed"));
    py::class_<ReplayStream, SampleStream>(m, "ReplayStream");

    m.def("save_chain", &save_chain, py::arg("chain"), py::arg("path"));
    m.def("load_chain", &load_chain, py::arg("path"));

    // --- gtd evaluation ---
    py::enum_<GtdKind>(m, "GtdKind").value("GTD", GtdKind::GTD).value("GTD2", GtdKind::GTD2);
    py::enum_<PolicyMode>(m, "PolicyMode")
        .value("OnPolicy", PolicyMode::OnPolicy)
        .value("OffPolicy", PolicyMode::OffPolicy);

    py::class_<MdpSpec>(m, "MdpSpec")
        .def_readwrite("kernel", &MdpSpec::kernel)
        .def_readwrite("reward", &MdpSpec::reward)
        .def_readwrite("gamma", &MdpSpec::gamma)
        .def_readwrite("target_policy", &MdpSpec::target_policy)
        .def_readwrite("behavior_policy", &MdpSpec::behavior_policy)
        .def("states", &MdpSpec::states)
        .def("actions", &MdpSpec::actions)
        .def("validate", &MdpSpec::validate)
        .def("rho_max", &MdpSpec::rho_max);

    m.def("two_state_swap", &two_state_swap, py::arg("gamma") = 0.5);
    m.def("five_state_walk", &five_state_walk, py::arg("gamma") = 0.9);
    m.def("random_mdp", &random_mdp, py::arg("states"), py::arg("actions"), py::arg("seed"),
          py::arg("gamma") = 0.9);
    m.def("save_mdp", &save_mdp, py::arg("mdp"), py::arg("path"));
    m.def("load_mdp", &load_mdp, py::arg("path"));

    py::class_<FeatureMap>(m, "FeatureMap")
        .def_static("tabular", &FeatureMap::tabular, py::arg("states"))
        .def_readwrite("phi", &FeatureMap::phi)
        .def("dimension", &FeatureMap::dimension)
        .def("max_norm_bound", &FeatureMap::max_norm_bound);

    py::class_<TransitionSample>(m, "TransitionSample")
        .def_readonly("s", &TransitionSample::s)
        .def_readonly("a", &TransitionSample::a)
        .def_readonly("r", &TransitionSample::r)
        .def_readonly("s_next", &TransitionSample::s_next);

    py::class_<SampleGradients>(m, "SampleGradients")
        .def_readonly("A_hat", &SampleGradients::A_hat)
        .def_readonly("b_hat", &SampleGradients::b_hat)
        .def_readonly("C_hat", &SampleGradients::C_hat);

    py::class_<GtdInstance, std::shared_ptr<GtdInstance>>(m, "GtdInstance")
        .def_readonly("A", &GtdInstance::A)
        .def_readonly("b", &GtdInstance::b)
        .def_readonly("C", &GtdInstance::C)
        .def_readonly("M", &GtdInstance::M)
        .def_readonly("behavior_chain", &GtdInstance::behavior_chain)
        .def_readonly("lambda_M", &GtdInstance::lambda_M)
        .def_readonly("lambda_C", &GtdInstance::lambda_C)
        .def_readonly("nu_C", &GtdInstance::nu_C)
        .def_readonly("nu_AtMinvA", &GtdInstance::nu_AtMinvA)
        .def_readonly("rho_max", &GtdInstance::rho_max)
        .def_readonly("pi_max", &GtdInstance::pi_max)
        .def("solution", &GtdInstance::solution);

    m.def(
        "exact_instance_matrices",
        [](const MdpSpec& mdp, const FeatureMap& features, GtdKind kind, PolicyMode mode) {
            return std::make_shared<GtdInstance>(exact_instance_matrices(mdp, features, kind, mode));
        },
        py::arg("mdp"), py::arg("features"), py::arg("kind"), py::arg("mode"));
    m.def(
        "sample_gradients",
        [](const std::shared_ptr<GtdInstance>& instance, const TransitionSample& xi) {
            return sample_gradients(*instance, xi);
        },
        py::arg("instance"), py::arg("xi"));
    m.def("exact_value", &exact_value, py::arg("mdp"), py::arg("policy"));
    m.def(
        "value_error",
        [](const std::shared_ptr<GtdInstance>& instance, const Eigen::VectorXd& x) {
            return value_error(*instance, x);
        },
        py::arg("instance"), py::arg("x"));

    // --- bounds ---
    py::class_<BoundBreakdown>(m, "BoundBreakdown")
        .def_readonly("sum_alpha", &BoundBreakdown::sum_alpha)
        .def_readonly("sum_alpha_sq", &BoundBreakdown::sum_alpha_sq)
        .def_readonly("term_base", &BoundBreakdown::term_base)
        .def_readonly("term_variance", &BoundBreakdown::term_variance)
        .def_readonly("term_mixing_sq", &BoundBreakdown::term_mixing_sq)
        .def_readonly("term_eta", &BoundBreakdown::term_eta)
        .def_readonly("term_tail", &BoundBreakdown::term_tail)
        .def_readonly("term_deviation", &BoundBreakdown::term_deviation)
        .def_readonly("expectation", &BoundBreakdown::expectation)
        .def_readonly("high_probability", &BoundBreakdown::high_probability);

    auto make_inputs = [](double D, double L1, double L2, const StepSchedule& schedule, long T,
                          long tau, double eta, double delta) {
        return BoundInputs{D, L1, L2, schedule, T, tau, eta, delta};
    };
    m.def(
        "theorem1_bound",
        [make_inputs](double D, double L1, double L2, const StepSchedule& schedule, long T,
                      long tau, double eta, double delta) {
            return theorem1_bound(make_inputs(D, L1, L2, schedule, T, tau, eta, delta));
        },
        py::arg("D"), py::arg("L1"), py::arg("L2"), py::arg("schedule"), py::arg("T"),
        py::arg("tau"), py::arg("eta"), py::arg("delta"));
    m.def(
        "lemma1_bound",
        [make_inputs](double D, double L1, double L2, const StepSchedule& schedule, long T,
                      long tau, double eta, double delta) {
            return lemma1_bound(make_inputs(D, L1, L2, schedule, T, tau, eta, delta));
        },
        py::arg("D"), py::arg("L1"), py::arg("L2"), py::arg("schedule"), py::arg("T"),
        py::arg("tau"), py::arg("eta"), py::arg("delta"));
    m.def(
        "bound_breakdown",
        [make_inputs](double D, double L1, double L2, const StepSchedule& schedule, long T,
                      long tau, double eta, double delta) {
            return bound_breakdown(make_inputs(D, L1, L2, schedule, T, tau, eta, delta));
        },
        py::arg("D"), py::arg("L1"), py::arg("L2"), py::arg("schedule"), py::arg("T"),
        py::arg("tau"), py::arg("eta"), py::arg("delta"));

    py::class_<GtdConstants>(m, "GtdConstants")
        .def(py::init([](double gamma, double rho_max, double L, double d, double R_max,
                         double lambda_M, double lambda_C, double nu_C, double nu_AtMinvA,
                         double pi_max) {
                 return GtdConstants{gamma, rho_max, L,    d,          R_max,
                                     lambda_M, lambda_C, nu_C, nu_AtMinvA, pi_max};
             }),
             py::arg("gamma"), py::arg("rho_max"), py::arg("L"), py::arg("d"), py::arg("R_max"),
             py::arg("lambda_M"), py::arg("lambda_C") = 1.0, py::arg("nu_C") = 1.0,
             py::arg("nu_AtMinvA") = 1.0, py::arg("pi_max") = 1.0);

    py::class_<LipschitzPair>(m, "LipschitzPair")
        .def_readonly("L1", &LipschitzPair::L1)
        .def_readonly("L2", &LipschitzPair::L2);
    m.def("proposition1_constants", &proposition1_constants, py::arg("constants"), py::arg("D"));

    py::enum_<BoundMode>(m, "BoundMode")
        .value("OnPolicy", BoundMode::OnPolicy)
        .value("OffPolicy", BoundMode::OffPolicy);
    py::enum_<BoundKind>(m, "BoundKind")
        .value("Expectation", BoundKind::Expectation)
        .value("HighProbability", BoundKind::HighProbability);
    py::class_<OrderValue>(m, "OrderValue")
        .def_readonly("value", &OrderValue::value)
        .def_readonly("o1", &OrderValue::o1)
        .def_readonly("o2", &OrderValue::o2);
    m.def("theorem2_order", &theorem2_order, py::arg("constants"), py::arg("schedule"),
          py::arg("T"), py::arg("tau"), py::arg("delta"), py::arg("mode"), py::arg("kind"));

    // --- runners ---
    m.def(
        "run_gtd",
        [](const std::shared_ptr<const GtdInstance>& instance, SampleStream& stream,
           const StepSchedule& schedule, long T, double radius, std::uint64_t oracle_seed,
           const std::vector<long>& checkpoints) {
            StochasticSaddleProblem problem = gtd_saddle_problem(instance, radius, radius,
                                                                 oracle_seed);
            SaddlePoint start{Eigen::VectorXd::Zero(instance->features.dimension()),
                              Eigen::VectorXd::Zero(instance->features.dimension())};
            return run_sgd(problem, stream, schedule, T, start, checkpoints);
        },
        py::arg("instance"), py::arg("stream"), py::arg("schedule"), py::arg("T"),
        py::arg("radius"), py::arg("oracle_seed"), py::arg("checkpoints"));
    m.def(
        "run_simulation",
        [](int n, int states, std::uint64_t instance_seed, double noise, double radius_x,
           double radius_y, SampleStream& stream, const StepSchedule& schedule, long T,
           const std::vector<long>& checkpoints) {
            const SimulationInstance instance =
                make_simulation_instance(n, states, instance_seed, noise, radius_x, radius_y);
            const StochasticSaddleProblem problem = instance.as_saddle_problem();
            SaddlePoint start{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
            const AveragedTrajectory trajectory =
                run_sgd(problem, stream, schedule, T, start, checkpoints);
            std::vector<std::pair<long, double>> gaps;
            gaps.reserve(trajectory.checkpoints.size());
            for (const auto& cp : trajectory.checkpoints) {
                gaps.emplace_back(cp.t, primal_dual_gap(instance.expected, cp.average).gap);
            }
            return gaps;
        },
        py::arg("n"), py::arg("states"), py::arg("instance_seed"), py::arg("noise"),
        py::arg("radius_x"), py::arg("radius_y"), py::arg("stream"), py::arg("schedule"),
        py::arg("T"), py::arg("checkpoints"));
}
