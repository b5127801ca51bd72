#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "msaddle/bounds.hpp"
#include "msaddle/gap.hpp"
#include "msaddle/gtd.hpp"
#include "msaddle/markov.hpp"
#include "msaddle/saddle.hpp"

namespace msaddle {

struct ScheduleSpec {
    std::string name;   // constant | invsqrt | inv
    double coefficient;
    StepSchedule schedule() const { return StepSchedule::parse(name, coefficient); }
    std::string label() const;
};

// Flat key=value (or JSON) experiment configuration; unknown keys are errors.
struct ExperimentConfig {
    // simulation problem
    int n = 10;
    std::uint64_t instance_seed = 20240101;
    double noise_amplitude = 0.5;   // spectral-norm cap on per-state perturbations
    double radius_x = 10.0;
    double radius_y = 10.0;

    // data regimes
    int chain_states = 1001;
    double lambda2_slow = 0.634;
    double lambda2_fast = 0.31;
    double tune_tolerance = 0.015;
    std::vector<std::string> regimes = {"slow", "fast", "iid"};
    std::string replay = "both";    // both | on | off
    std::size_t replay_capacity = 0;  // 0 = unbounded
    std::size_t replay_warmup = 0;

    // optimization
    std::vector<ScheduleSpec> schedules = {
        {"constant", 0.001}, {"invsqrt", 0.015}, {"inv", 0.03}};
    long T = 200000;
    int checkpoints = 30;
    int seeds = 20;
    std::uint64_t base_seed = 1;
    // "origin" shows the full convergence transient; "saddle" starts at the
    // analytic saddle and isolates the sampling-noise effects.
    std::string start_at = "origin";

    // gtd study
    std::string mdp = "five_state_walk";
    std::string gtd_kind = "both";     // gtd | gtd2 | both
    std::string gtd_policy = "both";   // on | off | both
    double gtd_radius = 10.0;
    std::vector<std::string> gtd_regimes = {"iid", "markov", "replay"};
    std::vector<ScheduleSpec> gtd_schedules = {{"invsqrt", 2.0}};

    // bounds study
    std::string bound_source = "simulation";  // simulation | gtd | direct
    double delta = 0.05;
    std::vector<long> bound_T_grid = {100, 1000, 10000, 100000, 1000000};
    std::optional<double> bound_D;
    std::optional<double> bound_L1;
    std::optional<double> bound_L2;
    long bound_tau = -1;               // -1: measure from the configured chains
    double bound_eta = 0.05;           // eta paired with a fixed bound_tau

    // chain command
    double chain_target_lambda2 = 0.634;
    std::string chain_pi = "uniform";  // uniform | path to a distribution file

    // output
    std::string out_dir = "out";
    int threads = 0;                   // 0 = hardware concurrency

    static ExperimentConfig from_file(const std::string& path);
    void set(const std::string& key, const std::string& value);
    void apply_smoke();                // T = 1000, 2 seeds
    void validate() const;

    std::string canonical_text() const;
    std::uint64_t hash() const;
};

// Per-state sample family (A^(s), b^(s)) with exact stationary mean (A, b):
// trigonometric zero-mean perturbations of spectral norm <= noise_amplitude.
struct SimulationInstance {
    BilinearQuadraticProblem expected;
    std::vector<Eigen::MatrixXd> A_hat;
    std::vector<Eigen::VectorXd> b_hat;
    double noise_bound;

    StochasticSaddleProblem as_saddle_problem() const;
    // max spectral norm of mean_pi[A^(s)] - A and mean_pi[b^(s)] - b.
    double mean_deviation(const Eigen::VectorXd& pi) const;
};

SimulationInstance make_simulation_instance(int n, int states, std::uint64_t instance_seed,
                                            double noise_amplitude, double radius_x,
                                            double radius_y);

// --- study results (in-memory; the commands add file output) ----------------

struct CellKey {
    std::string schedule_label;
    std::string regime;
    bool replay;
    std::string id() const;
};

struct SeedCurve {
    std::uint64_t seed;
    std::vector<std::pair<long, double>> points;  // (t, metric value)
};

struct CellCurves {
    CellKey key;
    std::string metric;
    std::vector<SeedCurve> seeds;

    std::vector<long> grid() const;
    std::vector<double> mean() const;
    double final_mean() const;
    double final_stderr() const;
};

struct ChainDiagnostics {
    std::string name;
    double target_lambda2;
    double achieved_lambda2;
    double laziness;
    MixingReport mixing;
};

struct Figure1Results {
    std::vector<CellCurves> cells;
    std::vector<ChainDiagnostics> chains;
    std::shared_ptr<SimulationInstance> instance;
    std::vector<long> checkpoint_grid;

    const CellCurves& cell(const std::string& schedule_label, const std::string& regime,
                           bool replay) const;
};

Figure1Results run_figure1_study(const ExperimentConfig& config,
                                 const std::vector<double>& mixing_etas = {0.1, 0.05, 0.01});

// Pooled standard error of the difference of two seed-level final means.
double pooled_stderr(const CellCurves& a, const CellCurves& b);

// --- commands (return process exit codes) ------------------------------------

int cmd_figure1(const ExperimentConfig& config);
int cmd_gtd(const ExperimentConfig& config);
int cmd_bounds(const ExperimentConfig& config);
int cmd_chain(const ExperimentConfig& config);

// --- output helpers -----------------------------------------------------------

// Fixed record schema: t,metric,value,seed,regime,schedule,replay.
struct CsvRow {
    long t;
    std::string metric;
    double value;
    std::string seed;
    std::string regime;
    std::string schedule;
    int replay;
};

std::string csv_render(const std::vector<CsvRow>& rows);
std::vector<CsvRow> csv_parse(const std::string& text);
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);
std::string format_g17(double v);
// Shortest decimal string that parses back to exactly v (labels, stdout).
std::string format_shortest(double v);

// SVG panels derived purely from a mean CSV (so plots can be regenerated from
// the data files alone): filename stem -> svg document.
std::map<std::string, std::string> figure1_svgs_from_csv(const std::string& csv_text);
std::map<std::string, std::string> gtd_svgs_from_csv(const std::string& csv_text);

// Log-log polyline panel; curves keyed by legend label.
struct SvgCurve {
    std::string label;
    std::vector<std::pair<double, double>> points;
};
std::string render_loglog_svg(const std::string& title, const std::vector<SvgCurve>& curves,
                              const std::string& x_label, const std::string& y_label);

}  // namespace msaddle
