#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>

#include "msaddle/experiment.hpp"

using namespace msaddle;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("msaddle_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Small, chain-light configuration for fast end-to-end runs.
ExperimentConfig tiny_config(const std::string& out) {
    ExperimentConfig config;
    config.n = 4;
    config.chain_states = 31;
    config.T = 400;
    config.seeds = 2;
    config.checkpoints = 6;
    config.schedules = {{"constant", 0.002}};
    config.out_dir = out;
    config.threads = 2;
    return config;
}

}  // namespace

TEST_CASE("key=value config files parse with comments and unknown keys fail") {
    const fs::path dir = temp_dir("config");
    const fs::path path = dir / "config.txt";
    {
        std::ofstream out(path);
        out << "# comment line\n";
        out << "n = 6\n";
        out << "T = 5000   # trailing comment\n";
        out << "schedules = constant:0.01,inv:0.5\n";
        out << "regimes = iid,fast\n";
        out << "replay = off\n";
    }
    ExperimentConfig config = ExperimentConfig::from_file(path.string());
    CHECK(config.n == 6);
    CHECK(config.T == 5000);
    CHECK(config.schedules.size() == 2);
    CHECK(config.schedules[1].name == "inv");
    CHECK(config.regimes == std::vector<std::string>({"iid", "fast"}));

    {
        std::ofstream out(path);
        out << "unknown_key = 3\n";
    }
    CHECK_THROWS_AS(ExperimentConfig::from_file(path.string()), ConfigError);
    {
        std::ofstream out(path);
        out << "T = notanumber\n";
    }
    CHECK_THROWS_AS(ExperimentConfig::from_file(path.string()), ConfigError);
    fs::remove_all(dir);
}

TEST_CASE("json config files parse") {
    const fs::path dir = temp_dir("json");
    const fs::path path = dir / "config.json";
    {
        std::ofstream out(path);
        out << R"({"n": 5, "T": 2000, "schedules": ["invsqrt:0.1"], "replay": "on"})";
    }
    ExperimentConfig config = ExperimentConfig::from_file(path.string());
    CHECK(config.n == 5);
    CHECK(config.T == 2000);
    CHECK(config.schedules.size() == 1);
    CHECK(config.replay == "on");
    fs::remove_all(dir);
}

TEST_CASE("smoke mode pins T and seeds") {
    ExperimentConfig config;
    config.apply_smoke();
    CHECK(config.T == 1000);
    CHECK(config.seeds == 2);
}

TEST_CASE("simulation instance has unit norms and an exactly centered family") {
    const SimulationInstance instance = make_simulation_instance(10, 1001, 20240101, 0.5, 10, 10);
    CHECK(instance.expected.A.jacobiSvd().singularValues()(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(instance.expected.b.norm() == doctest::Approx(1.0).epsilon(1e-12));

    // per-state perturbations stay within the configured spectral budget
    double worst = 0.0;
    for (std::size_t s = 0; s < instance.A_hat.size(); ++s) {
        worst = std::max(worst, (instance.A_hat[s] - instance.expected.A)
                                    .jacobiSvd()
                                    .singularValues()(0));
        worst = std::max(worst, (instance.b_hat[s] - instance.expected.b).norm());
    }
    CHECK(worst <= 0.5 + 1e-12);
    CHECK(worst > 0.05);  // the family is genuinely noisy

    // stationary mean deviation vanishes under the uniform distribution
    const Eigen::VectorXd pi = Eigen::VectorXd::Constant(1001, 1.0 / 1001.0);
    CHECK(instance.mean_deviation(pi) <= 1e-12);
}

TEST_CASE("csv rendering is stable and parses back") {
    std::vector<CsvRow> rows = {
        {10, "gap", 0.5, "1", "iid", "constant:0.001", 0},
        {100, "gap", 0.25, "1", "slow", "constant:0.001", 1},
    };
    const std::string text = csv_render(rows);
    CHECK(text.find("t,metric,value,seed,regime,schedule,replay\n") != std::string::npos);
    CHECK(text.find("# msaddle csv schema v1") == 0);
    const auto parsed = csv_parse(text);
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[0].t == 10);
    CHECK(parsed[1].regime == "slow");
    CHECK(parsed[1].replay == 1);
    CHECK(parsed[1].value == 0.25);
}

TEST_CASE("figure1 command writes cells, means, panels and metadata") {
    const fs::path dir = temp_dir("fig1");
    ExperimentConfig config = tiny_config((dir / "out").string());
    config.regimes = {"fast", "iid"};
    config.lambda2_fast = 0.31;
    CHECK(cmd_figure1(config) == 0);

    int cell_files = 0, panels = 0;
    for (const auto& entry : fs::directory_iterator(config.out_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("fig1__", 0) == 0 && name.find(".csv") != std::string::npos) ++cell_files;
        if (name.rfind("panel__", 0) == 0) ++panels;
    }
    CHECK(cell_files == 4);  // 1 schedule x 2 regimes x 2 replay flags
    CHECK(panels == 2);      // 1 schedule x 2 replay flags
    CHECK(fs::exists(fs::path(config.out_dir) / "fig1_mean.csv"));
    CHECK(fs::exists(fs::path(config.out_dir) / "fig1_meta.txt"));

    // panels regenerate losslessly from the mean CSV
    const std::string mean_csv = read_text_file((fs::path(config.out_dir) / "fig1_mean.csv").string());
    for (const auto& [stem, svg] : figure1_svgs_from_csv(mean_csv)) {
        const std::string on_disk = read_text_file((fs::path(config.out_dir) / (stem + ".svg")).string());
        CHECK(on_disk == svg);
    }
    fs::remove_all(dir);
}

TEST_CASE("repeated cells are byte-identical") {
    const fs::path dir = temp_dir("repro");
    ExperimentConfig config = tiny_config((dir / "a").string());
    config.regimes = {"iid", "fast"};
    CHECK(cmd_figure1(config) == 0);
    ExperimentConfig again = config;
    again.out_dir = (dir / "b").string();
    CHECK(cmd_figure1(again) == 0);

    for (const auto& entry : fs::directory_iterator(config.out_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.find(".csv") == std::string::npos) continue;
        const std::string first = read_text_file(entry.path().string());
        const std::string second = read_text_file((fs::path(again.out_dir) / name).string());
        CHECK(first == second);
    }
    fs::remove_all(dir);
}

TEST_CASE("gap curves decrease under iid sampling across checkpoints") {
    // simulation instance, c = 0.001, T = 1e5, 10 seeds
    ExperimentConfig config;
    config.regimes = {"iid"};
    config.replay = "off";
    config.T = 100000;
    config.seeds = 10;
    config.checkpoints = 12;
    config.schedules = {{"constant", 0.001}};
    config.threads = 2;
    Figure1Results results = run_figure1_study(config);
    const CellCurves& cell = results.cells.front();
    const auto mean = cell.mean();
    CHECK(mean.back() < 0.1 * mean.front());
    int increases = 0;
    for (std::size_t i = 1; i < mean.size(); ++i) {
        if (mean[i] > mean[i - 1] * 1.05) ++increases;
    }
    CHECK(increases <= 1);
}

TEST_CASE("figure1 smoke mode finishes quickly on a reduced chain") {
    const fs::path dir = temp_dir("smoke");
    ExperimentConfig config;
    config.chain_states = 101;  // keep the tuning cost representative but small
    config.out_dir = (dir / "out").string();
    config.apply_smoke();
    config.threads = 2;
    const auto start = std::chrono::steady_clock::now();
    CHECK(cmd_figure1(config) == 0);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(elapsed < 10.0);
    fs::remove_all(dir);
}

TEST_CASE("bounds command emits a per-term table") {
    const fs::path dir = temp_dir("bounds");
    ExperimentConfig config = tiny_config((dir / "out").string());
    config.bound_source = "direct";
    config.bound_D = 2.0;
    config.bound_L1 = 3.0;
    config.bound_L2 = 1.0;
    config.bound_tau = 2;
    config.bound_T_grid = {100, 10000};
    CHECK(cmd_bounds(config) == 0);
    const auto rows = csv_parse(read_text_file((dir / "out" / "bounds.csv").string()));
    bool saw_lemma = false, saw_theorem = false;
    for (const auto& row : rows) {
        if (row.metric == "lemma1_bound") saw_lemma = true;
        if (row.metric == "theorem1_bound") saw_theorem = true;
    }
    CHECK(saw_lemma);
    CHECK(saw_theorem);
    fs::remove_all(dir);
}

TEST_CASE("bounds command flags tau beyond T/2 instead of failing") {
    const fs::path dir = temp_dir("bounds_flag");
    ExperimentConfig config = tiny_config((dir / "out").string());
    config.bound_source = "direct";
    config.bound_D = 2.0;
    config.bound_L1 = 3.0;
    config.bound_L2 = 1.0;
    config.bound_tau = 500;
    config.bound_T_grid = {100, 10000};
    CHECK(cmd_bounds(config) == 0);
    const auto rows = csv_parse(read_text_file((dir / "out" / "bounds.csv").string()));
    bool flagged = false;
    for (const auto& row : rows) {
        if (row.metric == "tau_exceeds_T_half" && row.t == 100) flagged = true;
    }
    CHECK(flagged);
    fs::remove_all(dir);
}

TEST_CASE("chain command saves a loadable chain and prints diagnostics") {
    const fs::path dir = temp_dir("chain");
    ExperimentConfig config;
    config.out_dir = (dir / "out").string();
    config.chain_states = 31;
    config.chain_target_lambda2 = 0.5;
    config.tune_tolerance = 0.02;
    CHECK(cmd_chain(config) == 0);
    bool found = false;
    for (const auto& entry : fs::directory_iterator(config.out_dir)) {
        if (entry.path().filename().string().rfind("chain__", 0) == 0) {
            FiniteChain chain = load_chain(entry.path().string());
            CHECK(std::abs(second_eigenvalue_modulus(chain) - 0.5) <= 0.02);
            found = true;
        }
    }
    CHECK(found);
    fs::remove_all(dir);
}

TEST_CASE("chain command rejects malformed pi naming the index") {
    const fs::path dir = temp_dir("chain_pi");
    const fs::path pi_path = dir / "pi.txt";
    {
        std::ofstream out(pi_path);
        out << "0.5 0.6 -0.1\n";
    }
    ExperimentConfig config;
    config.out_dir = (dir / "out").string();
    config.chain_pi = pi_path.string();
    try {
        cmd_chain(config);
        CHECK(false);
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("gtd command records value error and residual curves") {
    const fs::path dir = temp_dir("gtd");
    ExperimentConfig config = tiny_config((dir / "out").string());
    config.mdp = "two_state_swap";
    config.gtd_kind = "gtd";
    config.gtd_policy = "on";
    config.gtd_regimes = {"iid"};
    config.T = 2000;
    config.seeds = 2;
    CHECK(cmd_gtd(config) == 0);
    const auto rows = csv_parse(read_text_file((dir / "out" / "gtd_mean.csv").string()));
    bool value_metric = false, residual_metric = false;
    for (const auto& row : rows) {
        if (row.metric.rfind("value_error/", 0) == 0) value_metric = true;
        if (row.metric.rfind("residual/", 0) == 0) residual_metric = true;
    }
    CHECK(value_metric);
    CHECK(residual_metric);
    CHECK(fs::exists(dir / "out" / "gtd_meta.txt"));
    const std::string meta = read_text_file((dir / "out" / "gtd_meta.txt").string());
    CHECK(meta.find("rho_max") != std::string::npos);
    fs::remove_all(dir);
}
