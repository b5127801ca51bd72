#include "msaddle/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace msaddle {

std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string format_shortest(double v) {
    char buf[64];
    for (int precision = 1; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
        if (std::stod(buf) == v) break;
    }
    return buf;
}

std::string ScheduleSpec::label() const { return name + ":" + format_shortest(coefficient); }

// --- config -------------------------------------------------------------------

namespace {

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: bad numeric value for '" + key + "': " + value);
    }
}

long parse_long(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer value for '" + key + "': " + value);
    }
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, sep)) {
        // trim
        const auto first = item.find_first_not_of(" \t");
        const auto last = item.find_last_not_of(" \t");
        out.push_back(first == std::string::npos ? "" : item.substr(first, last - first + 1));
    }
    return out;
}

std::vector<ScheduleSpec> parse_schedules(const std::string& key, const std::string& value) {
    std::vector<ScheduleSpec> out;
    for (const std::string& part : split(value, ',')) {
        const auto colon = part.find(':');
        if (colon == std::string::npos) throw ConfigError("config: '" + key + "' wants kind:coefficient, got " + part);
        ScheduleSpec spec{part.substr(0, colon), parse_double(key, part.substr(colon + 1))};
        spec.schedule();  // validates the kind
        out.push_back(spec);
    }
    if (out.empty()) throw ConfigError("config: '" + key + "' must list at least one schedule");
    return out;
}

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    if (key == "n") n = static_cast<int>(parse_long(key, value));
    else if (key == "instance_seed") instance_seed = static_cast<std::uint64_t>(parse_long(key, value));
    else if (key == "noise_amplitude") noise_amplitude = parse_double(key, value);
    else if (key == "radius_x") radius_x = parse_double(key, value);
    else if (key == "radius_y") radius_y = parse_double(key, value);
    else if (key == "chain_states") chain_states = static_cast<int>(parse_long(key, value));
    else if (key == "lambda2_slow") lambda2_slow = parse_double(key, value);
    else if (key == "lambda2_fast") lambda2_fast = parse_double(key, value);
    else if (key == "tune_tolerance") tune_tolerance = parse_double(key, value);
    else if (key == "regimes") regimes = split(value, ',');
    else if (key == "replay") replay = value;
    else if (key == "replay_capacity") replay_capacity = static_cast<std::size_t>(parse_long(key, value));
    else if (key == "replay_warmup") replay_warmup = static_cast<std::size_t>(parse_long(key, value));
    else if (key == "schedules") schedules = parse_schedules(key, value);
    else if (key == "T") T = parse_long(key, value);
    else if (key == "checkpoints") checkpoints = static_cast<int>(parse_long(key, value));
    else if (key == "seeds") seeds = static_cast<int>(parse_long(key, value));
    else if (key == "base_seed") base_seed = static_cast<std::uint64_t>(parse_long(key, value));
    else if (key == "start_at") start_at = value;
    else if (key == "mdp") mdp = value;
    else if (key == "gtd_kind") gtd_kind = value;
    else if (key == "gtd_policy") gtd_policy = value;
    else if (key == "gtd_radius") gtd_radius = parse_double(key, value);
    else if (key == "gtd_regimes") gtd_regimes = split(value, ',');
    else if (key == "gtd_schedules") gtd_schedules = parse_schedules(key, value);
    else if (key == "bound_source") bound_source = value;
    else if (key == "delta") delta = parse_double(key, value);
    else if (key == "bound_T_grid") {
        bound_T_grid.clear();
        for (const auto& part : split(value, ',')) bound_T_grid.push_back(parse_long(key, part));
    } else if (key == "bound_D") bound_D = parse_double(key, value);
    else if (key == "bound_L1") bound_L1 = parse_double(key, value);
    else if (key == "bound_L2") bound_L2 = parse_double(key, value);
    else if (key == "bound_tau") bound_tau = parse_long(key, value);
    else if (key == "bound_eta") bound_eta = parse_double(key, value);
    else if (key == "chain_target_lambda2") chain_target_lambda2 = parse_double(key, value);
    else if (key == "chain_pi") chain_pi = value;
    else if (key == "out") out_dir = value;
    else if (key == "threads") threads = static_cast<int>(parse_long(key, value));
    else throw ConfigError("config: unknown key '" + key + "'");
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();

    ExperimentConfig config;
    const auto first_char = text.find_first_not_of(" \t\r\n");
    if (first_char != std::string::npos && text[first_char] == '{') {
        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(text);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("config: invalid JSON: ") + e.what());
        }
        for (const auto& [key, value] : parsed.items()) {
            std::string as_text;
            if (value.is_string()) {
                as_text = value.get<std::string>();
            } else if (value.is_array()) {
                for (std::size_t i = 0; i < value.size(); ++i) {
                    if (i) as_text += ",";
                    as_text += value[i].is_string() ? value[i].get<std::string>()
                                                    : value[i].dump();
                }
            } else {
                as_text = value.dump();
            }
            config.set(key, as_text);
        }
    } else {
        std::istringstream lines(text);
        std::string line;
        int lineno = 0;
        while (std::getline(lines, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                if (line.find_first_not_of(" \t\r") != std::string::npos) {
                    throw ConfigError("config: line " + std::to_string(lineno) +
                                      " is not 'key = value'");
                }
                continue;
            }
            auto trim = [](std::string s) {
                const auto first = s.find_first_not_of(" \t\r");
                const auto last = s.find_last_not_of(" \t\r");
                return first == std::string::npos ? std::string()
                                                  : s.substr(first, last - first + 1);
            };
            config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
    }
    config.validate();
    return config;
}

void ExperimentConfig::apply_smoke() {
    T = 1000;
    seeds = 2;
}

void ExperimentConfig::validate() const {
    if (n < 1) throw ConfigError("config: n must be >= 1");
    if (T < 1) throw ConfigError("config: T must be >= 1");
    if (seeds < 1) throw ConfigError("config: seeds must be >= 1");
    if (checkpoints < 1) throw ConfigError("config: checkpoints must be >= 1");
    if (chain_states < 2) throw ConfigError("config: chain_states must be >= 2");
    if (regimes.empty()) throw ConfigError("config: at least one regime required");
    for (const auto& regime : regimes) {
        if (regime != "slow" && regime != "fast" && regime != "iid") {
            throw ConfigError("config: unknown regime '" + regime + "'");
        }
    }
    if (replay != "both" && replay != "on" && replay != "off") {
        throw ConfigError("config: replay must be both|on|off");
    }
    if (start_at != "origin" && start_at != "saddle") {
        throw ConfigError("config: start_at must be origin|saddle");
    }
    if (schedules.empty()) throw ConfigError("config: at least one schedule required");
    if (radius_x <= 0 || radius_y <= 0) throw ConfigError("config: radii must be positive");
    if (noise_amplitude < 0) throw ConfigError("config: noise_amplitude must be >= 0");
    if (delta <= 0 || delta >= 1) throw ConfigError("config: delta must be in (0,1)");
    if (bound_source != "simulation" && bound_source != "gtd" && bound_source != "direct") {
        throw ConfigError("config: bound_source must be simulation|gtd|direct");
    }
    if (lambda2_slow <= 0 || lambda2_slow >= 1 || lambda2_fast <= 0 || lambda2_fast >= 1) {
        throw ConfigError("config: lambda2 targets must be in (0,1)");
    }
}

std::string ExperimentConfig::canonical_text() const {
    std::ostringstream out;
    auto schedule_list = [](const std::vector<ScheduleSpec>& list) {
        std::string s;
        for (std::size_t i = 0; i < list.size(); ++i) {
            if (i) s += ",";
            s += list[i].label();
        }
        return s;
    };
    auto string_list = [](const std::vector<std::string>& list) {
        std::string s;
        for (std::size_t i = 0; i < list.size(); ++i) {
            if (i) s += ",";
            s += list[i];
        }
        return s;
    };
    out << "n = " << n << "\n";
    out << "instance_seed = " << instance_seed << "\n";
    out << "noise_amplitude = " << format_g17(noise_amplitude) << "\n";
    out << "radius_x = " << format_g17(radius_x) << "\n";
    out << "radius_y = " << format_g17(radius_y) << "\n";
    out << "chain_states = " << chain_states << "\n";
    out << "lambda2_slow = " << format_g17(lambda2_slow) << "\n";
    out << "lambda2_fast = " << format_g17(lambda2_fast) << "\n";
    out << "tune_tolerance = " << format_g17(tune_tolerance) << "\n";
    out << "regimes = " << string_list(regimes) << "\n";
    out << "replay = " << replay << "\n";
    out << "replay_capacity = " << replay_capacity << "\n";
    out << "replay_warmup = " << replay_warmup << "\n";
    out << "schedules = " << schedule_list(schedules) << "\n";
    out << "T = " << T << "\n";
    out << "checkpoints = " << checkpoints << "\n";
    out << "seeds = " << seeds << "\n";
    out << "base_seed = " << base_seed << "\n";
    out << "start_at = " << start_at << "\n";
    out << "mdp = " << mdp << "\n";
    out << "gtd_kind = " << gtd_kind << "\n";
    out << "gtd_policy = " << gtd_policy << "\n";
    out << "gtd_radius = " << format_g17(gtd_radius) << "\n";
    out << "gtd_regimes = " << string_list(gtd_regimes) << "\n";
    out << "gtd_schedules = " << schedule_list(gtd_schedules) << "\n";
    out << "bound_source = " << bound_source << "\n";
    out << "delta = " << format_g17(delta) << "\n";
    return out.str();
}

std::uint64_t ExperimentConfig::hash() const {
    const std::string text = canonical_text();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// --- simulation instance --------------------------------------------------------

SimulationInstance make_simulation_instance(int n, int states, std::uint64_t instance_seed,
                                            double noise_amplitude, double radius_x,
                                            double radius_y) {
    Rng rng(instance_seed);
    auto random_matrix = [&rng, n]() {
        Eigen::MatrixXd m(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) m(i, j) = rng.normal();
        }
        return m;
    };
    auto spectral_normalized = [](Eigen::MatrixXd m) {
        const double norm = m.jacobiSvd().singularValues()(0);
        if (norm > 0) m /= norm;
        return m;
    };

    Eigen::MatrixXd A = spectral_normalized(random_matrix());
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) b(i) = rng.normal();
    b.normalize();

    // Zero-mean trigonometric perturbation families: sum_s cos(2 pi k s / S)
    // and sum_s sin(2 pi k s / S) vanish for integer k not divisible by S, so
    // the stationary mean under the uniform distribution is exactly (A, b).
    // The fields are smooth in s, which couples the sample noise to the
    // chain's slow modes.
    const Eigen::MatrixXd GA1 = spectral_normalized(random_matrix());
    const Eigen::MatrixXd GA2 = spectral_normalized(random_matrix());
    Eigen::VectorXd gb1(n), gb2(n);
    for (int i = 0; i < n; ++i) gb1(i) = rng.normal();
    for (int i = 0; i < n; ++i) gb2(i) = rng.normal();
    gb1.normalize();
    gb2.normalize();

    const double amp = noise_amplitude / std::sqrt(2.0);  // ||cos G1 + sin G2|| <= sqrt(2)
    SimulationInstance inst{
        BilinearQuadraticProblem(A, b, 1.0, Eigen::MatrixXd::Identity(n, n),
                                 BallDomain(n, radius_x), BallDomain(n, radius_y)),
        {}, {}, noise_amplitude};
    inst.A_hat.reserve(states);
    inst.b_hat.reserve(states);
    for (int s = 0; s < states; ++s) {
        const double theta = 2.0 * M_PI * static_cast<double>(s) / states;
        const double ca = std::cos(theta), sa = std::sin(theta);
        const double cb = std::cos(2.0 * theta), sb = std::sin(2.0 * theta);
        inst.A_hat.push_back(A + amp * (ca * GA1 + sa * GA2));
        inst.b_hat.push_back(b + amp * (cb * gb1 + sb * gb2));
    }
    return inst;
}

StochasticSaddleProblem SimulationInstance::as_saddle_problem() const {
    StochasticSaddleProblem problem{expected.domain_x, expected.domain_y, nullptr, nullptr};
    const auto A_hat_copy = A_hat;
    const auto b_hat_copy = b_hat;
    const Eigen::MatrixXd M_y = expected.M_y;
    const double mu_x = expected.mu_x;
    problem.oracle = [A_hat_copy, b_hat_copy, M_y, mu_x](const SaddlePoint& z, long s) {
        PartialGradients g;
        g.x = mu_x * z.x - A_hat_copy[s].transpose() * z.y;
        g.y = b_hat_copy[s] - A_hat_copy[s] * z.x - M_y * z.y;
        return g;
    };
    const BilinearQuadraticProblem exact = expected;
    problem.exact_gradient = [exact](const SaddlePoint& z) { return exact.gradient(z.x, z.y); };
    return problem;
}

double SimulationInstance::mean_deviation(const Eigen::VectorXd& pi) const {
    Eigen::MatrixXd mean_A = Eigen::MatrixXd::Zero(expected.A.rows(), expected.A.cols());
    Eigen::VectorXd mean_b = Eigen::VectorXd::Zero(expected.b.size());
    for (std::size_t s = 0; s < A_hat.size(); ++s) {
        mean_A += pi(s) * A_hat[s];
        mean_b += pi(s) * b_hat[s];
    }
    const double dev_A = (mean_A - expected.A).jacobiSvd().singularValues()(0);
    const double dev_b = (mean_b - expected.b).norm();
    return std::max(dev_A, dev_b);
}

// --- study --------------------------------------------------------------------

std::string CellKey::id() const {
    return schedule_label + "__" + regime + "__" + (replay ? "replay" : "noreplay");
}

std::vector<long> CellCurves::grid() const {
    return seeds.empty() ? std::vector<long>{}
                         : [this] {
                               std::vector<long> g;
                               g.reserve(seeds.front().points.size());
                               for (const auto& [t, v] : seeds.front().points) g.push_back(t);
                               return g;
                           }();
}

std::vector<double> CellCurves::mean() const {
    std::vector<double> out;
    if (seeds.empty()) return out;
    out.assign(seeds.front().points.size(), 0.0);
    for (const auto& seed : seeds) {
        for (std::size_t i = 0; i < seed.points.size(); ++i) out[i] += seed.points[i].second;
    }
    for (double& v : out) v /= static_cast<double>(seeds.size());
    return out;
}

double CellCurves::final_mean() const {
    double acc = 0.0;
    for (const auto& seed : seeds) acc += seed.points.back().second;
    return acc / static_cast<double>(seeds.size());
}

double CellCurves::final_stderr() const {
    const double m = final_mean();
    double ss = 0.0;
    for (const auto& seed : seeds) {
        const double d = seed.points.back().second - m;
        ss += d * d;
    }
    const auto count = static_cast<double>(seeds.size());
    if (count < 2) return 0.0;
    return std::sqrt(ss / (count - 1.0) / count);
}

double pooled_stderr(const CellCurves& a, const CellCurves& b) {
    const double sa = a.final_stderr();
    const double sb = b.final_stderr();
    return std::sqrt(sa * sa + sb * sb);
}

const CellCurves& Figure1Results::cell(const std::string& schedule_label,
                                       const std::string& regime, bool replay) const {
    for (const auto& cell : cells) {
        if (cell.key.schedule_label == schedule_label && cell.key.regime == regime &&
            cell.key.replay == replay) {
            return cell;
        }
    }
    throw std::invalid_argument("Figure1Results: no cell " + schedule_label + "/" + regime);
}

namespace {

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void run_tasks(int threads, std::size_t task_count, const std::function<void(std::size_t)>& work) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
    std::atomic<std::size_t> cursor{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure = nullptr;
    std::mutex failure_mutex;
    auto worker = [&] {
        while (true) {
            const std::size_t idx = cursor.fetch_add(1);
            if (idx >= task_count) return;
            try {
                work(idx);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace

Figure1Results run_figure1_study(const ExperimentConfig& config,
                                 const std::vector<double>& mixing_etas) {
    config.validate();
    Figure1Results results;
    results.instance = std::make_shared<SimulationInstance>(
        make_simulation_instance(config.n, config.chain_states, config.instance_seed,
                                 config.noise_amplitude, config.radius_x, config.radius_y));
    results.checkpoint_grid = log_spaced_checkpoints(std::min<long>(10, config.T), config.T,
                                                     config.checkpoints);

    const Eigen::VectorXd uniform_pi =
        Eigen::VectorXd::Constant(config.chain_states, 1.0 / config.chain_states);

    std::map<std::string, std::shared_ptr<FiniteChain>> chains;
    for (const std::string& regime : config.regimes) {
        if (regime == "iid") continue;
        const double target = (regime == "slow") ? config.lambda2_slow : config.lambda2_fast;
        TunedChain tuned = tune_spectral_gap(uniform_pi, target, config.tune_tolerance);
        ChainDiagnostics diag;
        diag.name = regime;
        diag.target_lambda2 = target;
        diag.achieved_lambda2 = tuned.achieved_lambda2;
        diag.laziness = tuned.laziness;
        diag.mixing = mixing_time(tuned.chain, mixing_etas);
        results.chains.push_back(std::move(diag));
        chains[regime] = std::make_shared<FiniteChain>(std::move(tuned.chain));
    }

    std::vector<bool> replay_flags;
    if (config.replay == "both") replay_flags = {false, true};
    else if (config.replay == "on") replay_flags = {true};
    else replay_flags = {false};

    std::vector<StepSchedule> cell_schedules;
    for (const auto& schedule : config.schedules) {
        for (const std::string& regime : config.regimes) {
            for (bool replay : replay_flags) {
                CellCurves cell;
                cell.key = {schedule.label(), regime, replay};
                cell.metric = "gap";
                cell.seeds.resize(config.seeds);
                results.cells.push_back(std::move(cell));
                cell_schedules.push_back(schedule.schedule());
            }
        }
    }

    struct Task {
        std::size_t cell;
        int seed_index;
    };
    std::vector<Task> tasks;
    for (std::size_t c = 0; c < results.cells.size(); ++c) {
        for (int s = 0; s < config.seeds; ++s) tasks.push_back({c, s});
    }

    const StochasticSaddleProblem problem = results.instance->as_saddle_problem();
    const BilinearQuadraticProblem& exact = results.instance->expected;
    const Eigen::Index dim = exact.A.cols();
    SaddlePoint start_point{Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Zero(dim)};
    if (config.start_at == "saddle") start_point = exact.unconstrained_saddle();

    run_tasks(config.threads, tasks.size(), [&](std::size_t idx) {
        const Task& task = tasks[idx];
        CellCurves& cell = results.cells[task.cell];
        const std::uint64_t seed_value = config.base_seed + static_cast<std::uint64_t>(task.seed_index);
        const std::uint64_t stream_seed = Rng::mix(seed_value, fnv1a(cell.key.id()));

        std::unique_ptr<SampleStream> stream;
        if (cell.key.regime == "iid") {
            stream = std::make_unique<IidStationaryStream>(uniform_pi, stream_seed);
        } else {
            stream = std::make_unique<MarkovPathStream>(*chains.at(cell.key.regime), 0, stream_seed);
        }
        if (cell.key.replay) {
            stream = std::make_unique<ReplayStream>(std::move(stream), config.replay_capacity,
                                                    config.replay_warmup,
                                                    Rng::mix(stream_seed, 0x7e91aULL));
        }

        const AveragedTrajectory trajectory =
            run_sgd(problem, *stream, cell_schedules[task.cell], config.T, start_point,
                    results.checkpoint_grid);

        SeedCurve curve;
        curve.seed = seed_value;
        curve.points.reserve(trajectory.checkpoints.size());
        for (const auto& checkpoint : trajectory.checkpoints) {
            curve.points.emplace_back(checkpoint.t,
                                      primal_dual_gap(exact, checkpoint.average).gap);
        }
        cell.seeds[task.seed_index] = std::move(curve);
    });

    return results;
}

// --- csv ------------------------------------------------------------------------

std::string csv_render(const std::vector<CsvRow>& rows) {
    std::string out = "# msaddle csv schema v1\n";
    out += "t,metric,value,seed,regime,schedule,replay\n";
    for (const auto& row : rows) {
        out += std::to_string(row.t);
        out += ',';
        out += row.metric;
        out += ',';
        out += format_g17(row.value);
        out += ',';
        out += row.seed;
        out += ',';
        out += row.regime;
        out += ',';
        out += row.schedule;
        out += ',';
        out += std::to_string(row.replay);
        out += '\n';
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open output file " + path);
    out << content;
}

}  // namespace msaddle
