#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>
#include <vector>

#include "leoplan/env.hpp"
#include "leoplan/fetch.hpp"
#include "leoplan/mission.hpp"
#include "leoplan/nn.hpp"
#include "leoplan/rl.hpp"
#include "leoplan/tle.hpp"

namespace {

using namespace leoplan;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitTraining = 3;

bool is_url(const std::string& source) {
    return source.rfind("http://", 0) == 0 || source.rfind("https://", 0) == 0;
}

std::string read_source(const std::string& source, double timeout_s) {
    if (is_url(source)) return fetch_catalog(source, timeout_s);
    std::ifstream in(source);
    if (!in) throw std::runtime_error("cannot open catalog source: " + source);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

MissionConfig mission_from_flag(const std::string& path) {
    if (path.empty()) return MissionConfig{};
    return load_mission_config(path);
}

std::vector<KeplerianElements> catalog_elements(const Catalog& catalog) {
    std::vector<KeplerianElements> elements;
    elements.reserve(catalog.records.size());
    for (const TleRecord& rec : catalog.records) elements.push_back(tle_to_elements(rec));
    return elements;
}

nlohmann::ordered_json trainer_config_json(const TrainerConfig& tc) {
    nlohmann::ordered_json doc;
    doc["algorithm"] = algo_name(tc.algorithm);
    doc["gamma"] = tc.gamma;
    doc["gae_lambda"] = tc.gae_lambda;
    doc["learning_rate"] = tc.learning_rate;
    doc["ent_coef"] = tc.ent_coef;
    doc["vf_coef"] = tc.vf_coef;
    doc["max_grad_norm"] = tc.max_grad_norm;
    doc["n_steps"] = tc.n_steps;
    doc["batch_size"] = tc.batch_size;
    doc["n_epochs"] = tc.n_epochs;
    doc["clip_epsilon"] = tc.clip_epsilon;
    doc["target_kl"] = tc.target_kl;
    doc["sde_sample_freq"] = tc.sde_sample_freq;
    doc["normalize_advantage"] = tc.normalize_advantage;
    doc["normalize_obs"] = tc.normalize_obs;
    doc["normalize_reward"] = tc.normalize_reward;
    doc["n_envs"] = tc.n_envs;
    doc["total_timesteps"] = tc.total_timesteps;
    doc["seed"] = tc.seed;
    doc["plateau_threshold"] = tc.plateau.threshold;
    doc["plateau_patience"] = tc.plateau.patience;
    doc["n_eval_episodes"] = tc.plateau.n_eval_episodes;
    return doc;
}

int cmd_ingest(const std::string& source_flag, const std::string& out_path, double timeout_s) {
    std::string source = source_flag;
    if (source.empty()) {
        if (const char* env_url = std::getenv("LEOPLAN_CATALOG_URL")) source = env_url;
    }
    if (source.empty()) {
        std::cerr << "error: usage: no catalog source given (argument or LEOPLAN_CATALOG_URL)\n";
        return kExitUsage;
    }

    const Catalog catalog = load_catalog_string(read_source(source, timeout_s));
    for (const CatalogError& err : catalog.errors) {
        std::cout << "line " << err.line_index << ": " << err.message << "\n";
    }
    std::cout << catalog.records.size() << " accepted, " << catalog.errors.size() << " rejected\n";
    if (catalog.records.empty()) {
        std::cerr << "error: data: 0 accepted records from " << source << "\n";
        return kExitData;
    }
    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write catalog: " + out_path);
        write_catalog(out, catalog.records);
        std::cout << "wrote " << out_path << "\n";
    }
    return kExitOk;
}

struct TrainOutputs {
    TrainResult result;
    TrainerConfig trainer_config;
};

TrainOutputs run_training(Algo algo, const MissionConfig& mission, const std::string& catalog_path,
                          std::uint64_t seed, long timesteps, int n_envs, const fs::path& out_dir) {
    const Catalog catalog = load_catalog_file(catalog_path);
    TrainerConfig tc = TrainerConfig::defaults_for(algo);
    tc.seed = seed;
    if (timesteps > 0) tc.total_timesteps = timesteps;
    if (n_envs > 0) tc.n_envs = n_envs;

    const std::string started = timestamp_utc();
    Trainer trainer(tc, mission, catalog_elements(catalog));
    fs::create_directories(out_dir);
    TrainResult result;
    try {
        result = trainer.train();
    } catch (...) {
        // Keep whatever was logged before the abort.
        write_metrics_csv((out_dir / "metrics.csv").string(), trainer.metric_log());
        throw;
    }
    const std::string finished = timestamp_utc();

    write_metrics_csv((out_dir / "metrics.csv").string(), result.metrics);
    const auto extras = trainer.normalizer().to_extras();
    save_checkpoint((out_dir / "checkpoint.bin").string(), result.final_params, result.rng_state,
                    extras);
    save_checkpoint((out_dir / "checkpoint_best.bin").string(), result.best_params,
                    result.rng_state, extras);

    nlohmann::ordered_json manifest;
    manifest["run"] = {{"algorithm", algo_name(algo)},
                       {"seed", seed},
                       {"started", started},
                       {"finished", finished},
                       {"catalog", catalog_path},
                       {"catalog_records", catalog.records.size()}};
    manifest["trainer"] = trainer_config_json(tc);
    manifest["mission"] = nlohmann::ordered_json::parse(mission_config_to_json(mission));
    manifest["final_evaluation"] = {{"mean_reward", result.final_eval.mean_reward},
                                    {"std_reward", result.final_eval.std_reward},
                                    {"objectives_met_rate", result.final_eval.objectives_met_rate}};
    manifest["first_success_timesteps"] = result.first_success_timesteps;
    manifest["interventions"] = result.total_interventions;
    manifest["artifacts"] = {{"metrics", "metrics.csv"},
                             {"checkpoint", "checkpoint.bin"},
                             {"checkpoint_best", "checkpoint_best.bin"}};
    std::ofstream mf(out_dir / "manifest.json", std::ios::trunc);
    mf << manifest.dump(2) << "\n";

    return {std::move(result), tc};
}

int cmd_train(const std::string& algo_flag, const std::string& mission_path,
              const std::string& catalog_path, std::uint64_t seed, long timesteps, int n_envs,
              const std::string& out_dir) {
    const Algo algo = algo_from_string(algo_flag);
    const MissionConfig mission = mission_from_flag(mission_path);
    const TrainOutputs out =
        run_training(algo, mission, catalog_path, seed, timesteps, n_envs, out_dir);

    const TrainResult& r = out.result;
    std::cout << "trained " << algo_name(algo) << " for " << r.metrics.size() << " rollouts ("
              << (r.metrics.empty() ? 0L : r.metrics.back().timesteps) << " timesteps)\n";
    std::cout << "final evaluation: mean reward " << r.final_eval.mean_reward
              << ", objectives met rate " << r.final_eval.objectives_met_rate << "\n";
    if (r.first_success_timesteps >= 0) {
        std::cout << "first success at " << r.first_success_timesteps << " timesteps\n";
    } else {
        std::cout << "first success: none\n";
    }
    std::cout << "artifacts in " << out_dir << "\n";
    return kExitOk;
}

int cmd_predict(const std::string& checkpoint_path, const std::string& mission_path,
                const std::string& catalog_path, std::uint64_t seed, bool deterministic) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    if (ckpt.params.config.input_dim != 8 || ckpt.params.config.action_dim != 5) {
        throw TrainError("checkpoint/config incompatibility: checkpoint network is " +
                         std::to_string(ckpt.params.config.input_dim) + "->" +
                         std::to_string(ckpt.params.config.action_dim) +
                         ", mission policy needs 8->5");
    }
    const MissionConfig mission = mission_from_flag(mission_path);
    const Catalog catalog = load_catalog_file(catalog_path);
    MissionEnv env(mission, catalog_elements(catalog));

    std::optional<RunningNormalizer> normalizer;
    if (!ckpt.extras.empty()) {
        normalizer = RunningNormalizer::from_extras(ckpt.extras, 1);
    }

    // One reset and one deterministic step: the action fully determines
    // the reported orbit.
    const Observation obs0 = env.reset(seed);
    const std::array<double, 8> flat = flatten_observation(obs0, mission);
    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(flat.data(), 8);
    if (normalizer) x = normalizer->normalize_obs_row(x);
    const ForwardResult fw = forward(ckpt.params, x.transpose());

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    ActionVector action{};
    for (int c = 0; c < 5; ++c) {
        action[static_cast<std::size_t>(c)] =
            fw.action_mean(0, c) + (deterministic ? 0.0 : std::exp(fw.log_std(c)) * normal(rng));
    }
    const StepResult sr = env.step(action);
    const KeplerianElements& el = env.current_elements();

    char line[128];
    std::snprintf(line, sizeof(line), "Semi-major axis (km): %.3f\n", el.a);
    std::cout << line;
    std::snprintf(line, sizeof(line), "Eccentricity: %.3f\n", el.e);
    std::cout << line;
    std::snprintf(line, sizeof(line), "Inclination (rad): %.3f\n", el.i);
    std::cout << line;
    std::snprintf(line, sizeof(line), "RAAN (rad): %.3f\n", el.raan);
    std::cout << line;
    std::snprintf(line, sizeof(line), "Argument of periapsis (rad): %.3f\n", el.arg_perigee);
    std::cout << line;
    std::snprintf(line, sizeof(line), "Cumulative Reward: %.6g\n", sr.reward);
    std::cout << line;
    std::cout << "Objectives Met: " << (sr.info.all_objectives_met ? "True" : "False") << "\n";
    return kExitOk;
}

struct CompareRow {
    std::string algorithm;
    std::uint64_t seed = 0;
    long steps_to_success = -1;
    double final_reward = 0.0;
    bool objectives_met = false;
    bool failed = false;
    std::string error;
};

double median_of(std::vector<double> values) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return (n % 2 == 1) ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

int cmd_compare(const std::string& mission_path, const std::string& catalog_path,
                const std::string& seeds_flag, long a2c_timesteps, long ppo_timesteps, int n_envs,
                const std::string& out_dir, int jobs) {
    const MissionConfig mission = mission_from_flag(mission_path);

    std::vector<std::uint64_t> seeds;
    {
        std::istringstream ss(seeds_flag);
        std::string token;
        while (std::getline(ss, token, ',')) {
            if (!token.empty()) seeds.push_back(std::stoull(token));
        }
    }
    if (seeds.empty()) {
        std::cerr << "error: usage: --seeds must list at least one seed\n";
        return kExitUsage;
    }

    struct Job {
        Algo algo;
        std::uint64_t seed;
        long timesteps;
    };
    std::vector<Job> queue;
    for (std::uint64_t seed : seeds) queue.push_back({Algo::A2C, seed, a2c_timesteps});
    for (std::uint64_t seed : seeds) queue.push_back({Algo::PPO, seed, ppo_timesteps});

    std::vector<CompareRow> rows(queue.size());
    std::mutex log_mutex;
    std::size_t next = 0;
    std::mutex next_mutex;

    const auto worker = [&]() {
        for (;;) {
            std::size_t index;
            {
                std::lock_guard<std::mutex> lock(next_mutex);
                if (next >= queue.size()) return;
                index = next++;
            }
            const Job& job = queue[index];
            CompareRow row;
            row.algorithm = algo_name(job.algo);
            row.seed = job.seed;
            try {
                const fs::path run_dir =
                    fs::path(out_dir) / (row.algorithm + "_seed" + std::to_string(job.seed));
                const TrainOutputs out = run_training(job.algo, mission, catalog_path, job.seed,
                                                      job.timesteps, n_envs, run_dir);
                row.steps_to_success = out.result.first_success_timesteps;
                row.final_reward = out.result.final_eval.mean_reward;
                row.objectives_met = out.result.final_eval.objectives_met_rate >= 1.0;
            } catch (const std::exception& err) {
                row.failed = true;
                row.error = err.what();
            }
            {
                std::lock_guard<std::mutex> lock(log_mutex);
                std::cout << "finished " << row.algorithm << " seed " << row.seed
                          << (row.failed ? std::string(" (failed: ") + row.error + ")" : "")
                          << "\n";
            }
            rows[index] = std::move(row);
        }
    };

    const int n_workers = std::max(1, std::min<int>(jobs, static_cast<int>(queue.size())));
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    fs::create_directories(out_dir);
    std::ofstream csv(fs::path(out_dir) / "compare.csv", std::ios::trunc);
    csv << "algorithm,seed,steps_to_success,final_reward,objectives_met\n";

    std::cout << "\nalgorithm  seed  steps_to_success  final_reward  objectives_met\n";
    for (const CompareRow& row : rows) {
        const std::string steps =
            row.failed ? "failed" : (row.steps_to_success < 0 ? "none"
                                                              : std::to_string(row.steps_to_success));
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-9s  %4llu  %16s  %12.4f  %s\n", row.algorithm.c_str(),
                      static_cast<unsigned long long>(row.seed), steps.c_str(), row.final_reward,
                      row.failed ? "-" : (row.objectives_met ? "true" : "false"));
        std::cout << buf;
        csv << row.algorithm << ',' << row.seed << ',' << steps << ',' << row.final_reward << ','
            << (row.failed ? "-" : (row.objectives_met ? "true" : "false")) << "\n";
    }

    bool any_failed = false;
    for (const std::string& algo : {std::string("a2c"), std::string("ppo")}) {
        std::vector<double> steps;
        std::vector<double> rewards;
        for (const CompareRow& row : rows) {
            if (row.algorithm != algo) continue;
            if (row.failed) { any_failed = true; continue; }
            steps.push_back(row.steps_to_success < 0
                                ? std::numeric_limits<double>::infinity()
                                : static_cast<double>(row.steps_to_success));
            rewards.push_back(row.final_reward);
        }
        const double med = median_of(steps);
        const std::string med_str = std::isfinite(med) ? std::to_string(static_cast<long>(med))
                                                       : std::string("none");
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-9s  med.  %16s  %12.4f\n", algo.c_str(), med_str.c_str(),
                      median_of(rewards));
        std::cout << buf;
        csv << algo << ",median," << med_str << ',' << median_of(rewards) << ",\n";
    }
    std::cout << "wrote " << (fs::path(out_dir) / "compare.csv") << "\n";
    return any_failed ? kExitTraining : kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"leoplan: LEO mission planning with TLE-constrained reinforcement learning"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Fetch/parse a TLE catalog and write it validated");
    std::string ingest_source;
    std::string ingest_out;
    double ingest_timeout = 10.0;
    ingest->add_option("source", ingest_source,
                       "TLE file path or http(s) URL (default: $LEOPLAN_CATALOG_URL)");
    ingest->add_option("--out", ingest_out, "validated catalog output path");
    ingest->add_option("--timeout", ingest_timeout, "fetch timeout, seconds");

    // train
    auto* train = app.add_subcommand("train", "Train a policy on a mission");
    std::string train_algo = "a2c";
    std::string train_mission;
    std::string train_catalog;
    std::uint64_t train_seed = 0;
    long train_timesteps = 0;
    int train_n_envs = 0;
    std::string train_out = "run";
    train->add_option("--algorithm", train_algo, "a2c or ppo")->check(CLI::IsMember({"a2c", "ppo"}));
    train->add_option("--mission", train_mission, "mission config JSON (defaults when omitted)");
    train->add_option("--catalog", train_catalog, "TLE catalog file")->required();
    train->add_option("--seed", train_seed, "rng seed");
    train->add_option("--timesteps", train_timesteps, "total environment timesteps");
    train->add_option("--n-envs", train_n_envs, "parallel environments");
    train->add_option("--out", train_out, "output directory");

    // predict
    auto* predict = app.add_subcommand("predict", "One deterministic prediction from a checkpoint");
    std::string predict_ckpt;
    std::string predict_mission;
    std::string predict_catalog;
    std::uint64_t predict_seed = 0;
    bool predict_sample = false;
    predict->add_option("--checkpoint", predict_ckpt, "checkpoint file")->required();
    predict->add_option("--mission", predict_mission, "mission config JSON");
    predict->add_option("--catalog", predict_catalog, "TLE catalog file")->required();
    predict->add_option("--seed", predict_seed, "environment reset seed");
    predict->add_flag("--sample", predict_sample, "sample the policy instead of using the mean");
    bool predict_deterministic = true;
    predict->add_flag("--deterministic,!--no-deterministic", predict_deterministic,
                      "use the action mean (default)");

    // compare
    auto* compare = app.add_subcommand("compare", "A2C vs PPO over a seed list");
    std::string compare_mission;
    std::string compare_catalog;
    std::string compare_seeds = "0,1,2,3,4";
    long compare_a2c_steps = 10000;
    long compare_ppo_steps = 70000;
    int compare_n_envs = 0;
    std::string compare_out = "compare";
    int compare_jobs = static_cast<int>(std::thread::hardware_concurrency());
    compare->add_option("--mission", compare_mission, "mission config JSON");
    compare->add_option("--catalog", compare_catalog, "TLE catalog file")->required();
    compare->add_option("--seeds", compare_seeds, "comma-separated seed list");
    compare->add_option("--a2c-timesteps", compare_a2c_steps, "A2C budget per seed");
    compare->add_option("--ppo-timesteps", compare_ppo_steps, "PPO budget per seed");
    compare->add_option("--n-envs", compare_n_envs, "parallel environments per run");
    compare->add_option("--out", compare_out, "output directory");
    compare->add_option("--jobs", compare_jobs, "concurrent training runs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (ingest->parsed()) return cmd_ingest(ingest_source, ingest_out, ingest_timeout);
        if (train->parsed()) {
            return cmd_train(train_algo, train_mission, train_catalog, train_seed, train_timesteps,
                             train_n_envs, train_out);
        }
        if (predict->parsed()) {
            return cmd_predict(predict_ckpt, predict_mission, predict_catalog, predict_seed,
                               predict_deterministic && !predict_sample);
        }
        if (compare->parsed()) {
            return cmd_compare(compare_mission, compare_catalog, compare_seeds, compare_a2c_steps,
                               compare_ppo_steps, compare_n_envs, compare_out, compare_jobs);
        }
    } catch (const ConfigError& err) {
        std::cerr << "error: config: " << err.what() << "\n";
        return kExitUsage;
    } catch (const TleParseError& err) {
        std::cerr << "error: data: " << err.what() << "\n";
        return kExitData;
    } catch (const FetchError& err) {
        std::cerr << "error: data: " << err.what() << "\n";
        return kExitData;
    } catch (const TrainError& err) {
        std::cerr << "error: training: " << err.what() << "\n";
        return kExitTraining;
    } catch (const NnError& err) {
        std::cerr << "error: training: " << err.what() << "\n";
        return kExitTraining;
    } catch (const std::exception& err) {
        std::cerr << "error: data: " << err.what() << "\n";
        return kExitData;
    }
    return kExitOk;
}
