#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <vector>

#include "leoplan/env.hpp"
#include "leoplan/mission.hpp"
#include "leoplan/nn.hpp"

namespace leoplan {

class TrainError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class Algo { A2C, PPO };

Algo algo_from_string(const std::string& name); // "a2c" | "ppo"
std::string algo_name(Algo algo);

/// Plateau-intervention callback parameters.
struct PlateauConfig {
    double threshold = 0.25;
    int patience = 3;
    int n_eval_episodes = 5;
    bool consecutive_mode = false; // max-min spread by default
};

struct TrainerConfig {
    Algo algorithm = Algo::A2C;
    double gamma = 0.99;
    double gae_lambda = 0.98;
    double learning_rate = 1e-4;
    double ent_coef = 0.03;
    double vf_coef = 0.75;
    double max_grad_norm = 0.4;
    int n_steps = 32;      // 2048 for PPO
    int batch_size = 1024; // PPO minibatch
    int n_epochs = 8;      // PPO
    double clip_epsilon = 0.2;
    double target_kl = 0.3;
    int sde_sample_freq = 75;
    bool normalize_advantage = true;
    bool normalize_obs = true;
    bool normalize_reward = true;
    int n_envs = 8;
    long total_timesteps = 10000;
    std::uint64_t seed = 0;
    PlateauConfig plateau;
    MlpConfig net;

    static TrainerConfig defaults_for(Algo algo);
};

/// Fixed-horizon on-policy storage, rectangular n_envs x n_steps.
/// Row layout is step-major: row = step * n_envs + env.
struct RolloutBuffer {
    int n_envs = 0;
    int n_steps = 0;
    Eigen::MatrixXd obs;     // normalized observations the policy acted on
    Eigen::MatrixXd actions; // raw policy samples (pre-clamping)
    Eigen::VectorXd log_probs;
    Eigen::VectorXd values;
    Eigen::VectorXd rewards_raw;
    Eigen::VectorXd rewards_norm;
    std::vector<std::uint8_t> episode_end;
    Eigen::VectorXd bootstrap_values; // V of the observation after the last step, per env

    long size() const { return static_cast<long>(n_envs) * n_steps; }
};

struct GaeResult {
    Eigen::VectorXd advantages;
    Eigen::VectorXd returns;
};

/// delta_t = r_t + gamma*V(s_{t+1})*(1-done_t) - V(s_t);
/// A_t = delta_t + gamma*lambda*(1-done_t)*A_{t+1}, per environment.
/// Arrays are step-major as in RolloutBuffer. Throws on length mismatch.
GaeResult compute_gae(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
                      const std::vector<std::uint8_t>& episode_end,
                      const Eigen::VectorXd& bootstrap_values, double gamma, double lambda,
                      int n_envs, int n_steps);

/// In-place zero-mean/unit-variance normalization (population std + 1e-8).
void normalize_advantages(Eigen::VectorXd& advantages);

/// Running observation statistics (parallel-variance merge) plus the
/// discounted-return variance used for reward scaling. Copying an instance
/// freezes its statistics.
class RunningNormalizer {
  public:
    RunningNormalizer(int obs_dim, int n_envs, double gamma, double clip = 10.0,
                      double eps = 1e-8);

    void set_training(bool training) { training_ = training; }

    /// Merges a batch (rows = observations) into the running statistics.
    /// No-op when training is off.
    void update_obs(const Eigen::MatrixXd& raw_batch);

    /// clip((x - mean)/sqrt(var + eps), -clip, clip), row-wise.
    Eigen::MatrixXd normalize_obs(const Eigen::MatrixXd& raw) const;
    Eigen::VectorXd normalize_obs_row(const Eigen::VectorXd& raw) const;

    /// Advances the per-env discounted returns with the raw rewards,
    /// merges them into the return variance (when training), and returns
    /// the scaled rewards r/sqrt(var + eps). Sign is preserved.
    Eigen::VectorXd process_rewards(const Eigen::VectorXd& raw,
                                    const std::vector<std::uint8_t>& dones);

    double reward_scale() const;
    const Eigen::VectorXd& obs_mean() const { return obs_mean_; }
    Eigen::VectorXd obs_variance() const;
    double count() const { return obs_count_; }

    /// Checkpoint round trip: the statistics as named vectors.
    std::vector<std::pair<std::string, Eigen::VectorXd>> to_extras() const;
    static RunningNormalizer from_extras(
        const std::vector<std::pair<std::string, Eigen::VectorXd>>& extras, int n_envs);

  private:
    bool training_ = true;
    double clip_;
    double eps_;
    double gamma_;
    double obs_count_;
    Eigen::VectorXd obs_mean_;
    Eigen::VectorXd obs_m2_; // sum of squared deviations
    double ret_count_;
    double ret_mean_;
    double ret_m2_;
    Eigen::VectorXd env_returns_; // per-env discounted return accumulator
};

/// Moving-window plateau detector (Table-style threshold/patience). push()
/// returns true when the window is full and its spread is below the
/// threshold; the window is cleared after an intervention.
class PlateauDetector {
  public:
    explicit PlateauDetector(const PlateauConfig& cfg) : cfg_(cfg) {}

    bool push(double mean_reward);
    int interventions() const { return interventions_; }
    const std::deque<double>& window() const { return window_; }

  private:
    PlateauConfig cfg_;
    std::deque<double> window_;
    int interventions_ = 0;
};

struct EvalStats {
    double mean_reward = 0.0;
    double std_reward = 0.0;
    double objectives_met_rate = 0.0;
};

/// Runs n_episodes on the given environment. Deterministic mode uses the
/// action mean; otherwise actions are sampled from sample_rng. Episode k
/// is seeded seed_base + k. Rewards are raw (un-normalized); observations
/// pass through the frozen normalizer when one is given, untouched
/// otherwise.
EvalStats evaluate_policy(const MlpParams& params, MissionEnv& env, int n_episodes,
                          bool deterministic, const RunningNormalizer* frozen_normalizer,
                          std::uint64_t seed_base, std::mt19937_64* sample_rng = nullptr);

struct UpdateMetrics {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double grad_norm = 0.0;
    double approx_kl = 0.0;  // PPO: largest minibatch estimate seen
    int minibatches = 0;     // PPO: gradient steps actually applied
    bool early_stop = false; // PPO: KL stop fired
};

/// One synchronous on-policy gradient step on the whole rollout:
/// loss = -mean(logp * A) + vf_coef*mean((V - R)^2) - ent_coef*entropy,
/// gradients norm-clipped, RMSProp update. Throws TrainError on non-finite
/// losses or parameters.
UpdateMetrics a2c_update(MlpParams& params, const RolloutBuffer& buffer,
                         const TrainerConfig& cfg, RmsPropState& opt_state);

/// Clipped-surrogate PPO over shuffled minibatches with Adam, early-stopping
/// every remaining epoch once the minibatch KL estimate
/// mean((ratio - 1) - ln ratio) exceeds target_kl (checked before applying
/// that minibatch's update).
UpdateMetrics ppo_update(MlpParams& params, const RolloutBuffer& buffer,
                         const TrainerConfig& cfg, AdamState& opt_state,
                         std::mt19937_64& shuffle_rng);

/// One metrics-log row per rollout.
struct MetricRow {
    long timesteps = 0;
    double mean_ep_reward = 0.0; // raw episodic returns completed this rollout
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double grad_norm = 0.0;
    long interventions = 0;
    // Deterministic-evaluation diagnostics (not part of the CSV).
    double eval_mean_reward = 0.0;
    double eval_std_reward = 0.0;
    double eval_objectives_rate = 0.0;
};

struct TrainResult {
    MlpParams final_params;
    MlpParams best_params; // best deterministic-evaluation mean reward
    std::vector<MetricRow> metrics;
    EvalStats final_eval;
    long total_interventions = 0;
    long first_success_timesteps = -1; // first rollout whose evaluation met all objectives
    std::string rng_state;             // serialized sampler state at the end
};

/// Writes the pinned-format metrics CSV:
/// timesteps,mean_ep_reward,policy_loss,value_loss,entropy,grad_norm,interventions
void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows);

/// Synchronous on-policy trainer over vectorized mission environments.
/// A2C: one RMSProp step per rollout. PPO: Adam over shuffled minibatches
/// with ratio clipping and KL early stop. Fully deterministic for a fixed
/// (seed, config, mission, catalog).
class Trainer {
  public:
    Trainer(TrainerConfig cfg, MissionConfig mission, std::vector<KeplerianElements> catalog);

    TrainResult train();

    // The pieces below are the building blocks of train(), exposed for
    // direct testing.
    RolloutBuffer collect_rollout();
    UpdateMetrics update(const RolloutBuffer& buffer);
    EvalStats evaluate(int n_episodes);

    const MlpParams& params() const { return params_; }
    void set_params(MlpParams params) { params_ = std::move(params); }
    const TrainerConfig& config() const { return cfg_; }
    const RunningNormalizer& normalizer() const { return normalizer_; }
    long timesteps() const { return timesteps_; }

    /// Rows logged so far; still readable after train() aborts, so callers
    /// can preserve a partial metrics CSV.
    const std::vector<MetricRow>& metric_log() const { return metric_log_; }

  private:
    void refresh_sde_noise();

    TrainerConfig cfg_;
    MissionConfig mission_;
    std::vector<KeplerianElements> catalog_;
    std::vector<MissionEnv> envs_;
    MissionEnv eval_env_;
    MlpParams params_;
    RunningNormalizer normalizer_;
    RmsPropState rms_state_;
    AdamState adam_state_;
    std::mt19937_64 sample_rng_;
    std::mt19937_64 shuffle_rng_;
    Eigen::MatrixXd last_obs_; // n_envs x obs_dim, normalized
    std::vector<Eigen::VectorXd> sde_noise_;
    long sde_counter_ = 0;
    Eigen::VectorXd episode_return_; // per-env raw return accumulator
    std::deque<double> recent_returns_;
    std::vector<double> completed_returns_; // episodes finished in the current rollout
    std::vector<MetricRow> metric_log_;
    PlateauDetector plateau_;
    long timesteps_ = 0;
};

} // namespace leoplan
