#include "leoplan/rl.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace leoplan {

namespace {

// splitmix64-style stream derivation so every consumer of the master seed
// gets an independent, reproducible stream.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double mean_of(const std::deque<double>& values) {
    if (values.empty()) return 0.0;
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

} // namespace

Algo algo_from_string(const std::string& name) {
    if (name == "a2c" || name == "A2C") return Algo::A2C;
    if (name == "ppo" || name == "PPO") return Algo::PPO;
    throw TrainError("unknown algorithm '" + name + "' (expected a2c or ppo)");
}

std::string algo_name(Algo algo) { return algo == Algo::A2C ? "a2c" : "ppo"; }

TrainerConfig TrainerConfig::defaults_for(Algo algo) {
    TrainerConfig cfg;
    cfg.algorithm = algo;
    cfg.n_steps = (algo == Algo::A2C) ? 32 : 2048;
    cfg.total_timesteps = (algo == Algo::A2C) ? 10000 : 70000;
    return cfg;
}

GaeResult compute_gae(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
                      const std::vector<std::uint8_t>& episode_end,
                      const Eigen::VectorXd& bootstrap_values, double gamma, double lambda,
                      int n_envs, int n_steps) {
    const long total = static_cast<long>(n_envs) * n_steps;
    if (rewards.size() != total || values.size() != total ||
        static_cast<long>(episode_end.size()) != total || bootstrap_values.size() != n_envs) {
        throw std::invalid_argument("compute_gae: length mismatch");
    }

    GaeResult out;
    out.advantages.resize(total);
    for (int e = 0; e < n_envs; ++e) {
        double next_advantage = 0.0;
        for (int t = n_steps - 1; t >= 0; --t) {
            const long row = static_cast<long>(t) * n_envs + e;
            const double nonterminal = episode_end[static_cast<std::size_t>(row)] ? 0.0 : 1.0;
            const double next_value =
                (t == n_steps - 1) ? bootstrap_values(e) : values(row + n_envs);
            const double delta =
                rewards(row) + gamma * next_value * nonterminal - values(row);
            next_advantage = delta + gamma * lambda * nonterminal * next_advantage;
            out.advantages(row) = next_advantage;
        }
    }
    out.returns = out.advantages + values;
    return out;
}

void normalize_advantages(Eigen::VectorXd& advantages) {
    const double mean = advantages.mean();
    const double var = (advantages.array() - mean).square().mean();
    advantages = ((advantages.array() - mean) / (std::sqrt(var) + 1e-8)).matrix();
}

RunningNormalizer::RunningNormalizer(int obs_dim, int n_envs, double gamma, double clip,
                                     double eps)
    : clip_(clip), eps_(eps), gamma_(gamma), obs_count_(1e-4),
      obs_mean_(Eigen::VectorXd::Zero(obs_dim)),
      obs_m2_(Eigen::VectorXd::Constant(obs_dim, 1e-4)), ret_count_(1e-4), ret_mean_(0.0),
      ret_m2_(1e-4), env_returns_(Eigen::VectorXd::Zero(n_envs)) {}

void RunningNormalizer::update_obs(const Eigen::MatrixXd& raw_batch) {
    if (!training_ || raw_batch.rows() == 0) return;
    const double n = static_cast<double>(raw_batch.rows());
    const Eigen::VectorXd batch_mean = raw_batch.colwise().mean();
    const Eigen::VectorXd batch_m2 =
        (raw_batch.rowwise() - batch_mean.transpose()).array().square().colwise().sum();

    const Eigen::VectorXd delta = batch_mean - obs_mean_;
    const double total = obs_count_ + n;
    obs_mean_ += delta * (n / total);
    obs_m2_ += batch_m2 + delta.array().square().matrix() * (obs_count_ * n / total);
    obs_count_ = total;
}

Eigen::VectorXd RunningNormalizer::obs_variance() const { return obs_m2_ / obs_count_; }

Eigen::MatrixXd RunningNormalizer::normalize_obs(const Eigen::MatrixXd& raw) const {
    const Eigen::ArrayXd scale = (obs_variance().array() + eps_).sqrt();
    Eigen::MatrixXd out(raw.rows(), raw.cols());
    for (Eigen::Index r = 0; r < raw.rows(); ++r) {
        out.row(r) = ((raw.row(r).transpose() - obs_mean_).array() / scale)
                         .max(-clip_)
                         .min(clip_)
                         .matrix()
                         .transpose();
    }
    return out;
}

Eigen::VectorXd RunningNormalizer::normalize_obs_row(const Eigen::VectorXd& raw) const {
    const Eigen::ArrayXd scale = (obs_variance().array() + eps_).sqrt();
    return ((raw - obs_mean_).array() / scale).max(-clip_).min(clip_).matrix();
}

Eigen::VectorXd RunningNormalizer::process_rewards(const Eigen::VectorXd& raw,
                                                   const std::vector<std::uint8_t>& dones) {
    env_returns_ = gamma_ * env_returns_ + raw;

    if (training_) {
        const double n = static_cast<double>(env_returns_.size());
        const double batch_mean = env_returns_.mean();
        const double batch_m2 = (env_returns_.array() - batch_mean).square().sum();
        const double delta = batch_mean - ret_mean_;
        const double total = ret_count_ + n;
        ret_mean_ += delta * (n / total);
        ret_m2_ += batch_m2 + delta * delta * (ret_count_ * n / total);
        ret_count_ = total;
    }

    const Eigen::VectorXd scaled = raw / std::sqrt(ret_m2_ / ret_count_ + eps_);
    for (Eigen::Index e = 0; e < env_returns_.size(); ++e) {
        if (e < static_cast<Eigen::Index>(dones.size()) && dones[static_cast<std::size_t>(e)]) {
            env_returns_(e) = 0.0;
        }
    }
    return scaled;
}

double RunningNormalizer::reward_scale() const {
    return 1.0 / std::sqrt(ret_m2_ / ret_count_ + eps_);
}

std::vector<std::pair<std::string, Eigen::VectorXd>> RunningNormalizer::to_extras() const {
    Eigen::VectorXd scalars(6);
    scalars << obs_count_, ret_count_, ret_mean_, ret_m2_, gamma_, clip_;
    return {{"norm_obs_mean", obs_mean_}, {"norm_obs_m2", obs_m2_}, {"norm_scalars", scalars}};
}

RunningNormalizer RunningNormalizer::from_extras(
    const std::vector<std::pair<std::string, Eigen::VectorXd>>& extras, int n_envs) {
    const Eigen::VectorXd* mean = nullptr;
    const Eigen::VectorXd* m2 = nullptr;
    const Eigen::VectorXd* scalars = nullptr;
    for (const auto& [name, vec] : extras) {
        if (name == "norm_obs_mean") mean = &vec;
        else if (name == "norm_obs_m2") m2 = &vec;
        else if (name == "norm_scalars") scalars = &vec;
    }
    if (!mean || !m2 || !scalars || scalars->size() != 6 || mean->size() != m2->size()) {
        throw TrainError("checkpoint carries no usable normalizer statistics");
    }
    RunningNormalizer norm(static_cast<int>(mean->size()), n_envs, (*scalars)(4), (*scalars)(5));
    norm.obs_mean_ = *mean;
    norm.obs_m2_ = *m2;
    norm.obs_count_ = (*scalars)(0);
    norm.ret_count_ = (*scalars)(1);
    norm.ret_mean_ = (*scalars)(2);
    norm.ret_m2_ = (*scalars)(3);
    return norm;
}

bool PlateauDetector::push(double mean_reward) {
    window_.push_back(mean_reward);
    if (static_cast<int>(window_.size()) > cfg_.patience) window_.pop_front();
    if (static_cast<int>(window_.size()) < cfg_.patience) return false;

    bool plateau = false;
    if (cfg_.consecutive_mode) {
        plateau = true;
        for (std::size_t i = 1; i < window_.size(); ++i) {
            if (std::abs(window_[i] - window_[i - 1]) >= cfg_.threshold) {
                plateau = false;
                break;
            }
        }
    } else {
        const auto [lo, hi] = std::minmax_element(window_.begin(), window_.end());
        plateau = (*hi - *lo) < cfg_.threshold;
    }
    if (plateau) {
        window_.clear();
        ++interventions_;
    }
    return plateau;
}

EvalStats evaluate_policy(const MlpParams& params, MissionEnv& env, int n_episodes,
                          bool deterministic, const RunningNormalizer* frozen_normalizer,
                          std::uint64_t seed_base, std::mt19937_64* sample_rng) {
    std::vector<double> returns;
    returns.reserve(static_cast<std::size_t>(n_episodes));
    int successes = 0;
    std::normal_distribution<double> normal(0.0, 1.0);

    for (int k = 0; k < n_episodes; ++k) {
        Observation obs = env.reset(seed_base + static_cast<std::uint64_t>(k));
        double ep_return = 0.0;
        bool done = false;
        bool success = false;
        while (!done) {
            const std::array<double, 8> flat = flatten_observation(obs, env.config());
            Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(flat.data(), 8);
            if (frozen_normalizer) x = frozen_normalizer->normalize_obs_row(x);
            const ForwardResult fw = forward(params, x.transpose());

            ActionVector action{};
            for (int c = 0; c < 5; ++c) {
                double a = fw.action_mean(0, c);
                if (!deterministic && sample_rng) {
                    a += std::exp(fw.log_std(c)) * normal(*sample_rng);
                }
                action[static_cast<std::size_t>(c)] = a;
            }
            const StepResult sr = env.step(action);
            ep_return += sr.reward;
            obs = sr.observation;
            done = sr.terminated || sr.truncated;
            if (sr.terminated) success = true;
        }
        returns.push_back(ep_return);
        if (success) ++successes;
    }

    EvalStats stats;
    const double n = static_cast<double>(returns.size());
    stats.mean_reward = std::accumulate(returns.begin(), returns.end(), 0.0) / n;
    double var = 0.0;
    for (double r : returns) var += (r - stats.mean_reward) * (r - stats.mean_reward);
    stats.std_reward = std::sqrt(var / n);
    stats.objectives_met_rate = static_cast<double>(successes) / n;
    return stats;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw TrainError("cannot write metrics CSV: " + path);
    out << "timesteps,mean_ep_reward,policy_loss,value_loss,entropy,grad_norm,interventions\n";
    char buf[256];
    for (const MetricRow& row : rows) {
        std::snprintf(buf, sizeof(buf), "%ld,%.10g,%.10g,%.10g,%.10g,%.10g,%ld\n", row.timesteps,
                      row.mean_ep_reward, row.policy_loss, row.value_loss, row.entropy,
                      row.grad_norm, row.interventions);
        out << buf;
    }
}

Trainer::Trainer(TrainerConfig cfg, MissionConfig mission, std::vector<KeplerianElements> catalog)
    : cfg_(cfg), mission_(std::move(mission)), catalog_(std::move(catalog)),
      eval_env_(mission_, catalog_),
      normalizer_(cfg.net.input_dim, cfg.n_envs, cfg.gamma), plateau_(cfg.plateau) {
    if (cfg_.n_envs < 1 || cfg_.n_steps < 1) {
        throw TrainError("trainer config: n_envs and n_steps must be >= 1");
    }
    if (cfg_.net.input_dim != 8 || cfg_.net.action_dim != 5) {
        throw TrainError("trainer config: the mission policy requires input_dim 8, action_dim 5");
    }

    std::mt19937_64 param_rng(mix_seed(cfg_.seed, 1));
    params_ = MlpParams::init(cfg_.net, param_rng);
    sample_rng_.seed(mix_seed(cfg_.seed, 2));
    shuffle_rng_.seed(mix_seed(cfg_.seed, 3));

    envs_.reserve(static_cast<std::size_t>(cfg_.n_envs));
    Eigen::MatrixXd raw(cfg_.n_envs, cfg_.net.input_dim);
    for (int e = 0; e < cfg_.n_envs; ++e) {
        envs_.emplace_back(mission_, catalog_);
        const Observation obs = envs_.back().reset(mix_seed(cfg_.seed, 100 + static_cast<std::uint64_t>(e)));
        const std::array<double, 8> flat = flatten_observation(obs, mission_);
        raw.row(e) = Eigen::Map<const Eigen::VectorXd>(flat.data(), 8).transpose();
    }
    if (cfg_.normalize_obs) {
        normalizer_.update_obs(raw);
        last_obs_ = normalizer_.normalize_obs(raw);
    } else {
        last_obs_ = raw;
    }

    sde_noise_.assign(static_cast<std::size_t>(cfg_.n_envs),
                      Eigen::VectorXd::Zero(cfg_.net.action_dim));
    episode_return_ = Eigen::VectorXd::Zero(cfg_.n_envs);
}

void Trainer::refresh_sde_noise() {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& noise : sde_noise_) {
        for (Eigen::Index k = 0; k < noise.size(); ++k) noise(k) = normal(sample_rng_);
    }
}

RolloutBuffer Trainer::collect_rollout() {
    const int steps = cfg_.n_steps;
    const int n_envs = cfg_.n_envs;
    const int obs_dim = cfg_.net.input_dim;
    const int act_dim = cfg_.net.action_dim;

    RolloutBuffer buf;
    buf.n_envs = n_envs;
    buf.n_steps = steps;
    const long total = buf.size();
    buf.obs.resize(total, obs_dim);
    buf.actions.resize(total, act_dim);
    buf.log_probs.resize(total);
    buf.values.resize(total);
    buf.rewards_raw.resize(total);
    buf.rewards_norm.resize(total);
    buf.episode_end.assign(static_cast<std::size_t>(total), 0);
    buf.bootstrap_values.resize(n_envs);

    for (int t = 0; t < steps; ++t) {
        if (sde_counter_ % cfg_.sde_sample_freq == 0) refresh_sde_noise();
        ++sde_counter_;

        const ForwardResult fw = forward(params_, last_obs_);
        const Eigen::ArrayXd stddev = fw.log_std.array().exp();
        Eigen::MatrixXd actions(n_envs, act_dim);
        for (int e = 0; e < n_envs; ++e) {
            actions.row(e) =
                fw.action_mean.row(e) +
                (stddev * sde_noise_[static_cast<std::size_t>(e)].array()).matrix().transpose();
        }
        const Eigen::VectorXd logp = gaussian_log_prob(fw.action_mean, fw.log_std, actions);

        Eigen::MatrixXd raw_next(n_envs, obs_dim);
        Eigen::VectorXd rewards(n_envs);
        std::vector<std::uint8_t> dones(static_cast<std::size_t>(n_envs), 0);
        for (int e = 0; e < n_envs; ++e) {
            ActionVector act{};
            for (int c = 0; c < act_dim; ++c) act[static_cast<std::size_t>(c)] = actions(e, c);
            StepResult sr;
            try {
                sr = envs_[static_cast<std::size_t>(e)].step(act);
            } catch (const std::exception& err) {
                throw TrainError("environment " + std::to_string(e) + " failed at rollout step " +
                                 std::to_string(t) + ": " + err.what());
            }
            rewards(e) = sr.reward;
            episode_return_(e) += sr.reward;
            const bool done = sr.terminated || sr.truncated;
            dones[static_cast<std::size_t>(e)] = done ? 1 : 0;

            Observation next_obs = sr.observation;
            if (done) {
                completed_returns_.push_back(episode_return_(e));
                recent_returns_.push_back(episode_return_(e));
                if (recent_returns_.size() > 100) recent_returns_.pop_front();
                episode_return_(e) = 0.0;
                next_obs = envs_[static_cast<std::size_t>(e)].reset();
            }
            const std::array<double, 8> flat = flatten_observation(next_obs, mission_);
            raw_next.row(e) = Eigen::Map<const Eigen::VectorXd>(flat.data(), 8).transpose();
        }

        Eigen::VectorXd scaled = rewards;
        if (cfg_.normalize_reward) scaled = normalizer_.process_rewards(rewards, dones);

        for (int e = 0; e < n_envs; ++e) {
            const long row = static_cast<long>(t) * n_envs + e;
            buf.obs.row(row) = last_obs_.row(e);
            buf.actions.row(row) = actions.row(e);
            buf.log_probs(row) = logp(e);
            buf.values(row) = fw.value(e);
            buf.rewards_raw(row) = rewards(e);
            buf.rewards_norm(row) = scaled(e);
            buf.episode_end[static_cast<std::size_t>(row)] = dones[static_cast<std::size_t>(e)];
        }

        if (cfg_.normalize_obs) {
            normalizer_.update_obs(raw_next);
            last_obs_ = normalizer_.normalize_obs(raw_next);
        } else {
            last_obs_ = raw_next;
        }
    }

    buf.bootstrap_values = forward(params_, last_obs_).value;
    timesteps_ += total;
    return buf;
}

namespace {

GaeResult buffer_advantages(const RolloutBuffer& buffer, const TrainerConfig& cfg) {
    return compute_gae(buffer.rewards_norm, buffer.values, buffer.episode_end,
                       buffer.bootstrap_values, cfg.gamma, cfg.gae_lambda, buffer.n_envs,
                       buffer.n_steps);
}

} // namespace

UpdateMetrics a2c_update(MlpParams& params, const RolloutBuffer& buffer, const TrainerConfig& cfg,
                         RmsPropState& opt_state) {
    const long batch = buffer.size();
    const double n = static_cast<double>(batch);
    GaeResult gae = buffer_advantages(buffer, cfg);
    Eigen::VectorXd adv = gae.advantages;
    if (cfg.normalize_advantage) normalize_advantages(adv);

    ForwardCache cache;
    const ForwardResult fw = forward(params, buffer.obs, &cache);
    const Eigen::VectorXd logp = gaussian_log_prob(fw.action_mean, fw.log_std, buffer.actions);

    const double policy_loss = -logp.dot(adv) / n;
    const Eigen::VectorXd v_err = fw.value - gae.returns;
    const double value_loss = v_err.squaredNorm() / n;
    const double entropy = gaussian_entropy(fw.log_std);
    const double loss = policy_loss + cfg.vf_coef * value_loss - cfg.ent_coef * entropy;
    if (!std::isfinite(loss)) {
        throw TrainError("a2c_update: non-finite loss (policy=" + std::to_string(policy_loss) +
                         " value=" + std::to_string(value_loss) +
                         " entropy=" + std::to_string(entropy) + ")");
    }

    const Eigen::ArrayXd inv_var = (-2.0 * fw.log_std.array()).exp();
    const Eigen::MatrixXd diff = buffer.actions - fw.action_mean;

    Eigen::MatrixXd d_mean = (diff.array().rowwise() * inv_var.transpose()).matrix();
    d_mean.array().colwise() *= (-adv.array() / n);

    const Eigen::VectorXd d_value = (2.0 * cfg.vf_coef / n) * v_err;

    const Eigen::MatrixXd z2 = (diff.array().square().rowwise() * inv_var.transpose()).matrix();
    Eigen::VectorXd d_log_std(fw.log_std.size());
    for (Eigen::Index k = 0; k < d_log_std.size(); ++k) {
        d_log_std(k) = -(adv.array() * (z2.col(k).array() - 1.0)).sum() / n - cfg.ent_coef;
    }

    GradientSet grads = backward(params, cache, d_mean, d_value, d_log_std);
    const double pre_norm = clip_grad_norm(grads, cfg.max_grad_norm);
    rmsprop_step(params, grads, {cfg.learning_rate, 0.99, 1e-5}, opt_state);
    if (!params.all_finite()) throw TrainError("a2c_update: non-finite parameters after update");

    UpdateMetrics metrics;
    metrics.policy_loss = policy_loss;
    metrics.value_loss = value_loss;
    metrics.entropy = entropy;
    metrics.grad_norm = std::min(pre_norm, cfg.max_grad_norm);
    metrics.minibatches = 1;
    return metrics;
}

UpdateMetrics ppo_update(MlpParams& params, const RolloutBuffer& buffer, const TrainerConfig& cfg,
                         AdamState& opt_state, std::mt19937_64& shuffle_rng) {
    const long batch = buffer.size();
    GaeResult gae = buffer_advantages(buffer, cfg);
    Eigen::VectorXd adv = gae.advantages;
    if (cfg.normalize_advantage) normalize_advantages(adv);

    std::vector<long> order(static_cast<std::size_t>(batch));
    std::iota(order.begin(), order.end(), 0L);

    UpdateMetrics metrics;
    double sum_policy = 0.0, sum_value = 0.0, sum_entropy = 0.0, sum_norm = 0.0;
    const double eps = cfg.clip_epsilon;

    for (int epoch = 0; epoch < cfg.n_epochs && !metrics.early_stop; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (long start = 0; start < batch; start += cfg.batch_size) {
            const long m = std::min<long>(cfg.batch_size, batch - start);
            const double mn = static_cast<double>(m);

            Eigen::MatrixXd mb_obs(m, buffer.obs.cols());
            Eigen::MatrixXd mb_act(m, buffer.actions.cols());
            Eigen::VectorXd mb_logp_old(m), mb_adv(m), mb_ret(m);
            for (long i = 0; i < m; ++i) {
                const long src = order[static_cast<std::size_t>(start + i)];
                mb_obs.row(i) = buffer.obs.row(src);
                mb_act.row(i) = buffer.actions.row(src);
                mb_logp_old(i) = buffer.log_probs(src);
                mb_adv(i) = adv(src);
                mb_ret(i) = gae.returns(src);
            }

            ForwardCache cache;
            const ForwardResult fw = forward(params, mb_obs, &cache);
            const Eigen::VectorXd logp_new = gaussian_log_prob(fw.action_mean, fw.log_std, mb_act);
            const Eigen::ArrayXd log_ratio = (logp_new - mb_logp_old).array();
            const Eigen::ArrayXd ratio = log_ratio.exp();

            const double approx_kl = ((ratio - 1.0) - log_ratio).mean();
            metrics.approx_kl = std::max(metrics.approx_kl, approx_kl);
            if (approx_kl > cfg.target_kl) {
                metrics.early_stop = true;
                break;
            }

            const Eigen::ArrayXd unclipped = ratio * mb_adv.array();
            const Eigen::ArrayXd clipped = ratio.min(1.0 + eps).max(1.0 - eps) * mb_adv.array();
            const double policy_loss = -unclipped.min(clipped).mean();
            const Eigen::VectorXd v_err = fw.value - mb_ret;
            const double value_loss = v_err.squaredNorm() / mn;
            const double entropy = gaussian_entropy(fw.log_std);
            const double loss = policy_loss + cfg.vf_coef * value_loss - cfg.ent_coef * entropy;
            if (!std::isfinite(loss)) {
                throw TrainError("ppo_update: non-finite loss at epoch " + std::to_string(epoch));
            }

            // Gradient gate of min(ratio*A, clip(ratio)*A): the unclipped
            // branch when it is the smaller one, otherwise only while the
            // ratio is still inside the clip window.
            Eigen::ArrayXd d_logp(m);
            for (long i = 0; i < m; ++i) {
                const bool unclipped_active = unclipped(i) <= clipped(i);
                const bool inside = ratio(i) >= 1.0 - eps && ratio(i) <= 1.0 + eps;
                const double gate = (unclipped_active || inside) ? 1.0 : 0.0;
                d_logp(i) = -gate * mb_adv(i) * ratio(i) / mn;
            }

            const Eigen::ArrayXd inv_var = (-2.0 * fw.log_std.array()).exp();
            const Eigen::MatrixXd diff = mb_act - fw.action_mean;
            Eigen::MatrixXd d_mean = (diff.array().rowwise() * inv_var.transpose()).matrix();
            d_mean.array().colwise() *= d_logp;

            const Eigen::VectorXd d_value = (2.0 * cfg.vf_coef / mn) * v_err;

            const Eigen::MatrixXd z2 =
                (diff.array().square().rowwise() * inv_var.transpose()).matrix();
            Eigen::VectorXd d_log_std(fw.log_std.size());
            for (Eigen::Index k = 0; k < d_log_std.size(); ++k) {
                d_log_std(k) = (d_logp * (z2.col(k).array() - 1.0)).sum() - cfg.ent_coef;
            }

            GradientSet grads = backward(params, cache, d_mean, d_value, d_log_std);
            const double pre_norm = clip_grad_norm(grads, cfg.max_grad_norm);
            adam_step(params, grads, {cfg.learning_rate, 0.9, 0.999, 1e-8}, opt_state);
            if (!params.all_finite()) {
                throw TrainError("ppo_update: non-finite parameters after update");
            }

            sum_policy += policy_loss;
            sum_value += value_loss;
            sum_entropy += entropy;
            sum_norm += std::min(pre_norm, cfg.max_grad_norm);
            ++metrics.minibatches;
        }
    }

    if (metrics.minibatches > 0) {
        metrics.policy_loss = sum_policy / metrics.minibatches;
        metrics.value_loss = sum_value / metrics.minibatches;
        metrics.entropy = sum_entropy / metrics.minibatches;
        metrics.grad_norm = sum_norm / metrics.minibatches;
    }
    return metrics;
}

UpdateMetrics Trainer::update(const RolloutBuffer& buffer) {
    return cfg_.algorithm == Algo::A2C
               ? a2c_update(params_, buffer, cfg_, rms_state_)
               : ppo_update(params_, buffer, cfg_, adam_state_, shuffle_rng_);
}

EvalStats Trainer::evaluate(int n_episodes) {
    return evaluate_policy(params_, eval_env_, n_episodes, true,
                           cfg_.normalize_obs ? &normalizer_ : nullptr, mix_seed(cfg_.seed, 4));
}

TrainResult Trainer::train() {
    TrainResult result;
    double best_eval = -std::numeric_limits<double>::infinity();
    MlpParams best = params_;
    EvalStats last_eval;
    bool evaluated = false;

    while (timesteps_ < cfg_.total_timesteps) {
        completed_returns_.clear();
        const RolloutBuffer buffer = collect_rollout();
        const UpdateMetrics um = update(buffer);

        double mean_ep = 0.0;
        if (!completed_returns_.empty()) {
            mean_ep = std::accumulate(completed_returns_.begin(), completed_returns_.end(), 0.0) /
                      static_cast<double>(completed_returns_.size());
        } else {
            mean_ep = mean_of(recent_returns_);
        }

        const EvalStats ev = evaluate(cfg_.plateau.n_eval_episodes);
        last_eval = ev;
        evaluated = true;
        if (ev.objectives_met_rate >= 1.0 && result.first_success_timesteps < 0) {
            result.first_success_timesteps = timesteps_;
        }
        if (ev.mean_reward > best_eval) {
            best_eval = ev.mean_reward;
            best = params_;
        }

        if (plateau_.push(ev.mean_reward)) {
            Eigen::MatrixXd raw(cfg_.n_envs, cfg_.net.input_dim);
            for (int e = 0; e < cfg_.n_envs; ++e) {
                const Observation obs = envs_[static_cast<std::size_t>(e)].relocate();
                const std::array<double, 8> flat = flatten_observation(obs, mission_);
                raw.row(e) = Eigen::Map<const Eigen::VectorXd>(flat.data(), 8).transpose();
            }
            if (cfg_.normalize_obs) {
                normalizer_.update_obs(raw);
                last_obs_ = normalizer_.normalize_obs(raw);
            } else {
                last_obs_ = raw;
            }
            episode_return_.setZero();
        }

        MetricRow row;
        row.timesteps = timesteps_;
        row.mean_ep_reward = mean_ep;
        row.policy_loss = um.policy_loss;
        row.value_loss = um.value_loss;
        row.entropy = um.entropy;
        row.grad_norm = um.grad_norm;
        row.interventions = plateau_.interventions();
        row.eval_mean_reward = ev.mean_reward;
        row.eval_std_reward = ev.std_reward;
        row.eval_objectives_rate = ev.objectives_met_rate;
        metric_log_.push_back(row);
    }

    result.metrics = metric_log_;
    result.final_params = params_;
    result.best_params = best;
    result.final_eval = evaluated ? last_eval : evaluate(cfg_.plateau.n_eval_episodes);
    result.total_interventions = plateau_.interventions();
    std::ostringstream rng_dump;
    rng_dump << sample_rng_;
    result.rng_state = rng_dump.str();
    return result;
}

} // namespace leoplan
