#pragma once

#include <Eigen/Dense>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace leoplan {

class NnError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Network shape. The default is the production policy: shared
/// 512/256/128 LeakyReLU trunk, 5-dim Gaussian action head with a
/// state-independent log-std vector, scalar value head.
struct MlpConfig {
    int input_dim = 8;
    std::vector<int> hidden = {512, 256, 128};
    int action_dim = 5;
    bool shared_trunk = true; // off = fully separate critic trunk
    double log_std_init = 0.0;
    double log_std_min = -5.0;
    double log_std_max = 2.0;
};

/// All learnable parameters. Weight matrices are (out x in); biases are
/// column vectors. When shared_trunk is set the critic vectors stay empty
/// and the value head reads the actor trunk's last activation.
struct MlpParams {
    MlpConfig config;
    std::vector<Eigen::MatrixXd> trunk_w;
    std::vector<Eigen::VectorXd> trunk_b;
    std::vector<Eigen::MatrixXd> critic_w;
    std::vector<Eigen::VectorXd> critic_b;
    Eigen::MatrixXd mean_w;
    Eigen::VectorXd mean_b;
    Eigen::MatrixXd value_w;
    Eigen::VectorXd value_b;
    Eigen::VectorXd log_std;

    /// Orthogonal init: gain sqrt(2) on trunk layers, 0.01 on the action
    /// mean head, 1.0 on the value head; zero biases; log_std at its
    /// configured init.
    static MlpParams init(const MlpConfig& cfg, std::mt19937_64& rng);

    /// Shape-congruent all-zero clone (gradient accumulators).
    static MlpParams zeros_like(const MlpParams& other);

    std::size_t param_count() const;
    Eigen::VectorXd to_flat() const;
    void from_flat(const Eigen::VectorXd& flat);
    bool all_finite() const;

    /// Visits every tensor as a flat array view, in the canonical order
    /// used by to_flat/from_flat.
    template <class F> void for_each_tensor(F&& f) {
        for (auto& w : trunk_w) f(Eigen::Map<Eigen::ArrayXd>(w.data(), w.size()));
        for (auto& b : trunk_b) f(Eigen::Map<Eigen::ArrayXd>(b.data(), b.size()));
        for (auto& w : critic_w) f(Eigen::Map<Eigen::ArrayXd>(w.data(), w.size()));
        for (auto& b : critic_b) f(Eigen::Map<Eigen::ArrayXd>(b.data(), b.size()));
        f(Eigen::Map<Eigen::ArrayXd>(mean_w.data(), mean_w.size()));
        f(Eigen::Map<Eigen::ArrayXd>(mean_b.data(), mean_b.size()));
        f(Eigen::Map<Eigen::ArrayXd>(value_w.data(), value_w.size()));
        f(Eigen::Map<Eigen::ArrayXd>(value_b.data(), value_b.size()));
        f(Eigen::Map<Eigen::ArrayXd>(log_std.data(), log_std.size()));
    }
    template <class F> void for_each_tensor(F&& f) const {
        for (const auto& w : trunk_w) f(Eigen::Map<const Eigen::ArrayXd>(w.data(), w.size()));
        for (const auto& b : trunk_b) f(Eigen::Map<const Eigen::ArrayXd>(b.data(), b.size()));
        for (const auto& w : critic_w) f(Eigen::Map<const Eigen::ArrayXd>(w.data(), w.size()));
        for (const auto& b : critic_b) f(Eigen::Map<const Eigen::ArrayXd>(b.data(), b.size()));
        f(Eigen::Map<const Eigen::ArrayXd>(mean_w.data(), mean_w.size()));
        f(Eigen::Map<const Eigen::ArrayXd>(mean_b.data(), mean_b.size()));
        f(Eigen::Map<const Eigen::ArrayXd>(value_w.data(), value_w.size()));
        f(Eigen::Map<const Eigen::ArrayXd>(value_b.data(), value_b.size()));
        f(Eigen::Map<const Eigen::ArrayXd>(log_std.data(), log_std.size()));
    }
};

/// Gradients of a scalar loss, shape-congruent with MlpParams.
using GradientSet = MlpParams;

/// QR-based orthogonal matrix scaled by gain. Columns are orthonormal
/// (before scaling) when rows >= cols, rows otherwise.
Eigen::MatrixXd orthogonal_init(int rows, int cols, double gain, std::mt19937_64& rng);

double leaky_relu(double x);
double leaky_relu_grad(double x); // 1 at x = 0

/// Activations retained by forward() for the matching backward().
struct ForwardCache {
    Eigen::MatrixXd input; // batch x input_dim
    std::vector<Eigen::MatrixXd> pre;
    std::vector<Eigen::MatrixXd> act;
    std::vector<Eigen::MatrixXd> critic_pre;
    std::vector<Eigen::MatrixXd> critic_act;
};

struct ForwardResult {
    Eigen::MatrixXd action_mean; // batch x action_dim
    Eigen::VectorXd value;       // batch
    Eigen::VectorXd log_std;     // action_dim, clamped
};

/// Batched forward pass, one observation per row. Throws NnError on
/// non-finite outputs.
ForwardResult forward(const MlpParams& params, const Eigen::MatrixXd& obs,
                      ForwardCache* cache = nullptr);

/// Exact reverse-mode gradients. d_mean/d_value/d_log_std are the partial
/// derivatives of the scalar loss w.r.t. the forward outputs (d_log_std
/// w.r.t. the clamped vector; the clamp gates it).
GradientSet backward(const MlpParams& params, const ForwardCache& cache,
                     const Eigen::MatrixXd& d_mean, const Eigen::VectorXd& d_value,
                     const Eigen::VectorXd& d_log_std);

/// Diagonal-Gaussian log density of one action.
double gaussian_log_prob(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_std,
                         const Eigen::VectorXd& action);

/// Row-wise log densities for a batch of (mean, action) pairs.
Eigen::VectorXd gaussian_log_prob(const Eigen::MatrixXd& mean, const Eigen::VectorXd& log_std,
                                  const Eigen::MatrixXd& actions);

/// Differential entropy: sum_k (log_std_k + (1 + ln 2pi)/2).
double gaussian_entropy(const Eigen::VectorXd& log_std);

/// Scales all gradients so the global L2 norm does not exceed max_norm;
/// returns the pre-clip norm.
double clip_grad_norm(GradientSet& grads, double max_norm);

struct RmsPropConfig {
    double lr = 1e-4;
    double alpha = 0.99;
    double eps = 1e-5;
};

struct RmsPropState {
    Eigen::ArrayXd v; // sized on first use
};

/// v <- alpha*v + (1-alpha)*g^2; p <- p - lr*g/(sqrt(v) + eps). No momentum.
void rmsprop_step(MlpParams& params, const GradientSet& grads, const RmsPropConfig& cfg,
                  RmsPropState& state);

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    Eigen::ArrayXd m;
    Eigen::ArrayXd v;
    long t = 0;
};

/// Standard bias-corrected Adam update.
void adam_step(MlpParams& params, const GradientSet& grads, const AdamConfig& cfg,
               AdamState& state);

/// Versioned binary parameter container; load/save round-trips bit-exactly.
/// rng_state carries the serialized trainer generator for replayability;
/// extras holds named auxiliary vectors (e.g. observation-normalizer
/// statistics) alongside the network tensors.
void save_checkpoint(const std::string& path, const MlpParams& params,
                     const std::string& rng_state,
                     const std::vector<std::pair<std::string, Eigen::VectorXd>>& extras = {});

struct Checkpoint {
    MlpParams params;
    std::string rng_state;
    std::vector<std::pair<std::string, Eigen::VectorXd>> extras;

    const Eigen::VectorXd* find_extra(const std::string& name) const;
};

Checkpoint load_checkpoint(const std::string& path);

} // namespace leoplan
