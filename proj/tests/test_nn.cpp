#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "leoplan/nn.hpp"

using namespace leoplan;

namespace {

MlpConfig tiny_config() {
    MlpConfig cfg;
    cfg.input_dim = 8;
    cfg.hidden = {4, 2};
    cfg.action_dim = 3;
    return cfg;
}

// Composite scalar loss with fixed synthetic targets, used for the
// finite-difference oracle. Mirrors an actor-critic objective so every
// output path (mean, value, log_std) carries gradient.
struct LossFixture {
    Eigen::MatrixXd obs;
    Eigen::MatrixXd actions;
    Eigen::VectorXd advantages;
    Eigen::VectorXd returns;
    double vf_coef = 0.75;
    double ent_coef = 0.03;

    double eval(const MlpParams& params) const {
        const ForwardResult fw = forward(params, obs);
        const Eigen::VectorXd logp = gaussian_log_prob(fw.action_mean, fw.log_std, actions);
        const double n = static_cast<double>(obs.rows());
        const double policy = -logp.dot(advantages) / n;
        const double value = (fw.value - returns).squaredNorm() / n;
        const double entropy = gaussian_entropy(fw.log_std);
        return policy + vf_coef * value - ent_coef * entropy;
    }

    GradientSet grad(const MlpParams& params) const {
        ForwardCache cache;
        const ForwardResult fw = forward(params, obs, &cache);
        const double n = static_cast<double>(obs.rows());
        const Eigen::ArrayXd inv_var = (-2.0 * fw.log_std.array()).exp();
        const Eigen::MatrixXd diff = actions - fw.action_mean;

        Eigen::MatrixXd d_mean = (diff.array().rowwise() * inv_var.transpose()).matrix();
        d_mean.array().colwise() *= (-advantages.array() / n);
        const Eigen::VectorXd d_value = (2.0 * vf_coef / n) * (fw.value - returns);
        const Eigen::MatrixXd z2 = (diff.array().square().rowwise() * inv_var.transpose()).matrix();
        Eigen::VectorXd d_log_std(fw.log_std.size());
        for (Eigen::Index k = 0; k < d_log_std.size(); ++k) {
            d_log_std(k) =
                -(advantages.array() * (z2.col(k).array() - 1.0)).sum() / n - ent_coef;
        }
        return backward(params, cache, d_mean, d_value, d_log_std);
    }
};

LossFixture random_fixture(const MlpConfig& cfg, std::mt19937_64& rng, int batch = 6) {
    std::normal_distribution<double> normal(0.0, 1.0);
    LossFixture fx;
    fx.obs.resize(batch, cfg.input_dim);
    fx.actions.resize(batch, cfg.action_dim);
    fx.advantages.resize(batch);
    fx.returns.resize(batch);
    for (int r = 0; r < batch; ++r) {
        for (int c = 0; c < cfg.input_dim; ++c) fx.obs(r, c) = normal(rng);
        for (int c = 0; c < cfg.action_dim; ++c) fx.actions(r, c) = normal(rng);
        fx.advantages(r) = normal(rng);
        fx.returns(r) = normal(rng);
    }
    return fx;
}

// Max relative error between analytic and central finite differences.
double fd_max_relative_error(MlpParams params, const LossFixture& fx, double h = 1e-5) {
    const GradientSet analytic = fx.grad(params);
    const Eigen::VectorXd ga = analytic.to_flat();
    Eigen::VectorXd flat = params.to_flat();
    double worst = 0.0;
    for (Eigen::Index k = 0; k < flat.size(); ++k) {
        const double saved = flat(k);
        flat(k) = saved + h;
        params.from_flat(flat);
        const double up = fx.eval(params);
        flat(k) = saved - h;
        params.from_flat(flat);
        const double down = fx.eval(params);
        flat(k) = saved;
        const double fd = (up - down) / (2.0 * h);
        const double denom = std::max({1e-6, std::abs(fd), std::abs(ga(k))});
        worst = std::max(worst, std::abs(fd - ga(k)) / denom);
    }
    params.from_flat(flat);
    return worst;
}

} // namespace

TEST_CASE("orthogonal_init produces orthonormal columns scaled by gain") {
    std::mt19937_64 rng(1);
    const Eigen::MatrixXd square = orthogonal_init(128, 128, 1.0, rng);
    const Eigen::MatrixXd gram = square.transpose() * square;
    CHECK((gram - Eigen::MatrixXd::Identity(128, 128)).cwiseAbs().maxCoeff() < 1e-6);

    const Eigen::MatrixXd scaled = orthogonal_init(64, 64, std::sqrt(2.0), rng);
    const Eigen::MatrixXd gram2 = scaled.transpose() * scaled;
    CHECK((gram2 - 2.0 * Eigen::MatrixXd::Identity(64, 64)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("orthogonal_init is deterministic per seed") {
    std::mt19937_64 rng1(7), rng2(7);
    const Eigen::MatrixXd a = orthogonal_init(32, 16, 1.0, rng1);
    const Eigen::MatrixXd b = orthogonal_init(32, 16, 1.0, rng2);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("orthogonal_init over random shapes") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> dim(1, 96);
    std::uniform_real_distribution<double> gain_dist(0.1, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        const int rows = dim(rng), cols = dim(rng);
        const double gain = gain_dist(rng);
        const Eigen::MatrixXd w = orthogonal_init(rows, cols, gain, rng);
        const Eigen::MatrixXd gram =
            rows >= cols ? Eigen::MatrixXd(w.transpose() * w) : Eigen::MatrixXd(w * w.transpose());
        const int n = static_cast<int>(gram.rows());
        CHECK((gram - gain * gain * Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-5);
    }
}

TEST_CASE("leaky_relu values and slopes") {
    CHECK(leaky_relu(2.0) == 2.0);
    CHECK(leaky_relu(-2.0) == doctest::Approx(-0.02));
    CHECK(leaky_relu(0.0) == 0.0);
    CHECK(leaky_relu_grad(-1.0) == doctest::Approx(0.01));
    CHECK(leaky_relu_grad(3.0) == 1.0);
    CHECK(leaky_relu_grad(0.0) == 1.0);
}

TEST_CASE("forward with zero parameters returns zero outputs") {
    std::mt19937_64 rng(3);
    MlpParams params = MlpParams::init(tiny_config(), rng);
    params = MlpParams::zeros_like(params);
    const Eigen::MatrixXd obs = Eigen::MatrixXd::Random(4, 8);
    const ForwardResult fw = forward(params, obs);
    CHECK(fw.action_mean.cwiseAbs().maxCoeff() == 0.0);
    CHECK(fw.value.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward matches a hand-computed single-layer fixture") {
    MlpConfig cfg;
    cfg.input_dim = 2;
    cfg.hidden = {2};
    cfg.action_dim = 1;
    std::mt19937_64 rng(4);
    MlpParams p = MlpParams::init(cfg, rng);
    p.trunk_w[0] << 1.0, 0.0, 0.0, 1.0;
    p.trunk_b[0].setZero();
    p.mean_w << 1.0, 1.0;
    p.mean_b.setZero();
    p.value_w << 1.0, -1.0;
    p.value_b.setZero();

    Eigen::MatrixXd obs(1, 2);
    obs << 1.0, -1.0; // trunk activations: (1, -0.01)
    const ForwardResult fw = forward(p, obs);
    CHECK(fw.action_mean(0, 0) == doctest::Approx(0.99).epsilon(1e-15));
    CHECK(fw.value(0) == doctest::Approx(1.01).epsilon(1e-15));
}

TEST_CASE("forward rejects width mismatches and non-finite params") {
    std::mt19937_64 rng(5);
    MlpParams params = MlpParams::init(tiny_config(), rng);
    CHECK_THROWS_AS(forward(params, Eigen::MatrixXd::Random(2, 5)), NnError);
    params.mean_b(0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(forward(params, Eigen::MatrixXd::Random(2, 8)), NnError);
    CHECK(!params.all_finite());
}

TEST_CASE("gaussian log prob and entropy closed forms") {
    const Eigen::VectorXd mean = Eigen::VectorXd::Zero(5);
    const Eigen::VectorXd log_std = Eigen::VectorXd::Zero(5);
    CHECK(gaussian_log_prob(mean, log_std, mean) ==
          doctest::Approx(-4.594692666023363).epsilon(1e-12));
    CHECK(gaussian_entropy(log_std) == doctest::Approx(7.094692666023363).epsilon(1e-12));

    Eigen::VectorXd wider = log_std;
    wider(2) += std::log(2.0);
    CHECK(gaussian_entropy(wider) - gaussian_entropy(log_std) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));

    // Batched form agrees with the single form.
    Eigen::MatrixXd means(2, 5);
    means << 0.1, -0.2, 0.3, 0.0, 1.0, -1.0, 0.5, 0.0, 0.2, -0.3;
    Eigen::MatrixXd acts = means;
    acts.row(1).array() += 0.7;
    const Eigen::VectorXd batched = gaussian_log_prob(means, log_std, acts);
    const Eigen::VectorXd m0 = means.row(0).transpose();
    const Eigen::VectorXd a0 = acts.row(0).transpose();
    const Eigen::VectorXd m1 = means.row(1).transpose();
    const Eigen::VectorXd a1 = acts.row(1).transpose();
    CHECK(batched(0) == doctest::Approx(gaussian_log_prob(m0, log_std, a0)).epsilon(1e-12));
    CHECK(batched(1) == doctest::Approx(gaussian_log_prob(m1, log_std, a1)).epsilon(1e-12));
}

TEST_CASE("backward matches central finite differences on the downscaled net") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const MlpParams params = MlpParams::init(tiny_config(), rng);
        const LossFixture fx = random_fixture(tiny_config(), rng);
        CHECK(fd_max_relative_error(params, fx) < 1e-4);
    }
}

TEST_CASE("backward matches finite differences with a separate critic trunk") {
    MlpConfig cfg = tiny_config();
    cfg.shared_trunk = false;
    std::mt19937_64 rng(13);
    const MlpParams params = MlpParams::init(cfg, rng);
    const LossFixture fx = random_fixture(cfg, rng);
    CHECK(fd_max_relative_error(params, fx) < 1e-4);
}

TEST_CASE("backward of zero upstream gradients is zero, and is linear") {
    std::mt19937_64 rng(6);
    const MlpParams params = MlpParams::init(tiny_config(), rng);
    ForwardCache cache;
    const Eigen::MatrixXd obs = Eigen::MatrixXd::Random(5, 8);
    forward(params, obs, &cache);

    const GradientSet zero = backward(params, cache, Eigen::MatrixXd::Zero(5, 3),
                                      Eigen::VectorXd::Zero(5), Eigen::VectorXd::Zero(3));
    CHECK(zero.to_flat().cwiseAbs().maxCoeff() == 0.0);

    const Eigen::MatrixXd d_mean = Eigen::MatrixXd::Random(5, 3);
    const Eigen::VectorXd d_value = Eigen::VectorXd::Random(5);
    const Eigen::VectorXd d_log_std = Eigen::VectorXd::Random(3);
    const GradientSet g1 = backward(params, cache, d_mean, d_value, d_log_std);
    const GradientSet g2 = backward(params, cache, 2.0 * d_mean, 2.0 * d_value, 2.0 * d_log_std);
    CHECK((g2.to_flat() - 2.0 * g1.to_flat()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("clip_grad_norm scales only above the threshold") {
    std::mt19937_64 rng(7);
    MlpParams grads = MlpParams::zeros_like(MlpParams::init(tiny_config(), rng));
    Eigen::VectorXd flat = grads.to_flat();
    flat.setZero();
    flat(0) = 0.12;
    flat(1) = 0.16; // norm 0.2
    grads.from_flat(flat);

    GradientSet small = grads;
    CHECK(clip_grad_norm(small, 0.4) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK((small.to_flat() - flat).cwiseAbs().maxCoeff() == 0.0);

    GradientSet large = grads;
    Eigen::VectorXd big = flat * 20.0; // norm 4.0
    large.from_flat(big);
    const double pre = clip_grad_norm(large, 0.4);
    CHECK(pre == doctest::Approx(4.0).epsilon(1e-12));
    const Eigen::VectorXd clipped = large.to_flat();
    CHECK(clipped.norm() == doctest::Approx(0.4).epsilon(1e-12));
    // Direction preserved: cosine similarity 1.
    CHECK(clipped.dot(big) / (clipped.norm() * big.norm()) == doctest::Approx(1.0).epsilon(1e-12));

    GradientSet zero = grads;
    zero.from_flat(Eigen::VectorXd::Zero(flat.size()));
    CHECK(clip_grad_norm(zero, 0.4) == 0.0);
    CHECK(zero.to_flat().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rmsprop first step matches the hand evaluation") {
    std::mt19937_64 rng(8);
    MlpParams params = MlpParams::init(tiny_config(), rng);
    const Eigen::VectorXd before = params.to_flat();

    GradientSet grads = MlpParams::zeros_like(params);
    Eigen::VectorXd g = Eigen::VectorXd::Ones(before.size());
    grads.from_flat(g);

    RmsPropState state;
    rmsprop_step(params, grads, {1e-4, 0.99, 1e-5}, state);
    const Eigen::VectorXd after = params.to_flat();
    // v = 0.01, delta = -1e-4 / (0.1 + 1e-5)
    for (Eigen::Index k = 0; k < 5; ++k) {
        CHECK(after(k) - before(k) == doctest::Approx(-0.000999900009999).epsilon(1e-12));
    }
    CHECK(state.v(0) == doctest::Approx(0.01).epsilon(1e-12));

    // Zero gradient: parameters unchanged, accumulator decays.
    GradientSet zero = MlpParams::zeros_like(params);
    const Eigen::VectorXd frozen = params.to_flat();
    rmsprop_step(params, zero, {1e-4, 0.99, 1e-5}, state);
    CHECK((params.to_flat() - frozen).cwiseAbs().maxCoeff() == 0.0);
    CHECK(state.v(0) == doctest::Approx(0.0099).epsilon(1e-12));
}

TEST_CASE("adam first step moves by the learning rate") {
    std::mt19937_64 rng(9);
    MlpParams params = MlpParams::init(tiny_config(), rng);
    const Eigen::VectorXd before = params.to_flat();
    GradientSet grads = MlpParams::zeros_like(params);
    grads.from_flat(Eigen::VectorXd::Ones(before.size()));

    AdamState state;
    adam_step(params, grads, {1e-4, 0.9, 0.999, 1e-8}, state);
    const Eigen::VectorXd after = params.to_flat();
    for (Eigen::Index k = 0; k < 5; ++k) {
        CHECK(std::abs((after(k) - before(k)) + 1e-4) < 1e-10);
    }

    // Zero gradient at t = 1 leaves parameters untouched.
    MlpParams params2 = MlpParams::init(tiny_config(), rng);
    const Eigen::VectorXd before2 = params2.to_flat();
    AdamState state2;
    adam_step(params2, MlpParams::zeros_like(params2), {1e-4, 0.9, 0.999, 1e-8}, state2);
    CHECK((params2.to_flat() - before2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("optimizers are deterministic under identical state") {
    std::mt19937_64 rng(10);
    const MlpParams init = MlpParams::init(tiny_config(), rng);
    GradientSet grads = MlpParams::zeros_like(init);
    grads.from_flat(Eigen::VectorXd::Random(init.to_flat().size()));

    MlpParams a = init, b = init;
    RmsPropState sa, sb;
    for (int i = 0; i < 5; ++i) {
        rmsprop_step(a, grads, {1e-3, 0.99, 1e-5}, sa);
        rmsprop_step(b, grads, {1e-3, 0.99, 1e-5}, sb);
    }
    CHECK((a.to_flat() - b.to_flat()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("checkpoint round trip is bit exact") {
    std::mt19937_64 rng(12);
    MlpConfig cfg = tiny_config();
    cfg.shared_trunk = false;
    const MlpParams params = MlpParams::init(cfg, rng);
    const std::string rng_state = "12345 67890 state-blob";
    const std::vector<std::pair<std::string, Eigen::VectorXd>> extras = {
        {"norm_obs_mean", Eigen::VectorXd::Random(8)},
        {"norm_scalars", Eigen::VectorXd::Random(6)},
    };

    const std::string path =
        (std::filesystem::temp_directory_path() / "leoplan_ckpt_test.bin").string();
    save_checkpoint(path, params, rng_state, extras);
    const Checkpoint loaded = load_checkpoint(path);

    CHECK(loaded.rng_state == rng_state);
    CHECK(loaded.params.config.shared_trunk == false);
    CHECK(loaded.params.config.hidden == cfg.hidden);
    CHECK((loaded.params.to_flat() - params.to_flat()).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(loaded.extras.size() == 2);
    CHECK(loaded.find_extra("norm_obs_mean") != nullptr);
    CHECK((*loaded.find_extra("norm_obs_mean") - extras[0].second).cwiseAbs().maxCoeff() == 0.0);
    CHECK(loaded.find_extra("missing") == nullptr);

    // Saving the loaded params again produces identical bytes.
    const std::string path2 =
        (std::filesystem::temp_directory_path() / "leoplan_ckpt_test2.bin").string();
    save_checkpoint(path2, loaded.params, loaded.rng_state, loaded.extras);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}

TEST_CASE("load_checkpoint rejects foreign files") {
    const std::string path =
        (std::filesystem::temp_directory_path() / "leoplan_not_ckpt.bin").string();
    std::ofstream out(path, std::ios::binary);
    out << "definitely not a checkpoint, but long enough to read a header from";
    out.close();
    CHECK_THROWS_AS(load_checkpoint(path), NnError);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt.bin"), NnError);
    std::filesystem::remove(path);
}

TEST_CASE("networks with no hidden layers are linear heads") {
    MlpConfig cfg;
    cfg.input_dim = 1;
    cfg.hidden = {};
    cfg.action_dim = 1;
    std::mt19937_64 rng(14);
    MlpParams p = MlpParams::init(cfg, rng);
    p.mean_w(0, 0) = 2.0;
    p.mean_b(0) = 0.5;
    p.value_w(0, 0) = -1.0;
    p.value_b(0) = 0.25;
    Eigen::MatrixXd obs(1, 1);
    obs << 3.0;
    const ForwardResult fw = forward(p, obs);
    CHECK(fw.action_mean(0, 0) == doctest::Approx(6.5).epsilon(1e-15));
    CHECK(fw.value(0) == doctest::Approx(-2.75).epsilon(1e-15));

    // Gradients flow straight to the heads.
    ForwardCache cache;
    forward(p, obs, &cache);
    Eigen::MatrixXd d_mean(1, 1);
    d_mean << 1.0;
    const GradientSet g =
        backward(p, cache, d_mean, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1));
    CHECK(g.mean_w(0, 0) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(g.mean_b(0) == doctest::Approx(1.0).epsilon(1e-15));
}
