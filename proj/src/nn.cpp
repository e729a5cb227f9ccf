#include "leoplan/nn.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <utility>

namespace leoplan {

namespace {

constexpr double kLeakySlope = 0.01;
constexpr double kLog2Pi = 1.8378770664093453; // ln(2*pi)

Eigen::MatrixXd random_normal(int rows, int cols, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = dist(rng);
    return m;
}

} // namespace

Eigen::MatrixXd orthogonal_init(int rows, int cols, double gain, std::mt19937_64& rng) {
    const bool transpose = rows < cols;
    const int tall = transpose ? cols : rows;
    const int thin = transpose ? rows : cols;

    const Eigen::MatrixXd gauss = random_normal(tall, thin, rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(tall, thin);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(thin).triangularView<Eigen::Upper>();
    // Sign fix makes the decomposition unique (and the distribution Haar).
    for (int c = 0; c < thin; ++c) {
        if (r(c, c) < 0.0) q.col(c) = -q.col(c);
    }
    Eigen::MatrixXd w = transpose ? Eigen::MatrixXd(q.transpose()) : q;
    return gain * w;
}

double leaky_relu(double x) { return x >= 0.0 ? x : kLeakySlope * x; }
double leaky_relu_grad(double x) { return x >= 0.0 ? 1.0 : kLeakySlope; }

MlpParams MlpParams::init(const MlpConfig& cfg, std::mt19937_64& rng) {
    MlpParams p;
    p.config = cfg;
    const double trunk_gain = std::sqrt(2.0);

    const auto build_trunk = [&](std::vector<Eigen::MatrixXd>& ws,
                                 std::vector<Eigen::VectorXd>& bs) {
        int in = cfg.input_dim;
        for (int out : cfg.hidden) {
            ws.push_back(orthogonal_init(out, in, trunk_gain, rng));
            bs.push_back(Eigen::VectorXd::Zero(out));
            in = out;
        }
        return in;
    };

    const int feat = build_trunk(p.trunk_w, p.trunk_b);
    int critic_feat = feat;
    if (!cfg.shared_trunk) critic_feat = build_trunk(p.critic_w, p.critic_b);

    p.mean_w = orthogonal_init(cfg.action_dim, feat, 0.01, rng);
    p.mean_b = Eigen::VectorXd::Zero(cfg.action_dim);
    p.value_w = orthogonal_init(1, critic_feat, 1.0, rng);
    p.value_b = Eigen::VectorXd::Zero(1);
    p.log_std = Eigen::VectorXd::Constant(cfg.action_dim, cfg.log_std_init);
    return p;
}

MlpParams MlpParams::zeros_like(const MlpParams& other) {
    MlpParams z = other;
    z.for_each_tensor([](Eigen::Map<Eigen::ArrayXd> t) { t.setZero(); });
    return z;
}

std::size_t MlpParams::param_count() const {
    std::size_t n = 0;
    for_each_tensor([&](Eigen::Map<const Eigen::ArrayXd> t) { n += static_cast<std::size_t>(t.size()); });
    return n;
}

Eigen::VectorXd MlpParams::to_flat() const {
    Eigen::VectorXd flat(static_cast<Eigen::Index>(param_count()));
    Eigen::Index at = 0;
    for_each_tensor([&](Eigen::Map<const Eigen::ArrayXd> t) {
        flat.segment(at, t.size()) = t.matrix();
        at += t.size();
    });
    return flat;
}

void MlpParams::from_flat(const Eigen::VectorXd& flat) {
    Eigen::Index at = 0;
    for_each_tensor([&](Eigen::Map<Eigen::ArrayXd> t) {
        t = flat.segment(at, t.size()).array();
        at += t.size();
    });
    if (at != flat.size()) throw NnError("from_flat: size mismatch");
}

bool MlpParams::all_finite() const {
    bool ok = true;
    for_each_tensor([&](Eigen::Map<const Eigen::ArrayXd> t) { ok = ok && t.isFinite().all(); });
    return ok;
}

namespace {

Eigen::VectorXd clamped_log_std(const MlpParams& p) {
    return p.log_std.array()
        .max(p.config.log_std_min)
        .min(p.config.log_std_max)
        .matrix();
}

// Runs one trunk; fills pre/act when caching.
Eigen::MatrixXd run_trunk(const std::vector<Eigen::MatrixXd>& ws,
                          const std::vector<Eigen::VectorXd>& bs, const Eigen::MatrixXd& input,
                          std::vector<Eigen::MatrixXd>* pre, std::vector<Eigen::MatrixXd>* act) {
    Eigen::MatrixXd h = input;
    for (std::size_t l = 0; l < ws.size(); ++l) {
        Eigen::MatrixXd z = (h * ws[l].transpose()).rowwise() + bs[l].transpose();
        Eigen::MatrixXd a = z.unaryExpr([](double x) { return leaky_relu(x); });
        if (pre) pre->push_back(std::move(z));
        h = std::move(a);
        if (act) act->push_back(h);
    }
    return h;
}

} // namespace

ForwardResult forward(const MlpParams& params, const Eigen::MatrixXd& obs, ForwardCache* cache) {
    if (obs.cols() != params.config.input_dim) {
        throw NnError("forward: observation width " + std::to_string(obs.cols()) +
                      " does not match input_dim " + std::to_string(params.config.input_dim));
    }
    if (cache) {
        cache->input = obs;
        cache->pre.clear();
        cache->act.clear();
        cache->critic_pre.clear();
        cache->critic_act.clear();
    }

    const Eigen::MatrixXd feat =
        run_trunk(params.trunk_w, params.trunk_b, obs, cache ? &cache->pre : nullptr,
                  cache ? &cache->act : nullptr);
    Eigen::MatrixXd critic_feat = feat;
    if (!params.config.shared_trunk) {
        critic_feat = run_trunk(params.critic_w, params.critic_b, obs,
                                cache ? &cache->critic_pre : nullptr,
                                cache ? &cache->critic_act : nullptr);
    }

    ForwardResult out;
    out.action_mean = (feat * params.mean_w.transpose()).rowwise() + params.mean_b.transpose();
    out.value = critic_feat * params.value_w.transpose().col(0);
    out.value.array() += params.value_b(0);
    out.log_std = clamped_log_std(params);

    if (!out.action_mean.allFinite() || !out.value.allFinite()) {
        throw NnError("forward produced non-finite activations");
    }
    return out;
}

namespace {

// Propagates d(feature) back through one trunk, accumulating weight/bias
// gradients.
void trunk_backward(const std::vector<Eigen::MatrixXd>& ws, const std::vector<Eigen::MatrixXd>& pre,
                    const Eigen::MatrixXd& input, const std::vector<Eigen::MatrixXd>& act,
                    Eigen::MatrixXd d_feat, std::vector<Eigen::MatrixXd>& grad_w,
                    std::vector<Eigen::VectorXd>& grad_b) {
    for (int l = static_cast<int>(ws.size()) - 1; l >= 0; --l) {
        const Eigen::MatrixXd d_pre =
            d_feat.array() * pre[static_cast<std::size_t>(l)].unaryExpr([](double x) {
                return leaky_relu_grad(x);
            }).array();
        const Eigen::MatrixXd& below = (l == 0) ? input : act[static_cast<std::size_t>(l - 1)];
        grad_w[static_cast<std::size_t>(l)] += d_pre.transpose() * below;
        grad_b[static_cast<std::size_t>(l)] += d_pre.colwise().sum().transpose();
        if (l > 0) d_feat = d_pre * ws[static_cast<std::size_t>(l)];
    }
}

} // namespace

GradientSet backward(const MlpParams& params, const ForwardCache& cache,
                     const Eigen::MatrixXd& d_mean, const Eigen::VectorXd& d_value,
                     const Eigen::VectorXd& d_log_std) {
    GradientSet g = MlpParams::zeros_like(params);

    const Eigen::MatrixXd& feat =
        params.config.hidden.empty() ? cache.input : cache.act.back();
    const Eigen::MatrixXd& critic_feat =
        params.config.shared_trunk
            ? feat
            : (params.config.hidden.empty() ? cache.input : cache.critic_act.back());

    // Heads.
    g.mean_w = d_mean.transpose() * feat;
    g.mean_b = d_mean.colwise().sum().transpose();
    g.value_w = d_value.transpose() * critic_feat;
    g.value_b(0) = d_value.sum();

    // Clamp gates the log-std gradient.
    for (Eigen::Index k = 0; k < g.log_std.size(); ++k) {
        const bool inside = params.log_std(k) > params.config.log_std_min &&
                            params.log_std(k) < params.config.log_std_max;
        g.log_std(k) = inside ? d_log_std(k) : 0.0;
    }

    if (params.config.hidden.empty()) return g;

    Eigen::MatrixXd d_feat = d_mean * params.mean_w;
    if (params.config.shared_trunk) {
        d_feat += d_value * params.value_w;
        trunk_backward(params.trunk_w, cache.pre, cache.input, cache.act, std::move(d_feat),
                       g.trunk_w, g.trunk_b);
    } else {
        trunk_backward(params.trunk_w, cache.pre, cache.input, cache.act, std::move(d_feat),
                       g.trunk_w, g.trunk_b);
        trunk_backward(params.critic_w, cache.critic_pre, cache.input, cache.critic_act,
                       d_value * params.value_w, g.critic_w, g.critic_b);
    }
    return g;
}

double gaussian_log_prob(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_std,
                         const Eigen::VectorXd& action) {
    const Eigen::ArrayXd z = (action - mean).array() / log_std.array().exp();
    return -0.5 * z.square().sum() - log_std.sum() -
           0.5 * kLog2Pi * static_cast<double>(mean.size());
}

Eigen::VectorXd gaussian_log_prob(const Eigen::MatrixXd& mean, const Eigen::VectorXd& log_std,
                                  const Eigen::MatrixXd& actions) {
    const Eigen::ArrayXd inv_std = (-log_std.array()).exp();
    const Eigen::MatrixXd z =
        ((actions - mean).array().rowwise() * inv_std.transpose()).matrix();
    return (-0.5 * z.array().square().rowwise().sum() - log_std.sum() -
            0.5 * kLog2Pi * static_cast<double>(mean.cols()))
        .matrix();
}

double gaussian_entropy(const Eigen::VectorXd& log_std) {
    return log_std.sum() + 0.5 * (1.0 + kLog2Pi) * static_cast<double>(log_std.size());
}

double clip_grad_norm(GradientSet& grads, double max_norm) {
    double sq = 0.0;
    std::as_const(grads).for_each_tensor(
        [&](Eigen::Map<const Eigen::ArrayXd> t) { sq += t.square().sum(); });
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double scale = max_norm / norm;
        grads.for_each_tensor([&](Eigen::Map<Eigen::ArrayXd> t) { t *= scale; });
    }
    return norm;
}

void rmsprop_step(MlpParams& params, const GradientSet& grads, const RmsPropConfig& cfg,
                  RmsPropState& state) {
    const Eigen::ArrayXd g = grads.to_flat().array();
    Eigen::ArrayXd p = params.to_flat().array();
    if (state.v.size() != g.size()) state.v = Eigen::ArrayXd::Zero(g.size());
    state.v = cfg.alpha * state.v + (1.0 - cfg.alpha) * g.square();
    p -= cfg.lr * g / (state.v.sqrt() + cfg.eps);
    params.from_flat(p.matrix());
}

void adam_step(MlpParams& params, const GradientSet& grads, const AdamConfig& cfg,
               AdamState& state) {
    const Eigen::ArrayXd g = grads.to_flat().array();
    Eigen::ArrayXd p = params.to_flat().array();
    if (state.m.size() != g.size()) {
        state.m = Eigen::ArrayXd::Zero(g.size());
        state.v = Eigen::ArrayXd::Zero(g.size());
        state.t = 0;
    }
    ++state.t;
    state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * g;
    state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * g.square();
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    p -= cfg.lr * (state.m / bc1) / ((state.v / bc2).sqrt() + cfg.eps);
    params.from_flat(p.matrix());
}

namespace {

constexpr char kCheckpointMagic[] = "LEOPLAN-CKPT-1";

void write_bytes(std::ofstream& out, const void* data, std::size_t n) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

void write_i64(std::ofstream& out, std::int64_t v) { write_bytes(out, &v, sizeof(v)); }
void write_f64(std::ofstream& out, double v) { write_bytes(out, &v, sizeof(v)); }

void write_matrix(std::ofstream& out, const Eigen::MatrixXd& m) {
    write_i64(out, m.rows());
    write_i64(out, m.cols());
    write_bytes(out, m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

void read_bytes(std::ifstream& in, void* data, std::size_t n) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (!in) throw NnError("checkpoint truncated");
}

std::int64_t read_i64(std::ifstream& in) {
    std::int64_t v = 0;
    read_bytes(in, &v, sizeof(v));
    return v;
}

double read_f64(std::ifstream& in) {
    double v = 0;
    read_bytes(in, &v, sizeof(v));
    return v;
}

Eigen::MatrixXd read_matrix(std::ifstream& in) {
    const std::int64_t rows = read_i64(in);
    const std::int64_t cols = read_i64(in);
    if (rows < 0 || cols < 0 || rows * cols > (std::int64_t(1) << 40)) {
        throw NnError("checkpoint corrupt");
    }
    Eigen::MatrixXd m(rows, cols);
    read_bytes(in, m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
    return m;
}

} // namespace

const Eigen::VectorXd* Checkpoint::find_extra(const std::string& name) const {
    for (const auto& [key, value] : extras) {
        if (key == name) return &value;
    }
    return nullptr;
}

void save_checkpoint(const std::string& path, const MlpParams& params, const std::string& rng_state,
                     const std::vector<std::pair<std::string, Eigen::VectorXd>>& extras) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw NnError("cannot write checkpoint: " + path);
    write_bytes(out, kCheckpointMagic, sizeof(kCheckpointMagic));

    const MlpConfig& cfg = params.config;
    write_i64(out, cfg.input_dim);
    write_i64(out, static_cast<std::int64_t>(cfg.hidden.size()));
    for (int h : cfg.hidden) write_i64(out, h);
    write_i64(out, cfg.action_dim);
    write_i64(out, cfg.shared_trunk ? 1 : 0);
    write_f64(out, cfg.log_std_init);
    write_f64(out, cfg.log_std_min);
    write_f64(out, cfg.log_std_max);

    std::vector<Eigen::MatrixXd> tensors;
    for (const auto& w : params.trunk_w) tensors.push_back(w);
    for (const auto& b : params.trunk_b) tensors.push_back(b);
    for (const auto& w : params.critic_w) tensors.push_back(w);
    for (const auto& b : params.critic_b) tensors.push_back(b);
    tensors.push_back(params.mean_w);
    tensors.push_back(params.mean_b);
    tensors.push_back(params.value_w);
    tensors.push_back(params.value_b);
    tensors.push_back(params.log_std);

    write_i64(out, static_cast<std::int64_t>(tensors.size()));
    for (const auto& t : tensors) write_matrix(out, t);

    write_i64(out, static_cast<std::int64_t>(rng_state.size()));
    write_bytes(out, rng_state.data(), rng_state.size());

    write_i64(out, static_cast<std::int64_t>(extras.size()));
    for (const auto& [name, vec] : extras) {
        write_i64(out, static_cast<std::int64_t>(name.size()));
        write_bytes(out, name.data(), name.size());
        write_matrix(out, vec);
    }
    if (!out) throw NnError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NnError("cannot open checkpoint: " + path);
    char magic[sizeof(kCheckpointMagic)] = {};
    read_bytes(in, magic, sizeof(magic));
    if (std::string(magic) != kCheckpointMagic) {
        throw NnError("not a leoplan checkpoint: " + path);
    }

    MlpConfig cfg;
    cfg.input_dim = static_cast<int>(read_i64(in));
    const std::int64_t n_hidden = read_i64(in);
    cfg.hidden.clear();
    for (std::int64_t i = 0; i < n_hidden; ++i) cfg.hidden.push_back(static_cast<int>(read_i64(in)));
    cfg.action_dim = static_cast<int>(read_i64(in));
    cfg.shared_trunk = read_i64(in) != 0;
    cfg.log_std_init = read_f64(in);
    cfg.log_std_min = read_f64(in);
    cfg.log_std_max = read_f64(in);

    Checkpoint ckpt;
    ckpt.params.config = cfg;
    const std::int64_t n_tensors = read_i64(in);
    std::vector<Eigen::MatrixXd> tensors;
    tensors.reserve(static_cast<std::size_t>(n_tensors));
    for (std::int64_t i = 0; i < n_tensors; ++i) tensors.push_back(read_matrix(in));

    const std::size_t trunk_layers = cfg.hidden.size();
    const std::size_t critic_layers = cfg.shared_trunk ? 0 : trunk_layers;
    const std::size_t expected = 2 * trunk_layers + 2 * critic_layers + 5;
    if (tensors.size() != expected) throw NnError("checkpoint tensor count mismatch");

    std::size_t at = 0;
    for (std::size_t i = 0; i < trunk_layers; ++i) ckpt.params.trunk_w.push_back(tensors[at++]);
    for (std::size_t i = 0; i < trunk_layers; ++i) ckpt.params.trunk_b.push_back(tensors[at++].col(0));
    for (std::size_t i = 0; i < critic_layers; ++i) ckpt.params.critic_w.push_back(tensors[at++]);
    for (std::size_t i = 0; i < critic_layers; ++i) ckpt.params.critic_b.push_back(tensors[at++].col(0));
    ckpt.params.mean_w = tensors[at++];
    ckpt.params.mean_b = tensors[at++].col(0);
    ckpt.params.value_w = tensors[at++];
    ckpt.params.value_b = tensors[at++].col(0);
    ckpt.params.log_std = tensors[at++].col(0);

    const std::int64_t rng_len = read_i64(in);
    ckpt.rng_state.resize(static_cast<std::size_t>(rng_len));
    if (rng_len > 0) read_bytes(in, ckpt.rng_state.data(), ckpt.rng_state.size());

    const std::int64_t n_extras = read_i64(in);
    for (std::int64_t i = 0; i < n_extras; ++i) {
        const std::int64_t name_len = read_i64(in);
        std::string name(static_cast<std::size_t>(name_len), '\0');
        if (name_len > 0) read_bytes(in, name.data(), name.size());
        ckpt.extras.emplace_back(std::move(name), read_matrix(in).col(0));
    }
    return ckpt;
}

} // namespace leoplan
