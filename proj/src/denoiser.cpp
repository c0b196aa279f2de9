#include "ardiff/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "ardiff/kernels.hpp"

namespace ardiff {

void DenoiserConfig::validate() const {
    if (frames < 1 || tokens < 1 || dim < 1 || timesteps < 1) {
        throw std::invalid_argument("DenoiserConfig: frames, tokens, dim and timesteps must be >= 1");
    }
    if (d_model < 1 || n_layers < 0 || n_heads < 1 || mlp_hidden < 1) {
        throw std::invalid_argument("DenoiserConfig: invalid network size");
    }
    if (d_model % n_heads != 0) {
        throw std::invalid_argument("DenoiserConfig: d_model must be divisible by n_heads");
    }
    if (!(x0_clamp >= 0.0)) {
        throw std::invalid_argument("DenoiserConfig: x0_clamp must be non-negative");
    }
}

CausalMask::CausalMask(int frames, int tokens) : frames_(frames), tokens_(tokens) {
    if (frames < 1 || tokens < 1) {
        throw std::invalid_argument("causal_mask: F and L must be >= 1");
    }
}

std::size_t CausalMask::allowed_count() const {
    std::size_t n = 0;
    for (int q = 0; q < size(); ++q) {
        n += static_cast<std::size_t>(row_limit(q));
    }
    return n;
}

std::vector<bool> CausalMask::dense() const {
    const int n = size();
    std::vector<bool> m(static_cast<std::size_t>(n) * n);
    for (int q = 0; q < n; ++q) {
        for (int k = 0; k < n; ++k) {
            m[static_cast<std::size_t>(q) * n + k] = allowed(q, k);
        }
    }
    return m;
}

CausalMask causal_mask(int frames, int tokens) { return CausalMask(frames, tokens); }

NonFiniteLoss::NonFiniteLoss(std::size_t batch_index, double value)
    : std::runtime_error("non-finite loss " + std::to_string(value) + " at batch index " +
                         std::to_string(batch_index)),
      batch_index_(batch_index) {}

// ---------------------------------------------------------------------------
// Parameters

DenoiserParams::DenoiserParams(const DenoiserConfig& config) : config_(config) {
    config.validate();
    const int D = config.dim;
    const int d = config.d_model;
    const int h = config.mlp_hidden;
    std::size_t offset = 0;
    auto add = [&](std::string name, std::vector<int> shape) {
        std::size_t size = 1;
        for (int s : shape) size *= static_cast<std::size_t>(s);
        specs_.push_back(TensorSpec{std::move(name), std::move(shape), offset, size});
        offset += size;
    };
    add("in_proj.weight", {D, d});
    add("in_proj.bias", {d});
    add("time_embedding", {config.timesteps + 1, d});
    for (int l = 0; l < config.n_layers; ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        add(p + "attn.wq", {d, d});
        add(p + "attn.wk", {d, d});
        add(p + "attn.wv", {d, d});
        add(p + "attn.wo", {d, d});
        add(p + "attn.bo", {d});
        add(p + "mlp.w1", {d, h});
        add(p + "mlp.b1", {h});
        add(p + "mlp.w2", {h, d});
        add(p + "mlp.b2", {d});
    }
    add("out_proj.weight", {d, D});
    add("out_proj.bias", {D});
    values_.assign(offset, 0.0);
}

DenoiserParams DenoiserParams::zeros(const DenoiserConfig& config) { return DenoiserParams(config); }

DenoiserParams DenoiserParams::initialize(const DenoiserConfig& config, std::uint64_t seed) {
    DenoiserParams p(config);
    std::mt19937_64 rng(seed);
    for (const TensorSpec& s : p.specs_) {
        const bool is_bias = s.shape.size() == 1;
        const bool is_output = s.name.rfind("out_proj.", 0) == 0;
        if (is_bias || is_output) {
            continue;
        }
        // Embedding rows are looked up, not multiplied: fan-in 1.
        const int fan_in = s.name == "time_embedding" ? 1 : s.shape[0];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& v : p.tensor(s)) {
            v = dist(rng);
        }
    }
    return p;
}

const TensorSpec& DenoiserParams::spec(const std::string& name) const {
    for (const TensorSpec& s : specs_) {
        if (s.name == name) {
            return s;
        }
    }
    throw std::out_of_range("DenoiserParams: no tensor named " + name);
}

std::span<double> DenoiserParams::tensor(const std::string& name) { return tensor(spec(name)); }
std::span<const double> DenoiserParams::tensor(const std::string& name) const { return tensor(spec(name)); }

bool DenoiserParams::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

bool DenoiserParams::same_layout(const DenoiserParams& other) const {
    return config_ == other.config_ && values_.size() == other.values_.size();
}

// ---------------------------------------------------------------------------
// Network

namespace {

template <class T>
struct NetView {
    using Span = std::span<T>;
    struct Layer {
        Span wq, wk, wv, wo, bo, w1, b1, w2, b2;
    };
    Span win, bin, emb;
    std::vector<Layer> layers;
    Span wout, bout;
};

template <class P>
auto make_view(P& params) {
    using T = std::remove_reference_t<decltype(params.values()[0])>;
    NetView<T> v;
    std::size_t i = 0;
    const auto& specs = params.tensors();
    auto next = [&]() { return params.tensor(specs[i++]); };
    v.win = next();
    v.bin = next();
    v.emb = next();
    v.layers.resize(static_cast<std::size_t>(params.config().n_layers));
    for (auto& l : v.layers) {
        l.wq = next();
        l.wk = next();
        l.wv = next();
        l.wo = next();
        l.bo = next();
        l.w1 = next();
        l.b1 = next();
        l.w2 = next();
        l.b2 = next();
    }
    v.wout = next();
    v.bout = next();
    return v;
}

struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}
    std::span<double> row(int i) { return std::span<double>(v).subspan(static_cast<std::size_t>(i) * cols, cols); }
    std::span<const double> row(int i) const {
        return std::span<const double>(v).subspan(static_cast<std::size_t>(i) * cols, cols);
    }
    double& at(int i, int j) { return v[static_cast<std::size_t>(i) * cols + j]; }
    double at(int i, int j) const { return v[static_cast<std::size_t>(i) * cols + j]; }
};

// Y = X W (+ b), W stored in x out row-major.
Mat linear(const Mat& x, std::span<const double> w, std::span<const double> b, int out) {
    Mat y(x.rows, out);
    for (int i = 0; i < x.rows; ++i) {
        auto yr = y.row(i);
        if (!b.empty()) {
            std::copy(b.begin(), b.end(), yr.begin());
        }
        for (int k = 0; k < x.cols; ++k) {
            kernels::axpy(x.at(i, k), w.subspan(static_cast<std::size_t>(k) * out, out), yr);
        }
    }
    return y;
}

// Accumulates dX (if non-null), dW and db (if non-empty) for Y = X W + b.
void linear_backward(const Mat& x, std::span<const double> w, const Mat& dy, Mat* dx, std::span<double> dw,
                     std::span<double> db) {
    const int out = dy.cols;
    for (int i = 0; i < x.rows; ++i) {
        const auto dyr = dy.row(i);
        for (int k = 0; k < x.cols; ++k) {
            kernels::axpy(x.at(i, k), dyr, dw.subspan(static_cast<std::size_t>(k) * out, out));
            if (dx != nullptr) {
                dx->at(i, k) += kernels::dot(dyr, w.subspan(static_cast<std::size_t>(k) * out, out));
            }
        }
        if (!db.empty()) {
            kernels::axpy(1.0, dyr, db);
        }
    }
}

struct LayerCache {
    Mat in;
    Mat q, k, v;
    std::vector<double> probs;  // heads x n x n, zero outside the mask
    Mat attn;                   // concatenated head outputs
    Mat mid;                    // in + attention block
    Mat act;                    // tanh(mid W1 + b1)
};

struct ForwardCache {
    Mat x;
    std::vector<int> token_timestep;
    std::vector<LayerCache> layers;
    Mat last;  // residual stream entering the output projection
    Mat y;     // pre-clamp output
};

void check_inputs(const DenoiserConfig& cfg, const LatentVideo& z, const TimestepComposition& c,
                  const NoiseSchedule& sched) {
    cfg.validate();
    if (z.frames() != cfg.frames || z.tokens() != cfg.tokens || z.dim() != cfg.dim) {
        throw std::invalid_argument("denoiser: latent shape does not match the config");
    }
    if (c.frames() != cfg.frames) {
        throw std::invalid_argument("denoiser: composition frame count does not match the config");
    }
    if (sched.timesteps() != cfg.timesteps || c.max_timestep() != cfg.timesteps) {
        throw std::invalid_argument("denoiser: timestep range does not match the config");
    }
}

template <class T>
ForwardCache run_forward(const NetView<T>& p, const DenoiserConfig& cfg, const LatentVideo& z,
                         const TimestepComposition& comp) {
    const int n = cfg.frames * cfg.tokens;
    const int d = cfg.d_model;
    const int heads = cfg.n_heads;
    const int dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const CausalMask mask(cfg.frames, cfg.tokens);

    ForwardCache c;
    c.x = Mat(n, cfg.dim);
    std::copy(z.data().begin(), z.data().end(), c.x.v.begin());
    c.token_timestep.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        c.token_timestep[static_cast<std::size_t>(i)] = comp[i / cfg.tokens];
    }

    Mat h = linear(c.x, p.win, p.bin, d);
    for (int i = 0; i < n; ++i) {
        const auto t = static_cast<std::size_t>(c.token_timestep[static_cast<std::size_t>(i)]);
        kernels::axpy(1.0, p.emb.subspan(t * d, d), h.row(i));
    }

    c.layers.resize(p.layers.size());
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const auto& w = p.layers[l];
        LayerCache& lc = c.layers[l];
        lc.in = h;
        lc.q = linear(h, w.wq, {}, d);
        lc.k = linear(h, w.wk, {}, d);
        lc.v = linear(h, w.wv, {}, d);
        lc.probs.assign(static_cast<std::size_t>(heads) * n * n, 0.0);
        lc.attn = Mat(n, d);
        std::vector<double> scores(static_cast<std::size_t>(n));
        for (int hd = 0; hd < heads; ++hd) {
            const auto off = static_cast<std::size_t>(hd) * dh;
            for (int i = 0; i < n; ++i) {
                const int limit = mask.row_limit(i);
                const auto qi = lc.q.row(i).subspan(off, dh);
                double peak = -INFINITY;
                for (int j = 0; j < limit; ++j) {
                    scores[j] = scale * kernels::dot(qi, lc.k.row(j).subspan(off, dh));
                    peak = std::max(peak, scores[j]);
                }
                double denom = 0.0;
                for (int j = 0; j < limit; ++j) {
                    scores[j] = std::exp(scores[j] - peak);
                    denom += scores[j];
                }
                double* prow = &lc.probs[(static_cast<std::size_t>(hd) * n + i) * n];
                auto oi = lc.attn.row(i).subspan(off, dh);
                for (int j = 0; j < limit; ++j) {
                    prow[j] = scores[j] / denom;
                    kernels::axpy(prow[j], lc.v.row(j).subspan(off, dh), oi);
                }
            }
        }
        Mat a = linear(lc.attn, w.wo, w.bo, d);
        lc.mid = h;
        kernels::axpy(1.0, a.v, lc.mid.v);

        lc.act = linear(lc.mid, w.w1, w.b1, cfg.mlp_hidden);
        for (double& v : lc.act.v) {
            v = std::tanh(v);
        }
        Mat m = linear(lc.act, w.w2, w.b2, d);
        h = lc.mid;
        kernels::axpy(1.0, m.v, h.v);
    }
    c.last = std::move(h);
    c.y = linear(c.last, p.wout, p.bout, cfg.dim);
    return c;
}

double clamp_value(double y, double bound) { return bound > 0.0 ? std::clamp(y, -bound, bound) : y; }

bool clamp_passes_gradient(double y, double bound) { return bound <= 0.0 || (y > -bound && y < bound); }

// dy: gradient of the loss with respect to the pre-clamp output.
template <class T, class G>
void run_backward(const NetView<T>& p, const DenoiserConfig& cfg, const ForwardCache& c, const Mat& dy,
                  NetView<G>& g) {
    const int n = cfg.frames * cfg.tokens;
    const int d = cfg.d_model;
    const int heads = cfg.n_heads;
    const int dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const CausalMask mask(cfg.frames, cfg.tokens);

    Mat dh_stream(n, d);
    linear_backward(c.last, p.wout, dy, &dh_stream, g.wout, g.bout);

    for (std::size_t l = p.layers.size(); l-- > 0;) {
        const auto& w = p.layers[l];
        auto& gw = g.layers[l];
        const LayerCache& lc = c.layers[l];

        // MLP block: h = mid + tanh(mid W1 + b1) W2 + b2
        Mat dact(n, cfg.mlp_hidden);
        linear_backward(lc.act, w.w2, dh_stream, &dact, gw.w2, gw.b2);
        for (std::size_t i = 0; i < dact.v.size(); ++i) {
            const double a = lc.act.v[i];
            dact.v[i] *= 1.0 - a * a;
        }
        Mat dmid = dh_stream;
        linear_backward(lc.mid, w.w1, dact, &dmid, gw.w1, gw.b1);

        // Attention block: mid = in + attn Wo + bo
        Mat dattn(n, d);
        linear_backward(lc.attn, w.wo, dmid, &dattn, gw.wo, gw.bo);

        Mat dq(n, d), dk(n, d), dv(n, d);
        std::vector<double> dp(static_cast<std::size_t>(n));
        for (int hd = 0; hd < heads; ++hd) {
            const auto off = static_cast<std::size_t>(hd) * dh;
            for (int i = 0; i < n; ++i) {
                const int limit = mask.row_limit(i);
                const double* prow = &lc.probs[(static_cast<std::size_t>(hd) * n + i) * n];
                const auto doi = dattn.row(i).subspan(off, dh);
                double weighted = 0.0;
                for (int j = 0; j < limit; ++j) {
                    dp[j] = kernels::dot(doi, lc.v.row(j).subspan(off, dh));
                    weighted += prow[j] * dp[j];
                    kernels::axpy(prow[j], doi, dv.row(j).subspan(off, dh));
                }
                const auto qi = lc.q.row(i).subspan(off, dh);
                auto dqi = dq.row(i).subspan(off, dh);
                for (int j = 0; j < limit; ++j) {
                    const double ds = prow[j] * (dp[j] - weighted) * scale;
                    kernels::axpy(ds, lc.k.row(j).subspan(off, dh), dqi);
                    kernels::axpy(ds, qi, dk.row(j).subspan(off, dh));
                }
            }
        }
        Mat din = dmid;
        linear_backward(lc.in, w.wq, dq, &din, gw.wq, {});
        linear_backward(lc.in, w.wk, dk, &din, gw.wk, {});
        linear_backward(lc.in, w.wv, dv, &din, gw.wv, {});
        dh_stream = std::move(din);
    }

    // Input projection and timestep embedding.
    linear_backward(c.x, p.win, dh_stream, nullptr, g.win, g.bin);
    for (int i = 0; i < n; ++i) {
        const auto t = static_cast<std::size_t>(c.token_timestep[static_cast<std::size_t>(i)]);
        kernels::axpy(1.0, dh_stream.row(i), g.emb.subspan(t * d, d));
    }
}

LatentVideo corrupt_video(const TrainingSample& s, const NoiseSchedule& sched) {
    if (!s.z0.same_shape(s.eps) || s.composition.frames() != s.z0.frames()) {
        throw std::invalid_argument("training sample: z0, eps and composition shapes disagree");
    }
    LatentVideo z(s.z0.frames(), s.z0.tokens(), s.z0.dim());
    for (int f = 0; f < z.frames(); ++f) {
        corrupt_frame(s.z0.frame(f), s.composition[f], s.eps.frame(f), sched, z.frame(f));
    }
    return z;
}

double sample_sse(const ForwardCache& c, const LatentVideo& z0, double bound) {
    double sse = 0.0;
    const auto target = z0.data();
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double r = clamp_value(c.y.v[i], bound) - target[i];
        sse += r * r;
    }
    return sse;
}

}  // namespace

LatentVideo forward(const DenoiserParams& params, const DenoiserConfig& config, const LatentVideo& z_noisy,
                    const TimestepComposition& composition, const NoiseSchedule& sched) {
    check_inputs(config, z_noisy, composition, sched);
    if (!(params.config() == config)) {
        throw std::invalid_argument("forward: parameters were built for a different config");
    }
    const auto view = make_view(params);
    const ForwardCache c = run_forward(view, config, z_noisy, composition);
    std::vector<double> out(c.y.v.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = clamp_value(c.y.v[i], config.x0_clamp);
    }
    return LatentVideo(config.frames, config.tokens, config.dim, std::move(out));
}

LossAndGrad loss_and_grad(const DenoiserParams& params, const DenoiserConfig& config,
                          std::span<const TrainingSample> batch, const NoiseSchedule& sched) {
    if (batch.empty()) {
        throw std::invalid_argument("loss_and_grad: empty batch");
    }
    if (!(params.config() == config)) {
        throw std::invalid_argument("loss_and_grad: parameters were built for a different config");
    }
    const auto view = make_view(params);
    LossAndGrad out{0.0, DenoiserGrads::zeros(config)};
    auto gview = make_view(out.grads);
    const double elems = static_cast<double>(config.frames) * config.tokens * config.dim;
    const double norm = 1.0 / (static_cast<double>(batch.size()) * elems);

    double total = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const TrainingSample& s = batch[b];
        check_inputs(config, s.z0, s.composition, sched);
        const LatentVideo z = corrupt_video(s, sched);
        const ForwardCache c = run_forward(view, config, z, s.composition);
        const double sse = sample_sse(c, s.z0, config.x0_clamp);
        if (!std::isfinite(sse)) {
            throw NonFiniteLoss(b, sse);
        }
        total += sse;

        Mat dy(c.y.rows, c.y.cols);
        const auto target = s.z0.data();
        for (std::size_t i = 0; i < dy.v.size(); ++i) {
            if (clamp_passes_gradient(c.y.v[i], config.x0_clamp)) {
                dy.v[i] = 2.0 * norm * (c.y.v[i] - target[i]);
            }
        }
        run_backward(view, config, c, dy, gview);
    }
    out.loss = total * norm;
    return out;
}

double loss_only(const DenoiserParams& params, const DenoiserConfig& config, std::span<const TrainingSample> batch,
                 const NoiseSchedule& sched) {
    if (batch.empty()) {
        throw std::invalid_argument("loss_only: empty batch");
    }
    const auto view = make_view(params);
    double total = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const TrainingSample& s = batch[b];
        check_inputs(config, s.z0, s.composition, sched);
        const ForwardCache c = run_forward(view, config, corrupt_video(s, sched), s.composition);
        const double sse = sample_sse(c, s.z0, config.x0_clamp);
        if (!std::isfinite(sse)) {
            throw NonFiniteLoss(b, sse);
        }
        total += sse;
    }
    const double elems = static_cast<double>(config.frames) * config.tokens * config.dim;
    return total / (static_cast<double>(batch.size()) * elems);
}

}  // namespace ardiff
