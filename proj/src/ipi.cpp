#include "motionkit/ipi.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "motionkit/errors.hpp"
#include "motionkit/splitmix.hpp"
#include "motionkit/tensor.hpp"

namespace motionkit {
namespace {

double gelu(double u) { return 0.5 * u * (1.0 + std::erf(u / std::numbers::sqrt2)); }

double gelu_prime(double u) {
    const double Phi = 0.5 * (1.0 + std::erf(u / std::numbers::sqrt2));
    const double phi = std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
    return Phi + u * phi;
}

struct LnCache {
    Eigen::MatrixXd n;        // normalized rows (pre gain/bias)
    Eigen::VectorXd inv_std;  // per row
};

Eigen::MatrixXd layer_norm_rows(const Eigen::MatrixXd& v, const Eigen::VectorXd& gain,
                                const Eigen::VectorXd& bias, LnCache* cache) {
    const Eigen::Index rows = v.rows(), d = v.cols();
    Eigen::MatrixXd out(rows, d);
    Eigen::MatrixXd n(rows, d);
    Eigen::VectorXd inv_std(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const double mu = v.row(i).mean();
        const double var = (v.row(i).array() - mu).square().mean();
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        n.row(i) = (v.row(i).array() - mu) * inv;
        out.row(i) = n.row(i).cwiseProduct(gain.transpose()) + bias.transpose();
        inv_std[i] = inv;
    }
    if (cache) {
        cache->n = std::move(n);
        cache->inv_std = std::move(inv_std);
    }
    return out;
}

// dv = inv·(dn − mean(dn) − n·mean(dn ⊙ n)), accumulating gain/bias grads.
Eigen::MatrixXd layer_norm_backward(const Eigen::MatrixXd& dout, const LnCache& cache,
                                    const Eigen::VectorXd& gain, Eigen::VectorXd& dgain,
                                    Eigen::VectorXd& dbias) {
    const Eigen::Index rows = dout.rows(), d = dout.cols();
    Eigen::MatrixXd dv(rows, d);
    for (Eigen::Index i = 0; i < rows; ++i) {
        dgain += dout.row(i).cwiseProduct(cache.n.row(i)).transpose();
        dbias += dout.row(i).transpose();
        const Eigen::RowVectorXd dn = dout.row(i).cwiseProduct(gain.transpose());
        const double m1 = dn.mean();
        const double m2 = dn.cwiseProduct(cache.n.row(i)).mean();
        dv.row(i) = cache.inv_std[i] * (dn.array() - m1 - cache.n.row(i).array() * m2);
    }
    return dv;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& s) {
    Eigen::MatrixXd p(s.rows(), s.cols());
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const double m = s.row(i).maxCoeff();
        const Eigen::ArrayXd e = (s.row(i).array() - m).exp();
        p.row(i) = (e / e.sum()).transpose();
    }
    return p;
}

struct AttnCache {
    Eigen::MatrixXd Qp, Kp, Vp;
    std::vector<Eigen::MatrixXd> P;  // per head, M_q×M
    Eigen::MatrixXd H;               // concatenated head outputs
};

void check_attention_shapes(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& KV,
                            const IPILayerParams& layer, int num_heads) {
    const Eigen::Index d = layer.Wq.rows();
    if (layer.Wq.cols() != d || layer.Wk.rows() != d || layer.Wk.cols() != d ||
        layer.Wv.rows() != d || layer.Wv.cols() != d || layer.Wo.rows() != d ||
        layer.Wo.cols() != d)
        throw ShapeError("attention projections must be square d×d matrices");
    if (Q.cols() != d || KV.cols() != d)
        throw ShapeError("query/key token width must equal the projection dimension");
    if (Q.rows() < 1 || KV.rows() < 1) throw ShapeError("token matrices must be non-empty");
    if (num_heads < 1 || d % num_heads != 0)
        throw ArgumentError("num_heads must divide the model dimension");
}

Eigen::MatrixXd attention_forward(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& KV,
                                  const IPILayerParams& layer, int num_heads, AttnCache* cache) {
    check_attention_shapes(Q, KV, layer, num_heads);
    const Eigen::Index d = layer.Wq.rows();
    const Eigen::Index hd = d / num_heads;
    const double scale = 1.0 / std::sqrt(double(hd));

    Eigen::MatrixXd Qp = Q * layer.Wq;
    Eigen::MatrixXd Kp = KV * layer.Wk;
    Eigen::MatrixXd Vp = KV * layer.Wv;
    Eigen::MatrixXd H(Q.rows(), d);
    std::vector<Eigen::MatrixXd> P(static_cast<std::size_t>(num_heads));
    for (int j = 0; j < num_heads; ++j) {
        const Eigen::MatrixXd S =
            Qp.middleCols(j * hd, hd) * Kp.middleCols(j * hd, hd).transpose() * scale;
        if (!S.allFinite()) throw NumericError("non-finite attention logits");
        P[static_cast<std::size_t>(j)] = softmax_rows(S);
        H.middleCols(j * hd, hd) = P[static_cast<std::size_t>(j)] * Vp.middleCols(j * hd, hd);
    }
    Eigen::MatrixXd out = H * layer.Wo;
    if (cache) {
        cache->Qp = std::move(Qp);
        cache->Kp = std::move(Kp);
        cache->Vp = std::move(Vp);
        cache->P = std::move(P);
        cache->H = std::move(H);
    }
    return out;
}

struct LayerCache {
    Eigen::MatrixXd x_in;
    AttnCache attn;
    LnCache ln1;
    Eigen::MatrixXd x1;  // LN1 output
    Eigen::MatrixXd u;   // pre-GELU
    Eigen::MatrixXd g;   // GELU(u)
    LnCache ln2;
};

Eigen::MatrixXd layer_forward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& kv,
                              const IPILayerParams& layer, int num_heads, LayerCache* cache) {
    AttnCache attn;
    const Eigen::MatrixXd attn_out =
        attention_forward(x, kv, layer, num_heads, cache ? &attn : nullptr);
    LnCache ln1;
    const Eigen::MatrixXd x1 =
        layer_norm_rows(x + attn_out, layer.ln1_gain, layer.ln1_bias, cache ? &ln1 : nullptr);

    Eigen::MatrixXd u = x1 * layer.W1;
    u.rowwise() += layer.b1.transpose();
    const Eigen::MatrixXd g = u.unaryExpr([](double v) { return gelu(v); });
    Eigen::MatrixXd f = g * layer.W2;
    f.rowwise() += layer.b2.transpose();

    LnCache ln2;
    Eigen::MatrixXd x2 =
        layer_norm_rows(x1 + f, layer.ln2_gain, layer.ln2_bias, cache ? &ln2 : nullptr);
    if (cache) {
        cache->x_in = x;
        cache->attn = std::move(attn);
        cache->ln1 = std::move(ln1);
        cache->x1 = x1;
        cache->u = std::move(u);
        cache->g = g;
        cache->ln2 = std::move(ln2);
    }
    return x2;
}

IPILayerParams zero_layer_like(const IPILayerParams& p) {
    IPILayerParams z;
    z.Wq = Eigen::MatrixXd::Zero(p.Wq.rows(), p.Wq.cols());
    z.Wk = Eigen::MatrixXd::Zero(p.Wk.rows(), p.Wk.cols());
    z.Wv = Eigen::MatrixXd::Zero(p.Wv.rows(), p.Wv.cols());
    z.Wo = Eigen::MatrixXd::Zero(p.Wo.rows(), p.Wo.cols());
    z.W1 = Eigen::MatrixXd::Zero(p.W1.rows(), p.W1.cols());
    z.W2 = Eigen::MatrixXd::Zero(p.W2.rows(), p.W2.cols());
    z.b1 = Eigen::VectorXd::Zero(p.b1.size());
    z.b2 = Eigen::VectorXd::Zero(p.b2.size());
    z.ln1_gain = Eigen::VectorXd::Zero(p.ln1_gain.size());
    z.ln1_bias = Eigen::VectorXd::Zero(p.ln1_bias.size());
    z.ln2_gain = Eigen::VectorXd::Zero(p.ln2_gain.size());
    z.ln2_bias = Eigen::VectorXd::Zero(p.ln2_bias.size());
    return z;
}

void fill_uniform(Eigen::MatrixXd& m, SplitMix64& rng) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.next_uniform(-0.1, 0.1);
}

void fill_uniform(Eigen::VectorXd& v, SplitMix64& rng) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.next_uniform(-0.1, 0.1);
}

IPIParams params_from_stream(const IPIConfig& config, SplitMix64& rng) {
    const int d = config.model_dim;
    IPIParams p;
    p.embed.resize(3, d);
    p.pos.resize(config.query_tokens, d);
    p.enc_gain.resize(d);
    p.enc_bias.resize(d);
    fill_uniform(p.embed, rng);
    fill_uniform(p.pos, rng);
    fill_uniform(p.enc_gain, rng);
    fill_uniform(p.enc_bias, rng);
    p.q_l = Eigen::MatrixXd::Zero(config.query_tokens, d);
    p.layers.resize(static_cast<std::size_t>(config.depth));
    for (IPILayerParams& l : p.layers) {
        l.Wq.resize(d, d);
        l.Wk.resize(d, d);
        l.Wv.resize(d, d);
        l.Wo.resize(d, d);
        l.W1.resize(d, config.ffn_dim);
        l.b1.resize(config.ffn_dim);
        l.W2.resize(config.ffn_dim, d);
        l.b2.resize(d);
        l.ln1_gain.resize(d);
        l.ln1_bias.resize(d);
        l.ln2_gain.resize(d);
        l.ln2_bias.resize(d);
        fill_uniform(l.Wq, rng);
        fill_uniform(l.Wk, rng);
        fill_uniform(l.Wv, rng);
        fill_uniform(l.Wo, rng);
        fill_uniform(l.W1, rng);
        fill_uniform(l.b1, rng);
        fill_uniform(l.W2, rng);
        fill_uniform(l.b2, rng);
        fill_uniform(l.ln1_gain, rng);
        fill_uniform(l.ln1_bias, rng);
        fill_uniform(l.ln2_gain, rng);
        fill_uniform(l.ln2_bias, rng);
    }
    return p;
}

}  // namespace

void IPIConfig::validate() const {
    if (depth < 1) throw ArgumentError("depth must be at least 1");
    if (model_dim < 1) throw ArgumentError("model_dim must be at least 1");
    if (num_heads < 1 || model_dim % num_heads != 0)
        throw ArgumentError("num_heads must divide model_dim");
    if (ffn_dim < 1) throw ArgumentError("ffn_dim must be at least 1");
    if (query_tokens < 1) throw ArgumentError("query_tokens must be at least 1");
}

IPIParams init_params(const IPIConfig& config, std::uint64_t seed) {
    config.validate();
    SplitMix64 rng(seed);
    return params_from_stream(config, rng);
}

void validate_params(const IPIParams& params, const IPIConfig& config) {
    config.validate();
    const int d = config.model_dim;
    auto want = [](const Eigen::MatrixXd& m, Eigen::Index r, Eigen::Index c, const char* name) {
        if (m.rows() != r || m.cols() != c)
            throw ShapeError(std::string("tensor '") + name + "' has the wrong shape");
    };
    auto wantv = [](const Eigen::VectorXd& v, Eigen::Index n, const char* name) {
        if (v.size() != n)
            throw ShapeError(std::string("tensor '") + name + "' has the wrong shape");
    };
    want(params.embed, 3, d, "embed");
    want(params.pos, config.query_tokens, d, "pos");
    wantv(params.enc_gain, d, "enc_gain");
    wantv(params.enc_bias, d, "enc_bias");
    want(params.q_l, config.query_tokens, d, "q_l");
    if (params.layers.size() != static_cast<std::size_t>(config.depth))
        throw ShapeError("layer count does not match config depth");
    for (const IPILayerParams& l : params.layers) {
        want(l.Wq, d, d, "Wq");
        want(l.Wk, d, d, "Wk");
        want(l.Wv, d, d, "Wv");
        want(l.Wo, d, d, "Wo");
        want(l.W1, d, config.ffn_dim, "W1");
        wantv(l.b1, config.ffn_dim, "b1");
        want(l.W2, config.ffn_dim, d, "W2");
        wantv(l.b2, d, "b2");
        wantv(l.ln1_gain, d, "ln1_gain");
        wantv(l.ln1_bias, d, "ln1_bias");
        wantv(l.ln2_gain, d, "ln2_gain");
        wantv(l.ln2_bias, d, "ln2_bias");
    }
}

Eigen::MatrixXd encode_keypoints(const BodyPose& pose, const IPIParams& params,
                                 const IPIConfig& config, double min_confidence) {
    validate_params(params, config);
    if (config.query_tokens != kBodyJointCount)
        throw ArgumentError("encode_keypoints requires query_tokens == 18");
    Eigen::MatrixXd q_p(kBodyJointCount, config.model_dim);
    for (int i = 0; i < kBodyJointCount; ++i) {
        const Keypoint2D& kp = pose.joints[static_cast<std::size_t>(i)];
        Eigen::RowVector3d in = Eigen::RowVector3d::Zero();
        if (kp.visible(min_confidence)) in << kp.x, kp.y, kp.confidence;
        q_p.row(i) = in * params.embed + params.pos.row(i);
    }
    return layer_norm_rows(q_p, params.enc_gain, params.enc_bias, nullptr);
}

Eigen::MatrixXd merge_query(const Eigen::MatrixXd& q_p, const Eigen::MatrixXd& q_l) {
    if (q_p.rows() != q_l.rows() || q_p.cols() != q_l.cols())
        throw ShapeError("q_p and q_l must have identical shapes");
    return q_p + q_l;
}

Eigen::MatrixXd cross_attention(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& KV,
                                const IPILayerParams& layer, int num_heads) {
    return attention_forward(Q, KV, layer, num_heads, nullptr);
}

Eigen::MatrixXd ipi_forward(const Eigen::MatrixXd& q_m, const Eigen::MatrixXd& f_phi_d,
                            const IPIParams& params, const IPIConfig& config) {
    validate_params(params, config);
    if (q_m.rows() != config.query_tokens || q_m.cols() != config.model_dim)
        throw ShapeError("q_m must be query_tokens x model_dim");
    Eigen::MatrixXd x = q_m;
    for (const IPILayerParams& layer : params.layers)
        x = layer_forward(x, f_phi_d, layer, config.num_heads, nullptr);
    return x;
}

Eigen::MatrixXd motion_attention(const Eigen::MatrixXd& x, const Eigen::MatrixXd& f_i,
                                 const IPILayerParams& layer, int num_heads, double alpha) {
    if (alpha == 0.0) return x;  // exact identity, attention not evaluated
    return x + alpha * cross_attention(x, f_i, layer, num_heads);
}

IPIGradients ipi_backward(const Eigen::MatrixXd& q_m, const Eigen::MatrixXd& f_phi_d,
                          const IPIParams& params, const IPIConfig& config,
                          const Eigen::MatrixXd& upstream_grad) {
    validate_params(params, config);
    if (q_m.rows() != config.query_tokens || q_m.cols() != config.model_dim)
        throw ShapeError("q_m must be query_tokens x model_dim");
    if (upstream_grad.rows() != q_m.rows() || upstream_grad.cols() != q_m.cols())
        throw ShapeError("upstream gradient must match the output shape");

    const int num_heads = config.num_heads;
    const Eigen::Index d = config.model_dim;
    const Eigen::Index hd = d / num_heads;
    const double scale = 1.0 / std::sqrt(double(hd));

    // Forward pass, caching every intermediate.
    std::vector<LayerCache> caches(params.layers.size());
    Eigen::MatrixXd x = q_m;
    for (std::size_t l = 0; l < params.layers.size(); ++l)
        x = layer_forward(x, f_phi_d, params.layers[l], num_heads, &caches[l]);

    IPIGradients g;
    g.embed = Eigen::MatrixXd::Zero(params.embed.rows(), params.embed.cols());
    g.pos = Eigen::MatrixXd::Zero(params.pos.rows(), params.pos.cols());
    g.q_l = Eigen::MatrixXd::Zero(params.q_l.rows(), params.q_l.cols());
    g.enc_gain = Eigen::VectorXd::Zero(params.enc_gain.size());
    g.enc_bias = Eigen::VectorXd::Zero(params.enc_bias.size());
    g.layers.reserve(params.layers.size());
    for (const IPILayerParams& l : params.layers) g.layers.push_back(zero_layer_like(l));
    g.f_phi_d = Eigen::MatrixXd::Zero(f_phi_d.rows(), f_phi_d.cols());

    Eigen::MatrixXd dx = upstream_grad;
    for (std::size_t li = params.layers.size(); li-- > 0;) {
        const IPILayerParams& p = params.layers[li];
        IPILayerParams& gp = g.layers[li];
        const LayerCache& c = caches[li];

        // LN2 over r2 = x1 + f
        Eigen::MatrixXd dr2 = layer_norm_backward(dx, c.ln2, p.ln2_gain, gp.ln2_gain, gp.ln2_bias);
        Eigen::MatrixXd dx1 = dr2;  // residual branch
        const Eigen::MatrixXd& df = dr2;

        // FFN: f = GELU(x1 W1 + b1) W2 + b2
        const Eigen::MatrixXd dg = df * p.W2.transpose();
        gp.W2 += c.g.transpose() * df;
        gp.b2 += df.colwise().sum().transpose();
        const Eigen::MatrixXd du =
            dg.cwiseProduct(c.u.unaryExpr([](double v) { return gelu_prime(v); }));
        gp.W1 += c.x1.transpose() * du;
        gp.b1 += du.colwise().sum().transpose();
        dx1 += du * p.W1.transpose();

        // LN1 over r1 = x_in + attn_out
        Eigen::MatrixXd dr1 = layer_norm_backward(dx1, c.ln1, p.ln1_gain, gp.ln1_gain, gp.ln1_bias);
        Eigen::MatrixXd dx_in = dr1;      // residual branch
        const Eigen::MatrixXd& dattn = dr1;

        // attention: out = H Wo, H_j = P_j Vp_j, P_j = softmax(S_j), S_j = Qp_j Kp_jᵀ·scale
        gp.Wo += c.attn.H.transpose() * dattn;
        const Eigen::MatrixXd dH = dattn * p.Wo.transpose();
        Eigen::MatrixXd dQp = Eigen::MatrixXd::Zero(c.attn.Qp.rows(), d);
        Eigen::MatrixXd dKp = Eigen::MatrixXd::Zero(c.attn.Kp.rows(), d);
        Eigen::MatrixXd dVp = Eigen::MatrixXd::Zero(c.attn.Vp.rows(), d);
        for (int j = 0; j < num_heads; ++j) {
            const auto& P = c.attn.P[static_cast<std::size_t>(j)];
            const Eigen::MatrixXd dHj = dH.middleCols(j * hd, hd);
            const Eigen::MatrixXd dP = dHj * c.attn.Vp.middleCols(j * hd, hd).transpose();
            dVp.middleCols(j * hd, hd) += P.transpose() * dHj;
            Eigen::MatrixXd dS(P.rows(), P.cols());
            for (Eigen::Index r = 0; r < P.rows(); ++r) {
                const double dot = dP.row(r).dot(P.row(r));
                dS.row(r) = (P.row(r).array() * (dP.row(r).array() - dot)).matrix();
            }
            dQp.middleCols(j * hd, hd) += dS * c.attn.Kp.middleCols(j * hd, hd) * scale;
            dKp.middleCols(j * hd, hd) += dS.transpose() * c.attn.Qp.middleCols(j * hd, hd) * scale;
        }
        gp.Wq += c.x_in.transpose() * dQp;
        gp.Wk += f_phi_d.transpose() * dKp;
        gp.Wv += f_phi_d.transpose() * dVp;
        dx_in += dQp * p.Wq.transpose();
        g.f_phi_d += dKp * p.Wk.transpose() + dVp * p.Wv.transpose();

        dx = std::move(dx_in);
    }
    g.q_m = std::move(dx);
    return g;
}

double GradCheckReport::worst() const {
    double w = 0.0;
    for (const GradCheckEntry& e : entries) w = std::max(w, e.max_rel_error);
    return w;
}

bool GradCheckReport::passed() const { return worst() < tolerance; }

GradCheckReport gradcheck(const IPIConfig& config, std::uint64_t seed) {
    config.validate();
    SplitMix64 rng(seed);
    IPIParams params = params_from_stream(config, rng);

    const Eigen::Index mq = config.query_tokens;
    const Eigen::Index d = config.model_dim;
    const Eigen::Index mkv = mq + 2;
    Eigen::MatrixXd q_m(mq, d), f(mkv, d), upstream(mq, d);
    for (Eigen::Index i = 0; i < q_m.rows(); ++i)
        for (Eigen::Index j = 0; j < q_m.cols(); ++j) q_m(i, j) = rng.next_uniform(-1.0, 1.0);
    for (Eigen::Index i = 0; i < f.rows(); ++i)
        for (Eigen::Index j = 0; j < f.cols(); ++j) f(i, j) = rng.next_uniform(-1.0, 1.0);
    for (Eigen::Index i = 0; i < upstream.rows(); ++i)
        for (Eigen::Index j = 0; j < upstream.cols(); ++j)
            upstream(i, j) = rng.next_uniform(-1.0, 1.0);

    const IPIGradients analytic = ipi_backward(q_m, f, params, config, upstream);

    const auto loss = [&]() {
        return (ipi_forward(q_m, f, params, config).array() * upstream.array()).sum();
    };

    struct TensorRef {
        std::string name;
        double* data;
        const double* grad;
        Eigen::Index size;
    };
    std::vector<TensorRef> refs;
    auto addm = [&](const std::string& name, Eigen::MatrixXd& m, const Eigen::MatrixXd& gm) {
        refs.push_back({name, m.data(), gm.data(), m.size()});
    };
    auto addv = [&](const std::string& name, Eigen::VectorXd& v, const Eigen::VectorXd& gv) {
        refs.push_back({name, v.data(), gv.data(), v.size()});
    };
    addm("embed", params.embed, analytic.embed);
    addm("pos", params.pos, analytic.pos);
    addv("enc_gain", params.enc_gain, analytic.enc_gain);
    addv("enc_bias", params.enc_bias, analytic.enc_bias);
    addm("q_l", params.q_l, analytic.q_l);
    for (std::size_t li = 0; li < params.layers.size(); ++li) {
        IPILayerParams& p = params.layers[li];
        const IPILayerParams& gp = analytic.layers[li];
        const std::string prefix = "layer" + std::to_string(li) + ".";
        addm(prefix + "Wq", p.Wq, gp.Wq);
        addm(prefix + "Wk", p.Wk, gp.Wk);
        addm(prefix + "Wv", p.Wv, gp.Wv);
        addm(prefix + "Wo", p.Wo, gp.Wo);
        addm(prefix + "W1", p.W1, gp.W1);
        addv(prefix + "b1", p.b1, gp.b1);
        addm(prefix + "W2", p.W2, gp.W2);
        addv(prefix + "b2", p.b2, gp.b2);
        addv(prefix + "ln1_gain", p.ln1_gain, gp.ln1_gain);
        addv(prefix + "ln1_bias", p.ln1_bias, gp.ln1_bias);
        addv(prefix + "ln2_gain", p.ln2_gain, gp.ln2_gain);
        addv(prefix + "ln2_bias", p.ln2_bias, gp.ln2_bias);
    }
    addm("q_m", q_m, analytic.q_m);
    addm("f_phi_d", f, analytic.f_phi_d);

    const double h = 1e-5;
    GradCheckReport report;
    for (const TensorRef& ref : refs) {
        double max_diff = 0.0, max_a = 0.0, max_n = 0.0;
        for (Eigen::Index k = 0; k < ref.size; ++k) {
            const double orig = ref.data[k];
            ref.data[k] = orig + h;
            const double lp = loss();
            ref.data[k] = orig - h;
            const double lm = loss();
            ref.data[k] = orig;
            const double numeric = (lp - lm) / (2.0 * h);
            const double a = ref.grad[k];
            max_diff = std::max(max_diff, std::abs(a - numeric));
            max_a = std::max(max_a, std::abs(a));
            max_n = std::max(max_n, std::abs(numeric));
        }
        const double denom = std::max({1e-6, max_a, max_n});
        report.entries.push_back({ref.name, max_diff / denom});
    }
    return report;
}

void save_params(const std::string& path, const IPIParams& params) {
    auto vec = [](const Eigen::VectorXd& v) {
        LatentTensor t;
        t.shape = {static_cast<std::size_t>(v.size())};
        t.data = v.array();
        return t;
    };
    std::vector<std::pair<std::string, LatentTensor>> tensors;
    tensors.emplace_back("embed", matrix_to_latent(params.embed));
    tensors.emplace_back("pos", matrix_to_latent(params.pos));
    tensors.emplace_back("enc_gain", vec(params.enc_gain));
    tensors.emplace_back("enc_bias", vec(params.enc_bias));
    tensors.emplace_back("q_l", matrix_to_latent(params.q_l));
    for (std::size_t li = 0; li < params.layers.size(); ++li) {
        const IPILayerParams& l = params.layers[li];
        const std::string prefix = "layer" + std::to_string(li) + ".";
        tensors.emplace_back(prefix + "Wq", matrix_to_latent(l.Wq));
        tensors.emplace_back(prefix + "Wk", matrix_to_latent(l.Wk));
        tensors.emplace_back(prefix + "Wv", matrix_to_latent(l.Wv));
        tensors.emplace_back(prefix + "Wo", matrix_to_latent(l.Wo));
        tensors.emplace_back(prefix + "W1", matrix_to_latent(l.W1));
        tensors.emplace_back(prefix + "b1", vec(l.b1));
        tensors.emplace_back(prefix + "W2", matrix_to_latent(l.W2));
        tensors.emplace_back(prefix + "b2", vec(l.b2));
        tensors.emplace_back(prefix + "ln1_gain", vec(l.ln1_gain));
        tensors.emplace_back(prefix + "ln1_bias", vec(l.ln1_bias));
        tensors.emplace_back(prefix + "ln2_gain", vec(l.ln2_gain));
        tensors.emplace_back(prefix + "ln2_bias", vec(l.ln2_bias));
    }
    write_tensor_pack(path, tensors);
}

IPIParams load_params(const std::string& path, const IPIConfig& config) {
    config.validate();
    std::map<std::string, LatentTensor> pack;
    for (auto& [name, tensor] : read_tensor_pack(path)) pack[name] = std::move(tensor);

    auto mat = [&](const std::string& name) {
        auto it = pack.find(name);
        if (it == pack.end()) throw SchemaError(name, "missing parameter tensor");
        return latent_to_matrix(it->second);
    };
    auto vec = [&](const std::string& name) -> Eigen::VectorXd {
        auto it = pack.find(name);
        if (it == pack.end()) throw SchemaError(name, "missing parameter tensor");
        if (it->second.shape.size() != 1) throw ShapeError("tensor '" + name + "' must be rank-1");
        return it->second.data.matrix();
    };

    IPIParams p;
    p.embed = mat("embed");
    p.pos = mat("pos");
    p.enc_gain = vec("enc_gain");
    p.enc_bias = vec("enc_bias");
    p.q_l = mat("q_l");
    p.layers.resize(static_cast<std::size_t>(config.depth));
    for (std::size_t li = 0; li < p.layers.size(); ++li) {
        IPILayerParams& l = p.layers[li];
        const std::string prefix = "layer" + std::to_string(li) + ".";
        l.Wq = mat(prefix + "Wq");
        l.Wk = mat(prefix + "Wk");
        l.Wv = mat(prefix + "Wv");
        l.Wo = mat(prefix + "Wo");
        l.W1 = mat(prefix + "W1");
        l.b1 = vec(prefix + "b1");
        l.W2 = mat(prefix + "W2");
        l.b2 = vec(prefix + "b2");
        l.ln1_gain = vec(prefix + "ln1_gain");
        l.ln1_bias = vec(prefix + "ln1_bias");
        l.ln2_gain = vec(prefix + "ln2_gain");
        l.ln2_bias = vec(prefix + "ln2_bias");
    }
    validate_params(p, config);
    return p;
}

}  // namespace motionkit
