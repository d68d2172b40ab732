#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "utir/dataset.hpp"
#include "utir/errors.hpp"
#include "utir/image_io.hpp"
#include "utir/parallel.hpp"
#include "utir/raster.hpp"
#include "utir/rng.hpp"

namespace utir {

enum class Pooling { max, average };
enum class Upsampling { nearest, bilinear };

/// Two-path image-to-image regression network: one stack of conv+ReLU blocks
/// at full resolution, a second stack behind a 2x2 pool (restored by a 2x
/// upsample), channel concatenation, and a final linear convolution.
struct NetworkSpec {
    int filters = 70;
    int kernel = 3;
    int blocks = 4;
    Pooling pooling = Pooling::max;
    Upsampling upsampling = Upsampling::bilinear;
    int input_channels = 1;
    int output_channels = 1;

    void validate() const {
        if (filters < 1) throw ParamError("filters must be >= 1");
        if (kernel < 1 || kernel % 2 == 0) throw ParamError("kernel must be odd and >= 1");
        if (blocks < 1) throw ParamError("blocks must be >= 1");
        if (input_channels != 1 || output_channels != 1)
            throw ParamError("only single-channel input/output is supported");
    }
};

struct ConvParams {
    int in_ch = 0, out_ch = 0, kernel = 0;
    std::vector<double> w;  // [oc][ic][ky][kx]
    std::vector<double> b;  // [oc]

    void resize(int ic, int oc, int k) {
        in_ch = ic;
        out_ch = oc;
        kernel = k;
        w.assign(static_cast<size_t>(oc) * ic * k * k, 0.0);
        b.assign(oc, 0.0);
    }
    size_t param_count() const { return w.size() + b.size(); }
};

struct TrainingMeta {
    int epochs = 0;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    uint64_t seed = 0;
    int tile_size = 0;
    std::string dataset_hash;
    std::string params_hash;
    std::vector<double> loss_curve;  // one mean MSE per epoch
};

struct NetworkWeights {
    NetworkSpec spec;
    std::vector<ConvParams> path1, path2;
    ConvParams head;
    TrainingMeta meta;

    template <typename F>
    void for_each_conv(F&& f) {
        for (auto& c : path1) f(c);
        for (auto& c : path2) f(c);
        f(head);
    }
    template <typename F>
    void for_each_conv(F&& f) const {
        for (const auto& c : path1) f(c);
        for (const auto& c : path2) f(c);
        f(head);
    }
    size_t param_count() const {
        size_t n = 0;
        for_each_conv([&](const ConvParams& c) { n += c.param_count(); });
        return n;
    }
    bool all_finite() const {
        bool ok = true;
        for_each_conv([&](const ConvParams& c) {
            for (double x : c.w)
                if (!std::isfinite(x)) ok = false;
            for (double x : c.b)
                if (!std::isfinite(x)) ok = false;
        });
        return ok;
    }
};

struct TrainConfig {
    double initial_lr = 1e-4;
    int lr_drop_every = 5;       // epochs
    double lr_drop_factor = 5.0;
    int batch_size = 1;
    int epochs = 30;
    double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;  // Adam
    uint64_t seed = 0;

    void validate() const {
        if (!(initial_lr > 0.0) || lr_drop_every < 1 || !(lr_drop_factor > 0.0) ||
            batch_size < 1 || epochs < 1)
            throw ParamError("invalid training configuration");
    }
    double lr_at_epoch(int epoch1based) const {
        return initial_lr * std::pow(1.0 / lr_drop_factor, (epoch1based - 1) / lr_drop_every);
    }
};

/// Variance-scaled (He) random initialization from a fixed seed stream.
inline NetworkWeights init_weights(const NetworkSpec& spec, uint64_t seed) {
    spec.validate();
    NetworkWeights nw;
    nw.spec = spec;
    Rng rng(mix_seed(seed, fnv1a64("weight-init")));
    auto init_conv = [&](ConvParams& c, int ic, int oc) {
        c.resize(ic, oc, spec.kernel);
        const double stddev = std::sqrt(2.0 / (static_cast<double>(ic) * spec.kernel * spec.kernel));
        for (double& x : c.w) x = stddev * rng.normal();
        // biases stay zero
    };
    nw.path1.resize(spec.blocks);
    nw.path2.resize(spec.blocks);
    for (int i = 0; i < spec.blocks; ++i) {
        init_conv(nw.path1[i], i == 0 ? spec.input_channels : spec.filters, spec.filters);
    }
    for (int i = 0; i < spec.blocks; ++i) {
        init_conv(nw.path2[i], i == 0 ? spec.input_channels : spec.filters, spec.filters);
    }
    init_conv(nw.head, 2 * spec.filters, spec.output_channels);
    nw.meta.seed = seed;
    return nw;
}

// ---------------------------------------------------------------------------
// layer kernels
// ---------------------------------------------------------------------------

namespace cnn_detail {

struct Tensor {
    int ch = 0, h = 0, w = 0;
    std::vector<double> v;

    void resize(int c, int hh, int ww) {
        ch = c;
        h = hh;
        w = ww;
        v.assign(static_cast<size_t>(c) * hh * ww, 0.0);
    }
    double* plane(int c) { return v.data() + static_cast<size_t>(c) * h * w; }
    const double* plane(int c) const { return v.data() + static_cast<size_t>(c) * h * w; }
};

// Same-size convolution with replicate borders. The x loop is split into a
// clamped left edge, a contiguous middle (vectorizes), and a clamped right
// edge.
inline void conv_forward(const ConvParams& p, const Tensor& in, Tensor& out) {
    if (in.ch != p.in_ch) throw ContractError("conv input channel mismatch");
    const int H = in.h, W = in.w, r = p.kernel / 2, K = p.kernel;
    out.resize(p.out_ch, H, W);
    parallel_for(0, p.out_ch, [&](int oc) {
        double* oplane = out.plane(oc);
        const size_t n = static_cast<size_t>(H) * W;
        for (size_t i = 0; i < n; ++i) oplane[i] = p.b[oc];
        for (int ic = 0; ic < p.in_ch; ++ic) {
            const double* iplane = in.plane(ic);
            for (int ky = 0; ky < K; ++ky) {
                for (int kx = 0; kx < K; ++kx) {
                    const double wv = p.w[((static_cast<size_t>(oc) * p.in_ch + ic) * K + ky) * K + kx];
                    const int dx = kx - r;
                    const int x0 = std::max(0, -dx);
                    const int x1 = std::min(W, W - dx);
                    for (int y = 0; y < H; ++y) {
                        const int sy = std::clamp(y + ky - r, 0, H - 1);
                        const double* irow = iplane + static_cast<size_t>(sy) * W;
                        double* orow = oplane + static_cast<size_t>(y) * W;
                        for (int x = 0; x < x0; ++x) orow[x] += wv * irow[0];
                        for (int x = x0; x < x1; ++x) orow[x] += wv * irow[x + dx];
                        for (int x = std::max(x0, x1); x < W; ++x) orow[x] += wv * irow[W - 1];
                    }
                }
            }
        }
    });
}

// Gradients w.r.t. parameters and (optionally) the input.
inline void conv_backward(const ConvParams& p, const Tensor& in, const Tensor& gout,
                          ConvParams& gpar, Tensor* gin) {
    const int H = in.h, W = in.w, r = p.kernel / 2, K = p.kernel;
    gpar.resize(p.in_ch, p.out_ch, K);
    parallel_for(0, p.out_ch, [&](int oc) {
        const double* gplane = gout.plane(oc);
        double bacc = 0.0;
        const size_t n = static_cast<size_t>(H) * W;
        for (size_t i = 0; i < n; ++i) bacc += gplane[i];
        gpar.b[oc] = bacc;
        for (int ic = 0; ic < p.in_ch; ++ic) {
            const double* iplane = in.plane(ic);
            for (int ky = 0; ky < K; ++ky) {
                for (int kx = 0; kx < K; ++kx) {
                    const int dx = kx - r;
                    const int x0 = std::max(0, -dx);
                    const int x1 = std::min(W, W - dx);
                    double acc = 0.0;
                    for (int y = 0; y < H; ++y) {
                        const int sy = std::clamp(y + ky - r, 0, H - 1);
                        const double* irow = iplane + static_cast<size_t>(sy) * W;
                        const double* grow = gplane + static_cast<size_t>(y) * W;
                        for (int x = 0; x < x0; ++x) acc += grow[x] * irow[0];
                        for (int x = x0; x < x1; ++x) acc += grow[x] * irow[x + dx];
                        for (int x = std::max(x0, x1); x < W; ++x) acc += grow[x] * irow[W - 1];
                    }
                    gpar.w[((static_cast<size_t>(oc) * p.in_ch + ic) * K + ky) * K + kx] = acc;
                }
            }
        }
    });
    if (!gin) return;
    gin->resize(p.in_ch, H, W);
    parallel_for(0, p.in_ch, [&](int ic) {
        double* dplane = gin->plane(ic);
        for (int oc = 0; oc < p.out_ch; ++oc) {
            const double* gplane = gout.plane(oc);
            for (int ky = 0; ky < K; ++ky) {
                for (int kx = 0; kx < K; ++kx) {
                    const double wv = p.w[((static_cast<size_t>(oc) * p.in_ch + ic) * K + ky) * K + kx];
                    const int dx = kx - r;
                    const int x0 = std::max(0, -dx);
                    const int x1 = std::min(W, W - dx);
                    for (int y = 0; y < H; ++y) {
                        const int sy = std::clamp(y + ky - r, 0, H - 1);
                        double* drow = dplane + static_cast<size_t>(sy) * W;
                        const double* grow = gplane + static_cast<size_t>(y) * W;
                        for (int x = 0; x < x0; ++x) drow[0] += wv * grow[x];
                        for (int x = x0; x < x1; ++x) drow[x + dx] += wv * grow[x];
                        for (int x = std::max(x0, x1); x < W; ++x) drow[W - 1] += wv * grow[x];
                    }
                }
            }
        }
    });
}

inline void relu_forward(const Tensor& in, Tensor& out) {
    out.resize(in.ch, in.h, in.w);
    for (size_t i = 0; i < in.v.size(); ++i) out.v[i] = in.v[i] > 0.0 ? in.v[i] : 0.0;
}

inline void relu_backward(const Tensor& pre, const Tensor& gout, Tensor& gin) {
    gin.resize(pre.ch, pre.h, pre.w);
    for (size_t i = 0; i < pre.v.size(); ++i) gin.v[i] = pre.v[i] > 0.0 ? gout.v[i] : 0.0;
}

// 2x2, stride 2. argmax records the winning quadrant (0..3) for max pooling;
// ties go to the first in scan order.
inline void pool_forward(Pooling kind, const Tensor& in, Tensor& out, std::vector<uint8_t>* argmax) {
    const int H2 = in.h / 2, W2 = in.w / 2;
    out.resize(in.ch, H2, W2);
    if (argmax) argmax->assign(out.v.size(), 0);
    for (int c = 0; c < in.ch; ++c) {
        const double* ip = in.plane(c);
        double* op = out.plane(c);
        for (int y = 0; y < H2; ++y) {
            for (int x = 0; x < W2; ++x) {
                const double s00 = ip[static_cast<size_t>(2 * y) * in.w + 2 * x];
                const double s01 = ip[static_cast<size_t>(2 * y) * in.w + 2 * x + 1];
                const double s10 = ip[static_cast<size_t>(2 * y + 1) * in.w + 2 * x];
                const double s11 = ip[static_cast<size_t>(2 * y + 1) * in.w + 2 * x + 1];
                const size_t oi = static_cast<size_t>(y) * W2 + x;
                if (kind == Pooling::average) {
                    op[oi] = 0.25 * (s00 + s01 + s10 + s11);
                } else {
                    double best = s00;
                    uint8_t bi = 0;
                    if (s01 > best) { best = s01; bi = 1; }
                    if (s10 > best) { best = s10; bi = 2; }
                    if (s11 > best) { best = s11; bi = 3; }
                    op[oi] = best;
                    if (argmax) (*argmax)[static_cast<size_t>(c) * H2 * W2 + oi] = bi;
                }
            }
        }
    }
}

inline void pool_backward(Pooling kind, const Tensor& gout, const std::vector<uint8_t>& argmax,
                          int in_h, int in_w, Tensor& gin) {
    gin.resize(gout.ch, in_h, in_w);
    const int H2 = gout.h, W2 = gout.w;
    for (int c = 0; c < gout.ch; ++c) {
        const double* gp = gout.plane(c);
        double* dp = gin.plane(c);
        for (int y = 0; y < H2; ++y) {
            for (int x = 0; x < W2; ++x) {
                const size_t oi = static_cast<size_t>(y) * W2 + x;
                const double g = gp[oi];
                if (kind == Pooling::average) {
                    const double q = 0.25 * g;
                    dp[static_cast<size_t>(2 * y) * in_w + 2 * x] += q;
                    dp[static_cast<size_t>(2 * y) * in_w + 2 * x + 1] += q;
                    dp[static_cast<size_t>(2 * y + 1) * in_w + 2 * x] += q;
                    dp[static_cast<size_t>(2 * y + 1) * in_w + 2 * x + 1] += q;
                } else {
                    const uint8_t bi = argmax[static_cast<size_t>(c) * H2 * W2 + oi];
                    const int yy = 2 * y + (bi >> 1), xx = 2 * x + (bi & 1);
                    dp[static_cast<size_t>(yy) * in_w + xx] += g;
                }
            }
        }
    }
}

struct UpsampleTaps {
    std::vector<int> i0, i1;
    std::vector<double> t;
};

inline UpsampleTaps upsample_taps(Upsampling kind, int out_n) {
    UpsampleTaps taps;
    taps.i0.resize(out_n);
    taps.i1.resize(out_n);
    taps.t.resize(out_n);
    const int in_n = out_n / 2;
    for (int d = 0; d < out_n; ++d) {
        if (kind == Upsampling::nearest) {
            taps.i0[d] = taps.i1[d] = d / 2;
            taps.t[d] = 0.0;
        } else {
            const double s = 0.5 * d - 0.25;
            const int i0 = static_cast<int>(std::floor(s));
            taps.t[d] = s - i0;
            taps.i0[d] = std::clamp(i0, 0, in_n - 1);
            taps.i1[d] = std::clamp(i0 + 1, 0, in_n - 1);
        }
    }
    return taps;
}

inline void upsample_forward(Upsampling kind, const Tensor& in, Tensor& out) {
    const int H = in.h * 2, W = in.w * 2;
    out.resize(in.ch, H, W);
    const UpsampleTaps ty = upsample_taps(kind, H);
    const UpsampleTaps tx = upsample_taps(kind, W);
    for (int c = 0; c < in.ch; ++c) {
        const double* ip = in.plane(c);
        double* op = out.plane(c);
        for (int y = 0; y < H; ++y) {
            const double* r0 = ip + static_cast<size_t>(ty.i0[y]) * in.w;
            const double* r1 = ip + static_cast<size_t>(ty.i1[y]) * in.w;
            const double wy = ty.t[y];
            double* orow = op + static_cast<size_t>(y) * W;
            for (int x = 0; x < W; ++x) {
                const double a = r0[tx.i0[x]] + tx.t[x] * (r0[tx.i1[x]] - r0[tx.i0[x]]);
                const double b = r1[tx.i0[x]] + tx.t[x] * (r1[tx.i1[x]] - r1[tx.i0[x]]);
                orow[x] = a + wy * (b - a);
            }
        }
    }
}

inline void upsample_backward(Upsampling kind, const Tensor& gout, Tensor& gin) {
    const int H2 = gout.h / 2, W2 = gout.w / 2;
    gin.resize(gout.ch, H2, W2);
    const UpsampleTaps ty = upsample_taps(kind, gout.h);
    const UpsampleTaps tx = upsample_taps(kind, gout.w);
    for (int c = 0; c < gout.ch; ++c) {
        const double* gp = gout.plane(c);
        double* dp = gin.plane(c);
        for (int y = 0; y < gout.h; ++y) {
            const double wy = ty.t[y];
            const double* grow = gp + static_cast<size_t>(y) * gout.w;
            double* d0 = dp + static_cast<size_t>(ty.i0[y]) * W2;
            double* d1 = dp + static_cast<size_t>(ty.i1[y]) * W2;
            for (int x = 0; x < gout.w; ++x) {
                const double g = grow[x];
                const double wx = tx.t[x];
                d0[tx.i0[x]] += (1.0 - wy) * (1.0 - wx) * g;
                d0[tx.i1[x]] += (1.0 - wy) * wx * g;
                d1[tx.i0[x]] += wy * (1.0 - wx) * g;
                d1[tx.i1[x]] += wy * wx * g;
            }
        }
    }
}

inline void concat(const Tensor& a, const Tensor& b, Tensor& out) {
    out.resize(a.ch + b.ch, a.h, a.w);
    std::memcpy(out.v.data(), a.v.data(), a.v.size() * sizeof(double));
    std::memcpy(out.v.data() + a.v.size(), b.v.data(), b.v.size() * sizeof(double));
}

}  // namespace cnn_detail

// ---------------------------------------------------------------------------
// inference
// ---------------------------------------------------------------------------

inline Raster forward(const NetworkWeights& weights, const Raster& input) {
    weights.spec.validate();
    if (input.width % 2 != 0 || input.height % 2 != 0)
        throw ShapeError("network input dimensions must be even");
    if (!all_finite(input)) throw DataError("network input contains non-finite values");

    using cnn_detail::Tensor;
    Tensor x;
    x.resize(1, input.height, input.width);
    std::memcpy(x.v.data(), input.v.data(), input.v.size() * sizeof(double));

    Tensor a = x, tmp;
    for (const auto& conv : weights.path1) {
        cnn_detail::conv_forward(conv, a, tmp);
        cnn_detail::relu_forward(tmp, a);
    }
    Tensor p;
    cnn_detail::pool_forward(weights.spec.pooling, x, p, nullptr);
    for (const auto& conv : weights.path2) {
        cnn_detail::conv_forward(conv, p, tmp);
        cnn_detail::relu_forward(tmp, p);
    }
    Tensor up;
    cnn_detail::upsample_forward(weights.spec.upsampling, p, up);
    Tensor cat;
    cnn_detail::concat(a, up, cat);
    Tensor out;
    cnn_detail::conv_forward(weights.head, cat, out);

    Raster result(input.width, input.height, input.pitch);
    std::memcpy(result.v.data(), out.plane(0), result.v.size() * sizeof(double));
    return result;
}

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

namespace cnn_detail {

struct ForwardCache {
    Tensor input;
    std::vector<Tensor> p1_pre, p1_act;
    Tensor pooled;
    std::vector<uint8_t> pool_arg;
    std::vector<Tensor> p2_pre, p2_act;
    Tensor upsampled;
    Tensor cat;
    Tensor output;
};

struct Gradients {
    std::vector<ConvParams> path1, path2;
    ConvParams head;

    template <typename F>
    void for_each_conv(F&& f) {
        for (auto& c : path1) f(c);
        for (auto& c : path2) f(c);
        f(head);
    }
};

inline double forward_train(const NetworkWeights& W, const Raster& in, const Raster& target,
                            ForwardCache& c) {
    c.input.resize(1, in.height, in.width);
    std::memcpy(c.input.v.data(), in.v.data(), in.v.size() * sizeof(double));

    const int B = static_cast<int>(W.path1.size());
    c.p1_pre.resize(B);
    c.p1_act.resize(B);
    c.p2_pre.resize(B);
    c.p2_act.resize(B);

    const Tensor* prev = &c.input;
    for (int i = 0; i < B; ++i) {
        conv_forward(W.path1[i], *prev, c.p1_pre[i]);
        relu_forward(c.p1_pre[i], c.p1_act[i]);
        prev = &c.p1_act[i];
    }
    pool_forward(W.spec.pooling, c.input, c.pooled, &c.pool_arg);
    prev = &c.pooled;
    for (int i = 0; i < B; ++i) {
        conv_forward(W.path2[i], *prev, c.p2_pre[i]);
        relu_forward(c.p2_pre[i], c.p2_act[i]);
        prev = &c.p2_act[i];
    }
    upsample_forward(W.spec.upsampling, c.p2_act[B - 1], c.upsampled);
    concat(c.p1_act[B - 1], c.upsampled, c.cat);
    conv_forward(W.head, c.cat, c.output);

    double loss = 0.0;
    const double* op = c.output.plane(0);
    for (size_t i = 0; i < target.v.size(); ++i) {
        const double d = op[i] - target.v[i];
        loss += d * d;
    }
    return loss / static_cast<double>(target.v.size());
}

inline void backward(const NetworkWeights& W, const Raster& target, ForwardCache& c, Gradients& g) {
    const int B = static_cast<int>(W.path1.size());
    g.path1.resize(B);
    g.path2.resize(B);

    Tensor gout;
    gout.resize(1, c.output.h, c.output.w);
    const double scale = 2.0 / static_cast<double>(target.v.size());
    const double* op = c.output.plane(0);
    for (size_t i = 0; i < target.v.size(); ++i) gout.v[i] = scale * (op[i] - target.v[i]);

    Tensor gcat;
    conv_backward(W.head, c.cat, gout, g.head, &gcat);

    // split the concatenation gradient
    const int F = W.spec.filters;
    Tensor g1, g2up;
    g1.resize(F, gcat.h, gcat.w);
    g2up.resize(F, gcat.h, gcat.w);
    std::memcpy(g1.v.data(), gcat.v.data(), g1.v.size() * sizeof(double));
    std::memcpy(g2up.v.data(), gcat.v.data() + g1.v.size(), g2up.v.size() * sizeof(double));

    // path 1
    Tensor gcur = std::move(g1), gtmp, gpre;
    for (int i = B - 1; i >= 0; --i) {
        relu_backward(c.p1_pre[i], gcur, gpre);
        const Tensor& below = i == 0 ? c.input : c.p1_act[i - 1];
        conv_backward(W.path1[i], below, gpre, g.path1[i], i == 0 ? nullptr : &gtmp);
        if (i > 0) gcur = std::move(gtmp);
    }

    // path 2
    Tensor g2;
    upsample_backward(W.spec.upsampling, g2up, g2);
    for (int i = B - 1; i >= 0; --i) {
        relu_backward(c.p2_pre[i], g2, gpre);
        const Tensor& below = i == 0 ? c.pooled : c.p2_act[i - 1];
        conv_backward(W.path2[i], below, gpre, g.path2[i], i == 0 ? nullptr : &gtmp);
        if (i > 0) g2 = std::move(gtmp);
    }
    // the pool layer has no parameters and the input needs no gradient
}

}  // namespace cnn_detail

struct TrainSample {
    Raster input, target;
};

/// Adam with the stepped learning-rate schedule over explicit samples.
/// Deterministic for a fixed config: init, shuffling, and accumulation order
/// are all driven by cfg.seed.
inline NetworkWeights train_on_pairs(const std::vector<TrainSample>& samples,
                                     const NetworkSpec& spec, const TrainConfig& cfg) {
    spec.validate();
    cfg.validate();
    if (samples.empty()) throw CountError("training requires at least one pair");
    for (const auto& s : samples) {
        if (!s.input.same_shape(s.target)) throw ShapeError("training pair dimensions differ");
        if (s.input.width % 2 != 0 || s.input.height % 2 != 0)
            throw ShapeError("training pair dimensions must be even");
    }

    NetworkWeights W = init_weights(spec, cfg.seed);

    // flat Adam state across all parameters
    const size_t n_params = W.param_count();
    std::vector<double> m(n_params, 0.0), v(n_params, 0.0);

    cnn_detail::ForwardCache cache;
    cnn_detail::Gradients grads, batch_acc;

    double initial_loss = 0.0;
    for (const auto& s : samples) initial_loss += cnn_detail::forward_train(W, s.input, s.target, cache);
    initial_loss /= static_cast<double>(samples.size());

    Rng shuffle_rng(mix_seed(cfg.seed, fnv1a64("shuffle")));
    std::vector<size_t> order(samples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    long step = 0;
    std::vector<double> curve;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double lr = cfg.lr_at_epoch(epoch);
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);

        double epoch_loss = 0.0;
        size_t done = 0;
        while (done < order.size()) {
            const size_t batch = std::min<size_t>(cfg.batch_size, order.size() - done);
            bool first = true;
            for (size_t k = 0; k < batch; ++k) {
                const TrainSample& s = samples[order[done + k]];
                epoch_loss += cnn_detail::forward_train(W, s.input, s.target, cache);
                cnn_detail::backward(W, s.target, cache, grads);
                if (first) {
                    batch_acc = grads;
                    first = false;
                } else {
                    auto add = [](ConvParams& a, const ConvParams& b) {
                        for (size_t j = 0; j < a.w.size(); ++j) a.w[j] += b.w[j];
                        for (size_t j = 0; j < a.b.size(); ++j) a.b[j] += b.b[j];
                    };
                    for (size_t j = 0; j < grads.path1.size(); ++j) add(batch_acc.path1[j], grads.path1[j]);
                    for (size_t j = 0; j < grads.path2.size(); ++j) add(batch_acc.path2[j], grads.path2[j]);
                    add(batch_acc.head, grads.head);
                }
            }
            done += batch;
            ++step;
            const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            const double inv_batch = 1.0 / static_cast<double>(batch);

            size_t flat = 0;
            auto adam_update = [&](double& p, double gval) {
                m[flat] = cfg.beta1 * m[flat] + (1.0 - cfg.beta1) * gval;
                v[flat] = cfg.beta2 * v[flat] + (1.0 - cfg.beta2) * gval * gval;
                const double mh = m[flat] / bc1;
                const double vh = v[flat] / bc2;
                p -= lr * mh / (std::sqrt(vh) + cfg.epsilon);
                ++flat;
            };
            auto update_conv = [&](ConvParams& pc, const ConvParams& gc) {
                for (size_t j = 0; j < pc.w.size(); ++j) adam_update(pc.w[j], gc.w[j] * inv_batch);
                for (size_t j = 0; j < pc.b.size(); ++j) adam_update(pc.b[j], gc.b[j] * inv_batch);
            };
            for (size_t j = 0; j < W.path1.size(); ++j) update_conv(W.path1[j], batch_acc.path1[j]);
            for (size_t j = 0; j < W.path2.size(); ++j) update_conv(W.path2[j], batch_acc.path2[j]);
            update_conv(W.head, batch_acc.head);
        }
        epoch_loss /= static_cast<double>(order.size());
        if (!std::isfinite(epoch_loss))
            throw TrainError("training diverged at epoch " + std::to_string(epoch));
        curve.push_back(epoch_loss);
    }

    W.meta.epochs = cfg.epochs;
    W.meta.seed = cfg.seed;
    W.meta.initial_loss = initial_loss;
    W.meta.final_loss = curve.empty() ? initial_loss : curve.back();
    W.meta.loss_curve = std::move(curve);
    return W;
}

/// Train one channel network from a dataset manifest (train split). Amplitude
/// pairs are presented in median units so training matches the median
/// normalization the reconstruction pipeline applies before filtering.
inline NetworkWeights train(const DatasetManifest& manifest, ChannelKind kind,
                            const NetworkSpec& spec, const TrainConfig& cfg) {
    auto records = manifest.select(kind, "train");
    if (records.empty()) records = manifest.select(kind);
    if (records.empty()) throw CountError("dataset holds no pairs of the requested kind");

    std::vector<TrainSample> samples;
    samples.reserve(records.size());
    for (const PairRecord* rec : records) {
        LoadedPair lp = load_pair(manifest, *rec);
        TrainSample s{std::move(lp.input), std::move(lp.target)};
        if (kind == ChannelKind::amplitude) {
            const double med = median_of(s.input.v);
            if (med > 0.0) {
                for (double& x : s.input.v) x /= med;
                for (double& x : s.target.v) x /= med;
            }
        }
        samples.push_back(std::move(s));
    }

    NetworkWeights W = train_on_pairs(samples, spec, cfg);
    W.meta.tile_size = manifest.tile_size;
    W.meta.dataset_hash = std::to_string(fnv1a64(manifest_to_json(manifest)));
    W.meta.params_hash = std::to_string(fnv1a64(detail_ds::params_json(manifest.params).dump()));
    return W;
}

// ---------------------------------------------------------------------------
// gradient check
// ---------------------------------------------------------------------------

struct GradCheckIssue {
    std::string where;
    double analytic = 0.0, numeric = 0.0, rel_error = 0.0;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    size_t params_checked = 0;
    bool pass = false;
    std::vector<GradCheckIssue> offenders;
};

/// Compare analytic gradients of the MSE loss against central finite
/// differences for every parameter of a given tiny network. Relative error
/// uses a floor of 1e-3 * max|grad| so negligible gradients are judged against
/// the overall gradient scale. The finite-difference oracle is only valid away
/// from ReLU/max-pool kinks: a pre-activation within `step` of zero can flag a
/// correct gradient, so checks should use data/seeds clear of that set (the
/// defaults are).
inline GradCheckReport gradient_check_on(NetworkWeights W, double tolerance, int width = 8,
                                         int height = 8, double step = 1e-3,
                                         uint64_t data_seed = 7) {
    if (W.spec.filters > 4 || width > 8 || height > 8)
        throw ParamError("gradient_check expects a tiny network (<=4 filters, <=8x8 input)");

    Rng rng(mix_seed(data_seed, fnv1a64("gradcheck-data")));
    Raster input(width, height), target(width, height);
    for (double& x : input.v) x = rng.uniform(0.2, 1.2);
    for (double& x : target.v) x = rng.uniform(0.2, 1.2);

    cnn_detail::ForwardCache cache;
    cnn_detail::Gradients grads;
    cnn_detail::forward_train(W, input, target, cache);
    cnn_detail::backward(W, target, cache, grads);

    std::vector<double> analytic;
    grads.for_each_conv([&](ConvParams& c) {
        analytic.insert(analytic.end(), c.w.begin(), c.w.end());
        analytic.insert(analytic.end(), c.b.begin(), c.b.end());
    });
    double gmax = 0.0;
    for (double g : analytic) gmax = std::max(gmax, std::abs(g));
    const double floor = std::max(1e-3 * gmax, 1e-12);

    GradCheckReport report;
    report.params_checked = analytic.size();

    size_t flat = 0;
    int conv_idx = 0;
    W.for_each_conv([&](ConvParams& c) {
        auto probe = [&](double& p, const char* what, size_t j) {
            const double saved = p;
            p = saved + step;
            const double lp = cnn_detail::forward_train(W, input, target, cache);
            p = saved - step;
            const double lm = cnn_detail::forward_train(W, input, target, cache);
            p = saved;
            const double numeric = (lp - lm) / (2.0 * step);
            const double a = analytic[flat];
            const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
            if (rel > report.max_rel_error) report.max_rel_error = rel;
            if (rel > tolerance) {
                char buf[64];
                std::snprintf(buf, sizeof(buf), "conv%d.%s[%zu]", conv_idx, what, j);
                report.offenders.push_back({buf, a, numeric, rel});
            }
            ++flat;
        };
        for (size_t j = 0; j < c.w.size(); ++j) probe(c.w[j], "w", j);
        for (size_t j = 0; j < c.b.size(); ++j) probe(c.b[j], "b", j);
        ++conv_idx;
    });
    report.pass = report.offenders.empty();
    return report;
}

inline GradCheckReport gradient_check(const NetworkSpec& spec, double tolerance, int width = 8,
                                      int height = 8, double step = 1e-3, uint64_t seed = 7) {
    return gradient_check_on(init_weights(spec, seed), tolerance, width, height, step, seed);
}

// ---------------------------------------------------------------------------
// weights file
// ---------------------------------------------------------------------------

namespace detail_wio {

inline constexpr char kMagic[4] = {'U', 'T', 'W', 'N'};
inline constexpr uint32_t kVersion = 1;

inline nlohmann::json spec_json(const NetworkSpec& s) {
    return {{"filters", s.filters},
            {"kernel", s.kernel},
            {"blocks", s.blocks},
            {"pooling", s.pooling == Pooling::max ? "max" : "average"},
            {"upsampling", s.upsampling == Upsampling::bilinear ? "bilinear" : "nearest"},
            {"input_channels", s.input_channels},
            {"output_channels", s.output_channels}};
}

inline NetworkSpec spec_from_json(const nlohmann::json& j) {
    NetworkSpec s;
    s.filters = j.at("filters").get<int>();
    s.kernel = j.at("kernel").get<int>();
    s.blocks = j.at("blocks").get<int>();
    s.pooling = j.at("pooling").get<std::string>() == "average" ? Pooling::average : Pooling::max;
    s.upsampling =
        j.at("upsampling").get<std::string>() == "nearest" ? Upsampling::nearest : Upsampling::bilinear;
    s.input_channels = j.at("input_channels").get<int>();
    s.output_channels = j.at("output_channels").get<int>();
    return s;
}

}  // namespace detail_wio

inline void save_weights(const NetworkWeights& W, const std::string& path) {
    nlohmann::json j;
    j["spec"] = detail_wio::spec_json(W.spec);
    j["meta"] = {{"epochs", W.meta.epochs},
                 {"initial_loss", W.meta.initial_loss},
                 {"final_loss", W.meta.final_loss},
                 {"seed", W.meta.seed},
                 {"tile_size", W.meta.tile_size},
                 {"dataset_hash", W.meta.dataset_hash},
                 {"params_hash", W.meta.params_hash},
                 {"loss_curve", W.meta.loss_curve}};
    const std::string header = j.dump();

    auto f = detail_io::open_file(path, "wb");
    if (std::fwrite(detail_wio::kMagic, 1, 4, f.get()) != 4) throw IoError("short write");
    detail_io::write_le<uint32_t>(f.get(), detail_wio::kVersion);
    detail_io::write_le<uint32_t>(f.get(), static_cast<uint32_t>(header.size()));
    if (std::fwrite(header.data(), 1, header.size(), f.get()) != header.size())
        throw IoError("short write");
    W.for_each_conv([&](const ConvParams& c) {
        std::vector<float> buf(c.w.size() + c.b.size());
        for (size_t i = 0; i < c.w.size(); ++i) buf[i] = static_cast<float>(c.w[i]);
        for (size_t i = 0; i < c.b.size(); ++i) buf[c.w.size() + i] = static_cast<float>(c.b[i]);
        detail_io::write_f32_block(f.get(), buf);
    });
}

inline NetworkWeights load_weights(const std::string& path) {
    auto f = detail_io::open_file(path, "rb");
    char magic[4];
    if (std::fread(magic, 1, 4, f.get()) != 4) throw IoError("truncated file: " + path);
    if (std::memcmp(magic, detail_wio::kMagic, 4) != 0) throw FormatError("bad magic in " + path);
    const uint32_t version = detail_io::read_le<uint32_t>(f.get(), path);
    if (version != detail_wio::kVersion) throw FormatError("unsupported weights version in " + path);
    const uint32_t hlen = detail_io::read_le<uint32_t>(f.get(), path);
    std::string header(hlen, '\0');
    if (std::fread(header.data(), 1, hlen, f.get()) != hlen) throw IoError("truncated file: " + path);

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad weights header in " + path + ": " + e.what());
    }
    NetworkWeights W;
    W.spec = detail_wio::spec_from_json(j.at("spec"));
    W.spec.validate();
    const auto& meta = j.at("meta");
    W.meta.epochs = meta.value("epochs", 0);
    W.meta.initial_loss = meta.value("initial_loss", 0.0);
    W.meta.final_loss = meta.value("final_loss", 0.0);
    W.meta.seed = meta.value("seed", static_cast<uint64_t>(0));
    W.meta.tile_size = meta.value("tile_size", 0);
    W.meta.dataset_hash = meta.value("dataset_hash", "");
    W.meta.params_hash = meta.value("params_hash", "");
    if (meta.contains("loss_curve")) W.meta.loss_curve = meta["loss_curve"].get<std::vector<double>>();

    W.path1.resize(W.spec.blocks);
    W.path2.resize(W.spec.blocks);
    auto read_conv = [&](ConvParams& c, int ic, int oc) {
        c.resize(ic, oc, W.spec.kernel);
        auto buf = detail_io::read_f32_block(f.get(), c.w.size() + c.b.size(), path);
        for (size_t i = 0; i < c.w.size(); ++i) c.w[i] = buf[i];
        for (size_t i = 0; i < c.b.size(); ++i) c.b[i] = buf[c.w.size() + i];
    };
    for (int i = 0; i < W.spec.blocks; ++i)
        read_conv(W.path1[i], i == 0 ? W.spec.input_channels : W.spec.filters, W.spec.filters);
    for (int i = 0; i < W.spec.blocks; ++i)
        read_conv(W.path2[i], i == 0 ? W.spec.input_channels : W.spec.filters, W.spec.filters);
    read_conv(W.head, 2 * W.spec.filters, W.spec.output_channels);
    if (!W.all_finite()) throw FormatError("weights file holds non-finite values: " + path);
    return W;
}

}  // namespace utir
