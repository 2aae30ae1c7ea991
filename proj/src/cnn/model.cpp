/*
 * SPDX-FileCopyrightText: Copyright 2026 The houndkit authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "houndkit/cnn/model.hpp"

#include "houndkit/error.hpp"
#include "houndkit/trace.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace houndkit::cnn {

std::string shape_string(const std::vector<std::size_t> &shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i)
        os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

void ModelConfig::validate() const {
    if (input_len < 2)
        throw ConfigError("model: input_len must be at least 2");
    if (conv_kernel < 1)
        throw ConfigError("model: conv_kernel must be at least 1");
    if (conv_stride != 1)
        throw ConfigError("model: only conv_stride 1 is supported");
    if (stem_channels == 0 || res1_channels == 0 || res2_channels == 0 || fc_hidden == 0)
        throw ConfigError("model: channel counts must be positive");
    if (n_classes != kNumClasses)
        throw ConfigError("model: n_classes must be 3");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0))
        throw ConfigError("model: dropout_p must lie in [0, 1)");
}

namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T> using MapC = Eigen::Map<const Mat<T>>;
template <typename T> using MapM = Eigen::Map<Mat<T>>;

double canonical(Rng &rng) { return double(rng() >> 11) * 0x1.0p-53; }

struct ConvBnSpec {
    std::string prefix; // "<block>.conv" -> "<block>.bn"
    std::string conv, bn;
    std::size_t c_in, c_out, kernel;
};

std::vector<ConvBnSpec> conv_specs(const ModelConfig &c) {
    const std::size_t k = c.conv_kernel;
    return {
        {"stem", "stem.conv", "stem.bn", 1, c.stem_channels, k},
        {"res1", "res1.conv1", "res1.bn1", c.stem_channels, c.res1_channels, k},
        {"res1", "res1.conv2", "res1.bn2", c.res1_channels, c.res1_channels, k},
        {"res2", "res2.conv1", "res2.bn1", c.res1_channels, c.res2_channels, k},
        {"res2", "res2.conv2", "res2.bn2", c.res2_channels, c.res2_channels, k},
        {"res2", "res2.proj", "res2.proj_bn", c.res1_channels, c.res2_channels, 1},
    };
}

// Parameter / buffer indices in construction order.
struct Layout {
    struct ConvBn {
        std::size_t w, gamma, beta, mean, var, c_in, c_out, kernel;
    };
    ConvBn stem, r1a, r1b, r2a, r2b, proj;
    std::size_t fc1_w, fc1_b, fc2_w, fc2_b;
};

Layout make_layout(const ModelConfig &c) {
    auto specs = conv_specs(c);
    Layout::ConvBn cb[6];
    for (std::size_t i = 0; i < 6; ++i)
        cb[i] = {3 * i, 3 * i + 1, 3 * i + 2, 2 * i, 2 * i + 1,
                 specs[i].c_in, specs[i].c_out, specs[i].kernel};
    return {cb[0], cb[1], cb[2], cb[3], cb[4], cb[5], 18, 19, 20, 21};
}

// ---- conv via im2col ----

// Per-thread scratch that only ever grows.
template <typename T> T *scratch(std::size_t slot, std::size_t count) {
    thread_local std::vector<T> bufs[2];
    auto &b = bufs[slot];
    if (b.size() < count)
        b.resize(count);
    return b.data();
}

template <typename T>
void im2col(const T *in, std::size_t c_in, std::size_t batch, std::size_t n,
            std::size_t kernel, T *col) {
    const std::size_t m = batch * n;
    const std::ptrdiff_t pad_left = std::ptrdiff_t(kernel - 1) / 2;
    const std::ptrdiff_t len = std::ptrdiff_t(n);
    for (std::size_t ci = 0; ci < c_in; ++ci)
        for (std::size_t j = 0; j < kernel; ++j) {
            const std::ptrdiff_t shift = std::ptrdiff_t(j) - pad_left;
            const std::ptrdiff_t lo = std::clamp<std::ptrdiff_t>(-shift, 0, len);
            const std::ptrdiff_t hi = std::clamp<std::ptrdiff_t>(len - shift, 0, len);
            T *dst_row = col + (ci * kernel + j) * m;
            for (std::size_t b = 0; b < batch; ++b) {
                const T *src = in + ci * m + b * n;
                T *dst = dst_row + b * n;
                std::fill(dst, dst + lo, T(0));
                if (hi > lo)
                    std::copy(src + lo + shift, src + hi + shift, dst + lo);
                std::fill(dst + std::max(hi, lo), dst + len, T(0));
            }
        }
}

template <typename T>
void col2im_add(const T *dcol, std::size_t c_in, std::size_t batch,
                std::size_t n, std::size_t kernel, T *d_in) {
    const std::size_t m = batch * n;
    const std::ptrdiff_t pad_left = std::ptrdiff_t(kernel - 1) / 2;
    const std::ptrdiff_t len = std::ptrdiff_t(n);
    for (std::size_t ci = 0; ci < c_in; ++ci)
        for (std::size_t j = 0; j < kernel; ++j) {
            const std::ptrdiff_t shift = std::ptrdiff_t(j) - pad_left;
            const std::ptrdiff_t lo = std::clamp<std::ptrdiff_t>(-shift, 0, len);
            const std::ptrdiff_t hi = std::clamp<std::ptrdiff_t>(len - shift, 0, len);
            const T *src_row = dcol + (ci * kernel + j) * m;
            for (std::size_t b = 0; b < batch; ++b) {
                const T *src = src_row + b * n;
                T *dst = d_in + ci * m + b * n;
                for (std::ptrdiff_t t = lo; t < hi; ++t)
                    dst[t + shift] += src[t];
            }
        }
}

template <typename T>
void conv_fwd(const T *w, std::size_t c_in, std::size_t c_out, std::size_t kernel,
              const Mat<T> &in, std::size_t batch, std::size_t n, Mat<T> &out) {
    MapC<T> wm(w, Eigen::Index(c_out), Eigen::Index(c_in * kernel));
    if (kernel == 1) {
        out.noalias() = wm * in;
        return;
    }
    const auto rows = Eigen::Index(c_in * kernel), cols = Eigen::Index(batch * n);
    T *colp = scratch<T>(0, std::size_t(rows * cols));
    im2col(in.data(), c_in, batch, n, kernel, colp);
    out.noalias() = wm * MapC<T>(colp, rows, cols);
}

// d_in is overwritten unless null.
template <typename T>
void conv_bwd(const T *w, std::size_t c_in, std::size_t c_out, std::size_t kernel,
              const Mat<T> &in, std::size_t batch, std::size_t n, const Mat<T> &d_out,
              T *d_w, Mat<T> *d_in) {
    MapC<T> wm(w, Eigen::Index(c_out), Eigen::Index(c_in * kernel));
    MapM<T> dwm(d_w, Eigen::Index(c_out), Eigen::Index(c_in * kernel));
    if (kernel == 1) {
        dwm.noalias() = d_out * in.transpose();
        if (d_in)
            d_in->noalias() = wm.transpose() * d_out;
        return;
    }
    const auto rows = Eigen::Index(c_in * kernel), cols = Eigen::Index(batch * n);
    T *colp = scratch<T>(0, std::size_t(rows * cols));
    im2col(in.data(), c_in, batch, n, kernel, colp);
    dwm.noalias() = d_out * MapC<T>(colp, rows, cols).transpose();
    if (d_in) {
        T *dcolp = scratch<T>(1, std::size_t(rows * cols));
        MapM<T> dcol(dcolp, rows, cols);
        dcol.noalias() = wm.transpose() * d_out;
        d_in->setZero(Eigen::Index(c_in), cols);
        col2im_add(dcolp, c_in, batch, n, kernel, d_in->data());
    }
}

// ---- batch norm ----

template <typename T> struct BnCache {
    Mat<T> xhat;
    std::vector<T> inv_std;
};

template <typename T> struct BnStats {
    std::vector<T> mean, var; // biased batch statistics
};

template <typename T>
void bn_train(const T *gamma, const T *beta, const Mat<T> &z, BnCache<T> *cache,
              BnStats<T> &stats, Mat<T> &y) {
    const Eigen::Index c = z.rows(), m = z.cols();
    y.resize(c, m);
    stats.mean.assign(std::size_t(c), T(0));
    stats.var.assign(std::size_t(c), T(0));
    if (cache) {
        cache->xhat.resize(c, m);
        cache->inv_std.assign(std::size_t(c), T(0));
    }
    for (Eigen::Index ch = 0; ch < c; ++ch) {
        const T mean = z.row(ch).mean();
        const T var = (z.row(ch).array() - mean).square().mean();
        const T inv = T(1) / std::sqrt(var + T(kBatchNormEps));
        stats.mean[std::size_t(ch)] = mean;
        stats.var[std::size_t(ch)] = var;
        if (cache) {
            cache->xhat.row(ch) = (z.row(ch).array() - mean) * inv;
            cache->inv_std[std::size_t(ch)] = inv;
            y.row(ch) = cache->xhat.row(ch).array() * gamma[ch] + beta[ch];
        } else {
            y.row(ch) = (z.row(ch).array() - mean) * (inv * gamma[ch]) + beta[ch];
        }
    }
}

template <typename T>
void bn_eval(const T *gamma, const T *beta, const T *mean, const T *var,
             const Mat<T> &z, Mat<T> &y) {
    const Eigen::Index c = z.rows();
    y.resize(c, z.cols());
    for (Eigen::Index ch = 0; ch < c; ++ch) {
        const T scale = gamma[ch] / std::sqrt(var[ch] + T(kBatchNormEps));
        y.row(ch) = (z.row(ch).array() - mean[ch]) * scale + beta[ch];
    }
}

template <typename T>
void bn_bwd(const T *gamma, const BnCache<T> &cache, const Mat<T> &dy, T *d_gamma,
            T *d_beta, Mat<T> &dx) {
    const Eigen::Index c = dy.rows(), m = dy.cols();
    dx.resize(c, m);
    const T inv_m = T(1) / T(m);
    for (Eigen::Index ch = 0; ch < c; ++ch) {
        const T dg = (dy.row(ch).array() * cache.xhat.row(ch).array()).sum();
        const T db = dy.row(ch).sum();
        d_gamma[ch] = dg;
        d_beta[ch] = db;
        const T k = gamma[ch] * cache.inv_std[std::size_t(ch)] * inv_m;
        dx.row(ch) = k * (T(m) * dy.row(ch).array() - db - cache.xhat.row(ch).array() * dg);
    }
}

template <typename T> void relu_inplace(Mat<T> &x) { x = x.cwiseMax(T(0)); }

// Zero the gradient where the (post-ReLU) activation is not positive.
template <typename T> void relu_mask(const Mat<T> &act, Mat<T> &d) {
    d = (act.array() > T(0)).select(d, T(0));
}

// ---- whole network ----

template <typename T> struct Cache {
    Mat<T> x0, a0, h1, a1, h3, a2;
    BnCache<T> bn[6];
    Mat<T> g, u, h, d;
    std::vector<T> mask; // fc_hidden * batch, scaled keep mask
};

struct RunOpts {
    Mode mode = Mode::Eval;
    Rng *rng = nullptr;
};

template <typename T> struct RunOut {
    Mat<T> logits; // classes x batch
    std::vector<T> probs; // batch x classes
    std::vector<BnStats<T>> stats; // train mode, one per conv block
    Activations<T> *acts = nullptr;
};

template <typename T>
const T *pdata(const BasicModel<T> &m, std::size_t i) {
    return m.parameters()[i].value.data.data();
}
template <typename T>
const T *bdata(const BasicModel<T> &m, std::size_t i) {
    return m.buffers()[i].value.data.data();
}

template <typename T>
void softmax_cols(const Mat<T> &logits, std::vector<T> &probs) {
    const Eigen::Index k = logits.rows(), b = logits.cols();
    probs.assign(std::size_t(k * b), T(0));
    for (Eigen::Index j = 0; j < b; ++j) {
        const T mx = logits.col(j).maxCoeff();
        T sum = 0;
        for (Eigen::Index i = 0; i < k; ++i) {
            const T e = std::exp(logits(i, j) - mx);
            probs[std::size_t(j * k + i)] = e;
            sum += e;
        }
        for (Eigen::Index i = 0; i < k; ++i)
            probs[std::size_t(j * k + i)] /= sum;
    }
}

template <typename T>
void run(const BasicModel<T> &model, std::span<const T> inputs, std::size_t batch,
         const RunOpts &opts, Cache<T> *cache, RunOut<T> &out) {
    const ModelConfig &cfg = model.config();
    const std::size_t n = cfg.input_len;
    if (batch == 0)
        throw ShapeError("stem.conv: empty batch");
    if (inputs.size() != batch * n)
        throw ShapeError("stem.conv: expected " + std::to_string(batch) + " x " +
                         std::to_string(n) + " input samples, got " +
                         std::to_string(inputs.size()));
    if (opts.mode == Mode::Train && cfg.dropout_p > 0.0 && !opts.rng)
        throw ArgumentError("forward: train mode with dropout needs an rng");
    const Layout lay = make_layout(cfg);
    const bool train = opts.mode == Mode::Train;
    if (train)
        out.stats.assign(6, {});

    std::size_t bn_slot = 0;
    auto conv_bn = [&](const Layout::ConvBn &l, const Mat<T> &in, Mat<T> &y) {
        Mat<T> z;
        conv_fwd(pdata(model, l.w), l.c_in, l.c_out, l.kernel, in, batch, n, z);
        if (train)
            bn_train(pdata(model, l.gamma), pdata(model, l.beta), z,
                     cache ? &cache->bn[bn_slot] : nullptr, out.stats[bn_slot], y);
        else
            bn_eval(pdata(model, l.gamma), pdata(model, l.beta),
                    bdata(model, l.mean), bdata(model, l.var), z, y);
        ++bn_slot;
    };

    Cache<T> local;
    Cache<T> &c = cache ? *cache : local;
    c.x0 = MapC<T>(inputs.data(), 1, Eigen::Index(batch * n));

    conv_bn(lay.stem, c.x0, c.a0);
    relu_inplace(c.a0);

    Mat<T> tmp;
    conv_bn(lay.r1a, c.a0, c.h1);
    relu_inplace(c.h1);
    conv_bn(lay.r1b, c.h1, tmp);
    c.a1 = tmp + c.a0;
    relu_inplace(c.a1);

    conv_bn(lay.r2a, c.a1, c.h3);
    relu_inplace(c.h3);
    conv_bn(lay.r2b, c.h3, c.a2);
    conv_bn(lay.proj, c.a1, tmp);
    c.a2 += tmp;
    relu_inplace(c.a2);

    // global average pooling -> channels x batch
    const Eigen::Index ch2 = c.a2.rows();
    c.g.resize(ch2, Eigen::Index(batch));
    for (Eigen::Index r = 0; r < ch2; ++r)
        for (std::size_t b = 0; b < batch; ++b)
            c.g(r, Eigen::Index(b)) =
                c.a2.row(r).segment(Eigen::Index(b * n), Eigen::Index(n)).mean();

    MapC<T> w1(pdata(model, lay.fc1_w), Eigen::Index(cfg.fc_hidden), ch2);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b1(pdata(model, lay.fc1_b),
                                                             Eigen::Index(cfg.fc_hidden));
    c.u.noalias() = w1 * c.g;
    c.u.colwise() += b1;
    c.h = c.u.cwiseMax(T(0));
    c.d = c.h;
    if (train && cfg.dropout_p > 0.0) {
        const T keep_scale = T(1) / T(1.0 - cfg.dropout_p);
        c.mask.assign(std::size_t(c.h.size()), T(0));
        // column-major draw order: sample by sample
        for (Eigen::Index j = 0; j < c.h.cols(); ++j)
            for (Eigen::Index i = 0; i < c.h.rows(); ++i) {
                const T mk = canonical(*opts.rng) >= cfg.dropout_p ? keep_scale : T(0);
                c.mask[std::size_t(i * c.h.cols() + j)] = mk;
                c.d(i, j) *= mk;
            }
    } else {
        c.mask.assign(std::size_t(c.h.size()), T(1));
    }

    MapC<T> w2(pdata(model, lay.fc2_w), Eigen::Index(kNumClasses),
               Eigen::Index(cfg.fc_hidden));
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b2(pdata(model, lay.fc2_b),
                                                             Eigen::Index(kNumClasses));
    out.logits.noalias() = w2 * c.d;
    out.logits.colwise() += b2;
    softmax_cols(out.logits, out.probs);

    if (out.acts) {
        auto flat = [](const Mat<T> &m) {
            return std::vector<T>(m.data(), m.data() + m.size());
        };
        auto transposed = [](const Mat<T> &m) {
            Mat<T> t = m.transpose();
            return std::vector<T>(t.data(), t.data() + t.size());
        };
        out.acts->stem = flat(c.a0);
        out.acts->res1 = flat(c.a1);
        out.acts->res2 = flat(c.a2);
        out.acts->pooled = transposed(c.g);
        out.acts->hidden = transposed(c.h);
        out.acts->logits = transposed(out.logits);
    }
}

template <typename T>
void apply_running_stats(BasicModel<T> &model, const std::vector<BnStats<T>> &stats,
                         std::size_t count) {
    const Layout lay = make_layout(model.config());
    const Layout::ConvBn *blocks[6] = {&lay.stem, &lay.r1a, &lay.r1b,
                                       &lay.r2a, &lay.r2b, &lay.proj};
    const T mom = T(kBatchNormMomentum);
    const T unbias = count > 1 ? T(count) / T(count - 1) : T(1);
    for (std::size_t i = 0; i < 6; ++i) {
        auto &rm = model.buffers()[blocks[i]->mean].value.data;
        auto &rv = model.buffers()[blocks[i]->var].value.data;
        for (std::size_t ch = 0; ch < rm.size(); ++ch) {
            rm[ch] = (T(1) - mom) * rm[ch] + mom * stats[i].mean[ch];
            rv[ch] = (T(1) - mom) * rv[ch] + mom * stats[i].var[ch] * unbias;
        }
    }
}

template <typename T> Probabilities<T> to_probs(std::vector<T> &&values, std::size_t b) {
    Probabilities<T> p;
    p.batch = b;
    p.values = std::move(values);
    return p;
}

} // namespace

// ---- model ----

template <typename T>
BasicModel<T>::BasicModel(const ModelConfig &config, std::uint64_t init_seed)
    : config_(config) {
    config_.validate();
    Rng rng(init_seed);
    auto uniform_tensor = [&](std::vector<std::size_t> shape, std::size_t fan_in) {
        BasicTensor<T> t(std::move(shape));
        const double bound = 1.0 / std::sqrt(double(fan_in));
        for (auto &v : t.data)
            v = T((2.0 * canonical(rng) - 1.0) * bound);
        return t;
    };
    auto filled = [](std::size_t len, T value) {
        BasicTensor<T> t({len});
        std::fill(t.data.begin(), t.data.end(), value);
        return t;
    };
    for (const auto &s : conv_specs(config_)) {
        params_.push_back({s.conv + ".weight",
                           uniform_tensor({s.c_out, s.c_in, s.kernel}, s.c_in * s.kernel)});
        params_.push_back({s.bn + ".gamma", filled(s.c_out, T(1))});
        params_.push_back({s.bn + ".beta", filled(s.c_out, T(0))});
        buffers_.push_back({s.bn + ".running_mean", filled(s.c_out, T(0))});
        buffers_.push_back({s.bn + ".running_var", filled(s.c_out, T(1))});
    }
    params_.push_back({"fc1.weight", uniform_tensor({config_.fc_hidden, config_.res2_channels},
                                                    config_.res2_channels)});
    params_.push_back({"fc1.bias", filled(config_.fc_hidden, T(0))});
    params_.push_back({"fc2.weight",
                       uniform_tensor({kNumClasses, config_.fc_hidden}, config_.fc_hidden)});
    params_.push_back({"fc2.bias", filled(kNumClasses, T(0))});
}

template <typename T>
std::size_t BasicModel<T>::param_index(const std::string &name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (params_[i].name == name)
            return i;
    throw ArgumentError("model: no parameter named '" + name + "'");
}

template <typename T>
std::size_t BasicModel<T>::buffer_index(const std::string &name) const {
    for (std::size_t i = 0; i < buffers_.size(); ++i)
        if (buffers_[i].name == name)
            return i;
    throw ArgumentError("model: no buffer named '" + name + "'");
}

template <typename T>
template <typename U>
BasicModel<U> BasicModel<T>::cast() const {
    BasicModel<U> m;
    m.config_ = config_;
    auto conv = [](const std::vector<NamedTensor<T>> &src, std::vector<NamedTensor<U>> &dst) {
        for (const auto &nt : src) {
            BasicTensor<U> t(nt.value.shape);
            std::transform(nt.value.data.begin(), nt.value.data.end(), t.data.begin(),
                           [](T v) { return U(v); });
            dst.push_back({nt.name, std::move(t)});
        }
    };
    conv(params_, m.params_);
    conv(buffers_, m.buffers_);
    return m;
}

template <typename T>
Probabilities<T> forward(BasicModel<T> &model, std::span<const T> inputs,
                         std::size_t batch, Mode mode, Rng *rng) {
    RunOut<T> out;
    run(model, inputs, batch, RunOpts{mode, rng}, static_cast<Cache<T> *>(nullptr), out);
    if (mode == Mode::Train)
        apply_running_stats(model, out.stats, batch * model.config().input_len);
    return to_probs(std::move(out.probs), batch);
}

template <typename T>
Probabilities<T> predict_proba(const BasicModel<T> &model, std::span<const T> inputs,
                               std::size_t batch) {
    RunOut<T> out;
    run(model, inputs, batch, RunOpts{}, static_cast<Cache<T> *>(nullptr), out);
    return to_probs(std::move(out.probs), batch);
}

template <typename T>
Activations<T> eval_activations(const BasicModel<T> &model, std::span<const T> inputs,
                                std::size_t batch) {
    Activations<T> acts;
    RunOut<T> out;
    out.acts = &acts;
    run(model, inputs, batch, RunOpts{}, static_cast<Cache<T> *>(nullptr), out);
    return acts;
}

template <typename T>
LossAndGrad<T> loss_and_grad(BasicModel<T> &model, std::span<const T> inputs,
                             std::span<const std::uint8_t> labels, Rng &rng,
                             bool update_running_stats) {
    const ModelConfig &cfg = model.config();
    const std::size_t batch = labels.size();
    for (auto l : labels)
        if (l >= kNumClasses)
            throw ArgumentError("loss: label " + std::to_string(int(l)) +
                                " outside {0,1,2}");
    const std::size_t n = cfg.input_len;
    Cache<T> c;
    RunOut<T> out;
    run(model, inputs, batch, RunOpts{Mode::Train, &rng}, &c, out);

    LossAndGrad<T> res;
    const Layout lay = make_layout(cfg);
    const auto &params = model.parameters();
    res.grads.reserve(params.size());
    for (const auto &p : params)
        res.grads.emplace_back(p.value.shape);
    auto gdata = [&](std::size_t i) { return res.grads[i].data.data(); };

    // cross-entropy and dlogits (classes x batch)
    const Eigen::Index k = Eigen::Index(kNumClasses), bsz = Eigen::Index(batch);
    Mat<T> dlogits(k, bsz);
    T loss = 0;
    for (Eigen::Index j = 0; j < bsz; ++j) {
        const auto col = out.logits.col(j);
        const T mx = col.maxCoeff();
        const T lse = mx + std::log((col.array() - mx).exp().sum());
        const auto lbl = Eigen::Index(labels[std::size_t(j)]);
        loss += lse - col(lbl);
        for (Eigen::Index i = 0; i < k; ++i)
            dlogits(i, j) = (out.probs[std::size_t(j * k + i)] - (i == lbl ? T(1) : T(0))) /
                            T(batch);
    }
    res.loss = loss / T(batch);

    const Eigen::Index hid = Eigen::Index(cfg.fc_hidden);
    const Eigen::Index ch2 = c.g.rows();
    MapM<T>(gdata(lay.fc2_w), k, hid).noalias() = dlogits * c.d.transpose();
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(gdata(lay.fc2_b), k) =
        dlogits.rowwise().sum();
    MapC<T> w2(pdata(model, lay.fc2_w), k, hid);
    Mat<T> dh = w2.transpose() * dlogits;
    for (Eigen::Index i = 0; i < hid; ++i)
        for (Eigen::Index j = 0; j < bsz; ++j)
            dh(i, j) *= c.mask[std::size_t(i * bsz + j)] * (c.u(i, j) > T(0) ? T(1) : T(0));
    MapM<T>(gdata(lay.fc1_w), hid, ch2).noalias() = dh * c.g.transpose();
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(gdata(lay.fc1_b), hid) =
        dh.rowwise().sum();
    MapC<T> w1(pdata(model, lay.fc1_w), hid, ch2);
    Mat<T> dg = w1.transpose() * dh;

    // un-pool
    Mat<T> d(ch2, Eigen::Index(batch * n));
    for (Eigen::Index r = 0; r < ch2; ++r)
        for (std::size_t b = 0; b < batch; ++b)
            d.row(r).segment(Eigen::Index(b * n), Eigen::Index(n)).setConstant(
                dg(r, Eigen::Index(b)) / T(n));
    relu_mask(c.a2, d);

    auto conv_bn_bwd = [&](const Layout::ConvBn &l, std::size_t slot, const Mat<T> &in,
                           const Mat<T> &dy, Mat<T> *d_in) {
        Mat<T> dz;
        bn_bwd(pdata(model, l.gamma), c.bn[slot], dy, gdata(l.gamma), gdata(l.beta), dz);
        conv_bwd(pdata(model, l.w), l.c_in, l.c_out, l.kernel, in, batch, n, dz,
                 gdata(l.w), d_in);
    };

    // res2
    Mat<T> d_a1, d_tmp, d_h3;
    conv_bn_bwd(lay.proj, 5, c.a1, d, &d_a1);
    conv_bn_bwd(lay.r2b, 4, c.h3, d, &d_h3);
    relu_mask(c.h3, d_h3);
    conv_bn_bwd(lay.r2a, 3, c.a1, d_h3, &d_tmp);
    d_a1 += d_tmp;
    relu_mask(c.a1, d_a1);

    // res1
    Mat<T> d_h1, d_a0;
    conv_bn_bwd(lay.r1b, 2, c.h1, d_a1, &d_h1);
    relu_mask(c.h1, d_h1);
    conv_bn_bwd(lay.r1a, 1, c.a0, d_h1, &d_a0);
    d_a0 += d_a1;
    relu_mask(c.a0, d_a0);

    // stem
    conv_bn_bwd(lay.stem, 0, c.x0, d_a0, nullptr);

    if (update_running_stats)
        apply_running_stats(model, out.stats, batch * n);
    res.probs = to_probs(std::move(out.probs), batch);
    return res;
}

template <typename T> std::size_t argmax_row(std::span<const T> row) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < row.size(); ++i)
        if (row[i] > row[best])
            best = i;
    return best;
}

std::vector<std::uint8_t> argmax_classes(const Probabilities<float> &probs) {
    std::vector<std::uint8_t> out(probs.batch);
    for (std::size_t r = 0; r < probs.batch; ++r)
        out[r] = std::uint8_t(argmax_row(probs.row(r)));
    return out;
}

Prediction predict_batch(const Model &model, std::span<const std::vector<float>> windows) {
    constexpr std::size_t kChunk = 16;
    const std::size_t n = model.config().input_len;
    Prediction pred;
    pred.probs.batch = windows.size();
    pred.probs.values.reserve(windows.size() * kNumClasses);
    std::vector<float> buf;
    for (std::size_t first = 0; first < windows.size(); first += kChunk) {
        const std::size_t count = std::min(kChunk, windows.size() - first);
        buf.assign(count * n, 0.0f);
        for (std::size_t i = 0; i < count; ++i) {
            const auto &w = windows[first + i];
            if (w.size() != n)
                throw ShapeError("stem.conv: window " + std::to_string(first + i) +
                                 " has " + std::to_string(w.size()) + " samples, expected " +
                                 std::to_string(n));
            standardize_into(w, std::span<float>(buf).subspan(i * n, n));
        }
        auto p = predict_proba<float>(model, buf, count);
        pred.probs.values.insert(pred.probs.values.end(), p.values.begin(), p.values.end());
    }
    pred.classes = argmax_classes(pred.probs);
    return pred;
}

namespace layers {

template <typename T>
void conv1d_forward(std::span<const T> weight, std::size_t c_in, std::size_t c_out,
                    std::size_t kernel, std::span<const T> in, std::size_t batch,
                    std::size_t length, std::vector<T> &out) {
    if (weight.size() != c_out * c_in * kernel || in.size() != c_in * batch * length)
        throw ShapeError("conv1d: shape mismatch");
    Mat<T> x = MapC<T>(in.data(), Eigen::Index(c_in), Eigen::Index(batch * length));
    Mat<T> y;
    conv_fwd(weight.data(), c_in, c_out, kernel, x, batch, length, y);
    out.assign(y.data(), y.data() + y.size());
}

template <typename T>
void conv1d_backward(std::span<const T> weight, std::size_t c_in, std::size_t c_out,
                     std::size_t kernel, std::span<const T> in, std::size_t batch,
                     std::size_t length, std::span<const T> d_out, std::vector<T> &d_weight,
                     std::vector<T> &d_in) {
    if (weight.size() != c_out * c_in * kernel || in.size() != c_in * batch * length ||
        d_out.size() != c_out * batch * length)
        throw ShapeError("conv1d: shape mismatch");
    Mat<T> x = MapC<T>(in.data(), Eigen::Index(c_in), Eigen::Index(batch * length));
    Mat<T> dy = MapC<T>(d_out.data(), Eigen::Index(c_out), Eigen::Index(batch * length));
    d_weight.assign(weight.size(), T(0));
    Mat<T> dx;
    conv_bwd(weight.data(), c_in, c_out, kernel, x, batch, length, dy, d_weight.data(), &dx);
    d_in.assign(dx.data(), dx.data() + dx.size());
}

template <typename T>
void batchnorm_forward_train(std::span<const T> gamma, std::span<const T> beta,
                             std::span<const T> in, std::size_t channels, std::size_t count,
                             std::vector<T> &out) {
    if (gamma.size() != channels || beta.size() != channels || in.size() != channels * count)
        throw ShapeError("batchnorm: shape mismatch");
    Mat<T> x = MapC<T>(in.data(), Eigen::Index(channels), Eigen::Index(count));
    Mat<T> y;
    BnStats<T> stats;
    bn_train(gamma.data(), beta.data(), x, static_cast<BnCache<T> *>(nullptr), stats, y);
    out.assign(y.data(), y.data() + y.size());
}

template <typename T>
void batchnorm_backward(std::span<const T> gamma, std::span<const T> in,
                        std::size_t channels, std::size_t count, std::span<const T> d_out,
                        std::vector<T> &d_gamma, std::vector<T> &d_beta,
                        std::vector<T> &d_in) {
    if (gamma.size() != channels || in.size() != channels * count ||
        d_out.size() != channels * count)
        throw ShapeError("batchnorm: shape mismatch");
    Mat<T> x = MapC<T>(in.data(), Eigen::Index(channels), Eigen::Index(count));
    Mat<T> dy = MapC<T>(d_out.data(), Eigen::Index(channels), Eigen::Index(count));
    std::vector<T> zeros(channels, T(0));
    BnCache<T> cache;
    BnStats<T> stats;
    Mat<T> y;
    bn_train(gamma.data(), zeros.data(), x, &cache, stats, y);
    d_gamma.assign(channels, T(0));
    d_beta.assign(channels, T(0));
    Mat<T> dx;
    bn_bwd(gamma.data(), cache, dy, d_gamma.data(), d_beta.data(), dx);
    d_in.assign(dx.data(), dx.data() + dx.size());
}

} // namespace layers

#define HOUNDKIT_INSTANTIATE(T)                                                          \
    template class BasicModel<T>;                                                        \
    template Probabilities<T> forward<T>(BasicModel<T> &, std::span<const T>,            \
                                         std::size_t, Mode, Rng *);                      \
    template Probabilities<T> predict_proba<T>(const BasicModel<T> &, std::span<const T>, \
                                               std::size_t);                             \
    template Activations<T> eval_activations<T>(const BasicModel<T> &,                    \
                                                std::span<const T>, std::size_t);        \
    template LossAndGrad<T> loss_and_grad<T>(BasicModel<T> &, std::span<const T>,         \
                                             std::span<const std::uint8_t>, Rng &, bool); \
    template std::size_t argmax_row<T>(std::span<const T>);                              \
    template void layers::conv1d_forward<T>(std::span<const T>, std::size_t, std::size_t, \
                                            std::size_t, std::span<const T>, std::size_t, \
                                            std::size_t, std::vector<T> &);              \
    template void layers::conv1d_backward<T>(                                            \
        std::span<const T>, std::size_t, std::size_t, std::size_t, std::span<const T>,   \
        std::size_t, std::size_t, std::span<const T>, std::vector<T> &, std::vector<T> &); \
    template void layers::batchnorm_forward_train<T>(std::span<const T>,                  \
                                                     std::span<const T>,                 \
                                                     std::span<const T>, std::size_t,    \
                                                     std::size_t, std::vector<T> &);     \
    template void layers::batchnorm_backward<T>(std::span<const T>, std::span<const T>,   \
                                                std::size_t, std::size_t,                \
                                                std::span<const T>, std::vector<T> &,    \
                                                std::vector<T> &, std::vector<T> &);

HOUNDKIT_INSTANTIATE(float)
HOUNDKIT_INSTANTIATE(double)
#undef HOUNDKIT_INSTANTIATE

template BasicModel<double> BasicModel<float>::cast<double>() const;
template BasicModel<float> BasicModel<double>::cast<float>() const;
template BasicModel<float> BasicModel<float>::cast<float>() const;

} // namespace houndkit::cnn
