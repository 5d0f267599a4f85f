// Copyright (C) 2026 The UMST Authors
// SPDX-License-Identifier: Apache-2.0

#include "umst/nn_ops.hpp"

#include "umst/common.hpp"
#include "umst/rng.hpp"

#include <cmath>
#include <string>

namespace umst {

SeqBatch attention(const SeqBatch& q, const SeqBatch& k, const SeqBatch& v)
{
    if (q.size() != k.size() || q.size() != v.size()) {
        throw NumericalError("attention: batch sizes disagree");
    }
    SeqBatch out;
    out.reserve(q.size());
    for (std::size_t bi = 0; bi < q.size(); ++bi) {
        const Eigen::MatrixXd& qi = q[bi];
        const Eigen::MatrixXd& ki = k[bi];
        const Eigen::MatrixXd& vi = v[bi];
        if (qi.cols() != ki.cols() || qi.rows() != ki.rows() || ki.rows() != vi.rows()) {
            throw NumericalError("attention: shape mismatch in batch item " +
                                 std::to_string(bi));
        }
        const double scale = 1.0 / std::sqrt(static_cast<double>(qi.cols()));
        Eigen::MatrixXd logits = scale * (qi * ki.transpose()); // N x N
        Eigen::MatrixXd weights(logits.rows(), logits.cols());
        for (Eigen::Index r = 0; r < logits.rows(); ++r) {
            if (!logits.row(r).allFinite()) {
                throw NumericalError("attention: non-finite logits in row " +
                                     std::to_string(r));
            }
            const double m = logits.row(r).maxCoeff();
            Eigen::ArrayXd e = (logits.row(r).array() - m).exp();
            weights.row(r) = (e / e.sum()).matrix().transpose();
        }
        out.push_back(weights * vi);
    }
    return out;
}

MhaParams MhaParams::identity(int embed_dim)
{
    MhaParams p;
    p.heads = 1;
    p.wq = {Eigen::MatrixXd::Identity(embed_dim, embed_dim)};
    p.wk = {Eigen::MatrixXd::Identity(embed_dim, embed_dim)};
    p.wv = {Eigen::MatrixXd::Identity(embed_dim, embed_dim)};
    p.wo = Eigen::MatrixXd::Identity(embed_dim, embed_dim);
    return p;
}

MhaParams MhaParams::random(int embed_dim, int heads, std::uint64_t seed)
{
    if (heads < 1 || embed_dim % heads != 0) {
        throw ManifestError("head count must divide the embedding width");
    }
    Rng rng(derive_seed(seed, "mha.init", 0));
    const int head_dim = embed_dim / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(embed_dim));
    const auto fill = [&](int rows, int cols) {
        Eigen::MatrixXd m(rows, cols);
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                m(r, c) = scale * rng.normal();
            }
        }
        return m;
    };
    MhaParams p;
    p.heads = heads;
    for (int h = 0; h < heads; ++h) {
        p.wq.push_back(fill(embed_dim, head_dim));
        p.wk.push_back(fill(embed_dim, head_dim));
        p.wv.push_back(fill(embed_dim, head_dim));
    }
    p.wo = fill(embed_dim, embed_dim);
    return p;
}

SeqBatch multi_head_attention(const SeqBatch& q, const SeqBatch& k, const SeqBatch& v,
                              const MhaParams& params)
{
    const int heads = params.heads;
    if (heads < 1 || static_cast<int>(params.wq.size()) != heads ||
        static_cast<int>(params.wk.size()) != heads ||
        static_cast<int>(params.wv.size()) != heads) {
        throw ManifestError("multi-head attention: malformed projections");
    }
    if (!q.empty() && q[0].cols() % heads != 0) {
        throw ManifestError("head count must divide the embedding width");
    }
    SeqBatch out;
    out.reserve(q.size());
    for (std::size_t bi = 0; bi < q.size(); ++bi) {
        const Eigen::Index n = q[bi].rows();
        const Eigen::Index embed = q[bi].cols();
        Eigen::MatrixXd concat(n, embed);
        Eigen::Index col = 0;
        for (int h = 0; h < heads; ++h) {
            const SeqBatch head = attention({q[bi] * params.wq[static_cast<std::size_t>(h)]},
                                            {k[bi] * params.wk[static_cast<std::size_t>(h)]},
                                            {v[bi] * params.wv[static_cast<std::size_t>(h)]});
            concat.middleCols(col, head[0].cols()) = head[0];
            col += head[0].cols();
        }
        out.push_back(concat * params.wo);
    }
    return out;
}

Conv2dParams Conv2dParams::identity(int channels)
{
    Conv2dParams p;
    p.in_ch = channels;
    p.out_ch = channels;
    p.weights.assign(static_cast<std::size_t>(channels) * channels * 9, 0.0);
    p.bias = Eigen::VectorXd::Zero(channels);
    for (int c = 0; c < channels; ++c) {
        p.weights[((static_cast<std::size_t>(c) * channels + c) * 3 + 1) * 3 + 1] = 1.0;
    }
    return p;
}

Conv2dParams Conv2dParams::random(int in_ch, int out_ch, std::uint64_t seed)
{
    Rng rng(derive_seed(seed, "conv.init", 0));
    Conv2dParams p;
    p.in_ch = in_ch;
    p.out_ch = out_ch;
    p.weights.resize(static_cast<std::size_t>(out_ch) * in_ch * 9);
    p.bias.resize(out_ch);
    const double scale = 1.0 / std::sqrt(9.0 * in_ch);
    for (auto& w : p.weights) {
        w = scale * rng.normal();
    }
    for (int c = 0; c < out_ch; ++c) {
        p.bias(c) = 0.0;
    }
    return p;
}

Tensor4 conv3x3(const Tensor4& x, const Conv2dParams& params)
{
    if (x.c != params.in_ch) {
        throw NumericalError("conv3x3: channel mismatch");
    }
    Tensor4 out(x.b, params.out_ch, x.h, x.w);
    for (int bi = 0; bi < x.b; ++bi) {
        for (int co = 0; co < params.out_ch; ++co) {
            for (int y = 0; y < x.h; ++y) {
                for (int xx = 0; xx < x.w; ++xx) {
                    double acc = params.bias(co);
                    for (int ci = 0; ci < x.c; ++ci) {
                        for (int ky = 0; ky < 3; ++ky) {
                            const int sy = y + ky - 1;
                            if (sy < 0 || sy >= x.h) continue;
                            for (int kx = 0; kx < 3; ++kx) {
                                const int sx = xx + kx - 1;
                                if (sx < 0 || sx >= x.w) continue;
                                acc += params.wt(co, ci, ky, kx) * x.at(bi, ci, sy, sx);
                            }
                        }
                    }
                    out.at(bi, co, y, xx) = acc;
                }
            }
        }
    }
    return out;
}

Tensor4 max_pool2(const Tensor4& x)
{
    if (x.h % 2 != 0 || x.w % 2 != 0) {
        throw NumericalError("max_pool2: spatial dims must be even");
    }
    Tensor4 out(x.b, x.c, x.h / 2, x.w / 2);
    for (int bi = 0; bi < x.b; ++bi) {
        for (int ci = 0; ci < x.c; ++ci) {
            for (int y = 0; y < out.h; ++y) {
                for (int xx = 0; xx < out.w; ++xx) {
                    const double a = x.at(bi, ci, 2 * y, 2 * xx);
                    const double b = x.at(bi, ci, 2 * y, 2 * xx + 1);
                    const double c = x.at(bi, ci, 2 * y + 1, 2 * xx);
                    const double d = x.at(bi, ci, 2 * y + 1, 2 * xx + 1);
                    out.at(bi, ci, y, xx) = std::max(std::max(a, b), std::max(c, d));
                }
            }
        }
    }
    return out;
}

Tensor4 upsample_bilinear2(const Tensor4& x)
{
    Tensor4 out(x.b, x.c, 2 * x.h, 2 * x.w);
    for (int bi = 0; bi < x.b; ++bi) {
        for (int ci = 0; ci < x.c; ++ci) {
            for (int y = 0; y < out.h; ++y) {
                // Half-pixel source coordinates, clamped at the borders.
                const double sy = std::min(std::max((y + 0.5) / 2.0 - 0.5, 0.0),
                                           static_cast<double>(x.h - 1));
                const int y0 = static_cast<int>(sy);
                const int y1 = std::min(y0 + 1, x.h - 1);
                const double fy = sy - y0;
                for (int xx = 0; xx < out.w; ++xx) {
                    const double sx = std::min(std::max((xx + 0.5) / 2.0 - 0.5, 0.0),
                                               static_cast<double>(x.w - 1));
                    const int x0 = static_cast<int>(sx);
                    const int x1 = std::min(x0 + 1, x.w - 1);
                    const double fx = sx - x0;
                    out.at(bi, ci, y, xx) =
                        (1 - fy) * ((1 - fx) * x.at(bi, ci, y0, x0) + fx * x.at(bi, ci, y0, x1)) +
                        fy * ((1 - fx) * x.at(bi, ci, y1, x0) + fx * x.at(bi, ci, y1, x1));
                }
            }
        }
    }
    return out;
}

Tensor4 concat_confidence(const Tensor4& features, double confidence)
{
    if (!(confidence >= 0.0 && confidence <= 1.0)) {
        throw NumericalError("confidence must lie in [0, 1]");
    }
    Tensor4 out(features.b, features.c + 1, features.h, features.w);
    for (int bi = 0; bi < features.b; ++bi) {
        for (int ci = 0; ci < features.c; ++ci) {
            for (int y = 0; y < features.h; ++y) {
                for (int xx = 0; xx < features.w; ++xx) {
                    out.at(bi, ci, y, xx) = features.at(bi, ci, y, xx);
                }
            }
        }
        for (int y = 0; y < features.h; ++y) {
            for (int xx = 0; xx < features.w; ++xx) {
                out.at(bi, features.c, y, xx) = confidence;
            }
        }
    }
    return out;
}

Tensor4 fuse_outputs(const DecoderBundle& bundle)
{
    if (bundle.outputs.size() < 2) {
        throw NumericalError("fusion needs at least two decoder outputs");
    }
    const Tensor4& first = bundle.outputs[0];
    for (const auto& o : bundle.outputs) {
        if (!o.same_shape(first)) {
            throw NumericalError("fusion: decoder output shapes differ");
        }
    }
    if (bundle.fusion_weights.cols() != first.c) {
        throw NumericalError("fusion: 1x1 kernel input channels mismatch");
    }

    Tensor4 mean(first.b, first.c, first.h, first.w);
    const double inv = 1.0 / static_cast<double>(bundle.outputs.size());
    for (const auto& o : bundle.outputs) {
        for (std::size_t i = 0; i < mean.data.size(); ++i) {
            mean.data[i] += inv * o.data[i];
        }
    }

    const int out_ch = static_cast<int>(bundle.fusion_weights.rows());
    Tensor4 out(first.b, out_ch, first.h, first.w);
    for (int bi = 0; bi < first.b; ++bi) {
        for (int co = 0; co < out_ch; ++co) {
            const double bias = bundle.fusion_bias.size() > 0 ? bundle.fusion_bias(co) : 0.0;
            for (int y = 0; y < first.h; ++y) {
                for (int xx = 0; xx < first.w; ++xx) {
                    double acc = bias;
                    for (int ci = 0; ci < first.c; ++ci) {
                        acc += bundle.fusion_weights(co, ci) * mean.at(bi, ci, y, xx);
                    }
                    out.at(bi, co, y, xx) = acc;
                }
            }
        }
    }
    return out;
}

EglaParams EglaParams::random(int channels, int heads, std::uint64_t seed)
{
    EglaParams p;
    p.conv_q = Conv2dParams::random(channels, channels, derive_seed(seed, "egla.q", 0));
    p.conv_k = Conv2dParams::random(channels, channels, derive_seed(seed, "egla.k", 0));
    p.conv_v = Conv2dParams::random(channels, channels, derive_seed(seed, "egla.v", 0));
    p.mha = MhaParams::random(channels, heads, derive_seed(seed, "egla.mha", 0));
    return p;
}

namespace {

SeqBatch flatten_spatial(const Tensor4& x)
{
    SeqBatch out;
    out.reserve(static_cast<std::size_t>(x.b));
    for (int bi = 0; bi < x.b; ++bi) {
        Eigen::MatrixXd m(x.h * x.w, x.c);
        for (int ci = 0; ci < x.c; ++ci) {
            for (int y = 0; y < x.h; ++y) {
                for (int xx = 0; xx < x.w; ++xx) {
                    m(y * x.w + xx, ci) = x.at(bi, ci, y, xx);
                }
            }
        }
        out.push_back(std::move(m));
    }
    return out;
}

Tensor4 unflatten_spatial(const SeqBatch& seq, int c, int h, int w)
{
    Tensor4 out(static_cast<int>(seq.size()), c, h, w);
    for (std::size_t bi = 0; bi < seq.size(); ++bi) {
        for (int ci = 0; ci < c; ++ci) {
            for (int y = 0; y < h; ++y) {
                for (int xx = 0; xx < w; ++xx) {
                    out.at(static_cast<int>(bi), ci, y, xx) = seq[bi](y * w + xx, ci);
                }
            }
        }
    }
    return out;
}

} // namespace

Tensor4 egla_forward(const Tensor4& global_feature, const Tensor4& intermediate,
                     const EglaParams& params)
{
    const Tensor4& J = global_feature;
    const Tensor4& S = intermediate;
    if (S.b != J.b || S.c != J.c || S.h != 2 * J.h || S.w != 2 * J.w) {
        throw NumericalError("egla: S must be the 2x spatial companion of J");
    }

    const Tensor4 q_map = conv3x3(max_pool2(S), params.conv_q);
    const Tensor4 k_map = conv3x3(J, params.conv_k);
    const Tensor4 v_map = conv3x3(J, params.conv_v);

    const SeqBatch att = multi_head_attention(flatten_spatial(q_map), flatten_spatial(k_map),
                                              flatten_spatial(v_map), params.mha);

    const Tensor4 att_map = unflatten_spatial(att, J.c, J.h, J.w);
    const Tensor4 up = upsample_bilinear2(att_map);

    Tensor4 out = S;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] += up.data[i];
    }
    return out;
}

double composite_loss(double gan_term, double cyc_term, double ide_term, double lambda1,
                      double lambda2)
{
    if (lambda1 < 0.0 || lambda2 < 0.0) {
        throw NumericalError("loss weights must be nonnegative");
    }
    return gan_term + lambda1 * cyc_term + lambda2 * ide_term;
}

} // namespace umst
