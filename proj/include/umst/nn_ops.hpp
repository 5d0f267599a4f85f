// Copyright (C) 2026 The UMST Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace umst {

/// A batch of sequence tensors; each item is an N x d matrix (N spatial
/// locations or tokens, d feature channels).
using SeqBatch = std::vector<Eigen::MatrixXd>;

/// Scaled dot-product attention softmax(q k^T / sqrt(d_k)) v, per batch item.
/// Aborts with the row index if a logit row is non-finite.
SeqBatch attention(const SeqBatch& q, const SeqBatch& k, const SeqBatch& v);

struct MhaParams {
    int heads = 1;
    std::vector<Eigen::MatrixXd> wq, wk, wv; // per head: E x (E / heads)
    Eigen::MatrixXd wo;                      // E x E output projection

    static MhaParams identity(int embed_dim);
    static MhaParams random(int embed_dim, int heads, std::uint64_t seed);
};

/// Splits the embedding into heads via per-head projections, runs attention
/// per head, concatenates and applies the output projection.
SeqBatch multi_head_attention(const SeqBatch& q, const SeqBatch& k, const SeqBatch& v,
                              const MhaParams& params);

/// Dense 4-D feature map, row-major (batch, channel, height, width).
struct Tensor4 {
    int b = 0, c = 0, h = 0, w = 0;
    std::vector<double> data;

    Tensor4() = default;
    Tensor4(int b_, int c_, int h_, int w_)
        : b(b_), c(c_), h(h_), w(w_),
          data(static_cast<std::size_t>(b_) * c_ * h_ * w_, 0.0) {}

    double& at(int bi, int ci, int yi, int xi)
    {
        return data[((static_cast<std::size_t>(bi) * c + ci) * h + yi) * w + xi];
    }
    double at(int bi, int ci, int yi, int xi) const
    {
        return data[((static_cast<std::size_t>(bi) * c + ci) * h + yi) * w + xi];
    }
    bool same_shape(const Tensor4& o) const
    {
        return b == o.b && c == o.c && h == o.h && w == o.w;
    }
};

/// 3x3 stride-1 zero-padded convolution parameters.
struct Conv2dParams {
    int in_ch = 0, out_ch = 0;
    std::vector<double> weights; // out_ch x in_ch x 3 x 3, row-major
    Eigen::VectorXd bias;        // out_ch

    double wt(int co, int ci, int ky, int kx) const
    {
        return weights[((static_cast<std::size_t>(co) * in_ch + ci) * 3 + ky) * 3 + kx];
    }

    static Conv2dParams identity(int channels);
    static Conv2dParams random(int in_ch, int out_ch, std::uint64_t seed);
};

Tensor4 conv3x3(const Tensor4& x, const Conv2dParams& params);
Tensor4 max_pool2(const Tensor4& x);           // 2x2, stride 2
Tensor4 upsample_bilinear2(const Tensor4& x);  // x2, half-pixel centers

/// Broadcasts the scalar confidence c_d, c_d in [0, 1], to a constant channel
/// and concatenates it along the channel axis.
Tensor4 concat_confidence(const Tensor4& features, double confidence);

/// Per-decoder outputs plus the fusion kernel and the two feature maps the
/// attention module consumes: the global representation J and the
/// intermediate map S whose spatial dims are twice those of J.
struct DecoderBundle {
    std::vector<Tensor4> outputs;
    Eigen::MatrixXd fusion_weights; // out_ch x in_ch, 1x1 mixing kernel
    Eigen::VectorXd fusion_bias;
    Tensor4 global_feature; // J
    Tensor4 intermediate;   // S
};

/// Element-wise mean across decoder outputs followed by the 1x1 convolution.
Tensor4 fuse_outputs(const DecoderBundle& bundle);

struct EglaParams {
    Conv2dParams conv_q, conv_k, conv_v;
    MhaParams mha;

    static EglaParams random(int channels, int heads, std::uint64_t seed);
};

/// Efficient global-local attention: the query comes from S max-pooled and
/// convolved, key and value from two separate convolutions of J; the
/// multi-head attention output is upsampled back to S's spatial size and
/// added to S through the residual connection.
Tensor4 egla_forward(const Tensor4& global_feature, const Tensor4& intermediate,
                     const EglaParams& params);

/// Weighted cycle-consistency objective: gan + lambda1 * cyc + lambda2 * ide.
double composite_loss(double gan_term, double cyc_term, double ide_term,
                      double lambda1 = 10.0, double lambda2 = 5.0);

} // namespace umst
