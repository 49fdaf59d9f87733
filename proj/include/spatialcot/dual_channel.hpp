// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace spatialcot {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// Multi-head self-attention sublayer, row-vector convention: y = x W + b.
template <typename Scalar>
struct AttentionParams {
  Matrix<Scalar> wq, wk, wv, wo;
  RowVector<Scalar> bq, bk, bv, bo;
  int heads = 1;

  Eigen::Index dim() const { return wq.rows(); }
  /// Throws ConfigurationError on inconsistent shapes or heads not dividing d.
  void validate() const;

  /// Entries uniform in [-scale, scale].
  static AttentionParams random(Eigen::Index d, int heads, std::uint64_t seed, Scalar scale = 0.5);
};

template <typename Scalar>
struct DualChannelParams {
  AttentionParams<Scalar> base;  // frozen
  AttentionParams<Scalar> plus;
  RowVector<Scalar> gate;  // one logit per channel; mixing weight is sigmoid(gate)

  RowVector<Scalar> alpha() const;
  void validate() const;
};

/// Intermediates kept for the backward pass.
template <typename Scalar>
struct AttentionCache {
  Matrix<Scalar> q, k, v;
  std::vector<Matrix<Scalar>> probs;  // one n x n matrix per head
  Matrix<Scalar> concat;              // heads side by side, before W_o
  Matrix<Scalar> out;
};

template <typename Scalar>
Matrix<Scalar> attn_forward(const Matrix<Scalar>& x, const AttentionParams<Scalar>& p,
                            AttentionCache<Scalar>* cache = nullptr);

/// out[:, j] = alpha_j * Attn_base(x)[:, j] + (1 - alpha_j) * Attn_plus(x)[:, j].
template <typename Scalar>
Matrix<Scalar> dual_forward(const Matrix<Scalar>& x, const DualChannelParams<Scalar>& dc);

template <typename Scalar>
struct AttentionGrads {
  Matrix<Scalar> wq, wk, wv, wo;
  RowVector<Scalar> bq, bk, bv, bo;
};

/// Gradients of the trainable half only. There is deliberately no field for
/// the base channel.
template <typename Scalar>
struct DualChannelGrads {
  AttentionGrads<Scalar> plus;
  RowVector<Scalar> gate;
};

/// Parameter gradients of <upstream, Attn(x)> for one sublayer.
template <typename Scalar>
AttentionGrads<Scalar> attn_backward(const Matrix<Scalar>& x, const AttentionParams<Scalar>& p,
                                     const AttentionCache<Scalar>& cache,
                                     const Matrix<Scalar>& upstream);

/// Gradients of <upstream, dual_forward(x, dc)> w.r.t. the plus channel and
/// the gate. Throws InternalError on an upstream of the wrong shape.
template <typename Scalar>
DualChannelGrads<Scalar> dual_backward(const Matrix<Scalar>& x, const DualChannelParams<Scalar>& dc,
                                       const Matrix<Scalar>& upstream);

/// Plus channel as an independent copy of base, gate zero.
template <typename Scalar>
DualChannelParams<Scalar> init_plus_from_base(const AttentionParams<Scalar>& base);

/// Every trainable tensor of the plus channel and the gate, in a fixed order.
/// Used by the finite-difference checker to perturb entries one at a time.
template <typename Scalar>
std::vector<std::pair<std::string, Scalar*>> trainable_entries(DualChannelParams<Scalar>& dc,
                                                               const std::string& group);

struct GradGroupError {
  std::string group;  // "plus.wq", ..., "gate"
  std::size_t entries = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  std::size_t instances = 0;
  double step = 1e-5;
  double floor = 1e-6;
  std::vector<GradGroupError> groups;

  double max_rel_error() const;
};

/// |analytic - numeric| / max(|analytic|, |numeric|, floor).
double relative_error(double analytic, double numeric, double floor);

/// Central differences against dual_backward on random f64 instances with
/// n in [1, max_tokens] and d in [1, max_dim] (d divisible by the drawn head count).
/// Partials smaller than `floor` in magnitude are compared against `floor`:
/// some are exactly zero (the key bias cancels inside each softmax row), and
/// for those only the difference noise is left to measure.
GradCheckReport grad_check(std::size_t instances, std::uint64_t seed, double step = 1e-5,
                           double floor = 1e-6, int max_tokens = 4, int max_dim = 8);

/// Transformer encoder shape for parameter accounting. The MLP is written as
/// hidden = mlp_ratio * width; gated MLPs use an effective ratio.
struct VitConfig {
  std::string name;
  std::uint64_t layers = 0;
  std::uint64_t width = 0;
  std::uint64_t heads = 1;
  double mlp_ratio = 4.0;
  std::uint64_t patch_embed_params = 0;
  std::uint64_t head_params = 0;

  /// mlp_ratio * width, which must be a whole number.
  std::uint64_t mlp_hidden() const;
  void validate() const;
};

struct ParamCount {
  std::uint64_t added = 0;
  std::uint64_t base = 0;

  double fraction() const { return base == 0 ? 0.0 : static_cast<double>(added) / static_cast<double>(base); }
};

/// added = L (4d^2 + 4d + d); base = embed + L (4d^2 + 4d + 2 r d^2 + (r+1) d + 4d) + head.
ParamCount param_count(const VitConfig& cfg);
double param_overhead(const VitConfig& cfg);

/// Shapes approximating the four encoders the adapter was reported on.
std::vector<VitConfig> reference_configs();

}  // namespace spatialcot
