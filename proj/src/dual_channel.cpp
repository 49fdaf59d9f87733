// SPDX-License-Identifier: Apache-2.0
#include "spatialcot/dual_channel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spatialcot/errors.hpp"
#include "spatialcot/rng.hpp"

namespace spatialcot {

namespace {

template <typename Scalar>
Scalar sigmoid(Scalar a) {
  Scalar s;
  if (a >= 0) {
    s = Scalar(1) / (Scalar(1) + std::exp(-a));
  } else {
    const Scalar e = std::exp(a);
    s = e / (Scalar(1) + e);
  }
  // Keep the weight strictly inside (0, 1) even where exp saturates.
  constexpr Scalar lo = std::numeric_limits<Scalar>::min();
  constexpr Scalar hi = Scalar(1) - std::numeric_limits<Scalar>::epsilon() / 2;
  return std::clamp(s, lo, hi);
}

template <typename Scalar>
void check_shape(const char* what, Eigen::Index rows, Eigen::Index cols, Eigen::Index want_rows,
                 Eigen::Index want_cols) {
  if (rows != want_rows || cols != want_cols) {
    throw ConfigurationError(std::string(what) + " has shape " + std::to_string(rows) + "x" +
                             std::to_string(cols) + ", expected " + std::to_string(want_rows) + "x" +
                             std::to_string(want_cols));
  }
}

template <typename Scalar>
void softmax_rows(Matrix<Scalar>& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    auto row = s.row(i);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
}

template <typename Scalar>
void fill_uniform(Rng& rng, Scalar* data, Eigen::Index count, Scalar scale) {
  for (Eigen::Index i = 0; i < count; ++i) {
    data[i] = static_cast<Scalar>((2.0 * rng.uniform() - 1.0) * static_cast<double>(scale));
  }
}

}  // namespace

template <typename Scalar>
void AttentionParams<Scalar>::validate() const {
  const Eigen::Index d = dim();
  if (d <= 0) throw ConfigurationError("attention width must be positive");
  if (heads <= 0 || d % heads != 0) {
    throw ConfigurationError("head count " + std::to_string(heads) + " does not divide width " +
                             std::to_string(d));
  }
  check_shape<Scalar>("W_q", wq.rows(), wq.cols(), d, d);
  check_shape<Scalar>("W_k", wk.rows(), wk.cols(), d, d);
  check_shape<Scalar>("W_v", wv.rows(), wv.cols(), d, d);
  check_shape<Scalar>("W_o", wo.rows(), wo.cols(), d, d);
  check_shape<Scalar>("b_q", 1, bq.cols(), 1, d);
  check_shape<Scalar>("b_k", 1, bk.cols(), 1, d);
  check_shape<Scalar>("b_v", 1, bv.cols(), 1, d);
  check_shape<Scalar>("b_o", 1, bo.cols(), 1, d);
}

template <typename Scalar>
AttentionParams<Scalar> AttentionParams<Scalar>::random(Eigen::Index d, int heads, std::uint64_t seed,
                                                        Scalar scale) {
  Rng rng(seed);
  AttentionParams p;
  p.heads = heads;
  for (Matrix<Scalar>* m : {&p.wq, &p.wk, &p.wv, &p.wo}) {
    m->resize(d, d);
    fill_uniform(rng, m->data(), m->size(), scale);
  }
  for (RowVector<Scalar>* b : {&p.bq, &p.bk, &p.bv, &p.bo}) {
    b->resize(d);
    fill_uniform(rng, b->data(), b->size(), scale);
  }
  p.validate();
  return p;
}

template <typename Scalar>
RowVector<Scalar> DualChannelParams<Scalar>::alpha() const {
  return gate.unaryExpr([](Scalar a) { return sigmoid(a); });
}

template <typename Scalar>
void DualChannelParams<Scalar>::validate() const {
  base.validate();
  plus.validate();
  if (plus.dim() != base.dim() || plus.heads != base.heads) {
    throw ConfigurationError("plus channel shape differs from base");
  }
  check_shape<Scalar>("gate", 1, gate.cols(), 1, base.dim());
}

template <typename Scalar>
Matrix<Scalar> attn_forward(const Matrix<Scalar>& x, const AttentionParams<Scalar>& p,
                            AttentionCache<Scalar>* cache) {
  p.validate();
  if (x.cols() != p.dim() || x.rows() == 0) {
    throw ConfigurationError("token matrix has " + std::to_string(x.cols()) + " channels, attention expects " +
                             std::to_string(p.dim()));
  }
  const Eigen::Index n = x.rows();
  const Eigen::Index dh = p.dim() / p.heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));

  Matrix<Scalar> q = (x * p.wq).rowwise() + p.bq;
  Matrix<Scalar> k = (x * p.wk).rowwise() + p.bk;
  Matrix<Scalar> v = (x * p.wv).rowwise() + p.bv;
  Matrix<Scalar> concat(n, p.dim());
  std::vector<Matrix<Scalar>> probs;
  probs.reserve(p.heads);
  for (int h = 0; h < p.heads; ++h) {
    Matrix<Scalar> s = (q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose()) * scale;
    softmax_rows(s);
    concat.middleCols(h * dh, dh) = s * v.middleCols(h * dh, dh);
    probs.push_back(std::move(s));
  }
  Matrix<Scalar> out = (concat * p.wo).rowwise() + p.bo;
  if (cache) {
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->probs = std::move(probs);
    cache->concat = std::move(concat);
    cache->out = out;
  }
  return out;
}

template <typename Scalar>
Matrix<Scalar> dual_forward(const Matrix<Scalar>& x, const DualChannelParams<Scalar>& dc) {
  dc.validate();
  const Matrix<Scalar> a = attn_forward(x, dc.base);
  const Matrix<Scalar> b = attn_forward(x, dc.plus);
  const RowVector<Scalar> alpha = dc.alpha();
  Matrix<Scalar> out(a.rows(), a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    out.col(j) = alpha(j) * a.col(j) + (Scalar(1) - alpha(j)) * b.col(j);
  }
  return out;
}

template <typename Scalar>
AttentionGrads<Scalar> attn_backward(const Matrix<Scalar>& x, const AttentionParams<Scalar>& p,
                                     const AttentionCache<Scalar>& cache, const Matrix<Scalar>& upstream) {
  const Eigen::Index d = p.dim();
  const Eigen::Index dh = d / p.heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
  if (upstream.rows() != x.rows() || upstream.cols() != d) {
    throw InternalError("upstream gradient shape does not match the attention output");
  }

  AttentionGrads<Scalar> g;
  g.wo = cache.concat.transpose() * upstream;
  g.bo = upstream.colwise().sum();
  const Matrix<Scalar> dconcat = upstream * p.wo.transpose();

  Matrix<Scalar> dq(x.rows(), d);
  Matrix<Scalar> dk(x.rows(), d);
  Matrix<Scalar> dv(x.rows(), d);
  for (int h = 0; h < p.heads; ++h) {
    const auto& probs = cache.probs[h];
    const auto dout = dconcat.middleCols(h * dh, dh);
    const Matrix<Scalar> dprobs = dout * cache.v.middleCols(h * dh, dh).transpose();
    dv.middleCols(h * dh, dh) = probs.transpose() * dout;
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inner = (dprobs.array() * probs.array()).rowwise().sum();
    const Matrix<Scalar> dscores = probs.array() * (dprobs.colwise() - inner).array();
    dq.middleCols(h * dh, dh) = (dscores * cache.k.middleCols(h * dh, dh)) * scale;
    dk.middleCols(h * dh, dh) = (dscores.transpose() * cache.q.middleCols(h * dh, dh)) * scale;
  }
  g.wq = x.transpose() * dq;
  g.wk = x.transpose() * dk;
  g.wv = x.transpose() * dv;
  g.bq = dq.colwise().sum();
  g.bk = dk.colwise().sum();
  g.bv = dv.colwise().sum();
  return g;
}

template <typename Scalar>
DualChannelGrads<Scalar> dual_backward(const Matrix<Scalar>& x, const DualChannelParams<Scalar>& dc,
                                       const Matrix<Scalar>& upstream) {
  dc.validate();
  if (upstream.rows() != x.rows() || upstream.cols() != dc.base.dim()) {
    throw InternalError("upstream gradient shape does not match the dual-channel output");
  }
  const Matrix<Scalar> base_out = attn_forward(x, dc.base);
  AttentionCache<Scalar> cache;
  const Matrix<Scalar> plus_out = attn_forward(x, dc.plus, &cache);
  const RowVector<Scalar> alpha = dc.alpha();

  Matrix<Scalar> plus_upstream = upstream;
  for (Eigen::Index j = 0; j < upstream.cols(); ++j) plus_upstream.col(j) *= Scalar(1) - alpha(j);

  DualChannelGrads<Scalar> g;
  g.plus = attn_backward(x, dc.plus, cache, plus_upstream);
  const RowVector<Scalar> contraction = (upstream.array() * (base_out - plus_out).array()).colwise().sum();
  g.gate = (alpha.array() * (Scalar(1) - alpha.array()) * contraction.array()).matrix();
  return g;
}

template <typename Scalar>
DualChannelParams<Scalar> init_plus_from_base(const AttentionParams<Scalar>& base) {
  base.validate();
  DualChannelParams<Scalar> dc;
  dc.base = base;
  dc.plus = base;
  dc.gate = RowVector<Scalar>::Zero(base.dim());
  return dc;
}

template <typename Scalar>
std::vector<std::pair<std::string, Scalar*>> trainable_entries(DualChannelParams<Scalar>& dc,
                                                               const std::string& group) {
  std::vector<std::pair<std::string, Scalar*>> out;
  auto add = [&](const std::string& name, Scalar* data, Eigen::Index count) {
    if (!group.empty() && group != name) return;
    for (Eigen::Index i = 0; i < count; ++i) out.emplace_back(name, data + i);
  };
  auto& p = dc.plus;
  add("plus.wq", p.wq.data(), p.wq.size());
  add("plus.wk", p.wk.data(), p.wk.size());
  add("plus.wv", p.wv.data(), p.wv.size());
  add("plus.wo", p.wo.data(), p.wo.size());
  add("plus.bq", p.bq.data(), p.bq.size());
  add("plus.bk", p.bk.data(), p.bk.size());
  add("plus.bv", p.bv.data(), p.bv.size());
  add("plus.bo", p.bo.data(), p.bo.size());
  add("gate", dc.gate.data(), dc.gate.size());
  return out;
}

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& g : groups) worst = std::max(worst, g.max_rel_error);
  return worst;
}

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

GradCheckReport grad_check(std::size_t instances, std::uint64_t seed, double step, double floor,
                           int max_tokens, int max_dim) {
  if (max_tokens < 1 || max_dim < 1 || !(step > 0.0) || !(floor > 0.0)) {
    throw ConfigurationError("grad_check: sizes, step and floor must be positive");
  }
  static const char* kGroups[] = {"plus.wq", "plus.wk", "plus.wv", "plus.wo", "plus.bq",
                                  "plus.bk", "plus.bv", "plus.bo", "gate"};
  GradCheckReport report;
  report.instances = instances;
  report.step = step;
  report.floor = floor;
  for (const char* name : kGroups) report.groups.push_back({name, 0, 0.0});

  for (std::size_t inst = 0; inst < instances; ++inst) {
    Rng rng(derive_seed(seed, inst));
    const int n = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(max_tokens)));
    std::vector<int> head_choices;
    for (int h : {1, 2, 4}) {
      if (h <= max_dim) head_choices.push_back(h);
    }
    const int heads = head_choices[rng.index(head_choices.size())];
    const int d = heads * (1 + static_cast<int>(rng.index(static_cast<std::size_t>(max_dim / heads))));

    auto dc = init_plus_from_base(AttentionParams<double>::random(d, heads, rng.next()));
    // Move away from the initialization point so both channels and the gate matter.
    const auto shift = AttentionParams<double>::random(d, heads, rng.next(), 0.2);
    dc.plus.wq += shift.wq;
    dc.plus.wk += shift.wk;
    dc.plus.wv += shift.wv;
    dc.plus.wo += shift.wo;
    dc.plus.bq += shift.bq;
    dc.plus.bk += shift.bk;
    dc.plus.bv += shift.bv;
    dc.plus.bo += shift.bo;
    fill_uniform(rng, dc.gate.data(), dc.gate.size(), 1.0);

    Matrix<double> x(n, d);
    Matrix<double> upstream(n, d);
    fill_uniform(rng, x.data(), x.size(), 1.0);
    fill_uniform(rng, upstream.data(), upstream.size(), 1.0);

    const auto grads = dual_backward(x, dc, upstream);
    std::vector<double> analytic;
    for (const auto* m : {&grads.plus.wq, &grads.plus.wk, &grads.plus.wv, &grads.plus.wo}) {
      analytic.insert(analytic.end(), m->data(), m->data() + m->size());
    }
    for (const auto* b : {&grads.plus.bq, &grads.plus.bk, &grads.plus.bv, &grads.plus.bo, &grads.gate}) {
      analytic.insert(analytic.end(), b->data(), b->data() + b->size());
    }

    auto loss = [&] { return (dual_forward(x, dc).array() * upstream.array()).sum(); };
    const auto entries = trainable_entries(dc, "");
    if (entries.size() != analytic.size()) throw InternalError("gradient layout mismatch");
    for (std::size_t i = 0; i < entries.size(); ++i) {
      double& w = *entries[i].second;
      const double saved = w;
      w = saved + step;
      const double up = loss();
      w = saved - step;
      const double down = loss();
      w = saved;
      const double numeric = (up - down) / (2.0 * step);
      for (auto& g : report.groups) {
        if (g.group != entries[i].first) continue;
        ++g.entries;
        g.max_rel_error = std::max(g.max_rel_error, relative_error(analytic[i], numeric, floor));
        g.max_abs_error = std::max(g.max_abs_error, std::abs(analytic[i] - numeric));
      }
    }
  }
  return report;
}

std::uint64_t VitConfig::mlp_hidden() const {
  const double hidden = mlp_ratio * static_cast<double>(width);
  const double rounded = std::round(hidden);
  if (std::abs(hidden - rounded) > 1e-6) {
    throw ConfigurationError("mlp_ratio * width is not a whole number for " + name);
  }
  return static_cast<std::uint64_t>(rounded);
}

void VitConfig::validate() const {
  if (width == 0 || heads == 0 || !(mlp_ratio > 0.0)) {
    throw ConfigurationError("VitConfig " + name + ": width, heads and mlp_ratio must be positive");
  }
  if (width % heads != 0) throw ConfigurationError("VitConfig " + name + ": heads must divide width");
  mlp_hidden();
}

ParamCount param_count(const VitConfig& cfg) {
  cfg.validate();
  const std::uint64_t d = cfg.width;
  const std::uint64_t m = cfg.mlp_hidden();
  const std::uint64_t attention = 4 * d * d + 4 * d;
  const std::uint64_t mlp = 2 * d * m + m + d;  // 2 r d^2 + (r + 1) d
  const std::uint64_t norms = 4 * d;
  ParamCount c;
  c.added = cfg.layers * (attention + d);
  c.base = cfg.patch_embed_params + cfg.layers * (attention + mlp + norms) + cfg.head_params;
  return c;
}

double param_overhead(const VitConfig& cfg) { return param_count(cfg).fraction(); }

std::vector<VitConfig> reference_configs() {
  auto conv = [](std::uint64_t patch, std::uint64_t d, bool bias) { return 3 * patch * patch * d + (bias ? d : 0); };
  std::vector<VitConfig> out;
  {
    // OpenCLIP ViT-bigG/14 at 224 px: 256 patches, class token, pre/post norm, 1280-d projection.
    const std::uint64_t d = 1664;
    out.push_back({"openclip-vit-bigG-14", 48, d, 16, 8192.0 / 1664.0,
                   conv(14, d, false) + d + 257 * d + 2 * d, 2 * d + d * 1280});
  }
  {
    // SigLIP2 ViT-g/16 at 256 px: 256 learned positions, attention-pool head.
    const std::uint64_t d = 1536;
    const std::uint64_t pool = d + (4 * d * d + 4 * d) + 2 * d + (2 * 4 * d * d + 5 * d);
    out.push_back({"siglip2-vit-g-16", 40, d, 16, 4.0, conv(16, d, true) + 256 * d, 2 * d + pool});
  }
  {
    // DINOv2 ViT-g/14 at 518 px with a SwiGLU MLP of hidden 4096 (three d x 4096 maps, ratio 3*4096/(2d)).
    const std::uint64_t d = 1536;
    out.push_back({"dinov2-vit-g-14", 40, d, 24, 3.0 * 4096.0 / (2.0 * 1536.0),
                   conv(14, d, true) + d + 1370 * d + d, 2 * d});
  }
  {
    // DINOv3 ViT-7B/16: SwiGLU hidden 8192, rotary positions, four register tokens.
    const std::uint64_t d = 4096;
    out.push_back({"dinov3-vit-7b-16", 40, d, 32, 3.0 * 8192.0 / (2.0 * 4096.0),
                   conv(16, d, true) + d + 4 * d + d, 2 * d});
  }
  return out;
}

#define SPATIALCOT_INSTANTIATE(S)                                                                     \
  template struct AttentionParams<S>;                                                                 \
  template struct DualChannelParams<S>;                                                               \
  template Matrix<S> attn_forward(const Matrix<S>&, const AttentionParams<S>&, AttentionCache<S>*);   \
  template Matrix<S> dual_forward(const Matrix<S>&, const DualChannelParams<S>&);                     \
  template AttentionGrads<S> attn_backward(const Matrix<S>&, const AttentionParams<S>&,               \
                                           const AttentionCache<S>&, const Matrix<S>&);               \
  template DualChannelGrads<S> dual_backward(const Matrix<S>&, const DualChannelParams<S>&,           \
                                             const Matrix<S>&);                                       \
  template DualChannelParams<S> init_plus_from_base(const AttentionParams<S>&);                       \
  template std::vector<std::pair<std::string, S*>> trainable_entries(DualChannelParams<S>&, const std::string&);

SPATIALCOT_INSTANTIATE(float)
SPATIALCOT_INSTANTIATE(double)

#undef SPATIALCOT_INSTANTIATE

}  // namespace spatialcot
