#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "curvadv/cloud.hpp"
#include "curvadv/errors.hpp"
#include "curvadv/metrics.hpp"
#include "curvadv/random.hpp"

namespace curvadv {

// A reduced PCN-style completion network:
//
//   x (n x 3) -> Linear 3-64 -> BN -> ReLU -> Linear 64-128 = f
//   g = maxpool(f); [f | g] (n x 256) -> Linear 256-512 -> BN -> ReLU
//   code = maxpool (512) -> Linear 512-256 -> BN -> ReLU -> Linear 256-3m
//
// Point-wise BN normalizes over every point of every cloud in the batch,
// the decoder BN over the clouds. Each BN layer keeps two fully separate
// parameter sets, one per Branch.

enum class Branch { kMain = 0, kAux = 1 };
enum class Mode { kTrain, kEval };

inline const char* branch_name(Branch b) { return b == Branch::kMain ? "main" : "aux"; }

struct NetConfig {
  std::size_t n_in = 256;
  std::size_t m_out = 512;
  double bn_momentum = 0.9;  ///< running = momentum * running + (1 - momentum) * batch
  double bn_eps = 1e-5;

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

using Matrix = Eigen::MatrixXd;
using Batch = std::vector<PointCloud>;

struct Linear {
  Matrix w;  ///< in x out
  Matrix b;  ///< 1 x out
};

struct BatchNormParams {
  Matrix gamma, beta;                ///< 1 x C, trainable
  Matrix running_mean, running_var;  ///< 1 x C, statistics
};

struct DualBatchNorm {
  std::array<BatchNormParams, 2> branch;

  BatchNormParams& operator[](Branch b) { return branch[static_cast<int>(b)]; }
  const BatchNormParams& operator[](Branch b) const { return branch[static_cast<int>(b)]; }
};

struct ModelParams {
  NetConfig config;
  Linear enc1, enc2, enc3, dec1, dec2;
  DualBatchNorm bn1, bn2, bn3;
};

/// Role of a tensor, used by the optimizer and serializers.
enum class TensorKind { kWeight, kAffineMain, kAffineAux, kStatMain, kStatAux };

/// Calls f(name, tensor, kind) on every tensor in a fixed order.
template <class Params, class F>
void visit_tensors(Params& p, F&& f) {
  auto linear = [&](const char* name, auto& l) {
    f(std::string(name) + ".w", l.w, TensorKind::kWeight);
    f(std::string(name) + ".b", l.b, TensorKind::kWeight);
  };
  auto bn = [&](const char* name, auto& d) {
    for (Branch br : {Branch::kMain, Branch::kAux}) {
      const std::string prefix = std::string(name) + "." + branch_name(br) + ".";
      const bool main = br == Branch::kMain;
      f(prefix + "gamma", d[br].gamma, main ? TensorKind::kAffineMain : TensorKind::kAffineAux);
      f(prefix + "beta", d[br].beta, main ? TensorKind::kAffineMain : TensorKind::kAffineAux);
      f(prefix + "running_mean", d[br].running_mean, main ? TensorKind::kStatMain : TensorKind::kStatAux);
      f(prefix + "running_var", d[br].running_var, main ? TensorKind::kStatMain : TensorKind::kStatAux);
    }
  };
  linear("enc1", p.enc1);
  bn("bn1", p.bn1);
  linear("enc2", p.enc2);
  linear("enc3", p.enc3);
  bn("bn2", p.bn2);
  linear("dec1", p.dec1);
  bn("bn3", p.bn3);
  linear("dec2", p.dec2);
}

inline bool is_trainable(TensorKind k) { return k == TensorKind::kWeight || k == TensorKind::kAffineMain || k == TensorKind::kAffineAux; }

namespace detail {

inline Linear xavier(std::size_t in, std::size_t out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  Linear l{Matrix(in, out), Matrix::Zero(1, out)};
  for (Eigen::Index c = 0; c < l.w.cols(); ++c) {
    for (Eigen::Index r = 0; r < l.w.rows(); ++r) l.w(r, c) = uniform(rng, -limit, limit);
  }
  return l;
}

inline DualBatchNorm fresh_bn(std::size_t c) {
  DualBatchNorm d;
  for (auto& b : d.branch) {
    b.gamma = Matrix::Ones(1, c);
    b.beta = Matrix::Zero(1, c);
    b.running_mean = Matrix::Zero(1, c);
    b.running_var = Matrix::Ones(1, c);
  }
  return d;
}

}  // namespace detail

/// Xavier-uniform weights, zero biases, BN gamma 1 and beta 0, running
/// mean 0 and variance 1 for both branches.
inline ModelParams init_params(const NetConfig& config, std::uint64_t seed) {
  if (config.n_in < 1 || config.m_out < 1) throw ConfigError("net: n_in and m_out must be positive");
  Rng rng(seed);
  ModelParams p;
  p.config = config;
  p.enc1 = detail::xavier(3, 64, rng);
  p.enc2 = detail::xavier(64, 128, rng);
  p.enc3 = detail::xavier(256, 512, rng);
  p.dec1 = detail::xavier(512, 256, rng);
  p.dec2 = detail::xavier(256, 3 * config.m_out, rng);
  p.bn1 = detail::fresh_bn(64);
  p.bn2 = detail::fresh_bn(512);
  p.bn3 = detail::fresh_bn(256);
  return p;
}

/// Brings a cloud to exactly n points: larger clouds are subsampled
/// without replacement, smaller ones padded by drawing with replacement.
inline PointCloud resample_to(const PointCloud& cloud, std::size_t n, Rng& rng) {
  if (cloud.empty()) throw SizeError("resample_to: empty cloud");
  if (cloud.size() == n) return cloud;
  std::vector<Vec3> out;
  out.reserve(n);
  if (cloud.size() > n) {
    std::vector<std::size_t> idx(cloud.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    for (std::size_t i : idx) out.push_back(cloud[i]);
  } else {
    out = cloud.points();
    while (out.size() < n) out.push_back(cloud[static_cast<std::size_t>(rng() % cloud.size())]);
  }
  return PointCloud(std::move(out));
}

struct BnCache {
  Matrix xhat;
  Matrix inv_std;     ///< 1 x C; from batch statistics in train mode, running ones in eval
  Matrix batch_mean;  ///< 1 x C, train mode only
  Matrix batch_var;   ///< 1 x C, biased, train mode only
};

struct ForwardCache {
  Branch branch = Branch::kMain;
  Mode mode = Mode::kEval;
  std::size_t batch = 0;
  std::size_t points = 0;
  Matrix x;
  BnCache bn1, bn2, bn3;
  Matrix a1, r1, f, cat, a2, r2, code, a3, r3, out;
  std::vector<Eigen::Index> arg_g, arg_code;  // batch-major argmax row per channel
};

struct ForwardResult {
  Batch predictions;
  ForwardCache cache;
};

namespace detail {

inline Matrix bn_forward(const Matrix& h, const BatchNormParams& p, Mode mode, double eps, BnCache& c) {
  if (mode == Mode::kTrain) {
    c.batch_mean = h.colwise().mean();
    const Matrix centered = h.rowwise() - c.batch_mean.row(0);
    c.batch_var = centered.array().square().colwise().mean();
    c.inv_std = (c.batch_var.array() + eps).rsqrt();
    c.xhat = centered.array().rowwise() * c.inv_std.row(0).array();
  } else {
    c.inv_std = (p.running_var.array() + eps).rsqrt();
    c.xhat = (h.rowwise() - p.running_mean.row(0)).array().rowwise() * c.inv_std.row(0).array();
  }
  Matrix y = c.xhat.array().rowwise() * p.gamma.row(0).array();
  y.rowwise() += p.beta.row(0);
  return y;
}

// Returns dL/dh and accumulates the affine gradients.
inline Matrix bn_backward(const Matrix& dy, const BnCache& c, const BatchNormParams& p, Mode mode,
                          BatchNormParams* grad) {
  if (grad) {
    grad->gamma += (dy.array() * c.xhat.array()).colwise().sum().matrix();
    grad->beta += dy.colwise().sum();
  }
  const Matrix dxhat = dy.array().rowwise() * p.gamma.row(0).array();
  if (mode == Mode::kEval) return dxhat.array().rowwise() * c.inv_std.row(0).array();
  const double n = static_cast<double>(dy.rows());
  const Eigen::RowVectorXd sum_d = dxhat.colwise().sum();
  const Eigen::RowVectorXd sum_dx = (dxhat.array() * c.xhat.array()).colwise().sum();
  Matrix dx = (dxhat * n).rowwise() - sum_d;
  dx -= (c.xhat.array().rowwise() * sum_dx.array()).matrix();
  return (dx.array().rowwise() * (c.inv_std.row(0).array() / n)).matrix();
}

// Per-cloud max over rows; ties to the lowest row.
inline Matrix maxpool(const Matrix& h, std::size_t batch, std::size_t points, std::vector<Eigen::Index>& arg) {
  const Eigen::Index ch = h.cols();
  Matrix out(static_cast<Eigen::Index>(batch), ch);
  arg.assign(batch * static_cast<std::size_t>(ch), 0);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto r0 = static_cast<Eigen::Index>(b * points);
    for (Eigen::Index c = 0; c < ch; ++c) {
      Eigen::Index best = r0;
      double v = h(r0, c);
      for (Eigen::Index r = r0 + 1; r < r0 + static_cast<Eigen::Index>(points); ++r) {
        if (h(r, c) > v) {
          v = h(r, c);
          best = r;
        }
      }
      out(static_cast<Eigen::Index>(b), c) = v;
      arg[b * static_cast<std::size_t>(ch) + static_cast<std::size_t>(c)] = best;
    }
  }
  return out;
}

inline Matrix relu(const Matrix& a) { return a.cwiseMax(0.0); }
inline Matrix relu_grad(const Matrix& d, const Matrix& a) { return (a.array() > 0.0).select(d, 0.0); }

}  // namespace detail

/// Runs the network on a batch of clouds of exactly n_in points each.
/// Pure: train mode uses batch statistics but does not touch running
/// statistics (see update_running_stats).
inline ForwardResult forward(const ModelParams& p, const Batch& inputs, Branch branch, Mode mode) {
  const std::size_t n = p.config.n_in;
  if (inputs.empty()) throw SizeError("forward: empty batch");
  if (mode == Mode::kTrain && inputs.size() < 2) {
    throw BatchSizeError("forward: train mode needs a batch of at least 2 clouds");
  }
  ForwardResult res;
  ForwardCache& c = res.cache;
  c.branch = branch;
  c.mode = mode;
  c.batch = inputs.size();
  c.points = n;
  const auto rows = static_cast<Eigen::Index>(c.batch * n);
  c.x.resize(rows, 3);
  for (std::size_t b = 0; b < c.batch; ++b) {
    if (inputs[b].size() != n) {
      throw ValidationError("forward: cloud " + std::to_string(b) + " has " + std::to_string(inputs[b].size()) +
                            " points, expected " + std::to_string(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3& q = inputs[b][i];
      const auto r = static_cast<Eigen::Index>(b * n + i);
      c.x(r, 0) = q.x;
      c.x(r, 1) = q.y;
      c.x(r, 2) = q.z;
    }
  }
  const double eps = p.config.bn_eps;
  Matrix h1 = c.x * p.enc1.w;
  h1.rowwise() += p.enc1.b.row(0);
  c.a1 = detail::bn_forward(h1, p.bn1[branch], mode, eps, c.bn1);
  c.r1 = detail::relu(c.a1);
  c.f = c.r1 * p.enc2.w;
  c.f.rowwise() += p.enc2.b.row(0);
  const Matrix g = detail::maxpool(c.f, c.batch, n, c.arg_g);
  c.cat.resize(rows, 256);
  c.cat.leftCols(128) = c.f;
  for (std::size_t b = 0; b < c.batch; ++b) {
    c.cat.block(static_cast<Eigen::Index>(b * n), 128, static_cast<Eigen::Index>(n), 128).rowwise() =
        g.row(static_cast<Eigen::Index>(b));
  }
  Matrix h2 = c.cat * p.enc3.w;
  h2.rowwise() += p.enc3.b.row(0);
  c.a2 = detail::bn_forward(h2, p.bn2[branch], mode, eps, c.bn2);
  c.r2 = detail::relu(c.a2);
  c.code = detail::maxpool(c.r2, c.batch, n, c.arg_code);
  Matrix h3 = c.code * p.dec1.w;
  h3.rowwise() += p.dec1.b.row(0);
  c.a3 = detail::bn_forward(h3, p.bn3[branch], mode, eps, c.bn3);
  c.r3 = detail::relu(c.a3);
  c.out = c.r3 * p.dec2.w;
  c.out.rowwise() += p.dec2.b.row(0);

  res.predictions.resize(c.batch);
  for (std::size_t b = 0; b < c.batch; ++b) {
    std::vector<Vec3> pts(p.config.m_out);
    const auto r = static_cast<Eigen::Index>(b);
    for (std::size_t k = 0; k < p.config.m_out; ++k) {
      const auto j = static_cast<Eigen::Index>(3 * k);
      pts[k] = {c.out(r, j), c.out(r, j + 1), c.out(r, j + 2)};
    }
    res.predictions[b] = PointCloud(std::move(pts));
  }
  return res;
}

/// Folds the batch statistics of a train-mode pass into the running
/// statistics of the branch that pass used. The other branch is untouched.
inline void update_running_stats(ModelParams& p, const ForwardCache& c) {
  if (c.mode != Mode::kTrain) throw ValidationError("update_running_stats: needs a train-mode cache");
  const double m = p.config.bn_momentum;
  auto fold = [&](BatchNormParams& bn, const BnCache& bc, double count) {
    const double unbiased = count > 1 ? count / (count - 1) : 1.0;
    bn.running_mean = m * bn.running_mean + (1 - m) * bc.batch_mean;
    bn.running_var = m * bn.running_var + ((1 - m) * unbiased) * bc.batch_var;
  };
  const double point_rows = static_cast<double>(c.batch * c.points);
  fold(p.bn1[c.branch], c.bn1, point_rows);
  fold(p.bn2[c.branch], c.bn2, point_rows);
  fold(p.bn3[c.branch], c.bn3, static_cast<double>(c.batch));
}

/// Gradients with respect to the trainable tensors. Running statistics are
/// left zero; `touched` records which BN branch received gradient.
struct ParamGrads {
  ModelParams g;
  std::array<bool, 2> touched{false, false};

  ParamGrads& operator+=(const ParamGrads& o) {
    std::vector<Matrix*> mine;
    visit_tensors(g, [&](const std::string&, Matrix& t, TensorKind) { mine.push_back(&t); });
    std::size_t i = 0;
    visit_tensors(o.g, [&](const std::string&, const Matrix& t, TensorKind) { *mine[i++] += t; });
    touched[0] = touched[0] || o.touched[0];
    touched[1] = touched[1] || o.touched[1];
    return *this;
  }
};

inline ParamGrads zero_grads(const ModelParams& p) {
  ParamGrads z{p, {false, false}};
  visit_tensors(z.g, [](const std::string&, Matrix& t, TensorKind) { t.setZero(); });
  return z;
}

struct GradientBundle {
  double loss = 0.0;                   ///< mean over the batch of squared Chamfer
  std::vector<double> per_cloud_loss;  ///< squared Chamfer of each cloud
  std::vector<std::vector<Vec3>> input_grad;
  std::optional<ParamGrads> param_grad;
};

/// Loss = mean over clouds of squared Chamfer(prediction, gt), and its
/// exact gradients. Max-pool routes to the recorded argmax; BN uses the
/// batch-statistics formula for train-mode caches and the affine running
/// form for eval-mode ones.
inline GradientBundle backward(const ModelParams& p, const ForwardResult& fr, const Batch& gt,
                               bool want_param_grad = true) {
  const ForwardCache& c = fr.cache;
  if (gt.size() != c.batch) throw ValidationError("backward: gt batch does not match the forward batch");
  GradientBundle out;
  const auto batch = static_cast<Eigen::Index>(c.batch);
  const auto n = static_cast<Eigen::Index>(c.points);
  const std::size_t m_out = p.config.m_out;
  const double inv_b = 1.0 / static_cast<double>(c.batch);

  Matrix d_out(batch, static_cast<Eigen::Index>(3 * m_out));
  std::vector<double> losses(c.batch);
  for (std::size_t b = 0; b < c.batch; ++b) {
    losses[b] = squared_chamfer(fr.predictions[b], gt[b]);
    const auto cg = chamfer_gradient(fr.predictions[b], gt[b], true);
    for (std::size_t k = 0; k < m_out; ++k) {
      for (int a = 0; a < 3; ++a) d_out(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(3 * k + a)) = cg.grad[k][a] * inv_b;
    }
  }
  out.per_cloud_loss = losses;
  out.loss = pairwise_sum(losses) * inv_b;

  ParamGrads grads;
  ParamGrads* pg = nullptr;
  if (want_param_grad) {
    grads = zero_grads(p);
    grads.touched[static_cast<int>(c.branch)] = true;
    pg = &grads;
  }
  auto linear_grad = [&](Linear& gl, const Matrix& input, const Matrix& d) {
    gl.w.noalias() += input.transpose() * d;
    gl.b += d.colwise().sum();
  };

  if (pg) linear_grad(pg->g.dec2, c.r3, d_out);
  Matrix d_r3 = d_out * p.dec2.w.transpose();
  Matrix d_h3 = detail::bn_backward(detail::relu_grad(d_r3, c.a3), c.bn3, p.bn3[c.branch], c.mode,
                                    pg ? &pg->g.bn3[c.branch] : nullptr);
  if (pg) linear_grad(pg->g.dec1, c.code, d_h3);
  const Matrix d_code = d_h3 * p.dec1.w.transpose();

  Matrix d_r2 = Matrix::Zero(batch * n, 512);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index ch = 0; ch < 512; ++ch) d_r2(c.arg_code[static_cast<std::size_t>(b * 512 + ch)], ch) += d_code(b, ch);
  }
  Matrix d_h2 = detail::bn_backward(detail::relu_grad(d_r2, c.a2), c.bn2, p.bn2[c.branch], c.mode,
                                    pg ? &pg->g.bn2[c.branch] : nullptr);
  if (pg) linear_grad(pg->g.enc3, c.cat, d_h2);
  const Matrix d_cat = d_h2 * p.enc3.w.transpose();
  Matrix d_f = d_cat.leftCols(128);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const Eigen::RowVectorXd d_g = d_cat.block(b * n, 128, n, 128).colwise().sum();
    for (Eigen::Index ch = 0; ch < 128; ++ch) d_f(c.arg_g[static_cast<std::size_t>(b * 128 + ch)], ch) += d_g(ch);
  }
  if (pg) linear_grad(pg->g.enc2, c.r1, d_f);
  const Matrix d_r1 = d_f * p.enc2.w.transpose();
  const Matrix d_h1 = detail::bn_backward(detail::relu_grad(d_r1, c.a1), c.bn1, p.bn1[c.branch], c.mode,
                                          pg ? &pg->g.bn1[c.branch] : nullptr);
  if (pg) linear_grad(pg->g.enc1, c.x, d_h1);
  const Matrix d_x = d_h1 * p.enc1.w.transpose();

  out.input_grad.resize(c.batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    auto& ig = out.input_grad[static_cast<std::size_t>(b)];
    ig.resize(c.points);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index r = b * n + i;
      ig[static_cast<std::size_t>(i)] = {d_x(r, 0), d_x(r, 1), d_x(r, 2)};
    }
  }
  if (pg) out.param_grad = std::move(grads);
  return out;
}

/// Read-only copy of one branch's running statistics, per BN layer.
struct BnStats {
  std::vector<Matrix> mean, var;
};

inline BnStats bn_branch_stats(const ModelParams& p, Branch b) {
  return {{p.bn1[b].running_mean, p.bn2[b].running_mean, p.bn3[b].running_mean},
          {p.bn1[b].running_var, p.bn2[b].running_var, p.bn3[b].running_var}};
}

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double decay_factor = 0.7;
  std::size_t decay_interval = 5;  ///< epochs
};

/// Moments for every trainable tensor in visit order plus per-tensor step
/// counts: BN tensors of a branch that received no gradient in a step are
/// skipped entirely, so an unused branch never drifts.
struct OptimizerState {
  AdamConfig config;
  double lr = 0.001;
  std::uint64_t step = 0;
  std::vector<Matrix> m, v;
  std::vector<std::uint64_t> tensor_steps;
};

inline OptimizerState init_optimizer(const ModelParams& p, const AdamConfig& config) {
  if (!(config.lr > 0.0) || config.decay_interval == 0) throw ConfigError("adam: lr and decay interval must be positive");
  OptimizerState s;
  s.config = config;
  s.lr = config.lr;
  visit_tensors(p, [&](const std::string&, const Matrix& t, TensorKind k) {
    if (!is_trainable(k)) return;
    s.m.push_back(Matrix::Zero(t.rows(), t.cols()));
    s.v.push_back(Matrix::Zero(t.rows(), t.cols()));
    s.tensor_steps.push_back(0);
  });
  return s;
}

/// Sets the learning rate for `epoch` (0-based): lr * factor^(epoch / interval).
inline void begin_epoch(OptimizerState& s, std::size_t epoch) {
  s.lr = s.config.lr * std::pow(s.config.decay_factor, static_cast<double>(epoch / s.config.decay_interval));
}

/// Bias-corrected Adam update.
inline void adam_step(OptimizerState& s, ModelParams& p, const ParamGrads& grads) {
  std::vector<const Matrix*> gs;
  visit_tensors(grads.g, [&](const std::string&, const Matrix& t, TensorKind k) {
    if (is_trainable(k)) gs.push_back(&t);
  });
  if (gs.size() != s.m.size()) throw ValidationError("adam: gradient shape mismatch");
  std::size_t i = 0;
  bool ok = true;
  std::string bad;
  visit_tensors(grads.g, [&](const std::string& name, const Matrix& t, TensorKind k) {
    if (ok && is_trainable(k) && !t.allFinite()) {
      ok = false;
      bad = name;
    }
  });
  if (!ok) throw NumericError("adam: non-finite gradient in " + bad);
  ++s.step;
  const auto& cfg = s.config;
  visit_tensors(p, [&](const std::string& name, Matrix& t, TensorKind k) {
    if (!is_trainable(k)) return;
    const std::size_t idx = i++;
    if ((k == TensorKind::kAffineMain && !grads.touched[0]) || (k == TensorKind::kAffineAux && !grads.touched[1])) return;
    const Matrix& g = *gs[idx];
    if (g.rows() != t.rows() || g.cols() != t.cols()) throw ValidationError("adam: shape mismatch in " + name);
    const double step = static_cast<double>(++s.tensor_steps[idx]);
    s.m[idx] = cfg.beta1 * s.m[idx] + (1 - cfg.beta1) * g;
    s.v[idx] = cfg.beta2 * s.v[idx] + (1 - cfg.beta2) * g.cwiseProduct(g);
    const double c1 = 1 - std::pow(cfg.beta1, step);
    const double c2 = 1 - std::pow(cfg.beta2, step);
    t.array() -= s.lr * (s.m[idx].array() / c1) / ((s.v[idx].array() / c2).sqrt() + cfg.eps);
  });
}

}  // namespace curvadv
