#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "curvadv/cloud.hpp"
#include "curvadv/curvature.hpp"
#include "curvadv/errors.hpp"
#include "curvadv/metrics.hpp"
#include "curvadv/tinynet.hpp"

namespace curvadv {

enum class AttackKind { kPgd, kGd, kPmcd, kPmpd };
enum class NormKind { kLinf, kL2 };

inline const char* attack_name(AttackKind k) {
  switch (k) {
    case AttackKind::kPgd: return "pgd";
    case AttackKind::kGd: return "gd";
    case AttackKind::kPmcd: return "pmcd";
    case AttackKind::kPmpd: return "pmpd";
  }
  return "?";
}

inline AttackKind parse_attack(const std::string& s) {
  for (AttackKind k : {AttackKind::kPgd, AttackKind::kGd, AttackKind::kPmcd, AttackKind::kPmpd}) {
    if (s == attack_name(k)) return k;
  }
  throw ValidationError("unknown attack kind '" + s + "'");
}

inline const char* norm_name(NormKind n) { return n == NormKind::kLinf ? "linf" : "l2"; }

inline NormKind parse_norm(const std::string& s) {
  if (s == "linf") return NormKind::kLinf;
  if (s == "l2") return NormKind::kL2;
  throw ValidationError("unknown norm '" + s + "' (expected linf or l2)");
}

inline bool needs_frames(AttackKind k) { return k != AttackKind::kPgd; }

/// Allowed perturbation space S (a per-point ball) and the iteration plan.
struct PerturbationBudget {
  double epsilon = 0.01;
  NormKind norm = NormKind::kLinf;
  std::optional<double> step;  ///< defaults to epsilon
  std::size_t iterations = 1;
  /// Scale each point's frame-based increment to unit length, so a step
  /// moves a point by `step` along the chosen direction the way sign()
  /// does for PGD. Off gives the literal step * (g . d) d.
  bool unit_directions = true;

  double requested_step() const { return step.value_or(epsilon); }
  /// Steps above 2 epsilon always overshoot S and are clipped.
  double effective_step() const { return std::min(requested_step(), 2.0 * epsilon); }
  std::optional<std::string> warning() const {
    if (requested_step() > 2.0 * epsilon) return "attack step exceeds 2*epsilon and is clipped to it";
    return std::nullopt;
  }

  void validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ValidationError("budget: epsilon must be positive");
    if (!(requested_step() >= 0.0) || !std::isfinite(requested_step())) throw ValidationError("budget: step must be >= 0");
    if (iterations < 1) throw ValidationError("budget: iterations must be >= 1");
  }
};

/// Largest per-point deviation of `adv` from `clean` under `norm`.
inline double max_deviation(const PointCloud& adv, const PointCloud& clean, NormKind norm) {
  if (adv.size() != clean.size()) throw ValidationError("max_deviation: clouds differ in size");
  double worst = 0.0;
  for (std::size_t i = 0; i < adv.size(); ++i) {
    const Vec3 d = adv[i] - clean[i];
    worst = std::max(worst, norm == NormKind::kLinf ? max_abs_component(d) : ::curvadv::norm(d));
  }
  return worst;
}

/// Projection onto clean + S.
inline PointCloud project_to_S(const PointCloud& adv, const PointCloud& clean, const PerturbationBudget& budget) {
  if (adv.size() != clean.size()) throw ValidationError("project_to_S: clouds differ in size");
  const double eps = budget.epsilon;
  PointCloud out = adv;
  for (std::size_t i = 0; i < adv.size(); ++i) {
    const Vec3& c = clean[i];
    Vec3& p = out[i];
    if (budget.norm == NormKind::kLinf) {
      for (int a = 0; a < 3; ++a) p[a] = std::clamp(p[a], c[a] - eps, c[a] + eps);
    } else {
      // The slack keeps a second projection from rescaling a rounded result.
      const Vec3 d = p - c;
      const double len = norm(d);
      if (len > eps * (1.0 + 1e-12)) p = c + d * (eps / len);
    }
  }
  return out;
}

namespace detail {

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

/// Per-point perturbation for one attack step from the loss gradient `g`.
///   PGD   sign(g)
///   GD    g - (g . n) n
///   PMCD  (g . d_min) d_min
///   PMPD  (g . d_m) d_m
inline std::vector<Vec3> perturbation_direction(AttackKind kind, const std::vector<Vec3>& g,
                                                const CurvatureField* frames) {
  if (needs_frames(kind)) {
    if (!frames) throw ConfigError(std::string(attack_name(kind)) + " attack needs a curvature field");
    if (frames->size() != g.size()) throw ValidationError("perturbation_direction: frame count differs from cloud size");
  }
  std::vector<Vec3> d(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    switch (kind) {
      case AttackKind::kPgd: d[i] = {detail::sign(g[i].x), detail::sign(g[i].y), detail::sign(g[i].z)}; break;
      case AttackKind::kGd: {
        const Vec3& n = (*frames)[i].normal;
        d[i] = g[i] - dot(g[i], n) * n;
        break;
      }
      case AttackKind::kPmcd: {
        const Vec3& m = (*frames)[i].min_dir();
        d[i] = dot(g[i], m) * m;
        break;
      }
      case AttackKind::kPmpd: {
        const Vec3& m = (*frames)[i].mean_dir;
        d[i] = dot(g[i], m) * m;
        break;
      }
    }
  }
  return d;
}

/// Loss and per-point input gradient for every cloud of a batch.
struct BatchLossGradient {
  std::vector<double> loss;
  std::vector<std::vector<Vec3>> grad;
};
using BatchGradientOracle = std::function<BatchLossGradient(const Batch&)>;

/// Model-free oracle: loss of cloud b is chamfer(x_b, gt_b).
inline BatchGradientOracle chamfer_oracle(Batch gt, bool squared = false) {
  return [gt = std::move(gt), squared](const Batch& x) {
    if (x.size() != gt.size()) throw ValidationError("chamfer_oracle: batch size mismatch");
    BatchLossGradient r;
    for (std::size_t b = 0; b < x.size(); ++b) {
      r.loss.push_back(chamfer(x[b], gt[b], squared).total);
      r.grad.push_back(chamfer_gradient(x[b], gt[b], squared).grad);
    }
    return r;
  };
}

/// Oracle backed by the network: squared Chamfer of the completion against
/// gt through the given BN branch and mode. Running statistics are never
/// updated by attack passes.
inline BatchGradientOracle model_oracle(const ModelParams& params, Batch gt, Branch branch, Mode mode) {
  return [&params, gt = std::move(gt), branch, mode](const Batch& x) {
    const auto fr = forward(params, x, branch, mode);
    auto g = backward(params, fr, gt, false);
    BatchLossGradient r;
    r.loss = std::move(g.per_cloud_loss);
    r.grad = std::move(g.input_grad);
    return r;
  };
}

/// Called with the iteration index and the per-point increments of every
/// cloud, before scaling and projection.
using StepObserver = std::function<void(std::size_t, const std::vector<std::vector<Vec3>>&)>;

/// k iterations of x <- project(x + step * delta(grad)) starting from
/// x_start, for every cloud of the batch at once. `frames[b]` may be null for
/// PGD.
inline Batch run_attack(const BatchGradientOracle& oracle, const Batch& x_start, const Batch& clean,
                        const std::vector<const CurvatureField*>& frames, AttackKind kind,
                        const PerturbationBudget& budget, const StepObserver& observer = {}) {
  budget.validate();
  if (x_start.size() != clean.size()) throw ValidationError("run_attack: start and clean batches differ");
  if (needs_frames(kind) && frames.size() != clean.size()) throw ConfigError("run_attack: one curvature field per cloud required");
  for (std::size_t b = 0; b < clean.size(); ++b) {
    if (max_deviation(x_start[b], clean[b], budget.norm) > budget.epsilon + 1e-9) {
      throw ValidationError("run_attack: starting cloud " + std::to_string(b) + " lies outside the budget");
    }
  }
  const double step = budget.effective_step();
  Batch x = x_start;
  if (step == 0.0) return x;
  for (std::size_t it = 0; it < budget.iterations; ++it) {
    const BatchLossGradient lg = oracle(x);
    std::vector<std::vector<Vec3>> deltas(x.size());
    for (std::size_t b = 0; b < x.size(); ++b) {
      deltas[b] = perturbation_direction(kind, lg.grad[b], needs_frames(kind) ? frames[b] : nullptr);
      if (budget.unit_directions && kind != AttackKind::kPgd) {
        for (Vec3& d : deltas[b]) {
          const double len = norm(d);
          d = len > 0.0 ? d / len : Vec3{};
        }
      }
    }
    if (observer) observer(it, deltas);
    for (std::size_t b = 0; b < x.size(); ++b) {
      PointCloud moved = x[b];
      for (std::size_t i = 0; i < moved.size(); ++i) moved[i] += step * deltas[b][i];
      x[b] = project_to_S(moved, clean[b], budget);
    }
  }
  return x;
}

/// Single-cloud convenience wrapper.
inline PointCloud run_attack(const BatchGradientOracle& oracle, const PointCloud& x_start, const PointCloud& clean,
                             const CurvatureField* frames, AttackKind kind, const PerturbationBudget& budget) {
  return run_attack(oracle, Batch{x_start}, Batch{clean}, {frames}, kind, budget)[0];
}

/// Adversarial clouds carried across epochs, keyed by sample id.
class AdvStore {
 public:
  explicit AdvStore(std::size_t reset_period = 15) : reset_period_(reset_period) {
    if (reset_period == 0) throw ConfigError("adv store: reset period must be positive");
  }

  std::size_t reset_period() const noexcept { return reset_period_; }
  std::size_t epoch() const noexcept { return epoch_; }
  void set_epoch(std::size_t e) noexcept { epoch_ = e; }
  bool reset_due(std::size_t epoch) const noexcept { return epoch % reset_period_ == 0; }
  std::size_t size() const noexcept { return entries_.size(); }

  /// Starts a sample at its clean cloud.
  void init(const std::string& id, const PointCloud& clean) { entries_[id] = {clean, clean}; }

  const PointCloud& adversarial(const std::string& id) const { return entry(id).adv; }
  const PointCloud& clean(const std::string& id) const { return entry(id).clean; }

  /// Reinstates a persisted entry as is.
  void restore(const std::string& id, const PointCloud& clean, const PointCloud& adv) {
    if (clean.size() != adv.size()) throw ValidationError("adv store: clean and adversarial clouds differ in size");
    entries_[id] = {clean, adv};
  }

  void reset(const std::string& id) {
    Entry& e = entry(id);
    e.adv = e.clean;
  }

  void put(const std::string& id, const PointCloud& adv, const PerturbationBudget& budget) {
    Entry& e = entry(id);
    if (max_deviation(adv, e.clean, budget.norm) > budget.epsilon + 1e-9) {
      throw ValidationError("adv store: cloud for '" + id + "' violates the budget");
    }
    e.adv = adv;
  }

  /// Ids in sorted order.
  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
  }

 private:
  struct Entry {
    PointCloud clean, adv;
  };

  Entry& entry(const std::string& id) {
    auto it = entries_.find(id);
    if (it == entries_.end()) throw LookupError("adv store: unknown sample id '" + id + "'");
    return it->second;
  }
  const Entry& entry(const std::string& id) const { return const_cast<AdvStore*>(this)->entry(id); }

  std::size_t reset_period_;
  std::size_t epoch_ = 0;
  std::map<std::string, Entry> entries_;
};

/// One training step's attack: resets the batch to clean on reset epochs,
/// attacks from the stored clouds and writes the results back.
inline Batch advance_store(AdvStore& store, std::size_t epoch, const std::vector<std::string>& ids,
                           const std::vector<const CurvatureField*>& frames, AttackKind kind,
                           const PerturbationBudget& budget, const BatchGradientOracle& oracle) {
  store.set_epoch(epoch);
  Batch start, clean;
  for (const std::string& id : ids) {
    if (store.reset_due(epoch)) store.reset(id);
    start.push_back(store.adversarial(id));
    clean.push_back(store.clean(id));
  }
  Batch adv = run_attack(oracle, start, clean, frames, kind, budget);
  for (std::size_t b = 0; b < ids.size(); ++b) store.put(ids[b], adv[b], budget);
  return adv;
}

}  // namespace curvadv
