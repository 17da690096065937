#pragma once

// Synthetic datasets, partial views, the clean + adversarial training loop
// with dual BN branches, and evaluation tables.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "curvadv/attack.hpp"
#include "curvadv/curvature.hpp"
#include "curvadv/io.hpp"
#include "curvadv/metrics.hpp"
#include "curvadv/random.hpp"
#include "curvadv/shapes.hpp"
#include "curvadv/tinynet.hpp"

namespace curvadv {

/// Keeps the ceil(keep_fraction * n) points nearest to `viewpoint` (ties to
/// the lower index), in their original order.
inline PointCloud partial_view(const PointCloud& complete, const Vec3& viewpoint, double keep_fraction) {
  validate_cloud(complete, "partial_view");
  if (!(keep_fraction > 0.0) || keep_fraction > 1.0) throw ValidationError("partial_view: keep fraction must lie in (0, 1]");
  const std::size_t n = complete.size();
  const auto keep = std::min(n, static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(n) - 1e-9)));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = squared_distance(complete[i], viewpoint);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
  idx.resize(std::max<std::size_t>(keep, 1));
  std::sort(idx.begin(), idx.end());
  std::vector<Vec3> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(complete[i]);
  return PointCloud(std::move(out));
}

// Dataset --------------------------------------------------------------------

struct Sample {
  std::string id;
  Category category = Category::kSphere;
  ShapeSpec spec;
  Vec3 viewpoint;
  PointCloud partial;  ///< clean network input, n_in points
  PointCloud gt;       ///< complete cloud
  CurvatureField frames;
};

enum class SplitKind { kTrain, kVal, kTest };

struct DatasetConfig {
  std::size_t per_category = 20;
  std::vector<Category> categories{kAllCategories.begin(), kAllCategories.end()};
  /// Categories sent entirely to the test split.
  std::vector<Category> holdout;
  double val_fraction = 0.15;
  double test_fraction = 0.15;
  double keep_fraction = 0.5;
  std::size_t n_in = 256;
  std::size_t complete_count = 1024;
  double viewpoint_distance = 2.0;
  std::uint64_t seed = 0;
  /// Orientation is replaced per sample by its viewpoint.
  CurvatureParams curvature;
  std::optional<std::filesystem::path> cache_dir;

  void validate() const {
    if (per_category == 0 || categories.empty()) throw ConfigError("dataset: needs at least one category and sample");
    if (val_fraction < 0 || test_fraction < 0 || val_fraction + test_fraction >= 1.0) {
      throw ConfigError("dataset: val and test fractions must be >= 0 and sum below 1");
    }
    if (n_in < 8 || complete_count < 8) throw ConfigError("dataset: point counts must be >= 8");
    curvature.validate();
  }
};

struct Dataset {
  std::vector<Sample> train, val, test;

  const std::vector<Sample>& split(SplitKind k) const { return k == SplitKind::kTrain ? train : k == SplitKind::kVal ? val : test; }
};

struct CacheStats {
  std::size_t hits = 0, misses = 0;
};

/// Randomized shape parameters for one sample.
inline ShapeSpec random_spec(Category c, Rng& rng) {
  switch (c) {
    case Category::kSphere: return ShapeSpec::sphere(uniform(rng, 0.35, 0.5));
    case Category::kCylinder: return ShapeSpec::cylinder(uniform(rng, 0.25, 0.4), uniform(rng, 0.6, 1.0), true);
    case Category::kTorus: return ShapeSpec::torus(uniform(rng, 0.3, 0.4), uniform(rng, 0.08, 0.15));
    case Category::kSaddle: return ShapeSpec::saddle(uniform(rng, 0.8, 1.5), uniform(rng, 0.35, 0.45));
    case Category::kBox: return ShapeSpec::box({uniform(rng, 0.2, 0.45), uniform(rng, 0.2, 0.45), uniform(rng, 0.2, 0.45)});
    case Category::kCone: return ShapeSpec::cone(uniform(rng, 0.3, 0.45), uniform(rng, 0.6, 1.0), true);
  }
  throw ValidationError("random_spec: unknown category");
}

inline Vec3 random_direction(Rng& rng) {
  for (;;) {
    const Vec3 v{uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)};
    const double n = norm(v);
    if (n > 1e-3 && n <= 1.0) return v / n;
  }
}

/// Frames of a sample's clean input, through the on-disk cache when one is
/// configured.
inline CurvatureField sample_frames(const Sample& s, const CurvatureParams& params,
                                    const std::optional<std::filesystem::path>& cache_dir, CacheStats& stats) {
  if (cache_dir) {
    const auto path = *cache_dir / (s.id + ".frames");
    const std::uint64_t hash = hash_cloud(s.partial);
    if (std::filesystem::exists(path)) {
      ++stats.hits;
      return load_frames_checked(path, params, hash, s.partial.size());
    }
    ++stats.misses;
    CurvatureField f = estimate_frames(s.partial, params);
    save_frames(path, f, hash);
    return f;
  }
  ++stats.misses;
  return estimate_frames(s.partial, params);
}

/// Deterministic under `config.seed`. Each category's samples are shuffled
/// and cut into val, test and train; held-out categories go to test whole.
inline Dataset build_dataset(const DatasetConfig& config, CacheStats* stats_out = nullptr) {
  config.validate();
  Dataset ds;
  CacheStats stats;
  for (std::size_t ci = 0; ci < config.categories.size(); ++ci) {
    const Category cat = config.categories[ci];
    const bool held = std::find(config.holdout.begin(), config.holdout.end(), cat) != config.holdout.end();
    std::vector<Sample> made;
    for (std::size_t k = 0; k < config.per_category; ++k) {
      const std::uint64_t seed = derive_seed(config.seed, (static_cast<std::uint64_t>(cat) << 32) | k);
      Rng rng(seed);
      Sample s;
      s.id = std::string(category_name(cat)) + "-" + std::string(4 - std::min<std::size_t>(4, std::to_string(k).size()), '0') +
             std::to_string(k);
      s.category = cat;
      s.spec = random_spec(cat, rng);
      s.spec.complete_count = config.complete_count;
      s.spec.input_count = config.n_in;
      s.spec.seed = derive_seed(seed, 1);
      s.gt = generate_shape(s.spec).cloud;
      s.viewpoint = config.viewpoint_distance * random_direction(rng);
      s.partial = resample_to(partial_view(s.gt, s.viewpoint, config.keep_fraction), config.n_in, rng);
      CurvatureParams cp = config.curvature;
      cp.orientation = Orientation::toward(s.viewpoint);
      s.frames = sample_frames(s, cp, config.cache_dir, stats);
      made.push_back(std::move(s));
    }
    if (held) {
      for (auto& s : made) ds.test.push_back(std::move(s));
      continue;
    }
    std::vector<std::size_t> order(made.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng split_rng(derive_seed(config.seed, 0xD5A7ull + ci));
    std::shuffle(order.begin(), order.end(), split_rng);
    const auto n = static_cast<double>(made.size());
    const auto n_val = static_cast<std::size_t>(std::llround(config.val_fraction * n));
    const auto n_test = static_cast<std::size_t>(std::llround(config.test_fraction * n));
    for (std::size_t r = 0; r < order.size(); ++r) {
      Sample& s = made[order[r]];
      (r < n_val ? ds.val : r < n_val + n_test ? ds.test : ds.train).push_back(std::move(s));
    }
  }
  for (auto* split : {&ds.train, &ds.val, &ds.test}) {
    std::sort(split->begin(), split->end(), [](const Sample& a, const Sample& b) { return a.id < b.id; });
  }
  if (stats_out) *stats_out = stats;
  return ds;
}

// Evaluation -----------------------------------------------------------------

struct EvalOptions {
  bool attack = true;
  AttackKind kind = AttackKind::kPgd;
  PerturbationBudget budget{.epsilon = 0.01, .step = 0.005, .iterations = 5};
  /// Outlier threshold; 2 epsilon when unset.
  std::optional<double> outlier_threshold;
  std::size_t batch_size = 8;

  static EvalOptions clean_only() {
    EvalOptions o;
    o.attack = false;
    return o;
  }
};

struct CategoryRow {
  Category category;
  std::size_t count = 0;
  double clean_cd = 0.0;
  std::optional<double> adv_cd;
};

struct EvalReport {
  std::vector<CategoryRow> rows;  ///< categories in enum order
  double clean_mean = 0.0;        ///< over samples
  std::optional<double> adv_mean;
  double clean_category_average = 0.0;  ///< over category rows
  std::optional<double> adv_category_average;
  std::vector<double> clean_per_sample, adv_per_sample;
  std::size_t outlier_count = 0;
  std::size_t point_count = 0;
  double outlier_threshold = 0.0;
  std::vector<PointCloud> adversarial;  ///< attacked inputs, sample order
};

inline Batch completions(const ModelParams& params, const Batch& inputs) {
  return forward(params, inputs, Branch::kMain, Mode::kEval).predictions;
}

/// Squared Chamfer of the main branch's eval-mode completion, clean and
/// optionally under attack.
inline EvalReport evaluate(const ModelParams& params, const std::vector<Sample>& samples, const EvalOptions& opt = {}) {
  if (samples.empty()) throw SizeError("evaluate: no samples");
  if (opt.batch_size == 0) throw ConfigError("evaluate: batch size must be positive");
  EvalReport rep;
  rep.outlier_threshold = opt.outlier_threshold.value_or(2.0 * opt.budget.epsilon);
  for (std::size_t start = 0; start < samples.size(); start += opt.batch_size) {
    const std::size_t end = std::min(samples.size(), start + opt.batch_size);
    Batch x, gt;
    std::vector<const CurvatureField*> frames;
    for (std::size_t i = start; i < end; ++i) {
      x.push_back(samples[i].partial);
      gt.push_back(samples[i].gt);
      frames.push_back(&samples[i].frames);
    }
    const Batch pred = completions(params, x);
    for (std::size_t b = 0; b < x.size(); ++b) rep.clean_per_sample.push_back(squared_chamfer(pred[b], gt[b]));
    if (opt.attack) {
      const Batch adv = run_attack(model_oracle(params, gt, Branch::kMain, Mode::kEval), x, x, frames, opt.kind, opt.budget);
      const Batch adv_pred = completions(params, adv);
      for (std::size_t b = 0; b < x.size(); ++b) {
        rep.adv_per_sample.push_back(squared_chamfer(adv_pred[b], gt[b]));
        const OutlierReport o = outlier_score(adv[b], x[b], rep.outlier_threshold);
        rep.outlier_count += o.count;
        rep.point_count += adv[b].size();
        rep.adversarial.push_back(adv[b]);
      }
    }
  }
  auto mean = [](const std::vector<double>& v) { return pairwise_sum(v) / static_cast<double>(v.size()); };
  rep.clean_mean = mean(rep.clean_per_sample);
  if (opt.attack) rep.adv_mean = mean(rep.adv_per_sample);
  std::vector<double> cat_clean, cat_adv;
  for (Category c : kAllCategories) {
    std::vector<double> cl, ad;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (samples[i].category != c) continue;
      cl.push_back(rep.clean_per_sample[i]);
      if (opt.attack) ad.push_back(rep.adv_per_sample[i]);
    }
    if (cl.empty()) continue;
    CategoryRow row{c, cl.size(), mean(cl), std::nullopt};
    if (opt.attack) row.adv_cd = mean(ad);
    cat_clean.push_back(row.clean_cd);
    if (row.adv_cd) cat_adv.push_back(*row.adv_cd);
    rep.rows.push_back(row);
  }
  rep.clean_category_average = mean(cat_clean);
  if (opt.attack) rep.adv_category_average = mean(cat_adv);
  return rep;
}

// Training -------------------------------------------------------------------

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  double lr_baseline = 0.001;
  double lr_adversarial = 0.0005;
  double decay_factor = 0.7;
  std::size_t decay_interval = 5;
  std::size_t reset_period = 15;
  /// Off gives the baseline: no attack, main BN branch only.
  bool adversarial = true;
  AttackKind attack = AttackKind::kPmpd;
  PerturbationBudget budget;  ///< training attack, one step of size epsilon by default
  EvalOptions eval;           ///< per-epoch validation; PGD-5 at step epsilon/2
  bool log_adv_val = true;
  NetConfig net;
  std::uint64_t seed = 0;

  double learning_rate() const { return adversarial ? lr_adversarial : lr_baseline; }

  void validate() const {
    if (epochs == 0) throw ConfigError("train: epochs must be positive");
    if (batch_size < 2) throw ConfigError("train: batch size must be >= 2");
    if (reset_period == 0 || reset_period > epochs) throw ConfigError("train: reset period must lie in [1, epochs]");
    if (!(learning_rate() > 0.0)) throw ConfigError("train: learning rate must be positive");
    if (decay_interval == 0) throw ConfigError("train: decay interval must be positive");
    budget.validate();
    eval.budget.validate();
  }
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double lr = 0.0;
  double clean_train_cd = 0.0;  ///< eval-mode score of the training split after the epoch
  double adv_train_cd = std::numeric_limits<double>::quiet_NaN();  ///< mean adversarial step loss; NaN for the baseline
  double clean_val_cd = std::numeric_limits<double>::quiet_NaN();
  double adv_val_cd = std::numeric_limits<double>::quiet_NaN();
};

/// Per-step losses, reported to an optional observer.
struct StepInfo {
  std::size_t epoch = 0, step = 0;
  std::vector<std::string> ids;
  double clean_loss = 0.0;
  std::optional<double> adv_loss;
  double total_loss = 0.0;
  const Batch* clean = nullptr;
  const Batch* adversarial = nullptr;
  const Batch* gt = nullptr;
};

/// Observers see the parameters before the step's update.
struct TrainHooks {
  std::function<void(const StepInfo&, const ModelParams&)> on_step;
  std::function<void(const EpochMetrics&, const ModelParams&)> on_epoch;
  /// Called at the start of each epoch, before any attack.
  std::function<void(std::size_t, const AdvStore&)> on_epoch_start;
};

struct TrainResult {
  ModelParams params;
  OptimizerState optimizer;
  AdvStore store;
  std::vector<EpochMetrics> log;
  double initial_clean_val_cd = std::numeric_limits<double>::quiet_NaN();
};

/// Training batches of an epoch: a seeded shuffle cut into batch_size
/// chunks; a trailing single sample is dropped since BN needs two.
inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                           std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0xE70Cull + epoch));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < n; s += batch_size) {
    std::vector<std::size_t> b(order.begin() + static_cast<std::ptrdiff_t>(s),
                               order.begin() + static_cast<std::ptrdiff_t>(std::min(n, s + batch_size)));
    if (b.size() >= 2) out.push_back(std::move(b));
  }
  return out;
}

inline TrainResult train(const TrainConfig& config, const Dataset& data, const TrainHooks& hooks = {}) {
  config.validate();
  if (data.train.size() < 2) throw SizeError("train: needs at least two training samples");
  if (config.adversarial && needs_frames(config.attack)) {
    for (const Sample& s : data.train) {
      if (s.frames.size() != s.partial.size()) throw ConfigError("train: sample '" + s.id + "' lacks curvature frames");
    }
  }
  NetConfig net = config.net;
  net.n_in = data.train.front().partial.size();
  TrainResult res{init_params(net, derive_seed(config.seed, 0x1417ull)), {}, AdvStore(config.reset_period), {}, {}};
  AdamConfig adam;
  adam.lr = config.learning_rate();
  adam.decay_factor = config.decay_factor;
  adam.decay_interval = config.decay_interval;
  res.optimizer = init_optimizer(res.params, adam);
  for (const Sample& s : data.train) res.store.init(s.id, s.partial);
  EvalOptions val_opt = config.eval;
  val_opt.attack = config.log_adv_val;
  if (!data.val.empty()) res.initial_clean_val_cd = evaluate(res.params, data.val, EvalOptions::clean_only()).clean_mean;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    begin_epoch(res.optimizer, epoch);
    if (hooks.on_epoch_start) hooks.on_epoch_start(epoch, res.store);
    std::vector<double> adv_losses;
    const auto batches = epoch_batches(data.train.size(), config.batch_size, config.seed, epoch);
    for (std::size_t step = 0; step < batches.size(); ++step) {
      StepInfo info;
      info.epoch = epoch;
      info.step = step;
      Batch x, gt;
      std::vector<const CurvatureField*> frames;
      for (std::size_t i : batches[step]) {
        const Sample& s = data.train[i];
        info.ids.push_back(s.id);
        x.push_back(s.partial);
        gt.push_back(s.gt);
        frames.push_back(&s.frames);
      }
      info.clean = &x;
      info.gt = &gt;
      std::optional<Batch> adv;
      if (config.adversarial) {
        adv = advance_store(res.store, epoch, info.ids, frames, config.attack, config.budget,
                            model_oracle(res.params, gt, Branch::kAux, Mode::kTrain));
        info.adversarial = &*adv;
      }
      const ForwardResult clean_fr = forward(res.params, x, Branch::kMain, Mode::kTrain);
      GradientBundle clean_g = backward(res.params, clean_fr, gt);
      ParamGrads grads = std::move(*clean_g.param_grad);
      info.clean_loss = clean_g.loss;
      info.total_loss = clean_g.loss;
      std::optional<ForwardResult> adv_fr;
      if (adv) {
        adv_fr = forward(res.params, *adv, Branch::kAux, Mode::kTrain);
        GradientBundle adv_g = backward(res.params, *adv_fr, gt);
        grads += *adv_g.param_grad;
        info.adv_loss = adv_g.loss;
        info.total_loss = clean_g.loss + adv_g.loss;
        adv_losses.push_back(adv_g.loss);
      }
      if (!std::isfinite(info.total_loss)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + " step " + std::to_string(step));
      }
      if (hooks.on_step) hooks.on_step(info, res.params);
      try {
        adam_step(res.optimizer, res.params, grads);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + " step " + std::to_string(step) + ")");
      }
      update_running_stats(res.params, clean_fr.cache);
      if (adv_fr) update_running_stats(res.params, adv_fr->cache);
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.lr = res.optimizer.lr;
    m.clean_train_cd = evaluate(res.params, data.train, EvalOptions::clean_only()).clean_mean;
    if (!adv_losses.empty()) m.adv_train_cd = pairwise_sum(adv_losses) / static_cast<double>(adv_losses.size());
    if (!data.val.empty()) {
      const EvalReport v = evaluate(res.params, data.val, val_opt);
      m.clean_val_cd = v.clean_mean;
      if (v.adv_mean) m.adv_val_cd = *v.adv_mean;
    }
    res.log.push_back(m);
    if (hooks.on_epoch) hooks.on_epoch(m, res.params);
  }
  return res;
}

/// Metrics log: a header line, then one comma-separated line per epoch.
inline std::string format_metrics(const std::vector<EpochMetrics>& log) {
  std::string out = "epoch,lr,clean_train_cd,adv_train_cd,clean_val_cd,adv_val_cd\n";
  for (const EpochMetrics& m : log) {
    out += std::to_string(m.epoch) + "," + format_double(m.lr) + "," + format_double(m.clean_train_cd) + "," +
           format_double(m.adv_train_cd) + "," + format_double(m.clean_val_cd) + "," + format_double(m.adv_val_cd) + "\n";
  }
  return out;
}

}  // namespace curvadv
