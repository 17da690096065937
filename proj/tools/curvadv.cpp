// curvadv command-line tool: dataset generation, curvature frames, attacks,
// training and evaluation. Exit codes: 0 success, 1 invalid input or
// configuration, 2 file or cache problems.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "curvadv/config.hpp"

using namespace curvadv;

namespace {

Vec3 parse_vec3(const std::string& s, const char* what) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  for (std::string p; std::getline(ss, p, ',');) parts.push_back(p);
  if (parts.size() != 3) throw ValidationError(std::string(what) + ": expected x,y,z");
  try {
    return detail::parse_vec(parts, 0, 1);
  } catch (const ParseError&) {
    throw ValidationError(std::string(what) + ": expected three numbers, got '" + s + "'");
  }
}

struct GenData {
  std::string config, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> per_category;
};

int run_gen_data(const GenData& a) {
  DatasetConfig c = a.config.empty() ? DatasetConfig{} : dataset_config_from_json(read_json_file(a.config));
  if (a.seed) c.seed = *a.seed;
  if (a.per_category) c.per_category = *a.per_category;
  CacheStats stats;
  const Dataset ds = generate_dataset_dir(c, a.out, &stats);
  std::vector<std::filesystem::path> inputs;
  if (!a.config.empty()) inputs.push_back(a.config);
  c.cache_dir.reset();
  write_manifest(a.out, "gen-data", to_json(c), c.seed, inputs);
  std::printf("train %zu val %zu test %zu (frames computed %zu, cached %zu)\n", ds.train.size(), ds.val.size(),
              ds.test.size(), stats.misses, stats.hits);
  return 0;
}

struct Curv {
  std::string input, out, viewpoint, rule = "section-fit";
  std::size_t kp = 20, kn = 10, kd = 18;
  std::optional<double> step;
};

int run_curvature(const Curv& a) {
  CurvatureParams p;
  p.k_p = a.kp;
  p.k_n = a.kn;
  p.k_d = a.kd;
  p.rotation_step = a.step;
  if (!a.viewpoint.empty()) p.orientation = Orientation::toward(parse_vec3(a.viewpoint, "--viewpoint"));
  if (a.rule == "intersection") {
    p.rule = VariationRule::kIntersection;
  } else if (a.rule != "section-fit") {
    throw ValidationError("--rule: expected section-fit or intersection");
  }
  const PointCloud cloud = load_cloud(a.input);
  const CurvatureField f = estimate_frames(cloud, p);
  save_frames(a.out, f, hash_cloud(cloud));
  write_manifest(a.out, "curvature", to_json(p), 0, {a.input});
  std::printf("%zu frames -> %s\n", f.size(), a.out.c_str());
  return 0;
}

struct Atk {
  std::string cloud, gt, frames, checkpoint, out, kind = "pmpd", norm = "linf";
  double eps = 0.01;
  std::optional<double> step;
  std::size_t iters = 1;
  std::uint64_t seed = 0;
};

int run_attack_cmd(const Atk& a) {
  PerturbationBudget b;
  b.epsilon = a.eps;
  b.norm = parse_norm(a.norm);
  b.step = a.step;
  b.iterations = a.iters;
  b.validate();
  if (auto w = b.warning()) std::fprintf(stderr, "warning: %s\n", w->c_str());
  const AttackKind kind = parse_attack(a.kind);
  const PointCloud clean = load_cloud(a.cloud);
  const PointCloud gt = load_cloud(a.gt);
  std::optional<CurvatureField> frames;
  std::vector<std::filesystem::path> inputs{a.cloud, a.gt};
  if (!a.frames.empty()) {
    FramesFile ff = load_frames(a.frames);
    if (ff.source_hash && *ff.source_hash != hash_cloud(clean)) {
      throw StaleCacheError(a.frames + ": frames belong to a different cloud");
    }
    if (ff.field.size() != clean.size()) throw StaleCacheError(a.frames + ": frame count differs from the cloud size");
    frames = std::move(ff.field);
    inputs.push_back(a.frames);
  } else if (needs_frames(kind)) {
    throw ConfigError(a.kind + " attack needs --frames");
  }
  const CurvatureField* fp = frames ? &*frames : nullptr;
  PointCloud adv;
  if (a.checkpoint.empty()) {
    adv = run_attack(chamfer_oracle({gt}, true), clean, clean, fp, kind, b);
  } else {
    const Checkpoint ck = load_checkpoint(a.checkpoint);
    inputs.push_back(a.checkpoint);
    if (clean.size() != ck.params.config.n_in) {
      throw ValidationError("cloud has " + std::to_string(clean.size()) + " points, the model expects " +
                            std::to_string(ck.params.config.n_in));
    }
    // Batch statistics are never needed: the model is attacked in eval mode.
    adv = run_attack(model_oracle(ck.params, {gt}, Branch::kMain, Mode::kEval), clean, clean, fp, kind, b);
  }
  save_cloud(a.out, adv);
  Json cfg{{"kind", attack_name(kind)}, {"budget", to_json(b)}, {"model", !a.checkpoint.empty()}};
  write_manifest(a.out, "attack", cfg, a.seed, inputs);
  std::printf("max deviation %s -> %s\n", format_double(max_deviation(adv, clean, b.norm)).c_str(), a.out.c_str());
  return 0;
}

struct Train {
  std::string config, data, out, mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
};

int run_train(const Train& a) {
  TrainConfig c = a.config.empty() ? TrainConfig{} : train_config_from_json(read_json_file(a.config));
  if (a.seed) c.seed = *a.seed;
  if (a.epochs) {
    c.epochs = *a.epochs;
    c.reset_period = std::min(c.reset_period, c.epochs);
  }
  if (a.mode == "baseline") {
    c.adversarial = false;
  } else if (a.mode == "adversarial") {
    c.adversarial = true;
  } else if (!a.mode.empty()) {
    throw ValidationError("--mode: expected baseline or adversarial");
  }
  c.validate();
  const Dataset ds = load_dataset_dir(a.data);
  TrainHooks hooks;
  hooks.on_epoch = [](const EpochMetrics& m, const ModelParams&) {
    std::fprintf(stderr, "epoch %zu clean_val_cd %s\n", m.epoch, format_double(m.clean_val_cd).c_str());
  };
  const TrainResult r = train(c, ds, hooks);
  save_checkpoint(a.out + ".ckpt", {r.params, r.optimizer, c.epochs});
  write_file(a.out + ".metrics.csv", format_metrics(r.log));
  if (c.adversarial) save_store(a.out + ".store", r.store);
  std::vector<std::filesystem::path> inputs{a.data};
  if (!a.config.empty()) inputs.push_back(a.config);
  write_manifest(a.out, "train", to_json(c), c.seed, inputs);
  std::printf("final clean_train_cd %s clean_val_cd %s -> %s.ckpt\n", format_double(r.log.back().clean_train_cd).c_str(),
              format_double(r.log.back().clean_val_cd).c_str(), a.out.c_str());
  return 0;
}

struct Eval {
  std::string checkpoint, data, split = "test", attack = "pgd5", out;
  double eps = 0.01;
};

int run_eval(const Eval& a) {
  EvalOptions opt;
  if (a.attack == "none") {
    opt.attack = false;
  } else if (a.attack != "pgd5") {
    throw ValidationError("--attack: expected pgd5 or none");
  }
  opt.budget = {.epsilon = a.eps, .step = a.eps / 2, .iterations = 5};
  opt.budget.validate();
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const Dataset ds = load_dataset_dir(a.data);
  const auto& samples = ds.split(parse_split(a.split));
  if (samples.empty()) throw SizeError("split '" + a.split + "' is empty");
  const EvalReport rep = evaluate(ck.params, samples, opt);
  Json j = to_json(rep);
  j["split"] = a.split;
  j["attack"] = a.attack;
  const std::string text = j.dump(2) + "\n";
  if (a.out.empty()) {
    std::fwrite(text.data(), 1, text.size(), stdout);
  } else {
    write_file(a.out, text);
    write_manifest(a.out, "eval", to_json(opt), 0, {a.checkpoint, a.data});
    for (const CategoryRow& row : rep.rows) {
      std::printf("%-9s %3zu clean %s adv %s\n", std::string(category_name(row.category)).c_str(), row.count,
                  format_double(row.clean_cd).c_str(), row.adv_cd ? format_double(*row.adv_cd).c_str() : "-");
    }
  }
  return 0;
}

struct Outl {
  std::string adv, clean, out;
  double eps = 0.01;
  std::optional<double> threshold;
};

int run_outliers(const Outl& a) {
  const double t = a.threshold.value_or(2 * a.eps);
  const OutlierReport r = outlier_score(load_cloud(a.adv), load_cloud(a.clean), t);
  Json j{{"threshold", t}, {"count", r.count}, {"fraction", r.fraction}, {"indices", r.offending_indices}};
  const std::string text = j.dump(2) + "\n";
  if (a.out.empty()) {
    std::fwrite(text.data(), 1, text.size(), stdout);
  } else {
    write_file(a.out, text);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometry-aware adversarial training for point-cloud completion", "curvadv"};
  app.require_subcommand(1);
  app.set_version_flag("--version", CURVADV_VERSION);

  GenData gd;
  auto* c_gen = app.add_subcommand("gen-data", "Generate a synthetic dataset directory with cached frames");
  c_gen->add_option("--config", gd.config, "Dataset JSON config");
  c_gen->add_option("-o,--out", gd.out, "Output directory")->required();
  c_gen->add_option("--seed", gd.seed, "Overrides the config seed");
  c_gen->add_option("--per-category", gd.per_category, "Samples per category");

  Curv cv;
  auto* c_curv = app.add_subcommand("curvature", "Estimate normals and principal directions of a cloud");
  c_curv->add_option("input", cv.input, "Cloud file (.xyz or .ply)")->required();
  c_curv->add_option("-o,--out", cv.out, "Frames file")->required();
  c_curv->add_option("--kp", cv.kp, "Neighbors for normal estimation");
  c_curv->add_option("--kn", cv.kn, "Neighbor normals per point");
  c_curv->add_option("--kd", cv.kd, "Rotated direction pairs");
  c_curv->add_option("--step", cv.step, "Rotation step in radians (default (pi/2)/kd)");
  c_curv->add_option("--viewpoint", cv.viewpoint, "Orient normals toward x,y,z (default: upper hemisphere)");
  c_curv->add_option("--rule", cv.rule, "section-fit or intersection");

  Atk at;
  auto* c_atk = app.add_subcommand("attack", "Craft an adversarial cloud");
  c_atk->add_option("--cloud", at.cloud, "Clean input cloud")->required();
  c_atk->add_option("--gt", at.gt, "Ground-truth complete cloud")->required();
  c_atk->add_option("--frames", at.frames, "Frames of the clean cloud (gd, pmcd, pmpd)");
  c_atk->add_option("--checkpoint", at.checkpoint, "Attack this model; without it the loss is Chamfer(cloud, gt)");
  c_atk->add_option("--kind", at.kind, "pgd, gd, pmcd or pmpd");
  c_atk->add_option("--eps", at.eps, "Per-point budget");
  c_atk->add_option("--step", at.step, "Step size (default eps)");
  c_atk->add_option("--iters", at.iters, "Iterations");
  c_atk->add_option("--norm", at.norm, "linf or l2");
  c_atk->add_option("--seed", at.seed, "Recorded in the manifest; the attack itself is deterministic");
  c_atk->add_option("-o,--out", at.out, "Adversarial cloud")->required();

  Train tr;
  auto* c_train = app.add_subcommand("train", "Train a completion model");
  c_train->add_option("--config", tr.config, "Training JSON config");
  c_train->add_option("--data", tr.data, "Dataset directory")->required();
  c_train->add_option("-o,--out", tr.out, "Output prefix for .ckpt, .metrics.csv, .store")->required();
  c_train->add_option("--mode", tr.mode, "baseline or adversarial (overrides the config)");
  c_train->add_option("--seed", tr.seed, "Overrides the config seed");
  c_train->add_option("--epochs", tr.epochs, "Overrides the config epochs");

  Eval ev;
  auto* c_eval = app.add_subcommand("eval", "Score a checkpoint on a dataset split");
  c_eval->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  c_eval->add_option("--data", ev.data, "Dataset directory")->required();
  c_eval->add_option("--split", ev.split, "train, val or test");
  c_eval->add_option("--attack", ev.attack, "pgd5 or none");
  c_eval->add_option("--eps", ev.eps, "Attack budget");
  c_eval->add_option("-o,--out", ev.out, "Table JSON (stdout when absent)");

  Outl ol;
  auto* c_out = app.add_subcommand("outliers", "Count adversarial points far from every clean point");
  c_out->add_option("--adv", ol.adv, "Adversarial cloud")->required();
  c_out->add_option("--clean", ol.clean, "Clean cloud")->required();
  c_out->add_option("--eps", ol.eps, "Budget; the threshold defaults to 2 eps");
  c_out->add_option("--threshold", ol.threshold, "Distance threshold");
  c_out->add_option("-o,--out", ol.out, "Report JSON (stdout when absent)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*c_gen) return run_gen_data(gd);
    if (*c_curv) return run_curvature(cv);
    if (*c_atk) return run_attack_cmd(at);
    if (*c_train) return run_train(tr);
    if (*c_eval) return run_eval(ev);
    if (*c_out) return run_outliers(ol);
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
