#pragma once

// JSON configuration files, dataset directories and run manifests.
// Needs nlohmann/json (vendor/json.hpp) on the include path.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "curvadv/experiment.hpp"
#include "curvadv/io.hpp"
#include "json.hpp"

#ifndef CURVADV_VERSION
#define CURVADV_VERSION "0.1.0"
#endif

namespace curvadv {

using Json = nlohmann::ordered_json;

namespace detail {

/// Rejects keys outside `allowed` so config files map one-to-one onto structs.
inline void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

template <class T>
void read_key(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

inline Json category_list(const std::vector<Category>& v) {
  Json a = Json::array();
  for (Category c : v) a.push_back(std::string(category_name(c)));
  return a;
}

inline std::vector<Category> parse_category_list(const Json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of category names");
  std::vector<Category> out;
  for (const Json& e : j) {
    if (!e.is_string()) throw ConfigError(where + ": expected category names");
    out.push_back(parse_category(e.get<std::string>()));
  }
  return out;
}

}  // namespace detail

inline Json to_json(const PerturbationBudget& b) {
  return {{"epsilon", b.epsilon},
          {"norm", norm_name(b.norm)},
          {"step", b.requested_step()},
          {"iterations", b.iterations},
          {"unit_directions", b.unit_directions}};
}

inline PerturbationBudget budget_from_json(const Json& j, PerturbationBudget b, const std::string& where) {
  detail::check_keys(j, {"epsilon", "norm", "step", "iterations", "unit_directions"}, where);
  detail::read_key(j, "epsilon", b.epsilon, where);
  if (j.contains("norm")) b.norm = parse_norm(j.at("norm").get<std::string>());
  if (j.contains("step")) {
    double s = 0;
    detail::read_key(j, "step", s, where);
    b.step = s;
  }
  detail::read_key(j, "iterations", b.iterations, where);
  detail::read_key(j, "unit_directions", b.unit_directions, where);
  return b;
}

inline Json to_json(const CurvatureParams& p) {
  return {{"k_p", p.k_p}, {"k_n", p.k_n}, {"k_d", p.k_d}, {"step", p.step()}, {"rule", rule_name(p.rule)}};
}

inline CurvatureParams curvature_from_json(const Json& j, const std::string& where) {
  detail::check_keys(j, {"k_p", "k_n", "k_d", "step", "rule"}, where);
  CurvatureParams p;
  detail::read_key(j, "k_p", p.k_p, where);
  detail::read_key(j, "k_n", p.k_n, where);
  detail::read_key(j, "k_d", p.k_d, where);
  if (j.contains("step")) {
    double s = 0;
    detail::read_key(j, "step", s, where);
    if (s != p.step()) p.rotation_step = s;
  }
  if (j.contains("rule")) {
    const std::string r = j.at("rule").get<std::string>();
    if (r == "section-fit") {
      p.rule = VariationRule::kSectionFit;
    } else if (r == "intersection") {
      p.rule = VariationRule::kIntersection;
    } else {
      throw ConfigError(where + ".rule: expected section-fit or intersection");
    }
  }
  return p;
}

inline Json to_json(const DatasetConfig& c) {
  return {{"per_category", c.per_category},
          {"categories", detail::category_list(c.categories)},
          {"holdout", detail::category_list(c.holdout)},
          {"val_fraction", c.val_fraction},
          {"test_fraction", c.test_fraction},
          {"keep_fraction", c.keep_fraction},
          {"n_in", c.n_in},
          {"complete_count", c.complete_count},
          {"viewpoint_distance", c.viewpoint_distance},
          {"seed", c.seed},
          {"curvature", to_json(c.curvature)}};
}

inline DatasetConfig dataset_config_from_json(const Json& j) {
  const std::string w = "dataset";
  detail::check_keys(j,
                     {"per_category", "categories", "holdout", "val_fraction", "test_fraction", "keep_fraction", "n_in",
                      "complete_count", "viewpoint_distance", "seed", "curvature"},
                     w);
  DatasetConfig c;
  detail::read_key(j, "per_category", c.per_category, w);
  if (j.contains("categories")) c.categories = detail::parse_category_list(j.at("categories"), w + ".categories");
  if (j.contains("holdout")) c.holdout = detail::parse_category_list(j.at("holdout"), w + ".holdout");
  detail::read_key(j, "val_fraction", c.val_fraction, w);
  detail::read_key(j, "test_fraction", c.test_fraction, w);
  detail::read_key(j, "keep_fraction", c.keep_fraction, w);
  detail::read_key(j, "n_in", c.n_in, w);
  detail::read_key(j, "complete_count", c.complete_count, w);
  detail::read_key(j, "viewpoint_distance", c.viewpoint_distance, w);
  detail::read_key(j, "seed", c.seed, w);
  if (j.contains("curvature")) c.curvature = curvature_from_json(j.at("curvature"), w + ".curvature");
  c.validate();
  return c;
}

inline Json to_json(const EvalOptions& e) {
  Json j{{"attack", e.attack}, {"kind", attack_name(e.kind)}, {"budget", to_json(e.budget)}, {"batch_size", e.batch_size}};
  j["outlier_threshold"] = e.outlier_threshold ? Json(*e.outlier_threshold) : Json(nullptr);
  return j;
}

inline EvalOptions eval_from_json(const Json& j, const std::string& where) {
  detail::check_keys(j, {"attack", "kind", "budget", "batch_size", "outlier_threshold"}, where);
  EvalOptions e;
  detail::read_key(j, "attack", e.attack, where);
  if (j.contains("kind")) e.kind = parse_attack(j.at("kind").get<std::string>());
  if (j.contains("budget")) e.budget = budget_from_json(j.at("budget"), e.budget, where + ".budget");
  detail::read_key(j, "batch_size", e.batch_size, where);
  if (j.contains("outlier_threshold") && !j.at("outlier_threshold").is_null()) {
    double t = 0;
    detail::read_key(j, "outlier_threshold", t, where);
    e.outlier_threshold = t;
  }
  return e;
}

inline Json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr_baseline", c.lr_baseline},
          {"lr_adversarial", c.lr_adversarial},
          {"decay_factor", c.decay_factor},
          {"decay_interval", c.decay_interval},
          {"reset_period", c.reset_period},
          {"adversarial", c.adversarial},
          {"attack", attack_name(c.attack)},
          {"budget", to_json(c.budget)},
          {"eval", to_json(c.eval)},
          {"log_adv_val", c.log_adv_val},
          {"net", {{"m_out", c.net.m_out}, {"bn_momentum", c.net.bn_momentum}, {"bn_eps", c.net.bn_eps}}},
          {"seed", c.seed}};
}

inline TrainConfig train_config_from_json(const Json& j) {
  const std::string w = "train";
  detail::check_keys(j,
                     {"epochs", "batch_size", "lr_baseline", "lr_adversarial", "decay_factor", "decay_interval",
                      "reset_period", "adversarial", "attack", "budget", "eval", "log_adv_val", "net", "seed"},
                     w);
  TrainConfig c;
  detail::read_key(j, "epochs", c.epochs, w);
  detail::read_key(j, "batch_size", c.batch_size, w);
  detail::read_key(j, "lr_baseline", c.lr_baseline, w);
  detail::read_key(j, "lr_adversarial", c.lr_adversarial, w);
  detail::read_key(j, "decay_factor", c.decay_factor, w);
  detail::read_key(j, "decay_interval", c.decay_interval, w);
  detail::read_key(j, "reset_period", c.reset_period, w);
  detail::read_key(j, "adversarial", c.adversarial, w);
  if (j.contains("attack")) c.attack = parse_attack(j.at("attack").get<std::string>());
  if (j.contains("budget")) c.budget = budget_from_json(j.at("budget"), c.budget, w + ".budget");
  if (j.contains("eval")) c.eval = eval_from_json(j.at("eval"), w + ".eval");
  detail::read_key(j, "log_adv_val", c.log_adv_val, w);
  if (j.contains("net")) {
    const Json& n = j.at("net");
    detail::check_keys(n, {"m_out", "bn_momentum", "bn_eps"}, w + ".net");
    detail::read_key(n, "m_out", c.net.m_out, w + ".net");
    detail::read_key(n, "bn_momentum", c.net.bn_momentum, w + ".net");
    detail::read_key(n, "bn_eps", c.net.bn_eps, w + ".net");
  }
  detail::read_key(j, "seed", c.seed, w);
  c.validate();
  return c;
}

inline Json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // nlohmann reports a byte offset; turn it into a line number.
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n'));
    throw ParseError(path.string() + ": invalid JSON", line);
  }
}

inline void write_json_file(const std::filesystem::path& path, const Json& j) { write_file(path, j.dump(2) + "\n"); }

// Dataset directories ----------------------------------------------------------
//
//   dataset.json          resolved DatasetConfig
//   index.csv             id,split,category,vx,vy,vz
//   samples/<id>.partial.xyz, <id>.gt.xyz, <id>.frames

inline const char* split_name(SplitKind k) { return k == SplitKind::kTrain ? "train" : k == SplitKind::kVal ? "val" : "test"; }

inline SplitKind parse_split(const std::string& s) {
  if (s == "train") return SplitKind::kTrain;
  if (s == "val") return SplitKind::kVal;
  if (s == "test") return SplitKind::kTest;
  throw ValidationError("unknown split '" + s + "' (expected train, val or test)");
}

/// Builds the dataset with its frame cache inside `dir` and writes the
/// clouds and index next to it.
inline Dataset generate_dataset_dir(DatasetConfig config, const std::filesystem::path& dir, CacheStats* stats = nullptr) {
  config.cache_dir = dir / "samples";
  Dataset ds = build_dataset(config, stats);
  write_json_file(dir / "dataset.json", to_json(config));
  std::string index = "id,split,category,vx,vy,vz\n";
  for (SplitKind k : {SplitKind::kTrain, SplitKind::kVal, SplitKind::kTest}) {
    for (const Sample& s : ds.split(k)) {
      index += s.id + "," + split_name(k) + "," + std::string(category_name(s.category)) + "," + format_double(s.viewpoint.x) +
               "," + format_double(s.viewpoint.y) + "," + format_double(s.viewpoint.z) + "\n";
      save_cloud(dir / "samples" / (s.id + ".partial.xyz"), s.partial);
      save_cloud(dir / "samples" / (s.id + ".gt.xyz"), s.gt);
    }
  }
  write_file(dir / "index.csv", index);
  return ds;
}

inline Dataset load_dataset_dir(const std::filesystem::path& dir) {
  const DatasetConfig config = dataset_config_from_json(read_json_file(dir / "dataset.json"));
  const auto lines = detail::TextLines(read_file(dir / "index.csv")).lines;
  if (lines.empty() || lines[0].text != "id,split,category,vx,vy,vz") throw ParseError("index.csv: bad header", 1);
  Dataset ds;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& l = lines[i];
    if (l.text.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(l.text);
    for (std::string part; std::getline(ss, part, ',');) f.push_back(part);
    if (f.size() != 6) throw ParseError("index.csv: expected 6 fields", l.number);
    Sample s;
    s.id = f[0];
    s.category = parse_category(f[2]);
    s.viewpoint = detail::parse_vec(f, 3, l.number);
    const auto base = dir / "samples" / s.id;
    s.partial = load_cloud(base.string() + ".partial.xyz");
    s.gt = load_cloud(base.string() + ".gt.xyz");
    CurvatureParams cp = config.curvature;
    cp.orientation = Orientation::toward(s.viewpoint);
    s.frames = load_frames_checked(base.string() + ".frames", cp, hash_cloud(s.partial), s.partial.size());
    SplitKind k;
    try {
      k = parse_split(f[1]);
    } catch (const ValidationError&) {
      throw ParseError("index.csv: unknown split '" + f[1] + "'", l.number);
    }
    (k == SplitKind::kTrain ? ds.train : k == SplitKind::kVal ? ds.val : ds.test).push_back(std::move(s));
  }
  return ds;
}

// Reports ----------------------------------------------------------------------

inline Json to_json(const EvalReport& r) {
  Json rows = Json::array();
  for (const CategoryRow& row : r.rows) {
    Json j{{"category", std::string(category_name(row.category))}, {"count", row.count}, {"clean_cd", row.clean_cd}};
    j["adv_cd"] = row.adv_cd ? Json(*row.adv_cd) : Json(nullptr);
    rows.push_back(j);
  }
  Json j{{"rows", rows}};
  j["category_average"] = {{"clean_cd", r.clean_category_average},
                           {"adv_cd", r.adv_category_average ? Json(*r.adv_category_average) : Json(nullptr)}};
  j["sample_mean"] = {{"clean_cd", r.clean_mean}, {"adv_cd", r.adv_mean ? Json(*r.adv_mean) : Json(nullptr)}};
  if (r.adv_mean) {
    j["outliers"] = {{"threshold", r.outlier_threshold},
                     {"count", r.outlier_count},
                     {"points", r.point_count},
                     {"fraction", r.point_count ? static_cast<double>(r.outlier_count) / static_cast<double>(r.point_count) : 0.0}};
  }
  return j;
}

// Manifests --------------------------------------------------------------------

/// `<output>.manifest.json`: command, resolved config, seed, content hashes
/// of the inputs and the tool version. No timestamps, so identical runs
/// produce identical manifests.
inline void write_manifest(const std::filesystem::path& output, const std::string& command, const Json& config,
                           std::uint64_t seed, const std::vector<std::filesystem::path>& inputs) {
  Json in = Json::object();
  for (const auto& p : inputs) {
    if (std::filesystem::is_directory(p)) {
      // Hash of the sorted (relative path, content hash) list.
      std::vector<std::filesystem::path> files;
      for (const auto& e : std::filesystem::recursive_directory_iterator(p)) {
        if (e.is_regular_file()) files.push_back(std::filesystem::relative(e.path(), p));
      }
      std::sort(files.begin(), files.end());
      std::uint64_t h = fnv1a("");
      for (const auto& f : files) h = fnv1a(f.generic_string() + ":" + hex64(fnv1a(read_file(p / f))) + "\n", h);
      in[p.string()] = hex64(h);
    } else {
      in[p.string()] = hex64(fnv1a(read_file(p)));
    }
  }
  Json m{{"command", command}, {"config", config}, {"seed", seed}, {"inputs", in}, {"version", CURVADV_VERSION}};
  write_json_file(output.string() + ".manifest.json", m);
}

}  // namespace curvadv
