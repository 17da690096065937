#pragma once

// Plain-text file formats: point clouds (XYZ, ASCII PLY), curvature frame
// caches, model checkpoints and adversarial stores. Doubles are written with
// 17 significant digits so every file round-trips exactly.

#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "curvadv/attack.hpp"
#include "curvadv/cloud.hpp"
#include "curvadv/curvature.hpp"
#include "curvadv/errors.hpp"
#include "curvadv/tinynet.hpp"

namespace curvadv {

inline std::string format_double(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

inline std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 14695981039346656037ull) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Hash of the exact bit patterns of a cloud's coordinates.
inline std::uint64_t hash_cloud(const PointCloud& cloud) {
  std::uint64_t h = 14695981039346656037ull;
  for (const Vec3& p : cloud) {
    for (int a = 0; a < 3; ++a) {
      char bytes[8];
      const double v = p[a];
      std::memcpy(bytes, &v, 8);
      h = fnv1a(std::string_view(bytes, 8), h);
    }
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  const auto r = std::to_chars(buf, buf + 16, v, 16);
  std::string s(buf, r.ptr);
  return std::string(16 - s.size(), '0') + s;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

namespace detail {

/// Lines of a text file with 1-based numbers, split into whitespace tokens.
struct TextLines {
  struct Line {
    std::size_t number;
    std::string text;
    std::vector<std::string> tokens;
  };
  std::vector<Line> lines;

  explicit TextLines(std::string_view content) {
    std::size_t number = 0, start = 0;
    while (start <= content.size()) {
      std::size_t end = content.find('\n', start);
      if (end == std::string_view::npos) end = content.size();
      std::string text(content.substr(start, end - start));
      if (!text.empty() && text.back() == '\r') text.pop_back();
      ++number;
      if (end == content.size() && text.empty()) break;
      std::istringstream ss(text);
      std::vector<std::string> tokens;
      for (std::string t; ss >> t;) tokens.push_back(t);
      lines.push_back({number, std::move(text), std::move(tokens)});
      start = end + 1;
    }
  }
};

inline double parse_number(const std::string& tok, std::size_t line) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = first + tok.size();
  if (first != last && *first == '+') ++first;
  const auto r = std::from_chars(first, last, v);
  if (r.ec != std::errc() || r.ptr != last || !std::isfinite(v)) {
    throw ParseError("expected a finite number, got '" + tok + "'", line);
  }
  return v;
}

inline std::uint64_t parse_unsigned(const std::string& tok, std::size_t line, int base = 10) {
  std::uint64_t v = 0;
  const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v, base);
  if (r.ec != std::errc() || r.ptr != tok.data() + tok.size()) {
    throw ParseError("expected a non-negative integer, got '" + tok + "'", line);
  }
  return v;
}

/// key=value tokens of a header line.
inline std::map<std::string, std::string> header_fields(const std::vector<std::string>& tokens, std::size_t from,
                                                        std::size_t line) {
  std::map<std::string, std::string> out;
  for (std::size_t i = from; i < tokens.size(); ++i) {
    const auto eq = tokens[i].find('=');
    if (eq == std::string::npos || eq == 0) throw ParseError("malformed header field '" + tokens[i] + "'", line);
    out[tokens[i].substr(0, eq)] = tokens[i].substr(eq + 1);
  }
  return out;
}

inline const std::string& field(const std::map<std::string, std::string>& f, const std::string& key,
                                std::size_t line) {
  auto it = f.find(key);
  if (it == f.end()) throw ParseError("header lacks '" + key + "'", line);
  return it->second;
}

inline void append_vec(std::string& out, const Vec3& v) {
  out += format_double(v.x);
  out += ' ';
  out += format_double(v.y);
  out += ' ';
  out += format_double(v.z);
}

inline Vec3 parse_vec(const std::vector<std::string>& tokens, std::size_t at, std::size_t line) {
  return {parse_number(tokens[at], line), parse_number(tokens[at + 1], line), parse_number(tokens[at + 2], line)};
}

}  // namespace detail

// Point clouds ---------------------------------------------------------------

inline std::string format_xyz(const PointCloud& cloud) {
  std::string out;
  for (const Vec3& p : cloud) {
    detail::append_vec(out, p);
    out += '\n';
  }
  return out;
}

/// One point per line; blank and '#' lines are skipped.
inline PointCloud parse_xyz(std::string_view content) {
  std::vector<Vec3> pts;
  for (const auto& l : detail::TextLines(content).lines) {
    if (l.tokens.empty() || l.tokens[0][0] == '#') continue;
    if (l.tokens.size() != 3) {
      throw ParseError("expected 3 coordinates, got " + std::to_string(l.tokens.size()) + " fields", l.number);
    }
    pts.push_back(detail::parse_vec(l.tokens, 0, l.number));
  }
  if (pts.empty()) throw SizeError("xyz: no points");
  return PointCloud(std::move(pts));
}

inline std::string format_ply(const PointCloud& cloud) {
  std::string out = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(cloud.size()) +
                    "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
  return out + format_xyz(cloud);
}

/// Minimal ASCII PLY: a single vertex element with x, y, z properties.
inline PointCloud parse_ply(std::string_view content) {
  const auto lines = detail::TextLines(content).lines;
  std::size_t i = 0;
  auto next = [&]() -> const detail::TextLines::Line& {
    if (i >= lines.size()) throw ParseError("unexpected end of file", lines.empty() ? 1 : lines.back().number);
    return lines[i++];
  };
  if (next().text != "ply") throw ParseError("missing 'ply' magic", 1);
  std::optional<std::size_t> count;
  std::vector<std::string> props;
  for (;;) {
    const auto& l = next();
    if (l.tokens.empty() || l.tokens[0] == "comment" || l.tokens[0] == "obj_info") continue;
    if (l.tokens[0] == "end_header") break;
    if (l.tokens[0] == "format") {
      if (l.tokens.size() < 2 || l.tokens[1] != "ascii") throw ParseError("only ascii PLY is supported", l.number);
    } else if (l.tokens[0] == "element") {
      if (l.tokens.size() != 3 || l.tokens[1] != "vertex" || count) {
        throw ParseError("expected a single 'element vertex N'", l.number);
      }
      count = static_cast<std::size_t>(detail::parse_unsigned(l.tokens[2], l.number));
    } else if (l.tokens[0] == "property") {
      if (l.tokens.size() != 3 || (l.tokens[1] != "float" && l.tokens[1] != "double")) {
        throw ParseError("expected 'property float|double <name>'", l.number);
      }
      props.push_back(l.tokens[2]);
    } else {
      throw ParseError("unknown header line '" + l.text + "'", l.number);
    }
  }
  if (!count) throw ParseError("header lacks 'element vertex'", i);
  if (props != std::vector<std::string>{"x", "y", "z"}) throw ParseError("vertex properties must be x y z", i);
  std::vector<Vec3> pts;
  while (pts.size() < *count) {
    const auto& l = next();
    if (l.tokens.empty()) continue;
    if (l.tokens.size() != 3) throw ParseError("expected 3 coordinates", l.number);
    pts.push_back(detail::parse_vec(l.tokens, 0, l.number));
  }
  for (; i < lines.size(); ++i) {
    if (!lines[i].tokens.empty()) throw ParseError("data after the last vertex", lines[i].number);
  }
  if (pts.empty()) throw SizeError("ply: no points");
  return PointCloud(std::move(pts));
}

inline bool is_ply(const std::filesystem::path& path) { return path.extension() == ".ply"; }

/// Format picked from the extension: .ply is PLY, anything else XYZ.
inline PointCloud load_cloud(const std::filesystem::path& path) {
  const std::string content = read_file(path);
  try {
    return is_ply(path) ? parse_ply(content) : parse_xyz(content);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

inline void save_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  write_file(path, is_ply(path) ? format_ply(cloud) : format_xyz(cloud));
}

// Curvature frames -----------------------------------------------------------

inline const char* rule_name(VariationRule r) { return r == VariationRule::kSectionFit ? "section-fit" : "intersection"; }

struct FramesFile {
  CurvatureField field;
  /// hash_cloud of the cloud the frames were estimated on, when recorded.
  std::optional<std::uint64_t> source_hash;
};

/// Header `#curvadv-frames v1 k_p= k_n= k_d= step= rule= orient= [source=]`,
/// then one line per point: normal, principal[0], principal[1], mean_dir.
inline std::string format_frames(const CurvatureField& field, std::optional<std::uint64_t> source_hash = {}) {
  const CurvatureParams& p = field.params;
  std::string out = "#curvadv-frames v1 k_p=" + std::to_string(p.k_p) + " k_n=" + std::to_string(p.k_n) +
                    " k_d=" + std::to_string(p.k_d) + " step=" + format_double(p.step()) + " rule=" + rule_name(p.rule);
  if (p.orientation.mode == Orientation::Mode::kViewpoint) {
    const Vec3& v = p.orientation.viewpoint;
    out += " orient=viewpoint:" + format_double(v.x) + "," + format_double(v.y) + "," + format_double(v.z);
  } else {
    out += " orient=hemisphere";
  }
  if (source_hash) out += " source=" + hex64(*source_hash);
  out += '\n';
  for (const SurfaceFrame& f : field.frames) {
    for (const Vec3* v : {&f.normal, &f.principal[0], &f.principal[1], &f.mean_dir}) {
      if (v != &f.normal) out += ' ';
      detail::append_vec(out, *v);
    }
    out += '\n';
  }
  return out;
}

inline FramesFile parse_frames(std::string_view content) {
  const auto lines = detail::TextLines(content).lines;
  if (lines.empty() || lines[0].tokens.size() < 2 || lines[0].tokens[0] != "#curvadv-frames") {
    throw ParseError("missing '#curvadv-frames' header", 1);
  }
  if (lines[0].tokens[1] != "v1") throw ParseError("unsupported frames version '" + lines[0].tokens[1] + "'", 1);
  const auto h = detail::header_fields(lines[0].tokens, 2, 1);
  FramesFile out;
  CurvatureParams& p = out.field.params;
  p.k_p = detail::parse_unsigned(detail::field(h, "k_p", 1), 1);
  p.k_n = detail::parse_unsigned(detail::field(h, "k_n", 1), 1);
  p.k_d = detail::parse_unsigned(detail::field(h, "k_d", 1), 1);
  const double step = detail::parse_number(detail::field(h, "step", 1), 1);
  if (p.k_d == 0) throw ParseError("k_d must be positive", 1);
  if (step != p.step()) p.rotation_step = step;
  if (auto it = h.find("rule"); it != h.end()) {
    if (it->second == "section-fit") {
      p.rule = VariationRule::kSectionFit;
    } else if (it->second == "intersection") {
      p.rule = VariationRule::kIntersection;
    } else {
      throw ParseError("unknown rule '" + it->second + "'", 1);
    }
  }
  if (auto it = h.find("orient"); it != h.end()) {
    const std::string& o = it->second;
    if (o == "hemisphere") {
      p.orientation = Orientation::hemisphere();
    } else if (o.rfind("viewpoint:", 0) == 0) {
      std::vector<std::string> parts;
      std::stringstream ss(o.substr(10));
      for (std::string s; std::getline(ss, s, ',');) parts.push_back(s);
      if (parts.size() != 3) throw ParseError("viewpoint needs three components", 1);
      p.orientation = Orientation::toward(detail::parse_vec(parts, 0, 1));
    } else {
      throw ParseError("unknown orientation '" + o + "'", 1);
    }
  }
  if (auto it = h.find("source"); it != h.end()) out.source_hash = detail::parse_unsigned(it->second, 1, 16);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& l = lines[i];
    if (l.tokens.empty() || l.tokens[0][0] == '#') continue;
    if (l.tokens.size() != 12) throw ParseError("expected 12 fields per frame, got " + std::to_string(l.tokens.size()), l.number);
    SurfaceFrame f;
    f.normal = detail::parse_vec(l.tokens, 0, l.number);
    f.principal[0] = detail::parse_vec(l.tokens, 3, l.number);
    f.principal[1] = detail::parse_vec(l.tokens, 6, l.number);
    f.mean_dir = detail::parse_vec(l.tokens, 9, l.number);
    out.field.frames.push_back(f);
  }
  if (out.field.frames.empty()) throw SizeError("frames file holds no frames");
  return out;
}

inline void save_frames(const std::filesystem::path& path, const CurvatureField& field,
                        std::optional<std::uint64_t> source_hash = {}) {
  write_file(path, format_frames(field, source_hash));
}

inline FramesFile load_frames(const std::filesystem::path& path) {
  try {
    return parse_frames(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

/// Loads frames and checks they were made with `expected` (and, when both
/// sides record one, from a cloud with the given hash).
inline CurvatureField load_frames_checked(const std::filesystem::path& path, const CurvatureParams& expected,
                                          std::optional<std::uint64_t> source_hash = {},
                                          std::optional<std::size_t> point_count = {}) {
  FramesFile f = load_frames(path);
  if (!(f.field.params == expected)) throw StaleCacheError(path.string() + ": frames were computed with other parameters");
  if (source_hash && f.source_hash && *source_hash != *f.source_hash) {
    throw StaleCacheError(path.string() + ": frames belong to a different cloud");
  }
  if (point_count && f.field.size() != *point_count) {
    throw StaleCacheError(path.string() + ": frame count differs from the cloud size");
  }
  return std::move(f.field);
}

// Checkpoints ----------------------------------------------------------------

namespace detail {

inline void append_matrix(std::string& out, const std::string& tag, const std::string& name, const Matrix& m) {
  out += tag + " " + name + " " + std::to_string(m.rows()) + " " + std::to_string(m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      out += ' ';
      out += format_double(m(r, c));
    }
  }
  out += '\n';
}

inline Matrix parse_matrix(const TextLines::Line& l, const std::string& tag, const std::string& name) {
  if (l.tokens.size() < 4 || l.tokens[0] != tag || l.tokens[1] != name) {
    throw ParseError("expected '" + tag + " " + name + "'", l.number);
  }
  const auto rows = static_cast<Eigen::Index>(parse_unsigned(l.tokens[2], l.number));
  const auto cols = static_cast<Eigen::Index>(parse_unsigned(l.tokens[3], l.number));
  if (l.tokens.size() != 4 + static_cast<std::size_t>(rows * cols)) throw ParseError("wrong value count for " + name, l.number);
  Matrix m(rows, cols);
  std::size_t k = 4;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = parse_number(l.tokens[k++], l.number);
  }
  return m;
}

}  // namespace detail

struct Checkpoint {
  ModelParams params;
  std::optional<OptimizerState> optimizer;
  std::size_t epoch = 0;  ///< epochs completed
};

inline std::string format_checkpoint(const Checkpoint& ck) {
  const NetConfig& c = ck.params.config;
  std::string out = "#curvadv-checkpoint v1\n";
  out += "config " + std::to_string(c.n_in) + " " + std::to_string(c.m_out) + " " + format_double(c.bn_momentum) + " " +
         format_double(c.bn_eps) + "\n";
  out += "epoch " + std::to_string(ck.epoch) + "\n";
  visit_tensors(ck.params, [&](const std::string& name, const Matrix& t, TensorKind) { detail::append_matrix(out, "tensor", name, t); });
  if (ck.optimizer) {
    const OptimizerState& s = *ck.optimizer;
    const AdamConfig& a = s.config;
    out += "adam " + format_double(a.lr) + " " + format_double(a.beta1) + " " + format_double(a.beta2) + " " +
           format_double(a.eps) + " " + format_double(a.decay_factor) + " " + std::to_string(a.decay_interval) + " " +
           format_double(s.lr) + " " + std::to_string(s.step) + " " + std::to_string(s.m.size()) + "\n";
    for (std::size_t i = 0; i < s.m.size(); ++i) {
      out += "steps " + std::to_string(i) + " " + std::to_string(s.tensor_steps[i]) + "\n";
      detail::append_matrix(out, "m", std::to_string(i), s.m[i]);
      detail::append_matrix(out, "v", std::to_string(i), s.v[i]);
    }
  }
  return out;
}

inline Checkpoint parse_checkpoint(std::string_view content) {
  const auto lines = detail::TextLines(content).lines;
  std::size_t i = 0;
  auto next = [&]() -> const detail::TextLines::Line& {
    if (i >= lines.size()) throw ParseError("unexpected end of checkpoint", lines.empty() ? 1 : lines.back().number);
    return lines[i++];
  };
  if (next().text != "#curvadv-checkpoint v1") throw ParseError("missing '#curvadv-checkpoint v1' header", 1);
  Checkpoint ck;
  {
    const auto& l = next();
    if (l.tokens.size() != 5 || l.tokens[0] != "config") throw ParseError("expected 'config n_in m_out momentum eps'", l.number);
    NetConfig c;
    c.n_in = detail::parse_unsigned(l.tokens[1], l.number);
    c.m_out = detail::parse_unsigned(l.tokens[2], l.number);
    c.bn_momentum = detail::parse_number(l.tokens[3], l.number);
    c.bn_eps = detail::parse_number(l.tokens[4], l.number);
    ck.params = init_params(c, 0);
  }
  {
    const auto& l = next();
    if (l.tokens.size() != 2 || l.tokens[0] != "epoch") throw ParseError("expected 'epoch N'", l.number);
    ck.epoch = detail::parse_unsigned(l.tokens[1], l.number);
  }
  visit_tensors(ck.params, [&](const std::string& name, Matrix& t, TensorKind) {
    const auto& l = next();
    Matrix m = detail::parse_matrix(l, "tensor", name);
    if (m.rows() != t.rows() || m.cols() != t.cols()) throw ParseError("shape of " + name + " disagrees with the config", l.number);
    t = std::move(m);
  });
  if (i < lines.size()) {
    const auto& l = next();
    if (l.tokens.size() != 10 || l.tokens[0] != "adam") throw ParseError("expected an 'adam' line", l.number);
    AdamConfig a;
    a.lr = detail::parse_number(l.tokens[1], l.number);
    a.beta1 = detail::parse_number(l.tokens[2], l.number);
    a.beta2 = detail::parse_number(l.tokens[3], l.number);
    a.eps = detail::parse_number(l.tokens[4], l.number);
    a.decay_factor = detail::parse_number(l.tokens[5], l.number);
    a.decay_interval = detail::parse_unsigned(l.tokens[6], l.number);
    OptimizerState s = init_optimizer(ck.params, a);
    s.lr = detail::parse_number(l.tokens[7], l.number);
    s.step = detail::parse_unsigned(l.tokens[8], l.number);
    if (detail::parse_unsigned(l.tokens[9], l.number) != s.m.size()) throw ParseError("optimizer tensor count mismatch", l.number);
    for (std::size_t k = 0; k < s.m.size(); ++k) {
      const auto& sl = next();
      if (sl.tokens.size() != 3 || sl.tokens[0] != "steps" || sl.tokens[1] != std::to_string(k)) {
        throw ParseError("expected 'steps " + std::to_string(k) + " N'", sl.number);
      }
      s.tensor_steps[k] = detail::parse_unsigned(sl.tokens[2], sl.number);
      for (std::vector<Matrix>* dst : {&s.m, &s.v}) {
        const auto& ml = next();
        Matrix m = detail::parse_matrix(ml, dst == &s.m ? "m" : "v", std::to_string(k));
        if (m.rows() != (*dst)[k].rows() || m.cols() != (*dst)[k].cols()) throw ParseError("moment shape mismatch", ml.number);
        (*dst)[k] = std::move(m);
      }
    }
    ck.optimizer = std::move(s);
  }
  if (i < lines.size()) throw ParseError("trailing content", lines[i].number);
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) { write_file(path, format_checkpoint(ck)); }

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return parse_checkpoint(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

// Adversarial store ----------------------------------------------------------

/// Header `#curvadv-advstore v1 reset= epoch= count=`, then per sample an
/// `id <name> <n>` line and n lines of `clean adv` coordinates.
inline std::string format_store(const AdvStore& store) {
  std::string out = "#curvadv-advstore v1 reset=" + std::to_string(store.reset_period()) +
                    " epoch=" + std::to_string(store.epoch()) + " count=" + std::to_string(store.size()) + "\n";
  for (const std::string& id : store.ids()) {
    const PointCloud& c = store.clean(id);
    const PointCloud& a = store.adversarial(id);
    out += "id " + id + " " + std::to_string(c.size()) + "\n";
    for (std::size_t i = 0; i < c.size(); ++i) {
      detail::append_vec(out, c[i]);
      out += ' ';
      detail::append_vec(out, a[i]);
      out += '\n';
    }
  }
  return out;
}

inline AdvStore parse_store(std::string_view content) {
  const auto lines = detail::TextLines(content).lines;
  if (lines.empty() || lines[0].tokens.size() < 2 || lines[0].tokens[0] != "#curvadv-advstore" || lines[0].tokens[1] != "v1") {
    throw ParseError("missing '#curvadv-advstore v1' header", 1);
  }
  const auto h = detail::header_fields(lines[0].tokens, 2, 1);
  AdvStore store(detail::parse_unsigned(detail::field(h, "reset", 1), 1));
  store.set_epoch(detail::parse_unsigned(detail::field(h, "epoch", 1), 1));
  const std::size_t count = detail::parse_unsigned(detail::field(h, "count", 1), 1);
  std::size_t i = 1;
  for (std::size_t s = 0; s < count; ++s) {
    if (i >= lines.size()) throw ParseError("unexpected end of store", lines.back().number);
    const auto& l = lines[i++];
    if (l.tokens.size() != 3 || l.tokens[0] != "id") throw ParseError("expected 'id <name> <n>'", l.number);
    const std::size_t n = detail::parse_unsigned(l.tokens[2], l.number);
    std::vector<Vec3> clean, adv;
    for (std::size_t k = 0; k < n; ++k) {
      if (i >= lines.size()) throw ParseError("unexpected end of store", l.number);
      const auto& pl = lines[i++];
      if (pl.tokens.size() != 6) throw ParseError("expected 6 coordinates", pl.number);
      clean.push_back(detail::parse_vec(pl.tokens, 0, pl.number));
      adv.push_back(detail::parse_vec(pl.tokens, 3, pl.number));
    }
    store.restore(l.tokens[1], PointCloud(std::move(clean)), PointCloud(std::move(adv)));
  }
  if (i < lines.size()) throw ParseError("trailing content", lines[i].number);
  return store;
}

inline void save_store(const std::filesystem::path& path, const AdvStore& store) { write_file(path, format_store(store)); }

inline AdvStore load_store(const std::filesystem::path& path) {
  try {
    return parse_store(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

}  // namespace curvadv
