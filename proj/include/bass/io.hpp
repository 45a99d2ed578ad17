// Plain-text persistence: tab-separated matrices behind a one-line header,
// key=value simulation specs, and fit/truth archives built from both.
//
// Matrix record:
//   # bass-matrix name=lambda rows=3 cols=2
//   0.5<TAB>-1.25
//   ...
// Values are written with 17 significant digits, so a round trip is exact.
#ifndef BASS_IO_HPP_
#define BASS_IO_HPP_

#include "bass/core.hpp"
#include "bass/simulate.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace bass {

/// Raised when a file cannot be opened or does not parse.
class FormatError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

using Attributes = std::map<std::string, std::string>;

struct MatrixRecord {
  Attributes attrs;
  Matrix value;

  std::string attr(const std::string& key, const std::string& fallback = "") const {
    auto it = attrs.find(key);
    return it == attrs.end() ? fallback : it->second;
  }
};

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& tok) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') throw FormatError("not a number: '" + tok + "'");
  return v;
}

inline long long parse_int(const std::string& tok) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  const long long v = std::strtoll(begin, &end, 10);
  if (end == begin || *end != '\0') throw FormatError("not an integer: '" + tok + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline Attributes parse_header(const std::string& line) {
  std::istringstream in(line);
  std::string hash, tag, kv;
  in >> hash >> tag;
  if (hash != "#" || tag != "bass-matrix") throw FormatError("expected '# bass-matrix' header, got '" + line + "'");
  Attributes attrs;
  while (in >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw FormatError("bad header field '" + kv + "'");
    attrs[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  if (!attrs.count("rows") || !attrs.count("cols")) throw FormatError("matrix header lacks rows/cols");
  return attrs;
}

}  // namespace detail

inline void write_matrix(std::ostream& out, const Matrix& m, const Attributes& attrs = {}) {
  out << "# bass-matrix";
  for (const auto& [k, v] : attrs) {
    if (k == "rows" || k == "cols") continue;
    out << ' ' << k << '=' << v;
  }
  out << " rows=" << m.rows() << " cols=" << m.cols() << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << '\t';
      out << detail::format_double(m(r, c));
    }
    out << '\n';
  }
}

/// Reads the next matrix record; returns false at end of input. Blank lines
/// between records are skipped.
inline bool read_matrix(std::istream& in, MatrixRecord& rec) {
  std::string line;
  do {
    if (!std::getline(in, line)) return false;
  } while (detail::trim(line).empty());
  rec.attrs = detail::parse_header(detail::trim(line));
  const auto rows = detail::parse_int(rec.attrs["rows"]);
  const auto cols = detail::parse_int(rec.attrs["cols"]);
  if (rows < 0 || cols < 0) throw FormatError("negative matrix dimensions");
  rec.value.resize(rows, cols);
  for (long long r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) throw FormatError("matrix truncated");
    line = detail::trim(line);
    const auto toks = cols == 0 ? std::vector<std::string>{} : detail::split(line, '\t');
    if (static_cast<long long>(toks.size()) != cols) throw FormatError("matrix row has wrong number of fields");
    for (long long c = 0; c < cols; ++c) rec.value(r, c) = detail::parse_double(toks[static_cast<std::size_t>(c)]);
  }
  return true;
}

inline std::vector<MatrixRecord> read_matrices(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<MatrixRecord> out;
  MatrixRecord rec;
  while (read_matrix(in, rec)) out.push_back(rec);
  return out;
}

inline MatrixRecord load_matrix(const std::filesystem::path& path) {
  auto all = read_matrices(path);
  if (all.size() != 1) throw FormatError(path.string() + ": expected exactly one matrix");
  return all.front();
}

inline void save_matrix(const std::filesystem::path& path, const Matrix& m, const Attributes& attrs = {}) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  write_matrix(out, m, attrs);
}

/// Reads one matrix file per block (features in rows) and stacks them.
inline GroupedDataset load_dataset(const std::vector<std::filesystem::path>& paths) {
  std::vector<Matrix> blocks;
  for (const auto& p : paths) blocks.push_back(load_matrix(p).value);
  return assemble_dataset(blocks);
}

/// Writes block w of `data` to dir/prefix<w+1>.tsv; returns the paths.
inline std::vector<std::filesystem::path> save_dataset(const std::filesystem::path& dir, const GroupedDataset& data,
                                                       const std::string& prefix = "block") {
  std::vector<std::filesystem::path> out;
  for (Eigen::Index w = 0; w < data.m(); ++w) {
    auto path = dir / (prefix + std::to_string(w + 1) + ".tsv");
    save_matrix(path, data.block(w), {{"block", std::to_string(w + 1)}});
    out.push_back(path);
  }
  return out;
}

// ---- simulation specs ------------------------------------------------------

/// key=value lines; '#' starts a comment. Keys: blocks (comma list), activity
/// (one row per block, rows separated by '/'), sparsity_frac, loading_sd,
/// zero_clip, noise_low, noise_high, n, seed. k is implied by activity.
inline std::string format_spec(const SimSpec& spec) {
  std::ostringstream out;
  out << "blocks=";
  for (std::size_t i = 0; i < spec.block_dims.size(); ++i) out << (i ? "," : "") << spec.block_dims[i];
  out << "\nactivity=";
  for (Eigen::Index w = 0; w < spec.activity.m(); ++w) out << (w ? "/" : "") << spec.activity.row(w);
  out << "\nsparsity_frac=" << detail::format_double(spec.sparsity_frac)
      << "\nloading_sd=" << detail::format_double(spec.loading_sd)
      << "\nzero_clip=" << detail::format_double(spec.zero_clip)
      << "\nnoise_low=" << detail::format_double(spec.noise_low)
      << "\nnoise_high=" << detail::format_double(spec.noise_high) << "\nn=" << spec.n << "\nseed=" << spec.seed
      << '\n';
  return out.str();
}

inline SimSpec parse_spec(std::istream& in) {
  SimSpec spec;
  std::string line;
  bool have_blocks = false, have_activity = false;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("spec line without '=': " + line);
    const auto key = detail::trim(line.substr(0, eq));
    const auto val = detail::trim(line.substr(eq + 1));
    if (key == "blocks") {
      spec.block_dims.clear();
      for (const auto& t : detail::split(val, ',')) spec.block_dims.push_back(detail::parse_int(detail::trim(t)));
      have_blocks = true;
    } else if (key == "activity") {
      spec.activity = FactorLabel::from_rows(detail::split(val, '/'));
      spec.k = spec.activity.k();
      have_activity = true;
    } else if (key == "sparsity_frac") {
      spec.sparsity_frac = detail::parse_double(val);
    } else if (key == "loading_sd") {
      spec.loading_sd = detail::parse_double(val);
    } else if (key == "zero_clip") {
      spec.zero_clip = detail::parse_double(val);
    } else if (key == "noise_low") {
      spec.noise_low = detail::parse_double(val);
    } else if (key == "noise_high") {
      spec.noise_high = detail::parse_double(val);
    } else if (key == "n") {
      spec.n = detail::parse_int(val);
    } else if (key == "seed") {
      spec.seed = static_cast<Seed>(detail::parse_int(val));
    } else {
      throw FormatError("unknown spec key '" + key + "'");
    }
  }
  if (!have_blocks || !have_activity) throw FormatError("spec needs both 'blocks' and 'activity'");
  spec.validate();
  return spec;
}

inline SimSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return parse_spec(in);
}

// ---- archives --------------------------------------------------------------

namespace detail {

inline std::string join_offsets(const std::vector<Eigen::Index>& off) {
  std::string out;
  for (std::size_t i = 0; i < off.size(); ++i) out += (i ? "," : "") + std::to_string(off[i]);
  return out;
}

inline std::vector<Eigen::Index> parse_offsets(const std::string& s) {
  std::vector<Eigen::Index> out;
  for (const auto& t : split(s, ',')) out.push_back(parse_int(t));
  if (out.size() < 2 || out.front() != 0) throw FormatError("bad block offsets '" + s + "'");
  return out;
}

inline const Matrix& find_record(const std::vector<MatrixRecord>& recs, const std::string& name) {
  for (const auto& r : recs) {
    if (r.attr("name") == name) return r.value;
  }
  throw FormatError("archive lacks matrix '" + name + "'");
}

inline Matrix labels_to_matrix(const FactorLabel& l) {
  Matrix out(l.m(), l.k());
  for (Eigen::Index w = 0; w < l.m(); ++w) {
    for (Eigen::Index h = 0; h < l.k(); ++h) {
      out(w, h) = l(w, h) == Activity::kSparse ? 1.0 : l(w, h) == Activity::kDense ? 2.0 : 0.0;
    }
  }
  return out;
}

inline FactorLabel labels_from_matrix(const Matrix& m) {
  FactorLabel out(m.rows(), m.cols());
  for (Eigen::Index w = 0; w < m.rows(); ++w) {
    for (Eigen::Index h = 0; h < m.cols(); ++h) {
      const double v = m(w, h);
      out(w, h) = v == 1.0 ? Activity::kSparse : v == 2.0 ? Activity::kDense : Activity::kInactive;
    }
  }
  return out;
}

}  // namespace detail

/// Every field of a ModelState as named matrix records.
inline void save_state(const std::filesystem::path& path, const ModelState& s) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  const auto& hp = s.hyper;
  Matrix hyper(1, 9);
  hyper << hp.a, hp.b, hp.c, hp.d, hp.e, hp.f, hp.nu, hp.a_sigma, hp.b_sigma;
  const std::string off = detail::join_offsets(s.offsets);
  write_matrix(out, hyper, {{"name", "hyper"}, {"fields", "a,b,c,d,e,f,nu,a_sigma,b_sigma"}, {"offsets", off}});
  write_matrix(out, s.lambda, {{"name", "lambda"}});
  write_matrix(out, s.theta, {{"name", "theta"}});
  write_matrix(out, s.delta, {{"name", "delta"}});
  write_matrix(out, s.phi, {{"name", "phi"}});
  write_matrix(out, s.tau, {{"name", "tau"}});
  write_matrix(out, s.eta, {{"name", "eta"}});
  write_matrix(out, s.gamma, {{"name", "gamma"}});
  write_matrix(out, s.z.cast<double>(), {{"name", "z"}});
  write_matrix(out, s.rho, {{"name", "rho"}});
  write_matrix(out, s.pi, {{"name", "pi"}});
  write_matrix(out, s.sigma2, {{"name", "sigma2"}});
}

inline ModelState load_state(const std::filesystem::path& path) {
  const auto recs = read_matrices(path);
  ModelState s;
  const Matrix& hyper = detail::find_record(recs, "hyper");
  if (hyper.size() != 9) throw FormatError("hyper record must hold 9 values");
  s.hyper = {hyper(0), hyper(1), hyper(2), hyper(3), hyper(4), hyper(5), hyper(6), hyper(7), hyper(8)};
  for (const auto& r : recs) {
    if (r.attr("name") == "hyper") s.offsets = detail::parse_offsets(r.attr("offsets"));
  }
  s.lambda = detail::find_record(recs, "lambda");
  s.theta = detail::find_record(recs, "theta");
  s.delta = detail::find_record(recs, "delta");
  s.phi = detail::find_record(recs, "phi");
  s.tau = detail::find_record(recs, "tau");
  s.eta = detail::find_record(recs, "eta");
  s.gamma = detail::find_record(recs, "gamma");
  s.z = detail::find_record(recs, "z").cast<int>();
  s.rho = detail::find_record(recs, "rho");
  s.pi = detail::find_record(recs, "pi");
  s.sigma2 = detail::find_record(recs, "sigma2");
  try {
    s.validate();
  } catch (const InvalidInput& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return s;
}

/// Loadings, activity (0 = inactive, 1 = sparse, 2 = dense), factors and
/// noise variances of a simulation.
inline void save_truth(const std::filesystem::path& path, const GroundTruth& t) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  write_matrix(out, t.lambda, {{"name", "lambda"}, {"offsets", detail::join_offsets(t.offsets)}});
  write_matrix(out, detail::labels_to_matrix(t.activity), {{"name", "activity"}});
  write_matrix(out, t.x, {{"name", "x"}});
  write_matrix(out, t.sigma2, {{"name", "sigma2"}});
}

inline GroundTruth load_truth(const std::filesystem::path& path) {
  const auto recs = read_matrices(path);
  GroundTruth t;
  t.lambda = detail::find_record(recs, "lambda");
  for (const auto& r : recs) {
    if (r.attr("name") == "lambda") t.offsets = detail::parse_offsets(r.attr("offsets"));
  }
  t.activity = detail::labels_from_matrix(detail::find_record(recs, "activity"));
  t.x = detail::find_record(recs, "x");
  t.sigma2 = detail::find_record(recs, "sigma2");
  if (t.offsets.back() != t.lambda.rows() || t.activity.k() != t.lambda.cols() ||
      t.activity.m() != static_cast<Eigen::Index>(t.offsets.size()) - 1 || t.sigma2.size() != t.lambda.rows()) {
    throw FormatError(path.string() + ": inconsistent truth archive");
  }
  return t;
}

}  // namespace bass

#endif  // BASS_IO_HPP_
