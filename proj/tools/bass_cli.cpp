// bass: simulate, fit, predict, metrics, network, plot.
//
// Exit codes: 0 ok, 2 usage or input problems, 3 numeric failure.
// Every output directory gets a manifest.json listing the command line, the
// resolved configuration, seeds, SHA-256 digests of inputs and outputs, and
// wall time. Wall time only ever appears in the manifest, so rerunning the
// recorded command reproduces every listed output digest.
#include "bass/bass.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>
#include <openssl/opensslv.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace bass;

namespace {

constexpr const char* kVersion = "0.1.0";

int usage_error(const std::string& msg) {
  std::cerr << "bass: " << msg << '\n';
  return 2;
}

// ---- digests and manifests -------------------------------------------------

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

class Manifest {
 public:
  Manifest(std::string command, std::vector<std::string> argv) : command_(std::move(command)), argv_(std::move(argv)) {}

  json config = json::object();
  std::vector<Seed> seeds;

  void input(const fs::path& p) { inputs_[p.string()] = sha256_file(p); }

  // Digests every regular file under dir except the manifest itself.
  void write(const fs::path& dir) const {
    json outputs = json::object();
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) outputs[fs::relative(f, dir).generic_string()] = sha256_file(f);
    json j;
    j["command"] = command_;
    j["argv"] = argv_;
    j["config"] = config;
    j["seeds"] = seeds;
    j["inputs"] = inputs_;
    j["outputs"] = outputs;
    j["versions"] = {{"bass", kVersion},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"compiler", __VERSION__},
                     {"openssl", OPENSSL_VERSION_TEXT}};
    j["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_json(dir / "manifest.json", j);
  }

 private:
  std::string command_;
  std::vector<std::string> argv_;
  json inputs_ = json::object();
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw FormatError("cannot create " + dir.string() + ": " + ec.message());
}

// ---- fit directories ---------------------------------------------------------

// A fit argument may name a state file, a restart directory, or a fit
// directory with best.json.
fs::path resolve_state(const fs::path& fit) {
  if (fs::is_regular_file(fit)) return fit;
  if (fs::is_regular_file(fit / "best.json")) {
    const json best = read_json(fit / "best.json");
    if (!best.contains("dir")) throw FormatError(fit.string() + "/best.json lacks 'dir'");
    return fit / best["dir"].get<std::string>() / "state.txt";
  }
  if (fs::is_regular_file(fit / "state.txt")) return fit / "state.txt";
  throw FormatError("no fitted state under " + fit.string());
}

std::vector<fs::path> restart_dirs(const fs::path& fit) {
  std::vector<fs::path> out;
  if (fs::is_regular_file(fit / "trace.tsv")) return {fit};
  if (!fs::is_directory(fit)) throw FormatError("not a fit directory: " + fit.string());
  for (const auto& e : fs::directory_iterator(fit)) {
    if (e.is_directory() && fs::is_regular_file(e.path() / "trace.tsv")) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw FormatError("no restart traces under " + fit.string());
  return out;
}

std::string restart_name(int r, int total) {
  const int width = std::max<int>(2, static_cast<int>(std::to_string(total).size()));
  std::string num = std::to_string(r + 1);
  return "restart_" + std::string(static_cast<std::size_t>(width) - std::min<std::size_t>(num.size(), width), '0') + num;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// ---- simulate ------------------------------------------------------------------

struct SimulateArgs {
  std::string builtin, spec_file, out;
  Eigen::Index n = 0;
  Seed seed = 1;
  Eigen::Index n_test = 0;
};

int cmd_simulate(const SimulateArgs& a, Manifest& man) {
  if (a.builtin.empty() == a.spec_file.empty()) return usage_error("simulate: give exactly one of --builtin or --spec");
  SimSpec spec;
  if (!a.builtin.empty()) {
    spec = builtin_spec(a.builtin, a.n > 0 ? a.n : 40, a.seed);
  } else {
    man.input(a.spec_file);
    spec = load_spec(a.spec_file);
    if (a.n > 0) spec.n = a.n;
    spec.seed = a.seed;
    spec.validate();
  }
  const fs::path out = a.out;
  make_dir(out);
  auto [data, truth] = generate(spec);
  save_dataset(out, data);
  save_truth(out / "truth.txt", truth);
  write_text(out / "spec.txt", format_spec(spec));
  const Seed test_seed = spec.seed + 1000;
  if (a.n_test > 0) save_dataset(out, generate_test(truth, a.n_test, test_seed), "test_block");
  man.config = {{"builtin", a.builtin}, {"spec", a.spec_file}, {"n", spec.n}, {"n_test", a.n_test},
                {"blocks", spec.block_dims}, {"k", spec.k}};
  man.seeds = {spec.seed};
  if (a.n_test > 0) man.seeds.push_back(test_seed);
  man.write(out);
  std::cout << "wrote " << data.m() << " blocks (" << data.p() << " features x " << data.n() << " samples) to "
            << out.string() << '\n';
  return 0;
}

// ---- fit -------------------------------------------------------------------------

struct FitArgs {
  std::vector<std::string> data;
  std::string engine = "px-em", out;
  Eigen::Index k_init = 10;
  HyperParams hyper;
  int restarts = 1;
  Seed seed = 1;
  int max_iter = EmConfig{}.max_iter;
  double ll_tol = EmConfig{}.ll_tol;
  int px_iter = 20;
  int mcmc_sweeps = 50;
  int gibbs_iter = GibbsConfig{}.n_iter;
  int burn_in = GibbsConfig{}.burn_in;
  bool standardize = false;
};

unsigned worker_count(int jobs) {
  unsigned cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("BASS_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw InvalidInput("BASS_THREADS must be a positive integer");
    cap = static_cast<unsigned>(v);
  }
  return std::min<unsigned>(cap, static_cast<unsigned>(std::max(jobs, 1)));
}

struct RestartResult {
  bool ok = false;
  double log_posterior = 0.0;
  Eigen::Index k = 0;
  std::string error;
};

void write_restart(const fs::path& dir, const FitReport& rep, const std::string& engine) {
  save_state(dir / "state.txt", rep.state);
  std::string trace = "iteration\tlog_posterior\tk\tpruned\n";
  for (std::size_t i = 0; i < rep.log_posterior.size(); ++i) {
    trace += std::to_string(i + 1) + '\t' + fmt_double(rep.log_posterior[i]) + '\t' +
             std::to_string(i < rep.k_trace.size() ? rep.k_trace[i] : 0) + '\t' +
             std::to_string(i < rep.pruned.size() ? rep.pruned[i] : 0) + '\n';
  }
  write_text(dir / "trace.tsv", trace);
  const FactorLabel labels = classify_factors(rep.state);
  std::vector<std::string> rows;
  for (Eigen::Index w = 0; w < labels.m(); ++w) rows.push_back(labels.row(w));
  json j = {{"engine", engine},
            {"initializer", rep.initializer},
            {"seed", rep.seed},
            {"iterations", rep.iterations},
            {"converged", rep.converged},
            {"k", rep.state.k()},
            {"log_posterior", finite_or_null(rep.log_posterior.empty() ? NAN : rep.log_posterior.back())},
            {"activity", rows}};
  write_json(dir / "report.json", j);
}

int cmd_fit(const FitArgs& a, Manifest& man) {
  if (a.data.empty()) return usage_error("fit: no data files");
  if (a.restarts < 1) return usage_error("fit: --restarts must be positive");
  std::vector<fs::path> paths(a.data.begin(), a.data.end());
  for (const auto& p : paths) man.input(p);
  GroupedDataset data = load_dataset(paths);
  FitOptions opt;
  opt.engine = parse_engine(a.engine);
  opt.k_init = a.k_init;
  opt.hyper = a.hyper;
  opt.hyper.validate();
  opt.em.max_iter = a.max_iter;
  opt.em.ll_tol = a.ll_tol;
  opt.em.validate();
  opt.n_px_iter = a.px_iter;
  opt.n_mcmc_sweeps = a.mcmc_sweeps;
  opt.gibbs.n_iter = a.gibbs_iter;
  opt.gibbs.burn_in = a.burn_in;
  if (opt.engine == Engine::kGibbs) opt.gibbs.validate();

  const fs::path out = a.out;
  make_dir(out);
  if (a.standardize) {
    const Standardizer st = Standardizer::fit(data);
    data = st.apply(data);
    std::ofstream f(out / "standardizer.txt");
    write_matrix(f, st.mean, {{"name", "mean"}});
    write_matrix(f, st.sd, {{"name", "sd"}});
  }

  std::vector<RestartResult> results(static_cast<std::size_t>(a.restarts));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < a.restarts; r = next++) {
      auto& res = results[static_cast<std::size_t>(r)];
      const fs::path dir = out / restart_name(r, a.restarts);
      const Seed seed = a.seed + static_cast<Seed>(r);
      try {
        make_dir(dir);
        const FitReport rep = fit_once(data, opt, seed);
        write_restart(dir, rep, a.engine);
        res.ok = true;
        res.k = rep.state.k();
        res.log_posterior = rep.log_posterior.empty() ? -INFINITY : rep.log_posterior.back();
      } catch (const std::exception& e) {
        res.error = e.what();
        try {
          write_text(dir / "error.txt", res.error + "\n");
        } catch (...) {
        }
      }
    }
  };
  const unsigned n_workers = worker_count(a.restarts);
  std::vector<std::thread> pool;
  for (unsigned i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::string summary = "restart\tseed\tstatus\tlog_posterior\tk\n";
  int best = -1, failed = 0;
  for (int r = 0; r < a.restarts; ++r) {
    const auto& res = results[static_cast<std::size_t>(r)];
    summary += restart_name(r, a.restarts) + '\t' + std::to_string(a.seed + static_cast<Seed>(r)) + '\t' +
               (res.ok ? "ok\t" + fmt_double(res.log_posterior) + '\t' + std::to_string(res.k) : "failed\t\t") + '\n';
    if (!res.ok) {
      ++failed;
      std::cerr << "bass: " << restart_name(r, a.restarts) << " failed: " << res.error << '\n';
    } else if (best < 0 || res.log_posterior > results[static_cast<std::size_t>(best)].log_posterior) {
      best = r;
    }
  }
  write_text(out / "summary.tsv", summary);
  if (best >= 0) {
    const auto& b = results[static_cast<std::size_t>(best)];
    write_json(out / "best.json", {{"dir", restart_name(best, a.restarts)},
                                   {"restart", best + 1},
                                   {"seed", a.seed + static_cast<Seed>(best)},
                                   {"log_posterior", finite_or_null(b.log_posterior)},
                                   {"k", b.k}});
  }
  man.config = {{"engine", a.engine},
                {"k_init", a.k_init},
                {"restarts", a.restarts},
                {"hyper",
                 {{"a", a.hyper.a}, {"b", a.hyper.b}, {"c", a.hyper.c}, {"d", a.hyper.d}, {"e", a.hyper.e},
                  {"f", a.hyper.f}, {"nu", a.hyper.nu}, {"a_sigma", a.hyper.a_sigma}, {"b_sigma", a.hyper.b_sigma}}},
                {"max_iter", a.max_iter},
                {"ll_tol", a.ll_tol},
                {"px_iter", a.px_iter},
                {"mcmc_sweeps", a.mcmc_sweeps},
                {"gibbs_iter", a.gibbs_iter},
                {"burn_in", a.burn_in},
                {"standardize", a.standardize},
                {"workers", n_workers}};
  for (int r = 0; r < a.restarts; ++r) man.seeds.push_back(a.seed + static_cast<Seed>(r));
  man.write(out);
  std::cout << a.restarts - failed << " of " << a.restarts << " restarts finished";
  if (best >= 0) std::cout << "; best " << restart_name(best, a.restarts) << " log posterior "
                           << results[static_cast<std::size_t>(best)].log_posterior;
  std::cout << '\n';
  return failed > 0 ? 3 : 0;
}

// ---- predict ---------------------------------------------------------------------

struct PredictArgs {
  std::string fit, out;
  std::vector<std::string> data;
  int target = 0;
};

int cmd_predict(const PredictArgs& a, Manifest& man) {
  const fs::path state_path = resolve_state(a.fit);
  man.input(state_path);
  const ModelState s = load_state(state_path);
  std::vector<fs::path> paths(a.data.begin(), a.data.end());
  for (const auto& p : paths) man.input(p);
  GroupedDataset data = load_dataset(paths);
  if (data.offsets != s.offsets) throw DimensionError("predict: data blocks do not match the fit");
  const fs::path st_path = fs::path(a.fit) / "standardizer.txt";
  if (fs::is_directory(a.fit) && fs::is_regular_file(st_path)) {
    man.input(st_path);
    const auto recs = read_matrices(st_path);
    if (recs.size() != 2) throw FormatError(st_path.string() + ": expected mean and sd");
    Standardizer st{recs[0].value.col(0), recs[1].value.col(0)};
    data = st.apply(data);
  }
  if (a.target < 1 || a.target > data.m()) return usage_error("predict: --target must lie in 1.." + std::to_string(data.m()));
  const Eigen::Index w = a.target - 1;
  const Matrix pred = predict_block(s, data, w);
  const double err = mse(pred, data.block(w));
  const fs::path out = a.out;
  make_dir(out);
  save_matrix(out / "prediction.tsv", pred, {{"block", std::to_string(a.target)}, {"name", "prediction"}});
  write_text(out / "mse.tsv", "block\tmse\n" + std::to_string(a.target) + '\t' + fmt_double(err) + '\n');
  write_json(out / "predict.json", {{"target", a.target}, {"mse", err}, {"n", data.n()}, {"k", s.k()}});
  man.config = {{"fit", a.fit}, {"target", a.target}};
  man.write(out);
  std::cout << "mse\t" << err << '\n';
  return 0;
}

// ---- metrics ---------------------------------------------------------------------

struct MetricsArgs {
  std::string truth, fit, out;
};

int cmd_metrics(const MetricsArgs& a, Manifest& man) {
  const fs::path truth_path = fs::is_directory(a.truth) ? fs::path(a.truth) / "truth.txt" : fs::path(a.truth);
  const fs::path state_path = resolve_state(a.fit);
  man.input(truth_path);
  man.input(state_path);
  const GroundTruth truth = load_truth(truth_path);
  const ModelState s = load_state(state_path);
  if (s.offsets != truth.offsets) throw DimensionError("metrics: fit and truth have different blocks");
  const FactorLabel labels = classify_factors(s);
  const double rate = recovery_rate(s.lambda, labels, truth);
  const double ssi_all = ssi(truth.lambda, s.lambda);

  std::string table = "metric\tblock\tvalue\n";
  table += "ssi\tall\t" + fmt_double(ssi_all) + '\n';
  table += "recovery_rate\tall\t" + fmt_double(rate) + '\n';
  table += "k_true\tall\t" + std::to_string(truth.lambda.cols()) + '\n';
  table += "k_fit\tall\t" + std::to_string(s.k()) + '\n';
  json blocks = json::array();
  for (Eigen::Index w = 0; w < s.m(); ++w) {
    const Matrix est_dense = block_columns(s.lambda, labels, s.offsets, w, Activity::kDense);
    const Matrix true_dense = block_columns(truth.lambda, truth.activity, truth.offsets, w, Activity::kDense);
    const Matrix est_sparse = block_columns(s.lambda, labels, s.offsets, w, Activity::kSparse);
    const Matrix true_sparse = block_columns(truth.lambda, truth.activity, truth.offsets, w, Activity::kSparse);
    const double d = dsi(est_dense, true_dense);
    // SSI of an empty side is undefined; reported as null.
    const bool have_sparse = est_sparse.cols() > 0 && true_sparse.cols() > 0;
    const double sp = have_sparse ? ssi(true_sparse, est_sparse) : NAN;
    const std::string b = std::to_string(w + 1);
    table += "dsi_dense\t" + b + '\t' + fmt_double(d) + '\n';
    table += "ssi_sparse\t" + b + '\t' + (have_sparse ? fmt_double(sp) : "NA") + '\n';
    table += "activity\t" + b + '\t' + labels.row(w) + '\n';
    blocks.push_back({{"block", w + 1}, {"dsi_dense", d}, {"ssi_sparse", finite_or_null(sp)}, {"activity", labels.row(w)},
                      {"true_activity", truth.activity.row(w)}});
  }
  const fs::path out = a.out;
  make_dir(out);
  write_text(out / "metrics.tsv", table);
  write_json(out / "metrics.json", {{"ssi", ssi_all}, {"recovery_rate", rate}, {"k_true", truth.lambda.cols()},
                                    {"k_fit", s.k()}, {"blocks", blocks}});
  man.config = {{"truth", a.truth}, {"fit", a.fit}};
  man.write(out);
  std::cout << table;
  return 0;
}

// ---- network ---------------------------------------------------------------------

struct NetworkArgs {
  std::vector<std::string> runs;
  int block = 1;
  double edge_thresh = 0.01;
  double min_frac = 0.5;
  std::string out;
};

int cmd_network(const NetworkArgs& a, Manifest& man) {
  if (a.runs.empty()) return usage_error("network: no runs");
  std::vector<Matrix> pcs;
  int without_sparse = 0;
  Eigen::Index q = -1;
  for (const auto& run : a.runs) {
    const fs::path p = resolve_state(run);
    man.input(p);
    const ModelState s = load_state(p);
    if (a.block < 1 || a.block > s.m()) return usage_error("network: --block must lie in 1.." + std::to_string(s.m()));
    const auto cov = observation_covariance(s, classify_factors(s), a.block - 1);
    if (cov.no_sparse_factors) ++without_sparse;
    if (q >= 0 && cov.omega.rows() != q) throw DimensionError("network: runs disagree on block size");
    q = cov.omega.rows();
    pcs.push_back(partial_correlation(cov.omega));
  }
  const EdgeList net = consensus_network(pcs, a.edge_thresh, a.min_frac);
  std::string edges = "i\tj\tweight\tsupport\n";
  for (const auto& e : net.edges) {
    edges += std::to_string(e.i + 1) + '\t' + std::to_string(e.j + 1) + '\t' + fmt_double(e.weight) + '\t' +
             fmt_double(e.support_fraction) + '\n';
  }
  const fs::path out = a.out;
  make_dir(out);
  write_text(out / "edges.tsv", edges);
  write_json(out / "network.json", {{"block", a.block}, {"nodes", net.nodes}, {"runs", net.runs},
                                    {"edges", net.edges.size()}, {"edge_thresh", net.edge_thresh},
                                    {"min_frac", net.min_frac}, {"runs_without_sparse_factors", without_sparse}});
  man.config = {{"block", a.block}, {"edge_thresh", a.edge_thresh}, {"min_frac", a.min_frac}, {"runs", a.runs}};
  man.write(out);
  std::cout << net.edges.size() << " edges over " << net.nodes << " features from " << net.runs << " runs\n";
  return 0;
}

// ---- plot ------------------------------------------------------------------------

std::vector<std::pair<double, Eigen::Index>> read_trace(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::pair<double, Eigen::Index>> out;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    long long it = 0, k = 0, pruned = 0;
    std::string lp;
    if (!(row >> it >> lp >> k >> pruned)) throw FormatError("bad trace row in " + path.string());
    out.emplace_back(std::strtod(lp.c_str(), nullptr), static_cast<Eigen::Index>(k));
  }
  return out;
}

std::string svg_open(int w, int h, const std::string& title) {
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" font-family=\"sans-serif\""
    << " font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<text x=\"" << w / 2
    << "\" y=\"16\" text-anchor=\"middle\" font-size=\"13\">" << title << "</text>\n";
  return s.str();
}

// Line chart of one series per restart; y values that are not finite are skipped.
std::string line_chart(const std::vector<std::vector<double>>& series, const std::string& title, const std::string& ylab) {
  const int W = 640, H = 360, L = 70, R = 20, T = 30, B = 40;
  double ymin = INFINITY, ymax = -INFINITY;
  std::size_t xmax = 1;
  for (const auto& s : series) {
    xmax = std::max(xmax, s.size());
    for (double v : s) {
      if (std::isfinite(v)) ymin = std::min(ymin, v), ymax = std::max(ymax, v);
    }
  }
  if (!std::isfinite(ymin)) ymin = 0.0, ymax = 1.0;
  if (ymax == ymin) ymax = ymin + 1.0;
  auto px = [&](double i) { return L + (W - L - R) * (xmax > 1 ? i / static_cast<double>(xmax - 1) : 0.0); };
  auto py = [&](double v) { return H - B - (H - T - B) * (v - ymin) / (ymax - ymin); };
  std::ostringstream s;
  s << svg_open(W, H, title);
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << L - 4 << "\" y=\"" << T + 4 << "\" text-anchor=\"end\">" << ymax << "</text>\n";
  s << "<text x=\"" << L - 4 << "\" y=\"" << H - B << "\" text-anchor=\"end\">" << ymin << "</text>\n";
  s << "<text x=\"" << W - R << "\" y=\"" << H - B + 16 << "\" text-anchor=\"end\">" << xmax << "</text>\n";
  s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 8 << "\" text-anchor=\"middle\">iteration</text>\n";
  s << "<text x=\"14\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 14 " << (T + H - B) / 2
    << ")\" text-anchor=\"middle\">" << ylab << "</text>\n";
  static const char* colours[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  for (std::size_t k = 0; k < series.size(); ++k) {
    s << "<polyline fill=\"none\" stroke-width=\"1.2\" stroke=\"" << colours[k % 8] << "\" points=\"";
    for (std::size_t i = 0; i < series[k].size(); ++i) {
      if (std::isfinite(series[k][i])) s << px(static_cast<double>(i)) << ',' << py(series[k][i]) << ' ';
    }
    s << "\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string bar_chart(const Vector& v, const std::string& title) {
  const int W = 640, H = 360, L = 60, R = 20, T = 30, B = 40;
  const double top = v.size() > 0 ? std::max(v.maxCoeff(), 1e-12) : 1.0;
  const double slot = (W - L - R) / static_cast<double>(std::max<Eigen::Index>(v.size(), 1));
  std::ostringstream s;
  s << svg_open(W, H, title);
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << L - 4 << "\" y=\"" << T + 4 << "\" text-anchor=\"end\">" << top << "</text>\n";
  for (Eigen::Index h = 0; h < v.size(); ++h) {
    const double bh = (H - T - B) * v(h) / top;
    s << "<rect x=\"" << L + slot * (h + 0.15) << "\" y=\"" << H - B - bh << "\" width=\"" << slot * 0.7
      << "\" height=\"" << bh << "\" fill=\"#1f77b4\"/>\n";
    s << "<text x=\"" << L + slot * (h + 0.5) << "\" y=\"" << H - B + 14 << "\" text-anchor=\"middle\">" << h + 1
      << "</text>\n";
  }
  s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 8 << "\" text-anchor=\"middle\">factor</text>\n";
  s << "</svg>\n";
  return s.str();
}

struct PlotArgs {
  std::string fit, out;
};

int cmd_plot(const PlotArgs& a, Manifest& man) {
  std::vector<std::vector<double>> lp, ks;
  for (const auto& dir : restart_dirs(a.fit)) {
    man.input(dir / "trace.tsv");
    const auto trace = read_trace(dir / "trace.tsv");
    lp.emplace_back();
    ks.emplace_back();
    for (const auto& [l, k] : trace) {
      lp.back().push_back(l);
      ks.back().push_back(static_cast<double>(k));
    }
  }
  const fs::path state_path = resolve_state(a.fit);
  man.input(state_path);
  const ModelState s = load_state(state_path);
  const fs::path out = a.out;
  make_dir(out);
  write_text(out / "log_posterior.svg", line_chart(lp, "log posterior by iteration", "log posterior"));
  write_text(out / "factors.svg", line_chart(ks, "factors kept by iteration", "k"));
  write_text(out / "pve.svg", bar_chart(pve(s), "variance explained per factor"));
  man.config = {{"fit", a.fit}};
  man.write(out);
  std::cout << "wrote 3 charts to " << out.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Bayesian group factor analysis with structured sparsity"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Draw a synthetic grouped dataset");
  c_sim->add_option("--builtin", sim.builtin, "sim1..sim6");
  c_sim->add_option("--spec", sim.spec_file, "key=value simulation spec file");
  c_sim->add_option("--n", sim.n, "samples (builtin default 40; overrides the spec file)");
  c_sim->add_option("--seed", sim.seed, "random seed");
  c_sim->add_option("--n-test", sim.n_test, "also draw this many held-out samples (seed + 1000)");
  c_sim->add_option("--out", sim.out, "output directory")->required();

  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit", "Fit the model with one or more random restarts");
  c_fit->add_option("data", fit.data, "one matrix file per block, features in rows")->required();
  c_fit->add_option("--engine", fit.engine, "gibbs | em | mcmc-em | px-em")
      ->check(CLI::IsMember({"gibbs", "em", "mcmc-em", "px-em"}));
  c_fit->add_option("--k-init", fit.k_init, "initial factor count");
  c_fit->add_option("--restarts", fit.restarts, "independent fits; restart r uses seed + r");
  c_fit->add_option("--seed", fit.seed, "base seed");
  c_fit->add_option("--max-iter", fit.max_iter, "EM iteration cap");
  c_fit->add_option("--ll-tol", fit.ll_tol, "EM convergence tolerance");
  c_fit->add_option("--px-iter", fit.px_iter, "PX-EM iterations before plain EM");
  c_fit->add_option("--mcmc-sweeps", fit.mcmc_sweeps, "Gibbs sweeps before EM (mcmc-em)");
  c_fit->add_option("--gibbs-iter", fit.gibbs_iter, "Gibbs sweeps (gibbs engine)");
  c_fit->add_option("--burn-in", fit.burn_in, "Gibbs burn-in (gibbs engine)");
  c_fit->add_option("--a", fit.hyper.a);
  c_fit->add_option("--b", fit.hyper.b);
  c_fit->add_option("--c", fit.hyper.c);
  c_fit->add_option("--d", fit.hyper.d);
  c_fit->add_option("--e", fit.hyper.e);
  c_fit->add_option("--f", fit.hyper.f);
  c_fit->add_option("--nu", fit.hyper.nu);
  c_fit->add_option("--a-sigma", fit.hyper.a_sigma);
  c_fit->add_option("--b-sigma", fit.hyper.b_sigma);
  c_fit->add_flag("--standardize", fit.standardize, "centre and scale every feature before fitting");
  c_fit->add_option("--out", fit.out, "output directory")->required();

  PredictArgs pred;
  auto* c_pred = app.add_subcommand("predict", "Predict one block from the others and report MSE");
  c_pred->add_option("--fit", pred.fit, "fit directory or state file")->required();
  c_pred->add_option("--data", pred.data, "matrix files, one per block")->required();
  c_pred->add_option("--target", pred.target, "block to predict (1-based)")->required();
  c_pred->add_option("--out", pred.out, "output directory")->required();

  MetricsArgs met;
  auto* c_met = app.add_subcommand("metrics", "Compare a fit with the simulation truth");
  c_met->add_option("--truth", met.truth, "simulation directory or truth file")->required();
  c_met->add_option("--fit", met.fit, "fit directory or state file")->required();
  c_met->add_option("--out", met.out, "output directory")->required();

  NetworkArgs net;
  auto* c_net = app.add_subcommand("network", "Consensus partial-correlation network from repeated fits");
  c_net->add_option("--runs", net.runs, "fit directories or state files")->required();
  c_net->add_option("--block", net.block, "observation block (1-based)");
  c_net->add_option("--edge-thresh", net.edge_thresh, "minimum |partial correlation|");
  c_net->add_option("--min-frac", net.min_frac, "minimum share of supporting runs");
  c_net->add_option("--out", net.out, "output directory")->required();

  PlotArgs plot;
  auto* c_plot = app.add_subcommand("plot", "SVG charts of traces and variance explained");
  c_plot->add_option("--fit", plot.fit, "fit directory")->required();
  c_plot->add_option("--out", plot.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  std::string joined;
  for (std::size_t i = 1; i < args.size(); ++i) joined += (i > 1 ? " " : "") + args[i];
  Manifest man(joined, std::vector<std::string>(args.begin() + 1, args.end()));
  try {
    if (*c_sim) return cmd_simulate(sim, man);
    if (*c_fit) return cmd_fit(fit, man);
    if (*c_pred) return cmd_predict(pred, man);
    if (*c_met) return cmd_metrics(met, man);
    if (*c_net) return cmd_network(net, man);
    if (*c_plot) return cmd_plot(plot, man);
  } catch (const InvalidInput& e) {
    std::cerr << "bass: " << e.what() << '\n';
    return 2;
  } catch (const NumericFailure& e) {
    std::cerr << "bass: numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "bass: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "bass: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
