#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "isohash/isohash.hpp"

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;
using namespace isohash;

enum ExitCode : int { kOk = 0, kInternal = 1, kUsage = 2, kData = 3, kSolver = 4, kCheck = 5 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

// One per process; written once, on success or failure.
class Manifest {
 public:
  void begin(std::string command, int argc, char** argv) {
    doc_["command"] = std::move(command);
    auto& a = doc_["argv"] = json::array();
    for (int k = 0; k < argc; ++k) a.push_back(argv[k]);
    doc_["config"] = json::object();
    doc_["seeds"] = json::object();
    doc_["datasets"] = json::array();
    doc_["artifacts"] = json::object();
    doc_["timings_s"] = json::object();
    active_ = true;
  }
  json& config() { return doc_["config"]; }
  json& seeds() { return doc_["seeds"]; }
  json& artifacts() { return doc_["artifacts"]; }
  void timing(const std::string& phase, double seconds) { doc_["timings_s"][phase] = seconds; }
  void dataset(const std::string& role, const fs::path& path, const Dataset& d) {
    doc_["datasets"].push_back({{"role", role},
                                {"path", path.string()},
                                {"Q", d.size()},
                                {"N", d.dim()},
                                {"fingerprint", hex64(fingerprint(d))}});
  }
  void set_path(fs::path p) { path_ = std::move(p); }
  bool has_path() const { return !path_.empty(); }

  void finish(int code, const std::string& error) {
    if (!active_) return;
    active_ = false;
    doc_["exit_code"] = code;
    if (!error.empty()) doc_["error"] = error;
    doc_["threads"] = thread_count();
    const fs::path p = path_.empty() ? fs::path("isohash_" + doc_["command"].get<std::string>() + ".manifest.json") : path_;
    std::ofstream out(p);
    out << doc_.dump(2) << '\n';
    if (!out) std::cerr << "warning: could not write manifest " << p << '\n';
  }

 private:
  json doc_;
  fs::path path_;
  bool active_ = false;
};

Manifest g_manifest;

void emit(const json& j) { std::cout << j.dump(2) << '\n'; }

void log(const std::string& msg) { std::cerr << "isohash: " << msg << '\n'; }

// Raw files are preprocessed (mean removed, rows normalized); files flagged normalized are used as is.
Dataset load_training_data(const fs::path& path, bool raw, const std::string& role) {
  Dataset file = load_dataset(path);
  g_manifest.dataset(role, path, file);
  if (raw || file.normalized) return file;
  return preprocess(file.points);
}

Dataset load_eval_data(const fs::path& path, const HashModel& model, bool raw) {
  Dataset file = load_dataset(path);
  g_manifest.dataset("eval", path, file);
  if (file.dim() != static_cast<std::size_t>(model.W.cols())) {
    throw DimensionError("model expects N = " + std::to_string(model.W.cols()) + ", data has " + shape_str(file.points.rows(), file.points.cols()));
  }
  if (raw || file.normalized) return file;
  return apply_preprocessing(file.points, model);
}

std::vector<std::uint32_t> parse_queries(const std::string& spec, std::size_t q) {
  if (spec == "all") return all_queries(q);
  std::size_t n = 0;
  try {
    std::size_t used = 0;
    n = std::stoul(spec, &used);
    if (used != spec.size()) throw std::invalid_argument(spec);
  } catch (const std::exception&) {
    throw UsageError("--queries must be 'all' or a count, got '" + spec + "'");
  }
  if (n < 1 || n > q) throw UsageError("--queries " + spec + " outside [1, " + std::to_string(q) + "]");
  std::vector<std::uint32_t> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = static_cast<std::uint32_t>(k);
  return out;
}

fs::path manifest_path(const std::string& flag, const std::string& out) {
  if (!flag.empty()) return flag;
  if (!out.empty()) return out + ".manifest.json";
  return {};
}

// ------------------------------------------------------------------ train

struct TrainArgs {
  std::string data;
  std::string algo = "nibh";
  std::size_t bits = 30;
  std::uint64_t seed = 0;
  std::string secants = "all";
  std::string out;
  std::string progress;
  std::string manifest;
  bool raw = false;
  SolverConfig solver;
  CgConfig cg;
  CLI::App* app = nullptr;
};

bool given(const CLI::App* app, const char* name) { return app->count(name) > 0; }

void check_train_flags(const TrainArgs& a) {
  std::vector<std::string> bad;
  auto forbid = [&](std::initializer_list<const char*> names) {
    for (const char* n : names)
      if (given(a.app, n)) bad.emplace_back(n);
  };
  if (a.algo == "lsh") {
    forbid({"--rho", "--eta", "--alpha-start", "--alpha-end", "--alpha-growth", "--secants", "--init-sample",
            "--violator-batch", "--active-tol", "--max-generations", "--active-only", "--full-continuation", "--tol",
            "--max-iters", "--inner-iters", "--progress"});
  } else if (a.algo == "nibh") {
    forbid({"--init-sample", "--violator-batch", "--active-tol", "--max-generations", "--active-only",
            "--full-continuation"});
  } else {
    forbid({"--secants"});
  }
  if (!bad.empty()) {
    std::string msg = bad.front();
    for (std::size_t k = 1; k < bad.size(); ++k) msg += ", " + bad[k];
    throw UsageError(msg + " conflict with --algo " + a.algo);
  }
}

SecantBatch choose_secants(const std::string& spec, const Dataset& data, std::uint64_t seed) {
  if (spec == "all") return all_secants(data);
  if (spec == "bre") return bre_secant_selection(data);
  if (spec.rfind("sample:", 0) == 0) {
    CgConfig c;
    try {
      std::size_t used = 0;
      c.init_sample_size = std::stoul(spec.substr(7), &used);
      if (used != spec.size() - 7) throw std::invalid_argument(spec);
    } catch (const std::exception&) {
      throw UsageError("--secants sample:K needs an integer K, got '" + spec + "'");
    }
    if (c.init_sample_size < 1) throw UsageError("--secants sample:K needs K >= 1");
    c.scan_seed = seed;
    return sample_initial_secants(data.size(), data, c).secants;
  }
  throw UsageError("--secants must be all, bre or sample:K, got '" + spec + "'");
}

int cmd_train(TrainArgs& a) {
  g_manifest.set_path(manifest_path(a.manifest, a.out));
  check_train_flags(a);
  a.solver.seed = a.seed;
  a.cg.inner = a.solver;
  if (!given(a.app, "--scan-seed")) a.cg.scan_seed = a.seed;
  a.solver.validate();
  if (a.algo == "nibh-cg") a.cg.validate();

  Stopwatch sw;
  const Dataset data = load_training_data(a.data, a.raw, "train");
  g_manifest.timing("load", sw.lap());

  json& cfg = g_manifest.config();
  cfg["algo"] = a.algo;
  cfg["bits"] = a.bits;
  cfg["raw"] = a.raw;
  if (a.algo != "lsh") cfg["solver"] = to_json(a.solver);
  if (a.algo == "nibh") cfg["secants"] = a.secants;
  if (a.algo == "nibh-cg") {
    cfg["init_sample"] = a.cg.init_sample_size;
    cfg["violator_batch"] = a.cg.violator_batch;
    cfg["active_tol"] = a.cg.active_tol;
    cfg["max_generations"] = a.cg.max_generations;
    cfg["accumulate"] = a.cg.accumulate;
    cfg["full_continuation"] = a.cg.full_continuation;
  }
  g_manifest.seeds()["seed"] = a.seed;
  if (a.algo == "nibh-cg") g_manifest.seeds()["scan_seed"] = a.cg.scan_seed;

  std::ofstream progress_file;
  std::ostream* progress = nullptr;
  if (!a.progress.empty()) {
    if (a.progress == "-") {
      progress = &std::cerr;
    } else {
      progress_file.open(a.progress);
      if (!progress_file) throw DataError("cannot open progress file " + a.progress);
      progress = &progress_file;
      g_manifest.artifacts()["progress"] = a.progress;
    }
  }

  json out;
  out["command"] = "train";
  out["algo"] = a.algo;
  out["M"] = a.bits;
  out["Q"] = data.size();
  out["N"] = data.dim();

  HashModel model;
  int code = kOk;
  if (a.algo == "lsh") {
    model = lsh_model(a.bits, data, a.seed);
    out["iterations"] = 0;
    out["status"] = "closed_form";
  } else if (a.algo == "nibh") {
    const SecantBatch secants = choose_secants(a.secants, data, a.seed);
    g_manifest.timing("secants", sw.lap());
    log("training NIBH on " + std::to_string(secants.size()) + " secants");
    auto res = train_nibh(data, secants, a.bits, a.solver, progress);
    model = res.model;
    out["secants"] = a.secants;
    out["secant_count"] = secants.size();
    out["iterations"] = res.state.iter;
    out["status"] = to_string(res.status);
    out["initial_delta"] = res.initial_delta;
    out["lambda_warnings"] = res.lambda_warnings;
    if (res.status == SolverStatus::diverged) code = kSolver;
  } else {
    log("training NIBH-CG");
    auto res = train_nibh_cg(data, a.bits, a.cg, progress);
    model = res.model;
    out["iterations"] = res.report.inner_outer_iters;
    out["status"] = res.report.fully_satisfied ? "satisfied" : "max_generations";
    out["cg"] = to_json(res.report);
  }
  g_manifest.timing("train", sw.lap());

  const DistortionReport dist = max_distortion(model, data);
  g_manifest.timing("evaluate", sw.lap());
  out["delta"] = dist.delta;
  out["lambda"] = model.lambda;
  out["lambda_star"] = dist.lambda_star;
  out["target_convention"] = kTargetConvention;
  out["model"] = a.out;

  save_model(a.out, model);
  g_manifest.artifacts()["model"] = a.out;
  g_manifest.timing("save", sw.lap());
  emit(out);
  if (code == kSolver) log("solver diverged; saved the best state");
  return code;
}

// ------------------------------------------------------------------- eval

struct EvalArgs {
  std::string model;
  std::string data;
  std::string metric = "delta";
  std::optional<std::size_t> k;
  std::string queries = "all";
  std::string manifest;
  std::size_t bins = 20;
  bool raw = false;
};

int cmd_eval(const EvalArgs& a) {
  g_manifest.set_path(manifest_path(a.manifest, ""));
  Stopwatch sw;
  const HashModel model = load_model(a.model);
  const Dataset data = load_eval_data(a.data, model, a.raw);
  g_manifest.timing("load", sw.lap());
  const std::size_t bits = static_cast<std::size_t>(model.W.rows());
  json& cfg = g_manifest.config();
  cfg["metric"] = a.metric;
  cfg["model"] = a.model;
  cfg["raw"] = a.raw;

  const BinaryCodes codes = hash_codes(model, data);
  const DistortionReport dist = max_distortion(codes, data, a.bins);
  g_manifest.timing("distortion", sw.lap());

  json out;
  if (a.metric == "delta") {
    if (a.k) throw UsageError("--k does not apply to --metric delta");
    out = metric_json("delta", std::nullopt, bits, dist.delta, {}, dist);
    out["worst_secant"] = {{"i", dist.worst_secant.i}, {"j", dist.worst_secant.j}, {"c", dist.worst_secant.c}};
    out["pair_count"] = dist.pair_count;
    out["histogram"] = {{"edges", dist.histogram.edges}, {"counts", dist.histogram.counts}, {"bin_max", dist.histogram.bin_max}};
  } else {
    const std::size_t k = a.k.value_or(a.metric == "tau" ? 10 : 50);
    const auto queries = parse_queries(a.queries, data.size());
    cfg["k"] = k;
    cfg["queries"] = a.queries;
    if (a.metric == "map") {
      const auto rep = map_at_k(codes, data, queries, k);
      out = metric_json("map", k, bits, rep.map, rep.per_query_ap, dist);
    } else {
      const auto rep = kendall_tau_at_k(codes, data, queries, k);
      out = metric_json("tau", k, bits, rep.mean_tau, rep.per_query_tau, dist);
    }
    g_manifest.timing("neighbors", sw.lap());
  }
  emit(out);
  return kOk;
}

// -------------------------------------------------------------- demo-fig1

struct Fig1Args {
  std::uint64_t seed = kFig1Seed;
  std::size_t grid_steps = 3600;
  std::string profile_csv;
  std::string points_csv;
  std::string manifest;
};

json line_json(const GridSearchResult& g, const NnOrderComparison& o, const Matrix& pts) {
  const double ct = std::cos(g.best_angle);
  const double st = std::sin(g.best_angle);
  std::vector<double> proj(static_cast<std::size_t>(pts.rows()));
  for (Eigen::Index r = 0; r < pts.rows(); ++r) proj[static_cast<std::size_t>(r)] = ct * pts(r, 0) + st * pts(r, 1);
  json j;
  j["best_angle_rad"] = g.best_angle;
  j["best_angle_deg"] = g.best_angle * 180.0 / std::numbers::pi;
  j["distortion"] = g.distortion;
  j["scale"] = g.scale;
  j["full_order_preserved"] = o.full_order_preserved;
  j["circle_square_misordered"] = o.circle_square_misordered;
  j["embedded_order"] = o.embedded_order;
  j["projections"] = proj;
  return j;
}

int cmd_demo_fig1(const Fig1Args& a) {
  g_manifest.set_path(manifest_path(a.manifest, ""));
  g_manifest.seeds()["seed"] = a.seed;
  g_manifest.config()["grid_steps"] = a.grid_steps;
  Stopwatch sw;
  const Fig1Dataset ds = make_fig1_dataset(a.seed);
  const Fig1Contrast c = fig1_contrast(ds, a.grid_steps);
  g_manifest.timing("grid_search", sw.lap());

  json out;
  out["command"] = "demo-fig1";
  out["seed"] = a.seed;
  out["grid_steps"] = a.grid_steps;
  out["query"] = {0.0, 0.0};
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<std::string> labels;
  for (Eigen::Index r = 0; r < ds.points.rows(); ++r) {
    xs.push_back(ds.points(r, 0));
    ys.push_back(ds.points(r, 1));
    labels.emplace_back(to_string(ds.labels[static_cast<std::size_t>(r)]));
  }
  out["points"] = {{"x", xs}, {"y", ys}, {"label", labels}};
  out["ambient_order"] = c.linf_order.ambient_order;
  out["linf"] = line_json(c.linf, c.linf_order, ds.points);
  out["l2"] = line_json(c.l2, c.l2_order, ds.points);
  out["holds"] = c.holds;

  if (!a.profile_csv.empty()) {
    std::ofstream f(a.profile_csv);
    f << "angle_rad,linf_distortion,l2_distortion\n";
    f.precision(17);
    for (std::size_t k = 0; k < c.linf.profile.size(); ++k)
      f << c.linf.profile[k].first << ',' << c.linf.profile[k].second << ',' << c.l2.profile[k].second << '\n';
    if (!f) throw DataError("cannot write " + a.profile_csv);
    g_manifest.artifacts()["profile_csv"] = a.profile_csv;
  }
  if (!a.points_csv.empty()) {
    std::ofstream f(a.points_csv);
    f << "x,y,label,proj_linf,proj_l2\n";
    f.precision(17);
    const auto& pl = out["linf"]["projections"];
    const auto& p2 = out["l2"]["projections"];
    for (std::size_t k = 0; k < xs.size(); ++k)
      f << xs[k] << ',' << ys[k] << ',' << labels[k] << ',' << pl[k].get<double>() << ',' << p2[k].get<double>() << '\n';
    if (!f) throw DataError("cannot write " + a.points_csv);
    g_manifest.artifacts()["points_csv"] = a.points_csv;
  }
  emit(out);
  if (!c.holds) log("seed " + std::to_string(a.seed) + " does not show the contrast");
  return c.holds ? kOk : kCheck;
}

// ------------------------------------------------------------------ check

struct Lemma1Args {
  std::vector<double> alphas{1.0, 4.0, 10.0, 100.0};
  std::vector<double> sigmas{0.5, 1.0, 2.0};
  std::size_t samples = 1000000;
  std::uint64_t seed = 0;
  std::string manifest;
};

int cmd_check_lemma1(const Lemma1Args& a) {
  g_manifest.set_path(manifest_path(a.manifest, ""));
  g_manifest.seeds()["seed"] = a.seed;
  g_manifest.config()["alphas"] = a.alphas;
  g_manifest.config()["sigmas"] = a.sigmas;
  g_manifest.config()["samples"] = a.samples;
  Stopwatch sw;
  json out;
  out["command"] = "check lemma1";
  json rows = json::array();
  json monotone_by_sigma = json::object();
  bool pass = true;
  for (std::size_t si = 0; si < a.sigmas.size(); ++si) {
    // One sample stream per sigma, shared across alpha.
    const std::uint64_t seed = mix_seed(a.seed, si);
    double prev = std::numeric_limits<double>::infinity();
    bool monotone = true;
    std::vector<double> sorted_alphas = a.alphas;
    std::sort(sorted_alphas.begin(), sorted_alphas.end());
    for (double alpha : sorted_alphas) {
      const Lemma1Result r = lemma1_empirical(alpha, a.sigmas[si], a.samples, seed);
      if (r.empirical_mean > prev) monotone = false;
      prev = r.empirical_mean;
      pass = pass && r.holds;
      rows.push_back({{"alpha", r.alpha}, {"sigma", r.sigma}, {"samples", r.n_samples},
                      {"empirical_mean", r.empirical_mean}, {"bound", r.bound}, {"holds", r.holds}});
    }
    monotone_by_sigma[std::to_string(a.sigmas[si])] = monotone;
    pass = pass && monotone;
  }
  out["results"] = std::move(rows);
  out["monotone_in_alpha"] = std::move(monotone_by_sigma);
  out["pass"] = pass;
  g_manifest.timing("sample", sw.lap());
  emit(out);
  return pass ? kOk : kCheck;
}

struct KnnArgs {
  std::string model;
  std::string data;
  std::size_t k = 10;
  std::string queries = "all";
  std::string manifest;
  bool raw = false;
};

int cmd_check_knn(const KnnArgs& a) {
  g_manifest.set_path(manifest_path(a.manifest, ""));
  g_manifest.config()["k"] = a.k;
  g_manifest.config()["queries"] = a.queries;
  g_manifest.config()["model"] = a.model;
  Stopwatch sw;
  const HashModel model = load_model(a.model);
  const Dataset data = load_eval_data(a.data, model, a.raw);
  const auto queries = parse_queries(a.queries, data.size());
  const GapReport rep = knn_sufficiency_check(model, data, queries, a.k);
  g_manifest.timing("check", sw.lap());
  json out;
  out["command"] = "check knn";
  out["k"] = rep.k;
  out["delta"] = rep.delta;
  out["lambda_star"] = rep.lambda;
  out["queries_checked"] = rep.queries.size();
  out["gap_threshold"] = 2.0 * rep.delta;
  out["satisfied_queries"] = rep.satisfied_queries;
  out["preserved"] = rep.preserved;
  out["violations"] = rep.violations;
  out["pass"] = rep.all_preserved();
  emit(out);
  return rep.all_preserved() ? kOk : kCheck;
}

// ------------------------------------------------------------------ bench

struct BenchArgs {
  std::vector<std::size_t> qs{100, 300, 1000};
  std::vector<std::string> algos{"lsh", "nibh-cg"};
  std::size_t bits = 30;
  std::size_t dim = 100;
  std::uint64_t seed = 0;
  std::string manifest;
};

int cmd_bench(const BenchArgs& a) {
  g_manifest.set_path(manifest_path(a.manifest, ""));
  g_manifest.seeds()["seed"] = a.seed;
  g_manifest.config()["q"] = a.qs;
  g_manifest.config()["algos"] = a.algos;
  g_manifest.config()["bits"] = a.bits;
  g_manifest.config()["N"] = a.dim;
  json out;
  out["command"] = "bench";
  json rows = json::array();
  Stopwatch total;
  for (std::size_t q : a.qs) {
    Stopwatch sw;
    const Dataset raw = gen_random_dataset(q, a.dim, a.seed);
    const double t_gen = sw.lap();
    const Dataset data = preprocess(raw.points);
    const double t_pre = sw.lap();
    for (const auto& algo : a.algos) {
      log("bench " + algo + " at Q = " + std::to_string(q));
      sw.lap();
      HashModel model;
      std::size_t peak = 0;
      if (algo == "lsh") {
        model = lsh_model(a.bits, data, a.seed);
      } else if (algo == "nibh") {
        SolverConfig sc;
        sc.seed = a.seed;
        const SecantBatch s = all_secants(data);
        peak = s.size();
        model = train_nibh(data, s, a.bits, sc).model;
      } else if (algo == "nibh-cg") {
        CgConfig cc;
        cc.inner.seed = a.seed;
        cc.scan_seed = a.seed;
        auto res = train_nibh_cg(data, a.bits, cc);
        model = res.model;
        peak = res.report.peak_resident_secants;
      } else {
        throw UsageError("unknown algorithm '" + algo + "' in --algos");
      }
      const double t_train = sw.lap();
      const double delta = max_distortion(model, data, 1).delta;
      const double t_eval = sw.lap();
      rows.push_back({{"Q", q},
                      {"algo", algo},
                      {"pairs", pair_count(q)},
                      {"seconds", {{"generate", t_gen}, {"preprocess", t_pre}, {"train", t_train}, {"evaluate", t_eval}}},
                      {"peak_resident_secants", peak},
                      {"delta", delta}});
    }
  }
  out["runs"] = std::move(rows);
  g_manifest.timing("total", total.lap());
  emit(out);
  return kOk;
}

// -------------------------------------------------------------------- gen

struct GenArgs {
  std::string out;
  std::string manifest;
  std::size_t q = 100;
  std::size_t n = 100;
  std::uint64_t seed = 0;
  std::size_t grid = 10;
  std::size_t square = 3;
  std::size_t components = 3;
  double separation = 4.0;
  double spread = 1.0;
  std::string from;
  std::size_t count = 100;
  std::size_t skip = 0;
};

int cmd_gen(const std::string& kind, const GenArgs& a, const CLI::App* sub) {
  g_manifest.set_path(manifest_path(a.manifest, a.out));
  Stopwatch sw;
  json& cfg = g_manifest.config();
  cfg["kind"] = kind;
  Dataset d;
  if (kind == "random") {
    cfg["q"] = a.q;
    cfg["n"] = a.n;
    g_manifest.seeds()["seed"] = a.seed;
    d = gen_random_dataset(a.q, a.n, a.seed);
  } else if (kind == "squares") {
    cfg["grid"] = a.grid;
    cfg["square"] = a.square;
    d = gen_translating_squares(a.grid, a.square);
  } else if (kind == "mixture") {
    cfg["q"] = a.q;
    cfg["n"] = a.n;
    cfg["components"] = a.components;
    cfg["separation"] = a.separation;
    cfg["spread"] = a.spread;
    g_manifest.seeds()["seed"] = a.seed;
    d = sample_mixture(planted_mixture(a.components, a.n, a.separation, a.spread), a.q, a.seed);
  } else {
    const Dataset src = load_dataset(a.from);
    g_manifest.dataset("source", a.from, src);
    cfg["count"] = a.count;
    cfg["skip"] = a.skip;
    if (a.skip + a.count > src.size()) {
      throw DataError("subset of rows [" + std::to_string(a.skip) + ", " + std::to_string(a.skip + a.count) +
                      ") exceeds the " + std::to_string(src.size()) + " rows of " + a.from);
    }
    std::vector<std::uint32_t> rows;
    if (sub->count("--seed") > 0) {
      g_manifest.seeds()["seed"] = a.seed;
      rows = sample_rows(src.size(), a.skip + a.count, a.seed);
      rows.erase(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(a.skip));
    } else {
      for (std::size_t k = 0; k < a.count; ++k) rows.push_back(static_cast<std::uint32_t>(a.skip + k));
    }
    d = select_rows(src, rows);
  }
  if (fs::path(a.out).extension() == ".csv") {
    save_csv(a.out, d);
  } else {
    save_binary(a.out, d);
  }
  g_manifest.artifacts()["dataset"] = a.out;
  g_manifest.dataset("output", a.out, d);
  g_manifest.timing("generate", sw.lap());
  emit({{"command", "gen"}, {"kind", kind}, {"Q", d.size()}, {"N", d.dim()}, {"fingerprint", hex64(fingerprint(d))}, {"out", a.out}});
  return kOk;
}

int run(int argc, char** argv) {
  CLI::App app{"Near-isometric binary hashing: training, evaluation and checks"};
  app.require_subcommand(1);
  app.fallthrough();
  std::optional<unsigned> threads;
  app.add_option("--threads", threads, "Worker threads (falls back to ISOHASH_THREADS)")->check(CLI::PositiveNumber);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a hash model");
  ta.app = train;
  train->add_option("--data", ta.data, "Dataset file (.csv, IDX or NIBHDS1)")->required();
  train->add_option("--algo", ta.algo)->check(CLI::IsMember({"nibh", "nibh-cg", "lsh"}));
  train->add_option("--bits", ta.bits, "Code length M")->check(CLI::PositiveNumber);
  train->add_option("--seed", ta.seed);
  train->add_option("--rho", ta.solver.rho);
  train->add_option("--eta", ta.solver.eta);
  train->add_option("--alpha-start", ta.solver.alpha_start);
  train->add_option("--alpha-end", ta.solver.alpha_end);
  train->add_option("--alpha-growth", ta.solver.alpha_growth);
  train->add_option("--tol", ta.solver.convergence_tol, "Relative loss change for convergence");
  train->add_option("--max-iters", ta.solver.max_outer_iters, "Outer ADMM iterations");
  train->add_option("--inner-iters", ta.solver.inner_gd_iters, "Accelerated gradient iterations per W-step");
  train->add_option("--secants", ta.secants, "all | bre | sample:K (nibh only)");
  train->add_option("--init-sample", ta.cg.init_sample_size, "Initial secant sample (nibh-cg)");
  train->add_option("--violator-batch", ta.cg.violator_batch, "Violators per generation (nibh-cg)");
  train->add_option("--active-tol", ta.cg.active_tol);
  train->add_option("--max-generations", ta.cg.max_generations);
  train->add_option("--scan-seed", ta.cg.scan_seed, "Violator scan seed (defaults to --seed)");
  train->add_flag("--active-only{false}", ta.cg.accumulate, "Carry only the active part of each secant set (nibh-cg)");
  train->add_flag("--full-continuation", ta.cg.full_continuation,
                  "Later generations rerun the alpha continuation with lambda refit (nibh-cg)");
  train->add_flag("--raw", ta.raw, "Skip mean removal and row normalization");
  train->add_option("--out", ta.out, "Model file")->required();
  train->add_option("--progress", ta.progress, "JSONL progress file, '-' for stderr");
  train->add_option("--manifest", ta.manifest);

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Evaluate a model on a dataset");
  eval->add_option("--model", ea.model)->required();
  eval->add_option("--data", ea.data)->required();
  eval->add_option("--metric", ea.metric)->check(CLI::IsMember({"delta", "map", "tau"}));
  eval->add_option("--k", ea.k, "Neighbors (default 10 for tau, 50 for map)")->check(CLI::PositiveNumber);
  eval->add_option("--queries", ea.queries, "all | first N rows");
  eval->add_option("--bins", ea.bins)->check(CLI::PositiveNumber);
  eval->add_flag("--raw", ea.raw, "Data is used without the model's preprocessing");
  eval->add_option("--manifest", ea.manifest);

  Fig1Args fa;
  auto* fig1 = app.add_subcommand("demo-fig1", "Linf vs l2 one-dimensional embedding demo");
  fig1->add_option("--seed", fa.seed);
  fig1->add_option("--grid-steps", fa.grid_steps)->check(CLI::Range(std::size_t{2}, std::size_t{1} << 24));
  fig1->add_option("--profile-csv", fa.profile_csv);
  fig1->add_option("--points-csv", fa.points_csv);
  fig1->add_option("--manifest", fa.manifest);

  auto* check = app.add_subcommand("check", "Theory checks");
  check->require_subcommand(1);
  Lemma1Args la;
  auto* lemma1 = check->add_subcommand("lemma1", "Sigmoid relaxation error bound");
  lemma1->add_option("--alpha", la.alphas)->delimiter(',');
  lemma1->add_option("--sigma", la.sigmas)->delimiter(',');
  lemma1->add_option("--samples", la.samples);
  lemma1->add_option("--seed", la.seed);
  lemma1->add_option("--manifest", la.manifest);
  KnnArgs ka;
  auto* knn = check->add_subcommand("knn", "k-NN preservation for queries with a large gap");
  knn->add_option("--model", ka.model)->required();
  knn->add_option("--data", ka.data)->required();
  knn->add_option("--k", ka.k)->check(CLI::PositiveNumber);
  knn->add_option("--queries", ka.queries);
  knn->add_flag("--raw", ka.raw);
  knn->add_option("--manifest", ka.manifest);

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Per-phase timings on random data");
  bench->add_option("--q", ba.qs)->delimiter(',');
  bench->add_option("--algos", ba.algos)->delimiter(',');
  bench->add_option("--bits", ba.bits)->check(CLI::PositiveNumber);
  bench->add_option("--n", ba.dim)->check(CLI::PositiveNumber);
  bench->add_option("--seed", ba.seed);
  bench->add_option("--manifest", ba.manifest);

  GenArgs ga;
  auto* gen = app.add_subcommand("gen", "Write a dataset file");
  gen->require_subcommand(1);
  auto* g_random = gen->add_subcommand("random", "Gaussian points");
  auto* g_squares = gen->add_subcommand("squares", "Translating squares images");
  auto* g_mixture = gen->add_subcommand("mixture", "Planted Gaussian mixture");
  auto* g_subset = gen->add_subcommand("subset", "Rows of another dataset");
  for (auto* s : {g_random, g_squares, g_mixture, g_subset}) {
    s->add_option("--out", ga.out, "Output (.csv or NIBHDS1)")->required();
    s->add_option("--manifest", ga.manifest);
  }
  for (auto* s : {g_random, g_mixture}) {
    s->add_option("--q", ga.q)->check(CLI::Range(std::size_t{2}, std::size_t{1} << 31));
    s->add_option("--n", ga.n)->check(CLI::PositiveNumber);
    s->add_option("--seed", ga.seed);
  }
  g_squares->add_option("--grid", ga.grid)->check(CLI::PositiveNumber);
  g_squares->add_option("--square", ga.square)->check(CLI::PositiveNumber);
  g_mixture->add_option("--components", ga.components)->check(CLI::PositiveNumber);
  g_mixture->add_option("--separation", ga.separation);
  g_mixture->add_option("--spread", ga.spread)->check(CLI::PositiveNumber);
  g_subset->add_option("--from", ga.from)->required();
  g_subset->add_option("--count", ga.count)->check(CLI::PositiveNumber);
  g_subset->add_option("--skip", ga.skip);
  g_subset->add_option("--seed", ga.seed, "Draw rows at random instead of taking them in order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }
  if (threads) set_thread_count(*threads);

  std::string name;
  for (const CLI::App* s = &app; !s->get_subcommands().empty();) {
    s = s->get_subcommands().front();
    name += name.empty() ? s->get_name() : "-" + s->get_name();
  }
  g_manifest.begin(name, argc, argv);
  if (threads) g_manifest.config()["threads"] = *threads;

  if (train->parsed()) return cmd_train(ta);
  if (eval->parsed()) return cmd_eval(ea);
  if (fig1->parsed()) return cmd_demo_fig1(fa);
  if (lemma1->parsed()) return cmd_check_lemma1(la);
  if (knn->parsed()) return cmd_check_knn(ka);
  if (bench->parsed()) return cmd_bench(ba);
  for (auto* s : {g_random, g_squares, g_mixture, g_subset})
    if (s->parsed()) return cmd_gen(s->get_name(), ga, s);
  return kUsage;
}

}  // namespace

int main(int argc, char** argv) {
  int code = kInternal;
  std::string error;
  try {
    code = run(argc, argv);
  } catch (const UsageError& e) {
    error = e.what();
    code = kUsage;
  } catch (const std::invalid_argument& e) {
    error = e.what();
    code = kUsage;
  } catch (const std::out_of_range& e) {
    error = e.what();
    code = kUsage;
  } catch (const CheckFailure& e) {
    error = e.what();
    code = kCheck;
  } catch (const SolverError& e) {
    error = e.what();
    code = kSolver;
  } catch (const Error& e) {
    error = e.what();
    code = kData;
  } catch (const std::exception& e) {
    error = e.what();
    code = kInternal;
  }
  if (!error.empty()) std::cerr << "isohash: error: " << error << '\n';
  g_manifest.finish(code, error);
  return code;
}
