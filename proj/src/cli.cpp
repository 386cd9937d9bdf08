#include "mmsold/cli.hpp"

#include <chrono>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "mmsold/baselines.hpp"
#include "mmsold/datasets.hpp"
#include "mmsold/error.hpp"
#include "mmsold/manifold.hpp"
#include "mmsold/metrics.hpp"
#include "mmsold/sampler.hpp"
#include "mmsold/serialize.hpp"
#include "mmsold/tilting.hpp"

namespace fs = std::filesystem;

namespace mmsold {

namespace {

struct Common {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, const std::string& out_help) {
  cmd->add_option("--seed", c.seed, "Random seed");
  cmd->add_option("--threads", c.threads, "Worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--out", c.out, out_help);
}

bool is_config_error(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::ParseError:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::InvalidBudget:
      return true;
    default:
      return false;
  }
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

TrainingSet load_training(const std::string& path) { return TrainingSet(load_csv(path)); }

// ---------------------------------------------------------------------------
// sample

struct RunSpec {
  std::string method = "mmsold";
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string out = "run";
  std::optional<std::string> train_csv;
  std::optional<Dataset2DSpec> dataset;
  SmoothingConfig smoothing;
  SamplerConfig sampler;
  CfdmConfig cfdm;
  BaoabConfig baoab;
  std::string baoab_tilting = "empirical";
};

RunSpec parse_run_spec(Json j) {
  // A manifest carries the resolved config under "config".
  if (j.is_object() && j.contains("config") && j.value("command", "") == "sample") j = j["config"];
  reject_unknown_keys(j, {"method", "seed", "threads", "out", "train_csv", "dataset", "smoothing", "sampler",
                          "cfdm", "baoab"},
                      "config");
  RunSpec s;
  s.method = j.value("method", s.method);
  require(s.method == "mmsold" || s.method == "cfdm" || s.method == "baoab", ErrorKind::InvalidArgument,
          "config.method must be mmsold, cfdm or baoab");
  s.seed = j.value("seed", s.seed);
  s.threads = j.value("threads", s.threads);
  s.out = j.value("out", s.out);
  if (j.contains("train_csv")) s.train_csv = j["train_csv"].get<std::string>();
  if (j.contains("dataset")) s.dataset = dataset_from_json(j["dataset"]);
  require(s.train_csv.has_value() != s.dataset.has_value(), ErrorKind::InvalidArgument,
          "config needs exactly one of 'train_csv' or 'dataset'");
  if (j.contains("smoothing")) s.smoothing = smoothing_from_json(j["smoothing"]);
  if (j.contains("sampler")) s.sampler = sampler_from_json(j["sampler"]);
  if (j.contains("cfdm")) s.cfdm = cfdm_from_json(j["cfdm"]);
  if (j.contains("baoab")) {
    s.baoab = baoab_from_json(j["baoab"]);
    s.baoab_tilting = j["baoab"].value("tilting", s.baoab_tilting);
    require(s.baoab_tilting == "empirical" || s.baoab_tilting == "leave_one_out" || s.baoab_tilting == "none",
            ErrorKind::InvalidArgument, "baoab.tilting must be empirical, leave_one_out or none");
  }
  return s;
}

Json resolved(const RunSpec& s) {
  Json j;
  j["method"] = s.method;
  j["seed"] = s.seed;
  j["threads"] = s.threads;
  j["out"] = s.out;
  if (s.train_csv) j["train_csv"] = *s.train_csv;
  if (s.dataset) j["dataset"] = to_json(*s.dataset);
  j["smoothing"] = to_json(s.smoothing);
  if (s.method == "mmsold") j["sampler"] = to_json(s.sampler);
  if (s.method == "cfdm") j["cfdm"] = to_json(s.cfdm);
  if (s.method == "baoab") {
    j["baoab"] = to_json(s.baoab);
    j["baoab"]["tilting"] = s.baoab_tilting;
  }
  return j;
}

TrainingSet training_for(const RunSpec& s) {
  if (s.train_csv) return load_training(*s.train_csv);
  return TrainingSet(generate_2d(*s.dataset));
}

Json manifest_base(const std::string& command, const Json& config, std::uint64_t seed) {
  Json m;
  m["command"] = command;
  m["seed"] = seed;
  m["config"] = config;
  return m;
}

int cmd_sample(const std::string& config_path, const Common& common, CLI::App& cmd, std::ostream& out) {
  RunSpec spec = parse_run_spec(read_json_file(config_path));
  if (cmd.count("--seed")) spec.seed = common.seed;
  if (cmd.count("--threads")) spec.threads = common.threads;
  if (cmd.count("--out")) spec.out = common.out;

  const TrainingSet ts = training_for(spec);
  const auto start = std::chrono::steady_clock::now();
  Json manifest = manifest_base("sample", resolved(spec), spec.seed);
  manifest["train"] = Json{{"size", ts.size()}, {"dim", ts.dim()}, {"mean", vector_to_json(ts.mean())}};
  Matrix samples;

  if (spec.method == "mmsold") {
    SamplerConfig scfg = spec.sampler;
    scfg.seed = spec.seed;
    scfg.threads = spec.threads;
    scfg.validate(ts.dim());
    RunResult result = run(ts, spec.smoothing, scfg);
    samples = std::move(result.samples);
    Json diag = Json::array();
    double worst_mean = 0.0, worst_gram = 0.0;
    for (const auto& d : result.diagnostics) {
      diag.push_back(to_json(d));
      worst_mean = std::max(worst_mean, d.mean_residual);
      worst_gram = std::max(worst_gram, d.gram_residual);
    }
    manifest["diagnostics"] = std::move(diag);
    manifest["max_mean_residual"] = worst_mean;
    manifest["max_gram_residual"] = worst_gram;
  } else if (spec.method == "cfdm") {
    CfdmConfig c = spec.cfdm;
    c.sigma = spec.smoothing.sigma;
    c.mc_samples = spec.smoothing.mc_samples;
    c.seed = spec.seed;
    c.threads = spec.threads;
    Json steps = Json::array();
    samples = sigma_cfdm_run(ts, c, [&](int step, double t, const Matrix& z, const Matrix&) {
      const auto now = std::chrono::steady_clock::now();
      steps.push_back(Json{{"step", step},
                           {"t", t},
                           {"trace_cov", ((z.rowwise() - z.colwise().mean()).squaredNorm()) / z.rows()},
                           {"seconds", std::chrono::duration<double>(now - start).count()}});
    });
    manifest["diagnostics"] = std::move(steps);
  } else {
    BaoabConfig b = spec.baoab;
    b.seed = spec.seed;
    b.threads = spec.threads;
    TiltingParams params;
    if (spec.baoab_tilting == "none") {
      params.lambda = Vector::Zero(ts.dim());
      params.quad = Matrix::Zero(ts.dim(), ts.dim());
    } else {
      params = estimate_tilting(ts, spec.smoothing, std::nullopt, parse_provenance(spec.baoab_tilting), spec.seed,
                                spec.threads);
    }
    manifest["tilting"] = to_json(params);
    samples = kinetic_langevin_baoab(ts, spec.smoothing, params, b);
  }

  manifest["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  manifest["outputs"] = Json{{"samples", "samples.csv"}};
  fs::create_directories(spec.out);
  save_csv((fs::path(spec.out) / "samples.csv").string(), samples);
  write_json_file((fs::path(spec.out) / "manifest.json").string(), manifest);
  out << "wrote " << samples.rows() << " samples to " << (fs::path(spec.out) / "samples.csv").string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// sweep: one MM-SOLD trajectory per step size, checkpointed at each T

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> values;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      require(used == item.size(), ErrorKind::InvalidArgument, "");
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidArgument, flag + ": '" + item + "' is not a number");
    }
  }
  require(!values.empty(), ErrorKind::InvalidArgument, flag + " is empty");
  return values;
}

std::string cell_name(int t, double h) {
  std::ostringstream s;
  s << "cell_T" << t << "_h" << h << ".json";
  return s.str();
}

int cmd_sweep(const std::string& config_path, const std::string& steps, const std::string& checkpoints,
              const std::string& reference_path, Eigen::Index projections, const Common& common, CLI::App& cmd,
              std::ostream& out) {
  RunSpec spec = parse_run_spec(read_json_file(config_path));
  require(spec.method == "mmsold", ErrorKind::InvalidArgument, "sweep runs the mmsold method only");
  if (cmd.count("--seed")) spec.seed = common.seed;
  if (cmd.count("--threads")) spec.threads = common.threads;
  if (cmd.count("--out")) spec.out = common.out;
  const std::vector<double> hs = parse_list(steps, "--steps");
  std::vector<int> ts_list;
  for (double t : parse_list(checkpoints, "--checkpoints")) {
    require(t >= 0 && t == std::floor(t), ErrorKind::InvalidArgument, "--checkpoints must be integers >= 0");
    ts_list.push_back(static_cast<int>(t));
  }
  std::sort(ts_list.begin(), ts_list.end());

  const TrainingSet ts = training_for(spec);
  Matrix reference;
  if (!reference_path.empty()) {
    reference = load_csv(reference_path, ts.dim());
  } else {
    require(spec.dataset.has_value(), ErrorKind::InvalidArgument,
            "sweep needs --reference when the config uses train_csv");
    Dataset2DSpec fresh = *spec.dataset;
    fresh.seed = spec.dataset->seed + 1;
    fresh.n_samples = std::max<Eigen::Index>(spec.sampler.particles, 1);
    reference = generate_2d(fresh);
  }
  const WhiteningMap map(ts.mean(), ts.cholesky().chol);
  fs::create_directories(spec.out);

  for (double h : hs) {
    SamplerConfig scfg = spec.sampler;
    scfg.seed = spec.seed;
    scfg.threads = spec.threads;
    scfg.step_size = h;
    scfg.iterations = ts_list.back();
    scfg.validate(ts.dim());
    double worst_mean = 0.0, worst_gram = 0.0;
    std::size_t next = 0;
    const auto start = std::chrono::steady_clock::now();
    auto emit = [&](int t, const Matrix* z, const std::string& failure) {
      Json cell;
      cell["T"] = t;
      cell["h"] = h;
      cell["completed"] = failure.empty();
      if (!failure.empty()) cell["error"] = failure;
      cell["max_mean_residual"] = worst_mean;
      cell["max_gram_residual"] = worst_gram;
      if (z) {
        Stream rng(spec.seed, Domain::Metric, static_cast<std::uint64_t>(t));
        cell["sw2"] = sliced_w2(*z, reference, projections, rng);
        cell["projections"] = projections;
      }
      cell["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      cell["config"] = resolved(spec);
      write_json_file((fs::path(spec.out) / cell_name(t, h)).string(), cell);
    };
    try {
      run(ts, spec.smoothing, scfg, [&](const ParticleState& state, const IterationDiagnostics& d) {
        worst_mean = std::max(worst_mean, d.mean_residual);
        worst_gram = std::max(worst_gram, d.gram_residual);
        while (next < ts_list.size() && ts_list[next] == state.iteration) {
          const Matrix z = map.unwhiten(state.y.matrix());
          emit(ts_list[next], &z, "");
          ++next;
        }
      });
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NonFiniteState) throw;
      for (; next < ts_list.size(); ++next) emit(ts_list[next], nullptr, e.what());
    }
  }
  out << "wrote " << hs.size() * ts_list.size() << " cells to " << spec.out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// eval

int cmd_eval(const std::string& samples_path, const std::string& reference_path, const std::string& train_path,
             const std::vector<std::string>& metrics, Eigen::Index projections, int k, double pct,
             const Common& common, std::ostream& out) {
  const Matrix samples = load_csv(samples_path);
  const Matrix reference = load_csv(reference_path, samples.cols());
  Matrix train;
  if (!train_path.empty()) train = load_csv(train_path, samples.cols());
  Json reports = Json::array();
  for (const auto& name : metrics) {
    MetricReport r;
    r.metric = name;
    r.seed = common.seed;
    r.size_a = samples.rows();
    r.size_b = reference.rows();
    if (name == "sw2") {
      Stream rng(common.seed, Domain::Metric);
      r.value = sliced_w2(samples, reference, projections, rng);
      r.config["projections"] = static_cast<double>(projections);
    } else if (name == "kid") {
      r.value = kid_poly(samples, reference);
      r.config["degree"] = 3;
    } else if (name == "recall") {
      r.value = recall_knn(reference, samples, k);
      r.config["k"] = k;
    } else if (name == "dup_rate") {
      require(train.size() > 0, ErrorKind::InvalidArgument, "dup_rate needs --train");
      r.value = dup_rate(train, samples, pct);
      r.size_b = train.rows();
      r.config["percentile"] = pct;
    }
    reports.push_back(to_json(r));
  }
  const Json doc{{"command", "eval"}, {"samples", samples_path}, {"reference", reference_path}, {"reports", reports}};
  if (common.out.empty()) {
    out << doc.dump(2) << '\n';
  } else {
    ensure_parent(common.out);
    write_json_file(common.out, doc);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// tilt / fitclass / classify / density

struct SmoothingFlags {
  double delta = 0.1;
  double sigma = 0.0;
  int mc = 2;
  SmoothingConfig get() const {
    SmoothingConfig c{delta, sigma, mc};
    c.validate();
    return c;
  }
};

void add_smoothing(CLI::App* cmd, SmoothingFlags& s) {
  cmd->add_option("--delta", s.delta, "Mixture component std");
  cmd->add_option("--sigma", s.sigma, "Smoothing bandwidth");
  cmd->add_option("--mc", s.mc, "Monte Carlo samples M (even)");
}

TiltingParams fit_tilting(const TrainingSet& ts, const SmoothingConfig& cfg, const std::string& mode,
                          std::optional<double> zeta, double spacing, std::uint64_t seed, unsigned threads) {
  if (mode == "self_consistent") {
    require(ts.dim() == 2, ErrorKind::InvalidArgument, "self_consistent tilting is available in 2D only");
    SelfConsistentOptions opts;
    opts.zeta = zeta.value_or(default_zeta(ts));
    PotentialOptions popts;
    popts.threads = threads;
    popts.noise_seed = seed;
    return solve_tilting_selfconsistent_2d(ts, cfg, grid_for_data(ts, cfg, spacing), opts, popts).params;
  }
  return estimate_tilting(ts, cfg, zeta, parse_provenance(mode), seed, threads);
}

int cmd_tilt(const std::string& train_path, const SmoothingFlags& sf, const std::string& mode,
             std::optional<double> zeta, double spacing, const Common& common, std::ostream& out) {
  const TrainingSet ts = load_training(train_path);
  const Json j = to_json(fit_tilting(ts, sf.get(), mode, zeta, spacing, common.seed, common.threads));
  if (common.out.empty()) {
    out << j.dump(2) << '\n';
  } else {
    ensure_parent(common.out);
    write_json_file(common.out, j);
  }
  return 0;
}

// Features followed by an integer label column.
std::pair<Matrix, std::vector<int>> split_labels(const Matrix& m, Eigen::Index classes, const std::string& path) {
  require(m.cols() >= 2, ErrorKind::DimensionMismatch, path + ": needs features plus a label column");
  std::vector<int> labels(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double v = m(i, m.cols() - 1);
    require(v == std::floor(v) && v >= 0 && v < static_cast<double>(classes), ErrorKind::ParseError,
            path + ": row " + std::to_string(i + 1) + " has an invalid label");
    labels[static_cast<std::size_t>(i)] = static_cast<int>(v);
  }
  return {m.leftCols(m.cols() - 1), labels};
}

int cmd_fitclass(const std::vector<std::string>& class_paths, const std::string& validation_path,
                 const SmoothingFlags& sf, const std::string& mode, std::optional<double> zeta, double spacing,
                 const Common& common, std::ostream& out) {
  require(!common.out.empty(), ErrorKind::InvalidArgument, "fitclass needs --out <models dir>");
  const SmoothingConfig cfg = sf.get();
  std::vector<EnergyModel> models;
  for (std::size_t c = 0; c < class_paths.size(); ++c) {
    TrainingSet ts = load_training(class_paths[c]);
    if (!models.empty())
      require(ts.dim() == models.front().ts.dim(), ErrorKind::DimensionMismatch,
              class_paths[c] + ": dimension differs from the first class");
    TiltingParams params = fit_tilting(ts, cfg, mode, zeta, spacing, common.seed + c, common.threads);
    models.push_back(make_energy_model(std::move(ts), cfg, std::move(params), common.seed + 1000003 * (c + 1)));
  }
  if (!validation_path.empty()) {
    const auto [x, labels] = split_labels(load_csv(validation_path, models.front().ts.dim() + 1),
                                          static_cast<Eigen::Index>(models.size()), validation_path);
    calibrate_biases(models, x, labels, common.threads);
  }
  fs::create_directories(common.out);
  Json index{{"classes", Json::array()}};
  for (std::size_t c = 0; c < models.size(); ++c) {
    const std::string name = "class_" + std::to_string(c) + ".json";
    write_json_file((fs::path(common.out) / name).string(), to_json(models[c]));
    index["classes"].push_back(name);
  }
  write_json_file((fs::path(common.out) / "models.json").string(), index);
  out << "wrote " << models.size() << " class models to " << common.out << '\n';
  return 0;
}

std::vector<EnergyModel> load_models(const std::string& dir) {
  const Json index = read_json_file((fs::path(dir) / "models.json").string());
  require(index.is_object() && index.contains("classes") && index["classes"].is_array() && !index["classes"].empty(),
          ErrorKind::ParseError, dir + "/models.json: expected a non-empty 'classes' array");
  std::vector<EnergyModel> models;
  for (const auto& name : index["classes"]) {
    require(name.is_string(), ErrorKind::ParseError, dir + "/models.json: class entries must be file names");
    models.push_back(energy_model_from_json(read_json_file((fs::path(dir) / name.get<std::string>()).string())));
  }
  return models;
}

int cmd_classify(const std::string& models_dir, const std::string& queries_path, const Common& common,
                 std::ostream& out) {
  const std::vector<EnergyModel> models = load_models(models_dir);
  const Matrix q = load_csv(queries_path, models.front().ts.dim());
  const Matrix energies = energy_table(models, q, common.threads);
  Matrix labels(q.rows(), 1);
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    int best = 0;
    double best_e = energies(i, 0) + models[0].bias;
    for (std::size_t c = 1; c < models.size(); ++c) {
      const double e = energies(i, static_cast<Eigen::Index>(c)) + models[c].bias;
      if (e < best_e) {
        best_e = e;
        best = static_cast<int>(c);
      }
    }
    labels(i, 0) = best;
  }
  if (common.out.empty()) {
    out << format_csv(labels, "label");
  } else {
    ensure_parent(common.out);
    save_csv(common.out, labels, "label");
  }
  return 0;
}

int cmd_density(const std::string& train_path, const SmoothingFlags& sf, const std::string& tilt,
                const std::string& params_path, double spacing, const std::string& quadrature,
                const std::string& params_out, const Common& common, std::ostream& out) {
  const TrainingSet ts = load_training(train_path);
  require(ts.dim() == 2, ErrorKind::DimensionMismatch, "density emits 2D plot data only");
  const SmoothingConfig cfg = sf.get();
  PotentialOptions popts;
  popts.method = quadrature == "mc" ? SmoothingQuadrature::MonteCarlo : SmoothingQuadrature::GaussHermite;
  popts.noise_seed = common.seed;
  popts.threads = common.threads;
  const GridSpec grid = grid_for_data(ts, cfg, spacing);
  const GridPotential potential = compute_grid_potential(ts, cfg, grid, popts);
  TiltingParams params;
  if (tilt == "none") {
    params.lambda = Vector::Zero(2);
    params.quad = Matrix::Zero(2, 2);
  } else if (tilt == "file") {
    require(!params_path.empty(), ErrorKind::InvalidArgument, "--tilt file needs --params");
    params = tilting_from_json(read_json_file(params_path));
    require(params.lambda.size() == 2, ErrorKind::DimensionMismatch, params_path + ": not a 2D tilt");
  } else if (tilt == "self_consistent") {
    SelfConsistentOptions opts;
    opts.zeta = default_zeta(ts);
    params = solve_tilting_selfconsistent_2d(ts, potential, opts).params;
  } else {
    params = estimate_tilting(ts, cfg, std::nullopt, parse_provenance(tilt), common.seed, common.threads);
  }
  if (!params_out.empty()) {
    ensure_parent(params_out);
    write_json_file(params_out, to_json(params));
  }
  const GridDensity density = grid_density_2d(potential, ts.mean(), params);
  Matrix table(density.nodes.rows(), 3);
  table.leftCols(2) = density.nodes;
  table.col(2) = density.density;
  if (common.out.empty()) {
    out << format_csv(table, "x,y,density");
  } else {
    ensure_parent(common.out);
    save_csv(common.out, table, "x,y,density");
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Moment-matched score-smoothed Langevin sampling"};
  app.require_subcommand(1);

  // gen2d
  Common gen_common;
  std::string kind = "checkerboard";
  Dataset2DSpec gen;
  bool uniform = false;
  auto* gen2d = app.add_subcommand("gen2d", "Generate a synthetic 2D dataset as CSV");
  add_common(gen2d, gen_common, "Output CSV (stdout when omitted)");
  gen2d->add_option("--kind", kind, "checkerboard | two_spirals | circle")
      ->check(CLI::IsMember({"checkerboard", "two_spirals", "circle"}));
  gen2d->add_option("--n", gen.n_samples, "Number of points")->check(CLI::PositiveNumber);
  gen2d->add_flag("--equispaced", "Circle: equispaced angles (default)");
  gen2d->add_flag("--uniform", uniform, "Circle: uniform random angles");
  gen2d->add_option("--cells", gen.cells, "Checkerboard cells per axis");
  gen2d->add_option("--extent", gen.extent, "Checkerboard half-width");
  gen2d->add_option("--turns", gen.turns, "Spiral turns");
  gen2d->add_option("--spiral-noise", gen.spiral_noise, "Spiral jitter std");
  gen2d->add_option("--radius", gen.radius, "Circle radius");
  gen2d->add_option("--circle-noise", gen.circle_noise, "Circle jitter std");

  // sample
  Common sample_common;
  std::string sample_config;
  auto* sample = app.add_subcommand("sample", "Run mmsold, cfdm or baoab from a JSON config or manifest");
  add_common(sample, sample_common, "Output directory (overrides config)");
  sample->add_option("--config", sample_config, "Config or manifest JSON")->required();

  // sweep
  Common sweep_common;
  std::string sweep_config, sweep_steps = "1e-5,1e-4,5e-4,1e-3,2e-3,5e-3,8e-3", sweep_ts = "1,5,25,100,500",
                            sweep_reference;
  Eigen::Index sweep_projections = 512;
  auto* sweep = app.add_subcommand("sweep", "Step size x iteration grid, one JSON per cell");
  add_common(sweep, sweep_common, "Output directory (overrides config)");
  sweep->add_option("--config", sweep_config, "Config JSON (method mmsold)")->required();
  sweep->add_option("--steps", sweep_steps, "Comma-separated step sizes");
  sweep->add_option("--checkpoints", sweep_ts, "Comma-separated iteration counts");
  sweep->add_option("--reference", sweep_reference, "Reference CSV for SW2 (default: fresh dataset draw)");
  sweep->add_option("--projections", sweep_projections, "SW2 projections")->check(CLI::PositiveNumber);

  // eval
  Common eval_common;
  std::string eval_samples, eval_reference, eval_train;
  std::vector<std::string> eval_metrics{"sw2"};
  Eigen::Index eval_projections = 512;
  int eval_k = 3;
  double eval_pct = 5.0;
  auto* eval = app.add_subcommand("eval", "Evaluate samples against a reference");
  add_common(eval, eval_common, "Report JSON (stdout when omitted)");
  eval->add_option("--samples", eval_samples, "Samples CSV")->required();
  eval->add_option("--reference", eval_reference, "Reference or test CSV")->required();
  eval->add_option("--train", eval_train, "Training CSV (dup_rate)");
  eval->add_option("--metrics", eval_metrics, "sw2 kid recall dup_rate")
      ->delimiter(',')
      ->check(CLI::IsMember({"sw2", "kid", "recall", "dup_rate"}));
  eval->add_option("--projections", eval_projections, "SW2 projections")->check(CLI::PositiveNumber);
  eval->add_option("--k", eval_k, "Recall neighbor rank")->check(CLI::PositiveNumber);
  eval->add_option("--percentile", eval_pct, "dup_rate percentile")->check(CLI::Range(0.0, 100.0));

  // tilt
  Common tilt_common;
  std::string tilt_train, tilt_mode = "empirical";
  SmoothingFlags tilt_sf;
  std::optional<double> tilt_zeta;
  double tilt_spacing = 0.05;
  auto* tilt = app.add_subcommand("tilt", "Estimate tilting parameters");
  add_common(tilt, tilt_common, "Params JSON (stdout when omitted)");
  tilt->add_option("--train", tilt_train, "Training CSV")->required();
  add_smoothing(tilt, tilt_sf);
  tilt->add_option("--mode", tilt_mode, "empirical | leave_one_out | self_consistent")
      ->check(CLI::IsMember({"empirical", "leave_one_out", "self_consistent"}));
  tilt->add_option("--zeta", tilt_zeta, "Lyapunov regularization");
  tilt->add_option("--spacing", tilt_spacing, "Grid spacing for self_consistent")->check(CLI::PositiveNumber);

  // fitclass
  Common fit_common;
  std::vector<std::string> fit_classes;
  std::string fit_validation, fit_mode = "empirical";
  SmoothingFlags fit_sf;
  std::optional<double> fit_zeta;
  double fit_spacing = 0.05;
  auto* fitclass = app.add_subcommand("fitclass", "Fit one energy model per class");
  add_common(fitclass, fit_common, "Models directory");
  fitclass->add_option("--class", fit_classes, "Training CSV of one class (repeat, in label order)")
      ->required()
      ->expected(2, -1);
  fitclass->add_option("--validation", fit_validation, "Validation CSV with a trailing label column");
  add_smoothing(fitclass, fit_sf);
  fitclass->add_option("--mode", fit_mode, "empirical | leave_one_out | self_consistent")
      ->check(CLI::IsMember({"empirical", "leave_one_out", "self_consistent"}));
  fitclass->add_option("--zeta", fit_zeta, "Lyapunov regularization");
  fitclass->add_option("--spacing", fit_spacing, "Grid spacing for self_consistent")->check(CLI::PositiveNumber);

  // classify
  Common cls_common;
  std::string cls_models, cls_queries;
  auto* classify = app.add_subcommand("classify", "Label queries with fitted class models");
  add_common(classify, cls_common, "Labels CSV (stdout when omitted)");
  classify->add_option("--models", cls_models, "Models directory")->required();
  classify->add_option("--queries", cls_queries, "Queries CSV")->required();

  // density
  Common den_common;
  std::string den_train, den_tilt = "none", den_params, den_quad = "gh", den_params_out;
  SmoothingFlags den_sf;
  double den_spacing = 0.05;
  auto* density = app.add_subcommand("density", "Tilted smoothed density on a 2D grid (plot data)");
  add_common(density, den_common, "Grid CSV x,y,density (stdout when omitted)");
  density->add_option("--train", den_train, "Training CSV")->required();
  add_smoothing(density, den_sf);
  density->add_option("--tilt", den_tilt, "none | empirical | leave_one_out | self_consistent | file")
      ->check(CLI::IsMember({"none", "empirical", "leave_one_out", "self_consistent", "file"}));
  density->add_option("--params", den_params, "Params JSON for --tilt file");
  density->add_option("--params-out", den_params_out, "Write the tilt used");
  density->add_option("--spacing", den_spacing, "Grid spacing")->check(CLI::PositiveNumber);
  density->add_option("--quadrature", den_quad, "gh | mc")->check(CLI::IsMember({"gh", "mc"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, er;
    const int code = app.exit(e, o, er);
    out << o.str();
    err << er.str();
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen2d) {
      gen.kind = parse_dataset_kind(kind);
      gen.seed = gen_common.seed;
      gen.equispaced = !uniform;
      const Matrix m = generate_2d(gen);
      if (gen_common.out.empty()) {
        out << format_csv(m, "x,y");
      } else {
        ensure_parent(gen_common.out);
        save_csv(gen_common.out, m, "x,y");
      }
      return 0;
    }
    if (*sample) return cmd_sample(sample_config, sample_common, *sample, out);
    if (*sweep)
      return cmd_sweep(sweep_config, sweep_steps, sweep_ts, sweep_reference, sweep_projections, sweep_common, *sweep,
                       out);
    if (*eval)
      return cmd_eval(eval_samples, eval_reference, eval_train, eval_metrics, eval_projections, eval_k, eval_pct,
                      eval_common, out);
    if (*tilt) return cmd_tilt(tilt_train, tilt_sf, tilt_mode, tilt_zeta, tilt_spacing, tilt_common, out);
    if (*fitclass)
      return cmd_fitclass(fit_classes, fit_validation, fit_sf, fit_mode, fit_zeta, fit_spacing, fit_common, out);
    if (*classify) return cmd_classify(cls_models, cls_queries, cls_common, out);
    if (*density)
      return cmd_density(den_train, den_sf, den_tilt, den_params, den_spacing, den_quad, den_params_out, den_common,
                         out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_config_error(e.kind()) ? 2 : 1;
  } catch (const nlohmann::json::exception& e) {
    err << "error (ParseError): " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace mmsold
