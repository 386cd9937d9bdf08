#include "mmsold/serialize.hpp"

#include <fstream>
#include <sstream>

#include "mmsold/error.hpp"

namespace mmsold {

namespace {

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::InvalidArgument, std::string("config key '") + key + "' has the wrong type");
  }
}

void require_object(const Json& j, const std::string& where) {
  require(j.is_object(), ErrorKind::InvalidArgument, where + " must be a JSON object");
}

}  // namespace

Json matrix_to_json(const MatrixRef& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j, const std::string& what) {
  require(j.is_array() && !j.empty() && j[0].is_array(), ErrorKind::ParseError,
          what + ": expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = j[static_cast<std::size_t>(r)];
    require(row.is_array() && static_cast<Eigen::Index>(row.size()) == cols, ErrorKind::ParseError,
            what + ": row " + std::to_string(r) + " has the wrong length");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Json& v = row[static_cast<std::size_t>(c)];
      require(v.is_number(), ErrorKind::ParseError,
              what + ": entry (" + std::to_string(r) + ", " + std::to_string(c) + ") is not a number");
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

Json vector_to_json(const VectorRef& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const Json& j, const std::string& what) {
  require(j.is_array(), ErrorKind::ParseError, what + ": expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    require(j[i].is_number(), ErrorKind::ParseError, what + ": entry " + std::to_string(i) + " is not a number");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  require_object(j, where);
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw Error(ErrorKind::InvalidArgument, where + ": unknown key '" + key + "'");
  }
}

Json to_json(const TiltingParams& p) {
  Json j;
  j["lambda"] = vector_to_json(p.lambda);
  Json flat = Json::array();
  for (Eigen::Index r = 0; r < p.quad.rows(); ++r)
    for (Eigen::Index c = 0; c < p.quad.cols(); ++c) flat.push_back(p.quad(r, c));
  j["Lambda"] = std::move(flat);
  j["zeta"] = p.zeta;
  j["provenance"] = to_string(p.provenance);
  return j;
}

TiltingParams tilting_from_json(const Json& j) {
  reject_unknown_keys(j, {"lambda", "Lambda", "zeta", "provenance"}, "tilting params");
  require(j.contains("lambda") && j.contains("Lambda"), ErrorKind::ParseError,
          "tilting params need 'lambda' and 'Lambda'");
  TiltingParams p;
  p.lambda = vector_from_json(j["lambda"], "lambda");
  const Vector flat = vector_from_json(j["Lambda"], "Lambda");
  const Eigen::Index d = p.lambda.size();
  require(flat.size() == d * d, ErrorKind::ParseError, "Lambda must hold d*d row-major entries");
  p.quad = Matrix::Map(flat.data(), d, d);
  p.zeta = get_or(j, "zeta", 0.0);
  p.provenance = parse_provenance(get_or<std::string>(j, "provenance", "empirical"));
  return p;
}

Json to_json(const MetricReport& r) {
  Json j;
  j["metric"] = r.metric;
  j["value"] = r.value;
  Json cfg = Json::object();
  for (const auto& [k, v] : r.config) cfg[k] = v;
  j["config"] = std::move(cfg);
  j["size_a"] = r.size_a;
  j["size_b"] = r.size_b;
  j["seed"] = r.seed;
  return j;
}

Json to_json(const SmoothingConfig& c) {
  return Json{{"delta", c.delta}, {"sigma", c.sigma}, {"mc_samples", c.mc_samples}};
}

SmoothingConfig smoothing_from_json(const Json& j) {
  reject_unknown_keys(j, {"delta", "sigma", "mc_samples"}, "smoothing");
  SmoothingConfig c;
  c.delta = get_or(j, "delta", c.delta);
  c.sigma = get_or(j, "sigma", c.sigma);
  c.mc_samples = get_or(j, "mc_samples", c.mc_samples);
  c.validate();
  return c;
}

Json to_json(const SamplerConfig& c) {
  Json j{{"step_size", c.step_size},
         {"iterations", c.iterations},
         {"scheme", to_string(c.scheme)},
         {"particles", c.particles}};
  if (c.nearest_neighbor) j["nearest_neighbor"] = Json{{"k", c.nearest_neighbor->k}, {"l", c.nearest_neighbor->l}};
  return j;
}

SamplerConfig sampler_from_json(const Json& j) {
  reject_unknown_keys(j, {"step_size", "iterations", "scheme", "particles", "nearest_neighbor"}, "sampler");
  SamplerConfig c;
  c.step_size = get_or(j, "step_size", c.step_size);
  c.iterations = get_or(j, "iterations", c.iterations);
  c.scheme = parse_scheme(get_or<std::string>(j, "scheme", to_string(c.scheme)));
  c.particles = get_or<Eigen::Index>(j, "particles", c.particles);
  if (j.contains("nearest_neighbor") && !j["nearest_neighbor"].is_null()) {
    const Json& nn = j["nearest_neighbor"];
    reject_unknown_keys(nn, {"k", "l"}, "sampler.nearest_neighbor");
    c.nearest_neighbor = NearestNeighborMode{get_or<Eigen::Index>(nn, "k", 0), get_or<Eigen::Index>(nn, "l", 0)};
  }
  return c;
}

Json to_json(const CfdmConfig& c) {
  Json j{{"steps", c.steps},
         {"t_start", c.t_start},
         {"t_end", c.t_end},
         {"particles", c.particles}};
  if (c.schedule.preset() == TimeIndexedGmm::Preset::Straight) {
    j["schedule"] = "straight";
  } else {
    j["schedule"] = "ornstein_uhlenbeck";
    j["alpha"] = c.schedule.alpha();
  }
  return j;
}

CfdmConfig cfdm_from_json(const Json& j) {
  reject_unknown_keys(j, {"steps", "t_start", "t_end", "particles", "schedule", "alpha"}, "cfdm");
  CfdmConfig c;
  c.steps = get_or(j, "steps", c.steps);
  c.t_start = get_or(j, "t_start", c.t_start);
  c.t_end = get_or(j, "t_end", c.t_end);
  c.particles = get_or<Eigen::Index>(j, "particles", c.particles);
  const std::string schedule = get_or<std::string>(j, "schedule", "straight");
  if (schedule == "straight") {
    c.schedule = TimeIndexedGmm::straight();
  } else if (schedule == "ornstein_uhlenbeck" || schedule == "ou") {
    c.schedule = TimeIndexedGmm::ornstein_uhlenbeck(get_or(j, "alpha", 1.0));
  } else {
    throw Error(ErrorKind::InvalidArgument, "cfdm.schedule must be 'straight' or 'ornstein_uhlenbeck'");
  }
  return c;
}

Json to_json(const BaoabConfig& c) {
  return Json{{"step_size", c.step_size},
              {"friction", c.friction},
              {"iterations", c.iterations},
              {"particles", c.particles}};
}

BaoabConfig baoab_from_json(const Json& j) {
  reject_unknown_keys(j, {"step_size", "friction", "iterations", "particles", "tilting"}, "baoab");
  BaoabConfig c;
  c.step_size = get_or(j, "step_size", c.step_size);
  c.friction = get_or(j, "friction", c.friction);
  c.iterations = get_or(j, "iterations", c.iterations);
  c.particles = get_or<Eigen::Index>(j, "particles", c.particles);
  c.validate();
  return c;
}

Json to_json(const Dataset2DSpec& s) {
  Json j{{"kind", to_string(s.kind)}, {"n_samples", s.n_samples}, {"seed", s.seed}};
  switch (s.kind) {
    case Dataset2DKind::Checkerboard:
      j["cells"] = s.cells;
      j["extent"] = s.extent;
      break;
    case Dataset2DKind::TwoSpirals:
      j["turns"] = s.turns;
      j["noise"] = s.spiral_noise;
      break;
    case Dataset2DKind::Circle:
      j["radius"] = s.radius;
      j["noise"] = s.circle_noise;
      j["equispaced"] = s.equispaced;
      break;
  }
  return j;
}

Dataset2DSpec dataset_from_json(const Json& j) {
  reject_unknown_keys(j, {"kind", "n_samples", "seed", "cells", "extent", "turns", "noise", "radius", "equispaced"},
                      "dataset");
  Dataset2DSpec s;
  s.kind = parse_dataset_kind(get_or<std::string>(j, "kind", "checkerboard"));
  s.n_samples = get_or<Eigen::Index>(j, "n_samples", s.n_samples);
  s.seed = get_or<std::uint64_t>(j, "seed", s.seed);
  s.cells = get_or(j, "cells", s.cells);
  s.extent = get_or(j, "extent", s.extent);
  s.turns = get_or(j, "turns", s.turns);
  s.radius = get_or(j, "radius", s.radius);
  s.equispaced = get_or(j, "equispaced", s.equispaced);
  if (s.kind == Dataset2DKind::TwoSpirals) s.spiral_noise = get_or(j, "noise", s.spiral_noise);
  if (s.kind == Dataset2DKind::Circle) s.circle_noise = get_or(j, "noise", s.circle_noise);
  require(s.n_samples >= 1, ErrorKind::InvalidArgument, "dataset.n_samples must be >= 1");
  return s;
}

Json to_json(const IterationDiagnostics& d) {
  return Json{{"iteration", d.iteration},
              {"mean_residual", d.mean_residual},
              {"gram_residual", d.gram_residual},
              {"mean_score_norm", d.mean_score_norm},
              {"seconds", d.seconds}};
}

Json to_json(const EnergyModel& m) {
  return Json{{"smoothing", to_json(m.cfg)},
              {"tilting", to_json(m.params)},
              {"noise_seed", m.noise_seed},
              {"bias", m.bias},
              {"train", matrix_to_json(m.ts.points())}};
}

EnergyModel energy_model_from_json(const Json& j) {
  reject_unknown_keys(j, {"smoothing", "tilting", "noise_seed", "bias", "train"}, "model");
  require(j.contains("train") && j.contains("tilting") && j.contains("smoothing"), ErrorKind::ParseError,
          "model needs 'train', 'tilting' and 'smoothing'");
  TrainingSet ts(matrix_from_json(j["train"], "model.train"));
  const SmoothingConfig cfg = smoothing_from_json(j["smoothing"]);
  TiltingParams params = tilting_from_json(j["tilting"]);
  require(params.lambda.size() == ts.dim(), ErrorKind::DimensionMismatch, "model tilt and training data disagree on d");
  EnergyModel m = make_energy_model(std::move(ts), cfg, std::move(params), get_or<std::uint64_t>(j, "noise_seed", 0));
  m.bias = get_or(j, "bias", 0.0);
  return m;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::InvalidArgument, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::ParseError, path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::InvalidArgument, "cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace mmsold
