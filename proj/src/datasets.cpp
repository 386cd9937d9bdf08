#include "mmsold/datasets.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <vector>

#include "mmsold/error.hpp"
#include "mmsold/random.hpp"

namespace mmsold {

std::string to_string(Dataset2DKind kind) {
  switch (kind) {
    case Dataset2DKind::Checkerboard: return "checkerboard";
    case Dataset2DKind::TwoSpirals: return "two_spirals";
    case Dataset2DKind::Circle: return "circle";
  }
  return "checkerboard";
}

Dataset2DKind parse_dataset_kind(const std::string& name) {
  if (name == "checkerboard") return Dataset2DKind::Checkerboard;
  if (name == "two_spirals" || name == "spirals") return Dataset2DKind::TwoSpirals;
  if (name == "circle") return Dataset2DKind::Circle;
  throw Error(ErrorKind::InvalidArgument,
              "unknown dataset kind '" + name + "' (expected checkerboard, two_spirals or circle)");
}

bool in_dark_cell(double x, double y, int cells, double extent) {
  if (x < -extent || x > extent || y < -extent || y > extent) return false;
  const double width = 2.0 * extent / cells;
  const int col = std::min(cells - 1, static_cast<int>(std::floor((x + extent) / width)));
  const int row = std::min(cells - 1, static_cast<int>(std::floor((y + extent) / width)));
  return (col + row) % 2 == 0;
}

Matrix generate_2d(const Dataset2DSpec& spec) {
  require(spec.n_samples >= 1, ErrorKind::InvalidArgument, "n_samples must be >= 1");
  const Eigen::Index n = spec.n_samples;
  Matrix out(n, 2);
  Stream rng(spec.seed, Domain::Init, 0x2d, static_cast<std::uint64_t>(spec.kind));
  const double two_pi = 2.0 * std::numbers::pi;

  switch (spec.kind) {
    case Dataset2DKind::Checkerboard: {
      require(spec.cells >= 2 && spec.extent > 0.0, ErrorKind::InvalidArgument, "bad checkerboard spec");
      std::vector<std::pair<int, int>> dark;
      for (int col = 0; col < spec.cells; ++col)
        for (int row = 0; row < spec.cells; ++row)
          if ((col + row) % 2 == 0) dark.emplace_back(col, row);
      const double width = 2.0 * spec.extent / spec.cells;
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto [col, row] = dark[rng.below(dark.size())];
        out(i, 0) = -spec.extent + (col + rng.uniform()) * width;
        out(i, 1) = -spec.extent + (row + rng.uniform()) * width;
      }
      break;
    }
    case Dataset2DKind::TwoSpirals: {
      require(spec.turns > 0.0, ErrorKind::InvalidArgument, "spiral turns must be > 0");
      // Arm radius grows linearly with angle up to 4 at the outer end; the
      // square root spreads points evenly along the arc.
      const double max_angle = spec.turns * two_pi;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double theta = std::sqrt(rng.uniform()) * max_angle;
        const double r = 4.0 * theta / max_angle;
        const double sign = (i % 2 == 0) ? 1.0 : -1.0;
        out(i, 0) = sign * r * std::cos(theta) + spec.spiral_noise * rng.normal();
        out(i, 1) = sign * r * std::sin(theta) + spec.spiral_noise * rng.normal();
      }
      break;
    }
    case Dataset2DKind::Circle: {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double theta = spec.equispaced ? two_pi * static_cast<double>(i) / static_cast<double>(n)
                                             : two_pi * rng.uniform();
        out(i, 0) = spec.radius * std::cos(theta);
        out(i, 1) = spec.radius * std::sin(theta);
        if (spec.circle_noise > 0.0) {
          out(i, 0) += spec.circle_noise * rng.normal();
          out(i, 1) += spec.circle_noise * rng.normal();
        }
      }
      break;
    }
  }
  return out;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_number(const std::string& text, double& value) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc() && ptr == last;
}

}  // namespace

Matrix parse_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    std::vector<double> values(fields.size());
    bool numeric = true;
    std::size_t bad_col = 0;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (!parse_number(fields[c], values[c])) {
        numeric = false;
        bad_col = c;
        break;
      }
    }
    if (first_content) {
      first_content = false;
      width = fields.size();
      if (!numeric) continue;  // header
    }
    if (!numeric) {
      std::ostringstream msg;
      msg << source << ": row " << line_no << ", column " << bad_col + 1 << ": '" << trim(fields[bad_col])
          << "' is not a number";
      throw Error(ErrorKind::ParseError, msg.str());
    }
    if (fields.size() != width) {
      std::ostringstream msg;
      msg << source << ": row " << line_no << " has " << fields.size() << " fields, expected " << width;
      throw Error(ErrorKind::ParseError, msg.str());
    }
    rows.push_back(std::move(values));
  }
  require(!rows.empty(), ErrorKind::ParseError, source + ": no data rows");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < width; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return m;
}

Matrix load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::InvalidArgument, "cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), path);
}

Matrix load_csv(const std::string& path, Eigen::Index expected_cols) {
  Matrix m = load_csv(path);
  if (m.cols() != expected_cols) {
    std::ostringstream msg;
    msg << path << ": " << m.cols() << " columns, expected " << expected_cols;
    throw Error(ErrorKind::DimensionMismatch, msg.str());
  }
  return m;
}

std::string format_csv(const MatrixRef& m, const std::string& header) {
  std::ostringstream out;
  out << std::setprecision(17);
  if (!header.empty()) out << header << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << m(r, c);
    }
    out << '\n';
  }
  return out.str();
}

void save_csv(const std::string& path, const MatrixRef& m, const std::string& header) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::InvalidArgument, "cannot write '" + path + "'");
  out << format_csv(m, header);
  require(static_cast<bool>(out), ErrorKind::InvalidArgument, "failed writing '" + path + "'");
}

PartialWhitening::PartialWhitening(const TrainingSet& ts, int cap_k) : mean_(ts.mean()), cap_k_(cap_k) {
  const Eigen::Index d = ts.dim();
  require(cap_k >= 0 && cap_k < d, ErrorKind::InvalidArgument, "cap_k must lie in [0, d)");
  const SymEig eig = sym_eig(ts.cov());
  eigenvalues_.resize(d);
  eigenvectors_.resize(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    eigenvalues_(j) = eig.eigenvalues(d - 1 - j);
    eigenvectors_.col(j) = eig.eigenvectors.col(d - 1 - j);
  }
  capped_ = eigenvalues_;
  for (int j = 0; j < cap_k; ++j) capped_(j) = eigenvalues_(cap_k);
  scales_ = (capped_.array().max(0.0) + 1e-12).rsqrt();
}

Matrix PartialWhitening::forward(const MatrixRef& x) const {
  require(x.cols() == mean_.size(), ErrorKind::DimensionMismatch, "partial whitening: dimension mismatch");
  return ((x.rowwise() - mean_.transpose()) * eigenvectors_) * scales_.asDiagonal();
}

Matrix PartialWhitening::inverse(const MatrixRef& y) const {
  require(y.cols() == mean_.size(), ErrorKind::DimensionMismatch, "partial whitening: dimension mismatch");
  Matrix x = (y * scales_.cwiseInverse().asDiagonal()) * eigenvectors_.transpose();
  x.rowwise() += mean_.transpose();
  return x;
}

PartialWhiteningResult partial_whiten(const TrainingSet& ts, int cap_k) {
  PartialWhitening map(ts, cap_k);
  TrainingSet transformed(map.forward(ts.points()));
  return {std::move(map), std::move(transformed)};
}

}  // namespace mmsold
