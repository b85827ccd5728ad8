#include "tailprob/source_model.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace tailprob::source {

namespace {

// Accepts subnormals (std::stod raises out_of_range on them), which the
// far tails of the basis profiles legitimately round-trip through.
double parse_double(const std::string& tok) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  const double value = std::strtod(begin, &end);
  if (end == begin) throw ConfigError("expected a number, got '" + tok + "'");
  return value;
}

// trapezoid integrals of a column and of its absolute value over the mesh
std::pair<double, double> column_integrals(const Vec& col, double hbar) {
  double s = 0.0, sabs = 0.0;
  for (Eigen::Index j = 0; j + 1 < col.size(); ++j) {
    s += 0.5 * hbar * (col(j) + col(j + 1));
    sabs += 0.5 * hbar * (std::abs(col(j)) + std::abs(col(j + 1)));
  }
  return {s, sabs};
}

void validate_columns(const SlipBasis& basis, double hbar, bool strict_zero_mean) {
  for (int i = 0; i < basis.patches(); ++i) {
    const Vec col = basis.columns.col(i);
    const double peak = col.cwiseAbs().maxCoeff();
    if (peak <= 0.0)
      throw ConfigError("slip basis column " + std::to_string(i) + " is identically zero");
    const auto [integral, abs_integral] = column_integrals(col, hbar);
    if (std::abs(integral) > 0.05 * abs_integral) {
      const std::string msg = "slip basis column " + std::to_string(i) +
                              " is not mean-free: integral " + std::to_string(integral) +
                              " vs 5% bound " + std::to_string(0.05 * abs_integral);
      if (strict_zero_mean)
        throw ConfigError(msg + " (refine the mesh or widen the patches)");
      std::cerr << "warning: " << msg << "\n";
    }
  }
}

}  // namespace

Vec SlipBasis::column_slopes(const swe::Mesh& mesh, int i) const {
  Vec s(mesh.elements);
  const double hbar = mesh.width();
  for (int e = 0; e < mesh.elements; ++e)
    s(e) = (columns(e + 1, i) - columns(e, i)) / hbar;
  return s;
}

SlipPrior::SlipPrior(int patches, double sd)
    : measure(Vec::Zero(patches), sd * sd * Mat::Identity(patches, patches)),
      std_dev(sd) {
  if (patches < 1) throw ConfigError("slip prior needs at least one patch");
  if (!(sd > 0.0)) throw ConfigError("slip standard deviation must be positive");
}

swe::Bathymetry bathymetry_from_slips(const SlipBasis& basis, const Vec& slips,
                                      const swe::Bathymetry& reference,
                                      const swe::Mesh& mesh) {
  if (slips.size() != basis.patches())
    throw std::invalid_argument("slip vector length " + std::to_string(slips.size()) +
                                " does not match basis patch count " +
                                std::to_string(basis.patches()));
  Vec b = reference.nodal_ref + basis.columns * slips;
  return swe::Bathymetry(mesh, std::move(b), reference.nodal_ref);
}

double slip_rate(const SlipPrior& prior, const Vec& slips) {
  return measures::gaussian_rate(prior.measure, slips);
}

Vec slip_rate_grad(const SlipPrior& prior, const Vec& slips) {
  return measures::gaussian_rate_grad(prior.measure, slips);
}

double surrogate_profile(const SurrogateParams& p, int i, double x) {
  const double spacing = (p.segment_end - p.segment_start) / p.patches;
  const double center = p.segment_start + (i + 0.5) * spacing;
  const double w = p.width_factor * spacing;
  const double tau = (x - center) / w;
  // peak of |tau exp(-tau^2/2)| is exp(-1/2) at |tau| = 1
  const double amplitude = p.peak / std::exp(-0.5);
  return amplitude * tau * std::exp(-0.5 * tau * tau);
}

SlipBasis analytic_surrogate_basis(const swe::Mesh& mesh, const SurrogateParams& p) {
  if (p.patches < 1) throw ConfigError("surrogate basis needs at least one patch");
  if (!(p.segment_start < p.segment_end))
    throw ConfigError("slip segment endpoints must be increasing");
  if (p.segment_start <= mesh.a || p.segment_end >= mesh.b)
    throw ConfigError("slip segment must lie inside the domain");
  SlipBasis basis;
  basis.provenance = SlipBasis::Provenance::AnalyticSurrogate;
  basis.columns.resize(mesh.elements + 1, p.patches);
  for (int i = 0; i < p.patches; ++i)
    for (int j = 0; j <= mesh.elements; ++j)
      basis.columns(j, i) = surrogate_profile(p, i, mesh.a + j * mesh.width());
  validate_columns(basis, mesh.width(), /*strict_zero_mean=*/true);
  return basis;
}

SlipBasis load_basis_from_file(const std::string& path, const swe::Mesh& mesh) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open slip basis file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("slip basis file is empty");

  std::vector<std::string> header;
  {
    std::istringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) header.push_back(tok);
  }
  if (header.empty() || header[0] != "x")
    throw ConfigError("slip basis file: first column must be named 'x'");
  const int n = static_cast<int>(header.size()) - 1;
  if (n < 1) throw ConfigError("slip basis file: no O_i columns found");
  for (int i = 0; i < n; ++i) {
    const std::string expected = "O_" + std::to_string(i + 1);
    if (header[i + 1] != expected)
      throw ConfigError("slip basis file: missing or misnamed column '" + expected +
                        "' (got '" + header[i + 1] + "')");
  }

  std::vector<double> xs;
  std::vector<std::vector<double>> cols(n);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    std::string tok;
    std::vector<double> row;
    while (std::getline(ss, tok, ',')) row.push_back(parse_double(tok));
    if (static_cast<int>(row.size()) != n + 1)
      throw ConfigError("slip basis file: row " + std::to_string(lineno) + " has " +
                        std::to_string(row.size()) + " fields, expected " +
                        std::to_string(n + 1));
    xs.push_back(row[0]);
    for (int i = 0; i < n; ++i) cols[i].push_back(row[i + 1]);
  }
  if (xs.size() < 2) throw ConfigError("slip basis file: need at least two data rows");
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (xs[i] <= xs[i - 1])
      throw ConfigError("slip basis file: x must be strictly increasing");
  if (xs.front() > mesh.a || xs.back() < mesh.b)
    throw ConfigError("slip basis file does not cover the mesh domain [" +
                      std::to_string(mesh.a) + ", " + std::to_string(mesh.b) + "]");

  SlipBasis basis;
  basis.provenance = SlipBasis::Provenance::File;
  basis.columns.resize(mesh.elements + 1, n);
  std::size_t seg = 0;
  for (int j = 0; j <= mesh.elements; ++j) {
    const double x = mesh.a + j * mesh.width();
    while (seg + 2 < xs.size() && xs[seg + 1] < x) ++seg;
    const double t = (x - xs[seg]) / (xs[seg + 1] - xs[seg]);
    for (int i = 0; i < n; ++i)
      basis.columns(j, i) = (1.0 - t) * cols[i][seg] + t * cols[i][seg + 1];
  }
  validate_columns(basis, mesh.width(), /*strict_zero_mean=*/false);
  return basis;
}

void save_basis_csv(const SlipBasis& basis, const swe::Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file: " + path);
  out << "x";
  for (int i = 0; i < basis.patches(); ++i) out << ",O_" << (i + 1);
  out << "\n";
  char buf[64];
  for (int j = 0; j <= mesh.elements; ++j) {
    std::snprintf(buf, sizeof buf, "%.10g", mesh.a + j * mesh.width());
    out << buf;
    for (int i = 0; i < basis.patches(); ++i) {
      std::snprintf(buf, sizeof buf, ",%.17g", basis.columns(j, i));
      out << buf;
    }
    out << "\n";
  }
}

}  // namespace tailprob::source
