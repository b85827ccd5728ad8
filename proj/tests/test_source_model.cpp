#include <cmath>
#include <fstream>
#include <random>

#include "doctest.h"
#include "tailprob/source_model.hpp"

using namespace tailprob;
using namespace tailprob::source;

namespace {

swe::Mesh default_mesh() { return swe::Mesh(0.0, 400e3, 400); }

SurrogateParams default_params() {
  SurrogateParams p;
  p.segment_start = 178e3;
  p.segment_end = 187e3;
  p.patches = 20;
  return p;
}

}  // namespace

TEST_CASE("bathymetry from slips: zero, linearity, single-patch identity") {
  const auto mesh = default_mesh();
  const auto reference = swe::make_bathymetry(mesh, swe::reference_profile);
  const auto basis = analytic_surrogate_basis(mesh, default_params());

  const auto b0 = bathymetry_from_slips(basis, Vec::Zero(20), reference, mesh);
  CHECK((b0.nodal - reference.nodal_ref).cwiseAbs().maxCoeff() == 0.0);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 5.0);
  Vec s1(20), s2(20);
  for (int i = 0; i < 20; ++i) {
    s1(i) = normal(rng);
    s2(i) = normal(rng);
  }
  const auto ba = bathymetry_from_slips(basis, s1, reference, mesh);
  const auto bb = bathymetry_from_slips(basis, s2, reference, mesh);
  const auto bc = bathymetry_from_slips(basis, 2.0 * s1 + 0.5 * s2, reference, mesh);
  const Vec pa = ba.nodal - reference.nodal_ref;
  const Vec pb = bb.nodal - reference.nodal_ref;
  const Vec pc = bc.nodal - reference.nodal_ref;
  CHECK((pc - 2.0 * pa - 0.5 * pb).cwiseAbs().maxCoeff() <= 1e-12);

  Vec unit = Vec::Zero(20);
  unit(9) = 1.0;  // patch 10
  const auto bu = bathymetry_from_slips(basis, unit, reference, mesh);
  // absolute tolerance reflects cancellation against ~8000 m depths
  CHECK((bu.nodal - reference.nodal_ref - basis.columns.col(9)).cwiseAbs().maxCoeff() <=
        1e-11);

  CHECK_THROWS_AS(bathymetry_from_slips(basis, Vec::Zero(7), reference, mesh),
                  std::invalid_argument);
}

TEST_CASE("slip rate: frozen values and single source of truth") {
  SlipPrior prior(20, 10.0);
  CHECK(slip_rate(prior, Vec::Zero(20)) == doctest::Approx(0.0));

  Vec single = Vec::Zero(20);
  single(4) = 10.0;
  CHECK(slip_rate(prior, single) == doctest::Approx(0.5).epsilon(1e-12));

  const Vec all = Vec::Constant(20, 10.0);
  CHECK(slip_rate(prior, all) == doctest::Approx(10.0).epsilon(1e-12));

  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal(0.0, 12.0);
  Vec s(20);
  for (int i = 0; i < 20; ++i) s(i) = normal(rng);
  CHECK(slip_rate(prior, s) ==
        doctest::Approx(measures::gaussian_rate(prior.measure, s)).epsilon(1e-14));
  CHECK((slip_rate_grad(prior, s) -
         measures::gaussian_rate_grad(prior.measure, s)).cwiseAbs().maxCoeff() <=
        1e-14);
}

TEST_CASE("surrogate basis: single patch is an exact odd dipole") {
  const auto mesh = default_mesh();
  auto p = default_params();
  p.patches = 1;
  const auto basis = analytic_surrogate_basis(mesh, p);
  REQUIRE(basis.patches() == 1);
  // odd about its center: O(center + d) = -O(center - d)
  const double center = 0.5 * (p.segment_start + p.segment_end);
  for (double d : {500.0, 2000.0, 7000.0})
    CHECK(surrogate_profile(p, 0, center + d) ==
          doctest::Approx(-surrogate_profile(p, 0, center - d)).epsilon(1e-14));
  // discrete integral vanishes as the construction promises
  double integral = 0.0, abs_integral = 0.0;
  for (int j = 0; j < mesh.elements; ++j) {
    integral += 0.5 * mesh.width() * (basis.columns(j, 0) + basis.columns(j + 1, 0));
    abs_integral += 0.5 * mesh.width() *
                    (std::abs(basis.columns(j, 0)) + std::abs(basis.columns(j + 1, 0)));
  }
  CHECK(std::abs(integral) <= 0.05 * abs_integral);
}

TEST_CASE("surrogate basis: peak calibration and interior translates") {
  const auto mesh = default_mesh();
  const auto p = default_params();
  const auto basis = analytic_surrogate_basis(mesh, p);
  REQUIRE(basis.patches() == 20);

  for (int i = 0; i < 20; ++i)
    CHECK(basis.columns.col(i).cwiseAbs().maxCoeff() <= p.peak * (1.0 + 1e-9));
  // sampled fine enough that some node sits near the dipole extremum
  CHECK(basis.columns.col(10).cwiseAbs().maxCoeff() >= 0.8 * p.peak);

  // interior neighbors are translates of one another (checked analytically)
  const double spacing = (p.segment_end - p.segment_start) / p.patches;
  for (int i = 5; i < 15; ++i)
    for (double x : {180e3, 182.5e3, 184e3, 186e3})
      CHECK(surrogate_profile(p, i, x) ==
            doctest::Approx(surrogate_profile(p, i + 1, x + spacing)).epsilon(1e-12));
}

TEST_CASE("surrogate basis: prior samples superpose to both-signed fields") {
  const auto mesh = default_mesh();
  const auto basis = analytic_surrogate_basis(mesh, default_params());
  SlipPrior prior(20, 10.0);
  const auto draws = measures::sample(prior.measure, 2024, 8);
  for (const auto& s : draws) {
    const Vec field = basis.columns * s;
    CHECK(field.maxCoeff() > 0.1);   // uplift somewhere
    CHECK(field.minCoeff() < -0.1);  // downlift somewhere
  }
}

TEST_CASE("surrogate basis: segment outside the domain is rejected") {
  const auto mesh = default_mesh();
  auto p = default_params();
  p.segment_start = -1e3;
  CHECK_THROWS_AS(analytic_surrogate_basis(mesh, p), ConfigError);
}

TEST_CASE("basis file round-trips through csv") {
  const auto mesh = default_mesh();
  const auto basis = analytic_surrogate_basis(mesh, default_params());
  const std::string path = "/tmp/tailprob_test_basis.csv";
  save_basis_csv(basis, mesh, path);
  const auto loaded = load_basis_from_file(path, mesh);
  REQUIRE(loaded.patches() == basis.patches());
  CHECK((loaded.columns - basis.columns).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(loaded.provenance == SlipBasis::Provenance::File);
}

TEST_CASE("basis file: two rows interpolate linearly") {
  const std::string path = "/tmp/tailprob_test_basis2.csv";
  {
    std::ofstream out(path);
    out << "x,O_1\n-100,1\n10100,3\n";
  }
  swe::Mesh mesh(0.0, 10e3, 4);
  const auto basis = load_basis_from_file(path, mesh);
  // linear between the two rows at every mesh node
  for (int j = 0; j <= 4; ++j) {
    const double x = j * 2500.0;
    const double expected = 1.0 + 2.0 * (x + 100.0) / 10200.0;
    CHECK(basis.columns(j, 0) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("basis file: missing column is a structured error") {
  const std::string path = "/tmp/tailprob_test_basis3.csv";
  {
    std::ofstream out(path);
    out << "x,O_1,O_3\n0,1,1\n400000,1,1\n";
  }
  const auto mesh = default_mesh();
  try {
    load_basis_from_file(path, mesh);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("O_2") != std::string::npos);
  }
}

TEST_CASE("bathymetry field is gaussian: node covariance matches O C_s O^T") {
  const auto mesh = default_mesh();
  const auto basis = analytic_surrogate_basis(mesh, default_params());
  SlipPrior prior(20, 10.0);

  // two nodes inside the deformation region
  const int j1 = static_cast<int>(181e3 / mesh.width());
  const int j2 = static_cast<int>(184e3 / mesh.width());
  const Vec row1 = basis.columns.row(j1).transpose();
  const Vec row2 = basis.columns.row(j2).transpose();
  const double cexp11 = 100.0 * row1.dot(row1);
  const double cexp22 = 100.0 * row2.dot(row2);
  const double cexp12 = 100.0 * row1.dot(row2);

  const int n_draws = 100000;
  const auto draws = measures::sample(prior.measure, 31337, n_draws);
  double m1 = 0, m2 = 0;
  for (const auto& s : draws) {
    m1 += row1.dot(s);
    m2 += row2.dot(s);
  }
  m1 /= n_draws;
  m2 /= n_draws;
  double c11 = 0, c22 = 0, c12 = 0;
  for (const auto& s : draws) {
    const double a = row1.dot(s) - m1, b = row2.dot(s) - m2;
    c11 += a * a;
    c22 += b * b;
    c12 += a * b;
  }
  c11 /= n_draws - 1;
  c22 /= n_draws - 1;
  c12 /= n_draws - 1;
  CHECK(std::abs(c11 - cexp11) <= 0.05 * cexp11);
  CHECK(std::abs(c22 - cexp22) <= 0.05 * cexp22);
  CHECK(std::abs(c12 - cexp12) <= 0.05 * std::max(std::abs(cexp12), cexp11));
}
