#include "isfno/ist.hpp"

#include "isfno/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace isfno {

namespace {

double sech2(double z) {
  const double c = std::cosh(z);
  return 1.0 / (c * c);
}

} // namespace

Tensor one_soliton(double s, double c, double t, const LineGrid &grid) {
  if (!(s > 0.0))
    throw ContractError("soliton speed must be positive");
  const double k = std::sqrt(s) / 2.0;
  const double l = grid.length;
  // Translates beyond this many periods contribute below 1e-300.
  const int images = static_cast<int>(std::ceil(350.0 / (k * l))) + 1;
  Tensor out({grid.n});
  for (std::size_t i = 0; i < grid.n; ++i) {
    double z = grid.x(i) - c - s * t;
    z -= l * std::floor((z + 0.5 * l) / l);
    double v = 0.0;
    for (int m = -images; m <= images; ++m)
      v += sech2(k * (z + m * l));
    out[i] = 0.5 * s * v;
  }
  return out;
}

std::vector<double> discrete_spectrum(const Tensor &phi, double length, double edge) {
  if (phi.rank() != 1 || phi.size() < 3)
    throw ShapeError("discrete_spectrum needs a 1d potential with at least 3 points");
  if (!phi.all_finite())
    throw ContractError("potential must be finite");
  const Eigen::Index n = static_cast<Eigen::Index>(phi.size());
  const double dx = length / static_cast<double>(n);
  const double inv = 1.0 / (dx * dx);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    h(i, i) = 2.0 * inv - phi[static_cast<std::size_t>(i)];
    h(i, (i + 1) % n) -= inv;
    h(i, (i + n - 1) % n) -= inv;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw NumericalError("Schrodinger eigen-solve failed");
  if (!(edge >= 0.0))
    throw ContractError("continuum edge margin must be non-negative");
  std::vector<double> out;
  for (Eigen::Index i = 0; i < n; ++i)
    if (solver.eigenvalues()(i) < -edge)
      out.push_back(solver.eigenvalues()(i));
  std::sort(out.begin(), out.end());
  return out;
}

bool ScatteringData::reflectionless() const {
  for (std::size_t i = 0; i < r_minus.size(); ++i)
    if (r_minus[i] != Complex(0.0) || r_plus[i] != Complex(0.0))
      return false;
  return true;
}

void ScatteringData::validate() const {
  if (c_minus.size() != k.size() || c_plus.size() != k.size())
    throw ContractError("one norming constant per bound state required");
  if (r_minus.size() != k_cont.size() || r_plus.size() != k_cont.size() ||
      (!transmission.empty() && transmission.size() != k_cont.size()))
    throw ContractError("reflection data must be sampled on k_cont");
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (!(k[i] > 0.0))
      throw ContractError("bound-state wavenumbers must be positive");
    for (std::size_t j = 0; j < i; ++j)
      if (k[i] == k[j])
        throw ContractError("bound-state wavenumbers must be distinct");
  }
}

ScatteringData soliton_scattering(const std::vector<double> &speeds,
                                  const std::vector<double> &crests) {
  if (speeds.size() != crests.size())
    throw ContractError("one crest position per soliton speed required");
  ScatteringData d;
  for (std::size_t j = 0; j < speeds.size(); ++j) {
    if (!(speeds[j] > 0.0))
      throw ContractError("soliton speed must be positive");
    const double k = std::sqrt(speeds[j]) / 2.0;
    d.k.push_back(k);
    d.c_minus.push_back(std::sqrt(2.0 * k) * std::exp(k * crests[j]));
    d.c_plus.push_back(std::sqrt(2.0 * k) * std::exp(-k * crests[j]));
  }
  d.validate();
  return d;
}

ScatteringData evolve_scattering(const ScatteringData &data, double dt) {
  data.validate();
  ScatteringData out = data;
  for (std::size_t j = 0; j < out.size(); ++j) {
    const double k3 = out.k[j] * out.k[j] * out.k[j];
    out.c_minus[j] *= std::exp(4.0 * k3 * dt);
    out.c_plus[j] *= std::exp(-4.0 * k3 * dt);
  }
  for (std::size_t i = 0; i < out.k_cont.size(); ++i) {
    const double k3 = out.k_cont[i] * out.k_cont[i] * out.k_cont[i];
    out.r_minus[i] *= std::exp(Complex(0.0, -8.0 * k3 * dt));
    out.r_plus[i] *= std::exp(Complex(0.0, 8.0 * k3 * dt));
  }
  out.t = data.t + dt;
  return out;
}

Tensor reflectionless_reconstruct(const ScatteringData &data, const LineGrid &grid) {
  data.validate();
  if (!data.reflectionless())
    throw UnsupportedError("only reflectionless data can be reconstructed");
  Tensor out({grid.n});
  const std::size_t m = data.size();
  if (m == 0)
    return out;

  // With E = diag(exp(-k x)), I + E C E = E (E^-2 + C) E, so the kernel
  // quantities follow from (E^-2 + C) z = c without forming huge entries.
  Eigen::MatrixXd cmat(m, m);
  Eigen::VectorXd c(m), kc(m);
  for (std::size_t i = 0; i < m; ++i) {
    c(i) = data.c_minus[i];
    kc(i) = data.k[i] * data.c_minus[i];
    for (std::size_t j = 0; j < m; ++j)
      cmat(i, j) = data.c_minus[i] * data.c_minus[j] / (data.k[i] + data.k[j]);
  }
  Eigen::MatrixXd a(m, m);
  for (std::size_t p = 0; p < grid.n; ++p) {
    const double x = grid.x(p);
    a = cmat;
    for (std::size_t i = 0; i < m; ++i)
      a(i, i) += std::exp(std::min(2.0 * data.k[i] * x, 700.0));
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-15))
      throw SingularityError("GLM system is singular at x = " + std::to_string(x));
    const Eigen::VectorXd z = ldlt.solve(c);
    // K(x, x) = -c.z and dK/dx = 2 (k c).z - (c.z)^2.
    const double cz = c.dot(z);
    out[p] = 2.0 * (2.0 * kc.dot(z) - cz * cz);
  }
  return out;
}

} // namespace isfno
