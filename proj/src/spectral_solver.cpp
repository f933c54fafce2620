#include "isfno/spectral_solver.hpp"

#include "isfno/errors.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numbers>

namespace isfno {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

// Dormand-Prince 5(4) tableau.
constexpr std::array<double, 7> dp_c = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double dp_a[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
constexpr std::array<double, 7> dp_b = {35.0 / 384,     0.0, 500.0 / 1113, 125.0 / 192,
                                        -2187.0 / 6784, 11.0 / 84, 0.0};
constexpr std::array<double, 7> dp_bhat = {5179.0 / 57600,    0.0,          7571.0 / 16695,
                                           393.0 / 640,       -92097.0 / 339200,
                                           187.0 / 2100,      1.0 / 40};

long signed_index(std::size_t i, std::size_t n) {
  return i <= n / 2 ? static_cast<long>(i) : static_cast<long>(i) - static_cast<long>(n);
}

void require_grid(const Tensor &field, std::size_t min_rank = 1) {
  if (field.rank() < min_rank || field.rank() > 2)
    throw ShapeError("solver field must be 1d or 2d, got " + shape_string(field.shape()));
  for (std::size_t n : field.shape())
    if (n < 2 || n % 2 != 0)
      throw ShapeError("solver grid extents must be even, got " + shape_string(field.shape()));
}

// Per-mode tables over the half spectrum of one grid.
struct ModeTable {
  std::shared_ptr<const SpectralPlan> plan;
  std::vector<std::array<double, 2>> kappa; // physical wavenumber per axis
  std::vector<bool> nyquist;                // on a Nyquist plane of any axis
  std::vector<bool> keep;                   // inside the 2/3 band
  std::vector<bool> kp_row;                 // kappa_1 = 0, kappa_2 != 0 (2d)

  ModeTable(const Shape &grid, const std::vector<double> &length) {
    plan = SpectralPlan::get(grid);
    const std::size_t n = plan->half_size();
    kappa.resize(n);
    nyquist.resize(n);
    keep.resize(n);
    kp_row.resize(n);
    const std::size_t half = plan->half_last();
    for (std::size_t j = 0; j < n; ++j) {
      std::array<std::size_t, 2> idx{};
      if (grid.size() == 1) {
        idx[0] = j;
      } else {
        idx[0] = j / half;
        idx[1] = j % half;
      }
      bool nyq = false, inside = true;
      for (std::size_t a = 0; a < grid.size(); ++a) {
        const long m = signed_index(idx[a], grid[a]);
        kappa[j][a] = wavenumber(m, length[a]);
        nyq = nyq || idx[a] == grid[a] / 2;
        inside = inside && 3 * static_cast<std::size_t>(std::labs(m)) < grid[a];
      }
      nyquist[j] = nyq;
      keep[j] = inside && !nyq;
      kp_row[j] = grid.size() == 2 && idx[0] == 0 && idx[1] != 0;
    }
  }
  std::size_t size() const { return kappa.size(); }
};

std::vector<double> default_lengths(std::size_t rank, std::vector<double> length) {
  if (length.empty())
    length.assign(rank, two_pi);
  if (length.size() != rank)
    throw ShapeError("one domain length per axis required");
  return length;
}

std::vector<Complex> forward(const SpectralPlan &plan, const Tensor &field) {
  std::vector<Complex> out(plan.half_size());
  plan.r2c(field.data(), out.data());
  return out;
}

Tensor inverse(const SpectralPlan &plan, std::vector<Complex> spec) {
  Tensor out(plan.grid());
  plan.c2r(spec.data(), out.data());
  const double inv = 1.0 / static_cast<double>(plan.real_size());
  for (auto &v : out.values())
    v *= inv;
  return out;
}

class Integrator {
public:
  Integrator(const EquationConfig &cfg, const SolverOptions &options)
      : cfg_(cfg), opt_(options), modes_(cfg.grid, cfg.length) {
    const std::size_t n = modes_.size();
    symbol_.resize(n);
    for (std::size_t j = 0; j < n; ++j)
      symbol_[j] = modes_.nyquist[j] ? Complex(0.0)
                                     : linear_symbol(cfg, std::span(modes_.kappa[j].data(),
                                                                    cfg.grid.size()));
    for (auto &k : stages_)
      k.resize(n);
    work_.resize(n);
    scratch_.resize(n);
  }

  const SpectralPlan &plan() const { return *modes_.plan; }

  void project(std::vector<Complex> &u) const {
    for (std::size_t j = 0; j < u.size(); ++j)
      if (modes_.nyquist[j] || (cfg_.family == Family::KP && modes_.kp_row[j]))
        u[j] = 0.0;
  }

  // Advances u (spectral) from t over one output interval dt.
  void interval(std::vector<Complex> &u, double &t, double dt, double &h_hint) {
    const double t_end = t + dt;
    if (opt_.fixed_substeps) {
      const std::size_t m = *opt_.fixed_substeps;
      if (m == 0)
        throw ContractError("fixed substep count must be positive");
      const double h = dt / static_cast<double>(m);
      nonlinear(u, stages_[0]);
      for (std::size_t s = 0; s < m; ++s) {
        step(u, h, false);
        u.swap(work_);
        stages_[0].swap(stages_[6]);
        t = s + 1 == m ? t_end : t + h;
        check_finite(u, t);
      }
      return;
    }

    double h = h_hint > 0.0 ? h_hint : initial_step(u, dt);
    nonlinear(u, stages_[0]);
    std::size_t attempts = 0;
    while (t < t_end) {
      if (++attempts > opt_.max_substeps)
        throw StiffnessError("substep cap of " + std::to_string(opt_.max_substeps) +
                             " reached at t = " + std::to_string(t));
      const double remaining = t_end - t;
      const bool last = h >= remaining * (1.0 - 1e-12);
      const double h_try = last ? remaining : h;
      const double err = step(u, h_try, true);
      if (!std::isfinite(err)) {
        if (h_try < 1e-14 * std::max(1.0, std::abs(t)))
          throw DivergenceError("non-finite state during substep", t);
        h = 0.2 * h_try;
        continue;
      }
      const double factor = std::clamp(0.9 * std::pow(std::max(err, 1e-16), -0.2), 0.2, 5.0);
      if (err <= 1.0) {
        u.swap(work_);
        stages_[0].swap(stages_[6]);
        t = last ? t_end : t + h_try;
        check_finite(u, t);
        // Keep the unclipped size so short final steps do not shrink the hint.
        if (!last || h_try >= h)
          h = h_try * factor;
      } else {
        h = h_try * std::min(factor, 1.0);
      }
    }
    h_hint = h;
  }

private:
  void check_finite(const std::vector<Complex> &u, double t) const {
    for (const Complex &c : u)
      if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
        throw DivergenceError("non-finite field", t);
  }

  double initial_step(const std::vector<Complex> &u, double dt) {
    // Bound by the nonlinear time scale, then let the controller adapt.
    nonlinear(u, scratch_);
    double nu = 0.0, nn = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
      nu = std::max(nu, std::abs(u[j]));
      nn = std::max(nn, std::abs(scratch_[j]));
    }
    double h = dt;
    if (nn > 0.0 && nu > 0.0)
      h = std::min(h, 0.01 * nu / nn);
    return std::max(h, dt * 1e-6);
  }

  // e^{L delta h} for the stage offset delta >= 0.
  const std::vector<Complex> &propagator(double delta, double h) {
    if (h != cached_h_) {
      cache_.clear();
      cached_h_ = h;
    }
    for (auto &entry : cache_)
      if (entry.first == delta)
        return entry.second;
    std::vector<Complex> e(symbol_.size());
    for (std::size_t j = 0; j < e.size(); ++j)
      e[j] = std::exp(symbol_[j] * (delta * h));
    cache_.emplace_back(delta, std::move(e));
    return cache_.back().second;
  }

  // One substep from u with stage 0 already in stages_[0]. Writes the 5th
  // order solution to work_ and its nonlinear term to stages_[6]. Returns the
  // scaled RMS error estimate (0 when not requested).
  double step(const std::vector<Complex> &u, double h, bool estimate) {
    const std::size_t n = u.size();
    for (std::size_t i = 1; i < 7; ++i) {
      const auto &e0 = propagator(dp_c[i], h);
      for (std::size_t m = 0; m < n; ++m)
        scratch_[m] = e0[m] * u[m];
      for (std::size_t j = 0; j < i; ++j) {
        const double a = dp_a[i][j];
        if (a == 0.0)
          continue;
        const auto &e = propagator(dp_c[i] - dp_c[j], h);
        for (std::size_t m = 0; m < n; ++m)
          scratch_[m] += (h * a) * e[m] * stages_[j][m];
      }
      if (i == 6)
        work_ = scratch_;
      nonlinear(i == 6 ? work_ : scratch_, stages_[i]);
    }
    if (!estimate)
      return 0.0;
    const double inv_n = 1.0 / static_cast<double>(plan().real_size());
    double acc = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
      Complex err = 0.0;
      for (std::size_t j = 0; j < 7; ++j) {
        const double db = dp_b[j] - dp_bhat[j];
        if (db == 0.0)
          continue;
        err += db * propagator(1.0 - dp_c[j], h)[m] * stages_[j][m];
      }
      err *= h * inv_n;
      const double scale =
          opt_.atol + opt_.rtol * std::max(std::abs(u[m]), std::abs(work_[m])) * inv_n;
      const double r = std::abs(err) / scale;
      acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(n));
  }

  void nonlinear(const std::vector<Complex> &u, std::vector<Complex> &out) {
    const SpectralPlan &p = plan();
    const std::size_t n = u.size();
    const std::size_t d = cfg_.grid.size();
    const Complex I(0.0, 1.0);
    Tensor quad(cfg_.grid, 0.0);
    if (cfg_.family == Family::MS || cfg_.family == Family::KS) {
      for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t m = 0; m < n; ++m)
          scratch2_[m] = modes_.nyquist[m] ? Complex(0.0) : I * modes_.kappa[m][a] * u[m];
        const Tensor g = inverse(p, scratch2_);
        for (std::size_t q = 0; q < quad.size(); ++q)
          quad[q] += g[q] * g[q];
      }
    } else {
      const Tensor phi = inverse(p, u);
      for (std::size_t q = 0; q < quad.size(); ++q)
        quad[q] = phi[q] * phi[q];
    }
    p.r2c(quad.data(), out.data());
    double coef = 0.0;
    switch (cfg_.family) {
    case Family::MS:
      coef = -cfg_.tau() / (2.0 * cfg_.beta * cfg_.beta);
      break;
    case Family::KS:
      coef = -1.0 / (2.0 * cfg_.beta * cfg_.beta);
      break;
    default:
      break;
    }
    for (std::size_t m = 0; m < n; ++m) {
      const bool drop = modes_.nyquist[m] || (cfg_.dealias && !modes_.keep[m]) ||
                        (cfg_.family == Family::KP && modes_.kp_row[m]);
      if (drop) {
        out[m] = 0.0;
      } else if (cfg_.family == Family::KdV || cfg_.family == Family::KP) {
        out[m] *= -3.0 * I * modes_.kappa[m][0];
      } else {
        out[m] *= coef;
      }
    }
    if (cfg_.pin_mean)
      out[0] = 0.0;
  }

public:
  void resize_scratch() { scratch2_.resize(symbol_.size()); }

private:
  const EquationConfig &cfg_;
  SolverOptions opt_;
  ModeTable modes_;
  std::vector<Complex> symbol_;
  std::array<std::vector<Complex>, 7> stages_;
  std::vector<Complex> work_, scratch_, scratch2_;
  double cached_h_ = -1.0;
  std::vector<std::pair<double, std::vector<Complex>>> cache_;
};

} // namespace

std::string family_name(Family f) {
  switch (f) {
  case Family::MS:
    return "ms";
  case Family::KS:
    return "ks";
  case Family::KdV:
    return "kdv";
  case Family::KP:
    return "kp";
  }
  return "?";
}

Family parse_family(const std::string &name) {
  std::string s;
  for (char c : name)
    s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (s == "ms")
    return Family::MS;
  if (s == "ks")
    return Family::KS;
  if (s == "kdv")
    return Family::KdV;
  if (s == "kp")
    return Family::KP;
  throw ContractError("unknown equation family '" + name + "' (expected ms, ks, kdv or kp)");
}

EquationConfig EquationConfig::standard(Family family, Shape grid, double beta) {
  EquationConfig cfg;
  cfg.family = family;
  const bool wave = family == Family::KdV || family == Family::KP;
  cfg.length.assign(grid.size(), wave ? 20.0 : two_pi);
  cfg.grid = std::move(grid);
  cfg.beta = beta;
  cfg.pin_mean = !wave;
  return cfg;
}

void EquationConfig::validate() const {
  if (grid.empty() || grid.size() > 2)
    throw ContractError("equation grid must be 1d or 2d");
  for (std::size_t n : grid)
    if (n < 4 || n % 2 != 0)
      throw ContractError("grid extents must be even and >= 4, got " + shape_string(grid));
  if (length.size() != grid.size())
    throw ContractError("one domain length per grid axis required");
  for (double l : length)
    if (!(l > 0.0))
      throw ContractError("domain lengths must be positive");
  if (family == Family::KdV && grid.size() != 1)
    throw UnsupportedError("KdV is one-dimensional; use KP in 2d");
  if (family == Family::KP && grid.size() != 2)
    throw UnsupportedError("KP is two-dimensional");
  if (family == Family::MS || family == Family::KS) {
    if (!(beta > 0.0))
      throw ContractError("beta must be positive");
  }
  if (family == Family::MS) {
    const std::size_t n = *std::min_element(grid.begin(), grid.end());
    const double limit = 50.0 * static_cast<double>(n) / 256.0;
    if (beta >= limit)
      throw StiffnessError("MS at beta = " + std::to_string(beta) + " is under-resolved on " +
                           std::to_string(n) + " points (needs beta < " +
                           std::to_string(limit) + ")");
  }
}

double wavenumber(long index, double length) { return two_pi * static_cast<double>(index) / length; }

Complex linear_symbol(const EquationConfig &cfg, std::span<const double> kappa) {
  double k2 = 0.0;
  for (double k : kappa)
    k2 += k * k;
  const double b = cfg.beta;
  switch (cfg.family) {
  case Family::MS:
    return cfg.tau() * (std::sqrt(k2) / b - k2 / (b * b));
  case Family::KS:
    return k2 / (b * b) - k2 * k2 / (b * b * b * b);
  case Family::KdV:
    return Complex(0.0, kappa[0] * kappa[0] * kappa[0]);
  case Family::KP: {
    const double k1 = kappa[0];
    if (k1 == 0.0)
      return 0.0;
    const double k2y = kappa.size() > 1 ? kappa[1] : 0.0;
    return Complex(0.0, k1 * k1 * k1 - k2y * k2y / k1);
  }
  }
  return 0.0;
}

Tensor gamma_op(const Tensor &field, std::vector<double> length) {
  require_grid(field);
  length = default_lengths(field.rank(), std::move(length));
  const ModeTable modes(field.shape(), length);
  auto spec = forward(*modes.plan, field);
  for (std::size_t j = 0; j < spec.size(); ++j) {
    double k2 = 0.0;
    for (std::size_t a = 0; a < field.rank(); ++a)
      k2 += modes.kappa[j][a] * modes.kappa[j][a];
    spec[j] *= std::sqrt(k2);
  }
  return inverse(*modes.plan, std::move(spec));
}

Tensor kp_project(const Tensor &field) {
  if (field.rank() != 2)
    throw ShapeError("kp_project needs a 2d field, got " + shape_string(field.shape()));
  require_grid(field, 2);
  const ModeTable modes(field.shape(), {two_pi, two_pi});
  auto spec = forward(*modes.plan, field);
  for (std::size_t j = 0; j < spec.size(); ++j)
    if (modes.kp_row[j])
      spec[j] = 0.0;
  return inverse(*modes.plan, std::move(spec));
}

SolverState advance(const EquationConfig &cfg, SolverState state, std::size_t steps,
                    const SolverOptions &options) {
  cfg.validate();
  if (steps == 0)
    throw ContractError("advance needs at least one step");
  if (!(state.dt > 0.0))
    throw ContractError("output interval must be positive");
  if (state.phi.shape() != cfg.grid)
    throw ShapeError("state field " + shape_string(state.phi.shape()) +
                     " does not match grid " + shape_string(cfg.grid));
  if (!state.phi.all_finite())
    throw DivergenceError("non-finite initial field", state.t);

  Integrator integ(cfg, options);
  integ.resize_scratch();
  auto u = forward(integ.plan(), state.phi);
  integ.project(u);
  const double t0 = state.t;
  for (std::size_t s = 0; s < steps; ++s) {
    integ.interval(u, state.t, state.dt, state.h);
    state.t = t0 + static_cast<double>(s + 1) * state.dt;
    integ.project(u);
  }
  state.phi = inverse(integ.plan(), std::move(u));
  return state;
}

std::vector<Tensor> solve_trajectory(const EquationConfig &cfg, const Tensor &phi0, double dt,
                                     std::size_t snapshots, const SolverOptions &options) {
  if (snapshots == 0)
    throw ContractError("trajectory needs at least one snapshot");
  cfg.validate();
  std::vector<Tensor> out;
  out.reserve(snapshots);
  Integrator integ(cfg, options);
  integ.resize_scratch();
  auto u = forward(integ.plan(), phi0);
  integ.project(u);
  out.push_back(inverse(integ.plan(), u));
  double t = 0.0, h = 0.0;
  for (std::size_t s = 1; s < snapshots; ++s) {
    integ.interval(u, t, dt, h);
    t = static_cast<double>(s) * dt;
    integ.project(u);
    out.push_back(inverse(integ.plan(), u));
  }
  return out;
}

} // namespace isfno
