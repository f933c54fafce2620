#include "isfno/evaluator.hpp"

#include "isfno/errors.hpp"
#include "isfno/fft.hpp"
#include "isfno/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace isfno {

namespace {

// (B, N..., C) batch from fields of shape (N..., C).
Tensor stack_batch(const std::vector<Tensor> &fields) {
  Shape s = fields.front().shape();
  s.insert(s.begin(), fields.size());
  Tensor out(s);
  const std::size_t per = fields.front().size();
  for (std::size_t b = 0; b < fields.size(); ++b)
    std::copy_n(fields[b].data(), per, out.data() + b * per);
  return out;
}

Tensor member_step(const Tensor &pred, std::size_t b, std::size_t j, const Shape &field) {
  const std::size_t n = pred.dim(1);
  const std::size_t per = shape_size(field);
  const double *src = pred.data() + (b * n + j) * per;
  return Tensor(field, std::vector<double>(src, src + per));
}

bool finite(const Tensor &t) { return t.all_finite(); }

// Fields as plain grids without a trailing unit channel.
Tensor as_grid(const Tensor &t) {
  if (t.rank() >= 2 && t.shape().back() == 1) {
    Shape s = t.shape();
    s.pop_back();
    return t.reshaped(s);
  }
  return t;
}

} // namespace

std::vector<Rollout> rollout_ensemble(const Model &model, const std::vector<Tensor> &phi0,
                                      std::size_t steps) {
  if (steps == 0)
    throw ContractError("rollout needs at least one step");
  if (phi0.empty())
    return {};
  const Shape field = phi0.front().shape();
  for (const auto &p : phi0)
    if (p.shape() != field)
      throw ShapeError("ensemble members must share one shape");
  const std::size_t n = model.spec().horizon;
  const std::size_t members = phi0.size();
  std::vector<Rollout> out(members);
  for (auto &r : out)
    r.requested = steps;
  std::vector<Tensor> current = phi0;
  std::vector<bool> alive(members, true);

  for (std::size_t done = 0; done < steps;) {
    std::vector<std::size_t> active;
    for (std::size_t m = 0; m < members; ++m)
      if (alive[m])
        active.push_back(m);
    if (active.empty())
      break;
    std::vector<Tensor> inputs;
    for (std::size_t m : active)
      inputs.push_back(current[m]);

    // One block for all live members; fall back to single members when the
    // batched pass diverges somewhere.
    std::vector<Tensor> preds(active.size());
    try {
      const Tensor pred = predict(model, stack_batch(inputs));
      for (std::size_t i = 0; i < active.size(); ++i) {
        Shape s = pred.shape();
        s[0] = 1;
        const std::size_t per = pred.size() / pred.dim(0);
        preds[i] = Tensor(s, std::vector<double>(pred.data() + i * per, pred.data() + (i + 1) * per));
      }
    } catch (const DivergenceError &) {
      for (std::size_t i = 0; i < active.size(); ++i) {
        try {
          preds[i] = predict(model, stack_batch({inputs[i]}));
        } catch (const DivergenceError &) {
          preds[i] = Tensor();
        }
      }
    }

    const std::size_t take = std::min(n, steps - done);
    for (std::size_t i = 0; i < active.size(); ++i) {
      const std::size_t m = active[i];
      if (preds[i].empty()) {
        alive[m] = false;
        out[m].diverged = true;
        continue;
      }
      for (std::size_t j = 0; j < take; ++j) {
        Tensor state = member_step(preds[i], 0, j, field);
        if (!finite(state)) {
          alive[m] = false;
          out[m].diverged = true;
          break;
        }
        out[m].states.push_back(std::move(state));
      }
      if (alive[m])
        current[m] = member_step(preds[i], 0, n - 1, field);
    }
    done += take;
  }
  return out;
}

Rollout rollout(const Model &model, const Tensor &phi0, std::size_t steps) {
  return rollout_ensemble(model, {phi0}, steps).front();
}

ErrorCurve horizon_error(const Predictor &predict_fn, const EquationConfig &cfg,
                         const std::vector<Tensor> &ensemble, double dt, std::size_t steps) {
  if (ensemble.empty())
    throw ContractError("horizon error needs at least one initial field");
  const std::size_t members = ensemble.size();
  std::vector<std::vector<Tensor>> refs(members);
  std::vector<std::string> failures(members);
#pragma omp parallel for schedule(dynamic, 1)
  for (long m = 0; m < static_cast<long>(members); ++m) {
    const auto mi = static_cast<std::size_t>(m);
    try {
      refs[mi] = solve_trajectory(cfg, as_grid(ensemble[mi]), dt, steps + 1);
    } catch (const DivergenceError &) {
      // Keep whatever is available: re-run step by step to find the cut.
      std::vector<Tensor> partial{as_grid(ensemble[mi])};
      SolverState st{partial.back(), 0.0, dt, 0.0};
      try {
        for (std::size_t j = 0; j < steps; ++j) {
          st = advance(cfg, st, 1);
          partial.push_back(st.phi);
        }
      } catch (const NumericalError &) {
      }
      refs[mi] = std::move(partial);
    } catch (const std::exception &e) {
      failures[mi] = e.what();
    }
  }
  for (const auto &f : failures)
    if (!f.empty())
      throw NumericalError("reference solve failed: " + f);

  ErrorCurve curve;
  curve.ensemble = members;
  std::vector<std::vector<Tensor>> preds(members);
  std::size_t length = steps;
  for (std::size_t m = 0; m < members; ++m) {
    preds[m] = predict_fn(ensemble[m], steps);
    const std::size_t avail = std::min(preds[m].size(), refs[m].size() - 1);
    if (avail < steps)
      ++curve.truncated_members;
    length = std::min(length, avail);
  }
  curve.values.assign(length, 0.0);
  for (std::size_t m = 0; m < members; ++m)
    for (std::size_t j = 0; j < length; ++j)
      curve.values[j] += relative_l2(as_grid(preds[m][j]), refs[m][j + 1]) /
                         static_cast<double>(members);
  return curve;
}

ErrorCurve horizon_error(const Model &model, const EquationConfig &cfg,
                         const std::vector<Tensor> &ensemble, double dt, std::size_t steps) {
  std::vector<Tensor> inputs;
  for (const auto &e : ensemble) {
    Shape s = as_grid(e).shape();
    s.push_back(1);
    inputs.push_back(e.reshaped(s));
  }
  const auto rolls = rollout_ensemble(model, inputs, steps);
  std::size_t next = 0;
  // Predictions were computed as a batch; hand them out member by member.
  const Predictor lookup = [&](const Tensor &, std::size_t) { return rolls[next++].states; };
  return horizon_error(lookup, cfg, ensemble, dt, steps);
}

std::vector<double> autocorrelation(const std::vector<std::vector<Tensor>> &members) {
  if (members.empty() || members.front().empty())
    throw ContractError("autocorrelation needs at least one state");
  const Shape grid = as_grid(members.front().front()).shape();
  if (grid.empty() || grid.size() > 2)
    throw ShapeError("autocorrelation supports 1d and 2d fields");
  const std::size_t n1 = grid[0];
  const std::size_t n2 = grid.size() == 2 ? grid[1] : 1;
  if (n1 % 2 != 0)
    throw ShapeError("autocorrelation needs an even first extent");
  auto plan = SpectralPlan::get({n1});
  std::vector<double> result(n1, 0.0);
  std::vector<double> column(n1), corr(n1);
  std::vector<Complex> spec(plan->half_size());

  for (const auto &states : members) {
    std::vector<double> acc(n1, 0.0);
    for (const auto &raw : states) {
      const Tensor s = as_grid(raw);
      if (s.shape() != grid)
        throw ShapeError("autocorrelation states must share one grid");
      for (std::size_t c = 0; c < n2; ++c) {
        for (std::size_t i = 0; i < n1; ++i)
          column[i] = s[i * n2 + c];
        plan->r2c(column.data(), spec.data());
        for (auto &z : spec)
          z = std::norm(z);
        plan->c2r(spec.data(), corr.data());
        // c2r of |X|^2 is N * sum_x phi(x) phi(x - r).
        for (std::size_t r = 0; r < n1; ++r)
          acc[r] += corr[r] / static_cast<double>(n1);
      }
    }
    if (!(acc[0] > 0.0))
      throw DegenerateError("autocorrelation window is identically zero");
    for (std::size_t r = 0; r < n1; ++r)
      result[r] += acc[r] / acc[0];
  }
  for (auto &v : result)
    v /= static_cast<double>(members.size());
  return result;
}

std::uint64_t config_hash(const nlohmann::json &cfg) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : cfg.dump()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void export_csv(const std::filesystem::path &path, const std::string &metric,
                const std::vector<double> &values, std::uint64_t hash, std::size_t first_index) {
  std::ofstream os(path, std::ios::trunc);
  if (!os)
    throw IoError("cannot open " + path.string() + " for writing");
  os << "index," << metric << ";config_hash=" << hash_hex(hash) << '\n';
  char buf[64];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", first_index + i, values[i]);
    os << buf;
  }
  if (!os)
    throw IoError("write failed for " + path.string());
}

CsvSeries read_csv(const std::filesystem::path &path) {
  std::ifstream is(path);
  if (!is)
    throw IoError("cannot open " + path.string());
  CsvSeries out;
  std::string line;
  if (!std::getline(is, line) || !line.starts_with("index,"))
    throw FormatError("CSV header missing in " + path.string());
  const auto semi = line.find(";config_hash=");
  if (semi == std::string::npos)
    throw FormatError("CSV header lacks a config hash");
  out.metric = line.substr(6, semi - 6);
  out.hash = line.substr(semi + 13);
  while (std::getline(is, line)) {
    if (line.empty())
      continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw FormatError("malformed CSV row: " + line);
    out.index.push_back(std::stoull(line.substr(0, comma)));
    out.values.push_back(std::strtod(line.c_str() + comma + 1, nullptr));
  }
  return out;
}

} // namespace isfno
