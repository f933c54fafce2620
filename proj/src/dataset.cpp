#include "isfno/dataset.hpp"

#include "binary_io.hpp"
#include "isfno/errors.hpp"
#include "isfno/fft.hpp"
#include "isfno/ist.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

namespace isfno {

namespace {

constexpr std::uint32_t format_version = 1;

void check_range(const char *what, std::pair<double, double> r, bool allow_equal) {
  if (!(r.first < r.second || (allow_equal && r.first == r.second)))
    throw ContractError(std::string(what) + " range must satisfy lo < hi");
}

} // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  // splitmix64 finalizer over the combined key.
  std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double unit_uniform(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

std::string init_name(InitKind k) {
  switch (k) {
  case InitKind::Uniform:
    return "uniform";
  case InitKind::LowWave:
    return "lowwave";
  case InitKind::Solitons:
    return "solitons";
  }
  return "?";
}

InitKind parse_init(const std::string &name) {
  if (name == "uniform")
    return InitKind::Uniform;
  if (name == "lowwave")
    return InitKind::LowWave;
  if (name == "solitons")
    return InitKind::Solitons;
  throw ContractError("unknown initial-condition sampler '" + name +
                      "' (expected uniform, lowwave or solitons)");
}

void DatasetSpec::validate() const {
  equation.validate();
  if (sequences < 2)
    throw ContractError("a dataset needs at least two sequences");
  if (snapshots < 2)
    throw ContractError("a trajectory needs at least two snapshots");
  if (!(dt > 0.0))
    throw ContractError("dt must be positive");
  if (!(validation_fraction >= 0.1 && validation_fraction < 1.0))
    throw ContractError("validation fraction must lie in [0.1, 1)");
  if (validation_count() >= sequences)
    throw ContractError("validation split leaves no training sequences");
  switch (init) {
  case InitKind::Uniform:
    check_range("uniform", uniform_range, false);
    break;
  case InitKind::LowWave:
    check_range("amplitude", amp_range, true);
    for (std::size_t n : equation.grid)
      if (band >= n / 2)
        throw ContractError("lowwave band exceeds the Nyquist index");
    break;
  case InitKind::Solitons:
    if (equation.family != Family::KdV)
      throw UnsupportedError("soliton initial conditions require the KdV family");
    check_range("speed", speed_range, false);
    if (!(speed_range.first > 0.0))
      throw ContractError("soliton speeds must be positive");
    if (soliton_count.first < 1 || soliton_count.first > soliton_count.second)
      throw ContractError("soliton count range must satisfy 1 <= lo <= hi");
    break;
  }
}

std::size_t DatasetSpec::validation_count() const {
  // Guard against products such as 0.1 * 30 = 3.0000000000000004.
  return static_cast<std::size_t>(
      std::ceil(validation_fraction * static_cast<double>(sequences) - 1e-9));
}

nlohmann::json to_json(const EquationConfig &cfg) {
  return {{"family", family_name(cfg.family)}, {"grid", cfg.grid},     {"length", cfg.length},
          {"beta", cfg.beta},                  {"dealias", cfg.dealias}, {"pin_mean", cfg.pin_mean}};
}

EquationConfig equation_from_json(const nlohmann::json &j) {
  try {
    EquationConfig cfg;
    cfg.family = parse_family(j.at("family").get<std::string>());
    cfg.grid = j.at("grid").get<Shape>();
    cfg.length = j.at("length").get<std::vector<double>>();
    cfg.beta = j.at("beta").get<double>();
    cfg.dealias = j.at("dealias").get<bool>();
    cfg.pin_mean = j.at("pin_mean").get<bool>();
    return cfg;
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("equation config: ") + e.what());
  }
}

nlohmann::json to_json(const DatasetSpec &s) {
  return {{"equation", to_json(s.equation)},
          {"sequences", s.sequences},
          {"snapshots", s.snapshots},
          {"dt", s.dt},
          {"init", init_name(s.init)},
          {"uniform_range", {s.uniform_range.first, s.uniform_range.second}},
          {"band", s.band},
          {"amp_range", {s.amp_range.first, s.amp_range.second}},
          {"soliton_count", {s.soliton_count.first, s.soliton_count.second}},
          {"speed_range", {s.speed_range.first, s.speed_range.second}},
          {"seed", s.seed},
          {"validation_fraction", s.validation_fraction},
          {"burn_in", s.burn_in}};
}

DatasetSpec dataset_spec_from_json(const nlohmann::json &j) {
  try {
    DatasetSpec s;
    s.equation = equation_from_json(j.at("equation"));
    s.sequences = j.at("sequences").get<std::size_t>();
    s.snapshots = j.at("snapshots").get<std::size_t>();
    s.dt = j.at("dt").get<double>();
    s.init = parse_init(j.at("init").get<std::string>());
    s.uniform_range = {j.at("uniform_range")[0], j.at("uniform_range")[1]};
    s.band = j.at("band").get<std::size_t>();
    s.amp_range = {j.at("amp_range")[0], j.at("amp_range")[1]};
    s.soliton_count = {j.at("soliton_count")[0], j.at("soliton_count")[1]};
    s.speed_range = {j.at("speed_range")[0], j.at("speed_range")[1]};
    s.seed = j.at("seed").get<std::uint64_t>();
    s.validation_fraction = j.at("validation_fraction").get<double>();
    s.burn_in = j.value("burn_in", std::size_t{0});
    return s;
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("dataset spec: ") + e.what());
  }
}

Shape Dataset::field_shape() const { return Shape(data.shape().begin() + 2, data.shape().end()); }

std::size_t Dataset::field_size() const { return shape_size(field_shape()); }

const double *Dataset::snapshot(std::size_t seq, std::size_t time) const {
  if (seq >= sequences() || time >= snapshots())
    throw ContractError("snapshot index out of range");
  return data.data() + (seq * snapshots() + time) * field_size();
}

Tensor Dataset::field(std::size_t seq, std::size_t time) const {
  Shape grid = field_shape();
  grid.pop_back();
  const double *p = snapshot(seq, time);
  return Tensor(grid, std::vector<double>(p, p + field_size()));
}

Tensor init_uniform(const Shape &grid, double lo, double hi, std::uint64_t seed) {
  if (!(lo < hi))
    throw ContractError("init_uniform needs lo < hi");
  std::mt19937_64 rng(seed);
  Tensor out(grid);
  for (auto &v : out.values())
    v = lo + (hi - lo) * unit_uniform(rng());
  return out;
}

Tensor init_lowwave(const Shape &grid, std::size_t band, std::pair<double, double> amp_range,
                    std::uint64_t seed, bool kp) {
  if (grid.empty() || grid.size() > 2)
    throw ShapeError("init_lowwave supports 1d and 2d grids");
  for (std::size_t n : grid)
    if (band >= n / 2)
      throw ContractError("lowwave band exceeds the Nyquist index");
  auto plan = SpectralPlan::get(grid);
  std::vector<Complex> spec(plan->half_size(), Complex(0.0));
  std::mt19937_64 rng(seed);
  const double two_pi = 2.0 * std::numbers::pi;
  auto draw = [&] {
    const double xi = amp_range.first + (amp_range.second - amp_range.first) * unit_uniform(rng());
    const double theta = two_pi * unit_uniform(rng());
    return std::polar(xi, theta);
  };
  const long b = static_cast<long>(band);
  if (grid.size() == 1) {
    for (long m = 0; m <= b; ++m)
      spec[static_cast<std::size_t>(m)] = draw();
    spec[0] = spec[0].real();
  } else {
    const long n1 = static_cast<long>(grid[0]);
    const std::size_t half = plan->half_last();
    for (long m1 = -b; m1 <= b; ++m1)
      for (long m2 = 0; m2 <= b; ++m2) {
        if (m1 * m1 + m2 * m2 > b * b)
          continue;
        // On the m2 = 0 column only m1 >= 0 is free; the rest is conjugate.
        if (m2 == 0 && m1 < 0)
          continue;
        const Complex v = draw();
        const std::size_t row = static_cast<std::size_t>((m1 + n1) % n1);
        spec[row * half + static_cast<std::size_t>(m2)] = v;
        if (m2 == 0) {
          const std::size_t mirror = static_cast<std::size_t>((n1 - m1) % n1);
          spec[mirror * half] = m1 == 0 ? Complex(v.real()) : std::conj(v);
        }
      }
  }
  Tensor out(grid);
  plan->c2r(spec.data(), out.data());
  const double inv = 1.0 / static_cast<double>(plan->real_size());
  for (auto &v : out.values())
    v *= inv;
  return kp ? kp_project(out) : out;
}

Tensor init_solitons(const EquationConfig &cfg, std::pair<std::size_t, std::size_t> count,
                     std::pair<double, double> speed_range, std::uint64_t seed) {
  if (cfg.family != Family::KdV)
    throw UnsupportedError("soliton initial conditions require the KdV family");
  if (count.first < 1 || count.first > count.second)
    throw ContractError("soliton count range must satisfy 1 <= lo <= hi");
  std::mt19937_64 rng(seed);
  const std::size_t span = count.second - count.first + 1;
  const std::size_t m = count.first + static_cast<std::size_t>(unit_uniform(rng()) * span);
  const LineGrid line{0.0, cfg.length[0], cfg.grid[0]};
  Tensor out({cfg.grid[0]});
  for (std::size_t j = 0; j < m; ++j) {
    const double s =
        speed_range.first + (speed_range.second - speed_range.first) * unit_uniform(rng());
    const double c = cfg.length[0] * unit_uniform(rng());
    const Tensor one = one_soliton(s, c, 0.0, line);
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] += one[i];
  }
  return out;
}

Tensor sample_initial(const DatasetSpec &spec, std::size_t index) {
  const std::uint64_t seed = derive_seed(spec.seed, index);
  switch (spec.init) {
  case InitKind::Uniform:
    return init_uniform(spec.equation.grid, spec.uniform_range.first, spec.uniform_range.second,
                        seed);
  case InitKind::LowWave:
    return init_lowwave(spec.equation.grid, spec.band, spec.amp_range, seed,
                        spec.equation.family == Family::KP);
  case InitKind::Solitons:
    return init_solitons(spec.equation, spec.soliton_count, spec.speed_range, seed);
  }
  throw ContractError("unknown sampler");
}

Tensor initial_state(const DatasetSpec &spec, std::size_t index) {
  const Tensor phi0 = sample_initial(spec, index);
  return solve_trajectory(spec.equation, phi0, spec.dt, spec.burn_in + 1).back();
}

Dataset generate(const DatasetSpec &spec) {
  spec.validate();
  Dataset ds;
  ds.spec = spec;
  Shape shape{spec.sequences, spec.snapshots};
  for (std::size_t n : spec.equation.grid)
    shape.push_back(n);
  shape.push_back(1);
  ds.data = Tensor(shape);
  const std::size_t field = shape_size(spec.equation.grid);
  const long z_count = static_cast<long>(spec.sequences);

  std::vector<std::string> failures(spec.sequences);
#pragma omp parallel for schedule(dynamic, 1)
  for (long z = 0; z < z_count; ++z) {
    try {
      const Tensor phi0 = sample_initial(spec, static_cast<std::size_t>(z));
      const auto traj =
          solve_trajectory(spec.equation, phi0, spec.dt, spec.snapshots + spec.burn_in);
      double *dst = ds.data.data() + static_cast<std::size_t>(z) * spec.snapshots * field;
      for (std::size_t s = 0; s < spec.snapshots; ++s)
        std::copy_n(traj[s + spec.burn_in].data(), field, dst + s * field);
    } catch (const std::exception &e) {
      failures[static_cast<std::size_t>(z)] = e.what();
    }
  }
  for (std::size_t z = 0; z < failures.size(); ++z)
    if (!failures[z].empty())
      throw DivergenceError("sequence " + std::to_string(z) + " failed: " + failures[z],
                            std::nan(""));
  return ds;
}

void save(const Dataset &ds, const std::filesystem::path &path) {
  nlohmann::json header = {{"format", "ISFN"},
                           {"spec", to_json(ds.spec)},
                           {"shape", ds.data.shape()},
                           {"dt", ds.spec.dt},
                           {"seed", ds.spec.seed},
                           {"layout", "sequence,time,x...,channel"},
                           {"dtype", "float64-le"}};
  const std::string text = header.dump();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os)
    throw IoError("cannot open " + path.string() + " for writing");
  os.write("ISFN", 4);
  detail::write_pod<std::uint32_t>(os, format_version);
  detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  detail::write_doubles(os, ds.data.data(), ds.data.size());
  if (!os)
    throw IoError("write failed for " + path.string());
}

namespace {

nlohmann::json read_header_stream(std::istream &is) {
  detail::expect_magic(is, "ISFN");
  const auto version = detail::read_pod<std::uint32_t>(is, "version");
  if (version != format_version)
    throw FormatError("unsupported ISFN version " + std::to_string(version));
  const auto len = detail::read_pod<std::uint32_t>(is, "header length");
  const std::string text = detail::read_string(is, len, "header");
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("corrupt ISFN header: ") + e.what());
  }
}

std::ifstream open_input(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw IoError("cannot open " + path.string());
  return is;
}

} // namespace

nlohmann::json read_header(const std::filesystem::path &path) {
  auto is = open_input(path);
  return read_header_stream(is);
}

DatasetSpec read_dataset_spec(const std::filesystem::path &path) {
  const nlohmann::json header = read_header(path);
  try {
    return dataset_spec_from_json(header.at("spec"));
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("corrupt ISFN header: ") + e.what());
  }
}

Dataset load(const std::filesystem::path &path) {
  auto is = open_input(path);
  const nlohmann::json header = read_header_stream(is);
  Dataset ds;
  Shape shape;
  try {
    ds.spec = dataset_spec_from_json(header.at("spec"));
    shape = header.at("shape").get<Shape>();
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("corrupt ISFN header: ") + e.what());
  }
  if (shape.size() != ds.spec.equation.grid.size() + 3 || shape[0] != ds.spec.sequences ||
      shape[1] != ds.spec.snapshots)
    throw FormatError("ISFN shape " + shape_string(shape) + " disagrees with its spec");
  ds.data = Tensor(shape);
  detail::read_doubles(is, ds.data.data(), ds.data.size(), "snapshots");
  if (is.peek() != std::char_traits<char>::eof())
    throw FormatError("trailing bytes after ISFN payload");
  return ds;
}

SplitIndices split(const Dataset &ds) {
  const std::size_t z = ds.sequences();
  DatasetSpec s = ds.spec;
  s.sequences = z;
  const std::size_t nval = s.validation_count();
  if (nval >= z)
    throw ContractError("validation split leaves no training sequences");
  SplitIndices out;
  for (std::size_t i = 0; i < z; ++i)
    (i < z - nval ? out.train : out.validation).push_back(i);
  return out;
}

std::vector<PairIndex> pairs(const Dataset &ds, std::size_t n, std::span<const std::size_t> seqs) {
  if (n == 0)
    throw ContractError("horizon n must be at least 1");
  if (n + 1 > ds.snapshots())
    throw ContractError("horizon n = " + std::to_string(n) + " needs at least " +
                        std::to_string(n + 1) + " snapshots, dataset has " +
                        std::to_string(ds.snapshots()));
  std::vector<PairIndex> out;
  for (std::size_t z : seqs) {
    if (z >= ds.sequences())
      throw ContractError("sequence index out of range");
    for (std::size_t s = 0; s + n < ds.snapshots(); ++s)
      out.push_back({z, s});
  }
  return out;
}

Tensor batch_inputs(const Dataset &ds, std::span<const PairIndex> batch) {
  Shape shape = ds.field_shape();
  shape.insert(shape.begin(), batch.size());
  Tensor out(shape);
  const std::size_t f = ds.field_size();
  for (std::size_t b = 0; b < batch.size(); ++b)
    std::copy_n(ds.snapshot(batch[b].seq, batch[b].start), f, out.data() + b * f);
  return out;
}

Tensor batch_targets(const Dataset &ds, std::span<const PairIndex> batch, std::size_t n) {
  Shape shape = ds.field_shape();
  shape.insert(shape.begin(), n);
  shape.insert(shape.begin(), batch.size());
  Tensor out(shape);
  const std::size_t f = ds.field_size();
  for (std::size_t b = 0; b < batch.size(); ++b)
    for (std::size_t j = 1; j <= n; ++j)
      std::copy_n(ds.snapshot(batch[b].seq, batch[b].start + j), f,
                  out.data() + (b * n + j - 1) * f);
  return out;
}

} // namespace isfno
