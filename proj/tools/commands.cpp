#include "commands.hpp"

#include "config.hpp"

#include "isfno/checkpoint.hpp"
#include "isfno/dataset.hpp"
#include "isfno/errors.hpp"
#include "isfno/evaluator.hpp"
#include "isfno/ist.hpp"
#include "isfno/model.hpp"
#include "isfno/trainer.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

namespace isfno::cli {

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kFailure = 1, kUsage = 2, kDiverged = 3, kIo = 4 };

// A string flag that overrides one settings key when given.
struct Override {
  std::string key;
  std::string value;
  CLI::Option *option = nullptr;
};

struct Command {
  std::string name;
  CLI::App *app = nullptr;
  std::string config;
  std::vector<std::unique_ptr<Override>> overrides;

  void add(const std::string &flag, const std::string &key, const std::string &help) {
    auto o = std::make_unique<Override>();
    o->key = key;
    o->option = app->add_option(flag, o->value, help);
    overrides.push_back(std::move(o));
  }

  Settings settings() const {
    Settings s;
    if (!config.empty())
      s.load_file(config);
    for (const auto &o : overrides)
      if (o->option->count() > 0)
        s.set(o->key, o->value);
    return s;
  }
};

int apply_threads(Settings &s) {
  const auto requested = s.count("run.threads", static_cast<std::size_t>(omp_get_max_threads()));
  if (requested == 0)
    throw UsageError("--threads must be at least 1");
  omp_set_dynamic(0);
  omp_set_num_threads(static_cast<int>(requested));
  return static_cast<int>(requested);
}

fs::path output_dir(Settings &s) {
  const fs::path dir = s.str("run.out", "run");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

EquationConfig equation_from(Settings &s) {
  const Family family = parse_family(s.required("equation.family", "--family"));
  const bool wave = family == Family::KdV || family == Family::KP;
  const bool two_d = family == Family::KP;
  const Shape grid = s.extents("equation.grid", two_d ? Shape{64, 64} : Shape{wave ? 256u : 64u});
  EquationConfig cfg = EquationConfig::standard(family, grid, s.real("equation.beta", 10.0));
  cfg.length = s.reals("equation.length", cfg.length);
  if (cfg.length.size() == 1 && grid.size() == 2)
    cfg.length.push_back(cfg.length.front());
  cfg.dealias = s.flag("equation.dealias", cfg.dealias);
  cfg.pin_mean = s.flag("equation.pin_mean", cfg.pin_mean);
  return cfg;
}

std::pair<double, double> range_from(Settings &s, const std::string &key,
                                     std::pair<double, double> fallback) {
  const auto v = s.reals(key, {fallback.first, fallback.second});
  if (v.size() != 2)
    throw UsageError("'" + key + "' expects two comma-separated values");
  return {v[0], v[1]};
}

DatasetSpec dataset_from(Settings &s) {
  DatasetSpec d;
  d.equation = equation_from(s);
  d.sequences = s.count("dataset.sequences", d.sequences);
  d.snapshots = s.count("dataset.snapshots", d.snapshots);
  d.dt = s.real("dataset.dt", d.dt);
  const InitKind fallback =
      d.equation.family == Family::KdV ? InitKind::Solitons : InitKind::Uniform;
  d.init = parse_init(s.str("dataset.init", init_name(fallback)));
  d.uniform_range = range_from(s, "dataset.uniform_range", d.uniform_range);
  d.band = s.count("dataset.band", d.band);
  d.amp_range = range_from(s, "dataset.amp_range", d.amp_range);
  const auto counts = range_from(s, "dataset.soliton_count",
                                 {static_cast<double>(d.soliton_count.first),
                                  static_cast<double>(d.soliton_count.second)});
  if (counts.first < 0 || counts.second < counts.first ||
      counts.first != std::floor(counts.first) || counts.second != std::floor(counts.second))
    throw UsageError("'dataset.soliton_count' expects two integers lo,hi with lo <= hi");
  d.soliton_count = {static_cast<std::size_t>(counts.first),
                     static_cast<std::size_t>(counts.second)};
  d.speed_range = range_from(s, "dataset.speed_range", d.speed_range);
  d.burn_in = s.count("dataset.burn_in", d.burn_in);
  d.validation_fraction = s.real("dataset.validation_fraction", d.validation_fraction);
  d.seed = s.u64("run.seed", 0);
  d.validate();
  return d;
}

ModelSpec model_from(Settings &s, std::size_t dim) {
  ModelSpec m;
  m.variant = parse_variant(s.required("model.variant", "--variant"));
  m.width = s.count("model.width", m.width);
  m.cutoff = s.extents("model.cutoff", Shape(dim, 16));
  if (m.cutoff.size() == 1 && dim == 2)
    m.cutoff.push_back(m.cutoff.front());
  m.horizon = s.count("model.horizon", m.horizon);
  m.hidden = s.count("model.hidden", m.hidden);
  m.h_layers = s.count("model.h_layers", m.h_layers);
  m.q_layers = s.count("model.q_layers", m.q_layers);
  m.a_layers = s.count("model.a_layers", m.a_layers);
  m.fg_layers = s.count("model.fg_layers", m.fg_layers);
  m.p_init = s.real("model.p_init", m.p_init);
  m.seed = s.u64("run.seed", 0);
  m.validate();
  return m;
}

TrainConfig train_from(Settings &s, const ModelSpec &m) {
  TrainConfig t;
  t.epochs = s.count("train.epochs", t.epochs);
  t.batch_size = s.count("train.batch_size", t.batch_size);
  t.lr = s.real("train.lr", t.lr);
  t.weight_decay = s.real("train.weight_decay", t.weight_decay);
  t.schedule_step = s.count("train.schedule_step", t.schedule_step);
  t.schedule_factor = s.real("train.schedule_factor", t.schedule_factor);
  t.clip_norm = s.real("train.clip_norm", t.clip_norm);
  t.shards = s.count("train.shards", t.shards);
  t.recurrent = s.flag("train.recurrent", t.recurrent);
  t.horizon = m.horizon;
  t.seed = s.u64("run.seed", 0);
  t.validate();
  return t;
}

// Fresh in-distribution initial fields for evaluation runs.
std::vector<Tensor> fresh_ensemble(const DatasetSpec &data, std::size_t members,
                                   std::uint64_t seed) {
  DatasetSpec spec = data;
  spec.seed = seed;
  std::vector<Tensor> out(members);
  std::vector<std::string> failures(members);
#pragma omp parallel for schedule(dynamic, 1)
  for (long m = 0; m < static_cast<long>(members); ++m) {
    try {
      out[static_cast<std::size_t>(m)] = initial_state(spec, static_cast<std::size_t>(m));
    } catch (const std::exception &e) {
      failures[static_cast<std::size_t>(m)] = e.what();
    }
  }
  for (const auto &f : failures)
    if (!f.empty())
      throw DivergenceError("initial state failed: " + f, std::nan(""));
  return out;
}

Tensor with_channel(const Tensor &grid_field) {
  Shape s = grid_field.shape();
  s.push_back(1);
  return grid_field.reshaped(s);
}

// Stores fields[m][t] (grid shape) as an ISFN file under `spec`.
void save_fields(const DatasetSpec &spec, const std::vector<std::vector<Tensor>> &fields,
                 std::size_t snapshots, const fs::path &path) {
  Dataset ds;
  ds.spec = spec;
  ds.spec.sequences = fields.size();
  ds.spec.snapshots = snapshots;
  Shape shape{fields.size(), snapshots};
  for (std::size_t n : spec.equation.grid)
    shape.push_back(n);
  shape.push_back(1);
  ds.data = Tensor(shape);
  const std::size_t per = shape_size(spec.equation.grid);
  for (std::size_t m = 0; m < fields.size(); ++m)
    for (std::size_t t = 0; t < snapshots; ++t)
      std::copy_n(fields[m][t].data(), per, ds.data.data() + (m * snapshots + t) * per);
  save(ds, path);
}

std::string rel(const fs::path &p) { return p.filename().string(); }

int cmd_gen_data(Settings &s) {
  const int threads = apply_threads(s);
  const DatasetSpec spec = dataset_from(s);
  const fs::path dir = output_dir(s);
  const fs::path file = dir / s.str("dataset.file", "dataset.isfn");
  save(generate(spec), file);
  const nlohmann::json outputs = {{"dataset", rel(file)}, {"spec", to_json(spec)}};
  write_manifest(dir, "gen-data", s, threads, outputs);
  std::ifstream manifest(dir / "manifest.json");
  std::cout << manifest.rdbuf();
  return kOk;
}

int cmd_train(Settings &s) {
  const int threads = apply_threads(s);
  const Dataset ds = load(s.required("train.data", "--data"));
  const ModelSpec mspec = model_from(s, ds.spec.equation.dim());
  const TrainConfig tcfg = train_from(s, mspec);
  const bool quiet = s.flag("run.quiet", false);
  const fs::path dir = output_dir(s);
  const fs::path ckpt = dir / "checkpoint.isfm";
  const fs::path report_csv = dir / "report.csv";

  Model model(mspec);
  const TrainReport report =
      train(model, ds, tcfg, ckpt, [&](std::size_t epoch, double tr, double val) {
        if (!quiet)
          std::fprintf(stderr, "epoch %zu train %.6e val %.6e\n", epoch, tr, val);
      });
  write_report_csv(report, report_csv);
  const nlohmann::json outputs = {{"checkpoint", rel(ckpt)},
                                  {"report", rel(report_csv)},
                                  {"model", to_json(mspec)},
                                  {"best_epoch", report.best_epoch},
                                  {"best_val", report.best_val},
                                  {"parameters", model.parameter_count()}};
  write_manifest(dir, "train", s, threads, outputs);
  std::printf("variant %s params %zu best_epoch %zu best_val %.6e wall %.1fs\n",
              variant_name(mspec.variant).c_str(), model.parameter_count(), report.best_epoch,
              report.best_val, report.wall_seconds);
  return kOk;
}

int cmd_rollout(Settings &s) {
  const int threads = apply_threads(s);
  const Model model = load_checkpoint(s.required("rollout.checkpoint", "--checkpoint"));
  const DatasetSpec data = read_dataset_spec(s.required("rollout.data", "--data"));
  const std::size_t steps = s.count("rollout.steps", 100);
  const std::size_t members = s.count("rollout.ensemble", 1);
  if (steps == 0 || members == 0)
    throw UsageError("--steps and --ensemble must be positive");
  const fs::path dir = output_dir(s);
  const auto ensemble = fresh_ensemble(data, members, s.u64("run.seed", 0));

  std::vector<Tensor> inputs;
  for (const auto &e : ensemble)
    inputs.push_back(with_channel(e));
  const auto rolls = rollout_ensemble(model, inputs, steps);
  std::size_t next = 0;
  const Predictor lookup = [&](const Tensor &, std::size_t) { return rolls[next++].states; };
  ErrorCurve curve = horizon_error(lookup, data.equation, ensemble, data.dt, steps);

  std::size_t common = steps;
  std::size_t diverged = 0;
  for (const auto &r : rolls) {
    common = std::min(common, r.finite_steps());
    diverged += r.diverged ? 1 : 0;
  }
  std::vector<std::vector<Tensor>> fields(members);
  for (std::size_t m = 0; m < members; ++m) {
    fields[m].push_back(ensemble[m]);
    for (std::size_t j = 0; j < common; ++j)
      fields[m].push_back(rolls[m].states[j]);
  }
  DatasetSpec out_spec = data;
  out_spec.seed = s.u64("run.seed", 0);
  out_spec.burn_in = 0;
  const fs::path traj = dir / "trajectory.isfn";
  const fs::path csv = dir / "error.csv";
  save_fields(out_spec, fields, common + 1, traj);
  export_csv(csv, "J", curve.values, config_hash(s.hashable()), 1);

  const nlohmann::json outputs = {{"trajectory", rel(traj)},
                                  {"error", rel(csv)},
                                  {"finite_steps", common},
                                  {"curve_length", curve.values.size()},
                                  {"diverged_members", diverged},
                                  {"truncated_members", curve.truncated_members}};
  write_manifest(dir, "rollout", s, threads, outputs);
  std::printf("rollout %zu members, %zu/%zu finite steps, J(last) %.6e\n", members, common,
              steps, curve.values.empty() ? std::nan("") : curve.values.back());
  if (diverged > 0) {
    std::fprintf(stderr, "error: %zu of %zu members diverged, curve truncated at step %zu\n",
                 diverged, members, curve.values.size());
    return kDiverged;
  }
  return kOk;
}

int cmd_autocorr(Settings &s) {
  const int threads = apply_threads(s);
  const DatasetSpec data = read_dataset_spec(s.required("autocorr.data", "--data"));
  const std::size_t first = s.count("autocorr.window_start", 1000);
  const std::size_t last = s.count("autocorr.window_end", 4000);
  if (last <= first + 1)
    throw UsageError("autocorrelation window must contain at least one step");
  const std::size_t members = s.count("autocorr.ensemble", 1);
  if (members == 0)
    throw UsageError("--ensemble must be positive");
  const fs::path dir = output_dir(s);
  const auto ensemble = fresh_ensemble(data, members, s.u64("run.seed", 0));
  const std::uint64_t hash = config_hash(s.hashable());
  nlohmann::json outputs;

  // States strictly inside (first, last).
  std::vector<std::vector<Tensor>> reference(members);
  std::vector<std::string> failures(members);
#pragma omp parallel for schedule(dynamic, 1)
  for (long m = 0; m < static_cast<long>(members); ++m) {
    const auto mi = static_cast<std::size_t>(m);
    try {
      auto traj = solve_trajectory(data.equation, ensemble[mi], data.dt, last);
      reference[mi].assign(traj.begin() + static_cast<long>(first) + 1, traj.end());
    } catch (const std::exception &e) {
      failures[mi] = e.what();
    }
  }
  for (const auto &f : failures)
    if (!f.empty())
      throw DivergenceError("reference solve failed: " + f, std::nan(""));
  const auto k_solver = autocorrelation(reference);
  const fs::path solver_csv = dir / "autocorr_solver.csv";
  export_csv(solver_csv, "K_solver", k_solver, hash);
  outputs["solver"] = rel(solver_csv);

  const std::string ckpt = s.str("autocorr.checkpoint", "");
  if (!ckpt.empty()) {
    const Model model = load_checkpoint(ckpt);
    std::vector<Tensor> inputs;
    for (const auto &e : ensemble)
      inputs.push_back(with_channel(e));
    const auto rolls = rollout_ensemble(model, inputs, last - 1);
    std::vector<std::vector<Tensor>> window(members);
    for (std::size_t m = 0; m < members; ++m) {
      if (rolls[m].diverged) {
        std::fprintf(stderr, "error: member %zu diverged after %zu steps\n", m,
                     rolls[m].finite_steps());
        write_manifest(dir, "autocorr", s, threads, outputs);
        return kDiverged;
      }
      // states[j - 1] is the prediction at step j.
      window[m].assign(rolls[m].states.begin() + static_cast<long>(first),
                       rolls[m].states.end());
    }
    const auto k_model = autocorrelation(window);
    const fs::path model_csv = dir / "autocorr_model.csv";
    export_csv(model_csv, "K_model", k_model, hash);
    double dev = 0.0;
    for (std::size_t r = 0; r < k_model.size(); ++r)
      dev = std::max(dev, std::abs(k_model[r] - k_solver[r]));
    outputs["model"] = rel(model_csv);
    outputs["max_deviation"] = dev;
    std::printf("max |K_model - K_solver| = %.6e\n", dev);
  }
  write_manifest(dir, "autocorr", s, threads, outputs);
  std::printf("K_solver(0) = %.17g over %zu states per member\n", k_solver.front(),
              reference.front().size());
  return kOk;
}

int cmd_ist_demo(Settings &s) {
  const int threads = apply_threads(s);
  const std::vector<double> speeds = s.reals("ist.speeds", {2.0});
  LineGrid grid;
  grid.n = s.count("ist.grid", 512);
  grid.length = s.real("ist.length", 40.0);
  grid.x0 = s.real("ist.x0", -grid.length / 2);
  std::vector<double> crests_fallback;
  for (std::size_t j = 0; j < speeds.size(); ++j)
    crests_fallback.push_back(grid.x0 + grid.length * (static_cast<double>(j) + 1.0) /
                                            (static_cast<double>(speeds.size()) + 1.0));
  const std::vector<double> crests = s.reals("ist.crests", crests_fallback);
  const double time = s.real("ist.time", 0.0);
  if (crests.size() != speeds.size())
    throw UsageError("--crests needs one value per speed");
  if (time < 0.0)
    throw UsageError("--time must be non-negative");
  const fs::path dir = output_dir(s);

  const ScatteringData data0 = soliton_scattering(speeds, crests);
  const ScatteringData data1 = evolve_scattering(data0, time);
  const Tensor phi0 = reflectionless_reconstruct(data0, grid);
  const Tensor phi1 = reflectionless_reconstruct(data1, grid);
  const auto eig = discrete_spectrum(phi1, grid.length);

  std::printf("eigenvalues:");
  if (eig.empty())
    std::printf(" (none)");
  for (double v : eig)
    std::printf(" %.9f", v);
  std::printf("\nexact -k^2:");
  std::vector<double> exact;
  for (double k : data0.k)
    exact.push_back(-k * k);
  std::sort(exact.begin(), exact.end());
  if (exact.empty())
    std::printf(" (none)");
  for (double v : exact)
    std::printf(" %.9f", v);
  std::printf("\n");

  DatasetSpec spec;
  spec.equation = EquationConfig::standard(Family::KdV, {grid.n});
  spec.equation.length = {grid.length};
  spec.init = InitKind::Solitons;
  spec.dt = time > 0.0 ? time : 1.0;
  spec.sequences = 1;
  spec.seed = 0;
  std::vector<std::vector<Tensor>> fields{{phi0}};
  if (time > 0.0)
    fields.front().push_back(phi1);
  const fs::path file = dir / "ist_fields.isfn";
  save_fields(spec, fields, fields.front().size(), file);
  write_manifest(dir, "ist-demo", s, threads,
                 {{"fields", rel(file)}, {"eigenvalues", eig}, {"exact", exact}});
  return kOk;
}

int cmd_inspect(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw IoError("cannot open " + path);
  char magic[4] = {};
  is.read(magic, 4);
  if (!is)
    throw FormatError(path + " is too short to carry a header");
  const std::string m(magic, 4);
  nlohmann::json header;
  if (m == "ISFN")
    header = read_header(path);
  else if (m == "ISFM")
    header = read_checkpoint_header(path);
  else
    throw FormatError(path + " is neither an ISFN dataset nor an ISFM checkpoint");
  std::cout << header.dump(2) << '\n';
  return kOk;
}

void add_common(Command &c) {
  c.app->add_option("--config", c.config,
                    "key=value config file, or a manifest.json to replay a run");
  c.add("--out", "run.out", "output directory");
  c.add("--seed", "run.seed", "RNG seed");
  c.add("--threads", "run.threads", "worker thread cap (1 gives bit-reproducible runs)");
}

void add_equation(Command &c) {
  c.add("--family", "equation.family", "ms, ks, kdv or kp");
  c.add("--grid", "equation.grid", "grid extents, e.g. 64 or 64x64");
  c.add("--length", "equation.length", "domain length(s), comma-separated");
  c.add("--beta", "equation.beta", "MS/KS instability parameter");
  c.add("--dealias", "equation.dealias", "2/3-rule dealiasing (true/false)");
  c.add("--pin-mean", "equation.pin_mean", "drop the mean of the nonlinear term (true/false)");
}

int dispatch(const Command &c, const std::string &inspect_path) {
  if (c.name == "inspect")
    return cmd_inspect(inspect_path);
  Settings s = c.settings();
  if (c.name == "gen-data")
    return cmd_gen_data(s);
  if (c.name == "train")
    return cmd_train(s);
  if (c.name == "rollout")
    return cmd_rollout(s);
  if (c.name == "autocorr")
    return cmd_autocorr(s);
  return cmd_ist_demo(s);
}

} // namespace

int run(int argc, char **argv) {
  CLI::App app{"Operator learning and spectral solvers for nonlinear wave equations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  std::vector<std::unique_ptr<Command>> commands;
  auto make = [&](const std::string &name, const std::string &help) -> Command & {
    auto c = std::make_unique<Command>();
    c->name = name;
    c->app = app.add_subcommand(name, help);
    commands.push_back(std::move(c));
    return *commands.back();
  };

  Command &gen = make("gen-data", "generate a trajectory dataset with the reference solver");
  add_common(gen);
  add_equation(gen);
  gen.add("--n-seq", "dataset.sequences", "number of sequences");
  gen.add("--snapshots", "dataset.snapshots", "snapshots per sequence");
  gen.add("--dt", "dataset.dt", "snapshot interval");
  gen.add("--init", "dataset.init", "uniform, lowwave or solitons");
  gen.add("--uniform-range", "dataset.uniform_range", "uniform sampler bounds lo,hi");
  gen.add("--band", "dataset.band", "lowwave mode band");
  gen.add("--amp-range", "dataset.amp_range", "lowwave amplitude bounds lo,hi");
  gen.add("--soliton-count", "dataset.soliton_count", "soliton count bounds lo,hi");
  gen.add("--speed-range", "dataset.speed_range", "soliton speed bounds lo,hi");
  gen.add("--burn-in", "dataset.burn_in", "solver snapshots skipped before storing");
  gen.add("--val-fraction", "dataset.validation_fraction", "validation fraction (>= 0.1)");
  gen.add("--file", "dataset.file", "dataset file name inside the output directory");

  Command &tr = make("train", "train one model variant on a dataset");
  add_common(tr);
  tr.add("--data", "train.data", "ISFN dataset");
  tr.add("--variant", "model.variant",
         "fno, kfno_s, kfno_o, kfno_p, isfno_s, isfno_o, isfno_p, isfno_pk or isfno_pk3");
  tr.add("--width", "model.width", "latent width (added channels for IS-FNO)");
  tr.add("--cutoff", "model.cutoff", "Fourier mode cutoff, e.g. 16 or 8x8");
  tr.add("--horizon", "model.horizon", "steps n predicted per pass");
  tr.add("--hidden", "model.hidden", "MLP hidden width");
  tr.add("--h-layers", "model.h_layers", "encoder Fourier layers");
  tr.add("--q-layers", "model.q_layers", "decoder Fourier layers");
  tr.add("--a-layers", "model.a_layers", "latent Fourier layers of kFNO*/IS-FNO*");
  tr.add("--fg-layers", "model.fg_layers", "Fourier layers per RevNet sub-map");
  tr.add("--p-init", "model.p_init", "initial exponent of the learnable-power layer");
  tr.add("--epochs", "train.epochs", "training epochs");
  tr.add("--batch-size", "train.batch_size", "minibatch size");
  tr.add("--lr", "train.lr", "initial learning rate");
  tr.add("--weight-decay", "train.weight_decay", "decoupled weight decay");
  tr.add("--schedule-step", "train.schedule_step", "epochs between learning-rate cuts");
  tr.add("--schedule-factor", "train.schedule_factor", "learning-rate cut factor");
  tr.add("--clip", "train.clip_norm", "global gradient norm cap (<= 0 disables)");
  tr.add("--shards", "train.shards", "independent tapes per batch");
  tr.add("--recurrent", "train.recurrent", "unroll the single step n times (true/false)");
  tr.add("--quiet", "run.quiet", "suppress per-epoch progress (true/false)");

  Command &ro = make("rollout", "long-horizon rollout and accumulated error curve");
  add_common(ro);
  ro.add("--checkpoint", "rollout.checkpoint", "ISFM checkpoint");
  ro.add("--data", "rollout.data", "ISFN dataset whose spec defines equation, dt and sampler");
  ro.add("--steps", "rollout.steps", "rollout length J");
  ro.add("--ensemble", "rollout.ensemble", "number of fresh initial fields");

  Command &ac = make("autocorr", "time-averaged spatial autocorrelation of long runs");
  add_common(ac);
  ac.add("--data", "autocorr.data", "ISFN dataset whose spec defines equation, dt and sampler");
  ac.add("--checkpoint", "autocorr.checkpoint", "ISFM checkpoint (model curve if given)");
  ac.add("--window-start", "autocorr.window_start", "window start (exclusive) in steps");
  ac.add("--window-end", "autocorr.window_end", "window end (exclusive) in steps");
  ac.add("--ensemble", "autocorr.ensemble", "number of fresh initial fields");

  Command &ist = make("ist-demo", "soliton scattering data, spectrum and reconstruction");
  add_common(ist);
  ist.add("--speeds", "ist.speeds", "soliton speeds, comma-separated (empty for none)");
  ist.add("--crests", "ist.crests", "crest positions at t = 0, comma-separated");
  ist.add("--time", "ist.time", "evolution time");
  ist.add("--grid", "ist.grid", "grid points");
  ist.add("--length", "ist.length", "window length");
  ist.add("--x0", "ist.x0", "window start");

  Command &insp = make("inspect", "print the header of an ISFN or ISFM file");
  std::string inspect_path;
  insp.app->add_option("path", inspect_path, "file to inspect")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  const Command *chosen = nullptr;
  for (const auto &c : commands)
    if (c->app->parsed())
      chosen = c.get();

  try {
    return dispatch(*chosen, inspect_path);
  } catch (const UsageError &e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const ContractError &e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const UnsupportedError &e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const ShapeError &e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const DivergenceError &e) {
    std::fprintf(stderr, "diverged: %s\n", e.what());
    return kDiverged;
  } catch (const NumericalError &e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kDiverged;
  } catch (const SingularityError &e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kDiverged;
  } catch (const DegenerateError &e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kDiverged;
  } catch (const IoError &e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kIo;
  } catch (const FormatError &e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kIo;
  } catch (const fs::filesystem_error &e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kIo;
  } catch (const std::exception &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
}

} // namespace isfno::cli
