#include "isfno/trainer.hpp"

#include "isfno/checkpoint.hpp"
#include "isfno/errors.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>

namespace isfno {

namespace {

std::vector<double> sample_norms(const Tensor &b) {
  if (b.rank() < 1 || b.dim(0) == 0)
    throw ShapeError("relative L2 needs a non-empty batch axis");
  const std::size_t batch = b.dim(0);
  const std::size_t per = b.size() / batch;
  std::vector<double> out(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < per; ++j)
      s += b[i * per + j] * b[i * per + j];
    if (!(s > 0.0))
      throw DegenerateError("relative L2 target of sample " + std::to_string(i) +
                            " has zero norm");
    out[i] = std::sqrt(s);
  }
  return out;
}

Tensor slice_batch(const Tensor &t, std::size_t begin, std::size_t end) {
  Shape s = t.shape();
  const std::size_t per = t.size() / s[0];
  s[0] = end - begin;
  return Tensor(s, std::vector<double>(t.data() + begin * per, t.data() + end * per));
}

void shuffle(std::vector<PairIndex> &v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(unit_uniform(rng()) * static_cast<double>(i));
    std::swap(v[i - 1], v[std::min(j, i - 1)]);
  }
}

Var prediction(const Bound &p, Var phi, std::size_t n, bool recurrent) {
  if (!recurrent) {
    if (p.spec().horizon != n)
      throw ContractError("model horizon " + std::to_string(p.spec().horizon) +
                          " does not match target horizon " + std::to_string(n));
    return forward_multi(p, phi);
  }
  std::vector<Var> steps;
  Var cur = phi;
  for (std::size_t j = 0; j < n; ++j) {
    cur = single_step(p, cur);
    steps.push_back(cur);
  }
  return ops::stack_steps(steps);
}

std::size_t target_horizon(const Tensor &inputs, const Tensor &targets) {
  if (targets.rank() != inputs.rank() + 1 || targets.dim(0) != inputs.dim(0))
    throw ContractError("targets " + shape_string(targets.shape()) +
                        " are not (B, n, ...) for inputs " + shape_string(inputs.shape()));
  return targets.dim(1);
}

} // namespace

void TrainConfig::validate() const {
  if (epochs == 0 || batch_size == 0 || horizon == 0 || shards == 0 || schedule_step == 0)
    throw ContractError("epochs, batch size, horizon, shards and schedule step must be positive");
  if (!(lr > 0.0) || weight_decay < 0.0 || !(eps > 0.0) || !(schedule_factor > 0.0))
    throw ContractError("learning rate, epsilon and decay factor must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
    throw ContractError("Adam betas must lie in [0, 1)");
}

Var relative_l2_per_sample(Var a, const Tensor &b) {
  if (a.value().shape() != b.shape())
    throw ShapeError("relative L2 operands " + shape_string(a.value().shape()) + " and " +
                     shape_string(b.shape()) + " differ");
  const std::vector<double> norms = sample_norms(b);
  Tensor inv({norms.size()});
  for (std::size_t i = 0; i < norms.size(); ++i)
    inv[i] = 1.0 / norms[i];
  Var num = ops::sqrt(ops::sum_squares_per_sample(ops::sub_const(a, b)));
  return ops::mul_const(num, inv);
}

Var relative_l2(Var a, const Tensor &b) { return ops::mean(relative_l2_per_sample(a, b)); }

double relative_l2(const Tensor &a, const Tensor &b) {
  if (a.shape() != b.shape())
    throw ShapeError("relative L2 operands differ in shape");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  if (!(den > 0.0))
    throw DegenerateError("relative L2 target has zero norm");
  return std::sqrt(num / den);
}

Var loss_multistep(const Bound &p, const Tensor &inputs, const Tensor &targets) {
  const std::size_t n = target_horizon(inputs, targets);
  return relative_l2(prediction(p, p.tape().constant(inputs), n, false), targets);
}

Var loss_recurrent(const Bound &p, const Tensor &inputs, const Tensor &targets) {
  const std::size_t n = target_horizon(inputs, targets);
  return relative_l2(prediction(p, p.tape().constant(inputs), n, true), targets);
}

AdamState adam_init(const Model &model) {
  AdamState s;
  for (const auto &p : model.parameters()) {
    s.m.emplace_back(p.value.shape());
    s.v.emplace_back(p.value.shape());
  }
  return s;
}

void adam_step(std::vector<Parameter> &params, const std::vector<Tensor> &grads, AdamState &state,
               const TrainConfig &cfg, double lr) {
  if (grads.size() != params.size() || state.m.size() != params.size())
    throw ContractError("Adam state does not match the parameter set");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].value.shape())
      throw ContractError("gradient shape mismatch for " + params[i].name);
    if (!grads[i].all_finite())
      throw NumericalError("non-finite gradient in parameter " + params[i].name);
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor &w = params[i].value;
    Tensor &m = state.m[i];
    Tensor &v = state.v[i];
    const Tensor &g = grads[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      w[k] -= lr * cfg.weight_decay * w[k] + lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

double clip_gradients(std::vector<Tensor> &grads, double max_norm) {
  double sq = 0.0;
  for (const auto &g : grads)
    for (double v : g.values())
      sq += v * v;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto &g : grads)
      for (auto &v : g.values())
        v *= s;
  }
  return norm;
}

double lr_at(std::size_t epoch, const TrainConfig &cfg) {
  return cfg.lr * std::pow(cfg.schedule_factor, static_cast<double>(epoch / cfg.schedule_step));
}

BatchResult batch_gradients(const Model &model, const Tensor &inputs, const Tensor &targets,
                            const TrainConfig &cfg) {
  const std::size_t batch = inputs.dim(0);
  const std::size_t n = target_horizon(inputs, targets);
  const std::size_t shards = std::min(cfg.shards, batch);
  std::vector<BatchResult> parts(shards);
  std::vector<std::string> errors(shards);

  auto run_shard = [&](std::size_t s) {
    const std::size_t b0 = s * batch / shards, b1 = (s + 1) * batch / shards;
    const Tensor in = shards == 1 ? inputs : slice_batch(inputs, b0, b1);
    const Tensor tg = shards == 1 ? targets : slice_batch(targets, b0, b1);
    Tape tape;
    Bound bound(model, tape, true);
    Var pred = prediction(bound, tape.constant(in), n, cfg.recurrent);
    // Shard losses are sums scaled by the full batch so they add to the mean.
    Var loss = ops::scale(ops::sum(relative_l2_per_sample(pred, tg)),
                          1.0 / static_cast<double>(batch));
    const Gradients g = tape.backward(loss);
    parts[s].loss = loss.value()[0];
    for (const Var &v : bound.vars())
      parts[s].grads.push_back(g.of(v));
  };

  if (shards == 1) {
    run_shard(0);
    return std::move(parts[0]);
  }
#pragma omp parallel for schedule(static, 1)
  for (long s = 0; s < static_cast<long>(shards); ++s) {
    try {
      run_shard(static_cast<std::size_t>(s));
    } catch (const std::exception &e) {
      errors[static_cast<std::size_t>(s)] = e.what();
    }
  }
  for (const auto &e : errors)
    if (!e.empty())
      throw NumericalError("gradient shard failed: " + e);
  BatchResult out = std::move(parts[0]);
  for (std::size_t s = 1; s < shards; ++s) {
    out.loss += parts[s].loss;
    for (std::size_t i = 0; i < out.grads.size(); ++i)
      for (std::size_t k = 0; k < out.grads[i].size(); ++k)
        out.grads[i][k] += parts[s].grads[i][k];
  }
  return out;
}

double evaluate_loss(const Model &model, const Dataset &ds, std::span<const PairIndex> pairs,
                     const TrainConfig &cfg) {
  if (pairs.empty())
    throw ContractError("no pairs to evaluate");
  double total = 0.0;
  for (std::size_t b0 = 0; b0 < pairs.size(); b0 += cfg.batch_size) {
    const std::size_t b1 = std::min(pairs.size(), b0 + cfg.batch_size);
    const auto chunk = pairs.subspan(b0, b1 - b0);
    const Tensor in = batch_inputs(ds, chunk);
    const Tensor tg = batch_targets(ds, chunk, cfg.horizon);
    Tape tape;
    Bound bound(model, tape, false);
    Var per = relative_l2_per_sample(prediction(bound, tape.constant(in), cfg.horizon,
                                                cfg.recurrent),
                                     tg);
    for (double v : per.value().values())
      total += v;
  }
  return total / static_cast<double>(pairs.size());
}

TrainReport train(Model &model, const Dataset &ds, const TrainConfig &cfg,
                  const std::optional<std::filesystem::path> &checkpoint,
                  const EpochCallback &on_epoch) {
  cfg.validate();
  if (!cfg.recurrent && model.spec().horizon != cfg.horizon)
    throw ContractError("model horizon " + std::to_string(model.spec().horizon) +
                        " differs from the training horizon " + std::to_string(cfg.horizon));
  const auto start = std::chrono::steady_clock::now();
  const SplitIndices sp = split(ds);
  std::vector<PairIndex> train_pairs = pairs(ds, cfg.horizon, sp.train);
  const std::vector<PairIndex> val_pairs = pairs(ds, cfg.horizon, sp.validation);

  TrainReport report;
  AdamState adam = adam_init(model);
  std::vector<Parameter> best = model.parameters();
  double best_val = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at(epoch, cfg);
    shuffle(train_pairs, derive_seed(cfg.seed, epoch));
    double sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t b0 = 0; b0 < train_pairs.size(); b0 += cfg.batch_size, ++batch_index) {
      const std::size_t b1 = std::min(train_pairs.size(), b0 + cfg.batch_size);
      const std::span<const PairIndex> chunk(train_pairs.data() + b0, b1 - b0);
      BatchResult r = batch_gradients(model, batch_inputs(ds, chunk),
                                      batch_targets(ds, chunk, cfg.horizon), cfg);
      if (!std::isfinite(r.loss))
        throw DivergenceError("training loss diverged at epoch " + std::to_string(epoch) +
                                  ", batch " + std::to_string(batch_index),
                              std::nan(""));
      clip_gradients(r.grads, cfg.clip_norm);
      adam_step(model.parameters(), r.grads, adam, cfg, lr);
      sum += r.loss * static_cast<double>(b1 - b0);
    }
    const double train_loss = sum / static_cast<double>(train_pairs.size());
    double val = std::numeric_limits<double>::quiet_NaN();
    try {
      val = evaluate_loss(model, ds, val_pairs, cfg);
    } catch (const DivergenceError &) {
    }
    report.train_loss.push_back(train_loss);
    report.val_loss.push_back(val);
    report.lr.push_back(lr);
    if (std::isfinite(val) && val < best_val) {
      best_val = val;
      best = model.parameters();
      report.best_epoch = epoch;
    }
    if (on_epoch)
      on_epoch(epoch, train_loss, val);
  }
  model.parameters() = best;
  report.best_val = best_val;
  if (checkpoint) {
    save_checkpoint(model, *checkpoint);
    report.checkpoint = checkpoint;
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

void write_report_csv(const TrainReport &report, const std::filesystem::path &path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os)
    throw IoError("cannot open " + path.string() + " for writing");
  os << "epoch,train_loss,val_loss,lr\n";
  char buf[128];
  for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", e, report.train_loss[e],
                  report.val_loss[e], report.lr[e]);
    os << buf;
  }
  if (!os)
    throw IoError("write failed for " + path.string());
}

} // namespace isfno
