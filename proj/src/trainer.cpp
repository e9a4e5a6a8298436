#include "logicloss/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ostream>
#include <thread>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "logicloss/errors.hpp"

namespace logicloss {

std::string to_string(DualMode mode) { return mode == DualMode::kGlobal ? "global" : "per_sample"; }

DualMode parse_dual_mode(const std::string& name) {
  if (name == "global") return DualMode::kGlobal;
  if (name == "per_sample") return DualMode::kPerSample;
  throw ConfigError(fmt::format("unknown dual_mode '{}'", name));
}

std::string to_string(ConstraintEncoder enc) {
  switch (enc) {
    case ConstraintEncoder::kDualVariational: return "dual";
    case ConstraintEncoder::kDL2: return "dl2";
    case ConstraintEncoder::kFuzzyMinMax: return "fuzzy";
    case ConstraintEncoder::kNone: return "none";
  }
  return "none";
}

ConstraintEncoder parse_constraint_encoder(const std::string& name) {
  if (name == "dual") return ConstraintEncoder::kDualVariational;
  if (name == "dl2") return ConstraintEncoder::kDL2;
  if (name == "fuzzy") return ConstraintEncoder::kFuzzyMinMax;
  if (name == "none") return ConstraintEncoder::kNone;
  throw ConfigError(fmt::format("unknown encoder '{}'", name));
}

std::string to_string(TolMode mode) {
  switch (mode) {
    case TolMode::kUniform: return "uniform";
    case TolMode::kStrictOnly: return "strict_only";
    case TolMode::kBand: return "band";
  }
  return "uniform";
}

TolMode parse_tol_mode(const std::string& name) {
  if (name == "uniform") return TolMode::kUniform;
  if (name == "strict_only") return TolMode::kStrictOnly;
  if (name == "band") return TolMode::kBand;
  throw ConfigError(fmt::format("unknown tol_mode '{}'", name));
}

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(fmt::format("{} must be positive", name));
  };
  positive(eta_w, "eta_w");
  positive(eta_conj, "eta_conj");
  positive(eta_disj, "eta_disj");
  if (schedule_gamma) positive(*schedule_gamma, "gamma");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(tol >= 0.0)) throw ConfigError("tol must be non-negative");
  positive(margin_eps, "margin");
  positive(variance_floor, "variance_floor");
  if (!(logic_weight >= 0.0)) throw ConfigError("logic_weight must be non-negative");
}

const CnfTemplate* Dataset::constraint_of(const Sample& s) const {
  if (constraints.empty()) return nullptr;
  if (s.constraint >= constraints.size())
    throw IndexOutOfRange(fmt::format("sample {} refers to constraint {}", s.id, s.constraint));
  return &constraints[s.constraint];
}

std::size_t Dataset::logic_dims() const {
  if (constraints.empty()) return 0;
  const std::size_t m = constraints.front().num_groups;
  for (const auto& c : constraints)
    if (c.num_groups != m)
      throw ConfigError("constraint templates disagree on the number of cost dimensions");
  return m;
}

std::vector<std::string> Dataset::literal_tags() const {
  std::vector<std::string> tags;
  for (const auto& c : constraints)
    for (const auto& clause : c.clauses)
      for (const auto& a : clause)
        if (!a.tag.empty() && std::find(tags.begin(), tags.end(), a.tag) == tags.end())
          tags.push_back(a.tag);
  return tags;
}

DualState uniform_duals(const CnfTemplate& cnf) {
  DualState d;
  const std::size_t n = cnf.clauses.size();
  d.conj.assign(n, n == 0 ? 0.0 : 1.0 / static_cast<double>(n));
  for (const auto& clause : cnf.clauses)
    d.disj.emplace_back(clause.size(), clause.empty() ? 0.0 : 1.0 / static_cast<double>(clause.size()));
  return d;
}

DualState& TrainState::duals_for(const Sample& s, const CnfTemplate& cnf, DualMode mode) {
  if (mode == DualMode::kGlobal) {
    if (!global_duals) global_duals = uniform_duals(cnf);
    if (global_duals->conj.size() != cnf.clauses.size())
      throw ConfigError("global dual mode needs a single constraint shape");
    return *global_duals;
  }
  auto it = sample_duals.find(s.id);
  if (it == sample_duals.end()) it = sample_duals.emplace(s.id, uniform_duals(cnf)).first;
  return it->second;
}

TrainState make_state(const MlpSpec& spec, const TrainConfig& cfg, const Dataset& train) {
  cfg.validate();
  TrainState s;
  s.model = init(spec);
  s.delta = DeltaState::ones(train.logic_dims(), cfg.variance_floor);
  s.rng.seed(cfg.seed);
  return s;
}

double stepsize(std::uint64_t t, const TrainConfig& cfg) {
  if (cfg.schedule_gamma) return *cfg.schedule_gamma / std::sqrt(static_cast<double>(t) + 1.0);
  return cfg.eta_w;
}

std::size_t worker_count() {
  const char* env = std::getenv("LOGICLOSS_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) return 1;
  return static_cast<std::size_t>(n);
}

namespace {

// Runs body(i) for i in [0, n), split into contiguous chunks over the configured workers.
template <typename Body>
void for_each_index(std::size_t n, Body&& body) {
  const std::size_t workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::jthread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w * chunk; i < std::min(n, (w + 1) * chunk); ++i) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  pool.clear();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct SlotPass {
  std::string slot;
  ForwardTrace trace;
};

// Forward passes for the task slot and every slot named by the constraint.
std::vector<SlotPass> forward_slots(const ModelParameters& model, const Sample& s,
                                    const CnfTemplate* cnf, const std::string& task_slot) {
  std::vector<std::string> names;
  if (cnf != nullptr) names = cnf->slot_names;
  if (s.inputs.count(task_slot) && std::find(names.begin(), names.end(), task_slot) == names.end())
    names.push_back(task_slot);
  std::vector<SlotPass> out;
  for (const auto& name : names) {
    auto it = s.inputs.find(name);
    if (it == s.inputs.end())
      throw UnknownSlot(fmt::format("sample {} has no input for slot '{}'", s.id, name));
    out.push_back({name, forward(model, it->second)});
  }
  return out;
}

SlotBindings bindings_of(const std::vector<SlotPass>& passes) {
  SlotBindings b;
  for (const auto& p : passes)
    b.emplace(p.slot, std::vector<double>(p.trace.output.data(),
                                          p.trace.output.data() + p.trace.output.size()));
  return b;
}

double entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

void project_step(std::vector<double>& x, const std::vector<double>& g, double step) {
  if (std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; })) return;
  for (std::size_t k = 0; k < x.size(); ++k) x[k] += step * g[k];
  x = project_simplex(x);
}

}  // namespace

SampleGradient sample_gradient(const ModelParameters& model, const Dataset& data, const Sample& s,
                               const DualState* duals, const DeltaState& delta,
                               const TrainConfig& cfg, double scale) {
  const CnfTemplate* cnf = data.constraint_of(s);
  SampleGradient w;
  w.grad = model.zero_gradients();
  const auto passes = forward_slots(model, s, cnf, data.task_slot);

  std::map<std::string, Eigen::VectorXd, std::less<>> d_out;
  Eigen::VectorXd d_logits;
  for (const auto& p : passes) d_out[p.slot] = Eigen::VectorXd::Zero(p.trace.output.size());

  // task loss on the task slot
  for (const auto& p : passes) {
    if (p.slot != data.task_slot) continue;
    if (s.label) {
      if (model.spec.head != Head::kSoftmax) throw ConfigError("class labels need a softmax head");
      const CrossEntropy ce = cross_entropy(p.trace.output, *s.label);
      w.task_loss = ce.loss;
      d_logits = ce.d_logits * scale;
    } else if (!s.target.empty()) {
      const SquaredError se = squared_error(p.trace.output, s.target);
      w.task_loss = se.loss;
      d_out[p.slot] += se.d_output * scale;
    }
  }

  const bool use_logic = cfg.encoder != ConstraintEncoder::kNone;
  if (use_logic && cnf != nullptr && !cnf->clauses.empty()) {
    w.has_constraint = true;
    const Grounding g = ground(*cnf, bindings_of(passes));
    w.costs = encode(*cnf, g);
    std::vector<double> flat;
    if (cfg.encoder == ConstraintEncoder::kDualVariational) {
      if (duals == nullptr) throw ConfigError("the dual encoder needs dual variables");
      w.z = group_costs(w.costs, *duals, cnf->group_map, cnf->num_groups);
      w.logic_loss = logic_loss(w.z, delta).total();
      const LogicLossGrad lg = logic_loss_grad(w.z, delta);
      std::vector<double> clause_scale(cnf->clauses.size());
      for (std::size_t i = 0; i < clause_scale.size(); ++i)
        clause_scale[i] = lg.d_mu[cnf->group_map[i]] * scale;
      flat = grad_outputs(w.costs, *duals, clause_scale);
    } else {
      const EncoderKind kind =
          cfg.encoder == ConstraintEncoder::kDL2 ? EncoderKind::kDL2Baseline : EncoderKind::kFuzzyMinMax;
      w.logic_loss = cfg.logic_weight * baseline_cost(w.costs, kind);
      flat = baseline_grad(w.costs, kind);
      for (double& v : flat) v *= cfg.logic_weight * scale;
    }
    for (std::size_t k = 0; k < cnf->slot_names.size(); ++k) {
      Eigen::VectorXd& d = d_out[cnf->slot_names[k]];
      for (std::size_t j = 0; j < g.slot_sizes[k]; ++j)
        d[static_cast<Eigen::Index>(j)] += flat[g.slot_offsets[k] + j];
    }
  }

  for (const auto& p : passes) {
    const bool task = p.slot == data.task_slot;
    backward(model, p.trace, d_out[p.slot], task ? d_logits : Eigen::VectorXd(), w.grad);
  }
  return w;
}

void update_duals(std::vector<DualState*>& duals, const std::vector<const CostMatrix*>& costs,
                  const TrainConfig& cfg) {
  if (duals.size() != costs.size()) throw ShapeMismatch("one cost matrix per dual state expected");
  if (duals.empty()) return;

  auto step_conj = [&](DualState& d, const DualGradient& g) { project_step(d.conj, g.conj, cfg.eta_conj); };
  auto step_disj = [&](DualState& d, const DualGradient& g) {
    for (std::size_t i = 0; i < d.disj.size(); ++i) project_step(d.disj[i], g.disj[i], -cfg.eta_disj);
  };

  if (cfg.dual_mode == DualMode::kGlobal) {
    // Shared duals: average the batch gradients.
    DualState& d = *duals.front();
    auto mean_grad = [&] {
      DualGradient acc = grad_duals(*costs.front(), d);
      for (std::size_t b = 1; b < costs.size(); ++b) {
        const DualGradient g = grad_duals(*costs[b], d);
        for (std::size_t i = 0; i < acc.conj.size(); ++i) {
          acc.conj[i] += g.conj[i];
          for (std::size_t j = 0; j < acc.disj[i].size(); ++j) acc.disj[i][j] += g.disj[i][j];
        }
      }
      const double inv = 1.0 / static_cast<double>(costs.size());
      for (std::size_t i = 0; i < acc.conj.size(); ++i) {
        acc.conj[i] *= inv;
        for (double& v : acc.disj[i]) v *= inv;
      }
      return acc;
    };
    step_conj(d, mean_grad());
    step_disj(d, mean_grad());
    return;
  }
  for (std::size_t b = 0; b < duals.size(); ++b) {
    step_conj(*duals[b], grad_duals(*costs[b], *duals[b]));
    step_disj(*duals[b], grad_duals(*costs[b], *duals[b]));
  }
}

StepStats sgda_step(TrainState& state, const Dataset& data, const std::vector<std::size_t>& batch,
                    const TrainConfig& cfg) {
  if (batch.empty()) throw EmptyBatch("sgda_step: empty batch");
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const bool use_logic = cfg.encoder != ConstraintEncoder::kNone && !data.constraints.empty();
  const bool dual = cfg.encoder == ConstraintEncoder::kDualVariational;

  // Dual states are created up front so workers only read the store.
  std::vector<DualState*> duals(batch.size(), nullptr);
  if (use_logic && dual)
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const Sample& s = data.samples.at(batch[b]);
      if (const CnfTemplate* cnf = data.constraint_of(s); cnf != nullptr && !cnf->clauses.empty())
        duals[b] = &state.duals_for(s, *cnf, cfg.dual_mode);
    }

  std::vector<SampleGradient> work(batch.size());
  for_each_index(batch.size(), [&](std::size_t b) {
    work[b] = sample_gradient(state.model, data, data.samples.at(batch[b]), duals[b], state.delta,
                              cfg, inv_b);
  });

  // (1) weights: reduce in sample order, then update
  StepStats stats;
  for (const auto& w : work) {
    state.model.grad.add(w.grad);
    stats.task_loss += w.task_loss * inv_b;
    stats.logic_loss += w.logic_loss * inv_b;
  }
  if (!std::isfinite(stats.task_loss) || !std::isfinite(stats.logic_loss)) {
    std::string dump;
    for (std::size_t b = 0; b < batch.size(); ++b)
      dump += fmt::format("\n  sample {}: task {} logic {} z [{}]", data.samples[batch[b]].id,
                          work[b].task_loss, work[b].logic_loss, fmt::join(work[b].z, ", "));
    throw NonFiniteLoss(fmt::format("non-finite loss at iteration {}:{}", state.t, dump));
  }
  apply_update(state.model, stepsize(state.t, cfg), cfg.optimizer);

  if (use_logic && dual) {
    // (2) delta from the pre-step costs
    std::vector<std::vector<double>> mus;
    for (const auto& w : work)
      if (w.has_constraint) mus.push_back(w.z);
    if (!mus.empty()) {
      state.delta = delta_oracle(mus, cfg.variance_floor);
      double total = 0.0;
      for (const auto& z : mus)
        for (double v : z) total += v;
      stats.mean_mu = total / static_cast<double>(mus.size());
    }

    // (3), (4) duals
    std::vector<DualState*> ds;
    std::vector<const CostMatrix*> cs;
    for (std::size_t b = 0; b < batch.size(); ++b)
      if (work[b].has_constraint) {
        ds.push_back(duals[b]);
        cs.push_back(&work[b].costs);
      }
    update_duals(ds, cs, cfg);
  }
  ++state.t;
  return stats;
}

MetricsRow evaluate(const TrainState& state, const Dataset& data, const TrainConfig& cfg,
                    const std::vector<std::string>& tags) {
  MetricsRow row;
  row.lit_sat.assign(tags.size(), 0.0);
  if (data.samples.empty()) throw EmptyBatch("evaluate: empty dataset");

  struct Eval {
    double task_loss = 0.0, correct = 0.0, sq = 0.0, abs = 0.0, cost = 0.0;
    bool labeled = false, sat = true;
    std::vector<int> tag_state;  // -1 absent, 0 violated, 1 holds
  };
  std::vector<Eval> ev(data.samples.size());
  for_each_index(data.samples.size(), [&](std::size_t i) {
    const Sample& s = data.samples[i];
    const CnfTemplate* cnf = data.constraint_of(s);
    const auto passes = forward_slots(state.model, s, cnf, data.task_slot);
    Eval& e = ev[i];
    e.tag_state.assign(tags.size(), -1);
    for (const auto& p : passes) {
      if (p.slot != data.task_slot) continue;
      if (s.label) {
        e.labeled = true;
        e.task_loss = cross_entropy(p.trace.output, *s.label).loss;
        Eigen::Index arg = 0;
        p.trace.output.maxCoeff(&arg);
        e.correct = static_cast<std::size_t>(arg) == *s.label ? 1.0 : 0.0;
      } else if (!s.target.empty()) {
        e.labeled = true;
        const SquaredError se = squared_error(p.trace.output, s.target);
        e.task_loss = se.loss;
        e.sq = se.loss;
        for (std::size_t k = 0; k < s.target.size(); ++k)
          e.abs += std::abs(p.trace.output[static_cast<Eigen::Index>(k)] - s.target[k]) /
                   static_cast<double>(s.target.size());
      }
    }
    if (cnf == nullptr || cnf->clauses.empty()) return;
    const Grounding g = ground(*cnf, bindings_of(passes));
    e.sat = eval_bool(*cnf, g.values, cfg.tol, cfg.tol_mode);
    e.cost = closed_form_cost(encode(*cnf, g)).value;
    std::size_t k = 0;
    for (const auto& clause : cnf->clauses)
      for (const auto& atom : clause) {
        const bool ok = atom_holds(atom, g.values[k++], cfg.tol, cfg.tol_mode);
        for (std::size_t t = 0; t < tags.size(); ++t)
          if (atom.tag == tags[t]) e.tag_state[t] = (e.tag_state[t] != 0 && ok) ? 1 : 0;
      }
  });

  double labeled = 0.0, sat = 0.0, cost = 0.0;
  std::vector<double> tag_hits(tags.size(), 0.0), tag_count(tags.size(), 0.0);
  const bool regression = state.model.spec.head == Head::kReluRegression;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    const Eval& e = ev[i];
    if (e.labeled) {
      labeled += 1.0;
      row.task_loss += e.task_loss;
      row.acc_or_mse += regression ? e.sq : e.correct;
      row.mae += e.abs;
    }
    sat += e.sat ? 1.0 : 0.0;
    cost += e.cost;
    if (!data.samples[i].focus) continue;
    for (std::size_t t = 0; t < tags.size(); ++t)
      if (e.tag_state[t] >= 0) {
        tag_count[t] += 1.0;
        tag_hits[t] += e.tag_state[t];
      }
  }
  const double n = static_cast<double>(ev.size());
  if (labeled > 0.0) {
    row.task_loss /= labeled;
    row.acc_or_mse /= labeled;
    row.mae /= labeled;
  }
  row.sat = sat / n;
  row.mean_mu = cost / n;
  for (std::size_t t = 0; t < tags.size(); ++t)
    row.lit_sat[t] = tag_count[t] > 0.0 ? tag_hits[t] / tag_count[t] : 0.0;

  if (!state.delta.delta.empty()) {
    double s = 0.0;
    for (double d : state.delta.delta) s += d;
    row.mean_delta = s / static_cast<double>(state.delta.delta.size());
  }
  double h = 0.0, count = 0.0;
  auto add_entropy = [&](const DualState& d) {
    for (const auto& nu : d.disj) {
      h += entropy(nu);
      count += 1.0;
    }
  };
  if (state.global_duals) add_entropy(*state.global_duals);
  for (const auto& [id, d] : state.sample_duals) add_entropy(d);
  row.dual_entropy = count > 0.0 ? h / count : 0.0;
  return row;
}

TrainResult train(const Dataset& train_set, const Dataset& eval_set, const MlpSpec& spec,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  if (train_set.samples.empty()) throw EmptyBatch("train: empty training set");
  TrainResult result{make_state(spec, cfg, train_set), {}, train_set.literal_tags()};
  for (const auto& t : eval_set.literal_tags())
    if (std::find(result.tags.begin(), result.tags.end(), t) == result.tags.end()) result.tags.push_back(t);

  auto record = [&](std::size_t epoch) {
    MetricsRow row = evaluate(result.state, eval_set, cfg, result.tags);
    row.epoch = epoch;
    if (on_epoch) on_epoch(row);
    result.rows.push_back(std::move(row));
  };
  record(0);

  std::vector<std::size_t> order(train_set.samples.size());
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), result.state.rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(stop));
      sgda_step(result.state, train_set, batch, cfg);
    }
    record(epoch);
  }
  return result;
}

void write_metrics_csv(std::ostream& out, const std::vector<std::string>& tags,
                       const std::vector<MetricsRow>& rows) {
  fmt::print(out, "epoch,task_loss,acc_or_mse,mae,sat");
  for (const auto& t : tags) fmt::print(out, ",lit_sat_{}", t);
  fmt::print(out, ",mean_mu,mean_delta,dual_entropy\n");
  for (const auto& r : rows) {
    fmt::print(out, "{},{:.9g},{:.9g},{:.9g},{:.9g}", r.epoch, r.task_loss, r.acc_or_mse, r.mae, r.sat);
    for (double v : r.lit_sat) fmt::print(out, ",{:.9g}", v);
    fmt::print(out, ",{:.9g},{:.9g},{:.9g}\n", r.mean_mu, r.mean_delta, r.dual_entropy);
  }
}

}  // namespace logicloss
