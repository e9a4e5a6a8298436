#pragma once

// Stochastic gradient descent-ascent over model weights, the variance vector delta and the
// conjunction/disjunction duals, plus evaluation metrics.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "logicloss/encoder.hpp"
#include "logicloss/formula.hpp"
#include "logicloss/model.hpp"
#include "logicloss/variational.hpp"

namespace logicloss {

enum class DualMode { kGlobal, kPerSample };

// How the constraint enters the weight update.
enum class ConstraintEncoder {
  kDualVariational,  // dual-weighted cost fed to the distributional loss
  kDL2,              // logic_weight * sum of clause products
  kFuzzyMinMax,      // logic_weight * max-min cost
  kNone,             // task loss only
};

std::string to_string(DualMode mode);
DualMode parse_dual_mode(const std::string& name);
std::string to_string(ConstraintEncoder enc);
ConstraintEncoder parse_constraint_encoder(const std::string& name);
std::string to_string(TolMode mode);
TolMode parse_tol_mode(const std::string& name);

struct TrainConfig {
  double eta_w = 1e-3;
  double eta_conj = 0.01;
  double eta_disj = 0.01;
  std::optional<double> schedule_gamma;  // eta_w(t) = gamma / sqrt(t + 1) when set
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  double tol = 0.01;
  TolMode tol_mode = TolMode::kUniform;
  double margin_eps = 0.01;
  std::uint64_t seed = 0;
  DualMode dual_mode = DualMode::kPerSample;
  UpdateRule optimizer = UpdateRule::kAdaptiveMoments;
  double variance_floor = kDefaultVarianceFloor;
  ConstraintEncoder encoder = ConstraintEncoder::kDualVariational;
  double logic_weight = 1.0;  // baselines only

  void validate() const;
};

using SlotInputs = std::map<std::string, std::vector<double>, std::less<>>;

struct Sample {
  std::size_t id = 0;
  SlotInputs inputs;                 // slot name -> model input
  std::optional<std::size_t> label;  // class target
  std::vector<double> target;        // regression target, empty when absent
  std::size_t constraint = 0;        // index into Dataset::constraints
  bool focus = true;                 // counted in per-literal rates

  bool labeled() const { return label.has_value() || !target.empty(); }
};

struct Dataset {
  std::vector<Sample> samples;
  std::vector<CnfTemplate> constraints;  // empty: no constraint
  std::string task_slot = "x";

  const CnfTemplate* constraint_of(const Sample& s) const;
  // Output dimension m of the constraint; every template must agree.
  std::size_t logic_dims() const;
  // Atom tags in first-appearance order.
  std::vector<std::string> literal_tags() const;
};

struct TrainState {
  ModelParameters model;
  DeltaState delta;
  std::optional<DualState> global_duals;
  std::map<std::size_t, DualState> sample_duals;
  std::uint64_t t = 0;
  std::mt19937_64 rng;

  // Duals for a sample, created uniform on first use.
  DualState& duals_for(const Sample& s, const CnfTemplate& cnf, DualMode mode);
};

TrainState make_state(const MlpSpec& spec, const TrainConfig& cfg, const Dataset& train);

// Uniform duals shaped like the clauses of `cnf`.
DualState uniform_duals(const CnfTemplate& cnf);

double stepsize(std::uint64_t t, const TrainConfig& cfg);

struct StepStats {
  double task_loss = 0.0;   // batch mean
  double logic_loss = 0.0;  // batch mean
  double mean_mu = 0.0;
};

struct SampleGradient {
  double task_loss = 0.0;
  double logic_loss = 0.0;
  bool has_constraint = false;
  std::vector<double> z;  // group costs (dual encoder only)
  CostMatrix costs;
  Gradients grad;
};

// Loss terms of one sample and their parameter gradient times `scale`. `duals` is required
// for the dual encoder when the sample has a constraint.
SampleGradient sample_gradient(const ModelParameters& model, const Dataset& data, const Sample& s,
                               const DualState* duals, const DeltaState& delta,
                               const TrainConfig& cfg, double scale);

// One iteration: weights, then delta, then conjunction duals, then disjunction duals.
StepStats sgda_step(TrainState& state, const Dataset& data, const std::vector<std::size_t>& batch,
                    const TrainConfig& cfg);

// Projected dual updates given fixed cost matrices (one per batch entry).
void update_duals(std::vector<DualState*>& duals, const std::vector<const CostMatrix*>& costs,
                  const TrainConfig& cfg);

struct MetricsRow {
  std::size_t epoch = 0;
  double task_loss = 0.0;
  double acc_or_mse = 0.0;
  double mae = 0.0;  // regression only
  double sat = 0.0;
  std::vector<double> lit_sat;  // aligned with the tag list
  double mean_mu = 0.0;         // mean closed-form cost
  double mean_delta = 0.0;
  double dual_entropy = 0.0;  // mean entropy (nats) of stored disjunction duals
};

MetricsRow evaluate(const TrainState& state, const Dataset& data, const TrainConfig& cfg,
                    const std::vector<std::string>& tags);

struct TrainResult {
  TrainState state;
  std::vector<MetricsRow> rows;
  std::vector<std::string> tags;
};

using EpochCallback = std::function<void(const MetricsRow&)>;

TrainResult train(const Dataset& train_set, const Dataset& eval_set, const MlpSpec& spec,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

void write_metrics_csv(std::ostream& out, const std::vector<std::string>& tags,
                       const std::vector<MetricsRow>& rows);

// Worker count from LOGICLOSS_THREADS (default 1).
std::size_t worker_count();

}  // namespace logicloss
