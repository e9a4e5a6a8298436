#pragma once

// Finite-difference gradient suites and the two small robustness examples comparing the
// dual encoding against min-max and product encodings.

#include <cstdint>
#include <string>
#include <vector>

#include "logicloss/encoder.hpp"
#include "logicloss/formula.hpp"

namespace logicloss::harness {

inline constexpr double kFiniteDiffStep = 1e-5;

struct SuiteResult {
  std::string name;
  std::size_t points = 0;
  double max_rel_err = 0.0;
  double tolerance = 0.0;

  bool passed() const { return points > 0 && max_rel_err <= tolerance; }
};

// Relative error ||a - b|| / max(||a||, ||b||, floor).
double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-12);

// grad_outputs against central differences of cnf_cost at random non-kink states.
SuiteResult check_encoder_gradients(std::size_t points, std::uint64_t seed);
// logic_loss_grad (mu and delta) against central differences.
SuiteResult check_variational_gradients(std::size_t points, std::uint64_t seed);
// 3-3-2 softmax network, two input slots, cross-entropy plus the distributional loss of a
// random constraint, through the trainer's per-sample gradient.
SuiteResult check_model_gradients(std::size_t points, std::uint64_t seed);

std::vector<SuiteResult> run_gradient_suites(std::size_t points = 100, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Robustness examples

struct DemoRun {
  std::string encoder;
  double start = 0.0;
  double start_grad = 0.0;
  double final_v = 0.0;
  double final_cost = 0.0;  // closed-form cost at final_v
  std::size_t steps = 0;
};

// (v^2 <= -1) | (3v >= 2): literal costs v^2 + 1 and max(2 - 3v, 0).
CostMatrix example1_costs(double v);
double example1_cost(double v);

// Gradient descent on v with projected descent on the disjunction weights, from tau = (.5, .5).
DemoRun example1_dual(double v0 = 0.0, std::size_t max_steps = 2000, double eta_v = 0.05,
                      double eta_disj = 0.05, double stop = 1e-6);
// Gradient descent on the min-max cost.
DemoRun example1_fuzzy(double v0 = 0.0, std::size_t max_steps = 2000, double eta_v = 0.05);

// (v == 1) | (v == 2) | (v == 3) compiled to CNF; slot "v", one output.
CnfTemplate example2_cnf();
CostMatrix example2_costs(const CnfTemplate& cnf, double v);
double example2_cost(double v);
double example2_dl2_grad(double v);

// Gradient descent on the product (DL2) encoding.
DemoRun example2_dl2(double v0 = 1.5, std::size_t max_steps = 2000, double eta_v = 0.05);
// Alternates exact minimization of the dual-weighted cost over v with one projected dual
// step (ascent on clause weights, descent on literal weights).
DemoRun example2_dual(double v0 = 1.5, std::size_t max_rounds = 2000, double eta_conj = 0.1,
                      double eta_disj = 0.1, double stop = 1e-6);

std::vector<DemoRun> bench_encoders(const std::string& example);

}  // namespace logicloss::harness
