#pragma once

// Multilayer perceptron with ReLU hidden layers and hand-written reverse-mode gradients.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace logicloss {

enum class Head { kSoftmax, kReluRegression };
enum class UpdateRule { kPlainSgd, kAdaptiveMoments };

std::string to_string(Head head);
Head parse_head(const std::string& name);
std::string to_string(UpdateRule rule);
UpdateRule parse_update_rule(const std::string& name);

struct MlpSpec {
  std::vector<std::size_t> widths;  // input, hidden..., output
  Head head = Head::kSoftmax;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t input_width() const { return widths.front(); }
  std::size_t output_width() const { return widths.back(); }
};

struct Gradients {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;

  void set_zero();
  void add(const Gradients& other);
  bool all_finite() const;
  double squared_norm() const;
};

struct AdaptiveMomentsConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct ModelParameters {
  MlpSpec spec;
  std::vector<Eigen::MatrixXd> weight;  // layer l: widths[l+1] x widths[l]
  std::vector<Eigen::VectorXd> bias;
  Gradients grad;

  // adaptive-moments state
  Gradients first_moment;
  Gradients second_moment;
  std::uint64_t update_count = 0;

  std::uint64_t version = 0;  // bumped on every parameter change

  std::size_t num_layers() const { return weight.size(); }
  std::size_t num_parameters() const;
  Gradients zero_gradients() const;
  // Flat views in layer order: weights (column-major) then bias for each layer.
  std::vector<double> flatten() const;
  void assign(const std::vector<double>& flat);
};

struct ForwardTrace {
  std::vector<Eigen::VectorXd> inputs;  // activation entering layer l
  std::vector<Eigen::VectorXd> pre;     // pre-activation of layer l
  Eigen::VectorXd output;
  std::uint64_t version = 0;
};

ModelParameters init(const MlpSpec& spec);

ForwardTrace forward(const ModelParameters& p, std::span<const double> x);

// Accumulates d loss / d params into `acc`. `d_output` is the gradient with respect to the
// head output (probabilities or non-negative predictions); `d_logits`, when non-empty, is
// added directly at the pre-activation of the last layer.
void backward(const ModelParameters& p, const ForwardTrace& trace, const Eigen::VectorXd& d_output,
              const Eigen::VectorXd& d_logits, Gradients& acc);
void backward(ModelParameters& p, const ForwardTrace& trace, const Eigen::VectorXd& d_output,
              const Eigen::VectorXd& d_logits);

struct CrossEntropy {
  double loss = 0.0;
  Eigen::VectorXd d_logits;  // pred - onehot(target)
};

inline constexpr double kProbabilityClamp = 1e-12;

CrossEntropy cross_entropy(const Eigen::VectorXd& pred, std::size_t target);

struct SquaredError {
  double loss = 0.0;  // mean over outputs
  Eigen::VectorXd d_output;
};

SquaredError squared_error(const Eigen::VectorXd& pred, std::span<const double> target);

// Applies the accumulated gradient and clears it.
void apply_update(ModelParameters& p, double step_size, UpdateRule rule,
                  const AdaptiveMomentsConfig& moments = {});

void save_checkpoint(const ModelParameters& p, std::ostream& out);
ModelParameters load_checkpoint(std::istream& in);

}  // namespace logicloss
