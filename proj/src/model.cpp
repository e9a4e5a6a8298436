#include "logicloss/model.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "logicloss/errors.hpp"

namespace logicloss {

std::string to_string(Head head) { return head == Head::kSoftmax ? "softmax" : "relu_regression"; }

Head parse_head(const std::string& name) {
  if (name == "softmax") return Head::kSoftmax;
  if (name == "relu_regression" || name == "regression") return Head::kReluRegression;
  throw ConfigError(fmt::format("unknown head '{}'", name));
}

std::string to_string(UpdateRule rule) {
  return rule == UpdateRule::kPlainSgd ? "sgd" : "adam";
}

UpdateRule parse_update_rule(const std::string& name) {
  if (name == "sgd") return UpdateRule::kPlainSgd;
  if (name == "adam") return UpdateRule::kAdaptiveMoments;
  throw ConfigError(fmt::format("unknown optimizer '{}'", name));
}

void MlpSpec::validate() const {
  if (widths.size() < 3) throw ConfigError("an MLP needs at least one hidden layer");
  for (std::size_t w : widths)
    if (w == 0) throw ConfigError("layer widths must be positive");
}

void Gradients::set_zero() {
  for (auto& w : weight) w.setZero();
  for (auto& b : bias) b.setZero();
}

void Gradients::add(const Gradients& other) {
  for (std::size_t l = 0; l < weight.size(); ++l) {
    weight[l] += other.weight[l];
    bias[l] += other.bias[l];
  }
}

bool Gradients::all_finite() const {
  for (std::size_t l = 0; l < weight.size(); ++l)
    if (!weight[l].allFinite() || !bias[l].allFinite()) return false;
  return true;
}

double Gradients::squared_norm() const {
  double s = 0.0;
  for (std::size_t l = 0; l < weight.size(); ++l) s += weight[l].squaredNorm() + bias[l].squaredNorm();
  return s;
}

std::size_t ModelParameters::num_parameters() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weight.size(); ++l) n += weight[l].size() + bias[l].size();
  return n;
}

Gradients ModelParameters::zero_gradients() const {
  Gradients g;
  for (std::size_t l = 0; l < weight.size(); ++l) {
    g.weight.push_back(Eigen::MatrixXd::Zero(weight[l].rows(), weight[l].cols()));
    g.bias.push_back(Eigen::VectorXd::Zero(bias[l].size()));
  }
  return g;
}

std::vector<double> ModelParameters::flatten() const {
  std::vector<double> flat;
  flat.reserve(num_parameters());
  for (std::size_t l = 0; l < weight.size(); ++l) {
    flat.insert(flat.end(), weight[l].data(), weight[l].data() + weight[l].size());
    flat.insert(flat.end(), bias[l].data(), bias[l].data() + bias[l].size());
  }
  return flat;
}

void ModelParameters::assign(const std::vector<double>& flat) {
  if (flat.size() != num_parameters())
    throw ShapeMismatch(fmt::format("{} values for {} parameters", flat.size(), num_parameters()));
  std::size_t k = 0;
  for (std::size_t l = 0; l < weight.size(); ++l) {
    for (Eigen::Index i = 0; i < weight[l].size(); ++i) weight[l].data()[i] = flat[k++];
    for (Eigen::Index i = 0; i < bias[l].size(); ++i) bias[l][i] = flat[k++];
  }
  ++version;
}

ModelParameters init(const MlpSpec& spec) {
  spec.validate();
  ModelParameters p;
  p.spec = spec;
  std::mt19937_64 rng(spec.seed);
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    const auto fan_in = static_cast<Eigen::Index>(spec.widths[l]);
    const auto fan_out = static_cast<Eigen::Index>(spec.widths[l + 1]);
    // uniform(-a, a) has variance a^2 / 3 = 2 / fan_in
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-a, a);
    Eigen::MatrixXd w(fan_out, fan_in);
    for (Eigen::Index j = 0; j < fan_in; ++j)
      for (Eigen::Index i = 0; i < fan_out; ++i) w(i, j) = dist(rng);
    p.weight.push_back(std::move(w));
    p.bias.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  p.grad = p.zero_gradients();
  p.first_moment = p.zero_gradients();
  p.second_moment = p.zero_gradients();
  return p;
}

namespace {

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  const double top = z.maxCoeff();
  Eigen::VectorXd e = (z.array() - top).exp();
  return e / e.sum();
}

}  // namespace

ForwardTrace forward(const ModelParameters& p, std::span<const double> x) {
  if (x.size() != p.spec.input_width())
    throw ShapeMismatch(fmt::format("input has width {}, model expects {}", x.size(),
                                    p.spec.input_width()));
  ForwardTrace t;
  t.version = p.version;
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  const std::size_t n = p.num_layers();
  for (std::size_t l = 0; l < n; ++l) {
    t.inputs.push_back(a);
    Eigen::VectorXd z = p.weight[l] * a + p.bias[l];
    t.pre.push_back(z);
    if (l + 1 < n || p.spec.head == Head::kReluRegression) {
      a = z.cwiseMax(0.0);
    } else {
      a = softmax(z);
    }
  }
  t.output = std::move(a);
  return t;
}

void backward(const ModelParameters& p, const ForwardTrace& trace, const Eigen::VectorXd& d_output,
              const Eigen::VectorXd& d_logits, Gradients& acc) {
  if (trace.version != p.version)
    throw StaleTrace("trace was recorded with a different parameter snapshot");
  const std::size_t n = p.num_layers();
  if (trace.pre.size() != n) throw StaleTrace("trace depth does not match the model");
  if (d_output.size() != trace.output.size()) throw ShapeMismatch("output gradient has wrong width");

  Eigen::VectorXd delta;
  if (p.spec.head == Head::kSoftmax) {
    // softmax Jacobian-vector product: y * (g - <g, y>)
    const Eigen::VectorXd& y = trace.output;
    delta = y.cwiseProduct((d_output.array() - d_output.dot(y)).matrix());
  } else {
    delta = d_output.cwiseProduct((trace.pre[n - 1].array() > 0.0).cast<double>().matrix());
  }
  if (d_logits.size() != 0) {
    if (d_logits.size() != delta.size()) throw ShapeMismatch("logit gradient has wrong width");
    delta += d_logits;
  }

  for (std::size_t l = n; l-- > 0;) {
    acc.weight[l].noalias() += delta * trace.inputs[l].transpose();
    acc.bias[l] += delta;
    if (l == 0) break;
    Eigen::VectorXd back = p.weight[l].transpose() * delta;
    delta = back.cwiseProduct((trace.pre[l - 1].array() > 0.0).cast<double>().matrix());
  }
}

void backward(ModelParameters& p, const ForwardTrace& trace, const Eigen::VectorXd& d_output,
              const Eigen::VectorXd& d_logits) {
  backward(p, trace, d_output, d_logits, p.grad);
}

CrossEntropy cross_entropy(const Eigen::VectorXd& pred, std::size_t target) {
  if (target >= static_cast<std::size_t>(pred.size()))
    throw IndexOutOfRange(fmt::format("target class {} for {} outputs", target, pred.size()));
  CrossEntropy ce;
  const double pt = std::clamp(pred[static_cast<Eigen::Index>(target)], kProbabilityClamp,
                               1.0 - kProbabilityClamp);
  ce.loss = -std::log(pt);
  ce.d_logits = pred;
  ce.d_logits[static_cast<Eigen::Index>(target)] -= 1.0;
  return ce;
}

SquaredError squared_error(const Eigen::VectorXd& pred, std::span<const double> target) {
  if (target.size() != static_cast<std::size_t>(pred.size()))
    throw ShapeMismatch(fmt::format("target width {} for {} outputs", target.size(), pred.size()));
  SquaredError se;
  const double n = static_cast<double>(pred.size());
  se.d_output.resize(pred.size());
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double r = pred[i] - target[static_cast<std::size_t>(i)];
    se.loss += r * r / n;
    se.d_output[i] = 2.0 * r / n;
  }
  return se;
}

void apply_update(ModelParameters& p, double step_size, UpdateRule rule,
                  const AdaptiveMomentsConfig& moments) {
  if (!p.grad.all_finite()) throw NonFiniteGradient("non-finite parameter gradient");
  const std::size_t n = p.num_layers();
  if (rule == UpdateRule::kPlainSgd) {
    for (std::size_t l = 0; l < n; ++l) {
      p.weight[l] -= step_size * p.grad.weight[l];
      p.bias[l] -= step_size * p.grad.bias[l];
    }
  } else {
    ++p.update_count;
    const double t = static_cast<double>(p.update_count);
    const double c1 = 1.0 - std::pow(moments.beta1, t);
    const double c2 = 1.0 - std::pow(moments.beta2, t);
    auto step = [&](auto& param, const auto& g, auto& m, auto& v) {
      m = moments.beta1 * m + (1.0 - moments.beta1) * g;
      v = moments.beta2 * v + (1.0 - moments.beta2) * g.cwiseProduct(g);
      param.array() -= step_size * (m.array() / c1) / ((v.array() / c2).sqrt() + moments.epsilon);
    };
    for (std::size_t l = 0; l < n; ++l) {
      step(p.weight[l], p.grad.weight[l], p.first_moment.weight[l], p.second_moment.weight[l]);
      step(p.bias[l], p.grad.bias[l], p.first_moment.bias[l], p.second_moment.bias[l]);
    }
  }
  p.grad.set_zero();
  ++p.version;
}

// Checkpoint layout (whitespace separated, numbers with 17 significant digits):
//   logicloss-checkpoint 1
//   head <name>
//   seed <n>
//   widths <k> w0 ... w(k-1)
//   layer <l> weight <rows> <cols>   row-major values
//   layer <l> bias <n>               values
void save_checkpoint(const ModelParameters& p, std::ostream& out) {
  fmt::print(out, "logicloss-checkpoint 1\n");
  fmt::print(out, "head {}\n", to_string(p.spec.head));
  fmt::print(out, "seed {}\n", p.spec.seed);
  fmt::print(out, "widths {} {}\n", p.spec.widths.size(), fmt::join(p.spec.widths, " "));
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    const auto& w = p.weight[l];
    fmt::print(out, "layer {} weight {} {}\n", l, w.rows(), w.cols());
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) fmt::print(out, j == 0 ? "{:.17g}" : " {:.17g}", w(i, j));
      fmt::print(out, "\n");
    }
    fmt::print(out, "layer {} bias {}\n", l, p.bias[l].size());
    for (Eigen::Index i = 0; i < p.bias[l].size(); ++i)
      fmt::print(out, i == 0 ? "{:.17g}" : " {:.17g}", p.bias[l][i]);
    fmt::print(out, "\n");
  }
}

namespace {

void expect_word(std::istream& in, const std::string& word) {
  std::string got;
  if (!(in >> got) || got != word)
    throw InputError(fmt::format("checkpoint: expected '{}', found '{}'", word, got));
}

template <typename T>
T read_value(std::istream& in, const char* what) {
  T v{};
  if (!(in >> v)) throw InputError(fmt::format("checkpoint: could not read {}", what));
  return v;
}

}  // namespace

ModelParameters load_checkpoint(std::istream& in) {
  expect_word(in, "logicloss-checkpoint");
  if (read_value<int>(in, "version") != 1) throw InputError("checkpoint: unsupported version");
  MlpSpec spec;
  expect_word(in, "head");
  spec.head = parse_head(read_value<std::string>(in, "head"));
  expect_word(in, "seed");
  spec.seed = read_value<std::uint64_t>(in, "seed");
  expect_word(in, "widths");
  const auto k = read_value<std::size_t>(in, "width count");
  for (std::size_t i = 0; i < k; ++i) spec.widths.push_back(read_value<std::size_t>(in, "width"));

  ModelParameters p = init(spec);
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    expect_word(in, "layer");
    read_value<std::size_t>(in, "layer index");
    expect_word(in, "weight");
    const auto rows = read_value<Eigen::Index>(in, "rows");
    const auto cols = read_value<Eigen::Index>(in, "cols");
    if (rows != p.weight[l].rows() || cols != p.weight[l].cols())
      throw InputError("checkpoint: weight shape does not match widths");
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) p.weight[l](i, j) = read_value<double>(in, "weight");
    expect_word(in, "layer");
    read_value<std::size_t>(in, "layer index");
    expect_word(in, "bias");
    if (read_value<Eigen::Index>(in, "bias size") != p.bias[l].size())
      throw InputError("checkpoint: bias size does not match widths");
    for (Eigen::Index i = 0; i < p.bias[l].size(); ++i) p.bias[l][i] = read_value<double>(in, "bias");
  }
  return p;
}

}  // namespace logicloss
