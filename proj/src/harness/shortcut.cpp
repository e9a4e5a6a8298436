#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "logicloss/errors.hpp"
#include "logicloss/harness/tasks.hpp"

namespace logicloss::harness {

std::vector<double> shortcut_centroid(std::size_t cls) {
  // classes sit at angles 90, 0, -90, 180 degrees: class 3 = R(class 1)
  const double angle = std::numbers::pi / 2.0 - static_cast<double>(cls) * std::numbers::pi / 2.0;
  double cx = kShortcutRadius * std::cos(angle), cy = kShortcutRadius * std::sin(angle);
  if (std::abs(cx) < 1e-12) cx = 0.0;
  if (std::abs(cy) < 1e-12) cy = 0.0;
  return {cx, cy, kShortcutOrientation};
}

std::vector<double> reflect(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r[i] = -x[i];
  return r;
}

void tag_shortcut_rule(CnfTemplate& rule) {
  if (rule.clauses.size() != 1 || rule.clauses.front().size() != 2)
    throw InputError("the shortcut rule must compile to one clause of two literals");
  for (auto& atom : rule.clauses.front()) {
    const bool premise = !atom.term.refs.empty() && atom.term.refs.front().slot == "rx";
    atom.tag = premise ? "not_p" : "q";
  }
}

ShortcutTask gen_shortcut_task(std::size_t count, std::uint64_t seed, const CompileOptions& options) {
  if (count < 100) throw ConfigError("the shortcut task needs at least 100 points");
  ShortcutTask task;
  task.rule = compile(kShortcutRule, options);
  tag_shortcut_rule(task.rule);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, kShortcutSpread);
  std::normal_distribution<double> orientation_noise(0.0, kShortcutOrientationSpread);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t cls = i % kShortcutClasses;
    const auto c = shortcut_centroid(cls);
    ShortcutPoint p;
    p.cls = cls;
    p.x = {c[0] + noise(rng), c[1] + noise(rng), c[2] + orientation_noise(rng)};
    p.rx = reflect(p.x);
    task.points.push_back(std::move(p));
  }
  return task;
}

Dataset make_shortcut_dataset(const ShortcutTask& task, bool hide_labels) {
  Dataset ds;
  ds.task_slot = "x";
  ds.constraints.push_back(task.rule);
  for (std::size_t i = 0; i < task.points.size(); ++i) {
    const ShortcutPoint& p = task.points[i];
    Sample s;
    s.id = i;
    s.inputs.emplace("x", p.x);
    s.inputs.emplace("rx", p.rx);
    if (!(hide_labels && p.cls == task.hidden_class)) s.label = p.cls;
    s.focus = p.cls == task.hidden_class;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace logicloss::harness
