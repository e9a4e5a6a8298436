#include "logicloss/harness/cli.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "CLI11.hpp"
#include "logicloss/encoder.hpp"
#include "logicloss/errors.hpp"
#include "logicloss/harness/diagnostics.hpp"
#include "logicloss/harness/experiment.hpp"

namespace logicloss::harness {

namespace {

// "slot=v1,v2,..." -> (slot, values)
std::pair<std::string, std::vector<double>> parse_state(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError(fmt::format("state '{}' must look like slot=v1,v2,...", spec));
  std::vector<double> values;
  std::stringstream ss(spec.substr(eq + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ConfigError(fmt::format("state '{}': '{}' is not a number", spec, item));
    }
  }
  if (values.empty()) throw ConfigError(fmt::format("state '{}' has no values", spec));
  return {spec.substr(0, eq), values};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void print_row(std::ostream& out, const std::vector<std::string>& tags, const MetricsRow& row) {
  write_metrics_csv(out, tags, {row});
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Train networks under logical constraints with a dual-variable encoding"};
  app.require_subcommand(1);

  // compile
  auto* compile_cmd = app.add_subcommand("compile", "Compile a constraint and optionally cost a state");
  std::string constraint_path;
  std::vector<std::string> states;
  double margin = 0.01, tol = 0.0;
  std::string tol_mode = "uniform";
  bool no_simplify = false;
  compile_cmd->add_option("--constraint", constraint_path, "Constraint file (.lc)")->required();
  compile_cmd->add_option("--state", states, "Slot values, slot=v1,v2,... (repeatable)");
  compile_cmd->add_option("--margin", margin, "Margin for strict inequalities");
  compile_cmd->add_option("--tol", tol, "Satisfaction tolerance");
  compile_cmd->add_option("--tol-mode", tol_mode, "uniform | strict_only | band");
  compile_cmd->add_flag("--no-simplify", no_simplify, "Keep dominated and tautological literals");

  // gen-data
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a generated dataset as JSON lines");
  std::string gen_task, gen_out;
  std::size_t gen_count = 0, gen_vertices = 8;
  std::uint64_t gen_seed = 0;
  bool gen_hide = false;
  gen_cmd->add_option("--task", gen_task, "shortcut | shortest_path")->required();
  gen_cmd->add_option("--count", gen_count, "Number of records")->required();
  gen_cmd->add_option("--seed", gen_seed, "Generator seed");
  gen_cmd->add_option("--n-vertices", gen_vertices, "Graph size (shortest_path)");
  gen_cmd->add_flag("--hide-labels", gen_hide, "Drop hidden-class labels (shortcut)");
  gen_cmd->add_option("--out", gen_out, "Output file")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Run an experiment from a config file");
  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> encoder_override;
  train_cmd->add_option("--config", config_path, "Experiment config (JSON)")->required();
  train_cmd->add_option("--out-dir", out_dir, "Override out_dir");
  train_cmd->add_option("--seed", seed_override, "Override model, shuffle and data seeds");
  train_cmd->add_option("--encoder", encoder_override, "Override train.encoder");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the config's test split");
  std::string checkpoint_path;
  eval_cmd->add_option("--config", config_path, "Experiment config (JSON)")->required();
  eval_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();

  // grad-check
  auto* grad_cmd = app.add_subcommand("grad-check", "Run the finite-difference gradient suites");
  std::size_t grad_points = 100;
  std::uint64_t grad_seed = 0;
  grad_cmd->add_option("--points", grad_points, "Random points per suite");
  grad_cmd->add_option("--seed", grad_seed, "Seed");

  // bench-encoders
  auto* bench_cmd = app.add_subcommand("bench-encoders", "Compare encoders on the small robustness examples");
  std::string example;
  bench_cmd->add_option("--example", example, "appendix-c-1 | appendix-c-2")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitConfig;
  }

  try {
    if (compile_cmd->parsed()) {
      CompileOptions opts;
      opts.margin = margin;
      opts.cnf.simplify = !no_simplify;
      const CnfTemplate cnf = compile(read_file(constraint_path), opts);
      fmt::print(out, "clauses: {}\nliterals: {}\nslots: {}\n", cnf.clauses.size(), cnf.num_atoms(),
                 fmt::join(cnf.slot_names, ","));
      fmt::print(out, "cnf: {}\n", to_string(cnf));
      if (!states.empty()) {
        SlotBindings b;
        for (const auto& s : states) {
          auto [slot, values] = parse_state(s);
          b[slot] = values;
        }
        const Grounding g = ground(cnf, b);
        const CostMatrix m = encode(cnf, g);
        fmt::print(out, "closed_form_cost: {:.17g}\n", closed_form_cost(m).value);
        fmt::print(out, "satisfied: {}\n", eval_bool(cnf, g.values, tol, parse_tol_mode(tol_mode)));
      }
      return kExitOk;
    }
    if (gen_cmd->parsed()) {
      std::ofstream f(gen_out);
      if (!f) throw ConfigError(fmt::format("cannot write '{}'", gen_out));
      if (gen_task == "shortcut") {
        write_shortcut_jsonl(f, gen_shortcut_task(gen_count, gen_seed), gen_hide);
      } else if (gen_task == "shortest_path") {
        write_graphs_jsonl(f, gen_graphs(gen_vertices, gen_count, gen_seed));
      } else {
        throw ConfigError(fmt::format("unknown task '{}'", gen_task));
      }
      fmt::print(out, "wrote {} records to {}\n", gen_count, gen_out);
      return kExitOk;
    }
    if (train_cmd->parsed()) {
      ExperimentConfig cfg = load_config(config_path);
      if (!out_dir.empty()) {
        cfg.out_dir = std::filesystem::absolute(out_dir).string();
      }
      if (seed_override) cfg.model.seed = cfg.train.seed = cfg.data.seed = *seed_override;
      if (encoder_override) cfg.train.encoder = parse_constraint_encoder(*encoder_override);
      const RunOutcome r = run_experiment(cfg, true);
      print_row(out, r.result.tags, r.result.rows.back());
      fmt::print(out, "run_id: {}\nmetrics: {}\ncheckpoint: {}\n", r.artifacts.run_id,
                 r.artifacts.metrics_csv.string(), r.artifacts.checkpoint.string());
      return kExitOk;
    }
    if (eval_cmd->parsed()) {
      const ExperimentConfig cfg = load_config(config_path);
      std::ifstream f(checkpoint_path);
      if (!f) throw ConfigError(fmt::format("cannot open '{}'", checkpoint_path));
      const ModelParameters model = load_checkpoint(f);
      std::vector<std::string> tags;
      const MetricsRow row = evaluate_checkpoint(cfg, model, &tags);
      print_row(out, tags, row);
      return kExitOk;
    }
    if (grad_cmd->parsed()) {
      bool ok = true;
      fmt::print(out, "{:<30} {:>7} {:>12} {:>10}  result\n", "suite", "points", "max_rel_err", "tolerance");
      for (const auto& s : run_gradient_suites(grad_points, grad_seed)) {
        fmt::print(out, "{:<30} {:>7} {:>12.3e} {:>10.1e}  {}\n", s.name, s.points, s.max_rel_err,
                   s.tolerance, s.passed() ? "PASS" : "FAIL");
        ok = ok && s.passed();
      }
      return ok ? kExitOk : kExitNumeric;
    }
    if (bench_cmd->parsed()) {
      fmt::print(out, "{:<8} {:>8} {:>14} {:>14} {:>14} {:>7}\n", "encoder", "v0", "grad_at_v0",
                 "final_v", "final_cost", "steps");
      for (const auto& r : bench_encoders(example))
        fmt::print(out, "{:<8} {:>8.4g} {:>14.6e} {:>14.8g} {:>14.6e} {:>7}\n", r.encoder, r.start,
                   r.start_grad, r.final_v, r.final_cost, r.steps);
      return kExitOk;
    }
  } catch (const InputError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitConfig;
  } catch (const NumericError& e) {
    fmt::print(err, "numeric error: {}\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace logicloss::harness
