#include "logicloss/harness/experiment.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "logicloss/errors.hpp"

namespace logicloss::harness {

using nlohmann::json;

// ---------------------------------------------------------------------------
// JSONL

namespace {

template <typename F>
void for_each_record(std::istream& in, F&& f) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      f(json::parse(line));
    } catch (const json::exception& e) {
      throw InputError(fmt::format("record on line {}: {}", lineno, e.what()));
    }
  }
}

}  // namespace

void write_graphs_jsonl(std::ostream& out, const std::vector<GraphInstance>& graphs) {
  for (const auto& g : graphs) {
    json j{{"n", g.n}, {"source", g.source}, {"adjacency", g.adjacency}, {"labels", g.labels}};
    out << j.dump() << '\n';
  }
}

std::vector<GraphInstance> read_graphs_jsonl(std::istream& in) {
  std::vector<GraphInstance> out;
  for_each_record(in, [&](const json& j) {
    GraphInstance g;
    g.n = j.at("n").get<std::size_t>();
    g.source = j.at("source").get<std::size_t>();
    g.adjacency = j.at("adjacency").get<std::vector<std::vector<int>>>();
    g.labels = j.at("labels").get<std::vector<double>>();
    if (g.adjacency.size() != g.n || g.labels.size() != g.n)
      throw InputError(fmt::format("graph record with n = {} has mismatched arrays", g.n));
    out.push_back(std::move(g));
  });
  return out;
}

void write_shortcut_jsonl(std::ostream& out, const ShortcutTask& task, bool hide_labels) {
  for (std::size_t i = 0; i < task.points.size(); ++i) {
    const auto& p = task.points[i];
    json label = nullptr;
    if (!(hide_labels && p.cls == task.hidden_class)) label = p.cls;
    json j{{"id", i}, {"class", p.cls}, {"label", label}, {"x", p.x}, {"rx", p.rx}};
    out << j.dump() << '\n';
  }
}

ShortcutTask read_shortcut_jsonl(std::istream& in) {
  ShortcutTask task;
  for_each_record(in, [&](const json& j) {
    ShortcutPoint p;
    p.cls = j.at("class").get<std::size_t>();
    p.x = j.at("x").get<std::vector<double>>();
    p.rx = j.at("rx").get<std::vector<double>>();
    task.points.push_back(std::move(p));
  });
  return task;
}

// ---------------------------------------------------------------------------
// Config

ExperimentConfig default_config(const std::string& task) {
  ExperimentConfig c;
  c.task = task;
  if (task == "shortcut") {
    c.model = {{kShortcutInputWidth, 32, 32, kShortcutClasses}, Head::kSoftmax, 0};
    c.train.tol = 0.01;
    c.train.tol_mode = TolMode::kUniform;
    c.data.train_count = 2000;
    c.data.test_count = 800;
  } else if (task == "shortest_path") {
    c.model = {{64, 128, 128, 8}, Head::kReluRegression, 0};
    c.train.tol = 1.0;
    c.train.tol_mode = TolMode::kBand;
    c.data.train_count = 2000;
    c.data.test_count = 500;
  } else {
    throw ConfigError(fmt::format("unknown task '{}' (shortcut or shortest_path)", task));
  }
  return c;
}

namespace {

void reject_unknown(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(fmt::format("{} must be an object", where));
  for (const auto& [key, value] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(fmt::format("unknown key '{}' in {}", key, where));
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  try {
    reject_unknown(j, {"task", "constraint_file", "model", "train", "data", "out_dir"}, "config");
    ExperimentConfig c = default_config(j.at("task").get<std::string>());
    c.base_dir = base_dir;
    read_opt(j, "constraint_file", c.constraint_file);
    read_opt(j, "out_dir", c.out_dir);

    if (j.contains("model")) {
      const json& m = j.at("model");
      reject_unknown(m, {"widths", "head", "seed"}, "model");
      read_opt(m, "widths", c.model.widths);
      if (m.contains("head")) c.model.head = parse_head(m.at("head").get<std::string>());
      read_opt(m, "seed", c.model.seed);
    }
    if (j.contains("train")) {
      const json& t = j.at("train");
      reject_unknown(t, {"eta_w", "eta_conj", "eta_disj", "gamma", "batch_size", "epochs", "tol",
                         "tol_mode", "margin", "dual_mode", "optimizer", "variance_floor", "encoder",
                         "logic_weight", "seed"},
                     "train");
      TrainConfig& tc = c.train;
      read_opt(t, "eta_w", tc.eta_w);
      read_opt(t, "eta_conj", tc.eta_conj);
      read_opt(t, "eta_disj", tc.eta_disj);
      if (t.contains("gamma") && !t.at("gamma").is_null()) tc.schedule_gamma = t.at("gamma").get<double>();
      read_opt(t, "batch_size", tc.batch_size);
      read_opt(t, "epochs", tc.epochs);
      read_opt(t, "tol", tc.tol);
      if (t.contains("tol_mode")) tc.tol_mode = parse_tol_mode(t.at("tol_mode").get<std::string>());
      read_opt(t, "margin", tc.margin_eps);
      if (t.contains("dual_mode")) tc.dual_mode = parse_dual_mode(t.at("dual_mode").get<std::string>());
      if (t.contains("optimizer")) tc.optimizer = parse_update_rule(t.at("optimizer").get<std::string>());
      read_opt(t, "variance_floor", tc.variance_floor);
      if (t.contains("encoder")) tc.encoder = parse_constraint_encoder(t.at("encoder").get<std::string>());
      read_opt(t, "logic_weight", tc.logic_weight);
      read_opt(t, "seed", tc.seed);
    }
    if (j.contains("data")) {
      const json& d = j.at("data");
      reject_unknown(d, {"train_count", "test_count", "seed", "n_vertices", "pairs_per_sample",
                         "extra_edge_prob", "train_file", "test_file"},
                     "data");
      read_opt(d, "train_count", c.data.train_count);
      read_opt(d, "test_count", c.data.test_count);
      read_opt(d, "seed", c.data.seed);
      read_opt(d, "n_vertices", c.data.n_vertices);
      read_opt(d, "pairs_per_sample", c.data.pairs_per_sample);
      read_opt(d, "extra_edge_prob", c.data.extra_edge_prob);
      read_opt(d, "train_file", c.data.train_file);
      read_opt(d, "test_file", c.data.test_file);
    }
    if (c.task == "shortest_path" && !(j.contains("model") && j.at("model").contains("widths"))) {
      const std::size_t n = c.data.n_vertices;
      c.model.widths = {n * n, 128, 128, n};
    }
    c.model.validate();
    c.train.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config: {}", e.what()));
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config '{}': {}", path.string(), e.what()));
  }
  return parse_config(j, path.parent_path());
}

json ExperimentConfig::to_json() const {
  json t{{"eta_w", train.eta_w},
         {"eta_conj", train.eta_conj},
         {"eta_disj", train.eta_disj},
         {"gamma", train.schedule_gamma ? json(*train.schedule_gamma) : json(nullptr)},
         {"batch_size", train.batch_size},
         {"epochs", train.epochs},
         {"tol", train.tol},
         {"tol_mode", to_string(train.tol_mode)},
         {"margin", train.margin_eps},
         {"dual_mode", to_string(train.dual_mode)},
         {"optimizer", to_string(train.optimizer)},
         {"variance_floor", train.variance_floor},
         {"encoder", to_string(train.encoder)},
         {"logic_weight", train.logic_weight},
         {"seed", train.seed}};
  json d{{"train_count", data.train_count}, {"test_count", data.test_count},
         {"seed", data.seed},               {"n_vertices", data.n_vertices},
         {"pairs_per_sample", data.pairs_per_sample}, {"extra_edge_prob", data.extra_edge_prob},
         {"train_file", data.train_file},   {"test_file", data.test_file}};
  return json{{"task", task},
              {"constraint_file", constraint_file},
              {"model", {{"widths", model.widths}, {"head", to_string(model.head)}, {"seed", model.seed}}},
              {"train", t},
              {"data", d},
              {"out_dir", out_dir}};
}

// ---------------------------------------------------------------------------
// Runs

namespace {

std::filesystem::path resolve(const ExperimentConfig& cfg, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !cfg.base_dir.empty()) path = cfg.base_dir / path;
  return path;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open '{}'", path.string()));
  return in;
}

CompileOptions compile_options(const ExperimentConfig& cfg) {
  CompileOptions o;
  o.margin = cfg.train.margin_eps;
  return o;
}

}  // namespace

TaskData build_task_data(const ExperimentConfig& cfg) {
  TaskData out;
  const CompileOptions opts = compile_options(cfg);
  if (cfg.task == "shortcut") {
    CnfTemplate rule;
    if (cfg.constraint_file.empty()) {
      out.constraint_source = kShortcutRule;
      rule = compile(out.constraint_source, opts);
    } else {
      out.constraint_source = read_text(resolve(cfg, cfg.constraint_file));
      rule = compile(out.constraint_source, opts);
    }
    if (rule.clauses.size() == 1 && rule.clauses.front().size() == 2) tag_shortcut_rule(rule);

    auto load = [&](const std::string& file, std::size_t count, std::uint64_t seed) {
      ShortcutTask t;
      if (file.empty()) {
        t = gen_shortcut_task(count, seed, opts);
      } else {
        auto in = open_input(resolve(cfg, file));
        t = read_shortcut_jsonl(in);
      }
      t.rule = rule;
      return t;
    };
    out.train = make_shortcut_dataset(load(cfg.data.train_file, cfg.data.train_count, cfg.data.seed), true);
    out.test = make_shortcut_dataset(load(cfg.data.test_file, cfg.data.test_count, cfg.data.seed + 1), false);
    return out;
  }
  if (cfg.task == "shortest_path") {
    if (!cfg.constraint_file.empty())
      throw ConfigError("shortest_path builds its constraints per sample; drop constraint_file");
    auto load = [&](const std::string& file, std::size_t count, std::uint64_t seed) {
      if (file.empty()) return gen_graphs(cfg.data.n_vertices, count, seed, cfg.data.extra_edge_prob);
      auto in = open_input(resolve(cfg, file));
      return read_graphs_jsonl(in);
    };
    const auto train_graphs = load(cfg.data.train_file, cfg.data.train_count, cfg.data.seed);
    const auto test_graphs = load(cfg.data.test_file, cfg.data.test_count, cfg.data.seed + 1);
    out.train = make_shortest_path_dataset(train_graphs, cfg.data.pairs_per_sample, cfg.data.seed + 2, opts);
    out.test = make_shortest_path_dataset(test_graphs, cfg.data.pairs_per_sample, cfg.data.seed + 3, opts);
    out.constraint_source = fmt::format(
        "# per sample, for sampled pairs (j, k):\n# x.d[k] == s<k>.d[k]\n"
        "# x.d[j] - x.d[k] - s<k>.d[j] <= 0\n# pairs_per_sample = {}\n",
        cfg.data.pairs_per_sample);
    return out;
  }
  throw ConfigError(fmt::format("unknown task '{}'", cfg.task));
}

std::string run_id(const ExperimentConfig& cfg, const std::string& constraint_source) {
  const std::string text = cfg.to_json().dump() + '\n' + constraint_source;
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return fmt::format("{:016x}", h);
}

RunOutcome run_experiment(const ExperimentConfig& cfg, bool write_outputs) {
  const TaskData data = build_task_data(cfg);
  RunOutcome out{train(data.train, data.test, cfg.model, cfg.train), {}};
  if (!write_outputs) return out;

  namespace fs = std::filesystem;
  const fs::path dir = resolve(cfg, cfg.out_dir.empty() ? std::string("runs") : cfg.out_dir);
  fs::create_directories(dir);
  RunArtifacts& a = out.artifacts;
  a.run_id = run_id(cfg, data.constraint_source);
  a.config_snapshot = dir / "config.json";
  a.metrics_csv = dir / "metrics.csv";
  a.checkpoint = dir / "checkpoint.txt";
  a.manifest = dir / "manifest.json";
  a.constraint_copy = dir / "constraint.lc";

  auto open = [](const fs::path& p) {
    std::ofstream f(p);
    if (!f) throw InputError(fmt::format("cannot write '{}'", p.string()));
    return f;
  };
  open(a.config_snapshot) << cfg.to_json().dump(2) << '\n';
  {
    auto f = open(a.metrics_csv);
    write_metrics_csv(f, out.result.tags, out.result.rows);
  }
  {
    auto f = open(a.checkpoint);
    save_checkpoint(out.result.state.model, f);
  }
  open(a.constraint_copy) << data.constraint_source;
  json manifest{{"run_id", a.run_id},
                {"task", cfg.task},
                {"config", a.config_snapshot.filename().string()},
                {"metrics", a.metrics_csv.filename().string()},
                {"checkpoint", a.checkpoint.filename().string()},
                {"constraint", a.constraint_copy.filename().string()},
                {"epochs", cfg.train.epochs},
                {"threads", worker_count()}};
  open(a.manifest) << manifest.dump(2) << '\n';
  return out;
}

MetricsRow evaluate_checkpoint(const ExperimentConfig& cfg, const ModelParameters& model,
                               std::vector<std::string>* tags) {
  const TaskData data = build_task_data(cfg);
  TrainState state;
  state.model = model;
  state.delta = DeltaState::ones(data.test.logic_dims(), cfg.train.variance_floor);
  const std::vector<std::string> t = data.test.literal_tags();
  if (tags != nullptr) *tags = t;
  return evaluate(state, data.test, cfg.train, t);
}

}  // namespace logicloss::harness
