#include <set>

#include <fmt/format.h>

#include "logicloss/errors.hpp"
#include "logicloss/harness/tasks.hpp"

namespace logicloss::harness {

void tag_atoms(CnfTemplate& cnf, const std::string& tag) {
  for (auto& clause : cnf.clauses)
    for (auto& atom : clause) atom.tag = tag;
}

CnfTemplate merge_templates(const std::vector<CnfTemplate>& parts, GroupStrategy grouping) {
  CnfTemplate out;
  std::set<std::string> slots;
  std::size_t conjunct_base = 0;
  for (const auto& part : parts) {
    std::size_t top = 0;
    for (std::size_t i = 0; i < part.clauses.size(); ++i) {
      out.clauses.push_back(part.clauses[i]);
      const std::size_t c = i < part.conjunct_map.size() ? part.conjunct_map[i] : i;
      out.conjunct_map.push_back(conjunct_base + c);
      top = std::max(top, c + 1);
    }
    conjunct_base += top;
    slots.insert(part.slot_names.begin(), part.slot_names.end());
  }
  out.slot_names.assign(slots.begin(), slots.end());
  regroup(out, grouping);
  return out;
}

namespace {

std::string prob_sum(const std::string& slot, std::size_t first, std::size_t count) {
  std::string s;
  for (std::size_t i = 0; i < count; ++i)
    s += fmt::format("{}{}.p[{}]", i == 0 ? "" : " + ", slot, first + i);
  return s;
}

}  // namespace

std::string hwf_source(std::size_t k_symbols, std::size_t num_digits, std::size_t num_ops) {
  if (k_symbols < 2) throw ConfigError("the adjacency rule needs at least two symbols");
  std::string src = "# adjacent symbols: both digits, or exactly one operator\n";
  for (std::size_t i = 1; i < k_symbols; ++i) {
    const std::string a = "x" + std::to_string(i), b = "x" + std::to_string(i + 1);
    src += fmt::format("{}({} + {} == 2 | {} + {} == 1)\n", i == 1 ? "" : "& ",
                       prob_sum(a, 0, num_digits), prob_sum(b, 0, num_digits),
                       prob_sum(a, num_digits, num_ops), prob_sum(b, num_digits, num_ops));
  }
  return src;
}

std::string superclass_source(const std::vector<std::vector<std::size_t>>& superclasses) {
  std::string src = "# each superclass mass is either empty or full\n";
  for (std::size_t s = 0; s < superclasses.size(); ++s) {
    std::string sum;
    for (std::size_t i = 0; i < superclasses[s].size(); ++i)
      sum += fmt::format("{}x.p[{}]", i == 0 ? "" : " + ", superclasses[s][i]);
    src += fmt::format("{}({} <= 0 | {} >= 1)\n", s == 0 ? "" : "& ", sum, sum);
  }
  return src;
}

std::map<std::string, CnfTemplate> fixture_constraints() {
  std::map<std::string, CnfTemplate> out;
  CompileOptions per_conjunct;
  per_conjunct.cnf.grouping = GroupStrategy::kPerConjunct;
  out.emplace("hwf", compile(hwf_source(4), per_conjunct));
  out.emplace("superclass", compile(superclass_source({{0, 1}, {2, 3}})));
  return out;
}

}  // namespace logicloss::harness
