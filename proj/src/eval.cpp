#include "autoprompt/eval.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cmath>

#include "autoprompt/error.hpp"
#include "autoprompt/parallel.hpp"

namespace autoprompt {

using nlohmann::json;

namespace {

void check_rankings(const std::vector<std::vector<std::string>>& rankings,
                    const std::vector<KeywordRule>& rules) {
  if (rankings.size() != rules.size())
    throw EvaluationError(fmt::format("{} rankings but {} keyword rules", rankings.size(), rules.size()));
  if (rankings.empty()) throw EvaluationError("no datasets to evaluate");
  for (std::size_t i = 0; i < rankings.size(); ++i)
    if (rankings[i].empty()) throw EvaluationError(fmt::format("empty ranking for dataset {}", i));
}

json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::optional<std::size_t> first_correct_rank(const std::vector<std::string>& ranking,
                                              const KeywordRule& rule) {
  for (std::size_t i = 0; i < ranking.size(); ++i)
    if (check_keywords(rule, ranking[i])) return i + 1;
  return std::nullopt;
}

double mrr(const std::vector<std::vector<std::string>>& rankings,
           const std::vector<KeywordRule>& rules) {
  check_rankings(rankings, rules);
  double total = 0.0;
  for (std::size_t i = 0; i < rankings.size(); ++i)
    if (auto r = first_correct_rank(rankings[i], rules[i])) total += 1.0 / static_cast<double>(*r);
  return total / static_cast<double>(rankings.size());
}

double top_prompt_correctness(const std::vector<std::vector<std::string>>& rankings,
                              const std::vector<KeywordRule>& rules) {
  check_rankings(rankings, rules);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < rankings.size(); ++i)
    if (check_keywords(rules[i], rankings[i].front())) ++hits;
  return static_cast<double>(hits) / static_cast<double>(rankings.size());
}

std::string normalize_answer(std::string_view text, bool case_sensitive) {
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
  while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
  if (!text.empty() && text.back() == '.') text.remove_suffix(1);
  std::string out(text);
  if (!case_sensitive)
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

double zero_shot_accuracy(const OracleBackend& backend, std::string_view prompt,
                          const Dataset& dataset, const ZeroShotConfig& config) {
  if (dataset.examples.empty()) throw EvaluationError("zero-shot accuracy needs a non-empty dataset");
  const RenderTemplate tmpl(config.pattern);
  const auto p = config.pattern.find("{prompt}");
  if (p != std::string::npos && p > config.pattern.find("{input}"))
    throw ConfigError("zero-shot template must place {prompt} before {input}");

  std::vector<char> hit(dataset.examples.size(), 0);
  parallel_for(dataset.examples.size(), config.parallelism, [&](std::size_t i) {
    const Example& ex = dataset.examples[i];
    try {
      const std::string context = tmpl.prefix(prompt, ex.input_text);
      const auto beams = beam_search(backend, context, config.beam);
      if (beams.empty()) return;
      const std::string got = backend.detokenize(beams.front().tokens);
      hit[i] = normalize_answer(got, config.case_sensitive) ==
               normalize_answer(ex.output_text, config.case_sensitive);
    } catch (const TransportError&) {
      throw;
    } catch (const Error& e) {
      spdlog::warn("zero-shot example {} of {} counted as mismatch: {}", i, dataset.name, e.what());
    }
  });
  const auto matches = std::count(hit.begin(), hit.end(), 1);
  return static_cast<double>(matches) / static_cast<double>(dataset.examples.size());
}

const OracleBackend& BackendBinding::for_dataset(std::size_t i) const {
  if (per_dataset.empty()) throw ConfigError(fmt::format("backend binding '{}' is empty", name));
  const OracleBackend* b = per_dataset.size() == 1 ? per_dataset.front() : per_dataset.at(i);
  if (!b) throw ConfigError(fmt::format("backend binding '{}' has no backend for dataset {}", name, i));
  return *b;
}

std::vector<std::vector<double>> column_softmax(const std::vector<std::vector<double>>& grid) {
  std::vector<std::vector<double>> out = grid;
  if (grid.empty()) return out;
  const std::size_t cols = grid.front().size();
  for (std::size_t t = 0; t < cols; ++t) {
    double max = -std::numeric_limits<double>::infinity();
    for (const auto& row : grid) max = std::max(max, row.at(t));
    double total = 0.0;
    for (std::size_t p = 0; p < grid.size(); ++p) {
      out[p][t] = std::exp(grid[p][t] - max);
      total += out[p][t];
    }
    for (auto& row : out) row[t] /= total;
  }
  return out;
}

SelectionMatrix selection_matrix(const BackendBinding& backends, const std::vector<std::string>& prompts,
                                 const std::vector<Dataset>& datasets, const ZeroShotConfig& config) {
  if (prompts.empty() || datasets.empty()) throw EvaluationError("selection matrix needs prompts and datasets");
  SelectionMatrix m;
  m.accuracy.assign(prompts.size(), std::vector<double>(datasets.size(), 0.0));
  for (std::size_t p = 0; p < prompts.size(); ++p)
    for (std::size_t t = 0; t < datasets.size(); ++t)
      m.accuracy[p][t] = zero_shot_accuracy(backends.for_dataset(t), prompts[p], datasets[t], config);
  m.normalized = column_softmax(m.accuracy);

  m.diagonal_dominant = prompts.size() == datasets.size();
  for (std::size_t t = 0; t < datasets.size(); ++t) {
    std::size_t best = 0;
    for (std::size_t p = 1; p < prompts.size(); ++p)
      if (m.normalized[p][t] > m.normalized[best][t]) best = p;
    m.column_argmax.push_back(best);
    if (best != t) m.diagonal_dominant = false;
  }
  return m;
}

std::string SelectionMatrix::to_csv(const std::vector<std::string>& prompt_labels,
                                    const std::vector<std::string>& task_labels) const {
  auto quote = [](const std::string& s) {
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  };
  std::string out = "prompt";
  for (const auto& t : task_labels) out += "," + quote(t);
  out += '\n';
  for (std::size_t p = 0; p < normalized.size(); ++p) {
    out += quote(p < prompt_labels.size() ? prompt_labels[p] : std::to_string(p));
    for (double v : normalized[p]) out += fmt::format(",{:.9g}", v);
    out += '\n';
  }
  return out;
}

json SelectionMatrix::to_json() const {
  return {{"accuracy", accuracy},
          {"softmax", normalized},
          {"column_argmax", column_argmax},
          {"diagonal_dominant", diagonal_dominant}};
}

GeneralizationTable generalization_eval(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& prompts_by_method,
    const std::vector<BackendBinding>& backends, const std::vector<Dataset>& datasets,
    const ZeroShotConfig& config, bool include_no_prompt) {
  if (datasets.empty()) throw EvaluationError("generalization needs datasets");
  auto rows = prompts_by_method;
  if (include_no_prompt) rows.emplace_back(kNoPromptMethod, std::vector<std::string>(datasets.size()));

  GeneralizationTable table;
  for (const auto& b : backends) table.backends.push_back(b.name);
  for (const auto& [method, prompts] : rows) {
    if (prompts.size() != datasets.size())
      throw EvaluationError(fmt::format("method '{}' has {} prompts for {} datasets", method,
                                        prompts.size(), datasets.size()));
    table.methods.push_back(method);
    std::vector<std::optional<double>> cells;
    for (const auto& b : backends) {
      try {
        double total = 0.0;
        for (std::size_t d = 0; d < datasets.size(); ++d)
          total += zero_shot_accuracy(b.for_dataset(d), prompts[d], datasets[d], config);
        cells.emplace_back(total / static_cast<double>(datasets.size()));
      } catch (const Error& e) {
        spdlog::warn("backend '{}' unavailable for method '{}': {}", b.name, method, e.what());
        cells.emplace_back(std::nullopt);
      }
    }
    table.accuracy.push_back(std::move(cells));
  }
  return table;
}

json GeneralizationTable::to_json() const {
  json rows = json::array();
  for (std::size_t m = 0; m < methods.size(); ++m) {
    json cells = json::object();
    for (std::size_t b = 0; b < backends.size(); ++b) cells[backends[b]] = nullable(accuracy[m][b]);
    rows.push_back({{"method", methods[m]}, {"accuracy", cells}});
  }
  return {{"backends", backends}, {"rows", rows}};
}

json EvalReport::to_json() const {
  json runs_json = json::array();
  for (const auto& r : runs) {
    json ranked = json::array();
    for (const auto& c : r.ranked)
      ranked.push_back({{"text", c.text}, {"mean_loss", c.mean_loss}, {"eval_count", c.eval_count}});
    runs_json.push_back({{"dataset", r.dataset},
                         {"ranked_candidates", ranked},
                         {"first_correct_rank", r.first_correct_rank ? json(*r.first_correct_rank) : json(nullptr)},
                         {"top_prompt_correct", r.top_prompt_correct ? json(*r.top_prompt_correct) : json(nullptr)}});
  }
  json out = {{"runs", runs_json},
              {"mrr", nullable(mrr)},
              {"top_prompt_correctness", nullable(top_prompt_correctness)},
              {"search_template", search_template},
              {"eval_template", eval_template}};
  if (generalization) out["generalization"] = generalization->to_json();
  if (matrix) out["matrix"] = matrix->to_json();
  return out;
}

}  // namespace autoprompt
