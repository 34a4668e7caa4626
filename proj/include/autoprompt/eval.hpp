#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "autoprompt/dataset.hpp"
#include "autoprompt/decoder.hpp"
#include "autoprompt/oracle.hpp"
#include "autoprompt/search.hpp"

namespace autoprompt {

// 1-indexed rank of the first candidate satisfying `rule`, if any.
std::optional<std::size_t> first_correct_rank(const std::vector<std::string>& ranking,
                                              const KeywordRule& rule);

// Mean reciprocal rank of the first keyword-correct candidate. A dataset
// with no correct candidate contributes 0.
double mrr(const std::vector<std::vector<std::string>>& rankings,
           const std::vector<KeywordRule>& rules);

// Fraction of datasets whose rank-1 candidate satisfies the rule.
double top_prompt_correctness(const std::vector<std::vector<std::string>>& rankings,
                              const std::vector<KeywordRule>& rules);

struct ZeroShotConfig {
  BeamParams beam{4, 16, 0.6};
  std::string pattern = "{prompt}\n\n{input}{output}";
  bool case_sensitive = true;
  std::size_t parallelism = 1;
};

// Trims surrounding whitespace and one trailing period.
std::string normalize_answer(std::string_view text, bool case_sensitive = true);

// Exact-match accuracy of beam-decoded continuations of prompt + input.
double zero_shot_accuracy(const OracleBackend& backend, std::string_view prompt,
                          const Dataset& dataset, const ZeroShotConfig& config = {});

// A backend per dataset, or one backend shared by all of them.
struct BackendBinding {
  std::string name;
  std::vector<const OracleBackend*> per_dataset;

  const OracleBackend& for_dataset(std::size_t i) const;
};

struct SelectionMatrix {
  std::vector<std::vector<double>> accuracy;    // [prompt][task]
  std::vector<std::vector<double>> normalized;  // softmax over prompts, per task
  std::vector<std::size_t> column_argmax;
  bool diagonal_dominant = false;  // every column_argmax[t] == t

  std::string to_csv(const std::vector<std::string>& prompt_labels,
                     const std::vector<std::string>& task_labels) const;
  nlohmann::json to_json() const;
};

// Softmax over rows, separately for every column.
std::vector<std::vector<double>> column_softmax(const std::vector<std::vector<double>>& grid);

SelectionMatrix selection_matrix(const BackendBinding& backends, const std::vector<std::string>& prompts,
                                 const std::vector<Dataset>& datasets, const ZeroShotConfig& config = {});

struct GeneralizationTable {
  std::vector<std::string> methods;
  std::vector<std::string> backends;
  std::vector<std::vector<std::optional<double>>> accuracy;  // [method][backend]

  nlohmann::json to_json() const;
};

inline constexpr const char* kNoPromptMethod = "No prompt";

// Zero-shot accuracy of each method's per-dataset prompt on each backend,
// averaged over datasets. A backend that fails leaves its cells empty.
GeneralizationTable generalization_eval(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& prompts_by_method,
    const std::vector<BackendBinding>& backends, const std::vector<Dataset>& datasets,
    const ZeroShotConfig& config = {}, bool include_no_prompt = false);

struct RunSummary {
  std::string dataset;
  std::vector<RankedCandidate> ranked;
  std::optional<std::size_t> first_correct_rank;
  std::optional<bool> top_prompt_correct;
};

struct EvalReport {
  std::vector<RunSummary> runs;
  std::optional<double> mrr;
  std::optional<double> top_prompt_correctness;
  std::optional<GeneralizationTable> generalization;
  std::optional<SelectionMatrix> matrix;
  std::string search_template;
  std::string eval_template;

  nlohmann::json to_json() const;
};

}  // namespace autoprompt
