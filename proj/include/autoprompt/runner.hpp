#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "autoprompt/dataset.hpp"
#include "autoprompt/decoder.hpp"
#include "autoprompt/error.hpp"
#include "autoprompt/eval.hpp"
#include "autoprompt/oracle.hpp"
#include "autoprompt/search.hpp"

namespace autoprompt {

namespace fs = std::filesystem;

struct DatasetSpec {
  std::optional<std::string> task;  // synthetic math task
  std::optional<fs::path> path;     // or a JSONL file
  std::string name;                 // defaults to the task name or file stem
  std::map<std::string, std::string> verbalizer;
  std::optional<std::vector<std::string>> keywords;
  std::optional<std::string> description;
};

struct BackendSpec {
  std::string kind = "planted";  // planted | ngram | http
  std::string name;              // label in reports; defaults to the kind

  fs::path corpus;  // ngram
  std::size_t order = 2;
  bool end_token = false;

  std::string endpoint;  // http
  std::string model;
  std::string api_key_env;  // names the variable; the key itself is never stored
  int top_logprobs = 5;
  bool echo = true;
  TokenSeq vocabulary;
  std::optional<std::string> end_token_text;

  std::string label() const { return name.empty() ? kind : name; }
};

struct EvalSpec {
  ZeroShotConfig zero_shot;
  std::vector<BackendSpec> backends;  // extra backends for generalization
};

struct RunConfig {
  DatasetSpec dataset;
  BackendSpec backend;
  std::string algorithm = "iprompt";  // iprompt | coord_swap | avg_suffix
  SearchConfig search;
  BeamParams beam;
  std::string template_pattern = "{prompt}\n\n{input}{output}";
  std::size_t max_example_tokens = RenderTemplate::kDefaultMaxExampleTokens;
  std::string suffix_template = "\nTo compute the output from the input,";
  EvalSpec eval;
  std::uint64_t seed = 0;
  std::size_t parallelism = 1;
  fs::path out = "run";

  // Checks algorithm, numeric ranges and that referenced files exist.
  void validate() const;
};

// Unknown fields anywhere in the document raise ConfigError.
RunConfig run_config_from_json(const nlohmann::json& doc);
nlohmann::json run_config_to_json(const RunConfig& config);
RunConfig load_run_config(const fs::path& path);

BackendSpec backend_spec_from_json(const nlohmann::json& doc);
// Accepts a kind name, an inline JSON object, or a path to a JSON file.
BackendSpec parse_backend_arg(const std::string& arg);

Dataset build_dataset(const DatasetSpec& spec, std::uint64_t seed);
std::unique_ptr<OracleBackend> build_backend(const BackendSpec& spec, const Dataset& dataset);

// Run directory file names.
inline constexpr const char* kConfigFile = "config.json";
inline constexpr const char* kJournalFile = "candidates.jsonl";
inline constexpr const char* kResultFile = "result.json";
inline constexpr const char* kTraceFile = "loss_trace.csv";
inline constexpr const char* kCheckpointFile = "checkpoint.json";
inline constexpr const char* kReportFile = "eval_report.json";
inline constexpr const char* kMatrixFile = "matrix.csv";

struct SearchRunOptions {
  std::optional<int> halt_after;  // simulate an interruption after this step
};

struct SearchRunOutcome {
  SearchResult result;
  fs::path run_dir;
  bool complete = false;  // result.json written
};

SearchRunOutcome cmd_search(const RunConfig& config, const SearchRunOptions& options = {});
SearchRunOutcome cmd_resume(const fs::path& run_dir, const SearchRunOptions& options = {});

// Writes the synthetic task (or re-serializes a JSONL source) to `out`.
void cmd_gen_data(const std::string& task_or_path, std::uint64_t seed, const fs::path& out);

struct EvalOptions {
  std::vector<fs::path> run_dirs;
  fs::path out;                       // report directory
  std::vector<BackendSpec> backends;  // in addition to each run's own backend
  bool no_prompt = false;
  bool matrix = false;
  bool mrr = true;
  std::size_t parallelism = 1;
};

EvalReport cmd_eval(const EvalOptions& options);

// Folds a candidates.jsonl journal into the ranking it implies.
std::vector<RankedCandidate> replay_journal(const fs::path& journal, std::size_t min_evals);
nlohmann::json ranking_to_json(const std::vector<RankedCandidate>& ranking);

// Maps an exception to the CLI exit status.
ExitCode exit_code_for(const std::exception& e);

}  // namespace autoprompt
