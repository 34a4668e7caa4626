#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "autoprompt/dataset.hpp"
#include "autoprompt/decoder.hpp"
#include "autoprompt/ledger.hpp"
#include "autoprompt/oracle.hpp"
#include "autoprompt/rng.hpp"

namespace autoprompt {

enum class SwapInit { kThe, kRandom };

struct SearchConfig {
  std::size_t prompt_length_budget = 6;
  std::size_t population_top_k = 8;
  std::size_t mutations_per_parent = 4;
  std::size_t fresh_per_step = 4;
  std::size_t initial_population = 0;  // 0: one step's worth of candidates
  int max_steps = 5000;
  int patience_steps = 100;
  std::size_t batch_size = 0;          // 0: min(32, |dataset|)
  std::size_t min_evals = 3;
  std::size_t swap_candidates = 32;
  SwapInit swap_init = SwapInit::kThe;
  std::size_t examples_in_context = 1;
  std::string generation_marker = "\nPrompt:";
  std::size_t parallelism = 1;
  int checkpoint_every = 25;
  GenerationParams generation{1.0, 2.0, 16, {}, 0, false};
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t candidates_per_step() const {
    return population_top_k * mutations_per_parent + fresh_per_step;
  }
  std::size_t effective_batch(std::size_t dataset_size) const;
};

nlohmann::json search_config_to_json(const SearchConfig& c);
// Rejects unknown fields.
SearchConfig search_config_from_json(const nlohmann::json& doc);

struct JournalRecord {
  int step = 0;
  std::string text;
  double batch_loss = 0.0;
  double running_mean = 0.0;
  std::size_t eval_count = 0;
  bool accepted = false;
};

struct TraceRow {
  int step = 0;
  double best_running_mean = 0.0;
  double current_batch_loss = 0.0;
};

// One accepted coordinate swap, with both losses measured on the step's batch.
struct SwapEvent {
  int step = 0;
  double incumbent_loss = 0.0;
  double accepted_loss = 0.0;
};

// Stops a run once `patience` steps pass without a strictly better value.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  // Returns true when the run should stop after `step`.
  bool update(int step, double value);

  double best() const { return best_; }
  int last_improvement_step() const { return last_improvement_; }
  void restore(double best, int last_improvement) {
    best_ = best;
    last_improvement_ = last_improvement;
  }

 private:
  int patience_;
  double best_ = std::numeric_limits<double>::infinity();
  int last_improvement_ = 0;
};

// Everything needed to continue a run. Randomness is derived from
// (seed, step), so no generator state is stored beyond the step index.
struct SearchState {
  std::string algorithm;
  std::uint64_t seed = 0;
  int step = 0;  // last completed step
  bool finished = false;
  bool stopped_early = false;
  ScoreLedger ledger;
  std::vector<PromptCandidate> population;  // iprompt parents, or {incumbent}
  std::vector<PromptCandidate> pending;     // generated, not yet evaluated
  double best_loss = std::numeric_limits<double>::infinity();
  int last_improvement_step = 0;
  std::size_t truncated_renders = 0;
  std::string initial_prefix;     // coord_swap starting point
  std::vector<SwapEvent> swaps;   // coord_swap accepted substitutions

  nlohmann::json to_json() const;
  static SearchState from_json(const nlohmann::json& doc);
};

class SearchHooks {
 public:
  virtual ~SearchHooks() = default;
  virtual void on_record(const JournalRecord&) {}
  virtual void on_trace(const TraceRow&) {}
  virtual void on_checkpoint(const SearchState&) {}
  // Simulated interruption: returning true ends the run right after `step`
  // without a final checkpoint.
  virtual bool halt_after(int /*step*/) { return false; }
};

struct RankedCandidate {
  std::string text;
  TokenSeq tokens;
  double mean_loss = 0.0;
  std::size_t eval_count = 0;
};

struct SearchResult {
  std::vector<RankedCandidate> ranking;
  std::vector<TraceRow> trace;
  std::vector<SwapEvent> swaps;
  SearchState state;
  bool halted = false;
  nlohmann::json metadata = nlohmann::json::object();
};

// Final ranking: entries evaluated at least min_evals times, by running
// mean. Falls back to every entry (and sets *fell_back) when none qualify.
std::vector<RankedCandidate> final_ranking(const ScoreLedger& ledger, std::size_t min_evals,
                                           bool* fell_back = nullptr);

// Generation prefix: random example(s) followed by the generation marker.
std::string generation_context(const Dataset& dataset, const SearchConfig& config, Rng& rng);

// Samples `count` candidates, each continuing a random data example
// followed by "\nPrompt:" for up to prompt_length_budget tokens.
std::vector<PromptCandidate> propose_fresh(const OracleBackend& backend, const Dataset& dataset,
                                           std::size_t count, const SearchConfig& config, Rng& rng,
                                           int step = 0);

struct RerankResult {
  std::vector<PromptCandidate> top;        // pairwise-distinct first tokens
  std::vector<PromptCandidate> evaluated;  // candidates after text dedup
  std::vector<double> batch_losses;        // aligned with evaluated
};

// Scores every candidate on one sampled batch, folds the losses into the
// ledger, then picks up to population_top_k entries of the whole ledger by
// running mean with distinct first tokens.
RerankResult rerank_step(const OracleBackend& backend, const Dataset& dataset,
                         const RenderTemplate& tmpl, const std::vector<PromptCandidate>& candidates,
                         ScoreLedger& ledger, const SearchConfig& config, Rng& rng, int step = 0,
                         std::size_t* truncated = nullptr);

// Truncates each parent at a random position in [1, len-1] (length-1
// parents stay whole) and samples mutations_per_parent continuations of the
// kept prefix; then appends fresh_per_step fresh candidates.
std::vector<PromptCandidate> explore_step(const OracleBackend& backend, const Dataset& dataset,
                                          const std::vector<PromptCandidate>& parents,
                                          const SearchConfig& config, Rng& rng, int step = 0);

SearchResult run_iprompt(const OracleBackend& backend, const Dataset& dataset,
                         const RenderTemplate& tmpl, const SearchConfig& config,
                         SearchHooks* hooks = nullptr, const SearchState* resume = nullptr);

// Score-guided coordinate search over a fixed-length token prefix. Each step
// edits one uniformly chosen position, proposing swap_candidates
// replacements drawn uniformly from the vocabulary, and keeps the best only
// when its batch loss is strictly below the incumbent's on the same batch.
SearchResult run_coordinate_swap(const OracleBackend& backend, const Dataset& dataset,
                                 const RenderTemplate& tmpl, const SearchConfig& config,
                                 SearchHooks* hooks = nullptr, const SearchState* resume = nullptr);

// Single-pass averaged-suffix decoding packaged as a search result; each
// returned beam becomes a candidate with loss = -normalized score.
SearchResult run_averaged_suffix(const OracleBackend& backend, const Dataset& dataset,
                                 std::string_view template_text, const BeamParams& beam,
                                 const SearchConfig& config, SearchHooks* hooks = nullptr);

}  // namespace autoprompt
