#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "autoprompt/exact_sum.hpp"
#include "autoprompt/tokenizer.hpp"

namespace autoprompt {

enum class Origin { kFresh, kMutation, kSwap };

std::string_view origin_name(Origin origin);
Origin parse_origin(std::string_view name);

struct PromptCandidate {
  TokenSeq tokens;
  std::string text;  // tokenizer.detokenize(tokens)
  Token first_token;
  Origin origin = Origin::kFresh;
  int created_step = 0;

  static PromptCandidate make(TokenSeq tokens, const Tokenizer& tokenizer, Origin origin, int step);
};

struct LedgerEntry {
  PromptCandidate candidate;
  ExactSum loss_sum;
  std::size_t eval_count = 0;
  int last_step = -1;

  double mean() const { return loss_sum.value() / static_cast<double>(eval_count); }
};

// Rounds to 9 significant digits, the precision every persisted loss uses.
// Losses enter the ledger already rounded so that journals replay exactly.
double quantize_loss(double loss);

// Running-mean loss per distinct candidate text. Candidates with the same
// text share one entry; the first occurrence's metadata is kept.
class ScoreLedger {
 public:
  const LedgerEntry& record(const PromptCandidate& candidate, double loss, int step);

  const LedgerEntry* find(std::string_view text) const;
  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, LedgerEntry, std::less<>>& entries() const { return entries_; }

  // Entries with eval_count >= min_evals, by ascending mean then text.
  std::vector<const LedgerEntry*> ranked(std::size_t min_evals) const;

  nlohmann::json to_json() const;
  static ScoreLedger from_json(const nlohmann::json& doc);

 private:
  std::map<std::string, LedgerEntry, std::less<>> entries_;
};

nlohmann::json candidate_to_json(const PromptCandidate& c);
PromptCandidate candidate_from_json(const nlohmann::json& doc);

}  // namespace autoprompt
