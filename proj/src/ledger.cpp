#include "autoprompt/ledger.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cstdlib>

#include "autoprompt/error.hpp"

namespace autoprompt {

using nlohmann::json;

std::string_view origin_name(Origin origin) {
  switch (origin) {
    case Origin::kFresh: return "fresh";
    case Origin::kMutation: return "mutation";
    case Origin::kSwap: return "swap";
  }
  return "fresh";
}

Origin parse_origin(std::string_view name) {
  if (name == "fresh") return Origin::kFresh;
  if (name == "mutation") return Origin::kMutation;
  if (name == "swap") return Origin::kSwap;
  throw ConfigError(fmt::format("unknown candidate origin '{}'", name));
}

PromptCandidate PromptCandidate::make(TokenSeq tokens, const Tokenizer& tokenizer, Origin origin,
                                      int step) {
  if (tokens.empty()) throw Error("prompt candidate needs at least one token");
  PromptCandidate c;
  c.text = tokenizer.detokenize(tokens);
  c.first_token = tokens.front();
  c.tokens = std::move(tokens);
  c.origin = origin;
  c.created_step = step;
  return c;
}

double quantize_loss(double loss) {
  return std::strtod(fmt::format("{:.9g}", loss).c_str(), nullptr);
}

const LedgerEntry& ScoreLedger::record(const PromptCandidate& candidate, double loss, int step) {
  auto [it, inserted] = entries_.try_emplace(candidate.text);
  LedgerEntry& e = it->second;
  if (inserted) e.candidate = candidate;
  e.loss_sum.add(loss);
  ++e.eval_count;
  e.last_step = step;
  return e;
}

const LedgerEntry* ScoreLedger::find(std::string_view text) const {
  auto it = entries_.find(text);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<const LedgerEntry*> ScoreLedger::ranked(std::size_t min_evals) const {
  std::vector<std::pair<double, const LedgerEntry*>> rows;
  for (const auto& [text, e] : entries_)
    if (e.eval_count >= min_evals && e.eval_count > 0) rows.emplace_back(e.mean(), &e);
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<const LedgerEntry*> out;
  out.reserve(rows.size());
  for (const auto& [m, e] : rows) out.push_back(e);
  return out;
}

json candidate_to_json(const PromptCandidate& c) {
  return {{"tokens", c.tokens},
          {"text", c.text},
          {"origin", origin_name(c.origin)},
          {"created_step", c.created_step}};
}

PromptCandidate candidate_from_json(const json& doc) {
  PromptCandidate c;
  c.tokens = doc.at("tokens").get<TokenSeq>();
  if (c.tokens.empty()) throw ConfigError("candidate without tokens");
  c.text = doc.at("text").get<std::string>();
  c.first_token = c.tokens.front();
  c.origin = parse_origin(doc.at("origin").get<std::string>());
  c.created_step = doc.at("created_step").get<int>();
  return c;
}

json ScoreLedger::to_json() const {
  json arr = json::array();
  for (const auto& [text, e] : entries_) {
    arr.push_back({{"candidate", candidate_to_json(e.candidate)},
                   {"loss_partials", e.loss_sum.partials()},
                   {"eval_count", e.eval_count},
                   {"last_step", e.last_step}});
  }
  return arr;
}

ScoreLedger ScoreLedger::from_json(const json& doc) {
  ScoreLedger ledger;
  for (const auto& row : doc) {
    LedgerEntry e;
    e.candidate = candidate_from_json(row.at("candidate"));
    const auto partials = row.at("loss_partials").get<std::vector<double>>();
    e.loss_sum = ExactSum::from_partials(partials);
    e.eval_count = row.at("eval_count").get<std::size_t>();
    e.last_step = row.at("last_step").get<int>();
    ledger.entries_.emplace(e.candidate.text, std::move(e));
  }
  return ledger;
}

}  // namespace autoprompt
