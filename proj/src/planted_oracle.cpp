#include "autoprompt/planted_oracle.hpp"

#include <fmt/format.h>

#include <cctype>
#include <cmath>
#include <set>

#include "autoprompt/error.hpp"

namespace autoprompt {

namespace {

std::string leading_space(std::string s) {
  if (s.empty() || !std::isspace(static_cast<unsigned char>(s.front()))) s.insert(s.begin(), ' ');
  return s;
}

}  // namespace

PlantedRuleOracle::PlantedRuleOracle(Options options) : options_(std::move(options)) {
  if (options_.rule.keywords.empty()) throw ConfigError("planted oracle needs a keyword rule");
  if (!(options_.match_logprob > options_.miss_logprob) || options_.match_logprob > 0)
    throw ConfigError("planted oracle needs miss_logprob < match_logprob <= 0");
  if (!(options_.smoothing > 0.0 && options_.smoothing < 1.0))
    throw ConfigError("planted oracle smoothing must lie in (0, 1)");

  std::set<Token> symbols{kEndToken};
  for (const auto& [phrase, weight] : options_.phrases) {
    if (!(weight > 0.0)) throw ConfigError(fmt::format("phrase '{}' needs positive weight", phrase));
    TokenSeq toks = pieces_.tokenize(leading_space(phrase));
    symbols.insert(toks.begin(), toks.end());
    phrase_tokens_.emplace_back(std::move(toks), weight);
  }
  for (const auto& ex : options_.answers) {
    TokenSeq toks = pieces_.tokenize(ex.output_text);
    symbols.insert(toks.begin(), toks.end());
    answer_tokens_.emplace(ex.input_text, std::move(toks));
  }
  wrong_tokens_ = pieces_.tokenize(options_.wrong_answer);
  symbols.insert(wrong_tokens_.begin(), wrong_tokens_.end());
  symbols.insert(options_.extra_vocabulary.begin(), options_.extra_vocabulary.end());

  vocab_.assign(symbols.begin(), symbols.end());
  for (std::size_t i = 0; i < vocab_.size(); ++i) index_[vocab_[i]] = i;
}

std::vector<double> PlantedRuleOracle::score_span(std::string_view full_text, TokenSpan span) const {
  const TokenSeq tokens = tokenize(full_text);
  if (span.end > tokens.size())
    throw AlignmentError(fmt::format("span [{}, {}) exceeds {} tokens", span.begin, span.end,
                                     tokens.size()));
  const std::string before = detokenize(std::span(tokens).first(span.begin));
  const double lp = check_keywords(options_.rule, before) ? options_.match_logprob
                                                          : options_.miss_logprob;
  return std::vector<double>(span.size(), lp);
}

TokenLogits PlantedRuleOracle::distribution(
    const std::vector<std::pair<const TokenSeq*, double>>& targets,
    std::span<const Token> written) const {
  std::vector<double> mass(vocab_.size(), 0.0);
  double total = 0.0;
  for (const auto& [seq, weight] : targets) {
    if (written.size() > seq->size() ||
        !std::equal(written.begin(), written.end(), seq->begin()))
      continue;
    const Token& next = written.size() == seq->size() ? Token(kEndToken) : (*seq)[written.size()];
    mass[index_.at(next)] += weight;
    total += weight;
  }

  const double v = static_cast<double>(vocab_.size());
  TokenLogits out;
  out.dense = true;
  out.log_probs = true;
  out.tokens = vocab_;
  out.logits.resize(vocab_.size());
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    const double p = total > 0.0
                         ? (1.0 - options_.smoothing) * mass[i] / total + options_.smoothing / v
                         : 1.0 / v;
    out.logits[i] = std::log(p);
  }
  return out;
}

TokenLogits PlantedRuleOracle::next_token_logits(std::string_view context) const {
  // Latest anchor end and latest known-input end.
  std::size_t anchor_end = 0;
  bool have_anchor = false;
  for (const auto& a : options_.anchors) {
    if (auto pos = context.rfind(a); pos != std::string_view::npos && pos + a.size() >= anchor_end) {
      anchor_end = pos + a.size();
      have_anchor = true;
    }
  }
  const TokenSeq* answer = nullptr;
  std::size_t input_pos = 0, input_end = 0;
  for (const auto& [input, toks] : answer_tokens_) {
    auto pos = context.rfind(input);
    if (pos == std::string_view::npos) continue;
    if (!answer || pos + input.size() > input_end) {
      answer = &toks;
      input_pos = pos;
      input_end = pos + input.size();
    }
  }

  if (answer && (!have_anchor || input_end > anchor_end)) {
    const bool match = check_keywords(options_.rule, context.substr(0, input_pos));
    const TokenSeq written = tokenize(context.substr(input_end));
    return distribution({{match ? answer : &wrong_tokens_, 1.0}}, written);
  }

  const TokenSeq written = have_anchor ? tokenize(context.substr(anchor_end)) : TokenSeq{};
  std::vector<std::pair<const TokenSeq*, double>> targets;
  targets.reserve(phrase_tokens_.size());
  for (const auto& [toks, weight] : phrase_tokens_) targets.emplace_back(&toks, weight);
  return distribution(targets, written);
}

const std::vector<std::string>& planted_distractor_phrases() {
  static const std::vector<std::string> phrases = {
      "Return the output.",
      "Compute the answer.",
      "Print the result.",
      "Look at the numbers.",
      "Write a function that",
      "Find the value.",
  };
  return phrases;
}

PlantedRuleOracle make_planted_math_oracle(const Dataset& dataset) {
  if (!dataset.keyword_rule) throw ConfigError(fmt::format("dataset '{}' has no keyword rule", dataset.name));
  PlantedRuleOracle::Options opt;
  opt.name = fmt::format("planted:{}", dataset.name);
  opt.rule = *dataset.keyword_rule;
  if (dataset.ground_truth_description) {
    std::string desc = *dataset.ground_truth_description;
    // Descriptions longer than a six-token budget lose the keyword when cut;
    // fibonacci_one gets a shorter paraphrase.
    if (dataset.name == "fibonacci_one") desc = "Return the xth fibonacci number.";
    opt.phrases.emplace_back(desc, 1.0);
  }
  for (const auto& p : planted_distractor_phrases()) opt.phrases.emplace_back(p, 1.0);
  opt.answers = dataset.examples;
  return PlantedRuleOracle(std::move(opt));
}

}  // namespace autoprompt
