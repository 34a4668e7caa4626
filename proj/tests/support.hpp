#pragma once

// Test doubles and independent reference computations shared by the suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "autoprompt/dataset.hpp"
#include "autoprompt/oracle.hpp"
#include "autoprompt/rng.hpp"
#include "autoprompt/tokenizer.hpp"

namespace testsupport {

namespace fs = std::filesystem;
using autoprompt::Token;
using autoprompt::TokenSeq;

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("autoprompt_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Bigram Laplace model counted from scratch, independent of NgramOracle.
struct BigramReference {
  std::vector<std::string> vocab;  // predictable symbols
  std::map<std::pair<std::string, std::string>, double> pair_count;
  std::map<std::string, double> history_count;
  bool end_token = false;

  BigramReference(const std::string& corpus, bool with_end) : end_token(with_end) {
    std::istringstream lines(corpus);
    std::string line;
    std::vector<std::string> symbols;
    while (std::getline(lines, line)) {
      std::istringstream words(line);
      std::vector<std::string> seq;
      for (std::string w; words >> w;) seq.push_back(w);
      if (seq.empty()) continue;
      std::string prev = "<s>";
      for (const auto& w : seq) {
        pair_count[{prev, w}] += 1;
        history_count[prev] += 1;
        symbols.push_back(w);
        prev = w;
      }
      if (with_end) {
        pair_count[{prev, "</s>"}] += 1;
        history_count[prev] += 1;
      }
    }
    if (with_end) symbols.push_back("</s>");
    std::sort(symbols.begin(), symbols.end());
    symbols.erase(std::unique(symbols.begin(), symbols.end()), symbols.end());
    vocab = symbols;
  }

  double logprob(const std::string& prev, const std::string& word) const {
    auto pc = pair_count.find({prev, word});
    auto hc = history_count.find(prev);
    const double c = pc == pair_count.end() ? 0.0 : pc->second;
    const double h = hc == history_count.end() ? 0.0 : hc->second;
    return std::log((c + 1.0) / (h + static_cast<double>(vocab.size())));
  }
};

struct Enumerated {
  TokenSeq tokens;
  bool ended = false;
  double score = 0.0;
  double normalized = 0.0;
  std::size_t finish_step = 0;
};

inline double reference_normalized(double score, std::size_t len, double alpha) {
  return score / std::pow((5.0 + static_cast<double>(len)) / 6.0, alpha);
}

// Every sequence a decoder with the given max_len may return: strings of
// fewer than max_len words followed by the end symbol, and strings of exactly
// max_len words. Returns the best by normalized score, then earlier finish,
// then lexicographic order.
inline Enumerated enumerate_best(const BigramReference& ref, const std::string& first_prev,
                                 std::size_t max_len, double alpha) {
  std::vector<std::string> words;
  for (const auto& w : ref.vocab)
    if (w != "</s>") words.push_back(w);
  Enumerated best;
  bool have = false;
  auto consider = [&](Enumerated e) {
    auto better = [](const Enumerated& a, const Enumerated& b) {
      if (a.normalized != b.normalized) return a.normalized > b.normalized;
      if (a.finish_step != b.finish_step) return a.finish_step < b.finish_step;
      return a.tokens < b.tokens;
    };
    if (!have || better(e, best)) {
      best = std::move(e);
      have = true;
    }
  };
  std::function<void(TokenSeq&, double, const std::string&)> walk = [&](TokenSeq& seq, double score,
                                                                         const std::string& prev) {
    if (ref.end_token) {
      const double s = score + ref.logprob(prev, "</s>");
      consider({seq, true, s, reference_normalized(s, seq.size() + 1, alpha), seq.size() + 1});
    }
    if (seq.size() == max_len) return;
    for (const auto& w : words) {
      seq.push_back(w);
      const double s = score + ref.logprob(prev, w);
      if (seq.size() == max_len)
        consider({seq, false, s, reference_normalized(s, seq.size(), alpha), max_len});
      walk(seq, s, w);
      seq.pop_back();
    }
  };
  TokenSeq seq;
  walk(seq, 0.0, first_prev);
  return best;
}

// Random corpus over `vocab_size` words w0..w{n-1}.
inline std::string random_corpus(std::uint64_t seed, std::size_t vocab_size, std::size_t lines,
                                 std::size_t max_words) {
  autoprompt::Rng rng(seed);
  std::string out;
  for (std::size_t l = 0; l < lines; ++l) {
    const std::size_t n = 1 + autoprompt::uniform_below(rng, max_words);
    for (std::size_t i = 0; i < n; ++i) {
      if (i) out += ' ';
      out += "w" + std::to_string(autoprompt::uniform_below(rng, vocab_size));
    }
    out += '\n';
  }
  // Guarantee every word occurs.
  for (std::size_t w = 0; w < vocab_size; ++w) out += "w" + std::to_string(w) + "\n";
  return out;
}

// Oracle with a closed vocabulary whose span log-probability is a function of
// the text preceding the span. Generation samples words uniformly from a
// seed-driven stream and ignores the context.
class ScriptedOracle : public autoprompt::OracleBackend {
 public:
  using LossFn = std::function<double(std::string_view before_span)>;

  ScriptedOracle(TokenSeq vocab, LossFn loss, std::string name = "scripted")
      : vocab_(std::move(vocab)), loss_(std::move(loss)), name_(std::move(name)) {}

  std::string identity() const override { return name_; }
  autoprompt::Capabilities capabilities() const override { return {true, true}; }
  const TokenSeq& vocabulary() const override { return vocab_; }
  TokenSeq tokenize(std::string_view text) const override { return pieces_.tokenize(text); }
  std::string detokenize(std::span<const Token> tokens) const override {
    return pieces_.detokenize(tokens);
  }
  std::vector<double> score_span(std::string_view full_text, autoprompt::TokenSpan span) const override {
    const TokenSeq toks = tokenize(full_text);
    const std::string before = detokenize(std::span(toks).first(span.begin));
    return std::vector<double>(span.size(), -loss_(before));
  }
  autoprompt::TokenLogits next_token_logits(std::string_view) const override {
    autoprompt::TokenLogits t;
    t.tokens = vocab_;
    t.logits.assign(vocab_.size(), -std::log(static_cast<double>(vocab_.size())));
    t.log_probs = true;
    return t;
  }
  TokenSeq generate(std::string_view, const autoprompt::GenerationParams& p) const override {
    autoprompt::Rng rng(p.seed);
    TokenSeq out;
    for (std::size_t i = 0; i < p.max_new_tokens; ++i)
      out.push_back(vocab_[autoprompt::uniform_below(rng, vocab_.size())]);
    return out;
  }

 private:
  TokenSeq vocab_;
  LossFn loss_;
  std::string name_;
  autoprompt::WhitespacePieceTokenizer pieces_;
};

inline TokenSeq word_vocab(std::size_t n) {
  TokenSeq v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(" v" + std::to_string(i));
  return v;
}

// Two-word dataset of distinct inputs, enough to fill a batch.
inline autoprompt::Dataset tiny_dataset(std::size_t n = 8) {
  autoprompt::Dataset ds;
  ds.name = "tiny";
  for (std::size_t i = 0; i < n; ++i)
    ds.examples.push_back({"Input " + std::to_string(i) + " gives", " " + std::to_string(i * 2) + ".", {}});
  return ds;
}

}  // namespace testsupport
