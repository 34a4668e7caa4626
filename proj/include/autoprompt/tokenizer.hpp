#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace autoprompt {

// Tokens are carried as their surface strings. Every backend owns its own
// segmentation; callers never assume a particular vocabulary.
using Token = std::string;
using TokenSeq = std::vector<Token>;

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;

  virtual TokenSeq tokenize(std::string_view text) const = 0;
  virtual std::string detokenize(std::span<const Token> tokens) const = 0;

  // Text of `context` followed by `continuation`, such that tokenizing the
  // result yields tokenize(context) ++ continuation for well-formed input.
  virtual std::string append(std::string_view context,
                             std::span<const Token> continuation) const {
    std::string out(context);
    out += detokenize(continuation);
    return out;
  }
};

// Lossless whitespace segmentation: every token is a run of whitespace
// followed by a run of non-whitespace (" the", "\n\nGiven"); trailing
// whitespace becomes a token of its own. detokenize is plain concatenation,
// so detokenize(tokenize(s)) == s for every s.
class WhitespacePieceTokenizer : public Tokenizer {
 public:
  TokenSeq tokenize(std::string_view text) const override;
  std::string detokenize(std::span<const Token> tokens) const override;
};

// Splits on whitespace and joins with a single space. Whitespace itself is
// not represented.
class WhitespaceWordTokenizer : public Tokenizer {
 public:
  TokenSeq tokenize(std::string_view text) const override;
  std::string detokenize(std::span<const Token> tokens) const override;
  std::string append(std::string_view context,
                     std::span<const Token> continuation) const override;
};

}  // namespace autoprompt
