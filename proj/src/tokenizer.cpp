#include "autoprompt/tokenizer.hpp"

#include <cctype>

namespace autoprompt {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

TokenSeq WhitespacePieceTokenizer::tokenize(std::string_view text) const {
  TokenSeq out;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = i;
    while (i < text.size() && is_space(text[i])) ++i;
    while (i < text.size() && !is_space(text[i])) ++i;
    out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

std::string WhitespacePieceTokenizer::detokenize(std::span<const Token> tokens) const {
  std::string out;
  for (const auto& t : tokens) out += t;
  return out;
}

TokenSeq WhitespaceWordTokenizer::tokenize(std::string_view text) const {
  TokenSeq out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

std::string WhitespaceWordTokenizer::detokenize(std::span<const Token> tokens) const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::string WhitespaceWordTokenizer::append(std::string_view context,
                                            std::span<const Token> continuation) const {
  std::string out(context);
  if (continuation.empty()) return out;
  if (!out.empty() && !is_space(out.back())) out += ' ';
  out += detokenize(continuation);
  return out;
}

}  // namespace autoprompt
