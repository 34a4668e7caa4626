#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "autoprompt/tokenizer.hpp"

namespace autoprompt {

struct Example {
  std::string input_text;
  std::string output_text;
  std::map<std::string, std::string> metadata;

  std::string text() const { return input_text + output_text; }
};

// Case-insensitive substring match against any keyword.
struct KeywordRule {
  std::vector<std::string> keywords;  // lowercase
};

struct Dataset {
  std::string name;
  std::vector<Example> examples;
  std::optional<KeywordRule> keyword_rule;
  std::optional<std::string> ground_truth_description;
  std::map<std::string, std::string> verbalizer;
};

enum class MathTask {
  kAddTwo,
  kSubtractTwo,
  kMultiplyTwo,
  kDivideTwo,
  kMaxTwo,
  kFirstTwo,
  kSquareOne,
  kExpOne,
  kDoubleOne,
  kFibonacciOne,
};

inline constexpr MathTask kAllMathTasks[] = {
    MathTask::kAddTwo,    MathTask::kSubtractTwo, MathTask::kMultiplyTwo,
    MathTask::kDivideTwo, MathTask::kMaxTwo,      MathTask::kFirstTwo,
    MathTask::kSquareOne, MathTask::kExpOne,      MathTask::kDoubleOne,
    MathTask::kFibonacciOne,
};

std::string_view task_name(MathTask task);
// Throws DatasetError listing the valid names.
MathTask parse_task(std::string_view name);
bool is_two_input(MathTask task);
std::size_t sample_count(MathTask task);

// Formats one example. `b` is ignored for one-input tasks. Callers own the
// operand ranges; divide_two requires b != 0.
Example format_math_example(MathTask task, std::int64_t a, std::int64_t b = 0);

// 100 samples with operands in [0, 9] for two-input tasks (second operand of
// divide_two in [1, 9]); 10 samples with x in [1, 10] for one-input tasks.
Dataset generate_math_dataset(MathTask task, std::uint64_t seed);

// One JSON object per line with "input" and "output" (or "label" when a
// verbalizer maps it). Mapped labels become " <answer>".
Dataset load_jsonl_dataset(const std::filesystem::path& path,
                           const std::map<std::string, std::string>& verbalizer = {});

void write_jsonl_dataset(const Dataset& dataset, const std::filesystem::path& path);

bool check_keywords(const KeywordRule& rule, std::string_view candidate);

// Task name -> rule. The built-in table is compiled from data/keyword_rules.json.
std::map<std::string, KeywordRule> default_keyword_rules();
std::map<std::string, KeywordRule> load_keyword_rules(const std::filesystem::path& path);

struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool empty() const { return begin == end; }
  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

// Pattern with {input} and {output} exactly once and {prompt} at most once.
class RenderTemplate {
 public:
  static constexpr std::size_t kDefaultMaxExampleTokens = 128;

  explicit RenderTemplate(std::string pattern,
                          std::size_t max_example_tokens = kDefaultMaxExampleTokens);

  const std::string& pattern() const { return pattern_; }
  std::size_t max_example_tokens() const { return max_example_tokens_; }
  bool has_prompt() const { return has_prompt_; }

  // Pattern text with placeholders substituted, split around {output}.
  std::string prefix(std::string_view prompt, std::string_view input) const;
  std::string suffix(std::string_view prompt, std::string_view input) const;

 private:
  std::string pattern_;
  std::size_t max_example_tokens_;
  bool has_prompt_ = false;
};

// "{prompt}\n\n{input}{output}"
RenderTemplate default_template();
// Word-category fill-in template used for semantic-category explanations.
RenderTemplate category_template();

struct RenderedExample {
  std::string full_text;
  TokenSpan output_span;  // indexes tokenizer.tokenize(full_text)
  bool truncated = false;
};

// Substitutes the placeholders after cutting input_text from the right so
// that input plus output fit in max_example_tokens. Throws AlignmentError if
// the output span cannot be located in the rendered tokenization.
RenderedExample render(const RenderTemplate& tmpl, std::string_view prompt,
                       const Example& example, const Tokenizer& tokenizer);

}  // namespace autoprompt
