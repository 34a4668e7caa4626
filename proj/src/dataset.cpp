#include "autoprompt/dataset.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <nlohmann/json.hpp>

#include "autoprompt/embedded_data.hpp"
#include "autoprompt/error.hpp"
#include "autoprompt/rng.hpp"

namespace autoprompt {

using nlohmann::json;

namespace {

constexpr std::string_view kTaskNames[] = {
    "add_two",    "subtract_two", "multiply_two", "divide_two", "max_two",
    "first_two",  "square_one",   "exp_one",      "double_one", "fibonacci_one",
};

std::int64_t fibonacci(std::int64_t n) {
  std::int64_t prev = 0, cur = 1;  // f(1) = 1, f(2) = 1
  for (std::int64_t i = 1; i < n; ++i) {
    const std::int64_t next = prev + cur;
    prev = cur;
    cur = next;
  }
  return n <= 0 ? 0 : cur;
}

std::string format_quotient(std::int64_t a, std::int64_t b) {
  if (a % b == 0) return std::to_string(a / b);
  const std::int64_t g = std::gcd(a, b);
  std::int64_t num = a / g, den = b / g;
  if (den < 0) {
    num = -num;
    den = -den;
  }
  return fmt::format("{}/{}", num, den);
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::map<std::string, KeywordRule> parse_keyword_rules(const json& doc) {
  if (!doc.is_object()) throw DatasetError("keyword rules: expected a JSON object");
  std::map<std::string, KeywordRule> rules;
  for (const auto& [task, words] : doc.items()) {
    KeywordRule rule;
    for (const auto& w : words) rule.keywords.push_back(lowercase(w.get<std::string>()));
    if (rule.keywords.empty())
      throw DatasetError(fmt::format("keyword rules: empty list for '{}'", task));
    rules.emplace(task, std::move(rule));
  }
  return rules;
}

std::string_view ground_truth(MathTask task) {
  static const json descriptions = json::parse(embedded::kMathTasksJson);
  return descriptions.at(std::string(task_name(task))).get_ref<const std::string&>();
}

bool starts_with(std::span<const Token> seq, std::span<const Token> prefix) {
  return prefix.size() <= seq.size() && std::equal(prefix.begin(), prefix.end(), seq.begin());
}

}  // namespace

std::string_view task_name(MathTask task) { return kTaskNames[static_cast<int>(task)]; }

MathTask parse_task(std::string_view name) {
  for (std::size_t i = 0; i < std::size(kTaskNames); ++i)
    if (kTaskNames[i] == name) return static_cast<MathTask>(i);
  throw DatasetError(fmt::format("unknown task '{}'; valid tasks: {}", name,
                                 fmt::join(kTaskNames, ", ")));
}

bool is_two_input(MathTask task) {
  switch (task) {
    case MathTask::kSquareOne:
    case MathTask::kExpOne:
    case MathTask::kDoubleOne:
    case MathTask::kFibonacciOne:
      return false;
    default:
      return true;
  }
}

std::size_t sample_count(MathTask task) { return is_two_input(task) ? 100 : 10; }

Example format_math_example(MathTask task, std::int64_t a, std::int64_t b) {
  std::string answer;
  switch (task) {
    case MathTask::kAddTwo: answer = std::to_string(a + b); break;
    case MathTask::kSubtractTwo: answer = std::to_string(a - b); break;
    case MathTask::kMultiplyTwo: answer = std::to_string(a * b); break;
    case MathTask::kDivideTwo: answer = format_quotient(a, b); break;
    case MathTask::kMaxTwo: answer = std::to_string(std::max(a, b)); break;
    case MathTask::kFirstTwo: answer = std::to_string(a); break;
    case MathTask::kSquareOne: answer = std::to_string(a * a); break;
    case MathTask::kExpOne: answer = fmt::format("{:.2f}", std::exp(static_cast<double>(a))); break;
    case MathTask::kDoubleOne: answer = std::to_string(2 * a); break;
    case MathTask::kFibonacciOne: answer = std::to_string(fibonacci(a)); break;
  }

  Example ex;
  ex.metadata["task"] = std::string(task_name(task));
  if (is_two_input(task)) {
    ex.input_text = fmt::format("Given the input numbers {} and {}, the answer is", a, b);
    ex.metadata["a"] = std::to_string(a);
    ex.metadata["b"] = std::to_string(b);
  } else {
    ex.input_text = fmt::format("Given the input x is {}, the output f(x) is", a);
    ex.metadata["x"] = std::to_string(a);
  }
  ex.output_text = fmt::format(" {}.\n\n", answer);
  return ex;
}

Dataset generate_math_dataset(MathTask task, std::uint64_t seed) {
  Dataset ds;
  ds.name = std::string(task_name(task));
  ds.keyword_rule = default_keyword_rules().at(ds.name);
  ds.ground_truth_description = std::string(ground_truth(task));

  Rng rng(seed);
  const std::size_t n = sample_count(task);
  ds.examples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (is_two_input(task)) {
      const auto a = static_cast<std::int64_t>(uniform_below(rng, 10));
      const auto b = task == MathTask::kDivideTwo
                         ? static_cast<std::int64_t>(1 + uniform_below(rng, 9))
                         : static_cast<std::int64_t>(uniform_below(rng, 10));
      ds.examples.push_back(format_math_example(task, a, b));
    } else {
      const auto x = static_cast<std::int64_t>(1 + uniform_below(rng, 10));
      ds.examples.push_back(format_math_example(task, x));
    }
  }
  return ds;
}

Dataset load_jsonl_dataset(const std::filesystem::path& path,
                           const std::map<std::string, std::string>& verbalizer) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError(fmt::format("cannot open dataset '{}'", path.string()));

  Dataset ds;
  ds.name = path.stem().string();
  ds.verbalizer = verbalizer;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DatasetError(fmt::format("{}:{}: malformed JSON: {}", path.string(), lineno, e.what()));
    }
    if (!rec.is_object() || !rec.contains("input") || !rec["input"].is_string())
      throw DatasetError(fmt::format("{}:{}: missing string field \"input\"", path.string(), lineno));

    Example ex;
    ex.input_text = rec["input"].get<std::string>();
    std::optional<std::string> label;
    if (rec.contains("label")) {
      const auto& l = rec["label"];
      label = l.is_string() ? l.get<std::string>() : l.dump();
      ex.metadata["label"] = *label;
    }

    if (!verbalizer.empty() && label && verbalizer.count(*label)) {
      ex.output_text = " " + verbalizer.at(*label);
    } else if (rec.contains("output") && rec["output"].is_string()) {
      ex.output_text = rec["output"].get<std::string>();
      if (!verbalizer.empty()) {
        std::string key = ex.output_text;
        key.erase(0, key.find_first_not_of(' '));
        if (auto it = verbalizer.find(key); it != verbalizer.end()) ex.output_text = " " + it->second;
      }
    } else {
      throw DatasetError(fmt::format("{}:{}: missing string field \"output\"", path.string(), lineno));
    }
    if (ex.output_text.empty())
      throw DatasetError(fmt::format("{}:{}: empty output", path.string(), lineno));
    ds.examples.push_back(std::move(ex));
  }
  if (ds.examples.empty()) throw DatasetError("empty dataset");
  return ds;
}

void write_jsonl_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError(fmt::format("cannot write '{}'", path.string()));
  for (const auto& ex : dataset.examples) {
    json rec = {{"input", ex.input_text}, {"output", ex.output_text}};
    if (auto it = ex.metadata.find("label"); it != ex.metadata.end()) rec["label"] = it->second;
    out << rec.dump() << '\n';
  }
  if (!out) throw DatasetError(fmt::format("write failed for '{}'", path.string()));
}

bool check_keywords(const KeywordRule& rule, std::string_view candidate) {
  const std::string lower = lowercase(candidate);
  return std::any_of(rule.keywords.begin(), rule.keywords.end(),
                     [&](const std::string& k) { return lower.find(k) != std::string::npos; });
}

std::map<std::string, KeywordRule> default_keyword_rules() {
  static const auto rules = parse_keyword_rules(json::parse(embedded::kKeywordRulesJson));
  return rules;
}

std::map<std::string, KeywordRule> load_keyword_rules(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError(fmt::format("cannot open keyword rules '{}'", path.string()));
  try {
    return parse_keyword_rules(json::parse(in));
  } catch (const json::exception& e) {
    throw DatasetError(fmt::format("keyword rules '{}': {}", path.string(), e.what()));
  }
}

// --- templates -------------------------------------------------------------

namespace {

std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

// Substitutes {prompt} and {input} in a pattern fragment by scanning the
// fragment, so placeholder-like text inside the values is left alone.
std::string substitute(std::string_view fragment, std::string_view prompt, std::string_view input) {
  std::string out;
  std::size_t i = 0;
  while (i < fragment.size()) {
    if (fragment.substr(i, 8) == "{prompt}") {
      out += prompt;
      i += 8;
    } else if (fragment.substr(i, 7) == "{input}") {
      out += input;
      i += 7;
    } else {
      out += fragment[i++];
    }
  }
  return out;
}

}  // namespace

RenderTemplate::RenderTemplate(std::string pattern, std::size_t max_example_tokens)
    : pattern_(std::move(pattern)), max_example_tokens_(max_example_tokens) {
  if (count_occurrences(pattern_, "{input}") != 1)
    throw ConfigError("template must contain {input} exactly once");
  if (count_occurrences(pattern_, "{output}") != 1)
    throw ConfigError("template must contain {output} exactly once");
  const auto prompts = count_occurrences(pattern_, "{prompt}");
  if (prompts > 1) throw ConfigError("template may contain {prompt} at most once");
  if (max_example_tokens_ == 0) throw ConfigError("max_example_tokens must be positive");
  has_prompt_ = prompts == 1;
}

std::string RenderTemplate::prefix(std::string_view prompt, std::string_view input) const {
  return substitute(std::string_view(pattern_).substr(0, pattern_.find("{output}")), prompt, input);
}

std::string RenderTemplate::suffix(std::string_view prompt, std::string_view input) const {
  return substitute(std::string_view(pattern_).substr(pattern_.find("{output}") + 8), prompt, input);
}

RenderTemplate default_template() { return RenderTemplate("{prompt}\n\n{input}{output}"); }

RenderTemplate category_template() {
  return RenderTemplate(
      "The following list of words all belong to the same semantic category: "
      "{prompt}\n\n{input}{output}");
}

RenderedExample render(const RenderTemplate& tmpl, std::string_view prompt,
                       const Example& example, const Tokenizer& tokenizer) {
  RenderedExample out;

  std::string input = example.input_text;
  const TokenSeq in_tokens = tokenizer.tokenize(input);
  const TokenSeq out_tokens = tokenizer.tokenize(example.output_text);
  const std::size_t budget = tmpl.max_example_tokens();
  if (in_tokens.size() + out_tokens.size() > budget) {
    if (out_tokens.size() >= budget)
      throw AlignmentError(fmt::format("example too long: output alone has {} tokens (limit {})",
                                       out_tokens.size(), budget));
    const std::size_t keep = budget - out_tokens.size();
    input = tokenizer.detokenize(std::span(in_tokens).first(keep));
    out.truncated = true;
  }

  const std::string head = tmpl.prefix(prompt, input);
  const std::string head_out = head + example.output_text;
  out.full_text = head_out + tmpl.suffix(prompt, input);

  const TokenSeq head_tokens = tokenizer.tokenize(head);
  const TokenSeq head_out_tokens = tokenizer.tokenize(head_out);
  const TokenSeq full_tokens = tokenizer.tokenize(out.full_text);
  if (!starts_with(head_out_tokens, head_tokens) || !starts_with(full_tokens, head_out_tokens) ||
      head_out_tokens.size() == head_tokens.size())
    throw AlignmentError("output span not locatable in rendered text");

  out.output_span = {head_tokens.size(), head_out_tokens.size()};
  return out;
}

}  // namespace autoprompt
