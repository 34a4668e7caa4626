#include <gtest/gtest.h>

#include <cstdio>
#include <numeric>
#include <regex>

#include "autoprompt/dataset.hpp"
#include "autoprompt/error.hpp"
#include "autoprompt/planted_oracle.hpp"
#include "support.hpp"

using namespace autoprompt;
using testsupport::TempDir;

namespace {

struct Exemplar {
  MathTask task;
  std::int64_t a, b;
  const char* text;
};

const Exemplar kExemplars[] = {
    {MathTask::kAddTwo, 9, 7, "Given the input numbers 9 and 7, the answer is 16.\n\n"},
    {MathTask::kSubtractTwo, 5, 4, "Given the input numbers 5 and 4, the answer is 1.\n\n"},
    {MathTask::kMultiplyTwo, 3, 3, "Given the input numbers 3 and 3, the answer is 9.\n\n"},
    {MathTask::kDivideTwo, 2, 7, "Given the input numbers 2 and 7, the answer is 2/7.\n\n"},
    {MathTask::kMaxTwo, 1, 1, "Given the input numbers 1 and 1, the answer is 1.\n\n"},
    {MathTask::kFirstTwo, 7, 8, "Given the input numbers 7 and 8, the answer is 7.\n\n"},
    {MathTask::kSquareOne, 2, 0, "Given the input x is 2, the output f(x) is 4.\n\n"},
    {MathTask::kExpOne, 8, 0, "Given the input x is 8, the output f(x) is 2980.96.\n\n"},
    {MathTask::kDoubleOne, 6, 0, "Given the input x is 6, the output f(x) is 12.\n\n"},
    {MathTask::kFibonacciOne, 8, 0, "Given the input x is 8, the output f(x) is 21.\n\n"},
};

std::int64_t fib_reference(std::int64_t n) {
  std::int64_t a = 1, b = 1;
  for (std::int64_t i = 3; i <= n; ++i) {
    const std::int64_t c = a + b;
    a = b;
    b = c;
  }
  return b;
}

// Recomputes an example's answer from its parsed operands.
std::string expected_answer(MathTask task, std::int64_t a, std::int64_t b) {
  char buf[64];
  switch (task) {
    case MathTask::kAddTwo: return std::to_string(a + b);
    case MathTask::kSubtractTwo: return std::to_string(a - b);
    case MathTask::kMultiplyTwo: return std::to_string(a * b);
    case MathTask::kDivideTwo: {
      const std::int64_t g = std::gcd(a, b);
      if (a % b == 0) return std::to_string(a / b);
      return std::to_string(a / g) + "/" + std::to_string(b / g);
    }
    case MathTask::kMaxTwo: return std::to_string(std::max(a, b));
    case MathTask::kFirstTwo: return std::to_string(a);
    case MathTask::kSquareOne: return std::to_string(a * a);
    case MathTask::kExpOne: std::snprintf(buf, sizeof buf, "%.2f", std::exp(static_cast<double>(a))); return buf;
    case MathTask::kDoubleOne: return std::to_string(2 * a);
    case MathTask::kFibonacciOne: return std::to_string(fib_reference(a));
  }
  return {};
}

}  // namespace

TEST(MathGenerator, ReproducesPublishedExemplarsByteExactly) {
  for (const auto& e : kExemplars) {
    const Example ex = format_math_example(e.task, e.a, e.b);
    EXPECT_EQ(ex.text(), e.text) << task_name(e.task);
    EXPECT_FALSE(ex.output_text.empty());
  }
}

TEST(MathGenerator, SampleCountsMatchTaskArity) {
  for (MathTask t : kAllMathTasks) {
    const std::size_t expected = is_two_input(t) ? 100 : 10;
    EXPECT_EQ(sample_count(t), expected);
    EXPECT_EQ(generate_math_dataset(t, 0).examples.size(), expected) << task_name(t);
  }
}

TEST(MathGenerator, DeterministicPerSeed) {
  for (MathTask t : kAllMathTasks) {
    const Dataset a = generate_math_dataset(t, 42), b = generate_math_dataset(t, 42);
    ASSERT_EQ(a.examples.size(), b.examples.size());
    for (std::size_t i = 0; i < a.examples.size(); ++i) EXPECT_EQ(a.examples[i].text(), b.examples[i].text());
  }
  const Dataset x = generate_math_dataset(MathTask::kAddTwo, 1), y = generate_math_dataset(MathTask::kAddTwo, 2);
  bool differs = false;
  for (std::size_t i = 0; i < x.examples.size(); ++i) differs |= x.examples[i].text() != y.examples[i].text();
  EXPECT_TRUE(differs);
}

TEST(MathGenerator, EveryExampleAgreesWithIndependentArithmetic) {
  const std::regex two(R"(^Given the input numbers (\d+) and (\d+), the answer is$)");
  const std::regex one(R"(^Given the input x is (\d+), the output f\(x\) is$)");
  for (std::uint64_t seed : {0u, 1u, 7u}) {
    for (MathTask t : kAllMathTasks) {
      for (const auto& ex : generate_math_dataset(t, seed).examples) {
        std::smatch m;
        std::int64_t a = 0, b = 0;
        if (is_two_input(t)) {
          ASSERT_TRUE(std::regex_match(ex.input_text, m, two)) << ex.input_text;
          a = std::stoll(m[1]);
          b = std::stoll(m[2]);
          EXPECT_LE(a, 9);
          EXPECT_LE(b, 9);
          if (t == MathTask::kDivideTwo) {
            EXPECT_GE(b, 1);
          }
        } else {
          ASSERT_TRUE(std::regex_match(ex.input_text, m, one)) << ex.input_text;
          a = std::stoll(m[1]);
          EXPECT_GE(a, 1);
          EXPECT_LE(a, 10);
        }
        EXPECT_EQ(ex.output_text, " " + expected_answer(t, a, b) + ".\n\n") << task_name(t);
      }
    }
  }
}

TEST(MathGenerator, FibonacciRecurrence) {
  EXPECT_EQ(format_math_example(MathTask::kFibonacciOne, 1).output_text, " 1.\n\n");
  EXPECT_EQ(format_math_example(MathTask::kFibonacciOne, 2).output_text, " 1.\n\n");
  for (std::int64_t n = 3; n <= 10; ++n) {
    const auto value = [&](std::int64_t k) {
      const std::string s = format_math_example(MathTask::kFibonacciOne, k).output_text;
      return std::stoll(s.substr(1));
    };
    EXPECT_EQ(value(n), value(n - 1) + value(n - 2));
  }
}

TEST(MathGenerator, ExpRoundsToTwoDecimals) {
  EXPECT_EQ(format_math_example(MathTask::kExpOne, 8).output_text, " 2980.96.\n\n");
  EXPECT_EQ(format_math_example(MathTask::kExpOne, 1).output_text, " 2.72.\n\n");
}

TEST(MathGenerator, DivideFormatsIntegersAndReducedFractions) {
  EXPECT_EQ(format_math_example(MathTask::kDivideTwo, 6, 3).output_text, " 2.\n\n");
  EXPECT_EQ(format_math_example(MathTask::kDivideTwo, 4, 6).output_text, " 2/3.\n\n");
  EXPECT_EQ(format_math_example(MathTask::kDivideTwo, 0, 5).output_text, " 0.\n\n");
}

TEST(MathGenerator, RulesAndDescriptionsPopulated) {
  const auto from_file = load_keyword_rules(std::string(AUTOPROMPT_DATA_DIR) + "/keyword_rules.json");
  for (MathTask t : kAllMathTasks) {
    const Dataset ds = generate_math_dataset(t, 0);
    ASSERT_TRUE(ds.keyword_rule.has_value());
    ASSERT_TRUE(ds.ground_truth_description.has_value());
    EXPECT_EQ(ds.keyword_rule->keywords, from_file.at(ds.name).keywords);
    EXPECT_TRUE(check_keywords(*ds.keyword_rule, *ds.ground_truth_description)) << ds.name;
  }
  EXPECT_EQ(from_file.at("add_two").keywords, (std::vector<std::string>{"add", "sum", "+"}));
}

TEST(MathGenerator, InputsNeverSatisfyTheirOwnRule) {
  // The planted oracle keys on the text before the output; inputs must not
  // leak a keyword by themselves.
  for (MathTask t : kAllMathTasks) {
    const Dataset ds = generate_math_dataset(t, 0);
    for (const auto& ex : ds.examples) EXPECT_FALSE(check_keywords(*ds.keyword_rule, ex.input_text)) << ds.name;
  }
}

TEST(MathGenerator, UnknownTaskListsValidNames) {
  try {
    parse_task("mod_two");
    FAIL() << "expected DatasetError";
  } catch (const DatasetError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("mod_two"), std::string::npos);
    for (MathTask t : kAllMathTasks) EXPECT_NE(msg.find(std::string(task_name(t))), std::string::npos);
  }
}

TEST(Keywords, Examples) {
  const KeywordRule add{{"add", "sum", "+"}};
  EXPECT_TRUE(check_keywords(add, "Write a function int add("));
  EXPECT_FALSE(check_keywords(add, "Return the output"));
  EXPECT_TRUE(check_keywords(add, "SUM the numbers"));
}

TEST(Keywords, AppendingNeverBreaksAMatch) {
  const auto rules = default_keyword_rules();
  Rng rng(5);
  const std::string alphabet = "abcdefghijklmnopqrstuvwxyz +-*/^ ";
  for (int trial = 0; trial < 2000; ++trial) {
    std::string s;
    const std::size_t len = uniform_below(rng, 20);
    for (std::size_t i = 0; i < len; ++i) s += alphabet[uniform_below(rng, alphabet.size())];
    for (const auto& [name, rule] : rules) {
      if (!check_keywords(rule, s)) continue;
      std::string t = s;
      for (int k = 0; k < 3; ++k) {
        t += alphabet[uniform_below(rng, alphabet.size())];
        EXPECT_TRUE(check_keywords(rule, t)) << name << " '" << t << "'";
      }
    }
  }
}

TEST(Jsonl, ParsesRecordsInOrder) {
  TempDir dir;
  testsupport::write_file(dir / "d.jsonl", R"({"input":"Input: vase Answer:","output":" no"})" "\n");
  const Dataset ds = load_jsonl_dataset(dir / "d.jsonl");
  ASSERT_EQ(ds.examples.size(), 1u);
  EXPECT_EQ(ds.examples[0].input_text, "Input: vase Answer:");
  EXPECT_EQ(ds.examples[0].output_text, " no");
}

TEST(Jsonl, VerbalizerMapsLabels) {
  TempDir dir;
  testsupport::write_file(dir / "s.jsonl", R"({"input":"Great movie.","label":"positive"})" "\n"
                                           R"({"input":"Awful.","label":"negative"})" "\n");
  const Dataset ds = load_jsonl_dataset(dir / "s.jsonl", {{"positive", "Yes"}, {"negative", "No"}});
  ASSERT_EQ(ds.examples.size(), 2u);
  EXPECT_EQ(ds.examples[0].output_text, " Yes");
  EXPECT_EQ(ds.examples[1].output_text, " No");
}

TEST(Jsonl, MalformedLineNamesLineNumber) {
  TempDir dir;
  testsupport::write_file(dir / "bad.jsonl", R"({"input":"a","output":" b"})" "\n{not json\n");
  try {
    load_jsonl_dataset(dir / "bad.jsonl");
    FAIL();
  } catch (const DatasetError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

TEST(Jsonl, EmptyFileIsAnError) {
  TempDir dir;
  testsupport::write_file(dir / "empty.jsonl", "");
  try {
    load_jsonl_dataset(dir / "empty.jsonl");
    FAIL();
  } catch (const DatasetError& e) {
    EXPECT_STREQ(e.what(), "empty dataset");
  }
}

TEST(Jsonl, WriteThenReadRoundTrips) {
  TempDir dir;
  const Dataset ds = generate_math_dataset(MathTask::kExpOne, 3);
  write_jsonl_dataset(ds, dir / "exp.jsonl");
  const Dataset back = load_jsonl_dataset(dir / "exp.jsonl");
  ASSERT_EQ(back.examples.size(), ds.examples.size());
  for (std::size_t i = 0; i < ds.examples.size(); ++i) EXPECT_EQ(back.examples[i].text(), ds.examples[i].text());
}

TEST(Render, SubstitutesAndMarksOutputSpan) {
  WhitespacePieceTokenizer tok;
  const Example ex{"Given the input numbers 2 and 5, the answer is", " 7.", {}};
  const RenderedExample r = render(default_template(), "Add the inputs", ex, tok);
  EXPECT_EQ(r.full_text, "Add the inputs\n\nGiven the input numbers 2 and 5, the answer is 7.");
  const TokenSeq toks = tok.tokenize(r.full_text);
  EXPECT_EQ(tok.detokenize(std::span(toks).subspan(r.output_span.begin, r.output_span.size())), " 7.");
  EXPECT_FALSE(r.truncated);
}

TEST(Render, EmptyPromptLeavesNoPromptText) {
  WhitespacePieceTokenizer tok;
  const Example ex{"Given the input numbers 2 and 5, the answer is", " 7.", {}};
  const RenderedExample r = render(default_template(), "", ex, tok);
  EXPECT_EQ(r.full_text, "\n\nGiven the input numbers 2 and 5, the answer is 7.");
}

TEST(Render, CategoryTemplatePutsPromptBeforeWords) {
  WhitespacePieceTokenizer tok;
  const Example ex{"apple, banana, cherry,", " fruit", {}};
  const RenderedExample r = render(category_template(), "fruits", ex, tok);
  EXPECT_EQ(r.full_text,
            "The following list of words all belong to the same semantic category: fruits\n\n"
            "apple, banana, cherry, fruit");
}

TEST(Render, SpanRecoversOutputForEveryGeneratedExample) {
  WhitespacePieceTokenizer pieces;
  for (MathTask t : kAllMathTasks) {
    const Dataset ds = generate_math_dataset(t, 0);
    const PlantedRuleOracle oracle = make_planted_math_oracle(ds);
    for (const Tokenizer* tok : {static_cast<const Tokenizer*>(&pieces), static_cast<const Tokenizer*>(&oracle)}) {
      for (const auto& ex : ds.examples) {
        const RenderedExample r = render(default_template(), "Some prompt", ex, *tok);
        const TokenSeq toks = tok->tokenize(r.full_text);
        ASSERT_LE(r.output_span.end, toks.size());
        EXPECT_EQ(tok->detokenize(std::span(toks).subspan(r.output_span.begin, r.output_span.size())),
                  ex.output_text);
      }
    }
  }
}

TEST(Render, TruncatesInputFromTheRight) {
  WhitespacePieceTokenizer tok;
  const RenderTemplate tmpl("{prompt} {input}{output}", 4);
  const Example ex{"one two three four five six", " end.", {}};
  const RenderedExample r = render(tmpl, "P", ex, tok);
  EXPECT_TRUE(r.truncated);
  EXPECT_EQ(r.full_text, "P one two three end.");
  const TokenSeq toks = tok.tokenize(r.full_text);
  EXPECT_EQ(tok.detokenize(std::span(toks).subspan(r.output_span.begin, r.output_span.size())), " end.");
}

TEST(Render, OutputLongerThanBudgetIsAnError) {
  WhitespacePieceTokenizer tok;
  const RenderTemplate tmpl("{input}{output}", 2);
  EXPECT_THROW(render(tmpl, "", Example{"in", " a b c", {}}, tok), AlignmentError);
}

TEST(Render, RejectsMalformedPatterns) {
  EXPECT_THROW(RenderTemplate("{prompt} {input}"), ConfigError);
  EXPECT_THROW(RenderTemplate("{input}{input}{output}"), ConfigError);
  EXPECT_THROW(RenderTemplate("{prompt}{prompt}{input}{output}"), ConfigError);
  EXPECT_NO_THROW(RenderTemplate("{input}{output}"));
}
