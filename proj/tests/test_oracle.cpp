#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "autoprompt/decoder.hpp"
#include "autoprompt/error.hpp"
#include "autoprompt/ngram_oracle.hpp"
#include "autoprompt/oracle.hpp"
#include "autoprompt/planted_oracle.hpp"
#include "support.hpp"

using namespace autoprompt;

namespace {

NgramOracle bigram(const std::string& corpus, bool end = false) {
  return NgramOracle::from_text(corpus, {2, end, "ngram"});
}

double prob_of(const TokenLogits& t, const Token& tok) {
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t.tokens[i] == tok) return std::exp(t.logits[i]);
  return 0.0;
}

}  // namespace

TEST(Ngram, LaplaceBigramByHand) {
  // Corpus "a b a b": c(a)=2 as a history, c(a,b)=2, V=2 -> p(b|a) = 3/4.
  const NgramOracle lm = bigram("a b a b");
  EXPECT_NEAR(lm.logprob(TokenSeq{"a"}, "b"), std::log(0.75), 1e-15);
  EXPECT_NEAR(lm.logprob(TokenSeq{"a"}, "a"), std::log(0.25), 1e-15);
  const auto span = score_output_span(lm, "a b", {1, 2});
  ASSERT_EQ(span.size(), 1u);
  EXPECT_NEAR(span[0], std::log(0.75), 1e-15);
}

TEST(Ngram, NextTokenDistributionForContextA) {
  const NgramOracle lm = bigram("a b a b");
  const TokenLogits t = lm.next_token_logits("a");
  ASSERT_EQ(t.size(), 2u);
  EXPECT_TRUE(t.dense);
  EXPECT_NEAR(prob_of(t, "a") + prob_of(t, "b"), 1.0, 1e-12);
  EXPECT_NEAR(prob_of(t, "b"), 0.75, 1e-12);
}

TEST(Ngram, AgreesWithIndependentCounts) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const bool end = seed % 2 == 1;
    const std::string corpus = testsupport::random_corpus(seed, 3 + seed % 8, 12, 6);
    const testsupport::BigramReference ref(corpus, end);
    const NgramOracle lm = bigram(corpus, end);
    ASSERT_EQ(lm.vocabulary(), ref.vocab);
    std::vector<std::string> histories = ref.vocab;
    histories.push_back("<s>");
    for (const auto& h : histories) {
      if (h == "</s>") continue;
      for (const auto& w : ref.vocab) {
        const TokenSeq hist = h == "<s>" ? TokenSeq{NgramOracle::kBos} : TokenSeq{h};
        EXPECT_NEAR(lm.logprob(hist, w), ref.logprob(h, w), 1e-12) << h << " -> " << w;
      }
    }
  }
}

TEST(Ngram, DistributionsNormalize) {
  Rng rng(11);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const std::size_t order = 1 + seed % 3;
    const std::string corpus = testsupport::random_corpus(seed, 2 + seed % 10, 10, 7);
    const NgramOracle lm = NgramOracle::from_text(corpus, {order, seed % 2 == 0, "ngram"});
    const auto& vocab = lm.vocabulary();
    for (int trial = 0; trial < 10; ++trial) {
      std::string ctx;
      const std::size_t len = uniform_below(rng, 5);
      for (std::size_t i = 0; i < len; ++i) {
        const Token& w = vocab[uniform_below(rng, vocab.size())];
        if (w == NgramOracle::kEos) continue;
        ctx += (ctx.empty() ? "" : " ") + w;
      }
      const TokenLogits t = lm.next_token_logits(ctx);
      double total = 0.0;
      for (double l : t.logits) {
        EXPECT_TRUE(std::isfinite(l));
        EXPECT_LE(l, 0.0);
        total += std::exp(l);
      }
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
  }
}

TEST(Ngram, SpanScoresAreAdditive) {
  const std::string corpus = testsupport::random_corpus(3, 6, 20, 6);
  const NgramOracle lm = NgramOracle::from_text(corpus, {3, false, "ngram"});
  const std::string text = "w1 w2 w3 w1 w4 w0 w5";
  for (std::size_t a = 0; a <= 7; ++a)
    for (std::size_t b = a; b <= 7; ++b)
      for (std::size_t c = b; c <= 7; ++c) {
        auto whole = lm.score_span(text, {a, c});
        auto left = lm.score_span(text, {a, b});
        const auto right = lm.score_span(text, {b, c});
        left.insert(left.end(), right.begin(), right.end());
        EXPECT_EQ(whole, left);
      }
}

TEST(Ngram, TokenizationRoundTrips) {
  const NgramOracle lm = bigram("x y z\nz y x");
  const TokenSeq toks = lm.tokenize("x  y z");
  EXPECT_EQ(lm.tokenize(lm.detokenize(toks)), toks);
}

TEST(Ngram, RejectsOversizedVocabulary) {
  std::string corpus;
  for (int i = 0; i < 65; ++i) corpus += "t" + std::to_string(i) + " ";
  EXPECT_THROW(bigram(corpus), ConfigError);
}

TEST(Ngram, MisalignedSpanIsAnAlignmentError) {
  const NgramOracle lm = bigram("a b a b");
  EXPECT_THROW(score_output_span(lm, "a b", {1, 5}), AlignmentError);
}

TEST(Scoring, EmptySpanGivesNoScoresAndNoLoss) {
  const NgramOracle lm = bigram("a b a b");
  EXPECT_TRUE(score_output_span(lm, "a b", {1, 1}).empty());
  EXPECT_THROW(span_loss({}), EvaluationError);
  const std::vector<double> lps{-1.0, -3.0};
  EXPECT_DOUBLE_EQ(span_loss(lps), 2.0);
}

TEST(Planted, ScoresFollowTheRule) {
  const Dataset ds = generate_math_dataset(MathTask::kAddTwo, 0);
  const PlantedRuleOracle oracle = make_planted_math_oracle(ds);
  const Example& ex = ds.examples[0];
  for (const auto& [prompt, lp] : std::vector<std::pair<std::string, double>>{
           {"Return the sum of the inputs.", -0.1}, {"Return the output.", -3.0}}) {
    const RenderedExample r = render(default_template(), prompt, ex, oracle);
    const auto scores = score_output_span(oracle, r.full_text, r.output_span);
    ASSERT_FALSE(scores.empty());
    for (double s : scores) EXPECT_EQ(s, lp) << prompt;
  }
}

TEST(Planted, MatchingPromptsStrictlyBeatNonMatching) {
  Rng rng(9);
  const auto& distractors = planted_distractor_phrases();
  for (MathTask t : kAllMathTasks) {
    const Dataset ds = generate_math_dataset(t, 0);
    const PlantedRuleOracle oracle = make_planted_math_oracle(ds);
    const std::string pos = *ds.ground_truth_description;
    for (const auto& neg : distractors) {
      ASSERT_FALSE(check_keywords(*ds.keyword_rule, neg));
      for (int k = 0; k < 5; ++k) {
        const Example* ex = &ds.examples[uniform_below(rng, ds.examples.size())];
        const Example* one[] = {ex};
        EXPECT_LT(prompt_loss(oracle, default_template(), pos, one),
                  prompt_loss(oracle, default_template(), neg, one));
      }
    }
  }
}

TEST(Planted, AnchorYieldsPhraseDistribution) {
  PlantedRuleOracle::Options opt;
  opt.rule = {{"sum"}};
  opt.phrases = {{"Sum the numbers", 3.0}, {"Return the output", 1.0}};
  const PlantedRuleOracle oracle(opt);
  const TokenLogits t = oracle.next_token_logits("anything\nPrompt:");
  const double v = static_cast<double>(oracle.vocabulary().size());
  EXPECT_NEAR(prob_of(t, " Sum"), 0.99 * 0.75 + 0.01 / v, 1e-12);
  EXPECT_NEAR(prob_of(t, " Return"), 0.99 * 0.25 + 0.01 / v, 1e-12);
  const TokenLogits after = oracle.next_token_logits("x\nPrompt: Sum the");
  EXPECT_NEAR(prob_of(after, " numbers"), 0.99 + 0.01 / v, 1e-12);
  const TokenLogits done = oracle.next_token_logits("x\nPrompt: Sum the numbers");
  EXPECT_NEAR(prob_of(done, PlantedRuleOracle::kEndToken), 0.99 + 0.01 / v, 1e-12);
}

TEST(Planted, AnswersOnlyUnderAMatchingPrompt) {
  const Dataset ds = generate_math_dataset(MathTask::kDoubleOne, 0);
  const PlantedRuleOracle oracle = make_planted_math_oracle(ds);
  const Example& ex = ds.examples[0];
  BeamParams bp{4, 8, 0.6};
  const auto good = beam_search(oracle, "Double the input.\n\n" + ex.input_text, bp);
  const auto bad = beam_search(oracle, "Look at the numbers.\n\n" + ex.input_text, bp);
  EXPECT_EQ(oracle.detokenize(good.front().tokens), ex.output_text);
  EXPECT_EQ(oracle.detokenize(bad.front().tokens), " unknown");
}

TEST(RepetitionPenalty, DividesPositiveMultipliesNegative) {
  TokenLogits t;
  t.tokens = {"a", "b", "c"};
  t.logits = {2.0, -1.0, 0.0};
  GenerationParams p;
  p.repetition_penalty = 2.0;
  const auto probs = next_token_distribution(t, {"a", "b"}, p);
  // Penalized scores: a = 1, b = -2, c = 0.
  const double z = std::exp(1.0) + std::exp(-2.0) + std::exp(0.0);
  EXPECT_NEAR(probs[0], std::exp(1.0) / z, 1e-12);
  EXPECT_NEAR(probs[1], std::exp(-2.0) / z, 1e-12);
  EXPECT_NEAR(probs[2], 1.0 / z, 1e-12);
}

TEST(RepetitionPenalty, LowersProbabilityOfSeenTokens) {
  Rng rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    TokenLogits t;
    for (int i = 0; i < 5; ++i) {
      t.tokens.push_back("t" + std::to_string(i));
      t.logits.push_back(uniform_unit(rng) * 8.0 - 4.0);
    }
    const Token seen = t.tokens[uniform_below(rng, 5)];
    GenerationParams off, on;
    on.repetition_penalty = 2.0;
    const auto p0 = next_token_distribution(t, {seen}, off);
    const auto p1 = next_token_distribution(t, {seen}, on);
    const std::size_t i = static_cast<std::size_t>(std::stoi(seen.substr(1)));
    if (t.logits[i] != 0.0) {
      EXPECT_LT(p1[i], p0[i]);
    }
  }
}

TEST(RepetitionPenalty, AppliedBeforeTemperature) {
  TokenLogits t;
  t.tokens = {"a", "b"};
  t.logits = {4.0, 1.0};
  GenerationParams p;
  p.repetition_penalty = 2.0;
  p.temperature = 0.5;
  const auto probs = next_token_distribution(t, {"a"}, p);
  // (4 / 2) / 0.5 = 4 and 1 / 0.5 = 2.
  EXPECT_NEAR(probs[0], std::exp(4.0) / (std::exp(4.0) + std::exp(2.0)), 1e-12);
}

TEST(Generation, GreedyMatchesArgmaxDecoding) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const NgramOracle lm = bigram(testsupport::random_corpus(seed, 6, 15, 5));
    GenerationParams p;
    p.greedy = true;
    p.max_new_tokens = 5;
    EXPECT_EQ(lm.generate("w0", p), greedy_decode(lm, "w0", 5));
  }
}

TEST(Generation, FixedSeedIsReproducible) {
  const NgramOracle lm = bigram(testsupport::random_corpus(2, 8, 20, 6));
  GenerationParams p;
  p.max_new_tokens = 8;
  p.repetition_penalty = 2.0;
  bool any_diff = false;
  for (std::uint64_t s = 0; s < 20; ++s) {
    p.seed = s;
    const TokenSeq a = lm.generate("w1", p);
    EXPECT_EQ(a, lm.generate("w1", p));
    p.seed = s + 1000;
    any_diff |= a != lm.generate("w1", p);
  }
  EXPECT_TRUE(any_diff);
}

TEST(Generation, StopsAtEndAndStopTokens) {
  const NgramOracle lm = NgramOracle::from_text("a b c\na b c\na b c", {2, true, "ngram"});
  GenerationParams p;
  p.greedy = true;
  p.max_new_tokens = 10;
  EXPECT_EQ(lm.generate("a", p), (TokenSeq{"b", "c"}));
  p.stop_tokens = {"c"};
  EXPECT_EQ(lm.generate("a", p), (TokenSeq{"b"}));
}

TEST(Generation, ValidatesParameters) {
  GenerationParams p;
  p.temperature = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.max_new_tokens = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.repetition_penalty = 0.5;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(LogSoftmax, KeepsNegativeInfinity) {
  std::vector<double> v{1.0, -std::numeric_limits<double>::infinity(), 1.0};
  log_softmax(v);
  EXPECT_NEAR(v[0], std::log(0.5), 1e-15);
  EXPECT_EQ(v[1], -std::numeric_limits<double>::infinity());
}
