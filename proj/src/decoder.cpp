#include "autoprompt/decoder.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "autoprompt/error.hpp"
#include "autoprompt/parallel.hpp"
#include "autoprompt/rng.hpp"

namespace autoprompt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Partial {
  TokenSeq tokens;
  double score;
};

bool partial_before(const Partial& a, const Partial& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;
}

TokenSeq recombination_key(const TokenSeq& tokens, std::size_t order) {
  const std::size_t take = std::min(order, tokens.size());
  return TokenSeq(tokens.end() - static_cast<std::ptrdiff_t>(take), tokens.end());
}

}  // namespace

void BeamParams::validate() const {
  if (width < 1) throw ConfigError("beam width must be >= 1");
  if (max_len < 1) throw ConfigError("beam max_len must be >= 1");
  if (!(length_penalty_alpha >= 0.0)) throw ConfigError("length penalty alpha must be >= 0");
}

double length_normalized(double score, std::size_t length, double alpha) {
  if (alpha == 0.0) return score;
  return score / std::pow((5.0 + static_cast<double>(length)) / 6.0, alpha);
}

bool ranks_before(const BeamHypothesis& a, const BeamHypothesis& b) {
  if (a.normalized != b.normalized) return a.normalized > b.normalized;
  if (a.finished_step != b.finished_step) return a.finished_step < b.finished_step;
  return a.tokens < b.tokens;
}

std::vector<BeamHypothesis> beam_search(const BeamScorer& scorer, const BeamSpace& space,
                                        const BeamParams& params, const BeamObserver& observer) {
  params.validate();
  std::vector<Partial> beam{{{}, 0.0}};
  std::vector<BeamHypothesis> finished;

  auto finish = [&](TokenSeq tokens, bool ended, double score, std::size_t step) {
    BeamHypothesis h;
    h.tokens = std::move(tokens);
    h.ended = ended;
    h.score = score;
    h.finished_step = step;
    h.normalized = length_normalized(score, h.length(), params.length_penalty_alpha);
    finished.push_back(std::move(h));
  };

  for (std::size_t step = 1; step <= params.max_len && !beam.empty(); ++step) {
    std::vector<TokenSeq> prefixes;
    prefixes.reserve(beam.size());
    for (const auto& p : beam) prefixes.push_back(p.tokens);
    const std::vector<TokenLogits> dists = scorer(prefixes);
    if (dists.size() != beam.size()) throw Error("beam scorer returned the wrong number of rows");

    std::vector<Partial> expanded;
    for (std::size_t i = 0; i < beam.size(); ++i) {
      const TokenLogits& d = dists[i];
      for (std::size_t j = 0; j < d.size(); ++j) {
        if (d.logits[j] == kNegInf || std::isnan(d.logits[j])) continue;
        const double s = beam[i].score + d.logits[j];
        if (space.end_token && d.tokens[j] == *space.end_token) {
          finish(beam[i].tokens, true, s, step);
          continue;
        }
        TokenSeq next = beam[i].tokens;
        next.push_back(d.tokens[j]);
        expanded.push_back({std::move(next), s});
      }
    }

    if (space.markov_order) {
      std::map<TokenSeq, Partial> best;
      for (auto& p : expanded) {
        TokenSeq key = recombination_key(p.tokens, *space.markov_order);
        auto it = best.find(key);
        if (it == best.end())
          best.emplace(std::move(key), std::move(p));
        else if (partial_before(p, it->second))
          it->second = std::move(p);
      }
      expanded.clear();
      for (auto& [key, p] : best) expanded.push_back(std::move(p));
    }

    std::sort(expanded.begin(), expanded.end(), partial_before);
    if (expanded.size() > params.width) expanded.resize(params.width);
    beam = std::move(expanded);

    if (observer) {
      std::vector<BeamHypothesis> view;
      view.reserve(beam.size());
      for (const auto& p : beam) {
        BeamHypothesis h;
        h.tokens = p.tokens;
        h.score = p.score;
        h.finished_step = step;
        h.normalized = length_normalized(p.score, h.length(), params.length_penalty_alpha);
        view.push_back(std::move(h));
      }
      observer(step, view);
    }
  }
  for (auto& p : beam) finish(std::move(p.tokens), false, p.score, params.max_len);

  std::sort(finished.begin(), finished.end(), ranks_before);
  if (finished.size() > params.width) finished.resize(params.width);
  return finished;
}

std::vector<BeamHypothesis> beam_search(const OracleBackend& backend, std::string_view context,
                                        const BeamParams& params, const BeamObserver& observer) {
  const Capabilities caps = backend.capabilities();
  if (caps.full_logits && !backend.vocabulary().empty() && params.width > backend.vocabulary().size())
    throw ConfigError(fmt::format("beam width {} exceeds vocabulary size {}", params.width,
                                  backend.vocabulary().size()));
  const std::string ctx(context);
  BeamScorer scorer = [&](const std::vector<TokenSeq>& prefixes) {
    std::vector<TokenLogits> out;
    out.reserve(prefixes.size());
    for (const auto& p : prefixes) {
      TokenLogits d = backend.next_token_logits(backend.append(ctx, p));
      if (!d.log_probs) log_softmax(d.logits);
      out.push_back(std::move(d));
    }
    return out;
  };
  return beam_search(scorer, BeamSpace{backend.end_token(), backend.markov_order()}, params, observer);
}

TokenSeq greedy_decode(const OracleBackend& backend, std::string_view context, std::size_t max_len) {
  const auto eos = backend.end_token();
  TokenSeq out;
  while (out.size() < max_len) {
    const TokenLogits d = backend.next_token_logits(backend.append(context, out));
    std::size_t best = d.size();
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d.logits[i] == kNegInf) continue;
      if (best == d.size() || d.logits[i] > d.logits[best] ||
          (d.logits[i] == d.logits[best] && d.tokens[i] < d.tokens[best]))
        best = i;
    }
    if (best == d.size()) throw GenerationError("no token with finite score");
    if (eos && d.tokens[best] == *eos) break;
    out.push_back(d.tokens[best]);
  }
  return out;
}

TokenLogits average_logits(std::span<const TokenLogits> per_context) {
  if (per_context.empty()) throw Error("average_logits needs at least one input");
  const double n = static_cast<double>(per_context.size());

  // mean = x0 + sum(xi - x0) / n: equal inputs reproduce x0 exactly.
  auto mean_of = [&](const std::vector<double>& xs) {
    for (double x : xs)
      if (x == kNegInf) return kNegInf;
    double diff = 0.0;
    for (double x : xs) diff += x - xs.front();
    return xs.front() + diff / n;
  };

  TokenLogits out;
  const bool dense = std::all_of(per_context.begin(), per_context.end(),
                                 [](const TokenLogits& t) { return t.dense; });
  if (dense) {
    out.dense = true;
    out.tokens = per_context.front().tokens;
    for (const auto& t : per_context)
      if (t.tokens != out.tokens) throw Error("dense logits over different vocabularies");
    out.logits.resize(out.tokens.size());
    std::vector<double> col(per_context.size());
    for (std::size_t j = 0; j < out.tokens.size(); ++j) {
      for (std::size_t i = 0; i < per_context.size(); ++i) col[i] = per_context[i].logits[j];
      out.logits[j] = mean_of(col);
    }
    return out;
  }

  out.dense = false;
  std::set<Token> all;
  std::vector<std::map<Token, double>> maps(per_context.size());
  for (std::size_t i = 0; i < per_context.size(); ++i)
    for (std::size_t j = 0; j < per_context[i].size(); ++j) {
      all.insert(per_context[i].tokens[j]);
      maps[i][per_context[i].tokens[j]] = per_context[i].logits[j];
    }
  bool covered = false;
  std::vector<double> col(per_context.size());
  for (const auto& tok : all) {
    for (std::size_t i = 0; i < maps.size(); ++i) {
      auto it = maps[i].find(tok);
      col[i] = it == maps[i].end() ? kNegInf : it->second;
    }
    const double m = mean_of(col);
    covered = covered || m != kNegInf;
    out.tokens.push_back(tok);
    out.logits.push_back(m);
  }
  if (!covered) throw CoverageError("sparse logits of the contexts share no token");
  return out;
}

AveragedDecodeResult averaged_suffix_decode(const OracleBackend& backend, const Dataset& dataset,
                                            std::string_view template_text, const BeamParams& params,
                                            const AveragedDecodeOptions& options,
                                            const BeamObserver& observer) {
  if (dataset.examples.empty()) throw DatasetError("averaged decoding needs a non-empty dataset");
  if (template_text.find('{') != std::string_view::npos)
    throw ConfigError("suffix template must not contain placeholders");

  std::vector<const Example*> chosen;
  for (const auto& ex : dataset.examples) chosen.push_back(&ex);
  if (options.subsample > 0 && options.subsample < chosen.size()) {
    Rng rng(options.seed);
    for (std::size_t i = 0; i < options.subsample; ++i)
      std::swap(chosen[i], chosen[i + uniform_below(rng, chosen.size() - i)]);
    chosen.resize(options.subsample);
  }

  AveragedDecodeResult result;
  // Only the context text is needed, so no output span alignment is required.
  for (const Example* ex : chosen)
    result.contexts.push_back(ex->input_text + ex->output_text + std::string(template_text));

  const Capabilities caps = backend.capabilities();
  result.sparse_logits = !caps.full_logits;
  if (caps.full_logits && !backend.vocabulary().empty() && params.width > backend.vocabulary().size())
    throw ConfigError(fmt::format("beam width {} exceeds vocabulary size {}", params.width,
                                  backend.vocabulary().size()));

  const std::size_t n_ctx = result.contexts.size();
  BeamScorer scorer = [&](const std::vector<TokenSeq>& prefixes) {
    std::vector<TokenLogits> raw(prefixes.size() * n_ctx);
    parallel_for(raw.size(), options.parallelism, [&](std::size_t k) {
      const std::size_t h = k / n_ctx, c = k % n_ctx;
      raw[k] = backend.next_token_logits(backend.append(result.contexts[c], prefixes[h]));
    });
    std::vector<TokenLogits> out;
    out.reserve(prefixes.size());
    for (std::size_t h = 0; h < prefixes.size(); ++h) {
      TokenLogits avg = average_logits(std::span(raw).subspan(h * n_ctx, n_ctx));
      log_softmax(avg.logits);
      avg.log_probs = true;
      out.push_back(std::move(avg));
    }
    return out;
  };
  result.beams = beam_search(scorer, BeamSpace{backend.end_token(), backend.markov_order()}, params,
                             observer);
  return result;
}

}  // namespace autoprompt
