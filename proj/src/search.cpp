#include "autoprompt/search.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "autoprompt/error.hpp"
#include "autoprompt/parallel.hpp"

namespace autoprompt {

using nlohmann::json;

namespace {

enum Purpose : std::uint64_t { kInit = 1, kRerank = 2, kExplore = 3, kSwap = 4 };

constexpr double kInf = std::numeric_limits<double>::infinity();

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }
double from_nullable(const json& j) { return j.is_null() ? kInf : j.get<double>(); }

std::vector<const Example*> sample_batch(const Dataset& dataset, std::size_t size, Rng& rng) {
  std::vector<const Example*> all;
  all.reserve(dataset.examples.size());
  for (const auto& ex : dataset.examples) all.push_back(&ex);
  size = std::min(size, all.size());
  for (std::size_t i = 0; i < size; ++i)
    std::swap(all[i], all[i + uniform_below(rng, all.size() - i)]);
  all.resize(size);
  return all;
}

// Quantized batch losses for each prompt, evaluated concurrently.
std::vector<double> batch_losses(const OracleBackend& backend, const RenderTemplate& tmpl,
                                 const std::vector<PromptCandidate>& candidates,
                                 const std::vector<const Example*>& batch, std::size_t parallelism,
                                 std::size_t* truncated) {
  std::vector<double> losses(candidates.size());
  std::vector<std::size_t> cut(candidates.size(), 0);
  parallel_for(candidates.size(), parallelism, [&](std::size_t i) {
    losses[i] = quantize_loss(prompt_loss(backend, tmpl, candidates[i].text, batch, &cut[i]));
  });
  if (truncated) *truncated += std::accumulate(cut.begin(), cut.end(), std::size_t{0});
  return losses;
}

std::vector<PromptCandidate> dedup_by_text(const std::vector<PromptCandidate>& in) {
  std::set<std::string> seen;
  std::vector<PromptCandidate> out;
  for (const auto& c : in)
    if (seen.insert(c.text).second) out.push_back(c);
  return out;
}

void check_dataset(const Dataset& dataset) {
  if (dataset.examples.empty()) throw DatasetError("search needs a non-empty dataset");
}

json base_metadata(const OracleBackend& backend, const SearchConfig& config, const Dataset& dataset,
                   std::string_view algorithm) {
  return {{"algorithm", algorithm},
          {"backend", backend.identity()},
          {"dataset", dataset.name},
          {"seed", config.seed},
          {"batch_size", config.effective_batch(dataset.examples.size())},
          {"min_evals", config.min_evals}};
}

}  // namespace

// --- config ---------------------------------------------------------------

void SearchConfig::validate() const {
  if (prompt_length_budget < 1) throw ConfigError("prompt_length_budget must be >= 1");
  if (population_top_k < 1) throw ConfigError("population_top_k must be >= 1");
  if (mutations_per_parent < 1) throw ConfigError("mutations_per_parent must be >= 1");
  if (fresh_per_step < 1) throw ConfigError("fresh_per_step must be >= 1");
  if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
  if (patience_steps < 1) throw ConfigError("patience_steps must be >= 1");
  if (min_evals < 1) throw ConfigError("min_evals must be >= 1");
  if (swap_candidates < 1) throw ConfigError("swap_candidates must be >= 1");
  if (examples_in_context < 1) throw ConfigError("examples_in_context must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  generation.validate();
}

std::size_t SearchConfig::effective_batch(std::size_t dataset_size) const {
  const std::size_t b = batch_size == 0 ? std::min<std::size_t>(32, dataset_size) : batch_size;
  return std::min(b, dataset_size);
}

json search_config_to_json(const SearchConfig& c) {
  return {{"prompt_length_budget", c.prompt_length_budget},
          {"population_top_k", c.population_top_k},
          {"mutations_per_parent", c.mutations_per_parent},
          {"fresh_per_step", c.fresh_per_step},
          {"initial_population", c.initial_population},
          {"max_steps", c.max_steps},
          {"patience_steps", c.patience_steps},
          {"batch_size", c.batch_size},
          {"min_evals", c.min_evals},
          {"swap_candidates", c.swap_candidates},
          {"swap_init", c.swap_init == SwapInit::kThe ? "the" : "random"},
          {"examples_in_context", c.examples_in_context},
          {"generation_marker", c.generation_marker},
          {"checkpoint_every", c.checkpoint_every},
          {"temperature", c.generation.temperature},
          {"repetition_penalty", c.generation.repetition_penalty}};
}

SearchConfig search_config_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("search config must be an object");
  SearchConfig c;
  for (const auto& [key, v] : doc.items()) {
    try {
      if (key == "prompt_length_budget") c.prompt_length_budget = v.get<std::size_t>();
      else if (key == "population_top_k") c.population_top_k = v.get<std::size_t>();
      else if (key == "mutations_per_parent") c.mutations_per_parent = v.get<std::size_t>();
      else if (key == "fresh_per_step") c.fresh_per_step = v.get<std::size_t>();
      else if (key == "initial_population") c.initial_population = v.get<std::size_t>();
      else if (key == "max_steps") c.max_steps = v.get<int>();
      else if (key == "patience_steps") c.patience_steps = v.get<int>();
      else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
      else if (key == "min_evals") c.min_evals = v.get<std::size_t>();
      else if (key == "swap_candidates") c.swap_candidates = v.get<std::size_t>();
      else if (key == "swap_init") {
        const auto s = v.get<std::string>();
        if (s == "the") c.swap_init = SwapInit::kThe;
        else if (s == "random") c.swap_init = SwapInit::kRandom;
        else throw ConfigError(fmt::format("swap_init must be \"the\" or \"random\", got \"{}\"", s));
      } else if (key == "examples_in_context") c.examples_in_context = v.get<std::size_t>();
      else if (key == "generation_marker") c.generation_marker = v.get<std::string>();
      else if (key == "checkpoint_every") c.checkpoint_every = v.get<int>();
      else if (key == "temperature") c.generation.temperature = v.get<double>();
      else if (key == "repetition_penalty") c.generation.repetition_penalty = v.get<double>();
      else throw ConfigError(fmt::format("unknown search field \"{}\"", key));
    } catch (const json::exception& e) {
      throw ConfigError(fmt::format("search field \"{}\": {}", key, e.what()));
    }
  }
  return c;
}

// --- early stopping / state -------------------------------------------------

bool EarlyStopping::update(int step, double value) {
  if (value < best_) {
    best_ = value;
    last_improvement_ = step;
  }
  return step - last_improvement_ >= patience_;
}

json SearchState::to_json() const {
  json pop = json::array(), pend = json::array(), sw = json::array();
  for (const auto& c : population) pop.push_back(candidate_to_json(c));
  for (const auto& e : swaps) sw.push_back({e.step, e.incumbent_loss, e.accepted_loss});
  for (const auto& c : pending) pend.push_back(candidate_to_json(c));
  return {{"algorithm", algorithm},
          {"seed", seed},
          {"step", step},
          {"rng", {{"kind", "substream"}, {"seed", seed}, {"next_step", step + 1}}},
          {"finished", finished},
          {"stopped_early", stopped_early},
          {"best_loss", finite_or_null(best_loss)},
          {"last_improvement_step", last_improvement_step},
          {"truncated_renders", truncated_renders},
          {"initial_prefix", initial_prefix},
          {"swaps", sw},
          {"population", pop},
          {"pending", pend},
          {"ledger", ledger.to_json()}};
}

SearchState SearchState::from_json(const json& doc) {
  try {
    SearchState s;
    s.algorithm = doc.at("algorithm").get<std::string>();
    s.seed = doc.at("seed").get<std::uint64_t>();
    s.step = doc.at("step").get<int>();
    s.finished = doc.at("finished").get<bool>();
    s.stopped_early = doc.at("stopped_early").get<bool>();
    s.best_loss = from_nullable(doc.at("best_loss"));
    s.last_improvement_step = doc.at("last_improvement_step").get<int>();
    s.truncated_renders = doc.at("truncated_renders").get<std::size_t>();
    s.initial_prefix = doc.at("initial_prefix").get<std::string>();
    for (const auto& e : doc.at("swaps"))
      s.swaps.push_back({e.at(0).get<int>(), e.at(1).get<double>(), e.at(2).get<double>()});
    for (const auto& c : doc.at("population")) s.population.push_back(candidate_from_json(c));
    for (const auto& c : doc.at("pending")) s.pending.push_back(candidate_from_json(c));
    s.ledger = ScoreLedger::from_json(doc.at("ledger"));
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("malformed checkpoint: {}", e.what()));
  }
}

std::vector<RankedCandidate> final_ranking(const ScoreLedger& ledger, std::size_t min_evals,
                                           bool* fell_back) {
  auto rows = ledger.ranked(min_evals);
  if (fell_back) *fell_back = false;
  if (rows.empty() && ledger.size() > 0) {
    rows = ledger.ranked(1);
    if (fell_back) *fell_back = true;
  }
  std::vector<RankedCandidate> out;
  out.reserve(rows.size());
  for (const LedgerEntry* e : rows)
    out.push_back({e->candidate.text, e->candidate.tokens, e->mean(), e->eval_count});
  return out;
}

// --- iPrompt pieces ---------------------------------------------------------

std::string generation_context(const Dataset& dataset, const SearchConfig& config, Rng& rng) {
  std::string ctx;
  for (const Example* ex : sample_batch(dataset, config.examples_in_context, rng)) ctx += ex->text();
  ctx += config.generation_marker;
  return ctx;
}

std::vector<PromptCandidate> propose_fresh(const OracleBackend& backend, const Dataset& dataset,
                                           std::size_t count, const SearchConfig& config, Rng& rng,
                                           int step) {
  if (count < 1) throw ConfigError("propose_fresh needs count >= 1");
  check_dataset(dataset);

  struct Job {
    std::string context;
    std::uint64_t seed, retry_seed;
  };
  std::vector<Job> jobs;
  jobs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Job j;
    j.context = generation_context(dataset, config, rng);
    j.seed = rng();
    j.retry_seed = rng();
    jobs.push_back(std::move(j));
  }

  std::vector<TokenSeq> out(count);
  parallel_for(count, config.parallelism, [&](std::size_t i) {
    GenerationParams p = config.generation;
    p.max_new_tokens = config.prompt_length_budget;
    p.seed = jobs[i].seed;
    out[i] = backend.generate(jobs[i].context, p);
    if (out[i].empty()) {
      p.seed = jobs[i].retry_seed;
      out[i] = backend.generate(jobs[i].context, p);
    }
  });

  std::vector<PromptCandidate> candidates;
  for (auto& toks : out) {
    if (toks.empty()) {
      spdlog::warn("fresh generation empty after retry; candidate skipped");
      continue;
    }
    if (toks.size() > config.prompt_length_budget) toks.resize(config.prompt_length_budget);
    candidates.push_back(PromptCandidate::make(std::move(toks), backend, Origin::kFresh, step));
  }
  return candidates;
}

RerankResult rerank_step(const OracleBackend& backend, const Dataset& dataset,
                         const RenderTemplate& tmpl, const std::vector<PromptCandidate>& candidates,
                         ScoreLedger& ledger, const SearchConfig& config, Rng& rng, int step,
                         std::size_t* truncated) {
  if (candidates.empty()) throw Error("rerank_step needs candidates");
  check_dataset(dataset);

  RerankResult r;
  r.evaluated = dedup_by_text(candidates);
  const auto batch = sample_batch(dataset, config.effective_batch(dataset.examples.size()), rng);
  r.batch_losses = batch_losses(backend, tmpl, r.evaluated, batch, config.parallelism, truncated);
  for (std::size_t i = 0; i < r.evaluated.size(); ++i)
    ledger.record(r.evaluated[i], r.batch_losses[i], step);

  std::set<Token> firsts;
  for (const LedgerEntry* e : ledger.ranked(1)) {
    if (r.top.size() == config.population_top_k) break;
    if (firsts.insert(e->candidate.first_token).second) r.top.push_back(e->candidate);
  }
  if (r.top.size() < config.population_top_k)
    spdlog::debug("step {}: only {} distinct first tokens for a population of {}", step, r.top.size(),
                 config.population_top_k);
  return r;
}

std::vector<PromptCandidate> explore_step(const OracleBackend& backend, const Dataset& dataset,
                                          const std::vector<PromptCandidate>& parents,
                                          const SearchConfig& config, Rng& rng, int step) {
  if (parents.empty()) throw Error("explore_step needs parents");
  check_dataset(dataset);

  struct Job {
    TokenSeq prefix;
    std::string context;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& parent : parents) {
    const std::size_t len = parent.tokens.size();
    const std::size_t keep = len <= 1 ? len : 1 + uniform_below(rng, len - 1);
    TokenSeq prefix(parent.tokens.begin(), parent.tokens.begin() + static_cast<std::ptrdiff_t>(keep));
    for (std::size_t m = 0; m < config.mutations_per_parent; ++m) {
      const std::string data = generation_context(dataset, config, rng);
      jobs.push_back({prefix, backend.append(data, prefix), rng()});
    }
  }

  std::vector<TokenSeq> children(jobs.size());
  parallel_for(jobs.size(), config.parallelism, [&](std::size_t i) {
    TokenSeq toks = jobs[i].prefix;
    if (toks.size() < config.prompt_length_budget) {
      GenerationParams p = config.generation;
      p.max_new_tokens = config.prompt_length_budget - toks.size();
      p.seed = jobs[i].seed;
      const TokenSeq more = backend.generate(jobs[i].context, p);
      toks.insert(toks.end(), more.begin(), more.end());
    }
    if (toks.size() > config.prompt_length_budget) toks.resize(config.prompt_length_budget);
    children[i] = std::move(toks);
  });

  std::vector<PromptCandidate> out;
  out.reserve(children.size() + config.fresh_per_step);
  for (auto& toks : children)
    out.push_back(PromptCandidate::make(std::move(toks), backend, Origin::kMutation, step));
  for (auto& c : propose_fresh(backend, dataset, config.fresh_per_step, config, rng, step))
    out.push_back(std::move(c));
  return out;
}

// --- drivers ----------------------------------------------------------------

namespace {

void maybe_checkpoint(SearchHooks* hooks, const SearchState& state, const SearchConfig& config) {
  if (!hooks) return;
  if (state.finished || (config.checkpoint_every > 0 && state.step % config.checkpoint_every == 0))
    hooks->on_checkpoint(state);
}

void emit(SearchHooks* hooks, SearchResult& result, const TraceRow& row) {
  result.trace.push_back(row);
  if (hooks) hooks->on_trace(row);
}

void finalize(SearchResult& result, const SearchConfig& config, std::size_t min_evals) {
  bool fell_back = false;
  result.ranking = final_ranking(result.state.ledger, min_evals, &fell_back);
  result.metadata["steps_run"] = result.state.step;
  result.metadata["stopped_early"] = result.state.stopped_early;
  result.metadata["truncated_renders"] = result.state.truncated_renders;
  result.metadata["ranking_min_evals_fallback"] = fell_back;
  result.metadata["patience_steps"] = config.patience_steps;
}

}  // namespace

SearchResult run_iprompt(const OracleBackend& backend, const Dataset& dataset,
                         const RenderTemplate& tmpl, const SearchConfig& config, SearchHooks* hooks,
                         const SearchState* resume) {
  config.validate();
  check_dataset(dataset);

  SearchResult result;
  result.metadata = base_metadata(backend, config, dataset, "iprompt");
  SearchState& state = result.state;
  if (resume) {
    if (resume->algorithm != "iprompt") throw ConfigError("checkpoint is not from an iprompt run");
    state = *resume;
  } else {
    state.algorithm = "iprompt";
    state.seed = config.seed;
    Rng rng = substream(config.seed, 0, kInit);
    const std::size_t n0 =
        config.initial_population ? config.initial_population : config.candidates_per_step();
    state.pending = propose_fresh(backend, dataset, n0, config, rng, 0);
    maybe_checkpoint(hooks, state, config);
  }

  EarlyStopping stopper(config.patience_steps);
  stopper.restore(state.best_loss, state.last_improvement_step);

  while (!state.finished && state.step < config.max_steps) {
    const int step = state.step + 1;

    std::vector<PromptCandidate> to_eval = state.pending;
    to_eval.insert(to_eval.end(), state.population.begin(), state.population.end());
    if (to_eval.empty()) throw GenerationError("no candidates to evaluate (all generations empty)");

    Rng rerank_rng = substream(config.seed, static_cast<std::uint64_t>(step), kRerank);
    RerankResult rr = rerank_step(backend, dataset, tmpl, to_eval, state.ledger, config, rerank_rng,
                                  step, &state.truncated_renders);
    state.population = rr.top;

    std::set<std::string> selected;
    for (const auto& c : state.population) selected.insert(c.text);
    for (std::size_t i = 0; i < rr.evaluated.size(); ++i) {
      const LedgerEntry* e = state.ledger.find(rr.evaluated[i].text);
      if (hooks)
        hooks->on_record({step, e->candidate.text, rr.batch_losses[i], e->mean(), e->eval_count,
                          selected.count(e->candidate.text) > 0});
    }

    const double best = state.population.empty() ? kInf : state.ledger.find(state.population[0].text)->mean();
    const double batch_best = *std::min_element(rr.batch_losses.begin(), rr.batch_losses.end());
    emit(hooks, result, {step, best, batch_best});

    const bool stop = stopper.update(step, best);
    state.best_loss = stopper.best();
    state.last_improvement_step = stopper.last_improvement_step();
    state.step = step;

    if (stop || step == config.max_steps) {
      state.finished = true;
      state.stopped_early = stop;
      state.pending.clear();
    } else {
      Rng explore_rng = substream(config.seed, static_cast<std::uint64_t>(step), kExplore);
      state.pending = explore_step(backend, dataset, state.population, config, explore_rng, step);
    }
    maybe_checkpoint(hooks, state, config);
    if (!state.finished && hooks && hooks->halt_after(step)) {
      result.halted = true;
      break;
    }
  }
  if (state.step >= config.max_steps) state.finished = true;

  finalize(result, config, config.min_evals);
  result.metadata["population_top_k"] = config.population_top_k;
  result.metadata["candidates_per_step"] = config.candidates_per_step();
  return result;
}

SearchResult run_coordinate_swap(const OracleBackend& backend, const Dataset& dataset,
                                 const RenderTemplate& tmpl, const SearchConfig& config,
                                 SearchHooks* hooks, const SearchState* resume) {
  config.validate();
  check_dataset(dataset);
  const TokenSeq& vocab = backend.vocabulary();
  if (vocab.empty())
    throw CapabilityError("coordinate swap needs a backend that exposes its vocabulary");

  SearchResult result;
  result.metadata = base_metadata(backend, config, dataset, "coord_swap");
  result.metadata["deltas"] = json::array(
      {"replacement tokens drawn uniformly from the full vocabulary; no gradient ranking",
       "substitution only when the best candidate is strictly better on the same batch",
       "edit position drawn uniformly each step"});
  SearchState& state = result.state;

  if (resume) {
    if (resume->algorithm != "coord_swap") throw ConfigError("checkpoint is not from a coord_swap run");
    state = *resume;
  } else {
    state.algorithm = "coord_swap";
    state.seed = config.seed;
    TokenSeq init;
    if (config.swap_init == SwapInit::kThe) {
      std::string text = "the";
      for (std::size_t i = 1; i < config.prompt_length_budget; ++i) text += " the";
      init = backend.tokenize(text);
    } else {
      Rng rng = substream(config.seed, 0, kInit);
      for (std::size_t i = 0; i < config.prompt_length_budget; ++i)
        init.push_back(vocab[uniform_below(rng, vocab.size())]);
    }
    state.population = {PromptCandidate::make(std::move(init), backend, Origin::kSwap, 0)};
    state.initial_prefix = state.population[0].text;
    maybe_checkpoint(hooks, state, config);
  }
  result.metadata["initial_prefix"] = state.initial_prefix;

  EarlyStopping stopper(config.patience_steps);
  stopper.restore(state.best_loss, state.last_improvement_step);

  while (!state.finished && state.step < config.max_steps) {
    const int step = state.step + 1;
    Rng rng = substream(config.seed, static_cast<std::uint64_t>(step), kSwap);
    const PromptCandidate incumbent = state.population.at(0);

    const std::size_t pos = uniform_below(rng, incumbent.tokens.size());
    std::vector<PromptCandidate> proposals;
    proposals.reserve(config.swap_candidates);
    for (std::size_t i = 0; i < config.swap_candidates; ++i) {
      TokenSeq toks = incumbent.tokens;
      toks[pos] = vocab[uniform_below(rng, vocab.size())];
      proposals.push_back(PromptCandidate::make(std::move(toks), backend, Origin::kSwap, step));
    }
    const auto batch = sample_batch(dataset, config.effective_batch(dataset.examples.size()), rng);

    std::vector<PromptCandidate> evaluated{incumbent};
    for (auto& c : dedup_by_text(proposals))
      if (c.text != incumbent.text) evaluated.push_back(std::move(c));
    const std::vector<double> losses =
        batch_losses(backend, tmpl, evaluated, batch, config.parallelism, &state.truncated_renders);
    for (std::size_t i = 0; i < evaluated.size(); ++i) state.ledger.record(evaluated[i], losses[i], step);

    std::size_t best = 0;
    for (std::size_t i = 1; i < evaluated.size(); ++i)
      if (best == 0 || losses[i] < losses[best]) best = i;
    const bool accept = best != 0 && losses[best] < losses[0];
    if (accept) {
      state.swaps.push_back({step, losses[0], losses[best]});
      state.population = {state.ledger.find(evaluated[best].text)->candidate};
    }

    if (hooks)
      for (std::size_t i = 0; i < evaluated.size(); ++i) {
        const LedgerEntry* e = state.ledger.find(evaluated[i].text);
        hooks->on_record({step, e->candidate.text, losses[i], e->mean(), e->eval_count,
                          accept && i == best});
      }

    const auto qualified = state.ledger.ranked(config.min_evals);
    const double best_mean = qualified.empty() ? kInf : qualified.front()->mean();
    emit(hooks, result, {step, best_mean, accept ? losses[best] : losses[0]});

    const bool stop = stopper.update(step, best_mean);
    state.best_loss = stopper.best();
    state.last_improvement_step = stopper.last_improvement_step();
    state.step = step;
    if (stop || step == config.max_steps) {
      state.finished = true;
      state.stopped_early = stop;
    }
    maybe_checkpoint(hooks, state, config);
    if (!state.finished && hooks && hooks->halt_after(step)) {
      result.halted = true;
      break;
    }
  }
  if (state.step >= config.max_steps) state.finished = true;

  result.swaps = state.swaps;
  finalize(result, config, config.min_evals);
  result.metadata["swap_candidates"] = config.swap_candidates;
  result.metadata["accepted_swaps"] = result.swaps.size();
  return result;
}

SearchResult run_averaged_suffix(const OracleBackend& backend, const Dataset& dataset,
                                 std::string_view template_text, const BeamParams& beam,
                                 const SearchConfig& config, SearchHooks* hooks) {
  check_dataset(dataset);
  SearchResult result;
  result.metadata = base_metadata(backend, config, dataset, "avg_suffix");
  result.metadata["template"] = template_text;
  result.metadata["beam"] = {{"width", beam.width},
                             {"max_len", beam.max_len},
                             {"length_penalty_alpha", beam.length_penalty_alpha}};

  BeamObserver observer = [&](std::size_t step, const std::vector<BeamHypothesis>& alive) {
    if (alive.empty()) return;
    double best_norm = -kInf, best_raw = -kInf;
    for (const auto& h : alive) {
      best_norm = std::max(best_norm, h.normalized);
      best_raw = std::max(best_raw, h.score);
    }
    emit(hooks, result, {static_cast<int>(step), -best_norm, -best_raw});
  };

  AveragedDecodeOptions opt;
  opt.parallelism = config.parallelism;
  opt.seed = config.seed;
  const AveragedDecodeResult decoded =
      averaged_suffix_decode(backend, dataset, template_text, beam, opt, observer);
  result.metadata["sparse_logits"] = decoded.sparse_logits;
  if (decoded.sparse_logits)
    result.metadata["deltas"] = json::array({"top-k logits only; tokens outside a context's top-k "
                                             "were averaged as -inf"});

  SearchState& state = result.state;
  state.algorithm = "avg_suffix";
  state.seed = config.seed;
  const int step = static_cast<int>(beam.max_len);
  for (const auto& h : decoded.beams) {
    if (h.tokens.empty()) continue;
    const PromptCandidate c = PromptCandidate::make(h.tokens, backend, Origin::kFresh, step);
    const double loss = quantize_loss(-h.normalized);
    const LedgerEntry& e = state.ledger.record(c, loss, step);
    if (hooks) hooks->on_record({step, c.text, loss, e.mean(), e.eval_count, true});
  }
  state.step = step;
  state.finished = true;
  if (hooks) hooks->on_checkpoint(state);
  finalize(result, config, 1);
  return result;
}

}  // namespace autoprompt
