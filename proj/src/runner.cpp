#include "autoprompt/runner.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "autoprompt/http_backend.hpp"
#include "autoprompt/ngram_oracle.hpp"
#include "autoprompt/planted_oracle.hpp"

namespace autoprompt {

using nlohmann::json;

namespace {

const std::set<std::string> kAlgorithms = {"iprompt", "coord_swap", "avg_suffix"};
const std::set<std::string> kBackendKinds = {"planted", "ngram", "http"};

// Floats rounded to 9 significant digits; non-finite values become null.
json num9(double x) { return std::isfinite(x) ? json(quantize_loss(x)) : json(nullptr); }

json round_floats(const json& j) {
  if (j.is_number_float()) return num9(j.get<double>());
  if (j.is_array()) {
    json out = json::array();
    for (const auto& v : j) out.push_back(round_floats(v));
    return out;
  }
  if (j.is_object()) {
    json out = json::object();
    for (const auto& [k, v] : j.items()) out[k] = round_floats(v);
    return out;
  }
  return j;
}

std::string fmt9(double x) { return fmt::format("{:.9g}", x); }

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
    out << text;
    if (!out) throw ConfigError(fmt::format("failed writing '{}'", path.string()));
  }
  fs::rename(tmp, path);
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open '{}'", path.string()));
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("'{}' is not valid JSON: {}", path.string(), e.what()));
  }
}

template <typename F>
void for_fields(const json& doc, std::string_view where, F&& handle) {
  if (!doc.is_object()) throw ConfigError(fmt::format("{} must be a JSON object", where));
  for (const auto& [key, v] : doc.items()) {
    try {
      if (!handle(key, v)) throw ConfigError(fmt::format("unknown field \"{}\" in {}", key, where));
    } catch (const json::exception& e) {
      throw ConfigError(fmt::format("{}.{}: {}", where, key, e.what()));
    }
  }
}

BeamParams beam_from_json(const json& doc, std::string_view where) {
  BeamParams b;
  for_fields(doc, where, [&](const std::string& k, const json& v) {
    if (k == "width") b.width = v.get<std::size_t>();
    else if (k == "max_len") b.max_len = v.get<std::size_t>();
    else if (k == "length_penalty_alpha") b.length_penalty_alpha = v.get<double>();
    else return false;
    return true;
  });
  return b;
}

json beam_to_json(const BeamParams& b) {
  return {{"width", b.width}, {"max_len", b.max_len}, {"length_penalty_alpha", b.length_penalty_alpha}};
}

DatasetSpec dataset_spec_from_json(const json& doc) {
  DatasetSpec d;
  for_fields(doc, "dataset", [&](const std::string& k, const json& v) {
    if (k == "task") d.task = v.get<std::string>();
    else if (k == "path") d.path = v.get<std::string>();
    else if (k == "name") d.name = v.get<std::string>();
    else if (k == "verbalizer") d.verbalizer = v.get<std::map<std::string, std::string>>();
    else if (k == "keywords") d.keywords = v.get<std::vector<std::string>>();
    else if (k == "description") d.description = v.get<std::string>();
    else return false;
    return true;
  });
  return d;
}

json dataset_spec_to_json(const DatasetSpec& d) {
  json j = json::object();
  if (d.task) j["task"] = *d.task;
  if (d.path) j["path"] = d.path->generic_string();
  if (!d.name.empty()) j["name"] = d.name;
  if (!d.verbalizer.empty()) j["verbalizer"] = d.verbalizer;
  if (d.keywords) j["keywords"] = *d.keywords;
  if (d.description) j["description"] = *d.description;
  return j;
}

json backend_spec_to_json(const BackendSpec& b) {
  json j = {{"kind", b.kind}};
  if (!b.name.empty()) j["name"] = b.name;
  if (b.kind == "ngram") {
    j["corpus"] = b.corpus.generic_string();
    j["order"] = b.order;
    j["end_token"] = b.end_token;
  } else if (b.kind == "http") {
    j["endpoint"] = b.endpoint;
    j["model"] = b.model;
    j["api_key_env"] = b.api_key_env;
    j["top_logprobs"] = b.top_logprobs;
    j["echo"] = b.echo;
    if (!b.vocabulary.empty()) j["vocabulary"] = b.vocabulary;
    if (b.end_token_text) j["end_token_text"] = *b.end_token_text;
  }
  return j;
}

void validate_backend(const BackendSpec& b) {
  if (!kBackendKinds.count(b.kind))
    throw ConfigError(fmt::format("unknown backend kind \"{}\" (expected planted, ngram or http)", b.kind));
  if (b.kind == "ngram") {
    if (b.order < 1) throw ConfigError("ngram order must be >= 1");
    if (b.corpus.empty() || !fs::exists(b.corpus))
      throw ConfigError(fmt::format("ngram corpus '{}' does not exist", b.corpus.string()));
  }
  if (b.kind == "http" && (b.endpoint.empty() || b.model.empty()))
    throw ConfigError("http backend needs endpoint and model");
}

struct RunFiles {
  fs::path dir;
  fs::path journal() const { return dir / kJournalFile; }
  fs::path trace() const { return dir / kTraceFile; }
  fs::path checkpoint() const { return dir / kCheckpointFile; }
  fs::path result() const { return dir / kResultFile; }
  fs::path config() const { return dir / kConfigFile; }
};

constexpr const char* kTraceHeader = "step,best_running_mean,current_batch_loss\n";

class RunWriter final : public SearchHooks {
 public:
  RunWriter(RunFiles files, const SearchRunOptions& options)
      : files_(std::move(files)), options_(options) {
    journal_.open(files_.journal(), std::ios::binary | std::ios::app);
    trace_.open(files_.trace(), std::ios::binary | std::ios::app);
    if (!journal_ || !trace_) throw ConfigError(fmt::format("cannot write to '{}'", files_.dir.string()));
  }

  void on_record(const JournalRecord& r) override {
    const json j = {{"step", r.step},         {"text", r.text},
                    {"batch_loss", num9(r.batch_loss)}, {"running_mean", num9(r.running_mean)},
                    {"eval_count", r.eval_count}, {"accepted", r.accepted}};
    journal_ << j.dump() << '\n';
    journal_.flush();
  }

  void on_trace(const TraceRow& row) override {
    trace_ << row.step << ',' << fmt9(row.best_running_mean) << ',' << fmt9(row.current_batch_loss) << '\n';
    trace_.flush();
  }

  void on_checkpoint(const SearchState& state) override {
    write_text(files_.checkpoint(), state.to_json().dump() + "\n");
  }

  bool halt_after(int step) override { return options_.halt_after && step >= *options_.halt_after; }

 private:
  RunFiles files_;
  SearchRunOptions options_;
  std::ofstream journal_;
  std::ofstream trace_;
};

// Keeps the lines whose leading step is <= max_step (plus `keep_header` lines).
void truncate_lines(const fs::path& path, std::size_t keep_header, int max_step, bool json_lines) {
  std::ifstream in(path, std::ios::binary);
  std::string kept, line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (n++ < keep_header) {
      kept += line + '\n';
      continue;
    }
    if (line.empty()) continue;
    int step = 0;
    try {
      step = json_lines ? json::parse(line).at("step").get<int>() : std::stoi(line.substr(0, line.find(',')));
    } catch (const std::exception&) {
      break;  // partial record from an interrupted write
    }
    if (step > max_step) break;
    kept += line + '\n';
  }
  in.close();
  write_text(path, kept);
}

json result_to_json(const RunConfig& config, const SearchResult& result) {
  json j = {{"algorithm", config.algorithm},
            {"seed", config.seed},
            {"dataset", result.metadata.value("dataset", "")},
            {"backend", result.metadata.value("backend", "")},
            {"template", config.template_pattern},
            {"ranking", ranking_to_json(result.ranking)},
            {"metadata", round_floats(result.metadata)}};
  if (config.algorithm == "coord_swap") {
    json swaps = json::array();
    for (const auto& s : result.swaps)
      swaps.push_back({{"step", s.step},
                       {"incumbent_loss", num9(s.incumbent_loss)},
                       {"accepted_loss", num9(s.accepted_loss)}});
    j["swaps"] = swaps;
  }
  return j;
}

SearchRunOutcome execute(const RunConfig& config, const RunFiles& files, const SearchRunOptions& options,
                         const SearchState* resume) {
  const Dataset dataset = build_dataset(config.dataset, config.seed);
  const auto backend = build_backend(config.backend, dataset);

  SearchConfig sc = config.search;
  sc.seed = config.seed;
  sc.parallelism = config.parallelism;
  const RenderTemplate tmpl(config.template_pattern, config.max_example_tokens);

  RunWriter writer(files, options);
  SearchRunOutcome outcome;
  outcome.run_dir = files.dir;
  if (config.algorithm == "iprompt") {
    outcome.result = run_iprompt(*backend, dataset, tmpl, sc, &writer, resume);
  } else if (config.algorithm == "coord_swap") {
    outcome.result = run_coordinate_swap(*backend, dataset, tmpl, sc, &writer, resume);
  } else {
    outcome.result = run_averaged_suffix(*backend, dataset, config.suffix_template, config.beam, sc, &writer);
  }
  if (!outcome.result.halted) {
    write_text(files.result(), result_to_json(config, outcome.result).dump(2) + "\n");
    outcome.complete = true;
  }
  return outcome;
}

}  // namespace

// --- configuration ----------------------------------------------------------

BackendSpec backend_spec_from_json(const json& doc) {
  BackendSpec b;
  for_fields(doc, "backend", [&](const std::string& k, const json& v) {
    if (k == "kind") b.kind = v.get<std::string>();
    else if (k == "name") b.name = v.get<std::string>();
    else if (k == "corpus") b.corpus = v.get<std::string>();
    else if (k == "order") b.order = v.get<std::size_t>();
    else if (k == "end_token") b.end_token = v.get<bool>();
    else if (k == "endpoint") b.endpoint = v.get<std::string>();
    else if (k == "model") b.model = v.get<std::string>();
    else if (k == "api_key_env") b.api_key_env = v.get<std::string>();
    else if (k == "top_logprobs") b.top_logprobs = v.get<int>();
    else if (k == "echo") b.echo = v.get<bool>();
    else if (k == "vocabulary") b.vocabulary = v.get<TokenSeq>();
    else if (k == "end_token_text") b.end_token_text = v.get<std::string>();
    else if (k == "api_key") throw ConfigError("put the API key in an environment variable and name it in api_key_env");
    else return false;
    return true;
  });
  return b;
}

BackendSpec parse_backend_arg(const std::string& arg) {
  if (!arg.empty() && arg.front() == '{') {
    try {
      return backend_spec_from_json(json::parse(arg));
    } catch (const json::parse_error& e) {
      throw ConfigError(fmt::format("--backend: {}", e.what()));
    }
  }
  if (fs::exists(arg)) return backend_spec_from_json(read_json(arg));
  BackendSpec b;
  b.kind = arg;
  validate_backend(b);
  return b;
}

RunConfig run_config_from_json(const json& doc) {
  RunConfig c;
  for_fields(doc, "config", [&](const std::string& k, const json& v) {
    if (k == "dataset") c.dataset = dataset_spec_from_json(v);
    else if (k == "backend") c.backend = backend_spec_from_json(v);
    else if (k == "algorithm") c.algorithm = v.get<std::string>();
    else if (k == "search") c.search = search_config_from_json(v);
    else if (k == "beam") c.beam = beam_from_json(v, "beam");
    else if (k == "template") c.template_pattern = v.get<std::string>();
    else if (k == "max_example_tokens") c.max_example_tokens = v.get<std::size_t>();
    else if (k == "suffix_template") c.suffix_template = v.get<std::string>();
    else if (k == "seed") c.seed = v.get<std::uint64_t>();
    else if (k == "parallelism") c.parallelism = v.get<std::size_t>();
    else if (k == "out") c.out = v.get<std::string>();
    else if (k == "eval") {
      for_fields(v, "eval", [&](const std::string& ek, const json& ev) {
        if (ek == "beam") c.eval.zero_shot.beam = beam_from_json(ev, "eval.beam");
        else if (ek == "template") c.eval.zero_shot.pattern = ev.get<std::string>();
        else if (ek == "case_sensitive") c.eval.zero_shot.case_sensitive = ev.get<bool>();
        else if (ek == "backends") {
          for (const auto& b : ev) c.eval.backends.push_back(backend_spec_from_json(b));
        } else return false;
        return true;
      });
    } else return false;
    return true;
  });
  return c;
}

json run_config_to_json(const RunConfig& c) {
  json backends = json::array();
  for (const auto& b : c.eval.backends) backends.push_back(backend_spec_to_json(b));
  return {{"dataset", dataset_spec_to_json(c.dataset)},
          {"backend", backend_spec_to_json(c.backend)},
          {"algorithm", c.algorithm},
          {"search", search_config_to_json(c.search)},
          {"beam", beam_to_json(c.beam)},
          {"template", c.template_pattern},
          {"max_example_tokens", c.max_example_tokens},
          {"suffix_template", c.suffix_template},
          {"eval",
           {{"beam", beam_to_json(c.eval.zero_shot.beam)},
            {"template", c.eval.zero_shot.pattern},
            {"case_sensitive", c.eval.zero_shot.case_sensitive},
            {"backends", backends}}},
          {"seed", c.seed},
          {"parallelism", c.parallelism}};
}

RunConfig load_run_config(const fs::path& path) { return run_config_from_json(read_json(path)); }

void RunConfig::validate() const {
  if (!kAlgorithms.count(algorithm))
    throw ConfigError(fmt::format("unknown algorithm \"{}\" (expected iprompt, coord_swap or avg_suffix)", algorithm));
  if (dataset.task.has_value() == dataset.path.has_value())
    throw ConfigError("dataset needs exactly one of \"task\" or \"path\"");
  if (dataset.task) parse_task(*dataset.task);
  if (dataset.path && !fs::exists(*dataset.path))
    throw ConfigError(fmt::format("dataset file '{}' does not exist", dataset.path->string()));
  validate_backend(backend);
  for (const auto& b : eval.backends) validate_backend(b);
  search.validate();
  beam.validate();
  eval.zero_shot.beam.validate();
  RenderTemplate(template_pattern, max_example_tokens);
  RenderTemplate(eval.zero_shot.pattern);
  if (algorithm == "avg_suffix" && suffix_template.find('{') != std::string::npos)
    throw ConfigError("suffix_template must not contain placeholders");
  if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
  if (out.empty()) throw ConfigError("output directory is empty");
}

// --- construction -----------------------------------------------------------

Dataset build_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  Dataset ds;
  if (spec.task) {
    ds = generate_math_dataset(parse_task(*spec.task), seed);
  } else if (spec.path) {
    ds = load_jsonl_dataset(*spec.path, spec.verbalizer);
  } else {
    throw ConfigError("dataset needs \"task\" or \"path\"");
  }
  if (!spec.name.empty()) ds.name = spec.name;
  if (spec.keywords) {
    KeywordRule rule;
    for (std::string k : *spec.keywords) {
      for (char& ch : k) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      rule.keywords.push_back(std::move(k));
    }
    ds.keyword_rule = std::move(rule);
  }
  if (spec.description) ds.ground_truth_description = *spec.description;
  return ds;
}

std::unique_ptr<OracleBackend> build_backend(const BackendSpec& spec, const Dataset& dataset) {
  validate_backend(spec);
  if (spec.kind == "planted") return std::make_unique<PlantedRuleOracle>(make_planted_math_oracle(dataset));
  if (spec.kind == "ngram") {
    NgramOracle::Options o;
    o.order = spec.order;
    o.end_token = spec.end_token;
    o.name = spec.label();
    return std::make_unique<NgramOracle>(NgramOracle::from_file(spec.corpus, o));
  }
  HttpBackendOptions o;
  o.endpoint = spec.endpoint;
  o.model = spec.model;
  o.top_logprobs = spec.top_logprobs;
  o.echo_supported = spec.echo;
  o.vocabulary = spec.vocabulary;
  o.end_token = spec.end_token_text;
  if (!spec.api_key_env.empty()) {
    const char* key = std::getenv(spec.api_key_env.c_str());
    if (!key) throw ConfigError(fmt::format("environment variable {} is not set", spec.api_key_env));
    o.api_key = key;
  }
  return std::make_unique<HttpBackend>(std::move(o));
}

// --- commands ---------------------------------------------------------------

SearchRunOutcome cmd_search(const RunConfig& config, const SearchRunOptions& options) {
  config.validate();
  const RunFiles files{config.out};
  fs::create_directories(files.dir);
  write_text(files.config(), round_floats(run_config_to_json(config)).dump(2) + "\n");
  for (const auto& p : {files.journal(), files.checkpoint(), files.result()}) fs::remove(p);
  write_text(files.trace(), kTraceHeader);
  spdlog::info("search: {} on {} (seed {}) -> {}", config.algorithm, config.dataset.task.value_or(config.dataset.name),
               config.seed, files.dir.string());
  return execute(config, files, options, nullptr);
}

SearchRunOutcome cmd_resume(const fs::path& run_dir, const SearchRunOptions& options) {
  const RunFiles files{run_dir};
  RunConfig config = load_run_config(files.config());
  config.out = run_dir;
  config.validate();
  if (!fs::exists(files.checkpoint()))
    throw ConfigError(fmt::format("no checkpoint in '{}'", run_dir.string()));
  const SearchState state = SearchState::from_json(read_json(files.checkpoint()));
  if (state.algorithm != config.algorithm)
    throw ConfigError(fmt::format("checkpoint algorithm '{}' does not match config '{}'", state.algorithm,
                                  config.algorithm));

  if (config.algorithm == "avg_suffix") {
    fs::remove(files.journal());
    write_text(files.trace(), kTraceHeader);
    return execute(config, files, options, nullptr);
  }
  truncate_lines(files.journal(), 0, state.step, true);
  truncate_lines(files.trace(), 1, state.step, false);
  spdlog::info("resuming {} from step {}", run_dir.string(), state.step);
  return execute(config, files, options, &state);
}

void cmd_gen_data(const std::string& task_or_path, std::uint64_t seed, const fs::path& out) {
  Dataset ds;
  if (fs::is_regular_file(task_or_path)) ds = load_jsonl_dataset(task_or_path);
  else ds = generate_math_dataset(parse_task(task_or_path), seed);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_jsonl_dataset(ds, out);
}

json ranking_to_json(const std::vector<RankedCandidate>& ranking) {
  json arr = json::array();
  for (const auto& c : ranking)
    arr.push_back({{"text", c.text}, {"mean_loss", num9(c.mean_loss)}, {"eval_count", c.eval_count}});
  return arr;
}

std::vector<RankedCandidate> replay_journal(const fs::path& journal, std::size_t min_evals) {
  std::ifstream in(journal, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open journal '{}'", journal.string()));
  ScoreLedger ledger;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json r = json::parse(line);
    PromptCandidate c;
    c.text = r.at("text").get<std::string>();
    c.tokens = {c.text};
    c.first_token = c.text;
    ledger.record(c, r.at("batch_loss").get<double>(), r.at("step").get<int>());
  }
  return final_ranking(ledger, min_evals);
}

EvalReport cmd_eval(const EvalOptions& options) {
  if (options.run_dirs.empty()) throw ConfigError("eval needs at least one run directory");

  struct Run {
    RunConfig config;
    Dataset dataset;
    std::vector<RankedCandidate> ranking;
  };
  std::vector<Run> runs;
  for (const auto& dir : options.run_dirs) {
    Run r{load_run_config(dir / kConfigFile), {}, {}};
    r.dataset = build_dataset(r.config.dataset, r.config.seed);
    const json result = read_json(dir / kResultFile);
    for (const auto& c : result.at("ranking"))
      r.ranking.push_back({c.at("text").get<std::string>(), {}, c.at("mean_loss").is_null() ? 0.0 : c.at("mean_loss").get<double>(),
                           c.at("eval_count").get<std::size_t>()});
    runs.push_back(std::move(r));
  }

  EvalReport report;
  report.search_template = runs.front().config.template_pattern;
  ZeroShotConfig zs = runs.front().config.eval.zero_shot;
  zs.parallelism = options.parallelism;
  report.eval_template = zs.pattern;

  std::vector<std::vector<std::string>> rankings;
  std::vector<KeywordRule> rules;
  for (const auto& r : runs) {
    RunSummary s;
    s.dataset = r.dataset.name;
    s.ranked = r.ranking;
    std::vector<std::string> texts;
    for (const auto& c : r.ranking) texts.push_back(c.text);
    if (r.dataset.keyword_rule) {
      s.first_correct_rank = first_correct_rank(texts, *r.dataset.keyword_rule);
      if (!texts.empty()) s.top_prompt_correct = check_keywords(*r.dataset.keyword_rule, texts.front());
      rules.push_back(*r.dataset.keyword_rule);
    } else if (options.mrr) {
      throw EvaluationError(fmt::format("dataset '{}' has no keyword rules for mrr", r.dataset.name));
    }
    rankings.push_back(std::move(texts));
    report.runs.push_back(std::move(s));
  }
  if (options.mrr) {
    report.mrr = mrr(rankings, rules);
    report.top_prompt_correctness = top_prompt_correctness(rankings, rules);
  }

  // One column per distinct dataset; each run's own backend serves its dataset.
  std::vector<Dataset> datasets;
  std::map<std::string, std::size_t> dataset_index;
  for (const auto& r : runs)
    if (dataset_index.emplace(r.dataset.name, datasets.size()).second) datasets.push_back(r.dataset);

  std::vector<std::unique_ptr<OracleBackend>> owned;
  auto bind = [&](const std::string& name, auto&& spec_for) {
    BackendBinding b{name, {}};
    for (const auto& ds : datasets) {
      owned.push_back(build_backend(spec_for(ds), ds));
      b.per_dataset.push_back(owned.back().get());
    }
    return b;
  };
  std::vector<BackendBinding> bindings;
  bindings.push_back(bind(runs.front().config.backend.label(), [&](const Dataset& ds) -> const BackendSpec& {
    for (const auto& r : runs)
      if (r.dataset.name == ds.name) return r.config.backend;
    return runs.front().config.backend;
  }));
  std::vector<BackendSpec> extra = runs.front().config.eval.backends;
  extra.insert(extra.end(), options.backends.begin(), options.backends.end());
  for (const auto& spec : extra)
    bindings.push_back(bind(spec.label(), [&](const Dataset&) -> const BackendSpec& { return spec; }));

  std::vector<std::string> methods;
  std::map<std::string, std::vector<std::optional<std::string>>> tops;
  for (const auto& r : runs) {
    auto& row = tops[r.config.algorithm];
    if (row.empty()) {
      methods.push_back(r.config.algorithm);
      row.resize(datasets.size());
    }
    if (!r.ranking.empty()) row[dataset_index.at(r.dataset.name)] = r.ranking.front().text;
  }
  std::vector<std::pair<std::string, std::vector<std::string>>> prompts_by_method;
  for (const auto& m : methods) {
    std::vector<std::string> prompts;
    for (const auto& p : tops.at(m)) {
      if (!p) break;
      prompts.push_back(*p);
    }
    if (prompts.size() == datasets.size()) prompts_by_method.emplace_back(m, std::move(prompts));
    else spdlog::warn("method '{}' lacks a prompt for some dataset; left out of the generalization table", m);
  }
  if (!prompts_by_method.empty() || options.no_prompt)
    report.generalization = generalization_eval(prompts_by_method, bindings, datasets, zs, options.no_prompt);

  std::vector<std::string> labels;
  for (const auto& ds : datasets) labels.push_back(ds.name);
  if (options.matrix) {
    if (prompts_by_method.empty()) throw EvaluationError("selection matrix needs a top prompt for every dataset");
    report.matrix = selection_matrix(bindings.front(), prompts_by_method.front().second, datasets, zs);
  }

  if (!options.out.empty()) {
    fs::create_directories(options.out);
    json doc = round_floats(report.to_json());
    json seeds = json::array();
    for (const auto& r : runs) seeds.push_back(r.config.seed);
    doc["seeds"] = seeds;
    write_text(options.out / kReportFile, doc.dump(2) + "\n");
    if (report.matrix) write_text(options.out / kMatrixFile, report.matrix->to_csv(labels, labels));
  }
  return report;
}

ExitCode exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DatasetError*>(&e)) return ExitCode::kConfig;
  if (dynamic_cast<const TransportError*>(&e) || dynamic_cast<const CapabilityError*>(&e) ||
      dynamic_cast<const GenerationError*>(&e) || dynamic_cast<const AlignmentError*>(&e))
    return ExitCode::kBackend;
  return ExitCode::kEvaluation;
}

}  // namespace autoprompt
