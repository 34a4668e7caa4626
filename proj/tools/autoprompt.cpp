// Command-line front end: gen-data, search, resume, eval.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <iostream>
#include <optional>

#include "autoprompt/runner.hpp"

namespace ap = autoprompt;

namespace {

void print_top(const ap::SearchRunOutcome& outcome, std::size_t n) {
  const auto& ranking = outcome.result.ranking;
  for (std::size_t i = 0; i < std::min(n, ranking.size()); ++i)
    std::cout << (i + 1) << "\t" << ranking[i].mean_loss << "\t" << ranking[i].eval_count << "\t"
              << ranking[i].text << "\n";
  if (!outcome.complete) std::cout << "run halted; resume with: autoprompt resume " << outcome.run_dir << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prompt search over language-model oracles"};
  app.require_subcommand(1);
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Only warnings and errors");

  auto* gen = app.add_subcommand("gen-data", "Write a synthetic task (or a JSONL source) as JSONL");
  std::string gen_source, gen_out;
  std::uint64_t gen_seed = 0;
  gen->add_option("task", gen_source, "Task name (e.g. add_two) or JSONL path")->required();
  gen->add_option("--seed", gen_seed, "Sampling seed");
  gen->add_option("--out", gen_out, "Output JSONL path")->required();

  auto* search = app.add_subcommand("search", "Run a prompt search and write a run directory");
  std::string config_path, algorithm, backend_arg, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> parallelism;
  std::optional<int> halt_after;
  search->add_option("--config", config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  search->add_option("--seed", seed, "Override the configured seed");
  search->add_option("--algorithm", algorithm, "iprompt, coord_swap or avg_suffix");
  search->add_option("--backend", backend_arg, "Backend kind, inline JSON, or JSON file");
  search->add_option("--out", out_dir, "Run directory");
  search->add_option("--parallelism", parallelism, "Concurrent backend calls");
  search->add_option("--halt-after", halt_after, "Stop after this step, leaving a checkpoint")->group("");

  auto* resume = app.add_subcommand("resume", "Continue a run from its checkpoint");
  std::string resume_dir;
  resume->add_option("run_dir", resume_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  resume->add_option("--out", resume_dir, "Run directory (alternative to the positional)");

  auto* eval = app.add_subcommand("eval", "Score finished runs");
  std::vector<std::string> run_dirs, eval_backends;
  std::string eval_out = ".";
  bool no_prompt = false, matrix = false, no_mrr = false;
  std::size_t eval_parallelism = 1;
  eval->add_option("runs", run_dirs, "Run directories")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--out", eval_out, "Report directory");
  eval->add_option("--backend", eval_backends, "Extra backend for the generalization table (repeatable)");
  eval->add_flag("--no-prompt", no_prompt, "Add the empty-prompt baseline row");
  eval->add_flag("--matrix", matrix, "Compute the prompt x task selection matrix");
  eval->add_flag("--skip-mrr", no_mrr, "Skip keyword metrics");
  eval->add_option("--parallelism", eval_parallelism, "Concurrent examples");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ap::ExitCode::kConfig);
  }
  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::warn : spdlog::level::info);
  spdlog::set_pattern("[%l] %v");

  try {
    if (*gen) {
      ap::cmd_gen_data(gen_source, gen_seed, gen_out);
    } else if (*search) {
      ap::RunConfig cfg = ap::load_run_config(config_path);
      if (seed) cfg.seed = *seed;
      if (!algorithm.empty()) cfg.algorithm = algorithm;
      if (!backend_arg.empty()) cfg.backend = ap::parse_backend_arg(backend_arg);
      if (!out_dir.empty()) cfg.out = out_dir;
      if (parallelism) cfg.parallelism = *parallelism;
      print_top(ap::cmd_search(cfg, {halt_after}), 5);
    } else if (*resume) {
      print_top(ap::cmd_resume(resume_dir), 5);
    } else if (*eval) {
      ap::EvalOptions opt;
      for (const auto& d : run_dirs) opt.run_dirs.emplace_back(d);
      opt.out = eval_out;
      for (const auto& b : eval_backends) opt.backends.push_back(ap::parse_backend_arg(b));
      opt.no_prompt = no_prompt;
      opt.matrix = matrix;
      opt.mrr = !no_mrr;
      opt.parallelism = eval_parallelism;
      const ap::EvalReport report = ap::cmd_eval(opt);
      if (report.mrr) std::cout << "mrr\t" << *report.mrr << "\n";
      if (report.top_prompt_correctness)
        std::cout << "top_prompt_correctness\t" << *report.top_prompt_correctness << "\n";
      std::cout << "report\t" << (opt.out / ap::kReportFile).string() << "\n";
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(ap::exit_code_for(e));
  }
  return 0;
}
