#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "pddllm/bench.hpp"
#include "pddllm/induction.hpp"
#include "pddllm/loca.hpp"
#include "pddllm/pddl.hpp"

namespace fs = std::filesystem;
using namespace pddllm;

namespace {

struct CommonOptions {
  std::string backend = "oracle";
  int prompts = 10;
  double u_scale = 1.0;
  double time_limit = 50.0;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

void add_common(CLI::App* cmd, CommonOptions& options) {
  cmd->add_option("--backend", options.backend, "summarizer backend: oracle|remote")
      ->check(CLI::IsMember({"oracle", "remote"}));
  cmd->add_option("--prompts", options.prompts, "parallel candidate generations");
  cmd->add_option("--u-scale", options.u_scale, "interval length as a multiple of d_min");
  cmd->add_option("--time-limit", options.time_limit, "planning budget per task, seconds");
  cmd->add_option("--seed", options.seed, "random seed");
  cmd->add_option("--out", options.out_dir, "output directory");
}

std::shared_ptr<SummarizerBackend> make_backend(const std::string& name) {
  if (name == "remote")
    return std::make_shared<RemoteBackend>(RemoteBackend::config_from_env());
  return std::make_shared<OracleBackend>();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

InductionConfig induction_config(const CommonOptions& options) {
  InductionConfig config;
  config.prompts = options.prompts;
  config.seed = options.seed;
  config.u_scale = options.u_scale;
  return config;
}

int run_derive(const CommonOptions& options, const std::vector<std::string>& demo_paths,
               const std::string& feature_config_path) {
  InductionTask task;
  task.config = induction_config(options);
  for (const auto& path : demo_paths) task.demos.push_back(ingest_demonstration(path));
  if (!feature_config_path.empty()) {
    // resolve d_min entries against the demonstrations up front, so a bad
    // config fails before any backend call
    resolve_feature_config(load_feature_config(feature_config_path), task.demos,
                           options.u_scale);
  }

  fs::create_directories(options.out_dir);
  TranscriptLog log((fs::path(options.out_dir) / "transcript.jsonl").string());
  auto backend = make_backend(options.backend);
  LoggedBackend logged(backend, &log);

  const auto candidates = generate_candidates(task, task.config.prompts, logged,
                                              task.config.seed);
  const auto outcome = vote(candidates, derive_seed(task.config.seed, "vote"), &logged, &task);

  std::cout << "candidates: " << candidates.size() << "\n";
  for (const auto& c : candidates)
    if (c.status == CandidateDomain::Status::eliminated)
      std::cout << "  eliminated (" << to_string(c.reason) << "): " << c.detail << "\n";

  if (!outcome.ok) {
    std::cerr << "induction failed: " << outcome.failure << "\n";
    return 1;
  }
  const fs::path domain_path = fs::path(options.out_dir) / "domain.pddl";
  const fs::path library_path = fs::path(options.out_dir) / "library.json";
  write_text(domain_path, pddl::emit_domain(outcome.winner.domain));
  save_library(outcome.winner.library, library_path.string());
  std::cout << "domain:  " << domain_path.string() << "\n"
            << "library: " << library_path.string() << "\n"
            << "tokens:  " << log.total_tokens() << " over " << log.calls() << " calls\n";
  return 0;
}

int run_plan(const CommonOptions& options, const std::string& domain_path,
             const std::string& problem_path, const std::string& plan_out,
             bool greedy) {
  const auto domain = pddl::load_domain(domain_path);
  const auto problem = pddl::load_problem(problem_path);
  pddl::SolveOptions solve_options;
  solve_options.budget_seconds = options.time_limit;
  if (greedy) solve_options.mode = pddl::SolveOptions::Mode::greedy;
  const auto result = pddl::solve(problem, domain, solve_options);

  if (result.status == pddl::SolveStatus::no_plan) {
    std::cerr << "no plan exists\n";
    return 2;
  }
  if (result.status == pddl::SolveStatus::timeout) {
    std::cerr << "timed out after " << options.time_limit << " s\n";
    return 3;
  }
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& step : result.plan.steps) {
    std::cout << step.str() << "\n";
    steps.push_back(nlohmann::json{{"action", step.schema}, {"args", step.args}});
  }
  std::cout << "; " << result.plan.steps.size() << " steps, "
            << result.plan.stats.nodes_expanded << " nodes expanded\n";
  if (!plan_out.empty()) {
    const nlohmann::json j{{"steps", steps},
                           {"nodes_expanded", result.plan.stats.nodes_expanded}};
    write_text(plan_out, j.dump(2) + "\n");
  }
  return 0;
}

int run_exec(const CommonOptions& options, const std::string& domain_path,
             const std::string& problem_path, const std::string& scene_path,
             const std::string& library_path, const std::string& plan_path,
             const std::string& trace_out) {
  const auto domain = pddl::load_domain(domain_path);
  const auto problem = pddl::load_problem(problem_path);
  const auto scene = load_scene(scene_path);
  const auto library = load_library(library_path);

  pddl::Plan plan;
  {
    std::ifstream in(plan_path);
    if (!in) throw std::runtime_error("cannot open " + plan_path);
    nlohmann::json j;
    in >> j;
    for (const auto& step : j.at("steps"))
      plan.steps.push_back({step.at("action").get<std::string>(),
                            step.at("args").get<std::vector<std::string>>()});
  }

  ExecutionOptions exec_options;
  exec_options.budget_seconds = options.time_limit;
  exec_options.seed = options.seed;
  const auto trace = execute_plan(plan, scene, domain, library, problem, exec_options);
  std::cout << (trace.outcome == ExecutionOutcome::success ? "success" : "failed") << ", "
            << trace.executed_actions << " actions executed, " << trace.replans
            << " replans\n";
  if (!trace_out.empty()) save_trace(trace, trace_out);
  return trace.outcome == ExecutionOutcome::success ? 0 : 1;
}

std::vector<TaskSpec> tasks_from_config(const nlohmann::json& j, double time_limit) {
  std::vector<TaskSpec> tasks;
  for (const auto& jt : j.at("tasks")) {
    const auto category = category_from_string(jt.at("category").get<std::string>());
    if (!category) throw std::runtime_error("unknown category in bench config");
    const int n_lo = jt.contains("n") ? jt.at("n").get<int>() : jt.at("n_min").get<int>();
    const int n_hi = jt.contains("n") ? n_lo : jt.at("n_max").get<int>();
    const int seeds = jt.value("seeds", 1);
    for (int n = n_lo; n <= n_hi; ++n)
      for (int s = 0; s < seeds; ++s) {
        TaskSpec spec;
        spec.category = *category;
        spec.n_objects = n;
        spec.seed = static_cast<std::uint64_t>(jt.value("seed_base", 0) + s);
        spec.time_limit_seconds = jt.value("time_limit", time_limit);
        tasks.push_back(spec);
      }
  }
  return tasks;
}

int run_bench(const CommonOptions& options, const std::string& config_path) {
  std::ifstream in(config_path);
  if (!in) throw std::runtime_error("cannot open " + config_path);
  nlohmann::json j;
  in >> j;

  std::vector<Trajectory> demos;
  for (const auto& jd : j.at("demos")) {
    if (jd.is_string()) {
      demos.push_back(ingest_demonstration(jd.get<std::string>()));
      continue;
    }
    // generated fixture: {"fixture": "stacking", "blocks": 3, "steps": 1000}
    DemoOptions demo_options;
    demo_options.blocks = jd.value("blocks", 3);
    demo_options.min_steps = jd.value("steps", 1000);
    const std::string fixture = jd.at("fixture").get<std::string>();
    if (fixture == "stacking") demos.push_back(make_stack_demo(demo_options));
    else if (fixture == "unstacking") demos.push_back(make_unstack_demo(demo_options));
    else if (fixture == "alignment") demos.push_back(make_align_demo(demo_options));
    else if (fixture == "color") demos.push_back(make_color_demo(demo_options));
    else throw std::runtime_error("unknown demo fixture " + fixture);
  }

  BenchConfig config;
  config.induction = induction_config(options);
  config.induction.seed = j.value("seed", options.seed);
  config.repeats = j.value("repeats", 1);
  fs::create_directories(options.out_dir);
  config.transcript_path = (fs::path(options.out_dir) / "transcript.jsonl").string();

  auto backend = make_backend(options.backend);
  const auto tasks = tasks_from_config(j, options.time_limit);
  const BenchReport report = run_pipeline(demos, tasks, config, *backend);

  write_text(fs::path(options.out_dir) / "report.csv", report_to_csv(report));
  write_text(fs::path(options.out_dir) / "report.json", report_to_json(report));
  write_text(fs::path(options.out_dir) / "series.csv", report_series_csv(report));
  std::cout << "tasks: " << report.rows.size() << ", success rate " << report.success_rate()
            << " +/- " << report.success_stderr() << "\n"
            << "induction tokens: " << report.induction_tokens << "\n"
            << "report written to " << options.out_dir << "\n";
  return report.induction_ok ? 0 : 1;
}

int run_score(const std::string& generated_path, const std::string& reference_path,
              const std::vector<std::string>& problem_paths) {
  const auto generated = pddl::load_domain(generated_path);
  const auto reference = pddl::load_domain(reference_path);
  std::vector<pddl::Problem> problems;
  for (const auto& path : problem_paths) problems.push_back(pddl::load_problem(path));

  const DomainQuality quality = score_domain(generated, reference, problems);
  nlohmann::json j{{"missing_predicates_pct", quality.missing_predicates_pct},
                   {"redundant_predicates_pct", quality.redundant_predicates_pct},
                   {"missing_actions_pct", quality.missing_actions_pct},
                   {"redundant_actions_pct", quality.redundant_actions_pct}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

int run_noise(const CommonOptions& options, const std::string& library_path,
              const std::vector<double>& levels) {
  const auto library = load_library(library_path);
  const auto report = noise_study(library, levels, options.seed);
  const std::string csv = noise_report_to_csv(report);
  std::cout << csv;
  fs::create_directories(options.out_dir);
  write_text(fs::path(options.out_dir) / "noise.csv", csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Planning-domain induction from demonstrations"};
  app.require_subcommand(1);

  CommonOptions options;

  auto* derive = app.add_subcommand("derive", "induce a planning domain from demonstrations");
  std::vector<std::string> demo_paths;
  std::string feature_config;
  derive->add_option("--demo", demo_paths, "demonstration trajectory (repeatable)")->required();
  derive->add_option("--features", feature_config, "feature config file (u may be \"d_min\")");
  add_common(derive, options);

  auto* plan = app.add_subcommand("plan", "solve a problem against a domain");
  std::string domain_path, problem_path, plan_out;
  bool greedy = false;
  plan->add_option("--domain", domain_path)->required();
  plan->add_option("--problem", problem_path)->required();
  plan->add_option("--plan-out", plan_out, "write the plan as JSON");
  plan->add_flag("--greedy", greedy, "use the heuristic mode instead of exact search");
  add_common(plan, options);

  auto* exec = app.add_subcommand("exec", "execute a plan against a scene");
  std::string scene_path, library_path, plan_path, trace_out;
  exec->add_option("--domain", domain_path)->required();
  exec->add_option("--problem", problem_path)->required();
  exec->add_option("--scene", scene_path)->required();
  exec->add_option("--library", library_path)->required();
  exec->add_option("--plan", plan_path)->required();
  exec->add_option("--trace-out", trace_out, "write the execution trace as JSON");
  add_common(exec, options);

  auto* bench = app.add_subcommand("bench", "run a benchmark config end to end");
  std::string bench_config;
  bench->add_option("--config", bench_config)->required();
  add_common(bench, options);

  auto* score = app.add_subcommand("score", "compare a generated domain against a reference");
  std::string generated_path, reference_path;
  std::vector<std::string> problem_paths;
  score->add_option("--generated", generated_path)->required();
  score->add_option("--reference", reference_path)->required();
  score->add_option("--problem", problem_paths, "validation problem (repeatable)")->required();

  auto* noise = app.add_subcommand("noise", "predicate accuracy under injected noise");
  std::vector<double> levels = {5, 10, 15, 20, 25, 30};
  noise->add_option("--library", library_path)->required();
  noise->add_option("--levels", levels, "noise levels in percent");
  add_common(noise, options);

  CLI11_PARSE(app, argc, argv);

  try {
    if (derive->parsed()) return run_derive(options, demo_paths, feature_config);
    if (plan->parsed()) return run_plan(options, domain_path, problem_path, plan_out, greedy);
    if (exec->parsed())
      return run_exec(options, domain_path, problem_path, scene_path, library_path, plan_path,
                      trace_out);
    if (bench->parsed()) return run_bench(options, bench_config);
    if (score->parsed()) return run_score(generated_path, reference_path, problem_paths);
    if (noise->parsed()) return run_noise(options, library_path, levels);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
