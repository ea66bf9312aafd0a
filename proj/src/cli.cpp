#include "crowdfuse/cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <map>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "crowdfuse/errors.hpp"
#include "crowdfuse/json_util.hpp"
#include "crowdfuse/metrics.hpp"
#include "crowdfuse/quality.hpp"
#include "crowdfuse/serialize.hpp"
#include "crowdfuse/simulator.hpp"

namespace crowdfuse::cli {
namespace {

void check_params(const FusionParams& p) {
  if (p.n_min < 1 || p.n_max < p.n_min)
    throw Error(Errc::BadArgument, "result budget needs 1 <= n_min <= n_max");
  if (p.n_corr < 1)
    throw Error(Errc::BadArgument, "n_corr must be at least 1");
  if (!std::isfinite(p.tau) || p.tau < 0)
    throw Error(Errc::BadArgument, "tau must be finite and non-negative");
  if (!(p.beta > 0.0) || p.beta > 1.0)
    throw Error(Errc::BadArgument, "beta must lie in (0, 1]");
  if (p.epsilon < 0.0 || !(p.epsilon < 1.0))
    throw Error(Errc::BadArgument, "epsilon must lie in [0, 1)");
  if (p.eta_cov < 0.0 || p.eta_cov > 1.0)
    throw Error(Errc::BadArgument, "eta_cov must lie in [0, 1]");
}

// Flag overrides only make sense for the category they steer; anything
// else is a mistake worth stopping on.
FusionParams apply_overrides(const FuseOptions& opt, Category cat, FusionParams p) {
  auto reject = [&](const char* flag) {
    throw Error(Errc::CategoryMismatch, std::string("--") + flag +
                                            " does not apply to category '" +
                                            to_string(cat) + "'");
  };
  if (opt.beta) {
    if (!is_classification(cat)) reject("beta");
    p.beta = *opt.beta;
  }
  if (opt.epsilon) {
    if (cat != Category::Counting) reject("epsilon");
    p.epsilon = *opt.epsilon;
  }
  if (opt.tau) {
    if (!is_spatial(cat)) reject("tau");
    p.tau = *opt.tau;
  }
  if (opt.n_corr) {
    if (!is_spatial(cat)) reject("n-corr");
    p.n_corr = *opt.n_corr;
  }
  if (opt.eta_cov) {
    if (!is_spatial(cat)) reject("eta-cov");
    p.eta_cov = *opt.eta_cov;
  }
  if (opt.n_min) p.n_min = *opt.n_min;
  if (opt.n_max) p.n_max = *opt.n_max;
  check_params(p);
  return p;
}

void write_output(const nlohmann::json& j, const std::string& path) {
  if (path.empty())
    std::cout << jsonio::emit(j) << '\n';
  else
    jsonio::write_file(path, j);
}

nlohmann::json fuse_task_json(const AnnotationTask& task, Category cat,
                              const FusionParams& params) {
  nlohmann::json tj;
  tj["task_id"] = task.task_id;
  tj["results"] = static_cast<int>(task.results.size());
  if (task.results.empty()) {
    // Nothing to fuse and nobody to judge.
    tj["agreement"] = false;
    tj["fused"] = nullptr;
    tj["approvals"] = nlohmann::json::object();
    return tj;
  }
  const FuseOutcome out = fuse_once(task.results, cat, params);
  tj["agreement"] = out.criterion_met;
  tj["fused"] = fused_to_json(out.fused);
  if (out.fused_count) tj["fused_count"] = *out.fused_count;
  nlohmann::json approvals = nlohmann::json::object();
  for (const auto& [worker, ok] :
       evaluate_results(task.results, cat, params, out))
    approvals[worker] = ok;
  tj["approvals"] = approvals;
  return tj;
}

std::uint64_t parse_seed_env(const char* text) {
  std::uint64_t v = 0;
  const char* end = text + std::char_traits<char>::length(text);
  const auto [ptr, ec] = std::from_chars(text, end, v, 10);
  if (ec != std::errc() || ptr != end)
    throw Error(Errc::BadArgument,
                "CROWDFUSE_SEED must be an unsigned decimal integer");
  return v;
}

} // namespace

int cmd_fuse(const FuseOptions& opt) {
  if (opt.threads < 1)
    throw Error(Errc::BadArgument, "--threads must be at least 1");
  const AnnotationSet set = annotations_from_json(jsonio::parse_file(opt.input_path));
  const FusionParams params = apply_overrides(opt, set.category, set.params);

  // Tasks land in a pre-sized slot vector keyed by input index, so the
  // emitted document is the same bytes for any thread count.
  std::vector<nlohmann::json> slots(set.tasks.size());
  const int workers = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(opt.threads),
                            std::max<std::size_t>(set.tasks.size(), 1)));
  std::atomic<std::size_t> cursor{0};
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(workers));
  auto drain = [&](int slot) {
    try {
      for (;;) {
        const std::size_t i = cursor.fetch_add(1);
        if (i >= set.tasks.size()) break;
        slots[i] = fuse_task_json(set.tasks[i], set.category, params);
      }
    } catch (...) {
      failures[static_cast<std::size_t>(slot)] = std::current_exception();
    }
  };
  if (workers <= 1) {
    drain(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) pool.emplace_back(drain, t);
    for (auto& th : pool) th.join();
  }
  for (const auto& ep : failures)
    if (ep) std::rethrow_exception(ep);

  nlohmann::json out;
  out["format_version"] = 1;
  out["kind"] = "fusion_output";
  out["category"] = to_string(set.category);
  out["params"] = params_to_json(params);
  nlohmann::json tasks = nlohmann::json::array();
  for (auto& tj : slots) tasks.push_back(std::move(tj));
  out["tasks"] = std::move(tasks);
  write_output(out, opt.output_path);
  return kExitOk;
}

int cmd_simulate(const SimulateOptions& opt) {
  Scenario scenario = scenario_from_json(jsonio::parse_file(opt.scenario_path));
  if (const char* env = std::getenv("CROWDFUSE_SEED"); env && *env)
    scenario.seed = parse_seed_env(env);
  const SimulationReport report = run_job(scenario);
  write_output(report_to_json(report), opt.output_path);
  return kExitOk;
}

int cmd_evaluate(const EvaluateOptions& opt) {
  const ScoredSet fused =
      scored_set_from_json(jsonio::parse_file(opt.fused_path), true);
  const ScoredSet reference =
      scored_set_from_json(jsonio::parse_file(opt.reference_path), false);
  if (fused.category != reference.category)
    throw Error(Errc::CategoryMismatch,
                std::string("cannot score '") + to_string(fused.category) +
                    "' output against a '" + to_string(reference.category) +
                    "' reference");
  if (fused.category == Category::Counting)
    throw Error(Errc::CategoryMismatch,
                "counting has no overlap metric; compare counts directly");
  if (opt.iou_threshold < 0.0 || !(opt.iou_threshold < 1.0))
    throw Error(Errc::BadArgument, "--iou must lie in [0, 1)");

  std::map<std::string, const ScoredTask*> by_id;
  for (const auto& t : reference.tasks)
    if (!by_id.emplace(t.task_id, &t).second)
      throw Error(Errc::SchemaError,
                  "reference lists task '" + t.task_id + "' twice");
  std::vector<MatchReport> reports;
  std::vector<TaskElements> fused_elems, ref_elems;
  std::vector<std::string> seen;
  reports.reserve(fused.tasks.size());
  for (const auto& t : fused.tasks) {
    const auto it = by_id.find(t.task_id);
    if (it == by_id.end())
      throw Error(Errc::BadArgument,
                  "task '" + t.task_id + "' has no reference entry");
    reports.push_back(match_pr(t.elements, it->second->elements, fused.category,
                               opt.iou_threshold));
    fused_elems.push_back(t.elements);
    ref_elems.push_back(it->second->elements);
    seen.push_back(t.task_id);
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
    throw Error(Errc::SchemaError, "fused output lists a task twice");
  if (seen.size() != by_id.size())
    throw Error(Errc::BadArgument,
                "reference covers tasks the fused output does not");

  const MatchReport total = combine_matches(reports);
  nlohmann::json out;
  out["format_version"] = 1;
  out["kind"] = "evaluation";
  out["category"] = to_string(fused.category);
  out["tasks"] = static_cast<int>(reports.size());
  out["iou_threshold"] = opt.iou_threshold;
  out["matched"] = total.matched;
  out["fused_total"] = total.fused_total;
  out["reference_total"] = total.reference_total;
  out["precision"] = total.precision();
  out["recall"] = total.recall();
  if (is_classification(fused.category)) {
    nlohmann::json confusion = nlohmann::json::object();
    for (const auto& [ref_label, row] : total.confusion) {
      nlohmann::json jrow = nlohmann::json::object();
      for (const auto& [got, n] : row) jrow[got] = n;
      confusion[ref_label] = jrow;
    }
    out["confusion"] = confusion;
  }
  if (opt.with_ap)
    out["average_precision"] =
        average_precision(fused_elems, ref_elems, fused.category);
  write_output(out, opt.output_path);
  return kExitOk;
}

int run(int argc, char** argv) {
  CLI::App app{"consensus tooling for crowdsourced image and video annotation"};
  app.require_subcommand(1);

  FuseOptions fo;
  SimulateOptions so;
  EvaluateOptions eo;

  CLI::App* fuse = app.add_subcommand("fuse", "fuse worker results task by task");
  fuse->add_option("input", fo.input_path, "annotation set (JSON)")->required();
  fuse->add_option("-o,--output", fo.output_path, "write here instead of stdout");
  fuse->add_option("--threads", fo.threads,
                   "fuse tasks in parallel; output bytes do not change");
  fuse->add_option("--beta", fo.beta, "super-majority fraction (classification)");
  fuse->add_option("--epsilon", fo.epsilon, "relative count tolerance (counting)");
  fuse->add_option("--tau", fo.tau, "cluster distance bound (spatial)");
  fuse->add_option("--n-corr", fo.n_corr, "corroboration threshold (spatial)");
  fuse->add_option("--eta-cov", fo.eta_cov, "coverage bar (spatial)");
  fuse->add_option("--n-min", fo.n_min, "minimum results per task");
  fuse->add_option("--n-max", fo.n_max, "result budget per task");

  CLI::App* sim = app.add_subcommand("simulate", "run a closed-loop simulation");
  sim->add_option("scenario", so.scenario_path, "scenario file (JSON)")->required();
  sim->add_option("-o,--output", so.output_path, "write here instead of stdout");

  CLI::App* ev =
      app.add_subcommand("evaluate", "score fused output against a reference");
  ev->add_option("fused", eo.fused_path, "fusion output or simulation report")
      ->required();
  ev->add_option("reference", eo.reference_path,
                 "reference annotations, or a report scored by its planted truth")
      ->required();
  ev->add_option("--iou", eo.iou_threshold, "overlap a match must exceed");
  ev->add_flag("--ap", eo.with_ap, "also average precision over 0.50..0.95");
  ev->add_option("-o,--output", eo.output_path, "write here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (fuse->parsed()) return cmd_fuse(fo);
    if (sim->parsed()) return cmd_simulate(so);
    return cmd_evaluate(eo);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.code()) {
      case Errc::SchemaError:
        return kExitSchema;
      case Errc::CategoryMismatch:
      case Errc::BadArgument:
        return kExitMismatch;
      default:
        return kExitFailure;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

} // namespace crowdfuse::cli
