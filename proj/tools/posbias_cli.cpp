#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "posbias/attnmap.hpp"
#include "posbias/error.hpp"
#include "posbias/judge.hpp"
#include "posbias/report.hpp"
#include "posbias/runner.hpp"
#include "posbias/simreader.hpp"

using namespace posbias;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<Protocol> parse_protocols(const std::string& csv) {
  if (csv == "all") return {Protocol::Spread, Protocol::Cross};
  std::vector<Protocol> out;
  for (const auto& p : split_csv(csv)) out.push_back(protocol_from_string(p));
  if (out.empty()) throw ConfigError("no protocols selected");
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

struct GridOptions {
  std::string dataset;
  std::string kind = "musique";
  std::string protocol = "all";
  std::string conditions = "all";
  std::string template_id;
  std::uint64_t seed = kDefaultSeed;
  std::string model = "model";
  std::string mode = "standard";
  std::string profile = "standard";
  std::optional<std::uint64_t> distractor_seed;
  bool swap_gold_order = false;
  int max_tokens = 512;
  std::string run_dir = "run";

  void attach(CLI::App* app, bool need_dataset) {
    auto* d = app->add_option("--dataset", dataset, "MuSiQue or NeoQA file (JSONL / JSON)");
    if (need_dataset) d->required();
    app->add_option("--kind", kind, "musique | neoqa")->capture_default_str();
    app->add_option("--protocol", protocol, "spread,cross | all")->capture_default_str();
    app->add_option("--conditions", conditions, "na,matched,unmatched | all")->capture_default_str();
    app->add_option("--template", template_id, "prompt template id");
    app->add_option("--seed", seed, "global seed")->capture_default_str();
    app->add_option("--model", model, "model id sent to the endpoint")->capture_default_str();
    app->add_option("--mode", mode, "standard | think | no_think")->capture_default_str();
    app->add_option("--profile", profile, "standard | dual-tag | dual-flag")->capture_default_str();
    app->add_option("--distractor-seed", distractor_seed, "shuffle distractors with this seed");
    app->add_flag("--swap-gold-order", swap_gold_order, "place the second hop first");
    app->add_option("--max-tokens", max_tokens)->capture_default_str();
    app->add_option("--run-dir", run_dir, "run directory")->capture_default_str();
  }

  RunConfig config() const {
    RunConfig c;
    c.protocols = parse_protocols(protocol);
    c.conditions = ConditionSet::parse(conditions);
    c.dataset = dataset_kind_from_string(kind);
    c.template_id = template_id.empty() ? template_ids(c.dataset).front() : template_id;
    c.seed = seed;
    c.model_id = model;
    c.mode = mode_from_string(mode);
    c.profile = ModelProfile::by_name(profile);
    c.distractor_seed = distractor_seed;
    c.swap_gold_order = swap_gold_order;
    c.max_tokens = max_tokens;
    return c;
  }
};

void print_summary(const PlanSummary& s) {
  std::cout << "cells: spread=" << s.spread_cells << " cross=" << s.cross_cells << " total=" << s.total_cells
            << "\nexamples: " << s.examples << "\ntrials: " << s.trials << '\n';
}

LoadedRun create_run(const GridOptions& g) {
  const RunConfig config = g.config();
  const LoadResult loaded = load_dataset(g.dataset, config.dataset);
  for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << '\n';
  const Plan p = plan(loaded.examples, config);
  const RunPaths paths{g.run_dir};
  fs::create_directories(paths.dir);
  RunManifest m = init_run(paths, loaded.examples, config, fs::absolute(g.dataset).string(), p);
  return {std::move(m), loaded.examples, p};
}

// "sim:<params.json>" selects the simulated reader; anything else is a base URL.
std::unique_ptr<ChatEndpoint> open_endpoint(const std::string& endpoint, const RunConfig& config,
                                            const std::string& token_env, int timeout) {
  if (endpoint.rfind("sim:", 0) == 0) {
    return std::make_unique<sim::SimulatedEndpoint>(config.buckets, sim::load_params(endpoint.substr(4)));
  }
  return make_http_endpoint(endpoint, token_env, timeout);
}

int execute_run(const RunPaths& paths, LoadedRun& run, const std::string& endpoint_spec,
                const std::string& token_env, int timeout, const ExecuteOptions& opts) {
  auto endpoint = open_endpoint(endpoint_spec, run.manifest.config, token_env, timeout);
  auto records = read_records(paths.records());
  std::set<std::string> done;
  for (const auto& [id, r] : records) {
    if (r.ok()) done.insert(id);
  }
  RecordLog log(paths.records());
  std::size_t failures = 0;
  const std::size_t issued = execute(run.plan.specs, run.corpus, run.manifest.config, *endpoint, opts, done,
                                     [&](const TrialRecord& r) {
                                       log.append(r);
                                       if (!r.ok()) ++failures;
                                     });
  records = read_records(paths.records());
  update_completion(paths, run.manifest, run.plan.specs, records);
  const RunStatus st = run_status(run.plan.specs, records);
  std::cout << "issued " << issued << " trials (" << failures << " failed)\n"
            << "completed " << st.completed << "/" << st.total << ", pending " << st.pending << '\n';
  return failures == 0 ? 0 : 3;
}

ScoreResult score_run(const RunPaths& paths, const LoadedRun& run) {
  const auto keyed = read_records(paths.records());
  std::vector<TrialRecord> records;
  records.reserve(keyed.size());
  for (const auto& [id, r] : keyed) records.push_back(r);
  ScoreResult result = score(records, run.plan.specs, run.corpus);
  write_file(paths.scores(), scores_jsonl(result));
  write_file(paths.dir / "cells.csv", cell_metrics_csv(result));
  write_file(paths.dir / "cells.json", cell_metrics_json(result).dump(2) + "\n");
  return result;
}

std::set<std::string> parse_views(const std::string& csv) {
  std::set<std::string> views;
  for (const auto& v : split_csv(csv)) {
    if (!kAllViews.count(v)) throw ConfigError("unknown view: " + v);
    views.insert(v);
  }
  return views;
}

void print_written(const std::vector<fs::path>& files) {
  for (const auto& f : files) std::cout << "wrote " << f.string() << '\n';
}

void print_weakest(const WeakestLinkReport& w) {
  for (const auto& r : w.rows) {
    std::cout << "weakest-link " << bucket_name(r.first) << "+" << bucket_name(r.second)
              << ": cross=" << r.cross_accuracy << " min_spread=" << r.min_spread << " deviation=" << r.deviation
              << " binding=" << bucket_name(r.binding) << (r.violation ? " [exceeds margin]" : "") << '\n';
  }
  for (const auto& n : w.notices) std::cout << "notice: " << n << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Positional-bias experiment harness for multi-hop QA"};
  app.require_subcommand(1);

  GridOptions plan_opts;
  auto* plan_cmd = app.add_subcommand("plan", "Plan the trial grid and create a run directory");
  plan_opts.attach(plan_cmd, true);
  bool dry_run = false;
  plan_cmd->add_flag("--dry-run", dry_run, "print the grid and trial counts without writing a run");

  GridOptions run_opts;
  std::string endpoint;
  std::string token_env = "OPENAI_API_KEY";
  int timeout = 600;
  ExecuteOptions exec;
  auto* run_cmd = app.add_subcommand("run", "Plan (if needed) and execute all trials");
  run_opts.attach(run_cmd, true);
  run_cmd->add_option("--endpoint", endpoint, "base URL (http://host/v1) or sim:<params.json>")->required();
  run_cmd->add_option("--parallelism", exec.parallelism)->capture_default_str();
  run_cmd->add_option("--retries", exec.max_retries)->capture_default_str();
  run_cmd->add_option("--token-env", token_env)->capture_default_str();
  run_cmd->add_option("--timeout", timeout, "seconds per request")->capture_default_str();

  std::string run_dir = "run";
  auto* resume_cmd = app.add_subcommand("resume", "Execute the trials missing from a run");
  resume_cmd->add_option("--run-dir", run_dir)->capture_default_str();
  resume_cmd->add_option("--endpoint", endpoint, "base URL or sim:<params.json>")->required();
  resume_cmd->add_option("--parallelism", exec.parallelism)->capture_default_str();
  resume_cmd->add_option("--retries", exec.max_retries)->capture_default_str();
  resume_cmd->add_option("--token-env", token_env)->capture_default_str();
  resume_cmd->add_option("--timeout", timeout)->capture_default_str();

  auto* status_cmd = app.add_subcommand("status", "Show run progress");
  status_cmd->add_option("--run-dir", run_dir)->capture_default_str();

  auto* score_cmd = app.add_subcommand("score", "Judge the records of a run");
  score_cmd->add_option("--run-dir", run_dir)->capture_default_str();

  std::string manifest_path;
  std::string views_csv = "bucket,curves,weakest-link,variance,length";
  std::string out_dir = "report";
  double margin = 0.05;
  auto* report_cmd = app.add_subcommand("report", "Aggregate judged records into tables and charts");
  report_cmd->add_option("--run", manifest_path, "manifest.json of the run")->required();
  report_cmd->add_option("--views", views_csv)->capture_default_str();
  report_cmd->add_option("--out", out_dir)->capture_default_str();
  report_cmd->add_option("--margin", margin, "weakest-link margin")->capture_default_str();

  std::string params_path;
  std::string grid = "default";
  std::string sim_mode;
  std::size_t trials = 200;
  std::string sim_kind = "musique";
  std::string sim_out = "sim";
  int sim_parallelism = 1;
  auto* sim_cmd = app.add_subcommand("simulate", "Run the full grid against the simulated reader");
  sim_cmd->add_option("--params", params_path, "reader parameters (JSON)");
  sim_cmd->add_option("--grid", grid, "default | spread | cross")->capture_default_str();
  sim_cmd->add_option("--mode", sim_mode, "analytic | sampled (overrides the params file)");
  sim_cmd->add_option("--trials", trials, "trials per cell (synthetic examples)")->capture_default_str();
  sim_cmd->add_option("--kind", sim_kind, "musique | neoqa")->capture_default_str();
  sim_cmd->add_option("--out", sim_out)->capture_default_str();
  sim_cmd->add_option("--parallelism", sim_parallelism)->capture_default_str();
  sim_cmd->add_option("--views", views_csv)->capture_default_str();

  std::vector<std::string> dump_dirs;
  std::vector<std::string> baseline_dirs;
  std::string axis = "layer";
  bool normalize_docs = false;
  std::string heat_out = "heatmap";
  std::size_t min_samples = attn::kMinSamples;
  auto* heat_cmd = app.add_subcommand("heatmap", "Aggregate attention dumps into span heatmaps");
  heat_cmd->add_option("--dumps", dump_dirs, "dump directories (manifest.json + attn.f32)")->required();
  heat_cmd->add_option("--baseline", baseline_dirs, "dumps subtracted from --dumps (difference map)");
  heat_cmd->add_option("--axis", axis, "layer | head")->capture_default_str();
  heat_cmd->add_flag("--doc-normalize", normalize_docs, "keep documents and rescale rows to 1");
  heat_cmd->add_option("--min-samples", min_samples)->capture_default_str();
  heat_cmd->add_option("--out", heat_out)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (plan_cmd->parsed()) {
      if (dry_run) {
        PlanSummary s = count_cells(plan_opts.config());
        const LoadResult loaded = load_dataset(plan_opts.dataset, plan_opts.config().dataset);
        for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << '\n';
        s.examples = loaded.examples.size();
        s.trials = s.examples * s.total_cells;
        print_summary(s);
        return 0;
      }
      const LoadedRun r = create_run(plan_opts);
      print_summary(r.plan.summary);
      std::cout << "run directory: " << plan_opts.run_dir << '\n';
      return 0;
    }
    if (run_cmd->parsed()) {
      const RunPaths paths{run_opts.run_dir};
      const bool existing = fs::exists(paths.manifest());
      LoadedRun r = existing ? load_run(paths) : create_run(run_opts);
      if (existing &&
          config_to_json(r.manifest.config) != config_to_json(run_opts.config())) {
        throw ConfigError("run directory " + paths.dir.string() + " holds a different configuration; use resume");
      }
      return execute_run(paths, r, endpoint, token_env, timeout, exec);
    }
    if (resume_cmd->parsed()) {
      const RunPaths paths{run_dir};
      LoadedRun r = load_run(paths);
      return execute_run(paths, r, endpoint, token_env, timeout, exec);
    }
    if (status_cmd->parsed()) {
      const RunPaths paths{run_dir};
      const LoadedRun r = load_run(paths);
      const RunStatus st = run_status(r.plan.specs, read_records(paths.records()));
      print_summary(r.plan.summary);
      std::cout << "completed: " << st.completed << "\nfailed: " << st.failed << "\npending: " << st.pending
                << '\n';
      return 0;
    }
    if (score_cmd->parsed()) {
      const RunPaths paths{run_dir};
      const ScoreResult s = score_run(paths, load_run(paths));
      std::cout << "judged " << s.judgments.size() << " records (" << s.errored_records << " errored, "
                << s.scoring_errors << " unmatched)\n";
      for (const auto& w : s.warnings) std::cerr << "warning: " << w << '\n';
      return 0;
    }
    if (report_cmd->parsed()) {
      const RunPaths paths{fs::path(manifest_path).parent_path()};
      const LoadedRun r = load_run(paths);
      const ScoreResult s = score_run(paths, r);
      const Report rep = build_report(s.table(), r.manifest.config.buckets, margin);
      print_written(emit(rep, out_dir, parse_views(views_csv)));
      print_weakest(rep.weakest);
      return 0;
    }
    if (sim_cmd->parsed()) {
      const auto started = std::chrono::steady_clock::now();
      sim::ReaderParams params = params_path.empty() ? sim::ReaderParams{} : sim::load_params(params_path);
      if (!sim_mode.empty()) params.mode = sim::sim_mode_from_string(sim_mode);
      RunConfig config;
      config.dataset = dataset_kind_from_string(sim_kind);
      config.template_id = template_ids(config.dataset).front();
      config.model_id = "simreader";
      if (grid == "spread") {
        config.protocols = {Protocol::Spread};
      } else if (grid == "cross") {
        config.protocols = {Protocol::Cross};
      } else if (grid != "default") {
        throw ConfigError("unknown grid: " + grid);
      }
      const auto corpus = sim::synthetic_corpus(config.dataset, trials, params.seed);
      const sim::Simulation result = sim::simulate(corpus, config, params, sim_parallelism);

      fs::create_directories(sim_out);
      std::ostringstream recs;
      for (const auto& rec : result.records) recs << record_to_json(rec).dump() << '\n';
      write_file(fs::path(sim_out) / "records.jsonl", recs.str());
      write_file(fs::path(sim_out) / "scores.jsonl", scores_jsonl(result.scores));
      write_file(fs::path(sim_out) / "params.json", sim::params_to_json(params).dump(2) + "\n");
      const Report rep = build_report(result.table, config.buckets);
      print_summary(result.plan.summary);
      std::cout << "mode: " << sim::to_string(params.mode) << '\n';
      print_written(emit(rep, fs::path(sim_out) / "report", parse_views(views_csv)));
      print_weakest(rep.weakest);
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      std::cout << "elapsed: " << secs << " s\n";
      return 0;
    }
    if (heat_cmd->parsed()) {
      const attn::Axis ax = axis == "head" ? attn::Axis::Head : attn::Axis::Layer;
      if (axis != "head" && axis != "layer") throw ConfigError("unknown axis: " + axis);
      auto aggregate = [&](const std::vector<std::string>& dirs) {
        std::vector<attn::AttentionDump> dumps;
        for (const auto& d : dirs) dumps.push_back(attn::load_dump(d));
        auto ms = ax == attn::Axis::Layer
                      ? attn::layer_matrices(dumps)
                      : attn::head_matrices(dumps, attn::default_valid_layers(dumps.front().layers));
        if (normalize_docs) {
          for (auto& m : ms) m = attn::doc_normalize(m);
        }
        return attn::average(ms, min_samples);
      };
      attn::SpanMatrix m = aggregate(dump_dirs);
      const bool is_diff = !baseline_dirs.empty();
      if (is_diff) m = attn::diff(m, aggregate(baseline_dirs));
      fs::create_directories(heat_out);
      const std::string stem = std::string(axis) + (is_diff ? "_diff" : "");
      write_file(fs::path(heat_out) / (stem + ".csv"), attn::matrix_csv(m));
      write_file(fs::path(heat_out) / (stem + ".svg"),
                 attn::matrix_svg(m, (axis == "layer" ? "Layer" : "Head") + std::string(" x span attention"),
                                  !is_diff, is_diff));
      if (m.low_sample) std::cerr << "warning: only " << m.samples << " instances (< " << min_samples << ")\n";
      std::cout << "wrote " << (fs::path(heat_out) / (stem + ".csv")).string() << " and .svg\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
