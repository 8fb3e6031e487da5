#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>

#include "cli.hpp"
#include "infsamp/engine.hpp"
#include "infsamp/error.hpp"
#include "infsamp/grpo.hpp"
#include "infsamp/memory.hpp"
#include "infsamp/planner.hpp"
#include "infsamp/trace.hpp"

namespace infsamp::cli {

namespace {

using ojson = nlohmann::ordered_json;

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write '" + path + "'");
  f << content;
  if (!f) throw IoError("failed writing '" + path + "'");
}

// Writes to --out when given, otherwise to stdout.
void emit(const std::string& out_path, const std::string& content, std::ostream& out) {
  if (out_path.empty()) {
    out << content;
  } else {
    write_file(out_path, content);
  }
}

struct Common {
  std::string out;
  std::string manifest;
  std::vector<std::string> inputs;
  ojson config = ojson::object();
  ojson seeds = ojson::object();
};

void add_output(CLI::App* cmd, Common& c, bool out_required = false) {
  auto* opt = cmd->add_option("--out", c.out, "Output file (stdout when omitted)");
  if (out_required) opt->required();
  cmd->add_option("--manifest", c.manifest, "Write a run manifest to this path (requires --out)");
}

struct SimFlags {
  std::string trace;
  int group_size = 0;
  int micro_size = 1;
  double epsilon = 0.5;
  std::string predictor = "oracle";
  double noise_sigma = 0.0;
  std::int64_t constant_len = 1;
  std::int64_t prefix_k = 0;
  std::uint64_t seed = 0;
  std::string bin_mode = "groups";
  bool exclude_prefix_steps = false;
  bool release_prefix_kv = false;
  std::string dynamic_dist;
  std::int64_t dynamic_max_len = 1024;
  std::optional<std::uint64_t> dynamic_seed;
  std::size_t exact_limit = kDefaultExactJobLimit;
};

void add_predictor_flags(CLI::App* cmd, SimFlags& f) {
  cmd->add_option("--predictor", f.predictor, "oracle, noisy, constant or file (pred_len column)")
      ->capture_default_str();
  cmd->add_option("--noise-sigma", f.noise_sigma, "Relative noise for the noisy predictor")->capture_default_str();
  cmd->add_option("--constant-len", f.constant_len, "Prediction of the constant predictor")->capture_default_str();
  cmd->add_option("--prefix-k", f.prefix_k, "Prefix tokens decoded before prediction")->capture_default_str();
  cmd->add_option("--seed", f.seed, "Seed mixed into predictor and stream randomness")->capture_default_str();
}

void add_sim_flags(CLI::App* cmd, SimFlags& f) {
  cmd->add_option("--trace", f.trace, "Trace CSV")->required();
  cmd->add_option("--group-size", f.group_size, "G; 0 takes it from the trace")->capture_default_str();
  cmd->add_option("--micro-size", f.micro_size, "g, concurrent decoding slots")->capture_default_str();
  cmd->add_option("--epsilon", f.epsilon, "FPTAS tolerance")->capture_default_str();
  add_predictor_flags(cmd, f);
  cmd->add_option("--bin-mode", f.bin_mode, "groups (N = G/g plan groups) or slots (g bins)")->capture_default_str();
  cmd->add_flag("--exclude-prefix-steps", f.exclude_prefix_steps, "Do not count prefix-phase steps");
  cmd->add_flag("--release-prefix-kv", f.release_prefix_kv, "Paused samples do not hold their prefix KV");
  cmd->add_option("--dynamic-dist", f.dynamic_dist, "Stream distribution for dynamic (default: cycle the trace)");
  cmd->add_option("--dynamic-max-len", f.dynamic_max_len, "Length cap of the dynamic stream")->capture_default_str();
  cmd->add_option("--dynamic-seed", f.dynamic_seed, "Dynamic stream seed (default: --seed)");
  cmd->add_option("--exact-limit", f.exact_limit, "Largest G solved exactly by the oracle strategy")
      ->capture_default_str();
}

PredictorConfig predictor_config(const SimFlags& f) {
  PredictorConfig p;
  p.kind = parse_predictor_kind(f.predictor);
  p.noise_sigma = f.noise_sigma;
  p.constant_value = f.constant_len;
  p.prefix_k = f.prefix_k;
  p.validate();
  return p;
}

SimConfig sim_config(const SimFlags& f) {
  SimConfig cfg;
  cfg.group_size = f.group_size;
  cfg.micro_size = f.micro_size;
  cfg.epsilon = f.epsilon;
  cfg.predictor = predictor_config(f);
  cfg.count_prefix_steps = !f.exclude_prefix_steps;
  cfg.retain_prefix_kv = !f.release_prefix_kv;
  cfg.bin_mode = parse_bin_mode(f.bin_mode);
  cfg.seed = f.seed;
  cfg.dynamic_stream_seed = f.dynamic_seed.value_or(f.seed);
  if (!f.dynamic_dist.empty()) cfg.dynamic_stream = DynamicStream{parse_distribution(f.dynamic_dist), f.dynamic_max_len};
  cfg.exact_oracle_limit = f.exact_limit;
  return cfg;
}

ojson config_json(const SimConfig& cfg) {
  ojson j;
  j["group_size"] = cfg.group_size;
  j["micro_size"] = cfg.micro_size;
  j["epsilon"] = cfg.epsilon;
  j["predictor"] = to_string(cfg.predictor.kind);
  j["noise_sigma"] = cfg.predictor.noise_sigma;
  j["constant_len"] = cfg.predictor.constant_value;
  j["prefix_k"] = cfg.predictor.prefix_k;
  j["count_prefix_steps"] = cfg.count_prefix_steps;
  j["retain_prefix_kv"] = cfg.retain_prefix_kv;
  j["bin_mode"] = to_string(cfg.bin_mode);
  j["dynamic_stream"] = cfg.dynamic_stream ? to_string(cfg.dynamic_stream->dist) : std::string("trace");
  j["exact_oracle_limit"] = cfg.exact_oracle_limit;
  return j;
}

ojson seeds_json(const SimConfig& cfg) {
  return ojson{{"seed", cfg.seed}, {"dynamic_stream_seed", cfg.dynamic_stream_seed}};
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<int> int_list(const std::string& text, const char* flag) {
  std::vector<int> out;
  for (const auto& item : split_list(text)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(std::string(flag) + " has a non-integer entry '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError(std::string(flag) + " is empty");
  return out;
}

// ---------------------------------------------------------------------------

std::string cmd_gen_trace(const std::string& dist_text, int count, std::int64_t max_len, std::int64_t prompt_len,
                          std::uint64_t seed, Common& c, std::ostream& out) {
  const auto dist = parse_distribution(dist_text);
  if (count < 1) throw ConfigError("--count must be >= 1");
  const auto trace = generate_trace(dist, count, max_len, prompt_len, seed);
  std::ostringstream os;
  write_trace(trace, os);
  write_file(c.out, os.str());
  c.config = ojson{{"dist", to_string(dist)}, {"count", count}, {"max_len", max_len}, {"prompt_len", prompt_len}};
  c.seeds = ojson{{"seed", seed}};
  out << "count=" << trace.group_size() << " mean=" << fixed6(trace.mean_length()) << " max=" << trace.max_length()
      << '\n';
  return os.str();
}

void cmd_plan(const SimFlags& f, Common& c, std::ostream& out) {
  auto cfg = sim_config(f);
  auto trace = load_trace(f.trace);
  c.inputs.push_back(f.trace);
  const auto G = static_cast<int>(trace.group_size());
  if (cfg.group_size != 0 && cfg.group_size != G) {
    throw ConfigError("--group-size " + std::to_string(cfg.group_size) + " does not match trace size " +
                      std::to_string(G));
  }
  if (cfg.micro_size < 1) throw ConfigError("--micro-size must be >= 1");
  int n_bins = cfg.micro_size;
  if (cfg.bin_mode == BinMode::groups) {
    if (G % cfg.micro_size != 0) {
      throw ConfigError("group size " + std::to_string(G) + " is not divisible by micro size " +
                        std::to_string(cfg.micro_size));
    }
    n_bins = G / cfg.micro_size;
  }
  PredictorConfig pred = cfg.predictor;
  pred.seed = mix_seed(cfg.seed, pred.seed);
  trace = predict_lengths(std::move(trace), pred);
  const auto plan = fptas_plan(trace.pred_lengths(), n_bins, cfg.epsilon);
  std::ostringstream os;
  write_plan(plan, os);
  emit(c.out, os.str(), out);
  c.config = config_json(cfg);
  c.seeds = seeds_json(cfg);
}

void cmd_simulate(const SimFlags& f, const std::string& strategy, bool with_log, Common& c, std::ostream& out) {
  auto cfg = sim_config(f);
  cfg.strategy = parse_strategy(strategy);
  const auto trace = load_trace(f.trace);
  c.inputs.push_back(f.trace);
  const auto result = simulate(trace, cfg);
  emit(c.out, sim_result_to_json(result, with_log), out);
  c.config = config_json(cfg);
  c.config["strategy"] = to_string(cfg.strategy);
  c.seeds = seeds_json(cfg);
}

void cmd_compare(const SimFlags& f, const std::string& strategies, const std::string& schedulers,
                 const std::string& format, Common& c, std::ostream& out) {
  if (format != "csv" && format != "json-lines") throw ConfigError("--format must be csv or json-lines");
  auto cfg = sim_config(f);
  const auto trace = load_trace(f.trace);
  c.inputs.push_back(f.trace);
  c.config = config_json(cfg);

  std::vector<ComparisonRow> rows;
  if (!schedulers.empty()) {
    std::vector<SchedulerVariant> variants;
    for (const auto& s : split_list(schedulers)) variants.push_back(parse_scheduler_variant(s));
    rows = run_scheduler_comparison(trace, cfg, variants);
    c.config["schedulers"] = schedulers;
  } else {
    std::vector<Strategy> list;
    for (const auto& s : split_list(strategies)) list.push_back(parse_strategy(s));
    rows = run_comparison(trace, cfg, list);
    c.config["strategies"] = strategies;
  }
  c.config["format"] = format;
  c.seeds = seeds_json(cfg);

  std::ostringstream os;
  if (format == "csv") {
    os << "strategy,total_steps,step_ratio,avg_len,len_ratio,peak_kv_tokens\n";
    for (const auto& r : rows) {
      os << r.label << ',' << r.total_steps << ',' << fixed6(r.step_ratio) << ',' << fixed6(r.avg_len) << ','
         << fixed6(r.len_ratio) << ',' << r.peak_kv_tokens << '\n';
    }
  } else {
    for (const auto& r : rows) {
      ojson j;
      j["strategy"] = r.label;
      j["total_steps"] = r.total_steps;
      j["step_ratio"] = r.step_ratio;
      j["avg_len"] = r.avg_len;
      j["len_ratio"] = r.len_ratio;
      j["peak_kv_tokens"] = r.peak_kv_tokens;
      os << j.dump() << '\n';
    }
  }
  emit(c.out, os.str(), out);
}

void cmd_memory(const std::string& model_path, const std::string& group_sizes, const std::string& micro_sizes,
                const std::string& trace_path, const std::string& dist_text, std::int64_t max_len,
                std::uint64_t seed, Common& c, std::ostream& out) {
  const auto model = load_kv_model(model_path);
  c.inputs.push_back(model_path);
  const auto Gs = int_list(group_sizes, "--group-sizes");
  const auto gs = int_list(micro_sizes, "--micro-sizes");

  std::vector<ScalingRow> rows;
  if (!trace_path.empty()) {
    const auto trace = load_trace(trace_path);
    c.inputs.push_back(trace_path);
    std::vector<Trace> traces;
    for (int G : Gs) {
      if (G < 1 || static_cast<std::size_t>(G) > trace.group_size()) {
        throw ConfigError("group size " + std::to_string(G) + " exceeds the trace's " +
                          std::to_string(trace.group_size()) + " samples");
      }
      Trace t = trace;
      t.samples.resize(static_cast<std::size_t>(G));
      traces.push_back(std::move(t));
    }
    rows = scaling_report(traces, model, gs);
  } else {
    rows = scaling_report(TraceGenerator{parse_distribution(dist_text), max_len, seed}, model, Gs, gs);
    c.config["dist"] = dist_text;
    c.config["max_len"] = max_len;
  }
  std::ostringstream os;
  write_scaling_csv(rows, os);
  emit(c.out, os.str(), out);
  c.config["group_sizes"] = group_sizes;
  c.config["micro_sizes"] = micro_sizes;
  c.config["kv_bytes_per_token"] = kv_bytes_per_token(model);
  c.seeds = ojson{{"seed", seed}};
}

void cmd_objective(const std::string& tokens, const std::string& rewards, int micro_size, const GrpoConfig& g,
                   Common& c, std::ostream& out) {
  const auto samples = load_scores(tokens, rewards);
  c.inputs.push_back(tokens);
  c.inputs.push_back(rewards);
  const auto micro = micro_batched_objective(samples, micro_size, g);
  const auto full = micro_batched_objective(samples, static_cast<int>(samples.size()), g);
  std::ostringstream os;
  os << "group,objective\n";
  for (std::size_t n = 0; n < micro.micro_values.size(); ++n) os << n + 1 << ',' << exact(micro.micro_values[n]) << '\n';
  os << "total," << exact(micro.total) << '\n';
  os << "full," << exact(full.total) << '\n';
  emit(c.out, os.str(), out);
  c.config = ojson{{"micro_size", micro_size},
                   {"clip_eps", g.clip_eps},
                   {"beta", g.beta},
                   {"advantage", to_string(g.advantage_mode)},
                   {"kl", to_string(g.kl_mode)}};
}

// Re-executes a manifest's argv, optionally redirecting --out into out_dir,
// and checks every artifact digest against the recorded one.
void cmd_rerun(const std::string& manifest_path, const std::string& out_dir, std::ostream& out,
               std::ostream& err) {
  const auto m = read_manifest(manifest_path);
  for (const auto& [path, digest] : m.inputs) {
    if (sha256_file(path) != digest) throw IntegrityError("input '" + path + "' changed since the manifest was written");
  }
  auto argv = m.argv;
  std::vector<std::pair<std::string, std::string>> expected;  // new path, digest
  for (const auto& [path, digest] : m.artifacts) expected.emplace_back(path, digest);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    for (std::size_t i = 0; i + 1 < argv.size(); ++i) {
      if (argv[i] == "--out") {
        argv[i + 1] = (std::filesystem::path(out_dir) / std::filesystem::path(argv[i + 1]).filename()).string();
      }
    }
    for (auto& [path, digest] : expected) {
      path = (std::filesystem::path(out_dir) / std::filesystem::path(path).filename()).string();
    }
  }
  std::ostringstream sink;
  const int status = run(argv, sink, err);
  if (status != 0) throw IntegrityError("re-run exited with status " + std::to_string(status));
  for (const auto& [path, digest] : expected) {
    if (sha256_file(path) != digest) throw IntegrityError("artifact '" + path + "' differs from the manifest");
    out << "match " << path << '\n';
  }
}

std::vector<std::string> strip_manifest(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--manifest") {
      ++i;
      continue;
    }
    if (args[i].rfind("--manifest=", 0) == 0) continue;
    out.push_back(args[i]);
  }
  return out;
}

void finish_manifest(const std::vector<std::string>& args, const Common& c) {
  if (c.manifest.empty()) return;
  RunManifest m;
  m.argv = strip_manifest(args);
  m.config = c.config;
  m.seeds = c.seeds;
  m.inputs = c.inputs;
  m.artifacts = {c.out};
  m.write(c.manifest);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deterministic simulator for grouped-sampling decode schedulers", "infsamp"};
  app.set_version_flag("--version", version());
  app.require_subcommand(1);

  Common common;
  SimFlags sim;

  auto* gen = app.add_subcommand("gen-trace", "Generate a synthetic length trace");
  std::string dist_text = "lognormal:5.0:0.6";
  int count = 32;
  std::int64_t max_len = 1024;
  std::int64_t prompt_len = 0;
  std::uint64_t seed = 0;
  gen->add_option("--dist", dist_text, "lognormal:MU:SIGMA, uniform:LO:HI or bimodal:L1:L2:P")->capture_default_str();
  gen->add_option("--count", count, "Samples (G)")->capture_default_str();
  gen->add_option("--max-len", max_len, "Length cap")->capture_default_str();
  gen->add_option("--prompt-len", prompt_len, "Prompt tokens")->capture_default_str();
  gen->add_option("--seed", seed, "Generator seed")->capture_default_str();
  add_output(gen, common, true);

  auto* plan = app.add_subcommand("plan", "Export the FPTAS grouping plan over predicted lengths");
  add_sim_flags(plan, sim);
  add_output(plan, common);

  auto* simulate_cmd = app.add_subcommand("simulate", "Simulate one strategy and print a JSON result");
  std::string strategy = "naive";
  bool with_log = false;
  add_sim_flags(simulate_cmd, sim);
  simulate_cmd->add_option("--strategy", strategy, "full, naive, fixed, dynamic, infinite or oracle")
      ->capture_default_str();
  simulate_cmd->add_flag("--log", with_log, "Include the schedule log");
  add_output(simulate_cmd, common);

  auto* compare = app.add_subcommand(
      "compare",
      "Compare strategies, or scheduler compositions with --schedulers.\n"
      "fptas-only: samples start in FPTAS plan order and freed slots take the next planned sample (FIFO).\n"
      "sjf-only: samples start in trace order and freed slots take the shortest predicted pending sample.\n"
      "infinite: plan order start with SJF refill. Ratios are against naive (strategies) or fifo (schedulers).");
  std::string strategies = "naive,fixed,infinite";
  std::string schedulers;
  std::string format = "csv";
  add_sim_flags(compare, sim);
  auto* strat_opt = compare->add_option("--strategies", strategies, "Comma-separated strategies")->capture_default_str();
  auto* sched_opt = compare->add_option("--schedulers", schedulers, "Comma-separated: fifo,fptas-only,sjf-only,infinite");
  sched_opt->excludes(strat_opt);
  compare->add_option("--format", format, "csv or json-lines")->capture_default_str();
  add_output(compare, common);

  auto* memory = app.add_subcommand("memory", "Peak-memory scaling report for full and naive decoding");
  std::string model_path;
  std::string group_sizes = "8,16,32";
  std::string micro_sizes = "1,2,4";
  std::string mem_trace;
  std::string mem_dist = "lognormal:5.0:0.6";
  memory->add_option("--model-config", model_path, "key=value model file")->required();
  memory->add_option("--group-sizes", group_sizes, "Comma-separated G values")->capture_default_str();
  memory->add_option("--micro-sizes", micro_sizes, "Comma-separated g values")->capture_default_str();
  auto* mt = memory->add_option("--trace", mem_trace, "Trace CSV; G uses its first G samples");
  auto* md = memory->add_option("--dist", mem_dist, "Distribution for a fresh trace per G")->capture_default_str();
  mt->excludes(md);
  memory->add_option("--max-len", max_len, "Length cap for --dist")->capture_default_str();
  memory->add_option("--seed", seed, "Generator seed for --dist")->capture_default_str();
  add_output(memory, common);

  auto* objective = app.add_subcommand("objective", "GRPO objective per micro group and over the full group");
  std::string tokens_path;
  std::string rewards_path;
  int obj_micro = 1;
  GrpoConfig grpo;
  std::string adv_mode = "std_norm";
  std::string kl_mode = "k3";
  objective->add_option("--tokens", tokens_path, "CSV sample_id,logp_new,logp_old,logp_ref")->required();
  objective->add_option("--rewards", rewards_path, "CSV sample_id,rm_score")->required();
  objective->add_option("--micro-size", obj_micro, "g")->capture_default_str();
  objective->add_option("--clip-eps", grpo.clip_eps, "Clip range")->capture_default_str();
  objective->add_option("--beta", grpo.beta, "KL weight")->capture_default_str();
  objective->add_option("--advantage", adv_mode, "std_norm or mean_only")->capture_default_str();
  objective->add_option("--kl", kl_mode, "k3 or logdiff")->capture_default_str();
  add_output(objective, common);

  auto* rerun = app.add_subcommand("rerun", "Re-execute a manifest and verify artifact digests");
  std::string rerun_manifest;
  std::string out_dir;
  rerun->add_option("--manifest", rerun_manifest, "Manifest written by --manifest")->required();
  rerun->add_option("--out-dir", out_dir, "Write artifacts here instead of their recorded paths");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << version() << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << e.what() << '\n';
    return 2;
  }

  try {
    if (!common.manifest.empty() && common.out.empty()) throw ConfigError("--manifest requires --out");
    if (gen->parsed()) {
      cmd_gen_trace(dist_text, count, max_len, prompt_len, seed, common, out);
    } else if (plan->parsed()) {
      cmd_plan(sim, common, out);
    } else if (simulate_cmd->parsed()) {
      cmd_simulate(sim, strategy, with_log, common, out);
    } else if (compare->parsed()) {
      cmd_compare(sim, strategies, schedulers, format, common, out);
    } else if (memory->parsed()) {
      cmd_memory(model_path, group_sizes, micro_sizes, mem_trace, mem_dist, max_len, seed, common, out);
    } else if (objective->parsed()) {
      grpo.advantage_mode = parse_advantage_mode(adv_mode);
      grpo.kl_mode = parse_kl_mode(kl_mode);
      cmd_objective(tokens_path, rewards_path, obj_micro, grpo, common, out);
    } else if (rerun->parsed()) {
      cmd_rerun(rerun_manifest, out_dir, out, err);
      return 0;
    }
    finish_manifest(args, common);
  } catch (const Error& e) {
    err << "error: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace infsamp::cli
