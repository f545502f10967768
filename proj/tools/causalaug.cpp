#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "causalaug/adversarial.hpp"
#include "causalaug/backend.hpp"
#include "causalaug/copa.hpp"
#include "causalaug/corpus.hpp"
#include "causalaug/distractor.hpp"
#include "causalaug/error.hpp"
#include "causalaug/eval.hpp"
#include "causalaug/log.hpp"
#include "causalaug/manifest.hpp"
#include "causalaug/parallel.hpp"
#include "causalaug/rng.hpp"

namespace fs = std::filesystem;
using namespace causalaug;

namespace {

std::vector<CopaItem> load_dataset(const std::string& path, bool xml) {
  if (xml || fs::path(path).extension() == ".xml") {
    return import_xml(read_file(path));
  }
  return read_items(path);
}

nlohmann::json field_stats_json(const FieldStats& f) {
  return {{"min", f.min}, {"max", f.max}, {"mean", f.mean}, {"median", f.median}, {"std", f.std}};
}

nlohmann::json dataset_stats_json(const DatasetStats& s) {
  return {{"premise", field_stats_json(s.premise)},
          {"choice1", field_stats_json(s.choice1)},
          {"choice2", field_stats_json(s.choice2)},
          {"total", field_stats_json(s.total)},
          {"premise_ratio", field_stats_json(s.premise_ratio)}};
}

void print_stats_table(const DatasetStats& s) {
  auto row = [](const char* name, const FieldStats& f) {
    std::printf("%-14s %7.1f %7.1f %7.1f %7.1f %7.1f\n", name, f.min, f.max, f.mean, f.median,
                f.std);
  };
  std::printf("%-14s %7s %7s %7s %7s %7s\n", "field", "min", "max", "mean", "median", "std");
  row("premise", s.premise);
  row("choice1", s.choice1);
  row("choice2", s.choice2);
  row("total", s.total);
  row("premise_ratio", s.premise_ratio);
}

std::vector<std::string> expand_corpus_paths(const std::vector<std::string>& inputs) {
  std::vector<std::string> shards;
  for (const auto& input : inputs) {
    if (fs::is_directory(input)) {
      std::vector<std::string> in_dir;
      for (const auto& entry : fs::directory_iterator(input)) {
        if (entry.is_regular_file()) in_dir.push_back(entry.path().string());
      }
      std::sort(in_dir.begin(), in_dir.end());
      shards.insert(shards.end(), in_dir.begin(), in_dir.end());
    } else if (fs::is_regular_file(input)) {
      shards.push_back(input);
    } else {
      throw ArgumentError("corpus path does not exist: " + input);
    }
  }
  if (shards.empty()) throw ArgumentError("no corpus shards found");
  return shards;
}

std::string sibling_items_path(const std::string& out) {
  fs::path p(out);
  if (p.extension() == ".jsonl") return (p.parent_path() / p.stem()).string() + ".items.jsonl";
  return out + ".items.jsonl";
}

nlohmann::json filter_stats_json(const FilterStats& stats) {
  return {{"sentences", stats.sentences},
          {"with_connective", stats.with_connective},
          {"accepted", stats.accepted},
          {"utf8_skipped", stats.utf8_skipped},
          {"rejects", stats.rejects}};
}

struct StatsArgs {
  std::string input, out;
  bool xml = false;
  bool as_json = false;
};

int run_stats(const StatsArgs& args) {
  auto items = load_dataset(args.input, args.xml);
  auto stats = dataset_stats(items);
  nlohmann::json j = dataset_stats_json(stats);
  j["items"] = items.size();
  if (args.as_json) {
    std::cout << j.dump() << "\n";
  } else {
    print_stats_table(stats);
  }
  if (!args.out.empty()) {
    std::ofstream out(args.out, std::ios::binary);
    if (!out) throw ArgumentError("cannot open output file: " + args.out);
    out << j.dump(2) << "\n";
    write_manifest(args.out, {{"subcommand", "stats"},
                              {"inputs", {args.input}},
                              {"output", args.out},
                              {"counts", {{"items", items.size()}}}});
  }
  return 0;
}

struct ExtractArgs {
  std::vector<std::string> corpus;
  std::string out, connectives, ic_lexicon, abbreviations, validator_cmd, stats_path;
  std::vector<std::string> accept_labels;
  bool fail_open = false;
  bool strict = false;
  int jobs = default_jobs();
};

int run_extract(const ExtractArgs& args) {
  auto shards = expand_corpus_paths(args.corpus);
  FilterConfig config;
  if (!args.connectives.empty()) config.connectives = load_connectives(args.connectives);
  config.ic_lexicon = load_word_list(args.ic_lexicon);
  if (!args.abbreviations.empty()) {
    config.segmenter.abbreviations = load_word_list(args.abbreviations);
  }
  config.segmenter.strict_utf8 = args.strict;
  config.validator_fail_open = args.fail_open;
  if (!args.accept_labels.empty()) {
    config.accept_labels = StringSet(args.accept_labels.begin(), args.accept_labels.end());
  }
  std::unique_ptr<CommandValidator> validator;
  if (!args.validator_cmd.empty()) {
    validator = std::make_unique<CommandValidator>(args.validator_cmd);
    config.validator = validator.get();
  }
  config.jobs = args.jobs;

  FilterResult result = extract_corpus(shards, config);
  write_pairs(args.out, result.pairs);
  nlohmann::json counts = filter_stats_json(result.stats);
  if (!args.stats_path.empty()) {
    std::ofstream stats_out(args.stats_path, std::ios::binary);
    if (!stats_out) throw ArgumentError("cannot open stats file: " + args.stats_path);
    stats_out << counts.dump(2) << "\n";
  }
  write_manifest(args.out, {{"subcommand", "extract"},
                            {"inputs", shards},
                            {"output", args.out},
                            {"params",
                             {{"connectives", args.connectives},
                              {"ic_lexicon", args.ic_lexicon},
                              {"abbreviations", args.abbreviations},
                              {"validator_cmd", args.validator_cmd},
                              {"accept_labels", args.accept_labels},
                              {"fail_open", args.fail_open},
                              {"strict", args.strict}}},
                            {"counts", counts}});
  log_info("extract finished", counts);
  return 0;
}

struct AugmentArgs {
  std::string pairs, out, backend_url, stopwords_path, strategy = "random";
  std::uint64_t seed = 0;
  int max_retries = 5;
  int max_new_words = 16;
  int first_id = 1;
  bool dedup = false;
  int jobs = default_jobs();
  double timeout = 30.0;
};

int run_augment(const AugmentArgs& args) {
  auto pairs = read_pairs(args.pairs);
  AugmentOptions options;
  options.strategy = strategy_from_string(args.strategy);
  options.seed = args.seed;
  options.lm.max_retries = args.max_retries;
  options.lm.max_new_words = args.max_new_words;
  options.dedup = args.dedup;
  options.first_id = args.first_id;
  options.jobs = args.jobs;
  if (!args.stopwords_path.empty()) options.stopwords = load_word_list(args.stopwords_path);
  std::unique_ptr<HttpBackend> backend;
  if (!args.backend_url.empty()) {
    backend = std::make_unique<HttpBackend>(args.backend_url, args.timeout);
    options.backend = backend.get();
  }

  AugmentStats stats;
  auto augmented = augment_pairs(pairs, options, &stats);
  std::vector<CopaItem> items;
  items.reserve(augmented.size());
  for (const auto& a : augmented) items.push_back(to_copa(a));
  write_items(args.out, items);
  nlohmann::json counts{{"pairs", pairs.size()},
                        {"produced", stats.produced},
                        {"skipped", stats.skipped},
                        {"duplicates", stats.duplicates}};
  write_manifest(args.out, {{"subcommand", "augment"},
                            {"inputs", {args.pairs}},
                            {"output", args.out},
                            {"seed", args.seed},
                            {"params",
                             {{"strategy", args.strategy},
                              {"max_retries", args.max_retries},
                              {"max_new_words", args.max_new_words},
                              {"dedup", args.dedup},
                              {"first_id", args.first_id},
                              {"stopwords", args.stopwords_path}}},
                            {"counts", counts}});
  log_info("augment finished", counts);
  return 0;
}

struct AttackArgs {
  std::string data, backend_url, lexicon, annotations, out, adversarial_out;
  std::uint64_t seed = 0;
  AcoParams params;
  bool pos_only = false;
  int jobs = default_jobs();
  double timeout = 30.0;
};

int run_attack(const AttackArgs& args) {
  auto items = read_items(args.data);
  SubstitutionLexicon lexicon(args.lexicon);
  AnnotationStore annotations(args.annotations);
  HttpBackend backend(args.backend_url, args.timeout);

  AttackOptions options;
  options.params = args.params;
  options.params.rng_seed = args.seed;
  options.pos_only = args.pos_only;
  options.jobs = args.jobs;

  AttackSummary summary = attack_dataset(items, backend, lexicon, annotations, options);

  std::ofstream out(args.out, std::ios::binary);
  if (!out) throw ArgumentError("cannot open output file: " + args.out);
  for (const auto& r : summary.results) out << attack_result_to_json(r).dump() << "\n";
  if (!out) throw Error("write failed: " + args.out);

  std::string items_path =
      args.adversarial_out.empty() ? sibling_items_path(args.out) : args.adversarial_out;
  write_items(items_path, summary.adversarial_items());

  nlohmann::json counts{{"items", items.size()},
                        {"attempted", summary.attempted},
                        {"successes", summary.successes},
                        {"errors", summary.errors},
                        {"success_rate", summary.success_rate}};
  write_manifest(args.out, {{"subcommand", "attack"},
                            {"inputs", {args.data, args.lexicon, args.annotations}},
                            {"output", args.out},
                            {"adversarial_output", items_path},
                            {"seed", args.seed},
                            {"params",
                             {{"ants", args.params.ants},
                              {"iterations", args.params.iterations},
                              {"rho", args.params.evaporation},
                              {"tau0", args.params.pheromone_init},
                              {"alpha", args.params.pheromone_exponent},
                              {"beta", args.params.heuristic_exponent},
                              {"max_frac", args.params.max_substitution_fraction},
                              {"pos_only", args.pos_only}}},
                            {"counts", counts}});
  std::cout << counts.dump() << "\n";
  return 0;
}

struct EvalArgs {
  std::string data, out;
  std::vector<std::string> backends;
  int jobs = default_jobs();
  double timeout = 30.0;
};

int run_eval(const EvalArgs& args) {
  auto items = read_items(args.data);
  EvalReport report;
  for (std::size_t i = 0; i < args.backends.size(); ++i) {
    HttpBackend backend(args.backends[i], args.timeout);
    auto [acc, bits] = accuracy(items, backend, args.jobs);
    report.per_seed.push_back({std::to_string(i), acc, std::move(bits)});
    log_info("seed evaluated", {{"seed", i}, {"accuracy", acc}});
  }
  if (report.per_seed.size() >= 5) {
    std::vector<double> accs;
    for (const auto& row : report.per_seed) accs.push_back(row.accuracy);
    report.aggregate = aggregate_seeds(accs);
  }
  write_report(args.out, report);
  nlohmann::json counts{{"items", items.size()}, {"seeds", report.per_seed.size()}};
  nlohmann::json summary{{"seeds", report.per_seed.size()}};
  if (report.aggregate) {
    summary["aggregate"] = {{"min", report.aggregate->min},
                            {"max", report.aggregate->max},
                            {"mean", report.aggregate->mean},
                            {"std", report.aggregate->std}};
  } else {
    summary["accuracy"] = report.per_seed.front().accuracy;
  }
  write_manifest(args.out, {{"subcommand", "eval"},
                            {"inputs", {args.data}},
                            {"output", args.out},
                            {"params", {{"backends", args.backends.size()}}},
                            {"counts", counts}});
  std::cout << summary.dump() << "\n";
  return 0;
}

struct SigtestArgs {
  std::string report_a, report_b, out;
  std::size_t row_a = 0, row_b = 0;
  std::uint64_t iterations = 10000;
  std::uint64_t seed = 0;
  bool exact = false;
  bool monte_carlo = false;
  int jobs = default_jobs();
};

int run_sigtest(const SigtestArgs& args) {
  auto a = read_report(args.report_a);
  auto b = read_report(args.report_b);
  if (args.row_a >= a.per_seed.size()) {
    throw ArgumentError("--row-a " + std::to_string(args.row_a) + " out of range (report has " +
                        std::to_string(a.per_seed.size()) + " rows)");
  }
  if (args.row_b >= b.per_seed.size()) {
    throw ArgumentError("--row-b " + std::to_string(args.row_b) + " out of range (report has " +
                        std::to_string(b.per_seed.size()) + " rows)");
  }
  const auto& row_a = a.per_seed[args.row_a];
  const auto& row_b = b.per_seed[args.row_b];
  ArMode mode = ArMode::automatic;
  if (args.exact) mode = ArMode::exact;
  if (args.monte_carlo) mode = ArMode::monte_carlo;
  double p = ar_test(row_a.correctness, row_b.correctness, args.iterations, args.seed, mode,
                     args.jobs);
  bool used_exact =
      mode == ArMode::exact || (mode == ArMode::automatic && row_a.correctness.size() <= 20);
  nlohmann::json result{{"p_value", p},
                        {"n", row_a.correctness.size()},
                        {"mode", used_exact ? "exact" : "monte_carlo"},
                        {"iterations", args.iterations},
                        {"accuracy_a", row_a.accuracy},
                        {"accuracy_b", row_b.accuracy}};
  std::cout << result.dump() << "\n";
  if (!args.out.empty()) {
    std::ofstream out(args.out, std::ios::binary);
    if (!out) throw ArgumentError("cannot open output file: " + args.out);
    out << result.dump(2) << "\n";
    write_manifest(args.out, {{"subcommand", "sigtest"},
                              {"inputs", {args.report_a, args.report_b}},
                              {"output", args.out},
                              {"seed", args.seed},
                              {"params",
                               {{"row_a", args.row_a},
                                {"row_b", args.row_b},
                                {"iterations", args.iterations},
                                {"mode", used_exact ? "exact" : "monte_carlo"}}},
                              {"counts", {{"n", row_a.correctness.size()}}}});
  }
  return 0;
}

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8000;
  double w = 4.0;
  double b = -1.0;
  std::string canned;
};

int run_stub_serve(const ServeArgs& args) {
  StubServerConfig config;
  config.host = args.host;
  config.port = args.port;
  config.w = args.w;
  config.b = args.b;
  config.canned_path = args.canned;
  StubServer server(config);
  std::cout << nlohmann::json{{"url", server.url()}}.dump() << std::endl;
  log_info("stub server listening", {{"url", server.url()}});
  server.wait();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal data augmentation and adversarial attack toolkit for COPA-style data"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "Configuration file (key=value; sections per subcommand)");
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "debug|info|warn|error|off")->capture_default_str();

  StatsArgs stats_args;
  auto* stats_cmd = app.add_subcommand("stats", "Word-count statistics of a dataset");
  stats_cmd->add_option("--input", stats_args.input, "Dataset file (.jsonl or .xml)")->required();
  stats_cmd->add_flag("--xml", stats_args.xml, "Force XML input");
  stats_cmd->add_flag("--json", stats_args.as_json, "Print machine-readable stats");
  stats_cmd->add_option("--out", stats_args.out, "Also write stats (JSON) to this file");

  ExtractArgs extract_args;
  auto* extract_cmd = app.add_subcommand("extract", "Mine causal clause pairs from raw text");
  extract_cmd->add_option("--corpus", extract_args.corpus, "Corpus files or directories")
      ->required();
  extract_cmd->add_option("--out", extract_args.out, "Output pair file (JSONL)")->required();
  extract_cmd->add_option("--connectives", extract_args.connectives,
                          "Connective spec file (default: built-in 8)");
  extract_cmd->add_option("--ic-lexicon", extract_args.ic_lexicon, "Implicit-causality verb list")
      ->required();
  extract_cmd->add_option("--abbreviations", extract_args.abbreviations,
                          "Abbreviation list for the segmenter");
  extract_cmd->add_option("--validator-cmd", extract_args.validator_cmd,
                          "External relation validator command");
  extract_cmd->add_flag("--validator-fail-open", extract_args.fail_open,
                        "Keep pairs when the validator is unreachable");
  extract_cmd->add_option("--accept-label", extract_args.accept_labels,
                          "Validator label(s) that accept a pair");
  extract_cmd->add_flag("--strict", extract_args.strict, "Hard error on invalid UTF-8");
  extract_cmd->add_option("--stats", extract_args.stats_path, "Write rejection histogram here");
  extract_cmd->add_option("--jobs", extract_args.jobs, "Parallel shard workers")
      ->capture_default_str();

  AugmentArgs augment_args;
  auto* augment_cmd = app.add_subcommand("augment", "Build COPA-style items from clause pairs");
  augment_cmd->add_option("--pairs", augment_args.pairs, "Extracted pair file")->required();
  augment_cmd->add_option("--strategy", augment_args.strategy, "random|overlap|lm")
      ->capture_default_str();
  augment_cmd->add_option("--backend", augment_args.backend_url, "Generation backend URL")
      ->envname("CAUSAL_AUGMENT_BACKEND");
  augment_cmd->add_option("--out", augment_args.out, "Output dataset file")->required();
  augment_cmd->add_option("--seed", augment_args.seed, "Random seed")->required();
  augment_cmd->add_option("--stopwords", augment_args.stopwords_path, "Stopword list file");
  augment_cmd->add_option("--max-retries", augment_args.max_retries, "LM length-retry budget")
      ->capture_default_str();
  augment_cmd->add_option("--max-new-words", augment_args.max_new_words,
                          "LM generation word budget")
      ->capture_default_str();
  augment_cmd->add_flag("--dedup", augment_args.dedup, "Drop exact duplicate items");
  augment_cmd->add_option("--first-id", augment_args.first_id, "First output item id")
      ->capture_default_str();
  augment_cmd->add_option("--jobs", augment_args.jobs, "Parallel pair workers")
      ->capture_default_str();
  augment_cmd->add_option("--timeout", augment_args.timeout, "Backend timeout (seconds)")
      ->capture_default_str();

  AttackArgs attack_args;
  auto* attack_cmd = app.add_subcommand("attack", "ACO word-substitution attack on a dataset");
  attack_cmd->add_option("--data", attack_args.data, "Dataset file")->required();
  attack_cmd->add_option("--backend", attack_args.backend_url, "Victim scoring backend URL")
      ->envname("CAUSAL_AUGMENT_BACKEND")
      ->required();
  attack_cmd->add_option("--subst-lexicon", attack_args.lexicon, "Substitution lexicon (TSV)")
      ->required();
  attack_cmd->add_option("--annotations", attack_args.annotations, "Token annotation file")
      ->required();
  attack_cmd->add_option("--out", attack_args.out, "Attack result file (JSONL)")->required();
  attack_cmd->add_option("--adversarial-out", attack_args.adversarial_out,
                         "Merged-ready items file (default: derived from --out)");
  attack_cmd->add_option("--seed", attack_args.seed, "Random seed")->required();
  attack_cmd->add_option("--ants", attack_args.params.ants, "Ants per iteration")
      ->capture_default_str();
  attack_cmd->add_option("--iters", attack_args.params.iterations, "ACO iterations")
      ->capture_default_str();
  attack_cmd->add_option("--rho", attack_args.params.evaporation, "Evaporation rate")
      ->capture_default_str();
  attack_cmd->add_option("--tau0", attack_args.params.pheromone_init, "Initial pheromone")
      ->capture_default_str();
  attack_cmd->add_option("--alpha", attack_args.params.pheromone_exponent, "Pheromone exponent")
      ->capture_default_str();
  attack_cmd->add_option("--beta", attack_args.params.heuristic_exponent, "Heuristic exponent")
      ->capture_default_str();
  attack_cmd->add_option("--max-frac", attack_args.params.max_substitution_fraction,
                         "Max fraction of positions substituted")
      ->capture_default_str();
  attack_cmd->add_flag("--pos-only", attack_args.pos_only,
                       "Relax the sense constraint to POS only");
  attack_cmd->add_option("--jobs", attack_args.jobs, "Parallel item workers")
      ->capture_default_str();
  attack_cmd->add_option("--timeout", attack_args.timeout, "Backend timeout (seconds)")
      ->capture_default_str();

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Accuracy of one or more backends on a dataset");
  eval_cmd->add_option("--data", eval_args.data, "Dataset file")->required();
  eval_cmd->add_option("--backend", eval_args.backends,
                       "Backend URL (repeat for multiple seeds)")
      ->envname("CAUSAL_AUGMENT_BACKEND")
      ->required();
  eval_cmd->add_option("--out", eval_args.out, "Report file")->required();
  eval_cmd->add_option("--jobs", eval_args.jobs, "Parallel item scoring")->capture_default_str();
  eval_cmd->add_option("--timeout", eval_args.timeout, "Backend timeout (seconds)")
      ->capture_default_str();

  SigtestArgs sigtest_args;
  auto* sigtest_cmd =
      app.add_subcommand("sigtest", "Approximate randomization test between two reports");
  sigtest_cmd->add_option("--a", sigtest_args.report_a, "First report file")->required();
  sigtest_cmd->add_option("--b", sigtest_args.report_b, "Second report file")->required();
  sigtest_cmd->add_option("--row-a", sigtest_args.row_a, "Seed row in the first report")
      ->capture_default_str();
  sigtest_cmd->add_option("--row-b", sigtest_args.row_b, "Seed row in the second report")
      ->capture_default_str();
  sigtest_cmd->add_option("--iterations", sigtest_args.iterations, "Monte Carlo iterations")
      ->capture_default_str();
  sigtest_cmd->add_option("--seed", sigtest_args.seed, "Random seed")->capture_default_str();
  sigtest_cmd->add_flag("--exact", sigtest_args.exact, "Force exact enumeration");
  sigtest_cmd->add_flag("--mc", sigtest_args.monte_carlo, "Force Monte Carlo");
  sigtest_cmd->add_option("--out", sigtest_args.out, "Also write the result here");
  sigtest_cmd->add_option("--jobs", sigtest_args.jobs, "Parallel iterations")
      ->capture_default_str();

  ServeArgs serve_args;
  auto* serve_cmd = app.add_subcommand("stub-serve", "Run the deterministic stub backend");
  serve_cmd->add_option("--host", serve_args.host, "Bind host")->capture_default_str();
  serve_cmd->add_option("--port", serve_args.port, "Port (0 picks a free one)")
      ->capture_default_str();
  serve_cmd->add_option("--w", serve_args.w, "Scorer weight")->capture_default_str();
  serve_cmd->add_option("--b", serve_args.b, "Scorer bias")->capture_default_str();
  serve_cmd->add_option("--canned", serve_args.canned, "Canned generation table (JSONL)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  set_log_level(log_level_from_string(log_level));

  try {
    if (*stats_cmd) return run_stats(stats_args);
    if (*extract_cmd) return run_extract(extract_args);
    if (*augment_cmd) {
      if (augment_args.strategy == "lm" && augment_args.backend_url.empty()) {
        std::cerr << "augment: --backend (or CAUSAL_AUGMENT_BACKEND) is required with "
                     "--strategy lm\n";
        return 2;
      }
      return run_augment(augment_args);
    }
    if (*attack_cmd) return run_attack(attack_args);
    if (*eval_cmd) return run_eval(eval_args);
    if (*sigtest_cmd) return run_sigtest(sigtest_args);
    if (*serve_cmd) return run_stub_serve(serve_args);
  } catch (const Error& e) {
    log_error(e.what());
    return 1;
  } catch (const std::exception& e) {
    log_error(e.what());
    return 1;
  }
  return 2;
}
