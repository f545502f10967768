// Benchmarks the OpenMP kernels against their serial (jobs=1) reference and
// verifies both produce identical output. Usage: causalaug-bench [jobs]
// (default: hardware concurrency).
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalaug/adversarial.hpp"
#include "causalaug/backend.hpp"
#include "causalaug/copa.hpp"
#include "causalaug/corpus.hpp"
#include "causalaug/distractor.hpp"
#include "causalaug/eval.hpp"
#include "causalaug/parallel.hpp"
#include "causalaug/rng.hpp"
#include "causalaug/text.hpp"

namespace fs = std::filesystem;
using namespace causalaug;

namespace {

using Clock = std::chrono::steady_clock;

template <class F>
double time_seconds(F&& fn) {
  auto start = Clock::now();
  fn();
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void report(const char* kernel, const char* work, double serial_s, double parallel_s,
            bool equal) {
  std::printf("%-18s %-26s %9.3fs %9.3fs %7.2fx   %s\n", kernel, work, serial_s, parallel_s,
              parallel_s > 0.0 ? serial_s / parallel_s : 0.0, equal ? "outputs equal" : "MISMATCH");
}

const std::vector<std::string> kIcVerbs = {"praised", "apologized", "scared",
                                           "soaked",  "cheered",    "thanked"};
const std::vector<std::string> kFill = {"garden", "window", "harvest", "engine", "bridge",
                                        "market", "signal", "blanket", "forest", "kettle"};

std::string bench_sentence(Rng& rng) {
  auto fill = [&] { return kFill[rng.uniform_index(kFill.size())]; };
  switch (rng.uniform_index(4)) {
    case 0: {
      std::string s = "The " + fill() + " " + kIcVerbs[rng.uniform_index(kIcVerbs.size())];
      for (int i = 0; i < 3; ++i) s += " " + fill();
      return s + " because the " + fill() + " " + fill() + " " + fill() + " " + fill() + ".";
    }
    case 1:
      return "It failed because rain.";
    case 2:
      return "The " + fill() + " " + fill() + " stayed quiet.";
    default: {
      std::string s = "The " + fill() + " carried";
      for (int i = 0; i < 3; ++i) s += " " + fill();
      return s + " because the " + fill() + " " + fill() + " " + fill() + " " + fill() + ".";
    }
  }
}

std::vector<std::string> write_shards(const fs::path& dir, int shards, int sentences_each) {
  fs::create_directories(dir);
  std::vector<std::string> paths;
  for (int s = 0; s < shards; ++s) {
    fs::path path = dir / ("shard_" + std::to_string(s) + ".txt");
    std::ofstream out(path, std::ios::binary);
    Rng rng(derive_seed(100, static_cast<std::uint64_t>(s)));
    for (int i = 0; i < sentences_each; ++i) out << bench_sentence(rng) << " ";
    paths.push_back(path.string());
  }
  return paths;
}

std::string pairs_digest(const std::vector<CausalPair>& pairs) {
  std::string s;
  for (const auto& pair : pairs) s += pair_to_json(pair).dump();
  return s;
}

std::string results_digest(const std::vector<AttackResult>& results) {
  std::string s;
  for (const auto& result : results) s += attack_result_to_json(result).dump();
  return s;
}

void bench_extract(int jobs) {
  fs::path dir = fs::temp_directory_path() / "causalaug-bench";
  fs::remove_all(dir);
  auto shards = write_shards(dir, 8, 40000);

  FilterConfig config;
  config.ic_lexicon = StringSet(kIcVerbs.begin(), kIcVerbs.end());

  FilterResult serial, parallel;
  config.jobs = 1;
  double serial_s = time_seconds([&] { serial = extract_corpus(shards, config); });
  config.jobs = jobs;
  double parallel_s = time_seconds([&] { parallel = extract_corpus(shards, config); });

  bool equal = pairs_digest(serial.pairs) == pairs_digest(parallel.pairs) &&
               serial.stats.accepted == parallel.stats.accepted &&
               serial.stats.rejects == parallel.stats.rejects;
  char work[64];
  std::snprintf(work, sizeof work, "8 shards, %zu pairs", serial.pairs.size());
  report("extract_corpus", work, serial_s, parallel_s, equal);
  fs::remove_all(dir);
}

std::vector<CopaItem> attack_items(int n) {
  std::vector<CopaItem> items;
  for (int id = 1; id <= n; ++id) {
    CopaItem item;
    item.id = id;
    item.premise = "The red balloon popped.";
    item.choice1 = "The balloon hit a nail.";
    item.choice2 = "The cake burned badly.";
    item.question = Question::cause;
    item.label = 1;
    items.push_back(std::move(item));
  }
  return items;
}

void bench_attack(int jobs) {
  const int n = 400;
  auto items = attack_items(n);

  SubstitutionLexicon lexicon;
  lexicon.add("balloon", Pos::noun, "balloon%1", "cake");
  lexicon.add("balloon", Pos::noun, "balloon%1", "kite");
  lexicon.add("pop", Pos::verb, "pop%1", "burned");
  lexicon.add("red", Pos::adj, "red%1", "blue");

  AnnotationStore annotations;
  for (const auto& item : items) {
    annotations.add(item.id, Segment::premise,
                    {{"The", "the", Pos::other, ""},
                     {"red", "red", Pos::adj, "red%1"},
                     {"balloon", "balloon", Pos::noun, "balloon%1"},
                     {"popped", "pop", Pos::verb, "pop%1"}});
  }

  LocalStubBackend backend;
  AttackOptions options;
  options.params.rng_seed = 99;

  AttackSummary serial, parallel;
  options.jobs = 1;
  double serial_s =
      time_seconds([&] { serial = attack_dataset(items, backend, lexicon, annotations, options); });
  options.jobs = jobs;
  double parallel_s = time_seconds(
      [&] { parallel = attack_dataset(items, backend, lexicon, annotations, options); });

  bool equal = results_digest(serial.results) == results_digest(parallel.results) &&
               serial.successes == parallel.successes && serial.errors == parallel.errors;
  char work[64];
  std::snprintf(work, sizeof work, "%d items, %zu flips", n, serial.successes);
  report("attack_dataset", work, serial_s, parallel_s, equal);
}

void bench_accuracy(int jobs) {
  const int n = 20000;
  std::vector<CopaItem> items;
  for (int id = 1; id <= n; ++id) {
    CopaItem item;
    item.id = id;
    item.premise = "The red balloon popped.";
    item.choice1 = id % 2 ? "The balloon hit a nail." : "The cake burned badly.";
    item.choice2 = id % 2 ? "The cake burned badly." : "The balloon hit a nail.";
    item.question = Question::cause;
    item.label = 1;
    items.push_back(std::move(item));
  }

  LocalStubBackend backend;
  std::pair<double, std::vector<std::uint8_t>> serial, parallel;
  double serial_s = time_seconds([&] { serial = accuracy(items, backend, 1); });
  double parallel_s = time_seconds([&] { parallel = accuracy(items, backend, jobs); });

  char work[64];
  std::snprintf(work, sizeof work, "%d items, acc %.3f", n, serial.first);
  report("accuracy", work, serial_s, parallel_s, serial == parallel);
}

void bench_ar_test(int jobs) {
  const std::size_t n = 5000;
  const std::uint64_t iterations = 200000;
  Rng rng(4242);
  std::vector<std::uint8_t> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = rng.coin() ? 1 : 0;
    b[i] = rng.coin() ? 1 : 0;
  }

  double serial_p = 0.0, parallel_p = 0.0;
  double serial_s = time_seconds(
      [&] { serial_p = ar_test(a, b, iterations, 7, ArMode::monte_carlo, 1); });
  double parallel_s = time_seconds(
      [&] { parallel_p = ar_test(a, b, iterations, 7, ArMode::monte_carlo, jobs); });

  char work[64];
  std::snprintf(work, sizeof work, "n=%zu, R=%llu, p=%.4f", n,
                static_cast<unsigned long long>(iterations), serial_p);
  report("ar_test mc", work, serial_s, parallel_s, serial_p == parallel_p);
}

}  // namespace

int main(int argc, char** argv) {
  int jobs = argc > 1 ? std::atoi(argv[1]) : default_jobs();
  if (jobs < 2) jobs = 2;

  std::printf("serial reference (jobs=1) vs OpenMP (jobs=%d)\n", jobs);
  std::printf("%-18s %-26s %10s %10s %8s\n", "kernel", "work", "serial", "parallel", "speedup");

  bench_extract(jobs);
  bench_attack(jobs);
  bench_accuracy(jobs);
  bench_ar_test(jobs);
  return 0;
}
