#include "causalaug/eval.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <fstream>

#include "causalaug/error.hpp"
#include "causalaug/parallel.hpp"
#include "causalaug/rng.hpp"

namespace causalaug {

int predict(const CopaItem& item, Backend& backend) {
  auto probs = backend.score({conv(item.premise, item.choice1, item.question),
                              conv(item.premise, item.choice2, item.question)});
  return probs[0].p1 >= probs[1].p1 ? 1 : 2;
}

std::pair<double, std::vector<std::uint8_t>> accuracy(const std::vector<CopaItem>& items,
                                                      Backend& backend, int jobs) {
  if (items.empty()) throw ArgumentError("accuracy over an empty dataset");
  std::vector<std::uint8_t> bits(items.size(), 0);
  parallel_for(items.size(), jobs, [&](std::size_t i) {
    bits[i] = predict(items[i], backend) == items[i].label ? 1 : 0;
  });
  std::uint64_t correct = 0;
  for (auto b : bits) correct += b;
  return {static_cast<double>(correct) / static_cast<double>(items.size()), std::move(bits)};
}

Aggregate aggregate_seeds(std::vector<double> per_seed) {
  if (per_seed.size() < 5) {
    throw ArgumentError("aggregate needs at least 5 seed accuracies, got " +
                        std::to_string(per_seed.size()));
  }
  std::sort(per_seed.begin(), per_seed.end());
  std::vector<double> kept(per_seed.begin() + 2, per_seed.end() - 2);
  Aggregate agg;
  agg.trimmed_n = kept.size();
  agg.min = kept.front();
  agg.max = kept.back();
  double sum = 0.0;
  for (double v : kept) sum += v;
  agg.mean = sum / static_cast<double>(kept.size());
  if (kept.size() > 1) {
    double ss = 0.0;
    for (double v : kept) ss += (v - agg.mean) * (v - agg.mean);
    agg.std = std::sqrt(ss / static_cast<double>(kept.size() - 1));
  }
  return agg;
}

double ar_test(const std::vector<std::uint8_t>& correct_a,
               const std::vector<std::uint8_t>& correct_b, std::uint64_t iterations,
               std::uint64_t rng_seed, ArMode mode, int jobs) {
  if (correct_a.size() != correct_b.size()) {
    throw ArgumentError("correctness vectors differ in length: " +
                        std::to_string(correct_a.size()) + " vs " +
                        std::to_string(correct_b.size()));
  }
  const std::size_t n = correct_a.size();
  if (n == 0) throw ArgumentError("empty correctness vectors");

  // Only positions where the systems disagree shift the difference.
  std::vector<int> d;
  long long observed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    int di = static_cast<int>(correct_a[i]) - static_cast<int>(correct_b[i]);
    if (di != 0) d.push_back(di);
    observed += di;
  }
  const long long abs_observed = std::llabs(observed);
  const std::size_t k = d.size();

  bool exact = mode == ArMode::exact || (mode == ArMode::automatic && n <= 20);
  if (mode == ArMode::exact && n > 20) {
    throw ArgumentError("exact mode supports at most 20 items, got " + std::to_string(n));
  }

  if (exact) {
    std::uint64_t plus_mask = 0, minus_mask = 0;
    for (std::size_t i = 0; i < k; ++i) {
      (d[i] > 0 ? plus_mask : minus_mask) |= (1ULL << i);
    }
    std::uint64_t c = 0;
    const std::uint64_t patterns = 1ULL << k;
    for (std::uint64_t mask = 0; mask < patterns; ++mask) {
      long long swapped = static_cast<long long>(std::popcount(mask & plus_mask)) -
                          static_cast<long long>(std::popcount(mask & minus_mask));
      long long s = observed - 2 * swapped;
      if (std::llabs(s) >= abs_observed) ++c;
    }
    return static_cast<double>(c) / static_cast<double>(patterns);
  }

  if (iterations == 0) throw ArgumentError("monte carlo mode needs iterations >= 1");
  std::atomic<std::uint64_t> c{0};
  parallel_for(iterations, jobs, [&](std::size_t r) {
    Rng rng(derive_seed(rng_seed, static_cast<std::uint64_t>(r)));
    long long s = 0;
    for (int di : d) s += rng.coin() ? -di : di;
    if (std::llabs(s) >= abs_observed) ++c;
  });
  return static_cast<double>(c.load() + 1) / static_cast<double>(iterations + 1);
}

std::string bits_to_string(const std::vector<std::uint8_t>& bits) {
  std::string s;
  s.reserve(bits.size());
  for (auto b : bits) s += b ? '1' : '0';
  return s;
}

std::vector<std::uint8_t> bits_from_string(std::string_view s) {
  std::vector<std::uint8_t> bits;
  bits.reserve(s.size());
  for (char c : s) {
    if (c != '0' && c != '1') throw ParseError("correctness string must be 0/1 only");
    bits.push_back(c == '1' ? 1 : 0);
  }
  return bits;
}

void write_report(const std::string& path, const EvalReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot open report file: " + path);
  for (const auto& row : report.per_seed) {
    nlohmann::json rec{{"type", "seed"},
                       {"seed", row.seed},
                       {"accuracy", row.accuracy},
                       {"correctness", bits_to_string(row.correctness)}};
    out << rec.dump() << "\n";
  }
  if (report.aggregate) {
    const auto& a = *report.aggregate;
    nlohmann::json rec{{"type", "aggregate"}, {"min", a.min},   {"max", a.max},
                       {"mean", a.mean},     {"std", a.std}, {"trimmed_n", a.trimmed_n}};
    out << rec.dump() << "\n";
  }
  if (!out) throw Error("write failed: " + path);
}

EvalReport read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open report file: " + path);
  EvalReport report;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      std::string type = j.at("type").get<std::string>();
      if (type == "seed") {
        SeedRow row;
        row.seed = j.at("seed").get<std::string>();
        row.accuracy = j.at("accuracy").get<double>();
        row.correctness = bits_from_string(j.at("correctness").get<std::string>());
        report.per_seed.push_back(std::move(row));
      } else if (type == "aggregate") {
        Aggregate a;
        a.min = j.at("min").get<double>();
        a.max = j.at("max").get<double>();
        a.mean = j.at("mean").get<double>();
        a.std = j.at("std").get<double>();
        a.trimmed_n = j.at("trimmed_n").get<std::size_t>();
        report.aggregate = a;
      } else {
        throw ParseError("unknown record type '" + type + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return report;
}

}  // namespace causalaug
