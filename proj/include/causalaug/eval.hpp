#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "causalaug/backend.hpp"
#include "causalaug/copa.hpp"

namespace causalaug {

// Argmax over the two conv-sequences' P(correct); ties go to choice 1.
int predict(const CopaItem& item, Backend& backend);

// Fraction of items where predict matches the gold label, plus the per-item
// correctness bits in item order.
std::pair<double, std::vector<std::uint8_t>> accuracy(const std::vector<CopaItem>& items,
                                                      Backend& backend, int jobs = 1);

struct Aggregate {
  double min = 0, max = 0, mean = 0, std = 0;
  std::size_t trimmed_n = 0;
};

// Sort, drop the two lowest and two highest accuracies, then summarize the
// rest (sample std; 0 for a single survivor). Requires at least 5 values.
Aggregate aggregate_seeds(std::vector<double> per_seed);

enum class ArMode { automatic, exact, monte_carlo };

// Two-sided approximate randomization test on paired correctness vectors.
// Exact mode enumerates all 2^n swap patterns (n <= 20) and returns c/2^n;
// Monte Carlo runs `iterations` half-swap rounds and returns (c+1)/(R+1).
// automatic picks exact when it is feasible.
double ar_test(const std::vector<std::uint8_t>& correct_a,
               const std::vector<std::uint8_t>& correct_b, std::uint64_t iterations,
               std::uint64_t rng_seed, ArMode mode = ArMode::automatic, int jobs = 1);

struct SeedRow {
  std::string seed;  // label of the backend/seed that produced the row
  double accuracy = 0.0;
  std::vector<std::uint8_t> correctness;
};

struct EvalReport {
  std::vector<SeedRow> per_seed;
  std::optional<Aggregate> aggregate;  // present when >= 5 seed rows
};

std::string bits_to_string(const std::vector<std::uint8_t>& bits);
std::vector<std::uint8_t> bits_from_string(std::string_view s);

void write_report(const std::string& path, const EvalReport& report);
EvalReport read_report(const std::string& path);

}  // namespace causalaug
