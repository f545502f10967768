#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "causalaug/backend.hpp"
#include "causalaug/copa.hpp"
#include "causalaug/corpus.hpp"

namespace causalaug {

enum class Strategy { random, overlap, lm };

std::string to_string(Strategy s);
Strategy strategy_from_string(std::string_view s);

struct PoolEntry {
  std::string text;
  std::string source_id;
};

// Cause clauses of extracted pairs, restricted to the 2-11 word band and free
// of connective tokens; the reservoir the random/overlap strategies draw from.
struct DistractorPool {
  std::vector<PoolEntry> clauses;
};

DistractorPool build_pool(const std::vector<CausalPair>& pairs,
                          std::span<const ConnectiveSpec> specs);

struct Distractor {
  std::string text;
  std::string source;
};

// Uniform draw from pool entries whose text differs from the pair's cause.
Distractor random_distractor(const CausalPair& pair, const DistractorPool& pool,
                             std::uint64_t rng_seed);

// Uniform draw among entries sharing at least one content word with the
// premise (the pair's effect clause).
Distractor overlap_distractor(const CausalPair& pair, const DistractorPool& pool,
                              std::uint64_t rng_seed, const StringSet& stopwords);

struct LmConstraints {
  int min_words = 2;
  int max_words = 11;
  int max_retries = 5;
  int max_new_words = 16;
  std::uint64_t seed = 0;
};

// Prompts the generation backend with "{effect}. And", cleans the
// continuation into a standalone sentence, and retries with incremented
// sub-seeds until the 2-11 word bound holds.
Distractor lm_distractor(const CausalPair& pair, Backend& backend,
                         const LmConstraints& constraints);

struct AugmentedItem {
  CopaItem item;
  Strategy strategy = Strategy::random;
  std::string pair_source;
  std::string distractor_source;
};

// CopaItem with the provenance keys folded into extra, ready for write_items.
CopaItem to_copa(const AugmentedItem& augmented);

// Premise = effect clause, question = cause; the true choice's position is
// drawn uniformly and the label set to match.
AugmentedItem assemble_item(const CausalPair& pair, const Distractor& distractor, int next_id,
                            std::uint64_t rng_seed);

struct AugmentOptions {
  Strategy strategy = Strategy::random;
  std::uint64_t seed = 0;
  StringSet stopwords = default_stopwords();
  LmConstraints lm;
  Backend* backend = nullptr;  // required for Strategy::lm
  std::vector<ConnectiveSpec> connectives = default_connectives();
  bool dedup = false;
  int first_id = 1;
  int jobs = 1;
};

struct AugmentStats {
  std::uint64_t produced = 0;
  std::uint64_t skipped = 0;
  std::uint64_t duplicates = 0;
};

// Full pipeline over extracted pairs. Pairs are independent; each draws a
// sub-seed from (seed, source_id) so results do not depend on --jobs.
// Failures (exhausted retries, empty pool slices) skip the pair with a
// warning instead of aborting the run.
std::vector<AugmentedItem> augment_pairs(const std::vector<CausalPair>& pairs,
                                         const AugmentOptions& options, AugmentStats* stats);

}  // namespace causalaug
