#include "causalaug/distractor.hpp"

#include <optional>
#include <unordered_set>

#include "causalaug/error.hpp"
#include "causalaug/log.hpp"
#include "causalaug/parallel.hpp"
#include "causalaug/rng.hpp"

namespace causalaug {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::random: return "random";
    case Strategy::overlap: return "overlap";
    case Strategy::lm: return "lm";
  }
  return "random";
}

Strategy strategy_from_string(std::string_view s) {
  if (s == "random") return Strategy::random;
  if (s == "overlap") return Strategy::overlap;
  if (s == "lm") return Strategy::lm;
  throw ArgumentError("unknown strategy: '" + std::string(s) + "'");
}

DistractorPool build_pool(const std::vector<CausalPair>& pairs,
                          std::span<const ConnectiveSpec> specs) {
  DistractorPool pool;
  for (const auto& pair : pairs) {
    std::size_t words = word_count(pair.cause_clause);
    if (words < 2 || words > 11) continue;
    auto tokens = split_ws(pair.cause_clause);
    if (!match_connectives(tokens, specs).empty()) continue;
    pool.clauses.push_back({pair.cause_clause, pair.source_id});
  }
  return pool;
}

namespace {

Distractor draw(const std::vector<std::size_t>& eligible, const DistractorPool& pool,
                std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  const auto& entry = pool.clauses[eligible[rng.uniform_index(eligible.size())]];
  return {entry.text, entry.source_id};
}

}  // namespace

Distractor random_distractor(const CausalPair& pair, const DistractorPool& pool,
                             std::uint64_t rng_seed) {
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < pool.clauses.size(); ++i) {
    if (pool.clauses[i].text != pair.cause_clause) eligible.push_back(i);
  }
  if (eligible.empty()) throw GenerationError("distractor pool empty after exclusions");
  return draw(eligible, pool, rng_seed);
}

Distractor overlap_distractor(const CausalPair& pair, const DistractorPool& pool,
                              std::uint64_t rng_seed, const StringSet& stopwords) {
  auto premise_words = content_words(pair.effect_clause, stopwords);
  std::unordered_set<std::string> premise_set(premise_words.begin(), premise_words.end());
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < pool.clauses.size(); ++i) {
    const auto& entry = pool.clauses[i];
    if (entry.text == pair.cause_clause) continue;
    bool shares = false;
    for (const auto& w : content_words(entry.text, stopwords)) {
      if (premise_set.count(w)) {
        shares = true;
        break;
      }
    }
    if (shares) eligible.push_back(i);
  }
  if (eligible.empty()) {
    throw GenerationError("no pool entry shares a content word with premise \"" +
                          pair.effect_clause + "\"");
  }
  return draw(eligible, pool, rng_seed);
}

namespace {

// Continuation -> standalone sentence: cut at the first terminator, drop a
// leading "And" echo, recapitalize, terminate.
std::string clean_continuation(const std::string& raw) {
  std::string text = raw;
  std::size_t cut = text.find_first_of(".!?");
  if (cut != std::string::npos) text = text.substr(0, cut + 1);
  auto tokens = split_ws(text);
  if (!tokens.empty() && lower_ascii(strip_token_punct(tokens[0])) == "and") {
    tokens.erase(tokens.begin());
  }
  std::string joined;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) joined += ' ';
    joined += tokens[i];
  }
  joined = capitalize_first(joined);
  if (!joined.empty() && !ends_with_terminal(joined)) joined += '.';
  return joined;
}

}  // namespace

Distractor lm_distractor(const CausalPair& pair, Backend& backend,
                         const LmConstraints& constraints) {
  std::string prompt = strip_one_terminal(pair.effect_clause) + ". And";
  std::string last;
  for (int attempt = 0; attempt <= constraints.max_retries; ++attempt) {
    std::string raw = backend.generate(prompt, constraints.max_new_words,
                                       constraints.seed + static_cast<std::uint64_t>(attempt));
    std::string candidate = clean_continuation(raw);
    last = candidate;
    auto words = static_cast<int>(word_count(candidate));
    if (words >= constraints.min_words && words <= constraints.max_words) {
      return {candidate, "lm:attempt=" + std::to_string(attempt)};
    }
  }
  throw GenerationError("no continuation within " + std::to_string(constraints.min_words) + "-" +
                            std::to_string(constraints.max_words) + " words after " +
                            std::to_string(constraints.max_retries + 1) + " attempts for \"" +
                            prompt + "\"",
                        last);
}

CopaItem to_copa(const AugmentedItem& augmented) {
  CopaItem item = augmented.item;
  item.extra["strategy"] = to_string(augmented.strategy);
  item.extra["pair_source"] = augmented.pair_source;
  item.extra["distractor_source"] = augmented.distractor_source;
  return item;
}

AugmentedItem assemble_item(const CausalPair& pair, const Distractor& distractor, int next_id,
                            std::uint64_t rng_seed) {
  if (distractor.text == pair.cause_clause) {
    throw ArgumentError("distractor equals the cause clause: \"" + distractor.text + "\"");
  }
  Rng rng(rng_seed);
  int truth_position = 1 + static_cast<int>(rng.uniform_index(2));
  AugmentedItem out;
  out.item.id = next_id;
  out.item.premise = pair.effect_clause;
  out.item.question = Question::cause;
  out.item.label = truth_position;
  if (truth_position == 1) {
    out.item.choice1 = pair.cause_clause;
    out.item.choice2 = distractor.text;
  } else {
    out.item.choice1 = distractor.text;
    out.item.choice2 = pair.cause_clause;
  }
  out.pair_source = pair.source_id;
  out.distractor_source = distractor.source;
  return out;
}

std::vector<AugmentedItem> augment_pairs(const std::vector<CausalPair>& pairs,
                                         const AugmentOptions& options, AugmentStats* stats) {
  if (options.strategy == Strategy::lm && options.backend == nullptr) {
    throw ArgumentError("lm strategy requires a generation backend");
  }
  DistractorPool pool;
  if (options.strategy != Strategy::lm) {
    pool = build_pool(pairs, options.connectives);
  }

  std::vector<std::optional<AugmentedItem>> slots(pairs.size());
  parallel_for(pairs.size(), options.jobs, [&](std::size_t i) {
    const CausalPair& pair = pairs[i];
    std::uint64_t pair_seed = derive_seed(options.seed, pair.source_id);
    try {
      Distractor distractor;
      switch (options.strategy) {
        case Strategy::random:
          distractor = random_distractor(pair, pool, derive_seed(pair_seed, "draw"));
          break;
        case Strategy::overlap:
          distractor = overlap_distractor(pair, pool, derive_seed(pair_seed, "draw"),
                                          options.stopwords);
          break;
        case Strategy::lm: {
          LmConstraints c = options.lm;
          c.seed = derive_seed(pair_seed, "generate");
          distractor = lm_distractor(pair, *options.backend, c);
          break;
        }
      }
      AugmentedItem item = assemble_item(pair, distractor, 0, derive_seed(pair_seed, "position"));
      item.strategy = options.strategy;
      slots[i] = std::move(item);
    } catch (const GenerationError& e) {
      log_warn("pair skipped", {{"source_id", pair.source_id}, {"error", e.what()}});
    } catch (const ArgumentError& e) {
      log_warn("pair skipped", {{"source_id", pair.source_id}, {"error", e.what()}});
    }
  });

  std::vector<AugmentedItem> out;
  StringSet seen;
  int next_id = options.first_id;
  AugmentStats local;
  for (auto& slot : slots) {
    if (!slot) {
      ++local.skipped;
      continue;
    }
    if (options.dedup) {
      const CopaItem& it = slot->item;
      std::string key = it.premise + '\x1f' + it.choice(it.label) + '\x1f' + it.choice(3 - it.label);
      if (!seen.insert(key).second) {
        ++local.duplicates;
        continue;
      }
    }
    slot->item.id = next_id++;
    out.push_back(std::move(*slot));
  }
  local.produced = out.size();
  if (stats) *stats = local;
  return out;
}

}  // namespace causalaug
