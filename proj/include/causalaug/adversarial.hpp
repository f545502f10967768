#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "causalaug/backend.hpp"
#include "causalaug/copa.hpp"

namespace causalaug {

enum class Pos { noun, verb, adj, adv, other };

std::string to_string(Pos p);
Pos pos_from_string(std::string_view s);

enum class Segment { premise, choice1, choice2 };

std::string to_string(Segment s);
Segment segment_from_string(std::string_view s);

const std::string& segment_text(const CopaItem& item, Segment segment);

struct TokenAnnotation {
  std::string token;
  std::string lemma;
  Pos pos = Pos::other;
  std::string sense_id;  // empty when the annotator could not disambiguate
};

// (lemma, pos, sense_id) -> admissible replacement surfaces, loaded from a
// TSV with one candidate per line. pos_only lookups pool the candidates of
// every sense under (lemma, pos).
class SubstitutionLexicon {
 public:
  SubstitutionLexicon() = default;
  explicit SubstitutionLexicon(const std::string& path);

  void add(const std::string& lemma, Pos pos, const std::string& sense_id,
           const std::string& candidate);
  std::vector<std::string> candidates(const std::string& lemma, Pos pos,
                                      const std::string& sense_id) const;
  std::vector<std::string> candidates_pos_only(const std::string& lemma, Pos pos) const;
  std::size_t size() const { return entries_.size(); }

 private:
  // key "lemma\x1fpos" -> sense_id -> ordered candidates
  std::map<std::string, std::map<std::string, std::vector<std::string>>> entries_;
};

struct GraphPosition {
  std::size_t token_index = 0;
  TokenAnnotation original;
  std::vector<std::string> candidates;  // never contains the original surface
};

struct SubstitutionGraph {
  Segment segment = Segment::premise;
  std::vector<GraphPosition> positions;
};

// Number of substitution combinations including the all-identity one,
// saturating at `cap`.
std::uint64_t combination_count(const SubstitutionGraph& graph, std::uint64_t cap);

// Positions for content-POS tokens with at least one admissible candidate.
// Tokens with an empty sense_id participate only under pos_only.
SubstitutionGraph build_graph(const CopaItem& item, Segment segment,
                              std::span<const TokenAnnotation> annotations,
                              const SubstitutionLexicon& lexicon, bool pos_only = false);

struct Substitution {
  Segment segment = Segment::premise;
  std::size_t token_index = 0;
  std::string from;
  std::string to;
};

// Rebuilds the segment text with the substitutions applied. Punctuation glued
// to a replaced token and a leading capital survive the swap.
std::string apply_substitutions(const std::string& text,
                                std::span<const Substitution> substitutions);

CopaItem perturb_item(const CopaItem& item, Segment segment,
                      std::span<const Substitution> substitutions);

// P(cause | conv of wrong choice) - P(cause | conv of gold choice) for the
// perturbed item; positive iff the wrong choice wins outright.
double fitness(const CopaItem& perturbed, Backend& backend);

struct AcoParams {
  int ants = 20;
  int iterations = 50;
  double evaporation = 0.1;
  double pheromone_init = 1.0;
  double pheromone_exponent = 1.0;  // alpha
  double heuristic_exponent = 1.0;  // beta; heuristic is uniform
  double max_substitution_fraction = 0.25;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct AttackResult {
  CopaItem item;
  CopaItem perturbed_item;
  std::vector<Substitution> substitutions;
  bool attempted = false;  // false when the victim already misclassifies
  bool success = false;
  double original_margin = 0.0;
  double final_margin = 0.0;
  int iterations_used = 0;
};

nlohmann::json attack_result_to_json(const AttackResult& result);
AttackResult attack_result_from_json(const nlohmann::json& record);

AttackResult aco_search(const CopaItem& item, const SubstitutionGraph& graph, Backend& backend,
                        const AcoParams& params);

// Exhaustive oracle: the flip with the fewest substitutions, ties broken by
// leftmost position then candidate order. Refuses graphs beyond
// max_combinations.
AttackResult brute_force_search(const CopaItem& item, const SubstitutionGraph& graph,
                                Backend& backend, std::uint64_t max_combinations);

// item id -> segment -> token annotations, from line-delimited records
// {item_id, segment, tokens: [{token, lemma, pos, sense_id}]}.
class AnnotationStore {
 public:
  AnnotationStore() = default;
  explicit AnnotationStore(const std::string& path);

  void add(int item_id, Segment segment, std::vector<TokenAnnotation> tokens);
  const std::vector<TokenAnnotation>* find(int item_id, Segment segment) const;

 private:
  std::map<std::pair<int, int>, std::vector<TokenAnnotation>> by_key_;
};

struct AttackOptions {
  AcoParams params;
  bool pos_only = false;
  int jobs = 1;
};

struct AttackSummary {
  std::vector<AttackResult> results;  // one per input item, in item order
  std::uint64_t attempted = 0;
  std::uint64_t successes = 0;
  std::uint64_t errors = 0;
  double success_rate = 0.0;  // successes / attempted, 0 when attempted = 0

  // Perturbed versions of successfully attacked items, ready for merging.
  std::vector<CopaItem> adversarial_items() const;
};

// Attacks premise, choice1, choice2 in that order, stopping at the first
// success per item. Per-item errors are logged and counted, not fatal.
AttackSummary attack_dataset(const std::vector<CopaItem>& items, Backend& backend,
                             const SubstitutionLexicon& lexicon, const AnnotationStore& annotations,
                             const AttackOptions& options);

}  // namespace causalaug
