#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "causalaug/text.hpp"

namespace causalaug {

// Whether the clause after the connective expresses the cause ("A because B")
// or the effect ("A, therefore B").
enum class Direction { backward, forward };

std::string to_string(Direction d);
Direction direction_from_string(std::string_view s);

struct ConnectiveSpec {
  std::string surface;  // lowercase, possibly multi-word
  Direction direction = Direction::backward;
  int head_index = 0;  // token offset of the match anchor within the surface
  std::vector<std::string> tokens;  // surface split into tokens

  ConnectiveSpec() = default;
  ConnectiveSpec(std::string s, Direction d, int head = 0);
};

// `surface<TAB>direction` per line, '#' comments allowed.
std::vector<ConnectiveSpec> load_connectives(const std::string& path);

// The eight causal connectives the extraction pipeline filters on.
std::vector<ConnectiveSpec> default_connectives();

struct CausalPair {
  std::string effect_clause;
  std::string cause_clause;
  ConnectiveSpec connective;
  std::string source_id;  // "<file>:<byte offset>"
  std::string original_sentence;
};

enum class RejectCode {
  LENGTH,
  CENTER,
  MULTI_CONNECTIVE,
  NO_IC_VERB,
  NO_CONNECTIVE,
  VALIDATOR_REJECT,
  VAGUE_CLAUSE,
};

std::string to_string(RejectCode code);

struct RejectReason {
  RejectCode code;
  std::string detail;
};

struct Sentence {
  std::string text;
  std::size_t offset = 0;  // byte offset of the first character
};

struct SegmenterOptions {
  StringSet abbreviations;  // tokens (with trailing period) that never end a sentence
  bool strict_utf8 = false;
};

// Splits at '.', '!' or '?' followed by whitespace and an uppercase letter, or
// end of input. Invalid UTF-8 sentences are skipped (counted in *skipped)
// unless strict mode is on, in which case they raise.
std::vector<Sentence> segment_sentences(std::string_view text, const SegmenterOptions& options,
                                        std::size_t* skipped = nullptr);

struct ConnectiveMatch {
  std::size_t spec_index = 0;   // into the spec list
  std::size_t token_index = 0;  // first token of the connective
};

// Case-insensitive match on punctuation-stripped whitespace tokens;
// multi-word connectives must appear as consecutive tokens. Overlapping
// surfaces resolve to the longest match at a position.
std::vector<ConnectiveMatch> match_connectives(std::span<const std::string> tokens,
                                               std::span<const ConnectiveSpec> specs);

// The four acceptance constraints, evaluated in order: more than one
// connective match; word count outside [5, 22]; anchor farther than 2 tokens
// from the real-valued center (n-1)/2; no implicit-causality verb.
std::optional<RejectReason> check_constraints(std::span<const std::string> tokens,
                                              std::span<const ConnectiveMatch> matches,
                                              std::span<const ConnectiveSpec> specs,
                                              const StringSet& ic_lexicon);

// Splits the sentence at the connective, drops the connective tokens, strips
// dangling comma/conjunction residue at the cut, and re-cases both clauses
// into standalone sentences. Backward connectives put the cause on the right.
std::variant<CausalPair, RejectReason> split_and_rewrite(std::span<const std::string> tokens,
                                                         const ConnectiveMatch& match,
                                                         std::span<const ConnectiveSpec> specs,
                                                         const std::string& original_sentence,
                                                         const std::string& source_id);

struct ValidatorRequest {
  std::string sentence;
  std::string id;
};

struct ValidatorResponse {
  std::string id;
  std::vector<std::string> labels;
};

// Pluggable relation validator. Implementations must tolerate concurrent
// batches.
class RelationValidator {
 public:
  virtual ~RelationValidator() = default;
  virtual std::vector<ValidatorResponse> validate(const std::vector<ValidatorRequest>& requests) = 0;
};

// Default validator: labels every sentence with every acceptance label.
class AcceptAllValidator : public RelationValidator {
 public:
  explicit AcceptAllValidator(std::vector<std::string> labels = {"Contingency.Cause"});
  std::vector<ValidatorResponse> validate(const std::vector<ValidatorRequest>& requests) override;

 private:
  std::vector<std::string> labels_;
};

// Runs an external command with the request records on stdin and reads
// response records from stdout (one JSON object per line each way).
class CommandValidator : public RelationValidator {
 public:
  explicit CommandValidator(std::string command);
  std::vector<ValidatorResponse> validate(const std::vector<ValidatorRequest>& requests) override;

 private:
  std::string command_;
};

struct FilterConfig {
  std::vector<ConnectiveSpec> connectives = default_connectives();
  StringSet ic_lexicon;
  SegmenterOptions segmenter;
  RelationValidator* validator = nullptr;        // null: accept everything
  StringSet accept_labels = {"Contingency.Cause"};
  bool validator_fail_open = false;              // on validator error: keep pairs?
  int jobs = 1;
};

struct FilterStats {
  std::uint64_t sentences = 0;
  std::uint64_t with_connective = 0;
  std::uint64_t accepted = 0;
  std::uint64_t utf8_skipped = 0;
  std::map<std::string, std::uint64_t> rejects;  // RejectCode name -> count

  void merge(const FilterStats& other);
};

struct FilterResult {
  std::vector<CausalPair> pairs;
  FilterStats stats;
};

// One shard of raw text.
FilterResult filter_text(std::string_view text, const std::string& source_name,
                         const FilterConfig& config);

// All shards of a corpus, processed in parallel, merged in shard order so the
// output is byte-stable across jobs settings.
FilterResult extract_corpus(const std::vector<std::string>& shard_paths, const FilterConfig& config);

nlohmann::json pair_to_json(const CausalPair& pair);
CausalPair pair_from_json(const nlohmann::json& record);
std::vector<CausalPair> read_pairs(const std::string& path);
void write_pairs(const std::string& path, const std::vector<CausalPair>& pairs);

}  // namespace causalaug
