#include "causalaug/corpus.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>

#include "causalaug/error.hpp"
#include "causalaug/log.hpp"
#include "causalaug/parallel.hpp"

namespace causalaug {

std::string to_string(Direction d) { return d == Direction::backward ? "backward" : "forward"; }

Direction direction_from_string(std::string_view s) {
  if (s == "backward") return Direction::backward;
  if (s == "forward") return Direction::forward;
  throw ParseError("invalid direction: '" + std::string(s) + "'");
}

ConnectiveSpec::ConnectiveSpec(std::string s, Direction d, int head)
    : surface(lower_ascii(trim(s))), direction(d), head_index(head), tokens(split_ws(surface)) {
  if (tokens.empty()) throw ArgumentError("connective surface is empty");
}

std::vector<ConnectiveSpec> load_connectives(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open connective file: " + path);
  std::vector<ConnectiveSpec> specs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t tab = t.find('\t');
    if (tab == std::string::npos) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected surface<TAB>direction");
    }
    std::string surface = trim(t.substr(0, tab));
    std::string rest = trim(t.substr(tab + 1));
    int head = 0;
    std::size_t tab2 = rest.find('\t');
    if (tab2 != std::string::npos) {
      head = std::atoi(rest.substr(tab2 + 1).c_str());
      rest = trim(rest.substr(0, tab2));
    }
    specs.emplace_back(surface, direction_from_string(rest), head);
  }
  if (specs.empty()) throw ParseError(path + ": no connectives defined");
  return specs;
}

std::vector<ConnectiveSpec> default_connectives() {
  return {
      ConnectiveSpec("as a result", Direction::forward),
      ConnectiveSpec("because", Direction::backward),
      ConnectiveSpec("if", Direction::backward),
      ConnectiveSpec("since", Direction::backward),
      ConnectiveSpec("so", Direction::forward),
      ConnectiveSpec("therefore", Direction::forward),
      ConnectiveSpec("thus", Direction::forward),
      ConnectiveSpec("when", Direction::backward),
  };
}

std::string to_string(RejectCode code) {
  switch (code) {
    case RejectCode::LENGTH: return "LENGTH";
    case RejectCode::CENTER: return "CENTER";
    case RejectCode::MULTI_CONNECTIVE: return "MULTI_CONNECTIVE";
    case RejectCode::NO_IC_VERB: return "NO_IC_VERB";
    case RejectCode::NO_CONNECTIVE: return "NO_CONNECTIVE";
    case RejectCode::VALIDATOR_REJECT: return "VALIDATOR_REJECT";
    case RejectCode::VAGUE_CLAUSE: return "VAGUE_CLAUSE";
  }
  return "UNKNOWN";
}

namespace {

bool is_space_byte(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_upper_ascii(char c) { return c >= 'A' && c <= 'Z'; }

// Token ending at position i (inclusive), lowercased.
std::string token_ending_at(std::string_view text, std::size_t i) {
  std::size_t b = i;
  while (b > 0 && !is_space_byte(text[b - 1])) --b;
  return lower_ascii(text.substr(b, i - b + 1));
}

}  // namespace

std::vector<Sentence> segment_sentences(std::string_view text, const SegmenterOptions& options,
                                        std::size_t* skipped) {
  std::vector<Sentence> sentences;
  std::size_t local_skipped = 0;

  auto emit = [&](std::size_t begin, std::size_t end) {
    while (begin < end && is_space_byte(text[begin])) ++begin;
    while (end > begin && is_space_byte(text[end - 1])) --end;
    if (begin >= end) return;
    std::string_view s = text.substr(begin, end - begin);
    if (!valid_utf8(s)) {
      if (options.strict_utf8) {
        throw ParseError("invalid UTF-8 at byte offset " + std::to_string(begin));
      }
      ++local_skipped;
      return;
    }
    sentences.push_back({std::string(s), begin});
  };

  std::size_t start = 0;
  const std::size_t n = text.size();
  for (std::size_t i = 0; i < n; ++i) {
    char c = text[i];
    if (c == '\n') {
      // blank line = paragraph break
      std::size_t j = i + 1;
      while (j < n && (text[j] == ' ' || text[j] == '\t' || text[j] == '\r')) ++j;
      if (j < n && text[j] == '\n') {
        emit(start, i);
        start = j + 1;
        i = j;
      }
      continue;
    }
    if (c != '.' && c != '!' && c != '?') continue;
    std::size_t j = i + 1;
    if (j < n && !is_space_byte(text[j])) continue;
    while (j < n && is_space_byte(text[j])) ++j;
    if (j < n && !is_upper_ascii(text[j])) continue;
    if (c == '.' && options.abbreviations.count(token_ending_at(text, i))) continue;
    emit(start, i + 1);
    start = i + 1;
  }
  emit(start, n);

  if (skipped) *skipped = local_skipped;
  return sentences;
}

std::vector<ConnectiveMatch> match_connectives(std::span<const std::string> tokens,
                                               std::span<const ConnectiveSpec> specs) {
  std::vector<std::string> norm;
  norm.reserve(tokens.size());
  for (const auto& t : tokens) norm.push_back(lower_ascii(strip_token_punct(t)));

  std::vector<ConnectiveMatch> matches;
  for (std::size_t i = 0; i < norm.size(); ++i) {
    std::optional<ConnectiveMatch> best;
    std::size_t best_len = 0;
    for (std::size_t s = 0; s < specs.size(); ++s) {
      const auto& spec_tokens = specs[s].tokens;
      if (spec_tokens.empty() || i + spec_tokens.size() > norm.size()) continue;
      bool ok = true;
      for (std::size_t k = 0; k < spec_tokens.size(); ++k) {
        if (norm[i + k] != spec_tokens[k]) {
          ok = false;
          break;
        }
      }
      if (ok && spec_tokens.size() > best_len) {
        best = ConnectiveMatch{s, i};
        best_len = spec_tokens.size();
      }
    }
    if (best) matches.push_back(*best);
  }
  return matches;
}

std::optional<RejectReason> check_constraints(std::span<const std::string> tokens,
                                              std::span<const ConnectiveMatch> matches,
                                              std::span<const ConnectiveSpec> specs,
                                              const StringSet& ic_lexicon) {
  if (matches.empty()) return RejectReason{RejectCode::NO_CONNECTIVE, "no connective match"};
  if (matches.size() > 1) {
    return RejectReason{RejectCode::MULTI_CONNECTIVE,
                        std::to_string(matches.size()) + " connective matches"};
  }
  const std::size_t n = tokens.size();
  if (n < 5 || n > 22) {
    return RejectReason{RejectCode::LENGTH, "n=" + std::to_string(n)};
  }
  const auto& match = matches.front();
  const double anchor =
      static_cast<double>(match.token_index) + specs[match.spec_index].head_index;
  const double center = (static_cast<double>(n) - 1.0) / 2.0;
  if (std::abs(anchor - center) > 2.0) {
    return RejectReason{RejectCode::CENTER,
                        "anchor " + std::to_string(match.token_index) + " vs center " +
                            std::to_string(center)};
  }
  bool has_ic = false;
  for (const auto& t : tokens) {
    if (ic_lexicon.count(lower_ascii(strip_token_punct(t)))) {
      has_ic = true;
      break;
    }
  }
  if (!has_ic) return RejectReason{RejectCode::NO_IC_VERB, "no implicit-causality verb"};
  return std::nullopt;
}

namespace {

const StringSet kBoundaryResidue = {"and", "but", "or"};

void strip_left_tail(std::vector<std::string>& toks) {
  while (!toks.empty()) {
    std::string core = lower_ascii(strip_token_punct(toks.back()));
    if (core.empty() || kBoundaryResidue.count(core)) {
      toks.pop_back();
      continue;
    }
    break;
  }
  if (!toks.empty()) {
    std::string& last = toks.back();
    while (!last.empty() && (last.back() == ',' || last.back() == ';' || last.back() == ':')) {
      last.pop_back();
    }
  }
}

void strip_right_head(std::vector<std::string>& toks) {
  while (!toks.empty()) {
    std::string core = lower_ascii(strip_token_punct(toks.front()));
    if (core.empty() || kBoundaryResidue.count(core)) {
      toks.erase(toks.begin());
      continue;
    }
    break;
  }
  if (!toks.empty()) {
    std::string& first = toks.front();
    std::size_t k = 0;
    while (k < first.size() && (first[k] == ',' || first[k] == ';' || first[k] == ':')) ++k;
    first.erase(0, k);
  }
}

std::string clause_text(const std::vector<std::string>& toks) {
  std::string joined;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) joined += ' ';
    joined += toks[i];
  }
  joined = capitalize_first(joined);
  if (!ends_with_terminal(joined)) joined += '.';
  return joined;
}

}  // namespace

std::variant<CausalPair, RejectReason> split_and_rewrite(std::span<const std::string> tokens,
                                                         const ConnectiveMatch& match,
                                                         std::span<const ConnectiveSpec> specs,
                                                         const std::string& original_sentence,
                                                         const std::string& source_id) {
  const ConnectiveSpec& spec = specs[match.spec_index];
  const std::size_t i = match.token_index;
  const std::size_t span = spec.tokens.size();

  std::vector<std::string> left(tokens.begin(), tokens.begin() + i);
  std::vector<std::string> right(tokens.begin() + i + span, tokens.end());
  strip_left_tail(left);
  strip_right_head(right);

  if (left.size() < 2 || right.size() < 2) {
    return RejectReason{RejectCode::VAGUE_CLAUSE,
                        left.size() < 2 ? "left clause shorter than 2 words"
                                        : "right clause shorter than 2 words"};
  }

  CausalPair pair;
  pair.connective = spec;
  pair.source_id = source_id;
  pair.original_sentence = original_sentence;
  if (spec.direction == Direction::backward) {
    pair.effect_clause = clause_text(left);
    pair.cause_clause = clause_text(right);
  } else {
    pair.cause_clause = clause_text(left);
    pair.effect_clause = clause_text(right);
  }
  return pair;
}

AcceptAllValidator::AcceptAllValidator(std::vector<std::string> labels)
    : labels_(std::move(labels)) {}

std::vector<ValidatorResponse> AcceptAllValidator::validate(
    const std::vector<ValidatorRequest>& requests) {
  std::vector<ValidatorResponse> out;
  out.reserve(requests.size());
  for (const auto& r : requests) out.push_back({r.id, labels_});
  return out;
}

CommandValidator::CommandValidator(std::string command) : command_(std::move(command)) {}

std::vector<ValidatorResponse> CommandValidator::validate(
    const std::vector<ValidatorRequest>& requests) {
  static std::atomic<std::uint64_t> counter{0};
  namespace fs = std::filesystem;
  const std::uint64_t tag = counter.fetch_add(1);
  fs::path dir = fs::temp_directory_path();
  fs::path req_path = dir / ("causalaug_val_req_" + std::to_string(::getpid()) + "_" +
                             std::to_string(tag) + ".jsonl");
  fs::path resp_path = dir / ("causalaug_val_resp_" + std::to_string(::getpid()) + "_" +
                              std::to_string(tag) + ".jsonl");
  {
    std::ofstream req(req_path);
    if (!req) throw TransportError("validator: cannot create request file");
    for (const auto& r : requests) {
      nlohmann::json rec{{"sentence", r.sentence}, {"id", r.id}};
      req << rec.dump() << "\n";
    }
  }
  std::string cmd = command_ + " < " + req_path.string() + " > " + resp_path.string();
  int rc = std::system(cmd.c_str());
  std::vector<ValidatorResponse> responses;
  std::ifstream resp(resp_path);
  bool read_ok = static_cast<bool>(resp);
  std::string line;
  if (read_ok) {
    while (std::getline(resp, line)) {
      if (trim(line).empty()) continue;
      try {
        auto j = nlohmann::json::parse(line);
        ValidatorResponse r;
        r.id = j.at("id").get<std::string>();
        for (const auto& l : j.at("labels")) r.labels.push_back(l.get<std::string>());
        responses.push_back(std::move(r));
      } catch (const nlohmann::json::exception& e) {
        read_ok = false;
        break;
      }
    }
  }
  std::error_code ec;
  fs::remove(req_path, ec);
  fs::remove(resp_path, ec);
  if (rc != 0) throw TransportError("validator command failed with status " + std::to_string(rc));
  if (!read_ok) throw TransportError("validator produced unreadable responses");
  return responses;
}

void FilterStats::merge(const FilterStats& other) {
  sentences += other.sentences;
  with_connective += other.with_connective;
  accepted += other.accepted;
  utf8_skipped += other.utf8_skipped;
  for (const auto& [k, v] : other.rejects) rejects[k] += v;
}

FilterResult filter_text(std::string_view text, const std::string& source_name,
                         const FilterConfig& config) {
  FilterResult result;
  std::size_t skipped = 0;
  auto sentences = segment_sentences(text, config.segmenter, &skipped);
  result.stats.utf8_skipped = skipped;
  result.stats.sentences = sentences.size();

  auto reject = [&](const RejectReason& r) { ++result.stats.rejects[to_string(r.code)]; };

  std::vector<CausalPair> candidates;
  for (const auto& sentence : sentences) {
    auto tokens = split_ws(sentence.text);
    auto matches = match_connectives(tokens, config.connectives);
    if (matches.empty()) continue;
    ++result.stats.with_connective;
    if (auto r = check_constraints(tokens, matches, config.connectives, config.ic_lexicon)) {
      reject(*r);
      continue;
    }
    std::string source_id = source_name + ":" + std::to_string(sentence.offset);
    auto outcome =
        split_and_rewrite(tokens, matches.front(), config.connectives, sentence.text, source_id);
    if (auto* r = std::get_if<RejectReason>(&outcome)) {
      reject(*r);
      continue;
    }
    candidates.push_back(std::move(std::get<CausalPair>(outcome)));
  }

  if (config.validator == nullptr) {
    result.pairs = std::move(candidates);
  } else {
    std::vector<ValidatorRequest> requests;
    requests.reserve(candidates.size());
    for (const auto& p : candidates) requests.push_back({p.original_sentence, p.source_id});
    bool validated = true;
    std::map<std::string, std::vector<std::string>> labels_by_id;
    if (!requests.empty()) {
      try {
        for (auto& r : config.validator->validate(requests)) {
          labels_by_id[r.id] = std::move(r.labels);
        }
      } catch (const TransportError& e) {
        validated = false;
        log_warn("relation validator unavailable",
                 {{"error", e.what()}, {"fail_open", config.validator_fail_open}});
        if (!config.validator_fail_open) {
          for (std::size_t k = 0; k < candidates.size(); ++k) {
            reject({RejectCode::VALIDATOR_REJECT, "validator unreachable"});
          }
          candidates.clear();
        }
      }
    }
    if (validated) {
      for (auto& pair : candidates) {
        auto it = labels_by_id.find(pair.source_id);
        bool ok = false;
        if (it != labels_by_id.end()) {
          for (const auto& label : it->second) {
            if (config.accept_labels.count(label)) {
              ok = true;
              break;
            }
          }
        }
        if (ok) {
          result.pairs.push_back(std::move(pair));
        } else {
          reject({RejectCode::VALIDATOR_REJECT, pair.source_id});
        }
      }
      candidates.clear();
    } else if (config.validator_fail_open) {
      result.pairs = std::move(candidates);
    }
  }
  result.stats.accepted = result.pairs.size();
  return result;
}

FilterResult extract_corpus(const std::vector<std::string>& shard_paths,
                            const FilterConfig& config) {
  std::vector<std::string> paths = shard_paths;
  std::sort(paths.begin(), paths.end(), [](const std::string& a, const std::string& b) {
    return std::filesystem::path(a).filename().string() < std::filesystem::path(b).filename().string();
  });
  std::vector<FilterResult> shard_results(paths.size());
  parallel_for(paths.size(), config.jobs, [&](std::size_t i) {
    std::string text = read_file(paths[i]);
    std::string name = std::filesystem::path(paths[i]).filename().string();
    shard_results[i] = filter_text(text, name, config);
  });
  FilterResult merged;
  for (auto& r : shard_results) {
    merged.stats.merge(r.stats);
    for (auto& p : r.pairs) merged.pairs.push_back(std::move(p));
  }
  merged.stats.accepted = merged.pairs.size();
  return merged;
}

nlohmann::json pair_to_json(const CausalPair& pair) {
  return nlohmann::json{{"effect", pair.effect_clause},
                        {"cause", pair.cause_clause},
                        {"connective", pair.connective.surface},
                        {"direction", to_string(pair.connective.direction)},
                        {"source_id", pair.source_id},
                        {"original", pair.original_sentence}};
}

CausalPair pair_from_json(const nlohmann::json& record) {
  for (const char* key : {"effect", "cause", "connective", "direction", "source_id", "original"}) {
    if (!record.contains(key)) throw FieldError(std::string("pair record missing key '") + key + "'");
  }
  CausalPair pair;
  pair.effect_clause = record.at("effect").get<std::string>();
  pair.cause_clause = record.at("cause").get<std::string>();
  pair.connective = ConnectiveSpec(record.at("connective").get<std::string>(),
                                   direction_from_string(record.at("direction").get<std::string>()));
  pair.source_id = record.at("source_id").get<std::string>();
  pair.original_sentence = record.at("original").get<std::string>();
  return pair;
}

std::vector<CausalPair> read_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open pair file: " + path);
  std::vector<CausalPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      pairs.push_back(pair_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return pairs;
}

void write_pairs(const std::string& path, const std::vector<CausalPair>& pairs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot open output file: " + path);
  for (const auto& p : pairs) out << pair_to_json(p).dump() << "\n";
  if (!out) throw Error("write failed: " + path);
}

}  // namespace causalaug
