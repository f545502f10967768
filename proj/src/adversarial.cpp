#include "causalaug/adversarial.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "causalaug/error.hpp"
#include "causalaug/log.hpp"
#include "causalaug/parallel.hpp"
#include "causalaug/rng.hpp"

namespace causalaug {

std::string to_string(Pos p) {
  switch (p) {
    case Pos::noun: return "noun";
    case Pos::verb: return "verb";
    case Pos::adj: return "adj";
    case Pos::adv: return "adv";
    case Pos::other: return "other";
  }
  return "other";
}

Pos pos_from_string(std::string_view s) {
  if (s == "noun") return Pos::noun;
  if (s == "verb") return Pos::verb;
  if (s == "adj") return Pos::adj;
  if (s == "adv") return Pos::adv;
  if (s == "other") return Pos::other;
  throw ParseError("unknown part of speech: '" + std::string(s) + "'");
}

std::string to_string(Segment s) {
  switch (s) {
    case Segment::premise: return "premise";
    case Segment::choice1: return "choice1";
    case Segment::choice2: return "choice2";
  }
  return "premise";
}

Segment segment_from_string(std::string_view s) {
  if (s == "premise") return Segment::premise;
  if (s == "choice1") return Segment::choice1;
  if (s == "choice2") return Segment::choice2;
  throw ParseError("unknown segment: '" + std::string(s) + "'");
}

const std::string& segment_text(const CopaItem& item, Segment segment) {
  switch (segment) {
    case Segment::premise: return item.premise;
    case Segment::choice1: return item.choice1;
    case Segment::choice2: return item.choice2;
  }
  return item.premise;
}

namespace {

std::string lexicon_key(std::string_view lemma, Pos pos) {
  return lower_ascii(lemma) + '\x1f' + to_string(pos);
}

}  // namespace

SubstitutionLexicon::SubstitutionLexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open substitution lexicon: " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (std::size_t tab = t.find('\t'); tab != std::string::npos; tab = t.find('\t', start)) {
      cols.push_back(t.substr(start, tab - start));
      start = tab + 1;
    }
    cols.push_back(t.substr(start));
    if (cols.size() != 4) {
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": expected lemma<TAB>pos<TAB>sense_id<TAB>candidate");
    }
    add(trim(cols[0]), pos_from_string(trim(cols[1])), trim(cols[2]), trim(cols[3]));
  }
}

void SubstitutionLexicon::add(const std::string& lemma, Pos pos, const std::string& sense_id,
                              const std::string& candidate) {
  auto& slot = entries_[lexicon_key(lemma, pos)][sense_id];
  if (std::find(slot.begin(), slot.end(), candidate) == slot.end()) slot.push_back(candidate);
}

std::vector<std::string> SubstitutionLexicon::candidates(const std::string& lemma, Pos pos,
                                                         const std::string& sense_id) const {
  auto it = entries_.find(lexicon_key(lemma, pos));
  if (it == entries_.end()) return {};
  auto sense_it = it->second.find(sense_id);
  if (sense_it == it->second.end()) return {};
  return sense_it->second;
}

std::vector<std::string> SubstitutionLexicon::candidates_pos_only(const std::string& lemma,
                                                                  Pos pos) const {
  auto it = entries_.find(lexicon_key(lemma, pos));
  if (it == entries_.end()) return {};
  std::vector<std::string> out;
  for (const auto& [sense, cands] : it->second) {
    for (const auto& c : cands) {
      if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
    }
  }
  return out;
}

std::uint64_t combination_count(const SubstitutionGraph& graph, std::uint64_t cap) {
  std::uint64_t total = 1;
  for (const auto& pos : graph.positions) {
    std::uint64_t radix = pos.candidates.size() + 1;
    if (total > cap / radix + 1) return cap + 1;
    total *= radix;
    if (total > cap) return cap + 1;
  }
  return total;
}

SubstitutionGraph build_graph(const CopaItem& item, Segment segment,
                              std::span<const TokenAnnotation> annotations,
                              const SubstitutionLexicon& lexicon, bool pos_only) {
  const std::string& text = segment_text(item, segment);
  auto tokens = split_ws(text);
  if (annotations.size() != tokens.size()) {
    throw AlignmentError("item " + std::to_string(item.id) + " " + to_string(segment) + ": " +
                         std::to_string(tokens.size()) + " tokens vs " +
                         std::to_string(annotations.size()) + " annotations");
  }
  SubstitutionGraph graph;
  graph.segment = segment;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const TokenAnnotation& ann = annotations[i];
    std::string core = lower_ascii(strip_token_punct(tokens[i]));
    if (core != lower_ascii(strip_token_punct(ann.token))) {
      throw AlignmentError("item " + std::to_string(item.id) + " " + to_string(segment) +
                           ": token " + std::to_string(i) + " \"" + tokens[i] +
                           "\" does not match annotation \"" + ann.token + "\"");
    }
    if (ann.pos == Pos::other) continue;
    if (ann.sense_id.empty() && !pos_only) continue;
    auto cands = pos_only ? lexicon.candidates_pos_only(ann.lemma, ann.pos)
                          : lexicon.candidates(ann.lemma, ann.pos, ann.sense_id);
    std::erase_if(cands, [&](const std::string& c) { return lower_ascii(c) == core; });
    if (cands.empty()) continue;
    GraphPosition position;
    position.token_index = i;
    position.original = ann;
    position.candidates = std::move(cands);
    graph.positions.push_back(std::move(position));
  }
  return graph;
}

std::string apply_substitutions(const std::string& text,
                                std::span<const Substitution> substitutions) {
  auto tokens = split_ws(text);
  for (const auto& sub : substitutions) {
    if (sub.token_index >= tokens.size()) {
      throw ArgumentError("substitution index " + std::to_string(sub.token_index) +
                          " out of range for \"" + text + "\"");
    }
    std::string& token = tokens[sub.token_index];
    std::string core = strip_token_punct(token);
    if (lower_ascii(core) != lower_ascii(strip_token_punct(sub.from))) {
      throw ArgumentError("substitution source \"" + sub.from + "\" does not match token \"" +
                          token + "\"");
    }
    std::size_t at = core.empty() ? token.size() : token.find(core);
    std::string replacement = sub.to;
    if (!core.empty() && core[0] >= 'A' && core[0] <= 'Z') {
      replacement = capitalize_first(replacement);
    }
    token = token.substr(0, at) + replacement + token.substr(at + core.size());
  }
  std::string joined;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) joined += ' ';
    joined += tokens[i];
  }
  return joined;
}

CopaItem perturb_item(const CopaItem& item, Segment segment,
                      std::span<const Substitution> substitutions) {
  CopaItem out = item;
  std::string perturbed = apply_substitutions(segment_text(item, segment), substitutions);
  switch (segment) {
    case Segment::premise: out.premise = perturbed; break;
    case Segment::choice1: out.choice1 = perturbed; break;
    case Segment::choice2: out.choice2 = perturbed; break;
  }
  return out;
}

namespace {

struct Scored {
  double fitness = 0.0;
  int predicted = 1;
};

Scored score_item(const CopaItem& item, Backend& backend) {
  auto probs = backend.score({conv(item.premise, item.choice1, item.question),
                              conv(item.premise, item.choice2, item.question)});
  Scored s;
  s.predicted = probs[0].p1 >= probs[1].p1 ? 1 : 2;
  s.fitness = probs[2 - item.label].p1 - probs[item.label - 1].p1;
  return s;
}

std::vector<Substitution> choice_to_substitutions(const SubstitutionGraph& graph,
                                                  const std::vector<int>& choice) {
  std::vector<Substitution> subs;
  for (std::size_t p = 0; p < choice.size(); ++p) {
    if (choice[p] == 0) continue;
    const GraphPosition& position = graph.positions[p];
    subs.push_back({graph.segment, position.token_index, position.original.token,
                    position.candidates[choice[p] - 1]});
  }
  return subs;
}

std::string choice_key(const std::vector<int>& choice) {
  std::string key;
  for (int c : choice) {
    key += std::to_string(c);
    key += ',';
  }
  return key;
}

double powx(double x, double e) { return e == 1.0 ? x : std::pow(x, e); }

}  // namespace

double fitness(const CopaItem& perturbed, Backend& backend) {
  return score_item(perturbed, backend).fitness;
}

void AcoParams::validate() const {
  if (ants < 1) throw ArgumentError("ants must be >= 1");
  if (iterations < 1) throw ArgumentError("iterations must be >= 1");
  if (!(evaporation > 0.0 && evaporation < 1.0)) throw ArgumentError("evaporation must be in (0,1)");
  if (!(pheromone_init > 0.0)) throw ArgumentError("pheromone_init must be positive");
  if (!(max_substitution_fraction > 0.0 && max_substitution_fraction <= 1.0)) {
    throw ArgumentError("max_substitution_fraction must be in (0,1]");
  }
}

AttackResult aco_search(const CopaItem& item, const SubstitutionGraph& graph, Backend& backend,
                        const AcoParams& params) {
  params.validate();
  AttackResult result;
  result.item = item;
  result.perturbed_item = item;

  Scored base = score_item(item, backend);
  result.original_margin = base.fitness;
  result.final_margin = base.fitness;
  if (base.predicted != item.label || graph.positions.empty()) {
    return result;  // not attempted
  }
  result.attempted = true;

  const std::size_t n_pos = graph.positions.size();
  const int budget = static_cast<int>(
      std::ceil(params.max_substitution_fraction * static_cast<double>(n_pos)));

  std::vector<std::vector<double>> tau(n_pos);
  for (std::size_t p = 0; p < n_pos; ++p) {
    tau[p].assign(graph.positions[p].candidates.size() + 1, params.pheromone_init);
  }

  std::unordered_map<std::string, Scored> cache;
  auto evaluate = [&](const std::vector<int>& choice) -> Scored {
    std::string key = choice_key(choice);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto subs = choice_to_substitutions(graph, choice);
    Scored s = score_item(perturb_item(item, graph.segment, subs), backend);
    cache.emplace(std::move(key), s);
    return s;
  };

  std::vector<int> best_choice(n_pos, 0);
  double best_fitness = base.fitness;
  bool flipped = false;
  int iterations_used = params.iterations;

  struct AntTrace {
    std::vector<int> choice;
    double fitness;
  };

  for (int it = 1; it <= params.iterations && !flipped; ++it) {
    std::vector<AntTrace> ants;
    ants.reserve(params.ants);
    std::uint64_t iter_seed = derive_seed(params.rng_seed, static_cast<std::uint64_t>(it));
    for (int a = 0; a < params.ants; ++a) {
      Rng rng(derive_seed(iter_seed, static_cast<std::uint64_t>(a)));

      // Visit positions in a seeded random order so the substitution budget
      // does not systematically favor early positions.
      std::vector<std::size_t> order(n_pos);
      std::iota(order.begin(), order.end(), std::size_t{0});
      for (std::size_t i = n_pos; i > 1; --i) {
        std::swap(order[i - 1], order[rng.uniform_index(i)]);
      }

      std::vector<int> choice(n_pos, 0);
      int used = 0;
      for (std::size_t p : order) {
        if (used >= budget) continue;
        const auto& options = tau[p];
        double total = 0.0;
        for (double t : options) total += powx(t, params.pheromone_exponent);
        double r = rng.uniform_real() * total;
        std::size_t picked = options.size() - 1;
        double acc = 0.0;
        for (std::size_t o = 0; o + 1 < options.size(); ++o) {
          acc += powx(options[o], params.pheromone_exponent);
          if (r < acc) {
            picked = o;
            break;
          }
        }
        choice[p] = static_cast<int>(picked);
        if (picked != 0) ++used;
      }

      Scored scored = evaluate(choice);
      ants.push_back({choice, scored.fitness});
      if (scored.fitness > best_fitness) {
        best_fitness = scored.fitness;
        best_choice = choice;
      }
      if (scored.predicted != item.label) {
        best_fitness = scored.fitness;
        best_choice = choice;
        flipped = true;
        iterations_used = it;
        break;
      }
    }
    if (flipped) break;

    for (auto& row : tau) {
      for (double& t : row) t *= (1.0 - params.evaporation);
    }
    double f_min = ants.front().fitness, f_max = ants.front().fitness;
    std::size_t best_ant = 0;
    for (std::size_t a = 1; a < ants.size(); ++a) {
      f_min = std::min(f_min, ants[a].fitness);
      f_max = std::max(f_max, ants[a].fitness);
      if (ants[a].fitness > ants[best_ant].fitness) best_ant = a;
    }
    double deposit = f_max > f_min ? (ants[best_ant].fitness - f_min) / (f_max - f_min) : 0.5;
    deposit = std::clamp(deposit, 0.0, 1.0);
    for (std::size_t p = 0; p < n_pos; ++p) {
      tau[p][ants[best_ant].choice[p]] += deposit;
    }
  }

  result.success = flipped;
  result.iterations_used = iterations_used;
  result.final_margin = best_fitness;
  result.substitutions = choice_to_substitutions(graph, best_choice);
  result.perturbed_item = perturb_item(item, graph.segment, result.substitutions);
  return result;
}

AttackResult brute_force_search(const CopaItem& item, const SubstitutionGraph& graph,
                                Backend& backend, std::uint64_t max_combinations) {
  std::uint64_t total = combination_count(graph, max_combinations);
  if (total > max_combinations) {
    throw RefusalError("substitution graph exceeds " + std::to_string(max_combinations) +
                       " combinations");
  }

  AttackResult result;
  result.item = item;
  result.perturbed_item = item;
  Scored base = score_item(item, backend);
  result.original_margin = base.fitness;
  result.final_margin = base.fitness;
  if (base.predicted != item.label) return result;
  result.attempted = true;

  const std::size_t n_pos = graph.positions.size();
  std::vector<int> choice(n_pos, 0);
  std::vector<int> best_flip;
  int best_flip_subs = std::numeric_limits<int>::max();
  double best_flip_fitness = base.fitness;
  std::vector<int> best_any(n_pos, 0);
  double best_any_fitness = base.fitness;

  auto sub_positions = [&](const std::vector<int>& c) {
    std::vector<std::pair<std::size_t, int>> key;
    for (std::size_t p = 0; p < c.size(); ++p) {
      if (c[p] != 0) key.emplace_back(p, c[p]);
    }
    return key;
  };

  for (std::uint64_t idx = 0; idx < total; ++idx) {
    std::uint64_t rem = idx;
    int subs = 0;
    for (std::size_t p = n_pos; p-- > 0;) {
      std::uint64_t radix = graph.positions[p].candidates.size() + 1;
      choice[p] = static_cast<int>(rem % radix);
      rem /= radix;
      if (choice[p] != 0) ++subs;
    }
    Scored scored = score_item(
        perturb_item(item, graph.segment, choice_to_substitutions(graph, choice)), backend);
    if (scored.fitness > best_any_fitness) {
      best_any_fitness = scored.fitness;
      best_any = choice;
    }
    if (scored.predicted != item.label) {
      bool better = subs < best_flip_subs ||
                    (subs == best_flip_subs && sub_positions(choice) < sub_positions(best_flip));
      if (best_flip.empty() || better) {
        best_flip = choice;
        best_flip_subs = subs;
        best_flip_fitness = scored.fitness;
      }
    }
  }

  const std::vector<int>& final_choice = best_flip.empty() ? best_any : best_flip;
  result.success = !best_flip.empty();
  result.substitutions = choice_to_substitutions(graph, final_choice);
  result.perturbed_item = perturb_item(item, graph.segment, result.substitutions);
  result.final_margin = best_flip.empty() ? best_any_fitness : best_flip_fitness;
  return result;
}

AnnotationStore::AnnotationStore(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open annotation file: " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      std::vector<TokenAnnotation> tokens;
      for (const auto& tok : j.at("tokens")) {
        TokenAnnotation ann;
        ann.token = tok.at("token").get<std::string>();
        ann.lemma = tok.at("lemma").get<std::string>();
        ann.pos = pos_from_string(tok.at("pos").get<std::string>());
        ann.sense_id = tok.value("sense_id", std::string());
        tokens.push_back(std::move(ann));
      }
      add(j.at("item_id").get<int>(),
          segment_from_string(j.at("segment").get<std::string>()), std::move(tokens));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void AnnotationStore::add(int item_id, Segment segment, std::vector<TokenAnnotation> tokens) {
  by_key_[{item_id, static_cast<int>(segment)}] = std::move(tokens);
}

const std::vector<TokenAnnotation>* AnnotationStore::find(int item_id, Segment segment) const {
  auto it = by_key_.find({item_id, static_cast<int>(segment)});
  return it == by_key_.end() ? nullptr : &it->second;
}

nlohmann::json attack_result_to_json(const AttackResult& result) {
  nlohmann::json subs = nlohmann::json::array();
  for (const auto& s : result.substitutions) {
    subs.push_back({{"segment", to_string(s.segment)},
                    {"token_index", s.token_index},
                    {"from", s.from},
                    {"to", s.to}});
  }
  return nlohmann::json{{"item", item_to_json(result.item)},
                        {"perturbed_item", item_to_json(result.perturbed_item)},
                        {"substitutions", subs},
                        {"attempted", result.attempted},
                        {"success", result.success},
                        {"original_margin", result.original_margin},
                        {"final_margin", result.final_margin},
                        {"iterations_used", result.iterations_used}};
}

AttackResult attack_result_from_json(const nlohmann::json& record) {
  AttackResult result;
  result.item = item_from_json(record.at("item"));
  result.perturbed_item = item_from_json(record.at("perturbed_item"));
  for (const auto& s : record.at("substitutions")) {
    result.substitutions.push_back({segment_from_string(s.at("segment").get<std::string>()),
                                    s.at("token_index").get<std::size_t>(),
                                    s.at("from").get<std::string>(),
                                    s.at("to").get<std::string>()});
  }
  result.attempted = record.at("attempted").get<bool>();
  result.success = record.at("success").get<bool>();
  result.original_margin = record.at("original_margin").get<double>();
  result.final_margin = record.at("final_margin").get<double>();
  result.iterations_used = record.at("iterations_used").get<int>();
  return result;
}

std::vector<CopaItem> AttackSummary::adversarial_items() const {
  std::vector<CopaItem> out;
  for (const auto& r : results) {
    if (!r.success) continue;
    CopaItem item = r.perturbed_item;
    item.extra["adversarial_of"] = r.item.id;
    out.push_back(std::move(item));
  }
  return out;
}

AttackSummary attack_dataset(const std::vector<CopaItem>& items, Backend& backend,
                             const SubstitutionLexicon& lexicon, const AnnotationStore& annotations,
                             const AttackOptions& options) {
  options.params.validate();
  AttackSummary summary;
  summary.results.resize(items.size());
  std::atomic<std::uint64_t> errors{0};

  parallel_for(items.size(), options.jobs, [&](std::size_t i) {
    const CopaItem& item = items[i];
    AttackResult fallback;
    fallback.item = item;
    fallback.perturbed_item = item;
    try {
      Scored base = score_item(item, backend);
      fallback.original_margin = base.fitness;
      fallback.final_margin = base.fitness;
      if (base.predicted != item.label) {
        summary.results[i] = std::move(fallback);
        return;
      }
      fallback.attempted = true;

      std::uint64_t item_seed =
          derive_seed(options.params.rng_seed, static_cast<std::uint64_t>(item.id));
      AttackResult chosen = fallback;
      bool have = false;
      for (Segment segment : {Segment::premise, Segment::choice1, Segment::choice2}) {
        const auto* ann = annotations.find(item.id, segment);
        if (ann == nullptr) continue;
        SubstitutionGraph graph = build_graph(item, segment, *ann, lexicon, options.pos_only);
        if (graph.positions.empty()) continue;
        AcoParams params = options.params;
        params.rng_seed = derive_seed(item_seed, to_string(segment));
        AttackResult r = aco_search(item, graph, backend, params);
        if (r.success) {
          chosen = std::move(r);
          have = true;
          break;
        }
        if (!have || r.final_margin > chosen.final_margin) {
          chosen = std::move(r);
          have = true;
        }
      }
      chosen.attempted = true;
      summary.results[i] = std::move(chosen);
    } catch (const Error& e) {
      ++errors;
      log_error("attack failed", {{"item_id", item.id}, {"error", e.what()}});
      fallback.attempted = false;
      summary.results[i] = std::move(fallback);
    }
  });

  for (const auto& r : summary.results) {
    if (r.attempted) ++summary.attempted;
    if (r.success) ++summary.successes;
  }
  summary.errors = errors;
  summary.success_rate = summary.attempted == 0
                             ? 0.0
                             : static_cast<double>(summary.successes) /
                                   static_cast<double>(summary.attempted);
  return summary;
}

}  // namespace causalaug
