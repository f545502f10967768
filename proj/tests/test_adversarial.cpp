#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "causalaug/adversarial.hpp"
#include "causalaug/error.hpp"

using namespace causalaug;

namespace {

CopaItem make_item(int id, const std::string& premise, const std::string& c1,
                   const std::string& c2, int label) {
  CopaItem item;
  item.id = id;
  item.premise = premise;
  item.choice1 = c1;
  item.choice2 = c2;
  item.question = Question::cause;
  item.label = label;
  return item;
}

// Victim correctly predicts choice1 via the shared "balloon"; swapping the
// premise's "balloon" for "cake" hands the overlap to choice2.
CopaItem balloon_item(int id) {
  return make_item(id, "The red balloon popped.", "The balloon hit a nail.",
                   "The cake burned badly.", 1);
}

std::vector<TokenAnnotation> balloon_premise_annotations() {
  return {{"The", "the", Pos::other, ""},
          {"red", "red", Pos::adj, "red%1"},
          {"balloon", "balloon", Pos::noun, "balloon%1"},
          {"popped", "pop", Pos::verb, "pop%1"}};
}

SubstitutionLexicon balloon_lexicon() {
  SubstitutionLexicon lex;
  lex.add("balloon", Pos::noun, "balloon%1", "cake");
  return lex;
}

class FixedBackend : public Backend {
 public:
  explicit FixedBackend(std::vector<ScorePair> probs) : probs_(std::move(probs)) {}
  std::vector<ScorePair> score(const std::vector<std::string>&) override { return probs_; }
  std::string generate(const std::string&, int, std::uint64_t) override { return ""; }

 private:
  std::vector<ScorePair> probs_;
};

// Never flips; records the largest number of substituted markers it ever saw.
class BudgetSpyBackend : public Backend {
 public:
  int max_seen = 0;

  std::vector<ScorePair> score(const std::vector<std::string>& sequences) override {
    int count = 0;
    for (std::size_t at = sequences[0].find("zzz"); at != std::string::npos;
         at = sequences[0].find("zzz", at + 3)) {
      ++count;
    }
    max_seen = std::max(max_seen, count);
    return {{0.4, 0.6}, {0.6, 0.4}};
  }
  std::string generate(const std::string&, int, std::uint64_t) override { return ""; }
};

constexpr double kMarginFlip = 0.18122458131752704;  // sigmoid(-0.2) - sigmoid(-1)

}  // namespace

TEST_CASE("pos and segment string round trips") {
  CHECK(pos_from_string("noun") == Pos::noun);
  CHECK(pos_from_string("adv") == Pos::adv);
  CHECK(to_string(Pos::adj) == "adj");
  CHECK_THROWS_AS(pos_from_string("prep"), ParseError);
  CHECK(segment_from_string("choice2") == Segment::choice2);
  CHECK(to_string(Segment::premise) == "premise");
  CHECK_THROWS_AS(segment_from_string("question"), ParseError);

  CopaItem item = balloon_item(1);
  CHECK(segment_text(item, Segment::premise) == item.premise);
  CHECK(segment_text(item, Segment::choice1) == item.choice1);
  CHECK(segment_text(item, Segment::choice2) == item.choice2);
}

TEST_CASE("substitution lexicon lookups") {
  SubstitutionLexicon lex;
  lex.add("cigarette", Pos::noun, "cigarette%1", "butt");
  lex.add("cigarette", Pos::noun, "cigarette%1", "smoke");
  lex.add("cigarette", Pos::noun, "cigarette%1", "butt");  // duplicate ignored
  lex.add("cigarette", Pos::noun, "cigarette%2", "smoke");
  lex.add("cigarette", Pos::noun, "cigarette%2", "drag");
  lex.add("cigarette", Pos::verb, "cigarette%3", "puff");

  CHECK(lex.candidates("cigarette", Pos::noun, "cigarette%1") ==
        std::vector<std::string>{"butt", "smoke"});
  CHECK(lex.candidates("cigarette", Pos::noun, "cigarette%9").empty());
  CHECK(lex.candidates("pipe", Pos::noun, "x").empty());
  // pos_only pools senses of the same (lemma, pos) and dedups.
  CHECK(lex.candidates_pos_only("cigarette", Pos::noun) ==
        std::vector<std::string>{"butt", "smoke", "drag"});
  CHECK(lex.candidates_pos_only("cigarette", Pos::adj).empty());
  // Lemma matching is case-insensitive.
  CHECK(lex.candidates("CIGARETTE", Pos::noun, "cigarette%1").size() == 2);
}

TEST_CASE("substitution lexicon file parsing") {
  std::string path = "test_lexicon_tmp.tsv";
  {
    std::ofstream out(path);
    out << "# lemma\tpos\tsense\tcandidate\n"
        << "cigarette\tnoun\tcigarette%1\tbutt\n"
        << "crave\tverb\tcrave%2\twant\n";
  }
  SubstitutionLexicon lex(path);
  CHECK(lex.candidates("cigarette", Pos::noun, "cigarette%1") ==
        std::vector<std::string>{"butt"});
  CHECK(lex.candidates("crave", Pos::verb, "crave%2") == std::vector<std::string>{"want"});

  {
    std::ofstream out(path);
    out << "cigarette\tnoun\tbutt\n";  // three columns
  }
  try {
    SubstitutionLexicon bad(path);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).rfind(path + ":1:", 0) == 0);
  }
  std::remove(path.c_str());
  CHECK_THROWS_AS(SubstitutionLexicon{std::string("no_such_lexicon.tsv")}, ArgumentError);
}

TEST_CASE("build_graph finds the cigarette position") {
  CopaItem item = make_item(3, "The man craved a cigarette.", "He quit smoking a week ago.",
                            "He finished his dinner early.", 1);
  std::vector<TokenAnnotation> annotations = {
      {"The", "the", Pos::other, ""},
      {"man", "man", Pos::noun, "man%1"},
      {"craved", "crave", Pos::verb, "crave%2"},
      {"a", "a", Pos::other, ""},
      {"cigarette", "cigarette", Pos::noun, "cigarette%1"},
  };
  SubstitutionLexicon lex;
  lex.add("cigarette", Pos::noun, "cigarette%1", "butt");
  lex.add("cigarette", Pos::noun, "cigarette%1", "cigarette");  // original: dropped

  auto graph = build_graph(item, Segment::premise, annotations, lex);
  CHECK(graph.segment == Segment::premise);
  REQUIRE(graph.positions.size() == 1);
  CHECK(graph.positions[0].token_index == 4);
  CHECK(graph.positions[0].original.lemma == "cigarette");
  CHECK(graph.positions[0].candidates == std::vector<std::string>{"butt"});
}

TEST_CASE("build_graph skips tokens without admissible candidates") {
  CopaItem item = make_item(4, "The man craved a cigarette.", "c1 words here.", "c2 words here.", 1);
  std::vector<TokenAnnotation> annotations = {
      {"The", "the", Pos::other, ""},
      {"man", "man", Pos::noun, ""},            // no sense: strict mode skips
      {"craved", "crave", Pos::verb, "crave%9"},  // sense not in lexicon
      {"a", "a", Pos::other, ""},
      {"cigarette", "cigarette", Pos::noun, "cigarette%1"},
  };
  SubstitutionLexicon lex;
  lex.add("man", Pos::noun, "man%1", "fellow");
  lex.add("crave", Pos::verb, "crave%2", "want");
  lex.add("cigarette", Pos::noun, "cigarette%1", "butt");

  auto graph = build_graph(item, Segment::premise, annotations, lex);
  REQUIRE(graph.positions.size() == 1);
  CHECK(graph.positions[0].token_index == 4);

  // pos_only restores the sense-less and sense-mismatched tokens.
  auto relaxed = build_graph(item, Segment::premise, annotations, lex, true);
  REQUIRE(relaxed.positions.size() == 3);
  CHECK(relaxed.positions[0].token_index == 1);
  CHECK(relaxed.positions[0].candidates == std::vector<std::string>{"fellow"});
  CHECK(relaxed.positions[1].candidates == std::vector<std::string>{"want"});
}

TEST_CASE("build_graph reports misalignment with indices") {
  CopaItem item = balloon_item(1);
  auto annotations = balloon_premise_annotations();
  annotations.pop_back();
  CHECK_THROWS_WITH_AS(
      build_graph(item, Segment::premise, annotations, SubstitutionLexicon{}),
      "item 1 premise: 4 tokens vs 3 annotations", AlignmentError);

  annotations = balloon_premise_annotations();
  annotations[2].token = "kite";
  CHECK_THROWS_WITH_AS(
      build_graph(item, Segment::premise, annotations, SubstitutionLexicon{}),
      "item 1 premise: token 2 \"balloon\" does not match annotation \"kite\"",
      AlignmentError);
}

TEST_CASE("build_graph yields an empty graph without content words") {
  CopaItem item = make_item(5, "It was there.", "c1 here.", "c2 here.", 1);
  std::vector<TokenAnnotation> annotations = {
      {"It", "it", Pos::other, ""}, {"was", "be", Pos::other, ""}, {"there", "there", Pos::other, ""}};
  SubstitutionLexicon lex;
  lex.add("be", Pos::verb, "be%1", "is");
  CHECK(build_graph(item, Segment::premise, annotations, lex).positions.empty());
}

TEST_CASE("combination_count multiplies option counts") {
  SubstitutionGraph graph;
  graph.positions.push_back({0, {}, {"a", "b"}});
  graph.positions.push_back({1, {}, {"c", "d"}});
  CHECK(combination_count(graph, 1000) == 9);
  CHECK(combination_count(graph, 8) == 9);  // saturates past the cap
  CHECK(combination_count(SubstitutionGraph{}, 10) == 1);

  for (int i = 0; i < 40; ++i) graph.positions.push_back({static_cast<std::size_t>(i + 2), {}, {"x", "y", "z"}});
  CHECK(combination_count(graph, 1u << 20) == (1u << 20) + 1);
}

TEST_CASE("apply_substitutions keeps punctuation and case") {
  CHECK(apply_substitutions("The man craved a cigarette.",
                            std::vector<Substitution>{{Segment::premise, 4, "cigarette", "butt"}}) ==
        "The man craved a butt.");
  CHECK(apply_substitutions("Rain soaked the tent.",
                            std::vector<Substitution>{{Segment::premise, 0, "rain", "water"}}) ==
        "Water soaked the tent.");
  CHECK(apply_substitutions("He said (cigarette), loudly.",
                            std::vector<Substitution>{{Segment::premise, 2, "cigarette", "butt"}}) ==
        "He said (butt), loudly.");
  // Multiple substitutions in one pass.
  CHECK(apply_substitutions("The red balloon popped.",
                            std::vector<Substitution>{{Segment::premise, 1, "red", "blue"},
                                                      {Segment::premise, 2, "balloon", "kite"}}) ==
        "The blue kite popped.");

  CHECK_THROWS_AS(apply_substitutions("Two words.", std::vector<Substitution>{
                                          {Segment::premise, 5, "x", "y"}}),
                  ArgumentError);
  CHECK_THROWS_AS(apply_substitutions("Two words.", std::vector<Substitution>{
                                          {Segment::premise, 0, "three", "y"}}),
                  ArgumentError);
}

TEST_CASE("perturb_item swaps only the named segment") {
  CopaItem item = balloon_item(1);
  std::vector<Substitution> subs = {{Segment::choice2, 1, "cake", "pie"}};
  CopaItem out = perturb_item(item, Segment::choice2, subs);
  CHECK(out.premise == item.premise);
  CHECK(out.choice1 == item.choice1);
  CHECK(out.choice2 == "The pie burned badly.");
}

TEST_CASE("fitness is the margin of the wrong choice") {
  CopaItem item = make_item(1, "P one two.", "C one.", "C two.", 2);
  FixedBackend fixed({{0.2, 0.8}, {0.7, 0.3}});
  CHECK(fitness(item, fixed) == doctest::Approx(0.5).epsilon(1e-12));

  FixedBackend equal({{0.5, 0.5}, {0.5, 0.5}});
  CHECK(fitness(item, equal) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("fitness rises when a perturbation strips shared premise words") {
  LocalStubBackend victim;
  CopaItem item = balloon_item(1);
  double before = fitness(item, victim);
  CopaItem kite = item;
  kite.premise = "The red kite popped.";
  double after = fitness(kite, victim);
  CHECK(before == doctest::Approx(-kMarginFlip).epsilon(1e-9));
  CHECK(after == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(after > before);
}

TEST_CASE("aco params validation") {
  AcoParams params;
  CHECK_NOTHROW(params.validate());
  AcoParams bad = params;
  bad.ants = 0;
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
  bad = params;
  bad.evaporation = 1.0;
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
  bad = params;
  bad.max_substitution_fraction = 0.0;
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
  bad = params;
  bad.pheromone_init = -1.0;
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
}

TEST_CASE("aco_search flips a single-candidate graph in one iteration") {
  LocalStubBackend victim;
  CopaItem item = balloon_item(1);
  auto graph = build_graph(item, Segment::premise, balloon_premise_annotations(),
                           balloon_lexicon());
  REQUIRE(graph.positions.size() == 1);

  AcoParams params;
  params.rng_seed = 7;
  auto result = aco_search(item, graph, victim, params);
  CHECK(result.attempted);
  CHECK(result.success);
  CHECK(result.iterations_used == 1);
  REQUIRE(result.substitutions.size() == 1);
  CHECK(result.substitutions[0].segment == Segment::premise);
  CHECK(result.substitutions[0].token_index == 2);
  CHECK(result.substitutions[0].from == "balloon");
  CHECK(result.substitutions[0].to == "cake");
  CHECK(result.perturbed_item.premise == "The red cake popped.");
  CHECK(result.original_margin == doctest::Approx(-kMarginFlip).epsilon(1e-9));
  CHECK(result.final_margin == doctest::Approx(kMarginFlip).epsilon(1e-9));

  // Same seed, same outcome.
  auto again = aco_search(item, graph, victim, params);
  CHECK(attack_result_to_json(again) == attack_result_to_json(result));
}

TEST_CASE("aco_search marks misclassified items as not attempted") {
  LocalStubBackend victim;
  // Gold is choice2 but the victim prefers the overlapping choice1.
  CopaItem item = make_item(2, "The red balloon popped.", "The balloon hit a nail.",
                            "The cake burned badly.", 2);
  auto graph = build_graph(item, Segment::premise, balloon_premise_annotations(),
                           balloon_lexicon());
  auto result = aco_search(item, graph, victim, AcoParams{});
  CHECK_FALSE(result.attempted);
  CHECK_FALSE(result.success);
  CHECK(result.substitutions.empty());
  CHECK(result.iterations_used == 0);
}

TEST_CASE("aco_search with an empty graph is not attempted") {
  LocalStubBackend victim;
  auto result = aco_search(balloon_item(1), SubstitutionGraph{}, victim, AcoParams{});
  CHECK_FALSE(result.attempted);
  CHECK_FALSE(result.success);
}

TEST_CASE("aco_search respects the substitution budget") {
  CopaItem item = make_item(9, "aaa bbb ccc ddd eee fff ggg hhh", "one choice.", "two choice.", 1);
  SubstitutionGraph graph;
  graph.segment = Segment::premise;
  const char* words[] = {"aaa", "bbb", "ccc", "ddd", "eee", "fff", "ggg", "hhh"};
  for (std::size_t i = 0; i < 8; ++i) {
    graph.positions.push_back({i, {words[i], words[i], Pos::noun, "s%1"}, {"zzz"}});
  }

  BudgetSpyBackend spy;
  AcoParams params;
  params.ants = 10;
  params.iterations = 10;
  params.rng_seed = 3;
  auto result = aco_search(item, graph, spy, params);  // budget = ceil(0.25 * 8) = 2
  CHECK_FALSE(result.success);
  CHECK(result.iterations_used == 10);
  CHECK(result.substitutions.empty());  // nothing beat the unperturbed margin
  CHECK(spy.max_seen == 2);

  BudgetSpyBackend wide;
  params.max_substitution_fraction = 1.0;
  aco_search(item, graph, wide, params);
  CHECK(wide.max_seen > 2);
  CHECK(wide.max_seen <= 8);
}

TEST_CASE("brute_force_search returns the planted minimal flip") {
  LocalStubBackend victim;
  CopaItem item = balloon_item(1);
  SubstitutionLexicon lex;
  lex.add("balloon", Pos::noun, "balloon%1", "kite");
  lex.add("balloon", Pos::noun, "balloon%1", "cake");
  lex.add("pop", Pos::verb, "pop%1", "burned");
  lex.add("pop", Pos::verb, "pop%1", "flew");
  auto graph = build_graph(item, Segment::premise, balloon_premise_annotations(), lex);
  REQUIRE(graph.positions.size() == 2);
  CHECK(combination_count(graph, 100) == 9);

  auto result = brute_force_search(item, graph, victim, 256);
  CHECK(result.attempted);
  CHECK(result.success);
  // Two-substitution flips exist with larger margins; the one-substitution
  // balloon->cake flip must win.
  REQUIRE(result.substitutions.size() == 1);
  CHECK(result.substitutions[0].from == "balloon");
  CHECK(result.substitutions[0].to == "cake");
  CHECK(result.perturbed_item.premise == "The red cake popped.");
  CHECK(result.final_margin == doctest::Approx(kMarginFlip).epsilon(1e-9));
}

TEST_CASE("brute_force_search breaks ties towards earlier candidates") {
  LocalStubBackend victim;
  CopaItem item = make_item(1, "The red balloon popped.", "The balloon hit a nail.",
                            "The cake burned badly.", 1);
  SubstitutionLexicon lex;
  // Both candidates flip with one substitution; the first-listed wins.
  lex.add("balloon", Pos::noun, "balloon%1", "cake");
  lex.add("balloon", Pos::noun, "balloon%1", "burned");
  auto graph = build_graph(item, Segment::premise, balloon_premise_annotations(), lex);
  auto result = brute_force_search(item, graph, victim, 256);
  REQUIRE(result.success);
  REQUIRE(result.substitutions.size() == 1);
  CHECK(result.substitutions[0].to == "cake");
}

TEST_CASE("brute_force_search without a flip keeps the best margin") {
  LocalStubBackend victim;
  CopaItem item = balloon_item(1);
  SubstitutionLexicon lex;
  lex.add("balloon", Pos::noun, "balloon%1", "kite");  // removes overlap, ties at zero
  auto graph = build_graph(item, Segment::premise, balloon_premise_annotations(), lex);
  auto result = brute_force_search(item, graph, victim, 256);
  CHECK(result.attempted);
  CHECK_FALSE(result.success);
  REQUIRE(result.substitutions.size() == 1);
  CHECK(result.substitutions[0].to == "kite");
  CHECK(result.final_margin == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("brute_force_search refuses oversized graphs") {
  LocalStubBackend victim;
  CopaItem item = balloon_item(1);
  SubstitutionGraph graph;
  graph.segment = Segment::premise;
  for (std::size_t i = 0; i < 4; ++i) {
    graph.positions.push_back({i, {"x", "x", Pos::noun, "s"}, {"a", "b", "c"}});
  }
  CHECK_THROWS_AS(brute_force_search(item, graph, victim, 255), RefusalError);  // 4^4 = 256
  CHECK(combination_count(graph, 256) == 256);
}

TEST_CASE("aco success is confirmed by the brute-force oracle") {
  LocalStubBackend victim;
  CopaItem item = balloon_item(1);
  SubstitutionLexicon lex;
  lex.add("balloon", Pos::noun, "balloon%1", "kite");
  lex.add("balloon", Pos::noun, "balloon%1", "cake");
  lex.add("pop", Pos::verb, "pop%1", "burned");
  lex.add("red", Pos::adj, "red%1", "blue");
  auto graph = build_graph(item, Segment::premise, balloon_premise_annotations(), lex);

  AcoParams params;
  params.max_substitution_fraction = 1.0;
  params.rng_seed = 11;
  auto aco = aco_search(item, graph, victim, params);
  auto oracle = brute_force_search(item, graph, victim, 256);
  CHECK(aco.success == oracle.success);
  CHECK(aco.success);
  // Re-scoring the perturbed item reproduces the reported flip.
  CHECK(fitness(aco.perturbed_item, victim) == doctest::Approx(aco.final_margin).epsilon(1e-9));
  CHECK(fitness(aco.perturbed_item, victim) > 0.0);
}

TEST_CASE("attack result json round trip") {
  LocalStubBackend victim;
  CopaItem item = balloon_item(1);
  auto graph = build_graph(item, Segment::premise, balloon_premise_annotations(),
                           balloon_lexicon());
  auto result = aco_search(item, graph, victim, AcoParams{});
  auto record = attack_result_to_json(result);
  auto back = attack_result_from_json(record);
  CHECK(attack_result_to_json(back) == record);
  CHECK(back.success == result.success);
  CHECK(back.substitutions.size() == result.substitutions.size());
  CHECK(back.perturbed_item.premise == result.perturbed_item.premise);
}

TEST_CASE("annotation store lookup and parsing") {
  AnnotationStore store;
  store.add(1, Segment::premise, balloon_premise_annotations());
  REQUIRE(store.find(1, Segment::premise) != nullptr);
  CHECK(store.find(1, Segment::premise)->size() == 4);
  CHECK(store.find(1, Segment::choice1) == nullptr);
  CHECK(store.find(2, Segment::premise) == nullptr);

  std::string path = "test_annotations_tmp.jsonl";
  {
    std::ofstream out(path);
    out << R"({"item_id":1,"segment":"premise","tokens":[)"
        << R"({"token":"The","lemma":"the","pos":"other"},)"
        << R"({"token":"red","lemma":"red","pos":"adj","sense_id":"red%1"},)"
        << R"({"token":"balloon","lemma":"balloon","pos":"noun","sense_id":"balloon%1"},)"
        << R"({"token":"popped","lemma":"pop","pos":"verb","sense_id":"pop%1"}]})"
        << "\n";
  }
  AnnotationStore loaded(path);
  const auto* tokens = loaded.find(1, Segment::premise);
  REQUIRE(tokens != nullptr);
  REQUIRE(tokens->size() == 4);
  CHECK((*tokens)[0].sense_id == "");  // omitted key defaults to empty
  CHECK((*tokens)[2].lemma == "balloon");
  CHECK((*tokens)[3].pos == Pos::verb);

  {
    std::ofstream out(path);
    out << "{bad\n";
  }
  try {
    AnnotationStore broken(path);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).rfind(path + ":1:", 0) == 0);
  }
  std::remove(path.c_str());
  CHECK_THROWS_AS(AnnotationStore{std::string("no_such_annotations.jsonl")}, ArgumentError);
}

TEST_CASE("attack_dataset rate over a planted dataset") {
  LocalStubBackend victim;
  SubstitutionLexicon lex = balloon_lexicon();
  AnnotationStore annotations;

  std::vector<CopaItem> items;
  // Three flippable items with annotations.
  for (int id = 1; id <= 3; ++id) {
    items.push_back(balloon_item(id));
    annotations.add(id, Segment::premise, balloon_premise_annotations());
  }
  // Seven correctly classified items without annotations: attempted, no flip.
  for (int id = 4; id <= 10; ++id) {
    items.push_back(balloon_item(id));
  }

  AttackOptions options;
  options.params.rng_seed = 99;
  auto summary = attack_dataset(items, victim, lex, annotations, options);
  REQUIRE(summary.results.size() == 10);
  CHECK(summary.attempted == 10);
  CHECK(summary.successes == 3);
  CHECK(summary.errors == 0);
  CHECK(summary.success_rate == doctest::Approx(0.3).epsilon(1e-12));
  for (int i = 0; i < 3; ++i) CHECK(summary.results[i].success);
  for (int i = 3; i < 10; ++i) {
    CHECK(summary.results[i].attempted);
    CHECK_FALSE(summary.results[i].success);
  }

  auto adversarial = summary.adversarial_items();
  REQUIRE(adversarial.size() == 3);
  CHECK(adversarial[0].premise == "The red cake popped.");
  CHECK(adversarial[0].extra.at("adversarial_of") == 1);
  CHECK(adversarial[1].extra.at("adversarial_of") == 2);
}

TEST_CASE("attack_dataset skips misclassified items") {
  LocalStubBackend victim;
  SubstitutionLexicon lex = balloon_lexicon();
  AnnotationStore annotations;
  annotations.add(1, Segment::premise, balloon_premise_annotations());

  CopaItem wrong = make_item(1, "The red balloon popped.", "The balloon hit a nail.",
                             "The cake burned badly.", 2);
  auto summary = attack_dataset({wrong}, victim, lex, annotations, AttackOptions{});
  CHECK(summary.attempted == 0);
  CHECK(summary.successes == 0);
  CHECK(summary.success_rate == 0.0);
  CHECK_FALSE(summary.results[0].attempted);
}

TEST_CASE("attack_dataset stops at the first flipping segment") {
  LocalStubBackend victim;
  // choice2 shares "red" with the premise so either segment can flip the item.
  CopaItem item = make_item(1, "The red balloon popped.", "The balloon hit a nail.",
                            "The red cake burned.", 1);
  SubstitutionLexicon lex;
  lex.add("balloon", Pos::noun, "balloon%1", "cake");
  lex.add("balloon", Pos::noun, "balloon%1", "kite");

  AnnotationStore annotations;
  annotations.add(1, Segment::premise, balloon_premise_annotations());
  annotations.add(1, Segment::choice1,
                  {{"The", "the", Pos::other, ""},
                   {"balloon", "balloon", Pos::noun, "balloon%1"},
                   {"hit", "hit", Pos::verb, "hit%1"},
                   {"a", "a", Pos::other, ""},
                   {"nail", "nail", Pos::noun, "nail%1"}});

  auto summary = attack_dataset({item}, victim, lex, annotations, AttackOptions{});
  REQUIRE(summary.successes == 1);
  REQUIRE(summary.results[0].substitutions.size() >= 1);
  CHECK(summary.results[0].substitutions[0].segment == Segment::premise);

  // With no premise annotations the attack falls through to choice1.
  AnnotationStore choice_only;
  choice_only.add(1, Segment::choice1,
                  {{"The", "the", Pos::other, ""},
                   {"balloon", "balloon", Pos::noun, "balloon%1"},
                   {"hit", "hit", Pos::verb, "hit%1"},
                   {"a", "a", Pos::other, ""},
                   {"nail", "nail", Pos::noun, "nail%1"}});
  auto fallback = attack_dataset({item}, victim, lex, choice_only, AttackOptions{});
  REQUIRE(fallback.successes == 1);
  CHECK(fallback.results[0].substitutions[0].segment == Segment::choice1);
}

TEST_CASE("attack_dataset counts per-item errors and continues") {
  LocalStubBackend victim;
  SubstitutionLexicon lex = balloon_lexicon();
  AnnotationStore annotations;
  // Misaligned annotations for item 1; valid ones for item 2.
  annotations.add(1, Segment::premise, {{"wrong", "wrong", Pos::noun, "w%1"}});
  annotations.add(2, Segment::premise, balloon_premise_annotations());

  std::vector<CopaItem> items = {balloon_item(1), balloon_item(2)};
  auto summary = attack_dataset(items, victim, lex, annotations, AttackOptions{});
  CHECK(summary.errors == 1);
  CHECK_FALSE(summary.results[0].attempted);
  CHECK(summary.results[1].success);
  CHECK(summary.attempted == 1);
  CHECK(summary.successes == 1);
}

TEST_CASE("attack_dataset is deterministic for a fixed seed") {
  LocalStubBackend victim;
  SubstitutionLexicon lex;
  lex.add("balloon", Pos::noun, "balloon%1", "kite");
  lex.add("balloon", Pos::noun, "balloon%1", "cake");
  lex.add("pop", Pos::verb, "pop%1", "burned");
  AnnotationStore annotations;
  for (int id = 1; id <= 4; ++id) {
    annotations.add(id, Segment::premise, balloon_premise_annotations());
  }
  std::vector<CopaItem> items = {balloon_item(1), balloon_item(2), balloon_item(3),
                                 balloon_item(4)};

  AttackOptions options;
  options.params.rng_seed = 5;
  auto a = attack_dataset(items, victim, lex, annotations, options);
  auto b = attack_dataset(items, victim, lex, annotations, options);
  REQUIRE(a.results.size() == b.results.size());
  for (std::size_t i = 0; i < a.results.size(); ++i) {
    CHECK(attack_result_to_json(a.results[i]) == attack_result_to_json(b.results[i]));
  }
}
