#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace causalaug {

// Relation direction asked by a COPA question: does the correct alternative
// state the cause of the premise, or its effect?
enum class Question { cause, effect };

std::string to_string(Question q);
Question question_from_string(std::string_view s);

// One premise/two-choice causal question with gold label.
struct CopaItem {
  int id = 0;
  std::string premise;
  std::string choice1;
  std::string choice2;
  Question question = Question::cause;
  int label = 1;  // 1 or 2
  // Unknown record keys, preserved on round trip (e.g. augmentation
  // provenance: strategy, pair_source, distractor_source).
  nlohmann::json extra = nlohmann::json::object();

  const std::string& choice(int which) const { return which == 1 ? choice1 : choice2; }
};

// Joins premise and choice into the single backward-causal surface form the
// scoring backend consumes. The first segment loses one terminal punctuation
// mark; the second segment additionally has its first alphabetic character
// lowercased (all-caps acronyms keep their case); the result ends with a
// single period. No model-specific delimiter tokens are added here.
std::string conv(const std::string& premise, const std::string& choice, Question relation);

// Ingests the original COPA distribution XML (item elements with asks-for and
// most-plausible-alternative attributes and p/a1/a2 children).
std::vector<CopaItem> import_xml(const std::string& xml_document);

CopaItem item_from_json(const nlohmann::json& record);
nlohmann::json item_to_json(const CopaItem& item);

// Native dataset files: UTF-8, one JSON record per line.
std::vector<CopaItem> read_items(const std::string& path);
void write_items(const std::string& path, const std::vector<CopaItem>& items);

struct FieldStats {
  double min = 0, max = 0, mean = 0, median = 0, std = 0;
};

// Word-count statistics over a dataset. total and premise_ratio are computed
// over all premise-choice pairs (two per item); premise_ratio is
// 100 * premise / total per pair. Words are whitespace tokens; std is the
// sample standard deviation.
struct DatasetStats {
  FieldStats premise, choice1, choice2, total, premise_ratio;
};

DatasetStats dataset_stats(const std::vector<CopaItem>& items);

}  // namespace causalaug
