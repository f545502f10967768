#include "causalaug/copa.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "causalaug/error.hpp"
#include "causalaug/text.hpp"

namespace causalaug {

std::string to_string(Question q) { return q == Question::cause ? "cause" : "effect"; }

Question question_from_string(std::string_view s) {
  if (s == "cause") return Question::cause;
  if (s == "effect") return Question::effect;
  throw ParseError("invalid question value: '" + std::string(s) + "'");
}

std::string conv(const std::string& premise, const std::string& choice, Question relation) {
  if (trim(premise).empty()) throw ArgumentError("conv: empty premise");
  if (trim(choice).empty()) throw ArgumentError("conv: empty choice");
  const std::string& first = relation == Question::cause ? premise : choice;
  const std::string& second = relation == Question::cause ? choice : premise;
  std::string head = strip_one_terminal(first);
  std::string tail = decapitalize_first(strip_one_terminal(second));
  return head + " because " + tail + ".";
}

namespace {

std::string xml_unescape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '&') {
      out += s[i++];
      continue;
    }
    std::size_t end = s.find(';', i);
    if (end == std::string_view::npos) {
      out += s[i++];
      continue;
    }
    std::string_view ent = s.substr(i + 1, end - i - 1);
    if (ent == "amp") out += '&';
    else if (ent == "lt") out += '<';
    else if (ent == "gt") out += '>';
    else if (ent == "quot") out += '"';
    else if (ent == "apos") out += '\'';
    else if (!ent.empty() && ent[0] == '#') {
      long cp = std::strtol(std::string(ent.substr(1)).c_str(), nullptr, 10);
      if (cp > 0 && cp < 128) out += static_cast<char>(cp);
    } else {
      out += s.substr(i, end - i + 1);
      i = end + 1;
      continue;
    }
    i = end + 1;
  }
  return out;
}

// Value of attribute name="..." inside an element's start tag.
bool find_attr(std::string_view tag, std::string_view name, std::string& value) {
  std::size_t pos = 0;
  while ((pos = tag.find(name, pos)) != std::string_view::npos) {
    std::size_t after = pos + name.size();
    bool starts_ok = pos == 0 || tag[pos - 1] == ' ' || tag[pos - 1] == '\t';
    if (!starts_ok || after >= tag.size() || tag[after] != '=') {
      pos = after;
      continue;
    }
    std::size_t q1 = tag.find_first_of("\"'", after);
    if (q1 == std::string_view::npos) return false;
    std::size_t q2 = tag.find(tag[q1], q1 + 1);
    if (q2 == std::string_view::npos) return false;
    value = xml_unescape(tag.substr(q1 + 1, q2 - q1 - 1));
    return true;
  }
  return false;
}

// Inner text of the first <child>...</child> element.
bool find_child_text(std::string_view body, const std::string& child, std::string& text) {
  std::string open = "<" + child + ">";
  std::string close = "</" + child + ">";
  std::size_t b = body.find(open);
  if (b == std::string_view::npos) return false;
  b += open.size();
  std::size_t e = body.find(close, b);
  if (e == std::string_view::npos) return false;
  text = trim(xml_unescape(body.substr(b, e - b)));
  return true;
}

}  // namespace

std::vector<CopaItem> import_xml(const std::string& xml_document) {
  std::vector<CopaItem> items;
  std::string_view doc(xml_document);
  std::size_t pos = 0;
  int ordinal = 0;
  while (true) {
    std::size_t start = doc.find("<item", pos);
    if (start == std::string_view::npos) break;
    ++ordinal;
    std::size_t tag_end = doc.find('>', start);
    if (tag_end == std::string_view::npos) {
      throw ParseError("item #" + std::to_string(ordinal) + ": unterminated start tag");
    }
    std::string_view tag = doc.substr(start, tag_end - start);

    std::string id_str;
    std::string who = find_attr(tag, "id", id_str) ? ("item id=" + id_str)
                                                   : ("item #" + std::to_string(ordinal));

    std::size_t body_end = doc.find("</item>", tag_end);
    if (body_end == std::string_view::npos) {
      throw ParseError(who + ": missing </item>");
    }
    std::string_view body = doc.substr(tag_end + 1, body_end - tag_end - 1);

    CopaItem item;
    if (id_str.empty()) throw FieldError(who + ": missing id attribute");
    try {
      std::size_t used = 0;
      item.id = std::stoi(id_str, &used);
      if (used != id_str.size()) throw ParseError("");
    } catch (const std::exception&) {
      throw ParseError(who + ": non-numeric id '" + id_str + "'");
    }

    std::string asks_for;
    if (!find_attr(tag, "asks-for", asks_for)) throw FieldError(who + ": missing asks-for attribute");
    if (asks_for != "cause" && asks_for != "effect") {
      throw ParseError(who + ": invalid asks-for value '" + asks_for + "'");
    }
    item.question = question_from_string(asks_for);

    std::string alt;
    if (!find_attr(tag, "most-plausible-alternative", alt)) {
      throw FieldError(who + ": missing most-plausible-alternative attribute");
    }
    if (alt != "1" && alt != "2") {
      throw ParseError(who + ": invalid most-plausible-alternative value '" + alt + "'");
    }
    item.label = alt == "1" ? 1 : 2;

    if (!find_child_text(body, "p", item.premise)) throw FieldError(who + ": missing <p> element");
    if (!find_child_text(body, "a1", item.choice1)) throw FieldError(who + ": missing <a1> element");
    if (!find_child_text(body, "a2", item.choice2)) throw FieldError(who + ": missing <a2> element");
    if (item.premise.empty() || item.choice1.empty() || item.choice2.empty()) {
      throw ParseError(who + ": empty premise or alternative text");
    }

    items.push_back(std::move(item));
    pos = body_end + 7;
  }
  return items;
}

CopaItem item_from_json(const nlohmann::json& record) {
  if (!record.is_object()) throw ParseError("record is not an object");
  for (const char* key : {"id", "premise", "choice1", "choice2", "question", "label"}) {
    if (!record.contains(key)) throw FieldError(std::string("record missing key '") + key + "'");
  }
  CopaItem item;
  item.id = record.at("id").get<int>();
  item.premise = record.at("premise").get<std::string>();
  item.choice1 = record.at("choice1").get<std::string>();
  item.choice2 = record.at("choice2").get<std::string>();
  item.question = question_from_string(record.at("question").get<std::string>());
  item.label = record.at("label").get<int>();
  if (item.label != 1 && item.label != 2) {
    throw ParseError("record id=" + std::to_string(item.id) + ": label must be 1 or 2");
  }
  if (trim(item.premise).empty() || trim(item.choice1).empty() || trim(item.choice2).empty()) {
    throw ParseError("record id=" + std::to_string(item.id) + ": empty text field");
  }
  for (auto it = record.begin(); it != record.end(); ++it) {
    if (it.key() != "id" && it.key() != "premise" && it.key() != "choice1" &&
        it.key() != "choice2" && it.key() != "question" && it.key() != "label") {
      item.extra[it.key()] = it.value();
    }
  }
  return item;
}

nlohmann::json item_to_json(const CopaItem& item) {
  nlohmann::json record = item.extra.is_object() ? item.extra : nlohmann::json::object();
  record["id"] = item.id;
  record["premise"] = item.premise;
  record["choice1"] = item.choice1;
  record["choice2"] = item.choice2;
  record["question"] = to_string(item.question);
  record["label"] = item.label;
  return record;
}

std::vector<CopaItem> read_items(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open dataset file: " + path);
  std::vector<CopaItem> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      items.push_back(item_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return items;
}

void write_items(const std::string& path, const std::vector<CopaItem>& items) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot open output file: " + path);
  for (const auto& item : items) {
    out << item_to_json(item).dump() << "\n";
  }
  if (!out) throw Error("write failed: " + path);
}

namespace {

FieldStats field_stats(std::vector<double> values) {
  FieldStats fs;
  const std::size_t n = values.size();
  std::sort(values.begin(), values.end());
  fs.min = values.front();
  fs.max = values.back();
  double sum = 0;
  for (double v : values) sum += v;
  fs.mean = sum / static_cast<double>(n);
  fs.median = n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  double ss = 0;
  for (double v : values) ss += (v - fs.mean) * (v - fs.mean);
  fs.std = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  return fs;
}

}  // namespace

DatasetStats dataset_stats(const std::vector<CopaItem>& items) {
  if (items.empty()) throw ArgumentError("dataset_stats: empty item list");
  std::vector<double> premise, choice1, choice2, total, ratio;
  premise.reserve(items.size());
  choice1.reserve(items.size());
  choice2.reserve(items.size());
  total.reserve(2 * items.size());
  ratio.reserve(2 * items.size());
  for (const auto& item : items) {
    double p = static_cast<double>(word_count(item.premise));
    double c1 = static_cast<double>(word_count(item.choice1));
    double c2 = static_cast<double>(word_count(item.choice2));
    premise.push_back(p);
    choice1.push_back(c1);
    choice2.push_back(c2);
    for (double c : {c1, c2}) {
      total.push_back(p + c);
      ratio.push_back(100.0 * p / (p + c));
    }
  }
  DatasetStats stats;
  stats.premise = field_stats(std::move(premise));
  stats.choice1 = field_stats(std::move(choice1));
  stats.choice2 = field_stats(std::move(choice2));
  stats.total = field_stats(std::move(total));
  stats.premise_ratio = field_stats(std::move(ratio));
  return stats;
}

}  // namespace causalaug
