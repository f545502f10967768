#include "causalaug/backend.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>
#include <unordered_set>

#include <httplib.h>
#include <json.hpp>

#include "causalaug/error.hpp"
#include "causalaug/rng.hpp"

namespace causalaug {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr const char* kBecause = " because ";

}  // namespace

StubScorer::StubScorer(double w, double b, StringSet stopwords)
    : w_(w), b_(b), stopwords_(std::move(stopwords)) {}

ScorePair StubScorer::score_one(const std::string& sequence) const {
  std::size_t at = sequence.find(kBecause);
  std::string left, right;
  if (at == std::string::npos) {
    left = sequence;
  } else {
    left = sequence.substr(0, at);
    right = sequence.substr(at + std::char_traits<char>::length(kBecause));
  }
  auto a = content_words(left, stopwords_);
  auto b = content_words(right, stopwords_);
  std::unordered_set<std::string> set_a(a.begin(), a.end());
  std::size_t inter = 0;
  for (const auto& word : b) {
    if (set_a.count(word)) ++inter;
  }
  std::size_t uni = set_a.size() + b.size() - inter;
  double jaccard = uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
  double p1 = sigmoid(w_ * jaccard + b_);
  return {1.0 - p1, p1};
}

std::vector<ScorePair> StubScorer::score(const std::vector<std::string>& sequences) const {
  std::vector<ScorePair> out;
  out.reserve(sequences.size());
  for (const auto& s : sequences) out.push_back(score_one(s));
  return out;
}

StubGenerator::StubGenerator(const std::string& canned_path) {
  std::ifstream in(canned_path);
  if (!in) throw ArgumentError("cannot open canned table: " + canned_path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      add_canned(j.at("prompt").get<std::string>(), j.at("text").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(canned_path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void StubGenerator::add_canned(const std::string& prompt, const std::string& text) {
  canned_[fnv1a64(prompt)] = text;
}

std::string StubGenerator::generate(const std::string& prompt, int max_new_words,
                                    std::uint64_t seed) const {
  if (max_new_words <= 0) return "";
  std::string text;
  auto it = canned_.find(fnv1a64(prompt));
  if (it != canned_.end()) {
    text = it->second;
  } else {
    static const char* kSubjects[] = {"they", "we", "he", "she", "everyone"};
    static const char* kPredicates[] = {"did it again", "saw it coming", "made it work",
                                        "kept it simple", "let it go"};
    Rng rng(derive_seed(seed, fnv1a64(prompt)));
    text = std::string(" ") + kSubjects[rng.uniform_index(5)] + " " +
           kPredicates[rng.uniform_index(5)] + ".";
  }
  auto words = split_ws(text);
  if (words.size() <= static_cast<std::size_t>(max_new_words)) return text;
  std::string truncated;
  for (int i = 0; i < max_new_words; ++i) {
    if (i) truncated += ' ';
    truncated += words[i];
  }
  return truncated;
}

LocalStubBackend::LocalStubBackend(StubScorer scorer, StubGenerator generator)
    : scorer_(std::move(scorer)), generator_(std::move(generator)) {}

std::vector<ScorePair> LocalStubBackend::score(const std::vector<std::string>& sequences) {
  return scorer_.score(sequences);
}

std::string LocalStubBackend::generate(const std::string& prompt, int max_new_words,
                                       std::uint64_t seed) {
  return generator_.generate(prompt, max_new_words, seed);
}

namespace {

void set_timeouts(httplib::Client& cli, double sec) {
  auto whole = static_cast<time_t>(sec);
  auto usec = static_cast<time_t>((sec - static_cast<double>(whole)) * 1e6);
  cli.set_connection_timeout(whole, usec);
  cli.set_read_timeout(whole, usec);
  cli.set_write_timeout(whole, usec);
}

nlohmann::json post_json(const std::string& base_url, double timeout_sec, const char* route,
                         const nlohmann::json& body, int retries) {
  std::string url = base_url + route;
  for (int attempt = 0;; ++attempt) {
    try {
      httplib::Client cli(base_url);
      set_timeouts(cli, timeout_sec);
      auto res = cli.Post(route, body.dump(), "application/json");
      if (!res) {
        throw TransportError("POST " + url + ": " + httplib::to_string(res.error()));
      }
      if (res->status != 200) {
        throw TransportError("POST " + url + ": HTTP " + std::to_string(res->status));
      }
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw ProtocolError("POST " + url + ": malformed body: " + e.what());
      }
    } catch (const TransportError&) {
      if (attempt >= retries) throw;
    }
  }
}

}  // namespace

HttpBackend::HttpBackend(std::string base_url, double timeout_sec)
    : base_url_(std::move(base_url)), timeout_sec_(timeout_sec) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
  if (base_url_.empty()) throw ArgumentError("backend URL is empty");
}

std::vector<ScorePair> HttpBackend::score(const std::vector<std::string>& sequences) {
  if (sequences.empty()) return {};
  nlohmann::json body{{"sequences", sequences}};
  auto resp = post_json(base_url_, timeout_sec_, "/score", body, 0);
  std::string where = "POST " + base_url_ + "/score";
  if (!resp.contains("probs") || !resp["probs"].is_array()) {
    throw ProtocolError(where + ": response has no probs array");
  }
  const auto& probs = resp["probs"];
  if (probs.size() != sequences.size()) {
    throw ProtocolError(where + ": got " + std::to_string(probs.size()) + " probs for " +
                        std::to_string(sequences.size()) + " sequences");
  }
  std::vector<ScorePair> out;
  out.reserve(probs.size());
  for (const auto& entry : probs) {
    if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number() || !entry[1].is_number()) {
      throw ProtocolError(where + ": prob entry is not a [p0, p1] pair");
    }
    double p0 = entry[0].get<double>();
    double p1 = entry[1].get<double>();
    if (p0 < 0.0 || p0 > 1.0 || p1 < 0.0 || p1 > 1.0 || std::abs(p0 + p1 - 1.0) > 1e-6) {
      throw ProtocolError(where + ": probabilities not normalized: [" + std::to_string(p0) +
                          ", " + std::to_string(p1) + "]");
    }
    out.push_back({p0, p1});
  }
  return out;
}

std::string HttpBackend::generate(const std::string& prompt, int max_new_words,
                                  std::uint64_t seed) {
  nlohmann::json body{{"prompt", prompt}, {"max_new_words", max_new_words}, {"seed", seed}};
  auto resp = post_json(base_url_, timeout_sec_, "/generate", body, 2);
  if (!resp.contains("text") || !resp["text"].is_string()) {
    throw ProtocolError("POST " + base_url_ + "/generate: response has no text string");
  }
  return resp["text"].get<std::string>();
}

struct StubServer::Impl {
  httplib::Server server;
  std::thread thread;
  StubScorer scorer;
  StubGenerator generator;
  std::string host;
  int port = 0;

  Impl(const StubServerConfig& config)
      : scorer(config.w, config.b),
        generator(config.canned_path.empty() ? StubGenerator() : StubGenerator(config.canned_path)),
        host(config.host) {}
};

StubServer::StubServer(const StubServerConfig& config) : impl_(std::make_unique<Impl>(config)) {
  auto* impl = impl_.get();

  // SO_REUSEADDR only; the default adds SO_REUSEPORT, which would let two
  // servers share a port instead of failing loudly.
  impl->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
  });

  impl->server.Post("/score", [impl](const httplib::Request& req, httplib::Response& res) {
    try {
      auto body = nlohmann::json::parse(req.body);
      std::vector<std::string> sequences = body.at("sequences").get<std::vector<std::string>>();
      nlohmann::json probs = nlohmann::json::array();
      for (const auto& s : sequences) {
        auto p = impl->scorer.score_one(s);
        probs.push_back({p.p0, p.p1});
      }
      res.set_content(nlohmann::json{{"probs", probs}}.dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
    }
  });

  impl->server.Post("/generate", [impl](const httplib::Request& req, httplib::Response& res) {
    try {
      auto body = nlohmann::json::parse(req.body);
      std::string prompt = body.at("prompt").get<std::string>();
      int max_new_words = body.value("max_new_words", 32);
      std::uint64_t seed = body.value("seed", std::uint64_t{0});
      std::string text = impl->generator.generate(prompt, max_new_words, seed);
      res.set_content(nlohmann::json{{"text", text}}.dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
    }
  });

  if (config.port == 0) {
    impl->port = impl->server.bind_to_any_port(impl->host);
    if (impl->port <= 0) throw Error("stub server: cannot bind to " + impl->host);
  } else {
    if (!impl->server.bind_to_port(impl->host, config.port)) {
      throw Error("stub server: cannot bind to " + impl->host + ":" +
                  std::to_string(config.port) + " (port busy?)");
    }
    impl->port = config.port;
  }

  impl->thread = std::thread([impl] { impl->server.listen_after_bind(); });
  for (int i = 0; i < 2000 && !impl->server.is_running(); ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  if (!impl->server.is_running()) {
    stop();
    throw Error("stub server: failed to start on " + impl->host + ":" +
                std::to_string(impl->port));
  }
}

StubServer::~StubServer() { stop(); }

int StubServer::port() const { return impl_->port; }

std::string StubServer::url() const {
  return "http://" + impl_->host + ":" + std::to_string(impl_->port);
}

void StubServer::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

void StubServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace causalaug
