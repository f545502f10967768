#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "causalaug/text.hpp"

namespace causalaug {

struct ScorePair {
  double p0 = 0.0;
  double p1 = 0.0;
};

// Classifier scoring + text generation behind one interface; implementations
// must be safe for concurrent calls.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::vector<ScorePair> score(const std::vector<std::string>& sequences) = 0;
  virtual std::string generate(const std::string& prompt, int max_new_words,
                               std::uint64_t seed) = 0;
};

// Deterministic scorer: p1 = sigmoid(w*J + b) where J is the content-word
// Jaccard similarity between the clauses before and after the first
// " because " (J = 0 when the delimiter is absent).
class StubScorer {
 public:
  explicit StubScorer(double w = 4.0, double b = -1.0, StringSet stopwords = default_stopwords());

  ScorePair score_one(const std::string& sequence) const;
  std::vector<ScorePair> score(const std::vector<std::string>& sequences) const;

 private:
  double w_;
  double b_;
  StringSet stopwords_;
};

// Canned (prompt hash -> continuation) table with a seeded template fallback.
// Output is truncated to max_new_words whitespace words.
class StubGenerator {
 public:
  StubGenerator() = default;
  explicit StubGenerator(const std::string& canned_path);

  void add_canned(const std::string& prompt, const std::string& text);
  std::string generate(const std::string& prompt, int max_new_words, std::uint64_t seed) const;

 private:
  std::map<std::uint64_t, std::string> canned_;
};

// In-process stub, for tests that do not need a socket.
class LocalStubBackend : public Backend {
 public:
  LocalStubBackend() = default;
  LocalStubBackend(StubScorer scorer, StubGenerator generator);

  std::vector<ScorePair> score(const std::vector<std::string>& sequences) override;
  std::string generate(const std::string& prompt, int max_new_words, std::uint64_t seed) override;

 private:
  StubScorer scorer_;
  StubGenerator generator_;
};

// HTTP/1.1 client for POST /score and POST /generate. Responses are
// re-validated (probability range and normalization) before use. No retries
// on /score, two on /generate.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(std::string base_url, double timeout_sec = 30.0);

  std::vector<ScorePair> score(const std::vector<std::string>& sequences) override;
  std::string generate(const std::string& prompt, int max_new_words, std::uint64_t seed) override;

  const std::string& base_url() const { return base_url_; }

 private:
  std::string base_url_;
  double timeout_sec_;
};

struct StubServerConfig {
  std::string host = "127.0.0.1";
  int port = 0;  // 0: pick a free port
  double w = 4.0;
  double b = -1.0;
  std::string canned_path;  // optional
};

// Serves /score and /generate on a background thread; unknown routes get 404.
// Startup failures (port busy) throw from the constructor.
class StubServer {
 public:
  explicit StubServer(const StubServerConfig& config);
  ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  int port() const;
  std::string url() const;
  void wait();  // blocks until stop() or external shutdown
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace causalaug
