#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "causalaug/backend.hpp"
#include "causalaug/error.hpp"

using namespace causalaug;

namespace {

constexpr double kSigNeg1 = 0.2689414213699951;   // sigmoid(-1)
constexpr double kSigPos1 = 0.7310585786300049;   // sigmoid(1)
constexpr double kSigPos3 = 0.9525741268224334;   // sigmoid(3)

// Minimal in-test HTTP server for protocol-violation scenarios.
struct TestServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  void start() {
    port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    thread = std::thread([this] { server.listen_after_bind(); });
    for (int i = 0; i < 2000 && !server.is_running(); ++i) {
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
    REQUIRE(server.is_running());
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }

  ~TestServer() {
    server.stop();
    if (thread.joinable()) thread.join();
  }
};

}  // namespace

TEST_CASE("stub scorer formula values") {
  StubScorer scorer;

  // Disjoint content words: J = 0.
  auto p = scorer.score_one("The bananas ripened because we ate them.");
  CHECK(p.p1 == doctest::Approx(kSigNeg1).epsilon(1e-12));
  CHECK(p.p0 == doctest::Approx(1.0 - kSigNeg1).epsilon(1e-12));

  // Identical clauses: J = 1.
  p = scorer.score_one("The dog barked because the dog barked.");
  CHECK(p.p1 == doctest::Approx(kSigPos3).epsilon(1e-12));

  // {storm, flood} vs {storm, flood, mud, rocks}: J = 1/2.
  p = scorer.score_one("Storm flood because storm flood mud rocks.");
  CHECK(p.p1 == doctest::Approx(kSigPos1).epsilon(1e-12));

  // No delimiter and stopword-only clauses both collapse to J = 0.
  CHECK(scorer.score_one("No causal marker here.").p1 ==
        doctest::Approx(kSigNeg1).epsilon(1e-12));
  CHECK(scorer.score_one("The of because a the.").p1 ==
        doctest::Approx(kSigNeg1).epsilon(1e-12));

  // Only the first delimiter splits.
  p = scorer.score_one("Storm flood because storm flood because mud rocks.");
  // Right side {storm, flood, because?..}: "because" is a stopword, so
  // {storm, flood, mud, rocks} vs {storm, flood} again.
  CHECK(p.p1 == doctest::Approx(kSigPos1).epsilon(1e-12));
}

TEST_CASE("stub scorer honours custom weights") {
  StubScorer scorer(2.0, 0.5);
  auto p = scorer.score_one("The dog barked because the dog barked.");
  CHECK(p.p1 == doctest::Approx(1.0 / (1.0 + std::exp(-2.5))).epsilon(1e-12));
}

TEST_CASE("stub scorer batch preserves order") {
  StubScorer scorer;
  auto probs = scorer.score({"The dog barked because the dog barked.",
                             "The bananas ripened because we ate them."});
  REQUIRE(probs.size() == 2);
  CHECK(probs[0].p1 > probs[1].p1);
}

TEST_CASE("stub generator canned table and truncation") {
  StubGenerator gen;
  gen.add_canned("The sky darkened. And", " the rain started to fall on the roof.");
  CHECK(gen.generate("The sky darkened. And", 32, 7) ==
        " the rain started to fall on the roof.");
  // Truncation to whitespace words; leading space drops with the rejoin.
  CHECK(gen.generate("The sky darkened. And", 3, 7) == "the rain started");
  CHECK(gen.generate("The sky darkened. And", 0, 7) == "");
  CHECK(gen.generate("The sky darkened. And", -2, 7) == "");
}

TEST_CASE("stub generator fallback is deterministic") {
  StubGenerator gen;
  std::string a = gen.generate("Unknown prompt. And", 16, 11);
  std::string b = gen.generate("Unknown prompt. And", 16, 11);
  CHECK(a == b);
  CHECK(a.front() == ' ');
  CHECK(a.back() == '.');
  CHECK(split_ws(a).size() <= 16);

  // Seeds spread over the template table.
  StringSet seen;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    seen.insert(gen.generate("Unknown prompt. And", 16, seed));
  }
  CHECK(seen.size() > 1);
  // Different prompts draw independently.
  CHECK(gen.generate("Another prompt. And", 16, 11) ==
        gen.generate("Another prompt. And", 16, 11));
}

TEST_CASE("stub generator loads the shipped canned table") {
  StubGenerator gen(std::string(CAUSALAUG_DATA_DIR) + "/canned_generations.jsonl");
  CHECK(gen.generate("The bananas ripened. And", 32, 0) == " we put them in the basket.");
  CHECK_THROWS_AS(StubGenerator("no_such_canned.jsonl"), ArgumentError);

  std::string path = "test_canned_bad_tmp.jsonl";
  {
    std::ofstream out(path);
    out << "{broken\n";
  }
  CHECK_THROWS_AS(StubGenerator{path}, ParseError);
  std::remove(path.c_str());
}

TEST_CASE("local stub backend combines scorer and generator") {
  StubGenerator gen;
  gen.add_canned("P. And", " q r s.");
  LocalStubBackend backend(StubScorer(), gen);
  CHECK(backend.generate("P. And", 32, 0) == " q r s.");
  auto probs = backend.score({"The dog barked because the dog barked."});
  REQUIRE(probs.size() == 1);
  CHECK(probs[0].p1 == doctest::Approx(kSigPos3).epsilon(1e-12));
}

TEST_CASE("http backend url normalization") {
  HttpBackend b("http://127.0.0.1:8000///");
  CHECK(b.base_url() == "http://127.0.0.1:8000");
  CHECK_THROWS_AS(HttpBackend(""), ArgumentError);
  CHECK_THROWS_AS(HttpBackend("///"), ArgumentError);
}

TEST_CASE("http backend empty score batch skips the network") {
  HttpBackend backend("http://127.0.0.1:1", 0.2);
  CHECK(backend.score({}).empty());
}

TEST_CASE("stub server round trip matches the in-process stub") {
  StubServerConfig config;
  StubServer server(config);
  HttpBackend remote(server.url(), 5.0);
  LocalStubBackend local;

  std::vector<std::string> sequences = {
      "The dog barked because the dog barked.",
      "The bananas ripened because we ate them.",
      "Storm flood because storm flood mud rocks.",
  };
  auto a = remote.score(sequences);
  auto b = local.score(sequences);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].p0 == doctest::Approx(b[i].p0).epsilon(1e-12));
    CHECK(a[i].p1 == doctest::Approx(b[i].p1).epsilon(1e-12));
  }

  CHECK(remote.generate("Fallback prompt. And", 16, 3) ==
        local.generate("Fallback prompt. And", 16, 3));
}

TEST_CASE("stub server serves the canned table and 404s unknown routes") {
  StubServerConfig config;
  config.canned_path = std::string(CAUSALAUG_DATA_DIR) + "/canned_generations.jsonl";
  StubServer server(config);

  HttpBackend remote(server.url(), 5.0);
  CHECK(remote.generate("The bananas ripened. And", 32, 0) == " we put them in the basket.");

  httplib::Client cli(server.url());
  auto res = cli.Get("/nope");
  REQUIRE(res);
  CHECK(res->status == 404);

  auto bad = cli.Post("/score", "{not json", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  CHECK(nlohmann::json::parse(bad->body).contains("error"));

  auto missing = cli.Post("/score", R"({"wrong":true})", "application/json");
  REQUIRE(missing);
  CHECK(missing->status == 400);
}

TEST_CASE("http backend rejects unreachable hosts") {
  HttpBackend backend("http://127.0.0.1:1", 0.2);
  CHECK_THROWS_AS(backend.score({"x because y."}), TransportError);
  CHECK_THROWS_AS(backend.generate("p", 8, 0), TransportError);
}

TEST_CASE("http backend re-validates score responses") {
  TestServer ts;
  std::string payload;
  ts.server.Post("/score", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(payload, "application/json");
  });
  ts.start();
  HttpBackend backend(ts.url(), 5.0);

  payload = R"({"nothing":[]})";
  CHECK_THROWS_AS(backend.score({"a because b."}), ProtocolError);

  payload = R"({"probs":[[0.5,0.5],[0.5,0.5]]})";
  CHECK_THROWS_AS(backend.score({"a because b."}), ProtocolError);

  payload = R"({"probs":[[0.5]]})";
  CHECK_THROWS_AS(backend.score({"a because b."}), ProtocolError);

  payload = R"({"probs":[[2.0,-1.0]]})";
  CHECK_THROWS_AS(backend.score({"a because b."}), ProtocolError);

  payload = R"({"probs":[[0.6,0.6]]})";
  CHECK_THROWS_AS(backend.score({"a because b."}), ProtocolError);

  payload = "not json";
  CHECK_THROWS_AS(backend.score({"a because b."}), ProtocolError);

  payload = R"({"probs":[[0.25,0.75]]})";
  auto probs = backend.score({"a because b."});
  REQUIRE(probs.size() == 1);
  CHECK(probs[0].p1 == doctest::Approx(0.75));
}

TEST_CASE("http backend validates generate responses") {
  TestServer ts;
  std::string payload = R"({"words":"no"})";
  ts.server.Post("/generate", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(payload, "application/json");
  });
  ts.start();
  HttpBackend backend(ts.url(), 5.0);
  CHECK_THROWS_AS(backend.generate("p", 8, 0), ProtocolError);
  payload = R"({"text":" ok then."})";
  CHECK(backend.generate("p", 8, 0) == " ok then.");
}

TEST_CASE("generate retries transport failures, score does not") {
  TestServer ts;
  std::atomic<int> generate_hits{0};
  std::atomic<int> score_hits{0};
  ts.server.Post("/generate", [&](const httplib::Request&, httplib::Response& res) {
    if (generate_hits.fetch_add(1) < 2) {
      res.status = 500;
      return;
    }
    res.set_content(R"({"text":" third time."})", "application/json");
  });
  ts.server.Post("/score", [&](const httplib::Request&, httplib::Response& res) {
    score_hits.fetch_add(1);
    res.status = 500;
  });
  ts.start();
  HttpBackend backend(ts.url(), 5.0);

  CHECK(backend.generate("p", 8, 0) == " third time.");
  CHECK(generate_hits.load() == 3);

  CHECK_THROWS_AS(backend.score({"a because b."}), TransportError);
  CHECK(score_hits.load() == 1);
}

TEST_CASE("stub server reports port busy") {
  StubServerConfig config;
  StubServer first(config);
  StubServerConfig clash;
  clash.port = first.port();
  CHECK_THROWS_AS(StubServer{clash}, Error);
}
