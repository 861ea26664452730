#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "gemmas/embedding.hpp"

namespace gemmas {
namespace {

using namespace std::chrono_literals;

TEST(LocalProvider, Fnv1aReferenceValues) {
  EXPECT_EQ(LocalHashingProvider::fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(LocalHashingProvider::fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(LocalHashingProvider::fnv1a("foobar"), 0x85944171f73967e8ULL);
}

TEST(LocalProvider, DeterministicAndNormalised) {
  LocalHashingProvider p;
  const std::vector<std::string> texts{"the answer is 42", "the answer is 42", ""};
  const auto v = embed(texts, p);
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v[0], v[1]);
  EXPECT_EQ(v[0].size(), LocalHashingProvider::kDimension);
  double s = 0.0;
  for (double x : v[0]) s += x * x;
  EXPECT_NEAR(s, 1.0, 1e-12);
  EXPECT_EQ(v[2], EmbeddingVector(256, 0.0));
}

TEST(LocalProvider, BagOfTokens) {
  // "a" hashes to bucket 0xaf63dc4c8601ec8c % 256 = 0x8c.
  const auto v = LocalHashingProvider::encode("A a, A!");
  EXPECT_EQ(v[0x8c], 1.0);
}

// Minimal embeddings server on an ephemeral port.
class FakeEndpoint {
 public:
  explicit FakeEndpoint(httplib::Server::Handler handler) {
    server_.Post("/v1/embeddings", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEndpoint() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/embeddings"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string vectors_body(const std::vector<std::vector<double>>& vs, bool reverse = false) {
  nlohmann::json data = nlohmann::json::array();
  for (std::size_t k = 0; k < vs.size(); ++k) {
    const std::size_t idx = reverse ? vs.size() - 1 - k : k;
    data.push_back({{"index", idx}, {"embedding", vs[idx]}});
  }
  return nlohmann::json{{"data", data}}.dump();
}

RemoteProviderConfig config_for(const FakeEndpoint& ep) {
  RemoteProviderConfig cfg;
  cfg.url = ep.url();
  cfg.timeout = 2s;
  return cfg;
}

TEST(RemoteProvider, SendsRequestAndRestoresOrder) {
  std::string auth, model;
  std::vector<std::string> inputs;
  FakeEndpoint ep([&](const httplib::Request& req, httplib::Response& res) {
    auth = req.get_header_value("Authorization");
    const auto body = nlohmann::json::parse(req.body);
    model = body["model"];
    inputs = body["input"].get<std::vector<std::string>>();
    res.set_content(vectors_body({{1, 0}, {0, 1}, {1, 1}}, true), "application/json");
  });
  auto cfg = config_for(ep);
  cfg.api_key = "secret";
  cfg.model = "encoder";
  RemoteEmbeddingProvider p(cfg);
  const std::vector<std::string> texts{"a", "b", "c"};
  const auto v = embed(texts, p);
  EXPECT_EQ(auth, "Bearer secret");
  EXPECT_EQ(model, "encoder");
  EXPECT_EQ(inputs, texts);
  EXPECT_EQ(v[0], (EmbeddingVector{1, 0}));
  EXPECT_EQ(v[2], (EmbeddingVector{1, 1}));
  EXPECT_EQ(p.dimension(), 2u);
}

TEST(RemoteProvider, MixedLengthsAreDimensionMismatch) {
  FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) {
    res.set_content(vectors_body({{1, 0, 0}, {0, 1}}), "application/json");
  });
  RemoteEmbeddingProvider p(config_for(ep));
  const std::vector<std::string> texts{"a", "b"};
  EXPECT_THROW(embed(texts, p), DimensionMismatchError);
}

TEST(RemoteProvider, DimensionMustStayConstant) {
  std::atomic<int> calls{0};
  FakeEndpoint ep([&](const httplib::Request&, httplib::Response& res) {
    res.set_content(calls++ == 0 ? vectors_body({{1, 0}}) : vectors_body({{1, 0, 0}}),
                    "application/json");
  });
  RemoteEmbeddingProvider p(config_for(ep));
  const std::vector<std::string> texts{"a"};
  embed(texts, p);
  EXPECT_THROW(embed(texts, p), DimensionMismatchError);
}

TEST(RemoteProvider, RetriesOnceOnTransientFailure) {
  std::atomic<int> calls{0};
  FakeEndpoint ep([&](const httplib::Request&, httplib::Response& res) {
    if (calls++ == 0) {
      res.status = 503;
      return;
    }
    res.set_content(vectors_body({{0.5, 0.5}}), "application/json");
  });
  RemoteEmbeddingProvider p(config_for(ep));
  const std::vector<std::string> texts{"a"};
  EXPECT_EQ(embed(texts, p).size(), 1u);
  EXPECT_EQ(calls.load(), 2);
}

TEST(RemoteProvider, GivesUpAfterOneRetry) {
  std::atomic<int> calls{0};
  FakeEndpoint ep([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 502;
  });
  RemoteEmbeddingProvider p(config_for(ep));
  const std::vector<std::string> texts{"a"};
  EXPECT_THROW(embed(texts, p), ProviderUnavailableError);
  EXPECT_EQ(calls.load(), 2);
}

TEST(RemoteProvider, RefusalIsNotRetried) {
  std::atomic<int> calls{0};
  FakeEndpoint ep([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 401;
  });
  RemoteEmbeddingProvider p(config_for(ep));
  const std::vector<std::string> texts{"a"};
  EXPECT_THROW(embed(texts, p), ProviderUnavailableError);
  EXPECT_EQ(calls.load(), 1);
}

TEST(RemoteProvider, UnreachableAndTimeout) {
  std::string dead_url;
  {
    FakeEndpoint ep([](const httplib::Request&, httplib::Response&) {});
    dead_url = ep.url();
  }
  RemoteProviderConfig cfg;
  cfg.url = dead_url;
  cfg.timeout = 500ms;
  RemoteEmbeddingProvider dead(cfg);
  const std::vector<std::string> texts{"a"};
  EXPECT_THROW(embed(texts, dead), ProviderUnavailableError);

  FakeEndpoint slow([](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(400ms);
    res.set_content(vectors_body({{1.0}}), "application/json");
  });
  auto slow_cfg = config_for(slow);
  slow_cfg.timeout = 100ms;
  RemoteEmbeddingProvider p(slow_cfg);
  EXPECT_THROW(embed(texts, p), ProviderUnavailableError);
}

TEST(RemoteProvider, BoundsInFlightRequests) {
  std::atomic<int> active{0}, peak{0};
  FakeEndpoint ep([&](const httplib::Request&, httplib::Response& res) {
    const int now = ++active;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {}
    std::this_thread::sleep_for(30ms);
    --active;
    res.set_content(vectors_body({{1.0, 2.0}}), "application/json");
  });
  auto cfg = config_for(ep);
  cfg.max_in_flight = 2;
  RemoteEmbeddingProvider p(cfg);
  std::vector<std::jthread> callers;
  std::atomic<int> ok{0};
  for (int k = 0; k < 8; ++k) {
    callers.emplace_back([&] {
      const std::vector<std::string> texts{"x"};
      if (embed(texts, p).size() == 1) ++ok;
    });
  }
  callers.clear();
  EXPECT_EQ(ok.load(), 8);
  EXPECT_LE(peak.load(), 2);
  EXPECT_GE(peak.load(), 1);
}

TEST(RemoteProvider, ConfigFromEnvironment) {
  ::setenv("GEMMAS_EMBED_URL", "http://example.invalid/embed", 1);
  ::setenv("GEMMAS_EMBED_API_KEY", "k", 1);
  auto cfg = RemoteProviderConfig::from_environment();
  EXPECT_EQ(cfg.url, "http://example.invalid/embed");
  EXPECT_EQ(cfg.api_key, "k");
  EXPECT_EQ(cfg.timeout, 30s);
  EXPECT_EQ(cfg.max_in_flight, 4);
  EXPECT_EQ(RemoteProviderConfig::from_environment("http://flag/x").url, "http://flag/x");
  ::unsetenv("GEMMAS_EMBED_URL");
  ::unsetenv("GEMMAS_EMBED_API_KEY");
  EXPECT_THROW(RemoteEmbeddingProvider{RemoteProviderConfig::from_environment()},
               ProviderUnavailableError);
}

}  // namespace
}  // namespace gemmas
