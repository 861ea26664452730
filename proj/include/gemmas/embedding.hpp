#pragma once

// Semantic feature providers: a deterministic local feature-hashing encoder
// and an HTTP client for the common embeddings endpoint shape.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "gemmas/error.hpp"
#include "gemmas/text_features.hpp"

namespace gemmas {

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  // One vector per input, in input order. Implementations must be callable
  // from several threads at once.
  virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) = 0;

  virtual std::string name() const = 0;
};

// Hashes each token into one of 256 buckets (FNV-1a 64) and L2-normalises
// the counts. Pure: equal inputs give equal vectors on every platform.
class LocalHashingProvider final : public EmbeddingProvider {
 public:
  static constexpr std::size_t kDimension = 256;

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(encode(t));
    return out;
  }

  std::string name() const override { return "local"; }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  static std::size_t bucket(std::string_view token) { return fnv1a(token) % kDimension; }

  static EmbeddingVector encode(std::string_view text) {
    EmbeddingVector v(kDimension, 0.0);
    for (const auto& tok : tokenize(text)) v[bucket(tok)] += 1.0;
    double s = 0.0;
    for (double x : v) s += x * x;
    if (s > 0.0) {
      const double norm = std::sqrt(s);
      for (double& x : v) x /= norm;
    }
    return v;
  }
};

struct RemoteProviderConfig {
  std::string url;  // e.g. http://localhost:8080/v1/embeddings
  std::string model = "default";
  std::string api_key;
  std::chrono::milliseconds timeout{30000};
  int max_in_flight = 4;
  int retries = 1;

  // Fills url (when not given) and api_key from GEMMAS_EMBED_URL and
  // GEMMAS_EMBED_API_KEY.
  static RemoteProviderConfig from_environment(std::optional<std::string> url = std::nullopt) {
    RemoteProviderConfig cfg;
    if (url && !url->empty()) {
      cfg.url = *url;
    } else if (const char* env = std::getenv("GEMMAS_EMBED_URL")) {
      cfg.url = env;
    }
    if (const char* key = std::getenv("GEMMAS_EMBED_API_KEY")) cfg.api_key = key;
    return cfg;
  }
};

class RemoteEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit RemoteEmbeddingProvider(RemoteProviderConfig config)
      : config_(std::move(config)), slots_(std::max(1, config_.max_in_flight)) {
    if (config_.url.empty()) {
      throw ProviderUnavailableError(
          "remote embedding provider needs a URL (--remote-url or GEMMAS_EMBED_URL)");
    }
    split_url(config_.url, origin_, path_);
  }

  std::string name() const override { return "remote"; }

  std::optional<std::size_t> dimension() const {
    const auto d = dimension_.load();
    return d == 0 ? std::nullopt : std::optional<std::size_t>(d);
  }

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override {
    if (texts.empty()) return {};
    nlohmann::json body;
    body["input"] = std::vector<std::string>(texts.begin(), texts.end());
    body["model"] = config_.model;
    const std::string payload = body.dump();

    slots_.acquire();
    struct Release {
      std::counting_semaphore<1024>& s;
      ~Release() { s.release(); }
    } release{slots_};

    std::string failure;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
      httplib::Client client(origin_);
      if (!client.is_valid()) {
        throw ProviderUnavailableError("unsupported embedding endpoint: " + config_.url);
      }
      const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
      const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(
          config_.timeout - seconds);
      client.set_connection_timeout(seconds.count(), micros.count());
      client.set_read_timeout(seconds.count(), micros.count());
      client.set_write_timeout(seconds.count(), micros.count());
      httplib::Headers headers;
      if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

      auto res = client.Post(path_, headers, payload, "application/json");
      if (!res) {
        failure = "request to " + config_.url + " failed: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        failure = "embedding endpoint returned HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        throw ProviderUnavailableError("embedding endpoint refused the request: HTTP " +
                                       std::to_string(res->status));
      }
      return decode(res->body, texts.size());
    }
    throw ProviderUnavailableError(failure);
  }

 private:
  static void split_url(const std::string& url, std::string& origin, std::string& path) {
    const auto scheme_end = url.find("://");
    const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto slash = url.find('/', host_start);
    if (slash == std::string::npos) {
      origin = url;
      path = "/";
    } else {
      origin = url.substr(0, slash);
      path = url.substr(slash);
    }
  }

  std::vector<EmbeddingVector> decode(const std::string& text, std::size_t expected) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ProviderUnavailableError(std::string("malformed embedding response: ") + e.what());
    }
    const auto data = doc.find("data");
    if (!doc.is_object() || data == doc.end() || !data->is_array()) {
      throw ProviderUnavailableError("embedding response lacks a 'data' array");
    }
    if (data->size() != expected) {
      throw ProviderUnavailableError("embedding response has " + std::to_string(data->size()) +
                                     " vectors for " + std::to_string(expected) + " inputs");
    }
    std::vector<EmbeddingVector> out(expected);
    std::vector<bool> seen(expected, false);
    for (std::size_t k = 0; k < data->size(); ++k) {
      const auto& item = (*data)[k];
      std::size_t index = k;
      if (auto it = item.find("index"); it != item.end() && it->is_number_integer()) {
        index = it->get<std::size_t>();
      }
      const auto emb = item.find("embedding");
      if (index >= expected || seen[index] || emb == item.end() || !emb->is_array()) {
        throw ProviderUnavailableError("embedding response item " + std::to_string(k) +
                                       " is malformed");
      }
      seen[index] = true;
      auto& vec = out[index];
      vec.reserve(emb->size());
      for (const auto& x : *emb) {
        if (!x.is_number() || !std::isfinite(x.get<double>())) {
          throw ProviderUnavailableError("embedding contains a non-finite entry");
        }
        vec.push_back(x.get<double>());
      }
    }
    const std::size_t d = out.front().size();
    for (const auto& v : out) {
      if (v.size() != d) {
        throw DimensionMismatchError("embedding endpoint returned vectors of mixed length (" +
                                     std::to_string(d) + " and " + std::to_string(v.size()) + ")");
      }
    }
    std::size_t known = 0;
    if (!dimension_.compare_exchange_strong(known, d) && known != d) {
      throw DimensionMismatchError("embedding dimension changed within a session: " +
                                   std::to_string(known) + " then " + std::to_string(d));
    }
    return out;
  }

  RemoteProviderConfig config_;
  std::string origin_;
  std::string path_;
  std::counting_semaphore<1024> slots_;
  std::atomic<std::size_t> dimension_{0};
};

// Embeds texts and checks the provider contract (count and common dimension).
inline std::vector<EmbeddingVector> embed(std::span<const std::string> texts,
                                          EmbeddingProvider& provider) {
  auto out = provider.embed(texts);
  if (out.size() != texts.size()) {
    throw ProviderUnavailableError("provider '" + provider.name() + "' returned " +
                                   std::to_string(out.size()) + " vectors for " +
                                   std::to_string(texts.size()) + " inputs");
  }
  for (const auto& v : out) {
    if (v.size() != out.front().size()) {
      throw DimensionMismatchError("provider '" + provider.name() +
                                   "' returned vectors of mixed length");
    }
  }
  return out;
}

}  // namespace gemmas
