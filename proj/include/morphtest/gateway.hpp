#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "morphtest/comparators.hpp"
#include "morphtest/retry.hpp"

namespace morphtest {

enum class ProviderKind { Remote, ScriptedMock };

struct Sampling {
  double temperature = 0.0;
  int max_tokens = 256;
};

/// Deterministic stand-in for a chat model. Rules are tried in insertion
/// order and the first match wins; unmatched prompts get the default.
/// Safe to call from several threads.
class MockScript {
 public:
  enum class Match { Substring, Exact };
  enum class Failure { Transient, Auth };

  struct Rule {
    Match match;
    std::string pattern;
    std::string response;
  };

  explicit MockScript(std::string default_response = "")
      : default_response_(std::move(default_response)) {}

  MockScript& on_substring(std::string pattern, std::string response);
  MockScript& on_exact(std::string prompt, std::string response);
  MockScript& set_default(std::string response);

  /// The next `count` calls throw instead of answering.
  MockScript& inject_failures(int count, Failure kind = Failure::Transient);

  /// Logs the prompt, then answers (or throws an injected failure).
  std::string respond(std::string_view prompt);

  std::vector<std::string> call_log() const;
  std::size_t call_count() const;

  /// Digest of the rules and default; part of cache keys for mock handles.
  std::string fingerprint() const;

  /// {"rules": [{"match": "substring"|"exact", "pattern", "response"}],
  ///  "default_response": "..."}
  static std::shared_ptr<MockScript> from_json(const nlohmann::json& j);
  static std::shared_ptr<MockScript> load(const std::filesystem::path& path);

 private:
  mutable std::mutex mu_;
  std::vector<Rule> rules_;
  std::string default_response_;
  std::vector<std::string> call_log_;
  int pending_failures_ = 0;
  Failure failure_kind_ = Failure::Transient;
};

inline constexpr std::string_view kDefaultEndpoint = "https://api.openai.com/v1";
inline constexpr std::string_view kDefaultTokenPath = "security/token-key.jwt";
/// Endpoints of the form `mock:<script.json>` select a scripted mock.
inline constexpr std::string_view kMockScheme = "mock:";

struct LlmHandle {
  std::string model_id;
  std::string endpoint{kDefaultEndpoint};
  ProviderKind kind = ProviderKind::Remote;
  Sampling sampling;
  std::filesystem::path auth_token_source{kDefaultTokenPath};
  std::shared_ptr<MockScript> script;

  static LlmHandle remote(std::string model_id, std::string endpoint);
  static LlmHandle mock(std::string model_id, std::shared_ptr<MockScript> script);

  /// Remote unless `endpoint` starts with "mock:", in which case the script
  /// file after the prefix is loaded.
  static LlmHandle from_endpoint(std::string model_id, std::string endpoint,
                                 std::filesystem::path token_path = kDefaultTokenPath);

  /// Throws InvalidConfig when the handle cannot be used.
  void validate() const;
};

/// Persistent response store: one JSON file per entry under `dir`, named by
/// the entry's digest. Entries are written atomically and never evicted.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<std::string> lookup(const std::string& key) const;
  void store(const std::string& key, const std::string& value);

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path entry_path(const std::string& key) const;

  std::filesystem::path dir_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, std::string> memo_;
};

/// Digest over the operation, model, endpoint, payload and sampling.
std::string cache_key(std::string_view operation, const LlmHandle& handle,
                      std::string_view payload);

struct HttpResponse {
  int status = 0;  // 0: no response (transport error in `error`)
  std::string body;
  std::string error;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post_json(const std::string& url,
                                 const std::string& bearer_token,
                                 const std::string& body) = 0;
};

std::shared_ptr<HttpTransport> make_http_transport(
    std::chrono::seconds timeout = std::chrono::seconds(120));

struct GatewayOptions {
  std::optional<std::filesystem::path> cache_dir;
  RetryPolicy retry;
  std::size_t max_concurrent_requests = 4;
  std::shared_ptr<HttpTransport> transport;  // defaults to cpp-httplib
  Sleeper sleeper = sleep_for;
};

/// Single entry point for chat completions and embeddings. Thread-safe.
class LlmGateway {
 public:
  explicit LlmGateway(GatewayOptions options = {});

  LlmGateway(const LlmGateway&) = delete;
  LlmGateway& operator=(const LlmGateway&) = delete;

  /// Throws LlmUnreachable, AuthFailure, EmptyResponse or RequestRejected.
  std::string complete(const LlmHandle& handle, std::string_view prompt);

  /// Mock handles use the offline hashed bag-of-words embedding.
  /// Failures surface as EmbeddingUnavailable.
  Embedding embed(const LlmHandle& handle, std::string_view text);

  /// Attempts that reached a provider (HTTP request or mock evaluation).
  std::size_t provider_calls() const { return provider_calls_.load(); }
  std::size_t cache_hits() const { return cache_hits_.load(); }

 private:
  std::string chat_once(const LlmHandle& handle, std::string_view prompt);
  Embedding embed_once(const LlmHandle& handle, std::string_view text);
  HttpResponse post(const LlmHandle& handle, const std::string& path,
                    const nlohmann::json& body);
  std::string bearer_token(const LlmHandle& handle);

  GatewayOptions options_;
  std::optional<ResponseCache> cache_;
  std::counting_semaphore<1024> in_flight_;
  std::atomic<std::size_t> provider_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
  std::mutex token_mu_;
  std::unordered_map<std::string, std::string> tokens_;
};

/// Adapts a gateway + handle to the comparator's provider interface.
class GatewayEmbedder final : public EmbeddingProvider {
 public:
  GatewayEmbedder(LlmGateway& gateway, LlmHandle handle)
      : gateway_(gateway), handle_(std::move(handle)) {}

  Embedding embed(std::string_view text) override {
    return gateway_.embed(handle_, text);
  }
  std::size_t dimensions() const override { return 0; }  // provider-defined

 private:
  LlmGateway& gateway_;
  LlmHandle handle_;
};

}  // namespace morphtest
