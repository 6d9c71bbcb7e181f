#include "morphtest/gateway.hpp"

#include <httplib.h>

#include <fstream>

#include "morphtest/digest.hpp"
#include "morphtest/errors.hpp"
#include "morphtest/io.hpp"
#include "morphtest/text.hpp"

namespace morphtest {

using nlohmann::json;

// --- MockScript -------------------------------------------------------------

MockScript& MockScript::on_substring(std::string pattern, std::string response) {
  std::lock_guard lock(mu_);
  rules_.push_back({Match::Substring, std::move(pattern), std::move(response)});
  return *this;
}

MockScript& MockScript::on_exact(std::string prompt, std::string response) {
  std::lock_guard lock(mu_);
  rules_.push_back({Match::Exact, std::move(prompt), std::move(response)});
  return *this;
}

MockScript& MockScript::set_default(std::string response) {
  std::lock_guard lock(mu_);
  default_response_ = std::move(response);
  return *this;
}

MockScript& MockScript::inject_failures(int count, Failure kind) {
  std::lock_guard lock(mu_);
  pending_failures_ = count;
  failure_kind_ = kind;
  return *this;
}

std::string MockScript::respond(std::string_view prompt) {
  std::lock_guard lock(mu_);
  call_log_.emplace_back(prompt);
  if (pending_failures_ > 0) {
    --pending_failures_;
    if (failure_kind_ == Failure::Auth) throw AuthFailure("mock: injected auth failure");
    throw TransientError("mock: injected transient failure");
  }
  for (const auto& rule : rules_) {
    const bool hit = rule.match == Match::Exact
                         ? prompt == rule.pattern
                         : prompt.find(rule.pattern) != std::string_view::npos;
    if (hit) return rule.response;
  }
  return default_response_;
}

std::vector<std::string> MockScript::call_log() const {
  std::lock_guard lock(mu_);
  return call_log_;
}

std::size_t MockScript::call_count() const {
  std::lock_guard lock(mu_);
  return call_log_.size();
}

std::string MockScript::fingerprint() const {
  std::lock_guard lock(mu_);
  json j = json::array();
  for (const auto& r : rules_) {
    j.push_back({r.match == Match::Exact ? "exact" : "substring", r.pattern, r.response});
  }
  j.push_back(default_response_);
  return sha256_hex(j.dump());
}

std::shared_ptr<MockScript> MockScript::from_json(const json& j) {
  try {
    auto script = std::make_shared<MockScript>(j.value("default_response", std::string()));
    for (const auto& r : j.value("rules", json::array())) {
      const auto match = r.value("match", std::string("substring"));
      if (match == "substring") {
        script->on_substring(r.at("pattern").get<std::string>(),
                             r.at("response").get<std::string>());
      } else if (match == "exact") {
        script->on_exact(r.at("pattern").get<std::string>(),
                         r.at("response").get<std::string>());
      } else {
        throw InvalidConfig("mock script: unknown match kind '" + match + "'");
      }
    }
    return script;
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("mock script: ") + e.what());
  }
}

std::shared_ptr<MockScript> MockScript::load(const std::filesystem::path& path) {
  try {
    return from_json(json::parse(read_file(path)));
  } catch (const json::parse_error& e) {
    throw InvalidConfig("mock script " + path.string() + ": " + e.what());
  } catch (const IoFailure& e) {
    throw InvalidConfig(e.what());
  }
}

// --- LlmHandle --------------------------------------------------------------

LlmHandle LlmHandle::remote(std::string model_id, std::string endpoint) {
  LlmHandle h;
  h.model_id = std::move(model_id);
  h.endpoint = std::move(endpoint);
  h.kind = ProviderKind::Remote;
  return h;
}

LlmHandle LlmHandle::mock(std::string model_id, std::shared_ptr<MockScript> script) {
  LlmHandle h;
  h.model_id = std::move(model_id);
  h.endpoint = std::string(kMockScheme);
  h.kind = ProviderKind::ScriptedMock;
  h.script = std::move(script);
  return h;
}

LlmHandle LlmHandle::from_endpoint(std::string model_id, std::string endpoint,
                                   std::filesystem::path token_path) {
  LlmHandle h;
  if (endpoint.starts_with(kMockScheme)) {
    h = mock(std::move(model_id),
             MockScript::load(endpoint.substr(kMockScheme.size())));
    h.endpoint = std::move(endpoint);
  } else {
    h = remote(std::move(model_id), std::move(endpoint));
  }
  h.auth_token_source = std::move(token_path);
  return h;
}

void LlmHandle::validate() const {
  if (model_id.empty()) throw InvalidConfig("LLM handle without a model id");
  if (kind == ProviderKind::Remote && endpoint.empty()) {
    throw InvalidConfig("remote LLM handle '" + model_id + "' has no endpoint");
  }
  if (kind == ProviderKind::ScriptedMock && !script) {
    throw InvalidConfig("mock LLM handle '" + model_id + "' has no script");
  }
}

// --- ResponseCache ----------------------------------------------------------

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path ResponseCache::entry_path(const std::string& key) const {
  return dir_ / (key + ".json");
}

std::optional<std::string> ResponseCache::lookup(const std::string& key) const {
  std::lock_guard lock(mu_);
  if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  const auto path = entry_path(key);
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  try {
    const auto j = json::parse(read_file(path));
    if (j.at("key").get<std::string>() != key) return std::nullopt;
    auto value = j.at("value").get<std::string>();
    memo_.emplace(key, value);
    return value;
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable entry counts as a miss
  }
}

void ResponseCache::store(const std::string& key, const std::string& value) {
  const json entry{{"key", key}, {"value", value}, {"created_at", iso8601_now()}};
  std::lock_guard lock(mu_);
  write_file_atomic(entry_path(key), entry.dump(2));
  memo_[key] = value;
}

std::string cache_key(std::string_view operation, const LlmHandle& handle,
                      std::string_view payload) {
  json j{{"op", operation},
         {"model", handle.model_id},
         {"endpoint", handle.endpoint},
         {"payload", payload},
         {"temperature", handle.sampling.temperature},
         {"max_tokens", handle.sampling.max_tokens}};
  if (handle.kind == ProviderKind::ScriptedMock && handle.script) {
    j["script"] = handle.script->fingerprint();
  }
  return sha256_hex(j.dump());
}

// --- HTTP transport ---------------------------------------------------------

namespace {

class HttplibTransport final : public HttpTransport {
 public:
  explicit HttplibTransport(std::chrono::seconds timeout) : timeout_(timeout) {}

  HttpResponse post_json(const std::string& url, const std::string& bearer_token,
                         const std::string& body) override {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
      return {0, {}, "malformed endpoint URL '" + url + "'"};
    }
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string base = url.substr(0, path_start);
    const std::string path =
        path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(base);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers headers;
    if (!bearer_token.empty()) {
      headers.emplace("Authorization", "Bearer " + bearer_token);
    }
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) return {0, {}, httplib::to_string(res.error())};
    return {res->status, res->body, {}};
  }

 private:
  std::chrono::seconds timeout_;
};

std::string join_url(std::string_view endpoint, std::string_view path) {
  while (endpoint.ends_with('/')) endpoint.remove_suffix(1);
  return std::string(endpoint) + std::string(path);
}

void raise_for_status(const HttpResponse& r, const std::string& what) {
  if (r.status == 0) throw TransientError(what + ": " + r.error);
  if (r.status == 401 || r.status == 403) {
    throw AuthFailure(what + ": HTTP " + std::to_string(r.status));
  }
  if (r.status == 408 || r.status == 429 || r.status >= 500) {
    throw TransientError(what + ": HTTP " + std::to_string(r.status));
  }
  if (r.status < 200 || r.status >= 300) {
    throw RequestRejected(what + ": HTTP " + std::to_string(r.status) + " " + r.body);
  }
}

}  // namespace

std::shared_ptr<HttpTransport> make_http_transport(std::chrono::seconds timeout) {
  return std::make_shared<HttplibTransport>(timeout);
}

// --- LlmGateway -------------------------------------------------------------

LlmGateway::LlmGateway(GatewayOptions options)
    : options_(std::move(options)),
      in_flight_(static_cast<std::ptrdiff_t>(
          std::clamp<std::size_t>(options_.max_concurrent_requests, 1, 1024))) {
  if (!options_.transport) options_.transport = make_http_transport();
  if (!options_.sleeper) options_.sleeper = sleep_for;
  if (options_.cache_dir) cache_.emplace(*options_.cache_dir);
}

std::string LlmGateway::bearer_token(const LlmHandle& handle) {
  const auto key = handle.auth_token_source.string();
  std::lock_guard lock(token_mu_);
  if (auto it = tokens_.find(key); it != tokens_.end()) return it->second;
  std::string token;
  std::ifstream in(handle.auth_token_source);
  if (in) {
    std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    token = std::string(text::trim(raw));
  }
  tokens_.emplace(key, token);
  return token;
}

HttpResponse LlmGateway::post(const LlmHandle& handle, const std::string& path,
                              const json& body) {
  const auto token = bearer_token(handle);
  in_flight_.acquire();
  provider_calls_.fetch_add(1);
  HttpResponse r;
  try {
    r = options_.transport->post_json(join_url(handle.endpoint, path), token, body.dump());
  } catch (...) {
    in_flight_.release();
    throw;
  }
  in_flight_.release();
  return r;
}

std::string LlmGateway::chat_once(const LlmHandle& handle, std::string_view prompt) {
  if (handle.kind == ProviderKind::ScriptedMock) {
    provider_calls_.fetch_add(1);
    return handle.script->respond(prompt);
  }
  const json body{{"model", handle.model_id},
                  {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
                  {"temperature", handle.sampling.temperature},
                  {"max_tokens", handle.sampling.max_tokens}};
  const auto r = post(handle, "/chat/completions", body);
  raise_for_status(r, "chat completion for " + handle.model_id);
  try {
    const auto j = json::parse(r.body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    return content.is_null() ? std::string() : content.get<std::string>();
  } catch (const json::exception& e) {
    throw TransientError("unreadable chat completion body: " + std::string(e.what()));
  }
}

std::string LlmGateway::complete(const LlmHandle& handle, std::string_view prompt) {
  handle.validate();
  std::string key;
  if (cache_) {
    key = cache_key("chat", handle, prompt);
    if (auto hit = cache_->lookup(key)) {
      cache_hits_.fetch_add(1);
      return *hit;
    }
  }
  auto text = with_retry([&] { return chat_once(handle, prompt); }, options_.retry,
                         options_.sleeper);
  if (text::trim(text).empty()) {
    throw EmptyResponse("empty completion from " + handle.model_id);
  }
  if (cache_) cache_->store(key, text);
  return text;
}

Embedding LlmGateway::embed_once(const LlmHandle& handle, std::string_view text) {
  if (handle.kind == ProviderKind::ScriptedMock) {
    provider_calls_.fetch_add(1);
    return HashedBagOfWordsEmbedder().embed(text);
  }
  const json body{{"model", handle.model_id}, {"input", text}};
  const auto r = post(handle, "/embeddings", body);
  raise_for_status(r, "embedding for " + handle.model_id);
  try {
    return json::parse(r.body).at("data").at(0).at("embedding").get<Embedding>();
  } catch (const json::exception& e) {
    throw TransientError("unreadable embeddings body: " + std::string(e.what()));
  }
}

Embedding LlmGateway::embed(const LlmHandle& handle, std::string_view text) {
  handle.validate();
  std::string key;
  if (cache_) {
    key = cache_key("embed", handle, text);
    if (auto hit = cache_->lookup(key)) {
      cache_hits_.fetch_add(1);
      return json::parse(*hit).get<Embedding>();
    }
  }
  Embedding v;
  try {
    v = with_retry([&] { return embed_once(handle, text); }, options_.retry,
                   options_.sleeper);
  } catch (const AuthFailure&) {
    throw;
  } catch (const EmbeddingUnavailable&) {
    throw;
  } catch (const GatewayError& e) {
    throw EmbeddingUnavailable(e.what());
  }
  if (cache_) cache_->store(key, json(v).dump());
  return v;
}

}  // namespace morphtest
