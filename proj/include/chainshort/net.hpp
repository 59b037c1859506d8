#pragma once

#include <chrono>
#include <cstdint>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "chainshort/backend.hpp"
#include "chainshort/embedding.hpp"
#include "chainshort/errors.hpp"

namespace chainshort {

namespace detail {

struct SplitUrl {
  std::string host_base;    // scheme://host[:port]
  std::string path_prefix;  // leading '/', no trailing '/'; may be empty
};

inline SplitUrl split_base_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    raise(Errc::configuration_error,
          "base_url must include a scheme: '" + base_url + "'");
  }
  const auto path_start = base_url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    return {base_url, ""};
  }
  std::string prefix = base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {base_url.substr(0, path_start), prefix};
}

inline bool transient_status(int status) {
  return status == 429 || status >= 500;
}

/// POSTs JSON with bounded retries on transport-level failures. Non-transient
/// HTTP statuses fail immediately; exhausting attempts raises provider-error.
inline nlohmann::json post_json_with_retry(const std::string& base_url,
                                           const std::string& endpoint,
                                           const nlohmann::json& body,
                                           const std::string& api_key,
                                           double timeout_seconds,
                                           int max_attempts) {
  const SplitUrl url = split_base_url(base_url);
  const std::string path = url.path_prefix + endpoint;
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (!api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + api_key);
  }

  std::string last_failure = "no attempt made";
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    httplib::Client client(url.host_base);
    client.set_connection_timeout(std::chrono::duration<double>(timeout_seconds));
    client.set_read_timeout(std::chrono::duration<double>(timeout_seconds));
    client.set_write_timeout(std::chrono::duration<double>(timeout_seconds));

    auto res = client.Post(path, headers, payload, "application/json");
    if (res) {
      if (res->status >= 200 && res->status < 300) {
        nlohmann::json parsed =
            nlohmann::json::parse(res->body, nullptr, false);
        if (parsed.is_discarded()) {
          raise(Errc::provider_error,
                "provider returned unparseable JSON from " + path);
        }
        return parsed;
      }
      if (!transient_status(res->status)) {
        raise(Errc::provider_error,
              "provider rejected request to " + path + " with status " +
                  std::to_string(res->status) + ": " +
                  res->body.substr(0, 200));
      }
      last_failure = "status " + std::to_string(res->status);
    } else {
      last_failure = httplib::to_string(res.error());
    }
    if (attempt < max_attempts) {
      std::this_thread::sleep_for(std::chrono::milliseconds(100 << (attempt - 1)));
    }
  }
  raise(Errc::provider_error,
        "transport failure after " + std::to_string(max_attempts) +
            " attempts to " + path + " (" + last_failure + ")");
}

}  // namespace detail

/// Chat-completions client for any endpoint speaking the common JSON shape.
/// Reported time is the wall clock around the whole exchange, retries and
/// backoff included, so failure costs land in the budget too.
class HttpChatBackend : public AgentBackend {
 public:
  HttpChatBackend(std::string base_url, std::string model, std::string api_key,
                  double timeout_seconds = 60.0, int max_attempts = 3)
      : base_url_(std::move(base_url)),
        model_(std::move(model)),
        api_key_(std::move(api_key)),
        timeout_seconds_(timeout_seconds),
        max_attempts_(max_attempts) {}

  AgentReply complete(const AgentRequest& request) override {
    if (request.messages.empty()) {
      raise(Errc::invalid_argument, "completion request without messages");
    }
    nlohmann::json messages = nlohmann::json::array();
    if (!request.system_prompt.empty()) {
      messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
    }
    for (const ChatMessage& message : request.messages) {
      messages.push_back({{"role", message.speaker}, {"content", message.text}});
    }
    const nlohmann::json body = {{"model", model_},
                                 {"messages", messages},
                                 {"temperature", request.temperature}};

    const auto start = std::chrono::steady_clock::now();
    const nlohmann::json parsed = detail::post_json_with_retry(
        base_url_, "/chat/completions", body, api_key_, timeout_seconds_,
        max_attempts_);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();

    if (!parsed.contains("choices") || !parsed["choices"].is_array() ||
        parsed["choices"].empty() ||
        !parsed["choices"][0].contains("message") ||
        !parsed["choices"][0]["message"].contains("content")) {
      raise(Errc::provider_error, "completion reply missing choices[0].message");
    }

    AgentReply reply;
    reply.text = parsed["choices"][0]["message"]["content"].get<std::string>();
    reply.usage.time_seconds = elapsed;
    reply.usage.tokens = extract_tokens(parsed, request, reply.text);
    return reply;
  }

 private:
  std::int64_t extract_tokens(const nlohmann::json& parsed,
                              const AgentRequest& request,
                              const std::string& reply_text) const {
    if (parsed.contains("usage") && parsed["usage"].is_object()) {
      const auto& usage = parsed["usage"];
      std::int64_t total = 0;
      bool any = false;
      for (const char* field : {"prompt_tokens", "completion_tokens"}) {
        if (usage.contains(field) && usage[field].is_number()) {
          total += usage[field].get<std::int64_t>();
          any = true;
        }
      }
      if (any && total >= 0) return total;
    }
    std::int64_t estimate = count_tokens_fallback(request.system_prompt);
    for (const ChatMessage& message : request.messages) {
      estimate += count_tokens_fallback(message.text);
    }
    return estimate + count_tokens_fallback(reply_text);
  }

  std::string base_url_;
  std::string model_;
  std::string api_key_;
  double timeout_seconds_;
  int max_attempts_;
};

/// Embeddings client with an exact-text memo so repeated texts (task
/// statements, final nodes) cost one round trip.
class HttpEmbedder : public Embedder {
 public:
  HttpEmbedder(std::string base_url, std::string model, std::string api_key,
               double timeout_seconds = 60.0, int max_attempts = 3)
      : base_url_(std::move(base_url)),
        model_(std::move(model)),
        api_key_(std::move(api_key)),
        timeout_seconds_(timeout_seconds),
        max_attempts_(max_attempts) {}

  EmbeddingVector embed(const std::string& text) const override {
    {
      std::lock_guard<std::mutex> lock(memo_mutex_);
      auto it = memo_.find(text);
      if (it != memo_.end()) return it->second;
    }

    const nlohmann::json body = {{"input", text}, {"model", model_}};
    const nlohmann::json parsed = detail::post_json_with_retry(
        base_url_, "/embeddings", body, api_key_, timeout_seconds_,
        max_attempts_);
    if (!parsed.contains("data") || !parsed["data"].is_array() ||
        parsed["data"].empty() || !parsed["data"][0].contains("embedding") ||
        !parsed["data"][0]["embedding"].is_array()) {
      raise(Errc::provider_error, "embedding reply missing data[0].embedding");
    }

    EmbeddingVector vector;
    for (const auto& component : parsed["data"][0]["embedding"]) {
      if (!component.is_number()) {
        raise(Errc::provider_error, "non-numeric embedding component");
      }
      vector.components.push_back(component.get<double>());
    }

    std::lock_guard<std::mutex> lock(memo_mutex_);
    memo_.emplace(text, vector);
    return vector;
  }

 private:
  std::string base_url_;
  std::string model_;
  std::string api_key_;
  double timeout_seconds_;
  int max_attempts_;
  mutable std::mutex memo_mutex_;
  mutable std::unordered_map<std::string, EmbeddingVector> memo_;
};

}  // namespace chainshort
