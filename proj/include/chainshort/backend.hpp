#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "chainshort/errors.hpp"
#include "chainshort/resources.hpp"

namespace chainshort {

struct ChatMessage {
  std::string speaker;  // "user" or "assistant" from the callee's viewpoint
  std::string text;
};

struct AgentRequest {
  std::string role_profile;  // e.g. "programmer", "reviewer"
  std::string system_prompt;
  std::vector<ChatMessage> messages;
  double temperature = 0.2;
};

struct AgentReply {
  std::string text;
  ResourceDelta usage;
};

/// Rough token estimate for providers that do not report usage:
/// whitespace-delimited words times 4/3, rounded up.
inline std::int64_t count_tokens_fallback(const std::string& text) {
  std::istringstream stream(text);
  std::int64_t words = 0;
  std::string word;
  while (stream >> word) ++words;
  return (words * 4 + 2) / 3;
}

class AgentBackend {
 public:
  virtual ~AgentBackend() = default;
  virtual AgentReply complete(const AgentRequest& request) = 0;
};

/// Canned reply fed to a ScriptedBackend, consumed in order per role.
struct ScriptEntry {
  std::string text;
  ResourceDelta usage;
};

/// Replays a fixed conversation: each role profile owns a queue and every
/// complete() call pops the front. Running a queue dry is an error rather
/// than an improvised answer, so a drifting control flow fails loudly.
class ScriptedBackend : public AgentBackend {
 public:
  ScriptedBackend() = default;

  explicit ScriptedBackend(
      std::map<std::string, std::vector<ScriptEntry>> scripts) {
    for (auto& [role, entries] : scripts) {
      auto& queue = scripts_[role];
      for (auto& entry : entries) queue.push_back(std::move(entry));
    }
  }

  void push(const std::string& role_profile, ScriptEntry entry) {
    std::lock_guard<std::mutex> lock(mutex_);
    scripts_[role_profile].push_back(std::move(entry));
  }

  AgentReply complete(const AgentRequest& request) override {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = scripts_.find(request.role_profile);
    if (it == scripts_.end() || it->second.empty()) {
      raise(Errc::script_underflow,
            "no scripted reply left for role '" + request.role_profile + "'");
    }
    ScriptEntry entry = std::move(it->second.front());
    it->second.pop_front();

    AgentReply reply;
    reply.text = std::move(entry.text);
    reply.usage = entry.usage;
    if (reply.usage.tokens == 0 && !reply.text.empty()) {
      reply.usage.tokens = count_tokens_fallback(reply.text);
    }
    ++calls_;
    return reply;
  }

  std::size_t calls() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return calls_;
  }

  std::size_t remaining(const std::string& role_profile) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = scripts_.find(role_profile);
    return it == scripts_.end() ? 0 : it->second.size();
  }

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::deque<ScriptEntry>> scripts_;
  std::size_t calls_ = 0;
};

}  // namespace chainshort
