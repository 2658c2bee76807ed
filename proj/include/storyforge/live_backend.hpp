#pragma once

// OpenAI-compatible chat/embeddings client. Needs httplib with OpenSSL
// support for https endpoints; link storyforge_live.

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "storyforge/backend.hpp"
#include "storyforge/core.hpp"

namespace storyforge {

struct LiveConfig {
  std::string api_key;
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-4o";
  std::string embed_model = "text-embedding-3-small";
  int max_in_flight = 4;
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{500};
  int timeout_seconds = 120;

  /// STORYFORGE_API_KEY is required; STORYFORGE_BASE_URL and
  /// STORYFORGE_MODEL override the defaults.
  static LiveConfig from_env() {
    LiveConfig c;
    const char* key = std::getenv("STORYFORGE_API_KEY");
    if (!key || !*key) throw Error(Errc::BadConfig, "STORYFORGE_API_KEY is not set");
    c.api_key = key;
    if (const char* url = std::getenv("STORYFORGE_BASE_URL"); url && *url) c.base_url = url;
    if (const char* model = std::getenv("STORYFORGE_MODEL"); model && *model) c.model = model;
    return c;
  }
};

namespace detail {

/// Splits "scheme://host[:port]/prefix" into the client origin and path prefix.
inline std::pair<std::string, std::string> split_base_url(std::string_view url) {
  const auto scheme = url.find("://");
  if (scheme == std::string_view::npos) throw Error(Errc::BadConfig, "base URL needs a scheme: " + std::string(url));
  const auto path = url.find('/', scheme + 3);
  std::string origin(url.substr(0, path));
  std::string prefix = path == std::string_view::npos ? "" : std::string(url.substr(path));
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {origin, prefix};
}

class InFlightLimit {
 public:
  explicit InFlightLimit(int n) : free_(n) {}
  void acquire() {
    std::unique_lock lock(m_);
    cv_.wait(lock, [&] { return free_ > 0; });
    --free_;
  }
  void release() {
    {
      std::lock_guard lock(m_);
      ++free_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex m_;
  std::condition_variable cv_;
  int free_;
};

}  // namespace detail

class LiveBackend final : public TextBackend {
 public:
  explicit LiveBackend(LiveConfig cfg) : cfg_(std::move(cfg)), limit_(std::max(1, cfg_.max_in_flight)) {
    if (cfg_.api_key.empty()) throw Error(Errc::BadConfig, "STORYFORGE_API_KEY is not set");
    std::tie(origin_, prefix_) = detail::split_base_url(cfg_.base_url);
  }

  std::string complete(std::string_view prompt, std::span<const Message> history) override {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : history) messages.push_back({{"role", m.role}, {"content", m.content}});
    messages.push_back({{"role", "user"}, {"content", std::string(prompt)}});
    const auto reply = post("/chat/completions", {{"model", cfg_.model}, {"messages", messages}});
    try {
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
      throw Error(Errc::BackendError, std::string("unexpected chat reply: ") + ex.what());
    }
  }

  bool supports_embed() const override { return true; }

  std::vector<double> embed(std::string_view text) override {
    const auto reply = post("/embeddings", {{"model", cfg_.embed_model}, {"input", std::string(text)}});
    try {
      return reply.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& ex) {
      throw Error(Errc::BackendError, std::string("unexpected embedding reply: ") + ex.what());
    }
  }

  std::string name() const override { return "live"; }

 private:
  nlohmann::json post(const std::string& endpoint, const nlohmann::json& body) {
    limit_.acquire();
    struct Release {
      detail::InFlightLimit& l;
      ~Release() { l.release(); }
    } release{limit_};

    httplib::Client client(origin_);
    client.set_read_timeout(cfg_.timeout_seconds, 0);
    client.set_connection_timeout(10, 0);
    const httplib::Headers headers{{"Authorization", "Bearer " + cfg_.api_key}};
    const std::string payload = body.dump();

    auto backoff = cfg_.initial_backoff;
    std::string last;
    for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
      auto res = client.Post(prefix_ + endpoint, headers, payload, "application/json");
      if (res && res->status == 200) {
        try {
          return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& ex) {
          throw Error(Errc::BackendError, std::string("reply is not JSON: ") + ex.what());
        }
      }
      if (res) {
        last = "HTTP " + std::to_string(res->status);
        const bool transient = res->status == 429 || res->status >= 500;
        if (!transient) throw Error(Errc::BackendError, last + ": " + res->body.substr(0, 200));
      } else {
        last = httplib::to_string(res.error());
      }
      if (attempt < cfg_.max_attempts) {
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
    }
    throw Error(Errc::BackendError, endpoint + " failed after " + std::to_string(cfg_.max_attempts) + " attempts: " + last);
  }

  LiveConfig cfg_;
  detail::InFlightLimit limit_;
  std::string origin_;
  std::string prefix_;
};

}  // namespace storyforge
