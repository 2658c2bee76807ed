#pragma once

#include <deque>
#include <fstream>
#include <map>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "storyforge/core.hpp"

namespace storyforge {

struct Message {
  std::string role;  // "user" or "assistant"
  std::string content;

  friend bool operator==(const Message&, const Message&) = default;
};

/// Text generation service. complete() answers `prompt` given the prior
/// conversation; embed() is optional.
class TextBackend {
 public:
  virtual ~TextBackend() = default;

  virtual std::string complete(std::string_view prompt, std::span<const Message> history) = 0;

  virtual bool supports_embed() const { return false; }

  virtual std::vector<double> embed(std::string_view /*text*/) {
    throw Error(Errc::EmbedUnsupported, name() + " has no embedding endpoint");
  }

  virtual std::string name() const = 0;
};

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::BackendError, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

/// Digest of a full request: every history message then the prompt, each as
/// "<role>\n<content>\n\x1e".
inline std::string request_digest(std::string_view prompt, std::span<const Message> history) {
  std::string canon;
  for (const auto& m : history) {
    canon += m.role;
    canon += '\n';
    canon += m.content;
    canon += "\n\x1e";
  }
  canon += "user\n";
  canon += prompt;
  canon += "\n\x1e";
  return sha256_hex(canon);
}

inline std::string embed_digest(std::string_view text) { return sha256_hex(std::string("embed\n") + std::string(text)); }

/// Serves recorded responses keyed by request digest. An unknown digest is a
/// hard error so prompt drift never goes unnoticed.
class ReplayBackend final : public TextBackend {
 public:
  ReplayBackend() = default;

  /// `records` is an array of {prompt_sha256, response} and, optionally,
  /// {embed_sha256, embedding} entries.
  static ReplayBackend from_json(const nlohmann::json& records) {
    if (!records.is_array()) throw Error(Errc::BadFormat, "replay fixtures must be a JSON array");
    ReplayBackend b;
    for (const auto& r : records) {
      if (r.contains("prompt_sha256")) {
        b.responses_[r.at("prompt_sha256").get<std::string>()] = r.at("response").get<std::string>();
      } else if (r.contains("embed_sha256")) {
        b.embeddings_[r.at("embed_sha256").get<std::string>()] = r.at("embedding").get<std::vector<double>>();
      } else {
        throw Error(Errc::BadFormat, "replay record without a digest");
      }
    }
    return b;
  }

  static ReplayBackend from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::BadConfig, "cannot open fixtures " + path);
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(Errc::BadFormat, path + ": " + ex.what());
    }
  }

  std::string complete(std::string_view prompt, std::span<const Message> history) override {
    const auto digest = request_digest(prompt, history);
    auto it = responses_.find(digest);
    if (it == responses_.end()) {
      throw Error(Errc::BackendError, "replay fixture has no response for digest " + digest);
    }
    return it->second;
  }

  bool supports_embed() const override { return !embeddings_.empty(); }

  std::vector<double> embed(std::string_view text) override {
    if (embeddings_.empty()) return TextBackend::embed(text);
    const auto digest = embed_digest(text);
    auto it = embeddings_.find(digest);
    if (it == embeddings_.end()) throw Error(Errc::BackendError, "replay fixture has no embedding for " + digest);
    return it->second;
  }

  std::string name() const override { return "replay"; }

  std::size_t size() const noexcept { return responses_.size(); }

 private:
  std::map<std::string, std::string> responses_;
  std::map<std::string, std::vector<double>> embeddings_;
};

/// Returns canned responses in call order; used to capture fixtures and to
/// build multi-turn scenarios in tests.
class ScriptedBackend final : public TextBackend {
 public:
  explicit ScriptedBackend(std::vector<std::string> responses)
      : responses_(responses.begin(), responses.end()) {}

  std::string complete(std::string_view /*prompt*/, std::span<const Message> /*history*/) override {
    if (responses_.empty()) throw Error(Errc::BackendError, "script exhausted");
    std::string r = std::move(responses_.front());
    responses_.pop_front();
    ++calls_;
    return r;
  }

  std::string name() const override { return "script"; }
  std::size_t calls() const noexcept { return calls_; }
  std::size_t remaining() const noexcept { return responses_.size(); }

 private:
  std::deque<std::string> responses_;
  std::size_t calls_ = 0;
};

}  // namespace storyforge
