#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "clinsynth/chat.hpp"
#include "clinsynth/chunking.hpp"
#include "clinsynth/errors.hpp"

// The three built-in rephrasing prompts and the shared system prompt. The
// strings are load-bearing: downstream corpora are only comparable if every
// run uses exactly these bytes, so they are frozen here and golden-tested.

namespace clinsynth {

struct PromptTemplate {
  std::string prompt_id;
  std::string system_text;
  std::string user_prefix;
};

inline constexpr const char* kSystemPrompt =
    "You are a medical artificial intelligence assistant. The assistant "
    "gives truthful, detailed, and professional answers to the requests.";

inline constexpr const char* kPrompt1 =
    "For the following paragraph give me a diverse paraphrase of the same "
    "in high quality English language as in sentences on Wikipedia:";

inline constexpr const char* kPrompt2 =
    "For the following paragraph give me a paraphrase of the same in high "
    "quality professional medical English language:";

inline constexpr const char* kPrompt3 =
    "For the following paragraph give me a paraphrase of the same in high "
    "quality professional medical English language and explain the medical "
    "terms using your medical knowledge when necessary:";

class PromptRegistry {
 public:
  PromptRegistry() {
    add_builtin("P1", kPrompt1);
    add_builtin("P2", kPrompt2);
    add_builtin("P3", kPrompt3);
  }

  static bool is_builtin(std::string_view id) {
    return id == "P1" || id == "P2" || id == "P3";
  }

  const PromptTemplate& get(std::string_view prompt_id) const {
    auto it = templates_.find(std::string(prompt_id));
    if (it == templates_.end()) {
      std::string msg = "unknown prompt id '" + std::string(prompt_id) +
                        "'; available:";
      for (const auto& [id, t] : templates_) msg += " " + id;
      throw ConfigError(msg);
    }
    return it->second;
  }

  // Custom templates live beside the built-ins but may not shadow them.
  void register_custom(PromptTemplate t) {
    if (is_builtin(t.prompt_id)) {
      throw ConfigError("prompt id '" + t.prompt_id +
                        "' collides with a built-in template");
    }
    if (t.prompt_id.empty()) throw ConfigError("prompt id must be non-empty");
    templates_[t.prompt_id] = std::move(t);
  }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (const auto& [id, t] : templates_) out.push_back(id);
    return out;
  }

 private:
  void add_builtin(std::string id, std::string user_prefix) {
    PromptTemplate t;
    t.prompt_id = id;
    t.system_text = kSystemPrompt;
    t.user_prefix = std::move(user_prefix);
    templates_.emplace(std::move(id), std::move(t));
  }

  std::map<std::string, PromptTemplate> templates_;
};

inline nlohmann::json prompt_to_json(const PromptTemplate& t) {
  return nlohmann::json{{"prompt_id", t.prompt_id},
                        {"system_text", t.system_text},
                        {"user_prefix", t.user_prefix}};
}

inline PromptTemplate prompt_from_json(const nlohmann::json& j) {
  for (const auto& key : {"prompt_id", "system_text", "user_prefix"}) {
    if (!j.contains(key) || !j.at(key).is_string()) {
      throw DataError(std::string("prompt template missing string field '") +
                      key + "'");
    }
  }
  return PromptTemplate{j.at("prompt_id").get<std::string>(),
                        j.at("system_text").get<std::string>(),
                        j.at("user_prefix").get<std::string>()};
}

// Prompt text and chunk text are joined with exactly one blank line; a
// fixed join keeps request bodies reproducible.
inline ChatRequest render_request(const PromptTemplate& t, const Chunk& chunk,
                                  const DecodingParams& decoding) {
  ChatRequest req;
  req.chunk_id = chunk.chunk_id;
  req.messages.push_back({"system", t.system_text});
  req.messages.push_back({"user", t.user_prefix + "\n\n" + chunk.text});
  req.decoding = decoding;
  return req;
}

}  // namespace clinsynth
