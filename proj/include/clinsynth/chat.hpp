#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace clinsynth {

struct ChatMessage {
  std::string role;
  std::string content;
};

struct DecodingParams {
  double temperature = 0.7;
  double top_p = 0.95;
  int max_new_tokens = 1024;
  std::optional<std::uint64_t> seed;
};

struct ChatRequest {
  std::string chunk_id;  // provenance: which chunk produced this request
  std::vector<ChatMessage> messages;
  DecodingParams decoding;
};

enum class FinishReason { stop, length, content_filter, error };

inline const char* to_string(FinishReason r) {
  switch (r) {
    case FinishReason::stop: return "stop";
    case FinishReason::length: return "length";
    case FinishReason::content_filter: return "content_filter";
    default: return "error";
  }
}

struct Completion {
  std::string chunk_id;
  std::string output_text;
  std::uint64_t prompt_tokens = 0;
  std::uint64_t completion_tokens = 0;
  std::string model_id;
  FinishReason finish_reason = FinishReason::stop;
  std::uint64_t latency_ms = 0;
  int attempt_count = 0;
  bool usage_estimated = false;  // server omitted usage; counts are ours
};

}  // namespace clinsynth
