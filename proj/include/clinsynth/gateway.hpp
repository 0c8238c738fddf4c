#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "clinsynth/chat.hpp"
#include "clinsynth/errors.hpp"
#include "clinsynth/io.hpp"
#include "clinsynth/rng.hpp"
#include "clinsynth/text.hpp"
#include "clinsynth/tokenizer.hpp"

// Dispatch to OpenAI-compatible chat-completions endpoints. One Gateway per
// endpoint; it limits in-flight requests, retries transient failures with
// exponential backoff and full jitter, and can append every request/response
// pair to a JSONL transcript for replay.

namespace clinsynth {

struct RetryPolicy {
  int max_attempts = 5;
  int base_backoff_ms = 500;
};

struct ModelEndpoint {
  std::string model_id;
  std::string base_url;     // e.g. "http://localhost:8000/v1"
  std::string api_key_env;  // env var holding the bearer token, may be empty
  int max_in_flight = 8;
  int timeout_s = 120;
  RetryPolicy retry;
};

struct HealthStatus {
  bool reachable = false;
  bool model_listed = false;
};

// Canonical wire body. Field order is fixed, so identical (request, params)
// always serialize to identical bytes.
inline std::string chat_request_body(const ChatRequest& req,
                                     const std::string& model_id) {
  nlohmann::ordered_json j;
  j["model"] = model_id;
  auto msgs = nlohmann::ordered_json::array();
  for (const auto& m : req.messages) {
    nlohmann::ordered_json mj;
    mj["role"] = m.role;
    mj["content"] = m.content;
    msgs.push_back(std::move(mj));
  }
  j["messages"] = std::move(msgs);
  j["temperature"] = req.decoding.temperature;
  j["top_p"] = req.decoding.top_p;
  j["max_tokens"] = req.decoding.max_new_tokens;
  if (req.decoding.seed) j["seed"] = *req.decoding.seed;
  return j.dump();
}

namespace detail {

// Counting semaphore with a runtime limit.
class Semaphore {
 public:
  explicit Semaphore(int count) : count_(count) {}
  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return count_ > 0; });
    --count_;
  }
  void release() {
    {
      std::lock_guard lock(mu_);
      ++count_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int count_;
};

struct SplitUrl {
  std::string host;    // scheme://host:port
  std::string prefix;  // path prefix, e.g. "/v1"
};

inline SplitUrl split_base_url(const std::string& base_url) {
  std::string url = base_url;
  if (url.find("://") == std::string::npos) url = "http://" + url;
  const std::size_t scheme_end = url.find("://") + 3;
  const std::size_t slash = url.find('/', scheme_end);
  SplitUrl out;
  if (slash == std::string::npos) {
    out.host = url;
  } else {
    out.host = url.substr(0, slash);
    out.prefix = url.substr(slash);
    while (!out.prefix.empty() && out.prefix.back() == '/') {
      out.prefix.pop_back();
    }
  }
  return out;
}

inline FinishReason finish_reason_from_string(std::string_view s) {
  if (s == "length") return FinishReason::length;
  if (s == "content_filter") return FinishReason::content_filter;
  if (s == "error") return FinishReason::error;
  return FinishReason::stop;
}

}  // namespace detail

// Thread-safe JSONL appender for request/response capture.
class TranscriptWriter {
 public:
  explicit TranscriptWriter(const fs::path& path)
      : out_(path, std::ios::binary | std::ios::app) {
    if (!out_) throw DataError("cannot open transcript: " + path.string());
  }

  void append(const std::string& chunk_id, int attempt,
              const std::string& request_body, int status,
              const std::string& response_body) {
    nlohmann::json entry{{"attempt", attempt},
                         {"chunk_id", chunk_id},
                         {"request_body", request_body},
                         {"response_body", response_body},
                         {"status", status}};
    std::lock_guard lock(mu_);
    out_ << entry.dump() << '\n';
    out_.flush();
  }

 private:
  std::mutex mu_;
  std::ofstream out_;
};

class Gateway {
 public:
  using SleepFn = std::function<void(std::chrono::milliseconds)>;

  explicit Gateway(ModelEndpoint endpoint,
                   TranscriptWriter* capture = nullptr,
                   std::uint64_t jitter_seed = 0, SleepFn sleep_fn = nullptr)
      : endpoint_(std::move(endpoint)),
        url_(detail::split_base_url(endpoint_.base_url)),
        semaphore_(endpoint_.max_in_flight < 1 ? 1 : endpoint_.max_in_flight),
        capture_(capture),
        jitter_seed_(jitter_seed),
        sleep_fn_(sleep_fn ? std::move(sleep_fn)
                           : [](std::chrono::milliseconds d) {
                               std::this_thread::sleep_for(d);
                             }) {
    if (endpoint_.retry.max_attempts < 1) {
      throw ConfigError("retry.max_attempts must be >= 1");
    }
  }

  const ModelEndpoint& endpoint() const { return endpoint_; }

  Completion complete(const ChatRequest& req) {
    const std::string body = chat_request_body(req, endpoint_.model_id);
    // Jitter stream is deterministic per (gateway seed, chunk id).
    std::uint64_t jstate = jitter_seed_ ^ fnv1a64(req.chunk_id);

    int last_status = 0;
    std::string last_error;
    for (int attempt = 1; attempt <= endpoint_.retry.max_attempts; ++attempt) {
      const auto started = std::chrono::steady_clock::now();
      httplib::Result res = post_once(body);
      const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - started);

      const int status = res ? res->status : 0;
      if (capture_) {
        capture_->append(req.chunk_id, attempt, body, status,
                         res ? res->body : "");
      }

      if (res && status == 200) {
        return parse_completion(req, res->body, attempt,
                                static_cast<std::uint64_t>(latency.count()));
      }
      if (res && status == 400) {
        throw InvalidRequest("endpoint rejected request (HTTP 400): " +
                             res->body);
      }
      if (res && (status == 401 || status == 403)) {
        throw AuthError("authentication failed (HTTP " +
                        std::to_string(status) + ")", status);
      }
      const bool retryable = !res || status == 429 || status >= 500;
      if (!retryable) {
        throw RequestFailed("non-retryable HTTP " + std::to_string(status),
                            status, attempt);
      }
      last_status = status;
      last_error = res ? ("HTTP " + std::to_string(status))
                       : "transport failure";
      if (attempt < endpoint_.retry.max_attempts) {
        // Full jitter: uniform in [0, base * 2^(attempt-1)].
        const std::uint64_t cap =
            static_cast<std::uint64_t>(endpoint_.retry.base_backoff_ms)
            << (attempt - 1);
        const std::uint64_t delay = cap ? splitmix64(jstate) % (cap + 1) : 0;
        sleep_fn_(std::chrono::milliseconds(delay));
      }
    }
    throw RequestFailed("retries exhausted for chunk " + req.chunk_id + ": " +
                        last_error, last_status,
                        endpoint_.retry.max_attempts);
  }

  HealthStatus healthcheck() {
    HealthStatus hs;
    try {
      httplib::Client cli(url_.host);
      configure(cli);
      auto res = cli.Get(url_.prefix + "/models");
      if (!res) return hs;
      hs.reachable = true;
      if (res->status != 200) return hs;
      const auto j = nlohmann::json::parse(res->body, nullptr, false);
      if (j.is_discarded() || !j.contains("data") || !j["data"].is_array()) {
        return hs;
      }
      for (const auto& entry : j["data"]) {
        if (entry.value("id", "") == endpoint_.model_id) {
          hs.model_listed = true;
          break;
        }
      }
    } catch (...) {
      // healthcheck never throws; failures are encoded in the result
    }
    return hs;
  }

 private:
  void configure(httplib::Client& cli) const {
    cli.set_connection_timeout(endpoint_.timeout_s, 0);
    cli.set_read_timeout(endpoint_.timeout_s, 0);
    cli.set_write_timeout(endpoint_.timeout_s, 0);
    if (!endpoint_.api_key_env.empty()) {
      if (const char* key = std::getenv(endpoint_.api_key_env.c_str())) {
        cli.set_default_headers({{"Authorization",
                                  std::string("Bearer ") + key}});
      }
    }
  }

  httplib::Result post_once(const std::string& body) {
    semaphore_.acquire();
    httplib::Client cli(url_.host);
    configure(cli);
    auto res = cli.Post(url_.prefix + "/chat/completions", body,
                        "application/json");
    semaphore_.release();
    return res;
  }

  Completion parse_completion(const ChatRequest& req, const std::string& body,
                              int attempt, std::uint64_t latency_ms) {
    const auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.contains("choices") ||
        !j["choices"].is_array() || j["choices"].empty()) {
      throw RequestFailed("malformed completion response for chunk " +
                          req.chunk_id, 200, attempt);
    }
    const auto& choice = j["choices"][0];
    Completion c;
    c.chunk_id = req.chunk_id;
    c.model_id = endpoint_.model_id;
    c.attempt_count = attempt;
    c.latency_ms = latency_ms;
    c.output_text = choice.contains("message")
                        ? choice["message"].value("content", "")
                        : "";
    c.finish_reason = detail::finish_reason_from_string(
        choice.value("finish_reason", "stop"));
    if (j.contains("usage") && j["usage"].is_object() &&
        j["usage"].contains("prompt_tokens") &&
        j["usage"].contains("completion_tokens")) {
      c.prompt_tokens = j["usage"]["prompt_tokens"].get<std::uint64_t>();
      c.completion_tokens =
          j["usage"]["completion_tokens"].get<std::uint64_t>();
    } else {
      std::uint64_t prompt = 0;
      for (const auto& m : req.messages) prompt += count_ref_tokens(m.content);
      c.prompt_tokens = prompt;
      c.completion_tokens = count_ref_tokens(c.output_text);
      c.usage_estimated = true;
    }
    return c;
  }

  ModelEndpoint endpoint_;
  detail::SplitUrl url_;
  detail::Semaphore semaphore_;
  TranscriptWriter* capture_;
  std::uint64_t jitter_seed_;
  SleepFn sleep_fn_;
};

}  // namespace clinsynth
