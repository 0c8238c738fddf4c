#include <doctest.h>

#include <atomic>
#include <chrono>
#include <string>
#include <thread>
#include <vector>

#include "clinsynth/gateway.hpp"
#include "clinsynth/prompts.hpp"
#include "support/mock_server.hpp"

using clinsynth::ChatRequest;
using clinsynth::Completion;
using clinsynth::Gateway;
using clinsynth::ModelEndpoint;

namespace {

ChatRequest simple_request(const std::string& chunk_id,
                           const std::string& text) {
  clinsynth::PromptRegistry reg;
  clinsynth::Chunk chunk;
  chunk.chunk_id = chunk_id;
  chunk.text = text;
  return render_request(reg.get("P1"), chunk, clinsynth::DecodingParams{});
}

ModelEndpoint endpoint_for(const mock_llm::Server& srv,
                           const std::string& model = "mock-model") {
  ModelEndpoint ep;
  ep.model_id = model;
  ep.base_url = srv.base_url();
  ep.max_in_flight = 8;
  ep.timeout_s = 5;
  ep.retry = {5, 1};
  return ep;
}

const Gateway::SleepFn kNoSleep = [](std::chrono::milliseconds) {};

}  // namespace

TEST_CASE("successful completion passes usage through") {
  mock_llm::Server srv;
  srv.start();
  Gateway gw(endpoint_for(srv), nullptr, 0, kNoSleep);
  const auto req = simple_request("n:0", "Pt stable overnight.");
  const Completion c = gw.complete(req);
  CHECK(c.chunk_id == "n:0");
  CHECK(c.output_text == "Pt stable overnight.");
  CHECK(c.attempt_count == 1);
  CHECK(c.finish_reason == clinsynth::FinishReason::stop);
  CHECK_FALSE(c.usage_estimated);
  CHECK(c.completion_tokens == clinsynth::count_ref_tokens(c.output_text));
  CHECK(c.prompt_tokens > 0);
}

TEST_CASE("missing usage falls back to estimated reference counts") {
  mock_llm::Server::Options opt;
  opt.include_usage = false;
  mock_llm::Server srv(opt);
  srv.start();
  Gateway gw(endpoint_for(srv), nullptr, 0, kNoSleep);
  const Completion c = gw.complete(simple_request("n:1", "Afebrile."));
  CHECK(c.usage_estimated);
  CHECK(c.completion_tokens == clinsynth::count_ref_tokens("Afebrile."));
}

TEST_CASE("429s are retried until success") {
  mock_llm::Server::Options opt;
  opt.fault = [](std::uint64_t, int attempt) {
    return attempt <= 2 ? 429 : 200;
  };
  mock_llm::Server srv(opt);
  srv.start();
  auto ep = endpoint_for(srv);
  ep.retry = {3, 1};
  Gateway gw(ep, nullptr, 0, kNoSleep);
  const Completion c = gw.complete(simple_request("n:2", "Stable."));
  CHECK(c.attempt_count == 3);
  CHECK(srv.total_requests() == 3);
}

TEST_CASE("persistent 500 exhausts retries after exactly max_attempts") {
  mock_llm::Server::Options opt;
  opt.fault = [](std::uint64_t, int) { return 500; };
  mock_llm::Server srv(opt);
  srv.start();
  auto ep = endpoint_for(srv);
  ep.retry = {2, 1};
  Gateway gw(ep, nullptr, 0, kNoSleep);
  try {
    gw.complete(simple_request("n:3", "Text."));
    FAIL("expected RequestFailed");
  } catch (const clinsynth::RequestFailed& e) {
    CHECK(e.status == 500);
    CHECK(e.attempts == 2);
  }
  CHECK(srv.total_requests() == 2);
}

TEST_CASE("400 and 401 are not retried") {
  mock_llm::Server::Options opt;
  opt.fault = [](std::uint64_t logical, int) {
    return logical == 0 ? 400 : 401;
  };
  mock_llm::Server srv(opt);
  srv.start();
  Gateway gw(endpoint_for(srv), nullptr, 0, kNoSleep);
  CHECK_THROWS_AS(gw.complete(simple_request("n:4", "Bad.")),
                  clinsynth::InvalidRequest);
  CHECK_THROWS_AS(gw.complete(simple_request("n:5", "Auth.")),
                  clinsynth::AuthError);
  CHECK(srv.total_requests() == 2);
}

TEST_CASE("unreachable endpoint raises RequestFailed with transport status") {
  ModelEndpoint ep;
  ep.model_id = "m";
  ep.base_url = "http://127.0.0.1:1";  // nothing listens there
  ep.timeout_s = 1;
  ep.retry = {2, 1};
  Gateway gw(ep, nullptr, 0, kNoSleep);
  try {
    gw.complete(simple_request("n:6", "x"));
    FAIL("expected RequestFailed");
  } catch (const clinsynth::RequestFailed& e) {
    CHECK(e.status == 0);
    CHECK(e.attempts == 2);
  }
}

TEST_CASE("request bodies are byte-identical and match the golden file") {
  mock_llm::Server srv;
  srv.start();
  auto ep = endpoint_for(srv, "llama-3.1-8b-instruct");
  Gateway gw(ep, nullptr, 0, kNoSleep);

  clinsynth::PromptRegistry reg;
  clinsynth::Chunk chunk;
  chunk.chunk_id = "g:0";
  chunk.text = "Pt stable.";
  clinsynth::DecodingParams dec;
  dec.seed = 42;
  const auto req = render_request(reg.get("P1"), chunk, dec);
  gw.complete(req);
  gw.complete(req);

  const auto bodies = srv.bodies();
  REQUIRE(bodies.size() == 2);
  CHECK(bodies[0] == bodies[1]);

  std::string golden = clinsynth::read_file(
      std::string(CLINSYNTH_TEST_DIR) + "/golden/chat_request_p1.json");
  if (!golden.empty() && golden.back() == '\n') golden.pop_back();
  CHECK(bodies[0] == golden);
}

TEST_CASE("second golden body: P2, no seed, custom decoding") {
  mock_llm::Server srv;
  srv.start();
  auto ep = endpoint_for(srv, "qwen-2-7b-instruct");
  Gateway gw(ep, nullptr, 0, kNoSleep);

  clinsynth::PromptRegistry reg;
  clinsynth::Chunk chunk;
  chunk.chunk_id = "g:1";
  chunk.text = "Admission Date: ___ Discharge Date: ___";
  clinsynth::DecodingParams dec;
  dec.temperature = 0.2;
  dec.top_p = 0.9;
  dec.max_new_tokens = 512;
  gw.complete(render_request(reg.get("P2"), chunk, dec));

  std::string golden = clinsynth::read_file(
      std::string(CLINSYNTH_TEST_DIR) + "/golden/chat_request_p2.json");
  if (!golden.empty() && golden.back() == '\n') golden.pop_back();
  CHECK(srv.bodies().at(0) == golden);
}

TEST_CASE("in-flight concurrency never exceeds max_in_flight") {
  mock_llm::Server::Options opt;
  opt.handler_delay_ms = 8;
  mock_llm::Server srv(opt);
  srv.start();
  auto ep = endpoint_for(srv);
  ep.max_in_flight = 3;
  Gateway gw(ep, nullptr, 0, kNoSleep);

  std::vector<std::thread> threads;
  std::atomic<int> ok{0};
  for (int i = 0; i < 12; ++i) {
    threads.emplace_back([&, i] {
      const auto c = gw.complete(
          simple_request("c:" + std::to_string(i), "Body " +
                         std::to_string(i)));
      if (!c.output_text.empty()) ++ok;
    });
  }
  for (auto& t : threads) t.join();
  CHECK(ok == 12);
  CHECK(srv.max_in_flight() <= 3);
}

TEST_CASE("backoff delays honour the exponential cap schedule") {
  mock_llm::Server::Options opt;
  opt.fault = [](std::uint64_t, int attempt) {
    return attempt <= 3 ? 429 : 200;
  };
  mock_llm::Server srv(opt);
  srv.start();
  auto ep = endpoint_for(srv);
  ep.retry = {4, 100};
  std::vector<std::uint64_t> delays;
  Gateway gw(ep, nullptr, 7,
             [&](std::chrono::milliseconds d) {
               delays.push_back(static_cast<std::uint64_t>(d.count()));
             });
  gw.complete(simple_request("n:7", "x"));
  REQUIRE(delays.size() == 3);
  for (std::size_t i = 0; i < delays.size(); ++i) {
    CHECK(delays[i] <= (100ULL << i));  // full jitter within the cap
  }
}

TEST_CASE("healthcheck reports reachability and model listing") {
  mock_llm::Server srv;
  srv.start();
  Gateway ok(endpoint_for(srv));
  const auto h1 = ok.healthcheck();
  CHECK(h1.reachable);
  CHECK(h1.model_listed);

  Gateway wrong_model(endpoint_for(srv, "other-model"));
  const auto h2 = wrong_model.healthcheck();
  CHECK(h2.reachable);
  CHECK_FALSE(h2.model_listed);

  ModelEndpoint dead;
  dead.model_id = "m";
  dead.base_url = "http://127.0.0.1:1";
  dead.timeout_s = 1;
  Gateway unreachable(dead);
  const auto h3 = unreachable.healthcheck();
  CHECK_FALSE(h3.reachable);
  CHECK_FALSE(h3.model_listed);
}

TEST_CASE("api key env is sent as bearer header when set") {
  // The mock does not check auth; this only exercises resolution. A bad env
  // name silently sends no header.
  mock_llm::Server srv;
  srv.start();
  setenv("CLINSYNTH_TEST_KEY", "sk-123", 1);
  auto ep = endpoint_for(srv);
  ep.api_key_env = "CLINSYNTH_TEST_KEY";
  Gateway gw(ep, nullptr, 0, kNoSleep);
  CHECK(gw.complete(simple_request("n:8", "x")).attempt_count == 1);
  unsetenv("CLINSYNTH_TEST_KEY");
}
