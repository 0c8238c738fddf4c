// clinsynth-mockllm: a tiny OpenAI-compatible chat-completions server that
// "rephrases" deterministically (whitespace normalization, optional
// boilerplate opener). Lets the pipeline run end-to-end on a laptop with no
// credentials or GPU; useful for demos and smoke tests.

#include <csignal>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "clinsynth/tokenizer.hpp"

namespace {

std::string normalize_ws(const std::string& text) {
  std::string out;
  bool ws = false;
  for (char c : text) {
    if (c == ' ' || c == '\n' || c == '\t' || c == '\r') {
      ws = true;
      continue;
    }
    if (ws && !out.empty()) out += ' ';
    ws = false;
    out += c;
  }
  return out;
}

httplib::Server* g_server = nullptr;

void handle_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic mock LLM endpoint (OpenAI chat-completions)"};
  int port = 8080;
  std::string model_id = "mock-model";
  bool boilerplate = false;
  app.add_option("--port", port, "Listen port (default 8080)");
  app.add_option("--model", model_id, "Model id reported by /v1/models");
  app.add_flag("--boilerplate", boilerplate,
               "Prepend a llama-style boilerplate line to every completion");
  CLI11_PARSE(app, argc, argv);

  httplib::Server srv;
  g_server = &srv;
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);

  srv.Get("/v1/models", [&](const httplib::Request&, httplib::Response& res) {
    nlohmann::json j{{"object", "list"}, {"data", {{{"id", model_id}}}}};
    res.set_content(j.dump(), "application/json");
  });

  srv.Post("/v1/chat/completions", [&](const httplib::Request& req,
                                       httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("messages") ||
        body["messages"].empty()) {
      res.status = 400;
      res.set_content(R"({"error":"malformed request"})", "application/json");
      return;
    }
    std::string user;
    std::uint64_t prompt_tokens = 0;
    for (const auto& m : body["messages"]) {
      const std::string content = m.value("content", "");
      prompt_tokens += clinsynth::count_ref_tokens(content);
      if (m.value("role", "") == "user") user = content;
    }
    const auto sep = user.find("\n\n");
    std::string content =
        normalize_ws(sep == std::string::npos ? user : user.substr(sep + 2));
    if (boilerplate) {
      content =
          "Here is a diverse paraphrase of the provided paragraph in "
          "high-quality English language, formatted as per Wikipedia "
          "standards:\n\n" +
          content;
    }
    nlohmann::json out{
        {"choices",
         {{{"message", {{"role", "assistant"}, {"content", content}}},
           {"finish_reason", "stop"}}}},
        {"usage",
         {{"prompt_tokens", prompt_tokens},
          {"completion_tokens", clinsynth::count_ref_tokens(content)}}}};
    res.set_content(out.dump(), "application/json");
  });

  std::cout << "mock LLM '" << model_id << "' listening on 127.0.0.1:" << port
            << " (base url http://127.0.0.1:" << port << "/v1)\n";
  if (!srv.listen("127.0.0.1", port)) {
    std::cerr << "failed to bind port " << port << "\n";
    return 1;
  }
  return 0;
}
