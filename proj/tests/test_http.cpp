#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "rmt/llm_http.hpp"

using namespace rmt;

namespace {

struct TestServer {
  httplib::Server svr;
  int port = 0;
  std::thread thread;
  std::atomic<int> flaky_hits{0};
  std::atomic<int> limited_hits{0};
  std::atomic<int> auth_hits{0};
  std::atomic<int> ok_hits{0};
  std::atomic<int> in_flight{0};
  std::atomic<int> max_in_flight{0};
  std::string seen_auth_header;

  TestServer() {
    svr.Post("/ok/completions", [this](const httplib::Request& req, httplib::Response& res) {
      ++ok_hits;
      seen_auth_header = req.get_header_value("Authorization");
      res.set_content(
          R"({"choices":[{"text":" D 3 C 0 B 8 A 8"}],"usage":{"prompt_tokens":12,"completion_tokens":9}})",
          "application/json");
    });
    svr.Post("/flaky/completions", [this](const httplib::Request&, httplib::Response& res) {
      if (++flaky_hits <= 2) {
        res.status = 500;
        return;
      }
      res.set_content(R"({"choices":[{"text":"ok after retries"}]})", "application/json");
    });
    svr.Post("/limited/completions", [this](const httplib::Request&, httplib::Response& res) {
      ++limited_hits;
      res.status = 429;
    });
    svr.Post("/auth/completions", [this](const httplib::Request&, httplib::Response& res) {
      ++auth_hits;
      res.status = 401;
    });
    svr.Post("/ctx/completions", [](const httplib::Request&, httplib::Response& res) {
      res.status = 400;
      res.set_content(R"({"error":{"code":"context_length_exceeded"}})", "application/json");
    });
    svr.Post("/slow/completions", [this](const httplib::Request&, httplib::Response& res) {
      int now = ++in_flight;
      int seen = max_in_flight.load();
      while (now > seen && !max_in_flight.compare_exchange_weak(seen, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(30));
      --in_flight;
      res.set_content(R"({"choices":[{"text":"slow"}]})", "application/json");
    });
    port = svr.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { svr.listen_after_bind(); });
    svr.wait_until_ready();
  }

  ~TestServer() {
    svr.stop();
    thread.join();
  }

  llm::HttpConfig config(const std::string& prefix) const {
    llm::HttpConfig cfg;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + prefix;
    cfg.api_key_env = "RMT_TEST_KEY";
    cfg.max_attempts = 4;
    cfg.initial_backoff = std::chrono::milliseconds(1);
    cfg.requests_per_window = 1000;
    return cfg;
  }
};

prompt::RenderedPrompt tiny_prompt() { return {"Example 1:\nInstruction: jump\nOutput:", "Output:"}; }

}  // namespace

TEST_SUITE("llm_http") {

TEST_CASE("live client request/response cycle") {
  TestServer server;
  setenv("RMT_TEST_KEY", "test-key", 1);

  llm::HttpBackend backend(server.config("/ok"));
  llm::CompletionParams params;
  params.model_name = "some-model";
  auto completion = backend.complete(tiny_prompt(), params);
  CHECK(completion.text == " D 3 C 0 B 8 A 8");
  REQUIRE(completion.prompt_tokens.has_value());
  CHECK(*completion.prompt_tokens == 12);
  CHECK(*completion.completion_tokens == 9);
  CHECK(server.seen_auth_header == "Bearer test-key");
  CHECK(server.ok_hits == 1);
}

TEST_CASE("transient server errors are retried with bounded attempts") {
  TestServer server;
  setenv("RMT_TEST_KEY", "test-key", 1);

  llm::HttpBackend backend(server.config("/flaky"));
  auto completion = backend.complete(tiny_prompt(), {});
  CHECK(completion.text == "ok after retries");
  CHECK(server.flaky_hits == 3);
}

TEST_CASE("persistent rate limiting exhausts into a typed error") {
  TestServer server;
  setenv("RMT_TEST_KEY", "test-key", 1);

  llm::HttpBackend backend(server.config("/limited"));
  try {
    backend.complete(tiny_prompt(), {});
    FAIL("expected BackendError");
  } catch (const llm::BackendError& e) {
    CHECK(e.kind() == llm::BackendErrorKind::RateLimitExhausted);
  }
  CHECK(server.limited_hits == 4);  // max_attempts, no more
}

TEST_CASE("auth failures do not retry") {
  TestServer server;
  setenv("RMT_TEST_KEY", "bad-key", 1);

  llm::HttpBackend backend(server.config("/auth"));
  try {
    backend.complete(tiny_prompt(), {});
    FAIL("expected BackendError");
  } catch (const llm::BackendError& e) {
    CHECK(e.kind() == llm::BackendErrorKind::Auth);
  }
  CHECK(server.auth_hits == 1);
}

TEST_CASE("missing credential fails before any request") {
  TestServer server;
  unsetenv("RMT_TEST_KEY");
  llm::HttpBackend backend(server.config("/ok"));
  try {
    backend.complete(tiny_prompt(), {});
    FAIL("expected BackendError");
  } catch (const llm::BackendError& e) {
    CHECK(e.kind() == llm::BackendErrorKind::Auth);
  }
  CHECK(server.ok_hits == 0);
  setenv("RMT_TEST_KEY", "test-key", 1);
}

TEST_CASE("context length errors are typed and not retried") {
  TestServer server;
  setenv("RMT_TEST_KEY", "test-key", 1);
  llm::HttpBackend backend(server.config("/ctx"));
  try {
    backend.complete(tiny_prompt(), {});
    FAIL("expected BackendError");
  } catch (const llm::BackendError& e) {
    CHECK(e.kind() == llm::BackendErrorKind::ContextLengthExceeded);
  }
}

TEST_CASE("in-flight requests respect the concurrency ceiling") {
  TestServer server;
  setenv("RMT_TEST_KEY", "test-key", 1);
  auto cfg = server.config("/slow");
  cfg.max_concurrency = 2;
  llm::HttpBackend backend(cfg);

  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i)
    threads.emplace_back([&] { backend.complete(tiny_prompt(), {}); });
  for (auto& t : threads) t.join();
  CHECK(server.max_in_flight.load() <= 2);
}

TEST_CASE("request throttle paces a full window") {
  TestServer server;
  setenv("RMT_TEST_KEY", "test-key", 1);
  auto cfg = server.config("/ok");
  cfg.requests_per_window = 2;
  cfg.window = std::chrono::milliseconds(300);
  llm::HttpBackend backend(cfg);

  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 3; ++i) backend.complete(tiny_prompt(), {});
  auto elapsed =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);
  CHECK(elapsed.count() >= 250);  // third call had to wait out the window
}

}  // TEST_SUITE
