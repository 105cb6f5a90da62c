// llm_http.hpp -- live backend for OpenAI-compatible completions endpoints.
//
// POSTs {base_url}/completions with the standard JSON body, reads the
// credential from an environment variable, retries transient failures with
// exponential backoff, and keeps both an in-flight ceiling and a
// requests-per-window throttle.  Kept out of llm.hpp so that only the CLI
// and the HTTP tests pay for compiling httplib.

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <mutex>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "rmt/llm.hpp"

namespace rmt::llm {

struct HttpConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key_env = "OPENAI_API_KEY";
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{500};
  int max_concurrency = 4;
  int requests_per_window = 60;
  std::chrono::milliseconds window{60'000};  // one minute
};

namespace detail {

struct SplitUrl {
  std::string host;  // scheme://host[:port]
  std::string path_prefix;
};

inline SplitUrl split_base_url(const std::string& url) {
  auto scheme_end = url.find("://");
  std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto path_start = url.find('/', host_start);
  if (path_start == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_start), prefix};
}

}  // namespace detail

class HttpBackend : public CompletionBackend {
 public:
  explicit HttpBackend(HttpConfig cfg)
      : cfg_(std::move(cfg)), url_(detail::split_base_url(cfg_.base_url)) {}

  Completion complete(const prompt::RenderedPrompt& p, const CompletionParams& params) override {
    const char* key = std::getenv(cfg_.api_key_env.c_str());
    if (!key || !*key)
      throw BackendError(BackendErrorKind::Auth,
                         "no API credential in $" + cfg_.api_key_env);

    nlohmann::json body{{"model", params.model_name},
                        {"prompt", p.text},
                        {"max_tokens", params.max_tokens},
                        {"temperature", params.temperature}};
    if (!params.stop.empty()) body["stop"] = params.stop;
    const std::string payload = body.dump();

    Slot slot = gate_acquire();
    auto started = std::chrono::steady_clock::now();
    std::string last_error;
    bool rate_limited = false;

    for (int attempt = 0; attempt < cfg_.max_attempts; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(cfg_.initial_backoff * (1 << (attempt - 1)));
      throttle_wait();

      httplib::Client client(url_.host);
      client.set_connection_timeout(30);
      client.set_read_timeout(120);
      httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};
      auto res = client.Post(url_.path_prefix + "/completions", headers, payload,
                             "application/json");
      if (!res) {
        last_error = "transport: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 401 || res->status == 403)
        throw BackendError(BackendErrorKind::Auth, "endpoint rejected the credential (" +
                                                       std::to_string(res->status) + ")");
      if (res->status == 429) {
        rate_limited = true;
        last_error = "rate limited (429)";
        continue;
      }
      if (res->status >= 500) {
        last_error = "server error (" + std::to_string(res->status) + ")";
        continue;
      }
      if (res->status == 400 && res->body.find("context_length") != std::string::npos)
        throw BackendError(BackendErrorKind::ContextLengthExceeded, res->body);
      if (res->status != 200)
        throw BackendError(BackendErrorKind::Transport,
                           "unexpected status " + std::to_string(res->status) + ": " + res->body);

      auto j = nlohmann::json::parse(res->body, nullptr, false);
      if (j.is_discarded() || !j.contains("choices") || j["choices"].empty())
        throw BackendError(BackendErrorKind::Transport, "malformed response body");
      Completion c;
      c.text = j["choices"][0].value("text", std::string{});
      if (j.contains("usage")) {
        const auto& u = j["usage"];
        if (u.contains("prompt_tokens")) c.prompt_tokens = u["prompt_tokens"].get<int>();
        if (u.contains("completion_tokens"))
          c.completion_tokens = u["completion_tokens"].get<int>();
      }
      c.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - started);
      c.backend_id = id();
      return c;
    }
    if (rate_limited)
      throw BackendError(BackendErrorKind::RateLimitExhausted,
                         "rate limit persisted across " + std::to_string(cfg_.max_attempts) +
                             " attempts");
    throw BackendError(BackendErrorKind::Transport,
                       last_error + " after " + std::to_string(cfg_.max_attempts) + " attempts");
  }

  std::string id() const override { return "http:" + url_.host; }

 private:
  // RAII in-flight ceiling.
  struct Slot {
    HttpBackend* owner;
    ~Slot() {
      if (!owner) return;
      std::lock_guard lock(owner->gate_mutex_);
      --owner->in_flight_;
      owner->gate_cv_.notify_one();
    }
    Slot(Slot&& other) noexcept : owner(other.owner) { other.owner = nullptr; }
    explicit Slot(HttpBackend* o) : owner(o) {}
    Slot(const Slot&) = delete;
  };

  Slot gate_acquire() {
    std::unique_lock lock(gate_mutex_);
    gate_cv_.wait(lock, [&] { return in_flight_ < cfg_.max_concurrency; });
    ++in_flight_;
    return Slot(this);
  }

  void throttle_wait() {
    using clock = std::chrono::steady_clock;
    for (;;) {
      clock::time_point wake;
      {
        std::lock_guard lock(throttle_mutex_);
        auto now = clock::now();
        while (!stamps_.empty() && now - stamps_.front() >= cfg_.window) stamps_.pop_front();
        if (static_cast<int>(stamps_.size()) < cfg_.requests_per_window) {
          stamps_.push_back(now);
          return;
        }
        wake = stamps_.front() + cfg_.window;
      }
      std::this_thread::sleep_until(wake);
    }
  }

  HttpConfig cfg_;
  detail::SplitUrl url_;
  std::mutex gate_mutex_;
  std::condition_variable gate_cv_;
  int in_flight_ = 0;
  std::mutex throttle_mutex_;
  std::deque<std::chrono::steady_clock::time_point> stamps_;
};

}  // namespace rmt::llm
