#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <variant>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "mora/contexts.hpp"
#include "mora/errors.hpp"
#include "mora/lottery.hpp"

namespace mora {

// A live chat-completion endpoint. The credential is named, never stored:
// auth_env holds the environment variable carrying the API key.
struct BackendId {
  std::string provider;
  std::string model;
  std::string endpoint;
  std::string auth_env;
};

struct CompletionParams {
  double temperature = 1.0;
  int max_output_tokens = 512;
  std::optional<std::int64_t> seed;

  friend bool operator==(const CompletionParams&, const CompletionParams&) = default;
};

struct CompletionResult {
  std::string text;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  bool usage_estimated = false;
  std::int64_t latency_ms = 0;
  int attempt = 1;  // attempts consumed by this call
};

// Identifies one elicitation cell; the replay backend keys on all three
// fields, the synthetic backend derives its per-trial noise stream from them.
struct CallKey {
  std::string model;
  std::string context_id;
  int trial = 0;

  friend auto operator<=>(const CallKey&, const CallKey&) = default;
};

// Ground-truth agent: answers with the CRRA-predicted switch row for the r
// mapped to the bundle's context. With noise_lambda set, each decision gets
// a logit choice draw and the answer is the first sampled B.
struct SyntheticAgentSpec {
  std::string name = "synthetic";
  std::map<std::string, CrraParams> context_r;
  CrraParams default_params{};
  std::optional<double> noise_lambda;
  std::uint64_t rng_seed = 0;
};

struct ReplayConfig {
  std::string model;
  std::string fixture_path;
};

// chars/4 heuristic, used only when a provider reports no usage.
inline std::int64_t estimate_tokens(std::string_view text) {
  return static_cast<std::int64_t>((text.size() + 3) / 4);
}

inline std::int64_t estimate_prompt_tokens(const PromptBundle& bundle) {
  std::int64_t total = 0;
  for (const auto& m : bundle.messages) total += estimate_tokens(m.content) + 4;
  return total;
}

namespace detail {

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view context_id, int trial) {
  std::uint64_t h = fnv1a64(context_id);
  h = fnv1a64(std::to_string(trial), h);
  return h ^ seed;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Rate limiting

struct RateLimitPolicy {
  int max_in_flight = 0;            // 0 = unlimited
  int requests_per_interval = 0;    // 0 = unlimited
  std::chrono::milliseconds interval{0};

  bool unlimited() const { return max_in_flight <= 0 && requests_per_interval <= 0; }
};

// Admission gate shared by all workers hitting one backend. acquire() blocks
// until a slot frees (releases and window expiries wake waiters); shutdown()
// turns every waiting acquire into a CancelledError at the caller.
class RateLimitGate {
 public:
  using Clock = std::chrono::steady_clock;

  explicit RateLimitGate(RateLimitPolicy policy) : policy_(policy) {}

  // Pure admission check against the current book-keeping; callers hold no lock.
  bool would_admit(Clock::time_point now) {
    std::lock_guard lk(mu_);
    return admissible_locked(now);
  }

  void record_admission(Clock::time_point now) {
    std::lock_guard lk(mu_);
    admit_locked(now);
  }

  bool acquire() {
    std::unique_lock lk(mu_);
    for (;;) {
      if (shutdown_) return false;
      const auto now = Clock::now();
      if (admissible_locked(now)) {
        admit_locked(now);
        return true;
      }
      if (window_full_locked(now)) {
        cv_.wait_until(lk, window_.front() + policy_.interval);
      } else {
        cv_.wait(lk);
      }
    }
  }

  void release() {
    {
      std::lock_guard lk(mu_);
      if (in_flight_ > 0) --in_flight_;
    }
    cv_.notify_all();
  }

  void shutdown() {
    {
      std::lock_guard lk(mu_);
      shutdown_ = true;
    }
    cv_.notify_all();
  }

  int in_flight() {
    std::lock_guard lk(mu_);
    return in_flight_;
  }

 private:
  bool window_full_locked(Clock::time_point now) {
    if (policy_.requests_per_interval <= 0) return false;
    while (!window_.empty() && window_.front() + policy_.interval <= now) window_.pop_front();
    return static_cast<int>(window_.size()) >= policy_.requests_per_interval;
  }

  bool admissible_locked(Clock::time_point now) {
    const bool flight_ok = policy_.max_in_flight <= 0 || in_flight_ < policy_.max_in_flight;
    return flight_ok && !window_full_locked(now);
  }

  void admit_locked(Clock::time_point now) {
    ++in_flight_;
    if (policy_.requests_per_interval > 0) window_.push_back(now);
  }

  RateLimitPolicy policy_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Clock::time_point> window_;
  int in_flight_ = 0;
  bool shutdown_ = false;
};

// ---------------------------------------------------------------------------
// Backend interface

class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::string model_name() const = 0;

  // Throws TransportError when a call is unrecoverable and CancelledError
  // when the gate shuts down mid-wait.
  CompletionResult complete(const PromptBundle& bundle, const CompletionParams& params,
                            const CallKey& key) {
    if (gate_) {
      if (!gate_->acquire()) throw CancelledError("backend shut down while waiting for a slot");
      struct Release {
        RateLimitGate* g;
        ~Release() { g->release(); }
      } release{gate_.get()};
      return do_complete(bundle, params, key);
    }
    return do_complete(bundle, params, key);
  }

  void set_rate_limit(RateLimitPolicy policy) {
    if (!policy.unlimited()) gate_ = std::make_unique<RateLimitGate>(policy);
  }

  RateLimitGate* gate() { return gate_.get(); }

  void shutdown() {
    if (gate_) gate_->shutdown();
  }

 protected:
  virtual CompletionResult do_complete(const PromptBundle&, const CompletionParams&,
                                       const CallKey&) = 0;

 private:
  std::unique_ptr<RateLimitGate> gate_;
};

// ---------------------------------------------------------------------------
// Synthetic CRRA agent

class SyntheticBackend : public Backend {
 public:
  explicit SyntheticBackend(SyntheticAgentSpec spec) : spec_(std::move(spec)) {
    if (spec_.noise_lambda && *spec_.noise_lambda < 0.0) {
      throw ConfigError("synthetic noise_lambda must be >= 0");
    }
  }

  std::string model_name() const override { return spec_.name; }

  const SyntheticAgentSpec& spec() const { return spec_; }

 protected:
  CompletionResult do_complete(const PromptBundle& bundle, const CompletionParams&,
                               const CallKey& key) override {
    const CrraParams params = params_for(bundle.context_id);
    int answer;
    if (spec_.noise_lambda && *spec_.noise_lambda > 0.0) {
      answer = sample_switch(params, *spec_.noise_lambda, key);
    } else {
      answer = predicted_switch_point(params).value();
    }

    CompletionResult res;
    res.text = std::to_string(answer);
    res.input_tokens = estimate_prompt_tokens(bundle);
    res.output_tokens = estimate_tokens(res.text);
    res.usage_estimated = true;
    res.latency_ms = 0;
    res.attempt = 1;
    return res;
  }

 private:
  CrraParams params_for(const std::string& context_id) const {
    const auto it = spec_.context_r.find(context_id);
    return it == spec_.context_r.end() ? spec_.default_params : it->second;
  }

  // Per-decision logit choice P(B) = 1 / (1 + exp(-(EU_B - EU_A)/lambda));
  // the answer is the first sampled B. Decision 10 strictly dominates, so a
  // draw with no B at all is recorded as 10 to keep the response in range.
  int sample_switch(const CrraParams& params, double lambda, const CallKey& key) const {
    std::mt19937_64 rng(detail::mix_seed(spec_.rng_seed, key.context_id, key.trial));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (const auto& d : build_task_sheet()) {
      const double diff = expected_utility(d, Option::B, params) -
                          expected_utility(d, Option::A, params);
      const double p_b = 1.0 / (1.0 + std::exp(-diff / lambda));
      if (unif(rng) < p_b) return d.index;
    }
    return 10;
  }

  SyntheticAgentSpec spec_;
};

// ---------------------------------------------------------------------------
// Replay backend

// Fixture-driven completion source. Records are keyed by (model, context,
// trial); repeated calls for one key pop its records in file order, so
// re-asks replay exactly as captured.
class ReplayBackend : public Backend {
 public:
  ReplayBackend(std::string model, const std::string& fixture_path) : model_(std::move(model)) {
    std::ifstream is(fixture_path, std::ios::binary);
    if (!is) throw ConfigError("cannot read replay fixture: " + fixture_path);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw FixtureError(fixture_path + ":" + std::to_string(lineno) + ": " + e.what());
      }
      CallKey key{j.at("model").get<std::string>(), j.at("context_id").get<std::string>(),
                  j.at("trial").get<int>()};
      CompletionResult res;
      res.text = j.at("text").get<std::string>();
      if (j.contains("input_tokens")) {
        res.input_tokens = j.at("input_tokens").get<std::int64_t>();
        res.output_tokens = j.value("output_tokens", std::int64_t{0});
        res.usage_estimated = j.value("usage_estimated", false);
      } else {
        res.output_tokens = estimate_tokens(res.text);
        res.usage_estimated = true;
      }
      res.latency_ms = j.value("latency_ms", std::int64_t{0});
      res.attempt = j.value("attempt", 1);
      records_[key].push_back(std::move(res));
    }
  }

  std::string model_name() const override { return model_; }

 protected:
  CompletionResult do_complete(const PromptBundle& bundle, const CompletionParams&,
                               const CallKey& key) override {
    std::lock_guard lk(mu_);
    const auto it = records_.find(key);
    if (it == records_.end() || it->second.empty()) {
      throw FixtureError("replay fixture has no record for model=" + key.model +
                         " context=" + key.context_id + " trial=" + std::to_string(key.trial));
    }
    CompletionResult res = it->second.front();
    it->second.pop_front();
    if (res.input_tokens == 0 && res.usage_estimated) {
      res.input_tokens = estimate_prompt_tokens(bundle);
    }
    return res;
  }

 private:
  std::string model_;
  std::mutex mu_;
  std::map<CallKey, std::deque<CompletionResult>> records_;
};

// ---------------------------------------------------------------------------
// Live HTTP backend (OpenAI-compatible chat completions)

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{250};
  std::chrono::milliseconds max_delay{4000};
};

class HttpBackend : public Backend {
 public:
  explicit HttpBackend(BackendId id, RetryPolicy retry = {},
                       std::chrono::seconds timeout = std::chrono::seconds(120))
      : id_(std::move(id)), retry_(retry), timeout_(timeout) {}

  std::string model_name() const override { return id_.model; }

  // The exact wire body, kept as a pure function so request serialization can
  // be pinned against golden fixtures.
  static std::string request_body(const std::string& model, const PromptBundle& bundle,
                                  const CompletionParams& params) {
    nlohmann::ordered_json body;
    body["model"] = model;
    auto& messages = body["messages"] = nlohmann::ordered_json::array();
    for (const auto& m : bundle.messages) {
      messages.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
    }
    body["temperature"] = params.temperature;
    body["max_tokens"] = params.max_output_tokens;
    if (params.seed) body["seed"] = *params.seed;
    return body.dump();
  }

  // Splits "https://host:port/path" into the client base and request path.
  static std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
    const auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) {
      throw ConfigError("endpoint must carry a scheme: " + endpoint);
    }
    const auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
  }

 protected:
  CompletionResult do_complete(const PromptBundle& bundle, const CompletionParams& params,
                               const CallKey&) override {
    const char* credential = id_.auth_env.empty() ? nullptr : std::getenv(id_.auth_env.c_str());
    if (id_.auth_env.empty() || credential == nullptr || *credential == '\0') {
      throw ConfigError("credential environment variable not set: " +
                        (id_.auth_env.empty() ? std::string("<unnamed>") : id_.auth_env));
    }

    const auto [base, path] = split_endpoint(id_.endpoint);
    const std::string body = request_body(id_.model, bundle, params);
    const auto started = std::chrono::steady_clock::now();

    std::string last_error;
    for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
      if (attempt > 1) std::this_thread::sleep_for(backoff_delay(attempt));

      httplib::Client client(base);
      client.set_connection_timeout(timeout_);
      client.set_read_timeout(timeout_);
      client.set_write_timeout(timeout_);
      httplib::Headers headers{{"Authorization", std::string("Bearer ") + credential}};

      auto http_res = client.Post(path, headers, body, "application/json");
      if (!http_res) {
        last_error = "connection failure: " + httplib::to_string(http_res.error());
        continue;  // retryable
      }
      if (http_res->status == 429 || http_res->status == 408 || http_res->status >= 500) {
        last_error = "HTTP " + std::to_string(http_res->status);
        continue;  // retryable
      }
      if (http_res->status < 200 || http_res->status >= 300) {
        throw TransportError("HTTP " + std::to_string(http_res->status) + " from " +
                                 id_.endpoint + ": " + http_res->body.substr(0, 200),
                             attempt);
      }

      CompletionResult res = parse_completion(http_res->body, body, attempt);
      res.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - started)
                           .count();
      res.attempt = attempt;
      return res;
    }
    throw TransportError("gave up after " + std::to_string(retry_.max_attempts) +
                             " attempts: " + last_error,
                         retry_.max_attempts);
  }

 private:
  std::chrono::milliseconds backoff_delay(int attempt) const {
    const std::chrono::milliseconds d = retry_.base_delay * (1 << (attempt - 2));
    return d > retry_.max_delay ? retry_.max_delay : d;
  }

  CompletionResult parse_completion(const std::string& response_body,
                                    const std::string& request_body, int attempt) const {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(response_body);
      CompletionResult res;
      res.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
      if (j.contains("usage") && j["usage"].contains("prompt_tokens")) {
        res.input_tokens = j["usage"]["prompt_tokens"].get<std::int64_t>();
        res.output_tokens = j["usage"].value("completion_tokens", std::int64_t{0});
        res.usage_estimated = false;
      } else {
        res.input_tokens = estimate_tokens(request_body);
        res.output_tokens = estimate_tokens(res.text);
        res.usage_estimated = true;
      }
      return res;
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("malformed completion response: ") + e.what(), attempt);
    }
  }

  BackendId id_;
  RetryPolicy retry_;
  std::chrono::seconds timeout_;
};

}  // namespace mora
