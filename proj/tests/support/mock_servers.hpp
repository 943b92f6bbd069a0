#pragma once

#include <atomic>
#include <chrono>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

// Eigen before httplib: resolver headers define a clashing macro.
#include "encassist/encoder.hpp"
#include "encassist/jsonl.hpp"
#include "encassist/label.hpp"

#include <httplib.h>

namespace encassist::testing {

/// httplib server on an ephemeral loopback port, served from a background
/// thread for the lifetime of the object.
class LoopbackServer {
 public:
  LoopbackServer();
  virtual ~LoopbackServer();
  LoopbackServer(const LoopbackServer&) = delete;
  LoopbackServer& operator=(const LoopbackServer&) = delete;

  int port() const noexcept { return port_; }
  std::string origin() const { return "http://127.0.0.1:" + std::to_string(port_); }

 protected:
  /// Binds and starts serving; call once routes are registered.
  void start();
  httplib::Server server_;

 private:
  int port_ = -1;
  std::thread thread_;
};

struct ScriptedFailure {
  int status = 500;
  std::optional<std::string> retry_after;
};

/// Tracks concurrent handlers and queued failures shared by the mocks.
class RequestLedger {
 public:
  void push_failures(int count, ScriptedFailure failure);
  std::optional<ScriptedFailure> pop_failure();
  std::uint64_t requests() const noexcept { return requests_.load(); }
  int max_in_flight() const noexcept { return max_in_flight_.load(); }

  struct Scope {
    RequestLedger& ledger;
    explicit Scope(RequestLedger& l);
    ~Scope();
  };

 private:
  std::mutex mutex_;
  std::deque<ScriptedFailure> failures_;
  std::atomic<std::uint64_t> requests_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
};

/// Maps a chat-completions request body to the assistant's reply text.
using ChatPolicy = std::function<std::string(const json& request)>;

/// Value of the last "Classifier Decision:" line in the user message, or
/// "neutral" when there is none.
std::string classifier_decision(const json& request);

/// Replies with the classifier decision from the prompt.
ChatPolicy echo_policy();

/// Replies with the given label for reviews whose text (the "Review:" line,
/// or the whole message for bare prompts) is in `answers`, echoing otherwise.
ChatPolicy corrector_policy(std::map<std::string, Label> answers);

/// Text after the last "Review: " up to the end of that line, or the whole
/// user message if the prompt has no such field.
std::string review_text(const json& request);

/// OpenAI-compatible POST {prefix}/chat/completions.
class MockChatServer : public LoopbackServer {
 public:
  explicit MockChatServer(ChatPolicy policy, std::string prefix = "/v1");

  std::string base_url() const { return origin() + prefix_; }
  RequestLedger& ledger() noexcept { return ledger_; }
  void set_delay(std::chrono::milliseconds delay) { delay_ms_ = delay.count(); }
  json last_request() const;
  std::string last_authorization() const;

 private:
  ChatPolicy policy_;
  std::string prefix_;
  RequestLedger ledger_;
  std::atomic<long long> delay_ms_{0};
  mutable std::mutex last_mutex_;
  json last_request_;
  std::string last_authorization_;
};

/// Encoder service speaking POST /predict and GET /health, backed by any
/// EncoderBackend.
class MockEncoderServer : public LoopbackServer {
 public:
  MockEncoderServer(std::shared_ptr<const EncoderBackend> backend, long declared_dim,
                    std::string model = "mock-encoder");

  std::string base_url() const { return origin(); }
  RequestLedger& ledger() noexcept { return ledger_; }
  /// Every /predict returns this status and body from now on.
  void set_fixed_response(int status, std::string body);

 private:
  std::shared_ptr<const EncoderBackend> backend_;
  long declared_dim_;
  std::string model_;
  RequestLedger ledger_;
  std::mutex fixed_mutex_;
  std::optional<std::pair<int, std::string>> fixed_;
};

}  // namespace encassist::testing
