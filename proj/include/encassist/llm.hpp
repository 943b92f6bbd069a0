#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <unordered_map>

namespace encassist {

struct ChatRequest {
  std::string model;
  std::string system;
  std::string user;
  double temperature = 0.0;
  std::optional<std::int64_t> seed;
  int max_output_tokens = 8;
};

/// Throws ConfigError for an empty model, temperature outside [0, 2] or a
/// non-positive token limit.
void validate(const ChatRequest& request);

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

struct ChatResponse {
  std::string text;
  Usage usage;
  bool cached = false;
};

/// Hex SHA-256 over a length-prefixed encoding of model, system, user,
/// temperature (shortest round-trip form) and seed.
std::string cache_key(const ChatRequest& request);

struct RetryPolicy {
  /// Total attempts including the first.
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{30'000};
};

struct ChatClientOptions {
  /// e.g. "https://api.openai.com/v1"; requests go to {base_url}/chat/completions.
  std::string base_url;
  std::string api_key;
  int max_in_flight = 8;
  RetryPolicy retry;
  std::chrono::milliseconds timeout{60'000};
  /// Empty disables the on-disk cache; the in-memory cache is always on.
  std::filesystem::path cache_dir;
};

/// Reads OPENAI_BASE_URL / OPENAI_API_KEY; base URL defaults to the OpenAI API.
ChatClientOptions options_from_env();

/// Thread-safe chat-completions client with a content-addressed cache.
class ChatClient {
 public:
  explicit ChatClient(ChatClientOptions options);
  ~ChatClient();
  ChatClient(const ChatClient&) = delete;
  ChatClient& operator=(const ChatClient&) = delete;

  ChatResponse complete(const ChatRequest& request);

  /// Requests that reached the network (cache misses), including retries.
  std::uint64_t network_calls() const noexcept { return network_calls_.load(); }
  const ChatClientOptions& options() const noexcept { return options_; }

 private:
  std::optional<ChatResponse> lookup(const std::string& key);
  void store(const std::string& key, const ChatRequest& request, const ChatResponse& response);
  ChatResponse send(const ChatRequest& request);

  ChatClientOptions options_;
  std::string scheme_host_;
  std::string path_prefix_;
  std::unique_ptr<std::counting_semaphore<>> in_flight_;
  std::mutex cache_mutex_;
  std::unordered_map<std::string, ChatResponse> memory_cache_;
  std::atomic<std::uint64_t> network_calls_{0};
};

/// Splits "http://host:port/prefix" into ("http://host:port", "/prefix").
std::pair<std::string, std::string> split_base_url(const std::string& url);

}  // namespace encassist
