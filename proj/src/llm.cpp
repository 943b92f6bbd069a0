#include "encassist/llm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <openssl/evp.h>

#include "encassist/error.hpp"
#include "encassist/jsonl.hpp"
#include "encassist/numfmt.hpp"

namespace encassist {

void validate(const ChatRequest& request) {
  if (request.model.empty()) throw ConfigError("chat request: model is empty");
  if (!(request.temperature >= 0.0 && request.temperature <= 2.0)) {
    throw ConfigError("chat request: temperature " + shortest(request.temperature) +
                      " outside [0, 2]");
  }
  if (request.max_output_tokens < 1) {
    throw ConfigError("chat request: max_output_tokens must be positive");
  }
}

namespace {

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    hex.push_back(kHex[digest[i] >> 4]);
    hex.push_back(kHex[digest[i] & 0x0f]);
  }
  return hex;
}

void append_field(std::string& out, std::string_view name, std::string_view value) {
  out += name;
  out += ':';
  out += std::to_string(value.size());
  out += ':';
  out += value;
  out += '\n';
}

}  // namespace

std::string cache_key(const ChatRequest& request) {
  std::string canonical = "chat-v1\n";
  append_field(canonical, "model", request.model);
  append_field(canonical, "system", request.system);
  append_field(canonical, "user", request.user);
  append_field(canonical, "temperature", shortest(request.temperature));
  append_field(canonical, "seed", request.seed ? std::to_string(*request.seed) : "none");
  return sha256_hex(canonical);
}

std::pair<std::string, std::string> split_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("base URL \"" + url + "\" lacks a scheme");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_start), prefix};
}

ChatClientOptions options_from_env() {
  ChatClientOptions options;
  const char* base = std::getenv("OPENAI_BASE_URL");
  options.base_url = base ? base : "https://api.openai.com/v1";
  if (const char* key = std::getenv("OPENAI_API_KEY")) options.api_key = key;
  return options;
}

ChatClient::ChatClient(ChatClientOptions options)
    : options_(std::move(options)),
      in_flight_(std::make_unique<std::counting_semaphore<>>(std::max(1, options_.max_in_flight))) {
  if (options_.retry.max_attempts < 1) throw ConfigError("retry policy needs >= 1 attempt");
  std::tie(scheme_host_, path_prefix_) = split_base_url(options_.base_url);
  if (!options_.cache_dir.empty()) std::filesystem::create_directories(options_.cache_dir);
}

ChatClient::~ChatClient() = default;

std::optional<ChatResponse> ChatClient::lookup(const std::string& key) {
  {
    std::lock_guard lock(cache_mutex_);
    if (const auto it = memory_cache_.find(key); it != memory_cache_.end()) return it->second;
  }
  if (options_.cache_dir.empty()) return std::nullopt;
  const auto path = options_.cache_dir / key.substr(0, 2) / (key + ".json");
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  try {
    const json record = json::parse(read_file(path));
    if (record.value("key", "") != key) return std::nullopt;
    ChatResponse response;
    response.text = record.at("text").get<std::string>();
    response.usage.prompt_tokens = record.at("usage").at("prompt_tokens").get<std::int64_t>();
    response.usage.completion_tokens =
        record.at("usage").at("completion_tokens").get<std::int64_t>();
    std::lock_guard lock(cache_mutex_);
    memory_cache_.emplace(key, response);
    return response;
  } catch (const std::exception&) {
    // A torn or foreign file is treated as a miss and overwritten.
    return std::nullopt;
  }
}

void ChatClient::store(const std::string& key, const ChatRequest& request,
                       const ChatResponse& response) {
  {
    std::lock_guard lock(cache_mutex_);
    memory_cache_[key] = response;
  }
  if (options_.cache_dir.empty()) return;
  const json record = {
      {"key", key},
      {"model", request.model},
      {"system", request.system},
      {"user", request.user},
      {"temperature", request.temperature},
      {"seed", request.seed ? json(*request.seed) : json(nullptr)},
      {"text", response.text},
      {"usage",
       {{"prompt_tokens", response.usage.prompt_tokens},
        {"completion_tokens", response.usage.completion_tokens}}}};
  write_file_atomic(options_.cache_dir / key.substr(0, 2) / (key + ".json"), record.dump(2) + "\n");
}

ChatResponse ChatClient::complete(const ChatRequest& request) {
  validate(request);
  const std::string key = cache_key(request);
  if (auto hit = lookup(key)) {
    hit->cached = true;
    return *hit;
  }
  ChatResponse response = send(request);
  store(key, request, response);
  return response;
}

namespace {

ChatResponse parse_completion(const std::string& body) {
  const json document = json::parse(body);
  ChatResponse response;
  const auto& content = document.at("choices").at(0).at("message").at("content");
  response.text = content.is_string() ? content.get<std::string>() : std::string{};
  if (const auto usage = document.find("usage"); usage != document.end() && usage->is_object()) {
    response.usage.prompt_tokens = usage->value("prompt_tokens", std::int64_t{0});
    response.usage.completion_tokens = usage->value("completion_tokens", std::int64_t{0});
  }
  return response;
}

std::optional<std::chrono::milliseconds> retry_after(const httplib::Response& response) {
  if (!response.has_header("Retry-After")) return std::nullopt;
  char* end = nullptr;
  const std::string value = response.get_header_value("Retry-After");
  const double seconds = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || !std::isfinite(seconds) || seconds < 0) return std::nullopt;
  return std::chrono::milliseconds(static_cast<long long>(seconds * 1000.0));
}

}  // namespace

ChatResponse ChatClient::send(const ChatRequest& request) {
  json body = {{"model", request.model},
               {"messages",
                json::array({{{"role", "system"}, {"content", request.system}},
                             {{"role", "user"}, {"content", request.user}}})},
               {"temperature", request.temperature},
               {"max_tokens", request.max_output_tokens}};
  if (request.seed) body["seed"] = *request.seed;
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);

  const auto& policy = options_.retry;
  auto backoff = policy.initial_backoff;
  std::string last_error;
  int attempt = 0;
  while (attempt < policy.max_attempts) {
    ++attempt;
    std::optional<std::chrono::milliseconds> server_delay;
    {
      in_flight_->acquire();
      struct Release {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
      } release{*in_flight_};

      httplib::Client client(scheme_host_);
      client.set_connection_timeout(options_.timeout);
      client.set_read_timeout(options_.timeout);
      client.set_write_timeout(options_.timeout);
      ++network_calls_;
      auto result = client.Post(path_prefix_ + "/chat/completions", headers, payload,
                                "application/json");
      if (!result) {
        last_error = "transport error: " + httplib::to_string(result.error());
      } else if (result->status == 200) {
        try {
          return parse_completion(result->body);
        } catch (const json::exception& e) {
          throw RequestError(std::string("malformed chat completion: ") + e.what(), 200);
        }
      } else if (result->status == 429 || result->status >= 500) {
        last_error = "status " + std::to_string(result->status);
        server_delay = retry_after(*result);
      } else {
        throw RequestError("chat endpoint returned status " + std::to_string(result->status) +
                               ": " + result->body.substr(0, 200),
                           result->status);
      }
    }
    if (attempt < policy.max_attempts) {
      auto delay = server_delay ? std::min(*server_delay, policy.max_backoff) : backoff;
      std::this_thread::sleep_for(delay);
      backoff = std::min(policy.max_backoff,
                         std::chrono::milliseconds(static_cast<long long>(
                             static_cast<double>(backoff.count()) * policy.multiplier)));
    }
  }
  throw TransportError("chat endpoint: " + last_error + " after " + std::to_string(attempt) +
                           " attempt(s)",
                       attempt);
}

}  // namespace encassist
