#include <gtest/gtest.h>

#include <thread>

#include "encassist/error.hpp"
#include "encassist/llm.hpp"
#include "fixtures.hpp"
#include "mock_servers.hpp"

using namespace encassist;
using encassist::testing::MockChatServer;

namespace {

ChatRequest request(std::string user = "hi") {
  ChatRequest r;
  r.model = "gpt-4o-mini";
  r.system = "sys";
  r.user = std::move(user);
  r.temperature = 0.0;
  r.seed = 42;
  return r;
}

ChatClientOptions fast(const std::string& url) {
  ChatClientOptions options;
  options.base_url = url;
  options.api_key = "sk-test";
  options.retry.initial_backoff = std::chrono::milliseconds(1);
  options.retry.max_backoff = std::chrono::milliseconds(20);
  options.timeout = std::chrono::milliseconds(5000);
  return options;
}

}  // namespace

TEST(CacheKey, KnownAnswers) {
  // Expected digests computed independently over the documented encoding.
  EXPECT_EQ(cache_key(request()), "f53a1bb635742fb250d2ceae74110b83d11f1a6027c840fcf08bebf53cd4392e");
  auto r = request();
  r.temperature = 0.1;
  r.seed.reset();
  EXPECT_EQ(cache_key(r), "8accc1d4d1989dcf6c0c1e0a0c0b16e3b9b5a190e994a0ceb89ecbb719a74ad6");
}

TEST(CacheKey, SensitiveToEveryField) {
  const std::string base = cache_key(request());
  auto r = request();
  r.model = "gpt-4o";
  EXPECT_NE(cache_key(r), base);
  r = request();
  r.system = "sys2";
  EXPECT_NE(cache_key(r), base);
  r = request("hi!");
  EXPECT_NE(cache_key(r), base);
  r = request();
  r.temperature = 0.1;
  EXPECT_NE(cache_key(r), base);
  r = request();
  r.seed = 123;
  EXPECT_NE(cache_key(r), base);
  r = request();
  r.seed.reset();
  EXPECT_NE(cache_key(r), base);
  r = request();
  r.max_output_tokens = 16;
  EXPECT_EQ(cache_key(r), base);
}

TEST(CacheKey, FieldBoundariesAreUnambiguous) {
  auto a = request();
  a.system = "ab";
  a.user = "c";
  auto b = request();
  b.system = "a";
  b.user = "bc";
  EXPECT_NE(cache_key(a), cache_key(b));
}

TEST(ChatRequestValidation, Rules) {
  auto r = request();
  EXPECT_NO_THROW(validate(r));
  r.model.clear();
  EXPECT_THROW(validate(r), ConfigError);
  r = request();
  r.temperature = 2.5;
  EXPECT_THROW(validate(r), ConfigError);
  r.temperature = -0.1;
  EXPECT_THROW(validate(r), ConfigError);
  r = request();
  r.max_output_tokens = 0;
  EXPECT_THROW(validate(r), ConfigError);
}

TEST(SplitBaseUrl, Cases) {
  EXPECT_EQ(split_base_url("https://api.openai.com/v1"),
            std::make_pair(std::string("https://api.openai.com"), std::string("/v1")));
  EXPECT_EQ(split_base_url("http://127.0.0.1:8080/"),
            std::make_pair(std::string("http://127.0.0.1:8080"), std::string("")));
  EXPECT_EQ(split_base_url("http://h:1"), std::make_pair(std::string("http://h:1"), std::string("")));
  EXPECT_THROW(split_base_url("localhost:8080"), ConfigError);
}

TEST(ChatClient, SendsOpenAiShapedRequest) {
  MockChatServer server([](const json&) { return "positive"; });
  ChatClient client(fast(server.base_url()));
  const auto response = client.complete(request());
  EXPECT_EQ(response.text, "positive");
  EXPECT_FALSE(response.cached);
  EXPECT_GT(response.usage.prompt_tokens, 0);
  const json body = server.last_request();
  EXPECT_EQ(body["model"], "gpt-4o-mini");
  EXPECT_EQ(body["messages"][0]["role"], "system");
  EXPECT_EQ(body["messages"][0]["content"], "sys");
  EXPECT_EQ(body["messages"][1]["role"], "user");
  EXPECT_EQ(body["temperature"], 0.0);
  EXPECT_EQ(body["seed"], 42);
  EXPECT_EQ(body["max_tokens"], 8);
  EXPECT_EQ(server.last_authorization(), "Bearer sk-test");
}

TEST(ChatClient, MemoryCacheAvoidsRepeatCalls) {
  MockChatServer server([](const json&) { return "neutral"; });
  ChatClient client(fast(server.base_url()));
  client.complete(request());
  const auto again = client.complete(request());
  EXPECT_TRUE(again.cached);
  EXPECT_EQ(again.text, "neutral");
  EXPECT_EQ(client.network_calls(), 1u);
  EXPECT_EQ(server.ledger().requests(), 1u);
}

TEST(ChatClient, DiskCacheSurvivesNewClient) {
  encassist::testing::TempDir dir("cache");
  MockChatServer server([](const json&) { return "negative"; });
  auto options = fast(server.base_url());
  options.cache_dir = dir.path();
  {
    ChatClient client(options);
    client.complete(request());
  }
  const std::string key = cache_key(request());
  EXPECT_TRUE(std::filesystem::exists(dir / key.substr(0, 2) / (key + ".json")));
  ChatClient fresh(options);
  const auto response = fresh.complete(request());
  EXPECT_TRUE(response.cached);
  EXPECT_EQ(response.text, "negative");
  EXPECT_EQ(fresh.network_calls(), 0u);
  EXPECT_EQ(server.ledger().requests(), 1u);
}

TEST(ChatClient, CorruptCacheFileIsAMiss) {
  encassist::testing::TempDir dir("cache_bad");
  MockChatServer server([](const json&) { return "negative"; });
  auto options = fast(server.base_url());
  options.cache_dir = dir.path();
  const std::string key = cache_key(request());
  std::filesystem::create_directories(dir / key.substr(0, 2));
  write_file_atomic(dir / key.substr(0, 2) / (key + ".json"), "{torn");
  ChatClient client(options);
  EXPECT_FALSE(client.complete(request()).cached);
  EXPECT_EQ(client.network_calls(), 1u);
}

TEST(ChatClient, RetriesRateLimitsAndServerErrors) {
  MockChatServer server([](const json&) { return "positive"; });
  server.ledger().push_failures(1, {429, std::string("0")});
  server.ledger().push_failures(2, {503, std::nullopt});
  ChatClient client(fast(server.base_url()));
  EXPECT_EQ(client.complete(request()).text, "positive");
  EXPECT_EQ(client.network_calls(), 4u);
}

TEST(ChatClient, HonoursRetryAfter) {
  MockChatServer server([](const json&) { return "positive"; });
  server.ledger().push_failures(1, {429, std::string("0.2")});
  auto options = fast(server.base_url());
  options.retry.max_backoff = std::chrono::milliseconds(5000);
  ChatClient client(options);
  const auto start = std::chrono::steady_clock::now();
  client.complete(request());
  EXPECT_GE(std::chrono::steady_clock::now() - start, std::chrono::milliseconds(190));
}

TEST(ChatClient, ExhaustedRetriesRaiseTransportError) {
  MockChatServer server([](const json&) { return "positive"; });
  server.ledger().push_failures(10, {500, std::nullopt});
  auto options = fast(server.base_url());
  options.retry.max_attempts = 3;
  ChatClient client(options);
  try {
    client.complete(request());
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_EQ(e.attempts(), 3);
  }
  EXPECT_EQ(server.ledger().requests(), 3u);
}

TEST(ChatClient, ClientErrorsFailImmediately) {
  MockChatServer server([](const json&) { return "positive"; });
  server.ledger().push_failures(1, {401, std::nullopt});
  ChatClient client(fast(server.base_url()));
  try {
    client.complete(request());
    FAIL();
  } catch (const RequestError& e) {
    EXPECT_EQ(e.status(), 401);
  }
  EXPECT_EQ(client.network_calls(), 1u);
}

TEST(ChatClient, FailuresAreNotCached) {
  MockChatServer server([](const json&) { return "positive"; });
  server.ledger().push_failures(1, {400, std::nullopt});
  ChatClient client(fast(server.base_url()));
  EXPECT_THROW(client.complete(request()), RequestError);
  EXPECT_FALSE(client.complete(request()).cached);
}

TEST(ChatClient, InFlightLimitIsRespected) {
  MockChatServer server([](const json&) { return "positive"; });
  server.set_delay(std::chrono::milliseconds(5));
  auto options = fast(server.base_url());
  options.max_in_flight = 3;
  ChatClient client(options);
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 5; ++i) client.complete(request(std::to_string(t) + "/" + std::to_string(i)));
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(server.ledger().requests(), 40u);
  EXPECT_LE(server.ledger().max_in_flight(), 3);
  EXPECT_GE(server.ledger().max_in_flight(), 2);
}

TEST(ChatClient, EnvironmentDefaults) {
  ::unsetenv("OPENAI_BASE_URL");
  ::setenv("OPENAI_API_KEY", "sk-env", 1);
  const auto options = options_from_env();
  EXPECT_EQ(options.base_url, "https://api.openai.com/v1");
  EXPECT_EQ(options.api_key, "sk-env");
  ::setenv("OPENAI_BASE_URL", "http://localhost:9/v1", 1);
  EXPECT_EQ(options_from_env().base_url, "http://localhost:9/v1");
  ::unsetenv("OPENAI_BASE_URL");
  ::unsetenv("OPENAI_API_KEY");
}
