#include <gtest/gtest.h>

#include <thread>

#include "encassist/encoder.hpp"
#include "encassist/error.hpp"
#include "fixtures.hpp"
#include "mock_servers.hpp"
#include "synthetic.hpp"

using namespace encassist;
using encassist::testing::MockEncoderServer;

namespace {

std::shared_ptr<const ToyEncoder> small_toy() {
  static const auto model = std::make_shared<const ToyEncoder>(
      toy_train(encassist::testing::synthetic_corpus({90, 4, 0.1}), 32, 20, 1));
  return model;
}

HttpBackendOptions fast(const std::string& url, long dim = 0) {
  HttpBackendOptions options;
  options.base_url = url;
  options.embedding_dim = dim;
  options.initial_backoff = std::chrono::milliseconds(1);
  options.timeout = std::chrono::milliseconds(5000);
  return options;
}

}  // namespace

TEST(HttpBackend, DimensionComesFromHealth) {
  MockEncoderServer server(small_toy(), 32, "toy-remote");
  HttpBackend backend(fast(server.base_url()));
  EXPECT_EQ(backend.descriptor().embedding_dim, 32);
  EXPECT_EQ(backend.descriptor().model_name, "toy-remote");
  EXPECT_EQ(backend.descriptor().kind, BackendKind::http);
}

TEST(HttpBackend, PredictionsMatchServedModel) {
  MockEncoderServer server(small_toy(), 32);
  HttpBackend backend(fast(server.base_url()));
  for (const auto& review : encassist::testing::synthetic_corpus({10, 8, 0.2})) {
    const auto remote = backend.predict(review.text);
    const auto local = small_toy()->predict(review.text);
    EXPECT_EQ(remote.label, local.label);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(remote.probs[c], local.probs[c]);
    EXPECT_EQ(remote.embedding, local.embedding);
  }
}

TEST(HttpBackend, RetriesServerErrors) {
  MockEncoderServer server(small_toy(), 32);
  HttpBackend backend(fast(server.base_url(), 32));
  server.ledger().push_failures(2, {503, std::nullopt});
  EXPECT_NO_THROW(backend.predict("great food"));
  EXPECT_EQ(server.ledger().requests(), 3u);
}

TEST(HttpBackend, RetriesRateLimits) {
  MockEncoderServer server(small_toy(), 32);
  HttpBackend backend(fast(server.base_url(), 32));
  server.ledger().push_failures(1, {429, std::nullopt});
  EXPECT_NO_THROW(backend.predict("great food"));
  EXPECT_EQ(server.ledger().requests(), 2u);
}

TEST(HttpBackend, GivesUpAfterMaxAttempts) {
  MockEncoderServer server(small_toy(), 32);
  HttpBackend backend(fast(server.base_url(), 32));
  server.ledger().push_failures(5, {500, std::nullopt});
  try {
    backend.predict("great food");
    FAIL();
  } catch (const BackendUnavailable& e) {
    EXPECT_EQ(e.attempts(), 3);
  }
  EXPECT_EQ(server.ledger().requests(), 3u);
}

TEST(HttpBackend, ClientErrorsAreNotRetried) {
  MockEncoderServer server(small_toy(), 32);
  HttpBackend backend(fast(server.base_url(), 32));
  server.ledger().push_failures(1, {400, std::nullopt});
  try {
    backend.predict("great food");
    FAIL();
  } catch (const BackendUnavailable& e) {
    EXPECT_EQ(e.attempts(), 1);
  }
}

TEST(HttpBackend, UnreachableServiceIsUnavailable) {
  int port = 0;
  {
    MockEncoderServer server(small_toy(), 32);
    port = server.port();
  }
  HttpBackendOptions options = fast("http://127.0.0.1:" + std::to_string(port), 32);
  options.timeout = std::chrono::milliseconds(300);
  HttpBackend backend(options);
  EXPECT_THROW(backend.predict("x"), BackendUnavailable);
}

TEST(HttpBackend, RejectsContractViolations) {
  MockEncoderServer server(small_toy(), 3);
  HttpBackend backend(fast(server.base_url()));
  server.set_fixed_response(200, R"({"label":"positive","probs":[0.1,0.1,0.7],"embedding":[1,0,0]})");
  EXPECT_THROW(backend.predict("x"), SchemaError);
  server.set_fixed_response(200, R"({"label":"positive","probs":[0.1,0.1,0.8],"embedding":[1,0]})");
  EXPECT_THROW(backend.predict("x"), SchemaError);
  server.set_fixed_response(200, R"({"label":"negative","probs":[0.1,0.1,0.8],"embedding":[1,0,0]})");
  EXPECT_THROW(backend.predict("x"), SchemaError);
  server.set_fixed_response(200, "not json");
  EXPECT_THROW(backend.predict("x"), SchemaError);
  server.set_fixed_response(200, R"({"label":"positive","probs":[0.1,0.1,0.8],"embedding":[1,0,0]})");
  EXPECT_EQ(backend.predict("x").label, Label::positive);
}

TEST(HttpBackend, BoundsConcurrentRequests) {
  MockEncoderServer server(small_toy(), 32);
  HttpBackendOptions options = fast(server.base_url(), 32);
  options.max_in_flight = 2;
  HttpBackend backend(options);
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 10; ++i) backend.predict("food " + std::to_string(i));
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(server.ledger().requests(), 80u);
  EXPECT_LE(server.ledger().max_in_flight(), 2);
}

TEST(SidecarContract, RecordedFixtureValidates) {
  const json health = json::parse(encassist::testing::read_fixture("sidecar/health.json"));
  const json request = json::parse(encassist::testing::read_fixture("sidecar/predict_request.json"));
  const std::string recorded = encassist::testing::read_fixture("sidecar/predict_response.json");

  MockEncoderServer server(small_toy(), health.at("embedding_dim").get<long>(),
                           health.at("model").get<std::string>());
  server.set_fixed_response(200, recorded);
  HttpBackend backend(fast(server.base_url()));
  EXPECT_EQ(backend.descriptor().embedding_dim, 768);
  const auto prediction = backend.predict(request.at("text").get<std::string>());
  EXPECT_EQ(prediction.embedding.size(), 768);
  EXPECT_NEAR(prediction.probs[0] + prediction.probs[1] + prediction.probs[2], 1.0, 1e-6);
  EXPECT_EQ(prediction.label, Label::negative);
  EXPECT_EQ(format_percent(prediction.probs[0]), "84.37%");
}
