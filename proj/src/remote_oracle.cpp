#include "framerepeat/remote_oracle.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>

#include "framerepeat/errors.hpp"

namespace framerepeat::oracles {

using json = nlohmann::json;

namespace {

// Transport failures worth another attempt: no response, 5xx, 429.
class RetryableError : public TransportError {
 public:
  using TransportError::TransportError;
};

std::unique_ptr<httplib::Client> make_client(const RemoteOracleConfig& c) {
  auto client = std::make_unique<httplib::Client>(c.endpoint);
  if (!client->is_valid()) throw TransportError("remote oracle: invalid endpoint '" + c.endpoint + "'");
  const auto sec = static_cast<time_t>(c.timeout_seconds);
  const auto usec = static_cast<time_t>((c.timeout_seconds - static_cast<double>(sec)) * 1e6);
  client->set_connection_timeout(sec, usec);
  client->set_read_timeout(sec, usec);
  client->set_write_timeout(sec, usec);
  if (!c.auth_token.empty()) client->set_bearer_token_auth(c.auth_token);
  return client;
}

const json& require_field(const json& body, const char* field, const std::string& path) {
  if (!body.is_object() || !body.contains(field))
    throw ProtocolError("remote oracle: response to " + path + " is missing field '" + field + "'");
  return body[field];
}

}  // namespace

RemoteOracle::RemoteOracle(RemoteOracleConfig config)
    : config_(std::move(config)),
      slots_(std::make_unique<std::counting_semaphore<>>(
          static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, config_.in_flight_budget)))) {
  json health;
  try {
    health = request_once("/v1/health", nullptr);
  } catch (const RetryableError& e) {
    throw TransportError(e.what());
  }
  const json& id = require_field(health, "oracle_id", "/v1/health");
  if (!id.is_string()) throw ProtocolError("remote oracle: /v1/health field 'oracle_id' is not a string");
  oracle_id_ = id.get<std::string>();
  if (health.contains("model_name") && health["model_name"].is_string())
    model_name_ = health["model_name"].get<std::string>();
}

RemoteOracle::~RemoteOracle() = default;

json RemoteOracle::request_once(const std::string& path, const json* body) {
  ++attempts_;
  auto client = make_client(config_);
  slots_->acquire();
  httplib::Result res = body ? client->Post(path, body->dump(), "application/json") : client->Get(path);
  slots_->release();
  if (!res) {
    throw RetryableError("remote oracle: " + path + " on " + config_.endpoint + ": " +
                         httplib::to_string(res.error()));
  }
  if (res->status == 429 || res->status >= 500) {
    throw RetryableError("remote oracle: " + path + " returned HTTP " + std::to_string(res->status));
  }
  if (res->status < 200 || res->status >= 300) {
    throw TransportError("remote oracle: " + path + " returned HTTP " + std::to_string(res->status) +
                         ": " + res->body);
  }
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw ProtocolError("remote oracle: " + path + " returned a body that is not JSON: " + e.what());
  }
}

json RemoteOracle::post(const std::string& path, const json& body, int max_retries) {
  double backoff = config_.backoff_seconds;
  for (int attempt = 0;; ++attempt) {
    try {
      return request_once(path, &body);
    } catch (const RetryableError& e) {
      if (attempt >= max_retries) {
        throw TransportError(std::string(e.what()) + " (after " + std::to_string(attempt + 1) +
                             " attempts, sample '" + body.value("sample_id", "") + "')");
      }
      ++retried_;
      std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
      backoff *= 2.0;
    }
  }
}

double RemoteOracle::logprob(const std::string& sample_id, std::span<const std::size_t> sequence,
                             int answer_id) {
  const json body = {{"sample_id", sample_id},
                     {"sequence", std::vector<std::size_t>(sequence.begin(), sequence.end())},
                     {"answer_id", answer_id}};
  const json reply = post("/v1/logprob", body, config_.retries);
  const json& value = require_field(reply, "logprob", "/v1/logprob");
  if (!value.is_number()) throw ProtocolError("remote oracle: field 'logprob' is not a number");
  const double lp = value.get<double>();
  if (!std::isfinite(lp) || lp > 0.0)
    throw ProtocolError("remote oracle: logprob " + value.dump() + " is not a log-probability");
  return lp;
}

int RemoteOracle::sample_answer(const std::string& sample_id, std::span<const std::size_t> sequence,
                                double temperature) {
  const json body = {{"sample_id", sample_id},
                     {"sequence", std::vector<std::size_t>(sequence.begin(), sequence.end())},
                     {"temperature", temperature}};
  // Answer sampling is stochastic, so it is never retried.
  const json reply = post("/v1/answer", body, 0);
  const json& value = require_field(reply, "answer_id", "/v1/answer");
  if (!value.is_number_integer()) throw ProtocolError("remote oracle: field 'answer_id' is not an integer");
  return value.get<int>();
}

}  // namespace framerepeat::oracles
