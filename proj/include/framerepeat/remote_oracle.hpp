#pragma once

#include <atomic>
#include <cstddef>
#include <memory>
#include <semaphore>
#include <string>

#include <json.hpp>

#include "framerepeat/oracle.hpp"

namespace framerepeat::oracles {

struct RemoteOracleConfig {
  std::string endpoint;  // e.g. "http://127.0.0.1:8080"
  std::string auth_token;  // sent as "Authorization: Bearer <token>" when set
  std::size_t in_flight_budget = 4;
  double timeout_seconds = 30.0;
  int retries = 3;  // extra attempts after the first, logprob only
  double backoff_seconds = 0.05;  // doubled after every failed attempt
};

// Client for the oracle wire protocol:
//   POST /v1/logprob {sample_id, sequence, answer_id}   -> {logprob}
//   POST /v1/answer  {sample_id, sequence, temperature} -> {answer_id}
//   GET  /v1/health                                     -> {oracle_id, model_name}
class RemoteOracle final : public Oracle {
 public:
  // Queries /v1/health once; throws TransportError when unreachable.
  explicit RemoteOracle(RemoteOracleConfig config);
  ~RemoteOracle() override;

  std::string oracle_id() const override { return oracle_id_; }
  const std::string& model_name() const noexcept { return model_name_; }

  double logprob(const std::string& sample_id, std::span<const std::size_t> sequence,
                 int answer_id) override;
  int sample_answer(const std::string& sample_id, std::span<const std::size_t> sequence,
                    double temperature) override;

  std::size_t attempts() const noexcept { return attempts_; }
  std::size_t retried_attempts() const noexcept { return retried_; }

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body, int max_retries);
  nlohmann::json request_once(const std::string& path, const nlohmann::json* body);

  RemoteOracleConfig config_;
  std::string oracle_id_;
  std::string model_name_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
  std::atomic<std::size_t> attempts_{0};
  std::atomic<std::size_t> retried_{0};
};

}  // namespace framerepeat::oracles
