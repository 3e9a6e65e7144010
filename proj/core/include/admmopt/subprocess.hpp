#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <sys/types.h>
#include <vector>

#include "admmopt/evaluator.hpp"
#include "admmopt/search_space.hpp"

namespace admmopt {

struct SubprocessOptions {
  /// Shell command line, run via /bin/sh -c.
  std::string command;
  std::chrono::milliseconds timeout{300'000};
  std::chrono::milliseconds handshake_timeout{30'000};
  /// When set, the handshake must announce exactly this many constraints.
  std::optional<std::size_t> expected_constraints;
};

/// External evaluator speaking newline-delimited JSON on its stdin/stdout.
///
///   engine -> {"hello": {"protocol": 1}}
///   child  -> {"ready": {"constraints": M}}
///   engine -> {"id": n, "z": {...}, "theta_int": {...}, "theta_cont": {...}}
///   child  -> {"id": n, "loss": x, "constraints": [...]}   or   {"id": n, "error": "..."}
///
/// One request is in flight at a time. A child that exits mid-request is
/// restarted once and the request resent; a timed out child is killed and
/// restarted lazily on the next request.
class SubprocessEvaluator final : public Evaluator {
 public:
  /// Launches the child and completes the handshake; throws
  /// EvaluatorUnavailable if either fails.
  SubprocessEvaluator(const SearchSpace& space, SubprocessOptions options);
  ~SubprocessEvaluator() override;

  SubprocessEvaluator(const SubprocessEvaluator&) = delete;
  SubprocessEvaluator& operator=(const SubprocessEvaluator&) = delete;

  std::size_t num_constraints() const override { return constraints_; }
  EvalOutcome evaluate(const EvalRequest& request) override;

  std::size_t restarts() const noexcept { return restarts_; }
  bool running() const noexcept { return pid_ > 0; }

 private:
  enum class Exchange { kOk, kChildGone };

  void start();
  void stop() noexcept;
  Exchange exchange(const std::string& line, std::string& reply, std::chrono::milliseconds timeout);
  bool write_all(const std::string& data);
  // Returns nullopt on EOF; throws TimeoutError past the deadline.
  std::optional<std::string> read_line(std::chrono::steady_clock::time_point deadline);
  EvalOutcome parse_reply(const EvalRequest& request, const std::string& line);

  const SearchSpace& space_;
  SubprocessOptions options_;
  pid_t pid_ = -1;
  int fd_ = -1;
  std::string buffer_;
  std::size_t constraints_ = 0;
  std::size_t restarts_ = 0;
};

/// Fixed-size pool of single-flight subprocess evaluators. Batches are
/// spread over the workers and returned in request order.
class SubprocessPool final : public Evaluator {
 public:
  SubprocessPool(const SearchSpace& space, const SubprocessOptions& options, std::size_t workers);

  std::size_t num_constraints() const override;
  EvalOutcome evaluate(const EvalRequest& request) override;
  BatchResult evaluate_batch(std::span<const EvalRequest> requests) override;

  std::size_t size() const noexcept { return workers_.size(); }

 private:
  std::vector<std::unique_ptr<SubprocessEvaluator>> workers_;
};

}  // namespace admmopt
