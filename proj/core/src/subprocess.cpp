#include "admmopt/subprocess.hpp"

#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <exception>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fmt/format.h>

#include "admmopt/errors.hpp"
#include "log.hpp"

extern char** environ;

namespace admmopt {

namespace {

using Clock = std::chrono::steady_clock;

class SpawnActions {
 public:
  SpawnActions() { posix_spawn_file_actions_init(&actions_); }
  ~SpawnActions() { posix_spawn_file_actions_destroy(&actions_); }
  posix_spawn_file_actions_t* get() { return &actions_; }

 private:
  posix_spawn_file_actions_t actions_;
};

class SpawnAttr {
 public:
  SpawnAttr() { posix_spawnattr_init(&attr_); }
  ~SpawnAttr() { posix_spawnattr_destroy(&attr_); }
  posix_spawnattr_t* get() { return &attr_; }

 private:
  posix_spawnattr_t attr_;
};

}  // namespace

SubprocessEvaluator::SubprocessEvaluator(const SearchSpace& space, SubprocessOptions options)
    : space_(space), options_(std::move(options)) {
  if (options_.command.empty()) throw EvaluatorUnavailable("empty evaluator command");
  start();
}

SubprocessEvaluator::~SubprocessEvaluator() { stop(); }

void SubprocessEvaluator::start() {
  int fds[2];
  if (socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) {
    throw EvaluatorUnavailable(fmt::format("socketpair failed: {}", std::strerror(errno)));
  }
  SpawnActions actions;
  posix_spawn_file_actions_adddup2(actions.get(), fds[1], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(actions.get(), fds[1], STDOUT_FILENO);
  SpawnAttr attr;
  // own process group so a kill reaches whatever the shell started
  posix_spawnattr_setflags(attr.get(), POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(attr.get(), 0);

  const char* argv[] = {"sh", "-c", options_.command.c_str(), nullptr};
  pid_t pid = -1;
  const int rc = posix_spawn(&pid, "/bin/sh", actions.get(), attr.get(), const_cast<char* const*>(argv), environ);
  ::close(fds[1]);
  if (rc != 0) {
    ::close(fds[0]);
    throw EvaluatorUnavailable(fmt::format("cannot launch '{}': {}", options_.command, std::strerror(rc)));
  }
  pid_ = pid;
  fd_ = fds[0];
  buffer_.clear();

  std::string reply;
  const std::string hello = nlohmann::json{{"hello", {{"protocol", 1}}}}.dump() + "\n";
  Exchange status;
  try {
    status = exchange(hello, reply, options_.handshake_timeout);
  } catch (const TimeoutError&) {
    stop();
    throw EvaluatorUnavailable(fmt::format("evaluator '{}' did not answer the handshake", options_.command));
  }
  if (status != Exchange::kOk) {
    stop();
    throw EvaluatorUnavailable(fmt::format("evaluator '{}' exited during the handshake", options_.command));
  }
  nlohmann::json ready;
  try {
    ready = nlohmann::json::parse(reply);
  } catch (const nlohmann::json::exception&) {
    stop();
    throw EvaluatorUnavailable(fmt::format("malformed handshake reply: {}", reply));
  }
  if (!ready.is_object() || !ready.contains("ready") || !ready["ready"].is_object() ||
      !ready["ready"].contains("constraints") || !ready["ready"]["constraints"].is_number_unsigned()) {
    stop();
    throw EvaluatorUnavailable(fmt::format("unexpected handshake reply: {}", reply));
  }
  const auto m = ready["ready"]["constraints"].get<std::size_t>();
  if (options_.expected_constraints && *options_.expected_constraints != m) {
    stop();
    throw EvaluatorUnavailable(
        fmt::format("evaluator announces {} constraints, expected {}", m, *options_.expected_constraints));
  }
  constraints_ = m;
  options_.expected_constraints = m;  // a restarted child must agree
}

void SubprocessEvaluator::stop() noexcept {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
  if (pid_ > 0) {
    int status = 0;
    if (::waitpid(pid_, &status, WNOHANG) == 0) {
      ::kill(-pid_, SIGKILL);
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
    }
    pid_ = -1;
  }
  buffer_.clear();
}

bool SubprocessEvaluator::write_all(const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

std::optional<std::string> SubprocessEvaluator::read_line(Clock::time_point deadline) {
  for (;;) {
    if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
      std::string line = buffer_.substr(0, pos);
      buffer_.erase(0, pos + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      return line;
    }
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (remaining.count() <= 0) throw TimeoutError("evaluator timed out");
    pollfd pfd{fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining.count(), 1'000'000)));
    if (ready < 0) {
      if (errno == EINTR) continue;
      return std::nullopt;
    }
    if (ready == 0) continue;
    char chunk[4096];
    const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      return std::nullopt;
    }
    if (n == 0) return std::nullopt;
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

SubprocessEvaluator::Exchange SubprocessEvaluator::exchange(const std::string& line, std::string& reply,
                                                            std::chrono::milliseconds timeout) {
  if (!write_all(line)) return Exchange::kChildGone;
  auto got = read_line(Clock::now() + timeout);
  if (!got) return Exchange::kChildGone;
  reply = std::move(*got);
  return Exchange::kOk;
}

EvalOutcome SubprocessEvaluator::evaluate(const EvalRequest& request) {
  const std::string line = request_to_wire(space_, request).dump() + "\n";
  const auto started = Clock::now();

  std::string reply;
  for (int attempt = 0;; ++attempt) {
    if (pid_ <= 0) {
      ++restarts_;
      log::warn("restarting evaluator '{}'", options_.command);
      start();  // EvaluatorUnavailable propagates
    }
    Exchange status;
    try {
      status = exchange(line, reply, options_.timeout);
    } catch (const TimeoutError&) {
      stop();
      throw TimeoutError(fmt::format("request {} timed out after {} ms", request.id, options_.timeout.count()));
    }
    if (status == Exchange::kOk) break;

    std::string why = "closed its output";
    for (int spin = 0; spin < 100 && pid_ > 0; ++spin) {
      int wait_status = 0;
      if (::waitpid(pid_, &wait_status, WNOHANG) == pid_) {
        pid_ = -1;
        if (WIFEXITED(wait_status)) why = fmt::format("exited with status {}", WEXITSTATUS(wait_status));
        if (WIFSIGNALED(wait_status)) why = fmt::format("was killed by signal {}", WTERMSIG(wait_status));
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    stop();
    if (attempt >= 1) {
      throw EvaluationError(fmt::format("evaluator {} while serving request {}", why, request.id));
    }
    log::warn("evaluator {} during request {}; restarting once", why, request.id);
  }

  EvalOutcome out = parse_reply(request, reply);
  out.wall_time = std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - started);
  return out;
}

EvalOutcome SubprocessEvaluator::parse_reply(const EvalRequest& request, const std::string& line) {
  nlohmann::json msg;
  try {
    msg = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(fmt::format("malformed reply to request {}: {}", request.id, e.what()), line);
  }
  if (!msg.is_object() || !msg.contains("id") || !msg["id"].is_number_integer()) {
    throw ProtocolError(fmt::format("reply to request {} carries no id", request.id), line);
  }
  if (msg["id"].get<long long>() != static_cast<long long>(request.id)) {
    // out of sync with the child; start over with a fresh process
    stop();
    throw ProtocolError(fmt::format("reply id {} does not match request {}", msg["id"].dump(), request.id), line);
  }
  if (msg.contains("error") && !msg["error"].is_null()) {
    throw EvaluationError(fmt::format("evaluator reported: {}",
                                      msg["error"].is_string() ? msg["error"].get<std::string>() : msg["error"].dump()));
  }
  if (!msg.contains("loss") || !msg["loss"].is_number()) {
    throw ProtocolError(fmt::format("reply to request {} has no numeric loss", request.id), line);
  }
  EvalOutcome out;
  out.candidate_id = request.id;
  out.loss = msg["loss"].get<double>();
  if (!std::isfinite(out.loss)) throw ProtocolError("loss is not finite", line);
  if (msg.contains("constraints")) {
    if (!msg["constraints"].is_array()) throw ProtocolError("constraints must be an array", line);
    for (const auto& g : msg["constraints"]) {
      if (!g.is_number()) throw ProtocolError("constraint values must be numbers", line);
      out.constraints.push_back(g.get<double>());
      if (!std::isfinite(out.constraints.back())) throw ProtocolError("constraint value is not finite", line);
    }
  }
  if (out.constraints.size() != constraints_) {
    throw ProtocolError(
        fmt::format("reply carries {} constraints, handshake announced {}", out.constraints.size(), constraints_), line);
  }
  return out;
}

SubprocessPool::SubprocessPool(const SearchSpace& space, const SubprocessOptions& options, std::size_t workers) {
  if (workers == 0) throw std::invalid_argument("pool needs at least one worker");
  SubprocessOptions opts = options;
  for (std::size_t i = 0; i < workers; ++i) {
    workers_.push_back(std::make_unique<SubprocessEvaluator>(space, opts));
    opts.expected_constraints = workers_.front()->num_constraints();
  }
}

std::size_t SubprocessPool::num_constraints() const { return workers_.front()->num_constraints(); }

EvalOutcome SubprocessPool::evaluate(const EvalRequest& request) { return workers_.front()->evaluate(request); }

Evaluator::BatchResult SubprocessPool::evaluate_batch(std::span<const EvalRequest> requests) {
  BatchResult result;
  result.outcomes.resize(requests.size());
  result.errors.resize(requests.size());
  std::vector<std::exception_ptr> fatal(workers_.size());
  {
    std::vector<std::jthread> threads;
    for (std::size_t w = 0; w < workers_.size(); ++w) {
      threads.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < requests.size(); i += workers_.size()) {
            try {
              result.outcomes[i] = workers_[w]->evaluate(requests[i]);
            } catch (const EvaluationError& e) {
              result.errors[i] = e.what();
            }
          }
        } catch (...) {
          fatal[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : fatal) {
    if (e) std::rethrow_exception(e);
  }
  return result;
}

}  // namespace admmopt
