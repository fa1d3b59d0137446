#include "simgap/oracle.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "simgap/error.hpp"
#include "simgap/util.hpp"

namespace simgap {

using nlohmann::json;

Oracle::Oracle(std::size_t n, std::size_t m, double tau, StateBox domain)
    : n_(n), m_(m), tau_(tau), domain_(std::move(domain)) {
  if (domain_.dim() != n_) throw ConfigError("oracle: domain dimension does not match n");
  if (!(tau_ > 0)) throw ConfigError("oracle: sampling time must be positive");
}

Vec Oracle::query(VecView x, VecView u) {
  check_dim(x, n_, "oracle query: state");
  check_dim(u, m_, "oracle query: input");
  if (!domain_.contains(x)) throw DomainError("oracle query: state outside the oracle domain");
  return do_query(x, u);
}

std::string to_string(SurrogateKind kind) {
  switch (kind) {
    case SurrogateKind::identity: return "identity";
    case SurrogateKind::damped_pendulum: return "damped-pendulum";
    case SurrogateKind::slipping_unicycle: return "slipping-unicycle";
  }
  return "unknown";
}

SurrogateKind parse_surrogate_kind(const std::string& name) {
  if (name == "identity") return SurrogateKind::identity;
  if (name == "damped-pendulum") return SurrogateKind::damped_pendulum;
  if (name == "slipping-unicycle") return SurrogateKind::slipping_unicycle;
  throw ConfigError("unknown surrogate '" + name + "'");
}

SurrogateOracle::SurrogateOracle(NominalModel model, SurrogateSpec spec, StateBox domain)
    : Oracle(model.n(), model.m(), model.tau(), std::move(domain)),
      model_(std::move(model)),
      spec_(spec) {
  if (spec_.kind == SurrogateKind::damped_pendulum && model_.kind() != ModelKind::pendulum) {
    throw ConfigError("damped-pendulum surrogate requires the pendulum model");
  }
  if (spec_.kind == SurrogateKind::slipping_unicycle && model_.kind() != ModelKind::unicycle) {
    throw ConfigError("slipping-unicycle surrogate requires the unicycle model");
  }
  if (!(spec_.length_scale > 0)) throw ConfigError("surrogate: length_scale must be positive");
}

std::unique_ptr<Oracle> SurrogateOracle::clone() const {
  return std::make_unique<SurrogateOracle>(*this);
}

std::string SurrogateOracle::id() const {
  std::string s = "surrogate:" + to_string(spec_.kind);
  switch (spec_.kind) {
    case SurrogateKind::damped_pendulum:
      s += "(b=" + format_double(spec_.damping) + ",length_scale=" +
           format_double(spec_.length_scale) +
           ",semi_implicit=" + (spec_.semi_implicit ? "1" : "0") + ")";
      break;
    case SurrogateKind::slipping_unicycle:
      s += "(gain=" + format_double(spec_.gain) + ",drift=" + format_double(spec_.drift) + ")";
      break;
    case SurrogateKind::identity:
      break;
  }
  return s;
}

Vec SurrogateOracle::do_query(VecView x, VecView u) {
  const double tau = model_.tau();
  switch (spec_.kind) {
    case SurrogateKind::identity:
      return model_.step(x, u);
    case SurrogateKind::damped_pendulum: {
      const double m = model_.param("mass");
      const double g = model_.param("gravity");
      const double l = spec_.length_scale * model_.param("length");
      const double v = -(3.0 * g * tau / (2.0 * l)) * std::sin(x[0]) + x[1] +
                       3.0 * tau * u[0] / (m * l * l) - tau * spec_.damping * x[1];
      const double p = x[0] + tau * (spec_.semi_implicit ? v : x[1]);
      return {p, v};
    }
    case SurrogateKind::slipping_unicycle: {
      const double v = spec_.gain * u[0];
      return {x[0] + tau * v * std::cos(x[2]),
              x[1] + tau * v * std::sin(x[2]) + tau * spec_.drift * u[0],
              x[2] + tau * u[1]};
    }
  }
  throw ConfigError("surrogate: unsupported kind");
}

namespace {

// sup of |cos| and |sin| over [a, b]
double sup_abs_cos(double a, double b) {
  const double k = std::ceil(a / std::numbers::pi);
  if (k * std::numbers::pi <= b) return 1.0;
  return std::max(std::abs(std::cos(a)), std::abs(std::cos(b)));
}

double sup_abs_sin(double a, double b) {
  const double half = 0.5 * std::numbers::pi;
  const double k = std::ceil((a - half) / std::numbers::pi);
  if (half + k * std::numbers::pi <= b) return 1.0;
  return std::max(std::abs(std::sin(a)), std::abs(std::sin(b)));
}

}  // namespace

double SurrogateOracle::analytic_l1(std::size_t dim, const StateBox& box,
                                    const InputGrid& inputs) const {
  if (dim >= n()) throw UsageError("analytic_l1: dimension out of range");
  const double tau = model_.tau();
  switch (spec_.kind) {
    case SurrogateKind::identity:
      return 0.0;
    case SurrogateKind::damped_pendulum: {
      // d2 = -a sin(x1) + c u - tau b x2, a = (3 g tau / 2)(1/lhat - 1/l)
      const double g = model_.param("gravity");
      const double l = model_.param("length");
      const double lhat = spec_.length_scale * l;
      const double cos_sup = sup_abs_cos(box.lower(0), box.upper(0));
      if (dim == 1) {
        const double a = 1.5 * g * tau * std::abs(1.0 / lhat - 1.0 / l) * cos_sup;
        return std::hypot(a, tau * spec_.damping);
      }
      if (!spec_.semi_implicit) return 0.0;
      // semi-implicit position update: d1 = tau * (v_hat - x2)
      //   = tau * (-(3 g tau / (2 lhat)) sin x1 + 3 tau u / (m lhat^2) - tau b x2)
      const double a = 1.5 * g * tau / lhat * cos_sup;
      return tau * std::hypot(a, tau * spec_.damping);
    }
    case SurrogateKind::slipping_unicycle: {
      const double vmax = inputs.abs_max()[0];
      const double slip = std::abs(1.0 - spec_.gain);
      if (dim == 0) return tau * vmax * slip * sup_abs_sin(box.lower(2), box.upper(2));
      if (dim == 1) return tau * vmax * slip * sup_abs_cos(box.lower(2), box.upper(2));
      return 0.0;
    }
  }
  throw ConfigError("analytic_l1: unsupported surrogate");
}

// ---------------------------------------------------------------------------
// External process transport

namespace {

void ignore_sigpipe() {
  static const bool done = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)done;
}

std::string quote_command(const std::vector<std::string>& argv) {
  std::string s;
  for (const auto& a : argv) {
    if (!s.empty()) s += ' ';
    s += a;
  }
  return s;
}

}  // namespace

ProcessChannel::ProcessChannel(std::vector<std::string> argv) {
  if (argv.empty()) throw ConfigError("external oracle: empty command");
  ignore_sigpipe();
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0 || ::pipe2(out_pipe, O_CLOEXEC) != 0) {
    throw OracleError(std::string("external oracle: pipe failed: ") + std::strerror(errno));
  }
  std::vector<char*> args;
  for (auto& a : argv) args.push_back(a.data());
  args.push_back(nullptr);

  const pid_t pid = ::fork();
  if (pid < 0) throw OracleError("external oracle: fork failed");
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

ProcessChannel::~ProcessChannel() { close(); }

void ProcessChannel::write_line(const std::string& line) {
  std::string data = line + "\n";
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t w = ::write(to_child_, data.data() + off, data.size() - off);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw OracleError(std::string("external oracle: write failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(w);
  }
}

std::string ProcessChannel::read_line(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw OracleError("external oracle: timed out waiting for reply");
    pollfd pfd{from_child_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw OracleError("external oracle: poll failed");
    }
    if (rc == 0) continue;
    char chunk[4096];
    const ssize_t r = ::read(from_child_, chunk, sizeof chunk);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw OracleError("external oracle: read failed");
    }
    if (r == 0) throw OracleError("external oracle: process closed its output");
    buffer_.append(chunk, static_cast<std::size_t>(r));
  }
}

void ProcessChannel::close() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    int status = 0;
    for (int i = 0; i < 100; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) != 0) {
        pid_ = -1;
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

Handshake handshake(ProcessChannel& channel, std::chrono::milliseconds timeout) {
  channel.write_line(R"({"op":"hello"})");
  const std::string line = channel.read_line(timeout);
  try {
    const json reply = json::parse(line);
    if (!reply.is_object() || !reply.contains("n") || !reply.contains("m") ||
        !reply.contains("tau") || !reply["n"].is_number_unsigned() ||
        !reply["m"].is_number_unsigned() || !reply["tau"].is_number()) {
      throw OracleError("external oracle: malformed hello reply: '" + line + "'");
    }
    return {reply["n"].get<std::size_t>(), reply["m"].get<std::size_t>(),
            reply["tau"].get<double>()};
  } catch (const json::exception&) {
    throw OracleError("external oracle: malformed hello reply: '" + line + "'");
  }
}

void check_handshake(const Handshake& reply, std::size_t n, std::size_t m, double tau) {
  if (reply.n != n || reply.m != m ||
      std::abs(reply.tau - tau) > 1e-12 * std::max(1.0, std::abs(tau))) {
    throw ConfigError("external oracle advertises (n=" + std::to_string(reply.n) +
                      ", m=" + std::to_string(reply.m) + ", tau=" + std::to_string(reply.tau) +
                      ") but the configuration expects (n=" + std::to_string(n) +
                      ", m=" + std::to_string(m) + ", tau=" + std::to_string(tau) + ")");
  }
}

ExternalOracle::ExternalOracle(ExternalSpec spec, std::size_t n, std::size_t m, double tau,
                               StateBox domain)
    : Oracle(n, m, tau, std::move(domain)), spec_(std::move(spec)) {
  connect();
}

ExternalOracle::~ExternalOracle() {
  if (channel_) {
    try {
      channel_->write_line(R"({"op":"bye"})");
    } catch (const OracleError&) {
    }
  }
}

void ExternalOracle::connect() {
  auto channel = std::make_unique<ProcessChannel>(spec_.command);
  check_handshake(handshake(*channel, spec_.timeout), n(), m(), tau());
  channel_ = std::move(channel);
}

std::unique_ptr<Oracle> ExternalOracle::clone() const {
  return std::make_unique<ExternalOracle>(spec_, n(), m(), tau(), domain());
}

std::string ExternalOracle::id() const { return "external:" + quote_command(spec_.command); }

Vec ExternalOracle::do_query(VecView x, VecView u) {
  const json request = {{"op", "step"},
                        {"x", std::vector<double>(x.begin(), x.end())},
                        {"u", std::vector<double>(u.begin(), u.end())}};
  std::string last_error;
  for (int attempt = 0; attempt <= spec_.retries; ++attempt) {
    try {
      if (!channel_) connect();
      channel_->write_line(request.dump());
      const std::string line = channel_->read_line(spec_.timeout);
      json reply;
      try {
        reply = json::parse(line);
      } catch (const json::exception&) {
        throw OracleError("external oracle: malformed step reply: '" + line + "'");
      }
      if (reply.contains("error")) {
        throw OracleError("external oracle reported: " + reply["error"].dump());
      }
      if (!reply.contains("x_next") || !reply["x_next"].is_array() ||
          reply["x_next"].size() != n()) {
        throw OracleError("external oracle: malformed step reply: '" + line + "'");
      }
      Vec next = reply["x_next"].get<Vec>();
      return next;
    } catch (const OracleError& e) {
      last_error = e.what();
      channel_.reset();
    }
  }
  throw OracleError(last_error + " (after " + std::to_string(spec_.retries) + " retries)",
                    spec_.retries);
}

void serve_oracle(Oracle& oracle, std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json reply;
    try {
      const json request = json::parse(line);
      const std::string op = request.at("op").get<std::string>();
      if (op == "bye") return;
      if (op == "hello") {
        reply = {{"n", oracle.n()}, {"m", oracle.m()}, {"tau", oracle.tau()}};
      } else if (op == "step") {
        const Vec x = request.at("x").get<Vec>();
        const Vec u = request.at("u").get<Vec>();
        reply = {{"x_next", oracle.query(x, u)}};
      } else {
        reply = {{"error", "unknown op '" + op + "'"}};
      }
    } catch (const std::exception& e) {
      reply = {{"error", e.what()}};
    }
    out << reply.dump() << '\n' << std::flush;
  }
}

}  // namespace simgap
