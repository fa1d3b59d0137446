#pragma once

#include <chrono>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "simgap/model.hpp"

namespace simgap {

/// The high-fidelity map x(k+1) = fhat(x(k), u(k)). Only trusted on its domain X.
class Oracle {
 public:
  Oracle(std::size_t n, std::size_t m, double tau, StateBox domain);
  virtual ~Oracle() = default;

  /// Throws DomainError when x is outside the domain.
  Vec query(VecView x, VecView u);

  /// An independent handle; for external oracles this opens a new connection.
  virtual std::unique_ptr<Oracle> clone() const = 0;
  virtual std::string id() const = 0;

  std::size_t n() const { return n_; }
  std::size_t m() const { return m_; }
  double tau() const { return tau_; }
  const StateBox& domain() const { return domain_; }

 protected:
  virtual Vec do_query(VecView x, VecView u) = 0;

 private:
  std::size_t n_;
  std::size_t m_;
  double tau_;
  StateBox domain_;
};

enum class SurrogateKind { identity, damped_pendulum, slipping_unicycle };

std::string to_string(SurrogateKind kind);
SurrogateKind parse_surrogate_kind(const std::string& name);

/// Mismatch parameters of an analytic surrogate.
struct SurrogateSpec {
  SurrogateKind kind = SurrogateKind::identity;
  /// damped pendulum: viscous damping b and rod length ratio lhat / l.
  double damping = 0.1;
  double length_scale = 1.05;
  /// damped pendulum: position integrated with the updated velocity.
  bool semi_implicit = true;
  /// slipping unicycle: actuator gain on u1 and lateral drift coefficient.
  double gain = 0.95;
  double drift = 0.05;
};

class SurrogateOracle final : public Oracle {
 public:
  SurrogateOracle(NominalModel model, SurrogateSpec spec, StateBox domain);

  std::unique_ptr<Oracle> clone() const override;
  std::string id() const override;

  const SurrogateSpec& spec() const { return spec_; }
  const NominalModel& model() const { return model_; }

  /// Exact Lipschitz constant (in x) of |fhat_i - f_i| over box x inputs, derived
  /// from the surrogate's closed form. Sound upper bound.
  double analytic_l1(std::size_t dim, const StateBox& box, const InputGrid& inputs) const;

 protected:
  Vec do_query(VecView x, VecView u) override;

 private:
  NominalModel model_;
  SurrogateSpec spec_;
};

/// Child process speaking newline-delimited JSON over its stdin/stdout.
class ProcessChannel {
 public:
  explicit ProcessChannel(std::vector<std::string> argv);
  ~ProcessChannel();
  ProcessChannel(const ProcessChannel&) = delete;
  ProcessChannel& operator=(const ProcessChannel&) = delete;

  void write_line(const std::string& line);
  /// Next line without its terminator; throws OracleError on EOF or timeout.
  std::string read_line(std::chrono::milliseconds timeout);
  void close();

 private:
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

struct Handshake {
  std::size_t n = 0;
  std::size_t m = 0;
  double tau = 0.0;
};

/// Sends {"op":"hello"} and parses the advertised dimensions.
Handshake handshake(ProcessChannel& channel, std::chrono::milliseconds timeout);
/// ConfigError when the advertised values disagree with the configuration.
void check_handshake(const Handshake& reply, std::size_t n, std::size_t m, double tau);

struct ExternalSpec {
  std::vector<std::string> command;
  std::chrono::milliseconds timeout{10000};
  int retries = 2;
};

/// Synchronous request/response client; one query in flight per connection.
class ExternalOracle final : public Oracle {
 public:
  ExternalOracle(ExternalSpec spec, std::size_t n, std::size_t m, double tau, StateBox domain);
  ~ExternalOracle() override;

  std::unique_ptr<Oracle> clone() const override;
  std::string id() const override;

 protected:
  Vec do_query(VecView x, VecView u) override;

 private:
  void connect();

  ExternalSpec spec_;
  std::unique_ptr<ProcessChannel> channel_;
};

/// Server side of the wire protocol: answers hello/step/bye on the given streams
/// until "bye" or end of input.
void serve_oracle(Oracle& oracle, std::istream& in, std::ostream& out);

}  // namespace simgap
