#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "simgap/model.hpp"
#include "simgap/oracle.hpp"

namespace simgap {

/// Uniform axis-aligned epsilon-cover of a state box.
///
/// Every cell has per-dimension half-width h_j = epsilon / sqrt(n), so its
/// half-diagonal equals epsilon and every state of X lies within Euclidean
/// distance epsilon of some center. Centers are enumerated with dimension 0
/// varying fastest.
class Cover {
 public:
  Cover(StateBox box, double epsilon, Vec half_width, std::vector<std::size_t> counts);

  const StateBox& box() const { return box_; }
  double epsilon() const { return epsilon_; }
  const Vec& half_width() const { return half_width_; }
  const std::vector<std::size_t>& counts() const { return counts_; }
  std::size_t size() const { return size_; }

  Vec center(std::size_t r) const;
  std::vector<Vec> centers() const;

 private:
  StateBox box_;
  double epsilon_;
  Vec half_width_;
  std::vector<std::size_t> counts_;
  std::size_t size_;
};

/// Projected number of centers for a box and covering radius.
std::size_t projected_cover_size(const StateBox& box, double epsilon);

/// Throws ResourceError when N * input_count exceeds record_budget.
Cover make_cover(const StateBox& box, double epsilon, std::size_t input_count = 1,
                 std::size_t record_budget = 50'000'000);

struct SampleMetadata {
  double epsilon = 0.0;
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t centers = 0;  // N
  std::size_t inputs = 0;   // M
  Vec half_width;
  std::vector<std::size_t> counts;
  std::string model_descriptor;
  std::string model_hash;
  std::string oracle_id;
  std::string started_at;
  std::string finished_at;
};

/// Paired one-step data (x_r, u, f(x_r,u), fhat(x_r,u)), r-major then input.
class SampleSet {
 public:
  struct Record {
    std::size_t r;
    std::size_t u_index;
    VecView x;
    VecView u;
    VecView f;
    VecView fhat;
  };

  SampleSet(std::size_t n, std::size_t m);

  std::size_t n() const { return n_; }
  std::size_t m() const { return m_; }
  std::size_t size() const { return r_.size(); }
  bool empty() const { return r_.empty(); }

  void add(std::size_t r, std::size_t u_index, VecView x, VecView u, VecView f, VecView fhat);
  void resize(std::size_t count);
  void set(std::size_t k, std::size_t r, std::size_t u_index, VecView x, VecView u, VecView f,
           VecView fhat);

  Record operator[](std::size_t k) const;
  /// |fhat_i - f_i| of record k.
  double residual(std::size_t k, std::size_t dim) const;

  /// Hash over the record contents only (metadata and timestamps excluded).
  std::string content_hash() const;

  SampleMetadata metadata;

 private:
  std::size_t n_;
  std::size_t m_;
  std::vector<std::size_t> r_;
  std::vector<std::size_t> u_index_;
  std::vector<double> x_;
  std::vector<double> u_;
  std::vector<double> f_;
  std::vector<double> fhat_;
};

struct CollectOptions {
  unsigned jobs = 1;
  /// Partial progress is appended here every `checkpoint_every` records and
  /// picked up again on the next run.
  std::optional<std::filesystem::path> checkpoint;
  std::size_t checkpoint_every = 10'000;
};

/// Evaluates model and oracle at every (center, input) pair.
SampleSet collect(const Cover& cover, const InputGrid& inputs, const NominalModel& model,
                  Oracle& oracle, const CollectOptions& options = {});

/// CSV columns: r,u_index,x_1..x_n,u_1..u_m,f_1..f_n,fhat_1..fhat_n
void write_samples_csv(const std::filesystem::path& path, const SampleSet& samples);
SampleSet read_samples_csv(const std::filesystem::path& path);
void write_sample_metadata(const std::filesystem::path& path, const SampleMetadata& meta);
SampleMetadata read_sample_metadata(const std::filesystem::path& path);

/// Writes `<stem>.csv` and `<stem>.meta.json`.
void save_samples(const std::filesystem::path& csv_path, const SampleSet& samples);
SampleSet load_samples(const std::filesystem::path& csv_path);
std::filesystem::path metadata_path(const std::filesystem::path& csv_path);

}  // namespace simgap
