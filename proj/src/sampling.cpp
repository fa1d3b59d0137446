#include "simgap/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "simgap/error.hpp"
#include "simgap/util.hpp"

namespace simgap {

using nlohmann::json;

namespace {

std::size_t cells_along(double width, double cell_width) {
  const double ratio = width / cell_width;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(ratio * (1.0 - 1e-12))));
}

}  // namespace

Cover::Cover(StateBox box, double epsilon, Vec half_width, std::vector<std::size_t> counts)
    : box_(std::move(box)),
      epsilon_(epsilon),
      half_width_(std::move(half_width)),
      counts_(std::move(counts)),
      size_(1) {
  for (auto c : counts_) size_ *= c;
}

Vec Cover::center(std::size_t r) const {
  if (r >= size_) throw UsageError("cover: center index out of range");
  Vec c(box_.dim());
  for (std::size_t j = 0; j < box_.dim(); ++j) {
    const std::size_t i = r % counts_[j];
    r /= counts_[j];
    const double v = box_.lower(j) + static_cast<double>(2 * i + 1) * half_width_[j];
    c[j] = std::min(v, box_.upper(j));
  }
  return c;
}

std::vector<Vec> Cover::centers() const {
  std::vector<Vec> out;
  out.reserve(size_);
  for (std::size_t r = 0; r < size_; ++r) out.push_back(center(r));
  return out;
}

std::size_t projected_cover_size(const StateBox& box, double epsilon) {
  if (!(epsilon > 0)) throw ConfigError("cover: epsilon must be positive");
  const double h = epsilon / std::sqrt(static_cast<double>(box.dim()));
  double total = 1.0;
  for (std::size_t j = 0; j < box.dim(); ++j) {
    total *= static_cast<double>(cells_along(box.width(j), 2.0 * h));
  }
  return total > 1e18 ? static_cast<std::size_t>(1e18) : static_cast<std::size_t>(total);
}

Cover make_cover(const StateBox& box, double epsilon, std::size_t input_count,
                 std::size_t record_budget) {
  const std::size_t projected = projected_cover_size(box, epsilon);
  const double records = static_cast<double>(projected) * static_cast<double>(input_count);
  if (records > static_cast<double>(record_budget)) {
    throw ResourceError("cover: epsilon=" + format_double(epsilon) + " needs N=" +
                        std::to_string(projected) + " centers (" +
                        format_double(records) + " records), budget is " +
                        std::to_string(record_budget));
  }
  const double h = epsilon / std::sqrt(static_cast<double>(box.dim()));
  Vec half(box.dim(), h);
  std::vector<std::size_t> counts(box.dim());
  for (std::size_t j = 0; j < box.dim(); ++j) counts[j] = cells_along(box.width(j), 2.0 * h);
  return Cover(box, epsilon, std::move(half), std::move(counts));
}

// ---------------------------------------------------------------------------

SampleSet::SampleSet(std::size_t n, std::size_t m) : n_(n), m_(m) {
  metadata.n = n;
  metadata.m = m;
}

void SampleSet::add(std::size_t r, std::size_t u_index, VecView x, VecView u, VecView f,
                    VecView fhat) {
  resize(size() + 1);
  set(size() - 1, r, u_index, x, u, f, fhat);
}

void SampleSet::resize(std::size_t count) {
  r_.resize(count);
  u_index_.resize(count);
  x_.resize(count * n_);
  u_.resize(count * m_);
  f_.resize(count * n_);
  fhat_.resize(count * n_);
}

void SampleSet::set(std::size_t k, std::size_t r, std::size_t u_index, VecView x, VecView u,
                    VecView f, VecView fhat) {
  check_dim(x, n_, "sample: state");
  check_dim(u, m_, "sample: input");
  check_dim(f, n_, "sample: nominal successor");
  check_dim(fhat, n_, "sample: oracle successor");
  r_[k] = r;
  u_index_[k] = u_index;
  std::copy(x.begin(), x.end(), x_.begin() + static_cast<std::ptrdiff_t>(k * n_));
  std::copy(u.begin(), u.end(), u_.begin() + static_cast<std::ptrdiff_t>(k * m_));
  std::copy(f.begin(), f.end(), f_.begin() + static_cast<std::ptrdiff_t>(k * n_));
  std::copy(fhat.begin(), fhat.end(), fhat_.begin() + static_cast<std::ptrdiff_t>(k * n_));
}

SampleSet::Record SampleSet::operator[](std::size_t k) const {
  return {r_[k],
          u_index_[k],
          VecView(x_).subspan(k * n_, n_),
          VecView(u_).subspan(k * m_, m_),
          VecView(f_).subspan(k * n_, n_),
          VecView(fhat_).subspan(k * n_, n_)};
}

double SampleSet::residual(std::size_t k, std::size_t dim) const {
  return std::abs(fhat_[k * n_ + dim] - f_[k * n_ + dim]);
}

std::string SampleSet::content_hash() const {
  Fnv1a h;
  h.update(static_cast<std::uint64_t>(n_));
  h.update(static_cast<std::uint64_t>(m_));
  for (std::size_t k = 0; k < size(); ++k) {
    h.update(static_cast<std::uint64_t>(r_[k]));
    h.update(static_cast<std::uint64_t>(u_index_[k]));
  }
  h.update(x_);
  h.update(u_);
  h.update(f_);
  h.update(fhat_);
  return h.hex();
}

// ---------------------------------------------------------------------------
// CSV / metadata

namespace {

std::string csv_header(std::size_t n, std::size_t m) {
  std::string s = "r,u_index";
  for (std::size_t j = 1; j <= n; ++j) s += ",x_" + std::to_string(j);
  for (std::size_t k = 1; k <= m; ++k) s += ",u_" + std::to_string(k);
  for (std::size_t j = 1; j <= n; ++j) s += ",f_" + std::to_string(j);
  for (std::size_t j = 1; j <= n; ++j) s += ",fhat_" + std::to_string(j);
  return s;
}

void append_rows(std::string& out, const SampleSet& s, std::size_t begin, std::size_t end) {
  for (std::size_t k = begin; k < end; ++k) {
    const auto rec = s[k];
    out += std::to_string(rec.r);
    out += ',';
    out += std::to_string(rec.u_index);
    for (auto part : {rec.x, rec.u, rec.f, rec.fhat}) {
      for (double v : part) {
        out += ',';
        out += format_double(v);
      }
    }
    out += '\n';
  }
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) parts.push_back(cur);
  return parts;
}

std::pair<std::size_t, std::size_t> parse_header(const std::string& header) {
  const auto cols = split(header, ',');
  std::size_t n = 0;
  std::size_t m = 0;
  for (const auto& c : cols) {
    if (c.rfind("x_", 0) == 0) ++n;
    if (c.rfind("u_", 0) == 0 && c != "u_index") ++m;
  }
  if (cols.size() < 2 || cols[0] != "r" || cols[1] != "u_index" || n == 0 || m == 0 ||
      header != csv_header(n, m)) {
    throw ConfigError("sample CSV: unexpected header '" + header + "'");
  }
  return {n, m};
}

SampleSet read_rows(std::istream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("sample CSV '" + name + "' is empty");
  const auto [n, m] = parse_header(line);
  SampleSet s(n, m);
  Vec x(n), u(m), f(n), fhat(n);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    if (cols.size() != 2 + 3 * n + m) {
      throw ConfigError("sample CSV '" + name + "' line " + std::to_string(lineno) +
                        ": wrong column count");
    }
    std::size_t c = 2;
    for (auto& v : x) v = std::stod(cols[c++]);
    for (auto& v : u) v = std::stod(cols[c++]);
    for (auto& v : f) v = std::stod(cols[c++]);
    for (auto& v : fhat) v = std::stod(cols[c++]);
    s.add(std::stoull(cols[0]), std::stoull(cols[1]), x, u, f, fhat);
  }
  return s;
}

}  // namespace

void write_samples_csv(const std::filesystem::path& path, const SampleSet& samples) {
  std::string out = csv_header(samples.n(), samples.m()) + "\n";
  append_rows(out, samples, 0, samples.size());
  write_text(path, out);
}

SampleSet read_samples_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read '" + path.string() + "'");
  return read_rows(in, path.string());
}

void write_sample_metadata(const std::filesystem::path& path, const SampleMetadata& meta) {
  const json j = {{"epsilon", meta.epsilon},
                  {"n", meta.n},
                  {"m", meta.m},
                  {"N", meta.centers},
                  {"M", meta.inputs},
                  {"h", meta.half_width},
                  {"counts", meta.counts},
                  {"model", meta.model_descriptor},
                  {"model_hash", meta.model_hash},
                  {"oracle", meta.oracle_id},
                  {"started_at", meta.started_at},
                  {"finished_at", meta.finished_at}};
  write_text(path, j.dump(2) + "\n");
}

SampleMetadata read_sample_metadata(const std::filesystem::path& path) {
  try {
    const json j = json::parse(read_text(path));
    SampleMetadata meta;
    meta.epsilon = j.at("epsilon").get<double>();
    meta.n = j.at("n").get<std::size_t>();
    meta.m = j.at("m").get<std::size_t>();
    meta.centers = j.at("N").get<std::size_t>();
    meta.inputs = j.at("M").get<std::size_t>();
    meta.half_width = j.at("h").get<Vec>();
    meta.counts = j.at("counts").get<std::vector<std::size_t>>();
    meta.model_descriptor = j.value("model", "");
    meta.model_hash = j.value("model_hash", "");
    meta.oracle_id = j.value("oracle", "");
    meta.started_at = j.value("started_at", "");
    meta.finished_at = j.value("finished_at", "");
    return meta;
  } catch (const json::exception& e) {
    throw ConfigError("sample metadata '" + path.string() + "': " + e.what());
  }
}

std::filesystem::path metadata_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".meta.json");
  return p;
}

void save_samples(const std::filesystem::path& csv_path, const SampleSet& samples) {
  write_samples_csv(csv_path, samples);
  write_sample_metadata(metadata_path(csv_path), samples.metadata);
}

SampleSet load_samples(const std::filesystem::path& csv_path) {
  SampleSet s = read_samples_csv(csv_path);
  s.metadata = read_sample_metadata(metadata_path(csv_path));
  if (s.metadata.n != s.n() || s.metadata.m != s.m()) {
    throw ConfigError("sample metadata does not match CSV dimensions");
  }
  return s;
}

// ---------------------------------------------------------------------------
// Collection

namespace {

std::size_t resume_from_checkpoint(const std::filesystem::path& path, SampleSet& out,
                                   std::size_t inputs) {
  if (!std::filesystem::exists(path)) return 0;
  SampleSet partial = read_samples_csv(path);
  if (partial.n() != out.n() || partial.m() != out.m()) {
    throw ConfigError("checkpoint '" + path.string() + "' has mismatching dimensions");
  }
  const std::size_t usable = std::min(partial.size(), out.size());
  for (std::size_t k = 0; k < usable; ++k) {
    const auto rec = partial[k];
    if (rec.r != k / inputs || rec.u_index != k % inputs) {
      throw ConfigError("checkpoint '" + path.string() + "' is out of order at record " +
                        std::to_string(k));
    }
    out.set(k, rec.r, rec.u_index, rec.x, rec.u, rec.f, rec.fhat);
  }
  return usable;
}

}  // namespace

SampleSet collect(const Cover& cover, const InputGrid& inputs, const NominalModel& model,
                  Oracle& oracle, const CollectOptions& options) {
  if (cover.box().dim() != model.n() || oracle.n() != model.n()) {
    throw UsageError("collect: state dimensions of cover, model and oracle differ");
  }
  if (inputs.dim() != model.m() || oracle.m() != model.m()) {
    throw UsageError("collect: input dimensions of grid, model and oracle differ");
  }
  const std::size_t M = inputs.size();
  const std::size_t total = cover.size() * M;

  SampleSet samples(model.n(), model.m());
  samples.resize(total);
  auto& meta = samples.metadata;
  meta.epsilon = cover.epsilon();
  meta.centers = cover.size();
  meta.inputs = M;
  meta.half_width = cover.half_width();
  meta.counts = cover.counts();
  meta.model_descriptor = model.descriptor();
  meta.model_hash = hash_hex(meta.model_descriptor);
  meta.oracle_id = oracle.id();
  meta.started_at = utc_timestamp();

  std::size_t done = 0;
  if (options.checkpoint) done = resume_from_checkpoint(*options.checkpoint, samples, M);
  if (options.checkpoint && done == 0) {
    write_text(*options.checkpoint, csv_header(model.n(), model.m()) + "\n");
  }

  const unsigned jobs = std::max(1U, options.jobs);
  std::vector<std::unique_ptr<Oracle>> handles;
  for (unsigned w = 1; w < jobs; ++w) handles.push_back(oracle.clone());

  const std::size_t chunk = std::max<std::size_t>(1, options.checkpoint_every);
  while (done < total) {
    const std::size_t end = std::min(total, done + chunk);
    std::vector<std::exception_ptr> errors(jobs);
    auto work = [&](unsigned w) {
      Oracle& handle = w == 0 ? oracle : *handles[w - 1];
      Vec f(model.n());
      try {
        for (std::size_t k = done + w; k < end; k += jobs) {
          const std::size_t r = k / M;
          const std::size_t ui = k % M;
          const Vec x = cover.center(r);
          const Vec& u = inputs[ui];
          model.step(x, u, f);
          const Vec fhat = handle.query(x, u);
          samples.set(k, r, ui, x, u, f, fhat);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    };
    if (jobs == 1) {
      work(0);
    } else {
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < jobs; ++w) pool.emplace_back(work, w);
    }
    for (const auto& e : errors) {
      if (!e) continue;
      try {
        std::rethrow_exception(e);
      } catch (const OracleError& oe) {
        std::string where = options.checkpoint
                                ? "; " + std::to_string(done) + " records saved to '" +
                                      options.checkpoint->string() + "'"
                                : "";
        throw OracleError(std::string(oe.what()) + where, oe.retries());
      }
    }
    if (options.checkpoint) {
      std::string rows;
      append_rows(rows, samples, done, end);
      std::ofstream out(*options.checkpoint, std::ios::app | std::ios::binary);
      out << rows;
    }
    done = end;
  }
  if (options.checkpoint) std::filesystem::remove(*options.checkpoint);
  meta.finished_at = utc_timestamp();
  return samples;
}

}  // namespace simgap
