#pragma once

#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "simgap/gap.hpp"
#include "simgap/lipschitz.hpp"
#include "simgap/model.hpp"
#include "simgap/scp.hpp"
#include "simgap/synthesis.hpp"

namespace simgap {

using Json = nlohmann::json;

Json box_to_json(const StateBox& box);
StateBox box_from_json(const Json& j);
Json inputs_to_json(const InputGrid& inputs);
InputGrid inputs_from_json(const Json& j);

/// {dim, basis, q, q_reported, eta, tol, dedup_count, ...}; dim is 1-based in files.
Json solution_to_json(const ScpSolution& s);
ScpSolution solution_from_json(const Json& j, std::size_t n, std::size_t m);

Json lipschitz_to_json(const LipschitzEstimate& e);
LipschitzEstimate lipschitz_from_json(const Json& j);
/// {dim, L1, L2, L, method, inflation, seed, max_observed_slope, l1, l2}
Json estimate_to_json(std::size_t dim, const LipschitzEstimate& l1, const LipschitzEstimate& l2);

Json gap_to_json(const GapModel& gap);
GapModel gap_from_json(const Json& j);

Json sup_gamma_to_json(const SupGamma& s);
Json validation_to_json(const ValidationReport& r);
std::string validation_text(const ValidationReport& r);

/// CSV `cell_index,input_index,rank` over the winning set, plus a JSON sidecar
/// with the grid and synthesis settings.
void write_controller(const std::filesystem::path& csv, const ControllerTable& table,
                      const AbstractGrid& grid);
ControllerTable read_controller(const std::filesystem::path& csv, std::size_t cell_count);
/// One row per winning cell: its center.
void write_winning_set(const std::filesystem::path& csv, const ControllerTable& table,
                       const AbstractGrid& grid);

void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);

}  // namespace simgap
