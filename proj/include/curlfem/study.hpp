#pragma once

#include "curlfem/analysis.hpp"
#include "curlfem/solver.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace curlfem {

/// Configuration of one convergence study.
struct StudyConfig {
    /// ball-convergence, cube-control, interpolation-rates or domain-metrics.
    std::string study = "ball-convergence";
    int k = 1;
    int geo_order = 1;
    /// Number of refinement levels, run as first_level, first_level + 1, ...
    int levels = 3;
    int first_level = 1;
    /// Material preset; empty selects "cube" for cube-control and "ball" otherwise.
    std::string materials;
    QuadratureDegrees quadrature;
    std::filesystem::path out = "results";
    /// "builtin" or "gmsh"; gmsh reads gmsh_pattern with {level} replaced by the level.
    std::string mesh_source = "builtin";
    std::string gmsh_pattern;
    SolverOptions solver;
    /// Also write A and b of every level in Matrix Market format.
    bool dump_matrices = false;

    /// Throws Error on invalid values.
    void validate() const;
    std::string stem() const;
    std::string material_name() const;
};

/// Fields present in the object override the defaults; unknown keys are rejected.
StudyConfig study_config_from_json(const nlohmann::json& j, StudyConfig base = {});
nlohmann::json to_json(const StudyConfig& config);

struct StudyResult {
    ConvergenceReport report;
    std::vector<std::string> warnings;
    /// "level L: message" for the level that failed, empty on success.
    std::string failure;
    bool ok() const { return failure.empty(); }
};

/// The mesh of a level as configured (builtin generator or Gmsh file).
Mesh study_mesh(const StudyConfig& config, int level);

/// Runs every level (mesh, assemble, PEC, solve, errors) and returns the report.
/// A failing level stops the study; its error is kept in StudyResult::failure.
StudyResult run_study(const StudyConfig& config);

/// run_study followed by emit_report into config.out.
StudyResult run_and_emit(const StudyConfig& config);

} // namespace curlfem
