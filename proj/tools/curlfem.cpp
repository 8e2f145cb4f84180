// Convergence studies for curl-conforming finite elements on the unit ball and cube.

#include "curlfem/study.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

using namespace curlfem;

namespace {

void print_report(const StudyResult& result)
{
    const auto& r = result.report;
    std::printf("%s  k=%d  geometry order=%d  materials=%s\n", r.study.c_str(), r.k, r.geo_order, r.materials.c_str());
    const auto cols = r.error_columns();
    std::printf("%5s %12s %9s", "level", "h", "ndof");
    for (const auto& c : cols)
        std::printf(" %15s", c.c_str());
    std::printf(" %9s\n", "seconds");
    for (const auto& row : r.sorted_rows()) {
        std::printf("%5d %12.5e %9ld %15.6e %15.6e", row.level, row.h, row.ndof, row.l2_error, row.hcurl_error);
        if (row.pullback_error && cols.size() > 2 && cols[2] == "pullback_error")
            std::printf(" %15.6e", *row.pullback_error);
        if (row.d0 && row.d1 && cols.back() == "d1")
            std::printf(" %15.6e %15.6e", *row.d0, *row.d1);
        std::printf(" %9.2f\n", row.seconds);
    }
    if (r.rows.size() >= 2) {
        std::printf("EOC (last 3 levels):");
        for (const auto& c : cols)
            std::printf("  %s %.3f", c.c_str(), r.slope(c));
        std::printf("\n");
    }
    for (const auto& w : result.warnings)
        std::fprintf(stderr, "warning: %s\n", w.c_str());
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Curl-conforming finite element convergence studies"};
    std::string config_file, solver;
    StudyConfig flags;
    std::string out;
    app.add_option("--config", config_file, "JSON configuration file; flags override its values")
        ->check(CLI::ExistingFile);
    auto* o_study = app.add_option("--study", flags.study, "ball-convergence | cube-control | interpolation-rates | domain-metrics");
    auto* o_k = app.add_option("--k", flags.k, "Nedelec degree (1 or 2)");
    auto* o_geo = app.add_option("--geo-order", flags.geo_order, "geometry order of the mesh (1 or 2)");
    auto* o_levels = app.add_option("--levels", flags.levels, "number of refinement levels (>= 2)");
    auto* o_first = app.add_option("--first-level", flags.first_level, "coarsest refinement level");
    auto* o_mat = app.add_option("--materials", flags.materials, "material preset (ball | cube)");
    auto* o_source = app.add_option("--mesh-source", flags.mesh_source, "builtin | gmsh");
    auto* o_pattern = app.add_option("--gmsh-pattern", flags.gmsh_pattern, "Gmsh file pattern with {level}");
    auto* o_out = app.add_option("--out", out, "output directory");
    auto* o_q1 = app.add_option("--q1", flags.quadrature.curl, "quadrature exactness of the curl term");
    auto* o_q2 = app.add_option("--q2", flags.quadrature.mass, "quadrature exactness of the mass term");
    auto* o_q3 = app.add_option("--q3", flags.quadrature.load, "quadrature exactness of the load term");
    auto* o_solver = app.add_option("--solver", solver, "direct | iterative");
    auto* o_tol = app.add_option("--tol", flags.solver.tol, "relative residual tolerance of the solver");
    auto* o_dump = app.add_flag("--dump-matrices", flags.dump_matrices, "write A and b in Matrix Market format");
    CLI11_PARSE(app, argc, argv);

    try {
        StudyConfig config;
        if (!config_file.empty()) {
            std::ifstream in(config_file);
            config = study_config_from_json(nlohmann::json::parse(in));
        }
        auto given = [](const CLI::Option* o) { return o->count() > 0; };
        if (given(o_study))
            config.study = flags.study;
        if (given(o_k))
            config.k = flags.k;
        if (given(o_geo))
            config.geo_order = flags.geo_order;
        if (given(o_levels))
            config.levels = flags.levels;
        if (given(o_first))
            config.first_level = flags.first_level;
        if (given(o_mat))
            config.materials = flags.materials;
        if (given(o_source))
            config.mesh_source = flags.mesh_source;
        if (given(o_pattern))
            config.gmsh_pattern = flags.gmsh_pattern;
        if (given(o_out))
            config.out = out;
        if (given(o_q1))
            config.quadrature.curl = flags.quadrature.curl;
        if (given(o_q2))
            config.quadrature.mass = flags.quadrature.mass;
        if (given(o_q3))
            config.quadrature.load = flags.quadrature.load;
        if (given(o_solver))
            config.solver.method = parse_solver_method(solver);
        if (given(o_tol))
            config.solver.tol = flags.solver.tol;
        if (given(o_dump))
            config.dump_matrices = flags.dump_matrices;

        const StudyResult result = run_and_emit(config);
        print_report(result);
        std::printf("wrote %s.{csv,svg,json} to %s\n", config.stem().c_str(), config.out.string().c_str());
        if (!result.ok()) {
            std::fprintf(stderr, "error: %s\n", result.failure.c_str());
            return 1;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
