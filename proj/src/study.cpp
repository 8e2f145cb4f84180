#include "curlfem/study.hpp"

#include <chrono>
#include <set>

namespace curlfem {

namespace {

const std::set<std::string> kStudies{"ball-convergence", "cube-control", "interpolation-rates", "domain-metrics"};

bool ball_study(const StudyConfig& c)
{
    return c.study != "cube-control";
}

} // namespace

void StudyConfig::validate() const
{
    if (!kStudies.count(study))
        throw Error("unknown study '" + study +
                    "' (expected ball-convergence, cube-control, interpolation-rates or domain-metrics)");
    if (k != 1 && k != 2)
        throw Error("k must be 1 or 2, got " + std::to_string(k));
    if (geo_order != 1 && geo_order != 2)
        throw Error("geometry order must be 1 or 2, got " + std::to_string(geo_order));
    if (levels < 2)
        throw Error("at least 2 levels are needed, got " + std::to_string(levels));
    if (first_level < 0)
        throw Error("first level must be non-negative");
    if (mesh_source != "builtin" && mesh_source != "gmsh")
        throw Error("mesh source must be builtin or gmsh, got '" + mesh_source + "'");
    if (mesh_source == "gmsh" && gmsh_pattern.find("{level}") == std::string::npos)
        throw Error("gmsh mesh source needs a pattern containing {level}");
    if (!(solver.tol > 0.0))
        throw Error("solver tolerance must be positive");
    material_preset(material_name());
}

std::string StudyConfig::material_name() const
{
    if (!materials.empty())
        return materials;
    return study == "cube-control" ? "cube" : "ball";
}

std::string StudyConfig::stem() const
{
    return study + "_k" + std::to_string(k) + "_g" + std::to_string(geo_order);
}

StudyConfig study_config_from_json(const nlohmann::json& j, StudyConfig c)
{
    if (!j.is_object())
        throw Error("study configuration must be a JSON object");
    static const std::set<std::string> keys{"study", "k", "geo_order", "levels", "first_level", "materials",
                                            "q1", "q2", "q3", "out", "mesh_source", "gmsh_pattern",
                                            "solver", "tol", "dump_matrices"};
    for (const auto& [key, value] : j.items())
        if (!keys.count(key))
            throw Error("unknown configuration key '" + key + "'");
    try {
        auto get = [&](const char* key, auto& target) {
            if (j.contains(key))
                target = j.at(key).get<std::decay_t<decltype(target)>>();
        };
        get("study", c.study);
        get("k", c.k);
        get("geo_order", c.geo_order);
        get("levels", c.levels);
        get("first_level", c.first_level);
        get("materials", c.materials);
        get("q1", c.quadrature.curl);
        get("q2", c.quadrature.mass);
        get("q3", c.quadrature.load);
        get("mesh_source", c.mesh_source);
        get("gmsh_pattern", c.gmsh_pattern);
        get("tol", c.solver.tol);
        get("dump_matrices", c.dump_matrices);
        if (j.contains("out"))
            c.out = j.at("out").get<std::string>();
        if (j.contains("solver"))
            c.solver.method = parse_solver_method(j.at("solver").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("invalid configuration value: ") + e.what());
    }
    return c;
}

nlohmann::json to_json(const StudyConfig& c)
{
    return {{"study", c.study},
            {"k", c.k},
            {"geo_order", c.geo_order},
            {"levels", c.levels},
            {"first_level", c.first_level},
            {"materials", c.material_name()},
            {"q1", c.quadrature.curl},
            {"q2", c.quadrature.mass},
            {"q3", c.quadrature.load},
            {"out", c.out.string()},
            {"mesh_source", c.mesh_source},
            {"gmsh_pattern", c.gmsh_pattern},
            {"solver", to_string(c.solver.method)},
            {"tol", c.solver.tol},
            {"dump_matrices", c.dump_matrices}};
}

Mesh study_mesh(const StudyConfig& c, int level)
{
    if (c.mesh_source == "gmsh") {
        std::string path = c.gmsh_pattern;
        path.replace(path.find("{level}"), 7, std::to_string(level));
        return read_gmsh(path);
    }
    return ball_study(c) ? generate_ball_mesh(level, c.geo_order) : generate_cube_mesh(level, c.geo_order);
}

StudyResult run_study(const StudyConfig& config)
{
    config.validate();
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    StudyResult result;
    auto& report = result.report;
    report.study = config.study;
    report.k = config.k;
    report.geo_order = config.geo_order;
    report.materials = config.material_name();
    if (config.k > config.geo_order && ball_study(config))
        result.warnings.push_back("k = " + std::to_string(config.k) + " exceeds the geometry order " +
                                  std::to_string(config.geo_order) + "; isoparametric rates are not expected");

    const MaterialCoefficients materials = material_preset(config.material_name());
    const ComplexField exact = exact_solution_preset(config.material_name());
    std::string backend;
    for (int level = config.first_level; level < config.first_level + config.levels; ++level) {
        const auto t0 = clock::now();
        try {
            const Mesh mesh = study_mesh(config, level);
            if (mesh.order() != config.geo_order)
                result.warnings.push_back("level " + std::to_string(level) + ": mesh has geometry order " +
                                          std::to_string(mesh.order()));
            ConvergenceRow row;
            row.level = level;
            row.h = mesh.mean_h();
            auto dofs = std::make_shared<const DofMap>(mesh, config.k);
            std::optional<DomainMap> map;
            if (ball_study(config) && config.mesh_source == "builtin")
                map.emplace(radial_domain_map(mesh));

            if (config.study == "ball-convergence" || config.study == "cube-control") {
                const AssembledSystem full = assemble(dofs, materials, config.quadrature);
                for (const auto& w : full.record.warnings)
                    if (level == config.first_level)
                        result.warnings.push_back(w);
                const AssembledSystem sys = apply_pec(full);
                if (config.dump_matrices) {
                    std::filesystem::create_directories(config.out);
                    const std::string base = config.stem() + "_level" + std::to_string(level);
                    write_matrix_market(sys.matrix, config.out / (base + "_A.mtx"));
                    write_matrix_market(sys.rhs, config.out / (base + "_b.mtx"));
                }
                const SolveResult sol = solve(sys, config.solver);
                backend = sol.report.backend;
                const FemFunction u(dofs, sys.embed(sol.x));
                const ErrorNorms e = error_norms(u, exact);
                row.ndof = static_cast<long>(sys.matrix.rows());
                row.l2_error = e.l2;
                row.hcurl_error = e.hcurl;
                if (map)
                    row.pullback_error = pullback_error(*map, u, exact).hcurl;
            } else {
                const FemFunction u = global_interpolate(dofs, exact);
                const ErrorNorms e = error_norms(u, exact);
                row.ndof = dofs->num_dofs();
                row.l2_error = e.l2;
                row.hcurl_error = e.hcurl;
            }
            if (map && config.study != "interpolation-rates") {
                const DomainMetrics m = discrepancies(*map, mesh, 2);
                row.d0 = m.d0;
                row.d1 = m.d1;
                row.hausdorff = hausdorff_estimate(mesh);
            }
            row.seconds = std::chrono::duration<double>(clock::now() - t0).count();
            report.rows.push_back(row);
        } catch (const std::exception& e) {
            result.failure = "level " + std::to_string(level) + ": " + e.what();
            break;
        }
    }
    report.metadata["config"] = to_json(config);
    report.metadata["warnings"] = result.warnings;
    report.metadata["threads"] = thread_count();
    report.metadata["total_seconds"] = std::chrono::duration<double>(clock::now() - start).count();
    if (!backend.empty())
        report.metadata["solver_backend"] = backend;
    if (!result.ok())
        report.metadata["failure"] = result.failure;
    return result;
}

StudyResult run_and_emit(const StudyConfig& config)
{
    StudyResult result = run_study(config);
    emit_report(result.report, config.out, config.stem());
    return result;
}

} // namespace curlfem
