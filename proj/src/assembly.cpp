#include "curlfem/assembly.hpp"

#include <unsupported/Eigen/SparseExtra>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace curlfem {

// ---------------------------------------------------------------------------
// DofMap
// ---------------------------------------------------------------------------

DofMap::DofMap(const Mesh& mesh, int k) : mesh_(&mesh), k_(k)
{
    if (k != 1 && k != 2)
        throw Error("degree unsupported: " + std::to_string(k));
    dim_ = k * (k + 2) * (k + 3) / 2;
    const int ne = mesh.num_edges(), nf = mesh.num_faces(), nc = mesh.num_cells();
    ndofs_ = k * ne + (k == 2 ? 2 * nf : 0);

    dofs_.resize(static_cast<std::size_t>(nc) * dim_);
    reversed_.resize(static_cast<std::size_t>(nc) * 6);
    face_blocks_.assign(static_cast<std::size_t>(nc) * 4, Eigen::Matrix2i::Identity());
    owner_.assign(ndofs_, -1);
    owner_local_.assign(ndofs_, -1);

    for (int c = 0; c < nc; ++c) {
        const auto cn = mesh.cell(c);
        int* d = dofs_.data() + static_cast<std::size_t>(c) * dim_;
        for (int le = 0; le < 6; ++le) {
            const int g = mesh.cell_edges(c)[le];
            reversed_[c * 6 + le] = cn[ReferenceTet::kEdges[le][0]] > cn[ReferenceTet::kEdges[le][1]];
            for (int s = 0; s < k; ++s)
                d[le * k + s] = g * k + s;
        }
        if (k == 2) {
            for (int lf = 0; lf < 4; ++lf) {
                const int g = mesh.cell_faces(c)[lf];
                const auto& fv = ReferenceTet::kFaces[lf];
                // Parameter coordinates of the local corners in the global face chart.
                std::array<Eigen::Vector2i, 3> at;
                for (int i = 0; i < 3; ++i) {
                    int rank = 0;
                    for (int j = 0; j < 3; ++j)
                        rank += cn[fv[j]] < cn[fv[i]];
                    at[i] = rank == 0 ? Eigen::Vector2i(0, 0) : rank == 1 ? Eigen::Vector2i(1, 0) : Eigen::Vector2i(0, 1);
                }
                Eigen::Matrix2i p;
                p.col(0) = at[1] - at[0];
                p.col(1) = at[2] - at[0];
                face_blocks_[c * 4 + lf] = p.transpose();
                for (int s = 0; s < 2; ++s)
                    d[12 + 2 * lf + s] = 2 * ne + 2 * g + s;
            }
        }
        for (int j = 0; j < dim_; ++j)
            if (owner_[d[j]] < 0) {
                owner_[d[j]] = c;
                owner_local_[d[j]] = j;
            }
    }

    boundary_flag_.assign(ndofs_, 0);
    for (int e = 0; e < ne; ++e)
        if (mesh.is_boundary_edge(e))
            for (int s = 0; s < k; ++s)
                boundary_flag_[e * k + s] = 1;
    if (k == 2)
        for (int f = 0; f < nf; ++f)
            if (mesh.is_boundary_face(f))
                boundary_flag_[2 * ne + 2 * f] = boundary_flag_[2 * ne + 2 * f + 1] = 1;
    for (int i = 0; i < ndofs_; ++i)
        if (boundary_flag_[i])
            boundary_.push_back(i);
}

std::array<int, 6> DofMap::edge_signs(int c) const
{
    std::array<int, 6> s;
    for (int le = 0; le < 6; ++le)
        s[le] = edge_reversed(c, le) ? -1 : 1;
    return s;
}

Eigen::MatrixXd DofMap::transform(int c) const
{
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(dim_, dim_);
    for (int le = 0; le < 6; ++le) {
        const bool rev = edge_reversed(c, le);
        if (k_ == 1) {
            t(le, le) = rev ? -1.0 : 1.0;
        } else if (rev) {
            t(2 * le, 2 * le + 1) = -1.0;
            t(2 * le + 1, 2 * le) = -1.0;
        } else {
            t(2 * le, 2 * le) = t(2 * le + 1, 2 * le + 1) = 1.0;
        }
    }
    if (k_ == 2)
        for (int lf = 0; lf < 4; ++lf)
            t.block<2, 2>(12 + 2 * lf, 12 + 2 * lf) = face_transform(c, lf).cast<double>();
    return t;
}

Eigen::MatrixXd DofMap::inverse_transform(int c) const
{
    // Block-diagonal with integer unimodular blocks.
    Eigen::MatrixXd t = transform(c);
    Eigen::MatrixXd inv = Eigen::MatrixXd::Zero(dim_, dim_);
    for (int le = 0; le < 6; ++le)
        inv.block(le * k_, le * k_, k_, k_) = t.block(le * k_, le * k_, k_, k_).inverse().array().round().matrix();
    if (k_ == 2)
        for (int lf = 0; lf < 4; ++lf)
            inv.block<2, 2>(12 + 2 * lf, 12 + 2 * lf) =
                t.block<2, 2>(12 + 2 * lf, 12 + 2 * lf).inverse().array().round().matrix();
    return inv;
}

DofMap build_dof_map(const Mesh& mesh, int k) { return DofMap(mesh, k); }

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

namespace {

constexpr double kPi = std::numbers::pi;

CMat3 scalar_matrix(double s) { return (s * Mat3::Identity()).cast<Complex>(); }

} // namespace

Vec3 ball_current_real(const Vec3& x)
{
    const double r2 = x.squaredNorm();
    const double c = std::cos(0.5 * kPi * r2), s = std::sin(0.5 * kPi * r2);
    const double a = kPi * kPi / 8.0;
    return {x(0) - a * x(0) * x(1) * c,
            x(1) + (0.25 + a * (x(0) * x(0) + x(2) * x(2))) * c + 0.25 * kPi * s,
            x(2) - a * x(1) * x(2) * c};
}

MaterialCoefficients ball_materials()
{
    MaterialCoefficients m;
    m.name = "ball";
    m.mu_inverse = [](const Vec3&) { return scalar_matrix(0.5); };
    m.epsilon = [](const Vec3&) { return scalar_matrix(1.0); };
    m.omega = 1.0;
    m.current = [](const Vec3& x) -> CVec3 { return Complex(0.0, 1.0) * ball_current_real(x).cast<Complex>(); };
    m.real_materials = true;
    m.coercive = true;
    return m;
}

ComplexField ball_exact_solution()
{
    RealField e;
    e.value = [](const Vec3& x) -> Vec3 {
        return {x(0), x(1) + 0.25 * std::cos(0.5 * kPi * x.squaredNorm()), x(2)};
    };
    e.curl = [](const Vec3& x) -> Vec3 {
        const double w = 0.25 * kPi * std::sin(0.5 * kPi * x.squaredNorm());
        return {w * x(2), 0.0, -w * x(0)};
    };
    return to_complex(e);
}

namespace {

Vec3 cube_field(const Vec3& x)
{
    const Eigen::Array3d s = (kPi * x.array()).sin();
    return {s(1) * s(2), s(0) * s(2), s(0) * s(1)};
}

} // namespace

MaterialCoefficients cube_materials()
{
    MaterialCoefficients m;
    m.name = "cube";
    m.mu_inverse = [](const Vec3&) { return scalar_matrix(0.5); };
    m.epsilon = [](const Vec3&) { return scalar_matrix(1.0); };
    m.omega = 1.0;
    m.current = [](const Vec3& x) -> CVec3 {
        return Complex(0.0, kPi * kPi - 1.0) * cube_field(x).cast<Complex>();
    };
    m.real_materials = true;
    m.coercive = false;
    return m;
}

ComplexField cube_exact_solution()
{
    RealField e;
    e.value = cube_field;
    e.curl = [](const Vec3& x) -> Vec3 {
        const Eigen::Array3d s = (kPi * x.array()).sin(), c = (kPi * x.array()).cos();
        return kPi * Vec3(s(0) * (c(1) - c(2)), s(1) * (c(2) - c(0)), s(2) * (c(0) - c(1)));
    };
    return to_complex(e);
}

MaterialCoefficients material_preset(const std::string& name)
{
    if (name == "ball")
        return ball_materials();
    if (name == "cube")
        return cube_materials();
    throw Error("unknown material preset '" + name + "' (expected ball or cube)");
}

ComplexField exact_solution_preset(const std::string& name)
{
    if (name == "ball")
        return ball_exact_solution();
    if (name == "cube")
        return cube_exact_solution();
    throw Error("unknown material preset '" + name + "' (expected ball or cube)");
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

QuadratureDegrees default_quadrature(int k, int geo_order, int s)
{
    if (s < 0)
        s = k;
    QuadratureDegrees q;
    q.curl = std::max({2 * k + s - 3, 2 * (geo_order - 1) + 2 * k, 0});
    q.mass = q.load = std::max({3 * k + s - 3, 3 * geo_order, 0});
    return q;
}

Eigen::VectorXcd AssembledSystem::embed(const Eigen::VectorXcd& reduced_solution) const
{
    if (!reduced())
        return reduced_solution;
    if (reduced_solution.size() != static_cast<Eigen::Index>(free_dofs.size()))
        throw Error("reduced solution has the wrong size");
    Eigen::VectorXcd full = Eigen::VectorXcd::Zero(dofs->num_dofs());
    for (std::size_t i = 0; i < free_dofs.size(); ++i)
        full(free_dofs[i]) = reduced_solution(static_cast<Eigen::Index>(i));
    return full;
}

namespace {

// Column-compressed pattern of all DOF pairs sharing a cell.
SparseMatrix sparsity_pattern(const DofMap& dofs)
{
    const int n = dofs.num_dofs();
    std::vector<std::vector<int>> cols(n);
    for (int c = 0; c < dofs.mesh().num_cells(); ++c) {
        const auto d = dofs.cell_dofs(c);
        for (int j : d)
            cols[j].insert(cols[j].end(), d.begin(), d.end());
    }
    Eigen::VectorXi sizes(n);
    for (int j = 0; j < n; ++j) {
        std::sort(cols[j].begin(), cols[j].end());
        cols[j].erase(std::unique(cols[j].begin(), cols[j].end()), cols[j].end());
        sizes(j) = static_cast<int>(cols[j].size());
    }
    SparseMatrix a(n, n);
    a.reserve(sizes);
    for (int j = 0; j < n; ++j) {
        for (int i : cols[j])
            a.insert(i, j) = 0.0;
        std::vector<int>().swap(cols[j]);
    }
    a.makeCompressed();
    return a;
}

struct CellContribution {
    Eigen::MatrixXcd matrix;
    Eigen::VectorXcd vector;
};

} // namespace

AssembledSystem assemble(std::shared_ptr<const DofMap> dofs, const MaterialCoefficients& materials,
                         QuadratureDegrees degrees)
{
    const Mesh& mesh = dofs->mesh();
    const int k = dofs->degree();
    const QuadratureDegrees defaults = default_quadrature(k, mesh.order());
    if (degrees.curl < 0)
        degrees.curl = defaults.curl;
    if (degrees.mass < 0)
        degrees.mass = defaults.mass;
    if (degrees.load < 0)
        degrees.load = defaults.load;

    AssembledSystem sys;
    sys.dofs = dofs;
    sys.record.used = degrees;
    sys.record.required = {std::max(3 * k - 3, 0), 4 * k - 3, 4 * k - 3};
    if (degrees.curl < sys.record.required.curl)
        sys.record.warnings.push_back("curl quadrature exactness " + std::to_string(degrees.curl) + " below " +
                                      std::to_string(sys.record.required.curl));
    if (degrees.mass < sys.record.required.mass)
        sys.record.warnings.push_back("mass quadrature exactness " + std::to_string(degrees.mass) + " below " +
                                      std::to_string(sys.record.required.mass));
    if (degrees.load < sys.record.required.load)
        sys.record.warnings.push_back("load quadrature exactness " + std::to_string(degrees.load) + " below " +
                                      std::to_string(sys.record.required.load));

    const NedelecBasis& basis = nedelec_basis(k);
    const int dim = basis.dim();
    const QuadratureRule& rule_curl = quadrature(degrees.curl);
    const QuadratureRule& rule_mass = quadrature(degrees.mass);
    const QuadratureRule& rule_load = quadrature(degrees.load);
    const BasisTable tab_curl = basis.tabulate(rule_curl.points);
    const BasisTable tab_mass = basis.tabulate(rule_mass.points);
    const BasisTable tab_load = basis.tabulate(rule_load.points);
    const double mass_factor = materials.mass_factor();
    const Complex load_factor(0.0, -materials.omega);

    auto cell_contribution = [&](int c) {
        const GeometricMap map(mesh, c);
        auto checked = [&](const Vec3& xhat) {
            const Mat3 j = map.jacobian(xhat);
            if (!(j.determinant() > 0.0))
                throw Error("singular Jacobian in cell " + std::to_string(c));
            return j;
        };
        Eigen::MatrixXd a_curl = Eigen::MatrixXd::Zero(dim, dim), a_mass = Eigen::MatrixXd::Zero(dim, dim);
        Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(dim, dim);
        Eigen::VectorXcd b = Eigen::VectorXcd::Zero(dim);
        Eigen::Matrix3Xd phys(3, dim);

        for (Eigen::Index q = 0; q < rule_curl.size(); ++q) {
            const Vec3 xhat = rule_curl.points.col(q);
            const Mat3 j = checked(xhat);
            const double det = j.determinant();
            for (int i = 0; i < dim; ++i)
                phys.col(i) = j * tab_curl.curl(q, i) / det;
            const double w = rule_curl.weights(q) * det;
            if (materials.real_materials) {
                const Mat3 mu = materials.mu_inverse(map.point(xhat)).real();
                a_curl.noalias() += w * phys.transpose() * mu * phys;
            } else {
                const CMat3 mu = materials.mu_inverse(map.point(xhat));
                a.noalias() += w * phys.transpose().cast<Complex>() * mu * phys.cast<Complex>();
            }
        }
        for (Eigen::Index q = 0; q < rule_mass.size(); ++q) {
            const Vec3 xhat = rule_mass.points.col(q);
            const Mat3 j = checked(xhat);
            const Mat3 jit = j.inverse().transpose();
            for (int i = 0; i < dim; ++i)
                phys.col(i) = jit * tab_mass.value(q, i);
            const double w = mass_factor * rule_mass.weights(q) * j.determinant();
            if (materials.real_materials) {
                const Mat3 eps = materials.epsilon(map.point(xhat)).real();
                a_mass.noalias() += w * phys.transpose() * eps * phys;
            } else {
                const CMat3 eps = materials.epsilon(map.point(xhat));
                a.noalias() += w * phys.transpose().cast<Complex>() * eps * phys.cast<Complex>();
            }
        }
        for (Eigen::Index q = 0; q < rule_load.size(); ++q) {
            const Vec3 xhat = rule_load.points.col(q);
            const Mat3 j = checked(xhat);
            const Mat3 jit = j.inverse().transpose();
            for (int i = 0; i < dim; ++i)
                phys.col(i) = jit * tab_load.value(q, i);
            const CVec3 current = materials.current(map.point(xhat));
            b.noalias() += (load_factor * rule_load.weights(q) * j.determinant()) *
                           (phys.transpose().cast<Complex>() * current);
        }
        if (materials.real_materials)
            a += (a_curl + a_mass).cast<Complex>();

        const Eigen::MatrixXd t = dofs->transform(c);
        return CellContribution{t.transpose().cast<Complex>() * a * t.cast<Complex>(),
                                t.transpose().cast<Complex>() * b};
    };

    sys.matrix = sparsity_pattern(*dofs);
    sys.rhs = Eigen::VectorXcd::Zero(dofs->num_dofs());

    // Cells are integrated in parallel batches and scattered in cell order.
    const int nc = mesh.num_cells();
    constexpr int kBatch = 2048;
    std::vector<CellContribution> batch;
    for (int start = 0; start < nc; start += kBatch) {
        const int count = std::min(kBatch, nc - start);
        batch.assign(count, {});
        parallel_for(static_cast<std::size_t>(count),
                     [&](std::size_t i) { batch[i] = cell_contribution(start + static_cast<int>(i)); });
        for (int i = 0; i < count; ++i) {
            const auto d = dofs->cell_dofs(start + i);
            for (int cj = 0; cj < dim; ++cj) {
                const int col = d[cj];
                const int* begin = sys.matrix.innerIndexPtr() + sys.matrix.outerIndexPtr()[col];
                const int* end = sys.matrix.innerIndexPtr() + sys.matrix.outerIndexPtr()[col + 1];
                for (int ci = 0; ci < dim; ++ci) {
                    const int* pos = std::lower_bound(begin, end, d[ci]);
                    sys.matrix.valuePtr()[pos - sys.matrix.innerIndexPtr()] += batch[i].matrix(ci, cj);
                }
                sys.rhs(col) += batch[i].vector(cj);
            }
        }
    }
    return sys;
}

AssembledSystem assemble(const Mesh& mesh, int k, const MaterialCoefficients& materials, QuadratureDegrees degrees)
{
    return assemble(std::make_shared<const DofMap>(mesh, k), materials, degrees);
}

AssembledSystem apply_pec(const AssembledSystem& system)
{
    if (system.reduced())
        throw Error("system is already reduced");
    const DofMap& dofs = *system.dofs;
    const int n = dofs.num_dofs();
    std::vector<int> reduced_index(n, -1);
    AssembledSystem out;
    out.dofs = system.dofs;
    out.record = system.record;
    for (int i = 0; i < n; ++i)
        if (!dofs.is_boundary_dof(i)) {
            reduced_index[i] = static_cast<int>(out.free_dofs.size());
            out.free_dofs.push_back(i);
        }
    if (out.free_dofs.empty())
        throw Error("empty interior system");

    const auto m = static_cast<Eigen::Index>(out.free_dofs.size());
    Eigen::VectorXi sizes(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        int count = 0;
        for (SparseMatrix::InnerIterator it(system.matrix, out.free_dofs[j]); it; ++it)
            count += reduced_index[it.row()] >= 0;
        sizes(j) = count;
    }
    out.matrix.resize(m, m);
    out.matrix.reserve(sizes);
    out.rhs.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        for (SparseMatrix::InnerIterator it(system.matrix, out.free_dofs[j]); it; ++it)
            if (reduced_index[it.row()] >= 0)
                out.matrix.insert(reduced_index[it.row()], j) = it.value();
        out.rhs(j) = system.rhs(out.free_dofs[j]);
    }
    out.matrix.makeCompressed();
    return out;
}

void write_matrix_market(const SparseMatrix& matrix, const std::filesystem::path& path)
{
    if (!Eigen::saveMarket(matrix, path.string()))
        throw Error("cannot write " + path.string());
}

void write_matrix_market(const Eigen::VectorXcd& vector, const std::filesystem::path& path)
{
    if (!Eigen::saveMarketVector(vector, path.string()))
        throw Error("cannot write " + path.string());
}

} // namespace curlfem
