#include "curlfem/interpolation.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>

namespace curlfem {

FemFunction::FemFunction(std::shared_ptr<const DofMap> dofs, Eigen::VectorXcd coefficients)
    : dofs_(std::move(dofs)), coefficients_(std::move(coefficients))
{
    if (coefficients_.size() != dofs_->num_dofs())
        throw Error("coefficient vector has " + std::to_string(coefficients_.size()) + " entries, expected " +
                    std::to_string(dofs_->num_dofs()));
}

Eigen::VectorXcd FemFunction::local_coefficients(int c) const
{
    const auto d = dofs_->cell_dofs(c);
    Eigen::VectorXcd g(d.size());
    for (std::size_t i = 0; i < d.size(); ++i)
        g(static_cast<Eigen::Index>(i)) = coefficients_(d[i]);
    return dofs_->transform(c).cast<Complex>() * g;
}

FemFunction::Sample FemFunction::evaluate(int cell, const Vec3& xhat) const
{
    const auto [values, curls] = nedelec_basis(degree()).eval(xhat);
    const Eigen::VectorXcd l = local_coefficients(cell);
    const Mat3 j = GeometricMap(mesh(), cell).jacobian(xhat);
    const double det = j.determinant();
    if (!(det > 0.0))
        throw Error("singular Jacobian in cell " + std::to_string(cell));
    const CVec3 v = values.cast<Complex>() * l;
    const CVec3 c = curls.cast<Complex>() * l;
    return {j.inverse().transpose().cast<Complex>() * v, (j / det).cast<Complex>() * c};
}

FemFunction::Sample FemFunction::evaluate_physical(int cell, const Vec3& x) const
{
    const ElementPullback pb(GeometricMap(mesh(), cell));
    Vec3 xhat = pb.reference_point(x);
    // Clamp round-off just outside the closed reference cell.
    const Eigen::Vector4d lambda = ReferenceTet::barycentric(xhat).cwiseMax(0.0);
    xhat = lambda.tail<3>() / lambda.sum();
    return evaluate(cell, xhat);
}

Eigen::VectorXcd local_interpolate(const Mesh& mesh, int cell, int k, const ComplexField& field)
{
    const ElementPullback pb(GeometricMap(mesh, cell));
    ComplexField values_only;
    values_only.value = field.value;
    const ComplexField pulled = pb.pull(values_only);
    return nedelec_basis(k).apply_dofs<Complex>(pulled.value);
}

FemFunction global_interpolate(std::shared_ptr<const DofMap> dofs, const ComplexField& field)
{
    const Mesh& mesh = dofs->mesh();
    const int k = dofs->degree();
    const int dim = dofs->local_dim();
    const int nc = mesh.num_cells();
    Eigen::MatrixXcd per_cell(dim, nc);
    parallel_for(static_cast<std::size_t>(nc), [&](std::size_t ci) {
        const int c = static_cast<int>(ci);
        per_cell.col(c) = dofs->inverse_transform(c).cast<Complex>() * local_interpolate(mesh, c, k, field);
    });

    Eigen::VectorXcd g(dofs->num_dofs());
    for (int i = 0; i < dofs->num_dofs(); ++i)
        g(i) = per_cell(dofs->owner_local(i), dofs->owner_cell(i));

    const double scale = 1.0 + (nc > 0 ? per_cell.cwiseAbs().maxCoeff() : 0.0);
    for (int c = 0; c < nc; ++c) {
        const auto d = dofs->cell_dofs(c);
        for (int j = 0; j < 6 * k; ++j)
            if (std::abs(per_cell(j, c) - g(d[j])) > 1e-9 * scale)
                throw Error("orientation inconsistency at DOF " + std::to_string(d[j]) + " (cell " +
                            std::to_string(c) + ")");
    }
    return FemFunction(std::move(dofs), std::move(g));
}

ComplexField cell_field(const FemFunction& u, int cell)
{
    ComplexField f;
    f.value = [u, cell](const Vec3& x) -> CVec3 { return u.evaluate_physical(cell, x).value; };
    f.curl = [u, cell](const Vec3& x) -> CVec3 { return u.evaluate_physical(cell, x).curl; };
    return f;
}

PointLocator::PointLocator(const Mesh& mesh) : mesh_(&mesh)
{
    const int nc = mesh.num_cells();
    std::vector<Eigen::AlignedBox3d> boxes(nc);
    Eigen::AlignedBox3d all;
    for (int c = 0; c < nc; ++c) {
        for (int n : mesh.cell(c))
            boxes[c].extend(Vec3(mesh.node(n)));
        // Curved cells may bulge past their nodes.
        const double pad = 0.1 * mesh.cell_diameter(c) + 1e-12;
        boxes[c].min().array() -= pad;
        boxes[c].max().array() += pad;
        all.extend(boxes[c]);
    }
    grid_ = std::clamp(static_cast<int>(std::ceil(std::cbrt(static_cast<double>(nc)))), 1, 128);
    lo_ = all.min();
    cell_size_ = (all.max() - all.min()) / grid_;
    buckets_.assign(static_cast<std::size_t>(grid_) * grid_ * grid_, {});
    for (int c = 0; c < nc; ++c) {
        const auto a = bucket(boxes[c].min()), b = bucket(boxes[c].max());
        for (int x = a[0]; x <= b[0]; ++x)
            for (int y = a[1]; y <= b[1]; ++y)
                for (int z = a[2]; z <= b[2]; ++z)
                    buckets_[(static_cast<std::size_t>(x) * grid_ + y) * grid_ + z].push_back(c);
    }
}

std::array<int, 3> PointLocator::bucket(const Vec3& x) const
{
    std::array<int, 3> b;
    for (int d = 0; d < 3; ++d)
        b[d] = std::clamp(static_cast<int>(std::floor((x(d) - lo_(d)) / cell_size_(d))), 0, grid_ - 1);
    return b;
}

PointLocator::Location PointLocator::locate(const Vec3& x) const
{
    const auto b = bucket(x);
    Location best{-1, Vec3::Zero()};
    double best_margin = -1e-10;
    for (int c : buckets_[(static_cast<std::size_t>(b[0]) * grid_ + b[1]) * grid_ + b[2]]) {
        const GeometricMap map(*mesh_, c);
        Vec3 xhat = Vec3::Constant(0.25);
        for (int it = 0; it < 30; ++it) {
            const Vec3 step = map.jacobian(xhat).partialPivLu().solve(map.point(xhat) - x);
            xhat -= step;
            if (map.is_affine() || step.norm() < 1e-15 || xhat.norm() > 10.0)
                break;
        }
        const double margin = ReferenceTet::barycentric(xhat).minCoeff();
        if (margin > best_margin && (map.point(xhat) - x).norm() <= 1e-10 * (1.0 + x.norm())) {
            best_margin = margin;
            best = {c, xhat};
        }
    }
    if (best.cell >= 0) {
        const Eigen::Vector4d lambda = ReferenceTet::barycentric(best.xhat).cwiseMax(0.0);
        best.xhat = lambda.tail<3>() / lambda.sum();
    }
    return best;
}

ComplexField as_field(std::shared_ptr<const FemFunction> u, std::shared_ptr<const PointLocator> locator)
{
    auto sample = [u, locator](const Vec3& x) {
        const auto loc = locator->locate(x);
        if (loc.cell < 0)
            throw Error("point outside the mesh");
        return u->evaluate(loc.cell, loc.xhat);
    };
    ComplexField f;
    f.value = [sample](const Vec3& x) -> CVec3 { return sample(x).value; };
    f.curl = [sample](const Vec3& x) -> CVec3 { return sample(x).curl; };
    return f;
}

} // namespace curlfem
