#include "curlfem/interpolation.hpp"

#include <doctest.h>

#include <atomic>
#include <random>

using namespace curlfem;

namespace {

std::mt19937 gen(17);
std::uniform_real_distribution<double> uni(-1.0, 1.0);

Vec3 random_reference_point()
{
    Eigen::Vector4d l;
    for (int i = 0; i < 4; ++i)
        l(i) = -std::log(0.5 * (uni(gen) + 1.0) + 1e-12);
    l /= l.sum();
    return l.tail<3>();
}

Vec3 random_face_point(int local_face)
{
    const auto& fv = ReferenceTet::kFaces[local_face];
    double p = 0.5 * (uni(gen) + 1), q = 0.5 * (uni(gen) + 1);
    if (p + q > 1)
        p = 1 - p, q = 1 - q;
    const Vec3 a = ReferenceTet::vertex(fv[0]);
    return a + p * (ReferenceTet::vertex(fv[1]) - a) + q * (ReferenceTet::vertex(fv[2]) - a);
}

std::shared_ptr<const FemFunction> random_function(const Mesh& mesh, int k)
{
    auto dofs = std::make_shared<const DofMap>(mesh, k);
    const Eigen::VectorXcd c =
        Eigen::VectorXcd::NullaryExpr(dofs->num_dofs(), [] { return Complex(uni(gen), uni(gen)); });
    return std::make_shared<const FemFunction>(dofs, c);
}

RealField sine_field()
{
    RealField f;
    f.value = [](const Vec3& x) { return Vec3(std::sin(2 * x(1)), std::sin(2 * x(2)), std::sin(2 * x(0))); };
    f.curl = [](const Vec3& x) {
        return Vec3(-2 * std::cos(2 * x(2)), -2 * std::cos(2 * x(0)), -2 * std::cos(2 * x(1)));
    };
    return f;
}

struct CellNorms {
    double error;
    double field;
    double interpolant;
};

// H(curl; K) norms by direct quadrature in physical coordinates.
CellNorms cell_norms(const FemFunction& u, int cell, const RealField& f)
{
    const GeometricMap map(u.mesh(), cell);
    const auto& rule = quadrature(12);
    CellNorms n{0, 0, 0};
    for (Eigen::Index q = 0; q < rule.size(); ++q) {
        const Vec3 xhat = rule.points.col(q);
        const Vec3 x = map.point(xhat);
        const double w = rule.weights(q) * std::abs(map.det(xhat));
        const auto s = u.evaluate(cell, xhat);
        const CVec3 v = f.value(x).cast<Complex>(), c = f.curl(x).cast<Complex>();
        n.error += w * ((s.value - v).squaredNorm() + (s.curl - c).squaredNorm());
        n.field += w * (v.squaredNorm() + c.squaredNorm());
        n.interpolant += w * (s.value.squaredNorm() + s.curl.squaredNorm());
    }
    return {std::sqrt(n.error), std::sqrt(n.field), std::sqrt(n.interpolant)};
}

// Single cell of size h at a fixed point; bend > 0 moves the mid nodes by bend h^2.
Mesh scaled_cell(double h, int order, double bend)
{
    Mat3 shape;
    shape << 1.0, 0.2, 0.1, 0.1, 0.9, 0.3, 0.0, 0.2, 1.1;
    const Vec3 p0(0.3, 0.2, 0.1);
    const GeometricShapeSet shapes(order);
    Eigen::Matrix3Xd nodes(3, shapes.size());
    for (int i = 0; i < shapes.size(); ++i) {
        const Vec3 xhat = shapes.nodes().col(i);
        nodes.col(i) = p0 + h * shape * xhat;
        if (i >= 4)
            nodes.col(i) += bend * h * h * Vec3(std::sin(3.0 * i), std::cos(5.0 * i), 0.5);
    }
    std::vector<int> conn(shapes.size());
    std::iota(conn.begin(), conn.end(), 0);
    return Mesh::build(order, nodes, conn);
}

} // namespace

TEST_CASE("tangential continuity across interior faces")
{
    for (int order : {1, 2}) {
        const Mesh mesh = generate_ball_mesh(1, order);
        for (int k : {1, 2}) {
            const auto u = random_function(mesh, k);
            double worst = 0.0;
            int checked = 0;
            for (int f = 0; f < mesh.num_faces() && checked < 200; f += 3) {
                if (mesh.is_boundary_face(f))
                    continue;
                const int c0 = mesh.face_cells(f)[0], c1 = mesh.face_cells(f)[1];
                const auto& cf = mesh.cell_faces(c0);
                const int lf = static_cast<int>(std::find(cf.begin(), cf.end(), f) - cf.begin());
                const GeometricMap map(mesh, c0);
                for (int s = 0; s < 3; ++s, ++checked) {
                    const Vec3 xhat = random_face_point(lf);
                    const auto& fv = ReferenceTet::kFaces[lf];
                    const Mat3 j = map.jacobian(xhat);
                    const Vec3 n = (j * (ReferenceTet::vertex(fv[1]) - ReferenceTet::vertex(fv[0])))
                                       .cross(j * (ReferenceTet::vertex(fv[2]) - ReferenceTet::vertex(fv[0])))
                                       .normalized();
                    const Vec3 x = map.point(xhat);
                    const CVec3 a = u->evaluate(c0, xhat).value;
                    const CVec3 b = u->evaluate_physical(c1, x).value;
                    worst = std::max(worst, n.cast<Complex>().cross(a - b).norm());
                }
            }
            INFO("order " << order << " k " << k);
            CHECK(checked > 50);
            CHECK(worst <= 1e-8);
        }
    }
}

TEST_CASE("global interpolation reproduces discrete functions")
{
    for (int order : {1, 2}) {
        const Mesh mesh = generate_ball_mesh(1, order);
        const auto locator = std::make_shared<const PointLocator>(mesh);
        for (int k : {1, 2}) {
            const auto u = random_function(mesh, k);
            const FemFunction back = global_interpolate(u->dof_map(), as_field(u, locator));
            INFO("order " << order << " k " << k);
            CHECK((back.coefficients() - u->coefficients()).cwiseAbs().maxCoeff() <= 1e-10);
        }
    }
}

TEST_CASE("local interpolation reproduces P^c_K on curved cells")
{
    const Mesh mesh = generate_ball_mesh(1, 2);
    for (int k : {1, 2}) {
        const auto u = random_function(mesh, k);
        for (int c = 0; c < mesh.num_cells(); c += 7) {
            const ComplexField f = cell_field(*u, c);
            const Eigen::VectorXcd l = local_interpolate(mesh, c, k, f);
            CHECK((l - u->local_coefficients(c)).cwiseAbs().maxCoeff() <= 1e-10);
            // Re-evaluation of the interpolant from its own coefficients.
            auto single = std::make_shared<const DofMap>(mesh, k);
            Eigen::VectorXcd g = Eigen::VectorXcd::Zero(single->num_dofs());
            const Eigen::VectorXcd gl = single->inverse_transform(c).cast<Complex>() * l;
            const auto d = single->cell_dofs(c);
            for (std::size_t i = 0; i < d.size(); ++i)
                g(d[i]) = gl(static_cast<Eigen::Index>(i));
            const FemFunction r(single, g);
            const GeometricMap map(mesh, c);
            for (int p = 0; p < 10; ++p) {
                const Vec3 xhat = random_reference_point();
                CHECK((r.evaluate(c, xhat).value - f.value(map.point(xhat))).norm() <= 1e-10);
            }
        }
    }
}

TEST_CASE("constant fields are interpolated exactly for k = 1")
{
    const Mesh mesh = generate_cube_mesh(1);
    const CVec3 c(Complex(1.0, -0.5), Complex(-2.0, 0.0), Complex(0.25, 3.0));
    ComplexField f;
    f.value = [c](const Vec3&) { return c; };
    const FemFunction u = global_interpolate(std::make_shared<const DofMap>(mesh, 1), f);
    for (int cell = 0; cell < mesh.num_cells(); ++cell)
        for (int p = 0; p < 4; ++p) {
            const auto s = u.evaluate(cell, random_reference_point());
            CHECK((s.value - c).norm() <= 1e-12);
            CHECK(s.curl.norm() <= 1e-12);
        }
}

TEST_CASE("interpolation is local to the cell closure")
{
    const Mesh mesh = generate_ball_mesh(2, 2);
    const int cell = mesh.num_cells() / 2;
    Vec3 centre = Vec3::Zero();
    for (int n : mesh.cell(cell).first(4))
        centre += mesh.node(n) / 4.0;
    const double radius = 1.2 * mesh.cell_diameter(cell);
    const ComplexField base = to_complex(sine_field());
    ComplexField bumped;
    bumped.value = [=](const Vec3& x) -> CVec3 {
        const double d = std::max(0.0, (x - centre).norm() - radius);
        return base.value(x) + CVec3::Constant(Complex(d * d * d, -d));
    };
    for (int k : {1, 2}) {
        CHECK((local_interpolate(mesh, cell, k, base) - local_interpolate(mesh, cell, k, bumped)).norm() == 0.0);
        // Negative control: the bump is visible globally.
        auto dofs = std::make_shared<const DofMap>(mesh, k);
        const auto a = global_interpolate(dofs, base), b = global_interpolate(dofs, bumped);
        CHECK((a.coefficients() - b.coefficients()).norm() > 1e-3);
        for (int i : dofs->cell_dofs(cell))
            CHECK(a.coefficients()(i) == b.coefficients()(i));
    }
}

TEST_CASE("inconsistent fields trigger the orientation check")
{
    const Mesh mesh = generate_ball_mesh(1, 1);
    auto calls = std::make_shared<std::atomic<int>>(0);
    ComplexField f;
    f.value = [calls](const Vec3&) { return CVec3::Constant(Complex(static_cast<double>(++*calls), 0.0)); };
    CHECK_THROWS_WITH(global_interpolate(std::make_shared<const DofMap>(mesh, 1), f),
                      doctest::Contains("orientation inconsistency"));
}

TEST_CASE("local interpolation error under cell shrinking")
{
    const RealField f = sine_field();
    const ComplexField fc = to_complex(f);
    for (int order : {1, 2}) {
        for (int k : {1, 2}) {
            std::vector<double> hs, errs, ratios;
            for (double h : {0.5, 0.25, 0.125, 0.0625}) {
                const Mesh mesh = scaled_cell(h, order, order == 2 ? 0.3 : 0.0);
                const FemFunction u = global_interpolate(std::make_shared<const DofMap>(mesh, k), fc);
                const auto n = cell_norms(u, 0, f);
                hs.push_back(h);
                // Normalised by |K|^{1/2} so that a smooth field has O(1) norm.
                const double vol = std::sqrt(mesh.skeleton_volume(0));
                errs.push_back(n.error / vol);
                ratios.push_back(n.interpolant / n.field);
            }
            for (std::size_t i = 1; i < hs.size(); ++i) {
                const double rate = std::log(errs[i - 1] / errs[i]) / std::log(hs[i - 1] / hs[i]);
                INFO("order " << order << " k " << k << " step " << i << " rate " << rate);
                CHECK(rate == doctest::Approx(k).epsilon(0.2 / k));
            }
            // Continuity: ||r_K U|| / ||U|| stays bounded and tends to 1.
            for (double r : ratios)
                CHECK((r > 0.5 && r < 2.0));
            CHECK(std::abs(ratios.back() - 1.0) < std::abs(ratios.front() - 1.0) + 1e-12);
        }
    }
}
