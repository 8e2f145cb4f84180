#pragma once

#include "curlfem/common.hpp"

#include <array>
#include <span>
#include <vector>

namespace curlfem {

/// The unit tetrahedron with vertices 0, e1, e2, e3.
///
/// Local edge e joins kEdges[e][0] -> kEdges[e][1]; local face f is opposite
/// vertex f and lists its vertices in ascending order. Both enumerations are
/// part of the public contract (DOF numbering and Gmsh node mapping rely on them).
struct ReferenceTet {
    static constexpr std::array<std::array<int, 2>, 6> kEdges{{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};
    static constexpr std::array<std::array<int, 3>, 4> kFaces{{{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}}};

    static Vec3 vertex(int i);
    static constexpr double volume() { return 1.0 / 6.0; }

    /// Closed-set membership with absolute tolerance.
    static bool contains(const Vec3& x, double tol = 1e-10);

    /// Barycentric coordinates (lambda_0..lambda_3).
    static Eigen::Vector4d barycentric(const Vec3& x);
};

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

/// Quadrature rule on the unit simplex of dimension Dim (segment [0,1], unit
/// triangle, unit tetrahedron). Integrates every polynomial of total degree
/// <= exactness exactly (certified at construction).
template <int Dim>
struct SimplexRule {
    Eigen::Matrix<double, Dim, Eigen::Dynamic> points;
    Eigen::VectorXd weights;
    int exactness = 0;

    Eigen::Index size() const { return weights.size(); }

    template <typename F>
    auto integrate(F&& f) const
    {
        using R = decltype(f(points.col(0).eval()));
        R sum = weights(0) * f(points.col(0).eval());
        for (Eigen::Index q = 1; q < size(); ++q)
            sum += weights(q) * f(points.col(q).eval());
        return sum;
    }
};

using LineRule = SimplexRule<1>;
using TriangleRule = SimplexRule<2>;
using QuadratureRule = SimplexRule<3>;

/// Largest exactness degree the rule generator serves.
inline constexpr int kMaxQuadratureExactness = 30;

/// Rules are collapsed (conical-product) Gauss-Jacobi rules, cached and shared.
/// Throws Error if requested_exactness is negative or exceeds kMaxQuadratureExactness.
const QuadratureRule& quadrature(int requested_exactness);
const TriangleRule& triangle_quadrature(int requested_exactness);
const LineRule& line_quadrature(int requested_exactness);

/// Exact integral of x^a y^b z^c ... over the unit simplex: prod(a_i!) / (sum a_i + Dim)!.
double simplex_moment(std::span<const int> exponents);

/// Largest relative error of the rule over all monomials of degree <= degree.
template <int Dim>
double max_monomial_error(const SimplexRule<Dim>& rule, int degree);

/// Gauss-Jacobi nodes/weights on [0,1] for the weight (1-t)^alpha.
std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_jacobi(int n, double alpha);

// ---------------------------------------------------------------------------
// Geometric (Lagrange) shape functions
// ---------------------------------------------------------------------------

/// Nodal Lagrange shapes of order 1 (4 vertex nodes) or 2 (vertices followed by
/// the six edge midpoints in ReferenceTet::kEdges order).
class GeometricShapeSet {
public:
    explicit GeometricShapeSet(int order);

    int order() const { return order_; }
    int size() const { return order_ == 1 ? 4 : 10; }
    const Eigen::Matrix3Xd& nodes() const { return nodes_; }

    Eigen::VectorXd values(const Vec3& x) const;
    /// Row i is the gradient of shape i.
    Eigen::MatrixX3d gradients(const Vec3& x) const;

private:
    int order_;
    Eigen::Matrix3Xd nodes_;
};

GeometricShapeSet geometric_shapes(int order);

// ---------------------------------------------------------------------------
// Nedelec (first kind) elements
// ---------------------------------------------------------------------------

/// Which mesh entity a local DOF is attached to.
struct DofDescriptor {
    enum class Entity { edge, face };
    Entity entity;
    int index; ///< local edge or face number
    int slot;  ///< position within the entity's DOF block
};

/// Values and curls of all basis functions at a set of points; column
/// q*dim + j holds basis function j at point q.
struct BasisTable {
    int dim = 0;
    Eigen::Matrix3Xd values;
    Eigen::Matrix3Xd curls;

    auto value(Eigen::Index q, int j) const { return values.col(q * dim + j); }
    auto curl(Eigen::Index q, int j) const { return curls.col(q * dim + j); }
};

/// Nedelec space of degree k in {1, 2} on the reference tetrahedron.
///
/// DOFs, for edge a->b with t = x_b - x_a parametrised by s in [0,1]:
///   k=1: int u.t ds;  k=2: int u.t lambda_a ds, int u.t lambda_b ds.
/// For k=2, face (a,b,c) with F(u,v) = x_a + u(x_b-x_a) + v(x_c-x_a):
///   int u(F).F_u du dv,  int u(F).F_v du dv  over the unit triangle.
/// These functionals are invariant under the covariant pull-back, so the
/// same definitions hold on curved cells through their geometric map.
class NedelecBasis {
public:
    explicit NedelecBasis(int degree);

    int degree() const { return degree_; }
    int dim() const { return dim_; }
    int dofs_per_edge() const { return degree_; }
    int dofs_per_face() const { return degree_ == 2 ? 2 : 0; }
    const std::vector<DofDescriptor>& dofs() const { return dofs_; }

    /// Values (3 x dim) and curls (3 x dim) at a point of the closed reference
    /// tetrahedron. Throws Error for points outside it.
    std::pair<Eigen::Matrix3Xd, Eigen::Matrix3Xd> eval(const Vec3& x) const;

    BasisTable tabulate(const Eigen::Matrix3Xd& points) const;

    /// Points where the DOF functionals sample a field.
    const Eigen::Matrix3Xd& dof_points() const { return dof_points_; }
    /// dim x 3*npoints matrix: dofs = dof_weights() * [f(p_0); f(p_1); ...].
    const Eigen::MatrixXd& dof_weights() const { return dof_weights_; }

    /// Applies every DOF functional to a reference-domain field.
    template <typename Scalar, typename F>
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> apply_dofs(F&& field) const
    {
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1> samples(3 * dof_points_.cols());
        for (Eigen::Index q = 0; q < dof_points_.cols(); ++q)
            samples.template segment<3>(3 * q) = field(Vec3(dof_points_.col(q)));
        return dof_weights_.cast<Scalar>() * samples;
    }

    /// Coefficients of basis function j in the monomial basis: row c*M+m holds
    /// the coefficient of monomial m in component c.
    const Eigen::MatrixXd& coefficients() const { return coeffs_; }
    const std::vector<std::array<int, 3>>& monomials() const { return monomials_; }

private:
    int degree_;
    int dim_;
    std::vector<DofDescriptor> dofs_;
    std::vector<std::array<int, 3>> monomials_;
    Eigen::MatrixXd coeffs_;
    Eigen::Matrix3Xd dof_points_;
    Eigen::MatrixXd dof_weights_;

    void eval_unchecked(const Vec3& x, Eigen::Ref<Eigen::Matrix3Xd> values, Eigen::Ref<Eigen::Matrix3Xd> curls) const;
};

/// Throws Error("degree unsupported ...") unless k is 1 or 2.
NedelecBasis nedelec_space(int k);

/// Shared immutable instance for k in {1, 2}.
const NedelecBasis& nedelec_basis(int k);

/// Monomial spanning set of P_{k-1}^3 + {homogeneous degree k p : x.p = 0}
/// in the coefficient layout of NedelecBasis::coefficients(); columns are fields.
Eigen::MatrixXd nedelec_spanning_set(int k);

/// Exponent triples of all monomials of total degree <= degree (graded order).
std::vector<std::array<int, 3>> monomial_exponents(int degree);

} // namespace curlfem
