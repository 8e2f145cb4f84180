#pragma once

#include "curlfem/assembly.hpp"
#include "curlfem/transforms.hpp"

namespace curlfem {

/// A member of the global Nedelec space: coefficient vector over a DofMap.
class FemFunction {
public:
    FemFunction(std::shared_ptr<const DofMap> dofs, Eigen::VectorXcd coefficients);

    const DofMap& dofs() const { return *dofs_; }
    std::shared_ptr<const DofMap> dof_map() const { return dofs_; }
    const Mesh& mesh() const { return dofs_->mesh(); }
    int degree() const { return dofs_->degree(); }
    const Eigen::VectorXcd& coefficients() const { return coefficients_; }

    /// Coefficients of the reference basis on cell c (C_c times the global values).
    Eigen::VectorXcd local_coefficients(int c) const;

    struct Sample {
        CVec3 value;
        CVec3 curl;
    };
    /// Value dT^{-T} u and curl dT curl u / det at T_K(xhat).
    Sample evaluate(int cell, const Vec3& xhat) const;
    /// Same at a physical point of the cell (inverts T_K).
    Sample evaluate_physical(int cell, const Vec3& x) const;

private:
    std::shared_ptr<const DofMap> dofs_;
    Eigen::VectorXcd coefficients_;
};

/// r_K: local DOFs of psi_K(field) on the reference element.
Eigen::VectorXcd local_interpolate(const Mesh& mesh, int cell, int k, const ComplexField& field);

/// Pi_h: each global DOF is taken from its owner cell; edge DOFs from every
/// other cell sharing the edge are checked against it (Error on mismatch).
FemFunction global_interpolate(std::shared_ptr<const DofMap> dofs, const ComplexField& field);

/// The FemFunction as a field; points are located in the given cell only.
ComplexField cell_field(const FemFunction& u, int cell);

/// Finds the cell containing a physical point (bucket grid over cell bounding boxes).
class PointLocator {
public:
    explicit PointLocator(const Mesh& mesh);

    struct Location {
        int cell;
        Vec3 xhat;
    };
    /// Cell with the largest smallest barycentric coordinate among those
    /// containing x (tolerance 1e-10); cell = -1 if x is outside the mesh.
    Location locate(const Vec3& x) const;

private:
    const Mesh* mesh_;
    Vec3 lo_, cell_size_;
    int grid_;
    std::vector<std::vector<int>> buckets_;

    std::array<int, 3> bucket(const Vec3& x) const;
};

/// The FemFunction as a field on the whole mesh; throws Error outside it.
ComplexField as_field(std::shared_ptr<const FemFunction> u, std::shared_ptr<const PointLocator> locator);

} // namespace curlfem
