#pragma once

#include "curlfem/mesh.hpp"

#include <Eigen/Sparse>

#include <filesystem>
#include <memory>
#include <string>

namespace curlfem {

using SparseMatrix = Eigen::SparseMatrix<Complex>;

/// Global numbering of the Nedelec DOFs of a mesh.
///
/// DOFs are entity-major: edge e owns [k e, k e + k), face f (k = 2) owns
/// [k E + 2 f, k E + 2 f + 2). Global edges run from the lower to the higher
/// vertex index; global faces are parametrised from their sorted vertex triple.
/// On cell c the local DOF values are C_c times the cell's global DOF values,
/// with C_c a signed permutation on edges and a unimodular 2x2 block per face.
class DofMap {
public:
    DofMap(const Mesh& mesh, int k);

    const Mesh& mesh() const { return *mesh_; }
    int degree() const { return k_; }
    int local_dim() const { return dim_; }
    int num_dofs() const { return ndofs_; }

    std::span<const int> cell_dofs(int c) const
    {
        return {dofs_.data() + static_cast<std::size_t>(c) * dim_, static_cast<std::size_t>(dim_)};
    }

    /// Local edge runs against the global orientation.
    bool edge_reversed(int c, int local_edge) const { return reversed_[c * 6 + local_edge] != 0; }
    /// 2x2 block of C_c for a local face (k = 2).
    const Eigen::Matrix2i& face_transform(int c, int local_face) const { return face_blocks_[c * 4 + local_face]; }
    /// Edge orientation signs (+1 / -1) of a cell.
    std::array<int, 6> edge_signs(int c) const;

    /// Dense C_c (local = C_c global).
    Eigen::MatrixXd transform(int c) const;
    /// Dense C_c^{-1} (integer entries).
    Eigen::MatrixXd inverse_transform(int c) const;

    const std::vector<int>& boundary_dofs() const { return boundary_; }
    bool is_boundary_dof(int i) const { return boundary_flag_[i] != 0; }

    /// Cell whose local DOFs define global DOF i in interpolation (lowest cell index
    /// touching the entity), and the matching local DOF.
    int owner_cell(int i) const { return owner_[i]; }
    int owner_local(int i) const { return owner_local_[i]; }

private:
    const Mesh* mesh_;
    int k_, dim_, ndofs_;
    std::vector<int> dofs_;
    std::vector<char> reversed_;
    std::vector<Eigen::Matrix2i> face_blocks_;
    std::vector<int> boundary_;
    std::vector<char> boundary_flag_;
    std::vector<int> owner_, owner_local_;
};

DofMap build_dof_map(const Mesh& mesh, int k);

/// Coefficients of the time-harmonic Maxwell problem
///   curl(mu^{-1} curl E) -+ omega^2 eps E = -i omega J,
/// with the minus sign for the PEC cavity and the plus sign when coercive.
struct MaterialCoefficients {
    std::string name;
    std::function<CMat3(const Vec3&)> mu_inverse;
    std::function<CMat3(const Vec3&)> epsilon;
    double omega = 1.0;
    std::function<CVec3(const Vec3&)> current;
    /// mu^{-1} and eps take real values only.
    bool real_materials = true;
    bool coercive = false;

    double mass_factor() const { return (coercive ? 1.0 : -1.0) * omega * omega; }
};

/// Ball problem (coercive form): eps0 = 1, mu0 = 2, omega = 1 and the current
/// J = i [J1, J2, J3] whose solution is E = (x1, x2 + cos(pi |x|^2 / 2) / 4, x3),
/// i.e. curl curl E / 2 + E = [J1, J2, J3].
MaterialCoefficients ball_materials();
ComplexField ball_exact_solution();
/// Real part [J1, J2, J3] of the ball current divided by i.
Vec3 ball_current_real(const Vec3& x);

/// Cube cavity problem on [0,1]^3 with eps = 1, mu0 = 2, omega = 1 and
/// E = (sin(pi y) sin(pi z), sin(pi x) sin(pi z), sin(pi x) sin(pi y)),
/// so that curl curl E / 2 - E = (pi^2 - 1) E.
MaterialCoefficients cube_materials();
ComplexField cube_exact_solution();

/// Named presets: "ball" or "cube". Throws Error for other names.
MaterialCoefficients material_preset(const std::string& name);
ComplexField exact_solution_preset(const std::string& name);

/// Quadrature exactness for the curl (q1), mass (q2) and load (q3) terms.
struct QuadratureDegrees {
    int curl = -1;
    int mass = -1;
    int load = -1;
};

/// q1 = max(2k+s-3, 2(K-1)+2k), q2 = q3 = max(3k+s-3, 3K).
QuadratureDegrees default_quadrature(int k, int geo_order, int s = -1);

struct AssemblyRecord {
    QuadratureDegrees used;
    QuadratureDegrees required; ///< 2k+s-3 and 3k+s-3 for s = k
    std::vector<std::string> warnings;
};

/// A = [Phi_h(phi_j, phi_i)], b = [F_h(phi_i)]. After apply_pec the system
/// acts on the free DOFs only.
struct AssembledSystem {
    SparseMatrix matrix;
    Eigen::VectorXcd rhs;
    std::shared_ptr<const DofMap> dofs;
    AssemblyRecord record;
    /// Reduced index -> global DOF; empty before apply_pec.
    std::vector<int> free_dofs;

    bool reduced() const { return !free_dofs.empty(); }
    /// Full coefficient vector with zeros on the eliminated DOFs.
    Eigen::VectorXcd embed(const Eigen::VectorXcd& reduced_solution) const;
};

/// Quadrature-based assembly; negative degrees select default_quadrature(k, K).
AssembledSystem assemble(std::shared_ptr<const DofMap> dofs, const MaterialCoefficients& materials,
                         QuadratureDegrees degrees = {});
AssembledSystem assemble(const Mesh& mesh, int k, const MaterialCoefficients& materials,
                         QuadratureDegrees degrees = {});

/// Removes the boundary DOFs. Throws Error("empty interior system") if none remain.
AssembledSystem apply_pec(const AssembledSystem& system);

/// Matrix Market (coordinate complex general / array complex) dumps.
void write_matrix_market(const SparseMatrix& matrix, const std::filesystem::path& path);
void write_matrix_market(const Eigen::VectorXcd& vector, const std::filesystem::path& path);

} // namespace curlfem
