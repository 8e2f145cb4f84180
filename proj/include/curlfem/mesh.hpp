#pragma once

#include "curlfem/reference.hpp"

#include <array>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace curlfem {

/// Tetrahedral mesh with straight (order 1) or quadratic (order 2) cells.
///
/// Cells list 4 corner nodes, followed for order 2 by the 6 mid-edge nodes in
/// ReferenceTet::kEdges order. Edges and faces are stored once, keyed by their
/// ascending corner-node indices and numbered in lexicographic order of that key;
/// this ascending order is the global orientation used by the DOF map.
/// Every cell is positively oriented (det of the vertex skeleton > 0).
class Mesh {
public:
    /// Validates and builds connectivity. Rejects empty meshes, out-of-range or
    /// repeated node indices, duplicate vertex coordinates, degenerate cells and
    /// faces shared by more than two cells. Negatively oriented cells are
    /// reoriented by swapping local vertices 1 and 2.
    static Mesh build(int order, Eigen::Matrix3Xd nodes, std::vector<int> cell_nodes);

    int order() const { return order_; }
    int nodes_per_cell() const { return order_ == 1 ? 4 : 10; }
    Eigen::Index num_nodes() const { return nodes_.cols(); }
    int num_cells() const { return static_cast<int>(cell_nodes_.size()) / nodes_per_cell(); }
    int num_vertices() const { return num_vertices_; }
    int num_edges() const { return static_cast<int>(edges_.size()); }
    int num_faces() const { return static_cast<int>(faces_.size()); }

    const Eigen::Matrix3Xd& nodes() const { return nodes_; }
    auto node(Eigen::Index i) const { return nodes_.col(i); }
    std::span<const int> cell(int c) const
    {
        return {cell_nodes_.data() + static_cast<std::size_t>(c) * nodes_per_cell(),
                static_cast<std::size_t>(nodes_per_cell())};
    }
    const std::vector<int>& cell_node_list() const { return cell_nodes_; }

    const std::array<int, 2>& edge(int e) const { return edges_[e]; }
    const std::array<int, 3>& face(int f) const { return faces_[f]; }
    const std::array<int, 6>& cell_edges(int c) const { return cell_edges_[c]; }
    const std::array<int, 4>& cell_faces(int c) const { return cell_faces_[c]; }
    /// Cells adjacent to a face; second entry is -1 on the boundary.
    const std::array<int, 2>& face_cells(int f) const { return face_cells_[f]; }
    /// Mid-edge node of an order-2 mesh (-1 for order 1).
    int edge_node(int e) const { return edge_nodes_.empty() ? -1 : edge_nodes_[e]; }

    bool is_boundary_face(int f) const { return face_cells_[f][1] < 0; }
    bool is_boundary_edge(int e) const { return boundary_edge_[e] != 0; }
    bool is_boundary_node(Eigen::Index n) const { return boundary_node_[n] != 0; }
    std::vector<int> boundary_faces() const;

    /// Max over cells of the diameter of the straight vertex skeleton.
    double h() const { return h_; }
    /// Mean over cells of the skeleton diameter; the mesh size used for convergence rates.
    double mean_h() const { return mean_h_; }
    double cell_diameter(int c) const { return diameters_[c]; }

    /// Straight-skeleton volume.
    double skeleton_volume(int c) const;

private:
    int order_ = 1;
    int num_vertices_ = 0;
    Eigen::Matrix3Xd nodes_;
    std::vector<int> cell_nodes_;
    std::vector<std::array<int, 2>> edges_;
    std::vector<std::array<int, 3>> faces_;
    std::vector<std::array<int, 6>> cell_edges_;
    std::vector<std::array<int, 4>> cell_faces_;
    std::vector<std::array<int, 2>> face_cells_;
    std::vector<int> edge_nodes_;
    std::vector<char> boundary_edge_;
    std::vector<char> boundary_node_;
    std::vector<double> diameters_;
    double h_ = 0.0;
    double mean_h_ = 0.0;
};

/// Geometric map T_K of one cell from the reference tetrahedron.
class GeometricMap {
public:
    GeometricMap(const Mesh& mesh, int cell);

    int cell() const { return cell_; }
    bool is_affine() const { return affine_; }
    const Eigen::Matrix3Xd& nodes() const { return nodes_; }

    Vec3 point(const Vec3& xhat) const;
    Mat3 jacobian(const Vec3& xhat) const;
    double det(const Vec3& xhat) const { return jacobian(xhat).determinant(); }
    /// det(dT) dT^{-1}.
    Mat3 cofactor(const Vec3& xhat) const { return curlfem::cofactor(jacobian(xhat)); }

private:
    int cell_;
    const GeometricShapeSet* shapes_;
    Eigen::Matrix3Xd nodes_;
    bool affine_;
    Vec3 origin_;
    Mat3 affine_jacobian_;
};

GeometricMap element_map(const Mesh& mesh, int cell);

struct MeshQualityReport {
    double h = 0.0;
    double min_det = 0.0;
    double max_det = 0.0;
    /// max over cells of (max det / min det) at the sample points.
    double theta = 1.0;
    /// sup ||dT_K|| / h and sup ||dT_K^{-1}|| h (spectral norms).
    double jacobian_scale = 0.0;
    double inverse_jacobian_scale = 0.0;
    std::vector<int> nonpositive_cells;
    int sample_exactness = 5;

    bool valid() const { return nonpositive_cells.empty(); }
};

/// Samples every cell at the points of quadrature(sample_exactness).
MeshQualityReport quality_check(const Mesh& mesh, int sample_exactness = 5);

/// Largest nesting level the built-in ball generator accepts.
inline constexpr int kMaxBallLevel = 5;
inline constexpr int kMaxCubeLevel = 5;

/// Octahedral seed (8 cells) refined `level` times by 8-subdivision; new
/// boundary vertices are projected radially onto the unit sphere. Order 2 adds
/// mid-edge nodes, projected onto the sphere on boundary edges only.
/// Throws Error if a curved cell has a non-positive Jacobian at a degree-5
/// quadrature point, or if a boundary face's plane does not see the origin on
/// its interior side (the mesh would not be star-shaped).
Mesh generate_ball_mesh(int level, int order);

/// [0,1]^3 split into 2^level cubes per axis, each cut into 6 tetrahedra along
/// the main diagonal.
Mesh generate_cube_mesh(int level, int order = 1);

/// ASCII Gmsh MSH 2.2 / 4.1 with 4-node or 10-node tetrahedra. Points, lines and
/// triangles are accepted as decoration and ignored; other elements are rejected.
Mesh read_gmsh(const std::filesystem::path& path);
Mesh parse_gmsh(std::istream& in, const std::string& source = "<stream>");

/// Writes ASCII MSH 2.2 with node tags 1..N in internal order.
void write_gmsh(const Mesh& mesh, std::ostream& out);
void write_gmsh(const Mesh& mesh, const std::filesystem::path& path);

/// Gmsh tet10 node i maps to internal node kGmshTet10ToInternal[i].
inline constexpr std::array<int, 10> kGmshTet10ToInternal{0, 1, 2, 3, 4, 7, 5, 6, 9, 8};

} // namespace curlfem
