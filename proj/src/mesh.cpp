#include "curlfem/mesh.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <unordered_map>

namespace curlfem {

namespace {

const GeometricShapeSet& shared_shapes(int order)
{
    static const GeometricShapeSet linear(1);
    static const GeometricShapeSet quadratic(2);
    return order == 1 ? linear : quadratic;
}

std::uint64_t edge_key(int a, int b)
{
    if (a > b)
        std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

double skeleton_det(const Eigen::Matrix3Xd& nodes, std::span<const int> c)
{
    Mat3 j;
    j.col(0) = nodes.col(c[1]) - nodes.col(c[0]);
    j.col(1) = nodes.col(c[2]) - nodes.col(c[0]);
    j.col(2) = nodes.col(c[3]) - nodes.col(c[0]);
    return j.determinant();
}

void reject_duplicate_vertices(const Eigen::Matrix3Xd& nodes, const std::vector<int>& used)
{
    if (used.empty())
        return;
    double scale = 0.0;
    for (int i : used)
        scale = std::max(scale, nodes.col(i).cwiseAbs().maxCoeff());
    const double tol = 1e-12 * std::max(scale, 1.0);

    std::vector<int> order(used);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return nodes(0, a) < nodes(0, b); });
    for (std::size_t i = 0; i < order.size(); ++i) {
        for (std::size_t j = i + 1; j < order.size() && nodes(0, order[j]) - nodes(0, order[i]) <= tol; ++j) {
            if ((nodes.col(order[i]) - nodes.col(order[j])).norm() <= tol)
                throw Error("duplicate vertices: nodes " + std::to_string(order[i]) + " and "
                            + std::to_string(order[j]) + " coincide");
        }
    }
}

} // namespace

// ---------------------------------------------------------------------------
// Mesh
// ---------------------------------------------------------------------------

Mesh Mesh::build(int order, Eigen::Matrix3Xd nodes, std::vector<int> cell_nodes)
{
    if (order != 1 && order != 2)
        throw Error("mesh order " + std::to_string(order) + " unsupported");
    const int npc = order == 1 ? 4 : 10;
    if (cell_nodes.empty())
        throw Error("mesh has zero cells");
    if (cell_nodes.size() % npc != 0)
        throw Error("cell node list length is not a multiple of " + std::to_string(npc));

    Mesh m;
    m.order_ = order;
    m.nodes_ = std::move(nodes);
    m.cell_nodes_ = std::move(cell_nodes);
    const int ncells = m.num_cells();
    const auto nnodes = m.nodes_.cols();

    std::vector<char> is_vertex(nnodes, 0);
    for (int c = 0; c < ncells; ++c) {
        auto cn = m.cell(c);
        for (int i = 0; i < npc; ++i) {
            if (cn[i] < 0 || cn[i] >= nnodes)
                throw Error("cell " + std::to_string(c) + " references missing node " + std::to_string(cn[i]));
            for (int j = 0; j < i; ++j)
                if (cn[i] == cn[j])
                    throw Error("cell " + std::to_string(c) + " repeats node " + std::to_string(cn[i]));
        }
        for (int i = 0; i < 4; ++i)
            is_vertex[cn[i]] = 1;
    }
    std::vector<int> vertices;
    for (Eigen::Index i = 0; i < nnodes; ++i)
        if (is_vertex[i])
            vertices.push_back(static_cast<int>(i));
    m.num_vertices_ = static_cast<int>(vertices.size());
    reject_duplicate_vertices(m.nodes_, vertices);

    // Positive orientation: swap local vertices 1 <-> 2 (edges 0<->1, 4<->5).
    for (int c = 0; c < ncells; ++c) {
        int* cn = m.cell_nodes_.data() + static_cast<std::size_t>(c) * npc;
        const double d = skeleton_det(m.nodes_, m.cell(c));
        if (!(std::abs(d) > 0.0))
            throw Error("degenerate cell " + std::to_string(c) + " (zero volume)");
        if (d < 0.0) {
            std::swap(cn[1], cn[2]);
            if (order == 2) {
                std::swap(cn[4], cn[5]);
                std::swap(cn[8], cn[9]);
            }
        }
    }

    // Edges.
    {
        std::vector<std::pair<std::uint64_t, int>> keys; // (key, cell*6 + local)
        keys.reserve(static_cast<std::size_t>(ncells) * 6);
        for (int c = 0; c < ncells; ++c) {
            auto cn = m.cell(c);
            for (int e = 0; e < 6; ++e)
                keys.emplace_back(edge_key(cn[ReferenceTet::kEdges[e][0]], cn[ReferenceTet::kEdges[e][1]]), c * 6 + e);
        }
        std::sort(keys.begin(), keys.end());
        m.cell_edges_.resize(ncells);
        if (order == 2)
            m.edge_nodes_.clear();
        for (std::size_t i = 0; i < keys.size(); ++i) {
            if (i == 0 || keys[i].first != keys[i - 1].first) {
                m.edges_.push_back({static_cast<int>(keys[i].first >> 32), static_cast<int>(keys[i].first & 0xffffffffu)});
                if (order == 2)
                    m.edge_nodes_.push_back(m.cell(keys[i].second / 6)[4 + keys[i].second % 6]);
            }
            const int e = static_cast<int>(m.edges_.size()) - 1;
            const int c = keys[i].second / 6, le = keys[i].second % 6;
            m.cell_edges_[c][le] = e;
            if (order == 2 && m.cell(c)[4 + le] != m.edge_nodes_[e])
                throw Error("cells disagree on the mid-edge node of edge (" + std::to_string(m.edges_[e][0]) + ","
                            + std::to_string(m.edges_[e][1]) + ")");
        }
    }

    // Faces.
    {
        struct FaceKey {
            std::array<int, 3> v;
            int owner;
        };
        std::vector<FaceKey> keys;
        keys.reserve(static_cast<std::size_t>(ncells) * 4);
        for (int c = 0; c < ncells; ++c) {
            auto cn = m.cell(c);
            for (int f = 0; f < 4; ++f) {
                std::array<int, 3> v{cn[ReferenceTet::kFaces[f][0]], cn[ReferenceTet::kFaces[f][1]],
                                     cn[ReferenceTet::kFaces[f][2]]};
                std::sort(v.begin(), v.end());
                keys.push_back({v, c * 4 + f});
            }
        }
        std::sort(keys.begin(), keys.end(), [](const FaceKey& a, const FaceKey& b) {
            return a.v != b.v ? a.v < b.v : a.owner < b.owner;
        });
        m.cell_faces_.resize(ncells);
        for (std::size_t i = 0; i < keys.size(); ++i) {
            const int c = keys[i].owner / 4, lf = keys[i].owner % 4;
            if (i == 0 || keys[i].v != keys[i - 1].v) {
                m.faces_.push_back(keys[i].v);
                m.face_cells_.push_back({c, -1});
            } else {
                auto& fc = m.face_cells_.back();
                if (fc[1] >= 0)
                    throw Error("face shared by more than two cells (cell " + std::to_string(c) + ")");
                fc[1] = c;
            }
            m.cell_faces_[c][lf] = static_cast<int>(m.faces_.size()) - 1;
        }
    }

    // Boundary flags.
    m.boundary_edge_.assign(m.edges_.size(), 0);
    m.boundary_node_.assign(nnodes, 0);
    for (int c = 0; c < ncells; ++c) {
        for (int lf = 0; lf < 4; ++lf) {
            if (!m.is_boundary_face(m.cell_faces_[c][lf]))
                continue;
            const auto& fv = ReferenceTet::kFaces[lf];
            for (int i = 0; i < 3; ++i) {
                m.boundary_node_[m.cell(c)[fv[i]]] = 1;
                for (int j = i + 1; j < 3; ++j) {
                    for (int le = 0; le < 6; ++le) {
                        const auto& ev = ReferenceTet::kEdges[le];
                        if ((ev[0] == fv[i] && ev[1] == fv[j]) || (ev[0] == fv[j] && ev[1] == fv[i])) {
                            m.boundary_edge_[m.cell_edges_[c][le]] = 1;
                            if (order == 2)
                                m.boundary_node_[m.cell(c)[4 + le]] = 1;
                        }
                    }
                }
            }
        }
    }

    // Mesh size.
    m.diameters_.resize(ncells);
    for (int c = 0; c < ncells; ++c) {
        auto cn = m.cell(c);
        double d = 0.0;
        for (const auto& e : ReferenceTet::kEdges)
            d = std::max(d, (m.nodes_.col(cn[e[0]]) - m.nodes_.col(cn[e[1]])).norm());
        m.diameters_[c] = d;
        m.h_ = std::max(m.h_, d);
        m.mean_h_ += d / ncells;
    }
    return m;
}

std::vector<int> Mesh::boundary_faces() const
{
    std::vector<int> out;
    for (int f = 0; f < num_faces(); ++f)
        if (is_boundary_face(f))
            out.push_back(f);
    return out;
}

double Mesh::skeleton_volume(int c) const { return skeleton_det(nodes_, cell(c)) / 6.0; }

// ---------------------------------------------------------------------------
// GeometricMap
// ---------------------------------------------------------------------------

GeometricMap::GeometricMap(const Mesh& mesh, int cell)
    : cell_(cell), shapes_(&shared_shapes(mesh.order()))
{
    if (cell < 0 || cell >= mesh.num_cells())
        throw Error("cell index " + std::to_string(cell) + " out of range");
    auto cn = mesh.cell(cell);
    nodes_.resize(3, static_cast<Eigen::Index>(cn.size()));
    for (std::size_t i = 0; i < cn.size(); ++i)
        nodes_.col(static_cast<Eigen::Index>(i)) = mesh.node(cn[i]);

    origin_ = nodes_.col(0);
    for (int d = 0; d < 3; ++d)
        affine_jacobian_.col(d) = nodes_.col(d + 1) - origin_;

    affine_ = true;
    if (mesh.order() == 2) {
        const double tol = 1e-14 * std::max(1.0, nodes_.cwiseAbs().maxCoeff());
        for (int e = 0; e < 6; ++e) {
            const Vec3 mid = 0.5 * (nodes_.col(ReferenceTet::kEdges[e][0]) + nodes_.col(ReferenceTet::kEdges[e][1]));
            if ((nodes_.col(4 + e) - mid).cwiseAbs().maxCoeff() > tol)
                affine_ = false;
        }
    }
}

Vec3 GeometricMap::point(const Vec3& xhat) const
{
    if (affine_)
        return origin_ + affine_jacobian_ * xhat;
    return nodes_ * shapes_->values(xhat);
}

Mat3 GeometricMap::jacobian(const Vec3& xhat) const
{
    if (affine_)
        return affine_jacobian_;
    return nodes_ * shapes_->gradients(xhat);
}

GeometricMap element_map(const Mesh& mesh, int cell) { return GeometricMap(mesh, cell); }

MeshQualityReport quality_check(const Mesh& mesh, int sample_exactness)
{
    const auto& rule = quadrature(sample_exactness);
    const int ncells = mesh.num_cells();

    struct CellStats {
        double min_det, max_det, jac, inv_jac;
    };
    std::vector<CellStats> stats(ncells);
    parallel_for(static_cast<std::size_t>(ncells), [&](std::size_t c) {
        const GeometricMap map(mesh, static_cast<int>(c));
        CellStats s{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), 0.0, 0.0};
        for (Eigen::Index q = 0; q < rule.size(); ++q) {
            const Mat3 j = map.jacobian(rule.points.col(q));
            const double d = j.determinant();
            s.min_det = std::min(s.min_det, d);
            s.max_det = std::max(s.max_det, d);
            const Vec3 sv = Eigen::JacobiSVD<Mat3>(j).singularValues();
            s.jac = std::max(s.jac, sv(0));
            s.inv_jac = std::max(s.inv_jac, sv(2) > 0.0 ? 1.0 / sv(2) : std::numeric_limits<double>::infinity());
        }
        stats[c] = s;
    });

    MeshQualityReport r;
    r.h = mesh.h();
    r.sample_exactness = sample_exactness;
    r.min_det = std::numeric_limits<double>::infinity();
    r.max_det = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < ncells; ++c) {
        const auto& s = stats[c];
        r.min_det = std::min(r.min_det, s.min_det);
        r.max_det = std::max(r.max_det, s.max_det);
        if (s.min_det <= 0.0)
            r.nonpositive_cells.push_back(c);
        else
            r.theta = std::max(r.theta, s.max_det / s.min_det);
        r.jacobian_scale = std::max(r.jacobian_scale, s.jac / mesh.h());
        r.inverse_jacobian_scale = std::max(r.inverse_jacobian_scale, s.inv_jac * mesh.h());
    }
    return r;
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

namespace {

struct TetSoup {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 4>> cells;
};

std::vector<char> boundary_edge_flags(const TetSoup& soup, std::unordered_map<std::uint64_t, char>& flags)
{
    std::map<std::array<int, 3>, int> face_count;
    for (const auto& c : soup.cells)
        for (const auto& f : ReferenceTet::kFaces) {
            std::array<int, 3> v{c[f[0]], c[f[1]], c[f[2]]};
            std::sort(v.begin(), v.end());
            ++face_count[v];
        }
    flags.clear();
    std::vector<char> boundary_vertex(soup.vertices.size(), 0);
    for (const auto& [v, n] : face_count) {
        if (n != 1)
            continue;
        flags[edge_key(v[0], v[1])] = 1;
        flags[edge_key(v[0], v[2])] = 1;
        flags[edge_key(v[1], v[2])] = 1;
        for (int i : v)
            boundary_vertex[i] = 1;
    }
    return boundary_vertex;
}

// Uniform red refinement with the Bey child ordering.
TetSoup refine(const TetSoup& coarse, bool project_boundary)
{
    std::unordered_map<std::uint64_t, char> boundary;
    boundary_edge_flags(coarse, boundary);

    TetSoup fine;
    fine.vertices = coarse.vertices;
    std::unordered_map<std::uint64_t, int> mids;
    auto mid = [&](int a, int b) {
        const auto key = edge_key(a, b);
        auto it = mids.find(key);
        if (it != mids.end())
            return it->second;
        Vec3 p = 0.5 * (coarse.vertices[a] + coarse.vertices[b]);
        if (project_boundary && boundary.count(key))
            p.normalize();
        fine.vertices.push_back(p);
        const int id = static_cast<int>(fine.vertices.size()) - 1;
        mids.emplace(key, id);
        return id;
    };

    fine.cells.reserve(coarse.cells.size() * 8);
    for (const auto& c : coarse.cells) {
        const int x0 = c[0], x1 = c[1], x2 = c[2], x3 = c[3];
        const int x01 = mid(x0, x1), x02 = mid(x0, x2), x03 = mid(x0, x3);
        const int x12 = mid(x1, x2), x13 = mid(x1, x3), x23 = mid(x2, x3);
        fine.cells.push_back({x0, x01, x02, x03});
        fine.cells.push_back({x01, x1, x12, x13});
        fine.cells.push_back({x02, x12, x2, x23});
        fine.cells.push_back({x03, x13, x23, x3});
        fine.cells.push_back({x01, x02, x03, x13});
        fine.cells.push_back({x01, x02, x12, x13});
        fine.cells.push_back({x02, x03, x13, x23});
        fine.cells.push_back({x02, x12, x13, x23});
    }
    return fine;
}

Mesh finalize(const TetSoup& soup, int order, bool project_boundary)
{
    const auto nv = static_cast<Eigen::Index>(soup.vertices.size());
    std::vector<int> cells;
    if (order == 1) {
        Eigen::Matrix3Xd nodes(3, nv);
        for (Eigen::Index i = 0; i < nv; ++i)
            nodes.col(i) = soup.vertices[i];
        cells.reserve(soup.cells.size() * 4);
        for (const auto& c : soup.cells)
            cells.insert(cells.end(), c.begin(), c.end());
        return Mesh::build(1, std::move(nodes), std::move(cells));
    }

    std::unordered_map<std::uint64_t, char> boundary;
    boundary_edge_flags(soup, boundary);
    std::vector<Vec3> nodes(soup.vertices);
    std::unordered_map<std::uint64_t, int> mids;
    cells.reserve(soup.cells.size() * 10);
    for (const auto& c : soup.cells) {
        cells.insert(cells.end(), c.begin(), c.end());
        for (const auto& e : ReferenceTet::kEdges) {
            const auto key = edge_key(c[e[0]], c[e[1]]);
            auto it = mids.find(key);
            if (it == mids.end()) {
                Vec3 p = 0.5 * (soup.vertices[c[e[0]]] + soup.vertices[c[e[1]]]);
                if (project_boundary && boundary.count(key))
                    p.normalize();
                nodes.push_back(p);
                it = mids.emplace(key, static_cast<int>(nodes.size()) - 1).first;
            }
            cells.push_back(it->second);
        }
    }
    Eigen::Matrix3Xd mat(3, static_cast<Eigen::Index>(nodes.size()));
    for (std::size_t i = 0; i < nodes.size(); ++i)
        mat.col(static_cast<Eigen::Index>(i)) = nodes[i];
    return Mesh::build(2, std::move(mat), std::move(cells));
}

void check_star_shaped(const Mesh& mesh)
{
    for (int f : mesh.boundary_faces()) {
        const auto& v = mesh.face(f);
        const Vec3 a = mesh.node(v[0]), b = mesh.node(v[1]), c = mesh.node(v[2]);
        Vec3 n = (b - a).cross(c - a);
        // Orient away from the owning cell's opposite vertex.
        const int cell = mesh.face_cells(f)[0];
        for (int corner = 0; corner < 4; ++corner) {
            const int node = mesh.cell(cell)[corner];
            if (node != v[0] && node != v[1] && node != v[2]) {
                if (n.dot(mesh.node(node) - a) > 0.0)
                    n = -n;
                break;
            }
        }
        if (!(n.dot(a) > 0.0))
            throw Error("ball mesh is not star-shaped with respect to the origin (boundary face "
                        + std::to_string(f) + ")");
    }
}

} // namespace

Mesh generate_ball_mesh(int level, int order)
{
    if (level < 0 || level > kMaxBallLevel)
        throw Error("ball mesh level " + std::to_string(level) + " outside [0, " + std::to_string(kMaxBallLevel) + "]");
    if (order != 1 && order != 2)
        throw Error("geometric order " + std::to_string(order) + " unsupported (expected 1 or 2)");

    TetSoup soup;
    soup.vertices = {Vec3::Zero(), Vec3::UnitX(), -Vec3::UnitX(), Vec3::UnitY(),
                     -Vec3::UnitY(), Vec3::UnitZ(), -Vec3::UnitZ()};
    for (int sx : {1, 2})
        for (int sy : {3, 4})
            for (int sz : {5, 6})
                soup.cells.push_back({0, sx, sy, sz});
    for (int l = 0; l < level; ++l)
        soup = refine(soup, true);

    Mesh mesh = finalize(soup, order, true);
    check_star_shaped(mesh);
    if (order == 2) {
        const auto report = quality_check(mesh, 5);
        if (!report.valid())
            throw Error("non-positive Jacobian after curving in cell " + std::to_string(report.nonpositive_cells.front()));
    }
    return mesh;
}

Mesh generate_cube_mesh(int level, int order)
{
    if (level < 0 || level > kMaxCubeLevel)
        throw Error("cube mesh level " + std::to_string(level) + " outside [0, " + std::to_string(kMaxCubeLevel) + "]");
    if (order != 1 && order != 2)
        throw Error("geometric order " + std::to_string(order) + " unsupported (expected 1 or 2)");
    const int n = 1 << level;
    auto id = [n](int i, int j, int k) { return (k * (n + 1) + j) * (n + 1) + i; };

    TetSoup soup;
    soup.vertices.resize(static_cast<std::size_t>((n + 1) * (n + 1) * (n + 1)));
    for (int k = 0; k <= n; ++k)
        for (int j = 0; j <= n; ++j)
            for (int i = 0; i <= n; ++i)
                soup.vertices[id(i, j, k)] = Vec3(i, j, k) / n;

    // Kuhn subdivision: one tetrahedron per axis permutation.
    const std::array<std::array<int, 3>, 6> perms{{{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                for (const auto& p : perms) {
                    std::array<int, 3> at{i, j, k};
                    std::array<int, 4> cell{};
                    cell[0] = id(at[0], at[1], at[2]);
                    for (int s = 0; s < 3; ++s) {
                        ++at[p[s]];
                        cell[s + 1] = id(at[0], at[1], at[2]);
                    }
                    soup.cells.push_back(cell);
                }
    return finalize(soup, order, false);
}

} // namespace curlfem
