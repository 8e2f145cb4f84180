#include "curlfem/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

namespace curlfem {

namespace {

struct Token {
    std::string_view text;
    int line;
};

// Whitespace token stream over the whole file; numbers are parsed with
// std::from_chars so results do not depend on the locale.
class TokenStream {
public:
    TokenStream(const std::string& text, std::string source) : source_(std::move(source))
    {
        int line = 1;
        std::size_t i = 0;
        while (i < text.size()) {
            const char ch = text[i];
            if (ch == '\n') {
                ++line;
                ++i;
            } else if (ch == ' ' || ch == '\t' || ch == '\r') {
                ++i;
            } else {
                const std::size_t start = i;
                while (i < text.size() && text[i] != ' ' && text[i] != '\t' && text[i] != '\r' && text[i] != '\n')
                    ++i;
                tokens_.push_back({std::string_view(text).substr(start, i - start), line});
            }
        }
    }

    bool done() const { return pos_ >= tokens_.size(); }
    const Token& peek() const
    {
        if (done())
            fail("unexpected end of file");
        return tokens_[pos_];
    }
    std::string_view next() { return tokens_[advance()].text; }

    void set_section(std::string section) { section_ = std::move(section); }

    template <typename T>
    T number()
    {
        const std::size_t at = advance();
        const auto sv = tokens_[at].text;
        T value{};
        auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), value);
        if (ec != std::errc() || ptr != sv.data() + sv.size())
            fail_at(at, "expected a number, found '" + std::string(sv) + "'");
        return value;
    }

    void expect(std::string_view word)
    {
        const std::size_t at = advance();
        if (tokens_[at].text != word)
            fail_at(at, "expected '" + std::string(word) + "', found '" + std::string(tokens_[at].text) + "'");
    }

    [[noreturn]] void fail(const std::string& msg) const
    {
        const int line = tokens_.empty() ? 0 : tokens_[std::min(pos_, tokens_.size() - 1)].line;
        throw ParseError(source_ + ":" + std::to_string(line) + ": [" + section_ + "] " + msg);
    }

private:
    std::string source_;
    std::string section_ = "header";
    std::vector<Token> tokens_;
    std::size_t pos_ = 0;

    std::size_t advance()
    {
        if (done())
            fail("unexpected end of file");
        return pos_++;
    }

    [[noreturn]] void fail_at(std::size_t at, const std::string& msg) const
    {
        throw ParseError(source_ + ":" + std::to_string(tokens_[at].line) + ": [" + section_ + "] " + msg);
    }
};

// Nodes per element type for what we accept: tets are cells, the rest decoration.
int element_node_count(int type)
{
    switch (type) {
    case 4: return 4;   // tet4
    case 11: return 10; // tet10
    case 15: return 1;  // point
    case 1: return 2;   // line2
    case 8: return 3;   // line3
    case 2: return 3;   // tri3
    case 9: return 6;   // tri6
    default: return -1;
    }
}

struct RawMesh {
    std::map<long, Vec3> nodes;
    std::vector<std::vector<long>> tets;
    int tet_type = 0;
};

void add_element(TokenStream& ts, RawMesh& raw, int type, std::vector<long> node_tags)
{
    if (type != 4 && type != 11)
        return;
    if (raw.tet_type != 0 && raw.tet_type != type)
        ts.fail("mixed tet4 and tet10 elements");
    raw.tet_type = type;
    raw.tets.push_back(std::move(node_tags));
}

int check_type(TokenStream& ts, int type)
{
    const int n = element_node_count(type);
    if (n < 0)
        ts.fail("unsupported element type " + std::to_string(type));
    return n;
}

void skip_section(TokenStream& ts, std::string_view name)
{
    const std::string end = "$End" + std::string(name.substr(1));
    while (ts.next() != end) {
    }
}

void parse_nodes_v2(TokenStream& ts, RawMesh& raw)
{
    const long n = ts.number<long>();
    for (long i = 0; i < n; ++i) {
        const long tag = ts.number<long>();
        Vec3 x;
        x(0) = ts.number<double>();
        x(1) = ts.number<double>();
        x(2) = ts.number<double>();
        if (!raw.nodes.emplace(tag, x).second)
            ts.fail("duplicate node tag " + std::to_string(tag));
    }
    ts.expect("$EndNodes");
}

void parse_elements_v2(TokenStream& ts, RawMesh& raw)
{
    const long n = ts.number<long>();
    for (long i = 0; i < n; ++i) {
        (void)ts.number<long>();
        const int type = ts.number<int>();
        const int nn = check_type(ts, type);
        const int ntags = ts.number<int>();
        for (int t = 0; t < ntags; ++t)
            (void)ts.number<long>();
        std::vector<long> tags(nn);
        for (auto& t : tags)
            t = ts.number<long>();
        add_element(ts, raw, type, std::move(tags));
    }
    ts.expect("$EndElements");
}

void parse_nodes_v4(TokenStream& ts, RawMesh& raw)
{
    const long blocks = ts.number<long>();
    (void)ts.number<long>(); // numNodes
    (void)ts.number<long>(); // min tag
    (void)ts.number<long>(); // max tag
    for (long b = 0; b < blocks; ++b) {
        const int dim = ts.number<int>();
        (void)ts.number<int>(); // entity tag
        const int parametric = ts.number<int>();
        const long count = ts.number<long>();
        std::vector<long> tags(count);
        for (auto& t : tags)
            t = ts.number<long>();
        for (long i = 0; i < count; ++i) {
            Vec3 x;
            x(0) = ts.number<double>();
            x(1) = ts.number<double>();
            x(2) = ts.number<double>();
            if (parametric)
                for (int p = 0; p < dim; ++p)
                    (void)ts.number<double>();
            if (!raw.nodes.emplace(tags[i], x).second)
                ts.fail("duplicate node tag " + std::to_string(tags[i]));
        }
    }
    ts.expect("$EndNodes");
}

void parse_elements_v4(TokenStream& ts, RawMesh& raw)
{
    const long blocks = ts.number<long>();
    (void)ts.number<long>();
    (void)ts.number<long>();
    (void)ts.number<long>();
    for (long b = 0; b < blocks; ++b) {
        (void)ts.number<int>(); // entity dim
        (void)ts.number<int>(); // entity tag
        const int type = ts.number<int>();
        const long count = ts.number<long>();
        const int nn = check_type(ts, type);
        for (long i = 0; i < count; ++i) {
            (void)ts.number<long>();
            std::vector<long> tags(nn);
            for (auto& t : tags)
                t = ts.number<long>();
            add_element(ts, raw, type, std::move(tags));
        }
    }
    ts.expect("$EndElements");
}

} // namespace

Mesh parse_gmsh(std::istream& in, const std::string& source)
{
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    TokenStream ts(text, source);

    RawMesh raw;
    int major = 0;
    bool have_nodes = false, have_elements = false;
    while (!ts.done()) {
        const std::string section(ts.next());
        if (section.empty() || section[0] != '$')
            ts.fail("expected a section header, found '" + section + "'");
        ts.set_section(section.substr(1));
        if (section == "$MeshFormat") {
            const std::string version(ts.next());
            const int file_type = ts.number<int>();
            (void)ts.number<int>(); // data size
            if (version == "2.2")
                major = 2;
            else if (version == "4.1")
                major = 4;
            else
                ts.fail("unsupported MSH version " + version + " (supported: 2.2, 4.1)");
            if (file_type != 0)
                ts.fail("binary MSH files are not supported");
            ts.expect("$EndMeshFormat");
        } else if (section == "$Nodes") {
            if (major == 0)
                ts.fail("$Nodes before $MeshFormat");
            major == 2 ? parse_nodes_v2(ts, raw) : parse_nodes_v4(ts, raw);
            have_nodes = true;
        } else if (section == "$Elements") {
            if (major == 0)
                ts.fail("$Elements before $MeshFormat");
            major == 2 ? parse_elements_v2(ts, raw) : parse_elements_v4(ts, raw);
            have_elements = true;
        } else {
            skip_section(ts, section);
        }
    }
    ts.set_section("mesh");
    if (!have_nodes || !have_elements)
        ts.fail("missing $Nodes or $Elements section");
    if (raw.tets.empty())
        ts.fail("no tetrahedral elements");

    // Keep referenced nodes only, in ascending tag order.
    std::map<long, int> index;
    for (const auto& t : raw.tets)
        for (long tag : t) {
            if (!raw.nodes.count(tag))
                ts.fail("element references unknown node " + std::to_string(tag));
            index.emplace(tag, 0);
        }
    Eigen::Matrix3Xd nodes(3, static_cast<Eigen::Index>(index.size()));
    int next = 0;
    for (auto& [tag, id] : index) {
        id = next;
        nodes.col(next++) = raw.nodes.at(tag);
    }

    const int order = raw.tet_type == 4 ? 1 : 2;
    const int npc = order == 1 ? 4 : 10;
    std::vector<int> cells(raw.tets.size() * npc);
    for (std::size_t c = 0; c < raw.tets.size(); ++c)
        for (int i = 0; i < npc; ++i) {
            const int internal = order == 1 ? i : kGmshTet10ToInternal[i];
            cells[c * npc + internal] = index.at(raw.tets[c][i]);
        }
    try {
        return Mesh::build(order, std::move(nodes), std::move(cells));
    } catch (const Error& e) {
        ts.fail(e.what());
    }
}

Mesh read_gmsh(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ParseError("cannot open " + path.string());
    return parse_gmsh(in, path.string());
}

namespace {

std::string format_double(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

} // namespace

void write_gmsh(const Mesh& mesh, std::ostream& out)
{
    out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n";
    out << "$Nodes\n" << mesh.num_nodes() << "\n";
    for (Eigen::Index i = 0; i < mesh.num_nodes(); ++i)
        out << i + 1 << ' ' << format_double(mesh.node(i)(0)) << ' ' << format_double(mesh.node(i)(1)) << ' '
            << format_double(mesh.node(i)(2)) << "\n";
    out << "$EndNodes\n";

    const auto boundary = mesh.boundary_faces();
    out << "$Elements\n" << mesh.num_cells() + static_cast<long>(boundary.size()) << "\n";
    long id = 1;
    const int tet_type = mesh.order() == 1 ? 4 : 11;
    for (int c = 0; c < mesh.num_cells(); ++c) {
        out << id++ << ' ' << tet_type << " 2 1 1";
        const auto cn = mesh.cell(c);
        for (int i = 0; i < mesh.nodes_per_cell(); ++i)
            out << ' ' << cn[mesh.order() == 1 ? i : kGmshTet10ToInternal[i]] + 1;
        out << "\n";
    }
    // Boundary triangles (tri6 order: vertices, then edges 01, 12, 20).
    for (int f : boundary) {
        const auto& v = mesh.face(f);
        out << id++ << ' ' << (mesh.order() == 1 ? 2 : 9) << " 2 2 2 " << v[0] + 1 << ' ' << v[1] + 1 << ' ' << v[2] + 1;
        if (mesh.order() == 2) {
            auto mid = [&](int a, int b) {
                const int c = mesh.face_cells(f)[0];
                for (int le = 0; le < 6; ++le) {
                    const auto& e = mesh.edge(mesh.cell_edges(c)[le]);
                    if ((e[0] == a && e[1] == b) || (e[0] == b && e[1] == a))
                        return mesh.edge_node(mesh.cell_edges(c)[le]);
                }
                throw Error("boundary face edge not found");
            };
            out << ' ' << mid(v[0], v[1]) + 1 << ' ' << mid(v[1], v[2]) + 1 << ' ' << mid(v[2], v[0]) + 1;
        }
        out << "\n";
    }
    out << "$EndElements\n";
}

void write_gmsh(const Mesh& mesh, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write " + path.string());
    write_gmsh(mesh, out);
}

} // namespace curlfem
