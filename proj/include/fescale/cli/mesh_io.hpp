#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "../mesh/mesh.hpp"

namespace fescale::cli {

// Plain-text mesh exchange format:
//
//   # comment
//   nodes <N>
//   <id> <x> <y>            (N lines)
//   elements <M>
//   <id> <kind> <phase> <n1> <n2> <n3> [<n4>]   (M lines, kind tri3 or quad4)
//
// Node ids are arbitrary unique integers; connectivity refers to them and runs counter-clockwise.

class MeshParseError : public std::runtime_error {
public:
    MeshParseError(const std::string& source, std::size_t line, const std::string& what)
        : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line)
    {
    }
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

inline std::string to_string(mesh::ElementKind kind)
{
    return kind == mesh::ElementKind::linear_triangle ? "tri3" : "quad4";
}

inline mesh::Mesh read_mesh(std::istream& in, const std::string& source = "<mesh>")
{
    std::size_t line_no = 0;
    std::string raw;
    // next non-empty, comment-stripped line
    const auto next = [&](std::istringstream& fields) {
        while (std::getline(in, raw)) {
            ++line_no;
            const auto hash = raw.find('#');
            if (hash != std::string::npos) raw.erase(hash);
            if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
            fields = std::istringstream(raw);
            return true;
        }
        return false;
    };
    const auto fail = [&](const std::string& what) { throw MeshParseError(source, line_no, what); };
    const auto header = [&](const char* keyword) {
        std::istringstream f;
        if (!next(f)) fail(std::string("expected '") + keyword + " <count>'");
        std::string word;
        long long count = -1;
        if (!(f >> word >> count) || word != keyword || count < 0) fail(std::string("expected '") + keyword + " <count>'");
        return static_cast<std::size_t>(count);
    };

    mesh::Mesh m;
    std::map<long long, std::size_t> index;
    const std::size_t n_nodes = header("nodes");
    for (std::size_t i = 0; i < n_nodes; ++i) {
        std::istringstream f;
        if (!next(f)) fail("unexpected end of file in node block");
        long long id = 0;
        double x = 0.0, y = 0.0;
        if (!(f >> id >> x >> y)) fail("expected '<id> <x> <y>'");
        if (!index.emplace(id, i).second) fail("duplicate node id " + std::to_string(id));
        m.nodes.emplace_back(x, y);
    }

    const std::size_t n_elements = header("elements");
    std::map<std::pair<int, std::size_t>, std::size_t> block_of; // (kind, phase) -> block
    for (std::size_t e = 0; e < n_elements; ++e) {
        std::istringstream f;
        if (!next(f)) fail("unexpected end of file in element block");
        long long id = 0;
        std::string kind_name;
        long long phase = -1;
        if (!(f >> id >> kind_name >> phase) || phase < 0) fail("expected '<id> <kind> <phase> <nodes...>'");
        mesh::ElementKind kind;
        if (kind_name == "tri3") {
            kind = mesh::ElementKind::linear_triangle;
        } else if (kind_name == "quad4") {
            kind = mesh::ElementKind::bilinear_quad;
        } else {
            fail("unknown element kind '" + kind_name + "'");
        }
        std::vector<std::size_t> conn;
        long long node = 0;
        while (f >> node) {
            const auto it = index.find(node);
            if (it == index.end()) fail("element " + std::to_string(id) + " references unknown node " + std::to_string(node));
            conn.push_back(it->second);
        }
        if (!f.eof()) fail("malformed connectivity");
        if (conn.size() != mesh::nodes_per_element(kind)) {
            fail("element " + std::to_string(id) + " of kind " + kind_name + " needs " +
                 std::to_string(mesh::nodes_per_element(kind)) + " nodes");
        }
        const auto key = std::make_pair(static_cast<int>(kind), static_cast<std::size_t>(phase));
        auto [it, fresh] = block_of.emplace(key, m.blocks.size());
        if (fresh) m.blocks.push_back({kind, key.second, {}});
        auto& c = m.blocks[it->second].connectivity;
        c.insert(c.end(), conn.begin(), conn.end());
    }
    std::istringstream f;
    if (next(f)) fail("trailing content after element block");
    return m;
}

inline mesh::Mesh read_mesh(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw MeshParseError(path.string(), 0, "cannot open mesh file");
    return read_mesh(in, path.string());
}

inline void write_mesh(std::ostream& out, const mesh::Mesh& m)
{
    char buf[96];
    out << "nodes " << m.num_nodes() << '\n';
    for (std::size_t i = 0; i < m.num_nodes(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu %.17g %.17g\n", i, m.nodes[i].x(), m.nodes[i].y());
        out << buf;
    }
    out << "elements " << m.num_elements() << '\n';
    std::size_t id = 0;
    for (const auto& b : m.blocks) {
        for (std::size_t e = 0; e < b.size(); ++e, ++id) {
            out << id << ' ' << to_string(b.kind) << ' ' << b.phase;
            for (std::size_t n : b.element(e)) out << ' ' << n;
            out << '\n';
        }
    }
}

} // namespace fescale::cli
