#include "oacnn/io.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "oacnn/binary_io.hpp"

namespace oacnn {

namespace {

struct PlyHeader {
    bool binary = false;
    long vertex_count = -1;
    bool has_label = false;
    std::size_t header_bytes = 0;
};

bool type_is(const std::string &t, const char *a, const char *b) { return t == a || t == b; }

PlyHeader parse_ply_header(std::istream &in, const std::string &path) {
    PlyHeader h;
    std::string line;
    int line_no = 0;
    std::vector<std::pair<std::string, std::string>> props; // (type, name)
    bool in_vertex = false, format_seen = false;

    auto fail = [&](const std::string &msg) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": " + msg);
    };

    std::size_t consumed = 0;
    auto next_line = [&]() -> bool {
        if (!std::getline(in, line)) return false;
        consumed += line.size() + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    };

    if (!next_line() || line != "ply") fail("not a PLY file (missing 'ply' magic)");
    while (next_line()) {
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "comment" || tok.empty()) continue;
        if (tok == "format") {
            std::string fmt, ver;
            ls >> fmt >> ver;
            if (ver != "1.0") fail("unsupported PLY version " + ver);
            if (fmt == "ascii") h.binary = false;
            else if (fmt == "binary_little_endian") h.binary = true;
            else fail("unsupported PLY format " + fmt);
            format_seen = true;
        } else if (tok == "element") {
            std::string name;
            long count = 0;
            ls >> name >> count;
            if (name == "vertex") {
                h.vertex_count = count;
                in_vertex = true;
            } else {
                fail("unsupported element '" + name + "'");
            }
        } else if (tok == "property") {
            if (!in_vertex) fail("property outside vertex element");
            std::string type, name;
            ls >> type >> name;
            props.emplace_back(type, name);
        } else if (tok == "end_header") {
            break;
        } else {
            fail("unrecognized header token '" + tok + "'");
        }
    }
    if (!format_seen || h.vertex_count < 0) fail("incomplete PLY header");

    const char *expect[6] = {"x", "y", "z", "red", "green", "blue"};
    if (props.size() != 6 && props.size() != 7)
        fail("expected properties x,y,z,red,green,blue[,label], got " + std::to_string(props.size()));
    for (int i = 0; i < 6; ++i) {
        if (props[std::size_t(i)].second != expect[i]) fail("unexpected property '" + props[std::size_t(i)].second + "'");
        const bool ok = i < 3 ? type_is(props[std::size_t(i)].first, "float", "float32")
                              : type_is(props[std::size_t(i)].first, "uchar", "uint8");
        if (!ok) fail("unsupported type for property " + props[std::size_t(i)].second);
    }
    if (props.size() == 7) {
        if (props[6].second != "label" || !type_is(props[6].first, "ushort", "uint16"))
            fail("optional 7th property must be 'ushort label'");
        h.has_label = true;
    }
    h.header_bytes = consumed;
    return h;
}

} // namespace

PointCloud read_ply(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    const PlyHeader h = parse_ply_header(in, path);

    PointCloud pc;
    const long n = h.vertex_count;
    if (n == 0) throw EmptyInput(path + ": zero vertices");
    pc.positions.resize(std::size_t(n));
    pc.features = Matrix<double>(int(n), 3);
    if (h.has_label) pc.labels.resize(std::size_t(n));

    if (h.binary) {
        const std::size_t rec = 3 * 4 + 3 + (h.has_label ? 2 : 0);
        std::vector<unsigned char> buf(rec);
        for (long i = 0; i < n; ++i) {
            in.read(reinterpret_cast<char *>(buf.data()), std::streamsize(rec));
            if (std::size_t(in.gcount()) != rec)
                throw ParseError(path + ": truncated vertex data at byte offset " +
                                 std::to_string(h.header_bytes + std::size_t(i) * rec));
            for (int a = 0; a < 3; ++a) {
                std::uint32_t u = 0;
                for (int b = 0; b < 4; ++b) u |= std::uint32_t(buf[std::size_t(4 * a + b)]) << (8 * b);
                float f;
                std::memcpy(&f, &u, 4);
                pc.positions[std::size_t(i)][std::size_t(a)] = double(f);
            }
            for (int c = 0; c < 3; ++c) pc.features(int(i), c) = double(buf[std::size_t(12 + c)]) / 255.0;
            if (h.has_label)
                pc.labels[std::size_t(i)] = int(buf[15]) | (int(buf[16]) << 8);
        }
    } else {
        std::string line;
        long i = 0;
        long line_no = 0;
        // header line count: rewind not needed, stream already positioned
        while (i < n) {
            if (!std::getline(in, line))
                throw ParseError(path + ": expected " + std::to_string(n) + " vertices, got " +
                                 std::to_string(i));
            ++line_no;
            if (line.empty()) continue;
            std::istringstream ls(line);
            double x, y, z;
            int r, g, b;
            if (!(ls >> x >> y >> z >> r >> g >> b))
                throw ParseError(path + ": malformed vertex on data line " + std::to_string(line_no));
            pc.positions[std::size_t(i)] = {x, y, z};
            pc.features(int(i), 0) = r / 255.0;
            pc.features(int(i), 1) = g / 255.0;
            pc.features(int(i), 2) = b / 255.0;
            if (h.has_label) {
                int label;
                if (!(ls >> label))
                    throw ParseError(path + ": missing label on data line " + std::to_string(line_no));
                pc.labels[std::size_t(i)] = label;
            }
            ++i;
        }
    }
    return pc;
}

void write_ply(const std::string &path, const PointCloud &pc, bool binary, bool with_labels) {
    if (with_labels && pc.labels.empty()) throw IoError("write_ply: point cloud has no labels");
    if (pc.channels() != 3) throw ShapeError("write_ply: expected 3 color channels");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "ply\n";
    out << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n");
    out << "element vertex " << pc.size() << "\n";
    out << "property float x\nproperty float y\nproperty float z\n";
    out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    if (with_labels) out << "property ushort label\n";
    out << "end_header\n";

    auto to_byte = [](double v) {
        const double c = std::min(1.0, std::max(0.0, v));
        return (unsigned char)std::lround(c * 255.0);
    };

    for (int i = 0; i < pc.size(); ++i) {
        const float x = float(pc.positions[std::size_t(i)][0]);
        const float y = float(pc.positions[std::size_t(i)][1]);
        const float z = float(pc.positions[std::size_t(i)][2]);
        const unsigned char rgb[3] = {to_byte(pc.features(i, 0)), to_byte(pc.features(i, 1)),
                                      to_byte(pc.features(i, 2))};
        if (binary) {
            const float xyz[3] = {x, y, z};
            for (int a = 0; a < 3; ++a) {
                std::uint32_t u;
                std::memcpy(&u, &xyz[a], 4);
                unsigned char buf[4];
                for (int b = 0; b < 4; ++b) buf[b] = (unsigned char)((u >> (8 * b)) & 0xff);
                out.write(reinterpret_cast<const char *>(buf), 4);
            }
            out.write(reinterpret_cast<const char *>(rgb), 3);
            if (with_labels) {
                const int label = pc.labels[std::size_t(i)];
                const unsigned char lab[2] = {(unsigned char)(label & 0xff),
                                              (unsigned char)((label >> 8) & 0xff)};
                out.write(reinterpret_cast<const char *>(lab), 2);
            }
        } else {
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g %d %d %d", double(x), double(y),
                          double(z), int(rgb[0]), int(rgb[1]), int(rgb[2]));
            out << buf;
            if (with_labels) out << ' ' << pc.labels[std::size_t(i)];
            out << '\n';
        }
    }
    out.close();
    if (!out) throw IoError("write failed: " + path);
}

PointCloud read_point_text(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);

    std::vector<std::array<double, 3>> positions;
    std::vector<std::array<double, 3>> colors;
    std::vector<int> labels;
    bool any_label = false, decided = false;

    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        double x, y, z, r, g, b;
        if (!(ls >> x >> y >> z >> r >> g >> b))
            throw ParseError(path + ":" + std::to_string(line_no) +
                             ": expected 'x y z r g b [label]'");
        int label = 0;
        const bool has_label = bool(ls >> label);
        if (!decided) {
            any_label = has_label;
            decided = true;
        } else if (has_label != any_label) {
            throw ParseError(path + ":" + std::to_string(line_no) +
                             ": inconsistent label column");
        }
        positions.push_back({x, y, z});
        colors.push_back({r, g, b});
        if (any_label) labels.push_back(label);
    }
    if (positions.empty()) throw EmptyInput(path + ": no points");

    PointCloud pc;
    pc.positions = std::move(positions);
    pc.features = Matrix<double>(int(pc.positions.size()), 3);
    for (int i = 0; i < pc.size(); ++i)
        for (int c = 0; c < 3; ++c) pc.features(i, c) = colors[std::size_t(i)][std::size_t(c)];
    pc.labels = std::move(labels);
    return pc;
}

PointCloud read_point_file(const std::string &path) {
    const auto dot = path.rfind('.');
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
    if (ext == ".ply") return read_ply(path);
    return read_point_text(path);
}

} // namespace oacnn
