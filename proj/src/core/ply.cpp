#include "core/ply.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "core/error.hpp"

namespace bs {

namespace {

const char* kRequired[] = {"x", "y", "z", "rot_w", "rot_x", "rot_y", "rot_z",
                           "scale_x", "scale_y", "scale_z", "opacity",
                           "f_dc_0", "f_dc_1", "f_dc_2"};

[[noreturn]] void malformed(const std::string& what, size_t byte_offset) {
    throw_format("malformed PLY header at byte " + std::to_string(byte_offset) + ": " + what);
}

int degree_for_rest_count(int n_rest, const std::string& path) {
    for (int d = 0; d <= 3; ++d)
        if (n_rest == 3 * ((d + 1) * (d + 1) - 1)) return d;
    throw_format(path + ": unsupported f_rest count " + std::to_string(n_rest));
}

}  // namespace

GaussianCloud load_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_io("cannot open " + path);

    size_t offset = 0;
    auto read_line = [&](std::string& line) {
        if (!std::getline(in, line)) malformed("unexpected end of header", offset);
        const size_t line_start = offset;
        offset += line.size() + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line_start;
    };

    std::string line;
    read_line(line);
    if (line != "ply") malformed("missing 'ply' magic", 0);
    size_t at = read_line(line);
    if (line != "format binary_little_endian 1.0")
        malformed("expected 'format binary_little_endian 1.0', got '" + line + "'", at);

    long vertex_count = -1;
    std::vector<std::string> property_names;
    bool in_vertex_element = false;
    for (;;) {
        at = read_line(line);
        if (line == "end_header") break;
        std::istringstream ss(line);
        std::string tok;
        ss >> tok;
        if (tok == "comment" || tok == "obj_info" || tok.empty()) continue;
        if (tok == "element") {
            std::string name;
            long count = -1;
            ss >> name >> count;
            if (name == "vertex") {
                if (count < 0) malformed("bad vertex count", at);
                vertex_count = count;
                in_vertex_element = true;
            } else {
                in_vertex_element = false;
            }
            continue;
        }
        if (tok == "property") {
            if (!in_vertex_element) continue;
            std::string type, name;
            ss >> type >> name;
            if (type != "float" && type != "float32")
                malformed("property '" + name + "' has type '" + type + "', expected float", at);
            property_names.push_back(name);
            continue;
        }
        malformed("unrecognized header line '" + line + "'", at);
    }
    if (vertex_count < 0) malformed("no vertex element", offset);

    auto index_of = [&](const std::string& name) -> int {
        for (size_t i = 0; i < property_names.size(); ++i)
            if (property_names[i] == name) return static_cast<int>(i);
        return -1;
    };

    int req_idx[14];
    for (int i = 0; i < 14; ++i) {
        req_idx[i] = index_of(kRequired[i]);
        if (req_idx[i] < 0)
            throw_format(path + ": missing required field '" + std::string(kRequired[i]) + "'");
    }

    // f_rest_0..n must be contiguous starting at 0.
    int n_rest = 0;
    while (index_of("f_rest_" + std::to_string(n_rest)) >= 0) ++n_rest;
    std::vector<int> rest_idx(n_rest);
    for (int i = 0; i < n_rest; ++i) rest_idx[i] = index_of("f_rest_" + std::to_string(i));

    const int degree = degree_for_rest_count(n_rest, path);
    const int n_basis = (degree + 1) * (degree + 1);
    const size_t stride = property_names.size();

    GaussianCloud cloud;
    cloud.sh_degree = degree;
    cloud.gaussians.resize(vertex_count);

    std::vector<float> row(stride);
    for (long v = 0; v < vertex_count; ++v) {
        in.read(reinterpret_cast<char*>(row.data()), stride * sizeof(float));
        if (!in) throw_format(path + ": truncated vertex data at element " + std::to_string(v));
        Gaussian3D& g = cloud.gaussians[v];
        g.position = Vec3(row[req_idx[0]], row[req_idx[1]], row[req_idx[2]]);
        g.rotation = quat_normalized(
            Vec4(row[req_idx[3]], row[req_idx[4]], row[req_idx[5]], row[req_idx[6]]));
        g.log_scale = Vec3(row[req_idx[7]], row[req_idx[8]], row[req_idx[9]]);
        g.opacity_logit = row[req_idx[10]];
        g.sh.assign(3 * n_basis, 0.0);
        for (int c = 0; c < 3; ++c) g.sh[c] = row[req_idx[11 + c]];
        for (int c = 0; c < 3; ++c)
            for (int k = 1; k < n_basis; ++k)
                g.sh[3 * k + c] = row[rest_idx[c * (n_basis - 1) + (k - 1)]];
    }
    return cloud;
}

void save_ply(const GaussianCloud& cloud, const std::string& path,
              const std::vector<std::string>& comments) {
    require(!cloud.empty(), "save_ply: cloud is empty");
    validate_cloud(cloud);

    const int n_basis = (cloud.sh_degree + 1) * (cloud.sh_degree + 1);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw_io("cannot open " + path + " for writing");

    out << "ply\nformat binary_little_endian 1.0\n";
    for (const auto& c : comments) out << "comment " << c << "\n";
    out << "element vertex " << cloud.size() << "\n";
    for (const char* name : kRequired) out << "property float " << name << "\n";
    for (int i = 0; i < 3 * (n_basis - 1); ++i) out << "property float f_rest_" << i << "\n";
    out << "end_header\n";

    std::vector<float> row(14 + 3 * (n_basis - 1));
    for (const Gaussian3D& g : cloud.gaussians) {
        float* p = row.data();
        for (int i = 0; i < 3; ++i) *p++ = static_cast<float>(g.position[i]);
        for (int i = 0; i < 4; ++i) *p++ = static_cast<float>(g.rotation[i]);
        for (int i = 0; i < 3; ++i) *p++ = static_cast<float>(g.log_scale[i]);
        *p++ = static_cast<float>(g.opacity_logit);
        for (int c = 0; c < 3; ++c) *p++ = static_cast<float>(g.sh[c]);
        for (int c = 0; c < 3; ++c)
            for (int k = 1; k < n_basis; ++k) *p++ = static_cast<float>(g.sh[3 * k + c]);
        out.write(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(float));
    }
    if (!out) throw_io("write failed for " + path);
}

}  // namespace bs
