#include "core/json_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "core/error.hpp"

namespace bs {

using nlohmann::json;

namespace {

json parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw_io("cannot open " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw_format(path + ": invalid JSON");
    return j;
}

}  // namespace

CameraPose load_pose_json(const std::string& path) {
    const json j = parse_file(path);
    if (!j.contains("q") || !j.contains("t")) throw_format(path + ": pose needs 'q' and 't'");
    const auto& q = j["q"];
    const auto& t = j["t"];
    if (q.size() != 4 || t.size() != 3) throw_format(path + ": q must be [w,x,y,z], t [x,y,z]");
    CameraPose pose;
    pose.q = quat_normalized(Vec4(q[0].get<double>(), q[1].get<double>(),
                                  q[2].get<double>(), q[3].get<double>()));
    pose.t = Vec3(t[0].get<double>(), t[1].get<double>(), t[2].get<double>());
    return pose;
}

void save_pose_json(const CameraPose& pose, const std::string& path) {
    json j;
    j["q"] = {pose.q[0], pose.q[1], pose.q[2], pose.q[3]};
    j["t"] = {pose.t[0], pose.t[1], pose.t[2]};
    write_text_file(path, j.dump(2) + "\n");
}

CameraIntrinsics load_intrinsics_json(const std::string& path) {
    const json j = parse_file(path);
    CameraIntrinsics intr;
    for (const char* key : {"fx", "fy", "cx", "cy", "width", "height"})
        if (!j.contains(key)) throw_format(path + ": intrinsics missing '" + std::string(key) + "'");
    intr.fx = j["fx"].get<double>();
    intr.fy = j["fy"].get<double>();
    intr.cx = j["cx"].get<double>();
    intr.cy = j["cy"].get<double>();
    intr.width = j["width"].get<int>();
    intr.height = j["height"].get<int>();
    validate_intrinsics(intr);
    return intr;
}

void save_intrinsics_json(const CameraIntrinsics& intr, const std::string& path) {
    json j;
    j["fx"] = intr.fx;
    j["fy"] = intr.fy;
    j["cx"] = intr.cx;
    j["cy"] = intr.cy;
    j["width"] = intr.width;
    j["height"] = intr.height;
    write_text_file(path, j.dump(2) + "\n");
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_io("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw_io("cannot open " + path + " for writing");
    out << content;
    if (!out) throw_io("write failed for " + path);
}

std::string fnv1a_hex(const std::string& bytes) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace bs
