#pragma once

// On-disk posed depth datasets:
//
//   <dir>/meta.json          fx, fy, cx, cy, width, height, depth_scale, near, far
//   <dir>/poses.txt          "<index> <16 row-major floats of T_wc>" per line
//   <dir>/frames/NNNNNN.pgm  16-bit big-endian binary PGM, 0 = no return
//
// Stored depth units times depth_scale give meters.

#include "lgsdf/core.hpp"
#include "lgsdf/io.hpp"
#include "lgsdf/scene.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace lgsdf {

struct DatasetMeta {
    CameraModel camera;
    double depth_scale = 2e-4;  ///< meters per stored unit (13.1 m range)
};

namespace detail {

inline std::string frame_file_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06d.pgm", index);
    return buf;
}

inline std::string encode_pgm16(int width, int height, const std::vector<std::uint16_t>& units) {
    std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n65535\n";
    out.reserve(out.size() + units.size() * 2);
    for (std::uint16_t u : units) {
        out.push_back(static_cast<char>(u >> 8));
        out.push_back(static_cast<char>(u & 0xff));
    }
    return out;
}

inline std::vector<std::uint16_t> decode_pgm16(const std::string& bytes, int& width, int& height,
                                               const std::string& name) {
    std::istringstream in(bytes);
    std::string magic;
    int maxval = 0;
    in >> magic;
    auto skip_comments = [&] {
        in >> std::ws;
        while (in.peek() == '#') {
            std::string line;
            std::getline(in, line);
            in >> std::ws;
        }
    };
    skip_comments();
    in >> width;
    skip_comments();
    in >> height;
    skip_comments();
    in >> maxval;
    if (!in || magic != "P5" || width <= 0 || height <= 0 || maxval != 65535)
        throw Error(name + ": not a 16-bit binary PGM");
    in.get();  // single whitespace before the raster
    const auto start = static_cast<std::size_t>(in.tellg());
    const std::size_t n = static_cast<std::size_t>(width) * height;
    if (bytes.size() < start + 2 * n) throw Error(name + ": truncated raster");
    std::vector<std::uint16_t> units(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto hi = static_cast<unsigned char>(bytes[start + 2 * i]);
        const auto lo = static_cast<unsigned char>(bytes[start + 2 * i + 1]);
        units[i] = static_cast<std::uint16_t>((hi << 8) | lo);
    }
    return units;
}

}  // namespace detail

/// Depth quantized the way save_dataset stores it.
inline std::uint16_t quantize_depth(std::optional<double> depth, double depth_scale) {
    if (!depth) return 0;
    const double units = std::round(*depth / depth_scale);
    if (units < 1 || units > 65535) throw Error("depth " + std::to_string(*depth) + " m not representable");
    return static_cast<std::uint16_t>(units);
}

inline void save_dataset(const std::filesystem::path& dir, const std::vector<DepthFrame>& frames,
                         double depth_scale) {
    if (frames.empty()) throw Error("save_dataset: no frames");
    const CameraModel& cam = frames.front().camera();
    nlohmann::json meta = {{"fx", cam.fx},         {"fy", cam.fy},
                           {"cx", cam.cx},         {"cy", cam.cy},
                           {"width", cam.width},   {"height", cam.height},
                           {"depth_scale", depth_scale},
                           {"near", cam.near_clip}, {"far", cam.far_clip}};
    write_file_atomic(dir / "meta.json", meta.dump(2) + "\n");

    std::ostringstream poses;
    poses << std::setprecision(17);
    for (const auto& frame : frames) {
        std::vector<std::uint16_t> units(static_cast<std::size_t>(frame.width()) * frame.height());
        for (int v = 0; v < frame.height(); ++v)
            for (int u = 0; u < frame.width(); ++u)
                units[static_cast<std::size_t>(v) * frame.width() + u] =
                    quantize_depth(frame.depth(u, v), depth_scale);
        write_file_atomic(dir / "frames" / detail::frame_file_name(frame.index()),
                          detail::encode_pgm16(frame.width(), frame.height(), units));
        poses << frame.index();
        const Eigen::Matrix4d m = frame.pose().matrix();
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) poses << ' ' << m(r, c);
        poses << '\n';
    }
    write_file_atomic(dir / "poses.txt", poses.str());
}

/// Lazily decodes frames of a dataset directory in index order. Errors are
/// raised per frame and name the offending file.
class DatasetReader {
public:
    explicit DatasetReader(std::filesystem::path dir) : dir_(std::move(dir)) {
        namespace fs = std::filesystem;
        const auto meta_path = dir_ / "meta.json";
        nlohmann::json meta;
        try {
            meta = nlohmann::json::parse(read_file(meta_path));
            meta_.camera.fx = meta.at("fx").get<double>();
            meta_.camera.fy = meta.at("fy").get<double>();
            meta_.camera.cx = meta.at("cx").get<double>();
            meta_.camera.cy = meta.at("cy").get<double>();
            meta_.camera.width = meta.at("width").get<int>();
            meta_.camera.height = meta.at("height").get<int>();
            meta_.camera.near_clip = meta.at("near").get<double>();
            meta_.camera.far_clip = meta.at("far").get<double>();
            meta_.depth_scale = meta.at("depth_scale").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(meta_path.string() + ": " + e.what());
        }
        meta_.camera.validate();
        if (!(meta_.depth_scale > 0)) throw Error(meta_path.string() + ": depth_scale must be positive");

        std::istringstream poses(read_file(dir_ / "poses.txt"));
        std::string line;
        int line_no = 0;
        while (std::getline(poses, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            std::istringstream ls(line);
            int index = 0;
            std::vector<double> values;
            ls >> index;
            double x = 0;
            while (ls >> x) values.push_back(x);
            if (ls.fail() && !ls.eof()) values.clear();
            pose_rows_[index] = std::move(values);
        }

        if (!fs::is_directory(dir_ / "frames")) throw Error(dir_.string() + ": missing frames/ directory");
        for (const auto& entry : fs::directory_iterator(dir_ / "frames")) {
            if (entry.path().extension() != ".pgm") continue;
            const std::string stem = entry.path().stem().string();
            try {
                std::size_t used = 0;
                const int index = std::stoi(stem, &used);
                if (used != stem.size()) throw std::invalid_argument(stem);
                files_[index] = entry.path();
            } catch (const std::exception&) {
                throw Error(entry.path().string() + ": frame file name is not an index");
            }
        }
        for (const auto& [index, path] : files_) order_.push_back(index);
    }

    const DatasetMeta& meta() const { return meta_; }
    std::size_t size() const { return order_.size(); }

    DepthFrame frame(std::size_t i) const {
        const int index = order_.at(i);
        const auto& path = files_.at(index);
        const std::string name = path.filename().string();
        const auto pose_it = pose_rows_.find(index);
        if (pose_it == pose_rows_.end()) throw Error(name + ": no pose for frame " + std::to_string(index));
        if (pose_it->second.size() != 16) throw Error(name + ": malformed pose matrix");
        Eigen::Matrix4d m;
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) m(r, c) = pose_it->second[4 * r + c];
        Pose pose;
        pose.matrix() = m;
        if (!m.allFinite() || !is_rigid(pose)) throw Error(name + ": pose rotation is not orthonormal");

        int width = 0, height = 0;
        std::vector<std::uint16_t> units;
        try {
            units = detail::decode_pgm16(read_file(path), width, height, name);
        } catch (const Error& e) {
            throw Error(name + ": unreadable depth image (" + e.what() + ")");
        }
        if (width != meta_.camera.width || height != meta_.camera.height)
            throw Error(name + ": image size does not match meta.json");

        DepthFrame frame(meta_.camera, pose, index);
        for (int v = 0; v < height; ++v) {
            for (int u = 0; u < width; ++u) {
                const std::uint16_t raw = units[static_cast<std::size_t>(v) * width + u];
                if (raw == 0) continue;
                const double d = raw * meta_.depth_scale;
                if (d > meta_.camera.near_clip && d < meta_.camera.far_clip) frame.set_depth(u, v, d);
            }
        }
        return frame;
    }

private:
    std::filesystem::path dir_;
    DatasetMeta meta_;
    std::map<int, std::vector<double>> pose_rows_;
    std::map<int, std::filesystem::path> files_;
    std::vector<int> order_;
};

inline std::vector<DepthFrame> load_dataset(const std::filesystem::path& dir) {
    DatasetReader reader(dir);
    std::vector<DepthFrame> frames;
    frames.reserve(reader.size());
    for (std::size_t i = 0; i < reader.size(); ++i) frames.push_back(reader.frame(i));
    return frames;
}

}  // namespace lgsdf
