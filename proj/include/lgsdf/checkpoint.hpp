#pragma once

// Versioned binary parameter container (little-endian):
//
//   "LGSDFCKP" | u32 version | u8 scalar bytes (4 or 8)
//   embedding: u32 n_dirs | n_dirs * 3 f64 | u32 octaves | f64 base_frequency | u8 include_input
//   network:   u32 hidden_layers | u32 width | u32 skip_layer
//   u32 n_layers, then per layer: u32 rows | u32 cols | weight (column-major) | bias

#include "lgsdf/field.hpp"
#include "lgsdf/io.hpp"

#include <cstring>
#include <filesystem>
#include <optional>
#include <string>

namespace lgsdf {

inline constexpr char kCheckpointMagic[8] = {'L', 'G', 'S', 'D', 'F', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

class ByteWriter {
public:
    template <typename T>
    void put(T v) {
        const auto* p = reinterpret_cast<const char*>(&v);
        bytes.append(p, sizeof(T));
    }
    template <typename T>
    void put_array(const T* data, std::size_t n) {
        bytes.append(reinterpret_cast<const char*>(data), n * sizeof(T));
    }
    std::string bytes;
};

class ByteReader {
public:
    explicit ByteReader(const std::string& b) : bytes_(b) {}
    template <typename T>
    T get() {
        T v;
        take(&v, sizeof(T));
        return v;
    }
    template <typename T>
    void get_array(T* data, std::size_t n) {
        take(data, n * sizeof(T));
    }
    bool at_end() const { return pos_ == bytes_.size(); }

private:
    void take(void* dst, std::size_t n) {
        if (pos_ + n > bytes_.size()) throw Error("checkpoint: truncated file");
        std::memcpy(dst, bytes_.data() + pos_, n);
        pos_ += n;
    }
    const std::string& bytes_;
    std::size_t pos_ = 0;
};

template <typename Stored, typename S>
void read_layers(ByteReader& in, FieldParams<S>& p) {
    const auto n_layers = in.get<std::uint32_t>();
    if (n_layers != p.layers.size()) throw Error("checkpoint: layer count does not match its network config");
    for (auto& layer : p.layers) {
        const auto rows = in.get<std::uint32_t>();
        const auto cols = in.get<std::uint32_t>();
        if (rows != layer.weight.rows() || cols != layer.weight.cols())
            throw Error("checkpoint: layer shape does not match its network config");
        Eigen::Matrix<Stored, Eigen::Dynamic, Eigen::Dynamic> w(rows, cols);
        Eigen::Matrix<Stored, Eigen::Dynamic, 1> b(rows);
        in.get_array(w.data(), w.size());
        in.get_array(b.data(), b.size());
        layer.weight = w.template cast<S>();
        layer.bias = b.template cast<S>();
    }
}

}  // namespace detail

template <typename S>
std::string encode_checkpoint(const FieldParams<S>& p) {
    detail::ByteWriter out;
    out.put_array(kCheckpointMagic, 8);
    out.put(kCheckpointVersion);
    out.put(static_cast<std::uint8_t>(sizeof(S)));
    out.put(static_cast<std::uint32_t>(p.embedding.directions.size()));
    for (const auto& d : p.embedding.directions) out.put_array(d.data(), 3);
    out.put(static_cast<std::uint32_t>(p.embedding.octaves));
    out.put(p.embedding.base_frequency);
    out.put(static_cast<std::uint8_t>(p.embedding.include_input));
    out.put(static_cast<std::uint32_t>(p.network.hidden_layers));
    out.put(static_cast<std::uint32_t>(p.network.width));
    out.put(static_cast<std::uint32_t>(p.network.skip_layer));
    out.put(static_cast<std::uint32_t>(p.layers.size()));
    for (const auto& layer : p.layers) {
        out.put(static_cast<std::uint32_t>(layer.weight.rows()));
        out.put(static_cast<std::uint32_t>(layer.weight.cols()));
        out.put_array(layer.weight.data(), layer.weight.size());
        out.put_array(layer.bias.data(), layer.bias.size());
    }
    return out.bytes;
}

/// Decodes a checkpoint into scalar type S. When `expected` is given, the
/// stored network must have the same layer shapes.
template <typename S>
FieldParams<S> decode_checkpoint(const std::string& bytes,
                                 const FieldParams<S>* expected = nullptr) {
    detail::ByteReader in(bytes);
    char magic[8];
    in.get_array(magic, 8);
    if (std::memcmp(magic, kCheckpointMagic, 8) != 0) throw Error("checkpoint: bad magic");
    if (in.get<std::uint32_t>() != kCheckpointVersion) throw Error("checkpoint: unsupported version");
    const auto scalar_bytes = in.get<std::uint8_t>();
    if (scalar_bytes != 4 && scalar_bytes != 8) throw Error("checkpoint: bad scalar size");

    EmbeddingConfig emb;
    emb.directions.resize(in.get<std::uint32_t>());
    for (auto& d : emb.directions) in.get_array(d.data(), 3);
    emb.octaves = static_cast<int>(in.get<std::uint32_t>());
    emb.base_frequency = in.get<double>();
    emb.include_input = in.get<std::uint8_t>() != 0;
    NetworkConfig net;
    net.hidden_layers = static_cast<int>(in.get<std::uint32_t>());
    net.width = static_cast<int>(in.get<std::uint32_t>());
    net.skip_layer = static_cast<int>(in.get<std::uint32_t>());

    auto p = FieldParams<S>::zeros(emb, net);
    if (scalar_bytes == 4) detail::read_layers<float>(in, p);
    else detail::read_layers<double>(in, p);
    if (!in.at_end()) throw Error("checkpoint: trailing bytes");
    if (expected && !expected->same_shape(p))
        throw Error("checkpoint: network shape does not match the configured network");
    if (!p.all_finite()) throw Error("checkpoint: non-finite parameters");
    return p;
}

/// Stored scalar width in bytes (4 or 8).
inline int checkpoint_scalar_bytes(const std::string& bytes) {
    if (bytes.size() < 13 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0)
        throw Error("checkpoint: bad magic");
    const int b = static_cast<unsigned char>(bytes[12]);
    if (b != 4 && b != 8) throw Error("checkpoint: bad scalar size");
    return b;
}

template <typename S>
void save_checkpoint(const std::filesystem::path& path, const FieldParams<S>& p) {
    write_file_atomic(path, encode_checkpoint(p));
}

template <typename S>
FieldParams<S> load_checkpoint(const std::filesystem::path& path, const FieldParams<S>* expected = nullptr) {
    if (!std::filesystem::exists(path)) throw Error("checkpoint not found: " + path.string());
    return decode_checkpoint<S>(read_file(path), expected);
}

}  // namespace lgsdf
