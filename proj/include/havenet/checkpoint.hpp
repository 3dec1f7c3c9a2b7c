#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "havenet/errors.hpp"
#include "havenet/mlp.hpp"

namespace havenet {

// "HVNC" checkpoint: magic, version u16, layer count u32, then per layer
// {in u32, out u32, activation u8, weights row-major f64 LE, bias f64 LE}.
// Bit-exact round-trip.
namespace ckpt {

constexpr char kMagic[4] = {'H', 'V', 'N', 'C'};
constexpr std::uint16_t kVersion = 1;

namespace detail {

// Little-endian writers; this codebase targets little-endian hosts and the
// formats are defined LE.
template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, std::size_t& offset) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw FormatError("unexpected end of file", offset);
    offset += sizeof(T);
    return v;
}

inline void read_doubles(std::istream& is, std::size_t& offset, std::vector<double>& out) {
    is.read(reinterpret_cast<char*>(out.data()),
            std::streamsize(out.size() * sizeof(double)));
    if (!is) throw FormatError("truncated float block", offset);
    offset += out.size() * sizeof(double);
}

}  // namespace detail

inline void save_net(const MlpNet& net, std::ostream& os) {
    os.write(kMagic, 4);
    detail::write_pod<std::uint16_t>(os, kVersion);
    detail::write_pod<std::uint32_t>(os, std::uint32_t(net.layers.size()));
    for (const Layer& ly : net.layers) {
        detail::write_pod<std::uint32_t>(os, std::uint32_t(ly.in_dim()));
        detail::write_pod<std::uint32_t>(os, std::uint32_t(ly.out_dim()));
        detail::write_pod<std::uint8_t>(os, std::uint8_t(ly.activation));
        os.write(reinterpret_cast<const char*>(ly.weight.data.data()),
                 std::streamsize(ly.weight.size() * sizeof(double)));
        os.write(reinterpret_cast<const char*>(ly.bias.data.data()),
                 std::streamsize(ly.bias.size() * sizeof(double)));
    }
}

inline void save_net(const MlpNet& net, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open '" + path + "' for writing", 0);
    save_net(net, os);
    if (!os) throw FormatError("write failed for '" + path + "'", 0);
}

inline MlpNet load_net(std::istream& is) {
    std::size_t offset = 0;
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("bad checkpoint magic", 0);
    offset += 4;
    const auto version = detail::read_pod<std::uint16_t>(is, offset);
    if (version != kVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version),
                          offset - sizeof(std::uint16_t));
    const auto layer_count = detail::read_pod<std::uint32_t>(is, offset);
    MlpNet net;
    for (std::uint32_t l = 0; l < layer_count; ++l) {
        Layer ly;
        const auto in = detail::read_pod<std::uint32_t>(is, offset);
        const auto out = detail::read_pod<std::uint32_t>(is, offset);
        const auto act = detail::read_pod<std::uint8_t>(is, offset);
        if (act > std::uint8_t(Activation::sigmoid))
            throw FormatError("unknown activation code " + std::to_string(act),
                              offset - 1);
        ly.activation = Activation(act);
        ly.weight = Tensor2(in, out);
        ly.bias = Tensor2(1, out);
        detail::read_doubles(is, offset, ly.weight.data);
        detail::read_doubles(is, offset, ly.bias.data);
        net.layers.push_back(std::move(ly));
    }
    net.zero_grads();
    net.validate();
    return net;
}

inline MlpNet load_net(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open '" + path + "'", 0);
    return load_net(is);
}

}  // namespace ckpt
}  // namespace havenet
