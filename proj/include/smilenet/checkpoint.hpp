#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "smilenet/errors.hpp"
#include "smilenet/network.hpp"
#include "smilenet/util.hpp"

// Self-describing single-file binary checkpoint. Layout (normative, all
// integers little-endian):
//
//   magic   "SMN1" (4 bytes)
//   version u32 (currently 1)
//   arch    u32 byte length, then that many UTF-8 bytes of "key=value\n"
//           lines covering every ArchitectureConfig field in canonical order
//   then one record per parameter tensor, in network build order:
//     name    u32 byte length + UTF-8 bytes
//     rank    u32
//     dims    rank * u32
//     payload product(dims) * f64 IEEE-754 little-endian, row-major
//
// Files are written to a temp path and renamed into place.

namespace smilenet {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

inline constexpr char kCheckpointMagic[4] = {'S', 'M', 'N', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    char buf[4];
    std::memcpy(buf, &v, 4);
    out.append(buf, 4);
}

inline std::string checkpoint_arch_block(const ArchitectureConfig& cfg) {
    std::string s;
    s += "num_convolutions=" + std::to_string(cfg.num_convolutions) + "\n";
    s += "num_hidden_layers=" + std::to_string(cfg.num_hidden_layers) + "\n";
    s += "units_per_hidden_layer=" + std::to_string(cfg.units_per_hidden_layer) + "\n";
    s += "dropout_rate=" + format_double(cfg.dropout_rate) + "\n";
    s += "input_height=" + std::to_string(cfg.input_height) + "\n";
    s += "input_width=" + std::to_string(cfg.input_width) + "\n";
    return s;
}

inline ArchitectureConfig parse_arch_block(const std::string& block) {
    std::map<std::string, std::string> kv;
    std::size_t pos = 0;
    while (pos < block.size()) {
        std::size_t eol = block.find('\n', pos);
        if (eol == std::string::npos) eol = block.size();
        const std::string line = block.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw CheckpointError(CheckpointError::Kind::Malformed,
                                  "checkpoint: bad architecture line '" + line + "'");
        }
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto take = [&](const char* key) {
        auto it = kv.find(key);
        if (it == kv.end()) {
            throw CheckpointError(CheckpointError::Kind::Malformed,
                                  std::string("checkpoint: missing architecture key ") + key);
        }
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    auto as_int = [](const std::string& s, const char* key) {
        int v = 0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
            throw CheckpointError(CheckpointError::Kind::Malformed,
                                  std::string("checkpoint: bad value for ") + key);
        }
        return v;
    };

    ArchitectureConfig cfg;
    cfg.num_convolutions = as_int(take("num_convolutions"), "num_convolutions");
    cfg.num_hidden_layers = as_int(take("num_hidden_layers"), "num_hidden_layers");
    cfg.units_per_hidden_layer =
        as_int(take("units_per_hidden_layer"), "units_per_hidden_layer");
    {
        const std::string s = take("dropout_rate");
        double v = 0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
            throw CheckpointError(CheckpointError::Kind::Malformed,
                                  "checkpoint: bad value for dropout_rate");
        }
        cfg.dropout_rate = v;
    }
    cfg.input_height = as_int(take("input_height"), "input_height");
    cfg.input_width = as_int(take("input_width"), "input_width");
    if (!kv.empty()) {
        throw CheckpointError(CheckpointError::Kind::Malformed,
                              "checkpoint: unknown architecture key '" + kv.begin()->first +
                                  "'");
    }
    return cfg;
}

// Network with the right parameter shapes but uninitialized (zero) values.
inline Network make_network_shell(const ArchitectureConfig& cfg) {
    Network net;
    net.config = cfg;
    net.plan = compute_layer_plan(cfg);
    const std::size_t k = ArchitectureConfig::kKernel;
    for (int s = 0; s < cfg.num_convolutions; ++s) {
        net.convs.push_back(ConvParams::zeros(ArchitectureConfig::kFeatureMaps,
                                              net.plan.conv_inputs[s].channels, k));
    }
    std::size_t in_units = net.plan.flatten_size;
    for (std::size_t out_units : net.plan.dense_outputs) {
        net.denses.push_back(DenseParams::zeros(out_units, in_units));
        in_units = out_units;
    }
    return net;
}

class CheckpointReader {
public:
    explicit CheckpointReader(std::istream& in) : in_(in) {}

    void read_bytes(void* dst, std::size_t n, const char* what) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw CheckpointError(CheckpointError::Kind::Truncated,
                                  std::string("checkpoint: truncated while reading ") + what);
        }
    }

    std::uint32_t read_u32(const char* what) {
        std::uint32_t v = 0;
        read_bytes(&v, 4, what);
        return v;
    }

    std::string read_string(std::uint32_t len, const char* what) {
        std::string s(len, '\0');
        read_bytes(s.data(), len, what);
        return s;
    }

    bool at_eof() {
        in_.peek();
        return in_.eof();
    }

private:
    std::istream& in_;
};

}  // namespace detail

inline std::string serialize_checkpoint(Network& net) {
    std::string out;
    out.append(kCheckpointMagic, 4);
    detail::put_u32(out, kCheckpointVersion);
    const std::string arch = detail::checkpoint_arch_block(net.config);
    detail::put_u32(out, static_cast<std::uint32_t>(arch.size()));
    out += arch;
    for (const NamedTensor& t : parameter_tensors(net)) {
        detail::put_u32(out, static_cast<std::uint32_t>(t.name.size()));
        out += t.name;
        detail::put_u32(out, static_cast<std::uint32_t>(t.tensor->rank()));
        for (std::size_t d : t.tensor->shape()) {
            detail::put_u32(out, static_cast<std::uint32_t>(d));
        }
        const std::size_t bytes = t.tensor->size() * sizeof(double);
        out.append(reinterpret_cast<const char*>(t.tensor->data()), bytes);
    }
    return out;
}

// Returns the number of bytes written. Write is atomic: temp file + rename.
inline std::size_t save_checkpoint(Network& net, const std::filesystem::path& path) {
    const std::string bytes = serialize_checkpoint(net);
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("checkpoint: cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("checkpoint: write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("checkpoint: cannot rename into " + path.string());
    return bytes.size();
}

inline Network load_checkpoint_stream(std::istream& in) {
    detail::CheckpointReader reader(in);
    char magic[4];
    reader.read_bytes(magic, 4, "magic");
    if (std::memcmp(magic, kCheckpointMagic, 4) != 0) {
        throw CheckpointError(CheckpointError::Kind::BadMagic,
                              "checkpoint: bad magic, not a checkpoint file");
    }
    const std::uint32_t version = reader.read_u32("version");
    if (version != kCheckpointVersion) {
        throw CheckpointError(CheckpointError::Kind::BadVersion,
                              "checkpoint: unsupported version " + std::to_string(version));
    }
    const std::uint32_t arch_len = reader.read_u32("architecture length");
    const std::string arch = reader.read_string(arch_len, "architecture block");
    Network net = detail::make_network_shell(detail::parse_arch_block(arch));

    for (const NamedTensor& expected : parameter_tensors(net)) {
        const std::uint32_t name_len = reader.read_u32("tensor name length");
        const std::string name = reader.read_string(name_len, "tensor name");
        if (name != expected.name) {
            throw CheckpointError(CheckpointError::Kind::ShapeMismatch,
                                  "checkpoint: tensor '" + name + "' where '" +
                                      expected.name + "' was expected");
        }
        const std::uint32_t rank = reader.read_u32("tensor rank");
        if (rank != expected.tensor->rank()) {
            throw CheckpointError(CheckpointError::Kind::ShapeMismatch,
                                  "checkpoint: tensor '" + name + "' rank " +
                                      std::to_string(rank) + ", expected " +
                                      std::to_string(expected.tensor->rank()));
        }
        for (std::size_t d = 0; d < rank; ++d) {
            const std::uint32_t dim = reader.read_u32("tensor dim");
            if (dim != expected.tensor->dim(d)) {
                throw CheckpointError(CheckpointError::Kind::ShapeMismatch,
                                      "checkpoint: tensor '" + name + "' dim " +
                                          std::to_string(d) + " is " + std::to_string(dim) +
                                          ", expected " +
                                          std::to_string(expected.tensor->dim(d)));
            }
        }
        reader.read_bytes(expected.tensor->data(), expected.tensor->size() * sizeof(double),
                          "tensor payload");
    }
    if (!reader.at_eof()) {
        throw CheckpointError(CheckpointError::Kind::Malformed,
                              "checkpoint: trailing bytes after last tensor");
    }
    return net;
}

inline Network load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open " + path.string());
    return load_checkpoint_stream(in);
}

}  // namespace smilenet
