#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "smilenet/dataio.hpp"
#include "smilenet/errors.hpp"
#include "smilenet/network.hpp"
#include "smilenet/rng.hpp"
#include "smilenet/train.hpp"
#include "smilenet/util.hpp"

namespace smilenet {

// One experiment's worth of settings: architecture, training and split
// fields, read from a UTF-8 `key=value` file. Unknown keys are rejected;
// every field defaults to the standard protocol value where one exists.
// input_height/input_width may be left at 0 to be inferred from the corpus.
struct RunConfig {
    ArchitectureConfig arch;
    TrainConfig train;
    SplitSpec split;
    bool split_seed_set = false;  // when false, the split seed derives from train.seed

    std::uint64_t effective_split_seed() const {
        return split_seed_set ? split.seed : derive_seed(train.seed, 0x73706c6974ULL);
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline int config_int(const std::string& v, const std::string& key) {
    int out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
        throw ConfigError("config: bad integer '" + v + "' for " + key);
    }
    return out;
}

inline std::uint64_t config_u64(const std::string& v, const std::string& key) {
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
        throw ConfigError("config: bad unsigned integer '" + v + "' for " + key);
    }
    return out;
}

inline double config_dbl(const std::string& v, const std::string& key) {
    double out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
        throw ConfigError("config: bad number '" + v + "' for " + key);
    }
    return out;
}

}  // namespace detail

inline void apply_config_entry(RunConfig& cfg, const std::string& key,
                               const std::string& value) {
    using detail::config_dbl;
    using detail::config_int;
    using detail::config_u64;
    if (key == "num_convolutions") {
        cfg.arch.num_convolutions = config_int(value, key);
    } else if (key == "num_hidden_layers") {
        cfg.arch.num_hidden_layers = config_int(value, key);
    } else if (key == "units_per_hidden_layer") {
        cfg.arch.units_per_hidden_layer = config_int(value, key);
    } else if (key == "dropout_rate") {
        cfg.arch.dropout_rate = config_dbl(value, key);
    } else if (key == "input_height") {
        cfg.arch.input_height = config_int(value, key);
    } else if (key == "input_width") {
        cfg.arch.input_width = config_int(value, key);
    } else if (key == "learning_rate") {
        cfg.train.learning_rate = config_dbl(value, key);
    } else if (key == "momentum") {
        cfg.train.momentum = config_dbl(value, key);
    } else if (key == "batch_size") {
        cfg.train.batch_size = config_int(value, key);
    } else if (key == "epochs") {
        cfg.train.epochs = config_int(value, key);
    } else if (key == "seed") {
        cfg.train.seed = config_u64(value, key);
    } else if (key == "eval_every") {
        cfg.train.eval_every = config_int(value, key);
    } else if (key == "train_ratio") {
        cfg.split.train_ratio = config_dbl(value, key);
    } else if (key == "val_ratio") {
        cfg.split.val_ratio = config_dbl(value, key);
    } else if (key == "test_ratio") {
        cfg.split.test_ratio = config_dbl(value, key);
    } else if (key == "split_mode") {
        if (value == "frame-random") {
            cfg.split.mode = SplitMode::FrameRandom;
        } else if (value == "subject-grouped") {
            cfg.split.mode = SplitMode::SubjectGrouped;
        } else {
            throw ConfigError("config: bad split_mode '" + value + "'");
        }
    } else if (key == "split_seed") {
        cfg.split.seed = config_u64(value, key);
        cfg.split_seed_set = true;
    } else {
        throw ConfigError("config: unknown key '" + key + "'");
    }
}

inline RunConfig parse_config_text(const std::string& text, const std::string& name) {
    RunConfig cfg;
    std::size_t pos = 0, line_no = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = detail::trim(text.substr(pos, eol - pos));
        pos = eol + 1;
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: line " + std::to_string(line_no) + " of " + name +
                              " is not key=value");
        }
        apply_config_entry(cfg, detail::trim(line.substr(0, eq)),
                           detail::trim(line.substr(eq + 1)));
    }
    return cfg;
}

inline RunConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("config: cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_text(text, path.string());
}

inline std::string config_to_text(const RunConfig& cfg) {
    std::string s;
    s += "num_convolutions=" + std::to_string(cfg.arch.num_convolutions) + "\n";
    s += "num_hidden_layers=" + std::to_string(cfg.arch.num_hidden_layers) + "\n";
    s += "units_per_hidden_layer=" + std::to_string(cfg.arch.units_per_hidden_layer) + "\n";
    s += "dropout_rate=" + format_double(cfg.arch.dropout_rate) + "\n";
    s += "input_height=" + std::to_string(cfg.arch.input_height) + "\n";
    s += "input_width=" + std::to_string(cfg.arch.input_width) + "\n";
    s += "learning_rate=" + format_double(cfg.train.learning_rate) + "\n";
    s += "momentum=" + format_double(cfg.train.momentum) + "\n";
    s += "batch_size=" + std::to_string(cfg.train.batch_size) + "\n";
    s += "epochs=" + std::to_string(cfg.train.epochs) + "\n";
    s += "seed=" + std::to_string(cfg.train.seed) + "\n";
    s += "eval_every=" + std::to_string(cfg.train.eval_every) + "\n";
    s += "train_ratio=" + format_double(cfg.split.train_ratio) + "\n";
    s += "val_ratio=" + format_double(cfg.split.val_ratio) + "\n";
    s += "test_ratio=" + format_double(cfg.split.test_ratio) + "\n";
    s += std::string("split_mode=") +
         (cfg.split.mode == SplitMode::FrameRandom ? "frame-random" : "subject-grouped") +
         "\n";
    if (cfg.split_seed_set) s += "split_seed=" + std::to_string(cfg.split.seed) + "\n";
    return s;
}

inline void save_config_file(const RunConfig& cfg, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("config: cannot write " + path.string());
    out << config_to_text(cfg);
    if (!out) throw IoError("config: write failed for " + path.string());
}

}  // namespace smilenet
