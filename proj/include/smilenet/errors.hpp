#pragma once

#include <stdexcept>
#include <string>

namespace smilenet {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor/layer dimension disagreements. The message names the offending
// dimension so callers can report it verbatim.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Malformed external input (PGM header, manifest CSV, config file, stub file).
class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg) : Error(msg) {}
};

// Filesystem-level failures: missing file, short read, unwritable directory.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// Semantically invalid configuration or arguments (bad rate, bad ratios,
// unknown config key, label out of range).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Checkpoint file rejections, one kind per failure mode.
class CheckpointError : public Error {
public:
    enum class Kind { BadMagic, BadVersion, ShapeMismatch, Truncated, Malformed };

    CheckpointError(Kind kind, const std::string& msg) : Error(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

// Training diverged: non-finite loss. Carries the epoch/batch for diagnostics.
class DivergenceError : public Error {
public:
    DivergenceError(int epoch, int batch, const std::string& msg)
        : Error(msg), epoch_(epoch), batch_(batch) {}
    int epoch() const { return epoch_; }
    int batch() const { return batch_; }

private:
    int epoch_;
    int batch_;
};

}  // namespace smilenet
