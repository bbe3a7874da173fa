#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "smilenet/errors.hpp"

namespace smilenet {

// Grayscale image with intensities in [0,1].
struct GrayImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> pixels;  // row-major, height*width

    double at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }
    double& at(std::size_t r, std::size_t c) { return pixels[r * width + c]; }
};

class PgmError : public ParseError {
public:
    enum class Kind { BadMagic, Truncated, MaxvalTooLarge, Malformed };

    PgmError(Kind kind, const std::string& msg) : ParseError(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

namespace detail {

// Reads the next header token, skipping whitespace and '#' comments.
inline std::string pgm_token(std::istream& in) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    return tok;
}

inline long pgm_int(std::istream& in, const char* what) {
    const std::string tok = pgm_token(in);
    if (tok.empty()) {
        throw PgmError(PgmError::Kind::Malformed,
                       std::string("pgm: missing ") + what + " in header");
    }
    try {
        std::size_t used = 0;
        const long v = std::stol(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw PgmError(PgmError::Kind::Malformed,
                       std::string("pgm: bad ") + what + " token '" + tok + "'");
    }
}

}  // namespace detail

struct PgmHeader {
    std::size_t width = 0;
    std::size_t height = 0;
    int maxval = 0;
};

inline PgmHeader read_pgm_header(std::istream& in, const std::string& name) {
    const std::string magic = detail::pgm_token(in);
    if (magic != "P5") {
        throw PgmError(PgmError::Kind::BadMagic,
                       "pgm: bad magic '" + magic + "' in " + name + ", expected P5");
    }
    const long w = detail::pgm_int(in, "width");
    const long h = detail::pgm_int(in, "height");
    const long maxval = detail::pgm_int(in, "maxval");
    if (w < 1 || h < 1) {
        throw PgmError(PgmError::Kind::Malformed,
                       "pgm: non-positive dimensions in " + name);
    }
    if (maxval > 255) {
        throw PgmError(PgmError::Kind::MaxvalTooLarge,
                       "pgm: maxval " + std::to_string(maxval) + " > 255 in " + name);
    }
    if (maxval < 1) {
        throw PgmError(PgmError::Kind::Malformed, "pgm: non-positive maxval in " + name);
    }
    return PgmHeader{static_cast<std::size_t>(w), static_cast<std::size_t>(h),
                     static_cast<int>(maxval)};
}

// Binary PGM ("P5"), maxval <= 255; intensities are divided by maxval.
inline GrayImage load_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("pgm: cannot open " + path.string());
    const PgmHeader hdr = read_pgm_header(in, path.string());
    // The single whitespace byte after maxval was consumed by the tokenizer.
    GrayImage img;
    img.width = hdr.width;
    img.height = hdr.height;
    const std::size_t n = hdr.width * hdr.height;
    std::vector<unsigned char> raw(n);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
        throw PgmError(PgmError::Kind::Truncated,
                       "pgm: truncated payload in " + path.string() + " (" +
                           std::to_string(in.gcount()) + " of " + std::to_string(n) +
                           " bytes)");
    }
    img.pixels.resize(n);
    const double inv = 1.0 / static_cast<double>(hdr.maxval);
    for (std::size_t i = 0; i < n; ++i) img.pixels[i] = raw[i] * inv;
    return img;
}

// Header-only read; used to size crop boxes without decoding payloads.
inline PgmHeader read_pgm_dims(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("pgm: cannot open " + path.string());
    return read_pgm_header(in, path.string());
}

inline void save_pgm(const GrayImage& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("pgm: cannot write " + path.string());
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> raw(img.pixels.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double v = std::clamp(img.pixels[i], 0.0, 1.0);
        raw[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("pgm: write failed for " + path.string());
}

// Axis-aligned rectangle in pixel-index coordinates, corners inclusive:
// x in [x0,x1], y in [y0,y1]. A box whose corners coincide covers one pixel.
struct Box {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    bool operator==(const Box&) const = default;
};

namespace detail {

inline double bilinear_sample(const GrayImage& img, double y, double x) {
    const std::size_t xi = static_cast<std::size_t>(std::floor(x));
    const std::size_t yi = static_cast<std::size_t>(std::floor(y));
    const std::size_t xi1 = std::min(xi + 1, img.width - 1);
    const std::size_t yi1 = std::min(yi + 1, img.height - 1);
    const double tx = x - static_cast<double>(xi);
    const double ty = y - static_cast<double>(yi);
    const double top = img.at(yi, xi) * (1.0 - tx) + img.at(yi, xi1) * tx;
    const double bot = img.at(yi1, xi) * (1.0 - tx) + img.at(yi1, xi1) * tx;
    return top * (1.0 - ty) + bot * ty;
}

}  // namespace detail

// Bilinear crop-and-resize with corner alignment: the output corner pixels
// sample the box corners exactly. A single-pixel output dimension samples the
// box midpoint along that axis.
inline GrayImage crop_resize(const GrayImage& img, const Box& box, std::size_t target_h,
                             std::size_t target_w) {
    if (target_h < 1 || target_w < 1) {
        throw ConfigError("crop_resize: target dimensions must be >= 1");
    }
    if (!(box.x1 >= box.x0) || !(box.y1 >= box.y0)) {
        throw ConfigError("crop_resize: degenerate box");
    }
    if (box.x0 < 0 || box.y0 < 0 || box.x1 > static_cast<double>(img.width - 1) ||
        box.y1 > static_cast<double>(img.height - 1)) {
        throw ConfigError("crop_resize: box outside image bounds");
    }

    GrayImage out;
    out.height = target_h;
    out.width = target_w;
    out.pixels.resize(target_h * target_w);
    for (std::size_t r = 0; r < target_h; ++r) {
        const double y = target_h > 1
                             ? box.y0 + static_cast<double>(r) * box.height() /
                                            static_cast<double>(target_h - 1)
                             : 0.5 * (box.y0 + box.y1);
        for (std::size_t c = 0; c < target_w; ++c) {
            const double x = target_w > 1
                                 ? box.x0 + static_cast<double>(c) * box.width() /
                                                static_cast<double>(target_w - 1)
                                 : 0.5 * (box.x0 + box.x1);
            out.at(r, c) = detail::bilinear_sample(img, y, x);
        }
    }
    return out;
}

inline Box full_image_box(const GrayImage& img) {
    return Box{0.0, 0.0, static_cast<double>(img.width - 1),
               static_cast<double>(img.height - 1)};
}

}  // namespace smilenet
