#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "smilenet/errors.hpp"
#include "smilenet/image.hpp"
#include "smilenet/rng.hpp"
#include "smilenet/train.hpp"
#include "smilenet/util.hpp"

namespace smilenet {

struct LandmarkPoint {
    double x = 0, y = 0;
    bool operator==(const LandmarkPoint&) const = default;
};

struct ManifestRecord {
    std::string path;
    int label = 0;  // AU12 set/unset
    std::optional<int> any_au;
    std::optional<std::string> subject_id;
    std::vector<LandmarkPoint> landmarks;  // empty when absent

    bool operator==(const ManifestRecord&) const = default;
};

struct Manifest {
    std::vector<ManifestRecord> records;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

inline double parse_double(const std::string& s, const std::string& what) {
    double v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ParseError("manifest: bad " + what + " '" + s + "'");
    }
    return v;
}

inline void validate_manifest(const Manifest& m) {
    std::set<std::string> seen;
    std::optional<std::size_t> landmark_len;
    for (const auto& r : m.records) {
        if (!seen.insert(r.path).second) {
            throw ParseError("manifest: duplicate path '" + r.path + "'");
        }
        if (r.label != 0 && r.label != 1) {
            throw ParseError("manifest: non-binary label for '" + r.path + "'");
        }
        if (r.any_au && *r.any_au != 0 && *r.any_au != 1) {
            throw ParseError("manifest: non-binary any_au for '" + r.path + "'");
        }
        if (!r.landmarks.empty()) {
            if (landmark_len && *landmark_len != r.landmarks.size()) {
                throw ParseError("manifest: landmark count differs at '" + r.path + "'");
            }
            landmark_len = r.landmarks.size();
        }
    }
}

}  // namespace detail

inline const std::string kManifestHeader = "path,label,any_au,subject_id,landmarks";

// CSV schema: path,label,any_au,subject_id,landmarks with landmarks encoded
// as x1:y1;x2:y2;... Optional columns are left empty.
inline void save_manifest(const Manifest& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("manifest: cannot write " + path.string());
    out << kManifestHeader << "\n";
    for (const auto& r : m.records) {
        out << r.path << "," << r.label << ",";
        if (r.any_au) out << *r.any_au;
        out << ",";
        if (r.subject_id) out << *r.subject_id;
        out << ",";
        for (std::size_t i = 0; i < r.landmarks.size(); ++i) {
            if (i) out << ";";
            out << format_double(r.landmarks[i].x) << ":" << format_double(r.landmarks[i].y);
        }
        out << "\n";
    }
    if (!out) throw IoError("manifest: write failed for " + path.string());
}

inline Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("manifest: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError("manifest: empty file " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kManifestHeader) {
        throw ParseError("manifest: bad header '" + line + "' in " + path.string());
    }
    Manifest m;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != 5) {
            throw ParseError("manifest: line " + std::to_string(line_no) + " has " +
                             std::to_string(fields.size()) + " fields, expected 5");
        }
        ManifestRecord r;
        r.path = fields[0];
        if (r.path.empty()) {
            throw ParseError("manifest: empty path at line " + std::to_string(line_no));
        }
        r.label = static_cast<int>(detail::parse_double(fields[1], "label"));
        if (!fields[2].empty()) {
            r.any_au = static_cast<int>(detail::parse_double(fields[2], "any_au"));
        }
        if (!fields[3].empty()) r.subject_id = fields[3];
        if (!fields[4].empty()) {
            std::stringstream ss(fields[4]);
            std::string part;
            while (std::getline(ss, part, ';')) {
                const auto colon = part.find(':');
                if (colon == std::string::npos) {
                    throw ParseError("manifest: bad landmark '" + part + "' at line " +
                                     std::to_string(line_no));
                }
                r.landmarks.push_back(
                    LandmarkPoint{detail::parse_double(part.substr(0, colon), "landmark x"),
                                  detail::parse_double(part.substr(colon + 1), "landmark y")});
            }
        }
        m.records.push_back(std::move(r));
    }
    detail::validate_manifest(m);
    return m;
}

// ---------------------------------------------------------------------------
// Global mouth bounding box: the union over all images of the per-image
// bounding boxes of the selected landmark points, expanded by `margin` of the
// box extent on each side and clamped to the image bounds. One box is then
// applied identically to every image.
// ---------------------------------------------------------------------------

inline Box global_mouth_box(const Manifest& m, const std::vector<std::size_t>& mouth_indices,
                            double margin, std::size_t image_width,
                            std::size_t image_height) {
    if (m.empty()) throw ConfigError("global_mouth_box: empty manifest");
    if (mouth_indices.empty()) throw ConfigError("global_mouth_box: no landmark indices");
    if (margin < 0) throw ConfigError("global_mouth_box: negative margin");

    Box box{1e300, 1e300, -1e300, -1e300};
    for (const auto& r : m.records) {
        if (r.landmarks.empty()) {
            throw ConfigError("global_mouth_box: record '" + r.path + "' has no landmarks");
        }
        for (std::size_t idx : mouth_indices) {
            if (idx >= r.landmarks.size()) {
                throw ConfigError("global_mouth_box: landmark index " + std::to_string(idx) +
                                  " out of range for '" + r.path + "'");
            }
            const LandmarkPoint& p = r.landmarks[idx];
            box.x0 = std::min(box.x0, p.x);
            box.y0 = std::min(box.y0, p.y);
            box.x1 = std::max(box.x1, p.x);
            box.y1 = std::max(box.y1, p.y);
        }
    }
    const double mx = margin * box.width();
    const double my = margin * box.height();
    box.x0 = std::max(0.0, box.x0 - mx);
    box.y0 = std::max(0.0, box.y0 - my);
    box.x1 = std::min(static_cast<double>(image_width - 1), box.x1 + mx);
    box.y1 = std::min(static_cast<double>(image_height - 1), box.y1 + my);
    return box;
}

// ---------------------------------------------------------------------------
// Dataset splitting.
// ---------------------------------------------------------------------------

enum class SplitMode { FrameRandom, SubjectGrouped };

struct SplitSpec {
    double train_ratio = 0.6;
    double val_ratio = 0.2;
    double test_ratio = 0.2;
    std::uint64_t seed = 1;
    SplitMode mode = SplitMode::FrameRandom;
};

struct SplitResult {
    Manifest train, val, test;
};

inline void validate_split_spec(const SplitSpec& spec) {
    if (spec.train_ratio <= 0 || spec.val_ratio <= 0 || spec.test_ratio <= 0) {
        throw ConfigError("split: ratios must be positive");
    }
    if (std::abs(spec.train_ratio + spec.val_ratio + spec.test_ratio - 1.0) > 1e-9) {
        throw ConfigError("split: ratios must sum to 1");
    }
}

// Frame-random: seeded shuffle then contiguous slicing, val and test sized
// floor(ratio*n) with the remainder going to train. Subject-grouped: whole
// subjects are greedily assigned to the split with the largest remaining
// frame deficit; record order within splits follows the input manifest.
inline SplitResult split(const Manifest& m, const SplitSpec& spec) {
    validate_split_spec(spec);
    if (m.empty()) throw ConfigError("split: empty manifest");
    const std::size_t n = m.size();
    if (n < 5) throw ConfigError("split: manifest has " + std::to_string(n) + " records, need >= 5");

    SplitResult out;
    if (spec.mode == SplitMode::FrameRandom) {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        Rng rng(spec.seed);
        rng.shuffle(order);
        const std::size_t n_val = static_cast<std::size_t>(spec.val_ratio * static_cast<double>(n));
        const std::size_t n_test = static_cast<std::size_t>(spec.test_ratio * static_cast<double>(n));
        const std::size_t n_train = n - n_val - n_test;
        for (std::size_t i = 0; i < n; ++i) {
            const ManifestRecord& r = m.records[order[i]];
            if (i < n_train) {
                out.train.records.push_back(r);
            } else if (i < n_train + n_val) {
                out.val.records.push_back(r);
            } else {
                out.test.records.push_back(r);
            }
        }
        return out;
    }

    // Subject-grouped.
    std::vector<std::string> subjects;
    std::map<std::string, std::size_t> frames_per_subject;
    for (const auto& r : m.records) {
        if (!r.subject_id) {
            throw ConfigError("split: record '" + r.path + "' lacks subject_id");
        }
        auto [it, inserted] = frames_per_subject.try_emplace(*r.subject_id, 0);
        if (inserted) subjects.push_back(*r.subject_id);
        ++it->second;
    }
    Rng rng(spec.seed);
    rng.shuffle(subjects);

    const double targets[3] = {spec.train_ratio * static_cast<double>(n),
                               spec.val_ratio * static_cast<double>(n),
                               spec.test_ratio * static_cast<double>(n)};
    double assigned[3] = {0, 0, 0};
    std::map<std::string, int> subject_split;
    for (const auto& s : subjects) {
        int best = 0;
        double best_deficit = targets[0] - assigned[0];
        for (int k = 1; k < 3; ++k) {
            const double deficit = targets[k] - assigned[k];
            if (deficit > best_deficit) {
                best_deficit = deficit;
                best = k;
            }
        }
        subject_split[s] = best;
        assigned[best] += static_cast<double>(frames_per_subject[s]);
    }
    for (const auto& r : m.records) {
        switch (subject_split[*r.subject_id]) {
            case 0: out.train.records.push_back(r); break;
            case 1: out.val.records.push_back(r); break;
            default: out.test.records.push_back(r); break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dataset reduction: keep every record with any_au=1 and a seeded uniform
// sample of floor(keep_fraction*m) of the m records with any_au=0. Output
// preserves manifest order.
// ---------------------------------------------------------------------------

inline Manifest reduce_no_au(const Manifest& m, double keep_fraction, std::uint64_t seed) {
    if (!(keep_fraction >= 0.0 && keep_fraction <= 1.0)) {
        throw ConfigError("reduce_no_au: keep_fraction outside [0,1]");
    }
    std::vector<std::size_t> no_au_positions;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (!m.records[i].any_au) {
            throw ConfigError("reduce_no_au: record '" + m.records[i].path +
                              "' lacks the any_au flag");
        }
        if (*m.records[i].any_au == 0) no_au_positions.push_back(i);
    }
    const std::size_t keep =
        static_cast<std::size_t>(keep_fraction * static_cast<double>(no_au_positions.size()));

    // Partial Fisher-Yates: the first `keep` entries are a uniform sample.
    Rng rng(seed);
    std::vector<std::size_t> pool = no_au_positions;
    std::vector<bool> kept(m.size(), false);
    for (std::size_t i = 0; i < keep; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
        std::swap(pool[i], pool[j]);
        kept[pool[i]] = true;
    }
    Manifest out;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (*m.records[i].any_au == 1 || kept[i]) out.records.push_back(m.records[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic smile corpus: anti-aliased parabolic arcs on noisy backgrounds.
// Concave-up arcs (smiles, in y-up orientation) are labeled 1, concave-down
// arcs 0. Landmarks are the arc endpoints and vertex; subject ids cycle
// through ten synthetic subjects; any_au mirrors the label.
// ---------------------------------------------------------------------------

struct SynthItem {
    GrayImage image;
    ManifestRecord record;  // path filled by write_corpus
};

namespace detail {

inline constexpr std::uint64_t kSynthTag = 0x73796e7468ULL;

inline void splat_arc(GrayImage& img, double cx, double cy, double half_span,
                      double curvature, int sign, double half_thickness,
                      double contrast) {
    const double step = 0.25;
    const int reach = static_cast<int>(std::ceil(half_thickness + 1.0));
    std::vector<double> coverage(img.pixels.size(), 0.0);
    for (double x = cx - half_span; x <= cx + half_span; x += step) {
        const double dxc = x - cx;
        const double r = cy + static_cast<double>(sign) * curvature * dxc * dxc;
        const int pc0 = static_cast<int>(std::floor(x)) - reach;
        const int pr0 = static_cast<int>(std::floor(r)) - reach;
        for (int pr = pr0; pr <= pr0 + 2 * reach + 1; ++pr) {
            if (pr < 0 || pr >= static_cast<int>(img.height)) continue;
            for (int pc = pc0; pc <= pc0 + 2 * reach + 1; ++pc) {
                if (pc < 0 || pc >= static_cast<int>(img.width)) continue;
                const double d = std::hypot(static_cast<double>(pc) - x,
                                            static_cast<double>(pr) - r);
                const double cov = std::clamp(half_thickness + 0.5 - d, 0.0, 1.0);
                double& cell = coverage[static_cast<std::size_t>(pr) * img.width +
                                        static_cast<std::size_t>(pc)];
                cell = std::max(cell, cov);
            }
        }
    }
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        img.pixels[i] += contrast * coverage[i];
    }
}

}  // namespace detail

inline std::vector<SynthItem> synth_generate(int n, int image_h, int image_w,
                                             double noise_sigma, std::uint64_t seed) {
    if (n < 2) throw ConfigError("synth: n must be >= 2");
    if (n % 2 != 0) throw ConfigError("synth: n must be even for class balance");
    if (image_h < 16 || image_w < 16) {
        throw ConfigError("synth: dims " + std::to_string(image_h) + "x" +
                          std::to_string(image_w) + " too small to render (min 16)");
    }
    if (noise_sigma < 0) throw ConfigError("synth: negative noise_sigma");

    const std::uint64_t root = derive_seed(seed, detail::kSynthTag);
    std::vector<SynthItem> items(static_cast<std::size_t>(n));
    const double hmax = static_cast<double>(image_h - 1);
    const double wmax = static_cast<double>(image_w - 1);

    for (int i = 0; i < n; ++i) {
        Rng rng(derive_seed(root, static_cast<std::uint64_t>(i)));
        const int label = i % 2;  // interleave for an exact even split
        const double background = rng.uniform(0.10, 0.30);
        const double contrast = rng.uniform(0.55, 0.95);
        const double cx = rng.uniform(0.40 * wmax, 0.60 * wmax);
        const double cy = rng.uniform(0.40 * hmax, 0.60 * hmax);
        const double half_span = std::min(cx, wmax - cx) * rng.uniform(0.65, 0.95);
        const double depth = rng.uniform(0.12, 0.22) * hmax;
        const double curvature = depth / (half_span * half_span);
        const double half_thickness = rng.uniform(0.6, 1.2);
        // Smile (label 1): arc corners above the vertex, i.e. rows decrease
        // away from the center.
        const int sign = label == 1 ? -1 : 1;

        GrayImage img;
        img.height = static_cast<std::size_t>(image_h);
        img.width = static_cast<std::size_t>(image_w);
        img.pixels.assign(img.height * img.width, background);
        detail::splat_arc(img, cx, cy, half_span, curvature, sign, half_thickness,
                          contrast);
        for (double& p : img.pixels) {
            p = std::clamp(p + noise_sigma * rng.gaussian(), 0.0, 1.0);
        }

        ManifestRecord rec;
        rec.label = label;
        rec.any_au = label;
        rec.subject_id = "s" + std::to_string(i % 10);
        const double end_row = cy + static_cast<double>(sign) * depth;
        rec.landmarks = {LandmarkPoint{cx - half_span, end_row}, LandmarkPoint{cx, cy},
                         LandmarkPoint{cx + half_span, end_row}};
        items[static_cast<std::size_t>(i)] =
            SynthItem{std::move(img), std::move(rec)};
    }
    return items;
}

// ---------------------------------------------------------------------------
// Corpus IO helpers shared by the pipeline commands.
// ---------------------------------------------------------------------------

inline std::string corpus_image_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "img_%05zu.pgm", index);
    return std::string(buf);
}

// Writes one PGM per item plus manifest.csv; manifest paths are relative to
// the directory.
inline Manifest write_corpus(std::vector<SynthItem>& items,
                             const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("corpus: cannot create directory " + dir.string());
    Manifest m;
    for (std::size_t i = 0; i < items.size(); ++i) {
        items[i].record.path = corpus_image_name(i);
        save_pgm(items[i].image, dir / items[i].record.path);
        m.records.push_back(items[i].record);
    }
    save_manifest(m, dir / "manifest.csv");
    return m;
}

// Loads every record's image as a [1,H,W] tensor; paths resolve relative to
// base_dir unless absolute.
inline Dataset load_dataset(const Manifest& m, const std::filesystem::path& base_dir) {
    Dataset data;
    data.reserve(m.size());
    for (const auto& r : m.records) {
        std::filesystem::path p(r.path);
        if (p.is_relative()) p = base_dir / p;
        GrayImage img = load_pgm(p);
        Tensor t({1, img.height, img.width}, std::move(img.pixels));
        data.push_back(Sample{std::move(t), r.label});
    }
    return data;
}

}  // namespace smilenet
