#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "smilenet/errors.hpp"
#include "smilenet/network.hpp"
#include "smilenet/parallel.hpp"
#include "smilenet/util.hpp"

// Greedy per-parameter architecture selection: each of the four grid
// parameters is swept independently with the other three held at their
// defaults, and the final model combines the per-parameter winners.

namespace smilenet {

enum class GridParameter : int { Convolutions = 0, HiddenLayers = 1, Units = 2, Dropout = 3 };

inline constexpr std::array<GridParameter, 4> kGridOrder = {
    GridParameter::Convolutions, GridParameter::HiddenLayers, GridParameter::Units,
    GridParameter::Dropout};

inline const char* grid_parameter_name(GridParameter p) {
    switch (p) {
        case GridParameter::Convolutions: return "num_convolutions";
        case GridParameter::HiddenLayers: return "num_hidden_layers";
        case GridParameter::Units: return "units_per_hidden_layer";
        default: return "dropout_rate";
    }
}

struct SelectionGrid {
    std::vector<double> convolutions = {1, 2, 3};
    double default_convolutions = 1;
    std::vector<double> hidden_layers = {1, 2, 3};
    double default_hidden_layers = 1;
    std::vector<double> units = {100, 200, 300, 400};
    double default_units = 100;
    std::vector<double> dropouts = {0.0, 0.1, 0.5, 0.7};
    double default_dropout = 0.5;

    const std::vector<double>& candidates(GridParameter p) const {
        switch (p) {
            case GridParameter::Convolutions: return convolutions;
            case GridParameter::HiddenLayers: return hidden_layers;
            case GridParameter::Units: return units;
            default: return dropouts;
        }
    }

    double default_value(GridParameter p) const {
        switch (p) {
            case GridParameter::Convolutions: return default_convolutions;
            case GridParameter::HiddenLayers: return default_hidden_layers;
            case GridParameter::Units: return default_units;
            default: return default_dropout;
        }
    }

    std::size_t total_candidates() const {
        return convolutions.size() + hidden_layers.size() + units.size() + dropouts.size();
    }
};

inline void validate_grid(const SelectionGrid& g) {
    for (GridParameter p : kGridOrder) {
        const auto& cands = g.candidates(p);
        if (cands.empty()) {
            throw ConfigError(std::string("grid: empty candidate list for ") +
                              grid_parameter_name(p));
        }
        const double def = g.default_value(p);
        if (std::find(cands.begin(), cands.end(), def) == cands.end()) {
            throw ConfigError(std::string("grid: default for ") + grid_parameter_name(p) +
                              " is not among its candidates");
        }
    }
}

inline void apply_grid_value(ArchitectureConfig& cfg, GridParameter p, double value) {
    switch (p) {
        case GridParameter::Convolutions: cfg.num_convolutions = static_cast<int>(value); break;
        case GridParameter::HiddenLayers: cfg.num_hidden_layers = static_cast<int>(value); break;
        case GridParameter::Units: cfg.units_per_hidden_layer = static_cast<int>(value); break;
        default: cfg.dropout_rate = value; break;
    }
}

// Config with all four parameters at their defaults; input geometry comes
// from the base config.
inline ArchitectureConfig grid_default_config(const SelectionGrid& g,
                                              const ArchitectureConfig& base) {
    ArchitectureConfig cfg = base;
    for (GridParameter p : kGridOrder) apply_grid_value(cfg, p, g.default_value(p));
    return cfg;
}

struct CandidateResult {
    GridParameter parameter;
    double value = 0;
    double val_accuracy = 0;
};

struct SelectionReport {
    std::vector<CandidateResult> evaluations;  // sweep order
    std::array<double, 4> winners{};           // indexed by GridParameter
    std::size_t total_runs = 0;
    ArchitectureConfig final_config;
    bool completed = false;
    std::string error;  // set when a candidate evaluation failed
};

using Evaluator = std::function<double(const ArchitectureConfig&)>;

// Ties go to the candidate closest to the default, then to the smaller value.
inline bool candidate_beats(double value, double accuracy, double best_value,
                            double best_accuracy, double default_value) {
    if (accuracy != best_accuracy) return accuracy > best_accuracy;
    const double d = std::abs(value - default_value);
    const double bd = std::abs(best_value - default_value);
    if (d != bd) return d < bd;
    return value < best_value;
}

// Sweeps every candidate of every parameter (no deduplication: the default
// configuration is evaluated once per sweep it appears in). A failing
// evaluator aborts the selection; the report then carries the evaluations
// that serially preceded the failure and no final config.
inline SelectionReport select(const SelectionGrid& grid, const ArchitectureConfig& base,
                              const Evaluator& evaluator, int threads = 0) {
    validate_grid(grid);
    SelectionReport report;

    struct Slot {
        GridParameter parameter;
        double value;
    };
    std::vector<Slot> slots;
    for (GridParameter p : kGridOrder) {
        for (double v : grid.candidates(p)) slots.push_back({p, v});
    }

    std::vector<double> accuracy(slots.size(), 0.0);
    std::vector<std::optional<std::string>> failure(slots.size());
    if (threads <= 1) {
        for (std::size_t i = 0; i < slots.size(); ++i) {
            ArchitectureConfig cfg = grid_default_config(grid, base);
            apply_grid_value(cfg, slots[i].parameter, slots[i].value);
            try {
                accuracy[i] = evaluator(cfg);
            } catch (const std::exception& e) {
                failure[i] = e.what();
                break;  // serial short-circuit; the report is truncated here anyway
            }
        }
    } else {
        for_each_index(slots.size(), threads, [&](std::size_t i) {
            ArchitectureConfig cfg = grid_default_config(grid, base);
            apply_grid_value(cfg, slots[i].parameter, slots[i].value);
            try {
                accuracy[i] = evaluator(cfg);
            } catch (const std::exception& e) {
                failure[i] = e.what();
            }
        });
    }

    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (failure[i]) {
            report.error = std::string(grid_parameter_name(slots[i].parameter)) + "=" +
                           format_double(slots[i].value) + ": " + *failure[i];
            report.total_runs = report.evaluations.size();
            return report;
        }
        report.evaluations.push_back({slots[i].parameter, slots[i].value, accuracy[i]});
    }
    report.total_runs = report.evaluations.size();

    std::size_t idx = 0;
    for (GridParameter p : kGridOrder) {
        const double def = grid.default_value(p);
        double best_value = 0, best_accuracy = 0;
        bool first = true;
        for (double v : grid.candidates(p)) {
            const double acc = report.evaluations[idx++].val_accuracy;
            if (first || candidate_beats(v, acc, best_value, best_accuracy, def)) {
                best_value = v;
                best_accuracy = acc;
                first = false;
            }
        }
        report.winners[static_cast<int>(p)] = best_value;
    }

    report.final_config = base;
    for (GridParameter p : kGridOrder) {
        apply_grid_value(report.final_config, p, report.winners[static_cast<int>(p)]);
    }
    report.completed = true;
    return report;
}

// Independent brute-force re-derivation of every coordinate winner, compared
// against what select() reports. Kept deliberately separate from select()'s
// running-best loop so the two can disagree.
inline bool exhaustive_coordinate_check(const SelectionGrid& grid,
                                        const ArchitectureConfig& base,
                                        const Evaluator& evaluator) {
    validate_grid(grid);
    SelectionReport report = select(grid, base, evaluator);
    if (!report.completed) return false;

    for (GridParameter p : kGridOrder) {
        const double def = grid.default_value(p);
        const auto& cands = grid.candidates(p);

        // Brute force: score every candidate, then pick the lexicographic
        // best of (accuracy, -distance_to_default, -value).
        std::vector<std::array<double, 3>> keyed;
        for (double v : cands) {
            ArchitectureConfig cfg = grid_default_config(grid, base);
            apply_grid_value(cfg, p, v);
            const double acc = evaluator(cfg);
            keyed.push_back({acc, -std::abs(v - def), -v});
        }
        std::size_t best = 0;
        for (std::size_t i = 1; i < keyed.size(); ++i) {
            if (keyed[i] > keyed[best]) best = i;
        }
        if (cands[best] != report.winners[static_cast<int>(p)]) return false;
    }
    return true;
}

// Report CSV: one `parameter,value,val_acc` row per evaluation, then a final
// block of `final,<parameter>,<value>` rows (or an `error,,<message>` row for
// an aborted run).
inline void write_selection_report(const SelectionReport& report,
                                   const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("selection report: cannot write " + path.string());
    out << "parameter,value,val_acc\n";
    for (const auto& e : report.evaluations) {
        out << grid_parameter_name(e.parameter) << "," << format_double(e.value) << ","
            << format_double(e.val_accuracy) << "\n";
    }
    if (report.completed) {
        for (GridParameter p : kGridOrder) {
            out << "final," << grid_parameter_name(p) << ","
                << format_double(report.winners[static_cast<int>(p)]) << "\n";
        }
    } else {
        std::string msg = report.error;
        for (char& ch : msg) {
            if (ch == ',' || ch == '\n') ch = ' ';
        }
        out << "error,," << msg << "\n";
    }
    if (!out) throw IoError("selection report: write failed for " + path.string());
}

}  // namespace smilenet
