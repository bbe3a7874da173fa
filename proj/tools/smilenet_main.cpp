// Command-line entry point: synthetic corpus generation, preprocessing,
// training, greedy model selection, evaluation and repeat-experiment
// statistics over PGM corpora with CSV manifests.
//
// Exit codes: 0 success, 1 runtime/data error, 2 usage/config error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <streambuf>
#include <string>
#include <vector>

#include "smilenet/smilenet.hpp"

namespace fs = std::filesystem;
using namespace smilenet;

namespace {

constexpr std::uint64_t kInitTag = 0x696e6974ULL;
constexpr std::uint64_t kRunSplitTag = 0x72756e73ULL;
constexpr std::uint64_t kRunTrainTag = 0x72756e74ULL;

// Mirrors stream output into two sinks (live stdout + the log file).
class TeeBuf : public std::streambuf {
public:
    TeeBuf(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

protected:
    int overflow(int ch) override {
        if (ch == EOF) return EOF;
        const int ra = a_->sputc(static_cast<char>(ch));
        const int rb = b_->sputc(static_cast<char>(ch));
        return (ra == EOF || rb == EOF) ? EOF : ch;
    }
    int sync() override {
        const int ra = a_->pubsync();
        const int rb = b_->pubsync();
        return (ra == 0 && rb == 0) ? 0 : -1;
    }

private:
    std::streambuf* a_;
    std::streambuf* b_;
};

struct LoadedCorpus {
    Manifest manifest;
    Dataset all;                              // aligned with manifest order
    std::map<std::string, std::size_t> index;  // path -> position
};

LoadedCorpus load_corpus(const fs::path& data_dir, const std::string& manifest_override = "") {
    LoadedCorpus corpus;
    fs::path manifest_path = manifest_override.empty()
                                 ? data_dir / "manifest.csv"
                                 : fs::path(manifest_override);
    if (manifest_path.is_relative() && !manifest_override.empty() &&
        !fs::exists(manifest_path)) {
        manifest_path = data_dir / manifest_override;
    }
    corpus.manifest = load_manifest(manifest_path);
    corpus.all = load_dataset(corpus.manifest, data_dir);
    for (std::size_t i = 0; i < corpus.manifest.size(); ++i) {
        corpus.index[corpus.manifest.records[i].path] = i;
    }
    return corpus;
}

Dataset subset(const LoadedCorpus& corpus, const Manifest& part) {
    Dataset out;
    out.reserve(part.size());
    for (const auto& r : part.records) {
        out.push_back(corpus.all[corpus.index.at(r.path)]);
    }
    return out;
}

void infer_input_dims(RunConfig& cfg, const LoadedCorpus& corpus) {
    if (corpus.all.empty()) throw ConfigError("data: empty corpus");
    const auto& shape = corpus.all[0].image.shape();
    if (cfg.arch.input_height == 0) cfg.arch.input_height = static_cast<int>(shape[1]);
    if (cfg.arch.input_width == 0) cfg.arch.input_width = static_cast<int>(shape[2]);
    if (shape[1] != static_cast<std::size_t>(cfg.arch.input_height) ||
        shape[2] != static_cast<std::size_t>(cfg.arch.input_width)) {
        throw Error("data: corpus images are " + std::to_string(shape[1]) + "x" +
                    std::to_string(shape[2]) + " but the configuration expects " +
                    std::to_string(cfg.arch.input_height) + "x" +
                    std::to_string(cfg.arch.input_width));
    }
}

struct Splits {
    Dataset train, val, test;
};

Splits split_corpus(const LoadedCorpus& corpus, const RunConfig& cfg) {
    SplitSpec spec = cfg.split;
    spec.seed = cfg.effective_split_seed();
    SplitResult parts = split(corpus.manifest, spec);
    return Splits{subset(corpus, parts.train), subset(corpus, parts.val),
                  subset(corpus, parts.test)};
}

void write_report_csv(const TrainReport& report, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("report: cannot write " + path.string());
    out << "epoch,train_loss,val_acc,test_acc,secs\n";
    for (const auto& e : report.epochs) {
        out << e.epoch << "," << format_double(e.train_loss) << ",";
        if (e.evaluated) out << format_double(e.val_accuracy);
        out << ",";
        if (e.evaluated) out << format_double(e.test_accuracy);
        out << "," << format_double(e.seconds) << "\n";
    }
    if (!out) throw IoError("report: write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

int cmd_synth(const std::string& out_dir, int n, int height, int width, double noise,
              std::uint64_t seed) {
    auto items = synth_generate(n, height, width, noise, seed);
    write_corpus(items, out_dir);
    std::cout << "wrote " << n << " images and manifest.csv to " << out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// preprocess
// ---------------------------------------------------------------------------

int cmd_preprocess(const std::string& manifest_path, const std::string& out_dir,
                   const std::string& kind, int height, int width,
                   const std::vector<std::size_t>& mouth_indices, double margin) {
    const fs::path manifest_file(manifest_path);
    const fs::path base_dir = manifest_file.parent_path();
    Manifest manifest = load_manifest(manifest_file);
    if (manifest.empty()) throw Error("preprocess: empty manifest");

    const int target_h = height > 0 ? height : (kind == "mouth" ? 69 : 128);
    const int target_w = width > 0 ? width : (kind == "mouth" ? 85 : 104);

    std::optional<Box> mouth_box;
    if (kind == "mouth") {
        if (mouth_indices.empty()) {
            throw ConfigError("preprocess: --input-kind mouth requires --mouth-indices");
        }
        // Clamp bound: the smallest dims across the corpus.
        std::size_t min_w = SIZE_MAX, min_h = SIZE_MAX;
        for (const auto& r : manifest.records) {
            fs::path p(r.path);
            if (p.is_relative()) p = base_dir / p;
            const PgmHeader hdr = read_pgm_dims(p);
            min_w = std::min(min_w, hdr.width);
            min_h = std::min(min_h, hdr.height);
        }
        mouth_box = global_mouth_box(manifest, mouth_indices, margin, min_w, min_h);
    }

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("preprocess: cannot create directory " + out_dir);

    Manifest out_manifest;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        const ManifestRecord& r = manifest.records[i];
        fs::path p(r.path);
        if (p.is_relative()) p = base_dir / p;
        GrayImage img = load_pgm(p);
        const Box box = mouth_box ? *mouth_box : full_image_box(img);
        GrayImage cropped = crop_resize(img, box, static_cast<std::size_t>(target_h),
                                        static_cast<std::size_t>(target_w));
        ManifestRecord out_rec = r;
        out_rec.path = corpus_image_name(i);
        out_rec.landmarks.clear();  // stale after cropping
        save_pgm(cropped, fs::path(out_dir) / out_rec.path);
        out_manifest.records.push_back(std::move(out_rec));
    }
    save_manifest(out_manifest, fs::path(out_dir) / "manifest.csv");
    std::cout << "wrote " << out_manifest.size() << " " << kind << " crops ("
              << target_h << "x" << target_w << ") to " << out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_path, std::optional<std::uint64_t> seed_override,
              const std::string& manifest_override) {
    RunConfig cfg = load_config_file(config_path);
    if (seed_override) {
        cfg.train.seed = *seed_override;
        cfg.split_seed_set = false;  // re-derive from the overridden seed
    }
    LoadedCorpus corpus = load_corpus(data_dir, manifest_override);
    infer_input_dims(cfg, corpus);
    Splits splits = split_corpus(corpus, cfg);

    Network net = build(cfg.arch, derive_seed(cfg.train.seed, kInitTag));

    std::ofstream log_file(out_path + ".log", std::ios::binary | std::ios::trunc);
    if (!log_file) throw IoError("train: cannot write " + out_path + ".log");
    TeeBuf tee(std::cout.rdbuf(), log_file.rdbuf());
    std::ostream log(&tee);

    TrainReport report = train(net, splits.train, splits.val, splits.test, cfg.train, &log);

    const std::size_t bytes = save_checkpoint(net, out_path);
    write_report_csv(report, out_path + ".report.csv");
    std::cout << "checkpoint " << out_path << " (" << bytes << " bytes)\n";
    if (report.best_epoch > 0) {
        std::cout << "best_epoch " << report.best_epoch << " best_val_acc "
                  << format_double(report.best_val_accuracy) << " test_acc_at_best "
                  << format_double(report.best_epoch_test_accuracy) << " final_test_acc "
                  << format_double(report.final_test_accuracy) << "\n";
    } else {
        std::cout << "no training epochs were run; saved the initialized model\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// select
// ---------------------------------------------------------------------------

Evaluator make_stub_evaluator(const std::string& stub_path) {
    std::ifstream in(stub_path, std::ios::binary);
    if (!in) throw IoError("select: cannot open stub file " + stub_path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("select: empty stub file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "num_convolutions,num_hidden_layers,units_per_hidden_layer,dropout_rate,"
                "val_acc") {
        throw ParseError("select: bad stub header '" + line + "'");
    }
    auto table = std::make_shared<std::map<std::string, double>>();
    auto key_of = [](int convs, int hidden, int units, double rate) {
        return std::to_string(convs) + "," + std::to_string(hidden) + "," +
               std::to_string(units) + "," + format_double(rate);
    };
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string cur;
        for (char ch : line) {
            if (ch == ',') {
                fields.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(ch);
            }
        }
        fields.push_back(cur);
        if (fields.size() != 5) {
            throw ParseError("select: stub line " + std::to_string(line_no) +
                             " has " + std::to_string(fields.size()) + " fields");
        }
        try {
            (*table)[key_of(std::stoi(fields[0]), std::stoi(fields[1]),
                            std::stoi(fields[2]), std::stod(fields[3]))] =
                std::stod(fields[4]);
        } catch (const std::exception&) {
            throw ParseError("select: bad stub line " + std::to_string(line_no));
        }
    }
    return [table, key_of](const ArchitectureConfig& cfg) {
        const std::string key = key_of(cfg.num_convolutions, cfg.num_hidden_layers,
                                       cfg.units_per_hidden_layer, cfg.dropout_rate);
        auto it = table->find(key);
        if (it == table->end()) {
            throw Error("stub evaluator has no accuracy for (" + key + ")");
        }
        return it->second;
    };
}

int cmd_select(const std::string& config_path, const std::string& data_dir, int epochs,
               const std::string& out_path, const std::string& evaluator_spec,
               const std::string& winner_path_arg, const std::string& manifest_override) {
    RunConfig cfg = load_config_file(config_path);
    cfg.train.epochs = epochs;
    const std::string winner_path =
        winner_path_arg.empty() ? out_path + ".winner.config" : winner_path_arg;

    SelectionGrid grid;
    Evaluator evaluator;
    int threads = 0;

    std::optional<LoadedCorpus> corpus;
    std::optional<Splits> splits;
    if (evaluator_spec.rfind("stub:", 0) == 0) {
        evaluator = make_stub_evaluator(evaluator_spec.substr(5));
        if (cfg.arch.input_height == 0) cfg.arch.input_height = 32;
        if (cfg.arch.input_width == 0) cfg.arch.input_width = 32;
    } else if (!evaluator_spec.empty()) {
        throw ConfigError("select: unknown evaluator '" + evaluator_spec +
                          "', expected stub:FILE");
    } else {
        corpus = load_corpus(data_dir, manifest_override);
        infer_input_dims(cfg, *corpus);
        // One fixed split and one fixed training seed for the whole
        // selection, so the evaluator is a pure function of the candidate.
        splits = split_corpus(*corpus, cfg);
        threads = configured_threads();
        const TrainConfig train_cfg = cfg.train;
        const Splits* sp = &*splits;
        evaluator = [train_cfg, sp](const ArchitectureConfig& arch) {
            Network net = build(arch, derive_seed(train_cfg.seed, kInitTag));
            TrainReport report = train(net, sp->train, sp->val, sp->test, train_cfg);
            return report.best_val_accuracy;
        };
    }

    SelectionReport report = select(grid, cfg.arch, evaluator, threads);
    write_selection_report(report, out_path);
    if (!report.completed) {
        std::cerr << "selection aborted: " << report.error << "\n";
        std::cout << "partial report with " << report.evaluations.size()
                  << " evaluations written to " << out_path << "\n";
        return 1;
    }
    RunConfig winner = cfg;
    winner.arch = report.final_config;
    save_config_file(winner, winner_path);
    std::cout << "selection report (" << report.total_runs << " runs) written to "
              << out_path << "\n";
    std::cout << "winning configuration written to " << winner_path << "\n";
    for (GridParameter p : kGridOrder) {
        std::cout << grid_parameter_name(p) << " "
                  << format_double(report.winners[static_cast<int>(p)]) << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// reduce
// ---------------------------------------------------------------------------

int cmd_reduce(const std::string& manifest_path, const std::string& out_path, double keep,
               std::uint64_t seed) {
    Manifest m = load_manifest(manifest_path);
    Manifest reduced = reduce_no_au(m, keep, seed);
    save_manifest(reduced, out_path);
    std::cout << "kept " << reduced.size() << " of " << m.size() << " records in "
              << out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

int cmd_eval(const std::string& model_path, const std::string& data_dir,
             const std::string& which, const std::string& config_path,
             const std::string& manifest_override) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_config_file(config_path);
    Network net = load_checkpoint(model_path);

    LoadedCorpus corpus = load_corpus(data_dir, manifest_override);
    const auto& shape = corpus.all.at(0).image.shape();
    if (shape[1] != static_cast<std::size_t>(net.config.input_height) ||
        shape[2] != static_cast<std::size_t>(net.config.input_width)) {
        throw Error("eval: checkpoint expects " + std::to_string(net.config.input_height) +
                    "x" + std::to_string(net.config.input_width) + " inputs but the corpus is " +
                    std::to_string(shape[1]) + "x" + std::to_string(shape[2]));
    }
    Splits splits = split_corpus(corpus, cfg);
    const Dataset& part =
        which == "train" ? splits.train : (which == "val" ? splits.val : splits.test);
    std::cout << "classification_rate " << format_double(evaluate_accuracy(net, part))
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// repeat
// ---------------------------------------------------------------------------

int cmd_repeat(int n, const std::string& config_path, const std::string& data_dir,
               std::optional<std::uint64_t> force_seed,
               const std::string& manifest_override) {
    RunConfig cfg = load_config_file(config_path);
    LoadedCorpus corpus = load_corpus(data_dir, manifest_override);
    infer_input_dims(cfg, corpus);

    auto run_one = [&](std::uint64_t run_seed) {
        if (force_seed) run_seed = *force_seed;
        RunConfig run_cfg = cfg;
        run_cfg.train.seed = derive_seed(run_seed, kRunTrainTag);
        run_cfg.split.seed = derive_seed(run_seed, kRunSplitTag);
        run_cfg.split_seed_set = true;
        Splits splits = split_corpus(corpus, run_cfg);
        Network net = build(run_cfg.arch, derive_seed(run_cfg.train.seed, kInitTag));
        TrainReport report =
            train(net, splits.train, splits.val, splits.test, run_cfg.train);
        return report.best_epoch_test_accuracy;
    };
    RepeatStats stats =
        repeat_experiment(run_one, cfg.train.seed, n, configured_threads());
    std::cout << "mean " << format_double(stats.mean) << " std "
              << format_double(stats.sample_std) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"convolutional smile-recognition workbench"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic arc corpus");
    std::string synth_out;
    int synth_n = 2000, synth_h = 32, synth_w = 32;
    double synth_noise = 0.1;
    std::uint64_t synth_seed = 1;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--n", synth_n, "number of images (even)");
    synth->add_option("--height", synth_h, "image height");
    synth->add_option("--width", synth_w, "image width");
    synth->add_option("--noise", synth_noise, "gaussian noise sigma");
    synth->add_option("--seed", synth_seed, "corpus seed");

    // preprocess
    auto* preprocess = app.add_subcommand("preprocess", "crop/downscale a PGM corpus");
    std::string pre_manifest, pre_out, pre_kind;
    int pre_h = 0, pre_w = 0;
    std::vector<std::size_t> pre_indices;
    double pre_margin = 0.0;
    preprocess->add_option("--manifest", pre_manifest, "input manifest CSV")->required();
    preprocess->add_option("--out", pre_out, "output directory")->required();
    preprocess->add_option("--input-kind", pre_kind, "mouth or face")
        ->required()
        ->check(CLI::IsMember({"mouth", "face"}));
    preprocess->add_option("--height", pre_h, "target height (default 69 mouth / 128 face)");
    preprocess->add_option("--width", pre_w, "target width (default 85 mouth / 104 face)");
    preprocess->add_option("--mouth-indices", pre_indices,
                           "landmark indices delimiting the mouth")
        ->delimiter(',');
    preprocess->add_option("--margin", pre_margin, "box margin fraction per side");

    // train
    auto* train_cmd = app.add_subcommand("train", "train a model on a corpus");
    std::string train_config, train_data, train_out;
    std::optional<std::uint64_t> train_seed;
    train_cmd->add_option("--config", train_config, "key=value config file")->required();
    train_cmd->add_option("--data", train_data, "corpus directory")->required();
    train_cmd->add_option("--out", train_out, "checkpoint output path")->required();
    train_cmd->add_option("--seed", train_seed, "override the config seed");
    std::string train_manifest;
    train_cmd->add_option("--manifest", train_manifest,
                          "manifest CSV (default <data>/manifest.csv)");

    // select
    auto* select_cmd = app.add_subcommand("select", "greedy per-parameter selection");
    std::string sel_config, sel_data, sel_out, sel_eval, sel_winner;
    int sel_epochs = 50;
    select_cmd->add_option("--config", sel_config, "key=value config file")->required();
    select_cmd->add_option("--data", sel_data, "corpus directory");
    select_cmd->add_option("--epochs", sel_epochs, "training epochs per candidate");
    select_cmd->add_option("--out", sel_out, "report CSV output path")->required();
    select_cmd->add_option("--evaluator", sel_eval, "stub:FILE replays recorded accuracies");
    select_cmd->add_option("--winner-out", sel_winner,
                           "winning config path (default <out>.winner.config)");
    std::string sel_manifest;
    select_cmd->add_option("--manifest", sel_manifest,
                           "manifest CSV (default <data>/manifest.csv)");

    // reduce
    auto* reduce_cmd =
        app.add_subcommand("reduce", "drop a fraction of the records with no AU set");
    std::string reduce_manifest, reduce_out;
    double reduce_keep = 0.7;
    std::uint64_t reduce_seed = 1;
    reduce_cmd->add_option("--manifest", reduce_manifest, "input manifest CSV")->required();
    reduce_cmd->add_option("--out", reduce_out, "output manifest CSV")->required();
    reduce_cmd->add_option("--keep", reduce_keep, "fraction of no-AU records to keep");
    reduce_cmd->add_option("--seed", reduce_seed, "sampling seed");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "classification rate of a checkpoint");
    std::string eval_model, eval_data, eval_split = "test", eval_config;
    eval_cmd->add_option("--model", eval_model, "checkpoint path")->required();
    eval_cmd->add_option("--data", eval_data, "corpus directory")->required();
    eval_cmd->add_option("--split", eval_split, "train, val or test")
        ->check(CLI::IsMember({"train", "val", "test"}));
    eval_cmd->add_option("--config", eval_config, "config file for the split spec");
    std::string eval_manifest;
    eval_cmd->add_option("--manifest", eval_manifest,
                         "manifest CSV (default <data>/manifest.csv)");

    // repeat
    auto* repeat_cmd = app.add_subcommand("repeat", "repeat-experiment statistics");
    int repeat_n = 10;
    std::string repeat_config, repeat_data;
    std::optional<std::uint64_t> repeat_force_seed;
    repeat_cmd->add_option("--n", repeat_n, "number of runs (>= 2)")->required();
    repeat_cmd->add_option("--config", repeat_config, "key=value config file")->required();
    repeat_cmd->add_option("--data", repeat_data, "corpus directory")->required();
    repeat_cmd->add_option("--force-seed", repeat_force_seed,
                           "use one fixed seed for every run (testing hook)");
    std::string repeat_manifest;
    repeat_cmd->add_option("--manifest", repeat_manifest,
                           "manifest CSV (default <data>/manifest.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) {
            return cmd_synth(synth_out, synth_n, synth_h, synth_w, synth_noise, synth_seed);
        }
        if (preprocess->parsed()) {
            return cmd_preprocess(pre_manifest, pre_out, pre_kind, pre_h, pre_w,
                                  pre_indices, pre_margin);
        }
        if (train_cmd->parsed()) {
            return cmd_train(train_config, train_data, train_out, train_seed,
                             train_manifest);
        }
        if (select_cmd->parsed()) {
            if (sel_eval.empty() && sel_data.empty()) {
                throw ConfigError("select: --data is required without a stub evaluator");
            }
            return cmd_select(sel_config, sel_data, sel_epochs, sel_out, sel_eval,
                              sel_winner, sel_manifest);
        }
        if (reduce_cmd->parsed()) {
            return cmd_reduce(reduce_manifest, reduce_out, reduce_keep, reduce_seed);
        }
        if (eval_cmd->parsed()) {
            return cmd_eval(eval_model, eval_data, eval_split, eval_config, eval_manifest);
        }
        if (repeat_cmd->parsed()) {
            return cmd_repeat(repeat_n, repeat_config, repeat_data, repeat_force_seed,
                              repeat_manifest);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
