// Acceptance suite: runs every release criterion end to end and prints one
// PASS/FAIL line per criterion. Returns nonzero if any gating criterion
// fails. In-process checks use the library; the end-to-end criteria drive
// the actual CLI binary.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "smilenet/smilenet.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace smilenet;

namespace {

struct Outcome {
    int id;
    bool pass;
    bool gating;
    std::string name;
    std::string detail;
};

std::vector<Outcome> g_outcomes;

void record(int id, const std::string& name, bool pass, const std::string& detail,
            bool gating = true) {
    g_outcomes.push_back({id, pass, gating, name, detail});
    std::cout << "criterion " << id << " " << (pass ? "PASS" : "FAIL") << "  " << name
              << " -- " << detail << (gating ? "" : " [optional]") << std::endl;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) { return format_double(v); }

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd =
        std::string(SMILENET_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return status == -1 ? -1 : WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------------------
// 1. Gradient suite
// ---------------------------------------------------------------------------

void criterion_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(20260809);
    double worst = 0.0;
    auto fold = [&](double err) { worst = std::max(worst, err); };

    for (int it = 0; it < 20; ++it) {
        // conv2d
        {
            const std::size_t C = 1 + rng.below(2), k = 2 + rng.below(2);
            const std::size_t H = k + 1 + rng.below(4), W = k + 1 + rng.below(4);
            const std::size_t O = 1 + rng.below(3);
            Tensor input = oracles::random_tensor({C, H, W}, rng);
            ConvParams p = ConvParams::zeros(O, C, k);
            for (std::size_t i = 0; i < p.kernels.size(); ++i)
                p.kernels[i] = rng.uniform(-1, 1);
            for (std::size_t i = 0; i < p.bias.size(); ++i) p.bias[i] = rng.uniform(-1, 1);
            Tensor w = oracles::random_tensor({O, H - k + 1, W - k + 1}, rng);
            ConvGrad g = conv2d_backward(input, p, w);
            auto loss = [&] { return oracles::weighted_sum(conv2d_valid(input, p), w); };
            fold(oracles::worst_gradient_error(loss, input, g.input));
            fold(oracles::worst_gradient_error(loss, p.kernels, g.params.kernels));
            fold(oracles::worst_gradient_error(loss, p.bias, g.params.bias));
        }
        // maxpool
        {
            Tensor input = oracles::random_tensor({2, 6, 6}, rng);
            Tensor w = oracles::random_tensor({2, 3, 3}, rng);
            PoolResult fwd = maxpool2x2_forward(input);
            Tensor g = maxpool2x2_backward(w, fwd);
            auto loss = [&] {
                return oracles::weighted_sum(maxpool2x2_forward(input).output, w);
            };
            fold(oracles::worst_gradient_error(loss, input, g));
        }
        // dense
        {
            const std::size_t n = 2 + rng.below(6), m = 1 + rng.below(5);
            Tensor x = oracles::random_tensor({n}, rng);
            DenseParams p = DenseParams::zeros(m, n);
            for (std::size_t i = 0; i < p.weights.size(); ++i)
                p.weights[i] = rng.uniform(-1, 1);
            for (std::size_t i = 0; i < p.bias.size(); ++i) p.bias[i] = rng.uniform(-1, 1);
            Tensor w = oracles::random_tensor({m}, rng);
            DenseGrad g = dense_backward(x, p, w);
            auto loss = [&] { return oracles::weighted_sum(dense_forward(x, p), w); };
            fold(oracles::worst_gradient_error(loss, x, g.input));
            fold(oracles::worst_gradient_error(loss, p.weights, g.params.weights));
            fold(oracles::worst_gradient_error(loss, p.bias, g.params.bias));
        }
        // relu
        {
            Tensor x = oracles::random_tensor({12}, rng);
            Tensor w = oracles::random_tensor({12}, rng);
            Tensor g = relu_backward(x, w);
            auto loss = [&] { return oracles::weighted_sum(relu(x), w); };
            fold(oracles::worst_gradient_error(loss, x, g));
        }
        // softmax + cross entropy
        {
            const std::size_t n = 2 + rng.below(4);
            Tensor logits = oracles::random_tensor({n}, rng, -2, 2);
            const std::size_t label = rng.below(n);
            Tensor g = cross_entropy_logit_grad(softmax(logits), label);
            auto loss = [&] { return cross_entropy(softmax(logits), label); };
            fold(oracles::worst_gradient_error(loss, logits, g));
        }
        // dropout at rate 0 composed after a relu
        {
            Tensor x = oracles::random_tensor({10}, rng);
            Tensor w = oracles::random_tensor({10}, rng);
            Rng unused(1);
            DropoutResult d = dropout_forward(relu(x), 0.0, unused);
            Tensor g = relu_backward(x, dropout_backward(w, d.mask));
            auto loss = [&] {
                Rng r2(1);
                return oracles::weighted_sum(dropout_forward(relu(x), 0.0, r2).output, w);
            };
            fold(oracles::worst_gradient_error(loss, x, g));
        }
    }

    // Whole tiny network: 1 conv, 1 hidden layer of 10 units, 12x12 input,
    // dropout 0.
    ArchitectureConfig tiny;
    tiny.num_convolutions = 1;
    tiny.num_hidden_layers = 1;
    tiny.units_per_hidden_layer = 10;
    tiny.dropout_rate = 0.0;
    tiny.input_height = 12;
    tiny.input_width = 12;
    for (int it = 0; it < 20; ++it) {
        Network net = build(tiny, 1000 + static_cast<std::uint64_t>(it));
        Tensor batch({1, 1, 12, 12});
        for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = rng.uniform();
        const std::vector<int> labels = {static_cast<int>(rng.below(2))};
        fold(oracles::whole_network_gradient_error(net, batch, labels));
    }

    const double secs = seconds_since(t0);
    record(1, "gradient suite (primitives + whole tiny network, 20 instances each)",
           worst < 1e-4 && secs < 30.0,
           "worst rel err " + fmt(worst) + ", " + fmt(secs) + "s (limits 1e-4, 30s)");
}

// ---------------------------------------------------------------------------
// 2. Oracle equivalence
// ---------------------------------------------------------------------------

void criterion_oracles() {
    Rng rng(77007);
    double worst_conv = 0.0, worst_dense = 0.0;
    for (int it = 0; it < 100; ++it) {
        const std::size_t C = 1 + rng.below(3), k = 1 + rng.below(3);
        const std::size_t H = k + rng.below(8 - k + 1), W = k + rng.below(8 - k + 1);
        const std::size_t O = 1 + rng.below(4);
        Tensor input = oracles::random_tensor({C, H, W}, rng);
        ConvParams p = ConvParams::zeros(O, C, k);
        for (std::size_t i = 0; i < p.kernels.size(); ++i) p.kernels[i] = rng.uniform(-1, 1);
        for (std::size_t i = 0; i < p.bias.size(); ++i) p.bias[i] = rng.uniform(-1, 1);
        worst_conv = std::max(
            worst_conv,
            oracles::max_abs_diff(conv2d_valid(input, p), oracles::conv2d_reference(input, p)));
    }
    for (int it = 0; it < 100; ++it) {
        const std::size_t n = 1 + rng.below(8), m = 1 + rng.below(8);
        Tensor x = oracles::random_tensor({n}, rng);
        DenseParams p = DenseParams::zeros(m, n);
        for (std::size_t i = 0; i < p.weights.size(); ++i) p.weights[i] = rng.uniform(-1, 1);
        for (std::size_t i = 0; i < p.bias.size(); ++i) p.bias[i] = rng.uniform(-1, 1);
        worst_dense = std::max(
            worst_dense,
            oracles::max_abs_diff(dense_forward(x, p), oracles::dense_reference(x, p)));
    }
    record(2, "conv/dense match their direct-definition oracles on 100 random instances",
           worst_conv < 1e-12 && worst_dense < 1e-12,
           "max |diff| conv " + fmt(worst_conv) + ", dense " + fmt(worst_dense) +
               " (limit 1e-12)");
}

// ---------------------------------------------------------------------------
// 3. Shape table
// ---------------------------------------------------------------------------

void criterion_shapes() {
    struct Case {
        int h, w, convs;
        std::vector<std::pair<std::size_t, std::size_t>> pooled;
        std::size_t flatten;
    };
    const std::vector<Case> table = {
        {69, 85, 1, {{32, 40}}, 40960},
        {69, 85, 2, {{32, 40}, {14, 18}}, 8064},
        {69, 85, 3, {{32, 40}, {14, 18}, {5, 7}}, 1120},
        {128, 104, 1, {{62, 50}}, 99200},
        {128, 104, 2, {{62, 50}, {29, 23}}, 21344},
        {128, 104, 3, {{62, 50}, {29, 23}, {12, 9}}, 3456},
    };
    bool ok = true;
    std::string detail;
    for (const auto& c : table) {
        ArchitectureConfig cfg;
        cfg.num_convolutions = c.convs;
        cfg.input_height = c.h;
        cfg.input_width = c.w;
        Network net = build(cfg, 1);
        bool this_ok = net.plan.flatten_size == c.flatten;
        for (int s = 0; s < c.convs && this_ok; ++s) {
            this_ok = net.plan.pool_outputs[s].height == c.pooled[s].first &&
                      net.plan.pool_outputs[s].width == c.pooled[s].second;
        }
        if (!this_ok) {
            ok = false;
            detail += " mismatch at " + std::to_string(c.h) + "x" + std::to_string(c.w) +
                      "/" + std::to_string(c.convs) + " convs;";
        }
    }
    record(3, "shape chains for convs {1,2,3} x inputs {69x85, 128x104}", ok,
           ok ? "all 6 chains match hand arithmetic (mouth 2-conv flatten 8064)" : detail);
}

// ---------------------------------------------------------------------------
// 4. Overfit test
// ---------------------------------------------------------------------------

void criterion_overfit() {
    const auto t0 = std::chrono::steady_clock::now();
    auto items = synth_generate(20, 16, 16, 0.1, 42);
    Dataset data;
    for (auto& it : items) {
        data.push_back(Sample{Tensor({1, it.image.height, it.image.width},
                                     std::move(it.image.pixels)),
                              it.record.label});
    }
    ArchitectureConfig cfg;
    cfg.num_convolutions = 1;
    cfg.num_hidden_layers = 1;
    cfg.units_per_hidden_layer = 16;
    cfg.dropout_rate = 0.0;
    cfg.input_height = 16;
    cfg.input_width = 16;
    Network net = build(cfg, 7);

    TrainConfig tc;
    tc.epochs = 200;
    tc.batch_size = 10;
    tc.eval_every = 1;
    tc.seed = 7;
    TrainReport report = train(net, data, data, data, tc);

    int first_full = 0;
    for (const auto& e : report.epochs) {
        if (e.evaluated && e.val_accuracy == 1.0) {
            first_full = e.epoch;
            break;
        }
    }
    const double secs = seconds_since(t0);
    record(4, "20-sample synthetic overfit reaches 100% train accuracy within 200 epochs",
           first_full > 0 && secs < 60.0,
           first_full > 0 ? "100% at epoch " + std::to_string(first_full) + ", " +
                                fmt(secs) + "s (limits 200 epochs, 60s)"
                          : "never reached 100% in 200 epochs");
}

// ---------------------------------------------------------------------------
// 5. End-to-end synthetic via the CLI
// ---------------------------------------------------------------------------

void criterion_end_to_end(const fs::path& scratch) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir = scratch / "e2e";
    fs::create_directories(dir);

    int rc = run_cli("synth --out " + (dir / "corpus").string() +
                         " --n 2000 --height 32 --width 32 --noise 0.1 --seed 1",
                     dir / "synth.log");
    if (rc != 0) {
        record(5, "end-to-end synthetic (synth 2000 -> train mouth arch at 32x32)", false,
               "synth exited with code " + std::to_string(rc));
        return;
    }
    {
        std::ofstream cfg(dir / "mouth32.config");
        cfg << "num_convolutions=2\nnum_hidden_layers=2\nunits_per_hidden_layer=400\n"
               "dropout_rate=0.1\nepochs=50\neval_every=1\nseed=1\n";
    }
    rc = run_cli("train --config " + (dir / "mouth32.config").string() + " --data " +
                     (dir / "corpus").string() + " --out " + (dir / "model.ckpt").string(),
                 dir / "train.log");
    if (rc != 0) {
        record(5, "end-to-end synthetic (synth 2000 -> train mouth arch at 32x32)", false,
               "train exited with code " + std::to_string(rc));
        return;
    }

    // Scan the per-epoch report for the first epoch reaching 95% test rate.
    std::ifstream report(dir / "model.ckpt.report.csv");
    std::string line;
    std::getline(report, line);  // header
    double best_test = 0.0;
    int first_95 = 0;
    while (std::getline(report, line)) {
        std::stringstream ss(line);
        std::string epoch_s, loss_s, val_s, test_s;
        std::getline(ss, epoch_s, ',');
        std::getline(ss, loss_s, ',');
        std::getline(ss, val_s, ',');
        std::getline(ss, test_s, ',');
        if (test_s.empty()) continue;
        const double test_acc = std::stod(test_s);
        best_test = std::max(best_test, test_acc);
        if (first_95 == 0 && test_acc >= 0.95) first_95 = std::stoi(epoch_s);
    }
    const double secs = seconds_since(t0);
    record(5, "end-to-end synthetic (synth 2000 -> train mouth arch at 32x32)",
           first_95 > 0 && first_95 <= 50 && secs < 600.0,
           "best test rate " + fmt(best_test) +
               (first_95 > 0 ? ", >=95% first hit at epoch " + std::to_string(first_95)
                             : ", never reached 95%") +
               ", " + fmt(secs) + "s (limits 50 epochs, 600s)");
}

// ---------------------------------------------------------------------------
// 6. Selection logic
// ---------------------------------------------------------------------------

void criterion_selection() {
    SelectionGrid grid;
    ArchitectureConfig base;
    base.input_height = 32;
    base.input_width = 32;

    int calls = 0;
    ArchitectureConfig defaults = grid_default_config(grid, base);
    bool off_axis_ok = true;
    auto counting = [&](const ArchitectureConfig& cfg) {
        ++calls;
        int deviations = 0;
        if (cfg.num_convolutions != defaults.num_convolutions) ++deviations;
        if (cfg.num_hidden_layers != defaults.num_hidden_layers) ++deviations;
        if (cfg.units_per_hidden_layer != defaults.units_per_hidden_layer) ++deviations;
        if (cfg.dropout_rate != defaults.dropout_rate) ++deviations;
        if (deviations > 1) off_axis_ok = false;
        return 0.5;
    };
    SelectionReport counted = select(grid, base, counting);
    const bool fourteen = calls == 14 && counted.total_runs == 14 && off_axis_ok;

    int agreements = 0;
    for (std::uint64_t salt = 0; salt < 100; ++salt) {
        auto evaluator = [&](const ArchitectureConfig& cfg) {
            std::uint64_t h = salt;
            h = derive_seed(h, static_cast<std::uint64_t>(cfg.num_convolutions));
            h = derive_seed(h, static_cast<std::uint64_t>(cfg.num_hidden_layers));
            h = derive_seed(h, static_cast<std::uint64_t>(cfg.units_per_hidden_layer));
            h = derive_seed(h, static_cast<std::uint64_t>(cfg.dropout_rate * 1000));
            double acc = static_cast<double>(h >> 11) * 0x1.0p-53;
            if (salt % 3 == 0) acc = std::round(acc * 10.0) / 10.0;  // force ties
            return acc;
        };
        if (exhaustive_coordinate_check(grid, base, evaluator)) ++agreements;
    }
    record(6, "selection: 14 runs on the default grid, coordinate check on 100 evaluators",
           fourteen && agreements == 100,
           std::to_string(calls) + " runs, off-axis defaults " +
               (off_axis_ok ? "held" : "VIOLATED") + ", " + std::to_string(agreements) +
               "/100 agreements");
}

// ---------------------------------------------------------------------------
// 7. Determinism & persistence
// ---------------------------------------------------------------------------

void criterion_determinism(const fs::path& scratch) {
    auto make_trained = [&](std::uint64_t seed) {
        auto items = synth_generate(30, 16, 16, 0.1, 5);
        Dataset data;
        for (auto& it : items) {
            data.push_back(Sample{Tensor({1, it.image.height, it.image.width},
                                         std::move(it.image.pixels)),
                                  it.record.label});
        }
        ArchitectureConfig cfg;
        cfg.num_convolutions = 1;
        cfg.num_hidden_layers = 1;
        cfg.units_per_hidden_layer = 12;
        cfg.dropout_rate = 0.1;
        cfg.input_height = 16;
        cfg.input_width = 16;
        Network net = build(cfg, seed);
        TrainConfig tc;
        tc.epochs = 4;
        tc.batch_size = 10;
        tc.seed = seed;
        train(net, data, data, data, tc);
        return net;
    };

    Network a = make_trained(99);
    Network b = make_trained(99);
    const std::string bytes_a = serialize_checkpoint(a);
    const std::string bytes_b = serialize_checkpoint(b);
    const bool same_seed_identical = bytes_a == bytes_b;

    const fs::path p1 = scratch / "det1.ckpt";
    const fs::path p2 = scratch / "det2.ckpt";
    save_checkpoint(a, p1);
    Network loaded = load_checkpoint(p1);
    bool round_trip_exact = loaded.config == a.config;
    auto pa = parameter_tensors(a);
    auto pl = parameter_tensors(loaded);
    for (std::size_t i = 0; i < pa.size() && round_trip_exact; ++i) {
        round_trip_exact = *pa[i].tensor == *pl[i].tensor;
    }
    save_checkpoint(loaded, p2);
    const bool save_load_save = slurp(p1) == slurp(p2);

    record(7, "determinism & persistence (seeded training, checkpoint round trips)",
           same_seed_identical && round_trip_exact && save_load_save,
           std::string("same-seed checkpoints ") +
               (same_seed_identical ? "identical" : "DIFFER") + ", round trip " +
               (round_trip_exact ? "bit-exact" : "INEXACT") + ", save-load-save " +
               (save_load_save ? "byte-identical" : "DIFFERS"));
}

// ---------------------------------------------------------------------------
// 8. Repeat statistics
// ---------------------------------------------------------------------------

void criterion_repeat(const fs::path& scratch) {
    const fs::path dir = scratch / "repeat";
    fs::create_directories(dir);
    int rc = run_cli("synth --out " + (dir / "corpus").string() +
                         " --n 400 --height 16 --width 16 --noise 0.1 --seed 1",
                     dir / "synth.log");
    {
        std::ofstream cfg(dir / "run.config");
        cfg << "num_convolutions=1\nnum_hidden_layers=1\nunits_per_hidden_layer=16\n"
               "dropout_rate=0\nepochs=12\nbatch_size=40\neval_every=2\nseed=1\n";
    }
    double cli_std = -1.0, cli_mean = -1.0;
    if (rc == 0) {
        rc = run_cli("repeat --n 10 --config " + (dir / "run.config").string() +
                         " --data " + (dir / "corpus").string(),
                     dir / "repeat.log");
        if (rc == 0) {
            std::stringstream ss(slurp(dir / "repeat.log"));
            std::string word;
            while (ss >> word) {
                if (word == "mean") ss >> cli_mean;
                if (word == "std") ss >> cli_std;
            }
        }
    }
    const bool cli_ok = rc == 0 && cli_std >= 0.0 && cli_std < 0.02;

    // Hand-fed accuracy lists against hand-computed statistics.
    RepeatStats two = mean_and_sample_std({0.98, 1.00});
    const bool two_ok = std::abs(two.mean - 0.99) < 1e-12 &&
                        std::abs(two.sample_std - 0.01 * std::sqrt(2.0)) < 1e-12;
    RepeatStats four = mean_and_sample_std({0.5, 0.25, 0.75, 0.5});
    // mean 1/2, std sqrt((1/16 + 1/16) / 3) = sqrt(1/24)
    const bool four_ok = std::abs(four.mean - 0.5) < 1e-12 &&
                         std::abs(four.sample_std - 0.20412414523193150818) < 1e-12;
    RepeatStats flat = mean_and_sample_std({0.99, 0.99, 0.99});
    const bool flat_ok = flat.sample_std == 0.0;

    record(8, "repeat statistics: CLI repeat --n 10 std < 0.02; hand-fed lists to 1e-12",
           cli_ok && two_ok && four_ok && flat_ok,
           "cli mean " + fmt(cli_mean) + " std " + fmt(cli_std) +
               " (limit 0.02); hand-fed checks " +
               ((two_ok && four_ok && flat_ok) ? "exact" : "FAILED"));
}

// ---------------------------------------------------------------------------
// 9. DISFA protocol documentation (optional; the corpus is license-restricted)
// ---------------------------------------------------------------------------

void criterion_protocol_docs() {
    const fs::path doc = fs::path(SMILENET_REPO_DIR) / "docs" / "disfa_protocol.md";
    bool ok = fs::exists(doc);
    std::string missing;
    if (ok) {
        const std::string text = slurp(doc);
        for (const char* needle :
             {"preprocess", "--input-kind mouth", "--input-kind face", "select",
              "--epochs 50", "epochs=1000", "batch_size=500", "learning_rate=0.01",
              "momentum=0.9", "train_ratio=0.6", "reduce", "--keep 0.7", "repeat",
              "99.45", "99.34"}) {
            if (text.find(needle) == std::string::npos) {
                ok = false;
                missing += std::string(" '") + needle + "'";
            }
        }
    } else {
        missing = " document not found";
    }
    record(9, "DISFA protocol: documented command sequence (targets aspirational)", ok,
           ok ? "docs/disfa_protocol.md covers the full protocol" : "missing:" + missing,
           /*gating=*/false);
}

}  // namespace

int main() {
    setenv("SMILENET_THREADS", "0", 1);  // acceptance measures the sequential path
    const fs::path scratch = fs::temp_directory_path() / "smilenet_acceptance";
    fs::remove_all(scratch);
    fs::create_directories(scratch);

    const auto t0 = std::chrono::steady_clock::now();
    criterion_gradients();
    criterion_oracles();
    criterion_shapes();
    criterion_overfit();
    criterion_end_to_end(scratch);
    criterion_selection();
    criterion_determinism(scratch);
    criterion_repeat(scratch);
    criterion_protocol_docs();

    int failed = 0;
    for (const auto& o : g_outcomes) {
        if (!o.pass && o.gating) ++failed;
    }
    std::cout << "acceptance: " << (g_outcomes.size() - static_cast<std::size_t>(failed))
              << "/" << g_outcomes.size() << " criteria passed in "
              << fmt(seconds_since(t0)) << "s" << std::endl;
    return failed == 0 ? 0 : 1;
}
