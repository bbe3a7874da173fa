#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "smilenet/config.hpp"

using namespace smilenet;
using Catch::Approx;

TEST_CASE("an empty config carries the protocol defaults") {
    RunConfig cfg = parse_config_text("", "<test>");
    REQUIRE(cfg.train.learning_rate == Approx(0.01));
    REQUIRE(cfg.train.momentum == Approx(0.9));
    REQUIRE(cfg.train.batch_size == 500);
    REQUIRE(cfg.train.epochs == 1000);
    REQUIRE(cfg.split.train_ratio == Approx(0.6));
    REQUIRE(cfg.split.val_ratio == Approx(0.2));
    REQUIRE(cfg.split.test_ratio == Approx(0.2));
    REQUIRE(cfg.split.mode == SplitMode::FrameRandom);
    REQUIRE(cfg.arch.num_convolutions == 1);
    REQUIRE(cfg.arch.num_hidden_layers == 1);
    REQUIRE(cfg.arch.units_per_hidden_layer == 100);
    REQUIRE(cfg.arch.dropout_rate == Approx(0.5));
}

TEST_CASE("key=value lines override defaults; comments and blanks are ignored") {
    const std::string text =
        "# experiment\n"
        "\n"
        "num_convolutions = 2\n"
        "units_per_hidden_layer=400\n"
        "dropout_rate=0.1\n"
        "epochs=50\n"
        "split_mode=subject-grouped\n"
        "seed=77\n";
    RunConfig cfg = parse_config_text(text, "<test>");
    REQUIRE(cfg.arch.num_convolutions == 2);
    REQUIRE(cfg.arch.units_per_hidden_layer == 400);
    REQUIRE(cfg.arch.dropout_rate == Approx(0.1));
    REQUIRE(cfg.train.epochs == 50);
    REQUIRE(cfg.train.seed == 77);
    REQUIRE(cfg.split.mode == SplitMode::SubjectGrouped);
}

TEST_CASE("unknown keys and malformed lines are rejected") {
    REQUIRE_THROWS_AS(parse_config_text("learning_rte=0.5\n", "<t>"), ConfigError);
    REQUIRE_THROWS_AS(parse_config_text("just a line\n", "<t>"), ConfigError);
    REQUIRE_THROWS_AS(parse_config_text("epochs=abc\n", "<t>"), ConfigError);
    REQUIRE_THROWS_AS(parse_config_text("split_mode=randomish\n", "<t>"), ConfigError);
}

TEST_CASE("split seed defaults to a derivation of the training seed") {
    RunConfig a = parse_config_text("seed=5\n", "<t>");
    RunConfig b = parse_config_text("seed=5\n", "<t>");
    RunConfig c = parse_config_text("seed=6\n", "<t>");
    REQUIRE_FALSE(a.split_seed_set);
    REQUIRE(a.effective_split_seed() == b.effective_split_seed());
    REQUIRE(a.effective_split_seed() != c.effective_split_seed());

    RunConfig d = parse_config_text("seed=5\nsplit_seed=123\n", "<t>");
    REQUIRE(d.split_seed_set);
    REQUIRE(d.effective_split_seed() == 123);
}

TEST_CASE("config text round-trips through save and load") {
    RunConfig cfg;
    cfg.arch.num_convolutions = 3;
    cfg.arch.dropout_rate = 0.7;
    cfg.arch.input_height = 69;
    cfg.arch.input_width = 85;
    cfg.train.learning_rate = 0.005;
    cfg.train.epochs = 42;
    cfg.train.seed = 9;
    cfg.split.mode = SplitMode::SubjectGrouped;

    const std::filesystem::path path =
        std::filesystem::temp_directory_path() / "smilenet_config_test.cfg";
    save_config_file(cfg, path);
    RunConfig back = load_config_file(path);
    REQUIRE(back.arch == cfg.arch);
    REQUIRE(back.train.learning_rate == cfg.train.learning_rate);
    REQUIRE(back.train.epochs == cfg.train.epochs);
    REQUIRE(back.train.seed == cfg.train.seed);
    REQUIRE(back.split.mode == cfg.split.mode);
    std::filesystem::remove(path);
}
