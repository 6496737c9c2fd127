#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "bcgen/common.hpp"
#include "bcgen/config.hpp"
#include "bcgen/dataset.hpp"

using namespace bcgen;
namespace fs = std::filesystem;

namespace {

std::string write_tmp(const std::string& name, const std::string& content) {
    const std::string path = "/tmp/" + name;
    std::ofstream out(path);
    out << content;
    return path;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(BCGEN_BIN) + " " + args +
                            " > /tmp/bcgen_cli_out.txt 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string cli_output() {
    std::ifstream in("/tmp/bcgen_cli_out.txt");
    return {std::istreambuf_iterator<char>(in),
            std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("empty config yields the documented defaults") {
    const AppConfig c = parse_config(write_tmp("bcgen_empty.cfg", ""));
    CHECK(c.train.gamma == doctest::Approx(0.99));
    CHECK(c.ope_horizon == 100);
    CHECK(c.knn_k == 50);
    CHECK(c.pace_window_s == doctest::Approx(15.0));
    CHECK(c.train.lr == doctest::Approx(1e-4));
    CHECK(c.train.minibatch == 512);
    CHECK(c.train.buffer_capacity == 50000);
    CHECK(c.train.eps_start == doctest::Approx(1.0));
    CHECK(c.train.eps_end == doctest::Approx(0.05));
    CHECK(c.augment);
    CHECK(!c.normalize_features);
}

TEST_CASE("sections, comments, and quoted values parse") {
    const AppConfig c = parse_config(write_tmp("bcgen_full.cfg",
                                               "# comment line\n"
                                               "seed = 99   # trailing\n"
                                               "gamma = 0.95\n"
                                               "[train]\n"
                                               "epochs = 7\n"
                                               "algorithm = \"nfq\"\n"
                                               "[synth]\n"
                                               "n_sessions = 6\n"
                                               "session_s = 45.5\n"));
    CHECK(c.seed == 99);
    CHECK(c.train.seed == 99);
    CHECK(c.train.gamma == doctest::Approx(0.95));
    CHECK(c.train.epochs == 7);
    CHECK(c.train.algorithm == Algorithm::nfq);
    CHECK(c.synth.n_sessions == 6);
    CHECK(c.synth.session_s == doctest::Approx(45.5));
}

TEST_CASE("invalid configs are rejected with the offending key") {
    CHECK_THROWS_WITH_AS(
        parse_config(write_tmp("bcgen_bad1.cfg", "gamma = 1.5\n")),
        doctest::Contains("gamma"), ValidationError);
    CHECK_THROWS_WITH_AS(parse_config(write_tmp("bcgen_bad2.cfg", "foo = 1\n")),
                         doctest::Contains("foo"), ValidationError);
    CHECK_THROWS_AS(parse_config(write_tmp("bcgen_bad3.cfg", "not a pair\n")),
                    ValidationError);
    CHECK_THROWS_AS(parse_config("/tmp/definitely_missing.cfg"),
                    ValidationError);
}

TEST_CASE("config hash tracks values") {
    const AppConfig a = parse_config(write_tmp("bcgen_h1.cfg", "seed = 1\n"));
    const AppConfig b = parse_config(write_tmp("bcgen_h2.cfg", "seed = 1\n"));
    const AppConfig c = parse_config(write_tmp("bcgen_h3.cfg", "seed = 2\n"));
    CHECK(a.hash() == b.hash());
    CHECK(a.hash() != c.hash());
}

TEST_CASE("cli: unknown subcommand exits 1 with usage") {
    CHECK(run_cli("frobnicate") == 1);
    CHECK(cli_output().find("Usage") != std::string::npos);
}

TEST_CASE("cli: help exits 0") {
    CHECK(run_cli("--help") == 0);
}

TEST_CASE("cli: train on an empty dataset exits 2") {
    TupleDatasetBuilder builder(kStateDim);
    const std::string data_path = "/tmp/bcgen_cli_empty.bin";
    builder.build().save(data_path);
    const int code = run_cli("train --algo nfq --data " + data_path +
                             " --out /tmp/bcgen_cli_model.bin");
    CHECK(code == 2);
    CHECK(cli_output().find("empty dataset") != std::string::npos);
}

TEST_CASE("cli: missing input file exits 1") {
    CHECK(run_cli("train --algo nfq --data /tmp/no_such_data.bin "
                  "--out /tmp/bcgen_cli_model.bin") == 1);
}

TEST_CASE("cli: invalid config value exits 1 naming the field") {
    const std::string cfg = write_tmp("bcgen_cli_bad.cfg", "gamma = 1.5\n");
    CHECK(run_cli("synth --config " + cfg + " --out /tmp/bcgen_cli_corpus") ==
          1);
    CHECK(cli_output().find("gamma") != std::string::npos);
}

TEST_CASE("cli: features rejects a malformed wav") {
    const std::string bad = write_tmp("bcgen_bad.wav", "this is not audio");
    CHECK(run_cli("features --wav " + bad + " --out /tmp/bcgen_bad.csv") == 1);
}
