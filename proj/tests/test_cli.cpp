#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "ikrnet/cli.hpp"
#include "ikrnet/model/config.hpp"
#include "ikrnet/record_io.hpp"
#include "support.hpp"

using namespace ikrnet;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run ikrnet_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& f : fs::recursive_directory_iterator(root)) {
        if (f.is_regular_file()) files[fs::relative(f.path(), root).string()] = io::read_text(f.path());
    }
    return files;
}

// Four patients, one record per 30 minutes: the smallest dataset that fills
// every partition.
fs::path small_spec(const fs::path& dir) {
    const auto path = dir / "spec.json";
    io::write_text(path, R"({"n_patients": 4, "record_interval_s": 1800})");
    return path;
}

fs::path micro_model(const fs::path& dir) {
    const auto path = dir / "micro.json";
    io::write_text(path, R"({"branches": [[31, 7]], "strides": [5, 5], "n_blocks": 2, "initial_filters": 4,
                             "filter_growth_every": 1, "branch_out_len": 4, "branch_out_channels": 8,
                             "bilstm_layers": 1, "bilstm_hidden": 4, "expansion_factor": 2})");
    return path;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit with 2") {
    CHECK(ikrnet_cli({}).code == cli::kExitUsage);
    CHECK(ikrnet_cli({"frobnicate"}).code == cli::kExitUsage);
    CHECK(ikrnet_cli({"gen-data"}).code == cli::kExitUsage);
    CHECK(ikrnet_cli({"--help"}).code == cli::kExitOk);

    const auto dir = test::temp_dir("cli_usage");
    io::write_text(dir / "bad.json", R"({"n_patients": 4, "colour": "red"})");
    const auto bad = ikrnet_cli({"gen-data", "--out", (dir / "d").string(), "--config", (dir / "bad.json").string()});
    CHECK(bad.code == cli::kExitUsage);
    CHECK(bad.err.find("colour") != std::string::npos);
    CHECK(ikrnet_cli({"gen-data", "--out", (dir / "d").string(), "--patients", "3"}).code == cli::kExitUsage);
    CHECK(ikrnet_cli({"augment", "--out", (dir / "missing").string()}).code != cli::kExitOk);
}

TEST_CASE("gen-data is byte identical for the same seed and differs for another") {
    const auto dir = test::temp_dir("cli_gen");
    const auto spec = small_spec(dir).string();
    auto gen = [&](const std::string& name, const std::string& seed) {
        const auto r = ikrnet_cli({"gen-data", "--out", (dir / name).string(), "--config", spec, "--seed", seed});
        REQUIRE(r.code == cli::kExitOk);
        return tree(dir / name);
    };
    const auto a = gen("a", "3"), b = gen("b", "3"), c = gen("c", "4");
    CHECK(a == b);
    CHECK(a.count("manifest.json") == 1);
    CHECK(a.count("resolved_config.json") == 1);
    CHECK(a.at("manifest.json") != c.at("manifest.json"));
}

TEST_CASE("augment is idempotent and rejects rates above the source rate") {
    const auto dir = test::temp_dir("cli_aug");
    const auto data = (dir / "data").string();
    REQUIRE(ikrnet_cli({"gen-data", "--out", data, "--config", small_spec(dir).string()}).code == cli::kExitOk);
    REQUIRE(ikrnet_cli({"augment", "--out", data}).code == cli::kExitOk);
    const auto once = io::read_text(dir / "data" / "manifest.json");
    REQUIRE(ikrnet_cli({"augment", "--out", data}).code == cli::kExitOk);
    CHECK(io::read_text(dir / "data" / "manifest.json") == once);
    CHECK(ikrnet_cli({"augment", "--out", data, "--rates", "600"}).code == cli::kExitUsage);
    CHECK(ikrnet_cli({"augment", "--out", data, "--rates", "fast"}).code == cli::kExitUsage);
}

TEST_CASE("train, eval and report end to end; mismatched configs are refused") {
    const auto dir = test::temp_dir("cli_e2e");
    const auto data = (dir / "data").string();
    const auto model_cfg = micro_model(dir).string();
    REQUIRE(ikrnet_cli({"gen-data", "--out", data, "--config", small_spec(dir).string()}).code == cli::kExitOk);
    REQUIRE(ikrnet_cli({"augment", "--out", data}).code == cli::kExitOk);

    const auto run_dir = (dir / "run").string();
    const auto tr = ikrnet_cli({"train", "--data", data, "--out", run_dir, "--model-config", model_cfg, "--epochs",
                                "2", "--batch-size", "16", "--seed", "1"});
    REQUIRE(tr.code == cli::kExitOk);
    for (const char* f : {"model.ckpt", "train_log.jsonl", "model_config.json", "resolved_config.json"}) {
        CAPTURE(f);
        CHECK(fs::exists(dir / "run" / f));
    }
    std::istringstream log(io::read_text(dir / "run" / "train_log.jsonl"));
    std::size_t lines = 0;
    for (std::string line; std::getline(log, line);) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j.at("epoch").get<std::size_t>() == lines);
        ++lines;
    }
    CHECK(lines == 3);

    const auto ckpt = (dir / "run" / "model.ckpt").string();
    const auto ev = ikrnet_cli({"eval", "--data", data, "--checkpoint", ckpt, "--out", (dir / "eval").string(),
                                "--model-config", model_cfg});
    REQUIRE(ev.code == cli::kExitOk);
    for (const char* f : {"report.json", "per_zone.csv", "per_rate.csv", "threshold_curve.csv", "predictions.json"}) {
        CAPTURE(f);
        CHECK(fs::exists(dir / "eval" / f));
    }
    // Evaluating twice reproduces the predictions byte for byte.
    REQUIRE(ikrnet_cli({"eval", "--data", data, "--checkpoint", ckpt, "--out", (dir / "eval2").string()}).code ==
            cli::kExitOk);
    CHECK(io::read_text(dir / "eval" / "predictions.json") == io::read_text(dir / "eval2" / "predictions.json"));

    const auto rep = ikrnet_cli({"report", "--predictions", (dir / "eval" / "predictions.json").string(), "--out",
                                 (dir / "rep").string()});
    REQUIRE(rep.code == cli::kExitOk);
    CHECK(io::read_text(dir / "rep" / "report.json") == io::read_text(dir / "eval" / "report.json"));

    // Checkpoint/config mismatches are integrity failures.
    const auto wrong = ikrnet_cli(
        {"eval", "--data", data, "--checkpoint", ckpt, "--out", (dir / "bad").string(), "--paper-config"});
    CHECK(wrong.code == cli::kExitIntegrity);
    const auto resume = ikrnet_cli(
        {"train", "--data", data, "--out", (dir / "bad2").string(), "--epochs", "1", "--resume", ckpt});
    CHECK(resume.code == cli::kExitIntegrity);
    io::write_text(dir / "garbage.ckpt", "not a checkpoint");
    CHECK(ikrnet_cli({"eval", "--data", data, "--checkpoint", (dir / "garbage.ckpt").string(), "--out",
                      (dir / "bad3").string()})
              .code == cli::kExitIntegrity);
    CHECK(ikrnet_cli({"train", "--data", data, "--out", (dir / "bad4").string(), "--model-config", model_cfg,
                      "--paper-config"})
              .code == cli::kExitUsage);
}

}  // TEST_SUITE
