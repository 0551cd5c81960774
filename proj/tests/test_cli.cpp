#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "raid/cli.hpp"
#include "raid/stream_io.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result invoke(const std::vector<std::string>& args, const std::string& stdin_text = {}) {
    std::istringstream in(stdin_text);
    std::ostringstream out;
    std::ostringstream err;
    const int code = raid::cli::run_cli(args, in, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    [[nodiscard]] std::string file(const std::string& name) const { return (path / name).string(); }
};

std::vector<raid::DetectionRecord> records_in(const std::string& text) {
    std::istringstream in(text);
    return raid::read_records(in);
}

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("synth is deterministic per seed") {
        TempDir dir("raid_cli_synth");
        REQUIRE(invoke({"synth", "--kind", "spikes", "--seed", "7", "--output", dir.file("a.csv")}).code == 0);
        REQUIRE(invoke({"synth", "--kind", "spikes", "--seed", "7", "--output", dir.file("b.csv")}).code == 0);
        REQUIRE(invoke({"synth", "--kind", "spikes", "--seed", "8", "--output", dir.file("c.csv")}).code == 0);
        CHECK(slurp(dir.file("a.csv")) == slurp(dir.file("b.csv")));
        CHECK(slurp(dir.file("a.csv")) != slurp(dir.file("c.csv")));
        CHECK(slurp(dir.file("a.csv")).rfind("timestamp,x0,x1,label\n", 0) == 0);
    }

    TEST_CASE("synth packet_loss writes exactly the configured gap") {
        const Result r = invoke({"synth", "--kind", "packet_loss", "--seed", "1", "--samples", "400",
                                 "--gap-index", "200", "--gap-steps", "30"});
        REQUIRE(r.code == 0);
        raid::StreamSchema schema;
        schema.label_column = "label";
        std::istringstream in(r.out);
        const auto data = raid::read_stream(in, schema);
        std::size_t gaps = 0;
        for (std::size_t i = 1; i < data.observations.size(); ++i) {
            const double dt = data.observations[i].timestamp - data.observations[i - 1].timestamp;
            if (dt != 60.0) {
                ++gaps;
                CHECK(i == 200);
                CHECK(dt == 30.0 * 60.0);
            }
        }
        CHECK(gaps == 1);
    }

    TEST_CASE("synth rejects an unknown kind") {
        CHECK(invoke({"synth", "--kind", "earthquake", "--seed", "1"}).code == 2);
        CHECK(invoke({"synth", "--kind", "spikes"}).code == 2);
        CHECK(invoke({"synth", "--kind", "spikes", "--seed", "1", "--spikes", "999999"}).code == 2);
    }

    TEST_CASE("run writes records to stdout and a summary to stderr") {
        TempDir dir("raid_cli_run");
        REQUIRE(invoke({"synth", "--kind", "spikes", "--seed", "3", "--samples", "1500", "--quiet-prefix", "800",
                        "--output", dir.file("s.csv")})
                    .code == 0);
        const Result r = invoke({"run", "--input", dir.file("s.csv"), "--value-columns", "x0,x1", "--expiration-period",
                                 "4d", "--threshold", "-25", "--two-sided"});
        REQUIRE(r.code == 0);
        const auto recs = records_in(r.out);
        CHECK(recs.size() == 1500);
        CHECK(r.err.find("records: 1500") != std::string::npos);
        CHECK(r.err.find("anomalies:") != std::string::npos);
        CHECK(r.err.find("changepoints:") != std::string::npos);
        CHECK(r.err.find("sampling anomalies:") != std::string::npos);
    }

    TEST_CASE("constant input reports no anomalies") {
        std::string csv = "timestamp,a,b\n";
        for (int i = 0; i < 300; ++i) {
            csv += std::to_string(1600000000 + 60 * i) + ",1.5,-2\n";
        }
        const Result r = invoke({"run", "--input", "-", "--timestamp-format", "epoch_seconds", "--expiration-period",
                                 "1h", "--threshold", "-25"},
                                csv);
        REQUIRE(r.code == 0);
        CHECK(r.err.find("anomalies: 0,") != std::string::npos);
        for (const auto& rec : records_in(r.out)) {
            CHECK_FALSE(rec.y_g);
        }
    }

    TEST_CASE("flag and schema errors exit with 2") {
        const std::string csv = "timestamp,a\n0,1\n60,2\n";
        const Result missing = invoke({"run", "--input", "-", "--expiration-period", "1h"}, csv);
        CHECK(missing.code == 2);
        CHECK(missing.err.find("--threshold") != std::string::npos);
        CHECK(invoke({"run", "--input", "-", "--expiration-period", "1x", "--threshold", "-25"}, csv).code == 2);
        CHECK(invoke({"run", "--input", "-", "--expiration-period", "1h", "--threshold", "-25", "--q", "0.2"}, csv)
                  .code == 2);
        CHECK(invoke({"run", "--input", "-", "--timestamp-format", "epoch_seconds", "--expiration-period", "1h",
                      "--threshold", "-25", "--value-columns", "nope"},
                     csv)
                  .code == 2);
        CHECK(invoke({"bench", "--input", "-", "--timestamp-format", "epoch_seconds", "--expiration-period", "1h",
                      "--label-column", "wrong"},
                     csv)
                  .code == 2);
        CHECK(invoke({}).code == 2);
        CHECK(invoke({"frobnicate"}).code == 2);
        CHECK(invoke({"--help"}).code == 0);
    }

    TEST_CASE("I/O failures exit with 1") {
        CHECK(invoke({"run", "--input", "/nonexistent/x.csv", "--expiration-period", "1h", "--threshold", "-25"}).code ==
              1);
        CHECK(invoke({"run", "--input", "-", "--expiration-period", "1h", "--threshold", "-25"}, "timestamp,a\n")
                  .code == 1);
    }

    TEST_CASE("bench on a synthetic file is self-consistent") {
        TempDir dir("raid_cli_bench");
        REQUIRE(invoke({"synth", "--kind", "spikes", "--seed", "5", "--output", dir.file("s.csv")}).code == 0);
        const Result r = invoke({"bench", "--input", dir.file("s.csv"), "--label-column", "label",
                                 "--expiration-period", "1000m", "--threshold", "-25", "--two-sided"});
        REQUIRE(r.code == 0);
        CHECK(r.out.find("F1 [%]") != std::string::npos);
        const auto json_line = r.out.substr(r.out.find('{'));
        const auto doc = nlohmann::json::parse(json_line);
        CHECK(doc.at("samples") == 5000);
        CHECK(doc.at("tp").get<int>() + doc.at("fn").get<int>() == 25);
        CHECK(doc.at("recall").get<double>() > 0.5);
    }

    TEST_CASE("sweep reports every grid point") {
        TempDir dir("raid_cli_sweep");
        REQUIRE(invoke({"synth", "--kind", "spikes", "--seed", "6", "--output", dir.file("s.csv")}).code == 0);
        const Result r = invoke({"sweep", "--input", dir.file("s.csv"), "--label-column", "label",
                                 "--expiration-period", "1000m", "--two-sided", "--thresholds", "-50,-25,-10"});
        REQUIRE(r.code == 0);
        const auto doc = nlohmann::json::parse(r.out.substr(r.out.find('{')));
        CHECK(doc.at("rows").size() == 3);
    }

    TEST_CASE("mean_shift then run shows a changepoint after the shift") {
        TempDir dir("raid_cli_shift");
        REQUIRE(invoke({"synth", "--kind", "mean_shift", "--seed", "2", "--samples", "3000", "--shift-index", "1500",
                        "--output", dir.file("s.csv")})
                    .code == 0);
        const Result r = invoke({"run", "--input", dir.file("s.csv"), "--value-columns", "x0,x1",
                                 "--expiration-period", "400m", "--threshold", "-25", "--two-sided", "--output",
                                 dir.file("r.jsonl")});
        REQUIRE(r.code == 0);
        CHECK(r.out.empty());
        const auto recs = records_in(slurp(dir.file("r.jsonl")));
        REQUIRE(recs.size() == 3000);
        std::size_t first = 0;
        for (std::size_t i = 0; i < recs.size(); ++i) {
            if (recs[i].y_c) {
                first = i;
                break;
            }
        }
        CHECK(first >= 1500);
        // t_a is 100 samples here.
        CHECK(first <= 1600);
    }

    TEST_CASE("snapshot out then in continues the record stream") {
        TempDir dir("raid_cli_snapshot");
        REQUIRE(invoke({"synth", "--kind", "spikes", "--seed", "4", "--samples", "1200", "--quiet-prefix", "500",
                        "--spikes", "10", "--output", dir.file("s.csv")})
                    .code == 0);
        const std::string text = slurp(dir.file("s.csv"));
        std::istringstream lines(text);
        std::string header;
        std::getline(lines, header);
        std::string head = header + "\n";
        std::string tail = header + "\n";
        std::string line;
        for (int i = 0; std::getline(lines, line); ++i) {
            (i < 700 ? head : tail) += line + "\n";
        }
        std::ofstream(dir.file("head.csv")) << head;
        std::ofstream(dir.file("tail.csv")) << tail;
        const std::vector<std::string> common{"--value-columns", "x0,x1", "--expiration-period", "300m",
                                              "--threshold", "-20", "--two-sided"};
        auto with = [&](std::vector<std::string> args) {
            args.insert(args.end(), common.begin(), common.end());
            return invoke(args);
        };
        const Result whole = with({"run", "--input", dir.file("s.csv")});
        const Result first = with({"run", "--input", dir.file("head.csv"), "--snapshot-out", dir.file("snap.json")});
        const Result second = with({"run", "--input", dir.file("tail.csv"), "--snapshot-in", dir.file("snap.json")});
        REQUIRE(whole.code == 0);
        REQUIRE(first.code == 0);
        REQUIRE(second.code == 0);
        CHECK(first.out + second.out == whole.out);
    }
}
