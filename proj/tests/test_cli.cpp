#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "ggt/cli.hpp"
#include "ggt/complexity.hpp"
#include "ggt/tensor_io.hpp"

using namespace ggt;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "ggt_cli_test";
    fs::create_directories(dir);
    return (dir / name).string();
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), {}};
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

} // namespace

TEST_CASE("usage errors exit 2") {
    CHECK(run({}).code == kExitUsage);
    CHECK(run({"forward", "--bogus"}).code == kExitUsage);
    CHECK(run({"count", "--format", "xml"}).code == kExitUsage);
    CHECK(run({"count", "--model", "gg-x"}).code == kExitUsage);
    CHECK(run({"count", "--image-size", "abc"}).code == kExitUsage);
    CHECK(run({"forward", "--input", scratch("does-not-exist.ggt")}).code == kExitUsage);
    CHECK(run({"--help"}).code == kExitOk);
}

TEST_CASE("forward") {
    const std::string img = scratch("img224.ggt"), bad = scratch("img225.ggt");
    REQUIRE(run({"make-input", "--seed", "3", "--out", img}).code == kExitOk);
    REQUIRE(run({"make-input", "--shape", "3,225,225", "--out", bad}).code == kExitOk);

    const auto a = run({"forward", "--seed", "1", "--input", img, "--out", scratch("logits_a.ggt")});
    REQUIRE(a.code == kExitOk);
    CHECK(contains(a.out, "logits 1000\n"));
    CHECK(contains(a.out, "# command=forward seed=1 seed_source=flag"));
    CHECK(load_ggt1<float>(scratch("logits_a.ggt")).shape() == Shape{1000});

    const auto b = run({"forward", "--seed", "1", "--input", img, "--out", scratch("logits_b.ggt")});
    CHECK(slurp(scratch("logits_a.ggt")) == slurp(scratch("logits_b.ggt")));

    const auto e = run({"forward", "--input", bad});
    CHECK(e.code == kExitUsage);
    CHECK(contains(e.err, "stage 1"));
    CHECK(contains(e.err, "225"));
}

TEST_CASE("GG_SEED is the fallback seed") {
    const std::string img = scratch("seed_img.ggt");
    ::setenv("GG_SEED", "17", 1);
    const auto env = run({"make-input", "--shape", "2,3", "--out", img});
    const std::string from_env = slurp(img);
    ::unsetenv("GG_SEED");
    CHECK(contains(env.out, "seed=17 seed_source=GG_SEED"));
    run({"make-input", "--shape", "2,3", "--seed", "17", "--out", img});
    CHECK(slurp(img) == from_env);
    run({"make-input", "--shape", "2,3", "--out", img});
    CHECK(slurp(img) != from_env);
    ::setenv("GG_SEED", "x1", 1);
    CHECK(run({"make-input", "--shape", "2,3", "--out", img}).code == kExitUsage);
    ::unsetenv("GG_SEED");
}

TEST_CASE("count") {
    const auto csv = run({"count", "--model", "gg-t", "--format", "csv"});
    REQUIRE(csv.code == kExitOk);
    const auto report = FlopsReport::from_csv(csv.out);
    CHECK(report.total().params == 28348066);
    CHECK(report.total().macs == 4551605760ull);
    CHECK(contains(csv.out, "\ntotal,4551605760,28348066\n"));
    CHECK(run({"count", "--format", "csv"}).out == csv.out);

    const auto bad = run({"count", "--image-size", "225"});
    CHECK(bad.code == kExitUsage);
    CHECK(contains(bad.err, "stage 1"));
    CHECK(run({"count", "--model", "gg-s", "--image-size", "448"}).code == kExitOk);
}

TEST_CASE("compare") {
    const auto r = run({"compare", "--channels", "16", "--no-timing"});
    REQUIRE(r.code == kExitOk);
    CHECK(contains(r.out, "variant,N,h,w,predicted_macs,executed_macs\n"));
    CHECK(contains(r.out, "# fit variant=gmsa loglog_slope=1.0000 executed_matches_predicted=yes"));
    CHECK(contains(r.out, "# fit variant=wmsa loglog_slope=1.0000 executed_matches_predicted=yes"));
    CHECK(contains(r.out, "# fit variant=msa loglog_slope=1.8854 executed_matches_predicted=yes"));
    CHECK(run({"compare", "--channels", "16", "--no-timing"}).out == r.out);

    // gmsa and wmsa rows carry identical counts; sra with R=1 equals msa
    std::map<std::string, std::vector<std::string>> cols;
    std::istringstream in(r.out);
    for (std::string line; std::getline(in, line);) {
        if (line.empty() || line[0] == '#' || line.rfind("variant", 0) == 0) continue;
        const auto comma = line.find(',');
        cols[line.substr(0, comma)].push_back(line.substr(comma));
    }
    CHECK(cols["gmsa"] == cols["wmsa"]);
    CHECK(cols["sra"] == cols["msa"]);
    CHECK(cols["msa"].size() == 4);

    const auto timed = run({"compare", "--variants", "gmsa", "--grid", "14,14", "--channels", "8"});
    CHECK(contains(timed.out, ",wall_ms\n"));
    CHECK(contains(timed.out, "loglog_slope=n/a"));
    CHECK(run({"compare", "--grid", "14,15"}).code == kExitUsage);
    CHECK(run({"compare", "--sweep", "50"}).code == kExitUsage);
    CHECK(run({"compare", "--variants", "swin"}).code == kExitUsage);
}

TEST_CASE("verify") {
    const auto ok = run({"verify", "--suite", "perm"});
    CHECK(ok.code == kExitOk);
    CHECK(contains(ok.out, "status=pass\n"));
    const auto oracle = run({"verify", "--suite", "oracle"});
    CHECK(oracle.code == kExitOk);
    const auto fault = run({"verify", "--suite", "oracle", "--inject-fault", "merge"});
    CHECK(fault.code == kExitCheckFailed);
    CHECK(contains(fault.out, "status=fail"));
    CHECK(run({"verify", "--suite", "nope"}).code == kExitUsage);
}

TEST_CASE("checkpoint then forward from it") {
    const std::string manifest = scratch("gg-t.json"), img = scratch("ck_img.ggt");
    const auto c = run({"checkpoint", "--seed", "5", "--out", manifest});
    REQUIRE(c.code == kExitOk);
    CHECK(contains(c.out, "parameters 28348066"));
    CHECK(contains(c.out, "round_trip bit-exact"));
    run({"make-input", "--out", img});
    const auto a = run({"forward", "--seed", "5", "--input", img});
    const auto b = run({"forward", "--checkpoint", manifest, "--input", img});
    REQUIRE(a.code == kExitOk);
    REQUIRE(b.code == kExitOk);
    CHECK(a.out.substr(a.out.find("logits")) == b.out.substr(b.out.find("logits")));
}
