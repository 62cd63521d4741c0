// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path& work() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / "fbsd_cli_tests";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

int run(const std::string& args) {
    std::string cmd = std::string(FBSD_CLI) + " " + args + " 2>/dev/null";
    if (args.find(" > ") == std::string::npos) cmd += " >/dev/null";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string at(const char* name) { return (work() / name).string(); }

}  // namespace

TEST_CASE("gen is reproducible from its flags") {
    REQUIRE(run("gen --scenario fbs --level 2 --traces 10 --seed 42 --out " + at("a.jsonl")) == 0);
    REQUIRE(run("gen --scenario fbs --level 2 --traces 10 --seed 42 --workers 3 --out " + at("b.jsonl")) == 0);
    CHECK(slurp(at("a.jsonl")) == slurp(at("b.jsonl")));
    CHECK(slurp(at("a.jsonl.manifest.json")).find("\"format_version\"") != std::string::npos);
}

TEST_CASE("exit codes") {
    CHECK(run("gen --scenario fbs --level 7 --out " + at("x.jsonl")) == 2);
    CHECK(run("gen") == 2);
    CHECK(run("eval --model " + at("missing") + " --data " + at("a.jsonl")) == 3);
    CHECK(run("featurize --data " + at("nope.jsonl") + " --out " + at("x.csv")) == 3);
    {
        std::ofstream bad(at("bad.jsonl"));
        bad << "{\"trace_id\": 3\n";
    }
    CHECK(run("featurize --data " + at("bad.jsonl") + " --out " + at("x.csv")) == 4);
    CHECK(run("seqlen-sweep --data " + at("a.jsonl") + " --range 5") == 2);
}

TEST_CASE("featurize writes the matrix and codebook") {
    REQUIRE(run("featurize --data " + at("a.jsonl") + " --layer nas --out " + at("a.csv") + " --codebook-out " +
                at("cb.json")) == 0);
    REQUIRE(run("featurize --data " + at("a.jsonl") + " --layer nas --codebook " + at("cb.json") + " --out " +
                at("a2.csv")) == 0);
    CHECK(slurp(at("a.csv")) == slurp(at("a2.csv")));
    CHECK(slurp(at("a.csv")).rfind("trace_id,seq,", 0) == 0);
}

TEST_CASE("streaming detect matches batch eval") {
    REQUIRE(run("gen --preset msa-desk --seed 5 --out " + at("msa.jsonl")) == 0);
    REQUIRE(run("train msa --data " + at("msa.jsonl") + " --model " + at("m") + " --epochs 40 --seed 5") == 0);
    REQUIRE(run("eval --model " + at("m") + " --data " + at("msa.jsonl") + " --workers 3 --report " + at("r.json") +
                " --verdicts " + at("v.jsonl")) == 0);
    REQUIRE(run("detect --model " + at("m") + " < " + at("msa.jsonl") + " > " + at("d.jsonl")) == 0);
    CHECK(slurp(at("v.jsonl")) == slurp(at("d.jsonl")));
    CHECK(slurp(at("r.json")).find("\"fpr\"") != std::string::npos);
    CHECK(run("eval --model " + at("m") + " --data " + at("a.jsonl")) == 4);
}

TEST_CASE("gradcheck and signature comparison run") {
    CHECK(run("gradcheck --seeds 2 --report " + at("gc.json")) == 0);
    CHECK(slurp(at("gc.json")).find("packet_model_window") != std::string::npos);
    CHECK(run("compare-signatures --traces 3 --report " + at("sig.json")) == 0);
    CHECK(run("compare-signatures --emit-builtin " + at("builtin.json")) == 0);
    CHECK(run("compare-signatures --traces 3 --signatures " + at("builtin.json")) == 0);
}
