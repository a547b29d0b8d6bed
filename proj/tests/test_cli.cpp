#include "oracles.hpp"

#include "zfuse/volume_io.hpp"

#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <sys/wait.h>

using namespace zfuse;

namespace {

struct Run {
    int status = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

const fs::path& scratch() {
    static const fs::path p = [] {
        const fs::path d = fs::temp_directory_path() / "zfuse_test_cli";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return p;
}

Run zfuse_cli(const std::string& args) {
    const fs::path out = scratch() / "stdout.txt";
    const fs::path err = scratch() / "stderr.txt";
    const std::string cmd = std::string("\"") + ZFUSE_CLI + "\" " + args + " > \"" + out.string() + "\" 2> \"" +
                            err.string() + "\"";
    const int raw = std::system(cmd.c_str());
    Run r;
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

std::string value_of(const std::string& text, const std::string& key) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind(key + "=", 0) == 0) return line.substr(key.size() + 1);
    }
    return {};
}

}  // namespace

TEST_CASE("help output matches the snapshot") {
    const fs::path snapshots = fs::path(ZFUSE_SNAPSHOTS);
    const Run main_help = zfuse_cli("--help");
    REQUIRE(main_help.status == 0);
    REQUIRE(main_help.out == slurp(snapshots / "main_help.txt"));
    const Run fuse_help = zfuse_cli("fuse --help");
    REQUIRE(fuse_help.status == 0);
    REQUIRE(fuse_help.out == slurp(snapshots / "fuse_help.txt"));
}

TEST_CASE("fuse runs with the documented defaults") {
    const fs::path in = scratch() / "syn";
    REQUIRE(zfuse_cli("synth --out \"" + in.string() + "\" --width 48 --height 40 --depth 12").status == 0);
    const Run r = zfuse_cli("fuse --in \"" + in.string() + "\" --out \"" + (scratch() / "fused").string() + "\"");
    INFO(r.err);
    REQUIRE(r.status == 0);
    REQUIRE(value_of(r.out, "sigma_xy") == "1");
    REQUIRE(value_of(r.out, "sigma_z") == "3");
    REQUIRE(value_of(r.out, "alpha") == "0.001");
    REQUIRE(value_of(r.out, "truncation") == "3");
    REQUIRE(value_of(r.out, "robust") == "0");
    REQUIRE(value_of(r.out, "solved") == "12");
    REQUIRE(value_of(r.out, "nonconverged") == "0");
    REQUIRE(probe(scratch() / "fused").depth == 12);

    const Run m = zfuse_cli("metrics --reference \"" + in.string() + "\" --result \"" +
                            (scratch() / "fused").string() + "\"");
    REQUIRE(m.status == 0);
    REQUIRE(std::stod(value_of(m.out, "discontinuity_reduction")) >= 0.8);
}

TEST_CASE("invalid flag values are rejected before any I/O") {
    const fs::path out = scratch() / "never";
    const Run r = zfuse_cli("fuse --in /nonexistent --out \"" + out.string() + "\" --alpha 0");
    REQUIRE(r.status != 0);
    REQUIRE(r.err.find("--alpha") != std::string::npos);
    REQUIRE_FALSE(fs::exists(out));
    REQUIRE(zfuse_cli("fuse --in a --out b --sigma-z -1").status != 0);
    REQUIRE(zfuse_cli("fuse --in a --out b --workers 0").status != 0);
    REQUIRE(zfuse_cli("fuse --in a --out b --layout tiff").status != 0);
    REQUIRE(zfuse_cli("fuse --in a").status != 0);
}

TEST_CASE("robust fusion of a stack with a corrupt slice") {
    const fs::path in = scratch() / "corrupt.raw";
    REQUIRE(zfuse_cli("synth --out \"" + in.string() + "\" --layout raw --width 40 --height 40 --depth 14 --corrupt 6")
                .status == 0);
    const Run r = zfuse_cli("fuse --robust --sigma-z 3 --workers 2 --keep-smoothed --in \"" + in.string() +
                            "\" --out \"" + (scratch() / "corrupt_out.raw").string() + "\"");
    INFO(r.err);
    REQUIRE(r.status == 0);
    REQUIRE(value_of(r.out, "robust") == "1");
    REQUIRE(fs::exists(scratch() / "corrupt_out_smoothed.raw"));
}

TEST_CASE("fuse-pair") {
    std::mt19937_64 rng(1);
    const Slice grey = oracle::random_slice(30, 20, 1, rng);
    const Slice rgb = oracle::random_slice(30, 20, 3, rng);
    const fs::path g = scratch() / "grey.png", c = scratch() / "rgb.png";
    write_image(g, grey, 8);
    write_image(c, rgb, 8);

    SECTION("identical inputs") {
        const fs::path out = scratch() / "same.png";
        const Run r = zfuse_cli("fuse-pair --low \"" + g.string() + "\" --high \"" + g.string() + "\" --out \"" +
                                out.string() + "\"");
        REQUIRE(r.status == 0);
        // Output equals input up to one 8-bit quantization step.
        REQUIRE(max_abs_diff(read_image(out), read_image(g)) <= 1.0 / 255.0 + 1e-12);
    }
    SECTION("mono plus RGB gives RGB") {
        const fs::path out = scratch() / "mix.png";
        const Run r = zfuse_cli("fuse-pair --low \"" + c.string() + "\" --high \"" + g.string() + "\" --out \"" +
                                out.string() + "\"");
        REQUIRE(r.status == 0);
        REQUIRE(value_of(r.out, "channels") == "3");
        REQUIRE(read_image(out).channels() == 3);
    }
    SECTION("missing input names the path") {
        const fs::path missing = scratch() / "does_not_exist.png";
        const Run r = zfuse_cli("fuse-pair --low \"" + missing.string() + "\" --high \"" + g.string() +
                                "\" --out \"" + (scratch() / "x.png").string() + "\"");
        REQUIRE(r.status != 0);
        REQUIRE(r.err.find(missing.string()) != std::string::npos);
        REQUIRE_FALSE(fs::exists(scratch() / "x.png"));
    }
}

TEST_CASE("metrics") {
    const fs::path a = scratch() / "ma", b = scratch() / "mb";
    REQUIRE(zfuse_cli("synth --out \"" + a.string() + "\" --width 24 --height 24 --depth 5").status == 0);
    REQUIRE(zfuse_cli("synth --out \"" + b.string() + "\" --width 24 --height 20 --depth 5").status == 0);

    const Run same = zfuse_cli("metrics --reference \"" + a.string() + "\" --result \"" + a.string() + "\"");
    REQUIRE(same.status == 0);
    REQUIRE(std::stod(value_of(same.out, "discontinuity_delta")) == 0.0);
    REQUIRE(std::stod(value_of(same.out, "gradient_preservation")) == Catch::Approx(1.0).margin(1e-12));

    const Run mismatch = zfuse_cli("metrics --reference \"" + a.string() + "\" --result \"" + b.string() + "\"");
    REQUIRE(mismatch.status != 0);
    REQUIRE(mismatch.err.find("differ in dimensions") != std::string::npos);
}

TEST_CASE("bench emits one row per size") {
    const Run r = zfuse_cli("bench --sizes 16,24,32x16x8");
    INFO(r.err);
    REQUIRE(r.status == 0);
    std::istringstream in(r.out);
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(in, line)) {
        if (line.rfind("size=", 0) == 0) rows.push_back(line);
    }
    REQUIRE(rows.size() == 3);
    REQUIRE(rows[0].find("size=16x16x16 ") == 0);
    REQUIRE(rows[2].find("size=32x16x8 ") == 0);
    for (const auto& row : rows) {
        REQUIRE(row.find("wall_seconds=") != std::string::npos);
        REQUIRE(row.find("peak_bytes=") != std::string::npos);
    }
    REQUIRE(zfuse_cli("bench --sizes 0").status != 0);
}
