#include "oracles.hpp"

#include "zfuse/volume_io.hpp"

#include <catch_amalgamated.hpp>

#include <fstream>
#include <random>
#include <thread>

using namespace zfuse;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("zfuse_test_io_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

VolumeMeta make_meta(const fs::path& path, Layout layout, std::size_t w, std::size_t h, std::size_t d,
                     std::size_t channels, std::size_t bits) {
    VolumeMeta m;
    m.width = w;
    m.height = h;
    m.depth = d;
    m.channels = channels;
    m.bit_depth = bits;
    m.layout = layout;
    m.path = path;
    m.index_width = default_index_width(d);
    return m;
}

std::vector<unsigned char> file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("overlap_extent") {
    REQUIRE(overlap_extent(3.0, 3.0) == 9);
    REQUIRE(2 * overlap_extent(3.0, 3.0) == 6 * 3);  // two-sided halo is 6 sigma_z at truncation 3
    REQUIRE(overlap_extent(0.0, 3.0) == 0);
    REQUIRE(overlap_extent(2.5, 3.0) == 8);
    REQUIRE_THROWS_AS(overlap_extent(-1.0, 3.0), ArgumentError);
    REQUIRE_THROWS_AS(overlap_extent(1.0, 0.0), ArgumentError);
}

TEST_CASE("slice file names are zero padded to a width inferred from depth") {
    REQUIRE(default_index_width(100) == 5);
    REQUIRE(default_index_width(100000) == 5);
    REQUIRE(default_index_width(100001) == 6);
    const VolumeMeta m = make_meta("/x", Layout::slice_stack, 1, 1, 100, 1, 8);
    REQUIRE(slice_path(m, 42).filename() == "slice_00042.png");
}

TEST_CASE("probe a directory of 100 8-bit 1024x1024 slices") {
    const fs::path dir = temp_dir("probe100");
    const VolumeMeta m = make_meta(dir, Layout::slice_stack, 1024, 1024, 100, 1, 8);
    create_volume(m);
    const Slice zero(1024, 1024, 1);
    for (std::size_t z = 0; z < 100; ++z) write_slice(m, z, zero);
    const VolumeMeta p = probe(dir);
    REQUIRE(p.width == 1024);
    REQUIRE(p.height == 1024);
    REQUIRE(p.depth == 100);
    REQUIRE(p.channels == 1);
    REQUIRE(p.bit_depth == 8);
    REQUIRE(p.layout == Layout::slice_stack);
    fs::remove_all(dir);
}

TEST_CASE("raw header round trip") {
    const fs::path dir = temp_dir("rawhdr");
    const VolumeMeta m = make_meta(dir / "v.raw", Layout::raw_file, 64, 64, 8, 1, 16);
    create_volume(m);
    const auto bytes = file_bytes(m.path);
    REQUIRE(bytes.size() == 32 + 64 * 64 * 8 * 2);
    REQUIRE(std::string(bytes.begin(), bytes.begin() + 4) == "ZFV1");
    REQUIRE(bytes[4] == 64);
    REQUIRE(bytes[12] == 8);
    REQUIRE(bytes[16] == 1);
    REQUIRE(bytes[20] == 16);
    const VolumeMeta p = probe(m.path);
    REQUIRE(p.width == 64);
    REQUIRE(p.height == 64);
    REQUIRE(p.depth == 8);
    REQUIRE(p.channels == 1);
    REQUIRE(p.bit_depth == 16);
    REQUIRE(p.layout == Layout::raw_file);
    fs::remove_all(dir);
}

TEST_CASE("probe errors") {
    SECTION("missing path") {
        REQUIRE_THROWS_AS(probe("/nonexistent/zfuse/volume"), IoError);
    }
    SECTION("inconsistent slice dimensions") {
        const fs::path dir = temp_dir("inconsistent");
        png::write(dir / "slice_00000.png", {512, 512, 1, 8}, std::vector<std::uint16_t>(512 * 512));
        png::write(dir / "slice_00001.png", {256, 256, 1, 8}, std::vector<std::uint16_t>(256 * 256));
        REQUIRE_THROWS_WITH(probe(dir), Catch::Matchers::ContainsSubstring("inconsistent slice dimensions"));
        fs::remove_all(dir);
    }
    SECTION("unsupported bit depth in a raw header") {
        const fs::path dir = temp_dir("bits");
        VolumeMeta m = make_meta(dir / "v.raw", Layout::raw_file, 4, 4, 2, 1, 8);
        auto header = raw::encode_header(m);
        header[20] = 12;
        std::ofstream(m.path, std::ios::binary).write(reinterpret_cast<const char*>(header.data()), header.size());
        REQUIRE_THROWS_WITH(probe(m.path), Catch::Matchers::ContainsSubstring("unsupported bit depth"));
        fs::remove_all(dir);
    }
    SECTION("gap in slice indices") {
        const fs::path dir = temp_dir("gap");
        png::write(dir / "slice_00000.png", {4, 4, 1, 8}, std::vector<std::uint16_t>(16));
        png::write(dir / "slice_00002.png", {4, 4, 1, 8}, std::vector<std::uint16_t>(16));
        REQUIRE_THROWS_AS(probe(dir), IoError);
        fs::remove_all(dir);
    }
}

TEST_CASE("read_slab decodes normalized samples") {
    const fs::path dir = temp_dir("read");
    for (Layout layout : {Layout::slice_stack, Layout::raw_file}) {
        const fs::path path = layout == Layout::raw_file ? dir / "v.raw" : dir / "stack";
        const VolumeMeta m = make_meta(path, layout, 5, 4, 3, 1, 8);
        create_volume(m);
        write_slice(m, 0, Slice(5, 4, 1, 0.0));
        write_slice(m, 1, Slice(5, 4, 1, 1.0));
        write_slice(m, 2, Slice(5, 4, 1, 0.5));
        const VolumeMeta p = probe(path);
        const Slab s = read_slab(p, 0, 1);
        REQUIRE(s.z_begin == 0);
        REQUIRE(s.z_end == 1);
        REQUIRE(s.size() == 1);
        for (double v : s.slices[0].channel(0).values()) REQUIRE(v == 0.0);
        const Slab all = read_slab(p, 0, 3);
        for (double v : all.slices[1].channel(0).values()) REQUIRE(v == 1.0);  // 255 -> 1.0 exactly
        for (double v : all.slices[2].channel(0).values()) REQUIRE(v == 128.0 / 255.0);
        REQUIRE_THROWS_AS(read_slab(p, 2, 2), ArgumentError);
        REQUIRE_THROWS_AS(read_slab(p, 0, 4), ArgumentError);
    }
    fs::remove_all(dir);
}

TEST_CASE("write_slice clamps and rounds to the nearest code") {
    const fs::path dir = temp_dir("quant");
    const VolumeMeta m8 = make_meta(dir / "a.raw", Layout::raw_file, 3, 1, 1, 1, 8);
    create_volume(m8);
    Slice s(3, 1, 1);
    s.channel(0)(0, 0) = 1.2;
    s.channel(0)(1, 0) = 0.5;
    s.channel(0)(2, 0) = -0.3;
    write_slice(m8, 0, s);
    const auto b8 = file_bytes(m8.path);
    REQUIRE(int(b8[32]) == 255);
    REQUIRE(int(b8[33]) == 128);  // round(0.5 * 255) = round(127.5) = 128
    REQUIRE(int(b8[34]) == 0);

    const VolumeMeta m16 = make_meta(dir / "b.raw", Layout::raw_file, 3, 1, 1, 1, 16);
    create_volume(m16);
    write_slice(m16, 0, s);
    const auto b16 = file_bytes(m16.path);
    REQUIRE((b16[32] | (b16[33] << 8)) == 65535);
    REQUIRE((b16[34] | (b16[35] << 8)) == 32768);  // round(32767.5)

    const VolumeMeta stack = make_meta(dir / "stack", Layout::slice_stack, 3, 1, 1, 1, 8);
    create_volume(stack);
    write_slice(stack, 0, s);
    const png::Pixels px = png::read(slice_path(stack, 0));
    REQUIRE(px.samples == std::vector<std::uint16_t>{255, 128, 0});
    fs::remove_all(dir);
}

TEST_CASE("write_slice errors") {
    const fs::path dir = temp_dir("werr");
    const VolumeMeta m = make_meta(dir / "s", Layout::slice_stack, 4, 4, 2, 1, 8);
    create_volume(m);
    REQUIRE_THROWS_AS(write_slice(m, 0, Slice(4, 5, 1)), ArgumentError);
    REQUIRE_THROWS_AS(write_slice(m, 0, Slice(4, 4, 3)), ArgumentError);
    REQUIRE_THROWS_AS(write_slice(m, 2, Slice(4, 4, 1)), ArgumentError);
    fs::remove_all(dir);
}

TEST_CASE("16-bit round trip error is at most half a quantization step") {
    const fs::path dir = temp_dir("rt16");
    std::mt19937_64 rng(21);
    const double bound = 1.0 / (2.0 * 65535.0) + 1e-15;
    for (Layout layout : {Layout::slice_stack, Layout::raw_file}) {
        for (std::size_t channels : {1u, 3u}) {
            const fs::path path = dir / (std::string(to_string(layout)) + std::to_string(channels));
            const VolumeMeta m = make_meta(path, layout, 23, 17, 4, channels, 16);
            create_volume(m);
            std::vector<Slice> written;
            for (std::size_t z = 0; z < 4; ++z) {
                Slice s = oracle::random_slice(23, 17, channels, rng);
                // Push some samples out of range to exercise clamping.
                s.channel(0)(0, 0) = 1.5;
                s.channel(0)(1, 0) = -0.2;
                write_slice(m, z, s);
                written.push_back(s);
            }
            const Slab back = read_slab(probe(path), 0, 4);
            for (std::size_t z = 0; z < 4; ++z) {
                for (std::size_t c = 0; c < channels; ++c) {
                    auto a = written[z].channel(c).values();
                    auto b = back.slices[z].channel(c).values();
                    for (std::size_t i = 0; i < a.size(); ++i) {
                        REQUIRE(std::abs(std::clamp(a[i], 0.0, 1.0) - b[i]) <= bound);
                    }
                }
            }
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("slab reads are repeatable") {
    const fs::path dir = temp_dir("pure");
    std::mt19937_64 rng(22);
    const VolumeMeta m = make_meta(dir / "s", Layout::slice_stack, 9, 9, 5, 3, 8);
    create_volume(m);
    for (std::size_t z = 0; z < 5; ++z) write_slice(m, z, oracle::random_slice(9, 9, 3, rng));
    const VolumeMeta p = probe(m.path);
    const Slab a = read_slab(p, 1, 4);
    const Slab b = read_slab(p, 1, 4);
    REQUIRE(a.slices == b.slices);
    fs::remove_all(dir);
}

TEST_CASE("stack writes leave no temporary files and replace existing slices") {
    const fs::path dir = temp_dir("atomic");
    const VolumeMeta m = make_meta(dir / "s", Layout::slice_stack, 6, 6, 2, 1, 8);
    create_volume(m);
    write_slice(m, 0, Slice(6, 6, 1, 0.2));
    write_slice(m, 0, Slice(6, 6, 1, 0.8));
    write_slice(m, 1, Slice(6, 6, 1, 0.4));
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(m.path)) {
        REQUIRE(e.path().extension() == ".png");
        ++files;
    }
    REQUIRE(files == 2);
    REQUIRE(read_slice(probe(m.path), 0).channel(0)(0, 0) == 204.0 / 255.0);
    fs::remove_all(dir);
}

TEST_CASE("corrupt slices are reported with their index") {
    const fs::path dir = temp_dir("corrupt");
    const VolumeMeta m = make_meta(dir / "s", Layout::slice_stack, 6, 6, 3, 1, 8);
    create_volume(m);
    for (std::size_t z = 0; z < 3; ++z) write_slice(m, z, Slice(6, 6, 1, 0.5));
    const VolumeMeta p = probe(m.path);
    {
        // Keep the header intact so probing succeeds but decoding fails.
        auto bytes = file_bytes(slice_path(m, 2));
        bytes.resize(bytes.size() / 2);
        std::ofstream(slice_path(m, 2), std::ios::binary | std::ios::trunc)
            .write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
    REQUIRE_NOTHROW(read_slab(p, 0, 2));
    REQUIRE_THROWS_WITH(read_slab(p, 0, 3), Catch::Matchers::ContainsSubstring("slice 2"));
    fs::remove_all(dir);
}

TEST_CASE("slices are verified against the volume format on read") {
    const fs::path dir = temp_dir("lazy");
    const VolumeMeta m = make_meta(dir / "s", Layout::slice_stack, 6, 6, 2, 1, 8);
    create_volume(m);
    for (std::size_t z = 0; z < 2; ++z) write_slice(m, z, Slice(6, 6, 1, 0.5));
    const VolumeMeta p = probe(m.path);
    png::write(slice_path(m, 1), {7, 6, 1, 8}, std::vector<std::uint16_t>(42));
    REQUIRE_THROWS_WITH(read_slab(p, 1, 2), Catch::Matchers::ContainsSubstring("inconsistent slice dimensions"));
    fs::remove_all(dir);
}

TEST_CASE("concurrent raw writes to distinct slices") {
    const fs::path dir = temp_dir("concurrent");
    const VolumeMeta m = make_meta(dir / "v.raw", Layout::raw_file, 32, 32, 16, 1, 16);
    create_volume(m);
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < 4; ++t) {
        threads.emplace_back([&, t] {
            for (std::size_t z = t; z < 16; z += 4) write_slice(m, z, Slice(32, 32, 1, double(z) / 16.0));
        });
    }
    for (auto& th : threads) th.join();
    const Slab s = read_slab(probe(m.path), 0, 16);
    for (std::size_t z = 0; z < 16; ++z) {
        REQUIRE(std::abs(s.slices[z].channel(0)(5, 5) - double(z) / 16.0) <= 1.0 / (2 * 65535.0) + 1e-15);
    }
    fs::remove_all(dir);
}

TEST_CASE("single image read/write keeps RGB") {
    const fs::path dir = temp_dir("image");
    std::mt19937_64 rng(23);
    const Slice rgb = oracle::random_slice(10, 7, 3, rng);
    write_image(dir / "rgb.png", rgb, 16);
    const Slice back = read_image(dir / "rgb.png");
    REQUIRE(back.channels() == 3);
    REQUIRE(max_abs_diff(back, rgb) <= 1.0 / (2 * 65535.0) + 1e-15);
    REQUIRE_THROWS_WITH(read_image(dir / "missing.png"), Catch::Matchers::ContainsSubstring("missing.png"));
    fs::remove_all(dir);
}
