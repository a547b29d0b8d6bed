#pragma once

// Volume storage: slice-stack directories of PNG files and single raw files.
//
// Raw layout (little-endian):
//
//   offset  size  field
//        0     4  magic "ZFV1"
//        4     4  width      (u32)
//        8     4  height     (u32)
//       12     4  depth      (u32)
//       16     4  channels   (u32, 1 or 3)
//       20     4  bit_depth  (u32, 8 or 16)
//       24     8  reserved   (zero)
//       32     -  samples: z-major, then row-major, channels interleaved
//
// Samples are normalized to [0,1] on read (v / 255 or v / 65535) and clamped
// then rounded to the nearest code on write.

#include "zfuse/error.hpp"
#include "zfuse/image.hpp"
#include "zfuse/png_codec.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <unistd.h>
#include <vector>

namespace zfuse {

namespace fs = std::filesystem;

enum class Layout { slice_stack, raw_file };

[[nodiscard]] inline std::string_view to_string(Layout l) noexcept {
    return l == Layout::slice_stack ? "stack" : "raw";
}

struct VolumeMeta {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t depth = 0;
    std::size_t channels = 1;
    std::size_t bit_depth = 8;
    Layout layout = Layout::slice_stack;
    fs::path path;

    // Slice-stack naming: <prefix><index padded to index_width>.png, indices from first_index.
    std::string name_prefix = "slice_";
    std::size_t first_index = 0;
    std::size_t index_width = 5;

    void validate() const {
        if (width < 1 || height < 1 || depth < 1) throw ArgumentError("volume dimensions must be >= 1");
        if (channels != 1 && channels != 3) throw ArgumentError("channels must be 1 or 3");
        if (bit_depth != 8 && bit_depth != 16) throw ArgumentError("unsupported bit depth " + std::to_string(bit_depth));
    }

    [[nodiscard]] std::size_t slice_samples() const noexcept { return width * height * channels; }
    [[nodiscard]] std::size_t slice_bytes() const noexcept { return slice_samples() * (bit_depth / 8); }
    [[nodiscard]] double max_code() const noexcept { return bit_depth == 8 ? 255.0 : 65535.0; }
};

/// Fixed index width for a stack of `depth` slices (at least 5 digits).
[[nodiscard]] inline std::size_t default_index_width(std::size_t depth) {
    std::size_t digits = 1;
    for (std::size_t v = depth > 0 ? depth - 1 : 0; v >= 10; v /= 10) ++digits;
    return std::max<std::size_t>(5, digits);
}

[[nodiscard]] inline fs::path slice_path(const VolumeMeta& meta, std::size_t z) {
    std::string idx = std::to_string(meta.first_index + z);
    if (idx.size() < meta.index_width) idx.insert(0, meta.index_width - idx.size(), '0');
    return meta.path / (meta.name_prefix + idx + ".png");
}

/// One-sided z-halo in slices: ceil(truncation * sigma_z).
[[nodiscard]] inline std::size_t overlap_extent(double sigma_z, double truncation) {
    if (!(sigma_z >= 0) || !(truncation > 0)) throw ArgumentError("overlap_extent needs sigma_z >= 0, truncation > 0");
    const double r = truncation * sigma_z;
    const double nearest = std::round(r);
    return static_cast<std::size_t>(std::abs(r - nearest) < 1e-9 ? nearest : std::ceil(r));
}

namespace raw {

inline constexpr std::size_t header_size = 32;
inline constexpr std::array<char, 4> magic{'Z', 'F', 'V', '1'};

inline void put_u32(unsigned char* p, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) p[i] = static_cast<unsigned char>(v >> (8 * i));
}
inline std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[i]) << (8 * i);
    return v;
}

[[nodiscard]] inline std::array<unsigned char, header_size> encode_header(const VolumeMeta& m) {
    std::array<unsigned char, header_size> h{};
    std::memcpy(h.data(), magic.data(), 4);
    put_u32(h.data() + 4, static_cast<std::uint32_t>(m.width));
    put_u32(h.data() + 8, static_cast<std::uint32_t>(m.height));
    put_u32(h.data() + 12, static_cast<std::uint32_t>(m.depth));
    put_u32(h.data() + 16, static_cast<std::uint32_t>(m.channels));
    put_u32(h.data() + 20, static_cast<std::uint32_t>(m.bit_depth));
    return h;
}

[[nodiscard]] inline VolumeMeta decode_header(const std::array<unsigned char, header_size>& h, const fs::path& p) {
    if (std::memcmp(h.data(), magic.data(), 4) != 0) throw IoError(p.string() + ": not a raw volume (bad magic)");
    VolumeMeta m;
    m.layout = Layout::raw_file;
    m.path = p;
    m.width = get_u32(h.data() + 4);
    m.height = get_u32(h.data() + 8);
    m.depth = get_u32(h.data() + 12);
    m.channels = get_u32(h.data() + 16);
    m.bit_depth = get_u32(h.data() + 20);
    if (m.bit_depth != 8 && m.bit_depth != 16) {
        throw IoError(p.string() + ": unsupported bit depth " + std::to_string(m.bit_depth));
    }
    try {
        m.validate();
    } catch (const ArgumentError& e) {
        throw IoError(p.string() + ": " + e.what());
    }
    return m;
}

[[nodiscard]] inline std::uint64_t slice_offset(const VolumeMeta& m, std::size_t z) {
    return header_size + static_cast<std::uint64_t>(z) * m.slice_bytes();
}

}  // namespace raw

namespace detail {

/// Normalizes interleaved integer samples into a planar slice.
inline Slice decode_samples(const std::uint16_t* codes, std::size_t w, std::size_t h, std::size_t channels,
                            double max_code) {
    Slice s(w, h, channels);
    const std::size_t n = w * h;
    for (std::size_t c = 0; c < channels; ++c) {
        auto dst = s.channel(c).values();
        for (std::size_t i = 0; i < n; ++i) dst[i] = codes[i * channels + c] / max_code;
    }
    return s;
}

/// Clamps to [0,1] and rounds to the nearest integer code, interleaving channels.
inline std::vector<std::uint16_t> encode_samples(const Slice& s, double max_code) {
    const std::size_t n = s.width() * s.height();
    const std::size_t channels = s.channels();
    std::vector<std::uint16_t> codes(n * channels);
    for (std::size_t c = 0; c < channels; ++c) {
        auto src = s.channel(c).values();
        for (std::size_t i = 0; i < n; ++i) {
            const double v = src[i];
            if (std::isnan(v)) throw ArgumentError("cannot quantize NaN sample");
            codes[i * channels + c] = static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * max_code));
        }
    }
    return codes;
}

struct StackEntry {
    std::string prefix;
    std::string digits;
    fs::path path;
};

inline bool parse_stack_name(const fs::path& p, StackEntry& out) {
    const std::string name = p.filename().string();
    if (name.empty() || name.front() == '.' || p.extension() != ".png") return false;
    const std::string stem = p.stem().string();
    std::size_t i = stem.size();
    while (i > 0 && stem[i - 1] >= '0' && stem[i - 1] <= '9') --i;
    if (i == stem.size()) return false;
    out = {stem.substr(0, i), stem.substr(i), p};
    return true;
}

inline VolumeMeta probe_stack(const fs::path& dir) {
    std::map<std::size_t, StackEntry> by_index;
    std::string prefix;
    bool first = true;
    std::size_t digit_width = 0;
    bool uniform_width = true;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        StackEntry e;
        if (!parse_stack_name(entry.path(), e)) continue;
        if (first) {
            prefix = e.prefix;
            digit_width = e.digits.size();
            first = false;
        } else if (e.prefix != prefix) {
            throw IoError(dir.string() + ": mixed slice name prefixes '" + prefix + "' and '" + e.prefix + "'");
        }
        if (e.digits.size() != digit_width) uniform_width = false;
        std::size_t idx = 0;
        std::from_chars(e.digits.data(), e.digits.data() + e.digits.size(), idx);
        if (!by_index.emplace(idx, e).second) throw IoError(dir.string() + ": duplicate slice index " + e.digits);
    }
    if (by_index.empty()) throw IoError(dir.string() + ": no slice images found");

    VolumeMeta m;
    m.layout = Layout::slice_stack;
    m.path = dir;
    m.name_prefix = prefix;
    m.first_index = by_index.begin()->first;
    m.depth = by_index.size();
    if (by_index.rbegin()->first - m.first_index + 1 != m.depth) {
        throw IoError(dir.string() + ": slice indices are not contiguous");
    }
    m.index_width = uniform_width ? digit_width : 0;

    const png::Header h0 = png::read_header(by_index.begin()->second.path);
    m.width = h0.width;
    m.height = h0.height;
    m.channels = h0.channels;
    m.bit_depth = h0.bit_depth;
    for (const auto& [idx, e] : by_index) {
        const png::Header h = png::read_header(e.path);
        if (h.width != m.width || h.height != m.height) {
            throw IoError(dir.string() + ": inconsistent slice dimensions (" + e.path.filename().string() + " is " +
                          std::to_string(h.width) + "x" + std::to_string(h.height) + ", expected " +
                          std::to_string(m.width) + "x" + std::to_string(m.height) + ")");
        }
        if (h.channels != m.channels || h.bit_depth != m.bit_depth) {
            throw IoError(dir.string() + ": inconsistent slice format in " + e.path.filename().string());
        }
    }
    return m;
}

inline VolumeMeta probe_raw(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open " + file.string());
    std::array<unsigned char, raw::header_size> h{};
    in.read(reinterpret_cast<char*>(h.data()), h.size());
    if (in.gcount() != static_cast<std::streamsize>(h.size())) throw IoError(file.string() + ": truncated header");
    VolumeMeta m = raw::decode_header(h, file);
    const std::uint64_t expected = raw::slice_offset(m, m.depth);
    if (fs::file_size(file) < expected) throw IoError(file.string() + ": file shorter than its header declares");
    return m;
}

inline Slice read_stack_slice(const VolumeMeta& meta, std::size_t z) {
    const fs::path p = slice_path(meta, z);
    png::Pixels px;
    try {
        px = png::read(p);
    } catch (const Error& e) {
        throw IoError("slice " + std::to_string(z) + ": " + e.what());
    }
    if (px.header.width != meta.width || px.header.height != meta.height) {
        throw IoError("slice " + std::to_string(z) + ": inconsistent slice dimensions in " + p.string());
    }
    if (px.header.channels != meta.channels || px.header.bit_depth != meta.bit_depth) {
        throw IoError("slice " + std::to_string(z) + ": inconsistent slice format in " + p.string());
    }
    return decode_samples(px.samples.data(), meta.width, meta.height, meta.channels, meta.max_code());
}

inline Slice read_raw_slice(const VolumeMeta& meta, std::ifstream& in, std::size_t z) {
    std::vector<unsigned char> bytes(meta.slice_bytes());
    in.seekg(static_cast<std::streamoff>(raw::slice_offset(meta, z)));
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
        throw IoError("slice " + std::to_string(z) + ": short read from " + meta.path.string());
    }
    std::vector<std::uint16_t> codes(meta.slice_samples());
    if (meta.bit_depth == 8) {
        for (std::size_t i = 0; i < codes.size(); ++i) codes[i] = bytes[i];
    } else {
        for (std::size_t i = 0; i < codes.size(); ++i) {
            codes[i] = static_cast<std::uint16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8));
        }
    }
    return decode_samples(codes.data(), meta.width, meta.height, meta.channels, meta.max_code());
}

}  // namespace detail

/// Reads metadata of a slice-stack directory or raw volume file.
[[nodiscard]] inline VolumeMeta probe(const fs::path& path) {
    std::error_code ec;
    if (!fs::exists(path, ec)) throw IoError("no such file or directory: " + path.string());
    return fs::is_directory(path) ? detail::probe_stack(path) : detail::probe_raw(path);
}

/// Decodes slices [z_begin, z_end) into normalized samples.
[[nodiscard]] inline Slab read_slab(const VolumeMeta& meta, std::size_t z_begin, std::size_t z_end) {
    if (!(z_begin < z_end && z_end <= meta.depth)) {
        throw ArgumentError("read_slab: invalid range [" + std::to_string(z_begin) + ", " + std::to_string(z_end) +
                            ") for depth " + std::to_string(meta.depth));
    }
    Slab slab{z_begin, z_end, {}};
    slab.slices.reserve(z_end - z_begin);
    if (meta.layout == Layout::slice_stack) {
        for (std::size_t z = z_begin; z < z_end; ++z) slab.slices.push_back(detail::read_stack_slice(meta, z));
    } else {
        std::ifstream in(meta.path, std::ios::binary);
        if (!in) throw IoError("cannot open " + meta.path.string());
        for (std::size_t z = z_begin; z < z_end; ++z) slab.slices.push_back(detail::read_raw_slice(meta, in, z));
    }
    return slab;
}

[[nodiscard]] inline Slice read_slice(const VolumeMeta& meta, std::size_t z) {
    return std::move(read_slab(meta, z, z + 1).slices.front());
}

/// Prepares storage for `meta`: creates the directory, or writes the raw header
/// and sizes the file so slices can be written in any order.
inline void create_volume(const VolumeMeta& meta) {
    meta.validate();
    if (meta.layout == Layout::slice_stack) {
        fs::create_directories(meta.path);
        return;
    }
    if (meta.path.has_parent_path()) fs::create_directories(meta.path.parent_path());
    const auto header = raw::encode_header(meta);
    bool reuse = false;
    std::error_code ec;
    if (fs::exists(meta.path, ec)) {
        try {
            const VolumeMeta existing = detail::probe_raw(meta.path);
            reuse = existing.width == meta.width && existing.height == meta.height && existing.depth == meta.depth &&
                    existing.channels == meta.channels && existing.bit_depth == meta.bit_depth;
        } catch (const IoError&) {
        }
    }
    if (!reuse) {
        std::ofstream out(meta.path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot create " + meta.path.string());
        out.write(reinterpret_cast<const char*>(header.data()), header.size());
        if (!out) throw IoError("write failed: " + meta.path.string());
    }
    fs::resize_file(meta.path, raw::slice_offset(meta, meta.depth));
}

/// Whether slice z already exists in the output (slice stacks only; raw files have no per-slice presence).
[[nodiscard]] inline bool slice_exists(const VolumeMeta& meta, std::size_t z) {
    std::error_code ec;
    return meta.layout == Layout::slice_stack && fs::exists(slice_path(meta, z), ec);
}

/// Clamps, quantizes and stores slice z. Stack slices are written to a temporary
/// file and renamed into place; raw slices are written in place at their offset.
inline void write_slice(const VolumeMeta& meta, std::size_t z, const Slice& slice) {
    if (z >= meta.depth) throw ArgumentError("write_slice: index " + std::to_string(z) + " outside volume");
    if (slice.width() != meta.width || slice.height() != meta.height || slice.channels() != meta.channels) {
        throw ArgumentError("write_slice: slice dimensions do not match volume");
    }
    const std::vector<std::uint16_t> codes = detail::encode_samples(slice, meta.max_code());
    if (meta.layout == Layout::slice_stack) {
        const fs::path final_path = slice_path(meta, z);
        fs::path tmp = final_path;
        tmp.replace_filename("." + final_path.filename().string() + "." + std::to_string(::getpid()) + ".tmp");
        png::write(tmp, {meta.width, meta.height, meta.channels, meta.bit_depth}, codes);
        std::error_code ec;
        fs::rename(tmp, final_path, ec);
        if (ec) {
            fs::remove(tmp, ec);
            throw IoError("slice " + std::to_string(z) + ": cannot rename into " + final_path.string());
        }
        return;
    }
    std::vector<unsigned char> bytes(meta.slice_bytes());
    if (meta.bit_depth == 8) {
        for (std::size_t i = 0; i < codes.size(); ++i) bytes[i] = static_cast<unsigned char>(codes[i]);
    } else {
        for (std::size_t i = 0; i < codes.size(); ++i) {
            bytes[2 * i] = static_cast<unsigned char>(codes[i] & 0xff);
            bytes[2 * i + 1] = static_cast<unsigned char>(codes[i] >> 8);
        }
    }
    std::fstream out(meta.path, std::ios::binary | std::ios::in | std::ios::out);
    if (!out) throw IoError("slice " + std::to_string(z) + ": cannot open " + meta.path.string());
    out.seekp(static_cast<std::streamoff>(raw::slice_offset(meta, z)));
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("slice " + std::to_string(z) + ": write failed to " + meta.path.string());
}

/// Output metadata mirroring `input` dimensions at `path` with `layout`.
[[nodiscard]] inline VolumeMeta output_like(const VolumeMeta& input, const fs::path& path, Layout layout) {
    VolumeMeta m;
    m.width = input.width;
    m.height = input.height;
    m.depth = input.depth;
    m.channels = input.channels;
    m.bit_depth = input.bit_depth;
    m.layout = layout;
    m.path = path;
    m.name_prefix = "slice_";
    m.first_index = 0;
    m.index_width = default_index_width(input.depth);
    return m;
}

/// Reads a single PNG image as a normalized slice.
[[nodiscard]] inline Slice read_image(const fs::path& p) {
    std::error_code ec;
    if (!fs::exists(p, ec)) throw IoError("no such file: " + p.string());
    const png::Pixels px = png::read(p);
    return detail::decode_samples(px.samples.data(), px.header.width, px.header.height, px.header.channels,
                                  px.header.bit_depth == 8 ? 255.0 : 65535.0);
}

/// Writes a slice as a single PNG image (atomic via rename).
inline void write_image(const fs::path& p, const Slice& s, std::size_t bit_depth = 8) {
    if (bit_depth != 8 && bit_depth != 16) throw ArgumentError("unsupported bit depth " + std::to_string(bit_depth));
    if (s.channels() != 1 && s.channels() != 3) throw ArgumentError("images must have 1 or 3 channels");
    const auto codes = detail::encode_samples(s, bit_depth == 8 ? 255.0 : 65535.0);
    fs::path tmp = p;
    tmp.replace_filename("." + p.filename().string() + "." + std::to_string(::getpid()) + ".tmp");
    png::write(tmp, {s.width(), s.height(), s.channels(), bit_depth}, codes);
    fs::rename(tmp, p);
}

}  // namespace zfuse
