#pragma once

// Minimal lossless PNG reading/writing for 8/16-bit gray and RGB images.
// Palette images are expanded to RGB and alpha channels are dropped.

#include "zfuse/error.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

namespace zfuse::png {

struct Header {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;   // 1 or 3 after transforms
    std::size_t bit_depth = 0;  // 8 or 16 after transforms
};

/// Interleaved samples in host byte order; 8-bit data still uses 16-bit storage.
struct Pixels {
    Header header;
    std::vector<std::uint16_t> samples;
};

namespace detail {

struct ErrorContext {
    std::jmp_buf jump;
    char message[256] = {};
};

inline void on_error(png_structp png, png_const_charp msg) {
    auto* ctx = static_cast<ErrorContext*>(png_get_error_ptr(png));
    std::snprintf(ctx->message, sizeof(ctx->message), "%s", msg);
    std::longjmp(ctx->jump, 1);
}

inline void on_warning(png_structp, png_const_charp) {}

class File {
public:
    File(const std::filesystem::path& p, const char* mode) : f_(std::fopen(p.c_str(), mode)) {
        if (!f_) throw IoError("cannot open " + p.string() + ": " + std::strerror(errno));
    }
    ~File() {
        if (f_) std::fclose(f_);
    }
    File(const File&) = delete;
    File& operator=(const File&) = delete;
    std::FILE* get() const noexcept { return f_; }
    int close() {
        int rc = std::fclose(f_);
        f_ = nullptr;
        return rc;
    }

private:
    std::FILE* f_;
};

class Reader {
public:
    Reader() {
        png_ = png_create_read_struct(PNG_LIBPNG_VER_STRING, &ctx_, on_error, on_warning);
        if (png_) info_ = png_create_info_struct(png_);
        if (!png_ || !info_) throw IoError("libpng: out of memory");
    }
    ~Reader() { png_destroy_read_struct(&png_, &info_, nullptr); }
    Reader(const Reader&) = delete;
    Reader& operator=(const Reader&) = delete;

    // Returns false and fills `message` on libpng failure.
    bool read_header(std::FILE* f, Header& out) {
        if (setjmp(ctx_.jump)) return false;
        png_init_io(png_, f);
        png_read_info(png_, info_);
        const int color = png_get_color_type(png_, info_);
        const int depth = png_get_bit_depth(png_, info_);
        if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png_);
        if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png_);
        if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png_);
        if (depth == 16) png_set_swap(png_);
        png_read_update_info(png_, info_);
        out.width = png_get_image_width(png_, info_);
        out.height = png_get_image_height(png_, info_);
        out.channels = png_get_channels(png_, info_);
        out.bit_depth = png_get_bit_depth(png_, info_);
        return true;
    }

    bool read_rows(unsigned char* buffer, std::size_t row_bytes, std::size_t rows) {
        if (setjmp(ctx_.jump)) return false;
        for (std::size_t y = 0; y < rows; ++y) png_read_row(png_, buffer + y * row_bytes, nullptr);
        return true;
    }

    const char* message() const noexcept { return ctx_.message; }

private:
    ErrorContext ctx_;
    png_structp png_ = nullptr;
    png_infop info_ = nullptr;
};

class Writer {
public:
    Writer() {
        png_ = png_create_write_struct(PNG_LIBPNG_VER_STRING, &ctx_, on_error, on_warning);
        if (png_) info_ = png_create_info_struct(png_);
        if (!png_ || !info_) throw IoError("libpng: out of memory");
    }
    ~Writer() { png_destroy_write_struct(&png_, &info_); }
    Writer(const Writer&) = delete;
    Writer& operator=(const Writer&) = delete;

    bool write(std::FILE* f, const Header& h, const unsigned char* buffer, std::size_t row_bytes) {
        if (setjmp(ctx_.jump)) return false;
        png_init_io(png_, f);
        png_set_compression_level(png_, 1);
        png_set_IHDR(png_, info_, static_cast<png_uint_32>(h.width), static_cast<png_uint_32>(h.height),
                     static_cast<int>(h.bit_depth), h.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png_, info_);
        if (h.bit_depth == 16) png_set_swap(png_);
        for (std::size_t y = 0; y < h.height; ++y) {
            png_write_row(png_, const_cast<unsigned char*>(buffer + y * row_bytes));
        }
        png_write_end(png_, nullptr);
        return true;
    }

    const char* message() const noexcept { return ctx_.message; }

private:
    ErrorContext ctx_;
    png_structp png_ = nullptr;
    png_infop info_ = nullptr;
};

inline void check_header(const Header& h, const std::filesystem::path& p) {
    if (h.bit_depth != 8 && h.bit_depth != 16) {
        throw IoError(p.string() + ": unsupported bit depth " + std::to_string(h.bit_depth));
    }
    if (h.channels != 1 && h.channels != 3) {
        throw IoError(p.string() + ": unsupported channel count " + std::to_string(h.channels));
    }
}

}  // namespace detail

[[nodiscard]] inline Header read_header(const std::filesystem::path& p) {
    detail::File f(p, "rb");
    detail::Reader r;
    Header h;
    if (!r.read_header(f.get(), h)) throw IoError(p.string() + ": corrupt PNG (" + r.message() + ")");
    detail::check_header(h, p);
    return h;
}

[[nodiscard]] inline Pixels read(const std::filesystem::path& p) {
    detail::File f(p, "rb");
    detail::Reader r;
    Pixels px;
    if (!r.read_header(f.get(), px.header)) throw IoError(p.string() + ": corrupt PNG (" + r.message() + ")");
    detail::check_header(px.header, p);
    const Header& h = px.header;
    const std::size_t bytes_per_sample = h.bit_depth / 8;
    const std::size_t row_bytes = h.width * h.channels * bytes_per_sample;
    std::vector<unsigned char> raw(row_bytes * h.height);
    if (!r.read_rows(raw.data(), row_bytes, h.height)) {
        throw IoError(p.string() + ": corrupt PNG (" + r.message() + ")");
    }
    px.samples.resize(h.width * h.height * h.channels);
    if (bytes_per_sample == 1) {
        for (std::size_t i = 0; i < px.samples.size(); ++i) px.samples[i] = raw[i];
    } else {
        std::memcpy(px.samples.data(), raw.data(), raw.size());
    }
    return px;
}

/// Writes interleaved samples (values must fit the bit depth).
inline void write(const std::filesystem::path& p, const Header& h, const std::vector<std::uint16_t>& samples) {
    if (samples.size() != h.width * h.height * h.channels) throw ArgumentError("png::write: sample count mismatch");
    const std::size_t bytes_per_sample = h.bit_depth / 8;
    const std::size_t row_bytes = h.width * h.channels * bytes_per_sample;
    std::vector<unsigned char> raw(row_bytes * h.height);
    if (bytes_per_sample == 1) {
        for (std::size_t i = 0; i < samples.size(); ++i) raw[i] = static_cast<unsigned char>(samples[i]);
    } else {
        std::memcpy(raw.data(), samples.data(), raw.size());
    }
    detail::File f(p, "wb");
    detail::Writer w;
    if (!w.write(f.get(), h, raw.data(), row_bytes)) throw IoError(p.string() + ": PNG encode failed (" + w.message() + ")");
    if (f.close() != 0) throw IoError(p.string() + ": write failed");
}

}  // namespace zfuse::png
