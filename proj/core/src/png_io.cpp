#include "dualline/png_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace dualline {

namespace {

std::uint32_t crc32_table_entry(std::uint32_t n) {
    for (int k = 0; k < 8; ++k) {
        n = (n & 1) ? 0xEDB88320u ^ (n >> 1) : n >> 1;
    }
    return n;
}

const std::array<std::uint32_t, 256>& crc_table() {
    static const std::array<std::uint32_t, 256> table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t n = 0; n < 256; ++n) t[n] = crc32_table_entry(n);
        return t;
    }();
    return table;
}

std::uint32_t crc32(std::span<const std::uint8_t> data) {
    std::uint32_t c = 0xFFFFFFFFu;
    for (std::uint8_t byte : data) {
        c = crc_table()[(c ^ byte) & 0xFF] ^ (c >> 8);
    }
    return c ^ 0xFFFFFFFFu;
}

std::uint32_t adler32(std::span<const std::uint8_t> data) {
    std::uint32_t a = 1, b = 0;
    for (std::uint8_t byte : data) {
        a = (a + byte) % 65521u;
        b = (b + a) % 65521u;
    }
    return (b << 16) | a;
}

void push_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void push_chunk(std::vector<std::uint8_t>& out, const char type[4],
                std::span<const std::uint8_t> payload) {
    push_u32(out, static_cast<std::uint32_t>(payload.size()));
    std::vector<std::uint8_t> body;
    body.reserve(payload.size() + 4);
    body.insert(body.end(), type, type + 4);
    body.insert(body.end(), payload.begin(), payload.end());
    out.insert(out.end(), body.begin(), body.end());
    push_u32(out, crc32(body));
}

// zlib stream holding only stored (uncompressed) deflate blocks.
std::vector<std::uint8_t> zlib_stored(std::span<const std::uint8_t> raw) {
    std::vector<std::uint8_t> out;
    out.push_back(0x78);
    out.push_back(0x01);
    std::size_t off = 0;
    do {
        const std::size_t len = std::min<std::size_t>(raw.size() - off, 65535);
        const bool final = off + len == raw.size();
        out.push_back(final ? 0x01 : 0x00);
        out.push_back(static_cast<std::uint8_t>(len & 0xFF));
        out.push_back(static_cast<std::uint8_t>(len >> 8));
        out.push_back(static_cast<std::uint8_t>(~len & 0xFF));
        out.push_back(static_cast<std::uint8_t>((~len >> 8) & 0xFF));
        out.insert(out.end(), raw.begin() + static_cast<std::ptrdiff_t>(off),
                   raw.begin() + static_cast<std::ptrdiff_t>(off + len));
        off += len;
    } while (off < raw.size());
    push_u32(out, adler32(raw));
    return out;
}

void write_png(const std::string& path, std::size_t width, std::size_t height,
               std::size_t channels, std::span<const std::uint8_t> pixels) {
    if (width == 0 || height == 0) {
        throw std::invalid_argument("png: empty image");
    }
    if (pixels.size() != width * height * channels) {
        throw std::invalid_argument("png: pixel buffer size mismatch");
    }

    std::vector<std::uint8_t> raw;
    raw.reserve(height * (1 + width * channels));
    for (std::size_t r = 0; r < height; ++r) {
        raw.push_back(0);  // filter: none
        const std::uint8_t* row = pixels.data() + r * width * channels;
        raw.insert(raw.end(), row, row + width * channels);
    }

    std::vector<std::uint8_t> out;
    const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
    out.insert(out.end(), sig, sig + 8);

    std::vector<std::uint8_t> ihdr;
    push_u32(ihdr, static_cast<std::uint32_t>(width));
    push_u32(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(8);                                    // bit depth
    ihdr.push_back(channels == 1 ? 0 : 2);                // gray / truecolor
    ihdr.push_back(0);                                    // compression
    ihdr.push_back(0);                                    // filter
    ihdr.push_back(0);                                    // no interlace
    push_chunk(out, "IHDR", ihdr);

    const std::vector<std::uint8_t> idat = zlib_stored(raw);
    push_chunk(out, "IDAT", idat);
    push_chunk(out, "IEND", {});

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("png: cannot write '" + path + "'");
    f.write(reinterpret_cast<const char*>(out.data()),
            static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("png: short write to '" + path + "'");
}

}  // namespace

void write_png_gray8(const std::string& path, std::size_t width, std::size_t height,
                     std::span<const std::uint8_t> pixels) {
    write_png(path, width, height, 1, pixels);
}

void write_png_rgb8(const std::string& path, std::size_t width, std::size_t height,
                    std::span<const std::uint8_t> pixels) {
    write_png(path, width, height, 3, pixels);
}

PngImage read_png8(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("png: cannot open '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());

    const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
    if (bytes.size() < 8 || !std::equal(sig, sig + 8, bytes.begin())) {
        throw std::runtime_error("png: bad signature in '" + path + "'");
    }

    auto read_u32 = [&](std::size_t off) -> std::uint32_t {
        return (static_cast<std::uint32_t>(bytes[off]) << 24) |
               (static_cast<std::uint32_t>(bytes[off + 1]) << 16) |
               (static_cast<std::uint32_t>(bytes[off + 2]) << 8) |
               static_cast<std::uint32_t>(bytes[off + 3]);
    };

    PngImage img;
    std::vector<std::uint8_t> compressed;
    std::size_t off = 8;
    while (off + 8 <= bytes.size()) {
        const std::uint32_t len = read_u32(off);
        const std::string type(bytes.begin() + static_cast<std::ptrdiff_t>(off + 4),
                               bytes.begin() + static_cast<std::ptrdiff_t>(off + 8));
        const std::size_t payload = off + 8;
        if (payload + len + 4 > bytes.size()) {
            throw std::runtime_error("png: truncated chunk in '" + path + "'");
        }
        if (type == "IHDR") {
            img.width = read_u32(payload);
            img.height = read_u32(payload + 4);
            const std::uint8_t depth = bytes[payload + 8];
            const std::uint8_t color = bytes[payload + 9];
            if (depth != 8 || (color != 0 && color != 2)) {
                throw std::runtime_error("png: unsupported format in '" + path + "'");
            }
            img.channels = color == 0 ? 1 : 3;
        } else if (type == "IDAT") {
            compressed.insert(compressed.end(),
                              bytes.begin() + static_cast<std::ptrdiff_t>(payload),
                              bytes.begin() + static_cast<std::ptrdiff_t>(payload + len));
        } else if (type == "IEND") {
            break;
        }
        off = payload + len + 4;
    }
    if (img.width == 0 || compressed.size() < 2) {
        throw std::runtime_error("png: missing chunks in '" + path + "'");
    }

    // Inflate: stored blocks only (what the writer emits).
    std::vector<std::uint8_t> raw;
    std::size_t pos = 2;  // skip the zlib header
    while (true) {
        if (pos >= compressed.size()) throw std::runtime_error("png: truncated deflate");
        const std::uint8_t header = compressed[pos++];
        if ((header & 0x06) != 0) {
            throw std::runtime_error("png: reader only supports stored blocks");
        }
        if (pos + 4 > compressed.size()) throw std::runtime_error("png: truncated block");
        const std::size_t len = compressed[pos] | (compressed[pos + 1] << 8);
        pos += 4;  // LEN + NLEN
        if (pos + len > compressed.size()) throw std::runtime_error("png: truncated data");
        raw.insert(raw.end(), compressed.begin() + static_cast<std::ptrdiff_t>(pos),
                   compressed.begin() + static_cast<std::ptrdiff_t>(pos + len));
        pos += len;
        if (header & 0x01) break;
    }

    const std::size_t stride = img.width * img.channels;
    if (raw.size() != img.height * (stride + 1)) {
        throw std::runtime_error("png: scanline size mismatch in '" + path + "'");
    }
    img.pixels.reserve(img.height * stride);
    for (std::size_t r = 0; r < img.height; ++r) {
        if (raw[r * (stride + 1)] != 0) {
            throw std::runtime_error("png: reader only supports filter 0");
        }
        const std::uint8_t* row = raw.data() + r * (stride + 1) + 1;
        img.pixels.insert(img.pixels.end(), row, row + stride);
    }
    return img;
}

std::uint8_t affine_byte(double v, double vmax) {
    const double unit = vmax == 0.0 ? 0.0 : v / vmax;
    const double mapped = std::floor(127.5 * unit + 127.5 + 0.5);
    if (mapped <= 0.0) return 0;
    if (mapped >= 255.0) return 255;
    return static_cast<std::uint8_t>(mapped);
}

}  // namespace dualline
