#include "kpl/pnm.hpp"

#include <cstdio>
#include <fstream>

namespace kpl::img {

namespace {

struct Cursor {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;

    [[noreturn]] void fail(const std::string& what) const {
        throw DataError("pnm decode error at offset " + std::to_string(pos) + ": " + what);
    }

    bool eof() const { return pos >= bytes.size(); }
    std::uint8_t peek() const { return bytes[pos]; }

    // Skips whitespace and '#' comments (comments run to end of line).
    void skip_space() {
        while (!eof()) {
            const std::uint8_t c = peek();
            if (c == '#') {
                while (!eof() && peek() != '\n') ++pos;
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f') {
                ++pos;
            } else {
                break;
            }
        }
    }

    int read_int() {
        skip_space();
        if (eof() || peek() < '0' || peek() > '9') fail("expected integer");
        long v = 0;
        while (!eof() && peek() >= '0' && peek() <= '9') {
            v = v * 10 + (peek() - '0');
            if (v > 1000000000L) fail("integer out of range");
            ++pos;
        }
        return static_cast<int>(v);
    }
};

}  // namespace

RgbImage decode_image(std::span<const std::uint8_t> bytes) {
    Cursor cur{bytes};
    if (bytes.size() < 2) cur.fail("short header");
    if (bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) cur.fail("unsupported magic");
    const bool gray = bytes[1] == '5';
    cur.pos = 2;

    const int w = cur.read_int();
    const int h = cur.read_int();
    const int maxval = cur.read_int();
    if (w <= 0 || h <= 0) cur.fail("non-positive dimensions");
    if (maxval != 255) cur.fail("unsupported maxval " + std::to_string(maxval));

    // Exactly one whitespace byte separates the header from the raster.
    if (cur.eof()) cur.fail("missing raster");
    const std::uint8_t sep = cur.peek();
    if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n') cur.fail("bad raster separator");
    ++cur.pos;

    const std::size_t need =
        static_cast<std::size_t>(w) * h * (gray ? 1 : 3);
    if (bytes.size() - cur.pos < need) {
        cur.pos = bytes.size();
        cur.fail("truncated raster, need " + std::to_string(need) + " bytes");
    }

    RgbImage img(w, h);
    const std::uint8_t* src = bytes.data() + cur.pos;
    if (gray) {
        for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
            img.data[3 * i + 0] = src[i];
            img.data[3 * i + 1] = src[i];
            img.data[3 * i + 2] = src[i];
        }
    } else {
        std::copy(src, src + need, img.data.begin());
    }
    return img;
}

std::vector<std::uint8_t> encode_ppm(const RgbImage& img) {
    char header[64];
    const int n = std::snprintf(header, sizeof(header), "P6\n%d %d\n255\n", img.width, img.height);
    std::vector<std::uint8_t> out;
    out.reserve(static_cast<std::size_t>(n) + img.data.size());
    out.insert(out.end(), header, header + n);
    out.insert(out.end(), img.data.begin(), img.data.end());
    return out;
}

RgbImage load_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    try {
        return decode_image(bytes);
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

void save_ppm(const std::string& path, const RgbImage& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write image: " + path);
    const auto bytes = encode_ppm(img);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("short write: " + path);
}

}  // namespace kpl::img
