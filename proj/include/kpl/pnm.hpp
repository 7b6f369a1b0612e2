#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kpl/image.hpp"

namespace kpl::img {

// Decodes binary portable pixmaps (P6) and graymaps (P5, replicated to RGB).
// Maxval must be 255. Malformed input raises DataError naming the byte offset.
RgbImage decode_image(std::span<const std::uint8_t> bytes);

// Canonical P6 encoding: "P6\n<w> <h>\n255\n" followed by raw triples.
std::vector<std::uint8_t> encode_ppm(const RgbImage& img);

RgbImage load_image(const std::string& path);
void save_ppm(const std::string& path, const RgbImage& img);

}  // namespace kpl::img
