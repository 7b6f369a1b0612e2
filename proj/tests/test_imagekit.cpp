#include <cmath>
#include <complex>

#include <doctest.h>

#include "kpl/color.hpp"
#include "kpl/convolve.hpp"
#include "kpl/dft.hpp"
#include "kpl/features.hpp"
#include "kpl/pnm.hpp"
#include "kpl/rng.hpp"
#include "test_support.hpp"

using namespace kpl;

TEST_SUITE("imagekit") {

// Reference values computed with an independent implementation of the
// standard formulas (IEC 61966-2-1 linearization, Rec.709 primaries, D65
// white, CIE 1976 L*u*v*).
TEST_CASE("colorimetry matches reference values") {
    struct Ref {
        std::uint8_t r, g, b;
        double L, u, v;
    };
    const Ref refs[] = {
        {128, 128, 128, 53.5850157717, 0.0, 0.0},  // gray sits on the white point
        {255, 0, 0, 53.2407941413, 175.0150299469, 37.7564290204},
        {0, 255, 0, 87.7347223528, -83.0775622442, 107.3985412400},
        {0, 0, 255, 32.2970109329, -9.4054017308, -130.3423472795},
        {255, 255, 255, 100.0000038667, 0.0, 0.0},
        {0, 0, 0, 0.0, 0.0, 0.0},
        {200, 100, 50, 53.6295396385, 80.0903374825, 39.8898517239},
    };
    for (const auto& r : refs) {
        const auto luv = img::srgb_to_luv(r.r, r.g, r.b);
        CHECK(luv[0] == doctest::Approx(r.L).epsilon(1e-9).scale(1.0));
        CHECK(std::abs(luv[1] - r.u) < 1e-4);
        CHECK(std::abs(luv[2] - r.v) < 1e-4);
    }
}

TEST_CASE("gradient channels are central differences of L with replicate borders") {
    // A channel-equal ramp: the L channel is monotone in x, flat in y.
    img::RgbImage ramp(9, 7);
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 9; ++x)
            for (int c = 0; c < 3; ++c) ramp.px(x, y)[c] = static_cast<std::uint8_t>(40 + 20 * x);

    const img::FeatureStack fs = img::compute_feature_stack(ramp);
    const auto& L = fs.chan(img::kChanL);
    for (int y = 0; y < 7; ++y) {
        for (int x = 0; x < 9; ++x) {
            const int xm = x > 0 ? x - 1 : 0, xp = x < 8 ? x + 1 : 8;
            const double want_gx = 0.5 * (L.at(xp, y) - L.at(xm, y));
            CHECK(fs.chan(img::kChanGx).at(x, y) == doctest::Approx(want_gx).epsilon(1e-12));
            CHECK(fs.chan(img::kChanGy).at(x, y) == doctest::Approx(0.0).scale(1.0));
            CHECK(fs.chan(img::kChanGmag).at(x, y) ==
                  doctest::Approx(std::abs(want_gx)).epsilon(1e-12));
        }
    }
}

TEST_CASE("standardized stack equals manual normalization") {
    Rng rng(11);
    const img::RgbImage rgb = testkit::random_rgb(rng, 12, 10);
    img::StackNorm norm;
    for (int c = 0; c < img::kFeatureChannels; ++c) norm[static_cast<std::size_t>(c)] = {0.5 * c, 1.5 + c};

    img::FeatureStack manual = img::compute_feature_stack(rgb);
    img::apply_norm(manual, norm);
    const img::FeatureStack direct = img::compute_feature_stack(rgb, norm);
    for (int c = 0; c < img::kFeatureChannels; ++c)
        for (std::size_t i = 0; i < manual.chan(c).data.size(); ++i)
            CHECK(manual.chan(c).data[i] == direct.chan(c).data[i]);

    img::StackNorm bad = norm;
    bad[0].scale = 0.0;
    img::FeatureStack fs = img::compute_feature_stack(rgb);
    CHECK_THROWS_AS(img::apply_norm(fs, bad), ContractError);
}

TEST_CASE("circular convolution matches the frequency-domain product") {
    Rng rng(21);
    img::ChannelImage ch(8, 8);
    for (auto& v : ch.data) v = rng.uniform(-1.0, 1.0);
    img::Filter2d f(3);
    for (auto& t : f.taps) t = rng.uniform(-1.0, 1.0);

    // Corner-origin embedding of the centered filter.
    const int r = f.size / 2;
    img::ChannelImage k(8, 8, 0.0);
    for (int b = -r; b <= r; ++b)
        for (int a = -r; a <= r; ++a)
            k.at(((a % 8) + 8) % 8, ((b % 8) + 8) % 8) = f.at(r + a, r + b);

    const img::Spectrum fch = img::dft2(ch);
    const img::Spectrum fk = img::dft2(k);
    img::Spectrum prod(8, 8);
    for (std::size_t i = 0; i < prod.data.size(); ++i) prod.data[i] = fch.data[i] * fk.data[i];
    const img::ChannelImage via_dft = img::idft2_real(prod);

    const img::ChannelImage direct = img::convolve2d(ch, f, img::ConvMode::kCircular);
    for (std::size_t i = 0; i < direct.data.size(); ++i)
        CHECK(direct.data[i] == doctest::Approx(via_dft.data[i]).epsilon(1e-9).scale(1.0));
}

TEST_CASE("separable convolution equals the dense outer-product filter") {
    Rng rng(31);
    img::ChannelImage ch(11, 9);
    for (auto& v : ch.data) v = rng.uniform(-2.0, 2.0);
    std::vector<double> row(5), col(5);
    for (auto& v : row) v = rng.uniform(-1.0, 1.0);
    for (auto& v : col) v = rng.uniform(-1.0, 1.0);
    img::Filter2d outer(5);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x)
            outer.at(x, y) = col[static_cast<std::size_t>(y)] * row[static_cast<std::size_t>(x)];

    for (const auto mode : {img::ConvMode::kValid, img::ConvMode::kSameReplicate, img::ConvMode::kCircular}) {
        const img::ChannelImage two_pass = img::convolve_separable(ch, row, col, mode);
        const img::ChannelImage dense = img::convolve2d(ch, outer, mode);
        REQUIRE(two_pass.width == dense.width);
        REQUIRE(two_pass.height == dense.height);
        for (std::size_t i = 0; i < dense.data.size(); ++i)
            CHECK(two_pass.data[i] == doctest::Approx(dense.data[i]).epsilon(1e-12).scale(1.0));
    }
}

TEST_CASE("convolution is linear") {
    Rng rng(41);
    img::ChannelImage a(7, 7), b(7, 7);
    for (auto& v : a.data) v = rng.uniform(-1.0, 1.0);
    for (auto& v : b.data) v = rng.uniform(-1.0, 1.0);
    img::Filter2d f(3);
    for (auto& t : f.taps) t = rng.uniform(-1.0, 1.0);

    img::ChannelImage mix(7, 7);
    for (std::size_t i = 0; i < mix.data.size(); ++i) mix.data[i] = 2.5 * a.data[i] + b.data[i];

    const auto ca = img::convolve2d(a, f, img::ConvMode::kSameReplicate);
    const auto cb = img::convolve2d(b, f, img::ConvMode::kSameReplicate);
    const auto cm = img::convolve2d(mix, f, img::ConvMode::kSameReplicate);
    for (std::size_t i = 0; i < cm.data.size(); ++i)
        CHECK(cm.data[i] == doctest::Approx(2.5 * ca.data[i] + cb.data[i]).epsilon(1e-12).scale(1.0));
}

TEST_CASE("correlation is convolution with the flipped filter") {
    Rng rng(51);
    img::ChannelImage ch(10, 8);
    for (auto& v : ch.data) v = rng.uniform(-1.0, 1.0);
    img::Filter2d f(5);
    for (auto& t : f.taps) t = rng.uniform(-1.0, 1.0);

    const auto corr = img::correlate_same_replicate(ch, f);
    const auto conv = img::convolve2d(ch, img::flip(f), img::ConvMode::kSameReplicate);
    for (std::size_t i = 0; i < corr.data.size(); ++i)
        CHECK(corr.data[i] == doctest::Approx(conv.data[i]).epsilon(1e-12).scale(1.0));
}

TEST_CASE("ppm round trip and malformed input") {
    Rng rng(61);
    const img::RgbImage src = testkit::random_rgb(rng, 13, 7);
    const auto bytes = img::encode_ppm(src);
    const img::RgbImage back = img::decode_image(bytes);
    REQUIRE(back.width == src.width);
    REQUIRE(back.height == src.height);
    CHECK(back.data == src.data);

    auto truncated = bytes;
    truncated.resize(truncated.size() - 5);
    CHECK_THROWS_AS(img::decode_image(truncated), DataError);

    const std::uint8_t garbage[] = {'P', '9', '\n', '1', ' ', '1', '\n'};
    CHECK_THROWS_AS(img::decode_image(std::span<const std::uint8_t>(garbage, sizeof garbage)),
                    DataError);
}

TEST_CASE("graymap decodes to replicated channels") {
    // P5 2x1, maxval 255, pixels 10 and 200.
    const std::uint8_t p5[] = {'P', '5', '\n', '2', ' ', '1', '\n', '2', '5', '5', '\n', 10, 200};
    const img::RgbImage back = img::decode_image(std::span<const std::uint8_t>(p5, sizeof p5));
    REQUIRE(back.width == 2);
    REQUIRE(back.height == 1);
    for (int c = 0; c < 3; ++c) {
        CHECK(back.px(0, 0)[c] == 10);
        CHECK(back.px(1, 0)[c] == 200);
    }
}

}  // TEST_SUITE
