#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gsrec/metrics.hpp"
#include "gsrec/rng.hpp"
#include "support/oracles.hpp"

using namespace gsrec;

TEST_CASE("identical images report the 99 dB cap") {
    Image a(16, 16, 3, 0.37);
    CHECK(psnr(a, a) == 99.0);
}

TEST_CASE("all-zeros versus all-ones is exactly 0 dB") {
    Image a(16, 16, 3, 0.0);
    Image b(16, 16, 3, 1.0);
    CHECK(std::abs(psnr(a, b) - 0.0) < 1e-9);
}

TEST_CASE("a uniform difference of 0.1 is exactly 20 dB") {
    Image a(16, 16, 3, 0.45);
    Image b(16, 16, 3, 0.55);
    CHECK(std::abs(psnr(a, b) - 20.0) < 1e-9);
}

TEST_CASE("psnr rejects shape mismatches") {
    Image a(16, 16, 3), b(16, 17, 3);
    CHECK_THROWS_AS(psnr(a, b), std::invalid_argument);
}

TEST_CASE("ssim of identical images is one") {
    Rng rng(2);
    Image a(24, 24, 3);
    for (double& v : a.raw()) v = rng.uniform();
    CHECK(std::abs(ssim(a, a) - 1.0) < 1e-12);
}

TEST_CASE("ssim of an image against its negative is low") {
    Rng rng(3);
    Image a(24, 24, 1);
    // A pattern clear of mid-gray so the negative is structurally opposite.
    for (double& v : a.raw()) v = rng.uniform() < 0.5 ? rng.uniform(0.0, 0.25)
                                                      : rng.uniform(0.75, 1.0);
    Image b = a;
    for (double& v : b.raw()) v = 1.0 - v;
    CHECK(ssim(a, b) < 0.2);
}

TEST_CASE("constant images reproduce the closed-form luminance term") {
    const double x = 0.25, y = 0.75;
    Image a(20, 20, 1, x);
    Image b(20, 20, 1, y);
    const double c1 = 0.01 * 0.01;
    const double expected = (2.0 * x * y + c1) / (x * x + y * y + c1);
    CHECK(std::abs(ssim(a, b) - expected) < 1e-9);
}

TEST_CASE("ssim matches the independent direct implementation on random images") {
    Rng rng(5);
    Image a(20, 20, 3), b(20, 20, 3);
    for (double& v : a.raw()) v = rng.uniform();
    for (double& v : b.raw()) v = rng.uniform();
    CHECK(std::abs(ssim(a, b) - oracles::ssim_reference(a, b, 11, 1.5)) < 1e-12);
}

TEST_CASE("masked psnr ignores pixels outside the mask") {
    Image a(8, 8, 3, 0.5);
    Image b = a;
    b.at(0, 0, 0) = 1.0;
    Image mask(8, 8, 1, 1.0);
    mask.at(0, 0) = 0.0;
    CHECK(psnr_masked(a, b, mask) == 99.0);
    mask.at(0, 0) = 1.0;
    CHECK(psnr_masked(a, b, mask) < 99.0);
}

TEST_CASE("box downsampling averages blocks exactly") {
    Image a(4, 4, 1);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) a.at(x, y) = y * 4 + x;
    const Image d = downsample_box(a, 2);
    CHECK(d.width() == 2);
    CHECK(d.at(0, 0) == doctest::Approx((0 + 1 + 4 + 5) / 4.0));
    CHECK(d.at(1, 1) == doctest::Approx((10 + 11 + 14 + 15) / 4.0));
}

TEST_CASE("laplacian variance rises with high-frequency content") {
    Image smooth(32, 32, 1);
    Image sharp(32, 32, 1);
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
            smooth.at(x, y) = 0.5 + 0.3 * std::sin(0.2 * x);
            sharp.at(x, y) = (x + y) % 2 ? 1.0 : 0.0;
        }
    }
    CHECK(laplacian_variance(sharp) > 10.0 * laplacian_variance(smooth));
}
