#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "forge/core.hpp"
#include "forge/digest.hpp"
#include "forge/rng.hpp"

using namespace forge;

namespace {

BoundingBox random_box(Rng& rng, double extent) {
    const double x0 = rng.uniform() * extent * 0.8;
    const double y0 = rng.uniform() * extent * 0.8;
    const double w = 1.0 + rng.uniform() * (extent - x0 - 1.0);
    const double h = 1.0 + rng.uniform() * (extent - y0 - 1.0);
    return {x0, y0, x0 + w, y0 + h};
}

}  // namespace

TEST_CASE("iou identity and disjoint cases") {
    const BoundingBox a{0, 0, 10, 10};
    CHECK(iou(a, a) == 1.0);
    CHECK(iou({0, 0, 1, 1}, {5, 5, 6, 6}) == 0.0);
}

TEST_CASE("iou partial overlap") {
    // intersection 5x5 = 25, union 100 + 100 - 25 = 175
    CHECK(iou({0, 0, 10, 10}, {5, 5, 15, 15}) ==
          doctest::Approx(25.0 / 175.0).epsilon(1e-12));
}

TEST_CASE("iou rejects invalid boxes") {
    CHECK_THROWS_AS(iou({10, 0, 0, 10}, {0, 0, 1, 1}), Error);
    CHECK_THROWS_AS(iou({0, 0, 1, 1}, {-1, 0, 1, 1}), Error);
}

TEST_CASE("iou is symmetric and 1 on itself") {
    Rng rng(7);
    for (int i = 0; i < 300; ++i) {
        const BoundingBox a = random_box(rng, 500);
        const BoundingBox b = random_box(rng, 500);
        CHECK(iou(a, b) == iou(b, a));
        CHECK(iou(a, a) == 1.0);
    }
}

TEST_CASE("normalize_box full frame and exact rationals") {
    CHECK(normalize_box({0, 0, 640, 480}, 640, 480) ==
          NormBox{0, 0, 1000, 1000});
    CHECK(normalize_box({0, 0, 1920, 1080}, 1920, 1080) ==
          NormBox{0, 0, 1000, 1000});
    CHECK(normalize_box({320, 180, 640, 360}, 1280, 720) ==
          NormBox{250, 250, 500, 500});
}

TEST_CASE("normalize_box flags sub-pixel boxes as degenerate") {
    const NormBox nb = normalize_box({0, 0, 0.4, 0.4}, 1000, 1000);
    CHECK(nb == NormBox{0, 0, 0, 0});
    CHECK(nb.degenerate());
}

TEST_CASE("normalize_box rounds half away from zero") {
    // 1/2000 of the width lands exactly on half a cell
    CHECK(normalize_box({1, 0, 2000, 1000}, 2000, 1000).xmin == 1);
}

TEST_CASE("normalize_box clamps boxes crossing the border") {
    const NormBox nb = normalize_box({-0.5, -0.5, 100, 100}, 100, 100);
    CHECK(nb == NormBox{0, 0, 1000, 1000});
}

TEST_CASE("normalize_box rejects boxes outside the image") {
    CHECK_THROWS_AS(normalize_box({700, 0, 800, 100}, 640, 480), Error);
    CHECK_THROWS_AS(normalize_box({0, 0, 100, 100}, 0, 480), Error);
}

TEST_CASE("denormalize_box inverts the affine map") {
    const BoundingBox full = denormalize_box({0, 0, 1000, 1000}, 640, 480);
    CHECK(full == BoundingBox{0, 0, 640, 480});
    const BoundingBox b = denormalize_box({250, 250, 500, 500}, 1280, 720);
    CHECK(b == BoundingBox{320, 180, 640, 360});
}

TEST_CASE("denormalize_box accepts degenerate boxes") {
    const BoundingBox b = denormalize_box({500, 500, 500, 500}, 640, 480);
    CHECK(b.degenerate());
    CHECK(b.xmin == b.xmax);
}

TEST_CASE("normalize output is monotone in input coordinates") {
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        const int w = 100 + static_cast<int>(rng.bounded(1900));
        const int h = 100 + static_cast<int>(rng.bounded(1000));
        BoundingBox a = random_box(rng, std::min(w, h));
        BoundingBox b = a;
        b.xmax = std::min(b.xmax + rng.uniform() * 10, static_cast<double>(w));
        const NormBox na = normalize_box(a, w, h);
        const NormBox nb = normalize_box(b, w, h);
        CHECK(nb.xmax >= na.xmax);
    }
}

TEST_CASE("round trip error stays under half a normalization cell") {
    Rng rng(13);
    for (int i = 0; i < 300; ++i) {
        const int w = 100 + static_cast<int>(rng.bounded(3000));
        const int h = 100 + static_cast<int>(rng.bounded(2000));
        const BoundingBox b = random_box(rng, std::min(w, h));
        const NormBox nb = normalize_box(b, w, h);
        const BoundingBox back = denormalize_box(nb, w, h);
        const double tol_x = w / 2000.0 + 1e-9;
        const double tol_y = h / 2000.0 + 1e-9;
        CHECK(std::abs(back.xmin - b.xmin) <= tol_x);
        CHECK(std::abs(back.xmax - b.xmax) <= tol_x);
        CHECK(std::abs(back.ymin - b.ymin) <= tol_y);
        CHECK(std::abs(back.ymax - b.ymax) <= tol_y);

        // normalize . denormalize is the identity on the grid
        CHECK(normalize_box(back, w, h) == nb);
    }
}

TEST_CASE("sha256 known vectors") {
    CHECK(Sha256::of("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(Sha256::of("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    // multi-block input
    const std::string long_input(200, 'x');
    Sha256 incremental;
    incremental.update(long_input.substr(0, 77));
    incremental.update(long_input.substr(77));
    CHECK(incremental.hex_digest() == Sha256::of(long_input));
}
