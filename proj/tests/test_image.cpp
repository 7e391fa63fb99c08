#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "lgeseg/affine.hpp"
#include "lgeseg/ffd.hpp"
#include "lgeseg/image.hpp"
#include "lgeseg/pgm_io.hpp"
#include "oracles.hpp"

using namespace lgeseg;

namespace {

Image2D ramp_x(int w, int h, double slope, double offset = 0.0) {
    Image2D img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img.at(x, y) = offset + slope * x;
    return img;
}

std::filesystem::path temp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "lgeseg_image_tests";
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("Image2D invariants") {
    CHECK_THROWS(Image2D(0, 4));
    CHECK_THROWS(Image2D(4, 4, 0.0, -1.0, 1.0));
    Image2D img(4, 4, 1.0);
    img.data[3] = std::nan("");
    CHECK_THROWS(img.validate());
    img.data[3] = 1.0;
    CHECK_NOTHROW(img.validate());
}

TEST_CASE("histogram counts sum to pixel count") {
    std::mt19937 rng(7);
    const Image2D img = oracles::random_image(31, 17, rng);
    const IntensityHistogram h = compute_histogram(img, 64);
    CHECK_NOTHROW(h.validate(img.pixel_count()));
}

TEST_CASE("bilinear_sample basics") {
    const Image2D c(8, 8, 5.0);
    CHECK(bilinear_sample(c, 3.7, 2.1) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(bilinear_sample(c, -4.0, 100.0) == doctest::Approx(5.0).epsilon(1e-15));

    std::mt19937 rng(11);
    const Image2D r = oracles::random_image(9, 7, rng);
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 9; ++x) CHECK(bilinear_sample(r, x, y) == r.at(x, y));

    Image2D q(2, 2);
    q.at(0, 0) = 0.0;
    q.at(1, 0) = 1.0;
    q.at(0, 1) = 2.0;
    q.at(1, 1) = 3.0;
    // hand evaluation of the bilinear formula at the cell center
    CHECK(bilinear_sample(q, 0.5, 0.5) == doctest::Approx(1.5).epsilon(1e-15));

    // clamp policy: outside coordinates reproduce the nearest border pixel
    CHECK(bilinear_sample(q, -3.0, 0.0) == 0.0);
    CHECK(bilinear_sample(q, 5.0, 5.0) == 3.0);
}

TEST_CASE("resample identity and scaling") {
    std::mt19937 rng(3);
    Image2D img = oracles::random_image(16, 12, rng);
    img.spacing_x = 1.5;
    img.spacing_y = 2.0;

    const Image2D same = resample(img, 1.5, 2.0);
    REQUIRE(same.width == img.width);
    REQUIRE(same.height == img.height);
    CHECK(same.data == img.data);

    const Image2D c = resample(Image2D(10, 10, 7.0), 0.5, 0.5);
    CHECK(c.width == 20);
    CHECK(c.height == 20);
    for (double v : c.data) CHECK(v == 7.0);

    // downsampling a ramp doubles the per-pixel slope; values agree with the
    // analytic ramp at the output sample positions
    const Image2D ramp = ramp_x(32, 8, 2.0);
    const Image2D down = resample(ramp, 2.0, 2.0);
    REQUIRE(down.width == 16);
    for (int x = 0; x < down.width; ++x) {
        CHECK(down.at(x, 3) == doctest::Approx(2.0 * (2.0 * x)).epsilon(1e-13));
    }

    CHECK_THROWS(resample(ramp, 0.0, 1.0));
}

TEST_CASE("resample round-trip on a planar image is exact at shared nodes") {
    Image2D plane(17, 13);
    for (int y = 0; y < plane.height; ++y)
        for (int x = 0; x < plane.width; ++x) plane.at(x, y) = 3.0 + 0.5 * x - 0.25 * y;
    const Image2D down = resample(plane, 2.0, 2.0);
    const Image2D up = resample(down, 1.0, 1.0);
    for (int y = 0; y + 1 < up.height && y < plane.height; y += 2) {
        for (int x = 0; x + 1 < up.width && x < plane.width; x += 2) {
            CHECK(up.at(x, y) == doctest::Approx(plane.at(x, y)).epsilon(1e-13));
        }
    }
}

TEST_CASE("histogram_specify self and shifted uniform") {
    const int bins = 256;
    Image2D src(64, 64);
    for (size_t k = 0; k < src.data.size(); ++k)
        src.data[k] = 100.0 * static_cast<double>(k) / (src.data.size() - 1);
    const double bin_w = 100.0 / bins;

    const Image2D self = histogram_specify(src, src, bins);
    REQUIRE(self.width == src.width);
    for (size_t k = 0; k < src.data.size(); ++k) {
        CHECK(std::abs(self.data[k] - src.data[k]) <= bin_w + 1e-12);
    }

    Image2D ref = src;
    for (double& v : ref.data) v += 100.0;
    const Image2D out = histogram_specify(src, ref, bins);
    for (size_t k = 0; k < out.data.size(); ++k) {
        CHECK(std::abs(out.data[k] - (src.data[k] + 100.0)) <= bin_w + 1e-12);
        CHECK(out.data[k] >= 100.0);
        CHECK(out.data[k] <= 200.0);
    }

    CHECK_THROWS(histogram_specify(src, Image2D(8, 8, 3.0), bins));
}

TEST_CASE("histogram_specify drives the output CDF onto the reference CDF") {
    const int bins = 256;
    std::mt19937 rng(23);
    const Image2D src = oracles::random_image(128, 128, rng, 0.0, 113.0);
    Image2D ref = oracles::random_image(128, 128, rng, 40.0, 250.0);
    // make the reference distribution visibly different from the source
    for (double& v : ref.data) v = 40.0 + (v - 40.0) * (v - 40.0) / 210.0;

    const Image2D out = histogram_specify(src, ref, bins);

    // Kolmogorov-Smirnov distance between the empirical CDFs of output and
    // reference, evaluated on a dense grid of probe levels.
    auto ecdf = [](const Image2D& img, double level) {
        long c = 0;
        for (double v : img.data) c += (v <= level);
        return static_cast<double>(c) / static_cast<double>(img.data.size());
    };
    double ks = 0.0;
    for (int k = 0; k <= 500; ++k) {
        const double level = 30.0 + (260.0 - 30.0) * k / 500.0;
        ks = std::max(ks, std::abs(ecdf(out, level) - ecdf(ref, level)));
    }
    CHECK(ks <= 2.0 / bins);
}

TEST_CASE("warp_affine identity, translation, scaling, errors") {
    std::mt19937 rng(5);
    const Image2D img = oracles::random_image(24, 20, rng);

    const Image2D same = warp_affine(img, AffineTransform2D::identity());
    CHECK(same.data == img.data);

    AffineTransform2D tr;
    tr.a13 = 3.0;
    tr.a23 = 2.0;
    const Image2D shifted = warp_affine(img, tr);
    for (int y = 2; y < img.height; ++y) {
        for (int x = 3; x < img.width; ++x) {
            CHECK(shifted.at(x, y) == img.at(x - 3, y - 2));
        }
    }

    AffineTransform2D sc;
    sc.a11 = 1.1;
    sc.a22 = 1.1;
    const Image2D ramp = ramp_x(32, 8, 3.0);
    const Image2D scaled = warp_affine(ramp, sc);
    for (int x = 0; x < 32; ++x) {
        CHECK(scaled.at(x, 4) == doctest::Approx(3.0 * x / 1.1).epsilon(1e-12));
    }

    AffineTransform2D sing;
    sing.a11 = 0.0;
    sing.a22 = 0.0;
    CHECK_THROWS(warp_affine(img, sing));
}

TEST_CASE("warp_ffd zero grid, uniform shift, single-point oracle") {
    std::mt19937 rng(17);
    const Image2D img = oracles::random_image(40, 40, rng);
    FFDGrid grid = FFDGrid::for_image(img.width, img.height, 8.0, 8.0);

    const Image2D same = warp_ffd(img, grid);
    CHECK(same.data == img.data);

    for (Point2& d : grid.displacements) d = {3.0, 0.0};
    const Image2D via_ffd = warp_ffd(img, grid);
    AffineTransform2D tr; // forward move of -3 px resamples at x+3, like the grid
    tr.a13 = -3.0;
    const Image2D via_affine = warp_affine(img, tr);
    for (size_t k = 0; k < via_ffd.data.size(); ++k) {
        CHECK(via_ffd.data[k] == doctest::Approx(via_affine.data[k]).epsilon(1e-12));
    }

    FFDGrid one = FFDGrid::for_image(img.width, img.height, 8.0, 8.0);
    one.disp(3, 3) = {5.0, -2.5};
    const Image2D warped = warp_ffd(img, one);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const Point2 p = oracles::ffd_point_direct(one, x, y);
            CHECK(warped.at(x, y) == doctest::Approx(bilinear_sample(img, p.x, p.y)).epsilon(1e-12));
        }
    }

    FFDGrid small = FFDGrid::for_image(8, 8, 8.0, 8.0);
    CHECK_THROWS(warp_ffd(img, small));
}

TEST_CASE("center_crop_pad pads with edge replication and crops centered") {
    Image2D img(4, 4);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) img.at(x, y) = 10.0 * y + x;

    const Image2D padded = center_crop_pad(img, 8, 8);
    REQUIRE(padded.width == 8);
    CHECK(padded.at(2, 2) == img.at(0, 0));
    CHECK(padded.at(5, 5) == img.at(3, 3));
    CHECK(padded.at(0, 0) == img.at(0, 0)); // replicated corner
    CHECK(padded.at(7, 7) == img.at(3, 3));

    const Image2D cropped = center_crop_pad(img, 2, 2);
    CHECK(cropped.at(0, 0) == img.at(1, 1));
    CHECK(cropped.at(1, 1) == img.at(2, 2));
}

TEST_CASE("pgm round-trips and sidecar spacing") {
    const auto dir = temp_dir();
    std::mt19937 rng(29);
    Image2D img = oracles::random_image(13, 9, rng, 0.0, 255.0);
    for (double& v : img.data) v = std::floor(v);
    img.spacing_x = 1.25;
    img.spacing_y = 0.75;

    for (bool ascii : {false, true}) {
        const std::string path = (dir / (ascii ? "a.pgm" : "b.pgm")).string();
        save_pgm(img, path, 255, ascii);
        const Image2D back = load_pgm(path);
        CHECK(back.data == img.data);
        CHECK(back.spacing_x == doctest::Approx(1.25));
        CHECK(back.spacing_y == doctest::Approx(0.75));
    }

    // 16-bit payload
    Image2D wide = img;
    for (double& v : wide.data) v *= 100.0;
    const std::string path16 = (dir / "wide.pgm").string();
    save_pgm(wide, path16, 65535);
    const Image2D back16 = load_pgm(path16);
    CHECK(back16.data == wide.data);

    // missing sidecar defaults to unit spacing
    const std::string bare = (dir / "bare.pgm").string();
    save_pgm(img, bare);
    std::filesystem::remove(meta_path_for(bare));
    const Image2D nometa = load_pgm(bare);
    CHECK(nometa.spacing_x == 1.0);
    CHECK(nometa.spacing_y == 1.0);
}

TEST_CASE("pgm loader rejects malformed files") {
    const auto dir = temp_dir();
    auto write = [&](const std::string& name, const std::string& content) {
        const std::string p = (dir / name).string();
        std::ofstream out(p, std::ios::binary);
        out << content;
        return p;
    };
    CHECK_THROWS_WITH_AS(load_pgm(write("magic.pgm", "P7\n2 2\n255\n")),
                         doctest::Contains("magic"), std::runtime_error);
    CHECK_THROWS(load_pgm(write("dims.pgm", "P2\n0 2\n255\n1 2 3 4\n")));
    CHECK_THROWS_WITH_AS(load_pgm(write("trunc.pgm", "P5\n4 4\n255\nab")),
                         doctest::Contains("truncated"), std::runtime_error);
    CHECK_THROWS(load_pgm(write("badtok.pgm", "P2\ntwo 2\n255\n1 2 3 4\n")));
    CHECK_THROWS(load_pgm((dir / "absent.pgm").string()));
}
