#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <random>

#include "lgeseg/affine.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace lgeseg;

TEST_CASE("ncc identities and the four-sample value") {
    std::mt19937 rng(41);
    const Image2D img = oracles::random_image(16, 16, rng);
    CHECK(ncc(img, img) == doctest::Approx(1.0).epsilon(1e-12));

    Image2D neg = img;
    for (double& v : neg.data) v = -v + 17.0;
    CHECK(ncc(img, neg) == doctest::Approx(-1.0).epsilon(1e-12));

    Image2D a(2, 2), b(2, 2);
    a.data = {0, 1, 2, 3};
    b.data = {0, 2, 1, 3};
    CHECK(ncc(a, b) == doctest::Approx(0.8).epsilon(1e-14));
    CHECK(ncc(a, b) == doctest::Approx(oracles::ncc_direct(a, b)).epsilon(1e-14));

    CHECK_THROWS(ncc(a, Image2D(3, 3, 1.0)));
    CHECK_THROWS(ncc(a, Image2D(2, 2, 4.0)));
}

TEST_CASE("ncc affine-intensity invariance") {
    std::mt19937 rng(43);
    const Image2D a = oracles::random_image(24, 24, rng);
    const Image2D b = oracles::random_image(24, 24, rng);
    const double reference = ncc(a, b);

    Image2D scaled = b;
    for (double& v : scaled.data) v = 2.5 * v + 17.0;
    CHECK(ncc(a, scaled) == doctest::Approx(reference).epsilon(1e-12));

    Image2D flipped = b;
    for (double& v : flipped.data) v = -0.7 * v + 3.0;
    CHECK(ncc(a, flipped) == doctest::Approx(-reference).epsilon(1e-12));
}

TEST_CASE("project_constraints clamps strictly inside and is idempotent") {
    AffineConfig cfg; // paper thresholds 0.1 / 10

    AffineTransform2D ok;
    ok.a11 = 1.05;
    ok.a13 = -7.0;
    ok.a12 = 0.3; // shear untouched by the constraint set
    const AffineTransform2D same = project_constraints(ok, cfg);
    CHECK(same.a11 == ok.a11);
    CHECK(same.a12 == ok.a12);
    CHECK(same.a13 == ok.a13);

    AffineTransform2D far;
    far.a13 = 25.0;
    far.a22 = 1.4;
    const AffineTransform2D proj = project_constraints(far, cfg);
    CHECK(proj.a13 < 10.0);
    CHECK(proj.a13 > 10.0 - 1e-9);
    CHECK(proj.a22 < 1.1);
    CHECK(proj.a22 > 1.1 - 1e-9);
    CHECK(affine_is_feasible(proj, cfg));

    const AffineTransform2D twice = project_constraints(proj, cfg);
    CHECK(twice.a11 == proj.a11);
    CHECK(twice.a13 == proj.a13);
    CHECK(twice.a22 == proj.a22);
    CHECK(twice.a23 == proj.a23);
}

TEST_CASE("affine inverse round-trips points; singular matrices throw") {
    AffineTransform2D A;
    A.a11 = 1.04;
    A.a12 = 0.03;
    A.a13 = -4.0;
    A.a21 = -0.02;
    A.a22 = 0.97;
    A.a23 = 6.5;
    const AffineTransform2D inv = A.inverse();
    const Point2 p{12.3, -4.5};
    const Point2 back = inv.apply(A.apply(p));
    CHECK(back.x == doctest::Approx(p.x).epsilon(1e-12));
    CHECK(back.y == doctest::Approx(p.y).epsilon(1e-12));

    AffineTransform2D sing;
    sing.a11 = 2.0;
    sing.a12 = 4.0;
    sing.a21 = 1.0;
    sing.a22 = 2.0;
    CHECK_THROWS(sing.inverse());
}

TEST_CASE("estimate_affine fixed point at identity") {
    std::mt19937 rng(47);
    const auto field = testutil::BlobField::random(6, 96, 96, rng);
    const Image2D img = field.render(96, 96);

    AffineConfig cfg;
    AffineTrace trace;
    const AffineTransform2D A = estimate_affine(img, img, cfg, &trace);
    CHECK(ncc(img, warp_affine(img, A)) >= 0.999);
    CHECK(std::abs(A.a11 - 1.0) < 0.01);
    CHECK(std::abs(A.a22 - 1.0) < 0.01);
    CHECK(std::abs(A.a13) < 0.1);
    CHECK(std::abs(A.a23) < 0.1);
    for (size_t k = 1; k < trace.ncc_values.size(); ++k) {
        CHECK(trace.ncc_values[k] >= trace.ncc_values[k - 1] - 1e-9);
    }
}

TEST_CASE("estimate_affine recovers a feasible translation") {
    std::mt19937 rng(53);
    const auto field = testutil::BlobField::random(7, 128, 128, rng);
    const Image2D fixed = field.render(128, 128);

    AffineTransform2D truth;
    truth.a13 = 3.0;
    truth.a23 = 2.0;
    const Image2D moving = field.render_pre_affine(128, 128, truth);

    AffineConfig cfg;
    const AffineTransform2D A = estimate_affine(fixed, moving, cfg);
    CHECK(std::abs(A.a13 - 3.0) <= 0.5);
    CHECK(std::abs(A.a23 - 2.0) <= 0.5);
    CHECK(affine_is_feasible(A, cfg));
    CHECK(ncc(fixed, warp_affine(moving, A)) >=
          ncc(fixed, warp_affine(moving, AffineTransform2D::identity())) - 1e-9);
}

TEST_CASE("estimate_affine pins an out-of-reach translation at the bound") {
    std::mt19937 rng(59);
    const auto field = testutil::BlobField::random(7, 128, 128, rng);
    const Image2D fixed = field.render(128, 128);

    AffineTransform2D truth;
    truth.a13 = 20.0; // beyond the 10-pixel feasibility bound
    const Image2D moving = field.render_pre_affine(128, 128, truth);

    AffineConfig cfg;
    const AffineTransform2D A = estimate_affine(fixed, moving, cfg);
    CHECK(affine_is_feasible(A, cfg));
    CHECK(std::abs(A.a13 - 10.0) <= 0.5);
}

TEST_CASE("affine file round-trip") {
    const auto dir = std::filesystem::temp_directory_path() / "lgeseg_affine_tests";
    std::filesystem::create_directories(dir);
    AffineTransform2D A;
    A.a11 = 1.0625;
    A.a12 = -0.017;
    A.a13 = 4.875;
    A.a21 = 0.002;
    A.a22 = 0.9375;
    A.a23 = -9.0;
    const std::string path = (dir / "t.aff").string();
    save_affine(A, path);
    const AffineTransform2D back = load_affine(path);
    CHECK(back.a11 == A.a11);
    CHECK(back.a12 == A.a12);
    CHECK(back.a13 == A.a13);
    CHECK(back.a21 == A.a21);
    CHECK(back.a22 == A.a22);
    CHECK(back.a23 == A.a23);
    CHECK_THROWS(load_affine((dir / "absent.aff").string()));
}
