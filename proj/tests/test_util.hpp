// Shared synthetic-image builders for the test suites.

#ifndef LGESEG_TESTS_TEST_UTIL_HPP
#define LGESEG_TESTS_TEST_UTIL_HPP

#include <cmath>
#include <random>
#include <vector>

#include "lgeseg/affine.hpp"
#include "lgeseg/ffd.hpp"
#include "lgeseg/image.hpp"

namespace testutil {

/// Smooth analytic test image: a constant plus a handful of Gaussian blobs.
/// Being analytic, warped variants can be rendered without interpolation
/// error, which gives exact ground truth for registration tests.
struct BlobField {
    struct Blob {
        double cx, cy, sigma, amp;
    };
    std::vector<Blob> blobs;
    double base = 60.0;

    static BlobField random(int count, int w, int h, std::mt19937& rng,
                            double sigma_lo = 8.0, double sigma_hi = 22.0,
                            double amp_lo = 30.0, double amp_hi = 90.0) {
        BlobField f;
        std::uniform_real_distribution<double> px(0.15 * w, 0.85 * w);
        std::uniform_real_distribution<double> py(0.15 * h, 0.85 * h);
        std::uniform_real_distribution<double> ps(sigma_lo, sigma_hi);
        std::uniform_real_distribution<double> pa(amp_lo, amp_hi);
        std::uniform_real_distribution<double> sign(0.0, 1.0);
        for (int k = 0; k < count; ++k) {
            const double s = sign(rng) < 0.35 ? -1.0 : 1.0;
            f.blobs.push_back({px(rng), py(rng), ps(rng), s * pa(rng)});
        }
        return f;
    }

    double eval(double x, double y) const {
        double v = base;
        for (const Blob& b : blobs) {
            const double dx = x - b.cx, dy = y - b.cy;
            v += b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
        }
        return v;
    }

    lgeseg::Image2D render(int w, int h) const {
        lgeseg::Image2D img(w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) img.at(x, y) = eval(x, y);
        return img;
    }

    /// Renders eval(A * (x, y)) so that warp_affine(result, A) matches render().
    lgeseg::Image2D render_pre_affine(int w, int h, const lgeseg::AffineTransform2D& A) const {
        lgeseg::Image2D img(w, h);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const lgeseg::Point2 p = A.apply({static_cast<double>(x), static_cast<double>(y)});
                img.at(x, y) = eval(p.x, p.y);
            }
        }
        return img;
    }

    /// Renders eval(T_grid(x, y)): the image that, warped by grid, gives render().
    lgeseg::Image2D render_pre_ffd(int w, int h, const lgeseg::FFDGrid& grid) const {
        lgeseg::Image2D img(w, h);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const lgeseg::Point2 p = lgeseg::ffd_transform_point(grid, x, y);
                img.at(x, y) = eval(p.x, p.y);
            }
        }
        return img;
    }
};

/// Smooth bump-displacement grid with max dense displacement close to
/// max_disp pixels, confined away from the borders.
inline lgeseg::FFDGrid random_bump_grid(int w, int h, double spacing, std::mt19937& rng,
                                        double max_disp, int bump_count = 2) {
    lgeseg::FFDGrid g = lgeseg::FFDGrid::for_image(w, h, spacing, spacing);
    std::uniform_real_distribution<double> px(0.3 * w, 0.7 * w);
    std::uniform_real_distribution<double> py(0.3 * h, 0.7 * h);
    std::uniform_real_distribution<double> pd(-1.0, 1.0);
    std::uniform_real_distribution<double> ps(0.12 * w, 0.2 * w);
    struct Bump {
        double cx, cy, dx, dy, sigma;
    };
    std::vector<Bump> bumps;
    for (int k = 0; k < bump_count; ++k) {
        bumps.push_back({px(rng), py(rng), pd(rng), pd(rng), ps(rng)});
    }
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const double cx = g.origin_x + i * g.spacing_x;
            const double cy = g.origin_y + j * g.spacing_y;
            lgeseg::Point2 d{0.0, 0.0};
            for (const Bump& b : bumps) {
                const double rx = cx - b.cx, ry = cy - b.cy;
                const double wgt = std::exp(-(rx * rx + ry * ry) / (2.0 * b.sigma * b.sigma));
                d.x += b.dx * wgt;
                d.y += b.dy * wgt;
            }
            g.disp(i, j) = d;
        }
    }
    // scale so the densely sampled displacement peaks near max_disp
    double peak = 0.0;
    for (int y = 0; y < h; y += 2) {
        for (int x = 0; x < w; x += 2) {
            const lgeseg::Point2 p = lgeseg::ffd_transform_point(g, x, y);
            peak = std::max(peak, (p - lgeseg::Point2{static_cast<double>(x),
                                                      static_cast<double>(y)}).norm());
        }
    }
    if (peak > 0.0) {
        const double s = max_disp / peak;
        for (lgeseg::Point2& d : g.displacements) d = d * s;
    }
    return g;
}

} // namespace testutil

#endif
