// Independent brute-force reference implementations used to pin expected
// values. These deliberately re-derive everything from the written formulas
// and share no code with the library paths they check.

#ifndef LGESEG_TESTS_ORACLES_HPP
#define LGESEG_TESTS_ORACLES_HPP

#include <cmath>
#include <random>
#include <vector>

#include "lgeseg/ffd.hpp"
#include "lgeseg/image.hpp"

namespace oracles {

// Direct double summation of the neighborhood similarity of the difference
// image: mean over pixels of the clipped-disk average of s^2/(s^2 + dd^2).
inline double pattern_intensity_direct(const lgeseg::Image2D& a, const lgeseg::Image2D& b,
                                       int r, double sigma) {
    const int w = a.width, h = a.height;
    const double s2 = sigma * sigma;
    double outer = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double d0 = a.at(x, y) - b.at(x, y);
            double inner = 0.0;
            int nr = 0;
            for (int wy = -r; wy <= r; ++wy) {
                for (int vx = -r; vx <= r; ++vx) {
                    if (vx * vx + wy * wy > r * r) continue;
                    const int px = x + vx, py = y + wy;
                    if (px < 0 || px >= w || py < 0 || py >= h) continue;
                    const double dv = a.at(px, py) - b.at(px, py);
                    inner += s2 / (s2 + (d0 - dv) * (d0 - dv));
                    ++nr;
                }
            }
            outer += inner / nr;
        }
    }
    return outer / (static_cast<double>(w) * h);
}

// Full 16-term tensor-product evaluation from the closed-form bases.
inline lgeseg::Point2 ffd_point_direct(const lgeseg::FFDGrid& g, double x, double y) {
    auto basis = [](int l, double u) {
        const double u2 = u * u, u3 = u * u * u;
        switch (l) {
            case 0: return (1.0 - u) * (1.0 - u) * (1.0 - u) / 6.0;
            case 1: return (3.0 * u3 - 6.0 * u2 + 4.0) / 6.0;
            case 2: return (-3.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0;
            default: return u3 / 6.0;
        }
    };
    const double gx = (x - g.origin_x) / g.spacing_x;
    const double gy = (y - g.origin_y) / g.spacing_y;
    const int i = static_cast<int>(std::floor(gx)) - 1;
    const int j = static_cast<int>(std::floor(gy)) - 1;
    const double u = gx - std::floor(gx);
    const double v = gy - std::floor(gy);
    double dx = 0.0, dy = 0.0;
    for (int l = 0; l < 4; ++l) {
        for (int m = 0; m < 4; ++m) {
            const lgeseg::Point2& phi = g.displacements[static_cast<size_t>(j + m) * g.nx + (i + l)];
            const double wlm = basis(l, u) * basis(m, v);
            dx += wlm * phi.x;
            dy += wlm * phi.y;
        }
    }
    return {x + dx, y + dy};
}

// Joint-histogram NMI recomputed from scratch with base-2 entropies.
inline double nmi_direct(const lgeseg::Image2D& a, const lgeseg::Image2D& b, int bins) {
    double alo = a.data[0], ahi = a.data[0], blo = b.data[0], bhi = b.data[0];
    for (double v : a.data) { alo = std::min(alo, v); ahi = std::max(ahi, v); }
    for (double v : b.data) { blo = std::min(blo, v); bhi = std::max(bhi, v); }
    std::vector<double> joint(static_cast<size_t>(bins) * bins, 0.0);
    const double n = static_cast<double>(a.data.size());
    for (size_t k = 0; k < a.data.size(); ++k) {
        int ia = static_cast<int>((a.data[k] - alo) / (ahi - alo) * bins);
        int ib = static_cast<int>((b.data[k] - blo) / (bhi - blo) * bins);
        if (ia < 0) ia = 0;
        if (ia >= bins) ia = bins - 1;
        if (ib < 0) ib = 0;
        if (ib >= bins) ib = bins - 1;
        joint[static_cast<size_t>(ia) * bins + ib] += 1.0;
    }
    double ha = 0.0, hb = 0.0, hab = 0.0;
    for (int i = 0; i < bins; ++i) {
        double row = 0.0, col = 0.0;
        for (int j = 0; j < bins; ++j) {
            row += joint[static_cast<size_t>(i) * bins + j];
            col += joint[static_cast<size_t>(j) * bins + i];
        }
        if (row > 0.0) ha -= row / n * std::log2(row / n);
        if (col > 0.0) hb -= col / n * std::log2(col / n);
    }
    for (double c : joint) {
        if (c > 0.0) hab -= c / n * std::log2(c / n);
    }
    return (ha + hb) / hab;
}

// Pearson correlation by direct summation.
inline double ncc_direct(const lgeseg::Image2D& a, const lgeseg::Image2D& b) {
    const double n = static_cast<double>(a.data.size());
    double sa = 0.0, sb = 0.0;
    for (size_t k = 0; k < a.data.size(); ++k) { sa += a.data[k]; sb += b.data[k]; }
    const double ma = sa / n, mb = sb / n;
    double num = 0.0, da2 = 0.0, db2 = 0.0;
    for (size_t k = 0; k < a.data.size(); ++k) {
        const double da = a.data[k] - ma, db = b.data[k] - mb;
        num += da * db;
        da2 += da * da;
        db2 += db * db;
    }
    return num / std::sqrt(da2 * db2);
}

inline lgeseg::Image2D random_image(int w, int h, std::mt19937& rng, double lo = 0.0,
                                    double hi = 255.0) {
    lgeseg::Image2D img(w, h);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : img.data) v = dist(rng);
    return img;
}

} // namespace oracles

#endif
