#include "lgeseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace lgeseg {

long BinaryMask::count() const {
    long c = 0;
    for (uint8_t b : bits) c += b;
    return c;
}

std::string EvalReport::to_kv_block() const {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "dice_endo=%.17g\ndice_epi=%.17g\ndice_myo=%.17g\n"
                  "avg_dist_endo=%.17g\nmax_dist_endo=%.17g\n"
                  "avg_dist_epi=%.17g\nmax_dist_epi=%.17g\n",
                  dice_endo, dice_epi, dice_myo, avg_dist_endo, max_dist_endo,
                  avg_dist_epi, max_dist_epi);
    return buf;
}

std::string EvalReport::to_record_line() const {
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                  dice_endo, dice_epi, dice_myo, avg_dist_endo, max_dist_endo,
                  avg_dist_epi, max_dist_epi);
    return buf;
}

BinaryMask rasterize(const Contour& contour, int w, int h) {
    if (w <= 0 || h <= 0) throw std::invalid_argument("rasterize: dimensions must be positive");
    if (!polygon_is_simple(contour.vertices))
        throw std::invalid_argument("rasterize: polygon is self-intersecting");
    BinaryMask m(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            m.set(x, y, point_in_polygon({static_cast<double>(x), static_cast<double>(y)},
                                         contour.vertices));
        }
    }
    return m;
}

double dice(const BinaryMask& a, const BinaryMask& b) {
    if (!a.same_size(b)) throw std::invalid_argument("dice: dimension mismatch");
    long inter = 0, total = 0;
    for (size_t k = 0; k < a.bits.size(); ++k) {
        inter += (a.bits[k] & b.bits[k]);
        total += a.bits[k] + b.bits[k];
    }
    if (total == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

BinaryMask myocardium_mask(const ContourPair& pair, int w, int h) {
    for (const Point2& p : pair.endo.vertices) {
        // vertices lying on the epicardial polyline itself are tolerated
        if (!point_in_polygon(p, pair.epi.vertices) &&
            point_to_polyline_distance(p, pair.epi.vertices) > 1e-9)
            throw std::invalid_argument("myocardium_mask: endocardium not contained in epicardium");
    }
    const BinaryMask endo = rasterize(pair.endo, w, h);
    const BinaryMask epi = rasterize(pair.epi, w, h);
    BinaryMask m(w, h);
    for (size_t k = 0; k < m.bits.size(); ++k) m.bits[k] = epi.bits[k] & ~endo.bits[k] & 1;
    return m;
}

void contour_distance(const Contour& a, const Contour& b, double& avg, double& max) {
    double sum = 0.0;
    double worst = 0.0;
    size_t count = 0;
    for (const Point2& p : a.vertices) {
        const double d = point_to_polyline_distance(p, b.vertices);
        sum += d;
        worst = std::max(worst, d);
        ++count;
    }
    for (const Point2& p : b.vertices) {
        const double d = point_to_polyline_distance(p, a.vertices);
        sum += d;
        worst = std::max(worst, d);
        ++count;
    }
    avg = sum / static_cast<double>(count);
    max = worst;
}

double ssd(const Image2D& a, const Image2D& b) {
    if (!a.same_size(b)) throw std::invalid_argument("ssd: dimension mismatch");
    double s = 0.0;
    for (size_t k = 0; k < a.data.size(); ++k) {
        const double d = a.data[k] - b.data[k];
        s += d * d;
    }
    return s / static_cast<double>(a.pixel_count());
}

double nmi(const Image2D& a, const Image2D& b, int bins) {
    if (!a.same_size(b)) throw std::invalid_argument("nmi: dimension mismatch");
    if (bins < 2) throw std::invalid_argument("nmi: bins must be >= 2");
    const auto [alo, ahi] = std::minmax_element(a.data.begin(), a.data.end());
    const auto [blo, bhi] = std::minmax_element(b.data.begin(), b.data.end());
    if (*ahi <= *alo || *bhi <= *blo) throw std::invalid_argument("nmi: constant image");
    const double aw = (*ahi - *alo) / bins;
    const double bw = (*bhi - *blo) / bins;
    std::vector<long> joint(static_cast<size_t>(bins) * bins, 0);
    for (size_t k = 0; k < a.data.size(); ++k) {
        const int ia = std::clamp(static_cast<int>((a.data[k] - *alo) / aw), 0, bins - 1);
        const int ib = std::clamp(static_cast<int>((b.data[k] - *blo) / bw), 0, bins - 1);
        ++joint[static_cast<size_t>(ia) * bins + ib];
    }
    const double n = static_cast<double>(a.pixel_count());
    std::vector<long> ra(bins, 0), rb(bins, 0);
    for (int i = 0; i < bins; ++i) {
        for (int j = 0; j < bins; ++j) {
            const long c = joint[static_cast<size_t>(i) * bins + j];
            ra[i] += c;
            rb[j] += c;
        }
    }
    double ha = 0.0, hb = 0.0, hab = 0.0;
    for (long c : ra) if (c > 0) { const double p = c / n; ha -= p * std::log2(p); }
    for (long c : rb) if (c > 0) { const double p = c / n; hb -= p * std::log2(p); }
    for (long c : joint) if (c > 0) { const double p = c / n; hab -= p * std::log2(p); }
    if (hab <= 0.0) throw std::invalid_argument("nmi: degenerate joint histogram");
    return (ha + hb) / hab;
}

} // namespace lgeseg
