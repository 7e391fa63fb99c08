#ifndef LGESEG_METRICS_HPP
#define LGESEG_METRICS_HPP

#include <string>

#include "lgeseg/contour.hpp"
#include "lgeseg/image.hpp"

namespace lgeseg {

struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> bits; // row-major, 0/1

    BinaryMask() = default;
    BinaryMask(int w, int h) : width(w), height(h), bits(static_cast<size_t>(w) * h, 0) {}

    uint8_t at(int x, int y) const { return bits[static_cast<size_t>(y) * width + x]; }
    void set(int x, int y, bool v) { bits[static_cast<size_t>(y) * width + x] = v ? 1 : 0; }
    long count() const;
    bool same_size(const BinaryMask& o) const { return width == o.width && height == o.height; }
};

struct EvalReport {
    double dice_endo = 0.0;
    double dice_epi = 0.0;
    double dice_myo = 0.0;
    double avg_dist_endo = 0.0;
    double max_dist_endo = 0.0;
    double avg_dist_epi = 0.0;
    double max_dist_epi = 0.0;

    /// Flat key=value block, one field per line.
    std::string to_kv_block() const;
    /// Single-line space-separated record: the 7 fields in declaration order.
    std::string to_record_line() const;
};

/// Pixel centers strictly inside the polygon (even-odd rule) are set.
BinaryMask rasterize(const Contour& contour, int w, int h);

/// 2|A n B| / (|A| + |B|); 1.0 when both masks are empty.
double dice(const BinaryMask& a, const BinaryMask& b);

/// Epicardial region minus the endocardial region.
BinaryMask myocardium_mask(const ContourPair& pair, int w, int h);

/// Symmetric mean/max of vertex-to-polyline distances between the contours.
void contour_distance(const Contour& a, const Contour& b, double& avg, double& max);

/// Mean of squared pixel differences.
double ssd(const Image2D& a, const Image2D& b);

/// Normalized mutual information (H(A)+H(B))/H(A,B), base-2 entropies over
/// a bins x bins joint histogram.
double nmi(const Image2D& a, const Image2D& b, int bins = 32);

} // namespace lgeseg

#endif
