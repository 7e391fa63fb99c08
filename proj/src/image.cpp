#include "lgeseg/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lgeseg/affine.hpp"
#include "lgeseg/ffd.hpp"

namespace lgeseg {

Image2D::Image2D(int w, int h, double fill, double sx, double sy)
    : width(w), height(h), spacing_x(sx), spacing_y(sy) {
    if (w <= 0 || h <= 0) throw std::invalid_argument("Image2D: dimensions must be positive");
    if (sx <= 0.0 || sy <= 0.0) throw std::invalid_argument("Image2D: spacing must be positive");
    data.assign(static_cast<size_t>(w) * h, fill);
}

void Image2D::validate() const {
    if (width <= 0 || height <= 0) throw std::invalid_argument("Image2D: dimensions must be positive");
    if (spacing_x <= 0.0 || spacing_y <= 0.0) throw std::invalid_argument("Image2D: spacing must be positive");
    if (data.size() != pixel_count()) throw std::invalid_argument("Image2D: data length does not match dimensions");
    for (double v : data) {
        if (!std::isfinite(v)) throw std::invalid_argument("Image2D: non-finite intensity");
    }
}

void IntensityHistogram::validate(size_t expected_total) const {
    if (bin_count < 2) throw std::invalid_argument("IntensityHistogram: bin_count must be >= 2");
    if (bin_edges.size() != static_cast<size_t>(bin_count) + 1)
        throw std::invalid_argument("IntensityHistogram: edge count mismatch");
    if (!std::is_sorted(bin_edges.begin(), bin_edges.end()))
        throw std::invalid_argument("IntensityHistogram: edges not monotone");
    if (counts.size() != static_cast<size_t>(bin_count))
        throw std::invalid_argument("IntensityHistogram: counts length mismatch");
    long total = 0;
    for (long c : counts) {
        if (c < 0) throw std::invalid_argument("IntensityHistogram: negative count");
        total += c;
    }
    if (static_cast<size_t>(total) != expected_total)
        throw std::invalid_argument("IntensityHistogram: counts do not sum to pixel count");
}

IntensityHistogram compute_histogram(const Image2D& img, int bin_count) {
    if (bin_count < 2) throw std::invalid_argument("compute_histogram: bin_count must be >= 2");
    const auto [mn_it, mx_it] = std::minmax_element(img.data.begin(), img.data.end());
    double lo = *mn_it, hi = *mx_it;
    if (hi <= lo) hi = lo + 1.0; // constant image: single occupied bin at the low edge

    IntensityHistogram h;
    h.bin_count = bin_count;
    h.bin_edges.resize(bin_count + 1);
    const double w = (hi - lo) / bin_count;
    for (int k = 0; k <= bin_count; ++k) h.bin_edges[k] = lo + w * k;
    h.counts.assign(bin_count, 0);
    for (double v : img.data) {
        int k = static_cast<int>((v - lo) / w);
        k = std::clamp(k, 0, bin_count - 1);
        ++h.counts[k];
    }
    return h;
}

double bilinear_sample(const Image2D& img, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
    y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
    const int x0 = std::min(static_cast<int>(x), img.width - 1);
    const int y0 = std::min(static_cast<int>(y), img.height - 1);
    const int x1 = std::min(x0 + 1, img.width - 1);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = (1.0 - fx) * img.at(x0, y0) + fx * img.at(x1, y0);
    const double bot = (1.0 - fx) * img.at(x0, y1) + fx * img.at(x1, y1);
    return (1.0 - fy) * top + fy * bot;
}

Image2D resample(const Image2D& img, double new_spacing_x, double new_spacing_y) {
    if (new_spacing_x <= 0.0 || new_spacing_y <= 0.0)
        throw std::invalid_argument("resample: spacing must be positive");
    const int new_w = std::max<int>(1, static_cast<int>(std::llround(img.width * img.spacing_x / new_spacing_x)));
    const int new_h = std::max<int>(1, static_cast<int>(std::llround(img.height * img.spacing_y / new_spacing_y)));
    Image2D out(new_w, new_h, 0.0, new_spacing_x, new_spacing_y);
    const double rx = new_spacing_x / img.spacing_x;
    const double ry = new_spacing_y / img.spacing_y;
    for (int j = 0; j < new_h; ++j) {
        for (int i = 0; i < new_w; ++i) {
            out.at(i, j) = bilinear_sample(img, i * rx, j * ry);
        }
    }
    return out;
}

Image2D histogram_specify(const Image2D& source, const Image2D& reference, int bin_count) {
    if (bin_count < 2) throw std::invalid_argument("histogram_specify: bin_count must be >= 2");
    const auto [s_lo, s_hi] = std::minmax_element(source.data.begin(), source.data.end());
    if (*s_hi <= *s_lo) throw std::invalid_argument("histogram_specify: constant source image");

    const IntensityHistogram hs = compute_histogram(source, bin_count);
    const IntensityHistogram hr = compute_histogram(reference, bin_count);

    int occupied = 0;
    for (long c : hr.counts) occupied += (c > 0);
    if (occupied < 2)
        throw std::invalid_argument("histogram_specify: reference must occupy at least 2 bins");

    std::vector<long> cum_s(bin_count), cum_r(bin_count);
    long acc = 0;
    for (int k = 0; k < bin_count; ++k) { acc += hs.counts[k]; cum_s[k] = acc; }
    acc = 0;
    for (int k = 0; k < bin_count; ++k) { acc += hr.counts[k]; cum_r[k] = acc; }
    const long long total_s = cum_s.back();
    const long long total_r = cum_r.back();

    // inverse-reference-CDF lookup for each source bin, exact in integers:
    // smallest j with cum_r[j] / total_r >= cum_s[k] / total_s
    std::vector<int> bin_map(bin_count);
    int j = 0;
    for (int k = 0; k < bin_count; ++k) {
        while (j < bin_count - 1 &&
               static_cast<long long>(cum_r[j]) * total_s < static_cast<long long>(cum_s[k]) * total_r) {
            ++j;
        }
        bin_map[k] = j;
    }

    const double s_min = hs.bin_edges.front();
    const double s_w = hs.bin_edges[1] - hs.bin_edges[0];
    Image2D out = source;
    for (double& v : out.data) {
        int k = static_cast<int>((v - s_min) / s_w);
        k = std::clamp(k, 0, bin_count - 1);
        const int m = bin_map[k];
        v = 0.5 * (hr.bin_edges[m] + hr.bin_edges[m + 1]);
    }
    return out;
}

Image2D warp_affine(const Image2D& img, const AffineTransform2D& A) {
    const AffineTransform2D inv = A.inverse();
    Image2D out(img.width, img.height, 0.0, img.spacing_x, img.spacing_y);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const Point2 p = inv.apply({static_cast<double>(x), static_cast<double>(y)});
            out.at(x, y) = bilinear_sample(img, p.x, p.y);
        }
    }
    return out;
}

Image2D warp_ffd(const Image2D& img, const FFDGrid& grid) {
    if (!grid.covers_image(img.width, img.height))
        throw std::invalid_argument("warp_ffd: grid does not cover the image domain");
    Image2D out(img.width, img.height, 0.0, img.spacing_x, img.spacing_y);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const Point2 p = ffd_transform_point(grid, x, y);
            out.at(x, y) = bilinear_sample(img, p.x, p.y);
        }
    }
    return out;
}

void center_crop_pad_offset(const Image2D& img, int new_width, int new_height,
                            int& offset_x, int& offset_y) {
    offset_x = static_cast<int>(std::floor((new_width - img.width) / 2.0));
    offset_y = static_cast<int>(std::floor((new_height - img.height) / 2.0));
}

Image2D center_crop_pad(const Image2D& img, int new_width, int new_height) {
    if (new_width <= 0 || new_height <= 0)
        throw std::invalid_argument("center_crop_pad: dimensions must be positive");
    int ox = 0, oy = 0;
    center_crop_pad_offset(img, new_width, new_height, ox, oy);
    Image2D out(new_width, new_height, 0.0, img.spacing_x, img.spacing_y);
    for (int j = 0; j < new_height; ++j) {
        const int sy = std::clamp(j - oy, 0, img.height - 1);
        for (int i = 0; i < new_width; ++i) {
            const int sx = std::clamp(i - ox, 0, img.width - 1);
            out.at(i, j) = img.at(sx, sy);
        }
    }
    return out;
}

} // namespace lgeseg
