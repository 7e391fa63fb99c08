#include "lgeseg/ffd.hpp"

#include "lgeseg/affine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace lgeseg {

double bspline_basis(int l, double u) {
    if (l < 0 || l > 3) throw std::invalid_argument("bspline_basis: l must be in 0..3");
    if (u < 0.0 || u >= 1.0) throw std::invalid_argument("bspline_basis: u must be in [0, 1)");
    switch (l) {
        case 0: return (1.0 - u) * (1.0 - u) * (1.0 - u) / 6.0;
        case 1: return (3.0 * u * u * u - 6.0 * u * u + 4.0) / 6.0;
        case 2: return (-3.0 * u * u * u + 3.0 * u * u + 3.0 * u + 1.0) / 6.0;
        default: return u * u * u / 6.0;
    }
}

double bspline_basis_d1(int l, double u) {
    if (l < 0 || l > 3) throw std::invalid_argument("bspline_basis_d1: l must be in 0..3");
    if (u < 0.0 || u >= 1.0) throw std::invalid_argument("bspline_basis_d1: u must be in [0, 1)");
    switch (l) {
        case 0: return -0.5 * (1.0 - u) * (1.0 - u);
        case 1: return 0.5 * (3.0 * u * u - 4.0 * u);
        case 2: return 0.5 * (-3.0 * u * u + 2.0 * u + 1.0);
        default: return 0.5 * u * u;
    }
}

double bspline_basis_d2(int l, double u) {
    if (l < 0 || l > 3) throw std::invalid_argument("bspline_basis_d2: l must be in 0..3");
    if (u < 0.0 || u >= 1.0) throw std::invalid_argument("bspline_basis_d2: u must be in [0, 1)");
    switch (l) {
        case 0: return 1.0 - u;
        case 1: return 3.0 * u - 2.0;
        case 2: return 1.0 - 3.0 * u;
        default: return u;
    }
}

FFDGrid FFDGrid::for_image(int width, int height, double sx, double sy) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("FFDGrid: image dimensions must be positive");
    if (sx <= 0.0 || sy <= 0.0) throw std::invalid_argument("FFDGrid: spacing must be positive");
    FFDGrid g;
    g.spacing_x = sx;
    g.spacing_y = sy;
    g.origin_x = -sx;
    g.origin_y = -sy;
    g.nx = static_cast<int>(std::floor((width - 1) / sx)) + 4;
    g.ny = static_cast<int>(std::floor((height - 1) / sy)) + 4;
    g.displacements.assign(static_cast<size_t>(g.nx) * g.ny, Point2{});
    return g;
}

bool FFDGrid::covers(double x, double y) const {
    const double gx = (x - origin_x) / spacing_x;
    const double gy = (y - origin_y) / spacing_y;
    return gx >= 1.0 && gx < nx - 2.0 && gy >= 1.0 && gy < ny - 2.0;
}

bool FFDGrid::covers_image(int width, int height) const {
    return covers(0.0, 0.0) && covers(width - 1.0, height - 1.0);
}

void FFDGrid::validate() const {
    if (nx < 4 || ny < 4) throw std::invalid_argument("FFDGrid: need at least 4 control points per axis");
    if (spacing_x <= 0.0 || spacing_y <= 0.0) throw std::invalid_argument("FFDGrid: spacing must be positive");
    if (displacements.size() != static_cast<size_t>(nx) * ny)
        throw std::invalid_argument("FFDGrid: displacement count mismatch");
    for (const Point2& d : displacements) {
        if (!std::isfinite(d.x) || !std::isfinite(d.y))
            throw std::invalid_argument("FFDGrid: non-finite displacement");
    }
}

Point2 ffd_transform_point(const FFDGrid& grid, double x, double y) {
    const double gx = (x - grid.origin_x) / grid.spacing_x;
    const double gy = (y - grid.origin_y) / grid.spacing_y;
    const int igx = static_cast<int>(std::floor(gx));
    const int igy = static_cast<int>(std::floor(gy));
    if (igx < 1 || igx > grid.nx - 3 || igy < 1 || igy > grid.ny - 3)
        throw std::out_of_range("ffd_transform_point: point outside FFD coverage");
    const double u = gx - igx;
    const double v = gy - igy;
    std::array<double, 4> bx, by;
    for (int l = 0; l < 4; ++l) {
        bx[l] = bspline_basis(l, u);
        by[l] = bspline_basis(l, v);
    }
    double dx = 0.0, dy = 0.0;
    for (int m = 0; m < 4; ++m) {
        const Point2* row = &grid.displacements[static_cast<size_t>(igy - 1 + m) * grid.nx + (igx - 1)];
        double rx = 0.0, ry = 0.0;
        for (int l = 0; l < 4; ++l) {
            rx += bx[l] * row[l].x;
            ry += bx[l] * row[l].y;
        }
        dx += by[m] * rx;
        dy += by[m] * ry;
    }
    return {x + dx, y + dy};
}

namespace {

std::vector<std::pair<int, int>> disk_offsets(int r) {
    if (r < 1) throw std::invalid_argument("pattern_intensity: radius must be >= 1");
    std::vector<std::pair<int, int>> offs;
    for (int w = -r; w <= r; ++w) {
        for (int v = -r; v <= r; ++v) {
            if (v * v + w * w <= r * r) offs.emplace_back(v, w);
        }
    }
    return offs;
}

// Per-pixel inner average of the bounded rational kernel over the clipped disk.
double pi_pixel_term(const std::vector<double>& diff, int w, int h, int x, int y,
                     const std::vector<std::pair<int, int>>& offs, double sigma2) {
    const double d0 = diff[static_cast<size_t>(y) * w + x];
    double sum = 0.0;
    int count = 0;
    for (const auto& [ov, ow] : offs) {
        const int vx = x + ov;
        const int vy = y + ow;
        if (vx < 0 || vx >= w || vy < 0 || vy >= h) continue;
        const double dd = d0 - diff[static_cast<size_t>(vy) * w + vx];
        sum += sigma2 / (sigma2 + dd * dd);
        ++count;
    }
    return sum / count;
}

} // namespace

double pattern_intensity(const Image2D& a, const Image2D& b, const PatternIntensityParams& p) {
    if (!a.same_size(b)) throw std::invalid_argument("pattern_intensity: dimension mismatch");
    if (p.sigma <= 0.0) throw std::invalid_argument("pattern_intensity: sigma must be positive");
    const auto offs = disk_offsets(p.r);
    const int w = a.width, h = a.height;
    std::vector<double> diff(a.pixel_count());
    for (size_t k = 0; k < diff.size(); ++k) diff[k] = a.data[k] - b.data[k];
    const double sigma2 = p.sigma * p.sigma;
    double total = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            total += pi_pixel_term(diff, w, h, x, y, offs, sigma2);
        }
    }
    return total / static_cast<double>(a.pixel_count());
}

namespace {

// Cached per-coordinate blend data for a fixed image/grid pairing.
struct AxisTable {
    std::vector<int> base;                     // first control array index of the 4-wide window
    std::vector<std::array<double, 4>> b, d1, d2;
};

AxisTable build_axis_table(int len, double origin, double spacing, int n, const char* what) {
    AxisTable t;
    t.base.resize(len);
    t.b.resize(len);
    t.d1.resize(len);
    t.d2.resize(len);
    for (int x = 0; x < len; ++x) {
        const double g = (x - origin) / spacing;
        const int ig = static_cast<int>(std::floor(g));
        if (ig < 1 || ig > n - 3)
            throw std::invalid_argument(std::string(what) + ": grid does not cover the image domain");
        const double u = g - ig;
        t.base[x] = ig - 1;
        for (int l = 0; l < 4; ++l) {
            t.b[x][l] = bspline_basis(l, u);
            t.d1[x][l] = bspline_basis_d1(l, u);
            t.d2[x][l] = bspline_basis_d2(l, u);
        }
    }
    return t;
}

Point2 blend_displacement(const FFDGrid& g, const AxisTable& ax, const AxisTable& ay, int x, int y) {
    const int bi = ax.base[x];
    const int bj = ay.base[y];
    const auto& bx = ax.b[x];
    const auto& by = ay.b[y];
    double dx = 0.0, dy = 0.0;
    for (int m = 0; m < 4; ++m) {
        const Point2* row = &g.displacements[static_cast<size_t>(bj + m) * g.nx + bi];
        double rx = 0.0, ry = 0.0;
        for (int l = 0; l < 4; ++l) {
            rx += bx[l] * row[l].x;
            ry += bx[l] * row[l].y;
        }
        dx += by[m] * rx;
        dy += by[m] * ry;
    }
    return {dx, dy};
}

// Thin-plate integrand at one pixel: sum over both displacement components
// of Dxx^2 + 2 Dxy^2 + Dyy^2 from analytic second derivatives of the blend.
double bending_density(const FFDGrid& g, const AxisTable& ax, const AxisTable& ay, int x, int y) {
    const int bi = ax.base[x];
    const int bj = ay.base[y];
    const double isx = 1.0 / g.spacing_x;
    const double isy = 1.0 / g.spacing_y;
    double xx_x = 0.0, xy_x = 0.0, yy_x = 0.0;
    double xx_y = 0.0, xy_y = 0.0, yy_y = 0.0;
    for (int m = 0; m < 4; ++m) {
        const Point2* row = &g.displacements[static_cast<size_t>(bj + m) * g.nx + bi];
        double rb_x = 0.0, rd1_x = 0.0, rd2_x = 0.0;
        double rb_y = 0.0, rd1_y = 0.0, rd2_y = 0.0;
        for (int l = 0; l < 4; ++l) {
            rb_x += ax.b[x][l] * row[l].x;
            rd1_x += ax.d1[x][l] * row[l].x;
            rd2_x += ax.d2[x][l] * row[l].x;
            rb_y += ax.b[x][l] * row[l].y;
            rd1_y += ax.d1[x][l] * row[l].y;
            rd2_y += ax.d2[x][l] * row[l].y;
        }
        const double bm = ay.b[y][m];
        const double d1m = ay.d1[y][m];
        const double d2m = ay.d2[y][m];
        xx_x += bm * rd2_x;
        xy_x += d1m * rd1_x;
        yy_x += d2m * rb_x;
        xx_y += bm * rd2_y;
        xy_y += d1m * rd1_y;
        yy_y += d2m * rb_y;
    }
    const double txx_x = xx_x * isx * isx, txy_x = xy_x * isx * isy, tyy_x = yy_x * isy * isy;
    const double txx_y = xx_y * isx * isx, txy_y = xy_y * isx * isy, tyy_y = yy_y * isy * isy;
    return txx_x * txx_x + 2.0 * txy_x * txy_x + tyy_x * tyy_x +
           txx_y * txx_y + 2.0 * txy_y * txy_y + tyy_y * tyy_y;
}

} // namespace

double bending_energy(const FFDGrid& grid, int img_w, int img_h) {
    grid.validate();
    if (img_w <= 0 || img_h <= 0) throw std::invalid_argument("bending_energy: dimensions must be positive");
    const AxisTable ax = build_axis_table(img_w, grid.origin_x, grid.spacing_x, grid.nx, "bending_energy");
    const AxisTable ay = build_axis_table(img_h, grid.origin_y, grid.spacing_y, grid.ny, "bending_energy");
    double total = 0.0;
    for (int y = 0; y < img_h; ++y) {
        for (int x = 0; x < img_w; ++x) {
            total += bending_density(grid, ax, ay, x, y);
        }
    }
    return total / (static_cast<double>(img_w) * img_h);
}

double ffd_cost(const Image2D& fixed, const Image2D& moving, const FFDGrid& grid,
                const FFDConfig& cfg) {
    if (!fixed.same_size(moving)) throw std::invalid_argument("ffd_cost: dimension mismatch");
    const double sim = pattern_intensity(fixed, warp_ffd(moving, grid), cfg.pi_params);
    return (1.0 - sim) + cfg.lambda * bending_energy(grid, fixed.width, fixed.height);
}

// ---------------------------------------------------------------------------
// Optimizer internals: similarity engines with localized re-evaluation.
// Moving one control point only touches its 4x4-cell pixel support, so
// finite-difference probes recompute the cost over that patch instead of
// the whole image.
// ---------------------------------------------------------------------------

namespace {

struct Rect {
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1; // inclusive; empty when x1 < x0
    bool empty() const { return x1 < x0 || y1 < y0; }
    bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
    int width() const { return x1 - x0 + 1; }
    int height() const { return y1 - y0 + 1; }
};

Rect clip_rect(Rect rc, int w, int h) {
    rc.x0 = std::max(rc.x0, 0);
    rc.y0 = std::max(rc.y0, 0);
    rc.x1 = std::min(rc.x1, w - 1);
    rc.y1 = std::min(rc.y1, h - 1);
    return rc;
}

class SimilarityEngine {
public:
    virtual ~SimilarityEngine() = default;
    /// Dissimilarity computed from scratch (no state touched).
    virtual double evaluate(const Image2D& fixed, const Image2D& warped) const = 0;
    /// Rebuild internal state for the given warped image.
    virtual void rebuild(const Image2D& fixed, const Image2D& warped) = 0;
    /// Dissimilarity if warped pixels inside rc took the patch values
    /// (row-major over rc). Must agree with evaluate() on the patched image.
    virtual double with_patch(const Image2D& fixed, const Image2D& warped, const Rect& rc,
                              const std::vector<double>& patch) const = 0;
};

class PatternIntensityEngine final : public SimilarityEngine {
public:
    PatternIntensityEngine(const PatternIntensityParams& p)
        : params_(p), offs_(disk_offsets(p.r)), sigma2_(p.sigma * p.sigma) {
        if (p.sigma <= 0.0) throw std::invalid_argument("pattern_intensity: sigma must be positive");
    }

    double evaluate(const Image2D& fixed, const Image2D& warped) const override {
        return 1.0 - pattern_intensity(fixed, warped, params_);
    }

    void rebuild(const Image2D& fixed, const Image2D& warped) override {
        w_ = fixed.width;
        h_ = fixed.height;
        diff_.resize(fixed.pixel_count());
        for (size_t k = 0; k < diff_.size(); ++k) diff_[k] = fixed.data[k] - warped.data[k];
        terms_.resize(diff_.size());
        term_sum_ = 0.0;
        for (int y = 0; y < h_; ++y) {
            for (int x = 0; x < w_; ++x) {
                const double t = pi_pixel_term(diff_, w_, h_, x, y, offs_, sigma2_);
                terms_[static_cast<size_t>(y) * w_ + x] = t;
                term_sum_ += t;
            }
        }
    }

    double with_patch(const Image2D& fixed, const Image2D&, const Rect& rc,
                      const std::vector<double>& patch) const override {
        // Difference values change inside rc; pixel terms change wherever the
        // disk reaches a changed pixel, i.e. inside rc dilated by r.
        const Rect dil = clip_rect({rc.x0 - params_.r, rc.y0 - params_.r,
                                    rc.x1 + params_.r, rc.y1 + params_.r}, w_, h_);
        const int pw = rc.width();
        auto diff_at = [&](int x, int y) {
            if (rc.contains(x, y))
                return fixed.at(x, y) - patch[static_cast<size_t>(y - rc.y0) * pw + (x - rc.x0)];
            return diff_[static_cast<size_t>(y) * w_ + x];
        };
        double delta = 0.0;
        for (int y = dil.y0; y <= dil.y1; ++y) {
            for (int x = dil.x0; x <= dil.x1; ++x) {
                const double d0 = diff_at(x, y);
                double sum = 0.0;
                int count = 0;
                for (const auto& [ov, ow] : offs_) {
                    const int vx = x + ov;
                    const int vy = y + ow;
                    if (vx < 0 || vx >= w_ || vy < 0 || vy >= h_) continue;
                    const double dd = d0 - diff_at(vx, vy);
                    sum += sigma2_ / (sigma2_ + dd * dd);
                    ++count;
                }
                delta += sum / count - terms_[static_cast<size_t>(y) * w_ + x];
            }
        }
        const double n = static_cast<double>(w_) * h_;
        return 1.0 - (term_sum_ + delta) / n;
    }

private:
    PatternIntensityParams params_;
    std::vector<std::pair<int, int>> offs_;
    double sigma2_;
    int w_ = 0, h_ = 0;
    std::vector<double> diff_;
    std::vector<double> terms_;
    double term_sum_ = 0.0;
};

class SSDEngine final : public SimilarityEngine {
public:
    double evaluate(const Image2D& fixed, const Image2D& warped) const override {
        double s = 0.0;
        for (size_t k = 0; k < fixed.data.size(); ++k) {
            const double d = fixed.data[k] - warped.data[k];
            s += d * d;
        }
        return s / static_cast<double>(fixed.pixel_count());
    }

    void rebuild(const Image2D& fixed, const Image2D& warped) override {
        sum_ = 0.0;
        for (size_t k = 0; k < fixed.data.size(); ++k) {
            const double d = fixed.data[k] - warped.data[k];
            sum_ += d * d;
        }
    }

    double with_patch(const Image2D& fixed, const Image2D& warped, const Rect& rc,
                      const std::vector<double>& patch) const override {
        double delta = 0.0;
        const int pw = rc.width();
        for (int y = rc.y0; y <= rc.y1; ++y) {
            for (int x = rc.x0; x <= rc.x1; ++x) {
                const double od = fixed.at(x, y) - warped.at(x, y);
                const double nd = fixed.at(x, y) - patch[static_cast<size_t>(y - rc.y0) * pw + (x - rc.x0)];
                delta += nd * nd - od * od;
            }
        }
        return (sum_ + delta) / static_cast<double>(fixed.pixel_count());
    }

private:
    double sum_ = 0.0;
};

class NCCEngine final : public SimilarityEngine {
public:
    double evaluate(const Image2D& fixed, const Image2D& warped) const override {
        return 1.0 - ncc_value(fixed, warped);
    }

    void rebuild(const Image2D& fixed, const Image2D& warped) override {
        n_ = static_cast<double>(fixed.pixel_count());
        sa_ = saa_ = sb_ = sbb_ = sab_ = 0.0;
        for (size_t k = 0; k < fixed.data.size(); ++k) {
            const double a = fixed.data[k];
            const double b = warped.data[k];
            sa_ += a;
            saa_ += a * a;
            sb_ += b;
            sbb_ += b * b;
            sab_ += a * b;
        }
        if (from_sums(sb_, sbb_, sab_) == infinity())
            throw std::invalid_argument("ncc: zero-variance image");
    }

    double with_patch(const Image2D& fixed, const Image2D& warped, const Rect& rc,
                      const std::vector<double>& patch) const override {
        double sb = sb_, sbb = sbb_, sab = sab_;
        const int pw = rc.width();
        for (int y = rc.y0; y <= rc.y1; ++y) {
            for (int x = rc.x0; x <= rc.x1; ++x) {
                const double a = fixed.at(x, y);
                const double ob = warped.at(x, y);
                const double nb = patch[static_cast<size_t>(y - rc.y0) * pw + (x - rc.x0)];
                sb += nb - ob;
                sbb += nb * nb - ob * ob;
                sab += a * (nb - ob);
            }
        }
        const double v = from_sums(sb, sbb, sab);
        return v == infinity() ? v : 1.0 - v;
    }

private:
    static double infinity() { return std::numeric_limits<double>::infinity(); }

    double ncc_value(const Image2D& a, const Image2D& b) const {
        return ncc(a, b);
    }

    double from_sums(double sb, double sbb, double sab) const {
        const double var_a = n_ * saa_ - sa_ * sa_;
        const double var_b = n_ * sbb - sb * sb;
        if (var_a <= 0.0 || var_b <= 0.0) return infinity();
        return (n_ * sab - sa_ * sb) / std::sqrt(var_a * var_b);
    }

    double n_ = 0.0;
    double sa_ = 0.0, saa_ = 0.0;
    double sb_ = 0.0, sbb_ = 0.0, sab_ = 0.0;
};

class NMIEngine final : public SimilarityEngine {
public:
    explicit NMIEngine(int bins) : bins_(bins) {
        if (bins < 2) throw std::invalid_argument("nmi: bins must be >= 2");
    }

    double evaluate(const Image2D& fixed, const Image2D& warped) const override {
        // Full recomputation with freshly derived bin ranges.
        NMIEngine tmp(bins_);
        tmp.rebuild(fixed, warped);
        return 2.0 - tmp.nmi_from_counts(tmp.joint_);
    }

    void rebuild(const Image2D& fixed, const Image2D& warped) override {
        const auto [alo, ahi] = std::minmax_element(fixed.data.begin(), fixed.data.end());
        const auto [blo, bhi] = std::minmax_element(warped.data.begin(), warped.data.end());
        if (*ahi <= *alo || *bhi <= *blo)
            throw std::invalid_argument("nmi: constant image");
        a_lo_ = *alo; a_w_ = (*ahi - a_lo_) / bins_;
        b_lo_ = *blo; b_w_ = (*bhi - b_lo_) / bins_;
        n_ = static_cast<double>(fixed.pixel_count());
        joint_.assign(static_cast<size_t>(bins_) * bins_, 0);
        for (size_t k = 0; k < fixed.data.size(); ++k) {
            ++joint_[static_cast<size_t>(bin_a(fixed.data[k])) * bins_ + bin_b(warped.data[k])];
        }
    }

    double with_patch(const Image2D& fixed, const Image2D& warped, const Rect& rc,
                      const std::vector<double>& patch) const override {
        std::vector<long> joint = joint_;
        const int pw = rc.width();
        for (int y = rc.y0; y <= rc.y1; ++y) {
            for (int x = rc.x0; x <= rc.x1; ++x) {
                const int ba = bin_a(fixed.at(x, y));
                --joint[static_cast<size_t>(ba) * bins_ + bin_b(warped.at(x, y))];
                ++joint[static_cast<size_t>(ba) * bins_ +
                        bin_b(patch[static_cast<size_t>(y - rc.y0) * pw + (x - rc.x0)])];
            }
        }
        return 2.0 - nmi_from_counts(joint);
    }

private:
    int bin_a(double v) const { return std::clamp(static_cast<int>((v - a_lo_) / a_w_), 0, bins_ - 1); }
    int bin_b(double v) const { return std::clamp(static_cast<int>((v - b_lo_) / b_w_), 0, bins_ - 1); }

    double nmi_from_counts(const std::vector<long>& joint) const {
        std::vector<long> ra(bins_, 0), rb(bins_, 0);
        for (int i = 0; i < bins_; ++i) {
            for (int j = 0; j < bins_; ++j) {
                const long c = joint[static_cast<size_t>(i) * bins_ + j];
                ra[i] += c;
                rb[j] += c;
            }
        }
        double ha = 0.0, hb = 0.0, hab = 0.0;
        for (long c : ra) if (c > 0) { const double p = c / n_; ha -= p * std::log2(p); }
        for (long c : rb) if (c > 0) { const double p = c / n_; hb -= p * std::log2(p); }
        for (long c : joint) if (c > 0) { const double p = c / n_; hab -= p * std::log2(p); }
        if (hab <= 0.0) return 2.0; // both images constant within one bin pair
        return (ha + hb) / hab;
    }

    int bins_;
    double a_lo_ = 0.0, a_w_ = 1.0;
    double b_lo_ = 0.0, b_w_ = 1.0;
    double n_ = 0.0;
    std::vector<long> joint_;
};

std::unique_ptr<SimilarityEngine> make_engine(const FFDConfig& cfg) {
    switch (cfg.similarity) {
        case SimilarityKind::PatternIntensity:
            return std::make_unique<PatternIntensityEngine>(cfg.pi_params);
        case SimilarityKind::SSD: return std::make_unique<SSDEngine>();
        case SimilarityKind::NCC: return std::make_unique<NCCEngine>();
        case SimilarityKind::NMI: return std::make_unique<NMIEngine>(cfg.nmi_bins);
    }
    throw std::logic_error("unknown similarity kind");
}

class FFDOptimState {
public:
    FFDOptimState(const Image2D& fixed, const Image2D& moving, FFDGrid grid, const FFDConfig& cfg)
        : fixed_(fixed), moving_(moving), grid_(std::move(grid)), cfg_(cfg),
          ax_(build_axis_table(fixed.width, grid_.origin_x, grid_.spacing_x, grid_.nx, "optimize_ffd")),
          ay_(build_axis_table(fixed.height, grid_.origin_y, grid_.spacing_y, grid_.ny, "optimize_ffd")),
          engine_(make_engine(cfg)) {
        warped_ = warp_with_tables();
        engine_->rebuild(fixed_, warped_);
        rebuild_bending();
        cost_ = engine_->evaluate(fixed_, warped_) + cfg_.lambda * be_sum_ / pixel_n();
    }

    double cost() const { return cost_; }
    const FFDGrid& grid() const { return grid_; }

    std::vector<double> gradient() {
        const double delta = cfg_.gradient_delta;
        std::vector<double> g(static_cast<size_t>(grid_.nx) * grid_.ny * 2);
        for (int cj = 0; cj < grid_.ny; ++cj) {
            for (int ci = 0; ci < grid_.nx; ++ci) {
                for (int comp = 0; comp < 2; ++comp) {
                    const double cp = probe(ci, cj, comp, delta);
                    const double cm = probe(ci, cj, comp, -delta);
                    g[(static_cast<size_t>(cj) * grid_.nx + ci) * 2 + comp] = (cp - cm) / (2.0 * delta);
                }
            }
        }
        return g;
    }

    /// Cost of grid with all displacements moved by step * dir (dir indexed
    /// like gradient()). Does not change state.
    double candidate_cost(const std::vector<double>& dir, double step,
                          Image2D& cand_warped_out) {
        apply_direction(dir, step);
        cand_warped_out = warp_with_tables();
        double be = 0.0;
        for (int y = 0; y < fixed_.height; ++y)
            for (int x = 0; x < fixed_.width; ++x) be += bending_density(grid_, ax_, ay_, x, y);
        const double c = engine_->evaluate(fixed_, cand_warped_out) + cfg_.lambda * be / pixel_n();
        apply_direction(dir, -step);
        return c;
    }

    void accept(const std::vector<double>& dir, double step, Image2D cand_warped, double cand_cost) {
        apply_direction(dir, step);
        warped_ = std::move(cand_warped);
        engine_->rebuild(fixed_, warped_);
        rebuild_bending();
        cost_ = cand_cost;
    }

private:
    double pixel_n() const { return static_cast<double>(fixed_.width) * fixed_.height; }

    Image2D warp_with_tables() const {
        Image2D out(fixed_.width, fixed_.height, 0.0, moving_.spacing_x, moving_.spacing_y);
        for (int y = 0; y < out.height; ++y) {
            for (int x = 0; x < out.width; ++x) {
                const Point2 d = blend_displacement(grid_, ax_, ay_, x, y);
                out.at(x, y) = bilinear_sample(moving_, x + d.x, y + d.y);
            }
        }
        return out;
    }

    void rebuild_bending() {
        be_.assign(fixed_.pixel_count(), 0.0);
        be_sum_ = 0.0;
        for (int y = 0; y < fixed_.height; ++y) {
            for (int x = 0; x < fixed_.width; ++x) {
                const double v = bending_density(grid_, ax_, ay_, x, y);
                be_[static_cast<size_t>(y) * fixed_.width + x] = v;
                be_sum_ += v;
            }
        }
    }

    // Pixel support of control (ci, cj), widened by one pixel for safety.
    Rect support(int ci, int cj) const {
        Rect rc;
        rc.x0 = static_cast<int>(std::ceil(grid_.origin_x + (ci - 2) * grid_.spacing_x)) - 1;
        rc.x1 = static_cast<int>(std::ceil(grid_.origin_x + (ci + 2) * grid_.spacing_x));
        rc.y0 = static_cast<int>(std::ceil(grid_.origin_y + (cj - 2) * grid_.spacing_y)) - 1;
        rc.y1 = static_cast<int>(std::ceil(grid_.origin_y + (cj + 2) * grid_.spacing_y));
        return clip_rect(rc, fixed_.width, fixed_.height);
    }

    double probe(int ci, int cj, int comp, double delta) {
        Point2& d = grid_.disp(ci, cj);
        double& val = comp == 0 ? d.x : d.y;
        const double saved = val;
        val = saved + delta;

        const Rect rc = support(ci, cj);
        double c;
        if (rc.empty()) {
            c = cost_;
        } else {
            std::vector<double> patch(static_cast<size_t>(rc.width()) * rc.height());
            double dbe = 0.0;
            for (int y = rc.y0; y <= rc.y1; ++y) {
                for (int x = rc.x0; x <= rc.x1; ++x) {
                    const Point2 disp = blend_displacement(grid_, ax_, ay_, x, y);
                    patch[static_cast<size_t>(y - rc.y0) * rc.width() + (x - rc.x0)] =
                        bilinear_sample(moving_, x + disp.x, y + disp.y);
                    dbe += bending_density(grid_, ax_, ay_, x, y) -
                           be_[static_cast<size_t>(y) * fixed_.width + x];
                }
            }
            const double dsim = engine_->with_patch(fixed_, warped_, rc, patch);
            c = dsim + cfg_.lambda * (be_sum_ + dbe) / pixel_n();
        }
        val = saved;
        return c;
    }

    void apply_direction(const std::vector<double>& dir, double step) {
        for (size_t k = 0; k < grid_.displacements.size(); ++k) {
            grid_.displacements[k].x += step * dir[2 * k];
            grid_.displacements[k].y += step * dir[2 * k + 1];
        }
    }

    const Image2D& fixed_;
    const Image2D& moving_;
    FFDGrid grid_;
    FFDConfig cfg_;
    AxisTable ax_, ay_;
    std::unique_ptr<SimilarityEngine> engine_;
    Image2D warped_;
    std::vector<double> be_;
    double be_sum_ = 0.0;
    double cost_ = 0.0;
};

} // namespace

std::vector<double> ffd_cost_gradient(const Image2D& fixed, const Image2D& moving,
                                      const FFDGrid& grid, const FFDConfig& cfg) {
    if (!fixed.same_size(moving)) throw std::invalid_argument("ffd_cost_gradient: dimension mismatch");
    FFDOptimState state(fixed, moving, grid, cfg);
    return state.gradient();
}

FFDGrid optimize_ffd(const Image2D& fixed, const Image2D& moving, const FFDConfig& cfg,
                     FFDTrace* trace) {
    if (!fixed.same_size(moving)) throw std::invalid_argument("optimize_ffd: dimension mismatch");
    if (cfg.max_iters < 1) throw std::invalid_argument("optimize_ffd: max_iters must be >= 1");

    FFDGrid grid = FFDGrid::for_image(fixed.width, fixed.height, cfg.grid_spacing_x, cfg.grid_spacing_y);
    FFDOptimState state(fixed, moving, std::move(grid), cfg);
    if (trace) trace->cost_values.push_back(state.cost());

    const double min_step = 1e-3;
    double step = cfg.step_size;
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        std::vector<double> g = state.gradient();
        double gmax = 0.0;
        for (double v : g) gmax = std::max(gmax, std::abs(v));
        if (gmax == 0.0) break;
        std::vector<double> dir(g.size());
        for (size_t k = 0; k < g.size(); ++k) dir[k] = -g[k] / gmax; // descent, max move = step px

        bool accepted = false;
        const double before = state.cost();
        while (step >= min_step) {
            Image2D cand_warped;
            const double c = state.candidate_cost(dir, step, cand_warped);
            if (c < before - 1e-15) {
                state.accept(dir, step, std::move(cand_warped), c);
                if (trace) trace->cost_values.push_back(c);
                accepted = true;
                step = std::min(step * 2.0, cfg.step_size);
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        if (before - state.cost() < cfg.step_tolerance) break;
    }
    return state.grid();
}

void save_ffd(const FFDGrid& grid, const std::string& path) {
    grid.validate();
    std::ostringstream out;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%d %d %.17g %.17g %.17g %.17g\n", grid.nx, grid.ny,
                  grid.spacing_x, grid.spacing_y, grid.origin_x, grid.origin_y);
    out << buf;
    for (const Point2& d : grid.displacements) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g\n", d.x, d.y);
        out << buf;
    }
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::trunc);
        if (!f) throw std::runtime_error("save_ffd: cannot open '" + tmp + "'");
        f << out.str();
    }
    std::filesystem::rename(tmp, path);
}

FFDGrid load_ffd(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_ffd: cannot open '" + path + "'");
    FFDGrid g;
    if (!(in >> g.nx >> g.ny >> g.spacing_x >> g.spacing_y >> g.origin_x >> g.origin_y))
        throw std::runtime_error("load_ffd: malformed header in '" + path + "'");
    if (g.nx < 4 || g.ny < 4 || g.spacing_x <= 0.0 || g.spacing_y <= 0.0)
        throw std::runtime_error("load_ffd: invalid header values in '" + path + "'");
    g.displacements.resize(static_cast<size_t>(g.nx) * g.ny);
    for (Point2& d : g.displacements) {
        if (!(in >> d.x >> d.y))
            throw std::runtime_error("load_ffd: truncated displacement list in '" + path + "'");
    }
    g.validate();
    return g;
}

} // namespace lgeseg
