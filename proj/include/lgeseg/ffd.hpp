#ifndef LGESEG_FFD_HPP
#define LGESEG_FFD_HPP

#include <string>
#include <vector>

#include "lgeseg/geometry.hpp"
#include "lgeseg/image.hpp"

namespace lgeseg {

/// Uniform cubic B-spline control lattice carrying 2D displacements (pixels).
///
/// Control point at array index (i, j) sits at pixel position
/// (origin_x + i * spacing_x, origin_y + j * spacing_y). A grid built with
/// for_image places the origin one cell outside the image so the 4x4 blend
/// window is in range for every pixel; the covered domain is
/// [origin + spacing, origin + (n - 2) * spacing) per axis.
struct FFDGrid {
    double spacing_x = 8.0;
    double spacing_y = 8.0;
    int nx = 0;
    int ny = 0;
    double origin_x = -8.0;
    double origin_y = -8.0;
    std::vector<Point2> displacements; // row-major, index j * nx + i

    static FFDGrid for_image(int width, int height, double sx = 8.0, double sy = 8.0);

    Point2& disp(int i, int j) { return displacements[static_cast<size_t>(j) * nx + i]; }
    const Point2& disp(int i, int j) const { return displacements[static_cast<size_t>(j) * nx + i]; }

    bool covers(double x, double y) const;
    /// True when every pixel of a width x height image is covered.
    bool covers_image(int width, int height) const;

    void validate() const;
};

struct PatternIntensityParams {
    int r = 3;          // neighborhood radius, pixels
    double sigma = 10.0; // intensity units
};

enum class SimilarityKind { PatternIntensity, SSD, NCC, NMI };

struct FFDConfig {
    double lambda = 0.2;                 // bending-energy weight
    PatternIntensityParams pi_params;
    double grid_spacing_x = 8.0;         // pixels per control cell
    double grid_spacing_y = 8.0;
    int max_iters = 100;
    double step_size = 2.0;              // initial line-search step, pixels
    double step_tolerance = 1e-7;        // stop when the per-iteration cost decrease falls below
    double gradient_delta = 0.5;         // central finite-difference step, pixels
    SimilarityKind similarity = SimilarityKind::PatternIntensity;
    int nmi_bins = 32;                   // joint-histogram bins when similarity == NMI
};

struct FFDTrace {
    std::vector<double> cost_values; // cost after each accepted step (front = initial)
};

/// Uniform cubic B-spline basis function l in 0..3 evaluated at u in [0, 1).
double bspline_basis(int l, double u);
/// First and second derivatives of the basis with respect to u.
double bspline_basis_d1(int l, double u);
double bspline_basis_d2(int l, double u);

/// Tensor-product B-spline displacement: maps (x, y) to (x, y) plus the
/// blend of the 4x4 neighboring control displacements. Throws when the
/// point is outside the covered domain.
Point2 ffd_transform_point(const FFDGrid& grid, double x, double y);

/// Neighborhood-structure similarity of the difference image a - b, in (0, 1].
/// Disk neighborhoods are clipped at image borders (per-pixel N_r).
double pattern_intensity(const Image2D& a, const Image2D& b, const PatternIntensityParams& p);

/// Discrete thin-plate bending energy of the displacement field, evaluated
/// from analytic second derivatives at pixel centers and normalized by
/// pixel count.
double bending_energy(const FFDGrid& grid, int img_w, int img_h);

/// (1 - pattern_intensity(fixed, warp_ffd(moving, grid))) + lambda * bending_energy.
double ffd_cost(const Image2D& fixed, const Image2D& moving, const FFDGrid& grid,
                const FFDConfig& cfg);

/// Central finite-difference gradient of ffd_cost with respect to every
/// control displacement component, as used internally by optimize_ffd.
/// Layout: [d/d(dx_00), d/d(dy_00), d/d(dx_10), ...] row-major over (i, j).
std::vector<double> ffd_cost_gradient(const Image2D& fixed, const Image2D& moving,
                                      const FFDGrid& grid, const FFDConfig& cfg);

/// Gradient descent over all control displacements with backtracking line
/// search; the cost sequence is non-increasing. Returns the optimized grid.
FFDGrid optimize_ffd(const Image2D& fixed, const Image2D& moving, const FFDConfig& cfg,
                     FFDTrace* trace = nullptr);

/// Serialization: header "nx ny sx sy origin_x origin_y" then nx*ny lines
/// "dx dy" in row-major order.
void save_ffd(const FFDGrid& grid, const std::string& path);
FFDGrid load_ffd(const std::string& path);

} // namespace lgeseg

#endif
