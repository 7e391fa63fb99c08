#ifndef LGESEG_AFFINE_HPP
#define LGESEG_AFFINE_HPP

#include <string>
#include <vector>

#include "lgeseg/geometry.hpp"
#include "lgeseg/image.hpp"

namespace lgeseg {

/// Top two rows of a homogeneous 2D affine matrix (third row is 0 0 1).
/// a13/a23 are in pixels, the other entries dimensionless.
struct AffineTransform2D {
    double a11 = 1.0, a12 = 0.0, a13 = 0.0;
    double a21 = 0.0, a22 = 1.0, a23 = 0.0;

    static AffineTransform2D identity() { return {}; }

    double determinant() const { return a11 * a22 - a12 * a21; }

    Point2 apply(const Point2& p) const {
        return {a11 * p.x + a12 * p.y + a13, a21 * p.x + a22 * p.y + a23};
    }

    /// Throws std::invalid_argument when singular.
    AffineTransform2D inverse() const;
};

struct AffineConfig {
    double eps_scale = 0.1;       // |a11-1|, |a22-1| bound
    double eps_translate = 10.0;  // |a13|, |a23| bound, pixels
    int max_iters = 200;
    double step_tolerance = 1e-4; // smallest accepted line-search step (normalized units)
};

/// Optimization trace for inspection in tests.
struct AffineTrace {
    std::vector<double> ncc_values; // objective after each accepted step (front = initial)
};

/// Pearson normalized cross-correlation in [-1, 1].
double ncc(const Image2D& a, const Image2D& b);

/// Componentwise clamp of a11/a22 and a13/a23 strictly inside the
/// feasible box (open-interval bounds honored by a machine-epsilon margin).
AffineTransform2D project_constraints(const AffineTransform2D& A, const AffineConfig& cfg);

/// True when A satisfies the strict feasibility inequalities.
bool affine_is_feasible(const AffineTransform2D& A, const AffineConfig& cfg);

/// Projected gradient ascent on ncc(fixed, warp_affine(moving, A)),
/// starting from the identity. Central finite-difference gradients and
/// backtracking line search; the objective trace is non-decreasing.
AffineTransform2D estimate_affine(const Image2D& fixed, const Image2D& moving,
                                  const AffineConfig& cfg, AffineTrace* trace = nullptr);

/// Serialization: one ASCII line "a11 a12 a13 a21 a22 a23".
void save_affine(const AffineTransform2D& A, const std::string& path);
AffineTransform2D load_affine(const std::string& path);

} // namespace lgeseg

#endif
