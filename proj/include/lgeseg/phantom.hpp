#ifndef LGESEG_PHANTOM_HPP
#define LGESEG_PHANTOM_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "lgeseg/affine.hpp"
#include "lgeseg/contour.hpp"
#include "lgeseg/image.hpp"

namespace lgeseg {

/// One Gaussian displacement bump of the synthetic deformation field.
struct BumpSpec {
    double x = 0.0;
    double y = 0.0;
    double dx = 0.0;
    double dy = 0.0;
};

/// Annular left-ventricle phantom: blood pool inside the endocardial radius,
/// myocardium between the radii, optional bright scar wedge (LGE side only).
/// The cine counterpart is produced by resampling the clean annulus through
/// the composed affine + bump deformation, and the prior contours are the
/// true contours carried through the inverse of that map.
struct PhantomSpec {
    int width = 128;
    int height = 128;
    double center_x = 64.0;
    double center_y = 64.0;
    double endo_radius = 18.0;
    double epi_radius = 27.0;
    double intensity_background = 20.0;
    double intensity_blood = 180.0;
    double intensity_myocardium = 60.0;
    double intensity_scar = 140.0;
    double scar_angle_center_deg = 30.0;
    double scar_angle_extent_deg = 0.0; // 0 disables the wedge
    double scar_transmural_depth = 0.5; // fraction of the wall, from the endo border outward
    double edge_width = 1.5;            // smooth boundary transition, pixels
    double noise_sigma = 0.0;
    AffineTransform2D affine;           // cine-side misalignment
    double bump_sigma = 14.0;           // Gaussian envelope of the bumps, pixels
    std::vector<BumpSpec> bumps;
    int contour_vertices = 80;

    void validate() const;
};

struct PhantomOutput {
    Image2D cine;
    Image2D lge;
    Contour true_endo;  // ground truth on the LGE frame
    Contour true_epi;
    Contour prior_endo; // a-priori contours on the cine frame
    Contour prior_epi;
};

/// Displacement of the phantom's synthetic bump field at a point.
Point2 phantom_bump_displacement(const PhantomSpec& spec, const Point2& p);

/// Analytic intensity of the annulus at a (real) position; with_scar selects
/// the LGE variant.
double phantom_intensity(const PhantomSpec& spec, const Point2& p, bool with_scar);

/// Deterministic per seed: same seed, bit-identical output.
PhantomOutput make_phantom(const PhantomSpec& spec, uint32_t seed);

/// Flat key=value spec file (same conventions as the pipeline config).
PhantomSpec load_phantom_spec(const std::string& path);

} // namespace lgeseg

#endif
