#ifndef LGESEG_CONTOUR_HPP
#define LGESEG_CONTOUR_HPP

#include <optional>
#include <string>
#include <vector>

#include "lgeseg/geometry.hpp"
#include "lgeseg/image.hpp"

namespace lgeseg {

enum class ContourKind { Endocardial, Epicardial };

/// Ordered closed polygon of mesh vertices, counterclockwise.
struct Contour {
    ContourKind kind = ContourKind::Endocardial;
    std::vector<Point2> vertices;
};

/// Builds a contour, normalizing orientation to counterclockwise and
/// validating simplicity and the minimum vertex count.
Contour make_contour(ContourKind kind, std::vector<Point2> vertices);
void validate_contour(const Contour& c);

/// Endo/epi pair with the per-endo-vertex initial offset vectors
/// (paired epi vertex minus endo vertex), captured once at construction.
struct ContourPair {
    Contour endo;
    Contour epi;
    std::vector<Point2> thickness_ref; // epi^0 - endo^0 per endo vertex
    std::vector<int> epi_pairing;      // paired epi vertex index per endo vertex
};

/// Validates containment (every endo vertex strictly inside epi) and captures
/// the thickness reference. The epi partner of an endo vertex is the epi
/// vertex closest to the outward radial ray through that endo vertex.
ContourPair make_contour_pair(Contour endo, Contour epi);

struct ForceConfig {
    double gamma = 0.7;  // damping
    double alpha = 0.35; // smoothness weight
    double beta = 0.15;  // edge weight
    double theta = 0.1;  // thickness weight
    int band = 4;        // radial search half-width, pixels
    int iters = 50;
    double edge_noise_floor = 5.0; // minimum step magnitude to produce a force
    double min_move = 0.05;        // early stop when the largest vertex move drops below
};

struct EdgePriors {
    double bright_threshold = 0.0; // intensities above count as enhanced (blood/scar)
    double noise_floor = 5.0;
};

struct ProfileSample {
    double t = 0.0;         // signed offset along the outward ray, pixels
    double intensity = 0.0;
};

struct EdgeHit {
    double t = 0.0;        // sub-pixel offset of the edge along the ray
    double strength = 0.0; // raw step magnitude (pre-normalization)
};

/// Area centroid of the endocardial polygon.
Point2 lv_center(const Contour& endo);

/// Image intensities at unit-pixel steps along the outward ray through the
/// vertex, over [-band, +band] around it.
std::vector<ProfileSample> radial_profile(const Image2D& img, const Point2& vertex,
                                          const Point2& center, int band);

/// Strongest intensity step along the profile. Epicardial contours take the
/// maximum-magnitude step; endocardial contours first look for an outward
/// brightness drop whose outer plateau stays above the brightness prior
/// (enhanced tissue beyond the blood pool) and prefer it when present.
/// Returns nothing when the best step is below the noise floor.
std::optional<EdgeHit> detect_edge_point(const std::vector<ProfileSample>& profile,
                                         ContourKind kind, const EdgePriors& priors);

struct ContourEdge {
    bool found = false;
    Point2 position; // detected edge point in image coordinates
    double omega = 0.0;
};

/// Edge detection for every vertex of a contour with the per-contour weight
/// normalization (largest raw step maps to omega = 1).
std::vector<ContourEdge> detect_contour_edges(const Image2D& img, const Contour& contour,
                                              const Point2& center, int band,
                                              const EdgePriors& priors);

/// Neighbor-midpoint pull decomposed along the local tangent (full weight)
/// and normal (half weight).
Point2 smoothness_force(const Contour& contour, size_t i);

/// omega * (edge_point - vertex); zero when no edge was found.
Point2 edge_force(const Point2& vertex, const ContourEdge& edge);

/// Thickness-preserving forces on the endo/epi vertices paired at index i.
struct ThicknessForces {
    Point2 on_endo;
    Point2 on_epi;
};
ThicknessForces thickness_force(const ContourPair& initial, const Contour& cur_endo,
                                const Contour& cur_epi, size_t i);

struct DeformTrace {
    std::vector<ContourPair> iterates;       // state after each iteration
    std::vector<double> max_vertex_move;     // per iteration
};

/// Alternating damped deformation: each iteration updates the epicardial
/// contour with the endocardial one frozen, then the endocardial contour
/// with the epicardial one frozen. Aborts with a diagnostic if a contour
/// self-intersects after an iteration.
ContourPair deform(const ContourPair& pair, const Image2D& img, const ForceConfig& cfg,
                   DeformTrace* trace = nullptr);

/// Otsu threshold over a sample set (maximizes between-class variance).
double otsu_threshold(const std::vector<double>& samples);

/// Contour file format: header "kind=<endo|epi> n=<count>" then n lines "x y".
void save_contour(const Contour& c, const std::string& path);
Contour load_contour(const std::string& path);

} // namespace lgeseg

#endif
