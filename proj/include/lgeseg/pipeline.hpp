#ifndef LGESEG_PIPELINE_HPP
#define LGESEG_PIPELINE_HPP

#include <string>
#include <vector>

#include "lgeseg/affine.hpp"
#include "lgeseg/contour.hpp"
#include "lgeseg/ffd.hpp"
#include "lgeseg/image.hpp"
#include "lgeseg/metrics.hpp"

namespace lgeseg {

struct CasePair {
    std::string cine_image_path;
    std::string lge_image_path;
    std::string cine_endo_path;
    std::string cine_epi_path;
    std::string id; // patient/slice identifier, used as the output subdirectory
};

struct PipelineConfig {
    AffineConfig affine;
    FFDConfig ffd;
    ForceConfig force;
    int histogram_bins = 256;
    std::string out_dir = "out";
};

/// Flat key=value config file; unknown keys are rejected. Missing keys keep
/// their defaults (the tabulated per-stage parameters).
PipelineConfig load_pipeline_config(const std::string& path);

/// Manifest: one case per line, tab-separated
/// "cine<TAB>lge<TAB>endo<TAB>epi<TAB>id".
std::vector<CasePair> load_manifest(const std::string& path);

/// Contour snapshots after each pipeline stage: (b) priors overlaid on the
/// LGE frame, (c) after affine, (d) after the FFD point map, (e) final.
struct StageContours {
    ContourPair overlay;
    ContourPair after_affine;
    ContourPair after_ffd;
    ContourPair final_pair;
};

struct CaseResult {
    std::string id;
    Image2D lge_preprocessed;
    StageContours stages;
    AffineTransform2D affine;
    FFDGrid ffd;
    std::vector<std::pair<std::string, double>> timings_ms;
};

/// Full coarse-to-fine run on one case: preprocessing (common resolution,
/// histogram specification of the LGE image toward the cine, size
/// normalization), constrained affine alignment, FFD refinement, then local
/// contour deformation on the LGE image. All intermediates are written
/// under <out_dir>/<id>/. Errors carry a [stage=...] tag.
CaseResult run_case(const CasePair& cp, const PipelineConfig& cfg);

/// Vertex-wise forward transforms used to propagate contours through the
/// registration stages.
Contour transform_contour(const Contour& c, const AffineTransform2D& A);
Contour transform_contour(const Contour& c, const FFDGrid& grid);

/// Fills an EvalReport from rasterized regions of size w x h plus symmetric
/// contour distances.
EvalReport evaluate(const ContourPair& auto_pair, const ContourPair& manual_pair, int w, int h);

struct MetricComparison {
    std::string metric;
    double mean_contour_error_px = 0.0;
};

/// Runs the FFD registration once per similarity metric (pattern intensity,
/// SSD, NCC, NMI; all with the same bending regularizer) and reports the
/// mean contour error of the propagated priors against the ground truth.
/// prior_frame is the image in whose frame the priors live; other is the
/// image warped during registration (the enhanced/LGE side).
std::vector<MetricComparison> compare_metrics(const Image2D& prior_frame, const Image2D& other,
                                              const ContourPair& priors, const ContourPair& truth,
                                              const FFDConfig& base_cfg);

} // namespace lgeseg

#endif
