#include "lgeseg/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "lgeseg/pgm_io.hpp"

namespace lgeseg {

namespace {

double parse_double(const std::string& key, const std::string& s) {
    size_t pos = 0;
    double v = 0.0;
    try { v = std::stod(s, &pos); } catch (const std::exception&) { pos = 0; }
    if (pos != s.size()) throw std::runtime_error("config: bad value for '" + key + "'");
    return v;
}

int parse_int(const std::string& key, const std::string& s) {
    size_t pos = 0;
    long v = 0;
    try { v = std::stol(s, &pos); } catch (const std::exception&) { pos = 0; }
    if (pos != s.size()) throw std::runtime_error("config: bad value for '" + key + "'");
    return static_cast<int>(v);
}

SimilarityKind parse_similarity(const std::string& s) {
    if (s == "pattern_intensity") return SimilarityKind::PatternIntensity;
    if (s == "ssd") return SimilarityKind::SSD;
    if (s == "ncc") return SimilarityKind::NCC;
    if (s == "nmi") return SimilarityKind::NMI;
    throw std::runtime_error("config: unknown similarity '" + s + "'");
}

} // namespace

PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
    PipelineConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: malformed line " + std::to_string(lineno) +
                                     " in '" + path + "'");
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);

        if (key == "histogram_bins") cfg.histogram_bins = parse_int(key, val);
        else if (key == "out_dir") cfg.out_dir = val;
        else if (key == "affine.eps_scale") cfg.affine.eps_scale = parse_double(key, val);
        else if (key == "affine.eps_translate") cfg.affine.eps_translate = parse_double(key, val);
        else if (key == "affine.max_iters") cfg.affine.max_iters = parse_int(key, val);
        else if (key == "affine.step_tolerance") cfg.affine.step_tolerance = parse_double(key, val);
        else if (key == "ffd.lambda") cfg.ffd.lambda = parse_double(key, val);
        else if (key == "ffd.r") cfg.ffd.pi_params.r = parse_int(key, val);
        else if (key == "ffd.sigma") cfg.ffd.pi_params.sigma = parse_double(key, val);
        else if (key == "ffd.grid_spacing") {
            cfg.ffd.grid_spacing_x = cfg.ffd.grid_spacing_y = parse_double(key, val);
        } else if (key == "ffd.grid_spacing_x") cfg.ffd.grid_spacing_x = parse_double(key, val);
        else if (key == "ffd.grid_spacing_y") cfg.ffd.grid_spacing_y = parse_double(key, val);
        else if (key == "ffd.max_iters") cfg.ffd.max_iters = parse_int(key, val);
        else if (key == "ffd.step_size") cfg.ffd.step_size = parse_double(key, val);
        else if (key == "ffd.step_tolerance") cfg.ffd.step_tolerance = parse_double(key, val);
        else if (key == "ffd.gradient_delta") cfg.ffd.gradient_delta = parse_double(key, val);
        else if (key == "ffd.similarity") cfg.ffd.similarity = parse_similarity(val);
        else if (key == "ffd.nmi_bins") cfg.ffd.nmi_bins = parse_int(key, val);
        else if (key == "force.gamma") cfg.force.gamma = parse_double(key, val);
        else if (key == "force.alpha") cfg.force.alpha = parse_double(key, val);
        else if (key == "force.beta") cfg.force.beta = parse_double(key, val);
        else if (key == "force.theta") cfg.force.theta = parse_double(key, val);
        else if (key == "force.band") cfg.force.band = parse_int(key, val);
        else if (key == "force.iters") cfg.force.iters = parse_int(key, val);
        else if (key == "force.edge_noise_floor") cfg.force.edge_noise_floor = parse_double(key, val);
        else if (key == "force.min_move") cfg.force.min_move = parse_double(key, val);
        else throw std::runtime_error("config: unknown key '" + key + "'");
    }
    return cfg;
}

std::vector<CasePair> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("manifest: cannot open '" + path + "'");
    std::vector<CasePair> cases;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, '\t')) fields.push_back(f);
        if (fields.size() != 5)
            throw std::runtime_error("manifest: line " + std::to_string(lineno) +
                                     " must have 5 tab-separated fields");
        cases.push_back({fields[0], fields[1], fields[2], fields[3], fields[4]});
    }
    return cases;
}

Contour transform_contour(const Contour& c, const AffineTransform2D& A) {
    std::vector<Point2> verts(c.vertices.size());
    for (size_t k = 0; k < verts.size(); ++k) verts[k] = A.apply(c.vertices[k]);
    return make_contour(c.kind, std::move(verts));
}

Contour transform_contour(const Contour& c, const FFDGrid& grid) {
    std::vector<Point2> verts(c.vertices.size());
    for (size_t k = 0; k < verts.size(); ++k) {
        verts[k] = ffd_transform_point(grid, c.vertices[k].x, c.vertices[k].y);
    }
    return make_contour(c.kind, std::move(verts));
}

EvalReport evaluate(const ContourPair& auto_pair, const ContourPair& manual_pair, int w, int h) {
    EvalReport r;
    r.dice_endo = dice(rasterize(auto_pair.endo, w, h), rasterize(manual_pair.endo, w, h));
    r.dice_epi = dice(rasterize(auto_pair.epi, w, h), rasterize(manual_pair.epi, w, h));
    r.dice_myo = dice(myocardium_mask(auto_pair, w, h), myocardium_mask(manual_pair, w, h));
    contour_distance(auto_pair.endo, manual_pair.endo, r.avg_dist_endo, r.max_dist_endo);
    contour_distance(auto_pair.epi, manual_pair.epi, r.avg_dist_epi, r.max_dist_epi);
    return r;
}

namespace {

void write_text_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open '" + tmp + "' for writing");
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

void save_image_auto(const Image2D& img, const std::string& path) {
    const double mx = *std::max_element(img.data.begin(), img.data.end());
    save_pgm(img, path, mx > 255.0 ? 65535 : 255);
}

void check_contour_in_image(const Contour& c, const Image2D& img, const std::string& what) {
    for (const Point2& p : c.vertices) {
        if (p.x < 0.0 || p.x > img.width - 1.0 || p.y < 0.0 || p.y > img.height - 1.0)
            throw std::runtime_error(what + ": contour coordinates outside the cine image");
    }
}

Contour scale_contour(const Contour& c, double sx, double sy) {
    std::vector<Point2> verts(c.vertices.size());
    for (size_t k = 0; k < verts.size(); ++k) verts[k] = {c.vertices[k].x * sx, c.vertices[k].y * sy};
    return make_contour(c.kind, std::move(verts));
}

Contour shift_contour(const Contour& c, double dx, double dy) {
    std::vector<Point2> verts(c.vertices.size());
    for (size_t k = 0; k < verts.size(); ++k) verts[k] = {c.vertices[k].x + dx, c.vertices[k].y + dy};
    return make_contour(c.kind, std::move(verts));
}

ContourPair plain_pair(Contour endo, Contour epi) {
    ContourPair p;
    p.endo = std::move(endo);
    p.epi = std::move(epi);
    return p;
}

} // namespace

CaseResult run_case(const CasePair& cp, const PipelineConfig& cfg) {
    CaseResult result;
    result.id = cp.id;

    const std::filesystem::path case_dir = std::filesystem::path(cfg.out_dir) / cp.id;
    std::filesystem::create_directories(case_dir);
    auto out_path = [&](const std::string& name) { return (case_dir / name).string(); };

    std::string stage = "load";
    const auto t_start = std::chrono::steady_clock::now();
    auto last_mark = t_start;
    auto mark = [&](const std::string& name) {
        const auto now = std::chrono::steady_clock::now();
        result.timings_ms.emplace_back(
            name, std::chrono::duration<double, std::milli>(now - last_mark).count());
        last_mark = now;
    };

    try {
        Image2D cine = load_pgm(cp.cine_image_path);
        Image2D lge = load_pgm(cp.lge_image_path);
        Contour endo = load_contour(cp.cine_endo_path);
        Contour epi = load_contour(cp.cine_epi_path);
        if (endo.kind != ContourKind::Endocardial || epi.kind != ContourKind::Epicardial)
            throw std::runtime_error("case contours have unexpected kinds");
        check_contour_in_image(endo, cine, "endo");
        check_contour_in_image(epi, cine, "epi");
        mark("load");

        // -- preprocessing: common resolution (the LGE spacing), histogram
        //    specification of the LGE toward the cine, size normalization of
        //    the cine to the LGE dimensions.
        stage = "preprocess";
        const double rx = cine.spacing_x / lge.spacing_x;
        const double ry = cine.spacing_y / lge.spacing_y;
        Image2D cine_r = resample(cine, lge.spacing_x, lge.spacing_y);
        endo = scale_contour(endo, rx, ry);
        epi = scale_contour(epi, rx, ry);

        Image2D lge_spec = histogram_specify(lge, cine_r, cfg.histogram_bins);

        int ox = 0, oy = 0;
        center_crop_pad_offset(cine_r, lge.width, lge.height, ox, oy);
        Image2D cine_n = center_crop_pad(cine_r, lge.width, lge.height);
        endo = shift_contour(endo, ox, oy);
        epi = shift_contour(epi, ox, oy);

        result.lge_preprocessed = lge_spec;
        result.stages.overlay = plain_pair(endo, epi);
        save_image_auto(cine_n, out_path("preproc_cine.pgm"));
        save_image_auto(lge_spec, out_path("preproc_lge.pgm"));
        save_contour(endo, out_path("stage_b_endo.ctr"));
        save_contour(epi, out_path("stage_b_epi.ctr"));
        mark("preprocess");

        // -- coarse alignment
        stage = "affine";
        result.affine = estimate_affine(lge_spec, cine_n, cfg.affine);
        Image2D cine_aff = warp_affine(cine_n, result.affine);
        endo = transform_contour(endo, result.affine);
        epi = transform_contour(epi, result.affine);
        result.stages.after_affine = plain_pair(endo, epi);
        save_affine(result.affine, out_path("affine.aff"));
        save_image_auto(cine_aff, out_path("cine_affine.pgm"));
        save_contour(endo, out_path("stage_c_endo.ctr"));
        save_contour(epi, out_path("stage_c_epi.ctr"));
        mark("affine");

        // -- nonrigid refinement. The aligned cine is the fixed image so the
        //    optimized grid is directly the forward point map carrying the
        //    contours from the cine frame onto the LGE frame.
        stage = "ffd";
        result.ffd = optimize_ffd(cine_aff, lge_spec, cfg.ffd);
        endo = transform_contour(endo, result.ffd);
        epi = transform_contour(epi, result.ffd);
        result.stages.after_ffd = plain_pair(endo, epi);
        save_ffd(result.ffd, out_path("ffd.ffd"));
        save_contour(endo, out_path("stage_d_endo.ctr"));
        save_contour(epi, out_path("stage_d_epi.ctr"));
        mark("ffd");

        // -- local deformation on the LGE image alone
        stage = "contour";
        ContourPair pair = make_contour_pair(endo, epi);
        ContourPair final_pair = deform(pair, lge_spec, cfg.force);
        result.stages.final_pair = final_pair;
        save_contour(final_pair.endo, out_path("stage_e_endo.ctr"));
        save_contour(final_pair.epi, out_path("stage_e_epi.ctr"));
        save_contour(final_pair.endo, out_path("endo.ctr"));
        save_contour(final_pair.epi, out_path("epi.ctr"));
        write_text_atomic(out_path("pair.meta"), "endo=endo.ctr\nepi=epi.ctr\n");
        mark("contour");

        std::ostringstream timings;
        for (const auto& [name, ms] : result.timings_ms) {
            char buf[128];
            std::snprintf(buf, sizeof(buf), "%s=%.3f ms\n", name.c_str(), ms);
            timings << buf;
        }
        write_text_atomic(out_path("timings.txt"), timings.str());
    } catch (const std::exception& e) {
        throw std::runtime_error("[stage=" + stage + "] case '" + cp.id + "': " + e.what());
    }
    return result;
}

std::vector<MetricComparison> compare_metrics(const Image2D& prior_frame, const Image2D& other,
                                              const ContourPair& priors, const ContourPair& truth,
                                              const FFDConfig& base_cfg) {
    const std::pair<SimilarityKind, const char*> kinds[] = {
        {SimilarityKind::PatternIntensity, "pattern_intensity"},
        {SimilarityKind::SSD, "ssd"},
        {SimilarityKind::NCC, "ncc"},
        {SimilarityKind::NMI, "nmi"},
    };
    std::vector<MetricComparison> report;
    for (const auto& [kind, name] : kinds) {
        FFDConfig cfg = base_cfg;
        cfg.similarity = kind;
        const FFDGrid grid = optimize_ffd(prior_frame, other, cfg);
        const Contour endo = transform_contour(priors.endo, grid);
        const Contour epi = transform_contour(priors.epi, grid);
        double avg_endo = 0.0, mx = 0.0, avg_epi = 0.0;
        contour_distance(endo, truth.endo, avg_endo, mx);
        contour_distance(epi, truth.epi, avg_epi, mx);
        report.push_back({name, 0.5 * (avg_endo + avg_epi)});
    }
    return report;
}

} // namespace lgeseg
