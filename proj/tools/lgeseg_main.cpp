// Batch CLI for the coarse-to-fine LGE myocardial segmentation pipeline.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "lgeseg/contour.hpp"
#include "lgeseg/metrics.hpp"
#include "lgeseg/pgm_io.hpp"
#include "lgeseg/phantom.hpp"
#include "lgeseg/pipeline.hpp"

namespace fs = std::filesystem;
using namespace lgeseg;

namespace {

void write_text(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open '" + tmp + "' for writing");
        out << content;
    }
    fs::rename(tmp, path);
}

int cmd_segment(const std::string& manifest_path, const std::string& config_path,
                const std::string& out_dir) {
    PipelineConfig cfg;
    if (!config_path.empty()) cfg = load_pipeline_config(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;

    const auto cases = load_manifest(manifest_path);
    if (cases.empty()) {
        std::cerr << "segment: manifest contains no cases\n";
        return 1;
    }
    int failures = 0;
    for (const CasePair& cp : cases) {
        try {
            run_case(cp, cfg);
            std::cout << "case '" << cp.id << "': ok\n";
        } catch (const std::exception& e) {
            std::cerr << "case '" << cp.id << "': FAILED " << e.what() << "\n";
            ++failures;
        }
    }
    std::cout << (cases.size() - failures) << "/" << cases.size() << " cases succeeded\n";
    return failures == 0 ? 0 : 1;
}

int cmd_phantom(const std::string& spec_path, unsigned seed, const std::string& out_dir) {
    PhantomSpec spec;
    if (!spec_path.empty()) spec = load_phantom_spec(spec_path);
    const PhantomOutput ph = make_phantom(spec, seed);

    fs::create_directories(out_dir);
    fs::create_directories(fs::path(out_dir) / "truth");
    auto p = [&](const std::string& n) { return (fs::path(out_dir) / n).string(); };

    save_pgm(ph.cine, p("cine.pgm"));
    save_pgm(ph.lge, p("lge.pgm"));
    save_contour(ph.prior_endo, p("prior_endo.ctr"));
    save_contour(ph.prior_epi, p("prior_epi.ctr"));
    save_contour(ph.true_endo, p("truth/endo.ctr"));
    save_contour(ph.true_epi, p("truth/epi.ctr"));
    write_text(p("truth/pair.meta"), "endo=endo.ctr\nepi=epi.ctr\n");

    std::ostringstream manifest;
    manifest << p("cine.pgm") << '\t' << p("lge.pgm") << '\t' << p("prior_endo.ctr") << '\t'
             << p("prior_epi.ctr") << '\t' << "phantom\n";
    write_text(p("manifest.tsv"), manifest.str());
    std::cout << "phantom written to " << out_dir << "\n";
    return 0;
}

ContourPair load_pair_dir(const std::string& dir) {
    std::string endo_name = "endo.ctr", epi_name = "epi.ctr";
    const fs::path meta = fs::path(dir) / "pair.meta";
    if (fs::exists(meta)) {
        std::ifstream in(meta);
        std::string line;
        while (std::getline(in, line)) {
            if (line.rfind("endo=", 0) == 0) endo_name = line.substr(5);
            else if (line.rfind("epi=", 0) == 0) epi_name = line.substr(4);
        }
    }
    Contour endo = load_contour((fs::path(dir) / endo_name).string());
    Contour epi = load_contour((fs::path(dir) / epi_name).string());
    return make_contour_pair(std::move(endo), std::move(epi));
}

int cmd_evaluate(const std::string& auto_dir, const std::string& manual_dir,
                 const std::string& out_file, int width, int height) {
    const ContourPair auto_pair = load_pair_dir(auto_dir);
    const ContourPair manual_pair = load_pair_dir(manual_dir);

    if (width <= 0 || height <= 0) {
        double mx = 0.0, my = 0.0;
        for (const auto* c : {&auto_pair.epi, &manual_pair.epi}) {
            for (const Point2& p : c->vertices) {
                mx = std::max(mx, p.x);
                my = std::max(my, p.y);
            }
        }
        width = static_cast<int>(std::ceil(mx)) + 3;
        height = static_cast<int>(std::ceil(my)) + 3;
    }

    const EvalReport report = evaluate(auto_pair, manual_pair, width, height);
    const std::string text = report.to_kv_block() + "record: " + report.to_record_line();
    if (out_file.empty()) std::cout << text;
    else write_text(out_file, text);
    return 0;
}

int cmd_compare_metrics(const std::string& case_dir, const std::string& config_path,
                        const std::string& out_file) {
    PipelineConfig cfg;
    if (!config_path.empty()) cfg = load_pipeline_config(config_path);

    auto p = [&](const std::string& n) { return (fs::path(case_dir) / n).string(); };
    const Image2D cine = load_pgm(p("cine.pgm"));
    const Image2D lge = load_pgm(p("lge.pgm"));
    ContourPair priors = make_contour_pair(load_contour(p("prior_endo.ctr")),
                                           load_contour(p("prior_epi.ctr")));
    ContourPair truth = load_pair_dir((fs::path(case_dir) / "truth").string());

    const auto report = compare_metrics(cine, lge, priors, truth, cfg.ffd);
    std::ostringstream out;
    for (const MetricComparison& m : report) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "metric=%s mean_contour_error_px=%.6f\n", m.metric.c_str(),
                      m.mean_contour_error_px);
        out << buf;
    }
    if (out_file.empty()) std::cout << out.str();
    else write_text(out_file, out.str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Coarse-to-fine myocardial segmentation of LGE images from cine priors"};
    app.require_subcommand(1);

    std::string manifest, config, out_dir, spec_path, auto_dir, manual_dir, out_file, case_dir;
    unsigned seed = 1;
    int width = 0, height = 0;

    auto* segment = app.add_subcommand("segment", "Run the full pipeline over a case manifest");
    segment->add_option("--manifest", manifest, "TSV manifest: cine, lge, endo, epi, id")->required();
    segment->add_option("--config", config, "key=value pipeline configuration file");
    segment->add_option("--out", out_dir, "output directory (default from config)");

    auto* phantom = app.add_subcommand("phantom", "Generate a synthetic phantom case");
    phantom->add_option("--spec", spec_path, "key=value phantom specification file");
    phantom->add_option("--seed", seed, "noise seed");
    phantom->add_option("--out", out_dir, "output directory")->required();

    auto* evaluate = app.add_subcommand("evaluate", "Dice and contour-distance report");
    evaluate->add_option("--auto", auto_dir, "directory with automatic endo.ctr/epi.ctr")->required();
    evaluate->add_option("--manual", manual_dir, "directory with manual endo.ctr/epi.ctr")->required();
    evaluate->add_option("--out", out_file, "report file (stdout when omitted)");
    evaluate->add_option("--width", width, "rasterization width (default: derived from contours)");
    evaluate->add_option("--height", height, "rasterization height");

    auto* compare = app.add_subcommand("compare-metrics",
                                       "FFD registration error per similarity metric");
    compare->add_option("--case", case_dir, "phantom case directory")->required();
    compare->add_option("--config", config, "key=value pipeline configuration file");
    compare->add_option("--out", out_file, "report file (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (segment->parsed()) return cmd_segment(manifest, config, out_dir);
        if (phantom->parsed()) return cmd_phantom(spec_path, seed, out_dir);
        if (evaluate->parsed()) return cmd_evaluate(auto_dir, manual_dir, out_file, width, height);
        if (compare->parsed()) return cmd_compare_metrics(case_dir, config, out_file);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
