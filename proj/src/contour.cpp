#include "lgeseg/contour.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace lgeseg {

void validate_contour(const Contour& c) {
    if (c.vertices.size() < 8)
        throw std::invalid_argument("Contour: need at least 8 vertices");
    for (const Point2& p : c.vertices) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw std::invalid_argument("Contour: non-finite vertex");
    }
    if (!polygon_is_simple(c.vertices))
        throw std::invalid_argument("Contour: polygon is self-intersecting");
    if (polygon_signed_area(c.vertices) <= 0.0)
        throw std::invalid_argument("Contour: orientation is not counterclockwise");
}

Contour make_contour(ContourKind kind, std::vector<Point2> vertices) {
    Contour c;
    c.kind = kind;
    c.vertices = std::move(vertices);
    if (c.vertices.size() >= 3 && polygon_signed_area(c.vertices) < 0.0)
        std::reverse(c.vertices.begin(), c.vertices.end());
    validate_contour(c);
    return c;
}

namespace {

double point_to_ray_distance(const Point2& p, const Point2& origin, const Point2& dir) {
    const Point2 rel = p - origin;
    const double proj = rel.dot(dir);
    if (proj <= 0.0) return rel.norm();
    return (rel - dir * proj).norm();
}

} // namespace

ContourPair make_contour_pair(Contour endo, Contour epi) {
    validate_contour(endo);
    validate_contour(epi);
    if (endo.kind != ContourKind::Endocardial || epi.kind != ContourKind::Epicardial)
        throw std::invalid_argument("ContourPair: contour kinds are swapped");
    for (const Point2& p : endo.vertices) {
        if (!point_in_polygon(p, epi.vertices))
            throw std::invalid_argument("ContourPair: endocardial vertex outside the epicardial contour");
    }

    ContourPair pair;
    pair.endo = std::move(endo);
    pair.epi = std::move(epi);
    const Point2 center = polygon_centroid(pair.endo.vertices);
    const size_t n = pair.endo.vertices.size();
    pair.thickness_ref.resize(n);
    pair.epi_pairing.resize(n);
    for (size_t i = 0; i < n; ++i) {
        const Point2& v = pair.endo.vertices[i];
        Point2 dir = v - center;
        const double len = dir.norm();
        if (len < 1e-9)
            throw std::invalid_argument("ContourPair: endocardial vertex coincides with the LV center");
        dir = dir * (1.0 / len);
        double best = std::numeric_limits<double>::infinity();
        int best_j = 0;
        for (size_t j = 0; j < pair.epi.vertices.size(); ++j) {
            const double d = point_to_ray_distance(pair.epi.vertices[j], center, dir);
            if (d < best) {
                best = d;
                best_j = static_cast<int>(j);
            }
        }
        pair.epi_pairing[i] = best_j;
        pair.thickness_ref[i] = pair.epi.vertices[best_j] - v;
    }
    return pair;
}

Point2 lv_center(const Contour& endo) {
    return polygon_centroid(endo.vertices);
}

std::vector<ProfileSample> radial_profile(const Image2D& img, const Point2& vertex,
                                          const Point2& center, int band) {
    if (band < 1) throw std::invalid_argument("radial_profile: band must be >= 1");
    Point2 dir = vertex - center;
    const double len = dir.norm();
    if (len < 1e-9) throw std::invalid_argument("radial_profile: vertex coincides with center");
    dir = dir * (1.0 / len);
    std::vector<ProfileSample> out;
    out.reserve(2 * band + 1);
    for (int k = -band; k <= band; ++k) {
        const Point2 p = vertex + dir * static_cast<double>(k);
        out.push_back({static_cast<double>(k), bilinear_sample(img, p.x, p.y)});
    }
    return out;
}

std::optional<EdgeHit> detect_edge_point(const std::vector<ProfileSample>& profile,
                                         ContourKind kind, const EdgePriors& priors) {
    const size_t n = profile.size();
    if (n < 2) return std::nullopt;
    std::vector<double> step(n - 1), mag(n - 1);
    for (size_t k = 0; k + 1 < n; ++k) {
        step[k] = profile[k + 1].intensity - profile[k].intensity;
        mag[k] = std::abs(step[k]);
    }

    size_t best = 0;
    for (size_t k = 1; k < mag.size(); ++k) {
        if (mag[k] > mag[best]) best = k;
    }
    if (mag[best] < priors.noise_floor) return std::nullopt;

    size_t winner = best;
    if (kind == ContourKind::Endocardial) {
        // Priority case: an outward brightness drop whose outer side is still
        // enhanced marks the blood-pool/scar interface; prefer it over the
        // (often stronger) scar/myocardium step further out.
        bool have_scar = false;
        size_t scar_k = 0;
        for (size_t k = 0; k < step.size(); ++k) {
            if (step[k] >= 0.0) continue;
            double plateau = profile[k + 1].intensity;
            if (k + 2 < n) plateau = 0.5 * (plateau + profile[k + 2].intensity);
            if (plateau <= priors.bright_threshold) continue;
            if (!have_scar || mag[k] > mag[scar_k]) {
                have_scar = true;
                scar_k = k;
            }
        }
        if (have_scar && mag[scar_k] >= priors.noise_floor) winner = scar_k;
    }

    // Sub-pixel refinement: parabolic fit over the step magnitudes around the winner.
    double off = 0.0;
    if (winner > 0 && winner + 1 < mag.size()) {
        const double a = mag[winner - 1], b = mag[winner], c = mag[winner + 1];
        const double denom = a - 2.0 * b + c;
        if (std::abs(denom) > 1e-12) off = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
    }
    EdgeHit hit;
    hit.t = profile[winner].t + 0.5 + off;
    hit.strength = mag[winner];
    return hit;
}

std::vector<ContourEdge> detect_contour_edges(const Image2D& img, const Contour& contour,
                                              const Point2& center, int band,
                                              const EdgePriors& priors) {
    const size_t n = contour.vertices.size();
    std::vector<ContourEdge> edges(n);
    std::vector<std::optional<EdgeHit>> hits(n);
    double max_strength = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const auto profile = radial_profile(img, contour.vertices[i], center, band);
        hits[i] = detect_edge_point(profile, contour.kind, priors);
        if (hits[i]) max_strength = std::max(max_strength, hits[i]->strength);
    }
    if (max_strength <= 0.0) return edges;
    for (size_t i = 0; i < n; ++i) {
        if (!hits[i]) continue;
        const Point2& v = contour.vertices[i];
        Point2 dir = v - center;
        dir = dir * (1.0 / dir.norm());
        edges[i].found = true;
        edges[i].position = v + dir * hits[i]->t;
        edges[i].omega = hits[i]->strength / max_strength;
    }
    return edges;
}

Point2 smoothness_force(const Contour& contour, size_t i) {
    const size_t n = contour.vertices.size();
    const Point2& prev = contour.vertices[(i + n - 1) % n];
    const Point2& cur = contour.vertices[i];
    const Point2& next = contour.vertices[(i + 1) % n];
    const Point2 mid = (prev + next) * 0.5;
    const Point2 diff = mid - cur;
    Point2 tangent = next - prev;
    const double len = tangent.norm();
    if (len < 1e-12) return diff * 0.5;
    tangent = tangent * (1.0 / len);
    const Point2 normal = tangent.perp();
    return tangent * diff.dot(tangent) + normal * (0.5 * diff.dot(normal));
}

Point2 edge_force(const Point2& vertex, const ContourEdge& edge) {
    if (!edge.found) return {0.0, 0.0};
    return (edge.position - vertex) * edge.omega;
}

ThicknessForces thickness_force(const ContourPair& initial, const Contour& cur_endo,
                                const Contour& cur_epi, size_t i) {
    if (i >= initial.thickness_ref.size())
        throw std::out_of_range("thickness_force: endo vertex index out of range");
    const Point2& ref = initial.thickness_ref[i];
    const int j = initial.epi_pairing[i];
    const Point2& pe = cur_endo.vertices[i];
    const Point2& pp = cur_epi.vertices[j];
    ThicknessForces f;
    f.on_epi = pe + ref - pp;
    f.on_endo = pp - ref - pe;
    return f;
}

double otsu_threshold(const std::vector<double>& samples) {
    if (samples.empty()) throw std::invalid_argument("otsu_threshold: no samples");
    const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
    const double lo = *lo_it, hi = *hi_it;
    if (hi <= lo) return lo;
    constexpr int kBins = 256;
    const double w = (hi - lo) / kBins;
    std::vector<long> hist(kBins, 0);
    for (double v : samples) {
        int k = static_cast<int>((v - lo) / w);
        ++hist[std::clamp(k, 0, kBins - 1)];
    }
    const double total = static_cast<double>(samples.size());
    double sum_all = 0.0;
    for (int k = 0; k < kBins; ++k) sum_all += (lo + (k + 0.5) * w) * hist[k];
    double w0 = 0.0, sum0 = 0.0, best_var = -1.0;
    int best_k = 0;
    for (int k = 0; k < kBins - 1; ++k) {
        w0 += hist[k];
        if (w0 == 0.0) continue;
        const double w1 = total - w0;
        if (w1 == 0.0) break;
        sum0 += (lo + (k + 0.5) * w) * hist[k];
        const double m0 = sum0 / w0;
        const double m1 = (sum_all - sum0) / w1;
        const double var = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (var > best_var) {
            best_var = var;
            best_k = k;
        }
    }
    return lo + (best_k + 1) * w;
}

namespace {

std::vector<std::vector<int>> reverse_pairing(const ContourPair& pair) {
    std::vector<std::vector<int>> rev(pair.epi.vertices.size());
    for (size_t i = 0; i < pair.epi_pairing.size(); ++i) {
        rev[pair.epi_pairing[i]].push_back(static_cast<int>(i));
    }
    return rev;
}

} // namespace

ContourPair deform(const ContourPair& pair, const Image2D& img, const ForceConfig& cfg,
                   DeformTrace* trace) {
    if (cfg.gamma < 0.0 || cfg.gamma > 1.0) throw std::invalid_argument("deform: gamma must be in [0, 1]");
    if (cfg.alpha < 0.0 || cfg.beta < 0.0 || cfg.theta < 0.0)
        throw std::invalid_argument("deform: force weights must be non-negative");
    if (cfg.iters < 1) throw std::invalid_argument("deform: iters must be >= 1");

    const auto rev_pairing = reverse_pairing(pair);

    // Brightness prior: Otsu split of the intensities seen in the endocardial
    // narrow band (blood pool, possible sub-endocardial enhancement, and
    // myocardium), computed once from the initial contour.
    EdgePriors priors;
    priors.noise_floor = cfg.edge_noise_floor;
    {
        const Point2 c0 = lv_center(pair.endo);
        std::vector<double> samples;
        samples.reserve(pair.endo.vertices.size() * (2 * cfg.band + 1));
        for (const Point2& v : pair.endo.vertices) {
            for (const ProfileSample& s : radial_profile(img, v, c0, cfg.band)) {
                samples.push_back(s.intensity);
            }
        }
        priors.bright_threshold = otsu_threshold(samples);
    }

    Contour endo = pair.endo, epi = pair.epi;
    std::vector<Point2> endo_prev = endo.vertices, epi_prev = epi.vertices;
    const double momentum = 1.0 - cfg.gamma;

    for (int t = 0; t < cfg.iters; ++t) {
        const Point2 center = lv_center(endo);
        double max_move = 0.0;

        // epicardial phase, endocardial contour frozen
        {
            const auto edges = detect_contour_edges(img, epi, center, cfg.band, priors);
            std::vector<Point2> next(epi.vertices.size());
            for (size_t j = 0; j < epi.vertices.size(); ++j) {
                const Point2& p = epi.vertices[j];
                Point2 thick{0.0, 0.0};
                if (!rev_pairing[j].empty()) {
                    for (int i : rev_pairing[j]) {
                        thick += endo.vertices[i] + pair.thickness_ref[i] - p;
                    }
                    thick = thick * (1.0 / static_cast<double>(rev_pairing[j].size()));
                }
                next[j] = p + (p - epi_prev[j]) * momentum + smoothness_force(epi, j) * cfg.alpha +
                          edge_force(p, edges[j]) * cfg.beta + thick * cfg.theta;
                max_move = std::max(max_move, (next[j] - p).norm());
            }
            epi_prev = epi.vertices;
            epi.vertices = std::move(next);
        }

        // endocardial phase, epicardial contour frozen at its updated state
        {
            const auto edges = detect_contour_edges(img, endo, center, cfg.band, priors);
            std::vector<Point2> next(endo.vertices.size());
            for (size_t i = 0; i < endo.vertices.size(); ++i) {
                const Point2& p = endo.vertices[i];
                const Point2 thick = epi.vertices[pair.epi_pairing[i]] - pair.thickness_ref[i] - p;
                next[i] = p + (p - endo_prev[i]) * momentum + smoothness_force(endo, i) * cfg.alpha +
                          edge_force(p, edges[i]) * cfg.beta + thick * cfg.theta;
                max_move = std::max(max_move, (next[i] - p).norm());
            }
            endo_prev = endo.vertices;
            endo.vertices = std::move(next);
        }

        if (!polygon_is_simple(endo.vertices) || !polygon_is_simple(epi.vertices)) {
            throw std::runtime_error("deform: contour self-intersection at iteration " +
                                     std::to_string(t + 1));
        }

        if (trace) {
            ContourPair snap;
            snap.endo = endo;
            snap.epi = epi;
            snap.thickness_ref = pair.thickness_ref;
            snap.epi_pairing = pair.epi_pairing;
            trace->iterates.push_back(std::move(snap));
            trace->max_vertex_move.push_back(max_move);
        }
        if (max_move < cfg.min_move) break;
    }

    ContourPair out;
    out.endo = std::move(endo);
    out.epi = std::move(epi);
    out.thickness_ref = pair.thickness_ref;
    out.epi_pairing = pair.epi_pairing;
    return out;
}

void save_contour(const Contour& c, const std::string& path) {
    std::ostringstream out;
    out << "kind=" << (c.kind == ContourKind::Endocardial ? "endo" : "epi")
        << " n=" << c.vertices.size() << "\n";
    char buf[128];
    for (const Point2& p : c.vertices) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g\n", p.x, p.y);
        out << buf;
    }
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::trunc);
        if (!f) throw std::runtime_error("save_contour: cannot open '" + tmp + "'");
        f << out.str();
    }
    std::filesystem::rename(tmp, path);
}

Contour load_contour(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_contour: cannot open '" + path + "'");
    std::string header;
    if (!std::getline(in, header))
        throw std::runtime_error("load_contour: empty file '" + path + "'");
    std::istringstream hs(header);
    std::string kind_tok, n_tok;
    if (!(hs >> kind_tok >> n_tok) || kind_tok.rfind("kind=", 0) != 0 || n_tok.rfind("n=", 0) != 0)
        throw std::runtime_error("load_contour: malformed header in '" + path + "'");
    const std::string kind_s = kind_tok.substr(5);
    ContourKind kind;
    if (kind_s == "endo") kind = ContourKind::Endocardial;
    else if (kind_s == "epi") kind = ContourKind::Epicardial;
    else throw std::runtime_error("load_contour: unknown kind '" + kind_s + "' in '" + path + "'");
    long n = 0;
    try {
        n = std::stol(n_tok.substr(2));
    } catch (const std::exception&) {
        throw std::runtime_error("load_contour: bad vertex count in '" + path + "'");
    }
    if (n < 8) throw std::runtime_error("load_contour: vertex count below 8 in '" + path + "'");
    std::vector<Point2> verts(static_cast<size_t>(n));
    for (Point2& p : verts) {
        if (!(in >> p.x >> p.y))
            throw std::runtime_error("load_contour: truncated vertex list in '" + path + "'");
    }
    return make_contour(kind, std::move(verts));
}

} // namespace lgeseg
