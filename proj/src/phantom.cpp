#include "lgeseg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

namespace lgeseg {

namespace {

constexpr double kPi = 3.14159265358979323846;

double smoothstep01(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

// Smooth indicator of "signed distance d is positive", transition width w.
double soft_inside(double d, double w) {
    return smoothstep01(d / w + 0.5);
}

double wrap_angle(double a) {
    while (a > kPi) a -= 2.0 * kPi;
    while (a < -kPi) a += 2.0 * kPi;
    return a;
}

} // namespace

void PhantomSpec::validate() const {
    if (width <= 0 || height <= 0) throw std::invalid_argument("PhantomSpec: dimensions must be positive");
    if (endo_radius <= 0.0 || epi_radius <= 0.0)
        throw std::invalid_argument("PhantomSpec: radii must be positive");
    if (endo_radius >= epi_radius)
        throw std::invalid_argument("PhantomSpec: endo radius must be smaller than epi radius");
    const double levels[4] = {intensity_background, intensity_blood, intensity_myocardium, intensity_scar};
    for (int i = 0; i < 4; ++i) {
        for (int j = i + 1; j < 4; ++j) {
            if (levels[i] == levels[j])
                throw std::invalid_argument("PhantomSpec: intensity levels must be distinct");
        }
    }
    if (scar_transmural_depth < 0.0 || scar_transmural_depth > 1.0)
        throw std::invalid_argument("PhantomSpec: scar transmural depth must be in [0, 1]");
    if (scar_angle_extent_deg < 0.0 || scar_angle_extent_deg > 360.0)
        throw std::invalid_argument("PhantomSpec: scar angular extent must be in [0, 360]");
    if (edge_width <= 0.0) throw std::invalid_argument("PhantomSpec: edge width must be positive");
    if (noise_sigma < 0.0) throw std::invalid_argument("PhantomSpec: noise sigma must be non-negative");
    if (bump_sigma <= 0.0) throw std::invalid_argument("PhantomSpec: bump sigma must be positive");
    if (contour_vertices < 8) throw std::invalid_argument("PhantomSpec: need at least 8 contour vertices");
    if (std::abs(affine.determinant()) < 1e-12)
        throw std::invalid_argument("PhantomSpec: singular affine deformation");
}

Point2 phantom_bump_displacement(const PhantomSpec& spec, const Point2& p) {
    Point2 d{0.0, 0.0};
    const double inv2s2 = 1.0 / (2.0 * spec.bump_sigma * spec.bump_sigma);
    for (const BumpSpec& b : spec.bumps) {
        const double rx = p.x - b.x;
        const double ry = p.y - b.y;
        const double w = std::exp(-(rx * rx + ry * ry) * inv2s2);
        d.x += b.dx * w;
        d.y += b.dy * w;
    }
    return d;
}

double phantom_intensity(const PhantomSpec& spec, const Point2& p, bool with_scar) {
    const double rho = (p - Point2{spec.center_x, spec.center_y}).norm();
    const double w = spec.edge_width;
    double v = spec.intensity_background;
    v += (spec.intensity_myocardium - spec.intensity_background) * soft_inside(spec.epi_radius - rho, w);
    v += (spec.intensity_blood - spec.intensity_myocardium) * soft_inside(spec.endo_radius - rho, w);
    if (with_scar && spec.scar_angle_extent_deg > 0.0 && spec.scar_transmural_depth > 0.0) {
        const double scar_outer =
            spec.endo_radius + spec.scar_transmural_depth * (spec.epi_radius - spec.endo_radius);
        const double radial = soft_inside(rho - spec.endo_radius, w) * soft_inside(scar_outer - rho, w);
        const double ang = wrap_angle(std::atan2(p.y - spec.center_y, p.x - spec.center_x) -
                                      spec.scar_angle_center_deg * kPi / 180.0);
        const double half_ext = 0.5 * spec.scar_angle_extent_deg * kPi / 180.0;
        const double w_ang = w / std::max(rho, 1.0); // arc-length-matched angular softness
        const double angular = soft_inside(half_ext - std::abs(ang), w_ang);
        v += (spec.intensity_scar - spec.intensity_myocardium) * radial * angular;
    }
    return v;
}

namespace {

// Inverse of p -> p + bump(p) by fixed-point iteration; the bump fields used
// here are mild enough to be contractive.
Point2 invert_bump_map(const PhantomSpec& spec, const Point2& q) {
    Point2 y = q;
    for (int it = 0; it < 200; ++it) {
        const Point2 d = phantom_bump_displacement(spec, y);
        const Point2 next = q - d;
        if ((next - y).norm() < 1e-13) return next;
        y = next;
    }
    return y;
}

std::vector<Point2> circle_vertices(double cx, double cy, double r, int n) {
    std::vector<Point2> v(n);
    for (int k = 0; k < n; ++k) {
        const double a = 2.0 * kPi * k / n;
        v[k] = {cx + r * std::cos(a), cy + r * std::sin(a)};
    }
    return v;
}

} // namespace

PhantomOutput make_phantom(const PhantomSpec& spec, uint32_t seed) {
    spec.validate();
    PhantomOutput out;

    out.lge = Image2D(spec.width, spec.height);
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            out.lge.at(x, y) = phantom_intensity(
                spec, {static_cast<double>(x), static_cast<double>(y)}, true);
        }
    }

    // Cine side: clean annulus resampled through the composed backward map
    // x -> T_bump(A x), so the pipeline's forward contour propagation
    // (affine, then the FFD point map) lands priors back on the truth.
    out.cine = Image2D(spec.width, spec.height);
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            const Point2 pa = spec.affine.apply({static_cast<double>(x), static_cast<double>(y)});
            const Point2 pb = pa + phantom_bump_displacement(spec, pa);
            out.cine.at(x, y) = phantom_intensity(spec, pb, false);
        }
    }

    if (spec.noise_sigma > 0.0) {
        std::mt19937 rng(seed);
        std::normal_distribution<double> noise(0.0, spec.noise_sigma);
        for (double& v : out.lge.data) v += noise(rng);
        for (double& v : out.cine.data) v += noise(rng);
    }

    out.true_endo = make_contour(ContourKind::Endocardial,
                                 circle_vertices(spec.center_x, spec.center_y,
                                                 spec.endo_radius, spec.contour_vertices));
    out.true_epi = make_contour(ContourKind::Epicardial,
                                circle_vertices(spec.center_x, spec.center_y,
                                                spec.epi_radius, spec.contour_vertices));

    const AffineTransform2D inv_affine = spec.affine.inverse();
    auto to_prior = [&](const std::vector<Point2>& truth) {
        std::vector<Point2> prior(truth.size());
        for (size_t k = 0; k < truth.size(); ++k) {
            prior[k] = inv_affine.apply(invert_bump_map(spec, truth[k]));
        }
        return prior;
    };
    out.prior_endo = make_contour(ContourKind::Endocardial, to_prior(out.true_endo.vertices));
    out.prior_epi = make_contour(ContourKind::Epicardial, to_prior(out.true_epi.vertices));
    return out;
}

PhantomSpec load_phantom_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_phantom_spec: cannot open '" + path + "'");
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("load_phantom_spec: malformed line " + std::to_string(lineno));
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }

    PhantomSpec spec;
    auto take = [&](const std::string& key, auto setter) {
        auto it = kv.find(key);
        if (it == kv.end()) return;
        setter(it->second);
        kv.erase(it);
    };
    auto as_double = [&](const std::string& key, const std::string& s) {
        size_t pos = 0;
        double v = 0.0;
        try { v = std::stod(s, &pos); } catch (const std::exception&) { pos = 0; }
        if (pos != s.size())
            throw std::runtime_error("load_phantom_spec: bad value for '" + key + "'");
        return v;
    };
    auto dbl = [&](const std::string& key, double& field) {
        take(key, [&](const std::string& s) { field = as_double(key, s); });
    };
    auto intval = [&](const std::string& key, int& field) {
        take(key, [&](const std::string& s) { field = static_cast<int>(as_double(key, s)); });
    };

    intval("width", spec.width);
    intval("height", spec.height);
    dbl("center_x", spec.center_x);
    dbl("center_y", spec.center_y);
    dbl("endo_radius", spec.endo_radius);
    dbl("epi_radius", spec.epi_radius);
    dbl("intensity_background", spec.intensity_background);
    dbl("intensity_blood", spec.intensity_blood);
    dbl("intensity_myocardium", spec.intensity_myocardium);
    dbl("intensity_scar", spec.intensity_scar);
    dbl("scar_angle_center_deg", spec.scar_angle_center_deg);
    dbl("scar_angle_extent_deg", spec.scar_angle_extent_deg);
    dbl("scar_transmural_depth", spec.scar_transmural_depth);
    dbl("edge_width", spec.edge_width);
    dbl("noise_sigma", spec.noise_sigma);
    dbl("bump_sigma", spec.bump_sigma);
    intval("contour_vertices", spec.contour_vertices);
    dbl("affine_a11", spec.affine.a11);
    dbl("affine_a12", spec.affine.a12);
    dbl("affine_a13", spec.affine.a13);
    dbl("affine_a21", spec.affine.a21);
    dbl("affine_a22", spec.affine.a22);
    dbl("affine_a23", spec.affine.a23);

    for (int k = 1;; ++k) {
        const std::string base = "bump" + std::to_string(k) + "_";
        if (kv.find(base + "x") == kv.end()) break;
        BumpSpec b;
        dbl(base + "x", b.x);
        dbl(base + "y", b.y);
        dbl(base + "dx", b.dx);
        dbl(base + "dy", b.dy);
        spec.bumps.push_back(b);
    }

    if (!kv.empty())
        throw std::runtime_error("load_phantom_spec: unknown key '" + kv.begin()->first + "'");
    spec.validate();
    return spec;
}

} // namespace lgeseg
