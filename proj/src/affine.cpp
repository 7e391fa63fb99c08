#include "lgeseg/affine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace lgeseg {

AffineTransform2D AffineTransform2D::inverse() const {
    const double det = determinant();
    if (std::abs(det) < 1e-12)
        throw std::invalid_argument("AffineTransform2D: singular matrix");
    AffineTransform2D inv;
    inv.a11 = a22 / det;
    inv.a12 = -a12 / det;
    inv.a21 = -a21 / det;
    inv.a22 = a11 / det;
    inv.a13 = (a12 * a23 - a13 * a22) / det;
    inv.a23 = (a13 * a21 - a11 * a23) / det;
    return inv;
}

double ncc(const Image2D& a, const Image2D& b) {
    if (!a.same_size(b)) throw std::invalid_argument("ncc: dimension mismatch");
    const size_t n = a.pixel_count();
    double ma = 0.0, mb = 0.0;
    for (size_t k = 0; k < n; ++k) { ma += a.data[k]; mb += b.data[k]; }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (size_t k = 0; k < n; ++k) {
        const double da = a.data[k] - ma;
        const double db = b.data[k] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa <= 0.0 || sbb <= 0.0)
        throw std::invalid_argument("ncc: zero-variance image");
    return sab / std::sqrt(saa * sbb);
}

AffineTransform2D project_constraints(const AffineTransform2D& A, const AffineConfig& cfg) {
    const double eps = std::numeric_limits<double>::epsilon();
    const double m_scale = 8.0 * eps * std::max(1.0, 1.0 + cfg.eps_scale);
    const double m_trans = 8.0 * eps * std::max(1.0, cfg.eps_translate);
    AffineTransform2D out = A;
    out.a11 = std::clamp(out.a11, 1.0 - cfg.eps_scale + m_scale, 1.0 + cfg.eps_scale - m_scale);
    out.a22 = std::clamp(out.a22, 1.0 - cfg.eps_scale + m_scale, 1.0 + cfg.eps_scale - m_scale);
    out.a13 = std::clamp(out.a13, -cfg.eps_translate + m_trans, cfg.eps_translate - m_trans);
    out.a23 = std::clamp(out.a23, -cfg.eps_translate + m_trans, cfg.eps_translate - m_trans);
    return out;
}

bool affine_is_feasible(const AffineTransform2D& A, const AffineConfig& cfg) {
    return std::abs(A.a11 - 1.0) < cfg.eps_scale && std::abs(A.a22 - 1.0) < cfg.eps_scale &&
           std::abs(A.a13) < cfg.eps_translate && std::abs(A.a23) < cfg.eps_translate;
}

namespace {

std::array<double, 6> to_params(const AffineTransform2D& A) {
    return {A.a11, A.a12, A.a13, A.a21, A.a22, A.a23};
}

AffineTransform2D from_params(const std::array<double, 6>& p) {
    return {p[0], p[1], p[2], p[3], p[4], p[5]};
}

} // namespace

AffineTransform2D estimate_affine(const Image2D& fixed, const Image2D& moving,
                                  const AffineConfig& cfg, AffineTrace* trace) {
    if (!fixed.same_size(moving))
        throw std::invalid_argument("estimate_affine: dimension mismatch");
    if (cfg.max_iters < 1) throw std::invalid_argument("estimate_affine: max_iters must be >= 1");

    const auto objective = [&](const AffineTransform2D& A) {
        return ncc(fixed, warp_affine(moving, A));
    };

    // Finite-difference deltas and step scaling per parameter: unit moves of
    // the scale/shear entries displace border pixels about as far as a
    // one-pixel translation does.
    const std::array<double, 6> fd_delta = {1e-3, 1e-3, 1e-2, 1e-3, 1e-3, 1e-2};
    const double dim_scale = 0.5 * std::max(fixed.width, fixed.height);
    const std::array<double, 6> unit = {1.0 / dim_scale, 1.0 / dim_scale, 1.0,
                                        1.0 / dim_scale, 1.0 / dim_scale, 1.0};

    AffineTransform2D cur = project_constraints(AffineTransform2D::identity(), cfg);
    double cur_val = objective(cur);
    if (trace) trace->ncc_values.push_back(cur_val);

    double step = 1.0;
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        const std::array<double, 6> p = to_params(cur);
        std::array<double, 6> grad{};
        double gmax = 0.0;
        for (int k = 0; k < 6; ++k) {
            std::array<double, 6> pp = p, pm = p;
            pp[k] += fd_delta[k];
            pm[k] -= fd_delta[k];
            const double vp = objective(from_params(pp));
            const double vm = objective(from_params(pm));
            grad[k] = (vp - vm) / (2.0 * fd_delta[k]) * unit[k]; // normalized-space gradient
            gmax = std::max(gmax, std::abs(grad[k]));
        }
        if (gmax == 0.0) break;

        // Backtracking line search in normalized parameter space.
        bool accepted = false;
        while (step >= cfg.step_tolerance) {
            std::array<double, 6> cand = p;
            for (int k = 0; k < 6; ++k) cand[k] += step * (grad[k] / gmax) * unit[k];
            const AffineTransform2D next = project_constraints(from_params(cand), cfg);
            const double val = objective(next);
            if (val > cur_val + 1e-12) {
                cur = next;
                cur_val = val;
                if (trace) trace->ncc_values.push_back(cur_val);
                accepted = true;
                step = std::min(step * 2.0, 1.0);
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }
    return cur;
}

void save_affine(const AffineTransform2D& A, const std::string& path) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g %.17g %.17g\n",
                  A.a11, A.a12, A.a13, A.a21, A.a22, A.a23);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("save_affine: cannot open '" + tmp + "'");
        out << buf;
    }
    std::filesystem::rename(tmp, path);
}

AffineTransform2D load_affine(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_affine: cannot open '" + path + "'");
    AffineTransform2D A;
    if (!(in >> A.a11 >> A.a12 >> A.a13 >> A.a21 >> A.a22 >> A.a23))
        throw std::runtime_error("load_affine: malformed transform file '" + path + "'");
    return A;
}

} // namespace lgeseg
