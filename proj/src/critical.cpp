#include "bvlab/critical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bvlab/error.hpp"

namespace bvlab {

namespace {

double half_sq(const Vector& g) { return 0.5 * dot(g, g); }

// Newton direction through the eigen-decomposition; empty when H is singular.
Vector newton_direction(const Matrix& h, const Vector& g) {
    const SymmetricEigen e = eig_sym(h);
    const double scale = std::max(1.0, norm_inf(e.values));
    for (double lam : e.values)
        if (std::abs(lam) <= 1e-13 * scale) return {};
    const std::size_t n = g.size();
    Vector d(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) c += e.vectors(i, k) * g[i];
        c /= e.values[k];
        for (std::size_t i = 0; i < n; ++i) d[i] -= c * e.vectors(i, k);
    }
    return d;
}

}  // namespace

std::string to_string(CriticalKind kind) {
    switch (kind) {
        case CriticalKind::Minimum: return "minimum";
        case CriticalKind::Saddle: return "saddle";
        case CriticalKind::Maximum: return "maximum";
        case CriticalKind::Degenerate: return "degenerate";
    }
    return "unknown";
}

CriticalKind classify(const Vector& eigs, double threshold) {
    bool neg = false;
    bool pos = false;
    for (double l : eigs) {
        if (std::abs(l) <= threshold) return CriticalKind::Degenerate;
        (l < 0.0 ? neg : pos) = true;
    }
    if (neg && pos) return CriticalKind::Saddle;
    return neg ? CriticalKind::Maximum : CriticalKind::Minimum;
}

PolishResult polish(const Potential& p, double t, Vector x, double tol, int max_iter) {
    const double max_step = p.box().diameter();
    Vector g = p.grad(t, x);
    double phi = half_sq(g);
    PolishResult out;
    int it = 0;
    for (; it < max_iter; ++it) {
        if (std::sqrt(2.0 * phi) <= tol) break;
        const Matrix h = p.hess(t, x);
        const Vector hg = h.apply(g);  // gradient of phi
        std::vector<Vector> candidates;
        if (Vector d = newton_direction(h, g); !d.empty()) candidates.push_back(std::move(d));
        if (norm2(hg) > 0.0) candidates.push_back(scaled(-1.0, hg));
        bool moved = false;
        for (Vector& d : candidates) {
            const double len = norm2(d);
            if (len > max_step) d = scaled(max_step / len, d);
            const double slope = dot(hg, d);
            if (!(slope < 0.0)) continue;
            double alpha = 1.0;
            for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
                Vector trial = axpy(alpha, d, x);
                Vector gt = p.grad(t, trial);
                const double pt = half_sq(gt);
                if (std::isfinite(pt) && pt <= phi + 1e-4 * alpha * slope) {
                    x = std::move(trial);
                    g = std::move(gt);
                    phi = pt;
                    moved = true;
                    break;
                }
            }
            if (moved) break;
        }
        if (!moved) break;
    }
    out.residual = std::sqrt(2.0 * phi);
    out.converged = out.residual <= tol;
    out.iterations = it;
    out.x = std::move(x);
    return out;
}

Vector newton_polish(const Potential& p, double t, const Vector& guess, double tol, int max_iter) {
    PolishResult r = polish(p, t, guess, tol, max_iter);
    if (!r.converged) {
        throw Error(ErrorCode::NoConvergence,
                    "gradient norm " + std::to_string(r.residual) + " after " + std::to_string(r.iterations) + " iterations");
    }
    return r.x;
}

double min_gap(const std::vector<CriticalPoint>& points) {
    if (points.size() < 2) throw Error(ErrorCode::TooFewPoints, "min_gap needs at least two points");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j)
            best = std::min(best, distance(points[i].location, points[j].location));
    return best;
}

std::vector<double> scalar_roots(const std::function<double(double)>& f, const std::function<double(double)>& df,
                                 double lo, double hi, std::size_t grid, double tol) {
    grid = std::max<std::size_t>(grid, 3);
    const double h = (hi - lo) / static_cast<double>(grid - 1);
    std::vector<double> xs(grid), fs(grid), ds(grid);
    for (std::size_t i = 0; i < grid; ++i) {
        xs[i] = i + 1 == grid ? hi : lo + h * static_cast<double>(i);
        fs[i] = f(xs[i]);
        ds[i] = df(xs[i]);
    }

    std::vector<double> roots;
    std::vector<bool> bracketed(grid, false);
    for (std::size_t i = 0; i + 1 < grid; ++i) {
        if (fs[i] == 0.0) {
            roots.push_back(xs[i]);
            bracketed[i] = true;
            continue;
        }
        if (fs[i + 1] == 0.0 || (fs[i] > 0.0) == (fs[i + 1] > 0.0)) continue;
        // Safeguarded Newton inside the sign-change bracket.
        double a = xs[i];
        double b = xs[i + 1];
        double fa = fs[i];
        double x = 0.5 * (a + b);
        for (int it = 0; it < 200; ++it) {
            const double fx = f(x);
            if (fx == 0.0) break;
            if ((fx > 0.0) == (fa > 0.0)) {
                a = x;
                fa = fx;
            } else {
                b = x;
            }
            if (b - a <= 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(x))) break;
            const double d = df(x);
            double next = d != 0.0 ? x - fx / d : 0.5 * (a + b);
            if (!(next > a && next < b)) next = 0.5 * (a + b);
            x = next;
        }
        roots.push_back(x);
        bracketed[i] = true;
    }
    if (fs[grid - 1] == 0.0) {
        roots.push_back(xs[grid - 1]);
        bracketed[grid - 1] = true;
    }

    // Tangential roots: f keeps its sign but touches zero where df changes sign.
    for (std::size_t i = 0; i + 1 < grid; ++i) {
        const bool turns = ds[i] == 0.0 || (ds[i] > 0.0) != (ds[i + 1] > 0.0);
        if (!turns) continue;
        const std::size_t j0 = i > 0 ? i - 1 : 0;
        const std::size_t j1 = std::min(grid - 1, i + 1);
        bool near_bracket = false;
        for (std::size_t j = j0; j <= j1; ++j) near_bracket = near_bracket || bracketed[j];
        if (near_bracket) continue;
        double a = xs[i];
        double b = xs[i + 1];
        double da = ds[i];
        double x = ds[i] == 0.0 ? a : 0.5 * (a + b);
        if (ds[i] != 0.0) {
            for (int it = 0; it < 200 && b - a > 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(x)); ++it) {
                x = 0.5 * (a + b);
                const double dx = df(x);
                if (dx == 0.0) break;
                if ((dx > 0.0) == (da > 0.0)) {
                    a = x;
                    da = dx;
                } else {
                    b = x;
                }
            }
        }
        if (std::abs(f(x)) <= tol) roots.push_back(x);
    }

    std::sort(roots.begin(), roots.end());
    std::vector<double> merged;
    for (double r : roots)
        if (merged.empty() || r - merged.back() > 1e-9 * (1.0 + std::abs(r))) merged.push_back(r);
    return merged;
}

CriticalSearch find_critical_points(const Potential& p, double t, const CriticalOptions& opts) {
    if (opts.grid_per_axis < 8) throw Error(ErrorCode::OutOfRange, "grid_per_axis must be at least 8");
    const Box& box = p.box();
    const std::size_t n = p.dim();
    const double merge_radius = 1e-6 * box.diameter();
    const Box search_box = box.inflated(0.5);

    CriticalSearch out;
    std::vector<Vector> found;
    if (n == 1) {
        const std::size_t grid = std::max(opts.dense_1d, opts.grid_per_axis);
        out.seeds = grid;
        auto f = [&](double x) { return p.grad(t, std::span<const double>(&x, 1))[0]; };
        auto df = [&](double x) { return p.hess(t, std::span<const double>(&x, 1))(0, 0); };
        for (double r : scalar_roots(f, df, box.lower[0], box.upper[0], grid, opts.tol_crit)) {
            PolishResult pr = polish(p, t, Vector{r}, opts.tol_crit, opts.max_iter);
            if (pr.converged) {
                found.push_back(pr.x);
            } else {
                ++out.diverged;
            }
        }
    } else {
        std::size_t per_axis = opts.grid_per_axis;
        while (per_axis > 8 && std::pow(static_cast<double>(per_axis), static_cast<double>(n)) > 2e5) per_axis /= 2;
        std::size_t total = 1;
        for (std::size_t i = 0; i < n; ++i) total *= per_axis;
        out.seeds = total;
        for (std::size_t s = 0; s < total; ++s) {
            Vector x(n);
            std::size_t rem = s;
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t k = rem % per_axis;
                rem /= per_axis;
                x[i] = box.lower[i] + (box.upper[i] - box.lower[i]) * (static_cast<double>(k) + 0.5) /
                                          static_cast<double>(per_axis);
            }
            PolishResult pr = polish(p, t, x, opts.tol_crit, opts.max_iter);
            if (pr.converged && search_box.contains(pr.x) && box.inflated(0.01).contains(pr.x)) {
                found.push_back(pr.x);
            } else if (!pr.converged) {
                ++out.diverged;
            }
        }
    }

    // Degenerate points converge slowly; push residuals further so that
    // approaches from different sides merge.
    for (Vector& x : found) {
        PolishResult more = polish(p, t, x, 0.0, 80);
        if (more.residual <= norm2(p.grad(t, x))) x = more.x;
    }

    std::sort(found.begin(), found.end());
    std::vector<Vector> unique;
    for (const Vector& x : found) {
        const bool dup = std::any_of(unique.begin(), unique.end(),
                                     [&](const Vector& y) { return distance(x, y) <= merge_radius; });
        if (!dup) unique.push_back(x);
    }

    double scale = 0.0;
    for (const Vector& x : unique) {
        CriticalPoint cp;
        cp.t = t;
        cp.location = x;
        cp.residual = norm2(p.grad(t, x));
        cp.hess_eigs = eig_sym(p.hess(t, x)).values;
        scale = std::max(scale, norm_inf(cp.hess_eigs));
        out.points.push_back(std::move(cp));
    }
    const double threshold = opts.tol_degenerate * std::max(scale, 1e-300);
    for (CriticalPoint& cp : out.points) cp.kind = classify(cp.hess_eigs, threshold);
    return out;
}

}  // namespace bvlab
