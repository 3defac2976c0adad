#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bvlab/algebra.hpp"
#include "bvlab/potential.hpp"

namespace bvlab {

enum class CriticalKind { Minimum, Saddle, Maximum, Degenerate };

[[nodiscard]] std::string to_string(CriticalKind kind);

struct CriticalPoint {
    double t = 0.0;
    Vector location;
    double residual = 0.0;
    Vector hess_eigs;
    CriticalKind kind = CriticalKind::Degenerate;
};

struct CriticalOptions {
    std::size_t grid_per_axis = 64;
    double tol_crit = 1e-9;
    double tol_degenerate = 1e-6;  // relative to the largest |Hessian eigenvalue| in the set
    std::size_t dense_1d = 20001;  // sign-change grid of the one-dimensional fast path
    int max_iter = 100;
};

struct CriticalSearch {
    std::vector<CriticalPoint> points;
    std::size_t seeds = 0;
    std::size_t diverged = 0;
};

[[nodiscard]] CriticalSearch find_critical_points(const Potential& p, double t, const CriticalOptions& opts = {});

struct PolishResult {
    Vector x;
    double residual = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Armijo-damped Newton on the gradient, falling back to descent on
// 1/2 |grad|^2 when the Hessian is singular. Never throws.
[[nodiscard]] PolishResult polish(const Potential& p, double t, Vector guess, double tol, int max_iter);

// Throws NoConvergence if the gradient norm does not reach tol.
[[nodiscard]] Vector newton_polish(const Potential& p, double t, const Vector& guess, double tol = 1e-9,
                                   int max_iter = 100);

[[nodiscard]] double min_gap(const std::vector<CriticalPoint>& points);

// Classifies with the degeneracy threshold tol_degenerate * scale.
[[nodiscard]] CriticalKind classify(const Vector& eigs, double threshold);

// Roots of a scalar C^1 function on [lo, hi]: sign changes of f on a uniform
// grid refined by safeguarded Newton, plus tangential roots located as sign
// changes of df where |f| <= tol. Sorted, duplicates merged.
[[nodiscard]] std::vector<double> scalar_roots(const std::function<double(double)>& f,
                                               const std::function<double(double)>& df, double lo, double hi,
                                               std::size_t grid, double tol);

}  // namespace bvlab
