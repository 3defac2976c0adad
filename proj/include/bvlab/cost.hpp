#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bvlab/algebra.hpp"
#include "bvlab/error.hpp"
#include "bvlab/potential.hpp"

namespace bvlab {

// Path on [-N, N] with m uniform nodes. The first two and the last two nodes
// are pinned to the endpoints, which encodes v(-N) = u1, v(N) = u2 and the
// zero end velocities.
struct DiscretizedPath {
    double t = 0.0;
    double N = 0.0;
    std::size_t m = 0;
    double h = 0.0;
    std::vector<Vector> values;
    Vector u1;
    Vector u2;

    [[nodiscard]] double node_time(std::size_t i) const { return -N + static_cast<double>(i) * h; }
    [[nodiscard]] std::size_t dim() const { return u1.size(); }
    [[nodiscard]] std::size_t free_count() const { return m - 4; }
    [[nodiscard]] double arc_length() const;
    [[nodiscard]] DiscretizedPath reversed() const;
    // Throws OutOfRange / DimensionMismatch when an invariant fails.
    void validate() const;

    [[nodiscard]] static DiscretizedPath constant(double t, double N, std::size_t m, const Vector& u);
    [[nodiscard]] static DiscretizedPath straight(double t, double N, std::size_t m, const Vector& u1, const Vector& u2);
};

[[nodiscard]] double cost_functional(const DiscretizedPath& path, const Potential& p, const SpdMatrix& A,
                                     const SpdMatrix& B);

// Gradient with respect to the free nodes 2..m-3, flattened node-major.
[[nodiscard]] Vector cost_gradient(const DiscretizedPath& path, const Potential& p, const SpdMatrix& A,
                                   const SpdMatrix& B);

// Free-node coordinates of a path and their inverse.
[[nodiscard]] Vector free_coordinates(const DiscretizedPath& path);
void set_free_coordinates(DiscretizedPath& path, std::span<const double> x);

struct CostOptions {
    std::vector<double> schedule{4.0, 8.0, 16.0, 32.0};
    // Past the schedule, N doubles while the last level improved the value by
    // more than extend_tol * (1 + value), up to max_N.
    double extend_tol = 1e-4;
    double max_N = 128.0;
    double nodes_per_unit = 32.0;  // h = 1 / nodes_per_unit
    std::size_t random_restarts = 1;
    std::uint64_t seed = 0;
    bool chain_seeds = true;       // seeds assembled from heteroclinic shots between critical points
    bool richardson = true;        // repeat the final level at h/2 and extrapolate
    double opt_tol = 1e-8;         // gradient norm <= opt_tol * (1 + value)
    int max_iter = 1000;          // first level, cold seeds
    int refine_max_iter = 400;    // later levels, warm and chain seeds
    double tie_tol = 1e-12;
};

struct CostResult {
    double value = 0.0;           // extrapolated when richardson is on, else the discrete optimum
    double discrete_value = 0.0;  // optimum at the finest schedule level and the base step
    double fine_value = 0.0;      // same at h/2 (0 without the extrapolation)
    DiscretizedPath path;
    double N_used = 0.0;
    std::size_t restarts_used = 0;
    bool converged = false;
    double gradient_norm = 0.0;
    std::vector<double> level_values;  // best value after each level, extensions included
    std::string seed_label;
};

class CostNotConverged : public Error {
public:
    CostNotConverged(std::string what, CostResult best)
        : Error(ErrorCode::DidNotConverge, std::move(what)), best_(std::move(best)) {}
    [[nodiscard]] const CostResult& best() const noexcept { return best_; }

private:
    CostResult best_;
};

struct OptimizeResult {
    DiscretizedPath path;
    double value = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    double decrement = 0.0;  // -g^T p of the last undamped Newton step
    bool converged = false;  // gradient norm within tolerance, or a negligible Newton decrement
};

// Damped Newton on the free nodes with the banded exact Hessian.
[[nodiscard]] OptimizeResult optimize_path(DiscretizedPath path, const Potential& p, const SpdMatrix& A,
                                           const SpdMatrix& B, double opt_tol, int max_iter);

// Critical points and heteroclinic links at a frozen time, shared by many cost
// evaluations between points of the same critical set.
struct SeedLink {
    std::size_t from = 0;
    std::size_t to = 0;
    double drop = 0.0;
    std::vector<double> s;
    std::vector<Vector> v;
};

struct CostSeeds {
    double t = 0.0;
    std::vector<Vector> critical;
    std::vector<SeedLink> links;
};

[[nodiscard]] CostSeeds prepare_cost_seeds(const Potential& p, double t, const SpdMatrix& A, const SpdMatrix& B,
                                           bool with_links = true);

[[nodiscard]] CostResult minimize_cost(const Potential& p, double t, const Vector& u1, const Vector& u2,
                                       const SpdMatrix& A, const SpdMatrix& B, const CostOptions& opts = {});
[[nodiscard]] CostResult minimize_cost(const Potential& p, double t, const Vector& u1, const Vector& u2,
                                       const SpdMatrix& A, const SpdMatrix& B, const CostOptions& opts,
                                       const CostSeeds& seeds);

struct AxiomReport {
    std::vector<Vector> points;
    std::vector<std::vector<double>> cost;   // cost[i][j] = c(points[i], points[j])
    double tol = 1e-3;
    double max_symmetry_rel = 0.0;           // |c(a,b) - c(b,a)| / max(|c(a,b)|, |c(b,a)|)
    double min_lower_bound_margin = 0.0;     // min of c(a,b) - |F(a) - F(b)|
    double max_triangle_excess = 0.0;        // max of c(a,b) - c(a,m) - c(m,b)
    bool diagonal_zero = true;
    bool symmetric = true;
    bool lower_bound = true;
    bool triangle = true;
    std::vector<std::string> violations;
    [[nodiscard]] bool passed() const { return diagonal_zero && symmetric && lower_bound && triangle; }
};

// symmetry_tol is relative; tol is the absolute slack of the lower bound and the triangle inequality.
[[nodiscard]] AxiomReport check_cost_axioms(const Potential& p, double t, const std::vector<Vector>& points,
                                            const SpdMatrix& A, const SpdMatrix& B, const CostOptions& opts = {},
                                            double tol = 1e-3, double symmetry_tol = 1e-2);

[[nodiscard]] std::string path_csv(const DiscretizedPath& path);

}  // namespace bvlab
