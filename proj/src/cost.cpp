#include "bvlab/cost.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <queue>
#include <random>
#include <sstream>

#include "bvlab/critical.hpp"
#include "bvlab/heteroclinic.hpp"

namespace bvlab {

namespace {

std::size_t node_count(double N, double per_unit) {
    return static_cast<std::size_t>(std::llround(2.0 * N * per_unit)) + 1;
}

void pin(DiscretizedPath& path) {
    path.values[0] = path.values[1] = path.u1;
    path.values[path.m - 2] = path.values[path.m - 1] = path.u2;
}

DiscretizedPath blank(double t, double N, std::size_t m, const Vector& u1, const Vector& u2) {
    DiscretizedPath path;
    path.t = t;
    path.N = N;
    path.m = m;
    path.h = 2.0 * N / static_cast<double>(m - 1);
    path.u1 = u1;
    path.u2 = u2;
    path.values.assign(m, u1);
    return path;
}

// Per-node pieces of the integrand shared by value, gradient and Hessian.
struct NodeTerms {
    Vector grad;  // grad F(v_i)
    Vector z;     // B^{-1} (grad F + A v'')
    Vector y;     // B v'
    Matrix hess;  // Hessian of F at v_i, filled by add_hessians
    double integrand = 0.0;
    double weight = 0.0;
};

// Refills `terms`, reusing its storage.
void fill_node_terms(const DiscretizedPath& path, const Potential& p, const Matrix& Am, const SpdMatrix& B,
                     std::vector<NodeTerms>& terms) {
    const std::size_t m = path.m;
    const std::size_t n = path.dim();
    const double h = path.h;
    const double ih2 = 1.0 / (h * h);
    const double i2h = 1.0 / (2.0 * h);
    terms.resize(m);
    Vector acc(n), vel(n), r(n);
    for (std::size_t i = 0; i < m; ++i) {
        NodeTerms& nt = terms[i];
        nt.grad = p.grad(path.t, path.values[i]);
        if (i == 0 || i + 1 == m) {
            // the clamped ends: zero velocity and the path is flat beyond them
            nt.z = B.solve(nt.grad);
            nt.y.assign(n, 0.0);
            nt.integrand = 0.5 * dot(nt.grad, nt.z);
            nt.weight = 0.5 * h;
            continue;
        }
        const Vector& a = path.values[i - 1];
        const Vector& b = path.values[i];
        const Vector& c = path.values[i + 1];
        for (std::size_t k = 0; k < n; ++k) {
            acc[k] = (a[k] - 2.0 * b[k] + c[k]) * ih2;
            vel[k] = (c[k] - a[k]) * i2h;
        }
        for (std::size_t k = 0; k < n; ++k) {
            double s = nt.grad[k];
            for (std::size_t l = 0; l < n; ++l) s += Am(k, l) * acc[l];
            r[k] = s;
        }
        nt.z = B.solve(r);
        nt.y = B.apply(vel);
        nt.integrand = 0.5 * (dot(r, nt.z) + dot(vel, nt.y));
        nt.weight = h;
    }
}

std::vector<NodeTerms> node_terms(const DiscretizedPath& path, const Potential& p, const Matrix& Am,
                                  const SpdMatrix& B) {
    std::vector<NodeTerms> terms;
    fill_node_terms(path, p, Am, B, terms);
    return terms;
}

void add_hessians(std::vector<NodeTerms>& terms, const DiscretizedPath& path, const Potential& p) {
    for (std::size_t i = 1; i + 1 < path.m; ++i) terms[i].hess = p.hess(path.t, path.values[i]);
}

double sum_value(const std::vector<NodeTerms>& terms) {
    double s = 0.0;
    for (const NodeTerms& nt : terms) s += nt.weight * nt.integrand;
    return s;
}

Vector gradient_from_terms(const DiscretizedPath& path, const Matrix& Am, const std::vector<NodeTerms>& terms) {
    const std::size_t m = path.m;
    const std::size_t n = path.dim();
    const double h = path.h;
    const double ih2 = 1.0 / (h * h);
    // az[i] = A z_i, shared by the three free nodes that see node i
    std::vector<double> az(m * n, 0.0);
    for (std::size_t i = 1; i + 1 < m; ++i)
        for (std::size_t k = 0; k < n; ++k) {
            double s = 0.0;
            for (std::size_t l = 0; l < n; ++l) s += Am(k, l) * terms[i].z[l];
            az[i * n + k] = s;
        }
    Vector g((m - 4) * n, 0.0);
    for (std::size_t j = 2; j + 2 < m; ++j) {
        const Matrix& H = terms[j].hess;
        const Vector& z = terms[j].z;
        double* out = g.data() + (j - 2) * n;
        const double wj = terms[j].weight, wm = terms[j - 1].weight, wp = terms[j + 1].weight;
        for (std::size_t k = 0; k < n; ++k) {
            double hz = 0.0;
            for (std::size_t l = 0; l < n; ++l) hz += H(k, l) * z[l];
            out[k] = wj * (hz - 2.0 * ih2 * az[j * n + k]) + ih2 * (wm * az[(j - 1) * n + k] + wp * az[(j + 1) * n + k]) +
                     (wm * terms[j - 1].y[k] - wp * terms[j + 1].y[k]) / (2.0 * h);
        }
    }
    return g;
}

// Third derivative of F contracted with z, by a forward difference of the Hessian.
Matrix hessian_derivative(const Potential& p, double t, const Vector& v, const Matrix& H, const Vector& z) {
    const std::size_t n = v.size();
    const double zn = norm2(z);
    if (zn == 0.0) return Matrix(n, n, 0.0);
    const double tau = 1e-5 * (1.0 + norm2(v));
    Vector vp = v;
    for (std::size_t k = 0; k < n; ++k) vp[k] += tau * z[k] / zn;
    Matrix d = (p.hess(t, vp) - H) * (zn / tau);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) d(i, j) = d(j, i) = 0.5 * (d(i, j) + d(j, i));
    return d;
}

BandedSpd hessian_band(const DiscretizedPath& path, const Potential& p, const Matrix& Am, const SpdMatrix& B,
                       const std::vector<NodeTerms>& terms) {
    const std::size_t m = path.m;
    const std::size_t n = path.dim();
    const double h = path.h;
    const double ih2 = 1.0 / (h * h);
    const Matrix Binv = B.inverse();
    const Matrix& Bm = B.matrix();
    BandedSpd K((m - 4) * n, 3 * n - 1);
    auto free_index = [&](std::size_t node) -> long { return node >= 2 && node + 2 < m ? static_cast<long>(node - 2) : -1; };
    const double qc[3] = {-1.0 / (2.0 * h), 0.0, 1.0 / (2.0 * h)};
    // R[a] is the derivative of the residual grad F + A v'' at node i with
    // respect to node i-1+a; the block (a, b) is R[a]^T B^{-1} R[b] + q_a q_b B.
    std::vector<double> R(3 * n * n), BR(3 * n * n);
    for (std::size_t i = 1; i + 1 < m; ++i) {
        const double w = terms[i].weight;
        const Matrix& H = terms[i].hess;
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c) {
                const double a = Am(r, c) * ih2;
                R[0 * n * n + r * n + c] = a;
                R[1 * n * n + r * n + c] = H(r, c) - 2.0 * a;
                R[2 * n * n + r * n + c] = a;
            }
        for (std::size_t b = 0; b < 3; ++b)
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = 0; c < n; ++c) {
                    double s = 0.0;
                    for (std::size_t l = 0; l < n; ++l) s += Binv(r, l) * R[b * n * n + l * n + c];
                    BR[b * n * n + r * n + c] = s;
                }
        for (std::size_t a = 0; a < 3; ++a) {
            const long fa = free_index(i - 1 + a);
            if (fa < 0) continue;
            for (std::size_t b = a; b < 3; ++b) {
                const long fb = free_index(i - 1 + b);
                if (fb < 0) continue;
                for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t c = 0; c < n; ++c) {
                        if (a == b && c > r) continue;
                        double s = Bm(r, c) * (qc[a] * qc[b]);
                        for (std::size_t l = 0; l < n; ++l) s += R[a * n * n + l * n + r] * BR[b * n * n + l * n + c];
                        K.add(static_cast<std::size_t>(fa) * n + r, static_cast<std::size_t>(fb) * n + c, w * s);
                    }
            }
        }
        const long fi = free_index(i);
        if (fi >= 0) {
            const Matrix T = hessian_derivative(p, path.t, path.values[i], H, terms[i].z);
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = 0; c <= r; ++c)
                    K.add(static_cast<std::size_t>(fi) * n + r, static_cast<std::size_t>(fi) * n + c, w * T(r, c));
        }
    }
    return K;
}

DiscretizedPath resample(const DiscretizedPath& src, std::size_t m_new) {
    DiscretizedPath out = blank(src.t, src.N, m_new, src.u1, src.u2);
    for (std::size_t i = 0; i < m_new; ++i) {
        const double s = out.node_time(i);
        const double x = (s + src.N) / src.h;
        const auto k = std::min(static_cast<std::size_t>(std::max(0.0, std::floor(x))), src.m - 2);
        const double w = std::clamp(x - static_cast<double>(k), 0.0, 1.0);
        Vector v(src.dim());
        for (std::size_t d = 0; d < v.size(); ++d) v[d] = (1.0 - w) * src.values[k][d] + w * src.values[k + 1][d];
        out.values[i] = std::move(v);
    }
    pin(out);
    return out;
}

// Window extension that spends the new time where lingering is cheapest: the
// interior node away from both endpoints with the smallest dwell rate
// 1/2 |grad F|^2_{B^-1}. Skipped when even that dwell would cost noticeably.
std::optional<DiscretizedPath> extend_dwell(const DiscretizedPath& src, double N_new, const Potential& p,
                                            const SpdMatrix& B, double current_value) {
    const double away = 0.05 * (1.0 + distance(src.u1, src.u2));
    std::size_t slow = 0;
    double rate = std::numeric_limits<double>::infinity();
    for (std::size_t i = 2; i + 2 < src.m; ++i) {
        if (distance(src.values[i], src.u1) <= away || distance(src.values[i], src.u2) <= away) continue;
        const Vector g = p.grad(src.t, src.values[i]);
        const double r = 0.5 * dot(g, B.solve(g));
        if (r < rate) {
            rate = r;
            slow = i;
        }
    }
    if (slow == 0 || rate * 2.0 * (N_new - src.N) > 1e-2 * (1.0 + std::abs(current_value))) return std::nullopt;
    const std::size_t extra = 2 * static_cast<std::size_t>(std::llround((N_new - src.N) / src.h));
    DiscretizedPath out = blank(src.t, N_new, src.m + extra, src.u1, src.u2);
    for (std::size_t i = 0; i < out.m; ++i) {
        if (i <= slow) out.values[i] = src.values[i];
        else if (i <= slow + extra) out.values[i] = src.values[slow];
        else out.values[i] = src.values[i - extra];
    }
    pin(out);
    return out;
}

// share_left of the added time goes before the path, the rest after it.
DiscretizedPath extend_constant(const DiscretizedPath& src, double N_new, double share_left) {
    const std::size_t m_new = src.m + 2 * static_cast<std::size_t>(std::llround((N_new - src.N) / src.h));
    DiscretizedPath out = blank(src.t, N_new, m_new, src.u1, src.u2);
    const auto pad = static_cast<std::size_t>(std::llround(share_left * static_cast<double>(m_new - src.m)));
    for (std::size_t i = 0; i < m_new; ++i) {
        if (i < pad) out.values[i] = src.u1;
        else if (i >= pad + src.m) out.values[i] = src.u2;
        else out.values[i] = src.values[i - pad];
    }
    pin(out);
    return out;
}

struct Polyline {
    std::vector<double> tau;
    std::vector<Vector> v;
};

DiscretizedPath from_polyline(double t, double N, std::size_t m, const Vector& u1, const Vector& u2,
                              const Polyline& line, double share_left) {
    DiscretizedPath out = blank(t, N, m, u1, u2);
    const double t0 = line.tau.front();
    const double span = line.tau.back() - t0;
    const double usable = 1.6 * N;
    const double scale = span > usable ? span / usable : 1.0;
    const double occupied = span / scale;
    const double start = -N + out.h + share_left * std::max(0.0, 2.0 * N - 2.0 * out.h - occupied);
    std::size_t k = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const double tau = t0 + (out.node_time(i) - start) * scale;
        if (tau <= t0) {
            out.values[i] = u1;
            continue;
        }
        if (tau >= line.tau.back()) {
            out.values[i] = u2;
            continue;
        }
        while (k + 2 < line.tau.size() && line.tau[k + 1] < tau) ++k;
        const double w = (tau - line.tau[k]) / (line.tau[k + 1] - line.tau[k]);
        Vector v(u1.size());
        for (std::size_t d = 0; d < v.size(); ++d) v[d] = (1.0 - w) * line.v[k][d] + w * line.v[k + 1][d];
        out.values[i] = std::move(v);
    }
    pin(out);
    return out;
}

// Seed shots are sampled finer than any node spacing so interpolation adds no kinks.
constexpr double seed_spacing = 1.0 / 64.0;

std::size_t match_critical(const CostSeeds& seeds, const Vector& u) {
    for (std::size_t i = 0; i < seeds.critical.size(); ++i)
        if (distance(seeds.critical[i], u) <= 1e-6 * (1.0 + norm2(u))) return i;
    return seeds.critical.size();
}

// Variation of F along the segment a -> b: the first-order cost of the straight line.
double straight_variation(const Potential& p, double t, const Vector& a, const Vector& b) {
    constexpr int samples = 64;
    double s = 0.0;
    double prev = p.eval(t, a);
    for (int k = 1; k <= samples; ++k) {
        const double w = static_cast<double>(k) / samples;
        Vector v(a.size());
        for (std::size_t d = 0; d < v.size(); ++d) v[d] = (1.0 - w) * a[d] + w * b[d];
        const double f = p.eval(t, v);
        s += std::abs(f - prev);
        prev = f;
    }
    return s;
}

// Cheapest route through the graph of shots (either direction) and straight
// segments between critical points. Segments are the straight seed's job, so
// they carry a penalty and only bridge what the shots leave unconnected.
std::optional<Polyline> chain_polyline(const Potential& p, const CostSeeds& seeds, const Vector& u1,
                                       const Vector& u2, double trim_rel) {
    constexpr double segment_penalty = 1.5;
    const std::size_t a = match_critical(seeds, u1);
    const std::size_t b = match_critical(seeds, u2);
    const std::size_t nc = seeds.critical.size();
    if (a == nc || b == nc || a == b || seeds.links.empty()) return std::nullopt;

    struct Edge {
        std::size_t from, to;
        double weight;
        long link;  // -1 for a straight segment
    };
    std::vector<Edge> edges;
    for (std::size_t e = 0; e < seeds.links.size(); ++e)
        edges.push_back({seeds.links[e].from, seeds.links[e].to, std::abs(seeds.links[e].drop), static_cast<long>(e)});
    for (std::size_t i = 0; i < nc; ++i)
        for (std::size_t j = i + 1; j < nc; ++j)
            edges.push_back({i, j, segment_penalty * straight_variation(p, seeds.t, seeds.critical[i], seeds.critical[j]),
                             -1});

    std::vector<double> dist(nc, std::numeric_limits<double>::infinity());
    std::vector<long> via(nc, -1);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    dist[a] = 0.0;
    queue.push({0.0, a});
    while (!queue.empty()) {
        const auto [d, u] = queue.top();
        queue.pop();
        if (d > dist[u]) continue;
        for (std::size_t e = 0; e < edges.size(); ++e) {
            std::size_t w;
            if (edges[e].from == u) w = edges[e].to;
            else if (edges[e].to == u) w = edges[e].from;
            else continue;
            const double nd = d + edges[e].weight;
            if (nd < dist[w]) {
                dist[w] = nd;
                via[w] = static_cast<long>(e);
                queue.push({nd, w});
            }
        }
    }
    if (!std::isfinite(dist[b])) return std::nullopt;

    std::vector<std::pair<std::size_t, bool>> route;  // edge, forward
    for (std::size_t node = b; node != a;) {
        const Edge& e = edges[static_cast<std::size_t>(via[node])];
        const bool forward = e.to == node;
        route.emplace_back(static_cast<std::size_t>(via[node]), forward);
        node = forward ? e.from : e.to;
    }
    std::reverse(route.begin(), route.end());
    if (route.size() == 1 && edges[route.front().first].link < 0) return std::nullopt;  // the straight seed

    Polyline line;
    line.tau.push_back(0.0);
    line.v.push_back(u1);
    for (const auto& [ei, forward] : route) {
        const Edge& edge = edges[ei];
        const Vector& start = seeds.critical[forward ? edge.from : edge.to];
        const Vector& end = seeds.critical[forward ? edge.to : edge.from];
        if (edge.link < 0) {
            line.tau.push_back(line.tau.back() + std::max(1.0, distance(start, end)));
            line.v.push_back(end);
            continue;
        }
        const SeedLink& l = seeds.links[static_cast<std::size_t>(edge.link)];
        const double trim = trim_rel * std::max(1.0, distance(start, end));
        std::vector<std::size_t> idx(l.s.size());
        for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = forward ? k : idx.size() - 1 - k;
        // cut only the slow tails: the prefix near start and the suffix near end
        std::size_t lo = 0, hi = idx.size();
        while (lo < hi && distance(l.v[idx[lo]], start) <= trim) ++lo;
        while (hi > lo && distance(l.v[idx[hi - 1]], end) <= trim) --hi;
        const double base = line.tau.back();
        double first = std::numeric_limits<double>::quiet_NaN();
        for (std::size_t q = lo; q < hi; ++q) {
            const std::size_t k = idx[q];
            const double s = forward ? l.s[k] : -l.s[k];
            if (std::isnan(first)) first = s;
            line.tau.push_back(base + 0.05 + (s - first));
            line.v.push_back(l.v[k]);
        }
        line.tau.push_back(line.tau.back() + 0.05);
        line.v.push_back(end);
    }
    return line;
}

struct Seed {
    std::string label;
    DiscretizedPath path;
};

std::vector<Seed> level_seeds(const Potential& p, const CostSeeds& seeds, double t, double N, std::size_t m,
                              const Vector& u1, const Vector& u2, const CostOptions& opts, double share_left) {
    std::vector<Seed> out;
    out.push_back({"straight", DiscretizedPath::straight(t, N, m, u1, u2)});

    for (const Vector& c : seeds.critical) {
        if (distance(c, u1) <= 1e-6 * (1.0 + norm2(c)) || distance(c, u2) <= 1e-6 * (1.0 + norm2(c))) continue;
        Polyline line;
        line.tau = {0.0, 1.0, 2.0};
        line.v = {u1, c, u2};
        DiscretizedPath pth = blank(t, N, m, u1, u2);
        for (std::size_t i = 0; i < m; ++i) {
            const double x = (pth.node_time(i) + N) / N;  // 0 .. 2
            const std::size_t k = x < 1.0 ? 0 : 1;
            const double w = std::clamp(x - static_cast<double>(k), 0.0, 1.0);
            Vector v(u1.size());
            for (std::size_t d = 0; d < v.size(); ++d) v[d] = (1.0 - w) * line.v[k][d] + w * line.v[k + 1][d];
            pth.values[i] = std::move(v);
        }
        pin(pth);
        std::ostringstream label;
        label << "via-critical";
        for (double x : c) label << ' ' << x;
        out.push_back({label.str(), std::move(pth)});
    }

    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double amp = 0.1 * (1.0 + distance(u1, u2));
    for (std::size_t r = 0; r < opts.random_restarts; ++r) {
        DiscretizedPath pth = DiscretizedPath::straight(t, N, m, u1, u2);
        std::vector<Vector> xi(3, Vector(u1.size()));
        for (Vector& x : xi)
            for (double& c : x) c = amp * normal(rng);
        for (std::size_t i = 2; i + 2 < m; ++i) {
            const double phase = std::acos(-1.0) * (pth.node_time(i) + N) / (2.0 * N);
            for (std::size_t k = 0; k < 3; ++k)
                for (std::size_t d = 0; d < u1.size(); ++d)
                    pth.values[i][d] += xi[k][d] * std::sin(static_cast<double>(k + 1) * phase);
        }
        out.push_back({"random-" + std::to_string(r), std::move(pth)});
    }

    if (opts.chain_seeds) {
        // clip the slow tails harder until the chain fits; compress time only as a last resort
        for (double trim : {1e-3, 3e-3, 1e-2, 3e-2, 1e-1}) {
            const auto line = chain_polyline(p, seeds, u1, u2, trim);
            if (!line) break;
            if (line->tau.back() - line->tau.front() <= 1.6 * N || trim == 1e-1) {
                out.push_back({"chain", from_polyline(t, N, m, u1, u2, *line, share_left)});
                break;
            }
        }
    }
    return out;
}

bool better(const OptimizeResult& a, const OptimizeResult& b, double tie_tol) {
    if (a.value < b.value - tie_tol) return true;
    if (a.value > b.value + tie_tol) return false;
    return a.path.arc_length() < b.path.arc_length();
}

}  // namespace

double DiscretizedPath::arc_length() const {
    double s = 0.0;
    for (std::size_t i = 1; i < values.size(); ++i) s += distance(values[i], values[i - 1]);
    return s;
}

DiscretizedPath DiscretizedPath::reversed() const {
    DiscretizedPath r = *this;
    std::reverse(r.values.begin(), r.values.end());
    std::swap(r.u1, r.u2);
    return r;
}

void DiscretizedPath::validate() const {
    if (m < 9) throw Error(ErrorCode::OutOfRange, "a path needs at least 9 nodes");
    if (!(N > 0.0)) throw Error(ErrorCode::OutOfRange, "path half-width must be positive");
    if (values.size() != m) throw Error(ErrorCode::DimensionMismatch, "node count does not match the value list");
    if (u2.size() != u1.size()) throw Error(ErrorCode::DimensionMismatch, "endpoint dimensions differ");
    if (std::abs(h - 2.0 * N / static_cast<double>(m - 1)) > 1e-12 * h)
        throw Error(ErrorCode::OutOfRange, "step does not match 2N/(m-1)");
    for (const Vector& v : values) {
        if (v.size() != u1.size()) throw Error(ErrorCode::DimensionMismatch, "node dimension differs from the endpoints");
        for (double x : v)
            if (!std::isfinite(x)) throw Error(ErrorCode::OutOfRange, "non-finite node value");
    }
    if (values[0] != u1 || values[1] != u1 || values[m - 2] != u2 || values[m - 1] != u2)
        throw Error(ErrorCode::OutOfRange, "pinned nodes do not match the endpoints");
}

DiscretizedPath DiscretizedPath::constant(double t, double N, std::size_t m, const Vector& u) {
    DiscretizedPath path = blank(t, N, m, u, u);
    path.validate();
    return path;
}

DiscretizedPath DiscretizedPath::straight(double t, double N, std::size_t m, const Vector& u1, const Vector& u2) {
    DiscretizedPath path = blank(t, N, m, u1, u2);
    for (std::size_t i = 0; i < m; ++i) {
        const double w = (path.node_time(i) + N) / (2.0 * N);
        Vector v(u1.size());
        for (std::size_t d = 0; d < v.size(); ++d) v[d] = (1.0 - w) * u1[d] + w * u2[d];
        path.values[i] = std::move(v);
    }
    pin(path);
    path.validate();
    return path;
}

namespace {

double functional(const DiscretizedPath& path, const Potential& p, const Matrix& Am, const SpdMatrix& B) {
    path.validate();
    return sum_value(node_terms(path, p, Am, B));
}

Vector gradient(const DiscretizedPath& path, const Potential& p, const Matrix& Am, const SpdMatrix& B) {
    path.validate();
    std::vector<NodeTerms> terms = node_terms(path, p, Am, B);
    add_hessians(terms, path, p);
    return gradient_from_terms(path, Am, terms);
}

}  // namespace

double cost_functional(const DiscretizedPath& path, const Potential& p, const SpdMatrix& A, const SpdMatrix& B) {
    return functional(path, p, A.matrix(), B);
}

Vector cost_gradient(const DiscretizedPath& path, const Potential& p, const SpdMatrix& A, const SpdMatrix& B) {
    return gradient(path, p, A.matrix(), B);
}

Vector free_coordinates(const DiscretizedPath& path) {
    Vector x;
    x.reserve(path.free_count() * path.dim());
    for (std::size_t i = 2; i + 2 < path.m; ++i) x.insert(x.end(), path.values[i].begin(), path.values[i].end());
    return x;
}

void set_free_coordinates(DiscretizedPath& path, std::span<const double> x) {
    const std::size_t n = path.dim();
    if (x.size() != path.free_count() * n) throw Error(ErrorCode::DimensionMismatch, "free coordinate count");
    for (std::size_t i = 2; i + 2 < path.m; ++i)
        std::copy(x.begin() + static_cast<std::ptrdiff_t>((i - 2) * n),
                  x.begin() + static_cast<std::ptrdiff_t>((i - 1) * n), path.values[i].begin());
}

namespace {

OptimizeResult optimize(DiscretizedPath path, const Potential& p, const Matrix& A, const SpdMatrix& B, double opt_tol,
                        int max_iter) {
    path.validate();
    OptimizeResult res;
    std::vector<NodeTerms> terms = node_terms(path, p, A, B);
    add_hessians(terms, path, p);
    double value = sum_value(terms);
    Vector g = gradient_from_terms(path, A, terms);
    DiscretizedPath trial = path;  // line-search scratch, same pinned nodes
    std::vector<NodeTerms> trial_terms;
    double mu = 0.0;
    int it = 0;
    for (; it < max_iter; ++it) {
        const double gn = norm2(g);
        if (gn <= opt_tol * (1.0 + std::abs(value))) {
            res.converged = true;
            break;
        }
        const BandedSpd K0 = hessian_band(path, p, A, B, terms);
        double diag_max = 0.0;
        for (std::size_t i = 0; i < K0.size(); ++i) diag_max = std::max(diag_max, std::abs(K0.get(i, i)));
        const Vector ones(K0.size(), 1.0);

        bool stepped = false;
        for (int attempt = 0; attempt < 40 && !stepped; ++attempt) {
            BandedSpd K = K0;
            if (mu > 0.0) K.add_diagonal(ones, mu);
            if (!K.factor()) {
                mu = std::max(10.0 * mu, 1e-10 * diag_max);
                continue;
            }
            Vector dir = K.solve(g);
            for (double& d : dir) d = -d;
            const double slope = dot(g, dir);
            if (!(slope < 0.0)) {
                mu = std::max(10.0 * mu, 1e-10 * diag_max);
                continue;
            }
            if (mu <= 1e-8 * diag_max) {
                res.decrement = -slope;
                // a positive-definite Newton model predicting less decrease than the
                // value's own rounding: soft modes keep the gradient above tolerance
                if (-slope <= 2e-11 * (1.0 + std::abs(value))) {
                    res.converged = true;
                    break;
                }
            }
            const Vector x0 = free_coordinates(path);
            Vector x(x0.size());
            double alpha = 1.0;
            for (int ls = 0; ls < 30; ++ls, alpha *= 0.5) {
                for (std::size_t k = 0; k < x.size(); ++k) x[k] = x0[k] + alpha * dir[k];
                set_free_coordinates(trial, x);
                fill_node_terms(trial, p, A, B, trial_terms);
                const double tv = sum_value(trial_terms);
                if (std::isfinite(tv) && tv <= value + 1e-4 * alpha * slope) {
                    std::swap(path, trial);
                    std::swap(terms, trial_terms);
                    value = tv;
                    stepped = true;
                    break;
                }
            }

            if (stepped) {
                if (alpha == 1.0) mu *= 0.1;
                if (mu < 1e-14 * diag_max) mu = 0.0;
            } else {
                mu = std::max(10.0 * mu, 1e-8 * diag_max);
            }
        }
        if (res.converged || !stepped) break;
        add_hessians(terms, path, p);
        g = gradient_from_terms(path, A, terms);
    }
    res.iterations = it;
    res.value = value;
    res.gradient_norm = norm2(g);
    if (!res.converged) res.converged = res.gradient_norm <= opt_tol * (1.0 + std::abs(value));
    res.path = std::move(path);
    return res;
}

}  // namespace

OptimizeResult optimize_path(DiscretizedPath path, const Potential& p, const SpdMatrix& A, const SpdMatrix& B,
                             double opt_tol, int max_iter) {
    return optimize(std::move(path), p, A.matrix(), B, opt_tol, max_iter);
}

CostSeeds prepare_cost_seeds(const Potential& p, double t, const SpdMatrix& A, const SpdMatrix& B, bool with_links) {
    CostSeeds seeds;
    seeds.t = t;
    const CriticalSearch found = find_critical_points(p, t);
    double scale = 0.0;
    for (const CriticalPoint& c : found.points) {
        seeds.critical.push_back(c.location);
        for (double e : c.hess_eigs) scale = std::max(scale, std::abs(e));
    }
    if (!with_links) return seeds;
    const double degenerate_tol = CriticalOptions{}.tol_degenerate * std::max(scale, 1.0) / B.coercivity();
    ShotControl ctrl;
    ctrl.check_robustness = false;
    ctrl.sample_spacing = seed_spacing;
    for (std::size_t i = 0; i < seeds.critical.size(); ++i) {
        EquilibriumSpectrum sp;
        try {
            sp = linearize_equilibrium(p, t, seeds.critical[i], A, B, degenerate_tol, 1e-7);
        } catch (const Error&) {
            continue;
        }
        for (const Vector& d : candidate_directions(sp)) {
            Heteroclinic h;
            try {
                h = shoot_heteroclinic(p, t, seeds.critical[i], d, 1e-4, A, B, ctrl);
            } catch (const Error&) {
                continue;
            }
            std::size_t j = seeds.critical.size();
            for (std::size_t k = 0; k < seeds.critical.size(); ++k)
                if (distance(seeds.critical[k], h.to_point) <= 1e-4 * (1.0 + norm2(h.to_point))) j = k;
            if (j == seeds.critical.size() || j == i) continue;
            SeedLink link;
            link.from = i;
            link.to = j;
            link.drop = h.energy_drop;
            link.s = std::move(h.s);
            link.v = std::move(h.v);
            seeds.links.push_back(std::move(link));
        }
    }
    return seeds;
}

CostResult minimize_cost(const Potential& p, double t, const Vector& u1, const Vector& u2, const SpdMatrix& A,
                         const SpdMatrix& B, const CostOptions& opts) {
    const CostSeeds seeds = prepare_cost_seeds(p, t, A, B, opts.chain_seeds);
    return minimize_cost(p, t, u1, u2, A, B, opts, seeds);
}

CostResult minimize_cost(const Potential& p, double t, const Vector& u1, const Vector& u2, const SpdMatrix& A,
                         const SpdMatrix& B, const CostOptions& opts, const CostSeeds& shared) {
    if (u1.size() != p.dim() || u2.size() != p.dim()) throw Error(ErrorCode::DimensionMismatch, "cost endpoints");
    // a non-critical endpoint joins the graph through the motion released from rest there
    const CostSeeds* use = &shared;
    CostSeeds augmented;
    if (opts.chain_seeds) {
        for (const Vector* end : {&u1, &u2}) {
            if (match_critical(*use, *end) < use->critical.size()) continue;
            if (use == &shared) {
                augmented = shared;
                use = &augmented;
            }
            try {
                ShotControl ctrl;
                ctrl.check_robustness = false;
                ctrl.sample_spacing = seed_spacing;
                Heteroclinic h = release_from_rest(p, t, *end, A, B, false, ctrl);
                const std::size_t j = match_critical(augmented, h.to_point);
                augmented.critical.push_back(*end);
                if (j == augmented.critical.size() - 1) continue;
                SeedLink link;
                link.from = augmented.critical.size() - 1;
                link.to = j;
                link.drop = h.energy_drop;
                link.s = std::move(h.s);
                link.v = std::move(h.v);
                augmented.links.push_back(std::move(link));
            } catch (const Error&) {
                if (match_critical(augmented, *end) == augmented.critical.size()) augmented.critical.push_back(*end);
            }
        }
    }
    const CostSeeds& seeds = *use;
    // resting costs 1/2 |grad F|^2 per unit time, so idle time belongs at a critical end
    auto critical_end = [&](const Vector& u) { return norm2(p.grad(t, u)) <= 1e-8 * (1.0 + std::abs(p.eval(t, u))); };
    const bool rest1 = critical_end(u1), rest2 = critical_end(u2);
    const double share_left = rest1 == rest2 ? 0.5 : (rest1 ? 1.0 : 0.0);
    const Matrix& Am = A.matrix();
    if (opts.schedule.empty()) throw Error(ErrorCode::OutOfRange, "empty N schedule");
    CostResult result;
    if (u1 == u2) {
        const double N = opts.schedule.front();
        result.path = DiscretizedPath::constant(t, N, node_count(N, opts.nodes_per_unit), u1);
        result.N_used = N;
        result.converged = true;
        result.level_values.assign(opts.schedule.size(), 0.0);
        result.seed_label = "constant";
        return result;
    }

    std::optional<OptimizeResult> best;  // best converged optimum over all levels
    std::string best_label;
    std::optional<OptimizeResult> warm;  // lowest path of the previous level, converged or not
    std::string warm_label;
    double N = 0.0;
    bool level_converged = false;
    for (std::size_t level = 0;; ++level) {
        if (level < opts.schedule.size()) {
            N = opts.schedule[level];
        } else {
            // keep doubling the window while it still pays
            const std::size_t L = result.level_values.size();
            const double last = result.level_values[L - 1];
            const double gain = L >= 2 ? result.level_values[L - 2] - last : 0.0;
            const bool pays = !level_converged || std::isinf(last) || gain > opts.extend_tol * (1.0 + std::abs(last));
            if (2.0 * N > opts.max_N || !pays) break;
            N *= 2.0;
        }
        const std::size_t m = node_count(N, opts.nodes_per_unit);
        std::vector<Seed> cands;
        if (warm) {
            cands.push_back({"warm:" + warm_label, extend_constant(warm->path, N, share_left)});
            if (auto dwell = extend_dwell(warm->path, N, p, B, warm->value)) cands.push_back({"warm:" + warm_label, std::move(*dwell)});
            CostOptions chain_only = opts;
            chain_only.random_restarts = 0;
            for (Seed& s : level_seeds(p, seeds, t, N, m, u1, u2, chain_only, share_left))
                if (s.label == "chain") cands.push_back(std::move(s));
        } else {
            cands = level_seeds(p, seeds, t, N, m, u1, u2, opts, share_left);
        }
        std::optional<OptimizeResult> level_best;
        std::string level_label;
        std::optional<OptimizeResult> level_fallback;
        std::string fallback_label;
        for (Seed& s : cands) {
            OptimizeResult r = optimize(std::move(s.path), p, Am, B, opts.opt_tol,
                                        level == 0 ? opts.max_iter : opts.refine_max_iter);
            const std::string label = s.label.rfind("warm:", 0) == 0 ? s.label.substr(5) : s.label;
            if (!r.converged) {
                if (!level_fallback || better(r, *level_fallback, opts.tie_tol)) {
                    level_fallback = std::move(r);
                    fallback_label = label;
                }
                continue;
            }
            if (!level_best || better(r, *level_best, opts.tie_tol)) {
                level_best = std::move(r);
                level_label = label;
            }
        }
        result.restarts_used = cands.size();
        level_converged = level_best.has_value();
        if (level_best && (!level_fallback || level_best->value <= level_fallback->value)) {
            warm = level_best;
            warm_label = level_label;
        } else if (level_fallback) {
            warm = level_fallback;
            warm_label = fallback_label;
        }
        if (level_best && (!best || level_best->value <= best->value)) {
            best = std::move(level_best);
            best_label = level_label;
            result.N_used = N;
        }
        result.level_values.push_back(best ? best->value : std::numeric_limits<double>::infinity());
    }

    if (!best) {
        result.value = result.discrete_value = warm->value;
        result.path = warm->path;
        result.gradient_norm = warm->gradient_norm;
        result.seed_label = warm_label;
        throw CostNotConverged("no restart reached the gradient tolerance", result);
    }
    result.discrete_value = best->value;
    result.value = best->value;
    result.path = best->path;
    result.gradient_norm = best->gradient_norm;
    result.converged = true;
    result.seed_label = best_label;

    if (opts.richardson) {
        OptimizeResult fine = optimize(resample(best->path, 2 * best->path.m - 1), p, Am, B, opts.opt_tol,
                                            opts.max_iter);
        if (fine.converged) {
            result.fine_value = fine.value;
            result.value = std::max(0.0, (4.0 * fine.value - best->value) / 3.0);
            result.path = std::move(fine.path);
            result.gradient_norm = fine.gradient_norm;
        }
    }
    return result;
}

AxiomReport check_cost_axioms(const Potential& p, double t, const std::vector<Vector>& points, const SpdMatrix& A,
                              const SpdMatrix& B, const CostOptions& opts, double tol, double symmetry_tol) {
    if (points.size() < 2) throw Error(ErrorCode::TooFewPoints, "cost axioms need at least two points");
    AxiomReport rep;
    rep.points = points;
    rep.tol = tol;
    const std::size_t k = points.size();
    const CostSeeds seeds = prepare_cost_seeds(p, t, A, B, opts.chain_seeds);
    rep.cost.assign(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            try {
                rep.cost[i][j] = minimize_cost(p, t, points[i], points[j], A, B, opts, seeds).value;
            } catch (const CostNotConverged& e) {
                rep.cost[i][j] = e.best().value;
                rep.violations.push_back("c(" + std::to_string(i) + "," + std::to_string(j) + ") did not converge");
            }
        }
    auto name = [&](std::size_t i) {
        std::ostringstream o;
        for (std::size_t d = 0; d < points[i].size(); ++d) o << (d ? "," : "") << points[i][d];
        return o.str();
    };
    rep.min_lower_bound_margin = std::numeric_limits<double>::infinity();
    rep.max_triangle_excess = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
        if (rep.cost[i][i] != 0.0) {
            rep.diagonal_zero = false;
            rep.violations.push_back("c(" + name(i) + "," + name(i) + ") is not zero");
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (i == j) continue;
            const double a = rep.cost[i][j], b = rep.cost[j][i];
            const double rel = std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
            rep.max_symmetry_rel = std::max(rep.max_symmetry_rel, rel);
            if (rel > symmetry_tol && i < j) {
                rep.symmetric = false;
                rep.violations.push_back("asymmetric pair (" + name(i) + ", " + name(j) + ")");
            }
            const double margin = a - std::abs(p.eval(t, points[i]) - p.eval(t, points[j]));
            rep.min_lower_bound_margin = std::min(rep.min_lower_bound_margin, margin);
            if (margin < -tol) {
                rep.lower_bound = false;
                rep.violations.push_back("c(" + name(i) + "," + name(j) + ") below the energy gap");
            }
            for (std::size_t mid = 0; mid < k; ++mid) {
                if (mid == i || mid == j) continue;
                const double excess = a - rep.cost[i][mid] - rep.cost[mid][j];
                rep.max_triangle_excess = std::max(rep.max_triangle_excess, excess);
                if (excess > tol) {
                    rep.triangle = false;
                    rep.violations.push_back("triangle (" + name(i) + ", " + name(mid) + ", " + name(j) + ")");
                }
            }
        }
    }
    if (!std::isfinite(rep.max_triangle_excess)) rep.max_triangle_excess = 0.0;
    return rep;
}

std::string path_csv(const DiscretizedPath& path) {
    std::string out = "s";
    for (std::size_t i = 0; i < path.dim(); ++i) out += ",v_" + std::to_string(i + 1);
    out += '\n';
    char buf[64];
    for (std::size_t i = 0; i < path.m; ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", path.node_time(i));
        out += buf;
        for (double x : path.values[i]) {
            std::snprintf(buf, sizeof buf, ",%.17g", x);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

}  // namespace bvlab
