#include "bvlab/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "bvlab/critical.hpp"
#include "bvlab/error.hpp"

namespace bvlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double power(double z, double p) {
    if (p == 0.0) return 1.0;
    const double r = std::round(p);
    if (r == p && std::abs(p) < 16.0) {
        double out = 1.0;
        for (int i = 0; i < static_cast<int>(r); ++i) out *= z;
        return out;
    }
    return std::pow(z, p);
}

// Condition on a polynomial q(z) = sum a_j z^j: either q^(order)(z) = value,
// or (order < 0) the integral of q over [0, z] equals value.
struct Condition {
    double z;
    int order;
    double value;
};

std::vector<double> fit_polynomial(std::size_t degree, const std::vector<Condition>& conds) {
    const std::size_t n = degree + 1;
    if (conds.size() != n) throw Error(ErrorCode::ConstructionFailed, "polynomial fit is not square");
    Matrix m(n, n);
    Vector rhs(n);
    for (std::size_t r = 0; r < n; ++r) {
        const auto& c = conds[r];
        rhs[r] = c.value;
        for (std::size_t j = 0; j < n; ++j) {
            if (c.order < 0) {
                m(r, j) = power(c.z, static_cast<double>(j + 1)) / static_cast<double>(j + 1);
                continue;
            }
            const auto d = static_cast<std::size_t>(c.order);
            if (j < d) continue;
            double fall = 1.0;
            for (std::size_t k = 0; k < d; ++k) fall *= static_cast<double>(j - k);
            m(r, j) = fall * power(c.z, static_cast<double>(j - d));
        }
    }
    return solve_dense(std::move(m), std::move(rhs));
}

std::vector<ScalarProfile::Term> poly_terms(const std::vector<double>& coeffs) {
    std::vector<ScalarProfile::Term> terms;
    for (std::size_t j = 0; j < coeffs.size(); ++j)
        if (coeffs[j] != 0.0) terms.push_back({coeffs[j], static_cast<double>(j)});
    return terms;
}

double terms_area(const std::vector<ScalarProfile::Term>& terms, double z) {
    double s = 0.0;
    for (const auto& t : terms) s += t.coef * power(z, t.power + 1.0) / (t.power + 1.0);
    return s;
}

class QuadraticModel final : public PotentialModel {
public:
    explicit QuadraticModel(std::vector<Polynomial> load) : load_(std::move(load)) {}

    [[nodiscard]] std::size_t dim() const override { return load_.size(); }

    [[nodiscard]] double energy(double t, std::span<const double> x) const override {
        double s = 0.0;
        for (std::size_t i = 0; i < load_.size(); ++i) {
            const double d = x[i] - load_[i](t);
            s += d * d;
        }
        return 0.5 * s;
    }

    [[nodiscard]] Vector gradient(double t, std::span<const double> x) const override {
        Vector g(load_.size());
        for (std::size_t i = 0; i < load_.size(); ++i) g[i] = x[i] - load_[i](t);
        return g;
    }

    [[nodiscard]] Matrix hessian(double, std::span<const double>) const override {
        return Matrix::identity(load_.size());
    }

    [[nodiscard]] double time_derivative(double t, std::span<const double> x) const override {
        double s = 0.0;
        for (std::size_t i = 0; i < load_.size(); ++i) s -= (x[i] - load_[i](t)) * load_[i].derivative(t);
        return s;
    }

    [[nodiscard]] Vector time_gradient(double t, std::span<const double>) const override {
        Vector g(load_.size());
        for (std::size_t i = 0; i < load_.size(); ++i) g[i] = -load_[i].derivative(t);
        return g;
    }

private:
    std::vector<Polynomial> load_;
};

class GradientFaultModel final : public PotentialModel {
public:
    GradientFaultModel(std::shared_ptr<const PotentialModel> inner, double factor)
        : inner_(std::move(inner)), factor_(factor) {}

    [[nodiscard]] std::size_t dim() const override { return inner_->dim(); }
    [[nodiscard]] double energy(double t, std::span<const double> x) const override { return inner_->energy(t, x); }
    [[nodiscard]] Vector gradient(double t, std::span<const double> x) const override {
        return scaled(factor_, inner_->gradient(t, x));
    }
    [[nodiscard]] Matrix hessian(double t, std::span<const double> x) const override {
        return inner_->hessian(t, x) * factor_;
    }
    [[nodiscard]] double time_derivative(double t, std::span<const double> x) const override {
        return inner_->time_derivative(t, x);
    }
    [[nodiscard]] Vector time_gradient(double t, std::span<const double> x) const override {
        return scaled(factor_, inner_->time_gradient(t, x));
    }

private:
    std::shared_ptr<const PotentialModel> inner_;
    double factor_;
};

class FrozenModel final : public PotentialModel {
public:
    FrozenModel(std::shared_ptr<const PotentialModel> inner, double t) : inner_(std::move(inner)), t_(t) {}

    [[nodiscard]] std::size_t dim() const override { return inner_->dim(); }
    [[nodiscard]] double energy(double, std::span<const double> x) const override { return inner_->energy(t_, x); }
    [[nodiscard]] Vector gradient(double, std::span<const double> x) const override {
        return inner_->gradient(t_, x);
    }
    [[nodiscard]] Matrix hessian(double, std::span<const double> x) const override {
        return inner_->hessian(t_, x);
    }
    [[nodiscard]] double time_derivative(double, std::span<const double>) const override { return 0.0; }
    [[nodiscard]] Vector time_gradient(double, std::span<const double> x) const override {
        return Vector(x.size(), 0.0);
    }

private:
    std::shared_ptr<const PotentialModel> inner_;
    double t_;
};

}  // namespace

bool Box::contains(std::span<const double> x) const {
    if (x.size() != lower.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!(x[i] >= lower[i] && x[i] <= upper[i])) return false;
    return true;
}

Box Box::inflated(double fraction) const {
    Box b = *this;
    for (std::size_t i = 0; i < lower.size(); ++i) {
        const double c = 0.5 * (lower[i] + upper[i]);
        const double h = 0.5 * (upper[i] - lower[i]) * (1.0 + fraction);
        b.lower[i] = c - h;
        b.upper[i] = c + h;
    }
    return b;
}

double Box::diameter() const { return distance(lower, upper); }

Vector Box::center() const {
    Vector c(lower.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = 0.5 * (lower[i] + upper[i]);
    return c;
}

Potential::Potential(std::shared_ptr<const PotentialModel> model, Box box, double t0, double t1, std::string name)
    : model_(std::move(model)), box_(std::move(box)), t0_(t0), t1_(t1), name_(std::move(name)) {
    if (!model_) throw Error(ErrorCode::ConstructionFailed, "null potential model");
    if (box_.dim() != model_->dim() || box_.upper.size() != model_->dim())
        throw Error(ErrorCode::DimensionMismatch, "box dimension does not match the potential");
    for (std::size_t i = 0; i < box_.dim(); ++i)
        if (!(box_.lower[i] < box_.upper[i])) throw Error(ErrorCode::ConstructionFailed, "empty box");
    if (!(t0_ <= t1_)) throw Error(ErrorCode::ConstructionFailed, "empty horizon");
}

Potential Potential::with_box(Box box) const { return Potential(model_, std::move(box), t0_, t1_, name_); }

double Polynomial::operator()(double t) const {
    double s = 0.0;
    for (std::size_t j = coeffs.size(); j-- > 0;) s = s * t + coeffs[j];
    return s;
}

double Polynomial::derivative(double t) const {
    double s = 0.0;
    for (std::size_t j = coeffs.size(); j-- > 1;) s = s * t + static_cast<double>(j) * coeffs[j];
    return s;
}

Potential make_quadratic(std::size_t dim, std::vector<Polynomial> load, std::optional<Box> box, double t0, double t1) {
    if (dim == 0 || load.size() != dim) throw Error(ErrorCode::DimensionMismatch, "quadratic load needs one polynomial per component");
    Box b = box.value_or(Box{Vector(dim, -5.0), Vector(dim, 5.0)});
    return Potential(std::make_shared<QuadraticModel>(std::move(load)), std::move(b), t0, t1, "quadratic");
}

ScalarProfile::ScalarProfile(std::vector<Piece> pieces, std::vector<Bump> bumps)
    : pieces_(std::move(pieces)), bumps_(std::move(bumps)) {
    if (pieces_.empty()) throw Error(ErrorCode::ConstructionFailed, "profile without pieces");
    for (std::size_t i = 1; i < pieces_.size(); ++i)
        if (!(pieces_[i].start > pieces_[i - 1].start)) throw Error(ErrorCode::ConstructionFailed, "profile pieces out of order");
}

ScalarProfile::Jet ScalarProfile::jet_of_piece(std::size_t index, double x) const {
    const Piece& pc = pieces_.at(index);
    const double dir = static_cast<double>(pc.direction);
    const double z = dir * (x - pc.anchor);
    Jet j{pc.value_at_anchor, 0.0, 0.0, 0.0};
    for (const auto& t : pc.terms) {
        const double p = t.power;
        const double zp = power(z, p);
        j.value += dir * t.coef * zp * z / (p + 1.0);
        j.d1 += t.coef * zp;
        if (p != 0.0) j.d2 += dir * t.coef * p * power(z, p - 1.0);
        if (p != 0.0 && p != 1.0) j.d3 += t.coef * p * (p - 1.0) * power(z, p - 2.0);
    }
    for (const auto& b : bumps_) {
        const double s = (x - b.center) / b.half_width;
        const double w = b.half_width;
        if (s >= 1.0) {
            j.value += b.amplitude * w * (1.0 - 4.0 / 3.0 + 6.0 / 5.0 - 4.0 / 7.0 + 1.0 / 9.0) * 2.0;
            continue;
        }
        if (s <= -1.0) continue;
        auto prim = [](double u) {
            return u - 4.0 * u * u * u / 3.0 + 6.0 * power(u, 5) / 5.0 - 4.0 * power(u, 7) / 7.0 + power(u, 9) / 9.0;
        };
        const double q = 1.0 - s * s;
        j.value += b.amplitude * w * (prim(s) - prim(-1.0));
        j.d1 += b.amplitude * q * q * q * q;
        j.d2 += b.amplitude * 4.0 * q * q * q * (-2.0 * s) / w;
        j.d3 += b.amplitude * (12.0 * q * q * 4.0 * s * s - 8.0 * q * q * q) / (w * w);
    }
    return j;
}

ScalarProfile::Jet ScalarProfile::jet(double x) const {
    auto it = std::upper_bound(pieces_.begin(), pieces_.end(), x,
                               [](double v, const Piece& pc) { return v < pc.start; });
    const std::size_t idx = it == pieces_.begin() ? 0 : static_cast<std::size_t>(it - pieces_.begin()) - 1;
    return jet_of_piece(idx, x);
}

TiltedProfileModel::TiltedProfileModel(ScalarProfile profile, double rate, double t_ref)
    : profile_(std::move(profile)), rate_(rate), t_ref_(t_ref) {}

double TiltedProfileModel::energy(double t, std::span<const double> x) const {
    return profile_.value(x[0]) - rate_ * (t - t_ref_) * x[0];
}

Vector TiltedProfileModel::gradient(double t, std::span<const double> x) const {
    return {profile_.d1(x[0]) - rate_ * (t - t_ref_)};
}

Matrix TiltedProfileModel::hessian(double, std::span<const double> x) const {
    Matrix h(1, 1);
    h(0, 0) = profile_.d2(x[0]);
    return h;
}

double TiltedProfileModel::time_derivative(double, std::span<const double> x) const { return -rate_ * x[0]; }

Vector TiltedProfileModel::time_gradient(double, std::span<const double>) const { return {-rate_}; }

ScalarProfile build_appendix_profile(const AppendixOptions& o, AppendixSpec* spec_out) {
    if (!(o.eta > 0.0 && o.eta <= 0.1)) throw Error(ErrorCode::ConstructionFailed, "eta must lie in (0, 0.1]");
    if (!(o.spike_fraction > 0.0 && o.spike_fraction < 1.0))
        throw Error(ErrorCode::ConstructionFailed, "spike fraction must lie in (0, 1)");
    if (!(o.plateau_slope <= -1.0)) throw Error(ErrorCode::ConstructionFailed, "plateau slope must be <= -1");
    if (!(o.curvature_at_9 > 0.0) || !(o.tail_cubic > 0.0))
        throw Error(ErrorCode::ConstructionFailed, "tail coefficients must be positive");

    using Term = ScalarProfile::Term;
    std::vector<ScalarProfile::Piece> pieces;

    // x <= 0: F1 = -x^3 exactly.
    pieces.push_back({-kInf, 0.0, +1, 0.0, {{-3.0, 2.0}}});
    // [0,1]: F1' = -x^2 (1-x)(3 + 42 x^4). Area -1, F1''(1) = 45 and F1'''(1) = 516.
    pieces.push_back({0.0, 0.0, +1, 0.0, {{-3.0, 2.0}, {3.0, 3.0}, {-42.0, 6.0}, {42.0, 7.0}}});

    // [1,2]: F1' = y(1-y)[(45 + beta y)(1-y)^k + c y], y = x - 1. The first
    // summand is a sharp bump just right of 1 holding spike_fraction of the
    // barrier area; it keeps the well at 1 alive under the tilt after t = 1.
    // beta matches F1'''(1+) to 516; c carries the remaining area and sets
    // the C^3 data at 2.
    const double c = 12.0 * (1.0 - o.spike_fraction) * o.eta;
    auto spike_area = [&](double k) {
        const double beta = 303.0 + 45.0 * k - c;
        return 45.0 / ((k + 2.0) * (k + 3.0)) + 2.0 * beta / ((k + 2.0) * (k + 3.0) * (k + 4.0));
    };
    const double target = o.spike_fraction * o.eta;
    double klo = 2.0;
    double khi = 1e6;
    if (!(spike_area(klo) > target && spike_area(khi) < target))
        throw Error(ErrorCode::ConstructionFailed, "cannot size the barrier spike");
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (klo + khi);
        (spike_area(mid) > target ? klo : khi) = mid;
    }
    const double k = 0.5 * (klo + khi);
    const double beta = 303.0 + 45.0 * k - c;
    // In w = 2 - x: F1' = c w - 2c w^2 + c w^3 + (45+beta) w^(k+1) - (45+2 beta) w^(k+2) + beta w^(k+3).
    std::vector<Term> spike = {{c, 1.0},           {-2.0 * c, 2.0},           {c, 3.0},
                               {45.0 + beta, k + 1.0}, {-(45.0 + 2.0 * beta), k + 2.0}, {beta, k + 3.0}};
    const double f2 = -1.0 + terms_area(spike, 1.0);
    pieces.push_back({1.0, 2.0, -1, f2, spike});

    // [2,3]: degree 6 in z = x - 2 matching (0, -c, -4c) at 2, (slope, 0, 0) at 3
    // and F1(3) = -3.
    const auto ramp = fit_polynomial(6, {{0.0, 0, 0.0},
                                         {0.0, 1, -c},
                                         {0.0, 2, -4.0 * c},
                                         {1.0, 0, o.plateau_slope},
                                         {1.0, 1, 0.0},
                                         {1.0, 2, 0.0},
                                         {1.0, -1, -3.0 - f2}});
    const auto ramp_terms = poly_terms(ramp);
    pieces.push_back({2.0, 2.0, +1, f2, ramp_terms});
    const double f3 = f2 + terms_area(ramp_terms, 1.0);

    // [3,8]: constant slope.
    pieces.push_back({3.0, 3.0, +1, f3, {{o.plateau_slope, 0.0}}});
    const double f8 = f3 + 5.0 * o.plateau_slope;

    // [8,9]: quintic from (slope, 0, 0) to (0, c9, 0).
    const auto drop = fit_polynomial(5, {{0.0, 0, o.plateau_slope},
                                         {0.0, 1, 0.0},
                                         {0.0, 2, 0.0},
                                         {1.0, 0, 0.0},
                                         {1.0, 1, o.curvature_at_9},
                                         {1.0, 2, 0.0}});
    const auto drop_terms = poly_terms(drop);
    pieces.push_back({8.0, 8.0, +1, f8, drop_terms});
    const double f9 = f8 + terms_area(drop_terms, 1.0);

    // [9,10]: F1' = c9 z + kappa z^3. Beyond 10 the same function written as
    // the cubic Taylor polynomial at 10 plus (kappa/4)(x-10)^4.
    const double c9 = o.curvature_at_9;
    const double kap = o.tail_cubic;
    pieces.push_back({9.0, 9.0, +1, f9, {{c9, 1.0}, {kap, 3.0}}});
    const double f10 = f9 + 0.5 * c9 + 0.25 * kap;
    pieces.push_back({10.0, 10.0, +1, f10, {{c9 + kap, 0.0}, {c9 + 3.0 * kap, 1.0}, {3.0 * kap, 2.0}, {kap, 3.0}}});

    std::vector<ScalarProfile::Bump> bumps;
    if (o.inject_root_at) {
        // Large enough to flip the sign of F1' wherever it is applied.
        bumps.push_back({*o.inject_root_at, 0.2, 3.0 + std::abs(o.plateau_slope)});
    }

    if (spec_out != nullptr) {
        AppendixSpec& s = *spec_out;
        s.eta = o.eta;
        s.knots = {0.0, 1.0, 2.0, 3.0, 8.0, 9.0, 10.0};
        s.x_max = 10.0;
        s.growth = 0.25 * kap;
        s.spike_exponent = k;
        s.spike_beta = beta;
        s.spike_shoulder = c;
        std::copy(ramp.begin(), ramp.end(), s.ramp_coeffs.begin());
        std::copy(drop.begin(), drop.end(), s.drop_coeffs.begin());
        s.plateau_slope = o.plateau_slope;
        s.curvature_at_9 = c9;
        s.tail_cubic = kap;
    }
    return ScalarProfile(std::move(pieces), std::move(bumps));
}

AppendixPotential make_appendix(double eta) {
    AppendixOptions o;
    o.eta = eta;
    return make_appendix(o);
}

AppendixPotential make_appendix(const AppendixOptions& options) {
    AppendixSpec spec;
    ScalarProfile profile = build_appendix_profile(options, &spec);
    Box box{{-2.0}, {12.0}};

    const auto roots = scalar_roots([&](double x) { return profile.d1(x); }, [&](double x) { return profile.d2(x); },
                                    box.lower[0], box.upper[0], 140001, 1e-10);
    const std::array<double, 4> expected{0.0, 1.0, 2.0, 9.0};
    std::ostringstream bad;
    for (double r : roots) {
        const bool known = std::any_of(expected.begin(), expected.end(), [&](double e) { return std::abs(r - e) <= 1e-8; });
        if (!known) bad << " spurious root of F1' at x=" << r << ";";
    }
    for (double e : expected) {
        const bool found = std::any_of(roots.begin(), roots.end(), [&](double r) { return std::abs(r - e) <= 1e-8; });
        if (!found) bad << " missing root of F1' at x=" << e << ";";
    }
    if (!bad.str().empty()) throw Error(ErrorCode::ConstructionFailed, "appendix profile violates the root layout:" + bad.str());
    spec.roots = roots;

    auto model = std::make_shared<TiltedProfileModel>(profile, 1.0, 1.0);
    Potential p(model, box, 0.0, 2.0, "appendix");
    return AppendixPotential{std::move(p), std::move(spec), std::move(profile)};
}

double minimizer_curve_appendix(double t) {
    if (!(t < 1.0)) throw Error(ErrorCode::OutOfRange, "the minimizer curve exists only for t < 1");
    return -std::sqrt((1.0 - t) / 3.0);
}

ScalarProfile build_septic_profile(const CustomSplineSpec& s) {
    const std::size_t n = s.knots.size();
    if (n < 2) throw Error(ErrorCode::ConstructionFailed, "custom spline needs at least two knots");
    for (const auto* v : {&s.values, &s.first, &s.second})
        if (v->size() != n) throw Error(ErrorCode::ConstructionFailed, "custom spline arrays must match the knots");
    if (!s.third.empty() && s.third.size() != n)
        throw Error(ErrorCode::ConstructionFailed, "custom spline third derivatives must match the knots");
    auto third = [&](std::size_t i) { return s.third.empty() ? 0.0 : s.third[i]; };
    for (std::size_t i = 1; i < n; ++i)
        if (!(s.knots[i] > s.knots[i - 1])) throw Error(ErrorCode::ConstructionFailed, "custom spline knots must increase");
    if (!(s.growth > 0.0)) throw Error(ErrorCode::ConstructionFailed, "custom spline growth must be positive");

    std::vector<ScalarProfile::Piece> pieces;
    pieces.push_back({-kInf, s.knots[0], +1, s.values[0], poly_terms({s.first[0], s.second[0], 0.5 * third(0)})});
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double len = s.knots[i + 1] - s.knots[i];
        const auto a = fit_polynomial(7, {{0.0, 0, s.values[i]},
                                          {0.0, 1, s.first[i]},
                                          {0.0, 2, s.second[i]},
                                          {0.0, 3, third(i)},
                                          {len, 0, s.values[i + 1]},
                                          {len, 1, s.first[i + 1]},
                                          {len, 2, s.second[i + 1]},
                                          {len, 3, third(i + 1)}});
        std::vector<double> g(7);
        for (std::size_t j = 1; j < 8; ++j) g[j - 1] = static_cast<double>(j) * a[j];
        pieces.push_back({s.knots[i], s.knots[i], +1, a[0], poly_terms(g)});
    }
    const std::size_t l = n - 1;
    pieces.push_back({s.knots[l], s.knots[l], +1, s.values[l],
                      poly_terms({s.first[l], s.second[l], 0.5 * third(l), 4.0 * s.growth})});
    return ScalarProfile(std::move(pieces));
}

Potential make_custom_spline(const CustomSplineSpec& s) {
    ScalarProfile profile = build_septic_profile(s);
    Box box = s.box.value_or(Box{{s.knots.front() - 2.0}, {s.knots.back() + 2.0}});
    auto model = std::make_shared<TiltedProfileModel>(std::move(profile), s.tilt_rate, s.tilt_reference);
    return Potential(model, std::move(box), s.t0, s.t1, "custom-spline");
}

Potential with_gradient_error(const Potential& p, double relative_error) {
    auto model = std::make_shared<GradientFaultModel>(p.shared_model(), 1.0 + relative_error);
    return Potential(model, p.box(), p.horizon_start(), p.horizon_end(), p.name() + "+gradient-fault");
}

Potential frozen_at(const Potential& p, double t_frozen) {
    auto model = std::make_shared<FrozenModel>(p.shared_model(), t_frozen);
    return Potential(model, p.box(), p.horizon_start(), p.horizon_end(), p.name() + "@frozen");
}

}  // namespace bvlab
