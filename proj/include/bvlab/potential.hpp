#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bvlab/algebra.hpp"

namespace bvlab {

struct Box {
    Vector lower;
    Vector upper;

    [[nodiscard]] std::size_t dim() const noexcept { return lower.size(); }
    [[nodiscard]] bool contains(std::span<const double> x) const;
    [[nodiscard]] Box inflated(double fraction) const;  // half-widths scaled by (1 + fraction)
    [[nodiscard]] double diameter() const;
    [[nodiscard]] Vector center() const;
};

// Callbacks of a time-dependent energy F(t, x). Implementations are pure.
class PotentialModel {
public:
    virtual ~PotentialModel() = default;

    [[nodiscard]] virtual std::size_t dim() const = 0;
    [[nodiscard]] virtual double energy(double t, std::span<const double> x) const = 0;
    [[nodiscard]] virtual Vector gradient(double t, std::span<const double> x) const = 0;
    [[nodiscard]] virtual Matrix hessian(double t, std::span<const double> x) const = 0;
    [[nodiscard]] virtual double time_derivative(double t, std::span<const double> x) const = 0;
    [[nodiscard]] virtual Vector time_gradient(double t, std::span<const double> x) const = 0;
};

class Potential {
public:
    Potential(std::shared_ptr<const PotentialModel> model, Box box, double t0, double t1, std::string name);

    [[nodiscard]] std::size_t dim() const { return model_->dim(); }
    [[nodiscard]] double eval(double t, std::span<const double> x) const { return model_->energy(t, x); }
    [[nodiscard]] Vector grad(double t, std::span<const double> x) const { return model_->gradient(t, x); }
    [[nodiscard]] Matrix hess(double t, std::span<const double> x) const { return model_->hessian(t, x); }
    [[nodiscard]] double dt(double t, std::span<const double> x) const { return model_->time_derivative(t, x); }
    [[nodiscard]] Vector dt_grad(double t, std::span<const double> x) const { return model_->time_gradient(t, x); }

    [[nodiscard]] const Box& box() const noexcept { return box_; }
    [[nodiscard]] double horizon_start() const noexcept { return t0_; }
    [[nodiscard]] double horizon_end() const noexcept { return t1_; }
    [[nodiscard]] const std::string& name() const noexcept { return name_; }
    [[nodiscard]] const PotentialModel& model() const noexcept { return *model_; }
    [[nodiscard]] std::shared_ptr<const PotentialModel> shared_model() const noexcept { return model_; }

    [[nodiscard]] Potential with_box(Box box) const;

private:
    std::shared_ptr<const PotentialModel> model_;
    Box box_;
    double t0_;
    double t1_;
    std::string name_;
};

// Coefficients in ascending order: c0 + c1 t + c2 t^2 + ...
struct Polynomial {
    std::vector<double> coeffs;

    [[nodiscard]] double operator()(double t) const;
    [[nodiscard]] double derivative(double t) const;
};

// F(t,x) = 1/2 |x - load(t)|^2, one polynomial per component.
[[nodiscard]] Potential make_quadratic(std::size_t dim, std::vector<Polynomial> load,
                                       std::optional<Box> box = std::nullopt, double t0 = 0.0, double t1 = 2.0);

// A C^3 scalar function assembled from pieces. On each piece the derivative
// is a finite sum of c * z^p, with z = direction * (x - anchor) >= 0 wherever
// p is not an integer. Antiderivatives are kept exact.
class ScalarProfile {
public:
    struct Term {
        double coef;
        double power;
    };
    struct Piece {
        double start;    // piece covers [start, next piece's start)
        double anchor;
        int direction;   // +1: z = x - anchor, -1: z = anchor - x
        double value_at_anchor;
        std::vector<Term> terms;
    };
    // Additive compact bump amplitude * (1 - ((x - center)/half_width)^2)^4,
    // used only to inject faults in tests.
    struct Bump {
        double center;
        double half_width;
        double amplitude;
    };

    struct Jet {
        double value;
        double d1;
        double d2;
        double d3;
    };

    ScalarProfile() = default;
    explicit ScalarProfile(std::vector<Piece> pieces, std::vector<Bump> bumps = {});

    [[nodiscard]] Jet jet(double x) const;
    [[nodiscard]] double value(double x) const { return jet(x).value; }
    [[nodiscard]] double d1(double x) const { return jet(x).d1; }
    [[nodiscard]] double d2(double x) const { return jet(x).d2; }
    [[nodiscard]] double d3(double x) const { return jet(x).d3; }

    [[nodiscard]] const std::vector<Piece>& pieces() const noexcept { return pieces_; }
    // One-sided jets at a piece boundary, for continuity checks.
    [[nodiscard]] Jet jet_of_piece(std::size_t index, double x) const;

private:
    std::vector<Piece> pieces_;
    std::vector<Bump> bumps_;
};

// F(t,x) = S(x) - rate * (t - t_ref) * x in one dimension.
class TiltedProfileModel final : public PotentialModel {
public:
    TiltedProfileModel(ScalarProfile profile, double rate, double t_ref);

    [[nodiscard]] std::size_t dim() const override { return 1; }
    [[nodiscard]] double energy(double t, std::span<const double> x) const override;
    [[nodiscard]] Vector gradient(double t, std::span<const double> x) const override;
    [[nodiscard]] Matrix hessian(double t, std::span<const double> x) const override;
    [[nodiscard]] double time_derivative(double t, std::span<const double> x) const override;
    [[nodiscard]] Vector time_gradient(double t, std::span<const double> x) const override;

    [[nodiscard]] const ScalarProfile& profile() const noexcept { return profile_; }
    [[nodiscard]] double third_derivative(std::span<const double> x) const { return profile_.d3(x[0]); }

private:
    ScalarProfile profile_;
    double rate_;
    double t_ref_;
};

struct AppendixOptions {
    double eta = 0.05;
    double spike_fraction = 0.7;     // share of the barrier area held by the sharp bump after x=1
    double plateau_slope = -2.0;     // F1' on [3,8]
    double curvature_at_9 = 40.0;    // F1''(9)
    double tail_cubic = 1.0;         // F1' = c9 z + kappa z^3 beyond 9
    std::optional<double> inject_root_at;  // test hook: adds a bump creating a spurious root
};

struct AppendixSpec {
    double eta = 0.05;
    std::vector<double> knots;   // {0, 1, 2, 3, 8, 9, 10}
    double x_max = 10.0;
    double growth = 0.25;        // c_g of the quartic tail beyond x_max
    double spike_exponent = 0.0;
    double spike_beta = 0.0;
    double spike_shoulder = 0.0;
    std::array<double, 7> ramp_coeffs{};   // F1' on [2,3] in z = x - 2
    std::array<double, 6> drop_coeffs{};   // F1' on [8,9] in z = x - 8
    double plateau_slope = -2.0;
    double curvature_at_9 = 40.0;
    double tail_cubic = 1.0;
    std::vector<double> roots;          // verified roots of F1'
};

struct AppendixPotential {
    Potential potential;
    AppendixSpec spec;
    ScalarProfile profile;  // F1
};

// Builds F_t(x) = F1(x) - (t-1) x and verifies the root layout of F1'.
// Throws ConstructionFailed naming the location of any spurious root.
[[nodiscard]] AppendixPotential make_appendix(double eta = 0.05);
[[nodiscard]] AppendixPotential make_appendix(const AppendixOptions& options);

// Profile only, without the root verification (used by the verifier tests).
[[nodiscard]] ScalarProfile build_appendix_profile(const AppendixOptions& options, AppendixSpec* spec_out = nullptr);

[[nodiscard]] double minimizer_curve_appendix(double t);

struct CustomSplineSpec {
    std::vector<double> knots;
    std::vector<double> values;
    std::vector<double> first;
    std::vector<double> second;
    std::vector<double> third;
    double growth = 0.25;
    double tilt_rate = 1.0;
    double tilt_reference = 1.0;
    std::optional<Box> box;
    double t0 = 0.0;
    double t1 = 2.0;
};

// C^3 septic Hermite spline with cubic Taylor extension on the left and
// cubic Taylor plus growth*(x - x_last)^4 on the right.
[[nodiscard]] ScalarProfile build_septic_profile(const CustomSplineSpec& spec);
[[nodiscard]] Potential make_custom_spline(const CustomSplineSpec& spec);

// Test hook: the same potential with its gradient callback scaled by (1 + relative_error).
[[nodiscard]] Potential with_gradient_error(const Potential& p, double relative_error);

// F evaluated at a fixed time regardless of the time argument; dF/dt = 0.
[[nodiscard]] Potential frozen_at(const Potential& p, double t_frozen);

}  // namespace bvlab
