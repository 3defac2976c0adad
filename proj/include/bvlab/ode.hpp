#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "bvlab/algebra.hpp"

namespace bvlab {

struct OdeOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double h_max = 1.0;
    double h_min = 1e-14;
    double h_init = 0.0;  // 0: chosen from the scale of the first derivative
    std::size_t max_steps = 50'000'000;
};

enum class OdeStop { Completed, StoppedByCaller, StepUnderflow, MaxSteps };

struct OdeStatus {
    OdeStop stop = OdeStop::Completed;
    double t = 0.0;
    Vector y;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
};

// dy = f(t, y); dy is preallocated to y.size().
using OdeRhs = std::function<void(double, const Vector&, Vector&)>;
// Called at each requested output time with the dense-output state and its
// time derivative. Return false to stop the integration.
using OdeOutput = std::function<bool(double, const Vector&, const Vector&)>;
// Called after each accepted step. Return false to stop.
using OdeStepHook = std::function<bool(double, const Vector&)>;

// Dormand-Prince 5(4) with the standard fourth-order continuous extension.
// `outputs` must be sorted and lie in [t0, t1].
[[nodiscard]] OdeStatus integrate_dopri5(const OdeRhs& f, double t0, Vector y0, double t1,
                                         std::span<const double> outputs, const OdeOptions& opts,
                                         const OdeOutput& on_output, const OdeStepHook& on_step = {});

}  // namespace bvlab
