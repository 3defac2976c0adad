#include <doctest.h>

#include <cmath>

#include "bvlab/error.hpp"
#include "bvlab/limit.hpp"

using namespace bvlab;

namespace {

ErrorCode code_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::ConfigError;
}

struct QuadraticRun {
    SweepConfig cfg = quadratic_sweep();
    std::vector<Trajectory> trajs = run_epsilon_sweep(cfg);
    LimitReport report = estimate_limit(trajs, cfg.potential);
};

const QuadraticRun& quadratic() {
    static const QuadraticRun run;
    return run;
}

}  // namespace

TEST_CASE("sweep configuration errors") {
    SweepConfig cfg = quadratic_sweep();
    cfg.epsilons.clear();
    CHECK(code_of([&] { (void)run_epsilon_sweep(cfg); }) == ErrorCode::ConfigError);
    cfg.epsilons = {0.04, 0.03, 0.02};
    CHECK(code_of([&] { cfg.validate(); }) == ErrorCode::ConfigError);
    cfg = quadratic_sweep();
    cfg.u0 = {0.0, 1.0};
    CHECK(code_of([&] { cfg.validate(); }) == ErrorCode::ConfigError);
    cfg = quadratic_sweep();
    cfg.t1 = 5.0;
    CHECK(code_of([&] { cfg.validate(); }) == ErrorCode::ConfigError);
}

TEST_CASE("quadratic sweep members track the load within O(eps)") {
    const QuadraticRun& q = quadratic();
    REQUIRE(q.trajs.size() == 3);
    for (const Trajectory& tr : q.trajs) {
        CHECK(check_ledger(tr).passed);
        for (std::size_t i = 0; i < tr.times.size(); ++i)
            if (tr.times[i] >= 0.5) CHECK(std::abs(tr.states[i][0] - tr.times[i]) <= 1.01 * tr.epsilon);
    }
}

TEST_CASE("quadratic limit is the load with no jumps and a dissipation-free balance") {
    const QuadraticRun& q = quadratic();
    CHECK(q.report.jumps.empty());
    for (std::size_t i = 0; i < q.report.times.size(); ++i)
        CHECK(std::abs(q.report.u[i][0] - q.report.times[i]) <= 1e-2);
    const BalanceReport b = verify_energy_balance(q.report, q.cfg.potential);
    CHECK(b.max_residual <= 1e-2);
    CHECK(b.passed());
    const LimitReport cert = certify_jumps(q.report, q.cfg.potential, q.cfg.A, q.cfg.B);
    CHECK(cert.jumps.empty());
    CHECK(cert.all_certified());
    CHECK(limit_csv(cert) == limit_csv(q.report));
}

TEST_CASE("a non-critical start jumps at the initial time") {
    SweepConfig cfg(frozen_at(make_appendix(0.05).potential, 1.0), SpdMatrix::scalar(1, 1.0), SpdMatrix::scalar(1, 0.25));
    cfg.epsilons = {0.04, 0.02, 0.01};
    cfg.t0 = 0.0;
    cfg.t1 = 0.5;
    cfg.u0 = {4.0};
    cfg.v0 = {0.0};
    const LimitReport r = estimate_limit(run_epsilon_sweep(cfg), cfg.potential);
    REQUIRE(!r.jumps.empty());
    const JumpRecord& j = r.jumps.front();
    CHECK(j.t_star == 0.0);
    CHECK(j.u_minus[0] == 4.0);
    CHECK_FALSE(j.u_minus_critical);
    CHECK(std::abs(j.u_plus[0] - 9.0) <= 1e-6);
}

TEST_CASE("a non-critical jump endpoint fails certification") {
    const SweepConfig cfg = appendix_sweep(true);
    const LimitReport r = estimate_limit(run_epsilon_sweep(cfg), cfg.potential);
    REQUIRE(r.jumps.size() == 1);
    LimitReport forced = r;
    forced.jumps[0].u_plus = {5.0};
    CertifyOptions opts;
    opts.with_cost = false;
    const LimitReport cert = certify_jumps(forced, cfg.potential, cfg.A, cfg.B, opts);
    CHECK_FALSE(cert.jumps[0].certified);
    CHECK_FALSE(cert.jumps[0].failures.empty());
    CHECK_FALSE(cert.all_certified());
    const LimitReport good = certify_jumps(r, cfg.potential, cfg.A, cfg.B, opts);
    CHECK(good.all_certified());
}

TEST_CASE("sweep initial data follow the scaling rule") {
    const SweepConfig cfg = appendix_sweep(false);
    CHECK(cfg.initial_state(0.1)[0] == doctest::Approx(-1.1 * std::sqrt(1.0 / 3.0)));
    CHECK(cfg.initial_velocity()[0] == 1.0);
    CHECK(cfg.epsilons == std::vector<double>{0.1, 0.05, 0.025, 0.0125});
}
