#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bvlab/app.hpp"

int main(int argc, char** argv) {
    using namespace bvlab;
    CLI::App app{"Vanishing inertia and viscosity limits of damped gradient systems"};
    app.require_subcommand(1);
    app.fallthrough();

    CommonOptions common;
    std::string config, out;
    std::uint64_t seed = 0;
    app.add_option("--config", config, "run config (JSON)");
    app.add_option("--out", out, "output directory (overrides output_dir)");
    app.add_option("--seed", seed, "seed for randomized restarts and samples");
    app.add_flag("--quiet", common.quiet, "only primary outputs");

    double t = 0.0;
    std::string from, to, emit_path, inject_fault, only;
    bool first_order = false;

    auto* simulate = app.add_subcommand("simulate", "integrate one trajectory; writes trajectory.csv and summary.json");
    auto* sweep = app.add_subcommand("sweep", "integrate the epsilon sweep; writes one CSV per member and sweep.json");
    auto* limit = app.add_subcommand("limit", "estimate and certify the limit; writes report.json, limit.csv, jumps.json");
    auto* critical = app.add_subcommand("critical-points", "critical points of F(t, .) as JSON");
    critical->add_option("--t", t, "frozen time")->required();
    auto* cost = app.add_subcommand("cost", "transition cost c_t(from, to) as JSON");
    cost->add_option("--t", t, "frozen time")->required();
    cost->add_option("--from", from, "start point, comma separated")->required();
    cost->add_option("--to", to, "end point, comma separated")->required();
    cost->add_option("--emit-path", emit_path, "write the optimal path as CSV (relative to the output directory)");
    auto* het = app.add_subcommand("heteroclinic", "heteroclinic shots from a critical point; CSV per link and JSON");
    het->add_option("--t", t, "frozen time")->required();
    het->add_option("--from", from, "start point, comma separated")->required();
    het->add_flag("--first-order", first_order, "gradient flow B v' = -grad F instead of the damped inertial flow");
    auto* demo = app.add_subcommand("appendix-demo", "both dynamics on the appendix example; writes the demo bundle");
    auto* self = app.add_subcommand("selftest", "embedded invariant suite");
    self->add_option("--inject-fault", inject_fault, "test hook: 'gradient' perturbs every potential gradient");
    self->add_option("--only", only, "comma-separated groups: algebra,derivatives,gradient,axioms");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }
    if (app.count("--config")) common.config = config;
    if (app.count("--out")) common.out = out;
    if (app.count("--seed")) common.seed = seed;

    return guarded(
        [&]() -> int {
            if (*simulate) return cmd_simulate(common, std::cout);
            if (*sweep) return cmd_sweep(common, std::cout);
            if (*limit) return cmd_limit(common, std::cout);
            if (*critical) return cmd_critical_points(common, t, std::cout);
            if (*cost)
                return cmd_cost(common, t, parse_vector(from), parse_vector(to),
                                emit_path.empty() ? std::nullopt : std::optional<std::string>(emit_path), std::cout);
            if (*het) return cmd_heteroclinic(common, t, parse_vector(from), first_order, std::cout);
            if (*demo) return cmd_appendix_demo(common, std::cout);
            SelftestOptions st;
            if (!inject_fault.empty()) st.inject_fault = inject_fault;
            if (!only.empty()) {
                std::size_t pos = 0;
                while (pos <= only.size()) {
                    const std::size_t comma = std::min(only.find(',', pos), only.size());
                    st.groups.push_back(only.substr(pos, comma - pos));
                    pos = comma + 1;
                }
            }
            return cmd_selftest(common, st, std::cout);
        },
        std::cerr);
}
