#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

#include "bvlab/algebra.hpp"
#include "bvlab/config.hpp"
#include "bvlab/selftest.hpp"

namespace bvlab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;     // a certification, ledger or selftest check failed
inline constexpr int kExitConfig = 2;     // unreadable or invalid configuration or arguments
inline constexpr int kExitNumerical = 3;  // an integrator, solver or shot gave up

struct CommonOptions {
    std::optional<std::string> config;  // path to a run config
    std::optional<std::string> out;     // overrides output_dir of the config
    std::optional<std::uint64_t> seed;  // overrides seed of the config
    bool quiet = false;                 // suppress progress text; primary outputs still go to `out`
};

// Runs `body`, mapping exceptions to exit codes and reporting them on `err`:
// ConfigError 2, LedgerViolation 1, any other Error or std::exception 3.
int guarded(const std::function<int()>& body, std::ostream& err);

// "1,2.5,-3" -> {1, 2.5, -3}; throws ConfigError.
[[nodiscard]] Vector parse_vector(const std::string& text);

// The config of the command: --config when given, otherwise the appendix
// defaults when `allow_default`, otherwise ConfigError. Applies --seed.
[[nodiscard]] RunConfig resolve_config(const CommonOptions& opts, bool allow_default);
[[nodiscard]] std::string resolve_output_dir(const CommonOptions& opts, const RunConfig& rc);

int cmd_simulate(const CommonOptions& opts, std::ostream& out);
int cmd_sweep(const CommonOptions& opts, std::ostream& out);
int cmd_limit(const CommonOptions& opts, std::ostream& out);
int cmd_critical_points(const CommonOptions& opts, double t, std::ostream& out);
// emit_path is relative to the output directory and may not leave it.
int cmd_cost(const CommonOptions& opts, double t, const Vector& from, const Vector& to,
             const std::optional<std::string>& emit_path, std::ostream& out);
int cmd_heteroclinic(const CommonOptions& opts, double t, const Vector& from, bool first_order, std::ostream& out);
int cmd_appendix_demo(const CommonOptions& opts, std::ostream& out);
int cmd_selftest(const CommonOptions& opts, SelftestOptions st, std::ostream& out);

}  // namespace bvlab
