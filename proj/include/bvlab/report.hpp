#pragma once

#include <string>

#include "bvlab/assumptions.hpp"
#include "bvlab/config.hpp"
#include "bvlab/cost.hpp"
#include "bvlab/critical.hpp"
#include "bvlab/flow.hpp"
#include "bvlab/heteroclinic.hpp"
#include "bvlab/limit.hpp"

namespace bvlab {

// Writes to a sibling temporary and renames it over `path`, creating parent
// directories. Throws Error(OutOfRange) on I/O failure.
void write_file_atomic(const std::string& path, const std::string& content);

// Serialized with a trailing newline; nlohmann orders keys, so equal
// reports give byte-identical files.
[[nodiscard]] std::string dump_json(const Json& j);

[[nodiscard]] Json to_json(const LedgerCheck& c);
[[nodiscard]] Json to_json(const DiagnosticsReport& d);
[[nodiscard]] Json to_json(const CriticalSearch& s);
[[nodiscard]] Json to_json(const CostResult& r);
[[nodiscard]] Json to_json(const Heteroclinic& h);  // summary without the samples
[[nodiscard]] Json to_json(const JumpChain& c);
[[nodiscard]] Json to_json(const JumpRecord& j);
[[nodiscard]] Json to_json(const LimitReport& r);
[[nodiscard]] Json to_json(const BalanceReport& b);
[[nodiscard]] Json to_json(const AxiomReport& a);
[[nodiscard]] Json to_json(const CheckResult& c);

// Run summary of one trajectory: counts, final state and the ledger check.
[[nodiscard]] Json trajectory_summary(const Trajectory& traj, const LedgerCheck& ledger);

}  // namespace bvlab
