#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcd/aggregate.hpp"
#include "mcd/cbs.hpp"
#include "mcd/ctmc.hpp"
#include "mcd/decompose.hpp"

namespace mcd::io {

// Chain file: { "n_states": int, "transitions": [[from,to,rate],...],
//               "labels": { "<index>": "<name>", ... }? }
Ctmc chain_from_json(const nlohmann::json& j);
nlohmann::json chain_to_json(const Ctmc& chain);

struct SubchainSpec {
    std::vector<int> members;
    std::string method;  // truncate | general | single_input | single_external
    std::optional<std::vector<double>> external_pi;
};

// Plan file: { "positive": [subchain specs], "negative": [...],
//              "reference_state": int, "f": "one"|"indicator:<k>"|"identity"|"values:[...]" }
struct PlanSpec {
    std::vector<SubchainSpec> positive;
    std::vector<SubchainSpec> negative;
    int reference_state = 0;
    std::string f_spec = "one";
};

PlanSpec plan_from_json(const nlohmann::json& j);
StateFunction parse_state_function(const std::string& spec, int n_states);

// thresholds_required: cbs-cost needs n and N in the file; the optimizer
// supplies them from its ranges.
CbsParams cbs_params_from_json(const nlohmann::json& j, bool thresholds_required);

TerminatedChain terminate_by_method(std::shared_ptr<const Ctmc> parent, const SubchainSpec& spec,
                                    const std::vector<double>& exact_external_fallback);

struct DecompositionRun {
    nlohmann::json report;
    bool coverage_ok = true;
    bool within_tolerance = true;
};

// Terminates and solves every subchain, validates the signed cover, runs the
// flow-conservation / distribution-conservation / cut-balance checks against
// the exact full solve, and aggregates E[f].
DecompositionRun run_decomposition(std::shared_ptr<const Ctmc> chain, const PlanSpec& plan,
                                   double tol);

nlohmann::json indicators_to_json(const CbsIndicators& ind);

std::string surface_to_csv(const std::vector<SurfaceCell>& cells);

// %.12g rendering shared by every CSV writer.
std::string format_csv(double x);

}  // namespace mcd::io
