#pragma once

#include <memory>
#include <vector>

#include "mcd/ctmc.hpp"
#include "mcd/decompose.hpp"

namespace mcd {

// A subchain together with the stationary distribution of its terminated
// chain (local indexing = position in sub.members).
struct PlanEntry {
    Subchain sub;
    StationaryDistribution dist;
};

// Signed family of subchains: states covered by the positive entries minus
// the negative entries must net to exactly one cover per state.
struct DecompositionPlan {
    std::vector<PlanEntry> positive;
    std::vector<PlanEntry> negative;
    int full_state_count = 0;

    const Ctmc& parent() const;
};

struct CoverageReport {
    std::vector<int> counts;     // (+ entries containing k) - (- entries containing k)
    std::vector<int> offenders;  // states whose count != 1
    bool ok = false;
};

CoverageReport validate_plan(const DecompositionPlan& plan);

// Stationary probability ratios beta(k,k') = pi_k/pi_k'.  Sources: ratios of
// co-resident states inside any distribution-conserving subchain, and local
// balance across bridges of the parent chain (the only two flows crossing a
// bridge balance each other).  Pairs not directly covered are resolved by
// chaining products along the ratio graph.
class BetaTable {
  public:
    struct Edge {
        int to;
        double ratio;  // beta(from, to)
        int source;    // plan entry index, or -1 for a local-balance bridge
    };

    // throws MissingBeta when no path connects the pair
    double beta(int k, int k_prime) const;
    bool has_path(int k, int k_prime) const;
    int n_states() const { return static_cast<int>(adj_.size()); }
    const std::vector<std::vector<Edge>>& edges() const { return adj_; }

  private:
    friend BetaTable beta_from_plan(const DecompositionPlan& plan);
    std::vector<std::vector<Edge>> adj_;
    // per entry: sorted member list and local probabilities, for direct
    // co-residency ratios
    std::vector<std::vector<int>> entry_members_;
    std::vector<std::vector<double>> entry_probs_;
    std::vector<std::vector<std::pair<int, int>>> membership_;  // state -> (entry, local)
};

// Throws DisconnectedPlan when the ratio graph leaves some subchain
// unreachable from the rest.
BetaTable beta_from_plan(const DecompositionPlan& plan);

// pi^j extended to an arbitrary reference state: beta(reference,anchor) *
// pi^j_anchor; independent of the anchor chosen inside the subchain.
double extended_pi(const PlanEntry& entry, const BetaTable& betas, int reference, int anchor);
double extended_pi(const PlanEntry& entry, const BetaTable& betas, int reference);

struct Aggregate {
    double expectation;  // E[f]
    double pi_ref;       // stationary probability of the reference state
    double scaled;       // E[f]/pi_ref
};

// Total-expectation aggregation over the signed plan:
//   S_f = sum_{J+} E_j[f]/pi^j_(k) - sum_{J-} E_j[f]/pi^j_(k)
// returning (S_f/S_1, 1/S_1, S_f).  Throws CoverageViolation / MissingBeta.
Aggregate total_expectation(const DecompositionPlan& plan, const StateFunction& f, int reference,
                            const BetaTable& betas);

// Full stationary distribution assembled state by state (f = indicator).
StationaryDistribution reconstruct_distribution(const DecompositionPlan& plan,
                                                const BetaTable& betas, int reference);

// mu_k(A) = E_A[f]/pi^A_(k), the additive subchain measure.  The subset is
// terminated with the exact external weights so conservation holds by
// construction; empty set -> 0, full set -> E[f]/pi_k.
double measure_value(std::shared_ptr<const Ctmc> parent, const StationaryDistribution& full_pi,
                     const std::vector<int>& members, const StateFunction& f, int reference);

struct MeasureChecks {
    double complement_defect = 0.0;  // mu(S) vs mu(A) + mu(A^c)
    double complement_scale = 0.0;
    bool subset_relation = false;  // whether A subset of B held
    double monotone_defect = 0.0;  // mu(B) vs mu(A) + mu(B\A)
    double monotone_scale = 0.0;
    double inclusion_exclusion_defect = 0.0;  // mu(AuB) vs mu(A)+mu(B)-mu(AnB)
    double inclusion_exclusion_scale = 0.0;
};

// Evaluates the three measure identities for the pair (A, B); every derived
// subset must induce a connected restriction.
MeasureChecks measure_properties_check(std::shared_ptr<const Ctmc> parent,
                                       const StationaryDistribution& full_pi,
                                       const StateFunction& f, const std::vector<int>& a,
                                       const std::vector<int>& b, int reference);

}  // namespace mcd
