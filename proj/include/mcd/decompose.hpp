#pragma once

#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "mcd/ctmc.hpp"

namespace mcd {

// A state subset A of the parent chain with its boundary/interior split and
// the termination increments dq applied among boundary states.  The local
// state i of every derived object is members[i].
struct Subchain {
    std::shared_ptr<const Ctmc> parent;
    std::vector<int> members;   // sorted
    std::vector<int> boundary;  // sorted, subset of members
    std::vector<int> interior;  // members \ boundary
    // (k,k') -> dq with k,k' boundary states; self pairs and zeros dropped.
    std::map<std::pair<int, int>, double> termination;

    // Local index of a parent state, or -1.
    int local_index(int parent_state) const;
    bool contains(int parent_state) const { return local_index(parent_state) >= 0; }
};

// The subchain materialized as its own chain: parent rates restricted to the
// members plus the termination increments.
struct TerminatedChain {
    Subchain sub;
    Ctmc chain;  // |members| local states
};

// Boundary per the cut definition: members that exchange any transition with
// the complement.  Returns (boundary, interior).  Throws EmptySet.
std::pair<std::vector<int>, std::vector<int>> boundary_of(const Ctmc& chain,
                                                          const std::vector<int>& members);

// Zero termination.  Throws ErgodicityLost when the restricted graph is not
// strongly connected.
TerminatedChain truncate(std::shared_ptr<const Ctmc> parent, std::vector<int> members);

// How external states are treated by the general termination scheme: pooled
// as one class, or split into non-communicating classes with the scheme
// applied per class and the increments summed.
enum class ExternalClasses { Pooled, PerClass };

// General termination:
//   dq(k,k') = [sum_m x_m q(m,k') / sum_{k''} sum_m x_m q(m,k'')] * sum_m q(k,m)
// over external states m, with x the supplied external weights (any positive
// scaling; entries at member positions are ignored).  When x matches the true
// restricted stationary weights the terminated subchain conserves the parent
// distribution.  Throws ZeroInflow / ErgodicityLost.
TerminatedChain terminate_general(std::shared_ptr<const Ctmc> parent, std::vector<int> members,
                                  const std::vector<double>& external_weights,
                                  ExternalClasses mode = ExternalClasses::Pooled);

// Special case requiring a single external state; needs no weights.
TerminatedChain terminate_single_external(std::shared_ptr<const Ctmc> parent,
                                          std::vector<int> members);

// Special case: exactly one boundary state receives external inflow; all lost
// outflow is redirected to it.  Needs no weights.  Throws NotSingleInput.
TerminatedChain terminate_single_input(std::shared_ptr<const Ctmc> parent,
                                       std::vector<int> members);

// Max over boundary states of the partial-flow-conservation defect
//   | pi_k out_ext(k) - in_ext(k) - (pi_k dq_out(k) - dq_in(k)) |.
// Zero within tolerance iff the termination conserves the distribution.
double verify_partial_flow_conservation(const Ctmc& chain, const StationaryDistribution& full_pi,
                                        const Subchain& sub);

struct ConservationReport {
    // max_{k in A} | pi^j_k * P_j / pi_k - 1 |  with P_j = sum_{A} pi_k
    double max_relative_deviation = 0.0;
    // the same maximum restricted to boundary states (the two agree on
    // whether conservation holds)
    double boundary_relative_deviation = 0.0;
};

ConservationReport verify_conservation_of_distribution(const StationaryDistribution& full_pi,
                                                       const Subchain& sub,
                                                       const StationaryDistribution& sub_pi);

struct DisjointTermination {
    std::vector<TerminatedChain> blocks;
    std::vector<StationaryDistribution> dists;
    std::vector<double> weights;  // sum to 1; weights[j]*dists[j] rebuilds pi
    int iterations = 0;
    double last_change = 0.0;
};

// Fixed-point iteration for a disjoint exhaustive partition: rebuild each
// block's termination from the current weights and block solutions, re-solve,
// update the weights from the cut-flow balance, damp, repeat.  Throws
// NoConvergence after max_iters sweeps (never returns an unconverged result).
DisjointTermination iterative_disjoint_termination(std::shared_ptr<const Ctmc> parent,
                                                   const std::vector<std::vector<int>>& partition,
                                                   double tol = 1e-10, int max_iters = 10000,
                                                   double damping = 0.5);

}  // namespace mcd
