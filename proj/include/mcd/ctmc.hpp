#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mcd/errors.hpp"

namespace mcd {

// Finite continuous-time Markov chain held as sparse off-diagonal rates
// q(k,k').  Self-transitions are dropped on insertion (they never enter a
// balance equation); zero rates are not stored.  Immutable in spirit: build
// once with add_rate, then treat as a value.
class Ctmc {
  public:
    Ctmc() = default;
    explicit Ctmc(int n_states);

    // Accumulates rate onto (from,to).  Throws InvalidChain on out-of-range
    // states or negative/non-finite rates.  Returns false when the entry was
    // a dropped self-transition.
    bool add_rate(int from, int to, double rate);

    int n_states() const { return n_; }
    int self_loops_dropped() const { return dropped_self_; }

    double rate(int from, int to) const;
    double total_out_rate(int state) const;

    // (to, rate) and (from, rate) adjacency.
    const std::vector<std::pair<int, double>>& out(int state) const { return out_.at(state); }
    const std::vector<std::pair<int, double>>& in(int state) const { return in_.at(state); }

    template <class F>
    void for_each_transition(F&& f) const {
        for (int k = 0; k < n_; ++k)
            for (const auto& [to, q] : out_[k]) f(k, to, q);
    }

    // Optional presentation-only names; indices stay the math identity.
    std::map<int, std::string> labels;

  private:
    int n_ = 0;
    std::vector<std::vector<std::pair<int, double>>> out_;
    std::vector<std::vector<std::pair<int, double>>> in_;
    int dropped_self_ = 0;
};

struct StationaryDistribution {
    std::vector<double> probs;
    // max_k | pi_k * sum_k' q(k,k') - sum_k' pi_k' q(k',k) |
    double residual = 0.0;
};

// f(k) per state; unitless or caller-defined.
using StateFunction = std::vector<double>;

// True iff the directed graph of positive rates is strongly connected.
bool check_irreducible(const Ctmc& chain);

// Unique pi with pi*Q = 0 and sum(pi) = 1, by GTH elimination (no
// subtractions, so every component carries full relative precision; this is
// the oracle every decomposition result is checked against).  Throws
// NonErgodic when the chain is not irreducible and SingularSystem when the
// elimination degenerates (residual_tol is scale-relative for this check).
StationaryDistribution solve_stationary(const Ctmc& chain, double residual_tol = 1e-10);

// sum_k f(k) pi_k
double expectation(const StationaryDistribution& dist, const StateFunction& f);

}  // namespace mcd
