#pragma once

#include <vector>

#include "mcd/ctmc.hpp"

namespace mcd {

// Two-threshold staffing policy: chain A runs s = c-e gates until an arrival
// at N-1 opens all c gates (jump into chain B); chain B runs c gates until a
// departure at n+1 falls back to chain A at n.
struct CbsParams {
    double lambda = 0.0;  // arrival rate
    double mu = 0.0;      // per-gate service rate
    int c = 0;            // total gates
    int e = 0;            // switchable gates
    int n = 0;            // lower threshold
    int N = 0;            // upper threshold
    double c_g = 0.0;     // gate cost per unit time
    double c_w = 0.0;     // waiting cost per vehicle per unit time
    double c_s = 0.0;     // switching cost per changeover cycle

    int servers_low() const { return c - e; }
    double omega() const { return servers_low() * mu / lambda; }
    double eta() const { return lambda / (c * mu); }
};

// Throws InvalidParams unless N > n >= c, e > 0, s = c-e > 0, eta < 1 and all
// rates/costs are admissible.
void validate(const CbsParams& params);

struct CbsCosts {
    double staffing = 0.0;
    double waiting = 0.0;
    double switching = 0.0;
    double total = 0.0;
};

struct CbsIndicators {
    double pi_ref = 0.0;       // pi_{N-1_A}
    double p_b = 0.0;          // probability of running in chain B
    double l_q = 0.0;          // mean queue length
    double switch_freq = 0.0;  // changeover cycles per unit time = lambda*pi_ref
    CbsCosts costs;
};

// The full chain with the geometric chain-B tail cut once its remaining mass
// is certifiably below tail_eps, plus the index bookkeeping.
struct CbsChain {
    Ctmc chain;
    int n = 0, N = 0, b_max = 0, c = 0, s = 0;

    int a_index(int vehicles) const { return vehicles; }
    int b_index(int vehicles) const { return N + vehicles - (n + 1); }
    int ref_index() const { return N - 1; }
    bool is_chain_b(int state) const { return state >= N; }
    int vehicles(int state) const { return state < N ? state : state - N + n + 1; }
    int queue_count(int state) const;

    std::vector<int> members_a1() const;  // {0_A .. n-1_A}
    std::vector<int> members_a2() const;  // {n_A .. N-1_A}
    std::vector<int> members_a3() const;  // {N-1_A, n+1_B}
    std::vector<int> members_a4() const;  // {n+1_B .. N_B}
    std::vector<int> members_a5() const;  // {N+1_B .. b_max_B}
};

CbsChain build_full_truncated(const CbsParams& params, double tail_eps = 1e-12);

struct CbsSubchainReport {
    double inv_pi = 0.0;      // 1/pi^j at the subchain's anchor state
    double lq_over_pi = 0.0;  // L_Q^j / pi^j at the anchor
};

// Closed-form reports for the four mass-carrying subchains (anchors n-1_A,
// N-1_A, n+1_B, N+1_B) and the ratios linking each anchor to the reference
// state N-1_A.
struct CbsSubchainSuite {
    CbsSubchainReport a1, a2, a4, a5;
    double beta_a1 = 0.0;  // beta(N-1_A, n-1_A)
    double beta_a4 = 0.0;  // beta(N-1_A, n+1_B) = 1/eta, from the two-state bridge subchain
    double beta_a5 = 0.0;  // beta(N-1_A, N+1_B)
};

CbsSubchainSuite subchain_suite(const CbsParams& params);

// Route 1: the displayed analytic expressions (with the queue-length display
// corrected by its missing omega^{n-s+1}(1-omega^{N-n})/(1-omega)^3 term).
CbsIndicators indicators_closed_form(const CbsParams& params);
// Route 2: total-expectation sum of the five subchain reports.
CbsIndicators indicators_from_suite(const CbsParams& params);
// Route 3: exact solve of the tail-truncated full chain.
CbsIndicators indicators_oracle(const CbsParams& params, double tail_eps = 1e-12);

double total_cost(const CbsParams& params);

struct SurfaceCell {
    int n = 0, N = 0;
    double cost = 0.0;
    bool feasible = false;
};

// Row-major (n outer, N inner) cost grid; infeasible cells are marked, not
// priced.  threads = 0 or 1 runs serially.
std::vector<SurfaceCell> cost_surface(const CbsParams& base, int n_lo, int n_hi, int N_lo,
                                      int N_hi, int threads = 0);

struct CbsOptimum {
    int n = 0, N = 0;
    double cost = 0.0;
};

// Exhaustive argmin over the feasible cells; ties go to the smallest n, then
// the smallest N.  Throws NoFeasibleCell.
CbsOptimum optimize(const CbsParams& base, int n_lo, int n_hi, int N_lo, int N_hi);

struct NoFeasibleCell : Error {
    using Error::Error;
};

}  // namespace mcd
