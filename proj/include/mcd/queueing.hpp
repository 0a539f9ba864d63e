#pragma once

#include <optional>
#include <vector>

#include "mcd/ctmc.hpp"

namespace mcd {

// Finite birth-death chain on states 0..K: arrival[i] drives i -> i+1
// (i = 0..K-1), service[i-1] drives i -> i-1 (i = 1..K), plus an optional
// restart transition K -> 0.
struct BirthDeathSpec {
    std::vector<double> arrival;
    std::vector<double> service;
    double restart_rate = 0.0;

    int capacity() const { return static_cast<int>(arrival.size()); }
};

BirthDeathSpec mm1k(double lambda, double mu, int k);
BirthDeathSpec mmsk(double lambda, double mu, int s, int k);
BirthDeathSpec mmcc(double lambda, double mu, int c);
BirthDeathSpec engset(int sources, double lambda, double mu, int k);
BirthDeathSpec discouraged(double alpha, double mu, int k_trunc);
BirthDeathSpec mm1_restart(double lambda, double mu, int k, double restart);

// Explicit chain for a spec.  Throws InvalidSpec.
Ctmc build(const BirthDeathSpec& spec);

struct QueueIndicators {
    double p_block;  // pi_K
    double p_q;      // Pr{X >= servers}
    double l_q;      // E[max(X - servers, 0)]
    double l;        // E[X]
};

// Indicators from an exact solve of the spec's chain.
QueueIndicators birth_death_indicators(const BirthDeathSpec& spec, int servers);

// Closed-form kernels for the M/M/s/k queue (reference state k) and the
// M/M/1/k-with-restart chain with uniform ratio w (reference state k).  All
// four are continuous through w = 1; the limit values are used there.
double f1(long long k, int s, double omega);  // 1/pi_k of M/M/s/k, omega = s*mu/lambda
double g1(long long k, int s, double omega);  // L_Q/pi_k of M/M/s/k
double f2(long long k, double omega);         // 1/pi_k^k of the restart chain
double g2(long long k, double omega);         // L^k/pi_k^k of the restart chain

// Shared-single-state identities: subchain 2 hangs off the shared state s
// with known pi_s^2 and L_Q^2/pi_s^2; either the queueing probability or the
// mean queue length of the composite system then pins the blocking
// probability of subchain 1 and the shared-state scale.
struct SharedStateIndicators {
    double p_block;   // pi_s^1 of subchain 1
    double p_q;       // queueing probability of the composite system
    double l_q;       // mean queue length of the composite system
    double pi_s;      // shared-state probability of the composite system
    double inv_pi_s;  // 1/pi_s
    double pq_over_pi_s;
    double lq_over_pi_s;
};

SharedStateIndicators shared_state_relations(double sub2_pi_s, double sub2_lq_over_pi,
                                             std::optional<double> p_q,
                                             std::optional<double> l_q);

// Subchain-2 plugs: M/M/1 (rho < 1), M/M/1/k, harmonic discouraged arrivals.
SharedStateIndicators relation_mm1(double rho, std::optional<double> p_q,
                                   std::optional<double> l_q);
SharedStateIndicators relation_mm1k(double rho, int k, std::optional<double> p_q,
                                    std::optional<double> l_q);
SharedStateIndicators relation_discouraged(double rho, std::optional<double> p_q,
                                           std::optional<double> l_q);

double erlang_b(int s, double offered_load);
double erlang_c(int s, double offered_load);  // requires offered_load < s

// Blocking probability and mean number in system of the nested chains
// A_0..A_k, by the one-state-at-a-time recursion
//   1/P^k = 1/(rho_{k-1} P^{k-1}) + 1,   L^k/P^k = L^{k-1}/(rho_{k-1} P^{k-1}) + k
// with rho_{k-1} = arrival[k-1]/service[k-1].  Switches to log-space once
// 1/P^k passes 1e300.
struct RecursionSeries {
    std::vector<double> p_block;  // P^0..P^k_max
    std::vector<double> l;       // L^0..L^k_max
};

RecursionSeries nested_recursion(const BirthDeathSpec& spec, int k_max);
RecursionSeries mm1k_series(double lambda, double mu, int k_max);
RecursionSeries erlang_b_series(double lambda, double mu, int s_max);
RecursionSeries engset_series(int sources, double lambda, double mu, int k_max);

}  // namespace mcd
