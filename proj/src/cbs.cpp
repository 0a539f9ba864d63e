#include "mcd/cbs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <thread>

#include "mcd/numerics.hpp"
#include "mcd/queueing.hpp"

namespace mcd {

void validate(const CbsParams& p) {
    if (!(p.lambda > 0) || !(p.mu > 0)) throw InvalidParams("lambda and mu must be positive");
    if (p.e <= 0 || p.c - p.e <= 0) throw InvalidParams("need e > 0 and s = c - e > 0");
    if (!(p.n >= p.c)) throw InvalidParams("lower threshold n must satisfy n >= c");
    if (!(p.N > p.n)) throw InvalidParams("upper threshold N must satisfy N > n");
    if (!(p.eta() < 1.0))
        throw InvalidParams("unstable: eta = lambda/(c*mu) = " + std::to_string(p.eta()) +
                            " must be < 1");
    if (p.c_g < 0 || p.c_w < 0 || p.c_s < 0) throw InvalidParams("costs must be nonnegative");
}

int CbsChain::queue_count(int state) const {
    int i = vehicles(state);
    return is_chain_b(state) ? i - c : std::max(i - s, 0);
}

std::vector<int> CbsChain::members_a1() const {
    std::vector<int> m(n);
    std::iota(m.begin(), m.end(), 0);
    return m;
}
std::vector<int> CbsChain::members_a2() const {
    std::vector<int> m(N - n);
    std::iota(m.begin(), m.end(), n);
    return m;
}
std::vector<int> CbsChain::members_a3() const { return {a_index(N - 1), b_index(n + 1)}; }
std::vector<int> CbsChain::members_a4() const {
    std::vector<int> m;
    for (int i = n + 1; i <= N; ++i) m.push_back(b_index(i));
    return m;
}
std::vector<int> CbsChain::members_a5() const {
    std::vector<int> m;
    for (int i = N + 1; i <= b_max; ++i) m.push_back(b_index(i));
    return m;
}

CbsChain build_full_truncated(const CbsParams& p, double tail_eps) {
    validate(p);
    if (!(tail_eps > 0) || tail_eps >= 1) throw InvalidParams("tail_eps must lie in (0,1)");
    double eta = p.eta();
    int depth = static_cast<int>(std::ceil(std::log(tail_eps * (1.0 - eta)) / std::log(eta)));
    int b_max = std::max(p.N + std::max(depth, 0), p.N + 2);

    CbsChain cbs;
    cbs.n = p.n;
    cbs.N = p.N;
    cbs.b_max = b_max;
    cbs.c = p.c;
    cbs.s = p.servers_low();
    int dim = p.N + (b_max - p.n);
    Ctmc chain(dim);
    for (int i = 0; i < p.N - 1; ++i) chain.add_rate(i, i + 1, p.lambda);
    for (int i = 1; i <= p.N - 1; ++i) chain.add_rate(i, i - 1, std::min(i, cbs.s) * p.mu);
    chain.add_rate(cbs.a_index(p.N - 1), cbs.b_index(p.N), p.lambda);  // open the extra gates
    for (int i = p.n + 1; i < b_max; ++i) chain.add_rate(cbs.b_index(i), cbs.b_index(i + 1), p.lambda);
    for (int i = p.n + 2; i <= b_max; ++i)
        chain.add_rate(cbs.b_index(i), cbs.b_index(i - 1), p.c * p.mu);
    chain.add_rate(cbs.b_index(p.n + 1), cbs.a_index(p.n), p.c * p.mu);  // close them again
    for (int i = 0; i <= p.N - 1; ++i) chain.labels[cbs.a_index(i)] = std::to_string(i) + "_A";
    for (int i = p.n + 1; i <= b_max; ++i) chain.labels[cbs.b_index(i)] = std::to_string(i) + "_B";
    cbs.chain = std::move(chain);
    return cbs;
}

CbsSubchainSuite subchain_suite(const CbsParams& p) {
    validate(p);
    int s = p.servers_low();
    double w = p.omega(), eta = p.eta();
    long long k = p.N - p.n - 1;  // restart-chain capacity of A_2 and A_4
    long long m = p.N - p.n;

    CbsSubchainSuite suite;
    suite.a1 = {f1(p.n - 1, s, w), g1(p.n - 1, s, w)};
    suite.a2 = {f2(k, w), (p.n - s) * f2(k, w) + g2(k, w)};
    suite.a4 = {f2(k, eta), (p.N - p.c) * f2(k, eta) - g2(k, eta)};
    suite.a5 = {1.0 / (1.0 - eta),
                (p.N - p.c + 1) / (1.0 - eta) + eta / ((1.0 - eta) * (1.0 - eta))};
    suite.beta_a1 = 1.0 / (w * geom_sum(m, w));  // (1-w)/(w(1-w^m)), stable at w = 1
    suite.beta_a4 = 1.0 / eta;
    suite.beta_a5 = 1.0 / (eta * eta * geom_sum(m, eta));
    return suite;
}

namespace {

CbsIndicators assemble(const CbsParams& p, double inv_pi, double pb_over, double lq_over) {
    CbsIndicators ind;
    ind.pi_ref = 1.0 / inv_pi;
    ind.p_b = pb_over * ind.pi_ref;
    ind.l_q = lq_over * ind.pi_ref;
    ind.switch_freq = p.lambda * ind.pi_ref;
    ind.costs.staffing = p.c_g * (p.c - p.e + p.e * ind.p_b);
    ind.costs.waiting = p.c_w * ind.l_q;
    ind.costs.switching = p.c_s * ind.switch_freq;
    ind.costs.total = ind.costs.staffing + ind.costs.waiting + ind.costs.switching;
    return ind;
}

}  // namespace

CbsIndicators indicators_from_suite(const CbsParams& p) {
    auto suite = subchain_suite(p);
    CompensatedSum inv_pi, pb_over, lq_over;
    inv_pi.add(suite.a1.inv_pi / suite.beta_a1);
    inv_pi.add(suite.a2.inv_pi);
    inv_pi.add(suite.a4.inv_pi / suite.beta_a4);
    inv_pi.add(suite.a5.inv_pi / suite.beta_a5);
    pb_over.add(suite.a4.inv_pi / suite.beta_a4);
    pb_over.add(suite.a5.inv_pi / suite.beta_a5);
    lq_over.add(suite.a1.lq_over_pi / suite.beta_a1);
    lq_over.add(suite.a2.lq_over_pi);
    lq_over.add(suite.a4.lq_over_pi / suite.beta_a4);
    lq_over.add(suite.a5.lq_over_pi / suite.beta_a5);
    return assemble(p, inv_pi.value(), pb_over.value(), lq_over.value());
}

CbsIndicators indicators_closed_form(const CbsParams& p) {
    validate(p);
    int s = p.servers_low();
    double w = p.omega(), eta = p.eta();
    double a = p.lambda / p.mu;
    double m = p.N - p.n;
    double pb_over = eta / (1.0 - eta) * m;

    if (std::abs(1.0 - w) < 1e-3) {
        // the displayed forms cancel to O((1-w)^-3) here; the term-sum
        // arrangement of the same expressions stays exact
        auto ind = indicators_from_suite(p);
        return ind;
    }
    double gm = geom_sum(p.N - p.n, w);  // (1 - w^{N-n})/(1 - w)
    double inv_pi = (1.0 / (1.0 - w) + eta / (1.0 - eta)) * m -
                    std::pow(w, p.n - s) * gm * (1.0 / (1.0 - w) - poisson_cdf_ratio(s, a));
    double lq_over = (1.0 / (1.0 - w) + eta / (1.0 - eta)) * m *
                         (0.5 * (p.N + p.n + 1) - a - 1.0 / (1.0 - w) + eta / (1.0 - eta)) +
                     std::pow(w, p.n - s + 1) * gm / ((1.0 - w) * (1.0 - w));
    return assemble(p, inv_pi, pb_over, lq_over);
}

CbsIndicators indicators_oracle(const CbsParams& p, double tail_eps) {
    CbsChain cbs = build_full_truncated(p, tail_eps);
    auto pi = solve_stationary(cbs.chain);
    double pi_ref = pi.probs[cbs.ref_index()];
    CompensatedSum p_b, l_q;
    for (int state = 0; state < cbs.chain.n_states(); ++state) {
        if (cbs.is_chain_b(state)) p_b.add(pi.probs[state]);
        l_q.add(cbs.queue_count(state) * pi.probs[state]);
    }
    return assemble(p, 1.0 / pi_ref, p_b.value() / pi_ref, l_q.value() / pi_ref);
}

double total_cost(const CbsParams& p) { return indicators_closed_form(p).costs.total; }

std::vector<SurfaceCell> cost_surface(const CbsParams& base, int n_lo, int n_hi, int N_lo,
                                      int N_hi, int threads) {
    if (n_lo > n_hi || N_lo > N_hi) throw InvalidParams("empty threshold range");
    std::vector<SurfaceCell> cells;
    for (int n = n_lo; n <= n_hi; ++n)
        for (int N = N_lo; N <= N_hi; ++N) cells.push_back({n, N, 0.0, false});

    auto price = [&](SurfaceCell& cell) {
        CbsParams p = base;
        p.n = cell.n;
        p.N = cell.N;
        if (cell.N <= cell.n || cell.n < base.c) return;  // marked infeasible, not priced
        cell.cost = total_cost(p);
        cell.feasible = true;
    };

    if (threads <= 1) {
        for (auto& cell : cells) price(cell);
        return cells;
    }
    std::vector<std::thread> pool;
    std::size_t per = (cells.size() + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        std::size_t lo = t * per, hi = std::min(cells.size(), lo + per);
        if (lo >= hi) break;
        pool.emplace_back([&cells, lo, hi, &price] {
            for (std::size_t i = lo; i < hi; ++i) price(cells[i]);
        });
    }
    for (auto& th : pool) th.join();
    return cells;
}

CbsOptimum optimize(const CbsParams& base, int n_lo, int n_hi, int N_lo, int N_hi) {
    bool found = false;
    CbsOptimum best;
    for (int n = std::max(n_lo, base.c); n <= n_hi; ++n) {
        for (int N = std::max(N_lo, n + 1); N <= N_hi; ++N) {
            CbsParams p = base;
            p.n = n;
            p.N = N;
            double cost = total_cost(p);
            if (!found || cost < best.cost) {  // scan order breaks ties toward small n, N
                best = {n, N, cost};
                found = true;
            }
        }
    }
    if (!found) throw NoFeasibleCell("no (n,N) cell in range satisfies the constraints");
    return best;
}

}  // namespace mcd
