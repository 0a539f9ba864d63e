#include "mcd/queueing.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mcd/numerics.hpp"

namespace mcd {

namespace {

void require(bool cond, const char* what) {
    if (!cond) throw InvalidSpec(what);
}

// sum_{t=0}^{M} (M-t) w^t  ( = (M - (M+1)w + w^{M+1})/(1-w)^2 )
double ramp_tail(long long m, double w) {
    if (m <= 0) return 0.0;
    return static_cast<double>(m) * geom_sum(m + 1, w) - geom_weighted_sum(m + 1, w);
}

}  // namespace

BirthDeathSpec mm1k(double lambda, double mu, int k) {
    require(lambda > 0 && mu > 0 && k >= 1, "mm1k needs lambda, mu > 0 and k >= 1");
    return BirthDeathSpec{std::vector<double>(k, lambda), std::vector<double>(k, mu), 0.0};
}

BirthDeathSpec mmsk(double lambda, double mu, int s, int k) {
    require(lambda > 0 && mu > 0 && s >= 1 && k >= s, "mmsk needs k >= s >= 1");
    BirthDeathSpec spec;
    spec.arrival.assign(k, lambda);
    spec.service.resize(k);
    for (int i = 1; i <= k; ++i) spec.service[i - 1] = std::min(i, s) * mu;
    return spec;
}

BirthDeathSpec mmcc(double lambda, double mu, int c) { return mmsk(lambda, mu, c, c); }

BirthDeathSpec engset(int sources, double lambda, double mu, int k) {
    require(sources >= 1 && lambda > 0 && mu > 0 && k >= 1 && k <= sources,
            "engset needs 1 <= k <= sources and positive rates");
    BirthDeathSpec spec;
    spec.arrival.resize(k);
    spec.service.resize(k);
    for (int i = 0; i < k; ++i) spec.arrival[i] = (sources - i) * lambda;
    for (int i = 1; i <= k; ++i) spec.service[i - 1] = i * mu;
    return spec;
}

BirthDeathSpec discouraged(double alpha, double mu, int k_trunc) {
    require(alpha > 0 && mu > 0 && k_trunc >= 1, "discouraged needs positive rates");
    BirthDeathSpec spec;
    spec.arrival.resize(k_trunc);
    spec.service.assign(k_trunc, mu);
    for (int i = 0; i < k_trunc; ++i) spec.arrival[i] = alpha / (i + 1);
    return spec;
}

BirthDeathSpec mm1_restart(double lambda, double mu, int k, double restart) {
    require(restart >= 0, "restart rate must be nonnegative");
    BirthDeathSpec spec = mm1k(lambda, mu, k);
    spec.restart_rate = restart;
    return spec;
}

Ctmc build(const BirthDeathSpec& spec) {
    int k = spec.capacity();
    require(k >= 1, "birth-death spec needs capacity >= 1");
    require(spec.service.size() == spec.arrival.size(),
            "arrival and service sequences must have equal length");
    Ctmc chain(k + 1);
    for (int i = 0; i < k; ++i) {
        if (spec.arrival[i] < 0 || spec.service[i] < 0)
            throw InvalidSpec("rates must be nonnegative");
        chain.add_rate(i, i + 1, spec.arrival[i]);
        chain.add_rate(i + 1, i, spec.service[i]);
    }
    if (spec.restart_rate > 0) chain.add_rate(k, 0, spec.restart_rate);
    return chain;
}

QueueIndicators birth_death_indicators(const BirthDeathSpec& spec, int servers) {
    Ctmc chain = build(spec);
    auto pi = solve_stationary(chain);
    int k = spec.capacity();
    QueueIndicators ind{pi.probs[k], 0.0, 0.0, 0.0};
    for (int i = 0; i <= k; ++i) {
        if (i >= servers) ind.p_q += pi.probs[i];
        ind.l_q += std::max(i - servers, 0) * pi.probs[i];
        ind.l += i * pi.probs[i];
    }
    return ind;
}

double f1(long long k, int s, double omega) {
    if (!(omega > 0) || s < 1 || k < s) throw DomainError("f1 needs omega > 0 and k >= s >= 1");
    double a = s / omega;  // offered load lambda/mu
    return poisson_cdf_ratio(s, a) * std::pow(omega, static_cast<double>(k - s)) +
           geom_sum(k - s, omega);
}

double g1(long long k, int s, double omega) {
    if (!(omega > 0) || s < 1 || k < s) throw DomainError("g1 needs omega > 0 and k >= s >= 1");
    return ramp_tail(k - s, omega);
}

double f2(long long k, double omega) {
    if (!(omega > 0) || k < 0) throw DomainError("f2 needs omega > 0 and k >= 0");
    if (std::abs(1.0 - omega) < 1e-3) {
        double acc = 0.0;
        for (long long i = 0; i <= k; ++i) acc += geom_sum(i + 1, omega);
        return acc;
    }
    return (static_cast<double>(k + 1) - omega * geom_sum(k + 1, omega)) / (1.0 - omega);
}

double g2(long long k, double omega) {
    if (!(omega > 0) || k < 0) throw DomainError("g2 needs omega > 0 and k >= 0");
    if (std::abs(1.0 - omega) < 1e-3) {
        double acc = 0.0;
        for (long long i = 1; i <= k; ++i) acc += static_cast<double>(i) * geom_sum(k - i + 1, omega);
        return acc;
    }
    return static_cast<double>(k) * static_cast<double>(k + 1) / (2.0 * (1.0 - omega)) -
           omega * ramp_tail(k, omega) / (1.0 - omega);
}

SharedStateIndicators shared_state_relations(double sub2_pi_s, double sub2_lq_over_pi,
                                             std::optional<double> p_q,
                                             std::optional<double> l_q) {
    if (!(sub2_pi_s > 0.0) || sub2_pi_s > 1.0)
        throw DomainError("subchain-2 shared-state probability must lie in (0,1]");
    if (sub2_lq_over_pi < 0.0) throw DomainError("scaled queue length must be nonnegative");
    if (!p_q && !l_q) throw DomainError("need the queueing probability or the queue length");

    double p_block;
    if (p_q) {
        if (*p_q < 0.0 || *p_q > 1.0) throw DomainError("queueing probability out of [0,1]");
        double denom = 1.0 - (1.0 - sub2_pi_s) * *p_q;
        if (!(denom > 0.0)) throw DomainError("degenerate queueing probability");
        p_block = sub2_pi_s * *p_q / denom;
    } else {
        if (*l_q < 0.0) throw DomainError("queue length must be nonnegative");
        double denom = sub2_lq_over_pi - (1.0 / sub2_pi_s - 1.0) * *l_q;
        if (!(denom > 0.0)) throw DomainError("queue length inconsistent with subchain 2");
        p_block = *l_q / denom;
    }

    SharedStateIndicators out;
    out.p_block = p_block;
    out.pq_over_pi_s = 1.0 / sub2_pi_s;
    out.lq_over_pi_s = sub2_lq_over_pi;
    out.inv_pi_s = (p_block > 0.0) ? 1.0 / p_block + 1.0 / sub2_pi_s - 1.0
                                   : std::numeric_limits<double>::infinity();
    out.pi_s = 1.0 / out.inv_pi_s;
    out.p_q = p_q ? *p_q : out.pi_s / sub2_pi_s;
    out.l_q = l_q ? *l_q : sub2_lq_over_pi * out.pi_s;
    return out;
}

SharedStateIndicators relation_mm1(double rho, std::optional<double> p_q,
                                   std::optional<double> l_q) {
    if (!(rho > 0.0) || rho >= 1.0) throw DomainError("M/M/1 subchain needs rho in (0,1)");
    return shared_state_relations(1.0 - rho, rho / ((1.0 - rho) * (1.0 - rho)), p_q, l_q);
}

SharedStateIndicators relation_mm1k(double rho, int k, std::optional<double> p_q,
                                    std::optional<double> l_q) {
    if (!(rho > 0.0) || k < 1) throw DomainError("M/M/1/k subchain needs rho > 0 and k >= 1");
    double pi_s = 1.0 / geom_sum(k + 1, rho);
    double lq_over = geom_weighted_sum(k + 1, rho);
    return shared_state_relations(pi_s, lq_over, p_q, l_q);
}

SharedStateIndicators relation_discouraged(double rho, std::optional<double> p_q,
                                           std::optional<double> l_q) {
    if (!(rho > 0.0)) throw DomainError("discouraged subchain needs rho > 0");
    return shared_state_relations(std::exp(-rho), rho * std::exp(rho), p_q, l_q);
}

double erlang_b(int s, double offered_load) {
    if (s < 0 || !(offered_load > 0)) throw DomainError("erlang_b needs s >= 0 and load > 0");
    if (s == 0) return 1.0;
    return 1.0 / poisson_cdf_ratio(s, offered_load);
}

double erlang_c(int s, double offered_load) {
    if (s < 1 || !(offered_load > 0) || offered_load >= s)
        throw DomainError("erlang_c needs 0 < load < s");
    double b = erlang_b(s, offered_load);
    return s * b / (s - offered_load * (1.0 - b));
}

RecursionSeries nested_recursion(const BirthDeathSpec& spec, int k_max) {
    if (k_max < 0 || k_max > spec.capacity())
        throw DomainError("recursion depth exceeds the spec capacity");
    RecursionSeries series;
    series.p_block.assign(k_max + 1, 0.0);
    series.l.assign(k_max + 1, 0.0);
    series.p_block[0] = 1.0;
    series.l[0] = 0.0;

    bool log_mode = false;
    long double x = 1.0L, y = 0.0L;  // 1/P^k and L^k/P^k
    double lx = 0.0, l_mean = 0.0;
    for (int k = 1; k <= k_max; ++k) {
        double rho = spec.arrival[k - 1] / spec.service[k - 1];
        if (!(rho > 0.0) || !std::isfinite(rho))
            throw DomainError("recursion needs positive arrival/service ratios");
        if (!log_mode) {
            long double xn = x / rho + 1.0L;
            long double yn = y / rho + k;
            if (xn > 1e300L) {
                log_mode = true;
                lx = static_cast<double>(std::log(x));
                l_mean = static_cast<double>(y / x);
            } else {
                x = xn;
                y = yn;
                series.p_block[k] = static_cast<double>(1.0L / x);
                series.l[k] = static_cast<double>(y / x);
                continue;
            }
        }
        // lx_k = logaddexp(lx_{k-1} - log rho, 0); L_k tracked alongside
        double t = lx - std::log(rho);
        double lx_new = (t > 0) ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
        l_mean = l_mean * std::exp(t - lx_new) + k * std::exp(-lx_new);
        lx = lx_new;
        series.p_block[k] = std::exp(-lx);
        series.l[k] = l_mean;
    }
    return series;
}

RecursionSeries mm1k_series(double lambda, double mu, int k_max) {
    return nested_recursion(mm1k(lambda, mu, std::max(k_max, 1)), k_max);
}

RecursionSeries erlang_b_series(double lambda, double mu, int s_max) {
    return nested_recursion(mmcc(lambda, mu, std::max(s_max, 1)), s_max);
}

RecursionSeries engset_series(int sources, double lambda, double mu, int k_max) {
    return nested_recursion(engset(sources, lambda, mu, std::max(k_max, 1)), k_max);
}

}  // namespace mcd
