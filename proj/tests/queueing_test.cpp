#include <doctest.h>

#include <cmath>

#include "mcd/numerics.hpp"
#include "mcd/queueing.hpp"
#include "test_support.hpp"

using namespace mcd;
namespace ts = testsupport;

namespace {

// Forward Poisson-sum Erlang formulas, independent of the library's backward
// ratio route.
double erlang_b_forward(int s, double a) {
    double pmf = std::exp(-a);
    double below = 0.0;
    for (int i = 0; i < s; ++i) {
        below += pmf;
        pmf *= a / (i + 1);
    }
    return pmf / (below + pmf);
}

double erlang_c_forward(int s, double a) {
    double pmf = std::exp(-a);
    double below = 0.0;
    for (int i = 0; i < s; ++i) {
        below += pmf;
        pmf *= a / (i + 1);
    }
    double rho = a / s;
    return pmf / ((1.0 - rho) * below + pmf);
}

// Scaled indicators 1/pi_k and L/pi_k (or L_Q/pi_k) from an exact solve.
struct ScaledPair {
    double inv_pi;
    double weighted;
};

ScaledPair oracle_scaled(const Ctmc& chain, int ref, int servers_for_queue) {
    auto pi = solve_stationary(chain);
    double weighted = 0.0;
    for (int i = 0; i < chain.n_states(); ++i)
        weighted += std::max(i - servers_for_queue, 0) * pi.probs[i];
    return {1.0 / pi.probs[ref], weighted / pi.probs[ref]};
}

}  // namespace

TEST_CASE("model builders materialize the stated rates") {
    auto chain = build(mm1k(1.0, 1.0, 2));
    auto pi = solve_stationary(chain);
    for (int k = 0; k < 3; ++k) CHECK(pi.probs[k] == doctest::Approx(1.0 / 3).epsilon(1e-14));

    auto eng = engset(9, 0.4, 1.1, 5);
    for (int i = 0; i < 5; ++i) CHECK(eng.arrival[i] == doctest::Approx((9 - i) * 0.4));
    for (int i = 1; i <= 5; ++i) CHECK(eng.service[i - 1] == doctest::Approx(i * 1.1));

    auto disc = discouraged(2.0, 1.0, 4);
    for (int i = 0; i < 4; ++i) CHECK(disc.arrival[i] == doctest::Approx(2.0 / (i + 1)));

    CHECK_THROWS_AS(engset(3, 1.0, 1.0, 5), InvalidSpec);
    CHECK_THROWS_AS(mm1k(0.0, 1.0, 3), InvalidSpec);
}

TEST_CASE("restart-chain kernels at the degenerate size") {
    for (double w : {0.3, 1.0, 2.5}) {
        CHECK(f2(0, w) == doctest::Approx(1.0));
        CHECK(g2(0, w) == doctest::Approx(0.0));
    }
    CHECK_THROWS_AS(f2(-1, 0.5), DomainError);
    CHECK_THROWS_AS(f2(3, 0.0), DomainError);
    CHECK_THROWS_AS(f1(2, 3, 0.5), DomainError);  // k < s
}

TEST_CASE("f2/g2 match exact solves of the restart chain") {
    for (double w : {0.4, 0.97, 1.0, 1.0 + 1e-10, 1.0 - 1e-10, 1.3, 3.0}) {
        for (int k : {1, 2, 5, 9, 14}) {
            // arrival 1, service w, restart 1 gives ratio w and unit restart share
            auto chain = build(mm1_restart(1.0, w, k, 1.0));
            auto pi = solve_stationary(chain);
            double inv = 1.0 / pi.probs[k];
            double l_over = 0.0;
            for (int i = 0; i <= k; ++i) l_over += i * pi.probs[i];
            l_over /= pi.probs[k];
            CHECK(f2(k, w) == doctest::Approx(inv).epsilon(1e-10));
            CHECK(g2(k, w) == doctest::Approx(l_over).epsilon(1e-10));
        }
    }
    // limits picked up exactly at w == 1
    CHECK(f2(6, 1.0) == doctest::Approx(7.0 * 8.0 / 2.0).epsilon(1e-14));
    CHECK(g2(6, 1.0) == doctest::Approx(6.0 * 7.0 * 8.0 / 6.0).epsilon(1e-14));
}

TEST_CASE("f1/g1 match exact solves of M/M/s/k") {
    double mu = 1.0;
    for (int s = 1; s <= 5; ++s) {
        for (int k = s; k <= s + 10; k += 2) {
            for (double w : {0.6, 1.0, 1.7}) {
                double lambda = s * mu / w;
                auto chain = build(mmsk(lambda, mu, s, k));
                auto scaled = oracle_scaled(chain, k, s);
                CHECK(f1(k, s, w) == doctest::Approx(scaled.inv_pi).epsilon(1e-10));
                CHECK(g1(k, s, w) == doctest::Approx(scaled.weighted).epsilon(1e-10));
            }
        }
    }
    // and right next to the removable singularity
    for (double w : {1.0 + 1e-10, 1.0 - 1e-10}) {
        int s = 3, k = 9;
        auto chain = build(mmsk(s * 1.0 / w, 1.0, s, k));
        auto scaled = oracle_scaled(chain, k, s);
        CHECK(f1(k, s, w) == doctest::Approx(scaled.inv_pi).epsilon(1e-10));
        CHECK(g1(k, s, w) == doctest::Approx(scaled.weighted).epsilon(1e-10));
    }
}

TEST_CASE("shared-state relation turns the waiting probability into blocking") {
    for (int s : {1, 2, 4, 7, 10}) {
        for (double rho : {0.3, 0.7, 0.95}) {
            double a = rho * s;
            double p_q = erlang_c_forward(s, a);
            auto rel = relation_mm1(rho, p_q, std::nullopt);
            CHECK(rel.p_block == doctest::Approx(erlang_b_forward(s, a)).epsilon(1e-10));

            // same answer from the mean queue length of M/M/s
            double l_q = p_q * rho / (1.0 - rho);
            auto rel2 = relation_mm1(rho, std::nullopt, l_q);
            CHECK(rel2.p_block == doctest::Approx(erlang_b_forward(s, a)).epsilon(1e-10));
            CHECK(rel2.p_q == doctest::Approx(p_q).epsilon(1e-10));
        }
    }
    CHECK_THROWS_AS(relation_mm1(1.2, 0.5, std::nullopt), DomainError);
    CHECK_THROWS_AS(shared_state_relations(0.5, 1.0, std::nullopt, std::nullopt), DomainError);
}

TEST_CASE("the finite-capacity relation approaches the infinite one") {
    double rho = 0.8;
    double p_q = erlang_c_forward(4, 4 * rho);
    auto finite = relation_mm1k(rho, 200, p_q, std::nullopt);
    auto infinite = relation_mm1(rho, p_q, std::nullopt);
    CHECK(std::abs(finite.p_block - infinite.p_block) <= 1e-6);
    // at small k they genuinely differ
    auto small = relation_mm1k(rho, 3, p_q, std::nullopt);
    CHECK(std::abs(small.p_block - infinite.p_block) > 1e-3);
}

TEST_CASE("discouraged-arrivals relation against a composite oracle") {
    ts::Rng rng(17);
    for (int trial = 0; trial < 4; ++trial) {
        int s = ts::uniform_int(rng, 2, 5);
        double alpha = ts::uniform(rng, 0.6, 2.5);
        double mu = ts::uniform(rng, 0.7, 1.6);
        double rho = alpha / mu;
        // arbitrary birth-death below the shared state s, discouraged above
        int tail = 60;  // Poisson(rho) mass beyond this is far below 1e-12
        Ctmc chain(s + tail + 1);
        for (int i = 0; i < s; ++i) {
            chain.add_rate(i, i + 1, ts::uniform(rng, 0.5, 2.0));
            chain.add_rate(i + 1, i, ts::uniform(rng, 0.5, 2.0));
        }
        for (int j = 0; j < tail; ++j) {
            chain.add_rate(s + j, s + j + 1, alpha / (j + 1));
            chain.add_rate(s + j + 1, s + j, mu);
        }
        auto pi = solve_stationary(chain);
        double p_q = 0.0, l_q = 0.0, p1 = 0.0;
        for (int i = 0; i <= s + tail; ++i) {
            if (i >= s) p_q += pi.probs[i];
            if (i > s) l_q += (i - s) * pi.probs[i];
            if (i <= s) p1 += pi.probs[i];
        }
        double blocking = pi.probs[s] / p1;  // pi_s of truncated subchain 1
        auto rel = relation_discouraged(rho, p_q, std::nullopt);
        CHECK(rel.p_block == doctest::Approx(blocking).epsilon(1e-8));
        auto rel2 = relation_discouraged(rho, std::nullopt, l_q);
        CHECK(rel2.p_block == doctest::Approx(blocking).epsilon(1e-8));
    }
}

TEST_CASE("blocking recursions agree with the direct formulas and solves") {
    SUBCASE("two-state symmetric chain blocks half the time") {
        auto series = erlang_b_series(1.0, 1.0, 1);
        CHECK(series.p_block[1] == doctest::Approx(0.5).epsilon(1e-14));
    }

    SUBCASE("loss-system recursion vs the direct ratio formula") {
        for (double a : {0.5, 5.0, 30.0}) {
            auto series = erlang_b_series(a, 1.0, 50);
            for (int s = 1; s <= 50; ++s) {
                double direct = erlang_b_forward(s, a);
                CHECK(series.p_block[s] == doctest::Approx(direct).epsilon(1e-12));
                if (s > 1) CHECK(series.p_block[s] < series.p_block[s - 1]);  // monotone in s
            }
        }
    }

    SUBCASE("number-in-system recursion vs exact solves") {
        double lambda = 0.9, mu = 1.0;
        auto series = mm1k_series(lambda, mu, 50);
        for (int k : {1, 2, 5, 10, 25, 50}) {
            auto chain = build(mm1k(lambda, mu, k));
            auto pi = solve_stationary(chain);
            double l = 0.0;
            for (int i = 0; i <= k; ++i) l += i * pi.probs[i];
            CHECK(series.p_block[k] == doctest::Approx(pi.probs[k]).epsilon(1e-12));
            CHECK(series.l[k] == doctest::Approx(l).epsilon(1e-12));
        }
    }

    SUBCASE("finite-source recursion vs exact solves") {
        int sources = 60;
        double lambda = 0.05, mu = 1.0;
        auto series = engset_series(sources, lambda, mu, 50);
        for (int k : {1, 3, 10, 30, 50}) {
            auto chain = build(engset(sources, lambda, mu, k));
            auto pi = solve_stationary(chain);
            double l = 0.0;
            for (int i = 0; i <= k; ++i) l += i * pi.probs[i];
            CHECK(series.p_block[k] == doctest::Approx(pi.probs[k]).epsilon(1e-11));
            CHECK(series.l[k] == doctest::Approx(l).epsilon(1e-11));
        }
    }

    SUBCASE("deep recursion survives overflow of 1/P") {
        auto series = mm1k_series(0.01, 1.0, 400);  // 1/P grows like 100^k
        CHECK(std::isfinite(series.l[400]));
        CHECK(series.l[400] == doctest::Approx(0.01 / 0.99).epsilon(1e-6));
        CHECK(series.p_block[400] >= 0.0);
    }
}

TEST_CASE("one-state-at-a-time identity holds with independent solves") {
    ts::Rng rng(23);
    int k_max = 8;
    BirthDeathSpec spec;
    spec.arrival.resize(k_max);
    spec.service.resize(k_max);
    for (int i = 0; i < k_max; ++i) {
        spec.arrival[i] = ts::uniform(rng, 0.4, 2.0);
        spec.service[i] = ts::uniform(rng, 0.4, 2.0);
    }
    auto f = ts::random_state_function(rng, k_max + 1);

    auto scaled_expectation = [&](int k) {
        BirthDeathSpec prefix;
        prefix.arrival.assign(spec.arrival.begin(), spec.arrival.begin() + k);
        prefix.service.assign(spec.service.begin(), spec.service.begin() + k);
        auto pi = solve_stationary(build(prefix));
        double e = 0.0;
        for (int i = 0; i <= k; ++i) e += f[i] * pi.probs[i];
        return std::pair<double, double>{e / pi.probs[k], pi.probs[k]};
    };

    for (int k = 2; k <= k_max; ++k) {
        auto [lhs, pik] = scaled_expectation(k);
        auto [prev, pik1] = scaled_expectation(k - 1);
        (void)pik;
        (void)pik1;
        double rho = spec.arrival[k - 1] / spec.service[k - 1];  // beta(k, k-1)
        CHECK(lhs == doctest::Approx(prev / rho + f[k]).epsilon(1e-11));
    }

    // flattened form: sum_i f(i)/beta(k,i) with chained local-balance ratios
    int k = k_max;
    auto [lhs, pik] = scaled_expectation(k);
    (void)pik;
    double sum = 0.0;
    for (int i = k; i >= 0; --i) {
        double beta_ki = 1.0;
        for (int j = i; j < k; ++j) beta_ki *= spec.arrival[j] / spec.service[j];
        sum += f[i] / beta_ki;
    }
    CHECK(sum == doctest::Approx(lhs).epsilon(1e-11));
}

TEST_CASE("indicator bundle from a solved model") {
    auto ind = birth_death_indicators(mmsk(2.0, 1.0, 2, 6), 2);
    auto pi = solve_stationary(build(mmsk(2.0, 1.0, 2, 6)));
    CHECK(ind.p_block == doctest::Approx(pi.probs[6]).epsilon(1e-13));
    CHECK(ind.l >= ind.l_q);
    double pq = 0.0;
    for (int i = 2; i <= 6; ++i) pq += pi.probs[i];
    CHECK(ind.p_q == doctest::Approx(pq).epsilon(1e-13));
}
