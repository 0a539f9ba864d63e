#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "mcd/decompose.hpp"
#include "mcd/queueing.hpp"
#include "test_support.hpp"

using namespace mcd;
namespace ts = testsupport;

namespace {

std::vector<int> range_vec(int lo, int hi) {  // [lo, hi]
    std::vector<int> v(hi - lo + 1);
    std::iota(v.begin(), v.end(), lo);
    return v;
}

// Four-state cycle, forward rate 1 and backward rate 0.1: the stationary
// distribution is uniform but flow circulates, so truncation conserves
// nothing.
Ctmc lopsided_cycle() {
    Ctmc chain(4);
    for (int i = 0; i < 4; ++i) {
        chain.add_rate(i, (i + 1) % 4, 1.0);
        chain.add_rate((i + 1) % 4, i, 0.1);
    }
    return chain;
}

// Scheme increments including the self pairs that the stored termination
// canonically drops; used to assert the two flow conditions literally.
std::map<std::pair<int, int>, double> full_scheme_increments(const Ctmc& chain,
                                                             const Subchain& sub,
                                                             const std::vector<double>& weights) {
    std::vector<char> mask(chain.n_states(), 0);
    for (int m : sub.members) mask[m] = 1;
    std::map<int, double> inflow;
    double denom = 0.0;
    for (int k : sub.boundary) {
        double w = 0.0;
        for (const auto& [from, q] : chain.in(k))
            if (!mask[from]) w += weights[from] * q;
        inflow[k] = w;
        denom += w;
    }
    std::map<std::pair<int, int>, double> dq;
    for (int k : sub.boundary) {
        double out_ext = 0.0;
        for (const auto& [to, q] : chain.out(k))
            if (!mask[to]) out_ext += q;
        for (int kp : sub.boundary)
            if (inflow[kp] > 0.0) dq[{k, kp}] = inflow[kp] / denom * out_ext;
    }
    return dq;
}

}  // namespace

TEST_CASE("boundary of a birth-death prefix is its last state") {
    auto chain = build(mm1k(1.0, 1.0, 9));  // states 0..9
    auto [boundary, interior] = boundary_of(chain, range_vec(0, 4));
    CHECK(boundary == std::vector<int>{4});
    CHECK(interior == range_vec(0, 3));

    auto [b_all, i_all] = boundary_of(chain, range_vec(0, 9));
    CHECK(b_all.empty());
    CHECK(i_all == range_vec(0, 9));

    CHECK_THROWS_AS(boundary_of(chain, {}), EmptySet);
}

TEST_CASE("truncating M/M/s/k below the shared state yields M/M/s/s") {
    int s = 3, k = 8;
    auto parent = ts::share(build(mmsk(2.0, 1.0, s, k)));
    auto term = truncate(parent, range_vec(0, s));
    CHECK(term.sub.termination.empty());
    Ctmc expected = build(mmcc(2.0, 1.0, s));
    for (int i = 0; i <= s; ++i)
        for (int j = 0; j <= s; ++j) CHECK(term.chain.rate(i, j) == expected.rate(i, j));

    // ... and the tail from s upward is an M/M/1/(k-s) queue at rate s*mu
    auto tail = truncate(parent, range_vec(s, k));
    Ctmc mm1 = build(mm1k(2.0, s * 1.0, k - s));
    for (int i = 0; i <= k - s; ++i)
        for (int j = 0; j <= k - s; ++j) CHECK(tail.chain.rate(i, j) == mm1.rate(i, j));
}

TEST_CASE("truncation refuses a one-way restriction") {
    Ctmc chain(4);
    chain.add_rate(0, 1, 1.0);
    chain.add_rate(1, 0, 1.0);
    chain.add_rate(1, 2, 1.0);  // bridge into {2,3} ...
    chain.add_rate(2, 3, 1.0);
    chain.add_rate(3, 2, 1.0);
    chain.add_rate(3, 0, 1.0);  // ... returns only around the outside
    auto parent = ts::share(std::move(chain));
    CHECK_THROWS_AS(truncate(parent, {1, 2}), ErgodicityLost);
}

TEST_CASE("general termination with one external state drops the weights") {
    ts::Rng rng(5);
    Ctmc chain = ts::random_ergodic_chain(rng, 6, 0.5);
    auto parent = ts::share(std::move(chain));
    std::vector<int> members = {0, 1, 2, 3, 4};  // external = {5}

    std::vector<double> w1(6, 1.0), w2(6, 1.0);
    w2[5] = 123.0;  // any positive weight on the single external state
    auto a = terminate_general(parent, members, w1);
    auto b = terminate_general(parent, members, w2);
    auto c = terminate_single_external(parent, members);
    auto same_increments = [](const Subchain& x, const Subchain& y) {
        REQUIRE(x.termination.size() == y.termination.size());
        auto it = y.termination.begin();
        for (const auto& [pair, dq] : x.termination) {
            CHECK(pair == it->first);
            CHECK(dq == doctest::Approx(it->second).epsilon(1e-14));
            ++it;
        }
    };
    same_increments(a.sub, b.sub);
    CHECK(a.sub.termination == c.sub.termination);

    // matches the one-external-state reduction q(m,k')/sum q(m,k'') * q(k,m)
    double fan_out = 0.0;
    for (int kp : a.sub.boundary) fan_out += parent->rate(5, kp);
    for (const auto& [pair, dq] : a.sub.termination) {
        double expected = parent->rate(5, pair.second) / fan_out * parent->rate(pair.first, 5);
        CHECK(dq == doctest::Approx(expected).epsilon(1e-14));
    }
}

TEST_CASE("a single-boundary subchain is conserved by truncation") {
    auto parent = ts::share(build(mmsk(1.3, 0.9, 2, 10)));
    auto full = solve_stationary(*parent);
    auto members = range_vec(0, 6);  // boundary = {6} only

    auto trunc = truncate(parent, members);
    auto dist = solve_stationary(trunc.chain);
    auto report = verify_conservation_of_distribution(full, trunc.sub, dist);
    CHECK(report.max_relative_deviation <= 1e-10);
    CHECK(verify_partial_flow_conservation(*parent, full, trunc.sub) <= 1e-10);
}

TEST_CASE("general termination with exact weights conserves the distribution") {
    ts::Rng rng(99);
    for (int trial = 0; trial < 12; ++trial) {
        Ctmc raw = ts::random_ergodic_chain(rng, 10, 0.35);
        auto parent = ts::share(std::move(raw));
        auto full = solve_stationary(*parent);

        // grow a random connected 5-state subset
        std::vector<int> members{ts::uniform_int(rng, 0, 9)};
        while (static_cast<int>(members.size()) < 5) {
            std::vector<int> frontier;
            for (int m : members) {
                for (const auto& [to, q] : parent->out(m)) {
                    (void)q;
                    if (std::find(members.begin(), members.end(), to) == members.end())
                        frontier.push_back(to);
                }
                for (const auto& [from, q] : parent->in(m)) {
                    (void)q;
                    if (std::find(members.begin(), members.end(), from) == members.end())
                        frontier.push_back(from);
                }
            }
            members.push_back(frontier[ts::uniform_int(rng, 0, frontier.size() - 1)]);
        }

        auto term = terminate_general(parent, members, full.probs);
        auto dist = solve_stationary(term.chain);
        auto report = verify_conservation_of_distribution(full, term.sub, dist);
        CHECK(report.max_relative_deviation <= 1e-10);
        CHECK(report.boundary_relative_deviation <= report.max_relative_deviation + 1e-15);
        CHECK(verify_partial_flow_conservation(*parent, full, term.sub) <= 1e-10);

        // the two flow conditions, with the canonical self drops restored
        auto dq = full_scheme_increments(*parent, term.sub, full.probs);
        std::vector<char> mask(10, 0);
        for (int m : term.sub.members) mask[m] = 1;
        for (int k : term.sub.boundary) {
            double out_ext = 0.0;
            for (const auto& [to, q] : parent->out(k))
                if (!mask[to]) out_ext += q;
            double dq_out = 0.0;
            for (int kp : term.sub.boundary) {
                auto it = dq.find({k, kp});
                if (it != dq.end()) dq_out += it->second;
            }
            CHECK(std::abs(dq_out - out_ext) <= 1e-12 * std::max(1.0, out_ext));

            double in_ext = 0.0;
            for (const auto& [from, q] : parent->in(k))
                if (!mask[from]) in_ext += full.probs[from] * q;
            double dq_in = 0.0;
            for (int kp : term.sub.boundary) {
                auto it = dq.find({kp, k});
                if (it != dq.end()) dq_in += full.probs[kp] * it->second;
            }
            CHECK(std::abs(dq_in - in_ext) <= 1e-10);
        }

        // global flow balance across the cut
        double net = 0.0;
        for (int k : term.sub.boundary) {
            for (const auto& [to, q] : parent->out(k))
                if (!mask[to]) net += full.probs[k] * q;
            for (const auto& [from, q] : parent->in(k))
                if (!mask[from]) net -= full.probs[from] * q;
        }
        CHECK(std::abs(net) <= 1e-10);
    }
}

TEST_CASE("truncating a circulating cycle does not conserve anything") {
    auto parent = ts::share(lopsided_cycle());
    auto full = solve_stationary(*parent);
    auto term = truncate(parent, {0, 1});
    auto dist = solve_stationary(term.chain);
    CHECK(verify_partial_flow_conservation(*parent, full, term.sub) > 1e-2);
    auto report = verify_conservation_of_distribution(full, term.sub, dist);
    CHECK(report.max_relative_deviation > 1e-2);
    CHECK(report.boundary_relative_deviation > 1e-2);

    // the general scheme repairs it
    auto fixed = terminate_general(parent, {0, 1}, full.probs);
    auto fixed_dist = solve_stationary(fixed.chain);
    CHECK(verify_partial_flow_conservation(*parent, full, fixed.sub) <= 1e-12);
    CHECK(verify_conservation_of_distribution(full, fixed.sub, fixed_dist)
              .max_relative_deviation <= 1e-12);
}

TEST_CASE("partial-flow defect and conservation deviation vanish together") {
    ts::Rng rng(1234);
    for (int trial = 0; trial < 8; ++trial) {
        Ctmc raw = ts::random_ergodic_chain(rng, 9, 0.4);
        for (int i = 0; i < 9; ++i)  // two-way backbone keeps every prefix solvable
            if (raw.rate((i + 1) % 9, i) == 0.0)
                raw.add_rate((i + 1) % 9, i, ts::uniform(rng, 0.1, 2.0));
        auto parent = ts::share(std::move(raw));
        auto full = solve_stationary(*parent);
        std::vector<int> members = range_vec(0, 4);
        TerminatedChain term = (trial % 2 == 0) ? terminate_general(parent, members, full.probs)
                                                : truncate(parent, members);
        auto dist = solve_stationary(term.chain);
        double defect = verify_partial_flow_conservation(*parent, full, term.sub);
        double dev =
            verify_conservation_of_distribution(full, term.sub, dist).max_relative_deviation;
        if (defect <= 1e-8) {
            CHECK(dev <= 1e-8);
        } else {
            CHECK(dev > 1e-8);
        }
    }
}

TEST_CASE("single-input termination handles the boundary cases") {
    // one-way return ring: block {0..4} is entered from outside only at 0
    Ctmc oneway(8);
    for (int i = 0; i < 7; ++i) oneway.add_rate(i, i + 1, 2.0);
    oneway.add_rate(7, 0, 3.0);
    for (int i = 1; i <= 4; ++i) oneway.add_rate(i, i - 1, 0.5);  // back edges only inside block
    auto parent = ts::share(std::move(oneway));
    auto full = solve_stationary(*parent);
    auto term = terminate_single_input(parent, range_vec(0, 4));
    CHECK(term.sub.termination.at({4, 0}) == doctest::Approx(2.0));  // lost 4->5 flow
    auto dist = solve_stationary(term.chain);
    CHECK(verify_conservation_of_distribution(full, term.sub, dist).max_relative_deviation <=
          1e-12);

    // a two-sided birth-death block receives inflow at both ends
    Ctmc wide(6);
    for (int i = 0; i < 5; ++i) {
        wide.add_rate(i, i + 1, 1.0);
        wide.add_rate(i + 1, i, 1.0);
    }
    auto wide_parent = ts::share(std::move(wide));
    CHECK_THROWS_AS(terminate_single_input(wide_parent, {1, 2, 3, 4}), NotSingleInput);
}

TEST_CASE("disjoint iteration reproduces the full distribution") {
    ts::Rng rng(2024);

    SUBCASE("two blocks of a birth-death chain") {
        auto parent = ts::share(build(mmsk(1.2, 0.7, 2, 11)));
        auto full = solve_stationary(*parent);
        auto result = iterative_disjoint_termination(parent, {range_vec(0, 5), range_vec(6, 11)});
        CHECK(result.iterations < 10000);
        for (int j = 0; j < 2; ++j)
            for (std::size_t i = 0; i < result.dists[j].probs.size(); ++i) {
                int k = result.blocks[j].sub.members[i];
                CHECK(result.weights[j] * result.dists[j].probs[i] ==
                      doctest::Approx(full.probs[k]).epsilon(1e-8));
            }
    }

    SUBCASE("singleton blocks recover the stationary vector as weights") {
        Ctmc chain(3);
        chain.add_rate(0, 1, 1.0);
        chain.add_rate(1, 2, 2.0);
        chain.add_rate(2, 0, 0.5);
        chain.add_rate(1, 0, 0.3);
        chain.add_rate(2, 1, 0.8);
        chain.add_rate(0, 2, 0.2);
        auto parent = ts::share(std::move(chain));
        auto full = solve_stationary(*parent);
        auto result = iterative_disjoint_termination(parent, {{0}, {1}, {2}});
        for (int j = 0; j < 3; ++j) {
            CHECK(result.dists[j].probs == std::vector<double>{1.0});
            CHECK(result.weights[j] == doctest::Approx(full.probs[j]).epsilon(1e-8));
        }
    }

    SUBCASE("three blocks of a random 12-state chain") {
        Ctmc raw = ts::random_ergodic_chain(rng, 12, 0.3);
        auto parent = ts::share(std::move(raw));
        auto full = solve_stationary(*parent);
        auto result = iterative_disjoint_termination(
            parent, {range_vec(0, 3), range_vec(4, 7), range_vec(8, 11)});
        for (int j = 0; j < 3; ++j)
            for (std::size_t i = 0; i < result.dists[j].probs.size(); ++i) {
                int k = result.blocks[j].sub.members[i];
                CHECK(result.weights[j] * result.dists[j].probs[i] ==
                      doctest::Approx(full.probs[k]).epsilon(1e-8));
            }
    }

    SUBCASE("rejects overlapping or non-exhaustive partitions") {
        auto parent = ts::share(build(mm1k(1.0, 1.0, 5)));
        CHECK_THROWS(iterative_disjoint_termination(parent, {range_vec(0, 3), range_vec(3, 5)}));
        CHECK_THROWS(iterative_disjoint_termination(parent, {range_vec(0, 3)}));
    }
}

TEST_CASE("boundary steady-state equations hold by substitution") {
    ts::Rng rng(77);
    Ctmc raw = ts::random_ergodic_chain(rng, 11, 0.35);
    auto parent = ts::share(std::move(raw));
    auto full = solve_stationary(*parent);
    std::vector<int> members = range_vec(2, 7);
    auto term = terminate_general(parent, members, full.probs);
    auto dist = solve_stationary(term.chain);

    // full-chain balance restricted to boundary states
    for (int k : term.sub.boundary) {
        double net = full.probs[k] * parent->total_out_rate(k);
        for (const auto& [from, q] : parent->in(k)) net -= full.probs[from] * q;
        CHECK(std::abs(net) <= 1e-12);
    }
    // terminated-chain balance at the same states
    for (int k : term.sub.boundary) {
        int i = term.sub.local_index(k);
        double net = dist.probs[i] * term.chain.total_out_rate(i);
        for (const auto& [from, q] : term.chain.in(i)) net -= dist.probs[from] * q;
        CHECK(std::abs(net) <= 1e-12);
    }
}
