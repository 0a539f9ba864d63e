#include "mcd/decompose.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mcd/numerics.hpp"

namespace mcd {

int Subchain::local_index(int parent_state) const {
    auto it = std::lower_bound(members.begin(), members.end(), parent_state);
    if (it == members.end() || *it != parent_state) return -1;
    return static_cast<int>(it - members.begin());
}

namespace {

std::vector<int> sorted_unique(std::vector<int> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

std::vector<char> member_mask(const Ctmc& chain, const std::vector<int>& members) {
    std::vector<char> mask(chain.n_states(), 0);
    for (int m : members) {
        if (m < 0 || m >= chain.n_states()) throw InvalidChain("member state out of range");
        mask[m] = 1;
    }
    return mask;
}

// Restriction of the parent rates to the members, without termination.
Ctmc restricted_chain(const Ctmc& parent, const std::vector<int>& members,
                      const std::vector<char>& mask) {
    Ctmc local(static_cast<int>(members.size()));
    std::vector<int> local_of(parent.n_states(), -1);
    for (std::size_t i = 0; i < members.size(); ++i) local_of[members[i]] = static_cast<int>(i);
    for (int k : members)
        for (const auto& [to, q] : parent.out(k))
            if (mask[to]) local.add_rate(local_of[k], local_of[to], q);
    return local;
}

TerminatedChain materialize(std::shared_ptr<const Ctmc> parent, Subchain sub) {
    auto mask = member_mask(*parent, sub.members);
    Ctmc local = restricted_chain(*parent, sub.members, mask);
    for (const auto& [pair, dq] : sub.termination)
        local.add_rate(sub.local_index(pair.first), sub.local_index(pair.second), dq);
    if (!check_irreducible(local))
        throw ErgodicityLost("terminated subchain is not a single communicating class");
    sub.parent = std::move(parent);
    return TerminatedChain{std::move(sub), std::move(local)};
}

// Connected components of the transition graph restricted to the complement
// (both directions count); these are the non-communicating external classes.
std::vector<int> external_components(const Ctmc& chain, const std::vector<char>& mask,
                                     int* n_components) {
    int n = chain.n_states();
    std::vector<int> comp(n, -1);
    int c = 0;
    for (int s = 0; s < n; ++s) {
        if (mask[s] || comp[s] >= 0) continue;
        std::vector<int> stack{s};
        comp[s] = c;
        while (!stack.empty()) {
            int k = stack.back();
            stack.pop_back();
            auto visit = [&](int m) {
                if (!mask[m] && comp[m] < 0) {
                    comp[m] = c;
                    stack.push_back(m);
                }
            };
            for (const auto& [to, q] : chain.out(k)) {
                (void)q;
                visit(to);
            }
            for (const auto& [from, q] : chain.in(k)) {
                (void)q;
                visit(from);
            }
        }
        ++c;
    }
    *n_components = c;
    return comp;
}

}  // namespace

std::pair<std::vector<int>, std::vector<int>> boundary_of(const Ctmc& chain,
                                                          const std::vector<int>& members) {
    if (members.empty()) throw EmptySet("subchain must contain at least one state");
    auto sorted = sorted_unique(members);
    auto mask = member_mask(chain, sorted);
    std::vector<int> boundary, interior;
    for (int k : sorted) {
        bool touches_outside = false;
        for (const auto& [to, q] : chain.out(k)) {
            (void)q;
            if (!mask[to]) {
                touches_outside = true;
                break;
            }
        }
        if (!touches_outside)
            for (const auto& [from, q] : chain.in(k)) {
                (void)q;
                if (!mask[from]) {
                    touches_outside = true;
                    break;
                }
            }
        (touches_outside ? boundary : interior).push_back(k);
    }
    return {std::move(boundary), std::move(interior)};
}

TerminatedChain truncate(std::shared_ptr<const Ctmc> parent, std::vector<int> members) {
    Subchain sub;
    sub.members = sorted_unique(std::move(members));
    std::tie(sub.boundary, sub.interior) = boundary_of(*parent, sub.members);
    return materialize(std::move(parent), std::move(sub));
}

TerminatedChain terminate_general(std::shared_ptr<const Ctmc> parent, std::vector<int> members,
                                  const std::vector<double>& external_weights,
                                  ExternalClasses mode) {
    const Ctmc& chain = *parent;
    if (external_weights.size() != static_cast<std::size_t>(chain.n_states()))
        throw DimensionMismatch("external weights must cover the full state space");
    Subchain sub;
    sub.members = sorted_unique(std::move(members));
    std::tie(sub.boundary, sub.interior) = boundary_of(chain, sub.members);
    if (sub.boundary.empty())  // members = full set: nothing was lost
        return materialize(std::move(parent), std::move(sub));
    auto mask = member_mask(chain, sub.members);

    int n_classes = 1;
    std::vector<int> comp(chain.n_states(), 0);
    if (mode == ExternalClasses::PerClass) comp = external_components(chain, mask, &n_classes);

    for (int cls = 0; cls < n_classes; ++cls) {
        // weighted external inflow per boundary state, and its total
        std::map<int, double> inflow;
        double denom = 0.0;
        for (int k : sub.boundary) {
            double w = 0.0;
            for (const auto& [from, q] : chain.in(k))
                if (!mask[from] && comp[from] == cls) w += external_weights[from] * q;
            if (w > 0.0) inflow[k] = w;
            denom += w;
        }
        bool any_outflow = false;
        for (int k : sub.boundary) {
            double out_ext = 0.0;
            for (const auto& [to, q] : chain.out(k))
                if (!mask[to] && comp[to] == cls) out_ext += q;
            if (out_ext == 0.0) continue;
            any_outflow = true;
            if (denom <= 0.0)
                throw ZeroInflow("external class feeds no boundary state under these weights");
            for (const auto& [kp, w] : inflow) {
                if (kp == k) continue;  // self increments never enter a balance equation
                sub.termination[{k, kp}] += w / denom * out_ext;
            }
        }
        (void)any_outflow;
    }
    return materialize(std::move(parent), std::move(sub));
}

TerminatedChain terminate_single_external(std::shared_ptr<const Ctmc> parent,
                                          std::vector<int> members) {
    auto sorted = sorted_unique(members);
    if (static_cast<int>(sorted.size()) != parent->n_states() - 1)
        throw InvalidChain("single-external termination requires exactly one external state");
    std::vector<double> uniform(parent->n_states(), 1.0);
    return terminate_general(std::move(parent), std::move(sorted), uniform);
}

TerminatedChain terminate_single_input(std::shared_ptr<const Ctmc> parent,
                                       std::vector<int> members) {
    const Ctmc& chain = *parent;
    Subchain sub;
    sub.members = sorted_unique(std::move(members));
    std::tie(sub.boundary, sub.interior) = boundary_of(chain, sub.members);
    auto mask = member_mask(chain, sub.members);

    int input_state = -1;
    for (int k : sub.boundary) {
        bool receives = false;
        for (const auto& [from, q] : chain.in(k)) {
            (void)q;
            if (!mask[from]) {
                receives = true;
                break;
            }
        }
        if (!receives) continue;
        if (input_state >= 0)
            throw NotSingleInput("states " + std::to_string(input_state) + " and " +
                                 std::to_string(k) + " both receive external inflow");
        input_state = k;
    }
    if (input_state < 0 && !sub.boundary.empty())
        throw NotSingleInput("no boundary state receives external inflow");
    for (int k : sub.boundary) {
        if (k == input_state) continue;  // its own lost outflow would be a self increment
        double out_ext = 0.0;
        for (const auto& [to, q] : chain.out(k))
            if (!mask[to]) out_ext += q;
        if (out_ext > 0.0) sub.termination[{k, input_state}] += out_ext;
    }
    return materialize(std::move(parent), std::move(sub));
}

double verify_partial_flow_conservation(const Ctmc& chain, const StationaryDistribution& full_pi,
                                        const Subchain& sub) {
    auto mask = member_mask(chain, sub.members);
    const auto& pi = full_pi.probs;
    double defect = 0.0;
    for (int k : sub.boundary) {
        CompensatedSum net;
        for (const auto& [to, q] : chain.out(k))
            if (!mask[to]) net.add(pi[k] * q);
        for (const auto& [from, q] : chain.in(k))
            if (!mask[from]) net.add(-pi[from] * q);
        for (const auto& [pair, dq] : sub.termination) {
            if (pair.first == k) net.add(-pi[k] * dq);
            if (pair.second == k) net.add(pi[pair.first] * dq);
        }
        defect = std::max(defect, std::abs(net.value()));
    }
    return defect;
}

ConservationReport verify_conservation_of_distribution(const StationaryDistribution& full_pi,
                                                       const Subchain& sub,
                                                       const StationaryDistribution& sub_pi) {
    if (sub_pi.probs.size() != sub.members.size())
        throw DimensionMismatch("subchain distribution does not match member count");
    double p_j = 0.0;
    for (int k : sub.members) p_j += full_pi.probs[k];
    ConservationReport report;
    for (std::size_t i = 0; i < sub.members.size(); ++i) {
        int k = sub.members[i];
        double dev = std::abs(sub_pi.probs[i] * p_j / full_pi.probs[k] - 1.0);
        report.max_relative_deviation = std::max(report.max_relative_deviation, dev);
        if (std::binary_search(sub.boundary.begin(), sub.boundary.end(), k))
            report.boundary_relative_deviation =
                std::max(report.boundary_relative_deviation, dev);
    }
    return report;
}

DisjointTermination iterative_disjoint_termination(std::shared_ptr<const Ctmc> parent,
                                                   const std::vector<std::vector<int>>& partition,
                                                   double tol, int max_iters, double damping) {
    const Ctmc& chain = *parent;
    int n = chain.n_states();
    std::vector<int> owner(n, -1);
    for (std::size_t j = 0; j < partition.size(); ++j)
        for (int k : partition[j]) {
            if (k < 0 || k >= n || owner[k] >= 0)
                throw InvalidChain("partition must be disjoint over valid states");
            owner[k] = static_cast<int>(j);
        }
    if (std::count(owner.begin(), owner.end(), -1) != 0)
        throw InvalidChain("partition must be exhaustive");
    const int blocks = static_cast<int>(partition.size());

    auto terminate_all = [&](const std::vector<double>& weights) {
        std::vector<TerminatedChain> out;
        out.reserve(blocks);
        for (int j = 0; j < blocks; ++j)
            out.push_back(terminate_general(parent, partition[j], weights));
        return out;
    };
    auto solve_all = [&](const std::vector<TerminatedChain>& terms) {
        std::vector<StationaryDistribution> out;
        out.reserve(blocks);
        for (const auto& t : terms) out.push_back(solve_stationary(t.chain));
        return out;
    };

    // Bootstrap with uniform external weights; any ergodic start does.
    std::vector<double> w(blocks, 1.0 / blocks);
    auto terms = terminate_all(std::vector<double>(n, 1.0));
    auto dists = solve_all(terms);

    for (int iter = 1; iter <= max_iters; ++iter) {
        std::vector<double> ext(n, 0.0);
        for (int j = 0; j < blocks; ++j)
            for (std::size_t i = 0; i < terms[j].sub.members.size(); ++i)
                ext[terms[j].sub.members[i]] = w[j] * dists[j].probs[i];

        auto new_terms = terminate_all(ext);
        auto new_dists = solve_all(new_terms);

        std::vector<double> w_new(blocks, 0.0);
        double w_total = 0.0;
        for (int j = 0; j < blocks; ++j) {
            const auto& sub = new_terms[j].sub;
            auto mask = member_mask(chain, sub.members);
            double num = 0.0, den = 0.0;
            for (int k : sub.boundary) {
                int i = sub.local_index(k);
                for (const auto& [from, q] : chain.in(k))
                    if (!mask[from]) num += ext[from] * q;
                double out_ext = 0.0;
                for (const auto& [to, q] : chain.out(k))
                    if (!mask[to]) out_ext += q;
                den += new_dists[j].probs[i] * out_ext;
            }
            if (!(den > 0.0)) throw ZeroInflow("block has no outflow; partition inconsistent");
            w_new[j] = num / den;
            w_total += w_new[j];
        }
        double change = 0.0;
        for (int j = 0; j < blocks; ++j) {
            double damped = (1.0 - damping) * w[j] + damping * (w_new[j] / w_total);
            change = std::max(change, std::abs(damped - w[j]));
            w[j] = damped;
        }
        for (int j = 0; j < blocks; ++j)
            for (std::size_t i = 0; i < dists[j].probs.size(); ++i)
                change = std::max(change, std::abs(new_dists[j].probs[i] - dists[j].probs[i]));
        terms = std::move(new_terms);
        dists = std::move(new_dists);
        if (change < tol) {
            double w_sum = std::accumulate(w.begin(), w.end(), 0.0);
            for (double& x : w) x /= w_sum;
            return DisjointTermination{std::move(terms), std::move(dists), std::move(w), iter,
                                       change};
        }
    }
    throw NoConvergence("disjoint termination did not converge within " +
                        std::to_string(max_iters) + " sweeps");
}

}  // namespace mcd
