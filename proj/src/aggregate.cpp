#include "mcd/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

#include "mcd/numerics.hpp"

namespace mcd {

const Ctmc& DecompositionPlan::parent() const {
    if (!positive.empty() && positive.front().sub.parent) return *positive.front().sub.parent;
    throw CoverageViolation("plan has no positive subchains");
}

CoverageReport validate_plan(const DecompositionPlan& plan) {
    CoverageReport report;
    report.counts.assign(plan.full_state_count, 0);
    for (const auto& e : plan.positive)
        for (int k : e.sub.members) ++report.counts.at(k);
    for (const auto& e : plan.negative)
        for (int k : e.sub.members) --report.counts.at(k);
    for (int k = 0; k < plan.full_state_count; ++k)
        if (report.counts[k] != 1) report.offenders.push_back(k);
    report.ok = report.offenders.empty();
    return report;
}

namespace {

// Undirected bridges of the positive-rate graph (iterative lowlink).  Across
// a bridge the only two crossing flows balance, pinning the probability
// ratio of its endpoints.
std::vector<std::pair<int, int>> find_bridges(const Ctmc& chain) {
    int n = chain.n_states();
    std::vector<std::pair<int, int>> pairs;  // deduplicated undirected edges
    {
        std::vector<std::pair<int, int>> all;
        chain.for_each_transition([&](int from, int to, double) {
            all.emplace_back(std::min(from, to), std::max(from, to));
        });
        std::sort(all.begin(), all.end());
        all.erase(std::unique(all.begin(), all.end()), all.end());
        pairs = std::move(all);
    }
    std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbor, edge id)
    for (std::size_t id = 0; id < pairs.size(); ++id) {
        adj[pairs[id].first].emplace_back(pairs[id].second, static_cast<int>(id));
        adj[pairs[id].second].emplace_back(pairs[id].first, static_cast<int>(id));
    }
    std::vector<int> disc(n, -1), low(n, 0);
    std::vector<std::pair<int, int>> bridges;
    int timer = 0;
    struct Frame {
        int v;
        int parent_edge;
        std::size_t next;
    };
    for (int root = 0; root < n; ++root) {
        if (disc[root] >= 0) continue;
        std::vector<Frame> stack{{root, -1, 0}};
        disc[root] = low[root] = timer++;
        while (!stack.empty()) {
            Frame& fr = stack.back();
            if (fr.next < adj[fr.v].size()) {
                auto [u, id] = adj[fr.v][fr.next++];
                if (id == fr.parent_edge) continue;
                if (disc[u] < 0) {
                    disc[u] = low[u] = timer++;
                    stack.push_back({u, id, 0});
                } else {
                    low[fr.v] = std::min(low[fr.v], disc[u]);
                }
            } else {
                int v = fr.v;
                int pe = fr.parent_edge;
                stack.pop_back();
                if (!stack.empty()) {
                    int p = stack.back().v;
                    low[p] = std::min(low[p], low[v]);
                    if (low[v] > disc[p]) bridges.push_back(pairs[pe]);
                }
            }
        }
    }
    return bridges;
}

int local_of(const std::vector<int>& members, int state) {
    auto it = std::lower_bound(members.begin(), members.end(), state);
    if (it == members.end() || *it != state) return -1;
    return static_cast<int>(it - members.begin());
}

}  // namespace

double BetaTable::beta(int k, int k_prime) const {
    int n = n_states();
    if (k < 0 || k >= n || k_prime < 0 || k_prime >= n)
        throw MissingBeta("state out of range for beta lookup");
    if (k == k_prime) return 1.0;
    // direct ratio inside a shared subchain
    for (const auto& [entry, local] : membership_[k]) {
        int other = local_of(entry_members_[entry], k_prime);
        if (other >= 0) return entry_probs_[entry][local] / entry_probs_[entry][other];
    }
    // chain products along the ratio graph
    std::vector<double> value(n, 0.0);
    std::vector<char> seen(n, 0);
    std::deque<int> queue{k};
    seen[k] = 1;
    value[k] = 1.0;
    while (!queue.empty()) {
        int v = queue.front();
        queue.pop_front();
        for (const auto& e : adj_[v]) {
            if (seen[e.to]) continue;
            seen[e.to] = 1;
            value[e.to] = value[v] * e.ratio;
            if (e.to == k_prime) return value[e.to];
            queue.push_back(e.to);
        }
    }
    throw MissingBeta("no ratio path from state " + std::to_string(k) + " to " +
                      std::to_string(k_prime));
}

bool BetaTable::has_path(int k, int k_prime) const {
    try {
        beta(k, k_prime);
        return true;
    } catch (const MissingBeta&) {
        return false;
    }
}

BetaTable beta_from_plan(const DecompositionPlan& plan) {
    const Ctmc& parent = plan.parent();
    int n = parent.n_states();
    BetaTable table;
    table.adj_.resize(n);
    table.membership_.resize(n);

    auto add_entry = [&](const PlanEntry& e) {
        int id = static_cast<int>(table.entry_members_.size());
        table.entry_members_.push_back(e.sub.members);
        table.entry_probs_.push_back(e.dist.probs);
        const auto& members = e.sub.members;
        const auto& probs = e.dist.probs;
        for (std::size_t i = 0; i < members.size(); ++i)
            table.membership_[members[i]].emplace_back(id, static_cast<int>(i));
        // star around the first member keeps the graph sparse; direct pairs
        // are answered from the stored probabilities anyway
        for (std::size_t i = 1; i < members.size(); ++i) {
            double r = probs[0] / probs[i];
            table.adj_[members[0]].push_back({members[i], r, id});
            table.adj_[members[i]].push_back({members[0], 1.0 / r, id});
        }
    };
    for (const auto& e : plan.positive) add_entry(e);
    for (const auto& e : plan.negative) add_entry(e);

    for (const auto& [a, b] : find_bridges(parent)) {
        double q_ab = parent.rate(a, b);
        double q_ba = parent.rate(b, a);
        if (q_ab <= 0.0 || q_ba <= 0.0) continue;  // one-way bridge: not ergodic anyway
        table.adj_[a].push_back({b, q_ba / q_ab, -1});
        table.adj_[b].push_back({a, q_ab / q_ba, -1});
    }

    // every state that some subchain touches must sit in one ratio component
    std::vector<char> in_plan(n, 0);
    int start = -1;
    for (int k = 0; k < n; ++k)
        if (!table.membership_[k].empty()) {
            in_plan[k] = 1;
            if (start < 0) start = k;
        }
    if (start >= 0) {
        std::vector<char> seen(n, 0);
        std::deque<int> queue{start};
        seen[start] = 1;
        while (!queue.empty()) {
            int v = queue.front();
            queue.pop_front();
            for (const auto& e : table.adj_[v])
                if (!seen[e.to]) {
                    seen[e.to] = 1;
                    queue.push_back(e.to);
                }
        }
        for (int k = 0; k < n; ++k)
            if (in_plan[k] && !seen[k])
                throw DisconnectedPlan("no ratio path reaches state " + std::to_string(k) +
                                       "; subchains do not overlap and no bridge links them");
    }
    return table;
}

double extended_pi(const PlanEntry& entry, const BetaTable& betas, int reference, int anchor) {
    int local = local_of(entry.sub.members, anchor);
    if (local < 0) throw MissingBeta("anchor state is not a member of the subchain");
    return betas.beta(reference, anchor) * entry.dist.probs[local];
}

double extended_pi(const PlanEntry& entry, const BetaTable& betas, int reference) {
    return extended_pi(entry, betas, reference, entry.sub.members.front());
}

namespace {

void require_valid(const DecompositionPlan& plan) {
    auto coverage = validate_plan(plan);
    if (!coverage.ok) {
        std::string msg = "plan does not cover every state net-once; offenders:";
        for (std::size_t i = 0; i < coverage.offenders.size() && i < 8; ++i)
            msg += " " + std::to_string(coverage.offenders[i]);
        throw CoverageViolation(msg);
    }
}

double local_expectation(const PlanEntry& entry, const StateFunction& f) {
    CompensatedSum acc;
    for (std::size_t i = 0; i < entry.sub.members.size(); ++i)
        acc.add(f[entry.sub.members[i]] * entry.dist.probs[i]);
    return acc.value();
}

}  // namespace

Aggregate total_expectation(const DecompositionPlan& plan, const StateFunction& f, int reference,
                            const BetaTable& betas) {
    if (f.size() != static_cast<std::size_t>(plan.full_state_count))
        throw DimensionMismatch("state function length does not match the plan");
    require_valid(plan);
    CompensatedSum s_f, s_1;
    for (const auto& e : plan.positive) {
        double ext = extended_pi(e, betas, reference);
        s_f.add(local_expectation(e, f) / ext);
        s_1.add(1.0 / ext);
    }
    for (const auto& e : plan.negative) {
        double ext = extended_pi(e, betas, reference);
        s_f.add(-local_expectation(e, f) / ext);
        s_1.add(-1.0 / ext);
    }
    double scaled = s_f.value();
    double inv_pi = s_1.value();
    return Aggregate{scaled / inv_pi, 1.0 / inv_pi, scaled};
}

StationaryDistribution reconstruct_distribution(const DecompositionPlan& plan,
                                                const BetaTable& betas, int reference) {
    require_valid(plan);
    int n = plan.full_state_count;
    std::vector<CompensatedSum> acc(n);
    CompensatedSum s_1;
    auto fold = [&](const PlanEntry& e, double sign) {
        double ext = extended_pi(e, betas, reference);
        s_1.add(sign / ext);
        for (std::size_t i = 0; i < e.sub.members.size(); ++i)
            acc[e.sub.members[i]].add(sign * e.dist.probs[i] / ext);
    };
    for (const auto& e : plan.positive) fold(e, 1.0);
    for (const auto& e : plan.negative) fold(e, -1.0);

    StationaryDistribution out;
    out.probs.resize(n);
    double inv = s_1.value();
    for (int k = 0; k < n; ++k) out.probs[k] = acc[k].value() / inv;

    const Ctmc& parent = plan.parent();
    double defect = 0.0;
    for (int k = 0; k < n; ++k) {
        CompensatedSum net;
        for (const auto& [to, q] : parent.out(k)) net.add(out.probs[k] * q);
        for (const auto& [from, q] : parent.in(k)) net.add(-out.probs[from] * q);
        defect = std::max(defect, std::abs(net.value()));
    }
    out.residual = defect;
    return out;
}

double measure_value(std::shared_ptr<const Ctmc> parent, const StationaryDistribution& full_pi,
                     const std::vector<int>& members, const StateFunction& f, int reference) {
    if (members.empty()) return 0.0;
    std::vector<int> sorted = members;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    if (static_cast<int>(sorted.size()) == parent->n_states()) {
        CompensatedSum acc;
        for (int k = 0; k < parent->n_states(); ++k) acc.add(f[k] * full_pi.probs[k]);
        return acc.value() / full_pi.probs[reference];
    }
    auto term = terminate_general(parent, sorted, full_pi.probs);
    auto dist = solve_stationary(term.chain);
    CompensatedSum acc;
    for (std::size_t i = 0; i < sorted.size(); ++i) acc.add(f[sorted[i]] * dist.probs[i]);
    int anchor = sorted.front();
    double ext = full_pi.probs[reference] / full_pi.probs[anchor] * dist.probs[0];
    return acc.value() / ext;
}

MeasureChecks measure_properties_check(std::shared_ptr<const Ctmc> parent,
                                       const StationaryDistribution& full_pi,
                                       const StateFunction& f, const std::vector<int>& a,
                                       const std::vector<int>& b, int reference) {
    int n = parent->n_states();
    auto mu = [&](const std::vector<int>& members) {
        return measure_value(parent, full_pi, members, f, reference);
    };
    std::vector<int> all(n);
    for (int k = 0; k < n; ++k) all[k] = k;
    std::vector<int> sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());

    std::vector<int> a_comp, a_union_b, a_inter_b, b_minus_a;
    std::set_difference(all.begin(), all.end(), sa.begin(), sa.end(),
                        std::back_inserter(a_comp));
    std::set_union(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(a_union_b));
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(),
                          std::back_inserter(a_inter_b));
    std::set_difference(sb.begin(), sb.end(), sa.begin(), sa.end(),
                        std::back_inserter(b_minus_a));

    MeasureChecks checks;
    double mu_s = mu(all), mu_a = mu(sa), mu_ac = mu(a_comp);
    checks.complement_defect = std::abs(mu_s - mu_a - mu_ac);
    checks.complement_scale = std::max({std::abs(mu_s), std::abs(mu_a), std::abs(mu_ac), 1.0});

    checks.subset_relation = std::includes(sb.begin(), sb.end(), sa.begin(), sa.end());
    double mu_b = mu(sb);
    if (checks.subset_relation) {
        double mu_diff = mu(b_minus_a);
        checks.monotone_defect = std::abs(mu_b - mu_a - mu_diff);
        checks.monotone_scale = std::max({std::abs(mu_b), std::abs(mu_a), std::abs(mu_diff), 1.0});
    }

    double mu_union = mu(a_union_b);
    double mu_inter = mu(a_inter_b);
    checks.inclusion_exclusion_defect = std::abs(mu_union - mu_a - mu_b + mu_inter);
    checks.inclusion_exclusion_scale =
        std::max({std::abs(mu_union), std::abs(mu_a), std::abs(mu_b), std::abs(mu_inter), 1.0});
    return checks;
}

}  // namespace mcd
