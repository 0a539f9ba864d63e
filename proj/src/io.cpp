#include "mcd/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mcd/numerics.hpp"

namespace mcd::io {

using nlohmann::json;

Ctmc chain_from_json(const json& j) {
    if (!j.is_object() || !j.contains("n_states") || !j.contains("transitions"))
        throw InvalidChain("chain file needs n_states and transitions");
    Ctmc chain(j.at("n_states").get<int>());
    for (const auto& t : j.at("transitions")) {
        if (!t.is_array() || t.size() != 3)
            throw InvalidChain("each transition must be [from, to, rate]");
        chain.add_rate(t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<double>());
    }
    if (j.contains("labels"))
        for (const auto& [key, value] : j.at("labels").items())
            chain.labels[std::stoi(key)] = value.get<std::string>();
    return chain;
}

json chain_to_json(const Ctmc& chain) {
    json j;
    j["n_states"] = chain.n_states();
    json transitions = json::array();
    chain.for_each_transition([&](int from, int to, double rate) {
        transitions.push_back(json::array({from, to, rate}));
    });
    j["transitions"] = std::move(transitions);
    if (!chain.labels.empty()) {
        json labels;
        for (const auto& [k, name] : chain.labels) labels[std::to_string(k)] = name;
        j["labels"] = std::move(labels);
    }
    return j;
}

namespace {

SubchainSpec subchain_spec_from_json(const json& j) {
    SubchainSpec spec;
    if (!j.contains("members")) throw InvalidChain("subchain spec needs members");
    spec.members = j.at("members").get<std::vector<int>>();
    spec.method = j.value("method", std::string("truncate"));
    if (j.contains("external_pi"))
        spec.external_pi = j.at("external_pi").get<std::vector<double>>();
    return spec;
}

}  // namespace

PlanSpec plan_from_json(const json& j) {
    PlanSpec plan;
    if (!j.contains("positive")) throw InvalidChain("plan file needs a positive subchain list");
    for (const auto& s : j.at("positive")) plan.positive.push_back(subchain_spec_from_json(s));
    if (j.contains("negative"))
        for (const auto& s : j.at("negative")) plan.negative.push_back(subchain_spec_from_json(s));
    plan.reference_state = j.value("reference_state", 0);
    plan.f_spec = j.value("f", std::string("one"));
    return plan;
}

StateFunction parse_state_function(const std::string& spec, int n_states) {
    StateFunction f(n_states, 0.0);
    if (spec == "one") {
        std::fill(f.begin(), f.end(), 1.0);
    } else if (spec == "identity") {
        for (int k = 0; k < n_states; ++k) f[k] = k;
    } else if (spec.rfind("indicator:", 0) == 0) {
        int k = std::stoi(spec.substr(10));
        if (k < 0 || k >= n_states) throw InvalidChain("indicator state out of range");
        f[k] = 1.0;
    } else if (spec.rfind("values:", 0) == 0) {
        auto values = json::parse(spec.substr(7)).get<std::vector<double>>();
        if (static_cast<int>(values.size()) != n_states)
            throw InvalidChain("values list must cover every state");
        f = std::move(values);
    } else {
        throw InvalidChain("unknown state function '" + spec + "'");
    }
    return f;
}

CbsParams cbs_params_from_json(const json& j, bool thresholds_required) {
    CbsParams p;
    for (const char* key : {"lambda", "mu", "c", "e", "c_g", "c_w", "c_s"})
        if (!j.contains(key)) throw InvalidParams(std::string("missing CBS parameter ") + key);
    p.lambda = j.at("lambda").get<double>();
    p.mu = j.at("mu").get<double>();
    p.c = j.at("c").get<int>();
    p.e = j.at("e").get<int>();
    p.c_g = j.at("c_g").get<double>();
    p.c_w = j.at("c_w").get<double>();
    p.c_s = j.at("c_s").get<double>();
    if (thresholds_required && (!j.contains("n") || !j.contains("N")))
        throw InvalidParams("this command needs thresholds n and N in the params file");
    p.n = j.value("n", p.c);
    p.N = j.value("N", p.n + 1);
    return p;
}

TerminatedChain terminate_by_method(std::shared_ptr<const Ctmc> parent, const SubchainSpec& spec,
                                    const std::vector<double>& exact_external_fallback) {
    if (spec.method == "truncate") return truncate(parent, spec.members);
    if (spec.method == "single_input") return terminate_single_input(parent, spec.members);
    if (spec.method == "single_external") return terminate_single_external(parent, spec.members);
    if (spec.method == "general") {
        const std::vector<double>& weights =
            spec.external_pi ? *spec.external_pi : exact_external_fallback;
        return terminate_general(parent, spec.members, weights);
    }
    throw InvalidChain("unknown termination method '" + spec.method + "'");
}

namespace {

// Cut balance over the whole boundary (zero when the full solve is exact).
double global_flow_defect(const Ctmc& chain, const StationaryDistribution& pi,
                          const Subchain& sub) {
    std::vector<char> mask(chain.n_states(), 0);
    for (int m : sub.members) mask[m] = 1;
    CompensatedSum net;
    for (int k : sub.boundary) {
        for (const auto& [to, q] : chain.out(k))
            if (!mask[to]) net.add(pi.probs[k] * q);
        for (const auto& [from, q] : chain.in(k))
            if (!mask[from]) net.add(-pi.probs[from] * q);
    }
    return std::abs(net.value());
}

// Balance residual of a distribution at the listed states of a chain.
double balance_defect_at(const Ctmc& chain, const std::vector<double>& probs,
                         const std::vector<int>& states) {
    double defect = 0.0;
    for (int k : states) {
        CompensatedSum net;
        for (const auto& [to, q] : chain.out(k)) net.add(probs[k] * q);
        for (const auto& [from, q] : chain.in(k)) net.add(-probs[from] * q);
        defect = std::max(defect, std::abs(net.value()));
    }
    return defect;
}

}  // namespace

DecompositionRun run_decomposition(std::shared_ptr<const Ctmc> chain, const PlanSpec& plan,
                                   double tol) {
    auto full = solve_stationary(*chain);
    StateFunction f = parse_state_function(plan.f_spec, chain->n_states());

    DecompositionPlan dp;
    dp.full_state_count = chain->n_states();
    json subchain_reports = json::array();
    double max_defect = 0.0;

    auto add_side = [&](const std::vector<SubchainSpec>& specs, bool positive) {
        for (const auto& spec : specs) {
            auto term = terminate_by_method(chain, spec, full.probs);
            auto dist = solve_stationary(term.chain);
            double flow_defect = verify_partial_flow_conservation(*chain, full, term.sub);
            auto conservation = verify_conservation_of_distribution(full, term.sub, dist);
            json r;
            r["members"] = term.sub.members;
            r["boundary"] = term.sub.boundary;
            r["method"] = spec.method;
            r["sign"] = positive ? "+" : "-";
            r["partial_flow_defect"] = flow_defect;
            r["conservation_deviation"] = conservation.max_relative_deviation;
            r["boundary_deviation"] = conservation.boundary_relative_deviation;
            r["global_flow_defect"] = global_flow_defect(*chain, full, term.sub);
            r["boundary_balance_full"] =
                balance_defect_at(*chain, full.probs, term.sub.boundary);
            std::vector<int> local_boundary;
            for (int b : term.sub.boundary) local_boundary.push_back(term.sub.local_index(b));
            r["boundary_balance_terminated"] =
                balance_defect_at(term.chain, dist.probs, local_boundary);
            max_defect = std::max({max_defect, flow_defect,
                                   conservation.max_relative_deviation,
                                   r["global_flow_defect"].get<double>()});
            subchain_reports.push_back(std::move(r));
            (positive ? dp.positive : dp.negative)
                .push_back(PlanEntry{std::move(term.sub), std::move(dist)});
        }
    };
    add_side(plan.positive, true);
    add_side(plan.negative, false);

    auto coverage = validate_plan(dp);
    DecompositionRun run;
    run.coverage_ok = coverage.ok;
    json body;
    body["reference_state"] = plan.reference_state;
    body["coverage_ok"] = coverage.ok;
    if (!coverage.ok) {
        body["coverage_offenders"] = coverage.offenders;
        throw CoverageViolation("plan coverage violated at " +
                                std::to_string(coverage.offenders.size()) + " states");
    }

    auto betas = beta_from_plan(dp);
    auto agg = total_expectation(dp, f, plan.reference_state, betas);
    body["f"] = plan.f_spec;
    body["expectation"] = agg.expectation;
    body["pi_ref"] = agg.pi_ref;
    body["scaled_expectation"] = agg.scaled;
    body["pi_ref_direct"] = full.probs[plan.reference_state];
    json mu_values = json::array();
    for (const auto& e : dp.positive) {
        CompensatedSum acc;
        for (std::size_t i = 0; i < e.sub.members.size(); ++i)
            acc.add(f[e.sub.members[i]] * e.dist.probs[i]);
        mu_values.push_back(acc.value() / extended_pi(e, betas, plan.reference_state));
    }
    body["mu_positive"] = std::move(mu_values);
    body["subchains"] = std::move(subchain_reports);
    body["full_solve_residual"] = full.residual;
    body["max_defect"] = max_defect;
    body["tolerance"] = tol;
    run.within_tolerance = max_defect <= tol;
    body["pass"] = run.within_tolerance;
    run.report = std::move(body);
    return run;
}

json indicators_to_json(const CbsIndicators& ind) {
    json j;
    j["pi_ref"] = ind.pi_ref;
    j["p_b"] = ind.p_b;
    j["l_q"] = ind.l_q;
    j["switch_freq"] = ind.switch_freq;
    j["costs"] = {{"staffing", ind.costs.staffing},
                  {"waiting", ind.costs.waiting},
                  {"switching", ind.costs.switching},
                  {"total", ind.costs.total}};
    return j;
}

std::string format_csv(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

std::string surface_to_csv(const std::vector<SurfaceCell>& cells) {
    std::string out = "n,N,cost,feasible\n";
    for (const auto& cell : cells) {
        out += std::to_string(cell.n) + "," + std::to_string(cell.N) + ",";
        if (cell.feasible) out += format_csv(cell.cost);
        out += cell.feasible ? ",true\n" : ",false\n";
    }
    return out;
}

}  // namespace mcd::io
