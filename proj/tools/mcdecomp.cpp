#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mcd/aggregate.hpp"
#include "mcd/cbs.hpp"
#include "mcd/ctmc.hpp"
#include "mcd/io.hpp"
#include "mcd/queueing.hpp"

using nlohmann::json;

namespace {

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open input file " + path);
    json j;
    in >> j;
    return j;
}

void emit(const std::string& text, const std::string& output_path) {
    if (output_path.empty()) {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << '\n';
        return;
    }
    std::ofstream out(output_path);
    if (!out) throw std::runtime_error("cannot open output file " + output_path);
    out << text;
}

std::pair<int, int> parse_range(const std::string& text) {
    auto colon = text.find(':');
    if (colon == std::string::npos) throw mcd::InvalidParams("range must look like a:b");
    return {std::stoi(text.substr(0, colon)), std::stoi(text.substr(colon + 1))};
}

int surface_threads() {
    const char* env = std::getenv("MCDECOMP_THREADS");
    if (!env) return 0;
    int t = std::atoi(env);
    return t < 0 ? 0 : t;
}

std::shared_ptr<const mcd::Ctmc> load_chain(const std::string& path) {
    auto chain = std::make_shared<mcd::Ctmc>(mcd::io::chain_from_json(load_json(path)));
    if (chain->self_loops_dropped() > 0)
        std::cerr << "warning: dropped " << chain->self_loops_dropped()
                  << " self-transition(s); they never affect balance\n";
    return chain;
}

struct Options {
    std::string input, plan, output, format = "json";
    double tol = 1e-8;
    double tail_eps = 1e-12;
    std::string n_range, N_range;
    std::string model;
    double lambda = 1.0, mu = 1.0, alpha = 1.0, restart = 0.0;
    int s = 1, c = 1, k = 1, sources = 1;
};

int cmd_solve(const Options& opt) {
    auto chain = load_chain(opt.input);
    auto pi = mcd::solve_stationary(*chain, std::min(opt.tol, 1e-8));
    json out;
    out["n_states"] = chain->n_states();
    out["pi"] = pi.probs;
    out["residual"] = pi.residual;
    if (!chain->labels.empty()) {
        json labels;
        for (const auto& [kk, name] : chain->labels) labels[std::to_string(kk)] = name;
        out["labels"] = std::move(labels);
    }
    emit(out.dump(2), opt.output);
    return 0;
}

int cmd_decompose(const Options& opt, bool verify_mode) {
    auto chain = load_chain(opt.input);
    auto plan = mcd::io::plan_from_json(load_json(opt.plan));
    auto run = mcd::io::run_decomposition(chain, plan, opt.tol);
    emit(run.report.dump(2), opt.output);
    if (verify_mode && !run.within_tolerance) return 5;
    return 0;
}

int cmd_queue(const Options& opt) {
    mcd::BirthDeathSpec spec;
    int servers = 1;
    if (opt.model == "mm1k") {
        spec = mcd::mm1k(opt.lambda, opt.mu, opt.k);
    } else if (opt.model == "mmsk") {
        spec = mcd::mmsk(opt.lambda, opt.mu, opt.s, opt.k);
        servers = opt.s;
    } else if (opt.model == "mmcc") {
        spec = mcd::mmcc(opt.lambda, opt.mu, opt.c);
        servers = opt.c;
    } else if (opt.model == "engset") {
        spec = mcd::engset(opt.sources, opt.lambda, opt.mu, opt.k);
        servers = opt.k;
    } else if (opt.model == "discouraged") {
        spec = mcd::discouraged(opt.alpha, opt.mu, opt.k);
    } else if (opt.model == "mm1-restart") {
        spec = mcd::mm1_restart(opt.lambda, opt.mu, opt.k, opt.restart);
    } else {
        throw mcd::InvalidSpec("unknown queue model '" + opt.model + "'");
    }
    auto ind = mcd::birth_death_indicators(spec, servers);
    json out;
    out["model"] = opt.model;
    out["servers"] = servers;
    out["p_block"] = ind.p_block;
    out["p_q"] = ind.p_q;
    out["l_q"] = ind.l_q;
    out["l"] = ind.l;
    emit(out.dump(2), opt.output);
    return 0;
}

int cmd_cbs_cost(const Options& opt) {
    auto params = mcd::io::cbs_params_from_json(load_json(opt.input), true);
    auto ind = mcd::indicators_closed_form(params);
    json out = mcd::io::indicators_to_json(ind);
    out["n"] = params.n;
    out["N"] = params.N;
    emit(out.dump(2), opt.output);
    return 0;
}

int cmd_cbs_surface(const Options& opt) {
    auto params = mcd::io::cbs_params_from_json(load_json(opt.input), false);
    auto [n_lo, n_hi] = parse_range(opt.n_range);
    auto [N_lo, N_hi] = parse_range(opt.N_range);
    auto cells = mcd::cost_surface(params, n_lo, n_hi, N_lo, N_hi, surface_threads());
    emit(mcd::io::surface_to_csv(cells), opt.output);
    return 0;
}

int cmd_cbs_optimize(const Options& opt) {
    auto params = mcd::io::cbs_params_from_json(load_json(opt.input), false);
    auto [n_lo, n_hi] = parse_range(opt.n_range);
    auto [N_lo, N_hi] = parse_range(opt.N_range);
    auto best = mcd::optimize(params, n_lo, n_hi, N_lo, N_hi);
    std::string line = "n=" + std::to_string(best.n) + " N=" + std::to_string(best.N) +
                       " cost=" + mcd::io::format_csv(best.cost);
    std::cout << line << '\n';
    if (!opt.output.empty()) {
        json out;
        out["n"] = best.n;
        out["N"] = best.N;
        out["cost"] = best.cost;
        emit(out.dump(2), opt.output);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exact Markov-chain decomposition toolkit"};
    app.require_subcommand(1);
    Options opt;

    auto add_io = [&](CLI::App* cmd, bool need_input) {
        auto* in = cmd->add_option("--input", opt.input, "input file");
        if (need_input) in->required();
        cmd->add_option("--output", opt.output, "output file (default: stdout)");
        cmd->add_option("--format", opt.format, "json|csv")
            ->check(CLI::IsMember({"json", "csv"}));
        cmd->add_option("--tol", opt.tol, "verification tolerance");
    };

    auto* solve = app.add_subcommand("solve", "stationary distribution of a chain file");
    add_io(solve, true);

    auto* decompose = app.add_subcommand("decompose", "run a decomposition plan with checks");
    add_io(decompose, true);
    decompose->add_option("--plan", opt.plan, "plan file")->required();

    auto* verify = app.add_subcommand("verify", "run only the conservation checks of a plan");
    add_io(verify, true);
    verify->add_option("--plan", opt.plan, "plan file")->required();

    auto* queue = app.add_subcommand("queue", "closed-form/oracle indicators for a named model");
    add_io(queue, false);
    queue->add_option("--model", opt.model, "mm1k|mmsk|mmcc|engset|discouraged|mm1-restart")
        ->required();
    queue->add_option("--lambda", opt.lambda, "arrival rate");
    queue->add_option("--mu", opt.mu, "service rate");
    queue->add_option("--alpha", opt.alpha, "discouraged-arrival numerator");
    queue->add_option("--s", opt.s, "servers");
    queue->add_option("--c", opt.c, "servers (loss system)");
    queue->add_option("--k", opt.k, "capacity");
    queue->add_option("--M", opt.sources, "finite-source population");
    queue->add_option("--r", opt.restart, "restart rate");

    auto* cost = app.add_subcommand("cbs-cost", "indicators and costs at fixed (n,N)");
    add_io(cost, true);
    cost->add_option("--tail-eps", opt.tail_eps, "oracle tail mass bound");

    auto* surface = app.add_subcommand("cbs-surface", "cost grid over (n,N) ranges as CSV");
    add_io(surface, true);
    surface->add_option("--n-range", opt.n_range, "a:b inclusive")->required();
    surface->add_option("--N-range", opt.N_range, "a:b inclusive")->required();

    auto* optimize = app.add_subcommand("cbs-optimize", "argmin of the cost over (n,N) ranges");
    add_io(optimize, true);
    optimize->add_option("--n-range", opt.n_range, "a:b inclusive")->required();
    optimize->add_option("--N-range", opt.N_range, "a:b inclusive")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) return cmd_solve(opt);
        if (decompose->parsed()) return cmd_decompose(opt, false);
        if (verify->parsed()) return cmd_decompose(opt, true);
        if (queue->parsed()) return cmd_queue(opt);
        if (cost->parsed()) return cmd_cbs_cost(opt);
        if (surface->parsed()) return cmd_cbs_surface(opt);
        if (optimize->parsed()) return cmd_cbs_optimize(opt);
    } catch (const mcd::NonErgodic& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const mcd::CoverageViolation& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const mcd::ErgodicityLost& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
