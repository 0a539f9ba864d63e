#include "mcd/ctmc.hpp"

#include <algorithm>
#include <cmath>

#include "mcd/numerics.hpp"

namespace mcd {

Ctmc::Ctmc(int n_states) : n_(n_states) {
    if (n_states <= 0) throw InvalidChain("chain must have at least one state");
    out_.resize(n_);
    in_.resize(n_);
}

bool Ctmc::add_rate(int from, int to, double rate) {
    if (from < 0 || from >= n_ || to < 0 || to >= n_)
        throw InvalidChain("transition endpoint out of range");
    if (!std::isfinite(rate) || rate < 0.0)
        throw InvalidChain("rates must be finite and nonnegative");
    if (rate == 0.0) return true;
    if (from == to) {
        ++dropped_self_;
        return false;
    }
    auto& row = out_[from];
    auto it = std::find_if(row.begin(), row.end(), [to](const auto& p) { return p.first == to; });
    if (it != row.end()) {
        it->second += rate;
        auto& col = in_[to];
        auto jt = std::find_if(col.begin(), col.end(),
                               [from](const auto& p) { return p.first == from; });
        jt->second += rate;
    } else {
        row.emplace_back(to, rate);
        in_[to].emplace_back(from, rate);
    }
    return true;
}

double Ctmc::rate(int from, int to) const {
    for (const auto& [t, q] : out_.at(from))
        if (t == to) return q;
    return 0.0;
}

double Ctmc::total_out_rate(int state) const {
    double s = 0.0;
    for (const auto& [t, q] : out_.at(state)) s += q;
    return s;
}

namespace {

// Reaches every state from 0 along the given adjacency?
bool covers_all(const std::vector<std::vector<std::pair<int, double>>>& adj, int n) {
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
        int k = stack.back();
        stack.pop_back();
        for (const auto& [m, q] : adj[k]) {
            (void)q;
            if (!seen[m]) {
                seen[m] = 1;
                ++count;
                stack.push_back(m);
            }
        }
    }
    return count == n;
}

}  // namespace

bool check_irreducible(const Ctmc& chain) {
    int n = chain.n_states();
    if (n == 1) return true;
    std::vector<std::vector<std::pair<int, double>>> out(n), in(n);
    chain.for_each_transition([&](int from, int to, double q) {
        out[from].emplace_back(to, q);
        in[to].emplace_back(from, q);
    });
    return covers_all(out, n) && covers_all(in, n);
}

StationaryDistribution solve_stationary(const Ctmc& chain, double residual_tol) {
    int n = chain.n_states();
    if (!check_irreducible(chain)) throw NonErgodic("chain is not irreducible");
    if (n == 1) return StationaryDistribution{{1.0}, 0.0};

    // GTH elimination: states n-1..1 are folded into the remaining ones.
    // Only additions, multiplications and divisions of nonnegative numbers
    // occur, so small stationary probabilities keep their relative accuracy
    // even when the chain is stiff.
    std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
    chain.for_each_transition([&](int from, int to, double q) { a[from][to] = q; });

    std::vector<double> elim_sum(n, 0.0);
    for (int k = n - 1; k >= 1; --k) {
        double s = 0.0;
        for (int j = 0; j < k; ++j) s += a[k][j];
        if (!(s > 0.0)) throw SingularSystem("elimination step lost all outflow");
        elim_sum[k] = s;
        for (int i = 0; i < k; ++i) {
            double f = a[i][k] / s;
            if (f == 0.0) continue;
            const double* row = a[k].data();
            double* dst = a[i].data();
            for (int j = 0; j < k; ++j) dst[j] += f * row[j];
            dst[i] = 0.0;
        }
    }

    std::vector<double> pi(n, 0.0);
    pi[0] = 1.0;
    double total = 1.0;
    for (int k = 1; k < n; ++k) {
        CompensatedSum flow;
        for (int i = 0; i < k; ++i) flow.add(pi[i] * a[i][k]);
        pi[k] = flow.value() / elim_sum[k];
        total += pi[k];
        if (!std::isfinite(pi[k])) throw SingularSystem("non-finite stationary component");
    }
    for (double& p : pi) p /= total;

    // Global balance defect with the original rates.
    double defect = 0.0;
    double scale = 1.0;
    for (int k = 0; k < n; ++k) {
        CompensatedSum net;
        for (const auto& [to, q] : chain.out(k)) net.add(pi[k] * q);
        for (const auto& [from, q] : chain.in(k)) net.add(-pi[from] * q);
        defect = std::max(defect, std::abs(net.value()));
        scale = std::max(scale, chain.total_out_rate(k));
    }
    if (defect > residual_tol * scale)
        throw SingularSystem("stationary solve residual " + std::to_string(defect) +
                             " exceeds tolerance");
    return StationaryDistribution{std::move(pi), defect};
}

double expectation(const StationaryDistribution& dist, const StateFunction& f) {
    if (dist.probs.size() != f.size())
        throw DimensionMismatch("state function length does not match distribution");
    CompensatedSum acc;
    for (std::size_t k = 0; k < f.size(); ++k) acc.add(f[k] * dist.probs[k]);
    return acc.value();
}

}  // namespace mcd
