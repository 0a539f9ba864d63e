#pragma once

#include <cmath>
#include <cstddef>

namespace mcd {

// Neumaier-compensated accumulator. Scaled reciprocals of extended
// probabilities span many orders of magnitude, so signed sums of them are
// accumulated with a carry term.
class CompensatedSum {
  public:
    void add(double x) {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            carry_ += (sum_ - t) + x;
        } else {
            carry_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + carry_; }

  private:
    double sum_ = 0.0;
    double carry_ = 0.0;
};

// 1 - w^m to full relative precision for any w > 0 (pow loses all digits
// once w^m lands next to 1).
inline double one_minus_pow(double w, long long m) {
    if (m == 0) return 0.0;
    double t = (std::abs(w - 1.0) < 0.5) ? std::log1p(w - 1.0) : std::log(w);
    return -std::expm1(static_cast<double>(m) * t);
}

// sum_{t=0}^{m-1} w^t.  Exact limit m at w == 1.
inline double geom_sum(long long m, double w) {
    if (m <= 0) return 0.0;
    if (w == 1.0) return static_cast<double>(m);
    return one_minus_pow(w, m) / (1.0 - w);
}

// sum_{t=0}^{m-1} t*w^t.  The closed form cancels near w = 1, so the sum is
// evaluated term by term there (all terms nonnegative).
inline double geom_weighted_sum(long long m, double w) {
    if (m <= 1) return 0.0;
    if (std::abs(1.0 - w) < 1e-3) {
        double acc = 0.0;
        double p = w;
        for (long long t = 1; t < m; ++t) {
            acc += static_cast<double>(t) * p;
            p *= w;
        }
        return acc;
    }
    double wm1 = std::pow(w, static_cast<double>(m - 1));
    double num = 1.0 - static_cast<double>(m) * wm1 + static_cast<double>(m - 1) * wm1 * w;
    return w * num / ((1.0 - w) * (1.0 - w));
}

// Pr{X <= s} / Pr{X = s} for X ~ Poisson(a), via the backward ratio sum
// sum_{i=0}^{s} s!/(i! a^{s-i}); no factorials are formed.
inline double poisson_cdf_ratio(int s, double a) {
    double term = 1.0;
    double total = 1.0;
    for (int m = 1; m <= s; ++m) {
        term *= static_cast<double>(s - m + 1) / a;
        total += term;
    }
    return total;
}

}  // namespace mcd
