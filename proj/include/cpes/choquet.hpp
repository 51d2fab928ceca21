// Lambda fuzzy measures and Choquet-integral aggregation.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpes {

struct ChoquetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Interaction index of the lambda fuzzy measure: the nonzero root of
///   prod(1 + lambda * w_i) = 1 + lambda.
/// Negative when the weights sum above one, zero at exactly one, positive
/// below one. Bisection to |f| <= 1e-12 on the bracketing interval.
inline double solve_lambda(const std::vector<double>& weights) {
    for (double w : weights)
        if (!(w > 0.0 && w < 1.0))
            throw ChoquetError("singleton weights must lie in (0,1), got " +
                               std::to_string(w));
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (std::abs(sum - 1.0) < 1e-12) return 0.0;

    auto f = [&](double lam) {
        double p = 1.0;
        for (double w : weights) p *= 1.0 + lam * w;
        return p - (1.0 + lam);
    };

    double lo, hi;
    if (sum > 1.0) {
        lo = -1.0 + 1e-12;
        hi = -1e-12;
    } else {
        lo = 1e-12;
        hi = 1.0;
        while (f(hi) < 0.0) {
            hi *= 2.0;
            if (hi > 1e12) throw ChoquetError("no positive lambda bracket found");
        }
    }
    double flo = f(lo);
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (std::abs(fm) <= 1e-12) return mid;
        if ((flo <= 0.0) == (fm <= 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

/// Fuzzy measure over all subsets of the criteria set, built from singleton
/// weights and the interaction index. Subsets are bitmasks over criterion
/// indices; supports n <= 20 materialized, larger sets evaluated on demand.
class FuzzyMeasureSet {
public:
    FuzzyMeasureSet() = default;

    FuzzyMeasureSet(std::vector<double> weights, double lam)
        : weights_(std::move(weights)), lambda_(lam) {
        n_ = static_cast<int>(weights_.size());
        if (n_ <= 20) {
            table_.resize(std::size_t{1} << n_);
            for (std::uint32_t mask = 0; mask < table_.size(); ++mask)
                table_[mask] = evaluate(mask);
        }
    }

    static FuzzyMeasureSet build(const std::vector<double>& weights) {
        return FuzzyMeasureSet(weights, solve_lambda(weights));
    }

    int criteria_count() const { return n_; }
    double lambda() const { return lambda_; }
    const std::vector<double>& singleton_weights() const { return weights_; }

    double measure(std::uint32_t subset_mask) const {
        if (!table_.empty()) return table_[subset_mask & full_mask()];
        return evaluate(subset_mask);
    }

    std::uint32_t full_mask() const {
        return n_ >= 32 ? 0xffffffffu : ((std::uint32_t{1} << n_) - 1);
    }

private:
    double evaluate(std::uint32_t mask) const {
        mask &= full_mask();
        if (mask == 0) return 0.0;
        if (mask == full_mask()) return 1.0;  // forced exact
        if (lambda_ == 0.0) {
            double s = 0.0;
            for (int i = 0; i < n_; ++i)
                if (mask >> i & 1) s += weights_[i];
            return s;
        }
        double p = 1.0;
        for (int i = 0; i < n_; ++i)
            if (mask >> i & 1) p *= 1.0 + lambda_ * weights_[i];
        return std::abs(p - 1.0) / std::abs(lambda_);
    }

    std::vector<double> weights_;
    double lambda_ = 0.0;
    int n_ = 0;
    std::vector<double> table_;
};

/// Choquet integral of a factor vector against a fuzzy measure.
/// Values are sorted ascending (ties broken by criterion index); each
/// increment is weighted by the measure of the set of criteria at or above it.
inline double choquet(const std::vector<double>& values, const FuzzyMeasureSet& fm) {
    const int n = fm.criteria_count();
    if (static_cast<int>(values.size()) != n)
        throw ChoquetError("factor vector length " + std::to_string(values.size()) +
                           " does not match criteria count " + std::to_string(n));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return values[a] < values[b]; });

    std::uint32_t above = fm.full_mask();
    double ci = 0.0;
    double prev = 0.0;
    for (int k = 0; k < n; ++k) {
        const int i = order[k];
        ci += (values[i] - prev) * fm.measure(above);
        prev = values[i];
        above &= ~(std::uint32_t{1} << i);
    }
    return ci;
}

}  // namespace cpes
