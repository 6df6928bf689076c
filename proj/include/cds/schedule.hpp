#pragma once

#include <cstddef>
#include <vector>

namespace cds {

/// Payment grid T_0 < T_1 < ... < T_m in year fractions from the valuation date.
struct Schedule {
    std::vector<double> times;

    std::size_t periods() const { return times.empty() ? 0 : times.size() - 1; }
    /// delta(T_j, T_{j+1})
    double accrual(std::size_t j) const { return times[j + 1] - times[j]; }

    /// Throws InvalidContract unless there is at least one period and the
    /// dates are strictly increasing from a non-negative start.
    void validate() const;
};

/// Regular schedule rolled back from maturity; a short front stub absorbs any
/// remainder. frequency = payments per year.
Schedule make_schedule(double start, double maturity, int frequency);

}  // namespace cds
