#include "cds/schedule.hpp"

#include "cds/error.hpp"

#include <cmath>
#include <string>

namespace cds {

void Schedule::validate() const {
    if (times.size() < 2) throw InvalidContract("schedule needs at least one period");
    if (!(times.front() >= 0.0)) throw InvalidContract("schedule must start at or after the valuation date");
    for (std::size_t j = 1; j < times.size(); ++j) {
        if (!(times[j] > times[j - 1])) {
            throw InvalidContract("schedule dates must be strictly increasing (index " + std::to_string(j) + ")");
        }
    }
}

Schedule make_schedule(double start, double maturity, int frequency) {
    if (frequency <= 0) throw InvalidContract("payment frequency must be positive");
    if (!(maturity > start) || start < 0.0) throw InvalidContract("maturity must follow a non-negative start");
    const double step = 1.0 / frequency;
    const auto m = static_cast<std::size_t>(std::max(1.0, std::ceil((maturity - start) * frequency - 1e-9)));
    Schedule s;
    s.times.resize(m + 1);
    s.times[0] = start;
    for (std::size_t i = 1; i < m; ++i) s.times[i] = maturity - static_cast<double>(m - i) * step;
    s.times[m] = maturity;
    s.validate();
    return s;
}

}  // namespace cds
