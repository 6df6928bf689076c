#pragma once

// Brute-force references the library is checked against. None of them call
// the closed-form code paths they verify.

#include "cds/joint_default.hpp"
#include "cds/market_data.hpp"
#include "cds/pricer.hpp"
#include "cds/schedule.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

namespace cds::oracle {

inline int bit(int cell, int party) { return (cell >> party) & 1; }

/// Joint law of three default indicators solved from its moments: the eight
/// equations E[prod_{i in S} (Y_i - q_i)] for every subset S of {A, B, C}.
inline std::array<double, 8> moment_matched_cells(const PeriodMarginals& m, const PeriodDependence& d) {
    Eigen::Matrix<double, 8, 8> design;
    Eigen::Matrix<double, 8, 1> moments;
    for (int subset = 0; subset < 8; ++subset) {
        for (int cell = 0; cell < 8; ++cell) {
            double prod = 1.0;
            for (int party = 0; party < 3; ++party) {
                if (bit(subset, party)) prod *= bit(cell, party) - m.q(party);
            }
            design(subset, cell) = prod;
        }
    }
    moments << 1.0, 0.0, 0.0, d.sigma_ab, 0.0, d.sigma_ac, d.sigma_bc, d.theta_abc;
    const Eigen::Matrix<double, 8, 1> cells = design.fullPivLu().solve(moments);
    std::array<double, 8> out{};
    for (int k = 0; k < 8; ++k) out[k] = cells(k);
    return out;
}

/// Period factors as an expectation over the eight default states: the
/// premium leg survives only while C survives, each counterparty default
/// state paying its recovery coefficient, and the protection leg pays in the
/// states where C defaults.
inline RiskyPeriodFactors enumerate_factors(const std::array<double, 8>& p, const RecoverySpec& r, double disc) {
    // Coefficients by (Y_A, Y_B): neither, A only, B only, both.
    const std::array<double, 4> when_negative{1.0, r.phi_a, r.phi_bar_a, r.phi_ab};
    const std::array<double, 4> when_positive{1.0, r.phi_bar_b, r.phi_b, r.phi_ab};
    RiskyPeriodFactors f;
    f.discount = disc;
    for (int cell = 0; cell < 8; ++cell) {
        const int ab = bit(cell, 0) + 2 * bit(cell, 1);
        if (bit(cell, 2) == 0) {
            f.phi_a += p[cell] * when_negative[ab];
            f.phi_b += p[cell] * when_positive[ab];
        } else {
            f.omega += p[cell] * when_positive[ab];
        }
    }
    f.phi_a *= disc;
    f.phi_b *= disc;
    f.omega *= disc;
    return f;
}

/// Counterparty-free value by a plain double loop over premium dates with a
/// deterministic survival term structure, half-period accrual on default.
inline double direct_riskfree_value(const std::vector<double>& survival, const Curve& discount_curve,
                                    const Schedule& schedule, double spread, double notional, double phi_c) {
    double value = 0.0;
    for (std::size_t i = 1; i < schedule.times.size(); ++i) {
        const double bond = std::exp(-discount_curve.value_at(schedule.times[i]) * schedule.times[i]);
        const double delta = schedule.times[i] - schedule.times[i - 1];
        const double defaulted = survival[i - 1] - survival[i];
        value += bond * (defaulted * (notional * (1.0 - phi_c) - 0.5 * spread * notional * delta) -
                         survival[i] * spread * notional * delta);
    }
    return value;
}

/// Fully collateralized value with deterministic marginals: the contract is
/// marked to market each date, so the only loss is C defaulting inside a
/// period in which both counterparties survive. Conditioning on that event
/// reprices C's default probability.
inline double collateralized_value_deterministic(const std::vector<PeriodMarginals>& marginals,
                                                 const DependenceSpec& spec, const std::vector<double>& discount,
                                                 const Schedule& schedule, double spread, double notional,
                                                 double phi_c) {
    double w = 0.0;
    for (std::size_t j = marginals.size(); j-- > 0;) {
        const auto d = period_dependence(marginals[j], spec);
        const auto cells = moment_matched_cells(marginals[j], d);
        const double both_survive = cells[0] + cells[4];
        const double q_c = cells[4] / both_survive;
        const double delta = schedule.accrual(j);
        const double x = -spread * notional * delta;
        const double r = notional * (1.0 - phi_c) - 0.5 * spread * notional * delta;
        w = discount[j] * ((1.0 - q_c) * (w + x) + q_c * r);
    }
    return w;
}

/// Marginals drawn uniformly, then each dependence parameter in random order
/// drawn uniformly within its exact admissible interval given the others.
struct AdmissibleDraw {
    PeriodMarginals marginals{1.0, 1.0, 1.0};
    DependenceSpec spec;
};

inline AdmissibleDraw draw_admissible(std::mt19937_64& rng, double p_lo = 0.01, double p_hi = 0.999) {
    std::uniform_real_distribution<double> up(p_lo, p_hi);
    const double p_a = up(rng), p_b = up(rng), p_c = up(rng);
    AdmissibleDraw out{PeriodMarginals(p_a, p_b, p_c), {}};
    std::array<DependenceAxis, 4> order = kAllAxes;
    std::shuffle(order.begin(), order.end(), rng);
    for (const auto axis : order) {
        const auto iv = exact_feasible_interval(out.marginals, out.spec, axis);
        if (iv.empty) continue;
        std::uniform_real_distribution<double> u(iv.lo, iv.hi);
        out.spec = with(out.spec, axis, u(rng));
    }
    return out;
}

}  // namespace cds::oracle
