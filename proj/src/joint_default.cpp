#include "cds/joint_default.hpp"

#include "cds/error.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cds {

namespace {

void check_probability(double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw OutOfRange(std::string(name) + " must lie in [0, 1], got " + std::to_string(p));
    }
}

void check_unit(double x, const char* name) {
    if (!(x >= -1.0 && x <= 1.0)) {
        throw OutOfRange(std::string(name) + " must lie in [-1, 1], got " + std::to_string(x));
    }
}

std::array<double, 8> cells_at(const PeriodMarginals& m, const DependenceSpec& spec) {
    return trivariate_cells(m, period_dependence(m, spec));
}

double min_cell(const std::array<double, 8>& cells) {
    return *std::min_element(cells.begin(), cells.end());
}

}  // namespace

PeriodMarginals::PeriodMarginals(double p_a, double p_b, double p_c) : p_{p_a, p_b, p_c} {
    check_probability(p_a, "p_A");
    check_probability(p_b, "p_B");
    check_probability(p_c, "p_C");
    for (int j = 0; j < 3; ++j) q_[j] = 1.0 - p_[j];
}

void DependenceSpec::validate() const {
    check_unit(rho_ab, "rho_AB");
    check_unit(rho_ac, "rho_AC");
    check_unit(rho_bc, "rho_BC");
    check_unit(zeta_abc, "zeta_ABC");
}

std::string to_string(DependenceAxis axis) {
    switch (axis) {
        case DependenceAxis::rho_ab: return "rho_AB";
        case DependenceAxis::rho_ac: return "rho_AC";
        case DependenceAxis::rho_bc: return "rho_BC";
        case DependenceAxis::zeta_abc: return "zeta_ABC";
    }
    return "?";
}

DependenceAxis dependence_axis_from_string(const std::string& name) {
    for (auto axis : kAllAxes) {
        if (to_string(axis) == name) return axis;
    }
    std::string lower = name;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "rho_ab" || lower == "cor_ab") return DependenceAxis::rho_ab;
    if (lower == "rho_ac" || lower == "cor_ac") return DependenceAxis::rho_ac;
    if (lower == "rho_bc" || lower == "cor_bc") return DependenceAxis::rho_bc;
    if (lower == "zeta_abc" || lower == "com_abc") return DependenceAxis::zeta_abc;
    throw OutOfRange("unknown dependence axis '" + name + "'");
}

double get(const DependenceSpec& spec, DependenceAxis axis) {
    switch (axis) {
        case DependenceAxis::rho_ab: return spec.rho_ab;
        case DependenceAxis::rho_ac: return spec.rho_ac;
        case DependenceAxis::rho_bc: return spec.rho_bc;
        case DependenceAxis::zeta_abc: return spec.zeta_abc;
    }
    return 0.0;
}

DependenceSpec with(DependenceSpec spec, DependenceAxis axis, double value) {
    switch (axis) {
        case DependenceAxis::rho_ab: spec.rho_ab = value; break;
        case DependenceAxis::rho_ac: spec.rho_ac = value; break;
        case DependenceAxis::rho_bc: spec.rho_bc = value; break;
        case DependenceAxis::zeta_abc: spec.zeta_abc = value; break;
    }
    return spec;
}

std::string TrivariateDistribution::label(int index) {
    return "p" + std::to_string(index & 1) + std::to_string((index >> 1) & 1) +
           std::to_string((index >> 2) & 1);
}

double covariance_from_correlation(double p_i, double p_j, double rho_ij) {
    check_probability(p_i, "p_i");
    check_probability(p_j, "p_j");
    check_unit(rho_ij, "rho");
    return rho_ij * std::sqrt(p_i * (1.0 - p_i) * p_j * (1.0 - p_j));
}

double third_absolute_central_moment(double p) {
    const double q = 1.0 - p;
    return p * q * (p * p + q * q);
}

double comvariance_from_comrelation(const PeriodMarginals& m, double zeta) {
    check_unit(zeta, "zeta");
    const double scale = std::cbrt(third_absolute_central_moment(m.p_a()) *
                                   third_absolute_central_moment(m.p_b()) *
                                   third_absolute_central_moment(m.p_c()));
    return zeta * scale;
}

PeriodDependence period_dependence(const PeriodMarginals& m, const DependenceSpec& spec) {
    spec.validate();
    return PeriodDependence{
        .sigma_ab = covariance_from_correlation(m.p_a(), m.p_b(), spec.rho_ab),
        .sigma_ac = covariance_from_correlation(m.p_a(), m.p_c(), spec.rho_ac),
        .sigma_bc = covariance_from_correlation(m.p_b(), m.p_c(), spec.rho_bc),
        .theta_abc = comvariance_from_comrelation(m, spec.zeta_abc),
    };
}

std::array<double, 8> trivariate_cells(const PeriodMarginals& m, const PeriodDependence& d) {
    const double pa = m.p_a(), pb = m.p_b(), pc = m.p_c();
    const double qa = m.q_a(), qb = m.q_b(), qc = m.q_c();
    const double sab = d.sigma_ab, sac = d.sigma_ac, sbc = d.sigma_bc, th = d.theta_abc;

    std::array<double, 8> c{};
    c[0b000] = pa * pb * pc + pc * sab + pb * sac + pa * sbc - th;  // p000
    c[0b001] = qa * pb * pc - pc * sab - pb * sac + qa * sbc + th;  // p100
    c[0b010] = pa * qb * pc - pc * sab + qb * sac - pa * sbc + th;  // p010
    c[0b100] = pa * pb * qc + qc * sab - pb * sac - pa * sbc + th;  // p001
    c[0b011] = qa * qb * pc + pc * sab - qb * sac - qa * sbc - th;  // p110
    c[0b101] = qa * pb * qc - qc * sab + pb * sac - qa * sbc - th;  // p101
    c[0b110] = pa * qb * qc - qc * sab - qb * sac + pa * sbc - th;  // p011
    c[0b111] = qa * qb * qc + qc * sab + qb * sac + qa * sbc + th;  // p111
    return c;
}

bool cells_admissible(const std::array<double, 8>& cells) {
    return std::all_of(cells.begin(), cells.end(),
                       [](double c) { return c >= -kCellTolerance && c <= 1.0 + kCellTolerance; });
}

TrivariateDistribution trivariate_joint(const PeriodMarginals& m, const PeriodDependence& d) {
    const auto cells = trivariate_cells(m, d);
    if (!cells_admissible(cells)) {
        std::ostringstream msg;
        msg << "inadmissible joint default distribution:";
        for (int k = 0; k < 8; ++k) {
            if (cells[k] < -kCellTolerance || cells[k] > 1.0 + kCellTolerance) {
                msg << ' ' << TrivariateDistribution::label(k) << '=' << cells[k];
            }
        }
        throw AdmissibilityError(msg.str());
    }
    return TrivariateDistribution{cells};
}

std::vector<double> nvariate_joint(std::span<const double> survival,
                                   std::span<const double> central_moments) {
    const std::size_t n = survival.size();
    if (n == 0 || n > 30) throw DimensionMismatch("nvariate_joint needs 1..30 variables");
    const std::size_t size = std::size_t{1} << n;
    if (central_moments.size() != size) {
        throw DimensionMismatch("moment vector has " + std::to_string(central_moments.size()) +
                                " entries, expected 2^" + std::to_string(n) + " = " + std::to_string(size));
    }
    for (double p : survival) check_probability(p, "survival");
    if (std::abs(central_moments[0] - 1.0) > kProbabilityTolerance) {
        throw OutOfRange("central moment vector must start with E[1] = 1");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(central_moments[std::size_t{1} << i]) > kProbabilityTolerance) {
            throw OutOfRange("first central moment of variable " + std::to_string(i + 1) + " must be 0");
        }
    }

    // Apply [[p_i, -1], [q_i, 1]] along bit i; the Kronecker factors commute as mode products.
    std::vector<double> v(central_moments.begin(), central_moments.end());
    for (std::size_t i = 0; i < n; ++i) {
        const double p = survival[i];
        const double q = 1.0 - p;
        const std::size_t bit = std::size_t{1} << i;
        for (std::size_t k = 0; k < size; ++k) {
            if (k & bit) continue;
            const double s0 = v[k];
            const double s1 = v[k | bit];
            v[k] = p * s0 - s1;
            v[k | bit] = q * s0 + s1;
        }
    }
    for (std::size_t k = 0; k < size; ++k) {
        if (v[k] < -kCellTolerance || v[k] > 1.0 + kCellTolerance) {
            throw AdmissibilityError("inadmissible n-variate cell " + std::to_string(k) + " = " +
                                     std::to_string(v[k]));
        }
    }
    return v;
}

double sample_comrelation(std::span<const std::vector<double>> series) {
    const std::size_t k = series.size();
    if (k < 2) throw DimensionMismatch("comrelation needs at least 2 series");
    const std::size_t n = series.front().size();
    if (n < 2) throw DimensionMismatch("comrelation needs at least 2 observations");
    for (const auto& s : series) {
        if (s.size() != n) throw DimensionMismatch("series lengths differ");
    }

    std::vector<std::vector<double>> dev(k, std::vector<double>(n));
    double denominator = 1.0;
    for (std::size_t j = 0; j < k; ++j) {
        double mean = 0.0;
        for (double x : series[j]) mean += x;
        mean /= static_cast<double>(n);
        double abs_moment = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            dev[j][i] = series[j][i] - mean;
            abs_moment += std::pow(std::abs(dev[j][i]), static_cast<double>(k));
        }
        if (abs_moment == 0.0) {
            throw DegenerateSeries("series " + std::to_string(j) + " has zero absolute central moment");
        }
        denominator *= std::pow(abs_moment, 1.0 / static_cast<double>(k));
    }
    double numerator = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double prod = 1.0;
        for (std::size_t j = 0; j < k; ++j) prod *= dev[j][i];
        numerator += prod;
    }
    return std::clamp(numerator / denominator, -1.0, 1.0);
}

std::string AdmissibilityReport::describe() const {
    std::ostringstream out;
    out << (admissible ? "admissible" : "inadmissible");
    if (!violating_cells.empty()) {
        out << " (violating:";
        for (const auto& c : violating_cells) out << ' ' << c;
        out << ')';
    }
    for (auto axis : kAllAxes) {
        const auto& iv = axes[static_cast<int>(axis)];
        out << "; " << to_string(axis) << ' ';
        if (iv.empty) {
            out << "empty";
        } else {
            out << '[' << iv.lo << ", " << iv.hi << ']';
        }
    }
    return out.str();
}

AdmissibilityReport admissibility_region(const PeriodMarginals& m, const DependenceSpec& spec) {
    spec.validate();
    AdmissibilityReport report;
    report.cells = cells_at(m, spec);
    report.admissible = cells_admissible(report.cells);
    for (int k = 0; k < 8; ++k) {
        const double c = report.cells[k];
        if (c < -kCellTolerance || c > 1.0 + kCellTolerance) {
            report.violating_cells.push_back(TrivariateDistribution::label(k));
        }
    }

    const auto slack = [&](DependenceAxis axis, double x) {
        return min_cell(cells_at(m, with(spec, axis, x))) + kCellTolerance;
    };
    const auto close_enough = [](double a, double b) {
        return std::abs(b - a) <= kAdmissibilityBisectionTolerance;
    };

    for (auto axis : kAllAxes) {
        const auto f = [&](double x) { return slack(axis, x); };
        FeasibleInterval iv;
        double start = get(spec, axis);
        if (f(start) < 0.0) {
            // Locate any feasible point on a grid before bisecting outward.
            bool found = false;
            for (int i = 0; i <= 400 && !found; ++i) {
                const double x = -1.0 + 2.0 * i / 400.0;
                if (f(x) >= 0.0) {
                    start = x;
                    found = true;
                }
            }
            if (!found) {
                report.axes[static_cast<int>(axis)] = iv;
                continue;
            }
        }
        iv.empty = false;
        if (f(1.0) >= 0.0) {
            iv.hi = 1.0;
        } else {
            iv.hi = boost::math::tools::bisect(f, start, 1.0, close_enough).first;
        }
        if (f(-1.0) >= 0.0) {
            iv.lo = -1.0;
        } else {
            iv.lo = boost::math::tools::bisect(f, -1.0, start, close_enough).second;
        }
        report.axes[static_cast<int>(axis)] = iv;
    }
    return report;
}

FeasibleInterval exact_feasible_interval(const PeriodMarginals& m, const DependenceSpec& spec,
                                         DependenceAxis axis) {
    const auto c0 = cells_at(m, with(spec, axis, 0.0));
    const auto c1 = cells_at(m, with(spec, axis, 1.0));
    double lo = -1.0;
    double hi = 1.0;
    for (int k = 0; k < 8; ++k) {
        const double a = c0[k];
        const double b = c1[k] - c0[k];  // cell(x) = a + b x
        if (b > 0.0) {
            lo = std::max(lo, (-kCellTolerance - a) / b);
        } else if (b < 0.0) {
            hi = std::min(hi, (-kCellTolerance - a) / b);
        } else if (a < -kCellTolerance) {
            return {};
        }
    }
    if (lo > hi) return {};
    return FeasibleInterval{.empty = false, .lo = lo, .hi = hi};
}

}  // namespace cds
