#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

namespace cds {

/// Sum-to-one and marginalization tolerance.
inline constexpr double kProbabilityTolerance = 1e-12;
/// Cells may dip this far below zero from rounding and still count as admissible.
inline constexpr double kCellTolerance = 1e-14;
/// Resolution of the admissibility bisection.
inline constexpr double kAdmissibilityBisectionTolerance = 1e-6;

/// Survival probabilities of buyer A, seller B and reference C over one period.
/// Default probabilities are q = 1 - p.
class PeriodMarginals {
public:
    PeriodMarginals(double p_a, double p_b, double p_c);

    double p(int party) const { return p_[party]; }
    double q(int party) const { return q_[party]; }

    double p_a() const { return p_[0]; }
    double p_b() const { return p_[1]; }
    double p_c() const { return p_[2]; }
    double q_a() const { return q_[0]; }
    double q_b() const { return q_[1]; }
    double q_c() const { return q_[2]; }

private:
    std::array<double, 3> p_;
    std::array<double, 3> q_;
};

/// Scale-free dependence: pairwise default-indicator correlations and the
/// three-way comrelation. Each must lie in [-1, 1].
struct DependenceSpec {
    double rho_ab = 0.0;
    double rho_ac = 0.0;
    double rho_bc = 0.0;
    double zeta_abc = 0.0;

    /// Throws OutOfRange if any parameter is outside [-1, 1].
    void validate() const;
    bool independent() const { return rho_ab == 0.0 && rho_ac == 0.0 && rho_bc == 0.0 && zeta_abc == 0.0; }
};

enum class DependenceAxis { rho_ab = 0, rho_ac = 1, rho_bc = 2, zeta_abc = 3 };

inline constexpr std::array<DependenceAxis, 4> kAllAxes = {
    DependenceAxis::rho_ab, DependenceAxis::rho_ac, DependenceAxis::rho_bc, DependenceAxis::zeta_abc};

std::string to_string(DependenceAxis axis);
DependenceAxis dependence_axis_from_string(const std::string& name);
double get(const DependenceSpec& spec, DependenceAxis axis);
DependenceSpec with(DependenceSpec spec, DependenceAxis axis, double value);

/// Per-period moments of the default indicators.
struct PeriodDependence {
    double sigma_ab = 0.0;
    double sigma_ac = 0.0;
    double sigma_bc = 0.0;
    double theta_abc = 0.0;  // comvariance E[(Y_A-q_A)(Y_B-q_B)(Y_C-q_C)]
};

/// Joint probabilities indexed by default indicators (Y_A, Y_B, Y_C).
/// Storage follows the Kronecker layout: index = Y_A + 2 Y_B + 4 Y_C.
struct TrivariateDistribution {
    std::array<double, 8> cells{};

    double operator()(int y_a, int y_b, int y_c) const { return cells[y_a + 2 * y_b + 4 * y_c]; }
    static std::string label(int index);  // "p{Y_A}{Y_B}{Y_C}", e.g. "p011"
};

/// sigma_ij = rho_ij sqrt(p_i q_i p_j q_j). Throws OutOfRange.
double covariance_from_correlation(double p_i, double p_j, double rho_ij);

/// E|Y - q|^3 = p q (p^2 + q^2) for a Bernoulli indicator with survival p.
double third_absolute_central_moment(double p);

/// theta = zeta cbrt(prod_j p_j q_j (p_j^2 + q_j^2)). Throws OutOfRange.
double comvariance_from_comrelation(const PeriodMarginals& m, double zeta);

PeriodDependence period_dependence(const PeriodMarginals& m, const DependenceSpec& spec);

/// Evaluates the eight closed-form cells without any admissibility check.
std::array<double, 8> trivariate_cells(const PeriodMarginals& m, const PeriodDependence& d);

/// Checked construction; throws AdmissibilityError naming every cell outside [0, 1].
TrivariateDistribution trivariate_joint(const PeriodMarginals& m, const PeriodDependence& d);

/// n-variate Bernoulli law from survival probabilities and the vector of
/// central cross moments sigma_k = E[prod_i (Y_i - q_i)^{k_i}], where bit i-1
/// of k (0-based) is k_i. sigma_0 must be 1 and every single-index entry 0.
/// Returns probabilities in the same layout. Throws DimensionMismatch,
/// OutOfRange (bad moment vector) or AdmissibilityError.
std::vector<double> nvariate_joint(std::span<const double> survival,
                                   std::span<const double> central_moments);

/// Sample comrelation of k >= 2 aligned series:
/// sum_i prod_j d_ji / prod_j (sum_i |d_ji|^k)^(1/k) with d = x - mean.
/// For k = 2 this is the Pearson correlation. The result is clamped to
/// [-1, 1] to absorb rounding at the equality cases. Throws DimensionMismatch and
/// DegenerateSeries (constant series).
double sample_comrelation(std::span<const std::vector<double>> series);

struct FeasibleInterval {
    bool empty = true;
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double x) const { return !empty && x >= lo && x <= hi; }
};

struct AdmissibilityReport {
    bool admissible = false;
    std::array<double, 8> cells{};
    std::vector<std::string> violating_cells;
    /// Feasible range along each axis holding the other three fixed, within
    /// [-1, 1], resolved by bisection. Indexed by DependenceAxis.
    std::array<FeasibleInterval, 4> axes{};

    std::string describe() const;
};

bool cells_admissible(const std::array<double, 8>& cells);

/// Always returns a report; never throws for valid marginals.
AdmissibilityReport admissibility_region(const PeriodMarginals& m, const DependenceSpec& spec);

/// Exact feasible interval along one axis, within [-1, 1], using that every
/// cell is affine in each dependence parameter.
FeasibleInterval exact_feasible_interval(const PeriodMarginals& m, const DependenceSpec& spec,
                                         DependenceAxis axis);

}  // namespace cds
