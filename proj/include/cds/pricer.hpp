#pragma once

#include "cds/hazard.hpp"
#include "cds/joint_default.hpp"
#include "cds/market_data.hpp"
#include "cds/regression.hpp"
#include "cds/schedule.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cds {

/// One-way: a defaulting party receives nothing on a positive mark (phi_bar = 0).
/// Two-way: the full mark is settled (phi_bar = 1).
enum class SettlementRule { one_way, two_way };

std::string to_string(SettlementRule rule);
SettlementRule settlement_rule_from_string(const std::string& name);

struct RecoverySpec {
    double phi_a = 0.4;       // default recovery of buyer A
    double phi_b = 0.4;       // default recovery of seller B
    double phi_bar_a = 1.0;   // non-default recovery of A
    double phi_bar_b = 1.0;   // non-default recovery of B
    double phi_ab = 0.16;     // joint recovery when A and B both default
    double phi_c = 0.4;       // reference entity recovery

    /// Throws OutOfRange unless every rate lies in [0, 1].
    void validate() const;

    /// phi_bar from the rule and phi_ab = phi_a * phi_b.
    static RecoverySpec from_rule(SettlementRule rule, double phi_a = 0.4, double phi_b = 0.4,
                                  double phi_c = 0.4);
};

struct CDSContract {
    double notional = 1.0;
    double spread = 0.0;  // decimal per annum
    Schedule schedule;
    std::string buyer = "A";
    std::string seller = "B";
    std::string reference = "C";

    /// Throws InvalidContract.
    void validate() const;

    /// X_{j+1} = -s N delta(T_j, T_{j+1}).
    double premium_payment(std::size_t j) const { return -spread * notional * schedule.accrual(j); }
};

/// R(T_j, T_{j+1}) = N (1 - phi_C) - s N delta / 2.
double default_payment(const CDSContract& contract, double phi_c, std::size_t j);

struct McConfig {
    std::size_t paths = 200000;
    std::uint64_t seed = 42;
    int substeps_per_year = 52;
    bool antithetic = true;
    int regression_degree = 2;
};

/// Hazard paths of buyer, seller and reference entity on the payment grid. A
/// default-free party is a zero set. Sets are shared so scenarios that keep
/// a party's quality reuse its paths.
struct HazardPathSet {
    std::shared_ptr<const HazardPaths> a;
    std::shared_ptr<const HazardPaths> b;
    std::shared_ptr<const HazardPaths> c;

    std::size_t n_paths() const { return c->n_paths(); }
    const std::vector<double>& grid() const { return c->grid(); }
    /// Throws GridMismatch unless all three sets share the schedule's grid and path count.
    void validate(const Schedule& schedule) const;
};

/// Random stream of each party; fixed so scenarios share draws party by party.
inline constexpr std::uint64_t kStreamA = 0;
inline constexpr std::uint64_t kStreamB = 1;
inline constexpr std::uint64_t kStreamC = 2;

std::shared_ptr<const HazardPaths> simulate_party(const std::optional<CIRParams>& params, const Schedule& schedule,
                                                  const McConfig& mc, std::uint64_t stream);

/// Empty optional = default-free party.
HazardPathSet simulate_path_set(const std::optional<CIRParams>& a, const std::optional<CIRParams>& b,
                                const std::optional<CIRParams>& c, const Schedule& schedule, const McConfig& mc);

/// Risk-adjusted one-period discount factors.
struct RiskyPeriodFactors {
    double phi_a = 0.0;     // premium factor when the mark is negative for the buyer
    double phi_b = 0.0;     // premium factor when the mark is non-negative
    double omega = 0.0;     // default payment factor
    double discount = 1.0;  // D(T_j, T_{j+1})

    /// O(T_j, T_{j+1}) given the sign of V(T_{j+1}) + X_{j+1}.
    double premium_factor(bool mark_nonnegative) const { return mark_nonnegative ? phi_b : phi_a; }
};

/// Closed-form factors from marginals and moments. Throws AdmissibilityError
/// when the implied joint law has a cell outside [0, 1].
RiskyPeriodFactors period_factors(const PeriodMarginals& m, const PeriodDependence& d, const RecoverySpec& r,
                                  double discount);

struct CollateralDecomposition {
    double v_f = 0.0;                  // counterparty-free part
    double psi = 0.0;                  // E[p_A p_B + sigma_AB]
    double xi = 0.0;                   // E[D kappa (V - R)]
    double residual = 0.0;             // xi / psi
    double residual_std_error = 0.0;
};

struct ValuationDiagnostics {
    std::size_t paths = 0;
    std::uint64_t seed = 0;
    bool antithetic = false;
    std::vector<double> r_squared;  // per regression date T_1..T_{m-1}
    std::vector<int> degrees;
    int fallbacks = 0;
    int breakeven_evaluations = 0;
    std::vector<std::string> notes;
};

/// Discounted expected cash flows of one period.
struct PeriodLeg {
    double time = 0.0;        // T_{i}
    double premium = 0.0;     // E[prod O * X_i]
    double protection = 0.0;  // E[prod O * Omega * R]
};

struct ValuationResult {
    double value = 0.0;
    double std_error = 0.0;
    double spread = 0.0;  // premium the value refers to
    std::optional<double> breakeven_spread;
    std::optional<double> breakeven_std_error;
    std::optional<double> breakeven_slope;  // dV/ds at the root
    std::optional<CollateralDecomposition> collateral;
    ValuationDiagnostics diagnostics;
    std::vector<PeriodLeg> legs;
    /// Per-path present values, for paired comparisons on common paths.
    std::vector<double> path_values;
};

/// Immutable inputs shared by every valuation on one path set: the paths,
/// discount factors and per-date regressors.
class PricingContext {
public:
    PricingContext(HazardPathSet paths, Schedule schedule, const Curve& discount_curve, McConfig mc);

    const HazardPathSet& paths() const { return paths_; }
    const Schedule& schedule() const { return schedule_; }
    const McConfig& mc() const { return mc_; }
    std::size_t n_paths() const { return paths_.n_paths(); }
    std::size_t periods() const { return schedule_.periods(); }
    double discount(std::size_t j) const { return discount_[j]; }
    /// Regressor on the hazard states at T_k, 1 <= k < m.
    const ContinuationRegressor& regressor(std::size_t k) const;

private:
    HazardPathSet paths_;
    Schedule schedule_;
    McConfig mc_;
    std::vector<double> discount_;
    mutable std::vector<std::unique_ptr<ContinuationRegressor>> regressors_;
    mutable std::once_flag regressors_once_;
};

/// Sample mean and standard error honouring antithetic pairing.
struct SampleStats {
    double mean = 0.0;
    double std_error = 0.0;
};
SampleStats sample_stats(std::span<const double> values, bool antithetic);

/// Standard error of the mean of a - b on common paths.
double paired_std_error(std::span<const double> a, std::span<const double> b, bool antithetic);

/// Standard error of the difference of two breakevens solved on common paths,
/// from the per-path values at each root scaled by the local slope.
double breakeven_delta_std_error(const ValuationResult& x, const ValuationResult& y, bool antithetic);

struct BreakevenSolution {
    double spread = 0.0;
    double slope = 0.0;  // dV/ds near the root
    double residual = 0.0;
    int evaluations = 0;
};

/// Root of value(s) = 0 by a secant guess, bracket expansion and TOMS 748.
/// Throws NoBracket if no sign change is found within |s| <= 10.
BreakevenSolution solve_breakeven(const std::function<double(double)>& value, double s0 = 0.0, double s1 = 0.01);

/// Trilateral value by backward induction with regression-estimated
/// continuation values deciding the premium factor each period.
class TrilateralValuation {
public:
    TrilateralValuation(std::shared_ptr<const PricingContext> context, const DependenceSpec& dependence,
                        const RecoverySpec& recoveries, double notional = 1.0);

    ValuationResult value(double spread) const;
    /// Value at the breakeven premium, with the breakeven and its error filled in.
    ValuationResult breakeven() const;
    /// Fast path used by root finding: mean value only.
    double mean_value(double spread) const;

    const PricingContext& context() const { return *context_; }

private:
    struct Pass;
    void backward(double spread, Pass& pass, bool keep_details) const;

    std::shared_ptr<const PricingContext> context_;
    DependenceSpec dependence_;
    RecoverySpec recoveries_;
    double notional_;
    // Row-major n_paths x m factor tables.
    std::vector<double> phi_a_, phi_b_, omega_;
};

/// Fully collateralized value V = V^F + xi / psi on the same paths.
class CollateralizedValuation {
public:
    CollateralizedValuation(std::shared_ptr<const PricingContext> context, const DependenceSpec& dependence,
                            const RecoverySpec& recoveries, double notional = 1.0);

    ValuationResult value(double spread) const;

private:
    std::shared_ptr<const PricingContext> context_;
    DependenceSpec dependence_;
    RecoverySpec recoveries_;
    double notional_;
};

ValuationResult price_trilateral(const CDSContract& contract, const HazardPathSet& paths,
                                 const DependenceSpec& dependence, const RecoverySpec& recoveries,
                                 const Curve& discount_curve, const McConfig& mc, bool solve_breakeven = false);

/// Direct summation with a deterministic survival term structure of C.
ValuationResult price_riskfree(const CDSContract& contract, const SurvivalCurve& survival_c,
                               const Curve& discount_curve, const RecoverySpec& recoveries);

/// Only full collateralization (threshold 0) is priced; other thresholds throw InvalidContract.
ValuationResult price_collateralized(const CDSContract& contract, const HazardPathSet& paths,
                                     const DependenceSpec& dependence, const RecoverySpec& recoveries,
                                     const Curve& discount_curve, const McConfig& mc, double threshold = 0.0);

/// Range of one dependence parameter, others fixed, admissible on every path
/// and period of the set, with the survival probabilities (A, B, C) of the
/// path-periods that bind each end.
struct PathSetFeasibility {
    FeasibleInterval interval;
    std::array<double, 3> lo_binding{1.0, 1.0, 1.0};
    std::array<double, 3> hi_binding{1.0, 1.0, 1.0};
};

PathSetFeasibility path_set_feasible_interval(const HazardPathSet& paths, const DependenceSpec& base,
                                              DependenceAxis axis);

}  // namespace cds
