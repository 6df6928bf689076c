#pragma once

#include "cds/market_data.hpp"
#include "cds/schedule.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cds {

/// Square-root diffusion dh = a (b - h) dt + sigma sqrt(h) dW with h(0) = h0.
struct CIRParams {
    double a = 0.1;      // mean reversion speed, 1/years
    double b = 0.01;     // long-term mean hazard
    double sigma = 0.0;  // volatility
    double h0 = 0.01;    // initial hazard

    /// Throws InvalidParams unless a > 0, b > 0, sigma >= 0, h0 >= 0.
    void validate() const;
    bool feller() const { return 2.0 * a * b >= sigma * sigma; }
};

struct SimulationConfig {
    int substeps_per_year = 52;
    /// Pairs path 2k+1 with the mirrored Gaussian draws of path 2k.
    bool antithetic = false;
};

/// Simulated hazard paths of one entity on a payment grid.
///
/// Keeps the hazard at each grid date (regression state) and the integrated
/// hazard over each period (trapezoid over the substeps). A zero set stands in
/// for a default-free party and stores nothing.
class HazardPaths {
public:
    HazardPaths() = default;

    static HazardPaths zero(std::vector<double> grid, std::size_t n_paths);

    std::size_t n_paths() const { return n_paths_; }
    std::size_t n_periods() const { return grid_.empty() ? 0 : grid_.size() - 1; }
    const std::vector<double>& grid() const { return grid_; }
    bool is_zero() const { return zero_; }
    std::uint64_t seed() const { return seed_; }

    double hazard(std::size_t path, std::size_t k) const {
        return zero_ ? 0.0 : hazard_[path * grid_.size() + k];
    }
    double integrated(std::size_t path, std::size_t j) const {
        return zero_ ? 0.0 : integrated_[path * n_periods() + j];
    }
    /// Row-major n_paths x (m + 1) hazards at the grid dates.
    std::span<const double> hazard_matrix() const { return hazard_; }

private:
    friend HazardPaths simulate_paths(const CIRParams&, std::span<const double>, std::size_t,
                                      std::uint64_t, const SimulationConfig&, std::uint64_t);
    friend HazardPaths read_paths_binary(const std::filesystem::path&);

    std::vector<double> grid_;
    std::size_t n_paths_ = 0;
    bool zero_ = false;
    std::uint64_t seed_ = 0;
    std::vector<double> hazard_;
    std::vector<double> integrated_;
};

/// Full-truncation Euler with ceil(52 dt) substeps per grid interval.
/// Each path draws from its own generator keyed by (seed, stream, path), so
/// output is reproducible and independent of how paths are scheduled; callers
/// give each entity a fixed stream to get common random numbers across
/// scenarios. Throws InvalidParams.
HazardPaths simulate_paths(const CIRParams& params, std::span<const double> grid, std::size_t n_paths,
                           std::uint64_t seed, const SimulationConfig& config = {},
                           std::uint64_t stream = 0);

/// Trapezoidal integral of equally spaced samples.
double integrate_trapezoid(std::span<const double> samples, double dt);

/// exp(-int h) from equally spaced hazard samples spanning one period.
double period_survival(std::span<const double> substep_hazards, double dt);

/// p(T_j, T_{j+1}) on one simulated path. Throws GridMismatch.
double period_survival(const HazardPaths& paths, std::size_t path, std::size_t j);

/// Binary dump: uint64 n_paths, uint64 n_points, n_points grid doubles, then
/// n_paths x n_points row-major hazards, then n_paths x (n_points - 1)
/// integrated period hazards, all in host byte order.
void write_paths_binary(const HazardPaths& paths, const std::filesystem::path& file);
HazardPaths read_paths_binary(const std::filesystem::path& file);

/// E[exp(-int_0^tau h)] under CIR started at h0 (affine closed form).
double cir_survival(const CIRParams& params, double tau);

/// Survival term structure pbar(0, T_i) aligned with schedule.times.
using SurvivalCurve = std::vector<double>;

SurvivalCurve cir_survival_curve(const CIRParams& params, const Schedule& schedule);
SurvivalCurve flat_hazard_survival_curve(double hazard, const Schedule& schedule);
/// Cross-path average of exp(-int h) up to every grid date.
SurvivalCurve sample_survival_curve(const HazardPaths& paths);

/// Counterparty-free CDS legs from deterministic survival and discounting:
/// V(s) = protection - s * risky_annuity, with accrued premium on default
/// counted at half the period.
struct RiskfreeLegs {
    double protection = 0.0;      // sum P(T_i) (pbar_{i-1} - pbar_i) N (1 - phi_C)
    double risky_annuity = 0.0;   // sum P(T_i) N delta_i (pbar_i + (pbar_{i-1} - pbar_i) / 2)

    double value(double spread) const { return protection - spread * risky_annuity; }
};

RiskfreeLegs riskfree_legs(const SurvivalCurve& survival, const Curve& discount_curve, double recovery_c,
                           const Schedule& schedule, double notional = 1.0);

/// Premium zeroing the counterparty-free value. Throws NoRoot when the
/// schedule carries no premium.
double riskfree_breakeven_spread(const SurvivalCurve& survival, const Curve& discount_curve,
                                 double recovery_c, const Schedule& schedule);
double riskfree_breakeven_spread(const CIRParams& params, const Curve& discount_curve, double recovery_c,
                                 const Schedule& schedule);
double riskfree_breakeven_spread(double flat_hazard, const Curve& discount_curve, double recovery_c,
                                 const Schedule& schedule);

struct CalibrationConfig {
    double recovery = 0.4;
    int frequency = 4;
    std::array<double, 2> a_bounds{0.01, 2.0};
    std::array<double, 2> b_bounds{1e-4, 0.5};
    std::array<double, 2> sigma_bounds{1e-4, 0.5};
    std::array<double, 2> h0_bounds{0.0, 0.5};
    /// Fit h0 as a fourth parameter; otherwise h0 = b.
    bool fit_h0 = true;
    /// Ties sigma to the drift through the stationary gamma shape 2ab / sigma^2,
    /// since spreads alone barely constrain volatility. Zero fits sigma freely.
    double stationary_shape = 20.0;
    /// With a free sigma, keep 2ab >= sigma^2.
    bool enforce_feller = true;
    /// CalibrationFailed above this root-mean-square spread error.
    double max_rms_error = 5e-4;
    int max_iterations = 20000;
    int restarts = 3;
};

struct CalibrationResult {
    CIRParams params;
    double objective = 0.0;  // sum of squared spread errors
    double rms_error = 0.0;
    int iterations = 0;
    std::vector<double> terms;  // node maturities, years
    std::vector<double> market_spreads;
    std::vector<double> model_spreads;
};

/// Least-squares CIR fit of model breakeven spreads to every node of a
/// (possibly shifted) credit curve. Throws InvalidBounds, CalibrationFailed.
CalibrationResult calibrate_cir(const Curve& credit_curve, double shift_bps, const Curve& discount_curve,
                                const CalibrationConfig& config = {});

/// Model breakeven spreads at arbitrary maturities (quarterly unless configured).
std::vector<double> cir_model_spreads(const CIRParams& params, std::span<const double> terms,
                                      const Curve& discount_curve, double recovery_c, int frequency = 4);

}  // namespace cds
