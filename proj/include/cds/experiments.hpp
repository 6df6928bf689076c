#pragma once

#include "cds/hazard.hpp"
#include "cds/joint_default.hpp"
#include "cds/market_data.hpp"
#include "cds/pricer.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cds {

/// riskfree, A, or A+<n>bps (the 'A' credit curve shifted up by n basis points).
struct CreditQuality {
    bool riskfree = false;
    double shift_bps = 0.0;

    std::string label() const;
    friend bool operator==(const CreditQuality&, const CreditQuality&) = default;
};

/// Throws ParseError.
CreditQuality parse_quality(std::string_view text);

struct ContractTemplate {
    double notional = 1.0;
    double spread = 0.027;
    double start = 0.0;
    double maturity = 5.0;
    int frequency = 4;

    CDSContract contract() const;
};

enum class Figure1Mode {
    caption,  // non-swept parameters at zero
    body,     // rho_ab at a nonzero base
};

struct SweepConfig {
    std::vector<DependenceAxis> axes{kAllAxes.begin(), kAllAxes.end()};
    double min = -1.0;
    double max = 1.0;
    double step = 0.1;
    Figure1Mode mode = Figure1Mode::caption;
    double body_rho_ab = 0.5;

    std::vector<double> grid() const;
};

struct ScenarioConfig {
    std::string market;  // empty: bundled table
    ContractTemplate contract;
    RecoverySpec recoveries;
    std::string quality_a = "A+100bps";
    std::string quality_b = "A";
    std::string quality_c = "A+200bps";
    std::vector<std::string> table_qualities{"A", "A+100bps", "A+200bps", "A+300bps"};
    DependenceSpec dependence;
    SweepConfig sweep;
    std::string collateral_quality = "A";
    std::vector<double> collateral_rho_bc{0.0, 0.25, 0.5};
    McConfig mc;
    CalibrationConfig calibration;
    std::string out_dir = ".";

    /// Throws SchemaError, ParseError or OutOfRange on invalid content.
    void validate() const;
    std::string to_json() const;
    /// Partial documents are accepted; missing keys keep their defaults.
    static ScenarioConfig from_json(std::string_view text);
    /// FNV-1a 64 of the canonical JSON, as 16 hex digits.
    std::string hash() const;
};

ScenarioConfig load_scenario_config(const std::filesystem::path& file);

/// Loads the configured market file, or the bundled table when none is set.
MarketSnapshot load_market(const ScenarioConfig& config);

/// Calibrated CIR parameters per credit quality, fitted on first use.
class QualityModels {
public:
    QualityModels(const MarketSnapshot& market, CalibrationConfig config);

    /// Empty for riskfree.
    std::optional<CIRParams> params(const CreditQuality& quality);
    const CalibrationResult& calibration(const CreditQuality& quality);

private:
    const MarketSnapshot* market_;
    CalibrationConfig config_;
    std::map<double, CalibrationResult> fits_;
};

struct TableRow {
    std::string party_a;
    std::string party_b;
    double premium = 0.0;        // breakeven spread
    double difference_bp = 0.0;  // versus the counterparty-free premium
    double stderr_bp = 0.0;      // of the difference, paired on common paths
};

struct TableReport {
    std::string title;
    std::string config_hash;
    std::vector<TableRow> rows;  // first row is the counterparty-free baseline
};

/// Buyer quality varies over the table qualities, seller default-free.
TableReport run_table3(const ScenarioConfig& config, const MarketSnapshot& market);
/// Seller quality varies, buyer default-free.
TableReport run_table4(const ScenarioConfig& config, const MarketSnapshot& market);

struct SweepPoint {
    double nominal = 0.0;
    double effective = 0.0;  // nominal clipped into the admissible range
    bool clipped = false;
    double breakeven = 0.0;
    double std_error = 0.0;
    /// Present for clipped points: joint law at the binding path and period.
    std::optional<AdmissibilityReport> admissibility;
};

struct SweepResult {
    DependenceAxis axis = DependenceAxis::rho_ab;
    DependenceSpec base;
    FeasibleInterval feasible;
    std::vector<SweepPoint> points;
    double slope_bp = 0.0;  // least squares over distinct effective values, bps per unit
};

struct Figure1Report {
    Figure1Mode mode = Figure1Mode::caption;
    std::string config_hash;
    double base_premium = 0.0;
    std::vector<SweepResult> sweeps;
};

Figure1Report run_figure1(const ScenarioConfig& config, const MarketSnapshot& market);

/// Ordinary least squares slope of y on x.
double ols_slope(std::span<const double> x, std::span<const double> y);

struct CollateralRow {
    std::string label;
    double nominal_rho_bc = 0.0;
    double rho_bc = 0.0;           // effective, after clipping to the path set
    bool clipped = false;
    double value = 0.0;
    double v_f = 0.0;
    double psi = 0.0;
    double xi = 0.0;
    double residual = 0.0;         // V - V^F = xi / psi
    double residual_stderr = 0.0;
    bool significant = false;      // |residual| > 3 standard errors
};

struct CollateralReport {
    std::string config_hash;
    std::vector<CollateralRow> rows;  // the last row is the degenerate contract
};

/// Full collateralization across the rho_bc values, plus a contract whose
/// default payment equals its mark (phi_C = 1, zero premium). Values outside
/// the range admissible on every path are clipped as in the sweeps.
CollateralReport run_collateral_study(const ScenarioConfig& config, const MarketSnapshot& market);

/// Writes <stem>.csv and <stem>.txt under dir. Throws IOError on empty
/// results (nothing is written) or when the files cannot be created.
void emit_report(const TableReport& report, const std::filesystem::path& dir, const std::string& stem);
void emit_report(const Figure1Report& report, const std::filesystem::path& dir, const std::string& stem);
void emit_report(const CollateralReport& report, const std::filesystem::path& dir, const std::string& stem);

/// Reads a table CSV written by emit_report. Throws IOError, ParseError.
TableReport read_table_report(const std::filesystem::path& file);

std::string format_table(const TableReport& report);
std::string format_figure1(const Figure1Report& report);
std::string format_collateral(const CollateralReport& report);

}  // namespace cds
