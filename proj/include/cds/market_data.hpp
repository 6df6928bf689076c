#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cds {

enum class CurveKind { interest, credit_spread, caplet_vol };

std::string_view to_string(CurveKind kind);
/// Accepts the file-format tags `interest`, `credit`, `caplet`.
CurveKind curve_kind_from_string(std::string_view tag);

/// ACT/365 fixed.
inline constexpr double kDaysPerYear = 365.0;

inline double days_to_years(double days) { return days / kDaysPerYear; }

struct CurvePoint {
    int term_days = 0;
    /// Continuously compounded zero rate, decimal spread, or decimal vol
    /// depending on the owning curve's kind.
    double value = 0.0;

    friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

/// Immutable term structure on ACT/365 day terms.
///
/// Interest curves interpolate linearly in the continuously compounded zero
/// rate (log-linear in the discount factor between nodes). Credit and caplet
/// curves interpolate linearly in the value itself. Queries left of the first
/// node are flat. Queries right of the last node are flat when extrapolation
/// is enabled and throw OutOfRangeTerm otherwise.
class Curve {
public:
    Curve(CurveKind kind, std::vector<CurvePoint> points, bool extrapolate = true);

    CurveKind kind() const { return kind_; }
    const std::vector<CurvePoint>& points() const { return points_; }
    bool extrapolates() const { return extrapolate_; }

    /// Interpolated node value at a year fraction.
    double value_at(double t_years) const;

    /// Copy with every value moved by `bps` basis points.
    Curve shifted(double bps) const;

    friend bool operator==(const Curve&, const Curve&) = default;

private:
    CurveKind kind_;
    std::vector<CurvePoint> points_;
    bool extrapolate_;
};

/// Validating factory. Throws EmptyCurve for fewer than two points,
/// NonMonotoneTerms for unsorted or duplicate terms, SchemaError for
/// non-positive terms, non-finite values, or negative credit/caplet values.
/// Negative interest rates are accepted.
Curve build_curve(CurveKind kind, std::vector<CurvePoint> points, bool extrapolate = true);

/// D(t, u) = exp(-(z(u) u - z(t) t)) for an interest curve.
double discount_factor(const Curve& curve, double t_years, double u_years);

/// Interpolated credit spread with an optional parallel shift in bps.
double spread_at(const Curve& curve, double term_years, double shift_bps = 0.0);

struct MarketSnapshot {
    std::optional<std::string> valuation_date;  // ISO yyyy-mm-dd when supplied
    Curve discount_curve;
    Curve credit_curve;
    Curve caplet_curve;
    /// Non-fatal findings from loading (e.g. negative interest rates).
    std::vector<std::string> warnings;
};

/// Loads a snapshot from CSV (`kind,term_days,value`) or JSON (by extension).
MarketSnapshot load_snapshot(const std::filesystem::path& path);

MarketSnapshot parse_snapshot_csv(std::istream& in, std::string_view source = "<csv>");
MarketSnapshot parse_snapshot_json(std::string_view text, std::string_view source = "<json>");

/// Writes CSV with shortest round-trip decimal formatting.
void emit_snapshot(const MarketSnapshot& snapshot, std::ostream& out);

/// Path of the bundled spot market file.
std::filesystem::path bundled_table1_path();

}  // namespace cds
