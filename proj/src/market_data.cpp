#include "cds/market_data.hpp"

#include "cds/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace cds {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// Linear interpolation of node values, flat outside.
double interpolate(const std::vector<CurvePoint>& pts, double t_years, bool extrapolate) {
    const double t_days = t_years * kDaysPerYear;
    if (t_days <= pts.front().term_days) return pts.front().value;
    if (t_days >= pts.back().term_days) {
        if (!extrapolate && t_days > pts.back().term_days) {
            throw OutOfRangeTerm("term " + format_double(t_years) + "y beyond last node (" +
                                 std::to_string(pts.back().term_days) + "d)");
        }
        return pts.back().value;
    }
    const auto hi = std::upper_bound(pts.begin(), pts.end(), t_days,
                                     [](double t, const CurvePoint& p) { return t < p.term_days; });
    const auto lo = hi - 1;
    const double w = (t_days - lo->term_days) / static_cast<double>(hi->term_days - lo->term_days);
    return lo->value + w * (hi->value - lo->value);
}

struct RawPoints {
    std::optional<std::string> valuation_date;
    std::map<CurveKind, std::vector<CurvePoint>> by_kind;
};

MarketSnapshot assemble(RawPoints raw, std::string_view source) {
    for (auto kind : {CurveKind::interest, CurveKind::credit_spread, CurveKind::caplet_vol}) {
        if (!raw.by_kind.contains(kind)) {
            throw SchemaError(std::string(source) + ": missing '" + std::string(to_string(kind)) +
                              "' section");
        }
    }
    std::vector<std::string> warnings;
    for (const auto& p : raw.by_kind[CurveKind::interest]) {
        if (p.value < 0.0) {
            warnings.push_back("negative interest rate " + format_double(p.value) + " at " +
                               std::to_string(p.term_days) + "d");
        }
    }
    return MarketSnapshot{
        .valuation_date = std::move(raw.valuation_date),
        .discount_curve = build_curve(CurveKind::interest, raw.by_kind[CurveKind::interest]),
        .credit_curve = build_curve(CurveKind::credit_spread, raw.by_kind[CurveKind::credit_spread]),
        .caplet_curve = build_curve(CurveKind::caplet_vol, raw.by_kind[CurveKind::caplet_vol]),
        .warnings = std::move(warnings),
    };
}

}  // namespace

std::string_view to_string(CurveKind kind) {
    switch (kind) {
        case CurveKind::interest: return "interest";
        case CurveKind::credit_spread: return "credit";
        case CurveKind::caplet_vol: return "caplet";
    }
    return "?";
}

CurveKind curve_kind_from_string(std::string_view tag) {
    if (tag == "interest") return CurveKind::interest;
    if (tag == "credit") return CurveKind::credit_spread;
    if (tag == "caplet") return CurveKind::caplet_vol;
    throw ParseError("unknown curve kind '" + std::string(tag) + "'");
}

Curve::Curve(CurveKind kind, std::vector<CurvePoint> points, bool extrapolate)
    : kind_(kind), points_(std::move(points)), extrapolate_(extrapolate) {
    if (points_.size() < 2) {
        throw EmptyCurve("curve '" + std::string(to_string(kind_)) + "' needs at least 2 points, got " +
                         std::to_string(points_.size()));
    }
    for (std::size_t i = 0; i < points_.size(); ++i) {
        const auto& p = points_[i];
        if (p.term_days <= 0) {
            throw SchemaError("term_days must be positive, got " + std::to_string(p.term_days));
        }
        if (!std::isfinite(p.value)) throw SchemaError("non-finite curve value");
        if (kind_ != CurveKind::interest && p.value < 0.0) {
            throw SchemaError("negative " + std::string(to_string(kind_)) + " value " +
                              format_double(p.value));
        }
        if (i > 0 && p.term_days <= points_[i - 1].term_days) {
            throw NonMonotoneTerms("terms must be strictly increasing: " +
                                   std::to_string(points_[i - 1].term_days) + " then " +
                                   std::to_string(p.term_days));
        }
    }
}

double Curve::value_at(double t_years) const {
    return interpolate(points_, t_years, extrapolate_);
}

Curve Curve::shifted(double bps) const {
    auto pts = points_;
    for (auto& p : pts) p.value += bps * 1e-4;
    return Curve(kind_, std::move(pts), extrapolate_);
}

Curve build_curve(CurveKind kind, std::vector<CurvePoint> points, bool extrapolate) {
    return Curve(kind, std::move(points), extrapolate);
}

double discount_factor(const Curve& curve, double t_years, double u_years) {
    if (curve.kind() != CurveKind::interest) {
        throw WrongCurveKind("discount_factor needs an interest curve");
    }
    if (t_years < 0.0 || u_years < t_years) {
        throw OutOfRangeTerm("discount_factor needs 0 <= t <= u");
    }
    if (u_years == t_years) return 1.0;
    const double ru = curve.value_at(u_years) * u_years;
    const double rt = t_years > 0.0 ? curve.value_at(t_years) * t_years : 0.0;
    return std::exp(-(ru - rt));
}

double spread_at(const Curve& curve, double term_years, double shift_bps) {
    if (curve.kind() != CurveKind::credit_spread) {
        throw WrongCurveKind("spread_at needs a credit spread curve");
    }
    return curve.value_at(term_years) + shift_bps * 1e-4;
}

MarketSnapshot parse_snapshot_csv(std::istream& in, std::string_view source) {
    RawPoints raw;
    std::string line;
    int line_no = 0;
    bool have_header = false;
    const std::string where = std::string(source) + ":";
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '#') {
            const auto body = trim(std::string_view(t).substr(1));
            constexpr std::string_view key = "valuation_date=";
            if (body.starts_with(key)) raw.valuation_date = trim(body.substr(key.size()));
            continue;
        }
        if (!have_header) {
            if (t != "kind,term_days,value") {
                throw ParseError(where + std::to_string(line_no) +
                                 ": expected header 'kind,term_days,value', got '" + t + "'");
            }
            have_header = true;
            continue;
        }
        const auto fields = split(t, ',');
        if (fields.size() != 3) {
            throw ParseError(where + std::to_string(line_no) + ": expected 3 fields, got " +
                             std::to_string(fields.size()));
        }
        CurveKind kind;
        try {
            kind = curve_kind_from_string(fields[0]);
        } catch (const ParseError& e) {
            throw ParseError(where + std::to_string(line_no) + ": field 'kind': " + e.what());
        }
        CurvePoint p;
        {
            const auto& f = fields[1];
            const auto res = std::from_chars(f.data(), f.data() + f.size(), p.term_days);
            if (res.ec != std::errc{} || res.ptr != f.data() + f.size()) {
                throw ParseError(where + std::to_string(line_no) + ": field 'term_days': bad integer '" +
                                 f + "'");
            }
        }
        {
            const auto& f = fields[2];
            const auto res = std::from_chars(f.data(), f.data() + f.size(), p.value);
            if (res.ec != std::errc{} || res.ptr != f.data() + f.size()) {
                throw ParseError(where + std::to_string(line_no) + ": field 'value': bad number '" +
                                 f + "'");
            }
        }
        raw.by_kind[kind].push_back(p);
    }
    if (!have_header) throw ParseError(where + " empty input, no header");
    return assemble(std::move(raw), source);
}

MarketSnapshot parse_snapshot_json(std::string_view text, std::string_view source) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string(source) + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("points") || !doc["points"].is_array()) {
        throw SchemaError(std::string(source) + ": expected object with a 'points' array");
    }
    RawPoints raw;
    if (doc.contains("valuation_date")) raw.valuation_date = doc["valuation_date"].get<std::string>();
    std::size_t idx = 0;
    for (const auto& item : doc["points"]) {
        const auto where = std::string(source) + ": points[" + std::to_string(idx++) + "]";
        for (const char* field : {"kind", "term_days", "value"}) {
            if (!item.contains(field)) throw SchemaError(where + ": missing field '" + field + "'");
        }
        if (!item["term_days"].is_number_integer() || !item["value"].is_number()) {
            throw ParseError(where + ": 'term_days' must be an integer and 'value' a number");
        }
        CurveKind kind;
        try {
            kind = curve_kind_from_string(item["kind"].get<std::string>());
        } catch (const ParseError& e) {
            throw ParseError(where + ": " + e.what());
        }
        raw.by_kind[kind].push_back({item["term_days"].get<int>(), item["value"].get<double>()});
    }
    return assemble(std::move(raw), source);
}

MarketSnapshot load_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IOError("cannot open market file " + path.string());
    if (path.extension() == ".json") {
        std::stringstream buf;
        buf << in.rdbuf();
        return parse_snapshot_json(buf.str(), path.string());
    }
    return parse_snapshot_csv(in, path.string());
}

void emit_snapshot(const MarketSnapshot& snapshot, std::ostream& out) {
    if (snapshot.valuation_date) out << "# valuation_date=" << *snapshot.valuation_date << '\n';
    out << "kind,term_days,value\n";
    for (const Curve* c : {&snapshot.discount_curve, &snapshot.credit_curve, &snapshot.caplet_curve}) {
        for (const auto& p : c->points()) {
            out << to_string(c->kind()) << ',' << p.term_days << ',' << format_double(p.value) << '\n';
        }
    }
}

std::filesystem::path bundled_table1_path() {
    return std::filesystem::path(CDS_DATA_DIR) / "table1.csv";
}

}  // namespace cds
