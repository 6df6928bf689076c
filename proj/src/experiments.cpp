#include "cds/experiments.hpp"

#include "cds/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace cds {

using nlohmann::json;

namespace {

std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string fixed(double v, int digits) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(digits) << v;
    return out.str();
}

std::string to_string(Figure1Mode mode) {
    return mode == Figure1Mode::caption ? "caption" : "body";
}

Figure1Mode figure1_mode_from_string(const std::string& s) {
    if (s == "caption") return Figure1Mode::caption;
    if (s == "body") return Figure1Mode::body;
    throw ParseError("unknown figure1 mode '" + s + "' (expected caption or body)");
}

template <typename T>
void read_if(const json& obj, const char* key, T& target) {
    if (!obj.contains(key)) return;
    try {
        target = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("config key '") + key + "': " + e.what());
    }
}

const json& section(const json& doc, const char* key) {
    static const json empty = json::object();
    if (!doc.contains(key)) return empty;
    if (!doc.at(key).is_object()) throw SchemaError(std::string("config key '") + key + "' must be an object");
    return doc.at(key);
}

std::ofstream open_output(const std::filesystem::path& file) {
    std::error_code ec;
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path(), ec);
    std::ofstream out(file);
    if (!out) throw IOError("cannot write " + file.string());
    return out;
}

ValuationResult solve(const std::shared_ptr<const PricingContext>& context, const DependenceSpec& dependence,
                      const RecoverySpec& recoveries, double notional) {
    return TrilateralValuation(context, dependence, recoveries, notional).breakeven();
}

TableReport run_table(const ScenarioConfig& config, const MarketSnapshot& market, bool vary_buyer) {
    config.validate();
    const auto contract = config.contract.contract();
    const auto& schedule = contract.schedule;
    QualityModels models(market, config.calibration);
    const auto c_paths = simulate_party(models.params(parse_quality(config.quality_c)), schedule, config.mc, kStreamC);
    const auto zero = simulate_party(std::nullopt, schedule, config.mc, kStreamA);

    TableReport report;
    report.title = vary_buyer ? "Impact of the credit quality of the protection buyer"
                              : "Impact of the credit quality of the protection seller";
    report.config_hash = config.hash();

    const auto base_context = std::make_shared<const PricingContext>(HazardPathSet{zero, zero, c_paths}, schedule,
                                                                     market.discount_curve, config.mc);
    const auto base = solve(base_context, config.dependence, config.recoveries, contract.notional);
    const double s0 = *base.breakeven_spread;
    report.rows.push_back({"riskfree", "riskfree", s0, 0.0, 0.0});

    for (const auto& label : config.table_qualities) {
        const auto quality = parse_quality(label);
        const auto params = models.params(quality);
        HazardPathSet set{zero, zero, c_paths};
        if (vary_buyer) {
            set.a = simulate_party(params, schedule, config.mc, kStreamA);
        } else {
            set.b = simulate_party(params, schedule, config.mc, kStreamB);
        }
        const auto context =
            std::make_shared<const PricingContext>(set, schedule, market.discount_curve, config.mc);
        const auto res = solve(context, config.dependence, config.recoveries, contract.notional);
        TableRow row;
        row.party_a = vary_buyer ? quality.label() : "riskfree";
        row.party_b = vary_buyer ? "riskfree" : quality.label();
        row.premium = *res.breakeven_spread;
        row.difference_bp = (row.premium - s0) * 1e4;
        row.stderr_bp = breakeven_delta_std_error(res, base, config.mc.antithetic) * 1e4;
        report.rows.push_back(row);
    }
    return report;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_number(const std::string& s, const std::string& where) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ParseError(where + ": bad number '" + s + "'");
    }
    return v;
}

std::pair<double, double> interior(const FeasibleInterval& iv) {
    const double width = iv.hi - iv.lo;
    return {iv.lo + 1e-6 * width, iv.hi - 1e-6 * width};
}

}  // namespace

std::string CreditQuality::label() const {
    if (riskfree) return "riskfree";
    if (shift_bps == 0.0) return "A";
    return "A+" + fmt(shift_bps) + "bps";
}

CreditQuality parse_quality(std::string_view text) {
    if (text == "riskfree" || text == "risk-free") return CreditQuality{true, 0.0};
    if (text == "A") return CreditQuality{false, 0.0};
    if (text.starts_with("A+") && text.ends_with("bps") && text.size() > 5) {
        const auto num = text.substr(2, text.size() - 5);
        double v = 0.0;
        const auto res = std::from_chars(num.data(), num.data() + num.size(), v);
        if (res.ec == std::errc{} && res.ptr == num.data() + num.size() && v >= 0.0) {
            return CreditQuality{false, v};
        }
    }
    throw ParseError("unknown credit quality '" + std::string(text) + "' (expected riskfree, A or A+<n>bps)");
}

CDSContract ContractTemplate::contract() const {
    CDSContract c;
    c.notional = notional;
    c.spread = spread;
    c.schedule = make_schedule(start, maturity, frequency);
    c.validate();
    return c;
}

std::vector<double> SweepConfig::grid() const {
    std::vector<double> out;
    const auto n = static_cast<long>(std::floor((max - min) / step + 1e-9));
    for (long k = 0; k <= n; ++k) out.push_back(std::round((min + k * step) * 1e10) / 1e10);
    return out;
}

void ScenarioConfig::validate() const {
    for (const auto* q : {&quality_a, &quality_b, &quality_c, &collateral_quality}) parse_quality(*q);
    for (const auto& q : table_qualities) parse_quality(q);
    if (table_qualities.empty()) throw SchemaError("table_qualities must not be empty");
    dependence.validate();
    recoveries.validate();
    if (!(sweep.min >= -1.0 && sweep.max <= 1.0 && sweep.min <= sweep.max)) {
        throw OutOfRange("sweep range must satisfy -1 <= min <= max <= 1");
    }
    if (!(sweep.step > 0.0)) throw OutOfRange("sweep step must be positive");
    if (!(sweep.body_rho_ab >= -1.0 && sweep.body_rho_ab <= 1.0)) throw OutOfRange("body_rho_ab outside [-1, 1]");
    for (double r : collateral_rho_bc) {
        if (!(r >= -1.0 && r <= 1.0)) throw OutOfRange("collateral rho_bc outside [-1, 1]");
    }
    if (mc.paths < 2) throw InvalidParams("mc.paths must be at least 2");
    if (mc.regression_degree < 0) throw InvalidParams("regression_degree must be non-negative");
    contract.contract();
}

std::string ScenarioConfig::to_json() const {
    json doc;
    doc["market"] = market;
    doc["contract"] = {{"notional", contract.notional},
                       {"spread", contract.spread},
                       {"start", contract.start},
                       {"maturity", contract.maturity},
                       {"frequency", contract.frequency}};
    doc["recovery"] = {{"phi_a", recoveries.phi_a},         {"phi_b", recoveries.phi_b},
                       {"phi_bar_a", recoveries.phi_bar_a}, {"phi_bar_b", recoveries.phi_bar_b},
                       {"phi_ab", recoveries.phi_ab},       {"phi_c", recoveries.phi_c}};
    doc["qualities"] = {{"a", quality_a}, {"b", quality_b}, {"c", quality_c}};
    doc["table_qualities"] = table_qualities;
    doc["dependence"] = {{"rho_ab", dependence.rho_ab},
                         {"rho_ac", dependence.rho_ac},
                         {"rho_bc", dependence.rho_bc},
                         {"zeta_abc", dependence.zeta_abc}};
    std::vector<std::string> axes;
    for (auto a : sweep.axes) axes.push_back(cds::to_string(a));
    doc["sweep"] = {{"axes", axes},
                    {"min", sweep.min},
                    {"max", sweep.max},
                    {"step", sweep.step},
                    {"mode", to_string(sweep.mode)},
                    {"body_rho_ab", sweep.body_rho_ab}};
    doc["collateral"] = {{"quality", collateral_quality}, {"rho_bc", collateral_rho_bc}};
    doc["mc"] = {{"paths", mc.paths},
                 {"seed", mc.seed},
                 {"substeps_per_year", mc.substeps_per_year},
                 {"antithetic", mc.antithetic},
                 {"regression_degree", mc.regression_degree}};
    doc["calibration"] = {{"recovery", calibration.recovery},
                          {"frequency", calibration.frequency},
                          {"fit_h0", calibration.fit_h0},
                          {"stationary_shape", calibration.stationary_shape},
                          {"enforce_feller", calibration.enforce_feller},
                          {"max_rms_error", calibration.max_rms_error},
                          {"max_iterations", calibration.max_iterations},
                          {"restarts", calibration.restarts}};
    doc["out_dir"] = out_dir;
    return doc.dump(2);
}

ScenarioConfig ScenarioConfig::from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("scenario config: ") + e.what());
    }
    if (!doc.is_object()) throw SchemaError("scenario config must be a JSON object");
    ScenarioConfig c;
    read_if(doc, "market", c.market);
    read_if(doc, "out_dir", c.out_dir);
    const auto& contract = section(doc, "contract");
    read_if(contract, "notional", c.contract.notional);
    read_if(contract, "spread", c.contract.spread);
    read_if(contract, "start", c.contract.start);
    read_if(contract, "maturity", c.contract.maturity);
    read_if(contract, "frequency", c.contract.frequency);
    const auto& rec = section(doc, "recovery");
    if (rec.contains("settlement")) {
        c.recoveries = RecoverySpec::from_rule(settlement_rule_from_string(rec.at("settlement").get<std::string>()),
                                               rec.value("phi_a", 0.4), rec.value("phi_b", 0.4),
                                               rec.value("phi_c", 0.4));
    }
    read_if(rec, "phi_a", c.recoveries.phi_a);
    read_if(rec, "phi_b", c.recoveries.phi_b);
    read_if(rec, "phi_bar_a", c.recoveries.phi_bar_a);
    read_if(rec, "phi_bar_b", c.recoveries.phi_bar_b);
    read_if(rec, "phi_ab", c.recoveries.phi_ab);
    read_if(rec, "phi_c", c.recoveries.phi_c);
    const auto& q = section(doc, "qualities");
    read_if(q, "a", c.quality_a);
    read_if(q, "b", c.quality_b);
    read_if(q, "c", c.quality_c);
    read_if(doc, "table_qualities", c.table_qualities);
    const auto& dep = section(doc, "dependence");
    read_if(dep, "rho_ab", c.dependence.rho_ab);
    read_if(dep, "rho_ac", c.dependence.rho_ac);
    read_if(dep, "rho_bc", c.dependence.rho_bc);
    read_if(dep, "zeta_abc", c.dependence.zeta_abc);
    const auto& sw = section(doc, "sweep");
    if (sw.contains("axes")) {
        std::vector<std::string> names;
        read_if(sw, "axes", names);
        c.sweep.axes.clear();
        for (const auto& name : names) c.sweep.axes.push_back(dependence_axis_from_string(name));
    }
    read_if(sw, "min", c.sweep.min);
    read_if(sw, "max", c.sweep.max);
    read_if(sw, "step", c.sweep.step);
    read_if(sw, "body_rho_ab", c.sweep.body_rho_ab);
    if (sw.contains("mode")) c.sweep.mode = figure1_mode_from_string(sw.at("mode").get<std::string>());
    const auto& col = section(doc, "collateral");
    read_if(col, "quality", c.collateral_quality);
    read_if(col, "rho_bc", c.collateral_rho_bc);
    const auto& mc = section(doc, "mc");
    read_if(mc, "paths", c.mc.paths);
    read_if(mc, "seed", c.mc.seed);
    read_if(mc, "substeps_per_year", c.mc.substeps_per_year);
    read_if(mc, "antithetic", c.mc.antithetic);
    read_if(mc, "regression_degree", c.mc.regression_degree);
    const auto& cal = section(doc, "calibration");
    read_if(cal, "recovery", c.calibration.recovery);
    read_if(cal, "frequency", c.calibration.frequency);
    read_if(cal, "fit_h0", c.calibration.fit_h0);
    read_if(cal, "stationary_shape", c.calibration.stationary_shape);
    read_if(cal, "enforce_feller", c.calibration.enforce_feller);
    read_if(cal, "max_rms_error", c.calibration.max_rms_error);
    read_if(cal, "max_iterations", c.calibration.max_iterations);
    read_if(cal, "restarts", c.calibration.restarts);
    c.validate();
    return c;
}

std::string ScenarioConfig::hash() const {
    auto copy = *this;
    copy.out_dir.clear();  // where results go does not change them
    const auto text = copy.to_json();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

ScenarioConfig load_scenario_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IOError("cannot open config " + file.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return ScenarioConfig::from_json(buf.str());
}

MarketSnapshot load_market(const ScenarioConfig& config) {
    return load_snapshot(config.market.empty() ? bundled_table1_path() : std::filesystem::path(config.market));
}

QualityModels::QualityModels(const MarketSnapshot& market, CalibrationConfig config)
    : market_(&market), config_(config) {}

const CalibrationResult& QualityModels::calibration(const CreditQuality& quality) {
    if (quality.riskfree) throw InvalidParams("a default-free party has no hazard model");
    auto it = fits_.find(quality.shift_bps);
    if (it == fits_.end()) {
        it = fits_.emplace(quality.shift_bps, calibrate_cir(market_->credit_curve, quality.shift_bps,
                                                            market_->discount_curve, config_))
                 .first;
    }
    return it->second;
}

std::optional<CIRParams> QualityModels::params(const CreditQuality& quality) {
    if (quality.riskfree) return std::nullopt;
    return calibration(quality).params;
}

TableReport run_table3(const ScenarioConfig& config, const MarketSnapshot& market) {
    return run_table(config, market, true);
}

TableReport run_table4(const ScenarioConfig& config, const MarketSnapshot& market) {
    return run_table(config, market, false);
}

double ols_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DimensionMismatch("slope inputs differ in length");
    if (x.size() < 2) throw InvalidParams("slope needs at least two points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(y.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (!(sxx > 0.0)) throw InvalidParams("slope needs at least two distinct x values");
    return sxy / sxx;
}

Figure1Report run_figure1(const ScenarioConfig& config, const MarketSnapshot& market) {
    config.validate();
    const auto contract = config.contract.contract();
    QualityModels models(market, config.calibration);
    const auto set = simulate_path_set(models.params(parse_quality(config.quality_a)),
                                       models.params(parse_quality(config.quality_b)),
                                       models.params(parse_quality(config.quality_c)), contract.schedule, config.mc);
    const auto context =
        std::make_shared<const PricingContext>(set, contract.schedule, market.discount_curve, config.mc);

    Figure1Report report;
    report.mode = config.sweep.mode;
    report.config_hash = config.hash();

    DependenceSpec base;
    if (config.sweep.mode == Figure1Mode::body) {
        const auto iv = path_set_feasible_interval(set, base, DependenceAxis::rho_ab).interval;
        if (iv.empty) throw AdmissibilityError("no admissible rho_ab for the body base point");
        base.rho_ab = std::clamp(config.sweep.body_rho_ab, iv.lo, iv.hi);
    }
    const auto base_result = solve(context, base, config.recoveries, contract.notional);
    report.base_premium = *base_result.breakeven_spread;

    for (const auto axis : config.sweep.axes) {
        SweepResult sweep;
        sweep.axis = axis;
        sweep.base = base;
        const auto feas = path_set_feasible_interval(set, base, axis);
        sweep.feasible = feas.interval;
        if (feas.interval.empty) {
            throw AdmissibilityError("base dependence is inadmissible along " + cds::to_string(axis));
        }
        const auto [lo, hi] = interior(feas.interval);
        std::map<double, ValuationResult> cache;
        cache.emplace(get(base, axis), base_result);
        for (const double nominal : config.sweep.grid()) {
            SweepPoint point;
            point.nominal = nominal;
            point.effective = std::clamp(nominal, lo, hi);
            point.clipped = point.effective != nominal;
            if (point.clipped) {
                const auto& binding = nominal < lo ? feas.lo_binding : feas.hi_binding;
                point.admissibility = admissibility_region(PeriodMarginals(binding[0], binding[1], binding[2]),
                                                           with(base, axis, nominal));
            }
            auto it = cache.find(point.effective);
            if (it == cache.end()) {
                it = cache.emplace(point.effective, solve(context, with(base, axis, point.effective),
                                                          config.recoveries, contract.notional))
                         .first;
            }
            point.breakeven = *it->second.breakeven_spread;
            point.std_error = *it->second.breakeven_std_error;
            sweep.points.push_back(std::move(point));
        }
        std::vector<double> xs, ys;
        for (const auto& [x, res] : cache) {
            xs.push_back(x);
            ys.push_back(*res.breakeven_spread * 1e4);
        }
        sweep.slope_bp = xs.size() >= 2 ? ols_slope(xs, ys) : 0.0;
        report.sweeps.push_back(std::move(sweep));
    }
    return report;
}

CollateralReport run_collateral_study(const ScenarioConfig& config, const MarketSnapshot& market) {
    config.validate();
    const auto contract = config.contract.contract();
    QualityModels models(market, config.calibration);
    const auto params = models.params(parse_quality(config.collateral_quality));
    const auto set = simulate_path_set(params, params, params, contract.schedule, config.mc);
    const auto context =
        std::make_shared<const PricingContext>(set, contract.schedule, market.discount_curve, config.mc);

    CollateralReport report;
    report.config_hash = config.hash();
    const auto feas = path_set_feasible_interval(set, DependenceSpec{}, DependenceAxis::rho_bc).interval;
    if (feas.empty) throw AdmissibilityError("independence is inadmissible along rho_BC");
    const auto [lo, hi] = interior(feas);
    const auto effective = [lo, hi](double rho) { return rho == 0.0 ? rho : std::clamp(rho, lo, hi); };
    auto make_row = [&](std::string label, double rho, const ValuationResult& res) {
        const auto& dec = *res.collateral;
        CollateralRow row;
        row.label = std::move(label);
        row.nominal_rho_bc = rho;
        row.rho_bc = effective(rho);
        row.clipped = row.rho_bc != rho;
        row.value = res.value;
        row.v_f = dec.v_f;
        row.psi = dec.psi;
        row.xi = dec.xi;
        row.residual = dec.residual;
        row.residual_stderr = dec.residual_std_error;
        row.significant = std::abs(dec.residual) > 3.0 * dec.residual_std_error;
        return row;
    };
    double widest = 0.0;
    for (const double rho : config.collateral_rho_bc) {
        const auto dep = with(DependenceSpec{}, DependenceAxis::rho_bc, effective(rho));
        const auto res =
            CollateralizedValuation(context, dep, config.recoveries, contract.notional).value(contract.spread);
        report.rows.push_back(make_row("contract", rho, res));
        if (std::abs(rho) > std::abs(widest)) widest = rho;
    }
    auto degenerate = config.recoveries;
    degenerate.phi_c = 1.0;
    const auto dep = with(DependenceSpec{}, DependenceAxis::rho_bc, effective(widest));
    const auto res = CollateralizedValuation(context, dep, degenerate, contract.notional).value(0.0);
    report.rows.push_back(make_row("mark_equals_default_payment", widest, res));
    return report;
}

std::string format_table(const TableReport& report) {
    std::ostringstream out;
    out << report.title << "\n";
    out << "config " << report.config_hash << "\n\n";
    out << std::left << std::setw(12) << "Party A" << std::setw(12) << "Party B" << std::right << std::setw(12)
        << "Premium" << std::setw(14) << "Difference" << std::setw(12) << "(stderr)" << "\n";
    for (const auto& r : report.rows) {
        out << std::left << std::setw(12) << r.party_a << std::setw(12) << r.party_b << std::right << std::setw(12)
            << fixed(r.premium, 5) << std::setw(13) << fixed(r.difference_bp / 100.0, 4) << "%" << std::setw(12)
            << ("(" + fixed(r.stderr_bp, 3) + "bp)") << "\n";
    }
    return out.str();
}

std::string format_figure1(const Figure1Report& report) {
    std::ostringstream out;
    out << "Dependence sensitivity of the breakeven premium (" << to_string(report.mode) << " base)\n";
    out << "config " << report.config_hash << "\n";
    out << "base premium " << fixed(report.base_premium, 5) << "\n\n";
    out << std::left << std::setw(10) << "axis" << std::right << std::setw(14) << "slope bp/unit" << std::setw(26)
        << "admissible range" << std::setw(10) << "clipped" << "\n";
    for (const auto& s : report.sweeps) {
        const auto clipped = std::count_if(s.points.begin(), s.points.end(), [](const auto& p) { return p.clipped; });
        out << std::left << std::setw(10) << cds::to_string(s.axis) << std::right << std::setw(14)
            << fixed(s.slope_bp, 3) << std::setw(26)
            << ("[" + fixed(s.feasible.lo, 6) + ", " + fixed(s.feasible.hi, 6) + "]") << std::setw(10) << clipped
            << "\n";
    }
    return out.str();
}

std::string format_collateral(const CollateralReport& report) {
    std::ostringstream out;
    out << "Fully collateralized value and residual exposure\n";
    out << "config " << report.config_hash << "\n\n";
    out << std::left << std::setw(30) << "case" << std::right << std::setw(8) << "rho_bc" << std::setw(10) << "effective" << std::setw(14) << "V"
        << std::setw(14) << "V^F" << std::setw(14) << "xi/psi" << std::setw(12) << "stderr" << std::setw(6) << "sig"
        << "\n";
    for (const auto& r : report.rows) {
        out << std::left << std::setw(30) << r.label << std::right << std::setw(8) << fixed(r.nominal_rho_bc, 2)
            << std::setw(10) << fixed(r.rho_bc, 6) << std::setw(14) << fixed(r.value, 8) << std::setw(14) << fixed(r.v_f, 8) << std::setw(14)
            << fixed(r.residual, 8) << std::setw(12) << fixed(r.residual_stderr, 8) << std::setw(6)
            << (r.significant ? "yes" : "no") << "\n";
    }
    return out.str();
}

void emit_report(const TableReport& report, const std::filesystem::path& dir, const std::string& stem) {
    if (report.rows.empty()) throw IOError("no table rows to write");
    auto csv = open_output(dir / (stem + ".csv"));
    csv << "# config_hash=" << report.config_hash << "\n";
    csv << "party_a,party_b,premium,difference_bp,stderr_bp\n";
    for (const auto& r : report.rows) {
        csv << r.party_a << ',' << r.party_b << ',' << fmt(r.premium) << ',' << fmt(r.difference_bp) << ','
            << fmt(r.stderr_bp) << "\n";
    }
    auto txt = open_output(dir / (stem + ".txt"));
    txt << format_table(report);
}

void emit_report(const Figure1Report& report, const std::filesystem::path& dir, const std::string& stem) {
    if (report.sweeps.empty()) throw IOError("no sweeps to write");
    auto csv = open_output(dir / (stem + ".csv"));
    csv << "# config_hash=" << report.config_hash << "\n";
    csv << "axis,nominal,effective,clipped,breakeven,stderr_bp,slope_bp,admissibility\n";
    for (const auto& s : report.sweeps) {
        for (const auto& p : s.points) {
            std::string note;
            if (p.admissibility) {
                note = p.admissibility->describe();
                std::replace(note.begin(), note.end(), ',', ';');
                std::replace(note.begin(), note.end(), '\n', ' ');
            }
            csv << cds::to_string(s.axis) << ',' << fmt(p.nominal) << ',' << fmt(p.effective) << ','
                << (p.clipped ? 1 : 0) << ',' << fmt(p.breakeven) << ',' << fmt(p.std_error * 1e4) << ','
                << fmt(s.slope_bp) << ',' << note << "\n";
        }
    }
    auto txt = open_output(dir / (stem + ".txt"));
    txt << format_figure1(report);
}

void emit_report(const CollateralReport& report, const std::filesystem::path& dir, const std::string& stem) {
    if (report.rows.empty()) throw IOError("no collateral rows to write");
    auto csv = open_output(dir / (stem + ".csv"));
    csv << "# config_hash=" << report.config_hash << "\n";
    csv << "case,nominal_rho_bc,rho_bc,clipped,value,v_f,psi,xi,residual,residual_stderr,significant\n";
    for (const auto& r : report.rows) {
        csv << r.label << ',' << fmt(r.nominal_rho_bc) << ',' << fmt(r.rho_bc) << ',' << (r.clipped ? 1 : 0) << ',' << fmt(r.value) << ',' << fmt(r.v_f) << ',' << fmt(r.psi)
            << ',' << fmt(r.xi) << ',' << fmt(r.residual) << ',' << fmt(r.residual_stderr) << ','
            << (r.significant ? 1 : 0) << "\n";
    }
    auto txt = open_output(dir / (stem + ".txt"));
    txt << format_collateral(report);
}

TableReport read_table_report(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IOError("cannot read " + file.string());
    TableReport report;
    std::string line;
    int line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line.front() == '#') {
            constexpr std::string_view key = "# config_hash=";
            if (line.starts_with(key)) report.config_hash = line.substr(key.size());
            continue;
        }
        const auto where = file.string() + ":" + std::to_string(line_no);
        if (!header) {
            if (line != "party_a,party_b,premium,difference_bp,stderr_bp") {
                throw ParseError(where + ": unexpected header '" + line + "'");
            }
            header = true;
            continue;
        }
        const auto f = split_csv(line);
        if (f.size() != 5) throw ParseError(where + ": expected 5 fields, got " + std::to_string(f.size()));
        report.rows.push_back({f[0], f[1], parse_number(f[2], where), parse_number(f[3], where),
                               parse_number(f[4], where)});
    }
    if (!header) throw ParseError(file.string() + ": missing header");
    return report;
}

}  // namespace cds
