#include "cds/error.hpp"
#include "cds/experiments.hpp"
#include "cds/hazard.hpp"
#include "cds/pricer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using nlohmann::json;

struct CommonOptions {
    std::string market;
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
    std::string out_dir;
};

void add_common(CLI::App* app, CommonOptions& opts) {
    app->add_option("--market", opts.market, "Market snapshot (CSV or JSON); defaults to the bundled table");
    app->add_option("--config", opts.config, "Scenario config JSON");
    app->add_option("--seed", opts.seed, "Random seed");
    app->add_option("--paths", opts.paths, "Monte Carlo paths");
    app->add_option("--out-dir", opts.out_dir, "Output directory");
}

cds::ScenarioConfig resolve(const CommonOptions& opts) {
    auto config = opts.config.empty() ? cds::ScenarioConfig{} : cds::load_scenario_config(opts.config);
    if (!opts.market.empty()) config.market = opts.market;
    if (opts.seed) config.mc.seed = *opts.seed;
    if (opts.paths) config.mc.paths = *opts.paths;
    if (!opts.out_dir.empty()) config.out_dir = opts.out_dir;
    config.validate();
    return config;
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw cds::IOError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw cds::ParseError(path + ": " + e.what());
    }
}

json params_json(const cds::CIRParams& p) {
    return {{"a", p.a}, {"b", p.b}, {"sigma", p.sigma}, {"h0", p.h0}, {"feller", p.feller()}};
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw cds::IOError("cannot write " + path);
    out << text;
}

int run_calibrate(const CommonOptions& opts, const std::string& quality_text, double recovery,
                  const std::string& out) {
    auto config = resolve(opts);
    config.calibration.recovery = recovery;
    const auto market = cds::load_market(config);
    const auto quality = cds::parse_quality(quality_text);
    if (quality.riskfree) throw cds::InvalidParams("nothing to calibrate for a default-free party");
    cds::QualityModels models(market, config.calibration);
    const auto& fit = models.calibration(quality);
    json doc;
    doc["quality"] = quality.label();
    doc["recovery"] = recovery;
    doc["params"] = params_json(fit.params);
    doc["rms_error"] = fit.rms_error;
    doc["objective"] = fit.objective;
    doc["iterations"] = fit.iterations;
    json nodes = json::array();
    for (std::size_t i = 0; i < fit.terms.size(); ++i) {
        nodes.push_back({{"term", fit.terms[i]}, {"market", fit.market_spreads[i]}, {"model", fit.model_spreads[i]}});
    }
    doc["nodes"] = nodes;
    write_text(out, doc.dump(2) + "\n");
    return 0;
}

struct PriceOptions {
    std::string contract;
    std::string dependence;
    std::string collateral;
    bool breakeven = false;
    std::string quality_a = "A+100bps";
    std::string quality_b = "A";
    std::string quality_c = "A+200bps";
    std::string export_paths;
    std::string legs_csv;
    std::string out;
};

cds::ContractTemplate contract_from_json(const json& doc, cds::RecoverySpec& rec) {
    cds::ContractTemplate t;
    t.notional = doc.value("notional", t.notional);
    t.spread = doc.value("spread", t.spread);
    t.start = doc.value("start", t.start);
    t.maturity = doc.value("maturity", t.maturity);
    t.frequency = doc.value("frequency", t.frequency);
    if (doc.contains("recovery")) {
        const auto& r = doc.at("recovery");
        if (r.contains("settlement")) {
            rec = cds::RecoverySpec::from_rule(cds::settlement_rule_from_string(r.at("settlement")),
                                               r.value("phi_a", 0.4), r.value("phi_b", 0.4), r.value("phi_c", 0.4));
        }
        rec.phi_a = r.value("phi_a", rec.phi_a);
        rec.phi_b = r.value("phi_b", rec.phi_b);
        rec.phi_bar_a = r.value("phi_bar_a", rec.phi_bar_a);
        rec.phi_bar_b = r.value("phi_bar_b", rec.phi_bar_b);
        rec.phi_ab = r.value("phi_ab", rec.phi_ab);
        rec.phi_c = r.value("phi_c", rec.phi_c);
    }
    if (doc.contains("settlement")) {
        const auto rule = cds::settlement_rule_from_string(doc.at("settlement"));
        rec.phi_bar_a = rec.phi_bar_b = rule == cds::SettlementRule::two_way ? 1.0 : 0.0;
    }
    rec.validate();
    return t;
}

json result_json(const cds::ValuationResult& r) {
    json doc;
    doc["value"] = r.value;
    doc["std_error"] = r.std_error;
    doc["spread"] = r.spread;
    if (r.breakeven_spread) doc["breakeven_spread"] = *r.breakeven_spread;
    if (r.breakeven_std_error) doc["breakeven_std_error"] = *r.breakeven_std_error;
    if (r.collateral) {
        const auto& c = *r.collateral;
        doc["collateral"] = {{"v_f", c.v_f},       {"psi", c.psi},
                             {"xi", c.xi},         {"residual", c.residual},
                             {"residual_std_error", c.residual_std_error}};
    }
    const auto& d = r.diagnostics;
    doc["diagnostics"] = {{"paths", d.paths},         {"seed", d.seed},       {"antithetic", d.antithetic},
                          {"r_squared", d.r_squared}, {"degrees", d.degrees}, {"fallbacks", d.fallbacks},
                          {"notes", d.notes}};
    return doc;
}

int run_price(const CommonOptions& opts, const PriceOptions& p) {
    auto config = resolve(opts);
    auto rec = config.recoveries;
    auto tmpl = config.contract;
    if (!p.contract.empty()) tmpl = contract_from_json(read_json(p.contract), rec);
    const auto contract = tmpl.contract();
    auto dependence = config.dependence;
    if (!p.dependence.empty()) {
        const auto doc = read_json(p.dependence);
        dependence.rho_ab = doc.value("rho_ab", 0.0);
        dependence.rho_ac = doc.value("rho_ac", 0.0);
        dependence.rho_bc = doc.value("rho_bc", 0.0);
        dependence.zeta_abc = doc.value("zeta_abc", 0.0);
        dependence.validate();
    }
    if (!p.collateral.empty() && p.collateral != "full") {
        throw cds::InvalidContract("only --collateral full is supported");
    }
    const auto market = cds::load_market(config);
    cds::QualityModels models(market, config.calibration);
    const auto set = cds::simulate_path_set(models.params(cds::parse_quality(p.quality_a)),
                                            models.params(cds::parse_quality(p.quality_b)),
                                            models.params(cds::parse_quality(p.quality_c)), contract.schedule,
                                            config.mc);
    if (!p.export_paths.empty()) {
        cds::write_paths_binary(*set.a, p.export_paths + "_a.bin");
        cds::write_paths_binary(*set.b, p.export_paths + "_b.bin");
        cds::write_paths_binary(*set.c, p.export_paths + "_c.bin");
    }
    const auto result = p.collateral == "full"
                            ? cds::price_collateralized(contract, set, dependence, rec, market.discount_curve, config.mc)
                            : cds::price_trilateral(contract, set, dependence, rec, market.discount_curve, config.mc,
                                                    p.breakeven);
    if (!p.legs_csv.empty()) {
        std::ostringstream csv;
        csv << "time,premium,protection\n";
        for (const auto& leg : result.legs) csv << leg.time << ',' << leg.premium << ',' << leg.protection << '\n';
        write_text(p.legs_csv, csv.str());
    }
    write_text(p.out, result_json(result).dump(2) + "\n");
    return 0;
}

int run_experiment(const CommonOptions& opts, const std::string& which) {
    const auto config = resolve(opts);
    const auto market = cds::load_market(config);
    const std::filesystem::path dir = config.out_dir;
    if (which == "table3" || which == "table4") {
        const auto report = which == "table3" ? cds::run_table3(config, market) : cds::run_table4(config, market);
        cds::emit_report(report, dir, which);
        std::cout << cds::format_table(report);
    } else if (which == "figure1") {
        const auto report = cds::run_figure1(config, market);
        cds::emit_report(report, dir, which);
        std::cout << cds::format_figure1(report);
    } else {
        const auto report = cds::run_collateral_study(config, market);
        cds::emit_report(report, dir, which);
        std::cout << cds::format_collateral(report);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Counterparty-risky CDS pricing and experiments"};
    app.require_subcommand(1);

    CommonOptions common;
    std::string quality = "A";
    double recovery = 0.4;
    std::string calib_out;
    auto* calibrate = app.add_subcommand("calibrate", "Fit CIR hazard parameters to a credit quality");
    add_common(calibrate, common);
    calibrate->add_option("--quality", quality, "A or A+<n>bps");
    calibrate->add_option("--recovery", recovery, "Reference recovery used in the fit");
    calibrate->add_option("--out", calib_out, "Write JSON here instead of stdout");

    PriceOptions price_opts;
    auto* price = app.add_subcommand("price", "Value one contract");
    add_common(price, common);
    price->add_option("--contract", price_opts.contract, "Contract JSON");
    price->add_option("--dependence", price_opts.dependence, "Dependence JSON");
    price->add_option("--collateral", price_opts.collateral, "Collateral mode (full)");
    price->add_flag("--breakeven", price_opts.breakeven, "Also solve the breakeven premium");
    price->add_option("--quality-a", price_opts.quality_a, "Buyer credit quality");
    price->add_option("--quality-b", price_opts.quality_b, "Seller credit quality");
    price->add_option("--quality-c", price_opts.quality_c, "Reference entity credit quality");
    price->add_option("--export-paths", price_opts.export_paths, "Dump hazard paths to <prefix>_{a,b,c}.bin");
    price->add_option("--legs-csv", price_opts.legs_csv, "Per-period leg values CSV");
    price->add_option("--out", price_opts.out, "Write JSON here instead of stdout");

    std::vector<std::pair<std::string, CLI::App*>> experiments;
    for (const auto& [name, help] : {std::pair{"table3", "Buyer credit quality impact"},
                                     std::pair{"table4", "Seller credit quality impact"},
                                     std::pair{"figure1", "Dependence sensitivity sweeps"},
                                     std::pair{"collateral", "Full collateralization study"}}) {
        auto* sub = app.add_subcommand(name, help);
        add_common(sub, common);
        experiments.emplace_back(name, sub);
    }

    CLI11_PARSE(app, argc, argv);
    try {
        if (*calibrate) return run_calibrate(common, quality, recovery, calib_out);
        if (*price) return run_price(common, price_opts);
        for (const auto& [name, sub] : experiments) {
            if (*sub) return run_experiment(common, name);
        }
    } catch (const cds::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
