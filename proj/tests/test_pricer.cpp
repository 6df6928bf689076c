#include "cds/error.hpp"
#include "cds/pricer.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace cds;

namespace {

MarketSnapshot table1() { return load_snapshot(bundled_table1_path()); }

Curve flat_interest(double rate) { return build_curve(CurveKind::interest, {{30, rate}, {7300, rate}}); }

CDSContract five_year(double spread) {
    CDSContract c;
    c.spread = spread;
    c.schedule = make_schedule(0.0, 5.0, 4);
    return c;
}

McConfig small_mc(std::size_t paths, std::uint64_t seed = 7) {
    McConfig mc;
    mc.paths = paths;
    mc.seed = seed;
    return mc;
}

RecoverySpec random_recoveries(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RecoverySpec r;
    r.phi_a = u(rng);
    r.phi_b = u(rng);
    r.phi_bar_a = u(rng);
    r.phi_bar_b = u(rng);
    r.phi_ab = u(rng);
    r.phi_c = u(rng);
    return r;
}

}  // namespace

TEST_CASE("schedules") {
    const auto s = make_schedule(0.0, 5.0, 4);
    CHECK(s.periods() == 20);
    CHECK(s.times.back() == 5.0);
    CHECK(s.accrual(0) == doctest::Approx(0.25));
    const auto stub = make_schedule(0.1, 1.0, 4);
    CHECK(stub.periods() == 4);
    CHECK(stub.accrual(0) == doctest::Approx(0.15));
    CHECK(stub.accrual(3) == doctest::Approx(0.25));
    CHECK_THROWS_AS(make_schedule(1.0, 1.0, 4), InvalidContract);
    CHECK_THROWS_AS(make_schedule(0.0, 1.0, 0), InvalidContract);
    CHECK_THROWS_AS((Schedule{{0.0, 0.5, 0.5}}.validate()), InvalidContract);
}

TEST_CASE("contracts and recoveries") {
    auto c = five_year(0.01);
    CHECK(c.premium_payment(0) == doctest::Approx(-0.0025));
    CHECK(default_payment(c, 0.4, 0) == doctest::Approx(0.6 - 0.00125));
    c.notional = 0.0;
    CHECK_THROWS_AS(c.validate(), InvalidContract);

    const auto one_way = RecoverySpec::from_rule(SettlementRule::one_way, 0.3, 0.5, 0.4);
    CHECK(one_way.phi_bar_a == 0.0);
    CHECK(one_way.phi_ab == doctest::Approx(0.15));
    CHECK(RecoverySpec{}.phi_ab == doctest::Approx(RecoverySpec{}.phi_a * RecoverySpec{}.phi_b));
    CHECK(settlement_rule_from_string(to_string(SettlementRule::two_way)) == SettlementRule::two_way);
    CHECK_THROWS_AS(settlement_rule_from_string("sideways"), ParseError);
    CHECK_THROWS_AS((RecoverySpec{1.2}.validate()), OutOfRange);
}

TEST_CASE("period factors reduce when the counterparties cannot default") {
    const PeriodMarginals m(1.0, 1.0, 0.97);
    const auto f = period_factors(m, {}, RecoverySpec{}, 0.99);
    CHECK(f.phi_b == doctest::Approx(0.99 * 0.97).epsilon(1e-15));
    CHECK(f.phi_a == doctest::Approx(0.99 * 0.97).epsilon(1e-15));
    CHECK(f.omega == doctest::Approx(0.99 * 0.03).epsilon(1e-15));
}

TEST_CASE("period factors collapse at unit recoveries") {
    std::mt19937_64 rng(17);
    const RecoverySpec full{1.0, 1.0, 1.0, 1.0, 1.0, 0.4};
    for (int trial = 0; trial < 200; ++trial) {
        const auto draw = oracle::draw_admissible(rng);
        const auto d = period_dependence(draw.marginals, draw.spec);
        const auto f = period_factors(draw.marginals, d, full, 0.98);
        CHECK(std::abs(f.phi_a - 0.98 * draw.marginals.p_c()) <= 1e-14);
        CHECK(std::abs(f.phi_b - 0.98 * draw.marginals.p_c()) <= 1e-14);
        CHECK(std::abs(f.omega - 0.98 * draw.marginals.q_c()) <= 1e-14);
    }
}

TEST_CASE("period factors equal the eight-state expectation") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> disc(0.9, 1.0);
    for (int trial = 0; trial < 3000; ++trial) {
        const auto draw = oracle::draw_admissible(rng);
        const auto rec = random_recoveries(rng);
        const double df = disc(rng);
        const auto d = period_dependence(draw.marginals, draw.spec);
        const auto f = period_factors(draw.marginals, d, rec, df);
        const auto ref = oracle::enumerate_factors(oracle::moment_matched_cells(draw.marginals, d), rec, df);
        CHECK(std::abs(f.phi_a - ref.phi_a) <= 1e-13);
        CHECK(std::abs(f.phi_b - ref.phi_b) <= 1e-13);
        CHECK(std::abs(f.omega - ref.omega) <= 1e-13);
        CHECK(f.omega >= -1e-15);
        CHECK(f.phi_a >= -1e-15);
        CHECK(f.phi_b >= -1e-15);
        CHECK(f.phi_a <= df + 1e-15);
        CHECK(f.phi_b <= df + 1e-15);
        CHECK(f.premium_factor(true) == f.phi_b);
        CHECK(f.premium_factor(false) == f.phi_a);
    }
}

TEST_CASE("inadmissible period inputs propagate") {
    const PeriodMarginals m(0.99, 0.99, 0.9);
    CHECK_THROWS_AS(period_factors(m, period_dependence(m, {0.0, 0.0, 1.0, 0.0}), RecoverySpec{}, 1.0),
                    AdmissibilityError);
}

TEST_CASE("direct risk-free pricing") {
    const auto rates = flat_interest(0.03);
    auto c = five_year(0.012);
    const SurvivalCurve alive(c.schedule.times.size(), 1.0);
    const auto none = price_riskfree(c, alive, rates, RecoverySpec{});
    double premium_only = 0.0;
    for (std::size_t i = 1; i < c.schedule.times.size(); ++i) {
        premium_only -= std::exp(-0.03 * c.schedule.times[i]) * 0.012 * 0.25;
    }
    CHECK(none.value == doctest::Approx(premium_only).epsilon(1e-13));
    CHECK(*none.breakeven_spread == 0.0);

    const auto survival = flat_hazard_survival_curve(0.025, c.schedule);
    const auto priced = price_riskfree(c, survival, rates, RecoverySpec{});
    CHECK(std::abs(priced.value - oracle::direct_riskfree_value(survival, rates, c.schedule, 0.012, 1.0, 0.4)) <=
          1e-12);
    double legs = 0.0;
    for (const auto& leg : priced.legs) legs += leg.premium + leg.protection;
    CHECK(legs == doctest::Approx(priced.value).epsilon(1e-12));
    CHECK(*priced.breakeven_spread == doctest::Approx(riskfree_breakeven_spread(0.025, rates, 0.4, c.schedule)));

    CHECK_THROWS_AS(price_riskfree(c, SurvivalCurve(3, 1.0), rates, RecoverySpec{}), GridMismatch);
}

TEST_CASE("the calibrated A+200bps model prices the 5y contract near 0.027") {
    const auto snap = table1();
    const auto fit = calibrate_cir(snap.credit_curve, 200.0, snap.discount_curve);
    const auto c = five_year(0.027);
    const auto res = price_riskfree(c, cir_survival_curve(fit.params, c.schedule), snap.discount_curve, RecoverySpec{});
    CHECK(std::abs(*res.breakeven_spread - 0.027) <= 1e-4);
}

TEST_CASE("trilateral pricing with default-free counterparties matches the direct formula") {
    const auto snap = table1();
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> ua(0.05, 1.0), ub(0.005, 0.05), uh(0.002, 0.06), ushape(5.0, 40.0);
    const auto c = five_year(0.02);
    // Weekly full-truncation steps bias survival by up to about 2e-4 of notional
    // when a is near 1, which is many standard errors at this path count.
    McConfig mc = small_mc(4000);
    mc.substeps_per_year = 2600;
    for (int trial = 0; trial < 20; ++trial) {
        CIRParams p;
        p.a = ua(rng);
        p.b = ub(rng);
        p.h0 = uh(rng);
        p.sigma = std::sqrt(2.0 * p.a * p.b / ushape(rng));
        mc.seed = 100 + trial;
        const auto set = simulate_path_set(std::nullopt, std::nullopt, p, c.schedule, mc);
        const auto risky = price_trilateral(c, set, {}, RecoverySpec{}, snap.discount_curve, mc);
        const auto direct =
            price_riskfree(c, cir_survival_curve(p, c.schedule), snap.discount_curve, RecoverySpec{});
        CHECK(std::abs(risky.value - direct.value) <= 3.0 * risky.std_error);
    }
}

TEST_CASE("zero volatility removes all randomness") {
    const auto snap = table1();
    const auto c = five_year(0.02);
    const CIRParams p{0.3, 0.04, 0.0, 0.02};
    const auto set = simulate_path_set(std::nullopt, std::nullopt, p, c.schedule, small_mc(64));
    const auto risky = price_trilateral(c, set, {}, RecoverySpec{}, snap.discount_curve, small_mc(64), true);
    const auto direct = price_riskfree(c, sample_survival_curve(*set.c), snap.discount_curve, RecoverySpec{});
    CHECK(std::abs(risky.value - direct.value) <= 1e-10);
    CHECK(std::abs(*risky.breakeven_spread - *direct.breakeven_spread) <= 1e-10);
    CHECK(risky.std_error <= 1e-12);
}

TEST_CASE("value is affine in the premium when the decision cannot matter") {
    const auto snap = table1();
    const auto c = five_year(0.0);
    const auto set = simulate_path_set(std::nullopt, std::nullopt, CIRParams{0.2, 0.03, 0.02, 0.02}, c.schedule,
                                       small_mc(2000));
    const auto ctx = std::make_shared<const PricingContext>(set, c.schedule, snap.discount_curve, small_mc(2000));
    const TrilateralValuation val(ctx, {}, RecoverySpec{}, 1.0);
    const double v1 = val.mean_value(0.0), v2 = val.mean_value(0.05);
    for (int k = 0; k < 10; ++k) {
        const double s = -0.02 + 0.011 * k;
        CHECK(std::abs(val.mean_value(s) - (v1 + (v2 - v1) * s / 0.05)) <= 1e-10);
    }
    const double interpolated = -v1 * 0.05 / (v2 - v1);
    const auto be = val.breakeven();
    CHECK(std::abs(*be.breakeven_spread - interpolated) <= 1e-10);
    CHECK(std::abs(be.value) <= 1e-8);
}

TEST_CASE("a default-free reference entity has a zero breakeven") {
    const auto snap = table1();
    const auto c = five_year(0.01);
    const auto set = simulate_path_set(std::nullopt, std::nullopt, std::nullopt, c.schedule, small_mc(100));
    const auto res = price_trilateral(c, set, {}, RecoverySpec{}, snap.discount_curve, small_mc(100), true);
    CHECK(std::abs(*res.breakeven_spread) <= 1e-12);
}

TEST_CASE("root finding") {
    const auto sol = solve_breakeven([](double s) { return 0.03 - 2.0 * s; });
    CHECK(sol.spread == doctest::Approx(0.015).epsilon(1e-14));
    CHECK(sol.slope == doctest::Approx(-2.0));
    const auto curved = solve_breakeven([](double s) { return std::exp(-s) - 0.5; });
    CHECK(curved.spread == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK_THROWS_AS(solve_breakeven([](double) { return 1.0; }), NoBracket);
    CHECK_THROWS_AS(solve_breakeven([](double s) { return 1.0 + s * s; }), NoBracket);
}

TEST_CASE("risky counterparties: determinism, legs and diagnostics") {
    const auto snap = table1();
    const auto c = five_year(0.027);
    const CIRParams pa{0.04, 0.08, 0.018, 0.02}, pb{0.06, 0.05, 0.016, 0.007}, pc{0.03, 0.12, 0.018, 0.04};
    const auto mc = small_mc(3000);
    const auto set = simulate_path_set(pa, pb, pc, c.schedule, mc);
    const DependenceSpec dep{0.1, 0.05, 0.1, 0.0};
    const auto x = price_trilateral(c, set, dep, RecoverySpec{}, snap.discount_curve, mc, true);
    const auto y = price_trilateral(c, simulate_path_set(pa, pb, pc, c.schedule, mc), dep, RecoverySpec{},
                                    snap.discount_curve, mc, true);
    CHECK(x.value == y.value);
    CHECK(*x.breakeven_spread == *y.breakeven_spread);
    CHECK(x.path_values == y.path_values);

    CHECK(x.std_error > 0.0);
    CHECK(x.diagnostics.paths == 3000);
    CHECK(x.diagnostics.r_squared.size() == 19);
    CHECK(x.diagnostics.degrees.size() == 19);
    double legs = 0.0;
    for (const auto& leg : x.legs) legs += leg.premium + leg.protection;
    CHECK(legs == doctest::Approx(x.value).epsilon(1e-10));
    CHECK(*x.breakeven_spread > 0.02);
    CHECK(*x.breakeven_spread < 0.035);
    CHECK(*x.breakeven_std_error > 0.0);
}

TEST_CASE("few paths lower the regression degree and say so") {
    const auto snap = table1();
    const auto c = five_year(0.027);
    const auto mc = small_mc(60);
    const auto set = simulate_path_set(CIRParams{0.04, 0.08, 0.018, 0.02}, CIRParams{0.06, 0.05, 0.016, 0.007},
                                       CIRParams{0.03, 0.12, 0.018, 0.04}, c.schedule, mc);
    const auto res = price_trilateral(c, set, {}, RecoverySpec{}, snap.discount_curve, mc);
    CHECK(res.diagnostics.fallbacks == 19);
    REQUIRE_FALSE(res.diagnostics.notes.empty());
}

TEST_CASE("grid mismatches and inadmissible paths are reported") {
    const auto snap = table1();
    const auto c = five_year(0.027);
    const auto mc = small_mc(50);
    const auto other = make_schedule(0.0, 3.0, 4);
    const auto wrong = simulate_path_set(std::nullopt, std::nullopt, CIRParams{}, other, mc);
    CHECK_THROWS_AS(price_trilateral(c, wrong, {}, RecoverySpec{}, snap.discount_curve, mc), GridMismatch);

    const auto set = simulate_path_set(CIRParams{0.1, 0.01, 0.01, 0.01}, CIRParams{0.1, 0.01, 0.01, 0.01},
                                       CIRParams{0.1, 0.2, 0.01, 0.2}, c.schedule, mc);
    try {
        price_trilateral(c, set, {0.0, 0.0, 1.0, 0.0}, RecoverySpec{}, snap.discount_curve, mc);
        FAIL("expected AdmissibilityError");
    } catch (const AdmissibilityError& e) {
        CHECK(std::string(e.what()).find("path 0, period") == 0);
    }
}

TEST_CASE("antithetic standard errors treat each pair as one draw") {
    const std::vector<double> pairs{1.0, -1.0, 2.0, -2.0, 3.0, -3.0};
    const auto anti = sample_stats(pairs, true);
    CHECK(anti.mean == 0.0);
    CHECK(anti.std_error == 0.0);
    const auto plain = sample_stats(pairs, false);
    CHECK(plain.std_error > 0.0);
    CHECK(paired_std_error(pairs, pairs, false) == 0.0);
}

TEST_CASE("full collateralization: independence, identity and the degenerate contract") {
    const auto snap = table1();
    const auto c = five_year(0.027);
    const CIRParams p{0.056, 0.046, 0.016, 0.0066};
    const auto mc = small_mc(4000);
    const auto set = simulate_path_set(p, p, p, c.schedule, mc);

    const auto indep = price_collateralized(c, set, {}, RecoverySpec{}, snap.discount_curve, mc);
    REQUIRE(indep.collateral);
    CHECK(indep.collateral->xi == 0.0);
    CHECK(indep.collateral->residual == 0.0);
    CHECK(indep.value == indep.collateral->v_f);

    const auto wrong_way = price_collateralized(c, set, {0.0, 0.0, 0.5, 0.0}, RecoverySpec{}, snap.discount_curve, mc);
    const auto& dec = *wrong_way.collateral;
    CHECK(wrong_way.value == dec.v_f + dec.xi / dec.psi);
    CHECK(dec.residual == dec.xi / dec.psi);
    CHECK(dec.psi > 0.0);
    CHECK(dec.psi <= 1.0);
    CHECK(dec.residual < 0.0);
    CHECK(std::abs(dec.residual) > 3.0 * dec.residual_std_error);

    RecoverySpec full_recovery;
    full_recovery.phi_c = 1.0;
    auto zero_premium = c;
    zero_premium.spread = 0.0;
    const auto degenerate =
        price_collateralized(zero_premium, set, {0.0, 0.0, 0.5, 0.0}, full_recovery, snap.discount_curve, mc);
    CHECK(degenerate.collateral->residual == 0.0);

    CHECK_THROWS_AS(price_collateralized(c, set, {}, RecoverySpec{}, snap.discount_curve, mc, 0.01), InvalidContract);
}

TEST_CASE("collateralized value on deterministic hazards matches the conditional-law oracle") {
    const auto snap = table1();
    CDSContract c;
    c.spread = 0.02;
    c.schedule = make_schedule(0.0, 0.5, 4);
    const auto mc = small_mc(4);
    const auto set = simulate_path_set(CIRParams{0.2, 0.05, 0.0, 0.04}, CIRParams{0.2, 0.03, 0.0, 0.03},
                                       CIRParams{0.2, 0.08, 0.0, 0.06}, c.schedule, mc);
    const PricingContext ctx(set, c.schedule, snap.discount_curve, mc);
    std::vector<PeriodMarginals> marginals;
    std::vector<double> discount;
    for (std::size_t j = 0; j < c.schedule.periods(); ++j) {
        marginals.emplace_back(period_survival(*set.a, 0, j), period_survival(*set.b, 0, j),
                               period_survival(*set.c, 0, j));
        discount.push_back(ctx.discount(j));
    }
    // Each axis in turn is placed at a fixed fraction of its range feasible in every period.
    const auto inside = [&](std::array<double, 4> fractions) {
        DependenceSpec spec;
        for (const auto axis : kAllAxes) {
            double lo = -1.0, hi = 1.0;
            for (const auto& m : marginals) {
                const auto iv = exact_feasible_interval(m, spec, axis);
                lo = std::max(lo, iv.lo);
                hi = std::min(hi, iv.hi);
            }
            REQUIRE(lo < hi);
            spec = with(spec, axis, lo + fractions[static_cast<int>(axis)] * (hi - lo));
        }
        return spec;
    };
    for (const DependenceSpec dep : {DependenceSpec{}, inside({0.6, 0.7, 0.8, 0.5}), inside({0.5, 0.2, 0.9, 0.3})}) {
        const auto res = price_collateralized(c, set, dep, RecoverySpec{}, snap.discount_curve, mc);
        const double expected =
            oracle::collateralized_value_deterministic(marginals, dep, discount, c.schedule, 0.02, 1.0, 0.4);
        CHECK(std::abs(res.value - expected) <= 1e-13);
    }
}

TEST_CASE("path-set admissible range") {
    const auto c = five_year(0.027);
    const CIRParams p{0.056, 0.046, 0.016, 0.0066};
    const auto set = simulate_path_set(p, p, p, c.schedule, small_mc(500));
    const auto feas = path_set_feasible_interval(set, {}, DependenceAxis::rho_bc);
    REQUIRE_FALSE(feas.interval.empty);
    CHECK(feas.interval.lo < 0.0);
    CHECK(feas.interval.hi > 0.0);
    CHECK(feas.interval.hi < 1.0);
    const PeriodMarginals binding(feas.hi_binding[0], feas.hi_binding[1], feas.hi_binding[2]);
    const auto single = exact_feasible_interval(binding, {}, DependenceAxis::rho_bc);
    CHECK(single.hi == doctest::Approx(feas.interval.hi).epsilon(1e-12));
}
