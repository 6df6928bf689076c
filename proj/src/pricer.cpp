#include "cds/pricer.hpp"

#include "cds/detail/parallel.hpp"
#include "cds/error.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cds {

namespace {

void check_unit(double x, const char* name) {
    if (!(x >= 0.0 && x <= 1.0)) {
        throw OutOfRange(std::string(name) + " must lie in [0, 1], got " + std::to_string(x));
    }
}

double survival_of(const HazardPaths& paths, std::size_t path, std::size_t j) {
    return paths.is_zero() ? 1.0 : std::exp(-paths.integrated(path, j));
}

PeriodMarginals marginals_at(const HazardPathSet& set, std::size_t path, std::size_t j) {
    return PeriodMarginals(survival_of(*set.a, path, j), survival_of(*set.b, path, j),
                           survival_of(*set.c, path, j));
}

std::string where(std::size_t path, std::size_t j) {
    return "path " + std::to_string(path) + ", period " + std::to_string(j);
}

}  // namespace

std::string to_string(SettlementRule rule) {
    return rule == SettlementRule::one_way ? "one_way" : "two_way";
}

SettlementRule settlement_rule_from_string(const std::string& name) {
    if (name == "one_way" || name == "one-way") return SettlementRule::one_way;
    if (name == "two_way" || name == "two-way") return SettlementRule::two_way;
    throw ParseError("unknown settlement rule '" + name + "' (expected one_way or two_way)");
}

void RecoverySpec::validate() const {
    check_unit(phi_a, "phi_a");
    check_unit(phi_b, "phi_b");
    check_unit(phi_bar_a, "phi_bar_a");
    check_unit(phi_bar_b, "phi_bar_b");
    check_unit(phi_ab, "phi_ab");
    check_unit(phi_c, "phi_c");
}

RecoverySpec RecoverySpec::from_rule(SettlementRule rule, double phi_a, double phi_b, double phi_c) {
    const double bar = rule == SettlementRule::two_way ? 1.0 : 0.0;
    RecoverySpec r{phi_a, phi_b, bar, bar, phi_a * phi_b, phi_c};
    r.validate();
    return r;
}

void CDSContract::validate() const {
    if (!(notional > 0.0) || !std::isfinite(notional)) throw InvalidContract("notional must be positive");
    if (!std::isfinite(spread)) throw InvalidContract("spread must be finite");
    schedule.validate();
}

double default_payment(const CDSContract& contract, double phi_c, std::size_t j) {
    const double accrued = contract.spread * contract.notional * contract.schedule.accrual(j) / 2.0;
    return contract.notional * (1.0 - phi_c) - accrued;
}

void HazardPathSet::validate(const Schedule& schedule) const {
    if (!a || !b || !c) throw GridMismatch("path set is missing a party");
    for (const auto* p : {a.get(), b.get(), c.get()}) {
        if (p->grid() != schedule.times) throw GridMismatch("path grid differs from the payment schedule");
        if (p->n_paths() != c->n_paths()) throw GridMismatch("parties have different path counts");
    }
}

std::shared_ptr<const HazardPaths> simulate_party(const std::optional<CIRParams>& params, const Schedule& schedule,
                                                  const McConfig& mc, std::uint64_t stream) {
    if (!params) return std::make_shared<const HazardPaths>(HazardPaths::zero(schedule.times, mc.paths));
    return std::make_shared<const HazardPaths>(simulate_paths(
        *params, schedule.times, mc.paths, mc.seed, SimulationConfig{mc.substeps_per_year, mc.antithetic}, stream));
}

HazardPathSet simulate_path_set(const std::optional<CIRParams>& a, const std::optional<CIRParams>& b,
                                const std::optional<CIRParams>& c, const Schedule& schedule, const McConfig& mc) {
    schedule.validate();
    return HazardPathSet{simulate_party(a, schedule, mc, kStreamA), simulate_party(b, schedule, mc, kStreamB),
                         simulate_party(c, schedule, mc, kStreamC)};
}

RiskyPeriodFactors period_factors(const PeriodMarginals& m, const PeriodDependence& d, const RecoverySpec& r,
                                  double discount) {
    const auto cells = trivariate_cells(m, d);
    if (!cells_admissible(cells)) trivariate_joint(m, d);  // throws with the offending cells

    const double pa = m.p_a(), pb = m.p_b(), pc = m.p_c();
    const double qa = m.q_a(), qb = m.q_b(), qc = m.q_c();
    const double sab = d.sigma_ab, sac = d.sigma_ac, sbc = d.sigma_bc, th = d.theta_abc;

    RiskyPeriodFactors f;
    f.discount = discount;
    f.phi_a = (pa * pb * pc + qa * pb * pc * r.phi_a + pa * qb * pc * r.phi_bar_a + qa * qb * pc * r.phi_ab +
               pc * sab * (1.0 - r.phi_a - r.phi_bar_a + r.phi_ab) +
               sac * (pb * (1.0 - r.phi_a) + qb * (r.phi_bar_a - r.phi_ab)) +
               sbc * (pa * (1.0 - r.phi_bar_a) + qa * (r.phi_a - r.phi_ab)) +
               th * (-1.0 + r.phi_bar_a - r.phi_ab + r.phi_a)) *
              discount;
    f.phi_b = (pa * pb * pc + qa * pb * pc * r.phi_bar_b + pa * qb * pc * r.phi_b + qa * qb * pc * r.phi_ab +
               pc * sab * (1.0 - r.phi_b - r.phi_bar_b + r.phi_ab) +
               sac * (pb * (1.0 - r.phi_bar_b) + qb * (r.phi_b - r.phi_ab)) +
               sbc * (pa * (1.0 - r.phi_b) + qa * (r.phi_bar_b - r.phi_ab)) +
               th * (-1.0 + r.phi_bar_b - r.phi_ab + r.phi_b)) *
              discount;
    f.omega = (pa * pb * qc + qa * pb * qc * r.phi_bar_b + pa * qb * qc * r.phi_b + qa * qb * qc * r.phi_ab +
               qc * sab * (1.0 - r.phi_b - r.phi_bar_b + r.phi_ab) -
               sac * (pb * (1.0 - r.phi_bar_b) + qb * (r.phi_b - r.phi_ab)) -
               sbc * (pa * (1.0 - r.phi_b) + qa * (r.phi_bar_b - r.phi_ab)) +
               th * (1.0 - r.phi_bar_b + r.phi_ab - r.phi_b)) *
              discount;
    return f;
}

SampleStats sample_stats(std::span<const double> values, bool antithetic) {
    SampleStats out;
    const std::size_t n = values.size();
    if (n == 0) return out;
    const std::size_t width = antithetic ? 2 : 1;
    const std::size_t units = (n + width - 1) / width;
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t u = 0; u < units; ++u) {
        const std::size_t begin = u * width, end = std::min(n, begin + width);
        double x = 0.0;
        for (std::size_t i = begin; i < end; ++i) x += values[i];
        x /= static_cast<double>(end - begin);
        sum += x;
        sum_sq += x * x;
    }
    out.mean = 0.0;
    for (double v : values) out.mean += v;
    out.mean /= static_cast<double>(n);
    if (units > 1) {
        const double unit_mean = sum / static_cast<double>(units);
        const double var = std::max(0.0, (sum_sq - units * unit_mean * unit_mean) / static_cast<double>(units - 1));
        out.std_error = std::sqrt(var / static_cast<double>(units));
    }
    return out;
}

double paired_std_error(std::span<const double> a, std::span<const double> b, bool antithetic) {
    if (a.size() != b.size()) throw DimensionMismatch("paired samples differ in length");
    std::vector<double> diff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
    return sample_stats(diff, antithetic).std_error;
}

double breakeven_delta_std_error(const ValuationResult& x, const ValuationResult& y, bool antithetic) {
    if (!x.breakeven_slope || !y.breakeven_slope) throw InvalidParams("both results need a solved breakeven");
    std::vector<double> ix(x.path_values.size()), iy(y.path_values.size());
    for (std::size_t i = 0; i < ix.size(); ++i) ix[i] = x.path_values[i] / -*x.breakeven_slope;
    for (std::size_t i = 0; i < iy.size(); ++i) iy[i] = y.path_values[i] / -*y.breakeven_slope;
    return paired_std_error(ix, iy, antithetic);
}

BreakevenSolution solve_breakeven(const std::function<double(double)>& value, double s0, double s1) {
    BreakevenSolution out;
    auto f = [&](double s) {
        ++out.evaluations;
        return value(s);
    };
    const double v0 = f(s0), v1 = f(s1);
    double slope = (v1 - v0) / (s1 - s0);
    if (!(slope != 0.0) || !std::isfinite(slope)) throw NoBracket("value does not depend on the premium");
    const double guess = s1 - v1 / slope;
    constexpr double limit = 10.0;
    double h = std::max(1e-7, 1e-4 * std::abs(guess));
    double lo = guess - h, hi = guess + h;
    double flo = f(lo), fhi = f(hi);
    while (flo * fhi > 0.0) {
        h *= 4.0;
        if (h > 2.0 * limit) throw NoBracket("no sign change of the value within |s| <= 10");
        lo = guess - h;
        hi = guess + h;
        flo = f(lo);
        fhi = f(hi);
    }
    if (flo == 0.0 || fhi == 0.0) {
        out.spread = flo == 0.0 ? lo : hi;
    } else {
        std::uintmax_t max_iter = 60;
        const auto bracket = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi,
                                                               boost::math::tools::eps_tolerance<double>(48),
                                                               max_iter);
        out.spread = 0.5 * (bracket.first + bracket.second);
    }
    out.slope = (fhi - flo) / (hi - lo);
    out.residual = f(out.spread);
    return out;
}

PricingContext::PricingContext(HazardPathSet paths, Schedule schedule, const Curve& discount_curve, McConfig mc)
    : paths_(std::move(paths)), schedule_(std::move(schedule)), mc_(mc) {
    schedule_.validate();
    paths_.validate(schedule_);
    discount_.resize(schedule_.periods());
    for (std::size_t j = 0; j < discount_.size(); ++j) {
        discount_[j] = discount_factor(discount_curve, schedule_.times[j], schedule_.times[j + 1]);
    }
}

const ContinuationRegressor& PricingContext::regressor(std::size_t k) const {
    std::call_once(regressors_once_, [this] {
        const std::size_t m = periods();
        const std::size_t n = n_paths();
        regressors_.resize(m);
        for (std::size_t date = 1; date < m; ++date) {
            Eigen::MatrixXd state(static_cast<Eigen::Index>(n), 3);
            for (std::size_t i = 0; i < n; ++i) {
                state(static_cast<Eigen::Index>(i), 0) = paths_.a->hazard(i, date);
                state(static_cast<Eigen::Index>(i), 1) = paths_.b->hazard(i, date);
                state(static_cast<Eigen::Index>(i), 2) = paths_.c->hazard(i, date);
            }
            regressors_[date] = std::make_unique<ContinuationRegressor>(state, mc_.regression_degree);
        }
    });
    if (k == 0 || k >= regressors_.size()) throw GridMismatch("no regression date " + std::to_string(k));
    return *regressors_[k];
}

struct TrilateralValuation::Pass {
    std::vector<double> w;
    std::vector<double> fitted;
    std::vector<double> chosen;  // n x m premium factors actually applied
    std::vector<double> r_squared;
};

TrilateralValuation::TrilateralValuation(std::shared_ptr<const PricingContext> context,
                                         const DependenceSpec& dependence, const RecoverySpec& recoveries,
                                         double notional)
    : context_(std::move(context)), dependence_(dependence), recoveries_(recoveries), notional_(notional) {
    dependence_.validate();
    recoveries_.validate();
    if (!(notional_ > 0.0)) throw InvalidContract("notional must be positive");
    const std::size_t n = context_->n_paths(), m = context_->periods();
    phi_a_.resize(n * m);
    phi_b_.resize(n * m);
    omega_.resize(n * m);
    const auto& set = context_->paths();
    detail::parallel_for(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                const auto marg = marginals_at(set, i, j);
                RiskyPeriodFactors f;
                try {
                    f = period_factors(marg, period_dependence(marg, dependence_), recoveries_,
                                       context_->discount(j));
                } catch (const AdmissibilityError& e) {
                    throw AdmissibilityError(where(i, j) + ": " + e.what());
                }
                phi_a_[i * m + j] = f.phi_a;
                phi_b_[i * m + j] = f.phi_b;
                omega_[i * m + j] = f.omega;
            }
        }
    }, 1024);
}

void TrilateralValuation::backward(double spread, Pass& pass, bool keep_details) const {
    const std::size_t n = context_->n_paths(), m = context_->periods();
    const auto& schedule = context_->schedule();
    pass.w.assign(n, 0.0);
    if (keep_details) {
        pass.chosen.assign(n * m, 0.0);
        pass.r_squared.assign(m > 0 ? m - 1 : 0, 1.0);
    }
    const double loss = notional_ * (1.0 - recoveries_.phi_c);
    for (std::size_t jj = m; jj-- > 0;) {
        const double delta = schedule.accrual(jj);
        const double x = -spread * notional_ * delta;
        const double r = loss - 0.5 * spread * notional_ * delta;
        const bool regress = jj + 1 < m;
        if (regress) {
            const double r2 = context_->regressor(jj + 1).fit(pass.w, pass.fitted);
            if (keep_details) pass.r_squared[jj] = r2;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double continuation = regress ? pass.fitted[i] : 0.0;
            const std::size_t k = i * m + jj;
            const double o = (continuation + x >= 0.0) ? phi_b_[k] : phi_a_[k];
            if (keep_details) pass.chosen[k] = o;
            pass.w[i] = o * (pass.w[i] + x) + omega_[k] * r;
        }
    }
}

double TrilateralValuation::mean_value(double spread) const {
    Pass pass;
    backward(spread, pass, false);
    double sum = 0.0;
    for (double v : pass.w) sum += v;
    return sum / static_cast<double>(pass.w.size());
}

ValuationResult TrilateralValuation::value(double spread) const {
    Pass pass;
    backward(spread, pass, true);
    const std::size_t n = context_->n_paths(), m = context_->periods();
    const auto& schedule = context_->schedule();
    const auto& mc = context_->mc();

    ValuationResult out;
    out.spread = spread;
    const auto stats = sample_stats(pass.w, mc.antithetic);
    out.value = stats.mean;
    out.std_error = stats.std_error;

    out.legs.resize(m);
    const double loss = notional_ * (1.0 - recoveries_.phi_c);
    for (std::size_t i = 0; i < n; ++i) {
        double carried = 1.0;  // prod of premium factors before the period
        for (std::size_t j = 0; j < m; ++j) {
            const double delta = schedule.accrual(j);
            const std::size_t k = i * m + j;
            out.legs[j].protection += carried * omega_[k] * (loss - 0.5 * spread * notional_ * delta);
            carried *= pass.chosen[k];
            out.legs[j].premium += carried * (-spread * notional_ * delta);
        }
    }
    for (std::size_t j = 0; j < m; ++j) {
        out.legs[j].time = schedule.times[j + 1];
        out.legs[j].premium /= static_cast<double>(n);
        out.legs[j].protection /= static_cast<double>(n);
    }

    auto& diag = out.diagnostics;
    diag.paths = n;
    diag.seed = context_->paths().c->seed();
    diag.antithetic = mc.antithetic;
    diag.r_squared = pass.r_squared;
    for (std::size_t k = 1; k < m; ++k) {
        const auto& reg = context_->regressor(k);
        diag.degrees.push_back(reg.degree());
        if (reg.fell_back()) ++diag.fallbacks;
    }
    if (diag.fallbacks > 0) {
        diag.notes.push_back("regression degree lowered on " + std::to_string(diag.fallbacks) + " date(s)");
    }
    out.path_values = std::move(pass.w);
    return out;
}

ValuationResult TrilateralValuation::breakeven() const {
    const auto sol = solve_breakeven([this](double s) { return mean_value(s); });
    auto out = value(sol.spread);
    out.breakeven_spread = sol.spread;
    out.breakeven_slope = sol.slope;
    out.breakeven_std_error = out.std_error / std::abs(sol.slope);
    out.diagnostics.breakeven_evaluations = sol.evaluations + 1;
    if (std::abs(sol.residual) > notional_ * 1e-8) {
        std::ostringstream msg;
        msg << "breakeven residual " << sol.residual << " above N*1e-8 (value is discontinuous at the root)";
        out.diagnostics.notes.push_back(msg.str());
    }
    return out;
}

CollateralizedValuation::CollateralizedValuation(std::shared_ptr<const PricingContext> context,
                                                 const DependenceSpec& dependence, const RecoverySpec& recoveries,
                                                 double notional)
    : context_(std::move(context)), dependence_(dependence), recoveries_(recoveries), notional_(notional) {
    dependence_.validate();
    recoveries_.validate();
    if (!(notional_ > 0.0)) throw InvalidContract("notional must be positive");
}

ValuationResult CollateralizedValuation::value(double spread) const {
    const std::size_t n = context_->n_paths(), m = context_->periods();
    const auto& schedule = context_->schedule();
    const auto& set = context_->paths();
    const auto& mc = context_->mc();
    const double loss = notional_ * (1.0 - recoveries_.phi_c);

    std::vector<double> w(n, 0.0), vf(n), psi(n), xi(n);
    for (std::size_t jj = m; jj-- > 0;) {
        const double delta = schedule.accrual(jj);
        const double x = -spread * notional_ * delta;
        const double r = loss - 0.5 * spread * notional_ * delta;
        const double disc = context_->discount(jj);
        for (std::size_t i = 0; i < n; ++i) {
            const auto marg = marginals_at(set, i, jj);
            const auto d = period_dependence(marg, dependence_);
            if (!cells_admissible(trivariate_cells(marg, d))) {
                try {
                    trivariate_joint(marg, d);
                } catch (const AdmissibilityError& e) {
                    throw AdmissibilityError(where(i, jj) + ": " + e.what());
                }
            }
            const double u = w[i] + x;
            const double free = disc * (marg.p_c() * u + marg.q_c() * r);
            const double ps = marg.p_a() * marg.p_b() + d.sigma_ab;
            const double kappa = disc * (marg.p_b() * d.sigma_ac + marg.p_a() * d.sigma_bc - d.theta_abc);
            const double exposure = kappa * (u - r);
            if (jj > 0) {
                w[i] = free + exposure / ps;
            } else {
                vf[i] = free;
                psi[i] = ps;
                xi[i] = exposure;
            }
        }
    }

    CollateralDecomposition dec;
    const auto vf_stats = sample_stats(vf, mc.antithetic);
    dec.v_f = vf_stats.mean;
    dec.psi = sample_stats(psi, mc.antithetic).mean;
    dec.xi = sample_stats(xi, mc.antithetic).mean;
    dec.residual = dec.xi / dec.psi;

    // Delta-method influence of the ratio xi / psi.
    std::vector<double> ratio_influence(n), total(n);
    for (std::size_t i = 0; i < n; ++i) {
        ratio_influence[i] = dec.residual + (xi[i] - dec.residual * psi[i]) / dec.psi;
        total[i] = vf[i] + ratio_influence[i];
    }
    dec.residual_std_error = sample_stats(ratio_influence, mc.antithetic).std_error;

    ValuationResult out;
    out.spread = spread;
    out.value = dec.v_f + dec.residual;
    out.std_error = sample_stats(total, mc.antithetic).std_error;
    out.collateral = dec;
    out.diagnostics.paths = n;
    out.diagnostics.seed = set.c->seed();
    out.diagnostics.antithetic = mc.antithetic;
    out.path_values = std::move(total);
    return out;
}

ValuationResult price_trilateral(const CDSContract& contract, const HazardPathSet& paths,
                                 const DependenceSpec& dependence, const RecoverySpec& recoveries,
                                 const Curve& discount_curve, const McConfig& mc, bool solve_breakeven) {
    contract.validate();
    auto context = std::make_shared<const PricingContext>(paths, contract.schedule, discount_curve, mc);
    const TrilateralValuation valuation(context, dependence, recoveries, contract.notional);
    if (!solve_breakeven) return valuation.value(contract.spread);
    auto at_contract = valuation.value(contract.spread);
    const auto at_root = valuation.breakeven();
    at_contract.breakeven_spread = at_root.breakeven_spread;
    at_contract.breakeven_std_error = at_root.breakeven_std_error;
    at_contract.breakeven_slope = at_root.breakeven_slope;
    at_contract.diagnostics.breakeven_evaluations = at_root.diagnostics.breakeven_evaluations;
    for (const auto& note : at_root.diagnostics.notes) at_contract.diagnostics.notes.push_back(note);
    return at_contract;
}

ValuationResult price_riskfree(const CDSContract& contract, const SurvivalCurve& survival_c,
                               const Curve& discount_curve, const RecoverySpec& recoveries) {
    contract.validate();
    recoveries.validate();
    const auto& schedule = contract.schedule;
    if (survival_c.size() != schedule.times.size()) {
        throw GridMismatch("survival curve has " + std::to_string(survival_c.size()) + " points, schedule " +
                           std::to_string(schedule.times.size()));
    }
    ValuationResult out;
    out.spread = contract.spread;
    const double t0 = schedule.times[0];
    double protection = 0.0, annuity = 0.0;
    for (std::size_t i = 1; i < schedule.times.size(); ++i) {
        const double df = discount_factor(discount_curve, t0, schedule.times[i]);
        const double dq = survival_c[i - 1] - survival_c[i];
        const double delta = schedule.accrual(i - 1);
        PeriodLeg leg;
        leg.time = schedule.times[i];
        leg.premium = -df * contract.spread * contract.notional * delta * survival_c[i];
        leg.protection = df * dq * (contract.notional * (1.0 - recoveries.phi_c) -
                                    0.5 * contract.spread * contract.notional * delta);
        out.legs.push_back(leg);
        protection += df * dq * contract.notional * (1.0 - recoveries.phi_c);
        annuity += df * contract.notional * delta * (survival_c[i] + 0.5 * dq);
    }
    out.value = protection - contract.spread * annuity;
    if (annuity > 0.0) {
        out.breakeven_spread = protection / annuity;
        out.breakeven_std_error = 0.0;
        out.breakeven_slope = -annuity;
    }
    return out;
}

ValuationResult price_collateralized(const CDSContract& contract, const HazardPathSet& paths,
                                     const DependenceSpec& dependence, const RecoverySpec& recoveries,
                                     const Curve& discount_curve, const McConfig& mc, double threshold) {
    if (threshold != 0.0) throw InvalidContract("only full collateralization (threshold 0) is priced");
    contract.validate();
    auto context = std::make_shared<const PricingContext>(paths, contract.schedule, discount_curve, mc);
    return CollateralizedValuation(context, dependence, recoveries, contract.notional).value(contract.spread);
}

PathSetFeasibility path_set_feasible_interval(const HazardPathSet& paths, const DependenceSpec& base,
                                              DependenceAxis axis) {
    PathSetFeasibility out;
    out.interval = FeasibleInterval{.empty = false, .lo = -1.0, .hi = 1.0};
    const std::size_t n = paths.n_paths();
    const std::size_t m = paths.grid().size() - 1;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const auto marg = marginals_at(paths, i, j);
            const auto iv = exact_feasible_interval(marg, base, axis);
            const std::array<double, 3> p{marg.p_a(), marg.p_b(), marg.p_c()};
            if (iv.empty) {
                out.interval = {};
                out.lo_binding = out.hi_binding = p;
                return out;
            }
            if (iv.lo > out.interval.lo) {
                out.interval.lo = iv.lo;
                out.lo_binding = p;
            }
            if (iv.hi < out.interval.hi) {
                out.interval.hi = iv.hi;
                out.hi_binding = p;
            }
            if (out.interval.lo > out.interval.hi) {
                out.interval.empty = true;
                return out;
            }
        }
    }
    return out;
}

}  // namespace cds
