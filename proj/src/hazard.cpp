#include "cds/hazard.hpp"

#include "cds/detail/parallel.hpp"
#include "cds/error.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <random>

namespace cds {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t path_key(std::uint64_t seed, std::uint64_t stream, std::uint64_t path) {
    return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ path);
}

std::size_t substeps_for(double dt, int per_year) {
    return static_cast<std::size_t>(std::max(1.0, std::ceil(dt * per_year - 1e-9)));
}

}  // namespace

void CIRParams::validate() const {
    if (!(a > 0.0) || !(b > 0.0) || !(sigma >= 0.0) || !(h0 >= 0.0) || !std::isfinite(a) ||
        !std::isfinite(b) || !std::isfinite(sigma) || !std::isfinite(h0)) {
        throw InvalidParams("CIR parameters need a > 0, b > 0, sigma >= 0, h0 >= 0");
    }
}

HazardPaths HazardPaths::zero(std::vector<double> grid, std::size_t n_paths) {
    HazardPaths out;
    out.grid_ = std::move(grid);
    out.n_paths_ = n_paths;
    out.zero_ = true;
    return out;
}

HazardPaths simulate_paths(const CIRParams& params, std::span<const double> grid, std::size_t n_paths,
                           std::uint64_t seed, const SimulationConfig& config, std::uint64_t stream) {
    params.validate();
    if (n_paths == 0) throw InvalidParams("n_paths must be at least 1");
    if (grid.size() < 2) throw GridMismatch("grid needs at least two dates");
    if (config.substeps_per_year <= 0) throw InvalidParams("substeps_per_year must be positive");
    for (std::size_t k = 1; k < grid.size(); ++k) {
        if (!(grid[k] > grid[k - 1])) throw GridMismatch("grid dates must be strictly increasing");
    }

    HazardPaths out;
    out.grid_.assign(grid.begin(), grid.end());
    out.n_paths_ = n_paths;
    out.seed_ = seed;
    const std::size_t points = grid.size();
    const std::size_t periods = points - 1;
    out.hazard_.resize(n_paths * points);
    out.integrated_.resize(n_paths * periods);

    std::vector<std::size_t> substeps(periods);
    for (std::size_t j = 0; j < periods; ++j) {
        substeps[j] = substeps_for(grid[j + 1] - grid[j], config.substeps_per_year);
    }

    const double a = params.a, b = params.b, sigma = params.sigma;
    detail::parallel_for(n_paths, [&](std::size_t begin, std::size_t end) {
        for (std::size_t path = begin; path < end; ++path) {
            const bool mirrored = config.antithetic && (path & 1U);
            const std::size_t source = config.antithetic ? (path & ~std::size_t{1}) : path;
            std::mt19937_64 engine(path_key(seed, stream, source));
            std::normal_distribution<double> normal;
            const double sign = mirrored ? -1.0 : 1.0;

            double* hz = &out.hazard_[path * points];
            double* integ = &out.integrated_[path * periods];
            double x = params.h0;  // may go negative; the hazard is max(x, 0)
            hz[0] = std::max(x, 0.0);
            for (std::size_t j = 0; j < periods; ++j) {
                const std::size_t n = substeps[j];
                const double dt = (grid[j + 1] - grid[j]) / static_cast<double>(n);
                const double sqrt_dt = std::sqrt(dt);
                double h = std::max(x, 0.0);
                double area = 0.5 * h;
                for (std::size_t k = 0; k < n; ++k) {
                    const double z = sign * normal(engine);
                    x = x + a * (b - h) * dt + sigma * std::sqrt(h) * sqrt_dt * z;
                    h = std::max(x, 0.0);
                    area += (k + 1 < n) ? h : 0.5 * h;
                }
                integ[j] = area * dt;
                hz[j + 1] = h;
            }
        }
    });
    return out;
}

double integrate_trapezoid(std::span<const double> samples, double dt) {
    if (samples.size() < 2) return 0.0;
    double sum = 0.5 * (samples.front() + samples.back());
    for (std::size_t i = 1; i + 1 < samples.size(); ++i) sum += samples[i];
    return sum * dt;
}

double period_survival(std::span<const double> substep_hazards, double dt) {
    return std::exp(-integrate_trapezoid(substep_hazards, dt));
}

double period_survival(const HazardPaths& paths, std::size_t path, std::size_t j) {
    if (path >= paths.n_paths() || j >= paths.n_periods()) {
        throw GridMismatch("period " + std::to_string(j) + " / path " + std::to_string(path) +
                           " outside the simulated grid");
    }
    return std::exp(-paths.integrated(path, j));
}

void write_paths_binary(const HazardPaths& paths, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IOError("cannot write " + file.string());
    const std::uint64_t n = paths.n_paths();
    const std::uint64_t points = paths.grid().size();
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(reinterpret_cast<const char*>(&points), sizeof points);
    out.write(reinterpret_cast<const char*>(paths.grid().data()),
              static_cast<std::streamsize>(points * sizeof(double)));
    std::vector<double> row(points);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < points; ++k) row[k] = paths.hazard(i, k);
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(points * sizeof(double)));
    }
    // Trailing block: integrated hazard per period, n x (points - 1).
    row.resize(points - 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j + 1 < points; ++j) row[j] = paths.integrated(i, j);
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>((points - 1) * sizeof(double)));
    }
    if (!out) throw IOError("short write to " + file.string());
}

HazardPaths read_paths_binary(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IOError("cannot read " + file.string());
    std::uint64_t n = 0, points = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    in.read(reinterpret_cast<char*>(&points), sizeof points);
    if (!in || points < 2) throw IOError("bad path file header in " + file.string());
    HazardPaths out;
    out.n_paths_ = n;
    out.grid_.resize(points);
    out.hazard_.resize(n * points);
    out.integrated_.resize(n * (points - 1));
    in.read(reinterpret_cast<char*>(out.grid_.data()), static_cast<std::streamsize>(points * sizeof(double)));
    in.read(reinterpret_cast<char*>(out.hazard_.data()),
            static_cast<std::streamsize>(out.hazard_.size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(out.integrated_.data()),
            static_cast<std::streamsize>(out.integrated_.size() * sizeof(double)));
    if (!in) throw IOError("truncated path file " + file.string());
    return out;
}

double cir_survival(const CIRParams& params, double tau) {
    params.validate();
    if (tau <= 0.0) return 1.0;
    const double a = params.a, b = params.b, s = params.sigma;
    if (s < 1e-7) {
        // Deterministic limit: h(t) = b + (h0 - b) e^{-a t}.
        const double decay = -std::expm1(-a * tau) / a;
        return std::exp(-(b * (tau - decay) + params.h0 * decay));
    }
    const double gamma = std::sqrt(a * a + 2.0 * s * s);
    const double growth = std::expm1(gamma * tau);
    const double denom = (gamma + a) * growth + 2.0 * gamma;
    const double B = 2.0 * growth / denom;
    const double log_A =
        (2.0 * a * b / (s * s)) * (0.5 * (a + gamma) * tau - std::log1p((gamma + a) * growth / (2.0 * gamma)));
    return std::exp(log_A - B * params.h0);
}

SurvivalCurve cir_survival_curve(const CIRParams& params, const Schedule& schedule) {
    schedule.validate();
    SurvivalCurve out(schedule.times.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = cir_survival(params, schedule.times[i] - schedule.times[0]);
    }
    return out;
}

SurvivalCurve flat_hazard_survival_curve(double hazard, const Schedule& schedule) {
    schedule.validate();
    SurvivalCurve out(schedule.times.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::exp(-hazard * (schedule.times[i] - schedule.times[0]));
    }
    return out;
}

SurvivalCurve sample_survival_curve(const HazardPaths& paths) {
    const std::size_t points = paths.grid().size();
    SurvivalCurve out(points, 0.0);
    if (paths.is_zero()) {
        std::fill(out.begin(), out.end(), 1.0);
        return out;
    }
    for (std::size_t i = 0; i < paths.n_paths(); ++i) {
        double cum = 0.0;
        out[0] += 1.0;
        for (std::size_t j = 0; j + 1 < points; ++j) {
            cum += paths.integrated(i, j);
            out[j + 1] += std::exp(-cum);
        }
    }
    for (auto& v : out) v /= static_cast<double>(paths.n_paths());
    return out;
}

RiskfreeLegs riskfree_legs(const SurvivalCurve& survival, const Curve& discount_curve, double recovery_c,
                           const Schedule& schedule, double notional) {
    schedule.validate();
    if (survival.size() != schedule.times.size()) {
        throw GridMismatch("survival curve has " + std::to_string(survival.size()) + " points, schedule " +
                           std::to_string(schedule.times.size()));
    }
    if (!(recovery_c >= 0.0 && recovery_c <= 1.0)) throw InvalidParams("recovery must lie in [0, 1]");
    RiskfreeLegs legs;
    const double t0 = schedule.times[0];
    for (std::size_t i = 1; i < schedule.times.size(); ++i) {
        const double df = discount_factor(discount_curve, t0, schedule.times[i]);
        const double default_prob = survival[i - 1] - survival[i];
        const double delta = schedule.accrual(i - 1);
        legs.protection += df * default_prob * notional * (1.0 - recovery_c);
        legs.risky_annuity += df * notional * delta * (survival[i] + 0.5 * default_prob);
    }
    return legs;
}

double riskfree_breakeven_spread(const SurvivalCurve& survival, const Curve& discount_curve, double recovery_c,
                                 const Schedule& schedule) {
    const auto legs = riskfree_legs(survival, discount_curve, recovery_c, schedule);
    if (!(legs.risky_annuity > 0.0)) throw NoRoot("schedule carries no premium; breakeven undefined");
    return legs.protection / legs.risky_annuity;
}

double riskfree_breakeven_spread(const CIRParams& params, const Curve& discount_curve, double recovery_c,
                                 const Schedule& schedule) {
    return riskfree_breakeven_spread(cir_survival_curve(params, schedule), discount_curve, recovery_c, schedule);
}

double riskfree_breakeven_spread(double flat_hazard, const Curve& discount_curve, double recovery_c,
                                 const Schedule& schedule) {
    if (!(flat_hazard >= 0.0)) throw InvalidParams("hazard must be non-negative");
    return riskfree_breakeven_spread(flat_hazard_survival_curve(flat_hazard, schedule), discount_curve,
                                     recovery_c, schedule);
}

std::vector<double> cir_model_spreads(const CIRParams& params, std::span<const double> terms,
                                      const Curve& discount_curve, double recovery_c, int frequency) {
    std::vector<double> out;
    out.reserve(terms.size());
    for (double t : terms) {
        out.push_back(riskfree_breakeven_spread(params, discount_curve, recovery_c,
                                                make_schedule(0.0, t, frequency)));
    }
    return out;
}

namespace {

struct Box {
    double lo, hi;

    double to_param(double x) const { return lo + (hi - lo) / (1.0 + std::exp(-x)); }
    double to_free(double p) const {
        const double u = std::clamp((p - lo) / (hi - lo), 1e-9, 1.0 - 1e-9);
        return std::log(u / (1.0 - u));
    }
};

struct FitProblem {
    const CalibrationConfig* config;
    const Curve* discount;
    std::vector<Schedule> schedules;
    std::vector<double> targets;
    std::array<Box, 4> boxes;  // a, b, sigma, h0

    bool free_sigma() const { return config->stationary_shape <= 0.0; }
    std::size_t dim() const { return 2 + (free_sigma() ? 1 : 0) + (config->fit_h0 ? 1 : 0); }

    CIRParams params_from(const gsl_vector* x) const {
        CIRParams p;
        std::size_t k = 0;
        p.a = boxes[0].to_param(gsl_vector_get(x, k++));
        p.b = boxes[1].to_param(gsl_vector_get(x, k++));
        if (free_sigma()) {
            Box sigma_box = boxes[2];
            if (config->enforce_feller) {
                sigma_box.hi = std::max(sigma_box.lo, std::min(sigma_box.hi, std::sqrt(2.0 * p.a * p.b)));
            }
            p.sigma = sigma_box.to_param(gsl_vector_get(x, k++));
        } else {
            p.sigma = std::clamp(std::sqrt(2.0 * p.a * p.b / config->stationary_shape), boxes[2].lo, boxes[2].hi);
        }
        p.h0 = config->fit_h0 ? boxes[3].to_param(gsl_vector_get(x, k++)) : p.b;
        return p;
    }

    std::vector<double> free_start(const std::array<double, 4>& start) const {
        std::vector<double> out{boxes[0].to_free(start[0]), boxes[1].to_free(start[1])};
        if (free_sigma()) out.push_back(boxes[2].to_free(start[2]));
        if (config->fit_h0) out.push_back(boxes[3].to_free(start[3]));
        return out;
    }

    double objective(const CIRParams& p) const {
        double sum = 0.0;
        for (std::size_t k = 0; k < schedules.size(); ++k) {
            const double model = riskfree_breakeven_spread(p, *discount, config->recovery, schedules[k]);
            const double err = model - targets[k];
            sum += err * err;
        }
        return sum;
    }
};

double fit_objective(const gsl_vector* x, void* data) {
    const auto* problem = static_cast<const FitProblem*>(data);
    // Objective in squared basis points keeps the simplex tolerances meaningful.
    const double value = problem->objective(problem->params_from(x)) * 1e8;
    return std::isfinite(value) ? value : std::numeric_limits<double>::max();
}

}  // namespace

CalibrationResult calibrate_cir(const Curve& credit_curve, double shift_bps, const Curve& discount_curve,
                                const CalibrationConfig& config) {
    if (credit_curve.kind() != CurveKind::credit_spread) throw WrongCurveKind("calibration needs a credit curve");
    if (credit_curve.points().size() < 3) throw CalibrationFailed("calibration needs at least 3 curve nodes");
    for (const auto& bounds : {config.a_bounds, config.b_bounds, config.sigma_bounds, config.h0_bounds}) {
        if (!(bounds[0] < bounds[1])) throw InvalidBounds("calibration bounds need lo < hi");
    }
    if (!(config.a_bounds[0] > 0.0 && config.b_bounds[0] > 0.0 && config.sigma_bounds[0] >= 0.0 &&
          config.h0_bounds[0] >= 0.0)) {
        throw InvalidBounds("calibration bounds must respect a > 0, b > 0, sigma >= 0, h0 >= 0");
    }

    FitProblem problem;
    problem.config = &config;
    problem.discount = &discount_curve;
    problem.boxes = {Box{config.a_bounds[0], config.a_bounds[1]}, Box{config.b_bounds[0], config.b_bounds[1]},
                     Box{config.sigma_bounds[0], config.sigma_bounds[1]},
                     Box{config.h0_bounds[0], config.h0_bounds[1]}};
    CalibrationResult result;
    for (const auto& node : credit_curve.points()) {
        const double t = days_to_years(node.term_days);
        result.terms.push_back(t);
        result.market_spreads.push_back(spread_at(credit_curve, t, shift_bps));
        problem.schedules.push_back(make_schedule(0.0, t, config.frequency));
    }
    problem.targets = result.market_spreads;

    const std::size_t dim = problem.dim();
    const double loss = 1.0 - config.recovery;
    const double short_hazard = result.market_spreads.front() / loss;
    const double long_hazard = result.market_spreads.back() / loss;
    const std::array<double, 4> start_params{0.2, long_hazard, 0.02, short_hazard};

    gsl_set_error_handler_off();
    using Minimizer = std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)>;
    using Vector = std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)>;
    Vector x(gsl_vector_alloc(dim), &gsl_vector_free);
    Vector step(gsl_vector_alloc(dim), &gsl_vector_free);
    const auto start = problem.free_start(start_params);
    for (std::size_t i = 0; i < dim; ++i) gsl_vector_set(x.get(), i, start[i]);

    gsl_multimin_function fn{&fit_objective, dim, &problem};
    int iterations = 0;
    // Restarting from the incumbent with a fresh simplex guards against collapse.
    for (int round = 0; round <= config.restarts; ++round) {
        Minimizer minimizer(gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dim),
                            &gsl_multimin_fminimizer_free);
        gsl_vector_set_all(step.get(), 1.0);
        gsl_multimin_fminimizer_set(minimizer.get(), &fn, x.get(), step.get());
        for (int it = 0; it < config.max_iterations; ++it) {
            ++iterations;
            if (gsl_multimin_fminimizer_iterate(minimizer.get()) != GSL_SUCCESS) break;
            const double size = gsl_multimin_fminimizer_size(minimizer.get());
            if (gsl_multimin_test_size(size, 1e-10) == GSL_SUCCESS) break;
        }
        gsl_vector_memcpy(x.get(), gsl_multimin_fminimizer_x(minimizer.get()));
    }

    result.params = problem.params_from(x.get());
    result.iterations = iterations;
    result.objective = problem.objective(result.params);
    result.rms_error = std::sqrt(result.objective / static_cast<double>(problem.targets.size()));
    for (const auto& s : problem.schedules) {
        result.model_spreads.push_back(riskfree_breakeven_spread(result.params, discount_curve, config.recovery, s));
    }
    if (!(result.rms_error <= config.max_rms_error)) {
        throw CalibrationFailed("CIR fit rms spread error " + std::to_string(result.rms_error) +
                                " exceeds threshold " + std::to_string(config.max_rms_error));
    }
    return result;
}

}  // namespace cds
