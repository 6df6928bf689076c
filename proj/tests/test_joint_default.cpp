#include "cds/error.hpp"
#include "cds/joint_default.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace cds;

namespace {

double marginal_default(const std::array<double, 8>& cells, int party) {
    double q = 0.0;
    for (int k = 0; k < 8; ++k) {
        if (oracle::bit(k, party)) q += cells[k];
    }
    return q;
}

double cell_covariance(const std::array<double, 8>& cells, const PeriodMarginals& m, int i, int j) {
    double s = 0.0;
    for (int k = 0; k < 8; ++k) s += cells[k] * (oracle::bit(k, i) - m.q(i)) * (oracle::bit(k, j) - m.q(j));
    return s;
}

}  // namespace

TEST_CASE("marginals") {
    const PeriodMarginals m(0.97, 0.5, 1.0);
    CHECK(m.q_a() == doctest::Approx(0.03));
    CHECK(m.p_c() + m.q_c() == 1.0);
    CHECK(m.q_c() == 0.0);
    CHECK_THROWS_AS(PeriodMarginals(1.1, 0.5, 0.5), OutOfRange);
    CHECK_THROWS_AS(PeriodMarginals(0.5, -0.1, 0.5), OutOfRange);
}

TEST_CASE("dependence parameters stay within the unit interval") {
    CHECK_THROWS_AS((DependenceSpec{1.5, 0, 0, 0}.validate()), OutOfRange);
    CHECK_THROWS_AS((DependenceSpec{0, 0, 0, -1.01}.validate()), OutOfRange);
    CHECK_NOTHROW((DependenceSpec{1, -1, 0.3, 1}.validate()));
    CHECK_THROWS_AS(covariance_from_correlation(0.9, 0.8, 1.2), OutOfRange);
    CHECK(covariance_from_correlation(0.9, 0.8, 0.5) == doctest::Approx(0.5 * std::sqrt(0.9 * 0.1 * 0.8 * 0.2)));
    CHECK(to_string(DependenceAxis::zeta_abc) == "zeta_ABC");
    CHECK(dependence_axis_from_string("rho_bc") == DependenceAxis::rho_bc);
    CHECK(get(with({}, DependenceAxis::rho_ac, 0.25), DependenceAxis::rho_ac) == 0.25);
}

TEST_CASE("comvariance is odd and linear in the comrelation") {
    const PeriodMarginals m(0.95, 0.9, 0.8);
    const double unit = comvariance_from_comrelation(m, 1.0);
    double bound = 1.0;
    for (int j = 0; j < 3; ++j) bound *= third_absolute_central_moment(m.p(j));
    CHECK(unit == doctest::Approx(std::cbrt(bound)).epsilon(1e-15));
    for (double z : {-1.0, -0.4, 0.0, 0.3, 0.77}) {
        CHECK(comvariance_from_comrelation(m, -z) == -comvariance_from_comrelation(m, z));
        CHECK(comvariance_from_comrelation(m, z) == doctest::Approx(z * unit).epsilon(1e-15));
    }
    CHECK(third_absolute_central_moment(0.3) == doctest::Approx(0.3 * 0.7 * (0.09 + 0.49)));
    CHECK_THROWS_AS(comvariance_from_comrelation(m, 1.5), OutOfRange);
}

TEST_CASE("independence gives the product law") {
    const PeriodMarginals m(0.9, 0.8, 0.7);
    const auto law = trivariate_joint(m, {});
    for (int k = 0; k < 8; ++k) {
        double prod = 1.0;
        for (int j = 0; j < 3; ++j) prod *= oracle::bit(k, j) ? m.q(j) : m.p(j);
        CHECK(law.cells[k] == doctest::Approx(prod).epsilon(1e-15));
    }
    CHECK(TrivariateDistribution::label(6) == "p011");
    CHECK(law(1, 1, 0) == law.cells[3]);
}

TEST_CASE("random admissible laws: cells, margins, covariances and the moment oracle") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 2000; ++trial) {
        const auto draw = oracle::draw_admissible(rng);
        const auto& m = draw.marginals;
        const auto d = period_dependence(m, draw.spec);
        const auto law = trivariate_joint(m, d);
        double sum = 0.0;
        for (double c : law.cells) {
            CHECK(c >= -kCellTolerance);
            CHECK(c <= 1.0);
            sum += c;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
        for (int j = 0; j < 3; ++j) CHECK(std::abs(marginal_default(law.cells, j) - m.q(j)) <= 1e-12);
        CHECK(std::abs(cell_covariance(law.cells, m, 0, 1) - d.sigma_ab) <= 1e-12);
        CHECK(std::abs(cell_covariance(law.cells, m, 0, 2) - d.sigma_ac) <= 1e-12);
        CHECK(std::abs(cell_covariance(law.cells, m, 1, 2) - d.sigma_bc) <= 1e-12);

        // Summing out C leaves the bivariate Bernoulli with covariance sigma_AB.
        CHECK(std::abs(law(1, 1, 0) + law(1, 1, 1) - (m.q_a() * m.q_b() + d.sigma_ab)) <= 1e-12);
        CHECK(std::abs(law(0, 0, 0) + law(0, 0, 1) - (m.p_a() * m.p_b() + d.sigma_ab)) <= 1e-12);

        const auto solved = oracle::moment_matched_cells(m, d);
        const std::array<double, 3> survival{m.p_a(), m.p_b(), m.p_c()};
        const std::array<double, 8> moments{1.0, 0.0, 0.0, d.sigma_ab, 0.0, d.sigma_ac, d.sigma_bc, d.theta_abc};
        const auto generic = nvariate_joint(survival, moments);
        for (int k = 0; k < 8; ++k) {
            CHECK(std::abs(law.cells[k] - solved[k]) <= 1e-13);
            CHECK(std::abs(law.cells[k] - generic[k]) <= 1e-13);
        }
    }
}

TEST_CASE("covariance bounds hold") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 500; ++trial) {
        const auto draw = oracle::draw_admissible(rng);
        const auto& m = draw.marginals;
        const auto d = period_dependence(m, draw.spec);
        CHECK(std::abs(d.sigma_ab) <= std::sqrt(m.p_a() * m.q_a() * m.p_b() * m.q_b()) + 1e-18);
        CHECK(std::abs(d.theta_abc) <= comvariance_from_comrelation(m, 1.0) + 1e-18);
    }
}

TEST_CASE("inadmissible input names the violating cells") {
    const PeriodMarginals m(0.99, 0.99, 0.9);
    const auto d = period_dependence(m, {0.0, 0.0, 1.0, 0.0});
    try {
        trivariate_joint(m, d);
        FAIL("expected AdmissibilityError");
    } catch (const AdmissibilityError& e) {
        CHECK(std::string(e.what()).find("p0") != std::string::npos);
    }
    CHECK_FALSE(cells_admissible(trivariate_cells(m, d)));

    const auto report = admissibility_region(m, {0.0, 0.0, 1.0, 0.0});
    CHECK_FALSE(report.admissible);
    CHECK_FALSE(report.violating_cells.empty());
    const auto& bc = report.axes[static_cast<int>(DependenceAxis::rho_bc)];
    REQUIRE_FALSE(bc.empty);
    CHECK(bc.hi < 1.0);
    CHECK(report.describe().find("inadmissible") == 0);

    // The bisected range agrees with the exact one.
    const auto exact = exact_feasible_interval(m, {}, DependenceAxis::rho_bc);
    CHECK(std::abs(exact.hi - bc.hi) <= 2.0 * kAdmissibilityBisectionTolerance);
    CHECK(std::abs(exact.lo - bc.lo) <= 2.0 * kAdmissibilityBisectionTolerance);
    CHECK(admissibility_region(m, with({}, DependenceAxis::rho_bc, exact.hi - 1e-9)).admissible);
    CHECK_FALSE(admissibility_region(m, with({}, DependenceAxis::rho_bc, exact.hi + 1e-9)).admissible);
}

TEST_CASE("identical marginals at full correlation sit on the boundary, not beyond it") {
    const PeriodMarginals m(0.99, 0.99, 0.99);
    CHECK_NOTHROW(trivariate_joint(m, period_dependence(m, {0.0, 0.0, 1.0, 0.0})));
}

TEST_CASE("nvariate_joint") {
    const std::array<double, 2> p{0.9, 0.7};
    const double s = 0.02;
    const std::array<double, 4> moments{1.0, 0.0, 0.0, s};
    const auto law = nvariate_joint(p, moments);
    CHECK(law[3] == doctest::Approx(0.1 * 0.3 + s));
    CHECK(law[0] == doctest::Approx(0.9 * 0.7 + s));
    CHECK(law[1] == doctest::Approx(0.1 * 0.7 - s));

    const std::array<double, 3> short_moments{1.0, 0.0, 0.0};
    CHECK_THROWS_AS(nvariate_joint(p, short_moments), DimensionMismatch);
    const std::array<double, 4> uncentred{1.0, 0.1, 0.0, s};
    CHECK_THROWS_AS(nvariate_joint(p, uncentred), OutOfRange);
    const std::array<double, 4> too_strong{1.0, 0.0, 0.0, 0.2};
    CHECK_THROWS_AS(nvariate_joint(p, too_strong), AdmissibilityError);

    // Four parties, independent: product law.
    const std::array<double, 4> p4{0.9, 0.8, 0.7, 0.6};
    std::array<double, 16> m4{};
    m4[0] = 1.0;
    const auto law4 = nvariate_joint(p4, m4);
    double sum = 0.0;
    for (double c : law4) sum += c;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(law4[15] == doctest::Approx(0.1 * 0.2 * 0.3 * 0.4).epsilon(1e-14));
}

TEST_CASE("sample comrelation") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> z;
    for (int trial = 0; trial < 500; ++trial) {
        const int k = 2 + trial % 4;
        std::vector<std::vector<double>> series(k, std::vector<double>(5 + trial % 17));
        for (auto& s : series)
            for (auto& x : s) x = z(rng);
        const double c = sample_comrelation(series);
        CHECK(c >= -1.0);
        CHECK(c <= 1.0);
    }

    // k = 2 is Pearson.
    const std::vector<std::vector<double>> two{{1, 2, 3, 5}, {2, 1, 4, 4}};
    const double mx = 2.75, my = 2.75;
    double sxy = 0, sxx = 0, syy = 0;
    for (int i = 0; i < 4; ++i) {
        sxy += (two[0][i] - mx) * (two[1][i] - my);
        sxx += (two[0][i] - mx) * (two[0][i] - mx);
        syy += (two[1][i] - my) * (two[1][i] - my);
    }
    CHECK(sample_comrelation(two) == doctest::Approx(sxy / std::sqrt(sxx * syy)).epsilon(1e-14));

    // Three balanced indicators whose signs multiply to +1 (or -1) in every row.
    const std::vector<double> a{1, 1, 0, 0}, b{1, 0, 1, 0};
    CHECK(std::abs(sample_comrelation(std::vector<std::vector<double>>{a, b, {1, 0, 0, 1}}) - 1.0) <= 1e-12);
    CHECK(std::abs(sample_comrelation(std::vector<std::vector<double>>{a, b, {0, 1, 1, 0}}) + 1.0) <= 1e-12);

    CHECK_THROWS_AS(sample_comrelation(std::vector<std::vector<double>>{a, {1, 1, 1, 1}}), DegenerateSeries);
    CHECK_THROWS_AS(sample_comrelation(std::vector<std::vector<double>>{a, {1, 0}}), DimensionMismatch);
    CHECK_THROWS_AS(sample_comrelation(std::vector<std::vector<double>>{a}), DimensionMismatch);
}
