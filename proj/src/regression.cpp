#include "cds/regression.hpp"

#include "cds/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cds {

namespace {

using Exponents = std::vector<std::vector<int>>;

// All exponent vectors of total degree <= degree, ordered by degree.
Exponents monomials(int dims, int degree) {
    Exponents out;
    for (int total = 0; total <= degree; ++total) {
        std::vector<int> e(dims, 0);
        // Enumerate compositions of `total` into `dims` parts.
        auto rec = [&](auto&& self, int pos, int left) -> void {
            if (pos == dims - 1) {
                e[pos] = left;
                out.push_back(e);
                return;
            }
            for (int k = left; k >= 0; --k) {
                e[pos] = k;
                self(self, pos + 1, left - k);
            }
        };
        if (dims == 0) {
            if (total == 0) out.push_back({});
            continue;
        }
        rec(rec, 0, total);
    }
    return out;
}

Eigen::MatrixXd standardized_columns(const Eigen::MatrixXd& state) {
    const Eigen::Index n = state.rows();
    std::vector<Eigen::Index> keep;
    std::vector<double> mean, scale;
    for (Eigen::Index c = 0; c < state.cols(); ++c) {
        const double mu = state.col(c).mean();
        const double var = (state.col(c).array() - mu).square().sum() / static_cast<double>(std::max<Eigen::Index>(n, 1));
        const double sd = std::sqrt(var);
        if (sd > 1e-14 * std::max(1.0, std::abs(mu))) {
            keep.push_back(c);
            mean.push_back(mu);
            scale.push_back(sd);
        }
    }
    Eigen::MatrixXd z(n, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        z.col(static_cast<Eigen::Index>(k)) = (state.col(keep[k]).array() - mean[k]) / scale[k];
    }
    return z;
}

Eigen::MatrixXd design(const Eigen::MatrixXd& z, int degree) {
    const auto terms = monomials(static_cast<int>(z.cols()), degree);
    Eigen::MatrixXd x(z.rows(), static_cast<Eigen::Index>(terms.size()));
    for (std::size_t t = 0; t < terms.size(); ++t) {
        Eigen::ArrayXd col = Eigen::ArrayXd::Ones(z.rows());
        for (Eigen::Index d = 0; d < z.cols(); ++d) {
            for (int p = 0; p < terms[t][d]; ++p) col *= z.col(d).array();
        }
        x.col(static_cast<Eigen::Index>(t)) = col.matrix();
    }
    return x;
}

double r_squared(std::span<const double> y, const std::vector<double>& fitted) {
    if (y.empty() || std::all_of(y.begin(), y.end(), [&](double v) { return v == y.front(); })) return 1.0;
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double ss_tot = 0.0, ss_res = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ss_tot += (y[i] - mean) * (y[i] - mean);
        ss_res += (y[i] - fitted[i]) * (y[i] - fitted[i]);
    }
    if (ss_tot <= 0.0) return 1.0;
    return 1.0 - ss_res / ss_tot;
}

}  // namespace

int basis_size(int dims, int degree) {
    return static_cast<int>(monomials(dims, degree).size());
}

RegressionFit regression_continuation(const Eigen::MatrixXd& state, std::span<const double> values, int degree) {
    if (static_cast<std::size_t>(state.rows()) != values.size()) {
        throw DimensionMismatch("state has " + std::to_string(state.rows()) + " rows but " +
                                std::to_string(values.size()) + " values");
    }
    if (degree < 0) throw InvalidParams("regression degree must be non-negative");
    const Eigen::MatrixXd x = design(standardized_columns(state), degree);
    if (x.rows() < x.cols()) {
        throw RegressionSingular("regression needs at least " + std::to_string(x.cols()) + " paths, got " +
                                 std::to_string(x.rows()));
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < x.cols()) {
        throw RegressionSingular("regression design has rank " + std::to_string(qr.rank()) + " < " +
                                 std::to_string(x.cols()) + " basis terms");
    }
    const Eigen::Map<const Eigen::VectorXd> y(values.data(), static_cast<Eigen::Index>(values.size()));
    const Eigen::VectorXd beta = qr.solve(y);
    RegressionFit out;
    out.degree = degree;
    out.coefficients.assign(beta.data(), beta.data() + beta.size());
    out.fitted.resize(values.size());
    Eigen::Map<Eigen::VectorXd>(out.fitted.data(), x.rows()) = x * beta;
    out.r_squared = r_squared(values, out.fitted);
    return out;
}

ContinuationRegressor::ContinuationRegressor(const Eigen::MatrixXd& state, int degree, int min_paths_per_term)
    : requested_degree_(degree), rows_(static_cast<std::size_t>(state.rows())) {
    if (degree < 0) throw InvalidParams("regression degree must be non-negative");
    if (rows_ == 0) throw RegressionSingular("regression needs at least one path");
    const Eigen::MatrixXd z = standardized_columns(state);
    for (int d = degree; d >= 0; --d) {
        basis_ = design(z, d);
        degree_ = d;
        if (d > 0 && static_cast<double>(rows_) < static_cast<double>(min_paths_per_term) * basis_.cols()) continue;
        const Eigen::MatrixXd gram = basis_.transpose() * basis_;
        gram_qr_.compute(gram);
        if (gram_qr_.rank() == basis_.cols()) return;
    }
    throw RegressionSingular("intercept-only regression is singular");
}

double ContinuationRegressor::fit(std::span<const double> values, std::vector<double>& fitted) const {
    if (values.size() != rows_) {
        throw DimensionMismatch("regressor built on " + std::to_string(rows_) + " paths, got " +
                                std::to_string(values.size()) + " values");
    }
    const Eigen::Map<const Eigen::VectorXd> y(values.data(), static_cast<Eigen::Index>(rows_));
    const Eigen::VectorXd beta = gram_qr_.solve(basis_.transpose() * y);
    fitted.resize(rows_);
    Eigen::Map<Eigen::VectorXd>(fitted.data(), static_cast<Eigen::Index>(rows_)) = basis_ * beta;
    return r_squared(values, fitted);
}

}  // namespace cds
