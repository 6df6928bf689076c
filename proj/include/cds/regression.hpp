#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace cds {

struct RegressionFit {
    std::vector<double> fitted;
    double r_squared = 1.0;
    int degree = 0;
    /// Coefficients on the standardized monomial basis, intercept first.
    std::vector<double> coefficients;
};

/// Least-squares projection of `values` on all monomials of total degree <= `degree`
/// in the columns of `state` (one row per path). Constant columns are dropped and
/// the rest standardized before the basis is built. R^2 is 1 when the values are
/// constant. Throws RegressionSingular if there are fewer rows than basis terms or
/// the design is rank deficient, DimensionMismatch on size disagreement.
RegressionFit regression_continuation(const Eigen::MatrixXd& state, std::span<const double> values,
                                      int degree = 2);

/// Number of monomials of total degree <= degree in `dims` variables.
int basis_size(int dims, int degree);

/// Reusable regressor for one backward-induction date. The basis and its Gram
/// factorization are built once; each fit only forms X'y. When the requested
/// degree would be rank deficient or leave fewer than `min_paths_per_term` rows
/// per term, the degree is lowered until it is not, down to an intercept.
class ContinuationRegressor {
public:
    ContinuationRegressor(const Eigen::MatrixXd& state, int degree, int min_paths_per_term = 10);

    int requested_degree() const { return requested_degree_; }
    int degree() const { return degree_; }
    bool fell_back() const { return degree_ < requested_degree_; }
    std::size_t rows() const { return rows_; }
    std::size_t terms() const { return static_cast<std::size_t>(basis_.cols()); }

    /// Fitted values written to `fitted` (resized); returns R^2.
    double fit(std::span<const double> values, std::vector<double>& fitted) const;

private:
    int requested_degree_;
    int degree_ = 0;
    std::size_t rows_ = 0;
    Eigen::MatrixXd basis_;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> gram_qr_;
};

}  // namespace cds
