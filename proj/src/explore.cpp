#include "winpomdp/explore.hpp"

#include <cmath>

namespace winpomdp {

CovarianceAccumulator::CovarianceAccumulator(int dim, double lambda, int step)
    : lambda_(lambda), step_(step) {
    if (dim <= 0) throw InvalidArgument("covariance: dimension must be positive");
    if (!(lambda > 0.0)) throw InvalidArgument("covariance: lambda must be positive");
    matrix_ = Eigen::MatrixXd::Identity(dim, dim) * lambda;
    rank_one_path_ = dim > kRankOneDim;
    if (rank_one_path_)
        inverse_ = Eigen::MatrixXd::Identity(dim, dim) / lambda;
    else
        refresh();
}

CovarianceAccumulator CovarianceAccumulator::from_matrix(Eigen::MatrixXd matrix, double lambda,
                                                         int count, int step) {
    if (!(lambda > 0.0)) throw InvalidArgument("covariance: lambda must be positive");
    if (matrix.rows() != matrix.cols() || matrix.rows() == 0)
        throw NotPositiveDefinite("covariance: matrix must be square");
    if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw NotPositiveDefinite("covariance: matrix is not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(matrix);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("covariance: matrix is not positive definite");
    CovarianceAccumulator acc(static_cast<int>(matrix.rows()), lambda, step);
    acc.matrix_ = std::move(matrix);
    acc.count_ = count;
    if (acc.rank_one_path_)
        acc.inverse_ = acc.matrix_.llt().solve(
            Eigen::MatrixXd::Identity(acc.matrix_.rows(), acc.matrix_.cols()));
    else
        acc.refresh();
    return acc;
}

void CovarianceAccumulator::refresh() {
    llt_.compute(matrix_);
    if (llt_.info() != Eigen::Success)
        throw NotPositiveDefinite("covariance: factorization failed");
}

void CovarianceAccumulator::add(const Eigen::VectorXd& feature) {
    if (feature.size() != matrix_.rows())
        throw InvalidArgument("covariance: feature dimension mismatch");
    matrix_.selfadjointView<Eigen::Lower>().rankUpdate(feature);
    matrix_.triangularView<Eigen::StrictlyUpper>() = matrix_.transpose();
    ++count_;
    if (rank_one_path_) {
        // Sherman-Morrison update of the explicit inverse.
        const Eigen::VectorXd u = inverse_ * feature;
        const double denom = 1.0 + feature.dot(u);
        inverse_.noalias() -= (u * u.transpose()) / denom;
    } else {
        refresh();
    }
}

double CovarianceAccumulator::inv_quadratic(const Eigen::VectorXd& feature) const {
    if (feature.size() != matrix_.rows())
        throw InvalidArgument("covariance: feature dimension mismatch");
    double q;
    if (rank_one_path_)
        q = feature.dot(inverse_ * feature);
    else
        q = feature.dot(llt_.solve(feature));
    if (!(q >= 0.0) || !std::isfinite(q))
        throw NotPositiveDefinite("covariance: quadratic form is not positive");
    return q;
}

CovarianceAccumulator accumulate(CovarianceAccumulator acc, const Eigen::VectorXd& feature) {
    acc.add(feature);
    return acc;
}

void BonusConfig::validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidArgument("bonus: alpha must be positive");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidArgument("bonus: lambda must be positive");
    if (!(truncation_cap > 0.0)) throw InvalidArgument("bonus: truncation cap must be positive");
}

double bonus(const CovarianceAccumulator& acc, const Eigen::VectorXd& feature,
             const BonusConfig& cfg) {
    cfg.validate();
    const double q = acc.inv_quadratic(feature);
    if (cfg.truncate) return std::min(cfg.alpha * std::sqrt(q), cfg.truncation_cap);
    return cfg.alpha * q;
}

Schedule schedule(int k, int /*feature_dim*/, double c_alpha, double c_lambda) {
    if (k < 1) throw InvalidArgument("schedule: episode index starts at 1");
    const double growth = std::log(static_cast<double>(k) + 1.0);
    return {c_alpha * std::sqrt(growth), c_lambda * growth};
}

}  // namespace winpomdp
