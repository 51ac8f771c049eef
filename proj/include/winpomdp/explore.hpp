#pragma once

#include <Eigen/Dense>

#include "winpomdp/errors.hpp"

namespace winpomdp {

// Regularized empirical covariance of encode-row features, lambda * I plus a
// sum of outer products. Quadratic forms in the inverse are solved through a
// factorization below kRankOneDim features and maintained by rank-one inverse
// updates above it; the two paths agree to tight tolerance.
class CovarianceAccumulator {
public:
    static constexpr int kRankOneDim = 64;

    CovarianceAccumulator(int dim, double lambda, int step = 0);
    // Restores an accumulator from a stored matrix; throws NotPositiveDefinite
    // unless the matrix is symmetric and positive definite.
    static CovarianceAccumulator from_matrix(Eigen::MatrixXd matrix, double lambda, int count,
                                             int step = 0);

    void add(const Eigen::VectorXd& feature);

    int dim() const { return static_cast<int>(matrix_.rows()); }
    int step() const { return step_; }
    int count() const { return count_; }
    double lambda() const { return lambda_; }
    const Eigen::MatrixXd& matrix() const { return matrix_; }

    // feature^T Sigma^{-1} feature.
    double inv_quadratic(const Eigen::VectorXd& feature) const;

private:
    void refresh();

    Eigen::MatrixXd matrix_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::MatrixXd inverse_;  // maintained only on the rank-one path
    bool rank_one_path_ = false;
    double lambda_ = 0.0;
    int count_ = 0;
    int step_ = 0;
};

// Value-semantics form of the update.
CovarianceAccumulator accumulate(CovarianceAccumulator acc, const Eigen::VectorXd& feature);

struct BonusConfig {
    double alpha = 1.0;
    double lambda = 1.0;
    bool truncate = true;
    double truncation_cap = 2.0;
    enum class Mode { Optimism, Pessimism };
    Mode mode = Mode::Optimism;

    void validate() const;
};

// Ellipsoid uncertainty weight of a feature under the accumulated covariance:
// min{alpha * sqrt(f^T Sigma^{-1} f), cap} when truncated, alpha * f^T
// Sigma^{-1} f otherwise. Pessimism reports the same magnitude; the caller
// subtracts it from the reward.
double bonus(const CovarianceAccumulator& acc, const Eigen::VectorXd& feature,
             const BonusConfig& cfg);

struct Schedule {
    double alpha = 0.0;
    double lambda = 0.0;
};

// Episode-indexed bonus scale and covariance regularizer, both growing
// logarithmically: alpha_k = c_alpha * sqrt(log(k+1)), lambda_k =
// c_lambda * log(k+1).
Schedule schedule(int k, int feature_dim, double c_alpha = 1.0, double c_lambda = 1.0);

}  // namespace winpomdp
