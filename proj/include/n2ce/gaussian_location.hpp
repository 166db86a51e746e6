#ifndef N2CE_GAUSSIAN_LOCATION_HPP
#define N2CE_GAUSSIAN_LOCATION_HPP

#include <utility>

#include "n2ce/common.hpp"
#include "n2ce/rng.hpp"

namespace n2ce {

/// Unit-covariance Gaussian N(alpha, I) viewed as a tilt of the noise
/// N(0, I). The mean is the natural parameter; the log-ratio against the
/// noise is available in closed form, partition function included.
template <typename Scalar>
class GaussianLocationModel {
 public:
  using VectorType = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  explicit GaussianLocationModel(VectorType mean) : mean_(std::move(mean)) {
    require(mean_.size() > 0, "GaussianLocationModel: dimension must be positive");
  }

  static GaussianLocationModel zeros(Index dim) { return GaussianLocationModel(VectorType::Zero(dim)); }

  Index dim() const { return mean_.size(); }
  const VectorType& mean() const { return mean_; }

  // Parameter access shared with the other ratio models.
  Index num_params() const { return mean_.size(); }
  const VectorType& params() const { return mean_; }
  void set_params(const VectorType& p) {
    require(p.size() == mean_.size(), "GaussianLocationModel: parameter length mismatch");
    mean_ = p;
  }

  Scalar log_ratio(const VectorType& x) const {
    require(x.size() == dim(), "log_ratio: dimension mismatch");
    return mean_.dot(x) - Scalar(0.5) * mean_.squaredNorm();
  }

  VectorType grad_log_ratio(const VectorType& x) const {
    require(x.size() == dim(), "grad_log_ratio: dimension mismatch");
    return x - mean_;
  }

  /// Log-ratios for every row of `samples`.
  VectorType log_ratios(const MatrixType& samples) const {
    require(samples.cols() == dim(), "log_ratios: dimension mismatch");
    return (samples * mean_).array() - Scalar(0.5) * mean_.squaredNorm();
  }

  /// sum_i w_i * grad log r(x_i).
  VectorType weighted_grad(const MatrixType& samples, const VectorType& weights) const {
    require(samples.cols() == dim(), "weighted_grad: dimension mismatch");
    require(samples.rows() == weights.size(), "weighted_grad: weight count mismatch");
    return samples.transpose() * weights - mean_ * weights.sum();
  }

 private:
  VectorType mean_;
};

using GaussianLocation = GaussianLocationModel<double>;

template <typename Scalar>
Scalar log_ratio_gaussian(const GaussianLocationModel<Scalar>& model,
                          const typename GaussianLocationModel<Scalar>::VectorType& x) {
  return model.log_ratio(x);
}

template <typename Scalar>
typename GaussianLocationModel<Scalar>::VectorType grad_logratio_gaussian(
    const GaussianLocationModel<Scalar>& model, const typename GaussianLocationModel<Scalar>::VectorType& x) {
  return model.grad_log_ratio(x);
}

/// `count` i.i.d. rows from N(mean, I).
inline Matrix sample_gaussian_location(const Vector& mean, Index count, Rng& rng) {
  require(count >= 1, "sample_gaussian_location: count must be >= 1");
  Matrix out = standard_normal(count, mean.size(), rng);
  out.rowwise() += mean.transpose();
  return out;
}

/// log N(x; mean, I).
template <typename Scalar>
Scalar log_normal_density(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x,
                          const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& mean) {
  using std::log;
  const Scalar log_two_pi = log(Scalar(2) * Scalar(EIGEN_PI));
  return Scalar(-0.5) * ((x - mean).squaredNorm() + Scalar(x.size()) * log_two_pi);
}

}  // namespace n2ce

#endif  // N2CE_GAUSSIAN_LOCATION_HPP
