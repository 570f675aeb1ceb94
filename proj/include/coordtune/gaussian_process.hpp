#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace coordtune {

struct GpHyperparameters {
  Eigen::VectorXd lengthscales;
  double signal_variance = 1.0;
  double noise_variance = 1e-6;
};

/// Exact GP regression with a squared-exponential ARD kernel
///
///   k(x, x') = signal_variance * exp(-0.5 * sum_d (x_d - x'_d)^2 / l_d^2)
///
/// and a constant prior mean equal to the empirical mean of the targets (0
/// with no data). The Cholesky factor is rebuilt on every change; training
/// sets here stay in the low hundreds.
class GaussianProcess {
 public:
  explicit GaussianProcess(std::size_t input_dims);
  GaussianProcess(std::size_t input_dims, GpHyperparameters hyper);

  struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
  };

  void add_observation(std::span<const double> x, double y);
  void set_hyperparameters(GpHyperparameters hyper);
  const GpHyperparameters& hyperparameters() const { return hyper_; }

  /// Maximizes the log marginal likelihood over log-lengthscales (bounded to
  /// [1e-2, 1e2]), log signal variance and log noise variance with projected
  /// Adam steps from the current values. Deterministic.
  void fit_hyperparameters(int iterations = 40);
  double log_marginal_likelihood() const;

  Prediction predict(std::span<const double> x) const;
  /// Columns of `points` are query inputs.
  void predict_batch(const Eigen::MatrixXd& points, Eigen::VectorXd& mean, Eigen::VectorXd& variance) const;

  std::size_t size() const { return targets_.size(); }
  std::size_t input_dims() const { return dims_; }
  double prior_mean() const { return prior_mean_; }
  double prior_variance() const { return hyper_.signal_variance; }
  double best_target() const;

 private:
  double kernel(const double* a, const double* b) const;
  void refactor();

  std::size_t dims_;
  GpHyperparameters hyper_;
  std::vector<double> inputs_;  // row-major, size() x dims_
  std::vector<double> targets_;
  double prior_mean_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  Eigen::VectorXd alpha_;
  Eigen::MatrixXd train_;  // dims_ x size(), column per input
};

/// Expected improvement below `best` for a Gaussian N(mean, variance).
double expected_improvement(double mean, double variance, double best);

}  // namespace coordtune
