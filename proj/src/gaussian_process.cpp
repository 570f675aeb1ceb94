#include "coordtune/gaussian_process.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace coordtune {

namespace {

constexpr double kMinLengthscale = 1e-2;
constexpr double kMaxLengthscale = 1e2;

}  // namespace

GaussianProcess::GaussianProcess(std::size_t input_dims)
    : GaussianProcess(input_dims, GpHyperparameters{Eigen::VectorXd::Constant(static_cast<Eigen::Index>(input_dims), 1.0),
                                                    1.0, 1e-6}) {}

GaussianProcess::GaussianProcess(std::size_t input_dims, GpHyperparameters hyper) : dims_(input_dims) {
  set_hyperparameters(std::move(hyper));
}

void GaussianProcess::set_hyperparameters(GpHyperparameters hyper) {
  if (static_cast<std::size_t>(hyper.lengthscales.size()) != dims_)
    throw std::invalid_argument("one lengthscale per input dimension required");
  if (!(hyper.signal_variance > 0.0) || !(hyper.noise_variance > 0.0))
    throw std::invalid_argument("GP variances must be positive");
  for (Eigen::Index d = 0; d < hyper.lengthscales.size(); ++d)
    if (!(hyper.lengthscales[d] > 0.0)) throw std::invalid_argument("lengthscales must be positive");
  hyper_ = std::move(hyper);
  refactor();
}

void GaussianProcess::add_observation(std::span<const double> x, double y) {
  if (x.size() != dims_) throw std::invalid_argument("GP input has the wrong dimension");
  if (!std::isfinite(y)) throw std::invalid_argument("GP target must be finite");
  inputs_.insert(inputs_.end(), x.begin(), x.end());
  targets_.push_back(y);
  refactor();
}

double GaussianProcess::best_target() const {
  if (targets_.empty()) return std::numeric_limits<double>::infinity();
  return *std::min_element(targets_.begin(), targets_.end());
}

double GaussianProcess::kernel(const double* a, const double* b) const {
  double r2 = 0.0;
  for (std::size_t d = 0; d < dims_; ++d) {
    const double z = (a[d] - b[d]) / hyper_.lengthscales[static_cast<Eigen::Index>(d)];
    r2 += z * z;
  }
  return hyper_.signal_variance * std::exp(-0.5 * r2);
}

void GaussianProcess::refactor() {
  const auto n = static_cast<Eigen::Index>(targets_.size());
  train_.resize(static_cast<Eigen::Index>(dims_), n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (std::size_t d = 0; d < dims_; ++d)
      train_(static_cast<Eigen::Index>(d), i) = inputs_[static_cast<std::size_t>(i) * dims_ + d];
  if (n == 0) {
    prior_mean_ = 0.0;
    alpha_.resize(0);
    return;
  }
  double sum = 0.0;
  for (double y : targets_) sum += y;
  prior_mean_ = sum / static_cast<double>(n);

  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j)
      k(i, j) = k(j, i) = kernel(&inputs_[static_cast<std::size_t>(i) * dims_], &inputs_[static_cast<std::size_t>(j) * dims_]);
  // Jitter only when the factorization fails.
  double jitter = 0.0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::MatrixXd kn = k;
    kn.diagonal().array() += hyper_.noise_variance + jitter;
    chol_.compute(kn);
    if (chol_.info() == Eigen::Success) break;
    jitter = jitter == 0.0 ? 1e-10 * hyper_.signal_variance : jitter * 100.0;
  }
  Eigen::VectorXd resid(n);
  for (Eigen::Index i = 0; i < n; ++i) resid[i] = targets_[static_cast<std::size_t>(i)] - prior_mean_;
  alpha_ = chol_.solve(resid);
}

GaussianProcess::Prediction GaussianProcess::predict(std::span<const double> x) const {
  if (x.size() != dims_) throw std::invalid_argument("GP query has the wrong dimension");
  Prediction p{prior_mean_, hyper_.signal_variance};
  const auto n = static_cast<Eigen::Index>(targets_.size());
  if (n == 0) return p;
  Eigen::VectorXd ks(n);
  for (Eigen::Index i = 0; i < n; ++i) ks[i] = kernel(&inputs_[static_cast<std::size_t>(i) * dims_], x.data());
  p.mean += ks.dot(alpha_);
  const Eigen::VectorXd v = chol_.matrixL().solve(ks);
  p.variance = std::max(0.0, hyper_.signal_variance - v.squaredNorm());
  return p;
}

void GaussianProcess::predict_batch(const Eigen::MatrixXd& points, Eigen::VectorXd& mean,
                                    Eigen::VectorXd& variance) const {
  if (static_cast<std::size_t>(points.rows()) != dims_) throw std::invalid_argument("GP query has the wrong dimension");
  const Eigen::Index m = points.cols();
  const auto n = static_cast<Eigen::Index>(targets_.size());
  mean = Eigen::VectorXd::Constant(m, prior_mean_);
  variance = Eigen::VectorXd::Constant(m, hyper_.signal_variance);
  if (n == 0) return;

  const Eigen::VectorXd inv_len = hyper_.lengthscales.cwiseInverse();
  const Eigen::MatrixXd a = inv_len.asDiagonal() * train_;
  const Eigen::MatrixXd b = inv_len.asDiagonal() * points;
  Eigen::MatrixXd ks = -2.0 * (a.transpose() * b);
  ks.colwise() += a.colwise().squaredNorm().transpose();
  ks.rowwise() += b.colwise().squaredNorm();
  ks = (hyper_.signal_variance * (-0.5 * ks.array().max(0.0)).exp()).matrix();

  mean.noalias() += ks.transpose() * alpha_;
  chol_.matrixL().solveInPlace(ks);
  variance = (hyper_.signal_variance - ks.colwise().squaredNorm().transpose().array()).max(0.0).matrix();
}

double GaussianProcess::log_marginal_likelihood() const {
  const auto n = static_cast<Eigen::Index>(targets_.size());
  if (n == 0) return 0.0;
  Eigen::VectorXd resid(n);
  for (Eigen::Index i = 0; i < n; ++i) resid[i] = targets_[static_cast<std::size_t>(i)] - prior_mean_;
  const auto& l = chol_.matrixLLT();
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) log_det += std::log(l(i, i));
  return -0.5 * resid.dot(alpha_) - log_det - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

void GaussianProcess::fit_hyperparameters(int iterations) {
  const auto n = static_cast<Eigen::Index>(targets_.size());
  if (n < 2) return;
  const auto d = static_cast<Eigen::Index>(dims_);

  double var = 0.0;
  for (double y : targets_) var += (y - prior_mean_) * (y - prior_mean_);
  var = std::max(var / static_cast<double>(n), 1e-12);

  // theta = [log l_1..d, log signal, log noise]
  const Eigen::Index p = d + 2;
  Eigen::VectorXd lo(p), hi(p), theta(p);
  for (Eigen::Index i = 0; i < d; ++i) {
    lo[i] = std::log(kMinLengthscale);
    hi[i] = std::log(kMaxLengthscale);
    theta[i] = std::log(hyper_.lengthscales[i]);
  }
  lo[d] = std::log(1e-3 * var);
  hi[d] = std::log(1e3 * var);
  lo[d + 1] = std::log(1e-6 * var);
  hi[d + 1] = std::log(var);
  theta[d] = std::log(hyper_.signal_variance);
  theta[d + 1] = std::log(hyper_.noise_variance);
  theta = theta.cwiseMax(lo).cwiseMin(hi);

  // Pairwise squared differences per input dim, reused every iteration.
  std::vector<Eigen::MatrixXd> sq_diff(static_cast<std::size_t>(d), Eigen::MatrixXd(n, n));
  for (Eigen::Index k = 0; k < d; ++k)
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        const double diff = train_(k, i) - train_(k, j);
        sq_diff[static_cast<std::size_t>(k)](i, j) = diff * diff;
      }

  Eigen::VectorXd resid(n);
  for (Eigen::Index i = 0; i < n; ++i) resid[i] = targets_[static_cast<std::size_t>(i)] - prior_mean_;

  auto evaluate = [&](const Eigen::VectorXd& th, Eigen::VectorXd* grad) -> double {
    const double sf2 = std::exp(th[d]);
    const double sn2 = std::exp(th[d + 1]);
    Eigen::MatrixXd r2 = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 0; k < d; ++k) r2 += sq_diff[static_cast<std::size_t>(k)] * std::exp(-2.0 * th[k]);
    const Eigen::MatrixXd kse = sf2 * (-0.5 * r2.array()).exp().matrix();
    Eigen::MatrixXd kn = kse;
    kn.diagonal().array() += sn2 + 1e-10 * sf2;
    Eigen::LLT<Eigen::MatrixXd> llt(kn);
    if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    const Eigen::VectorXd a = llt.solve(resid);
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) log_det += std::log(llt.matrixLLT()(i, i));
    const double lml = -0.5 * resid.dot(a) - log_det - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
    if (grad) {
      const Eigen::MatrixXd w = a * a.transpose() - llt.solve(Eigen::MatrixXd::Identity(n, n));
      const Eigen::MatrixXd wk = w.cwiseProduct(kse);
      grad->resize(p);
      for (Eigen::Index k = 0; k < d; ++k)
        (*grad)[k] = 0.5 * wk.cwiseProduct(sq_diff[static_cast<std::size_t>(k)]).sum() * std::exp(-2.0 * th[k]);
      (*grad)[d] = 0.5 * wk.sum();
      (*grad)[d + 1] = 0.5 * sn2 * w.trace();
    }
    return lml;
  };

  // Adam from the current values and from a fixed broad start; the fit with
  // the higher likelihood wins. The second start keeps an early fit stuck on
  // short lengthscales from carrying over.
  Eigen::VectorXd broad(p);
  broad.head(d).setConstant(std::log(3.0));
  broad[d] = std::log(var);
  broad[d + 1] = std::log(1e-3 * var);
  broad = broad.cwiseMax(lo).cwiseMin(hi);

  Eigen::VectorXd best = theta;
  double best_value = evaluate(theta, nullptr);
  Eigen::VectorXd grad;
  for (Eigen::VectorXd start : {theta, broad}) {
    Eigen::VectorXd th = start;
    Eigen::VectorXd m1 = Eigen::VectorXd::Zero(p), m2 = Eigen::VectorXd::Zero(p);
    constexpr double rate = 0.1, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    for (int it = 1; it <= iterations; ++it) {
      const double value = evaluate(th, &grad);
      if (!std::isfinite(value)) break;
      if (value > best_value) {
        best_value = value;
        best = th;
      }
      m1 = beta1 * m1 + (1.0 - beta1) * grad;
      m2 = beta2 * m2 + (1.0 - beta2) * grad.cwiseProduct(grad);
      const Eigen::VectorXd mh = m1 / (1.0 - std::pow(beta1, it));
      const Eigen::VectorXd vh = m2 / (1.0 - std::pow(beta2, it));
      th += (rate * mh.array() / (vh.array().sqrt() + eps)).matrix();
      th = th.cwiseMax(lo).cwiseMin(hi);
    }
    const double last = evaluate(th, nullptr);
    if (last > best_value) {
      best_value = last;
      best = th;
    }
  }

  GpHyperparameters h;
  h.lengthscales = best.head(d).array().exp().matrix();
  h.signal_variance = std::exp(best[d]);
  h.noise_variance = std::exp(best[d + 1]);
  set_hyperparameters(std::move(h));
}

double expected_improvement(double mean, double variance, double best) {
  const double sigma = std::sqrt(std::max(variance, 0.0));
  const double gap = best - mean;
  if (sigma <= 1e-12) return std::max(gap, 0.0);
  const double z = gap / sigma;
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return gap * cdf + sigma * pdf;
}

}  // namespace coordtune
