#include "voices/cluster.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <numbers>

namespace voices
{

namespace
{

struct Component
{
  Eigen::LLT<Eigen::MatrixXd> chol;
  double log_det = 0.0;
};

Component factor(const Eigen::MatrixXd& cov, int index)
{
  Component c;
  c.chol.compute(cov);
  if (c.chol.info() != Eigen::Success)
    throw DataError("GMM: covariance of component " + std::to_string(index) +
                    " is singular after regularization");
  const Eigen::MatrixXd l = c.chol.matrixL();
  c.log_det = 2.0 * l.diagonal().array().log().sum();
  if (!std::isfinite(c.log_det))
    throw DataError("GMM: covariance of component " + std::to_string(index) +
                    " is singular after regularization");
  return c;
}

/// Log responsibilities (unnormalized) and total log-likelihood.
double e_step(const Points& data, const GmmDetail& model, Eigen::MatrixXd& log_resp)
{
  const Index n = data.rows();
  const Index k = model.weights.size();
  const auto dim = static_cast<double>(data.cols());
  log_resp.resize(n, k);
  for (Index c = 0; c < k; ++c) {
    Component comp = factor(model.covariances[static_cast<std::size_t>(c)], static_cast<int>(c));
    const double log_w = model.weights(c) > 0.0 ? std::log(model.weights(c)) : -std::numeric_limits<double>::infinity();
    const double norm = -0.5 * (dim * std::log(2.0 * std::numbers::pi) + comp.log_det);
    Eigen::MatrixXd diff = (data.rowwise() - model.means.row(c)).transpose();
    comp.chol.matrixL().solveInPlace(diff);
    log_resp.col(c) = (log_w + norm - 0.5 * diff.colwise().squaredNorm().array()).matrix().transpose();
  }
  double ll = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double m = log_resp.row(i).maxCoeff();
    const double lse = m + std::log((log_resp.row(i).array() - m).exp().sum());
    log_resp.row(i).array() -= lse;
    ll += lse;
  }
  return ll;
}

void m_step(const Points& data, const Eigen::MatrixXd& log_resp, const ClusterConfig& cfg, GmmDetail& model)
{
  const Index n = data.rows();
  const Index k = log_resp.cols();
  const Eigen::MatrixXd resp = log_resp.array().exp();
  for (Index c = 0; c < k; ++c) {
    const double nk = resp.col(c).sum() + 10.0 * std::numeric_limits<double>::epsilon();
    model.weights(c) = nk / static_cast<double>(n);
    model.means.row(c) = (resp.col(c).transpose() * data) / nk;
    const Eigen::MatrixXd centered = data.rowwise() - model.means.row(c);
    Eigen::MatrixXd cov;
    if (cfg.covariance == CovarianceType::full) {
      cov = (centered.array().colwise() * resp.col(c).array()).matrix().transpose() * centered / nk;
    } else {
      Eigen::VectorXd var = (centered.array().square().colwise() * resp.col(c).array()).colwise().sum().transpose() / nk;
      cov = var.asDiagonal();
    }
    cov.diagonal().array() += cfg.gmm_ridge;
    model.covariances[static_cast<std::size_t>(c)] = (cov + cov.transpose()) / 2.0;
  }
}

}  // namespace

ClusterAssignment gmm(const Points& data, const ClusterConfig& cfg)
{
  const Index n = data.rows();
  if (cfg.k < 1) throw ConfigError("cluster.k: must be >= 1");
  if (cfg.k > n)
    throw ConfigError("cluster.k: " + std::to_string(cfg.k) + " exceeds the row count " + std::to_string(n));

  ClusterConfig init_cfg = cfg;
  init_cfg.algorithm = ClusterAlgorithm::kmeans;
  const ClusterAssignment init = kmeans(data, init_cfg);

  // Start from the k-means partition: hard responsibilities through one M-step.
  const Index k = init.n_clusters;
  GmmDetail model;
  model.weights.resize(k);
  model.means.resize(k, data.cols());
  model.covariances.resize(static_cast<std::size_t>(k));
  Eigen::MatrixXd log_resp = Eigen::MatrixXd::Constant(n, k, -std::numeric_limits<double>::infinity());
  for (Index i = 0; i < n; ++i) log_resp(i, init.labels[static_cast<std::size_t>(i)]) = 0.0;
  m_step(data, log_resp, cfg, model);

  double previous = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.max_iter; ++it) {
    const double ll = e_step(data, model, log_resp);
    model.log_likelihood_trace.push_back(ll);
    model.iterations = it + 1;
    if (it > 0 && ll - previous < cfg.tol) {
      model.converged = true;
      break;
    }
    previous = ll;
    if (it + 1 == cfg.max_iter) break;
    m_step(data, log_resp, cfg, model);
  }

  ClusterAssignment out;
  out.algorithm = ClusterAlgorithm::gmm;
  out.labels.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    Index arg = 0;
    log_resp.row(i).maxCoeff(&arg);
    out.labels[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  auto mapping = canonicalize_labels(out.labels, static_cast<int>(k));
  int used = 0;
  for (int m : mapping) used += m != kNoise;

  // Components that won no rows are dropped from the reported model.
  GmmDetail reported;
  reported.weights.resize(used);
  reported.means.resize(used, data.cols());
  reported.covariances.resize(static_cast<std::size_t>(used));
  for (Index old = 0; old < k; ++old) {
    const int m = mapping[static_cast<std::size_t>(old)];
    if (m == kNoise) continue;
    reported.weights(m) = model.weights(old);
    reported.means.row(m) = model.means.row(old);
    reported.covariances[static_cast<std::size_t>(m)] = model.covariances[static_cast<std::size_t>(old)];
  }
  reported.log_likelihood_trace = std::move(model.log_likelihood_trace);
  reported.iterations = model.iterations;
  reported.converged = model.converged;

  out.n_clusters = used;
  out.centroids = reported.means;
  out.model_detail = std::move(reported);
  flag_degenerate(out);
  return out;
}

}  // namespace voices
