#include "voices/dimred.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace voices
{

namespace
{

constexpr Index kCovarianceMaxDim = 512;

/// Extend the orthonormal rows of `basis` (first `filled` rows valid) to `basis.rows()` rows.
void complete_orthonormal(Eigen::MatrixXd& basis, Index filled)
{
  const Index dim = basis.cols();
  Index next = filled;
  for (Index axis = 0; axis < dim && next < basis.rows(); ++axis) {
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Unit(dim, axis);
    for (int pass = 0; pass < 2; ++pass)
      for (Index r = 0; r < next; ++r) v -= v.dot(basis.row(r)) * basis.row(r);
    const double norm = v.norm();
    if (norm > 1e-6) basis.row(next++) = v / norm;
  }
}

void fix_signs(Eigen::MatrixXd& components)
{
  for (Index r = 0; r < components.rows(); ++r) {
    Index arg = 0;
    components.row(r).cwiseAbs().maxCoeff(&arg);
    if (components(r, arg) < 0.0) components.row(r) *= -1.0;
  }
}

}  // namespace

Points PcaModel::transform(const Points& data) const
{
  if (data.cols() != mean.size()) throw DataError("PCA transform: dimension mismatch");
  return (data.rowwise() - mean.transpose()) * components.transpose();
}

PcaModel pca_fit(const Points& data, Index n_components, Index drop_top)
{
  const Index n = data.rows();
  const Index dim = data.cols();
  if (n < 2) throw DataError("PCA needs at least 2 rows");
  if (n_components < 1 || drop_top < 0 || n_components + drop_top > dim)
    throw ConfigError("PCA: n_components + pca_drop_top must lie in [1, dim]");

  PcaModel model;
  model.mean = data.colwise().mean().transpose();
  const Eigen::MatrixXd centered = data.rowwise() - model.mean.transpose();
  const Index wanted = n_components + drop_top;

  Eigen::MatrixXd all(wanted, dim);
  Eigen::VectorXd variance = Eigen::VectorXd::Zero(wanted);
  if (dim <= kCovarianceMaxDim) {
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw DataError("PCA: eigendecomposition failed");
    // Eigen returns ascending eigenvalues.
    for (Index c = 0; c < wanted; ++c) {
      all.row(c) = solver.eigenvectors().col(dim - 1 - c).transpose();
      variance(c) = std::max(0.0, solver.eigenvalues()(dim - 1 - c));
    }
  } else {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    const Index available = std::min(wanted, svd.matrixV().cols());
    for (Index c = 0; c < available; ++c) {
      all.row(c) = svd.matrixV().col(c).transpose();
      const double s = svd.singularValues()(c);
      variance(c) = s * s / static_cast<double>(n - 1);
    }
    complete_orthonormal(all, available);
  }

  model.components = all.bottomRows(n_components);
  model.explained_variance = variance.tail(n_components);
  fix_signs(model.components);
  return model;
}

}  // namespace voices
