#include "voices/dimred.hpp"

#include "voices/log.hpp"
#include "voices/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace voices
{

namespace
{

constexpr double kMinKDistScale = 1e-3;

}  // namespace

SmoothKnn smooth_knn_distances(const KnnGraph& knn, double tolerance, int max_iterations)
{
  const Index n = knn.n;
  const Index k = knn.k;
  const double target = std::log2(static_cast<double>(k));

  double mean_all = 0.0;
  for (double d : knn.distances) mean_all += d;
  mean_all /= static_cast<double>(std::max<std::size_t>(knn.distances.size(), 1));

  SmoothKnn out;
  out.rho.resize(static_cast<std::size_t>(n));
  out.sigma.resize(static_cast<std::size_t>(n));
  out.residual.resize(static_cast<std::size_t>(n));

  for (Index i = 0; i < n; ++i) {
    double rho = 0.0;
    for (Index m = 0; m < k; ++m) {
      if (knn.distance(i, m) > 0.0) {
        rho = knn.distance(i, m);
        break;
      }
    }

    auto weight_sum = [&](double sigma) {
      double s = 0.0;
      for (Index m = 0; m < k; ++m) {
        const double d = knn.distance(i, m) - rho;
        s += d > 0.0 ? std::exp(-d / sigma) : 1.0;
      }
      return s;
    };

    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double mid = 1.0;
    double psum = weight_sum(mid);
    for (int it = 0; it < max_iterations; ++it) {
      psum = weight_sum(mid);
      if (std::abs(psum - target) < tolerance) break;
      if (psum > target) {
        hi = mid;
        mid = 0.5 * (lo + hi);
      } else {
        lo = mid;
        mid = std::isinf(hi) ? mid * 2.0 : 0.5 * (lo + hi);
      }
    }

    // Floors for points whose neighbours are (near) duplicates; they only bind when the
    // bisection has no interior solution.
    double mean_i = 0.0;
    for (Index m = 0; m < k; ++m) mean_i += knn.distance(i, m);
    mean_i /= static_cast<double>(k);
    const double floor = kMinKDistScale * (rho > 0.0 ? mean_i : mean_all);
    if (mid < floor) mid = floor;

    out.rho[static_cast<std::size_t>(i)] = rho;
    out.sigma[static_cast<std::size_t>(i)] = mid;
    out.residual[static_cast<std::size_t>(i)] = std::abs(weight_sum(mid) - target);
  }
  return out;
}

Eigen::SparseMatrix<double> fuzzy_simplicial_set(const KnnGraph& knn, const SmoothKnn& smooth)
{
  const Index n = knn.n;
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(n * knn.k));
  for (Index i = 0; i < n; ++i) {
    const double rho = smooth.rho[static_cast<std::size_t>(i)];
    const double sigma = smooth.sigma[static_cast<std::size_t>(i)];
    for (Index m = 0; m < knn.k; ++m) {
      const double d = knn.distance(i, m) - rho;
      const double w = d > 0.0 ? std::exp(-d / sigma) : 1.0;
      triplets.emplace_back(i, knn.neighbor(i, m), w);
    }
  }
  Eigen::SparseMatrix<double> directed(n, n);
  directed.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::SparseMatrix<double> transposed = directed.transpose();
  Eigen::SparseMatrix<double> product = directed.cwiseProduct(transposed);
  Eigen::SparseMatrix<double> graph = directed + transposed - product;
  graph.prune(0.0);
  graph.makeCompressed();
  return graph;
}

std::pair<double, double> fit_ab(double spread, double min_dist)
{
  constexpr int samples = 300;
  std::vector<double> xs(samples), ys(samples);
  for (int i = 0; i < samples; ++i) {
    xs[i] = 3.0 * spread * static_cast<double>(i) / static_cast<double>(samples - 1);
    ys[i] = xs[i] < min_dist ? 1.0 : std::exp(-(xs[i] - min_dist) / spread);
  }

  auto cost = [&](double a, double b) {
    double c = 0.0;
    for (int i = 0; i < samples; ++i) {
      const double f = 1.0 / (1.0 + a * std::pow(xs[i], 2.0 * b));
      c += (f - ys[i]) * (f - ys[i]);
    }
    return c;
  };

  // Levenberg-Marquardt in (a, b), started where SciPy's curve_fit starts.
  double a = 1.0, b = 1.0, lambda = 1e-3;
  double current = cost(a, b);
  for (int iter = 0; iter < 500; ++iter) {
    Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
    Eigen::Vector2d jtr = Eigen::Vector2d::Zero();
    for (int i = 0; i < samples; ++i) {
      const double x = xs[i];
      const double p = x > 0.0 ? std::pow(x, 2.0 * b) : 0.0;
      const double denom = 1.0 + a * p;
      const double f = 1.0 / denom;
      const double r = f - ys[i];
      Eigen::Vector2d j;
      j(0) = -p / (denom * denom);
      j(1) = x > 0.0 ? -a * p * 2.0 * std::log(x) / (denom * denom) : 0.0;
      jtj += j * j.transpose();
      jtr += j * r;
    }
    bool improved = false;
    for (int tries = 0; tries < 30 && !improved; ++tries) {
      Eigen::Matrix2d damped = jtj;
      damped.diagonal() *= (1.0 + lambda);
      const Eigen::Vector2d step = damped.ldlt().solve(-jtr);
      const double na = a + step(0), nb = b + step(1);
      const double candidate = (na > 0.0 && nb > 0.0) ? cost(na, nb) : std::numeric_limits<double>::infinity();
      if (candidate < current) {
        const double gain = current - candidate;
        a = na;
        b = nb;
        current = candidate;
        lambda = std::max(lambda * 0.3, 1e-12);
        improved = true;
        if (gain < 1e-15 * std::max(1.0, current) && step.norm() < 1e-12) return {a, b};
      } else {
        lambda *= 10.0;
      }
    }
    if (!improved) break;
  }
  return {a, b};
}

Index connected_components(const Eigen::SparseMatrix<double>& graph, std::vector<Index>& labels)
{
  const Index n = graph.rows();
  std::vector<Index> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), Index{0});
  auto find = [&](Index x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  for (Index col = 0; col < graph.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(graph, col); it; ++it) {
      Index a = find(it.row()), b = find(it.col());
      if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    }
  labels.assign(static_cast<std::size_t>(n), -1);
  Index count = 0;
  std::vector<Index> root_label(static_cast<std::size_t>(n), -1);
  for (Index i = 0; i < n; ++i) {
    Index r = find(i);
    if (root_label[static_cast<std::size_t>(r)] < 0) root_label[static_cast<std::size_t>(r)] = count++;
    labels[static_cast<std::size_t>(i)] = root_label[static_cast<std::size_t>(r)];
  }
  return count;
}

namespace
{

/**
 * Top eigenpairs of the symmetric operator `apply` restricted to the complement of
 * `deflate`, by Lanczos with full reorthogonalization. Returns false when the Ritz
 * residuals do not drop below `tol` within `max_steps`.
 */
template <typename Apply>
bool lanczos_top(Apply apply, const Eigen::VectorXd& deflate, Index n, Index count, Index max_steps,
                 double tol, Rng& rng, Eigen::MatrixXd& vectors)
{
  max_steps = std::min(max_steps, n - 1);
  if (max_steps < count) return false;
  Eigen::MatrixXd q(n, max_steps + 1);
  std::vector<double> alpha, beta;

  Eigen::VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.uniform(-1.0, 1.0);
  v -= v.dot(deflate) * deflate;
  v.normalize();
  q.col(0) = v;

  Index steps = 0;
  Eigen::VectorXd w(n);
  for (Index j = 0; j < max_steps; ++j) {
    apply(q.col(j), w);
    const double a = q.col(j).dot(w);
    alpha.push_back(a);
    w -= a * q.col(j);
    if (j > 0) w -= beta.back() * q.col(j - 1);
    for (int pass = 0; pass < 2; ++pass) {
      w -= w.dot(deflate) * deflate;
      w -= q.leftCols(j + 1) * (q.leftCols(j + 1).transpose() * w);
    }
    const double bnorm = w.norm();
    steps = j + 1;

    const bool check = steps >= count && (steps % 10 == 0 || bnorm < 1e-10 || steps == max_steps);
    if (check) {
      Eigen::MatrixXd t = Eigen::MatrixXd::Zero(steps, steps);
      for (Index i = 0; i < steps; ++i) {
        t(i, i) = alpha[static_cast<std::size_t>(i)];
        if (i + 1 < steps) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
      bool converged = true;
      for (Index c = 0; c < count; ++c) {
        const double resid = std::abs(bnorm * es.eigenvectors()(steps - 1, steps - 1 - c));
        if (resid > tol) converged = false;
      }
      if (converged || bnorm < 1e-10) {
        if (!converged) return false;
        vectors.resize(n, count);
        for (Index c = 0; c < count; ++c)
          vectors.col(c) = q.leftCols(steps) * es.eigenvectors().col(steps - 1 - c);
        return true;
      }
    }
    if (bnorm < 1e-10) return false;
    beta.push_back(bnorm);
    q.col(j + 1) = w / bnorm;
  }
  return false;
}

/// Nontrivial spectral coordinates of one connected graph; false on solver failure.
bool component_spectral(const Eigen::SparseMatrix<double>& graph, Index dims, Rng& rng, Points& out)
{
  const Index n = graph.rows();
  Eigen::VectorXd degree = Eigen::VectorXd::Zero(n);
  for (Index col = 0; col < graph.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(graph, col); it; ++it) degree(it.row()) += it.value();
  if ((degree.array() <= 0.0).any()) return false;
  const Eigen::VectorXd inv_sqrt = degree.array().sqrt().inverse();
  // Largest eigenvectors of D^-1/2 W D^-1/2 are the smallest of the normalized Laplacian.
  Eigen::SparseMatrix<double> normalized = inv_sqrt.asDiagonal() * graph * inv_sqrt.asDiagonal();
  Eigen::VectorXd trivial = degree.array().sqrt();
  trivial.normalize();

  Eigen::MatrixXd vecs;
  if (n <= 600) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(normalized)};
    if (es.info() != Eigen::Success) return false;
    vecs.resize(n, dims);
    // Skip the top (trivial) eigenvector.
    for (Index c = 0; c < dims; ++c) vecs.col(c) = es.eigenvectors().col(n - 2 - c);
  } else {
    auto apply = [&](const auto& x, Eigen::VectorXd& y) { y.noalias() = normalized * x; };
    if (!lanczos_top(apply, trivial, n, dims, std::min<Index>(n - 1, 400), 1e-4, rng, vecs)) return false;
  }
  if (!vecs.allFinite()) return false;
  out = vecs;
  return true;
}

}  // namespace

SpectralLayout spectral_layout(const Eigen::SparseMatrix<double>& graph, Index dims, std::uint64_t seed)
{
  const Index n = graph.rows();
  SpectralLayout layout;
  layout.coords = Points::Zero(n, dims);

  std::vector<Index> labels;
  const Index comps = connected_components(graph, labels);

  // Component anchors: +/- unit axes while they suffice, else a square lattice.
  Points anchors = Points::Zero(comps, dims);
  if (comps <= 2 * dims) {
    const Index half = (comps + 1) / 2;
    for (Index c = 0; c < comps; ++c) anchors(c, c % half) = c < half ? 1.0 : -1.0;
  } else {
    const auto side = static_cast<Index>(std::ceil(std::sqrt(static_cast<double>(comps))));
    for (Index c = 0; c < comps; ++c) {
      anchors(c, 0) = static_cast<double>(c % side);
      if (dims > 1)
        anchors(c, 1) = static_cast<double>(c / side);
      else
        anchors(c, 0) = static_cast<double>(c);
    }
  }
  double range = 1.0;
  if (comps > 1) {
    double min_gap = std::numeric_limits<double>::infinity();
    for (Index a = 0; a < comps; ++a)
      for (Index b = a + 1; b < comps; ++b) min_gap = std::min(min_gap, (anchors.row(a) - anchors.row(b)).norm());
    range = min_gap / 2.0;
  }

  for (Index c = 0; c < comps; ++c) {
    std::vector<Index> members;
    for (Index i = 0; i < n; ++i)
      if (labels[static_cast<std::size_t>(i)] == c) members.push_back(i);
    const auto size = static_cast<Index>(members.size());
    Rng rng(seed, "spectral", static_cast<std::uint64_t>(c));

    Points local;
    bool ok = false;
    if (size >= 2 * dims && size > dims + 1) {
      std::vector<Index> position(static_cast<std::size_t>(n), -1);
      for (Index m = 0; m < size; ++m) position[static_cast<std::size_t>(members[static_cast<std::size_t>(m)])] = m;
      std::vector<Eigen::Triplet<double>> triplets;
      for (Index m = 0; m < size; ++m) {
        const Index col = members[static_cast<std::size_t>(m)];
        for (Eigen::SparseMatrix<double>::InnerIterator it(graph, col); it; ++it)
          triplets.emplace_back(position[static_cast<std::size_t>(it.row())], m, it.value());
      }
      Eigen::SparseMatrix<double> sub(size, size);
      sub.setFromTriplets(triplets.begin(), triplets.end());
      ok = component_spectral(sub, dims, rng, local);
      if (!ok) layout.ok = false;
    }
    if (!ok) {
      local.resize(size, dims);
      for (Index m = 0; m < size; ++m)
        for (Index d = 0; d < dims; ++d) local(m, d) = rng.uniform(-1.0, 1.0);
    }
    const double max_abs = local.cwiseAbs().maxCoeff();
    if (max_abs > 0.0) local *= range / max_abs;
    for (Index m = 0; m < size; ++m)
      layout.coords.row(members[static_cast<std::size_t>(m)]) = local.row(m) + anchors.row(c);
  }
  return layout;
}

namespace
{

inline double clip(double v) { return std::clamp(v, -4.0, 4.0); }

void optimize_layout(Points& emb, const std::vector<Index>& head, const std::vector<Index>& tail,
                     const std::vector<double>& epochs_per_sample, double a, double b, const UmapConfig& cfg)
{
  const Index n = emb.rows();
  const Index dims = emb.cols();
  const std::size_t edges = head.size();
  const double neg_rate = static_cast<double>(cfg.negative_sample_rate);

  std::vector<double> epochs_per_negative(edges), next_sample(edges), next_negative(edges);
  for (std::size_t e = 0; e < edges; ++e) {
    epochs_per_negative[e] = epochs_per_sample[e] / neg_rate;
    next_sample[e] = epochs_per_sample[e];
    next_negative[e] = epochs_per_negative[e];
  }

  Rng rng(cfg.seed, "umap_sgd");
  std::vector<double> cur(static_cast<std::size_t>(dims));
  for (int epoch = 0; epoch < cfg.n_epochs; ++epoch) {
    const double alpha = cfg.learning_rate * (1.0 - static_cast<double>(epoch) / cfg.n_epochs);
    const double epoch_d = static_cast<double>(epoch);
    for (std::size_t e = 0; e < edges; ++e) {
      if (next_sample[e] > epoch_d) continue;
      const Index j = head[e];
      const Index k = tail[e];
      double* current = emb.row(j).data();
      double* other = emb.row(k).data();

      double d2 = 0.0;
      for (Index d = 0; d < dims; ++d) d2 += (current[d] - other[d]) * (current[d] - other[d]);
      double coeff = 0.0;
      if (d2 > 0.0) {
        const double pb = std::pow(d2, b);
        coeff = -2.0 * a * b * (pb / d2) / (a * pb + 1.0);
      }
      for (Index d = 0; d < dims; ++d) {
        const double g = clip(coeff * (current[d] - other[d]));
        current[d] += g * alpha;
        other[d] -= g * alpha;
      }
      next_sample[e] += epochs_per_sample[e];

      const auto negatives = static_cast<long>((epoch_d - next_negative[e]) / epochs_per_negative[e]);
      for (long p = 0; p < negatives; ++p) {
        const auto m = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
        if (m == j) continue;
        const double* neg = emb.row(m).data();
        double nd2 = 0.0;
        for (Index d = 0; d < dims; ++d) nd2 += (current[d] - neg[d]) * (current[d] - neg[d]);
        if (nd2 <= 0.0) continue;
        const double rep = 2.0 * cfg.repulsion_strength * b / ((0.001 + nd2) * (a * std::pow(nd2, b) + 1.0));
        for (Index d = 0; d < dims; ++d) current[d] += clip(rep * (current[d] - neg[d])) * alpha;
      }
      next_negative[e] += static_cast<double>(negatives) * epochs_per_negative[e];
    }
  }
}

}  // namespace

UmapResult umap_fit(const Points& data, const UmapConfig& cfg)
{
  const Index n = data.rows();
  if (n < 3) throw DataError("UMAP needs at least 3 rows");
  if (cfg.n_neighbors < 2 || cfg.n_neighbors >= n)
    throw ConfigError("umap_neighbors must lie in [2, rows)");
  if (cfg.n_components < 1) throw ConfigError("n_components must be >= 1");
  if (cfg.n_epochs < 1) throw ConfigError("umap_epochs must be >= 1");
  if (!(cfg.min_dist >= 0.0 && cfg.min_dist <= cfg.spread)) throw ConfigError("umap_min_dist must lie in [0, spread]");

  UmapResult result;
  const KnnGraph knn = nearest_neighbors(data, cfg.n_neighbors, cfg.seed, cfg.exact_knn_max_rows);
  result.smoothing = smooth_knn_distances(knn);
  Eigen::SparseMatrix<double> graph = fuzzy_simplicial_set(knn, result.smoothing);

  std::vector<Index> comp_labels;
  result.graph_components = connected_components(graph, comp_labels);
  if (result.graph_components > 1) {
    const std::string msg = "UMAP: k-NN graph has " + std::to_string(result.graph_components) +
                            " disconnected components; laying them out in disjoint regions";
    result.warnings.push_back(msg);
    log::info(msg);
  }

  SpectralLayout init = spectral_layout(graph, cfg.n_components, cfg.seed);
  Points emb;
  Rng init_rng(cfg.seed, "umap_init");
  if (init.ok && init.coords.allFinite()) {
    const double expansion = 10.0 / init.coords.cwiseAbs().maxCoeff();
    emb = init.coords * expansion;
    for (Index i = 0; i < emb.rows(); ++i)
      for (Index d = 0; d < emb.cols(); ++d) emb(i, d) += 1e-4 * init_rng.normal();
  } else {
    result.spectral_init = false;
    const std::string msg = "UMAP: spectral initialisation failed; using seeded uniform layout";
    result.warnings.push_back(msg);
    log::info(msg);
    emb.resize(n, cfg.n_components);
    for (Index i = 0; i < n; ++i)
      for (Index d = 0; d < cfg.n_components; ++d) emb(i, d) = init_rng.uniform(-10.0, 10.0);
  }
  for (Index d = 0; d < emb.cols(); ++d) {
    const double lo = emb.col(d).minCoeff(), hi = emb.col(d).maxCoeff();
    if (hi > lo) emb.col(d) = (10.0 * (emb.col(d).array() - lo) / (hi - lo)).matrix();
  }

  std::tie(result.a, result.b) = fit_ab(cfg.spread, cfg.min_dist);

  // Edge sampling schedule; edges too weak to be sampled once are dropped.
  double max_w = 0.0;
  for (Index col = 0; col < graph.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(graph, col); it; ++it) max_w = std::max(max_w, it.value());
  std::vector<Index> head, tail;
  std::vector<double> epochs_per_sample;
  const double cutoff = max_w / static_cast<double>(cfg.n_epochs);
  for (Index col = 0; col < graph.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(graph, col); it; ++it) {
      if (it.value() < cutoff) continue;
      head.push_back(it.row());
      tail.push_back(it.col());
      epochs_per_sample.push_back(max_w / it.value());
    }

  optimize_layout(emb, head, tail, epochs_per_sample, result.a, result.b, cfg);
  result.embedding = std::move(emb);
  return result;
}

}  // namespace voices
