#include "voices/sweep.hpp"

#include "voices/log.hpp"
#include "voices/rng.hpp"
#include "voices/serialize.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <future>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <thread>

namespace voices
{

std::string to_string(SweepMode mode) { return mode == SweepMode::random ? "random" : "grid"; }

SweepMode sweep_mode_from_string(const std::string& name)
{
  if (name == "random") return SweepMode::random;
  if (name == "grid") return SweepMode::grid;
  throw ConfigError("unknown sweep mode '" + name + "' (expected random or grid)");
}

std::string to_string(ScoreSpace space) { return space == ScoreSpace::reduced ? "reduced" : "original"; }

ScoreSpace score_space_from_string(const std::string& name)
{
  if (name == "reduced") return ScoreSpace::reduced;
  if (name == "original") return ScoreSpace::original;
  throw ConfigError("unknown score space '" + name + "' (expected reduced or original)");
}

namespace
{

template <typename T>
void check_axis(const std::vector<T>& axis, const char* name, T lo, T hi, bool enforce)
{
  if (axis.empty()) throw ConfigError(std::string("sweep.") + name + ": axis is empty");
  if (!enforce) return;
  for (const auto& v : axis)
    if (v < lo || v > hi)
      throw ConfigError(std::string("sweep.") + name + ": value " + std::to_string(v) + " outside [" +
                        std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

bool uses(const std::vector<ReductionMethod>& methods, ReductionMethod m)
{
  return std::find(methods.begin(), methods.end(), m) != methods.end();
}

bool uses(const std::vector<ClusterAlgorithm>& algorithms, ClusterAlgorithm a)
{
  return std::find(algorithms.begin(), algorithms.end(), a) != algorithms.end();
}

/// The grid as two explicit lists; trial i of the grid is (reductions[i / C], clusters[i % C]).
struct Grid
{
  std::vector<ReductionConfig> reductions;
  std::vector<ClusterConfig> clusters;

  std::uint64_t size() const { return static_cast<std::uint64_t>(reductions.size()) * clusters.size(); }
  TrialConfig at(std::uint64_t i) const
  {
    return {reductions[static_cast<std::size_t>(i / clusters.size())], clusters[static_cast<std::size_t>(i % clusters.size())]};
  }
};

Grid build_grid(const SweepSpec& spec)
{
  Grid grid;
  for (auto method : spec.methods) {
    ReductionConfig base = spec.reduction_base;
    base.method = method;
    base.seed = spec.seed;
    if (method == ReductionMethod::none) {
      grid.reductions.push_back(base);
      continue;
    }
    for (auto nc : spec.n_components) {
      base.n_components = nc;
      if (method == ReductionMethod::pca) {
        grid.reductions.push_back(base);
        continue;
      }
      for (auto nn : spec.umap_neighbors)
        for (auto md : spec.umap_min_dist) {
          base.umap_neighbors = nn;
          base.umap_min_dist = md;
          grid.reductions.push_back(base);
        }
    }
  }
  for (auto algorithm : spec.algorithms) {
    ClusterConfig base = spec.cluster_base;
    base.algorithm = algorithm;
    base.seed = spec.seed;
    base.allow_out_of_range = spec.allow_out_of_range;
    if (algorithm != ClusterAlgorithm::hdbscan) {
      for (int k : spec.k) {
        base.k = k;
        grid.clusters.push_back(base);
      }
      continue;
    }
    for (double eps : spec.hdbscan_eps)
      for (int ms : spec.hdbscan_min_samples)
        for (int mcs : spec.hdbscan_min_cluster_size) {
          base.hdbscan_eps = eps;
          base.hdbscan_min_samples = ms;
          base.hdbscan_min_cluster_size = mcs;
          grid.clusters.push_back(base);
        }
  }
  // Axes may repeat values; drop duplicates while keeping first-seen order.
  auto dedupe = [](auto& list) {
    std::set<std::string> seen;
    std::size_t out = 0;
    for (std::size_t i = 0; i < list.size(); ++i) {
      Json j = list[i];
      if (seen.insert(j.dump()).second) list[out++] = list[i];
    }
    list.resize(out);
  };
  dedupe(grid.reductions);
  dedupe(grid.clusters);
  return grid;
}

/// Hands out trial configurations in sequence order; thread-safe.
class TrialSource
{
public:
  TrialSource(const SweepSpec& spec) : grid_(build_grid(spec)), mode_(spec.mode), seed_(spec.seed)
  {
    limit_ = grid_.size();
    if (spec.max_trials) limit_ = std::min<std::uint64_t>(limit_, *spec.max_trials);
  }

  std::optional<std::pair<std::size_t, TrialConfig>> next()
  {
    std::lock_guard lock(mutex_);
    if (issued_ >= limit_) return std::nullopt;
    const std::size_t index = static_cast<std::size_t>(issued_++);
    if (mode_ == SweepMode::grid) return std::make_pair(index, grid_.at(index));
    Rng rng(seed_, "sweep_trial", index);
    std::uint64_t pick = rng.below(grid_.size());
    // Linear probing keeps the draw deterministic and guarantees progress.
    while (drawn_.contains(pick)) pick = (pick + 1) % grid_.size();
    drawn_.insert(pick);
    return std::make_pair(index, grid_.at(pick));
  }

private:
  Grid grid_;
  SweepMode mode_;
  std::uint64_t seed_;
  std::uint64_t limit_ = 0;
  std::uint64_t issued_ = 0;
  std::set<std::uint64_t> drawn_;
  std::mutex mutex_;
};

/// Bounded FIFO cache of reduced matrices; concurrent requests for one key share a fit.
class ReductionCache
{
public:
  ReductionCache(const EmbeddingMatrix& emb, std::size_t capacity) : emb_(emb), capacity_(std::max<std::size_t>(capacity, 1)) {}

  std::shared_ptr<const ReducedMatrix> get(const ReductionConfig& cfg)
  {
    const std::string key = Json(cfg).dump();
    std::shared_future<std::shared_ptr<const ReducedMatrix>> future;
    std::promise<std::shared_ptr<const ReducedMatrix>> promise;
    bool owner = false;
    {
      std::lock_guard lock(mutex_);
      auto it = entries_.find(key);
      if (it != entries_.end()) {
        future = it->second;
      } else {
        future = promise.get_future().share();
        entries_.emplace(key, future);
        order_.push_back(key);
        owner = true;
        while (order_.size() > capacity_) {
          entries_.erase(order_.front());
          order_.pop_front();
        }
      }
    }
    if (owner) {
      try {
        promise.set_value(std::make_shared<const ReducedMatrix>(reduce(emb_, cfg)));
      } catch (...) {
        promise.set_exception(std::current_exception());
      }
    }
    return future.get();
  }

private:
  const EmbeddingMatrix& emb_;
  std::size_t capacity_;
  std::map<std::string, std::shared_future<std::shared_ptr<const ReducedMatrix>>> entries_;
  std::deque<std::string> order_;
  std::mutex mutex_;
};

std::map<std::size_t, TrialResult> read_log(const std::filesystem::path& path)
{
  std::map<std::size_t, TrialResult> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto r = Json::parse(line).get<TrialResult>();
      out[r.index] = std::move(r);
    } catch (const std::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

void check_sweep_spec(const SweepSpec& spec, Index rows, Index dim)
{
  const bool enforce = !spec.allow_out_of_range;
  if (spec.methods.empty()) throw ConfigError("sweep.methods: axis is empty");
  if (spec.algorithms.empty()) throw ConfigError("sweep.algorithms: axis is empty");
  const bool reduces = uses(spec.methods, ReductionMethod::pca) || uses(spec.methods, ReductionMethod::umap);
  if (reduces) {
    check_axis<Index>(spec.n_components, "n_components", 2, 40, enforce);
    for (auto nc : spec.n_components)
      if (nc < 1 || nc >= dim)
        throw ConfigError("sweep.n_components: " + std::to_string(nc) + " must lie in [1, " + std::to_string(dim) + ")");
  }
  if (uses(spec.methods, ReductionMethod::umap)) {
    check_axis<Index>(spec.umap_neighbors, "umap_neighbors", 80, 100, enforce);
    check_axis<double>(spec.umap_min_dist, "umap_min_dist", 0.8, 1.0, enforce);
    for (auto nn : spec.umap_neighbors)
      if (nn < 2 || nn >= rows)
        throw ConfigError("sweep.umap_neighbors: " + std::to_string(nn) + " must lie in [2, " + std::to_string(rows) + ")");
  }
  if (uses(spec.algorithms, ClusterAlgorithm::kmeans) || uses(spec.algorithms, ClusterAlgorithm::gmm)) {
    check_axis<int>(spec.k, "k", 2, 19, enforce);
    for (int k : spec.k)
      if (k < 1 || k > rows) throw ConfigError("sweep.k: " + std::to_string(k) + " must lie in [1, rows]");
  }
  if (uses(spec.algorithms, ClusterAlgorithm::hdbscan)) {
    check_axis<double>(spec.hdbscan_eps, "hdbscan_eps", 0.0, 1.0, enforce);
    check_axis<int>(spec.hdbscan_min_samples, "hdbscan_min_samples", 2, 100, enforce);
    check_axis<int>(spec.hdbscan_min_cluster_size, "hdbscan_min_cluster_size", 2, 100, enforce);
    for (int ms : spec.hdbscan_min_samples)
      if (ms < 1 || ms >= rows) throw ConfigError("sweep.hdbscan_min_samples: " + std::to_string(ms) + " must be below the row count");
  }
  if (spec.budget_seconds && !(*spec.budget_seconds > 0.0)) throw ConfigError("sweep.budget_seconds: must be > 0");
  if (spec.max_trials && *spec.max_trials == 0) throw ConfigError("sweep.max_trials: must be > 0");
  if (spec.parallelism < 1) throw ConfigError("sweep.parallelism: must be >= 1");
}

std::size_t grid_size(const SweepSpec& spec) { return static_cast<std::size_t>(build_grid(spec).size()); }

std::uint64_t config_hash(const TrialConfig& config) { return fnv1a64(Json(config).dump()); }

bool trial_before(const TrialResult& a, const TrialResult& b)
{
  if (a.degenerate != b.degenerate) return !a.degenerate;
  if (a.degenerate) return a.index < b.index;
  if (a.report.silhouette != b.report.silhouette) return a.report.silhouette > b.report.silhouette;
  if (a.report.davies_bouldin != b.report.davies_bouldin) return a.report.davies_bouldin < b.report.davies_bouldin;
  if (a.report.n_clusters != b.report.n_clusters) return a.report.n_clusters < b.report.n_clusters;
  if (a.hash != b.hash) return a.hash < b.hash;
  return a.index < b.index;
}

const TrialResult& select_best(const std::vector<TrialResult>& trials)
{
  const TrialResult* best = nullptr;
  for (const auto& t : trials)
    if (!t.degenerate && (!best || trial_before(t, *best))) best = &t;
  if (!best) throw DegenerateError("sweep: no non-degenerate trial to select");
  return *best;
}

std::vector<TrialConfig> trial_sequence(const SweepSpec& spec, std::size_t count)
{
  TrialSource source(spec);
  std::vector<TrialConfig> out;
  while (out.size() < count) {
    auto next = source.next();
    if (!next) break;
    out.push_back(next->second);
  }
  return out;
}

TrialResult evaluate_trial(const Dataset& ds, const ReducedMatrix& reduced, const TrialConfig& config,
                           const SweepSpec& spec, const std::vector<int>* ground_truth)
{
  const auto start = std::chrono::steady_clock::now();
  TrialResult r;
  r.config = config;
  r.hash = config_hash(config);
  r.report.silhouette = std::numeric_limits<double>::quiet_NaN();
  r.report.davies_bouldin = std::numeric_limits<double>::quiet_NaN();
  try {
    const ClusterAssignment assignment = cluster(reduced.values, config.cluster);
    r.report.n_clusters = assignment.n_clusters;
    if (assignment.degenerate) {
      r.degenerate = true;
      r.reason = assignment.degenerate_reason;
    } else {
      const Points& scored = spec.score_space == ScoreSpace::original ? ds.embeddings.values : reduced.values;
      r.report = validate(scored, assignment, ds, spec.validation, ground_truth);
    }
  } catch (const DegenerateError& e) {
    r.degenerate = true;
    r.reason = e.what();
  } catch (const DataError& e) {
    r.degenerate = true;
    r.reason = e.what();
  }
  r.report.degenerate = r.degenerate;
  r.report.degenerate_reason = r.reason;
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::vector<TrialResult> run_sweep(const Dataset& ds, const SweepSpec& spec, const SweepOptions& options)
{
  check_sweep_spec(spec, ds.rows(), ds.embeddings.dim());
  const auto start = std::chrono::steady_clock::now();
  auto expired = [&] {
    return spec.budget_seconds &&
           std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() >= *spec.budget_seconds;
  };

  std::map<std::size_t, TrialResult> previous;
  std::ofstream log;
  if (options.log_path) {
    previous = read_log(*options.log_path);
    log.open(*options.log_path, std::ios::app);
    if (!log) throw DataError("cannot write sweep log " + options.log_path->string());
  }

  TrialSource source(spec);
  ReductionCache cache(ds.embeddings, spec.cache_size);
  std::vector<TrialResult> results;
  std::mutex mutex;
  std::exception_ptr failure;

  auto worker = [&] {
    while (true) {
      std::optional<std::pair<std::size_t, TrialConfig>> next;
      {
        std::lock_guard lock(mutex);
        if (failure || expired()) return;
      }
      next = source.next();
      if (!next) return;
      const auto& [index, config] = *next;

      if (auto it = previous.find(index); it != previous.end()) {
        if (!(it->second.config == config))
          throw ConfigError("sweep log entry " + std::to_string(index) + " does not match this sweep's configuration");
        std::lock_guard lock(mutex);
        results.push_back(it->second);
        continue;
      }

      const auto reduced = cache.get(config.reduction);
      TrialResult r = evaluate_trial(ds, *reduced, config, spec, options.ground_truth);
      r.index = index;
      std::lock_guard lock(mutex);
      if (log.is_open()) log << Json(r).dump() << '\n' << std::flush;
      log::info("sweep trial " + std::to_string(index) + ": silhouette " + std::to_string(r.report.silhouette) +
                (r.degenerate ? " (degenerate)" : ""));
      results.push_back(std::move(r));
    }
  };
  auto guarded = [&] {
    try {
      worker();
    } catch (...) {
      std::lock_guard lock(mutex);
      if (!failure) failure = std::current_exception();
    }
  };

  if (spec.parallelism <= 1) {
    guarded();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < spec.parallelism; ++t) threads.emplace_back(guarded);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  if (results.empty()) throw DegenerateError("sweep: no trial completed within the budget");

  std::sort(results.begin(), results.end(), trial_before);
  return results;
}

}  // namespace voices
