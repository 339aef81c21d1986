#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "ember/data.hpp"
#include "ember/kriging.hpp"

namespace ember {

/// Weighted empirical conditional distribution over training target values.
/// Support is sorted ascending; weights are nonnegative and sum to 1.
/// Evaluation is right-continuous: F(z) = sum of weights with support <= z.
class ConditionalCdf {
 public:
  ConditionalCdf() = default;

  ConditionalCdf(std::vector<double> support, std::vector<double> weights)
      : support_(std::move(support)), weights_(std::move(weights)) {
    if (support_.empty() || support_.size() != weights_.size()) {
      throw DataError("conditional CDF needs matching, non-empty support and weights");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < support_.size(); ++i) {
      if (i > 0 && !(support_[i - 1] < support_[i])) {
        throw DataError("conditional CDF support must be strictly ascending");
      }
      if (weights_[i] < 0.0) throw DataError("conditional CDF weights must be nonnegative");
      sum += weights_[i];
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw DataError("conditional CDF weights sum to " + std::to_string(sum) + ", expected 1");
    }
    cumulative_.resize(weights_.size());
    std::partial_sum(weights_.begin(), weights_.end(), cumulative_.begin());
  }

  std::size_t size() const { return support_.size(); }
  const std::vector<double>& support() const { return support_; }
  const std::vector<double>& weights() const { return weights_; }
  double min_support() const { return support_.front(); }
  double max_support() const { return support_.back(); }

  /// F(z), right-continuous.
  double cdf(double z) const {
    const auto it = std::upper_bound(support_.begin(), support_.end(), z);
    if (it == support_.begin()) return 0.0;
    return cumulative_[static_cast<std::size_t>(it - support_.begin()) - 1];
  }

  /// Left limit F(z-): total weight strictly below z.
  double cdf_below(double z) const {
    const auto it = std::lower_bound(support_.begin(), support_.end(), z);
    if (it == support_.begin()) return 0.0;
    return cumulative_[static_cast<std::size_t>(it - support_.begin()) - 1];
  }

  double mean() const {
    double m = 0.0;
    for (std::size_t i = 0; i < support_.size(); ++i) m += weights_[i] * support_[i];
    return m;
  }

  double stddev() const {
    const double m = mean();
    double v = 0.0;
    for (std::size_t i = 0; i < support_.size(); ++i) {
      const double d = support_[i] - m;
      v += weights_[i] * d * d;
    }
    return std::sqrt(std::max(0.0, v));
  }

  /// Lower-convention quantile: smallest support value whose cumulative
  /// weight reaches p.
  double quantile(double p) const {
    if (!(p > 0.0 && p < 1.0)) {
      throw DataError("quantile probability must lie in (0,1), got " + std::to_string(p));
    }
    const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), p);
    if (it == cumulative_.end()) return support_.back();
    return support_[static_cast<std::size_t>(it - cumulative_.begin())];
  }

  /// P(a <= Z <= b), inclusive of both endpoints.
  double interval_prob(double a, double b) const {
    if (a > b) throw DataError("interval probability needs a <= b");
    return std::max(0.0, cdf(b) - cdf_below(a));
  }

 private:
  std::vector<double> support_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;
};

inline double cdf_mean(const ConditionalCdf& cdf) { return cdf.mean(); }
inline double cdf_quantile(const ConditionalCdf& cdf, double p) { return cdf.quantile(p); }
inline double cdf_interval_prob(const ConditionalCdf& cdf, double a, double b) {
  return cdf.interval_prob(a, b);
}

// ---------------------------------------------------------------------------

struct ForestParams {
  std::size_t n_trees = 100;
  std::size_t mtry = 0;  // 0 picks the default ceil(p_total / 3)
  std::size_t min_node_size = 1;
  double subsample_fraction = 0.632;
  bool bootstrap = false;
  std::uint64_t seed = 0;
  std::vector<KrigingSpec> embedded;

  std::size_t effective_mtry(std::size_t p_total) const {
    const std::size_t m = mtry == 0 ? (p_total + 2) / 3 : mtry;
    return std::min(std::max<std::size_t>(1, m), p_total);
  }

  void validate() const {
    if (n_trees < 1) throw DataError("forest needs at least one tree");
    if (min_node_size < 1) throw DataError("min_node_size must be >= 1");
    if (!(subsample_fraction > 0.0 && subsample_fraction <= 1.0)) {
      throw DataError("subsample fraction must lie in (0,1]");
    }
    for (const auto& spec : embedded) spec.validate();
  }
};

struct TreeNode {
  std::int32_t var = -1;  // split variable; -1 marks a terminal node
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::uint32_t begin = 0;  // terminal: slot range into Tree::leaf_slots
  std::uint32_t end = 0;

  bool terminal() const { return var < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;
  std::vector<std::uint32_t> inbag;       // training-sample index per slot
  std::vector<std::uint32_t> leaf_slots;  // slot ids grouped by terminal node
  std::vector<std::vector<double>> embedded;  // per embedded spec, m_{-i} per slot
};

/// Trained embedded-model quantile forest. Immutable after training.
class EmberModel {
 public:
  EmberModel() = default;

  const ForestParams& params() const { return params_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  std::size_t p_data() const { return p_data_; }
  std::size_t p_total() const { return feature_names_.size(); }
  const std::vector<double>& targets() const { return targets_; }
  const SampleSet& training_samples() const { return samples_; }
  const std::vector<Tree>& trees() const { return trees_; }
  const std::vector<double>& support() const { return support_; }
  const std::vector<std::uint32_t>& atom_of() const { return atom_of_; }

  std::string id() const {
    return "forest-" + std::to_string(params_.seed) + "-" + std::to_string(trees_.size()) +
           "t" + std::to_string(targets_.size()) + "n";
  }

  /// Leaf node index reached by dropping y down tree t.
  std::size_t descend(std::size_t t, std::span<const double> y) const {
    const Tree& tree = trees_[t];
    std::size_t node = 0;
    while (!tree.nodes[node].terminal()) {
      const TreeNode& nd = tree.nodes[node];
      node = y[static_cast<std::size_t>(nd.var)] < nd.threshold
                 ? static_cast<std::size_t>(nd.left)
                 : static_cast<std::size_t>(nd.right);
    }
    return node;
  }

  // Internal: used by train() and deserialization.
  static EmberModel assemble(ForestParams params, std::vector<std::string> feature_names,
                             std::size_t p_data, std::vector<double> targets, SampleSet samples,
                             std::vector<Tree> trees) {
    EmberModel m;
    m.params_ = std::move(params);
    m.feature_names_ = std::move(feature_names);
    m.p_data_ = p_data;
    m.targets_ = std::move(targets);
    m.samples_ = std::move(samples);
    m.trees_ = std::move(trees);
    m.build_support();
    return m;
  }

 private:
  void build_support() {
    support_ = targets_;
    std::sort(support_.begin(), support_.end());
    support_.erase(std::unique(support_.begin(), support_.end()), support_.end());
    atom_of_.resize(targets_.size());
    for (std::size_t i = 0; i < targets_.size(); ++i) {
      const auto it = std::lower_bound(support_.begin(), support_.end(), targets_[i]);
      atom_of_[i] = static_cast<std::uint32_t>(it - support_.begin());
    }
  }

  ForestParams params_;
  std::vector<std::string> feature_names_;
  std::size_t p_data_ = 0;
  std::vector<double> targets_;
  SampleSet samples_;
  std::vector<Tree> trees_;
  std::vector<double> support_;
  std::vector<std::uint32_t> atom_of_;
};

namespace detail {

// Feature lookup during growth: data columns come from the feature matrix,
// embedded columns from the per-tree cross-validated estimates.
struct GrowContext {
  const FeatureMatrix* features;
  const std::vector<double>* targets;
  Tree* tree;
  std::size_t p_data;
  std::size_t p_total;
  std::size_t mtry;
  std::size_t min_node_size;

  double value(std::uint32_t slot, std::size_t var) const {
    const std::uint32_t sample = tree->inbag[slot];
    if (var < p_data) return (*features)(sample, var);
    return tree->embedded[var - p_data][slot];
  }
  double target(std::uint32_t slot) const { return (*targets)[tree->inbag[slot]]; }
};

struct SplitChoice {
  bool found = false;
  std::size_t var = 0;
  double threshold = 0.0;
  double score = 0.0;
};

inline SplitChoice pick_split(const GrowContext& ctx, std::span<std::uint32_t> slots, Rng& rng) {
  SplitChoice best;
  const auto candidates = rng.sample_without_replacement(ctx.p_total, ctx.mtry);
  for (const std::size_t var : candidates) {
    double lo = ctx.value(slots[0], var), hi = lo;
    for (std::size_t k = 1; k < slots.size(); ++k) {
      const double v = ctx.value(slots[k], var);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (!(lo < hi)) continue;  // constant within the node

    // One uniform split value per candidate, kept inside (lo, hi] so both
    // children are non-empty.
    double s = lo + rng.uniform01() * (hi - lo);
    if (!(s > lo)) s = std::nexttoward(lo, hi);
    if (s > hi) s = hi;

    std::size_t n_left = 0;
    double sum_left = 0.0, sq_left = 0.0, sum_all = 0.0, sq_all = 0.0;
    for (const std::uint32_t slot : slots) {
      const double z = ctx.target(slot);
      sum_all += z;
      sq_all += z * z;
      if (ctx.value(slot, var) < s) {
        ++n_left;
        sum_left += z;
        sq_left += z * z;
      }
    }
    const std::size_t n_right = slots.size() - n_left;
    if (n_left == 0 || n_right == 0) continue;
    if (n_left < ctx.min_node_size || n_right < ctx.min_node_size) continue;

    const double sum_right = sum_all - sum_left;
    const double sq_right = sq_all - sq_left;
    const double sse_left = sq_left - sum_left * sum_left / static_cast<double>(n_left);
    const double sse_right = sq_right - sum_right * sum_right / static_cast<double>(n_right);
    const double score = sse_left + sse_right;

    const bool wins = !best.found || score < best.score ||
                      (score == best.score &&
                       (var < best.var || (var == best.var && s < best.threshold)));
    if (wins) {
      best.found = true;
      best.var = var;
      best.threshold = s;
      best.score = score;
    }
  }
  return best;
}

inline void grow_tree(GrowContext& ctx, Rng& rng) {
  Tree& tree = *ctx.tree;
  auto& slots = tree.leaf_slots;
  slots.resize(tree.inbag.size());
  for (std::uint32_t s = 0; s < slots.size(); ++s) slots[s] = s;

  struct Work {
    std::int32_t node;
    std::uint32_t begin, end;
  };
  tree.nodes.clear();
  tree.nodes.push_back(TreeNode{});
  std::vector<Work> stack{{0, 0, static_cast<std::uint32_t>(slots.size())}};

  while (!stack.empty()) {
    const Work w = stack.back();
    stack.pop_back();
    TreeNode& node = tree.nodes[static_cast<std::size_t>(w.node)];
    const std::size_t count = w.end - w.begin;
    const std::span<std::uint32_t> range{slots.data() + w.begin, count};

    bool terminal = count <= ctx.min_node_size;
    if (!terminal) {
      double zmin = ctx.target(range[0]), zmax = zmin;
      for (std::size_t k = 1; k < count; ++k) {
        const double z = ctx.target(range[k]);
        zmin = std::min(zmin, z);
        zmax = std::max(zmax, z);
      }
      terminal = !(zmin < zmax);  // zero target variance
    }

    SplitChoice split;
    if (!terminal) {
      split = pick_split(ctx, range, rng);
      if (!split.found) split = pick_split(ctx, range, rng);  // one redraw
      terminal = !split.found;
    }

    if (terminal) {
      node.var = -1;
      node.begin = w.begin;
      node.end = w.end;
      continue;
    }

    const auto mid = std::stable_partition(range.begin(), range.end(), [&](std::uint32_t slot) {
      return ctx.value(slot, split.var) < split.threshold;
    });
    const auto n_left = static_cast<std::uint32_t>(mid - range.begin());

    node.var = static_cast<std::int32_t>(split.var);
    node.threshold = split.threshold;
    node.left = static_cast<std::int32_t>(tree.nodes.size());
    node.right = node.left + 1;
    const std::int32_t left = node.left, right = node.right;
    tree.nodes.push_back(TreeNode{});
    tree.nodes.push_back(TreeNode{});
    // Left subtree is processed first so the rng stream does not depend on
    // container layout.
    stack.push_back({right, w.begin + n_left, w.end});
    stack.push_back({left, w.begin, w.begin + n_left});
  }
}

inline std::vector<std::uint32_t> draw_inbag(std::size_t n, const ForestParams& params, Rng& rng) {
  std::vector<std::uint32_t> inbag;
  if (params.bootstrap) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      inbag.clear();
      inbag.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        inbag.push_back(static_cast<std::uint32_t>(rng.uniform_index(n)));
      }
      std::sort(inbag.begin(), inbag.end());
      // At least two distinct samples keep leave-one-out well posed.
      if (inbag.front() != inbag.back()) return inbag;
    }
    throw NumericError("bootstrap kept drawing a single distinct sample");
  }
  const auto m = static_cast<std::size_t>(
      std::clamp<long long>(std::llround(params.subsample_fraction * static_cast<double>(n)), 2,
                            static_cast<long long>(n)));
  const auto picked = rng.sample_without_replacement(n, m);
  inbag.assign(picked.begin(), picked.end());
  return inbag;
}

}  // namespace detail

/// Train the forest. Per tree: draw parameters from the seeded rng, draw
/// the in-bag set, convert each embedded model into a per-slot datum via
/// leave-one-out estimates over the in-bag samples, then grow with the
/// randomized split rule (one uniform split value per candidate variable,
/// best size-weighted child variance wins). Deterministic given the seed;
/// trees may be built in parallel.
inline EmberModel train(const SampleSet& samples, const FeatureMatrix& features,
                        const ForestParams& params) {
  params.validate();
  const std::size_t n = samples.size();
  if (n < 2) throw DataError("training needs at least 2 samples");
  if (features.rows() != n) {
    throw DataError("feature matrix has " + std::to_string(features.rows()) +
                    " rows for " + std::to_string(n) + " samples");
  }
  for (std::size_t r = 0; r < n; ++r) {
    for (double v : features.row(r)) {
      if (!std::isfinite(v)) {
        throw DataError("feature row " + std::to_string(r) + " contains a non-finite value");
      }
    }
  }

  std::vector<std::string> names = features.names();
  for (std::size_t e = 0; e < params.embedded.size(); ++e) {
    names.push_back("embedded_" + std::to_string(e));
  }
  const std::size_t p_data = features.cols();
  const std::size_t p_total = names.size();
  if (p_total == 0) throw DataError("training needs at least one feature column");

  const std::vector<double> targets = samples.values();
  std::vector<Tree> trees(params.n_trees);

  parallel_for(params.n_trees, [&](std::size_t t) {
    Rng rng(derive_seed(params.seed, t));
    Tree& tree = trees[t];
    tree.inbag = detail::draw_inbag(n, params, rng);

    if (!params.embedded.empty()) {
      // Unique in-bag samples (bootstrap may duplicate slots).
      std::vector<std::uint32_t> unique = tree.inbag;
      unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
      const std::vector<std::size_t> unique_idx(unique.begin(), unique.end());
      const SampleSet inbag_set = samples.subset(unique_idx);

      tree.embedded.resize(params.embedded.size());
      for (std::size_t e = 0; e < params.embedded.size(); ++e) {
        const auto loo = loo_cross_validate(params.embedded[e], inbag_set);
        auto& col = tree.embedded[e];
        col.resize(tree.inbag.size());
        for (std::size_t s = 0; s < tree.inbag.size(); ++s) {
          const auto pos = std::lower_bound(unique.begin(), unique.end(), tree.inbag[s]) -
                           unique.begin();
          col[s] = loo[static_cast<std::size_t>(pos)];
        }
      }
    }

    detail::GrowContext ctx{&features, &targets,        &tree,
                            p_data,    p_total,         params.effective_mtry(p_total),
                            params.min_node_size};
    detail::grow_tree(ctx, rng);
  });

  return EmberModel::assemble(params, std::move(names), p_data, targets, samples,
                              std::move(trees));
}

/// Per-tree weights: 1/|leaf| on each in-bag sample index in the leaf that
/// y lands in, zero elsewhere. Returned sparse, sorted by sample index.
inline std::vector<std::pair<std::uint32_t, double>> tree_weights(const EmberModel& model,
                                                                  std::size_t tree_index,
                                                                  std::span<const double> y) {
  if (tree_index >= model.trees().size()) throw DataError("tree index out of range");
  if (y.size() != model.p_total()) {
    throw DataError("feature row has " + std::to_string(y.size()) + " entries, expected " +
                    std::to_string(model.p_total()));
  }
  const Tree& tree = model.trees()[tree_index];
  const TreeNode& leaf = tree.nodes[model.descend(tree_index, y)];
  const double w = 1.0 / static_cast<double>(leaf.end - leaf.begin);
  std::vector<std::pair<std::uint32_t, double>> out;
  for (std::uint32_t s = leaf.begin; s < leaf.end; ++s) {
    const std::uint32_t sample = tree.inbag[tree.leaf_slots[s]];
    bool found = false;
    for (auto& [idx, weight] : out) {
      if (idx == sample) {
        weight += w;
        found = true;
        break;
      }
    }
    if (!found) out.emplace_back(sample, w);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Append the full-data embedded-model predictions at the target to a row
/// of data features. Cross validation is a training-time device only.
inline std::vector<double> predict_features(const EmberModel& model, const SampleSet& samples,
                                            const Location& target,
                                            std::span<const double> secondary_row) {
  if (secondary_row.size() != model.p_data()) {
    throw DataError("secondary row has " + std::to_string(secondary_row.size()) +
                    " entries, expected " + std::to_string(model.p_data()));
  }
  std::vector<double> row(secondary_row.begin(), secondary_row.end());
  row.reserve(model.p_total());
  for (const auto& spec : model.params().embedded) {
    row.push_back(krige(spec, samples, target).estimate);
  }
  return row;
}

/// Forest conditional CDF at feature row y: tree-averaged leaf weights
/// aggregated over the distinct training target values.
inline ConditionalCdf conditional_cdf(const EmberModel& model, std::span<const double> y) {
  if (model.trees().empty()) throw DataError("model has no trees");
  if (y.size() != model.p_total()) {
    throw DataError("feature row has " + std::to_string(y.size()) + " entries, expected " +
                    std::to_string(model.p_total()));
  }
  std::vector<double> atom_w(model.support().size(), 0.0);
  const double inv_k = 1.0 / static_cast<double>(model.trees().size());
  for (std::size_t t = 0; t < model.trees().size(); ++t) {
    const Tree& tree = model.trees()[t];
    const TreeNode& leaf = tree.nodes[model.descend(t, y)];
    const double w = inv_k / static_cast<double>(leaf.end - leaf.begin);
    for (std::uint32_t s = leaf.begin; s < leaf.end; ++s) {
      atom_w[model.atom_of()[tree.inbag[tree.leaf_slots[s]]]] += w;
    }
  }
  std::vector<double> support, weights;
  support.reserve(atom_w.size());
  weights.reserve(atom_w.size());
  for (std::size_t a = 0; a < atom_w.size(); ++a) {
    if (atom_w[a] > 0.0) {
      support.push_back(model.support()[a]);
      weights.push_back(atom_w[a]);
    }
  }
  return ConditionalCdf(std::move(support), std::move(weights));
}

}  // namespace ember
