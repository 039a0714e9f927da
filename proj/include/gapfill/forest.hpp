#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gapfill/genetic.hpp"
#include "gapfill/schema.hpp"

namespace gapfill {

// Flat node storage; children referenced by index. Every node carries the
// mean response and row count of its training subset so pruning can collapse
// internals into leaves.
struct TreeNode {
    bool leaf = true;
    int split_var = -1;      // predictor index, internal nodes only
    double threshold = 0.0;  // route left iff value <= threshold
    int left = -1;
    int right = -1;
    double value = 0.0;  // mean response of training rows at this node
    int count = 0;
};

struct TreeParams {
    int max_depth = 12;
    int min_leaf = 5;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    int response_index = -1;
    std::vector<int> predictor_indices;
    TreeParams params;
};

struct RegressionForest {
    std::vector<RegressionTree> trees;
    int response_index = -1;
};

struct WindowConfig {
    double initial_window_fraction = 0.25;
    double misfit_tolerance = 0.05;  // normalized units
    int max_rounds = 10;
};

struct SplitResult {
    int var = -1;
    double threshold = 0.0;
    double sse_after = 0.0;
};

struct WindowStats {
    int rounds = 0;  // regrowth rounds actually taken
    bool converged = false;
    std::size_t window_size = 0;
};

using RowMatrix = std::vector<std::vector<double>>;

// Complete normalized dataset as plain rows.
RowMatrix dataset_rows(const Dataset& d);

// Exhaustive scan over midpoints between consecutive distinct sorted values of
// each predictor; minimizes left SSE + right SSE of the response. Empty when
// nothing strictly reduces SSE or a child would fall under min_leaf. Ties go
// to the lowest variable index, then the lowest threshold.
std::optional<SplitResult> best_split(const RowMatrix& rows, const std::vector<int>& row_idx,
                                      int response_index,
                                      const std::vector<int>& predictor_indices,
                                      int min_leaf = 1);

RegressionTree grow_tree(const RowMatrix& rows, int response_index,
                         const std::vector<int>& predictor_indices, const TreeParams& params);

// Record variant used by the pipeline: throws on a missing predictor along
// the routed path.
double predict(const RegressionTree& tree, const Record& record);
double predict_row(const RegressionTree& tree, std::span<const double> row);

// Grow on a seeded random window, absorb rows mispredicted beyond
// misfit_tolerance, regrow; stop when nothing misfits or max_rounds is hit.
RegressionTree train_window(const RowMatrix& rows, int response_index,
                            const std::vector<int>& predictor_indices, const TreeParams& params,
                            const WindowConfig& window_cfg, std::uint64_t seed,
                            WindowStats* stats = nullptr);

// n_trees windowed trees with derived seeds (seed + tree index); predictors
// default to every variable except the response.
RegressionForest train_forest(const RowMatrix& rows, int response_index, int n_trees,
                              const TreeParams& params, const WindowConfig& window_cfg,
                              std::uint64_t seed);

// Min/max of the per-tree leaf predictions, widened by margin, clipped to
// [0,1]. One gene: the forest's response variable.
GeneBounds derive_bounds(const RegressionForest& forest, const Record& record,
                         double margin = 0.05);

// Reduced-error pruning against a validation set: collapse a subtree to a
// leaf whenever validation SSE does not increase.
RegressionTree prune(const RegressionTree& tree, const RowMatrix& validation_rows);

// Line-oriented text dump, one `I var threshold` / `L value count` node per
// line in pre-order.
void save_forest(const RegressionForest& forest, const std::string& path);
RegressionForest load_forest(const std::string& path);

}  // namespace gapfill
