#include "gapfill/forest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>

#include "gapfill/errors.hpp"
#include "gapfill/rng.hpp"

namespace gapfill {

namespace {

void check_window_config(const WindowConfig& cfg) {
    if (cfg.initial_window_fraction <= 0.0 || cfg.initial_window_fraction >= 1.0)
        throw ConfigError("window fraction must be in (0, 1)");
    if (cfg.misfit_tolerance <= 0.0) throw ConfigError("misfit tolerance must be positive");
    if (cfg.max_rounds < 1) throw ConfigError("max_rounds must be >= 1");
}

double subset_sse(const RowMatrix& rows, const std::vector<int>& idx, int response_index) {
    double sum = 0.0, sum2 = 0.0;
    for (int i : idx) {
        double y = rows[i][response_index];
        sum += y;
        sum2 += y * y;
    }
    double sse = sum2 - sum * sum / static_cast<double>(idx.size());
    return std::max(0.0, sse);
}

double subset_mean(const RowMatrix& rows, const std::vector<int>& idx, int response_index) {
    double sum = 0.0;
    for (int i : idx) sum += rows[i][response_index];
    return sum / static_cast<double>(idx.size());
}

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

RowMatrix dataset_rows(const Dataset& d) {
    RowMatrix rows;
    rows.reserve(d.records.size());
    for (const auto& r : d.records) {
        if (!r.complete()) throw DataError("tree training requires complete records");
        std::vector<double> row;
        row.reserve(r.values.size());
        for (const auto& v : r.values) row.push_back(*v);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::optional<SplitResult> best_split(const RowMatrix& rows, const std::vector<int>& row_idx,
                                      int response_index,
                                      const std::vector<int>& predictor_indices, int min_leaf) {
    const std::size_t n = row_idx.size();
    if (n < 2) return std::nullopt;

    double parent_sse = subset_sse(rows, row_idx, response_index);

    std::vector<int> predictors = predictor_indices;
    std::sort(predictors.begin(), predictors.end());

    std::optional<SplitResult> best;
    std::vector<std::pair<double, double>> pts(n);  // (predictor value, response)
    for (int var : predictors) {
        if (var == response_index)
            throw ConfigError("response variable cannot be a predictor");
        for (std::size_t i = 0; i < n; ++i)
            pts[i] = {rows[row_idx[i]][var], rows[row_idx[i]][response_index]};
        std::sort(pts.begin(), pts.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });

        double left_sum = 0.0, left_sum2 = 0.0;
        double total_sum = 0.0, total_sum2 = 0.0;
        for (const auto& [v, y] : pts) {
            total_sum += y;
            total_sum2 += y * y;
        }
        for (std::size_t i = 0; i + 1 < n; ++i) {
            double y = pts[i].second;
            left_sum += y;
            left_sum2 += y * y;
            if (pts[i].first == pts[i + 1].first) continue;  // no cut between equal values

            auto n_l = static_cast<double>(i + 1);
            auto n_r = static_cast<double>(n - i - 1);
            if (i + 1 < static_cast<std::size_t>(min_leaf) ||
                n - i - 1 < static_cast<std::size_t>(min_leaf))
                continue;

            double sse_l = std::max(0.0, left_sum2 - left_sum * left_sum / n_l);
            double right_sum = total_sum - left_sum;
            double right_sum2 = total_sum2 - left_sum2;
            double sse_r = std::max(0.0, right_sum2 - right_sum * right_sum / n_r);
            double sse = sse_l + sse_r;
            if (!best || sse < best->sse_after)  // strict: keeps lowest var, lowest threshold
                best = SplitResult{var, (pts[i].first + pts[i + 1].first) / 2.0, sse};
        }
    }
    if (!best || !(best->sse_after < parent_sse - 1e-12)) return std::nullopt;
    return best;
}

namespace {

int build_node(std::vector<TreeNode>& nodes, const RowMatrix& rows, std::vector<int>& idx,
               int response_index, const std::vector<int>& predictors, const TreeParams& params,
               int depth) {
    TreeNode node;
    node.value = subset_mean(rows, idx, response_index);
    node.count = static_cast<int>(idx.size());

    std::optional<SplitResult> split;
    if (depth < params.max_depth)
        split = best_split(rows, idx, response_index, predictors, params.min_leaf);

    int me = static_cast<int>(nodes.size());
    nodes.push_back(node);
    if (!split) return me;

    std::vector<int> left_idx, right_idx;
    for (int i : idx)
        (rows[i][split->var] <= split->threshold ? left_idx : right_idx).push_back(i);
    idx.clear();
    idx.shrink_to_fit();

    nodes[me].leaf = false;
    nodes[me].split_var = split->var;
    nodes[me].threshold = split->threshold;
    int l = build_node(nodes, rows, left_idx, response_index, predictors, params, depth + 1);
    int r = build_node(nodes, rows, right_idx, response_index, predictors, params, depth + 1);
    nodes[me].left = l;
    nodes[me].right = r;
    return me;
}

}  // namespace

RegressionTree grow_tree(const RowMatrix& rows, int response_index,
                         const std::vector<int>& predictor_indices, const TreeParams& params) {
    if (rows.empty()) throw DataError("cannot grow a tree from zero rows");
    if (params.max_depth < 0 || params.min_leaf < 1)
        throw ConfigError("tree params need max_depth >= 0 and min_leaf >= 1");
    for (int p : predictor_indices)
        if (p == response_index) throw ConfigError("response variable cannot be a predictor");

    RegressionTree tree;
    tree.response_index = response_index;
    tree.predictor_indices = predictor_indices;
    tree.params = params;
    std::vector<int> idx(rows.size());
    std::iota(idx.begin(), idx.end(), 0);
    build_node(tree.nodes, rows, idx, response_index, predictor_indices, params, 0);
    return tree;
}

double predict_row(const RegressionTree& tree, std::span<const double> row) {
    int i = 0;
    while (!tree.nodes[i].leaf) {
        const auto& n = tree.nodes[i];
        i = row[n.split_var] <= n.threshold ? n.left : n.right;
    }
    return tree.nodes[i].value;
}

double predict(const RegressionTree& tree, const Record& record) {
    int i = 0;
    while (!tree.nodes[i].leaf) {
        const auto& n = tree.nodes[i];
        const auto& v = record.values.at(n.split_var);
        if (!v)
            throw DataError("predictor " + std::to_string(n.split_var) +
                            " is missing on the routing path");
        i = *v <= n.threshold ? n.left : n.right;
    }
    return tree.nodes[i].value;
}

RegressionTree train_window(const RowMatrix& rows, int response_index,
                            const std::vector<int>& predictor_indices, const TreeParams& params,
                            const WindowConfig& window_cfg, std::uint64_t seed,
                            WindowStats* stats) {
    check_window_config(window_cfg);
    if (rows.size() < 10) throw DataError("windowed training needs at least 10 rows");

    const std::size_t n = rows.size();
    auto k = static_cast<std::size_t>(
        std::floor(window_cfg.initial_window_fraction * static_cast<double>(n)));
    k = std::max<std::size_t>(2, std::min(k, n));

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed);
    rng.shuffle(perm);

    std::vector<bool> in_window(n, false);
    std::vector<int> window(perm.begin(), perm.begin() + k);
    for (int i : window) in_window[i] = true;

    RowMatrix window_rows;
    auto grow_on_window = [&]() {
        window_rows.clear();
        window_rows.reserve(window.size());
        for (int i : window) window_rows.push_back(rows[i]);
        return grow_tree(window_rows, response_index, predictor_indices, params);
    };

    RegressionTree tree = grow_on_window();
    int rounds = 0;
    bool converged = false;
    while (true) {
        std::vector<int> misfits;
        for (std::size_t i = 0; i < n; ++i) {
            if (in_window[i]) continue;
            double err = std::abs(predict_row(tree, rows[i]) - rows[i][response_index]);
            if (err > window_cfg.misfit_tolerance) misfits.push_back(static_cast<int>(i));
        }
        if (misfits.empty()) {
            converged = true;
            break;
        }
        if (rounds >= window_cfg.max_rounds) break;
        for (int i : misfits) {
            in_window[i] = true;
            window.push_back(i);
        }
        tree = grow_on_window();
        ++rounds;
    }
    if (stats) *stats = {rounds, converged, window.size()};
    return tree;
}

RegressionForest train_forest(const RowMatrix& rows, int response_index, int n_trees,
                              const TreeParams& params, const WindowConfig& window_cfg,
                              std::uint64_t seed) {
    if (n_trees < 1) throw ConfigError("forest needs at least one tree");
    if (rows.empty()) throw DataError("cannot train a forest from zero rows");
    int arity = static_cast<int>(rows.front().size());
    if (response_index < 0 || response_index >= arity)
        throw ConfigError("response index out of range");

    std::vector<int> predictors;
    for (int i = 0; i < arity; ++i)
        if (i != response_index) predictors.push_back(i);

    RegressionForest forest;
    forest.response_index = response_index;
    forest.trees.reserve(n_trees);
    for (int t = 0; t < n_trees; ++t)
        forest.trees.push_back(train_window(rows, response_index, predictors, params, window_cfg,
                                            seed + static_cast<std::uint64_t>(t)));
    return forest;
}

GeneBounds derive_bounds(const RegressionForest& forest, const Record& record, double margin) {
    if (forest.trees.empty()) throw DataError("empty forest");
    if (margin < 0.0) throw ConfigError("bound margin must be nonnegative");

    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& tree : forest.trees) {
        double p = predict(tree, record);
        lo = std::min(lo, p);
        hi = std::max(hi, p);
    }
    lo = std::max(0.0, lo - margin);
    hi = std::min(1.0, hi + margin);

    GeneBounds b;
    b.bounds.emplace_back(lo, hi);
    return b;
}

namespace {

struct PruneNode {
    TreeNode node;
    std::unique_ptr<PruneNode> left, right;
};

// returns the (possibly collapsed) subtree and its SSE on the validation rows
std::pair<std::unique_ptr<PruneNode>, double> prune_rec(const RegressionTree& tree, int node_idx,
                                                        const RowMatrix& val,
                                                        const std::vector<int>& idx) {
    const TreeNode& n = tree.nodes[node_idx];
    auto leaf_sse = [&]() {
        double s = 0.0;
        for (int i : idx) {
            double e = val[i][tree.response_index] - n.value;
            s += e * e;
        }
        return s;
    };

    auto out = std::make_unique<PruneNode>();
    out->node = n;
    if (n.leaf) return {std::move(out), leaf_sse()};

    std::vector<int> lidx, ridx;
    for (int i : idx) (val[i][n.split_var] <= n.threshold ? lidx : ridx).push_back(i);
    auto [l, sse_l] = prune_rec(tree, n.left, val, lidx);
    auto [r, sse_r] = prune_rec(tree, n.right, val, ridx);

    double keep_sse = sse_l + sse_r;
    double collapse_sse = leaf_sse();
    if (collapse_sse <= keep_sse) {
        out->node.leaf = true;
        out->node.split_var = -1;
        out->node.threshold = 0.0;
        out->node.left = out->node.right = -1;
        return {std::move(out), collapse_sse};
    }
    out->left = std::move(l);
    out->right = std::move(r);
    return {std::move(out), keep_sse};
}

int flatten(const PruneNode& p, std::vector<TreeNode>& nodes) {
    int me = static_cast<int>(nodes.size());
    nodes.push_back(p.node);
    if (!p.node.leaf) {
        nodes[me].left = flatten(*p.left, nodes);
        nodes[me].right = flatten(*p.right, nodes);
    }
    return me;
}

}  // namespace

RegressionTree prune(const RegressionTree& tree, const RowMatrix& validation_rows) {
    if (validation_rows.empty()) throw DataError("pruning needs a nonempty validation set");
    std::vector<int> idx(validation_rows.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto [root, sse] = prune_rec(tree, 0, validation_rows, idx);
    (void)sse;
    RegressionTree out;
    out.response_index = tree.response_index;
    out.predictor_indices = tree.predictor_indices;
    out.params = tree.params;
    flatten(*root, out.nodes);
    return out;
}

namespace {

void write_node(std::ofstream& out, const RegressionTree& tree, int idx) {
    const TreeNode& n = tree.nodes[idx];
    if (n.leaf) {
        out << "L " << g17(n.value) << ' ' << n.count << '\n';
    } else {
        out << "I " << n.split_var << ' ' << g17(n.threshold) << '\n';
        write_node(out, tree, n.left);
        write_node(out, tree, n.right);
    }
}

// pre-order parse; internal value/count are rebuilt as the weighted mean of
// the children, which equals the training mean of the node's rows
int read_node(std::ifstream& in, RegressionTree& tree, const std::string& path,
              int response_index) {
    std::string tag;
    if (!(in >> tag)) throw DataError(path + ": truncated tree");
    int me = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (tag == "L") {
        TreeNode n;
        n.leaf = true;
        if (!(in >> n.value >> n.count)) throw DataError(path + ": bad leaf line");
        tree.nodes[me] = n;
    } else if (tag == "I") {
        TreeNode n;
        n.leaf = false;
        if (!(in >> n.split_var >> n.threshold)) throw DataError(path + ": bad internal line");
        if (n.split_var == response_index)
            throw DataError(path + ": split on the response variable");
        tree.nodes[me] = n;
        int l = read_node(in, tree, path, response_index);
        int r = read_node(in, tree, path, response_index);
        auto& node = tree.nodes[me];
        node.left = l;
        node.right = r;
        node.count = tree.nodes[l].count + tree.nodes[r].count;
        node.value = node.count > 0
                         ? (tree.nodes[l].value * tree.nodes[l].count +
                            tree.nodes[r].value * tree.nodes[r].count) / node.count
                         : 0.0;
    } else {
        throw DataError(path + ": unexpected node tag '" + tag + "'");
    }
    return me;
}

}  // namespace

void save_forest(const RegressionForest& forest, const std::string& path) {
    if (forest.trees.empty()) throw DataError("refusing to save an empty forest");
    std::ofstream out(path);
    if (!out) throw DataError("cannot write forest file: " + path);
    out << "gapfill-forest 1\n";
    out << "response " << forest.response_index << '\n';
    out << "trees " << forest.trees.size() << '\n';
    for (std::size_t t = 0; t < forest.trees.size(); ++t) {
        out << "tree " << t << '\n';
        write_node(out, forest.trees[t], 0);
    }
    if (!out) throw DataError("write failed: " + path);
}

RegressionForest load_forest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open forest file: " + path);
    std::string magic, key;
    int version = 0;
    if (!(in >> magic >> version) || magic != "gapfill-forest" || version != 1)
        throw DataError(path + ": not a gapfill-forest v1 file");

    RegressionForest forest;
    std::size_t n_trees = 0;
    if (!(in >> key >> forest.response_index) || key != "response")
        throw DataError(path + ": bad response line");
    if (!(in >> key >> n_trees) || key != "trees" || n_trees == 0)
        throw DataError(path + ": bad tree-count line");

    for (std::size_t t = 0; t < n_trees; ++t) {
        std::size_t tree_no = 0;
        if (!(in >> key >> tree_no) || key != "tree" || tree_no != t)
            throw DataError(path + ": bad tree header");
        RegressionTree tree;
        tree.response_index = forest.response_index;
        read_node(in, tree, path, forest.response_index);
        std::vector<int> used;
        for (const auto& n : tree.nodes)
            if (!n.leaf) used.push_back(n.split_var);
        std::sort(used.begin(), used.end());
        used.erase(std::unique(used.begin(), used.end()), used.end());
        tree.predictor_indices = std::move(used);
        forest.trees.push_back(std::move(tree));
    }
    return forest;
}

}  // namespace gapfill
