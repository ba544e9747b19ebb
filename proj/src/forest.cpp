#include "fact/forest.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fact/parallel.hpp"
#include "fact/rng.hpp"

#include "json.hpp"

namespace fact {

int ForestParams::resolve_mtry(std::size_t p) const {
    if (mtry > 0) return mtry;
    return static_cast<int>((p + 2) / 3);  // ceil(p / 3)
}

void ForestParams::validate(std::size_t p) const {
    if (n_trees < 1) throw std::invalid_argument("ForestParams: n_trees must be >= 1");
    if (min_node_size < 1) {
        throw std::invalid_argument("ForestParams: min_node_size must be >= 1");
    }
    if (resolve_mtry(p) > static_cast<int>(p)) {
        throw std::invalid_argument("ForestParams: mtry exceeds feature count");
    }
    if (!(bootstrap_fraction > 0.0 && bootstrap_fraction <= 1.0)) {
        throw std::invalid_argument("ForestParams: bootstrap_fraction must be in (0, 1]");
    }
    if (max_depth && *max_depth < 1) {
        throw std::invalid_argument("ForestParams: max_depth must be >= 1");
    }
}

namespace {

// Column-major copy of the training features.
struct ColumnData {
    std::size_t n = 0, p = 0;
    std::vector<double> values;  // p blocks of n

    ColumnData(const Dataset& data) : n(data.n_rows()), p(data.n_cols()) {
        values.resize(n * p);
        for (std::size_t c = 0; c < p; ++c) {
            for (std::size_t r = 0; r < n; ++r) {
                values[c * n + r] = data.features(r, c);
            }
        }
    }
    const double* column(std::size_t c) const { return values.data() + c * n; }
};

struct SortedValue {
    double v;
    double y;
    int id;
};

// Scratch buffers reused across levels of one tree.
struct TreeWorkspace {
    std::vector<int> feature_buffer;  // persistent partial Fisher-Yates buffer
    std::vector<int> mult;            // bootstrap multiplicity per row
    std::vector<int> slot_of_row;     // frontier slot per row, -1 when settled
    std::vector<int> active;          // per-column in-bag rows, sorted, compacted
    std::vector<int> active_len;      // live entries per column list
    std::vector<unsigned char> wants;
    std::vector<unsigned char> any_wants;
    std::vector<struct Accumulator> accs;
};

struct BestOfNode {
    bool found = false;
    int feature = -1;
    double value = 0.0;
    double decrease = 0.0;
};

// Scans one feature for the best split of the given row multiset. `sum` is
// the node's response sum. The decrease is computed as
// S_L^2/m_L + S_R^2/m_R - S^2/m, which equals parent SSE minus child SSE.
void scan_feature(const double* col, const double* y, const std::vector<int>& rows,
                  double sum, int feature, int min_node_size,
                  std::vector<SortedValue>& sorted, BestOfNode& best) {
    const std::size_t m = rows.size();
    sorted.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        const int id = rows[i];
        sorted[i].v = col[id];
        sorted[i].y = y[id];
        sorted[i].id = id;
    }
    std::sort(sorted.begin(), sorted.end(), [](const SortedValue& a, const SortedValue& b) {
        if (a.v != b.v) return a.v < b.v;
        return a.id < b.id;  // total order keeps summation deterministic
    });
    if (sorted.front().v == sorted.back().v) return;  // constant in this node

    const double parent_term = sum * sum / static_cast<double>(m);
    double left_sum = 0.0;
    for (std::size_t i = 0; i + 1 < m; ++i) {
        left_sum += sorted[i].y;
        if (sorted[i].v == sorted[i + 1].v) continue;
        const std::size_t m_left = i + 1;
        const std::size_t m_right = m - m_left;
        if (m_left < static_cast<std::size_t>(min_node_size) ||
            m_right < static_cast<std::size_t>(min_node_size)) {
            continue;
        }
        const double right_sum = sum - left_sum;
        const double decrease = left_sum * left_sum / static_cast<double>(m_left) +
                                right_sum * right_sum / static_cast<double>(m_right) -
                                parent_term;
        if (decrease <= 0.0) continue;
        double value = 0.5 * (sorted[i].v + sorted[i + 1].v);
        // Midpoint rounding may land on the right endpoint; fall back to the
        // left value, which induces the identical partition under x <= value.
        if (!(value > sorted[i].v && value < sorted[i + 1].v)) value = sorted[i].v;
        // Decreases within a relative 1e-9 window count as tied, so that
        // splits equal in real arithmetic resolve lexicographically instead
        // of by rounding noise.
        const bool tied = std::abs(decrease - best.decrease) <=
                          1e-9 * std::max(decrease, best.decrease);
        const bool better =
            tied ? (feature < best.feature ||
                    (feature == best.feature && value < best.value))
                 : decrease > best.decrease;
        if (!best.found || better) {
            best.found = true;
            best.feature = feature;
            best.value = value;
            best.decrease = decrease;
        }
    }
}

// Per-forest presorted columns: row indices by (value, row), plus the
// values in sorted order for contiguous access during scans.
struct SortedColumns {
    std::size_t n = 0, p = 0;
    std::vector<int> order;      // p blocks of n row indices
    std::vector<double> values;  // p blocks of n values, sorted

    SortedColumns(const ColumnData& cols) : n(cols.n), p(cols.p) {
        order.resize(n * p);
        values.resize(n * p);
        for (std::size_t c = 0; c < p; ++c) {
            int* ord = order.data() + c * n;
            const double* col = cols.column(c);
            for (std::size_t r = 0; r < n; ++r) ord[r] = static_cast<int>(r);
            std::sort(ord, ord + n, [col](int a, int b) {
                if (col[a] != col[b]) return col[a] < col[b];
                return a < b;
            });
            double* val = values.data() + c * n;
            for (std::size_t r = 0; r < n; ++r) val[r] = col[ord[r]];
        }
    }
};

// Running split-scan state for one (frontier node, feature) pair.
struct Accumulator {
    double left_sum = 0.0;
    double prev_value = 0.0;
    int left_count = 0;
    bool started = false;
};

// Best split of one frontier node. `score` is the children's S^2/m sum;
// the node's own term is a per-node constant, so score order equals
// decrease order and the hot path needs a single comparison.
struct BestEntry {
    double score = 0.0;
    double decrease = 0.0;
    double value = 0.0;
    int feature = -1;
    bool found = false;
};

struct FrontierNode {
    int node_index = 0;
    int count = 0;      // multiset size
    double sum = 0.0;   // response sum with multiplicity
};

// Breadth-first tree growth: every level walks each candidate column once
// in presorted order and distributes rows to their nodes' accumulators.
// No per-node sorting; the per-level cost is O(p * n).
Tree grow_tree(const ColumnData& cols, const SortedColumns& sorted,
               const std::vector<double>& y, const std::vector<double>& reciprocal,
               const ForestParams& params, const std::vector<int>& bootstrap_rows,
               Rng& rng, TreeWorkspace& ws) {
    Tree tree;
    const std::size_t n = cols.n;
    const std::size_t p = cols.p;
    const int mtry = params.resolve_mtry(p);
    const int min_size = params.min_node_size;
    const double* recip = reciprocal.data();

    ws.mult.assign(n, 0);
    for (int id : bootstrap_rows) ++ws.mult[static_cast<std::size_t>(id)];
    ws.slot_of_row.assign(n, -1);
    ws.feature_buffer.resize(p);
    for (std::size_t i = 0; i < p; ++i) ws.feature_buffer[i] = static_cast<int>(i);

    double root_sum = 0.0;
    int root_count = 0;
    for (std::size_t r = 0; r < n; ++r) {
        if (ws.mult[r] > 0) {
            ws.slot_of_row[r] = 0;
            root_sum += y[r] * ws.mult[r];
            root_count += ws.mult[r];
        }
    }
    tree.nodes.emplace_back();
    tree.nodes[0].member_count = root_count;
    tree.nodes[0].prediction = root_sum / root_count;

    // Per-column lists of in-bag rows in sorted order. Each scan compacts
    // its column in place, so deep levels only walk still-live rows.
    ws.active.resize(p * n);
    ws.active_len.assign(p, 0);
    for (std::size_t c = 0; c < p; ++c) {
        const int* ord = sorted.order.data() + c * n;
        int pos = 0;
        for (std::size_t k = 0; k < n; ++k) {
            const int row = ord[k];
            if (ws.mult[static_cast<std::size_t>(row)] > 0) ws.active[c * n + pos++] = row;
        }
        ws.active_len[c] = pos;
    }

    std::vector<FrontierNode> frontier{{0, root_count, root_sum}};
    int depth = 0;

    std::vector<BestEntry> best;
    std::vector<int> left_slot, right_slot;
    while (!frontier.empty()) {
        if (params.max_depth && depth >= *params.max_depth) break;
        const std::size_t slots = frontier.size();

        // Candidate features per node, drawn in slot order. The wants and
        // accumulator tables are laid out column-major so one column's scan
        // touches a contiguous `slots`-sized block.
        ws.wants.assign(slots * p, 0);
        ws.any_wants.assign(p, 0);
        best.assign(slots, BestEntry{});
        for (std::size_t s = 0; s < slots; ++s) {
            best[s].score = frontier[s].sum * frontier[s].sum * recip[frontier[s].count];
        }
        if (ws.accs.size() < slots * p) ws.accs.resize(slots * p);
        for (std::size_t s = 0; s < slots; ++s) {
            for (int k = 0; k < mtry; ++k) {
                const std::size_t j =
                    static_cast<std::size_t>(k) +
                    static_cast<std::size_t>(rng.bounded(p - static_cast<std::size_t>(k)));
                std::swap(ws.feature_buffer[static_cast<std::size_t>(k)],
                          ws.feature_buffer[j]);
                const std::size_t f =
                    static_cast<std::size_t>(ws.feature_buffer[static_cast<std::size_t>(k)]);
                ws.wants[f * slots + s] = 1;
                ws.any_wants[f] = 1;
                ws.accs[f * slots + s] = Accumulator{};
            }
        }

        for (std::size_t c = 0; c < p; ++c) {
            if (!ws.any_wants[c]) continue;
            int* ord = ws.active.data() + c * n;
            const double* col = cols.column(c);
            const unsigned char* wants_c = ws.wants.data() + c * slots;
            Accumulator* accs_c = ws.accs.data() + c * slots;
            const int len = ws.active_len[c];
            int pos = 0;
            for (int k = 0; k < len; ++k) {
                const int row = ord[k];
                const int s = ws.slot_of_row[static_cast<std::size_t>(row)];
                if (s < 0) continue;
                ord[pos++] = row;
                if (!wants_c[static_cast<std::size_t>(s)]) continue;
                Accumulator& acc = accs_c[static_cast<std::size_t>(s)];
                const double v = col[row];
                if (acc.started && v != acc.prev_value) {
                    // Boundary between distinct values: evaluate the split.
                    const FrontierNode& fn = frontier[static_cast<std::size_t>(s)];
                    const int m_left = acc.left_count;
                    const int m_right = fn.count - m_left;
                    if (m_left >= min_size && m_right >= min_size) {
                        const double right_sum = fn.sum - acc.left_sum;
                        const double score =
                            acc.left_sum * acc.left_sum * recip[m_left] +
                            right_sum * right_sum * recip[m_right];
                        BestEntry& b = best[static_cast<std::size_t>(s)];
                        if (score > b.score) {
                            // Candidates arrive in (feature, value) order, so
                            // on a near-tie the incumbent (lexicographically
                            // smaller) stays.
                            const double decrease =
                                score - frontier[static_cast<std::size_t>(s)].sum *
                                            frontier[static_cast<std::size_t>(s)].sum *
                                            recip[fn.count];
                            const bool tied =
                                b.found && (decrease - b.decrease <= 1e-9 * decrease);
                            if (!tied) {
                                double value = 0.5 * (acc.prev_value + v);
                                if (!(value > acc.prev_value && value < v)) {
                                    value = acc.prev_value;
                                }
                                b.found = true;
                                b.score = score;
                                b.decrease = decrease;
                                b.feature = static_cast<int>(c);
                                b.value = value;
                            }
                        }
                    }
                }
                const int mult = ws.mult[static_cast<std::size_t>(row)];
                acc.left_sum += y[static_cast<std::size_t>(row)] * mult;
                acc.left_count += mult;
                acc.prev_value = v;
                acc.started = true;
            }
            ws.active_len[c] = pos;
        }

        // Materialize the splits and build the next frontier.
        std::vector<FrontierNode> next;
        left_slot.assign(slots, -1);
        right_slot.assign(slots, -1);
        for (std::size_t s = 0; s < slots; ++s) {
            if (!best[s].found) continue;
            TreeNode& parent = tree.nodes[static_cast<std::size_t>(frontier[s].node_index)];
            parent.feature = best[s].feature;
            parent.split_value = best[s].value;
            parent.decrease = best[s].decrease;
            parent.left = static_cast<int>(tree.nodes.size());
            parent.right = parent.left + 1;
            left_slot[s] = static_cast<int>(next.size());
            next.push_back({parent.left, 0, 0.0});
            right_slot[s] = static_cast<int>(next.size());
            next.push_back({parent.right, 0, 0.0});
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
        }

        // Reassign rows to child slots and accumulate child sums.
        for (std::size_t r = 0; r < n; ++r) {
            const int s = ws.slot_of_row[r];
            if (s < 0) continue;
            if (!best[static_cast<std::size_t>(s)].found) {
                ws.slot_of_row[r] = -1;  // settled leaf
                continue;
            }
            const BestEntry& b = best[static_cast<std::size_t>(s)];
            const double v = cols.column(static_cast<std::size_t>(b.feature))[r];
            const int child = (v <= b.value) ? left_slot[static_cast<std::size_t>(s)]
                                             : right_slot[static_cast<std::size_t>(s)];
            ws.slot_of_row[r] = child;
            FrontierNode& fn = next[static_cast<std::size_t>(child)];
            fn.sum += y[r] * ws.mult[r];
            fn.count += ws.mult[r];
        }

        // Fill child node stats; children too small to split leave the
        // frontier and their rows settle on the next pass.
        std::vector<FrontierNode> survivors;
        std::vector<int> slot_remap(next.size(), -1);
        for (std::size_t s = 0; s < next.size(); ++s) {
            TreeNode& node = tree.nodes[static_cast<std::size_t>(next[s].node_index)];
            node.member_count = next[s].count;
            node.prediction = next[s].sum / next[s].count;
            if (next[s].count >= 2 * min_size) {
                slot_remap[s] = static_cast<int>(survivors.size());
                survivors.push_back(next[s]);
            }
        }
        for (std::size_t r = 0; r < n; ++r) {
            const int s = ws.slot_of_row[r];
            if (s >= 0) ws.slot_of_row[r] = slot_remap[static_cast<std::size_t>(s)];
        }
        frontier = std::move(survivors);
        ++depth;
    }
    return tree;
}

std::vector<int> draw_bootstrap(std::size_t n, const ForestParams& params, Rng& rng) {
    if (!params.bootstrap) {
        std::vector<int> rows(n);
        for (std::size_t i = 0; i < n; ++i) rows[i] = static_cast<int>(i);
        return rows;
    }
    const std::size_t count = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(params.bootstrap_fraction *
                                                static_cast<double>(n))));
    std::vector<int> rows;
    rows.reserve(count);
    if (params.with_replacement) {
        for (std::size_t i = 0; i < count; ++i) {
            rows.push_back(static_cast<int>(rng.bounded(n)));
        }
    } else {
        std::vector<int> all(n);
        for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<int>(i);
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.bounded(n - i));
            std::swap(all[i], all[j]);
        }
        all.resize(count);
        rows = std::move(all);
    }
    return rows;
}

}  // namespace

std::optional<SplitCandidate> best_split(const std::vector<int>& rows,
                                         const Dataset& data,
                                         const std::vector<int>& candidate_features,
                                         int min_node_size) {
    if (rows.empty()) throw std::invalid_argument("best_split: empty row set");
    if (candidate_features.empty()) {
        throw std::invalid_argument("best_split: empty candidate feature set");
    }
    double sum = 0.0;
    for (int id : rows) sum += data.response[static_cast<std::size_t>(id)];

    std::vector<SortedValue> scratch;
    std::vector<double> col(data.n_rows());
    BestOfNode best;
    for (int feature : candidate_features) {
        for (std::size_t r = 0; r < data.n_rows(); ++r) {
            col[r] = data.features(r, static_cast<std::size_t>(feature));
        }
        scan_feature(col.data(), data.response.data(), rows, sum, feature,
                     min_node_size, scratch, best);
    }
    if (!best.found) return std::nullopt;
    return SplitCandidate{static_cast<std::size_t>(best.feature), best.value,
                          best.decrease};
}

RegressionForest fit_forest(const Dataset& data, const ForestParams& params,
                            std::uint64_t seed, int n_threads) {
    data.validate();
    params.validate(data.n_cols());

    RegressionForest forest;
    forest.params = params;
    forest.seed = seed;
    forest.n_features = data.n_cols();
    forest.n_rows = data.n_rows();
    forest.trees.resize(static_cast<std::size_t>(params.n_trees));
    forest.bootstrap_indices.resize(static_cast<std::size_t>(params.n_trees));

    const ColumnData cols(data);
    const SortedColumns sorted(cols);
    const std::vector<double>& y = data.response;
    std::vector<double> reciprocal(data.n_rows() + 1, 0.0);
    for (std::size_t k = 1; k < reciprocal.size(); ++k) {
        reciprocal[k] = 1.0 / static_cast<double>(k);
    }

    parallel_for(static_cast<std::size_t>(params.n_trees), n_threads, [&](std::size_t t) {
        Rng rng(derive_seed(seed, t));
        TreeWorkspace ws;
        const std::vector<int> rows = draw_bootstrap(data.n_rows(), params, rng);
        forest.bootstrap_indices[t] = rows;
        forest.trees[t] = grow_tree(cols, sorted, y, reciprocal, params, rows, rng, ws);
    });
    return forest;
}

double predict_row(const RegressionForest& forest, const double* x, std::size_t dim) {
    if (dim != forest.n_features) {
        throw std::invalid_argument("predict: feature dimension mismatch");
    }
    double sum = 0.0;
    for (const Tree& tree : forest.trees) sum += tree.predict(x);
    return sum / static_cast<double>(forest.trees.size());
}

double predict(const RegressionForest& forest, const std::vector<double>& x) {
    return predict_row(forest, x.data(), x.size());
}

std::vector<std::optional<double>> predict_oob(const RegressionForest& forest,
                                               const Dataset& data) {
    if (data.n_rows() != forest.n_rows || data.n_cols() != forest.n_features) {
        throw std::invalid_argument("predict_oob: data does not match training shape");
    }
    const std::size_t n = data.n_rows();
    std::vector<double> sums(n, 0.0);
    std::vector<int> counts(n, 0);
    std::vector<char> inbag(n);
    for (std::size_t t = 0; t < forest.trees.size(); ++t) {
        std::fill(inbag.begin(), inbag.end(), 0);
        for (int id : forest.bootstrap_indices[t]) inbag[static_cast<std::size_t>(id)] = 1;
        for (std::size_t i = 0; i < n; ++i) {
            if (inbag[i]) continue;
            sums[i] += forest.trees[t].predict(data.features.row(i));
            ++counts[i];
        }
    }
    std::vector<std::optional<double>> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (counts[i] > 0) out[i] = sums[i] / counts[i];
    }
    return out;
}

std::vector<std::vector<int>> oob_tree_sets(const RegressionForest& forest) {
    std::vector<std::vector<int>> sets(forest.n_rows);
    std::vector<char> inbag(forest.n_rows);
    for (std::size_t t = 0; t < forest.trees.size(); ++t) {
        std::fill(inbag.begin(), inbag.end(), 0);
        for (int id : forest.bootstrap_indices[t]) inbag[static_cast<std::size_t>(id)] = 1;
        for (std::size_t i = 0; i < forest.n_rows; ++i) {
            if (!inbag[i]) sets[i].push_back(static_cast<int>(t));
        }
    }
    return sets;
}

std::string forest_to_json(const RegressionForest& forest) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["seed"] = forest.seed;
    j["n_features"] = forest.n_features;
    j["n_rows"] = forest.n_rows;
    j["params"] = {{"n_trees", forest.params.n_trees},
                   {"mtry", forest.params.mtry},
                   {"min_node_size", forest.params.min_node_size},
                   {"max_depth", forest.params.max_depth ? nlohmann::json(*forest.params.max_depth)
                                                         : nlohmann::json(nullptr)},
                   {"bootstrap_fraction", forest.params.bootstrap_fraction},
                   {"with_replacement", forest.params.with_replacement},
                   {"bootstrap", forest.params.bootstrap}};
    nlohmann::json trees = nlohmann::json::array();
    for (const Tree& tree : forest.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const TreeNode& n : tree.nodes) {
            nodes.push_back({{"feature", n.feature},
                             {"split_value", n.split_value},
                             {"left", n.left},
                             {"right", n.right},
                             {"prediction", n.prediction},
                             {"member_count", n.member_count},
                             {"decrease", n.decrease}});
        }
        trees.push_back(std::move(nodes));
    }
    j["trees"] = std::move(trees);
    j["bootstrap_indices"] = forest.bootstrap_indices;
    return j.dump();
}

RegressionForest forest_from_json(const std::string& json_text) {
    const nlohmann::json j = nlohmann::json::parse(json_text);
    if (!j.contains("format_version") || j["format_version"].get<int>() != 1) {
        throw std::invalid_argument("forest_from_json: unsupported format version");
    }
    RegressionForest forest;
    forest.seed = j["seed"].get<std::uint64_t>();
    forest.n_features = j["n_features"].get<std::size_t>();
    forest.n_rows = j["n_rows"].get<std::size_t>();
    const auto& p = j["params"];
    forest.params.n_trees = p["n_trees"].get<int>();
    forest.params.mtry = p["mtry"].get<int>();
    forest.params.min_node_size = p["min_node_size"].get<int>();
    if (!p["max_depth"].is_null()) forest.params.max_depth = p["max_depth"].get<int>();
    forest.params.bootstrap_fraction = p["bootstrap_fraction"].get<double>();
    forest.params.with_replacement = p["with_replacement"].get<bool>();
    forest.params.bootstrap = p["bootstrap"].get<bool>();
    for (const auto& tj : j["trees"]) {
        Tree tree;
        for (const auto& nj : tj) {
            TreeNode n;
            n.feature = nj["feature"].get<int>();
            n.split_value = nj["split_value"].get<double>();
            n.left = nj["left"].get<int>();
            n.right = nj["right"].get<int>();
            n.prediction = nj["prediction"].get<double>();
            n.member_count = nj["member_count"].get<int>();
            n.decrease = nj["decrease"].get<double>();
            tree.nodes.push_back(n);
        }
        forest.trees.push_back(std::move(tree));
    }
    forest.bootstrap_indices =
        j["bootstrap_indices"].get<std::vector<std::vector<int>>>();
    return forest;
}

}  // namespace fact
