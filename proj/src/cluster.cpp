#include "marketdyn/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "marketdyn/csv.hpp"

namespace marketdyn::cluster {

Linkage linkage_from_string(const std::string& s) {
    if (s == "average") return Linkage::average;
    if (s == "single") return Linkage::single;
    if (s == "complete") return Linkage::complete;
    throw ValidationError("unknown linkage: " + s);
}

std::string to_string(Linkage l) {
    switch (l) {
        case Linkage::average: return "average";
        case Linkage::single: return "single";
        case Linkage::complete: return "complete";
    }
    throw ValidationError("unknown linkage");
}

Dendrogram agglomerate(const Eigen::MatrixXd& dissimilarity, std::vector<std::string> ids,
                       Linkage linkage) {
    const Eigen::Index n = dissimilarity.rows();
    if (dissimilarity.cols() != n || static_cast<Eigen::Index>(ids.size()) != n)
        throw ValidationError("agglomerate: matrix/id shape mismatch");
    if (n < 2) throw ValidationError("agglomerate: need at least 2 leaves");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (dissimilarity(i, i) != 0.0)
            throw ValidationError("agglomerate: input diagonal must be zero");
        for (Eigen::Index j = i + 1; j < n; ++j) {
            if (std::abs(dissimilarity(i, j) - dissimilarity(j, i)) > 1e-12)
                throw ValidationError("agglomerate: input matrix not symmetric");
            if (!std::isfinite(dissimilarity(i, j)))
                throw ValidationError("agglomerate: non-finite dissimilarity");
        }
    }

    // Active clusters live in slots; d holds slot-to-slot distances.
    Eigen::MatrixXd d = dissimilarity;
    std::vector<int> node_id(static_cast<std::size_t>(n));
    std::vector<int> size(static_cast<std::size_t>(n), 1);
    std::vector<bool> active(static_cast<std::size_t>(n), true);
    std::iota(node_id.begin(), node_id.end(), 0);

    Dendrogram den;
    den.leaf_ids = std::move(ids);
    den.merges.reserve(static_cast<std::size_t>(n - 1));

    int next_id = static_cast<int>(n);
    for (Eigen::Index step = 0; step < n - 1; ++step) {
        Eigen::Index bi = -1, bj = -1;
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!active[static_cast<std::size_t>(i)]) continue;
            for (Eigen::Index j = i + 1; j < n; ++j) {
                if (!active[static_cast<std::size_t>(j)]) continue;
                const double v = d(i, j);
                if (v < best) {
                    best = v;
                    bi = i;
                    bj = j;
                } else if (v == best && bi >= 0) {
                    // lexicographically smallest (min id, max id) pair
                    const int a1 = std::min(node_id[static_cast<std::size_t>(i)],
                                            node_id[static_cast<std::size_t>(j)]);
                    const int a2 = std::max(node_id[static_cast<std::size_t>(i)],
                                            node_id[static_cast<std::size_t>(j)]);
                    const int b1 = std::min(node_id[static_cast<std::size_t>(bi)],
                                            node_id[static_cast<std::size_t>(bj)]);
                    const int b2 = std::max(node_id[static_cast<std::size_t>(bi)],
                                            node_id[static_cast<std::size_t>(bj)]);
                    if (a1 < b1 || (a1 == b1 && a2 < b2)) {
                        bi = i;
                        bj = j;
                    }
                }
            }
        }

        const int si = size[static_cast<std::size_t>(bi)];
        const int sj = size[static_cast<std::size_t>(bj)];
        Merge merge;
        merge.left = std::min(node_id[static_cast<std::size_t>(bi)],
                              node_id[static_cast<std::size_t>(bj)]);
        merge.right = std::max(node_id[static_cast<std::size_t>(bi)],
                               node_id[static_cast<std::size_t>(bj)]);
        merge.height = best;
        merge.size = si + sj;
        den.merges.push_back(merge);

        // Lance-Williams update into slot bi; slot bj retires.
        for (Eigen::Index k = 0; k < n; ++k) {
            if (!active[static_cast<std::size_t>(k)] || k == bi || k == bj) continue;
            double v = 0.0;
            switch (linkage) {
                case Linkage::average:
                    v = (static_cast<double>(si) * d(bi, k) + static_cast<double>(sj) * d(bj, k)) /
                        static_cast<double>(si + sj);
                    break;
                case Linkage::single:
                    v = std::min(d(bi, k), d(bj, k));
                    break;
                case Linkage::complete:
                    v = std::max(d(bi, k), d(bj, k));
                    break;
            }
            d(bi, k) = v;
            d(k, bi) = v;
        }
        node_id[static_cast<std::size_t>(bi)] = next_id++;
        size[static_cast<std::size_t>(bi)] = si + sj;
        active[static_cast<std::size_t>(bj)] = false;
    }
    return den;
}

Dendrogram agglomerate(const distances::DistanceMatrix& d, Linkage linkage) {
    d.validate();
    return agglomerate(d.values, d.ids, linkage);
}

Dendrogram agglomerate(const persistence::PersistenceMatrix& k, Linkage linkage) {
    const Eigen::Index w = k.values.rows();
    Eigen::MatrixXd dis = (1.0 - k.values.array()).matrix();
    for (Eigen::Index i = 0; i < w; ++i) dis(i, i) = 0.0;
    std::vector<std::string> ids;
    ids.reserve(static_cast<std::size_t>(w));
    for (std::int64_t t : k.time_indices) ids.push_back("t" + std::to_string(t));
    return agglomerate(dis, std::move(ids), linkage);
}

std::vector<int> cut(const Dendrogram& den, CutMode mode, double value) {
    const int n = den.n_leaves();
    if (static_cast<int>(den.merges.size()) != n - 1)
        throw ValidationError("cut: dendrogram is incomplete");

    std::size_t n_apply = 0;
    if (mode == CutMode::k_clusters) {
        const double k = value;
        if (!(k >= 1.0 && k <= static_cast<double>(n)) || k != std::floor(k))
            throw ValidationError("cut: k must be an integer in 1..n_leaves");
        n_apply = static_cast<std::size_t>(n - static_cast<int>(k));
    } else {
        if (!(value >= 0.0)) throw ValidationError("cut: height must be nonnegative");
        while (n_apply < den.merges.size() && den.merges[n_apply].height <= value) ++n_apply;
    }

    // Union-find over node ids (leaves + merge nodes).
    std::vector<int> parent(static_cast<std::size_t>(n) + den.merges.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int a) {
        while (parent[static_cast<std::size_t>(a)] != a) {
            parent[static_cast<std::size_t>(a)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
            a = parent[static_cast<std::size_t>(a)];
        }
        return a;
    };
    for (std::size_t m = 0; m < n_apply; ++m) {
        const int node = n + static_cast<int>(m);
        parent[static_cast<std::size_t>(find(den.merges[m].left))] = node;
        parent[static_cast<std::size_t>(find(den.merges[m].right))] = node;
    }

    // Labels follow each cluster's smallest leaf index.
    std::vector<int> labels(static_cast<std::size_t>(n), -1);
    std::unordered_map<int, int> root_to_label;
    int next_label = 0;
    for (int leaf = 0; leaf < n; ++leaf) {
        const int root = find(leaf);
        auto it = root_to_label.find(root);
        if (it == root_to_label.end()) it = root_to_label.emplace(root, next_label++).first;
        labels[static_cast<std::size_t>(leaf)] = it->second;
    }
    return labels;
}

namespace {

std::string sanitize_newick_label(const std::string& id) {
    std::string out = id;
    for (char& c : out)
        if (c == ',' || c == '(' || c == ')' || c == ':' || c == ';' || c == ' ') c = '_';
    return out;
}

}  // namespace

std::string to_newick(const Dendrogram& den) {
    const int n = den.n_leaves();
    std::vector<double> height(static_cast<std::size_t>(n) + den.merges.size(), 0.0);
    for (std::size_t m = 0; m < den.merges.size(); ++m)
        height[static_cast<std::size_t>(n) + m] = den.merges[m].height;

    std::function<void(int, std::ostringstream&)> emit = [&](int node, std::ostringstream& out) {
        if (node < n) {
            out << sanitize_newick_label(den.leaf_ids[static_cast<std::size_t>(node)]);
            return;
        }
        const Merge& m = den.merges[static_cast<std::size_t>(node - n)];
        out << '(';
        emit(m.left, out);
        out << ':' << csv::format_double(m.height - height[static_cast<std::size_t>(m.left)]);
        out << ',';
        emit(m.right, out);
        out << ':' << csv::format_double(m.height - height[static_cast<std::size_t>(m.right)]);
        out << ')';
    };

    std::ostringstream out;
    emit(n + static_cast<int>(den.merges.size()) - 1, out);
    out << ';';
    return out.str();
}

}  // namespace marketdyn::cluster
