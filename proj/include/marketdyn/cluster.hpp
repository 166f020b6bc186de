#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "marketdyn/common.hpp"
#include "marketdyn/distances.hpp"
#include "marketdyn/persistence.hpp"

namespace marketdyn::cluster {

enum class Linkage { average, single, complete };

Linkage linkage_from_string(const std::string& s);
std::string to_string(Linkage l);

/// One agglomeration step. Node ids follow the usual convention: leaves are
/// 0..n-1, merge m creates node n+m.
struct Merge {
    int left = 0;   // smaller node id
    int right = 0;  // larger node id
    double height = 0.0;
    int size = 0;  // leaves under the new node
};

struct Dendrogram {
    std::vector<std::string> leaf_ids;
    std::vector<Merge> merges;  // n-1 records, heights nondecreasing

    int n_leaves() const { return static_cast<int>(leaf_ids.size()); }
};

/// Agglomerative clustering with Lance-Williams updates over a symmetric
/// zero-diagonal dissimilarity matrix. Ties break toward the smallest
/// (left, right) node-id pair.
Dendrogram agglomerate(const Eigen::MatrixXd& dissimilarity, std::vector<std::string> ids,
                       Linkage linkage = Linkage::average);

Dendrogram agglomerate(const distances::DistanceMatrix& d, Linkage linkage = Linkage::average);

/// Persistence matrices cluster on the dissimilarity 1 - k(s, t).
Dendrogram agglomerate(const persistence::PersistenceMatrix& k, Linkage linkage = Linkage::average);

enum class CutMode { k_clusters, height };

/// Flat cluster assignment, one label per leaf. k_clusters keeps the k
/// subtrees remaining after undoing the last k-1 merges; height removes all
/// merges strictly above the threshold. Labels are 0..k-1 ordered by each
/// cluster's smallest leaf index.
std::vector<int> cut(const Dendrogram& den, CutMode mode, double value);

std::string to_newick(const Dendrogram& den);

}  // namespace marketdyn::cluster
