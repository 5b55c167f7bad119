#ifndef HGDOMAIN_HYPERGRAPH_HPP
#define HGDOMAIN_HYPERGRAPH_HPP

#include "hgdomain/dataio.hpp"
#include "hgdomain/features.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <filesystem>
#include <vector>

/**
 * @file hypergraph.hpp
 *
 * @brief Spatial KNN hypergraph, incidence matrix, degree normalization and derived adjacency.
 */

namespace hgdomain {

using SparseMatrix = Eigen::SparseMatrix<double>;

/**
 * Hypergraph over `n_vertices` vertices.
 *
 * Hyperedges are stored as member lists without duplicates.
 * For KNN hypergraphs the first member of hyperedge `i` is its centroid spot `i`,
 * followed by the neighbors in order of increasing distance.
 */
struct Hypergraph {
    int n_vertices = 0;
    std::vector<std::vector<int>> hyperedges;
    std::vector<double> edge_weights;

    int n_edges() const { return static_cast<int>(hyperedges.size()); }

    /**
     * @throws std::invalid_argument on out-of-range or repeated members, empty hyperedges,
     * non-positive weights, or vertices that belong to no hyperedge.
     */
    void validate() const;
};

/**
 * One hyperedge per spot holding the spot and its `k` nearest spatial neighbors; unit weights.
 * Distance ties are broken by lower vertex index.
 *
 * @throws std::invalid_argument unless `1 <= k < N`.
 */
Hypergraph build_knn_hypergraph(const SpatialCoords& coords, int k);

/**
 * Drops a neighbor from a KNN hyperedge when the Mahalanobis distance between its tile features
 * and the centroid's exceeds the `quantile` of all centroid-to-neighbor distances.
 * Centroids (first members) are always kept, so every vertex stays covered.
 *
 * @throws std::invalid_argument unless `0 < quantile <= 1` and features have one row per vertex.
 */
Hypergraph gate_hyperedges(const Hypergraph& hg, const Eigen::MatrixXd& tile_features, const CovarianceModel& cov, double quantile);

/**
 * |V| x |E| binary incidence matrix, `H(v, e) = 1` iff `v` belongs to `e`.
 */
SparseMatrix incidence_matrix(const Hypergraph& hg);

/**
 * Degrees and the symmetric propagation operator
 * `Dv^{-1/2} H W De^{-1} H^T Dv^{-1/2}`, with `d(v) = sum_e w(e) h(v, e)` and `delta(e) = sum_v h(v, e)`.
 */
struct DegreeNormalization {
    Eigen::VectorXd vertex_degree;
    Eigen::VectorXd edge_degree;
    SparseMatrix propagation;
};

/**
 * @throws std::invalid_argument on a zero vertex or edge degree, or a weight count that does not match the columns of `H`.
 */
DegreeNormalization degree_normalization(const SparseMatrix& H, const std::vector<double>& weights);

/**
 * Dense binary co-membership matrix: `A(i, j) = 1` iff `i != j` and both belong to some hyperedge.
 */
Eigen::MatrixXd adjacency_from_incidence(const SparseMatrix& H);

/**
 * Edge-list text format: one line per hyperedge, space-separated vertex indices. Weights are not stored.
 */
void write_hypergraph(const Hypergraph& hg, const std::filesystem::path& path);

/**
 * Reads the edge-list format with unit weights and validates it against `n_vertices`.
 */
Hypergraph load_hypergraph(const std::filesystem::path& path, int n_vertices);

}

#endif
