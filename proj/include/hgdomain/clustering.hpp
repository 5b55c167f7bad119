#ifndef HGDOMAIN_CLUSTERING_HPP
#define HGDOMAIN_CLUSTERING_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

/**
 * @file clustering.hpp
 *
 * @brief k-means and Leiden community detection over a shared-nearest-neighbor graph.
 *
 * Both methods return labels that are contiguous from 0 and numbered in order of first appearance,
 * so identical partitions always produce identical label vectors.
 */

namespace hgdomain {

enum class ClusterMethod { kmeans, leiden };

std::string to_string(ClusterMethod method);

ClusterMethod parse_cluster_method(const std::string& name);

struct ClusterAssignment {
    std::vector<int> labels;
    ClusterMethod method = ClusterMethod::kmeans;
    // Number of clusters for k-means, resolution for Leiden.
    double parameter = 0;
    std::uint64_t seed = 0;

    int n_clusters() const;
};

/**
 * Renumbers labels by order of first appearance.
 */
std::vector<int> canonical_labels(const std::vector<int>& labels);

struct KMeansResult {
    ClusterAssignment assignment;
    // Row c is the center of label c.
    Eigen::MatrixXd centers;
    double inertia = 0;
    // Inertia after every assignment step, starting with the k-means++ seeding.
    std::vector<double> inertia_trace;
    int iterations = 0;
};

/**
 * k-means++ seeding followed by Lloyd iterations until the assignment stops changing or `max_iter` is reached.
 * A cluster that becomes empty takes the point of the largest cluster farthest from that cluster's center.
 * Assignment ties go to the lower cluster index.
 *
 * @throws std::invalid_argument unless `1 <= n_clusters <= N`.
 */
KMeansResult kmeans(const Eigen::MatrixXd& X, int n_clusters, std::uint64_t seed, int max_iter = 300);

struct SnnEdge {
    int a = 0;
    int b = 0;
    double weight = 0;
};

/**
 * Undirected weighted graph, edges stored once with `a < b`, ordered by `(a, b)`.
 */
struct SnnGraph {
    int n_vertices = 0;
    std::vector<SnnEdge> edges;
};

/**
 * Shared-nearest-neighbor graph. Each spot's neighborhood is itself plus its `k_snn` nearest neighbors
 * (ties by index). Spots `i != j` are joined when their neighborhoods intersect,
 * with weight `|intersection| / (k_snn + 1)`, which lies in (0, 1].
 *
 * @throws std::invalid_argument unless `1 <= k_snn < N`.
 */
SnnGraph build_snn_graph(const Eigen::MatrixXd& X, int k_snn);

/**
 * Resolution-parameterized Newman modularity of a partition of `g`.
 */
double modularity(const SnnGraph& g, const std::vector<int>& labels, double resolution);

/**
 * Leiden: fast local moving, refinement of each community into well-connected sub-communities,
 * aggregation on the refined partition, repeated until local moving changes nothing.
 * Refinement merges greedily into the sub-community with the largest non-negative gain.
 * The vertex order is shuffled once per level from a generator seeded with `seed`.
 *
 * @throws std::invalid_argument unless `resolution > 0`.
 */
ClusterAssignment leiden_communities(const SnnGraph& g, double resolution, std::uint64_t seed);

}

#endif
