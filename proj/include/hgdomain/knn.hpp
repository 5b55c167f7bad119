#ifndef HGDOMAIN_KNN_HPP
#define HGDOMAIN_KNN_HPP

#include <Eigen/Dense>

#include <vector>

namespace hgdomain {

/**
 * Exact k-nearest neighbors of every row of `points` by Euclidean distance, excluding the row itself.
 * Each list is ordered by increasing distance; equal distances are ordered by increasing index.
 * Brute force, O(N^2 d), intended for desk-scale N.
 *
 * @throws std::invalid_argument unless `0 <= k < N`.
 */
std::vector<std::vector<int>> exact_knn(const Eigen::MatrixXd& points, int k);

}

#endif
