#include "hgdomain/knn.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

namespace hgdomain {

std::vector<std::vector<int>> exact_knn(const Eigen::MatrixXd& points, int k) {
    const auto n = static_cast<int>(points.rows());
    if (k < 0 || k >= n) {
        throw std::invalid_argument("exact_knn: k=" + std::to_string(k) + " must lie in [0, " + std::to_string(n) + ")");
    }

    std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
    std::vector<std::pair<double, int>> cand(static_cast<std::size_t>(n > 0 ? n - 1 : 0));
    for (int i = 0; i < n; ++i) {
        std::size_t pos = 0;
        for (int j = 0; j < n; ++j) {
            if (j != i) {
                cand[pos++] = {(points.row(i) - points.row(j)).squaredNorm(), j};
            }
        }
        // Pairs compare by distance, then index.
        std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
        auto& nn = out[static_cast<std::size_t>(i)];
        nn.reserve(static_cast<std::size_t>(k));
        for (int j = 0; j < k; ++j) {
            nn.push_back(cand[static_cast<std::size_t>(j)].second);
        }
    }
    return out;
}

}
