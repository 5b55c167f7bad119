#ifndef HGDOMAIN_METRICS_HPP
#define HGDOMAIN_METRICS_HPP

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <vector>

/**
 * @file metrics.hpp
 *
 * @brief Adjusted Rand index and integrated local inverse Simpson's index.
 */

namespace hgdomain {

/**
 * Chance-corrected Rand index computed from the contingency table.
 * Returns 1 when the expression is 0/0, which happens only for identical
 * all-singleton or single-cluster partitions.
 *
 * @throws std::invalid_argument on a length mismatch or fewer than 2 elements.
 */
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

struct LisiResult {
    double mean = 0;
    std::vector<double> per_spot;
    int k_lisi = 0;
};

/**
 * For each spot, the inverse Simpson index `1 / sum_l p_l^2` of the label proportions among its
 * `k_lisi` nearest neighbors in `embedding` (itself excluded, uniform weights, ties by index).
 *
 * @throws std::invalid_argument unless `2 <= k_lisi < N` and labels match the rows.
 */
LisiResult ilisi(const Eigen::MatrixXd& embedding, const std::vector<int>& labels, int k_lisi);

/**
 * 30, or `N - 1` when that is smaller.
 */
int default_k_lisi(Eigen::Index n_spots);

struct MetricReport {
    std::optional<double> ari;
    double ilisi_mean = 0;
    std::vector<double> ilisi_per_spot;
    int k_lisi = 0;
    int n_spots = 0;
    int n_clusters = 0;
};

/**
 * Flat JSON object with the scalar fields of the report, keys sorted.
 */
void write_metrics(const MetricReport& report, const std::filesystem::path& path);

}

#endif
