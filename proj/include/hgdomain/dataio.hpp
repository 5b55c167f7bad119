#ifndef HGDOMAIN_DATAIO_HPP
#define HGDOMAIN_DATAIO_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

/**
 * @file dataio.hpp
 *
 * @brief Loading, validation, synthesis and masking of spatial transcriptomics datasets.
 *
 * All files are plain CSV with a header row, "." as the decimal separator and LF line endings.
 * The first column always holds the spot identifier.
 * Files are aligned by spot id, never by row order.
 */

namespace hgdomain {

/**
 * Dense spots-by-genes expression matrix.
 * Entries are finite and non-negative, spot and gene ids are unique.
 */
struct ExpressionMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> spot_ids;
    std::vector<std::string> gene_ids;

    Eigen::Index n_spots() const { return values.rows(); }
    Eigen::Index n_genes() const { return values.cols(); }

    /**
     * @throws DataError if any invariant is violated.
     */
    void validate() const;
};

/**
 * Planar spot positions, one row per spot, aligned with `spot_ids`.
 */
struct SpatialCoords {
    Eigen::MatrixX2d positions;
    std::vector<std::string> spot_ids;

    Eigen::Index size() const { return positions.rows(); }

    void validate() const;
};

struct TissueMask {
    std::vector<bool> in_tissue;
};

struct GroundTruthLabels {
    std::vector<int> labels;
    int n_domains = 0;
};

/**
 * A real matrix with named rows and columns, used for embeddings and tile features.
 * Unlike `ExpressionMatrix`, negative entries are allowed.
 */
struct NamedMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> row_ids;
    std::vector<std::string> col_ids;
};

ExpressionMatrix load_expression(const std::filesystem::path& path);

void write_expression(const ExpressionMatrix& expr, const std::filesystem::path& path);

NamedMatrix load_named_matrix(const std::filesystem::path& path);

void write_named_matrix(const NamedMatrix& mat, const std::filesystem::path& path);

/**
 * Reads a `spot_id,x,y` file in file order.
 */
SpatialCoords load_coords(const std::filesystem::path& path);

void write_coords(const SpatialCoords& coords, const std::filesystem::path& path);

/**
 * Reorders `coords` to follow `spot_ids`.
 *
 * @throws DataError naming the first spot that is missing from `coords`,
 * or the first spot in `coords` that is absent from `spot_ids`.
 */
SpatialCoords align_coords(const SpatialCoords& coords, const std::vector<std::string>& spot_ids);

/**
 * Reads a `spot_id,in_tissue` file (values 0/1 or true/false) and aligns it to `spot_ids`.
 */
TissueMask load_mask(const std::filesystem::path& path, const std::vector<std::string>& spot_ids);

/**
 * Reads a `spot_id,label` file and aligns it to `spot_ids`.
 * Spots in the file that are not in `spot_ids` are ignored, since label files
 * are routinely produced before tissue masking.
 */
std::vector<int> load_labels(const std::filesystem::path& path, const std::vector<std::string>& spot_ids);

/**
 * Reads a `spot_id,label` file in file order.
 */
std::pair<std::vector<std::string>, std::vector<int>> load_labels(const std::filesystem::path& path);

void write_labels(const std::vector<std::string>& spot_ids, const std::vector<int>& labels, const std::filesystem::path& path);

/**
 * Drops spots outside the tissue from both the expression matrix and the coordinates,
 * preserving the relative order of the remaining spots.
 *
 * @throws std::invalid_argument on a length mismatch or when no spot is in tissue.
 */
std::pair<ExpressionMatrix, SpatialCoords> apply_tissue_mask(const ExpressionMatrix& expr, const SpatialCoords& coords, const TissueMask& mask);

/**
 * Elementwise `log(1 + x)`.
 */
ExpressionMatrix log1p_normalize(const ExpressionMatrix& expr);

struct SyntheticOptions {
    int n_domains = 3;
    int spots_per_domain = 50;
    int n_genes = 40;
    double noise_sd = 0.1;
    double mix = 0;
    std::uint64_t seed = 0;
};

struct SyntheticDataset {
    ExpressionMatrix expression;
    SpatialCoords coords;
    GroundTruthLabels truth;
};

/**
 * Generates spatially contiguous domains as Gaussian clouds around distinct centers on a circle.
 *
 * Domain `d` has a signature of per-gene baselines plus a raised block on genes `g` with `g % n_domains == d`,
 * so signatures are linearly separable.
 * Each spot receives its domain's signature plus Gaussian noise with standard deviation `noise_sd`, clamped at zero.
 * A fraction `mix` of spots (rounded to the nearest count) instead receive the signature of a random other domain;
 * their ground-truth label is left unchanged.
 *
 * The output is a pure function of the options.
 */
SyntheticDataset generate_synthetic(const SyntheticOptions& options);

}

#endif
