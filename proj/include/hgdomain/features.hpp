#ifndef HGDOMAIN_FEATURES_HPP
#define HGDOMAIN_FEATURES_HPP

#include "hgdomain/dataio.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

/**
 * @file features.hpp
 *
 * @brief Histology tiles, tile featurization, Mahalanobis similarity and PCA.
 */

namespace hgdomain {

/**
 * 8-bit raster with interleaved channels, stored row-major (`y` major, then `x`, then channel).
 */
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(int x, int y, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t& at(int x, int y, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

/**
 * Reads an 8-bit grayscale or RGB PNG. Alpha is dropped, palette images are expanded to RGB.
 */
Image load_png(const std::filesystem::path& path);

void write_png(const Image& image, const std::filesystem::path& path);

struct TileSet {
    int tile_size = 0;
    std::vector<Image> tiles;
};

/**
 * Cuts one `tile_size` square per spot, centered on the spot's pixel position
 * (`coords * pixels_per_unit`, with x as the column and y as the row).
 * The window covers columns `round(x) - tile_size / 2` onwards; pixels outside the image are zero.
 *
 * @throws std::invalid_argument if `tile_size < 1` or a spot lies more than `tile_size / 2` pixels outside the image.
 */
TileSet extract_tiles(const Image& image, const SpatialCoords& coords, int tile_size, double pixels_per_unit = 1.0);

using Featurizer = std::function<Eigen::VectorXd(const Image&)>;

inline constexpr int histogram_bins = 8;

/**
 * Default featurizer: per-channel mean, per-channel (population) standard deviation,
 * then an 8-bin intensity histogram per channel with bins of width 32, as fractions of the tile's pixels.
 * Layout is `[means..., sds..., hist(channel 0)..., hist(channel 1)..., ...]`.
 */
Eigen::VectorXd tile_feature_vector(const Image& tile);

/**
 * Applies `featurizer` to every tile. Rows follow tile order.
 */
Eigen::MatrixXd tile_features(const TileSet& tiles, const Featurizer& featurizer = tile_feature_vector);

/**
 * Sample covariance of feature rows with a ridge added to the diagonal, and its cached inverse.
 */
struct CovarianceModel {
    Eigen::MatrixXd sigma;
    Eigen::MatrixXd sigma_inv;
    double ridge = 0;
};

/**
 * Unbiased sample covariance (divisor `N - 1`) plus `ridge * I`.
 *
 * @throws std::invalid_argument if there are fewer than 2 rows or `ridge < 0`.
 * @throws NumericError if the regularized matrix is not positive definite.
 */
CovarianceModel covariance_matrix(const Eigen::MatrixXd& features, double ridge);

/**
 * `1e-6` times the mean diagonal of the unregularized sample covariance;
 * falls back to `1e-6` when all features are constant.
 */
double default_ridge(const Eigen::MatrixXd& features);

double mahalanobis_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const CovarianceModel& cov);

struct PcaModel {
    Eigen::VectorXd mean;
    // D x n_components, orthonormal columns.
    Eigen::MatrixXd components;
    Eigen::VectorXd explained_variance;
    double total_variance = 0;

    Eigen::VectorXd explained_variance_ratio() const;

    Eigen::MatrixXd transform(const Eigen::MatrixXd& matrix) const;

    Eigen::MatrixXd inverse_transform(const Eigen::MatrixXd& scores) const;
};

struct PcaResult {
    Eigen::MatrixXd scores;
    PcaModel model;
};

/**
 * PCA via the eigendecomposition of the sample covariance.
 * Components are ordered by decreasing variance; each component is flipped so that
 * its largest-magnitude loading is positive (the lowest index wins ties).
 *
 * @throws std::invalid_argument unless `1 <= n_components <= min(N, D)`.
 */
PcaResult pca_fit_transform(const Eigen::MatrixXd& matrix, int n_components);

}

#endif
