#include "hgdomain/features.hpp"
#include "hgdomain/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hgdomain {

TileSet extract_tiles(const Image& image, const SpatialCoords& coords, int tile_size, double pixels_per_unit) {
    if (tile_size < 1) {
        throw std::invalid_argument("extract_tiles: tile_size must be at least 1");
    }
    if (image.width < 1 || image.height < 1) {
        throw std::invalid_argument("extract_tiles: empty image");
    }

    TileSet out;
    out.tile_size = tile_size;
    out.tiles.reserve(static_cast<std::size_t>(coords.size()));
    const int half = tile_size / 2;

    for (Eigen::Index i = 0; i < coords.size(); ++i) {
        double px = coords.positions(i, 0) * pixels_per_unit;
        double py = coords.positions(i, 1) * pixels_per_unit;
        if (px < -half || py < -half || px > image.width - 1 + half || py > image.height - 1 + half) {
            throw std::invalid_argument("extract_tiles: spot '" + coords.spot_ids[static_cast<std::size_t>(i)] +
                                        "' lies more than tile_size/2 pixels outside the image");
        }

        const int x0 = static_cast<int>(std::lround(px)) - half;
        const int y0 = static_cast<int>(std::lround(py)) - half;
        Image tile;
        tile.width = tile_size;
        tile.height = tile_size;
        tile.channels = image.channels;
        tile.pixels.assign(static_cast<std::size_t>(tile_size) * tile_size * image.channels, 0);
        for (int ty = 0; ty < tile_size; ++ty) {
            int y = y0 + ty;
            if (y < 0 || y >= image.height) {
                continue;
            }
            for (int tx = 0; tx < tile_size; ++tx) {
                int x = x0 + tx;
                if (x < 0 || x >= image.width) {
                    continue;
                }
                for (int c = 0; c < image.channels; ++c) {
                    tile.at(tx, ty, c) = image.at(x, y, c);
                }
            }
        }
        out.tiles.push_back(std::move(tile));
    }
    return out;
}

Eigen::VectorXd tile_feature_vector(const Image& tile) {
    const int channels = tile.channels;
    const auto npix = static_cast<double>(tile.width) * tile.height;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(channels * (2 + histogram_bins));
    if (npix == 0) {
        throw std::invalid_argument("tile_feature_vector: empty tile");
    }

    for (int c = 0; c < channels; ++c) {
        double sum = 0;
        for (int y = 0; y < tile.height; ++y) {
            for (int x = 0; x < tile.width; ++x) {
                auto v = tile.at(x, y, c);
                sum += v;
                out(2 * channels + c * histogram_bins + v / (256 / histogram_bins)) += 1;
            }
        }
        double mean = sum / npix;
        double ss = 0;
        for (int y = 0; y < tile.height; ++y) {
            for (int x = 0; x < tile.width; ++x) {
                double d = tile.at(x, y, c) - mean;
                ss += d * d;
            }
        }
        out(c) = mean;
        out(channels + c) = std::sqrt(ss / npix);
    }
    out.tail(channels * histogram_bins) /= npix;
    return out;
}

Eigen::MatrixXd tile_features(const TileSet& tiles, const Featurizer& featurizer) {
    Eigen::MatrixXd out;
    for (std::size_t i = 0; i < tiles.tiles.size(); ++i) {
        Eigen::VectorXd v = featurizer(tiles.tiles[i]);
        if (i == 0) {
            out.resize(static_cast<Eigen::Index>(tiles.tiles.size()), v.size());
        } else if (v.size() != out.cols()) {
            throw std::invalid_argument("tile_features: featurizer returned vectors of different lengths");
        }
        out.row(static_cast<Eigen::Index>(i)) = v.transpose();
    }
    return out;
}

namespace {

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& x) {
    Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
    Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
    // Symmetrize exactly; the product is symmetric only up to rounding.
    return (cov + cov.transpose()) / 2;
}

}

double default_ridge(const Eigen::MatrixXd& features) {
    if (features.rows() < 2) {
        return 1e-6;
    }
    double mean_diag = sample_covariance(features).diagonal().mean();
    return mean_diag > 0 ? 1e-6 * mean_diag : 1e-6;
}

CovarianceModel covariance_matrix(const Eigen::MatrixXd& features, double ridge) {
    if (features.rows() < 2) {
        throw std::invalid_argument("covariance_matrix: need at least 2 rows");
    }
    if (!(ridge >= 0)) {
        throw std::invalid_argument("covariance_matrix: ridge must be non-negative");
    }

    CovarianceModel out;
    out.ridge = ridge;
    out.sigma = sample_covariance(features);
    out.sigma.diagonal().array() += ridge;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(out.sigma);
    const auto& values = eig.eigenvalues();
    double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
    if (values.minCoeff() <= 1e-12 * scale) {
        throw NumericError("covariance matrix is singular after adding ridge " + std::to_string(ridge) +
                           " (smallest eigenvalue " + std::to_string(values.minCoeff()) + "); increase the ridge");
    }
    out.sigma_inv = eig.eigenvectors() * values.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
    out.sigma_inv = (out.sigma_inv + out.sigma_inv.transpose()) / 2;
    return out;
}

double mahalanobis_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const CovarianceModel& cov) {
    if (a.size() != b.size() || a.size() != cov.sigma_inv.rows()) {
        throw std::invalid_argument("mahalanobis_distance: dimension mismatch (" + std::to_string(a.size()) + ", " +
                                    std::to_string(b.size()) + ", covariance " + std::to_string(cov.sigma_inv.rows()) + ")");
    }
    Eigen::VectorXd diff = a - b;
    double q = diff.dot(cov.sigma_inv * diff);
    return std::sqrt(std::max(q, 0.0));
}

Eigen::VectorXd PcaModel::explained_variance_ratio() const {
    if (total_variance <= 0) {
        return Eigen::VectorXd::Zero(explained_variance.size());
    }
    return explained_variance / total_variance;
}

Eigen::MatrixXd PcaModel::transform(const Eigen::MatrixXd& matrix) const {
    return (matrix.rowwise() - mean.transpose()) * components;
}

Eigen::MatrixXd PcaModel::inverse_transform(const Eigen::MatrixXd& scores) const {
    return (scores * components.transpose()).rowwise() + mean.transpose();
}

PcaResult pca_fit_transform(const Eigen::MatrixXd& matrix, int n_components) {
    const auto n = matrix.rows();
    const auto d = matrix.cols();
    if (n_components < 1 || n_components > std::min(n, d)) {
        throw std::invalid_argument("pca_fit_transform: n_components=" + std::to_string(n_components) +
                                    " must lie in [1, " + std::to_string(std::min(n, d)) + "]");
    }

    PcaResult out;
    out.model.mean = matrix.colwise().mean().transpose();
    Eigen::MatrixXd centered = matrix.rowwise() - out.model.mean.transpose();
    Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(std::max<Eigen::Index>(n - 1, 1));
    cov = (cov + cov.transpose()) / 2;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    // Eigenvalues come in increasing order.
    out.model.components.resize(d, n_components);
    out.model.explained_variance.resize(n_components);
    for (int k = 0; k < n_components; ++k) {
        Eigen::Index src = d - 1 - k;
        Eigen::VectorXd v = eig.eigenvectors().col(src);
        Eigen::Index arg = 0;
        double best = -1;
        for (Eigen::Index j = 0; j < d; ++j) {
            // Ties within rounding resolve to the lowest index.
            if (std::abs(v(j)) > best + 1e-12) {
                best = std::abs(v(j));
                arg = j;
            }
        }
        if (v(arg) < 0) {
            v = -v;
        }
        out.model.components.col(k) = v;
        out.model.explained_variance(k) = std::max(eig.eigenvalues()(src), 0.0);
    }
    out.model.total_variance = cov.trace();
    out.scores = centered * out.model.components;
    return out;
}

}
