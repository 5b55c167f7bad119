#ifndef HGDOMAIN_NEURALNET_HPP
#define HGDOMAIN_NEURALNET_HPP

#include "hgdomain/hypergraph.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

/**
 * @file neuralnet.hpp
 *
 * @brief Denoising autoencoder and hypergraph convolutional autoencoder with analytic gradients.
 *
 * The denoising autoencoder maps expression `X` (N x M) to a latent `L_h` (N x R).
 * Its decoder reads `[L_h + Z | Z_h]` (N x (R + R')), where `Z` is Gaussian noise and
 * `Z_h` (N x R') is the output of the hypergraph encoder applied to `X`.
 * The hypergraph encoder is trained to reconstruct the spot adjacency through `sigmoid(Z_h Z_h^T)`.
 * Both are trained jointly on `F_l + lambda * L_re`.
 */

namespace hgdomain {

enum class Activation { identity, leaky_relu };

struct DenseLayer {
    // in x out
    Eigen::MatrixXd weight;
    Eigen::RowVectorXd bias;
    Activation activation = Activation::identity;
};

struct HgcnLayer {
    // in x out; hypergraph convolutions carry no bias.
    Eigen::MatrixXd weight;
    Activation activation = Activation::identity;
};

struct ModelParams {
    std::vector<DenseLayer> encoder;
    std::vector<DenseLayer> decoder;
    std::vector<HgcnLayer> hgcn;
    double leaky_slope = 0.01;

    Eigen::Index input_dim() const { return encoder.front().weight.rows(); }
    Eigen::Index latent_dim() const { return encoder.back().weight.cols(); }
    Eigen::Index spatial_dim() const { return hgcn.back().weight.cols(); }

    /**
     * @throws std::invalid_argument if layer dimensions do not chain, the decoder does not
     * map `R + R'` back to `M`, or any parameter is non-finite.
     */
    void validate() const;

    /**
     * Views over every parameter array, in a fixed order: encoder (weight, bias)...,
     * decoder (weight, bias)..., hgcn weights.
     */
    std::vector<std::span<double>> blocks();
    std::vector<std::span<const double>> blocks() const;

    std::size_t n_parameters() const;

    /**
     * Same shapes and activations, all values zero.
     */
    ModelParams zeros_like() const;
};

struct Architecture {
    int n_genes = 0;
    std::vector<int> encoder_hidden{64};
    int latent_dim = 32;
    std::vector<int> decoder_hidden{64};
    std::vector<int> hgcn_hidden{64};
    int spatial_dim = 32;
    double leaky_slope = 0.01;
};

/**
 * Hidden layers use the leaky rectifier, the last layer of each stack is linear.
 * Weights are uniform in `+/- sqrt(6 / (fan_in + fan_out))`, biases zero.
 */
ModelParams init_params(const Architecture& arch, std::uint64_t seed);

/**
 * I.i.d. `N(0, sd^2)` matrix, deterministic given `seed`.
 */
Eigen::MatrixXd gaussian_noise(Eigen::Index rows, Eigen::Index cols, double sd, std::uint64_t seed);

/**
 * `L + Z` with `Z` from `gaussian_noise`. With `noise_sd == 0` the input is returned unchanged.
 */
Eigen::MatrixXd add_noise(const Eigen::MatrixXd& L, double noise_sd, std::uint64_t seed);

/**
 * Stacked affine layers with their activations.
 */
Eigen::MatrixXd dense_forward(const Eigen::MatrixXd& input, const std::vector<DenseLayer>& layers, double leaky_slope);

struct DaeOutput {
    Eigen::MatrixXd latent;
    Eigen::MatrixXd reconstruction;
};

/**
 * Encodes `X`, corrupts the latent with `add_noise`, and decodes `[noisy latent | spatial]`.
 *
 * @throws std::invalid_argument if `spatial` is not N x R'.
 */
DaeOutput dae_forward(const Eigen::MatrixXd& X, const ModelParams& params, const Eigen::MatrixXd& spatial, double noise_sd, std::uint64_t seed);

/**
 * Mean over all entries of the squared difference.
 */
double mse_loss(const Eigen::MatrixXd& X, const Eigen::MatrixXd& reconstruction);

/**
 * Stage one of hypergraph message passing: each hyperedge takes the mean of its members' rows.
 */
Eigen::MatrixXd node_to_edge_aggregate(const Eigen::MatrixXd& node_features, const Hypergraph& hg);

/**
 * Stage two: each vertex takes the mean of the rows of its incident hyperedges.
 */
Eigen::MatrixXd edge_to_node_aggregate(const Eigen::MatrixXd& edge_features, const Hypergraph& hg);

/**
 * Layer `l` computes `act(P X_l Theta_l)` with `P` the propagation operator.
 */
Eigen::MatrixXd hgcn_forward(const Eigen::MatrixXd& X, const SparseMatrix& propagation, const ModelParams& params);

inline Eigen::MatrixXd hgcn_forward(const Eigen::MatrixXd& X, const DegreeNormalization& norm, const ModelParams& params) {
    return hgcn_forward(X, norm.propagation, params);
}

/**
 * `sigmoid(Z Z^T)`.
 */
Eigen::MatrixXd similarity_decode(const Eigen::MatrixXd& Z);

inline constexpr double bce_clamp = 1e-7;

/**
 * Weighted binary cross-entropy averaged over all N^2 entries, with weight `pos_weight` on entries where `A = 1`.
 * `S` is clamped to `[1e-7, 1 - 1e-7]` before taking logs. Returned as a non-negative loss.
 */
double weighted_bce_loss(const Eigen::MatrixXd& S, const Eigen::MatrixXd& A, double pos_weight);

/**
 * `#zeros / #ones` of `A`, or 1 when `A` has no ones.
 */
double default_pos_weight(const Eigen::MatrixXd& A);

/**
 * Everything the joint objective needs besides the parameters.
 */
struct Objective {
    Eigen::MatrixXd X;
    SparseMatrix propagation;
    Eigen::MatrixXd adjacency;
    // N x R noise added to the latent before decoding.
    Eigen::MatrixXd noise;
    double pos_weight = 1;
    double reconstruction_weight = 1;
    double structure_weight = 1;
};

struct LossTerms {
    double reconstruction = 0;
    double structure = 0;
    double total = 0;
};

LossTerms evaluate_loss(const ModelParams& params, const Objective& objective);

/**
 * Loss and its analytic gradient. `grad` is overwritten and takes the shapes of `params`.
 */
LossTerms loss_and_gradient(const ModelParams& params, const Objective& objective, ModelParams& grad);

using GradientFunction = std::function<void(const ModelParams&, const Objective&, ModelParams&)>;

/**
 * Gradients smaller than this cannot be resolved to 1e-4 relative accuracy by central differences in double precision.
 */
inline constexpr double gradient_check_floor = 1e-6;

/**
 * Compares an analytic gradient against central finite differences on `n_coords` parameter coordinates
 * sampled without replacement (seeded), and returns the largest
 * `|g_a - g_f| / max(|g_a|, |g_f|, gradient_check_floor)`.
 *
 * @throws std::invalid_argument unless `1e-7 <= epsilon <= 1e-3`.
 */
double gradient_check(const ModelParams& params, const Objective& objective, double epsilon, std::uint64_t seed,
                      const GradientFunction& analytic, int n_coords = 64);

double gradient_check(const ModelParams& params, const Objective& objective, double epsilon, std::uint64_t seed, int n_coords = 64);

struct TrainConfig {
    int epochs = 500;
    double learning_rate = 1e-3;
    double noise_sd = 0.1;
    double lambda_re = 1.0;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    // Defaults to `default_pos_weight(A)`.
    std::optional<double> pos_weight;
    // Train the hypergraph encoder on L_re first, then the denoising autoencoder on F_l with the encoder frozen.
    bool phased = false;

    void validate() const;
};

struct LossRecord {
    int epoch = 0;
    double reconstruction = 0;
    double structure = 0;
    double total = 0;
};

struct EmbeddingBundle {
    Eigen::MatrixXd latent;
    Eigen::MatrixXd spatial;
    Eigen::MatrixXd fused;
};

struct TrainResult {
    ModelParams params;
    EmbeddingBundle embeddings;
    std::vector<LossRecord> trace;
};

/**
 * Seed of the latent noise. One noise draw is shared by every epoch of a run,
 * so the objective is a fixed function of the parameters.
 */
std::uint64_t noise_seed(std::uint64_t seed);

/**
 * Full-batch Adam on `F_l + lambda_re * L_re`. The trace records the loss before each update.
 * Final embeddings are computed without noise; `fused = [L_h | Z_h]`.
 *
 * @throws NumericError if the loss becomes non-finite.
 */
TrainResult train_joint(const Eigen::MatrixXd& X, const DegreeNormalization& norm, const Eigen::MatrixXd& A,
                        const Architecture& arch, const TrainConfig& config);

/**
 * Embeddings of `X` under trained parameters, without noise.
 */
EmbeddingBundle embed(const Eigen::MatrixXd& X, const SparseMatrix& propagation, const ModelParams& params);

/**
 * Versioned text checkpoint: header line, leaky slope, then each stack with its layer shapes,
 * activations and row-major values in shortest round-trip form.
 */
void write_checkpoint(const ModelParams& params, const std::filesystem::path& path);

ModelParams load_checkpoint(const std::filesystem::path& path);

/**
 * CSV with columns `epoch,F_l,L_re,total`.
 */
void write_loss_trace(const std::vector<LossRecord>& trace, const std::filesystem::path& path);

}

#endif
