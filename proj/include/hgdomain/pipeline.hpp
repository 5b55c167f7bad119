#ifndef HGDOMAIN_PIPELINE_HPP
#define HGDOMAIN_PIPELINE_HPP

#include "hgdomain/clustering.hpp"
#include "hgdomain/dataio.hpp"
#include "hgdomain/hypergraph.hpp"
#include "hgdomain/metrics.hpp"
#include "hgdomain/neuralnet.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

/**
 * @file pipeline.hpp
 *
 * @brief Configuration and stage orchestration behind the command-line tool.
 *
 * Every stage reads and writes plain files so the subcommands can be chained by hand;
 * `run_pipeline` performs the same chain in memory and writes the same artifacts.
 */

namespace hgdomain {

enum class Normalization { none, log1p };

/**
 * Thrown for invalid configuration (unknown keys, unparseable values, missing required inputs).
 */
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PipelineConfig {
    // Inputs. `synth` ("DOMAINSxSPOTSxGENES") replaces expression/coords/truth with a generated dataset.
    std::optional<std::filesystem::path> expression;
    std::optional<std::filesystem::path> coords;
    std::optional<std::filesystem::path> image;
    std::optional<std::filesystem::path> mask;
    std::optional<std::filesystem::path> truth;
    std::optional<std::string> synth;
    double synth_noise = 0.1;
    double synth_mix = 0.0;

    // Intermediate files consumed by the individual subcommands.
    std::optional<std::filesystem::path> hypergraph;
    std::optional<std::filesystem::path> embedding;
    std::optional<std::filesystem::path> labels;

    std::filesystem::path out = "hgdomain_out";

    int k_neighbors = 6;
    int tile_size = 32;
    double image_scale = 1.0;
    int tile_components = 8;
    // Mahalanobis gating of hyperedges; disabled when unset.
    std::optional<double> gate_quantile;

    Normalization normalize = Normalization::log1p;
    int pca_components = 20;
    int latent_dim = 32;
    int spatial_dim = 32;
    int hidden_dim = 64;
    double noise_sd = 0.1;
    double lambda_re = 1.0;
    double learning_rate = 1e-3;
    int epochs = 500;
    std::uint64_t seed = 0;
    bool phased = false;

    ClusterMethod cluster_method = ClusterMethod::kmeans;
    std::optional<int> n_clusters;
    double resolution = 1.0;
    int k_snn = 15;
    std::optional<int> k_lisi;
    int kmeans_max_iter = 300;

    /**
     * Sets one field from its textual `key=value` form.
     *
     * @throws ConfigError on an unknown key or a value that does not parse or is out of range.
     */
    void set(const std::string& key, const std::string& value);

    static const std::vector<std::string>& keys();

    bool operator==(const PipelineConfig&) const = default;
};

/**
 * Reads a flat `key=value` file. Blank lines and lines starting with `#` are ignored.
 */
std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path);

/**
 * Defaults, overridden by the config file entries, overridden by flags.
 */
PipelineConfig resolve_config(const std::vector<std::pair<std::string, std::string>>& file_entries,
                              const std::vector<std::pair<std::string, std::string>>& flag_entries);

struct SyntheticShape {
    int n_domains = 0;
    int spots_per_domain = 0;
    int n_genes = 0;
};

SyntheticShape parse_synth_shape(const std::string& text);

/**
 * Loaded (or generated), normalized and masked inputs.
 */
struct PreparedData {
    ExpressionMatrix raw;
    ExpressionMatrix expression;
    SpatialCoords coords;
    std::optional<std::vector<int>> truth;
};

PreparedData prepare_data(const PipelineConfig& config);

struct HypergraphStage {
    Hypergraph hypergraph;
    std::optional<NamedMatrix> tile_features;
};

HypergraphStage build_hypergraph_stage(const PipelineConfig& config, const PreparedData& data);

struct TrainStage {
    TrainResult training;
    // PCA-reduced fused embedding, the clustering input.
    NamedMatrix embedding;
};

TrainStage train_stage(const PipelineConfig& config, const PreparedData& data, const Hypergraph& hg);

ClusterAssignment cluster_stage(const PipelineConfig& config, const NamedMatrix& embedding, std::optional<int> default_clusters);

MetricReport evaluate_stage(const PipelineConfig& config, const NamedMatrix& embedding, const std::vector<int>& labels,
                            const std::optional<std::vector<int>>& truth);

/**
 * Scatter of spots colored by label from a fixed 12-color palette, with a legend of label counts.
 * The data panel's viewBox is fitted to the coordinates with a 5% margin. Output is deterministic.
 */
void plot_domains(const SpatialCoords& coords, const std::vector<int>& labels, const std::filesystem::path& path);

/**
 * Failure of a named pipeline stage. `exit_code` follows the tool's convention:
 * 1 usage, 2 data or validation, 3 numeric.
 */
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& message, int exit_code)
        : std::runtime_error("stage '" + stage + "': " + message), stage_(std::move(stage)), exit_code_(exit_code) {}

    const std::string& stage() const { return stage_; }
    int exit_code() const { return exit_code_; }

private:
    std::string stage_;
    int exit_code_;
};

/**
 * Exit status for an exception escaping a stage.
 */
int exit_code_for(const std::exception& error);

/**
 * Subcommands. Each writes into `config.out` and returns the paths it wrote.
 * On failure, files already written by the call are removed and a `StageError` is thrown.
 */
std::vector<std::filesystem::path> run_synth(const PipelineConfig& config);
std::vector<std::filesystem::path> run_hypergraph(const PipelineConfig& config);
std::vector<std::filesystem::path> run_train(const PipelineConfig& config);
std::vector<std::filesystem::path> run_cluster(const PipelineConfig& config);
std::vector<std::filesystem::path> run_evaluate(const PipelineConfig& config);
std::vector<std::filesystem::path> run_plot(const PipelineConfig& config);
std::vector<std::filesystem::path> run_pipeline(const PipelineConfig& config);

namespace artifact {
inline constexpr const char* expression = "expression.csv";
inline constexpr const char* coords = "coords.csv";
inline constexpr const char* truth = "truth.csv";
inline constexpr const char* hypergraph = "hypergraph.txt";
inline constexpr const char* tile_features = "tile_features.csv";
inline constexpr const char* model = "model.txt";
inline constexpr const char* loss_trace = "loss_trace.csv";
inline constexpr const char* embedding = "embedding.csv";
inline constexpr const char* labels = "labels.csv";
inline constexpr const char* metrics = "metrics.json";
inline constexpr const char* ilisi = "ilisi.csv";
inline constexpr const char* plot = "domains.svg";
}

}

#endif
