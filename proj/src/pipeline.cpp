#include "hgdomain/pipeline.hpp"

#include "hgdomain/errors.hpp"
#include "hgdomain/features.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <unordered_map>

namespace hgdomain {

namespace fs = std::filesystem;

int exit_code_for(const std::exception& error) {
    if (auto* stage = dynamic_cast<const StageError*>(&error)) {
        return stage->exit_code();
    }
    if (dynamic_cast<const ConfigError*>(&error)) {
        return 1;
    }
    if (dynamic_cast<const NumericError*>(&error)) {
        return 3;
    }
    return 2;
}

namespace {

// Runs one stage, converting any failure into a StageError carrying the stage name.
template<typename F>
auto stage(const std::string& name, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what(), exit_code_for(e));
    }
}

// Collects written files and removes them unless the run completes.
class Outputs {
public:
    explicit Outputs(const fs::path& dir) : dir_(dir) {}

    Outputs(const Outputs&) = delete;
    Outputs& operator=(const Outputs&) = delete;

    ~Outputs() {
        if (committed_) {
            return;
        }
        std::error_code ec;
        for (const auto& p : written_) {
            fs::remove(p, ec);
        }
        if (created_dir_) {
            fs::remove(dir_, ec);
        }
    }

    fs::path add(const char* name) {
        if (!fs::exists(dir_)) {
            fs::create_directories(dir_);
            created_dir_ = true;
        }
        written_.push_back(dir_ / name);
        return written_.back();
    }

    std::vector<fs::path> commit() {
        committed_ = true;
        return written_;
    }

private:
    fs::path dir_;
    std::vector<fs::path> written_;
    bool created_dir_ = false;
    bool committed_ = false;
};

const fs::path& require(const std::optional<fs::path>& path, const char* key, const char* command) {
    if (!path) {
        throw ConfigError(std::string(command) + " requires --" + key);
    }
    return *path;
}

SyntheticOptions synthetic_options(const PipelineConfig& config) {
    auto shape = parse_synth_shape(*config.synth);
    SyntheticOptions o;
    o.n_domains = shape.n_domains;
    o.spots_per_domain = shape.spots_per_domain;
    o.n_genes = shape.n_genes;
    o.noise_sd = config.synth_noise;
    o.mix = config.synth_mix;
    o.seed = config.seed;
    return o;
}

int distinct_count(const std::vector<int>& labels) {
    return static_cast<int>(std::set<int>(labels.begin(), labels.end()).size());
}

// The number of clusters k-means falls back to when --n_clusters is absent.
std::optional<int> default_cluster_count(const PipelineConfig& config, const std::vector<std::string>& spot_ids) {
    if (config.synth) {
        return parse_synth_shape(*config.synth).n_domains;
    }
    if (config.truth) {
        return distinct_count(load_labels(*config.truth, spot_ids));
    }
    return std::nullopt;
}

std::optional<std::vector<int>> truth_for(const PipelineConfig& config, const std::vector<std::string>& spot_ids) {
    if (config.truth) {
        return load_labels(*config.truth, spot_ids);
    }
    if (config.synth) {
        auto data = generate_synthetic(synthetic_options(config));
        std::unordered_map<std::string, int> by_id;
        for (std::size_t i = 0; i < data.coords.spot_ids.size(); ++i) {
            by_id.emplace(data.coords.spot_ids[i], data.truth.labels[i]);
        }
        std::vector<int> out;
        out.reserve(spot_ids.size());
        for (const auto& id : spot_ids) {
            auto it = by_id.find(id);
            if (it == by_id.end()) {
                throw DataError("spot '" + id + "' is not part of the synthetic dataset");
            }
            out.push_back(it->second);
        }
        return out;
    }
    return std::nullopt;
}

// Coordinates of the listed spots, in that order. Extra spots in `coords` are ignored.
SpatialCoords select_coords(const SpatialCoords& coords, const std::vector<std::string>& spot_ids) {
    std::unordered_map<std::string, Eigen::Index> row;
    for (std::size_t i = 0; i < coords.spot_ids.size(); ++i) {
        row.emplace(coords.spot_ids[i], static_cast<Eigen::Index>(i));
    }
    SpatialCoords out;
    out.positions.resize(static_cast<Eigen::Index>(spot_ids.size()), 2);
    out.spot_ids = spot_ids;
    for (std::size_t i = 0; i < spot_ids.size(); ++i) {
        auto it = row.find(spot_ids[i]);
        if (it == row.end()) {
            throw DataError("spot '" + spot_ids[i] + "' has no coordinates");
        }
        out.positions.row(static_cast<Eigen::Index>(i)) = coords.positions.row(it->second);
    }
    return out;
}

std::vector<std::string> numbered(const std::string& prefix, Eigen::Index n) {
    std::vector<std::string> out;
    for (Eigen::Index i = 0; i < n; ++i) {
        out.push_back(prefix + std::to_string(i + 1));
    }
    return out;
}

NamedMatrix load_embedding(const PipelineConfig& config, const char* command) {
    return stage("load", [&] { return load_named_matrix(require(config.embedding, "embedding", command)); });
}

}

PreparedData prepare_data(const PipelineConfig& config) {
    PreparedData out;
    ExpressionMatrix expr;
    SpatialCoords coords;
    if (config.synth) {
        if (config.expression || config.coords) {
            throw ConfigError("--synth cannot be combined with --expression or --coords");
        }
        auto data = generate_synthetic(synthetic_options(config));
        expr = std::move(data.expression);
        coords = std::move(data.coords);
    } else {
        expr = load_expression(require(config.expression, "expression", "this command"));
        coords = align_coords(load_coords(require(config.coords, "coords", "this command")), expr.spot_ids);
    }
    if (config.mask) {
        auto mask = load_mask(*config.mask, expr.spot_ids);
        std::tie(expr, coords) = apply_tissue_mask(expr, coords, mask);
    }
    out.raw = expr;
    out.expression = config.normalize == Normalization::log1p ? log1p_normalize(expr) : expr;
    out.coords = std::move(coords);
    out.truth = truth_for(config, out.expression.spot_ids);
    return out;
}

HypergraphStage build_hypergraph_stage(const PipelineConfig& config, const PreparedData& data) {
    if (config.gate_quantile && !config.image) {
        throw ConfigError("--gate_quantile requires --image");
    }
    HypergraphStage out;
    out.hypergraph = build_knn_hypergraph(data.coords, config.k_neighbors);
    if (!config.image) {
        return out;
    }
    auto image = load_png(*config.image);
    auto tiles = extract_tiles(image, data.coords, config.tile_size, config.image_scale);
    Eigen::MatrixXd raw = tile_features(tiles);
    int n_comp = std::min<int>(config.tile_components, static_cast<int>(std::min(raw.rows(), raw.cols())));
    Eigen::MatrixXd reduced = pca_fit_transform(raw, n_comp).scores;
    if (config.gate_quantile) {
        auto cov = covariance_matrix(reduced, default_ridge(reduced));
        out.hypergraph = gate_hyperedges(out.hypergraph, reduced, cov, *config.gate_quantile);
    }
    out.tile_features = NamedMatrix{reduced, data.coords.spot_ids, numbered("T", reduced.cols())};
    return out;
}

TrainStage train_stage(const PipelineConfig& config, const PreparedData& data, const Hypergraph& hg) {
    if (hg.n_vertices != data.expression.n_spots()) {
        throw DataError("hypergraph has " + std::to_string(hg.n_vertices) + " vertices but the data has " +
                        std::to_string(data.expression.n_spots()) + " spots");
    }
    auto H = incidence_matrix(hg);
    auto norm = degree_normalization(H, hg.edge_weights);
    Eigen::MatrixXd A = adjacency_from_incidence(H);

    Architecture arch;
    arch.n_genes = static_cast<int>(data.expression.n_genes());
    arch.encoder_hidden = {config.hidden_dim};
    arch.decoder_hidden = {config.hidden_dim};
    arch.hgcn_hidden = {config.hidden_dim};
    arch.latent_dim = config.latent_dim;
    arch.spatial_dim = config.spatial_dim;

    TrainConfig tc;
    tc.epochs = config.epochs;
    tc.learning_rate = config.learning_rate;
    tc.noise_sd = config.noise_sd;
    tc.lambda_re = config.lambda_re;
    tc.seed = config.seed;
    tc.phased = config.phased;

    TrainStage out;
    out.training = train_joint(data.expression.values, norm, A, arch, tc);
    const auto& fused = out.training.embeddings.fused;
    int n_comp = std::min<int>(config.pca_components, static_cast<int>(std::min(fused.rows(), fused.cols())));
    auto pca = pca_fit_transform(fused, n_comp);
    out.embedding = NamedMatrix{pca.scores, data.expression.spot_ids, numbered("PC", pca.scores.cols())};
    return out;
}

ClusterAssignment cluster_stage(const PipelineConfig& config, const NamedMatrix& embedding, std::optional<int> default_clusters) {
    if (config.cluster_method == ClusterMethod::leiden) {
        auto graph = build_snn_graph(embedding.values, config.k_snn);
        return leiden_communities(graph, config.resolution, config.seed);
    }
    auto k = config.n_clusters ? config.n_clusters : default_clusters;
    if (!k) {
        throw ConfigError("k-means needs --n_clusters (no ground truth or synthetic shape to infer it from)");
    }
    return kmeans(embedding.values, *k, config.seed, config.kmeans_max_iter).assignment;
}

MetricReport evaluate_stage(const PipelineConfig& config, const NamedMatrix& embedding, const std::vector<int>& labels,
                            const std::optional<std::vector<int>>& truth) {
    auto n = embedding.values.rows();
    if (static_cast<Eigen::Index>(labels.size()) != n) {
        throw DataError("labels cover " + std::to_string(labels.size()) + " spots but the embedding has " + std::to_string(n));
    }
    int k = config.k_lisi ? *config.k_lisi : default_k_lisi(n);
    auto lisi = ilisi(embedding.values, labels, k);

    MetricReport report;
    if (truth) {
        report.ari = adjusted_rand_index(*truth, labels);
    }
    report.ilisi_mean = lisi.mean;
    report.ilisi_per_spot = std::move(lisi.per_spot);
    report.k_lisi = lisi.k_lisi;
    report.n_spots = static_cast<int>(n);
    report.n_clusters = distinct_count(labels);
    return report;
}

namespace {

void write_ilisi(const std::vector<std::string>& spot_ids, const std::vector<double>& values, const fs::path& path) {
    NamedMatrix m{Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())), spot_ids, {"ilisi"}};
    write_named_matrix(m, path);
}

// Labels read back from a file, in the order of `spot_ids`.
std::vector<int> labels_for(const fs::path& path, const std::vector<std::string>& spot_ids) {
    auto [ids, labels] = load_labels(path);
    if (ids.size() != spot_ids.size()) {
        throw DataError(path.string() + " has " + std::to_string(ids.size()) + " spots, expected " + std::to_string(spot_ids.size()));
    }
    return load_labels(path, spot_ids);
}

}

std::vector<fs::path> run_synth(const PipelineConfig& config) {
    if (!config.synth) {
        throw ConfigError("synth requires --synth DOMAINSxSPOTSxGENES");
    }
    Outputs out(config.out);
    auto data = stage("synth", [&] { return generate_synthetic(synthetic_options(config)); });
    stage("write", [&] {
        write_expression(data.expression, out.add(artifact::expression));
        write_coords(data.coords, out.add(artifact::coords));
        write_labels(data.coords.spot_ids, data.truth.labels, out.add(artifact::truth));
    });
    return out.commit();
}

std::vector<fs::path> run_hypergraph(const PipelineConfig& config) {
    auto data = stage("load", [&] { return prepare_data(config); });
    auto hg = stage("hypergraph", [&] { return build_hypergraph_stage(config, data); });
    Outputs out(config.out);
    stage("write", [&] {
        write_hypergraph(hg.hypergraph, out.add(artifact::hypergraph));
        if (hg.tile_features) {
            write_named_matrix(*hg.tile_features, out.add(artifact::tile_features));
        }
    });
    return out.commit();
}

std::vector<fs::path> run_train(const PipelineConfig& config) {
    auto data = stage("load", [&] { return prepare_data(config); });
    auto hg = stage("hypergraph", [&] {
        if (config.hypergraph) {
            return load_hypergraph(*config.hypergraph, static_cast<int>(data.expression.n_spots()));
        }
        return build_hypergraph_stage(config, data).hypergraph;
    });
    auto trained = stage("train", [&] { return train_stage(config, data, hg); });
    Outputs out(config.out);
    stage("write", [&] {
        write_checkpoint(trained.training.params, out.add(artifact::model));
        write_loss_trace(trained.training.trace, out.add(artifact::loss_trace));
        write_named_matrix(trained.embedding, out.add(artifact::embedding));
    });
    return out.commit();
}

std::vector<fs::path> run_cluster(const PipelineConfig& config) {
    auto embedding = load_embedding(config, "cluster");
    auto fallback = stage("load", [&] { return default_cluster_count(config, embedding.row_ids); });
    auto assignment = stage("cluster", [&] { return cluster_stage(config, embedding, fallback); });
    Outputs out(config.out);
    stage("write", [&] { write_labels(embedding.row_ids, assignment.labels, out.add(artifact::labels)); });
    return out.commit();
}

std::vector<fs::path> run_evaluate(const PipelineConfig& config) {
    auto embedding = load_embedding(config, "evaluate");
    auto [labels, truth] = stage("load", [&] {
        auto l = labels_for(require(config.labels, "labels", "evaluate"), embedding.row_ids);
        return std::make_pair(l, truth_for(config, embedding.row_ids));
    });
    auto report = stage("evaluate", [&] { return evaluate_stage(config, embedding, labels, truth); });
    Outputs out(config.out);
    stage("write", [&] {
        write_metrics(report, out.add(artifact::metrics));
        write_ilisi(embedding.row_ids, report.ilisi_per_spot, out.add(artifact::ilisi));
    });
    return out.commit();
}

std::vector<fs::path> run_plot(const PipelineConfig& config) {
    auto [coords, labels] = stage("load", [&] {
        auto [ids, l] = load_labels(require(config.labels, "labels", "plot"));
        SpatialCoords all;
        if (config.synth) {
            all = generate_synthetic(synthetic_options(config)).coords;
        } else {
            all = load_coords(require(config.coords, "coords", "plot"));
        }
        return std::make_pair(select_coords(all, ids), canonical_labels(l));
    });
    Outputs out(config.out);
    stage("plot", [&] { plot_domains(coords, labels, out.add(artifact::plot)); });
    return out.commit();
}

std::vector<fs::path> run_pipeline(const PipelineConfig& config) {
    auto data = stage("load", [&] { return prepare_data(config); });
    auto hg = stage("hypergraph", [&] { return build_hypergraph_stage(config, data); });
    auto trained = stage("train", [&] { return train_stage(config, data, hg.hypergraph); });
    std::optional<int> fallback;
    if (config.synth) {
        fallback = parse_synth_shape(*config.synth).n_domains;
    } else if (data.truth) {
        fallback = distinct_count(*data.truth);
    }
    auto assignment = stage("cluster", [&] { return cluster_stage(config, trained.embedding, fallback); });
    auto report = stage("evaluate", [&] { return evaluate_stage(config, trained.embedding, assignment.labels, data.truth); });

    Outputs out(config.out);
    const auto& ids = data.expression.spot_ids;
    stage("write", [&] {
        if (config.synth) {
            auto synth = generate_synthetic(synthetic_options(config));
            write_expression(synth.expression, out.add(artifact::expression));
            write_coords(synth.coords, out.add(artifact::coords));
            write_labels(synth.coords.spot_ids, synth.truth.labels, out.add(artifact::truth));
        }
        write_hypergraph(hg.hypergraph, out.add(artifact::hypergraph));
        if (hg.tile_features) {
            write_named_matrix(*hg.tile_features, out.add(artifact::tile_features));
        }
        write_checkpoint(trained.training.params, out.add(artifact::model));
        write_loss_trace(trained.training.trace, out.add(artifact::loss_trace));
        write_named_matrix(trained.embedding, out.add(artifact::embedding));
        write_labels(ids, assignment.labels, out.add(artifact::labels));
        write_metrics(report, out.add(artifact::metrics));
        write_ilisi(ids, report.ilisi_per_spot, out.add(artifact::ilisi));
    });
    stage("plot", [&] { plot_domains(data.coords, assignment.labels, out.add(artifact::plot)); });
    return out.commit();
}

}
