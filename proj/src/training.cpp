#include "hgdomain/errors.hpp"
#include "hgdomain/neuralnet.hpp"

#include "csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace hgdomain {

void TrainConfig::validate() const {
    if (epochs < 1) {
        throw std::invalid_argument("epochs must be at least 1");
    }
    if (!(learning_rate > 0)) {
        throw std::invalid_argument("learning_rate must be positive");
    }
    if (!(lambda_re >= 0)) {
        throw std::invalid_argument("lambda_re must be non-negative");
    }
    if (!(noise_sd >= 0)) {
        throw std::invalid_argument("noise_sd must be non-negative");
    }
    if (pos_weight && !(*pos_weight > 0)) {
        throw std::invalid_argument("pos_weight must be positive");
    }
}

std::uint64_t noise_seed(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x6e6f6973u};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

namespace {

class Adam {
public:
    Adam(const ModelParams& like, const TrainConfig& config)
        : m_(like.zeros_like()), v_(like.zeros_like()), config_(config) {}

    void step(ModelParams& params, const ModelParams& grad, bool update_dae, bool update_hgcn) {
        ++t_;
        const double c1 = 1 - std::pow(config_.beta1, t_);
        const double c2 = 1 - std::pow(config_.beta2, t_);
        auto p = params.blocks();
        auto g = grad.blocks();
        auto m = m_.blocks();
        auto v = v_.blocks();
        const std::size_t n_dae = 2 * (params.encoder.size() + params.decoder.size());
        for (std::size_t b = 0; b < p.size(); ++b) {
            bool is_dae = b < n_dae;
            if ((is_dae && !update_dae) || (!is_dae && !update_hgcn)) {
                continue;
            }
            for (std::size_t i = 0; i < p[b].size(); ++i) {
                m[b][i] = config_.beta1 * m[b][i] + (1 - config_.beta1) * g[b][i];
                v[b][i] = config_.beta2 * v[b][i] + (1 - config_.beta2) * g[b][i] * g[b][i];
                double mhat = m[b][i] / c1;
                double vhat = v[b][i] / c2;
                p[b][i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.adam_epsilon);
            }
        }
    }

private:
    ModelParams m_;
    ModelParams v_;
    TrainConfig config_;
    int t_ = 0;
};

}

EmbeddingBundle embed(const Eigen::MatrixXd& X, const SparseMatrix& propagation, const ModelParams& params) {
    EmbeddingBundle out;
    out.latent = dense_forward(X, params.encoder, params.leaky_slope);
    out.spatial = hgcn_forward(X, propagation, params);
    out.fused.resize(X.rows(), out.latent.cols() + out.spatial.cols());
    out.fused << out.latent, out.spatial;
    return out;
}

TrainResult train_joint(const Eigen::MatrixXd& X, const DegreeNormalization& norm, const Eigen::MatrixXd& A,
                        const Architecture& arch, const TrainConfig& config) {
    config.validate();
    if (arch.n_genes != X.cols()) {
        throw std::invalid_argument("train_joint: architecture expects " + std::to_string(arch.n_genes) + " genes, data has " +
                                    std::to_string(X.cols()));
    }

    TrainResult result;
    result.params = init_params(arch, config.seed);

    Objective obj;
    obj.X = X;
    obj.propagation = norm.propagation;
    obj.adjacency = A;
    obj.pos_weight = config.pos_weight.value_or(default_pos_weight(A));

    struct Phase {
        int epochs;
        double reconstruction_weight;
        double structure_weight;
        bool update_dae;
        bool update_hgcn;
    };
    std::vector<Phase> phases;
    if (config.phased) {
        phases.push_back({config.epochs, 0.0, 1.0, false, true});
        phases.push_back({config.epochs, 1.0, 0.0, true, false});
    } else {
        phases.push_back({config.epochs, 1.0, config.lambda_re, true, true});
    }

    obj.noise = gaussian_noise(X.rows(), result.params.latent_dim(), config.noise_sd, noise_seed(config.seed));

    Adam adam(result.params, config);
    ModelParams grad;
    int epoch = 0;
    for (const auto& phase : phases) {
        obj.reconstruction_weight = phase.reconstruction_weight;
        obj.structure_weight = phase.structure_weight;
        for (int e = 0; e < phase.epochs; ++e, ++epoch) {
            auto terms = loss_and_gradient(result.params, obj, grad);

            LossRecord rec;
            rec.epoch = epoch;
            rec.reconstruction = terms.reconstruction;
            rec.structure = terms.structure;
            rec.total = terms.reconstruction + config.lambda_re * terms.structure;
            if (!std::isfinite(rec.total)) {
                throw NumericError("training loss became non-finite at epoch " + std::to_string(epoch) +
                                   "; lower the learning rate (currently " + csv::format_real(config.learning_rate) + ")");
            }
            result.trace.push_back(rec);
            adam.step(result.params, grad, phase.update_dae, phase.update_hgcn);
        }
    }

    for (auto b : std::as_const(result.params).blocks()) {
        for (double v : b) {
            if (!std::isfinite(v)) {
                throw NumericError("training produced non-finite parameters; lower the learning rate");
            }
        }
    }
    result.embeddings = embed(X, norm.propagation, result.params);
    return result;
}

namespace {

const char* activation_name(Activation a) {
    return a == Activation::identity ? "identity" : "leaky_relu";
}

Activation parse_activation(const std::string& s, const std::filesystem::path& path) {
    if (s == "identity") {
        return Activation::identity;
    }
    if (s == "leaky_relu") {
        return Activation::leaky_relu;
    }
    throw DataError(path.string() + ": unknown activation '" + s + "'");
}

void write_values(std::ostream& out, const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) {
                out << ' ';
            }
            out << csv::format_real(m(r, c));
        }
        out << '\n';
    }
}

class CheckpointReader {
public:
    explicit CheckpointReader(const std::filesystem::path& path) : path_(path), in_(path) {
        if (!in_) {
            throw DataError("cannot open checkpoint '" + path.string() + "'");
        }
    }

    std::string word() {
        std::string s;
        if (!(in_ >> s)) {
            throw DataError(path_.string() + ": truncated checkpoint");
        }
        return s;
    }

    void expect(const std::string& want) {
        auto got = word();
        if (got != want) {
            throw DataError(path_.string() + ": expected '" + want + "', found '" + got + "'");
        }
    }

    long integer() {
        auto s = word();
        long v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size() || v < 0) {
            throw DataError(path_.string() + ": expected a count, found '" + s + "'");
        }
        return v;
    }

    double real() {
        auto s = word();
        double v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
            throw DataError(path_.string() + ": invalid parameter value '" + s + "'");
        }
        return v;
    }

    Eigen::MatrixXd matrix(Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) {
                m(r, c) = real();
            }
        }
        return m;
    }

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ifstream in_;
};

constexpr const char* checkpoint_magic = "hgdomain-params";
constexpr int checkpoint_version = 1;

}

void write_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write checkpoint '" + path.string() + "'");
    }
    out << checkpoint_magic << ' ' << checkpoint_version << '\n';
    out << "leaky_slope " << csv::format_real(params.leaky_slope) << '\n';
    for (auto [name, stack] : {std::pair{"encoder", &params.encoder}, std::pair{"decoder", &params.decoder}}) {
        out << name << ' ' << stack->size() << '\n';
        for (const auto& layer : *stack) {
            out << "dense " << layer.weight.rows() << ' ' << layer.weight.cols() << ' ' << activation_name(layer.activation) << '\n';
            write_values(out, layer.weight);
            write_values(out, layer.bias);
        }
    }
    out << "hgcn " << params.hgcn.size() << '\n';
    for (const auto& layer : params.hgcn) {
        out << "conv " << layer.weight.rows() << ' ' << layer.weight.cols() << ' ' << activation_name(layer.activation) << '\n';
        write_values(out, layer.weight);
    }
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    CheckpointReader in(path);
    in.expect(checkpoint_magic);
    if (in.integer() != checkpoint_version) {
        throw DataError(path.string() + ": unsupported checkpoint version");
    }

    ModelParams p;
    in.expect("leaky_slope");
    p.leaky_slope = in.real();
    for (auto [name, stack] : {std::pair{"encoder", &p.encoder}, std::pair{"decoder", &p.decoder}}) {
        in.expect(name);
        auto count = in.integer();
        for (long l = 0; l < count; ++l) {
            in.expect("dense");
            auto rows = in.integer();
            auto cols = in.integer();
            DenseLayer layer;
            layer.activation = parse_activation(in.word(), path);
            layer.weight = in.matrix(rows, cols);
            layer.bias = in.matrix(1, cols);
            stack->push_back(std::move(layer));
        }
    }
    in.expect("hgcn");
    auto count = in.integer();
    for (long l = 0; l < count; ++l) {
        in.expect("conv");
        auto rows = in.integer();
        auto cols = in.integer();
        HgcnLayer layer;
        layer.activation = parse_activation(in.word(), path);
        layer.weight = in.matrix(rows, cols);
        p.hgcn.push_back(std::move(layer));
    }
    try {
        p.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return p;
}

void write_loss_trace(const std::vector<LossRecord>& trace, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write file '" + path.string() + "'");
    }
    out << "epoch,F_l,L_re,total\n";
    for (const auto& r : trace) {
        out << r.epoch << ',' << csv::format_real(r.reconstruction) << ',' << csv::format_real(r.structure) << ','
            << csv::format_real(r.total) << '\n';
    }
}

}
