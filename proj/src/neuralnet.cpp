#include "hgdomain/neuralnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

namespace hgdomain {

namespace {

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation act, double slope) {
    if (act == Activation::identity) {
        return z;
    }
    return z.unaryExpr([slope](double v) { return v > 0 ? v : slope * v; });
}

// Multiplies an upstream gradient by the activation derivative at pre-activation z.
void backprop_activation(Eigen::MatrixXd& grad, const Eigen::MatrixXd& z, Activation act, double slope) {
    if (act == Activation::identity) {
        return;
    }
    grad.array() *= z.unaryExpr([slope](double v) { return v > 0 ? 1.0 : slope; }).array();
}

struct DenseTrace {
    // inputs[l] feeds layer l; pre[l] is its pre-activation.
    std::vector<Eigen::MatrixXd> inputs;
    std::vector<Eigen::MatrixXd> pre;
    Eigen::MatrixXd output;
};

DenseTrace dense_trace(const Eigen::MatrixXd& input, const std::vector<DenseLayer>& layers, double slope) {
    DenseTrace t;
    Eigen::MatrixXd current = input;
    for (const auto& layer : layers) {
        Eigen::MatrixXd z = (current * layer.weight).rowwise() + layer.bias;
        t.inputs.push_back(std::move(current));
        current = activate(z, layer.activation, slope);
        t.pre.push_back(std::move(z));
    }
    t.output = std::move(current);
    return t;
}

// Accumulates parameter gradients into `grads` and returns the gradient with respect to the stack input.
Eigen::MatrixXd dense_backward(const DenseTrace& t, const std::vector<DenseLayer>& layers, double slope,
                               Eigen::MatrixXd upstream, std::vector<DenseLayer>& grads) {
    for (std::size_t l = layers.size(); l-- > 0;) {
        backprop_activation(upstream, t.pre[l], layers[l].activation, slope);
        grads[l].weight = t.inputs[l].transpose() * upstream;
        grads[l].bias = upstream.colwise().sum();
        upstream = upstream * layers[l].weight.transpose();
    }
    return upstream;
}

struct HgcnTrace {
    // propagated[l] = P * input of layer l.
    std::vector<Eigen::MatrixXd> propagated;
    std::vector<Eigen::MatrixXd> pre;
    Eigen::MatrixXd output;
};

HgcnTrace hgcn_trace(const Eigen::MatrixXd& X, const SparseMatrix& P, const std::vector<HgcnLayer>& layers, double slope) {
    HgcnTrace t;
    Eigen::MatrixXd current = X;
    for (const auto& layer : layers) {
        Eigen::MatrixXd p = P * current;
        Eigen::MatrixXd z = p * layer.weight;
        t.propagated.push_back(std::move(p));
        current = activate(z, layer.activation, slope);
        t.pre.push_back(std::move(z));
    }
    t.output = std::move(current);
    return t;
}

void hgcn_backward(const HgcnTrace& t, const SparseMatrix& P, const std::vector<HgcnLayer>& layers, double slope,
                   Eigen::MatrixXd upstream, std::vector<HgcnLayer>& grads) {
    SparseMatrix Pt = P.transpose();
    for (std::size_t l = layers.size(); l-- > 0;) {
        backprop_activation(upstream, t.pre[l], layers[l].activation, slope);
        grads[l].weight = t.propagated[l].transpose() * upstream;
        if (l > 0) {
            upstream = Pt * (upstream * layers[l].weight.transpose());
        }
    }
}

double sigmoid(double x) {
    return 1.0 / (1.0 + std::exp(-x));
}

void check_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string(what) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
}

}

void ModelParams::validate() const {
    if (encoder.empty() || decoder.empty() || hgcn.empty()) {
        throw std::invalid_argument("model needs at least one encoder, decoder and hypergraph layer");
    }
    auto check_chain = [](const auto& layers, const char* name) {
        for (std::size_t l = 0; l < layers.size(); ++l) {
            if (l > 0 && layers[l].weight.rows() != layers[l - 1].weight.cols()) {
                throw std::invalid_argument(std::string(name) + " layer " + std::to_string(l) + " expects width " +
                                            std::to_string(layers[l].weight.rows()) + ", previous layer produces " +
                                            std::to_string(layers[l - 1].weight.cols()));
            }
            if (!layers[l].weight.allFinite()) {
                throw std::invalid_argument(std::string(name) + " layer " + std::to_string(l) + " has non-finite weights");
            }
        }
    };
    check_chain(encoder, "encoder");
    check_chain(decoder, "decoder");
    check_chain(hgcn, "hypergraph");
    for (const auto* stack : {&encoder, &decoder}) {
        for (const auto& layer : *stack) {
            if (layer.bias.size() != layer.weight.cols() || !layer.bias.allFinite()) {
                throw std::invalid_argument("dense layer bias is malformed");
            }
        }
    }
    if (hgcn.front().weight.rows() != input_dim()) {
        throw std::invalid_argument("hypergraph encoder input width differs from the gene count");
    }
    if (decoder.front().weight.rows() != latent_dim() + spatial_dim()) {
        throw std::invalid_argument("decoder input width " + std::to_string(decoder.front().weight.rows()) + " is not R + R' = " +
                                    std::to_string(latent_dim() + spatial_dim()));
    }
    if (decoder.back().weight.cols() != input_dim()) {
        throw std::invalid_argument("decoder output width differs from the gene count");
    }
}

std::vector<std::span<double>> ModelParams::blocks() {
    std::vector<std::span<double>> out;
    for (auto* stack : {&encoder, &decoder}) {
        for (auto& layer : *stack) {
            out.emplace_back(layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
            out.emplace_back(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
        }
    }
    for (auto& layer : hgcn) {
        out.emplace_back(layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
    }
    return out;
}

std::vector<std::span<const double>> ModelParams::blocks() const {
    auto mutable_blocks = const_cast<ModelParams*>(this)->blocks();
    return {mutable_blocks.begin(), mutable_blocks.end()};
}

std::size_t ModelParams::n_parameters() const {
    std::size_t total = 0;
    for (auto b : blocks()) {
        total += b.size();
    }
    return total;
}

ModelParams ModelParams::zeros_like() const {
    ModelParams out = *this;
    for (auto b : out.blocks()) {
        std::fill(b.begin(), b.end(), 0.0);
    }
    return out;
}

ModelParams init_params(const Architecture& arch, std::uint64_t seed) {
    if (arch.n_genes < 1 || arch.latent_dim < 1 || arch.spatial_dim < 1) {
        throw std::invalid_argument("init_params: layer widths must be positive");
    }
    std::mt19937_64 rng(seed);

    auto glorot = [&rng](Eigen::Index in, Eigen::Index out) {
        double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        Eigen::MatrixXd w(in, out);
        // Fill in row-major order so the draw sequence does not depend on storage order.
        for (Eigen::Index i = 0; i < in; ++i) {
            for (Eigen::Index j = 0; j < out; ++j) {
                w(i, j) = dist(rng);
            }
        }
        return w;
    };

    auto make_dense = [&](int in, const std::vector<int>& hidden, int out) {
        std::vector<DenseLayer> layers;
        std::vector<int> widths{in};
        widths.insert(widths.end(), hidden.begin(), hidden.end());
        widths.push_back(out);
        for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
            if (widths[l + 1] < 1) {
                throw std::invalid_argument("init_params: layer widths must be positive");
            }
            DenseLayer layer;
            layer.weight = glorot(widths[l], widths[l + 1]);
            layer.bias = Eigen::RowVectorXd::Zero(widths[l + 1]);
            layer.activation = l + 2 < widths.size() ? Activation::leaky_relu : Activation::identity;
            layers.push_back(std::move(layer));
        }
        return layers;
    };

    ModelParams p;
    p.leaky_slope = arch.leaky_slope;
    p.encoder = make_dense(arch.n_genes, arch.encoder_hidden, arch.latent_dim);
    p.decoder = make_dense(arch.latent_dim + arch.spatial_dim, arch.decoder_hidden, arch.n_genes);

    std::vector<int> widths{arch.n_genes};
    widths.insert(widths.end(), arch.hgcn_hidden.begin(), arch.hgcn_hidden.end());
    widths.push_back(arch.spatial_dim);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        HgcnLayer layer;
        layer.weight = glorot(widths[l], widths[l + 1]);
        layer.activation = l + 2 < widths.size() ? Activation::leaky_relu : Activation::identity;
        p.hgcn.push_back(std::move(layer));
    }
    p.validate();
    return p;
}

Eigen::MatrixXd gaussian_noise(Eigen::Index rows, Eigen::Index cols, double sd, std::uint64_t seed) {
    if (!(sd >= 0)) {
        throw std::invalid_argument("gaussian_noise: sd must be non-negative");
    }
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows, cols);
    if (sd == 0) {
        return out;
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, sd);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            out(i, j) = dist(rng);
        }
    }
    return out;
}

Eigen::MatrixXd add_noise(const Eigen::MatrixXd& L, double noise_sd, std::uint64_t seed) {
    if (noise_sd == 0) {
        return L;
    }
    return L + gaussian_noise(L.rows(), L.cols(), noise_sd, seed);
}

Eigen::MatrixXd dense_forward(const Eigen::MatrixXd& input, const std::vector<DenseLayer>& layers, double leaky_slope) {
    Eigen::MatrixXd current = input;
    for (const auto& layer : layers) {
        if (current.cols() != layer.weight.rows()) {
            throw std::invalid_argument("dense_forward: input width " + std::to_string(current.cols()) + ", layer expects " +
                                        std::to_string(layer.weight.rows()));
        }
        Eigen::MatrixXd z = (current * layer.weight).rowwise() + layer.bias;
        current = activate(z, layer.activation, leaky_slope);
    }
    return current;
}

DaeOutput dae_forward(const Eigen::MatrixXd& X, const ModelParams& params, const Eigen::MatrixXd& spatial, double noise_sd, std::uint64_t seed) {
    if (spatial.rows() != X.rows() || spatial.cols() != params.spatial_dim()) {
        throw std::invalid_argument("dae_forward: spatial embedding is " + std::to_string(spatial.rows()) + "x" +
                                    std::to_string(spatial.cols()) + ", expected " + std::to_string(X.rows()) + "x" +
                                    std::to_string(params.spatial_dim()));
    }
    DaeOutput out;
    out.latent = dense_forward(X, params.encoder, params.leaky_slope);
    Eigen::MatrixXd decoder_input(X.rows(), out.latent.cols() + spatial.cols());
    decoder_input << add_noise(out.latent, noise_sd, seed), spatial;
    out.reconstruction = dense_forward(decoder_input, params.decoder, params.leaky_slope);
    return out;
}

double mse_loss(const Eigen::MatrixXd& X, const Eigen::MatrixXd& reconstruction) {
    check_same_shape(X, reconstruction, "mse_loss");
    if (X.size() == 0) {
        return 0;
    }
    return (X - reconstruction).squaredNorm() / static_cast<double>(X.size());
}

Eigen::MatrixXd node_to_edge_aggregate(const Eigen::MatrixXd& node_features, const Hypergraph& hg) {
    if (node_features.rows() != hg.n_vertices) {
        throw std::invalid_argument("node_to_edge_aggregate: feature rows do not match the vertex count");
    }
    Eigen::MatrixXd out(hg.n_edges(), node_features.cols());
    for (int e = 0; e < hg.n_edges(); ++e) {
        const auto& members = hg.hyperedges[static_cast<std::size_t>(e)];
        if (members.empty()) {
            throw std::invalid_argument("node_to_edge_aggregate: hyperedge " + std::to_string(e) + " is empty");
        }
        Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(node_features.cols());
        for (int v : members) {
            sum += node_features.row(v);
        }
        out.row(e) = sum / static_cast<double>(members.size());
    }
    return out;
}

Eigen::MatrixXd edge_to_node_aggregate(const Eigen::MatrixXd& edge_features, const Hypergraph& hg) {
    if (edge_features.rows() != hg.n_edges()) {
        throw std::invalid_argument("edge_to_node_aggregate: feature rows do not match the hyperedge count");
    }
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(hg.n_vertices, edge_features.cols());
    std::vector<int> count(static_cast<std::size_t>(hg.n_vertices), 0);
    for (int e = 0; e < hg.n_edges(); ++e) {
        for (int v : hg.hyperedges[static_cast<std::size_t>(e)]) {
            sum.row(v) += edge_features.row(e);
            ++count[static_cast<std::size_t>(v)];
        }
    }
    for (int v = 0; v < hg.n_vertices; ++v) {
        if (count[static_cast<std::size_t>(v)] == 0) {
            throw std::invalid_argument("edge_to_node_aggregate: vertex " + std::to_string(v) + " is isolated");
        }
        sum.row(v) /= static_cast<double>(count[static_cast<std::size_t>(v)]);
    }
    return sum;
}

Eigen::MatrixXd hgcn_forward(const Eigen::MatrixXd& X, const SparseMatrix& propagation, const ModelParams& params) {
    if (propagation.rows() != X.rows() || propagation.cols() != X.rows()) {
        throw std::invalid_argument("hgcn_forward: propagation operator does not match the spot count");
    }
    if (params.hgcn.empty() || params.hgcn.front().weight.rows() != X.cols()) {
        throw std::invalid_argument("hgcn_forward: first layer does not match the input width");
    }
    return hgcn_trace(X, propagation, params.hgcn, params.leaky_slope).output;
}

Eigen::MatrixXd similarity_decode(const Eigen::MatrixXd& Z) {
    Eigen::MatrixXd gram = Z * Z.transpose();
    const auto n = gram.rows();
    Eigen::MatrixXd S(n, n);
    // Evaluate the upper triangle and mirror it so S is exactly symmetric.
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i <= j; ++i) {
            double s = sigmoid(gram(i, j));
            S(i, j) = s;
            S(j, i) = s;
        }
    }
    return S;
}

double weighted_bce_loss(const Eigen::MatrixXd& S, const Eigen::MatrixXd& A, double pos_weight) {
    check_same_shape(S, A, "weighted_bce_loss");
    if (S.size() == 0) {
        return 0;
    }
    double total = 0;
    for (Eigen::Index j = 0; j < S.cols(); ++j) {
        for (Eigen::Index i = 0; i < S.rows(); ++i) {
            double s = std::clamp(S(i, j), bce_clamp, 1 - bce_clamp);
            double a = A(i, j);
            double w = a == 1 ? pos_weight : 1.0;
            total += w * (a * std::log(s) + (1 - a) * std::log(1 - s));
        }
    }
    return -total / static_cast<double>(S.size());
}

double default_pos_weight(const Eigen::MatrixXd& A) {
    double ones = (A.array() == 1).count();
    double zeros = static_cast<double>(A.size()) - ones;
    return ones > 0 ? zeros / ones : 1.0;
}

namespace {

struct ForwardState {
    DenseTrace encoder;
    DenseTrace decoder;
    HgcnTrace hgcn;
    Eigen::MatrixXd gram;
    LossTerms terms;
};

Eigen::MatrixXd symmetric_gram(const Eigen::MatrixXd& Z) {
    Eigen::MatrixXd gram = Z * Z.transpose();
    gram.triangularView<Eigen::StrictlyLower>() = gram.transpose();
    return gram;
}

// Logit bound equivalent to clamping S to [bce_clamp, 1 - bce_clamp].
const double logit_bound = std::log((1 - bce_clamp) / bce_clamp);

double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

// weighted_bce_loss(sigmoid(G), A, w) evaluated on the logits, avoiding log(1 - s) cancellation near s = 1.
double bce_from_logits(const Eigen::MatrixXd& G, const Eigen::MatrixXd& A, double pos_weight) {
    double total = 0;
    for (Eigen::Index j = 0; j < G.cols(); ++j) {
        for (Eigen::Index i = 0; i < G.rows(); ++i) {
            double x = std::clamp(G(i, j), -logit_bound, logit_bound);
            total += A(i, j) == 1 ? pos_weight * softplus(-x) : softplus(x);
        }
    }
    return total / static_cast<double>(G.size());
}

ForwardState forward(const ModelParams& params, const Objective& obj) {
    ForwardState st;
    const double slope = params.leaky_slope;
    st.hgcn = hgcn_trace(obj.X, obj.propagation, params.hgcn, slope);
    st.encoder = dense_trace(obj.X, params.encoder, slope);

    Eigen::MatrixXd decoder_input(obj.X.rows(), params.latent_dim() + params.spatial_dim());
    decoder_input << st.encoder.output + obj.noise, st.hgcn.output;
    st.decoder = dense_trace(decoder_input, params.decoder, slope);

    st.terms.reconstruction = mse_loss(obj.X, st.decoder.output);
    st.gram = symmetric_gram(st.hgcn.output);
    st.terms.structure = bce_from_logits(st.gram, obj.adjacency, obj.pos_weight);
    st.terms.total = obj.reconstruction_weight * st.terms.reconstruction + obj.structure_weight * st.terms.structure;
    return st;
}

void check_objective(const ModelParams& params, const Objective& obj) {
    const auto n = obj.X.rows();
    if (obj.X.cols() != params.input_dim()) {
        throw std::invalid_argument("objective: expression has " + std::to_string(obj.X.cols()) + " genes, model expects " +
                                    std::to_string(params.input_dim()));
    }
    if (obj.propagation.rows() != n || obj.propagation.cols() != n || obj.adjacency.rows() != n || obj.adjacency.cols() != n) {
        throw std::invalid_argument("objective: propagation and adjacency must be N x N");
    }
    if (obj.noise.rows() != n || obj.noise.cols() != params.latent_dim()) {
        throw std::invalid_argument("objective: noise must be N x R");
    }
}

}

LossTerms evaluate_loss(const ModelParams& params, const Objective& objective) {
    check_objective(params, objective);
    return forward(params, objective).terms;
}

LossTerms loss_and_gradient(const ModelParams& params, const Objective& obj, ModelParams& grad) {
    check_objective(params, obj);
    const double slope = params.leaky_slope;
    auto st = forward(params, obj);
    grad = params.zeros_like();

    const auto n = obj.X.rows();
    const auto latent = params.latent_dim();
    const auto spatial = params.spatial_dim();

    Eigen::MatrixXd d_spatial = Eigen::MatrixXd::Zero(n, spatial);

    if (obj.reconstruction_weight != 0) {
        Eigen::MatrixXd d_out = (st.decoder.output - obj.X) * (2.0 * obj.reconstruction_weight / static_cast<double>(obj.X.size()));
        Eigen::MatrixXd d_in = dense_backward(st.decoder, params.decoder, slope, std::move(d_out), grad.decoder);
        // The noise is additive, so the gradient reaches the clean latent unchanged.
        dense_backward(st.encoder, params.encoder, slope, d_in.leftCols(latent), grad.encoder);
        d_spatial += d_in.rightCols(spatial);
    }

    if (obj.structure_weight != 0) {
        // d/dG of the clamped, weighted BCE through S = sigmoid(G): w (S - A) / N^2 where unclamped.
        const double scale = obj.structure_weight / static_cast<double>(n * n);
        Eigen::MatrixXd d_gram(n, n);
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = 0; i < n; ++i) {
                double x = st.gram(i, j);
                double a = obj.adjacency(i, j);
                double w = a == 1 ? obj.pos_weight : 1.0;
                d_gram(i, j) = std::abs(x) > logit_bound ? 0.0 : scale * w * (sigmoid(x) - a);
            }
        }
        d_spatial += (d_gram + d_gram.transpose()) * st.hgcn.output;
    }

    hgcn_backward(st.hgcn, obj.propagation, params.hgcn, slope, std::move(d_spatial), grad.hgcn);
    return st.terms;
}

double gradient_check(const ModelParams& params, const Objective& objective, double epsilon, std::uint64_t seed,
                      const GradientFunction& analytic, int n_coords) {
    if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
        throw std::invalid_argument("gradient_check: epsilon must lie in [1e-7, 1e-3]");
    }

    ModelParams grad;
    analytic(params, objective, grad);

    ModelParams probe = params;
    auto probe_blocks = probe.blocks();
    auto grad_blocks = std::as_const(grad).blocks();

    std::vector<std::pair<std::size_t, std::size_t>> coords;
    for (std::size_t b = 0; b < probe_blocks.size(); ++b) {
        for (std::size_t i = 0; i < probe_blocks[b].size(); ++i) {
            coords.emplace_back(b, i);
        }
    }
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(std::min(coords.size(), static_cast<std::size_t>(std::max(n_coords, 0))));

    double worst = 0;
    for (auto [b, i] : coords) {
        double& x = probe_blocks[b][i];
        const double original = x;
        x = original + epsilon;
        double plus = evaluate_loss(probe, objective).total;
        x = original - epsilon;
        double minus = evaluate_loss(probe, objective).total;
        x = original;

        double numeric = (plus - minus) / (2 * epsilon);
        double exact = grad_blocks[b][i];
        double denom = std::max({std::abs(exact), std::abs(numeric), gradient_check_floor});
        worst = std::max(worst, std::abs(exact - numeric) / denom);
    }
    return worst;
}

double gradient_check(const ModelParams& params, const Objective& objective, double epsilon, std::uint64_t seed, int n_coords) {
    return gradient_check(
        params, objective, epsilon, seed,
        [](const ModelParams& p, const Objective& o, ModelParams& g) { loss_and_gradient(p, o, g); }, n_coords);
}

}
