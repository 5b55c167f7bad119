#include "hgdomain/hypergraph.hpp"
#include "hgdomain/errors.hpp"
#include "hgdomain/knn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace hgdomain {

void Hypergraph::validate() const {
    if (n_vertices < 1) {
        throw std::invalid_argument("hypergraph has no vertices");
    }
    if (edge_weights.size() != hyperedges.size()) {
        throw std::invalid_argument("hypergraph has " + std::to_string(hyperedges.size()) + " hyperedges but " +
                                    std::to_string(edge_weights.size()) + " weights");
    }
    std::vector<char> covered(static_cast<std::size_t>(n_vertices), 0);
    std::vector<int> last_seen(static_cast<std::size_t>(n_vertices), -1);
    for (std::size_t e = 0; e < hyperedges.size(); ++e) {
        if (hyperedges[e].empty()) {
            throw std::invalid_argument("hyperedge " + std::to_string(e) + " is empty");
        }
        if (!(edge_weights[e] > 0) || !std::isfinite(edge_weights[e])) {
            throw std::invalid_argument("hyperedge " + std::to_string(e) + " has a non-positive weight");
        }
        for (int v : hyperedges[e]) {
            if (v < 0 || v >= n_vertices) {
                throw std::invalid_argument("hyperedge " + std::to_string(e) + " refers to vertex " + std::to_string(v) +
                                            " outside [0, " + std::to_string(n_vertices) + ")");
            }
            auto& seen = last_seen[static_cast<std::size_t>(v)];
            if (seen == static_cast<int>(e)) {
                throw std::invalid_argument("hyperedge " + std::to_string(e) + " lists vertex " + std::to_string(v) + " twice");
            }
            seen = static_cast<int>(e);
            covered[static_cast<std::size_t>(v)] = 1;
        }
    }
    for (int v = 0; v < n_vertices; ++v) {
        if (!covered[static_cast<std::size_t>(v)]) {
            throw std::invalid_argument("vertex " + std::to_string(v) + " belongs to no hyperedge");
        }
    }
}

Hypergraph build_knn_hypergraph(const SpatialCoords& coords, int k) {
    const auto n = static_cast<int>(coords.size());
    if (k < 1 || k >= n) {
        throw std::invalid_argument("build_knn_hypergraph: k=" + std::to_string(k) + " must lie in [1, N) with N=" +
                                    std::to_string(n));
    }

    Eigen::MatrixXd points = coords.positions;
    auto knn = exact_knn(points, k);

    Hypergraph hg;
    hg.n_vertices = n;
    hg.hyperedges.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::vector<int> members;
        members.reserve(static_cast<std::size_t>(k) + 1);
        members.push_back(i);
        members.insert(members.end(), knn[static_cast<std::size_t>(i)].begin(), knn[static_cast<std::size_t>(i)].end());
        hg.hyperedges.push_back(std::move(members));
    }
    hg.edge_weights.assign(static_cast<std::size_t>(n), 1.0);
    return hg;
}

Hypergraph gate_hyperedges(const Hypergraph& hg, const Eigen::MatrixXd& tile_features, const CovarianceModel& cov, double quantile) {
    if (!(quantile > 0 && quantile <= 1)) {
        throw std::invalid_argument("gate_hyperedges: quantile must lie in (0, 1]");
    }
    if (tile_features.rows() != hg.n_vertices) {
        throw std::invalid_argument("gate_hyperedges: " + std::to_string(tile_features.rows()) + " feature rows for " +
                                    std::to_string(hg.n_vertices) + " vertices");
    }

    std::vector<std::vector<double>> dist(hg.hyperedges.size());
    std::vector<double> all;
    for (std::size_t e = 0; e < hg.hyperedges.size(); ++e) {
        const auto& members = hg.hyperedges[e];
        Eigen::VectorXd center = tile_features.row(members.front()).transpose();
        for (std::size_t j = 1; j < members.size(); ++j) {
            double d = mahalanobis_distance(center, tile_features.row(members[j]).transpose(), cov);
            dist[e].push_back(d);
            all.push_back(d);
        }
    }
    if (all.empty()) {
        return hg;
    }

    // Nearest-rank quantile.
    std::sort(all.begin(), all.end());
    auto rank = static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(all.size())));
    double threshold = all[std::max<std::size_t>(rank, 1) - 1];

    Hypergraph out;
    out.n_vertices = hg.n_vertices;
    out.edge_weights = hg.edge_weights;
    for (std::size_t e = 0; e < hg.hyperedges.size(); ++e) {
        const auto& members = hg.hyperedges[e];
        std::vector<int> kept{members.front()};
        for (std::size_t j = 1; j < members.size(); ++j) {
            if (dist[e][j - 1] <= threshold) {
                kept.push_back(members[j]);
            }
        }
        out.hyperedges.push_back(std::move(kept));
    }
    return out;
}

SparseMatrix incidence_matrix(const Hypergraph& hg) {
    std::vector<Eigen::Triplet<double>> triplets;
    for (std::size_t e = 0; e < hg.hyperedges.size(); ++e) {
        for (int v : hg.hyperedges[e]) {
            triplets.emplace_back(v, static_cast<int>(e), 1.0);
        }
    }
    SparseMatrix H(hg.n_vertices, hg.n_edges());
    H.setFromTriplets(triplets.begin(), triplets.end());
    return H;
}

DegreeNormalization degree_normalization(const SparseMatrix& H, const std::vector<double>& weights) {
    if (static_cast<Eigen::Index>(weights.size()) != H.cols()) {
        throw std::invalid_argument("degree_normalization: " + std::to_string(weights.size()) + " weights for " +
                                    std::to_string(H.cols()) + " hyperedges");
    }
    Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));

    DegreeNormalization out;
    out.edge_degree = Eigen::VectorXd::Zero(H.cols());
    out.vertex_degree = Eigen::VectorXd::Zero(H.rows());
    for (int e = 0; e < H.outerSize(); ++e) {
        for (SparseMatrix::InnerIterator it(H, e); it; ++it) {
            out.edge_degree(e) += it.value();
            out.vertex_degree(it.row()) += w(e) * it.value();
        }
    }
    for (Eigen::Index e = 0; e < H.cols(); ++e) {
        if (!(out.edge_degree(e) > 0)) {
            throw std::invalid_argument("degree_normalization: hyperedge " + std::to_string(e) + " is empty");
        }
    }
    for (Eigen::Index v = 0; v < H.rows(); ++v) {
        if (!(out.vertex_degree(v) > 0)) {
            throw std::invalid_argument("degree_normalization: vertex " + std::to_string(v) + " is isolated");
        }
    }

    Eigen::VectorXd dv_inv_sqrt = out.vertex_degree.cwiseSqrt().cwiseInverse();
    Eigen::VectorXd edge_scale = w.cwiseQuotient(out.edge_degree);

    // Left factor Dv^{-1/2} H, right factor is its transpose scaled by W De^{-1}.
    SparseMatrix left = dv_inv_sqrt.asDiagonal() * H;
    SparseMatrix right = edge_scale.asDiagonal() * SparseMatrix(left.transpose());
    out.propagation = (left * right).pruned();
    // Symmetrize exactly so downstream symmetry checks are not at the mercy of summation order.
    SparseMatrix transposed = out.propagation.transpose();
    out.propagation = (out.propagation + transposed) * 0.5;
    return out;
}

Eigen::MatrixXd adjacency_from_incidence(const SparseMatrix& H) {
    const auto n = H.rows();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    std::vector<Eigen::Index> members;
    for (int e = 0; e < H.outerSize(); ++e) {
        members.clear();
        for (SparseMatrix::InnerIterator it(H, e); it; ++it) {
            if (it.value() != 0) {
                members.push_back(it.row());
            }
        }
        for (auto a : members) {
            for (auto b : members) {
                if (a != b) {
                    A(a, b) = 1;
                }
            }
        }
    }
    return A;
}

void write_hypergraph(const Hypergraph& hg, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write file '" + path.string() + "'");
    }
    for (const auto& members : hg.hyperedges) {
        for (std::size_t j = 0; j < members.size(); ++j) {
            if (j) {
                out << ' ';
            }
            out << members[j];
        }
        out << '\n';
    }
}

Hypergraph load_hypergraph(const std::filesystem::path& path, int n_vertices) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open file '" + path.string() + "'");
    }
    Hypergraph hg;
    hg.n_vertices = n_vertices;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream fields(line);
        std::vector<int> members;
        std::string token;
        while (fields >> token) {
            std::size_t used = 0;
            int v = 0;
            try {
                v = std::stoi(token, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != token.size()) {
                throw DataError(path.string() + ": line " + std::to_string(lineno) + ": invalid vertex index '" + token + "'");
            }
            members.push_back(v);
        }
        if (members.empty()) {
            continue;
        }
        hg.hyperedges.push_back(std::move(members));
    }
    hg.edge_weights.assign(hg.hyperedges.size(), 1.0);
    try {
        hg.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return hg;
}

}
