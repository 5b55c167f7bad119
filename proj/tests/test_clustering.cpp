#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hgdomain/clustering.hpp"
#include "hgdomain/metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>

using namespace hgdomain;

namespace {

Eigen::MatrixXd blobs(const std::vector<Eigen::Vector2d>& centers, int per_blob, double spread, std::uint64_t seed,
                      std::vector<int>& truth) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, spread);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(centers.size()) * per_blob, 2);
    truth.clear();
    Eigen::Index row = 0;
    for (std::size_t c = 0; c < centers.size(); ++c) {
        for (int i = 0; i < per_blob; ++i, ++row) {
            x.row(row) << centers[c].x() + n(rng), centers[c].y() + n(rng);
            truth.push_back(static_cast<int>(c));
        }
    }
    return x;
}

// Neighbor lists by sorting all distances, ties by index, self excluded.
std::vector<std::set<int>> closed_neighborhoods(const Eigen::MatrixXd& x, int k) {
    std::vector<std::set<int>> out;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        std::vector<std::pair<double, int>> d;
        for (Eigen::Index j = 0; j < x.rows(); ++j) {
            if (j != i) {
                d.emplace_back((x.row(i) - x.row(j)).squaredNorm(), static_cast<int>(j));
            }
        }
        std::sort(d.begin(), d.end());
        std::set<int> s{static_cast<int>(i)};
        for (int t = 0; t < k; ++t) {
            s.insert(d[t].second);
        }
        out.push_back(s);
    }
    return out;
}

// Q = (1/2m) sum_ij [A_ij - gamma k_i k_j / 2m] delta(c_i, c_j) over a dense adjacency.
double modularity_oracle(const SnnGraph& g, const std::vector<int>& labels, double gamma) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(g.n_vertices, g.n_vertices);
    for (const auto& e : g.edges) {
        a(e.a, e.b) += e.weight;
        a(e.b, e.a) += e.weight;
    }
    Eigen::VectorXd k = a.rowwise().sum();
    double two_m = k.sum();
    double q = 0;
    for (int i = 0; i < g.n_vertices; ++i) {
        for (int j = 0; j < g.n_vertices; ++j) {
            if (labels[i] == labels[j]) {
                q += a(i, j) - gamma * k(i) * k(j) / two_m;
            }
        }
    }
    return q / two_m;
}

SnnGraph two_cliques() {
    SnnGraph g;
    g.n_vertices = 8;
    for (int base : {0, 4}) {
        for (int i = 0; i < 4; ++i) {
            for (int j = i + 1; j < 4; ++j) {
                g.edges.push_back({base + i, base + j, 1.0});
            }
        }
    }
    return g;
}

SnnGraph random_graph(int n, double p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    SnnGraph g;
    g.n_vertices = n;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (u(rng) < p) {
                g.edges.push_back({i, j, 0.1 + u(rng)});
            }
        }
    }
    return g;
}

bool is_canonical(const std::vector<int>& labels) {
    int next = 0;
    for (int l : labels) {
        if (l > next) {
            return false;
        }
        next = std::max(next, l + 1);
    }
    return true;
}

}

TEST_CASE("cluster method names") {
    CHECK(parse_cluster_method("kmeans") == ClusterMethod::kmeans);
    CHECK(parse_cluster_method("leiden") == ClusterMethod::leiden);
    CHECK(to_string(ClusterMethod::leiden) == "leiden");
    CHECK_THROWS_AS(parse_cluster_method("louvain"), std::invalid_argument);
    CHECK(canonical_labels({5, 5, 2, 7, 2}) == std::vector<int>{0, 0, 1, 2, 1});
}

TEST_CASE("k-means recovers well separated blobs") {
    std::vector<int> truth;
    auto x = blobs({{0, 0}, {50, 0}}, 20, 1.0, 3, truth);
    auto r = kmeans(x, 2, 11);
    CHECK(adjusted_rand_index(r.assignment.labels, truth) == 1.0);
    CHECK(r.assignment.n_clusters() == 2);
    CHECK(is_canonical(r.assignment.labels));

    auto three = blobs({{0, 0}, {40, 0}, {0, 40}}, 15, 1.0, 4, truth);
    CHECK(adjusted_rand_index(kmeans(three, 3, 2).assignment.labels, truth) == 1.0);
}

TEST_CASE("k-means with one cluster per point has zero inertia") {
    std::vector<int> truth;
    auto x = blobs({{0, 0}}, 12, 3.0, 8, truth);
    auto r = kmeans(x, 12, 1);
    CHECK(r.inertia == 0);
    CHECK(std::set<int>(r.assignment.labels.begin(), r.assignment.labels.end()).size() == 12);
}

TEST_CASE("k-means is deterministic and its inertia never increases") {
    std::vector<int> truth;
    auto x = blobs({{0, 0}, {3, 1}, {1, 4}, {5, 5}}, 25, 1.5, 21, truth);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto r = kmeans(x, 4, seed);
        CHECK(kmeans(x, 4, seed).assignment.labels == r.assignment.labels);
        for (std::size_t i = 1; i < r.inertia_trace.size(); ++i) {
            CHECK(r.inertia_trace[i] <= r.inertia_trace[i - 1] + 1e-9);
        }
        double direct = 0;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            direct += (x.row(i) - r.centers.row(r.assignment.labels[i])).squaredNorm();
        }
        CHECK(r.inertia == doctest::Approx(direct).epsilon(1e-12));
        CHECK(r.assignment.n_clusters() == 4);
    }
}

TEST_CASE("k-means rejects invalid cluster counts") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(3, 2);
    CHECK_THROWS_AS(kmeans(x, 0, 0), std::invalid_argument);
    CHECK_THROWS_AS(kmeans(x, 4, 0), std::invalid_argument);
    auto r = kmeans(x, 2, 0);
    CHECK(r.assignment.n_clusters() == 2);
}

TEST_CASE("SNN graph of two points") {
    Eigen::MatrixXd x(2, 1);
    x << 0, 1;
    auto g = build_snn_graph(x, 1);
    REQUIRE(g.edges.size() == 1);
    CHECK(g.edges[0].a == 0);
    CHECK(g.edges[0].b == 1);
    CHECK(g.edges[0].weight == 1.0);
    CHECK_THROWS_AS(build_snn_graph(x, 2), std::invalid_argument);
}

TEST_CASE("SNN graph with k = N - 1 is complete with unit weights") {
    std::vector<int> truth;
    auto x = blobs({{0, 0}}, 9, 1.0, 5, truth);
    auto g = build_snn_graph(x, 8);
    CHECK(g.edges.size() == 36);
    for (const auto& e : g.edges) {
        CHECK(e.weight == 1.0);
    }
}

TEST_CASE("SNN graph has no edges between far blobs") {
    std::vector<int> truth;
    auto x = blobs({{0, 0}, {100, 100}}, 20, 1.0, 6, truth);
    auto g = build_snn_graph(x, 5);
    CHECK(!g.edges.empty());
    for (const auto& e : g.edges) {
        CHECK(truth[e.a] == truth[e.b]);
    }
}

TEST_CASE("SNN weights equal the brute-force shared neighbor fraction") {
    std::vector<int> truth;
    auto x = blobs({{0, 0}, {4, 0}, {2, 3}}, 12, 1.5, 9, truth);
    for (int k : {1, 3, 7}) {
        auto hoods = closed_neighborhoods(x, k);
        std::map<std::pair<int, int>, double> expected;
        for (int i = 0; i < x.rows(); ++i) {
            for (int j = i + 1; j < x.rows(); ++j) {
                std::vector<int> both;
                std::set_intersection(hoods[i].begin(), hoods[i].end(), hoods[j].begin(), hoods[j].end(), std::back_inserter(both));
                if (!both.empty()) {
                    expected[{i, j}] = static_cast<double>(both.size()) / (k + 1);
                }
            }
        }
        auto g = build_snn_graph(x, k);
        REQUIRE(g.edges.size() == expected.size());
        for (std::size_t e = 0; e < g.edges.size(); ++e) {
            const auto& edge = g.edges[e];
            CHECK(expected.at({edge.a, edge.b}) == edge.weight);
            if (e > 0) {
                CHECK(std::make_pair(g.edges[e - 1].a, g.edges[e - 1].b) < std::make_pair(edge.a, edge.b));
            }
        }
    }
}

TEST_CASE("modularity matches the dense definition") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto g = random_graph(12, 0.3, seed);
        std::mt19937_64 rng(seed);
        std::vector<int> labels(12);
        for (auto& l : labels) {
            l = static_cast<int>(rng() % 3);
        }
        for (double gamma : {0.5, 1.0, 2.0}) {
            CHECK(modularity(g, labels, gamma) == doctest::Approx(modularity_oracle(g, labels, gamma)).epsilon(1e-12));
        }
    }
}

TEST_CASE("Leiden splits two disconnected cliques, matching the best 2-partition") {
    auto g = two_cliques();
    std::vector<int> cliques{0, 0, 0, 0, 1, 1, 1, 1};

    double best = -1;
    std::vector<int> argbest;
    for (int mask = 0; mask < (1 << 7); ++mask) {
        std::vector<int> labels(8, 0);
        for (int v = 1; v < 8; ++v) {
            labels[v] = (mask >> (v - 1)) & 1;
        }
        double q = modularity_oracle(g, labels, 1.0);
        if (q > best + 1e-12) {
            best = q;
            argbest = labels;
        }
    }
    CHECK(adjusted_rand_index(argbest, cliques) == 1.0);

    auto r = leiden_communities(g, 1.0, 3);
    CHECK(r.n_clusters() == 2);
    CHECK(adjusted_rand_index(r.labels, cliques) == 1.0);
    CHECK(modularity_oracle(g, r.labels, 1.0) == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("Leiden on an edgeless graph keeps singletons") {
    SnnGraph g;
    g.n_vertices = 5;
    auto r = leiden_communities(g, 1.0, 0);
    CHECK(r.labels == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("Leiden never does worse than singletons and is deterministic") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        auto g = random_graph(20 + static_cast<int>(seed), 0.15, seed);
        std::vector<int> singletons(g.n_vertices);
        std::iota(singletons.begin(), singletons.end(), 0);
        for (double gamma : {0.5, 1.0}) {
            auto r = leiden_communities(g, gamma, seed);
            CHECK(modularity(g, r.labels, gamma) >= modularity(g, singletons, gamma) - 1e-12);
            CHECK(leiden_communities(g, gamma, seed).labels == r.labels);
            CHECK(is_canonical(r.labels));
            CHECK(r.method == ClusterMethod::leiden);
            CHECK(r.parameter == gamma);
        }
    }
    CHECK_THROWS_AS(leiden_communities(two_cliques(), 0.0, 0), std::invalid_argument);
}

TEST_CASE("Leiden recovers blobs through the SNN graph") {
    std::vector<int> truth;
    auto x = blobs({{0, 0}, {30, 0}, {15, 25}}, 30, 1.5, 12, truth);
    auto r = leiden_communities(build_snn_graph(x, 10), 1.0, 4);
    CHECK(adjusted_rand_index(r.labels, truth) == 1.0);
}
