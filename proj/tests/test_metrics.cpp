#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hgdomain/metrics.hpp"
#include "test_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

using namespace hgdomain;

namespace {

// ARI from the four pair counts, looping over every unordered pair.
double ari_by_pairs(const std::vector<int>& a, const std::vector<int>& b) {
    double n11 = 0, n00 = 0, n10 = 0, n01 = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            bool sa = a[i] == a[j];
            bool sb = b[i] == b[j];
            if (sa && sb) {
                ++n11;
            } else if (!sa && !sb) {
                ++n00;
            } else if (sa) {
                ++n10;
            } else {
                ++n01;
            }
        }
    }
    double denom = (n00 + n01) * (n01 + n11) + (n00 + n10) * (n10 + n11);
    if (denom == 0) {
        return 1.0;
    }
    return 2.0 * (n00 * n11 - n01 * n10) / denom;
}

Eigen::MatrixXd ring(int n) {
    Eigen::MatrixXd x(n, 2);
    for (int i = 0; i < n; ++i) {
        double t = 2 * std::numbers::pi * i / n;
        x.row(i) << std::cos(t), std::sin(t);
    }
    return x;
}

Eigen::MatrixXd random_points(int n, int d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd x(n, d);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) {
            x(i, j) = g(rng);
        }
    }
    return x;
}

}

TEST_CASE("ARI hand cases") {
    CHECK(adjusted_rand_index({0, 0, 1, 1}, {0, 0, 1, 1}) == 1.0);
    CHECK(adjusted_rand_index({0, 0, 1, 1, 2}, {7, 7, 3, 3, 9}) == 1.0);
    // Pairs: n11 = 1, n00 = 2, n01 = 2, n10 = 1, so n00 n11 - n01 n10 = 0.
    CHECK(ari_by_pairs({0, 0, 1, 1}, {0, 0, 0, 1}) == 0.0);
    CHECK(adjusted_rand_index({0, 0, 1, 1}, {0, 0, 0, 1}) == 0.0);
    // Crossed partitions: no pair is joined in both, which is below chance.
    CHECK(adjusted_rand_index({0, 0, 1, 1}, {0, 1, 0, 1}) == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(adjusted_rand_index({0, 1, 2}, {0, 1, 2}) == 1.0);
    CHECK(adjusted_rand_index({0, 0, 0}, {0, 0, 0}) == 1.0);
    CHECK_THROWS_AS(adjusted_rand_index({0, 1}, {0}), std::invalid_argument);
    CHECK_THROWS_AS(adjusted_rand_index({0}, {0}), std::invalid_argument);
}

TEST_CASE("ARI agrees with brute-force pair counting") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 1000; ++trial) {
        int n = 2 + static_cast<int>(rng() % 11);
        int ka = 1 + static_cast<int>(rng() % 5);
        int kb = 1 + static_cast<int>(rng() % 5);
        std::vector<int> a(n), b(n);
        for (int i = 0; i < n; ++i) {
            a[i] = static_cast<int>(rng() % ka);
            b[i] = static_cast<int>(rng() % kb);
        }
        CHECK(std::abs(adjusted_rand_index(a, b) - ari_by_pairs(a, b)) <= 1e-12);
    }
}

TEST_CASE("ARI is invariant under relabeling") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        int n = 20;
        std::vector<int> a(n), b(n);
        for (int i = 0; i < n; ++i) {
            a[i] = static_cast<int>(rng() % 4);
            b[i] = static_cast<int>(rng() % 3);
        }
        std::vector<int> perm{10, 20, 30, 40};
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<int> relabeled(n);
        for (int i = 0; i < n; ++i) {
            relabeled[i] = perm[a[i]];
        }
        CHECK(adjusted_rand_index(relabeled, b) == doctest::Approx(adjusted_rand_index(a, b)).epsilon(1e-13));
        CHECK(adjusted_rand_index(b, a) == doctest::Approx(adjusted_rand_index(a, b)).epsilon(1e-13));
    }
}

TEST_CASE("iLISI on a single label is exactly 1") {
    auto x = random_points(25, 3, 1);
    auto r = ilisi(x, std::vector<int>(25, 4), 10);
    CHECK(r.mean == 1.0);
    for (double v : r.per_spot) {
        CHECK(v == 1.0);
    }
}

TEST_CASE("iLISI on an alternating ring is 2 everywhere") {
    const int n = 40;
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) {
        labels[i] = i % 2;
    }
    for (int k : {4, 8}) {
        auto r = ilisi(ring(n), labels, k);
        CHECK(r.k_lisi == k);
        for (double v : r.per_spot) {
            CHECK(std::abs(v - 2.0) <= 1e-9);
        }
        CHECK(std::abs(r.mean - 2.0) <= 1e-9);
    }
    // Two nearest neighbors are both of the other label.
    CHECK(ilisi(ring(n), labels, 2).mean == 1.0);
}

TEST_CASE("iLISI lies between 1 and the number of labels") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        int n = 30;
        int k = 2 + static_cast<int>(rng() % 20);
        int n_labels = 1 + static_cast<int>(rng() % 5);
        std::vector<int> labels(n);
        for (auto& l : labels) {
            l = static_cast<int>(rng() % n_labels);
        }
        int distinct = static_cast<int>(std::set<int>(labels.begin(), labels.end()).size());
        auto r = ilisi(random_points(n, 2, rng()), labels, k);
        for (double v : r.per_spot) {
            CHECK(v >= 1.0 - 1e-12);
            CHECK(v <= distinct + 1e-12);
        }
        CHECK(r.mean >= 1.0 - 1e-12);
        CHECK(r.mean <= distinct + 1e-12);
    }
}

TEST_CASE("iLISI is invariant under isometries") {
    auto x = random_points(40, 2, 5);
    std::vector<int> labels(40);
    for (int i = 0; i < 40; ++i) {
        labels[i] = (i * 7) % 3;
    }
    auto base = ilisi(x, labels, 12);
    double t = 0.7;
    Eigen::Matrix2d rot;
    rot << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
    Eigen::MatrixXd moved = (x * rot.transpose()).rowwise() + Eigen::RowVector2d(3.0, -8.0);
    auto r = ilisi(moved, labels, 12);
    CHECK(r.per_spot == base.per_spot);
}

TEST_CASE("iLISI argument checks and default neighborhood") {
    auto x = random_points(10, 2, 2);
    std::vector<int> labels(10, 0);
    CHECK_THROWS_AS(ilisi(x, labels, 1), std::invalid_argument);
    CHECK_THROWS_AS(ilisi(x, labels, 10), std::invalid_argument);
    CHECK_THROWS_AS(ilisi(x, std::vector<int>(9, 0), 3), std::invalid_argument);
    CHECK(default_k_lisi(150) == 30);
    CHECK(default_k_lisi(12) == 11);
}

TEST_CASE("metrics file is a flat JSON object with sorted keys") {
    testutil::TempDir dir("metrics");
    MetricReport r;
    r.ari = 0.75;
    r.ilisi_mean = 1.5;
    r.k_lisi = 30;
    r.n_spots = 150;
    r.n_clusters = 3;
    write_metrics(r, dir / "m.json");
    auto text = testutil::read_file(dir / "m.json");
    auto j = nlohmann::json::parse(text);
    CHECK(j.at("ari").get<double>() == 0.75);
    CHECK(j.at("ilisi_mean").get<double>() == 1.5);
    CHECK(j.at("k_lisi").get<int>() == 30);
    CHECK(j.at("n_spots").get<int>() == 150);
    CHECK(j.at("n_clusters").get<int>() == 3);
    CHECK(text.find("\"ari\"") < text.find("\"ilisi_mean\""));
    CHECK(text.find("\"n_clusters\"") < text.find("\"n_spots\""));

    r.ari.reset();
    write_metrics(r, dir / "n.json");
    CHECK(!nlohmann::json::parse(testutil::read_file(dir / "n.json")).contains("ari"));
}
