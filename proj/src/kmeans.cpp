#include "hgdomain/clustering.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <stdexcept>
#include <unordered_map>

namespace hgdomain {

std::string to_string(ClusterMethod method) {
    return method == ClusterMethod::kmeans ? "kmeans" : "leiden";
}

ClusterMethod parse_cluster_method(const std::string& name) {
    if (name == "kmeans") {
        return ClusterMethod::kmeans;
    }
    if (name == "leiden") {
        return ClusterMethod::leiden;
    }
    throw std::invalid_argument("unknown clustering method '" + name + "' (expected kmeans or leiden)");
}

int ClusterAssignment::n_clusters() const {
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

std::vector<int> canonical_labels(const std::vector<int>& labels) {
    std::unordered_map<int, int> mapping;
    std::vector<int> out;
    out.reserve(labels.size());
    for (int l : labels) {
        auto [it, inserted] = mapping.emplace(l, static_cast<int>(mapping.size()));
        out.push_back(it->second);
    }
    return out;
}

namespace {

// Nearest center per row; ties go to the lower index. Returns the inertia.
double assign(const Eigen::MatrixXd& X, const Eigen::MatrixXd& centers, std::vector<int>& labels, Eigen::VectorXd& dist) {
    double inertia = 0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        int arg = 0;
        for (Eigen::Index c = 0; c < centers.rows(); ++c) {
            double d = (X.row(i) - centers.row(c)).squaredNorm();
            if (d < best) {
                best = d;
                arg = static_cast<int>(c);
            }
        }
        labels[static_cast<std::size_t>(i)] = arg;
        dist(i) = best;
        inertia += best;
    }
    return inertia;
}

}

KMeansResult kmeans(const Eigen::MatrixXd& X, int n_clusters, std::uint64_t seed, int max_iter) {
    const auto n = X.rows();
    if (n_clusters < 1 || n_clusters > n) {
        throw std::invalid_argument("kmeans: n_clusters=" + std::to_string(n_clusters) + " must lie in [1, " + std::to_string(n) + "]");
    }
    if (max_iter < 1) {
        throw std::invalid_argument("kmeans: max_iter must be positive");
    }

    std::mt19937_64 rng(seed);
    Eigen::MatrixXd centers(n_clusters, X.cols());

    // k-means++ seeding.
    {
        std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
        centers.row(0) = X.row(first(rng));
        Eigen::VectorXd d2(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            d2(i) = (X.row(i) - centers.row(0)).squaredNorm();
        }
        for (int c = 1; c < n_clusters; ++c) {
            double total = d2.sum();
            Eigen::Index pick = 0;
            if (total > 0) {
                std::uniform_real_distribution<double> u(0.0, total);
                double target = u(rng);
                double acc = 0;
                pick = n - 1;
                for (Eigen::Index i = 0; i < n; ++i) {
                    acc += d2(i);
                    if (acc > target && d2(i) > 0) {
                        pick = i;
                        break;
                    }
                }
            } else {
                // Every point coincides with a center already; duplicates are unavoidable.
                pick = c % n;
            }
            centers.row(c) = X.row(pick);
            for (Eigen::Index i = 0; i < n; ++i) {
                d2(i) = std::min(d2(i), (X.row(i) - centers.row(c)).squaredNorm());
            }
        }
    }

    KMeansResult out;
    std::vector<int> labels(static_cast<std::size_t>(n), 0);
    Eigen::VectorXd dist(n);
    double inertia = assign(X, centers, labels, dist);
    out.inertia_trace.push_back(inertia);

    // Recomputes centers from labels and repairs empty clusters. Returns whether any repair happened.
    auto update = [&]() {
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n_clusters, X.cols());
        std::vector<int> counts(static_cast<std::size_t>(n_clusters), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(labels[static_cast<std::size_t>(i)]) += X.row(i);
            ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
        }
        for (int c = 0; c < n_clusters; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
            }
        }

        bool repaired = false;
        for (int c = 0; c < n_clusters; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                continue;
            }
            repaired = true;
            int largest = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
            Eigen::Index far = -1;
            double far_d = -1;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (labels[static_cast<std::size_t>(i)] == largest) {
                    double d = (X.row(i) - centers.row(largest)).squaredNorm();
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
            }
            labels[static_cast<std::size_t>(far)] = c;
            --counts[static_cast<std::size_t>(largest)];
            counts[static_cast<std::size_t>(c)] = 1;
            centers.row(c) = X.row(far);
            sums.row(largest) -= X.row(far);
            centers.row(largest) = sums.row(largest) / counts[static_cast<std::size_t>(largest)];
        }
        return repaired;
    };

    for (int iter = 0; iter < max_iter; ++iter) {
        bool repaired = update();
        std::vector<int> next = labels;
        inertia = assign(X, centers, next, dist);
        out.inertia_trace.push_back(inertia);
        out.iterations = iter + 1;
        bool changed = next != labels;
        labels = std::move(next);
        if (!changed && !repaired) {
            break;
        }
    }
    // Centers become the means of the final labels; the last assignment may also have emptied a cluster.
    bool repaired = update();
    inertia = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        inertia += (X.row(i) - centers.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
    }
    if (repaired) {
        out.inertia_trace.push_back(inertia);
    }

    out.assignment.labels = canonical_labels(labels);
    out.centers.resize(n_clusters, X.cols());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out.centers.row(out.assignment.labels[i]) = centers.row(labels[i]);
    }
    out.inertia = inertia;
    out.assignment.method = ClusterMethod::kmeans;
    out.assignment.parameter = n_clusters;
    out.assignment.seed = seed;
    return out;
}

}
