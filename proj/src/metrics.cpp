#include "hgdomain/metrics.hpp"
#include "hgdomain/errors.hpp"
#include "hgdomain/knn.hpp"

#include "csv.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>

namespace hgdomain {

namespace {

double choose2(double x) {
    return x * (x - 1) / 2;
}

}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("adjusted_rand_index: label vectors have lengths " + std::to_string(a.size()) + " and " +
                                    std::to_string(b.size()));
    }
    if (a.size() < 2) {
        throw std::invalid_argument("adjusted_rand_index: need at least 2 elements");
    }

    std::map<std::pair<int, int>, long long> cells;
    std::map<int, long long> rows;
    std::map<int, long long> cols;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ++cells[{a[i], b[i]}];
        ++rows[a[i]];
        ++cols[b[i]];
    }

    double index = 0;
    for (const auto& [key, count] : cells) {
        index += choose2(static_cast<double>(count));
    }
    double sum_a = 0;
    for (const auto& [key, count] : rows) {
        sum_a += choose2(static_cast<double>(count));
    }
    double sum_b = 0;
    for (const auto& [key, count] : cols) {
        sum_b += choose2(static_cast<double>(count));
    }

    const double total = choose2(static_cast<double>(a.size()));
    const double expected = sum_a * sum_b / total;
    const double max_index = (sum_a + sum_b) / 2;
    if (max_index == expected) {
        return 1.0;
    }
    return (index - expected) / (max_index - expected);
}

int default_k_lisi(Eigen::Index n_spots) {
    return static_cast<int>(std::min<Eigen::Index>(30, n_spots - 1));
}

LisiResult ilisi(const Eigen::MatrixXd& embedding, const std::vector<int>& labels, int k_lisi) {
    const auto n = embedding.rows();
    if (static_cast<Eigen::Index>(labels.size()) != n) {
        throw std::invalid_argument("ilisi: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) + " spots");
    }
    if (k_lisi < 2 || k_lisi >= n) {
        throw std::invalid_argument("ilisi: k_lisi=" + std::to_string(k_lisi) + " must lie in [2, " + std::to_string(n) + ")");
    }

    auto knn = exact_knn(embedding, k_lisi);
    LisiResult out;
    out.k_lisi = k_lisi;
    out.per_spot.reserve(static_cast<std::size_t>(n));
    std::map<int, int> counts;
    for (Eigen::Index i = 0; i < n; ++i) {
        counts.clear();
        for (int j : knn[static_cast<std::size_t>(i)]) {
            ++counts[labels[static_cast<std::size_t>(j)]];
        }
        double simpson = 0;
        for (const auto& [label, c] : counts) {
            double p = static_cast<double>(c) / k_lisi;
            simpson += p * p;
        }
        out.per_spot.push_back(1.0 / simpson);
    }
    double sum = 0;
    for (double v : out.per_spot) {
        sum += v;
    }
    out.mean = sum / static_cast<double>(n);
    return out;
}

void write_metrics(const MetricReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write file '" + path.string() + "'");
    }
    std::vector<std::pair<std::string, std::string>> fields;
    if (report.ari) {
        fields.emplace_back("ari", csv::format_real(*report.ari));
    }
    fields.emplace_back("ilisi_mean", csv::format_real(report.ilisi_mean));
    fields.emplace_back("k_lisi", std::to_string(report.k_lisi));
    fields.emplace_back("n_clusters", std::to_string(report.n_clusters));
    fields.emplace_back("n_spots", std::to_string(report.n_spots));
    out << "{\n";
    for (std::size_t i = 0; i < fields.size(); ++i) {
        out << "  \"" << fields[i].first << "\": " << fields[i].second << (i + 1 < fields.size() ? ",\n" : "\n");
    }
    out << "}\n";
}

}
