#include "hgdomain/dataio.hpp"
#include "hgdomain/errors.hpp"

#include "csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace hgdomain {

namespace {

void check_unique(const std::vector<std::string>& ids, const std::string& what) {
    std::unordered_set<std::string> seen;
    seen.reserve(ids.size());
    for (const auto& id : ids) {
        if (!seen.insert(id).second) {
            throw DataError("duplicate " + what + " id '" + id + "'");
        }
    }
}

std::unordered_map<std::string, std::size_t> index_ids(const std::vector<std::string>& ids) {
    std::unordered_map<std::string, std::size_t> out;
    out.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out.emplace(ids[i], i);
    }
    return out;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write file '" + path.string() + "'");
    }
    return out;
}

void check_unique_rows(const csv::Table& table) {
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        auto [it, inserted] = seen.emplace(table.rows[r][0], r);
        if (!inserted) {
            throw DataError(table.path.string() + ": duplicate spot id '" + table.rows[r][0] + "' at row " +
                            std::to_string(r + 1) + " (first seen at row " + std::to_string(it->second + 1) + ")");
        }
    }
}

NamedMatrix parse_named_matrix(const csv::Table& table, bool non_negative) {
    if (table.header.size() < 2) {
        throw DataError(table.path.string() + ": expected an id column followed by at least one value column");
    }
    check_unique_rows(table);

    NamedMatrix out;
    out.col_ids.assign(table.header.begin() + 1, table.header.end());
    {
        std::unordered_map<std::string, std::size_t> seen;
        for (std::size_t c = 0; c < out.col_ids.size(); ++c) {
            if (!seen.emplace(out.col_ids[c], c).second) {
                throw DataError(table.path.string() + ": duplicate column id '" + out.col_ids[c] + "' in header column " +
                                std::to_string(c + 2));
            }
        }
    }

    const auto nrow = static_cast<Eigen::Index>(table.rows.size());
    const auto ncol = static_cast<Eigen::Index>(out.col_ids.size());
    out.values.resize(nrow, ncol);
    out.row_ids.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        out.row_ids.push_back(table.rows[r][0]);
        for (Eigen::Index c = 0; c < ncol; ++c) {
            double v = csv::parse_real(table, r, static_cast<std::size_t>(c) + 1);
            if (non_negative && v < 0) {
                throw DataError(csv::location(table, r, static_cast<std::size_t>(c) + 1) + ": negative expression value");
            }
            out.values(static_cast<Eigen::Index>(r), c) = v;
        }
    }
    return out;
}

void write_matrix(std::ostream& out, const std::string& id_header, const Eigen::MatrixXd& values,
                  const std::vector<std::string>& row_ids, const std::vector<std::string>& col_ids) {
    out << id_header;
    for (const auto& c : col_ids) {
        out << ',' << c;
    }
    out << '\n';
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        out << row_ids[static_cast<std::size_t>(r)];
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            out << ',' << csv::format_real(values(r, c));
        }
        out << '\n';
    }
}

bool parse_flag(const csv::Table& table, std::size_t row, std::size_t col) {
    const auto& cell = table.rows[row][col];
    if (cell == "1" || cell == "true" || cell == "TRUE" || cell == "True") {
        return true;
    }
    if (cell == "0" || cell == "false" || cell == "FALSE" || cell == "False") {
        return false;
    }
    throw DataError(csv::location(table, row, col) + ": expected 0/1 or true/false, found '" + cell + "'");
}

}

void ExpressionMatrix::validate() const {
    if (static_cast<std::size_t>(values.rows()) != spot_ids.size()) {
        throw DataError("expression matrix has " + std::to_string(values.rows()) + " rows but " +
                        std::to_string(spot_ids.size()) + " spot ids");
    }
    if (static_cast<std::size_t>(values.cols()) != gene_ids.size()) {
        throw DataError("expression matrix has " + std::to_string(values.cols()) + " columns but " +
                        std::to_string(gene_ids.size()) + " gene ids");
    }
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
        for (Eigen::Index r = 0; r < values.rows(); ++r) {
            double v = values(r, c);
            if (!std::isfinite(v) || v < 0) {
                throw DataError("expression value at row " + std::to_string(r + 1) + ", column " + std::to_string(c + 1) +
                                " is not a finite non-negative number");
            }
        }
    }
    check_unique(spot_ids, "spot");
    check_unique(gene_ids, "gene");
}

void SpatialCoords::validate() const {
    if (static_cast<std::size_t>(positions.rows()) != spot_ids.size()) {
        throw DataError("coordinates have " + std::to_string(positions.rows()) + " rows but " +
                        std::to_string(spot_ids.size()) + " spot ids");
    }
    if (!positions.allFinite()) {
        throw DataError("coordinates contain non-finite values");
    }
    check_unique(spot_ids, "spot");
}

ExpressionMatrix load_expression(const std::filesystem::path& path) {
    auto table = csv::read(path);
    auto named = parse_named_matrix(table, true);
    ExpressionMatrix out{std::move(named.values), std::move(named.row_ids), std::move(named.col_ids)};
    if (out.n_spots() == 0) {
        throw DataError(path.string() + ": no spots");
    }
    return out;
}

void write_expression(const ExpressionMatrix& expr, const std::filesystem::path& path) {
    auto out = open_output(path);
    write_matrix(out, "spot", expr.values, expr.spot_ids, expr.gene_ids);
}

NamedMatrix load_named_matrix(const std::filesystem::path& path) {
    return parse_named_matrix(csv::read(path), false);
}

void write_named_matrix(const NamedMatrix& mat, const std::filesystem::path& path) {
    auto out = open_output(path);
    write_matrix(out, "spot", mat.values, mat.row_ids, mat.col_ids);
}

SpatialCoords load_coords(const std::filesystem::path& path) {
    auto table = csv::read(path);
    if (table.header.size() != 3) {
        throw DataError(path.string() + ": expected columns spot_id,x,y");
    }
    check_unique_rows(table);

    SpatialCoords out;
    out.positions.resize(static_cast<Eigen::Index>(table.rows.size()), 2);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        out.spot_ids.push_back(table.rows[r][0]);
        out.positions(static_cast<Eigen::Index>(r), 0) = csv::parse_real(table, r, 1);
        out.positions(static_cast<Eigen::Index>(r), 1) = csv::parse_real(table, r, 2);
    }
    return out;
}

void write_coords(const SpatialCoords& coords, const std::filesystem::path& path) {
    auto out = open_output(path);
    out << "spot_id,x,y\n";
    for (Eigen::Index r = 0; r < coords.size(); ++r) {
        out << coords.spot_ids[static_cast<std::size_t>(r)] << ',' << csv::format_real(coords.positions(r, 0)) << ','
            << csv::format_real(coords.positions(r, 1)) << '\n';
    }
}

SpatialCoords align_coords(const SpatialCoords& coords, const std::vector<std::string>& spot_ids) {
    auto index = index_ids(coords.spot_ids);
    auto wanted = index_ids(spot_ids);

    for (const auto& id : coords.spot_ids) {
        if (!wanted.count(id)) {
            throw DataError("spot '" + id + "' has coordinates but is absent from the expression data");
        }
    }

    SpatialCoords out;
    out.positions.resize(static_cast<Eigen::Index>(spot_ids.size()), 2);
    out.spot_ids = spot_ids;
    for (std::size_t i = 0; i < spot_ids.size(); ++i) {
        auto it = index.find(spot_ids[i]);
        if (it == index.end()) {
            throw DataError("spot '" + spot_ids[i] + "' has no coordinates");
        }
        out.positions.row(static_cast<Eigen::Index>(i)) = coords.positions.row(static_cast<Eigen::Index>(it->second));
    }
    return out;
}

TissueMask load_mask(const std::filesystem::path& path, const std::vector<std::string>& spot_ids) {
    auto table = csv::read(path);
    if (table.header.size() != 2) {
        throw DataError(path.string() + ": expected columns spot_id,in_tissue");
    }
    check_unique_rows(table);

    auto wanted = index_ids(spot_ids);
    std::vector<int> state(spot_ids.size(), -1);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        auto it = wanted.find(table.rows[r][0]);
        if (it == wanted.end()) {
            throw DataError(path.string() + ": spot '" + table.rows[r][0] + "' is absent from the expression data");
        }
        state[it->second] = parse_flag(table, r, 1) ? 1 : 0;
    }

    TissueMask out;
    out.in_tissue.reserve(spot_ids.size());
    for (std::size_t i = 0; i < spot_ids.size(); ++i) {
        if (state[i] < 0) {
            throw DataError(path.string() + ": no mask entry for spot '" + spot_ids[i] + "'");
        }
        out.in_tissue.push_back(state[i] == 1);
    }
    return out;
}

std::pair<std::vector<std::string>, std::vector<int>> load_labels(const std::filesystem::path& path) {
    auto table = csv::read(path);
    if (table.header.size() != 2) {
        throw DataError(path.string() + ": expected columns spot_id,label");
    }
    check_unique_rows(table);

    std::vector<std::string> ids;
    std::vector<int> labels;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        auto v = csv::parse_integer(table, r, 1);
        if (v < 0) {
            throw DataError(csv::location(table, r, 1) + ": labels must be non-negative");
        }
        ids.push_back(table.rows[r][0]);
        labels.push_back(static_cast<int>(v));
    }
    return {std::move(ids), std::move(labels)};
}

std::vector<int> load_labels(const std::filesystem::path& path, const std::vector<std::string>& spot_ids) {
    auto [ids, labels] = load_labels(path);
    auto index = index_ids(ids);
    std::vector<int> out;
    out.reserve(spot_ids.size());
    for (const auto& id : spot_ids) {
        auto it = index.find(id);
        if (it == index.end()) {
            throw DataError(path.string() + ": no label for spot '" + id + "'");
        }
        out.push_back(labels[it->second]);
    }
    return out;
}

void write_labels(const std::vector<std::string>& spot_ids, const std::vector<int>& labels, const std::filesystem::path& path) {
    if (spot_ids.size() != labels.size()) {
        throw std::invalid_argument("write_labels: " + std::to_string(spot_ids.size()) + " ids but " +
                                    std::to_string(labels.size()) + " labels");
    }
    auto out = open_output(path);
    out << "spot_id,label\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out << spot_ids[i] << ',' << labels[i] << '\n';
    }
}

std::pair<ExpressionMatrix, SpatialCoords> apply_tissue_mask(const ExpressionMatrix& expr, const SpatialCoords& coords, const TissueMask& mask) {
    const auto n = static_cast<std::size_t>(expr.n_spots());
    if (mask.in_tissue.size() != n || static_cast<std::size_t>(coords.size()) != n) {
        throw std::invalid_argument("apply_tissue_mask: mask has " + std::to_string(mask.in_tissue.size()) +
                                    " entries, expression has " + std::to_string(n) + " spots, coordinates have " +
                                    std::to_string(coords.size()));
    }

    std::vector<Eigen::Index> keep;
    for (std::size_t i = 0; i < n; ++i) {
        if (mask.in_tissue[i]) {
            keep.push_back(static_cast<Eigen::Index>(i));
        }
    }
    if (keep.empty()) {
        throw std::invalid_argument("apply_tissue_mask: no spot lies inside the tissue");
    }

    ExpressionMatrix e;
    e.values = expr.values(keep, Eigen::all);
    e.gene_ids = expr.gene_ids;
    SpatialCoords c;
    c.positions = coords.positions(keep, Eigen::all);
    for (auto k : keep) {
        e.spot_ids.push_back(expr.spot_ids[static_cast<std::size_t>(k)]);
        c.spot_ids.push_back(coords.spot_ids[static_cast<std::size_t>(k)]);
    }
    return {std::move(e), std::move(c)};
}

ExpressionMatrix log1p_normalize(const ExpressionMatrix& expr) {
    ExpressionMatrix out = expr;
    out.values = expr.values.array().log1p().matrix();
    return out;
}

SyntheticDataset generate_synthetic(const SyntheticOptions& opt) {
    if (opt.n_domains < 1 || opt.spots_per_domain < 1 || opt.n_genes < 1) {
        throw std::invalid_argument("generate_synthetic: counts must be positive");
    }
    if (!(opt.noise_sd >= 0)) {
        throw std::invalid_argument("generate_synthetic: noise_sd must be non-negative");
    }
    if (!(opt.mix >= 0 && opt.mix < 1)) {
        throw std::invalid_argument("generate_synthetic: mix must lie in [0, 1)");
    }

    constexpr double cloud_sd = 1.0;
    constexpr double baseline_lo = 0.5;
    constexpr double baseline_hi = 1.5;
    constexpr double marker_boost = 2.0;

    std::mt19937_64 rng(opt.seed);
    const int n_domains = opt.n_domains;
    const int n = n_domains * opt.spots_per_domain;
    const int m = opt.n_genes;

    // Adjacent centers are at least 8 cloud standard deviations apart.
    const double radius = n_domains > 1 ? 4.0 * cloud_sd / std::sin(std::numbers::pi / n_domains) : 0.0;

    Eigen::MatrixXd signatures(n_domains, m);
    {
        std::uniform_real_distribution<double> base(baseline_lo, baseline_hi);
        for (int g = 0; g < m; ++g) {
            double b = base(rng);
            for (int d = 0; d < n_domains; ++d) {
                signatures(d, g) = b + (g % n_domains == d ? marker_boost : 0.0);
            }
        }
    }

    SyntheticDataset out;
    out.truth.n_domains = n_domains;
    out.truth.labels.resize(static_cast<std::size_t>(n));
    out.coords.positions.resize(n, 2);
    std::normal_distribution<double> standard(0.0, 1.0);
    for (int d = 0; d < n_domains; ++d) {
        double angle = 2.0 * std::numbers::pi * d / n_domains;
        double cx = radius * std::cos(angle);
        double cy = radius * std::sin(angle);
        for (int s = 0; s < opt.spots_per_domain; ++s) {
            int i = d * opt.spots_per_domain + s;
            out.truth.labels[static_cast<std::size_t>(i)] = d;
            double dx = standard(rng);
            double dy = standard(rng);
            out.coords.positions(i, 0) = cx + cloud_sd * dx;
            out.coords.positions(i, 1) = cy + cloud_sd * dy;
        }
    }

    // Which domain's signature each spot expresses.
    std::vector<int> source = out.truth.labels;
    if (opt.mix > 0 && n_domains > 1) {
        std::vector<int> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        auto n_mixed = static_cast<std::size_t>(std::llround(opt.mix * n));
        std::uniform_int_distribution<int> other(1, n_domains - 1);
        for (std::size_t j = 0; j < n_mixed; ++j) {
            auto i = static_cast<std::size_t>(order[j]);
            source[i] = (source[i] + other(rng)) % n_domains;
        }
    }

    out.expression.values.resize(n, m);
    for (int i = 0; i < n; ++i) {
        for (int g = 0; g < m; ++g) {
            double v = signatures(source[static_cast<std::size_t>(i)], g);
            if (opt.noise_sd > 0) {
                v += opt.noise_sd * standard(rng);
            }
            out.expression.values(i, g) = std::max(v, 0.0);
        }
    }

    const auto width = std::to_string(n - 1).size();
    for (int i = 0; i < n; ++i) {
        auto num = std::to_string(i);
        auto id = "spot_" + std::string(width - num.size(), '0') + num;
        out.expression.spot_ids.push_back(id);
        out.coords.spot_ids.push_back(id);
    }
    const auto gwidth = std::to_string(m - 1).size();
    for (int g = 0; g < m; ++g) {
        auto num = std::to_string(g);
        out.expression.gene_ids.push_back("gene_" + std::string(gwidth - num.size(), '0') + num);
    }
    return out;
}

}
