#include "hgdomain/pipeline.hpp"

#include "csv.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>

namespace hgdomain {

namespace {

constexpr std::array<const char*, 12> palette = {
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
};

constexpr int panel = 600;
constexpr int legend_width = 160;
constexpr int legend_row = 20;

std::string num(double v) {
    return csv::format_fixed(v, 4);
}

}

void plot_domains(const SpatialCoords& coords, const std::vector<int>& labels, const std::filesystem::path& path) {
    const auto n = coords.size();
    if (static_cast<Eigen::Index>(labels.size()) != n) {
        throw std::invalid_argument("plot_domains: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) + " spots");
    }
    if (n == 0) {
        throw std::invalid_argument("plot_domains: no spots");
    }
    std::map<int, int> counts;
    for (int l : labels) {
        if (l < 0) {
            throw std::invalid_argument("plot_domains: negative label " + std::to_string(l));
        }
        ++counts[l];
    }

    Eigen::Vector2d lo = coords.positions.colwise().minCoeff();
    Eigen::Vector2d hi = coords.positions.colwise().maxCoeff();
    Eigen::Vector2d extent = hi - lo;
    double span = std::max({extent.x(), extent.y(), 0.0});
    if (span == 0) {
        span = 1;
    }
    for (int d = 0; d < 2; ++d) {
        if (extent(d) == 0) {
            extent(d) = span;
            lo(d) -= span / 2;
        }
    }
    Eigen::Vector2d margin = 0.05 * extent;
    double radius = 0.01 * span;

    int height = std::max(panel, legend_row * (static_cast<int>(counts.size()) + 2));
    int width = panel + legend_width;

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write '" + path.string() + "'");
    }
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\" viewBox=\"0 0 " << width
        << ' ' << height << "\">\n";
    out << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"#ffffff\"/>\n";
    out << "<svg x=\"0\" y=\"0\" width=\"" << panel << "\" height=\"" << panel << "\" viewBox=\"" << num(lo.x() - margin.x()) << ' '
        << num(lo.y() - margin.y()) << ' ' << num(extent.x() + 2 * margin.x()) << ' ' << num(extent.y() + 2 * margin.y())
        << "\" preserveAspectRatio=\"xMidYMid meet\">\n";
    for (Eigen::Index i = 0; i < n; ++i) {
        int l = labels[static_cast<std::size_t>(i)];
        out << "<circle cx=\"" << num(coords.positions(i, 0)) << "\" cy=\"" << num(coords.positions(i, 1)) << "\" r=\"" << num(radius)
            << "\" fill=\"" << palette[static_cast<std::size_t>(l) % palette.size()] << "\"/>\n";
    }
    out << "</svg>\n";
    out << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
    int row = 0;
    for (const auto& [label, count] : counts) {
        int y = legend_row * (row + 1);
        out << "<rect x=\"" << panel + 10 << "\" y=\"" << y - 10 << "\" width=\"12\" height=\"12\" fill=\""
            << palette[static_cast<std::size_t>(label) % palette.size()] << "\"/>\n";
        out << "<text x=\"" << panel + 28 << "\" y=\"" << y << "\">label " << label << " (n=" << count << ")</text>\n";
        ++row;
    }
    out << "</g>\n</svg>\n";
    if (!out) {
        throw std::runtime_error("failed writing '" + path.string() + "'");
    }
}

}
