#include "hgdomain/pipeline.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>

namespace hgdomain {

namespace {

std::string trim(const std::string& s) {
    auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return "";
    }
    auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template<typename T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (value.empty() || ec != std::errc() || ptr != value.data() + value.size()) {
        throw ConfigError("invalid value '" + value + "' for " + key);
    }
    if constexpr (std::is_floating_point_v<T>) {
        if (!std::isfinite(out)) {
            throw ConfigError("invalid value '" + value + "' for " + key);
        }
    }
    return out;
}

int positive_int(const std::string& key, const std::string& value) {
    int v = parse_number<int>(key, value);
    if (v < 1) {
        throw ConfigError(key + " must be a positive integer, got '" + value + "'");
    }
    return v;
}

double positive_real(const std::string& key, const std::string& value) {
    double v = parse_number<double>(key, value);
    if (!(v > 0)) {
        throw ConfigError(key + " must be positive, got '" + value + "'");
    }
    return v;
}

double non_negative_real(const std::string& key, const std::string& value) {
    double v = parse_number<double>(key, value);
    if (!(v >= 0)) {
        throw ConfigError(key + " must be non-negative, got '" + value + "'");
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") {
        return true;
    }
    if (value == "false" || value == "0" || value == "no" || value == "off") {
        return false;
    }
    throw ConfigError("invalid boolean '" + value + "' for " + key);
}

bool is_off(const std::string& value) {
    return value.empty() || value == "none" || value == "off";
}

using Setter = std::function<void(PipelineConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        auto path_opt = [](std::optional<std::filesystem::path> PipelineConfig::*field) {
            return [field](PipelineConfig& c, const std::string&, const std::string& v) {
                if (is_off(v)) {
                    c.*field = std::nullopt;
                } else {
                    c.*field = std::filesystem::path(v);
                }
            };
        };
        auto pos_int = [](int PipelineConfig::*field) {
            return [field](PipelineConfig& c, const std::string& k, const std::string& v) { c.*field = positive_int(k, v); };
        };
        auto pos_real = [](double PipelineConfig::*field) {
            return [field](PipelineConfig& c, const std::string& k, const std::string& v) { c.*field = positive_real(k, v); };
        };
        auto nonneg_real = [](double PipelineConfig::*field) {
            return [field](PipelineConfig& c, const std::string& k, const std::string& v) { c.*field = non_negative_real(k, v); };
        };
        auto opt_pos_int = [](std::optional<int> PipelineConfig::*field) {
            return [field](PipelineConfig& c, const std::string& k, const std::string& v) {
                if (is_off(v) || v == "auto") {
                    c.*field = std::nullopt;
                } else {
                    c.*field = positive_int(k, v);
                }
            };
        };

        t["expression"] = path_opt(&PipelineConfig::expression);
        t["coords"] = path_opt(&PipelineConfig::coords);
        t["image"] = path_opt(&PipelineConfig::image);
        t["mask"] = path_opt(&PipelineConfig::mask);
        t["truth"] = path_opt(&PipelineConfig::truth);
        t["hypergraph"] = path_opt(&PipelineConfig::hypergraph);
        t["embedding"] = path_opt(&PipelineConfig::embedding);
        t["labels"] = path_opt(&PipelineConfig::labels);
        t["out"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
            if (v.empty()) {
                throw ConfigError(k + " must not be empty");
            }
            c.out = v;
        };
        t["synth"] = [](PipelineConfig& c, const std::string&, const std::string& v) {
            if (is_off(v)) {
                c.synth = std::nullopt;
            } else {
                parse_synth_shape(v);
                c.synth = v;
            }
        };
        t["synth_noise"] = nonneg_real(&PipelineConfig::synth_noise);
        t["synth_mix"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
            double m = non_negative_real(k, v);
            if (m >= 1) {
                throw ConfigError(k + " must lie in [0, 1)");
            }
            c.synth_mix = m;
        };
        t["k_neighbors"] = pos_int(&PipelineConfig::k_neighbors);
        t["tile_size"] = pos_int(&PipelineConfig::tile_size);
        t["image_scale"] = pos_real(&PipelineConfig::image_scale);
        t["tile_components"] = pos_int(&PipelineConfig::tile_components);
        t["gate_quantile"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
            if (is_off(v)) {
                c.gate_quantile = std::nullopt;
                return;
            }
            double q = parse_number<double>(k, v);
            if (!(q > 0 && q <= 1)) {
                throw ConfigError(k + " must lie in (0, 1]");
            }
            c.gate_quantile = q;
        };
        t["normalize"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
            if (v == "none") {
                c.normalize = Normalization::none;
            } else if (v == "log1p") {
                c.normalize = Normalization::log1p;
            } else {
                throw ConfigError(k + " must be none or log1p, got '" + v + "'");
            }
        };
        t["pca_components"] = pos_int(&PipelineConfig::pca_components);
        t["latent_dim"] = pos_int(&PipelineConfig::latent_dim);
        t["spatial_dim"] = pos_int(&PipelineConfig::spatial_dim);
        t["hidden_dim"] = pos_int(&PipelineConfig::hidden_dim);
        t["noise_sd"] = nonneg_real(&PipelineConfig::noise_sd);
        t["lambda_re"] = nonneg_real(&PipelineConfig::lambda_re);
        t["learning_rate"] = pos_real(&PipelineConfig::learning_rate);
        t["epochs"] = pos_int(&PipelineConfig::epochs);
        t["seed"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
            c.seed = parse_number<std::uint64_t>(k, v);
        };
        t["phased"] = [](PipelineConfig& c, const std::string& k, const std::string& v) { c.phased = parse_bool(k, v); };
        t["cluster_method"] = [](PipelineConfig& c, const std::string&, const std::string& v) {
            try {
                c.cluster_method = parse_cluster_method(v);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
        };
        t["n_clusters"] = opt_pos_int(&PipelineConfig::n_clusters);
        t["resolution"] = pos_real(&PipelineConfig::resolution);
        t["k_snn"] = pos_int(&PipelineConfig::k_snn);
        t["k_lisi"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
            if (is_off(v) || v == "auto") {
                c.k_lisi = std::nullopt;
                return;
            }
            int n = positive_int(k, v);
            if (n < 2) {
                throw ConfigError(k + " must be at least 2");
            }
            c.k_lisi = n;
        };
        t["kmeans_max_iter"] = pos_int(&PipelineConfig::kmeans_max_iter);
        return t;
    }();
    return table;
}

}

void PipelineConfig::set(const std::string& key, const std::string& value) {
    auto it = setters().find(key);
    if (it == setters().end()) {
        throw ConfigError("unknown configuration key '" + key + "'");
    }
    it->second(*this, key, trim(value));
}

const std::vector<std::string>& PipelineConfig::keys() {
    static const std::vector<std::string> out = [] {
        std::vector<std::string> k;
        for (const auto& [key, setter] : setters()) {
            k.push_back(key);
        }
        return k;
    }();
    return out;
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file '" + path.string() + "'");
    }
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto text = trim(line);
        if (text.empty() || text.front() == '#') {
            continue;
        }
        auto eq = text.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path.string() + ": line " + std::to_string(lineno) + " is not key=value");
        }
        out.emplace_back(trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
    }
    return out;
}

PipelineConfig resolve_config(const std::vector<std::pair<std::string, std::string>>& file_entries,
                              const std::vector<std::pair<std::string, std::string>>& flag_entries) {
    PipelineConfig config;
    for (const auto& [k, v] : file_entries) {
        config.set(k, v);
    }
    for (const auto& [k, v] : flag_entries) {
        config.set(k, v);
    }
    return config;
}

SyntheticShape parse_synth_shape(const std::string& text) {
    SyntheticShape shape;
    int* fields[] = {&shape.n_domains, &shape.spots_per_domain, &shape.n_genes};
    std::size_t start = 0;
    for (int f = 0; f < 3; ++f) {
        auto end = f < 2 ? text.find('x', start) : text.size();
        if (end == std::string::npos) {
            throw ConfigError("synthetic shape '" + text + "' must look like DOMAINSxSPOTSxGENES");
        }
        *fields[f] = positive_int("synth", text.substr(start, end - start));
        start = end + 1;
    }
    return shape;
}

}
