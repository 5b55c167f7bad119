#include "hgdomain/pipeline.hpp"

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <map>

namespace {

using Runner = std::function<std::vector<std::filesystem::path>(const hgdomain::PipelineConfig&)>;

struct Command {
    const char* name;
    const char* help;
    Runner run;
};

struct Flags {
    std::string config_file;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
    bool phased = false;
    CLI::Option* phased_option = nullptr;
};

void add_flags(CLI::App& sub, Flags& flags) {
    sub.add_option("--config", flags.config_file, "key=value configuration file");
    for (const auto& key : hgdomain::PipelineConfig::keys()) {
        if (key == "phased") {
            flags.phased_option = sub.add_flag("--phased", flags.phased, "train the two encoders one after the other");
            continue;
        }
        flags.options[key] = sub.add_option("--" + key, flags.values[key]);
    }
}

std::vector<std::pair<std::string, std::string>> flag_entries(const Flags& flags) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [key, option] : flags.options) {
        if (option->count() > 0) {
            out.emplace_back(key, flags.values.at(key));
        }
    }
    if (flags.phased_option && flags.phased_option->count() > 0) {
        out.emplace_back("phased", flags.phased ? "true" : "false");
    }
    return out;
}

}

int main(int argc, char** argv) {
    const Command commands[] = {
        {"synth", "generate a synthetic dataset", hgdomain::run_synth},
        {"hypergraph", "build the spatial hypergraph", hgdomain::run_hypergraph},
        {"train", "train the autoencoders and write the reduced embedding", hgdomain::run_train},
        {"cluster", "cluster an embedding into domains", hgdomain::run_cluster},
        {"evaluate", "score labels against an embedding and optional ground truth", hgdomain::run_evaluate},
        {"plot", "draw the domain map as SVG", hgdomain::run_plot},
        {"pipeline", "run every stage end to end", hgdomain::run_pipeline},
    };

    CLI::App app{"Spatial domain detection with hypergraph autoencoders"};
    app.require_subcommand(1);
    std::map<std::string, Flags> flags;
    for (const auto& c : commands) {
        add_flags(*app.add_subcommand(c.name, c.help), flags[c.name]);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    for (const auto& c : commands) {
        auto* sub = app.get_subcommand(c.name);
        if (!sub->parsed()) {
            continue;
        }
        const auto& f = flags.at(c.name);
        try {
            std::vector<std::pair<std::string, std::string>> file;
            if (!f.config_file.empty()) {
                file = hgdomain::read_config_file(f.config_file);
            }
            auto config = hgdomain::resolve_config(file, flag_entries(f));
            for (const auto& path : c.run(config)) {
                std::cout << path.string() << '\n';
            }
            return 0;
        } catch (const std::exception& e) {
            std::cerr << "hgdomain " << c.name << ": " << e.what() << '\n';
            return hgdomain::exit_code_for(e);
        }
    }
    return 1;
}
