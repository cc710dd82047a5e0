#pragma once

// Flat `key = value` run configuration with [data] / [model] / [train] /
// [attack] sections. Strict parsing: unknown sections or keys, bad numbers
// and malformed lines are reported with their line number.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "flatnn/data.hpp"
#include "flatnn/errors.hpp"
#include "flatnn/nn.hpp"
#include "flatnn/training.hpp"

namespace flatnn {

struct DataConfig {
    enum class Source { two_moons, idx, csv };
    Source source = Source::two_moons;
    std::size_t n = 2000;
    double noise = 0.2;
    std::uint64_t seed = 7;
    std::string images;      // idx
    std::string labels;      // idx
    std::string path;        // csv
    bool label_first = true;  // csv
};

struct ModelConfig {
    std::vector<std::size_t> hidden = {64, 64};
    std::vector<std::size_t> controller_hidden = {32, 64};
    std::size_t unroll = 1;
    ControllerInput mode = ControllerInput::predictions_only;
};

struct RunConfig {
    DataConfig data;
    ModelConfig model;
    TrainConfig train;
    std::string raw_text;  // verbatim config; echoed into checkpoints

    Dataset load_dataset() const {
        switch (data.source) {
            case DataConfig::Source::two_moons: return two_moons(data.n, data.noise, data.seed);
            case DataConfig::Source::idx: return load_idx(data.images, data.labels);
            default: return load_csv(data.path, data.label_first);
        }
    }

    FeedbackModel build_feedback_model(std::size_t input_dim, std::size_t classes) const {
        return make_feedback_model({input_dim, model.hidden, classes}, model.controller_hidden,
                                   model.unroll, model.mode, derive_seed(train.seed, 0x111));
    }

    ModelParams build_plain_model(std::size_t input_dim, std::size_t classes) const {
        return init_params({input_dim, model.hidden, classes}, derive_seed(train.seed, 0x111));
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& v, int line) {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size()) throw ConfigError(line, "expected a number, got '" + v + "'");
    return x;
}

inline std::uint64_t parse_u64(const std::string& v, int line) {
    char* end = nullptr;
    const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size())
        throw ConfigError(line, "expected a non-negative integer, got '" + v + "'");
    return x;
}

inline bool parse_bool(const std::string& v, int line) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw ConfigError(line, "expected true/false, got '" + v + "'");
}

inline std::vector<std::size_t> parse_width_list(const std::string& v, int line) {
    std::vector<std::size_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw ConfigError(line, "empty entry in width list '" + v + "'");
        out.push_back(static_cast<std::size_t>(parse_u64(item, line)));
    }
    if (out.empty()) throw ConfigError(line, "width list must not be empty");
    return out;
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    cfg.raw_text = text;

    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(line_no, "unterminated section header");
            section = line.substr(1, line.size() - 2);
            if (section != "data" && section != "model" && section != "train" && section != "attack")
                throw ConfigError(line_no, "unknown section [" + section + "]");
            continue;
        }

        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(line_no, "expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) throw ConfigError(line_no, "expected key = value");
        if (section.empty()) throw ConfigError(line_no, "key '" + key + "' outside any section");

        if (section == "data") {
            if (key == "source") {
                if (value == "two_moons") cfg.data.source = DataConfig::Source::two_moons;
                else if (value == "idx") cfg.data.source = DataConfig::Source::idx;
                else if (value == "csv") cfg.data.source = DataConfig::Source::csv;
                else throw ConfigError(line_no, "unknown data source '" + value + "'");
            } else if (key == "n") cfg.data.n = detail::parse_u64(value, line_no);
            else if (key == "noise") cfg.data.noise = detail::parse_double(value, line_no);
            else if (key == "seed") cfg.data.seed = detail::parse_u64(value, line_no);
            else if (key == "images") cfg.data.images = value;
            else if (key == "labels") cfg.data.labels = value;
            else if (key == "path") cfg.data.path = value;
            else if (key == "label_first") cfg.data.label_first = detail::parse_bool(value, line_no);
            else throw ConfigError(line_no, "unknown key '" + key + "' in [data]");
        } else if (section == "model") {
            if (key == "hidden") cfg.model.hidden = detail::parse_width_list(value, line_no);
            else if (key == "controller_hidden")
                cfg.model.controller_hidden = detail::parse_width_list(value, line_no);
            else if (key == "unroll") cfg.model.unroll = detail::parse_u64(value, line_no);
            else if (key == "controller_input") {
                if (value == "predictions_only") cfg.model.mode = ControllerInput::predictions_only;
                else if (value == "features_and_predictions")
                    cfg.model.mode = ControllerInput::features_and_predictions;
                else throw ConfigError(line_no, "unknown controller_input '" + value + "'");
            } else throw ConfigError(line_no, "unknown key '" + key + "' in [model]");
        } else if (section == "train") {
            if (key == "method") {
                if (value == "flat") cfg.train.method = TrainMethod::flat;
                else if (value == "standard_at") cfg.train.method = TrainMethod::standard_at;
                else if (value == "natural") cfg.train.method = TrainMethod::natural;
                else throw ConfigError(line_no, "unknown method '" + value + "'");
            } else if (key == "epochs") cfg.train.epochs = detail::parse_u64(value, line_no);
            else if (key == "batch") cfg.train.batch_size = detail::parse_u64(value, line_no);
            else if (key == "lr") cfg.train.lr = detail::parse_double(value, line_no);
            else if (key == "momentum") cfg.train.momentum = detail::parse_double(value, line_no);
            else if (key == "weight_decay") cfg.train.weight_decay = detail::parse_double(value, line_no);
            else if (key == "lr_break1") cfg.train.lr_break1 = detail::parse_u64(value, line_no);
            else if (key == "lr_break2") cfg.train.lr_break2 = detail::parse_u64(value, line_no);
            else if (key == "seed") cfg.train.seed = detail::parse_u64(value, line_no);
            else if (key == "probe") cfg.train.probe_count = detail::parse_u64(value, line_no);
            else throw ConfigError(line_no, "unknown key '" + key + "' in [train]");
        } else {  // attack
            if (key == "eps") cfg.train.eps = detail::parse_double(value, line_no);
            else if (key == "kappa") cfg.train.kappa = detail::parse_double(value, line_no);
            else if (key == "steps") cfg.train.attack_steps = detail::parse_u64(value, line_no);
            else if (key == "random_start")
                cfg.train.attack_random_start = detail::parse_bool(value, line_no);
            else throw ConfigError(line_no, "unknown key '" + key + "' in [attack]");
        }
    }
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace flatnn
