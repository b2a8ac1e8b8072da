#pragma once

// Training configuration, its TOML serialization, and validation.

#include <sasnet/maskfield.hpp>
#include <sasnet/model.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sasnet::cfg {

struct TrainConfig {
    // optimization
    long steps = 5000;
    double lr_snn = 1e-4;
    double lr_mask = 5e-4;
    double lambda_l1 = 1e-4;
    double lambda_sparse = 0.0;
    double n_mask = 4.0;
    std::string batch = "full";  // "full" | "sampled"
    long batch_size = 8192;      // used when batch == "sampled"
    long eval_every = 100;
    uint64_t seed = 1;

    // model
    bool use_embedding = true;
    bool mask_freq = true;
    bool mask_h1 = true;
    bool mask_h2 = true;
    int embed_width = 400;
    int low_range = 12;
    int band_limit = 60;
    int n_band = 5;
    double low_fraction = 0.5;
    double omega0 = 43.0;
    double hidden_c = 6.0;
    std::vector<int> hidden_widths{116, 116};
    int out_channels = 3;
    int hidden_groups = 8;

    // mask field
    int grid_levels = 10;
    int grid_base = 4;
    int grid_finest = 128;
    int grid_features = 2;
    int grid_table = 512;
    int decoder_hidden = 48;

    // data
    std::string image = "toy";  // "toy" or a PNG path
    int image_size = 256;       // toy size / center-crop target for PNGs
    double margin = 0.95;

    model::ModelConfig model_config() const {
        model::ModelConfig m;
        m.use_embedding = use_embedding;
        m.embed_width = embed_width;
        m.low_range = low_range;
        m.band_limit = band_limit;
        m.n_band = n_band;
        m.low_fraction = low_fraction;
        m.omega0 = omega0;
        m.hidden_c = hidden_c;
        m.hidden_widths = hidden_widths;
        m.out_channels = out_channels;
        m.hidden_groups = hidden_groups;
        m.mask_freq = mask_freq;
        m.mask_h1 = mask_h1;
        m.mask_h2 = mask_h2;
        return m;
    }

    mask::HashGridConfig grid_config() const {
        mask::HashGridConfig g;
        g.levels = grid_levels;
        g.base_resolution = grid_base;
        g.finest_resolution = grid_finest;
        g.feature_dim = grid_features;
        g.table_size = grid_table;
        return g;
    }
};

// Every problem found, so a caller can report them all at once.
inline std::vector<std::string> validate(const TrainConfig& c) {
    std::vector<std::string> errs;
    auto bad = [&](const std::string& field, const std::string& why) {
        errs.push_back(field + ": " + why);
    };
    if (c.steps < 0) bad("steps", "must be >= 0");
    if (c.lr_snn <= 0) bad("lr_snn", "must be > 0");
    if (c.lr_mask <= 0) bad("lr_mask", "must be > 0");
    if (c.lambda_l1 < 0) bad("lambda_l1", "must be >= 0");
    if (c.lambda_sparse < 0) bad("lambda_sparse", "must be >= 0");
    if (c.batch != "full" && c.batch != "sampled") bad("batch", "must be 'full' or 'sampled'");
    if (c.batch == "sampled" && c.batch_size <= 0) bad("batch_size", "must be > 0");
    if (c.eval_every <= 0) bad("eval_every", "must be > 0");
    if (c.embed_width <= 0) bad("embed_width", "must be > 0");
    if (c.use_embedding) {
        if (c.low_range <= 0) bad("low_range", "must be > 0");
        if (c.low_range >= c.band_limit) bad("band_limit", "must exceed low_range");
        if (c.n_band <= 0) bad("n_band", "must be > 0");
        if (c.low_fraction < 0 || c.low_fraction > 1) bad("low_fraction", "must be in [0,1]");
    }
    if (c.omega0 <= 0) bad("omega0", "must be > 0");
    for (int w : c.hidden_widths)
        if (w <= 0) bad("hidden_widths", "entries must be > 0");
    if (c.out_channels <= 0) bad("out_channels", "must be > 0");
    if (c.hidden_groups <= 0) bad("hidden_groups", "must be > 0");
    if (c.grid_levels <= 0) bad("grid_levels", "must be > 0");
    if (c.grid_base <= 0) bad("grid_base", "must be > 0");
    if (c.grid_finest < c.grid_base) bad("grid_finest", "must be >= grid_base");
    if (c.grid_features <= 0) bad("grid_features", "must be > 0");
    if (c.grid_table <= 0) bad("grid_table", "must be > 0");
    if (c.decoder_hidden <= 0) bad("decoder_hidden", "must be > 0");
    if (c.image.empty()) bad("image", "must be 'toy' or a PNG path");
    if (c.image_size <= 0) bad("image_size", "must be > 0");
    if (c.margin <= 0 || c.margin > 1) bad("margin", "must be in (0,1]");
    return errs;
}

// --- flat TOML --------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

}  // namespace detail

// Minimal flat TOML: `key = value` lines, # comments, strings, numbers,
// booleans, and integer arrays. Section headers are rejected.
inline std::map<std::string, std::string> parse_toml(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        // strip comments outside of strings
        bool in_str = false;
        for (size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') in_str = !in_str;
            if (line[i] == '#' && !in_str) {
                line = line.substr(0, i);
                break;
            }
        }
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[')
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": sections are not supported; use flat keys");
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        std::string key = detail::trim(line.substr(0, eq));
        std::string val = detail::trim(line.substr(eq + 1));
        if (key.empty() || val.empty())
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": empty key or value");
        if (kv.count(key))
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": duplicate key '" + key + "'");
        kv[key] = val;
    }
    return kv;
}

namespace detail {

inline std::string unquote(const std::string& key, const std::string& v) {
    if (v.size() < 2 || v.front() != '"' || v.back() != '"')
        throw std::invalid_argument(key + ": expected a quoted string, got " + v);
    return v.substr(1, v.size() - 2);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw std::invalid_argument(key + ": expected true/false, got " + v);
}

inline double parse_num(const std::string& key, const std::string& v) {
    size_t pos = 0;
    double d;
    try {
        d = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument(key + ": expected a number, got " + v);
    }
    if (pos != v.size()) throw std::invalid_argument(key + ": trailing junk in " + v);
    return d;
}

inline std::vector<int> parse_int_array(const std::string& key, const std::string& v) {
    if (v.size() < 2 || v.front() != '[' || v.back() != ']')
        throw std::invalid_argument(key + ": expected an array like [1, 2]");
    std::vector<int> out;
    std::string body = v.substr(1, v.size() - 2);
    std::istringstream in(body);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(static_cast<int>(parse_num(key, item)));
    }
    return out;
}

}  // namespace detail

inline TrainConfig config_from_toml(const std::string& text) {
    auto kv = parse_toml(text);
    TrainConfig c;
    auto take = [&](const std::string& key) -> const std::string* {
        auto it = kv.find(key);
        if (it == kv.end()) return nullptr;
        return &it->second;
    };
    auto num = [&](const std::string& key, auto& field) {
        if (auto* v = take(key)) field = static_cast<std::decay_t<decltype(field)>>(
                                     detail::parse_num(key, *v));
    };
    auto flag = [&](const std::string& key, bool& field) {
        if (auto* v = take(key)) field = detail::parse_bool(key, *v);
    };
    num("steps", c.steps);
    num("lr_snn", c.lr_snn);
    num("lr_mask", c.lr_mask);
    num("lambda_l1", c.lambda_l1);
    num("lambda_sparse", c.lambda_sparse);
    num("n_mask", c.n_mask);
    if (auto* v = take("batch")) c.batch = detail::unquote("batch", *v);
    num("batch_size", c.batch_size);
    num("eval_every", c.eval_every);
    num("seed", c.seed);
    flag("use_embedding", c.use_embedding);
    flag("mask_freq", c.mask_freq);
    flag("mask_h1", c.mask_h1);
    flag("mask_h2", c.mask_h2);
    num("embed_width", c.embed_width);
    num("low_range", c.low_range);
    num("band_limit", c.band_limit);
    num("n_band", c.n_band);
    num("low_fraction", c.low_fraction);
    num("omega0", c.omega0);
    num("hidden_c", c.hidden_c);
    if (auto* v = take("hidden_widths"))
        c.hidden_widths = detail::parse_int_array("hidden_widths", *v);
    num("out_channels", c.out_channels);
    num("hidden_groups", c.hidden_groups);
    num("grid_levels", c.grid_levels);
    num("grid_base", c.grid_base);
    num("grid_finest", c.grid_finest);
    num("grid_features", c.grid_features);
    num("grid_table", c.grid_table);
    num("decoder_hidden", c.decoder_hidden);
    if (auto* v = take("image")) c.image = detail::unquote("image", *v);
    num("image_size", c.image_size);
    num("margin", c.margin);

    static const char* known[] = {
        "steps",        "lr_snn",      "lr_mask",      "lambda_l1",    "lambda_sparse",
        "n_mask",       "batch",       "batch_size",   "eval_every",   "seed",
        "use_embedding", "mask_freq",  "mask_h1",      "mask_h2",      "embed_width",
        "low_range",    "band_limit",  "n_band",       "low_fraction", "omega0",
        "hidden_c",     "hidden_widths", "out_channels", "hidden_groups", "grid_levels",
        "grid_base",    "grid_finest", "grid_features", "grid_table",  "decoder_hidden",
        "image",        "image_size",  "margin"};
    for (const auto& [key, val] : kv) {
        (void)val;
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw std::invalid_argument("unknown config key '" + key + "'");
    }
    return c;
}

inline std::string config_to_toml(const TrainConfig& c) {
    std::ostringstream os;
    os.precision(17);
    os << "steps = " << c.steps << "\n"
       << "lr_snn = " << c.lr_snn << "\n"
       << "lr_mask = " << c.lr_mask << "\n"
       << "lambda_l1 = " << c.lambda_l1 << "\n"
       << "lambda_sparse = " << c.lambda_sparse << "\n"
       << "n_mask = " << c.n_mask << "\n"
       << "batch = \"" << c.batch << "\"\n"
       << "batch_size = " << c.batch_size << "\n"
       << "eval_every = " << c.eval_every << "\n"
       << "seed = " << c.seed << "\n"
       << "use_embedding = " << (c.use_embedding ? "true" : "false") << "\n"
       << "mask_freq = " << (c.mask_freq ? "true" : "false") << "\n"
       << "mask_h1 = " << (c.mask_h1 ? "true" : "false") << "\n"
       << "mask_h2 = " << (c.mask_h2 ? "true" : "false") << "\n"
       << "embed_width = " << c.embed_width << "\n"
       << "low_range = " << c.low_range << "\n"
       << "band_limit = " << c.band_limit << "\n"
       << "n_band = " << c.n_band << "\n"
       << "low_fraction = " << c.low_fraction << "\n"
       << "omega0 = " << c.omega0 << "\n"
       << "hidden_c = " << c.hidden_c << "\n";
    os << "hidden_widths = [";
    for (size_t i = 0; i < c.hidden_widths.size(); ++i)
        os << (i ? ", " : "") << c.hidden_widths[i];
    os << "]\n";
    os << "out_channels = " << c.out_channels << "\n"
       << "hidden_groups = " << c.hidden_groups << "\n"
       << "grid_levels = " << c.grid_levels << "\n"
       << "grid_base = " << c.grid_base << "\n"
       << "grid_finest = " << c.grid_finest << "\n"
       << "grid_features = " << c.grid_features << "\n"
       << "grid_table = " << c.grid_table << "\n"
       << "decoder_hidden = " << c.decoder_hidden << "\n"
       << "image = \"" << c.image << "\"\n"
       << "image_size = " << c.image_size << "\n"
       << "margin = " << c.margin << "\n";
    return os.str();
}

inline TrainConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return config_from_toml(ss.str());
}

}  // namespace sasnet::cfg
