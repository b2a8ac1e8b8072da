#pragma once

// The SASNet/SIREN forward model: frozen frequency embedding (or a SIREN
// first layer), masked hidden sine layers, linear output head, analytic
// spatial derivatives, and per-neuron contribution maps.

#include <sasnet/autodiff.hpp>
#include <sasnet/frequency.hpp>
#include <sasnet/maskfield.hpp>

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace sasnet::model {

using ad::Mat;
using ad::Tensor;

struct SirenInitConfig {
    double omega0 = 43.0;
    double hidden_c = 6.0;
};

struct SineLayer {
    Tensor W;  // in x out
    Tensor b;  // 1 x out
    bool trainable = true;
};

// First layer of the SIREN baseline: W ~ U(-1/n, 1/n), forward sin(omega0*(xW+b)).
// Hidden layers and head: W ~ U(-sqrt(c/n), sqrt(c/n)) / omega0, with the
// omega0 factor reapplied in the hidden forward pass. The scales cancel at
// initialization, but keeping the reference parameterization matters for
// optimization: an adaptive-step update of size lr moves the effective hidden
// weight by omega0*lr, so folding the factor away slows hidden-layer training
// by omega0. Bias ~ U(-1/sqrt(n), 1/sqrt(n)) throughout.
inline SineLayer siren_init(int fan_in, int fan_out, const SirenInitConfig& cfg,
                            bool first_layer, std::mt19937_64& rng,
                            const std::string& name) {
    if (fan_in <= 0) throw std::invalid_argument("siren_init: fan_in must be positive");
    const double wbound =
        first_layer ? 1.0 / fan_in : std::sqrt(cfg.hidden_c / fan_in) / cfg.omega0;
    const double bbound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> wu(-wbound, wbound), bu(-bbound, bbound);
    Mat W(fan_in, fan_out), b(1, fan_out);
    for (long i = 0; i < W.rows(); ++i)
        for (long j = 0; j < W.cols(); ++j) W(i, j) = wu(rng);
    for (long j = 0; j < b.cols(); ++j) b(0, j) = bu(rng);
    SineLayer layer;
    layer.W = ad::make_leaf(std::move(W), true, name + ".W");
    layer.b = ad::make_leaf(std::move(b), true, name + ".b");
    return layer;
}

struct ModelConfig {
    bool use_embedding = true;
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
    // per-layer mask toggles: first layer, then one per hidden layer
    bool mask_freq = true;
    bool mask_h1 = true;
    bool mask_h2 = true;
};

struct SasnetModel {
    ModelConfig cfg;
    freq::FrequencyEmbedding embedding;  // frozen; valid when cfg.use_embedding
    SineLayer first;                     // valid when !cfg.use_embedding
    std::vector<SineLayer> hidden;
    SineLayer head;  // affine output, no activation

    // mask structure, indexed by maskable layer (0 = first/embedding, then hidden)
    std::vector<bool> layer_masked;
    std::vector<std::vector<int>> group_map;          // neuron -> group, masked layers
    std::vector<mask::MaskAssembly> assemblies;       // group -> learned channel / fixed
    int learned_channels = 0;

    int n_mask_layers() const { return 1 + static_cast<int>(hidden.size()); }
    int layer_width(int i) const {
        if (i == 0) return cfg.use_embedding ? embedding.width() : static_cast<int>(first.W->cols());
        return static_cast<int>(hidden[i - 1].W->cols());
    }
    bool any_masked() const {
        for (bool m : layer_masked)
            if (m) return true;
        return false;
    }

    std::vector<Tensor> trainable_params() const {
        std::vector<Tensor> p;
        if (!cfg.use_embedding) {
            p.push_back(first.W);
            p.push_back(first.b);
        }
        for (const auto& h : hidden) {
            p.push_back(h.W);
            p.push_back(h.b);
        }
        p.push_back(head.W);
        p.push_back(head.b);
        return p;
    }

    long trainable_param_count() const {
        long n = 0;
        for (const auto& p : trainable_params()) n += p->val.size();
        return n;
    }
    long frozen_param_count() const {
        if (!cfg.use_embedding) return 0;
        return embedding.multipliers.size() + embedding.phases.size();
    }
};

// Deterministic per-purpose RNG streams derived from one seed.
inline std::mt19937_64 seed_stream(uint64_t seed, uint64_t stream) {
    return std::mt19937_64(seed * 0x9E3779B97F4A7C15ull + stream * 0xD1B54A32D192ED03ull + 1);
}

inline SasnetModel build_model(const ModelConfig& cfg, uint64_t seed) {
    SasnetModel m;
    m.cfg = cfg;
    SirenInitConfig init{cfg.omega0, cfg.hidden_c};

    int prev_width;
    if (cfg.use_embedding) {
        auto krng = seed_stream(seed, 1);
        auto sample = freq::sample_multipliers(cfg.embed_width, cfg.low_range, cfg.band_limit,
                                               cfg.low_fraction, cfg.n_band, krng);
        auto prng = seed_stream(seed, 2);
        m.embedding =
            freq::build_embedding(sample, cfg.low_range, cfg.band_limit, cfg.n_band, M_PI, prng);
        prev_width = cfg.embed_width;
    } else {
        auto frng = seed_stream(seed, 3);
        m.first = siren_init(2, cfg.embed_width, init, true, frng, "first");
        prev_width = cfg.embed_width;
    }

    for (size_t i = 0; i < cfg.hidden_widths.size(); ++i) {
        auto hrng = seed_stream(seed, 4 + i);
        m.hidden.push_back(siren_init(prev_width, cfg.hidden_widths[i], init, false, hrng,
                                      "hidden" + std::to_string(i + 1)));
        prev_width = cfg.hidden_widths[i];
    }
    auto orng = seed_stream(seed, 20);
    m.head = siren_init(prev_width, cfg.out_channels, init, false, orng, "head");

    // mask layout: decoder channels ordered embedding bands (ascending), then
    // hidden layer groups in layer order; the low band channel is fixed to 1
    std::vector<bool> flags{cfg.mask_freq};
    if (!cfg.hidden_widths.empty()) flags.push_back(cfg.mask_h1);
    if (cfg.hidden_widths.size() >= 2) flags.push_back(cfg.mask_h2);
    flags.resize(1 + cfg.hidden_widths.size(), false);

    int ch = 0;
    for (int layer = 0; layer < m.n_mask_layers(); ++layer) {
        const bool masked = flags[layer];
        m.layer_masked.push_back(masked);
        if (!masked) {
            m.group_map.emplace_back();
            m.assemblies.emplace_back();
            continue;
        }
        if (layer == 0 && cfg.use_embedding) {
            m.group_map.push_back(m.embedding.group_of);
            mask::MaskAssembly a;
            a.channels.push_back(-1);  // low band fixed to one
            for (int g = 1; g <= cfg.n_band; ++g) a.channels.push_back(ch++);
            m.assemblies.push_back(std::move(a));
        } else {
            m.group_map.push_back(mask::even_group_map(m.layer_width(layer), cfg.hidden_groups));
            mask::MaskAssembly a;
            for (int g = 0; g < cfg.hidden_groups; ++g) a.channels.push_back(ch++);
            m.assemblies.push_back(std::move(a));
        }
    }
    m.learned_channels = ch;
    return m;
}

// --- forward ----------------------------------------------------------------

// layer_masks: per maskable layer, an N x G tensor (empty Tensor for unmasked
// layers). Masks apply post-activation via group broadcast and Hadamard.
inline Tensor forward(const SasnetModel& m, const Mat& coords,
                      const std::vector<Tensor>& layer_masks = {}) {
    if (coords.cols() != 2)
        throw std::invalid_argument("forward: coords must be N x 2");
    auto mask_of = [&](int layer) -> Tensor {
        if (layer >= static_cast<int>(layer_masks.size())) return nullptr;
        return layer_masks[layer];
    };
    auto apply_mask = [&](Tensor h, int layer) -> Tensor {
        Tensor lm = mask_of(layer);
        if (!m.layer_masked[layer]) {
            if (lm)
                throw std::invalid_argument("forward: mask supplied for unmasked layer " +
                                            std::to_string(layer));
            return h;
        }
        if (!lm)
            throw std::invalid_argument("forward: missing mask for layer " +
                                        std::to_string(layer));
        if (lm->cols() != static_cast<long>(m.assemblies[layer].channels.size()))
            throw std::invalid_argument(
                "forward: mask channel count " + std::to_string(lm->cols()) +
                " does not match group arity " +
                std::to_string(m.assemblies[layer].channels.size()) + " of layer " +
                std::to_string(layer));
        return ad::hadamard(mask::broadcast_to_neurons(lm, m.group_map[layer]), h);
    };

    Tensor cur;
    if (m.cfg.use_embedding) {
        cur = ad::constant(m.embedding.activations(coords));
    } else {
        auto x = ad::constant(coords);
        cur = ad::sin_(ad::scale(ad::add_rowvec(ad::matmul(x, m.first.W), m.first.b),
                                 m.cfg.omega0));
    }
    cur = apply_mask(cur, 0);
    for (size_t i = 0; i < m.hidden.size(); ++i) {
        cur = ad::sin_(ad::scale(ad::add_rowvec(ad::matmul(cur, m.hidden[i].W), m.hidden[i].b),
                                 m.cfg.omega0));
        cur = apply_mask(cur, static_cast<int>(i) + 1);
    }
    return ad::add_rowvec(ad::matmul(cur, m.head.W), m.head.b);
}

// --- analytic spatial derivatives -------------------------------------------

struct SpatialEval {
    Mat output;      // N x C
    Mat doutput_dx;  // N x C
    Mat doutput_dy;
};

// Exact derivative of the composed function. Mask values and their spatial
// gradients (per maskable layer) come from the mask field; pass an empty
// vector for a fully unmasked model.
inline SpatialEval forward_with_gradient(const SasnetModel& m, const Mat& coords,
                                         const std::vector<mask::LayerMaskEval>& layer_masks = {}) {
    const long n = coords.rows();
    Mat cur, dx, dy;

    auto apply_mask = [&](int layer) {
        if (!m.layer_masked[layer]) return;
        if (layer >= static_cast<int>(layer_masks.size()))
            throw std::invalid_argument("forward_with_gradient: missing mask for layer " +
                                        std::to_string(layer));
        const auto& lm = layer_masks[layer];
        Mat mv = mask::broadcast_to_neurons(lm.masks, m.group_map[layer]);
        Mat mdx = mask::broadcast_to_neurons(lm.dmask_dx, m.group_map[layer]);
        Mat mdy = mask::broadcast_to_neurons(lm.dmask_dy, m.group_map[layer]);
        dx = mv.cwiseProduct(dx) + mdx.cwiseProduct(cur);  // product rule
        dy = mv.cwiseProduct(dy) + mdy.cwiseProduct(cur);
        cur = mv.cwiseProduct(cur);
    };

    if (m.cfg.use_embedding) {
        Mat arg = m.embedding.arguments(coords);
        Mat carg = arg.array().cos().matrix();
        cur = arg.array().sin().matrix();
        dx.resize(n, cur.cols());
        dy.resize(n, cur.cols());
        for (long j = 0; j < cur.cols(); ++j) {
            dx.col(j) = m.embedding.base_freq * m.embedding.multipliers(j, 0) * carg.col(j);
            dy.col(j) = m.embedding.base_freq * m.embedding.multipliers(j, 1) * carg.col(j);
        }
    } else {
        Mat z = m.cfg.omega0 * ((coords * m.first.W->val).rowwise() + m.first.b->val.row(0));
        Mat cz = z.array().cos().matrix();
        cur = z.array().sin().matrix();
        dx.resize(n, cur.cols());
        dy.resize(n, cur.cols());
        for (long j = 0; j < cur.cols(); ++j) {
            dx.col(j) = m.cfg.omega0 * m.first.W->val(0, j) * cz.col(j);
            dy.col(j) = m.cfg.omega0 * m.first.W->val(1, j) * cz.col(j);
        }
    }
    apply_mask(0);

    for (size_t i = 0; i < m.hidden.size(); ++i) {
        const Mat& W = m.hidden[i].W->val;
        Mat z = m.cfg.omega0 * (((cur * W).rowwise() + m.hidden[i].b->val.row(0)));
        Mat cz = z.array().cos().matrix();
        dx = m.cfg.omega0 * cz.cwiseProduct((dx * W).eval());
        dy = m.cfg.omega0 * cz.cwiseProduct((dy * W).eval());
        cur = z.array().sin().matrix();
        apply_mask(static_cast<int>(i) + 1);
    }

    SpatialEval out;
    out.output = (cur * m.head.W->val).rowwise() + m.head.b->val.row(0);
    out.doutput_dx = dx * m.head.W->val;
    out.doutput_dy = dy * m.head.W->val;
    return out;
}

// --- contribution maps ------------------------------------------------------

// Per neuron of layer i (0 = first/embedding, 1.. = hidden before the last):
// map(x) = masked activation times the sum of its outgoing weights. The
// output head has no outgoing weights, so only layers 0..hidden-1 are valid.
inline std::vector<Mat> contribution_maps(const SasnetModel& m, const Mat& coords,
                                          const std::vector<mask::LayerMaskEval>& layer_masks = {}) {
    // reuse the plain forward to collect masked activations
    const long n = coords.rows();
    std::vector<Mat> activations;
    Mat cur;
    if (m.cfg.use_embedding)
        cur = m.embedding.activations(coords);
    else
        cur = (m.cfg.omega0 *
               ((coords * m.first.W->val).rowwise() + m.first.b->val.row(0)))
                  .array()
                  .sin()
                  .matrix();
    auto apply_mask = [&](int layer) {
        if (!m.layer_masked[layer]) return;
        const auto& lm = layer_masks.at(layer);
        cur = mask::broadcast_to_neurons(lm.masks, m.group_map[layer]).cwiseProduct(cur);
    };
    apply_mask(0);
    activations.push_back(cur);
    for (size_t i = 0; i < m.hidden.size(); ++i) {
        cur = (m.cfg.omega0 *
               ((cur * m.hidden[i].W->val).rowwise() + m.hidden[i].b->val.row(0)))
                  .array()
                  .sin()
                  .matrix();
        apply_mask(static_cast<int>(i) + 1);
        activations.push_back(cur);
    }

    std::vector<Mat> maps;
    for (size_t layer = 0; layer < activations.size(); ++layer) {
        const Mat& next_w =
            layer + 1 < activations.size() ? m.hidden[layer].W->val : m.head.W->val;
        Eigen::RowVectorXd outgoing = next_w.rowwise().sum().transpose();
        Mat map(n, activations[layer].cols());
        for (long j = 0; j < map.cols(); ++j)
            map.col(j) = activations[layer].col(j) * outgoing(j);
        maps.push_back(std::move(map));
    }
    return maps;
}

}  // namespace sasnet::model
