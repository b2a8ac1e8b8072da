#pragma once

// Multiresolution hash grid + shared ReLU/sigmoid decoder producing the
// spatially-adaptive group masks, with both tape-backed evaluation (for
// training) and plain evaluation with analytic spatial gradients (for
// metrics).

#include <sasnet/autodiff.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace sasnet::mask {

using ad::Mat;
using ad::Tensor;

struct HashGridConfig {
    int levels = 10;
    int base_resolution = 4;
    int finest_resolution = 128;
    int feature_dim = 2;
    int table_size = 512;
};

inline std::vector<int> level_resolutions(const HashGridConfig& cfg) {
    std::vector<int> res(cfg.levels);
    const double growth =
        cfg.levels > 1 ? std::pow(double(cfg.finest_resolution) / cfg.base_resolution,
                                  1.0 / (cfg.levels - 1))
                       : 1.0;
    for (int l = 0; l < cfg.levels; ++l)
        res[l] =
            static_cast<int>(std::floor(cfg.base_resolution * std::pow(growth, l) + 1e-9));
    return res;
}

struct HashGrid {
    HashGridConfig cfg;
    std::vector<int> resolutions;
    std::vector<Tensor> tables;  // per level: entries x feature_dim, trainable

    int feature_width() const { return cfg.levels * cfg.feature_dim; }

    bool dense(int level) const {
        const long r = resolutions[level] + 1;
        return r * r <= cfg.table_size;
    }

    // Vertex -> table slot. Dense levels index injectively; the rest use the
    // multiresolution-hash-encoding spatial hash.
    int slot(int level, int vx, int vy) const {
        if (dense(level)) return vy * (resolutions[level] + 1) + vx;
        const uint32_t h = static_cast<uint32_t>(vx) ^ (static_cast<uint32_t>(vy) * 2654435761u);
        return static_cast<int>(h % static_cast<uint32_t>(cfg.table_size));
    }

    static HashGrid create(const HashGridConfig& cfg, std::mt19937_64& rng) {
        HashGrid g;
        g.cfg = cfg;
        g.resolutions = level_resolutions(cfg);
        std::uniform_real_distribution<double> u(-1e-4, 1e-4);
        for (int l = 0; l < cfg.levels; ++l) {
            const long r = g.resolutions[l] + 1;
            const long entries = std::min<long>(r * r, cfg.table_size);
            Mat t(entries, cfg.feature_dim);
            for (long i = 0; i < entries; ++i)
                for (int f = 0; f < cfg.feature_dim; ++f) t(i, f) = u(rng);
            g.tables.push_back(ad::make_leaf(std::move(t), true,
                                             "grid.level" + std::to_string(l) + ".table"));
        }
        return g;
    }
};

// Precomputed bilinear corner indices/weights per level, plus the spatial
// derivatives of the weights (the per-cell linear form).
struct InterpPlan {
    std::vector<Eigen::MatrixXi> indices;  // per level: N x 4
    std::vector<Mat> weights;              // per level: N x 4
    std::vector<Mat> dweights_dx;          // per level: N x 4
    std::vector<Mat> dweights_dy;
    long n = 0;
};

inline InterpPlan plan_interpolation(const HashGrid& grid, const Mat& coords) {
    if (coords.cols() != 2)
        throw std::invalid_argument("plan_interpolation: coords must be N x 2");
    InterpPlan plan;
    plan.n = coords.rows();
    for (int l = 0; l < grid.cfg.levels; ++l) {
        const int res = grid.resolutions[l];
        Eigen::MatrixXi idx(plan.n, 4);
        Mat w(plan.n, 4), dwx(plan.n, 4), dwy(plan.n, 4);
        for (long i = 0; i < plan.n; ++i) {
            // out-of-range coordinates clamp to the domain boundary
            auto locate = [&](double x, double& frac, int& cell, double& dpos) {
                const double clamped = std::clamp(x, -1.0, 1.0);
                dpos = (x == clamped) ? res / 2.0 : 0.0;
                const double p = (clamped + 1.0) * 0.5 * res;
                cell = std::min(static_cast<int>(std::floor(p)), res - 1);
                frac = p - cell;
            };
            double fx, fy, dpx, dpy;
            int cx, cy;
            locate(coords(i, 0), fx, cx, dpx);
            locate(coords(i, 1), fy, cy, dpy);
            idx(i, 0) = grid.slot(l, cx, cy);
            idx(i, 1) = grid.slot(l, cx + 1, cy);
            idx(i, 2) = grid.slot(l, cx, cy + 1);
            idx(i, 3) = grid.slot(l, cx + 1, cy + 1);
            w(i, 0) = (1 - fx) * (1 - fy);
            w(i, 1) = fx * (1 - fy);
            w(i, 2) = (1 - fx) * fy;
            w(i, 3) = fx * fy;
            dwx(i, 0) = -(1 - fy) * dpx;
            dwx(i, 1) = (1 - fy) * dpx;
            dwx(i, 2) = -fy * dpx;
            dwx(i, 3) = fy * dpx;
            dwy(i, 0) = -(1 - fx) * dpy;
            dwy(i, 1) = -fx * dpy;
            dwy(i, 2) = (1 - fx) * dpy;
            dwy(i, 3) = fx * dpy;
        }
        plan.indices.push_back(std::move(idx));
        plan.weights.push_back(std::move(w));
        plan.dweights_dx.push_back(std::move(dwx));
        plan.dweights_dy.push_back(std::move(dwy));
    }
    return plan;
}

// Tape-backed feature interpolation: concatenation across levels, coarse to fine.
inline Tensor interpolate_features(const HashGrid& grid, const InterpPlan& plan) {
    std::vector<Tensor> parts;
    for (int l = 0; l < grid.cfg.levels; ++l)
        parts.push_back(ad::weighted_gather(grid.tables[l], plan.indices[l], plan.weights[l]));
    return ad::concat_cols(parts);
}

// Plain evaluation plus spatial derivatives of the feature vector.
struct FeatureEval {
    Mat features;  // N x (levels * feature_dim)
    Mat dfeat_dx;
    Mat dfeat_dy;
};

inline FeatureEval interpolate_features_with_gradient(const HashGrid& grid,
                                                      const InterpPlan& plan) {
    FeatureEval out;
    const int fd = grid.cfg.feature_dim;
    out.features = Mat::Zero(plan.n, grid.feature_width());
    out.dfeat_dx = Mat::Zero(plan.n, grid.feature_width());
    out.dfeat_dy = Mat::Zero(plan.n, grid.feature_width());
    for (int l = 0; l < grid.cfg.levels; ++l) {
        const Mat& table = grid.tables[l]->val;
        for (long i = 0; i < plan.n; ++i)
            for (int c = 0; c < 4; ++c) {
                const auto row = table.row(plan.indices[l](i, c));
                out.features.block(i, l * fd, 1, fd) += plan.weights[l](i, c) * row;
                out.dfeat_dx.block(i, l * fd, 1, fd) += plan.dweights_dx[l](i, c) * row;
                out.dfeat_dy.block(i, l * fd, 1, fd) += plan.dweights_dy[l](i, c) * row;
            }
    }
    return out;
}

struct MaskDecoder {
    Tensor W1, b1;  // feature_width x hidden, 1 x hidden
    Tensor W2, b2;  // hidden x learned_channels, 1 x learned_channels
    int hidden_width = 48;
    int learned_channels = 0;

    static MaskDecoder create(int in_dim, int hidden, int learned_channels,
                              std::mt19937_64& rng) {
        if (learned_channels < 0)
            throw std::invalid_argument("MaskDecoder: negative channel count");
        MaskDecoder d;
        d.hidden_width = hidden;
        d.learned_channels = learned_channels;
        std::uniform_real_distribution<double> glorot(
            -std::sqrt(6.0 / (in_dim + hidden)), std::sqrt(6.0 / (in_dim + hidden)));
        Mat w1(in_dim, hidden);
        for (long i = 0; i < w1.size(); ++i) w1.data()[i] = glorot(rng);
        d.W1 = ad::make_leaf(std::move(w1), true, "dec.W1");
        d.b1 = ad::make_leaf(Mat::Zero(1, hidden), true, "dec.b1");
        // near-zero head so sigmoid outputs start around 0.5
        std::uniform_real_distribution<double> tiny(-1e-4, 1e-4);
        Mat w2(hidden, learned_channels);
        for (long i = 0; i < w2.size(); ++i) w2.data()[i] = tiny(rng);
        d.W2 = ad::make_leaf(std::move(w2), true, "dec.W2");
        d.b2 = ad::make_leaf(Mat::Zero(1, learned_channels), true, "dec.b2");
        return d;
    }
};

// Tape-backed decode of the learned channels; values in (0,1).
inline Tensor decode_masks(const Tensor& features, const MaskDecoder& dec) {
    auto hidden = ad::relu(ad::add_rowvec(ad::matmul(features, dec.W1), dec.b1));
    return ad::sigmoid(ad::add_rowvec(ad::matmul(hidden, dec.W2), dec.b2));
}

struct MaskEval {
    Mat masks;     // N x learned_channels
    Mat dmask_dx;  // same shape
    Mat dmask_dy;
};

// Plain decode with exact chain rule through sigmoid o relu-MLP o bilinear.
inline MaskEval decode_masks_with_gradient(const FeatureEval& feat, const MaskDecoder& dec) {
    MaskEval out;
    Mat z1 = (feat.features * dec.W1->val).rowwise() + dec.b1->val.row(0);
    Mat relu_gate = (z1.array() > 0.0).cast<double>();
    Mat a1 = z1.cwiseProduct(relu_gate);
    Mat z2 = (a1 * dec.W2->val).rowwise() + dec.b2->val.row(0);
    Mat s = (1.0 / (1.0 + (-z2.array()).exp())).matrix();
    out.masks = s;
    Mat sig_prime = s.array() * (1.0 - s.array());
    auto chain = [&](const Mat& dfeat) -> Mat {
        Mat dz1 = dfeat * dec.W1->val;
        Mat dz2 = dz1.cwiseProduct(relu_gate) * dec.W2->val;
        return sig_prime.cwiseProduct(dz2);
    };
    out.dmask_dx = chain(feat.dfeat_dx);
    out.dmask_dy = chain(feat.dfeat_dy);
    return out;
}

// Per-layer mask assembly: channel -1 is hard-wired to 1 (fixed, excluded
// from gradients), otherwise an index into the learned channel block.
struct MaskAssembly {
    std::vector<int> channels;
};

inline Tensor assemble_layer_masks(const Tensor& learned, const MaskAssembly& assembly) {
    std::vector<Tensor> cols;
    for (int ch : assembly.channels) {
        if (ch < 0)
            cols.push_back(ad::constant(Mat::Ones(learned->rows(), 1)));
        else
            cols.push_back(ad::slice_cols(learned, ch, 1));
    }
    return ad::concat_cols(cols);
}

struct LayerMaskEval {
    Mat masks;
    Mat dmask_dx;
    Mat dmask_dy;
};

inline LayerMaskEval assemble_layer_masks_plain(const MaskEval& learned,
                                                const MaskAssembly& assembly) {
    LayerMaskEval out;
    const long n = learned.masks.rows();
    const long g = static_cast<long>(assembly.channels.size());
    out.masks = Mat::Ones(n, g);
    out.dmask_dx = Mat::Zero(n, g);
    out.dmask_dy = Mat::Zero(n, g);
    for (long j = 0; j < g; ++j) {
        const int ch = assembly.channels[j];
        if (ch < 0) continue;  // fixed channel: exactly 1, zero gradient
        out.masks.col(j) = learned.masks.col(ch);
        out.dmask_dx.col(j) = learned.dmask_dx.col(ch);
        out.dmask_dy.col(j) = learned.dmask_dy.col(ch);
    }
    return out;
}

// Group broadcast: neuron j receives the mask channel of its group.
inline Mat broadcast_to_neurons(const Mat& layer_masks, const std::vector<int>& group_map) {
    Mat out(layer_masks.rows(), static_cast<long>(group_map.size()));
    for (size_t j = 0; j < group_map.size(); ++j) {
        if (group_map[j] < 0 || group_map[j] >= layer_masks.cols())
            throw std::invalid_argument("broadcast_to_neurons: neuron " + std::to_string(j) +
                                        " maps to missing group " +
                                        std::to_string(group_map[j]));
        out.col(j) = layer_masks.col(group_map[j]);
    }
    return out;
}

// Tape-backed group broadcast; backward sums neuron gradients per group.
inline Tensor broadcast_to_neurons(const Tensor& layer_masks, std::vector<int> group_map) {
    for (size_t j = 0; j < group_map.size(); ++j)
        if (group_map[j] < 0 || group_map[j] >= layer_masks->cols())
            throw std::invalid_argument("broadcast_to_neurons: neuron " + std::to_string(j) +
                                        " maps to missing group " +
                                        std::to_string(group_map[j]));
    Mat v(layer_masks->rows(), static_cast<long>(group_map.size()));
    for (size_t j = 0; j < group_map.size(); ++j) v.col(j) = layer_masks->val.col(group_map[j]);
    return ad::detail::make_op(std::move(v), {layer_masks},
                               [layer_masks, group_map = std::move(group_map)](ad::Node& out) {
                                   if (!layer_masks->requires_grad) return;
                                   layer_masks->ensure_grad();
                                   for (size_t j = 0; j < group_map.size(); ++j)
                                       layer_masks->grad.col(group_map[j]) += out.grad.col(j);
                               });
}

// Even split of `width` neurons into `groups` groups; sizes differ by at most 1.
inline std::vector<int> even_group_map(int width, int groups) {
    std::vector<int> map(width);
    for (int j = 0; j < width; ++j)
        map[j] = static_cast<int>((static_cast<long>(j) * groups) / width);
    return map;
}

}  // namespace sasnet::mask
