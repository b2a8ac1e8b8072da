#pragma once

// The joint optimization loop: loss assembly, two Adam parameter groups
// (network vs. mask field), periodic metric evaluation, and binary
// checkpoints that restore bit-identical training trajectories.

#include <sasnet/config.hpp>
#include <sasnet/image.hpp>
#include <sasnet/maskfield.hpp>
#include <sasnet/metrics.hpp>
#include <sasnet/model.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sasnet::train {

using ad::Mat;
using ad::Tensor;

// --- loss -------------------------------------------------------------------

struct LossParts {
    Tensor total;        // scalar node on the tape
    double mse = 0.0;    // reported components (plain values)
    double l1 = 0.0;
    double sparse = 0.0;
};

// learned: N x G_total learned mask channels (nullptr when nothing is masked);
// layer_ranges: per masked layer, the [start, len) slice of learned columns.
// L1 = (1/N) sum of all learned channels; Lsparse = per layer and coordinate,
// max(sum_g M_g - n_mask, 0), summed. Fixed channels never enter either term.
inline LossParts loss(const Tensor& pred, const Mat& gt, const Tensor& learned,
                      const std::vector<std::pair<long, long>>& layer_ranges,
                      double lambda_l1, double lambda_sparse, double n_mask) {
    if (pred->rows() != gt.rows() || pred->cols() != gt.cols())
        throw std::invalid_argument("loss: prediction/target shape mismatch");
    LossParts parts;
    Tensor mse = ad::mean(ad::square(ad::sub(pred, ad::constant(gt))));
    parts.mse = mse->val(0, 0);
    parts.total = mse;

    if (learned) {
        const double n = static_cast<double>(learned->rows());
        parts.l1 = learned->val.sum() / n;
        if (lambda_l1 > 0.0) {
            Tensor l1 = ad::scale(ad::sum(learned), 1.0 / n);
            parts.total = ad::add(parts.total, ad::scale(l1, lambda_l1));
        }
        for (auto [start, len] : layer_ranges) {
            if (len == 0) continue;
            Mat excess = (learned->val.middleCols(start, len).rowwise().sum().array() - n_mask)
                             .cwiseMax(0.0);
            parts.sparse += excess.sum();
        }
        if (lambda_sparse > 0.0) {
            Tensor sp;
            for (auto [start, len] : layer_ranges) {
                if (len == 0) continue;
                Tensor hinge = ad::relu(
                    ad::add_const(ad::rowsum(ad::slice_cols(learned, start, len)), -n_mask));
                Tensor s = ad::sum(hinge);
                sp = sp ? ad::add(sp, s) : s;
            }
            if (sp) parts.total = ad::add(parts.total, ad::scale(sp, lambda_sparse));
        }
    }
    return parts;
}

// --- session ----------------------------------------------------------------

// Everything a run owns: parameters, optimizers, and the batch RNG.
struct Session {
    cfg::TrainConfig config;
    model::SasnetModel net;
    mask::HashGrid grid;        // populated only when any layer is masked
    mask::MaskDecoder decoder;
    ad::Adam opt_snn;
    ad::Adam opt_mask;          // empty group when nothing is masked
    std::mt19937_64 batch_rng;
    long step = 0;

    bool has_masks() const { return net.any_masked(); }

    std::vector<Tensor> mask_params() const {
        std::vector<Tensor> p;
        if (!has_masks()) return p;
        for (const auto& t : grid.tables) p.push_back(t);
        p.push_back(decoder.W1);
        p.push_back(decoder.b1);
        p.push_back(decoder.W2);
        p.push_back(decoder.b2);
        return p;
    }

    // learned channel column ranges per masked layer, in assembly order
    std::vector<std::pair<long, long>> layer_ranges() const {
        std::vector<std::pair<long, long>> out;
        for (int l = 0; l < net.n_mask_layers(); ++l) {
            if (!net.layer_masked[l]) continue;
            long lo = -1, hi = -1;
            for (int ch : net.assemblies[l].channels) {
                if (ch < 0) continue;  // fixed channel, not a learned column
                if (lo < 0) lo = ch;
                hi = ch;
            }
            if (lo >= 0) out.emplace_back(lo, hi - lo + 1);
        }
        return out;
    }
};

inline Session build_session(const cfg::TrainConfig& config) {
    auto errs = cfg::validate(config);
    if (!errs.empty()) {
        std::string msg = "invalid config:";
        for (const auto& e : errs) msg += "\n  " + e;
        throw std::invalid_argument(msg);
    }
    Session s;
    s.config = config;
    s.net = model::build_model(config.model_config(), config.seed);
    if (s.net.any_masked()) {
        auto grng = model::seed_stream(config.seed, 30);
        s.grid = mask::HashGrid::create(config.grid_config(), grng);
        auto drng = model::seed_stream(config.seed, 31);
        s.decoder = mask::MaskDecoder::create(s.grid.feature_width(), config.decoder_hidden,
                                              s.net.learned_channels, drng);
    }
    s.opt_snn = ad::Adam(s.net.trainable_params(), {config.lr_snn});
    if (s.net.any_masked()) s.opt_mask = ad::Adam(s.mask_params(), {config.lr_mask});
    s.batch_rng = model::seed_stream(config.seed, 50);
    return s;
}

// --- checkpoint -------------------------------------------------------------

struct Checkpoint {
    uint32_t version = 1;
    long step = 0;
    std::string config_toml;
    std::string rng_state;
    std::vector<std::pair<std::string, Mat>> tensors;  // ordered
};

namespace detail {

template <typename T>
void put(std::ostream& os, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    os.write(reinterpret_cast<const char*>(&v), sizeof v);  // host is little-endian
}

template <typename T>
T get(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

inline void put_string(std::ostream& os, const std::string& s) {
    put<uint64_t>(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& is) {
    const auto n = get<uint64_t>(is);
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return s;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    os.write("SASN", 4);
    detail::put<uint32_t>(os, ckpt.version);
    detail::put<uint64_t>(os, static_cast<uint64_t>(ckpt.step));
    detail::put_string(os, ckpt.config_toml);
    detail::put_string(os, ckpt.rng_state);
    detail::put<uint32_t>(os, static_cast<uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, m] : ckpt.tensors) {
        detail::put_string(os, name);
        detail::put<uint32_t>(os, static_cast<uint32_t>(m.rows()));
        detail::put<uint32_t>(os, static_cast<uint32_t>(m.cols()));
        for (long i = 0; i < m.rows(); ++i)
            for (long j = 0; j < m.cols(); ++j) detail::put<double>(os, m(i, j));
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "SASN", 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    Checkpoint ckpt;
    ckpt.version = detail::get<uint32_t>(is);
    if (ckpt.version != 1)
        throw std::runtime_error("checkpoint: unsupported format version " +
                                 std::to_string(ckpt.version));
    ckpt.step = static_cast<long>(detail::get<uint64_t>(is));
    ckpt.config_toml = detail::get_string(is);
    ckpt.rng_state = detail::get_string(is);
    const auto count = detail::get<uint32_t>(is);
    for (uint32_t t = 0; t < count; ++t) {
        std::string name = detail::get_string(is);
        const auto rows = detail::get<uint32_t>(is);
        const auto cols = detail::get<uint32_t>(is);
        Mat m(rows, cols);
        for (uint32_t i = 0; i < rows; ++i)
            for (uint32_t j = 0; j < cols; ++j) m(i, j) = detail::get<double>(is);
        ckpt.tensors.emplace_back(std::move(name), std::move(m));
    }
    return ckpt;
}

inline Checkpoint checkpoint_from_session(const Session& s) {
    Checkpoint ckpt;
    ckpt.step = s.step;
    ckpt.config_toml = cfg::config_to_toml(s.config);
    std::ostringstream rs;
    rs << s.batch_rng;
    ckpt.rng_state = rs.str();

    if (s.config.use_embedding) {
        ckpt.tensors.emplace_back("embed.multipliers",
                                  s.net.embedding.multipliers.cast<double>());
        Mat ph = s.net.embedding.phases.transpose();
        ckpt.tensors.emplace_back("embed.phases", std::move(ph));
    }
    auto dump_group = [&](const ad::Adam& opt, const std::string& group) {
        ckpt.tensors.emplace_back("opt." + group + ".t",
                                  Mat::Constant(1, 1, static_cast<double>(opt.step_count())));
        auto& o = const_cast<ad::Adam&>(opt);
        for (size_t i = 0; i < opt.params().size(); ++i) {
            const auto& p = opt.params()[i];
            ckpt.tensors.emplace_back(p->name, p->val);
            ckpt.tensors.emplace_back("opt." + p->name + ".m", o.moment1(i));
            ckpt.tensors.emplace_back("opt." + p->name + ".v", o.moment2(i));
        }
    };
    dump_group(s.opt_snn, "snn");
    if (s.has_masks()) dump_group(s.opt_mask, "mask");
    return ckpt;
}

// Rebuilds a session from a checkpoint; parameter, moment, and RNG state are
// restored exactly, so continued training matches an uninterrupted run.
inline Session session_from_checkpoint(const Checkpoint& ckpt) {
    Session s = build_session(cfg::config_from_toml(ckpt.config_toml));
    s.step = ckpt.step;
    std::istringstream rs(ckpt.rng_state);
    rs >> s.batch_rng;

    std::map<std::string, Mat*> slots;
    std::map<std::string, Mat> scratch;  // embedding copies checked, then applied
    if (s.config.use_embedding) {
        scratch["embed.multipliers"];
        scratch["embed.phases"];
    }
    auto map_group = [&](ad::Adam& opt, const std::string& group) {
        scratch["opt." + group + ".t"];
        for (size_t i = 0; i < opt.params().size(); ++i) {
            const auto& p = opt.params()[i];
            slots[p->name] = &p->val;
            slots["opt." + p->name + ".m"] = &opt.moment1(i);
            slots["opt." + p->name + ".v"] = &opt.moment2(i);
        }
    };
    map_group(s.opt_snn, "snn");
    if (s.has_masks()) map_group(s.opt_mask, "mask");

    std::map<std::string, bool> seen;
    for (const auto& [name, m] : ckpt.tensors) {
        auto it = slots.find(name);
        Mat* dst = nullptr;
        if (it != slots.end()) {
            dst = it->second;
        } else if (auto sc = scratch.find(name); sc != scratch.end()) {
            sc->second = m;
            seen[name] = true;
            continue;
        } else {
            throw std::runtime_error("checkpoint: unknown tensor '" + name + "'");
        }
        if (dst->rows() != m.rows() || dst->cols() != m.cols())
            throw std::runtime_error("checkpoint: tensor '" + name + "' has shape " +
                                     std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                     " but the config expects " + std::to_string(dst->rows()) +
                                     "x" + std::to_string(dst->cols()));
        *dst = m;
        seen[name] = true;
    }
    for (const auto& [name, dst] : slots) {
        (void)dst;
        if (!seen.count(name))
            throw std::runtime_error("checkpoint: missing tensor '" + name + "'");
    }
    auto restore_t = [&](ad::Adam& opt, const std::string& group) {
        auto it = scratch.find("opt." + group + ".t");
        if (it == scratch.end() || it->second.size() == 0)
            throw std::runtime_error("checkpoint: missing tensor 'opt." + group + ".t'");
        opt.set_step_count(static_cast<long>(it->second(0, 0)));
    };
    restore_t(s.opt_snn, "snn");
    if (s.has_masks()) restore_t(s.opt_mask, "mask");

    if (s.config.use_embedding) {
        const Mat& mult = scratch["embed.multipliers"];
        const Mat& ph = scratch["embed.phases"];
        if (mult.size() == 0 || ph.size() == 0)
            throw std::runtime_error("checkpoint: missing embedding tensors");
        if (mult.rows() != s.net.embedding.multipliers.rows() ||
            ph.cols() != s.net.embedding.phases.size())
            throw std::runtime_error("checkpoint: embedding arity mismatch");
        // the embedding is frozen and seed-derived; the stored copy must agree
        if ((mult - s.net.embedding.multipliers.cast<double>()).cwiseAbs().maxCoeff() != 0.0 ||
            (ph.row(0).transpose() - s.net.embedding.phases).cwiseAbs().maxCoeff() != 0.0)
            throw std::runtime_error("checkpoint: stored embedding disagrees with the seed");
    }
    return s;
}

// --- training ---------------------------------------------------------------

struct TrainResult {
    std::vector<metrics::MetricReport> history;  // one row per evaluation
    std::vector<double> loss_history;            // total loss per step
    std::vector<double> mse_history;             // components, same indexing
    std::vector<double> l1_history;
    std::vector<double> sparse_history;
    bool aborted = false;                        // NaN encountered
    Checkpoint last_good;                        // state before the bad step
};

struct EvalContext {
    img::ImageGrid gt;
    img::ImageGrid gt_gray;
    metrics::EdgePartition partition;
    Mat gt_gx, gt_gy;  // per-pixel-unit finite-difference gradients of gt_gray
};

inline EvalContext make_eval_context(const img::ImageGrid& image) {
    EvalContext ctx;
    ctx.gt = image;
    ctx.gt_gray = img::to_gray(image);
    ctx.partition = metrics::edge_partition(ctx.gt_gray);
    auto [gx, gy] = img::fd_gradient(ctx.gt_gray);
    ctx.gt_gx = std::move(gx);
    ctx.gt_gy = std::move(gy);
    return ctx;
}

// Full-grid reconstruction plus metric row; analytic model gradients are
// converted from coordinate units to per-pixel units before noisiness.
inline metrics::MetricReport evaluate(Session& s, const EvalContext& ctx,
                                      const Mat& full_coords, const LossParts* step_loss) {
    const int w = ctx.gt.width, h = ctx.gt.height, c = ctx.gt.channels;
    std::vector<mask::LayerMaskEval> layer_masks;
    if (s.has_masks()) {
        auto plan = mask::plan_interpolation(s.grid, full_coords);
        auto ev = mask::decode_masks_with_gradient(
            mask::interpolate_features_with_gradient(s.grid, plan), s.decoder);
        for (int l = 0; l < s.net.n_mask_layers(); ++l) {
            if (s.net.layer_masked[l])
                layer_masks.push_back(mask::assemble_layer_masks_plain(ev, s.net.assemblies[l]));
            else
                layer_masks.emplace_back();
        }
    }
    auto eval = model::forward_with_gradient(s.net, full_coords, layer_masks);

    img::ImageGrid recon = img::ImageGrid::from_matrix(eval.output, w, h);
    metrics::MetricReport r;
    r.step = s.step;
    r.psnr = metrics::psnr(ctx.gt, recon);
    r.ssim = metrics::ssim(ctx.gt, recon);
    r.psnr_edge = metrics::psnr_edge(ctx.gt, recon, ctx.partition);

    // grayscale model gradient in per-pixel units
    const double sx = metrics::coord_to_pixel_scale(s.config.margin, w);
    const double sy = metrics::coord_to_pixel_scale(s.config.margin, h);
    Mat mgx = Mat::Zero(h, w), mgy = Mat::Zero(h, w);
    static const double gray_w[3] = {0.299, 0.587, 0.114};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const long i = static_cast<long>(y) * w + x;
            double gx = 0.0, gy = 0.0;
            for (int ch = 0; ch < c; ++ch) {
                const double weight = c == 1 ? 1.0 : gray_w[ch];
                gx += weight * eval.doutput_dx(i, ch);
                gy += weight * eval.doutput_dy(i, ch);
            }
            mgx(y, x) = gx * sx;
            mgy(y, x) = gy * sy;
        }
    const long smooth_pixels =
        static_cast<long>(w) * h - ctx.partition.edge_count();
    if (smooth_pixels > 0) {
        auto [nm, ns] = metrics::noisiness(ctx.gt_gx, ctx.gt_gy, mgx, mgy, ctx.partition);
        r.noisiness_mean = nm;
        r.noisiness_std = ns;
    } else {
        // everything is edge band (tiny aliased images); noisiness is undefined
        r.noisiness_mean = r.noisiness_std = std::numeric_limits<double>::quiet_NaN();
    }
    if (step_loss) {
        r.mse = step_loss->mse;
        r.l1 = step_loss->l1;
        r.sparse = step_loss->sparse;
    }
    return r;
}

// Runs until config.steps, or `until` if given (for interrupted-run tests).
inline TrainResult train(Session& s, const img::ImageGrid& image, long until = -1) {
    if (image.channels != s.config.out_channels)
        throw std::invalid_argument("train: image has " + std::to_string(image.channels) +
                                    " channels but the model outputs " +
                                    std::to_string(s.config.out_channels));
    const auto batch = img::pixel_coords(image.width, image.height, s.config.margin);
    const Mat& full_coords = batch.coords;
    Mat full_gt = image.as_matrix();
    EvalContext ctx = make_eval_context(image);

    const bool sampled = s.config.batch == "sampled" &&
                         s.config.batch_size < full_coords.rows();
    // the interpolation plan depends only on coordinates, so the full-batch
    // plan is computed once
    std::optional<mask::InterpPlan> full_plan;
    if (s.has_masks() && !sampled)
        full_plan = mask::plan_interpolation(s.grid, full_coords);

    TrainResult result;
    result.last_good = checkpoint_from_session(s);

    auto run_step = [&]() -> LossParts {
        Mat coords, gt;
        std::optional<mask::InterpPlan> plan;
        if (sampled) {
            std::uniform_int_distribution<long> pick(0, full_coords.rows() - 1);
            coords.resize(s.config.batch_size, 2);
            gt.resize(s.config.batch_size, full_gt.cols());
            for (long i = 0; i < s.config.batch_size; ++i) {
                const long j = pick(s.batch_rng);
                coords.row(i) = full_coords.row(j);
                gt.row(i) = full_gt.row(j);
            }
            if (s.has_masks()) plan = mask::plan_interpolation(s.grid, coords);
        } else {
            coords = full_coords;
            gt = full_gt;
            plan = full_plan;
        }

        Tensor learned;
        std::vector<Tensor> layer_masks;
        if (s.has_masks()) {
            learned = mask::decode_masks(mask::interpolate_features(s.grid, *plan), s.decoder);
            for (int l = 0; l < s.net.n_mask_layers(); ++l)
                layer_masks.push_back(s.net.layer_masked[l]
                                          ? mask::assemble_layer_masks(learned, s.net.assemblies[l])
                                          : nullptr);
        }
        Tensor pred = model::forward(s.net, coords, layer_masks);
        return loss(pred, gt, learned, s.layer_ranges(), s.config.lambda_l1,
                    s.config.lambda_sparse, s.config.n_mask);
    };

    const long stop = until < 0 ? s.config.steps : std::min(until, s.config.steps);
    while (s.step < stop) {
        LossParts parts = run_step();
        const double total = parts.total->val(0, 0);
        result.loss_history.push_back(total);
        result.mse_history.push_back(parts.mse);
        result.l1_history.push_back(parts.l1);
        result.sparse_history.push_back(parts.sparse);
        if (!std::isfinite(total)) {
            result.aborted = true;
            return result;
        }
        ad::backward(parts.total);
        try {
            s.opt_snn.step();
            if (s.has_masks()) s.opt_mask.step();
        } catch (const std::runtime_error&) {
            result.aborted = true;
            return result;
        }
        s.opt_snn.zero_grad();
        if (s.has_masks()) s.opt_mask.zero_grad();
        ++s.step;

        if (s.step % s.config.eval_every == 0 || s.step == s.config.steps) {
            result.history.push_back(evaluate(s, ctx, full_coords, &parts));
            result.last_good = checkpoint_from_session(s);
        }
    }
    if (stop == 0) result.history.push_back(evaluate(s, ctx, full_coords, nullptr));
    return result;
}

// Loads the training image named by the config: the builtin ring pattern or a
// PNG (center-cropped/resized to image_size, converted to the model's arity).
inline img::ImageGrid load_training_image(const cfg::TrainConfig& c) {
    img::ImageGrid image;
    if (c.image == "toy") {
        image = img::toy_image(c.image_size);
    } else {
        image = img::load_png(c.image);
        image = img::center_crop_resize(image, c.image_size);
    }
    if (image.channels != c.out_channels) {
        if (c.out_channels == 1) {
            image = img::to_gray(image);
        } else if (c.out_channels == 3 && image.channels == 1) {
            img::ImageGrid rgb;
            rgb.width = image.width;
            rgb.height = image.height;
            rgb.channels = 3;
            rgb.values.resize(image.values.size() * 3);
            for (size_t i = 0; i < image.values.size(); ++i)
                rgb.values[3 * i] = rgb.values[3 * i + 1] = rgb.values[3 * i + 2] =
                    image.values[i];
            image = rgb;
        } else {
            throw std::invalid_argument("image has " + std::to_string(image.channels) +
                                        " channels; cannot adapt to out_channels=" +
                                        std::to_string(c.out_channels));
        }
    }
    return image;
}

}  // namespace sasnet::train
