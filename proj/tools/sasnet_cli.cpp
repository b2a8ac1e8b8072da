// Command-line front end: fit/render/metrics/spectrum/sweep-omega0/contrib/
// masks/toy. Every command is deterministic under a fixed seed and records a
// manifest for exact reruns.

#include <sasnet/frequency.hpp>
#include <sasnet/metrics.hpp>
#include <sasnet/trainer.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fcntl.h>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <unistd.h>

namespace fs = std::filesystem;
using namespace sasnet;
using ad::Mat;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;   // bad config / arguments
constexpr int kExitNumeric = 3;  // NaN or other numeric failure

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One command owns a run directory at a time.
class Lockfile {
public:
    explicit Lockfile(const fs::path& dir) : path_(dir / ".lock") {
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0)
            throw ConfigError("run directory " + dir.string() +
                              " is locked by another command (remove " + path_.string() +
                              " if stale)");
    }
    ~Lockfile() {
        if (fd_ >= 0) {
            ::close(fd_);
            ::unlink(path_.c_str());
        }
    }
    Lockfile(const Lockfile&) = delete;
    Lockfile& operator=(const Lockfile&) = delete;

private:
    fs::path path_;
    int fd_ = -1;
};

std::string config_hash(const cfg::TrainConfig& c) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016zx", std::hash<std::string>{}(cfg::config_to_toml(c)));
    return buf;
}

void write_manifest(const fs::path& dir, const std::string& command,
                    const cfg::TrainConfig& c, json extra = json::object()) {
    json m = {{"command", command},
              {"config_hash", config_hash(c)},
              {"seed", c.seed},
              {"checkpoint_format_version", 1}};
    m.update(extra);
    std::ofstream out(dir / "manifest.json");
    out << m.dump(2) << "\n";
}

void write_metrics_csv(const fs::path& path, const std::vector<metrics::MetricReport>& history) {
    std::ofstream out(path);
    out << metrics::MetricReport::csv_header() << "\n";
    for (const auto& r : history) out << r.csv_row() << "\n";
}

void validate_or_die(const cfg::TrainConfig& c) {
    auto errs = cfg::validate(c);
    if (errs.empty()) return;
    std::string msg = "invalid config:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw ConfigError(msg);
}

// The single reconstruction path shared by fit and render, so `render
// --scale 1` is bitwise identical to fit's recon.png.
img::ImageGrid render_model(train::Session& s, const Mat& coords, int out_w, int out_h) {
    std::vector<mask::LayerMaskEval> layer_masks;
    if (s.has_masks()) {
        auto plan = mask::plan_interpolation(s.grid, coords);
        auto ev = mask::decode_masks_with_gradient(
            mask::interpolate_features_with_gradient(s.grid, plan), s.decoder);
        for (int l = 0; l < s.net.n_mask_layers(); ++l) {
            if (s.net.layer_masked[l])
                layer_masks.push_back(mask::assemble_layer_masks_plain(ev, s.net.assemblies[l]));
            else
                layer_masks.emplace_back();
        }
    }
    auto eval = model::forward_with_gradient(s.net, coords, layer_masks);
    return img::ImageGrid::from_matrix(eval.output, out_w, out_h);
}

// --- fit --------------------------------------------------------------------

metrics::MetricReport run_fit(const cfg::TrainConfig& config, const fs::path& dir) {
    validate_or_die(config);
    fs::create_directories(dir);
    Lockfile lock(dir);

    auto session = train::build_session(config);
    auto image = train::load_training_image(config);
    auto result = train::train(session, image);

    write_metrics_csv(dir / "metrics.csv", result.history);
    if (result.aborted) {
        train::save_checkpoint((dir / "checkpoint.sasn").string(), result.last_good);
        write_manifest(dir, "fit", config, {{"aborted", true}});
        throw NumericError("training hit a non-finite loss at step " +
                           std::to_string(result.last_good.step) +
                           "; last good checkpoint saved");
    }
    train::save_checkpoint((dir / "checkpoint.sasn").string(),
                           train::checkpoint_from_session(session));

    auto coords = img::pixel_coords(image.width, image.height, config.margin);
    auto recon = render_model(session, coords.coords, image.width, image.height);
    img::save_png((dir / "recon.png").string(), recon);
    img::save_png((dir / "error.png").string(), metrics::error_map(image, recon));
    write_manifest(dir, "fit", config);

    if (result.history.empty()) {
        train::EvalContext ctx = train::make_eval_context(image);
        result.history.push_back(train::evaluate(session, ctx, coords.coords, nullptr));
    }
    return result.history.back();
}

// Table 3 rows: (FEmbed, mask_freq, mask_h1, mask_h2)
const std::vector<std::pair<std::string, std::array<bool, 4>>> kAblationRows = {
    {"baseline", {false, false, false, false}},
    {"fembed", {true, false, false, false}},
    {"fembed_mfreq", {true, true, false, false}},
    {"fembed_mfreq_mh1", {true, true, true, false}},
    {"fembed_mfreq_mh2", {true, true, false, true}},
    {"fembed_mh1", {true, false, true, false}},
    {"fembed_mh2", {true, false, false, true}},
    {"masks_only", {false, true, true, true}},
    {"full", {true, true, true, true}},
};

int cmd_fit(const std::string& config_path, const cfg::TrainConfig& overrides,
            const std::vector<std::string>& overridden, const fs::path& dir,
            const std::string& ablation) {
    cfg::TrainConfig config =
        config_path.empty() ? cfg::TrainConfig{} : cfg::load_config(config_path);
    // apply CLI overrides on top of the file
    auto is_set = [&](const char* k) {
        return std::find(overridden.begin(), overridden.end(), k) != overridden.end();
    };
    if (is_set("steps")) config.steps = overrides.steps;
    if (is_set("seed")) config.seed = overrides.seed;
    if (is_set("image")) config.image = overrides.image;
    if (is_set("image_size")) config.image_size = overrides.image_size;
    if (is_set("omega0")) config.omega0 = overrides.omega0;
    if (is_set("batch")) config.batch = overrides.batch;
    if (is_set("batch_size")) config.batch_size = overrides.batch_size;

    if (ablation.empty()) {
        auto final_report = run_fit(config, dir);
        std::cout << "final: psnr " << final_report.psnr << " dB, ssim " << final_report.ssim
                  << "\n";
        return 0;
    }
    if (ablation != "table3") throw ConfigError("unknown ablation grid '" + ablation + "'");

    fs::create_directories(dir);
    std::ofstream summary(dir / "ablation.csv");
    summary << "row,fembed,mask_freq,mask_h1,mask_h2,psnr,ssim\n";
    for (const auto& [label, flags] : kAblationRows) {
        cfg::TrainConfig c = config;
        c.use_embedding = flags[0];
        c.mask_freq = flags[1];
        c.mask_h1 = flags[2];
        c.mask_h2 = flags[3];
        auto report = run_fit(c, dir / label);
        summary << label << ',' << flags[0] << ',' << flags[1] << ',' << flags[2] << ','
                << flags[3] << ',' << report.psnr << ',' << report.ssim << "\n";
        std::cout << label << ": psnr " << report.psnr << " dB\n";
    }
    write_manifest(dir, "fit --ablation table3", config);
    return 0;
}

// --- render -----------------------------------------------------------------

int cmd_render(const std::string& checkpoint, const std::string& out, int scale, double shift,
               std::vector<int> crop) {
    if (scale < 1) throw ConfigError("scale: must be an integer >= 1");
    if (shift < 0.0 || shift >= 1.0) throw ConfigError("shift: must be in [0,1)");
    auto session = train::session_from_checkpoint(train::load_checkpoint(checkpoint));
    const int base = session.config.image_size;
    int cx = 0, cy = 0, cw = base, ch = base;
    if (!crop.empty()) {
        if (crop.size() != 4) throw ConfigError("crop: expected x y w h");
        cx = crop[0];
        cy = crop[1];
        cw = crop[2];
        ch = crop[3];
        if (cx < 0 || cy < 0 || cw <= 0 || ch <= 0 || cx + cw > base || cy + ch > base)
            throw ConfigError("crop: rectangle outside the " + std::to_string(base) + "^2 domain");
    }
    const double margin = session.config.margin;
    const int ow = cw * scale, oh = ch * scale;
    Mat coords(static_cast<long>(ow) * oh, 2);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            const long i = static_cast<long>(y) * ow + x;
            const double gx = cx * scale + x;  // global sub-pixel index
            const double gy = cy * scale + y;
            coords(i, 0) = margin * (2.0 * (gx + 0.5 + shift) / (base * scale) - 1.0);
            coords(i, 1) = margin * (2.0 * (gy + 0.5 + shift) / (base * scale) - 1.0);
        }
    auto out_img = render_model(session, coords, ow, oh);
    img::save_png(out, out_img);
    std::cout << "wrote " << out << " (" << ow << "x" << oh << ")\n";
    return 0;
}

// --- metrics ----------------------------------------------------------------

int cmd_metrics(const std::string& gt_path, const std::string& pred_path,
                const std::string& checkpoint, const std::string& out) {
    json report;
    if (!checkpoint.empty()) {
        auto session = train::session_from_checkpoint(train::load_checkpoint(checkpoint));
        auto image = train::load_training_image(session.config);
        auto ctx = train::make_eval_context(image);
        auto coords = img::pixel_coords(image.width, image.height, session.config.margin);
        auto r = train::evaluate(session, ctx, coords.coords, nullptr);
        report = r.to_json();
    } else {
        if (gt_path.empty() || pred_path.empty())
            throw ConfigError("metrics: need --gt and --pred, or --checkpoint");
        auto gt = img::load_png(gt_path);
        auto pred = img::load_png(pred_path);
        if (gt.width != pred.width || gt.height != pred.height ||
            gt.channels != pred.channels)
            throw ConfigError("metrics: image dimensions differ");
        auto gt_gray = img::to_gray(gt);
        auto part = metrics::edge_partition(gt_gray);
        report["psnr"] = metrics::psnr(gt, pred);
        report["ssim"] = metrics::ssim(gt, pred);
        const double pe = metrics::psnr_edge(gt, pred, part);
        if (std::isnan(pe)) {
            std::cerr << "warning: no edge pixels found; psnr_edge undefined\n";
            report["psnr_edge"] = nullptr;
        } else {
            report["psnr_edge"] = pe;
        }
        // finite differences on both images (no analytic model gradient here)
        const long smooth = static_cast<long>(gt.width) * gt.height - part.edge_count();
        if (smooth > 0) {
            auto [ggx, ggy] = img::fd_gradient(gt_gray);
            auto [pgx, pgy] = img::fd_gradient(img::to_gray(pred));
            auto [nm, ns] = metrics::noisiness(ggx, ggy, pgx, pgy, part);
            report["noisiness_fd"] = {{"mean", nm}, {"std", ns}};
        } else {
            report["noisiness_fd"] = nullptr;
        }
    }
    const std::string text = report.dump(2);
    std::cout << text << "\n";
    if (!out.empty()) {
        std::ofstream os(out);
        os << text << "\n";
    }
    return 0;
}

// --- spectrum ---------------------------------------------------------------

int cmd_spectrum(const std::string& checkpoint, const std::string& out_dir, int res) {
    if (res <= 0 || (res & (res - 1)) != 0)
        throw ConfigError("res: must be a power of two");
    auto session = train::session_from_checkpoint(train::load_checkpoint(checkpoint));
    fs::path dir(out_dir);
    fs::create_directories(dir);
    Lockfile lock(dir);

    auto coords = img::pixel_coords(res, res, session.config.margin);
    std::vector<mask::LayerMaskEval> layer_masks;
    if (session.has_masks()) {
        auto plan = mask::plan_interpolation(session.grid, coords.coords);
        auto ev = mask::decode_masks_with_gradient(
            mask::interpolate_features_with_gradient(session.grid, plan), session.decoder);
        for (int l = 0; l < session.net.n_mask_layers(); ++l) {
            if (session.net.layer_masked[l])
                layer_masks.push_back(
                    mask::assemble_layer_masks_plain(ev, session.net.assemblies[l]));
            else
                layer_masks.emplace_back();
        }
    }
    auto eval = model::forward_with_gradient(session.net, coords.coords, layer_masks);
    auto ps = freq::power_spectrum(eval.output, res);

    // log-scaled 16-bit panel
    Mat logp = (ps.power.array() + 1.0).log();
    const double maxv = logp.maxCoeff();
    std::vector<uint16_t> pixels(static_cast<size_t>(res) * res);
    for (int r = 0; r < res; ++r)
        for (int c = 0; c < res; ++c)
            pixels[static_cast<size_t>(r) * res + c] =
                static_cast<uint16_t>(maxv > 0 ? 65535.0 * logp(r, c) / maxv : 0.0);
    png_io::write_png16_gray((dir / "spectrum.png").string(), res, res, pixels);

    std::ofstream csv(dir / "spectrum.csv");
    csv << "band,energy_fraction\n";
    csv.precision(10);
    for (int band = 1; band < res / 2; ++band)
        csv << band << ',' << freq::band_energy_fraction(ps, band) << "\n";
    write_manifest(dir, "spectrum", session.config, {{"res", res}});
    std::cout << "band " << session.config.band_limit << " energy fraction: "
              << freq::band_energy_fraction(ps, session.config.band_limit) << "\n";
    return 0;
}

// --- sweep-omega0 -----------------------------------------------------------

int cmd_sweep(const std::string& config_path, std::vector<double> omegas,
              const std::string& out_dir) {
    if (omegas.empty()) throw ConfigError("omega0 list must be nonempty");
    cfg::TrainConfig base =
        config_path.empty() ? cfg::TrainConfig{} : cfg::load_config(config_path);
    validate_or_die(base);
    fs::path dir(out_dir);
    fs::create_directories(dir);
    Lockfile lock(dir);

    std::ofstream csv(dir / "sweep.csv");
    csv << "model,omega0,psnr\n";
    double siren_min = 1e300, siren_max = -1e300, sas_min = 1e300, sas_max = -1e300;
    for (double w0 : omegas) {
        for (bool sasnet : {false, true}) {
            cfg::TrainConfig c = base;
            c.omega0 = w0;
            if (!sasnet) {
                c.use_embedding = false;
                c.mask_freq = c.mask_h1 = c.mask_h2 = false;
            }
            auto session = train::build_session(c);
            auto image = train::load_training_image(c);
            auto result = train::train(session, image);
            if (result.aborted) throw NumericError("non-finite loss in sweep run");
            const double p = result.history.empty() ? 0.0 : result.history.back().psnr;
            csv << (sasnet ? "sasnet" : "siren") << ',' << w0 << ',' << p << "\n";
            std::cout << (sasnet ? "sasnet" : "siren") << " w0=" << w0 << ": " << p << " dB\n";
            if (sasnet) {
                sas_min = std::min(sas_min, p);
                sas_max = std::max(sas_max, p);
            } else {
                siren_min = std::min(siren_min, p);
                siren_max = std::max(siren_max, p);
            }
        }
    }
    std::cout << "psnr range: siren " << siren_max - siren_min << " dB, sasnet "
              << sas_max - sas_min << " dB\n";
    write_manifest(dir, "sweep-omega0", base, {{"omegas", omegas}});
    return 0;
}

// --- contrib / masks --------------------------------------------------------

img::ImageGrid normalized_panel(const Eigen::VectorXd& field, int w, int h) {
    const double lo = field.minCoeff(), hi = field.maxCoeff();
    img::ImageGrid g;
    g.width = w;
    g.height = h;
    g.channels = 1;
    g.values.resize(static_cast<size_t>(w) * h);
    for (long i = 0; i < field.size(); ++i)
        g.values[i] = hi > lo ? (field(i) - lo) / (hi - lo) : 0.5;  // flat field -> mid gray
    return g;
}

int cmd_contrib(const std::string& checkpoint, const std::string& out_dir, int max_per_layer) {
    auto session = train::session_from_checkpoint(train::load_checkpoint(checkpoint));
    fs::path dir(out_dir);
    fs::create_directories(dir);
    Lockfile lock(dir);
    const int size = session.config.image_size;
    auto coords = img::pixel_coords(size, size, session.config.margin);

    std::vector<mask::LayerMaskEval> layer_masks;
    if (session.has_masks()) {
        auto plan = mask::plan_interpolation(session.grid, coords.coords);
        auto ev = mask::decode_masks_with_gradient(
            mask::interpolate_features_with_gradient(session.grid, plan), session.decoder);
        for (int l = 0; l < session.net.n_mask_layers(); ++l) {
            if (session.net.layer_masked[l])
                layer_masks.push_back(
                    mask::assemble_layer_masks_plain(ev, session.net.assemblies[l]));
            else
                layer_masks.emplace_back();
        }
    }
    auto maps = model::contribution_maps(session.net, coords.coords, layer_masks);
    json manifest_entries = json::array();
    for (size_t layer = 0; layer < maps.size(); ++layer) {
        const long n = std::min<long>(maps[layer].cols(), max_per_layer);
        for (long j = 0; j < n; ++j) {
            const std::string file =
                "layer" + std::to_string(layer) + "_neuron" + std::to_string(j) + ".png";
            img::save_png((dir / file).string(),
                          normalized_panel(maps[layer].col(j), size, size));
            json e = {{"file", file}, {"layer", layer}, {"neuron", j}};
            if (session.net.layer_masked[layer])
                e["group"] = session.net.group_map[layer][static_cast<size_t>(j)];
            manifest_entries.push_back(e);
        }
    }
    write_manifest(dir, "contrib", session.config, {{"panels", manifest_entries}});
    std::cout << "wrote " << manifest_entries.size() << " contribution panels\n";
    return 0;
}

int cmd_masks(const std::string& checkpoint, const std::string& out_dir) {
    auto session = train::session_from_checkpoint(train::load_checkpoint(checkpoint));
    if (!session.has_masks()) throw ConfigError("checkpoint has no masked layers");
    fs::path dir(out_dir);
    fs::create_directories(dir);
    Lockfile lock(dir);
    const int size = session.config.image_size;
    auto coords = img::pixel_coords(size, size, session.config.margin);
    auto plan = mask::plan_interpolation(session.grid, coords.coords);
    auto ev = mask::decode_masks_with_gradient(
        mask::interpolate_features_with_gradient(session.grid, plan), session.decoder);

    json manifest_entries = json::array();
    int panels = 0;
    for (int l = 0; l < session.net.n_mask_layers(); ++l) {
        if (!session.net.layer_masked[l]) continue;
        auto lm = mask::assemble_layer_masks_plain(ev, session.net.assemblies[l]);
        for (long g = 0; g < lm.masks.cols(); ++g) {
            const int ch = session.net.assemblies[l].channels[static_cast<size_t>(g)];
            const std::string file =
                "layer" + std::to_string(l) + "_group" + std::to_string(g) + ".png";
            // masks are already in [0,1]; the fixed channel renders all-white
            img::ImageGrid panel;
            panel.width = panel.height = size;
            panel.channels = 1;
            panel.values.assign(lm.masks.col(g).data(),
                                lm.masks.col(g).data() + lm.masks.rows());
            img::save_png((dir / file).string(), panel);
            manifest_entries.push_back(
                {{"file", file}, {"layer", l}, {"group", g}, {"fixed", ch < 0}});
            ++panels;
        }
    }
    write_manifest(dir, "masks", session.config, {{"panels", manifest_entries}});
    std::cout << "wrote " << panels << " mask panels\n";
    return 0;
}

// --- toy --------------------------------------------------------------------

cfg::TrainConfig toy_sasnet_config(int size, long steps, uint64_t seed) {
    cfg::TrainConfig c;
    c.image = "toy";
    c.image_size = size;
    c.out_channels = 1;
    c.steps = steps;
    c.seed = seed;
    // ~10k trainable parameters
    c.embed_width = 128;
    c.hidden_widths = {64};
    c.grid_levels = 6;
    c.grid_base = 4;
    c.grid_finest = 128;
    c.grid_table = 128;
    c.decoder_hidden = 16;
    c.batch = "sampled";
    c.batch_size = 8192;
    c.lr_snn = 1e-4;
    c.lr_mask = 5e-4;
    c.eval_every = 500;
    return c;
}

cfg::TrainConfig toy_siren_config(int size, long steps, uint64_t seed, double omega0) {
    cfg::TrainConfig c;
    c.image = "toy";
    c.image_size = size;
    c.out_channels = 1;
    c.steps = steps;
    c.seed = seed;
    c.use_embedding = false;
    c.mask_freq = c.mask_h1 = c.mask_h2 = false;
    // matched budget: 3 sine layers of width 72 (~10.8k parameters)
    c.embed_width = 72;
    c.hidden_widths = {72, 72};
    c.omega0 = omega0;
    c.batch = "sampled";
    c.batch_size = 8192;
    c.eval_every = 500;
    return c;
}

int cmd_toy(const std::string& out_dir, int size, long steps, uint64_t seed) {
    fs::path dir(out_dir);
    fs::create_directories(dir);
    std::ofstream csv(dir / "toy.csv");
    csv << "model,omega0,psnr,trainable_params\n";

    auto run = [&](const cfg::TrainConfig& c, const std::string& label, double w0) {
        auto session = train::build_session(c);
        auto image = train::load_training_image(c);
        long params = session.net.trainable_param_count();
        for (const auto& p : session.mask_params()) params += p->val.size();
        auto result = train::train(session, image);
        if (result.aborted) throw NumericError("non-finite loss in toy run " + label);
        const double p = result.history.empty() ? 0.0 : result.history.back().psnr;
        csv << label << ',' << w0 << ',' << p << ',' << params << "\n";
        std::cout << label << (w0 > 0 ? " w0=" + std::to_string(static_cast<int>(w0)) : "")
                  << ": " << p << " dB (" << params << " params)\n";
        if (label == "sasnet") {
            auto coords = img::pixel_coords(size, size, c.margin);
            auto recon = render_model(session, coords.coords, size, size);
            img::save_png((dir / "sasnet_recon.png").string(), recon);
        }
        return p;
    };

    const double sas = run(toy_sasnet_config(size, steps, seed), "sasnet", 0.0);
    double best_siren = -1e300;
    for (double w0 : {30.0, 60.0, 120.0})
        best_siren = std::max(best_siren, run(toy_siren_config(size, steps, seed, w0),
                                              "siren", w0));
    std::cout << "gap over best siren: " << sas - best_siren << " dB\n";
    write_manifest(dir, "toy", toy_sasnet_config(size, steps, seed),
                   {{"gap_db", sas - best_siren}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spatially-adaptive sinusoidal network image fitting"};
    app.require_subcommand(1);

    // fit
    auto* fit = app.add_subcommand("fit", "train a model and write run artifacts");
    std::string fit_config, fit_ablation;
    fs::path fit_dir = "runs/fit";
    cfg::TrainConfig ov;
    std::vector<std::string> overridden;
    fit->add_option("--config", fit_config, "TOML config file");
    fit->add_option("--out", fit_dir, "run directory");
    fit->add_option("--ablation", fit_ablation, "ablation grid name (table3)");
    auto track = [&](const char* key, auto& field) {
        fit->add_option(std::string("--") + key, field)->each([&overridden, key](std::string) {
            overridden.push_back(key);
        });
    };
    track("steps", ov.steps);
    track("seed", ov.seed);
    track("image", ov.image);
    track("image_size", ov.image_size);
    track("omega0", ov.omega0);
    track("batch", ov.batch);
    track("batch_size", ov.batch_size);

    // render
    auto* render = app.add_subcommand("render", "evaluate a checkpoint on a pixel lattice");
    std::string r_ckpt, r_out = "render.png";
    int r_scale = 1;
    double r_shift = 0.0;
    std::vector<int> r_crop;
    render->add_option("--checkpoint", r_ckpt)->required();
    render->add_option("--out", r_out);
    render->add_option("--scale", r_scale, "integer super-resolution factor");
    render->add_option("--shift", r_shift, "sub-pixel shift in [0,1)");
    render->add_option("--crop", r_crop, "crop rectangle: x y w h")->expected(4);

    // metrics
    auto* met = app.add_subcommand("metrics", "metric report for a pair or a checkpoint");
    std::string m_gt, m_pred, m_ckpt, m_out;
    met->add_option("--gt", m_gt);
    met->add_option("--pred", m_pred);
    met->add_option("--checkpoint", m_ckpt);
    met->add_option("--out", m_out, "write the JSON report here");

    // spectrum
    auto* spec = app.add_subcommand("spectrum", "power spectrum of the model output");
    std::string s_ckpt, s_out = "runs/spectrum";
    int s_res = 256;
    spec->add_option("--checkpoint", s_ckpt)->required();
    spec->add_option("--out", s_out);
    spec->add_option("--res", s_res, "evaluation resolution (power of two)");

    // sweep-omega0
    auto* sweep = app.add_subcommand("sweep-omega0", "paired SIREN/SASNet omega0 sensitivity");
    std::string w_config, w_out = "runs/sweep";
    std::vector<double> w_omegas;
    sweep->add_option("--config", w_config);
    sweep->add_option("--omegas", w_omegas, "omega0 values")->required();
    sweep->add_option("--out", w_out);

    // contrib
    auto* contrib = app.add_subcommand("contrib", "per-neuron contribution map panels");
    std::string c_ckpt, c_out = "runs/contrib";
    int c_max = 32;
    contrib->add_option("--checkpoint", c_ckpt)->required();
    contrib->add_option("--out", c_out);
    contrib->add_option("--max-per-layer", c_max);

    // masks
    auto* masks = app.add_subcommand("masks", "per-group mask panels");
    std::string k_ckpt, k_out = "runs/masks";
    masks->add_option("--checkpoint", k_ckpt)->required();
    masks->add_option("--out", k_out);

    // toy
    auto* toy = app.add_subcommand("toy", "the ring-pattern benchmark at matched budgets");
    std::string t_out = "runs/toy";
    int t_size = 256;
    long t_steps = 5000;
    uint64_t t_seed = 1;
    toy->add_option("--out", t_out);
    toy->add_option("--size", t_size);
    toy->add_option("--steps", t_steps);
    toy->add_option("--seed", t_seed);

    CLI11_PARSE(app, argc, argv);

    try {
        if (fit->parsed()) return cmd_fit(fit_config, ov, overridden, fit_dir, fit_ablation);
        if (render->parsed()) return cmd_render(r_ckpt, r_out, r_scale, r_shift, r_crop);
        if (met->parsed()) return cmd_metrics(m_gt, m_pred, m_ckpt, m_out);
        if (spec->parsed()) return cmd_spectrum(s_ckpt, s_out, s_res);
        if (sweep->parsed()) return cmd_sweep(w_config, w_omegas, w_out);
        if (contrib->parsed()) return cmd_contrib(c_ckpt, c_out, c_max);
        if (masks->parsed()) return cmd_masks(k_ckpt, k_out);
        if (toy->parsed()) return cmd_toy(t_out, t_size, t_steps, t_seed);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return 0;
}
