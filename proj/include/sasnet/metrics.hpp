#pragma once

// Reconstruction quality metrics: PSNR, single-scale SSIM, Canny-based
// edge/smooth partition, edge-region PSNR, and the gradient-norm noisiness
// statistic, plus jet error maps and CSV/JSON reporting.

#include <sasnet/image.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sasnet::metrics {

using img::ImageGrid;
using img::Mat;

constexpr double kPsnrCap = 100.0;  // reported for zero MSE

inline void check_same_shape(const ImageGrid& a, const ImageGrid& b, const char* op) {
    if (a.width != b.width || a.height != b.height || a.channels != b.channels)
        throw std::invalid_argument(std::string(op) + ": shape mismatch (" +
                                    std::to_string(a.width) + "x" + std::to_string(a.height) +
                                    "x" + std::to_string(a.channels) + " vs " +
                                    std::to_string(b.width) + "x" + std::to_string(b.height) +
                                    "x" + std::to_string(b.channels) + ")");
}

inline double psnr(const ImageGrid& gt, const ImageGrid& pred) {
    check_same_shape(gt, pred, "psnr");
    double se = 0.0;
    for (size_t i = 0; i < gt.values.size(); ++i) {
        const double d = gt.values[i] - pred.values[i];
        se += d * d;
    }
    const double mse = se / gt.values.size();
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

// --- SSIM -------------------------------------------------------------------

namespace detail {

inline std::vector<double> gaussian_kernel(int radius, double sigma) {
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i)
        sum += k[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    for (double& v : k) v /= sum;
    return k;
}

// Separable filter over valid positions only (window fully inside the image).
inline Mat valid_gaussian_filter(const Mat& m, const std::vector<double>& k) {
    const int r = (static_cast<int>(k.size()) - 1) / 2;
    Mat horiz(m.rows(), m.cols() - 2 * r);
    for (long y = 0; y < m.rows(); ++y)
        for (long x = 0; x < horiz.cols(); ++x) {
            double s = 0.0;
            for (int i = 0; i < static_cast<int>(k.size()); ++i) s += k[i] * m(y, x + i);
            horiz(y, x) = s;
        }
    Mat out(m.rows() - 2 * r, horiz.cols());
    for (long y = 0; y < out.rows(); ++y)
        for (long x = 0; x < out.cols(); ++x) {
            double s = 0.0;
            for (int i = 0; i < static_cast<int>(k.size()); ++i) s += k[i] * horiz(y + i, x);
            out(y, x) = s;
        }
    return out;
}

}  // namespace detail

// Single-scale SSIM, 11x11 Gaussian window sigma 1.5, K1=0.01, K2=0.03, L=1,
// computed per channel over fully-interior windows and averaged.
inline double ssim(const ImageGrid& gt, const ImageGrid& pred) {
    check_same_shape(gt, pred, "ssim");
    constexpr int kRadius = 5;
    if (gt.width < 2 * kRadius + 1 || gt.height < 2 * kRadius + 1)
        throw std::invalid_argument("ssim: image smaller than the 11x11 window");
    const auto kernel = detail::gaussian_kernel(kRadius, 1.5);
    constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;

    double total = 0.0;
    for (int c = 0; c < gt.channels; ++c) {
        Mat a(gt.height, gt.width), b(gt.height, gt.width);
        for (int y = 0; y < gt.height; ++y)
            for (int x = 0; x < gt.width; ++x) {
                a(y, x) = gt.at(y, x, c);
                b(y, x) = pred.at(y, x, c);
            }
        Mat mu_a = detail::valid_gaussian_filter(a, kernel);
        Mat mu_b = detail::valid_gaussian_filter(b, kernel);
        Mat aa = detail::valid_gaussian_filter(a.cwiseProduct(a), kernel);
        Mat bb = detail::valid_gaussian_filter(b.cwiseProduct(b), kernel);
        Mat ab = detail::valid_gaussian_filter(a.cwiseProduct(b), kernel);
        Mat var_a = aa - mu_a.cwiseProduct(mu_a);
        Mat var_b = bb - mu_b.cwiseProduct(mu_b);
        Mat cov = ab - mu_a.cwiseProduct(mu_b);
        double sum = 0.0;
        for (long y = 0; y < mu_a.rows(); ++y)
            for (long x = 0; x < mu_a.cols(); ++x) {
                const double num = (2.0 * mu_a(y, x) * mu_b(y, x) + c1) *
                                   (2.0 * cov(y, x) + c2);
                const double den = (mu_a(y, x) * mu_a(y, x) + mu_b(y, x) * mu_b(y, x) + c1) *
                                   (var_a(y, x) + var_b(y, x) + c2);
                sum += num / den;
            }
        total += sum / (mu_a.rows() * mu_a.cols());
    }
    return total / gt.channels;
}

// --- Canny edge partition ---------------------------------------------------

struct CannyParams {
    double sigma = 1.4;
    double low = 0.1;   // fraction of max gradient magnitude
    double high = 0.2;  // fraction of max gradient magnitude
    int dilation_radius = 3;
};

struct EdgePartition {
    std::vector<uint8_t> edge_mask;  // row-major, 1 = edge band
    int width = 0, height = 0;
    CannyParams params;

    bool edge(int y, int x) const { return edge_mask[size_t(y) * width + x] != 0; }
    bool smooth(int y, int x) const { return !edge(y, x); }
    long edge_count() const {
        long n = 0;
        for (uint8_t v : edge_mask) n += v;
        return n;
    }
};

namespace detail {

// Replicate-border separable Gaussian blur.
inline Mat gaussian_blur(const Mat& m, double sigma) {
    const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    const auto k = gaussian_kernel(r, sigma);
    auto clampi = [](long v, long lo, long hi) { return std::min(std::max(v, lo), hi); };
    Mat horiz(m.rows(), m.cols());
    for (long y = 0; y < m.rows(); ++y)
        for (long x = 0; x < m.cols(); ++x) {
            double s = 0.0;
            for (int i = -r; i <= r; ++i) s += k[i + r] * m(y, clampi(x + i, 0, m.cols() - 1));
            horiz(y, x) = s;
        }
    Mat out(m.rows(), m.cols());
    for (long y = 0; y < m.rows(); ++y)
        for (long x = 0; x < m.cols(); ++x) {
            double s = 0.0;
            for (int i = -r; i <= r; ++i) s += k[i + r] * horiz(clampi(y + i, 0, m.rows() - 1), x);
            out(y, x) = s;
        }
    return out;
}

}  // namespace detail

inline EdgePartition edge_partition(const ImageGrid& gray, const CannyParams& params = {}) {
    if (gray.channels != 1)
        throw std::invalid_argument("edge_partition: expected a single-channel image");
    const int w = gray.width, h = gray.height;
    Mat m(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m(y, x) = gray.at(y, x);
    Mat blurred = detail::gaussian_blur(m, params.sigma);

    // Sobel gradients with replicate border
    auto at = [&](long y, long x) {
        return blurred(std::min<long>(std::max<long>(y, 0), h - 1),
                       std::min<long>(std::max<long>(x, 0), w - 1));
    };
    Mat gx(h, w), gy(h, w), mag(h, w);
    for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x) {
            gx(y, x) = at(y - 1, x + 1) + 2 * at(y, x + 1) + at(y + 1, x + 1) -
                       at(y - 1, x - 1) - 2 * at(y, x - 1) - at(y + 1, x - 1);
            gy(y, x) = at(y + 1, x - 1) + 2 * at(y + 1, x) + at(y + 1, x + 1) -
                       at(y - 1, x - 1) - 2 * at(y - 1, x) - at(y - 1, x + 1);
            mag(y, x) = std::hypot(gx(y, x), gy(y, x));
        }
    // a flat image produces only floating-point noise in the Sobel response;
    // relative thresholds would latch onto it, so clamp to an absolute floor
    const double max_mag = mag.maxCoeff();
    const double noise_floor = 1e-12;
    const double lo = std::max(params.low * max_mag, noise_floor);
    const double hi = std::max(params.high * max_mag, noise_floor);

    // non-maximum suppression along the quantized gradient direction
    Mat thin = Mat::Zero(h, w);
    for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x) {
            if (mag(y, x) <= 0.0) continue;
            const double ang = std::atan2(gy(y, x), gx(y, x));
            // quantize to one of 4 directions: 0, 45, 90, 135 degrees
            const int dir = static_cast<int>(std::round(ang / (M_PI / 4.0)) + 8) % 4;
            static const int dyx[4][2] = {{0, 1}, {1, 1}, {1, 0}, {1, -1}};
            auto sample = [&](long yy, long xx) {
                if (yy < 0 || yy >= h || xx < 0 || xx >= w) return 0.0;
                return mag(yy, xx);
            };
            const double n1 = sample(y + dyx[dir][0], x + dyx[dir][1]);
            const double n2 = sample(y - dyx[dir][0], x - dyx[dir][1]);
            if (mag(y, x) >= n1 && mag(y, x) >= n2) thin(y, x) = mag(y, x);
        }

    // double threshold + hysteresis (8-connected BFS from strong pixels)
    std::vector<uint8_t> state(size_t(h) * w, 0);  // 1 weak, 2 edge
    std::deque<std::pair<int, int>> queue;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (thin(y, x) <= 0.0) continue;
            if (thin(y, x) >= hi) {
                state[size_t(y) * w + x] = 2;
                queue.emplace_back(y, x);
            } else if (thin(y, x) >= lo) {
                state[size_t(y) * w + x] = 1;
            }
        }
    while (!queue.empty()) {
        auto [y, x] = queue.front();
        queue.pop_front();
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const int yy = y + dy, xx = x + dx;
                if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                if (state[size_t(yy) * w + xx] == 1) {
                    state[size_t(yy) * w + xx] = 2;
                    queue.emplace_back(yy, xx);
                }
            }
    }

    // disk dilation
    EdgePartition part;
    part.width = w;
    part.height = h;
    part.params = params;
    part.edge_mask.assign(size_t(h) * w, 0);
    const int r = params.dilation_radius;
    std::vector<std::pair<int, int>> disk;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
            if (dy * dy + dx * dx <= r * r) disk.emplace_back(dy, dx);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (state[size_t(y) * w + x] != 2) continue;
            for (auto [dy, dx] : disk) {
                const int yy = y + dy, xx = x + dx;
                if (yy >= 0 && yy < h && xx >= 0 && xx < w)
                    part.edge_mask[size_t(yy) * w + xx] = 1;
            }
        }
    return part;
}

// MSE averaged over edge pixels only, so the value does not depend on how
// much of the image the edge band covers.
inline double psnr_edge(const ImageGrid& gt, const ImageGrid& pred,
                        const EdgePartition& part) {
    check_same_shape(gt, pred, "psnr_edge");
    if (gt.width != part.width || gt.height != part.height)
        throw std::invalid_argument("psnr_edge: partition shape mismatch");
    double se = 0.0;
    long n = 0;
    for (int y = 0; y < gt.height; ++y)
        for (int x = 0; x < gt.width; ++x) {
            if (!part.edge(y, x)) continue;
            for (int c = 0; c < gt.channels; ++c) {
                const double d = gt.at(y, x, c) - pred.at(y, x, c);
                se += d * d;
            }
            ++n;
        }
    if (n == 0) return std::numeric_limits<double>::quiet_NaN();  // no edges: undefined
    const double mse = se / (n * gt.channels);
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

// |gradient-norm difference| statistics over smooth pixels. Both gradient
// pairs must already be in the same per-pixel units.
inline std::pair<double, double> noisiness(const Mat& gt_gx, const Mat& gt_gy,
                                           const Mat& model_gx, const Mat& model_gy,
                                           const EdgePartition& part) {
    if (gt_gx.rows() != part.height || gt_gx.cols() != part.width)
        throw std::invalid_argument("noisiness: gradient shape mismatch");
    std::vector<double> diffs;
    for (int y = 0; y < part.height; ++y)
        for (int x = 0; x < part.width; ++x) {
            if (!part.smooth(y, x)) continue;
            const double gn = std::hypot(gt_gx(y, x), gt_gy(y, x));
            const double mn = std::hypot(model_gx(y, x), model_gy(y, x));
            diffs.push_back(std::abs(gn - mn));
        }
    if (diffs.empty()) throw std::invalid_argument("noisiness: empty smooth region");
    double mean = 0.0;
    for (double d : diffs) mean += d;
    mean /= diffs.size();
    double var = 0.0;
    for (double d : diffs) var += (d - mean) * (d - mean);
    return {mean, std::sqrt(var / diffs.size())};
}

// Coordinate-space derivative -> per-pixel derivative along an axis of `size`
// pixels: x(i) = margin * (2 (i + 0.5) / size - 1), so dx/di = 2 margin / size.
inline double coord_to_pixel_scale(double margin, int size) { return 2.0 * margin / size; }

// --- error maps -------------------------------------------------------------

// Classic jet colormap on t in [0, 1].
inline void jet_color(double t, double& r, double& g, double& b) {
    t = std::clamp(t, 0.0, 1.0);
    auto ramp = [](double v) { return std::clamp(v, 0.0, 1.0); };
    r = ramp(1.5 - std::abs(4.0 * t - 3.0));
    g = ramp(1.5 - std::abs(4.0 * t - 2.0));
    b = ramp(1.5 - std::abs(4.0 * t - 1.0));
}

// Channel-averaged absolute difference, jet-colored, clipped at `clip` (2%).
inline ImageGrid error_map(const ImageGrid& gt, const ImageGrid& pred, double clip = 0.02) {
    check_same_shape(gt, pred, "error_map");
    ImageGrid out;
    out.width = gt.width;
    out.height = gt.height;
    out.channels = 3;
    out.values.resize(size_t(gt.width) * gt.height * 3);
    for (int y = 0; y < gt.height; ++y)
        for (int x = 0; x < gt.width; ++x) {
            double d = 0.0;
            for (int c = 0; c < gt.channels; ++c) d += std::abs(gt.at(y, x, c) - pred.at(y, x, c));
            d /= gt.channels;
            double r, g, b;
            jet_color(d / clip, r, g, b);
            out.at(y, x, 0) = r;
            out.at(y, x, 1) = g;
            out.at(y, x, 2) = b;
        }
    return out;
}

// --- reporting --------------------------------------------------------------

struct MetricReport {
    long step = 0;
    double psnr = 0.0;
    double ssim = 0.0;
    double psnr_edge = 0.0;
    double noisiness_mean = 0.0;
    double noisiness_std = 0.0;
    double mse = 0.0;
    double l1 = 0.0;
    double sparse = 0.0;

    static std::string csv_header() {
        return "step,psnr,ssim,psnr_edge,noisiness_mean,noisiness_std,mse,l1,sparse";
    }
    std::string csv_row() const {
        std::ostringstream os;
        os.precision(10);
        os << step << ',' << psnr << ',' << ssim << ',' << psnr_edge << ',' << noisiness_mean
           << ',' << noisiness_std << ',' << mse << ',' << l1 << ',' << sparse;
        return os.str();
    }
    nlohmann::json to_json() const {
        return {{"step", step},
                {"psnr", psnr},
                {"ssim", ssim},
                {"psnr_edge", psnr_edge},
                {"noisiness_mean", noisiness_mean},
                {"noisiness_std", noisiness_std},
                {"mse", mse},
                {"l1", l1},
                {"sparse", sparse}};
    }
};

}  // namespace sasnet::metrics
