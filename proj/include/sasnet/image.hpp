#pragma once

// Image grids, coordinate lattices (with the border margin), the synthetic
// ring image, grayscale conversion, and finite-difference gradients.

#include <sasnet/png_io.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace sasnet::img {

using Mat = Eigen::MatrixXd;

struct ImageGrid {
    int width = 0, height = 0, channels = 1;
    std::vector<double> values;  // row-major, interleaved, in [0,1]

    double& at(int y, int x, int c = 0) {
        return values[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c = 0) const {
        return values[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    long pixel_count() const { return static_cast<long>(width) * height; }

    // (w*h) x channels matrix, rows in row-major pixel order
    Mat as_matrix() const {
        Mat m(pixel_count(), channels);
        for (long i = 0; i < pixel_count(); ++i)
            for (int c = 0; c < channels; ++c) m(i, c) = values[i * channels + c];
        return m;
    }

    static ImageGrid from_matrix(const Mat& m, int width, int height) {
        if (m.rows() != static_cast<long>(width) * height)
            throw std::invalid_argument("from_matrix: row count does not match dimensions");
        ImageGrid g;
        g.width = width;
        g.height = height;
        g.channels = static_cast<int>(m.cols());
        g.values.resize(m.rows() * m.cols());
        for (long i = 0; i < m.rows(); ++i)
            for (int c = 0; c < g.channels; ++c)
                g.values[i * g.channels + c] = std::clamp(m(i, c), 0.0, 1.0);
        return g;
    }
};

enum class CoordProvenance { TrainGrid, Shifted, SuperRes };

struct CoordBatch {
    Mat coords;  // N x 2, row-major over the lattice
    CoordProvenance provenance = CoordProvenance::TrainGrid;
    int scale = 1;
    double shift = 0.0;
    int grid_width = 0, grid_height = 0;  // lattice dimensions (scaled)
};

// Pixel-center lattice mapped into [-1,1] scaled by the border margin:
//   x(i) = margin * (2*(i + 0.5 + shift)/(w*scale) - 1)
inline CoordBatch pixel_coords(int w, int h, double margin = 0.95, double shift = 0.0,
                               int scale = 1) {
    if (margin <= 0.0 || margin > 1.0)
        throw std::invalid_argument("pixel_coords: margin must be in (0,1]");
    if (scale < 1) throw std::invalid_argument("pixel_coords: scale must be >= 1");
    CoordBatch b;
    b.scale = scale;
    b.shift = shift;
    b.grid_width = w * scale;
    b.grid_height = h * scale;
    b.provenance = scale > 1 ? CoordProvenance::SuperRes
                 : shift != 0.0 ? CoordProvenance::Shifted
                                : CoordProvenance::TrainGrid;
    b.coords.resize(static_cast<long>(b.grid_width) * b.grid_height, 2);
    for (int y = 0; y < b.grid_height; ++y)
        for (int x = 0; x < b.grid_width; ++x) {
            const long i = static_cast<long>(y) * b.grid_width + x;
            b.coords(i, 0) = margin * (2.0 * (x + 0.5 + shift) / b.grid_width - 1.0);
            b.coords(i, 1) = margin * (2.0 * (y + 0.5 + shift) / b.grid_height - 1.0);
        }
    return b;
}

/// Binary concentric-ring image: 1(sin(28*pi*exp(d/20)) > 0.5), d the distance
// to the image center in units of ten pixels; this keeps the outermost ring
// frequency below Nyquist at 256x256.
inline ImageGrid toy_image(int size = 256) {
    if (size < 2) throw std::invalid_argument("toy_image: size must be >= 2");
    ImageGrid g;
    g.width = g.height = size;
    g.channels = 1;
    g.values.resize(static_cast<size_t>(size) * size);
    const double c = (size - 1) / 2.0;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double d = std::hypot(x - c, y - c) / 10.0;
            g.at(y, x) = std::sin(28.0 * M_PI * std::exp(d / 20.0)) > 0.5 ? 1.0 : 0.0;
        }
    return g;
}

// ITU-R BT.601 luma weights.
inline ImageGrid to_gray(const ImageGrid& img) {
    if (img.channels == 1) return img;
    if (img.channels != 3) throw std::invalid_argument("to_gray: expected 1 or 3 channels");
    ImageGrid g;
    g.width = img.width;
    g.height = img.height;
    g.channels = 1;
    g.values.resize(img.pixel_count());
    for (long i = 0; i < img.pixel_count(); ++i)
        g.values[i] = 0.299 * img.values[3 * i] + 0.587 * img.values[3 * i + 1] +
                      0.114 * img.values[3 * i + 2];
    return g;
}

// Per-pixel gradient in intensity-per-pixel units: central differences at
// interior pixels, second-order one-sided at the borders.
inline std::pair<Mat, Mat> fd_gradient(const ImageGrid& gray) {
    if (gray.channels != 1) throw std::invalid_argument("fd_gradient: expected single channel");
    const int w = gray.width, h = gray.height;
    Mat gx(h, w), gy(h, w);
    auto v = [&](int y, int x) { return gray.at(y, x); };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (x == 0)
                gx(y, x) = (-3.0 * v(y, 0) + 4.0 * v(y, 1) - v(y, 2)) / 2.0;
            else if (x == w - 1)
                gx(y, x) = (3.0 * v(y, w - 1) - 4.0 * v(y, w - 2) + v(y, w - 3)) / 2.0;
            else
                gx(y, x) = (v(y, x + 1) - v(y, x - 1)) / 2.0;
            if (y == 0)
                gy(y, x) = (-3.0 * v(0, x) + 4.0 * v(1, x) - v(2, x)) / 2.0;
            else if (y == h - 1)
                gy(y, x) = (3.0 * v(h - 1, x) - 4.0 * v(h - 2, x) + v(h - 3, x)) / 2.0;
            else
                gy(y, x) = (v(y + 1, x) - v(y - 1, x)) / 2.0;
        }
    return {gx, gy};
}

// Center crop to a square, then bilinear resize.
inline ImageGrid center_crop_resize(const ImageGrid& img, int target) {
    const int side = std::min(img.width, img.height);
    const int ox = (img.width - side) / 2, oy = (img.height - side) / 2;
    ImageGrid out;
    out.width = out.height = target;
    out.channels = img.channels;
    out.values.resize(static_cast<size_t>(target) * target * img.channels);
    for (int y = 0; y < target; ++y)
        for (int x = 0; x < target; ++x) {
            // map target pixel center into the cropped source
            const double sx = ox + (x + 0.5) * side / target - 0.5;
            const double sy = oy + (y + 0.5) * side / target - 0.5;
            const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, img.width - 1);
            const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, img.height - 1);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const int y1 = std::min(y0 + 1, img.height - 1);
            const double fx = std::clamp(sx - x0, 0.0, 1.0);
            const double fy = std::clamp(sy - y0, 0.0, 1.0);
            for (int c = 0; c < img.channels; ++c) {
                const double v = (1 - fx) * (1 - fy) * img.at(y0, x0, c) +
                                 fx * (1 - fy) * img.at(y0, x1, c) +
                                 (1 - fx) * fy * img.at(y1, x0, c) +
                                 fx * fy * img.at(y1, x1, c);
                out.at(y, x, c) = v;
            }
        }
    return out;
}

inline ImageGrid crop(const ImageGrid& img, int x0, int y0, int w, int h) {
    if (x0 < 0 || y0 < 0 || x0 + w > img.width || y0 + h > img.height)
        throw std::invalid_argument("crop: rectangle outside image");
    ImageGrid out;
    out.width = w;
    out.height = h;
    out.channels = img.channels;
    out.values.resize(static_cast<size_t>(w) * h * img.channels);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
    return out;
}

inline ImageGrid load_png(const std::string& path) {
    auto raw = png_io::read_png8(path);
    ImageGrid g;
    g.width = raw.width;
    g.height = raw.height;
    g.channels = raw.channels;
    if (g.channels != 1 && g.channels != 3)
        throw std::runtime_error("load_png: unsupported channel count " +
                                 std::to_string(g.channels) + " in " + path);
    g.values.resize(raw.pixels.size());
    for (size_t i = 0; i < raw.pixels.size(); ++i) g.values[i] = raw.pixels[i] / 255.0;
    return g;
}

inline void save_png(const std::string& path, const ImageGrid& img) {
    png_io::Raw8 raw;
    raw.width = img.width;
    raw.height = img.height;
    raw.channels = img.channels;
    raw.pixels.resize(img.values.size());
    for (size_t i = 0; i < img.values.size(); ++i)
        raw.pixels[i] =
            static_cast<uint8_t>(std::lround(std::clamp(img.values[i], 0.0, 1.0) * 255.0));
    png_io::write_png8(path, raw);
}

}  // namespace sasnet::img
