#pragma once

// The frozen first layer: integer frequency multipliers sampled in low/high
// bands, band-group assignment, phases, the truncated sinusoidal-expansion
// oracle (products of Bessel amplitudes), and spectrum tools.

#include <sasnet/bessel.hpp>
#include <sasnet/fft.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sasnet::freq {

using Mat = Eigen::MatrixXd;

// Frequency-domain symmetry: (kx,-ky) is equivalent to (-kx,ky), i.e. k ~ -k.
// Canonical representative has kx > 0, or kx == 0 with ky >= 0.
inline std::pair<int, int> canonical(int kx, int ky) {
    if (kx < 0 || (kx == 0 && ky < 0)) return {-kx, -ky};
    return {kx, ky};
}

// High bands split (L, B] into n_band contiguous intervals of width
// ceil((B-L)/n_band); a value on a boundary belongs to the lower band.
inline int band_group(int max_abs_k, int low_range, int band_limit, int n_band) {
    if (max_abs_k <= low_range) return 0;
    const int bw = (band_limit - low_range + n_band - 1) / n_band;
    int g = 1 + (max_abs_k - low_range - 1) / bw;
    return std::min(g, n_band);
}

struct MultiplierSample {
    Eigen::MatrixXi multipliers;  // width x 2, canonicalized
    std::vector<int> group_of;    // 0 = low band
};

// All distinct canonical points of the high region [-B,B]^2 \ [-L,L]^2.
inline std::vector<std::pair<int, int>> enumerate_high_band(int low_range, int band_limit) {
    std::set<std::pair<int, int>> pts;
    for (int kx = -band_limit; kx <= band_limit; ++kx)
        for (int ky = -band_limit; ky <= band_limit; ++ky) {
            if (std::max(std::abs(kx), std::abs(ky)) <= low_range) continue;
            pts.insert(canonical(kx, ky));
        }
    return {pts.begin(), pts.end()};
}

// Low multipliers: uniform over [-L,L]^2, canonicalized, duplicates allowed.
// High multipliers: drawn without replacement from the canonical high grid.
inline MultiplierSample sample_multipliers(int width, int low_range, int band_limit,
                                           double low_fraction, int n_band,
                                           std::mt19937_64& rng) {
    if (low_range <= 0 || low_range >= band_limit)
        throw std::invalid_argument("sample_multipliers: need 0 < L < B, got L=" +
                                    std::to_string(low_range) + " B=" +
                                    std::to_string(band_limit));
    const int n_low = static_cast<int>(std::floor(width * low_fraction));
    const int n_high = width - n_low;

    MultiplierSample out;
    out.multipliers.resize(width, 2);
    out.group_of.resize(width);

    std::uniform_int_distribution<int> low_dist(-low_range, low_range);
    for (int i = 0; i < n_low; ++i) {
        auto [kx, ky] = canonical(low_dist(rng), low_dist(rng));
        out.multipliers(i, 0) = kx;
        out.multipliers(i, 1) = ky;
        out.group_of[i] = 0;
    }

    auto high = enumerate_high_band(low_range, band_limit);
    if (n_high > static_cast<int>(high.size()))
        throw std::invalid_argument(
            "sample_multipliers: requested " + std::to_string(n_high) +
            " high-band multipliers but only " + std::to_string(high.size()) +
            " distinct canonical grid points exist");
    // partial Fisher-Yates draw without replacement
    for (int i = 0; i < n_high; ++i) {
        std::uniform_int_distribution<size_t> pick(i, high.size() - 1);
        std::swap(high[i], high[pick(rng)]);
        out.multipliers(n_low + i, 0) = high[i].first;
        out.multipliers(n_low + i, 1) = high[i].second;
        const int mk = std::max(std::abs(high[i].first), std::abs(high[i].second));
        out.group_of[n_low + i] = band_group(mk, low_range, band_limit, n_band);
    }
    return out;
}

struct FrequencyEmbedding {
    Eigen::MatrixXi multipliers;  // width x 2
    double base_freq = M_PI;      // 2*pi/P with P = 2
    Eigen::VectorXd phases;
    int band_limit = 0;
    int low_range = 0;
    int n_band = 0;
    std::vector<int> group_of;

    int width() const { return static_cast<int>(multipliers.rows()); }
    int n_groups() const { return n_band + 1; }

    // Frozen weight matrix of the first layer, 2 x width (input by neuron).
    Mat weight() const { return base_freq * multipliers.cast<double>().transpose(); }

    // sin(base_freq * <k, x> + phi), coords N x 2.
    Mat activations(const Mat& coords) const {
        Mat arg = coords * weight();
        arg.rowwise() += phases.transpose();
        return arg.array().sin().matrix();
    }

    // Pre-activation arguments, needed for analytic spatial derivatives.
    Mat arguments(const Mat& coords) const {
        Mat arg = coords * weight();
        arg.rowwise() += phases.transpose();
        return arg;
    }
};

inline FrequencyEmbedding build_embedding(const MultiplierSample& sample, int low_range,
                                          int band_limit, int n_band, double base_freq,
                                          std::mt19937_64& rng) {
    FrequencyEmbedding e;
    e.multipliers = sample.multipliers;
    e.group_of = sample.group_of;
    e.low_range = low_range;
    e.band_limit = band_limit;
    e.n_band = n_band;
    e.base_freq = base_freq;
    e.phases.resize(e.width());
    std::uniform_real_distribution<double> phase_dist(-M_PI, M_PI);
    for (int i = 0; i < e.width(); ++i) e.phases(i) = phase_dist(rng);
    return e;
}

// --- truncated sinusoidal expansion ----------------------------------------
// sin(sum_l w_l sin(y_l) + b) = sum_{k in Z^m} (prod_l J_{k_l}(w_l)) sin(<k,y> + b)

struct ExpansionTerm {
    std::vector<int> k;
    double amplitude;
};

// All terms with ||k||_inf <= K; terms with |amplitude| <= prune are dropped
// (prune = 0 keeps everything).
inline std::vector<ExpansionTerm> neuron_expansion(const std::vector<double>& w, int K,
                                                   double prune = 0.0) {
    if (K < 1) throw std::invalid_argument("neuron_expansion: K must be >= 1");
    const int m = static_cast<int>(w.size());
    // per-dimension Bessel amplitudes J_{-K}(w_l)..J_K(w_l)
    std::vector<std::vector<double>> amps(m, std::vector<double>(2 * K + 1));
    for (int l = 0; l < m; ++l)
        for (int k = -K; k <= K; ++k) amps[l][k + K] = bessel::j(k, w[l]);

    std::vector<ExpansionTerm> terms;
    std::vector<int> k(m, -K);
    while (true) {
        double a = 1.0;
        for (int l = 0; l < m; ++l) a *= amps[l][k[l] + K];
        if (std::abs(a) > prune) terms.push_back({k, a});
        int l = 0;
        for (; l < m; ++l) {
            if (++k[l] <= K) break;
            k[l] = -K;
        }
        if (l == m) break;
    }
    return terms;
}

inline double evaluate_expansion(const std::vector<ExpansionTerm>& terms, double b,
                                 const std::vector<double>& y) {
    double acc = 0.0;
    for (const auto& t : terms) {
        double phase = b;
        for (size_t l = 0; l < y.size(); ++l) phase += t.k[l] * y[l];
        acc += t.amplitude * std::sin(phase);
    }
    return acc;
}

// --- spectrum ---------------------------------------------------------------

struct PowerSpectrum {
    Mat power;  // res x res, fftshifted (DC at res/2, res/2), channel-averaged
    int res = 0;
};

// field: (res*res) x C, sampled row-major on the [-1,1]^2 pixel-center grid.
inline PowerSpectrum power_spectrum(const Mat& field, int res) {
    if (field.rows() != static_cast<long>(res) * res)
        throw std::invalid_argument("power_spectrum: field rows != res^2");
    if (res <= 0 || (res & (res - 1)) != 0)
        throw std::invalid_argument("power_spectrum: resolution must be a power of two");
    PowerSpectrum ps;
    ps.res = res;
    ps.power = Mat::Zero(res, res);
    std::vector<fft::cplx> grid(static_cast<size_t>(res) * res);
    for (long ch = 0; ch < field.cols(); ++ch) {
        for (long i = 0; i < field.rows(); ++i) grid[i] = fft::cplx(field(i, ch), 0.0);
        fft::fft2_inplace(grid, res);
        for (int r = 0; r < res; ++r)
            for (int c = 0; c < res; ++c) {
                const int sr = (r + res / 2) % res;  // fftshift
                const int sc = (c + res / 2) % res;
                ps.power(sr, sc) += std::norm(grid[r * res + c]);
            }
    }
    ps.power /= static_cast<double>(field.cols());
    return ps;
}

// Fraction of non-DC energy inside the +/-band harmonic box.
inline double band_energy_fraction(const PowerSpectrum& ps, int band) {
    const int c0 = ps.res / 2;
    double inside = 0.0, total = 0.0;
    for (int r = 0; r < ps.res; ++r)
        for (int c = 0; c < ps.res; ++c) {
            if (r == c0 && c == c0) continue;  // DC
            const double p = ps.power(r, c);
            total += p;
            if (std::abs(r - c0) <= band && std::abs(c - c0) <= band) inside += p;
        }
    return total > 0.0 ? inside / total : 1.0;
}

}  // namespace sasnet::freq
