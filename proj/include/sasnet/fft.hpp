#pragma once

// Radix-2 complex FFT, enough for power-of-two spectrum grids.

#include <complex>
#include <stdexcept>
#include <vector>

namespace sasnet::fft {

using cplx = std::complex<double>;

inline void fft_inplace(std::vector<cplx>& a) {
    const size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0)
        throw std::invalid_argument("fft: length must be a power of two, got " +
                                    std::to_string(n));
    // bit reversal
    for (size_t i = 1, rev = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; rev & bit; bit >>= 1) rev ^= bit;
        rev ^= bit;
        if (i < rev) std::swap(a[i], a[rev]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * M_PI / static_cast<double>(len);
        const cplx wlen(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                cplx u = a[i + k];
                cplx v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

// In-place 2D FFT of a row-major res x res grid.
inline void fft2_inplace(std::vector<cplx>& grid, int res) {
    if (static_cast<size_t>(res) * res != grid.size())
        throw std::invalid_argument("fft2: grid size does not match resolution");
    std::vector<cplx> line(res);
    for (int r = 0; r < res; ++r) {
        for (int c = 0; c < res; ++c) line[c] = grid[r * res + c];
        fft_inplace(line);
        for (int c = 0; c < res; ++c) grid[r * res + c] = line[c];
    }
    for (int c = 0; c < res; ++c) {
        for (int r = 0; r < res; ++r) line[r] = grid[r * res + c];
        fft_inplace(line);
        for (int r = 0; r < res; ++r) grid[r * res + c] = line[r];
    }
}

}  // namespace sasnet::fft
