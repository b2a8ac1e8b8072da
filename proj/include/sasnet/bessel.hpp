#pragma once

// Integer-order Bessel functions of the first kind. Miller's backward
// recurrence with the J_0 + 2*sum J_{2k} = 1 normalization keeps high orders
// stable where the ascending series cancels; the series covers tiny arguments.

#include <cmath>
#include <cstdlib>
#include <vector>

namespace sasnet::bessel {

// Ascending series, valid for small |x| (used below |x| < 1e-3 where two
// terms already reach full precision).
inline double j_series(int n, double x) {
    double term = 1.0;
    for (int i = 1; i <= n; ++i) term *= (x / 2.0) / i;
    double sum = term;
    const double q = -(x / 2.0) * (x / 2.0);
    for (int m = 1; m <= 30; ++m) {
        term *= q / (m * (n + m));
        sum += term;
        if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    return sum;
}

// J_0(x), ..., J_kmax(x) for x >= 0.
inline std::vector<double> j_array(int kmax, double x) {
    std::vector<double> out(kmax + 1, 0.0);
    if (x == 0.0) {
        out[0] = 1.0;
        return out;
    }
    if (x < 1e-3) {
        for (int n = 0; n <= kmax; ++n) out[n] = j_series(n, x);
        return out;
    }
    // start the downward recurrence well above both kmax and x
    const int start = kmax + static_cast<int>(std::ceil(x)) + 24 +
                      static_cast<int>(2.0 * std::sqrt(std::max(x, 1.0)));
    std::vector<double> j(start + 2, 0.0);
    j[start + 1] = 0.0;
    j[start] = 1e-300;
    for (int k = start; k >= 1; --k) {
        j[k - 1] = (2.0 * k / x) * j[k] - j[k + 1];
        if (std::abs(j[k - 1]) > 1e280) {  // rescale to avoid overflow
            for (int i = k - 1; i <= start + 1; ++i) j[i] *= 1e-280;
        }
    }
    double norm = j[0];
    for (int k = 2; k <= start; k += 2) norm += 2.0 * j[k];
    for (int n = 0; n <= kmax; ++n) out[n] = j[n] / norm;
    return out;
}

// J_n(x) for any integer order and real argument.
inline double j(int n, double x) {
    double sign = 1.0;
    if (n < 0) {
        n = -n;
        if (n % 2 != 0) sign = -sign;
    }
    if (x < 0.0) {
        x = -x;
        if (n % 2 != 0) sign = -sign;
    }
    return sign * j_array(n, x)[n];
}

}  // namespace sasnet::bessel
