#pragma once
#include "kin/vec3.hpp"

namespace kin::hermite {

// Monomial coefficients in the unit variable t = (s - s0)/h of the quintic
// matching value, first and second derivative at both ends.
template <class T>
inline void quintic(const T& y0, const T& d0, const T& dd0, const T& y1, const T& d1, const T& dd1, double h,
                    T c[6]) {
    c[0] = y0;
    c[1] = h * d0;
    c[2] = (0.5 * h * h) * dd0;
    T delta = y1 - c[0] - c[1] - c[2];
    T e1 = h * d1 - c[1] - 2.0 * c[2];
    T e2 = (h * h) * dd1 - 2.0 * c[2];
    c[3] = 10.0 * delta - 4.0 * e1 + 0.5 * e2;
    c[4] = -15.0 * delta + 7.0 * e1 - e2;
    c[5] = 6.0 * delta - 3.0 * e1 + 0.5 * e2;
}

template <class T>
inline void cubic(const T& y0, const T& d0, const T& y1, const T& d1, double h, T c[4]) {
    c[0] = y0;
    c[1] = h * d0;
    T delta = y1 - c[0] - c[1];
    T e1 = h * d1 - c[1];
    c[2] = 3.0 * delta - e1;
    c[3] = -2.0 * delta + e1;
}

// Value and derivatives (w.r.t. s, i.e. divided by h^k) of a degree-(N-1) polynomial.
template <class T, int N>
inline void eval(const T (&c)[N], double t, double h, T& y, T& dy, T& ddy) {
    y = c[N - 1];
    dy = (N - 1) * c[N - 1];
    ddy = ((N - 1) * (N - 2)) * c[N - 1];
    for (int k = N - 2; k >= 0; --k) {
        y = y * t + c[k];
        if (k >= 1) dy = dy * t + k * c[k];
        if (k >= 2) ddy = ddy * t + (k * (k - 1)) * c[k];
    }
    dy = dy * (1.0 / h);
    ddy = ddy * (1.0 / (h * h));
}

// Third derivative w.r.t. s of the quintic from quintic().
template <class T>
inline T third(const T (&c)[6], double t, double h) {
    return (6.0 * c[3] + (24.0 * t) * c[4] + (60.0 * t * t) * c[5]) * (1.0 / (h * h * h));
}

}  // namespace kin::hermite
