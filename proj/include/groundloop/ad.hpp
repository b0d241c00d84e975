// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>

namespace groundloop
{

/// Forward-mode dual number with a fixed number of local derivatives. Residual
/// kernels are written once over a scalar template and evaluated either with
/// plain doubles or with Dual<N> to get exact local Jacobian blocks.
template <int N>
struct Dual
{
    double v = 0.0;
    std::array<double, N> d {};

    Dual() = default;
    Dual(double value): v(value) {} // NOLINT: implicit constant lift

    static Dual variable(double value, int index)
    {
        auto x = Dual(value);
        x.d[index] = 1.0;
        return x;
    }

    Dual& operator+=(const Dual& o)
    {
        v += o.v;
        for (int i = 0; i < N; ++i)
            d[i] += o.d[i];
        return *this;
    }
    Dual& operator-=(const Dual& o)
    {
        v -= o.v;
        for (int i = 0; i < N; ++i)
            d[i] -= o.d[i];
        return *this;
    }
    Dual& operator*=(const Dual& o)
    {
        for (int i = 0; i < N; ++i)
            d[i] = d[i] * o.v + v * o.d[i];
        v *= o.v;
        return *this;
    }
    Dual& operator/=(const Dual& o)
    {
        auto inv = 1.0 / o.v;
        for (int i = 0; i < N; ++i)
            d[i] = (d[i] - v * inv * o.d[i]) * inv;
        v *= inv;
        return *this;
    }

    friend Dual operator+(Dual a, const Dual& b) { return a += b; }
    friend Dual operator-(Dual a, const Dual& b) { return a -= b; }
    friend Dual operator*(Dual a, const Dual& b) { return a *= b; }
    friend Dual operator/(Dual a, const Dual& b) { return a /= b; }
    friend Dual operator-(Dual a)
    {
        a.v = -a.v;
        for (auto& x: a.d)
            x = -x;
        return a;
    }
};

inline double value(double x)
{
    return x;
}
template <int N>
double value(const Dual<N>& x)
{
    return x.v;
}

/// x^n for real n >= 1, with the derivative taken as 0 at x == 0.
inline double powAd(double x, double n)
{
    return std::pow(x, n);
}
template <int N>
Dual<N> powAd(const Dual<N>& x, double n)
{
    auto out = Dual<N>(std::pow(x.v, n));
    auto slope = x.v > 0.0 ? n * std::pow(x.v, n - 1.0) : 0.0;
    for (int i = 0; i < N; ++i)
        out.d[i] = slope * x.d[i];
    return out;
}

/// Lift a Dual<M> into Dual<N> placing its derivatives at an offset.
template <int N, int M>
Dual<N> embed(const Dual<M>& x, int offset)
{
    auto out = Dual<N>(x.v);
    for (int i = 0; i < M; ++i)
        out.d[offset + i] = x.d[i];
    return out;
}

} // namespace groundloop
