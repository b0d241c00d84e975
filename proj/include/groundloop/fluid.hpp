// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <groundloop/ad.hpp>
#include <groundloop/error.hpp>

#include <algorithm>
#include <array>
#include <string>
#include <utility>

namespace groundloop::fluid
{

/// Phase 0 is the wetting/displacing phase (water), phase 1 the displaced phase (oil).
enum Phase : int
{
    Wetting = 0,
    NonWetting = 1,
};

enum class RelPermFamily
{
    Quadratic,
    BrooksCorey,
};

const char* toString(RelPermFamily f);
RelPermFamily relPermFamilyFromString(const std::string& s);

struct RelPermModel
{
    RelPermFamily family = RelPermFamily::BrooksCorey;
    std::array<double, 2> exponent {2.0, 2.0};
    std::array<double, 2> residual {0.0, 0.0};
    std::array<double, 2> endpoint {1.0, 1.0};

    static RelPermModel quadratic() { return {RelPermFamily::Quadratic, {2.0, 2.0}, {0.0, 0.0}, {1.0, 1.0}}; }

    /// Parameters actually used for evaluation (Quadratic ignores the stored ones).
    [[nodiscard]] RelPermModel effective() const
    {
        return family == RelPermFamily::Quadratic ? quadratic() : *this;
    }
    void validate() const;
};

enum class DensityKind
{
    ConstantCompressibility,
    Incompressible,
};

struct DensityClosure
{
    DensityKind kind = DensityKind::ConstantCompressibility;
    double referencePressure = 1e5;
    std::array<double, 2> referenceDensity {1000.0, 800.0};
    std::array<double, 2> compressibility {1e-10, 1e-10};

    [[nodiscard]] double c(int phase) const { return kind == DensityKind::Incompressible ? 0.0 : compressibility[phase]; }
    void validate() const;
};

struct FluidSystem
{
    std::array<double, 2> viscosity {5e-4, 5e-3};
    RelPermModel relperm;
    DensityClosure density;

    void validate() const;
};

/// (kr_w, kr_n) with the effective saturation clamped to [0, 1].
template <class T>
std::pair<T, T> relperm(const RelPermModel& model, const T& sw)
{
    auto m = model.effective();
    auto span = 1.0 - m.residual[0] - m.residual[1];
    T se = (sw - T(m.residual[0])) / T(span);
    if (value(se) < 0.0)
        se = T(0.0);
    else if (value(se) > 1.0)
        se = T(1.0);
    T krw = T(m.endpoint[0]) * powAd(se, m.exponent[0]);
    T krn = T(m.endpoint[1]) * powAd(T(1.0) - se, m.exponent[1]);
    return {krw, krn};
}

/// rho_ref * (1 + c (p - p_ref)); throws nonphysical-state when the result is <= 0.
template <class T>
T density(const DensityClosure& closure, int phase, const T& p)
{
    T rho = T(closure.referenceDensity[phase]) * (T(1.0) + T(closure.c(phase)) * (p - T(closure.referencePressure)));
    if (!(value(rho) > 0.0))
        throw Error(ErrorKind::NonphysicalState, "non-positive density", phase == Wetting ? "phase wetting" : "phase non-wetting");
    return rho;
}

/// Endpoint mobility of the displacing phase over the displaced phase.
double mobilityRatio(const FluidSystem& system);
inline bool favorable(const FluidSystem& system)
{
    return mobilityRatio(system) <= 1.0;
}

/// lambda_w / (lambda_w + lambda_n), ignoring gravity and capillarity.
double fractionalFlow(const FluidSystem& system, double sw);

} // namespace groundloop::fluid
