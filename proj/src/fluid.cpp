// SPDX-License-Identifier: Apache-2.0
#include <groundloop/fluid.hpp>

namespace groundloop::fluid
{

const char* toString(RelPermFamily f)
{
    return f == RelPermFamily::Quadratic ? "quadratic" : "brooks_corey";
}

RelPermFamily relPermFamilyFromString(const std::string& s)
{
    if (s == "quadratic")
        return RelPermFamily::Quadratic;
    if (s == "brooks_corey")
        return RelPermFamily::BrooksCorey;
    throw Error(ErrorKind::Parse, "unknown relative permeability family '" + s + "'", "fluids.relperm.family");
}

void RelPermModel::validate() const
{
    for (int p = 0; p < 2; ++p)
    {
        if (!(exponent[p] >= 1.0))
            throw Error(ErrorKind::InvariantViolation, "relperm exponent must be >= 1", "fluids.relperm.exponents");
        if (!(residual[p] >= 0.0))
            throw Error(ErrorKind::InvariantViolation, "residual saturation must be >= 0", "fluids.relperm.residuals");
        if (!(endpoint[p] > 0.0 && endpoint[p] <= 1.0))
            throw Error(ErrorKind::InvariantViolation, "relperm endpoint must be in (0, 1]", "fluids.relperm.endpoints");
    }
    if (!(residual[0] + residual[1] < 1.0))
        throw Error(ErrorKind::InvariantViolation, "residual saturations must sum to < 1", "fluids.relperm.residuals");
}

void DensityClosure::validate() const
{
    for (int p = 0; p < 2; ++p)
    {
        if (!(referenceDensity[p] > 0.0))
            throw Error(ErrorKind::InvariantViolation, "reference density must be > 0", "fluids.density");
        if (!(compressibility[p] >= 0.0))
            throw Error(ErrorKind::InvariantViolation, "compressibility must be >= 0", "fluids.density_closure");
    }
    if (!(referencePressure > 0.0))
        throw Error(ErrorKind::InvariantViolation, "reference pressure must be > 0", "fluids.density_closure");
}

void FluidSystem::validate() const
{
    if (!(viscosity[0] > 0.0 && viscosity[1] > 0.0))
        throw Error(ErrorKind::InvariantViolation, "viscosities must be > 0", "fluids.viscosity");
    relperm.validate();
    density.validate();
}

double mobilityRatio(const FluidSystem& system)
{
    auto m = system.relperm.effective();
    return (m.endpoint[0] / system.viscosity[0]) / (m.endpoint[1] / system.viscosity[1]);
}

double fractionalFlow(const FluidSystem& system, double sw)
{
    auto [krw, krn] = relperm(system.relperm, sw);
    auto lw = krw / system.viscosity[0];
    auto ln = krn / system.viscosity[1];
    if (lw + ln == 0.0)
        throw Error(ErrorKind::UndefinedFractionalFlow, "both phases immobile");
    return lw / (lw + ln);
}

} // namespace groundloop::fluid
