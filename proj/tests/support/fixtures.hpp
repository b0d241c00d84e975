// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <groundloop/simcore.hpp>

#include <cmath>
#include <vector>

namespace fixtures
{

namespace gl = groundloop;

inline gl::sim::ReservoirModel box(gl::mesh::MeshDims dims, double permeability, double porosity,
                                   gl::fluid::FluidSystem fluid, double gravity)
{
    auto mesh = gl::mesh::buildCartesianMesh(dims);
    auto geo = gl::mesh::computeGeometry(mesh);
    auto nc = mesh.cellCount();
    auto perm = gl::petro::PropertyField {"permeability", "m2", std::vector<double>(nc, permeability)};
    auto poro = gl::petro::PropertyField {"porosity", "1", std::vector<double>(nc, porosity)};
    return gl::sim::buildReservoirModel(std::move(mesh), std::move(geo), std::move(perm), std::move(poro), fluid,
                                        gravity);
}

/// Equal-viscosity quadratic waterflood in a horizontal 1D column: rate injector
/// in the first cell, BHP producer in the last.
struct BuckleyLeverett
{
    gl::sim::ReservoirModel model;
    gl::sim::SimState initial;
    gl::wells::Schedule schedule;
    gl::sim::SolverControls controls;
};

inline BuckleyLeverett buckleyLeverett(int cells, double pviTotal = 1.2, int reportSteps = 0)
{
    auto fluid = gl::fluid::FluidSystem {};
    fluid.viscosity = {1e-3, 1e-3};
    fluid.relperm = gl::fluid::RelPermModel::quadratic();
    fluid.density.kind = gl::fluid::DensityKind::Incompressible;
    fluid.density.referencePressure = 1e7;

    auto dims = gl::mesh::MeshDims {cells, 1, 1, 1000.0, 10.0, 10.0, 1000.0};
    auto bl = BuckleyLeverett {box(dims, 1e-12, 0.2, fluid, 0.0), {}, {}, {}};
    auto& m = bl.model;

    auto pv = m.totalPoreVolume();
    auto total = 1000.0 * 86400.0;
    auto rate = pviTotal * pv / total;
    m.wells.push_back(gl::wells::setupVerticalWell(m.mesh, m.geometry, m.permeability, "INJ", 0, 0, 0, 0, 0.1, 0.0,
                                                   gl::wells::WellKind::Injector,
                                                   gl::wells::WellControl::rate(rate)));
    m.wells.push_back(gl::wells::setupVerticalWell(m.mesh, m.geometry, m.permeability, "PROD", cells - 1, 0, 0, 0,
                                                   0.1, 0.0, gl::wells::WellKind::Producer,
                                                   gl::wells::WellControl::bhp(1e7)));
    gl::sim::assignWellboreDensities(m);
    bl.initial = gl::sim::SimState::uniform(m, 1e7, 0.0);
    bl.schedule = gl::wells::Schedule::uniform(total, reportSteps > 0 ? reportSteps : 2 * cells);
    bl.controls.initialDt = total / (4.0 * cells);
    bl.controls.maxDt = total / (2.0 * cells);
    bl.controls.minDt = 1.0;
    return bl;
}

/// Welge tangent for f = s^2 / (2 s^2 - 2 s + 1): shock saturation 1/sqrt(2),
/// breakthrough PVI 1 / f'(s*) = 2 (sqrt(2) - 1).
inline double welgeBreakthroughPvi()
{
    return 2.0 * (std::sqrt(2.0) - 1.0);
}

} // namespace fixtures
