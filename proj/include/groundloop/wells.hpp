// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <groundloop/mesh.hpp>
#include <groundloop/petro.hpp>

#include <string>
#include <vector>

namespace groundloop::wells
{

enum class WellKind
{
    Injector,
    Producer,
};

const char* toString(WellKind k);

enum class ControlType
{
    Rate, ///< total volumetric rate at reference density, m^3/s (injected phase for injectors)
    Bhp,  ///< bottom-hole pressure, Pa
};

struct WellControl
{
    ControlType type = ControlType::Bhp;
    double target = 0.0;

    static WellControl rate(double q) { return {ControlType::Rate, q}; }
    static WellControl bhp(double p) { return {ControlType::Bhp, p}; }
};

struct Connection
{
    std::size_t cell = 0;
    double wellIndex = 0.0; ///< m^3
    double depth = 0.0;     ///< cell centroid depth
};

struct Well
{
    std::string name;
    WellKind kind = WellKind::Producer;
    int i = 0;
    int j = 0;
    int kTop = 0;    ///< inclusive
    int kBottom = 0; ///< inclusive
    double radius = 0.1;
    double skin = 0.0;
    WellControl control;
    std::vector<Connection> connections;
    double referenceDepth = 0.0;     ///< BHP datum: shallowest connection
    double wellboreDensity = 1000.0; ///< single-node hydrostatic mixture density
};

/// Peaceman equivalent-radius well index: 2 pi k dz / (ln(re / rw) + skin),
/// re = 0.14 sqrt(dx^2 + dy^2).
double peacemanWi(double dx, double dy, double dz, double k, double rw, double skin);

/// One connection per perforated cell, k-range inclusive. The effective cell
/// thickness for the well index is volume / (dx dy).
Well setupVerticalWell(const mesh::Mesh& mesh, const mesh::GeometrySummary& geometry,
                       const petro::PropertyField& permeability, std::string name, int i, int j, int kTop,
                       int kBottom, double radius, double skin, WellKind kind, WellControl control);

/// Per-injector rate such that n * rate * total_time = pore_volume.
double deriveInjectionRate(double poreVolume, double totalTime, int injectors);

struct Schedule
{
    double totalTime = 0.0;
    std::vector<double> reportTimes; ///< strictly increasing, last == totalTime

    static Schedule uniform(double totalTime, int steps);
    void validate() const;
};

} // namespace groundloop::wells
