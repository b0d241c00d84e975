// SPDX-License-Identifier: Apache-2.0
#include <groundloop/error.hpp>
#include <groundloop/wells.hpp>

#include <cmath>
#include <numbers>

namespace groundloop::wells
{

const char* toString(WellKind k)
{
    return k == WellKind::Injector ? "injector" : "producer";
}

double peacemanWi(double dx, double dy, double dz, double k, double rw, double skin)
{
    if (!(dx > 0.0 && dy > 0.0 && dz > 0.0 && k > 0.0 && rw > 0.0))
        throw Error(ErrorKind::InvalidWell, "well index inputs must be positive");
    auto re = 0.14 * std::sqrt(dx * dx + dy * dy);
    if (!(re > rw))
        throw Error(ErrorKind::InvalidWell, "equivalent radius does not exceed wellbore radius", "radius");
    auto denom = std::log(re / rw) + skin;
    if (!(denom > 0.0))
        throw Error(ErrorKind::InvalidWell, "ln(re/rw) + skin must be positive", "skin");
    return 2.0 * std::numbers::pi * k * dz / denom;
}

Well setupVerticalWell(const mesh::Mesh& mesh, const mesh::GeometrySummary& geometry,
                       const petro::PropertyField& permeability, std::string name, int i, int j, int kTop,
                       int kBottom, double radius, double skin, WellKind kind, WellControl control)
{
    const auto& d = mesh.dims;
    if (i < 0 || i >= d.nx || j < 0 || j >= d.ny)
        throw Error(ErrorKind::InvalidWell, "well column (" + std::to_string(i) + "," + std::to_string(j) + ") outside mesh",
                    name);
    if (kTop < 0 || kBottom >= d.nz || kTop > kBottom)
        throw Error(ErrorKind::InvalidWell, "empty or out-of-range perforation interval", name);

    auto well = Well {};
    well.name = std::move(name);
    well.kind = kind;
    well.i = i;
    well.j = j;
    well.kTop = kTop;
    well.kBottom = kBottom;
    well.radius = radius;
    well.skin = skin;
    well.control = control;
    for (int k = kTop; k <= kBottom; ++k)
    {
        auto c = mesh.cellIndex(i, j, k);
        auto dz = geometry.cellVolumes[c] / (d.dx() * d.dy());
        auto wi = peacemanWi(d.dx(), d.dy(), dz, permeability.values[c], radius, skin);
        well.connections.push_back({c, wi, geometry.cellCentroids[c].z});
    }
    well.referenceDepth = well.connections.front().depth;
    return well;
}

double deriveInjectionRate(double poreVolume, double totalTime, int injectors)
{
    if (!(poreVolume > 0.0 && totalTime > 0.0 && injectors > 0))
        throw Error(ErrorKind::InvalidWell, "pore volume, total time and injector count must be positive");
    return poreVolume / (totalTime * injectors);
}

Schedule Schedule::uniform(double totalTime, int steps)
{
    auto s = Schedule {totalTime, {}};
    for (int n = 1; n <= steps; ++n)
        s.reportTimes.push_back(n == steps ? totalTime : totalTime * n / steps);
    return s;
}

void Schedule::validate() const
{
    if (!(totalTime > 0.0))
        throw Error(ErrorKind::InvariantViolation, "total time must be > 0", "schedule.total_time");
    if (reportTimes.empty() || reportTimes.back() != totalTime)
        throw Error(ErrorKind::InvariantViolation, "last report time must equal total time", "schedule.report_times");
    auto prev = 0.0;
    for (auto t: reportTimes)
    {
        if (!(t > prev))
            throw Error(ErrorKind::InvariantViolation, "report times must be strictly increasing", "schedule.report_times");
        prev = t;
    }
}

} // namespace groundloop::wells
