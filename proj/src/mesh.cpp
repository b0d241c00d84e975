// SPDX-License-Identifier: Apache-2.0
#include <groundloop/error.hpp>
#include <groundloop/mesh.hpp>

#include <cmath>
#include <numbers>
#include <sstream>

namespace groundloop::mesh
{

double dot(Vec3 a, Vec3 b)
{
    return a.x * b.x + a.y * b.y + a.z * b.z;
}

Vec3 cross(Vec3 a, Vec3 b)
{
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

double norm(Vec3 a)
{
    return std::sqrt(dot(a, a));
}

void MeshDims::validate() const
{
    if (nx < 1 || ny < 1 || nz < 1)
        throw Error(ErrorKind::InvalidDims, "cell counts must be >= 1", "mesh.dims");
    if (!(lx > 0.0) || !(ly > 0.0) || !(lz > 0.0))
        throw Error(ErrorKind::InvalidDims, "domain extents must be > 0", "mesh.extent");
}

void DeformationSpec::validate(double lz) const
{
    if (!(undulationWavelength > 0.0))
        throw Error(ErrorKind::InvalidDims, "undulation wavelength must be > 0", "deformation.undulation_wavelength");
    if (!(domeRadius > 0.0))
        throw Error(ErrorKind::InvalidDims, "dome radius must be > 0", "deformation.dome_radius");
    if (interfaceDepths.empty())
        return;
    if (interfaceDepths.size() < 2)
        throw Error(ErrorKind::InvalidDims, "need at least two interface depths", "deformation.interface_depths");
    if (interfaceDepths.front() != 0.0 || std::abs(interfaceDepths.back() - lz) > 1e-9 * lz)
        throw Error(ErrorKind::InvalidDims, "interface depths must start at 0 and end at lz",
                    "deformation.interface_depths");
    auto minSpacing = lz;
    for (std::size_t m = 1; m < interfaceDepths.size(); ++m)
    {
        auto gap = interfaceDepths[m] - interfaceDepths[m - 1];
        if (!(gap > 0.0))
            throw Error(ErrorKind::InvalidDims, "interface depths must be strictly increasing",
                        "deformation.interface_depths");
        minSpacing = std::min(minSpacing, gap);
    }
    if (interfaceDepths.size() > 2 && !(std::abs(undulationAmplitude) < 0.5 * minSpacing))
        throw Error(ErrorKind::InvalidDims, "undulation amplitude must stay below half the minimum interface spacing",
                    "deformation.undulation_amplitude");
}

std::vector<double> equalInterfaces(double lz, int units)
{
    auto out = std::vector<double>(std::size_t(units) + 1);
    for (int m = 0; m <= units; ++m)
        out[m] = lz * m / units;
    out.back() = lz;
    return out;
}

Mesh buildCartesianMesh(const MeshDims& dims, const std::vector<double>& interfaceDepths)
{
    dims.validate();
    auto mesh = Mesh {};
    mesh.dims = dims;
    mesh.nodes.resize(dims.nodeCount());
    for (int k = 0; k <= dims.nz; ++k)
        for (int j = 0; j <= dims.ny; ++j)
            for (int i = 0; i <= dims.nx; ++i)
                mesh.nodes[mesh.nodeIndex(i, j, k)] = {
                    i * dims.dx(), j * dims.dy(), dims.originDepth + k * dims.dz()};

    auto interfaces = interfaceDepths.empty() ? std::vector<double> {0.0, dims.lz} : interfaceDepths;
    mesh.unitCount = int(interfaces.size()) - 1;
    mesh.cellNodes.resize(dims.cellCount());
    mesh.layerOfCell.resize(dims.cellCount());
    for (int k = 0; k < dims.nz; ++k)
    {
        auto center = (k + 0.5) * dims.dz();
        auto unit = 0;
        while (unit + 1 < mesh.unitCount && center > interfaces[unit + 1])
            ++unit;
        for (int j = 0; j < dims.ny; ++j)
            for (int i = 0; i < dims.nx; ++i)
            {
                auto c = mesh.cellIndex(i, j, k);
                mesh.cellNodes[c] = {mesh.nodeIndex(i, j, k),         mesh.nodeIndex(i + 1, j, k),
                                     mesh.nodeIndex(i + 1, j + 1, k), mesh.nodeIndex(i, j + 1, k),
                                     mesh.nodeIndex(i, j, k + 1),     mesh.nodeIndex(i + 1, j, k + 1),
                                     mesh.nodeIndex(i + 1, j + 1, k + 1), mesh.nodeIndex(i, j + 1, k + 1)};
                mesh.layerOfCell[c] = unit;
            }
    }
    return mesh;
}

void checkPillarMonotone(const Mesh& mesh)
{
    const auto& d = mesh.dims;
    for (int j = 0; j <= d.ny; ++j)
        for (int i = 0; i <= d.nx; ++i)
            for (int k = 0; k < d.nz; ++k)
                if (!(mesh.nodes[mesh.nodeIndex(i, j, k + 1)].z > mesh.nodes[mesh.nodeIndex(i, j, k)].z))
                {
                    auto where = std::ostringstream {};
                    where << "pillar (" << i << "," << j << ") between k=" << k << " and k=" << k + 1;
                    throw Error(ErrorKind::DegenerateGeometry, "inverted cell: depth not increasing along pillar",
                                where.str());
                }
}

Mesh applyUndulation(const Mesh& mesh, const DeformationSpec& spec)
{
    const auto& d = mesh.dims;
    spec.validate(d.lz);
    auto out = mesh;
    if (spec.undulationAmplitude == 0.0 || spec.interfaceDepths.size() < 3)
        return out;

    const auto& ref = spec.interfaceDepths;
    auto moved = ref;
    for (auto& node: out.nodes)
    {
        auto delta = spec.undulationAmplitude * std::sin(2.0 * std::numbers::pi * node.x / spec.undulationWavelength) *
                     std::sin(2.0 * std::numbers::pi * node.y / spec.undulationWavelength);
        for (std::size_t m = 1; m + 1 < ref.size(); ++m)
            moved[m] = ref[m] + ((m % 2 == 1) ? delta : -delta);
        for (std::size_t m = 1; m < moved.size(); ++m)
            if (!(moved[m] > moved[m - 1]))
                throw Error(ErrorKind::DegenerateGeometry, "undulated interfaces cross", "deformation.undulation_amplitude");

        auto rel = node.z - d.originDepth;
        auto m = std::size_t {0};
        while (m + 2 < ref.size() && rel > ref[m + 1])
            ++m;
        auto t = (rel - ref[m]) / (ref[m + 1] - ref[m]);
        node.z = d.originDepth + moved[m] + t * (moved[m + 1] - moved[m]);
    }
    checkPillarMonotone(out);
    return out;
}

Mesh applyDome(const Mesh& mesh, const DeformationSpec& spec)
{
    const auto& d = mesh.dims;
    spec.validate(d.lz);
    auto out = mesh;
    if (spec.domeAmplitude == 0.0)
        return out;

    auto cx = 0.5 * d.lx;
    auto cy = 0.5 * d.ly;
    auto twoR2 = 2.0 * spec.domeRadius * spec.domeRadius;
    for (auto& node: out.nodes)
    {
        auto r2 = (node.x - cx) * (node.x - cx) + (node.y - cy) * (node.y - cy);
        auto uplift = spec.domeAmplitude * std::exp(-r2 / twoR2);
        auto rel = node.z - d.originDepth;
        node.z -= uplift * (1.0 - rel / d.lz);
    }
    checkPillarMonotone(out);
    return out;
}

Mesh buildDeformedMesh(const MeshDims& dims, const DeformationSpec& spec)
{
    auto mesh = buildCartesianMesh(dims, spec.interfaceDepths);
    mesh = applyUndulation(mesh, spec);
    return applyDome(mesh, spec);
}

double GeometrySummary::totalVolume() const
{
    auto sum = 0.0;
    for (auto v: cellVolumes)
        sum += v;
    return sum;
}

namespace
{

// Local quad faces of a hexahedron, ordered so the right-hand normal points outward.
constexpr std::array<std::array<int, 4>, 6> kHexFaces = {{
    {0, 4, 7, 3}, // -x
    {1, 2, 6, 5}, // +x
    {0, 1, 5, 4}, // -y
    {3, 7, 6, 2}, // +y
    {0, 3, 2, 1}, // top
    {4, 5, 6, 7}, // bottom
}};

struct QuadGeometry
{
    Vec3 areaVector;
    Vec3 centroid;
};

// Fan of four triangles around the node average.
QuadGeometry quadGeometry(const std::array<Vec3, 4>& q)
{
    auto center = 0.25 * (q[0] + q[1] + q[2] + q[3]);
    auto area = Vec3 {};
    auto weighted = Vec3 {};
    auto total = 0.0;
    for (int e = 0; e < 4; ++e)
    {
        auto a = q[e];
        auto b = q[(e + 1) % 4];
        auto tri = 0.5 * cross(a - center, b - center);
        auto mag = norm(tri);
        area = area + tri;
        weighted = weighted + mag * ((1.0 / 3.0) * (a + b + center));
        total += mag;
    }
    return {area, total > 0.0 ? (1.0 / total) * weighted : center};
}

} // namespace

GeometrySummary computeGeometry(const Mesh& mesh)
{
    const auto& d = mesh.dims;
    auto geo = GeometrySummary {};
    auto nc = mesh.cellCount();
    geo.cellVolumes.resize(nc);
    geo.cellCentroids.resize(nc);

    for (std::size_t c = 0; c < nc; ++c)
    {
        const auto& ids = mesh.cellNodes[c];
        auto apex = Vec3 {};
        for (auto id: ids)
            apex = apex + mesh.nodes[id];
        apex = 0.125 * apex;

        auto volume = 0.0;
        auto moment = Vec3 {};
        for (const auto& face: kHexFaces)
        {
            auto fc = 0.25 * (mesh.nodes[ids[face[0]]] + mesh.nodes[ids[face[1]]] + mesh.nodes[ids[face[2]]] +
                              mesh.nodes[ids[face[3]]]);
            for (int e = 0; e < 4; ++e)
            {
                auto a = mesh.nodes[ids[face[e]]];
                auto b = mesh.nodes[ids[face[(e + 1) % 4]]];
                auto v = dot(cross(a - fc, b - fc), fc - apex) / 6.0;
                volume += v;
                moment = moment + v * (0.25 * (apex + fc + a + b));
            }
        }
        if (!(volume > 0.0))
        {
            auto where = std::ostringstream {};
            where << "cell " << c;
            throw Error(ErrorKind::DegenerateGeometry, "non-positive cell volume", where.str());
        }
        geo.cellVolumes[c] = volume;
        geo.cellCentroids[c] = (1.0 / volume) * moment;
    }

    auto addFace = [&](std::array<std::size_t, 4> ids, std::size_t owner, long neighbor) {
        auto q = std::array<Vec3, 4> {mesh.nodes[ids[0]], mesh.nodes[ids[1]], mesh.nodes[ids[2]], mesh.nodes[ids[3]]};
        auto g = quadGeometry(q);
        auto area = norm(g.areaVector);
        if (!(area > 0.0))
            throw Error(ErrorKind::DegenerateGeometry, "zero-area face");
        geo.faces.push_back({owner, neighbor, area, (1.0 / area) * g.areaVector, g.centroid});
    };
    auto reversed = [](std::array<std::size_t, 4> a) { return std::array<std::size_t, 4> {a[0], a[3], a[2], a[1]}; };

    // x-normal faces
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i <= d.nx; ++i)
            {
                auto ids = std::array<std::size_t, 4> {mesh.nodeIndex(i, j, k), mesh.nodeIndex(i, j + 1, k),
                                                       mesh.nodeIndex(i, j + 1, k + 1), mesh.nodeIndex(i, j, k + 1)};
                if (i == 0)
                    addFace(reversed(ids), mesh.cellIndex(0, j, k), -1);
                else if (i == d.nx)
                    addFace(ids, mesh.cellIndex(i - 1, j, k), -1);
                else
                    addFace(ids, mesh.cellIndex(i - 1, j, k), long(mesh.cellIndex(i, j, k)));
            }
    // y-normal faces
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j <= d.ny; ++j)
            for (int i = 0; i < d.nx; ++i)
            {
                auto ids = std::array<std::size_t, 4> {mesh.nodeIndex(i, j, k), mesh.nodeIndex(i, j, k + 1),
                                                       mesh.nodeIndex(i + 1, j, k + 1), mesh.nodeIndex(i + 1, j, k)};
                if (j == 0)
                    addFace(reversed(ids), mesh.cellIndex(i, 0, k), -1);
                else if (j == d.ny)
                    addFace(ids, mesh.cellIndex(i, j - 1, k), -1);
                else
                    addFace(ids, mesh.cellIndex(i, j - 1, k), long(mesh.cellIndex(i, j, k)));
            }
    // depth-normal faces
    for (int k = 0; k <= d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i)
            {
                auto ids = std::array<std::size_t, 4> {mesh.nodeIndex(i, j, k), mesh.nodeIndex(i + 1, j, k),
                                                       mesh.nodeIndex(i + 1, j + 1, k), mesh.nodeIndex(i, j + 1, k)};
                if (k == 0)
                    addFace(reversed(ids), mesh.cellIndex(i, j, 0), -1);
                else if (k == d.nz)
                    addFace(ids, mesh.cellIndex(i, j, k - 1), -1);
                else
                    addFace(ids, mesh.cellIndex(i, j, k - 1), long(mesh.cellIndex(i, j, k)));
            }
    return geo;
}

} // namespace groundloop::mesh
