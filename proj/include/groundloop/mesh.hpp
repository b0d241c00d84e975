// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace groundloop::mesh
{

struct Vec3
{
    double x = 0.0;
    double y = 0.0;
    double z = 0.0; ///< depth, positive downward

    friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
    friend bool operator==(const Vec3&, const Vec3&) = default;
};

double dot(Vec3 a, Vec3 b);
Vec3 cross(Vec3 a, Vec3 b);
double norm(Vec3 a);

struct MeshDims
{
    int nx = 1;
    int ny = 1;
    int nz = 1;
    double lx = 1.0;
    double ly = 1.0;
    double lz = 1.0;
    double originDepth = 0.0; ///< depth of the undeformed top surface

    [[nodiscard]] double dx() const { return lx / nx; }
    [[nodiscard]] double dy() const { return ly / ny; }
    [[nodiscard]] double dz() const { return lz / nz; }
    [[nodiscard]] std::size_t cellCount() const { return std::size_t(nx) * ny * nz; }
    [[nodiscard]] std::size_t nodeCount() const { return std::size_t(nx + 1) * (ny + 1) * (nz + 1); }

    /// Throws invalid-dims when any count < 1 or extent <= 0.
    void validate() const;
};

/// Stratigraphic deformation parameters. Interface depths are relative to the
/// undeformed top (0 .. lz) and also define the stratigraphic units.
struct DeformationSpec
{
    double undulationAmplitude = 0.0;
    double undulationWavelength = 500.0;
    double domeAmplitude = 0.0;
    double domeRadius = 400.0;
    std::vector<double> interfaceDepths; ///< strictly increasing, first 0, last lz

    void validate(double lz) const;
};

/// Equally spaced interfaces 0, lz/n, ..., lz.
std::vector<double> equalInterfaces(double lz, int units);

struct Mesh
{
    MeshDims dims;
    std::vector<Vec3> nodes;
    std::vector<std::array<std::size_t, 8>> cellNodes;
    std::vector<int> layerOfCell;
    int unitCount = 1;

    [[nodiscard]] std::size_t nodeIndex(int i, int j, int k) const
    {
        return std::size_t(i) + std::size_t(dims.nx + 1) * (std::size_t(j) + std::size_t(dims.ny + 1) * k);
    }
    [[nodiscard]] std::size_t cellIndex(int i, int j, int k) const
    {
        return std::size_t(i) + std::size_t(dims.nx) * (std::size_t(j) + std::size_t(dims.ny) * k);
    }
    [[nodiscard]] std::size_t cellCount() const { return cellNodes.size(); }
};

/// Axis-aligned mesh. Units are assigned from the undeformed cell-center depth
/// against `interfaceDepths`; an empty list means a single unit.
Mesh buildCartesianMesh(const MeshDims& dims, const std::vector<double>& interfaceDepths = {});

/// Piecewise-linear remap of node relative depths onto undulated interfaces.
/// Internal interface m (1-based) is shifted by +delta for odd m and -delta for even m,
/// which for four interfaces gives z1 = zmean[2] + delta and z2 = zmean[3] - delta.
Mesh applyUndulation(const Mesh& mesh, const DeformationSpec& spec);

/// Gaussian anticline: depth -= D(x, y) * (1 - z_rel / lz); the base does not move.
Mesh applyDome(const Mesh& mesh, const DeformationSpec& spec);

/// Canonical pipeline: cartesian mesh, then undulation, then dome.
Mesh buildDeformedMesh(const MeshDims& dims, const DeformationSpec& spec);

/// Throws degenerate-geometry if any pillar is not strictly increasing in depth.
void checkPillarMonotone(const Mesh& mesh);

struct Face
{
    std::size_t owner = 0;
    long neighbor = -1; ///< -1 on the outer boundary
    double area = 0.0;
    Vec3 normal;        ///< unit, pointing from owner to neighbor (outward on the boundary)
    Vec3 centroid;
    [[nodiscard]] bool boundary() const { return neighbor < 0; }
};

struct GeometrySummary
{
    std::vector<double> cellVolumes;
    std::vector<Vec3> cellCentroids;
    std::vector<Face> faces;

    [[nodiscard]] double totalVolume() const;
};

/// Volumes and centroids from a 24-tetrahedron split of every hexahedron
/// (apex at the cell's node average, faces fanned around their node average).
GeometrySummary computeGeometry(const Mesh& mesh);

} // namespace groundloop::mesh
