// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <groundloop/mesh.hpp>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace groundloop::petro
{

/// Darcy in m^2.
inline constexpr double kDarcy = 9.869233e-13;
inline constexpr double kMilliDarcy = 1e-3 * kDarcy;

struct LogParams
{
    double logMu = 0.0;
    double logSigma = 0.0;
};

/// Log-space parameters whose lognormal has the given arithmetic mean and std.
LogParams momentMatch(double mean, double std);

struct LognormalSpec
{
    double mean = 1.0;
    double std = 0.0;

    [[nodiscard]] LogParams logParams() const { return momentMatch(mean, std); }
};

/// One entry per stratigraphic unit. Permeability in m^2, porosity as a fraction.
struct UnitStats
{
    LognormalSpec permeability;
    LognormalSpec porosity;
};
using LayerStats = std::vector<UnitStats>;

enum class SamplingStrategy
{
    LayerBatched,
    CellInterleaved,
};

const char* toString(SamplingStrategy s);
SamplingStrategy samplingStrategyFromString(const std::string& s);

/// The only generator family implemented. Standard-specified mt19937_64 bit stream,
/// 53-bit uniforms and a cosine-branch Box-Muller transform (two uniforms per normal).
inline constexpr const char* kRngFamily = "mt19937_64/box-muller/v1";

struct SamplingPlan
{
    std::uint64_t seed = 42;
    SamplingStrategy strategy = SamplingStrategy::LayerBatched;
    std::string rngFamily = kRngFamily;
    /// Porosity draws above this are rejected and redrawn.
    double porosityCap = 0.95;
};

class NormalStream
{
  public:
    explicit NormalStream(std::uint64_t seed);
    double uniform();  ///< in (0, 1]
    double standard(); ///< N(0, 1)
    double lognormal(const LogParams& p);

  private:
    std::mt19937_64 _engine;
};

struct PropertyField
{
    std::string name;
    std::string unit;
    std::vector<double> values;

    [[nodiscard]] std::string contentHash() const;
};

struct SampledFields
{
    PropertyField permeability;
    PropertyField porosity;
    std::size_t porosityRedraws = 0;
};

SampledFields sampleFields(const mesh::Mesh& mesh, const LayerStats& stats, const SamplingPlan& plan);

double poreVolume(const mesh::GeometrySummary& geometry, const PropertyField& porosity);

} // namespace groundloop::petro
