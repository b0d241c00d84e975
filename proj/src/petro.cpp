// SPDX-License-Identifier: Apache-2.0
#include <groundloop/error.hpp>
#include <groundloop/hash.hpp>
#include <groundloop/petro.hpp>

#include <cmath>
#include <numbers>

namespace groundloop::petro
{

LogParams momentMatch(double mean, double std)
{
    if (!(mean > 0.0))
        throw Error(ErrorKind::InvalidStats, "lognormal mean must be > 0");
    if (!(std >= 0.0))
        throw Error(ErrorKind::InvalidStats, "lognormal std must be >= 0");
    auto cv = std / mean;
    auto var = std::log1p(cv * cv);
    return {std::log(mean) - 0.5 * var, std::sqrt(var)};
}

const char* toString(SamplingStrategy s)
{
    return s == SamplingStrategy::LayerBatched ? "layer_batched" : "cell_interleaved";
}

SamplingStrategy samplingStrategyFromString(const std::string& s)
{
    if (s == "layer_batched")
        return SamplingStrategy::LayerBatched;
    if (s == "cell_interleaved")
        return SamplingStrategy::CellInterleaved;
    throw Error(ErrorKind::Parse, "unknown sampling strategy '" + s + "'", "sampling.strategy");
}

NormalStream::NormalStream(std::uint64_t seed): _engine(seed)
{
}

double NormalStream::uniform()
{
    return double((_engine() >> 11) + 1) * 0x1.0p-53;
}

double NormalStream::standard()
{
    auto u1 = uniform();
    auto u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double NormalStream::lognormal(const LogParams& p)
{
    return std::exp(p.logMu + p.logSigma * standard());
}

std::string PropertyField::contentHash() const
{
    return sha256Hex(std::span<const double>(values));
}

namespace
{

struct UnitSampler
{
    LogParams perm;
    LogParams poro;
};

} // namespace

SampledFields sampleFields(const mesh::Mesh& mesh, const LayerStats& stats, const SamplingPlan& plan)
{
    if (plan.rngFamily != kRngFamily)
        throw Error(ErrorKind::InvalidStats, "unsupported rng family '" + plan.rngFamily + "'", "sampling.rng_family");
    if (int(stats.size()) != mesh.unitCount)
        throw Error(ErrorKind::InvalidStats,
                    "layer statistics cover " + std::to_string(stats.size()) + " units but the mesh has " +
                        std::to_string(mesh.unitCount),
                    "layers");

    auto samplers = std::vector<UnitSampler> {};
    for (const auto& unit: stats)
        samplers.push_back({unit.permeability.logParams(), unit.porosity.logParams()});

    auto nc = mesh.cellCount();
    auto out = SampledFields {};
    out.permeability = {"permeability", "m2", std::vector<double>(nc)};
    out.porosity = {"porosity", "1", std::vector<double>(nc)};

    auto rng = NormalStream(plan.seed);
    auto drawPorosity = [&](const LogParams& p) {
        auto v = rng.lognormal(p);
        while (v > plan.porosityCap)
        {
            ++out.porosityRedraws;
            v = rng.lognormal(p);
        }
        return v;
    };

    if (plan.strategy == SamplingStrategy::LayerBatched)
    {
        auto cellsOfUnit = std::vector<std::vector<std::size_t>>(stats.size());
        for (std::size_t c = 0; c < nc; ++c)
            cellsOfUnit[mesh.layerOfCell[c]].push_back(c);
        for (std::size_t u = 0; u < stats.size(); ++u)
        {
            for (auto c: cellsOfUnit[u])
                out.permeability.values[c] = rng.lognormal(samplers[u].perm);
            for (auto c: cellsOfUnit[u])
                out.porosity.values[c] = drawPorosity(samplers[u].poro);
        }
    }
    else
    {
        for (std::size_t c = 0; c < nc; ++c)
        {
            const auto& s = samplers[mesh.layerOfCell[c]];
            out.permeability.values[c] = rng.lognormal(s.perm);
            out.porosity.values[c] = drawPorosity(s.poro);
        }
    }
    return out;
}

double poreVolume(const mesh::GeometrySummary& geometry, const PropertyField& porosity)
{
    if (porosity.values.size() != geometry.cellVolumes.size())
        throw Error(ErrorKind::InvalidStats, "porosity field length does not match cell count");
    auto sum = 0.0;
    for (std::size_t c = 0; c < porosity.values.size(); ++c)
        sum += porosity.values[c] * geometry.cellVolumes[c];
    return sum;
}

} // namespace groundloop::petro
