// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <groundloop/simcore.hpp>
#include <groundloop/spec.hpp>

#include <filesystem>
#include <string>

namespace groundloop::pipeline
{

/// Everything needed to run a resolved config.
struct BuiltModel
{
    sim::ReservoirModel model;
    sim::SimState initial;
    wells::Schedule schedule;
    sim::SolverControls controls;
    std::size_t porosityRedraws = 0;
    double injectionRate = 0.0; ///< per injector, m^3/s
    double bulkVolume = 0.0;
};

mesh::Mesh buildMesh(const spec::ExecutableConfig& config);

/// Sampled fields; a constant porosity spec overwrites the porosity draws.
petro::SampledFields buildFields(const spec::ExecutableConfig& config, const mesh::Mesh& mesh);

BuiltModel build(const spec::ExecutableConfig& config);

/// Pore volume of the config's mesh and fields without assembling wells.
double configPoreVolume(const spec::ExecutableConfig& config);

struct Run
{
    spec::ExecutableConfig config;
    BuiltModel built;
    sim::RunResult result;
};

Run run(const spec::ExecutableConfig& config);

/// Summary document of a run: identity hashes, certificate, counters, failure.
spec::Json runManifest(const Run& run);

/// Writes config.json, manifest.json, steps.tsv, wells.tsv and snapshots/*.tsv
/// into `dir` (created if needed).
void writeResults(const std::filesystem::path& dir, const Run& run);

/// Reloads a directory written by writeResults. The model is rebuilt from the
/// stored config and the results from the tables.
Run loadResults(const std::filesystem::path& dir);

} // namespace groundloop::pipeline
