// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <groundloop/pipeline.hpp>
#include <groundloop/spec.hpp>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace groundloop::audit
{

using spec::Json;

/// Fields a description at some level no longer carries. Coarsened pointers are
/// removed too but leave an abstraction behind (exact producers become a count
/// with interior placement).
struct LevelMask
{
    spec::Level level = spec::Level::Reproduction;
    std::vector<std::string> removed;
    std::vector<std::string> coarsened;

    static LevelMask forLevel(spec::Level level);
    [[nodiscard]] Json toJson() const;
};

/// Reproduction, Report and Journal masks in order of increasing loss.
std::vector<LevelMask> standardMasks();

spec::ModelSpec degrade(const spec::ModelSpec& spec, const LevelMask& mask);

struct Reconstruction
{
    spec::ExecutableConfig config;
    spec::AssumptionLedger ledger;
};

/// Resolves a degraded spec. Interactive policies without answers for every
/// open item are refused with a query error; reconstruction never blocks.
Reconstruction reconstruct(const spec::ModelSpec& degraded, const spec::ResolvePolicy& policy = {});

/// A config with its ledger and run.
struct Subject
{
    spec::AssumptionLedger ledger;
    pipeline::Run run;
};

Subject runSubject(const Reconstruction& reconstruction);

struct Tolerances
{
    double scalarRel = 1e-9;    ///< config scalars
    double statsRel = 0.01;     ///< field statistics and pore/bulk volume
    double rateL1 = 0.02;       ///< PVI-aligned producer rate curves, relative L1
    double pressureRel = 0.01;  ///< average-pressure trajectory, max relative deviation
    double saturationL1 = 0.01; ///< pore-volume weighted mean |delta sw|
};

/// Recursive comparison with a relative tolerance on numbers.
bool sameValue(const Json& a, const Json& b, double rel);

enum class DiffStatus
{
    Equal,
    Differs,
    OnlyReference,
    OnlyCandidate,
};

const char* toString(DiffStatus s);

struct Attribution
{
    std::string key;
    spec::Provenance provenance = spec::Provenance::AgentDefault;
    Json value;
    std::string rationale;
    long eventId = 0;
};

struct KeyDiff
{
    std::string key;
    spec::Category category = spec::Category::Geometry;
    DiffStatus status = DiffStatus::Equal;
    Json reference;
    Json candidate;
    std::vector<std::string> paths; ///< value paths that differ
    std::optional<Attribution> attribution;
};

struct GeometryDiff
{
    double referencePoreVolume = 0.0;
    double candidatePoreVolume = 0.0;
    double poreVolumeDeltaRel = 0.0;
    double referenceBulkVolume = 0.0;
    double candidateBulkVolume = 0.0;
    double bulkVolumeDeltaRel = 0.0;
    bool sameTopology = false;
    double nodeDisplacementMax = 0.0; ///< m, only with the same topology
    double nodeDisplacementMean = 0.0;
    bool differs = false;
    std::vector<Attribution> attributions;
};

struct MomentDiff
{
    double referenceMean = 0.0;
    double candidateMean = 0.0;
    double referenceStd = 0.0;
    double candidateStd = 0.0;
    double meanDeltaRel = 0.0;
    double stdDeltaRel = 0.0;
};

struct UnitFieldDiff
{
    int unit = 0;
    MomentDiff permeability;
    MomentDiff porosity;
    bool differs = false;
};

struct FieldDiff
{
    bool permeabilityHashEqual = false;
    bool porosityHashEqual = false;
    std::vector<UnitFieldDiff> units;
    bool statsDiffer = false;
};

struct WellPlacementDiff
{
    std::string name;
    std::optional<std::pair<int, int>> reference; ///< (i, j)
    std::optional<std::pair<int, int>> candidate;
    double distance = 0.0; ///< lateral distance between cell centres, m
};

struct WellDiff
{
    std::vector<WellPlacementDiff> placements;
    double producerBhpDelta = 0.0;   ///< candidate - reference, Pa
    double injectionRateDelta = 0.0; ///< per injector, m^3/s
    double radiusDelta = 0.0;
    double skinDelta = 0.0;
    bool differs = false;
};

struct SaturationSample
{
    double fraction = 0.0;
    double referenceSnapshotPvi = 0.0;
    double candidateSnapshotPvi = 0.0;
    std::optional<double> l1; ///< absent when the grids differ
};

struct ResponseDiff
{
    std::vector<double> pviGrid;
    std::vector<double> referenceWater; ///< producer water rate / injection rate
    std::vector<double> candidateWater;
    std::vector<double> referenceOil;
    std::vector<double> candidateOil;
    std::vector<double> referencePressure; ///< average pressure, Pa
    std::vector<double> candidatePressure;
    double rateL1 = 0.0;
    double rateLinf = 0.0;
    double pressureDeltaRel = 0.0; ///< max over the grid of |dp| / p_ref
    double pressureL1 = 0.0;
    std::vector<SaturationSample> saturation;
    double saturationL1 = 0.0; ///< max over the fractions
    bool ratesDiffer = false;
    bool pressureDiffers = false;
    bool saturationDiffers = false;
};

struct DiffReport
{
    std::string referenceHash;
    std::string candidateHash;
    std::vector<double> pviFractions;
    Tolerances tolerances;
    std::vector<KeyDiff> keys; ///< one per checklist key
    GeometryDiff geometry;
    FieldDiff fields;
    WellDiff wells;
    ResponseDiff responses;

    [[nodiscard]] std::vector<std::string> differingKeys() const;
    /// Differing keys of the closure category.
    [[nodiscard]] std::vector<const KeyDiff*> closureDiffs() const;
    [[nodiscard]] const KeyDiff& key(const std::string& name) const;
    [[nodiscard]] bool allEqual() const;
    [[nodiscard]] Json toJson() const;
};

inline const std::vector<double> kDefaultFractions {0.25, 0.5, 0.75, 1.0};

/// Refuses with refused-diff unless both runs carry a certificate; fractions
/// beyond either run's final PVI are out of range.
DiffReport diff(const Subject& reference, const Subject& candidate,
                const std::vector<double>& pviFractions = kDefaultFractions, const Tolerances& tolerances = {});

struct AuditRow
{
    LevelMask mask;
    std::optional<Reconstruction> reconstruction;
    std::optional<DiffReport> report;
    bool reconstructible = false;
    Json failure; ///< run manifest or error document when not reconstructible
};

struct AuditMatrix
{
    std::string referenceHash;
    std::vector<AuditRow> rows;

    [[nodiscard]] const AuditRow& row(spec::Level level) const;
    /// level,differing_keys,pv_delta_rel,rate_L1,sat_L1
    [[nodiscard]] std::string csv() const;
    [[nodiscard]] Json toJson() const;
};

/// Resolves and runs the reference, then degrades, reconstructs, runs and diffs
/// it at every mask.
AuditMatrix auditMatrix(const spec::ModelSpec& reference, const std::vector<LevelMask>& masks = standardMasks(),
                        const spec::ResolvePolicy& policy = {},
                        const std::vector<double>& pviFractions = kDefaultFractions);

/// Same with an already certified reference run of `reference`.
AuditMatrix auditMatrix(const spec::ModelSpec& reference, const Subject& referenceRun,
                        const std::vector<LevelMask>& masks = standardMasks(), const spec::ResolvePolicy& policy = {},
                        const std::vector<double>& pviFractions = kDefaultFractions);

/// Text grid dump "groundloop-grid/1": header line, dims, one node per line
/// (x y z), then one cell per line (unit and eight node indices).
void writeGridDump(std::ostream& out, const mesh::Mesh& mesh);
mesh::Mesh readGridDump(std::istream& in);

} // namespace groundloop::audit
