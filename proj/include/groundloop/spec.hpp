// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <groundloop/fluid.hpp>
#include <groundloop/mesh.hpp>
#include <groundloop/petro.hpp>
#include <groundloop/simcore.hpp>
#include <groundloop/wells.hpp>

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace groundloop::spec
{

using Json = nlohmann::json;

enum class Level
{
    Reproduction,
    Report,
    Journal,
};

const char* toString(Level level);
Level levelFromString(const std::string& s);

/// A parsed, unit-normalized (SI) but possibly incomplete model description.
/// `doc` follows the published schema with every quantity reduced to a plain
/// SI number; absent fields are simply missing from the document.
struct ModelSpec
{
    std::string title;
    Level level = Level::Reproduction;
    Json doc = Json::object();

    [[nodiscard]] bool has(const std::string& pointer) const;
};

/// Seconds per year used when a document does not state its convention.
inline constexpr double kYear365 = 365.0 * 86400.0;

/// Parses a spec document. Checks syntax, types, units, unknown keys and the
/// level mask. Physical ranges are left to static checking and resolution.
ModelSpec parseSpec(const std::string& text);
ModelSpec parseSpecJson(const Json& document);

/// Normalizes a value destined for `pointer` (units to SI, type checks), as
/// parseSpec would. Used for clarification answers.
Json normalizeAt(const std::string& pointer, const Json& value, double yearSeconds = kYear365);

/// Throws level error if the document carries fields its level forbids.
void enforceLevelMask(const ModelSpec& spec);

enum class Severity
{
    BlocksPhysics,
    BlocksReproducibility,
};

enum class Category
{
    Geometry,
    Fields,
    Closure,
    Wells,
    Schedule,
    Sampling,
    Solver,
    Convention,
};

const char* toString(Category c);

struct ChecklistItem
{
    std::string key;
    std::string description;
    Severity severity = Severity::BlocksPhysics;
    Category category = Category::Geometry;
    bool knownHazard = false;
    /// JSON pointers into the spec document that together determine the item.
    std::vector<std::string> paths;
    /// Paths of which any one suffices in place of the whole group, e.g. exact
    /// injectors or an injector placement rule.
    std::vector<std::vector<std::string>> alternatives;
    /// Paths that may refine the item but are never required.
    std::vector<std::string> optional;
    /// Paths of the canonical document whose values identify the item.
    std::vector<std::string> valuePaths;

    [[nodiscard]] std::vector<std::string> allPaths() const;
};

struct DecisionChecklist
{
    std::string version;
    std::vector<ChecklistItem> items;

    [[nodiscard]] const ChecklistItem& item(const std::string& key) const;
};

/// The canonical checklist (versioned).
const DecisionChecklist& checklist();

/// Agent-side default values used when an item is absent. Each entry maps a
/// checklist key to an object of {absolute JSON pointer -> SI value} overriding the
/// built-in default generator for that key.
struct DefaultOverrides
{
    std::map<std::string, Json> values;
    std::map<std::string, std::string> rationale;
};

struct AmbiguityItem
{
    std::string key;
    std::string description;
    Severity severity = Severity::BlocksPhysics;
    Json proposedDefault; ///< {path -> value} for the missing paths
    std::string rationale;
};

/// Built-in default values {pointer -> SI value} of one checklist item, given
/// the rest of the (partial) document as context.
Json defaultValues(const std::string& key, const Json& context = Json::object());

/// Checklist key owning a JSON pointer, or empty.
std::string owningKey(const std::string& pointer, const DecisionChecklist& list = checklist());

std::vector<AmbiguityItem> detectAmbiguities(const ModelSpec& spec, const DecisionChecklist& list = checklist(),
                                             const DefaultOverrides& overrides = {});

enum class Provenance
{
    UserExplicit,
    AgentDefault,
    SimulatorDefault,
};

const char* toString(Provenance p);
Provenance provenanceFromString(const std::string& s);

struct AssumptionEntry
{
    std::string key;
    Json value;
    Provenance provenance = Provenance::AgentDefault;
    std::string rationale;
    std::string timestamp;
    long eventId = 0;
};

struct AssumptionLedger
{
    std::vector<AssumptionEntry> entries;
    std::string configHash;

    [[nodiscard]] const AssumptionEntry* find(const std::string& key) const;
    [[nodiscard]] Json toJson() const;
    static AssumptionLedger fromJson(const Json& j);
};

enum class InjectionMode
{
    TargetPvi, ///< rate = target_pvi * pore volume / (total time * injectors)
    Explicit,
};

struct WellSpec
{
    std::string name;
    wells::WellKind kind = wells::WellKind::Producer;
    int i = 0;
    int j = 0;
};

struct WellsConfig
{
    std::vector<WellSpec> injectors;
    std::vector<WellSpec> producers;
    double producerBhp = 50e5;
    double radius = 0.1;
    double skin = 0.0;
    InjectionMode injection = InjectionMode::TargetPvi;
    double injectionRate = 0.0; ///< per injector, explicit mode only
    int kTop = 0;
    int kBottom = -1; ///< -1: full thickness
};

struct ScheduleConfig
{
    double totalTime = 10.0 * kYear365;
    std::vector<double> reportTimes;
    double targetPvi = 1.0;
};

/// Fully resolved, SI-normalized, runnable configuration.
struct ExecutableConfig
{
    mesh::MeshDims dims;
    mesh::DeformationSpec deformation;
    petro::LayerStats layers;
    bool porosityConstant = true;
    petro::SamplingPlan sampling;
    fluid::FluidSystem fluid;
    double initialPressure = 150e5;
    double initialSw = 0.2;
    WellsConfig wells;
    ScheduleConfig schedule;
    sim::SolverControls solver;
    std::string boundary = "closed";
    std::string timeUnit = "365d";
    bool gravity = true;

    /// Canonical document in the spec schema (SI only, sorted keys).
    [[nodiscard]] Json toJson() const;
    [[nodiscard]] std::string canonical() const;
    [[nodiscard]] std::string contentHash() const;
    /// Value of one checklist key: {relative path -> value} from the canonical document.
    [[nodiscard]] Json checklistValue(const std::string& key) const;
};

struct CanonicalForm
{
    std::string document;
    std::string hash;
};

CanonicalForm canonicalSerialize(const ExecutableConfig& config);

/// Builds a config from a complete spec document (every checklist path set).
ExecutableConfig configFromDocument(const Json& doc);

enum class PolicyKind
{
    Autonomous,
    Interactive,
};

const char* toString(PolicyKind p);
PolicyKind policyFromString(const std::string& s);

struct ResolvePolicy
{
    PolicyKind kind = PolicyKind::Autonomous;
    /// Interactive answers: checklist key -> value (see answerPaths()).
    std::map<std::string, Json> answers;
    /// Agent default overrides used for absent items.
    DefaultOverrides defaults;
    /// Planner revisions: JSON pointer -> SI value, forced regardless of the spec.
    std::map<std::string, Json> revisions;
    std::string revisionRationale;
    long eventId = 0;
    std::string timestamp;
};

struct ClarificationRequest
{
    std::vector<AmbiguityItem> items;
};

struct Resolution
{
    std::optional<ExecutableConfig> config;
    AssumptionLedger ledger;
    std::optional<ClarificationRequest> clarification;
    [[nodiscard]] bool needsAnswers() const { return clarification.has_value(); }
};

/// Converts a clarification answer for `key` into {pointer -> SI value}.
std::map<std::string, Json> answerPaths(const std::string& key, const Json& answer, double yearSeconds = kYear365);

Resolution resolve(const ModelSpec& spec, const ResolvePolicy& policy = {},
                   const DecisionChecklist& list = checklist());

struct TacitAssumptionReport
{
    std::vector<AssumptionEntry> entries; ///< all SimulatorDefault
    [[nodiscard]] bool empty() const { return entries.empty(); }
    [[nodiscard]] bool contains(const std::string& key) const;
};

/// Tags every checklist key without a ledger entry as SimulatorDefault and
/// appends it to the ledger. Throws stale-ledger on hash mismatch.
TacitAssumptionReport defaultsAudit(const ExecutableConfig& config, AssumptionLedger& ledger,
                                    const DecisionChecklist& list = checklist());

/// Older construction path that skips resolution: missing items silently take
/// simulator-side defaults and are not recorded. Present items are logged as
/// UserExplicit.
std::pair<ExecutableConfig, AssumptionLedger> legacyBuild(const ModelSpec& spec);

struct Finding
{
    std::string key;       ///< checklist key the finding belongs to
    std::string path;      ///< JSON pointer
    std::string severity;  ///< "error" or "warning"
    std::string invariant; ///< stable invariant name
    std::string message;

    [[nodiscard]] Json toJson() const;
};

/// Static physical and numerical checks of a resolved config.
std::vector<Finding> staticCheck(const ExecutableConfig& config);

/// Current UTC time in ISO-8601.
std::string utcNow();

} // namespace groundloop::spec
