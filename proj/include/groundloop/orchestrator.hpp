// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <groundloop/pipeline.hpp>
#include <groundloop/simcore.hpp>
#include <groundloop/spec.hpp>

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace groundloop::orch
{

using spec::Json;

enum class Phase
{
    Interpret,
    Clarify,
    Act,
    Validate,
    Done,
    Failed,
};

const char* toString(Phase p);
Phase phaseFromString(const std::string& s);

enum class DirectiveKind
{
    ProposeDefaults,
    AskUser,
    ReviseConfig,
    AdjustSolver,
    Abort,
};

const char* toString(DirectiveKind k);
DirectiveKind directiveFromString(const std::string& s);

struct Directive
{
    DirectiveKind kind = DirectiveKind::Abort;
    /// JSON pointer -> SI value, applied as planner revisions on the next resolve.
    std::map<std::string, Json> edits;
    std::string justification;

    [[nodiscard]] Json toJson() const;
    static Directive fromJson(const Json& j);
};

enum class FailureCategory
{
    ConstructionError,
    StaticValidationError,
    ConvergenceFailure,
    NonphysicalState,
    Success,
};

const char* toString(FailureCategory c);

struct Classification
{
    FailureCategory category = FailureCategory::Success;
    std::vector<std::string> culpritKeys;
    std::vector<std::string> invariants;
    int stepIndex = -1;
    double failingDt = 0.0;
    long cell = -1;
    int phase = -1;
    std::vector<sim::ResidualNorms> lastTrace;
    std::string message;
    /// Suggested next move from the fixed rule table, before any attempt counting.
    DirectiveKind suggested = DirectiveKind::Abort;

    [[nodiscard]] Json toJson() const;
};

Classification classifyDiagnostics(const sim::RunResult& result);
Classification classifyFindings(const std::vector<spec::Finding>& findings);
Classification classifyError(const Error& error);

/// What a planner sees at a decision point.
struct PlannerRequest
{
    Phase phase = Phase::Act;
    std::string specDigest;
    std::vector<spec::Finding> findings;
    std::optional<Classification> classification;
    const spec::ExecutableConfig* config = nullptr;
    const spec::AssumptionLedger* ledger = nullptr;
    int budget = 0; ///< revisions left

    [[nodiscard]] Json toJson() const;
};

class Planner
{
  public:
    virtual ~Planner() = default;
    virtual std::string name() const = 0;
    virtual Directive decide(const PlannerRequest& request) = 0;
};

/// Deterministic planner with a fixed rule table and per-category attempt limits.
class RuleResolver: public Planner
{
  public:
    std::string name() const override { return "rule-resolver"; }
    Directive decide(const PlannerRequest& request) override;

  private:
    int _staticRevisions = 0;
    int _solverAdjustments = 0;
    int _stateResets = 0;
    int _constructionRevisions = 0;
};

/// External planner reached over HTTP JSON. Every exchange is kept verbatim;
/// any transport or schema failure is reported as an io error.
class HttpPlanner: public Planner
{
  public:
    HttpPlanner(std::string url, std::chrono::milliseconds timeout = std::chrono::milliseconds(5000));
    std::string name() const override { return "http-planner"; }
    Directive decide(const PlannerRequest& request) override;
    [[nodiscard]] const std::vector<Json>& exchanges() const { return _exchanges; }

  private:
    std::string _url;
    std::chrono::milliseconds _timeout;
    std::vector<Json> _exchanges;
};

/// Uses the primary planner and falls back to the secondary when it fails.
class FallbackPlanner: public Planner
{
  public:
    FallbackPlanner(std::unique_ptr<Planner> primary, std::unique_ptr<Planner> fallback);
    std::string name() const override;
    Directive decide(const PlannerRequest& request) override;

  private:
    std::unique_ptr<Planner> _primary;
    std::unique_ptr<Planner> _fallback;
    bool _primaryDown = false;
};

/// Replays logged directives in order.
class ScriptedPlanner: public Planner
{
  public:
    explicit ScriptedPlanner(std::vector<Directive> directives): _directives(std::move(directives)) {}
    std::string name() const override { return "replay"; }
    Directive decide(const PlannerRequest& request) override;

  private:
    std::vector<Directive> _directives;
    std::size_t _next = 0;
};

struct SessionEvent
{
    long id = 0;
    std::string timestamp;
    std::string kind;
    Json payload;
    std::string payloadHash;

    [[nodiscard]] Json toJson() const;
};

/// Append-only event log, optionally mirrored to an NDJSON file. Thread-safe
/// for one writer and any number of readers.
class EventLog
{
  public:
    EventLog() = default;
    explicit EventLog(std::filesystem::path file);

    const SessionEvent& append(const std::string& kind, Json payload);
    [[nodiscard]] std::vector<SessionEvent> since(long id) const;
    [[nodiscard]] std::vector<SessionEvent> all() const { return since(0); }
    [[nodiscard]] long lastId() const;

    /// Parses and verifies an NDJSON log: corrupt-log on gaps or malformed
    /// lines, tamper on a payload hash mismatch.
    static std::vector<SessionEvent> load(const std::filesystem::path& file);
    static std::vector<SessionEvent> parse(const std::string& ndjson);
    static void verify(const std::vector<SessionEvent>& events);

  private:
    std::optional<std::filesystem::path> _file;
    std::vector<SessionEvent> _events;
    mutable std::mutex _mutex;
};

struct Limits
{
    int revisionLimit = 8;
};

struct SessionState
{
    Phase phase = Phase::Interpret;
    spec::ModelSpec spec;
    std::optional<spec::ClarificationRequest> pending;
    std::optional<spec::ExecutableConfig> config;
    spec::AssumptionLedger ledger;
    std::optional<pipeline::Run> run;
    std::optional<Classification> classification;
    int revisions = 0;
    std::string failureReason; ///< RevisionLimit, Aborted or a classification category

    [[nodiscard]] bool terminal() const { return phase == Phase::Done || phase == Phase::Failed; }
    /// Done implies a certified result and nothing pending.
    [[nodiscard]] bool soundTermination() const;
    [[nodiscard]] Json summary() const;
};

/// One interpret-act-validate session. Sequential; the owner serializes calls.
class Session
{
  public:
    Session(spec::ModelSpec spec, spec::ResolvePolicy policy, Planner& planner, EventLog& log, Limits limits = {});

    /// Interpret, and for an interactive policy with pending items stop in Clarify.
    void start();
    /// Records clarification answers. Throws invariant-violation without
    /// logging anything when an answer breaks a domain invariant.
    void answer(const std::map<std::string, Json>& answers);
    /// Act and Validate with revision cycles until Done or Failed.
    void run();

    [[nodiscard]] const SessionState& state() const { return _state; }
    [[nodiscard]] const spec::ResolvePolicy& policy() const { return _policy; }

    /// Rebuilds a session from its verified log and continues it on `planner`
    /// and `log`, which must already hold `events`. A finished session is
    /// re-executed to its terminal state; an unfinished one stops before Act.
    static Session resume(const std::vector<SessionEvent>& events, Planner& planner, EventLog& log);

  private:
    void fail(const std::string& reason);
    bool applyDirective(const Directive& d);
    Directive consult(const std::vector<spec::Finding>& findings, const Classification& c);

    SessionState _state;
    spec::ResolvePolicy _policy;
    Planner* _planner;
    EventLog* _log;
    Limits _limits;
};

/// Ambiguity items as the documents logged and served: key, description,
/// severity, proposed_default and rationale.
Json ambiguitiesJson(const std::vector<spec::AmbiguityItem>& items);

/// Convenience: start, and unless clarification is needed, run.
SessionState runLoop(const spec::ModelSpec& spec, const spec::ResolvePolicy& policy, Planner& planner, EventLog& log,
                     Limits limits = {});

struct ReplayOutcome
{
    SessionState state;
    std::string originalHash;
    std::string replayedHash;
    std::vector<std::string> originalProvenance;
    std::vector<std::string> replayedProvenance;
    [[nodiscard]] bool matches() const
    {
        return originalHash == replayedHash && originalProvenance == replayedProvenance;
    }
};

/// Re-executes a verified log, substituting logged answers and planner directives.
ReplayOutcome replay(const std::vector<SessionEvent>& events);

// ---- documentation retrieval ----

enum class DocKind
{
    Doc,
    Docstring,
    Example,
};

const char* toString(DocKind k);

struct DocEntry
{
    std::string id;
    DocKind kind = DocKind::Doc;
    std::string title;
    std::string body;
    std::string module;
};

struct SearchHit
{
    const DocEntry* entry = nullptr;
    double score = 0.0;
    std::string snippet;
};

std::vector<std::string> tokenize(const std::string& text);

class DocIndex
{
  public:
    explicit DocIndex(std::vector<DocEntry> entries);
    /// Loads data/docs/*.md, data/docs/docstrings.json and data/specs/*.json.
    static DocIndex load(const std::filesystem::path& dataDir);

    /// TF-IDF over title and body with a title boost; ties broken by id.
    [[nodiscard]] std::vector<SearchHit> search(const std::string& query, std::size_t k = 10,
                                                std::optional<DocKind> kind = std::nullopt) const;
    [[nodiscard]] const DocEntry& lookup(const std::string& symbol) const;
    [[nodiscard]] std::vector<SearchHit> examples(const std::string& query, std::size_t k = 5) const
    {
        return search(query, k, DocKind::Example);
    }
    [[nodiscard]] const std::vector<DocEntry>& entries() const { return _entries; }

  private:
    struct Posting
    {
        std::size_t entry;
        double titleCount;
        double bodyCount;
    };
    std::vector<DocEntry> _entries;
    std::map<std::string, std::vector<Posting>> _postings;
};

/// Data directory: GROUNDLOOP_DATA environment variable, else the build-time default.
std::filesystem::path dataDir();

} // namespace groundloop::orch
