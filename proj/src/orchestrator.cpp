// SPDX-License-Identifier: Apache-2.0
#include <groundloop/hash.hpp>
#include <groundloop/orchestrator.hpp>

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace groundloop::orch
{

const char* toString(Phase p)
{
    switch (p)
    {
        case Phase::Interpret: return "Interpret";
        case Phase::Clarify: return "Clarify";
        case Phase::Act: return "Act";
        case Phase::Validate: return "Validate";
        case Phase::Done: return "Done";
        case Phase::Failed: return "Failed";
    }
    return "?";
}

Phase phaseFromString(const std::string& s)
{
    for (auto p : {Phase::Interpret, Phase::Clarify, Phase::Act, Phase::Validate, Phase::Done, Phase::Failed})
        if (s == toString(p))
            return p;
    throw Error(ErrorKind::Parse, "unknown phase '" + s + "'");
}

const char* toString(DirectiveKind k)
{
    switch (k)
    {
        case DirectiveKind::ProposeDefaults: return "ProposeDefaults";
        case DirectiveKind::AskUser: return "AskUser";
        case DirectiveKind::ReviseConfig: return "ReviseConfig";
        case DirectiveKind::AdjustSolver: return "AdjustSolver";
        case DirectiveKind::Abort: return "Abort";
    }
    return "?";
}

DirectiveKind directiveFromString(const std::string& s)
{
    for (auto k : {DirectiveKind::ProposeDefaults, DirectiveKind::AskUser, DirectiveKind::ReviseConfig,
                   DirectiveKind::AdjustSolver, DirectiveKind::Abort})
        if (s == toString(k))
            return k;
    throw Error(ErrorKind::Parse, "unknown directive '" + s + "'");
}

Json Directive::toJson() const
{
    auto e = Json::object();
    for (const auto& [path, value] : edits)
        e[path] = value;
    return {{"kind", toString(kind)}, {"edits", e}, {"justification", justification}};
}

Directive Directive::fromJson(const Json& j)
{
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
        throw Error(ErrorKind::Parse, "directive needs a string 'kind'");
    auto d = Directive {};
    d.kind = directiveFromString(j["kind"].get<std::string>());
    if (j.contains("edits"))
    {
        if (!j["edits"].is_object())
            throw Error(ErrorKind::Parse, "directive edits must be an object");
        for (const auto& [path, value] : j["edits"].items())
        {
            if (path.empty() || path.front() != '/')
                throw Error(ErrorKind::Parse, "directive edit key must be a JSON pointer", path);
            d.edits[path] = value;
        }
    }
    if (j.contains("justification"))
    {
        if (!j["justification"].is_string())
            throw Error(ErrorKind::Parse, "directive justification must be a string");
        d.justification = j["justification"].get<std::string>();
    }
    return d;
}

const char* toString(FailureCategory c)
{
    switch (c)
    {
        case FailureCategory::ConstructionError: return "ConstructionError";
        case FailureCategory::StaticValidationError: return "StaticValidationError";
        case FailureCategory::ConvergenceFailure: return "ConvergenceFailure";
        case FailureCategory::NonphysicalState: return "NonphysicalState";
        case FailureCategory::Success: return "Success";
    }
    return "?";
}

namespace
{

Json normsJson(const std::vector<sim::ResidualNorms>& trace)
{
    auto out = Json::array();
    for (const auto& n : trace)
        out.push_back({{"cnv", n.cnv}, {"mb", n.mb}, {"well", n.well}});
    return out;
}

void addUnique(std::vector<std::string>& list, const std::string& value)
{
    if (!value.empty() && std::find(list.begin(), list.end(), value) == list.end())
        list.push_back(value);
}

/// Checklist keys of the JSON pointers mentioned in an error detail.
std::vector<std::string> keysInDetail(const std::string& detail)
{
    auto keys = std::vector<std::string> {};
    auto in = std::istringstream(detail);
    for (std::string token; in >> token;)
    {
        if (token.front() != '/')
            continue;
        addUnique(keys, spec::owningKey(token));
    }
    return keys;
}

} // namespace

Json Classification::toJson() const
{
    auto j = Json {{"category", toString(category)},
                   {"culprit_keys", culpritKeys},
                   {"invariants", invariants},
                   {"message", message},
                   {"suggested", toString(suggested)}};
    if (stepIndex >= 0)
    {
        j["step_index"] = stepIndex;
        j["failing_dt"] = failingDt;
        j["last_trace"] = normsJson(lastTrace);
    }
    if (cell >= 0)
    {
        j["cell"] = cell;
        j["phase"] = phase;
    }
    return j;
}

Classification classifyDiagnostics(const sim::RunResult& result)
{
    auto c = Classification {};
    if (result.certificate)
    {
        c.category = FailureCategory::Success;
        c.message = "certified";
        c.suggested = DirectiveKind::ProposeDefaults;
        return c;
    }
    if (!result.failure)
    {
        c.category = FailureCategory::ConvergenceFailure;
        c.culpritKeys = {"solver_controls"};
        c.message = "run ended without a certificate";
        c.suggested = DirectiveKind::AdjustSolver;
        return c;
    }
    const auto& f = *result.failure;
    c.message = f.message;
    c.stepIndex = f.stepIndex;
    c.failingDt = f.dt;
    c.lastTrace = f.lastTrace;
    c.cell = f.cell;
    c.phase = f.phase;
    switch (f.kind)
    {
        case ErrorKind::NonphysicalState:
            c.category = FailureCategory::NonphysicalState;
            c.culpritKeys = {"initial_state", "density_closure"};
            c.suggested = DirectiveKind::ReviseConfig;
            break;
        case ErrorKind::ConvergenceFailure:
        case ErrorKind::LinearSolverFailure:
            c.category = FailureCategory::ConvergenceFailure;
            c.culpritKeys = {"solver_controls"};
            c.suggested = DirectiveKind::AdjustSolver;
            break;
        default:
            c.category = FailureCategory::ConstructionError;
            c.suggested = DirectiveKind::ReviseConfig;
            break;
    }
    return c;
}

Classification classifyFindings(const std::vector<spec::Finding>& findings)
{
    auto c = Classification {};
    for (const auto& f : findings)
    {
        if (f.severity != "error")
            continue;
        addUnique(c.culpritKeys, f.key);
        addUnique(c.invariants, f.invariant);
        if (c.message.empty())
            c.message = f.message;
    }
    if (c.invariants.empty())
    {
        c.message = "no static errors";
        c.suggested = DirectiveKind::ProposeDefaults;
        return c;
    }
    c.category = FailureCategory::StaticValidationError;
    c.suggested = DirectiveKind::ReviseConfig;
    return c;
}

Classification classifyError(const Error& error)
{
    auto c = Classification {};
    c.message = error.what();
    c.culpritKeys = keysInDetail(error.detail());
    switch (error.kind())
    {
        case ErrorKind::NonphysicalState:
            c.category = FailureCategory::NonphysicalState;
            c.suggested = DirectiveKind::ReviseConfig;
            break;
        case ErrorKind::ConvergenceFailure:
        case ErrorKind::LinearSolverFailure:
            c.category = FailureCategory::ConvergenceFailure;
            addUnique(c.culpritKeys, "solver_controls");
            c.suggested = DirectiveKind::AdjustSolver;
            break;
        default:
            c.category = FailureCategory::ConstructionError;
            c.invariants = {errorCode(error.kind())};
            c.suggested = DirectiveKind::ReviseConfig;
            break;
    }
    return c;
}

Json PlannerRequest::toJson() const
{
    auto j = Json {{"version", "groundloop-planner/1"},
                   {"phase", toString(phase)},
                   {"spec_digest", specDigest},
                   {"budget", budget}};
    j["findings"] = Json::array();
    for (const auto& f : findings)
        j["findings"].push_back(f.toJson());
    j["classification"] = classification ? classification->toJson() : Json(nullptr);
    j["config"] = config ? config->toJson() : Json(nullptr);
    auto excerpt = Json::array();
    if (ledger)
        for (const auto& e : ledger->entries)
        {
            if (classification && !classification->culpritKeys.empty() &&
                std::find(classification->culpritKeys.begin(), classification->culpritKeys.end(), e.key) ==
                    classification->culpritKeys.end())
                continue;
            excerpt.push_back({{"key", e.key}, {"value", e.value}, {"provenance", spec::toString(e.provenance)}});
        }
    j["ledger_excerpt"] = excerpt;
    return j;
}

// ---- planners ----

namespace
{

/// Built-in default values for the culprit keys the agent chose itself.
std::map<std::string, Json> redefault(const PlannerRequest& request)
{
    auto edits = std::map<std::string, Json> {};
    if (!request.classification)
        return edits;
    auto context = request.config ? request.config->toJson() : Json::object();
    for (const auto& key : request.classification->culpritKeys)
    {
        const auto* entry = request.ledger ? request.ledger->find(key) : nullptr;
        if (entry && entry->provenance == spec::Provenance::UserExplicit)
            continue;
        auto values = spec::defaultValues(key, context);
        for (const auto& [path, value] : values.items())
            edits[path] = value;
    }
    return edits;
}

Directive abortWith(const std::string& why)
{
    return {DirectiveKind::Abort, {}, why};
}

std::string joined(const std::vector<std::string>& items)
{
    auto out = std::string();
    for (const auto& s : items)
        out += (out.empty() ? "" : ", ") + s;
    return out;
}

} // namespace

Directive RuleResolver::decide(const PlannerRequest& request)
{
    if (!request.classification)
        return {DirectiveKind::ProposeDefaults, {}, "no failure to act on; keep proposed defaults"};
    const auto& c = *request.classification;
    switch (c.category)
    {
        case FailureCategory::Success:
            return {DirectiveKind::ProposeDefaults, {}, "run certified"};

        case FailureCategory::StaticValidationError:
        {
            if (_staticRevisions++ >= 1)
                return abortWith("static validation still fails after revision: " + joined(c.invariants));
            auto edits = redefault(request);
            return {DirectiveKind::ReviseConfig, edits,
                    "restore built-in defaults for agent-chosen values behind failed invariants " +
                        joined(c.invariants)};
        }

        case FailureCategory::ConstructionError:
        {
            if (_constructionRevisions++ >= 1)
                return abortWith("construction still fails after revision: " + c.message);
            return {DirectiveKind::ReviseConfig, redefault(request),
                    "restore built-in defaults for agent-chosen values named by the construction error"};
        }

        case FailureCategory::ConvergenceFailure:
        {
            if (_solverAdjustments >= 3 || !request.config)
                return abortWith("convergence still fails after " + std::to_string(_solverAdjustments) +
                                 " solver adjustments");
            ++_solverAdjustments;
            const auto& s = request.config->solver;
            auto failing = c.failingDt > 0.0 ? c.failingDt : s.initialDt;
            auto dt = 0.5 * std::min(s.initialDt, failing);
            auto d = Directive {DirectiveKind::AdjustSolver, {}, {}};
            d.edits["/solver/initial_dt"] = dt;
            d.edits["/solver/max_dt"] = std::min(s.maxDt, dt);
            if (s.minDt > dt)
                d.edits["/solver/min_dt"] = dt;
            d.justification = "halve the initial step and cap the maximum step at the failing step size";
            return d;
        }

        case FailureCategory::NonphysicalState:
        {
            if (_stateResets++ >= 1)
                return abortWith("state is still nonphysical after resetting the initial state");
            auto d = Directive {DirectiveKind::ReviseConfig, {}, {}};
            auto values = spec::defaultValues("initial_state");
            for (const auto& [path, value] : values.items())
                d.edits[path] = value;
            d.justification = "reset the initial state to built-in defaults after a nonphysical state";
            return d;
        }
    }
    return abortWith("unhandled classification");
}

HttpPlanner::HttpPlanner(std::string url, std::chrono::milliseconds timeout): _url(std::move(url)), _timeout(timeout)
{
    if (_url.rfind("http://", 0) != 0)
        throw Error(ErrorKind::Io, "planner url must start with http://", _url);
}

Directive HttpPlanner::decide(const PlannerRequest& request)
{
    auto slash = _url.find('/', 7);
    auto host = slash == std::string::npos ? _url : _url.substr(0, slash);
    auto path = slash == std::string::npos ? std::string("/") : _url.substr(slash);

    auto client = httplib::Client(host);
    auto secs = _timeout.count() / 1000;
    auto usecs = (_timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    auto body = request.toJson();
    auto exchange = Json {{"request", body}, {"response", nullptr}};
    auto response = client.Post(path, body.dump(), "application/json");
    if (!response)
    {
        exchange["error"] = httplib::to_string(response.error());
        _exchanges.push_back(exchange);
        throw Error(ErrorKind::Io, "planner unreachable: " + httplib::to_string(response.error()), _url);
    }
    exchange["status"] = response->status;
    exchange["response"] = response->body;
    _exchanges.push_back(exchange);
    if (response->status != 200)
        throw Error(ErrorKind::Io, "planner returned HTTP " + std::to_string(response->status), _url);

    try
    {
        auto j = Json::parse(response->body);
        if (!j.is_object() || !j.contains("directive"))
            throw Error(ErrorKind::Parse, "planner response lacks 'directive'");
        auto directiveJson = j["directive"];
        if (j.contains("justification"))
            directiveJson["justification"] = j["justification"];
        auto d = Directive::fromJson(directiveJson);
        if (d.justification.empty())
            throw Error(ErrorKind::Parse, "planner directive lacks a justification");
        for (const auto& [p, v] : d.edits)
            if (spec::owningKey(p).empty())
                throw Error(ErrorKind::Parse, "planner edit outside the checklist", p);
        return d;
    }
    catch (const Json::exception& e)
    {
        throw Error(ErrorKind::Io, std::string("planner response is not JSON: ") + e.what(), _url);
    }
    catch (const Error& e)
    {
        throw Error(ErrorKind::Io, std::string("planner response rejected: ") + e.what(), e.detail());
    }
}

FallbackPlanner::FallbackPlanner(std::unique_ptr<Planner> primary, std::unique_ptr<Planner> fallback):
    _primary(std::move(primary)), _fallback(std::move(fallback))
{
}

std::string FallbackPlanner::name() const
{
    return _primary->name() + "|" + _fallback->name();
}

Directive FallbackPlanner::decide(const PlannerRequest& request)
{
    if (!_primaryDown)
    {
        try
        {
            return _primary->decide(request);
        }
        catch (const Error& e)
        {
            if (e.kind() != ErrorKind::Io)
                throw;
            _primaryDown = true;
        }
    }
    auto d = _fallback->decide(request);
    d.justification = "[" + _fallback->name() + "] " + d.justification;
    return d;
}

Directive ScriptedPlanner::decide(const PlannerRequest&)
{
    if (_next >= _directives.size())
        return abortWith("replay script exhausted");
    return _directives[_next++];
}

// ---- event log ----

Json SessionEvent::toJson() const
{
    return {{"id", id}, {"timestamp", timestamp}, {"kind", kind}, {"payload", payload}, {"payload_hash", payloadHash}};
}

EventLog::EventLog(std::filesystem::path file): _file(std::move(file))
{
    if (std::filesystem::exists(*_file))
        _events = load(*_file);
}

const SessionEvent& EventLog::append(const std::string& kind, Json payload)
{
    auto lock = std::lock_guard(_mutex);
    auto e = SessionEvent {};
    e.id = _events.empty() ? 1 : _events.back().id + 1;
    e.timestamp = spec::utcNow();
    e.kind = kind;
    e.payloadHash = sha256Hex(payload.dump());
    e.payload = std::move(payload);
    if (_file)
    {
        auto out = std::ofstream(*_file, std::ios::app);
        out << e.toJson().dump() << '\n';
        out.flush();
        if (!out)
            throw Error(ErrorKind::Io, "cannot append to event log", _file->string());
    }
    _events.push_back(std::move(e));
    return _events.back();
}

std::vector<SessionEvent> EventLog::since(long id) const
{
    auto lock = std::lock_guard(_mutex);
    auto out = std::vector<SessionEvent> {};
    for (const auto& e : _events)
        if (e.id > id)
            out.push_back(e);
    return out;
}

long EventLog::lastId() const
{
    auto lock = std::lock_guard(_mutex);
    return _events.empty() ? 0 : _events.back().id;
}

std::vector<SessionEvent> EventLog::load(const std::filesystem::path& file)
{
    auto in = std::ifstream(file);
    if (!in)
        throw Error(ErrorKind::Io, "cannot read event log", file.string());
    auto text = std::stringstream {};
    text << in.rdbuf();
    return parse(text.str());
}

std::vector<SessionEvent> EventLog::parse(const std::string& ndjson)
{
    auto events = std::vector<SessionEvent> {};
    auto in = std::istringstream(ndjson);
    auto lineNo = 0;
    for (std::string line; std::getline(in, line);)
    {
        ++lineNo;
        if (line.empty())
            continue;
        try
        {
            auto j = Json::parse(line);
            auto e = SessionEvent {};
            e.id = j.at("id").get<long>();
            e.timestamp = j.at("timestamp").get<std::string>();
            e.kind = j.at("kind").get<std::string>();
            e.payload = j.at("payload");
            e.payloadHash = j.at("payload_hash").get<std::string>();
            events.push_back(std::move(e));
        }
        catch (const Json::exception& ex)
        {
            throw Error(ErrorKind::CorruptLog, std::string("malformed event: ") + ex.what(),
                        "line " + std::to_string(lineNo));
        }
    }
    verify(events);
    return events;
}

void EventLog::verify(const std::vector<SessionEvent>& events)
{
    for (std::size_t n = 0; n < events.size(); ++n)
    {
        const auto& e = events[n];
        if (e.id != static_cast<long>(n) + 1)
            throw Error(ErrorKind::CorruptLog, "event ids are not gapless", "event " + std::to_string(e.id));
        if (sha256Hex(e.payload.dump()) != e.payloadHash)
            throw Error(ErrorKind::Tamper, "event payload does not match its hash", "event " + std::to_string(e.id));
    }
}

// ---- session ----

bool SessionState::soundTermination() const
{
    if (phase != Phase::Done)
        return true;
    return run && run->result.certificate && (!pending || pending->items.empty());
}

Json SessionState::summary() const
{
    auto j = Json {{"phase", toString(phase)}, {"revisions", revisions}, {"title", spec.title},
                   {"level", spec::toString(spec.level)}};
    j["failure_reason"] = failureReason.empty() ? Json(nullptr) : Json(failureReason);
    j["config_hash"] = config ? Json(config->contentHash()) : Json(nullptr);
    j["classification"] = classification ? classification->toJson() : Json(nullptr);
    j["pending"] = Json::array();
    if (pending)
        for (const auto& item : pending->items)
            j["pending"].push_back(item.key);
    j["certificate"] = run ? Json(run->result.certificate) : Json(nullptr);
    return j;
}

Json ambiguitiesJson(const std::vector<spec::AmbiguityItem>& items)
{
    auto out = Json::array();
    for (const auto& a : items)
        out.push_back({{"key", a.key},
                       {"description", a.description},
                       {"severity", a.severity == spec::Severity::BlocksPhysics ? "blocks_physics"
                                                                                 : "blocks_reproducibility"},
                       {"proposed_default", a.proposedDefault},
                       {"rationale", a.rationale}});
    return out;
}

namespace
{

Json overridesJson(const spec::DefaultOverrides& d)
{
    auto j = Json {{"values", Json::object()}, {"rationale", Json::object()}};
    for (const auto& [k, v] : d.values)
        j["values"][k] = v;
    for (const auto& [k, v] : d.rationale)
        j["rationale"][k] = v;
    return j;
}

spec::DefaultOverrides overridesFromJson(const Json& j)
{
    auto d = spec::DefaultOverrides {};
    if (j.contains("values"))
        for (const auto& [k, v] : j["values"].items())
            d.values[k] = v;
    if (j.contains("rationale"))
        for (const auto& [k, v] : j["rationale"].items())
            d.rationale[k] = v.get<std::string>();
    return d;
}

} // namespace

Session::Session(spec::ModelSpec spec, spec::ResolvePolicy policy, Planner& planner, EventLog& log, Limits limits):
    _policy(std::move(policy)), _planner(&planner), _log(&log), _limits(limits)
{
    _state.spec = std::move(spec);
}

void Session::start()
{
    auto doc = _state.spec.doc;
    doc["meta"]["level"] = spec::toString(_state.spec.level);
    if (!_state.spec.title.empty())
        doc["meta"]["title"] = _state.spec.title;
    _log->append("spec-received", {{"spec", doc},
                                  {"policy", spec::toString(_policy.kind)},
                                  {"defaults", overridesJson(_policy.defaults)},
                                  {"revision_limit", _limits.revisionLimit},
                                  {"planner", _planner->name()}});
    _state.phase = Phase::Interpret;
    auto items = spec::detectAmbiguities(_state.spec, spec::checklist(), _policy.defaults);
    _log->append("ambiguities", {{"items", ambiguitiesJson(items)}});
    if (_policy.kind == spec::PolicyKind::Interactive && _policy.answers.empty() && !items.empty())
    {
        _state.phase = Phase::Clarify;
        _state.pending = spec::ClarificationRequest {items};
        _log->append("clarification", {{"items", ambiguitiesJson(items)}});
        return;
    }
    _state.phase = Phase::Act;
}

void Session::answer(const std::map<std::string, Json>& answers)
{
    if (_state.terminal())
        throw Error(ErrorKind::Conflict, "session already terminated");
    auto trial = _policy;
    for (const auto& [k, v] : answers)
        trial.answers[k] = v;
    // Validation only: invariant violations surface here, before anything is logged.
    spec::resolve(_state.spec, trial);
    _policy = std::move(trial);

    auto j = Json::object();
    for (const auto& [k, v] : answers)
        j[k] = v;
    _log->append("answer", {{"answers", j}});

    if (_state.pending)
    {
        auto& items = _state.pending->items;
        items.erase(std::remove_if(items.begin(), items.end(),
                                   [&](const spec::AmbiguityItem& a) { return _policy.answers.count(a.key) > 0; }),
                    items.end());
        if (items.empty())
            _state.pending.reset();
    }
    if (!_state.pending)
        _state.phase = Phase::Act;
}

void Session::fail(const std::string& reason)
{
    _state.phase = Phase::Failed;
    _state.failureReason = reason;
    auto j = Json {{"reason", reason}};
    j["cause"] = _state.classification ? _state.classification->toJson() : Json(nullptr);
    _log->append("failed", j);
}

Directive Session::consult(const std::vector<spec::Finding>& findings, const Classification& c)
{
    auto request = PlannerRequest {};
    request.phase = _state.phase;
    request.specDigest = sha256Hex(_state.spec.doc.dump());
    request.findings = findings;
    request.classification = c;
    request.config = _state.config ? &*_state.config : nullptr;
    request.ledger = &_state.ledger;
    request.budget = _limits.revisionLimit - _state.revisions;
    auto d = Directive {};
    try
    {
        d = _planner->decide(request);
    }
    catch (const Error& e)
    {
        d = abortWith(std::string("planner failed: ") + e.what());
    }
    _log->append("directive", {{"directive", d.toJson()}, {"planner", _planner->name()}});
    return d;
}

bool Session::applyDirective(const Directive& d)
{
    switch (d.kind)
    {
        case DirectiveKind::Abort: fail("Aborted"); return false;
        case DirectiveKind::AskUser:
        {
            auto items = spec::detectAmbiguities(_state.spec, spec::checklist(), _policy.defaults);
            _state.phase = Phase::Clarify;
            _state.pending = spec::ClarificationRequest {items};
            _log->append("clarification", {{"items", ambiguitiesJson(items)}});
            return false;
        }
        case DirectiveKind::ProposeDefaults:
        case DirectiveKind::ReviseConfig:
        case DirectiveKind::AdjustSolver:
            if (_state.revisions >= _limits.revisionLimit)
            {
                fail("RevisionLimit");
                return false;
            }
            ++_state.revisions;
            for (const auto& [path, value] : d.edits)
                _policy.revisions[path] = value;
            if (!d.edits.empty())
                _policy.revisionRationale = d.justification;
            return true;
    }
    return false;
}

void Session::run()
{
    if (_state.terminal())
        return;
    if (_state.phase == Phase::Interpret)
        start();
    // Items still pending are accepted at their proposed defaults.
    _state.pending.reset();
    if (_policy.kind == spec::PolicyKind::Interactive && _policy.answers.empty())
        _policy.kind = spec::PolicyKind::Autonomous;

    while (true)
    {
        _state.phase = Phase::Act;
        _state.run.reset();
        _policy.eventId = _log->lastId() + 1;
        _policy.timestamp = spec::utcNow();
        try
        {
            auto res = spec::resolve(_state.spec, _policy);
            _state.config = *res.config;
            _state.ledger = res.ledger;
        }
        catch (const Error& e)
        {
            _state.config.reset();
            _state.classification = classifyError(e);
            _log->append("classification", _state.classification->toJson());
            if (!applyDirective(consult({}, *_state.classification)))
                return;
            continue;
        }
        _log->append("resolve", {{"config_hash", _state.config->contentHash()},
                                {"config", _state.config->toJson()},
                                {"ledger", _state.ledger.toJson()}});

        auto findings = spec::staticCheck(*_state.config);
        auto findingsJson = Json::array();
        for (const auto& f : findings)
            findingsJson.push_back(f.toJson());
        _log->append("static-check", {{"findings", findingsJson}});
        auto staticResult = classifyFindings(findings);
        if (staticResult.category != FailureCategory::Success)
        {
            _state.classification = staticResult;
            _log->append("classification", staticResult.toJson());
            if (!applyDirective(consult(findings, staticResult)))
                return;
            continue;
        }

        _state.phase = Phase::Validate;
        _log->append("run-started", {{"config_hash", _state.config->contentHash()}});
        try
        {
            _state.run = pipeline::run(*_state.config);
            _state.classification = classifyDiagnostics(_state.run->result);
            _log->append("diagnostics", pipeline::runManifest(*_state.run));
        }
        catch (const Error& e)
        {
            _state.classification = classifyError(e);
        }
        _log->append("classification", _state.classification->toJson());
        if (_state.classification->category == FailureCategory::Success)
        {
            _state.phase = Phase::Done;
            _log->append("done", {{"config_hash", _state.config->contentHash()},
                                 {"certificate", _state.run->result.certificate}});
            return;
        }
        if (!applyDirective(consult(findings, *_state.classification)))
            return;
    }
}

SessionState runLoop(const spec::ModelSpec& spec, const spec::ResolvePolicy& policy, Planner& planner, EventLog& log,
                     Limits limits)
{
    auto session = Session(spec, policy, planner, log, limits);
    session.start();
    if (session.state().phase != Phase::Clarify)
        session.run();
    return session.state();
}

// ---- replay ----

namespace
{

std::vector<std::string> provenanceOf(const Json& ledger)
{
    auto out = std::vector<std::string> {};
    for (const auto& e : ledger.at("entries"))
        out.push_back(e.at("key").get<std::string>() + "=" + e.at("provenance").get<std::string>());
    return out;
}

} // namespace

namespace
{

struct LoggedSession
{
    spec::ModelSpec spec;
    spec::ResolvePolicy policy;
    Limits limits;
    std::vector<Directive> directives;
    std::vector<std::map<std::string, Json>> answers;
    bool ran = false;
    bool finished = false;
};

LoggedSession readLog(const std::vector<SessionEvent>& events)
{
    EventLog::verify(events);
    if (events.empty() || events.front().kind != "spec-received")
        throw Error(ErrorKind::CorruptLog, "log does not start with spec-received");
    const auto& head = events.front().payload;
    auto out = LoggedSession {};
    out.spec = spec::parseSpecJson(head.at("spec"));
    out.policy.kind = spec::policyFromString(head.at("policy").get<std::string>());
    out.policy.defaults = overridesFromJson(head.at("defaults"));
    out.limits = Limits {head.at("revision_limit").get<int>()};
    for (const auto& e : events)
    {
        if (e.kind == "directive")
            out.directives.push_back(Directive::fromJson(e.payload.at("directive")));
        else if (e.kind == "resolve" || e.kind == "classification")
            out.ran = true;
        else if (e.kind == "done" || e.kind == "failed")
            out.finished = true;
        else if (e.kind == "answer")
        {
            auto answers = std::map<std::string, Json> {};
            const auto& payload = e.payload.at("answers");
            for (auto it = payload.begin(); it != payload.end(); ++it)
                answers[it.key()] = it.value();
            out.answers.push_back(std::move(answers));
        }
    }
    return out;
}

} // namespace

Session Session::resume(const std::vector<SessionEvent>& events, Planner& planner, EventLog& log)
{
    auto logged = readLog(events);
    auto scripted = ScriptedPlanner(logged.directives);
    auto scratch = EventLog {};
    auto session = Session(logged.spec, logged.policy, scripted, scratch, logged.limits);
    session.start();
    for (const auto& a : logged.answers)
        session.answer(a);
    if (logged.finished)
        session.run();
    session._planner = &planner;
    session._log = &log;
    return session;
}

ReplayOutcome replay(const std::vector<SessionEvent>& events)
{
    auto logged = readLog(events);
    auto out = ReplayOutcome {};
    for (const auto& e : events)
        if (e.kind == "resolve")
        {
            out.originalHash = e.payload.at("config_hash").get<std::string>();
            out.originalProvenance = provenanceOf(e.payload.at("ledger"));
        }

    auto planner = ScriptedPlanner(logged.directives);
    auto log = EventLog {};
    auto session = Session(logged.spec, logged.policy, planner, log, logged.limits);
    session.start();
    for (const auto& a : logged.answers)
        session.answer(a);
    if (logged.ran)
        session.run();

    for (const auto& e : log.all())
        if (e.kind == "resolve")
        {
            out.replayedHash = e.payload.at("config_hash").get<std::string>();
            out.replayedProvenance = provenanceOf(e.payload.at("ledger"));
        }
    out.state = session.state();
    return out;
}

} // namespace groundloop::orch
