// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "../support/specs.hpp"

#include <groundloop/orchestrator.hpp>

#include <httplib.h>

#include <thread>

using namespace groundloop;
using namespace groundloop::orch;
using spec::Json;

namespace
{

spec::ExecutableConfig fiveSpotConfig()
{
    return *spec::resolve(fixtures::bundledSpec("fivespot.json")).config;
}

PlannerRequest requestFor(const Classification& c, const spec::ExecutableConfig* config,
                          const spec::AssumptionLedger* ledger)
{
    auto r = PlannerRequest {};
    r.classification = c;
    r.config = config;
    r.ledger = ledger;
    r.budget = 8;
    return r;
}

std::string dumpLog(const std::vector<SessionEvent>& events)
{
    auto out = std::string();
    for (const auto& e : events)
        out += e.toJson().dump() + "\n";
    return out;
}

void checkTerminalSound(const SessionState& s)
{
    CHECK(s.terminal());
    CHECK(s.soundTermination());
    if (s.phase == Phase::Done)
    {
        REQUIRE(s.run.has_value());
        CHECK(s.run->result.certificate);
        CHECK_FALSE(s.pending.has_value());
    }
}

} // namespace

TEST_CASE("directive JSON round trip and validation")
{
    auto d = Directive {DirectiveKind::AdjustSolver, {{"/solver/initial_dt", Json(3600.0)}}, "smaller steps"};
    auto back = Directive::fromJson(d.toJson());
    CHECK((back.kind == DirectiveKind::AdjustSolver));
    CHECK(back.edits.at("/solver/initial_dt") == 3600.0);
    CHECK(back.justification == "smaller steps");
    CHECK_THROWS_AS(Directive::fromJson(Json {{"kind", "Explode"}}), Error);
    CHECK_THROWS_AS(Directive::fromJson(Json {{"kind", "ReviseConfig"}, {"edits", {{"solver", 1}}}}), Error);
}

TEST_CASE("diagnostics classification")
{
    auto ok = sim::RunResult {};
    ok.certificate = true;
    CHECK((classifyDiagnostics(ok).category == FailureCategory::Success));

    auto stalled = sim::RunResult {};
    stalled.failure = sim::RunFailure {ErrorKind::ConvergenceFailure, "cuts exhausted", 7, 1e6, 5e4, {}, -1, -1};
    auto c = classifyDiagnostics(stalled);
    CHECK((c.category == FailureCategory::ConvergenceFailure));
    CHECK(c.stepIndex == 7);
    CHECK(c.failingDt == 5e4);
    CHECK((c.suggested == DirectiveKind::AdjustSolver));

    auto bad = sim::RunResult {};
    bad.failure = sim::RunFailure {ErrorKind::NonphysicalState, "negative density", 0, 0.0, 86400.0, {}, 12, 1};
    c = classifyDiagnostics(bad);
    CHECK((c.category == FailureCategory::NonphysicalState));
    CHECK((c.suggested == DirectiveKind::ReviseConfig));
    CHECK(c.cell == 12);
    CHECK(std::find(c.culpritKeys.begin(), c.culpritKeys.end(), "density_closure") != c.culpritKeys.end());
    CHECK(std::find(c.culpritKeys.begin(), c.culpritKeys.end(), "initial_state") != c.culpritKeys.end());

    auto findings = std::vector<spec::Finding> {
        {"porosity_spec", "/layers/porosity", "error", "porosity-fraction", "porosity out of range"},
        {"well_configuration", "/wells/radius", "warning", "well-overlap", "wells share a column"}};
    c = classifyFindings(findings);
    CHECK((c.category == FailureCategory::StaticValidationError));
    CHECK(c.invariants == std::vector<std::string> {"porosity-fraction"});
    CHECK(c.culpritKeys == std::vector<std::string> {"porosity_spec"});
    CHECK((classifyFindings({findings[1]}).category == FailureCategory::Success));

    c = classifyError(Error(ErrorKind::Contradiction, "rate vs pvi", "/wells/injection_rate vs /schedule/target_pvi"));
    CHECK((c.category == FailureCategory::ConstructionError));
    CHECK(c.culpritKeys == std::vector<std::string> {"well_configuration", "schedule"});
}

TEST_CASE("rule resolver table")
{
    auto config = fiveSpotConfig();
    auto ledger = spec::AssumptionLedger {};
    auto rr = RuleResolver {};

    auto conv = Classification {};
    conv.category = FailureCategory::ConvergenceFailure;
    conv.failingDt = 40000.0;
    auto d = rr.decide(requestFor(conv, &config, &ledger));
    CHECK((d.kind == DirectiveKind::AdjustSolver));
    CHECK(d.edits.at("/solver/initial_dt") == doctest::Approx(0.5 * std::min(config.solver.initialDt, 40000.0)));
    CHECK_FALSE(d.justification.empty());
    rr.decide(requestFor(conv, &config, &ledger));
    rr.decide(requestFor(conv, &config, &ledger));
    CHECK((rr.decide(requestFor(conv, &config, &ledger)).kind == DirectiveKind::Abort));

    auto state = Classification {};
    state.category = FailureCategory::NonphysicalState;
    d = rr.decide(requestFor(state, &config, &ledger));
    CHECK((d.kind == DirectiveKind::ReviseConfig));
    CHECK(d.edits.count("/initial/pressure") == 1);
    CHECK((rr.decide(requestFor(state, &config, &ledger)).kind == DirectiveKind::Abort));

    // agent-chosen culprits are re-defaulted, user-stated ones are left alone
    auto stat = Classification {};
    stat.category = FailureCategory::StaticValidationError;
    stat.culpritKeys = {"porosity_spec", "initial_state"};
    ledger.entries.push_back({"porosity_spec", {}, spec::Provenance::AgentDefault, "", "", 0});
    ledger.entries.push_back({"initial_state", {}, spec::Provenance::UserExplicit, "", "", 0});
    d = rr.decide(requestFor(stat, &config, &ledger));
    CHECK((d.kind == DirectiveKind::ReviseConfig));
    CHECK(d.edits.count("/layers/porosity") == 1);
    CHECK(d.edits.count("/initial/pressure") == 0);
    CHECK((rr.decide(requestFor(stat, &config, &ledger)).kind == DirectiveKind::Abort));
}

TEST_CASE("event log is gapless and tamper evident")
{
    auto log = EventLog {};
    log.append("a", {{"x", 1}});
    log.append("b", {{"x", 2}});
    log.append("c", {{"x", 3}});
    CHECK(log.lastId() == 3);
    CHECK(log.since(1).size() == 2);
    CHECK(log.since(1).front().id == 2);

    auto text = dumpLog(log.all());
    CHECK(EventLog::parse(text).size() == 3);

    auto events = log.all();
    events[1].payload["x"] = 20;
    try
    {
        EventLog::parse(dumpLog(events));
        FAIL("tampered payload accepted");
    }
    catch (const Error& e)
    {
        CHECK(e.kind() == ErrorKind::Tamper);
    }

    events = log.all();
    events.erase(events.begin() + 1);
    try
    {
        EventLog::verify(events);
        FAIL("gap accepted");
    }
    catch (const Error& e)
    {
        CHECK(e.kind() == ErrorKind::CorruptLog);
    }
    CHECK_THROWS_AS(EventLog::parse("{\"id\": 1}\n"), Error);
}

TEST_CASE("event log mirrors to a file")
{
    auto file = std::filesystem::temp_directory_path() / "groundloop-test-events.ndjson";
    std::filesystem::remove(file);
    {
        auto log = EventLog(file);
        log.append("first", {{"n", 1}});
        log.append("second", {{"n", 2}});
    }
    auto reopened = EventLog(file);
    CHECK(reopened.lastId() == 2);
    reopened.append("third", {{"n", 3}});
    CHECK(EventLog::load(file).size() == 3);
    std::filesystem::remove(file);
}

TEST_CASE("forced convergence failure recovers through solver adjustments")
{
    auto spec = fixtures::fixtureSpec("convergence_failure.json");
    auto rr = RuleResolver {};
    auto log = EventLog {};
    auto state = runLoop(spec, {}, rr, log);
    REQUIRE((state.phase == Phase::Done));
    checkTerminalSound(state);
    auto adjustments = 0;
    for (const auto& e : log.all())
        if (e.kind == "directive")
        {
            CHECK(e.payload["directive"]["kind"] == "AdjustSolver");
            ++adjustments;
        }
    CHECK(adjustments >= 1);
    CHECK(adjustments <= 3);
    CHECK(state.revisions == adjustments);
    // the solver revisions are agent decisions in the final ledger
    CHECK((state.ledger.find("solver_controls")->provenance == spec::Provenance::AgentDefault));

    auto outcome = replay(log.all());
    CHECK(outcome.matches());
    CHECK(outcome.replayedHash == state.config->contentHash());
    CHECK((outcome.state.phase == Phase::Done));
    checkTerminalSound(outcome.state);
}

TEST_CASE("negative porosity fails static validation after one revision")
{
    auto spec = fixtures::fixtureSpec("negative_porosity.json");
    auto rr = RuleResolver {};
    auto log = EventLog {};
    auto state = runLoop(spec, {}, rr, log);
    CHECK((state.phase == Phase::Failed));
    checkTerminalSound(state);
    CHECK(state.revisions == 1);
    REQUIRE(state.classification.has_value());
    CHECK((state.classification->category == FailureCategory::StaticValidationError));
    CHECK(state.classification->invariants == std::vector<std::string> {"porosity-fraction"});
    CHECK(log.all().back().kind == "failed");
}

TEST_CASE("revision limit stops a planner that never gives up")
{
    struct Stubborn: Planner
    {
        std::string name() const override { return "stubborn"; }
        Directive decide(const PlannerRequest&) override
        {
            return {DirectiveKind::AdjustSolver, {{"/solver/newton_max_iters", Json(1)}}, "keep trying"};
        }
    };
    auto spec = fixtures::fixtureSpec("convergence_failure.json");
    auto planner = Stubborn {};
    auto log = EventLog {};
    auto state = runLoop(spec, {}, planner, log, Limits {2});
    CHECK((state.phase == Phase::Failed));
    CHECK(state.failureReason == "RevisionLimit");
    CHECK(state.revisions == 2);
}

TEST_CASE("interactive session clarifies, validates answers and replays")
{
    auto spec = fixtures::bundledSpec("dome_journal.json");
    auto policy = spec::ResolvePolicy {};
    policy.kind = spec::PolicyKind::Interactive;
    auto rr = RuleResolver {};
    auto log = EventLog {};
    auto session = Session(spec, policy, rr, log);
    session.start();
    REQUIRE((session.state().phase == Phase::Clarify));
    REQUIRE(session.state().pending.has_value());
    auto keys = std::vector<std::string> {};
    for (const auto& item : session.state().pending->items)
        keys.push_back(item.key);
    CHECK(std::find(keys.begin(), keys.end(), "density_closure") != keys.end());

    auto before = log.lastId();
    try
    {
        session.answer({{"initial_state", Json {{"pressure", 150e5}, {"sw", 1.5}}}});
        FAIL("invalid answer accepted");
    }
    catch (const Error& e)
    {
        CHECK(e.kind() == ErrorKind::InvariantViolation);
    }
    CHECK(log.lastId() == before);

    auto pendingBefore = session.state().pending->items.size();
    session.answer({{"density_closure", Json {{"kind", "incompressible"}}}});
    CHECK((session.state().phase == Phase::Clarify));
    CHECK(session.state().pending->items.size() == pendingBefore - 1);
    CHECK(log.all().back().kind == "answer");
}

TEST_CASE("interactive run replays to the same ledger provenance")
{
    auto spec = fixtures::bundledSpec("fivespot.json");
    spec.level = spec::Level::Report;
    spec.doc["mesh"]["dims"] = {6, 6, 1};
    spec.doc["mesh"]["extent"] = {120.0, 120.0, 10.0};
    spec.doc["wells"]["producers"][0]["i"] = 5;
    spec.doc["wells"]["producers"][0]["j"] = 5;
    spec.doc["schedule"]["report_times"] = {0.5 * spec::kYear365, spec::kYear365};
    spec.doc["schedule"]["total_time"] = spec::kYear365;
    spec.doc["schedule"].erase("report_steps");
    for (const auto* key : {"sampling", "solver"})
        spec.doc.erase(key);
    spec.doc["fluids"].erase("density_closure");
    spec.doc.erase("meta");

    auto policy = spec::ResolvePolicy {};
    policy.kind = spec::PolicyKind::Interactive;
    auto rr = RuleResolver {};
    auto log = EventLog {};
    auto session = Session(spec, policy, rr, log);
    session.start();
    REQUIRE((session.state().phase == Phase::Clarify));
    session.answer({{"density_closure", Json {{"kind", "incompressible"}}}});
    session.run();
    REQUIRE((session.state().phase == Phase::Done));
    checkTerminalSound(session.state());
    CHECK((session.state().ledger.find("density_closure")->provenance == spec::Provenance::UserExplicit));
    CHECK((session.state().ledger.find("solver_controls")->provenance == spec::Provenance::AgentDefault));

    auto outcome = replay(EventLog::parse(dumpLog(log.all())));
    CHECK(outcome.matches());
    CHECK(!outcome.originalProvenance.empty());
    CHECK(outcome.originalProvenance == outcome.replayedProvenance);
    checkTerminalSound(outcome.state);
}

TEST_CASE("http planner exchanges JSON and falls back when unreachable")
{
    auto server = httplib::Server {};
    auto seen = Json();
    server.Post("/plan", [&](const httplib::Request& req, httplib::Response& res) {
        seen = Json::parse(req.body);
        auto reply = Json {{"directive", {{"kind", "AdjustSolver"}, {"edits", {{"/solver/max_dt", 3600.0}}}}},
                           {"justification", "cap the step"}};
        res.set_content(reply.dump(), "application/json");
    });
    server.Post("/junk", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("not json", "text/plain");
    });
    auto port = server.bind_to_any_port("127.0.0.1");
    auto thread = std::thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    auto config = fiveSpotConfig();
    auto ledger = spec::AssumptionLedger {};
    auto conv = Classification {};
    conv.category = FailureCategory::ConvergenceFailure;
    auto base = "http://127.0.0.1:" + std::to_string(port);

    auto planner = HttpPlanner(base + "/plan");
    auto d = planner.decide(requestFor(conv, &config, &ledger));
    CHECK((d.kind == DirectiveKind::AdjustSolver));
    CHECK(d.justification == "cap the step");
    CHECK(seen["version"] == "groundloop-planner/1");
    CHECK(seen["classification"]["category"] == "ConvergenceFailure");
    CHECK(planner.exchanges().size() == 1);

    auto junk = HttpPlanner(base + "/junk");
    try
    {
        junk.decide(requestFor(conv, &config, &ledger));
        FAIL("junk response accepted");
    }
    catch (const Error& e)
    {
        CHECK(e.kind() == ErrorKind::Io);
    }
    server.stop();
    thread.join();

    auto fallback = FallbackPlanner(std::make_unique<HttpPlanner>(base + "/plan", std::chrono::milliseconds(300)),
                                    std::make_unique<RuleResolver>());
    d = fallback.decide(requestFor(conv, &config, &ledger));
    CHECK((d.kind == DirectiveKind::AdjustSolver));
    CHECK(d.justification.find("rule-resolver") != std::string::npos);
}

TEST_CASE("tokenizer")
{
    CHECK(tokenize("setup_vertical_well") == std::vector<std::string> {"setup", "vertical", "well"});
    CHECK(tokenize("Wells, WELL!") == std::vector<std::string> {"well", "well"});
    CHECK(tokenize("") .empty());
}

TEST_CASE("documentation search on the bundled corpus")
{
    auto index = DocIndex::load(dataDir());
    REQUIRE(index.entries().size() > 38);

    auto hits = index.search("well", 50);
    REQUIRE(!hits.empty());
    auto rankOf = [&](const std::string& id) {
        for (std::size_t n = 0; n < hits.size(); ++n)
            if (hits[n].entry->id == id)
                return static_cast<int>(n);
        return -1;
    };
    CHECK(rankOf("docstring:setup_vertical_well") >= 0);
    CHECK(rankOf("docstring:peaceman_wi") >= 0);
    CHECK(rankOf("example:vertical_wells") >= 0);
    CHECK(rankOf("docstring:derive_injection_rates") >= 0);
    CHECK(rankOf("docstring:well_equations") >= 0);
    // entries titled after wells come before every entry that only mentions them
    auto titled = [](const SearchHit& h) {
        auto t = tokenize(h.entry->title);
        return std::find(t.begin(), t.end(), "well") != t.end();
    };
    auto seenUntitled = false;
    for (const auto& h : hits)
    {
        if (!titled(h))
            seenUntitled = true;
        else
            CHECK_FALSE(seenUntitled);
    }
    for (const auto& h : hits)
        CHECK(h.score > 0.0);

    CHECK(index.search("xylophone").empty());

    auto reloaded = DocIndex::load(dataDir());
    auto again = reloaded.search("well", 50);
    REQUIRE(again.size() == hits.size());
    for (std::size_t n = 0; n < hits.size(); ++n)
    {
        CHECK(again[n].entry->id == hits[n].entry->id);
        CHECK(again[n].score == hits[n].score);
    }

    auto relperm = index.search("relative permeability", 3);
    auto found = false;
    for (const auto& h : relperm)
        found = found || h.entry->id == "docstring:relperm";
    CHECK(found);

    CHECK(index.lookup("setup_vertical_well").module == "wells");
    CHECK_THROWS_AS((void)index.lookup("no_such_function"), Error);

    auto examples = index.examples("quarter five-spot");
    REQUIRE(!examples.empty());
    CHECK(examples.front().entry->id == "example:fivespot");
    for (const auto& h : examples)
        CHECK((h.entry->kind == DocKind::Example));
}

TEST_CASE("every documented module has docstrings")
{
    auto index = DocIndex::load(dataDir());
    auto modules = std::map<std::string, int> {};
    for (const auto& e : index.entries())
        if (e.kind == DocKind::Docstring)
            ++modules[e.module];
    for (const auto* m : {"mesh_geometry", "petro_fields", "fluid_closures", "simcore", "wells", "spec_engine",
                          "orchestrator", "reconstruction_audit", "service_cli"})
        CHECK(modules[m] >= 3);
}
