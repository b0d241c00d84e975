// SPDX-License-Identifier: Apache-2.0
#include <groundloop/cli.hpp>

#include <groundloop/audit.hpp>
#include <groundloop/orchestrator.hpp>
#include <groundloop/pipeline.hpp>
#include <groundloop/service.hpp>

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include <pthread.h>

namespace fs = std::filesystem;

namespace groundloop::cli
{

using Json = nlohmann::json;

namespace
{

std::string readFile(const fs::path& file)
{
    if (!fs::exists(file))
        throw Error(ErrorKind::NotFound, "no such file", file.string());
    auto in = std::ifstream(file);
    if (!in)
        throw Error(ErrorKind::Io, "cannot read", file.string());
    auto s = std::stringstream {};
    s << in.rdbuf();
    return s.str();
}

Json readJson(const fs::path& file)
{
    auto text = readFile(file);
    try
    {
        return Json::parse(text);
    }
    catch (const Json::parse_error& e)
    {
        throw Error(ErrorKind::Parse, "malformed JSON", file.string() + ": " + e.what());
    }
}

void writeFile(const fs::path& file, const std::string& text)
{
    if (file.has_parent_path())
        fs::create_directories(file.parent_path());
    service::writeAtomic(file, text);
}

spec::ModelSpec loadSpec(const fs::path& file)
{
    return spec::parseSpec(readFile(file));
}

/// "fivespot.json" -> "fivespot"; "fivespot.config.json" -> "fivespot".
std::string stemOf(const fs::path& file)
{
    auto name = file.filename().string();
    return name.substr(0, name.find('.'));
}

std::map<std::string, Json> readAnswers(const std::string& file)
{
    auto out = std::map<std::string, Json> {};
    if (file.empty())
        return out;
    auto j = readJson(file);
    if (!j.is_object())
        throw Error(ErrorKind::Parse, "answers must be an object of key -> value", file);
    for (auto it = j.begin(); it != j.end(); ++it)
        out[it.key()] = it.value();
    return out;
}

Json ledgerEntries(const std::vector<spec::AssumptionEntry>& entries)
{
    auto l = spec::AssumptionLedger {};
    l.entries = entries;
    return l.toJson().at("entries");
}

audit::Subject loadSubject(const fs::path& dir)
{
    auto run = pipeline::loadResults(dir);
    auto ledgerFile = dir / "ledger.json";
    auto ledger = fs::exists(ledgerFile) ? spec::AssumptionLedger::fromJson(readJson(ledgerFile))
                                         : spec::AssumptionLedger {};
    return {std::move(ledger), std::move(run)};
}

std::vector<double> parseFractions(const std::string& text)
{
    if (text.empty())
        return audit::kDefaultFractions;
    auto out = std::vector<double> {};
    auto in = std::stringstream(text);
    for (std::string item; std::getline(in, item, ',');)
    {
        try
        {
            out.push_back(std::stod(item));
        }
        catch (const std::exception&)
        {
            throw Error(ErrorKind::Parse, "bad PVI fraction", item);
        }
    }
    return out;
}

std::string envOr(const char* name, const std::string& fallback)
{
    const auto* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

void emit(std::ostream& out, const Json& j)
{
    out << j.dump(2) << '\n';
}

/// Blocks SIGINT and SIGTERM in the calling thread and every thread it
/// starts afterwards, so that only the waiter started by stopOnSignal sees them.
sigset_t blockStopSignals()
{
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    return set;
}

void stopOnSignal(const sigset_t& set, service::Server& server)
{
    std::thread([set, &server] {
        int sig = 0;
        sigwait(&set, &sig);
        server.stop();
    }).detach();
}

} // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app {"Specification-driven two-phase reservoir simulation", "groundloop"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    std::function<void()> action;

    // parse
    std::string specFile;
    auto* parse = app.add_subcommand("parse", "Parse a spec and print its SI-normalized document");
    parse->add_option("spec", specFile, "Spec JSON file")->required();
    parse->callback([&] {
        action = [&] {
            auto s = loadSpec(specFile);
            emit(out, {{"title", s.title}, {"level", spec::toString(s.level)}, {"doc", s.doc},
                       {"ambiguities", orch::ambiguitiesJson(spec::detectAmbiguities(s))}});
        };
    });

    // resolve
    std::string policyName = "autonomous";
    std::string answersFile;
    std::string outDir;
    auto* resolve = app.add_subcommand("resolve", "Resolve a spec into an executable config and assumption ledger");
    resolve->add_option("spec", specFile, "Spec JSON file")->required();
    resolve->add_option("--policy", policyName, "autonomous or interactive")
        ->check(CLI::IsMember({"autonomous", "interactive"}));
    resolve->add_option("--answers", answersFile, "JSON object of clarification answers (key -> value)");
    resolve->add_option("--out-dir", outDir, "Directory for the outputs (default: next to the spec)");
    resolve->callback([&] {
        action = [&] {
            auto s = loadSpec(specFile);
            auto policy = spec::ResolvePolicy {};
            policy.kind = spec::policyFromString(policyName);
            policy.answers = readAnswers(answersFile);
            auto dir = outDir.empty() ? fs::path(specFile).parent_path() : fs::path(outDir);
            auto stem = stemOf(specFile);
            auto r = spec::resolve(s, policy);
            if (r.needsAnswers())
            {
                auto items = orch::ambiguitiesJson(r.clarification->items);
                auto file = dir / (stem + ".ambiguities.json");
                writeFile(file, items.dump(2) + "\n");
                auto keys = std::string {};
                for (const auto& item: r.clarification->items)
                    keys += (keys.empty() ? "" : ",") + item.key;
                throw Error(ErrorKind::Query, "clarification needed; answer with --answers", keys);
            }
            auto configFile = dir / (stem + ".config.json");
            auto ledgerFile = dir / (stem + ".ledger.json");
            writeFile(configFile, r.config->toJson().dump(2) + "\n");
            writeFile(ledgerFile, r.ledger.toJson().dump(2) + "\n");
            emit(out, {{"config", configFile.string()},
                       {"ledger", ledgerFile.string()},
                       {"config_hash", r.config->contentHash()},
                       {"entries", r.ledger.entries.size()}});
        };
    });

    // simulate
    std::string configFile;
    std::string ledgerFile;
    auto* simulate = app.add_subcommand("simulate", "Run a resolved config and write its results");
    simulate->add_option("config", configFile, "Executable config JSON")->required();
    simulate->add_option("--out", outDir, "Results directory")->required();
    simulate->add_option("--ledger", ledgerFile, "Ledger to store with the results");
    simulate->callback([&] {
        action = [&] {
            auto config = spec::configFromDocument(readJson(configFile));
            auto run = pipeline::run(config);
            pipeline::writeResults(outDir, run);
            if (!ledgerFile.empty())
                writeFile(fs::path(outDir) / "ledger.json", readFile(ledgerFile));
            auto manifest = pipeline::runManifest(run);
            emit(out, manifest);
            if (!run.result.certificate)
                throw Error(ErrorKind::ConvergenceFailure, "run finished without a certificate",
                            manifest.value("failure", Json()).dump());
        };
    });

    // audit
    bool update = false;
    auto* auditCmd = app.add_subcommand("audit", "List checklist keys the ledger does not cover");
    auditCmd->add_option("config", configFile, "Executable config JSON")->required();
    auditCmd->add_option("ledger", ledgerFile, "Assumption ledger JSON")->required();
    auditCmd->add_flag("--update", update, "Write the completed ledger back");
    auditCmd->callback([&] {
        action = [&] {
            auto config = spec::configFromDocument(readJson(configFile));
            auto ledger = spec::AssumptionLedger::fromJson(readJson(ledgerFile));
            auto report = spec::defaultsAudit(config, ledger);
            if (update)
                writeFile(ledgerFile, ledger.toJson().dump(2) + "\n");
            emit(out, {{"config_hash", config.contentHash()},
                       {"tacit", ledgerEntries(report.entries)},
                       {"count", report.entries.size()}});
        };
    });

    // degrade
    std::string levelName;
    std::string outFile;
    auto* degrade = app.add_subcommand("degrade", "Remove the information a report or journal would omit");
    degrade->add_option("spec", specFile, "Spec JSON file")->required();
    degrade->add_option("--level", levelName, "report or journal")
        ->required()
        ->check(CLI::IsMember({"reproduction", "report", "journal"}));
    degrade->add_option("--out", outFile, "Write the degraded spec here instead of stdout");
    degrade->callback([&] {
        action = [&] {
            auto mask = audit::LevelMask::forLevel(spec::levelFromString(levelName));
            auto degraded = audit::degrade(loadSpec(specFile), mask);
            if (outFile.empty())
                emit(out, degraded.doc);
            else
            {
                writeFile(outFile, degraded.doc.dump(2) + "\n");
                emit(out, {{"spec", outFile}, {"mask", mask.toJson()}});
            }
        };
    });

    // reconstruct
    auto* reconstruct = app.add_subcommand("reconstruct", "Degrade a spec to a level and rebuild it with defaults");
    reconstruct->add_option("spec", specFile, "Spec JSON file")->required();
    reconstruct->add_option("--level", levelName, "reproduction, report or journal")
        ->required()
        ->check(CLI::IsMember({"reproduction", "report", "journal"}));
    reconstruct->add_option("--out-dir", outDir, "Directory for the outputs (default: next to the spec)");
    reconstruct->callback([&] {
        action = [&] {
            auto mask = audit::LevelMask::forLevel(spec::levelFromString(levelName));
            auto recon = audit::reconstruct(audit::degrade(loadSpec(specFile), mask));
            auto dir = outDir.empty() ? fs::path(specFile).parent_path() : fs::path(outDir);
            auto stem = stemOf(specFile) + "." + levelName;
            auto config = dir / (stem + ".config.json");
            auto ledger = dir / (stem + ".ledger.json");
            writeFile(config, recon.config.toJson().dump(2) + "\n");
            writeFile(ledger, recon.ledger.toJson().dump(2) + "\n");
            emit(out, {{"config", config.string()},
                       {"ledger", ledger.string()},
                       {"config_hash", recon.config.contentHash()}});
        };
    });

    // diff
    std::string refDir;
    std::string candDir;
    std::string fractions;
    auto* diffCmd = app.add_subcommand("diff", "Compare two result directories");
    diffCmd->add_option("ref", refDir, "Reference results directory")->required();
    diffCmd->add_option("cand", candDir, "Candidate results directory")->required();
    diffCmd->add_option("--pvi", fractions, "Comma-separated PVI fractions for saturation comparison");
    diffCmd->add_option("--out", outFile, "Also write the report here");
    diffCmd->callback([&] {
        action = [&] {
            auto report = audit::diff(loadSubject(refDir), loadSubject(candDir), parseFractions(fractions)).toJson();
            if (!outFile.empty())
                writeFile(outFile, report.dump(2) + "\n");
            emit(out, report);
        };
    });

    // matrix
    bool asJson = false;
    auto* matrix = app.add_subcommand("matrix", "Reconstruct at every level and diff against the reference");
    matrix->add_option("spec", specFile, "Reference spec JSON file")->required();
    matrix->add_option("--pvi", fractions, "Comma-separated PVI fractions");
    matrix->add_flag("--json", asJson, "Print the full matrix document instead of CSV");
    matrix->add_option("--out", outFile, "Also write the matrix document here");
    matrix->callback([&] {
        action = [&] {
            auto m = audit::auditMatrix(loadSpec(specFile), audit::standardMasks(), {}, parseFractions(fractions));
            if (!outFile.empty())
                writeFile(outFile, m.toJson().dump(2) + "\n");
            if (asJson)
                emit(out, m.toJson());
            else
                out << m.csv();
        };
    });

    // search
    std::vector<std::string> queryWords;
    std::size_t k = 10;
    std::string kindName;
    auto* search = app.add_subcommand("search", "Keyword search over the documentation corpus");
    search->add_option("query", queryWords, "Query terms")->required();
    search->add_option("-k", k, "Number of hits")->check(CLI::PositiveNumber);
    search->add_option("--kind", kindName, "doc, docstring or example")
        ->check(CLI::IsMember({"doc", "docstring", "example"}));
    search->callback([&] {
        action = [&] {
            auto index = orch::DocIndex::load(orch::dataDir());
            auto query = std::string {};
            for (const auto& w: queryWords)
                query += (query.empty() ? "" : " ") + w;
            auto kind = std::optional<orch::DocKind> {};
            for (auto candidate: {orch::DocKind::Doc, orch::DocKind::Docstring, orch::DocKind::Example})
                if (kindName == orch::toString(candidate))
                    kind = candidate;
            auto hits = Json::array();
            for (const auto& h: index.search(query, k, kind))
                hits.push_back({{"id", h.entry->id},
                                {"kind", orch::toString(h.entry->kind)},
                                {"title", h.entry->title},
                                {"score", h.score},
                                {"snippet", h.snippet}});
            emit(out, {{"query", query}, {"hits", hits}});
        };
    });

    // replay
    std::string logFile;
    auto* replay = app.add_subcommand("replay", "Re-execute a session event log and compare the outcome");
    replay->add_option("log", logFile, "events.ndjson")->required();
    replay->callback([&] {
        action = [&] {
            auto outcome = orch::replay(orch::EventLog::load(logFile));
            emit(out, {{"matches", outcome.matches()},
                       {"phase", orch::toString(outcome.state.phase)},
                       {"original_hash", outcome.originalHash},
                       {"replayed_hash", outcome.replayedHash}});
            if (!outcome.matches())
                throw Error(ErrorKind::Tamper, "replay diverged from the log",
                            outcome.originalHash + " vs " + outcome.replayedHash);
        };
    });

    // serve
    std::string storeDir = envOr("GROUNDLOOP_STORE", "groundloop-store");
    std::string bind = envOr("GROUNDLOOP_BIND", "127.0.0.1");
    int port = std::atoi(envOr("GROUNDLOOP_PORT", "8080").c_str());
    std::string plannerUrl = envOr("GROUNDLOOP_PLANNER_URL", "");
    std::string logLevel = envOr("GROUNDLOOP_LOG", "info");
    std::size_t workers = 2;
    std::string staticDir;
    auto* serve = app.add_subcommand("serve", "Serve the HTTP API over a session store");
    serve->add_option("--port", port, "TCP port (0 picks a free one)")->check(CLI::Range(0, 65535));
    serve->add_option("--bind", bind, "Bind address");
    serve->add_option("--store", storeDir, "Session store directory");
    serve->add_option("--planner-url", plannerUrl, "External planner endpoint; the rule resolver is the fallback");
    serve->add_option("--workers", workers, "Simulation worker threads")->check(CLI::PositiveNumber);
    serve->add_option("--static", staticDir, "Directory of static files served at /");
    serve->add_option("--log", logLevel, "quiet, info or debug")->check(CLI::IsMember({"quiet", "info", "debug"}));
    serve->callback([&] {
        action = [&] {
            auto signals = blockStopSignals();
            auto store = service::SessionStore(storeDir);
            auto options = service::ManagerOptions {};
            options.plannerUrl = plannerUrl;
            options.workers = workers;
            auto manager = service::SessionManager(store, options);
            auto index = orch::DocIndex::load(orch::dataDir());
            auto server = service::Server(manager, index);
            if (!staticDir.empty())
                server.mountStatic(staticDir);
            if (logLevel == "debug")
                server.logRequests(err);
            stopOnSignal(signals, server);
            auto bound = port == 0 ? server.bindAnyPort(bind) : port;
            if (logLevel != "quiet")
                err << Json {{"event", "listening"}, {"bind", bind}, {"port", bound}, {"store", storeDir}}.dump()
                    << std::endl;
            if (port == 0)
                server.serve();
            else
                server.listen(bind, port);
            manager.waitIdle();
        };
    });

    // session: the HTTP workflow over the same store, one step per call
    auto* session = app.add_subcommand("session", "Drive a stored session step by step");
    session->require_subcommand(1);
    session->add_option("--store", storeDir, "Session store directory");
    std::string sessionId;
    std::string candidateId;
    std::string what;
    long since = 0;
    auto withManager = [&](const std::function<void(service::SessionManager&)>& f) {
        auto store = service::SessionStore(storeDir);
        auto options = service::ManagerOptions {};
        options.plannerUrl = plannerUrl;
        auto manager = service::SessionManager(store, options);
        f(manager);
    };
    auto* sCreate = session->add_subcommand("create", "Create a session from a spec");
    sCreate->add_option("spec", specFile, "Spec JSON file")->required();
    std::string sessionPolicy = "interactive";
    sCreate->add_option("--policy", sessionPolicy, "interactive (default) or autonomous")
        ->check(CLI::IsMember({"autonomous", "interactive"}));
    sCreate->callback([&] {
        action = [&] {
            auto doc = readJson(specFile);
            withManager([&](auto& m) { emit(out, m.create(doc, sessionPolicy).toJson()); });
        };
    });
    auto* sList = session->add_subcommand("list", "List sessions");
    sList->callback([&] {
        action = [&] {
            withManager([&](auto& m) {
                auto list = Json::array();
                for (const auto& r: m.list())
                    list.push_back(r.toJson());
                emit(out, {{"sessions", list}, {"quarantined", m.store().quarantined()}});
            });
        };
    });
    auto* sStatus = session->add_subcommand("status", "Show a session");
    sStatus->add_option("id", sessionId)->required();
    sStatus->callback([&] { action = [&] { withManager([&](auto& m) { emit(out, m.status(sessionId).toJson()); }); }; });
    auto* sAmb = session->add_subcommand("ambiguities", "List open clarification items");
    sAmb->add_option("id", sessionId)->required();
    sAmb->callback([&] { action = [&] { withManager([&](auto& m) { emit(out, m.ambiguities(sessionId)); }); }; });
    auto* sAnswer = session->add_subcommand("answer", "Answer clarification items from a JSON file");
    sAnswer->add_option("id", sessionId)->required();
    sAnswer->add_option("answers", answersFile, "JSON object key -> value")->required();
    sAnswer->callback([&] {
        action = [&] {
            auto answers = readAnswers(answersFile);
            withManager([&](auto& m) { emit(out, m.answer(sessionId, answers).toJson()); });
        };
    });
    auto* sRun = session->add_subcommand("run", "Run the session to a terminal state");
    sRun->add_option("id", sessionId)->required();
    sRun->callback([&] { action = [&] { withManager([&](auto& m) { emit(out, m.runNow(sessionId).toJson()); }); }; });
    auto* sEvents = session->add_subcommand("diagnostics", "Events after an id");
    sEvents->add_option("id", sessionId)->required();
    sEvents->add_option("--since", since, "Last event id already seen");
    sEvents->callback(
        [&] { action = [&] { withManager([&](auto& m) { emit(out, m.diagnostics(sessionId, since)); }); }; });
    auto* sLedger = session->add_subcommand("ledger", "Show the assumption ledger");
    sLedger->add_option("id", sessionId)->required();
    sLedger->callback([&] { action = [&] { withManager([&](auto& m) { emit(out, m.ledger(sessionId)); }); }; });
    auto* sResults = session->add_subcommand("results", "Show rates, snapshots or the manifest");
    sResults->add_option("id", sessionId)->required();
    sResults->add_option("what", what)->required()->check(CLI::IsMember({"rates", "snapshots", "manifest"}));
    sResults->callback([&] {
        action = [&] {
            withManager([&](auto& m) {
                emit(out, what == "rates" ? m.rates(sessionId) : what == "snapshots" ? m.snapshots(sessionId)
                                                                                     : m.manifest(sessionId));
            });
        };
    });
    auto* sDiff = session->add_subcommand("diff", "Diff two finished sessions");
    sDiff->add_option("ref", sessionId)->required();
    sDiff->add_option("cand", candidateId)->required();
    sDiff->add_option("--pvi", fractions, "Comma-separated PVI fractions");
    sDiff->callback([&] {
        action = [&] {
            withManager([&](auto& m) { emit(out, m.diff(sessionId, candidateId, parseFractions(fractions))); });
        };
    });

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e)
    {
        return app.exit(e, out, err);
    }
    catch (const CLI::CallForAllHelp& e)
    {
        return app.exit(e, out, err);
    }
    catch (const CLI::ParseError& e)
    {
        app.exit(e, out, err);
        return kUsageError;
    }

    auto fail = [&](const std::string& code, const std::string& message, const std::string& detail) {
        err << Json {{"code", code}, {"message", message}, {"detail", detail}}.dump() << '\n';
        return kDomainError;
    };
    try
    {
        if (action)
            action();
        return kOk;
    }
    catch (const Error& e)
    {
        return fail(e.code(), e.what(), e.detail());
    }
    catch (const Json::exception& e)
    {
        return fail("parse-error", "malformed document", e.what());
    }
    catch (const fs::filesystem_error& e)
    {
        return fail("io-error", e.what(), e.path1().string());
    }
    catch (const std::exception& e)
    {
        return fail("internal", e.what(), "");
    }
}

} // namespace groundloop::cli
