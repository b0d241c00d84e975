// SPDX-License-Identifier: Apache-2.0
#include <groundloop/service.hpp>

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <unistd.h>

namespace fs = std::filesystem;

namespace groundloop::service
{

namespace
{

std::string randomHex(std::size_t digits)
{
    static std::mutex mutex;
    static std::mt19937_64 engine {std::random_device {}()};
    std::lock_guard lock(mutex);
    static const char* hex = "0123456789abcdef";
    auto out = std::string {};
    for (std::size_t n = 0; n < digits; ++n)
        out.push_back(hex[engine() % 16]);
    return out;
}

std::string readText(const fs::path& file)
{
    auto in = std::ifstream(file);
    if (!in)
        throw Error(ErrorKind::Io, "cannot read", file.string());
    auto s = std::stringstream {};
    s << in.rdbuf();
    return s.str();
}

Json readJson(const fs::path& file)
{
    try
    {
        return Json::parse(readText(file));
    }
    catch (const Json::parse_error& e)
    {
        throw Error(ErrorKind::CorruptLog, "malformed JSON file", file.string());
    }
}

bool validId(const std::string& id)
{
    return !id.empty() && id.size() <= 64 && std::all_of(id.begin(), id.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '-' || c == '_';
    });
}

bool isTemporary(const fs::path& p)
{
    return p.filename().string().find(".tmp-") != std::string::npos;
}

} // namespace

void writeAtomic(const fs::path& file, const std::string& text)
{
    auto tmp = file.parent_path() / ("." + file.filename().string() + ".tmp-" + randomHex(8));
    auto* f = std::fopen(tmp.c_str(), "wb");
    if (!f)
        throw Error(ErrorKind::Io, "cannot write", tmp.string());
    auto ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
    ok = std::fflush(f) == 0 && ok;
    ok = ::fsync(::fileno(f)) == 0 && ok;
    ok = std::fclose(f) == 0 && ok;
    if (!ok)
    {
        fs::remove(tmp);
        throw Error(ErrorKind::Io, "short write", tmp.string());
    }
    fs::rename(tmp, file);
}

Json SessionRecord::toJson() const
{
    return {{"layout", kStoreLayout},
            {"id", id},
            {"created", created},
            {"title", title},
            {"level", level},
            {"policy", policy},
            {"phase", phase},
            {"pending", pending},
            {"revisions", revisions},
            {"failure_reason", failureReason.empty() ? Json(nullptr) : Json(failureReason)},
            {"config_hash", configHash.empty() ? Json(nullptr) : Json(configHash)},
            {"certificate", certificate},
            {"running", running}};
}

SessionRecord SessionRecord::fromJson(const Json& j)
{
    if (j.value("layout", std::string()) != kStoreLayout)
        throw Error(ErrorKind::CorruptLog, "unknown session record layout", j.value("layout", std::string()));
    auto r = SessionRecord {};
    r.id = j.at("id").get<std::string>();
    r.created = j.at("created").get<std::string>();
    r.title = j.at("title").get<std::string>();
    r.level = j.at("level").get<std::string>();
    r.policy = j.at("policy").get<std::string>();
    r.phase = j.at("phase").get<std::string>();
    r.pending = j.at("pending");
    r.revisions = j.at("revisions").get<int>();
    r.failureReason = j.at("failure_reason").is_null() ? "" : j.at("failure_reason").get<std::string>();
    r.configHash = j.at("config_hash").is_null() ? "" : j.at("config_hash").get<std::string>();
    r.certificate = j.at("certificate").get<bool>();
    r.running = j.at("running").get<bool>();
    return r;
}

// ---- store ----

SessionStore::SessionStore(fs::path root): _root(std::move(root))
{
    fs::create_directories(_root);
    auto layout = _root / "layout.json";
    if (fs::exists(layout))
    {
        auto j = readJson(layout);
        if (j.value("layout", std::string()) != kStoreLayout)
            throw Error(ErrorKind::Conflict, "store has an unsupported layout", _root.string());
    }
    else
        writeAtomic(layout, Json {{"layout", kStoreLayout}}.dump() + "\n");

    // leftovers of interrupted writes
    for (const auto& e: fs::recursive_directory_iterator(_root))
        if (isTemporary(e.path()))
            fs::remove_all(e.path());
}

fs::path SessionStore::dir(const std::string& id) const
{
    return _root / id;
}

SessionRecord SessionStore::create(const Json& specDocument, const std::string& policy)
{
    auto parsed = spec::parseSpecJson(specDocument);
    spec::policyFromString(policy);
    std::lock_guard lock(_mutex);
    auto id = std::string {};
    do
        id = "s-" + randomHex(12);
    while (fs::exists(dir(id)));
    auto tmp = _root / ("." + id + ".tmp-" + randomHex(6));
    fs::create_directories(tmp / "results");
    fs::create_directories(tmp / "diffs");
    writeAtomic(tmp / "spec.json", specDocument.dump(2) + "\n");

    auto r = SessionRecord {};
    r.id = id;
    r.created = spec::utcNow();
    r.title = parsed.title;
    r.level = spec::toString(parsed.level);
    r.policy = policy;
    r.phase = orch::toString(orch::Phase::Interpret);
    writeAtomic(tmp / "session.json", r.toJson().dump(2) + "\n");
    // a session directory appears complete or not at all
    fs::rename(tmp, dir(id));
    return r;
}

void SessionStore::quarantine(const std::string& id, const std::string& reason)
{
    std::lock_guard lock(_mutex);
    if (!fs::exists(dir(id)))
        return;
    auto target = _root / "quarantine" / id;
    fs::create_directories(target.parent_path());
    if (fs::exists(target))
        target += "-" + randomHex(6);
    fs::rename(dir(id), target);
    writeAtomic(target / "quarantine.json", Json {{"id", id}, {"reason", reason}, {"time", spec::utcNow()}}.dump(2));
}

SessionRecord SessionStore::load(const std::string& id)
{
    if (!validId(id) || id == "quarantine" || !fs::is_directory(dir(id)))
        throw Error(ErrorKind::NotFound, "no such session", id);
    try
    {
        auto r = SessionRecord::fromJson(readJson(dir(id) / "session.json"));
        if (r.id != id)
            throw Error(ErrorKind::CorruptLog, "session record names another session", r.id);
        readJson(dir(id) / "spec.json");
        return r;
    }
    catch (const std::exception& e)
    {
        quarantine(id, e.what());
        throw Error(ErrorKind::CorruptLog, "session record is corrupt and was quarantined", id);
    }
}

void SessionStore::save(const SessionRecord& record)
{
    std::lock_guard lock(_mutex);
    if (!fs::is_directory(dir(record.id)))
        throw Error(ErrorKind::NotFound, "no such session", record.id);
    writeAtomic(dir(record.id) / "session.json", record.toJson().dump(2) + "\n");
}

std::vector<SessionRecord> SessionStore::list()
{
    auto ids = std::vector<std::string> {};
    for (const auto& e: fs::directory_iterator(_root))
        if (e.is_directory() && e.path().filename() != "quarantine" && !isTemporary(e.path()))
            ids.push_back(e.path().filename().string());
    auto out = std::vector<SessionRecord> {};
    for (const auto& id: ids)
    {
        try
        {
            out.push_back(load(id));
        }
        catch (const Error&)
        {
        }
    }
    std::sort(out.begin(), out.end(), [](const SessionRecord& a, const SessionRecord& b) {
        return std::tie(a.created, a.id) < std::tie(b.created, b.id);
    });
    return out;
}

Json SessionStore::spec(const std::string& id) const
{
    return readJson(dir(id) / "spec.json");
}

void SessionStore::writeArtifact(const std::string& id, const std::string& relative, const std::string& text)
{
    auto file = dir(id) / relative;
    fs::create_directories(file.parent_path());
    writeAtomic(file, text);
}

std::vector<std::string> SessionStore::quarantined() const
{
    auto out = std::vector<std::string> {};
    auto q = _root / "quarantine";
    if (fs::is_directory(q))
        for (const auto& e: fs::directory_iterator(q))
            out.push_back(e.path().filename().string());
    std::sort(out.begin(), out.end());
    return out;
}

// ---- worker pool ----

WorkerPool::WorkerPool(std::size_t workers)
{
    for (std::size_t n = 0; n < std::max<std::size_t>(1, workers); ++n)
        _threads.emplace_back([this] {
            for (;;)
            {
                auto job = std::function<void()> {};
                {
                    std::unique_lock lock(_mutex);
                    _wake.wait(lock, [this] { return _stopping || !_queue.empty(); });
                    if (_queue.empty())
                        return;
                    job = std::move(_queue.front());
                    _queue.pop_front();
                    ++_active;
                }
                job();
                {
                    std::lock_guard lock(_mutex);
                    --_active;
                }
                _idle.notify_all();
            }
        });
}

WorkerPool::~WorkerPool()
{
    {
        std::lock_guard lock(_mutex);
        _stopping = true;
    }
    _wake.notify_all();
    for (auto& t: _threads)
        t.join();
}

void WorkerPool::submit(std::function<void()> job)
{
    {
        std::lock_guard lock(_mutex);
        _queue.push_back(std::move(job));
    }
    _wake.notify_one();
}

void WorkerPool::drain()
{
    std::unique_lock lock(_mutex);
    _idle.wait(lock, [this] { return _queue.empty() && _active == 0; });
}

// ---- sessions ----

struct SessionManager::Live
{
    std::mutex mutex;
    std::unique_ptr<orch::Planner> planner;
    std::unique_ptr<orch::EventLog> log;
    std::optional<orch::Session> session;
    std::atomic<bool> running {false};
};

SessionManager::SessionManager(SessionStore& store, ManagerOptions options):
    _store(store), _options(std::move(options)), _pool(_options.workers)
{
}

SessionManager::~SessionManager()
{
    _pool.drain();
}

std::shared_ptr<SessionManager::Live> SessionManager::live(const std::string& id)
{
    std::lock_guard lock(_mutex);
    if (auto it = _live.find(id); it != _live.end())
        return it->second;

    auto record = _store.load(id);
    auto l = std::make_shared<Live>();
    if (_options.plannerUrl.empty())
        l->planner = std::make_unique<orch::RuleResolver>();
    else
        l->planner = std::make_unique<orch::FallbackPlanner>(std::make_unique<orch::HttpPlanner>(_options.plannerUrl),
                                                             std::make_unique<orch::RuleResolver>());
    auto logFile = _store.dir(id) / "events.ndjson";
    auto existing = std::vector<orch::SessionEvent> {};
    if (fs::exists(logFile) && fs::file_size(logFile) > 0)
    {
        try
        {
            existing = orch::EventLog::load(logFile);
        }
        catch (const Error& e)
        {
            _store.load(id);
            throw Error(e.kind(), std::string("event log unreadable: ") + e.what(), id);
        }
    }
    l->log = std::make_unique<orch::EventLog>(logFile);
    if (!existing.empty())
        l->session.emplace(orch::Session::resume(existing, *l->planner, *l->log));
    else
    {
        auto policy = spec::ResolvePolicy {};
        policy.kind = spec::policyFromString(record.policy);
        l->session.emplace(spec::parseSpecJson(_store.spec(id)), policy, *l->planner, *l->log, _options.limits);
        l->session->start();
    }
    _live[id] = l;
    mirror(id, *l);
    return l;
}

SessionRecord SessionManager::mirror(const std::string& id, Live& l)
{
    const auto& s = l.session->state();
    auto r = _store.load(id);
    r.phase = orch::toString(s.phase);
    r.pending = s.pending ? orch::ambiguitiesJson(s.pending->items) : Json::array();
    r.revisions = s.revisions;
    r.failureReason = s.failureReason;
    r.configHash = s.config ? s.config->contentHash() : "";
    r.certificate = s.run && s.run->result.certificate;
    r.running = l.running;
    if (s.config)
        _store.writeArtifact(id, "config.json", s.config->toJson().dump(2) + "\n");
    if (!s.ledger.entries.empty())
        _store.writeArtifact(id, "ledger.json", s.ledger.toJson().dump(2) + "\n");
    _store.save(r);
    return r;
}

SessionRecord SessionManager::create(const Json& specDocument, const std::string& policy)
{
    auto r = _store.create(specDocument, policy);
    auto l = live(r.id);
    std::lock_guard lock(l->mutex);
    return mirror(r.id, *l);
}

SessionRecord SessionManager::status(const std::string& id)
{
    return _store.load(id);
}

Json SessionManager::ambiguities(const std::string& id)
{
    return {{"id", id}, {"items", _store.load(id).pending}};
}

SessionRecord SessionManager::answer(const std::string& id, const std::map<std::string, Json>& answers)
{
    auto l = live(id);
    if (l->running)
        throw Error(ErrorKind::Conflict, "a run is in progress", id);
    std::lock_guard lock(l->mutex);
    if (l->session->state().terminal())
        throw Error(ErrorKind::Conflict, "session already finished", id);
    l->session->answer(answers);
    return mirror(id, *l);
}

void SessionManager::execute(const std::string& id, const std::shared_ptr<Live>& l)
{
    std::lock_guard lock(l->mutex);
    try
    {
        l->session->run();
        const auto& s = l->session->state();
        if (s.run)
        {
            auto dir = _store.dir(id);
            auto tmp = dir / (".results.tmp-" + randomHex(6));
            pipeline::writeResults(tmp, *s.run);
            fs::remove_all(dir / "results");
            fs::rename(tmp, dir / "results");
        }
    }
    catch (const std::exception& e)
    {
        std::cerr << "session " << id << ": " << e.what() << '\n';
    }
    l->running = false;
    mirror(id, *l);
}

SessionRecord SessionManager::startRun(const std::string& id)
{
    auto l = live(id);
    if (l->running.exchange(true))
        throw Error(ErrorKind::Conflict, "a run is already in progress", id);
    SessionRecord r;
    {
        std::lock_guard lock(l->mutex);
        if (l->session->state().terminal())
        {
            l->running = false;
            throw Error(ErrorKind::Conflict, "session already finished", id);
        }
        r = mirror(id, *l);
    }
    _pool.submit([this, id, l] { execute(id, l); });
    return r;
}

SessionRecord SessionManager::runNow(const std::string& id)
{
    auto l = live(id);
    if (l->running.exchange(true))
        throw Error(ErrorKind::Conflict, "a run is already in progress", id);
    {
        std::lock_guard lock(l->mutex);
        if (l->session->state().terminal())
        {
            l->running = false;
            throw Error(ErrorKind::Conflict, "session already finished", id);
        }
    }
    execute(id, l);
    return _store.load(id);
}

Json SessionManager::diagnostics(const std::string& id, long since)
{
    auto record = _store.load(id);
    auto events = std::vector<orch::SessionEvent> {};
    std::shared_ptr<Live> l;
    {
        std::lock_guard lock(_mutex);
        if (auto it = _live.find(id); it != _live.end())
            l = it->second;
    }
    if (l)
        events = l->log->since(since);
    else if (auto file = _store.dir(id) / "events.ndjson"; fs::exists(file))
        for (auto& e: orch::EventLog::load(file))
            if (e.id > since)
                events.push_back(std::move(e));
    auto list = Json::array();
    for (const auto& e: events)
        list.push_back(e.toJson());
    auto last = events.empty() ? since : events.back().id;
    return {{"id", id}, {"since", since}, {"last_id", last}, {"phase", record.phase}, {"running", record.running},
            {"events", list}};
}

Json SessionManager::ledger(const std::string& id)
{
    _store.load(id);
    auto file = _store.dir(id) / "ledger.json";
    if (!fs::exists(file))
        throw Error(ErrorKind::NotFound, "no ledger yet", id);
    auto j = readJson(file);
    auto groups = Json {{"UserExplicit", Json::array()}, {"AgentDefault", Json::array()},
                        {"SimulatorDefault", Json::array()}};
    for (const auto& e: j.at("entries"))
        groups[e.at("provenance").get<std::string>()].push_back(e.at("key"));
    j["groups"] = groups;
    return j;
}

namespace
{

pipeline::Run loadRun(SessionStore& store, const std::string& id)
{
    store.load(id);
    auto dir = store.dir(id) / "results";
    if (!fs::exists(dir / "manifest.json"))
        throw Error(ErrorKind::NotFound, "no results yet", id);
    return pipeline::loadResults(dir);
}

} // namespace

Json SessionManager::rates(const std::string& id)
{
    auto run = loadRun(_store, id);
    const auto& r = run.result;
    auto time = Json::array();
    auto pvi = Json::array();
    auto pressure = Json::array();
    auto dt = Json::array();
    auto wells = Json::array();
    for (std::size_t w = 0; w < r.wellNames.size(); ++w)
        wells.push_back({{"name", r.wellNames[w]},
                         {"kind", wells::toString(r.wellKinds[w])},
                         {"water", Json::array()},
                         {"oil", Json::array()},
                         {"bhp", Json::array()}});
    for (const auto& s: r.diagnostics.accepted)
    {
        time.push_back(s.time);
        dt.push_back(s.dt);
        pvi.push_back(r.poreVolume > 0.0 ? s.cumulativeInjection / r.poreVolume : 0.0);
        pressure.push_back(s.averagePressure);
        for (std::size_t w = 0; w < s.wells.size() && w < wells.size(); ++w)
        {
            wells[w]["water"].push_back(s.wells[w].water);
            wells[w]["oil"].push_back(s.wells[w].oil);
            wells[w]["bhp"].push_back(s.wells[w].bhp);
        }
    }
    return {{"id", id},    {"time", time},         {"dt", dt},          {"pvi", pvi},
            {"average_pressure", pressure}, {"wells", wells}, {"water_cut", sim::producerWaterCut(r)}};
}

Json SessionManager::snapshots(const std::string& id)
{
    auto run = loadRun(_store, id);
    const auto& r = run.result;
    auto list = Json::array();
    for (std::size_t n = 0; n < r.snapshots.size(); ++n)
        list.push_back({{"time", r.reportTimes[n]}, {"pressure", r.snapshots[n].pressure}, {"sw", r.snapshots[n].sw}});
    const auto& d = run.config.dims;
    return {{"id", id}, {"dims", {d.nx, d.ny, d.nz}}, {"report_times", r.reportTimes}, {"snapshots", list}};
}

Json SessionManager::manifest(const std::string& id)
{
    return pipeline::runManifest(loadRun(_store, id));
}

audit::Subject SessionManager::subject(const std::string& id)
{
    auto run = loadRun(_store, id);
    auto ledgerFile = _store.dir(id) / "ledger.json";
    auto ledger = fs::exists(ledgerFile) ? spec::AssumptionLedger::fromJson(readJson(ledgerFile))
                                         : spec::AssumptionLedger {};
    return {std::move(ledger), std::move(run)};
}

Json SessionManager::diff(const std::string& reference, const std::string& candidate,
                          const std::vector<double>& fractions)
{
    auto report = audit::diff(subject(reference), subject(candidate), fractions).toJson();
    report["reference"] = reference;
    report["candidate"] = candidate;
    _store.writeArtifact(reference, "diffs/" + candidate + ".json", report.dump(2) + "\n");
    return report;
}

// ---- HTTP ----

int httpStatus(ErrorKind kind)
{
    switch (kind)
    {
        case ErrorKind::NotFound: return 404;
        case ErrorKind::Conflict: return 409;
        case ErrorKind::InvariantViolation:
        case ErrorKind::RefusedDiff:
        case ErrorKind::OutOfRange:
        case ErrorKind::InvalidDims:
        case ErrorKind::InvalidStats:
        case ErrorKind::InvalidWell:
        case ErrorKind::DegenerateGeometry: return 422;
        case ErrorKind::Parse:
        case ErrorKind::Unit:
        case ErrorKind::Level:
        case ErrorKind::Contradiction:
        case ErrorKind::Query: return 400;
        case ErrorKind::Io: return 502;
        default: return 500;
    }
}

Json errorJson(const Error& e)
{
    return {{"code", e.code()}, {"message", e.what()}, {"detail", e.detail()}};
}

struct Server::Impl
{
    SessionManager& manager;
    const orch::DocIndex& index;
    httplib::Server http;

    Impl(SessionManager& m, const orch::DocIndex& i): manager(m), index(i) {}

    using Handler = std::function<std::pair<int, Json>(const httplib::Request&)>;

    httplib::Server::Handler wrap(Handler handler)
    {
        return [handler](const httplib::Request& req, httplib::Response& res) {
            int status = 500;
            Json body;
            try
            {
                std::tie(status, body) = handler(req);
            }
            catch (const Error& e)
            {
                status = httpStatus(e.kind());
                body = errorJson(e);
            }
            catch (const Json::exception& e)
            {
                status = 400;
                body = {{"code", "parse-error"}, {"message", "malformed request body"}, {"detail", e.what()}};
            }
            catch (const std::exception& e)
            {
                status = 500;
                body = {{"code", "internal"}, {"message", e.what()}, {"detail", ""}};
            }
            res.status = status;
            res.set_content(body.dump(), "application/json");
        };
    }

    static Json body(const httplib::Request& req)
    {
        if (req.body.empty())
            return Json::object();
        return Json::parse(req.body);
    }

    void routes()
    {
        http.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                  {"Access-Control-Allow-Headers", "Content-Type"},
                                  {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
        http.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

        http.Get("/health", wrap([](const httplib::Request&) {
                     return std::pair {200, Json {{"status", "ok"}, {"layout", kStoreLayout}}};
                 }));

        http.Post("/sessions", wrap([this](const httplib::Request& req) {
                      auto b = body(req);
                      if (!b.is_object() || !b.contains("spec"))
                          throw Error(ErrorKind::Parse, "request needs a 'spec' document");
                      auto r = manager.create(b.at("spec"), b.value("policy", std::string("interactive")));
                      return std::pair {201, r.toJson()};
                  }));
        http.Get("/sessions", wrap([this](const httplib::Request&) {
                     auto list = Json::array();
                     for (const auto& r: manager.list())
                         list.push_back(r.toJson());
                     return std::pair {200, Json {{"sessions", list}, {"quarantined", manager.store().quarantined()}}};
                 }));
        http.Get(R"(/sessions/([^/]+))", wrap([this](const httplib::Request& req) {
                     return std::pair {200, manager.status(req.matches[1]).toJson()};
                 }));
        http.Get(R"(/sessions/([^/]+)/ambiguities)", wrap([this](const httplib::Request& req) {
                     return std::pair {200, manager.ambiguities(req.matches[1])};
                 }));
        http.Post(R"(/sessions/([^/]+)/answers)", wrap([this](const httplib::Request& req) {
                      auto b = body(req);
                      if (!b.is_object())
                          throw Error(ErrorKind::Parse, "answers must be an object of key -> value");
                      auto answers = std::map<std::string, Json> {};
                      for (auto it = b.begin(); it != b.end(); ++it)
                          answers[it.key()] = it.value();
                      return std::pair {200, manager.answer(req.matches[1], answers).toJson()};
                  }));
        http.Post(R"(/sessions/([^/]+)/run)", wrap([this](const httplib::Request& req) {
                      return std::pair {202, manager.startRun(req.matches[1]).toJson()};
                  }));
        auto diagnostics = wrap([this](const httplib::Request& req) {
            auto since = req.has_param("since") ? std::stol(req.get_param_value("since")) : 0L;
            return std::pair {200, manager.diagnostics(req.matches[1], since)};
        });
        http.Get(R"(/sessions/([^/]+)/diagnostics)", diagnostics);
        http.Get(R"(/sessions/([^/]+)/events)", diagnostics);
        http.Get(R"(/sessions/([^/]+)/ledger)", wrap([this](const httplib::Request& req) {
                     return std::pair {200, manager.ledger(req.matches[1])};
                 }));
        http.Get(R"(/sessions/([^/]+)/results/(rates|snapshots|manifest))",
                 wrap([this](const httplib::Request& req) {
                     auto id = std::string(req.matches[1]);
                     auto what = std::string(req.matches[2]);
                     auto j = what == "rates" ? manager.rates(id)
                              : what == "snapshots" ? manager.snapshots(id)
                                                    : manager.manifest(id);
                     return std::pair {200, j};
                 }));
        http.Post("/diffs", wrap([this](const httplib::Request& req) {
                      auto b = body(req);
                      auto fractions = b.contains("pvi_fractions") ? b["pvi_fractions"].get<std::vector<double>>()
                                                                   : audit::kDefaultFractions;
                      return std::pair {200, manager.diff(b.at("ref").get<std::string>(),
                                                          b.at("cand").get<std::string>(), fractions)};
                  }));
        http.Get("/search", wrap([this](const httplib::Request& req) {
                     auto q = req.get_param_value("q");
                     auto k = req.has_param("k") ? std::stoul(req.get_param_value("k")) : 10UL;
                     auto kind = std::optional<orch::DocKind> {};
                     if (req.has_param("kind"))
                     {
                         auto name = req.get_param_value("kind");
                         for (auto candidate: {orch::DocKind::Doc, orch::DocKind::Docstring, orch::DocKind::Example})
                             if (name == orch::toString(candidate))
                                 kind = candidate;
                         if (!kind)
                             throw Error(ErrorKind::Query, "unknown document kind", name);
                     }
                     auto hits = Json::array();
                     for (const auto& h: index.search(q, k, kind))
                         hits.push_back({{"id", h.entry->id},
                                         {"kind", orch::toString(h.entry->kind)},
                                         {"title", h.entry->title},
                                         {"module", h.entry->module},
                                         {"score", h.score},
                                         {"snippet", h.snippet}});
                     return std::pair {200, Json {{"query", q}, {"hits", hits}}};
                 }));

        http.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
            if (!res.body.empty())
                return;
            auto j = Json {{"code", res.status == 404 ? "not-found" : "http"},
                           {"message", res.status == 404 ? "no such endpoint" : "request failed"},
                           {"detail", req.path}};
            res.set_content(j.dump(), "application/json");
        });
    }
};

Server::Server(SessionManager& manager, const orch::DocIndex& index): _impl(std::make_unique<Impl>(manager, index))
{
    _impl->routes();
}

Server::~Server()
{
    stop();
}

void Server::listen(const std::string& host, int port)
{
    if (!_impl->http.listen(host, port))
        throw Error(ErrorKind::Io, "cannot listen", host + ":" + std::to_string(port));
}

int Server::bindAnyPort(const std::string& host)
{
    auto port = _impl->http.bind_to_any_port(host);
    if (port < 0)
        throw Error(ErrorKind::Io, "cannot bind", host);
    return port;
}

void Server::serve()
{
    _impl->http.listen_after_bind();
}

void Server::stop()
{
    if (_impl && _impl->http.is_running())
        _impl->http.stop();
}

void Server::waitUntilReady() const
{
    _impl->http.wait_until_ready();
}

void Server::mountStatic(const fs::path& dir)
{
    if (!_impl->http.set_mount_point("/", dir.string()))
        throw Error(ErrorKind::NotFound, "static directory does not exist", dir.string());
}

void Server::logRequests(std::ostream& out)
{
    _impl->http.set_logger([&out](const httplib::Request& req, const httplib::Response& res) {
        static std::mutex mutex;
        std::lock_guard lock(mutex);
        out << spec::utcNow() << ' ' << req.method << ' ' << req.path << ' ' << res.status << std::endl;
    });
}

} // namespace groundloop::service
