// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <groundloop/audit.hpp>
#include <groundloop/orchestrator.hpp>

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace groundloop::service
{

using Json = nlohmann::json;

inline constexpr const char* kStoreLayout = "groundloop-store/1";

/// Writes to a temporary sibling, flushes it and renames it over `file`.
void writeAtomic(const std::filesystem::path& file, const std::string& text);

/// Status mirror of one session, kept in <store>/<id>/session.json.
struct SessionRecord
{
    std::string id;
    std::string created;
    std::string title;
    std::string level;
    std::string policy;
    std::string phase;
    Json pending = Json::array(); ///< open ambiguity items
    int revisions = 0;
    std::string failureReason;
    std::string configHash;
    bool certificate = false;
    bool running = false;

    [[nodiscard]] Json toJson() const;
    static SessionRecord fromJson(const Json& j);
};

/// One directory per session: spec.json, session.json, events.ndjson,
/// config.json, ledger.json, results/ and diffs/. Records that cannot be read
/// are moved under quarantine/ and reported, and the store stays usable.
class SessionStore
{
  public:
    explicit SessionStore(std::filesystem::path root);

    [[nodiscard]] const std::filesystem::path& root() const { return _root; }
    [[nodiscard]] std::filesystem::path dir(const std::string& id) const;

    /// Validates the spec, writes spec.json and the initial record.
    SessionRecord create(const Json& specDocument, const std::string& policy);
    /// Not-found for unknown ids; a corrupt record is quarantined and reported as corrupt-log.
    SessionRecord load(const std::string& id);
    void save(const SessionRecord& record);
    std::vector<SessionRecord> list();

    [[nodiscard]] Json spec(const std::string& id) const;
    void writeArtifact(const std::string& id, const std::string& relative, const std::string& text);
    [[nodiscard]] std::vector<std::string> quarantined() const;

  private:
    void quarantine(const std::string& id, const std::string& reason);

    std::filesystem::path _root;
    mutable std::mutex _mutex;
};

/// Fixed-size pool running queued jobs in order.
class WorkerPool
{
  public:
    explicit WorkerPool(std::size_t workers);
    ~WorkerPool();
    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    void submit(std::function<void()> job);
    /// Blocks until the queue is empty and no job is running.
    void drain();

  private:
    std::vector<std::thread> _threads;
    std::deque<std::function<void()>> _queue;
    std::mutex _mutex;
    std::condition_variable _wake;
    std::condition_variable _idle;
    std::size_t _active = 0;
    bool _stopping = false;
};

struct ManagerOptions
{
    std::string plannerUrl; ///< optional external planner, the rule resolver is the fallback
    std::size_t workers = 2;
    orch::Limits limits;
};

/// Sessions over a store. Every mutation is serialized per session and
/// mirrored to disk before it returns; reads come from the store so a restart
/// loses nothing.
class SessionManager
{
  public:
    explicit SessionManager(SessionStore& store, ManagerOptions options = {});
    ~SessionManager();

    SessionRecord create(const Json& specDocument, const std::string& policy = "interactive");
    SessionRecord status(const std::string& id);
    std::vector<SessionRecord> list() { return _store.list(); }
    Json ambiguities(const std::string& id);
    /// Invariant-violation for a bad answer, conflict when running or finished.
    SessionRecord answer(const std::string& id, const std::map<std::string, Json>& answers);
    /// Starts the Act/Validate cycle on the worker pool; conflict if one is in progress.
    SessionRecord startRun(const std::string& id);
    /// Runs in the calling thread.
    SessionRecord runNow(const std::string& id);
    void waitIdle() { _pool.drain(); }

    /// Events with id > since, plus the phase.
    Json diagnostics(const std::string& id, long since);
    Json ledger(const std::string& id);
    Json rates(const std::string& id);
    Json snapshots(const std::string& id);
    Json manifest(const std::string& id);
    /// Diffs two finished sessions and stores the report under the reference's diffs/.
    Json diff(const std::string& reference, const std::string& candidate,
              const std::vector<double>& fractions = audit::kDefaultFractions);

    SessionStore& store() { return _store; }

  private:
    struct Live;
    std::shared_ptr<Live> live(const std::string& id);
    SessionRecord mirror(const std::string& id, Live& l);
    void execute(const std::string& id, const std::shared_ptr<Live>& l);
    audit::Subject subject(const std::string& id);

    SessionStore& _store;
    ManagerOptions _options;
    std::mutex _mutex;
    std::map<std::string, std::shared_ptr<Live>> _live;
    WorkerPool _pool;
};

/// HTTP status for a domain error.
int httpStatus(ErrorKind kind);
Json errorJson(const Error& e);

class Server
{
  public:
    Server(SessionManager& manager, const orch::DocIndex& index);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds and serves until stop(); blocking.
    void listen(const std::string& host, int port);
    /// Binds to an ephemeral port and returns it; serve() then blocks.
    int bindAnyPort(const std::string& host);
    void serve();
    void stop();
    void waitUntilReady() const;
    /// Serves files under `dir` at the root path, next to the API.
    void mountStatic(const std::filesystem::path& dir);
    /// One line per request on `out`.
    void logRequests(std::ostream& out);

  private:
    struct Impl;
    std::unique_ptr<Impl> _impl;
};

} // namespace groundloop::service
