#pragma once

#include "diffstruct/errors.hpp"
#include "diffstruct/pipeline.hpp"

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace diffstruct {

class NotFoundError : public Error {
public:
    using Error::Error;
};

/// Request made against an outdated bundle revision.
class StaleVersionError : public Error {
public:
    StaleVersionError(const std::string& what, std::uint64_t current) : Error(what), current_(current) {}
    std::uint64_t current() const { return current_; }

private:
    std::uint64_t current_;
};

/// Exactly one of the fields is set.
struct RecomputeRequest {
    std::optional<double> gamma;
    std::optional<double> r;
    std::optional<int> k;
};

/// In-memory sessions keyed by id. Recomputes are serialized per session;
/// reads and extraction work on an immutable snapshot of the bundle.
class SessionManager {
public:
    /// Runs precompute and registers the result. Returns the new id.
    std::string create(const SessionConfig& config, const TriangleMesh& mesh);

    std::shared_ptr<const SessionBundle> bundle(const std::string& id) const;

    /// Blocks while another recompute of the same session is running.
    std::shared_ptr<const SessionBundle> recompute(const std::string& id, const RecomputeRequest& request);

    /// `version`, when given, must equal the current bundle revision.
    StructureExport extract(const std::string& id, const StripeParams& params,
                            std::optional<std::uint64_t> version = std::nullopt);

    std::optional<std::string> last_obj(const std::string& id) const;

    std::size_t size() const;

private:
    struct Session {
        std::mutex compute;
        mutable std::mutex state;
        std::shared_ptr<const SessionBundle> bundle;
        std::optional<std::string> last_obj;
    };

    std::shared_ptr<Session> find(const std::string& id) const;

    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t next_id_ = 1;
};

/// HTTP front end. Routes:
///   GET  /health
///   POST /sessions                     {"config": {...}, "meshObj": "<obj text>"}
///   GET  /sessions/{id}                JSON summary
///   GET  /sessions/{id}/bundle         binary bundle
///   POST /sessions/{id}/recompute      {"gamma": x} | {"r": x} | {"k": n}
///   POST /sessions/{id}/extract        {"params": {...}, "version": n}  -> OBJ
///   GET  /sessions/{id}/structure.obj  last extracted OBJ
/// Errors are JSON {"error": msg, "stage": name?} with 400, 404, 409 or 500.
class HttpService {
public:
    explicit HttpService(std::shared_ptr<SessionManager> sessions = std::make_shared<SessionManager>());
    ~HttpService();

    HttpService(const HttpService&) = delete;
    HttpService& operator=(const HttpService&) = delete;

    /// Binds and serves on a background thread. Port 0 picks a free port.
    /// Returns the bound port.
    int start(const std::string& host, int port);

    /// Binds and serves on the calling thread until `stop`.
    void run(const std::string& host, int port);

    void stop();

    SessionManager& sessions() { return *sessions_; }

private:
    void install_routes();

    std::shared_ptr<SessionManager> sessions_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
};

} // namespace diffstruct
