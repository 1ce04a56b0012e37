#include "diffstruct/service.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <sstream>

namespace diffstruct {

using nlohmann::json;

std::string SessionManager::create(const SessionConfig& config, const TriangleMesh& mesh)
{
    auto session = std::make_shared<Session>();
    session->bundle = std::make_shared<const SessionBundle>(precompute(config, mesh));
    std::lock_guard lock(mutex_);
    std::string id = "s" + std::to_string(next_id_++);
    sessions_.emplace(id, std::move(session));
    return id;
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& id) const
{
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
    return it->second;
}

std::shared_ptr<const SessionBundle> SessionManager::bundle(const std::string& id) const
{
    const auto session = find(id);
    std::lock_guard lock(session->state);
    return session->bundle;
}

std::shared_ptr<const SessionBundle> SessionManager::recompute(const std::string& id, const RecomputeRequest& request)
{
    const int fields = (request.gamma ? 1 : 0) + (request.r ? 1 : 0) + (request.k ? 1 : 0);
    if (fields != 1) throw ConfigError("recompute needs exactly one of gamma, r or k");
    const auto session = find(id);
    std::lock_guard compute(session->compute);
    std::shared_ptr<const SessionBundle> current;
    {
        std::lock_guard lock(session->state);
        current = session->bundle;
    }
    SessionBundle next = request.gamma ? recompute_gamma(*current, *request.gamma)
                         : request.r   ? recompute_r(*current, *request.r)
                                       : recompute_k(*current, *request.k);
    auto shared = std::make_shared<const SessionBundle>(std::move(next));
    std::lock_guard lock(session->state);
    session->bundle = shared;
    return shared;
}

StructureExport SessionManager::extract(const std::string& id, const StripeParams& params,
                                        std::optional<std::uint64_t> version)
{
    const auto session = find(id);
    std::shared_ptr<const SessionBundle> snapshot;
    {
        std::lock_guard lock(session->state);
        snapshot = session->bundle;
    }
    if (version && *version != snapshot->revision) {
        throw StaleVersionError("bundle version " + std::to_string(*version) + " is stale (current " +
                                    std::to_string(snapshot->revision) + ")",
                                snapshot->revision);
    }
    if (!params_match_bundle(params, *snapshot)) {
        throw StaleVersionError("stripe parameters disagree with the bundle's gamma or r; recompute first",
                                snapshot->revision);
    }
    StructureExport out = export_structure(*snapshot, params, snapshot->config.max_depth);
    std::lock_guard lock(session->state);
    session->last_obj = out.obj;
    return out;
}

std::optional<std::string> SessionManager::last_obj(const std::string& id) const
{
    const auto session = find(id);
    std::lock_guard lock(session->state);
    return session->last_obj;
}

std::size_t SessionManager::size() const
{
    std::lock_guard lock(mutex_);
    return sessions_.size();
}

// ---------------------------------------------------------------------------

namespace {

json summary_json(const std::string& id, const SessionBundle& b)
{
    const auto eigen = [](const ModeSet& m) { return std::vector<double>(m.eigenvalues.data(), m.eigenvalues.data() + m.count()); };
    int isotropic = 0;
    for (auto flag : b.summary.isotropic) isotropic += flag;
    json timing = {{"membrane", b.timing.membrane}, {"statics", b.timing.statics}, {"stress", b.timing.stress},
                   {"diffusion", b.timing.diffusion}, {"modes", b.timing.modes}, {"total", b.timing.total}};
    timing["bending"] = b.timing.bending ? json(*b.timing.bending) : json(nullptr);
    return {{"id", id},
            {"version", b.revision},
            {"vertices", b.mesh.num_vertices()},
            {"faces", b.mesh.num_faces()},
            {"k", b.num_modes()},
            {"isotropicFaces", isotropic},
            {"config", b.config},
            {"timing", timing},
            {"eigenvalues", {{"u", eigen(b.u)}, {"w", eigen(b.w)}}}};
}

void send_error(httplib::Response& res, int status, const std::string& message, const std::string& stage = {})
{
    json body = {{"error", message}};
    if (!stage.empty()) body["stage"] = stage;
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

template <typename Fn>
auto guarded(Fn fn)
{
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const NotFoundError& e) {
            send_error(res, 404, e.what());
        } catch (const StaleVersionError& e) {
            send_error(res, 409, e.what());
            res.set_header("X-Current-Version", std::to_string(e.current()));
        } catch (const StageError& e) {
            send_error(res, 500, e.what(), e.stage());
        } catch (const ConfigError& e) {
            send_error(res, 400, e.what());
        } catch (const MeshError& e) {
            send_error(res, 400, e.what());
        } catch (const json::exception& e) {
            send_error(res, 400, std::string("malformed JSON: ") + e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, e.what());
        }
    };
}

json parse_body(const httplib::Request& req)
{
    json body = json::parse(req.body);
    if (!body.is_object()) throw ConfigError("request body must be a JSON object");
    return body;
}

} // namespace

HttpService::HttpService(std::shared_ptr<SessionManager> sessions)
    : sessions_(std::move(sessions)), server_(std::make_unique<httplib::Server>())
{
    install_routes();
}

HttpService::~HttpService() { stop(); }

void HttpService::install_routes()
{
    auto& s = *server_;
    SessionManager* sessions = sessions_.get();

    s.Get("/health", guarded([sessions](const httplib::Request&, httplib::Response& res) {
        res.set_content(json{{"status", "ok"}, {"sessions", sessions->size()}}.dump(), "application/json");
    }));

    s.Post("/sessions", guarded([sessions](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        if (!body.contains("config")) throw ConfigError("request needs 'config'");
        const SessionConfig config = body.at("config").get<SessionConfig>();
        TriangleMesh mesh;
        if (body.contains("meshObj")) {
            mesh = parse_obj_string(body.at("meshObj").get<std::string>());
        } else if (!config.mesh_path.empty()) {
            mesh = load_obj(config.mesh_path);
        } else {
            throw ConfigError("request needs 'meshObj' or a config mesh path");
        }
        const std::string id = sessions->create(config, mesh);
        res.status = 201;
        res.set_content(summary_json(id, *sessions->bundle(id)).dump(), "application/json");
    }));

    s.Get(R"(/sessions/([^/]+))", guarded([sessions](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        res.set_content(summary_json(id, *sessions->bundle(id)).dump(), "application/json");
    }));

    s.Get(R"(/sessions/([^/]+)/bundle)", guarded([sessions](const httplib::Request& req, httplib::Response& res) {
        const auto bundle = sessions->bundle(req.matches[1]);
        res.set_header("X-Bundle-Version", std::to_string(bundle->revision));
        res.set_content(bundle_bytes(*bundle), "application/octet-stream");
    }));

    s.Post(R"(/sessions/([^/]+)/recompute)", guarded([sessions](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        RecomputeRequest request;
        if (body.contains("gamma")) request.gamma = body.at("gamma").get<double>();
        if (body.contains("r")) request.r = body.at("r").get<double>();
        if (body.contains("k")) request.k = body.at("k").get<int>();
        const std::string id = req.matches[1];
        const auto bundle = sessions->recompute(id, request);
        res.set_content(summary_json(id, *bundle).dump(), "application/json");
    }));

    s.Post(R"(/sessions/([^/]+)/extract)", guarded([sessions](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        if (!body.contains("params")) throw ConfigError("request needs 'params'");
        const StripeParams params = body.at("params").get<StripeParams>();
        std::optional<std::uint64_t> version;
        if (body.contains("version")) version = body.at("version").get<std::uint64_t>();
        const StructureExport out = sessions->extract(req.matches[1], params, version);
        res.set_header("X-Empty-Structure", out.mesh.empty() ? "true" : "false");
        res.set_header("X-Faces", std::to_string(out.mesh.mesh.num_faces()));
        res.set_content(out.obj, "model/obj");
    }));

    s.Get(R"(/sessions/([^/]+)/structure\.obj)", guarded([sessions](const httplib::Request& req, httplib::Response& res) {
        const auto obj = sessions->last_obj(req.matches[1]);
        if (!obj) throw NotFoundError("no structure extracted yet");
        res.set_content(*obj, "model/obj");
    }));
}

int HttpService::start(const std::string& host, int port)
{
    const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return bound;
}

void HttpService::run(const std::string& host, int port)
{
    if (!server_->listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
}

void HttpService::stop()
{
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

} // namespace diffstruct
