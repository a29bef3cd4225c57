#include "songsign/http_api.hpp"

#include <httplib.h>

#include <condition_variable>
#include <set>
#include <thread>

#include "songsign/json_io.hpp"

namespace songsign {

using nlohmann::json;

int http_status_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::UnbalancedBracket:
    case ErrorCode::BothEmpty:
    case ErrorCode::MalformedTimestamp:
    case ErrorCode::EmptyDocument:
    case ErrorCode::NotNoteworthy: return 400;
    case ErrorCode::NotFound: return 404;
    case ErrorCode::ConflictingVersion:
    case ErrorCode::ThreadExists:
    case ErrorCode::InvalidTransition: return 409;
    case ErrorCode::Busy: return 423;
    case ErrorCode::NotReady:
    case ErrorCode::Unavailable: return 503;
    case ErrorCode::ProviderError:
    case ErrorCode::MockMiss:
    case ErrorCode::ValidationExhausted:
    case ErrorCode::UnparseableGloss:
    case ErrorCode::MissingSubtitles:
    case ErrorCode::LiveModeDisabled:
    case ErrorCode::SegmentOutOfRange: return 502;
    case ErrorCode::MissingPlaceholder:
    case ErrorCode::StoreError: return 500;
    }
    return 500;
}

json error_body(const Error& e) { return {{"code", to_string(e.code())}, {"message", e.what()}, {"details", e.details()}}; }

namespace {

constexpr const char* kJson = "application/json";

void send(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), kJson);
}

json body_of(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
        auto j = json::parse(req.body);
        if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "request body must be a JSON object");
        return j;
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("malformed JSON body: ") + e.what());
    }
}

int int_param(const std::string& text, const char* field) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(text, &used);
        if (used == text.size() && v >= INT32_MIN && v <= INT32_MAX) return static_cast<int>(v);
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::InvalidArgument, std::string(field) + " must be an integer", {{"field", field}});
}

Millis millis_param(const std::string& text, const char* field) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(text, &used);
        if (used == text.size()) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::InvalidArgument, std::string(field) + " must be integer milliseconds", {{"field", field}});
}

std::string sse_frame(const std::string& type, const json& data, std::optional<std::int64_t> id = std::nullopt) {
    std::string out;
    if (id) out += "id: " + std::to_string(*id) + "\n";
    return out + "event: " + type + "\ndata: " + data.dump() + "\n\n";
}

} // namespace

struct ApiServer::Impl {
    std::shared_ptr<Workbench> wb;
    httplib::Server server;
    std::thread thread;

    // Idempotency keys with a request in flight; a retry waits for the
    // original to finish and then replays its stored response.
    std::mutex keys_mu;
    std::condition_variable keys_cv;
    std::set<std::string> in_flight;

    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    static Handler guarded(Handler h) {
        return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
            try {
                h(req, res);
            } catch (const Error& e) {
                send(res, http_status_for(e.code()), error_body(e));
            } catch (const json::exception& e) {
                send(res, 400, error_body(Error(ErrorCode::InvalidArgument, e.what())));
            } catch (const std::exception& e) {
                send(res, 500, error_body(Error(ErrorCode::StoreError, e.what())));
            }
        };
    }

    Handler mutating(Handler h) {
        return [this, h = guarded(std::move(h))](const httplib::Request& req, httplib::Response& res) {
            if (!req.has_header("Idempotency-Key")) return h(req, res);
            const auto key = req.method + " " + req.path + " " + req.get_header_value("Idempotency-Key");
            {
                std::unique_lock lock(keys_mu);
                keys_cv.wait(lock, [&] { return in_flight.count(key) == 0; });
                in_flight.insert(key);
            }
            auto release = [&] {
                {
                    std::lock_guard lock(keys_mu);
                    in_flight.erase(key);
                }
                keys_cv.notify_all();
            };
            try {
                if (const auto stored = wb->store().find_response(key)) {
                    res.status = stored->status;
                    res.set_content(stored->body, kJson);
                    res.set_header("Idempotent-Replay", "true");
                } else {
                    h(req, res);
                    if (res.status < 500) wb->store().save_response(key, {res.status, res.body});
                }
            } catch (const std::exception& e) {
                send(res, 500, error_body(Error(ErrorCode::StoreError, e.what())));
            }
            release();
        };
    }

    void routes() {
        server.Get("/health", [](const httplib::Request&, httplib::Response& res) { send(res, 200, {{"ok", true}}); });

        server.Post("/projects", mutating([this](const httplib::Request& req, httplib::Response& res) {
            const auto p = wb->submit_project(parse_create_request(body_of(req)));
            send(res, 201, json(p));
        }));

        server.Get("/projects", guarded([this](const httplib::Request&, httplib::Response& res) {
            send(res, 200, json(wb->store().list_projects()));
        }));

        server.Get("/projects/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send(res, 200, wb->project_view(req.path_params.at("id")));
        }));

        server.Post("/projects/:id/preprocess", mutating([this](const httplib::Request& req, httplib::Response& res) {
            const auto body = body_of(req);
            std::optional<Stage> from;
            if (body.contains("from_stage") && !body.at("from_stage").is_null()) {
                try {
                    from = stage_from_string(body.at("from_stage").get<std::string>());
                } catch (const Error& e) {
                    throw Error(ErrorCode::InvalidArgument, e.what(), {{"field", "from_stage"}});
                }
            }
            send(res, 202, json(wb->enqueue_preprocess(req.path_params.at("id"), from)));
        }));

        server.Get("/projects/:id/lines", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send(res, 200, wb->lines_view(req.path_params.at("id")));
        }));

        server.Put("/projects/:id/lines/:n/gloss", mutating([this](const httplib::Request& req, httplib::Response& res) {
            const auto body = body_of(req);
            if (!body.contains("raw") || !body.at("raw").is_string()) {
                throw Error(ErrorCode::InvalidArgument, "\"raw\" must be a string", {{"field", "raw"}});
            }
            if (!body.contains("expected_version") || !body.at("expected_version").is_number_integer()) {
                throw Error(ErrorCode::InvalidArgument, "\"expected_version\" must be an integer",
                            {{"field", "expected_version"}});
            }
            const auto g = wb->save_gloss(req.path_params.at("id"), int_param(req.path_params.at("n"), "line"),
                                          body.at("raw").get<std::string>(), body.at("expected_version").get<std::int64_t>());
            send(res, 200, json(g));
        }));

        server.Get("/projects/:id/lines/:n/gloss", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto& id = req.path_params.at("id");
            wb->store().load_project(id);
            send(res, 200, json(wb->store().gloss_history(id, int_param(req.path_params.at("n"), "line"))));
        }));

        server.Get("/projects/:id/lines/:n/suggestions", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto s = wb->suggestions(req.path_params.at("id"), int_param(req.path_params.at("n"), "line"),
                                           req.get_param_value("partial"));
            send(res, 200, {{"suggestions", s}});
        }));

        server.Post("/projects/:id/lines/:n/thread", mutating([this](const httplib::Request& req, httplib::Response& res) {
            const auto body = body_of(req);
            const bool proactive = body.value("proactive", false);
            const auto t = wb->open_thread(req.path_params.at("id"), int_param(req.path_params.at("n"), "line"), proactive);
            send(res, 201, json(t));
        }));

        server.Get("/projects/:id/threads", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send(res, 200, wb->thread_summaries(req.path_params.at("id")));
        }));

        server.Get("/threads/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send(res, 200, json(wb->chat().get_thread(req.path_params.at("id"))));
        }));

        server.Post("/threads/:id/messages", mutating([this](const httplib::Request& req, httplib::Response& res) {
            const auto body = body_of(req);
            UserInput input;
            if (body.contains("shortcut_intent") && !body.at("shortcut_intent").is_null()) {
                const auto name = body.at("shortcut_intent").get<std::string>();
                input.shortcut = intent_from_string(name);
                if (!input.shortcut) {
                    throw Error(ErrorCode::InvalidArgument, "unknown shortcut_intent " + name,
                                {{"field", "shortcut_intent"}});
                }
            }
            if (body.contains("text") && body.at("text").is_string()) input.text = body.at("text").get<std::string>();
            if (!input.shortcut && input.text.find_first_not_of(" \t\r\n") == std::string::npos) {
                throw Error(ErrorCode::InvalidArgument, "either \"text\" or \"shortcut_intent\" is required", {{"field", "text"}});
            }
            const auto turn = wb->post_message(req.path_params.at("id"), input);
            send(res, 200, {{"thread_id", req.path_params.at("id")},
                            {"user", turn.user},
                            {"assistant", turn.assistant},
                            {"template_id", turn.template_id}});
        }));

        server.Get("/projects/:id/playback", guarded([this](const httplib::Request& req, httplib::Response& res) {
            if (!req.has_param("t")) throw Error(ErrorCode::InvalidArgument, "t is required", {{"field", "t"}});
            const auto t = millis_param(req.get_param_value("t"), "t");
            const auto mode = req.has_param("mode") ? playback_mode_from_string(req.get_param_value("mode")) : PlaybackMode::global;
            std::optional<int> loop;
            if (req.has_param("loop") && !req.get_param_value("loop").empty()) loop = int_param(req.get_param_value("loop"), "loop");
            send(res, 200, json(wb->playback(req.path_params.at("id"), t, mode, loop)));
        }));

        server.Get("/projects/:id/analytics", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send(res, 200, to_json(wb->analytics(req.path_params.at("id"))));
        }));

        server.Get("/projects/:id/export", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send(res, 200, wb->store().export_project(req.path_params.at("id")));
        }));

        server.Get("/export", guarded([this](const httplib::Request&, httplib::Response& res) {
            send(res, 200, wb->store().export_bundle());
        }));

        server.Get("/projects/:id/events", guarded([this](const httplib::Request& req, httplib::Response& res) { events(req, res); }));
    }

    // Current job records first, then live events. The stream ends once the
    // project has at least one job and none is pending or running; a project
    // without jobs keeps the stream open until its first job settles.
    void events(const httplib::Request& req, httplib::Response& res) {
        const auto project_id = req.path_params.at("id");
        wb->store().load_project(project_id);
        auto sub = wb->events().subscribe(project_id);
        auto snapshot = wb->store().list_jobs(project_id);
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider(
            "text/event-stream",
            [this, project_id, sub, snapshot, sent_snapshot = false](std::size_t, httplib::DataSink& sink) mutable {
                if (!sent_snapshot) {
                    sent_snapshot = true;
                    for (const auto& j : snapshot) {
                        const auto frame = sse_frame("job_status", j);
                        sink.write(frame.data(), frame.size());
                    }
                }
                for (;;) {
                    if (!sink.is_writable()) return false;
                    if (auto e = sub->next(std::chrono::milliseconds(200))) {
                        const auto frame = sse_frame(e->type, e->data, e->id);
                        if (!sink.write(frame.data(), frame.size())) return false;
                        continue;
                    }
                    if (sub->closed()) {
                        sink.done();
                        return true;
                    }
                    if (wb->jobs_settled(project_id)) {
                        // Drain anything published between the last wait and the idle check.
                        while (auto e = sub->next(std::chrono::milliseconds(0))) {
                            const auto frame = sse_frame(e->type, e->data, e->id);
                            sink.write(frame.data(), frame.size());
                        }
                        sink.done();
                        return true;
                    }
                    static const std::string keepalive = ": keepalive\n\n";
                    if (!sink.write(keepalive.data(), keepalive.size())) return false;
                }
            },
            [this, project_id, sub](bool) { wb->events().unsubscribe(project_id, sub); });
    }
};

ApiServer::ApiServer(std::shared_ptr<Workbench> workbench) : impl_(std::make_unique<Impl>()) {
    impl_->wb = std::move(workbench);
    impl_->routes();
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
    if (port == 0) return impl_->server.bind_to_any_port(host);
    if (!impl_->server.bind_to_port(host, port)) {
        throw Error(ErrorCode::Unavailable, "cannot bind " + host + ":" + std::to_string(port));
    }
    return port;
}

void ApiServer::run() { impl_->server.listen_after_bind(); }

void ApiServer::start() {
    impl_->thread = std::thread([this] { run(); });
    impl_->server.wait_until_ready();
}

void ApiServer::stop() {
    impl_->wb->events().close_all();
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

} // namespace songsign
