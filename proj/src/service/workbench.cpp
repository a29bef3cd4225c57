#include <algorithm>
#include <cctype>

#include "songsign/json_io.hpp"
#include "songsign/service.hpp"

namespace songsign {

using nlohmann::json;

namespace {

std::string slugify(const std::string& s) {
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c)) {
            out.push_back(static_cast<char>(std::tolower(c)));
        } else if (!out.empty() && out.back() != '-') {
            out.push_back('-');
        }
    }
    while (!out.empty() && out.back() == '-') out.pop_back();
    return out;
}

std::string error_text(const Error& e) { return std::string(to_string(e.code())) + ": " + e.what(); }

bool blank(const std::string& s) {
    for (unsigned char c : s) {
        if (!std::isspace(c)) return false;
    }
    return true;
}

std::string required_string(const json& body, const char* field) {
    if (!body.contains(field) || !body.at(field).is_string() || blank(body.at(field).get<std::string>())) {
        throw Error(ErrorCode::InvalidArgument, std::string("\"") + field + "\" must be a non-empty string",
                    {{"field", field}});
    }
    return body.at(field).get<std::string>();
}

// Enum field via its from_string; any failure is reported against `field`.
template <typename Parse>
auto parse_field(const json& body, const char* field, Parse parse) {
    const auto text = required_string(body, field);
    try {
        return parse(text);
    } catch (const Error& e) {
        throw Error(ErrorCode::InvalidArgument, e.what(), {{"field", field}});
    }
}

} // namespace

void CreateProjectRequest::validate() const {
    for (const auto& [field, value] : {std::pair{"title", &title}, {"artist", &artist}, {"nickname", &nickname}}) {
        if (blank(*value)) {
            throw Error(ErrorCode::InvalidArgument, std::string("\"") + field + "\" must not be empty", {{"field", field}});
        }
    }
    if (id && slugify(*id) != *id) {
        throw Error(ErrorCode::InvalidArgument, "id must be lowercase letters, digits and single dashes", {{"field", "id"}});
    }
}

CreateProjectRequest parse_create_request(const json& body) {
    if (!body.is_object()) throw Error(ErrorCode::InvalidArgument, "request body must be a JSON object");
    CreateProjectRequest r;
    r.title = required_string(body, "title");
    r.artist = required_string(body, "artist");
    r.nickname = required_string(body, "nickname");
    r.sign_language = parse_field(body, "sign_language", sign_language_from_string);
    if (body.contains("proficiency")) r.proficiency = parse_field(body, "proficiency", proficiency_from_string);
    if (body.contains("id")) r.id = required_string(body, "id");
    r.validate();
    return r;
}

Workbench::Workbench(std::shared_ptr<Store> store, ClientSet clients, std::shared_ptr<LlmClient> llm,
                     WorkbenchConfig config)
    : store_(std::move(store)),
      clients_(std::move(clients)),
      llm_(std::move(llm)),
      config_(config),
      backend_(std::make_shared<StoreChatBackend>(store_)),
      chat_(std::make_unique<ChatEngine>(llm_, backend_)) {}

Workbench::~Workbench() {
    jobs_.wait_idle();
    events_.close_all();
}

SongProject Workbench::create_project(const CreateProjectRequest& req) {
    req.validate();
    SongProject p;
    p.title = req.title;
    p.artist = req.artist;
    p.sign_language = req.sign_language;
    p.user_profile = {req.nickname, req.proficiency};
    const std::string base = req.id ? *req.id : slugify(req.title + "-" + req.artist);
    std::lock_guard lock(create_mu_);
    std::vector<std::string> taken;
    for (const auto& existing : store_->list_projects()) taken.push_back(existing.id);
    auto is_taken = [&](const std::string& id) { return std::find(taken.begin(), taken.end(), id) != taken.end(); };
    if (req.id && is_taken(base)) {
        throw Error(ErrorCode::InvalidArgument, "project id " + base + " already exists", {{"field", "id"}});
    }
    p.id = base.empty() ? "project" : base;
    for (int n = 2; is_taken(p.id); ++n) p.id = base + "-" + std::to_string(n);
    store_->save_project(p);
    return p;
}

void Workbench::job_status(const JobRecord& job) { events_.publish(job.project_id, "job_status", json(job)); }

void Workbench::fail_job(std::int64_t job_id, const std::string& project_id, const Error& e) {
    std::optional<std::string> stage;
    if (e.details().contains("stage")) stage = e.details().at("stage").get<std::string>();
    try {
        auto p = store_->load_project(project_id);
        if (p.status != ProjectStatus::failed) {
            if (p.status != ProjectStatus::preprocessing) p.transition(ProjectStatus::preprocessing);
            p.transition(ProjectStatus::failed);
            store_->save_project(p);
        }
        job_status(store_->update_job(job_id, JobStatus::failed, stage, error_text(e)));
    } catch (const Error&) {
        // The store itself is failing; the job stays as last recorded.
    }
}

std::shared_future<void> Workbench::submit_job(const JobRecord& job, std::optional<Stage> from_stage) {
    job_status(job);
    if (job.kind == JobKind::alignment) {
        return jobs_.submit(job.project_id, [this, id = job.id, pid = job.project_id] { execute_alignment(id, pid); });
    }
    return jobs_.submit(job.project_id,
                        [this, id = job.id, pid = job.project_id, from_stage] { execute_preprocess(id, pid, from_stage); });
}

JobRecord Workbench::enqueue_alignment(const std::string& project_id) {
    store_->load_project(project_id);
    const auto job = store_->create_job(project_id, JobKind::alignment);
    submit_job(job, std::nullopt);
    return job;
}

JobRecord Workbench::enqueue_preprocess(const std::string& project_id, std::optional<Stage> from_stage) {
    store_->load_project(project_id);
    const auto job = store_->create_job(project_id, JobKind::preprocess);
    submit_job(job, from_stage);
    return job;
}

std::vector<JobRecord> Workbench::enqueue_pipeline(const std::string& project_id) {
    store_->load_project(project_id);
    std::vector<JobRecord> out{store_->create_job(project_id, JobKind::alignment),
                               store_->create_job(project_id, JobKind::preprocess)};
    for (const auto& j : out) submit_job(j, std::nullopt);
    return out;
}

SongProject Workbench::submit_project(const CreateProjectRequest& req) {
    auto p = create_project(req);
    enqueue_pipeline(p.id);
    return p;
}

JobRecord Workbench::run_alignment(const std::string& project_id) {
    store_->load_project(project_id);
    const auto job = store_->create_job(project_id, JobKind::alignment);
    submit_job(job, std::nullopt).get();
    return store_->load_job(job.id);
}

JobRecord Workbench::run_preprocess(const std::string& project_id, std::optional<Stage> from_stage) {
    store_->load_project(project_id);
    const auto job = store_->create_job(project_id, JobKind::preprocess);
    submit_job(job, from_stage).get();
    return store_->load_job(job.id);
}

bool Workbench::jobs_settled(const std::string& project_id) {
    const auto jobs = store_->list_jobs(project_id);
    if (jobs.empty()) return false;
    for (const auto& j : jobs) {
        if (j.status == JobStatus::pending || j.status == JobStatus::running) return false;
    }
    return true;
}

void Workbench::execute_alignment(std::int64_t job_id, const std::string& project_id) {
    try {
        job_status(store_->update_job(job_id, JobStatus::running, std::string("fetch")));
        auto project = store_->load_project(project_id);
        const SongQuery q{project.title, project.artist};
        const auto lyrics = clients_.lyrics->fetch(q);
        const auto media = clients_.media->fetch(q);
        if (project.song_description.empty()) project.song_description = lyrics.song_description;
        project.media = {lyrics.key, media.subtitle_key, media.audio.key(), media.video_url};
        store_->save_project(project);
        events_.publish(project_id, "stage_done", {{"job_id", job_id}, {"stage", "fetch"}});

        job_status(store_->update_job(job_id, JobStatus::running, std::string("align")));
        const auto subs = parse_subtitles(media.subtitles, media.format);
        LlmLineMatcher fallback(llm_);
        const auto result = build_timed_lyrics(lyrics.doc, subs, media.audio, *clients_.asr, config_.alignment, &fallback);
        json report = result.report;
        if (result.error) report["asr_error"] = {{"code", to_string(result.error->code())}, {"message", result.error->what()}};
        store_->save_timed_lyric(project_id, result.lyric, report);
        {
            std::lock_guard lock(snapshot_mu_);
            snapshots_.erase(project_id);
        }
        events_.publish(project_id, "stage_done", {{"job_id", job_id}, {"stage", "align"}, {"report", report}});
        job_status(store_->update_job(job_id, JobStatus::done));
    } catch (const Error& e) {
        fail_job(job_id, project_id, e);
    } catch (const std::exception& e) {
        fail_job(job_id, project_id, Error(ErrorCode::StoreError, e.what()));
    }
}

void Workbench::execute_preprocess(std::int64_t job_id, const std::string& project_id, std::optional<Stage> from_stage) {
    try {
        job_status(store_->update_job(job_id, JobStatus::running));
        const auto lyric = store_->load_timed_lyric(project_id);
        if (!lyric) throw Error(ErrorCode::NotReady, "lyrics for " + project_id + " are not aligned yet");
        auto project = store_->load_project(project_id);
        // A project left in preprocessing by a killed process resumes as failed.
        if (project.status == ProjectStatus::preprocessing) project.status = ProjectStatus::failed;
        {
            auto visible = project;
            visible.transition(ProjectStatus::preprocessing);
            store_->save_project(visible);
        }

        PipelineOptions options;
        options.from_stage = from_stage;
        options.batch_lines = config_.batch_lines;
        options.batch_concurrency = config_.batch_concurrency;
        options.on_stage_start = [&](Stage s) {
            job_status(store_->update_job(job_id, JobStatus::running, std::string(to_string(s))));
        };
        options.on_stage_done = [&](Stage s, bool reused) {
            events_.publish(project_id, "stage_done", {{"job_id", job_id}, {"stage", to_string(s)}, {"reused", reused}});
        };
        StoreArtifactStore artifacts(store_);
        const auto result = songsign::run_preprocess(project, lyric->lines, *llm_, artifacts, options);
        if (result.error) {
            store_->save_project(project);
            job_status(store_->update_job(job_id, JobStatus::failed, std::string(to_string(*result.failed_stage)),
                                          error_text(*result.error)));
            return;
        }
        store_->save_annotations(project_id, result.annotations);
        store_->save_project(project);
        job_status(store_->update_job(job_id, JobStatus::done));
    } catch (const Error& e) {
        fail_job(job_id, project_id, e);
    } catch (const std::exception& e) {
        fail_job(job_id, project_id, Error(ErrorCode::StoreError, e.what()));
    }
}

json Workbench::project_view(const std::string& project_id) {
    return {{"project", store_->load_project(project_id)}, {"jobs", store_->list_jobs(project_id)}};
}

std::shared_ptr<const TimedLyric> Workbench::lyric_snapshot(const std::string& project_id) {
    {
        std::lock_guard lock(snapshot_mu_);
        if (auto it = snapshots_.find(project_id); it != snapshots_.end()) return it->second;
    }
    store_->load_project(project_id);
    auto lyric = store_->load_timed_lyric(project_id);
    if (!lyric) throw Error(ErrorCode::NotReady, "lyrics for " + project_id + " are not aligned yet");
    auto snap = std::make_shared<const TimedLyric>(std::move(*lyric));
    std::lock_guard lock(snapshot_mu_);
    return snapshots_.emplace(project_id, snap).first->second;
}

json Workbench::lines_view(const std::string& project_id) {
    const auto project = store_->load_project(project_id);
    const auto lyric = lyric_snapshot(project_id);
    std::map<int, LineAnnotation> annotations;
    for (auto& a : store_->load_annotations(project_id)) annotations.emplace(a.line_index, std::move(a));
    const auto glosses = store_->latest_glosses(project_id);
    json lines = json::array();
    for (const auto& l : lyric->lines) {
        json row = l;
        const auto a = annotations.find(l.index);
        row["annotation"] = a == annotations.end() ? json(nullptr) : json(a->second);
        row["noteworthy"] = a != annotations.end() && a->second.challenge.kind != ChallengeKind::none;
        const auto g = glosses.find(l.index);
        row["gloss"] = g == glosses.end() ? json(nullptr) : json(g->second);
        lines.push_back(std::move(row));
    }
    return {{"project_id", project_id}, {"status", to_string(project.status)}, {"lines", lines}};
}

LineContext Workbench::line(const std::string& project_id, int line_index) {
    return backend_->line_context(project_id, line_index);
}

GlossLine Workbench::save_gloss(const std::string& project_id, int line_index, const std::string& raw,
                                std::int64_t expected_version) {
    line(project_id, line_index);
    return store_->append_gloss(project_id, line_index, raw, expected_version);
}

std::vector<std::string> Workbench::suggestions(const std::string& project_id, int line_index, const std::string& partial) {
    return suggest_inline(line(project_id, line_index).annotation, partial);
}

ChatThread Workbench::open_thread(const std::string& project_id, int line_index, bool proactive) {
    return chat_->open_thread(project_id, line_index, proactive);
}

TurnResult Workbench::post_message(const std::string& thread_id, const UserInput& input) {
    return chat_->handle_turn(thread_id, input);
}

json Workbench::thread_summaries(const std::string& project_id) {
    store_->load_project(project_id);
    json out = json::array();
    for (const auto& t : store_->list_threads(project_id)) {
        json last = nullptr;
        if (!t.messages.empty()) {
            const auto& m = t.messages.back();
            last = {{"role", to_string(m.role)}, {"text", m.text}};
        }
        out.push_back({{"id", t.id},
                       {"line_index", t.line_index},
                       {"opened_by", to_string(t.opened_by)},
                       {"message_count", t.messages.size()},
                       {"last_message", last}});
    }
    return out;
}

PlaybackState Workbench::playback(const std::string& project_id, Millis t_ms, PlaybackMode mode,
                                  std::optional<int> loop_line) {
    const auto lyric = lyric_snapshot(project_id);
    return resolve_playback(project_id, *lyric, t_ms, mode, loop_line);
}

AnalyticsReport Workbench::analytics(const std::string& project_id) {
    store_->load_project(project_id);
    std::map<int, std::vector<GlossVariant>> by_line;
    for (const auto& [index, g] : store_->latest_glosses(project_id)) by_line[index].push_back({"user", g.raw});
    for (const auto& a : store_->load_annotations(project_id)) {
        auto& v = by_line[a.line_index];
        v.push_back({"base", a.base_gloss});
        v.push_back({"shorter", a.alt_glosses.shorter});
        v.push_back({"base_alt", a.alt_glosses.base_alt});
        v.push_back({"longer", a.alt_glosses.longer});
    }
    std::vector<std::pair<int, std::vector<GlossVariant>>> lines(by_line.begin(), by_line.end());
    return analyze_lines(lines);
}

} // namespace songsign
