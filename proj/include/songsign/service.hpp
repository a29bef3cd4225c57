#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "songsign/alignment.hpp"
#include "songsign/analysis.hpp"
#include "songsign/chat.hpp"
#include "songsign/clients.hpp"
#include "songsign/llm.hpp"
#include "songsign/metrics.hpp"
#include "songsign/model.hpp"
#include "songsign/store.hpp"

namespace songsign {

// ---- Playback -------------------------------------------------------------

enum class PlaybackMode { global, line_loop };
std::string_view to_string(PlaybackMode m);
PlaybackMode playback_mode_from_string(std::string_view s);

struct PlaybackState {
    std::string project_id;
    Millis t_ms = 0;
    std::optional<int> active_line;
    std::optional<int> active_word; // set only with active_line
    PlaybackMode mode = PlaybackMode::global;
    std::optional<int> loop_line; // set iff mode is line_loop

    bool operator==(const PlaybackState&) const = default;
};

void to_json(nlohmann::json& j, const PlaybackState& s);

// Pure. Global mode: the last line whose span contains t (spans are half-open,
// so a shared boundary goes to the later line); the active word is the last
// one starting at or before t. Line-loop mode first wraps t into the loop
// line's span: ((t - start) mod length) + start.
// Throws InvalidArgument for a missing, out-of-range or unspanned loop line.
PlaybackState resolve_playback(const std::string& project_id, const TimedLyric& lyric, Millis t_ms,
                               PlaybackMode mode, std::optional<int> loop_line = std::nullopt);

// ---- Analytics ------------------------------------------------------------

struct GlossVariant {
    std::string label;
    std::string raw;
};

struct VariantMetrics {
    std::string label;
    std::string raw;
    GlossMetrics metrics;
};

struct LineAnalytics {
    int line_index = 0;
    std::vector<VariantMetrics> variants;
    SignStats sign_stats;
    std::optional<Rational> mean_overlap; // absent with fewer than two variants
};

// Throws UnbalancedBracket for a variant that does not parse and
// InvalidArgument for an empty variant list.
LineAnalytics analyze_line(int line_index, const std::vector<GlossVariant>& variants);

struct AnalyticsReport {
    std::vector<LineAnalytics> lines;
    // Mean of the per-line overlaps that exist.
    std::optional<Rational> mean_overlap;
};

AnalyticsReport analyze_lines(const std::vector<std::pair<int, std::vector<GlossVariant>>>& lines);

// Corpus file: {"lines": [{"line_index": n, "glosses": [{"label", "raw"}]}]}.
AnalyticsReport analyze_corpus(const nlohmann::json& corpus);

// Rationals are rendered as "p/q" plus a two-decimal percentage.
nlohmann::json to_json(const AnalyticsReport& r);

// ---- Events ---------------------------------------------------------------

struct Event {
    std::int64_t id = 0;
    std::string type; // job_status | stage_done
    std::string project_id;
    nlohmann::json data;
};

// Fan-out of job progress to per-project subscribers.
class EventBus {
public:
    class Subscription {
    public:
        // Next event, or nullopt after the timeout or once closed.
        std::optional<Event> next(std::chrono::milliseconds timeout);
        void close();
        bool closed();

    private:
        friend class EventBus;
        std::mutex mu_;
        std::condition_variable cv_;
        std::deque<Event> queue_;
        bool closed_ = false;
    };

    std::shared_ptr<Subscription> subscribe(const std::string& project_id);
    void unsubscribe(const std::string& project_id, const std::shared_ptr<Subscription>& sub);
    void publish(const std::string& project_id, const std::string& type, nlohmann::json data);
    // Closes every subscription (server shutdown).
    void close_all();

private:
    std::mutex mu_;
    std::int64_t next_id_ = 1;
    std::multimap<std::string, std::shared_ptr<Subscription>> subs_;
};

// ---- Jobs -----------------------------------------------------------------

// Runs submitted tasks on background threads, serially per project, so at
// most one job per project is ever running.
class JobManager {
public:
    JobManager() = default;
    ~JobManager();
    JobManager(const JobManager&) = delete;
    JobManager& operator=(const JobManager&) = delete;

    std::shared_future<void> submit(const std::string& project_id, std::function<void()> task);
    bool busy(const std::string& project_id);
    void wait_idle();

private:
    struct Lane {
        std::deque<std::packaged_task<void()>> queue;
        bool running = false;
    };
    void drain(const std::string& project_id);

    std::mutex mu_;
    std::condition_variable idle_cv_;
    std::map<std::string, Lane> lanes_;
    struct Worker {
        std::thread thread;
        std::shared_ptr<std::atomic<bool>> finished;
    };
    std::list<Worker> workers_; // finished ones are joined on the next submit
    int active_ = 0;
};

// ---- Store adapters -------------------------------------------------------

class StoreArtifactStore : public ArtifactStore {
public:
    explicit StoreArtifactStore(std::shared_ptr<Store> store) : store_(std::move(store)) {}
    std::optional<nlohmann::json> get_artifact(const std::string& project_id, Stage stage,
                                               const std::string& input_hash) override;
    void put_artifact(const std::string& project_id, Stage stage, const std::string& input_hash,
                      const nlohmann::json& artifact) override;

private:
    std::shared_ptr<Store> store_;
};

// Line context comes from the timed lyric, the saved annotations and the
// latest user gloss. NotReady until alignment has produced the lyric.
class StoreChatBackend : public ChatBackend {
public:
    explicit StoreChatBackend(std::shared_ptr<Store> store) : store_(std::move(store)) {}
    LineContext line_context(const std::string& project_id, int line_index) override;
    std::optional<ChatThread> find_thread(const std::string& thread_id) override;
    void create_thread(const ChatThread& thread) override;
    ChatMessage append_message(const std::string& thread_id, ChatMessage message) override;

private:
    std::shared_ptr<Store> store_;
};

// ---- Application layer ----------------------------------------------------

// Sorted *.json files of a mock-table directory (the default provider tables).
std::vector<std::string> mock_tables_in(const std::filesystem::path& dir);

struct CreateProjectRequest {
    std::string title;
    std::string artist;
    SignLanguage sign_language = SignLanguage::ASL;
    std::string nickname;
    Proficiency proficiency = Proficiency::moderate;
    std::optional<std::string> id; // derived from title and artist when absent

    // Throws InvalidArgument (details.field).
    void validate() const;
};

// Parses a request body; InvalidArgument names the offending field.
CreateProjectRequest parse_create_request(const nlohmann::json& body);

struct WorkbenchConfig {
    AlignmentConfig alignment;
    std::size_t batch_lines = kMaxBatchLines;
    int batch_concurrency = 2;
};

// Everything the REST service and the CLI do goes through here.
class Workbench {
public:
    Workbench(std::shared_ptr<Store> store, ClientSet clients, std::shared_ptr<LlmClient> llm,
              WorkbenchConfig config = {});
    ~Workbench();

    Store& store() { return *store_; }
    EventBus& events() { return events_; }
    ChatEngine& chat() { return *chat_; }

    // Saves a new project in status created. ids are unique slugs of
    // "<title>-<artist>", suffixed -2, -3, ... on collision.
    SongProject create_project(const CreateProjectRequest& req);

    // Jobs run on the project's lane. Each records its JobRecord, publishes
    // job_status / stage_done events and never throws out of the lane.
    JobRecord enqueue_alignment(const std::string& project_id);
    JobRecord enqueue_preprocess(const std::string& project_id, std::optional<Stage> from_stage = std::nullopt);
    // Alignment then preprocess; both records exist before either runs.
    std::vector<JobRecord> enqueue_pipeline(const std::string& project_id);
    // create_project + enqueue_pipeline.
    SongProject submit_project(const CreateProjectRequest& req);

    // Synchronous variants (CLI): enqueue and wait; returns the final record.
    JobRecord run_alignment(const std::string& project_id);
    JobRecord run_preprocess(const std::string& project_id, std::optional<Stage> from_stage = std::nullopt);

    bool busy(const std::string& project_id) { return jobs_.busy(project_id); }
    // True when the project has jobs and none is pending or running.
    bool jobs_settled(const std::string& project_id);
    void wait_idle() { jobs_.wait_idle(); }

    // {project, jobs}
    nlohmann::json project_view(const std::string& project_id);
    // Timed lines with annotation, noteworthy flag and latest user gloss.
    nlohmann::json lines_view(const std::string& project_id);

    GlossLine save_gloss(const std::string& project_id, int line_index, const std::string& raw,
                         std::int64_t expected_version);
    std::vector<std::string> suggestions(const std::string& project_id, int line_index, const std::string& partial);

    ChatThread open_thread(const std::string& project_id, int line_index, bool proactive);
    TurnResult post_message(const std::string& thread_id, const UserInput& input);
    // Condensed per-thread summary for the global view.
    nlohmann::json thread_summaries(const std::string& project_id);

    PlaybackState playback(const std::string& project_id, Millis t_ms, PlaybackMode mode,
                           std::optional<int> loop_line);

    // Variants per line: latest user gloss, base gloss and the three
    // alternatives. Lines with no variant are left out.
    AnalyticsReport analytics(const std::string& project_id);

private:
    std::shared_future<void> submit_job(const JobRecord& job, std::optional<Stage> from_stage);
    void execute_alignment(std::int64_t job_id, const std::string& project_id);
    void execute_preprocess(std::int64_t job_id, const std::string& project_id, std::optional<Stage> from_stage);
    void job_status(const JobRecord& job);
    void fail_job(std::int64_t job_id, const std::string& project_id, const Error& e);
    std::shared_ptr<const TimedLyric> lyric_snapshot(const std::string& project_id);
    LineContext line(const std::string& project_id, int line_index);

    std::shared_ptr<Store> store_;
    ClientSet clients_;
    std::shared_ptr<LlmClient> llm_;
    WorkbenchConfig config_;
    std::shared_ptr<StoreChatBackend> backend_;
    std::unique_ptr<ChatEngine> chat_;
    EventBus events_;
    std::mutex create_mu_;
    std::mutex snapshot_mu_;
    std::map<std::string, std::shared_ptr<const TimedLyric>> snapshots_;
    JobManager jobs_; // last: joined first on destruction
};

} // namespace songsign
