#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "songsign/error.hpp"
#include "songsign/model.hpp"
#include "songsign/util.hpp"

struct sqlite3;

namespace songsign {

// Highest migration this build knows about.
constexpr int kSchemaVersion = 2;

struct StoredResponse {
    int status = 0;
    std::string body;
};

// Embedded single-file store. One writer connection behind a mutex (each
// write is one transaction); readers draw from a small connection pool and
// run concurrently under WAL. All failures surface as Error: NotFound,
// ConflictingVersion, UnbalancedBracket, InvalidTransition, StoreError.
class Store {
public:
    // ":memory:" gives a private temporary database file removed on destruction.
    explicit Store(const std::string& path, Clock clock = system_clock());
    ~Store();
    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;

    // ELMI_DB, default "songsign.db".
    static std::unique_ptr<Store> open_from_env(Clock clock = system_clock());

    int schema_version();

    // Projects. save_project inserts or replaces.
    void save_project(const SongProject& p);
    SongProject load_project(const std::string& id);
    std::vector<SongProject> list_projects();
    // Loads, applies SongProject::transition, saves; one transaction.
    SongProject transition_project(const std::string& id, ProjectStatus to);

    void save_timed_lyric(const std::string& project_id, const TimedLyric& lyric, const nlohmann::json& report);
    std::optional<TimedLyric> load_timed_lyric(const std::string& project_id);
    std::optional<nlohmann::json> load_alignment_report(const std::string& project_id);

    // Parses first (UnbalancedBracket leaves the store untouched), then
    // appends version expected_version + 1. expected_version is 0 for a line
    // without glosses. Throws ConflictingVersion (details.current_version).
    GlossLine append_gloss(const std::string& project_id, int line_index, const std::string& raw,
                           std::int64_t expected_version);
    std::vector<GlossLine> gloss_history(const std::string& project_id, int line_index);
    // Latest version per line.
    std::map<int, GlossLine> latest_glosses(const std::string& project_id);

    void save_annotations(const std::string& project_id, const std::vector<LineAnnotation>& annotations);
    std::vector<LineAnnotation> load_annotations(const std::string& project_id);

    void put_artifact(const std::string& project_id, const std::string& stage, const std::string& input_hash,
                      const nlohmann::json& artifact);
    std::optional<nlohmann::json> get_artifact(const std::string& project_id, const std::string& stage,
                                               const std::string& input_hash);
    // Most recent artifact of a stage regardless of hash.
    std::optional<nlohmann::json> latest_artifact(const std::string& project_id, const std::string& stage);

    // Threads. create_thread throws ThreadExists on a duplicate id or line.
    void create_thread(const ChatThread& thread);
    std::optional<ChatThread> load_thread(const std::string& thread_id);
    std::vector<ChatThread> list_threads(const std::string& project_id);
    // Assigns the next dense sequence number.
    ChatMessage append_message(const std::string& thread_id, ChatMessage message);

    // Jobs. update_job enforces pending -> running -> {done, failed}.
    JobRecord create_job(const std::string& project_id, JobKind kind);
    JobRecord update_job(std::int64_t job_id, JobStatus status, std::optional<std::string> stage = std::nullopt,
                         std::optional<std::string> error = std::nullopt);
    JobRecord load_job(std::int64_t job_id);
    std::vector<JobRecord> list_jobs(const std::string& project_id);

    // Idempotency-key cache for mutating requests.
    std::optional<StoredResponse> find_response(const std::string& key);
    void save_response(const std::string& key, const StoredResponse& response);

    // Every aggregate of one project / of the whole store, in the documented
    // bundle format (docs/export-formats.md).
    nlohmann::json export_project(const std::string& project_id);
    nlohmann::json export_bundle();

private:
    class Conn;
    class ReadLease;
    friend class ReadLease;

    std::unique_ptr<Conn> open_connection();
    void migrate();
    ReadLease reader();
    std::string now() const;

    std::string uri_;
    Clock clock_;
    std::mutex write_mu_;
    std::unique_ptr<Conn> writer_;
    std::mutex pool_mu_;
    std::vector<std::unique_ptr<Conn>> idle_readers_;
    bool temp_ = false;
};

} // namespace songsign
