#include "songsign/store.hpp"

#include <sqlite3.h>

#include <atomic>
#include <chrono>

#include "songsign/gloss.hpp"
#include "songsign/json_io.hpp"

namespace songsign {

using nlohmann::json;

namespace {

// Forward-only; entry i upgrades the schema from version i to i + 1.
const char* const kMigrations[] = {
    R"SQL(
CREATE TABLE projects (
  id TEXT PRIMARY KEY,
  status TEXT NOT NULL,
  doc TEXT NOT NULL,
  created_at TEXT NOT NULL,
  updated_at TEXT NOT NULL
);
CREATE TABLE timed_lyrics (
  project_id TEXT PRIMARY KEY REFERENCES projects(id),
  doc TEXT NOT NULL,
  report TEXT NOT NULL
);
CREATE TABLE gloss_versions (
  project_id TEXT NOT NULL REFERENCES projects(id),
  line_index INTEGER NOT NULL,
  version INTEGER NOT NULL,
  raw TEXT NOT NULL,
  authored_at TEXT NOT NULL,
  PRIMARY KEY (project_id, line_index, version)
);
CREATE TABLE annotations (
  project_id TEXT NOT NULL REFERENCES projects(id),
  line_index INTEGER NOT NULL,
  doc TEXT NOT NULL,
  PRIMARY KEY (project_id, line_index)
);
CREATE TABLE artifacts (
  project_id TEXT NOT NULL,
  stage TEXT NOT NULL,
  input_hash TEXT NOT NULL,
  doc TEXT NOT NULL,
  created_seq INTEGER NOT NULL,
  PRIMARY KEY (project_id, stage, input_hash)
);
CREATE TABLE threads (
  id TEXT PRIMARY KEY,
  project_id TEXT NOT NULL REFERENCES projects(id),
  line_index INTEGER NOT NULL,
  opened_by TEXT NOT NULL,
  UNIQUE (project_id, line_index)
);
CREATE TABLE messages (
  thread_id TEXT NOT NULL REFERENCES threads(id),
  seq INTEGER NOT NULL,
  role TEXT NOT NULL,
  text TEXT NOT NULL,
  intent TEXT,
  origin TEXT NOT NULL,
  flagged INTEGER NOT NULL,
  PRIMARY KEY (thread_id, seq)
);
CREATE TABLE jobs (
  id INTEGER PRIMARY KEY AUTOINCREMENT,
  project_id TEXT NOT NULL REFERENCES projects(id),
  kind TEXT NOT NULL,
  status TEXT NOT NULL,
  stage TEXT,
  error TEXT,
  created_at TEXT NOT NULL,
  updated_at TEXT NOT NULL
);
)SQL",
    R"SQL(
CREATE INDEX jobs_by_project ON jobs(project_id, id);
CREATE TABLE idempotency (
  key TEXT PRIMARY KEY,
  status INTEGER NOT NULL,
  body TEXT NOT NULL,
  created_at TEXT NOT NULL
);
)SQL",
};
static_assert(std::size(kMigrations) == kSchemaVersion);

[[noreturn]] void fail(sqlite3* db, const std::string& what) {
    throw Error(ErrorCode::StoreError, what + ": " + (db ? sqlite3_errmsg(db) : "no connection"));
}

class Stmt {
public:
    Stmt(sqlite3* db, const char* sql) : db_(db) {
        if (sqlite3_prepare_v2(db, sql, -1, &st_, nullptr) != SQLITE_OK) fail(db, std::string("prepare ") + sql);
    }
    ~Stmt() { sqlite3_finalize(st_); }
    Stmt(const Stmt&) = delete;
    Stmt& operator=(const Stmt&) = delete;

    Stmt& bind(int i, const std::string& v) {
        check(sqlite3_bind_text(st_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT));
        return *this;
    }
    Stmt& bind(int i, const char* v) { return bind(i, std::string(v)); }
    Stmt& bind(int i, std::int64_t v) {
        check(sqlite3_bind_int64(st_, i, v));
        return *this;
    }
    Stmt& bind(int i, int v) { return bind(i, static_cast<std::int64_t>(v)); }
    Stmt& bind(int i, const std::optional<std::string>& v) {
        if (!v) {
            check(sqlite3_bind_null(st_, i));
            return *this;
        }
        return bind(i, *v);
    }

    // True while a row is available.
    bool step() {
        const int rc = sqlite3_step(st_);
        if (rc == SQLITE_ROW) return true;
        if (rc == SQLITE_DONE) return false;
        if (rc == SQLITE_CONSTRAINT) throw Error(ErrorCode::StoreError, std::string("constraint: ") + sqlite3_errmsg(db_), {{"constraint", true}});
        fail(db_, "step");
    }
    void run() {
        while (step()) {
        }
    }

    std::string text(int c) const {
        const auto* p = sqlite3_column_text(st_, c);
        return p ? std::string(reinterpret_cast<const char*>(p), static_cast<std::size_t>(sqlite3_column_bytes(st_, c))) : "";
    }
    std::optional<std::string> opt_text(int c) const {
        if (sqlite3_column_type(st_, c) == SQLITE_NULL) return std::nullopt;
        return text(c);
    }
    std::int64_t int64(int c) const { return sqlite3_column_int64(st_, c); }

private:
    void check(int rc) {
        if (rc != SQLITE_OK) fail(db_, "bind");
    }
    sqlite3* db_;
    sqlite3_stmt* st_ = nullptr;
};

bool is_constraint(const Error& e) { return e.code() == ErrorCode::StoreError && e.details().value("constraint", false); }

std::atomic<int> g_memory_counter{0};

} // namespace

class Store::Conn {
public:
    explicit Conn(const std::string& path) {
        const int rc = sqlite3_open_v2(path.c_str(), &db_,
                                       SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX, nullptr);
        if (rc != SQLITE_OK) {
            const std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
            sqlite3_close(db_);
            throw Error(ErrorCode::StoreError, "cannot open store " + path + ": " + msg);
        }
        sqlite3_busy_timeout(db_, 5000);
        exec("PRAGMA foreign_keys = ON");
    }
    ~Conn() { sqlite3_close(db_); }

    void exec(const char* sql) {
        char* err = nullptr;
        if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
            const std::string msg = err ? err : "unknown";
            sqlite3_free(err);
            throw Error(ErrorCode::StoreError, msg);
        }
    }
    Stmt prepare(const char* sql) { return Stmt(db_, sql); }

    // Runs fn inside BEGIN IMMEDIATE ... COMMIT; rolls back on any exception.
    template <typename Fn>
    auto transaction(Fn fn) -> decltype(fn()) {
        exec("BEGIN IMMEDIATE");
        try {
            if constexpr (std::is_void_v<decltype(fn())>) {
                fn();
                exec("COMMIT");
            } else {
                auto r = fn();
                exec("COMMIT");
                return r;
            }
        } catch (...) {
            sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
            throw;
        }
    }

private:
    sqlite3* db_ = nullptr;
};

class Store::ReadLease {
public:
    ReadLease(Store& s, std::unique_ptr<Conn> c) : store_(s), conn_(std::move(c)) {}
    ~ReadLease() {
        if (!conn_) return;
        std::lock_guard lock(store_.pool_mu_);
        store_.idle_readers_.push_back(std::move(conn_));
    }
    ReadLease(ReadLease&&) = default;
    Conn* operator->() { return conn_.get(); }
    Conn& operator*() { return *conn_; }

private:
    Store& store_;
    std::unique_ptr<Conn> conn_;
};

namespace {

std::filesystem::path temp_db_path() {
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    return std::filesystem::temp_directory_path() /
           ("songsign-" + std::to_string(stamp) + "-" + std::to_string(g_memory_counter++) + ".db");
}

bool g_is_temp(const std::string& requested) { return requested == ":memory:"; }

} // namespace

Store::Store(const std::string& path, Clock clock) : clock_(std::move(clock)) {
    if (g_is_temp(path)) {
        uri_ = temp_db_path().string();
        temp_ = true;
    } else {
        uri_ = path;
        if (const auto parent = std::filesystem::path(path).parent_path(); !parent.empty()) {
            std::filesystem::create_directories(parent);
        }
    }
    writer_ = open_connection();
    writer_->exec("PRAGMA journal_mode = WAL");
    writer_->exec("PRAGMA synchronous = NORMAL");
    migrate();
}

Store::~Store() {
    idle_readers_.clear();
    writer_.reset();
    if (temp_) {
        std::error_code ec;
        for (const char* suffix : {"", "-wal", "-shm"}) std::filesystem::remove(uri_ + suffix, ec);
    }
}

std::unique_ptr<Store> Store::open_from_env(Clock clock) {
    return std::make_unique<Store>(env_or("ELMI_DB", "songsign.db"), std::move(clock));
}

std::unique_ptr<Store::Conn> Store::open_connection() { return std::make_unique<Conn>(uri_); }

Store::ReadLease Store::reader() {
    {
        std::lock_guard lock(pool_mu_);
        if (!idle_readers_.empty()) {
            auto c = std::move(idle_readers_.back());
            idle_readers_.pop_back();
            return ReadLease(*this, std::move(c));
        }
    }
    return ReadLease(*this, open_connection());
}

std::string Store::now() const { return rfc3339(clock_()); }

void Store::migrate() {
    std::lock_guard lock(write_mu_);
    writer_->exec("CREATE TABLE IF NOT EXISTS schema_migrations (version INTEGER PRIMARY KEY, applied_at TEXT NOT NULL)");
    int current = 0;
    {
        auto st = writer_->prepare("SELECT COALESCE(MAX(version), 0) FROM schema_migrations");
        if (st.step()) current = static_cast<int>(st.int64(0));
    }
    if (current > kSchemaVersion) {
        throw Error(ErrorCode::StoreError, "store schema version " + std::to_string(current) +
                                               " is newer than this build (" + std::to_string(kSchemaVersion) + ")");
    }
    for (int v = current; v < kSchemaVersion; ++v) {
        writer_->transaction([&] {
            writer_->exec(kMigrations[v]);
            writer_->prepare("INSERT INTO schema_migrations(version, applied_at) VALUES (?, ?)").bind(1, v + 1).bind(2, now()).run();
        });
    }
}

int Store::schema_version() {
    auto r = reader();
    auto st = r->prepare("SELECT COALESCE(MAX(version), 0) FROM schema_migrations");
    st.step();
    return static_cast<int>(st.int64(0));
}

namespace {

void write_project(Stmt&& st, const SongProject& p, const std::string& now) {
    st.bind(1, p.id).bind(2, std::string(to_string(p.status))).bind(3, json(p).dump()).bind(4, now).bind(5, now).run();
}

constexpr const char* kUpsertProject =
    "INSERT INTO projects(id, status, doc, created_at, updated_at) VALUES (?, ?, ?, ?, ?) "
    "ON CONFLICT(id) DO UPDATE SET status = excluded.status, doc = excluded.doc, updated_at = excluded.updated_at";

} // namespace

void Store::save_project(const SongProject& p) {
    if (p.id.empty()) throw Error(ErrorCode::InvalidArgument, "project id must not be empty");
    std::lock_guard lock(write_mu_);
    writer_->transaction([&] { write_project(writer_->prepare(kUpsertProject), p, now()); });
}

SongProject Store::load_project(const std::string& id) {
    auto r = reader();
    auto st = r->prepare("SELECT doc FROM projects WHERE id = ?");
    st.bind(1, id);
    if (!st.step()) throw Error(ErrorCode::NotFound, "no project " + id, {{"project_id", id}});
    return json::parse(st.text(0)).get<SongProject>();
}

std::vector<SongProject> Store::list_projects() {
    auto r = reader();
    auto st = r->prepare("SELECT doc FROM projects ORDER BY created_at, id");
    std::vector<SongProject> out;
    while (st.step()) out.push_back(json::parse(st.text(0)).get<SongProject>());
    return out;
}

SongProject Store::transition_project(const std::string& id, ProjectStatus to) {
    std::lock_guard lock(write_mu_);
    return writer_->transaction([&] {
        auto st = writer_->prepare("SELECT doc FROM projects WHERE id = ?");
        st.bind(1, id);
        if (!st.step()) throw Error(ErrorCode::NotFound, "no project " + id, {{"project_id", id}});
        auto p = json::parse(st.text(0)).get<SongProject>();
        p.transition(to);
        write_project(writer_->prepare(kUpsertProject), p, now());
        return p;
    });
}

void Store::save_timed_lyric(const std::string& project_id, const TimedLyric& lyric, const json& report) {
    std::lock_guard lock(write_mu_);
    writer_->transaction([&] {
        writer_
            ->prepare("INSERT INTO timed_lyrics(project_id, doc, report) VALUES (?, ?, ?) "
                      "ON CONFLICT(project_id) DO UPDATE SET doc = excluded.doc, report = excluded.report")
            .bind(1, project_id)
            .bind(2, json(lyric).dump())
            .bind(3, report.dump())
            .run();
    });
}

std::optional<TimedLyric> Store::load_timed_lyric(const std::string& project_id) {
    auto r = reader();
    auto st = r->prepare("SELECT doc FROM timed_lyrics WHERE project_id = ?");
    st.bind(1, project_id);
    if (!st.step()) return std::nullopt;
    return json::parse(st.text(0)).get<TimedLyric>();
}

std::optional<json> Store::load_alignment_report(const std::string& project_id) {
    auto r = reader();
    auto st = r->prepare("SELECT report FROM timed_lyrics WHERE project_id = ?");
    st.bind(1, project_id);
    if (!st.step()) return std::nullopt;
    return json::parse(st.text(0));
}

namespace {

GlossLine gloss_from_row(const Stmt& st) {
    GlossLine g;
    g.line_index = static_cast<int>(st.int64(0));
    g.version = st.int64(1);
    g.raw = st.text(2);
    g.authored_at = st.text(3);
    g.tokens = tokenize_gloss(g.raw);
    return g;
}

} // namespace

GlossLine Store::append_gloss(const std::string& project_id, int line_index, const std::string& raw,
                              std::int64_t expected_version) {
    GlossLine g;
    g.line_index = line_index;
    g.tokens = tokenize_gloss(raw);
    g.raw = raw;
    std::lock_guard lock(write_mu_);
    return writer_->transaction([&] {
        {
            auto p = writer_->prepare("SELECT 1 FROM projects WHERE id = ?");
            p.bind(1, project_id);
            if (!p.step()) throw Error(ErrorCode::NotFound, "no project " + project_id, {{"project_id", project_id}});
        }
        auto st = writer_->prepare(
            "SELECT COALESCE(MAX(version), 0) FROM gloss_versions WHERE project_id = ? AND line_index = ?");
        st.bind(1, project_id).bind(2, line_index);
        st.step();
        const auto current = st.int64(0);
        if (current != expected_version) {
            throw Error(ErrorCode::ConflictingVersion,
                        "line " + std::to_string(line_index) + " is at version " + std::to_string(current) +
                            ", not " + std::to_string(expected_version),
                        {{"current_version", current}, {"expected_version", expected_version}, {"line_index", line_index}});
        }
        g.version = current + 1;
        g.authored_at = now();
        writer_
            ->prepare("INSERT INTO gloss_versions(project_id, line_index, version, raw, authored_at) VALUES (?, ?, ?, ?, ?)")
            .bind(1, project_id)
            .bind(2, line_index)
            .bind(3, g.version)
            .bind(4, g.raw)
            .bind(5, g.authored_at)
            .run();
        return g;
    });
}

std::vector<GlossLine> Store::gloss_history(const std::string& project_id, int line_index) {
    auto r = reader();
    auto st = r->prepare("SELECT line_index, version, raw, authored_at FROM gloss_versions "
                         "WHERE project_id = ? AND line_index = ? ORDER BY version");
    st.bind(1, project_id).bind(2, line_index);
    std::vector<GlossLine> out;
    while (st.step()) out.push_back(gloss_from_row(st));
    return out;
}

std::map<int, GlossLine> Store::latest_glosses(const std::string& project_id) {
    auto r = reader();
    auto st = r->prepare("SELECT line_index, version, raw, authored_at FROM gloss_versions g WHERE project_id = ? "
                         "AND version = (SELECT MAX(version) FROM gloss_versions WHERE project_id = g.project_id "
                         "AND line_index = g.line_index) ORDER BY line_index");
    st.bind(1, project_id);
    std::map<int, GlossLine> out;
    while (st.step()) {
        auto g = gloss_from_row(st);
        out.emplace(g.line_index, std::move(g));
    }
    return out;
}

void Store::save_annotations(const std::string& project_id, const std::vector<LineAnnotation>& annotations) {
    std::lock_guard lock(write_mu_);
    writer_->transaction([&] {
        writer_->prepare("DELETE FROM annotations WHERE project_id = ?").bind(1, project_id).run();
        for (const auto& a : annotations) {
            writer_->prepare("INSERT INTO annotations(project_id, line_index, doc) VALUES (?, ?, ?)")
                .bind(1, project_id)
                .bind(2, a.line_index)
                .bind(3, json(a).dump())
                .run();
        }
    });
}

std::vector<LineAnnotation> Store::load_annotations(const std::string& project_id) {
    auto r = reader();
    auto st = r->prepare("SELECT doc FROM annotations WHERE project_id = ? ORDER BY line_index");
    st.bind(1, project_id);
    std::vector<LineAnnotation> out;
    while (st.step()) out.push_back(json::parse(st.text(0)).get<LineAnnotation>());
    return out;
}

void Store::put_artifact(const std::string& project_id, const std::string& stage, const std::string& input_hash,
                         const json& artifact) {
    std::lock_guard lock(write_mu_);
    writer_->transaction([&] {
        writer_
            ->prepare("INSERT INTO artifacts(project_id, stage, input_hash, doc, created_seq) VALUES (?, ?, ?, ?, "
                      "(SELECT COALESCE(MAX(created_seq), 0) + 1 FROM artifacts)) "
                      "ON CONFLICT(project_id, stage, input_hash) DO UPDATE SET doc = excluded.doc, "
                      "created_seq = excluded.created_seq")
            .bind(1, project_id)
            .bind(2, stage)
            .bind(3, input_hash)
            .bind(4, artifact.dump())
            .run();
    });
}

std::optional<json> Store::get_artifact(const std::string& project_id, const std::string& stage,
                                        const std::string& input_hash) {
    auto r = reader();
    auto st = r->prepare("SELECT doc FROM artifacts WHERE project_id = ? AND stage = ? AND input_hash = ?");
    st.bind(1, project_id).bind(2, stage).bind(3, input_hash);
    if (!st.step()) return std::nullopt;
    return json::parse(st.text(0));
}

std::optional<json> Store::latest_artifact(const std::string& project_id, const std::string& stage) {
    auto r = reader();
    auto st = r->prepare(
        "SELECT doc FROM artifacts WHERE project_id = ? AND stage = ? ORDER BY created_seq DESC LIMIT 1");
    st.bind(1, project_id).bind(2, stage);
    if (!st.step()) return std::nullopt;
    return json::parse(st.text(0));
}

void Store::create_thread(const ChatThread& thread) {
    std::lock_guard lock(write_mu_);
    try {
        writer_->transaction([&] {
            writer_->prepare("INSERT INTO threads(id, project_id, line_index, opened_by) VALUES (?, ?, ?, ?)")
                .bind(1, thread.id)
                .bind(2, thread.project_id)
                .bind(3, thread.line_index)
                .bind(4, std::string(to_string(thread.opened_by)))
                .run();
            std::int64_t seq = 0;
            for (const auto& m : thread.messages) {
                writer_
                    ->prepare("INSERT INTO messages(thread_id, seq, role, text, intent, origin, flagged) "
                              "VALUES (?, ?, ?, ?, ?, ?, ?)")
                    .bind(1, thread.id)
                    .bind(2, ++seq)
                    .bind(3, std::string(to_string(m.role)))
                    .bind(4, m.text)
                    .bind(5, m.intent ? std::optional<std::string>(std::string(to_string(*m.intent))) : std::nullopt)
                    .bind(6, std::string(to_string(m.origin)))
                    .bind(7, m.flagged ? 1 : 0)
                    .run();
            }
        });
    } catch (const Error& e) {
        if (is_constraint(e)) {
            throw Error(ErrorCode::ThreadExists, "thread already exists for line " + std::to_string(thread.line_index),
                        {{"thread_id", thread.id}});
        }
        throw;
    }
}

namespace {

ChatMessage message_from_row(const Stmt& st) {
    ChatMessage m;
    m.seq = st.int64(0);
    m.role = role_from_string(st.text(1));
    m.text = st.text(2);
    if (auto i = st.opt_text(3)) m.intent = intent_from_string(*i);
    m.origin = origin_from_string(st.text(4));
    m.flagged = st.int64(5) != 0;
    return m;
}

} // namespace

std::optional<ChatThread> Store::load_thread(const std::string& thread_id) {
    auto r = reader();
    auto st = r->prepare("SELECT id, project_id, line_index, opened_by FROM threads WHERE id = ?");
    st.bind(1, thread_id);
    if (!st.step()) return std::nullopt;
    ChatThread t;
    t.id = st.text(0);
    t.project_id = st.text(1);
    t.line_index = static_cast<int>(st.int64(2));
    t.opened_by = opener_from_string(st.text(3));
    auto ms = r->prepare("SELECT seq, role, text, intent, origin, flagged FROM messages WHERE thread_id = ? ORDER BY seq");
    ms.bind(1, thread_id);
    while (ms.step()) t.messages.push_back(message_from_row(ms));
    return t;
}

std::vector<ChatThread> Store::list_threads(const std::string& project_id) {
    std::vector<std::string> ids;
    {
        auto r = reader();
        auto st = r->prepare("SELECT id FROM threads WHERE project_id = ? ORDER BY line_index");
        st.bind(1, project_id);
        while (st.step()) ids.push_back(st.text(0));
    }
    std::vector<ChatThread> out;
    for (const auto& id : ids) {
        if (auto t = load_thread(id)) out.push_back(std::move(*t));
    }
    return out;
}

ChatMessage Store::append_message(const std::string& thread_id, ChatMessage message) {
    std::lock_guard lock(write_mu_);
    return writer_->transaction([&] {
        auto st = writer_->prepare("SELECT (SELECT COUNT(*) FROM threads WHERE id = ?1), "
                                   "(SELECT COALESCE(MAX(seq), 0) FROM messages WHERE thread_id = ?1)");
        st.bind(1, thread_id);
        st.step();
        if (st.int64(0) == 0) throw Error(ErrorCode::NotFound, "no thread " + thread_id, {{"thread_id", thread_id}});
        message.seq = st.int64(1) + 1;
        writer_
            ->prepare("INSERT INTO messages(thread_id, seq, role, text, intent, origin, flagged) VALUES (?, ?, ?, ?, ?, ?, ?)")
            .bind(1, thread_id)
            .bind(2, message.seq)
            .bind(3, std::string(to_string(message.role)))
            .bind(4, message.text)
            .bind(5, message.intent ? std::optional<std::string>(std::string(to_string(*message.intent))) : std::nullopt)
            .bind(6, std::string(to_string(message.origin)))
            .bind(7, message.flagged ? 1 : 0)
            .run();
        return message;
    });
}

namespace {

constexpr const char* kJobColumns = "id, project_id, kind, status, stage, error, created_at, updated_at";

JobRecord job_from_row(const Stmt& st) {
    JobRecord j;
    j.id = st.int64(0);
    j.project_id = st.text(1);
    j.kind = job_kind_from_string(st.text(2));
    j.status = job_status_from_string(st.text(3));
    j.stage = st.opt_text(4);
    j.error = st.opt_text(5);
    j.created_at = st.text(6);
    j.updated_at = st.text(7);
    return j;
}

} // namespace

JobRecord Store::create_job(const std::string& project_id, JobKind kind) {
    std::lock_guard lock(write_mu_);
    const auto ts = now();
    const auto id = writer_->transaction([&] {
        writer_
            ->prepare("INSERT INTO jobs(project_id, kind, status, created_at, updated_at) VALUES (?, ?, 'pending', ?, ?)")
            .bind(1, project_id)
            .bind(2, std::string(to_string(kind)))
            .bind(3, ts)
            .bind(4, ts)
            .run();
        auto st = writer_->prepare("SELECT last_insert_rowid()");
        st.step();
        return st.int64(0);
    });
    JobRecord j;
    j.id = id;
    j.project_id = project_id;
    j.kind = kind;
    j.created_at = j.updated_at = ts;
    return j;
}

JobRecord Store::update_job(std::int64_t job_id, JobStatus status, std::optional<std::string> stage,
                            std::optional<std::string> error) {
    std::lock_guard lock(write_mu_);
    return writer_->transaction([&] {
        auto st = writer_->prepare((std::string("SELECT ") + kJobColumns + " FROM jobs WHERE id = ?").c_str());
        st.bind(1, job_id);
        if (!st.step()) throw Error(ErrorCode::NotFound, "no job " + std::to_string(job_id));
        auto j = job_from_row(st);
        if (j.status != status && !is_valid_transition(j.status, status)) {
            throw Error(ErrorCode::InvalidTransition,
                        "job " + std::to_string(job_id) + " cannot move from " + std::string(to_string(j.status)) +
                            " to " + std::string(to_string(status)));
        }
        j.status = status;
        if (stage) j.stage = stage;
        if (error) j.error = error;
        j.updated_at = now();
        writer_->prepare("UPDATE jobs SET status = ?, stage = ?, error = ?, updated_at = ? WHERE id = ?")
            .bind(1, std::string(to_string(j.status)))
            .bind(2, j.stage)
            .bind(3, j.error)
            .bind(4, j.updated_at)
            .bind(5, job_id)
            .run();
        return j;
    });
}

JobRecord Store::load_job(std::int64_t job_id) {
    auto r = reader();
    auto st = r->prepare((std::string("SELECT ") + kJobColumns + " FROM jobs WHERE id = ?").c_str());
    st.bind(1, job_id);
    if (!st.step()) throw Error(ErrorCode::NotFound, "no job " + std::to_string(job_id));
    return job_from_row(st);
}

std::vector<JobRecord> Store::list_jobs(const std::string& project_id) {
    auto r = reader();
    auto st = r->prepare((std::string("SELECT ") + kJobColumns + " FROM jobs WHERE project_id = ? ORDER BY id").c_str());
    st.bind(1, project_id);
    std::vector<JobRecord> out;
    while (st.step()) out.push_back(job_from_row(st));
    return out;
}

std::optional<StoredResponse> Store::find_response(const std::string& key) {
    auto r = reader();
    auto st = r->prepare("SELECT status, body FROM idempotency WHERE key = ?");
    st.bind(1, key);
    if (!st.step()) return std::nullopt;
    return StoredResponse{static_cast<int>(st.int64(0)), st.text(1)};
}

void Store::save_response(const std::string& key, const StoredResponse& response) {
    std::lock_guard lock(write_mu_);
    writer_->transaction([&] {
        writer_->prepare("INSERT OR IGNORE INTO idempotency(key, status, body, created_at) VALUES (?, ?, ?, ?)")
            .bind(1, key)
            .bind(2, response.status)
            .bind(3, response.body)
            .bind(4, now())
            .run();
    });
}

json Store::export_project(const std::string& project_id) {
    json out;
    out["project"] = load_project(project_id);
    const auto lyric = load_timed_lyric(project_id);
    out["timed_lyric"] = lyric ? json(*lyric) : json(nullptr);
    const auto report = load_alignment_report(project_id);
    out["alignment_report"] = report ? *report : json(nullptr);
    json glosses = json::array();
    std::vector<int> lines;
    {
        auto r = reader();
        auto st = r->prepare("SELECT DISTINCT line_index FROM gloss_versions WHERE project_id = ? ORDER BY line_index");
        st.bind(1, project_id);
        while (st.step()) lines.push_back(static_cast<int>(st.int64(0)));
    }
    for (int line : lines) glosses.push_back({{"line_index", line}, {"versions", gloss_history(project_id, line)}});
    out["glosses"] = glosses;
    out["annotations"] = load_annotations(project_id);
    out["threads"] = list_threads(project_id);
    out["jobs"] = list_jobs(project_id);
    return out;
}

json Store::export_bundle() {
    json projects = json::array();
    for (const auto& p : list_projects()) projects.push_back(export_project(p.id));
    return {{"format", "songsign-export"}, {"schema_version", schema_version()}, {"projects", projects}};
}

} // namespace songsign
