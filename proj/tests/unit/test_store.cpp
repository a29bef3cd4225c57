#include <doctest.h>

#include <atomic>
#include <thread>

#include "songsign/json_io.hpp"
#include "songsign/store.hpp"
#include "support/pipeline_fixture.hpp"

using namespace songsign;
using namespace songsign::testing;
using nlohmann::json;

namespace {

Clock fixed_clock() {
    return [] { return std::chrono::system_clock::time_point(std::chrono::seconds(1718100000)); };
}

std::filesystem::path scratch_db(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("songsign-test-" + name + ".db");
    for (const char* suffix : {"", "-wal", "-shm"}) std::filesystem::remove(p.string() + suffix);
    return p;
}

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::StoreError;
}

ChatThread sample_thread(const std::string& project) {
    ChatThread t;
    t.id = project + "-L2";
    t.project_id = project;
    t.line_index = 2;
    t.opened_by = ThreadOpener::proactive;
    t.messages.push_back({0, Role::user, "I opened this line. Please start the discussion.", std::nullopt,
                          MessageOrigin::proactive, false});
    t.messages.push_back({0, Role::assistant, "Shall we look at the imagery?", Intent::Meaning, MessageOrigin::reply, true});
    return t;
}

} // namespace

TEST_CASE("fresh store applies every migration") {
    Store s(":memory:");
    CHECK(s.schema_version() == kSchemaVersion);
}

TEST_CASE("reopening a file store keeps data and does not re-run migrations") {
    const auto path = scratch_db("reopen");
    {
        Store s(path.string(), fixed_clock());
        s.save_project(fixture_project("p1", "Butter", "BTS"));
    }
    Store again(path.string(), fixed_clock());
    CHECK(again.schema_version() == kSchemaVersion);
    CHECK(again.load_project("p1").title == "Butter");
}

TEST_CASE("project round trip and listing") {
    Store s(":memory:", fixed_clock());
    auto p = fixture_project("p1", "Butter", "BTS");
    p.media.video_url = "https://video.example/butter";
    s.save_project(p);
    s.save_project(fixture_project("p2", "Dynamite", "BTS"));
    CHECK(s.load_project("p1") == p);
    const auto all = s.list_projects();
    REQUIRE(all.size() == 2);
    CHECK(all[0].id == "p1");
    CHECK(code_of([&] { s.load_project("nope"); }) == ErrorCode::NotFound);
}

TEST_CASE("project transitions are checked inside the store") {
    Store s(":memory:");
    s.save_project(fixture_project("p1", "Butter", "BTS"));
    CHECK(s.transition_project("p1", ProjectStatus::preprocessing).status == ProjectStatus::preprocessing);
    CHECK(code_of([&] { s.transition_project("p1", ProjectStatus::created); }) == ErrorCode::InvalidTransition);
    CHECK(s.load_project("p1").status == ProjectStatus::preprocessing);
    s.transition_project("p1", ProjectStatus::failed);
    CHECK(s.transition_project("p1", ProjectStatus::preprocessing).status == ProjectStatus::preprocessing);
}

TEST_CASE("timed lyric and alignment report round trip") {
    Store s(":memory:");
    s.save_project(fixture_project("p1", "Butter", "BTS"));
    CHECK_FALSE(s.load_timed_lyric("p1"));
    TimedLyric lyric;
    lyric.lines = fixture_lines("butter-bts");
    lyric.lines[0].span = Span{1000, 3000};
    lyric.lines[0].words.push_back({"Smooth", 1000, 400, 0.9, true});
    const json report = {{"lines_aligned", 19}, {"words_matched", 100}};
    s.save_timed_lyric("p1", lyric, report);
    CHECK(*s.load_timed_lyric("p1") == lyric);
    CHECK(*s.load_alignment_report("p1") == report);
}

TEST_CASE("gloss versions append densely and keep history") {
    Store s(":memory:", fixed_clock());
    s.save_project(fixture_project("p1", "Butter", "BTS"));
    const auto v1 = s.append_gloss("p1", 3, "SMOOTH LIKE BUTTER", 0);
    CHECK(v1.version == 1);
    CHECK(v1.authored_at == "2024-06-11T10:00:00Z");
    const auto v2 = s.append_gloss("p1", 3, "SMOOTH [nod] BUTTER", 1);
    CHECK(v2.version == 2);
    s.append_gloss("p1", 4, "CL:flow", 0);

    const auto hist = s.gloss_history("p1", 3);
    REQUIRE(hist.size() == 2);
    CHECK(hist[0] == v1);
    CHECK(hist[1] == v2);
    CHECK(hist[1].tokens.size() == 3);

    const auto latest = s.latest_glosses("p1");
    REQUIRE(latest.size() == 2);
    CHECK(latest.at(3).version == 2);
    CHECK(latest.at(4).version == 1);
}

TEST_CASE("stale gloss version is rejected with the current version") {
    Store s(":memory:");
    s.save_project(fixture_project("p1", "Butter", "BTS"));
    s.append_gloss("p1", 0, "A", 0);
    s.append_gloss("p1", 0, "B", 1);
    try {
        s.append_gloss("p1", 0, "C", 1);
        FAIL("expected ConflictingVersion");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ConflictingVersion);
        CHECK(e.details().at("current_version") == 2);
    }
    CHECK(s.gloss_history("p1", 0).size() == 2);
}

TEST_CASE("malformed gloss leaves the store untouched") {
    Store s(":memory:");
    s.save_project(fixture_project("p1", "Butter", "BTS"));
    s.append_gloss("p1", 0, "A", 0);
    CHECK(code_of([&] { s.append_gloss("p1", 0, "SMOOTH [nod", 1); }) == ErrorCode::UnbalancedBracket);
    CHECK(s.gloss_history("p1", 0).size() == 1);
    CHECK(code_of([&] { s.append_gloss("ghost", 0, "A", 0); }) == ErrorCode::NotFound);
}

TEST_CASE("concurrent editors of one line: exactly one wins each version") {
    const auto path = scratch_db("race");
    Store s(path.string());
    s.save_project(fixture_project("p1", "Butter", "BTS"));
    constexpr int kWriters = 8;
    std::atomic<int> wins{0};
    std::atomic<int> conflicts{0};
    std::vector<std::thread> threads;
    for (int w = 0; w < kWriters; ++w) {
        threads.emplace_back([&, w] {
            try {
                s.append_gloss("p1", 0, "WRITER " + std::to_string(w), 0);
                ++wins;
            } catch (const Error& e) {
                if (e.code() == ErrorCode::ConflictingVersion) ++conflicts;
            }
        });
    }
    for (auto& t : threads) t.join();
    CHECK(wins == 1);
    CHECK(conflicts == kWriters - 1);
    CHECK(s.gloss_history("p1", 0).size() == 1);
}

TEST_CASE("readers run while a writer is busy") {
    const auto path = scratch_db("readers");
    Store s(path.string());
    s.save_project(fixture_project("p1", "Butter", "BTS"));
    std::atomic<bool> stop{false};
    std::atomic<int> reads{0};
    std::thread reader([&] {
        while (!stop) {
            CHECK(s.load_project("p1").id == "p1");
            ++reads;
        }
    });
    while (reads == 0) std::this_thread::yield();
    for (int i = 0; i < 50; ++i) s.append_gloss("p1", 0, "G" + std::to_string(i), i);
    const int during = reads;
    stop = true;
    reader.join();
    CHECK(s.gloss_history("p1", 0).size() == 50);
    CHECK(during > 0);
}

TEST_CASE("annotations replace as a set") {
    Store s(":memory:");
    s.save_project(fixture_project("p1", "Butter", "BTS"));
    LineAnnotation a;
    a.line_index = 1;
    a.challenge = {1, ChallengeKind::poetic, "figurative", false};
    a.base_gloss = "SMOOTH BUTTER";
    a.alt_glosses = {"BUTTER", "SMOOTH BUTTER", "SMOOTH LIKE BUTTER"};
    a.mood_hashtags = {"#playful"};
    a.performance_guide = "Glide.";
    auto b = a;
    b.line_index = 0;
    s.save_annotations("p1", {a, b});
    const auto loaded = s.load_annotations("p1");
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0] == b);
    CHECK(loaded[1] == a);
    s.save_annotations("p1", {a});
    CHECK(s.load_annotations("p1").size() == 1);
}

TEST_CASE("artifacts are keyed by stage and input hash") {
    Store s(":memory:");
    CHECK_FALSE(s.get_artifact("p1", "line_inspector", "h1"));
    s.put_artifact("p1", "line_inspector", "h1", {{"v", 1}});
    s.put_artifact("p1", "line_inspector", "h2", {{"v", 2}});
    CHECK(s.get_artifact("p1", "line_inspector", "h1")->at("v") == 1);
    CHECK(s.latest_artifact("p1", "line_inspector")->at("v") == 2);
    s.put_artifact("p1", "line_inspector", "h1", {{"v", 3}});
    CHECK(s.latest_artifact("p1", "line_inspector")->at("v") == 3);
    CHECK_FALSE(s.get_artifact("p1", "base_gloss", "h1"));
}

TEST_CASE("threads round trip, reject duplicates and number messages densely") {
    Store s(":memory:");
    s.save_project(fixture_project("p1", "Butter", "BTS"));
    auto t = sample_thread("p1");
    s.create_thread(t);
    t.messages[0].seq = 1;
    t.messages[1].seq = 2;
    CHECK(*s.load_thread(t.id) == t);
    CHECK(code_of([&] { s.create_thread(t); }) == ErrorCode::ThreadExists);

    auto other = t;
    other.id = "different-id";
    CHECK(code_of([&] { s.create_thread(other); }) == ErrorCode::ThreadExists);

    const auto m = s.append_message(t.id, {0, Role::user, "What about timing?", Intent::Timing, MessageOrigin::shortcut, false});
    CHECK(m.seq == 3);
    CHECK(s.load_thread(t.id)->messages.back() == m);
    CHECK(code_of([&] { s.append_message("ghost", {}); }) == ErrorCode::NotFound);
    CHECK_FALSE(s.load_thread("ghost"));
    CHECK(s.list_threads("p1").size() == 1);
}

TEST_CASE("jobs follow pending, running, then done or failed") {
    Store s(":memory:", fixed_clock());
    s.save_project(fixture_project("p1", "Butter", "BTS"));
    auto j = s.create_job("p1", JobKind::preprocess);
    CHECK(j.status == JobStatus::pending);
    CHECK(s.load_job(j.id) == j);
    CHECK(code_of([&] { s.update_job(j.id, JobStatus::done); }) == ErrorCode::InvalidTransition);
    s.update_job(j.id, JobStatus::running, "line_inspector");
    s.update_job(j.id, JobStatus::running, "base_gloss");
    const auto failed = s.update_job(j.id, JobStatus::failed, std::nullopt, "ProviderError");
    CHECK(failed.stage == "base_gloss");
    CHECK(failed.error == "ProviderError");
    CHECK(s.load_job(j.id) == failed);
    CHECK(code_of([&] { s.update_job(j.id, JobStatus::running); }) == ErrorCode::InvalidTransition);
    const auto j2 = s.create_job("p1", JobKind::alignment);
    CHECK(j2.id > j.id);
    CHECK(s.list_jobs("p1").size() == 2);
    CHECK(code_of([&] { s.load_job(9999); }) == ErrorCode::NotFound);
}

TEST_CASE("idempotency keys store the first response only") {
    Store s(":memory:");
    CHECK_FALSE(s.find_response("k1"));
    s.save_response("k1", {201, R"({"id":"p1"})"});
    s.save_response("k1", {500, "later"});
    const auto r = s.find_response("k1");
    REQUIRE(r);
    CHECK(r->status == 201);
    CHECK(r->body == R"({"id":"p1"})");
}

TEST_CASE("export bundle carries every aggregate and re-parses to the same values") {
    Store s(":memory:", fixed_clock());
    s.save_project(fixture_project("p1", "Butter", "BTS"));
    TimedLyric lyric;
    lyric.lines = fixture_lines("butter-bts");
    s.save_timed_lyric("p1", lyric, {{"lines_aligned", 19}});
    s.append_gloss("p1", 0, "SMOOTH", 0);
    s.append_gloss("p1", 0, "SMOOTH [nod]", 1);
    s.create_thread(sample_thread("p1"));
    s.create_job("p1", JobKind::alignment);

    const auto bundle = json::parse(s.export_bundle().dump());
    CHECK(bundle.at("format") == "songsign-export");
    CHECK(bundle.at("schema_version") == kSchemaVersion);
    REQUIRE(bundle.at("projects").size() == 1);
    const auto& p = bundle.at("projects")[0];
    CHECK(p.at("project").get<SongProject>() == s.load_project("p1"));
    CHECK(p.at("timed_lyric").get<TimedLyric>() == lyric);
    CHECK(p.at("glosses")[0].at("versions").get<std::vector<GlossLine>>() == s.gloss_history("p1", 0));
    CHECK(p.at("threads")[0].get<ChatThread>() == *s.load_thread("p1-L2"));
    CHECK(p.at("jobs").size() == 1);
    CHECK(p.at("annotations").empty());
}
