#include <doctest.h>

#include <condition_variable>
#include <future>

#include "songsign/chat.hpp"
#include "support/chat_fixture.hpp"

using namespace songsign;
using namespace songsign::testing;
using nlohmann::json;

namespace {

struct ChatHarness {
    std::shared_ptr<MemoryChatBackend> backend = fixture_chat_backend();
    std::shared_ptr<RecordingProvider> recorder;
    std::shared_ptr<ChatEngine> engine;

    explicit ChatHarness(std::shared_ptr<Provider> inner = chat_mock())
        : recorder(std::make_shared<RecordingProvider>(std::move(inner))),
          engine(std::make_shared<ChatEngine>(std::make_shared<LlmClient>(recorder), backend)) {}
};

// Blocks every call until released.
class GateProvider : public Provider {
public:
    std::string complete(const ChatRequest&) override {
        std::unique_lock lock(mu_);
        entered_ = true;
        cv_.notify_all();
        cv_.wait(lock, [&] { return open_; });
        return "Fine.";
    }
    void wait_entered() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return entered_; });
    }
    void open() {
        std::lock_guard lock(mu_);
        open_ = true;
        cv_.notify_all();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    bool entered_ = false, open_ = false;
};

class FailingProvider : public Provider {
public:
    std::string complete(const ChatRequest&) override { throw provider_error("boom", false); }
};

} // namespace

TEST_CASE("text helpers") {
    CHECK(split_sentences("Hi there. How are you? Fine!\nNext line") ==
          std::vector<std::string>{"Hi there.", "How are you?", "Fine!", "Next line"});
    CHECK(split_sentences("Wait... what?! ok") == std::vector<std::string>{"Wait...", "what?!", "ok"});
    CHECK(count_questions("a? b? c?") == 3);
    CHECK(limit_questions("One? Two. Three? Four? Five.") == "One? Two. Three? Five.");
    CHECK(drop_digit_sentences("Fast. About 2 seconds. Relax.") == "Fast. Relax.");
    CHECK(parse_intent("Timing") == Intent::Timing);
    CHECK(parse_intent("The category is Glossing.") == Intent::Glossing);
    CHECK(parse_intent("emoting") == Intent::Emoting);
    CHECK_FALSE(parse_intent("Meaningful").has_value());
    CHECK_FALSE(parse_intent("no idea").has_value());
    CHECK(thread_id_for("butter", 4) == "butter-L4");
    CHECK(template_for(Intent::Timing, false) == "timing_base");
    CHECK(template_for(Intent::Glossing, true) == "glossing_refine");
    CHECK(template_for(Intent::Meaning, true) == "meaning");

    LyricLine l;
    l.span = Span{0, 1000};
    CHECK_FALSE(has_digit(describe_pace(l, 4)));
    CHECK(describe_pace(l, 4) != describe_pace(l, 1));
}

TEST_CASE("shortcuts bypass the classifier") {
    ChatHarness h;
    const auto t = h.engine->open_thread("butter", 0, false);
    CHECK(t.messages.empty());
    for (Intent i : {Intent::Meaning, Intent::Glossing, Intent::Emoting, Intent::Timing}) {
        const auto r = h.engine->handle_turn(t.id, {"", i});
        CHECK(r.user.origin == MessageOrigin::shortcut);
        CHECK(r.user.intent == i);
        CHECK(r.assistant.intent == i);
        CHECK(r.assistant.origin == MessageOrigin::reply);
        CHECK_FALSE(r.assistant.flagged);
        CHECK(r.template_id == template_for(i, false));
    }
    CHECK(h.recorder->count("intent_classifier") == 0);
    const auto thread = h.engine->get_thread(t.id);
    REQUIRE(thread.messages.size() == 8);
    for (std::size_t k = 0; k < thread.messages.size(); ++k) {
        CHECK(thread.messages[k].seq == static_cast<std::int64_t>(k + 1));
        CHECK(thread.messages[k].role == (k % 2 == 0 ? Role::user : Role::assistant));
    }
}

TEST_CASE("manual messages are classified with one call each") {
    ChatHarness h;
    const auto line = h.backend->line_context("butter", 2).line;
    const std::vector<std::pair<std::string, Intent>> table = {
        {"what does 'stars' mean here?", Intent::Meaning},
        {"Is this line about confidence or about love?", Intent::Meaning},
        {"What is the hidden message behind this lyric?", Intent::Meaning},
        {"How should I sign 'criminal'?", Intent::Glossing},
        {"Can you check my gloss?", Intent::Glossing},
        {"Which sign fits undercover better?", Intent::Glossing},
        {"What facial expression should I use here?", Intent::Emoting},
        {"How do I show the mood with my body?", Intent::Emoting},
        {"Should I look playful or serious on this line?", Intent::Emoting},
        {"can you make this shorter?", Intent::Timing},
        {"My signing is too slow for the beat", Intent::Timing},
        {"Could I make this longer to fill the pause?", Intent::Timing},
    };
    int correct = 0;
    for (const auto& [msg, want] : table) {
        const auto before = h.recorder->calls().size();
        const auto d = h.engine->classify_intent(msg, line);
        CHECK(h.recorder->calls().size() == before + 1);
        CHECK_FALSE(d.fallback);
        correct += d.intent == want;
    }
    CHECK(correct == 12);

    const auto unknown = h.engine->classify_intent("tell me a joke", line);
    CHECK(unknown.intent == Intent::Meaning);
    CHECK(unknown.fallback);

    ChatHarness failing(std::make_shared<FailingProvider>());
    const auto d = failing.engine->classify_intent("anything", line);
    CHECK(d.fallback);
    CHECK(failing.recorder->calls().size() == 1);
}

TEST_CASE("a manual turn routes through the classifier") {
    ChatHarness h;
    const auto t = h.engine->open_thread("butter", 3, false);
    const auto r = h.engine->handle_turn(t.id, {"can you make this shorter?", std::nullopt});
    CHECK(r.user.origin == MessageOrigin::manual);
    CHECK(r.assistant.intent == Intent::Timing);
    CHECK(r.template_id == "timing_base");
    CHECK(h.recorder->count("intent_classifier") == 1);

    const auto fallback = h.engine->handle_turn(t.id, {"tell me a joke", std::nullopt});
    CHECK(fallback.assistant.intent == Intent::Meaning);
    CHECK(fallback.assistant.flagged);
    CHECK_THROWS_AS(h.engine->handle_turn(t.id, {"   ", std::nullopt}), Error);
}

TEST_CASE("threads open once per line and proactive openers need a challenge") {
    ChatHarness h;
    const auto t = h.engine->open_thread("dyn", 3, true);
    CHECK(t.id == "dyn-L3");
    CHECK(t.opened_by == ThreadOpener::proactive);
    REQUIRE(t.messages.size() == 1);
    CHECK(t.messages[0].role == Role::assistant);
    CHECK(t.messages[0].origin == MessageOrigin::proactive);
    CHECK(t.messages[0].intent == Intent::Meaning);
    CHECK(t.messages[0].text.find("LeBron") != std::string::npos);
    CHECK(h.recorder->calls().back().values.at("challenge kind") == "cultural");

    try {
        h.engine->open_thread("dyn", 3, false);
        FAIL("expected ThreadExists");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ThreadExists);
    }
    try {
        h.engine->open_thread("dyn", 2, true);
        FAIL("expected NotNoteworthy");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NotNoteworthy);
    }
    CHECK(h.engine->open_thread("dyn", 2, false).messages.empty());

    auto ctx = h.backend->line_context("dyn", 1);
    ctx.project.id = "raw";
    ctx.annotation.reset();
    h.backend->put_context(ctx);
    try {
        h.engine->open_thread("raw", 1, true);
        FAIL("expected NotReady");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NotReady);
    }

    // The opener is answered like any other turn; the model sees a user turn first.
    const auto r = h.engine->handle_turn(t.id, {"", Intent::Meaning});
    const auto call = h.recorder->calls().back();
    CHECK(call.template_id == "meaning");
    CHECK(h.engine->get_thread(t.id).messages.size() == 3);
    CHECK(r.assistant.seq == 3);
}

TEST_CASE("prompt choice depends on whether the user wrote a gloss") {
    ChatHarness h;
    const auto t = h.engine->open_thread("butter", 0, false);
    const auto without = h.engine->handle_turn(t.id, {"", Intent::Glossing});
    h.backend->set_user_gloss("butter", 0, "RELAX GIRL BUTTER");
    const auto with = h.engine->handle_turn(t.id, {"", Intent::Glossing});
    CHECK(without.template_id == "glossing_base");
    CHECK(with.template_id == "glossing_refine");
    CHECK(without.assistant.text != with.assistant.text);
    CHECK(with.assistant.text.find("RELAX GIRL BUTTER") != std::string::npos);
    CHECK(h.recorder->calls().back().values.at("user gloss") == "RELAX GIRL BUTTER");

    // Meaning keeps one template but the digest changes with the gloss.
    const auto t2 = h.engine->open_thread("butter", 1, false);
    h.engine->handle_turn(t2.id, {"", Intent::Meaning});
    const auto d1 = h.recorder->calls().back().digest;
    h.backend->set_user_gloss("butter", 1, "SNEAK CRIMINAL");
    h.engine->handle_turn(t2.id, {"", Intent::Meaning});
    CHECK(h.recorder->calls().back().digest != d1);
}

TEST_CASE("persona validators") {
    ChatHarness h;
    SUBCASE("too many questions triggers one regeneration") {
        const auto t = h.engine->open_thread("butter", 4, false);
        const auto r = h.engine->handle_turn(t.id, {"", Intent::Meaning});
        CHECK(r.regenerations == 1);
        CHECK(count_questions(r.assistant.text) == 2);
        CHECK(r.assistant.text.find("Cool shade stunner") != std::string::npos);
        CHECK(h.recorder->calls().back().attempt == 1);
    }
    SUBCASE("timing replies lose their digits") {
        const auto t = h.engine->open_thread("butter", 5, false);
        const auto base = h.engine->handle_turn(t.id, {"", Intent::Timing});
        CHECK(base.regenerations == 1);
        CHECK_FALSE(has_digit(base.assistant.text));
        CHECK(base.assistant.text.find("shorter") != std::string::npos);
        CHECK_FALSE(has_digit(h.recorder->calls().back().values.at("pace")));

        h.backend->set_user_gloss("butter", 5, "ME OWE MOTHER");
        const auto refine = h.engine->handle_turn(t.id, {"", Intent::Timing});
        CHECK(refine.template_id == "timing_refine");
        CHECK(refine.regenerations == 1);
        CHECK_FALSE(has_digit(refine.assistant.text));
        CHECK(refine.assistant.text.find("rushed") != std::string::npos);
    }
    SUBCASE("persistent violations are truncated") {
        const json table = {{"entries", {scripted("meaning", {"Why? How? What? Where? Fine."})}}};
        ChatHarness q(std::make_shared<MockProvider>(table));
        const auto t = q.engine->open_thread("butter", 0, false);
        const auto r = q.engine->handle_turn(t.id, {"", Intent::Meaning});
        CHECK(r.assistant.text == "Why? How? Fine.");
    }
}

TEST_CASE("provider failure becomes a flagged apology") {
    ChatHarness h(std::make_shared<FailingProvider>());
    const auto t = h.engine->open_thread("butter", 0, false);
    const auto r = h.engine->handle_turn(t.id, {"", Intent::Emoting});
    CHECK(r.assistant.flagged);
    CHECK(r.assistant.text == kApologyText);
    CHECK(h.engine->get_thread(t.id).messages.size() == 2);
}

TEST_CASE("a second turn on a busy thread is rejected") {
    auto gate = std::make_shared<GateProvider>();
    ChatHarness h(gate);
    const auto t = h.engine->open_thread("butter", 0, false);
    const auto other = h.engine->open_thread("butter", 1, false);
    auto first = std::async(std::launch::async, [&] { return h.engine->handle_turn(t.id, {"", Intent::Emoting}); });
    gate->wait_entered();
    try {
        h.engine->handle_turn(t.id, {"", Intent::Emoting});
        FAIL("expected Busy");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Busy);
    }
    gate->open();
    CHECK(first.get().assistant.text == "Fine.");
    CHECK(h.engine->handle_turn(other.id, {"", Intent::Emoting}).assistant.text == "Fine.");
    CHECK(h.engine->handle_turn(t.id, {"", Intent::Emoting}).assistant.seq == 4);
}

TEST_CASE("inline suggestions") {
    auto backend = fixture_chat_backend();
    const auto a = backend->line_context("butter", 0).annotation;
    REQUIRE(a.has_value());
    CHECK(suggest_inline(a, "") == std::vector<std::string>{"BUTTER SMOOTH SAME", "SMOOTH BUTTER"});
    CHECK(suggest_inline(a, "   ") == std::vector<std::string>{"BUTTER SMOOTH SAME", "SMOOTH BUTTER"});

    const auto same_as_base = suggest_inline(a, "SMOOTH LIKE BUTTER");
    REQUIRE(same_as_base.size() == 2);
    for (const auto& s : same_as_base) CHECK(s != "SMOOTH LIKE BUTTER");
    CHECK(same_as_base[0] == "[EYES-half-closed] SMOOTH LIKE BUTTER");

    const auto partial = suggest_inline(a, "smooth");
    REQUIRE(partial.size() == 2);
    CHECK(partial[0] == "SMOOTH BUTTER");
    CHECK_THROWS_AS(suggest_inline(std::nullopt, ""), Error);
}

TEST_CASE("noteworthy lines") {
    auto backend = fixture_chat_backend();
    std::vector<ChallengeNote> butter, dyn;
    for (int i = 0; i < 19; ++i) butter.push_back(backend->line_context("butter", i).annotation->challenge);
    for (int i = 0; i < 4; ++i) dyn.push_back(backend->line_context("dyn", i).annotation->challenge);
    CHECK(noteworthy_lines(butter) == std::set<int>{1, 4, 6});
    CHECK(noteworthy_lines(dyn) == std::set<int>{0, 1, 3});
    CHECK(noteworthy_lines(std::vector<ChallengeNote>(3)).empty());
    CHECK_THROWS_AS(noteworthy_lines(std::nullopt), Error);
}
