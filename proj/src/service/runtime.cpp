#include "songsign/service.hpp"

#include <algorithm>

namespace songsign {

using nlohmann::json;

// ---- EventBus -------------------------------------------------------------

std::optional<Event> EventBus::Subscription::next(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return closed_ || !queue_.empty(); });
    if (queue_.empty()) return std::nullopt;
    Event e = std::move(queue_.front());
    queue_.pop_front();
    return e;
}

void EventBus::Subscription::close() {
    {
        std::lock_guard lock(mu_);
        closed_ = true;
    }
    cv_.notify_all();
}

bool EventBus::Subscription::closed() {
    std::lock_guard lock(mu_);
    return closed_;
}

std::shared_ptr<EventBus::Subscription> EventBus::subscribe(const std::string& project_id) {
    auto sub = std::make_shared<Subscription>();
    std::lock_guard lock(mu_);
    subs_.emplace(project_id, sub);
    return sub;
}

void EventBus::unsubscribe(const std::string& project_id, const std::shared_ptr<Subscription>& sub) {
    std::lock_guard lock(mu_);
    auto [lo, hi] = subs_.equal_range(project_id);
    for (auto it = lo; it != hi; ++it) {
        if (it->second == sub) {
            subs_.erase(it);
            return;
        }
    }
}

void EventBus::publish(const std::string& project_id, const std::string& type, json data) {
    std::lock_guard lock(mu_);
    const Event e{next_id_++, type, project_id, std::move(data)};
    auto [lo, hi] = subs_.equal_range(project_id);
    for (auto it = lo; it != hi; ++it) {
        auto& sub = *it->second;
        {
            std::lock_guard sl(sub.mu_);
            if (sub.closed_) continue;
            sub.queue_.push_back(e);
        }
        sub.cv_.notify_all();
    }
}

void EventBus::close_all() {
    std::lock_guard lock(mu_);
    for (auto& [_, sub] : subs_) sub->close();
    subs_.clear();
}

// ---- JobManager -----------------------------------------------------------

JobManager::~JobManager() {
    wait_idle();
    std::lock_guard lock(mu_);
    for (auto& w : workers_) w.thread.join();
}

std::shared_future<void> JobManager::submit(const std::string& project_id, std::function<void()> task) {
    std::packaged_task<void()> pt(std::move(task));
    auto fut = pt.get_future().share();
    std::lock_guard lock(mu_);
    for (auto it = workers_.begin(); it != workers_.end();) {
        if (it->finished->load()) {
            it->thread.join();
            it = workers_.erase(it);
        } else {
            ++it;
        }
    }
    auto& lane = lanes_[project_id];
    lane.queue.push_back(std::move(pt));
    if (!lane.running) {
        lane.running = true;
        ++active_;
        auto finished = std::make_shared<std::atomic<bool>>(false);
        workers_.push_back({std::thread([this, project_id, finished] {
                                drain(project_id);
                                finished->store(true);
                            }),
                            finished});
    }
    return fut;
}

void JobManager::drain(const std::string& project_id) {
    for (;;) {
        std::packaged_task<void()> task;
        {
            std::lock_guard lock(mu_);
            auto& lane = lanes_[project_id];
            if (lane.queue.empty()) {
                lane.running = false;
                lanes_.erase(project_id);
                --active_;
                idle_cv_.notify_all();
                return;
            }
            task = std::move(lane.queue.front());
            lane.queue.pop_front();
        }
        task(); // exceptions land in the future
    }
}

bool JobManager::busy(const std::string& project_id) {
    std::lock_guard lock(mu_);
    return lanes_.count(project_id) > 0;
}

void JobManager::wait_idle() {
    std::unique_lock lock(mu_);
    idle_cv_.wait(lock, [&] { return active_ == 0; });
}

std::vector<std::string> mock_tables_in(const std::filesystem::path& dir) {
    std::vector<std::string> out;
    std::error_code ec;
    for (const auto& e : std::filesystem::directory_iterator(dir, ec)) {
        if (e.is_regular_file() && e.path().extension() == ".json") out.push_back(e.path().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

// ---- Store adapters -------------------------------------------------------

std::optional<json> StoreArtifactStore::get_artifact(const std::string& project_id, Stage stage,
                                                     const std::string& input_hash) {
    return store_->get_artifact(project_id, std::string(to_string(stage)), input_hash);
}

void StoreArtifactStore::put_artifact(const std::string& project_id, Stage stage, const std::string& input_hash,
                                      const json& artifact) {
    store_->put_artifact(project_id, std::string(to_string(stage)), input_hash, artifact);
}

LineContext StoreChatBackend::line_context(const std::string& project_id, int line_index) {
    LineContext ctx;
    ctx.project = store_->load_project(project_id);
    const auto lyric = store_->load_timed_lyric(project_id);
    if (!lyric) throw Error(ErrorCode::NotReady, "lyrics for " + project_id + " are not aligned yet");
    if (line_index < 0 || line_index >= static_cast<int>(lyric->lines.size())) {
        throw Error(ErrorCode::NotFound, "no line " + std::to_string(line_index) + " in " + project_id,
                    {{"line_index", line_index}});
    }
    ctx.line = lyric->lines[static_cast<std::size_t>(line_index)];
    for (auto& a : store_->load_annotations(project_id)) {
        if (a.line_index == line_index) ctx.annotation = std::move(a);
    }
    const auto history = store_->gloss_history(project_id, line_index);
    if (!history.empty()) ctx.user_gloss = history.back().raw;
    return ctx;
}

std::optional<ChatThread> StoreChatBackend::find_thread(const std::string& thread_id) {
    return store_->load_thread(thread_id);
}

void StoreChatBackend::create_thread(const ChatThread& thread) { store_->create_thread(thread); }

ChatMessage StoreChatBackend::append_message(const std::string& thread_id, ChatMessage message) {
    return store_->append_message(thread_id, std::move(message));
}

} // namespace songsign
