#pragma once

#include <memory>
#include <string>

#include "songsign/service.hpp"
#include "support/pipeline_fixture.hpp"

namespace songsign::testing {

struct ServiceHarness {
    std::shared_ptr<Store> store;
    std::shared_ptr<RecordingProvider> recorder;
    std::shared_ptr<Workbench> workbench;

    explicit ServiceHarness(const std::string& db = ":memory:")
        : store(std::make_shared<Store>(db)),
          recorder(std::make_shared<RecordingProvider>(MockProvider::from_files(mock_tables_in(fixtures_dir() / "mock")))) {
        ClientConfig config;
        config.fixtures_dir = fixtures_dir();
        workbench = std::make_shared<Workbench>(store, make_clients(config, [](std::chrono::milliseconds) {}),
                                                std::make_shared<LlmClient>(recorder));
    }
};

inline CreateProjectRequest butter_request() {
    CreateProjectRequest r;
    r.title = "Butter";
    r.artist = "BTS";
    r.sign_language = SignLanguage::ASL;
    r.nickname = "Jamie";
    return r;
}

} // namespace songsign::testing
