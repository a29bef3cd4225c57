#include <CLI11.hpp>

#include <csignal>
#include <iostream>

#include "songsign/http_api.hpp"
#include "songsign/json_io.hpp"
#include "songsign/service.hpp"

using namespace songsign;
using nlohmann::json;

namespace {

struct Globals {
    std::string db;
    std::string fixtures;
};

std::shared_ptr<Workbench> open_workbench(const Globals& g) {
    auto store = std::make_shared<Store>(g.db);
    auto config = ClientConfig::from_env(g.fixtures);
    config.fixtures_dir = g.fixtures; // --fixtures wins over the environment
    const auto clients = make_clients(config);
    auto llm = std::make_shared<LlmClient>(make_provider_from_env(mock_tables_in(std::filesystem::path(g.fixtures) / "mock")));
    return std::make_shared<Workbench>(store, clients, llm);
}

int report_job(const JobRecord& job) {
    std::cout << json(job).dump(2) << "\n";
    return job.status == JobStatus::done ? 0 : 1;
}

ApiServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Song-signing workbench over a local store."};
    app.require_subcommand(1);
    Globals g;
    g.db = env_or("ELMI_DB", "songsign.db");
    g.fixtures = env_or("ELMI_FIXTURES", SONGSIGN_DEFAULT_FIXTURES);
    app.add_option("--db", g.db, "Store file (env ELMI_DB)");
    app.add_option("--fixtures", g.fixtures, "Fixture directory (env ELMI_FIXTURES)");

    CreateProjectRequest create;
    std::string sign_language = "ASL";
    std::string proficiency = "moderate";
    std::string id;
    auto* ingest = app.add_subcommand("ingest", "Create a project and align its lyrics");
    ingest->add_option("--title", create.title, "Song title")->required();
    ingest->add_option("--artist", create.artist, "Artist")->required();
    ingest->add_option("--nickname", create.nickname, "User nickname")->required();
    ingest->add_option("--sign-language", sign_language, "ASL or PSE")->check(CLI::IsMember({"ASL", "PSE"}));
    ingest->add_option("--proficiency", proficiency, "novice, moderate, fluent or native")
        ->check(CLI::IsMember({"novice", "moderate", "fluent", "native"}));
    ingest->add_option("--id", id, "Project id (default: slug of title and artist)");

    std::string project;
    std::string from_stage;
    std::string annotations_out;
    auto* preprocess = app.add_subcommand("preprocess", "Run the four-stage annotation pipeline");
    preprocess->add_option("project", project, "Project id")->required();
    preprocess->add_option("--from-stage", from_stage, "Recompute from this stage on")
        ->check(CLI::IsMember({"line_inspector", "base_gloss", "performance_guide", "alternative_gloss"}));
    preprocess->add_option("--annotations-out", annotations_out, "Write the annotation export to this file");

    std::string host = "127.0.0.1";
    int port = 8080;
    auto* serve = app.add_subcommand("serve", "Serve the REST API");
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port (0 picks a free one)");

    std::string corpus;
    auto* metrics = app.add_subcommand("metrics", "Gloss analytics for a project or a corpus file");
    metrics->add_option("project", project, "Project id");
    metrics->add_option("--corpus", corpus, "Corpus JSON file instead of a project");

    std::string out;
    auto* exporter = app.add_subcommand("export", "Dump stored aggregates as a JSON bundle");
    exporter->add_option("--project", project, "Only this project");
    exporter->add_option("-o,--output", out, "Output file (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) {
            create.sign_language = sign_language_from_string(sign_language);
            create.proficiency = proficiency_from_string(proficiency);
            if (!id.empty()) create.id = id;
            auto wb = open_workbench(g);
            const auto p = wb->create_project(create);
            std::cerr << "project " << p.id << "\n";
            const auto job = wb->run_alignment(p.id);
            if (const auto report = wb->store().load_alignment_report(p.id)) std::cerr << report->dump(2) << "\n";
            return report_job(job);
        }
        if (*preprocess) {
            auto wb = open_workbench(g);
            std::optional<Stage> from;
            if (!from_stage.empty()) from = stage_from_string(from_stage);
            const auto job = wb->run_preprocess(project, from);
            if (job.status == JobStatus::done && !annotations_out.empty()) {
                write_file(annotations_out, export_annotations(wb->store().load_annotations(project)));
            }
            return report_job(job);
        }
        if (*serve) {
            auto wb = open_workbench(g);
            ApiServer server(wb);
            const int bound = server.bind(host, port);
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "listening on http://" << host << ":" << bound << "\n";
            server.run();
            g_server = nullptr;
            return 0;
        }
        if (*metrics) {
            if (corpus.empty() == project.empty()) {
                std::cerr << "metrics needs exactly one of <project> or --corpus\n";
                return 2;
            }
            AnalyticsReport r;
            if (!corpus.empty()) {
                r = analyze_corpus(json::parse(read_file(corpus)));
            } else {
                r = open_workbench(g)->analytics(project);
            }
            std::cout << to_json(r).dump(2) << "\n";
            return 0;
        }
        if (*exporter) {
            Store store(g.db);
            const auto bundle = project.empty() ? store.export_bundle()
                                                : json{{"format", "songsign-export"},
                                                       {"schema_version", store.schema_version()},
                                                       {"projects", json::array({store.export_project(project)})}};
            const auto text = bundle.dump(2) + "\n";
            if (out.empty()) {
                std::cout << text;
            } else {
                write_file(out, text);
            }
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << error_body(e).dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
