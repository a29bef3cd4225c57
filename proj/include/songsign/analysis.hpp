#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "songsign/error.hpp"
#include "songsign/llm.hpp"
#include "songsign/model.hpp"

namespace songsign {

// Preprocessing stages in execution order. Names double as prompt template
// ids and as the stage label recorded on failure.
enum class Stage { line_inspector, base_gloss, performance_guide, alternative_gloss };
inline constexpr Stage kStages[] = {Stage::line_inspector, Stage::base_gloss, Stage::performance_guide,
                                    Stage::alternative_gloss};
std::string_view to_string(Stage s);
// Throws InvalidArgument.
Stage stage_from_string(std::string_view s);

constexpr std::size_t kMaxBatchLines = 10;
constexpr std::size_t kMaxGuideChars = 500;
constexpr std::size_t kMaxHashtags = 5;

// Groups consecutive lines into batches of at most `max_lines`. Whole
// sections are packed greedily; a batch only breaks inside a section when the
// section alone exceeds `max_lines`.
std::vector<std::vector<int>> make_batches(const std::vector<LyricLine>& lines, std::size_t max_lines = kMaxBatchLines);

// "a-b" for a contiguous run, the comma list otherwise. Passed to prompts as
// the "line range" value so mock tables can key on it.
std::string line_range(const std::vector<int>& indices);

// Cuts `guide` to at most `max_chars`, preferring the end of the last whole
// sentence that fits, then the last word boundary.
std::string truncate_guide(const std::string& guide, std::size_t max_chars = kMaxGuideChars);

// Total token count under tokenize_gloss; throws UnbalancedBracket.
std::size_t gloss_token_count(std::string_view gloss);

struct PerformanceGuide {
    std::vector<std::string> mood_hashtags;
    std::string performance_guide;

    bool operator==(const PerformanceGuide&) const = default;
};

// Stage outputs, one entry per line index, in line order.
struct StageArtifacts {
    std::optional<std::vector<ChallengeNote>> notes;
    std::optional<std::vector<std::string>> base_glosses;
    std::optional<std::vector<PerformanceGuide>> guides;
    std::optional<std::vector<AltGlosses>> alternatives;
};

// Durable home for stage artifacts keyed by (project, stage, input hash).
class ArtifactStore {
public:
    virtual ~ArtifactStore() = default;
    virtual std::optional<nlohmann::json> get_artifact(const std::string& project_id, Stage stage,
                                                       const std::string& input_hash) = 0;
    virtual void put_artifact(const std::string& project_id, Stage stage, const std::string& input_hash,
                              const nlohmann::json& artifact) = 0;
};

class MemoryArtifactStore : public ArtifactStore {
public:
    std::optional<nlohmann::json> get_artifact(const std::string& project_id, Stage stage,
                                               const std::string& input_hash) override;
    void put_artifact(const std::string& project_id, Stage stage, const std::string& input_hash,
                      const nlohmann::json& artifact) override;
    std::size_t size() const;

private:
    mutable std::mutex mu_;
    std::map<std::tuple<std::string, Stage, std::string>, nlohmann::json> items_;
};

struct PipelineContext {
    const SongProject& project;
    const std::vector<LyricLine>& lines;
};

struct PipelineOptions {
    // Stages before this one may be served from the artifact store; this
    // stage and later ones are always recomputed.
    std::optional<Stage> from_stage;
    std::size_t batch_lines = kMaxBatchLines;
    int batch_concurrency = 2;
    // Progress hooks, called on the calling thread.
    std::function<void(Stage)> on_stage_start;
    std::function<void(Stage, bool reused)> on_stage_done;
};

// Single stages. Each throws ValidationExhausted (details.line_indices) when a
// batch never validates; generate_base_gloss throws UnparseableGloss when the
// only remaining problem is gloss grammar.
std::vector<ChallengeNote> inspect_lines(LlmClient& llm, const PipelineContext& ctx,
                                         const PipelineOptions& options = {});
std::vector<std::string> generate_base_gloss(LlmClient& llm, const PipelineContext& ctx,
                                             const std::vector<ChallengeNote>& notes,
                                             const PipelineOptions& options = {});
std::vector<PerformanceGuide> generate_performance_guides(LlmClient& llm, const PipelineContext& ctx,
                                                          const std::vector<std::string>& base_glosses,
                                                          const std::vector<ChallengeNote>& notes,
                                                          const PipelineOptions& options = {});
std::vector<AltGlosses> generate_alternatives(LlmClient& llm, const PipelineContext& ctx,
                                              const std::vector<std::string>& base_glosses,
                                              const std::vector<ChallengeNote>& notes,
                                              const PipelineOptions& options = {});

struct PreprocessResult {
    StageArtifacts artifacts;
    std::vector<LineAnnotation> annotations; // filled only when every stage finished
    std::vector<Stage> computed;             // stages that called the provider
    std::vector<Stage> reused;               // stages served from the store
    std::optional<Stage> failed_stage;
    std::optional<Error> error;
    std::vector<std::string> warnings;
};

// Runs B -> D -> F -> H. Moves the project to preprocessing, then to ready or
// failed; stage artifacts finished before a failure stay in the store so a
// re-run resumes at the failed stage.
PreprocessResult run_preprocess(SongProject& project, const std::vector<LyricLine>& lines, LlmClient& llm,
                                ArtifactStore& store, const PipelineOptions& options = {});

std::vector<LineAnnotation> assemble_annotations(const StageArtifacts& artifacts, std::size_t line_count);

// Deterministic JSON export of annotations (array ordered by line index).
std::string export_annotations(const std::vector<LineAnnotation>& annotations);

void to_json(nlohmann::json& j, const PerformanceGuide& g);
void from_json(const nlohmann::json& j, PerformanceGuide& g);

} // namespace songsign
