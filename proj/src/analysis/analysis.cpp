#include "songsign/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

#include "songsign/gloss.hpp"
#include "songsign/json_io.hpp"
#include "songsign/text.hpp"
#include "songsign/util.hpp"

namespace songsign {

using nlohmann::json;

std::string_view to_string(Stage s) {
    switch (s) {
    case Stage::line_inspector: return "line_inspector";
    case Stage::base_gloss: return "base_gloss";
    case Stage::performance_guide: return "performance_guide";
    case Stage::alternative_gloss: return "alternative_gloss";
    }
    return "?";
}

Stage stage_from_string(std::string_view s) {
    for (Stage st : kStages) {
        if (to_string(st) == s) return st;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown stage: " + std::string(s), {{"stage", s}});
}

std::vector<std::vector<int>> make_batches(const std::vector<LyricLine>& lines, std::size_t max_lines) {
    if (max_lines == 0) throw Error(ErrorCode::InvalidArgument, "batch size must be positive");
    // Split into sections first (consecutive runs sharing a label).
    std::vector<std::vector<int>> sections;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i == 0 || lines[i].section != lines[i - 1].section) sections.emplace_back();
        sections.back().push_back(static_cast<int>(i));
    }
    std::vector<std::vector<int>> batches;
    std::vector<int> current;
    auto flush = [&] {
        if (!current.empty()) batches.push_back(std::move(current));
        current.clear();
    };
    for (const auto& section : sections) {
        if (section.size() > max_lines) {
            flush();
            for (std::size_t s = 0; s < section.size(); s += max_lines) {
                const auto e = std::min(section.size(), s + max_lines);
                batches.emplace_back(section.begin() + static_cast<std::ptrdiff_t>(s),
                                     section.begin() + static_cast<std::ptrdiff_t>(e));
            }
            continue;
        }
        if (current.size() + section.size() > max_lines) flush();
        current.insert(current.end(), section.begin(), section.end());
    }
    flush();
    return batches;
}

std::string line_range(const std::vector<int>& indices) {
    if (indices.empty()) return "";
    bool contiguous = true;
    for (std::size_t i = 1; i < indices.size(); ++i) contiguous = contiguous && indices[i] == indices[i - 1] + 1;
    if (contiguous) return std::to_string(indices.front()) + "-" + std::to_string(indices.back());
    std::string out;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(indices[i]);
    }
    return out;
}

std::string truncate_guide(const std::string& guide, std::size_t max_chars) {
    if (guide.size() <= max_chars) return guide;
    // Last sentence end (., ! or ? followed by space or the cut point) that fits.
    std::size_t cut = std::string::npos;
    for (std::size_t i = 0; i < max_chars; ++i) {
        const char c = guide[i];
        if ((c == '.' || c == '!' || c == '?') && (i + 1 == guide.size() || is_space(guide[i + 1]))) cut = i + 1;
    }
    if (cut == std::string::npos) {
        cut = max_chars;
        while (cut > 0 && !is_space(guide[cut])) --cut;
        if (cut == 0) cut = max_chars;
        // Never end inside a UTF-8 sequence.
        while (cut > 0 && (static_cast<unsigned char>(guide[cut]) & 0xC0) == 0x80) --cut;
    }
    std::string out = guide.substr(0, cut);
    while (!out.empty() && is_space(out.back())) out.pop_back();
    return out;
}

std::size_t gloss_token_count(std::string_view gloss) { return tokenize_gloss(gloss).size(); }

void to_json(json& j, const PerformanceGuide& g) {
    j = json{{"mood_hashtags", g.mood_hashtags}, {"performance_guide", g.performance_guide}};
}

void from_json(const json& j, PerformanceGuide& g) {
    g.mood_hashtags = j.at("mood_hashtags").get<std::vector<std::string>>();
    g.performance_guide = j.at("performance_guide").get<std::string>();
}

std::optional<json> MemoryArtifactStore::get_artifact(const std::string& project_id, Stage stage,
                                                      const std::string& input_hash) {
    std::lock_guard lock(mu_);
    const auto it = items_.find({project_id, stage, input_hash});
    if (it == items_.end()) return std::nullopt;
    return it->second;
}

void MemoryArtifactStore::put_artifact(const std::string& project_id, Stage stage, const std::string& input_hash,
                                       const json& artifact) {
    std::lock_guard lock(mu_);
    items_[{project_id, stage, input_hash}] = artifact;
}

std::size_t MemoryArtifactStore::size() const {
    std::lock_guard lock(mu_);
    return items_.size();
}

namespace {

Values base_values(const PipelineContext& ctx) {
    const auto& p = ctx.project;
    return {{"sign language", std::string(to_string(p.sign_language))},
            {"title", p.title},
            {"artist", p.artist},
            {"song description", p.song_description},
            {"user name", p.user_profile.nickname},
            {"proficiency", std::string(to_string(p.user_profile.proficiency))}};
}

json note_json(const ChallengeNote& n) {
    return {{"kind", to_string(n.kind)}, {"summary", n.summary}, {"needs_fingerspelling_hint", n.needs_fingerspelling_hint}};
}

// Lines whose text normalizes to nothing are left out of every prompt.
std::vector<int> usable_lines(const std::vector<LyricLine>& lines, std::vector<std::string>* warnings) {
    std::vector<int> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (normalize_text(lines[i].text).empty()) {
            if (warnings) warnings->push_back("line " + std::to_string(i) + " is empty and was skipped");
            continue;
        }
        out.push_back(static_cast<int>(i));
    }
    return out;
}

std::vector<std::vector<int>> batches_for(const PipelineContext& ctx, const PipelineOptions& options) {
    const auto usable = usable_lines(ctx.lines, nullptr);
    std::vector<LyricLine> subset;
    for (int i : usable) subset.push_back(ctx.lines[static_cast<std::size_t>(i)]);
    auto batches = make_batches(subset, options.batch_lines);
    for (auto& b : batches) {
        for (int& i : b) i = usable[static_cast<std::size_t>(i)];
    }
    return batches;
}

// Runs fn over every batch with at most `concurrency` in flight. Results keep
// batch order; the first failing batch (by position) is rethrown.
template <typename Fn>
std::vector<json> run_batches(const std::vector<std::vector<int>>& batches, int concurrency, Fn fn) {
    std::vector<json> results(batches.size());
    std::vector<std::exception_ptr> errors(batches.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t b = next++; b < batches.size(); b = next++) {
            try {
                results[b] = fn(batches[b]);
            } catch (...) {
                errors[b] = std::current_exception();
            }
        }
    };
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(std::max(concurrency, 1)), batches.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return results;
}

// Checks that `entries` holds exactly one object per batch line.
std::optional<std::string> check_coverage(const json& entries, const std::vector<int>& batch) {
    std::vector<int> seen;
    for (const auto& e : entries) {
        if (!e.is_object() || !e.contains("line_index") || !e["line_index"].is_number_integer()) {
            return "every entry needs an integer line_index";
        }
        seen.push_back(e["line_index"].get<int>());
    }
    auto sorted = seen;
    std::sort(sorted.begin(), sorted.end());
    if (sorted != batch) return "expected exactly one entry for each of lines " + line_range(batch);
    return std::nullopt;
}

std::optional<std::string> check_string_field(const json& e, const char* name, bool non_empty) {
    if (!e.contains(name) || !e[name].is_string()) return std::string(name) + " must be a string";
    if (non_empty && normalize_whitespace(e[name].get<std::string>()).empty()) {
        return std::string(name) + " must not be empty";
    }
    return std::nullopt;
}

std::optional<std::string> check_gloss(const json& e, const char* name) {
    if (auto err = check_string_field(e, name, true)) return err;
    try {
        tokenize_gloss(e[name].get<std::string>());
    } catch (const Error& err) {
        return "unparseable gloss in " + std::string(name) + " for line " + std::to_string(e["line_index"].get<int>()) +
               ": " + err.what();
    }
    return std::nullopt;
}

StructuredResult complete_batch(LlmClient& llm, Stage stage, const PipelineContext& ctx, const std::vector<int>& batch,
                                const json& lines_json, const std::string& field, StructuredSpec spec) {
    const auto& t = PromptCatalog::builtin().get(to_string(stage));
    ChatExchange x;
    x.template_id = t.id;
    x.values = base_values(ctx);
    x.values["lines"] = lines_json.dump();
    x.values["line range"] = line_range(batch);
    x.system = render(t, x.values).text;
    x.history = {{Role::user, "Lines " + x.values["line range"] + "."}};
    spec.fields = {{field, FieldType::array, true, {}}};
    try {
        return llm.complete_structured(x, spec);
    } catch (const Error& e) {
        json details = e.details();
        details["line_indices"] = batch;
        details["stage"] = to_string(stage);
        throw Error(e.code(), e.what(), details);
    }
}

} // namespace

std::vector<ChallengeNote> inspect_lines(LlmClient& llm, const PipelineContext& ctx, const PipelineOptions& options) {
    std::vector<ChallengeNote> notes(ctx.lines.size());
    for (std::size_t i = 0; i < notes.size(); ++i) notes[i].line_index = static_cast<int>(i);
    const auto batches = batches_for(ctx, options);
    const auto results = run_batches(batches, options.batch_concurrency, [&](const std::vector<int>& batch) {
        json lines = json::array();
        for (int i : batch) {
            const auto& l = ctx.lines[static_cast<std::size_t>(i)];
            lines.push_back({{"line_index", i}, {"section", l.section}, {"text", l.text}});
        }
        StructuredSpec spec;
        spec.validator = [&batch](const json& r) -> std::optional<std::string> {
            const auto& notes_json = r.at("notes");
            if (auto err = check_coverage(notes_json, batch)) return err;
            for (const auto& n : notes_json) {
                if (!n.contains("kind") || !n["kind"].is_string()) return "kind must be a string";
                const auto kind = n["kind"].get<std::string>();
                if (kind != "poetic" && kind != "cultural" && kind != "mismatch" && kind != "none") {
                    return "kind must be poetic, cultural, mismatch or none";
                }
                if (auto err = check_string_field(n, "summary", kind != "none")) return err;
                if (kind == "none" && !normalize_whitespace(n["summary"].get<std::string>()).empty()) {
                    return "summary must be empty when kind is none";
                }
                if (!n.contains("needs_fingerspelling_hint") || !n["needs_fingerspelling_hint"].is_boolean()) {
                    return "needs_fingerspelling_hint must be a boolean";
                }
            }
            return std::nullopt;
        };
        return complete_batch(llm, Stage::line_inspector, ctx, batch, lines, "notes", spec).record.at("notes");
    });
    for (const auto& batch_notes : results) {
        for (const auto& n : batch_notes) {
            ChallengeNote note;
            note.line_index = n.at("line_index").get<int>();
            note.kind = challenge_kind_from_string(n.at("kind").get<std::string>());
            note.summary = note.kind == ChallengeKind::none ? "" : normalize_whitespace(n.at("summary").get<std::string>());
            note.needs_fingerspelling_hint = n.at("needs_fingerspelling_hint").get<bool>();
            notes[static_cast<std::size_t>(note.line_index)] = note;
        }
    }
    return notes;
}

std::vector<std::string> generate_base_gloss(LlmClient& llm, const PipelineContext& ctx,
                                             const std::vector<ChallengeNote>& notes, const PipelineOptions& options) {
    std::vector<std::string> glosses(ctx.lines.size());
    const auto batches = batches_for(ctx, options);
    const auto results = run_batches(batches, options.batch_concurrency, [&](const std::vector<int>& batch) {
        json lines = json::array();
        for (int i : batch) {
            lines.push_back({{"line_index", i},
                             {"text", ctx.lines[static_cast<std::size_t>(i)].text},
                             {"note", note_json(notes.at(static_cast<std::size_t>(i)))}});
        }
        StructuredSpec spec;
        // A grammar error gets exactly one re-prompt.
        spec.max_retries = 1;
        spec.validator = [&batch](const json& r) -> std::optional<std::string> {
            const auto& g = r.at("glosses");
            if (auto err = check_coverage(g, batch)) return err;
            for (const auto& e : g) {
                if (auto err = check_gloss(e, "gloss")) return err;
            }
            return std::nullopt;
        };
        try {
            return complete_batch(llm, Stage::base_gloss, ctx, batch, lines, "glosses", spec).record.at("glosses");
        } catch (const Error& e) {
            const auto msg = e.details().value("error", std::string());
            if (e.code() == ErrorCode::ValidationExhausted && msg.rfind("unparseable gloss", 0) == 0) {
                throw Error(ErrorCode::UnparseableGloss, msg, e.details());
            }
            throw;
        }
    });
    for (const auto& batch_glosses : results) {
        for (const auto& e : batch_glosses) {
            glosses[static_cast<std::size_t>(e.at("line_index").get<int>())] =
                render_gloss(tokenize_gloss(e.at("gloss").get<std::string>()));
        }
    }
    return glosses;
}

std::vector<PerformanceGuide> generate_performance_guides(LlmClient& llm, const PipelineContext& ctx,
                                                          const std::vector<std::string>& base_glosses,
                                                          const std::vector<ChallengeNote>& notes,
                                                          const PipelineOptions& options) {
    std::vector<PerformanceGuide> guides(ctx.lines.size());
    const auto batches = batches_for(ctx, options);
    const auto results = run_batches(batches, options.batch_concurrency, [&](const std::vector<int>& batch) {
        json lines = json::array();
        for (int i : batch) {
            const auto k = static_cast<std::size_t>(i);
            lines.push_back({{"line_index", i},
                             {"text", ctx.lines[k].text},
                             {"base_gloss", base_glosses.at(k)},
                             {"note", note_json(notes.at(k))}});
        }
        StructuredSpec spec;
        spec.validator = [&batch](const json& r) -> std::optional<std::string> {
            const auto& g = r.at("guides");
            if (auto err = check_coverage(g, batch)) return err;
            for (const auto& e : g) {
                if (!e.contains("mood_hashtags") || !e["mood_hashtags"].is_array()) return "mood_hashtags must be an array";
                const auto& tags = e["mood_hashtags"];
                if (tags.empty() || tags.size() > kMaxHashtags) return "mood_hashtags must hold 1 to 5 hashtags";
                for (const auto& t : tags) {
                    if (!t.is_string() || t.get<std::string>().size() < 2 || t.get<std::string>()[0] != '#') {
                        return "every hashtag must start with # and name a mood";
                    }
                }
                if (auto err = check_string_field(e, "performance_guide", true)) return err;
            }
            return std::nullopt;
        };
        return complete_batch(llm, Stage::performance_guide, ctx, batch, lines, "guides", spec).record.at("guides");
    });
    for (const auto& batch_guides : results) {
        for (const auto& e : batch_guides) {
            PerformanceGuide g;
            g.mood_hashtags = e.at("mood_hashtags").get<std::vector<std::string>>();
            g.performance_guide = truncate_guide(normalize_whitespace(e.at("performance_guide").get<std::string>()));
            guides[static_cast<std::size_t>(e.at("line_index").get<int>())] = std::move(g);
        }
    }
    return guides;
}

std::vector<AltGlosses> generate_alternatives(LlmClient& llm, const PipelineContext& ctx,
                                              const std::vector<std::string>& base_glosses,
                                              const std::vector<ChallengeNote>& notes, const PipelineOptions& options) {
    std::vector<AltGlosses> alts(ctx.lines.size());
    const auto batches = batches_for(ctx, options);
    const auto results = run_batches(batches, options.batch_concurrency, [&](const std::vector<int>& batch) {
        json lines = json::array();
        for (int i : batch) {
            const auto k = static_cast<std::size_t>(i);
            lines.push_back({{"line_index", i},
                             {"text", ctx.lines[k].text},
                             {"base_gloss", base_glosses.at(k)},
                             {"note", note_json(notes.at(k))}});
        }
        StructuredSpec spec;
        spec.validator = [&batch, &base_glosses](const json& r) -> std::optional<std::string> {
            const auto& a = r.at("alternatives");
            if (auto err = check_coverage(a, batch)) return err;
            for (const auto& e : a) {
                for (const char* f : {"shorter", "base_alt", "longer"}) {
                    if (auto err = check_gloss(e, f)) return err;
                }
                const int i = e["line_index"].get<int>();
                const auto base = gloss_token_count(base_glosses.at(static_cast<std::size_t>(i)));
                const auto s = gloss_token_count(e["shorter"].get<std::string>());
                const auto m = gloss_token_count(e["base_alt"].get<std::string>());
                const auto l = gloss_token_count(e["longer"].get<std::string>());
                const std::string where = " for line " + std::to_string(i);
                if (base > 1 && s >= base) return "shorter must have fewer tokens than the base gloss" + where;
                if (s > base) return "shorter must not have more tokens than the base gloss" + where;
                if (l < base) return "longer must have at least as many tokens as the base gloss" + where;
                if (s > m || m > l) return "token counts must satisfy shorter <= base_alt <= longer" + where;
            }
            return std::nullopt;
        };
        return complete_batch(llm, Stage::alternative_gloss, ctx, batch, lines, "alternatives", spec)
            .record.at("alternatives");
    });
    for (const auto& batch_alts : results) {
        for (const auto& e : batch_alts) {
            AltGlosses a;
            a.shorter = render_gloss(tokenize_gloss(e.at("shorter").get<std::string>()));
            a.base_alt = render_gloss(tokenize_gloss(e.at("base_alt").get<std::string>()));
            a.longer = render_gloss(tokenize_gloss(e.at("longer").get<std::string>()));
            alts[static_cast<std::size_t>(e.at("line_index").get<int>())] = std::move(a);
        }
    }
    return alts;
}

std::vector<LineAnnotation> assemble_annotations(const StageArtifacts& artifacts, std::size_t line_count) {
    if (!artifacts.notes || !artifacts.base_glosses || !artifacts.guides || !artifacts.alternatives) {
        throw Error(ErrorCode::NotReady, "preprocessing has not finished");
    }
    std::vector<LineAnnotation> out(line_count);
    for (std::size_t i = 0; i < line_count; ++i) {
        auto& a = out[i];
        a.line_index = static_cast<int>(i);
        a.challenge = artifacts.notes->at(i);
        a.base_gloss = artifacts.base_glosses->at(i);
        a.alt_glosses = artifacts.alternatives->at(i);
        a.mood_hashtags = artifacts.guides->at(i).mood_hashtags;
        a.performance_guide = artifacts.guides->at(i).performance_guide;
    }
    return out;
}

std::string export_annotations(const std::vector<LineAnnotation>& annotations) {
    return json(annotations).dump(2) + "\n";
}

PreprocessResult run_preprocess(SongProject& project, const std::vector<LyricLine>& lines, LlmClient& llm,
                                ArtifactStore& store, const PipelineOptions& options) {
    if (lines.empty()) throw Error(ErrorCode::EmptyDocument, "no lyric lines to preprocess");
    project.transition(ProjectStatus::preprocessing);
    PreprocessResult result;
    usable_lines(lines, &result.warnings);
    const PipelineContext ctx{project, lines};
    auto& art = result.artifacts;

    // Every hash covers the shared context plus the artifacts the stage reads,
    // so an upstream change invalidates everything downstream.
    json context = {{"title", project.title},
                    {"artist", project.artist},
                    {"song_description", project.song_description},
                    {"sign_language", to_string(project.sign_language)},
                    {"user_profile", project.user_profile},
                    {"lines", json::array()},
                    {"batch_lines", options.batch_lines}};
    for (const auto& l : lines) context["lines"].push_back({{"section", l.section}, {"text", l.text}});

    auto input_hash = [&](Stage stage) {
        json in = {{"stage", to_string(stage)}, {"context", context}};
        if (stage != Stage::line_inspector) in["notes"] = *art.notes;
        if (stage == Stage::performance_guide || stage == Stage::alternative_gloss) in["base_glosses"] = *art.base_glosses;
        return stable_hash(in.dump());
    };

    auto compute = [&](Stage stage) -> json {
        switch (stage) {
        case Stage::line_inspector: return inspect_lines(llm, ctx, options);
        case Stage::base_gloss: return generate_base_gloss(llm, ctx, *art.notes, options);
        case Stage::performance_guide: return generate_performance_guides(llm, ctx, *art.base_glosses, *art.notes, options);
        case Stage::alternative_gloss: return generate_alternatives(llm, ctx, *art.base_glosses, *art.notes, options);
        }
        return nullptr;
    };

    auto keep = [&](Stage stage, const json& j) {
        switch (stage) {
        case Stage::line_inspector: art.notes = j.get<std::vector<ChallengeNote>>(); break;
        case Stage::base_gloss: art.base_glosses = j.get<std::vector<std::string>>(); break;
        case Stage::performance_guide: art.guides = j.get<std::vector<PerformanceGuide>>(); break;
        case Stage::alternative_gloss: art.alternatives = j.get<std::vector<AltGlosses>>(); break;
        }
    };

    bool forced = false;
    for (Stage stage : kStages) {
        forced = forced || (options.from_stage && *options.from_stage == stage);
        const auto hash = input_hash(stage);
        if (options.on_stage_start) options.on_stage_start(stage);
        if (!forced) {
            if (auto cached = store.get_artifact(project.id, stage, hash)) {
                keep(stage, *cached);
                result.reused.push_back(stage);
                if (options.on_stage_done) options.on_stage_done(stage, true);
                continue;
            }
        }
        try {
            const json produced = compute(stage);
            store.put_artifact(project.id, stage, hash, produced);
            keep(stage, produced);
            result.computed.push_back(stage);
            if (options.on_stage_done) options.on_stage_done(stage, false);
        } catch (const Error& e) {
            json details = e.details();
            details["stage"] = to_string(stage);
            result.failed_stage = stage;
            result.error = Error(e.code(), e.what(), details);
            project.transition(ProjectStatus::failed);
            return result;
        }
    }
    result.annotations = assemble_annotations(art, lines.size());
    project.transition(ProjectStatus::ready);
    return result;
}

} // namespace songsign
