#include "songsign/gloss.hpp"
#include "songsign/service.hpp"

namespace songsign {

using nlohmann::json;

LineAnalytics analyze_line(int line_index, const std::vector<GlossVariant>& variants) {
    if (variants.empty()) {
        throw Error(ErrorCode::InvalidArgument, "line " + std::to_string(line_index) + " has no gloss variants");
    }
    LineAnalytics out;
    out.line_index = line_index;
    std::vector<int> counts;
    std::vector<WordSet> sets;
    for (const auto& v : variants) {
        const auto tokens = tokenize_gloss(v.raw);
        const auto m = gloss_metrics(tokens);
        out.variants.push_back({v.label, v.raw, m});
        counts.push_back(m.sign_count);
        sets.push_back(manual_sign_set(tokens));
    }
    out.sign_stats = sign_stats(counts);
    out.mean_overlap = mean_pairwise_overlap(sets);
    return out;
}

AnalyticsReport analyze_lines(const std::vector<std::pair<int, std::vector<GlossVariant>>>& lines) {
    AnalyticsReport r;
    Rational sum;
    std::int64_t n = 0;
    for (const auto& [index, variants] : lines) {
        r.lines.push_back(analyze_line(index, variants));
        if (const auto& o = r.lines.back().mean_overlap) {
            sum += *o;
            ++n;
        }
    }
    if (n > 0) r.mean_overlap = sum / Rational(n);
    return r;
}

AnalyticsReport analyze_corpus(const json& corpus) {
    if (!corpus.is_object() || !corpus.contains("lines") || !corpus.at("lines").is_array()) {
        throw Error(ErrorCode::InvalidArgument, "corpus must be an object with a \"lines\" array", {{"field", "lines"}});
    }
    std::vector<std::pair<int, std::vector<GlossVariant>>> lines;
    for (const auto& l : corpus.at("lines")) {
        std::vector<GlossVariant> variants;
        int k = 0;
        for (const auto& g : l.at("glosses")) {
            if (g.is_string()) {
                variants.push_back({"#" + std::to_string(++k), g.get<std::string>()});
            } else {
                ++k;
                variants.push_back({g.value("label", "#" + std::to_string(k)), g.at("raw").get<std::string>()});
            }
        }
        lines.emplace_back(l.at("line_index").get<int>(), std::move(variants));
    }
    return analyze_lines(lines);
}

namespace {

json rational_json(const Rational& r) { return {{"rational", r.str()}, {"percent", r.percent()}}; }

} // namespace

json to_json(const AnalyticsReport& r) {
    json lines = json::array();
    for (const auto& l : r.lines) {
        json variants = json::array();
        for (const auto& v : l.variants) {
            variants.push_back({{"label", v.label},
                                {"raw", v.raw},
                                {"sign_count", v.metrics.sign_count},
                                {"nms_count", v.metrics.nms_count}});
        }
        json stats = {{"min", l.sign_stats.min},
                      {"max", l.sign_stats.max},
                      {"mean", l.sign_stats.mean.str()},
                      {"mean_value", l.sign_stats.mean.to_double()},
                      {"std", l.sign_stats.stddev ? json(*l.sign_stats.stddev) : json(nullptr)}};
        json line = {{"line_index", l.line_index}, {"variants", variants}, {"sign_count", stats}};
        if (l.mean_overlap) line["overlap"] = rational_json(*l.mean_overlap);
        lines.push_back(std::move(line));
    }
    json out = {{"lines", lines}};
    out["mean_overlap"] = r.mean_overlap ? rational_json(*r.mean_overlap) : json(nullptr);
    return out;
}

} // namespace songsign
