#include "gridzoom/config.hpp"

#include "gridzoom/error.hpp"

#include "json.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace gridzoom {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (!known.contains(key)) {
            fail(ErrorCode::bad_config, "unknown config key \"" + key + "\" in " + where);
        }
    }
}

void parse_search(const json& obj, SearchConfig& out) {
    check_keys(obj,
               {"min_unit", "max_depth", "pop_budget", "max_children", "keep_threshold",
                "evidence_start", "evidence_decay", "score_threads"},
               "search");
    out.min_unit = obj.value("min_unit", out.min_unit);
    out.max_depth = obj.value("max_depth", out.max_depth);
    out.pop_budget = obj.value("pop_budget", out.pop_budget);
    out.max_children = obj.value("max_children", out.max_children);
    out.keep_threshold = obj.value("keep_threshold", out.keep_threshold);
    out.evidence_start = obj.value("evidence_start", out.evidence_start);
    out.evidence_decay = obj.value("evidence_decay", out.evidence_decay);
    out.score_threads = obj.value("score_threads", out.score_threads);
}

void parse_fusion(const json& obj, FusionParams& out) {
    check_keys(obj, {"bias", "prune_relevance", "prune_evidence", "normalization"}, "fusion");
    out.bias = obj.value("bias", out.bias);
    out.prune_relevance = obj.value("prune_relevance", out.prune_relevance);
    out.prune_evidence = obj.value("prune_evidence", out.prune_evidence);
    if (obj.contains("normalization")) {
        const std::string mode = obj["normalization"].get<std::string>();
        if (mode == "plain_sigmoid") {
            out.normalization = NormalizationMode::plain_sigmoid;
        } else if (mode == "sibling_standardized") {
            out.normalization = NormalizationMode::sibling_standardized;
        } else {
            fail(ErrorCode::bad_config, "unknown normalization mode: " + mode);
        }
    }
}

void parse_oracle(const json& obj, OracleParams& out) {
    check_keys(obj, {"noise", "seed", "min_resolved_px", "eval_resolution"}, "oracle");
    out.noise = obj.value("noise", out.noise);
    out.seed = obj.value("seed", out.seed);
    out.min_resolved_px = obj.value("min_resolved_px", out.min_resolved_px);
    out.eval_resolution = obj.value("eval_resolution", out.eval_resolution);
}

void parse_remote(const json& obj, RemoteOptions& relevance, RemoteOptions& evidence) {
    check_keys(obj,
               {"relevance_url", "evidence_url", "timeout_ms", "retries", "backoff_ms",
                "max_payload"},
               "backends");
    relevance.url = obj.value("relevance_url", relevance.url);
    evidence.url = obj.value("evidence_url", evidence.url);
    for (RemoteOptions* r : {&relevance, &evidence}) {
        r->timeout_ms = obj.value("timeout_ms", r->timeout_ms);
        r->retries = obj.value("retries", r->retries);
        r->backoff_ms = obj.value("backoff_ms", r->backoff_ms);
        r->max_payload = obj.value("max_payload", r->max_payload);
    }
}

} // namespace

EngineConfig config_from_json_text(const std::string& text) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        fail(ErrorCode::bad_config, "config is not a JSON object");
    }
    check_keys(doc, {"search", "fusion", "oracle", "backends", "backbone", "auto_min_unit"},
               "config");

    EngineConfig config;
    if (doc.contains("search")) parse_search(doc["search"], config.search);
    if (doc.contains("fusion")) parse_fusion(doc["fusion"], config.search.fusion);
    if (doc.contains("oracle")) parse_oracle(doc["oracle"], config.oracle);
    if (doc.contains("backends")) {
        parse_remote(doc["backends"], config.relevance_remote, config.evidence_remote);
    }
    if (doc.contains("backbone")) {
        const std::string name = doc["backbone"].get<std::string>();
        if (name == "onevision") {
            config.backbone = Backbone::onevision;
        } else if (name == "other") {
            config.backbone = Backbone::other;
        } else {
            fail(ErrorCode::bad_config, "unknown backbone class: " + name);
        }
    }
    config.auto_min_unit = doc.value("auto_min_unit", config.auto_min_unit);
    config.search.validate();
    return config;
}

EngineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io_failure, "cannot read config file " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return config_from_json_text(buffer.str());
}

void apply_env_overrides(EngineConfig& config) {
    if (const char* url = std::getenv("GRIDZOOM_RELEVANCE_URL")) {
        config.relevance_remote.url = url;
    }
    if (const char* url = std::getenv("GRIDZOOM_EVIDENCE_URL")) {
        config.evidence_remote.url = url;
    }
}

int resolved_min_unit(const EngineConfig& config, int image_width, int image_height) {
    if (config.auto_min_unit) {
        return min_search_unit(config.backbone, image_width, image_height);
    }
    return config.search.min_unit;
}

} // namespace gridzoom
