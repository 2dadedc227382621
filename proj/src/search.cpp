#include "gridzoom/search.hpp"

#include "gridzoom/backends.hpp"
#include "gridzoom/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <numeric>
#include <queue>
#include <thread>

namespace gridzoom {

using nlohmann::json;

const char* to_string(StopReason reason) {
    switch (reason) {
    case StopReason::leaf_size: return "leaf_size";
    case StopReason::depth_cap: return "depth_cap";
    case StopReason::evidence: return "evidence";
    case StopReason::budget_flush: return "budget_flush";
    }
    return "unknown";
}

void SearchConfig::validate() const {
    if (min_unit < 1) fail(ErrorCode::bad_config, "min_unit must be >= 1");
    if (max_depth < 1) fail(ErrorCode::bad_config, "max_depth must be >= 1");
    if (pop_budget < 1) fail(ErrorCode::bad_config, "pop_budget must be >= 1");
    if (max_children < 1 || max_children > 9) {
        fail(ErrorCode::bad_config, "max_children must be in [1,9]");
    }
    if (!(keep_threshold > 0.0 && keep_threshold < 1.0)) {
        fail(ErrorCode::bad_config, "keep_threshold must be in (0,1)");
    }
    if (!(evidence_start > 0.0 && evidence_start <= 2.0)) {
        fail(ErrorCode::bad_config, "evidence_start must be in (0,2]");
    }
    if (evidence_decay < 0.0) fail(ErrorCode::bad_config, "evidence_decay must be >= 0");
    if (!(fusion.bias >= 0.0 && fusion.bias < 1.0)) {
        fail(ErrorCode::bad_config, "fusion bias must be in [0,1)");
    }
    if (fixed_k < 1 || fixed_k > 9) fail(ErrorCode::bad_config, "fixed_k must be in [1,9]");
    if (score_threads < 0) fail(ErrorCode::bad_config, "score_threads must be >= 0");
}

double evidence_threshold(int depth, double start, double decay) {
    if (depth < 1) fail(ErrorCode::bad_argument, "depth must be >= 1");
    return std::max(0.0, start - (depth - 1) * decay);
}

std::optional<StopReason> should_stop(const Region& region, const ScoreBundle& score,
                                      const SearchConfig& config) {
    if (region.max_side() <= config.min_unit) return StopReason::leaf_size;
    if (region.depth >= config.max_depth) return StopReason::depth_cap;
    if (score.evidence >=
        evidence_threshold(region.depth, config.evidence_start, config.evidence_decay)) {
        return StopReason::evidence;
    }
    return std::nullopt;
}

std::vector<int> select_children(std::span<const ScoreBundle> children,
                                 const SearchConfig& config) {
    std::vector<int> order(children.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int lhs, int rhs) {
        return children[static_cast<std::size_t>(lhs)].normalized >
               children[static_cast<std::size_t>(rhs)].normalized;
    });

    if (config.branching == BranchingMode::fixed_topk) {
        order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(config.fixed_k)));
        return order;
    }

    std::vector<int> kept;
    for (int idx : order) {
        if (children[static_cast<std::size_t>(idx)].normalized >= config.keep_threshold) {
            kept.push_back(idx);
        }
    }
    if (kept.empty() && !order.empty()) {
        kept.push_back(order.front());
    }
    if (kept.size() > static_cast<std::size_t>(config.max_children)) {
        kept.resize(static_cast<std::size_t>(config.max_children));
    }
    return kept;
}

// ---------------------------------------------------------------------------
// PatchScorer
// ---------------------------------------------------------------------------

PatchScorer::PatchScorer(const Image& image, std::string question, RelevanceBackend& relevance,
                         EvidenceBackend& evidence, const SearchConfig& config)
    : image_(image),
      question_(std::move(question)),
      relevance_(relevance),
      evidence_(evidence),
      config_(config),
      parallel_ok_(relevance.concurrent_safe() && evidence.concurrent_safe()) {}

ScoreBundle PatchScorer::score(const Region& region) const {
    return score_patch(region, question_, relevance_, evidence_, image_, config_.min_unit,
                       config_.fusion);
}

std::vector<ScoreBundle> PatchScorer::score_group(std::span<const Region> regions) const {
    std::vector<ScoreBundle> bundles(regions.size());
    int threads = config_.score_threads;
    if (threads == 0) {
        threads = static_cast<int>(std::thread::hardware_concurrency());
    }
    threads = std::min<int>({threads, static_cast<int>(regions.size()), 9});

    if (!parallel_ok_ || threads <= 1) {
        for (std::size_t i = 0; i < regions.size(); ++i) {
            bundles[i] = score(regions[i]);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr first_error;
        std::mutex error_mutex;
        auto worker = [&] {
            for (std::size_t i = next.fetch_add(1); i < regions.size(); i = next.fetch_add(1)) {
                try {
                    bundles[i] = score(regions[i]);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    finalize_group(bundles, config_.fusion.normalization);
    return bundles;
}

std::vector<FrontierNode> expand(const FrontierNode& node, const PatchScorer& scorer,
                                 const SearchConfig& config) {
    const std::array<Region, 9> children = split3x3(node.region);
    const std::vector<ScoreBundle> scores =
        scorer.score_group(std::span<const Region>(children.data(), children.size()));
    const std::vector<int> kept = select_children(scores, config);

    std::vector<FrontierNode> out;
    out.reserve(kept.size());
    for (int idx : kept) {
        out.push_back(FrontierNode{children[static_cast<std::size_t>(idx)],
                                   scores[static_cast<std::size_t>(idx)], 0});
    }
    return out;
}

// ---------------------------------------------------------------------------
// run_search
// ---------------------------------------------------------------------------

namespace {

// Max-queue order: normalized score, then depth, then FIFO insertion.
struct LowerPriority {
    bool operator()(const FrontierNode& a, const FrontierNode& b) const {
        if (a.score.normalized != b.score.normalized) {
            return a.score.normalized < b.score.normalized;
        }
        if (a.region.depth != b.region.depth) {
            return a.region.depth < b.region.depth;
        }
        return a.sequence > b.sequence;
    }
};

} // namespace

SearchResult run_search(const Image& image, const std::string& question,
                        RelevanceBackend& relevance, EvidenceBackend& evidence,
                        const SearchConfig& config) {
    config.validate();
    if (image.width() < 3 || image.height() < 3) {
        fail(ErrorCode::bad_image, "search requires an image of at least 3x3 px");
    }

    SearchResult result;
    SearchTrace& trace = result.trace;
    trace.image_width = image.width();
    trace.image_height = image.height();
    trace.question = question;

    PatchScorer scorer(image, question, relevance, evidence, config);

    std::priority_queue<FrontierNode, std::vector<FrontierNode>, LowerPriority> frontier;
    std::uint64_t next_sequence = 1;

    auto commit = [&](const Region& region, const ScoreBundle& score, StopReason reason) {
        result.selection.patches.push_back(SelectedPatch{region, score, reason});
    };

    // Nine depth-1 roots: commit the finished ones, enqueue the rest.
    const std::array<Region, 9> roots = split3x3(full_region(image.width(), image.height()));
    std::vector<ScoreBundle> root_scores =
        scorer.score_group(std::span<const Region>(roots.data(), roots.size()));

    std::vector<int> pending;
    std::array<std::optional<StopReason>, 9> root_stop;
    for (int j = 0; j < 9; ++j) {
        root_stop[static_cast<std::size_t>(j)] = should_stop(
            roots[static_cast<std::size_t>(j)], root_scores[static_cast<std::size_t>(j)],
            config);
        if (!root_stop[static_cast<std::size_t>(j)]) pending.push_back(j);
    }
    if (config.branching == BranchingMode::fixed_topk) {
        // Fixed top-k truncates at every level, the root split included.
        std::stable_sort(pending.begin(), pending.end(), [&](int lhs, int rhs) {
            return root_scores[static_cast<std::size_t>(lhs)].normalized >
                   root_scores[static_cast<std::size_t>(rhs)].normalized;
        });
        pending.resize(std::min<std::size_t>(pending.size(),
                                             static_cast<std::size_t>(config.fixed_k)));
        std::sort(pending.begin(), pending.end());
    }
    for (int j = 0; j < 9; ++j) {
        TraceEvent event;
        event.kind = TraceEventKind::root;
        event.region = roots[static_cast<std::size_t>(j)];
        event.score = root_scores[static_cast<std::size_t>(j)];
        if (root_stop[static_cast<std::size_t>(j)]) {
            event.committed = true;
            event.reason = root_stop[static_cast<std::size_t>(j)];
            commit(event.region, event.score, *event.reason);
        } else if (std::find(pending.begin(), pending.end(), j) != pending.end()) {
            event.enqueued = true;
            frontier.push(FrontierNode{roots[static_cast<std::size_t>(j)],
                                       root_scores[static_cast<std::size_t>(j)],
                                       next_sequence++});
        }
        trace.events.push_back(std::move(event));
    }

    while (!frontier.empty() && trace.pops < config.pop_budget) {
        FrontierNode node = frontier.top();
        frontier.pop();
        trace.pops += 1;

        TraceEvent event;
        event.kind = TraceEventKind::pop;
        event.sequence = trace.pops;
        event.region = node.region;
        event.score = node.score;

        std::optional<StopReason> reason = should_stop(node.region, node.score, config);
        if (!reason && (node.region.width() < 3 || node.region.height() < 3)) {
            // Too small for a 3x3 split; treat as a forced leaf.
            reason = StopReason::leaf_size;
        }
        if (reason) {
            event.committed = true;
            event.reason = reason;
            commit(node.region, node.score, *reason);
        } else {
            std::vector<FrontierNode> kept = expand(node, scorer, config);
            trace.expansions += 1;
            for (FrontierNode& child : kept) {
                child.sequence = next_sequence++;
                event.kept.push_back(TraceKeptChild{child.region, child.score});
                frontier.push(std::move(child));
            }
        }
        trace.events.push_back(std::move(event));
    }

    if (frontier.empty()) {
        trace.termination = "frontier_exhausted";
    } else {
        trace.termination = "budget_exhausted";
        // Budget flush: salvage the best already-scored frontier nodes.
        std::vector<FrontierNode> rest;
        while (!frontier.empty()) {
            rest.push_back(frontier.top());
            frontier.pop();
        }
        int flushed = 0;
        for (const FrontierNode& node : rest) {
            if (flushed >= config.max_children) break;
            if (node.score.normalized < config.keep_threshold) break;
            TraceEvent event;
            event.kind = TraceEventKind::flush;
            event.region = node.region;
            event.score = node.score;
            event.committed = true;
            event.reason = StopReason::budget_flush;
            trace.events.push_back(std::move(event));
            commit(node.region, node.score, StopReason::budget_flush);
            ++flushed;
        }
        if (result.selection.empty()) {
            const FrontierNode& best = rest.front();
            TraceEvent event;
            event.kind = TraceEventKind::flush;
            event.region = best.region;
            event.score = best.score;
            event.committed = true;
            event.reason = StopReason::budget_flush;
            trace.events.push_back(std::move(event));
            commit(best.region, best.score, StopReason::budget_flush);
        }
    }

    if (result.selection.empty()) {
        fail(ErrorCode::empty_selection, "search committed no regions");
    }
    return result;
}

NodeBound node_bound(std::int64_t long_side, int min_unit, int max_children,
                     std::uint64_t pop_budget) {
    if (min_unit < 1 || long_side < min_unit) {
        fail(ErrorCode::bad_argument, "node_bound requires long_side >= min_unit >= 1");
    }
    if (max_children < 1) fail(ErrorCode::bad_argument, "max_children must be >= 1");

    NodeBound out;
    std::int64_t reach = min_unit;
    while (reach < long_side) {
        reach *= 3;
        out.depth += 1;
    }

    // Saturating sum of max_children^i for i in [0, depth).
    std::uint64_t sum = 0;
    const std::uint64_t k = static_cast<std::uint64_t>(max_children);
    bool saturated = false;
    for (int i = 0; i < out.depth && !saturated; ++i) {
        if (sum > (UINT64_MAX - 1) / k) {
            saturated = true;
        } else {
            sum = sum * k + 1;
        }
    }
    out.nodes = saturated ? pop_budget : std::min(pop_budget, sum);
    return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

json region_json(const Region& region) {
    return json::array({region.x0, region.y0, region.x1, region.y1});
}

json path_json(const Region& region) {
    json arr = json::array();
    for (std::uint8_t p : region.path) arr.push_back(static_cast<int>(p));
    return arr;
}

json score_json(const ScoreBundle& score) {
    return json{{"relevance", score.relevance},
                {"evidence", score.evidence},
                {"fused", score.fused},
                {"normalized", score.normalized}};
}

json event_json(const TraceEvent& event) {
    json line;
    switch (event.kind) {
    case TraceEventKind::root: line["type"] = "root"; break;
    case TraceEventKind::pop: line["type"] = "pop"; break;
    case TraceEventKind::flush: line["type"] = "flush"; break;
    }
    if (event.kind == TraceEventKind::pop) line["seq"] = event.sequence;
    line["region"] = region_json(event.region);
    line["path"] = path_json(event.region);
    line["depth"] = event.region.depth;
    line["scores"] = score_json(event.score);
    if (event.committed) {
        line["action"] = "commit";
        line["reason"] = to_string(*event.reason);
    } else if (event.kind == TraceEventKind::root) {
        line["action"] = event.enqueued ? "enqueue" : "drop";
    } else {
        line["action"] = "expand";
        json kept = json::array();
        for (const TraceKeptChild& child : event.kept) {
            kept.push_back(json{{"region", region_json(child.region)},
                                {"path", path_json(child.region)},
                                {"normalized", child.score.normalized},
                                {"evidence", child.score.evidence}});
        }
        line["kept"] = std::move(kept);
    }
    return line;
}

} // namespace

std::string trace_to_jsonl(const SearchTrace& trace) {
    std::string out;
    json meta{{"type", "meta"},
              {"image", json::array({trace.image_width, trace.image_height})},
              {"question", trace.question}};
    out += meta.dump();
    out += '\n';
    for (const TraceEvent& event : trace.events) {
        out += event_json(event).dump();
        out += '\n';
    }
    json end{{"type", "end"},
             {"pops", trace.pops},
             {"expansions", trace.expansions},
             {"termination", trace.termination}};
    out += end.dump();
    out += '\n';
    return out;
}

std::string selection_to_json(const SelectionSet& selection, int image_width,
                              int image_height) {
    json doc;
    doc["version"] = 1;
    doc["image"] = json{{"width", image_width}, {"height", image_height}};
    json patches = json::array();
    for (const SelectedPatch& patch : selection.patches) {
        json p;
        p["region"] = region_json(patch.region);
        p["path"] = path_json(patch.region);
        p["depth"] = patch.region.depth;
        p["scores"] = score_json(patch.score);
        p["reason"] = to_string(patch.reason);
        patches.push_back(std::move(p));
    }
    doc["patches"] = std::move(patches);
    return doc.dump(2);
}

SelectionSet selection_from_json(const std::string& text, int* image_width,
                                 int* image_height) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.contains("image") || !doc.contains("patches")) {
        fail(ErrorCode::bad_argument, "malformed selection JSON");
    }
    const int w = doc["image"].value("width", 0);
    const int h = doc["image"].value("height", 0);
    if (w < 1 || h < 1) fail(ErrorCode::bad_argument, "selection JSON lacks image dimensions");
    if (image_width) *image_width = w;
    if (image_height) *image_height = h;

    SelectionSet selection;
    for (const json& p : doc["patches"]) {
        SelectedPatch patch;
        std::vector<std::uint8_t> path;
        for (const json& step : p.at("path")) {
            path.push_back(static_cast<std::uint8_t>(step.get<int>()));
        }
        patch.region = region_from_path(w, h, path);
        const json& r = p.at("region");
        if (r.size() != 4 || patch.region.x0 != r[0].get<int>() ||
            patch.region.y0 != r[1].get<int>() || patch.region.x1 != r[2].get<int>() ||
            patch.region.y1 != r[3].get<int>()) {
            fail(ErrorCode::bad_argument,
                 "selection patch bbox does not match its recorded path");
        }
        if (p.contains("scores")) {
            const json& s = p["scores"];
            patch.score.relevance = s.value("relevance", 0.0);
            patch.score.evidence = s.value("evidence", 0.0);
            patch.score.fused = s.value("fused", 0.0);
            patch.score.normalized = s.value("normalized", 0.0);
        }
        patch.score.depth = patch.region.depth;
        selection.patches.push_back(std::move(patch));
    }
    if (selection.empty()) {
        fail(ErrorCode::empty_selection, "selection JSON contains no patches");
    }
    return selection;
}

} // namespace gridzoom
