#include "gridzoom/bench.hpp"

#include "gridzoom/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <thread>

namespace gridzoom {

using nlohmann::json;

const char* to_string(Branching branching) {
    switch (branching) {
    case Branching::adaptive: return "adaptive";
    case Branching::top1: return "top1";
    case Branching::top2: return "top2";
    case Branching::top3: return "top3";
    }
    return "unknown";
}

Branching branching_from_name(const std::string& name) {
    if (name == "adaptive") return Branching::adaptive;
    if (name == "top1") return Branching::top1;
    if (name == "top2") return Branching::top2;
    if (name == "top3") return Branching::top3;
    fail(ErrorCode::bad_argument, "unknown branching strategy: " + name);
}

SearchConfig branching_config(const SearchConfig& base, Branching branching) {
    SearchConfig config = base;
    switch (branching) {
    case Branching::adaptive:
        config.branching = BranchingMode::adaptive;
        break;
    case Branching::top1:
        config.branching = BranchingMode::fixed_topk;
        config.fixed_k = 1;
        break;
    case Branching::top2:
        config.branching = BranchingMode::fixed_topk;
        config.fixed_k = 2;
        break;
    case Branching::top3:
        config.branching = BranchingMode::fixed_topk;
        config.fixed_k = 3;
        break;
    }
    return config;
}

double coverage_recall(std::span<const PlantedTarget> targets, const SelectionSet& selection,
                       double threshold) {
    if (targets.empty()) return 1.0;
    int covered_count = 0;
    for (const PlantedTarget& target : targets) {
        long long covered = 0;
        for (const SelectedPatch& patch : selection.patches) {
            covered += rect_overlap(patch.region.x0, patch.region.y0, patch.region.x1,
                                    patch.region.y1, target.x0, target.y0, target.x1,
                                    target.y1);
        }
        if (static_cast<double>(covered) >= threshold * static_cast<double>(target.area())) {
            ++covered_count;
        }
    }
    return static_cast<double>(covered_count) / static_cast<double>(targets.size());
}

BenchAggregates compute_aggregates(std::span<const SceneRow> rows) {
    BenchAggregates agg;
    if (rows.empty()) return agg;
    std::vector<double> recalls;
    recalls.reserve(rows.size());
    for (const SceneRow& row : rows) {
        agg.mean_recall += row.recall;
        agg.mean_pops += static_cast<double>(row.pops);
        agg.mean_wall_ms += row.wall_ms;
        recalls.push_back(row.recall);
    }
    const double n = static_cast<double>(rows.size());
    agg.mean_recall /= n;
    agg.mean_pops /= n;
    agg.mean_wall_ms /= n;
    std::sort(recalls.begin(), recalls.end());
    const std::size_t mid = recalls.size() / 2;
    agg.median_recall = recalls.size() % 2 == 1
                            ? recalls[mid]
                            : 0.5 * (recalls[mid - 1] + recalls[mid]);
    return agg;
}

BenchmarkReport run_benchmark(const BenchOptions& options) {
    if (options.scenes < 1) fail(ErrorCode::bad_argument, "benchmark needs at least one scene");
    const SearchConfig config = branching_config(options.config, options.branching);
    config.validate();

    BenchmarkReport report;
    report.options = options;
    report.rows.resize(static_cast<std::size_t>(options.scenes));

    auto run_scene = [&](int index) {
        SceneOptions scene_options = options.scene;
        scene_options.seed = options.seed0 + static_cast<std::uint64_t>(index);
        scene_options.min_unit = config.min_unit;
        const SyntheticScene scene = generate_scene(scene_options);

        OracleRelevance relevance(scene.targets, options.oracle);
        CachedRelevance cached(relevance);
        OracleEvidence evidence(scene.targets, options.oracle);
        const std::string question = scene_question(scene);

        ReassemblyOptions reassembly_options;
        reassembly_options.sequential_tile = config.min_unit;

        const auto t0 = std::chrono::steady_clock::now();
        SearchResult result = run_search(scene.image, question, cached, evidence, config);
        const Canvas canvas =
            reassemble(scene.image, result.selection, options.strategy, reassembly_options);
        const auto t1 = std::chrono::steady_clock::now();

        SceneRow row;
        row.seed = scene_options.seed;
        row.recall = coverage_recall(scene.targets, result.selection,
                                     options.coverage_threshold);
        row.pops = result.trace.pops;
        row.expansions = result.trace.expansions;
        row.committed = static_cast<int>(result.selection.size());
        row.canvas_width = canvas.image.width();
        row.canvas_height = canvas.image.height();
        row.termination = result.trace.termination;
        row.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        if (options.capture_traces) {
            row.trace = trace_to_jsonl(result.trace);
        }
        report.rows[static_cast<std::size_t>(index)] = std::move(row);
    };

    int jobs = options.jobs > 0 ? options.jobs
                                : static_cast<int>(std::thread::hardware_concurrency());
    jobs = std::clamp(jobs, 1, options.scenes);

    if (jobs == 1) {
        for (int i = 0; i < options.scenes; ++i) run_scene(i);
    } else {
        std::atomic<int> next{0};
        std::exception_ptr first_error;
        std::mutex error_mutex;
        auto worker = [&] {
            for (int i = next.fetch_add(1); i < options.scenes; i = next.fetch_add(1)) {
                try {
                    run_scene(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(jobs));
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    report.aggregates = compute_aggregates(report.rows);
    return report;
}

std::string report_to_json(const BenchmarkReport& report, bool include_timing) {
    const BenchOptions& o = report.options;
    json doc;
    doc["version"] = 1;
    doc["options"] = json{
        {"scenes", o.scenes},
        {"seed0", o.seed0},
        {"side", o.scene.side},
        {"targets", o.scene.targets},
        {"distinct_roots", o.scene.distinct_roots},
        {"branching", to_string(o.branching)},
        {"strategy", to_string(o.strategy)},
        {"coverage_threshold", o.coverage_threshold},
        {"config",
         json{{"min_unit", o.config.min_unit},
              {"max_depth", o.config.max_depth},
              {"pop_budget", o.config.pop_budget},
              {"max_children", o.config.max_children},
              {"keep_threshold", o.config.keep_threshold},
              {"evidence_start", o.config.evidence_start},
              {"evidence_decay", o.config.evidence_decay},
              {"bias", o.config.fusion.bias},
              {"prune_relevance", o.config.fusion.prune_relevance},
              {"prune_evidence", o.config.fusion.prune_evidence}}},
        {"oracle", json{{"noise", o.oracle.noise},
                        {"seed", o.oracle.seed},
                        {"min_resolved_px", o.oracle.min_resolved_px},
                        {"eval_resolution", o.oracle.eval_resolution}}}};

    json rows = json::array();
    for (const SceneRow& row : report.rows) {
        json r{{"seed", row.seed},
               {"recall", row.recall},
               {"pops", row.pops},
               {"expansions", row.expansions},
               {"committed", row.committed},
               {"canvas", json::array({row.canvas_width, row.canvas_height})},
               {"termination", row.termination}};
        if (include_timing) r["wall_ms"] = row.wall_ms;
        if (!row.trace.empty()) r["trace_jsonl"] = row.trace;
        rows.push_back(std::move(r));
    }
    doc["rows"] = std::move(rows);

    json agg{{"mean_recall", report.aggregates.mean_recall},
             {"median_recall", report.aggregates.median_recall},
             {"mean_pops", report.aggregates.mean_pops}};
    if (include_timing) agg["mean_wall_ms"] = report.aggregates.mean_wall_ms;
    doc["aggregates"] = std::move(agg);
    return doc.dump(2);
}

} // namespace gridzoom
