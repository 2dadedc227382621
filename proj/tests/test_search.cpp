#include "doctest.h"

#include "gridzoom/backends.hpp"
#include "gridzoom/error.hpp"
#include "gridzoom/scene.hpp"
#include "gridzoom/search.hpp"

#include <algorithm>
#include <set>
#include <vector>

using namespace gridzoom;

namespace {

ScoreBundle bundle_with(double normalized, double evidence = 0.0, int depth = 2) {
    ScoreBundle b;
    b.normalized = normalized;
    b.evidence = evidence;
    b.depth = depth;
    return b;
}

// Independent leaf enumeration: recursive descent collecting the first
// regions whose max side fits the unit.
void enumerate_leaves(const Region& region, int unit, std::vector<Region>& out) {
    if (region.max_side() <= unit) {
        out.push_back(region);
        return;
    }
    for (const Region& child : split3x3(region)) {
        enumerate_leaves(child, unit, out);
    }
}

std::vector<Region> sorted_regions(std::vector<Region> regions) {
    std::sort(regions.begin(), regions.end(), [](const Region& a, const Region& b) {
        return a.path < b.path;
    });
    return regions;
}

SearchConfig oracle_config() {
    SearchConfig config;
    config.min_unit = 224;
    config.pop_budget = 60;
    return config;
}

} // namespace

TEST_CASE("evidence_threshold schedule") {
    CHECK(evidence_threshold(1, 1.0, 0.1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(evidence_threshold(3, 1.0, 0.1) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(evidence_threshold(12, 1.0, 0.1) == doctest::Approx(0.0));
    for (int d = 1; d <= 11; ++d) {
        CHECK(evidence_threshold(d, 1.0, 0.1) ==
              doctest::Approx(std::max(0.0, 1.0 - (d - 1) * 0.1)).epsilon(1e-12));
    }
}

TEST_CASE("should_stop reports criteria in priority order") {
    SearchConfig config = oracle_config();

    SUBCASE("leaf size") {
        const Region r{0, 0, 224, 100, 3, {0, 0, 0}};
        CHECK(should_stop(r, bundle_with(0.5, 0.0, 3), config) == StopReason::leaf_size);
    }
    SUBCASE("depth cap") {
        config.max_depth = 50;
        const Region r{0, 0, 500, 500, 50, std::vector<std::uint8_t>(50, 0)};
        CHECK(should_stop(r, bundle_with(0.5, 0.0, 50), config) == StopReason::depth_cap);
    }
    SUBCASE("evidence") {
        const Region r{0, 0, 500, 500, 2, {0, 0}};
        CHECK(should_stop(r, bundle_with(0.5, 0.95, 2), config) == StopReason::evidence);
        CHECK(should_stop(r, bundle_with(0.5, 0.85, 2), config) == std::nullopt);
    }
    SUBCASE("leaf size wins when several criteria hold") {
        config.max_depth = 2;
        const Region r{0, 0, 100, 100, 2, {0, 0}};
        CHECK(should_stop(r, bundle_with(0.5, 1.0, 2), config) == StopReason::leaf_size);
    }
    SUBCASE("evidence uses >= comparison") {
        const Region r{0, 0, 500, 500, 3, {0, 0, 0}};
        CHECK(should_stop(r, bundle_with(0.5, 0.8, 3), config) == StopReason::evidence);
    }
}

TEST_CASE("select_children keep rules") {
    SearchConfig config = oracle_config();

    SUBCASE("adaptive keeps everything at or above the threshold") {
        std::vector<ScoreBundle> children{
            bundle_with(0.72), bundle_with(0.65), bundle_with(0.61), bundle_with(0.58),
            bundle_with(0.55), bundle_with(0.50), bundle_with(0.45), bundle_with(0.40),
            bundle_with(0.35)};
        const auto kept = select_children(children, config);
        CHECK(kept == std::vector<int>{0, 1, 2});
    }
    SUBCASE("all below threshold keeps exactly the best child") {
        std::vector<ScoreBundle> children(9, bundle_with(0.3));
        children[4].normalized = 0.45;
        const auto kept = select_children(children, config);
        CHECK(kept == std::vector<int>{4});
    }
    SUBCASE("truncates to max_children") {
        std::vector<ScoreBundle> children(9, bundle_with(0.9));
        children[8].normalized = 0.2;
        const auto kept = select_children(children, config);
        CHECK(kept.size() == 6);
        CHECK(std::set<int>(kept.begin(), kept.end()) == std::set<int>{0, 1, 2, 3, 4, 5});
    }
    SUBCASE("threshold comparison is >=") {
        std::vector<ScoreBundle> children(9, bundle_with(0.2));
        children[0].normalized = 0.6;
        children[1].normalized = 0.6;
        const auto kept = select_children(children, config);
        CHECK(kept == std::vector<int>{0, 1});
    }
    SUBCASE("fixed mode keeps exactly k regardless of the threshold") {
        config.branching = BranchingMode::fixed_topk;
        config.fixed_k = 3;
        std::vector<ScoreBundle> children(9, bundle_with(0.1));
        children[2].normalized = 0.3;
        children[7].normalized = 0.2;
        const auto kept = select_children(children, config);
        CHECK(kept == std::vector<int>{2, 7, 0});
    }
}

TEST_CASE("run_search finds a planted target in coarse cell (2,2)") {
    SceneOptions scene_options;
    scene_options.seed = 5;
    scene_options.side = 2048;
    scene_options.targets = 1;
    scene_options.forced_roots = {8};
    scene_options.min_unit = 224;
    const SyntheticScene scene = generate_scene(scene_options);
    REQUIRE(scene.targets.size() == 1);

    OracleRelevance relevance(scene.targets);
    CachedRelevance cached(relevance);
    OracleEvidence evidence(scene.targets);
    const SearchConfig config = oracle_config();

    const SearchResult result =
        run_search(scene.image, scene_question(scene), cached, evidence, config);

    const PlantedTarget& target = scene.targets[0];
    long long covered = 0;
    for (const SelectedPatch& patch : result.selection.patches) {
        covered += rect_overlap(patch.region.x0, patch.region.y0, patch.region.x1,
                                patch.region.y1, target.x0, target.y0, target.x1, target.y1);
    }
    CHECK(covered == target.area());

    // No committed region outside the target's coarse cell clears the keep bar.
    for (const SelectedPatch& patch : result.selection.patches) {
        if (patch.region.path.front() != 8) {
            CHECK(patch.score.normalized < config.keep_threshold);
        }
    }
}

TEST_CASE("run_search on a zero-relevance scene terminates within budget") {
    SceneOptions scene_options;
    scene_options.seed = 9;
    scene_options.side = 729;
    scene_options.min_unit = 81;
    const SyntheticScene scene = generate_scene(scene_options);

    // A target bbox far outside the image: relevance 0 everywhere, evidence 0.
    const std::vector<PlantedTarget> no_targets{
        PlantedTarget{100000, 100000, 100001, 100001, "target-0", Rgb{0, 0, 0}}};
    OracleRelevance relevance(no_targets);
    OracleEvidence evidence(no_targets);
    SearchConfig config;
    config.min_unit = 81;
    config.pop_budget = 200;

    const SearchResult result =
        run_search(scene.image, "locate target-0", relevance, evidence, config);
    CHECK(result.trace.pops <= config.pop_budget);
    CHECK(result.trace.termination == "frontier_exhausted");
    for (const SelectedPatch& patch : result.selection.patches) {
        CHECK(patch.reason == StopReason::leaf_size);
    }

    SUBCASE("tight budget flushes instead") {
        config.pop_budget = 5;
        const SearchResult flushed =
            run_search(scene.image, "locate target-0", relevance, evidence, config);
        CHECK(flushed.trace.pops == 5);
        CHECK(flushed.trace.termination == "budget_exhausted");
        CHECK_FALSE(flushed.selection.empty());
    }
}

TEST_CASE("run_search covers two targets planted in distinct coarse cells") {
    SceneOptions scene_options;
    scene_options.seed = 31;
    scene_options.side = 4096;
    scene_options.targets = 2;
    scene_options.distinct_roots = true;
    scene_options.min_unit = 224;
    const SyntheticScene scene = generate_scene(scene_options);
    REQUIRE(scene.targets.size() == 2);
    REQUIRE(scene.targets[0].label != scene.targets[1].label);

    OracleRelevance relevance(scene.targets);
    CachedRelevance cached(relevance);
    OracleEvidence evidence(scene.targets);

    const SearchResult result =
        run_search(scene.image, scene_question(scene), cached, evidence, oracle_config());

    for (const PlantedTarget& target : scene.targets) {
        long long covered = 0;
        for (const SelectedPatch& patch : result.selection.patches) {
            covered += rect_overlap(patch.region.x0, patch.region.y0, patch.region.x1,
                                    patch.region.y1, target.x0, target.y0, target.x1,
                                    target.y1);
        }
        CHECK(covered == target.area());
    }
}

TEST_CASE("exhaustive-equivalence: permissive config selects exactly the leaf set") {
    for (std::uint64_t seed : {0ull, 1ull, 2ull}) {
        SceneOptions scene_options;
        scene_options.seed = seed;
        scene_options.side = 729;
        scene_options.min_unit = 27;
        const SyntheticScene scene = generate_scene(scene_options);

        OracleRelevance relevance(scene.targets);
        CachedRelevance cached(relevance);
        OracleEvidence evidence(scene.targets);

        SearchConfig config;
        config.min_unit = 27;
        config.max_children = 9;
        config.keep_threshold = 0.4; // below the minimum attainable normalized score
        config.evidence_start = 1.5; // unreachable: evidence never stops a node
        config.pop_budget = 1'000'000;

        const SearchResult result =
            run_search(scene.image, scene_question(scene), cached, evidence, config);

        std::vector<Region> expected;
        enumerate_leaves(full_region(729, 729), 27, expected);
        CHECK(expected.size() == 729);

        std::vector<Region> got;
        for (const SelectedPatch& patch : result.selection.patches) {
            got.push_back(patch.region);
            CHECK(patch.reason == StopReason::leaf_size);
        }
        CHECK(sorted_regions(std::move(got)) == sorted_regions(std::move(expected)));
        CHECK(result.trace.pops == 9 + 81 + 729);

        const NodeBound bound = node_bound(729, 27, 9, UINT64_MAX);
        CHECK(result.trace.expansions <= static_cast<std::int64_t>(bound.nodes));
    }
}

TEST_CASE("every selected region is reachable by its recorded path") {
    SceneOptions scene_options;
    scene_options.seed = 12;
    scene_options.side = 1024;
    scene_options.min_unit = 112;
    const SyntheticScene scene = generate_scene(scene_options);

    OracleRelevance relevance(scene.targets);
    OracleEvidence evidence(scene.targets);
    SearchConfig config;
    config.min_unit = 112;

    const SearchResult result =
        run_search(scene.image, scene_question(scene), relevance, evidence, config);
    for (const SelectedPatch& patch : result.selection.patches) {
        const Region rebuilt = region_from_path(1024, 1024, patch.region.path);
        CHECK(rebuilt == patch.region);
    }
}

TEST_CASE("committed regions are pairwise disjoint") {
    SceneOptions scene_options;
    scene_options.seed = 77;
    scene_options.side = 2048;
    scene_options.targets = 3;
    scene_options.min_unit = 224;
    const SyntheticScene scene = generate_scene(scene_options);
    OracleRelevance relevance(scene.targets);
    OracleEvidence evidence(scene.targets);

    const SearchResult result =
        run_search(scene.image, scene_question(scene), relevance, evidence, oracle_config());
    const auto& patches = result.selection.patches;
    for (std::size_t i = 0; i < patches.size(); ++i) {
        for (std::size_t j = i + 1; j < patches.size(); ++j) {
            CHECK(rect_overlap(patches[i].region.x0, patches[i].region.y0,
                               patches[i].region.x1, patches[i].region.y1,
                               patches[j].region.x0, patches[j].region.y0,
                               patches[j].region.x1, patches[j].region.y1) == 0);
        }
    }
}

TEST_CASE("trace invariants and determinism") {
    SceneOptions scene_options;
    scene_options.seed = 4;
    scene_options.side = 2048;
    scene_options.targets = 2;
    scene_options.min_unit = 224;
    const SyntheticScene scene = generate_scene(scene_options);

    auto run_once = [&] {
        OracleRelevance relevance(scene.targets);
        CachedRelevance cached(relevance);
        OracleEvidence evidence(scene.targets);
        return run_search(scene.image, scene_question(scene), cached, evidence,
                          oracle_config());
    };

    const SearchResult a = run_once();
    const SearchResult b = run_once();
    CHECK(trace_to_jsonl(a.trace) == trace_to_jsonl(b.trace));

    const SearchConfig config = oracle_config();
    CHECK(a.trace.pops <= config.pop_budget);
    std::size_t commits_in_trace = 0;
    for (const TraceEvent& event : a.trace.events) {
        if (event.committed) {
            ++commits_in_trace;
            REQUIRE(event.reason.has_value());
        }
        if (!event.kept.empty()) {
            CHECK(event.kept.size() >= 1);
            CHECK(event.kept.size() <= static_cast<std::size_t>(config.max_children));
            // children ordered by normalized score descending
            for (std::size_t i = 1; i < event.kept.size(); ++i) {
                CHECK(event.kept[i - 1].score.normalized >=
                      event.kept[i].score.normalized);
            }
        }
    }
    CHECK(commits_in_trace == a.selection.size());

    SUBCASE("parallel child scoring yields the identical trace") {
        OracleRelevance relevance(scene.targets);
        CachedRelevance cached(relevance);
        OracleEvidence evidence(scene.targets);
        SearchConfig parallel = oracle_config();
        parallel.score_threads = 2;
        const SearchResult c =
            run_search(scene.image, scene_question(scene), cached, evidence, parallel);
        CHECK(trace_to_jsonl(c.trace) == trace_to_jsonl(a.trace));
    }
}

TEST_CASE("node_bound formula") {
    SUBCASE("20K-scale inputs") {
        const NodeBound b = node_bound(20000, 224, 6, UINT64_MAX);
        CHECK(b.depth == 5);
        CHECK(b.nodes == 1555);
    }
    SUBCASE("smaller image") {
        const NodeBound b = node_bound(2000, 224, 6, UINT64_MAX);
        CHECK(b.depth == 2);
        CHECK(b.nodes == 7);
    }
    SUBCASE("budget caps the bound") {
        const NodeBound b = node_bound(20000, 224, 6, 60);
        CHECK(b.depth == 5);
        CHECK(b.nodes == 60);
    }
    SUBCASE("single-branch cap") {
        const NodeBound b = node_bound(20000, 224, 1, UINT64_MAX);
        CHECK(b.depth == 5);
        CHECK(b.nodes == 5);
    }
    SUBCASE("degenerate equal sizes") {
        const NodeBound b = node_bound(224, 224, 6, UINT64_MAX);
        CHECK(b.depth == 0);
        CHECK(b.nodes == 0);
    }
    SUBCASE("saturation falls back to the budget") {
        const NodeBound b = node_bound(1'000'000'000, 1, 9, 12345);
        CHECK(b.nodes == 12345);
    }
}

TEST_CASE("selection JSON round-trip validates paths") {
    SceneOptions scene_options;
    scene_options.seed = 2;
    scene_options.side = 1024;
    scene_options.min_unit = 112;
    const SyntheticScene scene = generate_scene(scene_options);
    OracleRelevance relevance(scene.targets);
    OracleEvidence evidence(scene.targets);
    SearchConfig config;
    config.min_unit = 112;
    const SearchResult result =
        run_search(scene.image, scene_question(scene), relevance, evidence, config);

    const std::string text = selection_to_json(result.selection, 1024, 1024);
    int w = 0, h = 0;
    const SelectionSet loaded = selection_from_json(text, &w, &h);
    CHECK(w == 1024);
    CHECK(h == 1024);
    REQUIRE(loaded.size() == result.selection.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded.patches[i].region == result.selection.patches[i].region);
    }

    SUBCASE("bbox disagreeing with its path is rejected") {
        const std::string bad = R"({
          "version": 1,
          "image": {"width": 900, "height": 900},
          "patches": [{"region": [1, 2, 3, 4], "path": [0], "depth": 1}]
        })";
        CHECK_THROWS_AS((void)selection_from_json(bad, nullptr, nullptr), Error);
    }
}

TEST_CASE("fixed top-1 enqueues a single root and records the drops") {
    SceneOptions scene_options;
    scene_options.seed = 44;
    scene_options.side = 4096;
    scene_options.max_short_side = 32; // below the depth-1 resolution gate
    scene_options.min_unit = 224;
    const SyntheticScene scene = generate_scene(scene_options);
    OracleRelevance relevance(scene.targets);
    OracleEvidence evidence(scene.targets);
    SearchConfig config;
    config.min_unit = 224;
    config.branching = BranchingMode::fixed_topk;
    config.fixed_k = 1;

    const SearchResult result =
        run_search(scene.image, scene_question(scene), relevance, evidence, config);
    int enqueued = 0, dropped = 0, committed_roots = 0;
    for (const TraceEvent& event : result.trace.events) {
        if (event.kind != TraceEventKind::root) continue;
        if (event.committed) {
            ++committed_roots;
        } else if (event.enqueued) {
            ++enqueued;
        } else {
            ++dropped;
        }
    }
    CHECK(committed_roots == 0);
    CHECK(enqueued == 1);
    CHECK(dropped == 8);
    CHECK(trace_to_jsonl(result.trace).find("\"drop\"") != std::string::npos);
}

TEST_CASE("run_search works with sibling-standardized normalization") {
    SceneOptions scene_options;
    scene_options.seed = 6;
    scene_options.side = 1024;
    scene_options.min_unit = 112;
    const SyntheticScene scene = generate_scene(scene_options);
    OracleRelevance relevance(scene.targets);
    OracleEvidence evidence(scene.targets);
    SearchConfig config;
    config.min_unit = 112;
    config.fusion.normalization = NormalizationMode::sibling_standardized;

    const SearchResult result =
        run_search(scene.image, scene_question(scene), relevance, evidence, config);
    CHECK_FALSE(result.selection.empty());
    const PlantedTarget& target = scene.targets[0];
    long long covered = 0;
    for (const SelectedPatch& patch : result.selection.patches) {
        covered += rect_overlap(patch.region.x0, patch.region.y0, patch.region.x1,
                                patch.region.y1, target.x0, target.y0, target.x1, target.y1);
    }
    CHECK(covered == target.area());
}

TEST_CASE("backend failures propagate out of run_search") {
    const Image image(729, 729);
    const std::vector<PlantedTarget> targets{PlantedTarget{10, 10, 40, 40, "target-0", {}}};
    OracleRelevance relevance(targets);
    OracleEvidence evidence(targets);
    SearchConfig config;
    config.min_unit = 81;
    // the question names no known target -> the evidence oracle refuses
    CHECK_THROWS_AS(
        (void)run_search(image, "locate nothing", relevance, evidence, config), Error);
    try {
        (void)run_search(image, "locate nothing", relevance, evidence, config);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::unknown_label);
    }
}

TEST_CASE("regions too narrow to split are committed as leaves") {
    // 6x15 image: depth-1 roots are 2x5 px, above a 1-px unit but unsplittable.
    const Image image(6, 15);
    const std::vector<PlantedTarget> targets{PlantedTarget{0, 0, 2, 2, "target-0", {}}};
    OracleRelevance relevance(targets);
    OracleEvidence evidence(targets);
    SearchConfig config;
    config.min_unit = 1;
    config.pop_budget = 100;

    const SearchResult result =
        run_search(image, "locate target-0", relevance, evidence, config);
    CHECK(result.selection.size() == 9);
    for (const SelectedPatch& patch : result.selection.patches) {
        CHECK(patch.region.depth == 1);
        CHECK(patch.reason == StopReason::leaf_size);
    }
}

TEST_CASE("budget flush commits the single best node when nothing was selected") {
    SceneOptions scene_options;
    scene_options.seed = 18;
    scene_options.side = 1024;
    scene_options.min_unit = 112;
    // below the resolution gate: no root can evidence-commit at init
    scene_options.max_short_side = 12;
    const SyntheticScene scene = generate_scene(scene_options);
    OracleRelevance relevance(scene.targets);
    OracleEvidence evidence(scene.targets);
    SearchConfig config;
    config.min_unit = 112;
    config.pop_budget = 1;

    const SearchResult result =
        run_search(scene.image, scene_question(scene), relevance, evidence, config);
    CHECK(result.trace.pops == 1);
    CHECK(result.trace.termination == "budget_exhausted");
    REQUIRE(result.selection.size() >= 1);
    bool any_flush = false;
    for (const SelectedPatch& patch : result.selection.patches) {
        if (patch.reason == StopReason::budget_flush) any_flush = true;
    }
    CHECK(any_flush);
}

TEST_CASE("run_search rejects tiny images and bad configs") {
    const Image tiny(2, 2);
    const std::vector<PlantedTarget> targets{PlantedTarget{0, 0, 1, 1, "target-0", {}}};
    OracleRelevance relevance(targets);
    OracleEvidence evidence(targets);
    CHECK_THROWS_AS((void)run_search(tiny, "locate target-0", relevance, evidence,
                                     SearchConfig{}),
                    Error);

    SearchConfig bad;
    bad.keep_threshold = 1.5;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = SearchConfig{};
    bad.max_children = 10;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = SearchConfig{};
    bad.pop_budget = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = SearchConfig{};
    bad.evidence_start = 2.5;
    CHECK_THROWS_AS(bad.validate(), Error);
    // values above 1 are allowed: they disable the evidence stop
    bad = SearchConfig{};
    bad.evidence_start = 1.5;
    CHECK_NOTHROW(bad.validate());
}
