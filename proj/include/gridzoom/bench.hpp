#pragma once

#include "gridzoom/backends.hpp"
#include "gridzoom/reassembly.hpp"
#include "gridzoom/scene.hpp"
#include "gridzoom/search.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gridzoom {

enum class Branching { adaptive, top1, top2, top3 };
[[nodiscard]] const char* to_string(Branching branching);
[[nodiscard]] Branching branching_from_name(const std::string& name);

// Applies a branching strategy on top of a base config.
[[nodiscard]] SearchConfig branching_config(const SearchConfig& base, Branching branching);

struct BenchOptions {
    int scenes = 100;
    std::uint64_t seed0 = 0; // scene i uses seed0 + i
    SceneOptions scene;
    SearchConfig config;
    OracleParams oracle;
    Branching branching = Branching::adaptive;
    Strategy strategy = Strategy::global_relative;
    double coverage_threshold = 0.9; // fraction of target area that must be covered
    int jobs = 0;                    // 0 = hardware concurrency
    bool capture_traces = false;
};

struct SceneRow {
    std::uint64_t seed = 0;
    double recall = 0.0;
    std::int64_t pops = 0;
    std::int64_t expansions = 0;
    int committed = 0;
    int canvas_width = 0;
    int canvas_height = 0;
    std::string termination;
    double wall_ms = 0.0;
    std::string trace; // JSONL, only when capture_traces is set
};

struct BenchAggregates {
    double mean_recall = 0.0;
    double median_recall = 0.0;
    double mean_pops = 0.0;
    double mean_wall_ms = 0.0;
};

struct BenchmarkReport {
    BenchOptions options;
    std::vector<SceneRow> rows;
    BenchAggregates aggregates;
};

// Fraction of targets whose bbox is covered (at least `threshold` of its
// area) by the union of the committed regions. Committed regions are
// pairwise disjoint, so per-region intersections sum exactly.
[[nodiscard]] double coverage_recall(std::span<const PlantedTarget> targets,
                                     const SelectionSet& selection, double threshold);

[[nodiscard]] BenchAggregates compute_aggregates(std::span<const SceneRow> rows);

// Generates scenes, runs search + reassembly per scene in a worker pool, and
// aggregates. Rows are deterministic for fixed options (wall_ms aside).
[[nodiscard]] BenchmarkReport run_benchmark(const BenchOptions& options);

// include_timing=false omits wall-clock fields (useful for byte comparisons).
[[nodiscard]] std::string report_to_json(const BenchmarkReport& report,
                                         bool include_timing = true);

} // namespace gridzoom
