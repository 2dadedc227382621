#pragma once

#include "gridzoom/grid.hpp"
#include "gridzoom/scoring.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gridzoom {

struct RelevanceBackend;
struct EvidenceBackend;

enum class StopReason { leaf_size, depth_cap, evidence, budget_flush };
[[nodiscard]] const char* to_string(StopReason reason);

enum class BranchingMode { adaptive, fixed_topk };

struct SearchConfig {
    int min_unit = 224;             // leaf cell size in pixels
    int max_depth = 50;             // hard depth cap
    std::int64_t pop_budget = 60;   // maximum queue pops per search
    int max_children = 6;           // cap on children kept per expansion
    double keep_threshold = 0.6;    // normalized-score bar for keeping a child
    double evidence_start = 1.0;    // evidence stop threshold at depth 1
    double evidence_decay = 0.1;    // threshold drop per extra depth
    FusionParams fusion;
    BranchingMode branching = BranchingMode::adaptive;
    int fixed_k = 1;                // children kept per expansion in fixed mode
    int score_threads = 1;          // child scorings run in parallel when > 1

    // Throws bad_config on out-of-range values. evidence_start may exceed 1,
    // which makes the evidence stop unreachable (used by exhaustive sweeps).
    void validate() const;
};

struct FrontierNode {
    Region region;
    ScoreBundle score;
    std::uint64_t sequence = 0;
};

struct SelectedPatch {
    Region region;
    ScoreBundle score;
    StopReason reason = StopReason::leaf_size;
};

struct SelectionSet {
    std::vector<SelectedPatch> patches;
    [[nodiscard]] bool empty() const noexcept { return patches.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return patches.size(); }
};

enum class TraceEventKind { root, pop, flush };

struct TraceKeptChild {
    Region region;
    ScoreBundle score;
};

struct TraceEvent {
    TraceEventKind kind = TraceEventKind::pop;
    std::int64_t sequence = 0; // pop counter; 0 for root events
    Region region;
    ScoreBundle score;
    bool committed = false;
    bool enqueued = false; // root events: whether the root entered the frontier
    std::optional<StopReason> reason;
    std::vector<TraceKeptChild> kept; // populated for expansions
};

struct SearchTrace {
    int image_width = 0;
    int image_height = 0;
    std::string question;
    std::vector<TraceEvent> events;
    std::int64_t pops = 0;
    std::int64_t expansions = 0;
    std::string termination; // frontier_exhausted | budget_exhausted
};

struct SearchResult {
    SelectionSet selection;
    SearchTrace trace;
};

// Evidence stop threshold at a given depth, clamped below at zero.
[[nodiscard]] double evidence_threshold(int depth, double start, double decay);

// Reports the first matching criterion in the order leaf_size, depth_cap,
// evidence; nullopt when the node should be expanded.
[[nodiscard]] std::optional<StopReason> should_stop(const Region& region,
                                                    const ScoreBundle& score,
                                                    const SearchConfig& config);

// Indices of the children to keep, ordered by normalized score descending.
// Adaptive mode keeps everything at or above the threshold (at least the
// best one) up to max_children; fixed mode keeps exactly fixed_k.
[[nodiscard]] std::vector<int> select_children(std::span<const ScoreBundle> children,
                                               const SearchConfig& config);

// Scoring context shared by one search invocation.
class PatchScorer {
public:
    PatchScorer(const Image& image, std::string question, RelevanceBackend& relevance,
                EvidenceBackend& evidence, const SearchConfig& config);

    [[nodiscard]] ScoreBundle score(const Region& region) const;

    // Scores a sibling group (possibly in parallel) and applies the group
    // normalization mode.
    [[nodiscard]] std::vector<ScoreBundle> score_group(std::span<const Region> regions) const;

    [[nodiscard]] const SearchConfig& config() const noexcept { return config_; }

private:
    const Image& image_;
    std::string question_;
    RelevanceBackend& relevance_;
    EvidenceBackend& evidence_;
    const SearchConfig& config_;
    bool parallel_ok_;
};

// Splits, scores and filters the children of a frontier node. Precondition:
// should_stop(node) is empty and the region is divisible.
[[nodiscard]] std::vector<FrontierNode> expand(const FrontierNode& node,
                                               const PatchScorer& scorer,
                                               const SearchConfig& config);

// Best-first zoom search over the 3x3 region tree.
[[nodiscard]] SearchResult run_search(const Image& image, const std::string& question,
                                      RelevanceBackend& relevance, EvidenceBackend& evidence,
                                      const SearchConfig& config);

struct NodeBound {
    int depth = 0;           // splits needed to reach the leaf size
    std::uint64_t nodes = 0; // expansion bound, min(pop_budget, geometric sum)
};

// pop_budget of UINT64_MAX means unbounded.
[[nodiscard]] NodeBound node_bound(std::int64_t long_side, int min_unit, int max_children,
                                   std::uint64_t pop_budget);

// Line-delimited JSON event log: meta line, one line per root/pop/flush
// event, and a closing summary line. Contains no timestamps.
[[nodiscard]] std::string trace_to_jsonl(const SearchTrace& trace);

[[nodiscard]] std::string selection_to_json(const SelectionSet& selection, int image_width,
                                            int image_height);

// Validates every bbox against its recorded path before returning.
[[nodiscard]] SelectionSet selection_from_json(const std::string& text, int* image_width,
                                               int* image_height);

} // namespace gridzoom
