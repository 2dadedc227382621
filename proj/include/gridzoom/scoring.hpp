#pragma once

#include "gridzoom/grid.hpp"
#include "gridzoom/image.hpp"

#include <span>
#include <string>
#include <vector>

namespace gridzoom {

struct RelevanceBackend;
struct EvidenceBackend;

enum class NormalizationMode { plain_sigmoid, sibling_standardized };

struct FusionParams {
    double bias = 0.3;          // floor of the evidence weight, in [0,1)
    bool prune_relevance = true;
    bool prune_evidence = true;
    NormalizationMode normalization = NormalizationMode::plain_sigmoid;
};

// Both cue values plus their fusion for one patch at one depth.
struct ScoreBundle {
    double relevance = 0.0;  // mean cosine over retained tiles, in [-1,1]
    double evidence = 0.0;   // yes-probability, in [0,1]
    double fused = 0.0;
    double normalized = 0.0; // sigmoid image of fused (possibly sibling-standardized)
    int depth = 1;
    std::vector<int> retained_tiles; // ascending row-major lattice indices
};

struct ViewCell {
    int row = 0; // position in the original tile lattice
    int col = 0;
    bool retained = false;
    // Source content rectangle (tile square clipped to the patch); what the
    // rendered view actually shows for this cell when retained.
    int sx0 = 0;
    int sy0 = 0;
    int sx1 = 0;
    int sy1 = 0;
};

// Compact rendering of a patch after discarding low-relevance tiles: dropped
// tiles turn gray, then lattice rows/columns with no retained tile are
// removed entirely.
struct PrunedView {
    Region source;
    int lattice_rows = 0;
    int lattice_cols = 0;
    std::vector<int> kept_rows;
    std::vector<int> kept_cols;
    std::vector<ViewCell> cells; // kept lattice positions, row-major
    Image rendered;
};

// Cosine similarity; throws degenerate_embedding on a zero-norm vector.
[[nodiscard]] double tile_relevance(std::span<const double> a, std::span<const double> b);

struct PatchRelevance {
    double value = 0.0;
    std::vector<int> retained; // ascending lattice indices
};

// Scores every tile of the patch, optionally drops the lower half, and
// averages the survivors.
[[nodiscard]] PatchRelevance patch_relevance(const Region& patch, const std::string& question,
                                             RelevanceBackend& backend, const Image& image,
                                             int unit, const FusionParams& params);

[[nodiscard]] PrunedView pruned_view(const Region& patch, std::span<const int> retained,
                                     const Image& image, int unit);

[[nodiscard]] double model_evidence(const PrunedView& view, const std::string& question,
                                    EvidenceBackend& backend);

// Confidence weight for the evidence cue; rises from `bias` toward 1 with depth.
[[nodiscard]] double depth_weight(int depth, double bias);

[[nodiscard]] double fuse(double relevance, double evidence, int depth,
                          const FusionParams& params);

[[nodiscard]] double logistic(double x);

// Plain mode ignores `siblings`; standardized mode z-scores against them
// (zero z when their spread collapses) before the logistic.
[[nodiscard]] double normalize_score(double fused, std::span<const double> siblings,
                                     NormalizationMode mode);

// Full two-cue scoring of one patch. `normalized` is filled with the plain
// sigmoid; call finalize_group afterwards to apply sibling standardization.
[[nodiscard]] ScoreBundle score_patch(const Region& patch, const std::string& question,
                                      RelevanceBackend& relevance, EvidenceBackend& evidence,
                                      const Image& image, int unit, const FusionParams& params);

void finalize_group(std::span<ScoreBundle> group, NormalizationMode mode);

} // namespace gridzoom
