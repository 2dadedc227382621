#include "gridzoom/scoring.hpp"

#include "gridzoom/backends.hpp"
#include "gridzoom/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gridzoom {

double tile_relevance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) {
        fail(ErrorCode::scoring_backend, "embedding dimension mismatch");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na <= 0.0 || nb <= 0.0) {
        fail(ErrorCode::degenerate_embedding, "zero-norm embedding");
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

PatchRelevance patch_relevance(const Region& patch, const std::string& question,
                               RelevanceBackend& backend, const Image& image, int unit,
                               const FusionParams& params) {
    const std::vector<Tile> tiles = tile_region(patch, image, unit);
    const std::vector<double> query = backend.embed_text(question);

    std::vector<double> sims(tiles.size());
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        sims[i] = tile_relevance(query, backend.embed_tile(tiles[i]));
    }

    std::vector<int> retained(tiles.size());
    std::iota(retained.begin(), retained.end(), 0);
    if (params.prune_relevance && tiles.size() > 1) {
        std::stable_sort(retained.begin(), retained.end(),
                         [&](int lhs, int rhs) { return sims[lhs] > sims[rhs]; });
        const std::size_t keep = (tiles.size() + 1) / 2;
        retained.resize(keep);
        std::sort(retained.begin(), retained.end());
    }

    double sum = 0.0;
    for (int idx : retained) sum += sims[static_cast<std::size_t>(idx)];
    return PatchRelevance{sum / static_cast<double>(retained.size()), std::move(retained)};
}

PrunedView pruned_view(const Region& patch, std::span<const int> retained, const Image& image,
                       int unit) {
    if (retained.empty()) {
        fail(ErrorCode::bad_argument, "pruned view needs at least one retained tile");
    }
    const int rows = tile_rows(patch, unit);
    const int cols = tile_cols(patch, unit);

    std::vector<std::uint8_t> keep(static_cast<std::size_t>(rows) * cols, 0);
    for (int idx : retained) {
        if (idx < 0 || idx >= rows * cols) {
            fail(ErrorCode::bad_argument, "retained tile index out of range");
        }
        keep[static_cast<std::size_t>(idx)] = 1;
    }

    PrunedView view;
    view.source = patch;
    view.lattice_rows = rows;
    view.lattice_cols = cols;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (keep[static_cast<std::size_t>(r) * cols + c]) {
                if (view.kept_rows.empty() || view.kept_rows.back() != r) {
                    view.kept_rows.push_back(r);
                }
            }
        }
    }
    for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < rows; ++r) {
            if (keep[static_cast<std::size_t>(r) * cols + c]) {
                view.kept_cols.push_back(c);
                break;
            }
        }
    }

    // Content extents: edge tiles are trimmed to the patch, so an all-retained
    // view reproduces the patch pixels exactly.
    auto col_width = [&](int c) { return std::min(unit, patch.width() - c * unit); };
    auto row_height = [&](int r) { return std::min(unit, patch.height() - r * unit); };

    int view_w = 0, view_h = 0;
    for (int c : view.kept_cols) view_w += col_width(c);
    for (int r : view.kept_rows) view_h += row_height(r);
    view.rendered = Image(view_w, view_h, kNeutralGray);

    int oy = 0;
    for (int r : view.kept_rows) {
        int ox = 0;
        for (int c : view.kept_cols) {
            ViewCell cell;
            cell.row = r;
            cell.col = c;
            cell.retained = keep[static_cast<std::size_t>(r) * cols + c] != 0;
            cell.sx0 = patch.x0 + c * unit;
            cell.sy0 = patch.y0 + r * unit;
            cell.sx1 = cell.sx0 + col_width(c);
            cell.sy1 = cell.sy0 + row_height(r);
            if (cell.retained) {
                view.rendered.paste(image.crop(cell.sx0, cell.sy0, cell.sx1, cell.sy1), ox, oy);
            }
            view.cells.push_back(cell);
            ox += col_width(c);
        }
        oy += row_height(r);
    }
    return view;
}

double model_evidence(const PrunedView& view, const std::string& question,
                      EvidenceBackend& backend) {
    if (view.rendered.empty()) {
        fail(ErrorCode::bad_argument, "evidence view is empty");
    }
    const double p = backend.yes_probability(view, question);
    if (!(p >= 0.0 && p <= 1.0)) {
        fail(ErrorCode::scoring_backend,
             "evidence backend returned probability outside [0,1]");
    }
    return p;
}

double depth_weight(int depth, double bias) {
    if (depth < 1) fail(ErrorCode::bad_argument, "depth must be >= 1");
    return (1.0 - bias) * (1.0 - std::pow(0.5, depth - 1)) + bias;
}

double fuse(double relevance, double evidence, int depth, const FusionParams& params) {
    const double w = depth_weight(depth, params.bias);
    return (1.0 - w) * relevance + w * evidence;
}

double logistic(double x) {
    return 1.0 / (1.0 + std::exp(-x));
}

double normalize_score(double fused, std::span<const double> siblings, NormalizationMode mode) {
    if (mode == NormalizationMode::plain_sigmoid) {
        return logistic(fused);
    }
    if (siblings.empty()) {
        fail(ErrorCode::bad_argument, "standardized normalization needs the sibling scores");
    }
    double mean = 0.0;
    for (double s : siblings) mean += s;
    mean /= static_cast<double>(siblings.size());
    double var = 0.0;
    for (double s : siblings) var += (s - mean) * (s - mean);
    const double sd = std::sqrt(var / static_cast<double>(siblings.size()));
    const double z = sd < 1e-9 ? 0.0 : (fused - mean) / sd;
    return logistic(z);
}

ScoreBundle score_patch(const Region& patch, const std::string& question,
                        RelevanceBackend& relevance, EvidenceBackend& evidence,
                        const Image& image, int unit, const FusionParams& params) {
    ScoreBundle bundle;
    bundle.depth = patch.depth;

    PatchRelevance rel = patch_relevance(patch, question, relevance, image, unit, params);
    bundle.relevance = rel.value;
    bundle.retained_tiles = std::move(rel.retained);

    std::vector<int> view_tiles;
    if (params.prune_evidence) {
        view_tiles = bundle.retained_tiles;
    } else {
        view_tiles.resize(static_cast<std::size_t>(tile_rows(patch, unit)) *
                          tile_cols(patch, unit));
        std::iota(view_tiles.begin(), view_tiles.end(), 0);
    }
    const PrunedView view = pruned_view(patch, view_tiles, image, unit);
    bundle.evidence = model_evidence(view, question, evidence);

    bundle.fused = fuse(bundle.relevance, bundle.evidence, bundle.depth, params);
    bundle.normalized = logistic(bundle.fused);
    return bundle;
}

void finalize_group(std::span<ScoreBundle> group, NormalizationMode mode) {
    if (mode == NormalizationMode::plain_sigmoid) {
        for (ScoreBundle& b : group) b.normalized = logistic(b.fused);
        return;
    }
    std::vector<double> fused(group.size());
    for (std::size_t i = 0; i < group.size(); ++i) fused[i] = group[i].fused;
    for (ScoreBundle& b : group) {
        b.normalized = normalize_score(b.fused, fused, mode);
    }
}

} // namespace gridzoom
