#pragma once

#include "gridzoom/grid.hpp"
#include "gridzoom/image.hpp"
#include "gridzoom/scoring.hpp"

#include <atomic>
#include <cstdint>
#include <memory>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace httplib {
class Client;
}

namespace gridzoom {

// Produces text/tile embeddings for the relevance cue. Implementations must
// be deterministic per identity: the same input always yields the same vector.
struct RelevanceBackend {
    virtual ~RelevanceBackend() = default;
    virtual std::vector<double> embed_text(const std::string& text) = 0;
    virtual std::vector<double> embed_tile(const Tile& tile) = 0;
    [[nodiscard]] virtual std::string identity() const = 0;
    [[nodiscard]] virtual bool concurrent_safe() const { return true; }
};

// Answers "can the view settle the question" with a probability in [0,1].
struct EvidenceBackend {
    virtual ~EvidenceBackend() = default;
    virtual double yes_probability(const PrunedView& view, const std::string& question) = 0;
    [[nodiscard]] virtual std::string identity() const = 0;
    [[nodiscard]] virtual bool concurrent_safe() const { return true; }
};

struct PlantedTarget {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;
    std::string label;
    Rgb color{255, 0, 0};

    [[nodiscard]] long long area() const noexcept {
        return static_cast<long long>(x1 - x0) * (y1 - y0);
    }
};

struct OracleParams {
    double noise = 0.0;        // additive relevance noise, Uniform(0, noise)
    std::uint64_t seed = 0;    // noise generator seed
    int min_resolved_px = 16;  // target short side, after scaling, needed for full evidence
    int eval_resolution = 448; // notional input resolution of the evidence model
};

// Deterministic relevance stand-in: a tile scores by its best overlap
// fraction with any planted target. The overlap value o is delivered through
// the embedding interface as the unit vector (o, sqrt(1-o^2)) against the
// fixed text embedding (1, 0), so the cosine comes out to o exactly.
class OracleRelevance final : public RelevanceBackend {
public:
    OracleRelevance(std::vector<PlantedTarget> targets, OracleParams params = {});

    std::vector<double> embed_text(const std::string& text) override;
    std::vector<double> embed_tile(const Tile& tile) override;
    [[nodiscard]] std::string identity() const override;

    [[nodiscard]] std::uint64_t tile_calls() const noexcept { return tile_calls_.load(); }

private:
    std::vector<PlantedTarget> targets_;
    OracleParams params_;
    std::atomic<std::uint64_t> tile_calls_{0};
};

// Deterministic evidence stand-in. Full confidence requires the questioned
// target to lie entirely inside the view's retained coverage AND to stay
// legible once the view is scaled to the model's input resolution; otherwise
// confidence is half the covered fraction.
class OracleEvidence final : public EvidenceBackend {
public:
    OracleEvidence(std::vector<PlantedTarget> targets, OracleParams params = {});

    double yes_probability(const PrunedView& view, const std::string& question) override;
    [[nodiscard]] std::string identity() const override;

    [[nodiscard]] std::uint64_t calls() const noexcept { return calls_.load(); }

private:
    std::vector<PlantedTarget> targets_;
    OracleParams params_;
    std::atomic<std::uint64_t> calls_{0};
};

// Memoizes embeddings per (backend identity, tile square, clipped extent).
// Concurrent first requests for one key may both reach the backend; the first
// stored value wins and is returned to everyone afterwards.
class CachedRelevance final : public RelevanceBackend {
public:
    explicit CachedRelevance(RelevanceBackend& inner);

    std::vector<double> embed_text(const std::string& text) override;
    std::vector<double> embed_tile(const Tile& tile) override;
    [[nodiscard]] std::string identity() const override;
    [[nodiscard]] bool concurrent_safe() const override;

    [[nodiscard]] std::uint64_t hits() const noexcept { return hits_.load(); }
    [[nodiscard]] std::uint64_t misses() const noexcept { return misses_.load(); }

private:
    struct TileKey {
        int x0, y0, x1, y1; // square
        int cx1, cy1;       // clipped extent
        bool operator==(const TileKey&) const = default;
    };
    struct TileKeyHash {
        std::size_t operator()(const TileKey& k) const noexcept;
    };

    RelevanceBackend& inner_;
    std::shared_mutex mutex_;
    std::unordered_map<TileKey, std::vector<double>, TileKeyHash> tiles_;
    std::unordered_map<std::string, std::vector<double>> texts_;
    std::atomic<std::uint64_t> hits_{0};
    std::atomic<std::uint64_t> misses_{0};
};

struct RemoteOptions {
    std::string url;          // e.g. http://127.0.0.1:8080
    int timeout_ms = 10000;
    int retries = 2;          // additional attempts after the first
    int backoff_ms = 250;     // doubled after every failed attempt
    std::size_t max_payload = 16u << 20;
};

// HTTP client for an embedding server:
//   POST /embed_text  {"text": ...}      -> {"embedding": [...]}
//   POST /embed_image {"image_b64": ...} -> {"embedding": [...]}
class RemoteRelevance final : public RelevanceBackend {
public:
    explicit RemoteRelevance(RemoteOptions options);
    ~RemoteRelevance() override;

    std::vector<double> embed_text(const std::string& text) override;
    std::vector<double> embed_tile(const Tile& tile) override;
    [[nodiscard]] std::string identity() const override;
    [[nodiscard]] bool concurrent_safe() const override { return false; }

private:
    RemoteOptions options_;
    std::unique_ptr<httplib::Client> client_;
};

// HTTP client for an answering server:
//   POST /evidence {"image_b64": ..., "question": ...} -> {"p_yes": x}
class RemoteEvidence final : public EvidenceBackend {
public:
    explicit RemoteEvidence(RemoteOptions options);
    ~RemoteEvidence() override;

    double yes_probability(const PrunedView& view, const std::string& question) override;
    [[nodiscard]] std::string identity() const override;
    [[nodiscard]] bool concurrent_safe() const override { return false; }

private:
    RemoteOptions options_;
    std::unique_ptr<httplib::Client> client_;
};

[[nodiscard]] std::string base64_encode(const std::uint8_t* data, std::size_t size);

// Overlap area between two half-open rectangles.
[[nodiscard]] long long rect_overlap(int ax0, int ay0, int ax1, int ay1, int bx0, int by0,
                                     int bx1, int by1);

} // namespace gridzoom
