#include "gridzoom/backends.hpp"

#include "gridzoom/error.hpp"
#include "gridzoom/image_io.hpp"
#include "gridzoom/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <thread>

#include "httplib.h"

namespace gridzoom {

using nlohmann::json;

long long rect_overlap(int ax0, int ay0, int ax1, int ay1, int bx0, int by0, int bx1, int by1) {
    const long long w = std::min(ax1, bx1) - std::max(ax0, bx0);
    const long long h = std::min(ay1, by1) - std::max(ay0, by0);
    return (w > 0 && h > 0) ? w * h : 0;
}

// ---------------------------------------------------------------------------
// Oracle backends
// ---------------------------------------------------------------------------

OracleRelevance::OracleRelevance(std::vector<PlantedTarget> targets, OracleParams params)
    : targets_(std::move(targets)), params_(params) {}

std::vector<double> OracleRelevance::embed_text(const std::string&) {
    return {1.0, 0.0};
}

std::vector<double> OracleRelevance::embed_tile(const Tile& tile) {
    tile_calls_.fetch_add(1, std::memory_order_relaxed);
    const long long tile_area =
        static_cast<long long>(tile.x1 - tile.x0) * (tile.y1 - tile.y0);
    double best = 0.0;
    for (const PlantedTarget& t : targets_) {
        // Only the square's clipped extent shows real pixels; padding is gray.
        const long long overlap = rect_overlap(tile.x0, tile.y0, tile.content_x1(),
                                               tile.content_y1(), t.x0, t.y0, t.x1, t.y1);
        best = std::max(best, static_cast<double>(overlap) / static_cast<double>(tile_area));
    }
    if (params_.noise > 0.0) {
        std::uint64_t s = hash_combine(params_.seed,
                                       hash_combine(hash_combine(static_cast<std::uint64_t>(tile.x0),
                                                                 static_cast<std::uint64_t>(tile.y0)),
                                                    hash_combine(static_cast<std::uint64_t>(tile.x1),
                                                                 static_cast<std::uint64_t>(tile.y1))));
        Rng rng(s);
        best = std::min(1.0, best + rng.uniform() * params_.noise);
    }
    return {best, std::sqrt(std::max(0.0, 1.0 - best * best))};
}

std::string OracleRelevance::identity() const {
    return "oracle-relevance/" + std::to_string(params_.seed) + "/" +
           std::to_string(params_.noise);
}

OracleEvidence::OracleEvidence(std::vector<PlantedTarget> targets, OracleParams params)
    : targets_(std::move(targets)), params_(params) {}

namespace {

// Word-boundary containment so "target-1" never matches inside "target-12".
bool question_names_label(const std::string& question, const std::string& label) {
    if (label.empty()) return false;
    std::size_t pos = question.find(label);
    auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-'; };
    while (pos != std::string::npos) {
        const bool left_ok = pos == 0 || !is_word(question[pos - 1]);
        const std::size_t end = pos + label.size();
        const bool right_ok = end >= question.size() || !is_word(question[end]);
        if (left_ok && right_ok) return true;
        pos = question.find(label, pos + 1);
    }
    return false;
}

} // namespace

double OracleEvidence::yes_probability(const PrunedView& view, const std::string& question) {
    calls_.fetch_add(1, std::memory_order_relaxed);

    std::vector<const PlantedTarget*> named;
    for (const PlantedTarget& t : targets_) {
        if (question_names_label(question, t.label)) named.push_back(&t);
    }
    if (named.empty()) {
        fail(ErrorCode::unknown_label, "question names no planted target: " + question);
    }

    const int long_side = std::max(view.rendered.width(), view.rendered.height());
    const double scale =
        std::min(1.0, static_cast<double>(params_.eval_resolution) / long_side);

    double best = 0.0;
    for (const PlantedTarget* t : named) {
        long long covered = 0;
        for (const ViewCell& cell : view.cells) {
            if (!cell.retained) continue;
            covered += rect_overlap(cell.sx0, cell.sy0, cell.sx1, cell.sy1, t->x0, t->y0,
                                    t->x1, t->y1);
        }
        const double fraction = static_cast<double>(covered) / static_cast<double>(t->area());
        const int short_side = std::min(t->x1 - t->x0, t->y1 - t->y0);
        const bool resolved = short_side * scale >= params_.min_resolved_px;
        const double p = (covered == t->area() && resolved) ? 1.0 : 0.5 * fraction;
        best = std::max(best, p);
    }
    return best;
}

std::string OracleEvidence::identity() const {
    return "oracle-evidence/" + std::to_string(params_.min_resolved_px) + "/" +
           std::to_string(params_.eval_resolution);
}

// ---------------------------------------------------------------------------
// Embedding cache
// ---------------------------------------------------------------------------

std::size_t CachedRelevance::TileKeyHash::operator()(const TileKey& k) const noexcept {
    std::uint64_t h = hash_combine(static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.x0)),
                                   static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.y0)));
    h = hash_combine(h, static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.x1)));
    h = hash_combine(h, static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.y1)));
    h = hash_combine(h, static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.cx1)));
    h = hash_combine(h, static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.cy1)));
    return static_cast<std::size_t>(h);
}

CachedRelevance::CachedRelevance(RelevanceBackend& inner) : inner_(inner) {}

std::vector<double> CachedRelevance::embed_text(const std::string& text) {
    {
        std::shared_lock lock(mutex_);
        auto it = texts_.find(text);
        if (it != texts_.end()) {
            hits_.fetch_add(1, std::memory_order_relaxed);
            return it->second;
        }
    }
    misses_.fetch_add(1, std::memory_order_relaxed);
    std::vector<double> v = inner_.embed_text(text);
    std::unique_lock lock(mutex_);
    return texts_.emplace(text, std::move(v)).first->second;
}

std::vector<double> CachedRelevance::embed_tile(const Tile& tile) {
    const TileKey key{tile.x0, tile.y0, tile.x1, tile.y1, tile.content_x1(), tile.content_y1()};
    {
        std::shared_lock lock(mutex_);
        auto it = tiles_.find(key);
        if (it != tiles_.end()) {
            hits_.fetch_add(1, std::memory_order_relaxed);
            return it->second;
        }
    }
    misses_.fetch_add(1, std::memory_order_relaxed);
    std::vector<double> v = inner_.embed_tile(tile);
    std::unique_lock lock(mutex_);
    return tiles_.emplace(key, std::move(v)).first->second;
}

std::string CachedRelevance::identity() const {
    return inner_.identity();
}

bool CachedRelevance::concurrent_safe() const {
    return inner_.concurrent_safe();
}

// ---------------------------------------------------------------------------
// Remote backends
// ---------------------------------------------------------------------------

std::string base64_encode(const std::uint8_t* data, std::size_t size) {
    static constexpr char alphabet[] =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((size + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= size; i += 3) {
        const std::uint32_t n = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
        out.push_back(alphabet[(n >> 18) & 63]);
        out.push_back(alphabet[(n >> 12) & 63]);
        out.push_back(alphabet[(n >> 6) & 63]);
        out.push_back(alphabet[n & 63]);
    }
    if (i + 1 == size) {
        const std::uint32_t n = data[i] << 16;
        out.push_back(alphabet[(n >> 18) & 63]);
        out.push_back(alphabet[(n >> 12) & 63]);
        out.append("==");
    } else if (i + 2 == size) {
        const std::uint32_t n = (data[i] << 16) | (data[i + 1] << 8);
        out.push_back(alphabet[(n >> 18) & 63]);
        out.push_back(alphabet[(n >> 12) & 63]);
        out.push_back(alphabet[(n >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

namespace {

std::unique_ptr<httplib::Client> make_client(const RemoteOptions& options) {
    if (options.url.empty()) {
        fail(ErrorCode::bad_config, "remote backend URL not configured");
    }
    auto client = std::make_unique<httplib::Client>(options.url);
    client->set_connection_timeout(0, options.timeout_ms * 1000);
    client->set_read_timeout(options.timeout_ms / 1000, (options.timeout_ms % 1000) * 1000);
    client->set_write_timeout(options.timeout_ms / 1000, (options.timeout_ms % 1000) * 1000);
    return client;
}

json post_json(httplib::Client& client, const RemoteOptions& options, const std::string& path,
               const json& body) {
    const std::string payload = body.dump();
    if (payload.size() > options.max_payload) {
        fail(ErrorCode::scoring_backend, "request payload exceeds size limit on " + path);
    }
    std::string last_error;
    for (int attempt = 0; attempt <= options.retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(
                std::chrono::milliseconds(options.backoff_ms * (1 << (attempt - 1))));
        }
        auto res = client.Post(path, payload, "application/json");
        if (!res) {
            last_error = "transport failure " + httplib::to_string(res.error());
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            last_error = "HTTP status " + std::to_string(res->status);
            continue;
        }
        json parsed = json::parse(res->body, nullptr, false);
        if (parsed.is_discarded()) {
            fail(ErrorCode::scoring_backend, "malformed JSON response from " + path);
        }
        return parsed;
    }
    fail(ErrorCode::scoring_backend,
         path + " failed after " + std::to_string(options.retries + 1) + " attempts: " +
             last_error);
}

std::vector<double> parse_embedding(const json& body, const std::string& path) {
    if (!body.contains("embedding") || !body["embedding"].is_array() ||
        body["embedding"].empty()) {
        fail(ErrorCode::scoring_backend, "response from " + path + " lacks an embedding array");
    }
    std::vector<double> v;
    v.reserve(body["embedding"].size());
    for (const auto& x : body["embedding"]) {
        if (!x.is_number()) {
            fail(ErrorCode::scoring_backend, "non-numeric embedding entry from " + path);
        }
        v.push_back(x.get<double>());
    }
    return v;
}

std::string image_b64(const Image& image) {
    const std::vector<std::uint8_t> png = encode_png(image);
    return base64_encode(png.data(), png.size());
}

} // namespace

RemoteRelevance::RemoteRelevance(RemoteOptions options)
    : options_(std::move(options)), client_(make_client(options_)) {}

RemoteRelevance::~RemoteRelevance() = default;

std::vector<double> RemoteRelevance::embed_text(const std::string& text) {
    const json body{{"text", text}};
    return parse_embedding(post_json(*client_, options_, "/embed_text", body), "/embed_text");
}

std::vector<double> RemoteRelevance::embed_tile(const Tile& tile) {
    const json body{{"image_b64", image_b64(tile.content)}};
    return parse_embedding(post_json(*client_, options_, "/embed_image", body), "/embed_image");
}

std::string RemoteRelevance::identity() const {
    return "remote-relevance/" + options_.url;
}

RemoteEvidence::RemoteEvidence(RemoteOptions options)
    : options_(std::move(options)), client_(make_client(options_)) {}

RemoteEvidence::~RemoteEvidence() = default;

double RemoteEvidence::yes_probability(const PrunedView& view, const std::string& question) {
    const json body{{"image_b64", image_b64(view.rendered)}, {"question", question}};
    const json res = post_json(*client_, options_, "/evidence", body);
    if (!res.contains("p_yes") || !res["p_yes"].is_number()) {
        fail(ErrorCode::scoring_backend, "response from /evidence lacks p_yes");
    }
    const double p = res["p_yes"].get<double>();
    if (!(p >= 0.0 && p <= 1.0)) {
        fail(ErrorCode::scoring_backend, "remote p_yes outside [0,1]");
    }
    return p;
}

std::string RemoteEvidence::identity() const {
    return "remote-evidence/" + options_.url;
}

} // namespace gridzoom
