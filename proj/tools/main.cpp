#include "gridzoom/bench.hpp"
#include "gridzoom/config.hpp"
#include "gridzoom/error.hpp"
#include "gridzoom/image_io.hpp"
#include "gridzoom/reassembly.hpp"
#include "gridzoom/scene.hpp"
#include "gridzoom/search.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

namespace {

using namespace gridzoom;

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::io_failure, "cannot write " + path);
    out << text;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io_failure, "cannot read " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

struct SearchArgs {
    std::string image_path;
    std::string question;
    std::string config_path;
    std::string backend = "oracle";
    std::string targets_path;
    std::string out_path;
    std::string trace_path;
    std::string selection_path;
    std::string scene_out_path;
    std::string strategy = "global";
    std::int64_t gen_seed = -1;
    int gen_side = 4096;
    int gen_targets = 1;
    bool gen_dispersed = false;
};

int cmd_search(const SearchArgs& args) {
    EngineConfig engine;
    if (!args.config_path.empty()) engine = load_config(args.config_path);
    apply_env_overrides(engine);

    Image image;
    std::vector<PlantedTarget> targets;
    std::string question = args.question;

    if (args.gen_seed >= 0) {
        SceneOptions scene_options;
        scene_options.seed = static_cast<std::uint64_t>(args.gen_seed);
        scene_options.side = args.gen_side;
        scene_options.targets = args.gen_targets;
        scene_options.distinct_roots = args.gen_dispersed;
        scene_options.min_unit = resolved_min_unit(engine, args.gen_side, args.gen_side);
        SyntheticScene scene = generate_scene(scene_options);
        if (question.empty()) question = scene_question(scene);
        if (!args.scene_out_path.empty()) save_png(scene.image, args.scene_out_path);
        image = std::move(scene.image);
        targets = std::move(scene.targets);
    } else {
        if (args.image_path.empty()) {
            fail(ErrorCode::bad_argument, "search needs --image or --gen-seed");
        }
        image = load_image(args.image_path);
        if (!args.targets_path.empty()) {
            targets = targets_from_manifest(read_text(args.targets_path));
        }
    }
    if (question.empty()) {
        fail(ErrorCode::bad_argument, "search needs --question");
    }

    SearchConfig config = engine.search;
    config.min_unit = resolved_min_unit(engine, image.width(), image.height());

    std::unique_ptr<RelevanceBackend> relevance;
    std::unique_ptr<EvidenceBackend> evidence;
    if (args.backend == "oracle") {
        if (targets.empty()) {
            fail(ErrorCode::bad_argument,
                 "oracle backend needs planted targets (--targets or --gen-seed)");
        }
        relevance = std::make_unique<OracleRelevance>(targets, engine.oracle);
        evidence = std::make_unique<OracleEvidence>(targets, engine.oracle);
    } else if (args.backend == "remote") {
        relevance = std::make_unique<RemoteRelevance>(engine.relevance_remote);
        evidence = std::make_unique<RemoteEvidence>(engine.evidence_remote);
    } else {
        fail(ErrorCode::bad_argument, "unknown backend: " + args.backend);
    }
    CachedRelevance cached(*relevance);

    const SearchResult result = run_search(image, question, cached, *evidence, config);

    if (!args.trace_path.empty()) {
        write_text(args.trace_path, trace_to_jsonl(result.trace));
    }
    if (!args.selection_path.empty()) {
        write_text(args.selection_path,
                   selection_to_json(result.selection, image.width(), image.height()));
    }
    if (!args.out_path.empty()) {
        ReassemblyOptions reassembly_options;
        reassembly_options.sequential_tile = config.min_unit;
        const Canvas canvas = reassemble(image, result.selection,
                                         strategy_from_name(args.strategy),
                                         reassembly_options);
        save_png(canvas.image, args.out_path);
    }

    std::cout << "committed=" << result.selection.size() << " pops=" << result.trace.pops
              << " expansions=" << result.trace.expansions
              << " termination=" << result.trace.termination << "\n";
    return 0;
}

struct ReassembleArgs {
    std::string image_path;
    std::string selection_path;
    std::string strategy = "global";
    std::string out_path;
    std::string provenance_path;
    int tile = 224;
};

int cmd_reassemble(const ReassembleArgs& args) {
    const Image image = load_image(args.image_path);
    int w = 0, h = 0;
    const SelectionSet selection = selection_from_json(read_text(args.selection_path), &w, &h);
    if (w != image.width() || h != image.height()) {
        fail(ErrorCode::bad_argument, "selection was computed for a different image size");
    }
    ReassemblyOptions reassembly_options;
    reassembly_options.sequential_tile = args.tile;
    const Canvas canvas = reassemble(image, selection, strategy_from_name(args.strategy),
                                     reassembly_options);
    save_png(canvas.image, args.out_path);
    if (!args.provenance_path.empty()) {
        write_text(args.provenance_path, provenance_to_json(canvas));
    }
    std::cout << "canvas=" << canvas.image.width() << "x" << canvas.image.height()
              << " slots=" << canvas.slots.size() << "\n";
    return 0;
}

struct BenchArgs {
    int scenes = 100;
    int side = 4096;
    int targets = 1;
    std::string branching = "adaptive";
    std::string strategy = "global";
    std::uint64_t seed = 0;
    std::string report_path;
    std::string config_path;
    bool dispersed = false;
    int jobs = 0;
    bool capture_traces = false;
};

int cmd_bench(const BenchArgs& args) {
    EngineConfig engine;
    if (!args.config_path.empty()) engine = load_config(args.config_path);

    BenchOptions options;
    options.scenes = args.scenes;
    options.seed0 = args.seed;
    options.scene.side = args.side;
    options.scene.targets = args.targets;
    options.scene.distinct_roots = args.dispersed;
    options.config = engine.search;
    if (engine.auto_min_unit) {
        options.config.min_unit = min_search_unit(engine.backbone, args.side, args.side);
    }
    options.oracle = engine.oracle;
    options.branching = branching_from_name(args.branching);
    options.strategy = strategy_from_name(args.strategy);
    options.jobs = args.jobs;
    options.capture_traces = args.capture_traces;

    const BenchmarkReport report = run_benchmark(options);
    const std::string text = report_to_json(report);
    if (!args.report_path.empty()) {
        write_text(args.report_path, text);
    } else {
        std::cout << text << "\n";
    }
    std::cout << "scenes=" << report.rows.size()
              << " mean_recall=" << report.aggregates.mean_recall
              << " mean_pops=" << report.aggregates.mean_pops << "\n";
    return 0;
}

struct BoundArgs {
    std::int64_t long_side = 0;
    int min_unit = 0;
    int max_children = 6;
    std::uint64_t pop_budget = 0; // 0 = unbounded
};

int cmd_bound(const BoundArgs& args) {
    const std::uint64_t budget = args.pop_budget == 0 ? UINT64_MAX : args.pop_budget;
    const NodeBound bound = node_bound(args.long_side, args.min_unit, args.max_children, budget);
    std::cout << "D=" << bound.depth << "\n";
    std::cout << "bound=" << bound.nodes << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"gridzoom: query-driven zoom search and layout-aware reassembly for "
                 "ultra-high-resolution images"};
    app.require_subcommand(1);

    SearchArgs search_args;
    CLI::App* search = app.add_subcommand("search", "Run the zoom search on an image");
    search->add_option("--image", search_args.image_path, "Input PNG or JPEG");
    search->add_option("--question", search_args.question, "Query text");
    search->add_option("--config", search_args.config_path, "JSON config file");
    search->add_option("--backend", search_args.backend, "oracle|remote")
        ->check(CLI::IsMember({"oracle", "remote"}));
    search->add_option("--targets", search_args.targets_path,
                       "Target manifest JSON (oracle backend with --image)");
    search->add_option("--out", search_args.out_path, "Canvas PNG output");
    search->add_option("--trace", search_args.trace_path, "Trace JSONL output");
    search->add_option("--selection", search_args.selection_path, "Selection JSON output");
    search->add_option("--strategy", search_args.strategy, "global|relative|sequential");
    search->add_option("--gen-seed", search_args.gen_seed,
                       "Generate a synthetic scene with this seed instead of --image");
    search->add_option("--gen-side", search_args.gen_side, "Generated scene side length");
    search->add_option("--gen-targets", search_args.gen_targets, "Generated target count");
    search->add_flag("--gen-dispersed", search_args.gen_dispersed,
                     "Place generated targets in distinct coarse cells");
    search->add_option("--scene-out", search_args.scene_out_path,
                       "Write the generated scene PNG here");

    ReassembleArgs reassemble_args;
    CLI::App* reassemble_cmd =
        app.add_subcommand("reassemble", "Compose a canvas from a saved selection");
    reassemble_cmd->add_option("--image", reassemble_args.image_path, "Input PNG or JPEG")
        ->required();
    reassemble_cmd->add_option("--selection", reassemble_args.selection_path, "Selection JSON")
        ->required();
    reassemble_cmd->add_option("--strategy", reassemble_args.strategy,
                               "global|relative|sequential");
    reassemble_cmd->add_option("--out", reassemble_args.out_path, "Canvas PNG output")
        ->required();
    reassemble_cmd->add_option("--provenance", reassemble_args.provenance_path,
                               "Provenance JSON output");
    reassemble_cmd->add_option("--tile", reassemble_args.tile,
                               "Tile size for the sequential strategy");

    BenchArgs bench_args;
    CLI::App* bench = app.add_subcommand("bench", "Run the synthetic benchmark");
    bench->add_option("--scenes", bench_args.scenes, "Number of scenes");
    bench->add_option("--side", bench_args.side, "Scene side length");
    bench->add_option("--targets", bench_args.targets, "Targets per scene");
    bench->add_option("--branching", bench_args.branching, "adaptive|top1|top2|top3")
        ->check(CLI::IsMember({"adaptive", "top1", "top2", "top3"}));
    bench->add_option("--strategy", bench_args.strategy, "global|relative|sequential");
    bench->add_option("--seed", bench_args.seed, "First scene seed");
    bench->add_option("--report", bench_args.report_path, "Report JSON output");
    bench->add_option("--config", bench_args.config_path, "JSON config file");
    bench->add_flag("--dispersed", bench_args.dispersed,
                    "Place targets in distinct coarse cells");
    bench->add_option("--jobs", bench_args.jobs, "Worker threads (0 = auto)");
    bench->add_flag("--capture-traces", bench_args.capture_traces,
                    "Embed per-scene traces in the report");

    BoundArgs bound_args;
    CLI::App* bound = app.add_subcommand("bound", "Print the search depth and node bound");
    bound->add_option("--long-side", bound_args.long_side, "Image long side in px")->required();
    bound->add_option("--u-min", bound_args.min_unit, "Minimum search unit in px")->required();
    bound->add_option("--k-max", bound_args.max_children, "Branching cap");
    bound->add_option("--s-max", bound_args.pop_budget, "Step budget (0 = unbounded)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << "\n";
        return 2;
    }

    try {
        if (search->parsed()) return cmd_search(search_args);
        if (reassemble_cmd->parsed()) return cmd_reassemble(reassemble_args);
        if (bench->parsed()) return cmd_bench(bench_args);
        if (bound->parsed()) return cmd_bound(bound_args);
    } catch (const gridzoom::Error& e) {
        nlohmann::json err{{"error", {{"code", e.code_name()}, {"message", e.what()}}}};
        std::cerr << err.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        nlohmann::json err{{"error", {{"code", "internal"}, {"message", e.what()}}}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
