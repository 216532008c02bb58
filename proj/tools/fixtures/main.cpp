// Regenerates the shipped mock-backend fixtures: a synthetic training corpus is
// pushed through the pipeline front half and every native model is fitted on it.
#include "synthetic.hpp"

#include "circa/error.hpp"
#include "circa/imaging/codec.hpp"
#include "circa/io.hpp"
#include "circa/json.hpp"
#include "circa/models/tree.hpp"
#include "circa/pipeline/cleaning.hpp"
#include "circa/pipeline/config.hpp"
#include "circa/pipeline/engine.hpp"
#include "circa/pipeline/training.hpp"
#include "circa/radiomics/catalog.hpp"
#include "circa/radiomics/selection.hpp"
#include "circa/rng.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace circa;

namespace {

struct Options {
    fs::path out = "fixtures";
    fs::path work;
    int per_class = 60;
    int jobs = 1;
    std::uint64_t seed = 2024;
};

const char* kConfig = R"(# Mock-backend configuration used by the golden fixture.
gates:
  quality_report: models/quality_report.json
backends:
  segmentation: {provider: mock}
  image_classifier: {provider: mock}
  feature_extractor: {provider: mock}
  super_resolution: {provider: none}
models:
  train_stats: models/train_stats.cmf
  radiomics_selection: models/radiomics_selection.json
  radiomics_scaler: models/radiomics_scaler.cmf
  dense: models/dense.cmf
  tree: models/tree.cmf
  feature_scaler: models/feature_scaler.cmf
  pca: models/pca.cmf
  embedding_index: models/embedding_index.cmf
  gmm: models/gmm.cmf
seed: 2024
)";

pipeline::DatasetManifest make_corpus(const Options& opt) {
    fs::create_directories(opt.work / "images");
    pipeline::DatasetManifest m;
    m.base_dir = opt.work;
    Rng rng(opt.seed);
    for (auto label : kAllClasses) {
        for (int i = 0; i < opt.per_class; ++i) {
            synthetic::ChestParams p;
            p.label = label;
            p.severity = 0.4 + 1.2 * rng.uniform();
            p.seed = derive_seed(opt.seed, static_cast<std::uint64_t>(index_of(label) * 10000 + i));
            const std::string id = std::string(to_string(label)) + "-" + std::to_string(i);
            const auto file = "images/" + id + ".png";
            write_file_bytes(opt.work / file, imaging::encode_png(synthetic::make_chest(p)));
            pipeline::CaseEntry e;
            e.id = id;
            e.dataset = i % 2 ? "synth-b" : "synth-a";
            e.label = label;
            e.file = file;
            e.synthetic = true;
            m.cases.push_back(std::move(e));
        }
    }
    return m;
}

pipeline::PipelineConfig config_with(const Json& overrides) {
    return pipeline::load_pipeline_config(std::nullopt, pipeline::map_environment({}), overrides);
}

void generate(const Options& opt) {
    const auto models_dir = opt.out / "models";
    fs::create_directories(models_dir);
    auto manifest = make_corpus(opt);
    std::cerr << "corpus: " << manifest.cases.size() << " cases\n";

    const pipeline::Engine bare(config_with(Json::object()));
    const auto cleaning = pipeline::clean_dataset(manifest, bare, opt.jobs);
    if (!cleaning.report.threshold) throw Error(ErrorCode::EmptyDataset, "cleaning produced no quality fence");
    write_file_text(models_dir / "quality_report.json", canonical_dump(cleaning.report.to_json()) + "\n");
    manifest = cleaning.cleaned;
    std::cerr << "cleaning kept " << manifest.cases.size() << ", fence " << *cleaning.report.threshold << "\n";

    segmentation::save_train_stats(models_dir / "train_stats.cmf", pipeline::corpus_train_stats(manifest, bare, opt.jobs));
    const pipeline::Engine staged(
        config_with(Json{{"models", {{"train_stats", (models_dir / "train_stats.cmf").string()}}}}));
    const auto corpus = pipeline::extract_corpus_features(manifest, staged, opt.jobs);
    if (!corpus.rejections.empty()) throw Error(ErrorCode::EmptyDataset, "cleaned case rejected during extraction");
    const auto labels = pipeline::labels_from_manifest(manifest);
    const auto y = pipeline::align_labels(corpus.radiomics, labels);

    auto report = radiomics::rank_features(corpus.radiomics.rows, y, corpus.radiomics.columns);
    const auto selected = radiomics::select_features(report);
    write_file_text(models_dir / "radiomics_selection.json", canonical_dump(radiomics::to_json(report)) + "\n");
    const auto chosen = radiomics::select_columns(corpus.radiomics, selected);
    const auto scaler = radiomics::fit_scaler(chosen.rows);
    radiomics::save_scaler(models_dir / "radiomics_scaler.cmf", scaler);
    std::vector<std::vector<double>> scaled;
    for (const auto& row : chosen.rows) scaled.push_back(radiomics::apply_scaler(scaler, row));

    models::DenseTrainConfig dcfg;
    dcfg.hidden_widths = {64, 32, 16};
    dcfg.batch_size = 32;
    dcfg.epochs = 80;
    dcfg.seed = opt.seed;
    models::DenseTrainHistory history;
    const auto dense = models::dense_train(scaled, y, dcfg, &history);
    models::save_dense(models_dir / "dense.cmf", dense);
    std::cerr << "dense: " << selected.size() << " inputs, loss " << history.initial_loss << " -> "
              << history.epoch_loss.back() << "\n";

    const auto branches = pipeline::branch_matrix(
        corpus.image_probs, pipeline::radiomics_branch_matrix(dense, selected, &scaler, corpus.radiomics));
    models::TreeConfig tcfg;
    tcfg.min_leaf = 10;
    tcfg.class_weights = {0.1, 0.3, 0.9};
    tcfg.seed = opt.seed;
    const auto tree = models::tree_fit(branches.rows, y, tcfg);
    models::save_tree(models_dir / "tree.cmf", tree);
    std::cerr << "tree: depth " << tree.depth() << ", " << tree.leaf_count() << " leaves\n";

    const auto fscaler = radiomics::fit_scaler(corpus.deep.rows);
    radiomics::save_scaler(models_dir / "feature_scaler.cmf", fscaler);
    const auto pca = models::pca_fit(pipeline::reduce_features(corpus.deep, &fscaler, nullptr).rows, 0.90);
    models::save_pca(models_dir / "pca.cmf", pca);
    const auto reduced = pipeline::reduce_features(corpus.deep, &fscaler, &pca);

    // Stand-in for an externally computed 2D embedding: the two leading axes.
    const auto full = models::pca_fit(pipeline::reduce_features(corpus.deep, &fscaler, nullptr).rows, 1.0);
    for (auto& c : manifest.cases) {
        const auto* row = &corpus.deep.rows[0];
        for (std::size_t i = 0; i < corpus.deep.ids.size(); ++i) {
            if (corpus.deep.ids[i] == c.id) row = &corpus.deep.rows[i];
        }
        const auto z = models::pca_transform(full, radiomics::apply_scaler(fscaler, *row));
        c.coords = models::Point2{z.at(0), z.at(1)};
    }
    models::save_embedding_index(models_dir / "embedding_index.cmf", pipeline::build_embedding_index(reduced, manifest, 10));
    std::cerr << "pca: " << pca.n_components() << " components\n";

    models::GmmConfig gcfg;
    gcfg.seed = opt.seed;
    models::save_gmm(models_dir / "gmm.cmf", models::gmm_fit(pipeline::coords_by_class(manifest), gcfg));
    pipeline::write_manifest(opt.out / "training_manifest.jsonl", manifest);

    write_file_text(opt.out / "mock.yaml", kConfig);
    write_file_text(opt.out / "feature_catalog.json",
                    canonical_dump(radiomics::FeatureCatalog::standard().to_json()) + "\n");
    synthetic::ChestParams fp;
    fp.label = ClassLabel::Covid;
    fp.seed = 99;
    const auto fixture = imaging::encode_png(synthetic::make_chest(fp));
    write_file_bytes(opt.out / "fixture.png", fixture);

    const pipeline::Engine engine(pipeline::load_pipeline_config(opt.out / "mock.yaml", pipeline::map_environment({})));
    if (!engine.healthy()) throw Error(ErrorCode::CorruptModel, "fixture engine is not healthy");
    const auto result = engine.process_case(fixture);
    write_file_text(opt.out / "fixture_result.json", canonical_dump(result.to_json(false)) + "\n");
    std::cerr << "fixture: " << canonical_dump(result.to_json(false).value("classification", Json())) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regenerate mock-backend fixtures and model artifacts"};
    Options opt;
    app.add_option("--out", opt.out, "Fixture directory")->capture_default_str();
    app.add_option("--work", opt.work, "Scratch directory for the synthetic corpus (default: system temp)");
    app.add_option("--per-class", opt.per_class, "Synthetic cases per class")->capture_default_str();
    app.add_option("--jobs", opt.jobs, "Worker threads")->capture_default_str();
    app.add_option("--seed", opt.seed, "Seed")->capture_default_str();
    CLI11_PARSE(app, argc, argv);
    if (opt.work.empty()) opt.work = fs::temp_directory_path() / "circa-fixture-corpus";
    try {
        generate(opt);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
