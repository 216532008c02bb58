#include "synthetic.hpp"
#include "test_support.hpp"

#include "circa/imaging/codec.hpp"
#include "circa/io.hpp"
#include "circa/models/decision.hpp"
#include "circa/pipeline/cleaning.hpp"
#include "circa/pipeline/config.hpp"
#include "circa/pipeline/engine.hpp"
#include "circa/pipeline/saliency.hpp"
#include "circa/pipeline/sampling.hpp"
#include "circa/pipeline/training.hpp"
#include "circa/rng.hpp"

#include <cmath>
#include <numbers>
#include <map>
#include <set>
#include <thread>

using namespace circa;
using namespace circa::pipeline;

namespace {

std::filesystem::path fixtures() { return test::source_dir() / "fixtures"; }

PipelineConfig mock_config(const Json& overrides = Json::object()) {
    return load_pipeline_config(fixtures() / "mock.yaml", map_environment({}), overrides);
}

std::vector<std::uint8_t> chest_png(ClassLabel label, std::uint64_t seed, int width = 640, int height = 576) {
    synthetic::ChestParams p;
    p.label = label;
    p.seed = seed;
    p.width = width;
    p.height = height;
    return imaging::encode_png(synthetic::make_chest(p));
}

std::vector<std::uint8_t> black_png(int w = 600, int h = 600) { return imaging::encode_png(imaging::RasterImage(w, h, 0.0)); }

/// Classifier stub with a caller-supplied response over the raw input.
class FunctionClassifier : public models::ModelBackend {
public:
    using Fn = std::function<std::array<double, 3>(const models::Tensor&)>;
    explicit FunctionClassifier(Fn fn)
        : fn_(std::move(fn)),
          d_{"test-classifier", models::BackendRole::ImageClassifier, "mock", {1, 1, -1, -1}, {1, 3}, 1, true} {}
    const models::BackendDescriptor& descriptor() const override { return d_; }

protected:
    models::Tensor run(const models::Tensor& input) override {
        const auto p = fn_(input);
        return {{1, 3}, {static_cast<float>(p[0]), static_cast<float>(p[1]), static_cast<float>(p[2])}};
    }

private:
    Fn fn_;
    models::BackendDescriptor d_;
};

/// Mock segmentation that shrinks the lungs when the input's top-left
/// corner is bright, so one marked case scores lower than the rest.
class MarkedSegmentation : public models::ModelBackend {
public:
    MarkedSegmentation()
        : normal_(models::make_mock_segmentation()),
          shrunk_(models::make_mock_segmentation({168.0, 250.0, 344.0, 250.0, 55.0, 150.0})) {}
    const models::BackendDescriptor& descriptor() const override { return normal_->descriptor(); }

protected:
    models::Tensor run(const models::Tensor& input) override {
        double corner = 0.0;
        const auto w = static_cast<std::size_t>(input.shape[3]);
        for (std::size_t y = 0; y < 8; ++y)
            for (std::size_t x = 0; x < 8; ++x) corner += input.data[y * w + x];
        return models::run_inference(corner / 64.0 > 0.9 ? *shrunk_ : *normal_, input);
    }

private:
    std::unique_ptr<models::ModelBackend> normal_;
    std::unique_ptr<models::ModelBackend> shrunk_;
};

std::vector<std::string> ids_of(const DatasetManifest& m) {
    std::vector<std::string> ids;
    for (const auto& c : m.cases) ids.push_back(c.id);
    return ids;
}

}  // namespace

// ---------------------------------------------------------------- config

TEST(Config, DefaultsAreValid) {
    const auto cfg = load_pipeline_config(std::nullopt, map_environment({}));
    EXPECT_NO_THROW(cfg.validate());
    EXPECT_DOUBLE_EQ(cfg.low_quantile, 0.0025);
    EXPECT_DOUBLE_EQ(cfg.high_quantile, 0.9975);
    EXPECT_DOUBLE_EQ(cfg.roi_low_quantile, 0.0005);
    EXPECT_DOUBLE_EQ(cfg.roi_high_quantile, 0.9995);
    EXPECT_EQ(cfg.min_lung_dimension, 300);
    EXPECT_EQ(cfg.sr_trigger, 512);
    EXPECT_EQ(cfg.knn_k, 10);
    ASSERT_TRUE(cfg.segmentation);
    EXPECT_EQ(cfg.segmentation->provider, "mock");
    EXPECT_FALSE(cfg.super_resolution);
}

TEST(Config, LayerPrecedence) {
    const auto dir = test::scratch_dir("config_layers");
    write_file_text(dir / "c.yaml", "gates:\n  min_lung_dimension: 280\n  quality_threshold: 0.6\n");
    const auto env = map_environment({{"CIRCA_GATES_MIN_LUNG_DIMENSION", "250"},
                                      {"CIRCA_EMBEDDING_K", "7"},
                                      {"CIRCA_SERVICE_TOKENS", "alpha,beta"}});

    const auto env_only = load_settings(std::nullopt, env);
    EXPECT_EQ(env_only["gates"]["min_lung_dimension"], 250);
    EXPECT_EQ(env_only["embedding"]["k"], 7);
    EXPECT_EQ(env_only["service"]["tokens"], Json::array({"alpha", "beta"}));

    const auto with_file = load_settings(dir / "c.yaml", env);
    EXPECT_EQ(with_file["gates"]["min_lung_dimension"], 280);
    EXPECT_EQ(with_file["embedding"]["k"], 7);

    const auto with_flags = load_settings(dir / "c.yaml", env, Json{{"gates", {{"min_lung_dimension", 320}}}});
    EXPECT_EQ(with_flags["gates"]["min_lung_dimension"], 320);
    EXPECT_DOUBLE_EQ(with_flags["gates"]["quality_threshold"].get<double>(), 0.6);
}

TEST(Config, StrictKeysExceptBackendOptions) {
    const auto dir = test::scratch_dir("config_strict");
    write_file_text(dir / "bad.yaml", "gates:\n  min_lung_dimensoin: 280\n");
    EXPECT_CIRCA_ERROR(load_settings(dir / "bad.yaml", map_environment({})), ErrorCode::InvalidConfig);
    write_file_text(dir / "ok.yaml", "backends:\n  segmentation:\n    options: {semi_y: 100, anything: 1}\n");
    const auto s = load_settings(dir / "ok.yaml", map_environment({}));
    EXPECT_EQ(s["backends"]["segmentation"]["options"]["semi_y"], 100);
    EXPECT_CIRCA_ERROR(load_settings(std::nullopt, map_environment({}), Json{{"nope", 1}}), ErrorCode::InvalidConfig);
    write_file_text(dir / "broken.yaml", "gates: [1, 2\n");
    EXPECT_CIRCA_ERROR(load_settings(dir / "broken.yaml", map_environment({})), ErrorCode::InvalidConfig);
}

TEST(Config, RangeValidation) {
    auto bad = [](const Json& o) { return load_pipeline_config(std::nullopt, map_environment({}), o); };
    EXPECT_CIRCA_ERROR(bad(Json{{"preprocess", {{"low_quantile", 0.9}, {"high_quantile", 0.1}}}}), ErrorCode::InvalidConfig);
    EXPECT_CIRCA_ERROR(bad(Json{{"gates", {{"min_lung_dimension", -1}}}}), ErrorCode::InvalidConfig);
    EXPECT_CIRCA_ERROR(bad(Json{{"embedding", {{"k", 0}}}}), ErrorCode::InvalidConfig);
    EXPECT_CIRCA_ERROR(load_pipeline_config(std::nullopt, map_environment({{"CIRCA_EMBEDDING_K", "ten"}})),
                       ErrorCode::InvalidConfig);
}

TEST(Config, RelativeModelPathsResolveAgainstFile) {
    const auto cfg = mock_config();
    EXPECT_EQ(cfg.models.dense, fixtures() / "models" / "dense.cmf");
    EXPECT_TRUE(std::filesystem::exists(cfg.models.dense));
}

// ---------------------------------------------------------------- engine

TEST(Engine, FixtureEngineIsHealthy) {
    const Engine engine(mock_config());
    EXPECT_TRUE(engine.healthy());
    EXPECT_EQ(engine.backend_status().size(), 4u);
    for (const auto& a : engine.artifact_status()) EXPECT_TRUE(a.loaded) << a.name << ": " << a.error;
}

TEST(Engine, GoldenFixtureIsReproduced) {
    const Engine engine(mock_config());
    const auto bytes = read_file_bytes(fixtures() / "fixture.png");
    const auto golden = read_file_text(fixtures() / "fixture_result.json");
    const auto first = canonical_dump(engine.process_case(bytes).to_json(false)) + "\n";
    const auto second = canonical_dump(engine.process_case(bytes).to_json(false)) + "\n";
    EXPECT_EQ(first, second);
    EXPECT_EQ(first, golden);
}

TEST(Engine, AcceptedResultIsConsistent) {
    const Engine engine(mock_config());
    const auto r = engine.process_case(read_file_bytes(fixtures() / "fixture.png"));
    ASSERT_TRUE(r.accepted());
    ASSERT_TRUE(r.probabilities && r.decided && r.subtype && r.embedding);
    EXPECT_EQ(*r.decided, models::decide_class(*r.probabilities));
    EXPECT_EQ(r.subtype->label, *r.decided);
    EXPECT_NEAR(r.probabilities->p[0] + r.probabilities->p[1] + r.probabilities->p[2], 1.0, 1e-9);
    const std::vector<std::string> stages{"decode",  "standardize", "contrast",   "resize",
                                          "segmentation", "postprocess", "quality", "size_gate",
                                          "quality_gate", "roi", "image_classifier", "radiomics",
                                          "feature_extractor", "radiomics_classifier", "aggregation", "embedding",
                                          "subtype"};
    std::set<std::string> seen;
    for (const auto& t : r.timings) {
        EXPECT_GE(t.milliseconds, 0.0) << t.stage;
        seen.insert(t.stage);
    }
    for (const auto& s : stages) EXPECT_TRUE(seen.count(s)) << s;
}

TEST(Engine, BlackImageIsRejectedBeforeClassification) {
    const Engine engine(mock_config());
    const auto r = engine.process_case(black_png());
    ASSERT_TRUE(r.rejection);
    EXPECT_EQ(r.rejection->reason, RejectionReason::NoLungFound);
    const auto j = r.to_json(false);
    EXPECT_FALSE(j.contains("classification"));
    EXPECT_FALSE(j.contains("subtype"));
    EXPECT_EQ(engine.segmentation_backend()->calls(), 1u);
    EXPECT_EQ(engine.classifier_backend()->calls(), 0u);
    EXPECT_EQ(engine.feature_backend()->calls(), 0u);
}

TEST(Engine, SmallLungsAreRejectedWithMeasuredSize) {
    const Engine engine(mock_config(
        Json{{"backends", {{"segmentation", {{"provider", "mock"}, {"options", {{"semi_x", 50}, {"semi_y", 100}}}}}}}}));
    const auto r = engine.process_case(read_file_bytes(fixtures() / "fixture.png"));
    ASSERT_TRUE(r.rejection);
    EXPECT_EQ(r.rejection->reason, RejectionReason::TooSmall);
    EXPECT_TRUE(r.size_gate.evaluated);
    EXPECT_FALSE(r.size_gate.passed);
    EXPECT_NEAR(r.size_gate.height, 250, 3);
    EXPECT_GE(r.size_gate.width, 300);
    EXPECT_EQ(r.rejection->details["height"], r.size_gate.height);
    EXPECT_EQ(r.rejection->details["min_dimension"], 300);
    EXPECT_FALSE(r.quality_gate.evaluated);
    EXPECT_TRUE(r.artifacts.mask);
    EXPECT_EQ(engine.classifier_backend()->calls(), 0u);
    EXPECT_EQ(engine.feature_backend()->calls(), 0u);
}

TEST(Engine, LowQualityGateAndBypass) {
    const Json strict{{"gates", {{"quality_report", ""}, {"quality_threshold", 0.99}}}};
    const Engine engine(mock_config(strict));
    const auto bytes = read_file_bytes(fixtures() / "fixture.png");
    const auto r = engine.process_case(bytes);
    ASSERT_TRUE(r.rejection);
    EXPECT_EQ(r.rejection->reason, RejectionReason::LowQuality);
    EXPECT_TRUE(r.size_gate.passed);
    EXPECT_TRUE(r.quality_gate.evaluated);
    ASSERT_TRUE(r.quality);
    EXPECT_DOUBLE_EQ(r.quality_gate.score, r.quality->value);
    EXPECT_TRUE(r.artifacts.mask);
    EXPECT_EQ(engine.classifier_backend()->calls(), 0u);

    const Engine bypass(mock_config(Json{{"gates", {{"quality_report", ""}, {"quality_threshold", 0.99}, {"quality", false}}}}));
    EXPECT_TRUE(bypass.process_case(bytes).accepted());
}

TEST(Engine, QualityReportSetsThreshold) {
    const Engine engine(mock_config());
    const auto report = Json::parse(read_file_text(fixtures() / "models" / "quality_report.json"));
    EXPECT_DOUBLE_EQ(engine.quality_threshold(), report["threshold"].get<double>());
}

TEST(Engine, SmallInputsUseSuperResolutionOrFallback) {
    const auto small = chest_png(ClassLabel::Normal, 5, 320, 288);
    const Engine fallback(mock_config());
    const auto a = fallback.process_case(small);
    EXPECT_FALSE(a.super_resolution);
    EXPECT_TRUE(a.super_resolution_fallback);

    const Engine sr(mock_config(Json{{"backends", {{"super_resolution", {{"provider", "mock"}}}}}}));
    const auto b = sr.process_case(small);
    EXPECT_TRUE(b.super_resolution);
    EXPECT_FALSE(b.super_resolution_fallback);
    EXPECT_GT(sr.super_resolution_backend()->calls(), 0u);

    const auto large = sr.process_case(read_file_bytes(fixtures() / "fixture.png"));
    EXPECT_FALSE(large.super_resolution);
    EXPECT_FALSE(large.super_resolution_fallback);
}

TEST(Engine, MissingModelIsStageTaggedBackendError) {
    const Engine engine(mock_config(Json{{"models", {{"tree", ""}}}}));
    EXPECT_FALSE(engine.healthy());
    try {
        engine.process_case(read_file_bytes(fixtures() / "fixture.png"));
        ADD_FAILURE() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::BackendUnavailable);
        EXPECT_EQ(e.stage(), "aggregation");
    }
}

TEST(Engine, UnsupportedBytesFailAtDecode) {
    const Engine engine(mock_config());
    const std::string text = "plain text, not an image";
    try {
        engine.process_case(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
        ADD_FAILURE() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnsupportedFormat);
        EXPECT_EQ(e.stage(), "decode");
    }
}

TEST(Engine, ConcurrentCasesMatchSequential) {
    const Engine engine(mock_config());
    std::vector<std::vector<std::uint8_t>> inputs;
    for (std::uint64_t s = 0; s < 4; ++s) inputs.push_back(chest_png(kAllClasses[s % 3], 40 + s));
    std::vector<std::string> sequential, concurrent(inputs.size());
    for (const auto& in : inputs) sequential.push_back(canonical_dump(engine.process_case(in).to_json(false)));
    {
        std::vector<std::jthread> pool;
        for (std::size_t i = 0; i < inputs.size(); ++i)
            pool.emplace_back([&, i] { concurrent[i] = canonical_dump(engine.process_case(inputs[i]).to_json(false)); });
    }
    EXPECT_EQ(sequential, concurrent);
}

// ---------------------------------------------------------------- saliency

TEST(Saliency, ConstantClassifierGivesZeroMap) {
    FunctionClassifier cls([](const models::Tensor&) { return std::array<double, 3>{0.2, 0.3, 0.5}; });
    const auto img = test::random_raster(64, 64, 3);
    const auto map = occlusion_saliency(img, &cls, 16, 8, ClassLabel::Covid);
    EXPECT_EQ(map.drops.width(), 7);
    EXPECT_EQ(map.drops.height(), 7);
    const auto shown = map.display(64, 64);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) ASSERT_EQ(shown.at(x, y), 0.0);
}

TEST(Saliency, QuadrantResponseConcentratesMass) {
    FunctionClassifier cls([](const models::Tensor& t) {
        const auto w = static_cast<std::size_t>(t.shape[3]);
        const auto h = static_cast<std::size_t>(t.shape[2]);
        double s = 0.0;
        for (std::size_t y = 0; y < h / 2; ++y)
            for (std::size_t x = 0; x < w / 2; ++x) s += t.data[y * w + x];
        const double m = s / static_cast<double>(w * h / 4);
        const double covid = 0.1 + 0.8 * m;
        return std::array<double, 3>{(1.0 - covid) / 2.0, (1.0 - covid) / 2.0, covid};
    });
    const imaging::RasterImage img(64, 64, 1.0);
    const auto shown = occlusion_saliency(img, &cls, 16, 8, ClassLabel::Covid).display(64, 64);
    double inside = 0.0, total = 0.0;
    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
            total += shown.at(x, y);
            if (x < 32 && y < 32) inside += shown.at(x, y);
        }
    }
    ASSERT_GT(total, 0.0);
    EXPECT_GE(inside / total, 0.8);
}

TEST(Saliency, FullImagePatchGivesSingleCell) {
    FunctionClassifier cls([](const models::Tensor& t) {
        double s = 0.0;
        for (float v : t.data) s += v;
        const double covid = 0.1 + 0.8 * s / static_cast<double>(t.data.size());
        return std::array<double, 3>{(1.0 - covid) / 2.0, (1.0 - covid) / 2.0, covid};
    });
    const imaging::RasterImage img(32, 32, 0.75);
    const auto map = occlusion_saliency(img, &cls, 32, 8, ClassLabel::Covid);
    ASSERT_EQ(map.drops.width(), 1);
    ASSERT_EQ(map.drops.height(), 1);
    EXPECT_NEAR(map.baseline, 0.7, 1e-6);
    EXPECT_NEAR(map.drops.at(0, 0), 0.7 - 0.1, 1e-6);
    EXPECT_EQ(occlusion_saliency(img, &cls, 64, 8, ClassLabel::Covid).drops.width(), 1);
}

TEST(Saliency, NeedsClassifier) {
    const imaging::RasterImage img(16, 16, 0.5);
    EXPECT_CIRCA_ERROR(occlusion_saliency(img, nullptr, 8, 8, ClassLabel::Normal), ErrorCode::BackendUnavailable);
}

TEST(Saliency, EngineAttachesDisplayMap) {
    const Engine engine(mock_config(Json{{"saliency", {{"enabled", true}, {"patch", 128}, {"stride", 128}}}}));
    const auto r = engine.process_case(read_file_bytes(fixtures() / "fixture.png"));
    ASSERT_TRUE(r.artifacts.saliency);
    EXPECT_EQ(r.artifacts.saliency->width(), 512);
    EXPECT_EQ(r.artifacts.saliency->height(), 512);
}

// ---------------------------------------------------------------- cleaning

namespace {

DatasetManifest corpus_manifest(const std::filesystem::path& dir, const std::vector<std::vector<std::uint8_t>>& images) {
    DatasetManifest m;
    m.base_dir = dir;
    for (std::size_t i = 0; i < images.size(); ++i) {
        CaseEntry e;
        e.id = "case-" + std::to_string(i);
        e.dataset = "t";
        e.label = kAllClasses[i % 3];
        e.file = e.id + ".png";
        write_file_bytes(dir / e.file, images[i]);
        m.cases.push_back(std::move(e));
    }
    return m;
}

std::vector<std::uint8_t> marked_chest(std::uint64_t seed) {
    synthetic::ChestParams p;
    p.seed = seed;
    auto img = synthetic::make_chest(p);
    for (int y = 0; y < 40; ++y)
        for (int x = 0; x < 40; ++x) img.at(x, y) = 1.0;
    return imaging::encode_png(img);
}

}  // namespace

TEST(Cleaning, SingleLowScoringCaseIsRejected) {
    const auto dir = test::scratch_dir("clean_one_bad");
    std::vector<std::vector<std::uint8_t>> images;
    for (std::uint64_t s = 0; s < 7; ++s) images.push_back(chest_png(kAllClasses[s % 3], 100 + s));
    images.push_back(marked_chest(3));
    const auto manifest = corpus_manifest(dir, images);
    const Engine engine(load_pipeline_config(std::nullopt, map_environment({})), std::make_shared<MarkedSegmentation>(),
                        models::make_mock_classifier(), nullptr, models::make_mock_feature_extractor());
    const auto out = clean_dataset(manifest, engine, 2);
    ASSERT_TRUE(out.report.threshold);
    ASSERT_EQ(out.report.rejections.size(), 1u);
    EXPECT_EQ(out.report.rejections[0].id, "case-7");
    EXPECT_EQ(out.report.rejections[0].reason, "LowQuality");
    EXPECT_LT(*out.report.rejections[0].score, *out.report.threshold);
    EXPECT_EQ(out.report.kept_cases, 7u);
    for (const auto& [id, score] : out.report.scores) {
        if (id != "case-7") EXPECT_GE(score, *out.report.threshold);
    }
    const auto serial = clean_dataset(manifest, engine, 1);
    EXPECT_EQ(canonical_dump(serial.report.to_json()), canonical_dump(out.report.to_json()));
}

TEST(Cleaning, IdenticalCorpusKeepsEverything) {
    const auto dir = test::scratch_dir("clean_identical");
    const auto img = chest_png(ClassLabel::Normal, 9);
    const auto manifest = corpus_manifest(dir, std::vector(6, img));
    const Engine engine(load_pipeline_config(std::nullopt, map_environment({})));
    const auto out = clean_dataset(manifest, engine, 1);
    ASSERT_TRUE(out.report.fence);
    EXPECT_LE(*out.report.threshold, out.report.scores.front().second);
    EXPECT_TRUE(out.report.rejections.empty());
    EXPECT_EQ(out.cleaned.cases.size(), 6u);
}

TEST(Cleaning, PerCaseFailuresAreRecorded) {
    const auto dir = test::scratch_dir("clean_failures");
    std::vector<std::vector<std::uint8_t>> images{chest_png(ClassLabel::Normal, 1), black_png(), {'x', 'y', 'z'}};
    const auto manifest = corpus_manifest(dir, images);
    const Engine engine(load_pipeline_config(std::nullopt, map_environment({})));
    const auto out = clean_dataset(manifest, engine, 1);
    ASSERT_EQ(out.report.rejections.size(), 2u);
    EXPECT_EQ(out.report.rejections[0].reason, "NoLungFound");
    EXPECT_EQ(out.report.rejections[1].reason, "Error");
    EXPECT_EQ(out.report.rejections[1].details["code"], "UnsupportedFormat");
    EXPECT_FALSE(out.report.threshold);
    EXPECT_EQ(ids_of(out.cleaned), std::vector<std::string>{"case-0"});
}

// ---------------------------------------------------------------- training helpers

TEST(Training, CorpusFeaturesSkipRejections) {
    const auto dir = test::scratch_dir("corpus_features");
    const auto manifest = corpus_manifest(dir, {chest_png(ClassLabel::Normal, 1), black_png(), chest_png(ClassLabel::Covid, 2)});
    const Engine engine(load_pipeline_config(std::nullopt, map_environment({})));
    const auto a = extract_corpus_features(manifest, engine, 1);
    EXPECT_EQ(a.radiomics.ids, (std::vector<std::string>{"case-0", "case-2"}));
    EXPECT_EQ(a.radiomics.columns.size(), 261u);
    EXPECT_EQ(a.deep.columns.size(), 261u);
    EXPECT_EQ(a.image_probs.columns, image_probability_columns());
    ASSERT_EQ(a.rejections.size(), 1u);
    EXPECT_EQ(a.rejections[0].reason, "NoLungFound");
    const auto b = extract_corpus_features(manifest, engine, 3);
    EXPECT_EQ(a.radiomics.rows, b.radiomics.rows);
    EXPECT_EQ(a.deep.rows, b.deep.rows);

    const auto stats = corpus_train_stats(manifest, engine, 1);
    EXPECT_EQ(stats.mean.size(), 512u * 512u);
}

TEST(Training, LabelTablesRoundTrip) {
    const auto dir = test::scratch_dir("labels");
    LabelTable t{{"a", "b", "c"}, {ClassLabel::Covid, ClassLabel::Normal, ClassLabel::Pneumonia}};
    write_label_csv(dir / "l.csv", t);
    EXPECT_EQ(read_label_csv(dir / "l.csv").labels, t.labels);
    radiomics::FeatureMatrix m{{"c", "a"}, {"x"}, {{1.0}, {2.0}}};
    EXPECT_EQ(align_labels(m, t), (std::vector<int>{1, 2}));
    m.ids.push_back("zzz");
    m.rows.push_back({3.0});
    EXPECT_CIRCA_ERROR(align_labels(m, t), ErrorCode::InvalidArgument);
    write_file_text(dir / "bad.csv", "id,label\na,influenza\n");
    EXPECT_CIRCA_ERROR(read_label_csv(dir / "bad.csv"), ErrorCode::CorruptStream);
}

TEST(Training, BranchMatrixJoinsById) {
    radiomics::FeatureMatrix image{{"a", "b"}, image_probability_columns(), {{0.1, 0.2, 0.7}, {0.5, 0.4, 0.1}}};
    radiomics::FeatureMatrix rad{{"b", "a"}, {"r0", "r1", "r2"}, {{0.3, 0.3, 0.4}, {0.9, 0.05, 0.05}}};
    const auto m = branch_matrix(image, rad);
    EXPECT_EQ(m.columns, branch_columns());
    EXPECT_EQ(m.rows[0], (std::vector<double>{0.1, 0.2, 0.7, 0.9, 0.05, 0.05}));
    EXPECT_EQ(m.rows[1], (std::vector<double>{0.5, 0.4, 0.1, 0.3, 0.3, 0.4}));
    rad.ids[0] = "q";
    EXPECT_CIRCA_ERROR(branch_matrix(image, rad), ErrorCode::InvalidArgument);
}

// ---------------------------------------------------------------- sampling

namespace {

models::Gaussian2D unit_gaussian(double x, double y, double weight) {
    models::Gaussian2D g;
    g.weight = weight;
    g.mean = {x, y};
    g.cov = {1.0, 0.0, 1.0};
    return g;
}

models::GmmModel2D three_blob_model() {
    models::GmmModel2D m;
    for (std::size_t c = 0; c < 3; ++c) {
        const double off = 100.0 * static_cast<double>(c);
        m.classes[c].components = {unit_gaussian(off, 0, 1.0 / 3), unit_gaussian(off + 50, 0, 1.0 / 3),
                                   unit_gaussian(off - 50, 0, 1.0 / 3)};
    }
    return m;
}

CaseEntry located(std::string id, std::string dataset, ClassLabel label, double x, double y) {
    CaseEntry e;
    e.id = std::move(id);
    e.dataset = std::move(dataset);
    e.label = label;
    e.file = e.id + ".png";
    e.coords = models::Point2{x, y};
    return e;
}

}  // namespace

TEST(Sampling, WeightedDrawFollowsWeights) {
    const std::vector<double> w{0.9, 0.1};
    Rng rng(11);
    int first = 0;
    for (int t = 0; t < 10000; ++t) first += weighted_sample_without_replacement(w, 1, rng)[0] == 0;
    EXPECT_NEAR(first / 10000.0, 0.9, 0.02);
    Rng r2(1);
    auto all = weighted_sample_without_replacement(std::vector<double>{0.0, 0.0, 0.0}, 3, r2);
    std::sort(all.begin(), all.end());
    EXPECT_EQ(all, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Sampling, StratifiedDrawFollowsComponentDensity) {
    // Two covid cases in the C1 cell at density ratio 9:1, one case in each sibling cell.
    const double r = std::sqrt(2.0 * std::log(9.0));
    const auto gmm = three_blob_model();
    DatasetManifest m;
    m.cases = {located("near", "d", ClassLabel::Covid, 200, 0), located("far", "d", ClassLabel::Covid, 200 + r, 0),
               located("s2", "d", ClassLabel::Covid, 250, 0), located("s3", "d", ClassLabel::Covid, 150, 0)};
    const double dn = gmm.classes[2].components[0].density({200, 0});
    const double df = gmm.classes[2].components[0].density({200 + r, 0});
    ASSERT_NEAR(dn / df, 9.0, 1e-9);
    int near = 0;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
        const auto split = stratified_sample(m, gmm, 1, seed);
        ASSERT_EQ(split.holdout.cases.size(), 3u);
        for (const auto& c : split.holdout.cases) near += c.id == "near";
    }
    EXPECT_NEAR(near / 10000.0, 0.9, 0.02);
}

TEST(Sampling, ExactCellsAreExhausted) {
    const auto gmm = three_blob_model();
    DatasetManifest m;
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 4; ++i)
            m.cases.push_back(located("n" + std::to_string(k) + std::to_string(i), "d", ClassLabel::Normal,
                                      std::array{0.0, 50.0, -50.0}[k] + 0.1 * i, 0));
    const auto split = stratified_sample(m, gmm, 4, 3);
    EXPECT_EQ(split.holdout.cases.size(), 12u);
    EXPECT_TRUE(split.train.cases.empty());
    for (const auto& c : split.holdout.cases) EXPECT_TRUE(c.subtype);
}

TEST(Sampling, DeficitIsRedistributedWithinClass) {
    const auto gmm = three_blob_model();
    DatasetManifest m;
    Rng rng(5);
    for (const std::string ds : {"alpha", "beta"}) {
        for (auto label : kAllClasses) {
            const double base = 100.0 * index_of(label);
            // No cases near the first component; 120 and 200 around the others.
            for (int i = 0; i < 120; ++i)
                m.cases.push_back(located(ds + std::string(to_string(label)) + "b" + std::to_string(i), ds, label,
                                          base + 50 + rng.normal(), rng.normal()));
            for (int i = 0; i < 200; ++i)
                m.cases.push_back(located(ds + std::string(to_string(label)) + "c" + std::to_string(i), ds, label,
                                          base - 50 + rng.normal(), rng.normal()));
        }
    }
    const auto split = stratified_sample(m, gmm, 50, 17);
    std::map<std::pair<std::string, ClassLabel>, int> per_class;
    for (const auto& c : split.holdout.cases) ++per_class[{c.dataset, *c.label}];
    for (const std::string ds : {"alpha", "beta"})
        for (auto label : kAllClasses) EXPECT_EQ((per_class[{ds, label}]), 150) << ds << " " << to_string(label);
    for (const auto& cell : split.cells) {
        EXPECT_LE(cell.quota, cell.available);
        if (cell.available == 0) EXPECT_EQ(cell.quota, 0u);
    }

    // Partition: disjoint, complete, order preserved.
    const auto hold_ids = ids_of(split.holdout);
    const std::set<std::string> hold(hold_ids.begin(), hold_ids.end());
    std::size_t hi = 0, ti = 0;
    for (const auto& c : m.cases) {
        if (hold.count(c.id)) {
            ASSERT_EQ(split.holdout.cases.at(hi++).id, c.id);
        } else {
            ASSERT_EQ(split.train.cases.at(ti++).id, c.id);
        }
    }
    EXPECT_EQ(hi + ti, m.cases.size());
    EXPECT_EQ(hi, split.holdout.cases.size());
    EXPECT_EQ(ti, split.train.cases.size());

    const auto again = stratified_sample(m, gmm, 50, 17);
    EXPECT_EQ(ids_of(again.holdout), ids_of(split.holdout));
}

TEST(Sampling, QuotaArithmetic) {
    EXPECT_EQ(distribute_quota(std::vector<std::size_t>{50, 50, 50}, 50), (std::vector<std::size_t>{50, 50, 50}));
    EXPECT_EQ(distribute_quota(std::vector<std::size_t>{0, 120, 200}, 50), (std::vector<std::size_t>{0, 66, 84}));
    EXPECT_EQ(distribute_quota(std::vector<std::size_t>{10, 100, 100}, 50), (std::vector<std::size_t>{10, 70, 70}));
    EXPECT_CIRCA_ERROR(distribute_quota(std::vector<std::size_t>{40, 40, 40}, 50), ErrorCode::InsufficientClassCases);
}

TEST(Sampling, InsufficientClassAndMissingCoords) {
    const auto gmm = three_blob_model();
    DatasetManifest m;
    for (int i = 0; i < 100; ++i) m.cases.push_back(located("p" + std::to_string(i), "d", ClassLabel::Pneumonia, 100 + (i % 3 - 1) * 50, 0));
    EXPECT_CIRCA_ERROR(stratified_sample(m, gmm, 50, 0), ErrorCode::InsufficientClassCases);
    m.cases[0].coords.reset();
    EXPECT_CIRCA_ERROR(stratified_sample(m, gmm, 10, 0), ErrorCode::InvalidArgument);
}
