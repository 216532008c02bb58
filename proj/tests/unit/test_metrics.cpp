#include "circa/metrics/metrics.hpp"
#include "circa/pipeline/manifest.hpp"
#include "circa/rng.hpp"
#include "test_support.hpp"

using namespace circa;
using namespace circa::metrics;
using circa::pipeline::CaseEntry;
using circa::pipeline::DatasetManifest;
using circa::segmentation::BinaryMask;

namespace {

BinaryMask random_mask(Rng& rng, int w, int h, double p) {
    BinaryMask m(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m.set(x, y, rng.uniform() < p);
    return m;
}

ConfusionMatrix3 table_one_covid_matrix() {
    // Covid row: 2000 cases, 1833 found. Non-covid: 10000 cases, 647 flagged as covid.
    ConfusionMatrix3 cm;
    cm.counts = {{{4500, 180, 320}, {150, 4523, 327}, {100, 67, 1833}}};
    return cm;
}

void expect_rate(const Rate& r, double want, double tol = 1e-12) {
    ASSERT_TRUE(r.has_value());
    EXPECT_NEAR(*r, want, tol);
}

}  // namespace

TEST(Dice, Examples) {
    BinaryMask a(20, 20), b(20, 20);
    for (int i = 0; i < 100; ++i) a.set(i % 10, i / 10, true);
    EXPECT_DOUBLE_EQ(dice(a, a), 1.0);
    for (int i = 0; i < 100; ++i) b.set(10 + i % 10, 10 + i / 10, true);
    EXPECT_DOUBLE_EQ(dice(a, b), 0.0);
    BinaryMask c(20, 20);
    for (int i = 0; i < 100; ++i) c.set(5 + i % 10, i / 10, true);  // overlaps a in 50 pixels
    EXPECT_DOUBLE_EQ(dice(a, c), 0.5);
    EXPECT_DOUBLE_EQ(dice(BinaryMask(4, 4), BinaryMask(4, 4)), 1.0);
    EXPECT_CIRCA_ERROR(dice(BinaryMask(4, 4), BinaryMask(4, 5)), ErrorCode::DimensionMismatch);
}

TEST(Dice, SymmetricAndBounded) {
    Rng rng(1);
    for (int t = 0; t < 100; ++t) {
        const auto a = random_mask(rng, 13, 9, rng.uniform());
        const auto b = random_mask(rng, 13, 9, rng.uniform());
        const double d = dice(a, b);
        EXPECT_EQ(d, dice(b, a));
        EXPECT_GE(d, 0.0);
        EXPECT_LE(d, 1.0);
    }
}

TEST(ClassMetrics, PerfectDiagonal) {
    ConfusionMatrix3 cm;
    cm.counts = {{{5, 0, 0}, {0, 7, 0}, {0, 0, 9}}};
    const auto r = class_metrics(cm);
    for (const auto& c : r.classes)
        for (const auto& v : c.values) expect_rate(v, 1.0);
    EXPECT_EQ(r.total, 21u);
}

TEST(ClassMetrics, CovidColumnConstruction) {
    const auto cm = table_one_covid_matrix();
    const auto o = one_vs_rest(cm, ClassLabel::Covid);
    EXPECT_EQ(o, (OneVsRest{1833, 647, 167, 9353}));
    const auto r = class_metrics(cm)[ClassLabel::Covid];
    expect_rate(r[Metric::Sensitivity], 0.9165);
    expect_rate(r[Metric::Specificity], 0.9353);
    expect_rate(r[Metric::Ppv], 1833.0 / 2480.0);
    expect_rate(r[Metric::Npv], 9353.0 / 9520.0);
    expect_rate(r[Metric::Accuracy], 11186.0 / 12000.0);
    expect_rate(r[Metric::BalancedAccuracy], (0.9165 + 0.9353) / 2.0);
    const double ppv = 1833.0 / 2480.0;
    expect_rate(r[Metric::F1], 2.0 * ppv * 0.9165 / (ppv + 0.9165));
    EXPECT_NEAR(*r[Metric::Ppv], 0.7391, 1e-4);
    EXPECT_NEAR(*r[Metric::Npv], 0.9825, 1e-4);
}

TEST(ClassMetrics, UndefinedMarkers) {
    ConfusionMatrix3 cm;
    cm.counts = {{{5, 2, 0}, {1, 7, 0}, {3, 1, 0}}};
    const auto r = class_metrics(cm);
    const auto& covid = r[ClassLabel::Covid];
    EXPECT_FALSE(covid[Metric::Ppv].has_value());
    EXPECT_FALSE(covid[Metric::F1].has_value());
    expect_rate(covid[Metric::Sensitivity], 0.0);
    expect_rate(covid[Metric::Specificity], 1.0);
    EXPECT_TRUE(r.to_json()["classes"]["covid"]["ppv"].is_null());
    EXPECT_CIRCA_ERROR(class_metrics(ConfusionMatrix3{}), ErrorCode::EmptyMatrix);
}

TEST(ClassMetrics, RandomMatrixProperties) {
    Rng rng(2);
    for (int t = 0; t < 500; ++t) {
        ConfusionMatrix3 cm;
        for (auto& row : cm.counts)
            for (auto& v : row) v = rng.uniform() < 0.3 ? 0 : rng.below(50);
        if (cm.total() == 0) continue;
        const auto r = class_metrics(cm);
        for (ClassLabel c : kAllClasses) {
            const auto& rep = r[c];
            for (const auto& v : rep.values)
                if (v) {
                    EXPECT_GE(*v, 0.0);
                    EXPECT_LE(*v, 1.0);
                }
            if (rep[Metric::Sensitivity] && rep[Metric::Specificity]) {
                EXPECT_EQ(*rep[Metric::BalancedAccuracy], (*rep[Metric::Sensitivity] + *rep[Metric::Specificity]) / 2.0);
            }
            const bool f1_undefined = !rep[Metric::Ppv] || !rep[Metric::Sensitivity] ||
                                      (*rep[Metric::Ppv] == 0.0 && *rep[Metric::Sensitivity] == 0.0);
            EXPECT_EQ(!rep[Metric::F1].has_value(), f1_undefined);
            const auto o = *rep.counts;
            EXPECT_EQ(o.tp + o.fp + o.fn + o.tn, cm.total());
        }
    }
}

namespace {

SubtypeReport subtype_with_accuracy(std::string name, double acc, std::uint64_t n) {
    SubtypeReport s;
    s.subtype = std::move(name);
    s.count = n;
    for (auto& c : s.report.classes) c[Metric::Accuracy] = acc;
    return s;
}

}  // namespace

TEST(WeightedClass, Examples) {
    std::vector<SubtypeReport> same{subtype_with_accuracy("N1", 0.8, 10), subtype_with_accuracy("N2", 0.8, 30),
                                    subtype_with_accuracy("N3", 0.8, 5)};
    auto w = weighted_class_from_subtypes(same);
    expect_rate(w[0][Metric::Accuracy], 0.8);
    EXPECT_EQ(w[0].support, 45u);
    EXPECT_FALSE(w[1][Metric::Accuracy].has_value());

    std::vector<SubtypeReport> halves{subtype_with_accuracy("C1", 1.0, 100), subtype_with_accuracy("C2", 0.5, 100)};
    w = weighted_class_from_subtypes(halves);
    expect_rate(w[2][Metric::Accuracy], 0.75);

    halves.push_back(subtype_with_accuracy("C3", 0.0, 0));
    w = weighted_class_from_subtypes(halves);
    expect_rate(w[2][Metric::Accuracy], 0.75);

    auto undefined = subtype_with_accuracy("C3", 0.0, 50);
    undefined.report.classes[2][Metric::Accuracy].reset();
    halves.back() = undefined;
    w = weighted_class_from_subtypes(halves);
    expect_rate(w[2][Metric::Accuracy], 0.75);

    std::vector<SubtypeReport> zero{subtype_with_accuracy("P1", 0.3, 0)};
    EXPECT_CIRCA_ERROR(weighted_class_from_subtypes(zero), ErrorCode::ZeroTotalWeight);
}

namespace {

struct Corpus {
    DatasetManifest manifest;
    std::vector<Prediction> predictions;
};

Corpus labelled_corpus(std::uint64_t seed) {
    Rng rng(seed);
    Corpus c;
    int id = 0;
    for (const char* tag : {"alpha", "beta"}) {
        for (ClassLabel label : kAllClasses) {
            for (int s = 1; s <= 3; ++s) {
                for (int i = 0; i < 4 + static_cast<int>(rng.below(5)); ++i) {
                    CaseEntry e;
                    e.id = "case" + std::to_string(id++);
                    e.dataset = tag;
                    e.label = label;
                    e.subtype = std::string(1, subtype_prefix(label)) + std::to_string(s);
                    c.manifest.cases.push_back(e);
                    c.predictions.push_back({e.id, label});
                }
            }
        }
    }
    return c;
}

}  // namespace

TEST(EvaluateManifest, PerfectPredictions) {
    const auto corpus = labelled_corpus(3);
    const auto report = evaluate_manifest(corpus.predictions, corpus.manifest);
    // Subtype cells hold positives only, so specificity-side rates stay undefined.
    for (const auto& c : report.overall.classes) {
        for (Metric m : {Metric::Ppv, Metric::Sensitivity, Metric::Accuracy, Metric::F1}) expect_rate(c[m], 1.0);
        for (const auto& v : c.values)
            if (v) EXPECT_EQ(*v, 1.0);
        EXPECT_FALSE(c[Metric::Specificity].has_value());
    }
    for (const auto& c : report.overall.pooled_report.classes)
        for (const auto& v : c.values) expect_rate(v, 1.0);
    ASSERT_EQ(report.overall.subtypes.size(), 9u);
    for (const auto& s : report.overall.subtypes) {
        const auto label = s.subtype[0] == 'N' ? ClassLabel::Normal : s.subtype[0] == 'P' ? ClassLabel::Pneumonia : ClassLabel::Covid;
        expect_rate(s.report[label][Metric::Sensitivity], 1.0);
        expect_rate(s.report[label][Metric::Accuracy], 1.0);
    }
}

TEST(EvaluateManifest, SingleErrorIsLocal) {
    const auto corpus = labelled_corpus(4);
    const auto before = evaluate_manifest(corpus.predictions, corpus.manifest);
    auto changed = corpus.predictions;
    std::size_t target = 0;
    for (std::size_t i = 0; i < corpus.manifest.cases.size(); ++i)
        if (corpus.manifest.cases[i].subtype == "C3") target = i;
    changed[target].predicted = ClassLabel::Pneumonia;
    const auto after = evaluate_manifest(changed, corpus.manifest);
    for (std::size_t i = 0; i < before.overall.subtypes.size(); ++i) {
        const auto& name = before.overall.subtypes[i].subtype;
        const bool same = canonical_dump(before.overall.subtypes[i].report.to_json()) ==
                          canonical_dump(after.overall.subtypes[i].report.to_json());
        EXPECT_EQ(same, name != "C3") << name;
    }
    EXPECT_EQ(canonical_dump(before.overall.classes[0].to_json()), canonical_dump(after.overall.classes[0].to_json()));
    EXPECT_EQ(canonical_dump(before.overall.classes[1].to_json()), canonical_dump(after.overall.classes[1].to_json()));
    EXPECT_NE(canonical_dump(before.overall.classes[2].to_json()), canonical_dump(after.overall.classes[2].to_json()));

    // Direct recount of the C3 covid sensitivity.
    std::uint64_t n = 0, hit = 0;
    for (std::size_t i = 0; i < changed.size(); ++i) {
        if (corpus.manifest.cases[i].subtype != "C3") continue;
        ++n;
        hit += changed[i].predicted == ClassLabel::Covid;
    }
    for (const auto& s : after.overall.subtypes)
        if (s.subtype == "C3") expect_rate(s.report[ClassLabel::Covid][Metric::Sensitivity], double(hit) / double(n));
}

TEST(EvaluateManifest, AdditivityAcrossTagsAndSubtypes) {
    auto corpus = labelled_corpus(5);
    Rng rng(6);
    for (auto& p : corpus.predictions) p.predicted = class_from_index(static_cast<int>(rng.below(3)));
    const auto report = evaluate_manifest(corpus.predictions, corpus.manifest);
    ConfusionMatrix3 tag_sum;
    for (const auto& [tag, scope] : report.datasets) {
        tag_sum += scope.pooled;
        for (ClassLabel c : kAllClasses) {
            ConfusionMatrix3 sub_sum;
            for (const auto& [name, cm] : scope.subtype_matrices)
                if (name[0] == subtype_prefix(c)) sub_sum += cm;
            ConfusionMatrix3 cell;
            cell.counts[static_cast<std::size_t>(index_of(c))] = scope.pooled.counts[static_cast<std::size_t>(index_of(c))];
            EXPECT_EQ(sub_sum, cell) << tag;
        }
    }
    EXPECT_EQ(tag_sum, report.overall.pooled);
}

TEST(EvaluateManifest, SerializationAndErrors) {
    auto corpus = labelled_corpus(7);
    corpus.predictions[0].predicted = ClassLabel::Covid;
    const auto report = evaluate_manifest(corpus.predictions, corpus.manifest);
    const auto j = report.to_json();
    EXPECT_TRUE(j.contains("datasets"));
    EXPECT_TRUE(j["datasets"].contains("alpha"));
    EXPECT_TRUE(j["subtypes"].contains("N1"));
    const auto csv = report.to_csv();
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "dataset,level,group,metric,value");
    std::size_t rows = 0;
    for (char ch : csv) rows += ch == '\n';
    // (3 class + 3 pooled + 9 subtype) groups x 7 metrics for "all" and each of 2 tags, plus header.
    EXPECT_EQ(rows, 1u + 3u * 15u * 7u);

    auto bad = corpus.predictions;
    bad.push_back({"ghost1", ClassLabel::Normal});
    bad.push_back({"ghost2", ClassLabel::Normal});
    try {
        evaluate_manifest(bad, corpus.manifest);
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingPredictions);
        EXPECT_NE(std::string(e.what()).find("ghost1, ghost2"), std::string::npos);
    }

    std::map<std::string, std::string> overrides{{corpus.predictions[0].id, "C1"}};
    EXPECT_CIRCA_ERROR(evaluate_manifest(corpus.predictions, corpus.manifest, overrides), ErrorCode::InvalidArgument);
}

TEST(EvaluateManifest, FallsBackToPooledWithoutSubtypes) {
    auto corpus = labelled_corpus(8);
    for (auto& c : corpus.manifest.cases) c.subtype.reset();
    const auto report = evaluate_manifest(corpus.predictions, corpus.manifest);
    EXPECT_TRUE(report.overall.subtypes.empty());
    for (ClassLabel c : kAllClasses)
        EXPECT_EQ(canonical_dump(report.overall.classes[static_cast<std::size_t>(index_of(c))].to_json()),
                  canonical_dump(report.overall.pooled_report[c].to_json()));
}

TEST(Manifest, RoundTripAndValidation) {
    DatasetManifest m;
    CaseEntry a;
    a.id = "a";
    a.dataset = "polcovid";
    a.label = ClassLabel::Covid;
    a.file = "img/a.png";
    a.subtype = "C2";
    a.coords = std::array<double, 2>{0.1234567890123, -4.5};
    CaseEntry b;
    b.id = "b";
    b.dataset = "gan";
    b.file = "/abs/b.png";
    b.synthetic = true;
    m.cases = {a, b};
    const auto dir = test::scratch_dir("manifest");
    pipeline::write_manifest(dir / "m.jsonl", m);
    const auto back = pipeline::read_manifest(dir / "m.jsonl");
    ASSERT_EQ(back.cases.size(), 2u);
    EXPECT_EQ(back.cases[0].coords, a.coords);
    EXPECT_EQ(back.cases[0].subtype, a.subtype);
    EXPECT_FALSE(back.cases[1].label.has_value());
    EXPECT_TRUE(back.cases[1].synthetic);
    EXPECT_EQ(back.resolve(back.cases[0]), dir / "img/a.png");
    EXPECT_EQ(back.resolve(back.cases[1]), std::filesystem::path("/abs/b.png"));
    EXPECT_EQ(pipeline::format_manifest(back), pipeline::format_manifest(m));

    EXPECT_CIRCA_ERROR(pipeline::parse_manifest("{\"id\":\"x\"}\n"), ErrorCode::CorruptStream);
    EXPECT_CIRCA_ERROR(pipeline::parse_manifest("{\"manifest_schema\":2}\n"), ErrorCode::CorruptStream);
    EXPECT_CIRCA_ERROR(pipeline::parse_manifest("{\"manifest_schema\":1}\nnot json\n"), ErrorCode::CorruptStream);
    EXPECT_CIRCA_ERROR(pipeline::parse_manifest("{\"manifest_schema\":1}\n{\"id\":\"x\",\"dataset\":\"d\",\"label\":\"flu\"}\n"),
                       ErrorCode::CorruptStream);
    EXPECT_CIRCA_ERROR(
        pipeline::parse_manifest("{\"manifest_schema\":1}\n{\"id\":\"x\",\"dataset\":\"d\"}\n{\"id\":\"x\",\"dataset\":\"d\"}\n"),
        ErrorCode::InvalidArgument);
    m.cases[0].subtype = "P1";
    EXPECT_CIRCA_ERROR(m.validate(), ErrorCode::InvalidArgument);
}
