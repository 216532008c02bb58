#include "circa/cli/cli.hpp"

#include "circa/error.hpp"
#include "circa/imaging/codec.hpp"
#include "circa/io.hpp"
#include "circa/json.hpp"
#include "circa/metrics/metrics.hpp"
#include "circa/models/gmm.hpp"
#include "circa/models/pca.hpp"
#include "circa/models/tree.hpp"
#include "circa/parallel.hpp"
#include "circa/pipeline/cleaning.hpp"
#include "circa/pipeline/config.hpp"
#include "circa/pipeline/engine.hpp"
#include "circa/pipeline/saliency.hpp"
#include "circa/pipeline/sampling.hpp"
#include "circa/pipeline/training.hpp"
#include "circa/radiomics/selection.hpp"
#include "circa/service/service.hpp"
#include "circa/version.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <csignal>
#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <thread>

namespace circa::cli {
namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Config file plus --set overrides shared by every engine-backed command.
struct ConfigFlags {
    std::string file;
    std::vector<std::string> set;

    void add_to(CLI::App& app) {
        app.add_option("--config", file, "Config file (YAML or JSON); CIRCA_* variables apply underneath");
        app.add_option("--set", set, "Override one setting as dotted.key=value (repeatable)");
    }

    std::optional<fs::path> path() const {
        if (file.empty()) return std::nullopt;
        return fs::path(file);
    }

    /// --set values, then `extra` on top.
    Json overrides(const Json& extra = Json::object()) const {
        Json o = Json::object();
        for (const auto& item : set) {
            const auto eq = item.find('=');
            if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + item + "'");
            Json value = pipeline::parse_settings_text("v: " + item.substr(eq + 1))["v"];
            Json* slot = &o;
            std::string key = item.substr(0, eq);
            std::size_t start = 0;
            while (true) {
                const auto dot = key.find('.', start);
                const auto part = key.substr(start, dot - start);
                if (part.empty()) throw UsageError("--set has an empty key segment in '" + item + "'");
                if (dot == std::string::npos) {
                    (*slot)[part] = value;
                    break;
                }
                slot = &(*slot)[part];
                if (!slot->is_object()) *slot = Json::object();
                start = dot + 1;
            }
        }
        pipeline::merge_settings(o, extra, false);
        return o;
    }

    pipeline::PipelineConfig pipeline(const Json& extra = Json::object()) const {
        return pipeline::load_pipeline_config(path(), pipeline::process_environment(), overrides(extra));
    }
};

radiomics::FeatureMatrix load_matrix(const fs::path& path) {
    return path.extension() == ".csv" ? radiomics::read_feature_csv(path) : radiomics::read_feature_columns(path);
}

void save_matrix(const fs::path& path, const radiomics::FeatureMatrix& m) {
    if (path.extension() == ".csv") {
        radiomics::write_feature_csv(path, m);
    } else {
        radiomics::write_feature_columns(path, m);
    }
}

void write_json(const fs::path& path, const Json& j) { write_file_text(path, canonical_dump(j) + "\n"); }

/// File references rewritten relative to the directory the manifest is written to.
pipeline::DatasetManifest relocate(pipeline::DatasetManifest m, const fs::path& target) {
    const auto dir = fs::absolute(target).parent_path();
    for (auto& c : m.cases) c.file = fs::proximate(fs::absolute(m.resolve(c)), dir).generic_string();
    m.base_dir = dir;
    return m;
}

std::array<double, 3> parse_weights(const std::vector<double>& w) {
    if (w.size() != 3) throw UsageError("--class-weights needs three values (normal, pneumonia, covid)");
    return {w[0], w[1], w[2]};
}

Json rejections_json(const std::vector<pipeline::CaseRejection>& rejections) {
    Json arr = Json::array();
    for (const auto& r : rejections) {
        arr.push_back(Json{{"id", r.id},
                           {"reason", r.reason},
                           {"score", r.score ? Json(*r.score) : Json(nullptr)},
                           {"message", r.message},
                           {"details", r.details}});
    }
    return arr;
}

void report_rejections(std::ostream& err, const std::vector<pipeline::CaseRejection>& rejections) {
    for (const auto& r : rejections) err << "rejected " << r.id << ": " << r.reason << " (" << r.message << ")\n";
}

Json gmm_summary(const models::GmmModel2D& model) {
    Json classes = Json::object();
    for (auto c : kAllClasses) {
        const auto& mix = model[c];
        Json comps = Json::array();
        int k = 0;
        for (const auto& g : mix.components) {
            comps.push_back(Json{{"subtype", std::string(1, subtype_prefix(c)) + std::to_string(++k)},
                                 {"weight", g.weight},
                                 {"mean", g.mean},
                                 {"cov", g.cov}});
        }
        classes[std::string(to_string(c))] = Json{{"components", comps},
                                                  {"log_likelihood", mix.log_likelihood},
                                                  {"bic", mix.bic},
                                                  {"iterations", mix.iterations},
                                                  {"converged", mix.converged},
                                                  {"n_points", mix.n_points}};
    }
    return Json{{"classes", classes}, {"reg", model.reg}, {"restarts", model.restarts}, {"seed", model.seed}};
}

// ---------------------------------------------------------------- commands

struct Command {
    CLI::App* app = nullptr;
    std::function<int(std::ostream&, std::ostream&)> run;
};

CLI::App* subcommand(CLI::App& root, const std::string& name, const std::string& description) {
    auto* sub = root.add_subcommand(name, description);
    sub->option_defaults()->always_capture_default();
    return sub;
}

Command add_clean(CLI::App& root) {
    struct Opts {
        ConfigFlags cfg;
        std::string manifest, out, report;
        int jobs = 1;
    };
    auto o = std::make_shared<Opts>();
    auto* app = subcommand(root, "clean", "Segment and score a corpus; drop too-small and low-quality cases");
    app->add_option("--manifest", o->manifest, "Input manifest (JSON lines)")->required();
    app->add_option("--out", o->out, "Cleaned manifest to write")->required();
    app->add_option("--report", o->report, "Rejection report (JSON)");
    app->add_option("--jobs", o->jobs, "Worker threads")->check(CLI::PositiveNumber);
    o->cfg.add_to(*app);
    return {app, [o](std::ostream&, std::ostream& err) {
                const auto manifest = pipeline::read_manifest(o->manifest);
                const pipeline::Engine engine(o->cfg.pipeline());
                const auto res = pipeline::clean_dataset(manifest, engine, o->jobs);
                pipeline::write_manifest(o->out, relocate(res.cleaned, o->out));
                if (!o->report.empty()) write_json(o->report, res.report.to_json());
                report_rejections(err, res.report.rejections);
                err << "kept " << res.report.kept_cases << " of " << res.report.input_cases << " cases";
                if (res.report.threshold) err << " (quality fence " << *res.report.threshold << ")";
                err << "\n";
                return res.report.kept_cases == 0 ? kRejected : kSuccess;
            }};
}

Command add_features(CLI::App& root) {
    struct Opts {
        ConfigFlags cfg;
        std::string manifest, out, image_probs, deep, labels, stats_out, rejections;
        int jobs = 1;
    };
    auto o = std::make_shared<Opts>();
    auto* app = subcommand(root, "features", "Extract radiomics, image-branch probabilities and deep features");
    app->add_option("--manifest", o->manifest, "Input manifest (JSON lines)")->required();
    app->add_option("--out", o->out, "Radiomics matrix; .csv or column store")->required();
    app->add_option("--image-probs", o->image_probs, "Image-branch probabilities matrix");
    app->add_option("--deep", o->deep, "Feature-extractor matrix");
    app->add_option("--labels", o->labels, "Label table (CSV id,label)");
    app->add_option("--stats-out", o->stats_out,
                    "Fit per-pixel ROI statistics on this corpus first, save them here and use them");
    app->add_option("--rejections", o->rejections, "Rejected cases (JSON)");
    app->add_option("--jobs", o->jobs, "Worker threads")->check(CLI::PositiveNumber);
    o->cfg.add_to(*app);
    return {app, [o](std::ostream&, std::ostream& err) {
                const auto manifest = pipeline::read_manifest(o->manifest);
                Json extra = Json::object();
                if (!o->stats_out.empty()) {
                    const pipeline::Engine bare(o->cfg.pipeline());
                    segmentation::save_train_stats(o->stats_out, pipeline::corpus_train_stats(manifest, bare, o->jobs));
                    extra["models"]["train_stats"] = fs::absolute(o->stats_out).string();
                }
                const pipeline::Engine engine(o->cfg.pipeline(extra));
                const auto corpus = pipeline::extract_corpus_features(manifest, engine, o->jobs);
                save_matrix(o->out, corpus.radiomics);
                if (!o->image_probs.empty()) save_matrix(o->image_probs, corpus.image_probs);
                if (!o->deep.empty()) save_matrix(o->deep, corpus.deep);
                if (!o->labels.empty()) pipeline::write_label_csv(o->labels, pipeline::labels_from_manifest(manifest));
                if (!o->rejections.empty()) write_json(o->rejections, rejections_json(corpus.rejections));
                report_rejections(err, corpus.rejections);
                err << "extracted " << corpus.radiomics.rows.size() << " of " << manifest.cases.size() << " cases\n";
                return corpus.radiomics.rows.empty() ? kRejected : kSuccess;
            }};
}

Command add_select(CLI::App& root) {
    struct Opts {
        std::string features, labels, out;
        double min_eta = radiomics::kDefaultMinEta;
        std::size_t max = radiomics::kDefaultFeatureCap;
        std::uint64_t seed = 0;
    };
    auto o = std::make_shared<Opts>();
    auto* app = subcommand(root, "select-features", "Rank radiomics features by Kruskal-Wallis effect size");
    app->add_option("--features", o->features, "Radiomics matrix in catalog column order")->required();
    app->add_option("--labels", o->labels, "Label table (CSV id,label)")->required();
    app->add_option("--out", o->out, "Selection report (JSON)")->required();
    app->add_option("--min-eta", o->min_eta, "Minimum eta squared");
    app->add_option("--max", o->max, "Maximum number of selected features");
    app->add_option("--seed", o->seed, "Seed (ranking is deterministic; accepted for uniformity)");
    return {app, [o](std::ostream&, std::ostream& err) {
                const auto m = load_matrix(o->features);
                const auto y = pipeline::align_labels(m, pipeline::read_label_csv(o->labels));
                auto report = radiomics::rank_features(m.rows, y, m.columns);
                const auto selected = radiomics::select_features(report, o->min_eta, o->max);
                write_json(o->out, radiomics::to_json(report));
                err << "selected " << selected.size() << " of " << m.columns.size() << " features\n";
                return selected.empty() ? kRejected : kSuccess;
            }};
}

Command add_train_dense(CLI::App& root) {
    struct Opts {
        std::string features, labels, selection, out, scaler_out, image_probs, probs_out, history;
        std::vector<int> hidden{models::kHiddenWidths.begin(), models::kHiddenWidths.end()};
        int epochs = 100, batch = 128;
        double lr = 0.001, dropout = models::kDefaultDropout, l2 = models::kDefaultL2;
        std::vector<double> weights{0.1, 0.3, 0.9};
        std::uint64_t seed = 0;
    };
    auto o = std::make_shared<Opts>();
    auto* app = subcommand(root, "train-dense", "Train the radiomics dense classifier");
    app->add_option("--features", o->features, "Radiomics matrix in catalog column order")->required();
    app->add_option("--labels", o->labels, "Label table (CSV id,label)")->required();
    app->add_option("--selection", o->selection, "Selection report; all columns when omitted");
    app->add_option("--out", o->out, "Dense model file")->required();
    app->add_option("--scaler-out", o->scaler_out, "Input scaler file")->required();
    app->add_option("--hidden", o->hidden, "Hidden layer widths")->delimiter(',');
    app->add_option("--epochs", o->epochs, "Training epochs")->check(CLI::PositiveNumber);
    app->add_option("--batch-size", o->batch, "Mini-batch size")->check(CLI::PositiveNumber);
    app->add_option("--learning-rate", o->lr, "Nadam learning rate");
    app->add_option("--dropout", o->dropout, "Dropout rate after each hidden layer");
    app->add_option("--l2", o->l2, "L2 penalty on kernel weights");
    app->add_option("--class-weights", o->weights, "Loss weights for normal, pneumonia, covid")->delimiter(',');
    app->add_option("--image-probs", o->image_probs, "Image-branch probabilities, needed for --probs-out");
    app->add_option("--probs-out", o->probs_out, "Six-column aggregation input (CSV) for train-tree");
    app->add_option("--history", o->history, "Per-epoch loss (JSON)");
    app->add_option("--seed", o->seed, "Seed for initialization, shuffling and dropout");
    return {app, [o](std::ostream&, std::ostream& err) {
                if (!o->probs_out.empty() && o->image_probs.empty()) throw UsageError("--probs-out needs --image-probs");
                const auto full = load_matrix(o->features);
                const auto y = pipeline::align_labels(full, pipeline::read_label_csv(o->labels));
                std::vector<std::size_t> selection;
                if (!o->selection.empty()) {
                    selection = radiomics::selection_report_from_json(Json::parse(read_file_text(o->selection))).selected;
                }
                const auto m = selection.empty() ? full : radiomics::select_columns(full, selection);
                const auto scaler = radiomics::fit_scaler(m.rows);
                std::vector<std::vector<double>> x;
                for (const auto& row : m.rows) x.push_back(radiomics::apply_scaler(scaler, row));
                models::DenseTrainConfig cfg;
                cfg.hidden_widths = o->hidden;
                cfg.epochs = o->epochs;
                cfg.batch_size = o->batch;
                cfg.learning_rate = o->lr;
                cfg.dropout = o->dropout;
                cfg.l2 = o->l2;
                cfg.class_weights = parse_weights(o->weights);
                cfg.seed = o->seed;
                models::DenseTrainHistory history;
                const auto net = models::dense_train(x, y, cfg, &history);
                models::save_dense(o->out, net);
                radiomics::save_scaler(o->scaler_out, scaler);
                if (!o->history.empty()) {
                    write_json(o->history, Json{{"initial_loss", history.initial_loss}, {"epoch_loss", history.epoch_loss}});
                }
                if (!o->probs_out.empty()) {
                    const auto branch = pipeline::radiomics_branch_matrix(net, selection, &scaler, full);
                    radiomics::write_feature_csv(o->probs_out, pipeline::branch_matrix(load_matrix(o->image_probs), branch));
                }
                err << "weighted cross-entropy " << history.initial_loss << " -> "
                    << (history.epoch_loss.empty() ? history.initial_loss : history.epoch_loss.back()) << "\n";
                return kSuccess;
            }};
}

Command add_train_tree(CLI::App& root) {
    struct Opts {
        std::string features, labels, out;
        models::TreeConfig tree;
        std::vector<double> weights{0.1, 0.3, 0.9};
    };
    auto o = std::make_shared<Opts>();
    auto* app = subcommand(root, "train-tree", "Train the aggregation decision tree on branch probabilities");
    app->add_option("--features", o->features, "Aggregation input, e.g. from train-dense --probs-out")->required();
    app->add_option("--labels", o->labels, "Label table (CSV id,label)")->required();
    app->add_option("--out", o->out, "Tree model file")->required();
    app->add_option("--max-depth", o->tree.max_depth, "Maximum depth")->check(CLI::NonNegativeNumber);
    app->add_option("--min-leaf", o->tree.min_leaf, "Minimum training rows per leaf")->check(CLI::PositiveNumber);
    app->add_option("--features-per-split", o->tree.features_per_split, "Features drawn per split; 0 means all");
    app->add_option("--class-weights", o->weights, "Impurity weights for normal, pneumonia, covid")->delimiter(',');
    app->add_option("--seed", o->tree.seed, "Seed for the per-split feature draw");
    return {app, [o](std::ostream&, std::ostream& err) {
                const auto m = load_matrix(o->features);
                const auto y = pipeline::align_labels(m, pipeline::read_label_csv(o->labels));
                auto cfg = o->tree;
                cfg.class_weights = parse_weights(o->weights);
                const auto tree = models::tree_fit(m.rows, y, cfg);
                models::save_tree(o->out, tree);
                err << "tree depth " << tree.depth() << ", " << tree.leaf_count() << " leaves\n";
                return kSuccess;
            }};
}

Command add_fit_pca(CLI::App& root) {
    struct Opts {
        std::string features, out, scaler_out, reduced_out, manifest, index_out;
        double variance = 0.90;
        int k = models::kDefaultNeighbours;
        std::uint64_t seed = 0;
    };
    auto o = std::make_shared<Opts>();
    auto* app = subcommand(root, "fit-pca", "Scale deep features, fit PCA and build the embedding index");
    app->add_option("--features", o->features, "Feature-extractor matrix")->required();
    app->add_option("--out", o->out, "PCA model file")->required();
    app->add_option("--scaler-out", o->scaler_out, "Feature scaler file")->required();
    app->add_option("--variance", o->variance, "Retained variance fraction")->check(CLI::Range(0.0, 1.0));
    app->add_option("--reduced-out", o->reduced_out, "Reduced feature matrix");
    app->add_option("--manifest", o->manifest, "Manifest with 2D embedding coordinates, needed for --index-out");
    app->add_option("--index-out", o->index_out, "Embedding index file");
    app->add_option("--k", o->k, "Neighbours used by the embedding index")->check(CLI::PositiveNumber);
    app->add_option("--seed", o->seed, "Seed (the fit is deterministic; accepted for uniformity)");
    return {app, [o](std::ostream&, std::ostream& err) {
                if (!o->index_out.empty() && o->manifest.empty()) throw UsageError("--index-out needs --manifest");
                const auto m = load_matrix(o->features);
                const auto scaler = radiomics::fit_scaler(m.rows);
                const auto pca = models::pca_fit(pipeline::reduce_features(m, &scaler, nullptr).rows, o->variance);
                radiomics::save_scaler(o->scaler_out, scaler);
                models::save_pca(o->out, pca);
                const auto reduced = pipeline::reduce_features(m, &scaler, &pca);
                if (!o->reduced_out.empty()) save_matrix(o->reduced_out, reduced);
                if (!o->index_out.empty()) {
                    models::save_embedding_index(
                        o->index_out, pipeline::build_embedding_index(reduced, pipeline::read_manifest(o->manifest), o->k));
                }
                err << "kept " << pca.n_components() << " components of " << scaler.output_width() << "\n";
                return kSuccess;
            }};
}

Command add_fit_gmm(CLI::App& root) {
    struct Opts {
        std::string manifest, out, summary;
        models::GmmConfig gmm;
    };
    auto o = std::make_shared<Opts>();
    auto* app = subcommand(root, "fit-gmm", "Fit per-class 2D Gaussian mixtures on embedding coordinates");
    app->add_option("--manifest", o->manifest, "Labeled manifest with coordinates")->required();
    app->add_option("--out", o->out, "Mixture model file")->required();
    app->add_option("--summary", o->summary, "Component summary (JSON)");
    app->add_option("--components", o->gmm.components, "Components per class")->check(CLI::PositiveNumber);
    app->add_option("--restarts", o->gmm.restarts, "EM restarts; best by BIC")->check(CLI::PositiveNumber);
    app->add_option("--reg", o->gmm.reg, "Covariance ridge")->check(CLI::NonNegativeNumber);
    app->add_option("--tolerance", o->gmm.tolerance, "Convergence tolerance on the objective");
    app->add_option("--max-iterations", o->gmm.max_iterations, "EM iteration cap")->check(CLI::PositiveNumber);
    app->add_option("--seed", o->gmm.seed, "Seed for restart initialization");
    return {app, [o](std::ostream&, std::ostream& err) {
                const auto manifest = pipeline::read_manifest(o->manifest);
                const auto model = models::gmm_fit(pipeline::coords_by_class(manifest), o->gmm);
                models::save_gmm(o->out, model);
                if (!o->summary.empty()) write_json(o->summary, gmm_summary(model));
                for (auto c : kAllClasses) err << to_string(c) << " BIC " << model[c].bic << "\n";
                return kSuccess;
            }};
}

Command add_split(CLI::App& root) {
    struct Opts {
        std::string manifest, gmm, holdout, train, report;
        std::size_t per_cell = pipeline::kDefaultPerCell;
        std::uint64_t seed = 0;
    };
    auto o = std::make_shared<Opts>();
    auto* app = subcommand(root, "split", "Density-guided holdout sampling per subtype and dataset");
    app->add_option("--manifest", o->manifest, "Labeled manifest with coordinates")->required();
    app->add_option("--gmm", o->gmm, "Mixture model file")->required();
    app->add_option("--holdout-out", o->holdout, "Holdout manifest")->required();
    app->add_option("--train-out", o->train, "Training manifest")->required();
    app->add_option("--report", o->report, "Per-cell quotas (JSON)");
    app->add_option("--per-cell", o->per_cell, "Holdout cases per subtype and dataset")->check(CLI::PositiveNumber);
    app->add_option("--seed", o->seed, "Sampling seed");
    return {app, [o](std::ostream&, std::ostream& err) {
                const auto manifest = pipeline::read_manifest(o->manifest);
                const auto res = pipeline::stratified_sample(manifest, models::load_gmm(o->gmm), o->per_cell, o->seed);
                pipeline::write_manifest(o->holdout, relocate(res.holdout, o->holdout));
                pipeline::write_manifest(o->train, relocate(res.train, o->train));
                if (!o->report.empty()) write_json(o->report, res.report());
                err << "holdout " << res.holdout.cases.size() << ", train " << res.train.cases.size() << "\n";
                return kSuccess;
            }};
}

Command add_predict(CLI::App& root) {
    struct Opts {
        ConfigFlags cfg;
        std::string image, manifest, out, results, format, artifacts;
        bool timings = false;
        int jobs = 1;
    };
    auto o = std::make_shared<Opts>();
    auto* app = subcommand(root, "predict", "Run the full pipeline on one image or a manifest");
    auto* image = app->add_option("--image", o->image, "Image file; the result JSON goes to stdout");
    auto* manifest = app->add_option("--manifest", o->manifest, "Batch mode: manifest of cases");
    image->excludes(manifest);
    app->add_option("--format", o->format, "Format hint: png, jpeg or dicom; sniffed when empty");
    app->add_flag("--timings", o->timings, "Include stage timings in single-image output");
    app->add_option("--artifacts", o->artifacts, "Directory for mask.png, roi.png and saliency.png (single image)");
    app->add_option("--out", o->out, "Batch mode: predictions (CSV id,label)");
    app->add_option("--results", o->results, "Batch mode: full results (JSON lines)");
    app->add_option("--jobs", o->jobs, "Worker threads in batch mode")->check(CLI::PositiveNumber);
    o->cfg.add_to(*app);
    return {app, [o](std::ostream& out, std::ostream& err) {
                if (o->image.empty() == o->manifest.empty()) throw UsageError("give exactly one of --image or --manifest");
                auto hint = imaging::ImageFormat::Auto;
                if (!o->format.empty()) {
                    const auto f = imaging::parse_image_format(o->format);
                    if (!f) throw UsageError("unknown --format " + o->format);
                    hint = *f;
                }
                const pipeline::Engine engine(o->cfg.pipeline());
                if (!o->image.empty()) {
                    const auto r = engine.process_case(read_file_bytes(o->image), hint);
                    out << canonical_dump(r.to_json(o->timings)) << "\n";
                    if (!o->artifacts.empty()) {
                        fs::create_directories(o->artifacts);
                        const fs::path dir = o->artifacts;
                        if (const auto& m = r.artifacts.mask)
                            write_file_bytes(dir / "mask.png", imaging::encode_png_1bit(m->width(), m->height(), m->bits()));
                        if (const auto& roi = r.artifacts.roi) write_file_bytes(dir / "roi.png", imaging::encode_png(roi->intensity));
                        if (const auto& s = r.artifacts.saliency) write_file_bytes(dir / "saliency.png", imaging::encode_png(*s));
                    }
                    return r.accepted() ? kSuccess : kRejected;
                }
                const auto m = pipeline::read_manifest(o->manifest);
                m.validate();
                std::vector<std::optional<pipeline::PipelineResult>> results(m.cases.size());
                std::vector<std::string> errors(m.cases.size());
                parallel_for(m.cases.size(), o->jobs, [&](std::size_t i) {
                    try {
                        results[i] = engine.process_case(read_file_bytes(m.resolve(m.cases[i])), hint);
                    } catch (const Error& e) {
                        errors[i] = e.what();
                    }
                });
                pipeline::LabelTable predictions;
                std::string lines;
                for (std::size_t i = 0; i < m.cases.size(); ++i) {
                    const auto& id = m.cases[i].id;
                    if (!results[i]) {
                        err << "failed " << id << ": " << errors[i] << "\n";
                        lines += canonical_dump(Json{{"id", id}, {"error", errors[i]}}) + "\n";
                        continue;
                    }
                    const auto& r = *results[i];
                    lines += canonical_dump(Json{{"id", id}, {"result", r.to_json(false)}}) + "\n";
                    if (r.accepted()) {
                        predictions.ids.push_back(id);
                        predictions.labels.push_back(*r.decided);
                    } else {
                        err << "rejected " << id << ": " << to_string(r.rejection->reason) << "\n";
                    }
                }
                if (!o->out.empty()) pipeline::write_label_csv(o->out, predictions);
                if (!o->results.empty()) write_file_text(o->results, lines);
                err << "classified " << predictions.ids.size() << " of " << m.cases.size() << " cases\n";
                return predictions.ids.empty() ? kRejected : kSuccess;
            }};
}

Command add_evaluate(CLI::App& root) {
    struct Opts {
        std::string predictions, manifest, out, csv;
    };
    auto o = std::make_shared<Opts>();
    auto* app = subcommand(root, "evaluate", "Score predictions against a labeled manifest");
    app->add_option("--predictions", o->predictions, "Predictions (CSV id,label)")->required();
    app->add_option("--manifest", o->manifest, "Truth manifest; subtype fields enable subtype weighting")->required();
    app->add_option("--out", o->out, "Report (JSON); stdout when empty");
    app->add_option("--csv", o->csv, "Flat report (CSV)");
    return {app, [o](std::ostream& out, std::ostream&) {
                const auto table = pipeline::read_label_csv(o->predictions);
                std::vector<metrics::Prediction> preds;
                for (std::size_t i = 0; i < table.ids.size(); ++i) preds.push_back({table.ids[i], table.labels[i]});
                const auto truth = pipeline::read_manifest(o->manifest);
                std::map<std::string, std::string> subtypes;
                for (const auto& c : truth.cases)
                    if (c.subtype) subtypes[c.id] = *c.subtype;
                const auto report = metrics::evaluate_manifest(preds, truth, subtypes);
                if (o->out.empty()) {
                    out << canonical_dump(report.to_json()) << "\n";
                } else {
                    write_json(o->out, report.to_json());
                }
                if (!o->csv.empty()) write_file_text(o->csv, report.to_csv());
                return kSuccess;
            }};
}

Command add_saliency(CLI::App& root) {
    struct Opts {
        ConfigFlags cfg;
        std::string image, out, target;
        int patch = 64, stride = 32;
    };
    auto o = std::make_shared<Opts>();
    auto* app = subcommand(root, "saliency", "Occlusion saliency of the image classifier on a case ROI");
    app->add_option("--image", o->image, "Image file")->required();
    app->add_option("--out", o->out, "Heatmap PNG")->required();
    app->add_option("--patch", o->patch, "Occluded patch size in ROI pixels")->check(CLI::PositiveNumber);
    app->add_option("--stride", o->stride, "Patch stride in ROI pixels")->check(CLI::PositiveNumber);
    app->add_option("--target", o->target, "Class to explain; the decided class when empty");
    o->cfg.add_to(*app);
    return {app, [o](std::ostream& out, std::ostream& err) {
                std::optional<ClassLabel> target;
                if (!o->target.empty()) {
                    target = parse_class_label(o->target);
                    if (!target) throw UsageError("--target must be normal, pneumonia or covid");
                }
                const pipeline::Engine engine(o->cfg.pipeline());
                const auto r = engine.process_case(read_file_bytes(o->image));
                if (!r.accepted()) {
                    err << "case rejected: " << to_string(r.rejection->reason) << "\n";
                    out << canonical_dump(r.to_json(false)) << "\n";
                    return kRejected;
                }
                const auto& roi = r.artifacts.roi->pixels;
                const auto map = pipeline::occlusion_saliency(roi, engine.classifier_backend(), o->patch, o->stride,
                                                              target.value_or(*r.decided));
                write_file_bytes(o->out, imaging::encode_png(map.display(roi.width(), roi.height())));
                out << canonical_dump(Json{{"target", std::string(to_string(map.target))},
                                           {"baseline", map.baseline},
                                           {"patch", map.patch},
                                           {"stride", map.stride},
                                           {"grid", {map.drops.width(), map.drops.height()}}})
                    << "\n";
                return kSuccess;
            }};
}

volatile std::sig_atomic_t g_stop = 0;

extern "C" void request_stop(int) { g_stop = 1; }

Command add_serve(CLI::App& root) {
    struct Opts {
        ConfigFlags cfg;
        std::optional<std::string> host, data_dir, static_dir;
        std::optional<int> port, workers;
    };
    auto o = std::make_shared<Opts>();
    auto* app = subcommand(root, "serve", "Start the HTTP service");
    app->add_option("--host", o->host, "Bind address")->default_str("127.0.0.1 (service.host)");
    app->add_option("--port", o->port, "Port; 0 picks a free one")->default_str("8080 (service.port)");
    app->add_option("--workers", o->workers, "Request worker threads")->default_str("8 (service.workers)");
    app->add_option("--data-dir", o->data_dir, "Case store directory")->default_str("circa-data (service.data_dir)");
    app->add_option("--static-dir", o->static_dir, "Web bundle served at /")->default_str("none (service.static_dir)");
    o->cfg.add_to(*app);
    return {app, [o](std::ostream& out, std::ostream&) {
                Json flags = Json::object();
                if (o->host) flags["service"]["host"] = *o->host;
                if (o->port) flags["service"]["port"] = *o->port;
                if (o->workers) flags["service"]["workers"] = *o->workers;
                if (o->data_dir) flags["service"]["data_dir"] = *o->data_dir;
                if (o->static_dir) flags["service"]["static_dir"] = *o->static_dir;
                const auto settings =
                    pipeline::load_settings(o->cfg.path(), pipeline::process_environment(), o->cfg.overrides(flags));
                const auto base = o->cfg.path() ? fs::absolute(*o->cfg.path()).parent_path() : fs::path{};
                auto pcfg = pipeline::PipelineConfig::from_settings(settings, base);
                pcfg.validate();
                auto engine = std::make_shared<const pipeline::Engine>(std::move(pcfg));
                service::Service svc(service::ServiceConfig::from_settings(settings, base), engine);
                service::HttpServer server(svc);
                g_stop = 0;
                std::signal(SIGINT, request_stop);
                std::signal(SIGTERM, request_stop);
                const int port = server.start();
                out << "listening on " << svc.config().host << ":" << port << (engine->healthy() ? "" : " (degraded)")
                    << std::endl;
                while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
                server.stop();
                return kSuccess;
            }};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Chest X-ray triage pipeline: corpus preparation, training, evaluation and serving", "circa"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(circa::version()));
    std::vector<Command> commands{add_clean(app),  add_features(app), add_select(app),  add_train_dense(app),
                                  add_train_tree(app), add_fit_pca(app), add_fit_gmm(app), add_split(app),
                                  add_predict(app), add_evaluate(app), add_saliency(app), add_serve(app)};
    for (const auto& cmd : commands) {
        for (auto* opt : cmd.app->get_options()) {
            if (opt->get_name() == "--help" || opt->get_required()) continue;
            const auto d = opt->get_default_str();
            if (opt->get_expected_min() == 0 && d.empty()) {
                opt->default_str("false");
            } else if (d.empty() || d == "{}" || d == "[]") {
                opt->default_str("none");
            }
        }
    }
    std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
    if (!rest.empty() && !rest.front().starts_with("-") && !app.get_subcommand_no_throw(rest.front())) {
        err << "unknown subcommand '" << rest.front() << "'\n" << app.help();
        return kUsage;
    }
    std::reverse(rest.begin(), rest.end());
    try {
        app.parse(rest);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        const auto* failed = &app;
        for (const auto* sub : app.get_subcommands()) failed = sub;
        err << e.what() << "\n" << failed->help();
        return kUsage;
    }
    for (const auto& cmd : commands) {
        if (!cmd.app->parsed()) continue;
        try {
            return cmd.run(out, err);
        } catch (const UsageError& e) {
            err << cmd.app->get_name() << ": " << e.what() << "\n" << cmd.app->help();
            return kUsage;
        } catch (const Error& e) {
            err << cmd.app->get_name() << ": " << e.what();
            if (!e.stage().empty()) err << " [stage " << e.stage() << "]";
            err << "\n";
            return kRuntimeFailure;
        } catch (const std::exception& e) {
            err << cmd.app->get_name() << ": " << e.what() << "\n";
            return kRuntimeFailure;
        }
    }
    return kUsage;
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
    return run(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace circa::cli
