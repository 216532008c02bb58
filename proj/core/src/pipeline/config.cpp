#include "circa/pipeline/config.hpp"

#include "circa/error.hpp"
#include "circa/io.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>

namespace circa::pipeline {
namespace {

Json backend_default(const char* provider) {
    return Json{{"provider", provider}, {"path", ""}, {"options", Json::object()}};
}

Json yaml_scalar(const YAML::Node& node) {
    if (node.Tag() == "!") return node.as<std::string>();  // quoted
    const auto text = node.Scalar();
    if (text == "null" || text == "~" || text.empty()) return nullptr;
    if (text == "true" || text == "True") return true;
    if (text == "false" || text == "False") return false;
    char* end = nullptr;
    const long long i = std::strtoll(text.c_str(), &end, 10);
    if (end && *end == '\0') return i;
    const double d = std::strtod(text.c_str(), &end);
    if (end && *end == '\0') return d;
    return text;
}

Json yaml_to_json(const YAML::Node& node) {
    switch (node.Type()) {
        case YAML::NodeType::Null:
        case YAML::NodeType::Undefined: return nullptr;
        case YAML::NodeType::Scalar: return yaml_scalar(node);
        case YAML::NodeType::Sequence: {
            Json arr = Json::array();
            for (const auto& item : node) arr.push_back(yaml_to_json(item));
            return arr;
        }
        case YAML::NodeType::Map: {
            Json obj = Json::object();
            for (const auto& kv : node) obj[kv.first.as<std::string>()] = yaml_to_json(kv.second);
            return obj;
        }
    }
    return nullptr;
}

std::string env_name(const std::string& path) {
    std::string out = "CIRCA_";
    for (char c : path) out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

Json env_value(const Json& like, const std::string& text, const std::string& name) {
    try {
        switch (like.type()) {
            case Json::value_t::boolean: {
                std::string t = text;
                std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
                if (t == "1" || t == "true" || t == "yes" || t == "on") return true;
                if (t == "0" || t == "false" || t == "no" || t == "off") return false;
                throw Error(ErrorCode::InvalidConfig, name + ": expected a boolean");
            }
            case Json::value_t::number_integer:
            case Json::value_t::number_unsigned: {
                std::size_t used = 0;
                const long long v = std::stoll(text, &used);
                if (used != text.size()) throw Error(ErrorCode::InvalidConfig, name + ": expected an integer");
                return v;
            }
            case Json::value_t::number_float: {
                std::size_t used = 0;
                const double v = std::stod(text, &used);
                if (used != text.size()) throw Error(ErrorCode::InvalidConfig, name + ": expected a number");
                return v;
            }
            case Json::value_t::array: {
                Json arr = Json::array();
                std::size_t start = 0;
                while (start <= text.size() && !text.empty()) {
                    const auto comma = text.find(',', start);
                    arr.push_back(text.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
                    if (comma == std::string::npos) break;
                    start = comma + 1;
                }
                return arr;
            }
            default: return text;
        }
    } catch (const std::logic_error&) {
        throw Error(ErrorCode::InvalidConfig, name + ": cannot parse '" + text + "'");
    }
}

void apply_env(Json& node, const std::string& path, const EnvLookup& env) {
    if (node.is_object()) {
        if (path.size() >= 8 && path.compare(path.size() - 8, 8, ".options") == 0) return;
        for (auto it = node.begin(); it != node.end(); ++it) {
            apply_env(it.value(), path.empty() ? it.key() : path + "." + it.key(), env);
        }
        return;
    }
    const auto name = env_name(path);
    if (auto v = env(name)) node = env_value(node, *v, name);
}

const Json& at(const Json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) throw Error(ErrorCode::InvalidConfig, "missing setting " + where + "." + key);
    return obj.at(key);
}

double num(const Json& obj, const char* key, const std::string& where) {
    const auto& v = at(obj, key, where);
    if (!v.is_number()) throw Error(ErrorCode::InvalidConfig, where + "." + key + " must be a number");
    return v.get<double>();
}

int integer(const Json& obj, const char* key, const std::string& where) {
    const auto& v = at(obj, key, where);
    if (!v.is_number_integer()) throw Error(ErrorCode::InvalidConfig, where + "." + key + " must be an integer");
    return v.get<int>();
}

bool boolean(const Json& obj, const char* key, const std::string& where) {
    const auto& v = at(obj, key, where);
    if (!v.is_boolean()) throw Error(ErrorCode::InvalidConfig, where + "." + key + " must be true or false");
    return v.get<bool>();
}

std::string text(const Json& obj, const char* key, const std::string& where) {
    const auto& v = at(obj, key, where);
    if (v.is_null()) return {};
    if (!v.is_string()) throw Error(ErrorCode::InvalidConfig, where + "." + key + " must be a string");
    return v.get<std::string>();
}

std::filesystem::path resolve(const std::string& p, const std::filesystem::path& base) {
    if (p.empty()) return {};
    std::filesystem::path path(p);
    if (path.is_absolute() || base.empty()) return path;
    return base / path;
}

std::optional<models::BackendSpec> backend(const Json& backends, const char* key, models::BackendRole role,
                                           const std::filesystem::path& base) {
    const std::string where = std::string("backends.") + key;
    const auto& b = at(backends, key, "backends");
    if (b.is_null()) return std::nullopt;
    models::BackendSpec spec;
    spec.role = role;
    spec.provider = text(b, "provider", where);
    if (spec.provider == "none" || spec.provider.empty()) return std::nullopt;
    spec.path = resolve(text(b, "path", where), base).string();
    spec.options = b.value("options", Json::object());
    if (!spec.options.is_object()) throw Error(ErrorCode::InvalidConfig, where + ".options must be a mapping");
    return spec;
}

Json backend_json(const std::optional<models::BackendSpec>& spec) {
    if (!spec) return backend_default("none");
    return Json{{"provider", spec->provider}, {"path", spec->path}, {"options", spec->options}};
}

}  // namespace

EnvLookup process_environment() {
    return [](const std::string& name) -> std::optional<std::string> {
        if (const char* v = std::getenv(name.c_str())) return std::string(v);
        return std::nullopt;
    };
}

EnvLookup map_environment(std::map<std::string, std::string> vars) {
    return [vars = std::move(vars)](const std::string& name) -> std::optional<std::string> {
        if (auto it = vars.find(name); it != vars.end()) return it->second;
        return std::nullopt;
    };
}

Json default_settings() {
    return Json{
        {"preprocess",
         {{"low_quantile", imaging::kDefaultLowQuantile},
          {"high_quantile", imaging::kDefaultHighQuantile},
          {"contrast", true},
          {"clahe", {{"tiles_x", 8}, {"tiles_y", 8}, {"clip_limit", 2.0}, {"bins", 256}}},
          {"sr_trigger", 512},
          {"sr_patch", 256}}},
        {"segmentation", {{"threshold", 0.5}, {"disc_radius", 2}}},
        {"gates",
         {{"min_lung_dimension", 300}, {"quality", true}, {"quality_threshold", 0.5}, {"quality_report", ""}}},
        {"roi", {{"low_quantile", 0.0005}, {"high_quantile", 0.9995}, {"min_gap", 8}}},
        {"radiomics", {{"bin_width", 0.05}}},
        {"embedding", {{"k", 10}}},
        {"saliency", {{"enabled", false}, {"patch", 64}, {"stride", 32}}},
        {"seed", 0},
        {"backends",
         {{"segmentation", backend_default("mock")},
          {"image_classifier", backend_default("mock")},
          {"super_resolution", backend_default("none")},
          {"feature_extractor", backend_default("mock")}}},
        {"models",
         {{"train_stats", ""},
          {"radiomics_selection", ""},
          {"radiomics_scaler", ""},
          {"dense", ""},
          {"tree", ""},
          {"feature_scaler", ""},
          {"pca", ""},
          {"embedding_index", ""},
          {"gmm", ""}}},
        {"service",
         {{"host", "127.0.0.1"},
          {"port", 8080},
          {"workers", 8},
          {"max_upload_bytes", 64 * 1024 * 1024},
          {"data_dir", "circa-data"},
          {"tokens", Json::array()},
          {"static_dir", ""}}},
    };
}

Json parse_settings_text(const std::string& text) {
    try {
        const auto node = YAML::Load(text);
        Json j = yaml_to_json(node);
        if (j.is_null()) return Json::object();
        if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config root must be a mapping");
        return j;
    } catch (const YAML::Exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("config parse error: ") + e.what());
    }
}

void merge_settings(Json& base, const Json& patch, bool strict, const std::string& path) {
    if (!patch.is_object()) throw Error(ErrorCode::InvalidConfig, (path.empty() ? "config" : path) + " must be a mapping");
    const bool free_form = path.size() >= 7 && path.compare(path.size() - 7, 7, "options") == 0;
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        const std::string key_path = path.empty() ? it.key() : path + "." + it.key();
        if (!base.contains(it.key())) {
            if (strict && !free_form) throw Error(ErrorCode::InvalidConfig, "unknown setting " + key_path);
            base[it.key()] = it.value();
            continue;
        }
        Json& slot = base[it.key()];
        if (slot.is_object() && it.value().is_object()) {
            merge_settings(slot, it.value(), strict, key_path);
        } else if (slot.is_number_float() && it.value().is_number_integer()) {
            slot = it.value().get<double>();
        } else {
            slot = it.value();
        }
    }
}

Json load_settings(const std::optional<std::filesystem::path>& file, const EnvLookup& env, const Json& overrides) {
    Json settings = default_settings();
    apply_env(settings, {}, env);
    if (file) merge_settings(settings, parse_settings_text(read_file_text(*file)), true);
    merge_settings(settings, overrides, true);
    return settings;
}

void PipelineConfig::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
    if (!(low_quantile >= 0.0 && low_quantile < high_quantile && high_quantile <= 1.0))
        fail("preprocess quantiles must satisfy 0 <= low < high <= 1");
    if (!(roi_low_quantile >= 0.0 && roi_low_quantile < roi_high_quantile && roi_high_quantile <= 1.0))
        fail("roi quantiles must satisfy 0 <= low < high <= 1");
    if (clahe.tiles_x < 1 || clahe.tiles_y < 1 || clahe.bins < 2) fail("clahe needs >= 1 tile and >= 2 bins");
    if (sr_trigger < 1 || sr_patch < 8) fail("sr_trigger must be >= 1 and sr_patch >= 8");
    if (!(segmentation_threshold > 0.0 && segmentation_threshold < 1.0)) fail("segmentation.threshold must be in (0,1)");
    if (disc_radius < 0) fail("segmentation.disc_radius must be >= 0");
    if (min_lung_dimension < 0) fail("gates.min_lung_dimension must be >= 0");
    if (!(quality_threshold >= 0.0 && quality_threshold <= 1.0)) fail("gates.quality_threshold must be in [0,1]");
    if (min_gap < 0) fail("roi.min_gap must be >= 0");
    if (!(bin_width > 0.0 && bin_width <= 1.0)) fail("radiomics.bin_width must be in (0,1]");
    if (knn_k < 1) fail("embedding.k must be >= 1");
    if (saliency_patch < 1 || saliency_stride < 1) fail("saliency patch and stride must be >= 1");
}

PipelineConfig PipelineConfig::from_settings(const Json& s, const std::filesystem::path& base) {
    PipelineConfig c;
    const auto& pre = at(s, "preprocess", "");
    c.low_quantile = num(pre, "low_quantile", "preprocess");
    c.high_quantile = num(pre, "high_quantile", "preprocess");
    c.contrast = boolean(pre, "contrast", "preprocess");
    const auto& clahe = at(pre, "clahe", "preprocess");
    c.clahe.tiles_x = integer(clahe, "tiles_x", "preprocess.clahe");
    c.clahe.tiles_y = integer(clahe, "tiles_y", "preprocess.clahe");
    c.clahe.clip_limit = num(clahe, "clip_limit", "preprocess.clahe");
    c.clahe.bins = integer(clahe, "bins", "preprocess.clahe");
    c.sr_trigger = integer(pre, "sr_trigger", "preprocess");
    c.sr_patch = integer(pre, "sr_patch", "preprocess");

    const auto& seg = at(s, "segmentation", "");
    c.segmentation_threshold = num(seg, "threshold", "segmentation");
    c.disc_radius = integer(seg, "disc_radius", "segmentation");

    const auto& gates = at(s, "gates", "");
    c.min_lung_dimension = integer(gates, "min_lung_dimension", "gates");
    c.quality_gate = boolean(gates, "quality", "gates");
    c.quality_threshold = num(gates, "quality_threshold", "gates");
    c.quality_report = resolve(text(gates, "quality_report", "gates"), base);

    const auto& roi = at(s, "roi", "");
    c.roi_low_quantile = num(roi, "low_quantile", "roi");
    c.roi_high_quantile = num(roi, "high_quantile", "roi");
    c.min_gap = integer(roi, "min_gap", "roi");

    c.bin_width = num(at(s, "radiomics", ""), "bin_width", "radiomics");
    c.knn_k = integer(at(s, "embedding", ""), "k", "embedding");

    const auto& sal = at(s, "saliency", "");
    c.saliency = boolean(sal, "enabled", "saliency");
    c.saliency_patch = integer(sal, "patch", "saliency");
    c.saliency_stride = integer(sal, "stride", "saliency");

    const auto& seed = at(s, "seed", "");
    if (!seed.is_number_integer() || seed.get<long long>() < 0) throw Error(ErrorCode::InvalidConfig, "seed must be a non-negative integer");
    c.seed = seed.get<std::uint64_t>();

    const auto& b = at(s, "backends", "");
    c.segmentation = backend(b, "segmentation", models::BackendRole::Segmentation, base);
    c.image_classifier = backend(b, "image_classifier", models::BackendRole::ImageClassifier, base);
    c.super_resolution = backend(b, "super_resolution", models::BackendRole::SuperResolution, base);
    c.feature_extractor = backend(b, "feature_extractor", models::BackendRole::FeatureExtractor, base);

    const auto& m = at(s, "models", "");
    c.models.train_stats = resolve(text(m, "train_stats", "models"), base);
    c.models.radiomics_selection = resolve(text(m, "radiomics_selection", "models"), base);
    c.models.radiomics_scaler = resolve(text(m, "radiomics_scaler", "models"), base);
    c.models.dense = resolve(text(m, "dense", "models"), base);
    c.models.tree = resolve(text(m, "tree", "models"), base);
    c.models.feature_scaler = resolve(text(m, "feature_scaler", "models"), base);
    c.models.pca = resolve(text(m, "pca", "models"), base);
    c.models.embedding_index = resolve(text(m, "embedding_index", "models"), base);
    c.models.gmm = resolve(text(m, "gmm", "models"), base);

    c.validate();
    return c;
}

Json PipelineConfig::to_json() const {
    return Json{
        {"preprocess",
         {{"low_quantile", low_quantile},
          {"high_quantile", high_quantile},
          {"contrast", contrast},
          {"clahe", {{"tiles_x", clahe.tiles_x}, {"tiles_y", clahe.tiles_y}, {"clip_limit", clahe.clip_limit}, {"bins", clahe.bins}}},
          {"sr_trigger", sr_trigger},
          {"sr_patch", sr_patch}}},
        {"segmentation", {{"threshold", segmentation_threshold}, {"disc_radius", disc_radius}}},
        {"gates",
         {{"min_lung_dimension", min_lung_dimension},
          {"quality", quality_gate},
          {"quality_threshold", quality_threshold},
          {"quality_report", quality_report.string()}}},
        {"roi", {{"low_quantile", roi_low_quantile}, {"high_quantile", roi_high_quantile}, {"min_gap", min_gap}}},
        {"radiomics", {{"bin_width", bin_width}}},
        {"embedding", {{"k", knn_k}}},
        {"saliency", {{"enabled", saliency}, {"patch", saliency_patch}, {"stride", saliency_stride}}},
        {"seed", seed},
        {"backends",
         {{"segmentation", backend_json(segmentation)},
          {"image_classifier", backend_json(image_classifier)},
          {"super_resolution", backend_json(super_resolution)},
          {"feature_extractor", backend_json(feature_extractor)}}},
        {"models",
         {{"train_stats", models.train_stats.string()},
          {"radiomics_selection", models.radiomics_selection.string()},
          {"radiomics_scaler", models.radiomics_scaler.string()},
          {"dense", models.dense.string()},
          {"tree", models.tree.string()},
          {"feature_scaler", models.feature_scaler.string()},
          {"pca", models.pca.string()},
          {"embedding_index", models.embedding_index.string()},
          {"gmm", models.gmm.string()}}},
    };
}

PipelineConfig load_pipeline_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env,
                                    const Json& overrides) {
    const auto settings = load_settings(file, env, overrides);
    return PipelineConfig::from_settings(settings, file ? file->parent_path() : std::filesystem::path{});
}

}  // namespace circa::pipeline
