#include "distill/config_io.hpp"

#include <fstream>
#include <set>

namespace distill {

using nlohmann::json;

namespace {

json augment_to_json(const AugmentSpec& a) {
    json kinds = json::array();
    for (auto k : a.kinds) kinds.push_back(to_string(k));
    return {
        {"kinds", kinds},
        {"segment_fraction", {a.segment_fraction_min, a.segment_fraction_max}},
        {"jitter_sigma", a.jitter_sigma},
        {"scale_range", {{a.scale_low_min, a.scale_low_max}, {a.scale_high_min, a.scale_high_max}}},
        {"warp_knots", a.warp_knots},
    };
}

void check_keys(const json& j, const std::set<std::string>& allowed, const char* where) {
    if (!j.is_object()) throw UsageError(std::string(where) + ": expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key()))
            throw UsageError(std::string(where) + ": unknown key '" + it.key() + "'");
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) {
        try {
            out = it->get<T>();
        } catch (const json::exception& e) {
            throw UsageError(std::string("config: bad value for '") + key + "': " + e.what());
        }
    }
}

AugmentSpec augment_from_json(const json& j) {
    check_keys(j, {"kinds", "segment_fraction", "jitter_sigma", "scale_range", "warp_knots"},
               "config.augmentation");
    AugmentSpec a;
    if (auto it = j.find("kinds"); it != j.end()) {
        a.kinds.clear();
        for (const auto& k : *it) a.kinds.push_back(augment_kind_from_string(k.get<std::string>()));
    }
    if (auto it = j.find("segment_fraction"); it != j.end()) {
        if (!it->is_array() || it->size() != 2)
            throw UsageError("config: segment_fraction must be [min, max]");
        a.segment_fraction_min = (*it)[0].get<double>();
        a.segment_fraction_max = (*it)[1].get<double>();
    }
    read(j, "jitter_sigma", a.jitter_sigma);
    if (auto it = j.find("scale_range"); it != j.end()) {
        if (!it->is_array() || it->size() != 2 || (*it)[0].size() != 2 || (*it)[1].size() != 2)
            throw UsageError("config: scale_range must be [[lo_min, lo_max], [hi_min, hi_max]]");
        a.scale_low_min = (*it)[0][0].get<double>();
        a.scale_low_max = (*it)[0][1].get<double>();
        a.scale_high_min = (*it)[1][0].get<double>();
        a.scale_high_max = (*it)[1][1].get<double>();
    }
    read(j, "warp_knots", a.warp_knots);
    return a;
}

}  // namespace

json config_to_json(const Config& c) {
    return {
        {"window_size", c.window_size},
        {"patch_size", c.patch_size},
        {"patch_stride", c.patch_stride},
        {"feature_dim", c.feature_dim},
        {"model_dim", c.model_dim},
        {"ffn_multiplier", c.ffn_multiplier},
        {"student_layers", c.student_layers},
        {"teacher_layers", c.teacher_layers},
        {"prototype_count", c.prototype_count},
        {"head_count", c.head_count},
        {"max_positions", c.max_positions},
        {"learning_rate", c.learning_rate},
        {"batch_size", c.batch_size},
        {"epochs", c.epochs},
        {"patience", c.patience},
        {"contrastive_weight", c.contrastive_weight},
        {"dropout", c.dropout},
        {"augmentation", augment_to_json(c.augmentation)},
        {"train_stride", c.train_stride},
        {"score_stride", c.score_stride},
        {"aggregation", c.aggregation == Aggregation::mean ? "mean" : "max"},
        {"threshold_quantile", c.threshold_quantile},
        {"ucr_margin", c.ucr_margin},
        {"seed", c.seed},
    };
}

Config config_from_json(const json& j) {
    check_keys(j,
               {"window_size", "patch_size", "patch_stride", "feature_dim", "model_dim",
                "ffn_multiplier", "student_layers", "teacher_layers", "prototype_count",
                "head_count", "max_positions", "learning_rate", "batch_size", "epochs",
                "patience", "contrastive_weight", "dropout", "augmentation", "train_stride",
                "score_stride", "aggregation", "threshold_quantile", "ucr_margin", "seed"},
               "config");
    Config c;
    read(j, "window_size", c.window_size);
    // patch_stride defaults to the patch size when only patch_size is given.
    read(j, "patch_size", c.patch_size);
    c.patch_stride = c.patch_size;
    read(j, "patch_stride", c.patch_stride);
    read(j, "feature_dim", c.feature_dim);
    read(j, "model_dim", c.model_dim);
    read(j, "ffn_multiplier", c.ffn_multiplier);
    read(j, "student_layers", c.student_layers);
    read(j, "teacher_layers", c.teacher_layers);
    read(j, "prototype_count", c.prototype_count);
    read(j, "head_count", c.head_count);
    read(j, "max_positions", c.max_positions);
    read(j, "learning_rate", c.learning_rate);
    read(j, "batch_size", c.batch_size);
    read(j, "epochs", c.epochs);
    read(j, "patience", c.patience);
    read(j, "contrastive_weight", c.contrastive_weight);
    read(j, "dropout", c.dropout);
    if (auto it = j.find("augmentation"); it != j.end()) c.augmentation = augment_from_json(*it);
    read(j, "train_stride", c.train_stride);
    read(j, "score_stride", c.score_stride);
    if (auto it = j.find("aggregation"); it != j.end()) {
        const auto s = it->get<std::string>();
        if (s == "mean") c.aggregation = Aggregation::mean;
        else if (s == "max") c.aggregation = Aggregation::max;
        else throw UsageError("config: aggregation must be 'mean' or 'max'");
    }
    read(j, "threshold_quantile", c.threshold_quantile);
    read(j, "ucr_margin", c.ucr_margin);
    read(j, "seed", c.seed);
    c.validate();
    return c;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw UsageError("config " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

void save_config(const Config& config, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write config " + path.string());
    out << config_to_json(config).dump(2) << '\n';
}

}  // namespace distill
