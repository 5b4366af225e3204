#pragma once

// Run configuration: a text file of "key = value" lines. '#' starts a
// comment. Keys left out take the value of the selected profile (desk or
// paper); command-line flags override the file.

#include "ensembleguard/boosting.hpp"
#include "ensembleguard/cart.hpp"
#include "ensembleguard/common.hpp"
#include "ensembleguard/data_ingest.hpp"
#include "ensembleguard/meta_ensemble.hpp"
#include "ensembleguard/recurrent.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace ensembleguard {

enum class Profile { Desk, Paper };

inline std::string_view to_string(Profile p) { return p == Profile::Desk ? "desk" : "paper"; }

inline Profile parse_profile(std::string_view s) {
    if (s == "desk") return Profile::Desk;
    if (s == "paper") return Profile::Paper;
    throw ConfigError("unknown profile '" + std::string(s) + "' (expected desk or paper)");
}

struct RunConfig {
    Profile profile = Profile::Desk;
    DatasetKind dataset = DatasetKind::NslKdd;
    std::vector<std::filesystem::path> data;
    std::optional<std::filesystem::path> taxonomy;   // embedded taxonomy when unset
    std::optional<std::filesystem::path> test_data;  // separate test file; otherwise a split of data
    std::filesystem::path out = "runs/default";
    std::uint64_t seed = 1;

    std::size_t max_records = 25000;  // 0 = all
    std::string impute = "mean-mode";
    double outlier_k = 3.0;
    bool remove_outliers = false;
    double split_ratio = 0.8;
    bool stratified = true;

    std::vector<std::string> models{"bagging", "gbm", "light", "xgb", "cat", "lstm", "gru"};
    BaseModelParams params;
    int folds = 5;
    bool in_sample = false;
    MetaConfig meta;
    int distill_depth = 6;
};

namespace detail {

inline std::string bool_text(bool b) { return b ? "true" : "false"; }

inline bool parse_bool(std::string_view s, const std::string& key) {
    const auto v = text::lower(text::trim(s));
    if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
    if (v == "false" || v == "no" || v == "0" || v == "off") return false;
    throw ConfigError(key + ": expected true or false, got '" + std::string(s) + "'");
}

inline std::string real_text(double v) { return text::fmt(v); }

struct Field {
    std::string key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

inline int int_value(const std::string& v, const std::string& key) { return static_cast<int>(text::require_int(v, key)); }
inline double real_value(const std::string& v, const std::string& key) { return text::require_double(v, key); }

// Every configurable key, in effective-config order.
inline const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        auto add = [&](std::string key, auto get, auto set) { f.push_back({std::move(key), get, set}); };
        add("profile", [](const RunConfig& c) { return std::string(to_string(c.profile)); },
            [](RunConfig& c, const std::string& v) { c.profile = parse_profile(v); });
        add("dataset", [](const RunConfig& c) { return std::string(to_string(c.dataset)); },
            [](RunConfig& c, const std::string& v) { c.dataset = parse_dataset_kind(v); });
        add("data",
            [](const RunConfig& c) {
                std::vector<std::string> s;
                for (const auto& p : c.data) s.push_back(p.generic_string());
                return text::join(s, ",");
            },
            [](RunConfig& c, const std::string& v) {
                c.data.clear();
                for (const auto& p : text::tokens(v, ',')) {
                    const auto t = std::string(text::trim(p));
                    if (!t.empty()) c.data.emplace_back(t);
                }
            });
        add("taxonomy", [](const RunConfig& c) { return c.taxonomy ? c.taxonomy->generic_string() : std::string(); },
            [](RunConfig& c, const std::string& v) {
                c.taxonomy = v.empty() ? std::nullopt : std::optional<std::filesystem::path>(v);
            });
        add("test_data", [](const RunConfig& c) { return c.test_data ? c.test_data->generic_string() : std::string(); },
            [](RunConfig& c, const std::string& v) {
                c.test_data = v.empty() ? std::nullopt : std::optional<std::filesystem::path>(v);
            });
        add("out", [](const RunConfig& c) { return c.out.generic_string(); },
            [](RunConfig& c, const std::string& v) { c.out = v; });
        add("seed", [](const RunConfig& c) { return std::to_string(c.seed); },
            [](RunConfig& c, const std::string& v) { c.seed = text::require_uint(v, "seed"); });
        add("max_records", [](const RunConfig& c) { return std::to_string(c.max_records); },
            [](RunConfig& c, const std::string& v) { c.max_records = static_cast<std::size_t>(text::require_uint(v, "max_records")); });
        add("impute", [](const RunConfig& c) { return c.impute; },
            [](RunConfig& c, const std::string& v) { c.impute = v; });
        add("outlier_k", [](const RunConfig& c) { return real_text(c.outlier_k); },
            [](RunConfig& c, const std::string& v) { c.outlier_k = real_value(v, "outlier_k"); });
        add("remove_outliers", [](const RunConfig& c) { return bool_text(c.remove_outliers); },
            [](RunConfig& c, const std::string& v) { c.remove_outliers = parse_bool(v, "remove_outliers"); });
        add("split_ratio", [](const RunConfig& c) { return real_text(c.split_ratio); },
            [](RunConfig& c, const std::string& v) { c.split_ratio = real_value(v, "split_ratio"); });
        add("stratified", [](const RunConfig& c) { return bool_text(c.stratified); },
            [](RunConfig& c, const std::string& v) { c.stratified = parse_bool(v, "stratified"); });
        add("models", [](const RunConfig& c) { return text::join(c.models, ","); },
            [](RunConfig& c, const std::string& v) {
                c.models.clear();
                for (const auto& m : text::tokens(v, ',')) {
                    const auto t = text::lower(text::trim(m));
                    if (!t.empty()) c.models.push_back(t);
                }
            });
        add("folds", [](const RunConfig& c) { return std::to_string(c.folds); },
            [](RunConfig& c, const std::string& v) { c.folds = int_value(v, "folds"); });
        add("stacking", [](const RunConfig& c) { return std::string(c.in_sample ? "in-sample" : "out-of-fold"); },
            [](RunConfig& c, const std::string& v) {
                if (v == "in-sample") {
                    c.in_sample = true;
                } else if (v == "out-of-fold" || v == "oof") {
                    c.in_sample = false;
                } else {
                    throw ConfigError("stacking: expected out-of-fold or in-sample, got '" + v + "'");
                }
            });

        add("cart.max_depth", [](const RunConfig& c) { return std::to_string(c.params.cart.max_depth); },
            [](RunConfig& c, const std::string& v) { c.params.cart.max_depth = int_value(v, "cart.max_depth"); });
        add("cart.min_samples_leaf", [](const RunConfig& c) { return std::to_string(c.params.cart.min_samples_leaf); },
            [](RunConfig& c, const std::string& v) { c.params.cart.min_samples_leaf = int_value(v, "cart.min_samples_leaf"); });
        add("bagging.n_estimators", [](const RunConfig& c) { return std::to_string(c.params.bagging.n_estimators); },
            [](RunConfig& c, const std::string& v) { c.params.bagging.n_estimators = int_value(v, "bagging.n_estimators"); });
        add("bagging.max_depth", [](const RunConfig& c) { return std::to_string(c.params.bagging.tree.max_depth); },
            [](RunConfig& c, const std::string& v) { c.params.bagging.tree.max_depth = int_value(v, "bagging.max_depth"); });
        add("bagging.min_samples_leaf", [](const RunConfig& c) { return std::to_string(c.params.bagging.tree.min_samples_leaf); },
            [](RunConfig& c, const std::string& v) {
                c.params.bagging.tree.min_samples_leaf = int_value(v, "bagging.min_samples_leaf");
            });

        for (const char* id : {"gbm", "light", "xgb", "cat"}) {
            const std::string p = id;
            auto cfg = [p](RunConfig& c) -> BoostConfig& {
                return p == "gbm" ? c.params.gbm : p == "light" ? c.params.light : p == "xgb" ? c.params.xgb : c.params.cat;
            };
            auto ccfg = [cfg](const RunConfig& c) -> const BoostConfig& { return cfg(const_cast<RunConfig&>(c)); };
            add(p + ".rounds", [ccfg](const RunConfig& c) { return std::to_string(ccfg(c).n_rounds); },
                [cfg, p](RunConfig& c, const std::string& v) { cfg(c).n_rounds = int_value(v, p + ".rounds"); });
            add(p + ".learning_rate", [ccfg](const RunConfig& c) { return real_text(ccfg(c).learning_rate); },
                [cfg, p](RunConfig& c, const std::string& v) { cfg(c).learning_rate = real_value(v, p + ".learning_rate"); });
            add(p + ".max_depth", [ccfg](const RunConfig& c) { return std::to_string(ccfg(c).max_depth); },
                [cfg, p](RunConfig& c, const std::string& v) { cfg(c).max_depth = int_value(v, p + ".max_depth"); });
            add(p + ".max_leaves", [ccfg](const RunConfig& c) { return std::to_string(ccfg(c).max_leaves); },
                [cfg, p](RunConfig& c, const std::string& v) { cfg(c).max_leaves = int_value(v, p + ".max_leaves"); });
            add(p + ".min_samples_leaf", [ccfg](const RunConfig& c) { return std::to_string(ccfg(c).min_samples_leaf); },
                [cfg, p](RunConfig& c, const std::string& v) { cfg(c).min_samples_leaf = int_value(v, p + ".min_samples_leaf"); });
            add(p + ".n_bins", [ccfg](const RunConfig& c) { return std::to_string(ccfg(c).n_bins); },
                [cfg, p](RunConfig& c, const std::string& v) { cfg(c).n_bins = int_value(v, p + ".n_bins"); });
            add(p + ".l2_lambda", [ccfg](const RunConfig& c) { return real_text(ccfg(c).l2_lambda); },
                [cfg, p](RunConfig& c, const std::string& v) { cfg(c).l2_lambda = real_value(v, p + ".l2_lambda"); });
        }

        for (const char* id : {"lstm", "gru"}) {
            const std::string p = id;
            auto cfg = [p](RunConfig& c) -> RecurrentConfig& { return p == "lstm" ? c.params.lstm : c.params.gru; };
            auto ccfg = [cfg](const RunConfig& c) -> const RecurrentConfig& { return cfg(const_cast<RunConfig&>(c)); };
            add(p + ".hidden", [ccfg](const RunConfig& c) { return std::to_string(ccfg(c).hidden); },
                [cfg, p](RunConfig& c, const std::string& v) { cfg(c).hidden = int_value(v, p + ".hidden"); });
            add(p + ".dropout", [ccfg](const RunConfig& c) { return real_text(ccfg(c).dropout_rate); },
                [cfg, p](RunConfig& c, const std::string& v) { cfg(c).dropout_rate = real_value(v, p + ".dropout"); });
            add(p + ".epochs", [ccfg](const RunConfig& c) { return std::to_string(ccfg(c).epochs); },
                [cfg, p](RunConfig& c, const std::string& v) { cfg(c).epochs = int_value(v, p + ".epochs"); });
            add(p + ".batch_size", [ccfg](const RunConfig& c) { return std::to_string(ccfg(c).batch_size); },
                [cfg, p](RunConfig& c, const std::string& v) { cfg(c).batch_size = int_value(v, p + ".batch_size"); });
            add(p + ".learning_rate", [ccfg](const RunConfig& c) { return real_text(ccfg(c).learning_rate); },
                [cfg, p](RunConfig& c, const std::string& v) { cfg(c).learning_rate = real_value(v, p + ".learning_rate"); });
        }

        add("meta.hidden", [](const RunConfig& c) { return std::to_string(c.meta.hidden); },
            [](RunConfig& c, const std::string& v) { c.meta.hidden = int_value(v, "meta.hidden"); });
        add("meta.epochs", [](const RunConfig& c) { return std::to_string(c.meta.epochs); },
            [](RunConfig& c, const std::string& v) { c.meta.epochs = int_value(v, "meta.epochs"); });
        add("meta.batch_size", [](const RunConfig& c) { return std::to_string(c.meta.batch_size); },
            [](RunConfig& c, const std::string& v) { c.meta.batch_size = int_value(v, "meta.batch_size"); });
        add("meta.learning_rate", [](const RunConfig& c) { return real_text(c.meta.learning_rate); },
            [](RunConfig& c, const std::string& v) { c.meta.learning_rate = real_value(v, "meta.learning_rate"); });
        add("distill.max_depth", [](const RunConfig& c) { return std::to_string(c.distill_depth); },
            [](RunConfig& c, const std::string& v) { c.distill_depth = int_value(v, "distill.max_depth"); });
        return f;
    }();
    return table;
}

inline const Field* find_field(const std::string& key) {
    for (const auto& f : fields()) {
        if (f.key == key) return &f;
    }
    return nullptr;
}

}  // namespace detail

/// Profile defaults. Desk: subsampled data, 50 bagged trees, 50 boosting
/// rounds, 10 recurrent epochs. Paper: full data, 1000 trees and rounds.
inline RunConfig profile_defaults(Profile profile) {
    RunConfig c;
    c.profile = profile;
    const bool desk = profile == Profile::Desk;
    c.max_records = desk ? 25000 : 0;
    c.params.bagging.n_estimators = desk ? 50 : 1000;
    for (auto* b : {&c.params.gbm, &c.params.light, &c.params.xgb, &c.params.cat}) b->n_rounds = desk ? 50 : 1000;
    for (auto* r : {&c.params.lstm, &c.params.gru}) r->epochs = desk ? 10 : 30;
    return c;
}

/// Key/value pairs in file order; duplicate keys and unknown keys are errors.
inline std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view content,
                                                                          std::string_view origin = "<config>") {
    std::vector<std::pair<std::string, std::string>> out;
    std::set<std::string> seen;
    std::size_t line_no = 0;
    for (auto line : text::split(content, '\n')) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        line = text::trim(line);
        if (line.empty()) continue;
        const auto where = std::string(origin) + ":" + std::to_string(line_no);
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError(where + ": expected 'key = value'");
        auto key = std::string(text::trim(line.substr(0, eq)));
        auto value = std::string(text::trim(line.substr(eq + 1)));
        if (!detail::find_field(key)) throw ConfigError(where + ": unknown key '" + key + "'");
        if (!seen.insert(key).second) throw ConfigError(where + ": duplicate key '" + key + "'");
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

struct ConfigOverrides {
    std::optional<Profile> profile;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out;
};

/// Profile (flag, then file, then desk), then file keys, then flag overrides.
/// Relative data paths resolve against base_dir.
inline RunConfig build_config(const std::vector<std::pair<std::string, std::string>>& kv, const ConfigOverrides& ov,
                              const std::filesystem::path& base_dir = {}) {
    Profile profile = Profile::Desk;
    for (const auto& [k, v] : kv) {
        if (k == "profile") profile = parse_profile(v);
    }
    if (ov.profile) profile = *ov.profile;
    auto cfg = profile_defaults(profile);
    for (const auto& [k, v] : kv) {
        if (k == "profile") continue;
        detail::find_field(k)->set(cfg, v);
    }
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.out) cfg.out = *ov.out;
    if (!base_dir.empty()) {
        auto resolve = [&](std::filesystem::path& p) {
            if (p.is_relative()) p = (base_dir / p).lexically_normal();
        };
        for (auto& p : cfg.data) resolve(p);
        if (cfg.taxonomy) resolve(*cfg.taxonomy);
        if (cfg.test_data) resolve(*cfg.test_data);
    }
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path, const ConfigOverrides& ov = {}) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw UserError("cannot open config " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return build_config(parse_config_text(ss.str(), path.string()), ov, path.parent_path());
}

/// Member seeds are derived from the run seed so one number fixes the run.
inline void derive_member_seeds(RunConfig& c) {
    c.params.bagging.seed = derive_seed(c.seed, "bagging");
    c.params.gbm.seed = derive_seed(c.seed, "gbm");
    c.params.light.seed = derive_seed(c.seed, "light");
    c.params.xgb.seed = derive_seed(c.seed, "xgb");
    c.params.cat.seed = derive_seed(c.seed, "cat");
    c.params.lstm.seed = derive_seed(c.seed, "lstm");
    c.params.gru.seed = derive_seed(c.seed, "gru");
    c.meta.seed = derive_seed(c.seed, "meta");
}

inline void validate(const RunConfig& c) {
    if (c.data.empty()) throw ConfigError("data: no input files given");
    if (!(c.split_ratio > 0.0 && c.split_ratio < 1.0)) throw ConfigError("split_ratio must lie in (0, 1)");
    if (!(c.outlier_k > 0.0)) throw ConfigError("outlier_k must be positive");
    if (c.impute != "mean-mode") throw ConfigError("impute: only mean-mode is supported");
    if (!c.in_sample && c.folds < 2) throw ConfigError("folds must be >= 2");
    if (c.models.empty()) throw ConfigError("models: at least one base model must be enabled");
    std::set<std::string> seen;
    for (const auto& m : c.models) {
        const auto& known = known_model_ids();
        if (std::find(known.begin(), known.end(), m) == known.end()) throw ConfigError("models: unknown base model '" + m + "'");
        if (!seen.insert(m).second) throw ConfigError("models: '" + m + "' listed twice");
    }
    if (c.dataset != DatasetKind::CicIds2017 && c.data.size() != 1) {
        throw ConfigError("data: " + std::string(to_string(c.dataset)) + " takes exactly one file");
    }
    validate(c.params.cart);
    validate(c.params.bagging.tree);
    if (c.params.bagging.n_estimators < 1) throw ConfigError("bagging.n_estimators must be >= 1");
    for (const auto* b : {&c.params.gbm, &c.params.light, &c.params.xgb, &c.params.cat}) validate(*b);
    validate(c.params.lstm);
    validate(c.params.gru);
    validate(c.meta);
}

/// Every key with its effective value, one per line, in a fixed order. The
/// output directory is left out so runs written to different places compare equal.
inline std::string effective_config_text(const RunConfig& c) {
    std::string out;
    for (const auto& f : detail::fields()) {
        if (f.key != "out") out += f.key + " = " + f.get(c) + "\n";
    }
    return out;
}

}  // namespace ensembleguard
