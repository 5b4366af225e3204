#pragma once

// Pipeline orchestration behind the command-line tool. Each command reads
// the run configuration, works inside cfg.out and finishes by rewriting
// manifest.json, which lists every artifact under cfg.out with its SHA-256.
//
// Layout of cfg.out:
//   effective.conf            every configuration key with its value
//   ingest/summary.txt        record and class counts of the raw input
//   preprocess/summary.txt    split sizes, outlier counts, warnings
//   preprocess/outliers.txt   flagged cells
//   data/test.csv             encoded (unscaled) test records with labels
//   stacking/summary.txt      fold sizes and meta-model training loss
//   bundle/                   pipeline files, loadable with load_pipeline
//   reports/                  one report per model, plus summary.md
//   explain/                  attack ratios, decision rules, fidelity
//   manifest.json

#include "ensembleguard/config.hpp"
#include "ensembleguard/data_ingest.hpp"
#include "ensembleguard/digest.hpp"
#include "ensembleguard/evaluation.hpp"
#include "ensembleguard/explainability.hpp"
#include "ensembleguard/meta_ensemble.hpp"
#include "ensembleguard/preprocess.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ensembleguard {

inline constexpr std::string_view toolkit_version = kVersion;

/// Failure inside a pipeline stage that is not the user's fault.
class StageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

/// Progress of one command, recorded in the manifest.
struct RunLog {
    std::string command;
    std::vector<std::string> completed;
    std::vector<StageTiming> timing;
    std::optional<std::string> failed_stage;
};

namespace detail {

inline std::string file_text(const std::filesystem::path& path) {
    auto is = open_input(path);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline std::vector<std::string> artifact_list(const std::filesystem::path& root) {
    std::vector<std::string> out;
    if (!std::filesystem::exists(root)) return out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        const auto rel = std::filesystem::relative(e.path(), root).generic_string();
        if (rel == "manifest.json" || rel.ends_with(".tmp")) continue;
        out.push_back(rel);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace detail

/// Manifest body without the timing field; its digest is stable across
/// identical runs.
inline nlohmann::ordered_json manifest_body(const RunConfig& cfg, const RunLog& log) {
    nlohmann::ordered_json j;
    j["toolkit"] = "ensembleguard";
    j["version"] = std::string(toolkit_version);
    j["command"] = log.command;
    nlohmann::ordered_json conf = nlohmann::ordered_json::object();
    for (const auto& f : detail::fields()) {
        if (f.key != "out") conf[f.key] = f.get(cfg);
    }
    j["effective_config"] = conf;
    auto seeded = cfg;
    derive_member_seeds(seeded);
    j["seeds"] = {{"run", cfg.seed},
                  {"subsample", derive_seed(cfg.seed, "subsample")},
                  {"split", cfg.seed},
                  {"stacking_folds", derive_seed(cfg.seed, "stacking")},
                  {"bagging", seeded.params.bagging.seed},
                  {"gbm", seeded.params.gbm.seed},
                  {"light", seeded.params.light.seed},
                  {"xgb", seeded.params.xgb.seed},
                  {"cat", seeded.params.cat.seed},
                  {"lstm", seeded.params.lstm.seed},
                  {"gru", seeded.params.gru.seed},
                  {"meta", seeded.meta.seed},
                  {"distill", derive_seed(cfg.seed, "distill")}};
    j["stages"] = log.completed;
    j["partial"] = log.failed_stage.has_value();
    j["failed_stage"] = log.failed_stage ? nlohmann::ordered_json(*log.failed_stage) : nlohmann::ordered_json(nullptr);
    auto arts = nlohmann::ordered_json::array();
    for (const auto& rel : detail::artifact_list(cfg.out)) {
        const auto path = cfg.out / rel;
        arts.push_back({{"path", rel}, {"bytes", std::filesystem::file_size(path)}, {"sha256", sha256_file(path)}});
    }
    j["artifacts"] = arts;
    return j;
}

/// Writes cfg.out/manifest.json atomically. "digest" covers everything
/// except "timing".
inline nlohmann::ordered_json write_manifest(const RunConfig& cfg, const RunLog& log) {
    auto j = manifest_body(cfg, log);
    j["digest"] = sha256_hex(j.dump());
    auto t = nlohmann::ordered_json::object();
    for (const auto& s : log.timing) t[s.stage] = s.seconds;
    j["timing"] = t;
    detail::write_text_file(cfg.out / "manifest.json", j.dump(2) + "\n");
    return j;
}

namespace detail {

/// Runs one stage; on failure records it, writes a partial manifest and
/// rethrows with the stage name in the message.
template <typename F>
auto stage(const RunConfig& cfg, RunLog& log, const std::string& name, F&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    auto finish = [&] {
        log.completed.push_back(name);
        log.timing.push_back({name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
    };
    auto fail = [&] {
        log.failed_stage = name;
        try {
            write_manifest(cfg, log);
        } catch (...) {
        }
    };
    try {
        if constexpr (std::is_void_v<decltype(body())>) {
            body();
            finish();
        } else {
            auto r = body();
            finish();
            return r;
        }
    } catch (const UserError& e) {
        fail();
        throw UserError(name + ": " + e.what());
    } catch (const std::exception& e) {
        fail();
        throw StageError(name + ": " + e.what());
    }
}

inline AttackTaxonomy taxonomy_for(const RunConfig& cfg) {
    return cfg.taxonomy ? load_taxonomy(*cfg.taxonomy) : class_taxonomy(cfg.dataset);
}

inline void require_file(const std::filesystem::path& p) {
    if (!std::filesystem::is_regular_file(p)) throw UserError("no such file: " + p.string());
}

inline std::string class_counts_text(const std::vector<int>& labels, const ClassSet& classes, const std::string& prefix) {
    std::vector<std::size_t> counts(classes.size(), 0);
    for (auto y : labels) {
        if (y >= 0) ++counts[static_cast<std::size_t>(y)];
    }
    std::string out;
    for (std::size_t c = 0; c < classes.size(); ++c) out += prefix + classes.names[c] + " = " + std::to_string(counts[c]) + "\n";
    return out;
}

inline std::vector<int> dataset_labels(const Dataset& ds) {
    std::vector<int> out;
    out.reserve(ds.n());
    for (const auto& r : ds.records) out.push_back(detail::class_index(ds.classes, r.label));
    return out;
}

// Encoded records as CSV: feature columns, then the class name.
inline std::string encoded_csv(const EncodedDataset& e) {
    std::string out = text::join(e.feature_names, ",") + ",label\n";
    for (std::size_t i = 0; i < e.n(); ++i) {
        for (std::size_t j = 0; j < e.p(); ++j) {
            out += text::fmt(e.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
            out += ',';
        }
        out += e.labels[i] >= 0 ? e.classes.names[static_cast<std::size_t>(e.labels[i])] : std::string();
        out += '\n';
    }
    return out;
}

inline EncodedDataset read_encoded_csv(const std::filesystem::path& path, const Encoders& enc) {
    const auto content = file_text(path);
    const auto lines = csv_lines(content);
    if (lines.empty()) throw ParseError(path.string() + ": empty file");
    const auto p = enc.schema.size();
    const auto& header = lines.front().cells;
    bool match = header.size() == p + 1;
    for (std::size_t j = 0; match && j < p; ++j) match = text::trim(header[j]) == enc.schema.features[j].name;
    if (!match) throw SchemaError(path.string() + ": columns do not match the bundle schema");
    EncodedDataset e;
    e.classes = enc.classes;
    e.matrix.resize(static_cast<Eigen::Index>(lines.size() - 1), static_cast<Eigen::Index>(p));
    for (std::size_t j = 0; j < p; ++j) {
        e.feature_names.push_back(enc.schema.features[j].name);
        e.categorical.push_back(enc.schema.features[j].kind == FeatureKind::Categorical);
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto& cells = lines[i].cells;
        const auto where = path.string() + ":" + std::to_string(lines[i].number);
        if (cells.size() != p + 1) throw ParseError(where + ": expected " + std::to_string(p + 1) + " columns");
        for (std::size_t j = 0; j < p; ++j) {
            e.matrix(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j)) = text::require_double(cells[j], where);
        }
        const auto label = std::string(text::trim(cells[p]));
        e.labels.push_back(label.empty() ? -1 : detail::class_index(enc.classes, label));
        e.source_rows.push_back(i - 1);
    }
    return e;
}

inline void write_summary_file(const RunConfig& cfg, const std::string& rel, const std::string& content) {
    write_text_file(cfg.out / rel, content);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ingest

struct IngestResult {
    Dataset dataset;
    std::string summary;
};

/// Parses every input file once and writes ingest/summary.txt.
inline IngestResult cmd_ingest(const RunConfig& cfg, RunLog* log_out = nullptr) {
    RunLog log{"ingest", {}, {}, {}};
    IngestResult r;
    validate(cfg);
    detail::stage(cfg, log, "config", [&] { detail::write_text_file(cfg.out / "effective.conf", effective_config_text(cfg)); });
    r.dataset = detail::stage(cfg, log, "ingest", [&] {
        for (const auto& p : cfg.data) detail::require_file(p);
        return parse_dataset(cfg.dataset, cfg.data, detail::taxonomy_for(cfg));
    });
    detail::stage(cfg, log, "ingest-summary", [&] {
        const auto& ds = r.dataset;
        std::size_t cats = 0;
        for (const auto& f : ds.schema.features) cats += f.kind == FeatureKind::Categorical ? 1 : 0;
        std::string s;
        s += "dataset = " + std::string(to_string(cfg.dataset)) + "\n";
        for (const auto& p : cfg.data) s += "file = " + p.filename().generic_string() + "\n";
        s += "records = " + std::to_string(ds.n()) + "\n";
        s += "features = " + std::to_string(ds.p()) + "\n";
        s += "categorical_features = " + std::to_string(cats) + "\n";
        s += "missing_cells = " + std::to_string(find_missing(ds).size()) + "\n";
        s += "classes = " + std::to_string(ds.classes.size()) + "\n";
        s += detail::class_counts_text(detail::dataset_labels(ds), ds.classes, "class ");
        r.summary = s;
        detail::write_text_file(cfg.out / "ingest" / "summary.txt", s);
    });
    write_manifest(cfg, log);
    if (log_out) *log_out = log;
    return r;
}

// ---------------------------------------------------------------------------
// train

struct TrainResult {
    Pipeline pipeline;
    MetaTrainingSet stack;
    EncodedDataset test;  // encoded, unscaled
    std::vector<std::string> bundle_files;
};

/// Preprocess, base models with out-of-fold stacking, meta-model and
/// distillation. Requires the ingest outputs in cfg.out.
inline TrainResult cmd_train(const RunConfig& cfg_in, RunLog* log_out = nullptr) {
    RunLog log{"train", {}, {}, {}};
    auto cfg = cfg_in;
    TrainResult r;
    validate(cfg);
    derive_member_seeds(cfg);
    if (!std::filesystem::is_regular_file(cfg.out / "ingest" / "summary.txt")) {
        throw UserError("ingest outputs missing in " + cfg.out.string() + "; run ingest first");
    }
    detail::stage(cfg, log, "config", [&] {
        detail::write_text_file(cfg.out / "effective.conf", effective_config_text(cfg));
    });

    struct Prepared {
        EncodedDataset train, test;
        Encoders encoders;
        Standardizer stats;
        Matrix train_std;
    };
    const auto prep = detail::stage(cfg, log, "preprocess", [&] {
        const auto tax = detail::taxonomy_for(cfg);
        auto ds = parse_dataset(cfg.dataset, cfg.data, tax);
        const auto parsed = ds.n();
        ds = subsample(ds, cfg.max_records, derive_seed(cfg.seed, "subsample"));
        const auto missing = find_missing(ds).size();
        ds = impute(ds);
        const auto outliers = detect_outliers(ds, cfg.outlier_k);
        auto [encoded, encoders] = fit_label_encoding(ds);
        Prepared p;
        p.encoders = encoders;
        std::vector<std::string> warnings;
        if (cfg.test_data) {
            detail::require_file(*cfg.test_data);
            p.train = encoded;
            auto test_ds = impute(parse_dataset(cfg.dataset, {*cfg.test_data}, tax));
            p.test = apply_encoding(encoders, test_ds);
            if (p.test.unseen_categories > 0) {
                warnings.push_back(std::to_string(p.test.unseen_categories) + " test cells carry categories unseen in training");
            }
        } else {
            auto sp = split(encoded, cfg.split_ratio, cfg.seed, cfg.stratified);
            p.train = std::move(sp.train);
            p.test = std::move(sp.test);
            warnings = sp.warnings;
        }
        const auto before = p.train.n();
        if (cfg.remove_outliers) p.train = remove_outliers(p.train, outliers);
        p.stats = Standardizer::fit(p.train.matrix);
        p.train_std = p.stats.transform(p.train.matrix);

        std::string s;
        s += "parsed_records = " + std::to_string(parsed) + "\n";
        s += "used_records = " + std::to_string(ds.n()) + "\n";
        s += "imputed_cells = " + std::to_string(missing) + "\n";
        s += "outlier_k = " + text::fmt(cfg.outlier_k) + "\n";
        s += "outlier_cells = " + std::to_string(outliers.flagged.size()) + "\n";
        s += "outlier_records = " + std::to_string(outliers.flagged_records().size()) + "\n";
        s += "outlier_records_removed = " + std::to_string(before - p.train.n()) + "\n";
        s += "train_records = " + std::to_string(p.train.n()) + "\n";
        s += "test_records = " + std::to_string(p.test.n()) + "\n";
        s += detail::class_counts_text(p.train.labels, p.train.classes, "train ");
        s += detail::class_counts_text(p.test.labels, p.test.classes, "test ");
        for (const auto& w : warnings) s += "warning = " + w + "\n";
        detail::write_text_file(cfg.out / "preprocess" / "summary.txt", s);
        std::ostringstream os;
        write_outlier_report(os, outliers, ds.schema);
        detail::write_text_file(cfg.out / "preprocess" / "outliers.txt", os.str());
        detail::write_text_file(cfg.out / "data" / "test.csv", detail::encoded_csv(p.test));
        return p;
    });
    r.test = prep.test;

    const TrainingData td{prep.train.matrix, prep.train_std, prep.train.labels, prep.train.num_classes(), prep.train.categorical};
    std::vector<MemberSpec> members;
    for (const auto& id : cfg.models) members.push_back(member_spec(id, cfg.params));

    r.stack = detail::stage(cfg, log, "stacking", [&] {
        return build_meta_training_set(members, td, cfg.folds, derive_seed(cfg.seed, "stacking"), cfg.in_sample);
    });
    r.pipeline.encoders = prep.encoders;
    r.pipeline.standardizer = prep.stats;
    r.pipeline.registry = detail::stage(cfg, log, "base-models", [&] { return train_registry(members, td); });
    r.pipeline.meta = detail::stage(cfg, log, "meta-model", [&] {
        return train_meta(r.stack.features, r.stack.labels, td.num_classes, cfg.meta);
    });
    r.pipeline.distilled = detail::stage(cfg, log, "distill", [&] {
        return distill_to_tree(r.pipeline.meta, r.stack.features, cfg.distill_depth, derive_seed(cfg.seed, "distill"));
    });
    detail::stage(cfg, log, "save-bundle", [&] {
        std::string s;
        s += "stacking = " + std::string(cfg.in_sample ? "in-sample" : "out-of-fold") + "\n";
        s += "folds = " + std::to_string(r.stack.folds) + "\n";
        for (std::size_t f = 0; f < r.stack.fold_train_rows.size(); ++f) {
            s += "fold " + std::to_string(f + 1) + " train_rows = " + std::to_string(r.stack.fold_train_rows[f].size()) + "\n";
        }
        s += "meta_features = " + std::to_string(r.stack.features.cols()) + "\n";
        for (const auto& w : r.stack.warnings) s += "warning = " + w + "\n";
        const auto& loss = r.pipeline.meta.epoch_loss();
        for (std::size_t e = 0; e < loss.size(); ++e) s += "meta_loss " + std::to_string(e + 1) + " = " + text::fmt(loss[e]) + "\n";
        s += "distill_fidelity_holdout = " + text::fmt(r.pipeline.distilled.fidelity) + "\n";
        detail::write_text_file(cfg.out / "stacking" / "summary.txt", s);
        r.bundle_files = save_pipeline(r.pipeline, cfg.out / "bundle");
        detail::write_text_file(cfg.out / "bundle" / "config.txt", effective_config_text(cfg));
    });
    write_manifest(cfg, log);
    if (log_out) *log_out = log;
    return r;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateResult {
    std::vector<EvalReport> reports;  // registry order, then meta, then distilled
    BatchPrediction predictions;

    const EvalReport& report(const std::string& id) const {
        for (const auto& r : reports) {
            if (r.model_id == id) return r;
        }
        throw UserError("no report for model '" + id + "'");
    }
};

inline std::string summary_table(const std::vector<EvalReport>& reports) {
    std::string out = "| Model | Accuracy | Macro precision | Macro recall | Macro F1 | Weighted F1 | Fidelity |\n";
    out += "|---|---:|---:|---:|---:|---:|---:|\n";
    for (const auto& r : reports) {
        out += "| " + r.model_id + " | " + text::fixed(r.accuracy.value_or(0.0), 3) + " | " + text::fixed(r.macro->precision, 3) +
               " | " + text::fixed(r.macro->recall, 3) + " | " + text::fixed(r.macro->f1, 3) + " | " +
               text::fixed(r.weighted->f1, 3) + " | " + (r.fidelity ? text::fixed(*r.fidelity, 3) : std::string()) + " |\n";
    }
    return out;
}

/// Scores every base model, the meta-model and the distilled tree on the
/// persisted test records. Reads the bundle, never writes to it.
inline EvaluateResult cmd_evaluate(const RunConfig& cfg, RunLog* log_out = nullptr) {
    RunLog log{"evaluate", {}, {}, {}};
    EvaluateResult r;
    const auto pl = detail::stage(cfg, log, "load-bundle", [&] { return load_pipeline(cfg.out / "bundle"); });
    const auto test = detail::stage(cfg, log, "load-test", [&] {
        auto t = detail::read_encoded_csv(cfg.out / "data" / "test.csv", pl.encoders);
        if (t.n() == 0) throw UserError("test set is empty");
        for (auto y : t.labels) {
            if (y < 0) throw UserError("test set has unlabeled records");
        }
        return t;
    });
    r.predictions = detail::stage(cfg, log, "predict", [&] { return predict_batch(pl, test.matrix); });
    detail::stage(cfg, log, "reports", [&] {
        const auto name = std::string(to_string(cfg.dataset));
        const auto& ids = pl.registry.ids();
        for (std::size_t k = 0; k < ids.size(); ++k) {
            r.reports.push_back(evaluate(test.labels, predict_labels(r.predictions.member_proba[k]), pl.encoders.classes, ids[k], name));
        }
        r.reports.push_back(evaluate(test.labels, r.predictions.meta_pred, pl.encoders.classes, "meta", name));
        auto tree = evaluate(test.labels, r.predictions.tree_pred, pl.encoders.classes, "distilled", name);
        tree.fidelity = agreement(r.predictions.tree_pred, r.predictions.meta_pred);
        r.reports.push_back(std::move(tree));
        for (const auto& rep : r.reports) {
            const auto base = cfg.out / "reports" / rep.model_id;
            detail::write_text_file(base.string() + ".md", render_report(rep, ReportFormat::Markdown));
            detail::write_text_file(base.string() + ".csv", render_report(rep, ReportFormat::Csv));
            detail::write_text_file(base.string() + ".confusion.csv", render_confusion(rep.matrix, pl.encoders.classes.display));
        }
        detail::write_text_file(cfg.out / "reports" / "summary.md", summary_table(r.reports));
    });
    write_manifest(cfg, log);
    if (log_out) *log_out = log;
    return r;
}

// ---------------------------------------------------------------------------
// explain

struct ExplainResult {
    AttackRatioReport ratios;
    RuleSet rules;
    double fidelity = 0.0;
};

/// Attack ratios of the meta-model's predictions and the distilled tree's
/// rules. Uses the persisted test records unless raw data files are given.
inline ExplainResult cmd_explain(const RunConfig& cfg, const std::vector<std::filesystem::path>& data = {},
                                 RunLog* log_out = nullptr) {
    RunLog log{"explain", {}, {}, {}};
    ExplainResult r;
    const auto pl = detail::stage(cfg, log, "load-bundle", [&] { return load_pipeline(cfg.out / "bundle"); });
    const auto input = detail::stage(cfg, log, "load-data", [&] {
        if (data.empty()) return detail::read_encoded_csv(cfg.out / "data" / "test.csv", pl.encoders);
        for (const auto& p : data) detail::require_file(p);
        auto ds = parse_dataset(cfg.dataset, data, detail::taxonomy_for(cfg));
        return apply_encoding(pl.encoders, impute(ds));
    });
    detail::stage(cfg, log, "explain", [&] {
        if (input.n() == 0) throw UserError("nothing to report");
        const auto pred = predict_batch(pl, input.matrix);
        const bool labeled = std::all_of(input.labels.begin(), input.labels.end(), [](int y) { return y >= 0; });
        r.ratios = attack_ratios(pred.meta_pred, pl.encoders.classes, labeled ? &input.labels : nullptr);
        r.rules = extract_rules(pl.distilled, pl.registry.ids(), pl.encoders.classes);
        r.fidelity = agreement(pred.tree_pred, pred.meta_pred);
        const auto dir = cfg.out / "explain";
        detail::write_text_file(dir / "ratios.md", render_ratios(r.ratios, ReportFormat::Markdown));
        detail::write_text_file(dir / "ratios.txt", render_ratios(r.ratios, ReportFormat::Plain));
        detail::write_text_file(dir / "rules.md", render_rules(r.rules, ReportFormat::Markdown));
        detail::write_text_file(dir / "rules.txt", render_rules(r.rules, ReportFormat::Plain));
        detail::write_text_file(dir / "fidelity.txt", "records = " + std::to_string(input.n()) + "\nrules = " +
                                                          std::to_string(r.rules.rules.size()) + "\nfidelity = " +
                                                          text::fixed(r.fidelity, 6) + "\n");
    });
    write_manifest(cfg, log);
    if (log_out) *log_out = log;
    return r;
}

// ---------------------------------------------------------------------------
// run-all

struct RunAllResult {
    IngestResult ingest;
    TrainResult train;
    EvaluateResult evaluation;
    ExplainResult explanation;
    nlohmann::ordered_json manifest;
};

inline RunAllResult run_all(const RunConfig& cfg) {
    RunAllResult r;
    RunLog total{"run-all", {}, {}, {}};
    auto absorb = [&](const RunLog& l) {
        for (const auto& s : l.completed) total.completed.push_back(l.command + "/" + s);
        for (const auto& t : l.timing) total.timing.push_back({l.command + "/" + t.stage, t.seconds});
    };
    RunLog l;
    r.ingest = cmd_ingest(cfg, &l);
    absorb(l);
    r.train = cmd_train(cfg, &l);
    absorb(l);
    r.evaluation = cmd_evaluate(cfg, &l);
    absorb(l);
    r.explanation = cmd_explain(cfg, {}, &l);
    absorb(l);
    r.manifest = write_manifest(cfg, total);
    return r;
}

}  // namespace ensembleguard
