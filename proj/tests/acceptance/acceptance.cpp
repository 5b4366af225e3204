// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Usage: acceptance --work DIR [--only N]...

#include "../support/generators.hpp"
#include "../support/oracles.hpp"

#include "ensembleguard/ensembleguard.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace ensembleguard;
using eg_test::Rng;

namespace {

struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            notes.push_back(what);
        }
    }
    void note(const std::string& what) { notes.push_back(what); }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fixed3(double v) { return text::fixed(v, 3); }

// ---------------------------------------------------------------- shared runs

struct DeskRun {
    RunAllResult result;
    fs::path out;
    double seconds = 0.0;
};

class Runs {
public:
    explicit Runs(fs::path work) : work_(std::move(work)) {}

    const DeskRun& get(DatasetKind kind, std::uint64_t seed, const std::string& tag = "") {
        const auto key = std::string(to_string(kind)) + "-seed" + std::to_string(seed) + tag;
        auto it = runs_.find(key);
        if (it != runs_.end()) return it->second;
        auto cfg = load_config(fs::path(EG_SOURCE_DIR) / "configs" / "desk.conf",
                               ConfigOverrides{Profile::Desk, seed, work_ / "runs" / key});
        cfg.dataset = kind;
        cfg.data = data_for(kind);
        fs::remove_all(cfg.out);
        DeskRun run;
        run.out = cfg.out;
        const auto t0 = Clock::now();
        run.result = run_all(cfg);
        run.seconds = seconds_since(t0);
        std::cout << "  [run " << key << ": " << text::fixed(run.seconds, 1) << " s]\n" << std::flush;
        return runs_.emplace(key, std::move(run)).first->second;
    }

private:
    std::vector<fs::path> data_for(DatasetKind kind) {
        const auto dir = work_ / "data";
        fs::create_directories(dir);
        synthetic::Options opt;
        opt.seed = 1;
        if (kind == DatasetKind::NslKdd) {
            const auto path = dir / "KDDTrain+.txt";
            if (!fs::exists(path)) synthetic::write_nslkdd(path, opt);
            return {path};
        }
        if (kind == DatasetKind::CicIds2017) {
            const auto cic = dir / "cic";
            if (!fs::exists(cic)) return synthetic::write_cicids2017(cic, opt, 2);
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(cic)) files.push_back(e.path());
            std::sort(files.begin(), files.end());
            return files;
        }
        throw UserError("no desk data for " + std::string(to_string(kind)));
    }

    fs::path work_;
    std::map<std::string, DeskRun> runs_;
};

double macro_f1(const EvalReport& r) { return r.macro ? r.macro->f1 : 0.0; }

// ---------------------------------------------------------------- criteria

Outcome metric_oracle() {
    Outcome o;
    const auto t0 = Clock::now();
    Rng rng(derive_seed(1, "acceptance-metrics"));
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t C = 2 + rng.below(5);
        const std::size_t n = 1 + rng.below(500);
        const auto truth = eg_test::random_labels(rng, n, C);
        const auto pred = eg_test::noisy_copy(rng, truth, C, rng.uniform());
        const auto m = confusion(truth, pred, C);
        const auto got = class_metrics(m);
        const auto want = eg_test::brute_metrics(truth, pred, C);
        bool same = got.size() == C && accuracy(m) == eg_test::brute_accuracy(truth, pred);
        double macro = 0.0;
        std::size_t present = 0;
        for (std::size_t c = 0; same && c < C; ++c) {
            same = got[c].precision == want[c].precision && got[c].recall == want[c].recall && got[c].f1 == want[c].f1 &&
                   got[c].support == want[c].support;
            const bool predicted = std::count(pred.begin(), pred.end(), static_cast<int>(c)) > 0;
            if (want[c].support > 0 || predicted) {
                macro += want[c].f1;
                ++present;
            }
        }
        if (same && present) same = macro_average(got).f1 == macro / static_cast<double>(present);
        o.require(same, "trial " + std::to_string(trial) + " (C=" + std::to_string(C) + ", n=" + std::to_string(n) +
                            ") differs from brute force");
    }
    const double s = seconds_since(t0);
    o.require(s < 5.0, "runtime " + text::fixed(s, 2) + " s >= 5 s");
    o.note("100 trials, " + text::fixed(s, 3) + " s");
    return o;
}

Outcome preprocess_suite() {
    Outcome o;
    const auto t0 = Clock::now();
    Rng rng(derive_seed(1, "acceptance-preprocess"));

    // imputation and outliers on 50 random mixed matrices
    for (int trial = 0; trial < 50; ++trial) {
        eg_test::DatasetShape shape;
        shape.n = 5 + rng.below(200);
        shape.numeric = 1 + rng.below(5);
        shape.categorical = rng.below(3);
        shape.missing = rng.uniform(0.0, 0.3);
        const auto raw = eg_test::random_dataset(rng, shape);
        const auto filled = impute(raw);
        o.require(find_missing(filled).empty(), "trial " + std::to_string(trial) + ": missing cells after imputation");
        const double k = rng.uniform(1.0, 3.5);
        const auto report = detect_outliers(filled, k);
        std::set<std::pair<std::size_t, std::size_t>> got;
        for (const auto& f : report.flagged) got.emplace(f.record, f.feature);
        o.require(got == eg_test::brute_outliers(filled, k), "trial " + std::to_string(trial) + ": outlier flags differ");
    }

    // split: disjoint and exhaustive for 100 (seed, ratio) draws
    for (int trial = 0; trial < 100; ++trial) {
        eg_test::DatasetShape shape;
        shape.n = 2 + rng.below(300);
        shape.classes = 2 + rng.below(4);
        shape.missing = 0.0;
        const auto enc = label_encode(eg_test::random_dataset(rng, shape));
        const auto seed = rng.next();
        const double ratio = rng.uniform(0.05, 0.95);
        const bool stratified = trial % 2 == 0;
        const auto s = split(enc, ratio, seed, stratified);
        std::vector<std::size_t> all = s.train_rows;
        all.insert(all.end(), s.test_rows.begin(), s.test_rows.end());
        std::sort(all.begin(), all.end());
        bool ok = all.size() == enc.n() && std::adjacent_find(all.begin(), all.end()) == all.end();
        for (std::size_t i = 0; ok && i < all.size(); ++i) ok = all[i] == i;
        ok = ok && s.train.n() == s.train_rows.size() && s.test.n() == s.test_rows.size();
        o.require(ok, "split trial " + std::to_string(trial) + " is not a partition");
    }

    // encode / decode round trips
    for (int trial = 0; trial < 20; ++trial) {
        eg_test::DatasetShape shape;
        shape.n = 10 + rng.below(100);
        shape.categorical = 1 + rng.below(3);
        shape.missing = 0.0;
        const auto ds = eg_test::random_dataset(rng, shape);
        const auto [enc, encoders] = fit_label_encoding(ds);
        bool ok = true;
        for (std::size_t i = 0; ok && i < ds.n(); ++i) {
            ok = encoders.classes.names[static_cast<std::size_t>(enc.labels[i])] == ds.records[i].label;
            for (const auto& [j, ce] : encoders.categorical) {
                const auto code = static_cast<std::size_t>(enc.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
                ok = ok && ce.decode(code) == std::get<std::string>(ds.records[i].values[j]);
            }
        }
        std::stringstream ss;
        write_encoders(ss, encoders);
        ok = ok && read_encoders(ss) == encoders;
        o.require(ok, "encoding trial " + std::to_string(trial) + " does not round-trip");
    }

    const double s = seconds_since(t0);
    o.require(s < 10.0, "runtime " + text::fixed(s, 2) + " s >= 10 s");
    o.note(text::fixed(s, 3) + " s");
    return o;
}

Outcome gradient_checks() {
    Outcome o;
    const auto t0 = Clock::now();
    double worst = 0.0;
    for (auto kind : {CellKind::Lstm, CellKind::Gru}) {
        for (std::uint64_t seed : {1, 2, 3}) {
            RecurrentConfig cfg;
            cfg.kind = kind;
            cfg.hidden = 5;
            cfg.seed = seed;
            Rng rng(derive_seed(seed, "acceptance-gradcheck"));
            const std::size_t p = 4, C = 3, b = 4;
            const auto model = init_recurrent(cfg, p, C);
            const auto batch = eg_test::random_matrix(rng, b, p);
            const auto labels = eg_test::random_labels(rng, b, C);
            ColMatrix h0(cfg.hidden, static_cast<Eigen::Index>(b)), c0(cfg.hidden, static_cast<Eigen::Index>(b));
            for (auto& v : h0.reshaped()) v = 0.5 * rng.normal();
            for (auto& v : c0.reshaped()) v = 0.5 * rng.normal();
            const double err = kind == CellKind::Lstm ? gradient_check(model, batch, labels, h0, c0)
                                                      : gradient_check(model, batch, labels, h0);
            worst = std::max(worst, err);
            o.require(err < 1e-4, std::string(to_string(kind)) + " seed " + std::to_string(seed) + ": relative error " +
                                      text::fmt(err));
        }
    }
    const double s = seconds_since(t0);
    o.require(s < 60.0, "runtime " + text::fixed(s, 2) + " s >= 60 s");
    o.note("worst relative error " + text::fmt(worst) + ", " + text::fixed(s, 3) + " s");
    return o;
}

Outcome boosting_monotone() {
    Outcome o;
    const auto t0 = Clock::now();
    const std::vector<BoostFlavor> flavors{BoostFlavor::Gbm, BoostFlavor::Light, BoostFlavor::Xgb, BoostFlavor::Cat};
    Rng rng(derive_seed(1, "acceptance-boosting"));
    for (int d = 0; d < 20; ++d) {
        const std::size_t n = 200, p = 5, C = 3;
        auto x = eg_test::random_matrix(rng, n, p);
        const auto y = eg_test::random_labels(rng, n, C);
        // shift class means so there is signal, and make one column categorical
        for (std::size_t i = 0; i < n; ++i) x(static_cast<Eigen::Index>(i), 0) += y[i];
        std::vector<bool> categorical(p, false);
        categorical[p - 1] = true;
        for (std::size_t i = 0; i < n; ++i) x(static_cast<Eigen::Index>(i), p - 1) = static_cast<double>(rng.below(4));
        for (auto f : flavors) {
            auto cfg = BoostConfig::preset(f);
            cfg.n_rounds = 50;
            cfg.learning_rate = 0.1;
            cfg.seed = derive_seed(1, "acceptance-boosting", static_cast<std::uint64_t>(d));
            const auto model = train_boosted(x, y, C, categorical, cfg);
            const auto& loss = model.train_loss();
            bool ok = loss.size() == static_cast<std::size_t>(cfg.n_rounds) + 1;
            std::size_t bad = 0;
            for (std::size_t r = 1; ok && r < loss.size(); ++r) {
                if (loss[r] > loss[r - 1] * (1.0 + 1e-12)) {
                    ok = false;
                    bad = r;
                }
            }
            o.require(ok, std::string(to_string(f)) + " dataset " + std::to_string(d) + ": loss rose at round " +
                              std::to_string(bad));
        }
    }
    const double s = seconds_since(t0);
    o.require(s < 120.0, "runtime " + text::fixed(s, 2) + " s >= 120 s");
    o.note("80 fits of 50 rounds, " + text::fixed(s, 2) + " s");
    return o;
}

Outcome desk_nsl(Runs& runs) {
    Outcome o;
    const auto& run = runs.get(DatasetKind::NslKdd, 1);
    const auto& meta = run.result.evaluation.report("meta");
    const double acc = meta.accuracy.value_or(0.0);
    const double f1 = macro_f1(meta);
    const auto train_rows = run.result.train.stack.features.rows();
    const auto test_rows = run.result.train.test.n();
    o.require(acc >= 0.95, "meta accuracy " + fixed3(acc) + " < 0.95");
    o.require(f1 >= 0.90, "meta macro-F1 " + fixed3(f1) + " < 0.90");
    o.require(run.seconds < 15 * 60.0, "runtime " + text::fixed(run.seconds, 1) + " s >= 900 s");
    o.note("train " + std::to_string(train_rows) + " / test " + std::to_string(test_rows) + ", accuracy " + fixed3(acc) +
           ", macro-F1 " + fixed3(f1) + ", " + text::fixed(run.seconds, 1) + " s");
    return o;
}

Outcome dominance(Runs& runs) {
    Outcome o;
    for (auto kind : {DatasetKind::NslKdd, DatasetKind::CicIds2017}) {
        for (std::uint64_t seed : {1, 2, 3}) {
            const auto& run = runs.get(kind, seed);
            double best = 0.0;
            std::string best_id;
            for (const auto& r : run.result.evaluation.reports) {
                if (r.model_id == "meta" || r.model_id == "distilled") continue;
                if (macro_f1(r) > best) {
                    best = macro_f1(r);
                    best_id = r.model_id;
                }
            }
            const double meta = macro_f1(run.result.evaluation.report("meta"));
            const auto label = std::string(to_string(kind)) + " seed " + std::to_string(seed) + ": meta " + fixed3(meta) +
                               " vs " + best_id + " " + fixed3(best);
            o.require(meta >= best - 0.01, label);
            if (meta >= best - 0.01) o.note(label);
        }
    }
    return o;
}

Outcome fidelity(Runs& runs) {
    Outcome o;
    const auto& run = runs.get(DatasetKind::NslKdd, 1);
    const auto& distilled = run.result.train.pipeline.distilled;
    const auto depth = distilled.tree.tree().depth();
    const auto& pred = run.result.evaluation.predictions;
    std::size_t agree = 0;
    for (std::size_t i = 0; i < pred.meta_pred.size(); ++i) agree += pred.meta_pred[i] == pred.tree_pred[i];
    const double fid = pred.meta_pred.empty() ? 0.0 : static_cast<double>(agree) / static_cast<double>(pred.meta_pred.size());
    o.require(!pred.meta_pred.empty() && pred.meta_pred.size() == run.result.train.test.n(), "prediction count mismatch");
    o.require(depth <= 8, "distilled depth " + std::to_string(depth) + " > 8");
    o.require(fid >= 0.95, "fidelity " + fixed3(fid) + " < 0.95");
    o.note("depth " + std::to_string(depth) + ", fidelity " + text::fixed(fid, 4) + " on " +
           std::to_string(pred.meta_pred.size()) + " test records");
    return o;
}

std::map<std::string, std::string> file_digests(const fs::path& dir) {
    std::map<std::string, std::string> out;
    if (!fs::exists(dir)) return out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).generic_string()] = sha256_file(e.path());
    }
    return out;
}

Outcome reproducibility(Runs& runs) {
    Outcome o;
    const auto& a = runs.get(DatasetKind::NslKdd, 1);
    const auto& b = runs.get(DatasetKind::NslKdd, 1, "-rerun");
    for (const char* sub : {"reports", "bundle"}) {
        const auto da = file_digests(a.out / sub);
        const auto db = file_digests(b.out / sub);
        o.require(!da.empty(), std::string(sub) + "/ is empty");
        o.require(da == db, std::string(sub) + "/ differs between runs");
        if (da == db) o.note(std::string(sub) + "/: " + std::to_string(da.size()) + " identical files");
    }
    const auto ma = a.result.manifest.value("digest", std::string());
    const auto mb = b.result.manifest.value("digest", std::string());
    o.require(!ma.empty() && ma == mb, "manifest digests differ: " + ma + " vs " + mb);
    return o;
}

Outcome cart_oracle() {
    Outcome o;
    const auto t0 = Clock::now();
    Rng rng(derive_seed(1, "acceptance-cart"));
    std::size_t fixtures = 0, leaves = 0;
    for (std::size_t n = 2; n <= 8; ++n) {
        for (std::size_t p = 1; p <= 2; ++p) {
            for (int rep = 0; rep < 60; ++rep) {
                const auto x = eg_test::grid_matrix(rng, n, p, 2 + rng.below(4));
                const auto y = eg_test::random_labels(rng, n, 2);
                const auto tree = train_cart(x, y, 2, CartConfig{1, 1});
                const auto& root = tree.tree().nodes()[0];
                const auto want = eg_test::exhaustive_root_split(x, y, 2);
                ++fixtures;
                const auto tag = "n=" + std::to_string(n) + " p=" + std::to_string(p) + " rep " + std::to_string(rep);
                if (!want) {
                    ++leaves;
                    o.require(root.is_leaf(), tag + ": expected a leaf");
                    continue;
                }
                if (root.is_leaf()) {
                    o.require(false, tag + ": leaf, expected split on f" + std::to_string(want->feature));
                    continue;
                }
                o.require(root.feature == want->feature && root.threshold == want->threshold,
                          tag + ": split (" + std::to_string(root.feature) + ", " + text::fmt(root.threshold) +
                              ") expected (" + std::to_string(want->feature) + ", " + text::fmt(want->threshold) + ")");
            }
        }
    }
    const double s = seconds_since(t0);
    o.require(s < 5.0, "runtime " + text::fixed(s, 2) + " s >= 5 s");
    o.note(std::to_string(fixtures) + " fixtures (" + std::to_string(leaves) + " with a leaf root), " +
           text::fixed(s, 3) + " s");
    return o;
}

Outcome table_layout() {
    Outcome o;
    struct Row {
        double precision, recall, f1;
        std::size_t support;
    };
    // Hand-entered EnsembleGuard rows of the CIC-IDS-2017 table.
    const std::vector<Row> rows{{0.980, 0.986, 0.979, 387}, {0.989, 0.993, 0.987, 14},  {0.986, 0.979, 0.973, 612},
                                {0.982, 0.980, 0.960, 8},   {0.991, 0.987, 0.983, 231}, {0.986, 0.986, 0.982, 452}};
    const auto taxonomy = class_taxonomy(DatasetKind::CicIds2017);
    EvalReport r;
    r.model_id = "meta";
    r.dataset = "cic-ids-2017";
    r.classes.push_back({taxonomy.classes.display[0], 0.0, 0.0, 0.0, 0, 0});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& v = rows[i];
        r.classes.push_back({taxonomy.classes.display[i + 1], v.precision, v.recall, v.f1, v.support, 0});
    }
    const std::string expected =
        "Class | Precision | Recall | F1 | Support\n"
        "DoS Attacks | 0.980 | 0.986 | 0.979 | 387\n"
        "WebAttack Attacks | 0.989 | 0.993 | 0.987 | 14\n"
        "Botnet Attacks | 0.986 | 0.979 | 0.973 | 612\n"
        "PortScan Attacks | 0.982 | 0.980 | 0.960 | 8\n"
        "BruteForce Attacks | 0.991 | 0.987 | 0.983 | 231\n"
        "Infiltration Attacks | 0.986 | 0.986 | 0.982 | 452\n";
    const auto got = render_report(r, ReportFormat::Plain, RenderOptions{true});
    o.require(got == expected, "rendered table differs:\n" + got);
    if (got == expected) o.note(std::to_string(expected.size()) + " bytes identical");
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ensembleguard acceptance suite"};
    std::string work = "acceptance-work";
    std::vector<int> only;
    app.add_option("--work", work, "scratch directory for data and runs");
    app.add_option("--only", only, "run only these criteria")->check(CLI::Range(1, 10));
    CLI11_PARSE(app, argc, argv);

    fs::create_directories(work);
    fs::remove_all(fs::path(work) / "runs");
    Runs runs(fs::absolute(work));

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"metric oracle", metric_oracle},
        {"preprocess suite", preprocess_suite},
        {"recurrent gradient checks", gradient_checks},
        {"boosting monotonicity", boosting_monotone},
        {"desk NSL-KDD run", [&] { return desk_nsl(runs); }},
        {"ensemble dominance", [&] { return dominance(runs); }},
        {"distillation fidelity", [&] { return fidelity(runs); }},
        {"reproducibility", [&] { return reproducibility(runs); }},
        {"CART root split oracle", cart_oracle},
        {"report layout", table_layout},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.note(std::string("exception: ") + e.what());
        }
        std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << criteria[i].first << "\n";
        for (const auto& n : o.notes) std::cout << "    " << n << "\n";
        std::cout << std::flush;
        failures += !o.pass;
    }
    std::cout << (failures ? std::to_string(failures) + " criteria failed" : std::string("all criteria passed")) << "\n";
    return failures ? 1 : 0;
}
