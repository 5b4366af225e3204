#pragma once

#include "ensembleguard/boosting.hpp"
#include "ensembleguard/cart.hpp"
#include "ensembleguard/common.hpp"
#include "ensembleguard/data_ingest.hpp"
#include "ensembleguard/optim.hpp"
#include "ensembleguard/preprocess.hpp"
#include "ensembleguard/recurrent.hpp"
#include "ensembleguard/rng.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>

namespace ensembleguard {

// ---------------------------------------------------------------------------
// Base learners

/// A trained member of the stack. Recurrent members read the standardized
/// copy of the features, tree members the encoded values.
class BaseLearner {
public:
    virtual ~BaseLearner() = default;
    virtual std::size_t num_classes() const = 0;
    virtual bool standardized_input() const { return false; }
    virtual Matrix predict_proba(const Matrix& x) const = 0;
    virtual void write(std::ostream& os) const = 0;

    Matrix predict_proba(const Matrix& x, const Matrix& x_std) const { return predict_proba(standardized_input() ? x_std : x); }
};

template <typename Model>
class LearnerAdapter : public BaseLearner {
public:
    explicit LearnerAdapter(Model m) : model_(std::move(m)) {}
    const Model& model() const { return model_; }
    std::size_t num_classes() const override { return model_.num_classes(); }
    bool standardized_input() const override { return std::is_same_v<Model, RecurrentModel>; }
    Matrix predict_proba(const Matrix& x) const override { return model_.predict_proba(x); }
    void write(std::ostream& os) const override { model_.write(os); }

private:
    Model model_;
};

template <typename Model>
std::shared_ptr<const BaseLearner> make_learner(Model m) {
    return std::make_shared<LearnerAdapter<Model>>(std::move(m));
}

/// Reads any persisted member; the header line selects the model type.
inline std::shared_ptr<const BaseLearner> read_learner(std::istream& is) {
    std::string content((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    std::istringstream in(content);
    const std::string header(text::trim(std::string_view(content).substr(0, content.find('\n'))));
    if (header == "ensembleguard-cart v1") return make_learner(CartTree::read(in));
    if (header == "ensembleguard-bagging v1") return make_learner(BaggedEnsemble::read(in));
    if (header == "ensembleguard-boost v1") return make_learner(BoostedEnsemble::read(in));
    if (header == "ensembleguard-recurrent v1") return make_learner(RecurrentModel::read(in));
    throw ParseError("unrecognized model file header '" + std::string(header) + "'");
}

/// Everything a member needs to train.
struct TrainingData {
    Matrix x;
    Matrix x_std;
    std::vector<int> labels;
    std::size_t num_classes = 0;
    std::vector<bool> categorical;

    std::size_t n() const { return labels.size(); }

    TrainingData subset(const std::vector<std::size_t>& rows) const {
        TrainingData out;
        out.num_classes = num_classes;
        out.categorical = categorical;
        out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
        out.x_std.resize(static_cast<Eigen::Index>(rows.size()), x_std.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            out.x.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(rows[r]));
            out.x_std.row(static_cast<Eigen::Index>(r)) = x_std.row(static_cast<Eigen::Index>(rows[r]));
            out.labels.push_back(labels[rows[r]]);
        }
        return out;
    }
};

using LearnerFactory = std::function<std::shared_ptr<const BaseLearner>(const TrainingData&)>;

struct MemberSpec {
    std::string id;
    LearnerFactory train;
};

inline const std::vector<std::string>& known_model_ids() {
    static const std::vector<std::string> ids{"bagging", "gbm", "light", "xgb", "cat", "lstm", "gru", "cart"};
    return ids;
}

inline RecurrentConfig recurrent_preset(CellKind kind) {
    RecurrentConfig c;
    c.kind = kind;
    return c;
}

/// Per-member hyperparameters.
struct BaseModelParams {
    CartConfig cart;
    BaggingConfig bagging;
    BoostConfig gbm = BoostConfig::preset(BoostFlavor::Gbm);
    BoostConfig light = BoostConfig::preset(BoostFlavor::Light);
    BoostConfig xgb = BoostConfig::preset(BoostFlavor::Xgb);
    BoostConfig cat = BoostConfig::preset(BoostFlavor::Cat);
    RecurrentConfig lstm = recurrent_preset(CellKind::Lstm);
    RecurrentConfig gru = recurrent_preset(CellKind::Gru);
};

inline MemberSpec member_spec(const std::string& id, const BaseModelParams& params) {
    if (id == "cart") {
        return {id, [cfg = params.cart](const TrainingData& d) { return make_learner(train_cart(d.x, d.labels, d.num_classes, cfg)); }};
    }
    if (id == "bagging") {
        return {id, [cfg = params.bagging](const TrainingData& d) { return make_learner(train_bagging(d.x, d.labels, d.num_classes, cfg)); }};
    }
    const BoostConfig* boost = id == "gbm" ? &params.gbm : id == "light" ? &params.light : id == "xgb" ? &params.xgb
                             : id == "cat" ? &params.cat : nullptr;
    if (boost) {
        return {id, [cfg = *boost](const TrainingData& d) {
                    return make_learner(train_boosted(d.x, d.labels, d.num_classes, d.categorical, cfg));
                }};
    }
    if (id == "lstm" || id == "gru") {
        return {id, [cfg = id == "lstm" ? params.lstm : params.gru](const TrainingData& d) {
                    return make_learner(train_recurrent(d.x_std, d.labels, d.num_classes, cfg).first);
                }};
    }
    throw ConfigError("unknown base model '" + id + "'");
}

// ---------------------------------------------------------------------------
// Registry and stacking

struct RegistryEntry {
    std::string id;
    std::shared_ptr<const BaseLearner> model;  // null until trained
};

/// Ordered base models; the meta-feature layout follows this order.
class BaseModelRegistry {
public:
    BaseModelRegistry() = default;
    explicit BaseModelRegistry(std::size_t num_classes) : classes_(num_classes) {}

    void add(std::string id, std::shared_ptr<const BaseLearner> model) {
        for (const auto& e : entries_) {
            if (e.id == id) throw ConfigError("base model '" + id + "' registered twice");
        }
        if (model && model->num_classes() != classes_) {
            throw SchemaError("base model '" + id + "' has " + std::to_string(model->num_classes()) + " classes, registry has " +
                              std::to_string(classes_));
        }
        entries_.push_back({std::move(id), std::move(model)});
    }

    const std::vector<RegistryEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    std::size_t num_classes() const { return classes_; }
    std::size_t width() const { return entries_.size() * classes_; }

    std::vector<std::string> ids() const {
        std::vector<std::string> out;
        for (const auto& e : entries_) out.push_back(e.id);
        return out;
    }

    const BaseLearner& member(std::size_t k) const {
        if (!entries_[k].model) throw UserError("base model '" + entries_[k].id + "' is not trained");
        return *entries_[k].model;
    }

private:
    std::size_t classes_ = 0;
    std::vector<RegistryEntry> entries_;
};

inline BaseModelRegistry train_registry(const std::vector<MemberSpec>& members, const TrainingData& data) {
    BaseModelRegistry reg(data.num_classes);
    for (const auto& m : members) reg.add(m.id, m.train(data));
    return reg;
}

/// Row i is the concatenation of every member's class distribution for record i.
inline Matrix stack_matrix(const BaseModelRegistry& reg, const Matrix& x, const Matrix& x_std) {
    const auto C = static_cast<Eigen::Index>(reg.num_classes());
    Matrix out(x.rows(), static_cast<Eigen::Index>(reg.width()));
    for (std::size_t k = 0; k < reg.size(); ++k) {
        out.middleCols(static_cast<Eigen::Index>(k) * C, C) = reg.member(k).predict_proba(x, x_std);
    }
    return out;
}

inline std::vector<double> stack_predictions(const BaseModelRegistry& reg, std::span<const double> x,
                                             std::span<const double> x_std) {
    const Matrix row = Eigen::Map<const Matrix>(x.data(), 1, static_cast<Eigen::Index>(x.size()));
    const Matrix row_std = Eigen::Map<const Matrix>(x_std.data(), 1, static_cast<Eigen::Index>(x_std.size()));
    const Matrix out = stack_matrix(reg, row, row_std);
    return {out.data(), out.data() + out.size()};
}

inline std::string meta_feature_name(const std::string& model, const std::string& cls) {
    return "P(model=" + model + ", class=" + cls + ")";
}

inline std::vector<std::string> meta_feature_names(const std::vector<std::string>& ids, const ClassSet& classes) {
    std::vector<std::string> out;
    for (const auto& id : ids) {
        for (const auto& c : classes.names) out.push_back(meta_feature_name(id, c));
    }
    return out;
}

/// Stratified fold labels: each class is shuffled, then dealt round-robin.
inline std::vector<int> assign_folds(const std::vector<int>& labels, std::size_t num_classes, int folds, std::uint64_t seed) {
    std::vector<std::vector<std::size_t>> by_class(num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    std::vector<int> fold_of(labels.size(), 0);
    Rng rng(derive_seed(seed, "stacking-folds"));
    std::size_t next = 0;
    for (auto& rows : by_class) {
        rng.shuffle(rows);
        for (auto i : rows) fold_of[i] = static_cast<int>(next++ % static_cast<std::size_t>(folds));
    }
    return fold_of;
}

struct MetaTrainingSet {
    Matrix features;
    std::vector<int> labels;
    int folds = 0;  // 0 for in-sample stacking
    std::vector<int> fold_of;
    std::vector<std::vector<std::size_t>> fold_train_rows;  // rows the fold's members were trained on
    std::vector<std::string> warnings;
};

/// Out-of-fold meta-features: record i is scored only by members trained on
/// folds other than fold_of[i]. With in_sample set, members train on all
/// rows and score their own training data.
inline MetaTrainingSet build_meta_training_set(const std::vector<MemberSpec>& members, const TrainingData& data,
                                               int folds, std::uint64_t seed, bool in_sample = false) {
    if (members.empty()) throw ConfigError("no base models enabled");
    MetaTrainingSet out;
    out.labels = data.labels;
    const auto n = data.n();
    if (in_sample) {
        const auto reg = train_registry(members, data);
        out.features = stack_matrix(reg, data.x, data.x_std);
        out.fold_of.assign(n, 0);
        out.fold_train_rows.push_back(iota_indices(n));
        return out;
    }
    if (folds < 2) throw ConfigError("folds must be >= 2");
    if (n < static_cast<std::size_t>(folds)) throw UserError("fewer training records than folds");
    out.folds = folds;
    out.fold_of = assign_folds(data.labels, data.num_classes, folds, seed);
    const auto C = static_cast<Eigen::Index>(data.num_classes);
    out.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(members.size()) * C);
    std::vector<std::size_t> present(data.num_classes, 0);
    for (auto y : data.labels) ++present[static_cast<std::size_t>(y)];
    for (int f = 0; f < folds; ++f) {
        std::vector<std::size_t> train_rows, held_rows;
        for (std::size_t i = 0; i < n; ++i) (out.fold_of[i] == f ? held_rows : train_rows).push_back(i);
        std::vector<std::size_t> seen(data.num_classes, 0);
        for (auto i : train_rows) ++seen[static_cast<std::size_t>(data.labels[i])];
        for (std::size_t c = 0; c < data.num_classes; ++c) {
            if (present[c] > 0 && seen[c] == 0) {
                out.warnings.push_back("fold " + std::to_string(f + 1) + ": class " + std::to_string(c) +
                                       " absent from the training folds");
            }
        }
        const auto part = data.subset(train_rows);
        const auto held = data.subset(held_rows);
        const auto reg = train_registry(members, part);
        const Matrix block = stack_matrix(reg, held.x, held.x_std);
        for (std::size_t r = 0; r < held_rows.size(); ++r) {
            out.features.row(static_cast<Eigen::Index>(held_rows[r])) = block.row(static_cast<Eigen::Index>(r));
        }
        out.fold_train_rows.push_back(std::move(train_rows));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Meta-model: one ReLU hidden layer, softmax output

struct MetaConfig {
    int hidden = 64;
    int epochs = 50;
    int batch_size = 256;
    double learning_rate = 1e-3;
    AdamConfig adam;
    std::uint64_t seed = 0;
};

inline void validate(const MetaConfig& c) {
    if (c.hidden < 1) throw ConfigError("meta hidden width must be >= 1");
    if (c.epochs < 0) throw ConfigError("meta epochs must be >= 0");
    if (c.batch_size < 1) throw ConfigError("meta batch_size must be >= 1");
    if (!(c.learning_rate >= 0.0)) throw ConfigError("meta learning_rate must be >= 0");
    validate(c.adam);
}

class MetaModel {
public:
    MetaModel() = default;
    MetaModel(MetaConfig cfg, std::size_t inputs, std::size_t num_classes)
        : config_(cfg), d_(static_cast<Eigen::Index>(inputs)), h_(cfg.hidden), c_(static_cast<Eigen::Index>(num_classes)) {
        params_ = Vector::Zero(d_ * h_ + h_ + c_ * h_ + c_);
    }

    const MetaConfig& config() const { return config_; }
    std::size_t num_inputs() const { return static_cast<std::size_t>(d_); }
    std::size_t num_classes() const { return static_cast<std::size_t>(c_); }
    Vector& params() { return params_; }
    const Vector& params() const { return params_; }

    Eigen::Map<ColMatrix> W1() { return {params_.data(), h_, d_}; }
    Eigen::Map<Vector> b1() { return {params_.data() + h_ * d_, h_}; }
    Eigen::Map<ColMatrix> W2() { return {params_.data() + h_ * d_ + h_, c_, h_}; }
    Eigen::Map<Vector> b2() { return {params_.data() + h_ * d_ + h_ + c_ * h_, c_}; }
    Eigen::Map<const ColMatrix> W1() const { return {params_.data(), h_, d_}; }
    Eigen::Map<const Vector> b1() const { return {params_.data() + h_ * d_, h_}; }
    Eigen::Map<const ColMatrix> W2() const { return {params_.data() + h_ * d_ + h_, c_, h_}; }
    Eigen::Map<const Vector> b2() const { return {params_.data() + h_ * d_ + h_ + c_ * h_, c_}; }

    /// Per-epoch mean training loss; not persisted.
    const std::vector<double>& epoch_loss() const { return epoch_loss_; }

    Matrix predict_proba(const Matrix& x) const {
        detail::check_row(static_cast<std::size_t>(x.cols()), num_inputs());
        ColMatrix hidden, probs;
        forward(x.transpose(), hidden, probs);
        return probs.transpose();
    }

    ClassDistribution predict_proba(std::span<const double> x) const {
        detail::check_row(x.size(), num_inputs());
        ColMatrix hidden, probs;
        forward(Eigen::Map<const Vector>(x.data(), d_), hidden, probs);
        return {probs.data(), probs.data() + probs.size()};
    }

    void write(std::ostream& os) const {
        os << "ensembleguard-meta v1\n";
        os << "dims inputs=" << d_ << " hidden=" << h_ << " classes=" << c_ << "\n";
        os << "params epochs=" << config_.epochs << " batch_size=" << config_.batch_size
           << " learning_rate=" << text::fmt(config_.learning_rate) << " beta1=" << text::fmt(config_.adam.beta1)
           << " beta2=" << text::fmt(config_.adam.beta2) << " epsilon=" << text::fmt(config_.adam.epsilon)
           << " seed=" << config_.seed << "\n";
        os << "weights " << params_.size() << "\n";
        for (Eigen::Index k = 0; k < params_.size(); ++k) os << (k ? " " : "") << text::fmt(params_[k]);
        os << "\n";
    }

    static MetaModel read(std::istream& is) {
        if (detail::expect_line(is, "header") != "ensembleguard-meta v1") throw ParseError("not a meta-model file");
        const auto dims = detail::parse_params(detail::expect_key(is, "dims"));
        const auto q = detail::parse_params(detail::expect_key(is, "params"));
        MetaConfig cfg;
        cfg.hidden = static_cast<int>(text::require_int(detail::param(dims, "hidden"), "hidden"));
        cfg.epochs = static_cast<int>(text::require_int(detail::param(q, "epochs"), "epochs"));
        cfg.batch_size = static_cast<int>(text::require_int(detail::param(q, "batch_size"), "batch_size"));
        cfg.learning_rate = text::require_double(detail::param(q, "learning_rate"), "learning_rate");
        cfg.adam.beta1 = text::require_double(detail::param(q, "beta1"), "beta1");
        cfg.adam.beta2 = text::require_double(detail::param(q, "beta2"), "beta2");
        cfg.adam.epsilon = text::require_double(detail::param(q, "epsilon"), "epsilon");
        cfg.seed = text::require_uint(detail::param(q, "seed"), "seed");
        validate(cfg);
        MetaModel m(cfg, static_cast<std::size_t>(text::require_int(detail::param(dims, "inputs"), "inputs")),
                    static_cast<std::size_t>(text::require_int(detail::param(dims, "classes"), "classes")));
        const auto count = text::require_int(detail::expect_key(is, "weights"), "weights");
        const auto values = text::tokens(detail::expect_line(is, "weights"), ' ');
        if (count != m.params_.size() || static_cast<long long>(values.size()) != count) {
            throw ParseError("meta-model: weight count mismatch");
        }
        for (Eigen::Index k = 0; k < count; ++k) m.params_[k] = text::require_double(values[static_cast<std::size_t>(k)], "weight");
        return m;
    }

    // Columns are samples.
    void forward(const ColMatrix& xt, ColMatrix& hidden, ColMatrix& probs) const {
        hidden = W1() * xt;
        hidden.colwise() += b1();
        hidden = hidden.cwiseMax(0.0);
        probs = W2() * hidden;
        probs.colwise() += b2();
        for (Eigen::Index j = 0; j < probs.cols(); ++j) softmax_inplace(probs.col(j).data(), static_cast<std::size_t>(c_));
    }

private:
    friend MetaModel train_meta(const Matrix&, const std::vector<int>&, std::size_t, const MetaConfig&);

    MetaConfig config_;
    Eigen::Index d_ = 0;
    Eigen::Index h_ = 0;
    Eigen::Index c_ = 0;
    Vector params_;
    std::vector<double> epoch_loss_;
};

inline MetaModel init_meta(const MetaConfig& cfg, std::size_t inputs, std::size_t num_classes) {
    validate(cfg);
    if (inputs < 1) throw ConfigError("meta-model needs at least one input");
    if (num_classes < 2) throw ConfigError("meta-model needs at least two classes");
    MetaModel m(cfg, inputs, num_classes);
    Rng rng(derive_seed(cfg.seed, "meta-init"));
    const double s1 = 1.0 / std::sqrt(static_cast<double>(inputs));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
    for (auto& v : m.W1().reshaped()) v = rng.uniform(-s1, s1);
    for (auto& v : m.W2().reshaped()) v = rng.uniform(-s2, s2);
    return m;
}

namespace detail {

inline double meta_batch(const MetaModel& m, const ColMatrix& xt, const std::vector<int>& y, Vector* grad) {
    ColMatrix hidden, probs;
    m.forward(xt, hidden, probs);
    const auto B = xt.cols();
    double loss = 0.0;
    for (Eigen::Index j = 0; j < B; ++j) {
        const auto yj = static_cast<Eigen::Index>(y[static_cast<std::size_t>(j)]);
        loss -= std::log(std::max(probs(yj, j), 1e-300));
        probs(yj, j) -= 1.0;
    }
    if (grad) {
        probs /= static_cast<double>(B);
        MetaModel g = m;
        g.W2() = probs * hidden.transpose();
        g.b2() = probs.rowwise().sum();
        ColMatrix dh = m.W2().transpose() * probs;
        dh = dh.cwiseProduct((hidden.array() > 0.0).cast<double>().matrix());
        g.W1() = dh * xt.transpose();
        g.b1() = dh.rowwise().sum();
        *grad = std::move(g.params());
    }
    return loss / static_cast<double>(B);
}

}  // namespace detail

/// Mean cross-entropy of the meta-model on (x, labels).
inline double meta_loss(const MetaModel& m, const Matrix& x, const std::vector<int>& labels) {
    return detail::meta_batch(m, x.transpose(), labels, nullptr);
}

/// Minibatch Adam on cross-entropy, starting from init_meta(cfg).
inline MetaModel train_meta(const Matrix& features, const std::vector<int>& labels, std::size_t num_classes,
                            const MetaConfig& cfg) {
    const auto n = static_cast<std::size_t>(features.rows());
    if (n == 0) throw UserError("train_meta needs at least one record");
    auto m = init_meta(cfg, static_cast<std::size_t>(features.cols()), num_classes);
    Adam adam(m.params().size(), cfg.learning_rate, cfg.adam);
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    Vector grad;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto order = iota_indices(n);
        Rng rng(derive_seed(cfg.seed, "meta-epoch", static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order);
        double total = 0.0;
        for (std::size_t start = 0, batch = 0; start < n; start += bs, ++batch) {
            const auto count = std::min(bs, n - start);
            ColMatrix xt(features.cols(), static_cast<Eigen::Index>(count));
            std::vector<int> y(count);
            for (std::size_t k = 0; k < count; ++k) {
                xt.col(static_cast<Eigen::Index>(k)) = features.row(static_cast<Eigen::Index>(order[start + k])).transpose();
                y[k] = labels[order[start + k]];
            }
            const double loss = detail::meta_batch(m, xt, y, &grad);
            if (!std::isfinite(loss) || !grad.allFinite()) {
                throw TrainingError("meta-model: non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                                    std::to_string(batch + 1));
            }
            total += loss * static_cast<double>(count);
            adam.step(m.params(), grad);
        }
        m.epoch_loss_.push_back(total / static_cast<double>(n));
    }
    return m;
}

inline std::vector<int> predict_labels(const Matrix& probs) {
    std::vector<int> out(static_cast<std::size_t>(probs.rows()));
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        out[static_cast<std::size_t>(i)] = static_cast<int>(argmax(probs.row(i).data(), static_cast<std::size_t>(probs.cols())));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Distillation

struct DistilledTree {
    CartTree tree;
    int max_depth = 6;       // <= 0: unlimited
    double fidelity = 0.0;   // agreement with the meta-model on the held-out slice
    std::size_t fit_rows = 0;
    std::size_t holdout_rows = 0;

    std::vector<int> predict(const Matrix& features) const { return predict_labels(tree.predict_proba(features)); }

    void write(std::ostream& os) const {
        os << "ensembleguard-distilled v1\n";
        os << "params max_depth=" << max_depth << " fidelity=" << text::fmt(fidelity) << " fit_rows=" << fit_rows
           << " holdout_rows=" << holdout_rows << "\n";
        tree.write(os);
    }

    static DistilledTree read(std::istream& is) {
        if (detail::expect_line(is, "header") != "ensembleguard-distilled v1") throw ParseError("not a distilled tree file");
        const auto q = detail::parse_params(detail::expect_key(is, "params"));
        DistilledTree d;
        d.max_depth = static_cast<int>(text::require_int(detail::param(q, "max_depth"), "max_depth"));
        d.fidelity = text::require_double(detail::param(q, "fidelity"), "fidelity");
        d.fit_rows = static_cast<std::size_t>(text::require_int(detail::param(q, "fit_rows"), "fit_rows"));
        d.holdout_rows = static_cast<std::size_t>(text::require_int(detail::param(q, "holdout_rows"), "holdout_rows"));
        d.tree = CartTree::read(is);
        return d;
    }
};

/// Fraction of rows where the tree's argmax equals the meta-model's argmax.
inline double agreement(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.empty()) throw UserError("fidelity: empty feature set");
    std::size_t same = 0;
    for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i] ? 1 : 0;
    return static_cast<double>(same) / static_cast<double>(a.size());
}

/// CART fitted to the meta-model's argmax labels on a seeded 80% slice of
/// the features; fidelity is measured on the remaining 20%.
inline DistilledTree distill_to_tree(const MetaModel& meta, const Matrix& features, int max_depth, std::uint64_t seed,
                                     double fit_fraction = 0.8) {
    const auto n = static_cast<std::size_t>(features.rows());
    if (n == 0) throw UserError("distill_to_tree needs at least one record");
    const auto teacher = predict_labels(meta.predict_proba(features));
    auto order = iota_indices(n);
    Rng rng(derive_seed(seed, "distill-slice"));
    rng.shuffle(order);
    auto n_fit = static_cast<std::size_t>(std::floor(fit_fraction * static_cast<double>(n)));
    n_fit = std::clamp<std::size_t>(n_fit, 1, n);
    std::vector<std::size_t> fit(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_fit));
    std::vector<std::size_t> hold(order.begin() + static_cast<std::ptrdiff_t>(n_fit), order.end());
    std::sort(fit.begin(), fit.end());
    std::sort(hold.begin(), hold.end());
    auto rows_of = [&](const std::vector<std::size_t>& rows, Matrix& x, std::vector<int>& y) {
        x.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
        y.clear();
        for (std::size_t r = 0; r < rows.size(); ++r) {
            x.row(static_cast<Eigen::Index>(r)) = features.row(static_cast<Eigen::Index>(rows[r]));
            y.push_back(teacher[rows[r]]);
        }
    };
    Matrix xf, xh;
    std::vector<int> yf, yh;
    rows_of(fit, xf, yf);
    rows_of(hold, xh, yh);
    DistilledTree d;
    d.max_depth = max_depth;
    d.tree = train_cart(xf, yf, meta.num_classes(), CartConfig{max_depth, 1});
    d.fit_rows = fit.size();
    d.holdout_rows = hold.size();
    d.fidelity = hold.empty() ? agreement(d.predict(xf), yf) : agreement(d.predict(xh), yh);
    return d;
}

// ---------------------------------------------------------------------------
// Full pipeline

struct Pipeline {
    Encoders encoders;
    Standardizer standardizer;
    BaseModelRegistry registry;
    MetaModel meta;
    DistilledTree distilled;
};

struct Prediction {
    std::size_t label = 0;
    ClassDistribution distribution;
    std::vector<double> meta_features;
};

struct BatchPrediction {
    std::vector<Matrix> member_proba;  // registry order
    Matrix meta_features;
    Matrix meta_proba;
    std::vector<int> meta_pred;
    std::vector<int> tree_pred;
};

inline BatchPrediction predict_batch(const Pipeline& pl, const Matrix& encoded) {
    BatchPrediction out;
    Matrix standardized;
    try {
        standardized = pl.standardizer.transform(encoded);
    } catch (const std::exception& e) {
        throw SchemaError(std::string("standardization: ") + e.what());
    }
    const auto C = static_cast<Eigen::Index>(pl.registry.num_classes());
    try {
        out.meta_features = stack_matrix(pl.registry, encoded, standardized);
    } catch (const std::exception& e) {
        throw SchemaError(std::string("base models: ") + e.what());
    }
    for (std::size_t k = 0; k < pl.registry.size(); ++k) {
        out.member_proba.push_back(out.meta_features.middleCols(static_cast<Eigen::Index>(k) * C, C));
    }
    try {
        out.meta_proba = pl.meta.predict_proba(out.meta_features);
    } catch (const std::exception& e) {
        throw SchemaError(std::string("meta-model: ") + e.what());
    }
    out.meta_pred = predict_labels(out.meta_proba);
    out.tree_pred = pl.distilled.predict(out.meta_features);
    return out;
}

/// Encoding, standardization (recurrent branch), base models, stacking and
/// the meta-model for one raw record.
inline Prediction predict_full(const Pipeline& pl, const RawRecord& record) {
    Dataset ds;
    ds.schema = pl.encoders.schema;
    ds.classes = pl.encoders.classes;
    ds.records.push_back(record);
    ds.records.back().label.clear();
    EncodedDataset enc;
    try {
        enc = apply_encoding(pl.encoders, ds);
    } catch (const std::exception& e) {
        throw SchemaError(std::string("encoding: ") + e.what());
    }
    const auto b = predict_batch(pl, enc.matrix);
    Prediction p;
    p.distribution.assign(b.meta_proba.data(), b.meta_proba.data() + b.meta_proba.cols());
    p.label = argmax(p.distribution);
    p.meta_features.assign(b.meta_features.data(), b.meta_features.data() + b.meta_features.cols());
    return p;
}

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw UserError("cannot write " + tmp);
        os << content;
        if (!os) throw UserError("write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

template <typename T>
std::string to_text(const T& obj) {
    std::ostringstream os;
    obj.write(os);
    return os.str();
}

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw UserError("cannot open " + path.string());
    return is;
}

}  // namespace detail

/// Writes the bundle under dir; returns the written paths relative to dir.
inline std::vector<std::string> save_pipeline(const Pipeline& pl, const std::filesystem::path& dir) {
    std::vector<std::string> files;
    auto put = [&](const std::string& rel, const std::string& content) {
        detail::write_text_file(dir / rel, content);
        files.push_back(rel);
    };
    std::ostringstream enc, sd;
    write_encoders(enc, pl.encoders);
    write_standardizer(sd, pl.standardizer);
    put("encoders.txt", enc.str());
    put("standardizer.txt", sd.str());
    for (std::size_t k = 0; k < pl.registry.size(); ++k) {
        std::ostringstream os;
        pl.registry.member(k).write(os);
        put("models/" + pl.registry.entries()[k].id + ".model", os.str());
    }
    put("meta.model", detail::to_text(pl.meta));
    put("distilled.model", detail::to_text(pl.distilled));
    std::ostringstream man;
    man << "ensembleguard-pipeline v1\n";
    man << "classes " << pl.registry.num_classes() << "\n";
    man << "members " << text::join(pl.registry.ids(), " ") << "\n";
    for (const auto& f : files) man << "file " << f << "\n";
    put("pipeline.txt", man.str());
    return files;
}

inline Pipeline load_pipeline(const std::filesystem::path& dir) {
    auto is = detail::open_input(dir / "pipeline.txt");
    if (detail::expect_line(is, "header") != "ensembleguard-pipeline v1") throw ParseError("not a pipeline bundle: " + dir.string());
    Pipeline pl;
    const auto classes = static_cast<std::size_t>(text::require_int(detail::expect_key(is, "classes"), "classes"));
    const auto ids = text::tokens(detail::expect_key(is, "members"), ' ');
    {
        auto e = detail::open_input(dir / "encoders.txt");
        pl.encoders = read_encoders(e);
        auto s = detail::open_input(dir / "standardizer.txt");
        pl.standardizer = read_standardizer(s);
    }
    pl.registry = BaseModelRegistry(classes);
    for (const auto& id : ids) {
        auto m = detail::open_input(dir / "models" / (id + ".model"));
        pl.registry.add(id, read_learner(m));
    }
    auto meta = detail::open_input(dir / "meta.model");
    pl.meta = MetaModel::read(meta);
    auto tree = detail::open_input(dir / "distilled.model");
    pl.distilled = DistilledTree::read(tree);
    return pl;
}

}  // namespace ensembleguard
