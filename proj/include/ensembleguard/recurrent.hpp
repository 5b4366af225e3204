#pragma once

#include "ensembleguard/cart.hpp"
#include "ensembleguard/common.hpp"
#include "ensembleguard/optim.hpp"
#include "ensembleguard/preprocess.hpp"
#include "ensembleguard/rng.hpp"

#include <istream>
#include <ostream>
#include <span>

namespace ensembleguard {

enum class CellKind { Lstm, Gru };

inline std::string_view to_string(CellKind k) { return k == CellKind::Lstm ? "lstm" : "gru"; }

inline CellKind parse_cell_kind(std::string_view s) {
    if (s == "lstm") return CellKind::Lstm;
    if (s == "gru") return CellKind::Gru;
    throw ConfigError("unknown recurrent cell '" + std::string(s) + "'");
}

struct RecurrentConfig {
    CellKind kind = CellKind::Lstm;
    int hidden = 128;
    double dropout_rate = 0.2;
    int epochs = 30;
    int batch_size = 256;
    double learning_rate = 1e-3;
    AdamConfig adam;
    std::uint64_t seed = 0;
};

inline void validate(const RecurrentConfig& c) {
    if (c.hidden < 1) throw ConfigError("hidden must be >= 1");
    if (!(c.dropout_rate >= 0.0 && c.dropout_rate < 1.0)) throw ConfigError("dropout_rate must be in [0, 1)");
    if (c.epochs < 0) throw ConfigError("epochs must be >= 0");
    if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(c.learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
    validate(c.adam);
}

enum class Mode { Train, Eval };

using ColMatrix = Eigen::MatrixXd;

// Parameter layout inside one flat vector (G = 4 gates for LSTM in order
// i, f, g, o; G = 3 for GRU in order z, r, n):
//   W  (G*H x p)   input weights
//   U  (G*H x H)   recurrent weights
//   b  (G*H)       gate biases
//   V  (C x H)     output projection
//   c  (C)         output bias
class RecurrentModel {
public:
    RecurrentModel() = default;
    RecurrentModel(RecurrentConfig cfg, std::size_t p, std::size_t num_classes)
        : config_(cfg), p_(static_cast<Eigen::Index>(p)), h_(cfg.hidden), c_(static_cast<Eigen::Index>(num_classes)) {
        params_ = Vector::Zero(param_count());
    }

    const RecurrentConfig& config() const { return config_; }
    CellKind kind() const { return config_.kind; }
    std::size_t num_features() const { return static_cast<std::size_t>(p_); }
    std::size_t hidden() const { return static_cast<std::size_t>(h_); }
    std::size_t num_classes() const { return static_cast<std::size_t>(c_); }
    Eigen::Index gates() const { return config_.kind == CellKind::Lstm ? 4 : 3; }

    Eigen::Index param_count() const { return gates() * h_ * (p_ + h_ + 1) + c_ * (h_ + 1); }

    Vector& params() { return params_; }
    const Vector& params() const { return params_; }

    Eigen::Map<ColMatrix> W() { return {params_.data() + off_w(), gates() * h_, p_}; }
    Eigen::Map<ColMatrix> U() { return {params_.data() + off_u(), gates() * h_, h_}; }
    Eigen::Map<Vector> b() { return {params_.data() + off_b(), gates() * h_}; }
    Eigen::Map<ColMatrix> V() { return {params_.data() + off_v(), c_, h_}; }
    Eigen::Map<Vector> c() { return {params_.data() + off_c(), c_}; }
    Eigen::Map<const ColMatrix> W() const { return {params_.data() + off_w(), gates() * h_, p_}; }
    Eigen::Map<const ColMatrix> U() const { return {params_.data() + off_u(), gates() * h_, h_}; }
    Eigen::Map<const Vector> b() const { return {params_.data() + off_b(), gates() * h_}; }
    Eigen::Map<const ColMatrix> V() const { return {params_.data() + off_v(), c_, h_}; }
    Eigen::Map<const Vector> c() const { return {params_.data() + off_c(), c_}; }

    ClassDistribution predict_proba(std::span<const double> x) const;
    Matrix predict_proba(const Matrix& x) const;

    void write(std::ostream& os) const;
    static RecurrentModel read(std::istream& is);

private:
    Eigen::Index off_w() const { return 0; }
    Eigen::Index off_u() const { return off_w() + gates() * h_ * p_; }
    Eigen::Index off_b() const { return off_u() + gates() * h_ * h_; }
    Eigen::Index off_v() const { return off_b() + gates() * h_; }
    Eigen::Index off_c() const { return off_v() + c_ * h_; }

    RecurrentConfig config_;
    Eigen::Index p_ = 0;
    Eigen::Index h_ = 0;
    Eigen::Index c_ = 0;
    Vector params_;
};

inline RecurrentModel init_recurrent(const RecurrentConfig& cfg, std::size_t p, std::size_t num_classes) {
    validate(cfg);
    if (p < 1) throw ConfigError("recurrent model needs p >= 1");
    if (num_classes < 2) throw ConfigError("recurrent model needs at least two classes");
    RecurrentModel m(cfg, p, num_classes);
    Rng rng(derive_seed(cfg.seed, "recurrent-init"));
    const double sw = 1.0 / std::sqrt(static_cast<double>(p));
    const double sh = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
    for (auto& v : m.W().reshaped()) v = rng.uniform(-sw, sw);
    for (auto& v : m.U().reshaped()) v = rng.uniform(-sh, sh);
    for (auto& v : m.V().reshaped()) v = rng.uniform(-sh, sh);
    if (cfg.kind == CellKind::Lstm) m.b().segment(cfg.hidden, cfg.hidden).setOnes();
    return m;
}

namespace detail {

inline double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

/// Activations of one batch; columns are samples.
struct RecurrentPass {
    ColMatrix h0, c0;    // initial state (empty when zero)
    ColMatrix gate;      // G*H x B post-activation gates
    ColMatrix un;        // GRU: U_n h0
    ColMatrix cell;      // LSTM cell state
    ColMatrix h;         // hidden output before dropout
    ColMatrix mask;      // dropout mask already divided by keep prob (empty when off)
    ColMatrix probs;     // C x B
};

inline bool zero_state(const RecurrentPass& s) { return s.h0.size() == 0; }

inline void forward_batch(const RecurrentModel& m, const ColMatrix& xt, RecurrentPass& s) {
    const auto H = static_cast<Eigen::Index>(m.hidden());
    const auto B = xt.cols();
    ColMatrix a = m.W() * xt;
    a.colwise() += m.b();
    if (m.kind() == CellKind::Lstm) {
        if (!zero_state(s)) a.noalias() += m.U() * s.h0;
        s.gate = a;
        auto act = [&](Eigen::Index k, bool tanh_gate) {
            auto blk = s.gate.middleRows(k * H, H);
            if (tanh_gate) {
                blk = blk.array().tanh();
            } else {
                blk = blk.unaryExpr(&sigmoid);
            }
        };
        act(0, false);
        act(1, false);
        act(2, true);
        act(3, false);
        s.cell = s.gate.middleRows(0, H).cwiseProduct(s.gate.middleRows(2 * H, H));
        if (!zero_state(s)) s.cell += s.gate.middleRows(H, H).cwiseProduct(s.c0);
        s.h = s.gate.middleRows(3 * H, H).cwiseProduct(s.cell.array().tanh().matrix());
    } else {
        if (!zero_state(s)) {
            a.topRows(2 * H).noalias() += m.U().topRows(2 * H) * s.h0;
            s.un = m.U().bottomRows(H) * s.h0;
        } else {
            s.un = ColMatrix::Zero(H, B);
        }
        s.gate = a;
        s.gate.topRows(2 * H) = s.gate.topRows(2 * H).unaryExpr(&sigmoid);
        s.gate.bottomRows(H) = (a.bottomRows(H) + s.gate.middleRows(H, H).cwiseProduct(s.un)).array().tanh();
        const auto z = s.gate.topRows(H);
        const auto n = s.gate.bottomRows(H);
        s.h = (1.0 - z.array()) * n.array();
        if (!zero_state(s)) s.h.array() += z.array() * s.h0.array();
    }
    ColMatrix logits = m.V() * (s.mask.size() ? ColMatrix(s.h.cwiseProduct(s.mask)) : s.h);
    logits.colwise() += m.c();
    s.probs = logits;
    for (Eigen::Index j = 0; j < B; ++j) softmax_inplace(s.probs.col(j).data(), static_cast<std::size_t>(s.probs.rows()));
}

/// Mean cross-entropy over the batch and its gradient with respect to every parameter.
inline double backward_batch(const RecurrentModel& m, const ColMatrix& xt, const std::vector<int>& y,
                             const RecurrentPass& s, Vector& grad) {
    const auto H = static_cast<Eigen::Index>(m.hidden());
    const auto B = xt.cols();
    const double inv_b = 1.0 / static_cast<double>(B);
    double loss = 0.0;
    ColMatrix dlogits = s.probs;
    for (Eigen::Index j = 0; j < B; ++j) {
        const auto yj = static_cast<Eigen::Index>(y[static_cast<std::size_t>(j)]);
        loss -= std::log(std::max(s.probs(yj, j), 1e-300));
        dlogits(yj, j) -= 1.0;
    }
    dlogits *= inv_b;

    RecurrentModel g(m.config(), m.num_features(), m.num_classes());
    const ColMatrix hd = s.mask.size() ? ColMatrix(s.h.cwiseProduct(s.mask)) : s.h;
    g.V() = dlogits * hd.transpose();
    g.c() = dlogits.rowwise().sum();
    ColMatrix dh = m.V().transpose() * dlogits;
    if (s.mask.size()) dh = dh.cwiseProduct(s.mask);

    ColMatrix da(m.gates() * H, B);
    if (m.kind() == CellKind::Lstm) {
        const auto i = s.gate.middleRows(0, H).array();
        const auto f = s.gate.middleRows(H, H).array();
        const auto gg = s.gate.middleRows(2 * H, H).array();
        const auto o = s.gate.middleRows(3 * H, H).array();
        const ColMatrix tc = s.cell.array().tanh().matrix();
        const ColMatrix dc = (dh.array() * o * (1.0 - tc.array().square())).matrix();
        da.middleRows(0, H) = (dc.array() * gg * i * (1.0 - i)).matrix();
        if (zero_state(s)) {
            da.middleRows(H, H).setZero();
        } else {
            da.middleRows(H, H) = (dc.array() * s.c0.array() * f * (1.0 - f)).matrix();
        }
        da.middleRows(2 * H, H) = (dc.array() * i * (1.0 - gg.square())).matrix();
        da.middleRows(3 * H, H) = (dh.array() * tc.array() * o * (1.0 - o)).matrix();
        if (!zero_state(s)) g.U() = da * s.h0.transpose();
    } else {
        const auto z = s.gate.topRows(H).array();
        const auto r = s.gate.middleRows(H, H).array();
        const auto n = s.gate.bottomRows(H).array();
        const ColMatrix dan = (dh.array() * (1.0 - z) * (1.0 - n.square())).matrix();
        const ColMatrix dz = zero_state(s) ? ColMatrix((-dh.array() * n).matrix())
                                           : ColMatrix((dh.array() * (s.h0.array() - n)).matrix());
        da.topRows(H) = (dz.array() * z * (1.0 - z)).matrix();
        da.middleRows(H, H) = (dan.array() * s.un.array() * r * (1.0 - r)).matrix();
        da.bottomRows(H) = dan;
        if (!zero_state(s)) {
            g.U().topRows(2 * H) = da.topRows(2 * H) * s.h0.transpose();
            g.U().bottomRows(H) = (dan.array() * r).matrix() * s.h0.transpose();
        }
    }
    g.W() = da * xt.transpose();
    g.b() = da.rowwise().sum();
    grad = std::move(g.params());
    return loss * inv_b;
}

inline ColMatrix to_columns(const Matrix& x) { return x.transpose(); }

}  // namespace detail

inline ClassDistribution RecurrentModel::predict_proba(std::span<const double> x) const {
    detail::check_row(x.size(), num_features());
    detail::RecurrentPass s;
    detail::forward_batch(*this, Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size())), s);
    return {s.probs.data(), s.probs.data() + s.probs.size()};
}

inline Matrix RecurrentModel::predict_proba(const Matrix& x) const {
    detail::check_row(static_cast<std::size_t>(x.cols()), num_features());
    detail::RecurrentPass s;
    detail::forward_batch(*this, detail::to_columns(x), s);
    return s.probs.transpose();
}

/// Hidden activation fed to the output head. In train mode an inverted
/// dropout mask is drawn from rng.
inline Vector hidden_activation(const RecurrentModel& m, std::span<const double> x, Mode mode, Rng& rng) {
    detail::check_row(x.size(), m.num_features());
    detail::RecurrentPass s;
    detail::forward_batch(m, Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size())), s);
    Vector h = s.h.col(0);
    const double keep = 1.0 - m.config().dropout_rate;
    if (mode == Mode::Train && m.config().dropout_rate > 0.0) {
        for (auto& v : h) v = rng.bernoulli(keep) ? v / keep : 0.0;
    }
    return h;
}

inline ClassDistribution forward(const RecurrentModel& m, std::span<const double> x, Mode mode, Rng& rng) {
    detail::check_row(x.size(), m.num_features());
    if (mode == Mode::Eval || m.config().dropout_rate == 0.0) return m.predict_proba(x);
    const Vector h = hidden_activation(m, x, mode, rng);
    Vector logits = m.V() * h + m.c();
    return softmax(ClassDistribution(logits.data(), logits.data() + logits.size()));
}

struct TrainTrace {
    std::vector<double> epoch_loss;
    double train_accuracy = 0.0;
};

inline std::pair<RecurrentModel, TrainTrace> train_recurrent(const Matrix& x, const std::vector<int>& labels,
                                                             std::size_t num_classes, const RecurrentConfig& cfg) {
    const auto n = static_cast<std::size_t>(x.rows());
    if (n == 0) throw UserError("train_recurrent needs at least one record");
    auto model = init_recurrent(cfg, static_cast<std::size_t>(x.cols()), num_classes);
    TrainTrace trace;
    Adam adam(model.param_count(), cfg.learning_rate, cfg.adam);
    const double keep = 1.0 - cfg.dropout_rate;
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    Vector grad;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto order = iota_indices(n);
        Rng shuffle_rng(derive_seed(cfg.seed, "recurrent-epoch", static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        Rng drop_rng(derive_seed(cfg.seed, "recurrent-dropout", static_cast<std::uint64_t>(epoch)));
        double total = 0.0;
        for (std::size_t start = 0, batch = 0; start < n; start += bs, ++batch) {
            const auto count = std::min(bs, n - start);
            ColMatrix xt(x.cols(), static_cast<Eigen::Index>(count));
            std::vector<int> y(count);
            for (std::size_t k = 0; k < count; ++k) {
                xt.col(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(order[start + k])).transpose();
                y[k] = labels[order[start + k]];
            }
            detail::RecurrentPass s;
            if (cfg.dropout_rate > 0.0) {
                s.mask.resize(cfg.hidden, static_cast<Eigen::Index>(count));
                for (auto& v : s.mask.reshaped()) v = drop_rng.bernoulli(keep) ? 1.0 / keep : 0.0;
            }
            detail::forward_batch(model, xt, s);
            const double loss = detail::backward_batch(model, xt, y, s, grad);
            if (!std::isfinite(loss) || !grad.allFinite()) {
                throw TrainingError("recurrent (" + std::string(to_string(cfg.kind)) + "): non-finite loss at epoch " +
                                    std::to_string(epoch + 1) + ", batch " + std::to_string(batch + 1));
            }
            total += loss * static_cast<double>(count);
            adam.step(model.params(), grad);
        }
        trace.epoch_loss.push_back(total / static_cast<double>(n));
    }
    const Matrix probs = model.predict_proba(x);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
        hits += argmax(probs.row(static_cast<Eigen::Index>(i)).data(), num_classes) == static_cast<std::size_t>(labels[i]);
    }
    trace.train_accuracy = static_cast<double>(hits) / static_cast<double>(n);
    return {std::move(model), std::move(trace)};
}

inline std::pair<RecurrentModel, TrainTrace> train_recurrent(const EncodedDataset& train, const RecurrentConfig& cfg) {
    return train_recurrent(train.matrix, train.labels, train.num_classes(), cfg);
}

/// Analytic vs. central-difference gradients over every parameter, dropout
/// off. Returns max |a - n| / max(|a|, |n|, 1e-6). A non-empty h0 (and c0
/// for LSTM) replaces the zero initial state so the recurrent weights take
/// part in the check.
inline double gradient_check(const RecurrentModel& model, const Matrix& batch, const std::vector<int>& labels,
                             const ColMatrix& h0 = {}, const ColMatrix& c0 = {}) {
    if (batch.rows() == 0 || batch.rows() > 4) throw UserError("gradient_check expects 1 to 4 samples");
    const ColMatrix xt = detail::to_columns(batch);
    auto run = [&](const RecurrentModel& m, Vector* grad) {
        detail::RecurrentPass s;
        s.h0 = h0;
        s.c0 = c0;
        if (s.h0.size() && m.kind() == CellKind::Lstm && s.c0.size() == 0) s.c0 = ColMatrix::Zero(h0.rows(), h0.cols());
        detail::forward_batch(m, xt, s);
        Vector g;
        const double loss = detail::backward_batch(m, xt, labels, s, g);
        if (grad) *grad = std::move(g);
        return loss;
    };
    Vector analytic;
    run(model, &analytic);
    RecurrentModel probe = model;
    const double step = 1e-5;
    double worst = 0.0;
    for (Eigen::Index k = 0; k < probe.param_count(); ++k) {
        const double orig = probe.params()[k];
        probe.params()[k] = orig + step;
        const double up = run(probe, nullptr);
        probe.params()[k] = orig - step;
        const double down = run(probe, nullptr);
        probe.params()[k] = orig;
        const double numeric = (up - down) / (2.0 * step);
        const double a = analytic[k];
        worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6}));
    }
    return worst;
}

/// Analytic gradient of the mean batch loss (dropout off, zero initial state).
inline Vector loss_gradient(const RecurrentModel& model, const Matrix& batch, const std::vector<int>& labels) {
    const ColMatrix xt = detail::to_columns(batch);
    detail::RecurrentPass s;
    detail::forward_batch(model, xt, s);
    Vector g;
    detail::backward_batch(model, xt, labels, s, g);
    return g;
}

inline void RecurrentModel::write(std::ostream& os) const {
    os << "ensembleguard-recurrent v1\n";
    os << "kind " << to_string(config_.kind) << "\n";
    os << "dims p=" << p_ << " hidden=" << h_ << " classes=" << c_ << "\n";
    os << "params dropout_rate=" << text::fmt(config_.dropout_rate) << " epochs=" << config_.epochs
       << " batch_size=" << config_.batch_size << " learning_rate=" << text::fmt(config_.learning_rate)
       << " beta1=" << text::fmt(config_.adam.beta1) << " beta2=" << text::fmt(config_.adam.beta2)
       << " epsilon=" << text::fmt(config_.adam.epsilon) << " seed=" << config_.seed << "\n";
    auto array = [&](std::string_view name, Eigen::Index off, Eigen::Index rows, Eigen::Index cols) {
        os << "array " << name << ' ' << rows << ' ' << cols << "\n";
        for (Eigen::Index k = 0; k < rows * cols; ++k) os << (k ? " " : "") << text::fmt(params_[off + k]);
        os << "\n";
    };
    array("W", off_w(), gates() * h_, p_);
    array("U", off_u(), gates() * h_, h_);
    array("b", off_b(), gates() * h_, 1);
    array("V", off_v(), c_, h_);
    array("c", off_c(), c_, 1);
}

inline RecurrentModel RecurrentModel::read(std::istream& is) {
    if (detail::expect_line(is, "header") != "ensembleguard-recurrent v1") throw ParseError("not a recurrent model file");
    RecurrentConfig cfg;
    cfg.kind = parse_cell_kind(detail::expect_key(is, "kind"));
    const auto dims = detail::parse_params(detail::expect_key(is, "dims"));
    const auto p = static_cast<std::size_t>(text::require_int(detail::param(dims, "p"), "p"));
    cfg.hidden = static_cast<int>(text::require_int(detail::param(dims, "hidden"), "hidden"));
    const auto classes = static_cast<std::size_t>(text::require_int(detail::param(dims, "classes"), "classes"));
    const auto q = detail::parse_params(detail::expect_key(is, "params"));
    cfg.dropout_rate = text::require_double(detail::param(q, "dropout_rate"), "dropout_rate");
    cfg.epochs = static_cast<int>(text::require_int(detail::param(q, "epochs"), "epochs"));
    cfg.batch_size = static_cast<int>(text::require_int(detail::param(q, "batch_size"), "batch_size"));
    cfg.learning_rate = text::require_double(detail::param(q, "learning_rate"), "learning_rate");
    cfg.adam.beta1 = text::require_double(detail::param(q, "beta1"), "beta1");
    cfg.adam.beta2 = text::require_double(detail::param(q, "beta2"), "beta2");
    cfg.adam.epsilon = text::require_double(detail::param(q, "epsilon"), "epsilon");
    cfg.seed = text::require_uint(detail::param(q, "seed"), "seed");
    validate(cfg);
    RecurrentModel m(cfg, p, classes);
    auto array = [&](std::string_view name, Eigen::Index off, Eigen::Index rows, Eigen::Index cols) {
        auto head = text::tokens(detail::expect_key(is, "array"), ' ');
        if (head.size() != 3 || head[0] != name || text::require_int(head[1], "rows") != rows ||
            text::require_int(head[2], "cols") != cols) {
            throw ParseError("recurrent model: bad array header for " + std::string(name));
        }
        auto values = text::tokens(detail::expect_line(is, name), ' ');
        if (static_cast<Eigen::Index>(values.size()) != rows * cols) throw ParseError("recurrent model: wrong size for " + std::string(name));
        for (Eigen::Index k = 0; k < rows * cols; ++k) m.params_[off + k] = text::require_double(values[static_cast<std::size_t>(k)], name);
    };
    array("W", m.off_w(), m.gates() * m.h_, m.p_);
    array("U", m.off_u(), m.gates() * m.h_, m.h_);
    array("b", m.off_b(), m.gates() * m.h_, 1);
    array("V", m.off_v(), m.c_, m.h_);
    array("c", m.off_c(), m.c_, 1);
    return m;
}

}  // namespace ensembleguard
