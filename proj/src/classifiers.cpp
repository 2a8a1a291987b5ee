#include "ftdc/classifiers.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>

namespace ftdc {

namespace {

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vec(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

struct ClassSplit {
    std::vector<int> pos;
    std::vector<int> neg;
};

ClassSplit split_classes(const Eigen::MatrixXd& x, const std::vector<int>& y) {
    if (static_cast<Eigen::Index>(y.size()) != x.rows())
        throw DataError("label count " + std::to_string(y.size()) + " does not match row count " +
                        std::to_string(x.rows()));
    if (!x.allFinite()) throw DataError("training data contains non-finite values");
    ClassSplit s;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] == 1) {
            s.pos.push_back(static_cast<int>(i));
        } else if (y[i] == -1) {
            s.neg.push_back(static_cast<int>(i));
        } else {
            throw DataError("binary labels must be +1 or -1");
        }
    }
    if (s.pos.empty() || s.neg.empty()) throw DataError("single-class training input");
    return s;
}

Eigen::VectorXd mean_of(const Eigen::MatrixXd& x, const std::vector<int>& rows) {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(x.cols());
    for (int r : rows) m += x.row(r).transpose();
    return m / static_cast<double>(rows.size());
}

Eigen::VectorXd var_of(const Eigen::MatrixXd& x, const std::vector<int>& rows, const Eigen::VectorXd& mean) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(x.cols());
    for (int r : rows) v += (x.row(r).transpose() - mean).array().square().matrix();
    return v / static_cast<double>(rows.size());
}

double gaussian_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::VectorXd& var) {
    const double log2pi = std::log(2.0 * std::numbers::pi);
    double s = 0.0;
    for (Eigen::Index f = 0; f < x.size(); ++f) {
        const double d = x[f] - mean[f];
        s += -0.5 * (log2pi + std::log(var[f])) - d * d / (2.0 * var[f]);
    }
    return s;
}

}  // namespace

std::string to_string(Method m) {
    switch (m) {
        case Method::SVM: return "svm";
        case Method::LDA: return "lda";
        case Method::NB: return "nb";
        case Method::Linear: return "linear";
    }
    return "?";
}

std::optional<Method> parse_method(const std::string& s) {
    std::string k = s;
    std::transform(k.begin(), k.end(), k.begin(), [](unsigned char c) { return std::tolower(c); });
    if (k == "svm") return Method::SVM;
    if (k == "lda") return Method::LDA;
    if (k == "nb" || k == "naive-bayes" || k == "naivebayes") return Method::NB;
    if (k == "linear") return Method::Linear;
    return std::nullopt;
}

BinaryScorer::BinaryScorer(Params params, std::string positive, std::string negative, double threshold)
    : params_(std::move(params)), positive_(std::move(positive)), negative_(std::move(negative)), threshold_(threshold) {}

Method BinaryScorer::method() const {
    return std::visit(
        [](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, SvmParams>) return Method::SVM;
            else if constexpr (std::is_same_v<T, LdaParams>) return Method::LDA;
            else if constexpr (std::is_same_v<T, NbParams>) return Method::NB;
            else return Method::Linear;
        },
        params_);
}

std::size_t BinaryScorer::width() const {
    return std::visit(
        [](const auto& p) -> std::size_t {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, NbParams>) return static_cast<std::size_t>(p.mean_pos.size());
            else return static_cast<std::size_t>(p.w.size());
        },
        params_);
}

double BinaryScorer::score(const Eigen::VectorXd& x) const {
    if (static_cast<std::size_t>(x.size()) != width())
        throw DataError("scorer: input width " + std::to_string(x.size()) + " does not match trained width " +
                        std::to_string(width()));
    return std::visit(
        [&](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, SvmParams> || std::is_same_v<T, LinearParams>) {
                return p.w.dot(x) + p.b;
            } else if constexpr (std::is_same_v<T, LdaParams>) {
                return p.w.dot(x - 0.5 * (p.mean_pos + p.mean_neg)) + std::log(p.prior_pos / (1.0 - p.prior_pos));
            } else {
                return gaussian_log_density(x, p.mean_pos, p.var_pos) + std::log(p.prior_pos) -
                       gaussian_log_density(x, p.mean_neg, p.var_neg) - std::log(1.0 - p.prior_pos);
            }
        },
        params_);
}

Eigen::VectorXd BinaryScorer::scores(const Eigen::MatrixXd& rows) const {
    Eigen::VectorXd out(rows.rows());
    for (Eigen::Index r = 0; r < rows.rows(); ++r) out[r] = score(rows.row(r).transpose());
    return out;
}

std::optional<Eigen::VectorXd> BinaryScorer::linear_weights() const {
    return std::visit(
        [](const auto& p) -> std::optional<Eigen::VectorXd> {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, NbParams>) return std::nullopt;
            else return p.w;
        },
        params_);
}

BinaryScorer BinaryScorer::with_labels(std::string positive, std::string negative) const {
    return BinaryScorer(params_, std::move(positive), std::move(negative), threshold_);
}

nlohmann::json BinaryScorer::to_json() const {
    nlohmann::json j;
    j["method"] = to_string(method());
    j["positive"] = positive_;
    j["negative"] = negative_;
    j["threshold"] = threshold_;
    auto& p = j["params"];
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, SvmParams>) {
                p["w"] = to_vec(v.w);
                p["b"] = v.b;
                p["C"] = v.C;
                p["tol"] = v.tol;
                p["alpha"] = to_vec(v.alpha);
                p["support"] = v.support;
                p["iterations"] = v.iterations;
                p["converged"] = v.converged;
            } else if constexpr (std::is_same_v<T, LdaParams>) {
                p["mean_pos"] = to_vec(v.mean_pos);
                p["mean_neg"] = to_vec(v.mean_neg);
                p["shrinkage"] = v.shrinkage;
                p["prior_pos"] = v.prior_pos;
                p["w"] = to_vec(v.w);
            } else if constexpr (std::is_same_v<T, NbParams>) {
                p["mean_pos"] = to_vec(v.mean_pos);
                p["var_pos"] = to_vec(v.var_pos);
                p["mean_neg"] = to_vec(v.mean_neg);
                p["var_neg"] = to_vec(v.var_neg);
                p["prior_pos"] = v.prior_pos;
                p["var_floor"] = v.var_floor;
            } else {
                p["w"] = to_vec(v.w);
                p["b"] = v.b;
            }
        },
        params_);
    return j;
}

BinaryScorer BinaryScorer::from_json(const nlohmann::json& j) {
    try {
        const auto method = parse_method(j.at("method").get<std::string>());
        if (!method) throw DataError("scorer json: unknown method");
        const auto& p = j.at("params");
        Params params;
        switch (*method) {
            case Method::SVM: {
                SvmParams s;
                s.w = from_vec(p.at("w"));
                s.b = p.at("b").get<double>();
                s.C = p.at("C").get<double>();
                s.tol = p.at("tol").get<double>();
                s.alpha = from_vec(p.at("alpha"));
                s.support = p.at("support").get<std::vector<int>>();
                s.iterations = p.at("iterations").get<long>();
                s.converged = p.value("converged", true);
                params = s;
                break;
            }
            case Method::LDA: {
                LdaParams l;
                l.mean_pos = from_vec(p.at("mean_pos"));
                l.mean_neg = from_vec(p.at("mean_neg"));
                l.shrinkage = p.at("shrinkage").get<double>();
                l.prior_pos = p.at("prior_pos").get<double>();
                l.w = from_vec(p.at("w"));
                params = l;
                break;
            }
            case Method::NB: {
                NbParams nb;
                nb.mean_pos = from_vec(p.at("mean_pos"));
                nb.var_pos = from_vec(p.at("var_pos"));
                nb.mean_neg = from_vec(p.at("mean_neg"));
                nb.var_neg = from_vec(p.at("var_neg"));
                nb.prior_pos = p.at("prior_pos").get<double>();
                nb.var_floor = p.at("var_floor").get<double>();
                params = nb;
                break;
            }
            case Method::Linear: {
                LinearParams l;
                l.w = from_vec(p.at("w"));
                l.b = p.at("b").get<double>();
                params = l;
                break;
            }
        }
        return BinaryScorer(std::move(params), j.at("positive").get<std::string>(), j.at("negative").get<std::string>(),
                            j.at("threshold").get<double>());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("scorer json: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// SVM: sequential minimal optimization with maximal-violating-pair selection
// (Keerthi et al. / LIBSVM WSS1). Minimizes f(a) = 1/2 a'Qa - e'a subject to
// 0 <= a_i <= C and y'a = 0, where Q_ij = y_i y_j <x_i, x_j>.

double svm_dual_objective(const Eigen::MatrixXd& x, const std::vector<int>& y, const Eigen::VectorXd& alpha) {
    Eigen::VectorXd ya(alpha.size());
    for (Eigen::Index i = 0; i < alpha.size(); ++i) ya[i] = alpha[i] * y[static_cast<std::size_t>(i)];
    const Eigen::VectorXd w = x.transpose() * ya;
    return alpha.sum() - 0.5 * w.squaredNorm();
}

BinaryScorer svm_fit(const Eigen::MatrixXd& x, const std::vector<int>& y, const SvmOptions& options) {
    split_classes(x, y);
    if (!(options.C > 0.0)) throw UsageError("svm: C must be positive");
    if (!(options.tol > 0.0)) throw UsageError("svm: tol must be positive");

    const Eigen::Index n = x.rows();
    const double C = options.C;
    const Eigen::MatrixXd kernel = x * x.transpose();
    auto yy = [&](Eigen::Index i) { return static_cast<double>(y[static_cast<std::size_t>(i)]); };
    auto q = [&](Eigen::Index i, Eigen::Index j) { return yy(i) * yy(j) * kernel(i, j); };

    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);
    const long max_iter = std::max<long>(1, options.max_passes) * std::max<long>(1, static_cast<long>(n));
    constexpr double kTau = 1e-12;

    auto is_upper = [&](Eigen::Index t) { return alpha[t] >= C; };
    auto is_lower = [&](Eigen::Index t) { return alpha[t] <= 0.0; };

    long iter = 0;
    bool converged = false;
    while (iter < max_iter) {
        Eigen::Index i = -1;
        Eigen::Index j = -1;
        double gmax = -std::numeric_limits<double>::infinity();
        double gmin = std::numeric_limits<double>::infinity();
        for (Eigen::Index t = 0; t < n; ++t) {
            const double v = -yy(t) * grad[t];
            const bool up = (yy(t) > 0) ? !is_upper(t) : !is_lower(t);
            const bool low = (yy(t) > 0) ? !is_lower(t) : !is_upper(t);
            if (up && v > gmax) {
                gmax = v;
                i = t;
            }
            if (low && v < gmin) {
                gmin = v;
                j = t;
            }
        }
        if (i < 0 || j < 0 || gmax - gmin < options.tol) {
            converged = true;
            break;
        }
        ++iter;

        const double old_ai = alpha[i];
        const double old_aj = alpha[j];
        if (yy(i) != yy(j)) {
            double quad = kernel(i, i) + kernel(j, j) + 2.0 * q(i, j);
            if (quad <= 0.0) quad = kTau;
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0.0) {
                if (alpha[j] < 0.0) {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else {
                if (alpha[i] < 0.0) {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
            }
            if (diff > 0.0) {
                if (alpha[i] > C) {
                    alpha[i] = C;
                    alpha[j] = C - diff;
                }
            } else {
                if (alpha[j] > C) {
                    alpha[j] = C;
                    alpha[i] = C + diff;
                }
            }
        } else {
            double quad = kernel(i, i) + kernel(j, j) - 2.0 * q(i, j);
            if (quad <= 0.0) quad = kTau;
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > C) {
                if (alpha[i] > C) {
                    alpha[i] = C;
                    alpha[j] = sum - C;
                }
            } else {
                if (alpha[j] < 0.0) {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
            }
            if (sum > C) {
                if (alpha[j] > C) {
                    alpha[j] = C;
                    alpha[i] = sum - C;
                }
            } else {
                if (alpha[i] < 0.0) {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
        }
        const double dai = alpha[i] - old_ai;
        const double daj = alpha[j] - old_aj;
        for (Eigen::Index t = 0; t < n; ++t) grad[t] += q(t, i) * dai + q(t, j) * daj;
    }

    // Bias: average over free vectors, else midpoint of the feasible interval.
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    int n_free = 0;
    for (Eigen::Index t = 0; t < n; ++t) {
        const double yg = yy(t) * grad[t];
        if (is_upper(t)) {
            if (yy(t) < 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (is_lower(t)) {
            if (yy(t) > 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    const double rho = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);

    SvmParams p;
    p.C = C;
    p.tol = options.tol;
    p.alpha = alpha;
    p.b = -rho;
    p.iterations = iter;
    p.converged = converged;
    Eigen::VectorXd ya(n);
    for (Eigen::Index t = 0; t < n; ++t) {
        ya[t] = alpha[t] * yy(t);
        if (alpha[t] > 0.0) p.support.push_back(static_cast<int>(t));
    }
    p.w = x.transpose() * ya;
    BinaryScorer scorer(std::move(p));
    if (!converged)
        throw SvmNotConverged("svm: no convergence after " + std::to_string(iter) + " iterations", scorer);
    return scorer;
}

// ---------------------------------------------------------------------------

BinaryScorer lda_fit(const Eigen::MatrixXd& x, const std::vector<int>& y, const LdaOptions& options) {
    if (x.cols() == 0) throw DataError("lda: no features");
    const auto split = split_classes(x, y);
    if (split.pos.size() < 2 || split.neg.size() < 2) throw DataError("lda: need at least two samples per class");
    const auto d = x.cols();
    LdaParams p;
    p.mean_pos = mean_of(x, split.pos);
    p.mean_neg = mean_of(x, split.neg);
    Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(d, d);
    for (int r : split.pos) {
        const Eigen::VectorXd c = x.row(r).transpose() - p.mean_pos;
        pooled.noalias() += c * c.transpose();
    }
    for (int r : split.neg) {
        const Eigen::VectorXd c = x.row(r).transpose() - p.mean_neg;
        pooled.noalias() += c * c.transpose();
    }
    pooled /= static_cast<double>(x.rows());
    p.shrinkage = options.relative_shrinkage * pooled.trace() / static_cast<double>(d);
    if (!(p.shrinkage > 0.0)) p.shrinkage = options.relative_shrinkage;
    pooled.diagonal().array() += p.shrinkage;
    Eigen::LLT<Eigen::MatrixXd> llt(pooled);
    if (llt.info() != Eigen::Success) throw NumericalError("lda: shrunk covariance is not positive definite");
    p.w = llt.solve(p.mean_pos - p.mean_neg);
    p.prior_pos = static_cast<double>(split.pos.size()) / static_cast<double>(x.rows());
    return BinaryScorer(std::move(p));
}

BinaryScorer nb_fit(const Eigen::MatrixXd& x, const std::vector<int>& y, const NbOptions& options) {
    if (x.cols() == 0) throw DataError("nb: no features");
    const auto split = split_classes(x, y);
    NbParams p;
    const Eigen::VectorXd overall_mean = x.colwise().mean().transpose();
    const Eigen::VectorXd overall_var =
        (x.rowwise() - overall_mean.transpose()).array().square().colwise().sum().transpose() /
        static_cast<double>(x.rows());
    p.var_floor = options.relative_floor * overall_var.maxCoeff();
    if (!(p.var_floor > 0.0)) p.var_floor = 1e-12;
    p.mean_pos = mean_of(x, split.pos);
    p.mean_neg = mean_of(x, split.neg);
    p.var_pos = var_of(x, split.pos, p.mean_pos).cwiseMax(p.var_floor);
    p.var_neg = var_of(x, split.neg, p.mean_neg).cwiseMax(p.var_floor);
    p.prior_pos = static_cast<double>(split.pos.size()) / static_cast<double>(x.rows());
    return BinaryScorer(std::move(p));
}

// ---------------------------------------------------------------------------

MulticlassGaussian MulticlassGaussian::fit(Kind kind, const Eigen::MatrixXd& x, const std::vector<int>& labels,
                                           int classes) {
    if (static_cast<Eigen::Index>(labels.size()) != x.rows()) throw DataError("multiclass: label/row count mismatch");
    if (x.cols() == 0) throw DataError("multiclass: no features");
    std::vector<std::vector<int>> members(static_cast<std::size_t>(classes));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= classes) throw DataError("multiclass: label out of range");
        members[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i));
    }
    MulticlassGaussian m;
    m.kind_ = kind;
    m.log_priors_.resize(classes);
    for (int c = 0; c < classes; ++c) {
        const auto& rows = members[static_cast<std::size_t>(c)];
        if (rows.empty()) throw DataError("multiclass: class " + std::to_string(c) + " has no samples");
        m.means_.push_back(mean_of(x, rows));
        m.log_priors_[c] = std::log(static_cast<double>(rows.size()) / static_cast<double>(x.rows()));
    }
    const auto d = x.cols();
    if (kind == Kind::NaiveBayes) {
        const Eigen::VectorXd overall_mean = x.colwise().mean().transpose();
        const Eigen::VectorXd overall_var =
            (x.rowwise() - overall_mean.transpose()).array().square().colwise().sum().transpose() /
            static_cast<double>(x.rows());
        double floor = 1e-9 * overall_var.maxCoeff();
        if (!(floor > 0.0)) floor = 1e-12;
        for (int c = 0; c < classes; ++c)
            m.variances_.push_back(var_of(x, members[static_cast<std::size_t>(c)], m.means_[static_cast<std::size_t>(c)])
                                       .cwiseMax(floor));
        return m;
    }
    Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(d, d);
    for (int c = 0; c < classes; ++c)
        for (int r : members[static_cast<std::size_t>(c)]) {
            const Eigen::VectorXd v = x.row(r).transpose() - m.means_[static_cast<std::size_t>(c)];
            pooled.noalias() += v * v.transpose();
        }
    pooled /= static_cast<double>(x.rows());
    double shrink = 1e-6 * pooled.trace() / static_cast<double>(d);
    if (!(shrink > 0.0)) shrink = 1e-6;
    pooled.diagonal().array() += shrink;
    Eigen::LLT<Eigen::MatrixXd> llt(pooled);
    if (llt.info() != Eigen::Success) throw NumericalError("multiclass lda: covariance not positive definite");
    m.offset_.resize(classes);
    for (int c = 0; c < classes; ++c) {
        const auto& mu = m.means_[static_cast<std::size_t>(c)];
        Eigen::VectorXd coef = llt.solve(mu);
        m.offset_[c] = -0.5 * mu.dot(coef) + m.log_priors_[c];
        m.coef_.push_back(std::move(coef));
    }
    return m;
}

Eigen::VectorXd MulticlassGaussian::scores(const Eigen::VectorXd& x) const {
    const auto classes = static_cast<Eigen::Index>(means_.size());
    if (classes == 0 || x.size() != means_.front().size()) throw DataError("multiclass: input width mismatch");
    Eigen::VectorXd s(classes);
    for (Eigen::Index c = 0; c < classes; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        s[c] = kind_ == Kind::NaiveBayes ? gaussian_log_density(x, means_[ci], variances_[ci]) + log_priors_[c]
                                         : coef_[ci].dot(x) + offset_[c];
    }
    return s;
}

nlohmann::json MulticlassGaussian::to_json() const {
    nlohmann::json j;
    j["kind"] = kind_ == Kind::NaiveBayes ? "nb" : "lda";
    j["log_priors"] = to_vec(log_priors_);
    for (const auto& m : means_) j["means"].push_back(to_vec(m));
    if (kind_ == Kind::NaiveBayes) {
        for (const auto& v : variances_) j["variances"].push_back(to_vec(v));
    } else {
        for (const auto& c : coef_) j["coef"].push_back(to_vec(c));
        j["offset"] = to_vec(offset_);
    }
    return j;
}

MulticlassGaussian MulticlassGaussian::from_json(const nlohmann::json& j) {
    MulticlassGaussian m;
    m.kind_ = j.at("kind").get<std::string>() == "nb" ? Kind::NaiveBayes : Kind::SharedCovariance;
    m.log_priors_ = from_vec(j.at("log_priors"));
    for (const auto& v : j.at("means")) m.means_.push_back(from_vec(v));
    if (m.kind_ == Kind::NaiveBayes) {
        for (const auto& v : j.at("variances")) m.variances_.push_back(from_vec(v));
    } else {
        for (const auto& v : j.at("coef")) m.coef_.push_back(from_vec(v));
        m.offset_ = from_vec(j.at("offset"));
    }
    return m;
}

}  // namespace ftdc
