#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "ftdc/errors.hpp"

namespace ftdc {

enum class Method { SVM, LDA, NB, Linear };

std::string to_string(Method m);
// "svm", "lda", "nb" (case-insensitive).
std::optional<Method> parse_method(const std::string& s);

// Linear soft-margin SVM trained in the dual. w = sum(alpha_i y_i x_i).
struct SvmParams {
    Eigen::VectorXd w;
    double b = 0.0;
    double C = 1.0;
    double tol = 1e-3;
    Eigen::VectorXd alpha;
    std::vector<int> support;
    long iterations = 0;
    bool converged = true;
};

// score(x) = w . (x - (mu+ + mu-)/2) + ln(pi+ / pi-), w = (Sigma_pooled + lambda I)^-1 (mu+ - mu-).
struct LdaParams {
    Eigen::VectorXd mean_pos;
    Eigen::VectorXd mean_neg;
    double shrinkage = 0.0;
    double prior_pos = 0.5;
    Eigen::VectorXd w;
};

// Per-class, per-feature Gaussian likelihoods with floored variances.
struct NbParams {
    Eigen::VectorXd mean_pos;
    Eigen::VectorXd var_pos;
    Eigen::VectorXd mean_neg;
    Eigen::VectorXd var_neg;
    double prior_pos = 0.5;
    double var_floor = 0.0;
};

// A fixed affine decision function w . x + b.
struct LinearParams {
    Eigen::VectorXd w;
    double b = 0.0;
};

// A fitted two-class decision function. predict(x) is positive iff
// score(x) > threshold; a score equal to the threshold is negative.
class BinaryScorer {
public:
    using Params = std::variant<SvmParams, LdaParams, NbParams, LinearParams>;

    BinaryScorer(Params params, std::string positive = "+", std::string negative = "-", double threshold = 0.0);

    Method method() const;
    const Params& params() const { return params_; }
    const std::string& positive_label() const { return positive_; }
    const std::string& negative_label() const { return negative_; }
    double threshold() const { return threshold_; }
    std::size_t width() const;

    double score(const Eigen::VectorXd& x) const;
    bool predict(const Eigen::VectorXd& x) const { return score(x) > threshold_; }
    Eigen::VectorXd scores(const Eigen::MatrixXd& rows) const;

    // The weight vector of a linear decision function (SVM, LDA, Linear).
    std::optional<Eigen::VectorXd> linear_weights() const;

    BinaryScorer with_labels(std::string positive, std::string negative) const;

    nlohmann::json to_json() const;
    static BinaryScorer from_json(const nlohmann::json& j);

private:
    Params params_;
    std::string positive_;
    std::string negative_;
    double threshold_;
};

struct SvmOptions {
    double C = 1.0;
    double tol = 1e-3;
    // Iteration cap, in passes over the training set.
    long max_passes = 10000;
};

// Thrown when SMO hits its iteration cap; carries the last iterate.
class SvmNotConverged : public NumericalError {
public:
    SvmNotConverged(const std::string& what, BinaryScorer best)
        : NumericalError(what), best_(std::make_shared<BinaryScorer>(std::move(best))) {}
    const BinaryScorer& best() const { return *best_; }

private:
    std::shared_ptr<BinaryScorer> best_;
};

// Labels are +1 / -1. Working pairs are chosen as the maximal KKT violators,
// so results are deterministic.
BinaryScorer svm_fit(const Eigen::MatrixXd& x, const std::vector<int>& y, const SvmOptions& options = {});

// Dual objective sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j <x_i, x_j>.
double svm_dual_objective(const Eigen::MatrixXd& x, const std::vector<int>& y, const Eigen::VectorXd& alpha);

struct LdaOptions {
    // lambda = relative_shrinkage * trace(Sigma_pooled) / d.
    double relative_shrinkage = 1e-6;
};
BinaryScorer lda_fit(const Eigen::MatrixXd& x, const std::vector<int>& y, const LdaOptions& options = {});

struct NbOptions {
    // floor = relative_floor * max per-feature variance of the training data.
    double relative_floor = 1e-9;
};
BinaryScorer nb_fit(const Eigen::MatrixXd& x, const std::vector<int>& y, const NbOptions& options = {});

// K-class Gaussian rules for the flat baseline. Labels are 0..K-1; every
// class needs at least one sample.
class MulticlassGaussian {
public:
    enum class Kind { SharedCovariance, NaiveBayes };

    static MulticlassGaussian fit(Kind kind, const Eigen::MatrixXd& x, const std::vector<int>& labels, int classes);

    Kind kind() const { return kind_; }
    // One discriminant value per class; larger is more likely.
    Eigen::VectorXd scores(const Eigen::VectorXd& x) const;

    nlohmann::json to_json() const;
    static MulticlassGaussian from_json(const nlohmann::json& j);

private:
    Kind kind_ = Kind::SharedCovariance;
    std::vector<Eigen::VectorXd> means_;
    std::vector<Eigen::VectorXd> variances_;  // naive Bayes only
    Eigen::VectorXd log_priors_;
    // Shared covariance: linear coefficients Sigma^-1 mu_c and offsets.
    std::vector<Eigen::VectorXd> coef_;
    Eigen::VectorXd offset_;
};

}  // namespace ftdc
