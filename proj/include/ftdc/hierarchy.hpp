#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "ftdc/classifiers.hpp"
#include "ftdc/features.hpp"
#include "ftdc/labels.hpp"

namespace ftdc {

// One side of a step: the labels routed there and either a child step or,
// when `child < 0`, a single leaf label.
struct StepSide {
    LabelSet labels;
    int child = -1;
};

struct HierarchyStep {
    std::string name;
    StepSide positive;
    StepSide negative;

    LabelSet labels() const { return positive.labels | negative.labels; }
};

// Binary tree of steps; step 0 is the root. Steps are stored in pre-order,
// positive side first.
class HierarchySpec {
public:
    HierarchySpec() = default;
    explicit HierarchySpec(std::vector<HierarchyStep> steps);

    const std::vector<HierarchyStep>& steps() const { return steps_; }
    std::size_t size() const { return steps_.size(); }
    const HierarchyStep& step(std::size_t i) const { return steps_[i]; }

    // Throws DataError unless this is a binary tree whose root covers all five
    // labels, whose sides are disjoint and non-empty, and whose children cover
    // exactly the labels of the side they hang from.
    void validate() const;

    // Root-to-leaf route for a label: (step index, took positive side).
    std::vector<std::pair<int, bool>> path_to(Diagnosis d) const;
    int depth(Diagnosis d) const { return static_cast<int>(path_to(d).size()); }
    LabelSet leaves() const;

    // Nested form: {"name", "positive": <side>, "negative": <side>} where a side
    // is a leaf label string or another step object.
    nlohmann::json to_json() const;
    static HierarchySpec from_json(const nlohmann::json& j);

    bool operator==(const HierarchySpec& o) const { return to_json() == o.to_json(); }

private:
    std::vector<HierarchyStep> steps_;
};

// CN vs Dementia -> NonFTD vs FTD -> bvFTD vs PPA -> nfvPPA vs svPPA.
HierarchySpec default_hierarchy();
// The two alternative orderings compared against the default.
std::vector<HierarchySpec> alternate_hierarchies();
// "default", "alt1", "alt2" or a path to a JSON file.
HierarchySpec resolve_hierarchy(const std::string& name_or_path);

// Builds a scorer from reduced training rows and +1/-1 labels for one step.
using StepScorerFactory =
    std::function<BinaryScorer(const Eigen::MatrixXd& x, const std::vector<int>& y, const HierarchyStep& step)>;

struct TrainOptions {
    PcaPolicy pca = VarianceFraction{0.95};
    // One PCA on all training rows shared by every step instead of a refit per step.
    bool global_pca = false;
    SvmOptions svm;
    LdaOptions lda;
    NbOptions nb;
    // Keep the last SMO iterate instead of throwing when the cap is hit; the
    // scorer then reports converged = false.
    bool accept_unconverged = false;
    // Replaces the method's learner (oracle and forced-score experiments).
    StepScorerFactory step_factory;
};

struct StepModel {
    PcaModel pca;
    BinaryScorer scorer;

    double score(const Eigen::VectorXd& x) const { return scorer.score(pca_transform(pca, x)); }
};

struct PathEntry {
    int step = 0;
    double score = 0.0;
    bool positive = false;
};

struct Decision {
    Diagnosis label = Diagnosis::CN;
    std::vector<PathEntry> path;
};

class CascadeModel {
public:
    CascadeModel(HierarchySpec spec, Method method, std::vector<StepModel> steps);

    const HierarchySpec& spec() const { return spec_; }
    Method method() const { return method_; }
    const std::vector<StepModel>& steps() const { return steps_; }
    std::size_t input_dim() const;

    Decision classify(const Eigen::VectorXd& x) const;

    nlohmann::json to_json() const;
    static CascadeModel from_json(const nlohmann::json& j);

private:
    HierarchySpec spec_;
    Method method_;
    std::vector<StepModel> steps_;
};

// Rows of `x` whose label lies in the step's subtree, with +1 for the positive side.
struct StepData {
    std::vector<int> rows;
    std::vector<int> y;
};
StepData step_data(const std::vector<Diagnosis>& labels, const HierarchyStep& step);

BinaryScorer fit_scorer(Method method, const Eigen::MatrixXd& x, const std::vector<int>& y, const TrainOptions& options);

// Fits one step on exactly the rows whose true label belongs to its subtree.
// `shared_pca`, when given, replaces the per-step PCA fit.
StepModel train_step(const Eigen::MatrixXd& x, const std::vector<Diagnosis>& labels, const HierarchySpec& spec,
                     std::size_t step, Method method, const TrainOptions& options,
                     const PcaModel* shared_pca = nullptr);

CascadeModel train_cascade(const Eigen::MatrixXd& x, const std::vector<Diagnosis>& labels, const HierarchySpec& spec,
                           Method method, const TrainOptions& options = {});

// Builds a one-vs-rest head for one class.
using FlatHeadFactory =
    std::function<BinaryScorer(const Eigen::MatrixXd& x, const std::vector<int>& y, Diagnosis positive)>;

struct FlatOptions {
    PcaPolicy pca = VarianceFraction{0.95};
    SvmOptions svm;
    bool accept_unconverged = false;
    FlatHeadFactory head_factory;
};

// Five-class baseline over one shared PCA: one-vs-rest SVM heads, or a single
// multiclass Gaussian rule for LDA / naive Bayes.
class FlatModel {
public:
    FlatModel(Method method, PcaModel pca, std::vector<BinaryScorer> heads);
    FlatModel(Method method, PcaModel pca, MulticlassGaussian rule);

    Method method() const { return method_; }
    const PcaModel& pca() const { return pca_; }
    const std::vector<BinaryScorer>& heads() const { return heads_; }
    std::size_t head_count() const { return rule_ ? kNumDiagnoses : heads_.size(); }

    // One value per label in canonical order.
    Eigen::VectorXd class_scores(const Eigen::VectorXd& x) const;
    // Argmax; exact ties go to the earliest label in canonical order.
    Diagnosis classify(const Eigen::VectorXd& x) const;

    nlohmann::json to_json() const;
    static FlatModel from_json(const nlohmann::json& j);

private:
    Method method_;
    PcaModel pca_;
    std::vector<BinaryScorer> heads_;
    std::optional<MulticlassGaussian> rule_;
};

// Index of the largest value; ties resolve to the lowest index.
int argmax_lowest(const Eigen::VectorXd& v);

FlatModel train_flat(const Eigen::MatrixXd& x, const std::vector<Diagnosis>& labels, Method method,
                     const FlatOptions& options = {});

}  // namespace ftdc
