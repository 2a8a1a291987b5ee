#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "ftdc/cohort.hpp"
#include "ftdc/hierarchy.hpp"

namespace ftdc {

enum class FoldRole { Train, Test, Validation };

// Repeated k-fold assignment. Each repetition reshuffles subjects into folds
// (stratified by label) and gives k-4 folds to training, 2 to test and 2 to
// validation; below k = 6 the split is k-2 / 1 / 1.
struct FoldPlan {
    struct Repetition {
        std::vector<int> fold_of;  // per subject, cohort order
        std::vector<int> train_folds;
        std::vector<int> test_folds;
        std::vector<int> validation_folds;
    };

    int k = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> ids;
    std::vector<Repetition> repetitions;
    std::vector<std::string> warnings;

    int reps() const { return static_cast<int>(repetitions.size()); }
    // Subject indices (ascending) holding the role in repetition `rep`.
    std::vector<int> rows(int rep, FoldRole role) const;
    std::vector<int> fold_sizes(int rep) const;
    // Throws DataError unless the plan was made for exactly this cohort.
    void check(const Cohort& cohort) const;
};

FoldPlan make_folds(const Cohort& cohort, int k, int reps, std::uint64_t seed);

struct ConfusionCounts {
    long tp = 0;
    long fp = 0;
    long tn = 0;
    long fn = 0;

    long total() const { return tp + fp + tn + fn; }
    long positives() const { return tp + fn; }
    long negatives() const { return tn + fp; }
    void add(bool truth_positive, bool predicted_positive);
    ConfusionCounts& operator+=(const ConfusionCounts& o);
    // The same counts with the other class designated positive.
    ConfusionCounts swapped() const { return {tn, fn, tp, fp}; }
};

// Ratios with a zero denominator are NaN and flagged, never 0.
struct BinaryMetrics {
    double accuracy = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    bool sensitivity_defined = true;
    bool specificity_defined = true;
};

BinaryMetrics metrics(const ConfusionCounts& c);

// Mean and sample standard deviation over the repetitions where the value was
// defined; `n` counts those repetitions.
struct Summary {
    double mean = 0.0;
    double sd = 0.0;
    int n = 0;

    static Summary of(const std::vector<double>& values);
};

struct RocCurve {
    std::vector<std::pair<double, double>> points;  // (FPR, TPR), from (0,0) to (1,1)
    double auc = 0.0;
};

// Threshold sweep over distinct scores (descending); equal scores form a
// single step. AUC by the trapezoid rule.
RocCurve roc_curve(const std::vector<std::pair<double, bool>>& scored);

enum class StepMode { OracleRouted, CascadeRouted };
std::string to_string(StepMode m);

struct ModeStats {
    ConfusionCounts pooled;
    Summary accuracy;
    Summary sensitivity;
    Summary specificity;
    // Swapped orientation: the negative side treated as positive.
    Summary sensitivity_swapped;
    Summary specificity_swapped;
    // Cascade-routed only: arrivals whose true label lies outside the step.
    long misrouted = 0;
};

struct StepReport {
    std::string name;
    LabelSet positive;
    LabelSet negative;
    ModeStats oracle;
    ModeStats cascade;
    RocCurve roc;  // pooled oracle-routed scores
    Summary auc;   // per repetition
    std::vector<double> chosen_c;  // per repetition, when tuned
};

struct ClassReport {
    Diagnosis label = Diagnosis::CN;
    Summary sensitivity;
    Summary specificity;
    RocCurve roc;  // flat models only
    bool has_roc = false;
};

struct MisclassificationRow {
    int repetition = 0;
    std::string id;
    Diagnosis truth = Diagnosis::CN;
    Diagnosis predicted = Diagnosis::CN;
    // Index of the first step whose routing left the true label's path; -1 for flat models.
    int failing_step = -1;
    std::string failing_step_name;
    // Cascade: (step, score) along the path. Flat: (label index, class score).
    std::vector<std::pair<int, double>> path;
};

struct EvaluationReport {
    std::string model;  // "cascade" or "flat"
    Method method = Method::SVM;
    StepMode headline_mode = StepMode::OracleRouted;
    nlohmann::json hierarchy;  // null for flat
    nlohmann::json config;
    int k = 0;
    int reps = 0;
    std::uint64_t seed = 0;

    std::vector<double> rep_accuracy;
    Summary accuracy;
    // Macro average over the five leaves of one-vs-rest rates.
    Summary sensitivity;
    Summary specificity;
    std::array<std::array<long, kNumDiagnoses>, kNumDiagnoses> confusion{};  // [truth][predicted]
    std::vector<ClassReport> classes;
    std::vector<StepReport> steps;
    std::vector<MisclassificationRow> misclassified;
    std::vector<std::string> warnings;

    nlohmann::json to_json() const;
};

struct EvalOptions {
    TrainOptions train;
    // Replaces the one-vs-rest SVM heads of flat models.
    FlatHeadFactory flat_head_factory;
    StepMode step_mode = StepMode::OracleRouted;
    // Choose C per step on the validation folds; otherwise validation folds
    // join the test folds.
    bool tune = false;
    std::vector<double> c_grid = {0.01, 0.1, 1.0, 10.0, 100.0};
    bool with_demographics = false;
    // Worker threads over repetitions. Does not affect results.
    int jobs = 1;
};

EvaluationReport evaluate_cascade(const Cohort& cohort, const HierarchySpec& spec, Method method, const FoldPlan& plan,
                                  const EvalOptions& options = {});
EvaluationReport evaluate_flat(const Cohort& cohort, Method method, const FoldPlan& plan,
                               const EvalOptions& options = {});

std::vector<MisclassificationRow> misclassification_report(const EvaluationReport& report);

// R = (X X^T) (Y_PCA Y_C) with X = features^T (d x n). No centering is done
// here; pass already filtered and centered rows.
struct RegionMap {
    Eigen::MatrixXd r;   // d x c
    Eigen::MatrixXd w1;  // d x c
    std::vector<std::string> names;
    // Feature indices by descending |R| (first column); ties keep index order.
    std::vector<int> ranking;
};

RegionMap discriminative_regions(const FeatureMatrix& x_filtered, const Eigen::MatrixXd& y_pca,
                                 const Eigen::MatrixXd& y_c);

// Convenience for one cascade step: rows of the step's subtree, centered by
// the step PCA means, with the step's linear weights.
RegionMap step_regions(const Cohort& cohort, const CascadeModel& model, std::size_t step,
                       bool with_demographics = false);

// --- report writers -------------------------------------------------------

// One row per step and orientation plus the overall row.
std::string report_table_csv(const EvaluationReport& report, const std::string& label);
// Header line for report_table_csv output.
std::string report_table_header();
std::string confusion_csv(const EvaluationReport& report);
std::string misclassification_csv(const std::vector<MisclassificationRow>& rows, const EvaluationReport& report);
std::string roc_csv(const EvaluationReport& report);
std::string roc_svg(const EvaluationReport& report);
std::string region_csv(const RegionMap& map, const std::string& label, std::size_t top = 0);
std::string region_svg(const RegionMap& map, const std::string& title, std::size_t top = 20);

}  // namespace ftdc
