#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "ftdc/errors.hpp"
#include "ftdc/evaluation.hpp"
#include "oracles.hpp"

using namespace ftdc;
using D = Diagnosis;

namespace {

BinaryScorer one_hot_scorer(std::size_t width, std::size_t offset, LabelSet positive) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(width));
    for (D d : positive.members()) w[static_cast<Eigen::Index>(offset) + index_of(d)] = 1.0;
    return BinaryScorer(LinearParams{w, -0.5});
}

// Oracle scorers everywhere except `wrong_step`, whose sides are swapped.
EvalOptions oracle_options(std::size_t offset, int wrong_step = -1) {
    EvalOptions o;
    o.train.pca = NoReduction{};
    o.train.step_factory = [offset, wrong_step](const Eigen::MatrixXd& x, const std::vector<int>&,
                                                const HierarchyStep& st) {
        const bool wrong = wrong_step >= 0 && st.name.rfind("Step" + std::to_string(wrong_step + 1), 0) == 0;
        return one_hot_scorer(static_cast<std::size_t>(x.cols()), offset, wrong ? st.negative.labels : st.positive.labels);
    };
    o.flat_head_factory = [offset](const Eigen::MatrixXd& x, const std::vector<int>&, D positive) {
        return one_hot_scorer(static_cast<std::size_t>(x.cols()), offset, LabelSet{positive});
    };
    return o;
}

void check_plan_invariants(const Cohort& c, const FoldPlan& plan) {
    const int k = plan.k;
    const auto n = static_cast<int>(c.size());
    for (int r = 0; r < plan.reps(); ++r) {
        const auto& rep = plan.repetitions[static_cast<std::size_t>(r)];
        REQUIRE(rep.fold_of.size() == c.size());
        std::vector<int> roles;
        roles.insert(roles.end(), rep.train_folds.begin(), rep.train_folds.end());
        roles.insert(roles.end(), rep.test_folds.begin(), rep.test_folds.end());
        roles.insert(roles.end(), rep.validation_folds.begin(), rep.validation_folds.end());
        std::sort(roles.begin(), roles.end());
        std::vector<int> all(static_cast<std::size_t>(k));
        std::iota(all.begin(), all.end(), 0);
        CHECK(roles == all);
        CHECK(rep.test_folds.size() == (k >= 6 ? 2u : 1u));
        CHECK(rep.validation_folds.size() == (k >= 6 ? 2u : 1u));
        const auto tr = plan.rows(r, FoldRole::Train);
        const auto te = plan.rows(r, FoldRole::Test);
        const auto va = plan.rows(r, FoldRole::Validation);
        std::set<int> seen;
        for (const auto* v : {&tr, &te, &va})
            for (int i : *v) CHECK(seen.insert(i).second);
        CHECK(static_cast<int>(seen.size()) == n);
        const auto sizes = plan.fold_sizes(r);
        CHECK(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()) <= 1);
    }
}

}  // namespace

TEST_CASE("folds for n=20, k=10") {
    const Cohort c = generate_synthetic(fixture::separable_spec({4, 4, 4, 4, 4}, 1, 0.1));
    const FoldPlan p = make_folds(c, 10, 1, 42);
    for (int s : p.fold_sizes(0)) CHECK(s == 2);
    CHECK(p.rows(0, FoldRole::Train).size() == 12);
    CHECK(p.rows(0, FoldRole::Test).size() == 4);
    CHECK(p.rows(0, FoldRole::Validation).size() == 4);
    // Every class has fewer members than k here.
    CHECK_FALSE(p.warnings.empty());
}

TEST_CASE("fold plans are deterministic and partition the cohort") {
    const Cohort c = generate_synthetic(SyntheticSpec::niftd_preset(0.35, 1));
    const FoldPlan a = make_folds(c, 10, 5, 7);
    const FoldPlan b = make_folds(c, 10, 5, 7);
    for (int r = 0; r < 5; ++r) CHECK(a.repetitions[static_cast<std::size_t>(r)].fold_of == b.repetitions[static_cast<std::size_t>(r)].fold_of);
    CHECK(a.repetitions[0].fold_of != make_folds(c, 10, 1, 8).repetitions[0].fold_of);
    check_plan_invariants(c, a);
    check_plan_invariants(c, make_folds(c, 5, 3, 9));
    check_plan_invariants(c, make_folds(c, 3, 3, 9));
    // Stratification: each class spreads over the folds within one member.
    for (int r = 0; r < 5; ++r) {
        std::map<std::pair<int, int>, int> per;
        for (std::size_t i = 0; i < c.size(); ++i) ++per[{index_of(c.subjects()[i].label), a.repetitions[static_cast<std::size_t>(r)].fold_of[i]}];
        for (int d = 0; d < kNumDiagnoses; ++d) {
            int lo = 1 << 30, hi = 0;
            for (int f = 0; f < 10; ++f) {
                const int v = per[{d, f}];
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            CHECK(hi - lo <= 1);
        }
    }
}

TEST_CASE("fold plan errors") {
    const Cohort c = generate_synthetic(fixture::separable_spec({2, 2, 2, 0, 0}, 1, 0.1));
    CHECK_THROWS_AS(make_folds(c, 2, 1, 1), UsageError);
    CHECK_THROWS_AS(make_folds(c, 3, 0, 1), UsageError);
    CHECK_THROWS_AS(make_folds(c, 10, 1, 1), DataError);
    const Cohort other = generate_synthetic(fixture::separable_spec({3, 3, 3, 0, 0}, 1, 0.1));
    CHECK_THROWS_AS(make_folds(c, 3, 1, 1).check(other), DataError);
}

TEST_CASE("binary metrics") {
    const BinaryMetrics m = metrics({120, 2, 82, 0});
    CHECK(m.sensitivity == doctest::Approx(1.000).epsilon(1e-12));
    CHECK(m.specificity == doctest::Approx(82.0 / 84.0).epsilon(1e-12));
    CHECK(std::abs(m.specificity - 0.976) < 5e-4);
    CHECK(m.accuracy == doctest::Approx(202.0 / 204.0));
    CHECK(metrics({5, 0, 7, 0}).accuracy == 1.0);
    const BinaryMetrics neg = metrics({0, 1, 4, 0});
    CHECK_FALSE(neg.sensitivity_defined);
    CHECK(std::isnan(neg.sensitivity));
    CHECK(neg.specificity_defined);
    CHECK_THROWS(metrics({0, 0, 0, 0}));

    std::mt19937_64 rng(3);
    std::uniform_int_distribution<long> u(1, 50);
    for (int i = 0; i < 200; ++i) {
        const ConfusionCounts c{u(rng), u(rng), u(rng), u(rng)};
        const BinaryMetrics b = metrics(c);
        const double p = static_cast<double>(c.positives());
        const double n = static_cast<double>(c.negatives());
        CHECK(std::abs(b.accuracy - (b.sensitivity * p + b.specificity * n) / (p + n)) < 1e-12);
        const BinaryMetrics s = metrics(c.swapped());
        CHECK(s.sensitivity == b.specificity);
        CHECK(s.specificity == b.sensitivity);
    }
}

TEST_CASE("summary statistics skip undefined values") {
    const Summary s = Summary::of({1.0, std::nan(""), 3.0});
    CHECK(s.n == 2);
    CHECK(s.mean == 2.0);
    CHECK(s.sd == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("roc curve") {
    const RocCurve hand = roc_curve({{2.0, true}, {0.5, true}, {1.0, false}, {0.0, false}});
    CHECK(std::abs(hand.auc - 0.75) < 1e-12);
    CHECK(hand.points.front() == std::pair<double, double>{0.0, 0.0});
    CHECK(hand.points.back() == std::pair<double, double>{1.0, 1.0});
    CHECK(roc_curve({{3, true}, {2, true}, {1, false}}).auc == 1.0);
    const RocCurve ties = roc_curve({{1, true}, {1, false}, {1, true}, {1, false}});
    CHECK(ties.auc == 0.5);
    CHECK(ties.points.size() == 2);
    CHECK_THROWS(roc_curve({{1, true}, {2, true}}));

    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int t = 0; t < 50; ++t) {
        std::vector<std::pair<double, bool>> s;
        for (int i = 0; i < 30; ++i) {
            const bool pos = i % 3 == 0;
            s.push_back({std::round((g(rng) + (pos ? 0.8 : 0.0)) * 4.0) / 4.0, pos});
        }
        const double auc = roc_curve(s).auc;
        CHECK(std::abs(auc - oracle::auc_by_pairs(s)) < 1e-12);
        for (auto& [v, p] : s) v = std::exp(3.0 * v) + 1.0;
        CHECK(std::abs(roc_curve(s).auc - auc) < 1e-12);
    }
}

TEST_CASE("oracle scorers give perfect cascade and flat evaluations") {
    const Cohort base = generate_synthetic(SyntheticSpec::niftd_preset(0.35, 5));
    const Cohort c = fixture::with_label_columns(base);
    const FoldPlan plan = make_folds(c, 10, 3, 5);
    for (StepMode mode : {StepMode::OracleRouted, StepMode::CascadeRouted}) {
        EvalOptions o = oracle_options(base.feature_count());
        o.step_mode = mode;
        const EvaluationReport r = evaluate_cascade(c, default_hierarchy(), Method::Linear, plan, o);
        CHECK(r.accuracy.mean == 1.0);
        for (const auto& st : r.steps) {
            CHECK(st.oracle.accuracy.mean == 1.0);
            CHECK(st.cascade.accuracy.mean == 1.0);
            CHECK(st.cascade.misrouted == 0);
        }
        CHECK(misclassification_report(r).empty());
    }
    const EvaluationReport f = evaluate_flat(c, Method::Linear, plan, oracle_options(base.feature_count()));
    CHECK(f.accuracy.mean == 1.0);
    long diag = 0;
    for (int d = 0; d < kNumDiagnoses; ++d) diag += f.confusion[static_cast<std::size_t>(d)][static_cast<std::size_t>(d)];
    long tested = 0;
    for (int rep = 0; rep < 3; ++rep)
        tested += static_cast<long>(plan.rows(rep, FoldRole::Test).size() + plan.rows(rep, FoldRole::Validation).size());
    CHECK(diag == tested);
}

TEST_CASE("forced wrong routing at step 3 is attributed to step 3") {
    const Cohort base = generate_synthetic(SyntheticSpec::niftd_preset(0.35, 6));
    const Cohort c = fixture::with_label_columns(base);
    const FoldPlan plan = make_folds(c, 10, 2, 6);
    const EvaluationReport r = evaluate_cascade(c, default_hierarchy(), Method::Linear, plan,
                                                oracle_options(base.feature_count(), 2));
    const auto rows = misclassification_report(r);
    long expected = 0;
    for (int rep = 0; rep < 2; ++rep)
        for (int i : plan.rows(rep, FoldRole::Test)) expected += groups::FTD.contains(c.subjects()[static_cast<std::size_t>(i)].label);
    for (int rep = 0; rep < 2; ++rep)
        for (int i : plan.rows(rep, FoldRole::Validation)) expected += groups::FTD.contains(c.subjects()[static_cast<std::size_t>(i)].label);
    CHECK(static_cast<long>(rows.size()) == expected);
    for (const auto& row : rows) {
        CHECK(row.failing_step == 2);
        CHECK(row.failing_step_name.rfind("Step3", 0) == 0);
        CHECK(groups::FTD.contains(row.truth));
    }
    long wrong = 0;
    for (int t = 0; t < kNumDiagnoses; ++t)
        for (int p = 0; p < kNumDiagnoses; ++p)
            if (t != p) wrong += r.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    CHECK(wrong == expected);
}

TEST_CASE("separable cohort: svm evaluations are perfect") {
    const Cohort c = generate_synthetic(fixture::separable_spec({30, 20, 20, 20, 20}, 2, 0.0));
    const FoldPlan plan = make_folds(c, 10, 2, 3);
    const EvaluationReport h = evaluate_cascade(c, default_hierarchy(), Method::SVM, plan);
    CHECK(h.accuracy.mean == 1.0);
    const EvaluationReport f = evaluate_flat(c, Method::SVM, plan);
    CHECK(f.accuracy.mean == 1.0);
}

TEST_CASE("report laws on a noisy cohort") {
    const Cohort c = generate_synthetic(SyntheticSpec::niftd_preset(0.35, 2));
    const FoldPlan plan = make_folds(c, 10, 4, 11);
    EvalOptions o;
    const EvaluationReport a = evaluate_cascade(c, default_hierarchy(), Method::LDA, plan, o);
    const EvaluationReport b = evaluate_cascade(c, default_hierarchy(), Method::LDA, plan, o);
    CHECK(a.to_json().dump() == b.to_json().dump());
    o.step_mode = StepMode::CascadeRouted;
    const EvaluationReport m = evaluate_cascade(c, default_hierarchy(), Method::LDA, plan, o);
    // The root sees every subject in both modes.
    CHECK(a.steps[0].oracle.pooled.tp == a.steps[0].cascade.pooled.tp);
    CHECK(a.steps[0].oracle.pooled.tn == a.steps[0].cascade.pooled.tn);
    CHECK(m.accuracy.mean == a.accuracy.mean);
    for (const auto& st : a.steps) {
        const auto& pc = st.oracle.pooled;
        const BinaryMetrics bm = metrics(pc);
        const double p = static_cast<double>(pc.positives());
        const double n = static_cast<double>(pc.negatives());
        CHECK(std::abs(bm.accuracy - (bm.sensitivity * p + bm.specificity * n) / (p + n)) < 1e-12);
    }
    long errors = 0;
    for (int t = 0; t < kNumDiagnoses; ++t)
        for (int q = 0; q < kNumDiagnoses; ++q)
            if (t != q) errors += a.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(q)];
    CHECK(static_cast<long>(misclassification_report(a).size()) == errors);
    double acc = 0.0;
    for (double v : a.rep_accuracy) acc += v;
    CHECK(a.accuracy.mean == doctest::Approx(acc / 4.0).epsilon(1e-12));
}

TEST_CASE("parallel repetitions reproduce the serial report") {
    const Cohort c = generate_synthetic(SyntheticSpec::niftd_preset(0.35, 4));
    const FoldPlan plan = make_folds(c, 10, 6, 2);
    EvalOptions serial;
    EvalOptions parallel;
    parallel.jobs = 4;
    CHECK(evaluate_cascade(c, default_hierarchy(), Method::SVM, plan, serial).to_json().dump() ==
          evaluate_cascade(c, default_hierarchy(), Method::SVM, plan, parallel).to_json().dump());
    CHECK(evaluate_flat(c, Method::NB, plan, serial).to_json().dump() ==
          evaluate_flat(c, Method::NB, plan, parallel).to_json().dump());
}

TEST_CASE("tuning records a chosen C per step and repetition") {
    const Cohort c = generate_synthetic(SyntheticSpec::niftd_preset(0.35, 4));
    const FoldPlan plan = make_folds(c, 10, 2, 2);
    EvalOptions o;
    o.tune = true;
    o.c_grid = {0.1, 1.0};
    const EvaluationReport r = evaluate_cascade(c, default_hierarchy(), Method::SVM, plan, o);
    for (const auto& st : r.steps) {
        CHECK(st.chosen_c.size() == 2);
        for (double v : st.chosen_c) CHECK((v == 0.1 || v == 1.0));
    }
}

TEST_CASE("region algebra on the identity fixture") {
    FeatureMatrix x;
    x.values = Eigen::MatrixXd::Identity(4, 4);
    x.columns = {"a", "b", "c", "d"};
    x.row_ids = {"1", "2", "3", "4"};
    Eigen::MatrixXd yc = Eigen::MatrixXd::Zero(4, 1);
    yc(0, 0) = 1.0;
    const RegionMap m = discriminative_regions(x, Eigen::MatrixXd::Identity(4, 4), yc);
    CHECK(m.r.col(0) == Eigen::Vector4d(1, 0, 0, 0));
    CHECK(m.ranking.front() == 0);
    FeatureMatrix x2 = x;
    x2.values *= 2.0;
    CHECK(discriminative_regions(x2, Eigen::MatrixXd::Identity(4, 4), yc).r == 4.0 * m.r);
    CHECK_THROWS_AS(discriminative_regions(x, Eigen::MatrixXd::Identity(3, 3), Eigen::MatrixXd::Ones(3, 1)), DataError);
    CHECK_THROWS_AS(discriminative_regions(x, Eigen::MatrixXd::Identity(4, 2), Eigen::MatrixXd::Ones(3, 1)), DataError);
}

TEST_CASE("regions concentrate in the planted block") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const Cohort c = fixture::block_cohort(seed);
        const CascadeModel m = train_cascade(c.design_matrix().values, c.labels(), default_hierarchy(), Method::SVM);
        const RegionMap r = step_regions(c, m, 0);
        int in_block = 0;
        for (int i = 0; i < 10; ++i)
            in_block += r.ranking[static_cast<std::size_t>(i)] >= fixture::kBlockFirst &&
                        r.ranking[static_cast<std::size_t>(i)] < fixture::kBlockLast;
        CHECK(in_block >= 8);
    }
    const Cohort c = fixture::block_cohort(1);
    const CascadeModel nb = train_cascade(c.design_matrix().values, c.labels(), default_hierarchy(), Method::NB);
    CHECK_THROWS_AS(step_regions(c, nb, 0), DataError);
}

TEST_CASE("report writers") {
    const Cohort c = generate_synthetic(SyntheticSpec::niftd_preset(0.35, 2));
    const FoldPlan plan = make_folds(c, 10, 2, 1);
    const EvaluationReport r = evaluate_cascade(c, default_hierarchy(), Method::SVM, plan);
    const std::string table = report_table_csv(r, "hierarchical");
    CHECK(table.find("hierarchical") != std::string::npos);
    CHECK(report_table_header().rfind("approach,method,row", 0) == 0);
    const std::string conf = confusion_csv(r);
    CHECK(std::count(conf.begin(), conf.end(), '\n') == 6);
    CHECK(roc_svg(r).find("<svg") != std::string::npos);
    CHECK(roc_csv(r).find("Step1") != std::string::npos);
    const auto rows = misclassification_report(r);
    const std::string mc = misclassification_csv(rows, r);
    CHECK(static_cast<std::size_t>(std::count(mc.begin(), mc.end(), '\n')) == rows.size() + 1);
}
