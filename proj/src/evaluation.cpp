#include "ftdc/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "ftdc/errors.hpp"

namespace ftdc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Eigen::MatrixXd gather(const Eigen::MatrixXd& x, const std::vector<int>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(rows[r]);
    return out;
}

template <class T>
std::vector<T> pick(const std::vector<T>& v, const std::vector<int>& rows) {
    std::vector<T> out;
    out.reserve(rows.size());
    for (int r : rows) out.push_back(v[static_cast<std::size_t>(r)]);
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Folds

std::vector<int> FoldPlan::rows(int rep, FoldRole role) const {
    const auto& r = repetitions.at(static_cast<std::size_t>(rep));
    const auto& folds = role == FoldRole::Train ? r.train_folds
                        : role == FoldRole::Test ? r.test_folds
                                                 : r.validation_folds;
    std::vector<char> want(static_cast<std::size_t>(k), 0);
    for (int f : folds) want[static_cast<std::size_t>(f)] = 1;
    std::vector<int> out;
    for (std::size_t i = 0; i < r.fold_of.size(); ++i)
        if (want[static_cast<std::size_t>(r.fold_of[i])]) out.push_back(static_cast<int>(i));
    return out;
}

std::vector<int> FoldPlan::fold_sizes(int rep) const {
    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    for (int f : repetitions.at(static_cast<std::size_t>(rep)).fold_of) ++sizes[static_cast<std::size_t>(f)];
    return sizes;
}

void FoldPlan::check(const Cohort& cohort) const {
    if (ids.size() != cohort.size()) throw DataError("fold plan covers " + std::to_string(ids.size()) +
                                                     " subjects but the cohort has " + std::to_string(cohort.size()));
    for (std::size_t i = 0; i < ids.size(); ++i)
        if (ids[i] != cohort.subjects()[i].id)
            throw DataError("fold plan does not match the cohort at row " + std::to_string(i) + " ('" + ids[i] +
                            "' vs '" + cohort.subjects()[i].id + "')");
}

FoldPlan make_folds(const Cohort& cohort, int k, int reps, std::uint64_t seed) {
    if (k < 3) throw UsageError("folds: k must be at least 3 (train, test and validation), got " + std::to_string(k));
    if (reps < 1) throw UsageError("folds: repetitions must be positive");
    if (cohort.size() < static_cast<std::size_t>(k))
        throw DataError("folds: cohort of " + std::to_string(cohort.size()) + " subjects is smaller than k = " +
                        std::to_string(k));
    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    for (const auto& s : cohort.subjects()) plan.ids.push_back(s.id);

    std::array<std::vector<int>, kNumDiagnoses> by_class;
    for (std::size_t i = 0; i < cohort.size(); ++i)
        by_class[static_cast<std::size_t>(index_of(cohort.subjects()[i].label))].push_back(static_cast<int>(i));
    std::vector<int> small;
    for (auto d : kAllDiagnoses) {
        const auto& members = by_class[static_cast<std::size_t>(index_of(d))];
        if (!members.empty() && members.size() < static_cast<std::size_t>(k))
            plan.warnings.push_back("class " + std::string(to_string(d)) + " has " + std::to_string(members.size()) +
                                    " subjects, fewer than k = " + std::to_string(k) + "; not stratified");
    }

    const int n_test = k >= 6 ? 2 : 1;
    const int n_val = n_test;
    std::mt19937_64 rng(seed);
    for (int rep = 0; rep < reps; ++rep) {
        FoldPlan::Repetition r;
        r.fold_of.assign(cohort.size(), -1);
        int next = static_cast<int>(rng() % static_cast<std::uint64_t>(k));
        std::vector<int> pooled;
        for (auto d : kAllDiagnoses) {
            auto members = by_class[static_cast<std::size_t>(index_of(d))];
            if (members.size() < static_cast<std::size_t>(k)) {
                pooled.insert(pooled.end(), members.begin(), members.end());
                continue;
            }
            std::shuffle(members.begin(), members.end(), rng);
            for (int m : members) r.fold_of[static_cast<std::size_t>(m)] = next++ % k;
        }
        std::shuffle(pooled.begin(), pooled.end(), rng);
        for (int m : pooled) r.fold_of[static_cast<std::size_t>(m)] = next++ % k;

        std::vector<int> order(static_cast<std::size_t>(k));
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        const auto split = order.begin() + (k - n_test - n_val);
        r.train_folds.assign(order.begin(), split);
        r.test_folds.assign(split, split + n_test);
        r.validation_folds.assign(split + n_test, order.end());
        for (auto* v : {&r.train_folds, &r.test_folds, &r.validation_folds}) std::sort(v->begin(), v->end());
        plan.repetitions.push_back(std::move(r));
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Metrics

void ConfusionCounts::add(bool truth_positive, bool predicted_positive) {
    if (truth_positive) (predicted_positive ? tp : fn) += 1;
    else (predicted_positive ? fp : tn) += 1;
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
}

BinaryMetrics metrics(const ConfusionCounts& c) {
    if (c.tp < 0 || c.fp < 0 || c.tn < 0 || c.fn < 0) throw DataError("metrics: negative count");
    if (c.total() == 0) throw DataError("metrics: no evaluated subjects");
    BinaryMetrics m;
    m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    m.sensitivity_defined = c.positives() > 0;
    m.specificity_defined = c.negatives() > 0;
    m.sensitivity = m.sensitivity_defined ? static_cast<double>(c.tp) / static_cast<double>(c.positives()) : kNaN;
    m.specificity = m.specificity_defined ? static_cast<double>(c.tn) / static_cast<double>(c.negatives()) : kNaN;
    return m;
}

Summary Summary::of(const std::vector<double>& values) {
    Summary s;
    double sum = 0.0;
    for (double v : values)
        if (!std::isnan(v)) {
            sum += v;
            ++s.n;
        }
    if (s.n == 0) {
        s.mean = kNaN;
        s.sd = kNaN;
        return s;
    }
    s.mean = sum / s.n;
    double ss = 0.0;
    for (double v : values)
        if (!std::isnan(v)) ss += (v - s.mean) * (v - s.mean);
    s.sd = s.n > 1 ? std::sqrt(ss / (s.n - 1)) : 0.0;
    return s;
}

RocCurve roc_curve(const std::vector<std::pair<double, bool>>& scored) {
    long pos = 0;
    for (const auto& [s, p] : scored) {
        if (!std::isfinite(s)) throw DataError("roc: non-finite score");
        pos += p ? 1 : 0;
    }
    const long neg = static_cast<long>(scored.size()) - pos;
    if (pos == 0 || neg == 0) throw DataError("roc: need at least one positive and one negative");
    auto sorted = scored;
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    RocCurve roc;
    roc.points.emplace_back(0.0, 0.0);
    long tp = 0;
    long fp = 0;
    double auc = 0.0;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        const long tp0 = tp;
        const long fp0 = fp;
        while (j < sorted.size() && sorted[j].first == sorted[i].first) {
            (sorted[j].second ? tp : fp) += 1;
            ++j;
        }
        // Trapezoid in count units; normalized at the end.
        auc += static_cast<double>(fp - fp0) * static_cast<double>(tp + tp0) / 2.0;
        roc.points.emplace_back(static_cast<double>(fp) / static_cast<double>(neg),
                                static_cast<double>(tp) / static_cast<double>(pos));
        i = j;
    }
    roc.auc = auc / (static_cast<double>(pos) * static_cast<double>(neg));
    return roc;
}

std::string to_string(StepMode m) { return m == StepMode::OracleRouted ? "oracle_routed" : "cascade_routed"; }

// ---------------------------------------------------------------------------
// Evaluation

namespace {

using Scored = std::vector<std::pair<double, bool>>;

struct RepResult {
    std::array<std::array<long, kNumDiagnoses>, kNumDiagnoses> confusion{};
    long correct = 0;
    long total = 0;
    std::vector<ConfusionCounts> oracle;
    std::vector<ConfusionCounts> cascade;
    std::vector<long> misrouted;
    std::vector<Scored> step_scores;
    std::vector<Scored> class_scores;
    std::vector<double> chosen_c;
    std::vector<MisclassificationRow> misclassified;
    int unconverged = 0;
};

template <class F>
void for_each_rep(int reps, int jobs, F&& f) {
    jobs = std::clamp(jobs, 1, std::max(1, reps));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(reps));
    auto guarded = [&](int r) {
        try {
            f(r);
        } catch (...) {
            errors[static_cast<std::size_t>(r)] = std::current_exception();
        }
    };
    if (jobs == 1) {
        for (int r = 0; r < reps; ++r) guarded(r);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t)
            pool.emplace_back([&] {
                for (int r = next++; r < reps; r = next++) guarded(r);
            });
        for (auto& th : pool) th.join();
    }
    // Report the earliest failing repetition regardless of scheduling.
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

bool unconverged(const BinaryScorer& s) {
    const auto* p = std::get_if<SvmParams>(&s.params());
    return p && !p->converged;
}

std::vector<int> eval_rows(const FoldPlan& plan, int rep, bool tune) {
    auto test = plan.rows(rep, FoldRole::Test);
    if (tune) return test;
    auto val = plan.rows(rep, FoldRole::Validation);
    test.insert(test.end(), val.begin(), val.end());
    std::sort(test.begin(), test.end());
    return test;
}

std::vector<double> sorted_grid(std::vector<double> grid) {
    if (grid.empty()) throw UsageError("tuning grid is empty");
    for (double c : grid)
        if (!(c > 0.0)) throw UsageError("tuning grid values must be positive");
    std::sort(grid.begin(), grid.end());
    return grid;
}

[[noreturn]] void rethrow_in_rep(int rep, const std::exception& e) {
    const std::string msg = "repetition " + std::to_string(rep) + ": " + e.what();
    if (dynamic_cast<const NumericalError*>(&e)) throw NumericalError(msg);
    if (dynamic_cast<const UsageError*>(&e)) throw UsageError(msg);
    throw DataError(msg);
}

nlohmann::json summary_json(const Summary& s) { return {{"mean", s.mean}, {"sd", s.sd}, {"n", s.n}}; }

nlohmann::json counts_json(const ConfusionCounts& c) {
    return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

nlohmann::json roc_json(const RocCurve& roc) {
    // Long pooled curves are thinned for the JSON copy; AUC uses every point.
    constexpr std::size_t kMaxPoints = 500;
    nlohmann::json pts = nlohmann::json::array();
    const std::size_t m = roc.points.size();
    const std::size_t stride = m > kMaxPoints ? (m + kMaxPoints - 1) / kMaxPoints : 1;
    for (std::size_t i = 0; i < m; i += stride) pts.push_back({roc.points[i].first, roc.points[i].second});
    if (m > 0 && (m - 1) % stride != 0) pts.push_back({roc.points.back().first, roc.points.back().second});
    return {{"auc", roc.auc}, {"points", pts}};
}

nlohmann::json config_json(const EvalOptions& o, Method method) {
    nlohmann::json j;
    j["method"] = to_string(method);
    j["pca"] = describe(o.train.pca);
    j["global_pca"] = o.train.global_pca;
    j["C"] = o.train.svm.C;
    j["tol"] = o.train.svm.tol;
    j["tune"] = o.tune;
    j["c_grid"] = o.c_grid;
    j["with_demographics"] = o.with_demographics;
    j["step_mode"] = to_string(o.step_mode);
    j["custom_scorers"] = static_cast<bool>(o.train.step_factory) || static_cast<bool>(o.flat_head_factory);
    return j;
}

// Fills the model-independent parts of the report from per-repetition results.
void reduce_common(EvaluationReport& report, const std::vector<RepResult>& results) {
    std::vector<double> macro_sens;
    std::vector<double> macro_spec;
    std::array<std::vector<double>, kNumDiagnoses> class_sens;
    std::array<std::vector<double>, kNumDiagnoses> class_spec;
    for (std::size_t r = 0; r < results.size(); ++r) {
        const auto& res = results[r];
        report.rep_accuracy.push_back(static_cast<double>(res.correct) / static_cast<double>(res.total));
        for (int a = 0; a < kNumDiagnoses; ++a)
            for (int b = 0; b < kNumDiagnoses; ++b)
                report.confusion[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] +=
                    res.confusion[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
        double ss = 0.0;
        double sp = 0.0;
        int ns = 0;
        int np = 0;
        for (int c = 0; c < kNumDiagnoses; ++c) {
            ConfusionCounts cc;
            for (int a = 0; a < kNumDiagnoses; ++a)
                for (int b = 0; b < kNumDiagnoses; ++b) {
                    const long v = res.confusion[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
                    if (a == c && b == c) cc.tp += v;
                    else if (a == c) cc.fn += v;
                    else if (b == c) cc.fp += v;
                    else cc.tn += v;
                }
            const auto m = metrics(cc);
            class_sens[static_cast<std::size_t>(c)].push_back(m.sensitivity);
            class_spec[static_cast<std::size_t>(c)].push_back(m.specificity);
            if (m.sensitivity_defined) {
                ss += m.sensitivity;
                ++ns;
            }
            if (m.specificity_defined) {
                sp += m.specificity;
                ++np;
            }
        }
        macro_sens.push_back(ns ? ss / ns : kNaN);
        macro_spec.push_back(np ? sp / np : kNaN);
        if (res.unconverged > 0)
            report.warnings.push_back("repetition " + std::to_string(r) + ": " + std::to_string(res.unconverged) +
                                      " SVM fit(s) stopped at the iteration cap");
        report.misclassified.insert(report.misclassified.end(), res.misclassified.begin(), res.misclassified.end());
    }
    report.accuracy = Summary::of(report.rep_accuracy);
    report.sensitivity = Summary::of(macro_sens);
    report.specificity = Summary::of(macro_spec);
    for (auto d : kAllDiagnoses) {
        ClassReport cr;
        cr.label = d;
        cr.sensitivity = Summary::of(class_sens[static_cast<std::size_t>(index_of(d))]);
        cr.specificity = Summary::of(class_spec[static_cast<std::size_t>(index_of(d))]);
        report.classes.push_back(cr);
    }
}

void fill_mode(ModeStats& out, const std::vector<RepResult>& results, std::size_t step, bool oracle) {
    std::vector<double> acc, sens, spec, sens_sw, spec_sw;
    for (const auto& res : results) {
        const auto& c = oracle ? res.oracle[step] : res.cascade[step];
        if (!oracle) out.misrouted += res.misrouted[step];
        out.pooled += c;
        if (c.total() == 0) continue;
        const auto m = metrics(c);
        acc.push_back(m.accuracy);
        sens.push_back(m.sensitivity);
        spec.push_back(m.specificity);
        const auto w = metrics(c.swapped());
        sens_sw.push_back(w.sensitivity);
        spec_sw.push_back(w.specificity);
    }
    out.accuracy = Summary::of(acc);
    out.sensitivity = Summary::of(sens);
    out.specificity = Summary::of(spec);
    out.sensitivity_swapped = Summary::of(sens_sw);
    out.specificity_swapped = Summary::of(spec_sw);
}

bool both_classes(const Scored& s) {
    bool p = false;
    bool n = false;
    for (const auto& [v, t] : s) (t ? p : n) = true;
    return p && n;
}

// Trains every step of the cascade for one repetition, tuning C on the
// validation rows when requested.
CascadeModel fit_cascade_rep(const Eigen::MatrixXd& x, const std::vector<Diagnosis>& labels, const HierarchySpec& spec,
                             Method method, const FoldPlan& plan, int rep, const EvalOptions& options,
                             RepResult& res) {
    const auto train = plan.rows(rep, FoldRole::Train);
    const Eigen::MatrixXd xtr = gather(x, train);
    const auto ltr = pick(labels, train);
    TrainOptions topt = options.train;
    topt.accept_unconverged = true;
    std::optional<PcaModel> shared;
    if (topt.global_pca) shared = pca_fit(xtr, topt.pca);
    const PcaModel* shared_ptr = shared ? &*shared : nullptr;

    const bool tune = options.tune && method == Method::SVM && !topt.step_factory;
    const auto val = tune ? plan.rows(rep, FoldRole::Validation) : std::vector<int>{};
    std::vector<StepModel> steps;
    for (std::size_t s = 0; s < spec.size(); ++s) {
        if (!tune) {
            steps.push_back(train_step(xtr, ltr, spec, s, method, topt, shared_ptr));
            continue;
        }
        const auto& st = spec.step(s);
        std::optional<StepModel> best;
        double best_c = 0.0;
        double best_acc = -1.0;
        for (double c : sorted_grid(options.c_grid)) {
            TrainOptions o = topt;
            o.svm.C = c;
            StepModel m = train_step(xtr, ltr, spec, s, method, o, shared_ptr);
            long hit = 0;
            long seen = 0;
            for (int v : val) {
                const auto d = labels[static_cast<std::size_t>(v)];
                if (!st.labels().contains(d)) continue;
                const bool pred = m.score(x.row(v).transpose()) > m.scorer.threshold();
                hit += pred == st.positive.labels.contains(d) ? 1 : 0;
                ++seen;
            }
            const double acc = seen ? static_cast<double>(hit) / static_cast<double>(seen) : 0.0;
            if (acc > best_acc) {
                best_acc = acc;
                best_c = c;
                best = std::move(m);
            }
        }
        res.chosen_c.push_back(best_c);
        steps.push_back(std::move(*best));
    }
    for (const auto& st : steps) res.unconverged += unconverged(st.scorer) ? 1 : 0;
    return CascadeModel(spec, method, std::move(steps));
}

RepResult run_cascade_rep(const Eigen::MatrixXd& x, const std::vector<Diagnosis>& labels,
                          const std::vector<std::string>& ids, const HierarchySpec& spec, Method method,
                          const FoldPlan& plan, int rep, const EvalOptions& options) {
    RepResult res;
    const std::size_t ns = spec.size();
    res.oracle.assign(ns, {});
    res.cascade.assign(ns, {});
    res.misrouted.assign(ns, 0);
    res.step_scores.assign(ns, {});
    const CascadeModel model = fit_cascade_rep(x, labels, spec, method, plan, rep, options, res);

    for (int row : eval_rows(plan, rep, options.tune)) {
        const Eigen::VectorXd xi = x.row(row).transpose();
        const Diagnosis truth = labels[static_cast<std::size_t>(row)];
        for (std::size_t s = 0; s < ns; ++s) {
            const auto& st = spec.step(s);
            if (!st.labels().contains(truth)) continue;
            const double score = model.steps()[s].score(xi);
            const bool tpos = st.positive.labels.contains(truth);
            res.oracle[s].add(tpos, score > model.steps()[s].scorer.threshold());
            res.step_scores[s].emplace_back(score, tpos);
        }
        const Decision dec = model.classify(xi);
        for (const auto& pe : dec.path) {
            const auto& st = spec.step(static_cast<std::size_t>(pe.step));
            if (!st.labels().contains(truth)) {
                ++res.misrouted[static_cast<std::size_t>(pe.step)];
                continue;
            }
            res.cascade[static_cast<std::size_t>(pe.step)].add(st.positive.labels.contains(truth), pe.positive);
        }
        ++res.confusion[static_cast<std::size_t>(index_of(truth))][static_cast<std::size_t>(index_of(dec.label))];
        ++res.total;
        if (dec.label == truth) {
            ++res.correct;
            continue;
        }
        MisclassificationRow mr;
        mr.repetition = rep;
        mr.id = ids[static_cast<std::size_t>(row)];
        mr.truth = truth;
        mr.predicted = dec.label;
        const auto true_path = spec.path_to(truth);
        for (std::size_t i = 0; i < dec.path.size(); ++i) {
            if (i >= true_path.size() || dec.path[i].step != true_path[i].first ||
                dec.path[i].positive != true_path[i].second) {
                mr.failing_step = dec.path[i].step;
                break;
            }
        }
        if (mr.failing_step >= 0) mr.failing_step_name = spec.step(static_cast<std::size_t>(mr.failing_step)).name;
        for (const auto& pe : dec.path) mr.path.emplace_back(pe.step, pe.score);
        res.misclassified.push_back(std::move(mr));
    }
    return res;
}

FlatModel fit_flat_rep(const Eigen::MatrixXd& x, const std::vector<Diagnosis>& labels, Method method,
                       const FoldPlan& plan, int rep, const EvalOptions& options, RepResult& res) {
    const auto train = plan.rows(rep, FoldRole::Train);
    const Eigen::MatrixXd xtr = gather(x, train);
    const auto ltr = pick(labels, train);
    FlatOptions fo;
    fo.pca = options.train.pca;
    fo.svm = options.train.svm;
    fo.accept_unconverged = true;
    fo.head_factory = options.flat_head_factory;
    auto count = [&](const FlatModel& m) {
        for (const auto& h : m.heads()) res.unconverged += unconverged(h) ? 1 : 0;
    };
    const bool tune = options.tune && method == Method::SVM && !fo.head_factory;
    if (!tune) {
        FlatModel m = train_flat(xtr, ltr, method, fo);
        count(m);
        return m;
    }
    const auto val = plan.rows(rep, FoldRole::Validation);
    std::optional<FlatModel> best;
    double best_c = 0.0;
    double best_acc = -1.0;
    for (double c : sorted_grid(options.c_grid)) {
        fo.svm.C = c;
        FlatModel m = train_flat(xtr, ltr, method, fo);
        long hit = 0;
        for (int v : val) hit += m.classify(x.row(v).transpose()) == labels[static_cast<std::size_t>(v)] ? 1 : 0;
        const double acc = val.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(val.size());
        if (acc > best_acc) {
            best_acc = acc;
            best_c = c;
            best = std::move(m);
        }
    }
    res.chosen_c.push_back(best_c);
    count(*best);
    return std::move(*best);
}

RepResult run_flat_rep(const Eigen::MatrixXd& x, const std::vector<Diagnosis>& labels,
                       const std::vector<std::string>& ids, Method method, const FoldPlan& plan, int rep,
                       const EvalOptions& options) {
    RepResult res;
    res.class_scores.assign(kNumDiagnoses, {});
    const FlatModel model = fit_flat_rep(x, labels, method, plan, rep, options, res);
    for (int row : eval_rows(plan, rep, options.tune)) {
        const Eigen::VectorXd scores = model.class_scores(x.row(row).transpose());
        const Diagnosis truth = labels[static_cast<std::size_t>(row)];
        const auto pred = static_cast<Diagnosis>(argmax_lowest(scores));
        for (int c = 0; c < kNumDiagnoses; ++c)
            res.class_scores[static_cast<std::size_t>(c)].emplace_back(scores[c], index_of(truth) == c);
        ++res.confusion[static_cast<std::size_t>(index_of(truth))][static_cast<std::size_t>(index_of(pred))];
        ++res.total;
        if (pred == truth) {
            ++res.correct;
            continue;
        }
        MisclassificationRow mr;
        mr.repetition = rep;
        mr.id = ids[static_cast<std::size_t>(row)];
        mr.truth = truth;
        mr.predicted = pred;
        for (int c = 0; c < kNumDiagnoses; ++c) mr.path.emplace_back(c, scores[c]);
        res.misclassified.push_back(std::move(mr));
    }
    return res;
}

struct Prepared {
    Eigen::MatrixXd x;
    std::vector<Diagnosis> labels;
    std::vector<std::string> ids;
};

Prepared prepare(const Cohort& cohort, const FoldPlan& plan, const EvalOptions& options) {
    plan.check(cohort);
    if (plan.k < 3 || plan.repetitions.empty()) throw DataError("fold plan is empty");
    if (options.jobs < 1) throw UsageError("jobs must be at least 1");
    Prepared p;
    p.x = cohort.design_matrix(options.with_demographics).values;
    p.labels = cohort.labels();
    p.ids = plan.ids;
    return p;
}

void fill_header(EvaluationReport& report, const FoldPlan& plan, const EvalOptions& options, Method method) {
    report.method = method;
    report.headline_mode = options.step_mode;
    report.config = config_json(options, method);
    report.k = plan.k;
    report.reps = plan.reps();
    report.seed = plan.seed;
    report.warnings = plan.warnings;
}

}  // namespace

EvaluationReport evaluate_cascade(const Cohort& cohort, const HierarchySpec& spec, Method method, const FoldPlan& plan,
                                  const EvalOptions& options) {
    spec.validate();
    const Prepared p = prepare(cohort, plan, options);
    std::vector<RepResult> results(static_cast<std::size_t>(plan.reps()));
    for_each_rep(plan.reps(), options.jobs, [&](int r) {
        try {
            results[static_cast<std::size_t>(r)] = run_cascade_rep(p.x, p.labels, p.ids, spec, method, plan, r, options);
        } catch (const std::exception& e) {
            rethrow_in_rep(r, e);
        }
    });

    EvaluationReport report;
    report.model = "cascade";
    report.hierarchy = spec.to_json();
    fill_header(report, plan, options, method);
    reduce_common(report, results);
    for (std::size_t s = 0; s < spec.size(); ++s) {
        StepReport sr;
        const auto& st = spec.step(s);
        sr.name = st.name;
        sr.positive = st.positive.labels;
        sr.negative = st.negative.labels;
        fill_mode(sr.oracle, results, s, true);
        fill_mode(sr.cascade, results, s, false);
        Scored pooled;
        std::vector<double> aucs;
        for (const auto& res : results) {
            pooled.insert(pooled.end(), res.step_scores[s].begin(), res.step_scores[s].end());
            aucs.push_back(both_classes(res.step_scores[s]) ? roc_curve(res.step_scores[s]).auc : kNaN);
            if (!res.chosen_c.empty()) sr.chosen_c.push_back(res.chosen_c[s]);
        }
        if (both_classes(pooled)) sr.roc = roc_curve(pooled);
        else report.warnings.push_back("step '" + st.name + "': test scores hold a single class; no ROC");
        sr.auc = Summary::of(aucs);
        report.steps.push_back(std::move(sr));
    }
    return report;
}

EvaluationReport evaluate_flat(const Cohort& cohort, Method method, const FoldPlan& plan, const EvalOptions& options) {
    const Prepared p = prepare(cohort, plan, options);
    std::vector<RepResult> results(static_cast<std::size_t>(plan.reps()));
    for_each_rep(plan.reps(), options.jobs, [&](int r) {
        try {
            results[static_cast<std::size_t>(r)] = run_flat_rep(p.x, p.labels, p.ids, method, plan, r, options);
        } catch (const std::exception& e) {
            rethrow_in_rep(r, e);
        }
    });

    EvaluationReport report;
    report.model = "flat";
    fill_header(report, plan, options, method);
    reduce_common(report, results);
    for (int c = 0; c < kNumDiagnoses; ++c) {
        Scored pooled;
        for (const auto& res : results)
            pooled.insert(pooled.end(), res.class_scores[static_cast<std::size_t>(c)].begin(),
                          res.class_scores[static_cast<std::size_t>(c)].end());
        auto& cr = report.classes[static_cast<std::size_t>(c)];
        if (both_classes(pooled)) {
            cr.roc = roc_curve(pooled);
            cr.has_roc = true;
        }
    }
    if (options.tune && method == Method::SVM && !options.flat_head_factory) {
        nlohmann::json cs = nlohmann::json::array();
        for (const auto& res : results) cs.push_back(res.chosen_c.front());
        report.config["chosen_c"] = cs;
    }
    return report;
}

std::vector<MisclassificationRow> misclassification_report(const EvaluationReport& report) {
    return report.misclassified;
}

nlohmann::json EvaluationReport::to_json() const {
    nlohmann::json j;
    j["model"] = model;
    j["method"] = to_string(method);
    j["headline_mode"] = to_string(headline_mode);
    j["hierarchy"] = hierarchy;
    j["config"] = config;
    j["k"] = k;
    j["reps"] = reps;
    j["seed"] = seed;
    j["accuracy"] = summary_json(accuracy);
    j["sensitivity"] = summary_json(sensitivity);
    j["specificity"] = summary_json(specificity);
    j["rep_accuracy"] = rep_accuracy;
    nlohmann::json conf = nlohmann::json::array();
    for (const auto& row : confusion) conf.push_back(row);
    j["confusion"] = {{"labels", {"CN", "AD", "bvFTD", "nfvPPA", "svPPA"}}, {"counts", conf}};
    for (const auto& c : classes) {
        nlohmann::json jc = {{"label", std::string(to_string(c.label))},
                             {"sensitivity", summary_json(c.sensitivity)},
                             {"specificity", summary_json(c.specificity)}};
        if (c.has_roc) jc["roc"] = roc_json(c.roc);
        j["classes"].push_back(jc);
    }
    j["steps"] = nlohmann::json::array();
    for (const auto& s : steps) {
        auto mode = [](const ModeStats& m) {
            return nlohmann::json{{"counts", counts_json(m.pooled)},
                                  {"accuracy", summary_json(m.accuracy)},
                                  {"sensitivity", summary_json(m.sensitivity)},
                                  {"specificity", summary_json(m.specificity)},
                                  {"sensitivity_swapped", summary_json(m.sensitivity_swapped)},
                                  {"specificity_swapped", summary_json(m.specificity_swapped)},
                                  {"misrouted", m.misrouted}};
        };
        nlohmann::json js = {{"name", s.name},
                             {"positive", s.positive.name()},
                             {"negative", s.negative.name()},
                             {"oracle_routed", mode(s.oracle)},
                             {"cascade_routed", mode(s.cascade)},
                             {"roc", roc_json(s.roc)},
                             {"auc", summary_json(s.auc)}};
        if (!s.chosen_c.empty()) js["chosen_c"] = s.chosen_c;
        j["steps"].push_back(js);
    }
    j["misclassified"] = nlohmann::json::array();
    for (const auto& m : misclassified) {
        nlohmann::json path = nlohmann::json::array();
        for (const auto& [st, sc] : m.path) path.push_back({st, sc});
        j["misclassified"].push_back({{"repetition", m.repetition},
                                      {"id", m.id},
                                      {"truth", std::string(to_string(m.truth))},
                                      {"predicted", std::string(to_string(m.predicted))},
                                      {"failing_step", m.failing_step},
                                      {"failing_step_name", m.failing_step_name},
                                      {"path", path}});
    }
    j["warnings"] = warnings;
    return j;
}

// ---------------------------------------------------------------------------
// Discriminative regions

RegionMap discriminative_regions(const FeatureMatrix& x_filtered, const Eigen::MatrixXd& y_pca,
                                 const Eigen::MatrixXd& y_c) {
    const Eigen::Index d = x_filtered.cols();
    if (x_filtered.rows() == 0 || d == 0) throw DataError("regions: empty feature matrix");
    if (y_pca.rows() != d)
        throw DataError("regions: Y_PCA has " + std::to_string(y_pca.rows()) + " rows but there are " +
                        std::to_string(d) + " features");
    if (y_pca.cols() != y_c.rows())
        throw DataError("regions: Y_PCA has " + std::to_string(y_pca.cols()) + " columns but Y_C has " +
                        std::to_string(y_c.rows()) + " rows");
    if (y_c.cols() == 0) throw DataError("regions: Y_C has no columns");
    if (!x_filtered.values.allFinite() || !y_pca.allFinite() || !y_c.allFinite())
        throw NumericalError("regions: non-finite input");
    RegionMap out;
    const Eigen::MatrixXd sigma = x_filtered.values.transpose() * x_filtered.values;
    out.w1 = y_pca * y_c;
    out.r = sigma * out.w1;
    out.names = x_filtered.columns;
    if (out.names.size() != static_cast<std::size_t>(d)) {
        out.names.clear();
        for (Eigen::Index i = 0; i < d; ++i) out.names.push_back("feature_" + std::to_string(i));
    }
    out.ranking.resize(static_cast<std::size_t>(d));
    std::iota(out.ranking.begin(), out.ranking.end(), 0);
    std::stable_sort(out.ranking.begin(), out.ranking.end(),
                     [&](int a, int b) { return std::abs(out.r(a, 0)) > std::abs(out.r(b, 0)); });
    return out;
}

RegionMap step_regions(const Cohort& cohort, const CascadeModel& model, std::size_t step, bool with_demographics) {
    if (step >= model.steps().size()) throw UsageError("regions: no step " + std::to_string(step));
    const auto& sm = model.steps()[step];
    const auto w = sm.scorer.linear_weights();
    if (!w) throw DataError("regions: step '" + model.spec().step(step).name + "' uses " +
                            to_string(sm.scorer.method()) + ", which has no linear weights");
    const FeatureMatrix all = cohort.design_matrix(with_demographics);
    if (static_cast<std::size_t>(all.cols()) != sm.pca.input_dim())
        throw DataError("regions: cohort has " + std::to_string(all.cols()) + " features but the model expects " +
                        std::to_string(sm.pca.input_dim()));
    const auto data = step_data(cohort.labels(), model.spec().step(step));
    FeatureMatrix x = all.select_rows(data.rows);
    x.values.rowwise() -= sm.pca.means.transpose();
    return discriminative_regions(x, sm.pca.directions, *w);
}

// ---------------------------------------------------------------------------
// Writers

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string table_row(const std::string& label, const std::string& method, const std::string& row,
                      const std::string& positive, const std::string& mode, int n, const Summary& acc,
                      const Summary& sens, const Summary& spec) {
    std::string out = csv_field(label) + "," + method + "," + csv_field(row) + "," + csv_field(positive) + "," +
                      mode + "," + std::to_string(n);
    for (const Summary* s : {&acc, &sens, &spec}) out += "," + num(s->mean) + "," + num(s->sd);
    return out + "\n";
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

}  // namespace

std::string report_table_header() {
    return "approach,method,row,positive,mode,reps,accuracy,accuracy_sd,sensitivity,sensitivity_sd,specificity,"
           "specificity_sd\n";
}

std::string report_table_csv(const EvaluationReport& report, const std::string& label) {
    std::string out;
    const std::string method = to_string(report.method);
    for (const auto& s : report.steps) {
        for (const StepMode mode : {report.headline_mode, report.headline_mode == StepMode::OracleRouted
                                                              ? StepMode::CascadeRouted
                                                              : StepMode::OracleRouted}) {
            const ModeStats& m = mode == StepMode::OracleRouted ? s.oracle : s.cascade;
            out += table_row(label, method, s.name, s.positive.name(), to_string(mode), report.reps, m.accuracy,
                             m.sensitivity, m.specificity);
            out += table_row(label, method, s.name, s.negative.name(), to_string(mode), report.reps, m.accuracy,
                             m.sensitivity_swapped, m.specificity_swapped);
        }
    }
    out += table_row(label, method, "Overall", "macro", report.model, report.reps, report.accuracy, report.sensitivity,
                     report.specificity);
    return out;
}

std::string confusion_csv(const EvaluationReport& report) {
    std::string out = "truth\\predicted";
    for (auto d : kAllDiagnoses) out += "," + std::string(to_string(d));
    out += "\n";
    for (auto a : kAllDiagnoses) {
        out += std::string(to_string(a));
        for (auto b : kAllDiagnoses)
            out += "," + std::to_string(
                             report.confusion[static_cast<std::size_t>(index_of(a))][static_cast<std::size_t>(index_of(b))]);
        out += "\n";
    }
    return out;
}

std::string misclassification_csv(const std::vector<MisclassificationRow>& rows, const EvaluationReport& report) {
    std::string out = "repetition,id,truth,predicted,failing_step,path\n";
    for (const auto& r : rows) {
        std::string path;
        for (const auto& [st, sc] : r.path) {
            if (!path.empty()) path += ";";
            const std::string name = report.model == "cascade" && st < static_cast<int>(report.steps.size())
                                         ? report.steps[static_cast<std::size_t>(st)].name
                                         : std::string(to_string(static_cast<Diagnosis>(st)));
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.6g", sc);
            path += name + "=" + buf;
        }
        out += std::to_string(r.repetition) + "," + csv_field(r.id) + "," + std::string(to_string(r.truth)) + "," +
               std::string(to_string(r.predicted)) + "," + csv_field(r.failing_step_name) + "," + csv_field(path) +
               "\n";
    }
    return out;
}

std::string roc_csv(const EvaluationReport& report) {
    std::string out = "curve,fpr,tpr,auc\n";
    auto emit = [&](const std::string& name, const RocCurve& roc) {
        for (const auto& [f, t] : roc.points) out += csv_field(name) + "," + num(f) + "," + num(t) + "," + num(roc.auc) + "\n";
    };
    for (const auto& s : report.steps)
        if (!s.roc.points.empty()) emit(s.name, s.roc);
    for (const auto& c : report.classes)
        if (c.has_roc) emit(std::string(to_string(c.label)) + " vs rest", c.roc);
    return out;
}

std::string roc_svg(const EvaluationReport& report) {
    std::vector<std::pair<std::string, const RocCurve*>> curves;
    for (const auto& s : report.steps)
        if (!s.roc.points.empty()) curves.emplace_back(s.name, &s.roc);
    for (const auto& c : report.classes)
        if (c.has_roc) curves.emplace_back(std::string(to_string(c.label)) + " vs rest", &c.roc);

    constexpr double left = 60, top = 20, size = 360;
    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"440\" font-family=\"sans-serif\" "
                      "font-size=\"12\">\n";
    out += "<rect x=\"60\" y=\"20\" width=\"360\" height=\"360\" fill=\"none\" stroke=\"#000\"/>\n";
    out += "<line x1=\"60\" y1=\"380\" x2=\"420\" y2=\"20\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n";
    out += "<text x=\"240\" y=\"410\" text-anchor=\"middle\">False positive rate</text>\n";
    out += "<text x=\"20\" y=\"200\" text-anchor=\"middle\" transform=\"rotate(-90 20 200)\">True positive rate</text>\n";
    for (int t = 0; t <= 4; ++t) {
        char buf[256];
        const double v = t / 4.0;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%.1f\" y=\"396\" text-anchor=\"middle\">%.2f</text>\n"
                      "<text x=\"54\" y=\"%.1f\" text-anchor=\"end\">%.2f</text>\n",
                      left + v * size, v, top + size - v * size + 4, v);
        out += buf;
    }
    // Draw at most ~1000 vertices per curve; the curve is a step function so
    // skipping interior points only removes detail.
    for (std::size_t i = 0; i < curves.size(); ++i) {
        const auto& pts = curves[i].second->points;
        const std::size_t stride = pts.size() > 1000 ? pts.size() / 1000 + 1 : 1;
        std::string poly;
        for (std::size_t p = 0; p < pts.size(); p += stride) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", left + pts[p].first * size, top + size - pts[p].second * size);
            poly += buf;
        }
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.2f,%.2f", left + pts.back().first * size, top + size - pts.back().second * size);
        poly += buf;
        const char* color = kPalette[i % std::size(kPalette)];
        out += "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" + std::string(color) + "\" points=\"" + poly + "\"/>\n";
        char legend[512];
        std::snprintf(legend, sizeof legend,
                      "<rect x=\"432\" y=\"%.0f\" width=\"12\" height=\"12\" fill=\"%s\"/>"
                      "<text x=\"450\" y=\"%.0f\">%s (AUC %.3f)</text>\n",
                      30.0 + 20.0 * static_cast<double>(i), color, 40.0 + 20.0 * static_cast<double>(i),
                      xml_escape(curves[i].first).c_str(), curves[i].second->auc);
        out += legend;
    }
    out += "</svg>\n";
    return out;
}

std::string region_csv(const RegionMap& map, const std::string& label, std::size_t top) {
    std::string out;
    const std::size_t n = top == 0 ? map.ranking.size() : std::min(top, map.ranking.size());
    for (std::size_t i = 0; i < n; ++i) {
        const int f = map.ranking[i];
        char buf[96];
        std::snprintf(buf, sizeof buf, "%.9g,%.9g", map.r(f, 0), std::abs(map.r(f, 0)));
        out += csv_field(label) + "," + std::to_string(i + 1) + "," + csv_field(map.names[static_cast<std::size_t>(f)]) +
               "," + buf + "\n";
    }
    return out;
}

std::string region_svg(const RegionMap& map, const std::string& title, std::size_t top) {
    const std::size_t n = std::min(top, map.ranking.size());
    double vmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) vmax = std::max(vmax, std::abs(map.r(map.ranking[i], 0)));
    if (vmax <= 0.0) vmax = 1.0;
    const double height = 50.0 + 18.0 * static_cast<double>(n);
    char head[256];
    std::snprintf(head, sizeof head,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"%.0f\" font-family=\"sans-serif\" "
                  "font-size=\"12\">\n",
                  height);
    std::string out = head;
    out += "<text x=\"10\" y=\"20\" font-size=\"14\">" + xml_escape(title) + "</text>\n";
    for (std::size_t i = 0; i < n; ++i) {
        const int f = map.ranking[i];
        const double v = std::abs(map.r(f, 0));
        const double y = 35.0 + 18.0 * static_cast<double>(i);
        char buf[512];
        std::snprintf(buf, sizeof buf,
                      "<text x=\"190\" y=\"%.0f\" text-anchor=\"end\">%s</text>"
                      "<rect x=\"200\" y=\"%.0f\" width=\"%.1f\" height=\"14\" fill=\"%s\"/>"
                      "<text x=\"%.1f\" y=\"%.0f\">%.3g</text>\n",
                      y + 11, xml_escape(map.names[static_cast<std::size_t>(f)]).c_str(), y, 360.0 * v / vmax,
                      map.r(f, 0) >= 0 ? "#1f77b4" : "#d62728", 205.0 + 360.0 * v / vmax, y + 11, map.r(f, 0));
        out += buf;
    }
    out += "</svg>\n";
    return out;
}

}  // namespace ftdc
