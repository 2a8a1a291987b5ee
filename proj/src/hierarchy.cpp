#include "ftdc/hierarchy.hpp"

#include <fstream>
#include <functional>

#include "ftdc/errors.hpp"

namespace ftdc {

HierarchySpec::HierarchySpec(std::vector<HierarchyStep> steps) : steps_(std::move(steps)) { validate(); }

void HierarchySpec::validate() const {
    if (steps_.empty()) throw DataError("hierarchy: no steps");
    const int n = static_cast<int>(steps_.size());
    std::vector<int> parents(steps_.size(), 0);
    for (int s = 0; s < n; ++s) {
        const auto& st = steps_[static_cast<std::size_t>(s)];
        if (st.positive.labels.empty() || st.negative.labels.empty())
            throw DataError("hierarchy: step '" + st.name + "' has an empty side");
        if (!(st.positive.labels & st.negative.labels).empty())
            throw DataError("hierarchy: step '" + st.name + "' has overlapping sides");
        for (const StepSide* side : {&st.positive, &st.negative}) {
            if (side->child < 0) {
                if (!side->labels.single())
                    throw DataError("hierarchy: step '" + st.name + "' ends in a leaf covering " + side->labels.name());
                continue;
            }
            if (side->child >= n || side->child == 0)
                throw DataError("hierarchy: step '" + st.name + "' has an invalid child");
            ++parents[static_cast<std::size_t>(side->child)];
            if (steps_[static_cast<std::size_t>(side->child)].labels() != side->labels)
                throw DataError("hierarchy: child of step '" + st.name + "' does not cover " + side->labels.name());
        }
    }
    for (int s = 1; s < n; ++s)
        if (parents[static_cast<std::size_t>(s)] != 1)
            throw DataError("hierarchy: step '" + steps_[static_cast<std::size_t>(s)].name + "' is not a tree node");
    if (steps_[0].labels() != LabelSet::all()) throw DataError("hierarchy: root does not cover all five labels");
    // Every step reachable from the root (rules out detached cycles).
    std::vector<char> seen(steps_.size(), 0);
    std::function<void(int)> visit = [&](int s) {
        if (seen[static_cast<std::size_t>(s)]) throw DataError("hierarchy: cycle detected");
        seen[static_cast<std::size_t>(s)] = 1;
        const auto& st = steps_[static_cast<std::size_t>(s)];
        if (st.positive.child >= 0) visit(st.positive.child);
        if (st.negative.child >= 0) visit(st.negative.child);
    };
    visit(0);
    for (char c : seen)
        if (!c) throw DataError("hierarchy: unreachable step");
}

std::vector<std::pair<int, bool>> HierarchySpec::path_to(Diagnosis d) const {
    std::vector<std::pair<int, bool>> path;
    int s = 0;
    while (s >= 0) {
        const auto& st = steps_[static_cast<std::size_t>(s)];
        const bool pos = st.positive.labels.contains(d);
        if (!pos && !st.negative.labels.contains(d))
            throw DataError("hierarchy: label " + std::string(to_string(d)) + " does not reach a leaf");
        path.emplace_back(s, pos);
        s = pos ? st.positive.child : st.negative.child;
    }
    return path;
}

LabelSet HierarchySpec::leaves() const {
    LabelSet out;
    for (const auto& st : steps_) {
        if (st.positive.child < 0) out = out | st.positive.labels;
        if (st.negative.child < 0) out = out | st.negative.labels;
    }
    return out;
}

nlohmann::json HierarchySpec::to_json() const {
    std::function<nlohmann::json(int)> node = [&](int s) {
        const auto& st = steps_[static_cast<std::size_t>(s)];
        nlohmann::json j;
        j["name"] = st.name;
        auto side = [&](const StepSide& sd) -> nlohmann::json {
            if (sd.child < 0) return std::string(to_string(*sd.labels.single()));
            return node(sd.child);
        };
        j["positive"] = side(st.positive);
        j["negative"] = side(st.negative);
        return j;
    };
    return node(0);
}

HierarchySpec HierarchySpec::from_json(const nlohmann::json& j) {
    std::vector<HierarchyStep> steps;
    // Returns the label set covered by the subtree.
    std::function<LabelSet(const nlohmann::json&, int&)> side;
    std::function<int(const nlohmann::json&)> node = [&](const nlohmann::json& jn) -> int {
        if (!jn.is_object()) throw DataError("hierarchy json: step must be an object");
        const int index = static_cast<int>(steps.size());
        steps.emplace_back();
        steps.back().name = jn.value("name", "Step" + std::to_string(index + 1));
        int pchild = -1;
        int nchild = -1;
        const LabelSet pos = side(jn.at("positive"), pchild);
        const LabelSet neg = side(jn.at("negative"), nchild);
        auto& st = steps[static_cast<std::size_t>(index)];
        st.positive = {pos, pchild};
        st.negative = {neg, nchild};
        return index;
    };
    side = [&](const nlohmann::json& js, int& child) -> LabelSet {
        if (js.is_string()) {
            auto d = parse_diagnosis(js.get<std::string>());
            if (!d) throw DataError("hierarchy json: unknown leaf '" + js.get<std::string>() + "'");
            child = -1;
            return LabelSet{*d};
        }
        child = node(js);
        return steps[static_cast<std::size_t>(child)].positive.labels | steps[static_cast<std::size_t>(child)].negative.labels;
    };
    try {
        node(j);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("hierarchy json: ") + e.what());
    }
    return HierarchySpec(std::move(steps));
}

HierarchySpec default_hierarchy() {
    using D = Diagnosis;
    return HierarchySpec({
        {"Step1 (CN vs Dementia)", {groups::Dementia, 1}, {LabelSet{D::CN}, -1}},
        {"Step2 (NonFTD vs FTD)", {groups::FTD, 2}, {groups::NonFTD, -1}},
        {"Step3 (bvFTD vs PPA)", {LabelSet{D::bvFTD}, -1}, {groups::PPA, 3}},
        {"Step4 (nfvPPA vs svPPA)", {LabelSet{D::svPPA}, -1}, {LabelSet{D::nfvPPA}, -1}},
    });
}

std::vector<HierarchySpec> alternate_hierarchies() {
    using D = Diagnosis;
    // PPA split off first, then CN peeled from the remaining dementias.
    HierarchySpec alt1({
        {"Step1 (CN+AD+bvFTD vs PPA)", {groups::PPA, 1}, {LabelSet{D::CN, D::AD, D::bvFTD}, 2}},
        {"Step2 (nfvPPA vs svPPA)", {LabelSet{D::svPPA}, -1}, {LabelSet{D::nfvPPA}, -1}},
        {"Step3 (CN vs AD+bvFTD)", {LabelSet{D::AD, D::bvFTD}, 3}, {LabelSet{D::CN}, -1}},
        {"Step4 (NonFTD vs bvFTD)", {LabelSet{D::bvFTD}, -1}, {groups::NonFTD, -1}},
    });
    // FTD against CN+AD first, svPPA peeled before bvFTD vs nfvPPA.
    HierarchySpec alt2({
        {"Step1 (CN+AD vs FTD)", {groups::FTD, 1}, {LabelSet{D::CN, D::AD}, 3}},
        {"Step2 (bvFTD+nfvPPA vs svPPA)", {LabelSet{D::svPPA}, -1}, {LabelSet{D::bvFTD, D::nfvPPA}, 2}},
        {"Step3 (nfvPPA vs bvFTD)", {LabelSet{D::bvFTD}, -1}, {LabelSet{D::nfvPPA}, -1}},
        {"Step4 (CN vs NonFTD)", {groups::NonFTD, -1}, {LabelSet{D::CN}, -1}},
    });
    return {alt1, alt2};
}

HierarchySpec resolve_hierarchy(const std::string& name_or_path) {
    if (name_or_path == "default") return default_hierarchy();
    if (name_or_path == "alt1") return alternate_hierarchies()[0];
    if (name_or_path == "alt2") return alternate_hierarchies()[1];
    std::ifstream in(name_or_path);
    if (!in) throw DataError("hierarchy: '" + name_or_path + "' is neither default|alt1|alt2 nor a readable file");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("hierarchy: bad JSON in " + name_or_path + ": " + e.what());
    }
    return HierarchySpec::from_json(j);
}

// ---------------------------------------------------------------------------

CascadeModel::CascadeModel(HierarchySpec spec, Method method, std::vector<StepModel> steps)
    : spec_(std::move(spec)), method_(method), steps_(std::move(steps)) {
    if (steps_.size() != spec_.size())
        throw DataError("cascade: " + std::to_string(steps_.size()) + " step models for " +
                        std::to_string(spec_.size()) + " steps");
}

std::size_t CascadeModel::input_dim() const { return steps_.front().pca.input_dim(); }

Decision CascadeModel::classify(const Eigen::VectorXd& x) const {
    if (static_cast<std::size_t>(x.size()) != input_dim())
        throw DataError("classify: input width " + std::to_string(x.size()) + " does not match model width " +
                        std::to_string(input_dim()));
    Decision d;
    int s = 0;
    while (true) {
        const auto& st = spec_.step(static_cast<std::size_t>(s));
        const double score = steps_[static_cast<std::size_t>(s)].score(x);
        const bool pos = score > steps_[static_cast<std::size_t>(s)].scorer.threshold();
        d.path.push_back({s, score, pos});
        const auto& side = pos ? st.positive : st.negative;
        if (side.child < 0) {
            d.label = *side.labels.single();
            return d;
        }
        s = side.child;
    }
}

nlohmann::json CascadeModel::to_json() const {
    nlohmann::json j;
    j["kind"] = "cascade";
    j["method"] = to_string(method_);
    j["hierarchy"] = spec_.to_json();
    for (const auto& st : steps_) j["steps"].push_back({{"pca", st.pca.to_json()}, {"scorer", st.scorer.to_json()}});
    return j;
}

CascadeModel CascadeModel::from_json(const nlohmann::json& j) {
    try {
        if (j.at("kind").get<std::string>() != "cascade") throw DataError("model json: not a cascade model");
        auto method = parse_method(j.at("method").get<std::string>());
        if (!method) throw DataError("model json: unknown method");
        auto spec = HierarchySpec::from_json(j.at("hierarchy"));
        std::vector<StepModel> steps;
        for (const auto& js : j.at("steps"))
            steps.push_back({PcaModel::from_json(js.at("pca")), BinaryScorer::from_json(js.at("scorer"))});
        return CascadeModel(std::move(spec), *method, std::move(steps));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model json: ") + e.what());
    }
}

StepData step_data(const std::vector<Diagnosis>& labels, const HierarchyStep& step) {
    StepData out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (step.positive.labels.contains(labels[i])) {
            out.rows.push_back(static_cast<int>(i));
            out.y.push_back(1);
        } else if (step.negative.labels.contains(labels[i])) {
            out.rows.push_back(static_cast<int>(i));
            out.y.push_back(-1);
        }
    }
    return out;
}

BinaryScorer fit_scorer(Method method, const Eigen::MatrixXd& x, const std::vector<int>& y, const TrainOptions& options) {
    switch (method) {
        case Method::SVM:
            try {
                return svm_fit(x, y, options.svm);
            } catch (const SvmNotConverged& e) {
                if (!options.accept_unconverged) throw;
                return e.best();
            }
        case Method::LDA: return lda_fit(x, y, options.lda);
        case Method::NB: return nb_fit(x, y, options.nb);
        case Method::Linear: break;
    }
    throw UsageError("linear scorers are built by a step factory, not trained");
}

namespace {

Eigen::MatrixXd gather(const Eigen::MatrixXd& x, const std::vector<int>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(rows[r]);
    return out;
}

}  // namespace

StepModel train_step(const Eigen::MatrixXd& x, const std::vector<Diagnosis>& labels, const HierarchySpec& spec,
                     std::size_t step, Method method, const TrainOptions& options, const PcaModel* shared_pca) {
    const auto& st = spec.step(step);
    const auto data = step_data(labels, st);
    int npos = 0;
    for (int v : data.y) npos += v > 0 ? 1 : 0;
    const int nneg = static_cast<int>(data.y.size()) - npos;
    if (npos < 2 || nneg < 2)
        throw DataError("step '" + st.name + "' has " + std::to_string(npos) + " positive (" +
                        st.positive.labels.name() + ") and " + std::to_string(nneg) + " negative (" +
                        st.negative.labels.name() + ") training subjects; need at least 2 per side");
    const Eigen::MatrixXd rows = gather(x, data.rows);
    PcaModel pca = shared_pca ? *shared_pca : pca_fit(rows, options.pca);
    const Eigen::MatrixXd reduced = pca_transform(pca, rows);
    BinaryScorer scorer = options.step_factory ? options.step_factory(reduced, data.y, st)
                                               : fit_scorer(method, reduced, data.y, options);
    return {std::move(pca), scorer.with_labels(st.positive.labels.name(), st.negative.labels.name())};
}

CascadeModel train_cascade(const Eigen::MatrixXd& x, const std::vector<Diagnosis>& labels, const HierarchySpec& spec,
                           Method method, const TrainOptions& options) {
    if (static_cast<Eigen::Index>(labels.size()) != x.rows()) throw DataError("cascade: label/row count mismatch");
    spec.validate();
    std::optional<PcaModel> shared;
    if (options.global_pca) shared = pca_fit(x, options.pca);
    std::vector<StepModel> steps;
    for (std::size_t s = 0; s < spec.size(); ++s)
        steps.push_back(train_step(x, labels, spec, s, method, options, shared ? &*shared : nullptr));
    return CascadeModel(spec, method, std::move(steps));
}

// ---------------------------------------------------------------------------

int argmax_lowest(const Eigen::VectorXd& v) {
    int best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = static_cast<int>(i);
    return best;
}

FlatModel::FlatModel(Method method, PcaModel pca, std::vector<BinaryScorer> heads)
    : method_(method), pca_(std::move(pca)), heads_(std::move(heads)) {
    if (heads_.size() != static_cast<std::size_t>(kNumDiagnoses))
        throw DataError("flat model: expected five heads, got " + std::to_string(heads_.size()));
}

FlatModel::FlatModel(Method method, PcaModel pca, MulticlassGaussian rule)
    : method_(method), pca_(std::move(pca)), rule_(std::move(rule)) {}

Eigen::VectorXd FlatModel::class_scores(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd z = pca_transform(pca_, x);
    if (rule_) return rule_->scores(z);
    Eigen::VectorXd s(kNumDiagnoses);
    for (int c = 0; c < kNumDiagnoses; ++c) s[c] = heads_[static_cast<std::size_t>(c)].score(z);
    return s;
}

Diagnosis FlatModel::classify(const Eigen::VectorXd& x) const {
    return static_cast<Diagnosis>(argmax_lowest(class_scores(x)));
}

nlohmann::json FlatModel::to_json() const {
    nlohmann::json j;
    j["kind"] = "flat";
    j["method"] = to_string(method_);
    j["pca"] = pca_.to_json();
    if (rule_) {
        j["rule"] = rule_->to_json();
    } else {
        for (const auto& h : heads_) j["heads"].push_back(h.to_json());
    }
    return j;
}

FlatModel FlatModel::from_json(const nlohmann::json& j) {
    try {
        if (j.at("kind").get<std::string>() != "flat") throw DataError("model json: not a flat model");
        auto method = parse_method(j.at("method").get<std::string>());
        if (!method) throw DataError("model json: unknown method");
        auto pca = PcaModel::from_json(j.at("pca"));
        if (j.contains("rule")) return FlatModel(*method, std::move(pca), MulticlassGaussian::from_json(j.at("rule")));
        std::vector<BinaryScorer> heads;
        for (const auto& h : j.at("heads")) heads.push_back(BinaryScorer::from_json(h));
        return FlatModel(*method, std::move(pca), std::move(heads));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model json: ") + e.what());
    }
}

FlatModel train_flat(const Eigen::MatrixXd& x, const std::vector<Diagnosis>& labels, Method method,
                     const FlatOptions& options) {
    if (static_cast<Eigen::Index>(labels.size()) != x.rows()) throw DataError("flat: label/row count mismatch");
    std::array<int, kNumDiagnoses> counts{};
    for (auto d : labels) ++counts[static_cast<std::size_t>(index_of(d))];
    for (auto d : kAllDiagnoses)
        if (counts[static_cast<std::size_t>(index_of(d))] < 2)
            throw DataError("flat: class " + std::string(to_string(d)) + " is missing (needs at least 2 subjects)");

    PcaModel pca = pca_fit(x, options.pca);
    const Eigen::MatrixXd z = pca_transform(pca, x);
    if (!options.head_factory && (method == Method::LDA || method == Method::NB)) {
        std::vector<int> y;
        for (auto d : labels) y.push_back(index_of(d));
        const auto kind = method == Method::LDA ? MulticlassGaussian::Kind::SharedCovariance
                                                : MulticlassGaussian::Kind::NaiveBayes;
        return FlatModel(method, std::move(pca), MulticlassGaussian::fit(kind, z, y, kNumDiagnoses));
    }
    std::vector<BinaryScorer> heads;
    for (auto c : kAllDiagnoses) {
        std::vector<int> y;
        for (auto d : labels) y.push_back(d == c ? 1 : -1);
        BinaryScorer head = [&] {
            if (options.head_factory) return options.head_factory(z, y, c);
            try {
                return svm_fit(z, y, options.svm);
            } catch (const SvmNotConverged& e) {
                if (!options.accept_unconverged) throw;
                return e.best();
            }
        }();
        heads.push_back(head.with_labels(std::string(to_string(c)), "rest"));
    }
    return FlatModel(method, std::move(pca), std::move(heads));
}

}  // namespace ftdc
