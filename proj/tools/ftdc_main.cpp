// Command-line front end: synth, extract, evaluate, compare, regions.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ftdc/cohort.hpp"
#include "ftdc/errors.hpp"
#include "ftdc/evaluation.hpp"
#include "ftdc/hierarchy.hpp"
#include "ftdc/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

// Prefixes the failing stage onto an error while keeping its category.
template <class F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ftdc::NumericalError& e) {
        throw ftdc::NumericalError(name + ": " + e.what());
    } catch (const ftdc::UsageError& e) {
        throw ftdc::UsageError(name + ": " + e.what());
    } catch (const ftdc::DataError& e) {
        throw ftdc::DataError(name + ": " + e.what());
    } catch (const json::exception& e) {
        throw ftdc::DataError(name + ": " + e.what());
    } catch (const fs::filesystem_error& e) {
        throw ftdc::DataError(name + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ftdc::DataError("cannot write " + path.string());
    out << text;
    if (!out) throw ftdc::DataError("failed writing " + path.string());
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ftdc::DataError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ftdc::DataError(path.string() + ": " + e.what());
    }
}

void print_counts(const ftdc::Cohort& c) {
    const auto counts = c.class_counts();
    std::printf("subjects: %zu\n", c.size());
    for (auto d : ftdc::kAllDiagnoses)
        std::printf("  %-7s %d\n", std::string(ftdc::to_string(d)).c_str(),
                    counts[static_cast<std::size_t>(ftdc::index_of(d))]);
}

// Applies JSON config values to options the command line left unset, so that
// flags take precedence over the file, which takes precedence over defaults.
void apply_config(CLI::App& app, const json& cfg) {
    if (!cfg.is_object()) throw ftdc::UsageError("config: top level must be an object");
    for (const auto& [key, value] : cfg.items()) {
        if (key == "config") throw ftdc::UsageError("config: nested config files are not supported");
        CLI::Option* opt = nullptr;
        try {
            opt = app.get_option("--" + key);
        } catch (const CLI::OptionNotFound&) {
            throw ftdc::UsageError("config: unknown key '" + key + "'");
        }
        if (opt->count() > 0) continue;
        auto as_text = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
        if (value.is_array()) {
            for (const auto& v : value) opt->add_result(as_text(v));
        } else {
            opt->add_result(as_text(value));
        }
        try {
            opt->run_callback();
        } catch (const CLI::Error& e) {
            throw ftdc::UsageError("config: bad value for '" + key + "': " + e.what());
        }
    }
}

// --- shared option groups -----------------------------------------------

struct ExtractArgs {
    std::string subjects;
    std::string mesh_dir;
    std::string atlas;
    std::string smoother = "susan";
    double fwhm = 15.0;
    std::optional<double> susan_t;
    std::string features = "concatenated";
    std::size_t components = 280;
    std::string thickness = "symmetric";
    bool lowpass_first = false;
    std::optional<double> sigma_k;
};

void add_extract_options(CLI::App* cmd, ExtractArgs& a, bool subjects_required) {
    auto* s = cmd->add_option("--subjects", a.subjects,
                              "Subject table CSV (id,label,age,sex,mmse,education[,...]); features are replaced");
    auto* m = cmd->add_option("--mesh-dir", a.mesh_dir, "Directory holding <id>.inner.mesh and <id>.outer.mesh");
    if (subjects_required) {
        s->required();
        m->required();
    }
    cmd->add_option("--atlas", a.atlas, "Atlas CSV vertex_id,region_id,region_name (default <mesh-dir>/atlas.csv)");
    cmd->add_option("--smoother", a.smoother, "Thickness smoother: susan | heat | none")->capture_default_str();
    cmd->add_option("--fwhm", a.fwhm, "Smoothing kernel FWHM in mm")->capture_default_str();
    cmd->add_option("--susan-t", a.susan_t, "SUSAN brightness threshold in mm (default 0.1 x map range)");
    cmd->add_option("--features", a.features, "Feature path: region_means | spectral | connectivity | concatenated")
        ->capture_default_str();
    cmd->add_option("--components", a.components, "Spectral coefficients kept per subject")->capture_default_str();
    cmd->add_option("--thickness", a.thickness, "Thickness definition: symmetric | linked")->capture_default_str();
    cmd->add_flag("--lowpass-first", a.lowpass_first, "Low-pass through the spectral basis before smoothing");
    cmd->add_option("--sigma-k", a.sigma_k, "Connectivity kernel bandwidth in mm (default median region distance)");
}

ftdc::ExtractOptions extract_options(const ExtractArgs& a) {
    ftdc::ExtractOptions o;
    const auto sm = ftdc::parse_smoother(a.smoother);
    if (!sm) throw ftdc::UsageError("unknown smoother '" + a.smoother + "' (susan | heat | none)");
    const auto fk = ftdc::parse_feature_kind(a.features);
    if (!fk) throw ftdc::UsageError("unknown feature path '" + a.features + "'");
    o.smoother = *sm;
    o.features = *fk;
    o.fwhm_mm = a.fwhm;
    o.susan_threshold = a.susan_t;
    o.components = a.components;
    if (a.thickness == "symmetric") o.thickness = ftdc::ThicknessMode::SymmetricNearest;
    else if (a.thickness == "linked") o.thickness = ftdc::ThicknessMode::LinkedVertex;
    else throw ftdc::UsageError("unknown thickness mode '" + a.thickness + "' (symmetric | linked)");
    o.lowpass_first = a.lowpass_first;
    o.sigma_k = a.sigma_k;
    return o;
}

ftdc::Cohort run_extraction(const ExtractArgs& a, const ftdc::ExtractOptions& o) {
    const auto subjects = stage("load subjects", [&] { return ftdc::load_cohort(a.subjects); });
    const fs::path atlas_path = a.atlas.empty() ? fs::path(a.mesh_dir) / "atlas.csv" : fs::path(a.atlas);
    const std::string first = subjects.subjects().front().id;
    const auto atlas = stage("load atlas", [&] {
        const auto ref = ftdc::read_mesh(ftdc::inner_mesh_path(a.mesh_dir, first));
        return ftdc::read_atlas(atlas_path, ref.vertex_count());
    });
    std::vector<std::string> warnings;
    auto cohort = stage("extract", [&] { return ftdc::extract_cohort(subjects, a.mesh_dir, atlas, o, &warnings); });
    for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    return cohort;
}

struct EvalArgs {
    std::string config;
    std::string cohort;
    ExtractArgs extract;
    std::optional<std::uint64_t> seed;
    std::string method = "svm";
    std::string hierarchy = "default";
    std::string model = "cascade";
    int k = 10;
    int reps = 1000;
    bool tune = false;
    double C = 1.0;
    double tol = 1e-3;
    std::vector<double> c_grid = {0.01, 0.1, 1.0, 10.0, 100.0};
    std::optional<double> pca_fraction;
    std::optional<std::size_t> pca_components;
    bool no_pca = false;
    bool global_pca = false;
    std::string step_mode = "oracle";
    bool with_demographics = false;
    int jobs = 1;
    std::string out;
    std::string save_model;
    std::string compare;
};

void add_eval_options(CLI::App* cmd, EvalArgs& a) {
    cmd->add_option("--config", a.config, "JSON config; keys are long flag names. Flags override the file");
    cmd->add_option("--cohort", a.cohort, "Cohort CSV with feature columns (or use --subjects/--mesh-dir)");
    add_extract_options(cmd, a.extract, false);
    cmd->add_option("--seed", a.seed, "Fold shuffling seed (mandatory)");
    cmd->add_option("--method", a.method, "Classifier: svm | lda | nb")->capture_default_str();
    cmd->add_option("--hierarchy", a.hierarchy, "Cascade tree: default | alt1 | alt2 | <file.json>")
        ->capture_default_str();
    cmd->add_option("--model", a.model, "Model family: cascade | flat | both")->capture_default_str();
    cmd->add_option("--k", a.k, "Folds per repetition (k-4 train / 2 test / 2 validation)")->capture_default_str();
    cmd->add_option("--reps", a.reps, "Cross-validation repetitions")->capture_default_str();
    cmd->add_flag("--tune", a.tune, "Pick C per step on the validation folds; otherwise they join the test folds");
    cmd->add_option("--C", a.C, "SVM box constraint when not tuning")->capture_default_str();
    cmd->add_option("--tol", a.tol, "SVM KKT tolerance")->capture_default_str();
    cmd->add_option("--c-grid", a.c_grid, "Candidate C values for --tune")->capture_default_str();
    cmd->add_option("--pca-fraction", a.pca_fraction, "Retain components up to this explained-variance fraction (default 0.95)");
    cmd->add_option("--pca-components", a.pca_components, "Retain a fixed number of components");
    cmd->add_flag("--no-pca", a.no_pca, "Feed features to the classifiers unreduced");
    cmd->add_flag("--global-pca", a.global_pca, "Fit one PCA on all training rows instead of one per step");
    cmd->add_option("--step-mode", a.step_mode, "Headline per-step metrics: oracle | cascade")->capture_default_str();
    cmd->add_flag("--with-demographics", a.with_demographics, "Append age, sex, MMSE and education as features");
    cmd->add_option("--jobs", a.jobs, "Worker threads over repetitions (results do not depend on it)")
        ->capture_default_str();
    cmd->add_option("--out", a.out, "Output directory for reports");
    cmd->add_option("--save-model", a.save_model, "Also train on the full cohort and write the model JSON here");
}

ftdc::PcaPolicy pca_policy(const EvalArgs& a) {
    const int chosen = (a.pca_fraction ? 1 : 0) + (a.pca_components ? 1 : 0) + (a.no_pca ? 1 : 0);
    if (chosen > 1) throw ftdc::UsageError("--pca-fraction, --pca-components and --no-pca are exclusive");
    if (a.no_pca) return ftdc::NoReduction{};
    if (a.pca_components) return ftdc::FixedComponents{*a.pca_components};
    return ftdc::VarianceFraction{a.pca_fraction.value_or(0.95)};
}

ftdc::Method parse_method_or_throw(const std::string& s) {
    const auto m = ftdc::parse_method(s);
    if (!m || *m == ftdc::Method::Linear) throw ftdc::UsageError("unknown method '" + s + "' (svm | lda | nb)");
    return *m;
}

ftdc::EvalOptions eval_options(const EvalArgs& a) {
    ftdc::EvalOptions o;
    o.train.pca = pca_policy(a);
    o.train.global_pca = a.global_pca;
    if (!(a.C > 0.0)) throw ftdc::UsageError("--C must be positive");
    if (!(a.tol > 0.0)) throw ftdc::UsageError("--tol must be positive");
    o.train.svm.C = a.C;
    o.train.svm.tol = a.tol;
    o.tune = a.tune;
    o.c_grid = a.c_grid;
    o.with_demographics = a.with_demographics;
    if (a.jobs < 1) throw ftdc::UsageError("--jobs must be at least 1");
    o.jobs = a.jobs;
    if (a.step_mode == "oracle" || a.step_mode == "oracle_routed") o.step_mode = ftdc::StepMode::OracleRouted;
    else if (a.step_mode == "cascade" || a.step_mode == "cascade_routed") o.step_mode = ftdc::StepMode::CascadeRouted;
    else throw ftdc::UsageError("unknown step mode '" + a.step_mode + "' (oracle | cascade)");
    return o;
}

void check_eval_args(const EvalArgs& a) {
    if (!a.seed) throw ftdc::UsageError("--seed is mandatory for reproducible evaluation");
    if (a.out.empty()) throw ftdc::UsageError("--out is required");
    if (a.k < 3) throw ftdc::UsageError("--k must be at least 3");
    if (a.reps < 1) throw ftdc::UsageError("--reps must be positive");
    const bool meshes = !a.extract.subjects.empty() || !a.extract.mesh_dir.empty();
    if (a.cohort.empty() == !meshes)
        throw ftdc::UsageError("give either --cohort or --subjects with --mesh-dir");
    if (meshes && (a.extract.subjects.empty() || a.extract.mesh_dir.empty()))
        throw ftdc::UsageError("--subjects and --mesh-dir go together");
    for (const auto* p : {&a.cohort, &a.extract.subjects, &a.extract.mesh_dir, &a.config})
        if (!p->empty() && !fs::exists(*p)) throw ftdc::UsageError("path does not exist: " + *p);
}

ftdc::Cohort eval_cohort(const EvalArgs& a, std::optional<ftdc::SmootherKind> smoother = std::nullopt) {
    if (!a.cohort.empty()) return stage("load cohort", [&] { return ftdc::load_cohort(a.cohort); });
    auto o = extract_options(a.extract);
    if (smoother) o.smoother = *smoother;
    return run_extraction(a.extract, o);
}

void write_report(const fs::path& dir, const std::string& prefix, const ftdc::EvaluationReport& r) {
    write_text(dir / (prefix + "_report.json"), r.to_json().dump(2) + "\n");
    write_text(dir / (prefix + "_table.csv"), ftdc::report_table_header() + ftdc::report_table_csv(r, prefix));
    write_text(dir / (prefix + "_confusion.csv"), ftdc::confusion_csv(r));
    write_text(dir / (prefix + "_roc.csv"), ftdc::roc_csv(r));
    write_text(dir / (prefix + "_roc.svg"), ftdc::roc_svg(r));
    write_text(dir / (prefix + "_misclassified.csv"),
               ftdc::misclassification_csv(ftdc::misclassification_report(r), r));
}

void print_report(const std::string& label, const ftdc::EvaluationReport& r) {
    std::printf("%s %s: accuracy %.4f +/- %.4f, sensitivity %.4f, specificity %.4f (%d reps)\n", label.c_str(),
                ftdc::to_string(r.method).c_str(), r.accuracy.mean, r.accuracy.sd, r.sensitivity.mean,
                r.specificity.mean, r.reps);
    for (const auto& s : r.steps) {
        const auto& m = r.headline_mode == ftdc::StepMode::OracleRouted ? s.oracle : s.cascade;
        std::printf("  %-32s acc %.4f  sens %.4f  spec %.4f  AUC %.4f\n", s.name.c_str(), m.accuracy.mean,
                    m.sensitivity.mean, m.specificity.mean, s.roc.auc);
    }
    for (const auto& w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

json model_envelope(json model, const ftdc::Cohort& cohort, bool with_demographics) {
    return {{"model", std::move(model)},
            {"feature_columns", cohort.design_matrix(with_demographics).columns},
            {"with_demographics", with_demographics}};
}

void save_model(const EvalArgs& a, const ftdc::Cohort& cohort, ftdc::Method method, const ftdc::EvalOptions& o,
                const ftdc::HierarchySpec& spec, bool flat) {
    stage("save model", [&] {
        const auto x = cohort.design_matrix(a.with_demographics).values;
        json model;
        if (flat) {
            ftdc::FlatOptions fo;
            fo.pca = o.train.pca;
            fo.svm = o.train.svm;
            fo.accept_unconverged = true;
            model = ftdc::train_flat(x, cohort.labels(), method, fo).to_json();
        } else {
            auto to = o.train;
            to.accept_unconverged = true;
            model = ftdc::train_cascade(x, cohort.labels(), spec, method, to).to_json();
        }
        write_text(a.save_model, model_envelope(model, cohort, a.with_demographics).dump(2) + "\n");
        return 0;
    });
    std::printf("model written to %s\n", a.save_model.c_str());
}

int run_evaluate(EvalArgs& a, CLI::App& cmd, const std::string& compare) {
    if (!a.config.empty()) apply_config(cmd, read_json(a.config));
    if (!compare.empty() && compare != "hier-vs-flat" && compare != "susan-vs-heat")
        throw ftdc::UsageError("unknown comparison '" + compare + "' (hier-vs-flat | susan-vs-heat)");
    check_eval_args(a);
    const auto method = parse_method_or_throw(a.method);
    const auto o = eval_options(a);
    const auto spec = stage("hierarchy", [&] { return ftdc::resolve_hierarchy(a.hierarchy); });
    const fs::path out = a.out;
    fs::create_directories(out);

    if (compare == "susan-vs-heat") {
        if (a.extract.subjects.empty()) throw ftdc::UsageError("susan-vs-heat needs --subjects and --mesh-dir");
        std::string table = ftdc::report_table_header();
        for (auto sm : {ftdc::SmootherKind::Susan, ftdc::SmootherKind::Heat}) {
            const auto cohort = eval_cohort(a, sm);
            const auto plan = stage("folds", [&] { return ftdc::make_folds(cohort, a.k, a.reps, *a.seed); });
            const auto r = stage("evaluate " + ftdc::to_string(sm),
                                 [&] { return ftdc::evaluate_cascade(cohort, spec, method, plan, o); });
            write_report(out, ftdc::to_string(sm), r);
            table += ftdc::report_table_csv(r, ftdc::to_string(sm));
            print_report(ftdc::to_string(sm), r);
        }
        write_text(out / "compare_susan_vs_heat.csv", table);
        std::printf("reports written to %s\n", out.string().c_str());
        return kOk;
    }

    const auto cohort = eval_cohort(a);
    const auto plan = stage("folds", [&] { return ftdc::make_folds(cohort, a.k, a.reps, *a.seed); });
    for (const auto& w : plan.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    const bool want_cascade = compare == "hier-vs-flat" || a.model == "cascade" || a.model == "both";
    const bool want_flat = compare == "hier-vs-flat" || a.model == "flat" || a.model == "both";
    if (!want_cascade && !want_flat) throw ftdc::UsageError("unknown model family '" + a.model + "'");
    std::string table = ftdc::report_table_header();
    if (want_cascade) {
        const auto r = stage("evaluate cascade", [&] { return ftdc::evaluate_cascade(cohort, spec, method, plan, o); });
        write_report(out, "cascade", r);
        table += ftdc::report_table_csv(r, "hierarchical");
        print_report("hierarchical", r);
    }
    if (want_flat) {
        const auto r = stage("evaluate flat", [&] { return ftdc::evaluate_flat(cohort, method, plan, o); });
        write_report(out, "flat", r);
        table += ftdc::report_table_csv(r, "flat");
        print_report("flat", r);
    }
    if (compare == "hier-vs-flat") write_text(out / "compare_hier_vs_flat.csv", table);
    else write_text(out / "table.csv", table);
    if (!a.save_model.empty()) save_model(a, cohort, method, o, spec, want_flat && !want_cascade);
    std::printf("reports written to %s\n", out.string().c_str());
    return kOk;
}

// --- regions ----------------------------------------------------------------

struct RegionArgs {
    std::string cohort;
    std::string model;
    std::string method = "svm";
    std::string hierarchy = "default";
    std::optional<double> pca_fraction;
    std::optional<std::size_t> pca_components;
    bool no_pca = false;
    bool with_demographics = false;
    std::size_t top = 20;
    std::string reference_mesh;
    std::string atlas;
    std::string out;
};

int run_regions(const RegionArgs& a) {
    const auto cohort = stage("load cohort", [&] { return ftdc::load_cohort(a.cohort); });
    bool with_demo = a.with_demographics;
    json model_json;
    if (!a.model.empty()) {
        const json env = read_json(a.model);
        model_json = stage("load model", [&] { return env.at("model"); });
        with_demo = env.value("with_demographics", false);
        const auto cols = cohort.design_matrix(with_demo).columns;
        if (env.contains("feature_columns") && env.at("feature_columns").get<std::vector<std::string>>() != cols)
            throw ftdc::DataError("regions: cohort feature columns do not match the model's");
    } else {
        EvalArgs e;
        e.pca_fraction = a.pca_fraction;
        e.pca_components = a.pca_components;
        e.no_pca = a.no_pca;
        ftdc::TrainOptions to;
        to.pca = pca_policy(e);
        to.accept_unconverged = true;
        const auto method = parse_method_or_throw(a.method);
        const auto spec = stage("hierarchy", [&] { return ftdc::resolve_hierarchy(a.hierarchy); });
        model_json = stage("train", [&] {
            return ftdc::train_cascade(cohort.design_matrix(with_demo).values, cohort.labels(), spec, method, to)
                .to_json();
        });
    }

    std::vector<std::pair<std::string, ftdc::RegionMap>> maps;
    stage("regions", [&] {
        const std::string kind = model_json.at("kind").get<std::string>();
        if (kind == "cascade") {
            const auto model = ftdc::CascadeModel::from_json(model_json);
            for (std::size_t s = 0; s < model.steps().size(); ++s)
                maps.emplace_back(model.spec().step(s).name, ftdc::step_regions(cohort, model, s, with_demo));
        } else {
            const auto model = ftdc::FlatModel::from_json(model_json);
            if (model.heads().empty())
                throw ftdc::DataError("regions: " + ftdc::to_string(model.method()) +
                                      " flat model has no linear weights");
            ftdc::FeatureMatrix x = cohort.design_matrix(with_demo);
            x.values.rowwise() -= model.pca().means.transpose();
            for (std::size_t c = 0; c < model.heads().size(); ++c)
                maps.emplace_back(std::string(ftdc::to_string(static_cast<ftdc::Diagnosis>(c))) + " vs rest",
                                  ftdc::discriminative_regions(x, model.pca().directions,
                                                               *model.heads()[c].linear_weights()));
        }
        return 0;
    });

    const fs::path out = a.out;
    std::string csv = "step,rank,feature,r,abs_r\n";
    for (std::size_t i = 0; i < maps.size(); ++i) {
        csv += ftdc::region_csv(maps[i].second, maps[i].first);
        write_text(out / ("regions_" + std::to_string(i + 1) + ".svg"),
                   ftdc::region_svg(maps[i].second, maps[i].first, a.top));
        std::printf("%s:", maps[i].first.c_str());
        for (std::size_t r = 0; r < std::min<std::size_t>(5, maps[i].second.ranking.size()); ++r)
            std::printf(" %s", maps[i].second.names[static_cast<std::size_t>(maps[i].second.ranking[r])].c_str());
        std::printf("\n");
    }
    write_text(out / "regions.csv", csv);

    // Spectral features are also reported back on the atlas regions.
    if (!a.reference_mesh.empty() || !a.atlas.empty()) {
        if (a.reference_mesh.empty() || a.atlas.empty())
            throw ftdc::UsageError("--reference-mesh and --atlas go together");
        stage("back-projection", [&] {
            const auto mesh = ftdc::read_mesh(a.reference_mesh);
            const auto atlas = ftdc::read_atlas(a.atlas, mesh.vertex_count());
            std::string bp = "step,region,r_backprojected\n";
            for (const auto& [name, map] : maps) {
                std::vector<int> spec_cols;
                for (std::size_t f = 0; f < map.names.size(); ++f)
                    if (map.names[f].rfind("spec_", 0) == 0) spec_cols.push_back(static_cast<int>(f));
                if (spec_cols.empty()) throw ftdc::DataError("no spectral feature columns to back-project");
                if (spec_cols.size() > mesh.vertex_count())
                    throw ftdc::DataError("more spectral columns than mesh vertices");
                const auto basis = ftdc::build_basis(mesh, spec_cols.size());
                Eigen::VectorXd coef(static_cast<Eigen::Index>(spec_cols.size()));
                for (std::size_t i = 0; i < spec_cols.size(); ++i) coef[static_cast<Eigen::Index>(i)] = map.r(spec_cols[i], 0);
                const auto per_region = ftdc::back_project_spectral(coef, basis, atlas);
                for (Eigen::Index r = 0; r < per_region.size(); ++r) {
                    char buf[64];
                    std::snprintf(buf, sizeof buf, "%.9g", per_region[r]);
                    bp += name + "," + atlas.region_names()[static_cast<std::size_t>(r)] + "," + buf + "\n";
                }
            }
            write_text(out / "regions_backprojected.csv", bp);
            return 0;
        });
    }
    std::printf("region rankings written to %s\n", out.string().c_str());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical dementia classification from cortical thickness"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort CSV");
    std::string synth_spec;
    std::string synth_out;
    std::string synth_preset;
    double synth_noise = 0.35;
    std::optional<std::uint64_t> synth_seed;
    std::string synth_mesh_dir;
    int synth_subdiv = 3;
    synth->add_option("--spec", synth_spec, "Synthetic spec JSON {counts, templates|template_rules, std, regions, seed}");
    synth->add_option("--preset", synth_preset, "Built-in synthetic cohort instead of --spec: niftd");
    synth->add_option("--noise", synth_noise, "Within-class std in mm for --preset")->capture_default_str();
    synth->add_option("--seed", synth_seed, "Override the seed of the synthetic spec");
    synth->add_option("--out", synth_out, "Output cohort CSV")->required();
    synth->add_option("--mesh-dir", synth_mesh_dir, "Also write per-subject surface pairs and atlas.csv here");
    synth->add_option("--subdivisions", synth_subdiv, "Icosphere subdivision level for --mesh-dir")->capture_default_str();

    // extract
    auto* extract = app.add_subcommand("extract", "Thickness, smoothing and feature extraction from surface pairs");
    ExtractArgs ex;
    std::string extract_out;
    add_extract_options(extract, ex, true);
    extract->add_option("--out", extract_out, "Output cohort CSV with extracted features")->required();

    // evaluate / compare
    auto* evaluate = app.add_subcommand("evaluate", "Repeated k-fold evaluation of cascade and/or flat models");
    EvalArgs ev;
    add_eval_options(evaluate, ev);
    evaluate->add_option("--compare", ev.compare, "Paired experiment: hier-vs-flat | susan-vs-heat");

    auto* compare = app.add_subcommand("compare", "Paired experiment (same options as evaluate)");
    EvalArgs cmp;
    add_eval_options(compare, cmp);
    compare->add_option("--what", cmp.compare, "hier-vs-flat | susan-vs-heat")->required();

    // regions
    auto* regions = app.add_subcommand("regions", "Discriminative feature ranking R = X X^T Y_PCA Y_C per step");
    RegionArgs rg;
    regions->add_option("--cohort", rg.cohort, "Cohort CSV")->required();
    regions->add_option("--model", rg.model, "Model JSON from evaluate --save-model (trained here when absent)");
    regions->add_option("--method", rg.method, "Classifier when training here: svm | lda")->capture_default_str();
    regions->add_option("--hierarchy", rg.hierarchy, "Cascade tree when training here")->capture_default_str();
    regions->add_option("--pca-fraction", rg.pca_fraction, "PCA explained-variance fraction when training here");
    regions->add_option("--pca-components", rg.pca_components, "Fixed PCA components when training here");
    regions->add_flag("--no-pca", rg.no_pca, "No PCA when training here");
    regions->add_flag("--with-demographics", rg.with_demographics, "Append demographics when training here");
    regions->add_option("--top", rg.top, "Bars per SVG chart")->capture_default_str();
    regions->add_option("--reference-mesh", rg.reference_mesh, "Mesh for back-projecting spectral features");
    regions->add_option("--atlas", rg.atlas, "Atlas CSV for back-projecting spectral features");
    regions->add_option("--out", rg.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (synth->parsed()) {
            if (synth_spec.empty() == synth_preset.empty()) throw ftdc::UsageError("give exactly one of --spec or --preset");
            ftdc::SyntheticSpec spec;
            if (!synth_preset.empty()) {
                if (synth_preset != "niftd") throw ftdc::UsageError("unknown preset '" + synth_preset + "'");
                spec = ftdc::SyntheticSpec::niftd_preset(synth_noise, synth_seed.value_or(0));
            } else {
                spec = stage("spec", [&] { return ftdc::SyntheticSpec::from_json(read_json(synth_spec)); });
            }
            if (synth_seed) spec.seed = *synth_seed;
            const auto cohort = stage("generate", [&] { return ftdc::generate_synthetic(spec); });
            stage("write", [&] {
                ftdc::save_cohort(cohort, synth_out);
                return 0;
            });
            if (!synth_mesh_dir.empty())
                stage("meshes", [&] { return ftdc::write_mesh_cohort(cohort, synth_mesh_dir, synth_subdiv); });
            print_counts(cohort);
            return kOk;
        }
        if (extract->parsed()) {
            const auto cohort = run_extraction(ex, extract_options(ex));
            stage("write", [&] {
                ftdc::save_cohort(cohort, extract_out);
                return 0;
            });
            std::printf("features: %zu\n", cohort.feature_count());
            print_counts(cohort);
            return kOk;
        }
        if (evaluate->parsed()) return run_evaluate(ev, *evaluate, ev.compare);
        if (compare->parsed()) {
            if (cmp.compare != "hier-vs-flat" && cmp.compare != "susan-vs-heat")
                throw ftdc::UsageError("--what must be hier-vs-flat or susan-vs-heat");
            return run_evaluate(cmp, *compare, cmp.compare);
        }
        if (regions->parsed()) return run_regions(rg);
    } catch (const ftdc::UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return kUsage;
    } catch (const ftdc::NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return kNumerical;
    } catch (const ftdc::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kData;
    }
    return kUsage;
}
