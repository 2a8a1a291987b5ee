#pragma once

// Shared test fixtures.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ftdc/cohort.hpp"
#include "ftdc/mesh.hpp"

namespace fixture {

// Planar grid with value 1 left of the seam and 4 right of it.
struct TwoPlateau {
    ftdc::TriMesh mesh;
    Eigen::VectorXd clean;
};

inline TwoPlateau two_plateau(int nx = 50, int ny = 30, double spacing_mm = 1.0) {
    TwoPlateau f{ftdc::make_grid(nx, ny, spacing_mm), {}};
    f.clean.resize(static_cast<Eigen::Index>(f.mesh.vertex_count()));
    for (std::size_t v = 0; v < f.mesh.vertex_count(); ++v)
        f.clean[static_cast<Eigen::Index>(v)] = f.mesh.vertices()[v].x() < 0.5 * (nx - 1) * spacing_mm ? 1.0 : 4.0;
    return f;
}

// Small cohort with explicit per-label feature rows.
inline ftdc::Cohort cohort_from_rows(const std::vector<ftdc::Diagnosis>& labels,
                                     const std::vector<std::vector<double>>& rows) {
    std::vector<ftdc::Subject> subjects;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        ftdc::Subject s;
        s.id = "s" + std::to_string(i);
        s.label = labels[i];
        s.age = 65;
        s.mmse = 25;
        s.education = 14;
        s.features = rows[i];
        subjects.push_back(std::move(s));
    }
    std::vector<std::string> names;
    for (std::size_t c = 0; c < rows.front().size(); ++c) names.push_back("f" + std::to_string(c));
    return ftdc::Cohort(std::move(subjects), std::move(names), ftdc::IngestedProvenance{"<test>"});
}

// Noise-free cohort: each label's template is 3 + 1 mm on its own block of 4 regions.
inline ftdc::SyntheticSpec separable_spec(std::array<int, ftdc::kNumDiagnoses> counts, std::uint64_t seed,
                                          double noise = 0.0) {
    std::vector<ftdc::TemplateRule> rules;
    for (int d = 0; d < ftdc::kNumDiagnoses; ++d)
        rules.push_back({ftdc::LabelSet{ftdc::kAllDiagnoses[static_cast<std::size_t>(d)]}, 4 * d, 4 * d + 4, 1.0});
    return ftdc::SyntheticSpec::from_rules(counts, 20, 3.0, rules, noise, seed);
}

// The same cohort with the label one-hot appended as five extra columns.
inline ftdc::Cohort with_label_columns(const ftdc::Cohort& c) {
    std::vector<ftdc::Subject> subjects = c.subjects();
    std::vector<std::string> names = c.feature_names();
    for (int d = 0; d < ftdc::kNumDiagnoses; ++d) names.push_back("onehot_" + std::to_string(d));
    for (auto& s : subjects)
        for (int d = 0; d < ftdc::kNumDiagnoses; ++d) s.features.push_back(ftdc::index_of(s.label) == d ? 1.0 : 0.0);
    return ftdc::Cohort(std::move(subjects), std::move(names), c.provenance());
}

}  // namespace fixture

namespace fixture {

struct SvmProblem {
    std::string name;
    Eigen::MatrixXd x;
    std::vector<int> y;
    double C;
};

// Small 1-D and 2-D problems, separable and not, for the dual-objective oracle.
inline std::vector<SvmProblem> svm_problems() {
    std::vector<SvmProblem> out;
    auto add = [&](std::string name, std::vector<std::vector<double>> rows, std::vector<int> y, double C) {
        Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < rows[i].size(); ++j)
                x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        out.push_back({std::move(name), std::move(x), std::move(y), C});
    };
    add("1d-symmetric", {{-2}, {-1}, {1}, {2}}, {-1, -1, 1, 1}, 10.0);
    add("1d-overlap", {{-2}, {0.5}, {-0.5}, {2}, {1}}, {-1, -1, 1, 1, 1}, 1.0);
    add("1d-small-C", {{-3}, {-1}, {0.2}, {1}, {2.5}, {-0.4}}, {-1, -1, -1, 1, 1, 1}, 0.1);
    add("2d-separable", {{0, 0}, {1, 0}, {0, 1}, {2, 2}, {3, 2}, {2, 3}}, {-1, -1, -1, 1, 1, 1}, 100.0);
    add("2d-xor", {{0, 0}, {1, 1}, {0, 1}, {1, 0}}, {1, 1, -1, -1}, 1.0);
    add("2d-noisy", {{0.2, 1.1}, {1.5, -0.3}, {-0.7, 0.4}, {1.2, 1.9}, {0.1, -1.2}, {2.0, 0.5}},
        {1, 1, -1, 1, -1, 1}, 2.0);
    add("2d-unbalanced", {{0, 0}, {0.5, 0.2}, {1, 1}, {3, 3}, {2.5, 1.0}}, {-1, -1, -1, -1, 1}, 5.0);
    return out;
}

}  // namespace fixture

namespace fixture {

inline constexpr int kBlockFirst = 20;
inline constexpr int kBlockLast = 30;

// CN versus dementia differ only on regions [kBlockFirst, kBlockLast).
inline ftdc::Cohort block_cohort(std::uint64_t seed) {
    const std::vector<ftdc::TemplateRule> rules = {{ftdc::groups::Dementia, kBlockFirst, kBlockLast, -0.5}};
    return ftdc::generate_synthetic(
        ftdc::SyntheticSpec::from_rules({40, 10, 10, 10, 10}, 68, 2.5, rules, 0.25, seed));
}

}  // namespace fixture
