#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "ftdc/feature_matrix.hpp"
#include "ftdc/labels.hpp"

namespace ftdc {

enum class Sex : std::uint8_t { M, F };

struct Subject {
    std::string id;
    Diagnosis label = Diagnosis::CN;
    double age = 0.0;
    Sex sex = Sex::M;
    double mmse = 0.0;
    double education = 0.0;
    std::vector<double> features;
};

struct SyntheticSpec;

struct IngestedProvenance {
    std::string path;
};
struct SyntheticProvenance {
    std::uint64_t seed = 0;
    nlohmann::json spec;
};
using Provenance = std::variant<IngestedProvenance, SyntheticProvenance>;

// An immutable labeled cohort. Construction validates: non-empty, unique ids,
// one feature name per feature column, equal-length finite feature vectors.
class Cohort {
public:
    Cohort(std::vector<Subject> subjects, std::vector<std::string> feature_names, Provenance provenance);

    const std::vector<Subject>& subjects() const { return subjects_; }
    const std::vector<std::string>& feature_names() const { return feature_names_; }
    const Provenance& provenance() const { return provenance_; }
    std::size_t size() const { return subjects_.size(); }
    std::size_t feature_count() const { return feature_names_.size(); }

    std::array<int, kNumDiagnoses> class_counts() const;
    std::vector<Diagnosis> labels() const;

    // Features as a matrix; demographics (age, sex as 0/1 with F=1, mmse,
    // education) appended as extra columns when requested.
    FeatureMatrix design_matrix(bool with_demographics = false) const;

    // Same subjects and metadata with the feature block replaced.
    Cohort with_features(const FeatureMatrix& features) const;

private:
    std::vector<Subject> subjects_;
    std::vector<std::string> feature_names_;
    Provenance provenance_;
};

// Reads `id,label,age,sex,mmse,education,<features...>`. When
// `expected_features` is set the feature column count must match it.
Cohort load_cohort(const std::filesystem::path& path, std::optional<std::size_t> expected_features = std::nullopt);
Cohort parse_cohort_csv(const std::string& text, const std::string& source = "<memory>",
                        std::optional<std::size_t> expected_features = std::nullopt);

// Reals are written with 9 significant digits.
std::string cohort_to_csv(const Cohort& cohort);
void save_cohort(const Cohort& cohort, const std::filesystem::path& path);

// Additive thickness offset applied to a block of regions for a set of labels.
struct TemplateRule {
    LabelSet labels;
    int first_region = 0;  // inclusive
    int last_region = 0;   // exclusive
    double delta_mm = 0.0;
};

struct SyntheticSpec {
    std::array<int, kNumDiagnoses> counts{};
    // One template per label (canonical order), each of length `regions`.
    std::array<std::vector<double>, kNumDiagnoses> templates;
    double noise_std_mm = 0.0;
    int regions = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> region_names;

    // Builds templates from a base thickness plus rules.
    static SyntheticSpec from_rules(std::array<int, kNumDiagnoses> counts, int regions, double base_mm,
                                    const std::vector<TemplateRule>& rules, double noise_std_mm, std::uint64_t seed);

    // NIFTD class counts (84/24/30/25/41) over a 68-region layout with atrophy
    // in frontal, insular, anterior-temporal, temporoparietal and language blocks.
    // Noise around 0.35 mm gives a non-trivial five-class problem.
    static SyntheticSpec niftd_preset(double noise_std_mm, std::uint64_t seed);

    // Accepts {counts, templates | template_rules, std, regions, seed[, region_names]}.
    static SyntheticSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    void validate() const;
};

Cohort generate_synthetic(const SyntheticSpec& spec);

}  // namespace ftdc
