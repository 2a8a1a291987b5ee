#include "ftdc/cohort.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "ftdc/errors.hpp"

namespace ftdc {

namespace {

const std::array<std::string, 6> kFixedColumns = {"id", "label", "age", "sex", "mmse", "education"};

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_real(const std::string& cell, const std::string& what, std::size_t line_no) {
    if (cell.empty()) throw DataError("line " + std::to_string(line_no) + ": empty " + what + " cell");
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end != cell.c_str() + cell.size())
        throw DataError("line " + std::to_string(line_no) + ": non-numeric " + what + " cell '" + cell + "'");
    if (!std::isfinite(v))
        throw DataError("line " + std::to_string(line_no) + ": non-finite " + what + " value");
    return v;
}

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

struct Demographics {
    double age_mean, age_sd, mmse_mean, mmse_sd, edu_mean, edu_sd;
};

// Per-group demographic means/SDs, NIFTD-like.
Demographics demographics_for(Diagnosis d) {
    switch (d) {
        case Diagnosis::CN: return {68.3, 5.51, 28.8, 1.21, 13.9, 3.10};
        case Diagnosis::AD: return {72.1, 5.0, 24.0, 6.0, 13.0, 3.1};
        default: return {68.5, 6.0, 23.2, 6.7, 13.4, 2.96};
    }
}

constexpr double kMaleFraction = 99.0 / 204.0;

}  // namespace

Cohort::Cohort(std::vector<Subject> subjects, std::vector<std::string> feature_names, Provenance provenance)
    : subjects_(std::move(subjects)), feature_names_(std::move(feature_names)), provenance_(std::move(provenance)) {
    if (subjects_.empty()) throw DataError("cohort is empty");
    std::set<std::string> ids;
    for (const auto& s : subjects_) {
        if (s.id.empty()) throw DataError("subject with missing id");
        if (!ids.insert(s.id).second) throw DataError("duplicate subject id '" + s.id + "'");
        if (s.features.size() != feature_names_.size())
            throw DataError("subject '" + s.id + "' has " + std::to_string(s.features.size()) +
                            " features, expected " + std::to_string(feature_names_.size()));
        for (double v : s.features)
            if (!std::isfinite(v)) throw DataError("subject '" + s.id + "' has a non-finite feature");
    }
}

std::array<int, kNumDiagnoses> Cohort::class_counts() const {
    std::array<int, kNumDiagnoses> counts{};
    for (const auto& s : subjects_) ++counts[static_cast<std::size_t>(index_of(s.label))];
    return counts;
}

std::vector<Diagnosis> Cohort::labels() const {
    std::vector<Diagnosis> out;
    out.reserve(subjects_.size());
    for (const auto& s : subjects_) out.push_back(s.label);
    return out;
}

FeatureMatrix Cohort::design_matrix(bool with_demographics) const {
    const auto d = static_cast<Eigen::Index>(feature_names_.size());
    const Eigen::Index extra = with_demographics ? 4 : 0;
    FeatureMatrix m;
    m.values.resize(static_cast<Eigen::Index>(subjects_.size()), d + extra);
    m.columns = feature_names_;
    if (with_demographics) m.columns.insert(m.columns.end(), {"age", "sex", "mmse", "education"});
    for (std::size_t i = 0; i < subjects_.size(); ++i) {
        const auto& s = subjects_[i];
        const auto r = static_cast<Eigen::Index>(i);
        for (Eigen::Index c = 0; c < d; ++c) m.values(r, c) = s.features[static_cast<std::size_t>(c)];
        if (with_demographics) {
            m.values(r, d) = s.age;
            m.values(r, d + 1) = s.sex == Sex::F ? 1.0 : 0.0;
            m.values(r, d + 2) = s.mmse;
            m.values(r, d + 3) = s.education;
        }
        m.row_ids.push_back(s.id);
    }
    return m;
}

Cohort Cohort::with_features(const FeatureMatrix& features) const {
    if (features.rows() != static_cast<Eigen::Index>(subjects_.size()))
        throw DataError("replacement features have the wrong number of rows");
    auto subjects = subjects_;
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        subjects[i].features.resize(static_cast<std::size_t>(features.cols()));
        for (Eigen::Index c = 0; c < features.cols(); ++c)
            subjects[i].features[static_cast<std::size_t>(c)] = features.values(static_cast<Eigen::Index>(i), c);
    }
    return Cohort(std::move(subjects), features.columns, provenance_);
}

Cohort parse_cohort_csv(const std::string& text, const std::string& source,
                        std::optional<std::size_t> expected_features) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;

    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            header = split_csv_line(line);
            break;
        }
    }
    if (header.empty()) throw DataError(source + ": missing header row");
    if (header.size() < kFixedColumns.size())
        throw DataError(source + ": header must start with id,label,age,sex,mmse,education");
    for (std::size_t c = 0; c < kFixedColumns.size(); ++c) {
        std::string h = header[c];
        std::transform(h.begin(), h.end(), h.begin(), [](unsigned char ch) { return std::tolower(ch); });
        if (h != kFixedColumns[c])
            throw DataError(source + ": header column " + std::to_string(c + 1) + " must be '" + kFixedColumns[c] + "'");
    }
    std::vector<std::string> feature_names(header.begin() + static_cast<std::ptrdiff_t>(kFixedColumns.size()),
                                           header.end());
    if (expected_features && *expected_features != feature_names.size())
        throw DataError(source + ": expected " + std::to_string(*expected_features) + " feature columns, found " +
                        std::to_string(feature_names.size()));

    std::vector<Subject> subjects;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw DataError(source + ": inconsistent row width at line " + std::to_string(line_no) + " (" +
                            std::to_string(cells.size()) + " cells, header has " + std::to_string(header.size()) + ")");
        Subject s;
        s.id = cells[0];
        if (s.id.empty()) throw DataError(source + ": missing id at line " + std::to_string(line_no));
        if (!seen.insert(s.id).second)
            throw DataError(source + ": duplicate id '" + s.id + "' at line " + std::to_string(line_no));
        auto label = parse_diagnosis(cells[1]);
        if (!label) throw DataError(source + ": unknown label '" + cells[1] + "' at line " + std::to_string(line_no));
        s.label = *label;
        s.age = parse_real(cells[2], "age", line_no);
        if (cells[3] == "M" || cells[3] == "m") {
            s.sex = Sex::M;
        } else if (cells[3] == "F" || cells[3] == "f") {
            s.sex = Sex::F;
        } else {
            throw DataError(source + ": sex must be M or F at line " + std::to_string(line_no));
        }
        s.mmse = parse_real(cells[4], "mmse", line_no);
        if (s.mmse < 0.0 || s.mmse > 30.0)
            throw DataError(source + ": mmse outside [0,30] at line " + std::to_string(line_no));
        s.education = parse_real(cells[5], "education", line_no);
        s.features.reserve(feature_names.size());
        for (std::size_t c = kFixedColumns.size(); c < cells.size(); ++c)
            s.features.push_back(parse_real(cells[c], "feature", line_no));
        subjects.push_back(std::move(s));
    }
    if (subjects.empty()) throw DataError(source + ": empty data section");
    return Cohort(std::move(subjects), std::move(feature_names), IngestedProvenance{source});
}

Cohort load_cohort(const std::filesystem::path& path, std::optional<std::size_t> expected_features) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open cohort file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_cohort_csv(buf.str(), path.string(), expected_features);
}

std::string cohort_to_csv(const Cohort& cohort) {
    std::string out;
    for (std::size_t c = 0; c < kFixedColumns.size(); ++c) {
        if (c) out += ',';
        out += kFixedColumns[c];
    }
    for (const auto& name : cohort.feature_names()) out += "," + name;
    out += '\n';
    for (const auto& s : cohort.subjects()) {
        out += s.id;
        out += ',';
        out += to_string(s.label);
        out += ',' + format_real(s.age);
        out += s.sex == Sex::M ? ",M" : ",F";
        out += ',' + format_real(s.mmse);
        out += ',' + format_real(s.education);
        for (double v : s.features) out += ',' + format_real(v);
        out += '\n';
    }
    return out;
}

void save_cohort(const Cohort& cohort, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write cohort file " + path.string());
    out << cohort_to_csv(cohort);
}

// ---------------------------------------------------------------------------
// Synthetic cohorts

SyntheticSpec SyntheticSpec::from_rules(std::array<int, kNumDiagnoses> counts, int regions, double base_mm,
                                        const std::vector<TemplateRule>& rules, double noise_std_mm,
                                        std::uint64_t seed) {
    SyntheticSpec spec;
    spec.counts = counts;
    spec.regions = regions;
    spec.noise_std_mm = noise_std_mm;
    spec.seed = seed;
    for (auto& t : spec.templates) t.assign(static_cast<std::size_t>(std::max(regions, 0)), base_mm);
    for (const auto& rule : rules) {
        if (rule.first_region < 0 || rule.last_region > regions || rule.first_region >= rule.last_region)
            throw UsageError("template rule region range [" + std::to_string(rule.first_region) + "," +
                             std::to_string(rule.last_region) + ") outside 0.." + std::to_string(regions));
        for (auto d : rule.labels.members()) {
            auto& t = spec.templates[static_cast<std::size_t>(index_of(d))];
            for (int r = rule.first_region; r < rule.last_region; ++r) t[static_cast<std::size_t>(r)] += rule.delta_mm;
        }
    }
    return spec;
}

SyntheticSpec SyntheticSpec::niftd_preset(double noise_std_mm, std::uint64_t seed) {
    using D = Diagnosis;
    // Region blocks: frontal [0,16), insular [16,20), anterior temporal [20,28),
    // temporoparietal [28,40), language [40,48), remaining cortex [48,68).
    // nfvPPA sits halfway between bvFTD and svPPA, milder frontal-insular
    // atrophy plus partial temporal and language involvement.
    const std::vector<TemplateRule> rules = {
        {groups::Dementia, 0, 68, -0.10},
        {LabelSet{D::bvFTD}, 0, 20, -0.40},
        {LabelSet{D::svPPA}, 20, 28, -0.50},
        {LabelSet{D::svPPA}, 40, 48, -0.40},
        {LabelSet{D::nfvPPA}, 0, 20, -0.20},
        {LabelSet{D::nfvPPA}, 20, 28, -0.25},
        {LabelSet{D::nfvPPA}, 40, 48, -0.20},
        {LabelSet{D::AD}, 28, 40, -0.40},
    };
    auto spec = from_rules({84, 24, 30, 25, 41}, 68, 2.5, rules, noise_std_mm, seed);
    spec.region_names.clear();
    auto add_block = [&](const char* prefix, int n) {
        for (int i = 0; i < n; ++i) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%s_%02d", prefix, i);
            spec.region_names.emplace_back(buf);
        }
    };
    add_block("frontal", 16);
    add_block("insula", 4);
    add_block("anttemporal", 8);
    add_block("temporoparietal", 12);
    add_block("language", 8);
    add_block("cortex", 20);
    return spec;
}

void SyntheticSpec::validate() const {
    if (regions <= 0) throw UsageError("synthetic spec: regions must be positive");
    int total = 0;
    int trainable = 0;
    for (int c : counts) {
        if (c < 0) throw UsageError("synthetic spec: negative class count");
        total += c;
        trainable += c >= 2 ? 1 : 0;
    }
    if (total == 0) throw UsageError("synthetic spec: all counts are zero");
    if (trainable < 2) throw UsageError("synthetic spec: need at least two labels with count >= 2");
    if (!(noise_std_mm >= 0.0) || !std::isfinite(noise_std_mm))
        throw UsageError("synthetic spec: std must be a finite non-negative number");
    for (const auto& t : templates)
        if (t.size() != static_cast<std::size_t>(regions))
            throw UsageError("synthetic spec: every template must have length " + std::to_string(regions));
    if (!region_names.empty() && region_names.size() != static_cast<std::size_t>(regions))
        throw UsageError("synthetic spec: region_names length must equal regions");
}

SyntheticSpec SyntheticSpec::from_json(const nlohmann::json& j) {
    try {
        std::array<int, kNumDiagnoses> counts{};
        const auto& jc = j.at("counts");
        for (auto it = jc.begin(); it != jc.end(); ++it) {
            auto d = parse_diagnosis(it.key());
            if (!d) throw DataError("synthetic spec: unknown label '" + it.key() + "' in counts");
            counts[static_cast<std::size_t>(index_of(*d))] = it.value().get<int>();
        }
        const int regions = j.at("regions").get<int>();
        const double noise = j.at("std").get<double>();
        const auto seed = j.at("seed").get<std::uint64_t>();

        SyntheticSpec spec;
        if (j.contains("templates")) {
            spec.counts = counts;
            spec.regions = regions;
            spec.noise_std_mm = noise;
            spec.seed = seed;
            const auto& jt = j.at("templates");
            for (auto d : kAllDiagnoses) {
                const auto key = std::string(to_string(d));
                if (jt.contains(key)) {
                    spec.templates[static_cast<std::size_t>(index_of(d))] = jt.at(key).get<std::vector<double>>();
                } else if (counts[static_cast<std::size_t>(index_of(d))] == 0) {
                    spec.templates[static_cast<std::size_t>(index_of(d))].assign(static_cast<std::size_t>(regions), 0.0);
                } else {
                    throw DataError("synthetic spec: missing template for " + key);
                }
            }
        } else if (j.contains("template_rules")) {
            const auto& jr = j.at("template_rules");
            const double base = jr.value("base", 2.5);
            std::vector<TemplateRule> rules;
            for (const auto& r : jr.at("rules")) {
                TemplateRule rule;
                for (const auto& name : r.at("labels")) {
                    auto set = parse_label_set(name.get<std::string>());
                    if (!set) throw DataError("synthetic spec: unknown label '" + name.get<std::string>() + "' in rule");
                    rule.labels = rule.labels | *set;
                }
                const auto range = r.at("regions").get<std::vector<int>>();
                if (range.size() != 2) throw DataError("synthetic spec: rule regions must be [first, last)");
                rule.first_region = range[0];
                rule.last_region = range[1];
                rule.delta_mm = r.at("delta").get<double>();
                rules.push_back(rule);
            }
            spec = from_rules(counts, regions, base, rules, noise, seed);
        } else {
            throw DataError("synthetic spec: needs 'templates' or 'template_rules'");
        }
        if (j.contains("region_names")) spec.region_names = j.at("region_names").get<std::vector<std::string>>();
        spec.validate();
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("synthetic spec: ") + e.what());
    }
}

nlohmann::json SyntheticSpec::to_json() const {
    nlohmann::json j;
    for (auto d : kAllDiagnoses) j["counts"][std::string(to_string(d))] = counts[static_cast<std::size_t>(index_of(d))];
    for (auto d : kAllDiagnoses)
        j["templates"][std::string(to_string(d))] = templates[static_cast<std::size_t>(index_of(d))];
    j["std"] = noise_std_mm;
    j["regions"] = regions;
    j["seed"] = seed;
    if (!region_names.empty()) j["region_names"] = region_names;
    return j;
}

Cohort generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    std::vector<std::string> names = spec.region_names;
    if (names.empty()) {
        for (int r = 0; r < spec.regions; ++r) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "region_%03d", r);
            names.emplace_back(buf);
        }
    }

    std::vector<Subject> subjects;
    for (auto d : kAllDiagnoses) {
        const auto li = static_cast<std::size_t>(index_of(d));
        const auto& tmpl = spec.templates[li];
        const auto demo = demographics_for(d);
        for (int i = 0; i < spec.counts[li]; ++i) {
            Subject s;
            char buf[48];
            std::snprintf(buf, sizeof buf, "%s_%03d", std::string(to_string(d)).c_str(), i + 1);
            s.id = buf;
            s.label = d;
            s.features.resize(tmpl.size());
            for (std::size_t r = 0; r < tmpl.size(); ++r) s.features[r] = tmpl[r] + spec.noise_std_mm * unit(rng);
            s.age = demo.age_mean + demo.age_sd * unit(rng);
            s.sex = coin(rng) < kMaleFraction ? Sex::M : Sex::F;
            s.mmse = std::clamp(std::round(demo.mmse_mean + demo.mmse_sd * unit(rng)), 0.0, 30.0);
            s.education = std::max(0.0, std::round(demo.edu_mean + demo.edu_sd * unit(rng)));
            subjects.push_back(std::move(s));
        }
    }
    return Cohort(std::move(subjects), std::move(names), SyntheticProvenance{spec.seed, spec.to_json()});
}

}  // namespace ftdc
