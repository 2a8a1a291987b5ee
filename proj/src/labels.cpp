#include "ftdc/labels.hpp"

#include <algorithm>
#include <cctype>

namespace ftdc {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

std::string_view to_string(Diagnosis d) {
    switch (d) {
        case Diagnosis::CN: return "CN";
        case Diagnosis::AD: return "AD";
        case Diagnosis::bvFTD: return "bvFTD";
        case Diagnosis::nfvPPA: return "nfvPPA";
        case Diagnosis::svPPA: return "svPPA";
    }
    return "?";
}

std::optional<Diagnosis> parse_diagnosis(std::string_view s) {
    const auto key = lower(s);
    for (auto d : kAllDiagnoses) {
        if (lower(to_string(d)) == key) return d;
    }
    return std::nullopt;
}

int LabelSet::size() const {
    int n = 0;
    for (auto d : kAllDiagnoses) n += contains(d) ? 1 : 0;
    return n;
}

std::vector<Diagnosis> LabelSet::members() const {
    std::vector<Diagnosis> out;
    for (auto d : kAllDiagnoses)
        if (contains(d)) out.push_back(d);
    return out;
}

std::optional<Diagnosis> LabelSet::single() const {
    if (size() != 1) return std::nullopt;
    return members().front();
}

std::string LabelSet::name() const {
    if (*this == groups::Dementia) return "Dementia";
    if (*this == groups::FTD) return "FTD";
    if (*this == groups::PPA) return "PPA";
    if (auto d = single()) return std::string(to_string(*d));
    std::string out;
    for (auto d : members()) {
        if (!out.empty()) out += '+';
        out += to_string(d);
    }
    return out.empty() ? "{}" : out;
}

std::optional<LabelSet> parse_label_set(std::string_view s) {
    if (auto d = parse_diagnosis(s)) return LabelSet{*d};
    const auto key = lower(s);
    if (key == "dementia") return groups::Dementia;
    if (key == "ftd") return groups::FTD;
    if (key == "nonftd" || key == "non-ftd") return groups::NonFTD;
    if (key == "ppa") return groups::PPA;
    return std::nullopt;
}

}  // namespace ftdc
