#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ftdc {

// Leaf diagnoses in canonical order. The order doubles as the flat-model
// tie-break order and the row/column order of every confusion matrix.
enum class Diagnosis : std::uint8_t { CN = 0, AD = 1, bvFTD = 2, nfvPPA = 3, svPPA = 4 };

inline constexpr int kNumDiagnoses = 5;
inline constexpr std::array<Diagnosis, kNumDiagnoses> kAllDiagnoses = {
    Diagnosis::CN, Diagnosis::AD, Diagnosis::bvFTD, Diagnosis::nfvPPA, Diagnosis::svPPA};

std::string_view to_string(Diagnosis d);

// Case-insensitive parse of the five leaf names. Returns nullopt for anything
// else, including group names such as "FTD".
std::optional<Diagnosis> parse_diagnosis(std::string_view s);

inline int index_of(Diagnosis d) { return static_cast<int>(d); }

// A set of leaf diagnoses stored as a bitmask.
class LabelSet {
public:
    constexpr LabelSet() = default;
    constexpr explicit LabelSet(std::uint8_t bits) : bits_(bits & 0x1f) {}
    constexpr LabelSet(std::initializer_list<Diagnosis> labels) {
        for (auto d : labels) bits_ |= bit(d);
    }

    static constexpr LabelSet all() { return LabelSet(std::uint8_t{0x1f}); }

    constexpr bool contains(Diagnosis d) const { return (bits_ & bit(d)) != 0; }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr std::uint8_t bits() const { return bits_; }
    int size() const;
    std::vector<Diagnosis> members() const;
    // Set when the set has exactly one member.
    std::optional<Diagnosis> single() const;

    constexpr LabelSet operator|(LabelSet o) const { return LabelSet(std::uint8_t(bits_ | o.bits_)); }
    constexpr LabelSet operator&(LabelSet o) const { return LabelSet(std::uint8_t(bits_ & o.bits_)); }
    constexpr LabelSet operator-(LabelSet o) const { return LabelSet(std::uint8_t(bits_ & ~o.bits_)); }
    constexpr bool operator==(const LabelSet&) const = default;
    constexpr bool subset_of(LabelSet o) const { return (bits_ & ~o.bits_) == 0; }

    // Group name when the set matches one ("Dementia", "FTD", "NonFTD", "PPA"),
    // the leaf name for singletons, otherwise members joined by '+'.
    std::string name() const;

private:
    static constexpr std::uint8_t bit(Diagnosis d) { return std::uint8_t(1u << static_cast<unsigned>(d)); }
    std::uint8_t bits_ = 0;
};

namespace groups {
inline constexpr LabelSet Dementia{Diagnosis::AD, Diagnosis::bvFTD, Diagnosis::nfvPPA, Diagnosis::svPPA};
inline constexpr LabelSet FTD{Diagnosis::bvFTD, Diagnosis::nfvPPA, Diagnosis::svPPA};
inline constexpr LabelSet NonFTD{Diagnosis::AD};
inline constexpr LabelSet PPA{Diagnosis::nfvPPA, Diagnosis::svPPA};
}  // namespace groups

// Parses a leaf name or one of the group names (case-insensitive).
std::optional<LabelSet> parse_label_set(std::string_view s);

}  // namespace ftdc
