#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "ldsp/error.hpp"

namespace ldsp {

struct PropertyInfo {
    std::string_view name;
    std::string_view description;
    std::string_view example_sentence1;
    std::string_view example_sentence2;
};

// The ten properties of the LDSP-10 dataset. Descriptions feed the
// generation prompt; examples are the reference pair for each property.
inline constexpr std::array<PropertyInfo, 10> kProperties{{
    {"control", "The two sentences are completely unrelated to each other, sharing no topic or structure.",
     "They sound excited.", "The farmer has 20 sheep."},
    {"definiteness",
     "Definiteness involves the use of definite or indefinite articles within a sentence, such as the compared to "
     "a, respectively.",
     "The bird flew away.", "A bird flew away."},
    {"factuality", "Factuality refers to the degree of truth implied by the structure of the sentence.",
     "The car is red.", "The car could be red."},
    {"intensifier", "Intensifier refers to the degree of emphasis present within a sentence.", "The task is easy.",
     "The task is surprisingly easy."},
    {"negation", "Negation occurs when a not is added to a sentence, negating the meaning.",
     "The project is successful.", "The project is not successful."},
    {"polarity",
     "Polarity is similar to a negation, and occurs when an antonym is added, reversing the meaning of the sentence "
     "completely.",
     "She passed the exam.", "She failed the exam."},
    {"quantity", "Quantity is a switch from an exact number used to numerate the items to a grouping word.",
     "I ate two cookies.", "I ate several cookies."},
    {"synonym",
     "Both sentences have the same meaning, with one word being replaced by one of its synonyms.",
     "The music was calming.", "The music was soothing."},
    {"tense", "One sentence is constructed in the present tense, while the other is in the past tense.",
     "The river flows swiftly.", "The river flowed swiftly."},
    {"voice", "One sentence is in the active voice, while the other expresses the same event in the passive voice.",
     "The team won the game.", "The game was won by the team."},
}};

inline std::optional<PropertyInfo> find_property(std::string_view name) {
    const auto it = std::find_if(kProperties.begin(), kProperties.end(),
                                 [&](const PropertyInfo& p) { return p.name == name; });
    if (it == kProperties.end()) return std::nullopt;
    return *it;
}

inline const PropertyInfo& require_property(std::string_view name) {
    const auto it = std::find_if(kProperties.begin(), kProperties.end(),
                                 [&](const PropertyInfo& p) { return p.name == name; });
    if (it == kProperties.end()) throw Error(ErrorCode::UnknownProperty, "unknown property '" + std::string(name) + "'");
    return *it;
}

}  // namespace ldsp
