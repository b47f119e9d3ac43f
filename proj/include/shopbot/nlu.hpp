#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shopbot/agent_model.hpp"

namespace shopbot::nlu {

struct Token {
    std::string text;   // lowercase, punctuation-free
    std::size_t start;  // byte offsets into Utterance::raw
    std::size_t end;

    bool operator==(const Token&) const = default;
};

struct Utterance {
    std::string raw;
    std::vector<Token> tokens;

    /// Tokens joined by single spaces.
    std::string joined() const;
};

/// Lowercases and splits on whitespace and punctuation. Apostrophes are
/// dropped without splitting, so "don't" becomes "dont".
Utterance normalize(std::string_view text);

/// Unrestricted Damerau-Levenshtein distance over code points, case-folded.
std::size_t edit_distance(std::string_view a, std::string_view b);

/// 1 - distance / max length, with two empty strings scoring 1.
double similarity(std::string_view a, std::string_view b);

std::string to_lower(std::string_view text);
std::size_t code_point_count(std::string_view text);

struct TokenSpan {
    std::size_t first = 0;
    std::size_t last = 0;  // exclusive

    std::size_t size() const { return last - first; }
    bool overlaps(const TokenSpan& o) const { return first < o.last && o.first < last; }
    bool operator==(const TokenSpan&) const = default;
};

struct EntityMatch {
    std::string entityType;
    std::string canonical;
    std::string surface;
    TokenSpan span;
    double similarity = 0.0;

    bool operator==(const EntityMatch&) const = default;
};

/// Sliding-window entity extraction. Accepted spans are pairwise disjoint and
/// returned in utterance order.
std::vector<EntityMatch> extract_entities(const Utterance& utt,
                                          std::span<const EntityTypeDef> entityTypes,
                                          double fuzzyThreshold);

/// Light suffix stemmer used before phrase scoring.
std::string stem(std::string_view token);

/// Slot-abstracted, stemmed token sequence. Slot tokens are written as
/// `<EntityType>`, which normalize() can never produce.
using AbstractForm = std::vector<std::string>;

std::string slot_token(std::string_view entityType);

AbstractForm abstract_utterance(const Utterance& utt, std::span<const EntityMatch> entities);
AbstractForm abstract_phrase(const TrainingPhrase& phrase,
                             std::span<const EntityTypeDef> entityTypes, double fuzzyThreshold);

/// Token-multiset F1: 2|A ∩ B| / (|A| + |B|), zero when either side is empty.
double token_f1(const AbstractForm& a, const AbstractForm& b);

double score_phrase(const Utterance& utt, const TrainingPhrase& phrase,
                    std::span<const EntityMatch> entities,
                    std::span<const EntityTypeDef> entityTypes, double fuzzyThreshold);

using ContextSet = std::set<std::string, std::less<>>;

struct IntentMatch {
    std::string intent;    // kFallbackIntent when nothing clears the threshold
    std::string subAgent;  // empty for fallback and welcome
    double confidence = 0.0;
    std::map<std::string, EntityMatch> params;
    std::vector<EntityMatch> entities;

    bool is_fallback() const { return intent == kFallbackIntent; }
    const EntityMatch* param(std::string_view name) const;
    bool operator==(const IntentMatch&) const = default;
};

/// Precompiles the bundle's training phrases once so repeated
/// classification does not re-abstract them. Holds a reference to the
/// bundle, which must outlive the classifier.
class Classifier {
public:
    explicit Classifier(const AgentBundle& bundle);

    IntentMatch classify(const Utterance& utt, const ContextSet& activeContexts) const;
    IntentMatch classify(std::string_view text, const ContextSet& activeContexts) const {
        return classify(normalize(text), activeContexts);
    }

    const AgentBundle& bundle() const { return *bundle_; }

private:
    struct CompiledIntent {
        std::string name;
        std::string subAgent;
        const Intent* intent = nullptr;  // null for welcome
        std::vector<AbstractForm> phrases;
    };

    const AgentBundle* bundle_;
    std::vector<CompiledIntent> intents_;
};

IntentMatch classify(const Utterance& utt, const AgentBundle& bundle,
                     const ContextSet& activeContexts);

enum class LanguageSupport { Supported, Unsupported };

LanguageSupport detect_unsupported_language(std::string_view text);

} // namespace shopbot::nlu
