#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace shopbot {

// Reserved intent names. Neither may be used by a bundle intent.
inline constexpr std::string_view kFallbackIntent = "FALLBACK";
inline constexpr std::string_view kWelcomeIntent = "welcome";

inline constexpr std::string_view kNumberEntity = "number";
inline constexpr std::string_view kDatetimeWordEntity = "datetime-word";

struct EngineConfig {
    double confidenceThreshold = 0.6;
    double fuzzyThreshold = 0.8;
    int repromptLimit = 3;
    int spamBurstCount = 5;
    int spamBurstWindowSeconds = 3;
    int spamRepeatCount = 4;
    std::optional<std::uint64_t> randomSeed;

    bool operator==(const EngineConfig&) const = default;
};

struct SlotRef {
    std::string entityType;
    bool operator==(const SlotRef&) const = default;
};

using PhrasePart = std::variant<std::string, SlotRef>;

struct TrainingPhrase {
    std::vector<PhrasePart> parts;
    bool operator==(const TrainingPhrase&) const = default;
};

/// An empty entityType marks a free-text parameter, captured verbatim
/// by slot filling instead of by entity extraction.
struct ParameterSpec {
    std::string name;
    std::string entityType;
    bool required = false;
    std::string reprompt;
    bool operator==(const ParameterSpec&) const = default;
};

struct OutputContext {
    std::string name;
    int lifespan = 1;
    bool operator==(const OutputContext&) const = default;
};

struct Intent {
    std::string name;
    std::string action;
    std::vector<TrainingPhrase> trainingPhrases;
    std::vector<ParameterSpec> parameters;
    std::vector<std::string> inputContexts;
    std::vector<OutputContext> outputContexts;
    std::vector<std::string> responses;

    const ParameterSpec* parameter(std::string_view name) const;
    const OutputContext* output_context(std::string_view name) const;
    bool operator==(const Intent&) const = default;
};

struct SubAgent {
    std::string name;
    std::vector<Intent> intents;
    bool operator==(const SubAgent&) const = default;
};

enum class EntityKind { Custom, System };

struct EntityEntry {
    std::string value;
    /// Always contains the canonical value itself after loading.
    std::vector<std::string> synonyms;
    bool operator==(const EntityEntry&) const = default;
};

struct EntityTypeDef {
    std::string name;
    EntityKind kind = EntityKind::Custom;
    bool fuzzyEnabled = false;
    std::vector<EntityEntry> entries;
    bool operator==(const EntityTypeDef&) const = default;
};

struct FallbackSpec {
    std::vector<std::string> responses;
    bool operator==(const FallbackSpec&) const = default;
};

/// Built-in greeting intent, matched like any other intent but owned by
/// no sub-agent.
struct WelcomeSpec {
    std::vector<TrainingPhrase> trainingPhrases;
    std::vector<std::string> responses;
    bool operator==(const WelcomeSpec&) const = default;
};

struct AgentBundle {
    std::string name;
    EngineConfig config;
    FallbackSpec fallback;
    WelcomeSpec welcome;
    std::vector<EntityTypeDef> entityTypes;
    std::vector<SubAgent> subAgents;
    /// JSON paths of keys the loader did not recognise.
    std::vector<std::string> unknownKeys;

    const EntityTypeDef* entity_type(std::string_view name) const;
    const Intent* intent(std::string_view name) const;
    /// Name of the sub-agent owning the intent, empty when not found.
    std::string_view sub_agent_of(std::string_view intent) const;
    std::size_t intent_count() const;

    bool operator==(const AgentBundle&) const = default;
};

class BundleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class BundleParseError : public BundleError {
public:
    BundleParseError(const std::string& what, std::size_t line)
        : BundleError(what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class BundleSchemaError : public BundleError {
public:
    BundleSchemaError(const std::string& what, std::string path)
        : BundleError(what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

AgentBundle load_bundle(const std::filesystem::path& path);
AgentBundle parse_bundle(std::string_view document);
std::string serialize_bundle(const AgentBundle& bundle);

enum class FindingKind {
    DanglingEntityReference,
    DuplicateIntentName,
    DuplicateSubAgentName,
    DuplicateEntityType,
    DuplicateSynonym,
    DuplicateCanonicalValue,
    PlaceholderWithoutParameter,
    MissingReprompt,
    EmptySubAgent,
    EmptyTrainingPhrases,
    EmptyPhrase,
    EmptyResponses,
    EmptyFallback,
    EmptySynonyms,
    SystemEntityWithEntries,
    UnknownSystemEntity,
    ReservedName,
    InvalidConfig,
    InvalidContext,
    UnknownKey,
    CatalogMismatch,
    FaqMismatch,
    InvalidHours,
};

std::string_view to_string(FindingKind kind);

struct Finding {
    FindingKind kind;
    std::string where;
    std::string message;
};

struct ValidationReport {
    std::vector<Finding> findings;

    bool ok() const { return findings.empty(); }
    std::size_t count(FindingKind kind) const;
};

ValidationReport validate_bundle(const AgentBundle& bundle);

/// The demo vegetarian grocery bundle compiled into the library.
const AgentBundle& fixture_bundle();
std::string_view fixture_bundle_document();

/// Names of `{placeholder}` references in a response template.
std::vector<std::string> placeholders(std::string_view response);

} // namespace shopbot
