#include "shopbot/agent_model.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace shopbot {

using json = nlohmann::json;

const ParameterSpec* Intent::parameter(std::string_view name) const {
    for (const auto& p : parameters)
        if (p.name == name)
            return &p;
    return nullptr;
}

const OutputContext* Intent::output_context(std::string_view name) const {
    for (const auto& c : outputContexts)
        if (c.name == name)
            return &c;
    return nullptr;
}

const EntityTypeDef* AgentBundle::entity_type(std::string_view name) const {
    for (const auto& e : entityTypes)
        if (e.name == name)
            return &e;
    return nullptr;
}

const Intent* AgentBundle::intent(std::string_view name) const {
    for (const auto& agent : subAgents)
        for (const auto& intent : agent.intents)
            if (intent.name == name)
                return &intent;
    return nullptr;
}

std::string_view AgentBundle::sub_agent_of(std::string_view name) const {
    for (const auto& agent : subAgents)
        for (const auto& intent : agent.intents)
            if (intent.name == name)
                return agent.name;
    return {};
}

std::size_t AgentBundle::intent_count() const {
    std::size_t n = 0;
    for (const auto& agent : subAgents)
        n += agent.intents.size();
    return n;
}

std::size_t ValidationReport::count(FindingKind kind) const {
    return static_cast<std::size_t>(std::count_if(
        findings.begin(), findings.end(), [kind](const Finding& f) { return f.kind == kind; }));
}

std::string_view to_string(FindingKind kind) {
    switch (kind) {
    case FindingKind::DanglingEntityReference: return "dangling-entity-reference";
    case FindingKind::DuplicateIntentName: return "duplicate-intent-name";
    case FindingKind::DuplicateSubAgentName: return "duplicate-sub-agent-name";
    case FindingKind::DuplicateEntityType: return "duplicate-entity-type";
    case FindingKind::DuplicateSynonym: return "duplicate-synonym";
    case FindingKind::DuplicateCanonicalValue: return "duplicate-canonical-value";
    case FindingKind::PlaceholderWithoutParameter: return "placeholder-without-parameter";
    case FindingKind::MissingReprompt: return "missing-reprompt";
    case FindingKind::EmptySubAgent: return "empty-sub-agent";
    case FindingKind::EmptyTrainingPhrases: return "empty-training-phrases";
    case FindingKind::EmptyPhrase: return "empty-phrase";
    case FindingKind::EmptyResponses: return "empty-responses";
    case FindingKind::EmptyFallback: return "empty-fallback";
    case FindingKind::EmptySynonyms: return "empty-synonyms";
    case FindingKind::SystemEntityWithEntries: return "system-entity-with-entries";
    case FindingKind::UnknownSystemEntity: return "unknown-system-entity";
    case FindingKind::ReservedName: return "reserved-name";
    case FindingKind::InvalidConfig: return "invalid-config";
    case FindingKind::InvalidContext: return "invalid-context";
    case FindingKind::UnknownKey: return "unknown-key";
    case FindingKind::CatalogMismatch: return "catalog-mismatch";
    case FindingKind::FaqMismatch: return "faq-mismatch";
    case FindingKind::InvalidHours: return "invalid-hours";
    }
    return "unknown";
}

std::vector<std::string> placeholders(std::string_view response) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while ((pos = response.find('{', pos)) != std::string_view::npos) {
        auto close = response.find('}', pos + 1);
        if (close == std::string_view::npos)
            break;
        auto name = response.substr(pos + 1, close - pos - 1);
        bool ident = !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
            return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
        });
        if (ident)
            out.emplace_back(name);
        pos = close + 1;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Loading

namespace {

class Reader {
public:
    explicit Reader(std::vector<std::string>& unknown) : unknown_(unknown) {}

    void expect_object(const json& j, const std::string& path) const {
        if (!j.is_object())
            throw BundleSchemaError(path + ": expected an object", path);
    }

    void note_unknown(const json& j, const std::string& path,
                      std::initializer_list<std::string_view> known) const {
        for (const auto& [key, value] : j.items()) {
            if (std::find(known.begin(), known.end(), key) == known.end())
                unknown_.push_back(path + "." + key);
        }
    }

    const json& required(const json& j, const std::string& key, const std::string& path) const {
        auto it = j.find(key);
        if (it == j.end())
            throw BundleSchemaError(path + ": missing required field '" + key + "'",
                                    path + "." + key);
        return *it;
    }

    std::string string_at(const json& j, const std::string& key, const std::string& path) const {
        const auto& v = required(j, key, path);
        if (!v.is_string())
            throw BundleSchemaError(path + "." + key + ": expected a string", path + "." + key);
        return v.get<std::string>();
    }

    std::string optional_string(const json& j, const std::string& key,
                                const std::string& path) const {
        auto it = j.find(key);
        if (it == j.end())
            return {};
        if (!it->is_string())
            throw BundleSchemaError(path + "." + key + ": expected a string", path + "." + key);
        return it->get<std::string>();
    }

    const json& array_at(const json& j, const std::string& key, const std::string& path) const {
        const auto& v = required(j, key, path);
        if (!v.is_array())
            throw BundleSchemaError(path + "." + key + ": expected an array", path + "." + key);
        return v;
    }

    const json* optional_array(const json& j, const std::string& key,
                               const std::string& path) const {
        auto it = j.find(key);
        if (it == j.end())
            return nullptr;
        if (!it->is_array())
            throw BundleSchemaError(path + "." + key + ": expected an array", path + "." + key);
        return &*it;
    }

    std::vector<std::string> strings(const json& arr, const std::string& path) const {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < arr.size(); ++i) {
            if (!arr[i].is_string()) {
                auto p = path + "[" + std::to_string(i) + "]";
                throw BundleSchemaError(p + ": expected a string", p);
            }
            out.push_back(arr[i].get<std::string>());
        }
        return out;
    }

    bool optional_bool(const json& j, const std::string& key, const std::string& path,
                       bool fallback) const {
        auto it = j.find(key);
        if (it == j.end())
            return fallback;
        if (!it->is_boolean())
            throw BundleSchemaError(path + "." + key + ": expected a boolean", path + "." + key);
        return it->get<bool>();
    }

    template <typename T>
    void optional_number(const json& j, const std::string& key, const std::string& path,
                         T& into) const {
        auto it = j.find(key);
        if (it == j.end())
            return;
        if constexpr (std::is_floating_point_v<T>) {
            if (!it->is_number())
                throw BundleSchemaError(path + "." + key + ": expected a number",
                                        path + "." + key);
        } else {
            if (!it->is_number_integer())
                throw BundleSchemaError(path + "." + key + ": expected an integer",
                                        path + "." + key);
        }
        into = it->get<T>();
    }

    TrainingPhrase phrase(const json& j, const std::string& path) const {
        TrainingPhrase tp;
        if (j.is_string()) {
            tp.parts.emplace_back(j.get<std::string>());
            return tp;
        }
        if (!j.is_array())
            throw BundleSchemaError(path + ": expected a string or an array of parts", path);
        for (std::size_t i = 0; i < j.size(); ++i) {
            auto p = path + "[" + std::to_string(i) + "]";
            const auto& part = j[i];
            if (part.is_string()) {
                tp.parts.emplace_back(part.get<std::string>());
            } else if (part.is_object()) {
                note_unknown(part, p, {"slot"});
                tp.parts.emplace_back(SlotRef{string_at(part, "slot", p)});
            } else {
                throw BundleSchemaError(p + ": expected a literal string or {\"slot\": ...}", p);
            }
        }
        return tp;
    }

    std::vector<TrainingPhrase> phrases(const json& arr, const std::string& path) const {
        std::vector<TrainingPhrase> out;
        for (std::size_t i = 0; i < arr.size(); ++i)
            out.push_back(phrase(arr[i], path + "[" + std::to_string(i) + "]"));
        return out;
    }

    Intent intent(const json& j, const std::string& path) const {
        expect_object(j, path);
        note_unknown(j, path,
                     {"name", "action", "trainingPhrases", "parameters", "inputContexts",
                      "outputContexts", "responses"});
        Intent in;
        in.name = string_at(j, "name", path);
        in.action = string_at(j, "action", path);
        in.trainingPhrases = phrases(array_at(j, "trainingPhrases", path), path + ".trainingPhrases");
        in.responses = strings(array_at(j, "responses", path), path + ".responses");
        if (const auto* params = optional_array(j, "parameters", path)) {
            for (std::size_t i = 0; i < params->size(); ++i) {
                auto p = path + ".parameters[" + std::to_string(i) + "]";
                const auto& pj = (*params)[i];
                expect_object(pj, p);
                note_unknown(pj, p, {"name", "entityType", "required", "reprompt"});
                ParameterSpec spec;
                spec.name = string_at(pj, "name", p);
                spec.entityType = optional_string(pj, "entityType", p);
                spec.required = optional_bool(pj, "required", p, false);
                spec.reprompt = optional_string(pj, "reprompt", p);
                in.parameters.push_back(std::move(spec));
            }
        }
        if (const auto* ctx = optional_array(j, "inputContexts", path))
            in.inputContexts = strings(*ctx, path + ".inputContexts");
        if (const auto* ctx = optional_array(j, "outputContexts", path)) {
            for (std::size_t i = 0; i < ctx->size(); ++i) {
                auto p = path + ".outputContexts[" + std::to_string(i) + "]";
                const auto& cj = (*ctx)[i];
                expect_object(cj, p);
                note_unknown(cj, p, {"name", "lifespan"});
                OutputContext oc;
                oc.name = string_at(cj, "name", p);
                optional_number(cj, "lifespan", p, oc.lifespan);
                in.outputContexts.push_back(std::move(oc));
            }
        }
        return in;
    }

    EntityTypeDef entity(const json& j, const std::string& path) const {
        expect_object(j, path);
        note_unknown(j, path, {"name", "kind", "fuzzy", "entries"});
        EntityTypeDef def;
        def.name = string_at(j, "name", path);
        auto kind = optional_string(j, "kind", path);
        if (kind.empty() || kind == "custom")
            def.kind = EntityKind::Custom;
        else if (kind == "system")
            def.kind = EntityKind::System;
        else
            throw BundleSchemaError(path + ".kind: expected 'custom' or 'system'", path + ".kind");
        def.fuzzyEnabled = optional_bool(j, "fuzzy", path, false);
        const json* entries = def.kind == EntityKind::Custom ? &array_at(j, "entries", path)
                                                             : optional_array(j, "entries", path);
        if (entries) {
            for (std::size_t i = 0; i < entries->size(); ++i) {
                auto p = path + ".entries[" + std::to_string(i) + "]";
                const auto& ej = (*entries)[i];
                expect_object(ej, p);
                note_unknown(ej, p, {"value", "synonyms"});
                EntityEntry entry;
                entry.value = string_at(ej, "value", p);
                if (const auto* syn = optional_array(ej, "synonyms", p))
                    entry.synonyms = strings(*syn, p + ".synonyms");
                bool has_self = std::find(entry.synonyms.begin(), entry.synonyms.end(),
                                          entry.value) != entry.synonyms.end();
                if (!has_self && !entry.value.empty())
                    entry.synonyms.insert(entry.synonyms.begin(), entry.value);
                def.entries.push_back(std::move(entry));
            }
        }
        return def;
    }

private:
    std::vector<std::string>& unknown_;
};

std::size_t line_of(std::string_view doc, std::size_t byte) {
    if (byte > doc.size())
        byte = doc.size();
    return 1 + static_cast<std::size_t>(std::count(doc.begin(), doc.begin() + byte, '\n'));
}

} // namespace

AgentBundle parse_bundle(std::string_view document) {
    json root;
    try {
        root = json::parse(document.begin(), document.end());
    } catch (const json::parse_error& e) {
        auto byte = e.byte == 0 ? 0 : e.byte - 1;
        auto line = line_of(document, byte);
        throw BundleParseError("line " + std::to_string(line) + ": " + e.what(), line);
    }

    AgentBundle bundle;
    Reader r(bundle.unknownKeys);
    const std::string top = "$";
    r.expect_object(root, top);
    r.note_unknown(root, top, {"name", "config", "fallback", "welcome", "entityTypes", "subAgents"});

    bundle.name = r.string_at(root, "name", top);

    if (auto it = root.find("config"); it != root.end()) {
        const std::string p = "$.config";
        r.expect_object(*it, p);
        r.note_unknown(*it, p,
                       {"confidenceThreshold", "fuzzyThreshold", "repromptLimit", "spamBurstCount",
                        "spamBurstWindowSeconds", "spamRepeatCount", "randomSeed"});
        auto& c = bundle.config;
        r.optional_number(*it, "confidenceThreshold", p, c.confidenceThreshold);
        r.optional_number(*it, "fuzzyThreshold", p, c.fuzzyThreshold);
        r.optional_number(*it, "repromptLimit", p, c.repromptLimit);
        r.optional_number(*it, "spamBurstCount", p, c.spamBurstCount);
        r.optional_number(*it, "spamBurstWindowSeconds", p, c.spamBurstWindowSeconds);
        r.optional_number(*it, "spamRepeatCount", p, c.spamRepeatCount);
        if (it->contains("randomSeed")) {
            std::uint64_t seed = 0;
            r.optional_number(*it, "randomSeed", p, seed);
            c.randomSeed = seed;
        }
    }

    {
        const std::string p = "$.fallback";
        const auto& fb = r.required(root, "fallback", top);
        r.expect_object(fb, p);
        r.note_unknown(fb, p, {"responses"});
        bundle.fallback.responses = r.strings(r.array_at(fb, "responses", p), p + ".responses");
    }

    if (auto it = root.find("welcome"); it != root.end()) {
        const std::string p = "$.welcome";
        r.expect_object(*it, p);
        r.note_unknown(*it, p, {"trainingPhrases", "responses"});
        bundle.welcome.trainingPhrases =
            r.phrases(r.array_at(*it, "trainingPhrases", p), p + ".trainingPhrases");
        bundle.welcome.responses = r.strings(r.array_at(*it, "responses", p), p + ".responses");
    }

    if (const auto* types = r.optional_array(root, "entityTypes", top)) {
        for (std::size_t i = 0; i < types->size(); ++i)
            bundle.entityTypes.push_back(
                r.entity((*types)[i], "$.entityTypes[" + std::to_string(i) + "]"));
    }

    const auto& agents = r.array_at(root, "subAgents", top);
    for (std::size_t i = 0; i < agents.size(); ++i) {
        auto p = "$.subAgents[" + std::to_string(i) + "]";
        const auto& aj = agents[i];
        r.expect_object(aj, p);
        r.note_unknown(aj, p, {"name", "intents"});
        SubAgent agent;
        agent.name = r.string_at(aj, "name", p);
        const auto& intents = r.array_at(aj, "intents", p);
        for (std::size_t k = 0; k < intents.size(); ++k)
            agent.intents.push_back(r.intent(intents[k], p + ".intents[" + std::to_string(k) + "]"));
        bundle.subAgents.push_back(std::move(agent));
    }
    return bundle;
}

AgentBundle load_bundle(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw BundleError("cannot open bundle file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_bundle(buf.str());
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json phrase_json(const TrainingPhrase& tp) {
    json parts = json::array();
    for (const auto& part : tp.parts) {
        if (const auto* lit = std::get_if<std::string>(&part))
            parts.push_back(*lit);
        else
            parts.push_back({{"slot", std::get<SlotRef>(part).entityType}});
    }
    return parts;
}

json phrases_json(const std::vector<TrainingPhrase>& phrases) {
    json out = json::array();
    for (const auto& tp : phrases)
        out.push_back(phrase_json(tp));
    return out;
}

} // namespace

std::string serialize_bundle(const AgentBundle& b) {
    json root;
    root["name"] = b.name;
    json config = {
        {"confidenceThreshold", b.config.confidenceThreshold},
        {"fuzzyThreshold", b.config.fuzzyThreshold},
        {"repromptLimit", b.config.repromptLimit},
        {"spamBurstCount", b.config.spamBurstCount},
        {"spamBurstWindowSeconds", b.config.spamBurstWindowSeconds},
        {"spamRepeatCount", b.config.spamRepeatCount},
    };
    if (b.config.randomSeed)
        config["randomSeed"] = *b.config.randomSeed;
    root["config"] = std::move(config);
    root["fallback"] = {{"responses", b.fallback.responses}};
    root["welcome"] = {{"trainingPhrases", phrases_json(b.welcome.trainingPhrases)},
                       {"responses", b.welcome.responses}};

    json types = json::array();
    for (const auto& e : b.entityTypes) {
        json t = {{"name", e.name},
                  {"kind", e.kind == EntityKind::System ? "system" : "custom"},
                  {"fuzzy", e.fuzzyEnabled}};
        json entries = json::array();
        for (const auto& entry : e.entries)
            entries.push_back({{"value", entry.value}, {"synonyms", entry.synonyms}});
        if (e.kind == EntityKind::Custom || !e.entries.empty())
            t["entries"] = std::move(entries);
        types.push_back(std::move(t));
    }
    root["entityTypes"] = std::move(types);

    json agents = json::array();
    for (const auto& a : b.subAgents) {
        json intents = json::array();
        for (const auto& in : a.intents) {
            json params = json::array();
            for (const auto& p : in.parameters) {
                json pj = {{"name", p.name}, {"required", p.required}};
                if (!p.entityType.empty())
                    pj["entityType"] = p.entityType;
                if (!p.reprompt.empty())
                    pj["reprompt"] = p.reprompt;
                params.push_back(std::move(pj));
            }
            json outputs = json::array();
            for (const auto& c : in.outputContexts)
                outputs.push_back({{"name", c.name}, {"lifespan", c.lifespan}});
            intents.push_back({{"name", in.name},
                               {"action", in.action},
                               {"trainingPhrases", phrases_json(in.trainingPhrases)},
                               {"parameters", std::move(params)},
                               {"inputContexts", in.inputContexts},
                               {"outputContexts", std::move(outputs)},
                               {"responses", in.responses}});
        }
        agents.push_back({{"name", a.name}, {"intents", std::move(intents)}});
    }
    root["subAgents"] = std::move(agents);
    return root.dump(2);
}

// ---------------------------------------------------------------------------
// Validation

namespace {

bool known_system_entity(std::string_view name) {
    return name == kNumberEntity || name == kDatetimeWordEntity;
}

std::string lowercase(std::string s) {
    for (auto& c : s)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

} // namespace

ValidationReport validate_bundle(const AgentBundle& b) {
    ValidationReport report;
    auto add = [&](FindingKind kind, std::string where, std::string message) {
        report.findings.push_back({kind, std::move(where), std::move(message)});
    };

    for (const auto& key : b.unknownKeys)
        add(FindingKind::UnknownKey, key, "unrecognised key");

    const auto& c = b.config;
    if (!(c.confidenceThreshold >= 0.0 && c.confidenceThreshold <= 1.0))
        add(FindingKind::InvalidConfig, "config.confidenceThreshold", "must lie in [0, 1]");
    if (!(c.fuzzyThreshold >= 0.0 && c.fuzzyThreshold <= 1.0))
        add(FindingKind::InvalidConfig, "config.fuzzyThreshold", "must lie in [0, 1]");
    if (c.repromptLimit < 1)
        add(FindingKind::InvalidConfig, "config.repromptLimit", "must be at least 1");
    if (c.spamBurstCount < 1 || c.spamBurstWindowSeconds < 1 || c.spamRepeatCount < 1)
        add(FindingKind::InvalidConfig, "config", "spam limits must be at least 1");

    if (b.fallback.responses.empty())
        add(FindingKind::EmptyFallback, "fallback", "at least one fallback reply is required");

    std::set<std::string> entity_names;
    for (const auto& e : b.entityTypes) {
        std::string where = "entity " + e.name;
        if (!entity_names.insert(e.name).second)
            add(FindingKind::DuplicateEntityType, where, "entity type declared twice");
        if (e.kind == EntityKind::System) {
            if (!known_system_entity(e.name))
                add(FindingKind::UnknownSystemEntity, where,
                    "system entity types are 'number' and 'datetime-word'");
            if (!e.entries.empty())
                add(FindingKind::SystemEntityWithEntries, where, "system entity types carry no entries");
            continue;
        }
        std::set<std::string> canon;
        std::map<std::string, std::string> synonym_owner;
        for (const auto& entry : e.entries) {
            if (!canon.insert(entry.value).second)
                add(FindingKind::DuplicateCanonicalValue, where,
                    "canonical value '" + entry.value + "' repeated");
            if (entry.synonyms.empty())
                add(FindingKind::EmptySynonyms, where, "'" + entry.value + "' has no synonyms");
            for (const auto& syn : entry.synonyms) {
                auto key = lowercase(syn);
                auto [it, inserted] = synonym_owner.emplace(key, entry.value);
                if (!inserted && it->second != entry.value)
                    add(FindingKind::DuplicateSynonym, where,
                        "synonym '" + syn + "' maps to both '" + it->second + "' and '" +
                            entry.value + "'");
            }
        }
    }

    auto check_phrases = [&](const std::vector<TrainingPhrase>& phrases, const std::string& where) {
        for (const auto& tp : phrases) {
            if (tp.parts.empty())
                add(FindingKind::EmptyPhrase, where, "training phrase has no parts");
            for (const auto& part : tp.parts) {
                if (const auto* slot = std::get_if<SlotRef>(&part); slot && !b.entity_type(slot->entityType))
                    add(FindingKind::DanglingEntityReference, where,
                        "slot references undefined entity type '" + slot->entityType + "'");
            }
        }
    };

    if (!b.welcome.trainingPhrases.empty() || !b.welcome.responses.empty()) {
        check_phrases(b.welcome.trainingPhrases, "welcome");
        if (b.welcome.trainingPhrases.empty())
            add(FindingKind::EmptyTrainingPhrases, "welcome", "welcome has no training phrases");
        if (b.welcome.responses.empty())
            add(FindingKind::EmptyResponses, "welcome", "welcome has no responses");
    }

    std::set<std::string> agent_names;
    std::set<std::string> intent_names;
    for (const auto& agent : b.subAgents) {
        std::string agent_where = "sub-agent " + agent.name;
        if (!agent_names.insert(agent.name).second)
            add(FindingKind::DuplicateSubAgentName, agent_where, "sub-agent name repeated");
        if (agent.intents.empty())
            add(FindingKind::EmptySubAgent, agent_where, "sub-agent has no intents");

        for (const auto& in : agent.intents) {
            std::string where = "intent " + in.name;
            if (!intent_names.insert(in.name).second)
                add(FindingKind::DuplicateIntentName, where, "intent name repeated");
            if (in.name == kFallbackIntent || in.name == kWelcomeIntent)
                add(FindingKind::ReservedName, where, "intent name is reserved");
            if (in.trainingPhrases.empty())
                add(FindingKind::EmptyTrainingPhrases, where, "intent has no training phrases");
            if (in.responses.empty())
                add(FindingKind::EmptyResponses, where, "intent has no responses");
            check_phrases(in.trainingPhrases, where);

            for (const auto& p : in.parameters) {
                if (!p.entityType.empty() && !b.entity_type(p.entityType))
                    add(FindingKind::DanglingEntityReference, where,
                        "parameter '" + p.name + "' references undefined entity type '" +
                            p.entityType + "'");
                if (p.required && p.reprompt.empty())
                    add(FindingKind::MissingReprompt, where,
                        "required parameter '" + p.name + "' has no reprompt text");
            }
            for (const auto& ctx : in.inputContexts)
                if (ctx.empty())
                    add(FindingKind::InvalidContext, where, "empty input context name");
            for (const auto& ctx : in.outputContexts)
                if (ctx.name.empty() || ctx.lifespan < 1)
                    add(FindingKind::InvalidContext, where,
                        "output context needs a name and a lifespan of at least 1");
            for (const auto& response : in.responses)
                for (const auto& ph : placeholders(response))
                    if (!in.parameter(ph))
                        add(FindingKind::PlaceholderWithoutParameter, where,
                            "response placeholder {" + ph + "} names no parameter");
        }
    }
    return report;
}

} // namespace shopbot
