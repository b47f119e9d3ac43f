#include "shopbot/nlu.hpp"

#include <algorithm>
#include <unordered_map>

namespace shopbot::nlu {

std::string slot_token(std::string_view entityType) {
    std::string out = "<";
    out += entityType;
    out += '>';
    return out;
}

AbstractForm abstract_utterance(const Utterance& utt, std::span<const EntityMatch> entities) {
    AbstractForm out;
    std::size_t i = 0;
    while (i < utt.tokens.size()) {
        auto it = std::find_if(entities.begin(), entities.end(),
                               [i](const EntityMatch& m) { return m.span.first == i; });
        if (it != entities.end() && it->span.size() > 0) {
            out.push_back(slot_token(it->entityType));
            i = it->span.last;
        } else {
            out.push_back(stem(utt.tokens[i].text));
            ++i;
        }
    }
    return out;
}

AbstractForm abstract_phrase(const TrainingPhrase& phrase,
                             std::span<const EntityTypeDef> entityTypes, double fuzzyThreshold) {
    AbstractForm out;
    for (const auto& part : phrase.parts) {
        if (const auto* slot = std::get_if<SlotRef>(&part)) {
            out.push_back(slot_token(slot->entityType));
            continue;
        }
        auto utt = normalize(std::get<std::string>(part));
        auto entities = extract_entities(utt, entityTypes, fuzzyThreshold);
        auto form = abstract_utterance(utt, entities);
        out.insert(out.end(), form.begin(), form.end());
    }
    return out;
}

double token_f1(const AbstractForm& a, const AbstractForm& b) {
    if (a.empty() || b.empty())
        return 0.0;
    std::unordered_map<std::string_view, int> counts;
    for (const auto& t : a)
        ++counts[t];
    std::size_t overlap = 0;
    for (const auto& t : b) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    return 2.0 * static_cast<double>(overlap) / static_cast<double>(a.size() + b.size());
}

double score_phrase(const Utterance& utt, const TrainingPhrase& phrase,
                    std::span<const EntityMatch> entities,
                    std::span<const EntityTypeDef> entityTypes, double fuzzyThreshold) {
    return token_f1(abstract_utterance(utt, entities),
                    abstract_phrase(phrase, entityTypes, fuzzyThreshold));
}

const EntityMatch* IntentMatch::param(std::string_view name) const {
    auto it = params.find(std::string(name));
    return it == params.end() ? nullptr : &it->second;
}

Classifier::Classifier(const AgentBundle& bundle) : bundle_(&bundle) {
    const auto& types = bundle.entityTypes;
    const double fuzzy = bundle.config.fuzzyThreshold;
    auto compile = [&](const std::vector<TrainingPhrase>& phrases) {
        std::vector<AbstractForm> out;
        out.reserve(phrases.size());
        for (const auto& tp : phrases)
            out.push_back(abstract_phrase(tp, types, fuzzy));
        return out;
    };
    if (!bundle.welcome.trainingPhrases.empty())
        intents_.push_back({std::string(kWelcomeIntent), {}, nullptr, compile(bundle.welcome.trainingPhrases)});
    for (const auto& agent : bundle.subAgents)
        for (const auto& intent : agent.intents)
            intents_.push_back({intent.name, agent.name, &intent, compile(intent.trainingPhrases)});
}

IntentMatch Classifier::classify(const Utterance& utt, const ContextSet& activeContexts) const {
    const auto& bundle = *bundle_;
    IntentMatch result;
    result.intent = std::string(kFallbackIntent);
    result.entities = extract_entities(utt, bundle.entityTypes, bundle.config.fuzzyThreshold);
    const auto form = abstract_utterance(utt, result.entities);

    auto required_filled = [&](const CompiledIntent& c) {
        if (!c.intent)
            return 0;
        int filled = 0;
        for (const auto& p : c.intent->parameters) {
            if (!p.required || p.entityType.empty())
                continue;
            bool found = std::any_of(result.entities.begin(), result.entities.end(),
                                     [&](const EntityMatch& m) { return m.entityType == p.entityType; });
            filled += found ? 1 : 0;
        }
        return filled;
    };

    const CompiledIntent* best = nullptr;
    double best_score = 0.0;
    int best_filled = 0;
    for (const auto& c : intents_) {
        if (c.intent) {
            bool eligible = std::all_of(c.intent->inputContexts.begin(), c.intent->inputContexts.end(),
                                        [&](const std::string& ctx) { return activeContexts.contains(ctx); });
            if (!eligible)
                continue;
        }
        double score = 0.0;
        for (const auto& phrase : c.phrases)
            score = std::max(score, token_f1(form, phrase));

        const int filled = required_filled(c);
        bool better = false;
        if (!best || score > best_score)
            better = true;
        else if (score == best_score)
            better = filled > best_filled || (filled == best_filled && c.name < best->name);
        if (better) {
            best = &c;
            best_score = score;
            best_filled = filled;
        }
    }

    result.confidence = best_score;
    if (!best || best_score < bundle.config.confidenceThreshold)
        return result;

    result.intent = best->name;
    result.subAgent = best->subAgent;
    if (best->intent) {
        for (const auto& p : best->intent->parameters) {
            if (p.entityType.empty())
                continue;
            for (const auto& m : result.entities) {
                if (m.entityType == p.entityType) {
                    result.params.emplace(p.name, m);
                    break;
                }
            }
        }
    }
    return result;
}

IntentMatch classify(const Utterance& utt, const AgentBundle& bundle,
                     const ContextSet& activeContexts) {
    return Classifier(bundle).classify(utt, activeContexts);
}

} // namespace shopbot::nlu
