#include "shopbot/commerce.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "shopbot/fixture_data.hpp"
#include "shopbot/nlu.hpp"

namespace shopbot::commerce {

using json = nlohmann::json;
using namespace std::chrono;

namespace {

std::string text_at(const json& j, const char* key, const std::string& path) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string())
        throw BundleSchemaError(path + ": missing string field '" + key + "'", path + "." + key);
    return it->get<std::string>();
}

minutes parse_clock(const json& j, const std::string& path) {
    if (!j.is_string())
        throw BundleSchemaError(path + ": expected \"HH:MM\"", path);
    auto s = j.get<std::string>();
    int h = -1;
    int m = -1;
    char tail = 0;
    if (std::sscanf(s.c_str(), "%d:%d%c", &h, &m, &tail) != 2 || h < 0 || h > 24 || m < 0 || m > 59 ||
        (h == 24 && m != 0))
        throw BundleSchemaError(path + ": invalid clock time '" + s + "'", path);
    return hours{h} + minutes{m};
}

constexpr std::string_view kDayKeys[] = {"sunday",   "monday", "tuesday", "wednesday",
                                         "thursday", "friday", "saturday"};

} // namespace

Shop parse_shop(std::string_view document, const AgentBundle* bundle) {
    json root;
    try {
        root = json::parse(document.begin(), document.end());
    } catch (const json::parse_error& e) {
        auto byte = e.byte == 0 ? 0 : std::min<std::size_t>(e.byte - 1, document.size());
        std::size_t line = 1 + static_cast<std::size_t>(
                                   std::count(document.begin(), document.begin() + byte, '\n'));
        throw BundleParseError("line " + std::to_string(line) + ": " + e.what(), line);
    }
    if (!root.is_object())
        throw BundleSchemaError("$: expected an object", "$");

    const EntityTypeDef* names = bundle ? bundle->entity_type("ProductName") : nullptr;

    Shop shop;
    auto catalog = root.find("catalog");
    if (catalog == root.end() || !catalog->is_array())
        throw BundleSchemaError("$: missing array 'catalog'", "$.catalog");
    for (std::size_t i = 0; i < catalog->size(); ++i) {
        auto path = "$.catalog[" + std::to_string(i) + "]";
        const auto& pj = (*catalog)[i];
        Product p{text_at(pj, "name", path), text_at(pj, "brand", path), text_at(pj, "category", path), {}};
        if (names) {
            for (const auto& entry : names->entries) {
                if (entry.value != p.name)
                    continue;
                for (const auto& syn : entry.synonyms)
                    if (syn != p.name)
                        p.synonyms.push_back(syn);
            }
        }
        shop.catalog.products.push_back(std::move(p));
    }

    if (auto faq = root.find("faq"); faq != root.end()) {
        if (!faq->is_array())
            throw BundleSchemaError("$.faq: expected an array", "$.faq");
        for (std::size_t i = 0; i < faq->size(); ++i) {
            auto path = "$.faq[" + std::to_string(i) + "]";
            const auto& fj = (*faq)[i];
            shop.faq.entries.push_back(
                {text_at(fj, "topic", path), text_at(fj, "intent", path), text_at(fj, "answer", path)});
        }
    }

    auto business = root.find("business");
    if (business == root.end() || !business->is_object())
        throw BundleSchemaError("$: missing object 'business'", "$.business");
    auto& info = shop.business;
    info.phone = text_at(*business, "phone", "$.business");
    info.address = text_at(*business, "address", "$.business");
    info.mapLink = text_at(*business, "mapLink", "$.business");
    if (auto off = business->find("utcOffsetMinutes"); off != business->end()) {
        if (!off->is_number_integer())
            throw BundleSchemaError("$.business.utcOffsetMinutes: expected an integer",
                                    "$.business.utcOffsetMinutes");
        info.utcOffset = minutes{off->get<int>()};
    }
    if (auto hours_j = business->find("hours"); hours_j != business->end()) {
        if (!hours_j->is_object())
            throw BundleSchemaError("$.business.hours: expected an object", "$.business.hours");
        for (const auto& [key, value] : hours_j->items()) {
            auto path = "$.business.hours." + key;
            auto day = std::find(std::begin(kDayKeys), std::end(kDayKeys), key);
            if (day == std::end(kDayKeys))
                throw BundleSchemaError(path + ": unknown weekday", path);
            if (!value.is_array())
                throw BundleSchemaError(path + ": expected an array of [open, close]", path);
            auto& slots = info.hours[static_cast<std::size_t>(day - std::begin(kDayKeys))];
            for (std::size_t i = 0; i < value.size(); ++i) {
                auto ipath = path + "[" + std::to_string(i) + "]";
                const auto& pair = value[i];
                if (!pair.is_array() || pair.size() != 2)
                    throw BundleSchemaError(ipath + ": expected [open, close]", ipath);
                slots.push_back({parse_clock(pair[0], ipath), parse_clock(pair[1], ipath)});
            }
            std::sort(slots.begin(), slots.end(),
                      [](const Interval& a, const Interval& b) { return a.open < b.open; });
        }
    }
    return shop;
}

Shop load_shop(const std::filesystem::path& path, const AgentBundle* bundle) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw BundleError("cannot open commerce file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_shop(buf.str(), bundle);
}

std::filesystem::path commerce_path_for(const std::filesystem::path& bundlePath) {
    auto name = bundlePath.filename().string();
    constexpr std::string_view suffix = ".bundle.json";
    std::string stem = name.size() > suffix.size() && name.ends_with(suffix)
                           ? name.substr(0, name.size() - suffix.size())
                           : bundlePath.stem().string();
    return bundlePath.parent_path() / (stem + ".commerce.json");
}

std::string_view fixture_shop_document() { return generated::kFixtureCommerceJson; }

const Shop& fixture_shop() {
    static const Shop shop = parse_shop(generated::kFixtureCommerceJson, &fixture_bundle());
    return shop;
}

ValidationReport validate_shop(const AgentBundle& bundle, const Shop& shop) {
    ValidationReport report;
    auto add = [&](FindingKind kind, std::string where, std::string message) {
        report.findings.push_back({kind, std::move(where), std::move(message)});
    };

    auto entity_has = [&](std::string_view type, std::string_view value) {
        const auto* def = bundle.entity_type(type);
        if (!def)
            return false;
        for (const auto& e : def->entries)
            if (nlu::to_lower(e.value) == nlu::to_lower(value))
                return true;
        return false;
    };

    std::set<std::string> seen;
    for (const auto& p : shop.catalog.products) {
        auto where = "product " + p.name;
        if (!seen.insert(nlu::to_lower(p.name)).second)
            add(FindingKind::CatalogMismatch, where, "product listed twice");
        if (p.brand.empty() || p.category.empty())
            add(FindingKind::CatalogMismatch, where, "brand and category must be non-empty");
        if (!entity_has("ProductName", p.name))
            add(FindingKind::CatalogMismatch, where, "not an entry of the ProductName entity");
        if (!p.brand.empty() && !entity_has("Brand", p.brand))
            add(FindingKind::CatalogMismatch, where, "brand '" + p.brand + "' is not a Brand entry");
        if (!p.category.empty() && !entity_has("Category", p.category))
            add(FindingKind::CatalogMismatch, where,
                "category '" + p.category + "' is not a Category entry");
    }

    std::set<std::string> topics;
    for (const auto& f : shop.faq.entries) {
        auto where = "faq " + f.topic;
        if (!topics.insert(f.topic).second)
            add(FindingKind::FaqMismatch, where, "topic listed twice");
        if (!bundle.intent(f.intent))
            add(FindingKind::FaqMismatch, where, "bound to unknown intent '" + f.intent + "'");
    }
    for (const auto& agent : bundle.subAgents)
        for (const auto& intent : agent.intents)
            if (intent.action == "faq.answer" && !shop.faq.by_intent(intent.name))
                add(FindingKind::FaqMismatch, "intent " + intent.name, "FAQ intent has no answer topic");

    for (unsigned d = 0; d < 7; ++d) {
        const auto& slots = shop.business.hours[d];
        auto where = "hours " + std::string(weekday_name(weekday{d}));
        for (std::size_t i = 0; i < slots.size(); ++i) {
            if (!(slots[i].open < slots[i].close))
                add(FindingKind::InvalidHours, where, "opening time must precede closing time");
            for (std::size_t k = i + 1; k < slots.size(); ++k)
                if (slots[i].open < slots[k].close && slots[k].open < slots[i].close)
                    add(FindingKind::InvalidHours, where, "intervals overlap");
        }
    }
    return report;
}

} // namespace shopbot::commerce
