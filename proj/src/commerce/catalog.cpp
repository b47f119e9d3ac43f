#include "shopbot/commerce.hpp"

#include <algorithm>

#include "shopbot/nlu.hpp"

namespace shopbot::commerce {

namespace {

bool iequals(std::string_view a, std::string_view b) {
    return nlu::to_lower(a) == nlu::to_lower(b);
}

} // namespace

const Product* Catalog::find(std::string_view name) const {
    for (const auto& p : products)
        if (iequals(p.name, name))
            return &p;
    return nullptr;
}

std::vector<Product> find_products(const Catalog& catalog, std::optional<std::string_view> brand,
                                   std::optional<std::string_view> category) {
    std::vector<Product> out;
    for (const auto& p : catalog.products) {
        if (brand && !iequals(p.brand, *brand))
            continue;
        if (category && !iequals(p.category, *category))
            continue;
        out.push_back(p);
    }
    return out;
}

std::optional<ProductMatch> resolve_product(const Catalog& catalog, std::string_view surface,
                                            double fuzzyThreshold) {
    const auto query = nlu::normalize(surface).joined();
    std::optional<ProductMatch> best;
    for (const auto& product : catalog.products) {
        auto consider = [&](std::string_view candidate) {
            const double score = nlu::similarity(query, nlu::normalize(candidate).joined());
            if (!best || score > best->similarity)
                best = ProductMatch{&product, score};
        };
        consider(product.name);
        for (const auto& syn : product.synonyms)
            consider(syn);
    }
    if (!best || best->similarity < fuzzyThreshold)
        return std::nullopt;
    return best;
}

void Cart::add(const Product& product, int quantity) {
    if (quantity < 1)
        throw std::invalid_argument("cart quantity must be at least 1");
    for (auto& line : lines_) {
        if (line.product.name == product.name) {
            line.quantity += quantity;
            return;
        }
    }
    lines_.push_back({product, quantity});
}

bool Cart::remove(std::string_view productName) {
    auto it = std::find_if(lines_.begin(), lines_.end(),
                           [&](const CartLine& l) { return l.product.name == productName; });
    if (it == lines_.end())
        return false;
    lines_.erase(it);
    return true;
}

const CartLine* Cart::find(std::string_view productName) const {
    for (const auto& line : lines_)
        if (line.product.name == productName)
            return &line;
    return nullptr;
}

bool valid_phone(std::string_view phone) {
    constexpr std::string_view separators = " -+().\t";
    std::size_t digits = 0;
    for (char c : phone) {
        if (c >= '0' && c <= '9')
            ++digits;
        else if (separators.find(c) == std::string_view::npos)
            return false;
    }
    return digits >= 7;
}

const FaqEntry* FaqKb::by_intent(std::string_view intent) const {
    for (const auto& e : entries)
        if (e.intent == intent)
            return &e;
    return nullptr;
}

const std::string& faq_answer(const FaqKb& kb, std::string_view topic) {
    for (const auto& e : kb.entries)
        if (e.topic == topic)
            return e.answer;
    throw FaqMismatch("no FAQ answer for topic '" + std::string(topic) + "'");
}

} // namespace shopbot::commerce
