#pragma once

#include <array>
#include <chrono>
#include <filesystem>
#include <functional>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "shopbot/agent_model.hpp"

namespace shopbot::commerce {

struct Product {
    std::string name;
    std::string brand;
    std::string category;
    /// Alternative names, taken from the bundle's ProductName entity.
    std::vector<std::string> synonyms;

    bool operator==(const Product&) const = default;
};

struct Catalog {
    std::vector<Product> products;

    const Product* find(std::string_view name) const;
};

std::vector<Product> find_products(const Catalog& catalog, std::optional<std::string_view> brand,
                                   std::optional<std::string_view> category);

struct ProductMatch {
    const Product* product = nullptr;
    double similarity = 0.0;
};

/// Best fuzzy match over product names and synonyms, or nullopt when the
/// best candidate scores below `fuzzyThreshold`.
std::optional<ProductMatch> resolve_product(const Catalog& catalog, std::string_view surface,
                                            double fuzzyThreshold);

struct CartLine {
    Product product;
    int quantity = 1;

    bool operator==(const CartLine&) const = default;
};

/// Insertion-ordered, one line per product name, quantities >= 1.
class Cart {
public:
    void add(const Product& product, int quantity);
    /// Removes the whole line. Returns false when the product is absent.
    bool remove(std::string_view productName);
    void clear() { lines_.clear(); }

    const CartLine* find(std::string_view productName) const;
    const std::vector<CartLine>& lines() const { return lines_; }
    bool empty() const { return lines_.empty(); }

    bool operator==(const Cart&) const = default;

private:
    std::vector<CartLine> lines_;
};

struct CustomerDetails {
    std::string name;
    std::string address;
    std::string phone;

    bool complete() const { return !name.empty() && !address.empty() && !phone.empty(); }
    bool operator==(const CustomerDetails&) const = default;
};

/// At least seven digits once separators are stripped.
bool valid_phone(std::string_view phone);

using Timestamp = std::chrono::sys_seconds;

struct OrderRecord {
    std::string orderId;
    Timestamp createdAt{};
    std::string channel;
    CustomerDetails customer;
    std::vector<CartLine> lines;

    bool operator==(const OrderRecord&) const = default;
};

// ---------------------------------------------------------------------------
// Business information

struct Interval {
    std::chrono::minutes open;
    std::chrono::minutes close;  // exclusive

    bool contains(std::chrono::seconds sinceMidnight) const {
        return sinceMidnight >= open && sinceMidnight < close;
    }
    bool operator==(const Interval&) const = default;
};

struct BusinessInfo {
    /// Indexed by std::chrono::weekday::c_encoding() (0 = Sunday).
    std::array<std::vector<Interval>, 7> hours;
    std::chrono::minutes utcOffset{0};
    std::string phone;
    std::string address;
    std::string mapLink;

    std::chrono::local_seconds to_local(Timestamp t) const;
    const std::vector<Interval>& hours_on(std::chrono::weekday day) const {
        return hours[day.c_encoding()];
    }
};

struct OpenStatus {
    bool open = false;
    std::vector<Interval> today;
    /// Next opening or closing boundary, nullopt when the shop never opens.
    std::optional<std::chrono::local_seconds> nextTransition;
};

/// Intervals are half-open: a shop closing at 18:00 is closed at 18:00.
OpenStatus is_open_at(const BusinessInfo& info, std::chrono::local_seconds t);

std::string format_clock(std::chrono::minutes sinceMidnight);
std::string_view weekday_name(std::chrono::weekday day);

// ---------------------------------------------------------------------------
// FAQ

struct FaqEntry {
    std::string topic;
    std::string intent;
    std::string answer;
};

class FaqMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FaqKb {
    std::vector<FaqEntry> entries;

    const FaqEntry* by_intent(std::string_view intent) const;
};

/// Throws FaqMismatch for an unknown topic.
const std::string& faq_answer(const FaqKb& kb, std::string_view topic);

// ---------------------------------------------------------------------------
// Shop data bundle

struct Shop {
    Catalog catalog;
    FaqKb faq;
    BusinessInfo business;
};

/// Parses the commerce document. When a bundle is given, product synonyms
/// are copied from its ProductName entity.
Shop parse_shop(std::string_view document, const AgentBundle* bundle = nullptr);
Shop load_shop(const std::filesystem::path& path, const AgentBundle* bundle = nullptr);

/// `foo.bundle.json` -> `foo.commerce.json` in the same directory.
std::filesystem::path commerce_path_for(const std::filesystem::path& bundlePath);

const Shop& fixture_shop();
std::string_view fixture_shop_document();

/// Cross-checks the shop against the bundle's entities and FAQ intents.
ValidationReport validate_shop(const AgentBundle& bundle, const Shop& shop);

// ---------------------------------------------------------------------------
// Order sheet

inline constexpr std::string_view kSheetHeader =
    "order_id,timestamp,channel,customer_name,phone,address,product_name,brand,category,quantity";

std::string format_timestamp(Timestamp t);
std::optional<Timestamp> parse_timestamp(std::string_view text);

class SheetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SheetParseError : public SheetError {
public:
    SheetParseError(const std::string& what, std::size_t row) : SheetError(what), row_(row) {}
    /// 1-based record number; the header is row 1.
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

struct AppendReceipt {
    std::string orderId;
    std::vector<std::size_t> rowIds;
};

/// Append-only order ledger. An order's rows become visible all at once or
/// not at all.
class SheetStore {
public:
    virtual ~SheetStore() = default;

    /// Assigns the next order id when `order.orderId` is empty.
    virtual AppendReceipt append(const OrderRecord& order) = 0;
    virtual std::vector<OrderRecord> read() const = 0;
};

class CsvSheetStore final : public SheetStore {
public:
    /// Called before each row of an order is written; throwing aborts the
    /// append. Used to inject storage faults.
    using RowHook = std::function<void(std::size_t rowIndexInOrder)>;

    explicit CsvSheetStore(std::filesystem::path path);

    AppendReceipt append(const OrderRecord& order) override;
    std::vector<OrderRecord> read() const override;

    void set_row_hook(RowHook hook);
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    mutable std::shared_mutex mutex_;
    RowHook hook_;
    std::uint64_t lastOrderNumber_ = 0;
    std::size_t rowCount_ = 0;
};

/// Placeholder for a hosted spreadsheet backend with the same row schema.
/// Every call throws until a client is wired in.
class RemoteSheetStore final : public SheetStore {
public:
    explicit RemoteSheetStore(std::string spreadsheetId) : spreadsheetId_(std::move(spreadsheetId)) {}

    AppendReceipt append(const OrderRecord& order) override;
    std::vector<OrderRecord> read() const override;

private:
    std::string spreadsheetId_;
};

AppendReceipt export_order(SheetStore& store, const OrderRecord& order);
std::vector<OrderRecord> read_orders(const SheetStore& store);

/// Parses sheet text (header included) into orders.
std::vector<OrderRecord> parse_sheet(std::string_view text);
std::string format_order_id(std::uint64_t number);

} // namespace shopbot::commerce
