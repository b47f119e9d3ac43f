#include "shopbot/commerce.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>

namespace shopbot::commerce {

using namespace std::chrono;

std::string format_timestamp(Timestamp t) {
    const auto day = floor<days>(t);
    const year_month_day ymd{day};
    const hh_mm_ss hms{t - day};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
    if (text.size() != 20 || text[4] != '-' || text[7] != '-' || text[10] != 'T' || text[13] != ':' ||
        text[16] != ':' || text[19] != 'Z')
        return std::nullopt;
    auto field = [&](std::size_t pos, std::size_t len, int& out) {
        auto s = text.substr(pos, len);
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
        return ec == std::errc{} && ptr == s.data() + s.size();
    };
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
    if (!field(0, 4, y) || !field(5, 2, mo) || !field(8, 2, d) || !field(11, 2, h) ||
        !field(14, 2, mi) || !field(17, 2, s))
        return std::nullopt;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || s > 59)
        return std::nullopt;
    return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s};
}

std::string format_order_id(std::uint64_t number) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06llu", static_cast<unsigned long long>(number));
    return buf;
}

namespace {

std::string csv_field(std::string_view value) {
    if (value.find_first_of(",\"\r\n") == std::string_view::npos)
        return std::string(value);
    std::string out = "\"";
    for (char c : value) {
        if (c == '"')
            out += "\"\"";
        else
            out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string csv_row(const OrderRecord& order, const CartLine& line) {
    const std::string fields[] = {
        order.orderId,
        format_timestamp(order.createdAt),
        order.channel,
        order.customer.name,
        order.customer.phone,
        order.customer.address,
        line.product.name,
        line.product.brand,
        line.product.category,
        std::to_string(line.quantity),
    };
    std::string row;
    for (std::size_t i = 0; i < std::size(fields); ++i) {
        if (i)
            row.push_back(',');
        row += csv_field(fields[i]);
    }
    return row;
}

struct Record {
    std::vector<std::string> fields;
    std::size_t number;  // 1-based
};

std::vector<Record> parse_csv(std::string_view text) {
    std::vector<Record> records;
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    std::size_t number = 0;

    auto end_record = [&] {
        fields.push_back(std::move(field));
        field.clear();
        ++number;
        bool blank = fields.size() == 1 && fields[0].empty() && !field_started;
        if (!blank)
            records.push_back({std::move(fields), number});
        else
            --number;
        fields.clear();
        field_started = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
        case '"':
            if (!field.empty())
                throw SheetParseError("row " + std::to_string(number + 1) + ": stray quote", number + 1);
            quoted = true;
            field_started = true;
            break;
        case ',':
            fields.push_back(std::move(field));
            field.clear();
            field_started = true;
            break;
        case '\r':
            break;
        case '\n':
            end_record();
            break;
        default:
            field.push_back(c);
            field_started = true;
        }
    }
    if (quoted)
        throw SheetParseError("row " + std::to_string(number + 1) + ": unterminated quote", number + 1);
    if (field_started || !field.empty() || !fields.empty())
        end_record();
    return records;
}

std::vector<std::string> split_header() {
    std::vector<std::string> out;
    std::string_view h = kSheetHeader;
    std::size_t pos = 0;
    while (true) {
        auto comma = h.find(',', pos);
        out.emplace_back(h.substr(pos, comma - pos));
        if (comma == std::string_view::npos)
            break;
        pos = comma + 1;
    }
    return out;
}

bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

void check_order(const OrderRecord& order) {
    if (order.lines.empty())
        throw std::invalid_argument("an order needs at least one cart line");
    if (!order.customer.complete())
        throw std::invalid_argument("an order needs customer name, address and phone");
    for (const auto& line : order.lines)
        if (line.quantity < 1 || line.product.name.empty())
            throw std::invalid_argument("cart lines need a product and a quantity of at least 1");
}

} // namespace

std::vector<OrderRecord> parse_sheet(std::string_view text) {
    auto records = parse_csv(text);
    std::vector<OrderRecord> orders;
    if (records.empty())
        return orders;

    static const auto header = split_header();
    if (records.front().fields != header)
        throw SheetParseError("row 1: header does not match the order sheet schema", 1);

    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        auto fail = [&](const std::string& why) {
            throw SheetParseError("row " + std::to_string(rec.number) + ": " + why, rec.number);
        };
        const auto& f = rec.fields;
        if (f.size() != header.size())
            fail("expected " + std::to_string(header.size()) + " columns, found " + std::to_string(f.size()));
        if (!all_digits(f[0]))
            fail("order_id '" + f[0] + "' is not a number");
        auto created = parse_timestamp(f[1]);
        if (!created)
            fail("timestamp '" + f[1] + "' is not ISO-8601");
        int quantity = 0;
        auto [ptr, ec] = std::from_chars(f[9].data(), f[9].data() + f[9].size(), quantity);
        if (ec != std::errc{} || ptr != f[9].data() + f[9].size() || quantity < 1)
            fail("quantity '" + f[9] + "' is not a positive integer");
        if (f[6].empty())
            fail("product_name is empty");

        CartLine line{{f[6], f[7], f[8], {}}, quantity};
        CustomerDetails customer{f[3], f[5], f[4]};
        if (!orders.empty() && orders.back().orderId == f[0]) {
            auto& order = orders.back();
            if (order.createdAt != *created || order.channel != f[2] || order.customer != customer)
                fail("order " + f[0] + " has inconsistent order columns");
            order.lines.push_back(std::move(line));
            continue;
        }
        for (const auto& o : orders)
            if (o.orderId == f[0])
                fail("rows of order " + f[0] + " are not contiguous");
        orders.push_back({f[0], *created, f[2], std::move(customer), {std::move(line)}});
    }
    return orders;
}

CsvSheetStore::CsvSheetStore(std::filesystem::path path) : path_(std::move(path)) {
    for (const auto& order : read()) {
        std::uint64_t n = 0;
        std::from_chars(order.orderId.data(), order.orderId.data() + order.orderId.size(), n);
        lastOrderNumber_ = std::max(lastOrderNumber_, n);
        rowCount_ += order.lines.size();
    }
}

void CsvSheetStore::set_row_hook(RowHook hook) {
    std::unique_lock lock(mutex_);
    hook_ = std::move(hook);
}

AppendReceipt CsvSheetStore::append(const OrderRecord& input) {
    check_order(input);
    std::unique_lock lock(mutex_);

    OrderRecord order = input;
    std::uint64_t number = lastOrderNumber_ + 1;
    if (order.orderId.empty()) {
        order.orderId = format_order_id(number);
    } else {
        if (!all_digits(order.orderId))
            throw std::invalid_argument("order ids are decimal numbers");
        std::from_chars(order.orderId.data(), order.orderId.data() + order.orderId.size(), number);
        if (number <= lastOrderNumber_)
            throw SheetError("order id " + order.orderId + " does not follow the last order id");
    }

    std::error_code ec;
    const bool existed = std::filesystem::exists(path_, ec);
    const auto before = existed ? std::filesystem::file_size(path_, ec) : std::uintmax_t{0};

    try {
        std::ofstream out(path_, std::ios::binary | std::ios::app);
        if (!out)
            throw SheetError("cannot open order sheet " + path_.string());
        if (before == 0)
            out << kSheetHeader << '\n';
        for (std::size_t i = 0; i < order.lines.size(); ++i) {
            if (hook_)
                hook_(i);
            out << csv_row(order, order.lines[i]) << '\n';
            out.flush();
            if (!out)
                throw SheetError("write to order sheet failed");
        }
    } catch (const std::exception& e) {
        if (existed)
            std::filesystem::resize_file(path_, before, ec);
        else
            std::filesystem::remove(path_, ec);
        throw SheetError(std::string("order append rolled back: ") + e.what());
    }

    AppendReceipt receipt{order.orderId, {}};
    for (std::size_t i = 0; i < order.lines.size(); ++i)
        receipt.rowIds.push_back(++rowCount_);
    lastOrderNumber_ = number;
    return receipt;
}

std::vector<OrderRecord> CsvSheetStore::read() const {
    std::shared_lock lock(mutex_);
    std::ifstream in(path_, std::ios::binary);
    if (!in)
        return {};
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_sheet(buf.str());
}

AppendReceipt RemoteSheetStore::append(const OrderRecord&) {
    throw SheetError("remote spreadsheet '" + spreadsheetId_ + "' has no client configured");
}

std::vector<OrderRecord> RemoteSheetStore::read() const {
    throw SheetError("remote spreadsheet '" + spreadsheetId_ + "' has no client configured");
}

AppendReceipt export_order(SheetStore& store, const OrderRecord& order) { return store.append(order); }

std::vector<OrderRecord> read_orders(const SheetStore& store) { return store.read(); }

} // namespace shopbot::commerce
