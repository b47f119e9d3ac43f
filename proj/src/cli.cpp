#include "shopbot/cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "shopbot/commerce.hpp"
#include "shopbot/dialog.hpp"
#include "shopbot/gateway.hpp"
#include "shopbot/nlu.hpp"

namespace shopbot::cli {

namespace {

std::optional<std::string> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        auto next = s.find(sep, pos);
        out.emplace_back(s.substr(pos, next - pos));
        if (next == std::string_view::npos)
            return out;
        pos = next + 1;
    }
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

// Loads a bundle, reporting failures the way every command does.
std::optional<AgentBundle> load_or_report(const std::filesystem::path& path, std::ostream& err) {
    try {
        return load_bundle(path);
    } catch (const BundleParseError& e) {
        err << "error: " << path.string() << ": " << e.what() << '\n';
    } catch (const BundleSchemaError& e) {
        err << "error: " << path.string() << ": " << e.what() << '\n';
    } catch (const BundleError& e) {
        err << "error: " << e.what() << '\n';
    }
    return std::nullopt;
}

} // namespace

std::vector<EvalCase> parse_corpus(std::string_view text) {
    std::vector<EvalCase> cases;
    std::size_t number = 0;
    for (auto& raw : split(text, '\n')) {
        ++number;
        if (!raw.empty() && raw.back() == '\r')
            raw.pop_back();
        if (trim(raw).empty() || raw.front() == '#')
            continue;
        auto fields = split(raw, '\t');
        if (fields.size() < 2 || fields.size() > 3)
            throw CorpusError("line " + std::to_string(number) + ": expected 2 or 3 tab-separated fields",
                              number);
        EvalCase c{trim(fields[0]), trim(fields[1]), {}, number};
        if (c.utterance.empty() || c.expectedIntent.empty())
            throw CorpusError("line " + std::to_string(number) + ": utterance and intent must be non-empty",
                              number);
        if (fields.size() == 3)
            for (const auto& ctx : split(fields[2], ','))
                if (auto t = trim(ctx); !t.empty())
                    c.activeContexts.push_back(t);
        cases.push_back(std::move(c));
    }
    return cases;
}

double IntentCounts::precision() const {
    int predicted = truePositive + falsePositive;
    return predicted ? static_cast<double>(truePositive) / predicted : 0.0;
}

double IntentCounts::recall() const {
    int actual = truePositive + falseNegative;
    return actual ? static_cast<double>(truePositive) / actual : 0.0;
}

EvalReport evaluate(const AgentBundle& bundle, const std::vector<EvalCase>& cases) {
    nlu::Classifier classifier(bundle);
    EvalReport report;
    for (const auto& c : cases) {
        if (c.expectedIntent != kFallbackIntent && c.expectedIntent != kWelcomeIntent && !bundle.intent(c.expectedIntent))
            throw CorpusError("line " + std::to_string(c.line) + ": unknown intent '" + c.expectedIntent + "'",
                              c.line);
        nlu::ContextSet contexts(c.activeContexts.begin(), c.activeContexts.end());
        auto match = classifier.classify(c.utterance, contexts);
        ++report.total;
        if (match.intent == c.expectedIntent) {
            ++report.correct;
            ++report.perIntent[c.expectedIntent].truePositive;
        } else {
            ++report.perIntent[c.expectedIntent].falseNegative;
            ++report.perIntent[match.intent].falsePositive;
            report.misses.push_back({c, match.intent, match.confidence});
        }
    }
    return report;
}

void print_report(const EvalReport& report, std::ostream& out) {
    std::size_t width = 6;
    for (const auto& [name, counts] : report.perIntent)
        width = std::max(width, name.size());
    out << std::fixed << std::setprecision(3);
    out << std::left << std::setw(static_cast<int>(width)) << "intent" << "  precision  recall  support\n";
    for (const auto& [name, counts] : report.perIntent)
        out << std::left << std::setw(static_cast<int>(width)) << name << "  " << std::right << std::setw(9)
            << counts.precision() << "  " << std::setw(6) << counts.recall() << "  " << std::setw(7)
            << counts.truePositive + counts.falseNegative << '\n';
    for (const auto& m : report.misses)
        out << "miss line " << m.input.line << ": \"" << m.input.utterance << "\" expected "
            << m.input.expectedIntent << ", got " << m.predicted << " (" << m.confidence << ")\n";
    out << "accuracy " << std::setprecision(4) << report.accuracy() << " (" << report.correct << '/' << report.total
        << ")\n";
    out.unsetf(std::ios::floatfield);
}

int cmd_validate(const std::filesystem::path& bundlePath, std::ostream& out, std::ostream& err) {
    auto bundle = load_or_report(bundlePath, err);
    if (!bundle)
        return kExitIoError;
    auto report = validate_bundle(*bundle);

    const auto commercePath = commerce::commerce_path_for(bundlePath);
    if (std::filesystem::exists(commercePath)) {
        try {
            auto shop = commerce::load_shop(commercePath, &*bundle);
            auto more = commerce::validate_shop(*bundle, shop);
            report.findings.insert(report.findings.end(), more.findings.begin(), more.findings.end());
        } catch (const BundleError& e) {
            err << "error: " << commercePath.string() << ": " << e.what() << '\n';
            return kExitIoError;
        }
    }

    for (const auto& f : report.findings)
        out << to_string(f.kind) << " at " << f.where << ": " << f.message << '\n';
    if (!report.ok()) {
        out << report.findings.size() << " finding(s)\n";
        return kExitFailed;
    }
    out << "ok: " << bundle->name << " (" << bundle->subAgents.size() << " sub-agents, " << bundle->intent_count()
        << " intents, " << bundle->entityTypes.size() << " entity types)\n";
    return kExitOk;
}

int cmd_eval(const std::filesystem::path& bundlePath, const std::filesystem::path& corpusPath, double minAccuracy,
             std::ostream& out, std::ostream& err) {
    auto bundle = load_or_report(bundlePath, err);
    if (!bundle)
        return kExitIoError;
    auto text = read_file(corpusPath);
    if (!text) {
        err << "error: cannot read corpus " << corpusPath.string() << '\n';
        return kExitIoError;
    }
    EvalReport report;
    try {
        report = evaluate(*bundle, parse_corpus(*text));
    } catch (const CorpusError& e) {
        err << "error: " << corpusPath.string() << ": " << e.what() << '\n';
        return kExitIoError;
    }
    print_report(report, out);
    if (report.accuracy() < minAccuracy) {
        out << "below the required accuracy " << minAccuracy << '\n';
        return kExitFailed;
    }
    return kExitOk;
}

int cmd_orders(const std::filesystem::path& sheetPath, std::ostream& out, std::ostream& err) {
    if (!std::filesystem::exists(sheetPath)) {
        out << "no orders\n";
        return kExitOk;
    }
    auto text = read_file(sheetPath);
    if (!text) {
        err << "error: cannot read " << sheetPath.string() << '\n';
        return kExitIoError;
    }
    std::vector<commerce::OrderRecord> orders;
    try {
        orders = commerce::parse_sheet(*text);
    } catch (const commerce::SheetParseError& e) {
        err << "error: " << sheetPath.string() << ": " << e.what() << '\n';
        return kExitIoError;
    }
    if (orders.empty()) {
        out << "no orders\n";
        return kExitOk;
    }
    for (const auto& o : orders) {
        out << "order " << o.orderId << "  " << commerce::format_timestamp(o.createdAt) << "  " << o.channel << "  "
            << o.customer.name << "  " << o.customer.phone << "  " << o.customer.address << '\n';
        for (const auto& l : o.lines)
            out << "  " << l.quantity << " × " << l.product.name << " (" << l.product.brand << ", "
                << l.product.category << ")\n";
    }
    out << orders.size() << " order(s)\n";
    return kExitOk;
}

int cmd_chat(const std::filesystem::path& bundlePath, const std::filesystem::path& sheetPath,
             std::optional<std::uint64_t> seed, std::istream& in, std::ostream& out, std::ostream& err,
             std::optional<std::chrono::seconds> step) {
    auto bundle = load_or_report(bundlePath, err);
    if (!bundle)
        return kExitIoError;
    std::optional<commerce::Shop> shop;
    try {
        shop = commerce::load_shop(commerce::commerce_path_for(bundlePath), &*bundle);
    } catch (const BundleError& e) {
        err << "error: " << e.what() << '\n';
        return kExitIoError;
    }
    std::optional<commerce::CsvSheetStore> sheet;
    try {
        sheet.emplace(sheetPath);
    } catch (const commerce::SheetError& e) {
        err << "error: " << sheetPath.string() << ": " << e.what() << '\n';
        return kExitIoError;
    }

    dialog::Engine engine(*bundle, *shop, {seed, &*sheet});
    auto session = engine.new_session("cli", dialog::Channel::Rest, "local");
    auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line == "/quit")
            break;
        if (line == "/cart") {
            if (session.cart.empty())
                out << "(cart is empty)\n";
            else
                out << dialog::render_cart(session.cart.lines()) << '\n';
            continue;
        }
        now = step ? now + *step : std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
        auto result = engine.handle_message(session, line, now);
        session = result.session;
        for (const auto& t : result.reply.texts)
            out << "bot: " << t << '\n';
        if (!result.reply.quickReplies.empty()) {
            out << "     ";
            for (const auto& q : result.reply.quickReplies)
                out << " [" << q << ']';
            out << '\n';
        }
        if (result.reply.endOfConversation)
            out << "(conversation ended)\n";
    }
    return kExitOk;
}

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"Shop assistant chatbot tools"};
    app.require_subcommand(1);

    std::string bundle;
    std::string corpus;
    std::string sheet = "orders.csv";
    std::string bind;
    std::string config;
    double minAccuracy = 0.9;
    std::optional<std::uint64_t> seed;

    auto* chat = app.add_subcommand("chat", "Talk to the bot on stdin/stdout");
    chat->add_option("--bundle", bundle, "Agent bundle JSON")->required();
    chat->add_option("--sheet", sheet, "Order sheet CSV");
    chat->add_option("--seed", seed, "Pin reply variant choice");
    std::optional<int> stepSeconds;
    chat->add_option("--step", stepSeconds, "Advance a simulated clock this many seconds per message")
        ->check(CLI::PositiveNumber);

    auto* validate = app.add_subcommand("validate", "Check a bundle and its commerce data");
    validate->add_option("--bundle", bundle, "Agent bundle JSON")->required();

    auto* eval = app.add_subcommand("eval", "Measure intent accuracy over a TSV corpus");
    eval->add_option("--bundle", bundle, "Agent bundle JSON")->required();
    eval->add_option("--corpus", corpus, "utterance<TAB>intent[<TAB>contexts]")->required();
    eval->add_option("--min-accuracy", minAccuracy, "Exit 1 below this accuracy");

    auto* orders = app.add_subcommand("orders", "List orders recorded in a sheet");
    orders->add_option("--sheet", sheet, "Order sheet CSV");

    auto* serve = app.add_subcommand("serve", "Run the HTTP gateway");
    serve->add_option("--config", config, "Gateway config JSON");
    serve->add_option("--bundle", bundle, "Agent bundle JSON");
    serve->add_option("--sheet", sheet, "Order sheet CSV");
    serve->add_option("--bind", bind, "host:port");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitIoError;
    }

    if (*chat)
        return cmd_chat(bundle, sheet, seed, in, out, err,
                        stepSeconds ? std::optional(std::chrono::seconds{*stepSeconds}) : std::nullopt);
    if (*validate)
        return cmd_validate(bundle, out, err);
    if (*eval)
        return cmd_eval(bundle, corpus, minAccuracy, out, err);
    if (*orders)
        return cmd_orders(sheet, out, err);

    gateway::GatewayConfig cfg;
    try {
        if (!config.empty())
            cfg = gateway::load_config(config);
        gateway::apply_env_overrides(cfg);
        if (!bundle.empty())
            cfg.bundlePath = bundle;
        if (serve->count("--sheet"))
            cfg.sheetPath = sheet;
        if (!bind.empty())
            cfg.bindAddress = bind;
        if (cfg.bundlePath.empty())
            throw gateway::ConfigError("serve needs --bundle or a config naming one");
        return gateway::serve(cfg, out);
    } catch (const gateway::ConfigError& e) {
        err << "error: " << e.what() << '\n';
    } catch (const BundleError& e) {
        err << "error: " << e.what() << '\n';
    } catch (const commerce::SheetError& e) {
        err << "error: " << e.what() << '\n';
    }
    return kExitIoError;
}

} // namespace shopbot::cli
