#pragma once

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "shopbot/agent_model.hpp"

namespace shopbot::cli {

// Stable contract for scripts and CI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;   // validation findings, accuracy below the bar
inline constexpr int kExitIoError = 2;  // unreadable or unparseable input

struct EvalCase {
    std::string utterance;
    std::string expectedIntent;
    std::vector<std::string> activeContexts;
    std::size_t line = 0;
};

class CorpusError : public std::runtime_error {
public:
    CorpusError(const std::string& what, std::size_t line) : std::runtime_error(what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// utterance TAB expectedIntent [TAB ctx1,ctx2]. Blank lines and lines
/// starting with '#' are skipped.
std::vector<EvalCase> parse_corpus(std::string_view text);

struct IntentCounts {
    int truePositive = 0;
    int falsePositive = 0;
    int falseNegative = 0;

    double precision() const;
    double recall() const;
};

struct EvalMiss {
    EvalCase input;
    std::string predicted;
    double confidence = 0.0;
};

struct EvalReport {
    int total = 0;
    int correct = 0;
    std::map<std::string, IntentCounts> perIntent;
    std::vector<EvalMiss> misses;

    double accuracy() const { return total ? static_cast<double>(correct) / total : 0.0; }
};

/// Throws CorpusError when a case names an intent the bundle lacks.
EvalReport evaluate(const AgentBundle& bundle, const std::vector<EvalCase>& cases);
void print_report(const EvalReport& report, std::ostream& out);

int cmd_validate(const std::filesystem::path& bundlePath, std::ostream& out, std::ostream& err);
int cmd_eval(const std::filesystem::path& bundlePath, const std::filesystem::path& corpusPath,
             double minAccuracy, std::ostream& out, std::ostream& err);
int cmd_orders(const std::filesystem::path& sheetPath, std::ostream& out, std::ostream& err);
/// With `step`, the session clock advances by that much per message instead
/// of following the wall clock, so piped scripts don't look like a burst.
int cmd_chat(const std::filesystem::path& bundlePath, const std::filesystem::path& sheetPath,
             std::optional<std::uint64_t> seed, std::istream& in, std::ostream& out, std::ostream& err,
             std::optional<std::chrono::seconds> step = std::nullopt);

/// Full command line entry point, shared by the executable and tests.
int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

} // namespace shopbot::cli
