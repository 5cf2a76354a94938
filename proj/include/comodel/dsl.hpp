#pragma once

#include "comodel/scene.hpp"
#include "comodel/scene_host.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

/// Line-oriented modeling command language.
///
///     script    := (statement | comment | blank)*
///     statement := verb (key "=" value)+ NEWLINE
///     value     := number | "true" | "false" | "quoted string" | identifier | "(" number "," number "," number ")"
///
/// Identifiers are [A-Za-z_][A-Za-z0-9_]*, `#` starts a comment that runs to end of line, and
/// angles are written in degrees.
namespace comodel::dsl {

struct Ident {
    std::string name;
    bool operator==(const Ident&) const = default;
};

using ArgValue = std::variant<double, Ident, std::string, Vec3, bool>;

struct Arg {
    std::string key;
    ArgValue value;
    bool operator==(const Arg& other) const;
};

struct Statement {
    std::string verb;
    std::vector<Arg> args;

    const ArgValue* find(std::string_view key) const;
    bool operator==(const Statement&) const = default;
};

struct SourceSpan {
    int line = 0;
    int first_column = 0;
    int last_column = 0;
    bool operator==(const SourceSpan&) const = default;
};

struct Script {
    std::vector<Statement> statements;
    std::vector<SourceSpan> source_spans;
};

/// Structural equality: statements only, spans ignored.
bool same_structure(const Script& a, const Script& b);

const std::vector<std::string_view>& verbs();

class ParseError : public std::runtime_error {
public:
    ParseError(int line, int column, std::string expected, std::string found);

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }
    const std::string& expected() const noexcept { return expected_; }
    const std::string& found() const noexcept { return found_; }

private:
    int line_;
    int column_;
    std::string expected_;
    std::string found_;
};

/// Lines and columns are 1-based; the first error aborts the parse.
Script parse(std::string_view text);
/// One statement per line, args in order, LF-terminated. Comments and spans are not kept.
std::string format(const Script& script);
std::string format(const Statement& statement);
std::string format_value(const ArgValue& value);

struct StatementError {
    std::string code;
    std::string message;
    bool operator==(const StatementError&) const = default;
};

struct ExecReport {
    std::size_t executed = 0;
    std::optional<std::pair<std::size_t, StatementError>> failed_at;
    std::uint64_t revision_before = 0;
    std::uint64_t revision_after = 0;

    bool ok() const { return !failed_at.has_value(); }
};

nlohmann::json to_json(const ExecReport& report);

/// Applies statements in order and stops at the first failure; earlier effects stay in place.
/// `on_change` (if set) is told about every successful statement, one engine revision each.
ExecReport execute(Scene& scene, const Script& script, const ChangeSink& on_change = {});

/// Convenience: runs the whole script as one unit on the host's writer queue.
ExecReport execute(SceneHost& host, const Script& script);

}  // namespace comodel::dsl
