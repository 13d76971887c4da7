#pragma once

// Grammar, AST, serializer and normalizer for the bracketed function-call
// answer format:
//
//   [func_name1(params_name1=params_value1, params_name2=params_value2), func_name2(...)]
//
// Values follow keyword-argument literal syntax: double-quoted strings, bare
// integers, floats, True/False, None, nested lists [...] and maps {...}.
// parse_strict accepts only the canonical rendering; parse_lenient repairs
// format-level defects (stray whitespace, quoted parameter names, quote
// style) without ever touching names or values.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

namespace fcc::fcall {

class ArgValue;

using ArgValueList = std::vector<ArgValue>;
// Insertion-ordered so round-trips preserve the source text's entry order.
using ArgValueMap = std::vector<std::pair<std::string, ArgValue>>;

class ArgValue {
public:
    enum class Kind { Null, Boolean, Integer, Float, String, List, Map };

    ArgValue() : v_(std::monostate{}) {}
    explicit ArgValue(bool b) : v_(b) {}
    explicit ArgValue(std::int64_t i) : v_(i) {}
    explicit ArgValue(double d) : v_(d) {}
    explicit ArgValue(std::string s) : v_(std::move(s)) {}
    explicit ArgValue(const char* s) : v_(std::string(s)) {}
    explicit ArgValue(ArgValueList l) : v_(std::move(l)) {}
    explicit ArgValue(ArgValueMap m) : v_(std::move(m)) {}

    Kind kind() const { return static_cast<Kind>(v_.index()); }

    bool is_null() const { return kind() == Kind::Null; }
    bool as_bool() const { return std::get<bool>(v_); }
    std::int64_t as_int() const { return std::get<std::int64_t>(v_); }
    double as_float() const { return std::get<double>(v_); }
    const std::string& as_string() const { return std::get<std::string>(v_); }
    const ArgValueList& as_list() const { return std::get<ArgValueList>(v_); }
    const ArgValueMap& as_map() const { return std::get<ArgValueMap>(v_); }

    friend bool operator==(const ArgValue& a, const ArgValue& b) { return a.v_ == b.v_; }
    friend bool operator!=(const ArgValue& a, const ArgValue& b) { return !(a == b); }

private:
    std::variant<std::monostate, bool, std::int64_t, double, std::string, ArgValueList, ArgValueMap> v_;
};

struct FunctionCall {
    std::string name;
    // Ordered; duplicate parameter names are a parse error.
    std::vector<std::pair<std::string, ArgValue>> args;

    friend bool operator==(const FunctionCall&, const FunctionCall&) = default;
};

struct CallList {
    std::vector<FunctionCall> calls;  // length >= 1 when produced by a parse

    friend bool operator==(const CallList&, const CallList&) = default;
};

enum class Severity { Fatal, Repairable };

enum class DiagCode {
    LeadingSpace,       // whitespace before the first call name (the xlam defect) or before '['
    InteriorSpace,      // whitespace inside a call where the canonical form has none
    TrailingSpace,      // whitespace after the closing ']'
    SeparatorSpacing,   // ',' or ':' not followed by exactly one space
    QuotedParamName,    // parameter name wrapped in quotes
    SingleQuotedString, // string literal using single quotes
    NoncanonicalNumber, // value preserved, spelling normalized (e.g. "+7", "007", ".5")
    NoncanonicalLiteral,// boolean/null literal from the other style (true vs True)
    BadValueLiteral,    // unrecognizable value token
    BadIdentifier,      // malformed function or parameter name
    BadStringEscape,    // unknown backslash escape
    UnterminatedString,
    MissingBracket,     // input does not start with '[' / missing closing ']'
    MissingParen,
    ExpectedEquals,
    ExpectedColon,
    ExpectedCommaOrParen,
    ExpectedCommaOrBracket,
    ExpectedCommaOrBrace,
    EmptyCallList,      // "[]" — a call list has at least one call
    DuplicateParam,
    DuplicateMapKey,
    TrailingChars,      // non-whitespace after the closing ']'
    DepthExceeded,
    IntegerOverflow,
    EmptyInput,
};

const char* diag_code_name(DiagCode code);

struct ParseDiagnostic {
    std::size_t offset = 0;  // byte offset into the input
    Severity severity = Severity::Fatal;
    DiagCode code = DiagCode::BadValueLiteral;
    std::string message;
};

enum class LiteralStyle { Python, Json };  // True/False/None vs true/false/null

struct ParserOptions {
    // Identifier profile: first char [A-Za-z_], rest alnum + '_' by default.
    bool allow_dot_in_names = false;
    bool allow_hyphen_in_names = false;
    int max_depth = 32;  // nesting cap for list/map values
    LiteralStyle literal_style = LiteralStyle::Python;
};

struct ParseResult {
    std::optional<CallList> calls;
    std::vector<ParseDiagnostic> diagnostics;

    bool ok() const { return calls.has_value(); }
    bool has_code(DiagCode code) const;
};

// Accepts exactly the canonical grammar; any deviation is an error.
ParseResult parse_strict(std::string_view text, const ParserOptions& opts = {});

// Repairs format-level defects and reports one diagnostic per repair.
// Names, parameter names (modulo unquoting) and values are never altered.
ParseResult parse_lenient(std::string_view text, const ParserOptions& opts = {});

// Canonical rendering. Total on valid ASTs; throws std::invalid_argument on
// non-finite floats (the AST invariant excludes them).
std::string serialize(const CallList& calls, const ParserOptions& opts = {});
std::string serialize(const FunctionCall& call, const ParserOptions& opts = {});
std::string serialize(const ArgValue& value, const ParserOptions& opts = {});

// Structural equality. Call order is always significant; with
// order_insensitive_args the argument order within each call is ignored.
bool ast_equal(const CallList& a, const CallList& b, bool order_insensitive_args = false);

nlohmann::ordered_json to_json(const ArgValue& value);
nlohmann::ordered_json to_json(const CallList& calls);
nlohmann::ordered_json to_json(const ParseDiagnostic& diag);

}  // namespace fcc::fcall
