#include "fcc/fcall_syntax.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace fcc::fcall {

namespace {

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Recursive-descent parser over the raw text. Every deviation from the
// canonical form is recorded as a diagnostic; fatal ones abort the parse.
// Strictness is decided by the caller: parse_strict rejects any diagnostic,
// parse_lenient keeps the AST when only repairable diagnostics occurred.
class Parser {
public:
    Parser(std::string_view text, const ParserOptions& opts) : text_(text), opts_(opts) {}

    ParseResult run() {
        ParseResult out;
        CallList calls;
        bool ok = parse_top(calls);
        out.diagnostics = std::move(diags_);
        if (ok) out.calls = std::move(calls);
        return out;
    }

private:
    std::string_view text_;
    const ParserOptions& opts_;
    std::size_t pos_ = 0;
    std::vector<ParseDiagnostic> diags_;

    bool at_end() const { return pos_ >= text_.size(); }
    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

    bool eat(char c) {
        if (peek() != c) return false;
        ++pos_;
        return true;
    }

    std::size_t eat_ws() {
        std::size_t n = 0;
        while (!at_end() && is_ws(text_[pos_])) {
            ++pos_;
            ++n;
        }
        return n;
    }

    void repair(DiagCode code, std::size_t offset, std::string message) {
        diags_.push_back({offset, Severity::Repairable, code, std::move(message)});
    }

    bool fatal(DiagCode code, std::size_t offset, std::string message) {
        diags_.push_back({std::min(offset, text_.size()), Severity::Fatal, code, std::move(message)});
        return false;
    }

    // Canonical separators are ", " and ": " exactly.
    void separator_space(char sep) {
        std::size_t start = pos_;
        std::size_t n = eat_ws();
        if (n == 1 && text_[start] == ' ') return;
        repair(DiagCode::SeparatorSpacing, start,
               n == 0 ? std::string("missing space after '") + sep + "'"
                      : std::string("noncanonical whitespace after '") + sep + "'");
    }

    bool parse_top(CallList& out) {
        if (text_.empty()) return fatal(DiagCode::EmptyInput, 0, "empty input");
        std::size_t ws = eat_ws();
        if (ws) repair(DiagCode::LeadingSpace, pos_ - ws, "whitespace before '['");
        if (!eat('[')) return fatal(DiagCode::MissingBracket, pos_, "expected '[' at start of call list");
        std::size_t ws2 = eat_ws();
        if (ws2) repair(DiagCode::LeadingSpace, pos_ - ws2, "whitespace between '[' and the function name");
        if (peek() == ']')
            return fatal(DiagCode::EmptyCallList, pos_, "call list must contain at least one call");
        while (true) {
            FunctionCall call;
            if (!parse_call(call)) return false;
            out.calls.push_back(std::move(call));
            std::size_t wsb = eat_ws();
            if (peek() == ',') {
                if (wsb) repair(DiagCode::SeparatorSpacing, pos_ - wsb, "whitespace before ','");
                ++pos_;
                separator_space(',');
                continue;
            }
            if (peek() == ']') {
                if (wsb) repair(DiagCode::InteriorSpace, pos_ - wsb, "whitespace before ']'");
                ++pos_;
                break;
            }
            if (at_end()) return fatal(DiagCode::MissingBracket, pos_, "missing closing ']'");
            return fatal(DiagCode::ExpectedCommaOrBracket, pos_, "expected ',' or ']' after call");
        }
        std::size_t wst = eat_ws();
        if (!at_end()) return fatal(DiagCode::TrailingChars, pos_, "unexpected text after ']'");
        if (wst) repair(DiagCode::TrailingSpace, pos_ - wst, "trailing whitespace after ']'");
        return true;
    }

    bool parse_call(FunctionCall& call) {
        if (!parse_identifier(call.name, "function name")) return false;
        std::size_t ws = eat_ws();
        if (ws) repair(DiagCode::InteriorSpace, pos_ - ws, "whitespace before '('");
        if (!eat('(')) return fatal(DiagCode::MissingParen, pos_, "expected '(' after function name");
        std::size_t ws2 = eat_ws();
        if (ws2) repair(DiagCode::InteriorSpace, pos_ - ws2, "whitespace after '('");
        if (peek() == ')') {
            ++pos_;
            return true;
        }
        while (true) {
            std::size_t name_off = pos_;
            std::string pname;
            if (!parse_param_name(pname)) return false;
            for (const auto& [existing, unused] : call.args) {
                if (existing == pname)
                    return fatal(DiagCode::DuplicateParam, name_off,
                                 "duplicate parameter name '" + pname + "'");
            }
            std::size_t wse = eat_ws();
            if (wse) repair(DiagCode::InteriorSpace, pos_ - wse, "whitespace before '='");
            if (!eat('=')) return fatal(DiagCode::ExpectedEquals, pos_, "expected '=' after parameter name");
            std::size_t wsv = eat_ws();
            if (wsv) repair(DiagCode::InteriorSpace, pos_ - wsv, "whitespace after '='");
            ArgValue value;
            if (!parse_value(value, 0)) return false;
            call.args.emplace_back(std::move(pname), std::move(value));
            std::size_t wsa = eat_ws();
            if (peek() == ',') {
                if (wsa) repair(DiagCode::SeparatorSpacing, pos_ - wsa, "whitespace before ','");
                ++pos_;
                separator_space(',');
                continue;
            }
            if (peek() == ')') {
                if (wsa) repair(DiagCode::InteriorSpace, pos_ - wsa, "whitespace before ')'");
                ++pos_;
                return true;
            }
            if (at_end()) return fatal(DiagCode::MissingParen, pos_, "missing closing ')'");
            return fatal(DiagCode::ExpectedCommaOrParen, pos_, "expected ',' or ')' after argument");
        }
    }

    bool parse_param_name(std::string& out) {
        char c = peek();
        if (c == '"' || c == '\'') {
            std::size_t off = pos_;
            std::string content;
            if (!parse_string_literal(content, /*style_diag=*/false)) return false;
            if (!valid_identifier(content))
                return fatal(DiagCode::BadIdentifier, off,
                             "quoted parameter name is not an identifier: '" + content + "'");
            repair(DiagCode::QuotedParamName, off, "parameter name '" + content + "' must not be quoted");
            out = std::move(content);
            return true;
        }
        return parse_identifier(out, "parameter name");
    }

    bool ident_rest_char(char c) const {
        return is_alnum(c) || c == '_' || (opts_.allow_dot_in_names && c == '.') ||
               (opts_.allow_hyphen_in_names && c == '-');
    }

    bool valid_identifier(std::string_view s) const {
        if (s.empty()) return false;
        if (!(is_alpha(s[0]) || s[0] == '_')) return false;
        for (std::size_t i = 1; i < s.size(); ++i)
            if (!ident_rest_char(s[i])) return false;
        return true;
    }

    bool parse_identifier(std::string& out, const char* what) {
        char c = peek();
        if (!(is_alpha(c) || c == '_'))
            return fatal(DiagCode::BadIdentifier, pos_, std::string("expected ") + what);
        std::size_t start = pos_;
        ++pos_;
        while (!at_end() && ident_rest_char(text_[pos_])) ++pos_;
        out.assign(text_.substr(start, pos_ - start));
        return true;
    }

    bool parse_value(ArgValue& out, int depth) {
        char c = peek();
        if (c == '"' || c == '\'') {
            std::string s;
            if (!parse_string_literal(s, /*style_diag=*/true)) return false;
            out = ArgValue(std::move(s));
            return true;
        }
        if (c == '-' || c == '+' || c == '.' || is_digit(c)) return parse_number(out);
        if (c == '[') return parse_list(out, depth);
        if (c == '{') return parse_map(out, depth);
        if (is_alpha(c) || c == '_') return parse_keyword(out);
        return fatal(DiagCode::BadValueLiteral, pos_, "expected a value");
    }

    bool parse_string_literal(std::string& out, bool style_diag) {
        std::size_t start = pos_;
        char quote = peek();
        if (quote == '\'' && style_diag)
            repair(DiagCode::SingleQuotedString, start, "single-quoted string");
        ++pos_;
        std::string s;
        while (true) {
            if (at_end()) return fatal(DiagCode::UnterminatedString, start, "unterminated string literal");
            char c = text_[pos_];
            if (c == quote) {
                ++pos_;
                break;
            }
            if (c == '\\') {
                ++pos_;
                if (at_end()) return fatal(DiagCode::UnterminatedString, start, "unterminated string literal");
                char e = text_[pos_];
                switch (e) {
                    case '"': s += '"'; break;
                    case '\'': s += '\''; break;
                    case '\\': s += '\\'; break;
                    case 'n': s += '\n'; break;
                    case 't': s += '\t'; break;
                    case 'r': s += '\r'; break;
                    default:
                        return fatal(DiagCode::BadStringEscape, pos_ - 1,
                                     std::string("unknown escape '\\") + e + "'");
                }
                ++pos_;
                continue;
            }
            s += c;
            ++pos_;
        }
        out = std::move(s);
        return true;
    }

    bool parse_number(ArgValue& out) {
        std::size_t start = pos_;
        bool noncanon = false;
        if (peek() == '+') {
            noncanon = true;  // canonical numbers carry no '+'
            ++pos_;
        } else if (peek() == '-') {
            ++pos_;
        }
        std::size_t int_start = pos_;
        while (is_digit(peek())) ++pos_;
        std::size_t int_len = pos_ - int_start;
        bool has_dot = false, has_exp = false;
        std::size_t frac_len = 0;
        if (peek() == '.') {
            has_dot = true;
            ++pos_;
            std::size_t fs = pos_;
            while (is_digit(peek())) ++pos_;
            frac_len = pos_ - fs;
        }
        if (peek() == 'e' || peek() == 'E') {
            has_exp = true;
            ++pos_;
            if (peek() == '+' || peek() == '-') ++pos_;
            std::size_t es = pos_;
            while (is_digit(peek())) ++pos_;
            if (pos_ == es) return fatal(DiagCode::BadValueLiteral, start, "malformed exponent");
        }
        if (int_len == 0 && frac_len == 0)
            return fatal(DiagCode::BadValueLiteral, start, "malformed number");
        if (int_len > 1 && text_[int_start] == '0') noncanon = true;  // leading zeros

        std::string lexeme(text_.substr(start, pos_ - start));
        if (!lexeme.empty() && lexeme[0] == '+') lexeme.erase(0, 1);
        if (has_dot || has_exp) {
            if (has_dot && (int_len == 0 || frac_len == 0)) noncanon = true;  // ".5" / "1."
            // Pad shorthand forms so from_chars sees digits on both sides.
            std::size_t dot = lexeme.find('.');
            if (dot != std::string::npos) {
                if (dot + 1 >= lexeme.size() || !is_digit(lexeme[dot + 1])) lexeme.insert(dot + 1, "0");
                if (dot == 0 || !is_digit(lexeme[dot - 1])) lexeme.insert(dot, "0");
            }
            double v = 0;
            auto [p, ec] = std::from_chars(lexeme.data(), lexeme.data() + lexeme.size(), v);
            if (ec != std::errc() || p != lexeme.data() + lexeme.size())
                return fatal(DiagCode::BadValueLiteral, start, "float literal out of range or malformed");
            out = ArgValue(v);
        } else {
            std::int64_t v = 0;
            auto [p, ec] = std::from_chars(lexeme.data(), lexeme.data() + lexeme.size(), v);
            if (ec == std::errc::result_out_of_range)
                return fatal(DiagCode::IntegerOverflow, start, "integer literal out of range");
            if (ec != std::errc() || p != lexeme.data() + lexeme.size())
                return fatal(DiagCode::BadValueLiteral, start, "malformed integer");
            out = ArgValue(v);
        }
        if (noncanon) repair(DiagCode::NoncanonicalNumber, start, "noncanonical number spelling");
        return true;
    }

    bool parse_keyword(ArgValue& out) {
        std::size_t start = pos_;
        while (is_alpha(peek()) || peek() == '_') ++pos_;
        std::string_view w = text_.substr(start, pos_ - start);
        bool python_canonical = opts_.literal_style == LiteralStyle::Python;
        bool from_python_set = true;
        if (w == "True") {
            out = ArgValue(true);
        } else if (w == "False") {
            out = ArgValue(false);
        } else if (w == "None") {
            out = ArgValue();
        } else if (w == "true") {
            out = ArgValue(true);
            from_python_set = false;
        } else if (w == "false") {
            out = ArgValue(false);
            from_python_set = false;
        } else if (w == "null") {
            out = ArgValue();
            from_python_set = false;
        } else {
            return fatal(DiagCode::BadValueLiteral, start,
                         "unrecognized value literal '" + std::string(w) + "'");
        }
        if (from_python_set != python_canonical)
            repair(DiagCode::NoncanonicalLiteral, start,
                   "literal '" + std::string(w) + "' is not in the configured style");
        return true;
    }

    bool parse_list(ArgValue& out, int depth) {
        if (depth >= opts_.max_depth)
            return fatal(DiagCode::DepthExceeded, pos_, "value nesting exceeds depth cap");
        ++pos_;  // '['
        ArgValueList items;
        std::size_t ws = eat_ws();
        if (ws) repair(DiagCode::InteriorSpace, pos_ - ws, "whitespace after '['");
        if (peek() == ']') {
            ++pos_;
            out = ArgValue(std::move(items));
            return true;
        }
        while (true) {
            ArgValue v;
            if (!parse_value(v, depth + 1)) return false;
            items.push_back(std::move(v));
            std::size_t wsa = eat_ws();
            if (peek() == ',') {
                if (wsa) repair(DiagCode::SeparatorSpacing, pos_ - wsa, "whitespace before ','");
                ++pos_;
                separator_space(',');
                continue;
            }
            if (peek() == ']') {
                if (wsa) repair(DiagCode::InteriorSpace, pos_ - wsa, "whitespace before ']'");
                ++pos_;
                break;
            }
            if (at_end()) return fatal(DiagCode::MissingBracket, pos_, "missing closing ']'");
            return fatal(DiagCode::ExpectedCommaOrBracket, pos_, "expected ',' or ']' in list");
        }
        out = ArgValue(std::move(items));
        return true;
    }

    bool parse_map(ArgValue& out, int depth) {
        if (depth >= opts_.max_depth)
            return fatal(DiagCode::DepthExceeded, pos_, "value nesting exceeds depth cap");
        ++pos_;  // '{'
        ArgValueMap entries;
        std::size_t ws = eat_ws();
        if (ws) repair(DiagCode::InteriorSpace, pos_ - ws, "whitespace after '{'");
        if (peek() == '}') {
            ++pos_;
            out = ArgValue(std::move(entries));
            return true;
        }
        while (true) {
            char c = peek();
            std::size_t key_off = pos_;
            if (c != '"' && c != '\'')
                return fatal(DiagCode::BadValueLiteral, pos_, "map key must be a string literal");
            std::string key;
            if (!parse_string_literal(key, /*style_diag=*/true)) return false;
            for (const auto& [existing, unused] : entries) {
                if (existing == key)
                    return fatal(DiagCode::DuplicateMapKey, key_off, "duplicate map key '" + key + "'");
            }
            std::size_t wsk = eat_ws();
            if (wsk) repair(DiagCode::InteriorSpace, pos_ - wsk, "whitespace before ':'");
            if (!eat(':')) return fatal(DiagCode::ExpectedColon, pos_, "expected ':' after map key");
            separator_space(':');
            ArgValue v;
            if (!parse_value(v, depth + 1)) return false;
            entries.emplace_back(std::move(key), std::move(v));
            std::size_t wsa = eat_ws();
            if (peek() == ',') {
                if (wsa) repair(DiagCode::SeparatorSpacing, pos_ - wsa, "whitespace before ','");
                ++pos_;
                separator_space(',');
                continue;
            }
            if (peek() == '}') {
                if (wsa) repair(DiagCode::InteriorSpace, pos_ - wsa, "whitespace before '}'");
                ++pos_;
                break;
            }
            if (at_end()) return fatal(DiagCode::ExpectedCommaOrBrace, pos_, "missing closing '}'");
            return fatal(DiagCode::ExpectedCommaOrBrace, pos_, "expected ',' or '}' in map");
        }
        out = ArgValue(std::move(entries));
        return true;
    }
};

void serialize_string(const std::string& s, std::string& out) {
    out += '"';
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    out += '"';
}

std::string format_float(double d) {
    if (!std::isfinite(d)) throw std::invalid_argument("non-finite float in call AST");
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), d);
    if (ec != std::errc()) throw std::invalid_argument("float formatting failed");
    std::string s(buf, p);
    // Keep the lexeme recognizably a float so the variant survives a round-trip.
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
        s.find('E') == std::string::npos)
        s += ".0";
    return s;
}

void serialize_value(const ArgValue& v, std::string& out, const ParserOptions& opts) {
    bool python = opts.literal_style == LiteralStyle::Python;
    switch (v.kind()) {
        case ArgValue::Kind::Null:
            out += python ? "None" : "null";
            break;
        case ArgValue::Kind::Boolean:
            out += v.as_bool() ? (python ? "True" : "true") : (python ? "False" : "false");
            break;
        case ArgValue::Kind::Integer:
            out += std::to_string(v.as_int());
            break;
        case ArgValue::Kind::Float:
            out += format_float(v.as_float());
            break;
        case ArgValue::Kind::String:
            serialize_string(v.as_string(), out);
            break;
        case ArgValue::Kind::List: {
            out += '[';
            bool first = true;
            for (const auto& item : v.as_list()) {
                if (!first) out += ", ";
                first = false;
                serialize_value(item, out, opts);
            }
            out += ']';
            break;
        }
        case ArgValue::Kind::Map: {
            out += '{';
            bool first = true;
            for (const auto& [key, value] : v.as_map()) {
                if (!first) out += ", ";
                first = false;
                serialize_string(key, out);
                out += ": ";
                serialize_value(value, out, opts);
            }
            out += '}';
            break;
        }
    }
}

void serialize_call(const FunctionCall& call, std::string& out, const ParserOptions& opts) {
    out += call.name;
    out += '(';
    bool first = true;
    for (const auto& [name, value] : call.args) {
        if (!first) out += ", ";
        first = false;
        out += name;
        out += '=';
        serialize_value(value, out, opts);
    }
    out += ')';
}

}  // namespace

const char* diag_code_name(DiagCode code) {
    switch (code) {
        case DiagCode::LeadingSpace: return "LEADING_SPACE";
        case DiagCode::InteriorSpace: return "INTERIOR_SPACE";
        case DiagCode::TrailingSpace: return "TRAILING_SPACE";
        case DiagCode::SeparatorSpacing: return "SEPARATOR_SPACING";
        case DiagCode::QuotedParamName: return "QUOTED_PARAM_NAME";
        case DiagCode::SingleQuotedString: return "SINGLE_QUOTED_STRING";
        case DiagCode::NoncanonicalNumber: return "NONCANONICAL_NUMBER";
        case DiagCode::NoncanonicalLiteral: return "NONCANONICAL_LITERAL";
        case DiagCode::BadValueLiteral: return "BAD_VALUE_LITERAL";
        case DiagCode::BadIdentifier: return "BAD_IDENTIFIER";
        case DiagCode::BadStringEscape: return "BAD_STRING_ESCAPE";
        case DiagCode::UnterminatedString: return "UNTERMINATED_STRING";
        case DiagCode::MissingBracket: return "MISSING_BRACKET";
        case DiagCode::MissingParen: return "MISSING_PAREN";
        case DiagCode::ExpectedEquals: return "EXPECTED_EQUALS";
        case DiagCode::ExpectedColon: return "EXPECTED_COLON";
        case DiagCode::ExpectedCommaOrParen: return "EXPECTED_COMMA_OR_PAREN";
        case DiagCode::ExpectedCommaOrBracket: return "EXPECTED_COMMA_OR_BRACKET";
        case DiagCode::ExpectedCommaOrBrace: return "EXPECTED_COMMA_OR_BRACE";
        case DiagCode::EmptyCallList: return "EMPTY_CALL_LIST";
        case DiagCode::DuplicateParam: return "DUPLICATE_PARAM";
        case DiagCode::DuplicateMapKey: return "DUPLICATE_MAP_KEY";
        case DiagCode::TrailingChars: return "TRAILING_CHARS";
        case DiagCode::DepthExceeded: return "DEPTH_EXCEEDED";
        case DiagCode::IntegerOverflow: return "INTEGER_OVERFLOW";
        case DiagCode::EmptyInput: return "EMPTY_INPUT";
    }
    return "UNKNOWN";
}

bool ParseResult::has_code(DiagCode code) const {
    return std::any_of(diagnostics.begin(), diagnostics.end(),
                       [code](const ParseDiagnostic& d) { return d.code == code; });
}

ParseResult parse_strict(std::string_view text, const ParserOptions& opts) {
    ParseResult r = Parser(text, opts).run();
    if (!r.diagnostics.empty()) r.calls.reset();
    return r;
}

ParseResult parse_lenient(std::string_view text, const ParserOptions& opts) {
    return Parser(text, opts).run();
}

std::string serialize(const CallList& calls, const ParserOptions& opts) {
    std::string out = "[";
    bool first = true;
    for (const auto& call : calls.calls) {
        if (!first) out += ", ";
        first = false;
        serialize_call(call, out, opts);
    }
    out += ']';
    return out;
}

std::string serialize(const FunctionCall& call, const ParserOptions& opts) {
    std::string out;
    serialize_call(call, out, opts);
    return out;
}

std::string serialize(const ArgValue& value, const ParserOptions& opts) {
    std::string out;
    serialize_value(value, out, opts);
    return out;
}

bool ast_equal(const CallList& a, const CallList& b, bool order_insensitive_args) {
    if (!order_insensitive_args) return a == b;
    if (a.calls.size() != b.calls.size()) return false;
    for (std::size_t i = 0; i < a.calls.size(); ++i) {
        const auto& ca = a.calls[i];
        const auto& cb = b.calls[i];
        if (ca.name != cb.name || ca.args.size() != cb.args.size()) return false;
        auto sorted = [](const FunctionCall& c) {
            auto args = c.args;
            std::sort(args.begin(), args.end(),
                      [](const auto& x, const auto& y) { return x.first < y.first; });
            return args;
        };
        if (sorted(ca) != sorted(cb)) return false;
    }
    return true;
}

nlohmann::ordered_json to_json(const ArgValue& value) {
    using json = nlohmann::ordered_json;
    switch (value.kind()) {
        case ArgValue::Kind::Null: return nullptr;
        case ArgValue::Kind::Boolean: return value.as_bool();
        case ArgValue::Kind::Integer: return value.as_int();
        case ArgValue::Kind::Float: return value.as_float();
        case ArgValue::Kind::String: return value.as_string();
        case ArgValue::Kind::List: {
            json arr = json::array();
            for (const auto& item : value.as_list()) arr.push_back(to_json(item));
            return arr;
        }
        case ArgValue::Kind::Map: {
            json obj = json::object();
            for (const auto& [key, v] : value.as_map()) obj[key] = to_json(v);
            return obj;
        }
    }
    return nullptr;
}

nlohmann::ordered_json to_json(const CallList& calls) {
    using json = nlohmann::ordered_json;
    json arr = json::array();
    for (const auto& call : calls.calls) {
        json args = json::array();
        for (const auto& [name, value] : call.args)
            args.push_back(json{{"name", name}, {"value", to_json(value)}});
        arr.push_back(json{{"name", call.name}, {"args", std::move(args)}});
    }
    return json{{"calls", std::move(arr)}};
}

nlohmann::ordered_json to_json(const ParseDiagnostic& diag) {
    return nlohmann::ordered_json{
        {"offset", diag.offset},
        {"severity", diag.severity == Severity::Fatal ? "fatal" : "repairable"},
        {"code", diag_code_name(diag.code)},
        {"message", diag.message},
    };
}

}  // namespace fcc::fcall
