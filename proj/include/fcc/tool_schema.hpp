#pragma once

// Candidate tool definitions and deterministic argument validation. The
// catalog loader understands the corpus tool-JSON dialect:
//
//   [{"name": "...", "description": "...",
//     "parameters": {"q": {"type": "str", "default": "London"}, ...}}]
//
// A parameter is optional iff it declares a default. Validation checks
// function lookup, declared/required parameters, and value types; the only
// implicit coercion is int where float is declared.

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fcc/fcall_syntax.hpp"
#include "json.hpp"

namespace fcc::schema {

enum class ParamType { Str, Int, Float, Bool, List, Dict, Any };

const char* param_type_name(ParamType type);
// Maps corpus type strings ("str", "int", "integer", "number", ...). Unknown
// strings yield Any with *known = false.
ParamType param_type_from_string(std::string_view text, bool* known = nullptr);

struct ParamSpec {
    std::string name;
    std::string description;
    ParamType type = ParamType::Any;
    std::optional<fcall::ArgValue> default_value;
    bool required = false;  // derived: no default => required

    bool has_default() const { return default_value.has_value(); }
};

struct ToolSpec {
    std::string name;
    std::string description;
    std::vector<ParamSpec> params;

    const ParamSpec* find_param(std::string_view param_name) const;
};

struct CatalogWarning {
    std::string tool;
    std::string param;
    std::string message;
};

struct ToolCatalog {
    std::vector<ToolSpec> tools;
    std::vector<CatalogWarning> warnings;

    const ToolSpec* find(std::string_view tool_name) const;
    bool empty() const { return tools.empty(); }
};

struct CatalogError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Throws CatalogError on malformed JSON or duplicate tool names. Unknown type
// strings and non-coercible defaults are recorded as warnings, not errors.
ToolCatalog load_catalog(const std::string& json_text);
ToolCatalog load_catalog(const nlohmann::json& doc);
inline ToolCatalog load_catalog(const char* json_text) {
    return load_catalog(std::string(json_text));
}

enum class CallIssueCode { UnknownFunction, UndeclaredParam, MissingRequired, TypeMismatch };

const char* call_issue_code_name(CallIssueCode code);

struct CallIssue {
    CallIssueCode code;
    std::string param;  // empty for call-level issues
    std::string message;
};

struct CallValidation {
    bool pass = true;
    std::vector<CallIssue> issues;
};

// True when the value satisfies the declared type (int satisfies float;
// nothing else is coerced).
bool value_matches_type(const fcall::ArgValue& value, ParamType type);

CallValidation validate_call(const fcall::FunctionCall& call, const ToolCatalog& catalog);
// All calls in the list validated against the same catalog; issues merged.
CallValidation validate_calls(const fcall::CallList& calls, const ToolCatalog& catalog);

nlohmann::ordered_json to_json(const CallValidation& validation);

}  // namespace fcc::schema
