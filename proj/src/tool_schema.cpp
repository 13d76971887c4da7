#include "fcc/tool_schema.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace fcc::schema {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

const char* value_kind_name(fcall::ArgValue::Kind kind) {
    using K = fcall::ArgValue::Kind;
    switch (kind) {
        case K::Null: return "null";
        case K::Boolean: return "bool";
        case K::Integer: return "int";
        case K::Float: return "float";
        case K::String: return "str";
        case K::List: return "list";
        case K::Map: return "dict";
    }
    return "?";
}

fcall::ArgValue json_to_value(const nlohmann::json& j) {
    using fcall::ArgValue;
    if (j.is_null()) return ArgValue();
    if (j.is_boolean()) return ArgValue(j.get<bool>());
    if (j.is_number_integer()) return ArgValue(j.get<std::int64_t>());
    if (j.is_number_unsigned()) return ArgValue(static_cast<std::int64_t>(j.get<std::uint64_t>()));
    if (j.is_number_float()) return ArgValue(j.get<double>());
    if (j.is_string()) return ArgValue(j.get<std::string>());
    if (j.is_array()) {
        fcall::ArgValueList items;
        for (const auto& item : j) items.push_back(json_to_value(item));
        return ArgValue(std::move(items));
    }
    fcall::ArgValueMap entries;
    for (auto it = j.begin(); it != j.end(); ++it)
        entries.emplace_back(it.key(), json_to_value(it.value()));
    return ArgValue(std::move(entries));
}

// Attempts to bring a raw default in line with the declared type. The corpus
// frequently stores numeric defaults as strings ("3" for an int parameter);
// parse those. Returns false when the value cannot represent the type.
bool coerce_default(fcall::ArgValue& value, ParamType type) {
    using fcall::ArgValue;
    if (value_matches_type(value, type)) return true;
    if (value.kind() != ArgValue::Kind::String) return false;
    const std::string& s = value.as_string();
    switch (type) {
        case ParamType::Int: {
            std::int64_t v = 0;
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc() || p != s.data() + s.size()) return false;
            value = ArgValue(v);
            return true;
        }
        case ParamType::Float: {
            double v = 0;
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc() || p != s.data() + s.size()) return false;
            value = ArgValue(v);
            return true;
        }
        case ParamType::Bool: {
            std::string l = lower(s);
            if (l == "true") {
                value = ArgValue(true);
                return true;
            }
            if (l == "false") {
                value = ArgValue(false);
                return true;
            }
            return false;
        }
        case ParamType::List:
        case ParamType::Dict: {
            auto parsed = nlohmann::json::parse(s, nullptr, false);
            if (parsed.is_discarded()) return false;
            fcall::ArgValue v = json_to_value(parsed);
            if (!value_matches_type(v, type)) return false;
            value = std::move(v);
            return true;
        }
        default:
            return false;
    }
}

}  // namespace

const char* param_type_name(ParamType type) {
    switch (type) {
        case ParamType::Str: return "str";
        case ParamType::Int: return "int";
        case ParamType::Float: return "float";
        case ParamType::Bool: return "bool";
        case ParamType::List: return "list";
        case ParamType::Dict: return "dict";
        case ParamType::Any: return "any";
    }
    return "?";
}

ParamType param_type_from_string(std::string_view text, bool* known) {
    std::string t = lower(text);
    if (known) *known = true;
    if (t == "str" || t == "string" || t == "text") return ParamType::Str;
    if (t == "int" || t == "integer") return ParamType::Int;
    if (t == "float" || t == "double" || t == "number") return ParamType::Float;
    if (t == "bool" || t == "boolean") return ParamType::Bool;
    if (t == "list" || t == "array") return ParamType::List;
    if (t == "dict" || t == "object" || t == "map") return ParamType::Dict;
    if (t == "any") return ParamType::Any;
    if (known) *known = false;
    return ParamType::Any;
}

const ParamSpec* ToolSpec::find_param(std::string_view param_name) const {
    for (const auto& p : params)
        if (p.name == param_name) return &p;
    return nullptr;
}

const ToolSpec* ToolCatalog::find(std::string_view tool_name) const {
    for (const auto& t : tools)
        if (t.name == tool_name) return &t;
    return nullptr;
}

ToolCatalog load_catalog(const std::string& json_text) {
    auto doc = nlohmann::json::parse(json_text, nullptr, false);
    if (doc.is_discarded()) throw CatalogError("malformed tool JSON");
    return load_catalog(doc);
}

ToolCatalog load_catalog(const nlohmann::json& doc) {
    if (!doc.is_array()) throw CatalogError("tool JSON must be an array of tool objects");
    ToolCatalog catalog;
    for (const auto& entry : doc) {
        if (!entry.is_object() || !entry.contains("name") || !entry["name"].is_string())
            throw CatalogError("tool entry missing string 'name'");
        ToolSpec tool;
        tool.name = entry["name"].get<std::string>();
        if (catalog.find(tool.name))
            throw CatalogError("duplicate tool name '" + tool.name + "'");
        if (entry.contains("description") && entry["description"].is_string())
            tool.description = entry["description"].get<std::string>();
        if (entry.contains("parameters")) {
            const auto& params = entry["parameters"];
            if (!params.is_object())
                throw CatalogError("tool '" + tool.name + "': 'parameters' must be an object");
            for (auto it = params.begin(); it != params.end(); ++it) {
                ParamSpec spec;
                spec.name = it.key();
                const auto& body = it.value();
                if (body.is_object()) {
                    if (body.contains("description") && body["description"].is_string())
                        spec.description = body["description"].get<std::string>();
                    if (body.contains("type") && body["type"].is_string()) {
                        bool known = true;
                        spec.type = param_type_from_string(body["type"].get<std::string>(), &known);
                        if (!known)
                            catalog.warnings.push_back(
                                {tool.name, spec.name,
                                 "unknown type '" + body["type"].get<std::string>() +
                                     "', treating as any"});
                    }
                    if (body.contains("default")) {
                        fcall::ArgValue def = json_to_value(body["default"]);
                        if (!coerce_default(def, spec.type))
                            catalog.warnings.push_back(
                                {tool.name, spec.name,
                                 std::string("default not coercible to declared type '") +
                                     param_type_name(spec.type) + "'"});
                        spec.default_value = std::move(def);
                    }
                }
                spec.required = !spec.has_default();
                tool.params.push_back(std::move(spec));
            }
        }
        catalog.tools.push_back(std::move(tool));
    }
    return catalog;
}

const char* call_issue_code_name(CallIssueCode code) {
    switch (code) {
        case CallIssueCode::UnknownFunction: return "UNKNOWN_FUNCTION";
        case CallIssueCode::UndeclaredParam: return "UNDECLARED_PARAM";
        case CallIssueCode::MissingRequired: return "MISSING_REQUIRED";
        case CallIssueCode::TypeMismatch: return "TYPE_MISMATCH";
    }
    return "UNKNOWN";
}

bool value_matches_type(const fcall::ArgValue& value, ParamType type) {
    using K = fcall::ArgValue::Kind;
    switch (type) {
        case ParamType::Any: return true;
        case ParamType::Str: return value.kind() == K::String;
        case ParamType::Int: return value.kind() == K::Integer;
        case ParamType::Float: return value.kind() == K::Float || value.kind() == K::Integer;
        case ParamType::Bool: return value.kind() == K::Boolean;
        case ParamType::List: return value.kind() == K::List;
        case ParamType::Dict: return value.kind() == K::Map;
    }
    return false;
}

CallValidation validate_call(const fcall::FunctionCall& call, const ToolCatalog& catalog) {
    CallValidation out;
    const ToolSpec* tool = catalog.find(call.name);
    if (!tool) {
        out.pass = false;
        out.issues.push_back({CallIssueCode::UnknownFunction, "",
                              "function '" + call.name + "' not in candidate tools"});
        return out;
    }
    for (const auto& [pname, value] : call.args) {
        const ParamSpec* spec = tool->find_param(pname);
        if (!spec) {
            out.issues.push_back({CallIssueCode::UndeclaredParam, pname,
                                  "parameter '" + pname + "' not declared by '" + call.name + "'"});
            continue;
        }
        if (!value_matches_type(value, spec->type))
            out.issues.push_back(
                {CallIssueCode::TypeMismatch, pname,
                 "parameter '" + pname + "': expected " + param_type_name(spec->type) + ", got " +
                     value_kind_name(value.kind())});
    }
    for (const auto& spec : tool->params) {
        if (!spec.required) continue;
        bool supplied = std::any_of(call.args.begin(), call.args.end(),
                                    [&](const auto& a) { return a.first == spec.name; });
        if (!supplied)
            out.issues.push_back({CallIssueCode::MissingRequired, spec.name,
                                  "required parameter '" + spec.name + "' missing"});
    }
    out.pass = out.issues.empty();
    return out;
}

CallValidation validate_calls(const fcall::CallList& calls, const ToolCatalog& catalog) {
    CallValidation out;
    for (const auto& call : calls.calls) {
        CallValidation one = validate_call(call, catalog);
        out.pass = out.pass && one.pass;
        out.issues.insert(out.issues.end(), one.issues.begin(), one.issues.end());
    }
    return out;
}

nlohmann::ordered_json to_json(const CallValidation& validation) {
    nlohmann::ordered_json issues = nlohmann::ordered_json::array();
    for (const auto& issue : validation.issues)
        issues.push_back({{"code", call_issue_code_name(issue.code)},
                          {"param", issue.param},
                          {"message", issue.message}});
    return {{"pass", validation.pass}, {"issues", std::move(issues)}};
}

}  // namespace fcc::schema
