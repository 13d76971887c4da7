#include <array>
#include <string>
#include <vector>

#include "doctest.h"
#include "fcc/fcall_syntax.hpp"
#include "testutil.hpp"

using namespace fcc::fcall;

namespace {

// The defective answer from the weather-forecast corpus record: an extra
// space between the opening bracket and the function name.
const char* kXlamBadAnswer =
    "[ forecast_weather_api(q=\"Chicago\", days=7), forecast_weather_api(q=\"Toronto\", days=7)]";
const char* kXlamRepairedAnswer =
    "[forecast_weather_api(q=\"Chicago\", days=7), forecast_weather_api(q=\"Toronto\", days=7)]";
const char* kCaseStudyCall = "[matchschedules(day=28, month=2, year=2024)]";

// Independent reference scanner: extracts (call, param, value-lexeme) triples
// while dropping whitespace outside strings and unquoting parameter names.
// Deliberately not the parser: a flat character scan for simple answers.
std::vector<std::array<std::string, 3>> reference_triples(const std::string& text) {
    std::string flat;
    char quote = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quote) {
            flat += c;
            if (c == '\\' && i + 1 < text.size()) {
                flat += text[++i];
            } else if (c == quote) {
                quote = 0;
            }
        } else if (c == '"' || c == '\'') {
            quote = c;
            flat += c;
        } else if (c != ' ' && c != '\t' && c != '\n' && c != '\r') {
            flat += c;
        }
    }
    std::vector<std::array<std::string, 3>> out;
    std::size_t i = 1;  // skip '['
    while (i < flat.size() && flat[i] != ']') {
        if (flat[i] == ',') {
            ++i;
            continue;
        }
        std::size_t paren = flat.find('(', i);
        std::string call = flat.substr(i, paren - i);
        i = paren + 1;
        while (flat[i] != ')') {
            if (flat[i] == ',') {
                ++i;
                continue;
            }
            std::size_t eq = flat.find('=', i);
            std::string param = flat.substr(i, eq - i);
            if (param.size() >= 2 && (param.front() == '"' || param.front() == '\''))
                param = param.substr(1, param.size() - 2);
            i = eq + 1;
            std::string value;
            if (flat[i] == '"' || flat[i] == '\'') {
                char q = flat[i];
                value += '"';
                ++i;
                while (flat[i] != q) {
                    if (flat[i] == '\\') value += flat[i++];
                    value += flat[i++];
                }
                value += '"';
                ++i;
            } else {
                while (flat[i] != ',' && flat[i] != ')') value += flat[i++];
            }
            out.push_back({call, param, value});
        }
        ++i;  // ')'
    }
    return out;
}

}  // namespace

TEST_SUITE("fcall_syntax") {

TEST_CASE("strict parse of the canonical case-study call") {
    auto r = parse_strict(kCaseStudyCall);
    REQUIRE(r.ok());
    REQUIRE(r.diagnostics.empty());
    REQUIRE(r.calls->calls.size() == 1);
    const auto& call = r.calls->calls[0];
    CHECK(call.name == "matchschedules");
    REQUIRE(call.args.size() == 3);
    CHECK(call.args[0].first == "day");
    CHECK(call.args[0].second == ArgValue(std::int64_t{28}));
    CHECK(call.args[1].second == ArgValue(std::int64_t{2}));
    CHECK(call.args[2].second == ArgValue(std::int64_t{2024}));
    CHECK(serialize(*r.calls) == kCaseStudyCall);
}

TEST_CASE("strict rejects the defective corpus answer with LEADING_SPACE") {
    auto r = parse_strict(kXlamBadAnswer);
    CHECK(!r.ok());
    CHECK(r.has_code(DiagCode::LeadingSpace));
}

TEST_CASE("lenient repairs the defective corpus answer") {
    auto r = parse_lenient(kXlamBadAnswer);
    REQUIRE(r.ok());
    REQUIRE(r.calls->calls.size() == 2);
    CHECK(r.calls->calls[0].name == "forecast_weather_api");
    CHECK(r.calls->calls[0].args[0].second == ArgValue("Chicago"));
    CHECK(r.calls->calls[0].args[1].second == ArgValue(std::int64_t{7}));
    CHECK(r.calls->calls[1].args[0].second == ArgValue("Toronto"));
    CHECK(r.has_code(DiagCode::LeadingSpace));
    CHECK(serialize(*r.calls) == kXlamRepairedAnswer);

    // Repair preserves content: the reference scanner agrees on all triples.
    auto ref = reference_triples(kXlamBadAnswer);
    REQUIRE(ref.size() == 4);
    CHECK(ref[0] == std::array<std::string, 3>{"forecast_weather_api", "q", "\"Chicago\""});
    CHECK(ref[1] == std::array<std::string, 3>{"forecast_weather_api", "days", "7"});
    CHECK(ref[2] == std::array<std::string, 3>{"forecast_weather_api", "q", "\"Toronto\""});
    std::size_t k = 0;
    for (const auto& call : r.calls->calls)
        for (const auto& [p, v] : call.args) {
            CHECK(call.name == ref[k][0]);
            CHECK(p == ref[k][1]);
            CHECK(serialize(v) == ref[k][2]);
            ++k;
        }
}

TEST_CASE("empty call list is an error") {
    CHECK(!parse_strict("[]").ok());
    CHECK(parse_strict("[]").has_code(DiagCode::EmptyCallList));
    CHECK(!parse_lenient("[]").ok());
}

TEST_CASE("empty input") {
    auto r = parse_strict("");
    CHECK(!r.ok());
    CHECK(r.has_code(DiagCode::EmptyInput));
}

TEST_CASE("quoted parameter names are unquoted with a diagnostic") {
    auto r = parse_lenient("[getPrivacyViolationRisk(\"data\"=\"v1\")]");
    REQUIRE(r.ok());
    CHECK(r.calls->calls[0].args[0].first == "data");
    CHECK(r.calls->calls[0].args[0].second == ArgValue("v1"));
    CHECK(r.has_code(DiagCode::QuotedParamName));
    CHECK(!parse_strict("[getPrivacyViolationRisk(\"data\"=\"v1\")]").ok());

    auto single = parse_lenient("[getPrivacyViolationRisk('data'='v1')]");
    REQUIRE(single.ok());
    CHECK(single.calls->calls[0].args[0].first == "data");
    CHECK(single.has_code(DiagCode::QuotedParamName));
}

TEST_CASE("duplicate parameter names are fatal in both modes") {
    CHECK(!parse_strict("[f(a=1, a=2)]").ok());
    auto r = parse_lenient("[f(a=1, a=2)]");
    CHECK(!r.ok());
    CHECK(r.has_code(DiagCode::DuplicateParam));
}

TEST_CASE("integer and string values are distinct") {
    auto a = parse_strict("[f(days=7)]");
    auto b = parse_strict("[f(days=\"7\")]");
    REQUIRE(a.ok());
    REQUIRE(b.ok());
    CHECK(!ast_equal(*a.calls, *b.calls));
    CHECK(!ast_equal(*a.calls, *b.calls, /*order_insensitive_args=*/true));
}

TEST_CASE("argument order flag") {
    auto a = parse_strict("[m(day=28, month=2)]");
    auto b = parse_strict("[m(month=2, day=28)]");
    REQUIRE(a.ok());
    REQUIRE(b.ok());
    CHECK(!ast_equal(*a.calls, *b.calls));
    CHECK(ast_equal(*a.calls, *b.calls, true));

    // Call order stays significant even with the flag.
    auto ab = parse_strict("[f(x=1), g(y=2)]");
    auto ba = parse_strict("[g(y=2), f(x=1)]");
    REQUIRE(ab.ok());
    REQUIRE(ba.ok());
    CHECK(!ast_equal(*ab.calls, *ba.calls, true));
}

TEST_CASE("number lexemes") {
    auto ints = parse_strict("[f(a=7, b=-3, c=0)]");
    REQUIRE(ints.ok());
    CHECK(ints.calls->calls[0].args[0].second.kind() == ArgValue::Kind::Integer);

    auto floats = parse_strict("[f(a=1.5, b=-0.25, c=1e3, d=2.5e-4)]");
    REQUIRE(floats.ok());
    CHECK(floats.calls->calls[0].args[0].second == ArgValue(1.5));
    CHECK(floats.calls->calls[0].args[2].second == ArgValue(1000.0));
    CHECK(floats.calls->calls[0].args[2].second.kind() == ArgValue::Kind::Float);

    for (const char* text : {"[f(a=.5)]", "[f(a=1.)]", "[f(a=007)]", "[f(a=+7)]"}) {
        CAPTURE(text);
        CHECK(!parse_strict(text).ok());
        auto lenient = parse_lenient(text);
        REQUIRE(lenient.ok());
        CHECK(lenient.has_code(DiagCode::NoncanonicalNumber));
    }
    CHECK(parse_lenient("[f(a=.5)]").calls->calls[0].args[0].second == ArgValue(0.5));
    CHECK(parse_lenient("[f(a=+7)]").calls->calls[0].args[0].second == ArgValue(std::int64_t{7}));

    CHECK(!parse_lenient("[f(a=1e)]").ok());
    CHECK(parse_lenient("[f(a=99999999999999999999999)]").has_code(DiagCode::IntegerOverflow));
}

TEST_CASE("boolean and null literal styles") {
    auto py = parse_strict("[f(a=True, b=False, c=None)]");
    REQUIRE(py.ok());
    CHECK(py.calls->calls[0].args[0].second == ArgValue(true));
    CHECK(py.calls->calls[0].args[2].second.is_null());

    CHECK(!parse_strict("[f(a=true)]").ok());
    auto lenient = parse_lenient("[f(a=true, b=null)]");
    REQUIRE(lenient.ok());
    CHECK(lenient.has_code(DiagCode::NoncanonicalLiteral));
    CHECK(lenient.calls->calls[0].args[0].second == ArgValue(true));

    ParserOptions json_style;
    json_style.literal_style = LiteralStyle::Json;
    CHECK(parse_strict("[f(a=true, b=null)]", json_style).ok());
    CHECK(!parse_strict("[f(a=True)]", json_style).ok());
    CHECK(serialize(*parse_strict("[f(a=true)]", json_style).calls, json_style) == "[f(a=true)]");

    CHECK(!parse_lenient("[f(a=maybe)]").ok());
    CHECK(parse_lenient("[f(a=maybe)]").has_code(DiagCode::BadValueLiteral));
}

TEST_CASE("nested lists and maps") {
    auto r = parse_strict("[f(a=[1, 2, {\"k\": \"v\", \"n\": [3]}], b={})]");
    REQUIRE(r.ok());
    const auto& a = r.calls->calls[0].args[0].second;
    REQUIRE(a.kind() == ArgValue::Kind::List);
    REQUIRE(a.as_list().size() == 3);
    CHECK(a.as_list()[2].as_map()[0].first == "k");
    CHECK(serialize(*r.calls) == "[f(a=[1, 2, {\"k\": \"v\", \"n\": [3]}], b={})]");

    auto dup = parse_lenient("[f(a={\"k\": 1, \"k\": 2})]");
    CHECK(!dup.ok());
    CHECK(dup.has_code(DiagCode::DuplicateMapKey));
}

TEST_CASE("depth cap") {
    std::string deep = "[f(a=";
    for (int i = 0; i < 40; ++i) deep += '[';
    deep += '1';
    for (int i = 0; i < 40; ++i) deep += ']';
    deep += ")]";
    auto r = parse_lenient(deep);
    CHECK(!r.ok());
    CHECK(r.has_code(DiagCode::DepthExceeded));

    ParserOptions roomy;
    roomy.max_depth = 64;
    CHECK(parse_lenient(deep, roomy).ok());
}

TEST_CASE("structural failures are fatal") {
    CHECK(parse_lenient("f(x=1)").has_code(DiagCode::MissingBracket));
    CHECK(parse_lenient("[f(x=1]").has_code(DiagCode::ExpectedCommaOrParen));
    CHECK(parse_lenient("[f(x=1)").has_code(DiagCode::MissingBracket));
    CHECK(parse_lenient("[f(x=\"abc)]").has_code(DiagCode::UnterminatedString));
    CHECK(parse_lenient("[f(x=1)] trailing").has_code(DiagCode::TrailingChars));
    CHECK(parse_lenient("[f x=1)]").has_code(DiagCode::MissingParen));
    CHECK(parse_lenient("[f(x 1)]").has_code(DiagCode::ExpectedEquals));
    CHECK(parse_lenient("[f(x=\"a\\q\")]").has_code(DiagCode::BadStringEscape));
    for (const auto& d : parse_lenient("f(x=1)").diagnostics)
        CHECK(d.severity == Severity::Fatal);
}

TEST_CASE("trailing newline is repairable") {
    std::string text = std::string(kCaseStudyCall) + "\n";
    CHECK(!parse_strict(text).ok());
    auto r = parse_lenient(text);
    REQUIRE(r.ok());
    CHECK(r.has_code(DiagCode::TrailingSpace));
}

TEST_CASE("zero-argument call") {
    auto r = parse_strict("[ping()]");
    REQUIRE(r.ok());
    CHECK(r.calls->calls[0].args.empty());
    CHECK(serialize(*r.calls) == "[ping()]");
}

TEST_CASE("identifier profile") {
    CHECK(!parse_strict("[api.v1-get(x=1)]").ok());
    ParserOptions wide;
    wide.allow_dot_in_names = true;
    wide.allow_hyphen_in_names = true;
    auto r = parse_strict("[api.v1-get(x=1)]", wide);
    REQUIRE(r.ok());
    CHECK(r.calls->calls[0].name == "api.v1-get");
}

TEST_CASE("string escaping round-trips") {
    CallList calls;
    calls.calls.push_back(
        {"f", {{"s", ArgValue("say \"hi\" \\ done")}, {"t", ArgValue("line\nbreak")}}});
    std::string text = serialize(calls);
    auto r = parse_strict(text);
    REQUIRE(r.ok());
    CHECK(*r.calls == calls);
}

TEST_CASE("round-trip property over random ASTs") {
    testutil::AstGen gen(20240811);
    for (int i = 0; i < 500; ++i) {
        CallList x = gen.call_list();
        std::string s = serialize(x);
        auto r = parse_strict(s);
        REQUIRE_MESSAGE(r.ok(), "failed to reparse: " << s);
        CHECK_MESSAGE(*r.calls == x, "round-trip mismatch: " << s);
        CHECK(serialize(*r.calls) == s);
    }
}

TEST_CASE("lenient repair never alters content; normalization is idempotent") {
    testutil::AstGen gen(77001);
    for (int i = 0; i < 500; ++i) {
        CallList x = gen.call_list();
        std::string messy = testutil::messy_render(x, gen.rng());
        auto repaired = parse_lenient(messy);
        REQUIRE_MESSAGE(repaired.ok(), "unrepairable: " << messy);
        CHECK_MESSAGE(*repaired.calls == x, "repair changed content: " << messy);
        for (const auto& d : repaired.diagnostics) CHECK(d.severity == Severity::Repairable);

        // Re-serializing the repaired AST yields a canonical text that parses
        // with zero diagnostics.
        auto normalized = parse_lenient(serialize(*repaired.calls));
        REQUIRE(normalized.ok());
        CHECK(normalized.diagnostics.empty());
        CHECK(*normalized.calls == x);

        // Strict accepts a subset of lenient: if strict accepts, lenient is
        // diagnostic-free.
        auto strict = parse_strict(messy);
        if (strict.ok()) CHECK(repaired.diagnostics.empty());
    }
}

TEST_CASE("diagnostic offsets lie within the input") {
    testutil::AstGen gen(5150);
    for (int i = 0; i < 200; ++i) {
        std::string messy = testutil::messy_render(gen.call_list(), gen.rng());
        for (const auto& d : parse_lenient(messy).diagnostics) CHECK(d.offset <= messy.size());
    }
}

TEST_CASE("AST JSON shape") {
    auto r = parse_strict("[f(a=1, b=\"x\", c=None)]");
    REQUIRE(r.ok());
    auto j = to_json(*r.calls);
    CHECK(j["calls"][0]["name"] == "f");
    CHECK(j["calls"][0]["args"][0]["value"] == 1);
    CHECK(j["calls"][0]["args"][1]["value"] == "x");
    CHECK(j["calls"][0]["args"][2]["value"].is_null());
}

}  // TEST_SUITE
