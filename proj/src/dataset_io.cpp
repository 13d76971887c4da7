#include "fcc/dataset_io.hpp"

#include "fcc/common.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace fcc::data {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string json_to_string(const ordered_json& j) {
    if (j.is_string()) return j.get<std::string>();
    return j.dump();
}

void set_override(std::string& field, const nlohmann::json& overrides, const char* key) {
    if (overrides.contains(key) && overrides[key].is_string())
        field = overrides[key].get<std::string>();
}

}  // namespace

std::string Sample::tools_text() const {
    if (tools.is_null()) return "[]";
    return json_to_string(tools);
}

FieldMap FieldMap::from_json(const nlohmann::json& overrides) {
    FieldMap map;
    if (!overrides.is_object()) throw ReadError("field map must be a JSON object");
    set_override(map.id, overrides, "id");
    set_override(map.query, overrides, "query");
    set_override(map.tools, overrides, "tools");
    set_override(map.cot, overrides, "cot");
    set_override(map.answer, overrides, "answer");
    set_override(map.history, overrides, "history");
    set_override(map.category, overrides, "category");
    return map;
}

Sample sample_from_json(const ordered_json& record, const FieldMap& fields) {
    if (!record.is_object()) throw ReadError("sample record must be a JSON object");
    Sample s;
    std::set<std::string> consumed;

    if (record.contains(fields.id)) {
        s.id = json_to_string(record[fields.id]);
        consumed.insert(fields.id);
    }
    if (record.contains(fields.query)) {
        s.query = json_to_string(record[fields.query]);
        consumed.insert(fields.query);
    } else {
        throw ReadError("sample missing field '" + fields.query + "'");
    }
    if (record.contains(fields.answer)) {
        s.answer = json_to_string(record[fields.answer]);
        consumed.insert(fields.answer);
    } else if (record.contains("answers")) {
        // xlam spelling
        s.answer = json_to_string(record["answers"]);
        consumed.insert("answers");
    } else {
        throw ReadError("sample missing field '" + fields.answer + "'");
    }
    if (s.answer.empty()) throw ReadError("sample has an empty answer");
    if (record.contains(fields.tools)) {
        s.tools = record[fields.tools];
        consumed.insert(fields.tools);
    } else {
        s.tools = ordered_json::array();
    }
    if (record.contains(fields.cot) && !record[fields.cot].is_null()) {
        s.cot = json_to_string(record[fields.cot]);
        consumed.insert(fields.cot);
    }
    if (record.contains(fields.history)) {
        const auto& hist = record[fields.history];
        if (!hist.is_array()) throw ReadError("history must be an array of turns");
        for (const auto& turn : hist) {
            if (!turn.is_object() || !turn.contains("role") || !turn.contains("content"))
                throw ReadError("history turn needs 'role' and 'content'");
            s.history.push_back({turn["role"].get<std::string>(), json_to_string(turn["content"])});
        }
        consumed.insert(fields.history);
    }
    if (record.contains(fields.category) && !record[fields.category].is_null()) {
        s.category = json_to_string(record[fields.category]);
        consumed.insert(fields.category);
    }
    for (auto it = record.begin(); it != record.end(); ++it)
        if (!consumed.count(it.key())) s.extra[it.key()] = it.value();
    return s;
}

ordered_json sample_to_json(const Sample& sample, const FieldMap& fields) {
    ordered_json out = ordered_json::object();
    out[fields.id] = sample.id;
    out[fields.query] = sample.query;
    out[fields.tools] = sample.tools.is_null() ? ordered_json::array() : sample.tools;
    if (sample.cot) out[fields.cot] = *sample.cot;
    out[fields.answer] = sample.answer;
    if (!sample.history.empty()) {
        ordered_json hist = ordered_json::array();
        for (const auto& turn : sample.history)
            hist.push_back({{"role", turn.role}, {"content", turn.content}});
        out[fields.history] = std::move(hist);
    }
    if (sample.category) out[fields.category] = *sample.category;
    for (auto it = sample.extra.begin(); it != sample.extra.end(); ++it) out[it.key()] = it.value();
    return out;
}

std::vector<Sample> split_turns(const Sample& sample) {
    if (sample.history.empty()) return {sample};
    std::vector<Sample> out;
    std::string last_user;
    int index = 0;
    for (const auto& turn : sample.history) {
        if (turn.role == "user") {
            last_user = turn.content;
            continue;
        }
        if (turn.role != "assistant") continue;
        Sample child;
        child.id = sample.id + "#" + std::to_string(index++);
        child.query = last_user;
        child.tools = sample.tools;
        child.category = sample.category;
        try {
            loss::SegmentParts parts = loss::split_think(turn.content);
            if (!parts.think.empty()) child.cot = std::string(parts.think);
            child.answer = std::string(parts.result);
        } catch (const loss::SegmentationError&) {
            child.answer = turn.content;
        }
        if (child.answer.empty()) child.answer = turn.content;
        out.push_back(std::move(child));
    }
    out.push_back(sample);  // the record's own final turn
    return out;
}

SampleReader::SampleReader(std::istream& in, ReadOptions opts) : in_(in), opts_(std::move(opts)) {}

std::optional<Sample> SampleReader::next() {
    while (true) {
        if (!pending_.empty()) {
            Sample s = std::move(pending_.front());
            pending_.pop_front();
            return s;
        }
        std::string line;
        if (!std::getline(in_, line)) return std::nullopt;
        ++line_;
        if (trim(line).empty()) continue;
        ordered_json record = ordered_json::parse(line, nullptr, false);
        if (record.is_discarded()) {
            if (!opts_.lenient)
                throw ReadError("line " + std::to_string(line_) + ": malformed JSON");
            warnings_.push_back("line " + std::to_string(line_) + ": malformed JSON, skipped");
            continue;
        }
        Sample s;
        try {
            s = sample_from_json(record, opts_.fields);
        } catch (const ReadError& e) {
            if (!opts_.lenient)
                throw ReadError("line " + std::to_string(line_) + ": " + e.what());
            warnings_.push_back("line " + std::to_string(line_) + ": " + e.what() + ", skipped");
            continue;
        }
        if (s.id.empty()) s.id = "line-" + std::to_string(line_);
        if (opts_.split_turns) {
            for (auto& child : split_turns(s)) pending_.push_back(std::move(child));
            continue;
        }
        return s;
    }
}

std::vector<Sample> read_samples(std::istream& in, const ReadOptions& opts) {
    SampleReader reader(in, opts);
    std::vector<Sample> out;
    while (auto s = reader.next()) out.push_back(std::move(*s));
    return out;
}

std::vector<Sample> read_samples(const std::string& path, const ReadOptions& opts) {
    std::ifstream in(path);
    if (!in) throw ReadError("cannot open " + path);
    return read_samples(in, opts);
}

void write_samples(std::ostream& out, const std::vector<Sample>& samples, const FieldMap& fields) {
    for (const auto& s : samples) out << sample_to_json(s, fields).dump() << '\n';
}

namespace {

// Effective (cot, result) texts for token counting: an explicit cot field
// wins; otherwise a leading think block inside the answer is split off.
std::pair<std::optional<std::string>, std::string> stat_texts(const Sample& s) {
    if (s.cot) return {*s.cot, s.answer};
    try {
        loss::SegmentParts parts = loss::split_think(s.answer);
        if (!parts.think.empty() && !parts.result.empty())
            return {std::string(parts.think), std::string(parts.result)};
    } catch (const loss::SegmentationError&) {
    }
    return {std::nullopt, s.answer};
}

void collect_api_names(const ordered_json& tools, std::set<std::string>& names) {
    ordered_json doc = tools;
    if (doc.is_string()) {
        doc = ordered_json::parse(doc.get<std::string>(), nullptr, false);
        if (doc.is_discarded()) return;
    }
    if (!doc.is_array()) return;
    for (const auto& tool : doc)
        if (tool.is_object() && tool.contains("name") && tool["name"].is_string())
            names.insert(tool["name"].get<std::string>());
}

}  // namespace

CorpusReport report(std::istream& in, const loss::TokenCounter& counter, ReadOptions opts) {
    bool split = opts.split_turns;
    opts.split_turns = false;  // splitting handled here so the extra turns can be counted
    SampleReader reader(in, opts);
    CorpusReport out;
    loss::TokenStatsAccumulator acc(counter);
    std::set<std::string> apis;
    while (auto s = reader.next()) {
        std::vector<Sample> units;
        if (split) {
            units = split_turns(*s);
            out.multi_turn_split_count += units.size() - 1;
        } else {
            units.push_back(std::move(*s));
        }
        for (const auto& unit : units) {
            ++out.sample_count;
            auto [cot, result] = stat_texts(unit);
            acc.add(cot ? std::optional<std::string_view>(*cot) : std::nullopt, result);
            if (unit.category) ++out.category_counts[*unit.category];
            collect_api_names(unit.tools, apis);
        }
    }
    out.token_stats = acc.finish();
    out.distinct_apis = apis.size();
    return out;
}

CorpusReport report(const std::string& path, const loss::TokenCounter& counter, ReadOptions opts) {
    std::ifstream in(path);
    if (!in) throw ReadError("cannot open " + path);
    return report(in, counter, std::move(opts));
}

ordered_json CorpusReport::to_json() const {
    ordered_json categories = ordered_json::object();
    for (const auto& [name, count] : category_counts) categories[name] = count;
    return {{"sample_count", sample_count},
            {"multi_turn_split_count", multi_turn_split_count},
            {"distinct_apis", distinct_apis},
            {"categories", std::move(categories)},
            {"token_stats", loss::to_json(token_stats)}};
}

std::string CorpusReport::to_text() const {
    std::ostringstream out;
    char buf[128];
    out << "samples            " << sample_count << "\n";
    out << "multi-turn splits  " << multi_turn_split_count << "\n";
    out << "distinct APIs      " << distinct_apis << "\n";
    std::snprintf(buf, sizeof(buf), "%-10s %10s %10s\n", "span", "mean", "median");
    out << buf;
    std::snprintf(buf, sizeof(buf), "%-10s %10.2f %10.2f\n", "cot", token_stats.cot.mean,
                  token_stats.cot.median);
    out << buf;
    std::snprintf(buf, sizeof(buf), "%-10s %10.2f %10.2f\n", "result", token_stats.result.mean,
                  token_stats.result.median);
    out << buf;
    if (!category_counts.empty()) {
        out << "categories\n";
        for (const auto& [name, count] : category_counts) {
            std::snprintf(buf, sizeof(buf), "  %-16s %8zu\n", name.c_str(), count);
            out << buf;
        }
    }
    return out.str();
}

}  // namespace fcc::data
