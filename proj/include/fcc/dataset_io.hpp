#pragma once

// Canonical sample schema and streaming JSONL readers/writers.
//
//   {"id": ..., "query": ..., "tools": [...], "cot": ..., "answer": ...,
//    "history": [{"role": ..., "content": ...}], "category": ...}
//
// Source files with different field names are adapted through a FieldMap
// (configuration, not code); unknown fields ride along in a passthrough map
// so read-then-write round-trips are lossless.

#include <deque>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fcc/segmentation_loss.hpp"
#include "json.hpp"

namespace fcc::data {

struct Turn {
    std::string role;
    std::string content;

    friend bool operator==(const Turn&, const Turn&) = default;
};

struct Sample {
    std::string id;
    std::string query;
    nlohmann::ordered_json tools;  // array, or the corpus' string-encoded form
    std::optional<std::string> cot;
    std::string answer;
    std::vector<Turn> history;
    std::optional<std::string> category;
    nlohmann::ordered_json extra = nlohmann::ordered_json::object();

    // Tools as JSON text regardless of the stored form.
    std::string tools_text() const;
};

struct FieldMap {
    std::string id = "id";
    std::string query = "query";
    std::string tools = "tools";
    std::string cot = "cot";
    std::string answer = "answer";
    std::string history = "history";
    std::string category = "category";

    static FieldMap from_json(const nlohmann::json& overrides);
};

struct ReadError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ReadOptions {
    bool lenient = false;      // skip malformed lines with a warning
    bool split_turns = false;  // expand multi-turn records into per-turn samples
    FieldMap fields;
};

Sample sample_from_json(const nlohmann::ordered_json& record, const FieldMap& fields);
nlohmann::ordered_json sample_to_json(const Sample& sample, const FieldMap& fields = {});

// Expands a multi-turn record: one sample per assistant turn in the history
// (ids suffixed #0, #1, ...) followed by the record's own final turn.
std::vector<Sample> split_turns(const Sample& sample);

// Single-consumer stream over a JSONL file; memory use is bounded by one
// record (plus the pending split-turn expansion).
class SampleReader {
public:
    SampleReader(std::istream& in, ReadOptions opts = {});

    std::optional<Sample> next();
    std::size_t line() const { return line_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    std::istream& in_;
    ReadOptions opts_;
    std::size_t line_ = 0;
    std::vector<std::string> warnings_;
    std::deque<Sample> pending_;
};

std::vector<Sample> read_samples(std::istream& in, const ReadOptions& opts = {});
std::vector<Sample> read_samples(const std::string& path, const ReadOptions& opts = {});

void write_samples(std::ostream& out, const std::vector<Sample>& samples,
                   const FieldMap& fields = {});

struct CorpusReport {
    std::size_t sample_count = 0;
    loss::CorpusTokenStats token_stats;
    std::map<std::string, std::size_t> category_counts;
    std::size_t distinct_apis = 0;
    std::size_t multi_turn_split_count = 0;

    nlohmann::ordered_json to_json() const;
    std::string to_text() const;  // aligned report
};

CorpusReport report(std::istream& in, const loss::TokenCounter& counter, ReadOptions opts = {});
CorpusReport report(const std::string& path, const loss::TokenCounter& counter,
                    ReadOptions opts = {});

}  // namespace fcc::data
