#pragma once

// Two-stage filtration. The Base Quality Check runs response, query-and-tool
// and CoT identification; the Answer Check runs format and
// function/parameter verification. Verdicts drive the partition:
//
//   qualified  <=  BQC and AC
//   hard       <=  BQC and not AC
//   dropped    <=  not BQC
//
// Format and schema checks are deterministic; the semantic checks go to a
// judge endpoint with the identification prompt templates and a
// <judge>True/False</judge> verdict token. Judge failures are conservative:
// questionable data is never qualified.

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "fcc/dataset_io.hpp"
#include "fcc/endpoint_clients.hpp"
#include "fcc/fcall_syntax.hpp"
#include "fcc/tool_schema.hpp"
#include "json.hpp"

namespace fcc::gate {

enum class CheckId { ResponseId, QueryToolId, CotId, FuncParam, Format };
enum class CheckSource { Deterministic, Judge };

const char* check_id_name(CheckId id);

struct GateCheckResult {
    CheckId id;
    bool pass = false;
    CheckSource source = CheckSource::Deterministic;
    std::string evidence;
    std::optional<std::string> transcript_ref;  // set iff source == Judge
};

struct GateVerdict {
    std::string sample_id;
    bool bqc_pass = false;
    bool ac_pass = false;
    std::vector<GateCheckResult> results;
    std::optional<fcall::CallList> corrected_call;

    const GateCheckResult* find(CheckId id) const;
};

struct Partition {
    std::vector<std::string> qualified;
    std::vector<std::string> hard;
    std::vector<std::string> dropped;
};

struct JudgeTranscript {
    std::string ref;
    std::string prompt;
    std::string reply;
};

class TranscriptLog {
public:
    std::string add(const std::string& prompt, const std::string& reply);
    std::vector<JudgeTranscript> entries() const;

private:
    mutable std::mutex mu_;
    std::vector<JudgeTranscript> entries_;
};

struct GateOptions {
    bool full_evaluation = false;  // audit mode: no short-circuit inside the BQC
    int judge_retries = 2;         // extra attempts when the verdict tag is malformed
    fcall::ParserOptions parser;
    std::string prompt_dir;
};

struct BqcOutcome {
    bool pass = false;
    std::vector<GateCheckResult> results;
};

struct AcOutcome {
    bool pass = false;
    std::vector<GateCheckResult> results;
    std::optional<fcall::CallList> corrected_call;
};

// judge may be null: judge-only checks are then skipped (not failed); the
// deterministic response-identification fast path still applies.
BqcOutcome run_bqc(const data::Sample& sample, net::ChatClient* judge, const GateOptions& opts = {},
                   TranscriptLog* log = nullptr);

// Precondition: BQC passed. FORMAT and the schema half of FUNC_PARAM are
// deterministic; a lenient repair or a strictly-parseable judge <NewFC>
// block is surfaced as corrected_call.
AcOutcome run_ac(const data::Sample& sample, net::ChatClient* judge, const GateOptions& opts = {},
                 TranscriptLog* log = nullptr);

GateVerdict evaluate_sample(const data::Sample& sample, net::ChatClient* judge,
                            const GateOptions& opts = {}, TranscriptLog* log = nullptr);

struct PartitionResult {
    Partition partition;
    std::vector<GateVerdict> verdicts;  // in input order
};

using VerdictSink = std::function<void(const GateVerdict&)>;

// Evaluates every sample (bounded fan-out, results in input order). Sample
// ids must be unique. The sink, when set, receives verdicts in input order.
PartitionResult partition(const std::vector<data::Sample>& samples, net::ChatClient* judge,
                          const GateOptions& opts = {}, int parallelism = 1,
                          const VerdictSink& sink = {}, TranscriptLog* log = nullptr);

nlohmann::ordered_json to_json(const GateVerdict& verdict);
nlohmann::ordered_json to_json(const Partition& partition);

}  // namespace fcc::gate
