#pragma once

// The self-evolving resampling loop over the hard set. Each iteration:
//
//   1. the generator produces up to n_gen candidates per hard sample,
//   2. every candidate is scored by k judges; a judge passes a candidate
//      when its raw score in [0,1] reaches tau, and the aggregate Score is
//      the passing fraction (an exact multiple of 1/k),
//   3. a candidate is accepted when Score = 1 (unanimous rule) or
//      Score > 1/2 (majority rule); ties go to the lowest attempt index,
//   4. accepted records feed the fine-tune hook, which returns the next
//      model tag; samples without an accepted candidate stay hard.
//
// The loop stops when the hard set empties (converged) or after t_max
// iterations. State is checkpointed after every iteration; replays with the
// same seed, ports and inputs are byte-identical.

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fcc/dataset_io.hpp"
#include "fcc/endpoint_clients.hpp"
#include "fcc/fcall_syntax.hpp"
#include "json.hpp"

namespace fcc::loop {

enum class AcceptanceRule { Unanimous, Majority };

AcceptanceRule acceptance_rule_from_string(std::string_view name);
const char* acceptance_rule_name(AcceptanceRule rule);

struct LoopConfig {
    int t_max = 10;
    double tau = 0.5;
    int n_gen = 3;
    double temperature = 0.7;
    AcceptanceRule acceptance = AcceptanceRule::Unanimous;
    std::uint64_t seed = 0;
    int parallelism = 8;
    int score_retries = 1;  // extra attempt when a judge reply has no usable number
    fcall::ParserOptions parser;
    std::string prompt_dir;

    void validate(std::size_t judge_count) const;
    nlohmann::ordered_json to_json() const;
    std::string config_hash() const;
};

struct CandidateResponse {
    std::string sample_id;
    int attempt = 0;
    std::string text;
    std::optional<fcall::CallList> parsed;
    std::string generator_tag;
    bool failed = false;  // generation failed after transport retries
    std::string evidence;
};

struct JudgeVerdictSet {
    std::vector<double> raw_scores;  // NaN where a judge failed
    std::vector<bool> pass_bits;
    std::vector<std::string> evidence;  // per-judge failure notes, "" otherwise
    int pass_count = 0;
    int judge_count = 0;

    double aggregate() const {
        return judge_count == 0 ? 0.0
                                : static_cast<double>(pass_count) / static_cast<double>(judge_count);
    }
    bool accepted(AcceptanceRule rule) const {
        if (judge_count == 0) return false;
        return rule == AcceptanceRule::Unanimous ? pass_count == judge_count
                                                 : 2 * pass_count > judge_count;
    }
};

struct AcceptedRecord {
    CandidateResponse response;
    JudgeVerdictSet verdicts;
    std::string call_canonical;
};

enum class Termination { Running, Converged, MaxIterations };

const char* termination_name(Termination t);
Termination termination_from_string(std::string_view name);

struct LoopState {
    int iteration = 0;
    std::vector<std::string> hard_ids;
    std::vector<std::string> dnew_manifest_paths;
    std::string model_tag = "M0";
    Termination termination = Termination::Running;
    std::uint64_t seed = 0;
    std::string config_hash;

    nlohmann::ordered_json to_json() const;
    static LoopState from_json(const nlohmann::json& doc);
};

// ---- ports ------------------------------------------------------------------

class GeneratorPort {
public:
    virtual ~GeneratorPort() = default;
    // One candidate response. Throws net::TransportError on failure.
    virtual std::string generate(const data::Sample& sample, int attempt) = 0;
    virtual std::string tag() const = 0;
};

class ChatGenerator : public GeneratorPort {
public:
    explicit ChatGenerator(std::shared_ptr<net::ChatClient> client, std::string prompt_dir = "");
    std::string generate(const data::Sample& sample, int attempt) override;
    std::string tag() const override { return client_->name(); }

private:
    std::shared_ptr<net::ChatClient> client_;
    std::string prompt_dir_;
};

class ScriptedGenerator : public GeneratorPort {
public:
    void set_response(const std::string& sample_id, std::string text);
    void set_response(const std::string& sample_id, int attempt, std::string text);
    void set_default(std::string text);
    void fail_sample(const std::string& sample_id);
    std::string generate(const data::Sample& sample, int attempt) override;
    std::string tag() const override { return "scripted-generator"; }

private:
    std::map<std::pair<std::string, int>, std::string> by_attempt_;
    std::map<std::string, std::string> by_sample_;
    std::map<std::string, bool> failing_;
    std::optional<std::string> default_;
};

class ScoreJudgePort {
public:
    virtual ~ScoreJudgePort() = default;
    // Raw quality score in [0,1]. Throws on transport failure or an
    // unusable reply.
    virtual double score(const data::Sample& sample, const CandidateResponse& candidate) = 0;
    virtual std::string name() const = 0;
};

// First number found in the text, if any.
std::optional<double> parse_first_number(std::string_view text);

class ChatScoreJudge : public ScoreJudgePort {
public:
    ChatScoreJudge(std::shared_ptr<net::ChatClient> client, const LoopConfig& cfg);
    double score(const data::Sample& sample, const CandidateResponse& candidate) override;
    std::string name() const override { return client_->name(); }

private:
    std::shared_ptr<net::ChatClient> client_;
    int retries_;
    std::string prompt_dir_;
};

class ScriptedScoreJudge : public ScoreJudgePort {
public:
    explicit ScriptedScoreJudge(double default_score = 1.0, std::string name = "scripted-judge");
    void set_score(const std::string& sample_id, double score);
    void set_score(const std::string& sample_id, int attempt, double score);
    void fail_on(const std::string& sample_id);
    double score(const data::Sample& sample, const CandidateResponse& candidate) override;
    std::string name() const override { return name_; }

private:
    std::map<std::pair<std::string, int>, double> by_attempt_;
    std::map<std::string, double> by_sample_;
    std::map<std::string, bool> failing_;
    double default_score_;
    std::string name_;
};

class FineTunePort {
public:
    virtual ~FineTunePort() = default;
    // Consumes one iteration's accepted records, returns the next model tag.
    virtual std::string fine_tune(const std::vector<AcceptedRecord>& accepted,
                                  const std::string& model_tag) = 0;
};

// Desk mode: records batch sizes and derives the next tag.
class RecordingFineTune : public FineTunePort {
public:
    std::string fine_tune(const std::vector<AcceptedRecord>& accepted,
                          const std::string& model_tag) override;
    const std::vector<std::size_t>& batch_sizes() const { return batch_sizes_; }

private:
    std::vector<std::size_t> batch_sizes_;
};

// Production mode: writes the accepted records to a JSONL file, substitutes
// {dnew} and {model} into the command template, runs it, and takes the last
// non-empty stdout line as the new model tag.
class CommandFineTune : public FineTunePort {
public:
    CommandFineTune(std::string command_template, std::string work_dir);
    std::string fine_tune(const std::vector<AcceptedRecord>& accepted,
                          const std::string& model_tag) override;

private:
    std::string command_template_;
    std::string work_dir_;
    int batch_ = 0;
};

struct LoopPorts {
    GeneratorPort* generator = nullptr;
    std::vector<ScoreJudgePort*> judges;
    FineTunePort* fine_tune = nullptr;
};

// ---- operations ---------------------------------------------------------------

std::vector<CandidateResponse> generate_candidates(const std::vector<data::Sample>& hard,
                                                   GeneratorPort& generator, const LoopConfig& cfg);

JudgeVerdictSet score_candidate(const data::Sample& sample, const CandidateResponse& candidate,
                                const std::vector<ScoreJudgePort*>& judges, const LoopConfig& cfg);

// Accepted candidate for one sample, or nullopt. Candidates that meet the
// acceptance rule but lack a parseable AST are demoted with evidence.
std::optional<AcceptedRecord> accept(
    const std::vector<std::pair<CandidateResponse, JudgeVerdictSet>>& scored,
    const LoopConfig& cfg, std::string* demotion_evidence = nullptr);

struct IterationReport {
    int iteration = 0;
    std::size_t hard_before = 0;
    std::size_t candidates = 0;
    std::size_t accepted = 0;
    std::size_t hard_after = 0;
    double acceptance_rate = 0.0;
    std::string model_tag;

    nlohmann::ordered_json to_json() const;
};

struct IterationOutcome {
    LoopState state;
    std::vector<AcceptedRecord> accepted;
    IterationReport report;
};

// One generate -> score -> accept -> fine-tune pass. hard_samples must cover
// every id in state.hard_ids.
IterationOutcome run_iteration(const LoopState& state,
                               const std::map<std::string, data::Sample>& hard_samples,
                               const LoopPorts& ports, const LoopConfig& cfg);

nlohmann::ordered_json accepted_record_to_json(const AcceptedRecord& record,
                                               const data::Sample& sample);

// File-backed driver: writes d_new_<t>.jsonl, report.json and checkpoint.json
// under out_dir, resumes from the checkpoint, and commits state only after
// the checkpoint write succeeds.
class LoopRunner {
public:
    LoopRunner(std::string out_dir, LoopPorts ports, LoopConfig cfg);

    LoopState run(const std::vector<data::Sample>& hard, bool resume = false);
    const std::vector<IterationReport>& reports() const { return reports_; }

    static std::string checkpoint_path(const std::string& out_dir);

private:
    std::string out_dir_;
    LoopPorts ports_;
    LoopConfig cfg_;
    std::vector<IterationReport> reports_;

    void write_checkpoint(const LoopState& state) const;
};

}  // namespace fcc::loop
