#include "fcc/quality_gate.hpp"

#include <algorithm>
#include <atomic>
#include <set>
#include <thread>

#include "fcc/common.hpp"

namespace fcc::gate {

namespace {

enum class JudgeAnswer { True, False, Malformed, Transport };

struct JudgeReply {
    JudgeAnswer answer = JudgeAnswer::Malformed;
    std::string transcript_ref;
    std::string raw;
};

std::string joined_content(const std::vector<net::Message>& messages) {
    std::string out;
    for (const auto& m : messages) {
        out += m.content;
        out += '\n';
    }
    return out;
}

// Sends an identification prompt and extracts the <judge>True/False</judge>
// verdict; a malformed reply is retried opts.judge_retries times.
JudgeReply ask_judge(net::ChatClient& judge, net::PromptTemplateId id,
                     const net::PromptFields& fields, const GateOptions& opts,
                     TranscriptLog* log) {
    JudgeReply out;
    auto messages = net::render_prompt(id, fields, opts.prompt_dir);
    for (int attempt = 0; attempt <= opts.judge_retries; ++attempt) {
        std::string reply;
        try {
            reply = judge.complete(messages);
        } catch (const net::TransportError& e) {
            out.answer = JudgeAnswer::Transport;
            out.raw = e.what();
            if (log) out.transcript_ref = log->add(joined_content(messages), out.raw);
            return out;
        }
        out.raw = reply;
        if (log) out.transcript_ref = log->add(joined_content(messages), reply);
        if (auto verdict = find_tag_content(reply, "judge")) {
            std::string v(trim(*verdict));
            std::transform(v.begin(), v.end(), v.begin(), ::tolower);
            if (v == "true") {
                out.answer = JudgeAnswer::True;
                return out;
            }
            if (v == "false") {
                out.answer = JudgeAnswer::False;
                return out;
            }
        }
    }
    out.answer = JudgeAnswer::Malformed;
    return out;
}

GateCheckResult from_judge(CheckId id, const JudgeReply& reply) {
    GateCheckResult out;
    out.id = id;
    out.source = CheckSource::Judge;
    out.transcript_ref = reply.transcript_ref.empty()
                             ? std::optional<std::string>("judge:unlogged")
                             : std::optional<std::string>(reply.transcript_ref);
    switch (reply.answer) {
        case JudgeAnswer::True:
            out.pass = true;
            out.evidence = "judge verdict True";
            break;
        case JudgeAnswer::False:
            out.pass = false;
            out.evidence = "judge verdict False";
            break;
        case JudgeAnswer::Malformed:
            out.pass = false;
            out.evidence = "MALFORMED_JUDGE: no parseable verdict after retries";
            break;
        case JudgeAnswer::Transport:
            out.pass = false;
            out.evidence = "JUDGE_TRANSPORT: " + reply.raw;
            break;
    }
    return out;
}

bool looks_like_call(std::string_view answer) {
    std::string_view t = trim(answer);
    if (t.empty()) return false;
    if (t.front() == '[') return true;
    return t.find('(') != std::string_view::npos && t.find(')') != std::string_view::npos;
}

std::string diag_summary(const std::vector<fcall::ParseDiagnostic>& diags) {
    std::string out;
    for (const auto& d : diags) {
        if (!out.empty()) out += ", ";
        out += fcall::diag_code_name(d.code);
    }
    return out;
}

std::string issue_summary(const schema::CallValidation& v) {
    std::string out;
    for (const auto& issue : v.issues) {
        if (!out.empty()) out += "; ";
        out += std::string(schema::call_issue_code_name(issue.code)) + ": " + issue.message;
    }
    return out;
}

}  // namespace

const char* check_id_name(CheckId id) {
    switch (id) {
        case CheckId::ResponseId: return "RESPONSE_ID";
        case CheckId::QueryToolId: return "QUERY_TOOL_ID";
        case CheckId::CotId: return "COT_ID";
        case CheckId::FuncParam: return "FUNC_PARAM";
        case CheckId::Format: return "FORMAT";
    }
    return "?";
}

const GateCheckResult* GateVerdict::find(CheckId id) const {
    for (const auto& r : results)
        if (r.id == id) return &r;
    return nullptr;
}

std::string TranscriptLog::add(const std::string& prompt, const std::string& reply) {
    std::lock_guard<std::mutex> lock(mu_);
    std::string ref = "judge:" + std::to_string(entries_.size());
    entries_.push_back({ref, prompt, reply});
    return ref;
}

std::vector<JudgeTranscript> TranscriptLog::entries() const {
    std::lock_guard<std::mutex> lock(mu_);
    return entries_;
}

BqcOutcome run_bqc(const data::Sample& sample, net::ChatClient* judge, const GateOptions& opts,
                   TranscriptLog* log) {
    BqcOutcome out;
    out.pass = true;

    // Response identification: deterministic fast path first.
    {
        GateCheckResult r;
        r.id = CheckId::ResponseId;
        auto lenient = fcall::parse_lenient(sample.answer, opts.parser);
        if (lenient.ok()) {
            r.pass = true;
            r.source = CheckSource::Deterministic;
            r.evidence = lenient.diagnostics.empty()
                             ? "parses as a call list"
                             : "parses leniently (" + diag_summary(lenient.diagnostics) + ")";
        } else if (!looks_like_call(sample.answer)) {
            r.pass = false;
            r.source = CheckSource::Deterministic;
            r.evidence = "plain-text response, not a call";
        } else if (judge) {
            net::PromptFields fields;
            fields.ref_answer = sample.answer;
            r = from_judge(CheckId::ResponseId,
                           ask_judge(*judge, net::PromptTemplateId::ResponseId, fields, opts, log));
        } else {
            r.pass = false;
            r.source = CheckSource::Deterministic;
            r.evidence = "call-like but unparseable; no judge configured";
        }
        out.pass = out.pass && r.pass;
        out.results.push_back(std::move(r));
        if (!out.pass && !opts.full_evaluation) return out;
    }

    if (judge) {
        net::PromptFields fields;
        fields.query = sample.query;
        fields.tools = sample.tools_text();
        GateCheckResult r = from_judge(
            CheckId::QueryToolId,
            ask_judge(*judge, net::PromptTemplateId::QueryToolId, fields, opts, log));
        out.pass = out.pass && r.pass;
        out.results.push_back(std::move(r));
        if (!out.pass && !opts.full_evaluation) return out;
    }

    if (judge && sample.cot) {
        net::PromptFields fields;
        fields.cot = *sample.cot;
        fields.ref_call = sample.answer;
        GateCheckResult r = from_judge(
            CheckId::CotId, ask_judge(*judge, net::PromptTemplateId::CotId, fields, opts, log));
        out.pass = out.pass && r.pass;
        out.results.push_back(std::move(r));
    }
    return out;
}

AcOutcome run_ac(const data::Sample& sample, net::ChatClient* judge, const GateOptions& opts,
                 TranscriptLog* log) {
    AcOutcome out;
    std::optional<fcall::CallList> ast;

    // Format verification: fully deterministic.
    {
        GateCheckResult r;
        r.id = CheckId::Format;
        r.source = CheckSource::Deterministic;
        auto strict = fcall::parse_strict(sample.answer, opts.parser);
        if (strict.ok()) {
            r.pass = true;
            r.evidence = "canonical format";
            ast = std::move(strict.calls);
        } else {
            auto lenient = fcall::parse_lenient(sample.answer, opts.parser);
            r.pass = false;
            if (lenient.ok()) {
                r.evidence = "repaired: " + diag_summary(lenient.diagnostics);
                out.corrected_call = lenient.calls;
                ast = std::move(lenient.calls);
            } else {
                r.evidence = "unrepairable: " + diag_summary(lenient.diagnostics);
            }
        }
        out.results.push_back(std::move(r));
    }

    // Function and parameter verification: deterministic schema check, then
    // an optional judge pass for semantic plausibility.
    {
        GateCheckResult r;
        r.id = CheckId::FuncParam;
        r.source = CheckSource::Deterministic;
        bool deterministic_pass = false;
        if (!ast) {
            r.pass = false;
            r.evidence = "no parseable call to validate";
        } else {
            try {
                schema::ToolCatalog catalog = schema::load_catalog(sample.tools_text());
                schema::CallValidation v = schema::validate_calls(*ast, catalog);
                deterministic_pass = v.pass;
                r.pass = v.pass;
                r.evidence = v.pass ? "schema check passed" : issue_summary(v);
            } catch (const schema::CatalogError& e) {
                r.pass = false;
                r.evidence = std::string("tools unusable: ") + e.what();
            }
        }

        out.results.push_back(std::move(r));

        // Semantic plausibility overlay: a second FUNC_PARAM result, judge
        // sourced, so the deterministic verdict above stays visible.
        if (deterministic_pass && judge) {
            net::PromptFields fields;
            fields.query = sample.query;
            fields.tools = sample.tools_text();
            fields.ref_call = sample.answer;
            JudgeReply reply =
                ask_judge(*judge, net::PromptTemplateId::FuncParamId, fields, opts, log);
            GateCheckResult jr = from_judge(CheckId::FuncParam, reply);
            if (reply.answer == JudgeAnswer::False) {
                if (auto block = find_tag_content(reply.raw, "NewFC")) {
                    auto corrected = fcall::parse_strict(trim(*block), opts.parser);
                    if (corrected.ok())
                        out.corrected_call = std::move(corrected.calls);
                    else
                        jr.evidence += "; NewFC discarded (fails strict parse)";
                }
            }
            out.results.push_back(std::move(jr));
        }
    }

    out.pass = std::all_of(out.results.begin(), out.results.end(),
                           [](const GateCheckResult& r) { return r.pass; });
    return out;
}

GateVerdict evaluate_sample(const data::Sample& sample, net::ChatClient* judge,
                            const GateOptions& opts, TranscriptLog* log) {
    GateVerdict verdict;
    verdict.sample_id = sample.id;
    BqcOutcome bqc = run_bqc(sample, judge, opts, log);
    verdict.bqc_pass = bqc.pass;
    verdict.results = std::move(bqc.results);
    if (!bqc.pass) return verdict;  // AC never runs after a BQC failure

    AcOutcome ac = run_ac(sample, judge, opts, log);
    verdict.ac_pass = ac.pass;
    verdict.results.insert(verdict.results.end(), ac.results.begin(), ac.results.end());
    verdict.corrected_call = std::move(ac.corrected_call);
    return verdict;
}

PartitionResult partition(const std::vector<data::Sample>& samples, net::ChatClient* judge,
                          const GateOptions& opts, int parallelism, const VerdictSink& sink,
                          TranscriptLog* log) {
    std::set<std::string> ids;
    for (const auto& s : samples)
        if (!ids.insert(s.id).second)
            throw std::invalid_argument("duplicate sample id: " + s.id);

    PartitionResult out;
    out.verdicts.resize(samples.size());
    if (parallelism <= 1 || samples.size() <= 1) {
        for (std::size_t i = 0; i < samples.size(); ++i)
            out.verdicts[i] = evaluate_sample(samples[i], judge, opts, log);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            while (true) {
                std::size_t i = next.fetch_add(1);
                if (i >= samples.size()) return;
                out.verdicts[i] = evaluate_sample(samples[i], judge, opts, log);
            }
        };
        std::vector<std::thread> pool;
        int n = std::min<int>(parallelism, static_cast<int>(samples.size()));
        pool.reserve(static_cast<std::size_t>(n));
        for (int t = 0; t < n; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    for (const auto& v : out.verdicts) {
        if (sink) sink(v);
        if (v.bqc_pass && v.ac_pass)
            out.partition.qualified.push_back(v.sample_id);
        else if (v.bqc_pass)
            out.partition.hard.push_back(v.sample_id);
        else
            out.partition.dropped.push_back(v.sample_id);
    }
    return out;
}

nlohmann::ordered_json to_json(const GateVerdict& verdict) {
    nlohmann::ordered_json results = nlohmann::ordered_json::array();
    for (const auto& r : verdict.results) {
        nlohmann::ordered_json item = {
            {"check", check_id_name(r.id)},
            {"pass", r.pass},
            {"source", r.source == CheckSource::Deterministic ? "deterministic" : "judge"},
            {"evidence", r.evidence},
        };
        if (r.transcript_ref) item["transcript_ref"] = *r.transcript_ref;
        results.push_back(std::move(item));
    }
    nlohmann::ordered_json out = {
        {"id", verdict.sample_id},
        {"bqc_pass", verdict.bqc_pass},
        {"ac_pass", verdict.ac_pass},
        {"results", std::move(results)},
    };
    if (verdict.corrected_call) out["corrected_call"] = fcall::serialize(*verdict.corrected_call);
    return out;
}

nlohmann::ordered_json to_json(const Partition& partition) {
    return {{"qualified", partition.qualified},
            {"hard", partition.hard},
            {"dropped", partition.dropped}};
}

}  // namespace fcc::gate
