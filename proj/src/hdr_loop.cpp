#include "fcc/hdr_loop.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "fcc/common.hpp"

namespace fcc::loop {

namespace fs = std::filesystem;

AcceptanceRule acceptance_rule_from_string(std::string_view name) {
    if (name == "unanimous") return AcceptanceRule::Unanimous;
    if (name == "majority") return AcceptanceRule::Majority;
    throw std::invalid_argument("unknown acceptance rule: " + std::string(name));
}

const char* acceptance_rule_name(AcceptanceRule rule) {
    return rule == AcceptanceRule::Unanimous ? "unanimous" : "majority";
}

const char* termination_name(Termination t) {
    switch (t) {
        case Termination::Running: return "running";
        case Termination::Converged: return "converged";
        case Termination::MaxIterations: return "max_iterations";
    }
    return "?";
}

Termination termination_from_string(std::string_view name) {
    if (name == "running") return Termination::Running;
    if (name == "converged") return Termination::Converged;
    if (name == "max_iterations") return Termination::MaxIterations;
    throw std::invalid_argument("unknown termination: " + std::string(name));
}

void LoopConfig::validate(std::size_t judge_count) const {
    if (t_max < 1) throw std::invalid_argument("t_max must be >= 1");
    if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in (0, 1]");
    if (n_gen < 1) throw std::invalid_argument("n_gen must be >= 1");
    if (judge_count < 1) throw std::invalid_argument("at least one judge is required");
    if (parallelism < 1) throw std::invalid_argument("parallelism must be >= 1");
}

nlohmann::ordered_json LoopConfig::to_json() const {
    return {{"t_max", t_max},
            {"tau", tau},
            {"n_gen", n_gen},
            {"temperature", temperature},
            {"acceptance", acceptance_rule_name(acceptance)},
            {"seed", seed},
            {"parallelism", parallelism},
            {"score_retries", score_retries}};
}

std::string LoopConfig::config_hash() const {
    // Execution knobs (fan-out) do not change results and stay out of the
    // hash so a resumed run may use different parallelism.
    nlohmann::ordered_json semantic = to_json();
    semantic.erase("parallelism");
    return to_hex(fnv1a64(semantic.dump()));
}

nlohmann::ordered_json LoopState::to_json() const {
    return {{"t", iteration},
            {"hard_ids", hard_ids},
            {"dnew_manifest_paths", dnew_manifest_paths},
            {"model_tag", model_tag},
            {"termination", termination_name(termination)},
            {"seed", seed},
            {"config_hash", config_hash}};
}

LoopState LoopState::from_json(const nlohmann::json& doc) {
    LoopState s;
    s.iteration = doc.at("t").get<int>();
    s.hard_ids = doc.at("hard_ids").get<std::vector<std::string>>();
    s.dnew_manifest_paths = doc.at("dnew_manifest_paths").get<std::vector<std::string>>();
    s.model_tag = doc.at("model_tag").get<std::string>();
    s.termination = termination_from_string(doc.at("termination").get<std::string>());
    s.seed = doc.at("seed").get<std::uint64_t>();
    s.config_hash = doc.at("config_hash").get<std::string>();
    return s;
}

// ---- ports ------------------------------------------------------------------

ChatGenerator::ChatGenerator(std::shared_ptr<net::ChatClient> client, std::string prompt_dir)
    : client_(std::move(client)), prompt_dir_(std::move(prompt_dir)) {}

std::string ChatGenerator::generate(const data::Sample& sample, int /*attempt*/) {
    net::PromptFields fields;
    fields.query = sample.query;
    fields.tools = sample.tools_text();
    for (const auto& turn : sample.history) fields.history.push_back({turn.role, turn.content});
    auto messages = net::render_prompt(net::PromptTemplateId::Generator, fields, prompt_dir_);
    return client_->complete(messages);
}

void ScriptedGenerator::set_response(const std::string& sample_id, std::string text) {
    by_sample_[sample_id] = std::move(text);
}

void ScriptedGenerator::set_response(const std::string& sample_id, int attempt, std::string text) {
    by_attempt_[{sample_id, attempt}] = std::move(text);
}

void ScriptedGenerator::set_default(std::string text) { default_ = std::move(text); }

void ScriptedGenerator::fail_sample(const std::string& sample_id) { failing_[sample_id] = true; }

std::string ScriptedGenerator::generate(const data::Sample& sample, int attempt) {
    if (failing_.count(sample.id))
        throw net::TransportError("scripted generation failure for " + sample.id, 1, {});
    if (auto it = by_attempt_.find({sample.id, attempt}); it != by_attempt_.end())
        return it->second;
    if (auto it = by_sample_.find(sample.id); it != by_sample_.end()) return it->second;
    if (default_) return *default_;
    throw net::TransportError("no scripted response for " + sample.id, 1, {});
}

std::optional<double> parse_first_number(std::string_view text) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        bool start = (c >= '0' && c <= '9') ||
                     ((c == '-' || c == '.') && i + 1 < text.size() && text[i + 1] >= '0' &&
                      text[i + 1] <= '9');
        if (!start) continue;
        double value = 0;
        const char* begin = text.data() + i;
        auto [p, ec] = std::from_chars(begin, text.data() + text.size(), value);
        if (ec == std::errc() && p != begin) return value;
    }
    return std::nullopt;
}

ChatScoreJudge::ChatScoreJudge(std::shared_ptr<net::ChatClient> client, const LoopConfig& cfg)
    : client_(std::move(client)), retries_(cfg.score_retries), prompt_dir_(cfg.prompt_dir) {}

double ChatScoreJudge::score(const data::Sample& sample, const CandidateResponse& candidate) {
    net::PromptFields fields;
    fields.query = sample.query;
    fields.tools = sample.tools_text();
    fields.candidate = candidate.text;
    auto messages = net::render_prompt(net::PromptTemplateId::JudgeScore, fields, prompt_dir_);
    std::string last_reply;
    for (int attempt = 0; attempt <= retries_; ++attempt) {
        last_reply = client_->complete(messages);
        if (auto value = parse_first_number(last_reply))
            if (*value >= 0.0 && *value <= 1.0) return *value;
    }
    throw std::runtime_error("judge reply has no score in [0,1]: " + last_reply);
}

ScriptedScoreJudge::ScriptedScoreJudge(double default_score, std::string name)
    : default_score_(default_score), name_(std::move(name)) {}

void ScriptedScoreJudge::set_score(const std::string& sample_id, double score) {
    by_sample_[sample_id] = score;
}

void ScriptedScoreJudge::set_score(const std::string& sample_id, int attempt, double score) {
    by_attempt_[{sample_id, attempt}] = score;
}

void ScriptedScoreJudge::fail_on(const std::string& sample_id) { failing_[sample_id] = true; }

double ScriptedScoreJudge::score(const data::Sample& sample, const CandidateResponse& candidate) {
    if (failing_.count(sample.id))
        throw net::TransportError("scripted judge failure for " + sample.id, 1, {});
    if (auto it = by_attempt_.find({sample.id, candidate.attempt}); it != by_attempt_.end())
        return it->second;
    if (auto it = by_sample_.find(sample.id); it != by_sample_.end()) return it->second;
    return default_score_;
}

std::string RecordingFineTune::fine_tune(const std::vector<AcceptedRecord>& accepted,
                                         const std::string& model_tag) {
    batch_sizes_.push_back(accepted.size());
    // M0 -> M1 -> ...; tags that do not follow the pattern get a suffix.
    if (model_tag.size() >= 2 && model_tag[0] == 'M') {
        int n = 0;
        auto [p, ec] = std::from_chars(model_tag.data() + 1, model_tag.data() + model_tag.size(), n);
        if (ec == std::errc() && p == model_tag.data() + model_tag.size())
            return "M" + std::to_string(n + 1);
    }
    return model_tag + "+1";
}

CommandFineTune::CommandFineTune(std::string command_template, std::string work_dir)
    : command_template_(std::move(command_template)), work_dir_(std::move(work_dir)) {}

std::string CommandFineTune::fine_tune(const std::vector<AcceptedRecord>& accepted,
                                       const std::string& model_tag) {
    fs::create_directories(work_dir_);
    std::string dnew_path = work_dir_ + "/finetune_batch_" + std::to_string(batch_++) + ".jsonl";
    {
        std::ofstream out(dnew_path);
        if (!out) throw std::runtime_error("cannot write " + dnew_path);
        for (const auto& record : accepted) {
            nlohmann::ordered_json row = {{"id", record.response.sample_id},
                                          {"response_text", record.response.text},
                                          {"call_canonical", record.call_canonical}};
            out << row.dump() << '\n';
        }
    }
    std::string command = command_template_;
    auto replace = [&command](const std::string& key, const std::string& value) {
        std::size_t pos;
        while ((pos = command.find(key)) != std::string::npos)
            command.replace(pos, key.size(), value);
    };
    replace("{dnew}", dnew_path);
    replace("{model}", model_tag);

    FILE* pipe = ::popen(command.c_str(), "r");
    if (!pipe) throw std::runtime_error("cannot run fine-tune command");
    std::string output;
    char buf[256];
    while (std::fgets(buf, sizeof(buf), pipe)) output += buf;
    int status = ::pclose(pipe);
    if (status != 0)
        throw std::runtime_error("fine-tune command failed with status " + std::to_string(status));
    std::string tag;
    std::size_t end = output.find_last_not_of(" \n\r\t");
    if (end == std::string::npos) throw std::runtime_error("fine-tune command printed no model tag");
    std::size_t begin = output.find_last_of('\n', end);
    tag = output.substr(begin == std::string::npos ? 0 : begin + 1,
                        end - (begin == std::string::npos ? 0 : begin + 1) + 1);
    return tag;
}

// ---- operations ---------------------------------------------------------------

namespace {

template <typename Fn>
void parallel_for(std::size_t count, int parallelism, Fn&& fn) {
    if (parallelism <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    int n = std::min<int>(parallelism, static_cast<int>(count));
    pool.reserve(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

}  // namespace

std::vector<CandidateResponse> generate_candidates(const std::vector<data::Sample>& hard,
                                                   GeneratorPort& generator,
                                                   const LoopConfig& cfg) {
    std::vector<CandidateResponse> out(hard.size() * static_cast<std::size_t>(cfg.n_gen));
    parallel_for(out.size(), cfg.parallelism, [&](std::size_t task) {
        const data::Sample& sample = hard[task / static_cast<std::size_t>(cfg.n_gen)];
        int attempt = static_cast<int>(task % static_cast<std::size_t>(cfg.n_gen));
        CandidateResponse cand;
        cand.sample_id = sample.id;
        cand.attempt = attempt;
        cand.generator_tag = generator.tag();
        try {
            cand.text = generator.generate(sample, attempt);
            auto parsed = fcall::parse_lenient(cand.text, cfg.parser);
            if (parsed.ok()) cand.parsed = std::move(parsed.calls);
        } catch (const std::exception& e) {
            cand.failed = true;
            cand.evidence = e.what();
        }
        out[task] = std::move(cand);
    });
    return out;
}

JudgeVerdictSet score_candidate(const data::Sample& sample, const CandidateResponse& candidate,
                                const std::vector<ScoreJudgePort*>& judges,
                                const LoopConfig& cfg) {
    JudgeVerdictSet out;
    out.judge_count = static_cast<int>(judges.size());
    out.raw_scores.resize(judges.size(), std::nan(""));
    out.pass_bits.resize(judges.size(), false);
    out.evidence.resize(judges.size());
    for (std::size_t m = 0; m < judges.size(); ++m) {
        try {
            double raw = judges[m]->score(sample, candidate);
            out.raw_scores[m] = raw;
            out.pass_bits[m] = raw >= cfg.tau;
        } catch (const std::exception& e) {
            // Conservative: a failing judge contributes a zero pass bit.
            out.evidence[m] = std::string(judges[m]->name()) + ": " + e.what();
        }
        if (out.pass_bits[m]) ++out.pass_count;
    }
    return out;
}

std::optional<AcceptedRecord> accept(
    const std::vector<std::pair<CandidateResponse, JudgeVerdictSet>>& scored,
    const LoopConfig& cfg, std::string* demotion_evidence) {
    const std::pair<CandidateResponse, JudgeVerdictSet>* best = nullptr;
    bool met_rule_without_ast = false;
    for (const auto& entry : scored) {
        if (entry.first.failed || !entry.second.accepted(cfg.acceptance)) continue;
        if (!entry.first.parsed) {
            met_rule_without_ast = true;  // demoted: no AST, never serialized
            continue;
        }
        if (!best || entry.first.attempt < best->first.attempt) best = &entry;
    }
    if (!best) {
        if (met_rule_without_ast && demotion_evidence)
            *demotion_evidence = "accepted by judges but demoted: no parseable call AST";
        return std::nullopt;
    }
    AcceptedRecord record;
    record.response = best->first;
    record.verdicts = best->second;
    record.call_canonical = fcall::serialize(*best->first.parsed, cfg.parser);
    return record;
}

IterationOutcome run_iteration(const LoopState& state,
                               const std::map<std::string, data::Sample>& hard_samples,
                               const LoopPorts& ports, const LoopConfig& cfg) {
    if (state.termination != Termination::Running)
        throw std::invalid_argument("run_iteration on a terminated loop");
    if (!ports.generator || !ports.fine_tune)
        throw std::invalid_argument("generator and fine-tune ports are required");
    cfg.validate(ports.judges.size());

    std::vector<data::Sample> hard;
    hard.reserve(state.hard_ids.size());
    for (const auto& id : state.hard_ids) {
        auto it = hard_samples.find(id);
        if (it == hard_samples.end())
            throw std::invalid_argument("hard sample missing from the input set: " + id);
        hard.push_back(it->second);
    }

    std::vector<CandidateResponse> candidates = generate_candidates(hard, *ports.generator, cfg);

    std::vector<JudgeVerdictSet> verdicts(candidates.size());
    parallel_for(candidates.size(), cfg.parallelism, [&](std::size_t i) {
        if (candidates[i].failed) return;
        const data::Sample& sample = hard[i / static_cast<std::size_t>(cfg.n_gen)];
        verdicts[i] = score_candidate(sample, candidates[i], ports.judges, cfg);
    });

    IterationOutcome out;
    out.report.iteration = state.iteration;
    out.report.hard_before = hard.size();
    out.report.candidates =
        static_cast<std::size_t>(std::count_if(candidates.begin(), candidates.end(),
                                               [](const CandidateResponse& c) { return !c.failed; }));

    std::set<std::string> accepted_ids;
    for (std::size_t s = 0; s < hard.size(); ++s) {
        std::vector<std::pair<CandidateResponse, JudgeVerdictSet>> scored;
        for (int a = 0; a < cfg.n_gen; ++a) {
            std::size_t idx = s * static_cast<std::size_t>(cfg.n_gen) + static_cast<std::size_t>(a);
            scored.emplace_back(candidates[idx], verdicts[idx]);
        }
        std::string demotion;
        if (auto record = accept(scored, cfg, &demotion)) {
            accepted_ids.insert(record->response.sample_id);
            out.accepted.push_back(std::move(*record));
        }
    }

    LoopState next = state;
    next.iteration = state.iteration + 1;
    next.hard_ids.clear();
    for (const auto& id : state.hard_ids)
        if (!accepted_ids.count(id)) next.hard_ids.push_back(id);

    // The fine-tune hook runs on non-empty batches only; an empty batch
    // leaves the model unchanged.
    next.model_tag = out.accepted.empty()
                         ? state.model_tag
                         : ports.fine_tune->fine_tune(out.accepted, state.model_tag);

    if (next.hard_ids.empty())
        next.termination = Termination::Converged;
    else if (next.iteration >= cfg.t_max)
        next.termination = Termination::MaxIterations;

    out.report.accepted = out.accepted.size();
    out.report.hard_after = next.hard_ids.size();
    out.report.acceptance_rate =
        hard.empty() ? 0.0
                     : static_cast<double>(out.accepted.size()) / static_cast<double>(hard.size());
    out.report.model_tag = next.model_tag;
    out.state = std::move(next);
    return out;
}

nlohmann::ordered_json IterationReport::to_json() const {
    return {{"t", iteration},
            {"hard_before", hard_before},
            {"candidates", candidates},
            {"accepted", accepted},
            {"hard_after", hard_after},
            {"acceptance_rate", acceptance_rate},
            {"model_tag", model_tag}};
}

nlohmann::ordered_json accepted_record_to_json(const AcceptedRecord& record,
                                               const data::Sample& sample) {
    nlohmann::ordered_json raw = nlohmann::ordered_json::array();
    for (double v : record.verdicts.raw_scores) {
        if (std::isnan(v))
            raw.push_back(nullptr);
        else
            raw.push_back(v);
    }
    return {{"id", record.response.sample_id},
            {"query", sample.query},
            {"tools", sample.tools},
            {"response_text", record.response.text},
            {"call_canonical", record.call_canonical},
            {"scores",
             {{"raw", std::move(raw)},
              {"pass_bits", record.verdicts.pass_bits},
              {"aggregate", record.verdicts.aggregate()}}}};
}

// ---- runner -------------------------------------------------------------------

LoopRunner::LoopRunner(std::string out_dir, LoopPorts ports, LoopConfig cfg)
    : out_dir_(std::move(out_dir)), ports_(std::move(ports)), cfg_(std::move(cfg)) {
    fs::create_directories(out_dir_);
}

std::string LoopRunner::checkpoint_path(const std::string& out_dir) {
    return out_dir + "/checkpoint.json";
}

void LoopRunner::write_checkpoint(const LoopState& state) const {
    std::string path = checkpoint_path(out_dir_);
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw std::runtime_error("cannot write checkpoint " + tmp);
        out << state.to_json().dump(2) << '\n';
        if (!out) throw std::runtime_error("checkpoint write failed: " + tmp);
    }
    fs::rename(tmp, path);
}

LoopState LoopRunner::run(const std::vector<data::Sample>& hard, bool resume) {
    cfg_.validate(ports_.judges.size());
    std::map<std::string, data::Sample> by_id;
    for (const auto& s : hard) {
        if (!by_id.emplace(s.id, s).second)
            throw std::invalid_argument("duplicate hard sample id: " + s.id);
    }

    LoopState state;
    std::string checkpoint = checkpoint_path(out_dir_);
    if (resume && fs::exists(checkpoint)) {
        std::ifstream in(checkpoint);
        nlohmann::json doc;
        in >> doc;
        state = LoopState::from_json(doc);
        if (state.config_hash != cfg_.config_hash())
            throw std::invalid_argument("checkpoint was written under a different config");
    } else {
        state.seed = cfg_.seed;
        state.config_hash = cfg_.config_hash();
        for (const auto& s : hard) state.hard_ids.push_back(s.id);
        if (state.hard_ids.empty()) state.termination = Termination::Converged;
        write_checkpoint(state);
    }

    reports_.clear();
    while (state.termination == Termination::Running) {
        IterationOutcome outcome = run_iteration(state, by_id, ports_, cfg_);

        std::string dnew_name = "d_new_" + std::to_string(outcome.report.iteration) + ".jsonl";
        std::string dnew_path = out_dir_ + "/" + dnew_name;
        {
            std::ofstream out(dnew_path);
            if (!out) throw std::runtime_error("cannot write " + dnew_path);
            for (const auto& record : outcome.accepted)
                out << accepted_record_to_json(record, by_id.at(record.response.sample_id)).dump()
                    << '\n';
        }
        outcome.state.dnew_manifest_paths.push_back(dnew_name);

        write_checkpoint(outcome.state);  // throws before the in-memory commit
        state = std::move(outcome.state);
        reports_.push_back(outcome.report);

        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (const auto& r : reports_) rows.push_back(r.to_json());
        std::ofstream report_out(out_dir_ + "/report.json");
        report_out << rows.dump(2) << '\n';
    }
    return state;
}

}  // namespace fcc::loop
