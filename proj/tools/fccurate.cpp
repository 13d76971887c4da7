// fccurate: curation and loss instrumentation for function-call training
// data. Subcommands: parse, validate, filter, stats, loss, loop, prompts.
//
// Exit codes: 0 success; 1 content/verdict failure (bad input data);
// 2 usage error; 3 transport or configuration error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "fcc/common.hpp"
#include "fcc/dataset_io.hpp"
#include "fcc/endpoint_clients.hpp"
#include "fcc/fcall_syntax.hpp"
#include "fcc/hdr_loop.hpp"
#include "fcc/quality_gate.hpp"
#include "fcc/segmentation_loss.hpp"
#include "fcc/tool_schema.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitContent = 1;
constexpr int kExitUsage = 2;
constexpr int kExitTransport = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_input(const std::string& path) {
    if (path == "-") {
        std::ostringstream buf;
        buf << std::cin.rdbuf();
        return buf.str();
    }
    std::ifstream in(path);
    if (!in) throw fcc::net::ConfigError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Strips one trailing newline: answers live one-per-line in the corpus.
std::string chomp(std::string text) {
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    return text;
}

std::uint64_t file_digest(const std::string& path) {
    return fcc::fnv1a64(read_input(path));
}

// Missing input files are environment problems (exit 3), unlike malformed
// content (exit 1).
void require_file(const std::string& path) {
    if (path != "-" && !fs::exists(path)) throw fcc::net::ConfigError("cannot open " + path);
}

struct ManifestWriter {
    ordered_json doc;

    ManifestWriter(const std::string& command, const ordered_json& options) {
        doc["tool"] = "fccurate";
        doc["version"] = kVersion;
        doc["command"] = command;
        doc["options"] = options;
        doc["config_hash"] = fcc::to_hex(fcc::fnv1a64(options.dump()));
        doc["inputs"] = ordered_json::object();
        doc["outputs"] = ordered_json::array();
    }

    void add_input(const std::string& path) {
        if (path == "-")
            doc["inputs"]["stdin"] = nullptr;
        else
            doc["inputs"][path] = fcc::to_hex(file_digest(path));
    }

    void add_output(const std::string& path) { doc["outputs"].push_back(path); }

    void write(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write manifest " + path);
        out << doc.dump(2) << '\n';
    }
};

fcc::fcall::ParserOptions parser_options_from(bool allow_dots, bool allow_hyphens, int max_depth,
                                              bool json_literals) {
    fcc::fcall::ParserOptions opts;
    opts.allow_dot_in_names = allow_dots;
    opts.allow_hyphen_in_names = allow_hyphens;
    opts.max_depth = max_depth;
    opts.literal_style =
        json_literals ? fcc::fcall::LiteralStyle::Json : fcc::fcall::LiteralStyle::Python;
    return opts;
}

// --judge / --generator value: "off", "mock:true", "mock:false",
// "mock:accept", "mock:reject", "mock:echo", "mock:<script.json>", or an
// endpoint config JSON path.
std::shared_ptr<fcc::net::ChatClient> make_chat_client(const std::string& spec,
                                                       const std::string& true_reply,
                                                       const std::string& false_reply) {
    if (spec.rfind("mock:", 0) == 0) {
        std::string what = spec.substr(5);
        if (what == "true" || what == "accept")
            return std::make_shared<fcc::net::MockChatClient>(true_reply);
        if (what == "false" || what == "reject")
            return std::make_shared<fcc::net::MockChatClient>(false_reply);
        auto script = nlohmann::json::parse(read_input(what), nullptr, false);
        if (script.is_discarded())
            throw fcc::net::ConfigError("mock script is not valid JSON: " + what);
        return fcc::net::MockChatClient::from_script_json(script);
    }
    auto doc = nlohmann::json::parse(read_input(spec), nullptr, false);
    if (doc.is_discarded()) throw fcc::net::ConfigError("endpoint config is not valid JSON: " + spec);
    return std::make_shared<fcc::net::HttpChatClient>(fcc::net::EndpointConfig::from_json(doc));
}

// Generator that answers with the sample's own reference answer. Handy for
// offline loop smoke runs.
class AnswerEchoGenerator : public fcc::loop::GeneratorPort {
public:
    std::string generate(const fcc::data::Sample& sample, int) override { return sample.answer; }
    std::string tag() const override { return "echo-reference"; }
};

std::unique_ptr<fcc::loss::TokenCounter> make_tokenizer(const std::string& spec) {
    if (spec == "ws" || spec == "whitespace")
        return std::make_unique<fcc::loss::WhitespaceTokenCounter>();
    if (spec.rfind("vocab:", 0) == 0)
        return std::make_unique<fcc::loss::VocabTokenCounter>(
            fcc::loss::VocabTokenCounter::load(spec.substr(6)));
    throw fcc::net::ConfigError("unknown tokenizer spec: " + spec + " (use ws or vocab:FILE)");
}

// ---- subcommands ------------------------------------------------------------

int cmd_parse(const std::string& input, bool lenient, const fcc::fcall::ParserOptions& popts) {
    std::string text = chomp(read_input(input));
    auto result = lenient ? fcc::fcall::parse_lenient(text, popts)
                          : fcc::fcall::parse_strict(text, popts);
    ordered_json out;
    out["ok"] = result.ok();
    if (result.ok()) {
        out["ast"] = fcc::fcall::to_json(*result.calls);
        out["canonical"] = fcc::fcall::serialize(*result.calls, popts);
    }
    ordered_json diags = ordered_json::array();
    for (const auto& d : result.diagnostics) diags.push_back(fcc::fcall::to_json(d));
    out["diagnostics"] = std::move(diags);
    std::cout << out.dump(2) << '\n';
    return result.ok() ? kExitOk : kExitContent;
}

int cmd_validate_format(const std::string& input, bool lenient,
                        const fcc::fcall::ParserOptions& popts) {
    std::string text = chomp(read_input(input));
    auto result = lenient ? fcc::fcall::parse_lenient(text, popts)
                          : fcc::fcall::parse_strict(text, popts);
    ordered_json out;
    out["mode"] = lenient ? "lenient" : "strict";
    out["ok"] = result.ok();
    ordered_json diags = ordered_json::array();
    for (const auto& d : result.diagnostics) diags.push_back(fcc::fcall::to_json(d));
    out["diagnostics"] = std::move(diags);
    if (result.ok() && lenient && !result.diagnostics.empty())
        out["repaired"] = fcc::fcall::serialize(*result.calls, popts);
    std::cout << out.dump(2) << '\n';
    return result.ok() ? kExitOk : kExitContent;
}

int cmd_validate_schema(const std::string& tools_path, const std::string& call_path,
                        const fcc::fcall::ParserOptions& popts) {
    fcc::schema::ToolCatalog catalog = fcc::schema::load_catalog(read_input(tools_path));
    std::string text = chomp(read_input(call_path));
    auto parsed = fcc::fcall::parse_lenient(text, popts);
    ordered_json out;
    if (!parsed.ok()) {
        out["ok"] = false;
        ordered_json diags = ordered_json::array();
        for (const auto& d : parsed.diagnostics) diags.push_back(fcc::fcall::to_json(d));
        out["diagnostics"] = std::move(diags);
        std::cout << out.dump(2) << '\n';
        return kExitContent;
    }
    auto validation = fcc::schema::validate_calls(*parsed.calls, catalog);
    out["ok"] = validation.pass;
    out["validation"] = fcc::schema::to_json(validation);
    ordered_json warnings = ordered_json::array();
    for (const auto& w : catalog.warnings)
        warnings.push_back({{"tool", w.tool}, {"param", w.param}, {"message", w.message}});
    out["catalog_warnings"] = std::move(warnings);
    std::cout << out.dump(2) << '\n';
    return validation.pass ? kExitOk : kExitContent;
}

struct FilterArgs {
    std::string in;
    std::string judge = "off";
    std::string out_dir;
    int parallelism = 1;
    bool full_evaluation = false;
    bool resume = false;
    bool lenient_read = false;
    std::string field_map;
    std::string prompt_dir;
    std::uint64_t seed = 0;
};

int cmd_filter(const FilterArgs& args) {
    require_file(args.in);
    fs::create_directories(args.out_dir);
    fcc::data::ReadOptions ropts;
    ropts.lenient = args.lenient_read;
    if (!args.field_map.empty())
        ropts.fields = fcc::data::FieldMap::from_json(nlohmann::json::parse(read_input(args.field_map)));

    std::vector<fcc::data::Sample> samples;
    if (args.in == "-") {
        samples = fcc::data::read_samples(std::cin, ropts);
    } else {
        samples = fcc::data::read_samples(args.in, ropts);
    }

    std::shared_ptr<fcc::net::ChatClient> judge;
    if (args.judge != "off")
        judge = make_chat_client(args.judge, "<think>mock</think><judge>True</judge>",
                                 "<think>mock</think><judge>False</judge>");

    fcc::gate::GateOptions gopts;
    gopts.full_evaluation = args.full_evaluation;
    gopts.prompt_dir = args.prompt_dir;

    const std::string verdicts_path = args.out_dir + "/verdicts.jsonl";
    const std::string progress_path = args.out_dir + "/progress.json";

    // Resume: verdicts already on disk are kept; their samples are skipped.
    std::size_t done = 0;
    fcc::gate::Partition partition;
    if (args.resume && fs::exists(verdicts_path)) {
        std::ifstream in(verdicts_path);
        std::string line;
        while (std::getline(in, line)) {
            if (fcc::trim(line).empty()) continue;
            auto v = nlohmann::json::parse(line);
            ++done;
            bool bqc = v["bqc_pass"].get<bool>();
            bool ac = v["ac_pass"].get<bool>();
            std::string id = v["id"].get<std::string>();
            if (bqc && ac)
                partition.qualified.push_back(id);
            else if (bqc)
                partition.hard.push_back(id);
            else
                partition.dropped.push_back(id);
        }
    }
    if (done > samples.size()) throw fcc::net::ConfigError("progress exceeds input size; wrong --in?");

    std::ofstream verdicts_out(verdicts_path, done > 0 ? std::ios::app : std::ios::trunc);
    if (!verdicts_out) throw std::runtime_error("cannot write " + verdicts_path);
    fcc::gate::TranscriptLog transcripts;

    const std::size_t chunk = std::max<std::size_t>(64, static_cast<std::size_t>(args.parallelism) * 8);
    for (std::size_t begin = done; begin < samples.size(); begin += chunk) {
        std::size_t end = std::min(samples.size(), begin + chunk);
        std::vector<fcc::data::Sample> slice(samples.begin() + static_cast<std::ptrdiff_t>(begin),
                                             samples.begin() + static_cast<std::ptrdiff_t>(end));
        auto result = fcc::gate::partition(slice, judge.get(), gopts, args.parallelism, {},
                                           &transcripts);
        for (const auto& v : result.verdicts) {
            verdicts_out << fcc::gate::to_json(v).dump() << '\n';
            if (!verdicts_out) throw std::runtime_error("verdict write failed: " + verdicts_path);
        }
        verdicts_out.flush();
        partition.qualified.insert(partition.qualified.end(), result.partition.qualified.begin(),
                                   result.partition.qualified.end());
        partition.hard.insert(partition.hard.end(), result.partition.hard.begin(),
                              result.partition.hard.end());
        partition.dropped.insert(partition.dropped.end(), result.partition.dropped.begin(),
                                 result.partition.dropped.end());
        std::ofstream progress(progress_path);
        progress << ordered_json{{"processed", end}, {"total", samples.size()}}.dump() << '\n';
    }

    {
        std::ofstream out(args.out_dir + "/partition.json");
        out << fcc::gate::to_json(partition).dump(2) << '\n';
    }
    {
        std::ofstream out(args.out_dir + "/transcripts.jsonl");
        for (const auto& t : transcripts.entries())
            out << ordered_json{{"ref", t.ref}, {"prompt", t.prompt}, {"reply", t.reply}}.dump()
                << '\n';
    }

    ManifestWriter manifest("filter", ordered_json{{"in", args.in},
                                                   {"judge", args.judge},
                                                   {"parallelism", args.parallelism},
                                                   {"full_evaluation", args.full_evaluation},
                                                   {"seed", args.seed}});
    manifest.add_input(args.in);
    manifest.add_output("partition.json");
    manifest.add_output("verdicts.jsonl");
    manifest.add_output("transcripts.jsonl");
    manifest.write(args.out_dir + "/run_manifest.json");

    std::cerr << "qualified " << partition.qualified.size() << ", hard " << partition.hard.size()
              << ", dropped " << partition.dropped.size() << "\n";
    return kExitOk;
}

int cmd_stats(const std::string& in, const std::string& tokenizer_spec, bool split_turns,
              bool lenient, const std::string& out_dir, bool text_only) {
    require_file(in);
    auto tokenizer = make_tokenizer(tokenizer_spec);
    fcc::data::ReadOptions ropts;
    ropts.lenient = lenient;
    ropts.split_turns = split_turns;
    fcc::data::CorpusReport report;
    if (in == "-")
        report = fcc::data::report(std::cin, *tokenizer, ropts);
    else
        report = fcc::data::report(in, *tokenizer, ropts);

    if (text_only)
        std::cout << report.to_text();
    else
        std::cout << report.to_json().dump(2) << '\n' << report.to_text();

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream out(out_dir + "/corpus_report.json");
        out << report.to_json().dump(2) << '\n';
        ManifestWriter manifest("stats", ordered_json{{"in", in},
                                                      {"tokenizer", tokenizer_spec},
                                                      {"split_turns", split_turns}});
        manifest.add_input(in);
        manifest.add_output("corpus_report.json");
        manifest.write(out_dir + "/run_manifest.json");
    }
    return kExitOk;
}

int cmd_loss(const std::string& in, const std::string& tokenizer_spec, const std::string& mode,
             double alpha_init, double alpha_lr) {
    auto tokenizer = make_tokenizer(tokenizer_spec);
    fcc::loss::AlphaState alpha =
        fcc::loss::AlphaState::init(fcc::loss::alpha_mode_from_string(mode), alpha_init, alpha_lr);

    std::istringstream text_in;
    std::ifstream file_in;
    std::istream* stream = &std::cin;
    if (in != "-") {
        file_in.open(in);
        if (!file_in) throw fcc::net::ConfigError("cannot open " + in);
        stream = &file_in;
    }

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(*stream, line)) {
        ++lineno;
        if (fcc::trim(line).empty()) continue;
        auto record = nlohmann::json::parse(line, nullptr, false);
        if (record.is_discarded()) {
            std::cerr << "line " << lineno << ": malformed JSON\n";
            return kExitContent;
        }
        ordered_json out;
        if (record.contains("per_token_losses")) {
            auto values = record["per_token_losses"].get<std::vector<double>>();
            std::size_t n_think = record.value("n_think", 0);
            if (n_think > values.size()) {
                std::cerr << "line " << lineno << ": n_think exceeds the loss vector length\n";
                return kExitContent;
            }
            Eigen::VectorXd losses(static_cast<Eigen::Index>(values.size()));
            for (std::size_t i = 0; i < values.size(); ++i)
                losses[static_cast<Eigen::Index>(i)] = values[i];
            fcc::loss::SpanMask mask{n_think, values.size() - n_think};
            fcc::loss::LossBreakdown breakdown = fcc::loss::decompose(losses, mask, alpha.value());
            alpha = fcc::loss::alpha_step(alpha, breakdown);
            out = fcc::loss::to_json(breakdown);
        } else if (record.contains("response_text")) {
            fcc::loss::SpanMask mask =
                fcc::loss::segment(record["response_text"].get<std::string>(), *tokenizer);
            out["n_think"] = mask.n_think;
            out["n_result"] = mask.n_result;
            out["think_weight"] = mask.think_weight();
            out["result_weight"] = 1.0 - mask.think_weight();
            out["alpha"] = alpha.value();
            out["think_loss"] = nullptr;  // no per-token losses supplied
            out["result_loss"] = nullptr;
            out["sft_loss"] = nullptr;
            out["balanced_loss"] = nullptr;
        } else {
            std::cerr << "line " << lineno
                      << ": record needs per_token_losses or response_text\n";
            return kExitContent;
        }
        std::cout << out.dump() << '\n';
    }
    return kExitOk;
}

struct LoopArgs {
    std::string hard;
    std::string out_dir;
    std::string generator = "mock:echo";
    std::vector<std::string> judges;
    std::string acceptance = "unanimous";
    double tau = 0.5;
    int t_max = 10;
    int n_gen = 3;
    double temperature = 0.7;
    std::uint64_t seed = 0;
    int parallelism = 8;
    bool resume = false;
    std::string finetune_cmd;
    std::string prompt_dir;
    std::string field_map;
};

int cmd_loop(const LoopArgs& args) {
    require_file(args.hard);
    fcc::loop::LoopConfig cfg;
    cfg.t_max = args.t_max;
    cfg.tau = args.tau;
    cfg.n_gen = args.n_gen;
    cfg.temperature = args.temperature;
    cfg.acceptance = fcc::loop::acceptance_rule_from_string(args.acceptance);
    cfg.seed = args.seed;
    cfg.parallelism = args.parallelism;
    cfg.prompt_dir = args.prompt_dir;

    fcc::data::ReadOptions ropts;
    if (!args.field_map.empty())
        ropts.fields = fcc::data::FieldMap::from_json(nlohmann::json::parse(read_input(args.field_map)));
    std::vector<fcc::data::Sample> hard;
    if (args.hard == "-")
        hard = fcc::data::read_samples(std::cin, ropts);
    else
        hard = fcc::data::read_samples(args.hard, ropts);

    std::unique_ptr<fcc::loop::GeneratorPort> generator;
    std::shared_ptr<fcc::net::ChatClient> generator_client;
    if (args.generator == "mock:echo") {
        generator = std::make_unique<AnswerEchoGenerator>();
    } else {
        generator_client = make_chat_client(args.generator, "[noop()]", "[noop()]");
        generator = std::make_unique<fcc::loop::ChatGenerator>(generator_client, args.prompt_dir);
    }

    std::vector<std::shared_ptr<fcc::net::ChatClient>> judge_clients;
    std::vector<std::unique_ptr<fcc::loop::ScoreJudgePort>> judge_ports;
    for (const auto& spec : args.judges) {
        judge_clients.push_back(make_chat_client(spec, "1.0", "0.0"));
        judge_ports.push_back(
            std::make_unique<fcc::loop::ChatScoreJudge>(judge_clients.back(), cfg));
    }
    if (judge_ports.empty()) throw fcc::net::ConfigError("at least one --judge is required");

    std::unique_ptr<fcc::loop::FineTunePort> tuner;
    if (args.finetune_cmd.empty())
        tuner = std::make_unique<fcc::loop::RecordingFineTune>();
    else
        tuner = std::make_unique<fcc::loop::CommandFineTune>(args.finetune_cmd,
                                                             args.out_dir + "/finetune");

    fcc::loop::LoopPorts ports;
    ports.generator = generator.get();
    for (const auto& j : judge_ports) ports.judges.push_back(j.get());
    ports.fine_tune = tuner.get();

    fcc::loop::LoopRunner runner(args.out_dir, ports, cfg);
    fcc::loop::LoopState final_state = runner.run(hard, args.resume);

    ManifestWriter manifest("loop", ordered_json{{"hard", args.hard},
                                                 {"generator", args.generator},
                                                 {"judges", args.judges},
                                                 {"config", cfg.to_json()}});
    manifest.add_input(args.hard);
    manifest.add_output("checkpoint.json");
    manifest.add_output("report.json");
    for (const auto& p : final_state.dnew_manifest_paths) manifest.add_output(p);
    manifest.write(args.out_dir + "/run_manifest.json");

    std::cerr << "terminated: " << fcc::loop::termination_name(final_state.termination) << " at t="
              << final_state.iteration << ", hard remaining " << final_state.hard_ids.size()
              << "\n";
    for (const auto& r : runner.reports())
        std::cerr << "  t=" << r.iteration << " hard " << r.hard_before << " -> " << r.hard_after
                  << ", accepted " << r.accepted << "\n";
    return kExitOk;
}

int cmd_prompts(const std::string& action, const std::string& name_or_dir) {
    using fcc::net::PromptTemplateId;
    const PromptTemplateId all[] = {
        PromptTemplateId::ResponseId, PromptTemplateId::QueryToolId, PromptTemplateId::CotId,
        PromptTemplateId::FuncParamId, PromptTemplateId::FormatId, PromptTemplateId::JudgeScore,
        PromptTemplateId::Generator,
    };
    if (action == "list") {
        for (auto id : all) std::cout << fcc::net::prompt_template_name(id) << '\n';
        return kExitOk;
    }
    if (action == "show") {
        auto id = fcc::net::prompt_template_from_name(name_or_dir);
        if (!id) throw UsageError("unknown template: " + name_or_dir);
        std::cout << fcc::net::prompt_template_text(*id);
        return kExitOk;
    }
    if (action == "export") {
        if (name_or_dir.empty()) throw UsageError("prompts export needs a directory");
        fs::create_directories(name_or_dir);
        for (auto id : all) {
            std::string path =
                name_or_dir + "/" + fcc::net::prompt_template_name(id) + ".txt";
            std::ofstream out(path);
            out << fcc::net::prompt_template_text(id);
        }
        return kExitOk;
    }
    throw UsageError("prompts action must be list, show or export");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"curation and loss instrumentation for function-call training data"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.set_config("--config");
    std::string manifest_path;
    app.add_option("--manifest", manifest_path,
                   "write a run manifest (automatic for filter, loop, stats --out)");

    // parse ----------------------------------------------------------------
    auto* parse_cmd = app.add_subcommand("parse", "parse a bracketed call list, emit the AST");
    std::string parse_input = "-";
    bool parse_lenient_flag = false;
    bool allow_dots = false, allow_hyphens = false, json_literals = false;
    int max_depth = 32;
    parse_cmd->add_option("input", parse_input, "file or - for stdin");
    parse_cmd->add_flag("--lenient", parse_lenient_flag, "apply format repairs");
    parse_cmd->add_flag("--allow-dots", allow_dots, "allow '.' in identifiers");
    parse_cmd->add_flag("--allow-hyphens", allow_hyphens, "allow '-' in identifiers");
    parse_cmd->add_flag("--json-literals", json_literals, "true/false/null literal style");
    parse_cmd->add_option("--max-depth", max_depth, "value nesting cap");

    // validate --------------------------------------------------------------
    auto* validate_cmd = app.add_subcommand("validate", "format and schema checks");
    std::string validate_input = "-";
    bool v_strict = false, v_lenient = false;
    std::string v_tools, v_call;
    validate_cmd->add_option("input", validate_input, "file or - for stdin");
    validate_cmd->add_flag("--strict", v_strict, "canonical grammar only (default)");
    validate_cmd->add_flag("--lenient", v_lenient, "apply format repairs");
    validate_cmd->add_option("--tools", v_tools, "tool catalog JSON: validate the call against it");
    validate_cmd->add_option("--call", v_call, "call text file (with --tools)");
    validate_cmd->add_flag("--allow-dots", allow_dots, "allow '.' in identifiers");
    validate_cmd->add_flag("--allow-hyphens", allow_hyphens, "allow '-' in identifiers");
    validate_cmd->add_flag("--json-literals", json_literals, "true/false/null literal style");
    validate_cmd->add_option("--max-depth", max_depth, "value nesting cap");

    // filter ----------------------------------------------------------------
    auto* filter_cmd = app.add_subcommand("filter", "two-stage quality filtration");
    FilterArgs fargs;
    filter_cmd->add_option("--in", fargs.in, "sample JSONL")->required();
    filter_cmd->add_option("--judge", fargs.judge,
                           "endpoint.json | mock:true | mock:false | mock:FILE | off")
        ->envname("FCC_JUDGE");
    filter_cmd->add_option("--out", fargs.out_dir, "output directory")->required();
    filter_cmd->add_option("--parallelism", fargs.parallelism, "bounded fan-out")
        ->envname("FCC_PARALLELISM");
    filter_cmd->add_flag("--full-evaluation", fargs.full_evaluation,
                         "run every BQC check even after a failure");
    filter_cmd->add_flag("--resume", fargs.resume, "continue from verdicts already on disk");
    filter_cmd->add_flag("--lenient-read", fargs.lenient_read, "skip malformed input lines");
    filter_cmd->add_option("--field-map", fargs.field_map, "JSON field-name mapping");
    filter_cmd->add_option("--prompt-dir", fargs.prompt_dir, "prompt template override directory");
    filter_cmd->add_option("--seed", fargs.seed, "run seed (recorded in the manifest)")
        ->envname("FCC_SEED");

    // stats -----------------------------------------------------------------
    auto* stats_cmd = app.add_subcommand("stats", "corpus token statistics and categories");
    std::string stats_in;
    std::string stats_tokenizer = "ws";
    bool stats_split = true, stats_lenient = false, stats_text = false;
    std::string stats_out;
    stats_cmd->add_option("--in", stats_in, "sample JSONL")->required();
    stats_cmd->add_option("--tokenizer", stats_tokenizer, "ws | vocab:FILE");
    stats_cmd->add_flag("--split-turns,!--no-split-turns", stats_split,
                        "split multi-turn conversations per turn (default on)");
    stats_cmd->add_flag("--lenient-read", stats_lenient, "skip malformed input lines");
    stats_cmd->add_flag("--text", stats_text, "text table only");
    stats_cmd->add_option("--out", stats_out, "also write corpus_report.json here");

    // loss ------------------------------------------------------------------
    auto* loss_cmd = app.add_subcommand("loss", "span-decomposed loss arithmetic");
    std::string loss_in = "-";
    std::string loss_tokenizer = "ws";
    std::string alpha_mode = "fixed";
    double alpha_init = 0.7, alpha_lr = 1e-3;
    loss_cmd->add_option("--in", loss_in, "JSONL of {response_text} or {per_token_losses, n_think}");
    loss_cmd->add_option("--tokenizer", loss_tokenizer, "ws | vocab:FILE");
    loss_cmd->add_option("--alpha-mode", alpha_mode, "fixed | sgd | balance");
    loss_cmd->add_option("--alpha-init", alpha_init, "initial alpha (default 0.7)");
    loss_cmd->add_option("--alpha-lr", alpha_lr, "sgd learning rate");

    // loop ------------------------------------------------------------------
    auto* loop_cmd = app.add_subcommand("loop", "self-evolving resampling over the hard set");
    LoopArgs largs;
    loop_cmd->add_option("--hard", largs.hard, "hard sample JSONL")->required();
    loop_cmd->add_option("--out", largs.out_dir, "output directory")->required();
    loop_cmd->add_option("--generator", largs.generator,
                         "endpoint.json | mock:echo | mock:FILE")
        ->envname("FCC_GENERATOR");
    loop_cmd->add_option("--judge", largs.judges,
                         "endpoint.json | mock:accept | mock:reject | mock:FILE (repeatable)")
        ->required();
    loop_cmd->add_option("--acceptance", largs.acceptance, "unanimous | majority");
    loop_cmd->add_option("--tau", largs.tau, "per-judge passing threshold (default 0.5)");
    loop_cmd->add_option("--tmax", largs.t_max, "maximum iterations (default 10)");
    loop_cmd->add_option("--ngen", largs.n_gen, "candidates per hard sample (default 3)");
    loop_cmd->add_option("--temperature", largs.temperature, "generation temperature");
    loop_cmd->add_option("--seed", largs.seed, "run seed")->envname("FCC_SEED");
    loop_cmd->add_option("--parallelism", largs.parallelism, "bounded fan-out")
        ->envname("FCC_PARALLELISM");
    loop_cmd->add_flag("--resume", largs.resume, "resume from the checkpoint");
    loop_cmd->add_option("--finetune-cmd", largs.finetune_cmd,
                         "external training command; {dnew} and {model} are substituted");
    loop_cmd->add_option("--prompt-dir", largs.prompt_dir, "prompt template override directory");
    loop_cmd->add_option("--field-map", largs.field_map, "JSON field-name mapping");

    // prompts ---------------------------------------------------------------
    auto* prompts_cmd = app.add_subcommand("prompts", "list, show or export prompt templates");
    std::string prompts_action;
    std::string prompts_arg;
    prompts_cmd->add_option("action", prompts_action, "list | show | export")->required();
    prompts_cmd->add_option("arg", prompts_arg, "template name or export directory");

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    }

    auto write_generic_manifest = [&](int code) {
        if (manifest_path.empty()) return code;
        ordered_json argv_json = ordered_json::array();
        for (int i = 1; i < argc; ++i) argv_json.push_back(argv[i]);
        ManifestWriter manifest(app.get_subcommands().empty()
                                    ? "?"
                                    : app.get_subcommands().front()->get_name(),
                                ordered_json{{"argv", argv_json}});
        for (int i = 1; i < argc; ++i)
            if (fs::is_regular_file(argv[i])) manifest.add_input(argv[i]);
        manifest.doc["exit_code"] = code;
        manifest.write(manifest_path);
        return code;
    };

    try {
        auto popts = parser_options_from(allow_dots, allow_hyphens, max_depth, json_literals);
        if (parse_cmd->parsed())
            return write_generic_manifest(cmd_parse(parse_input, parse_lenient_flag, popts));
        if (validate_cmd->parsed()) {
            if (v_strict && v_lenient) throw UsageError("--strict and --lenient are exclusive");
            if (!v_tools.empty())
                return write_generic_manifest(
                    cmd_validate_schema(v_tools, v_call.empty() ? validate_input : v_call, popts));
            return write_generic_manifest(cmd_validate_format(validate_input, v_lenient, popts));
        }
        if (filter_cmd->parsed()) return write_generic_manifest(cmd_filter(fargs));
        if (stats_cmd->parsed())
            return write_generic_manifest(cmd_stats(stats_in, stats_tokenizer, stats_split,
                                                    stats_lenient, stats_out, stats_text));
        if (loss_cmd->parsed())
            return write_generic_manifest(
                cmd_loss(loss_in, loss_tokenizer, alpha_mode, alpha_init, alpha_lr));
        if (loop_cmd->parsed()) return write_generic_manifest(cmd_loop(largs));
        if (prompts_cmd->parsed()) return write_generic_manifest(cmd_prompts(prompts_action, prompts_arg));
        throw UsageError("no subcommand");

    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const fcc::net::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitTransport;
    } catch (const fcc::net::TransportError& e) {
        std::cerr << "transport error: " << e.what() << "\n";
        return kExitTransport;
    } catch (const fcc::data::ReadError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitContent;
    } catch (const fcc::schema::CatalogError& e) {
        std::cerr << "catalog error: " << e.what() << "\n";
        return kExitContent;
    } catch (const fcc::loss::SegmentationError& e) {
        std::cerr << "segmentation error: " << e.what() << "\n";
        return kExitContent;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitTransport;
    }
}
