// End-to-end checks against the built binary: exit codes, output files,
// determinism at the CLI boundary.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fcc/endpoint_clients.hpp"
#include "json.hpp"

#ifndef FCC_CLI_PATH
#define FCC_CLI_PATH "fccurate"
#endif
#ifndef FCC_SOURCE_DIR
#define FCC_SOURCE_DIR "."
#endif

namespace {

namespace fs = std::filesystem;

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path work_dir() {
    static fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "fcc_cli_tests";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

RunResult run_cli(const std::string& args, const std::string& stdin_text = "") {
    static int counter = 0;
    fs::path out = work_dir() / ("out" + std::to_string(counter) + ".txt");
    fs::path err = work_dir() / ("err" + std::to_string(counter) + ".txt");
    fs::path in = work_dir() / ("in" + std::to_string(counter) + ".txt");
    ++counter;
    std::string command = std::string(FCC_CLI_PATH) + " " + args;
    if (!stdin_text.empty()) {
        std::ofstream f(in);
        f << stdin_text;
        command += " < " + in.string();
    } else {
        command += " < /dev/null";
    }
    command += " > " + out.string() + " 2> " + err.string();
    int status = std::system(command.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

std::string write_file(const std::string& name, const std::string& content) {
    fs::path p = work_dir() / name;
    std::ofstream f(p);
    f << content;
    return p.string();
}

const char* kFilterInput =
    R"({"id": "a", "query": "schedules", "tools": [{"name": "m", "parameters": {"day": {"type": "int", "default": 1}}}], "answer": "[m(day=28)]"})"
    "\n"
    R"({"id": "b", "query": "weather", "tools": [{"name": "w", "parameters": {"q": {"type": "str", "default": "x"}}}], "answer": "[ w(q=\"Chicago\")]"})"
    "\n"
    R"({"id": "c", "query": "hi", "tools": [], "answer": "no call here"})"
    "\n";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("parse emits the AST and exits 0") {
    RunResult r = run_cli("parse", "[matchschedules(day=28, month=2, year=2024)]");
    CHECK(r.exit_code == 0);
    auto doc = nlohmann::json::parse(r.out);
    CHECK(doc["ok"] == true);
    CHECK(doc["ast"]["calls"][0]["name"] == "matchschedules");
    CHECK(doc["canonical"] == "[matchschedules(day=28, month=2, year=2024)]");
}

TEST_CASE("strict validate rejects the defective answer with exit 1") {
    RunResult r = run_cli(
        "validate --strict",
        "[ forecast_weather_api(q=\"Chicago\", days=7), forecast_weather_api(q=\"Toronto\", days=7)]");
    CHECK(r.exit_code == 1);
    CHECK(r.out.find("LEADING_SPACE") != std::string::npos);

    RunResult lenient = run_cli(
        "validate --lenient",
        "[ forecast_weather_api(q=\"Chicago\", days=7), forecast_weather_api(q=\"Toronto\", days=7)]");
    CHECK(lenient.exit_code == 0);
    auto doc = nlohmann::json::parse(lenient.out);
    CHECK(doc["repaired"] ==
          "[forecast_weather_api(q=\"Chicago\", days=7), forecast_weather_api(q=\"Toronto\", days=7)]");
}

TEST_CASE("unknown flags exit 2") {
    CHECK(run_cli("parse --no-such-flag", "[f()]").exit_code == 2);
    CHECK(run_cli("").exit_code == 2);
}

TEST_CASE("missing files are config errors, exit 3") {
    CHECK(run_cli("parse /no/such/file").exit_code == 3);
    CHECK(run_cli("filter --in /no/such.jsonl --out " + (work_dir() / "x").string()).exit_code == 3);
}

TEST_CASE("schema validation through the CLI") {
    std::string tools = write_file(
        "tools.json", R"([{"name": "m", "parameters": {"day": {"type": "int", "default": 1}}}])");
    std::string good = write_file("good.txt", "[m(day=28)]");
    std::string bad = write_file("bad.txt", "[m(day=\"28\")]");
    CHECK(run_cli("validate --tools " + tools + " --call " + good).exit_code == 0);
    RunResult r = run_cli("validate --tools " + tools + " --call " + bad);
    CHECK(r.exit_code == 1);
    CHECK(r.out.find("TYPE_MISMATCH") != std::string::npos);
}

TEST_CASE("filter writes partition, verdicts, transcripts and manifest") {
    std::string in = write_file("gate_in.jsonl", kFilterInput);
    fs::path out_dir = work_dir() / "gate_out";
    RunResult r = run_cli("filter --in " + in + " --judge mock:true --out " + out_dir.string());
    CHECK(r.exit_code == 0);
    auto partition = nlohmann::json::parse(slurp(out_dir / "partition.json"));
    CHECK(partition["qualified"] == nlohmann::json::array({"a"}));
    CHECK(partition["hard"] == nlohmann::json::array({"b"}));
    CHECK(partition["dropped"] == nlohmann::json::array({"c"}));

    std::istringstream verdicts(slurp(out_dir / "verdicts.jsonl"));
    std::string line;
    std::size_t count = 0;
    while (std::getline(verdicts, line))
        if (!line.empty()) ++count;
    CHECK(count == 3);

    auto manifest = nlohmann::json::parse(slurp(out_dir / "run_manifest.json"));
    CHECK(manifest["command"] == "filter");
    CHECK(manifest["inputs"].contains(in));
    CHECK(slurp(out_dir / "progress.json").find("\"processed\":3") != std::string::npos);
}

TEST_CASE("filter produces identical deterministic verdicts under different judges") {
    std::string in = write_file("gate_in2.jsonl", kFilterInput);
    std::string alt_judge =
        write_file("alt_judge.json", R"({"default": "<think>another path</think><judge>True</judge>"})");
    fs::path yes_dir = work_dir() / "gate_yes";
    fs::path alt_dir = work_dir() / "gate_alt";
    CHECK(run_cli("filter --in " + in + " --judge mock:true --out " + yes_dir.string()).exit_code ==
          0);
    CHECK(run_cli("filter --in " + in + " --judge mock:" + alt_judge + " --out " +
                  alt_dir.string())
              .exit_code == 0);
    auto read_format_verdicts = [](const fs::path& dir) {
        std::vector<std::string> out;
        std::istringstream lines(slurp(dir / "verdicts.jsonl"));
        std::string line;
        while (std::getline(lines, line)) {
            if (line.empty()) continue;
            auto v = nlohmann::json::parse(line);
            for (const auto& r : v["results"])
                if (r["check"] == "FORMAT")
                    out.push_back(v["id"].get<std::string>() + ":" +
                                  (r["pass"].get<bool>() ? "pass" : "fail"));
        }
        return out;
    };
    auto yes = read_format_verdicts(yes_dir);
    CHECK(yes.size() == 2);  // a and b reach the answer check; c is dropped
    CHECK(yes == read_format_verdicts(alt_dir));
}

TEST_CASE("loss emits one breakdown per record") {
    RunResult r = run_cli("loss --alpha-mode fixed --alpha-init 0.7",
                          "{\"per_token_losses\": [2.0, 1.0, 0.5], \"n_think\": 2}\n");
    CHECK(r.exit_code == 0);
    auto doc = nlohmann::json::parse(r.out);
    CHECK(doc["think_loss"] == 1.5);
    CHECK(doc["result_loss"] == 0.5);
    CHECK(doc["alpha"] == 0.7);
    CHECK(std::abs(doc["balanced_loss"].get<double>() - 1.2) < 1e-12);

    RunResult bad = run_cli("loss", "{\"nonsense\": 1}\n");
    CHECK(bad.exit_code == 1);
}

TEST_CASE("stats reports counts on stdin input") {
    RunResult r = run_cli("stats --in - --text", kFilterInput);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("samples            3") != std::string::npos);
}

TEST_CASE("loop runs offline with mock ports and writes the checkpoint") {
    std::string in = write_file(
        "loop_in.jsonl",
        R"({"id": "h1", "query": "q1", "tools": [{"name": "f", "parameters": {}}], "answer": "[f()]"})"
        "\n");
    fs::path out_dir = work_dir() / "loop_out";
    RunResult r = run_cli("loop --hard " + in + " --out " + out_dir.string() +
                          " --judge mock:accept --judge mock:accept --judge mock:accept");
    CHECK(r.exit_code == 0);
    auto checkpoint = nlohmann::json::parse(slurp(out_dir / "checkpoint.json"));
    CHECK(checkpoint["t"] == 1);
    CHECK(checkpoint["termination"] == "converged");
    CHECK(checkpoint["hard_ids"].empty());
    CHECK(fs::exists(out_dir / "d_new_0.jsonl"));
    CHECK(fs::exists(out_dir / "report.json"));
    CHECK(fs::exists(out_dir / "run_manifest.json"));

    // Identical argv on a fresh directory reproduces the outputs byte for byte.
    fs::path out_dir2 = work_dir() / "loop_out2";
    run_cli("loop --hard " + in + " --out " + out_dir2.string() +
            " --judge mock:accept --judge mock:accept --judge mock:accept");
    CHECK(slurp(out_dir / "checkpoint.json") == slurp(out_dir2 / "checkpoint.json"));
    CHECK(slurp(out_dir / "d_new_0.jsonl") == slurp(out_dir2 / "d_new_0.jsonl"));
    CHECK(slurp(out_dir / "report.json") == slurp(out_dir2 / "report.json"));
    CHECK(slurp(out_dir / "run_manifest.json") == slurp(out_dir2 / "run_manifest.json"));
}

TEST_CASE("prompt templates shipped as data files match the built-ins") {
    using fcc::net::PromptTemplateId;
    for (PromptTemplateId id :
         {PromptTemplateId::ResponseId, PromptTemplateId::QueryToolId, PromptTemplateId::CotId,
          PromptTemplateId::FuncParamId, PromptTemplateId::FormatId, PromptTemplateId::JudgeScore,
          PromptTemplateId::Generator}) {
        fs::path file = fs::path(FCC_SOURCE_DIR) / "share" / "prompts" /
                        (std::string(fcc::net::prompt_template_name(id)) + ".txt");
        REQUIRE_MESSAGE(fs::exists(file), file.string());
        CHECK(slurp(file) == fcc::net::prompt_template_text(id));
    }
}

TEST_CASE("prompts show prints the template") {
    RunResult r = run_cli("prompts show format_id");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("should not be enclosed in") != std::string::npos);
    CHECK(run_cli("prompts show nope").exit_code == 2);
}

}  // TEST_SUITE
