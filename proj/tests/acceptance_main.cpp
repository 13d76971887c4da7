// Acceptance suite: one line per criterion, nonzero exit if any fails.
// Everything runs offline against scripted ports; criterion 9 asserts that
// no real network request was ever issued.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "fcc/common.hpp"
#include "fcc/dataset_io.hpp"
#include "fcc/endpoint_clients.hpp"
#include "fcc/fcall_syntax.hpp"
#include "fcc/hdr_loop.hpp"
#include "fcc/quality_gate.hpp"
#include "fcc/segmentation_loss.hpp"
#include "testutil.hpp"

using namespace fcc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void fail(const std::string& why) {
        if (pass) detail = why;
        pass = false;
    }
};

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

const char* kXlamBadAnswer =
    "[ forecast_weather_api(q=\"Chicago\", days=7), forecast_weather_api(q=\"Toronto\", days=7)]";

// ---- criterion 1: decomposition identity -------------------------------------

Outcome criterion_ssb_identity() {
    Outcome out;
    auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> mag(0.0, 30.0);
    for (int round = 0; round < 1000; ++round) {
        loss::SpanMask mask{rng() % 200, 1 + rng() % 200};
        Eigen::VectorXd losses(static_cast<Eigen::Index>(mask.n_all()));
        for (Eigen::Index i = 0; i < losses.size(); ++i) losses[i] = mag(rng);

        loss::LossBreakdown b = loss::decompose(losses, mask, 0.7);
        double tolerance = 1e-12 * std::max(1.0, b.sft_loss);
        double recomposed = b.think_weight * b.think_loss + b.result_weight * b.result_loss;
        if (std::abs(b.sft_loss - recomposed) > tolerance)
            out.fail("identity violated at round " + std::to_string(round));

        loss::LossBreakdown coincide = loss::decompose(losses, mask, mask.think_weight());
        if (std::abs(coincide.balanced_loss - coincide.sft_loss) > tolerance)
            out.fail("alpha=w_t coincidence violated at round " + std::to_string(round));
    }
    double secs = elapsed_seconds(start);
    if (secs >= 1.0) out.fail("runtime " + std::to_string(secs) + " s exceeds 1 s");
    return out;
}

// ---- criterion 2: NLL kernel vs brute force ----------------------------------

Outcome criterion_nll_oracle() {
    Outcome out;
    auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(202);
    std::uniform_real_distribution<double> logit(-12.0, 12.0);
    for (int round = 0; round < 200; ++round) {
        int n = 1 + static_cast<int>(rng() % 16);
        int v = 2 + static_cast<int>(rng() % 7);
        Eigen::MatrixXd logits(n, v);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < v; ++j) logits(i, j) = logit(rng);
        std::vector<int> targets(static_cast<std::size_t>(n));
        for (auto& t : targets) t = static_cast<int>(rng() % v);

        Eigen::VectorXd nll = loss::nll_from_logits(logits, targets);
        for (int i = 0; i < n; ++i) {
            double denom = 0.0;
            for (int j = 0; j < v; ++j) denom += std::exp(logits(i, j));
            double direct = -std::log(std::exp(logits(i, targets[static_cast<std::size_t>(i)])) / denom);
            if (std::abs(nll[i] - direct) > 1e-10)
                out.fail("brute-force mismatch at round " + std::to_string(round));
        }

        Eigen::MatrixXd shifted = logits;
        shifted.array() += 987.25;
        Eigen::VectorXd nll_shifted = loss::nll_from_logits(shifted, targets);
        for (int i = 0; i < n; ++i)
            if (std::abs(nll[i] - nll_shifted[i]) > 1e-10)
                out.fail("shift invariance violated at round " + std::to_string(round));
    }
    double secs = elapsed_seconds(start);
    if (secs >= 1.0) out.fail("runtime " + std::to_string(secs) + " s exceeds 1 s");
    return out;
}

// ---- criterion 3: alpha dynamics ----------------------------------------------

Outcome criterion_alpha_dynamics() {
    Outcome out;
    loss::LossBreakdown think_heavy;
    think_heavy.think_loss = 2.0;
    think_heavy.result_loss = 0.5;
    loss::AlphaState state = loss::AlphaState::init(loss::AlphaMode::Sgd, 0.7);
    if (std::abs(state.value() - 0.7) > 1e-12) out.fail("alpha does not start at 0.7");
    double prev = state.value();
    for (int i = 0; i < 10000; ++i) {
        state = loss::alpha_step(state, think_heavy);
        double a = state.value();
        if (!(a < prev)) out.fail("alpha not strictly decreasing at step " + std::to_string(i));
        if (!(a > 0.0 && a < 1.0)) out.fail("alpha left (0,1) at step " + std::to_string(i));
        prev = a;
    }

    loss::LossBreakdown balanced_case;
    balanced_case.think_loss = 1.5;
    balanced_case.result_loss = 0.5;
    loss::AlphaState bal = loss::AlphaState::init(loss::AlphaMode::Balance, 0.7);
    bal = loss::alpha_step(bal, balanced_case);
    if (bal.value() != 0.25) out.fail("balance mode did not yield exactly 0.25");
    return out;
}

// ---- criterion 4: parser round-trip --------------------------------------------

Outcome criterion_parser_round_trip() {
    Outcome out;
    auto start = std::chrono::steady_clock::now();
    testutil::AstGen gen(404);
    for (int round = 0; round < 10000; ++round) {
        fcall::CallList x = gen.call_list();
        std::string text = fcall::serialize(x);
        auto parsed = fcall::parse_strict(text);
        if (!parsed.ok() || !(*parsed.calls == x)) {
            out.fail("round-trip failed on: " + text);
            break;
        }
    }

    auto strict = fcall::parse_strict(kXlamBadAnswer);
    if (strict.ok() || !strict.has_code(fcall::DiagCode::LeadingSpace))
        out.fail("strict parse did not reject the defective answer with LEADING_SPACE");

    auto repaired = fcall::parse_lenient(kXlamBadAnswer);
    if (!repaired.ok() || repaired.calls->calls.size() != 2) {
        out.fail("lenient repair did not yield a two-call AST");
    } else {
        const auto& calls = repaired.calls->calls;
        bool content_ok =
            calls[0].name == "forecast_weather_api" &&
            calls[0].args[0].second == fcall::ArgValue("Chicago") &&
            calls[0].args[1].second == fcall::ArgValue(std::int64_t{7}) &&
            calls[1].args[0].second == fcall::ArgValue("Toronto") &&
            calls[1].args[1].second == fcall::ArgValue(std::int64_t{7});
        if (!content_ok) out.fail("repaired AST content mismatch");
    }

    double secs = elapsed_seconds(start);
    if (secs >= 5.0) out.fail("runtime " + std::to_string(secs) + " s exceeds 5 s");
    return out;
}

// ---- criterion 5: filtration partition -----------------------------------------

data::Sample gate_sample(int i) {
    data::Sample s;
    s.id = "s" + std::to_string(i);
    s.query = "query " + std::to_string(i);
    s.tools = nlohmann::ordered_json::parse(
        R"([{"name": "m", "parameters": {"day": {"type": "int", "default": 1}}}])");
    switch (i % 10) {
        case 6:
        case 7:  // hard: format defect, repairable
            s.answer = "[ m(day=28)]";
            break;
        case 8:  // hard: schema violation
            s.answer = "[m(day=\"28\")]";
            break;
        case 9:  // dropped: not a call
            s.answer = "plain text " + std::to_string(i);
            break;
        default:  // qualified
            s.answer = "[m(day=28)]";
            break;
    }
    return s;
}

Outcome criterion_partition() {
    Outcome out;
    std::vector<data::Sample> samples;
    std::set<std::string> expect_qualified, expect_hard, expect_dropped;
    for (int i = 0; i < 200; ++i) {
        samples.push_back(gate_sample(i));
        const std::string id = samples.back().id;
        if (i % 10 == 9)
            expect_dropped.insert(id);
        else if (i % 10 >= 6)
            expect_hard.insert(id);
        else
            expect_qualified.insert(id);
    }

    net::MockChatClient judge("<think>scripted</think><judge>True</judge>");
    gate::PartitionResult result = gate::partition(samples, &judge);

    auto as_set = [](const std::vector<std::string>& v) {
        return std::set<std::string>(v.begin(), v.end());
    };
    if (as_set(result.partition.qualified) != expect_qualified)
        out.fail("qualified set does not match the scripted expectation");
    if (as_set(result.partition.hard) != expect_hard)
        out.fail("hard set does not match the scripted expectation");
    if (as_set(result.partition.dropped) != expect_dropped)
        out.fail("dropped set does not match the scripted expectation");

    std::set<std::string> all;
    for (const auto& id : result.partition.qualified) all.insert(id);
    for (const auto& id : result.partition.hard) all.insert(id);
    for (const auto& id : result.partition.dropped) all.insert(id);
    std::size_t total = result.partition.qualified.size() + result.partition.hard.size() +
                        result.partition.dropped.size();
    if (all.size() != samples.size() || total != samples.size())
        out.fail("partition is not disjoint and exhaustive");

    // A judge replying in a different shape and order must leave every
    // deterministic verdict identical...
    net::MockChatClient reordered;
    reordered.set_keyed_reply("Chain-of-Thought:", "<judge>True</judge>");
    reordered.set_keyed_reply("User Query:", "<think>different reasoning path</think><judge>True</judge>");
    reordered.set_default_reply("<judge>True</judge>");
    gate::PartitionResult rerun = gate::partition(samples, &reordered);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& a = result.verdicts[i];
        const auto& b = rerun.verdicts[i];
        for (const auto& ra : a.results) {
            if (ra.source != gate::CheckSource::Deterministic) continue;
            bool matched = false;
            for (const auto& rb : b.results)
                if (rb.id == ra.id && rb.source == gate::CheckSource::Deterministic)
                    matched = rb.pass == ra.pass && rb.evidence == ra.evidence;
            if (!matched) out.fail("deterministic verdict changed under a reordered judge");
        }
    }

    // ...and an all-rejecting judge may short-circuit checks away but can
    // never flip one that still runs.
    net::MockChatClient contrary("<think>scripted</think><judge>False</judge>");
    gate::PartitionResult contrary_run = gate::partition(samples, &contrary);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        for (const auto& ra : result.verdicts[i].results) {
            if (ra.source != gate::CheckSource::Deterministic) continue;
            for (const auto& rb : contrary_run.verdicts[i].results)
                if (rb.id == ra.id && rb.source == gate::CheckSource::Deterministic &&
                    rb.pass != ra.pass)
                    out.fail("deterministic verdict flipped under a contrary judge");
        }
    }
    return out;
}

// ---- criterion 6: ensemble scoring ----------------------------------------------

Outcome criterion_scoring() {
    Outcome out;
    loop::LoopConfig cfg;
    cfg.parallelism = 1;
    data::Sample sample;
    sample.id = "s";
    sample.query = "q";
    sample.answer = "[f()]";
    for (int k : {1, 3, 5}) {
        for (unsigned pattern = 0; pattern < (1u << k); ++pattern) {
            std::vector<loop::ScriptedScoreJudge> judges;
            judges.reserve(static_cast<std::size_t>(k));
            int expected_pass = 0;
            for (int m = 0; m < k; ++m) {
                bool bit = (pattern >> m) & 1u;
                judges.emplace_back(bit ? 0.9 : 0.1, "j" + std::to_string(m));
                if (bit) ++expected_pass;
            }
            std::vector<loop::ScoreJudgePort*> ports;
            for (auto& j : judges) ports.push_back(&j);
            loop::CandidateResponse cand;
            cand.sample_id = "s";
            cand.text = "[f()]";
            loop::JudgeVerdictSet v = loop::score_candidate(sample, cand, ports, cfg);

            if (v.pass_count != expected_pass)
                out.fail("pass count mismatch for k=" + std::to_string(k));
            if (v.aggregate() != static_cast<double>(expected_pass) / static_cast<double>(k))
                out.fail("aggregate is not exactly pass/k for k=" + std::to_string(k));
            bool unanimous_expected = expected_pass == k;
            bool majority_expected = 2 * expected_pass > k;
            if (v.accepted(loop::AcceptanceRule::Unanimous) != unanimous_expected)
                out.fail("unanimous rule mismatch");
            if (v.accepted(loop::AcceptanceRule::Majority) != majority_expected)
                out.fail("majority rule mismatch");
        }
    }
    return out;
}

// ---- criterion 7: loop convergence ----------------------------------------------

struct SaltJudge : loop::ScoreJudgePort {
    std::uint64_t salt;
    explicit SaltJudge(std::uint64_t s) : salt(s) {}
    double score(const data::Sample& sample, const loop::CandidateResponse& cand) override {
        std::uint64_t h = fnv1a64(sample.id + "#" + std::to_string(cand.attempt)) * (salt | 1);
        return static_cast<double>(h % 1000) / 999.0;
    }
    std::string name() const override { return "salt-" + std::to_string(salt); }
};

std::vector<data::Sample> loop_hard_set(int n) {
    std::vector<data::Sample> out;
    for (int i = 0; i < n; ++i) {
        data::Sample s;
        s.id = "h" + std::to_string(i);
        s.query = "q" + std::to_string(i);
        s.tools = nlohmann::ordered_json::parse(R"([{"name": "f", "parameters": {}}])");
        s.answer = "[f()]";
        out.push_back(std::move(s));
    }
    return out;
}

std::string dir_bytes(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::string bytes;
    for (const auto& f : files) {
        std::ifstream in(f);
        std::ostringstream buf;
        buf << in.rdbuf();
        bytes += f.filename().string() + "\n" + buf.str();
    }
    return bytes;
}

Outcome criterion_loop() {
    Outcome out;
    auto start = std::chrono::steady_clock::now();
    fs::path base = fs::temp_directory_path() / "fcc_acceptance_loop";
    fs::remove_all(base);

    {  // (a) all-accepting: one iteration, converged, empty hard set
        loop::LoopConfig cfg;
        cfg.parallelism = 2;
        loop::ScriptedGenerator gen;
        gen.set_default("[f()]");
        loop::ScriptedScoreJudge j1(1.0), j2(1.0), j3(1.0);
        loop::RecordingFineTune tuner;
        loop::LoopPorts ports{&gen, {&j1, &j2, &j3}, &tuner};
        loop::LoopRunner runner((base / "accept").string(), ports, cfg);
        loop::LoopState final_state = runner.run(loop_hard_set(5));
        if (final_state.iteration != 1 || final_state.termination != loop::Termination::Converged ||
            !final_state.hard_ids.empty())
            out.fail("all-accepting run did not converge in one iteration");
    }

    {  // (b) all-rejecting: exactly t_max = 10 iterations, hard set unchanged
        loop::LoopConfig cfg;
        cfg.parallelism = 2;
        loop::ScriptedGenerator gen;
        gen.set_default("[f()]");
        loop::ScriptedScoreJudge nope(0.0);
        loop::RecordingFineTune tuner;
        loop::LoopPorts ports{&gen, {&nope}, &tuner};
        loop::LoopRunner runner((base / "reject").string(), ports, cfg);
        loop::LoopState final_state = runner.run(loop_hard_set(5));
        if (final_state.iteration != 10 ||
            final_state.termination != loop::Termination::MaxIterations ||
            final_state.hard_ids.size() != 5)
            out.fail("all-rejecting run did not stop at exactly 10 iterations");
    }

    // (c) 100 random scripted runs: monotone hard set, disjoint accepted ids,
    // rule compliance, byte-identical seeded replays.
    for (int run = 0; run < 100 && out.pass; ++run) {
        loop::LoopConfig cfg;
        cfg.parallelism = 2;
        cfg.t_max = 4;
        cfg.seed = 1000 + static_cast<std::uint64_t>(run);
        cfg.acceptance =
            run % 2 == 0 ? loop::AcceptanceRule::Unanimous : loop::AcceptanceRule::Majority;
        int n = 1 + run % 7;

        auto run_once = [&](const std::string& tag) {
            loop::ScriptedGenerator gen;
            gen.set_default("[f()]");
            SaltJudge j1(cfg.seed), j2(cfg.seed * 7919), j3(cfg.seed * 104729);
            loop::RecordingFineTune tuner;
            loop::LoopPorts ports{&gen, {&j1, &j2, &j3}, &tuner};
            fs::path dir = base / (tag + std::to_string(run));
            loop::LoopRunner runner(dir.string(), ports, cfg);
            runner.run(loop_hard_set(n));

            std::size_t prev = static_cast<std::size_t>(n);
            for (const auto& report : runner.reports()) {
                if (report.hard_after > report.hard_before)
                    out.fail("hard set grew in run " + std::to_string(run));
                if (report.hard_before != prev) out.fail("hard trace mismatch");
                prev = report.hard_after;
            }
            std::set<std::string> accepted_ids;
            for (const auto& entry : fs::directory_iterator(dir)) {
                if (entry.path().filename().string().rfind("d_new_", 0) != 0) continue;
                std::ifstream in(entry.path());
                std::string line;
                while (std::getline(in, line)) {
                    if (trim(line).empty()) continue;
                    auto row = nlohmann::json::parse(line);
                    double aggregate = row["scores"]["aggregate"].get<double>();
                    bool rule_ok = cfg.acceptance == loop::AcceptanceRule::Unanimous
                                       ? aggregate == 1.0
                                       : aggregate > 0.5;
                    if (!rule_ok) out.fail("accepted record violates the acceptance rule");
                    if (!accepted_ids.insert(row["id"].get<std::string>()).second)
                        out.fail("accepted ids are not disjoint across iterations");
                }
            }
            return dir_bytes(dir);
        };

        if (run_once("a") != run_once("b"))
            out.fail("seeded replay differs in run " + std::to_string(run));
    }

    fs::remove_all(base);
    double secs = elapsed_seconds(start);
    if (secs >= 30.0) out.fail("runtime " + std::to_string(secs) + " s exceeds 30 s");
    return out;
}

// ---- criterion 8: token statistics ----------------------------------------------

Outcome criterion_token_stats() {
    Outcome out;
    loss::WhitespaceTokenCounter ws;
    loss::TokenStatsAccumulator acc(ws);
    auto words = [](std::size_t n) {
        std::string s;
        for (std::size_t i = 0; i < n; ++i) s += "w ";
        return s;
    };
    // Ten samples: CoT lengths 1..10, result lengths 1,1,2,2,3,3,4,4,5,5.
    const std::size_t result_lengths[10] = {1, 1, 2, 2, 3, 3, 4, 4, 5, 5};
    for (std::size_t i = 0; i < 10; ++i) acc.add(words(i + 1), words(result_lengths[i]));
    loss::CorpusTokenStats stats = acc.finish();
    if (stats.sample_count != 10) out.fail("sample count mismatch");
    if (stats.cot.mean != 5.5 || stats.cot.median != 5.5)
        out.fail("CoT stats do not match the hand count (mean/median 5.5)");
    if (stats.result.mean != 3.0 || stats.result.median != 3.0)
        out.fail("result stats do not match the hand count (mean/median 3.0)");

    out.detail =
        "reference corpus values (CoT 350.74/248.00, result 31.07/27.00) require the real corpus "
        "and its tokenizer; reported, not asserted";
    return out;
}

// ---- criterion 9: offline invariant ----------------------------------------------

Outcome criterion_offline() {
    Outcome out;
    std::uint64_t requests = net::real_http_requests();
    if (requests != 0)
        out.fail("real network transport issued " + std::to_string(requests) + " requests");
    else
        out.detail = "all ports scripted; zero real HTTP requests issued";
    return out;
}

}  // namespace

int main() {
    struct Entry {
        int number;
        const char* label;
        Outcome (*fn)();
    };
    const Entry entries[] = {
        {1, "SSB decomposition identity (1000 random instances, 1e-12, < 1 s)", criterion_ssb_identity},
        {2, "NLL kernel vs brute-force softmax (200 matrices, 1e-10, < 1 s)", criterion_nll_oracle},
        {3, "alpha dynamics from 0.7 (sgd monotone in (0,1); balance = 0.25)", criterion_alpha_dynamics},
        {4, "parser round-trip (10000 ASTs) and defective-answer repair (< 5 s)", criterion_parser_round_trip},
        {5, "filtration partition on 200 scripted samples", criterion_partition},
        {6, "ensemble scoring truth table (k in {1,3,5}, tau = 0.5)", criterion_scoring},
        {7, "loop convergence: accept-all, reject-all, 100 random replays (< 30 s)", criterion_loop},
        {8, "token statistics on a hand-counted 10-sample fixture", criterion_token_stats},
        {9, "offline invariant: no real network traffic", criterion_offline},
    };

    int failures = 0;
    for (const auto& entry : entries) {
        auto start = std::chrono::steady_clock::now();
        Outcome outcome = entry.fn();
        double secs = elapsed_seconds(start);
        std::printf("[%s] criterion %d: %s (%.2f s)%s%s\n", outcome.pass ? "PASS" : "FAIL",
                    entry.number, entry.label, secs, outcome.detail.empty() ? "" : " -- ",
                    outcome.detail.c_str());
        if (!outcome.pass) ++failures;
    }
    std::printf("acceptance: %d/9 criteria passed\n", 9 - failures);
    return failures == 0 ? 0 : 1;
}
