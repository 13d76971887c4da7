#pragma once

// Chat-completion clients behind a port interface, plus the prompt
// templates. Nothing outside this module opens a network connection; tests
// and offline runs inject scripted transports or use MockChatClient.

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace fcc::net {

struct Message {
    std::string role;
    std::string content;

    friend bool operator==(const Message&, const Message&) = default;
};

struct EndpointConfig {
    std::string base_url;  // e.g. http://localhost:8000
    std::string path = "/v1/chat/completions";
    std::string model;
    std::string auth_env;  // env var holding the bearer token; empty = no auth
    int timeout_ms = 30000;
    int max_retries = 3;
    int backoff_base_ms = 250;
    double temperature = 0.7;
    int max_tokens = 1024;
    // Where the reply text lives in the response JSON.
    std::string response_content_pointer = "/choices/0/message/content";

    static EndpointConfig from_json(const nlohmann::json& doc);
    nlohmann::ordered_json to_json() const;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TransportError : std::runtime_error {
    TransportError(const std::string& what, int attempts_made, std::vector<std::string> log)
        : std::runtime_error(what), attempts(attempts_made), attempt_log(std::move(log)) {}

    int attempts;
    std::vector<std::string> attempt_log;
};

class ChatClient {
public:
    virtual ~ChatClient() = default;
    // One chat completion. Throws TransportError / ConfigError.
    virtual std::string complete(const std::vector<Message>& messages) = 0;
    virtual std::string name() const = 0;
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

using HttpSend = std::function<HttpResponse(const EndpointConfig& cfg, const std::string& body,
                                            const std::vector<std::pair<std::string, std::string>>& headers)>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;

// Count of requests issued by the real network transport since process
// start. The offline test suite asserts this stays zero.
std::uint64_t real_http_requests();

class HttpChatClient : public ChatClient {
public:
    explicit HttpChatClient(EndpointConfig cfg);
    HttpChatClient(EndpointConfig cfg, HttpSend transport, Sleeper sleeper = {},
                   std::uint64_t jitter_seed = 0);

    // Retries 5xx and transport failures with exponential backoff plus
    // jitter; 4xx fails immediately; auth is resolved before any send.
    std::string complete(const std::vector<Message>& messages) override;
    std::string name() const override { return cfg_.model.empty() ? cfg_.base_url : cfg_.model; }

    const EndpointConfig& config() const { return cfg_; }

private:
    EndpointConfig cfg_;
    HttpSend transport_;
    Sleeper sleeper_;
    std::mutex rng_mu_;
    std::uint64_t rng_state_;

    int jitter_ms();
};

// Scripted replies for tests and offline runs: a FIFO queue first, then
// keyed lookup (key = substring of any message content), then the default.
class MockChatClient : public ChatClient {
public:
    MockChatClient() = default;
    explicit MockChatClient(std::string default_reply) : default_(std::move(default_reply)) {}

    void push_reply(std::string text);
    void push_transport_failure(std::string what = "injected transport failure");
    void set_keyed_reply(std::string key, std::string reply);
    void set_default_reply(std::string text);
    void set_name(std::string name) { name_ = std::move(name); }

    std::string complete(const std::vector<Message>& messages) override;
    std::string name() const override { return name_; }

    std::size_t calls() const;
    std::vector<std::string> prompts() const;  // joined message contents per call

    // {"default": "...", "sequence": ["...", {"fail": "..."}], "keyed": {"k": "..."}}
    static std::shared_ptr<MockChatClient> from_script_json(const nlohmann::json& script);

private:
    struct Item {
        bool fail = false;
        std::string text;
    };

    mutable std::mutex mu_;
    std::deque<Item> queue_;
    std::vector<std::pair<std::string, std::string>> keyed_;
    std::optional<std::string> default_;
    std::vector<std::string> prompts_;
    std::string name_ = "mock";
};

// ---- prompt templates ------------------------------------------------------

enum class PromptTemplateId {
    ResponseId,    // is the reference answer a call or a statement?
    QueryToolId,   // can query+tools support the call?
    CotId,         // does the CoT lead to the reference call?
    FuncParamId,   // are names/parameter values correct? (may emit <NewFC>)
    FormatId,      // does the call text satisfy the format? (may emit <NewFC>)
    JudgeScore,    // numeric [0,1] quality score for a candidate response
    Generator,     // system prompt for candidate generation
};

const char* prompt_template_name(PromptTemplateId id);
std::optional<PromptTemplateId> prompt_template_from_name(std::string_view name);
const std::string& prompt_template_text(PromptTemplateId id);
// Placeholders the template declares, e.g. {"<query>", "<tools>"}.
std::vector<std::string> prompt_template_placeholders(PromptTemplateId id);

struct PromptFields {
    std::optional<std::string> ref_answer;  // <refANS>
    std::optional<std::string> query;       // <query>
    std::optional<std::string> tools;       // <tools>
    std::optional<std::string> cot;         // <CoT process>
    std::optional<std::string> ref_call;    // <refFC>
    std::optional<std::string> candidate;   // <candidate>
    std::vector<Message> history;           // generator only: prior turns
};

struct PromptError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Substitutes the declared placeholders. Judge templates render to a single
// user message; the generator renders to a system message, the history
// turns, and the query as the final user message. Throws PromptError on a
// missing field. When prompt_dir is non-empty, <name>.txt files there
// override the built-in texts.
std::vector<Message> render_prompt(PromptTemplateId id, const PromptFields& fields,
                                   const std::string& prompt_dir = "");

}  // namespace fcc::net
