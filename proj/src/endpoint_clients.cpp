#include "fcc/endpoint_clients.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>

#include "httplib.h"

namespace fcc::net {

namespace {

std::atomic<std::uint64_t> g_real_requests{0};

HttpResponse real_send(const EndpointConfig& cfg, const std::string& body,
                       const std::vector<std::pair<std::string, std::string>>& headers) {
    g_real_requests.fetch_add(1, std::memory_order_relaxed);
    httplib::Client client(cfg.base_url);
    client.set_connection_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);
    client.set_read_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);
    httplib::Headers h;
    for (const auto& [key, value] : headers) h.emplace(key, value);
    auto res = client.Post(cfg.path, h, body, "application/json");
    if (!res) throw std::runtime_error("connection failed: " + httplib::to_string(res.error()));
    return {res->status, res->body};
}

void default_sleep(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

}  // namespace

std::uint64_t real_http_requests() { return g_real_requests.load(std::memory_order_relaxed); }

EndpointConfig EndpointConfig::from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ConfigError("endpoint config must be a JSON object");
    EndpointConfig cfg;
    auto get_str = [&](const char* key, std::string& out) {
        if (doc.contains(key)) out = doc[key].get<std::string>();
    };
    get_str("base_url", cfg.base_url);
    get_str("path", cfg.path);
    get_str("model", cfg.model);
    get_str("auth_env", cfg.auth_env);
    get_str("response_content_pointer", cfg.response_content_pointer);
    if (doc.contains("timeout_ms")) cfg.timeout_ms = doc["timeout_ms"].get<int>();
    if (doc.contains("max_retries")) cfg.max_retries = doc["max_retries"].get<int>();
    if (doc.contains("backoff_base_ms")) cfg.backoff_base_ms = doc["backoff_base_ms"].get<int>();
    if (doc.contains("temperature")) cfg.temperature = doc["temperature"].get<double>();
    if (doc.contains("max_tokens")) cfg.max_tokens = doc["max_tokens"].get<int>();
    if (cfg.base_url.empty()) throw ConfigError("endpoint config needs base_url");
    if (cfg.timeout_ms <= 0) throw ConfigError("timeout_ms must be positive");
    if (cfg.max_retries < 0) throw ConfigError("max_retries must be >= 0");
    if (cfg.temperature < 0) throw ConfigError("temperature must be >= 0");
    return cfg;
}

nlohmann::ordered_json EndpointConfig::to_json() const {
    return {{"base_url", base_url},
            {"path", path},
            {"model", model},
            {"auth_env", auth_env},
            {"timeout_ms", timeout_ms},
            {"max_retries", max_retries},
            {"backoff_base_ms", backoff_base_ms},
            {"temperature", temperature},
            {"max_tokens", max_tokens},
            {"response_content_pointer", response_content_pointer}};
}

HttpChatClient::HttpChatClient(EndpointConfig cfg)
    : HttpChatClient(std::move(cfg), real_send, default_sleep) {}

HttpChatClient::HttpChatClient(EndpointConfig cfg, HttpSend transport, Sleeper sleeper,
                               std::uint64_t jitter_seed)
    : cfg_(std::move(cfg)),
      transport_(std::move(transport)),
      sleeper_(sleeper ? std::move(sleeper) : default_sleep),
      rng_state_(jitter_seed ^ 0x9e3779b97f4a7c15ull) {}

int HttpChatClient::jitter_ms() {
    std::lock_guard<std::mutex> lock(rng_mu_);
    // xorshift64*; jitter stays below one backoff base so delays never shrink.
    rng_state_ ^= rng_state_ >> 12;
    rng_state_ ^= rng_state_ << 25;
    rng_state_ ^= rng_state_ >> 27;
    std::uint64_t r = rng_state_ * 0x2545f4914f6cdd1dull;
    int base = cfg_.backoff_base_ms > 0 ? cfg_.backoff_base_ms : 1;
    return static_cast<int>(r % static_cast<std::uint64_t>(base));
}

std::string HttpChatClient::complete(const std::vector<Message>& messages) {
    std::vector<std::pair<std::string, std::string>> headers;
    if (!cfg_.auth_env.empty()) {
        const char* token = std::getenv(cfg_.auth_env.c_str());
        if (!token || !*token)
            throw ConfigError("auth token env var '" + cfg_.auth_env + "' is not set");
        headers.emplace_back("Authorization", std::string("Bearer ") + token);
    }

    nlohmann::ordered_json body_json;
    body_json["model"] = cfg_.model;
    auto msgs = nlohmann::ordered_json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    body_json["messages"] = std::move(msgs);
    body_json["temperature"] = cfg_.temperature;
    body_json["max_tokens"] = cfg_.max_tokens;
    const std::string body = body_json.dump();

    std::vector<std::string> log;
    int attempts = 0;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        ++attempts;
        bool retriable = false;
        try {
            HttpResponse res = transport_(cfg_, body, headers);
            if (res.status >= 200 && res.status < 300) {
                auto doc = nlohmann::json::parse(res.body, nullptr, false);
                if (!doc.is_discarded()) {
                    auto ptr = nlohmann::json::json_pointer(cfg_.response_content_pointer);
                    if (doc.contains(ptr) && doc[ptr].is_string()) return doc[ptr].get<std::string>();
                }
                log.push_back("attempt " + std::to_string(attempts) + ": malformed response body");
                throw TransportError("endpoint returned an unusable response body", attempts, log);
            }
            if (res.status >= 400 && res.status < 500) {
                log.push_back("attempt " + std::to_string(attempts) + ": HTTP " +
                              std::to_string(res.status));
                throw TransportError("HTTP " + std::to_string(res.status) + " (not retried)",
                                     attempts, log);
            }
            log.push_back("attempt " + std::to_string(attempts) + ": HTTP " +
                          std::to_string(res.status));
            retriable = true;
        } catch (const TransportError&) {
            throw;
        } catch (const std::exception& e) {
            log.push_back("attempt " + std::to_string(attempts) + ": " + e.what());
            retriable = true;
        }
        if (retriable && attempt < cfg_.max_retries) {
            auto delay = std::chrono::milliseconds(
                static_cast<long long>(cfg_.backoff_base_ms) * (1ll << attempt) + jitter_ms());
            sleeper_(delay);
        }
    }
    throw TransportError("retries exhausted after " + std::to_string(attempts) + " attempts",
                         attempts, log);
}

void MockChatClient::push_reply(std::string text) {
    std::lock_guard<std::mutex> lock(mu_);
    queue_.push_back({false, std::move(text)});
}

void MockChatClient::push_transport_failure(std::string what) {
    std::lock_guard<std::mutex> lock(mu_);
    queue_.push_back({true, std::move(what)});
}

void MockChatClient::set_keyed_reply(std::string key, std::string reply) {
    std::lock_guard<std::mutex> lock(mu_);
    keyed_.emplace_back(std::move(key), std::move(reply));
}

void MockChatClient::set_default_reply(std::string text) {
    std::lock_guard<std::mutex> lock(mu_);
    default_ = std::move(text);
}

std::string MockChatClient::complete(const std::vector<Message>& messages) {
    std::string joined;
    for (const auto& m : messages) {
        joined += m.content;
        joined += '\n';
    }
    std::lock_guard<std::mutex> lock(mu_);
    prompts_.push_back(joined);
    if (!queue_.empty()) {
        Item item = std::move(queue_.front());
        queue_.pop_front();
        if (item.fail) throw TransportError(item.text, 1, {item.text});
        return item.text;
    }
    for (const auto& [key, reply] : keyed_)
        if (joined.find(key) != std::string::npos) return reply;
    if (default_) return *default_;
    throw TransportError("mock has no reply for this prompt", 1, {});
}

std::size_t MockChatClient::calls() const {
    std::lock_guard<std::mutex> lock(mu_);
    return prompts_.size();
}

std::vector<std::string> MockChatClient::prompts() const {
    std::lock_guard<std::mutex> lock(mu_);
    return prompts_;
}

std::shared_ptr<MockChatClient> MockChatClient::from_script_json(const nlohmann::json& script) {
    auto mock = std::make_shared<MockChatClient>();
    if (!script.is_object()) throw ConfigError("mock script must be a JSON object");
    if (script.contains("default")) mock->set_default_reply(script["default"].get<std::string>());
    if (script.contains("sequence")) {
        for (const auto& entry : script["sequence"]) {
            if (entry.is_string())
                mock->push_reply(entry.get<std::string>());
            else if (entry.is_object() && entry.contains("fail"))
                mock->push_transport_failure(entry["fail"].get<std::string>());
            else
                throw ConfigError("mock sequence entries are strings or {\"fail\": ...}");
        }
    }
    if (script.contains("keyed"))
        for (auto it = script["keyed"].begin(); it != script["keyed"].end(); ++it)
            mock->set_keyed_reply(it.key(), it.value().get<std::string>());
    if (script.contains("name")) mock->set_name(script["name"].get<std::string>());
    return mock;
}

}  // namespace fcc::net
