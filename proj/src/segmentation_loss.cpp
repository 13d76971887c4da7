#include "fcc/segmentation_loss.hpp"

#include <algorithm>
#include <fstream>

namespace fcc::loss {

namespace {

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";

double median_of(std::vector<std::size_t> counts) {
    if (counts.empty()) return 0.0;
    std::sort(counts.begin(), counts.end());
    std::size_t mid = counts.size() / 2;
    if (counts.size() % 2 == 1) return static_cast<double>(counts[mid]);
    return (static_cast<double>(counts[mid - 1]) + static_cast<double>(counts[mid])) / 2.0;
}

TokenLengthStats stats_of(const std::vector<std::size_t>& counts) {
    TokenLengthStats out;
    out.count = counts.size();
    if (counts.empty()) return out;
    double sum = 0.0;
    for (std::size_t c : counts) sum += static_cast<double>(c);
    out.mean = sum / static_cast<double>(counts.size());
    out.median = median_of(counts);
    return out;
}

}  // namespace

std::size_t WhitespaceTokenCounter::count(std::string_view text) const {
    std::size_t tokens = 0;
    bool in_token = false;
    for (char c : text) {
        if (is_ws(c)) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++tokens;
        }
    }
    return tokens;
}

VocabTokenCounter VocabTokenCounter::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open vocab file: " + path);
    std::vector<std::string> vocab;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) vocab.push_back(line);
    }
    return VocabTokenCounter(std::move(vocab));
}

VocabTokenCounter::VocabTokenCounter(std::vector<std::string> vocab) : vocab_(std::move(vocab)) {
    std::sort(vocab_.begin(), vocab_.end(), [](const std::string& a, const std::string& b) {
        return a.size() != b.size() ? a.size() > b.size() : a < b;
    });
    vocab_.erase(std::unique(vocab_.begin(), vocab_.end()), vocab_.end());
    for (const auto& t : vocab_) max_len_ = std::max(max_len_, t.size());
}

std::size_t VocabTokenCounter::count(std::string_view text) const {
    std::size_t tokens = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t advance = 1;
        for (const auto& tok : vocab_) {  // longest first
            if (tok.size() <= text.size() - pos && text.compare(pos, tok.size(), tok) == 0) {
                advance = tok.size();
                break;
            }
        }
        pos += advance;
        ++tokens;
    }
    return tokens;
}

SegmentParts split_think(std::string_view response_text) {
    std::size_t open = response_text.find(kThinkOpen);
    if (open == std::string_view::npos) return {std::string_view{}, response_text};
    for (std::size_t i = 0; i < open; ++i)
        if (!is_ws(response_text[i]))
            throw SegmentationError("think block appears after answer text");
    std::size_t close = response_text.find(kThinkClose, open + kThinkOpen.size());
    if (close == std::string_view::npos) throw SegmentationError("unterminated <think> block");
    std::size_t think_end = close + kThinkClose.size();
    return {response_text.substr(0, think_end), response_text.substr(think_end)};
}

SpanMask segment(std::string_view response_text, const TokenCounter& tokenizer) {
    SegmentParts parts = split_think(response_text);
    SpanMask mask;
    mask.n_think = tokenizer.count(parts.think);
    mask.n_result = tokenizer.count(parts.result);
    if (mask.n_result == 0) throw SegmentationError("empty result span");
    return mask;
}

LossBreakdown decompose(const Eigen::Ref<const PerTokenLoss>& losses, const SpanMask& mask,
                        double alpha) {
    if (mask.n_result == 0) throw std::invalid_argument("decompose: result span is empty");
    if (static_cast<std::size_t>(losses.size()) != mask.n_all())
        throw std::invalid_argument("decompose: loss vector length does not match the span mask");
    for (Eigen::Index i = 0; i < losses.size(); ++i) {
        double v = losses[i];
        if (!std::isfinite(v) || v < 0.0)
            throw std::invalid_argument("decompose: per-token losses must be finite and >= 0");
    }

    LossBreakdown out;
    out.n_think = mask.n_think;
    out.n_result = mask.n_result;
    const auto n_think = static_cast<Eigen::Index>(mask.n_think);
    double think_sum = mask.n_think == 0 ? 0.0 : losses.head(n_think).sum();
    double result_sum = losses.tail(losses.size() - n_think).sum();
    out.think_weight = mask.think_weight();
    out.result_weight = 1.0 - out.think_weight;
    out.think_loss = mask.n_think == 0 ? 0.0 : think_sum / static_cast<double>(mask.n_think);
    out.result_loss = result_sum / static_cast<double>(mask.n_result);
    out.sft_loss = (think_sum + result_sum) / static_cast<double>(mask.n_all());
    out.alpha = alpha;
    out.balanced_loss = alpha * out.think_loss + (1.0 - alpha) * out.result_loss;
    return out;
}

AlphaMode alpha_mode_from_string(std::string_view name) {
    if (name == "fixed") return AlphaMode::Fixed;
    if (name == "sgd") return AlphaMode::Sgd;
    if (name == "balance") return AlphaMode::Balance;
    throw std::invalid_argument("unknown alpha mode: " + std::string(name));
}

const char* alpha_mode_name(AlphaMode mode) {
    switch (mode) {
        case AlphaMode::Fixed: return "fixed";
        case AlphaMode::Sgd: return "sgd";
        case AlphaMode::Balance: return "balance";
    }
    return "?";
}

AlphaState AlphaState::init(AlphaMode mode, double alpha0, double learning_rate) {
    if (!(alpha0 >= 0.0 && alpha0 <= 1.0))
        throw std::invalid_argument("alpha must lie in [0, 1]");
    AlphaState s;
    s.mode = mode;
    s.learning_rate = learning_rate;
    s.alpha = alpha0;
    if (mode == AlphaMode::Sgd) {
        if (alpha0 <= 0.0 || alpha0 >= 1.0)
            throw std::invalid_argument("sgd mode needs alpha strictly inside (0, 1)");
        s.theta = std::log(alpha0 / (1.0 - alpha0));
    }
    return s;
}

double AlphaState::value() const {
    if (mode == AlphaMode::Sgd) return 1.0 / (1.0 + std::exp(-theta));
    return alpha;
}

AlphaState alpha_step(const AlphaState& state, const LossBreakdown& breakdown) {
    AlphaState next = state;
    switch (state.mode) {
        case AlphaMode::Fixed:
            break;
        case AlphaMode::Sgd: {
            double a = state.value();
            double grad = (breakdown.think_loss - breakdown.result_loss) * a * (1.0 - a);
            next.theta = std::clamp(state.theta - state.learning_rate * grad, -state.theta_clamp,
                                    state.theta_clamp);
            next.alpha = next.value();
            break;
        }
        case AlphaMode::Balance: {
            double total = breakdown.think_loss + breakdown.result_loss;
            if (total > 0.0) next.alpha = breakdown.result_loss / total;
            break;
        }
    }
    return next;
}

void TokenStatsAccumulator::add(std::optional<std::string_view> cot_text,
                                std::string_view result_text) {
    if (cot_text) cot_counts_.push_back(counter_.count(*cot_text));
    result_counts_.push_back(counter_.count(result_text));
}

CorpusTokenStats TokenStatsAccumulator::finish() const {
    CorpusTokenStats out;
    out.sample_count = result_counts_.size();
    out.cot = stats_of(cot_counts_);
    out.result = stats_of(result_counts_);
    return out;
}

nlohmann::ordered_json to_json(const LossBreakdown& b) {
    return {
        {"n_think", b.n_think},
        {"n_result", b.n_result},
        {"think_weight", b.think_weight},
        {"result_weight", b.result_weight},
        {"think_loss", b.think_loss},
        {"result_loss", b.result_loss},
        {"sft_loss", b.sft_loss},
        {"alpha", b.alpha},
        {"balanced_loss", b.balanced_loss},
    };
}

nlohmann::ordered_json to_json(const CorpusTokenStats& stats) {
    auto part = [](const TokenLengthStats& s) {
        return nlohmann::ordered_json{{"count", s.count}, {"mean", s.mean}, {"median", s.median}};
    };
    return {{"sample_count", stats.sample_count},
            {"cot", part(stats.cot)},
            {"result", part(stats.result)}};
}

}  // namespace fcc::loss
