#pragma once

// Token-span segmentation of a response into reasoning and function-call
// parts, and the loss arithmetic over those spans:
//
//   L_sft      = mean per-token loss over all tokens
//              = w_think * L_think + w_result * L_result,  w_think = N_t / N_all
//   L_balanced = alpha * L_think + (1 - alpha) * L_result
//
// with alpha in [0,1] either fixed, a logistic-parameterized scalar updated
// by gradient descent on L_balanced, or set to equalize the two
// contributions. nll_from_logits produces real per-token losses from a
// logits matrix so the arithmetic can be exercised without any training
// framework.

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace fcc::loss {

struct SegmentationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Pluggable token counting: the reference corpus numbers depend on a model
// tokenizer we do not ship, so counting is an interface.
struct TokenCounter {
    virtual ~TokenCounter() = default;
    virtual std::size_t count(std::string_view text) const = 0;
};

// Counts maximal non-whitespace runs.
class WhitespaceTokenCounter : public TokenCounter {
public:
    std::size_t count(std::string_view text) const override;
};

// Greedy longest-match against a vocabulary file (one token per line).
// Bytes not covered by the vocabulary count as one token each; whitespace
// participates in matching like any other byte.
class VocabTokenCounter : public TokenCounter {
public:
    static VocabTokenCounter load(const std::string& path);
    explicit VocabTokenCounter(std::vector<std::string> vocab);
    std::size_t count(std::string_view text) const override;

private:
    std::vector<std::string> vocab_;  // sorted by length, longest first
    std::size_t max_len_ = 0;
};

struct SpanMask {
    std::size_t n_think = 0;   // tokens of the <think> block, delimiters included
    std::size_t n_result = 0;  // tokens of everything after it; always >= 1

    std::size_t n_all() const { return n_think + n_result; }
    double think_weight() const {
        return n_all() == 0 ? 0.0 : static_cast<double>(n_think) / static_cast<double>(n_all());
    }
};

struct SegmentParts {
    std::string_view think;   // empty when the response has no think block
    std::string_view result;
};

// Splits at the end of the (optional) leading <think>...</think> block.
// Errors: unterminated block, a block after answer text, empty result.
SegmentParts split_think(std::string_view response_text);
SpanMask segment(std::string_view response_text, const TokenCounter& tokenizer);

using PerTokenLoss = Eigen::VectorXd;

struct LossBreakdown {
    std::size_t n_think = 0;
    std::size_t n_result = 0;
    double think_weight = 0.0;   // N_t / N_all
    double result_weight = 0.0;  // 1 - think_weight, exactly
    double think_loss = 0.0;     // mean over the think span (0 when N_t = 0)
    double result_loss = 0.0;    // mean over the result span
    double sft_loss = 0.0;       // mean over all tokens
    double alpha = 0.0;
    double balanced_loss = 0.0;  // alpha * think_loss + (1 - alpha) * result_loss
};

nlohmann::ordered_json to_json(const LossBreakdown& breakdown);

// Mean losses over the two spans. Throws std::invalid_argument on length
// mismatch, non-finite or negative loss values, or an empty result span.
LossBreakdown decompose(const Eigen::Ref<const PerTokenLoss>& losses, const SpanMask& mask,
                        double alpha);

enum class AlphaMode { Fixed, Sgd, Balance };

AlphaMode alpha_mode_from_string(std::string_view name);
const char* alpha_mode_name(AlphaMode mode);

struct AlphaState {
    AlphaMode mode = AlphaMode::Sgd;
    double theta = 0.0;        // raw parameter; alpha = logistic(theta) in sgd mode
    double alpha = 0.7;        // direct value in fixed/balance modes
    double learning_rate = 1e-3;
    double theta_clamp = 30.0;  // keeps logistic(theta) strictly inside (0,1)

    static AlphaState init(AlphaMode mode, double alpha0 = 0.7, double learning_rate = 1e-3);
    double value() const;
};

// One alpha update from a breakdown. sgd follows the gradient of the
// balanced loss, d/d_theta = (L_think - L_result) * alpha * (1 - alpha);
// balance sets alpha = L_result / (L_think + L_result) and leaves alpha
// unchanged when both losses are zero; fixed is the identity.
AlphaState alpha_step(const AlphaState& state, const LossBreakdown& breakdown);

inline LossBreakdown decompose(const Eigen::Ref<const PerTokenLoss>& losses, const SpanMask& mask,
                               const AlphaState& state) {
    return decompose(losses, mask, state.value());
}

// Per-token negative log-likelihood from a row-per-token logits matrix,
// computed with a stable log-sum-exp. Shift-invariant per row.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> nll_from_logits(
    const Eigen::MatrixBase<Derived>& logits, const std::vector<int>& targets) {
    using Scalar = typename Derived::Scalar;
    if (static_cast<std::size_t>(logits.rows()) != targets.size())
        throw std::invalid_argument("nll_from_logits: one target per logits row required");
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(logits.rows());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        int target = targets[static_cast<std::size_t>(i)];
        if (target < 0 || target >= logits.cols())
            throw std::invalid_argument("nll_from_logits: target id outside vocabulary");
        const auto row = logits.row(i);
        Scalar peak = row.maxCoeff();
        Scalar lse = peak + std::log((row.array() - peak).exp().sum());
        out[i] = lse - row(target);
    }
    return out;
}

struct TokenLengthStats {
    std::size_t count = 0;
    double mean = 0.0;
    double median = 0.0;
};

struct CorpusTokenStats {
    std::size_t sample_count = 0;
    TokenLengthStats cot;     // over samples that carry a CoT
    TokenLengthStats result;  // over all samples
};

nlohmann::ordered_json to_json(const CorpusTokenStats& stats);

// Streaming accumulator; callers split multi-turn conversations into
// per-turn samples before feeding it.
class TokenStatsAccumulator {
public:
    explicit TokenStatsAccumulator(const TokenCounter& counter) : counter_(counter) {}

    void add(std::optional<std::string_view> cot_text, std::string_view result_text);
    CorpusTokenStats finish() const;

private:
    const TokenCounter& counter_;
    std::vector<std::size_t> cot_counts_;
    std::vector<std::size_t> result_counts_;
};

}  // namespace fcc::loss
