#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "raggen/corpus.hpp"

namespace raggen {

struct PromptMessages {
  std::string system;
  std::string user;

  bool operator==(const PromptMessages&) const = default;
};

namespace prompts {

inline constexpr std::string_view kDefaultSystem =
    "You are a helpful assistant.";

// Candidate-answer extraction instruction.
inline constexpr std::string_view kAnswerGeneration =
    "Based on the context, generate several candidate spans within the passage "
    "that are likely to be answers to a question. The answers can be entities, "
    "verbs or even numbers. Make sure that the answers are different and "
    "diverse. Separate different candidate answers with a semicolon (';').";

// Answer-conditioned question generation; {answer} is the designated span.
inline constexpr std::string_view kQuestionGeneration =
    "Based on the context, please generate a question that is relevant to the "
    "information provided. The question should stand alone and not refer back "
    "to the context explicitly. The question should be clear and "
    "understandable without needing the context. The answer to the question "
    "should be {answer}.";

// Claim generation; {polarity} is "supported" or "refuted".
inline constexpr std::string_view kClaimGeneration =
    "Based on the context, please generate a claim that can be {polarity} by "
    "the context.";

inline constexpr std::string_view kClaimQuestionTemplate =
    "Is the statement {claim} correct?";

// Task-specific answering instructions used at training and inference time.
inline constexpr std::string_view kShortSpanInstruction =
    "Answer the following question with a short span.";
inline constexpr std::string_view kMultipleChoiceInstruction =
    "Answer the following question by selecting one of the provided options "
    "with A, B, C, or D. Please answer with the capitalized alphabet only, "
    "without adding any extra phrase or period.";
inline constexpr std::string_view kYesNoInstruction =
    "Answer the following question with Yes or No.";
inline constexpr std::string_view kClaimInstruction =
    "Answer the following question with Yes or No. Is the statement {claim} "
    "correct?";
inline constexpr std::string_view kShortPhraseInstruction =
    "Answer the following question with a short phrase.";
inline constexpr std::string_view kArithmeticInstruction =
    "Answer the following question with a number from context or the math "
    "arithmetic using +,-,*, or /.";
inline constexpr std::string_view kSpanOrFullInstruction =
    "Answer the following question with a short span, or a full and complete "
    "answer.";
inline constexpr std::string_view kCitedAnswerInstruction =
    "Please give a full and complete answer for the question using only the "
    "provided search results (some of which might be irrelevant) and cite "
    "them properly. Use an unbiased and journalistic tone. When citing "
    "several search results, use [1][2][3].";
inline constexpr std::string_view kFullAnswerInstruction =
    "Please give a full and complete answer for the question.";

// "Title: {title}, Text: {text}"; the title part is omitted when empty.
std::string context_block(const Passage& passage);

// "Context 1: ..." blocks in rank order, separated by blank lines.
std::string numbered_context_blocks(const std::vector<Passage>& contexts);

std::string substitute(std::string_view tmpl, std::string_view placeholder,
                       std::string_view value);

}  // namespace prompts

enum class ClaimPolarity { supported, refuted };

// The four prompt renderers. All are pure: equal inputs produce byte-equal
// messages, and each embeds its template verbatim.
PromptMessages render_answer_prompt(const Passage& passage);
PromptMessages render_question_prompt(const Passage& passage, std::string_view answer);
PromptMessages render_claim_prompt(const Passage& passage, ClaimPolarity polarity);
PromptMessages render_inference_prompt(const std::vector<Passage>& contexts,
                                       std::string_view specific_instruction,
                                       std::string_view question);

}  // namespace raggen
