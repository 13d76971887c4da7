#include <array>
#include <fstream>
#include <sstream>

#include "fcc/endpoint_clients.hpp"

namespace fcc::net {

namespace {

const std::string kResponseId = R"(Workflow

1) Determine whether the Reference Answer is a function_tool call or a response statement. The function call may not be in the standard function_tool call format. If it is a function_tool call, output <judge>True</judge>; if it is a response, output <judge>False</judge>.

Hint: Common function_tool call formats include the following, where function_name is generally from candidate_function_tools:

[func_name1(params_name1=params_value1, params_name2=params_value2...), func_name2(params_name3=params_value3, params_name4=params_value4...)]

Output format: <think>thought process</think><judge>True/False</judge>

Input

Reference Answer: <refANS>
)";

const std::string kQueryToolId = R"(Workflow

Judge whether the User Query and Candidate Function Tools meet the following requirements:

1) Determine whether the parameter values of the function call can be analyzed from the User Query and the function name can be analyzed from the Candidate Function Tools. If parameter values and function names can be analyzed, output <judge>True</judge>; otherwise, output <judge>False</judge>.

Output format: <think>thought process</think><judge>True/False</judge>

Input

User Query: <query>

Candidate Function Tools: <tools>
)";

const std::string kCotId = R"(Workflow

Judge whether the Chain-of-Thought leads to the Reference Function Call by evaluating the following requirements:

1) Determine whether the Chain-of-Thought starts from a proper position.

2) Determine whether every step tightly follows the above step and makes correct inference.

3) Determine whether the last step of reasoning points to the correct answer.

If the Chain-of-Thought meets all the requirements, output <judge>True</judge>; otherwise, output <judge>False</judge>.

Output format: <think>thought process</think><judge>True/False</judge>

Input

Chain-of-Thought: <CoT process>

Reference Function Call: <refFC>
)";

const std::string kFuncParamId = R"(Workflow

Judge whether the function names and parameters in the Reference Function Call meet the following requirements:

1) Determine whether the function names and parameter values of the function call are correct. If the function names and parameters are valid, output <judge>True</judge>; otherwise, output <judge>False</judge>.

2) When the function names and parameters requirements are met, output the new function call result according to the Reference Function Call. When the function names and parameters requirements are not met, modify the Reference Function Call format to obtain a new function call result that meets the name and parameters requirements.

Output format:

<think>thought process</think><judge>True/False</judge>

<NewFC>

[func_name1(params_name1=params_value1, params_name2=params_value2...), func_name2(params_name3=params_value3, params_name4=params_value4...)]

</NewFC>

Input

User query: <query>

Candidate function tools: <tools>

Reference Function Call: <refFC>
)";

const std::string kFormatId = R"(Workflow

Judge whether the answer meets the following requirements:

1) The output function_tool format must satisfy the format:

[func_name1(params_name1=params_value1, params_name2=params_value2...), func_name2(params_name3=params_value3, params_name4=params_value4...)]

Note: The parameter name param_name should not be enclosed in " or ', for example:

Incorrect:

- [getPrivacyViolationRisk(data="paramvalue1", purpose="paramvalue2")]
- [getPrivacyViolationRisk(data='paramvalue1', purpose='paramvalue2')]

The paramValue parameter value, based on its value type, needs to be enclosed in quotes if it is a string.

2) When the output meets the format requirements, output <judge>True</judge>; otherwise, output <judge>False</judge>.

3) When the format requirements are met, output the new function call result according to the Reference Function Call. When the format requirements are not met, modify the Reference Function Call format to obtain a new function call result that meets the format requirements. Do not add or modify parameters and parameter values; only modify the output format.

Output format:

<think>thought process</think><judge>True/False</judge>

<NewFC>

[func_name1(params_name1=params_value1, params_name2=params_value2...), func_name2(params_name3=params_value3, params_name4=params_value4...)]

</NewFC>

Input

User query: <query>

Candidate function tools: <tools>

Reference Function Call: <refFC>
)";

// The by-the-book True/False prompts above cover filtration; loop scoring
// needs a number, so this template asks for one on the same inputs.
const std::string kJudgeScore = R"(Workflow

1) Evaluate whether the Candidate Response correctly answers the User Query given the Candidate Function Tools. Consider function selection, parameter names, parameter values, and output format.

2) Output a single score in the range [0, 1], where 1 means fully correct and usable as training data and 0 means unusable. Output only the number.

Input

User Query: <query>

Candidate Function Tools: <tools>

Candidate Response: <candidate>
)";

const std::string kGenerator = R"(You are an expert in composing functions. You are given a question and a set of possible functions. Based on the question, you will need to make one or more function/tool calls to achieve the purpose. If none of the functions can be used, point it out. If the given question lacks the parameters required by the function, also point it out.

You should only return the function calls in your response. If you decide to invoke any of the function(s), you MUST put it in the format of [func_name1(params_name1=params_value1, params_name2=params_value2...), func_name2(params)]. You SHOULD NOT include any other text in the response.

Here is a list of functions in JSON format that you can invoke:

<tools>
)";

struct TemplateInfo {
    PromptTemplateId id;
    const char* name;
    const std::string* text;
};

const std::array<TemplateInfo, 7>& templates() {
    static const std::array<TemplateInfo, 7> table = {{
        {PromptTemplateId::ResponseId, "response_id", &kResponseId},
        {PromptTemplateId::QueryToolId, "query_tool_id", &kQueryToolId},
        {PromptTemplateId::CotId, "cot_id", &kCotId},
        {PromptTemplateId::FuncParamId, "func_param_id", &kFuncParamId},
        {PromptTemplateId::FormatId, "format_id", &kFormatId},
        {PromptTemplateId::JudgeScore, "judge_score", &kJudgeScore},
        {PromptTemplateId::Generator, "generator", &kGenerator},
    }};
    return table;
}

void replace_all(std::string& text, const std::string& needle, const std::string& value) {
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        text.replace(pos, needle.size(), value);
        pos += value.size();
    }
}

void substitute(std::string& text, const std::string& placeholder,
                const std::optional<std::string>& value, PromptTemplateId id) {
    if (text.find(placeholder) == std::string::npos) return;
    if (!value)
        throw PromptError(std::string("template '") + prompt_template_name(id) +
                          "' needs field " + placeholder);
    replace_all(text, placeholder, *value);
}

}  // namespace

const char* prompt_template_name(PromptTemplateId id) {
    for (const auto& t : templates())
        if (t.id == id) return t.name;
    return "?";
}

std::optional<PromptTemplateId> prompt_template_from_name(std::string_view name) {
    for (const auto& t : templates())
        if (name == t.name) return t.id;
    return std::nullopt;
}

const std::string& prompt_template_text(PromptTemplateId id) {
    for (const auto& t : templates())
        if (t.id == id) return *t.text;
    throw PromptError("unknown template id");
}

std::vector<std::string> prompt_template_placeholders(PromptTemplateId id) {
    static const std::vector<std::string> all = {"<refANS>", "<query>",     "<tools>",
                                                 "<CoT process>", "<refFC>", "<candidate>"};
    const std::string& text = prompt_template_text(id);
    std::vector<std::string> out;
    for (const auto& p : all)
        if (text.find(p) != std::string::npos) out.push_back(p);
    if (id == PromptTemplateId::Generator) out.push_back("<query>");  // final user message
    return out;
}

std::vector<Message> render_prompt(PromptTemplateId id, const PromptFields& fields,
                                   const std::string& prompt_dir) {
    std::string text;
    if (!prompt_dir.empty()) {
        std::ifstream in(prompt_dir + "/" + prompt_template_name(id) + ".txt");
        if (in) {
            std::ostringstream buf;
            buf << in.rdbuf();
            text = buf.str();
        }
    }
    if (text.empty()) text = prompt_template_text(id);

    substitute(text, "<refANS>", fields.ref_answer, id);
    substitute(text, "<query>", fields.query, id);
    substitute(text, "<tools>", fields.tools, id);
    substitute(text, "<CoT process>", fields.cot, id);
    substitute(text, "<refFC>", fields.ref_call, id);
    substitute(text, "<candidate>", fields.candidate, id);

    if (id == PromptTemplateId::Generator) {
        if (!fields.query) throw PromptError("generator template needs field <query>");
        std::vector<Message> messages;
        messages.push_back({"system", text});
        for (const auto& turn : fields.history) messages.push_back(turn);
        messages.push_back({"user", *fields.query});
        return messages;
    }
    return {{"user", text}};
}

}  // namespace fcc::net
