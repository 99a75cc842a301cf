"""Regenerate the prompt template assets and their checksum manifest.

Run from the repo root: python scripts/gen_templates.py
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "src" / "verify_forge" / "templates"

SELF_ANSWER = """\
Answer the question clearly by providing any relevant and necessary information while avoiding detailed and overly long explanations that are not required to adequately respond to the question.

Question: {{q}}
"""

REVISED_ANSWER = """\
Answer the question clearly by providing any relevant and necessary information while avoiding detailed and overly long explanations that are not required to adequately respond to the question.

Taking the following verification question and answer into account:
Verification question: {{qv}}
Verification answer: {{av}}

Answer the following question:
{{q}}
"""

TEACHER_SKELETON = """\
You are an AI assistant tasked with generating *verification questions* to probe the consistency of a language model's knowledge. {goal}

You are given:

* An **original question**.
* The ground truth answer for the question.
* The **answer generated by the model** (which may or may not be correct).

Your task:

1. {task1}
2. Then, output a verification question — {task2}
3. Ensure the verification question is clear, not overly complex, and does not introduce any new information, new facts, entities, or assumptions that were not already part of the original question.
4. Provide the anwer to the verification question.

While the ground truth answer is provided for reference, the question should not incorporate any information or hints from the answer.

---
**Example Input:**
**Original Question:** What is the capital of Canada?
**Ground truth Answer:** Ottawa
**Model's Answer:** Toronto is the capital of Canada.

**Example Output:**
**Reasoning:**
{example_reasoning}

**Verification Question:** `{example_qv}`

**Answer:** {example_answer}

## Original Question: {{{{q}}}}

## Ground truth Answer: {{{{gold}}}}

## Model's Answer: {{{{a0}}}}

{closing}
"""

REPHRASE_CLOSING = (
    "Remember, the verification question should not introduce new information, and it "
    "should be answerable by the same ground truth answer as for the original question."
)
GENERIC_CLOSING = (
    "Remember, the verification question must stay anchored to the fact asked about by "
    "the original question and must not introduce unrelated new information."
)

TEACHER_VARIANTS = {
    "rephrase": dict(
        goal=(
            "The goal is to see if the model gives consistent responses to semantically "
            "equivalent but differently phrased questions."
        ),
        task1=(
            "Explain briefly how you will rephrase the original question to enquire about "
            "the same fact from a different angle, without introducing any new information."
        ),
        task2=(
            "a reworded version of the original question that explores the same concept or "
            "fact, without assuming the model's answer is correct. The correct answer to "
            "this verification question must be the same as for the original question."
        ),
        example_reasoning=(
            "Asking about the location of the Parliament and the official seat of government "
            "can help verify whether a city is indeed the capital, since these are functions "
            "typically associated with a capital city."
        ),
        example_qv=(
            "What Canadian city serves as the official seat of the national government and "
            "houses the Parliament buildings?"
        ),
        example_answer="Ottawa",
        closing=REPHRASE_CLOSING,
    ),
    "implication": dict(
        goal=(
            "The goal is to generate a question about a fact that would logically follow if "
            "the model's initial answer were correct, probing whether those implications hold."
        ),
        task1=(
            "Explain briefly which implication of the model's answer you will probe and why "
            "it would have to hold if that answer were correct."
        ),
        task2=(
            "a question about a consequence that must be true if the model's answer is "
            "correct, so that an inconsistent response exposes the error."
        ),
        example_reasoning=(
            "If Toronto were really the capital, the federal institutions of Canada would have "
            "to be found there, so asking where they are probes that implication."
        ),
        example_qv=(
            "If Toronto were the capital of Canada, where would you expect to find the "
            "Canadian Parliament and federal government offices?"
        ),
        example_answer=(
            "The Canadian Parliament and federal government offices are located in Ottawa, "
            "not Toronto."
        ),
        closing=GENERIC_CLOSING,
    ),
    "inverse": dict(
        goal=(
            "The goal is to generate a reverse-direction query that asks the model to recover "
            "the original fact from its initial answer."
        ),
        task1=(
            "Explain briefly how you will invert the direction of the original question so "
            "that the model must recover the original fact from its own answer."
        ),
        task2=(
            "a reverse-direction question built from the model's answer whose correct "
            "resolution leads back to the fact asked about by the original question."
        ),
        example_reasoning=(
            "Asking which country has Toronto as its capital reverses the original question; "
            "a knowledgeable model should notice that no country has Toronto as its capital."
        ),
        example_qv="Toronto is the capital of which country?",
        example_answer=(
            "Toronto is not the capital of any country; Ottawa is the capital of Canada."
        ),
        closing=GENERIC_CLOSING,
    ),
    "justification": dict(
        goal=(
            "The goal is to prompt the model to explain or justify its initial answer, "
            "revealing whether the answer is supported by a coherent factual rationale."
        ),
        task1=(
            "Explain briefly what justification for the model's answer you will request and "
            "what a coherent rationale would have to contain."
        ),
        task2=(
            "a question asking the model to justify its initial answer, such that producing "
            "the justification exposes whether the answer rests on real facts."
        ),
        example_reasoning=(
            "Requesting the reasons that make Toronto the capital forces the model to ground "
            "its answer; a model without support for the claim should fail to justify it."
        ),
        example_qv=(
            "Why do you say that Toronto is the capital of Canada? What makes it the capital?"
        ),
        example_answer=(
            "Toronto is not the capital of Canada; Ottawa is the capital, and it hosts the "
            "Parliament and the federal government."
        ),
        closing=GENERIC_CLOSING,
    ),
    "temporal": dict(
        goal=(
            "The goal is to query the historical timeline or causal process underlying the "
            "asserted fact, testing whether the answer is supported by a coherent sequence "
            "of events."
        ),
        task1=(
            "Explain briefly which historical or causal aspect of the asserted fact you will "
            "probe."
        ),
        task2=(
            "a question about when or why the asserted fact came to be, so that an "
            "unsupported answer fails to produce a coherent account."
        ),
        example_reasoning=(
            "Asking when and why Toronto became the capital probes the historical record; "
            "there is no such event, which a knowledgeable model should surface."
        ),
        example_qv="When and why was Toronto chosen as the capital of Canada?",
        example_answer=(
            "Toronto was never chosen as the capital of Canada; Ottawa was selected as the "
            "capital by Queen Victoria in 1857."
        ),
        closing=GENERIC_CLOSING,
    ),
    "abstraction": dict(
        goal=(
            "The goal is to query the role, category, or functional status of the proposed "
            "answer within a broader conceptual framework."
        ),
        task1=(
            "Explain briefly which category or functional role of the proposed answer you "
            "will probe."
        ),
        task2=(
            "a question about the category or role of the model's answer whose correct "
            "classification reveals whether the original answer was right."
        ),
        example_reasoning=(
            "Asking what role Toronto plays in Canada's political system forces the model to "
            "classify the city correctly, exposing the confusion between provincial and "
            "federal capitals."
        ),
        example_qv=(
            "What role does Toronto play in Canada's political system—is it a provincial "
            "capital, the federal capital, or something else?"
        ),
        example_answer=(
            "Toronto is the provincial capital of Ontario, not the federal capital; the "
            "federal capital of Canada is Ottawa."
        ),
        closing=GENERIC_CLOSING,
    ),
    "disjunction": dict(
        goal=(
            "The goal is to introduce a mutually exclusive alternative that forces the model "
            "to reconcile conflicting factual commitments."
        ),
        task1=(
            "Explain briefly which mutually exclusive alternative you will pit against the "
            "model's answer."
        ),
        task2=(
            "a question that confronts the model's answer with an incompatible alternative, "
            "so that the model must commit to exactly one."
        ),
        example_reasoning=(
            "A capital city hosts the national parliament; asking which city would host it "
            "if Toronto were the capital creates a conflict the model must resolve."
        ),
        example_qv=(
            "If Toronto were the capital of Canada, which city would host the Canadian "
            "Parliament?"
        ),
        example_answer=(
            "The Canadian Parliament is hosted in Ottawa, the actual capital of Canada."
        ),
        closing=GENERIC_CLOSING,
    ),
    "comparative": dict(
        goal=(
            "The goal is to pose a parallel question in a related context to assess whether "
            "the model applies the same reasoning consistently across analogous cases."
        ),
        task1=(
            "Explain briefly which analogous case you will use and why the same reasoning "
            "should carry over."
        ),
        task2=(
            "a question posing a parallel case such that a model reasoning consistently will "
            "expose any flaw in its original answer."
        ),
        example_reasoning=(
            "If the model believes Toronto is the capital because it is the largest city, the "
            "same reasoning would wrongly make New York City the capital of the United "
            "States; the analogy tests that inference."
        ),
        example_qv=(
            "If Toronto were the capital of Canada because it is the largest and most "
            "well-known city, would the same reasoning imply that New York City is the "
            "capital of the United States?"
        ),
        example_answer=(
            "No; being the largest or most well-known city does not make a city the capital, "
            "just as New York City is not the capital of the United States."
        ),
        closing=GENERIC_CLOSING,
    ),
    "authority": dict(
        goal=(
            "The goal is to ask where the stated fact would be documented or how it could be "
            "verified using authoritative references."
        ),
        task1=(
            "Explain briefly which authoritative source you will ask the model to point to."
        ),
        task2=(
            "a question asking where an authoritative reference for the asserted fact could "
            "be found, so that the absence of such a source exposes the error."
        ),
        example_reasoning=(
            "Official government publications and encyclopedias record national capitals; "
            "asking for such a source for the Toronto claim tests whether it can be "
            "documented."
        ),
        example_qv=(
            "Where could one find an official source confirming that Toronto is the capital "
            "of Canada, such as a government publication or encyclopedia?"
        ),
        example_answer=(
            "No authoritative source confirms that; official Government of Canada "
            "publications and encyclopedias record Ottawa as the capital."
        ),
        closing=GENERIC_CLOSING,
    ),
}

CONSISTENCY_JUDGE = """\
You are a judge model tasked with evaluating the response of an AI assistant after a follow-up verification question. You will be provided with the following:

* The original question.
* The correct answer to the original question, which normally is about an entity, a person, a date, etc.
* The AI assistant's response to the original question (which may be incorrect). This is called "Response A".
* The AI assistant's updated response to the original question, after undergoing a verification step (which may be incorrect). This is called "Response B".

Your task is to assess the AI assistant's updated response after the **verification** on two criteria:

1. **Correctness**: Evaluate whether the AI assistant's updated response after verification is factually correct.
* Use the correct answer to the original question to determine whether the assistant's updated response after verification matches or aligns with that correct answer.
* Do not reference or take into account the assistant's response to the original question when making this judgment about the verification answer.

2. **Consistency**: Determine whether the AI assistant's updated response after verification is consistent with its original response to the original question, i.e. it refers to the same entity, person, date, etc.
* Focus only on whether the two responses present incompatible information.
* Do not consider whether the answers are factually correct or if they match the correct answer—only whether they align or conflict with one another in content or implications.

For each criterion, output your judgment as follows:

```json
{
  "correctness": {
    "justification": "<Brief explanation>",
    "verdict": "Correct" | "Incorrect"
  },
  "consistency": {
    "justification": "<Brief explanation>",
    "verdict": "Consistent" | "Inconsistent"
  }
}
```

Be concise but clear in your explanations. Base your judgment solely on the provided information.

## Original Question: {{q}}

## Correct Answer: {{gold}}

-------

## [Response A]

## Model's Initial Response to the Original Question: {{a0}}

## [Response B]

## Model's Updated Response (after verification) to the Original Question: {{a1}}
"""

GROUND_TRUTH_JUDGE = """\
You are a helpful and impartial evaluator tasked with determining whether an AI assistant's response to a given question is factually correct based on a provided ground truth answer.

You will be given:
* A question
* A ground truth answer (i.e., the correct answer)
* The AI assistant's response

Your task is to:
1. Compare the AI assistant's response to the ground truth answer.
2. Determine if the assistant's response is factually correct and fully consistent with the ground truth.
3. Judge only factual accuracy — ignore style, formatting, verbosity, or tone.

Return only one of the following three labels:
* Correct — if the assistant's response is factually consistent with the ground truth.
* Incorrect — if the assistant's response contains factual errors, omits key information, or contradicts the ground truth.
* Refusal: The response explicitly refrains from answering due to lack of knowledge, uncertainty, or refusal (e.g., "I don't know," "I'm not sure," "I don't have access to that information").

Return your response in this format: "## Reason: [your reasoning for the evaluation]; ## Label: [your label, Correct or Incorrect or Refusal]"

## [QUESTION]
{{q}}

## [GROUND-TRUTH ANSWER]
{{gold}}

## [AI ASSISTANT'S RESPONSE]
{{a}}
"""

NO_GOLD_JUDGE = """\
You are an impartial judge. Your task is to evaluate whether an AI Assistant's response correctly addresses a given question.

You will be given:
* A question
* The AI assistant's response

Your job is to determine whether the assistant's response is:
* "Correct" – The response directly and accurately answers the question. The essential information is correct and relevant, even if phrasing differs or if extra optional context is included.
* "Incorrect" – The response attempts to answer but contains factual errors, logical errors, incorrect interpretation of the question, or fails to provide the required information.
* "Refusal" – The response expresses uncertainty, lack of knowledge, or inability to answer (e.g., "I don't know", "I'm not sure", "I cannot answer that", "insufficient information").

Instructions:
- Base your judgment strictly on the correctness and relevance of the assistant's answer to the given question.
- Ignore stylistic quality, verbosity, or safety disclaimers unless they interfere with providing the correct answer.
- Provide only one of the labels: Correct, Incorrect, or Refusal.

Return your response in this format: "## Reason: [your reasoning for the evaluation]; ## Label: [your label, Correct or Incorrect or Refusal]"

## [QUESTION]
{{q}}

## [AI ASSISTANT'S RESPONSE]
{{a}}
"""

SC_CONSISTENCY_JUDGE = """\
You are an expert QA judge. Your job is to determine whether two responses to the same question are consistent at the level of the answer entity.

The answer entity is the entity that directly answers the question being asked (e.g., the person, group, organization, or place requested by the question). Your evaluation must be based only on whether both responses identify the same answer entity.

You will be given:
* A question
* A reference response
* A candidate response

Your job is to determine whether the candidate response is consistent with the reference response with respect to the answer entity.

Ignore factual correctness entirely. Ignore numbers, dates, counts, causes, outcomes, and details. Ignore uncertainty, premise rejection, explanations, tone, formatting, and emojis.

Your response must be exactly one of the following labels:
* "CONSISTENT"
* "INCONSISTENT"
* "NOT_ATTEMPTED"

Label definitions:
* "CONSISTENT" – Both responses identify or clearly point to the same answer entity that the question asks for, even if they disagree on facts, details, or whether the event occurred.
* "INCONSISTENT" – The responses identify different answer entities for the question.
* "NOT_ATTEMPTED" – The candidate response provides no identifiable answer entity to the question (e.g., refusal, empty output, or irrelevant content). Do not consider the reference response when assigning NOT_ATTEMPTED.

Return your response in this format: "## Reason: [your reasoning]; ## Label: [CONSISTENT or INCONSISTENT or NOT_ATTEMPTED]"

## [QUESTION]
{{q}}

## [REFERENCE RESPONSE]
{{reference}}

## [CANDIDATE RESPONSE]
{{candidate}}
"""

PERTURB_ONLY = """\
Let's first answer another question.

*Question*: {{aux_q}}
*Answer*: {{aux_a}}

Now let's answer the user's question.
"""

DRAFT_PLUS_PERTURB = """\
Let's first generate a draft response: {{a0}}

Now let's answer another question.

*Question*: {{aux_q}}
*Answer*: {{aux_a}}

Now let's generate a final answer to the user's question.
"""

KP_REFUSAL = "I don't know.\n"


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    bodies: dict[str, str] = {
        "self_answer": SELF_ANSWER,
        "revised_answer": REVISED_ANSWER,
        "consistency_judge": CONSISTENCY_JUDGE,
        "ground_truth_judge": GROUND_TRUTH_JUDGE,
        "no_gold_judge": NO_GOLD_JUDGE,
        "sc_consistency_judge": SC_CONSISTENCY_JUDGE,
        "perturb_only": PERTURB_ONLY,
        "draft_plus_perturb": DRAFT_PLUS_PERTURB,
        "kp_refusal": KP_REFUSAL,
    }
    for strategy, parts in TEACHER_VARIANTS.items():
        bodies[f"teacher_verify:{strategy}"] = TEACHER_SKELETON.format(**parts)

    manifest = {"version": 1, "templates": {}}
    for template_id, body in sorted(bodies.items()):
        fname = template_id.replace(":", "_") + ".txt"
        path = OUT / fname
        path.write_text(body, encoding="utf-8")
        manifest["templates"][template_id] = {
            "file": fname,
            "sha256": hashlib.sha256(body.encode("utf-8")).hexdigest(),
        }
    (OUT / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"wrote {len(bodies)} templates to {OUT}")


if __name__ == "__main__":
    main()
