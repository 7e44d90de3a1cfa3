"""Prompt templates for every generation stage.

Each render_* function returns a PromptRequest with a stage tag, so the
replay backend can disambiguate prompts that embed the same source text.
Output schemas are load-bearing: the parsers in the consuming modules
depend on the exact field names documented here.
"""

from __future__ import annotations

import json
from typing import Any, Sequence

from .backend import EVAL_DECODE, DecodeSettings, PromptRequest

SYNTH_DECODE = DecodeSettings(temperature=0.2, max_tokens=4096)
JUDGE_DECODE = DecodeSettings(temperature=0.0, max_tokens=1024, greedy=True)

CURATOR_ROLE = "You are a scientific data curator for a technical reasoning corpus."
ENGINEER_ROLE = "You are an expert knowledge engineer and logic analyst."
DESIGNER_ROLE = "You are an expert exam and training-data designer."
JUDGE_ROLE = "You are a strict model-evaluation expert."

TRIAGE_DOMAINS = (
    "physics", "chemistry", "biology", "medicine", "materials_science",
    "computer_science", "mathematics", "engineering", "earth_science",
    "astronomy", "interdisciplinary", "other",
)
TRIAGE_LEVELS = ("introductory", "undergraduate", "graduate", "research")
TRIAGE_REASONING_TYPES = ("descriptive", "procedural", "conceptual", "mathematical", "experimental")


def _dumps(value: Any) -> str:
    return json.dumps(value, ensure_ascii=False, indent=1)


def render_triage(title: str, summary: str) -> PromptRequest:
    text = f"""Classify the document below and decide whether to retain it for knowledge extraction.

Pick 1-2 domains from: {", ".join(TRIAGE_DOMAINS)}.
Pick the highest academic level required to follow it: {", ".join(TRIAGE_LEVELS)}.
Pick the primary reasoning type: {", ".join(TRIAGE_REASONING_TYPES)}.
Set "keep" to true only when the content is technical, the level is undergraduate or above, and the reasoning type is not descriptive.
Report a confidence between 0.0 and 1.0.

Title: {title}
Summary: {summary}

Answer with a single JSON object and nothing else:
{{"domains": ["..."], "level": "...", "reasoning_type": "...", "keep": true, "confidence": 0.0}}"""
    return PromptRequest(CURATOR_ROLE, text, JUDGE_DECODE, tag="triage")


def render_chunk_score(chunk_text: str) -> PromptRequest:
    text = f"""Score the passage below on six quality dimensions, each an integer from 1 (worst) to 5 (best):

- reasoning_depth: how many logically dependent inference steps the passage chains together.
- prerequisite_density: how much prior domain knowledge a reader must already hold.
- scenario_applicability: how concretely the ideas are grounded in worked problems or real cases.
- counter_intuitive_index: how much the content corrects misconceptions or defies naive expectations.
- knowledge_synthesis: how well the passage links separate concepts into a connected framework.
- breakpoint_smoothness: how clean the passage boundaries are; judge whether the opening and closing cut off arguments mid-stream.

Passage:
{chunk_text}

Answer with a single JSON object holding exactly those six integer fields and nothing else."""
    return PromptRequest(CURATOR_ROLE, text, JUDGE_DECODE, tag="chunk_score")


def render_chain_extraction(chunk_text: str) -> PromptRequest:
    text = f"""Read the passage and extract its single most important multi-step reasoning chain: the mechanism or argument forming the backbone of the text, where each step directly causes, enables, or precedes the next.

Rules:
- Output exactly one chain covering the passage's primary narrative.
- Steps must be consecutive; do not skip intermediate steps stated in the text.
- Do not list static facts; only extract flows with a clear start condition and end state.
- Write each step so it is understandable without the source text.
- Use only the passage; never fill gaps from outside knowledge.
- Record preconditions (what must hold for the chain to apply) and negative_constraints (what the text explicitly rules out).

Passage:
{chunk_text}

Answer with a JSON array holding exactly one object, starting directly with [:
[{{"chain_id": "chain-001", "domain_context": "...", "process_name": "...", "narrative_summary": "...", "preconditions": ["..."], "negative_constraints": ["..."], "steps": ["...", "..."]}}]"""
    return PromptRequest(ENGINEER_ROLE, text, SYNTH_DECODE, tag="extract_chain")


def render_decomposition(chain_record: dict, original_text: str) -> PromptRequest:
    text = f"""Decompose the reasoning chain below into atomic relational statements.

For every adjacent pair of steps (step i, step i+1) emit one statement whose subject comes from step i and whose object comes from step i+1, joined by a specific verb phrase. Resolve pronouns to their antecedents so subject and object stand alone. Quote the short source phrase that evidences the link. Link only immediate neighbours; if the text does not support a link, skip it.

Chain:
{_dumps(chain_record)}

Source text:
{original_text}

Answer with a JSON array only, starting directly with [ and ending with ]:
[{{"statement_id": "stmt-001", "parent_chain_id": "...", "subject": "...", "predicate": "...", "object": "...", "source_quote": "..."}}]"""
    return PromptRequest(ENGINEER_ROLE, text, SYNTH_DECODE, tag="decompose")


def render_concept_harvest(statement_records: Sequence[dict]) -> PromptRequest:
    text = f"""Build a concept dictionary from the relational statements below.

Collect every unique term appearing as a subject or object. Merge lexical variants into one canonical entry with the most standard professional name. Give each concept a category type fitting the domain and a 1-2 sentence context-aware definition. Define only terms that actually appear; never introduce outside terms. For each concept list every statement_id where the term appears as subject or object.

Statements:
{_dumps(list(statement_records))}

Answer with a JSON array only, starting directly with [ and ending with ]:
[{{"concept_id": "concept-001", "term": "...", "type": "...", "definition": "...", "parent_statement_ids": ["stmt-001"]}}]"""
    return PromptRequest(ENGINEER_ROLE, text, SYNTH_DECODE, tag="harvest")


def render_benchmark_item(
    chain_record: dict,
    cid: str,
    perturbation_hints: Sequence[str],
    multi_select: bool,
) -> PromptRequest:
    if multi_select:
        answer_rule = (
            "Make this a multi-select question: 2-3 of the four options must be correct, "
            'and "answer" must list the correct letters comma-separated (e.g. "A,B,D").'
        )
    else:
        answer_rule = 'Exactly one option must be unambiguously correct; "answer" is that single letter.'
    hints = "\n".join(f"- {h}" for h in perturbation_hints) or "- (none available)"
    text = f"""Write ONE deep-reasoning multiple-choice question from the reasoning chain below. The question must test why steps follow each other or how the mechanism works, never bare recall. Include the concrete content of any step you reference; 40-100 words for the stem.

Produce four substantial options (20-60 words each, parallel structure). Wrong options must be plausible traps: reversed causality, a missing precondition, wrong step order, overgeneralization, or a misattributed mechanism. {answer_rule}

Use these structure-derived corruptions as raw material for wrong options, rephrased naturally:
{hints}

Reasoning chain (discipline {cid}):
{_dumps(chain_record)}

Answer with a single JSON object and nothing else:
{{"question": "...", "options": {{"A": "...", "B": "...", "C": "...", "D": "..."}}, "answer": "A,B", "explanation": "..."}}"""
    return PromptRequest(DESIGNER_ROLE, text, SYNTH_DECODE, tag="bench_item")


def render_sft_qa(statements: Sequence[dict], concepts: Sequence[dict], count: int) -> PromptRequest:
    text = f"""Turn the relational statements below into natural, classroom-style question-answer pairs for instruction tuning.

Rules:
- Produce at least {count} pairs, covering at least 70-90% of the statements; reuse a statement with a different angle when needed.
- Each pair focuses on exactly one statement; name the concrete subject in the question (no bare pronouns).
- Vary styles: definition, function, mechanism, verification, comparison, application.
- Answers are fluent complete sentences, not restated JSON.

Statements:
{_dumps(list(statements))}

Concept definitions for context:
{_dumps(list(concepts))}

Answer with a JSON array only:
[{{"question": "...", "answer": "...", "l2_statement_id": "stmt-001", "linked_concepts": ["concept-001"], "question_style": "mechanism"}}]"""
    return PromptRequest(DESIGNER_ROLE, text, SYNTH_DECODE, tag="sft_qa")


def render_sft_choice(
    statements: Sequence[dict],
    concepts: Sequence[dict],
    count: int,
    single_choice_ratio: float,
) -> PromptRequest:
    pct = round(single_choice_ratio * 100)
    text = f"""Write choice questions testing the relational statements below.

Rules:
- Produce at least {count} questions; roughly {pct}% single-choice, the rest multiple-choice.
- Single-choice: stem from one statement's subject, correct option from its predicate/object, three plausible distractors.
- Multiple-choice: pick a concept, gather 2-4 statements about it, make 2-3 options true facts and the rest subtly corrupted; answer lists all correct letters.
- Cover at least 70% of the statements.
- Every question carries an explanation of why the answer is right and the distractors wrong, in plain domain language without internal identifiers.

Statements:
{_dumps(list(statements))}

Concept definitions for context:
{_dumps(list(concepts))}

Answer with a JSON array only:
[{{"question": "...", "options": ["...", "...", "...", "..."], "answer": "A", "question_type": "single_choice", "explanation": "...", "l2_statement_ids": ["stmt-001"], "linked_concepts": ["concept-001"]}}]
For multiple-choice entries set "question_type": "multiple_choice" and "answer" to a list like ["A", "C"]."""
    return PromptRequest(DESIGNER_ROLE, text, SYNTH_DECODE, tag="sft_choice")


def render_sft_tf(
    statements: Sequence[dict],
    concepts: Sequence[dict],
    count: int,
    true_ratio: float,
) -> PromptRequest:
    pct = round(true_ratio * 100)
    text = f"""Write true/false judgement items from the relational statements below.

Rules:
- Produce at least {count} items; roughly {pct}% true, the rest false.
- True items restate a real statement faithfully in natural language.
- False items corrupt a real statement plausibly: invert the relation, swap a boundary condition, or encode a common misconception.
- Cover at least 70% of the statements. No giveaway phrasing.
- Every item carries an explanation of why it is true or false, in plain domain language without internal identifiers.

Statements:
{_dumps(list(statements))}

Concept definitions for context:
{_dumps(list(concepts))}

Answer with a JSON array only:
[{{"statement": "...", "answer": "true", "question_type": "true_false", "explanation": "...", "l2_statement_ids": ["stmt-001"], "linked_concepts": ["concept-001"]}}]"""
    return PromptRequest(DESIGNER_ROLE, text, SYNTH_DECODE, tag="sft_tf")


def render_diagnosis(error_sample: dict) -> PromptRequest:
    meta = error_sample.get("metadata", {})
    text = f"""Analyze why the model answered this benchmark item incorrectly.

Question: {error_sample.get("question")}
Correct answer: {error_sample.get("true_answer")}
Model answer: {error_sample.get("predicted_answer")}
Question type: {error_sample.get("question_type")}
Subject: {error_sample.get("cid")}
Chain id: {meta.get("chain_id")}

Classify the failure as exactly one of:
- "concept_gap": the model misunderstands, confuses, or lacks a specific piece of knowledge.
- "capability_deficit": the model knows the pieces but breaks the multi-step reasoning that joins them.

Answer with a single JSON object and nothing else:
{{"issue_type": "concept_gap or capability_deficit", "key_concept": "core concept involved (brief)", "reasoning": "1-2 sentences on why the answer is wrong", "recommendation": "brief repair suggestion", "confidence": 0.9}}"""
    return PromptRequest(JUDGE_ROLE, text, JUDGE_DECODE, tag="diagnose")


_PATCH_FORMAT_RULES = {
    "open_ended": """Produce open-ended QA pairs. Questions are specific and challenging; answers run 4-6 sentences structured as definition, key attributes, application, contrast.
Schema: [{"question": "...", "answer": "..."}]""",
    "choice": """Produce multi-select choice questions: a scenario stem, four options A-D with at least two correct. Put everything in the single "answer" field: line 1 is the correct letters comma-separated, then a blank line, then a detailed per-option explanation.
Schema: [{"question": "...", "options": {"A": "...", "B": "...", "C": "...", "D": "..."}, "answer": "A,B\\n\\nexplanation..."}]""",
    "true_false": """Produce true/false judgements with subtle conditions. Always set "options" to {"A": "True", "B": "False"}. Put everything in the single "answer" field: line 1 is "A" (true) or "B" (false), then a blank line, then the reasoning.
Schema: [{"question": "...", "options": {"A": "True", "B": "False"}, "answer": "A\\n\\nreasoning..."}]""",
}


def render_concept_gap_patch(
    concept: str,
    l1_definition: str,
    l2_facts: Sequence[str],
    related_examples: str,
    fmt: str,
    count: int,
) -> PromptRequest:
    facts = "\n".join(f"- {f}" for f in l2_facts) or "- (none on record)"
    text = f"""Generate exactly {count} training samples that eliminate a diagnosed misunderstanding of one concept.

Target concept: {concept}
Definition: {l1_definition}
Known facts:
{facts}
Failure context (the question the model got wrong, its answer, and the truth):
{related_examples}

Requirements:
- Attack the specific confusion visible in the failure context; at least two samples must explicitly contrast the wrong interpretation with the correct one.
- State what the concept IS and what it IS NOT; use exact terminology from the definition and facts.
- Mix recall (what/which) with understanding (why/how/when); touch every listed fact at least once; roughly 40% definition-recall, 30% attribute-application, 30% relational-contrast.

{_PATCH_FORMAT_RULES[fmt]}

Output only the JSON array, no code fences, no extra fields, no preamble."""
    return PromptRequest(DESIGNER_ROLE, text, SYNTH_DECODE, tag=f"patch_gap_{fmt}")


def render_capability_deficit_patch(
    concept: str,
    knowledge_snippet: str,
    diagnosis_note: str,
    fmt: str,
    count: int,
) -> PromptRequest:
    text = f"""Generate exactly {count} chain-of-thought training samples that rebuild a broken multi-step reasoning pattern.

Target concept: {concept}
Knowledge to scaffold from:
{knowledge_snippet}
Diagnosed failure: {diagnosis_note}

Requirements:
- Scaffold the exact reasoning path the model failed to construct: minimum 3 explicit reasoning hops, each citing a fact and justifying why the step is needed, using markers like "Step 1:", "Therefore:".
- Open with the setup, close by synthesizing the steps into a definitive answer checked against the initial conditions.
- Never copy the knowledge text verbatim; vary question styles (why/how, what-if, compare, troubleshoot).

{_PATCH_FORMAT_RULES[fmt]}

Output only the JSON array, no code fences, no extra fields, no preamble."""
    return PromptRequest(DESIGNER_ROLE, text, SYNTH_DECODE, tag=f"patch_cot_{fmt}")


def render_eval_inference(question: str, options: dict[str, str]) -> PromptRequest:
    opts = "\n".join(f"{k}. {v}" for k, v in sorted(options.items()))
    text = f"""{question}

{opts}

Reply with only the letter(s) of the correct option(s), comma-separated, nothing else."""
    return PromptRequest("You are a careful domain expert taking an exam.", text, EVAL_DECODE, tag="eval")
