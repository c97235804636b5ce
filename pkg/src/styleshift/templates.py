"""Prompt template text, pinned in one place so tests can assert exact strings.

Bump TEMPLATE_VERSION when any of these strings change; rendered prompts
are pure functions of their inputs and these templates.
"""

TEMPLATE_VERSION = 1

PROMPT_HEADER = (
    "Rewrite the following text from style {source_style} to style "
    "{target_style}, preserving content."
)

PAIR_SEPARATOR = " ||| "

SAMPLE_LINE = "Sample {number}: {source} ||| {target}"

ANALYSIS_LINE = "{analysis} [type]: {label}"

INPUT_BLOCK = "Input: {text}\nOutput:"


def render_input_block(text: str) -> str:
    return INPUT_BLOCK.format(text=text)
