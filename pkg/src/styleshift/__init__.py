"""Style transfer via synthesized few-shot prompts and contrastive decoding."""

__version__ = "0.1.0"
