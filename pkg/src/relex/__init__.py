"""Hidden cross-sentence relation extraction with LLM prompting.

Stages: corpus -> ner -> pairing -> prompting -> llm_client -> relparse ->
triplestore -> query, plus evalkit for annotator agreement.
"""

__version__ = "0.1.0"
