"""splac: assurance cases for annotative software product lines.

The package provides feature-expression reasoning, featured transition
systems, product-level and lifted analyses, assurance-case trees with
verifiable templates, and the product and lifted regression procedures,
fronted by the ``splac`` command-line tool.
"""

__version__ = "0.1.0"
