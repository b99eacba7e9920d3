"""Binned output generation (BOG) benchmarking of random circuits.

Modules map onto the workflow: ``simcore`` simulates, ``circuitgen``
builds and serializes circuits, ``bogmetric`` bins and scores, ``analysis``
fits decays and converts them into errors per gate, and ``pipeline`` / ``cli``
tie the pieces into end-to-end experiments.
"""

__version__ = "0.1.0"
