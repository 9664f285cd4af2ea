"""Vulnerability knowledge graphs from NVD CVE records.

Pipeline: NVD feeds -> distant labels -> averaged-perceptron NER ->
ontology-driven triples -> TuckER tail prediction.
"""

__version__ = "0.1.0"
