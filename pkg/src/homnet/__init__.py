"""homnet: homomorphism-query networks over relational databases.

The package splits into:

- ``relational``  schemas, databases, structural measures, JSON format
- ``matching``    homomorphism / embedding enumeration and the
                  hom-count <-> embedding-count basis conversion
- ``neural``      feed-forward nets (exact-rational + float), autodiff,
                  Adam, losses, LayerNorm
- ``logic``       formula ASTs, brute-force semantics, strict form
- ``network``     homomorphism queries, network layers, evaluation
- ``compiler``    formula -> network compilation with equivalence checks
- ``analysis``    bounded-model emptiness / subsumption for networks
- ``datasets``    synthetic labeled benchmarks with oracle labels
- ``harness``     training loop, metrics, experiment reproduction
- ``cli``         the ``homnet`` command
"""

__version__ = "0.1.0"
