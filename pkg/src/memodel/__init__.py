"""memodel: litmus-test checking for table-parameterized atomic memory models.

Four interchangeable engines compute the allowed outcomes of a litmus test
under a model given by a pairwise ordering table plus two variant flags:

* ``axiomatic`` - witness search over global total orders of memory events;
* ``com``       - per-address coherence orders with two acyclicity axioms;
* ``rob``       - reorder-buffer machine with speculative loads and kills;
* ``i2e``       - in-order machine with store/fence buffers.

The harness cross-checks them against each other and against independent
interleaving / store-buffer oracles.
"""

__version__ = "0.1.0"
