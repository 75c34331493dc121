"""Exact analytics and Monte Carlo for the CNOT entangling-probe attack on BB84.

Submodules:

* :mod:`fpb_probe.quantum` -- states, operators, Born rule for 1-2 qubits
* :mod:`fpb_probe.model` -- probe states, CNOT gate and Eve's measurements
* :mod:`fpb_probe.analytics` -- joint tables and Renyi information
* :mod:`fpb_probe.montecarlo` -- seeded protocol simulation
* :mod:`fpb_probe.cli` -- the ``fpb-probe`` command
"""

__version__ = "0.1.0"
