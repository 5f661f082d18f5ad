"""Relation-based symbolic output feedback control for transition systems.

The package is organized bottom-up:

* :mod:`symobs.systems` -- transition systems and plants with outputs
* :mod:`symobs.relation` -- epsilon-parameterized relations stored as gauges
* :mod:`symobs.checker` -- acSR / acASR certification and side conditions
* :mod:`symobs.compose` -- composition of systems with respect to a relation
* :mod:`symobs.observer` -- powerset observers over an o-abstraction
* :mod:`symobs.lift` -- powerset lifting and output feedback synthesis
* :mod:`symobs.casestudy` -- the networked double-integrator-like example
* :mod:`symobs.simulate` -- closed-loop execution and CSV traces
"""

__version__ = "0.1.0"
